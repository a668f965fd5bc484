//! Per-language word vector spaces trained with skip-gram and negative
//! sampling, plus the similarity queries the rest of the pipeline uses.

use crate::corpus::{Lang, Vocabulary};
use crate::linalg::{self, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("cosine similarity undefined for a zero vector")]
    UndefinedSimilarity,
    #[error("token {0:?} not in vocabulary")]
    UnknownToken(String),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("embedding file malformed: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Skip-gram training settings. The negative-sampling distribution is fixed
/// at unigram count^0.75 and the learning rate decays linearly from
/// `initial_lr` to `min_lr` over the whole run.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    /// Frequency threshold for subsampling frequent tokens; a token with
    /// corpus frequency f is kept with probability min(1, sqrt(t/f)).
    /// Values >= 1.0 disable subsampling.
    pub subsample_t: f64,
    pub seed: u64,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        SgnsConfig {
            dim: 100,
            window: 5,
            negatives: 5,
            epochs: 5,
            initial_lr: 0.025,
            min_lr: 1e-4,
            subsample_t: 1e-4,
            seed: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim < 1 {
            return Err(EmbeddingError::Config("dim must be >= 1".into()));
        }
        if self.window < 1 {
            return Err(EmbeddingError::Config("window must be >= 1".into()));
        }
        if self.negatives < 1 {
            return Err(EmbeddingError::Config("negatives must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(EmbeddingError::Config("epochs must be >= 1".into()));
        }
        if !(self.min_lr > 0.0 && self.min_lr <= self.initial_lr) {
            return Err(EmbeddingError::Config(
                "need 0 < min_lr <= initial_lr".into(),
            ));
        }
        Ok(())
    }
}

/// A trained word-vector table for one language. Holds the input (target)
/// vectors only; context vectors are discarded after training.
#[derive(Debug, Clone)]
pub struct EmbeddingSpace {
    pub lang: Lang,
    pub dim: usize,
    pub vocab: Vocabulary,
    vectors: Matrix,
}

impl EmbeddingSpace {
    /// Assemble a space from already-built parts; the matrix must have one
    /// row per vocabulary entry.
    pub fn from_parts(
        lang: Lang,
        vocab: Vocabulary,
        vectors: Matrix,
    ) -> Result<Self, EmbeddingError> {
        if vectors.rows() != vocab.len() {
            return Err(EmbeddingError::DimMismatch(format!(
                "{} vector rows for {} vocabulary entries",
                vectors.rows(),
                vocab.len()
            )));
        }
        Ok(EmbeddingSpace {
            lang,
            dim: vectors.cols(),
            vocab,
            vectors,
        })
    }

    pub fn row(&self, id: usize) -> &[f64] {
        self.vectors.row(id)
    }

    pub fn vector(&self, token: &str) -> Option<&[f64]> {
        self.vocab.id(token).map(|id| self.vectors.row(id))
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }
}

/// Result of one training run: the space plus the mean per-pair loss of each
/// epoch.
#[derive(Debug, Clone)]
pub struct SgnsOutcome {
    pub space: EmbeddingSpace,
    pub epoch_losses: Vec<f64>,
}

/// Per-sample skip-gram loss: -log sigma(u_pos . v) - sum log sigma(-u_neg . v).
pub fn sgns_sample_loss(center: &[f64], positive: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut loss = -linalg::log_sigmoid(linalg::dot(positive, center));
    for neg in negatives {
        loss -= linalg::log_sigmoid(-linalg::dot(neg, center));
    }
    loss
}

/// Analytic gradients of [`sgns_sample_loss`] with respect to the center
/// vector, the positive context vector, and each negative context vector.
pub fn sgns_sample_gradients(
    center: &[f64],
    positive: &[f64],
    negatives: &[&[f64]],
) -> (Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let dim = center.len();
    let mut grad_center = vec![0.0; dim];

    let g_pos = linalg::sigmoid(linalg::dot(positive, center)) - 1.0;
    let mut grad_positive = vec![0.0; dim];
    linalg::axpy(g_pos, center, &mut grad_positive);
    linalg::axpy(g_pos, positive, &mut grad_center);

    let mut grad_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let g_neg = linalg::sigmoid(linalg::dot(neg, center));
        let mut grad_neg = vec![0.0; dim];
        linalg::axpy(g_neg, center, &mut grad_neg);
        linalg::axpy(g_neg, neg, &mut grad_center);
        grad_negatives.push(grad_neg);
    }
    (grad_center, grad_positive, grad_negatives)
}

struct NegativeTable {
    /// Cumulative count^0.75 weights over real-token ids.
    cdf: Vec<f64>,
    ids: Vec<usize>,
    total: f64,
}

impl NegativeTable {
    fn build(vocab: &Vocabulary) -> Self {
        let mut cdf = Vec::new();
        let mut ids = Vec::new();
        let mut acc = 0.0;
        for (id, token) in vocab.real_tokens() {
            acc += (vocab.count(token) as f64).powf(0.75);
            cdf.push(acc);
            ids.push(id);
        }
        NegativeTable {
            cdf,
            ids,
            total: acc,
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let r = rng.random::<f64>() * self.total;
        let pos = self.cdf.partition_point(|&c| c <= r);
        self.ids[pos.min(self.ids.len() - 1)]
    }
}

/// Train a skip-gram space over tokenized sentences. Training is
/// single-threaded and bit-reproducible for a fixed seed. Out-of-vocabulary
/// tokens are dropped from the stream; windows clip at sentence boundaries.
pub fn train_skipgram(
    corpus: &[Vec<String>],
    vocab: &Vocabulary,
    lang: Lang,
    config: &SgnsConfig,
) -> Result<SgnsOutcome, EmbeddingError> {
    config.validate()?;

    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|sentence| {
            sentence
                .iter()
                .filter_map(|token| vocab.id(token))
                .filter(|&id| !Vocabulary::is_special(id))
                .collect()
        })
        .collect();
    let corpus_tokens: usize = sentences.iter().map(Vec::len).sum();
    if corpus_tokens == 0 {
        return Err(EmbeddingError::EmptyCorpus);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let v = vocab.len();
    let mut input = Matrix::zeros(v, config.dim);
    for value in input.data_mut() {
        *value = (rng.random::<f64>() - 0.5) / config.dim as f64;
    }
    let mut output = Matrix::zeros(v, config.dim);

    let total_count: u64 = vocab.real_tokens().map(|(_, t)| vocab.count(t)).sum();
    let keep_prob: Vec<f64> = (0..v)
        .map(|id| {
            let token = vocab.token(id).unwrap();
            let count = vocab.count(token);
            if Vocabulary::is_special(id) || count == 0 {
                return 1.0;
            }
            let freq = count as f64 / total_count as f64;
            (config.subsample_t / freq).sqrt().min(1.0)
        })
        .collect();

    let table = NegativeTable::build(vocab);
    let planned = (config.epochs * corpus_tokens) as f64;
    let mut processed = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut grad_center = vec![0.0; config.dim];

    for _ in 0..config.epochs {
        let mut epoch_loss = 0.0;
        let mut epoch_pairs = 0usize;
        for sentence in &sentences {
            let lr = {
                let frac = processed as f64 / planned;
                (config.initial_lr - (config.initial_lr - config.min_lr) * frac)
                    .max(config.min_lr)
            };
            processed += sentence.len();

            let kept: Vec<usize> = sentence
                .iter()
                .copied()
                .filter(|&id| keep_prob[id] >= 1.0 || rng.random::<f64>() < keep_prob[id])
                .collect();

            for (i, &center_id) in kept.iter().enumerate() {
                let span = 1 + (rng.random::<u64>() as usize % config.window);
                let lo = i.saturating_sub(span);
                let hi = (i + span).min(kept.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    let context_id = kept[j];

                    grad_center.fill(0.0);
                    let mut pair_loss;
                    {
                        let center = input.row(center_id);
                        let positive = output.row(context_id);
                        let s_pos = linalg::dot(positive, center);
                        pair_loss = -linalg::log_sigmoid(s_pos);
                        let g_pos = linalg::sigmoid(s_pos) - 1.0;
                        linalg::axpy(g_pos, positive, &mut grad_center);
                        let gv: Vec<f64> = center.iter().map(|&c| g_pos * c).collect();
                        linalg::axpy(-lr, &gv, output.row_mut(context_id));
                    }
                    for _ in 0..config.negatives {
                        let neg_id = table.sample(&mut rng);
                        if neg_id == context_id {
                            continue;
                        }
                        let center = input.row(center_id);
                        let negative = output.row(neg_id);
                        let s_neg = linalg::dot(negative, center);
                        pair_loss -= linalg::log_sigmoid(-s_neg);
                        let g_neg = linalg::sigmoid(s_neg);
                        linalg::axpy(g_neg, negative, &mut grad_center);
                        let gv: Vec<f64> = center.iter().map(|&c| g_neg * c).collect();
                        linalg::axpy(-lr, &gv, output.row_mut(neg_id));
                    }
                    linalg::axpy(-lr, &grad_center, input.row_mut(center_id));

                    epoch_loss += pair_loss;
                    epoch_pairs += 1;
                }
            }
        }
        epoch_losses.push(if epoch_pairs == 0 {
            0.0
        } else {
            epoch_loss / epoch_pairs as f64
        });
    }

    Ok(SgnsOutcome {
        space: EmbeddingSpace {
            lang,
            dim: config.dim,
            vocab: vocab.clone(),
            vectors: input,
        },
        epoch_losses,
    })
}

/// Cosine similarity in [-1, 1]; zero vectors are rejected.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EmbeddingError> {
    if a.len() != b.len() {
        return Err(EmbeddingError::DimMismatch(format!(
            "{} vs {}",
            a.len(),
            b.len()
        )));
    }
    let na = linalg::norm(a);
    let nb = linalg::norm(b);
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::UndefinedSimilarity);
    }
    Ok((linalg::dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Neighbor lookup key: a vocabulary token or a raw query vector.
#[derive(Debug, Clone, Copy)]
pub enum Query<'a> {
    Token(&'a str),
    Vector(&'a [f64]),
}

/// Top-k tokens by cosine similarity, descending, ties broken
/// lexicographically. A token query never returns the token itself; k is
/// clamped to the number of candidates.
pub fn nearest_neighbors(
    space: &EmbeddingSpace,
    query: Query<'_>,
    k: usize,
) -> Result<Vec<(String, f64)>, EmbeddingError> {
    if k < 1 {
        return Err(EmbeddingError::Config("k must be >= 1".into()));
    }
    let (query_vec, exclude) = match query {
        Query::Token(token) => {
            let id = space
                .vocab
                .id(token)
                .ok_or_else(|| EmbeddingError::UnknownToken(token.to_string()))?;
            (space.row(id), Some(id))
        }
        Query::Vector(vector) => {
            if vector.len() != space.dim {
                return Err(EmbeddingError::DimMismatch(format!(
                    "query has {} dims, space has {}",
                    vector.len(),
                    space.dim
                )));
            }
            (vector, None)
        }
    };

    let mut scored: Vec<(String, f64)> = Vec::with_capacity(space.vocab.len());
    for id in 0..space.vocab.len() {
        if exclude == Some(id) {
            continue;
        }
        let row = space.row(id);
        if linalg::norm(row) == 0.0 {
            continue;
        }
        let sim = cosine_similarity(query_vec, row)?;
        scored.push((space.vocab.token(id).unwrap().to_string(), sim));
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap()
            .then_with(|| a.0.cmp(&b.0))
    });
    scored.truncate(k);
    Ok(scored)
}

/// Write the space as text: header `V dim`, then one `token v0 v1 ...` line
/// per vocabulary entry. Floats use shortest round-trip formatting, so a
/// save/load cycle reproduces the matrix bit-exactly.
pub fn save_embeddings(space: &EmbeddingSpace, mut writer: impl Write) -> Result<(), EmbeddingError> {
    writeln!(writer, "{} {}", space.vocab.len(), space.dim)?;
    for id in 0..space.vocab.len() {
        write!(writer, "{}", space.vocab.token(id).unwrap())?;
        for value in space.row(id) {
            write!(writer, " {value}")?;
        }
        writeln!(writer)?;
    }
    Ok(())
}

pub fn load_embeddings(reader: impl BufRead, lang: Lang) -> Result<EmbeddingSpace, EmbeddingError> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| EmbeddingError::Format("missing header".into()))??;
    let mut parts = header.split_whitespace();
    let v: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| EmbeddingError::Format("bad vocab size in header".into()))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| EmbeddingError::Format("bad dimension in header".into()))?;
    if v < 4 {
        return Err(EmbeddingError::Format(
            "vocab must include the four marker tokens".into(),
        ));
    }

    let mut tokens = Vec::with_capacity(v);
    let mut vectors = Matrix::zeros(v, dim);
    let mut row = 0usize;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if row >= v {
            return Err(EmbeddingError::Format(format!(
                "header declared {v} vectors but more lines follow"
            )));
        }
        let mut parts = line.split(' ');
        let token = parts
            .next()
            .ok_or_else(|| EmbeddingError::Format(format!("row {row}: empty line")))?;
        tokens.push(token.to_string());
        let dest = vectors.row_mut(row);
        let mut filled = 0usize;
        for part in parts {
            if filled >= dim {
                return Err(EmbeddingError::Format(format!(
                    "row {row}: more than {dim} components"
                )));
            }
            dest[filled] = part
                .parse()
                .map_err(|_| EmbeddingError::Format(format!("row {row}: bad float {part:?}")))?;
            filled += 1;
        }
        if filled != dim {
            return Err(EmbeddingError::Format(format!(
                "row {row}: expected {dim} components, found {filled}"
            )));
        }
        row += 1;
    }
    if row != v {
        return Err(EmbeddingError::Format(format!(
            "header declared {v} vectors but found {row}"
        )));
    }

    let vocab = vocab_from_ordered_tokens(tokens)?;
    Ok(EmbeddingSpace {
        lang,
        dim,
        vocab,
        vectors,
    })
}

fn vocab_from_ordered_tokens(tokens: Vec<String>) -> Result<Vocabulary, EmbeddingError> {
    use crate::corpus::{EOS_TOKEN, PAD_TOKEN, SOS_TOKEN, UNK_TOKEN};
    let expected = [PAD_TOKEN, SOS_TOKEN, EOS_TOKEN, UNK_TOKEN];
    for (i, want) in expected.iter().enumerate() {
        if tokens.get(i).map(String::as_str) != Some(*want) {
            return Err(EmbeddingError::Format(format!(
                "embedding file must list marker {want:?} at row {i}"
            )));
        }
    }
    let mut text = String::new();
    for (i, token) in tokens.iter().enumerate() {
        let count = if i < 4 { 0 } else { 1 };
        text.push_str(&format!("{token}\t{count}\n"));
    }
    Vocabulary::load(std::io::Cursor::new(text))
        .map_err(|e| EmbeddingError::Format(format!("vocabulary reconstruction failed: {e}")))
}
