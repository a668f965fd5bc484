//! Encoder-decoder sequence model: a source-language LSTM feeding its final
//! state into a target-language LSTM with a softmax vocabulary head.

mod checkpoint;
mod gradcheck;
mod lstm;
mod train;

pub use checkpoint::{load_model, save_model};
pub use gradcheck::gradient_check;
pub use lstm::{lstm_step, LstmCellParams};
pub use train::train_translator;
pub(crate) use train::{encode_pair_ids, forced_predictions, forward_pair};

use crate::corpus::{self, CorpusError, Vocabulary};
use crate::embeddings::EmbeddingSpace;
use crate::linalg::Matrix;
use crate::rngutil::stage_rng;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TranslatorError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence { epoch: usize },
    #[error("no training pairs supplied")]
    EmptyPairs,
    #[error("checkpoint malformed: {0}")]
    Format(String),
    #[error("sequence encoding failed: {0}")]
    Encoding(#[from] CorpusError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Training hyperparameters. `max_len` is the padded sequence length used
/// when encoding pairs; `max_pairs` caps how much of the pair list is used.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub latent_dim: usize,
    pub max_pairs: usize,
    pub max_len: usize,
    pub learning_rate: f64,
    pub grad_clip: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 64,
            epochs: 100,
            latent_dim: 256,
            max_pairs: 10_000,
            max_len: 20,
            learning_rate: 0.001,
            grad_clip: 5.0,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TranslatorError> {
        if self.batch_size < 1 {
            return Err(TranslatorError::Config("batch_size must be >= 1".into()));
        }
        if self.epochs < 1 {
            return Err(TranslatorError::Config("epochs must be >= 1".into()));
        }
        if self.latent_dim < 1 {
            return Err(TranslatorError::Config("latent_dim must be >= 1".into()));
        }
        if self.max_pairs < 1 {
            return Err(TranslatorError::Config("max_pairs must be >= 1".into()));
        }
        if self.max_len < 3 {
            return Err(TranslatorError::Config("max_len must be >= 3".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(TranslatorError::Config(
                "learning_rate must be positive".into(),
            ));
        }
        if !(self.grad_clip.is_finite() && self.grad_clip > 0.0) {
            return Err(TranslatorError::Config("grad_clip must be positive".into()));
        }
        Ok(())
    }
}

/// The full translation model: one embedding table and LSTM per side, plus
/// the softmax output head over the target vocabulary.
#[derive(Debug, Clone)]
pub struct Seq2SeqModel {
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    pub src_embed: Matrix,
    pub tgt_embed: Matrix,
    pub encoder: LstmCellParams,
    pub decoder: LstmCellParams,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
    pub hyper: TrainConfig,
}

impl Seq2SeqModel {
    pub fn embed_dim(&self) -> usize {
        self.src_embed.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.encoder.hidden_dim()
    }
}

/// Build an untrained model over two embedding spaces of equal dimension.
/// Real-token embedding rows are copied from the spaces; marker rows draw
/// uniform from ±0.05 and all network weights from ±1/sqrt(h), seeded by
/// `config.seed`. Biases start at zero except the forget gates, which start
/// at one so early cell states persist across steps.
pub fn init_model(
    src_space: &EmbeddingSpace,
    tgt_space: &EmbeddingSpace,
    config: &TrainConfig,
) -> Result<Seq2SeqModel, TranslatorError> {
    config.validate()?;
    if src_space.dim != tgt_space.dim {
        return Err(TranslatorError::Config(format!(
            "embedding dims differ: {} vs {}",
            src_space.dim, tgt_space.dim
        )));
    }
    let d = src_space.dim;
    let h = config.latent_dim;
    let mut rng = stage_rng(config.seed, "model-init");

    let fill_embed = |space: &EmbeddingSpace, rng: &mut rand_chacha::ChaCha8Rng| {
        let v = space.vocab.len();
        let mut table = Matrix::zeros(v, d);
        for id in 0..v {
            let dest = table.row_mut(id);
            if Vocabulary::is_special(id) {
                for value in dest.iter_mut() {
                    *value = rng.random::<f64>() * 0.1 - 0.05;
                }
            } else {
                dest.copy_from_slice(space.row(id));
            }
        }
        table
    };
    let src_embed = fill_embed(src_space, &mut rng);
    let tgt_embed = fill_embed(tgt_space, &mut rng);

    let scale = 1.0 / (h as f64).sqrt();
    let draw = |n: usize, rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
        (0..n)
            .map(|_| (rng.random::<f64>() * 2.0 - 1.0) * scale)
            .collect()
    };
    let cell = |input_dim: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        let mut b = vec![0.0; 4 * h];
        b[h..2 * h].fill(1.0);
        LstmCellParams {
            w_x: Matrix::from_vec(4 * h, input_dim, draw(4 * h * input_dim, rng)),
            w_h: Matrix::from_vec(4 * h, h, draw(4 * h * h, rng)),
            b,
        }
    };
    let encoder = cell(d, &mut rng);
    let decoder = cell(d, &mut rng);
    let vt = tgt_space.vocab.len();
    let w_out = Matrix::from_vec(vt, h, draw(vt * h, &mut rng));
    let b_out = vec![0.0; vt];

    Ok(Seq2SeqModel {
        src_vocab: src_space.vocab.clone(),
        tgt_vocab: tgt_space.vocab.clone(),
        src_embed,
        tgt_embed,
        encoder,
        decoder,
        w_out,
        b_out,
        hyper: config.clone(),
    })
}

/// Run the encoder over the non-padding positions of `src_indices` and
/// return the final hidden and cell states. An effectively empty sequence
/// yields zero states.
pub fn encode(
    model: &Seq2SeqModel,
    src_indices: &[usize],
) -> Result<(Vec<f64>, Vec<f64>), TranslatorError> {
    let h_dim = model.hidden_dim();
    let mut h = vec![0.0; h_dim];
    let mut c = vec![0.0; h_dim];
    for &id in src_indices {
        if id >= model.src_vocab.len() {
            return Err(TranslatorError::Input(format!(
                "source index {id} out of range for vocabulary of {}",
                model.src_vocab.len()
            )));
        }
        if id == Vocabulary::PAD {
            continue;
        }
        let (h_new, cache) = lstm::forward_step(&model.encoder, model.src_embed.row(id), &h, &c);
        h = h_new;
        c = cache.c_new;
    }
    Ok((h, c))
}

/// Teacher-forced decoder pass: feed each gold token and emit the logits for
/// the following position. Returns one logits row per predicted position.
pub fn decode_train(
    model: &Seq2SeqModel,
    tgt_indices: &[usize],
    init_states: (&[f64], &[f64]),
) -> Result<Vec<Vec<f64>>, TranslatorError> {
    let effective: Vec<usize> = tgt_indices
        .iter()
        .copied()
        .filter(|&id| id != Vocabulary::PAD)
        .collect();
    for &id in &effective {
        if id >= model.tgt_vocab.len() {
            return Err(TranslatorError::Input(format!(
                "target index {id} out of range for vocabulary of {}",
                model.tgt_vocab.len()
            )));
        }
    }
    if effective.first() != Some(&Vocabulary::SOS) {
        return Err(TranslatorError::Input(
            "target sequence must begin with the start marker".into(),
        ));
    }

    let mut h = init_states.0.to_vec();
    let mut c = init_states.1.to_vec();
    let mut rows = Vec::new();
    for t in 0..effective.len().saturating_sub(1) {
        let (h_new, cache) =
            lstm::forward_step(&model.decoder, model.tgt_embed.row(effective[t]), &h, &c);
        h = h_new;
        c = cache.c_new;
        let mut logits = model.b_out.clone();
        model.w_out.matvec_add(&h, &mut logits);
        rows.push(logits);
    }
    Ok(rows)
}

/// Greedy decoding: encode the source tokens, then repeatedly feed back the
/// argmax token until the end marker or `max_len` outputs. Padding and start
/// markers are never emitted; logit ties resolve to the lowest index.
pub fn translate_greedy(
    model: &Seq2SeqModel,
    src_tokens: &[String],
    max_len: usize,
) -> Result<Vec<String>, TranslatorError> {
    if src_tokens.is_empty() {
        return Ok(Vec::new());
    }
    let src_ids = corpus::encode_sequence(&model.src_vocab, src_tokens, model.hyper.max_len)?;
    let (mut h, mut c) = encode(model, &src_ids)?;

    let mut output = Vec::new();
    let mut prev = Vocabulary::SOS;
    while output.len() < max_len {
        let (h_new, cache) =
            lstm::forward_step(&model.decoder, model.tgt_embed.row(prev), &h, &c);
        h = h_new;
        c = cache.c_new;
        let mut logits = model.b_out.clone();
        model.w_out.matvec_add(&h, &mut logits);

        let mut best = Vocabulary::EOS;
        let mut best_score = f64::NEG_INFINITY;
        for (id, &score) in logits.iter().enumerate() {
            if id == Vocabulary::PAD || id == Vocabulary::SOS {
                continue;
            }
            if score > best_score {
                best_score = score;
                best = id;
            }
        }
        if best == Vocabulary::EOS {
            break;
        }
        output.push(model.tgt_vocab.token(best).unwrap().to_string());
        prev = best;
    }
    Ok(output)
}
