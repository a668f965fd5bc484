//! Translation quality metrics and the offline comparison protocol against
//! a reference translation file.

use crate::corpus::{normalize_text, PAD_TOKEN};
use crate::embeddings::{cosine_similarity, EmbeddingError, EmbeddingSpace};
use crate::translator::{
    encode_pair_ids, forced_predictions, forward_pair, translate_greedy, Seq2SeqModel,
    TranslatorError,
};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("aligned lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("report malformed: {0}")]
    Format(String),
    #[error(transparent)]
    Translator(#[from] TranslatorError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// Position-wise accuracy over aligned token sequences: matched non-padding
/// positions divided by total reference non-padding positions. Positions the
/// prediction does not reach count as mismatches.
pub fn token_accuracy(
    predictions: &[Vec<String>],
    references: &[Vec<String>],
) -> Result<f64, EvalError> {
    if predictions.len() != references.len() {
        return Err(EvalError::LengthMismatch(
            predictions.len(),
            references.len(),
        ));
    }
    let mut matched = 0usize;
    let mut total = 0usize;
    for (pred, reference) in predictions.iter().zip(references) {
        for (pos, gold) in reference.iter().enumerate() {
            if gold == PAD_TOKEN {
                continue;
            }
            total += 1;
            if pred.get(pos).map(String::as_str) == Some(gold.as_str()) {
                matched += 1;
            }
        }
    }
    if total == 0 {
        return Err(EvalError::EmptyInput(
            "references contain no scoreable positions".into(),
        ));
    }
    Ok(matched as f64 / total as f64)
}

fn ngram_counts(tokens: &[String], n: usize) -> BTreeMap<&[String], usize> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Default, Clone)]
struct BleuStats {
    clipped: [usize; 4],
    totals: [usize; 4],
    candidate_len: usize,
    reference_len: usize,
}

fn accumulate_bleu_stats(
    candidate: &[String],
    references: &[Vec<String>],
    max_n: usize,
    stats: &mut BleuStats,
) {
    let closest_ref = references
        .iter()
        .map(Vec::len)
        .min_by_key(|&len| {
            let diff = len.abs_diff(candidate.len());
            (diff, len)
        })
        .unwrap_or(0);
    stats.candidate_len += candidate.len();
    stats.reference_len += closest_ref;

    for n in 1..=max_n {
        let cand_counts = ngram_counts(candidate, n);
        let total: usize = cand_counts.values().sum();
        if total == 0 {
            continue;
        }
        let ref_counts: Vec<_> = references.iter().map(|r| ngram_counts(r, n)).collect();
        let mut clipped = 0usize;
        for (gram, &count) in &cand_counts {
            let best_ref = ref_counts
                .iter()
                .map(|counts| *counts.get(gram).unwrap_or(&0))
                .max()
                .unwrap_or(0);
            clipped += count.min(best_ref);
        }
        stats.clipped[n - 1] += clipped;
        stats.totals[n - 1] += total;
    }
}

fn bleu_from_stats(stats: &BleuStats, max_n: usize) -> f64 {
    if stats.candidate_len == 0 || stats.totals[0] == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=max_n {
        let total = stats.totals[n - 1];
        if total == 0 {
            continue;
        }
        let clipped = stats.clipped[n - 1];
        let precision = if clipped == 0 {
            if n == 1 {
                return 0.0;
            }
            1.0 / (total as f64 + 1.0)
        } else {
            clipped as f64 / total as f64
        };
        log_sum += precision.ln();
        orders += 1;
    }
    let geo = (log_sum / orders as f64).exp();
    let bp = if stats.candidate_len >= stats.reference_len {
        1.0
    } else {
        (1.0 - stats.reference_len as f64 / stats.candidate_len as f64).exp()
    };
    100.0 * bp.min(1.0) * geo
}

/// Sentence BLEU with clipped modified n-gram precisions up to `max_n`,
/// brevity penalty against the closest reference length (ties to the
/// shorter), and add-one smoothing of zero clipped counts for n >= 2. A zero
/// unigram precision or an empty candidate scores 0; n-gram orders longer
/// than the candidate are left out of the geometric mean.
pub fn bleu(
    candidate: &[String],
    references: &[Vec<String>],
    max_n: usize,
) -> Result<f64, EvalError> {
    if !(1..=4).contains(&max_n) {
        return Err(EvalError::Input(format!("max_n {max_n} outside 1..=4")));
    }
    if references.is_empty() || references.iter().all(Vec::is_empty) {
        return Err(EvalError::EmptyInput("no non-empty references".into()));
    }
    let mut stats = BleuStats::default();
    accumulate_bleu_stats(candidate, references, max_n, &mut stats);
    Ok(bleu_from_stats(&stats, max_n))
}

/// Corpus BLEU: n-gram statistics from all candidates are pooled before the
/// precisions, smoothing, and brevity penalty are applied (micro-average).
pub fn corpus_bleu(
    candidates: &[Vec<String>],
    references: &[Vec<Vec<String>>],
    max_n: usize,
) -> Result<f64, EvalError> {
    if !(1..=4).contains(&max_n) {
        return Err(EvalError::Input(format!("max_n {max_n} outside 1..=4")));
    }
    if candidates.len() != references.len() {
        return Err(EvalError::LengthMismatch(candidates.len(), references.len()));
    }
    if candidates.is_empty() {
        return Err(EvalError::EmptyInput("no candidates".into()));
    }
    for refs in references {
        if refs.is_empty() || refs.iter().all(Vec::is_empty) {
            return Err(EvalError::EmptyInput(
                "every candidate needs a non-empty reference".into(),
            ));
        }
    }
    let mut stats = BleuStats::default();
    for (candidate, refs) in candidates.iter().zip(references) {
        accumulate_bleu_stats(candidate, refs, max_n, &mut stats);
    }
    Ok(bleu_from_stats(&stats, max_n))
}

/// exp(mean teacher-forced cross-entropy per non-padding target position).
pub fn perplexity(
    model: &Seq2SeqModel,
    pairs: &[(Vec<String>, Vec<String>)],
) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput("no evaluation pairs".into()));
    }
    let mut loss_sum = 0.0;
    let mut tokens = 0usize;
    for (src, tgt) in pairs {
        let (src_ids, tgt_ids) = encode_pair_ids(model, (src, tgt))?;
        let tape = forward_pair(model, &src_ids, &tgt_ids)?;
        loss_sum += tape.loss_sum;
        tokens += tape.tokens;
    }
    let mean = loss_sum / tokens as f64;
    if !mean.is_finite() {
        return Err(EvalError::NonFinite("cross-entropy".into()));
    }
    Ok(mean.exp())
}

/// Teacher-forced next-token accuracy of the model on held-out pairs,
/// computed with [`token_accuracy`] over the argmax predictions.
pub fn forced_token_accuracy(
    model: &Seq2SeqModel,
    pairs: &[(Vec<String>, Vec<String>)],
) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput("no evaluation pairs".into()));
    }
    let mut predictions = Vec::with_capacity(pairs.len());
    let mut golds = Vec::with_capacity(pairs.len());
    for (src, tgt) in pairs {
        let (src_ids, tgt_ids) = encode_pair_ids(model, (src, tgt))?;
        let steps = forced_predictions(model, &src_ids, &tgt_ids)?;
        let mut pred_tokens = Vec::with_capacity(steps.len());
        let mut gold_tokens = Vec::with_capacity(steps.len());
        for (pred, gold) in steps {
            pred_tokens.push(model.tgt_vocab.token(pred).unwrap().to_string());
            gold_tokens.push(model.tgt_vocab.token(gold).unwrap().to_string());
        }
        predictions.push(pred_tokens);
        golds.push(gold_tokens);
    }
    token_accuracy(&predictions, &golds)
}

/// Greedy-decode every source side and score the outputs against the target
/// sides as single references with [`corpus_bleu`].
pub fn greedy_corpus_bleu(
    model: &Seq2SeqModel,
    pairs: &[(Vec<String>, Vec<String>)],
    max_n: usize,
) -> Result<f64, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::EmptyInput("no evaluation pairs".into()));
    }
    let mut candidates = Vec::with_capacity(pairs.len());
    let mut references = Vec::with_capacity(pairs.len());
    for (src, tgt) in pairs {
        candidates.push(translate_greedy(model, src, model.hyper.max_len)?);
        references.push(vec![tgt.clone()]);
    }
    corpus_bleu(&candidates, &references, max_n)
}

fn normalized_form(tokens: &[String]) -> Vec<String> {
    normalize_text(&tokens.join(" "))
}

/// Fraction of aligned outputs whose normalized token sequences are exactly
/// equal.
pub fn syntactic_correlation(
    ours: &[Vec<String>],
    reference_system: &[Vec<String>],
) -> Result<f64, EvalError> {
    if ours.len() != reference_system.len() {
        return Err(EvalError::LengthMismatch(
            ours.len(),
            reference_system.len(),
        ));
    }
    if ours.is_empty() {
        return Err(EvalError::EmptyInput("no aligned outputs".into()));
    }
    let matches = ours
        .iter()
        .zip(reference_system)
        .filter(|(a, b)| normalized_form(a) == normalized_form(b))
        .count();
    Ok(matches as f64 / ours.len() as f64)
}

/// Cosine similarity of the mean embedding vectors of two sentences, skipping
/// tokens the space does not know. `None` when either side has no known
/// tokens or the geometry degenerates to a zero vector.
pub fn sentence_similarity(
    a: &[String],
    b: &[String],
    space: &EmbeddingSpace,
) -> Result<Option<f64>, EvalError> {
    let mean = |tokens: &[String]| -> Option<Vec<f64>> {
        let mut acc = vec![0.0; space.dim];
        let mut known = 0usize;
        for token in tokens {
            if let Some(vector) = space.vector(token) {
                for (slot, value) in acc.iter_mut().zip(vector) {
                    *slot += value;
                }
                known += 1;
            }
        }
        if known == 0 {
            return None;
        }
        for slot in acc.iter_mut() {
            *slot /= known as f64;
        }
        Some(acc)
    };
    let (va, vb) = match (mean(a), mean(b)) {
        (Some(va), Some(vb)) => (va, vb),
        _ => return Ok(None),
    };
    match cosine_similarity(&va, &vb) {
        Ok(sim) => Ok(Some(sim)),
        Err(EmbeddingError::UndefinedSimilarity) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

/// How one aligned output pair was scored by [`semantic_relevance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairFlag {
    SyntacticMatch,
    Similar,
    Dissimilar,
    Indeterminate,
}

/// Embedding-cosine proxy for semantic agreement between two systems: among
/// pairs that are not already syntactically equal, the fraction whose mean
/// target-language embeddings have cosine at or above `threshold`.
/// Indeterminate pairs (no tokens known to the space on a side) are excluded
/// from the fraction; when no determinate unequal pairs exist the fraction
/// is 0.
pub fn semantic_relevance(
    ours: &[Vec<String>],
    reference_system: &[Vec<String>],
    space: &EmbeddingSpace,
    threshold: f64,
) -> Result<(f64, Vec<PairFlag>), EvalError> {
    if ours.len() != reference_system.len() {
        return Err(EvalError::LengthMismatch(
            ours.len(),
            reference_system.len(),
        ));
    }
    if ours.is_empty() {
        return Err(EvalError::EmptyInput("no aligned outputs".into()));
    }
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(EvalError::Input(format!(
            "threshold {threshold} outside [-1, 1]"
        )));
    }

    let mut flags = Vec::with_capacity(ours.len());
    let mut similar = 0usize;
    let mut determinate = 0usize;
    for (a, b) in ours.iter().zip(reference_system) {
        if normalized_form(a) == normalized_form(b) {
            flags.push(PairFlag::SyntacticMatch);
            continue;
        }
        match sentence_similarity(a, b, space)? {
            None => flags.push(PairFlag::Indeterminate),
            Some(sim) if sim >= threshold => {
                flags.push(PairFlag::Similar);
                similar += 1;
                determinate += 1;
            }
            Some(_) => {
                flags.push(PairFlag::Dissimilar);
                determinate += 1;
            }
        }
    }
    let fraction = if determinate == 0 {
        0.0
    } else {
        similar as f64 / determinate as f64
    };
    Ok((fraction, flags))
}

/// What each reported number means, embedded in the serialized report so the
/// granularity cannot be misread downstream.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct MetricDefinitions {
    pub token_accuracy: String,
    pub perplexity: String,
    pub bleu: String,
    pub syntactic_correlation: String,
    pub semantic_relevance: String,
    pub robust: String,
}

impl Default for MetricDefinitions {
    fn default() -> Self {
        MetricDefinitions {
            token_accuracy:
                "token-level: teacher-forced next-token argmax matches over held-out pairs, \
                 matched non-padding positions / total reference non-padding positions"
                    .into(),
            perplexity:
                "exp(mean teacher-forced cross-entropy per non-padding target position) on \
                 held-out pairs"
                    .into(),
            bleu: "corpus-level micro-average BLEU-4 of greedy decodes against held-out targets; \
                   clipped precisions, add-one smoothing for zero counts at n>=2, brevity \
                   penalty vs closest reference length"
                .into(),
            syntactic_correlation:
                "fraction of aligned system outputs exactly equal after normalization".into(),
            semantic_relevance:
                "embedding-cosine proxy, not a human judgment: among syntactically unequal \
                 aligned outputs, fraction with mean-vector cosine >= threshold"
                    .into(),
            robust:
                "token_accuracy > 0.60 and perplexity < 6 and 15 <= bleu <= 36".into(),
        }
    }
}

/// Aggregate quality report. `robust` is derived, never set directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub token_accuracy: f64,
    pub perplexity: f64,
    pub bleu: f64,
    pub syntactic_correlation: f64,
    pub semantic_relevance: f64,
    pub robust: bool,
    pub definitions: MetricDefinitions,
}

pub fn is_robust(token_accuracy: f64, perplexity: f64, bleu: f64) -> bool {
    token_accuracy > 0.60 && perplexity < 6.0 && (15.0..=36.0).contains(&bleu)
}

impl EvalReport {
    pub fn assemble(
        token_accuracy: f64,
        perplexity: f64,
        bleu: f64,
        syntactic_correlation: f64,
        semantic_relevance: f64,
    ) -> Self {
        EvalReport {
            token_accuracy,
            perplexity,
            bleu,
            syntactic_correlation,
            semantic_relevance,
            robust: is_robust(token_accuracy, perplexity, bleu),
            definitions: MetricDefinitions::default(),
        }
    }

    pub fn validate(&self) -> Result<(), EvalError> {
        let expected = is_robust(self.token_accuracy, self.perplexity, self.bleu);
        if self.robust != expected {
            return Err(EvalError::Format(format!(
                "robust flag {} contradicts thresholds (expected {})",
                self.robust, expected
            )));
        }
        Ok(())
    }

    pub fn save(&self, mut writer: impl Write) -> Result<(), EvalError> {
        let text =
            serde_json::to_string_pretty(self).map_err(|e| EvalError::Format(e.to_string()))?;
        writeln!(writer, "{text}")?;
        Ok(())
    }

    pub fn load(mut reader: impl BufRead) -> Result<Self, EvalError> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let report: EvalReport =
            serde_json::from_str(&text).map_err(|e| EvalError::Format(e.to_string()))?;
        report.validate()?;
        Ok(report)
    }
}

/// Run the full protocol: held-out accuracy, perplexity, and BLEU from the
/// model, plus the two system-comparison metrics against reference
/// translations of the given sources.
pub fn build_report(
    model: &Seq2SeqModel,
    held_out: &[(Vec<String>, Vec<String>)],
    reference_rows: &[(Vec<String>, Vec<String>)],
    space: &EmbeddingSpace,
    semantic_threshold: f64,
) -> Result<EvalReport, EvalError> {
    let accuracy = forced_token_accuracy(model, held_out)?;
    let ppl = perplexity(model, held_out)?;
    let bleu_score = greedy_corpus_bleu(model, held_out, 4)?;

    let mut ours = Vec::with_capacity(reference_rows.len());
    let mut theirs = Vec::with_capacity(reference_rows.len());
    for (source, reference) in reference_rows {
        ours.push(translate_greedy(model, source, model.hyper.max_len)?);
        theirs.push(reference.clone());
    }
    let syntactic = syntactic_correlation(&ours, &theirs)?;
    let (semantic, _) = semantic_relevance(&ours, &theirs, space, semantic_threshold)?;

    Ok(EvalReport::assemble(
        accuracy, ppl, bleu_score, syntactic, semantic,
    ))
}

/// Parse a two-column TSV of (source text, reference translation) into
/// normalized token sequences.
pub fn load_reference_tsv(
    reader: impl BufRead,
) -> Result<Vec<(Vec<String>, Vec<String>)>, EvalError> {
    let mut rows = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut cols = line.splitn(2, '\t');
        let source = cols.next().unwrap_or("");
        let reference = cols.next().ok_or_else(|| {
            EvalError::Format(format!("line {}: expected two tab-separated columns", lineno + 1))
        })?;
        rows.push((normalize_text(source), normalize_text(reference)));
    }
    if rows.is_empty() {
        return Err(EvalError::EmptyInput("reference file has no rows".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocabulary, Lang, Vocabulary};
    use crate::linalg::Matrix;
    use crate::translator::{init_model, TrainConfig};
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn accuracy_identity_is_one() {
        let seqs = vec![toks("a b c"), toks("d e")];
        assert_eq!(token_accuracy(&seqs, &seqs).unwrap(), 1.0);
    }

    #[test]
    fn accuracy_counts_positionwise_matches() {
        let acc = token_accuracy(&[toks("a b c")], &[toks("a x c")]).unwrap();
        assert!((acc - 2.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn accuracy_counts_missing_positions_as_misses() {
        let acc = token_accuracy(&[toks("a")], &[toks("a b c")]).unwrap();
        assert!((acc - 1.0 / 3.0).abs() <= 1e-12);
    }

    #[test]
    fn accuracy_ignores_padding_in_references() {
        let acc = token_accuracy(&[toks("a b")], &[toks("a b <pad> <pad>")]).unwrap();
        assert_eq!(acc, 1.0);
    }

    #[test]
    fn accuracy_rejects_empty_references() {
        assert!(matches!(
            token_accuracy(&[], &[]).unwrap_err(),
            EvalError::EmptyInput(_)
        ));
        assert!(token_accuracy(&[toks("a")], &[vec![]]).is_err());
    }

    #[test]
    fn bleu_perfect_match_scores_100() {
        let x = toks("cve exploit released in the wild");
        assert!((bleu(&x, &[x.clone()], 4).unwrap() - 100.0).abs() <= 1e-9);
        let short = toks("cve");
        assert!((bleu(&short, &[short.clone()], 4).unwrap() - 100.0).abs() <= 1e-9);
    }

    #[test]
    fn bleu_brevity_penalty_case() {
        let cand = toks("a b c d");
        let reference = toks("a b c d e");
        let score = bleu(&cand, &[reference], 4).unwrap();
        assert!((score - 77.88007830714049).abs() <= 1e-3, "{score}");
    }

    #[test]
    fn bleu_disjoint_unigrams_score_zero() {
        let score = bleu(&toks("x y z"), &[toks("a b c")], 4).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn bleu_empty_candidate_scores_zero() {
        let score = bleu(&[], &[toks("a b")], 4).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn bleu_smoothing_kicks_in_above_unigrams() {
        // Unigrams all match but no bigram does, so p_2 smooths to 1/(2+1).
        let score = bleu(&toks("a c b"), &[toks("a b c")], 2).unwrap();
        let expected = 100.0 * (1.0f64 * (1.0 / 3.0)).sqrt();
        assert!((score - expected).abs() <= 1e-9, "{score} vs {expected}");
    }

    #[test]
    fn corpus_bleu_pools_statistics() {
        let candidates = vec![toks("a b c d"), toks("x y")];
        let references = vec![vec![toks("a b c d")], vec![toks("p q")]];
        let score = corpus_bleu(&candidates, &references, 4).unwrap();
        assert!((score - 84.08964152537145).abs() <= 1e-9, "{score}");
    }

    #[test]
    fn corpus_bleu_of_identical_lists_is_100() {
        let candidates = vec![toks("a b"), toks("c d e")];
        let references: Vec<Vec<Vec<String>>> =
            candidates.iter().map(|c| vec![c.clone()]).collect();
        let score = corpus_bleu(&candidates, &references, 4).unwrap();
        assert!((score - 100.0).abs() <= 1e-9);
    }

    proptest! {
        #[test]
        fn bleu_identity_is_100(tokens in proptest::collection::vec("[a-f]{1,3}", 1..12)) {
            let seq: Vec<String> = tokens;
            let score = bleu(&seq, &[seq.clone()], 4).unwrap();
            prop_assert!((score - 100.0).abs() <= 1e-9);
        }

        #[test]
        fn bleu_ignores_reference_order(
            cand in proptest::collection::vec("[a-d]{1,2}", 1..8),
            r1 in proptest::collection::vec("[a-d]{1,2}", 1..8),
            r2 in proptest::collection::vec("[a-d]{1,2}", 1..8),
        ) {
            let fwd = bleu(&cand, &[r1.clone(), r2.clone()], 4).unwrap();
            let rev = bleu(&cand, &[r2, r1], 4).unwrap();
            prop_assert!((fwd - rev).abs() <= 1e-12);
        }

        #[test]
        fn accuracy_stays_in_unit_interval(
            pred in proptest::collection::vec("[a-c]", 1..6),
            gold in proptest::collection::vec("[a-c]", 1..6),
        ) {
            let acc = token_accuracy(&[pred], &[gold]).unwrap();
            prop_assert!((0.0..=1.0).contains(&acc));
        }
    }

    fn model_with_head(vt_tokens: &[&str], rig: impl FnOnce(&mut Seq2SeqModel)) -> Seq2SeqModel {
        let src_corpus = vec![vec!["s1".to_string(), "s2".to_string()]];
        let tgt_corpus = vec![vt_tokens.iter().map(|t| t.to_string()).collect::<Vec<_>>()];
        let src_vocab = build_vocabulary(&src_corpus, 1).unwrap();
        let tgt_vocab = build_vocabulary(&tgt_corpus, 1).unwrap();
        let dim = 4;
        let flat = |vocab: &Vocabulary| {
            let mut m = Matrix::zeros(vocab.len(), dim);
            for (i, v) in m.data_mut().iter_mut().enumerate() {
                *v = ((i % 7) as f64 - 3.0) / 10.0;
            }
            m
        };
        let src =
            crate::embeddings::EmbeddingSpace::from_parts(Lang::Ru, src_vocab.clone(), flat(&src_vocab))
                .unwrap();
        let tgt =
            crate::embeddings::EmbeddingSpace::from_parts(Lang::En, tgt_vocab.clone(), flat(&tgt_vocab))
                .unwrap();
        let cfg = TrainConfig {
            latent_dim: 4,
            max_len: 8,
            seed: 5,
            ..TrainConfig::default()
        };
        let mut model = init_model(&src, &tgt, &cfg).unwrap();
        rig(&mut model);
        model
    }

    #[test]
    fn uniform_predictor_perplexity_equals_vocab_size() {
        let model = model_with_head(&["t1", "t2", "t3"], |m| {
            m.w_out.fill(0.0);
            m.b_out.fill(0.0);
        });
        assert_eq!(model.tgt_vocab.len(), 7);
        let pairs = vec![
            (toks("s1"), toks("t1 t2")),
            (toks("s2 s1"), toks("t3")),
        ];
        let ppl = perplexity(&model, &pairs).unwrap();
        assert!((ppl - 7.0).abs() <= 1e-6, "{ppl}");
    }

    #[test]
    fn near_perfect_predictor_perplexity_is_one() {
        let model = model_with_head(&["t1", "t2", "t3"], |m| {
            m.w_out.fill(0.0);
            for (id, b) in m.b_out.iter_mut().enumerate() {
                *b = if id == Vocabulary::EOS { 50.0 } else { -50.0 };
            }
        });
        let pairs = vec![(toks("s1"), Vec::new()), (toks("s2"), Vec::new())];
        let ppl = perplexity(&model, &pairs).unwrap();
        assert!((ppl - 1.0).abs() <= 1e-9, "{ppl}");
    }

    #[test]
    fn syntactic_correlation_counts_exact_normalized_matches() {
        let ours: Vec<Vec<String>> = (0..1000)
            .map(|i| {
                if i < 643 {
                    toks("ddos attack detected")
                } else {
                    toks("something else entirely")
                }
            })
            .collect();
        let reference: Vec<Vec<String>> =
            (0..1000).map(|_| toks("DDoS Attack detected")).collect();
        let score = syntactic_correlation(&ours, &reference).unwrap();
        assert!((score - 0.643).abs() <= 1e-12);
    }

    #[test]
    fn syntactic_correlation_rejects_misaligned_lists() {
        let err = syntactic_correlation(&[toks("a")], &[]).unwrap_err();
        assert!(matches!(err, EvalError::LengthMismatch(1, 0)));
    }

    fn planted_space() -> EmbeddingSpace {
        let sentences = vec![vec![
            "attack".to_string(),
            "strike".to_string(),
            "network".to_string(),
            "market".to_string(),
            "price".to_string(),
        ]];
        let vocab = build_vocabulary(&sentences, 1).unwrap();
        let dim = 4;
        let mut vectors = Matrix::zeros(vocab.len(), dim);
        let mut set = |token: &str, v: [f64; 4]| {
            let id = vocab.id(token).unwrap();
            vectors.row_mut(id).copy_from_slice(&v);
        };
        set("attack", [1.0, 0.1, 0.0, 0.0]);
        set("strike", [0.95, 0.2, 0.0, 0.0]);
        set("network", [0.8, 0.6, 0.0, 0.0]);
        set("market", [0.0, 0.0, 1.0, 0.1]);
        set("price", [0.0, 0.0, 0.2, 1.0]);
        EmbeddingSpace::from_parts(Lang::En, vocab, vectors).unwrap()
    }

    #[test]
    fn identical_sentences_have_cosine_one() {
        let space = planted_space();
        let s = toks("attack network");
        let sim = sentence_similarity(&s, &s, &space).unwrap().unwrap();
        assert!((sim - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn synonym_substitution_stays_similar() {
        let space = planted_space();
        let a = toks("attack network");
        let b = toks("strike network");
        let sim = sentence_similarity(&a, &b, &space).unwrap().unwrap();
        assert!(sim > 0.8, "{sim}");
    }

    #[test]
    fn disjoint_topics_fall_below_threshold() {
        let space = planted_space();
        let a = toks("attack network");
        let b = toks("market price");
        let sim = sentence_similarity(&a, &b, &space).unwrap().unwrap();
        assert!(sim < 0.7, "{sim}");
    }

    #[test]
    fn semantic_relevance_flags_and_fraction() {
        let space = planted_space();
        let ours = vec![
            toks("attack network"),
            toks("attack network"),
            toks("attack network"),
            toks("zzz qqq"),
        ];
        let reference = vec![
            toks("attack network"),
            toks("strike network"),
            toks("market price"),
            toks("yyy www"),
        ];
        let (fraction, flags) = semantic_relevance(&ours, &reference, &space, 0.7).unwrap();
        assert_eq!(
            flags,
            vec![
                PairFlag::SyntacticMatch,
                PairFlag::Similar,
                PairFlag::Dissimilar,
                PairFlag::Indeterminate,
            ]
        );
        assert!((fraction - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn robust_flag_boundaries() {
        assert!(is_robust(0.61, 5.9, 15.0));
        assert!(is_robust(0.61, 5.9, 36.0));
        assert!(!is_robust(0.60, 5.9, 28.0));
        assert!(!is_robust(0.61, 6.0, 28.0));
        assert!(!is_robust(0.61, 5.9, 14.999));
        assert!(!is_robust(0.61, 5.9, 36.001));
        assert!(!is_robust(0.61, 5.9, 80.0));
    }

    #[test]
    fn report_round_trip_keeps_robust_consistent() {
        let report = EvalReport::assemble(0.93, 1.4, 31.0, 0.64, 0.97);
        assert!(report.robust);
        let mut bytes = Vec::new();
        report.save(&mut bytes).unwrap();
        let loaded = EvalReport::load(std::io::Cursor::new(&bytes)).unwrap();
        assert_eq!(loaded.robust, report.robust);
        assert_eq!(loaded.bleu, report.bleu);

        let tampered = String::from_utf8(bytes).unwrap().replace(
            "\"robust\": true",
            "\"robust\": false",
        );
        let err = EvalReport::load(std::io::Cursor::new(tampered.as_bytes())).unwrap_err();
        assert!(matches!(err, EvalError::Format(_)));
    }

    #[test]
    fn reference_tsv_parses_and_normalizes() {
        let text = "Новая DDoS-атака\tNew DDoS attack\nвторжение в сеть\tnetwork intrusion\n";
        let rows = load_reference_tsv(std::io::Cursor::new(text)).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].1, toks("new ddos attack"));
        let bad = "only one column\n";
        assert!(load_reference_tsv(std::io::Cursor::new(bad)).is_err());
    }
}
