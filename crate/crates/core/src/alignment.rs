//! Bilingual synset alignment: annotator agreement scoring and the gated
//! database that supplies translation training pairs.

use crate::corpus::{normalize_text, Lang};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("label lists differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("labels must be 0 or 1, found {0}")]
    InvalidLabel(u8),
    #[error("label lists must contain at least one item")]
    EmptyLabels,
    #[error("degenerate labels: chance agreement is 1 but observed agreement is not")]
    DegenerateLabels,
    #[error("unknown sense id {0:?}")]
    UnknownSense(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("synset file malformed: {0}")]
    Format(String),
    #[error("no training pairs survived gating")]
    EmptyTrainingSet,
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

/// A set of synonymous terms sharing one sense. Terms may be multi-word
/// phrases; each must already be in normalized token form.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Eq)]
pub struct Synset {
    pub lang: Lang,
    pub sense_id: String,
    pub terms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gloss: Option<String>,
}

impl Synset {
    pub fn validate(&self) -> Result<(), AlignmentError> {
        if self.terms.is_empty() {
            return Err(AlignmentError::Format(format!(
                "synset {} has no terms",
                self.sense_id
            )));
        }
        let mut seen = BTreeSet::new();
        for term in &self.terms {
            if !seen.insert(term.as_str()) {
                return Err(AlignmentError::Format(format!(
                    "synset {} repeats term {term:?}",
                    self.sense_id
                )));
            }
            let tokens: Vec<&str> = term.split(' ').collect();
            let renormalized = normalize_text(term);
            if renormalized != tokens {
                return Err(AlignmentError::Format(format!(
                    "synset {} term {term:?} is not in normalized form",
                    self.sense_id
                )));
            }
        }
        Ok(())
    }
}

/// One candidate ru/en synset pairing with its annotation record and gate
/// outcome. `items` is the ru-term-major cross product of the two term
/// lists; `annotator_labels` holds one accept/reject row per annotator over
/// those items. `kappa` is absent when agreement was degenerate, in which
/// case the entry is rejected and flagged.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignmentEntry {
    pub ru: Synset,
    pub en: Synset,
    pub items: Vec<(String, String)>,
    pub annotator_labels: Vec<Vec<u8>>,
    pub kappa: Option<f64>,
    pub accepted: bool,
    pub flagged: bool,
}

/// Cohen's kappa for two binary label lists. Computed from integer
/// contingency counts: kappa = (n*agree - sum_c a_c*b_c) / (n^2 - sum_c a_c*b_c).
pub fn cohens_kappa(labels_a: &[u8], labels_b: &[u8]) -> Result<f64, AlignmentError> {
    if labels_a.len() != labels_b.len() {
        return Err(AlignmentError::LengthMismatch(
            labels_a.len(),
            labels_b.len(),
        ));
    }
    if labels_a.is_empty() {
        return Err(AlignmentError::EmptyLabels);
    }
    for &l in labels_a.iter().chain(labels_b) {
        if l > 1 {
            return Err(AlignmentError::InvalidLabel(l));
        }
    }

    let n = labels_a.len() as i64;
    let agree = labels_a
        .iter()
        .zip(labels_b)
        .filter(|(a, b)| a == b)
        .count() as i64;
    let a_ones = labels_a.iter().filter(|&&l| l == 1).count() as i64;
    let b_ones = labels_b.iter().filter(|&&l| l == 1).count() as i64;
    let chance = a_ones * b_ones + (n - a_ones) * (n - b_ones);

    if chance == n * n {
        if agree == n {
            return Ok(1.0);
        }
        return Err(AlignmentError::DegenerateLabels);
    }
    Ok((n * agree - chance) as f64 / (n * n - chance) as f64)
}

fn entry_kappa(labels: &[Vec<u8>]) -> Result<Option<f64>, AlignmentError> {
    let a = labels.len();
    if a < 2 {
        return Err(AlignmentError::Input(
            "need at least 2 annotators".into(),
        ));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..a {
        for j in (i + 1)..a {
            match cohens_kappa(&labels[i], &labels[j]) {
                Ok(k) => {
                    sum += k;
                    pairs += 1;
                }
                Err(AlignmentError::DegenerateLabels) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
    }
    Ok(Some(sum / pairs as f64))
}

/// Annotator label matrices keyed by (ru_sense_id, en_sense_id).
pub type LabelSet = BTreeMap<(String, String), Vec<Vec<u8>>>;

/// Score every candidate pairing and gate it at the agreement threshold
/// (strict: kappa must exceed the threshold). Degenerate agreement rejects
/// and flags the entry.
pub fn build_alignment_db(
    ru_synsets: &[Synset],
    en_synsets: &[Synset],
    pairing: &[(String, String)],
    labels: &LabelSet,
    threshold: f64,
) -> Result<Vec<AlignmentEntry>, AlignmentError> {
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(AlignmentError::Input(format!(
            "threshold {threshold} outside [-1, 1]"
        )));
    }
    let ru_index: BTreeMap<&str, &Synset> = ru_synsets
        .iter()
        .map(|s| (s.sense_id.as_str(), s))
        .collect();
    let en_index: BTreeMap<&str, &Synset> = en_synsets
        .iter()
        .map(|s| (s.sense_id.as_str(), s))
        .collect();

    let mut entries = Vec::with_capacity(pairing.len());
    for (ru_id, en_id) in pairing {
        let ru = *ru_index
            .get(ru_id.as_str())
            .ok_or_else(|| AlignmentError::UnknownSense(ru_id.clone()))?;
        let en = *en_index
            .get(en_id.as_str())
            .ok_or_else(|| AlignmentError::UnknownSense(en_id.clone()))?;
        ru.validate()?;
        en.validate()?;
        if ru.lang != Lang::Ru || en.lang != Lang::En {
            return Err(AlignmentError::Input(format!(
                "pairing ({ru_id}, {en_id}) has synsets with the wrong languages"
            )));
        }

        let items: Vec<(String, String)> = ru
            .terms
            .iter()
            .flat_map(|r| en.terms.iter().map(move |e| (r.clone(), e.clone())))
            .collect();
        let matrix = labels
            .get(&(ru_id.clone(), en_id.clone()))
            .ok_or_else(|| {
                AlignmentError::Input(format!("no labels for pairing ({ru_id}, {en_id})"))
            })?;
        for row in matrix {
            if row.len() != items.len() {
                return Err(AlignmentError::Input(format!(
                    "pairing ({ru_id}, {en_id}): annotator row has {} labels for {} items",
                    row.len(),
                    items.len()
                )));
            }
        }

        let kappa = entry_kappa(matrix)?;
        let accepted = kappa.map(|k| k > threshold).unwrap_or(false);
        entries.push(AlignmentEntry {
            ru: ru.clone(),
            en: en.clone(),
            items,
            annotator_labels: matrix.clone(),
            kappa,
            accepted,
            flagged: kappa.is_none(),
        });
    }
    Ok(entries)
}

/// Emit (ru tokens, en tokens) pairs from accepted entries: one pair per
/// item that a strict majority of annotators accepted, in entry order then
/// item order, with duplicates removed. Multi-word terms split on spaces.
pub fn generate_training_pairs(
    entries: &[AlignmentEntry],
) -> Result<Vec<(Vec<String>, Vec<String>)>, AlignmentError> {
    let mut pairs = Vec::new();
    let mut seen = BTreeSet::new();
    for entry in entries {
        if !entry.accepted {
            continue;
        }
        let annotators = entry.annotator_labels.len();
        for (idx, (ru_term, en_term)) in entry.items.iter().enumerate() {
            let votes: usize = entry
                .annotator_labels
                .iter()
                .map(|row| row[idx] as usize)
                .sum();
            if votes * 2 <= annotators {
                continue;
            }
            let ru_tokens: Vec<String> = ru_term.split(' ').map(str::to_string).collect();
            let en_tokens: Vec<String> = en_term.split(' ').map(str::to_string).collect();
            if seen.insert((ru_tokens.clone(), en_tokens.clone())) {
                pairs.push((ru_tokens, en_tokens));
            }
        }
    }
    if pairs.is_empty() {
        return Err(AlignmentError::EmptyTrainingSet);
    }
    Ok(pairs)
}

pub fn load_synsets(reader: impl BufRead) -> Result<Vec<Synset>, AlignmentError> {
    let mut synsets = Vec::new();
    let mut ids = BTreeSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let synset: Synset = serde_json::from_str(&line)
            .map_err(|e| AlignmentError::Format(format!("line {}: {e}", lineno + 1)))?;
        synset.validate()?;
        if !ids.insert(synset.sense_id.clone()) {
            return Err(AlignmentError::Format(format!(
                "duplicate sense id {:?}",
                synset.sense_id
            )));
        }
        synsets.push(synset);
    }
    Ok(synsets)
}

#[derive(Deserialize)]
struct PairingRow {
    ru_sense_id: String,
    en_sense_id: String,
}

pub fn load_pairing(reader: impl BufRead) -> Result<Vec<(String, String)>, AlignmentError> {
    let mut pairing = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PairingRow = serde_json::from_str(&line)
            .map_err(|e| AlignmentError::Format(format!("line {}: {e}", lineno + 1)))?;
        pairing.push((row.ru_sense_id, row.en_sense_id));
    }
    Ok(pairing)
}

#[derive(Deserialize)]
struct LabelsRow {
    ru_sense_id: String,
    en_sense_id: String,
    labels: Vec<Vec<u8>>,
}

pub fn load_labels(reader: impl BufRead) -> Result<LabelSet, AlignmentError> {
    let mut set = LabelSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: LabelsRow = serde_json::from_str(&line)
            .map_err(|e| AlignmentError::Format(format!("line {}: {e}", lineno + 1)))?;
        if set
            .insert((row.ru_sense_id, row.en_sense_id), row.labels)
            .is_some()
        {
            return Err(AlignmentError::Format(format!(
                "line {}: duplicate label row",
                lineno + 1
            )));
        }
    }
    Ok(set)
}

pub fn save_alignment_db(
    entries: &[AlignmentEntry],
    mut writer: impl Write,
) -> Result<(), AlignmentError> {
    for entry in entries {
        let line = serde_json::to_string(entry)
            .map_err(|e| AlignmentError::Format(e.to_string()))?;
        writeln!(writer, "{line}")?;
    }
    Ok(())
}

pub fn load_alignment_db(reader: impl BufRead) -> Result<Vec<AlignmentEntry>, AlignmentError> {
    let mut entries = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: AlignmentEntry = serde_json::from_str(&line)
            .map_err(|e| AlignmentError::Format(format!("line {}: {e}", lineno + 1)))?;
        entries.push(entry);
    }
    Ok(entries)
}
