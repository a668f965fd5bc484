//! Corpus ingestion and preparation: JSONL tweet parsing, keyword filtering,
//! multilingual tokenization, vocabulary construction, and sequence encoding.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("corpus stream unreadable: {0}")]
    Ingestion(#[from] std::io::Error),
    #[error("no records survived ingestion{0}")]
    EmptyCorpus(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("vocabulary is empty after applying min_count")]
    EmptyVocabulary,
    #[error("vocabulary file malformed: {0}")]
    VocabFormat(String),
}

/// Tweet language flag. Only the two languages of the pipeline are accepted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    En,
    Ru,
}

impl Lang {
    pub fn as_str(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::Ru => "ru",
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Lang {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "en" => Ok(Lang::En),
            "ru" => Ok(Lang::Ru),
            other => Err(CorpusError::Config(format!("unknown language {other:?}"))),
        }
    }
}

/// One ingested post. `matched_keywords` and `tokens` are filled in by
/// [`filter_by_keywords`]; on freshly parsed records they are empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TweetRecord {
    pub id: String,
    pub text: String,
    pub lang: Lang,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub created_at: Option<String>,
    #[serde(default)]
    pub matched_keywords: BTreeSet<String>,
    #[serde(default)]
    pub tokens: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawTweet {
    id: String,
    text: String,
    lang: String,
    #[serde(default)]
    created_at: Option<String>,
    #[serde(default)]
    matched_keywords: BTreeSet<String>,
    #[serde(default)]
    tokens: Vec<String>,
}

/// Outcome of one ingestion pass. Malformed lines are skipped, not fatal:
/// OSINT dumps are dirty by nature.
#[derive(Debug, Clone)]
pub struct IngestResult {
    pub records: Vec<TweetRecord>,
    /// Lines that were not valid records (bad JSON, missing fields, unknown
    /// language, empty or duplicate id).
    pub skipped: usize,
}

/// Parse line-delimited JSON tweets, keeping records whose language matches
/// `lang_filter` (all languages if `None`). Blank lines are ignored.
pub fn parse_tweet_jsonl(
    reader: impl BufRead,
    lang_filter: Option<Lang>,
) -> Result<IngestResult, CorpusError> {
    let mut records = Vec::new();
    let mut skipped = 0usize;
    let mut seen_ids: HashSet<String> = HashSet::new();

    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawTweet = match serde_json::from_str(&line) {
            Ok(raw) => raw,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        let lang = match raw.lang.parse::<Lang>() {
            Ok(lang) => lang,
            Err(_) => {
                skipped += 1;
                continue;
            }
        };
        if raw.id.is_empty() || !seen_ids.insert(raw.id.clone()) {
            skipped += 1;
            continue;
        }
        if lang_filter.is_some_and(|want| want != lang) {
            continue;
        }
        records.push(TweetRecord {
            id: raw.id,
            text: raw.text,
            lang,
            created_at: raw.created_at,
            matched_keywords: raw.matched_keywords,
            tokens: raw.tokens,
        });
    }

    if records.is_empty() {
        let what = match lang_filter {
            Some(lang) => format!(" (language {lang})"),
            None => String::new(),
        };
        return Err(CorpusError::EmptyCorpus(what));
    }
    Ok(IngestResult { records, skipped })
}

/// Keep the records whose normalized tokens intersect `keywords`, populating
/// `matched_keywords` and `tokens` on each retained record. Keywords must be
/// stored lowercase; they may be in either script.
pub fn filter_by_keywords(
    records: &[TweetRecord],
    keywords: &BTreeSet<String>,
) -> Result<Vec<TweetRecord>, CorpusError> {
    if keywords.is_empty() {
        return Err(CorpusError::Config("keyword set is empty".into()));
    }
    let mut kept = Vec::new();
    for record in records {
        let tokens = normalize_text(&record.text);
        let matched: BTreeSet<String> = tokens
            .iter()
            .filter(|t| keywords.contains(t.as_str()))
            .cloned()
            .collect();
        if matched.is_empty() {
            continue;
        }
        let mut record = record.clone();
        record.matched_keywords = matched;
        record.tokens = tokens;
        kept.push(record);
    }
    Ok(kept)
}

/// Load a keyword list: one lowercase keyword per line, `#` comments allowed.
pub fn load_keywords(reader: impl BufRead) -> Result<BTreeSet<String>, CorpusError> {
    let mut keywords = BTreeSet::new();
    for line in reader.lines() {
        let line = line?;
        let word = line.trim();
        if word.is_empty() || word.starts_with('#') {
            continue;
        }
        keywords.insert(word.to_lowercase());
    }
    Ok(keywords)
}

fn is_url_chunk(chunk: &str) -> bool {
    if chunk.contains("://") {
        return true;
    }
    let trimmed = chunk.trim_matches(|c: char| !c.is_alphanumeric() && c != '-');
    let lower = trimmed.to_lowercase();
    lower.starts_with("www.")
}

fn is_mention_chunk(chunk: &str) -> bool {
    // Strip any leading wrapper punctuation, but not the '@' itself.
    chunk
        .trim_start_matches(|c: char| !c.is_alphanumeric() && c != '@')
        .starts_with('@')
}

/// Tokenize tweet text: Unicode lowercase (covers Cyrillic), URLs and
/// @-mentions and retweet markers dropped, split on whitespace and
/// punctuation, hyphens preserved inside tokens so terms like
/// "ddos-атака" stay whole. Empty input yields an empty list.
pub fn normalize_text(raw: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for chunk in raw.split_whitespace() {
        if is_url_chunk(chunk) || is_mention_chunk(chunk) {
            continue;
        }
        let lowered = chunk.to_lowercase();
        for piece in lowered.split(|c: char| !c.is_alphanumeric() && c != '-') {
            let token = piece.trim_matches('-');
            // "rt" is dropped at token level so normalization stays idempotent.
            if token.is_empty() || token == "rt" {
                continue;
            }
            tokens.push(token.to_string());
        }
    }
    tokens
}

pub const PAD_TOKEN: &str = "<pad>";
pub const SOS_TOKEN: &str = "<s>";
pub const EOS_TOKEN: &str = "</s>";
pub const UNK_TOKEN: &str = "<unk>";

const SPECIAL_TOKENS: [&str; 4] = [PAD_TOKEN, SOS_TOKEN, EOS_TOKEN, UNK_TOKEN];

/// Token table shared by embeddings and the translator. Indices 0-3 are the
/// reserved PAD/SOS/EOS/UNK markers; real tokens follow in descending count
/// order with lexicographic tie-break, so construction is deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    counts: BTreeMap<String, u64>,
}

impl Vocabulary {
    pub const PAD: usize = 0;
    pub const SOS: usize = 1;
    pub const EOS: usize = 2;
    pub const UNK: usize = 3;

    fn from_parts(ordered: Vec<(String, u64)>) -> Self {
        let mut tokens: Vec<String> = SPECIAL_TOKENS.iter().map(|s| s.to_string()).collect();
        let mut counts = BTreeMap::new();
        for (token, count) in ordered {
            counts.insert(token.clone(), count);
            tokens.push(token);
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            tokens,
            index,
            counts,
        }
    }

    /// Total number of entries including the four specials.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= SPECIAL_TOKENS.len()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn is_special(id: usize) -> bool {
        id < SPECIAL_TOKENS.len()
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(token).copied().unwrap_or(0)
    }

    /// Non-special tokens in index order.
    pub fn real_tokens(&self) -> impl Iterator<Item = (usize, &str)> {
        self.tokens
            .iter()
            .enumerate()
            .skip(SPECIAL_TOKENS.len())
            .map(|(i, t)| (i, t.as_str()))
    }

    /// One `token<TAB>count` line per entry in index order, specials first.
    pub fn save(&self, mut writer: impl Write) -> Result<(), CorpusError> {
        for token in &self.tokens {
            let count = self.counts.get(token).copied().unwrap_or(0);
            writeln!(writer, "{token}\t{count}")?;
        }
        Ok(())
    }

    pub fn load(reader: impl BufRead) -> Result<Self, CorpusError> {
        let mut ordered = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let (token, count) = line
                .split_once('\t')
                .ok_or_else(|| CorpusError::VocabFormat(format!("line {}: no tab", lineno + 1)))?;
            let count: u64 = count.parse().map_err(|_| {
                CorpusError::VocabFormat(format!("line {}: bad count {count:?}", lineno + 1))
            })?;
            if lineno < SPECIAL_TOKENS.len() {
                if token != SPECIAL_TOKENS[lineno] {
                    return Err(CorpusError::VocabFormat(format!(
                        "line {}: expected special {:?}, found {token:?}",
                        lineno + 1,
                        SPECIAL_TOKENS[lineno]
                    )));
                }
                continue;
            }
            ordered.push((token.to_string(), count));
        }
        if ordered.is_empty() {
            return Err(CorpusError::EmptyVocabulary);
        }
        Ok(Vocabulary::from_parts(ordered))
    }
}

/// Count tokens across `sequences` and keep those seen at least `min_count`
/// times. Tokens colliding with the reserved marker strings are ignored.
pub fn build_vocabulary(
    sequences: &[Vec<String>],
    min_count: u64,
) -> Result<Vocabulary, CorpusError> {
    if min_count < 1 {
        return Err(CorpusError::Config("min_count must be at least 1".into()));
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for sequence in sequences {
        for token in sequence {
            if SPECIAL_TOKENS.contains(&token.as_str()) {
                continue;
            }
            *counts.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    let mut ordered: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(t, c)| (t.to_string(), c))
        .collect();
    if ordered.is_empty() {
        return Err(CorpusError::EmptyVocabulary);
    }
    ordered.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(Vocabulary::from_parts(ordered))
}

/// Encode tokens as `[SOS, ids..., EOS]` truncated to `max_len` and padded
/// with PAD to exactly `max_len`. Out-of-vocabulary tokens (and tokens that
/// would collide with a marker index) map to UNK.
pub fn encode_sequence(
    vocab: &Vocabulary,
    tokens: &[String],
    max_len: usize,
) -> Result<Vec<usize>, CorpusError> {
    if max_len < 3 {
        return Err(CorpusError::Config(format!(
            "max_len must be at least 3, got {max_len}"
        )));
    }
    let body = tokens.len().min(max_len - 2);
    let mut encoded = Vec::with_capacity(max_len);
    encoded.push(Vocabulary::SOS);
    for token in &tokens[..body] {
        let id = match vocab.id(token) {
            Some(id) if !Vocabulary::is_special(id) => id,
            _ => Vocabulary::UNK,
        };
        encoded.push(id);
    }
    encoded.push(Vocabulary::EOS);
    encoded.resize(max_len, Vocabulary::PAD);
    Ok(encoded)
}
