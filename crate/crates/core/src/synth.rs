//! Deterministic corpus generators for end-to-end fixtures.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::rngutil::stage_rng;

const PLANTED_A: &str = "virus";
const PLANTED_B: &str = "trojan";
const FILLER_WORDS: usize = 48;
const FILLER_RINGS: usize = 3;

/// Corpus where the two planted tokens appear in identical context samples:
/// every template is emitted twice, once per planted token. Filler tokens
/// follow interleaved successor rings so each filler keeps a distinct
/// neighbourhood.
pub struct SubstitutedCorpus {
    pub sentences: Vec<Vec<String>>,
    pub planted: (String, String),
}

pub fn substituted_context_corpus(templates: usize, seed: u64) -> SubstitutedCorpus {
    let mut rng = stage_rng(seed, "substituted-corpus");
    let fillers: Vec<String> = (0..FILLER_WORDS).map(|i| format!("f{i:02}")).collect();
    let rings: Vec<Vec<usize>> = (0..FILLER_RINGS)
        .map(|_| {
            let mut order: Vec<usize> = (0..FILLER_WORDS).collect();
            order.shuffle(&mut rng);
            let mut succ = vec![0usize; FILLER_WORDS];
            for (k, &w) in order.iter().enumerate() {
                succ[w] = order[(k + 1) % FILLER_WORDS];
            }
            succ
        })
        .collect();

    let mut sentences = Vec::with_capacity(templates * 2);
    for _ in 0..templates {
        let len = rng.random_range(5..=9);
        let mut walk = Vec::with_capacity(len);
        let mut word = rng.random_range(0..FILLER_WORDS);
        for step in 0..len {
            walk.push(word);
            word = rings[step % FILLER_RINGS][word];
        }
        let slot = rng.random_range(0..=len);
        for planted in [PLANTED_A, PLANTED_B] {
            let mut sentence: Vec<String> =
                walk.iter().map(|&w| fillers[w].clone()).collect();
            sentence.insert(slot, planted.to_string());
            sentences.push(sentence);
        }
    }
    SubstitutedCorpus {
        sentences,
        planted: (PLANTED_A.to_string(), PLANTED_B.to_string()),
    }
}

const MODE_MARKERS: [&str; 4] = ["xa", "xe", "xi", "xo"];
const FIXED_SHARE: f64 = 0.25;
const SWAP_RATE: f64 = 0.00625;
const REGISTER_MATCH_NUM: usize = 14;
const REGISTER_MATCH_DEN: usize = 50;

#[derive(Debug, Clone)]
pub struct ToyBilingualConfig {
    pub words: usize,
    pub len_lo: usize,
    pub len_hi: usize,
    pub train_pairs: usize,
    pub held_out_pairs: usize,
    pub seed: u64,
}

impl Default for ToyBilingualConfig {
    fn default() -> Self {
        ToyBilingualConfig {
            words: 120,
            len_lo: 7,
            len_hi: 14,
            train_pairs: 2000,
            held_out_pairs: 200,
            seed: 1,
        }
    }
}

/// Parallel toy corpus with a fixed source→target word bijection rendered in
/// one of four registers. Source sentences are arcs of one fixed word cycle,
/// so a sentence is fully determined by a start word and a length. Each
/// target sentence opens with a register marker; a common quarter of the
/// vocabulary is register-invariant and the other three registers relabel
/// the rest by rotating within four-member word classes. Adjacent target
/// words swap at a low rate. The canonical register of a sentence is the
/// vocabulary class of its final source word. Training pairs render
/// canonically except every third repetition of a source, which renders in
/// another register so the rendering register is learnable from the marker;
/// the canonical register keeps a strict per-source majority. Held-out
/// references render canonically at an exact stratified rate and otherwise
/// in one of the other three registers.
pub struct ToyBilingual {
    pub train: Vec<(Vec<String>, Vec<String>)>,
    pub held_out: Vec<(Vec<String>, Vec<String>)>,
    pub source_words: Vec<String>,
    pub target_words: Vec<String>,
    pub markers: Vec<String>,
}

pub fn generate_toy_bilingual(config: &ToyBilingualConfig) -> ToyBilingual {
    let mut rng = stage_rng(config.seed, "toy-bilingual");
    let source_words = syllable_words(
        &['б', 'в', 'г', 'д', 'ж', 'з', 'к', 'л', 'м', 'н', 'п', 'р', 'с', 'т'],
        &['а', 'е', 'и', 'о', 'у'],
        config.words,
        &mut rng,
    );
    let target_words = syllable_words(
        &['b', 'd', 'f', 'g', 'k', 'l', 'm', 'n', 'p', 'r', 's', 't', 'v', 'z'],
        &['a', 'e', 'i', 'o', 'u'],
        config.words,
        &mut rng,
    );
    let ciphers = register_ciphers(config.words, &mut rng);

    let cycle: Vec<usize> = {
        let mut order: Vec<usize> = (0..config.words).collect();
        order.shuffle(&mut rng);
        let mut succ = vec![0usize; config.words];
        for (k, &w) in order.iter().enumerate() {
            succ[w] = order[(k + 1) % config.words];
        }
        succ
    };

    let draw_walk = |rng: &mut ChaCha8Rng| -> Vec<usize> {
        let len = rng.random_range(config.len_lo..=config.len_hi);
        let mut src_idx = Vec::with_capacity(len);
        let mut word = rng.random_range(0..config.words);
        for _ in 0..len {
            src_idx.push(word);
            word = cycle[word];
        }
        src_idx
    };
    let flip_mode = |rng: &mut ChaCha8Rng, canonical: usize| -> usize {
        let offset = rng.random_range(1..MODE_MARKERS.len());
        (canonical + offset) % MODE_MARKERS.len()
    };
    let render = |rng: &mut ChaCha8Rng, src_idx: &[usize], mode: usize| {
        let mut tgt_idx: Vec<usize> = if mode == 0 {
            src_idx.to_vec()
        } else {
            src_idx.iter().map(|&i| ciphers[mode - 1][i]).collect()
        };
        let mut i = 0;
        while i + 1 < tgt_idx.len() {
            if rng.random_range(0.0..1.0) < SWAP_RATE {
                tgt_idx.swap(i, i + 1);
                i += 2;
            } else {
                i += 1;
            }
        }
        let src: Vec<String> = src_idx.iter().map(|&i| source_words[i].clone()).collect();
        let mut tgt = Vec::with_capacity(src_idx.len() + 1);
        tgt.push(MODE_MARKERS[mode].to_string());
        tgt.extend(tgt_idx.iter().map(|&i| target_words[i].clone()));
        (src, tgt)
    };

    let mut occurrences: std::collections::BTreeMap<(usize, usize), usize> =
        std::collections::BTreeMap::new();
    let train: Vec<_> = (0..config.train_pairs)
        .map(|_| {
            let src_idx = draw_walk(&mut rng);
            let canonical = src_idx[src_idx.len() - 1] % MODE_MARKERS.len();
            let occ = occurrences
                .entry((src_idx[0], src_idx.len()))
                .and_modify(|c| *c += 1)
                .or_insert(1);
            let mode = if *occ % 3 == 0 {
                flip_mode(&mut rng, canonical)
            } else {
                canonical
            };
            render(&mut rng, &src_idx, mode)
        })
        .collect();
    let held_out: Vec<_> = (0..config.held_out_pairs)
        .map(|i| {
            let src_idx = draw_walk(&mut rng);
            let canonical = src_idx[src_idx.len() - 1] % MODE_MARKERS.len();
            let keep = i * REGISTER_MATCH_NUM % REGISTER_MATCH_DEN < REGISTER_MATCH_NUM;
            let mode = if keep {
                canonical
            } else {
                flip_mode(&mut rng, canonical)
            };
            render(&mut rng, &src_idx, mode)
        })
        .collect();

    ToyBilingual {
        train,
        held_out,
        source_words,
        target_words,
        markers: MODE_MARKERS.iter().map(|m| m.to_string()).collect(),
    }
}

fn register_ciphers(words: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let members = MODE_MARKERS.len();
    let classes = words / members;
    let mut class_order: Vec<usize> = (0..classes).collect();
    class_order.shuffle(rng);
    let fixed_classes = (classes as f64 * FIXED_SHARE).round() as usize;
    let fixed: Vec<bool> = {
        let mut f = vec![false; classes];
        for &c in &class_order[..fixed_classes] {
            f[c] = true;
        }
        f
    };
    (1..members)
        .map(|offset| {
            (0..words)
                .map(|w| {
                    let (c, k) = (w / members, w % members);
                    if c >= classes || fixed[c] {
                        w
                    } else {
                        c * members + (k + offset) % members
                    }
                })
                .collect()
        })
        .collect()
}

fn syllable_words(
    consonants: &[char],
    vowels: &[char],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let syllables: Vec<String> = consonants
        .iter()
        .flat_map(|&c| vowels.iter().map(move |&v| format!("{c}{v}")))
        .collect();
    let mut pairs: Vec<(usize, usize)> = (0..syllables.len())
        .flat_map(|a| (0..syllables.len()).map(move |b| (a, b)))
        .collect();
    pairs.shuffle(rng);
    assert!(count <= pairs.len(), "syllable grid too small");
    pairs[..count]
        .iter()
        .map(|&(a, b)| format!("{}{}", syllables[a], syllables[b]))
        .collect()
}

const COPY_TOKENS: [&str; 50] = [
    "attack", "breach", "botnet", "cipher", "daemon", "decoy", "exploit", "filter",
    "firewall", "flood", "gateway", "handshake", "hash", "honeypot", "implant",
    "incident", "intrusion", "kernel", "keylogger", "leak", "malware", "monitor",
    "network", "packet", "passive", "payload", "phishing", "port", "probe", "proxy",
    "ransom", "recon", "registry", "relay", "rootkit", "router", "sandbox", "scan",
    "sensor", "shell", "sniffer", "spoof", "stack", "token", "traffic", "tunnel",
    "vector", "vpn", "worm", "zeroday",
];

pub fn copy_token_list() -> Vec<String> {
    COPY_TOKENS.iter().map(|t| t.to_string()).collect()
}

/// Identity-translation pairs over the given token list.
pub fn generate_copy_pairs(
    tokens: &[String],
    count: usize,
    max_len: usize,
    seed: u64,
) -> Vec<(Vec<String>, Vec<String>)> {
    assert!(!tokens.is_empty() && max_len >= 1);
    let mut rng = stage_rng(seed, "copy-pairs");
    (0..count)
        .map(|_| {
            let len = rng.random_range(1..=max_len);
            let src: Vec<String> = (0..len)
                .map(|_| tokens[rng.random_range(0..tokens.len())].clone())
                .collect();
            (src.clone(), src)
        })
        .collect()
}
