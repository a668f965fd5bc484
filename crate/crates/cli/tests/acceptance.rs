//! End-to-end acceptance checks for the whole pipeline. Each check prints one
//! PASS/FAIL line with its measured numbers; the process exits nonzero if any
//! check fails. Run with `cargo test --test acceptance` (the longest check
//! trains the synthetic bilingual model and takes several minutes).

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use cybertrans_core::alignment::{build_alignment_db, cohens_kappa, LabelSet, Synset};
use cybertrans_core::corpus::{build_vocabulary, Lang};
use cybertrans_core::embeddings::{
    cosine_similarity, load_embeddings, nearest_neighbors, save_embeddings,
    sgns_sample_gradients, sgns_sample_loss, train_skipgram, EmbeddingSpace, Query,
};
use cybertrans_core::evaluation::{
    bleu, forced_token_accuracy, greedy_corpus_bleu, is_robust, perplexity,
};
use cybertrans_core::linalg::Matrix;
use cybertrans_core::synth::{
    copy_token_list, generate_copy_pairs, generate_toy_bilingual, substituted_context_corpus,
    ToyBilingualConfig,
};
use cybertrans_core::translator::{
    gradient_check, init_model, load_model, save_model, train_translator, translate_greedy,
};
use cybertrans_core::{SgnsConfig, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let checks: &[(&str, fn() -> Result<String, String>)] = &[
        ("encoder-decoder gradient oracle", check_bptt_gradients),
        ("metric oracles", check_metric_oracles),
        ("toy bilingual end-to-end", check_toy_bilingual),
        ("embedding semantics", check_embedding_semantics),
        ("alignment agreement gate", check_alignment_gate),
        ("intel turtle golden file", check_turtle_golden),
        ("pipeline determinism", check_pipeline_determinism),
        ("save/load round-trips", check_round_trips),
    ];
    let mut failures = 0;
    for (name, check) in checks {
        match std::panic::catch_unwind(check) {
            Ok(Ok(details)) => println!("PASS {name}: {details}"),
            Ok(Err(details)) => {
                failures += 1;
                println!("FAIL {name}: {details}");
            }
            Err(panic) => {
                failures += 1;
                let msg = panic
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| panic.downcast_ref::<&str>().copied())
                    .unwrap_or("panicked");
                println!("FAIL {name}: {msg}");
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} acceptance check(s) failed");
        std::process::exit(1);
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .ancestors()
        .nth(2)
        .expect("workspace root")
        .to_path_buf()
}

fn patterned_space(lang: Lang, vocab: cybertrans_core::Vocabulary, dim: usize) -> EmbeddingSpace {
    let rows = vocab.len();
    let data: Vec<f64> = (0..rows * dim)
        .map(|i| (i as f64 * 0.7391).sin() * 0.1)
        .collect();
    EmbeddingSpace::from_parts(lang, vocab, Matrix::from_vec(rows, dim, data)).unwrap()
}

fn gate(ok: bool, failures: &mut Vec<String>, message: String) {
    if !ok {
        failures.push(message);
    }
}

fn verdict(details: String, failures: Vec<String>) -> Result<String, String> {
    if failures.is_empty() {
        Ok(details)
    } else {
        Err(format!("{} [{details}]", failures.join("; ")))
    }
}

/// Analytic BPTT gradients on a tiny model (hidden 8, embed 8, vocab 12 per
/// side) must match central finite differences within 1e-4 relative error in
/// under ten seconds.
fn check_bptt_gradients() -> Result<String, String> {
    let started = Instant::now();
    let src_tokens: Vec<Vec<String>> = vec![(0..8).map(|i| format!("s{i}")).collect()];
    let tgt_tokens: Vec<Vec<String>> = vec![(0..8).map(|i| format!("t{i}")).collect()];
    let src_vocab = build_vocabulary(&src_tokens, 1).unwrap();
    let tgt_vocab = build_vocabulary(&tgt_tokens, 1).unwrap();
    let mut failures = Vec::new();
    gate(
        src_vocab.len() == 12 && tgt_vocab.len() == 12,
        &mut failures,
        format!(
            "vocab sizes {} / {} instead of 12",
            src_vocab.len(),
            tgt_vocab.len()
        ),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut random_space = |lang, vocab: &cybertrans_core::Vocabulary| {
        let mut m = Matrix::zeros(vocab.len(), 8);
        for v in m.data_mut() {
            *v = rng.random::<f64>() - 0.5;
        }
        EmbeddingSpace::from_parts(lang, vocab.clone(), m).unwrap()
    };
    let src_space = random_space(Lang::Ru, &src_vocab);
    let tgt_space = random_space(Lang::En, &tgt_vocab);
    let config = TrainConfig {
        latent_dim: 8,
        max_len: 12,
        seed: 9,
        ..TrainConfig::default()
    };
    let model = init_model(&src_space, &tgt_space, &config).unwrap();

    let to_tokens = |prefix: &str, ids: &[usize]| -> Vec<String> {
        ids.iter().map(|i| format!("{prefix}{i}")).collect()
    };
    let pairs = [
        (to_tokens("s", &[1, 4, 2]), to_tokens("t", &[3, 0])),
        (to_tokens("s", &[0]), to_tokens("t", &[7, 7, 1, 5])),
        (
            to_tokens("s", &[5, 6, 3, 2, 0, 1, 7]),
            to_tokens("t", &[2, 4, 6]),
        ),
    ];
    let mut worst: f64 = 0.0;
    for (src, tgt) in &pairs {
        let err = gradient_check(&model, (src, tgt), 1e-5)
            .map_err(|e| format!("gradient check failed: {e}"))?;
        worst = worst.max(err);
    }
    let secs = started.elapsed().as_secs_f64();
    gate(
        worst < 1e-4,
        &mut failures,
        format!("max relative error {worst:.3e} not under 1e-4"),
    );
    gate(
        secs < 10.0,
        &mut failures,
        format!("runtime {secs:.1} s not under 10 s"),
    );
    verdict(
        format!("max relative error {worst:.3e} (limit 1e-4), {secs:.2} s (limit 10 s)"),
        failures,
    )
}

/// Hand-computed oracles: kappa on the worked 0.6 case, sentence BLEU on the
/// identity and one-token-short cases, and perplexity of a uniform predictor
/// over a 7-entry target vocabulary.
fn check_metric_oracles() -> Result<String, String> {
    let mut failures = Vec::new();

    let a = [1u8, 1, 1, 1, 1, 0, 0, 0, 0, 0];
    let b = [1u8, 1, 1, 1, 0, 0, 0, 0, 0, 1];
    let kappa = cohens_kappa(&a, &b).unwrap();
    gate(
        (kappa - 0.6).abs() <= 1e-12,
        &mut failures,
        format!("kappa {kappa} != 0.6 within 1e-12"),
    );

    let tokens = |names: &[&str]| -> Vec<String> { names.iter().map(|s| s.to_string()).collect() };
    let identity = bleu(&tokens(&["a", "b", "c", "d"]), &[tokens(&["a", "b", "c", "d"])], 4).unwrap();
    gate(
        (identity - 100.0).abs() <= 1e-9,
        &mut failures,
        format!("identity BLEU {identity} != 100"),
    );
    let short = bleu(
        &tokens(&["a", "b", "c", "d"]),
        &[tokens(&["a", "b", "c", "d", "e"])],
        4,
    )
    .unwrap();
    let expected_short = 100.0 * (-0.25f64).exp();
    gate(
        (short - expected_short).abs() <= 1e-3,
        &mut failures,
        format!("short-candidate BLEU {short} != {expected_short:.4} within 1e-3"),
    );

    let src_tokens: Vec<Vec<String>> = vec![tokens(&["q", "w", "e"])];
    let tgt_tokens: Vec<Vec<String>> = vec![tokens(&["x", "y", "z"])];
    let src_vocab = build_vocabulary(&src_tokens, 1).unwrap();
    let tgt_vocab = build_vocabulary(&tgt_tokens, 1).unwrap();
    gate(
        tgt_vocab.len() == 7,
        &mut failures,
        format!("target vocab size {} instead of 7", tgt_vocab.len()),
    );
    let config = TrainConfig {
        latent_dim: 4,
        max_len: 8,
        ..TrainConfig::default()
    };
    let mut model = init_model(
        &patterned_space(Lang::Ru, src_vocab, 6),
        &patterned_space(Lang::En, tgt_vocab, 6),
        &config,
    )
    .unwrap();
    model.w_out = Matrix::zeros(model.w_out.rows(), model.w_out.cols());
    model.b_out = vec![0.0; model.b_out.len()];
    let pairs = vec![
        (tokens(&["q", "w"]), tokens(&["x", "y", "z"])),
        (tokens(&["e"]), tokens(&["z"])),
    ];
    let ppl = perplexity(&model, &pairs).unwrap();
    gate(
        (ppl - 7.0).abs() <= 1e-6,
        &mut failures,
        format!("uniform-predictor perplexity {ppl} != 7 within 1e-6"),
    );

    verdict(
        format!(
            "kappa {kappa:.12}, BLEU identity {identity:.2} / short {short:.4}, uniform perplexity {ppl:.8}"
        ),
        failures,
    )
}

/// Train the generated toy bilingual task (2000 pairs, deterministic word
/// mapping with bounded local reordering) for 30 epochs and require held-out
/// accuracy >= 0.90, corpus BLEU >= 30, the robust flag, and under 15 minutes
/// of wall time.
fn check_toy_bilingual() -> Result<String, String> {
    let started = Instant::now();
    let data = generate_toy_bilingual(&ToyBilingualConfig::default());
    let src_seqs: Vec<Vec<String>> = data.train.iter().map(|(s, _)| s.clone()).collect();
    let tgt_seqs: Vec<Vec<String>> = data.train.iter().map(|(_, t)| t.clone()).collect();
    let src_vocab = build_vocabulary(&src_seqs, 1).unwrap();
    let tgt_vocab = build_vocabulary(&tgt_seqs, 1).unwrap();
    let mut failures = Vec::new();
    gate(
        data.train.len() == 2000,
        &mut failures,
        format!("{} training pairs instead of 2000", data.train.len()),
    );
    gate(
        src_vocab.len() <= 200 && tgt_vocab.len() <= 200,
        &mut failures,
        format!(
            "vocab sizes {} / {} exceed 200",
            src_vocab.len(),
            tgt_vocab.len()
        ),
    );

    let config = TrainConfig {
        epochs: 30,
        learning_rate: 0.004,
        max_len: 17,
        ..TrainConfig::default()
    };
    let mut model = init_model(
        &patterned_space(Lang::Ru, src_vocab, 100),
        &patterned_space(Lang::En, tgt_vocab, 100),
        &config,
    )
    .unwrap();
    train_translator(&mut model, &data.train).map_err(|e| format!("training failed: {e}"))?;

    let accuracy = forced_token_accuracy(&model, &data.held_out).unwrap();
    let ppl = perplexity(&model, &data.held_out).unwrap();
    let bleu_score = greedy_corpus_bleu(&model, &data.held_out, 4).unwrap();
    let robust = is_robust(accuracy, ppl, bleu_score);
    let secs = started.elapsed().as_secs_f64();

    gate(
        accuracy >= 0.90,
        &mut failures,
        format!("held-out accuracy {accuracy:.4} under 0.90"),
    );
    gate(
        bleu_score >= 30.0,
        &mut failures,
        format!("corpus BLEU {bleu_score:.2} under 30"),
    );
    gate(robust, &mut failures, format!("robust flag false (accuracy {accuracy:.4}, perplexity {ppl:.3}, BLEU {bleu_score:.2})"));
    gate(
        secs < 900.0,
        &mut failures,
        format!("runtime {secs:.0} s not under 900 s"),
    );
    verdict(
        format!(
            "held-out accuracy {accuracy:.4} (>=0.90), BLEU {bleu_score:.2} (>=30), perplexity {ppl:.3}, robust={robust}, {secs:.0} s (limit 900 s)"
        ),
        failures,
    )
}

/// The two interchangeable planted tokens in the substituted-context corpus
/// must come out as mutual nearest neighbors with cosine above 0.8, and the
/// skip-gram sample gradients must match finite differences within 1e-6.
fn check_embedding_semantics() -> Result<String, String> {
    let mut failures = Vec::new();
    let corpus = substituted_context_corpus(5000, 1);
    let vocab = build_vocabulary(&corpus.sentences, 5).unwrap();
    let config = SgnsConfig {
        dim: 50,
        subsample_t: 1.0,
        ..SgnsConfig::default()
    };
    let outcome = train_skipgram(&corpus.sentences, &vocab, Lang::En, &config)
        .map_err(|e| format!("skip-gram training failed: {e}"))?;
    let space = outcome.space;

    let planted_a = corpus.planted.0.as_str();
    let planted_b = corpus.planted.1.as_str();
    let cosine = cosine_similarity(
        space.vector(planted_a).unwrap(),
        space.vector(planted_b).unwrap(),
    )
    .unwrap();
    let top = |token: &str| -> String {
        nearest_neighbors(&space, Query::Token(token), 1).unwrap()[0]
            .0
            .clone()
    };
    let mutual = top(planted_a) == planted_b && top(planted_b) == planted_a;
    gate(
        cosine > 0.8,
        &mut failures,
        format!("planted cosine {cosine:.4} not above 0.8"),
    );
    gate(
        mutual,
        &mut failures,
        format!(
            "not mutual nearest neighbors ({planted_a} -> {}, {planted_b} -> {})",
            top(planted_a),
            top(planted_b)
        ),
    );

    let dim = 7;
    let wave = |phase: f64| -> Vec<f64> {
        (0..dim).map(|i| ((i as f64) * 0.83 + phase).sin() * 0.7).collect()
    };
    let center = wave(0.3);
    let positive = wave(1.1);
    let negatives_owned: Vec<Vec<f64>> = vec![wave(2.2), wave(3.5)];
    let negatives: Vec<&[f64]> = negatives_owned.iter().map(Vec::as_slice).collect();
    let (grad_center, grad_positive, grad_negatives) =
        sgns_sample_gradients(&center, &positive, &negatives);

    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    let mut probe = |analytic: &[f64], base: &[f64], which: usize| {
        for i in 0..dim {
            let mut plus = base.to_vec();
            plus[i] += eps;
            let mut minus = base.to_vec();
            minus[i] -= eps;
            let eval = |v: &[f64]| -> f64 {
                match which {
                    0 => sgns_sample_loss(v, &positive, &negatives),
                    1 => sgns_sample_loss(&center, v, &negatives),
                    _ => {
                        let swapped: Vec<&[f64]> = negatives_owned
                            .iter()
                            .enumerate()
                            .map(|(k, n)| if k == which - 2 { v } else { n.as_slice() })
                            .collect();
                        sgns_sample_loss(&center, &positive, &swapped)
                    }
                }
            };
            let numeric = (eval(&plus) - eval(&minus)) / (2.0 * eps);
            let rel = (analytic[i] - numeric).abs()
                / f64::max(1e-12, analytic[i].abs() + numeric.abs());
            worst = worst.max(rel);
        }
    };
    probe(&grad_center, &center, 0);
    probe(&grad_positive, &positive, 1);
    for (k, grad) in grad_negatives.iter().enumerate() {
        probe(grad, &negatives_owned[k], k + 2);
    }
    gate(
        worst < 1e-6,
        &mut failures,
        format!("skip-gram gradient relative error {worst:.3e} not under 1e-6"),
    );

    verdict(
        format!(
            "planted cosine {cosine:.4} (>0.8), mutual neighbors {mutual}, gradient error {worst:.3e} (<1e-6)"
        ),
        failures,
    )
}

/// Raising the agreement threshold must never accept more entries (checked
/// over 1000 random label matrices), and an entry whose kappa is exactly 0.66
/// must be rejected at the 0.66 threshold.
fn check_alignment_gate() -> Result<String, String> {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    let mut ru_synsets = Vec::new();
    let mut en_synsets = Vec::new();
    let mut pairing = Vec::new();
    let mut labels: LabelSet = LabelSet::new();
    for i in 0..1000 {
        let ru_terms = 1 + rng.random_range(1..=2usize);
        let en_terms = rng.random_range(1..=3usize);
        let ru_id = format!("r{i}");
        let en_id = format!("e{i}");
        ru_synsets.push(Synset {
            lang: Lang::Ru,
            sense_id: ru_id.clone(),
            terms: (0..ru_terms).map(|t| format!("рус{i}х{t}")).collect(),
            gloss: None,
        });
        en_synsets.push(Synset {
            lang: Lang::En,
            sense_id: en_id.clone(),
            terms: (0..en_terms).map(|t| format!("eng{i}x{t}")).collect(),
            gloss: None,
        });
        pairing.push((ru_id.clone(), en_id.clone()));
        let annotators = rng.random_range(2..=4usize);
        let items = ru_terms * en_terms;
        let matrix: Vec<Vec<u8>> = (0..annotators)
            .map(|_| (0..items).map(|_| rng.random_range(0..=1u8)).collect())
            .collect();
        labels.insert((ru_id, en_id), matrix);
    }

    let thresholds: Vec<f64> = (0..=40).map(|i| -1.0 + i as f64 * 0.05).collect();
    let mut previous = usize::MAX;
    let mut monotone = true;
    let mut counts = Vec::new();
    for &t in &thresholds {
        let db = build_alignment_db(&ru_synsets, &en_synsets, &pairing, &labels, t)
            .map_err(|e| format!("alignment build failed: {e}"))?;
        let accepted = db.iter().filter(|e| e.accepted).count();
        if accepted > previous {
            monotone = false;
        }
        previous = accepted;
        counts.push(accepted);
    }
    gate(
        monotone,
        &mut failures,
        format!("accepted counts not non-increasing over thresholds: {counts:?}"),
    );

    // 68 items, 21 both-yes, 5 yes/no, 6 no/yes, 36 both-no: kappa = 1452/2200
    // which is exactly 0.66 in double precision.
    let mut row_a = Vec::new();
    let mut row_b = Vec::new();
    for (count, a, b) in [(21, 1u8, 1u8), (5, 1, 0), (6, 0, 1), (36, 0, 0)] {
        for _ in 0..count {
            row_a.push(a);
            row_b.push(b);
        }
    }
    let exact = cohens_kappa(&row_a, &row_b).unwrap();
    gate(
        exact == 0.66,
        &mut failures,
        format!("constructed kappa {exact} is not bit-exactly 0.66"),
    );

    let terms: Vec<String> = (0..68).map(|t| format!("т{t}")).collect();
    let edge_ru = vec![Synset {
        lang: Lang::Ru,
        sense_id: "edge_r".into(),
        terms,
        gloss: None,
    }];
    let edge_en = vec![Synset {
        lang: Lang::En,
        sense_id: "edge_e".into(),
        terms: vec!["edge".into()],
        gloss: None,
    }];
    let edge_pairing = vec![("edge_r".to_string(), "edge_e".to_string())];
    let mut edge_labels: LabelSet = LabelSet::new();
    edge_labels.insert(
        ("edge_r".into(), "edge_e".into()),
        vec![row_a.clone(), row_b.clone()],
    );
    let at_threshold = build_alignment_db(&edge_ru, &edge_en, &edge_pairing, &edge_labels, 0.66)
        .map_err(|e| format!("edge-case build failed: {e}"))?;
    let rejected = !at_threshold[0].accepted;
    let below = build_alignment_db(&edge_ru, &edge_en, &edge_pairing, &edge_labels, 0.6599)
        .map_err(|e| format!("edge-case build failed: {e}"))?;
    let accepted_below = below[0].accepted;
    gate(
        rejected,
        &mut failures,
        "kappa exactly 0.66 was accepted at threshold 0.66".to_string(),
    );
    gate(
        accepted_below,
        &mut failures,
        "kappa 0.66 was rejected at threshold 0.6599".to_string(),
    );

    verdict(
        format!(
            "accepted counts non-increasing over {} thresholds ({} -> {}), kappa {exact} rejected at 0.66 and accepted at 0.6599",
            thresholds.len(),
            counts.first().unwrap(),
            counts.last().unwrap()
        ),
        failures,
    )
}

/// The Skype example text must serialize byte-identically to the golden
/// Turtle file, and an independent Turtle parser must recover the same triple
/// set from both.
fn check_turtle_golden() -> Result<String, String> {
    use rio_api::parser::TriplesParser;

    let mut failures = Vec::new();
    let root = repo_root();
    let out_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out_path = out_dir.path().join("skype.ttl");
    let status = Command::new(env!("CARGO_BIN_EXE_cybertrans"))
        .current_dir(&root)
        .args([
            "rdf",
            "--text",
            "URL Command Injection Remote Code Execution Vulnerability in Microsoft Skype",
            "--gazetteer",
            "data/gazetteer.jsonl",
            "--intel-id",
            "Int534962883",
            "--out",
        ])
        .arg(&out_path)
        .status()
        .map_err(|e| format!("running rdf subcommand failed: {e}"))?;
    if !status.success() {
        return Err(format!("rdf subcommand exited with {status}"));
    }

    let golden = fs::read(root.join("data/golden/skype_intel.ttl")).map_err(|e| e.to_string())?;
    let produced = fs::read(&out_path).map_err(|e| e.to_string())?;
    let identical = golden == produced;
    gate(
        identical,
        &mut failures,
        format!(
            "output differs from golden file ({} vs {} bytes)",
            produced.len(),
            golden.len()
        ),
    );

    let parse = |bytes: &[u8]| -> Result<BTreeSet<(String, String, String)>, String> {
        let base = oxiri::Iri::parse("http://example.org/".to_string()).unwrap();
        let mut triples = BTreeSet::new();
        let mut parser = rio_turtle::TurtleParser::new(bytes, Some(base));
        parser
            .parse_all(&mut |t| {
                triples.insert((
                    t.subject.to_string(),
                    t.predicate.to_string(),
                    t.object.to_string(),
                ));
                Ok(()) as Result<(), rio_turtle::TurtleError>
            })
            .map_err(|e| format!("turtle parse failed: {e}"))?;
        Ok(triples)
    };
    let golden_triples = parse(&golden)?;
    let produced_triples = parse(&produced)?;
    gate(
        golden_triples == produced_triples,
        &mut failures,
        "parsed triple sets differ".to_string(),
    );
    gate(
        produced_triples.len() == 10,
        &mut failures,
        format!("{} triples instead of 10", produced_triples.len()),
    );

    verdict(
        format!(
            "byte-identical={identical}, independent parse recovered {} matching triples",
            produced_triples.len()
        ),
        failures,
    )
}

/// Two full pipeline runs under one seed must produce byte-identical
/// artifacts: corpora, embeddings, alignment database, training pairs, model
/// checkpoint, and evaluation report.
fn check_pipeline_determinism() -> Result<String, String> {
    let mut failures = Vec::new();
    let root = repo_root();
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dirs = [work.path().join("run1"), work.path().join("run2")];
    for dir in &dirs {
        let status = Command::new(env!("CARGO_BIN_EXE_cybertrans"))
            .current_dir(&root)
            .args(["pipeline", "--config", "data/sample/config.json", "--out-dir"])
            .arg(dir)
            .status()
            .map_err(|e| format!("running pipeline failed: {e}"))?;
        if !status.success() {
            return Err(format!("pipeline exited with {status}"));
        }
    }

    fn collect(dir: &Path, prefix: &Path, files: &mut Vec<PathBuf>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            let rel = path.strip_prefix(prefix).unwrap().to_path_buf();
            if path.is_dir() {
                collect(&path, prefix, files);
            } else {
                files.push(rel);
            }
        }
    }
    let mut first = Vec::new();
    collect(&dirs[0], &dirs[0], &mut first);
    let mut second = Vec::new();
    collect(&dirs[1], &dirs[1], &mut second);
    first.sort();
    second.sort();
    gate(
        first == second,
        &mut failures,
        format!("artifact listings differ: {first:?} vs {second:?}"),
    );
    gate(
        first.len() >= 9,
        &mut failures,
        format!("only {} artifacts produced", first.len()),
    );

    let mut differing = Vec::new();
    for rel in &first {
        let a = fs::read(dirs[0].join(rel)).map_err(|e| e.to_string())?;
        let b = fs::read(dirs[1].join(rel)).map_err(|e| e.to_string())?;
        if a != b {
            differing.push(rel.display().to_string());
        }
    }
    gate(
        differing.is_empty(),
        &mut failures,
        format!("artifacts differ between runs: {differing:?}"),
    );

    verdict(
        format!("{} artifacts byte-identical across two runs", first.len()),
        failures,
    )
}

/// Embeddings and model checkpoints must survive save/load with bit-identical
/// parameters and produce identical greedy translations on 100 random inputs.
fn check_round_trips() -> Result<String, String> {
    let mut failures = Vec::new();

    let corpus = substituted_context_corpus(300, 5);
    let vocab = build_vocabulary(&corpus.sentences, 2).unwrap();
    let sgns = SgnsConfig {
        dim: 24,
        epochs: 2,
        ..SgnsConfig::default()
    };
    let space = train_skipgram(&corpus.sentences, &vocab, Lang::En, &sgns)
        .map_err(|e| format!("skip-gram training failed: {e}"))?
        .space;
    let mut buffer = Vec::new();
    save_embeddings(&space, &mut buffer).map_err(|e| e.to_string())?;
    let reloaded = load_embeddings(buffer.as_slice(), Lang::En).map_err(|e| e.to_string())?;
    let embeddings_bitwise = space.vectors().data() == reloaded.vectors().data();
    gate(
        embeddings_bitwise,
        &mut failures,
        "embedding matrix changed across save/load".to_string(),
    );

    let tokens = copy_token_list();
    let pairs = generate_copy_pairs(&tokens, 200, 5, 3);
    let sources: Vec<Vec<String>> = pairs.iter().map(|(s, _)| s.clone()).collect();
    let vocab = build_vocabulary(&sources, 1).unwrap();
    let config = TrainConfig {
        batch_size: 16,
        epochs: 3,
        latent_dim: 32,
        max_len: 8,
        learning_rate: 0.003,
        ..TrainConfig::default()
    };
    let mut model = init_model(
        &patterned_space(Lang::Ru, vocab.clone(), 16),
        &patterned_space(Lang::En, vocab, 16),
        &config,
    )
    .unwrap();
    train_translator(&mut model, &pairs).map_err(|e| format!("training failed: {e}"))?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    save_model(&model, dir.path()).map_err(|e| e.to_string())?;
    let restored = load_model(dir.path()).map_err(|e| e.to_string())?;

    let bits = |m: &Matrix| -> Vec<u64> { m.data().iter().map(|v| v.to_bits()).collect() };
    let vec_bits = |v: &[f64]| -> Vec<u64> { v.iter().map(|x| x.to_bits()).collect() };
    let tensors_bitwise = bits(&model.src_embed) == bits(&restored.src_embed)
        && bits(&model.tgt_embed) == bits(&restored.tgt_embed)
        && bits(&model.encoder.w_x) == bits(&restored.encoder.w_x)
        && bits(&model.encoder.w_h) == bits(&restored.encoder.w_h)
        && vec_bits(&model.encoder.b) == vec_bits(&restored.encoder.b)
        && bits(&model.decoder.w_x) == bits(&restored.decoder.w_x)
        && bits(&model.decoder.w_h) == bits(&restored.decoder.w_h)
        && vec_bits(&model.decoder.b) == vec_bits(&restored.decoder.b)
        && bits(&model.w_out) == bits(&restored.w_out)
        && vec_bits(&model.b_out) == vec_bits(&restored.b_out);
    gate(
        tensors_bitwise,
        &mut failures,
        "model tensors changed across save/load".to_string(),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut matching = 0;
    for _ in 0..100 {
        let len = rng.random_range(1..=5usize);
        let input: Vec<String> = (0..len)
            .map(|_| tokens[rng.random_range(0..tokens.len())].clone())
            .collect();
        let before = translate_greedy(&model, &input, 8).map_err(|e| e.to_string())?;
        let after = translate_greedy(&restored, &input, 8).map_err(|e| e.to_string())?;
        if before == after {
            matching += 1;
        }
    }
    gate(
        matching == 100,
        &mut failures,
        format!("only {matching}/100 greedy translations identical after reload"),
    );

    verdict(
        format!(
            "embeddings bitwise={embeddings_bitwise}, model tensors bitwise={tensors_bitwise}, {matching}/100 identical translations"
        ),
        failures,
    )
}
