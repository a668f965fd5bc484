use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cybertrans_core::alignment::{
    build_alignment_db, generate_training_pairs, load_labels, load_pairing, load_synsets,
    save_alignment_db, AlignmentEntry,
};
use cybertrans_core::corpus::{
    build_vocabulary, filter_by_keywords, load_keywords, normalize_text, parse_tweet_jsonl,
    TweetRecord,
};
use cybertrans_core::embeddings::{
    load_embeddings, nearest_neighbors, save_embeddings, train_skipgram, Query,
};
use cybertrans_core::evaluation::{build_report, load_reference_tsv};
use cybertrans_core::intel::{
    build_intel_graph, extract_concepts, intel_id_for, load_gazetteer, save_turtle,
};
use cybertrans_core::translator::{
    init_model, load_model, save_model, train_translator, translate_greedy,
};
use cybertrans_core::{Lang, SgnsConfig, TrainConfig};

mod config;
use config::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "cybertrans",
    version,
    about = "Russian-to-English cybersecurity intelligence pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Filter a tweet JSONL dump by language and keyword list
    Ingest(IngestArgs),
    /// Train skip-gram embeddings on an ingested corpus
    Embed(EmbedArgs),
    /// Build the kappa-gated synset alignment database
    Align(AlignArgs),
    /// Train the encoder-decoder translator on aligned pairs
    Train(TrainArgs),
    /// Translate text with a trained model
    Translate(TranslateArgs),
    /// Score a model and write the evaluation report
    Evaluate(EvaluateArgs),
    /// Extract concepts from text and emit an RDF Turtle graph
    Rdf(RdfArgs),
    /// Query nearest neighbors in an embedding space
    Neighbors(NeighborsArgs),
    /// Run ingest, embed, align, train, and evaluate end to end
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Tweet JSONL dump, one object per line
    #[arg(long)]
    input: PathBuf,
    /// Keep only records in this language (en or ru)
    #[arg(long)]
    lang: Option<String>,
    /// Keyword list, one lowercase keyword per line
    #[arg(long)]
    keywords: PathBuf,
    /// Output corpus JSONL
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EmbedArgs {
    /// Ingested corpus JSONL
    #[arg(long)]
    corpus: PathBuf,
    /// Language tag recorded in the embedding file (en or ru)
    #[arg(long)]
    lang: String,
    /// Output embedding text file
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    #[arg(long, default_value_t = SgnsConfig::default().dim)]
    dim: usize,
    #[arg(long, default_value_t = SgnsConfig::default().window)]
    window: usize,
    #[arg(long, default_value_t = SgnsConfig::default().negatives)]
    negatives: usize,
    #[arg(long, default_value_t = SgnsConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = SgnsConfig::default().initial_lr)]
    initial_lr: f64,
    #[arg(long, default_value_t = SgnsConfig::default().min_lr)]
    min_lr: f64,
    #[arg(long, default_value_t = SgnsConfig::default().subsample_t)]
    subsample_t: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long)]
    ru_synsets: PathBuf,
    #[arg(long)]
    en_synsets: PathBuf,
    /// Pairing index JSONL with ru_sense_id / en_sense_id rows
    #[arg(long)]
    pairs: PathBuf,
    /// Annotator label matrices JSONL
    #[arg(long)]
    labels: PathBuf,
    #[arg(long, default_value_t = 0.66)]
    kappa_threshold: f64,
    /// Output alignment database JSONL
    #[arg(long)]
    out: PathBuf,
    /// Optional TSV of majority-accepted training pairs
    #[arg(long)]
    train_pairs: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training pairs TSV: source TAB target
    #[arg(long)]
    pairs: PathBuf,
    /// Source-language embedding file
    #[arg(long)]
    src_emb: PathBuf,
    /// Target-language embedding file
    #[arg(long)]
    tgt_emb: PathBuf,
    #[arg(long, default_value = "ru")]
    src_lang: String,
    #[arg(long, default_value = "en")]
    tgt_lang: String,
    /// Output checkpoint directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().latent_dim)]
    latent_dim: usize,
    #[arg(long, default_value_t = TrainConfig::default().max_pairs)]
    max_pairs: usize,
    #[arg(long, default_value_t = TrainConfig::default().max_len)]
    max_len: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().grad_clip)]
    grad_clip: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct TranslateArgs {
    /// Checkpoint directory
    #[arg(long)]
    model: PathBuf,
    /// Single text to translate
    #[arg(long, conflicts_with = "input")]
    text: Option<String>,
    /// File with one text per line
    #[arg(long)]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Checkpoint directory
    #[arg(long)]
    model: PathBuf,
    /// Held-out pairs TSV for teacher-forced accuracy and perplexity
    #[arg(long)]
    pairs: PathBuf,
    /// Reference-system translations TSV for the comparison metrics
    #[arg(long)]
    refs: PathBuf,
    /// Target-language embedding file for the semantic proxy
    #[arg(long)]
    tgt_emb: PathBuf,
    #[arg(long, default_value = "en")]
    tgt_lang: String,
    #[arg(long, default_value_t = 0.7)]
    semantic_threshold: f64,
    /// Output report JSON
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct RdfArgs {
    /// Text to scan for cybersecurity concepts
    #[arg(long)]
    text: String,
    /// Gazetteer JSONL
    #[arg(long)]
    gazetteer: PathBuf,
    /// Intelligence node id; derived from the text when omitted
    #[arg(long)]
    intel_id: Option<String>,
    /// Output Turtle file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct NeighborsArgs {
    /// Embedding text file
    #[arg(long)]
    emb: PathBuf,
    #[arg(long, default_value = "en")]
    lang: String,
    /// Query token
    #[arg(long)]
    token: String,
    #[arg(short, default_value_t = 10)]
    k: usize,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline configuration JSON
    #[arg(long)]
    config: PathBuf,
    /// Override the configured output directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Override the configured seed
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (stage, outcome) = match cli.command {
        Command::Ingest(args) => ("ingest", cmd_ingest(&args)),
        Command::Embed(args) => ("embed", cmd_embed(&args)),
        Command::Align(args) => ("align", cmd_align(&args)),
        Command::Train(args) => ("train", cmd_train(&args)),
        Command::Translate(args) => ("translate", cmd_translate(&args)),
        Command::Evaluate(args) => ("evaluate", cmd_evaluate(&args)),
        Command::Rdf(args) => ("rdf", cmd_rdf(&args)),
        Command::Neighbors(args) => ("neighbors", cmd_neighbors(&args)),
        Command::Pipeline(args) => ("pipeline", cmd_pipeline(&args)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("cybertrans: {stage}: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn parse_lang(name: &str) -> Result<Lang> {
    name.parse::<Lang>()
        .map_err(|_| anyhow::anyhow!("unknown language {name:?}, expected en or ru"))
}

fn open_reader(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| {
        format!("cannot open {}", path.display())
    })?))
}

fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

fn read_corpus(path: &Path) -> Result<Vec<TweetRecord>> {
    let parsed = parse_tweet_jsonl(open_reader(path)?, None)?;
    Ok(parsed.records)
}

fn corpus_sequences(records: &[TweetRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|record| {
            if record.tokens.is_empty() {
                normalize_text(&record.text)
            } else {
                record.tokens.clone()
            }
        })
        .collect()
}

fn write_corpus(records: &[TweetRecord], path: &Path) -> Result<()> {
    let mut writer = create_writer(path)?;
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

fn write_pairs_tsv(pairs: &[(Vec<String>, Vec<String>)], path: &Path) -> Result<()> {
    let mut writer = create_writer(path)?;
    for (src, tgt) in pairs {
        writeln!(writer, "{}\t{}", src.join(" "), tgt.join(" "))?;
    }
    writer.flush()?;
    Ok(())
}

fn run_ingest(
    input: &Path,
    lang: Option<Lang>,
    keywords_path: &Path,
    out: &Path,
) -> Result<(usize, usize, usize)> {
    let parsed = parse_tweet_jsonl(open_reader(input)?, lang)?;
    let keywords = load_keywords(open_reader(keywords_path)?)?;
    let kept = filter_by_keywords(&parsed.records, &keywords)?;
    if kept.is_empty() {
        bail!("no records matched the keyword list");
    }
    write_corpus(&kept, out)?;
    Ok((kept.len(), parsed.records.len(), parsed.skipped))
}

fn cmd_ingest(args: &IngestArgs) -> Result<()> {
    let lang = args.lang.as_deref().map(parse_lang).transpose()?;
    let (kept, total, skipped) = run_ingest(&args.input, lang, &args.keywords, &args.out)?;
    println!(
        "kept {kept} of {total} records (skipped {skipped} malformed) -> {}",
        args.out.display()
    );
    Ok(())
}

fn run_embed(
    corpus: &Path,
    lang: Lang,
    min_count: u64,
    config: &SgnsConfig,
    out: &Path,
) -> Result<(usize, f64)> {
    let records = read_corpus(corpus)?;
    let sequences = corpus_sequences(&records);
    let vocab = build_vocabulary(&sequences, min_count)?;
    let outcome = train_skipgram(&sequences, &vocab, lang, config)?;
    save_embeddings(&outcome.space, create_writer(out)?)?;
    let final_loss = outcome.epoch_losses.last().copied().unwrap_or(f64::NAN);
    Ok((outcome.space.vocab.len(), final_loss))
}

fn cmd_embed(args: &EmbedArgs) -> Result<()> {
    let lang = parse_lang(&args.lang)?;
    let config = SgnsConfig {
        dim: args.dim,
        window: args.window,
        negatives: args.negatives,
        epochs: args.epochs,
        initial_lr: args.initial_lr,
        min_lr: args.min_lr,
        subsample_t: args.subsample_t,
        seed: args.seed,
    };
    let (vocab_len, final_loss) = run_embed(&args.corpus, lang, args.min_count, &config, &args.out)?;
    println!(
        "trained {vocab_len}-token {lang} space, final loss {final_loss:.4} -> {}",
        args.out.display()
    );
    Ok(())
}

fn run_align(
    ru_synsets: &Path,
    en_synsets: &Path,
    pairs: &Path,
    labels: &Path,
    threshold: f64,
    out: &Path,
) -> Result<Vec<AlignmentEntry>> {
    let ru = load_synsets(open_reader(ru_synsets)?)?;
    let en = load_synsets(open_reader(en_synsets)?)?;
    let pairing = load_pairing(open_reader(pairs)?)?;
    let label_set = load_labels(open_reader(labels)?)?;
    let entries = build_alignment_db(&ru, &en, &pairing, &label_set, threshold)?;
    save_alignment_db(&entries, create_writer(out)?)?;
    Ok(entries)
}

fn cmd_align(args: &AlignArgs) -> Result<()> {
    let entries = run_align(
        &args.ru_synsets,
        &args.en_synsets,
        &args.pairs,
        &args.labels,
        args.kappa_threshold,
        &args.out,
    )?;
    let accepted = entries.iter().filter(|e| e.accepted).count();
    println!(
        "accepted {accepted} of {} entries at threshold {} -> {}",
        entries.len(),
        args.kappa_threshold,
        args.out.display()
    );
    if let Some(pairs_out) = &args.train_pairs {
        let pairs = generate_training_pairs(&entries)?;
        write_pairs_tsv(&pairs, pairs_out)?;
        println!("wrote {} training pairs -> {}", pairs.len(), pairs_out.display());
    }
    Ok(())
}

fn run_train(
    pairs_path: &Path,
    src_emb: &Path,
    src_lang: Lang,
    tgt_emb: &Path,
    tgt_lang: Lang,
    config: &TrainConfig,
    out: &Path,
) -> Result<(usize, f64)> {
    let pairs = load_reference_tsv(open_reader(pairs_path)?)?;
    let src_space = load_embeddings(open_reader(src_emb)?, src_lang)?;
    let tgt_space = load_embeddings(open_reader(tgt_emb)?, tgt_lang)?;
    let mut model = init_model(&src_space, &tgt_space, config)?;
    let trace = train_translator(&mut model, &pairs)?;
    save_model(&model, out)?;
    let final_loss = trace.last().copied().unwrap_or(f64::NAN);
    Ok((pairs.len(), final_loss))
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let config = TrainConfig {
        batch_size: args.batch_size,
        epochs: args.epochs,
        latent_dim: args.latent_dim,
        max_pairs: args.max_pairs,
        max_len: args.max_len,
        learning_rate: args.learning_rate,
        grad_clip: args.grad_clip,
        seed: args.seed,
    };
    let (pairs, final_loss) = run_train(
        &args.pairs,
        &args.src_emb,
        parse_lang(&args.src_lang)?,
        &args.tgt_emb,
        parse_lang(&args.tgt_lang)?,
        &config,
        &args.out,
    )?;
    println!(
        "trained on {pairs} pairs for {} epochs, final loss {final_loss:.4} -> {}",
        config.epochs,
        args.out.display()
    );
    Ok(())
}

fn cmd_translate(args: &TranslateArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let texts: Vec<String> = match (&args.text, &args.input) {
        (Some(text), None) => vec![text.clone()],
        (None, Some(path)) => open_reader(path)?
            .lines()
            .collect::<std::io::Result<_>>()?,
        (None, None) => bail!("provide --text or --input"),
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    for text in texts {
        let tokens = normalize_text(&text);
        let translated = translate_greedy(&model, &tokens, model.hyper.max_len)?;
        println!("{}", translated.join(" "));
    }
    Ok(())
}

fn run_evaluate(
    model_dir: &Path,
    pairs_path: &Path,
    refs_path: &Path,
    tgt_emb: &Path,
    tgt_lang: Lang,
    semantic_threshold: f64,
    report_path: &Path,
) -> Result<cybertrans_core::evaluation::EvalReport> {
    let model = load_model(model_dir)?;
    let pairs = load_reference_tsv(open_reader(pairs_path)?)?;
    let refs = load_reference_tsv(open_reader(refs_path)?)?;
    let space = load_embeddings(open_reader(tgt_emb)?, tgt_lang)?;
    let report = build_report(&model, &pairs, &refs, &space, semantic_threshold)?;
    report.save(create_writer(report_path)?)?;
    Ok(report)
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let report = run_evaluate(
        &args.model,
        &args.pairs,
        &args.refs,
        &args.tgt_emb,
        parse_lang(&args.tgt_lang)?,
        args.semantic_threshold,
        &args.report,
    )?;
    println!(
        "accuracy {:.4}, perplexity {:.3}, bleu {:.2}, robust {} -> {}",
        report.token_accuracy,
        report.perplexity,
        report.bleu,
        report.robust,
        args.report.display()
    );
    Ok(())
}

fn cmd_rdf(args: &RdfArgs) -> Result<()> {
    let tokens = normalize_text(&args.text);
    let gazetteer = load_gazetteer(&args.gazetteer)?;
    let concepts = extract_concepts(&tokens, &gazetteer);
    let intel_id = match &args.intel_id {
        Some(id) => id.clone(),
        None => intel_id_for(&tokens.join(" ")),
    };
    let graph = build_intel_graph(&concepts, &intel_id)?;
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    save_turtle(&graph, &args.out)?;
    println!(
        "extracted {} concepts into <{intel_id}> -> {}",
        concepts.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_neighbors(args: &NeighborsArgs) -> Result<()> {
    let space = load_embeddings(open_reader(&args.emb)?, parse_lang(&args.lang)?)?;
    let hits = nearest_neighbors(&space, Query::Token(&args.token), args.k)?;
    for (token, cosine) in hits {
        println!("{token}\t{cosine:.6}");
    }
    Ok(())
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<()> {
    let mut config = PipelineConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
        config.embed.seed = seed;
        config.train.seed = seed;
    }
    if let Some(out_dir) = &args.out_dir {
        config.paths.out_dir = out_dir.clone();
    }
    config.validate_inputs()?;
    let out_dir = config.paths.out_dir.clone();
    fs::create_dir_all(&out_dir)?;

    let corpus_ru = out_dir.join("corpus_ru.jsonl");
    let corpus_en = out_dir.join("corpus_en.jsonl");
    let (kept_ru, _, _) = run_ingest(
        &config.paths.ru_tweets,
        Some(Lang::Ru),
        &config.paths.keywords,
        &corpus_ru,
    )
    .context("ingest ru")?;
    let (kept_en, _, _) = run_ingest(
        &config.paths.en_tweets,
        Some(Lang::En),
        &config.paths.keywords,
        &corpus_en,
    )
    .context("ingest en")?;
    println!("ingest: {kept_ru} ru and {kept_en} en records");

    let emb_ru = out_dir.join("embeddings_ru.txt");
    let emb_en = out_dir.join("embeddings_en.txt");
    let (vocab_ru, _) = run_embed(&corpus_ru, Lang::Ru, config.min_count, &config.embed, &emb_ru)
        .context("embed ru")?;
    let (vocab_en, _) = run_embed(&corpus_en, Lang::En, config.min_count, &config.embed, &emb_en)
        .context("embed en")?;
    println!("embed: {vocab_ru} ru and {vocab_en} en tokens");

    let db_path = out_dir.join("alignment_db.jsonl");
    let pairs_path = out_dir.join("train_pairs.tsv");
    let entries = run_align(
        &config.paths.ru_synsets,
        &config.paths.en_synsets,
        &config.paths.pairing,
        &config.paths.labels,
        config.kappa_threshold,
        &db_path,
    )
    .context("align")?;
    let pairs = generate_training_pairs(&entries).context("align")?;
    write_pairs_tsv(&pairs, &pairs_path).context("align")?;
    println!(
        "align: {} of {} entries accepted, {} training pairs",
        entries.iter().filter(|e| e.accepted).count(),
        entries.len(),
        pairs.len()
    );

    let model_dir = out_dir.join("model");
    let (_, final_loss) = run_train(
        &pairs_path,
        &emb_ru,
        Lang::Ru,
        &emb_en,
        Lang::En,
        &config.train,
        &model_dir,
    )
    .context("train")?;
    println!("train: final loss {final_loss:.4}");

    let report_path = out_dir.join("report.json");
    let report = run_evaluate(
        &model_dir,
        &pairs_path,
        &config.paths.refs,
        &emb_en,
        Lang::En,
        config.semantic_threshold,
        &report_path,
    )
    .context("evaluate")?;
    println!(
        "evaluate: accuracy {:.4}, perplexity {:.3}, bleu {:.2}, robust {}",
        report.token_accuracy, report.perplexity, report.bleu, report.robust
    );
    println!("pipeline artifacts in {}", out_dir.display());
    Ok(())
}
