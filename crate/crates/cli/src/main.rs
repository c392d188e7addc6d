use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use riskdetect::cattention::write_loss_history;
use riskdetect::container::Persist;
use riskdetect::corpus::{generate_synthetic, load_corpus, save_corpus, Label, SynthConfig, Task};
use riskdetect::doc2vec::{train_pvdm, write_embeddings, DocKind, Doc2VecModel};
use riskdetect::eval::{run_experiment, ExperimentConfig, Report, TrainedPipeline};
use riskdetect::features::{write_feature_csv, HandcraftedExtractor, UserAggregation};
use riskdetect::io::write_atomic;
use riskdetect::lexicons::build_3st_dictionary;
use riskdetect::postagger::{parse_treebank, train_tagger, TaggerModel};
use riskdetect::resources::Resources;
use riskdetect::textprep::{chunk_user, ChunkingConfig};
use riskdetect::{Error, ErrorClass, Result};

#[derive(Parser)]
#[command(name = "riskdetect", version, about = "Suicide-risk detection from user post histories")]
struct Cli {
    /// Overrides every seed in the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Experiment config (TOML); built-in synthetic setup when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Only report errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus (JSONL).
    Synth(SynthArgs),
    /// Extract handcrafted features (CSV) or latent embeddings (JSONL).
    Features(FeaturesArgs),
    /// Run the experiment, save fitted models and write the test report.
    Train(TrainArgs),
    /// Re-evaluate saved models on a labeled corpus.
    Eval(EvalArgs),
    /// Score users with a saved model: CSV `user_id,label,score`.
    Predict(PredictArgs),
    /// Expand seed words into a dictionary by embedding nearest neighbours.
    BuildDict(BuildDictArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    n_risk: usize,
    #[arg(long, default_value_t = 50)]
    n_control: usize,
    #[arg(long, default_value_t = 5)]
    posts_min: usize,
    #[arg(long, default_value_t = 15)]
    posts_max: usize,
    /// Probability in [0,1] of drawing a risk word in a risk user's post.
    #[arg(long, default_value_t = 0.5)]
    signal: f64,
    #[arg(long, default_value = "thirty_day")]
    task: Task,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum FeatureTrack {
    Handcrafted,
    Latent,
}

#[derive(Clone, Copy, ValueEnum)]
enum DocKindArg {
    Post,
    Segment,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_enum)]
    track: FeatureTrack,
    /// Resource directory laid out like the bundled data (stop-words, lemma rules, lexicons).
    #[arg(long)]
    lexicon_dir: Option<PathBuf>,
    /// Tagger container (handcrafted) or doc2vec container (latent; required).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Embed posts or fixed-length segments (latent track).
    #[arg(long, value_enum, default_value = "segment")]
    doc_kind: DocKindArg,
    #[arg(long, default_value_t = 150)]
    segment_len: usize,
    #[arg(long, default_value = "mean")]
    aggregation: String,
    #[arg(long, default_value = "thirty_day")]
    task: Task,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Output directory for model containers, the test split and loss histories.
    #[arg(long)]
    models: PathBuf,
    /// Aligned-text report; a CSV twin is written next to it.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    models: PathBuf,
    /// Labeled corpus; defaults to the test split saved by `train`.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Model to score with; the first configured model by default.
    #[arg(long)]
    model_name: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildDictArgs {
    /// Corpus to train word embeddings on (ignored with --embeddings).
    #[arg(long, required_unless_present = "embeddings")]
    corpus: Option<PathBuf>,
    /// Trained doc2vec container whose word vectors are used.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Comma-separated seed words.
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<String>,
    #[arg(long, default_value_t = 20)]
    k: usize,
    #[arg(long)]
    name: String,
    #[arg(long)]
    lexicon_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Usage => 2,
        ErrorClass::Validation => 3,
        ErrorClass::Training => 4,
        ErrorClass::Io => 5,
    }
}

fn experiment_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default_synthetic(),
    };
    if let Some(s) = cli.seed {
        cfg.experiment.seed = s;
    }
    Ok(cfg)
}

fn write_report(report: &Report, path: &Path) -> Result<()> {
    write_atomic(path, report.to_text().as_bytes())?;
    write_atomic(&path.with_extension("csv"), report.to_csv().as_bytes())
}

fn synth(cli: &Cli, a: &SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        n_risk: a.n_risk,
        n_control: a.n_control,
        posts_min: a.posts_min,
        posts_max: a.posts_max,
        signal: a.signal,
        seed: cli.seed.unwrap_or(0),
        task: a.task,
    };
    let corpus = generate_synthetic(&cfg, &Resources::bundled()?.synth_vocabulary())?;
    save_corpus(&corpus, &a.out)?;
    log::info!("wrote {} users to {}", corpus.len(), a.out.display());
    Ok(())
}

fn features(cli: &Cli, a: &FeaturesArgs) -> Result<()> {
    let resources = Resources::from_optional_dir(a.lexicon_dir.as_deref())?;
    let corpus = load_corpus(&a.corpus, a.task)?;
    if corpus.is_empty() {
        return Err(Error::Validation(format!("corpus {} has no users", a.corpus.display())));
    }
    let mut buf = Vec::new();
    match a.track {
        FeatureTrack::Handcrafted => {
            let tagger = match &a.model {
                Some(p) => TaggerModel::load(p)?,
                None => train_tagger(&parse_treebank(&resources.treebank, "mini_treebank.txt")?, 5, cli.seed.unwrap_or(0))?,
            };
            let aggregation: UserAggregation = match a.aggregation.as_str() {
                "mean" => UserAggregation::Mean,
                "sum" => UserAggregation::Sum,
                other => return Err(Error::Config(format!("unknown aggregation `{other}`"))),
            };
            let ex = HandcraftedExtractor {
                preprocessor: &resources.preprocessor,
                emotions: &resources.emotions,
                tst: &resources.tst,
                tagger: &tagger,
                aggregation,
            };
            let rows: Vec<(String, &str, Vec<f64>)> = corpus
                .users
                .iter()
                .map(|u| (u.user_id.clone(), u.label.as_str(), ex.user_features(u)))
                .collect();
            write_feature_csv(&ex.column_names(), &rows, &mut buf)?;
        }
        FeatureTrack::Latent => {
            let path = a.model.as_ref().ok_or(Error::NotFitted)?;
            let model = Doc2VecModel::load(path)?;
            let chunking = ChunkingConfig {
                segment_len: a.segment_len,
                lowercase: true,
            };
            let mut matrices = Vec::new();
            for u in &corpus.users {
                let (docs, kind) = match a.doc_kind {
                    DocKindArg::Segment => (chunk_user(u, &chunking, &resources.preprocessor)?, DocKind::Segment),
                    DocKindArg::Post => (
                        u.posts.iter().map(|p| resources.preprocessor.doc_tokens(&p.text, true)).collect(),
                        DocKind::Post,
                    ),
                };
                matrices.push(model.embed_user(&u.user_id, &docs, kind, model.config.seed)?);
            }
            write_embeddings(&matrices, &mut buf)?;
        }
    }
    write_atomic(&a.out, &buf)
}

fn train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let cfg = experiment_config(cli)?;
    let outcome = run_experiment(&cfg)?;
    outcome.pipeline.save(&a.models)?;
    save_corpus(&outcome.test, a.models.join("test.jsonl"))?;
    for (i, m) in outcome.pipeline.models.iter().enumerate() {
        if !m.history.is_empty() {
            let mut buf = Vec::new();
            write_loss_history(&m.history, &mut buf)?;
            write_atomic(&a.models.join(format!("loss_history_{i}.csv")), &buf)?;
        }
    }
    if let Some(p) = &a.report {
        write_report(&outcome.report, p)?;
    }
    if !cli.quiet {
        print!("{}", outcome.report.to_text());
    }
    Ok(())
}

fn eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let pipeline = TrainedPipeline::load(&a.models)?;
    let path = a.corpus.clone().unwrap_or_else(|| a.models.join("test.jsonl"));
    let corpus = load_corpus(path, pipeline.config.experiment.task)?;
    let (report, _) = pipeline.evaluate(&corpus)?;
    write_report(&report, &a.report)?;
    if !cli.quiet {
        print!("{}", report.to_text());
    }
    Ok(())
}

fn predict(a: &PredictArgs) -> Result<()> {
    let mut pipeline = TrainedPipeline::load(&a.models)?;
    if let Some(name) = &a.model_name {
        pipeline.models.retain(|m| &m.name == name);
        if pipeline.models.is_empty() {
            return Err(Error::Config(format!("no saved model named `{name}`")));
        }
    } else {
        pipeline.models.truncate(1);
    }
    let corpus = load_corpus(&a.corpus, pipeline.config.experiment.task)?;
    let preds = pipeline.predict(&corpus)?;
    let mut out = String::from("user_id,label,score\n");
    for p in &preds[0].1 {
        out.push_str(&format!("{},{},{:.6}\n", p.user_id, Label::from_risk(p.label).as_str(), p.score));
    }
    write_atomic(&a.out, out.as_bytes())
}

fn build_dict(cli: &Cli, a: &BuildDictArgs) -> Result<()> {
    let resources = Resources::from_optional_dir(a.lexicon_dir.as_deref())?;
    let model = match (&a.embeddings, &a.corpus) {
        (Some(p), _) => Doc2VecModel::load(p)?,
        (None, Some(c)) => {
            let cfg = experiment_config(cli)?;
            let corpus = load_corpus(c, cfg.experiment.task)?;
            let docs: Vec<Vec<String>> = corpus
                .users
                .iter()
                .flat_map(|u| u.posts.iter().map(|p| resources.preprocessor.doc_tokens(&p.text, true)))
                .filter(|d| !d.is_empty())
                .collect();
            let mut d2v = cfg.doc2vec.post.clone();
            d2v.seed = d2v.seed.wrapping_add(cfg.experiment.seed);
            train_pvdm(&docs, &d2v)?
        }
        (None, None) => return Err(Error::Config("either --corpus or --embeddings is required".into())),
    };
    let seeds: Vec<&str> = a.seeds.iter().map(|s| s.trim()).collect();
    let lex = build_3st_dictionary(&a.name, &model, &seeds, a.k, resources.preprocessor.stopwords())?;
    write_atomic(&a.out, lex.to_text().as_bytes())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => synth(cli, a),
        Command::Features(a) => features(cli, a),
        Command::Train(a) => train(cli, a),
        Command::Eval(a) => eval(cli, a),
        Command::Predict(a) => predict(a),
        Command::BuildDict(a) => build_dict(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let text = e.render().to_string();
            eprint!("{text}");
            if !text.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
