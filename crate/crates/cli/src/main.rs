//! `mteval`: ingest corpora, train and apply embedding-based metrics, and
//! correlate their scores with human judgements.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use mteval_core::model::CHECKPOINT_FORMAT_VERSION;
use mteval_core::pipeline::{cmd_all, cmd_evaluate, cmd_ingest, cmd_score, cmd_train, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "mteval", about = "Train, score and meta-evaluate translation metrics")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set model.epochs=10`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    /// Seed for all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Directory for outputs.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Prefix of every output file name.
    #[arg(long, global = true)]
    run_name: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a raw corpus, optionally labelling HTER or building DARR tuples.
    Ingest(IngestArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Score a corpus with a checkpoint.
    Score(ScoreArgs),
    /// Correlate metric scores with human judgements.
    Evaluate(EvaluateArgs),
    /// Every stage that has a configuration section, in order.
    Run,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Raw corpus to normalize.
    #[arg(long)]
    input: Option<PathBuf>,
    /// da, darr, hter or score.
    #[arg(long)]
    format: Option<String>,
    /// DA, DA_Z, HTER or MQM.
    #[arg(long)]
    score_kind: Option<String>,
    /// Compute HTER targets from the mt and pe columns.
    #[arg(long)]
    hter: bool,
    /// Convert DA judgements into relative-ranking tuples.
    #[arg(long)]
    darr: bool,
    /// Minimum DA difference for a relative-ranking pair.
    #[arg(long)]
    threshold: Option<f64>,
    /// Lowercase tokens before computing HTER.
    #[arg(long)]
    lowercase: bool,
    /// Where to write the normalized corpus.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Training corpus.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// estimator, qe-estimator or ranker.
    #[arg(long)]
    mode: Option<String>,
    /// da, darr or hter.
    #[arg(long)]
    format: Option<String>,
    /// Where to write the checkpoint.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Corpus to score.
    #[arg(long)]
    input: Option<PathBuf>,
    /// single-ref, multi-ref or qe.
    #[arg(long)]
    mode: Option<String>,
    /// Also score `[r;h;s]` in single-reference mode.
    #[arg(long)]
    two_permutations: bool,
    /// Group segments by document and write document scores.
    #[arg(long)]
    doc: bool,
    /// hyp-tokens, ref-tokens, chars or uniform.
    #[arg(long)]
    weight_rule: Option<String>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// DA_TSV file with human scores.
    #[arg(long)]
    human: Option<PathBuf>,
    /// A metric's score file, as `name=path`.
    #[arg(long = "metric", value_name = "NAME=PATH")]
    metrics: Vec<String>,
    /// Metrics whose lower values mean better translations.
    #[arg(long, value_name = "NAME")]
    lower_is_better: Vec<String>,
    /// Add the pairwise table over the n best systems.
    #[arg(long)]
    top_n: Option<usize>,
    /// Add the document-level section.
    #[arg(long)]
    doc: bool,
    /// micro or macro.
    #[arg(long)]
    doc_average: Option<String>,
    /// Minimum DA difference for a segment-level pair.
    #[arg(long)]
    threshold: Option<f64>,
    /// Weight the average column by item counts.
    #[arg(long)]
    weighted: bool,
}

/// Collects `key=value` overrides; values are TOML literals.
#[derive(Default)]
struct Overrides(Vec<(String, String)>);

impl Overrides {
    fn raw(&mut self, key: &str, value: String) {
        self.0.push((key.to_string(), value));
    }

    fn string(&mut self, key: &str, value: Option<impl AsRef<str>>) {
        if let Some(v) = value {
            self.raw(key, toml::Value::String(v.as_ref().to_string()).to_string());
        }
    }

    fn path(&mut self, key: &str, value: Option<&PathBuf>) {
        self.string(key, value.map(|p| p.to_string_lossy().into_owned()));
    }

    fn enum_name(&mut self, key: &str, value: Option<&String>) {
        self.string(key, value.map(|v| v.to_ascii_uppercase().replace('-', "_")));
    }

    fn number(&mut self, key: &str, value: Option<impl ToString>) {
        if let Some(v) = value {
            self.raw(key, v.to_string());
        }
    }

    fn flag(&mut self, key: &str, on: bool) {
        if on {
            self.raw(key, "true".to_string());
        }
    }
}

fn format_name(f: &String) -> String {
    let lower = f.to_ascii_lowercase();
    let base = lower.trim_end_matches("_tsv").trim_end_matches("-tsv");
    format!("{}_TSV", base.to_ascii_uppercase())
}

fn overrides(cli: &Cli) -> Result<Vec<(String, String)>> {
    let mut o = Overrides::default();
    for s in &cli.sets {
        let (k, v) = s
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{s}`"))?;
        o.raw(k.trim(), v.trim().to_string());
    }
    o.number("seed", cli.seed);
    o.number("jobs", cli.jobs);
    o.path("output_dir", cli.output_dir.as_ref());
    o.string("run_name", cli.run_name.as_ref());
    match &cli.command {
        Command::Ingest(a) => {
            o.path("ingest.input", a.input.as_ref());
            o.string("ingest.format", a.format.as_ref().map(format_name));
            o.enum_name("ingest.score_kind", a.score_kind.as_ref());
            o.flag("ingest.hter", a.hter);
            o.flag("ingest.darr", a.darr);
            o.number("ingest.threshold", a.threshold.map(float));
            o.flag("ingest.lowercase", a.lowercase);
            o.path("ingest.output", a.output.as_ref());
        }
        Command::Train(a) => {
            o.path("train.corpus", a.corpus.as_ref());
            o.enum_name("model.mode", a.mode.as_ref());
            o.string("train.format", a.format.as_ref().map(format_name));
            o.path("train.checkpoint", a.checkpoint.as_ref());
        }
        Command::Score(a) => {
            o.path("score.checkpoint", a.checkpoint.as_ref());
            o.path("score.input", a.input.as_ref());
            o.enum_name("score.mode", a.mode.as_ref());
            o.flag("score.two_permutations", a.two_permutations);
            o.flag("score.doc", a.doc);
            o.string("score.weight_rule", a.weight_rule.as_ref());
        }
        Command::Evaluate(a) => {
            o.path("evaluate.human", a.human.as_ref());
            for m in &a.metrics {
                let (name, path) = m
                    .split_once('=')
                    .with_context(|| format!("--metric expects NAME=PATH, got `{m}`"))?;
                if name.contains('.') || name.is_empty() {
                    bail!("metric name `{name}` must be non-empty and contain no dots");
                }
                o.string(&format!("evaluate.metrics.{name}"), Some(path));
            }
            if !a.lower_is_better.is_empty() {
                let list = toml::Value::Array(a.lower_is_better.iter().cloned().map(toml::Value::String).collect());
                o.raw("evaluate.lower_is_better", list.to_string());
            }
            o.number("evaluate.top_n", a.top_n);
            o.flag("evaluate.doc", a.doc);
            o.string("evaluate.doc_average", a.doc_average.as_ref().map(|s| s.to_ascii_lowercase()));
            o.number("evaluate.threshold", a.threshold.map(float));
            o.flag("evaluate.weighted", a.weighted);
        }
        Command::Run => {}
    }
    Ok(o.0)
}

/// Renders a float as a TOML float literal.
fn float(v: f64) -> String {
    toml::Value::Float(v).to_string()
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = RunConfig::load(cli.config.as_deref(), &overrides(cli)?)?;
    match &cli.command {
        Command::Ingest(_) => {
            let s = cmd_ingest(&cfg)?;
            println!(
                "ingest: wrote {} item(s) to {}; {} reject(s) in {}",
                s.written,
                s.output.display(),
                s.rejected,
                s.rejects_path.display()
            );
        }
        Command::Train(_) => {
            let s = cmd_train(&cfg)?;
            println!(
                "train: {} epoch(s), final loss {:.6}, fingerprint {}, checkpoint {}",
                s.epochs,
                s.final_loss,
                s.fingerprint,
                s.checkpoint.display()
            );
        }
        Command::Score(_) => {
            let s = cmd_score(&cfg)?;
            println!("score: {} segment(s) to {}", s.segments, s.scores_tsv.display());
            if let Some(d) = &s.docs_tsv {
                println!("score: {} document(s) to {}", s.documents, d.display());
            }
        }
        Command::Evaluate(_) => {
            let s = cmd_evaluate(&cfg)?;
            print!("{}", std::fs::read_to_string(&s.report_txt).context("reading the rendered report")?);
            println!("evaluate: {} section(s) to {}", s.sections, s.report_tsv.display());
        }
        Command::Run => cmd_all(&cfg)?,
    }
    Ok(())
}

/// The error and its causes, skipping causes already quoted by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.contains(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn exit_code(err: &anyhow::Error) -> u8 {
    err.downcast_ref::<mteval_core::Error>()
        .map_or(2, |e| e.exit_code() as u8)
}

fn main() -> ExitCode {
    let version = format!("{} (checkpoint format {CHECKPOINT_FORMAT_VERSION})", env!("CARGO_PKG_VERSION"));
    let matches = Cli::command().version(version).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
