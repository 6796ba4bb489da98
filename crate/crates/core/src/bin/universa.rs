use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use universa::harness::{self, RunConfig};
use universa::{Error, MetricRegistry, Result};

#[derive(Parser)]
#[command(name = "universa", version, about = "Multi-metric speech quality prediction")]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic corpus.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Split a manifest into train/dev/test.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compute oracle labels (SI-SNR, STOI, F0-CORR) for records with reference audio.
    Annotate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a BPE vocabulary from manifest text.
    TrainBpe {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        vocab_size: Option<usize>,
    },
    /// Train a model.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        bpe: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        no_ref_audio: bool,
        #[arg(long)]
        no_ref_text: bool,
        /// Comma-separated metric ids; restricts the prediction heads.
        #[arg(long)]
        metrics: Option<String>,
    },
    /// Predict every configured metric for each record.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Correlate predictions with ground truth.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Where to write the tab-separated rows.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_json(value: &serde_json::Value) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{value}");
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.train.seed = seed;
    }
    let seed = cfg.train.seed;
    match cli.command {
        Command::Synth { out_dir, count } => {
            let m = harness::cmd_synth(&out_dir, count.unwrap_or(cfg.synth_count), seed)?;
            print_json(&serde_json::json!({"event": "synth", "records": m.len(), "out_dir": out_dir}));
        }
        Command::Split { manifest, out_dir } => {
            let [tr, dv, te] = harness::cmd_split(&manifest, &out_dir, cfg.split_ratios, seed)?;
            print_json(&serde_json::json!({"event": "split", "train": tr, "dev": dv, "test": te}));
        }
        Command::Annotate { manifest, out } => {
            let m = harness::cmd_annotate(&manifest, &out)?;
            print_json(&serde_json::json!({"event": "annotate", "records": m.len(), "out": out}));
        }
        Command::TrainBpe { manifest, out, vocab_size } => {
            let bpe = harness::cmd_train_bpe(&manifest, &out, vocab_size.unwrap_or(cfg.bpe_vocab_size))?;
            print_json(&serde_json::json!({"event": "train_bpe", "vocab_size": bpe.vocab_size(), "merges": bpe.merges().len()}));
        }
        Command::Train {
            train,
            dev,
            bpe,
            out_dir,
            no_ref_audio,
            no_ref_text,
            metrics,
        } => {
            if no_ref_audio {
                cfg.model.use_ref_audio = false;
            }
            if no_ref_text {
                cfg.model.use_ref_text = false;
            }
            if let Some(list) = metrics {
                cfg.model.metrics = MetricRegistry::parse_list(&list)?;
            }
            let outcome = harness::cmd_train(&cfg, &train, dev.as_deref(), bpe.as_deref(), &out_dir, &mut |ev| {
                print_json(&serde_json::to_value(ev).expect("log events serialize"));
            })?;
            print_json(&serde_json::json!({"event": "done", "steps": outcome.steps, "out_dir": out_dir}));
        }
        Command::Predict { checkpoint, manifest, out } => {
            let m = harness::cmd_predict(&checkpoint, &manifest, &out)?;
            print_json(&serde_json::json!({"event": "predict", "records": m.len(), "out": out}));
        }
        Command::Evaluate { predictions, truth, out } => {
            let report = harness::cmd_evaluate(&predictions, &truth, out.as_deref())?;
            print!("{}", report.to_table());
        }
    }
    Ok(())
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().as_str(),
                "target": record.target(),
                "msg": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .init();
}

fn report(err: &Error) -> ExitCode {
    let line = serde_json::json!({"event": "error", "kind": if err.is_validation() { "validation" } else { "runtime" }, "msg": err.to_string()});
    eprintln!("{line}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
