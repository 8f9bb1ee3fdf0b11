//! `music-auditor`: synthesize or ingest embedding data, train membership
//! auditors, run the evaluation protocols and audit individual pairs.
//!
//! Every experiment-config key can be set with a flag of the same name,
//! for example `--seed 3`, `--lr 0.01` or `--train.patience=20`.

mod overrides;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use music_auditor::auditor::Checkpoint;
use music_auditor::config::ExperimentConfig;
use music_auditor::embeddings::Aggregation;
use music_auditor::evaluation::{EvalReport, Protocol};
use music_auditor::pipeline::{self, IngestOutcome, CHECKPOINT_FILE, TRAINING_LOG_FILE};
use music_auditor::{Error, ErrorKind};

#[derive(Parser)]
#[command(name = "music-auditor", version, about = "Black-box training-data auditing for music generators")]
#[command(after_help = "Any experiment-config key is also a flag: --seed, --jobs, --lr, --protocol, --output, ...\nRun `music-auditor keys` for the full list.")]
struct Cli {
    /// Experiment config (TOML); defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a simulated three-generator suite, one store per generator.
    Synth,
    /// Aggregate per-item encoder outputs (or WAV files) into a store.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        /// Directory with `<item_id>.maud` or `<item_id>.wav` per item.
        #[arg(long)]
        tensors: PathBuf,
        /// Store directory to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train one auditor and write its checkpoint and training log.
    Train,
    /// Run the configured protocol and write CSV, Markdown and JSON reports.
    Evaluate,
    /// Score one (original, generation) pair with a trained checkpoint.
    Audit {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Original track: WAV or MAUD.
        original: PathBuf,
        /// Generation from the track's caption: WAV or MAUD.
        generation: PathBuf,
    },
    /// Render a saved report.
    Report {
        /// A report `.json` written by `evaluate`.
        report: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
        format: ReportFormat,
    },
    /// List every config key.
    Keys,
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Markdown,
    Csv,
    Grid,
    Curve,
}

/// A failure and the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(e.kind()),
            message: e.to_string(),
        }
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Io => 3,
        ErrorKind::Numeric => 4,
    }
}

fn usage(message: String) -> Failure {
    Failure { code: 2, message }
}

fn load_config(path: Option<&PathBuf>, overrides: &[(String, String)]) -> Result<ExperimentConfig, Failure> {
    let mut config = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    for (key, value) in overrides {
        config.set(key, value)?;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli, overrides: &[(String, String)]) -> Result<(), Failure> {
    let config = load_config(cli.config.as_ref(), overrides)?;
    match cli.command {
        Command::Synth => {
            let written = pipeline::synthesize(&config)?;
            for (gid, pairs) in written {
                println!(
                    "{gid}: {pairs} pairs ({} member, {} non-member) -> {}",
                    config.synth.pairs,
                    config.synth.pairs,
                    config.paths.output.join(&gid).display()
                );
            }
            println!("seed {} config {}", config.experiment.seed, config.config_hash());
        }
        Command::Ingest {
            manifest,
            tensors,
            out,
        } => {
            let aggregation: Aggregation = config.experiment.aggregation;
            match pipeline::ingest(&manifest, &tensors, aggregation, &config.experiment.encoder_id, &out)? {
                IngestOutcome::Written(r) => {
                    println!("items: {}", r.items);
                    for (role, n) in &r.role_counts {
                        println!("  {role}: {n}");
                    }
                    println!("form: {}", r.form);
                    println!("generators: {}", r.generator_ids.join(", "));
                    println!("aggregation: {}", aggregation.as_str());
                    println!("digest: {}", r.digest);
                }
                IngestOutcome::Failed(failures) => {
                    let mut message = format!("{} item(s) could not be ingested:", failures.len());
                    for f in &failures {
                        message.push_str(&format!("\n  {}: {}", f.item_id, f.error));
                    }
                    return Err(Failure {
                        code: exit_code(failures[0].error.kind()),
                        message,
                    });
                }
            }
        }
        Command::Train => {
            let (ck, log) = pipeline::train_auditor(&config)?;
            let best = log.best().expect("training logs at least one epoch");
            println!(
                "{} auditor on {} ({}), trained on {}",
                ck.header.architecture,
                ck.header.input,
                ck.header.encoder_id,
                ck.header.training_generators.join(", ")
            );
            println!(
                "best epoch {} of {}: val loss {:.6}, val acc {:.4}{}",
                log.best_epoch,
                log.epochs.len(),
                best.val_loss,
                best.val_acc,
                if log.stopped_early { " (stopped early)" } else { "" }
            );
            println!("wrote {}", config.paths.output.join(CHECKPOINT_FILE).display());
            println!("wrote {}", config.paths.output.join(TRAINING_LOG_FILE).display());
        }
        Command::Evaluate => {
            let (report, files) = pipeline::evaluate(&config)?;
            print!("{}", report.to_markdown());
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Audit {
            checkpoint,
            original,
            generation,
        } => {
            let ck = Checkpoint::load(&checkpoint)?;
            let threshold = config.experiment.threshold;
            let verdict = pipeline::audit(&ck, &original, &generation, threshold)?;
            let h = &ck.header;
            println!("checkpoint: {}", checkpoint.display());
            println!("  architecture: {}", h.architecture);
            println!("  input: {}", h.input);
            println!("  encoder: {} ({})", h.encoder_id, h.aggregation);
            println!("  trained on: {}", h.training_generators.join(", "));
            println!("  seed: {}", h.seed);
            println!("  config hash: {}", h.config_hash.as_deref().unwrap_or("none"));
            println!("score: {:.6}", verdict.score);
            println!(
                "verdict: {} (threshold {threshold})",
                if verdict.member { "member" } else { "non-member" }
            );
        }
        Command::Report { report, format } => {
            let r = EvalReport::load(&report)?;
            let text = match format {
                ReportFormat::Markdown => r.to_markdown(),
                ReportFormat::Csv => r.cells_csv()?,
                ReportFormat::Curve => r.ablation_csv()?,
                ReportFormat::Grid => {
                    if r.protocol != Protocol::Transfer {
                        return Err(usage(format!(
                            "a grid needs a transfer report, this one is {}",
                            r.protocol.as_str()
                        )));
                    }
                    r.transfer_grid_csv()?
                }
            };
            print!("{text}");
        }
        Command::Keys => {
            for key in ExperimentConfig::keys() {
                println!("{key}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (args, overrides) = match overrides::extract(std::env::args().collect()) {
        Ok(split) => split,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(2);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
