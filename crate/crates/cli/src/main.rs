use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use secmine::pipeline::{self, EvalMode, PipelineConfig, PipelineError};
use secmine::pu::PuConfig;

/// Mine security-related posts from Q&A dumps with PU learning.
///
/// Any configuration key can be overridden with `--section.key value`
/// (for example `--embedding.epochs 10`), or `--output_dir` / `--threshold`.
#[derive(Parser, Debug)]
#[command(name = "secmine", version)]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// seed for every random choice
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// more log output (repeatable)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest, normalize and label posts as positive or unlabelled
    Label {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified k-fold grid search over PU configurations
    Crossval {
        /// output directory of `label`
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and save the embedding and PU model
    Train {
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON PU configuration (defaults to the cross-validation winner)
        #[arg(long)]
        pu_config: Option<PathBuf>,
        /// treat every unlabelled post as negative (PPN baseline)
        #[arg(long)]
        baseline: bool,
    },
    /// Label new posts; tags in the input are ignored
    Predict {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predictions against PU labels or ground truth
    Evaluate {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        input: PathBuf,
        /// labels.csv from `label` (pu) or a post_id,truth file (pn)
        #[arg(long)]
        labels: PathBuf,
        #[arg(long, value_parser = ["pu", "pn"])]
        mode: String,
        /// assumed positive share of U
        #[arg(long)]
        r: Option<f64>,
        /// P(y = 1) for scaling G-mean
        #[arg(long)]
        prior: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corpus statistics of the configured inputs
    Stats {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-component PCA of inferred post vectors, as CSV
    Pca {
        #[arg(long)]
        model: Option<PathBuf>,
        /// defaults to the configured inputs
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

const TOP_LEVEL_KEYS: [&str; 2] = ["output_dir", "threshold"];

/// Pulls `--key value` / `--key=value` configuration overrides out of the
/// argument list, leaving everything else for clap.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            rest.push(a);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !(key.contains('.') || TOP_LEVEL_KEYS.contains(&key.as_str())) {
            rest.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().ok_or_else(|| format!("--{key} needs a value"))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

fn read_pu_config(path: &Path) -> Result<PuConfig, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Input(format!("{}: {e}", path.display())))
}

fn pick(given: Option<PathBuf>, cfg: &PipelineConfig, stage: &str) -> PathBuf {
    given.unwrap_or_else(|| cfg.stage_dir(stage))
}

fn run(cli: Cli, overrides: &[(String, String)]) -> Result<(), PipelineError> {
    let mut cfg = PipelineConfig::load(cli.config.as_deref(), overrides, cli.seed)?;
    match cli.command {
        Command::Label { out } => {
            let out = pick(out, &cfg, "label");
            let s = pipeline::label(&cfg, &out)?;
            let breakdown: Vec<String> = s.by_provenance.iter().map(|(k, v)| format!("{k}={v}")).collect();
            println!(
                "{} posts: {} positive, {} unlabelled ({})",
                s.posts,
                s.positives,
                s.unlabelled,
                breakdown.join(", ")
            );
            if s.positives == 0 {
                eprintln!("warning: no post matched a tag or content filter");
            }
            println!("labels written to {}", out.display());
        }
        Command::Crossval { labels, out } => {
            let labels = pick(labels, &cfg, "label");
            let out = pick(out, &cfg, "crossval");
            let report = pipeline::crossval(&cfg, &labels, &out)?;
            let failed = report.rows.iter().filter(|r| r.rank.is_none()).count();
            if let (Some(best), Some(row)) = (&report.best, report.rows.first()) {
                println!(
                    "best of {} configurations: {best} ({:?} {:.4})",
                    report.rows.len(),
                    report.selection,
                    row.score.unwrap_or(0.0)
                );
            }
            if failed > 0 {
                println!("{failed} configurations failed or were degenerate");
            }
            println!("report written to {}", out.join(pipeline::CV_REPORT_FILE).display());
        }
        Command::Train {
            labels,
            out,
            pu_config,
            baseline,
        } => {
            let labels = pick(labels, &cfg, "label");
            let out = pick(out, &cfg, "model");
            let chosen = pu_config.as_deref().map(read_pu_config).transpose()?;
            let s = pipeline::train(&cfg, &labels, &out, chosen, baseline)?;
            println!(
                "trained {}{}: {} positives, {} unlabelled, {} reliable negatives",
                s.config,
                if s.baseline { " (PPN baseline)" } else { "" },
                s.positives,
                s.unlabelled,
                s.reliable_negatives
            );
            println!("model written to {}", out.display());
        }
        Command::Predict { model, input, out } => {
            let model = pick(model, &cfg, "model");
            let out = pick(out, &cfg, "predict");
            let s = pipeline::predict(&cfg, &model, &input, &out)?;
            println!(
                "{} posts: {} security, {} non-security, {} uninferable",
                s.posts, s.security, s.non_security, s.uninferable
            );
            println!("predictions written to {}", out.join(pipeline::PREDICTIONS_FILE).display());
        }
        Command::Evaluate {
            model,
            input,
            labels,
            mode,
            r,
            prior,
            out,
        } => {
            if let Some(r) = r {
                cfg.evaluation.r = r;
            }
            if prior.is_some() {
                cfg.evaluation.prior = prior;
            }
            cfg.validate()?;
            let model = pick(model, &cfg, "model");
            let out = pick(out, &cfg, "evaluate");
            let mode: EvalMode = mode.parse()?;
            let report = pipeline::evaluate(&cfg, &model, &input, &labels, mode, &out)?;
            for (name, v) in report.values() {
                println!("{name} {v:.4}");
            }
            if !report.degenerate.is_empty() {
                println!("degenerate (0/0): {}", report.degenerate.join(", "));
            }
        }
        Command::Stats { out } => {
            let out = pick(out, &cfg, "stats");
            let s = pipeline::stats(&cfg, &out)?;
            println!("{} posts; statistics written to {}", s.total.posts, out.display());
        }
        Command::Pca { model, input, out } => {
            let model = pick(model, &cfg, "model");
            let out = pick(out, &cfg, "pca");
            let s = pipeline::pca(&cfg, &model, input.as_deref(), &out)?;
            println!(
                "{} posts projected ({} skipped), explained variance {:.3} / {:.3}",
                s.projected, s.skipped, s.explained_ratio[0], s.explained_ratio[1]
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
