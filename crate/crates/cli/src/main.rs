//! `brb` — experiment harness CLI for the deep clustering lab.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure
//! during training, 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use brb_core::config::ExperimentConfig;
use brb_core::error::Error;
use brb_core::experiment::{
    export_embeddings, load_checkpoint, load_dataset, run_experiment_into, run_suite,
};
use brb_core::log::{timing_report, ExperimentLog};

#[derive(Parser)]
#[command(name = "brb", about = "Deep clustering lab: DEC/IDEC/DCN with BRB resets", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its JSONL log.
    Run(RunArgs),
    /// Run several configs over several seeds and write a summary CSV.
    Suite(SuiteArgs),
    /// Export embeddings (+ true and predicted labels) from a checkpoint.
    Export(ExportArgs),
    /// Print the BRB timing breakdown of a run log.
    Timing(TimingArgs),
}

#[derive(Args)]
struct CommonOverrides {
    /// Experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for logs.
    #[arg(long)]
    out: Option<PathBuf>,
    /// 1 = pretraining + clustering, 2 = from scratch.
    #[arg(long)]
    scenario: Option<u8>,
    /// dec | idec | dcn.
    #[arg(long)]
    algorithm: Option<String>,
    /// brb | reset_only | recluster_only | disentangled | noise | off.
    #[arg(long)]
    variant: Option<String>,
    /// Reset interpolation factor in (0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Reset interval T in epochs.
    #[arg(long)]
    interval: Option<usize>,
    /// Additional config overrides as key=value (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl CommonOverrides {
    fn pairs(&self) -> Result<Vec<(String, String)>, Error> {
        let mut out = Vec::new();
        if let Some(v) = self.seed {
            out.push(("seed".into(), v.to_string()));
        }
        if let Some(v) = self.scenario {
            out.push(("scenario".into(), v.to_string()));
        }
        if let Some(v) = &self.algorithm {
            out.push(("algorithm".into(), v.clone()));
        }
        if let Some(v) = &self.variant {
            out.push(("variant".into(), v.clone()));
        }
        if let Some(v) = self.alpha {
            out.push(("alpha".into(), v.to_string()));
        }
        if let Some(v) = self.interval {
            out.push(("interval".into(), v.to_string()));
        }
        if let Some(v) = &self.out {
            out.push(("out".into(), v.display().to_string()));
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got '{kv}'")))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        Ok(out)
    }
}

#[derive(Args)]
struct RunArgs {
    /// Flat key=value config file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: CommonOverrides,
}

#[derive(Args)]
struct SuiteArgs {
    /// Config files; the same overrides apply to each.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    /// Comma-separated seeds, e.g. 0,1,2.
    #[arg(long, default_value = "0")]
    seeds: String,
    /// Index (into --config order) of the baseline for delta columns.
    #[arg(long, default_value_t = 0)]
    baseline: usize,
    #[command(flatten)]
    overrides: CommonOverrides,
}

#[derive(Args)]
struct ExportArgs {
    /// Checkpoint written via the save_params config key.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Config describing the dataset to embed.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TimingArgs {
    /// JSONL run log.
    #[arg(long)]
    log: PathBuf,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 4,
        Error::Numerical(_) => 3,
        _ => 2,
    }
}

fn build_config(path: Option<&PathBuf>, overrides: &CommonOverrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = match path {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if cfg.name == "experiment" {
        if let Some(p) = path {
            if let Some(stem) = p.file_stem() {
                cfg.name = stem.to_string_lossy().into_owned();
            }
        }
    }
    cfg.apply_overrides(&overrides.pairs()?)?;
    cfg.validate()?;
    Ok(cfg)
}

fn log_path(cfg: &ExperimentConfig) -> PathBuf {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    dir.join(format!("{}_seed{}.jsonl", cfg.name, cfg.seed))
}

fn cmd_run(args: &RunArgs) -> Result<(), Error> {
    let cfg = build_config(args.config.as_ref(), &args.overrides)?;
    let path = log_path(&cfg);
    let mut log = ExperimentLog::default();
    let result = run_experiment_into(&cfg, &mut log);
    match result {
        Ok(artifacts) => {
            artifacts.log.write_jsonl(&path)?;
            let s = artifacts.log.summary().cloned().unwrap_or_default();
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
            println!(
                "[run] {} seed={} {}: last ACC {} NMI {} ARI {} | best ACC {} | {} epochs, {} BRB events, {:.1}s",
                cfg.name,
                cfg.seed,
                cfg.algorithm.name(),
                fmt(s.last_acc),
                fmt(s.last_nmi),
                fmt(s.last_ari),
                fmt(s.best_acc),
                s.epochs,
                s.brb_events,
                s.total_s,
            );
            println!("log: {}", path.display());
            Ok(())
        }
        Err(e) => {
            // flush whatever was logged before the failure
            let _ = log.write_jsonl(&path);
            eprintln!("run aborted, partial log at {}", path.display());
            Err(e)
        }
    }
}

fn cmd_suite(args: &SuiteArgs) -> Result<(), Error> {
    let mut configs = Vec::new();
    for path in &args.config {
        configs.push(build_config(Some(path), &args.overrides)?);
    }
    let seeds: Vec<u64> = args
        .seeds
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad seed '{}'", s.trim())))
        })
        .collect::<Result<_, _>>()?;
    let out_dir = configs
        .first()
        .and_then(|c| c.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    let result = run_suite(&configs, &seeds, args.baseline)?;
    std::fs::create_dir_all(&out_dir)?;
    for (name, seed, log) in &result.logs {
        log.write_jsonl(&out_dir.join(format!("{name}_seed{seed}.jsonl")))?;
    }
    let csv_path = out_dir.join("summary.csv");
    std::fs::write(&csv_path, result.summary.to_csv())?;
    for row in &result.summary.rows {
        let fmt = |m: Option<f64>, s: Option<f64>| match (m, s) {
            (Some(m), Some(s)) => format!("{m:.2}+/-{s:.2}"),
            _ => "-".to_string(),
        };
        let delta = row
            .delta_acc_vs_baseline
            .map_or(String::from("baseline"), |d| format!("{d:+.2} vs baseline"));
        println!(
            "[suite] {:24} runs={} ACC {} NMI {} ARI {} ({})",
            row.name,
            row.runs,
            fmt(row.last_acc_mean, row.last_acc_std),
            fmt(row.last_nmi_mean, row.last_nmi_std),
            fmt(row.last_ari_mean, row.last_ari_std),
            delta,
        );
    }
    println!("summary: {}", csv_path.display());
    Ok(())
}

fn cmd_export(args: &ExportArgs) -> Result<(), Error> {
    let cfg = ExperimentConfig::from_file(&args.config)?;
    let dataset = load_dataset(&cfg)?;
    let ckpt = load_checkpoint(&args.checkpoint)?;
    export_embeddings(&ckpt.params, &dataset, &ckpt.cluster, &args.out)?;
    println!("exported {} rows to {}", dataset.n(), args.out.display());
    Ok(())
}

fn cmd_timing(args: &TimingArgs) -> Result<(), Error> {
    let log = ExperimentLog::read_jsonl(&args.log)?;
    let report = timing_report(&log)?;
    println!("BRB events: {}", report.events.len());
    println!("interval T: {}", report.interval);
    for e in &report.events {
        println!(
            "  epoch {:>4}: reset {:.4}s embed {:.4}s cluster {:.4}s momentum {:.4}s (subsample {})",
            e.epoch, e.reset_s, e.embed_s, e.cluster_s, e.momentum_reset_s, e.subsample_used
        );
    }
    println!("mean BRB event: {:.4}s", report.mean_event_s);
    println!("mean clustering epoch (BRB removed): {:.4}s", report.mean_epoch_s);
    println!("amortized ratio: {:.4}", report.amortized_ratio);
    println!("BRB share of clustering runtime: {:.3}%", report.brb_share_percent);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Suite(args) => cmd_suite(args),
        Command::Export(args) => cmd_export(args),
        Command::Timing(args) => cmd_timing(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
