use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use romstab::pipeline::{self, ExperimentConfig};
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "romstab", version, about = "POD-Galerkin ROM stabilization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the truth model and store snapshots.
    Simulate(RunArgs),
    /// Compute the POD basis from stored snapshots.
    Pod(RunArgs),
    /// Assemble the Galerkin ROM from the stored basis.
    Rom(RunArgs),
    /// Tune the closure with extremum seeking and write the summary.
    Tune(RunArgs),
    /// Full pipeline: simulate, pod, rom, tune.
    Run(RunArgs),
    /// Emit plot-ready CSVs from a completed run.
    Report {
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Experiment config (JSON).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named preset: burgers-small or boussinesq-structured.
    #[arg(long)]
    preset: Option<String>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the truth-model seed.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON list of runs executed in parallel (run subcommand only).
    #[arg(long, conflicts_with_all = ["config", "preset"])]
    sweep: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepEntry {
    #[serde(default)]
    preset: Option<String>,
    #[serde(default)]
    config: Option<PathBuf>,
    #[serde(default)]
    seed: Option<u64>,
    out: PathBuf,
}

fn resolve(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf)> {
    let saved = args.out.as_ref().map(|o| o.join(pipeline::CONFIG)).filter(|p| p.exists());
    let mut cfg = match (&args.config, &args.preset, saved) {
        (Some(path), _, _) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(name), _) => ExperimentConfig::preset(name)?,
        (None, None, Some(path)) => ExperimentConfig::load(&path)?,
        (None, None, None) => ExperimentConfig::burgers_small(),
    };
    if let Some(seed) = args.seed {
        cfg.truth.seed = seed;
    }
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
    cfg.validate()?;
    Ok((cfg, out))
}

fn stage(command: &Command, args: &RunArgs) -> Result<()> {
    let (cfg, out) = resolve(args)?;
    std::fs::create_dir_all(&out)?;
    match command {
        Command::Simulate(_) => {
            cfg.save(&out.join(pipeline::CONFIG))?;
            let snaps = pipeline::stage_simulate(&cfg, &out)?;
            println!("{} snapshots of dimension {} -> {}", snaps.len(), snaps.dim(), out.display());
        }
        Command::Pod(_) => {
            let snaps = pipeline::load_snapshots(&out)?;
            let basis = pipeline::stage_pod(&cfg, &out, &snaps)?;
            println!("basis {}", basis.describe());
        }
        Command::Rom(_) => {
            let snaps = pipeline::load_snapshots(&out)?;
            let basis = pipeline::load_basis(&out, &snaps)?;
            let rom = pipeline::stage_rom(&cfg, &out, &basis)?;
            println!("ROM of dimension {} -> {}", rom.dim(), out.join(pipeline::ROM_FILE).display());
        }
        Command::Tune(_) => {
            let snaps = pipeline::load_snapshots(&out)?;
            let basis = pipeline::load_basis(&out, &snaps)?;
            let rom = pipeline::load_rom(&out)?;
            let outcome = pipeline::stage_tune(&cfg, &out, &snaps, &basis, &rom)?;
            romstab::io::write_json(out.join(pipeline::SUMMARY), &outcome.summary)?;
            print_summary(&outcome.summary);
        }
        _ => unreachable!(),
    }
    Ok(())
}

fn print_summary(s: &pipeline::Summary) {
    println!(
        "{}: Q_nominal = {:e}, Q_tuned = {:e}, ratio = {:.3}, mu_opt = [{:e}, {:e}], nominal stable: {}, tuned stable: {}",
        s.name, s.q_nominal, s.q_tuned, s.improvement_ratio, s.mu_opt[0], s.mu_opt[1], s.nominal_stable, s.tuned_stable
    );
}

fn run_one(cfg: &ExperimentConfig, out: &Path) -> Result<pipeline::Summary> {
    let summary = pipeline::run_pipeline(cfg, out)?;
    pipeline::report(out)?;
    Ok(summary)
}

fn sweep(path: &Path) -> Result<()> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let entries: Vec<SweepEntry> = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let results: Vec<(PathBuf, Result<pipeline::Summary>)> = entries
        .into_par_iter()
        .map(|e| {
            let args = RunArgs {
                config: e.config,
                preset: e.preset,
                out: Some(e.out.clone()),
                seed: e.seed,
                sweep: None,
            };
            let res = resolve(&args).and_then(|(cfg, out)| run_one(&cfg, &out));
            (e.out, res)
        })
        .collect();
    let mut failed = 0;
    for (out, res) in &results {
        match res {
            Ok(s) => print_summary(s),
            Err(e) => {
                failed += 1;
                eprintln!("{}: {e:#}", out.display());
            }
        }
    }
    if failed > 0 {
        bail!("{failed} of {} sweep runs failed", results.len());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROMSTAB_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run(args) => match &args.sweep {
            Some(path) => sweep(path),
            None => resolve(args).and_then(|(cfg, out)| {
                let s = run_one(&cfg, &out)?;
                print_summary(&s);
                Ok(())
            }),
        },
        Command::Report { out } => pipeline::report(out).map_err(Into::into).map(|files| {
            for f in files {
                println!("{}", f.display());
            }
        }),
        cmd @ (Command::Simulate(a) | Command::Pod(a) | Command::Rom(a) | Command::Tune(a)) => {
            if a.sweep.is_some() {
                Err(anyhow::anyhow!("--sweep is only supported by `run`"))
            } else {
                stage(cmd, a)
            }
        }
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
