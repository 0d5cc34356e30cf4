use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::Parser;
use rtlab_core::harness::{self, ExperimentSpec, HarnessError, RunOptions, Verdict};
use serde::Deserialize;
use serde_json::Value;

/// Numerical experiments on dyadic grids, variation norms, multipliers and return-times averages.
#[derive(Debug, Parser)]
#[command(name = "rtlab", version)]
struct Cli {
    /// Experiment name, or `list` / `validate`.
    target: String,
    /// JSON config: `{"experiment": ..., "seed": ..., "params": {...}}`.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json, cells.csv and plotdata/.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Kernel override, for experiments that take one.
    #[arg(long)]
    kernel: Option<String>,
    /// Worker threads; RTLAB_THREADS takes precedence.
    #[arg(long)]
    threads: Option<usize>,
    /// Print machine-readable JSON instead of text.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<String>,
    seed: Option<u64>,
    #[serde(default)]
    params: Option<Value>,
}

/// Failure classes with distinct exit codes.
enum Outcome {
    Usage(anyhow::Error),
    Run(anyhow::Error),
}

impl From<HarnessError> for Outcome {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Unknown(_) | HarnessError::Config { .. } => Outcome::Usage(e.into()),
            _ => Outcome::Run(e.into()),
        }
    }
}

fn read_config(path: &Path) -> anyhow::Result<ConfigFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn spec_for(name: Option<&str>, cli: &Cli) -> anyhow::Result<ExperimentSpec> {
    let file = match &cli.config {
        Some(p) => read_config(p)?,
        None => ConfigFile {
            experiment: None,
            seed: None,
            params: None,
        },
    };
    let experiment = match (name, file.experiment) {
        (Some(n), Some(f)) if n != f => bail!("config is for `{f}` but `{n}` was requested"),
        (Some(n), _) => n.to_string(),
        (None, Some(f)) => f,
        (None, None) => bail!("config must name an experiment"),
    };
    let params = file.params.unwrap_or_else(|| Value::Object(Default::default()));
    Ok(ExperimentSpec::new(&experiment, cli.seed.or(file.seed).unwrap_or(0), params))
}

fn threads(cli: &Cli) -> anyhow::Result<Option<usize>> {
    let n = match std::env::var("RTLAB_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().with_context(|| format!("RTLAB_THREADS={v}"))?),
        Err(_) => cli.threads,
    };
    if n == Some(0) {
        bail!("thread count must be positive");
    }
    Ok(n)
}

fn list(cli: &Cli) -> anyhow::Result<()> {
    let infos = harness::list();
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&infos)?);
        return Ok(());
    }
    for i in infos {
        let kernel = if i.takes_kernel { " [--kernel]" } else { "" };
        println!("{:<20} {}{kernel}", i.name, i.summary);
    }
    Ok(())
}

fn validate(cli: &Cli) -> Result<(), Outcome> {
    if cli.config.is_none() {
        return Err(Outcome::Usage(anyhow::anyhow!("validate needs --config")));
    }
    let spec = spec_for(None, cli).map_err(Outcome::Usage)?;
    let filled = harness::validate(&spec)?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&filled).map_err(|e| Outcome::Run(e.into()))?);
    } else {
        println!("ok: {} {}", spec.experiment, filled);
    }
    Ok(())
}

fn run(name: &str, cli: &Cli) -> Result<Verdict, Outcome> {
    let spec = spec_for(Some(name), cli).map_err(Outcome::Usage)?;
    let out = cli
        .out
        .as_ref()
        .ok_or_else(|| Outcome::Usage(anyhow::anyhow!("running an experiment needs --out <dir>")))?;
    let opts = RunOptions {
        threads: threads(cli).map_err(Outcome::Usage)?,
        kernel: cli.kernel.clone(),
    };
    let report = harness::run(&spec, &opts)?;
    report.write(out)?;
    if cli.json {
        println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Outcome::Run(e.into()))?);
    } else {
        for c in &report.checks {
            let tag = match c.verdict {
                Verdict::Pass => "PASS",
                Verdict::Fail => "FAIL",
                Verdict::Informative => "INFO",
            };
            let threshold = c.threshold.map(|t| format!(" (threshold {t})")).unwrap_or_default();
            println!("{tag} {}: {}{threshold}  {}", c.name, c.measured, c.detail);
        }
        for f in &report.fits {
            println!("fit {}: exponent {} ± {} over {}", f.group, f.exponent, f.stderr, f.variable);
        }
        println!(
            "{}: {:?} in {:.2}s, written to {}",
            report.spec.experiment,
            report.verdict,
            report.wall_clock_s,
            out.display()
        );
    }
    Ok(report.verdict)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.target.as_str() {
        "list" => list(&cli).map(|_| Verdict::Pass).map_err(Outcome::Run),
        "validate" => validate(&cli).map(|_| Verdict::Pass),
        name => run(name, &cli),
    };
    match result {
        Ok(Verdict::Fail) => ExitCode::from(1),
        Ok(_) => ExitCode::SUCCESS,
        Err(Outcome::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Outcome::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}
