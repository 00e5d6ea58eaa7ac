use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

mod artifacts;
mod commands;
mod config;
mod pipeline;

use commands::{Ctx, Source};
use config::{parse_assignment, parse_value, RunConfig};

/// Number of worker threads; defaults to all cores.
const WORKERS_ENV: &str = "OSR_WORKERS";

#[derive(Parser)]
#[command(name = "vote-osr", version, about = "Open-set recognition of traffic scenarios with random-forest votes and Weibull tails")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Config file of `section.key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (`seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Sets any config key, e.g. `--set forest.trees=100`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario file.
    Generate {
        /// Comma-separated class names (`synth.classes`).
        #[arg(long)]
        classes: Option<String>,
        #[arg(long)]
        count_per_class: Option<usize>,
        /// Roundabout outlier scenarios to add (`synth.outliers`).
        #[arg(long)]
        outliers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Turn scenarios into a feature file.
    ExtractFeatures {
        #[arg(long)]
        scenarios: PathBuf,
        /// flatten, random-projection or pca (`extractor.kind`).
        #[arg(long)]
        extractor: Option<String>,
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        components: Option<usize>,
        /// Write OUT.train.osrf, OUT.calib.osrf and OUT.test.osrf from a stratified split.
        #[arg(long)]
        split: bool,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a random forest on labeled features.
    TrainForest {
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        trees: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit per-class Weibull models on calibration votes.
    Calibrate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Classify features as a known class or unknown; writes CSV.
    Predict {
        #[arg(long)]
        forest: PathBuf,
        #[arg(long)]
        evt: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// Overrides the rejection threshold stored in the EVT model.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run an evaluation protocol; writes a JSON report.
    Evaluate {
        /// class-selection or outlier-addition (`protocol.kind`).
        #[arg(long)]
        protocol: Option<String>,
        #[arg(long, conflicts_with = "features")]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        /// Class-probability CSV for the softmax baseline.
        #[arg(long)]
        softmax: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sweep one hyper-parameter; writes a CSV table.
    Ablate {
        /// ratio, delta or trees (`ablation.kind`).
        #[arg(long)]
        kind: Option<String>,
        /// Comma-separated settings (`ablation.grid`).
        #[arg(long)]
        grid: Option<String>,
        #[arg(long, conflicts_with = "features")]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run every stage into one directory, skipping up-to-date stages.
    Run {
        /// Output directory (`paths.out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn push<T: ToString>(overrides: &mut Vec<(String, toml::Value)>, key: &str, value: Option<T>) {
    if let Some(v) = value {
        overrides.push((key.to_string(), parse_value(&v.to_string())));
    }
}

fn push_str(overrides: &mut Vec<(String, toml::Value)>, key: &str, value: Option<&str>) {
    if let Some(v) = value {
        overrides.push((key.to_string(), toml::Value::String(v.to_string())));
    }
}

fn load(common: &Common, mut flags: Vec<(String, toml::Value)>) -> Result<RunConfig> {
    let mut overrides = common
        .set
        .iter()
        .map(|s| parse_assignment(s))
        .collect::<Result<Vec<_>>>()?;
    push(&mut overrides, "seed", common.seed);
    overrides.append(&mut flags);
    let config = RunConfig::load(common.config.as_deref(), &overrides)?;
    config.validate()?;
    Ok(config)
}

fn source<'a>(scenarios: &'a Option<PathBuf>, features: &'a Option<PathBuf>) -> Result<Source<'a>> {
    match (scenarios, features) {
        (Some(s), None) => Ok(Source::Scenarios(s)),
        (None, Some(f)) => Ok(Source::Features(f)),
        _ => anyhow::bail!("pass exactly one of --scenarios or --features"),
    }
}

fn configure_workers() -> Result<()> {
    if let Ok(value) = std::env::var(WORKERS_ENV) {
        let n: usize = value
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("{WORKERS_ENV} must be a positive integer, got {value:?}"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    configure_workers()?;
    let mut o = Vec::new();
    match cli.command {
        Command::Generate { classes, count_per_class, outliers, out, common } => {
            if let Some(list) = classes {
                let names = list.split(',').map(|s| toml::Value::String(s.trim().to_string())).collect();
                o.push(("synth.classes".to_string(), toml::Value::Array(names)));
            }
            push(&mut o, "synth.count_per_class", count_per_class);
            push(&mut o, "synth.outliers", outliers);
            let config = load(&common, o)?;
            commands::generate(&Ctx::new(&config), &out)
        }
        Command::ExtractFeatures { scenarios, extractor, dim, components, split, out, common } => {
            push_str(&mut o, "extractor.kind", extractor.as_deref());
            push(&mut o, "extractor.dim", dim);
            push(&mut o, "extractor.components", components);
            let config = load(&common, o)?;
            commands::extract_features(&Ctx::new(&config), &scenarios, &out, split).map(drop)
        }
        Command::TrainForest { features, trees, out, common } => {
            push(&mut o, "forest.trees", trees);
            let config = load(&common, o)?;
            commands::train(&Ctx::new(&config), &features, &out)
        }
        Command::Calibrate { model, features, lambda, delta, out, common } => {
            push(&mut o, "evt.lambda", lambda.map(float));
            push(&mut o, "evt.delta", delta.map(float));
            let config = load(&common, o)?;
            commands::calibrate(&Ctx::new(&config), &model, &features, &out)
        }
        Command::Predict { forest, evt, features, delta, out, common } => {
            if let Some(d) = delta {
                vote_osr::evt::validate_delta(d)?;
            }
            let config = load(&common, o)?;
            commands::predict(&Ctx::new(&config), &forest, &evt, &features, delta, &out)
        }
        Command::Evaluate { protocol, scenarios, features, softmax, out, common } => {
            push_str(&mut o, "protocol.kind", protocol.as_deref());
            let config = load(&common, o)?;
            let source = source(&scenarios, &features)?;
            commands::evaluate(&Ctx::new(&config), &source, softmax.as_deref(), &out)
        }
        Command::Ablate { kind, grid, scenarios, features, out, common } => {
            push_str(&mut o, "ablation.kind", kind.as_deref());
            push_str(&mut o, "ablation.grid", grid.as_deref());
            let config = load(&common, o)?;
            let source = source(&scenarios, &features)?;
            commands::ablate(&Ctx::new(&config), &source, &out)
        }
        Command::Run { out, common } => {
            if let Some(dir) = out {
                o.push(("paths.out_dir".to_string(), toml::Value::String(dir.display().to_string())));
            }
            let config = load(&common, o)?;
            pipeline::run(&Ctx::new(&config))
        }
    }
}

/// Keeps whole numbers typed as floats for float-valued keys.
fn float(v: f64) -> String {
    format!("{v:?}")
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
