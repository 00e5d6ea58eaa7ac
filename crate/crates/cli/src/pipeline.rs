//! `run`: every stage in dependency order inside one output directory,
//! skipping stages whose inputs and parameters are unchanged.

use std::path::{Path, PathBuf};

use anyhow::Result;

use crate::artifacts::{append_log, require_input, write_atomic, StageRecord, StageSpec};
use crate::commands::{self, Ctx, Source};

pub struct Layout {
    pub scenarios: PathBuf,
    pub features_prefix: PathBuf,
    pub forest: PathBuf,
    pub evt: PathBuf,
    pub predictions: PathBuf,
    pub report: PathBuf,
    pub ablation: PathBuf,
    pub log: PathBuf,
}

impl Layout {
    pub fn new(dir: &Path) -> Self {
        Self {
            scenarios: dir.join("scenarios.osrg"),
            features_prefix: dir.join("features"),
            forest: dir.join("forest.osrt"),
            evt: dir.join("evt.osre"),
            predictions: dir.join("predictions.csv"),
            report: dir.join("report.json"),
            ablation: dir.join("ablation.csv"),
            log: dir.join("stages.jsonl"),
        }
    }
}

fn stage(
    ctx: &Ctx,
    log: &Path,
    spec: &StageSpec,
    outputs: &[PathBuf],
    run: impl FnOnce() -> Result<()>,
) -> Result<()> {
    let status = if spec.up_to_date(outputs)? {
        eprintln!("[{}] up to date", spec.stage);
        "skipped"
    } else {
        eprintln!("[{}] running", spec.stage);
        run()?;
        "ran"
    };
    append_log(
        log,
        &StageRecord {
            stage: spec.stage.to_string(),
            status: status.to_string(),
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            config_hash: ctx.config_hash.clone(),
        },
    )
}

pub fn run(ctx: &Ctx) -> Result<()> {
    let c = ctx.config;
    let dir = &c.paths.out_dir;
    let l = Layout::new(dir);
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("config.json"), serde_json::to_string_pretty(c)?.as_bytes())?;

    // Supplied inputs are checked before any stage runs.
    if let Some(p) = &c.paths.dataset {
        require_input(p, "generate")?;
    }
    if let Some(p) = &c.paths.features {
        require_input(p, "extract-features")?;
    }
    if let Some(p) = &c.paths.softmax {
        require_input(p, "softmax-scores")?;
    }

    let scenarios = match &c.paths.dataset {
        Some(p) => p.clone(),
        None if c.paths.features.is_some() => PathBuf::new(),
        None => {
            stage(ctx, &l.log, &commands::generate_spec(ctx), std::slice::from_ref(&l.scenarios), || {
                commands::generate(ctx, &l.scenarios)
            })?;
            l.scenarios.clone()
        }
    };

    let outputs = commands::split_outputs(&l.features_prefix);
    let source = match &c.paths.features {
        Some(features) => {
            stage(ctx, &l.log, &commands::split_features_spec(ctx, features), &outputs, || {
                commands::split_features(ctx, features, &l.features_prefix).map(drop)
            })?;
            Source::Features(features)
        }
        None => {
            stage(ctx, &l.log, &commands::extract_spec(ctx, &scenarios, true), &outputs, || {
                commands::extract_features(ctx, &scenarios, &l.features_prefix, true).map(drop)
            })?;
            Source::Scenarios(&scenarios)
        }
    };
    let [train, calib, test] = outputs;

    stage(ctx, &l.log, &commands::train_spec(ctx, &train), std::slice::from_ref(&l.forest), || {
        commands::train(ctx, &train, &l.forest)
    })?;
    stage(
        ctx,
        &l.log,
        &commands::calibrate_spec(ctx, &l.forest, &calib),
        std::slice::from_ref(&l.evt),
        || commands::calibrate(ctx, &l.forest, &calib, &l.evt),
    )?;
    stage(
        ctx,
        &l.log,
        &commands::predict_spec(ctx, &l.forest, &l.evt, &test, None),
        std::slice::from_ref(&l.predictions),
        || commands::predict(ctx, &l.forest, &l.evt, &test, None, &l.predictions),
    )?;

    let softmax = c.paths.softmax.as_deref();
    stage(
        ctx,
        &l.log,
        &commands::evaluate_spec(ctx, &source, softmax),
        std::slice::from_ref(&l.report),
        || commands::evaluate(ctx, &source, softmax, &l.report),
    )?;
    if c.ablation.kind.is_some() {
        stage(ctx, &l.log, &commands::ablate_spec(ctx, &source), std::slice::from_ref(&l.ablation), || {
            commands::ablate(ctx, &source, &l.ablation)
        })?;
    }
    Ok(())
}
