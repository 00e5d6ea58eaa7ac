use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use vote_osr::eval::{ablation_sweep, parse_softmax_csv, run_protocol, Corpus, SweepGrid};
use vote_osr::evt::{build_evt_model, encode_evt_model, read_evt_file, validate_delta};
use vote_osr::features::{encode_feature_file, fit_extractor, read_feature_file, FeatureSet, FeatureVector};
use vote_osr::forest::{encode_forest, read_forest_file, train_forest};
use vote_osr::scenario::{
    encode_scenarios, generate_synthetic_dataset, read_scenario_file, split_dataset, split_indices, LabeledScenario, ManeuverClass,
    ScenarioTensor,
};
use vote_osr::Verdict;

use crate::artifacts::{read_meta, require_input, StageSpec};
use crate::config::RunConfig;

pub struct Ctx<'a> {
    pub config: &'a RunConfig,
    pub config_hash: String,
}

impl<'a> Ctx<'a> {
    pub fn new(config: &'a RunConfig) -> Self {
        Self {
            config,
            config_hash: config.hash(),
        }
    }

    fn spec(&self, stage: &'a str, params: serde_json::Value, inputs: &[&Path]) -> StageSpec<'_> {
        StageSpec {
            stage,
            params,
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            config_hash: &self.config_hash,
            classes: None,
        }
    }
}

pub fn generate_spec<'a>(ctx: &'a Ctx<'a>) -> StageSpec<'a> {
    let c = ctx.config;
    let mut spec = ctx.spec(
        "generate",
        serde_json::json!({ "seed": c.seed, "grid": c.grid, "synth": c.synth }),
        &[],
    );
    spec.classes = Some(class_names(&c.synth.classes));
    spec
}

fn class_names(classes: &[ManeuverClass]) -> Vec<String> {
    classes.iter().map(|c| c.name().to_string()).collect()
}

pub fn generate(ctx: &Ctx, out: &Path) -> Result<()> {
    let c = ctx.config;
    let mut counts: BTreeMap<ManeuverClass, usize> =
        c.synth.classes.iter().map(|&k| (k, c.synth.count_per_class)).collect();
    if c.synth.outliers > 0 {
        counts.insert(ManeuverClass::Outlier, c.synth.outliers);
    }
    let data = generate_synthetic_dataset(&counts, &c.grid.to_grid(), &c.synth.params, c.seed)?;
    generate_spec(ctx).write(out, &encode_scenarios(&data)?)?;
    eprintln!("generated {} scenarios -> {}", data.len(), out.display());
    Ok(())
}

fn load_scenarios(ctx: &Ctx, path: &Path) -> Result<Vec<LabeledScenario>> {
    require_input(path, "generate")?;
    read_scenario_file(path, &ctx.config.grid.to_grid()).with_context(|| format!("reading {}", path.display()))
}

/// Known classes present, ascending; feature labels are positions in this list.
fn present_classes(data: &[LabeledScenario]) -> Vec<ManeuverClass> {
    let mut classes: Vec<ManeuverClass> = data.iter().map(|s| s.label).filter(|c| !c.is_outlier()).collect();
    classes.sort_unstable();
    classes.dedup();
    classes
}

pub fn split_outputs(prefix: &Path) -> [PathBuf; 3] {
    ["train", "calib", "test"].map(|part| {
        let mut name = prefix.as_os_str().to_os_string();
        name.push(format!(".{part}.osrf"));
        PathBuf::from(name)
    })
}

pub fn extract_spec<'a>(ctx: &'a Ctx<'a>, scenarios: &Path, split: bool) -> StageSpec<'a> {
    let c = ctx.config;
    ctx.spec(
        "extract-features",
        serde_json::json!({ "extractor": c.extractor, "split": split, "seed": c.seed, "ratios": c.protocol.ratios }),
        &[scenarios],
    )
}

/// Writes one feature file, or with `split` the train/calib/test files of a
/// stratified split with the extractor fitted on the training part.
pub fn extract_features(ctx: &Ctx, scenarios: &Path, out: &Path, split: bool) -> Result<Vec<PathBuf>> {
    let c = ctx.config;
    let data = load_scenarios(ctx, scenarios)?;
    let classes = present_classes(&data);
    let mut spec = extract_spec(ctx, scenarios, split);
    spec.classes = Some(class_names(&classes));
    let params = c.extractor.params()?;
    let label_of = |s: &LabeledScenario| classes.binary_search(&s.label).ok().map(|i| i as u32);
    let encode = |extractor: &vote_osr::FeatureExtractor, part: &[LabeledScenario]| -> Result<Vec<u8>> {
        let refs: Vec<&ScenarioTensor> = part.iter().map(|s| &s.tensor).collect();
        let features = extractor.transform_all(&refs)?;
        let set = FeatureSet::new(features, part.iter().map(label_of).collect())?;
        Ok(encode_feature_file(&set)?)
    };
    if split {
        let parts = split_dataset(data, c.protocol.ratios, c.seed)?;
        let train: Vec<ScenarioTensor> = parts.train.iter().map(|s| s.tensor.clone()).collect();
        let extractor = fit_extractor(&params, &train)?;
        let outputs = split_outputs(out);
        for (path, part) in outputs.iter().zip([&parts.train, &parts.calibration, &parts.test]) {
            spec.write(path, &encode(&extractor, part)?)?;
            eprintln!("{} samples x {} features -> {}", part.len(), extractor.dim(), path.display());
        }
        Ok(outputs.to_vec())
    } else {
        let tensors: Vec<ScenarioTensor> = data.iter().map(|s| s.tensor.clone()).collect();
        let extractor = fit_extractor(&params, &tensors)?;
        spec.write(out, &encode(&extractor, &data)?)?;
        eprintln!("{} samples x {} features -> {}", data.len(), extractor.dim(), out.display());
        Ok(vec![out.to_path_buf()])
    }
}

pub fn split_features_spec<'a>(ctx: &'a Ctx<'a>, features: &Path) -> StageSpec<'a> {
    let c = ctx.config;
    ctx.spec(
        "split-features",
        serde_json::json!({ "seed": c.seed, "ratios": c.protocol.ratios }),
        &[features],
    )
}

/// Stratified train/calib/test split of an existing feature file.
pub fn split_features(ctx: &Ctx, features: &Path, prefix: &Path) -> Result<Vec<PathBuf>> {
    let c = ctx.config;
    let set = load_features(features)?;
    let idx = split_indices(&set.labels, c.protocol.ratios, c.seed)?;
    let spec = split_features_spec(ctx, features);
    let outputs = split_outputs(prefix);
    for (path, ids) in outputs.iter().zip([&idx.train, &idx.calibration, &idx.test]) {
        let part = FeatureSet::new(
            ids.iter().map(|&i| set.features[i].clone()).collect(),
            ids.iter().map(|&i| set.labels[i]).collect(),
        )?;
        spec.write(path, &encode_feature_file(&part)?)?;
        eprintln!("{} samples -> {}", ids.len(), path.display());
    }
    Ok(outputs.to_vec())
}

fn labeled(set: FeatureSet, path: &Path) -> Result<(Vec<FeatureVector>, Vec<usize>)> {
    let mut labels = Vec::with_capacity(set.labels.len());
    for (i, l) in set.labels.iter().enumerate() {
        match l {
            Some(l) => labels.push(*l as usize),
            None => bail!("{}: sample {i} is unlabeled; training and calibration need labels", path.display()),
        }
    }
    Ok((set.features, labels))
}

fn load_features(path: &Path) -> Result<FeatureSet> {
    require_input(path, "extract-features")?;
    read_feature_file(path).with_context(|| format!("reading {}", path.display()))
}

pub fn train_spec<'a>(ctx: &'a Ctx<'a>, features: &Path) -> StageSpec<'a> {
    let c = ctx.config;
    let mut spec = ctx.spec(
        "train-forest",
        serde_json::json!({ "forest": c.forest, "seed": c.seed }),
        &[features],
    );
    spec.classes = read_meta(features).and_then(|m| m.classes);
    spec
}

pub fn train(ctx: &Ctx, features: &Path, out: &Path) -> Result<()> {
    let (x, y) = labeled(load_features(features)?, features)?;
    let forest = train_forest(&x, &y, &ctx.config.forest_params())?;
    let oob = forest.oob_accuracy(&x, &y)?;
    train_spec(ctx, features).write(out, &encode_forest(&forest))?;
    eprintln!(
        "{} trees, {} classes, out-of-bag accuracy {oob:.4} -> {}",
        forest.num_trees(),
        forest.num_classes(),
        out.display()
    );
    Ok(())
}

pub fn calibrate_spec<'a>(ctx: &'a Ctx<'a>, model: &Path, features: &Path) -> StageSpec<'a> {
    ctx.spec("calibrate", serde_json::json!({ "evt": ctx.config.evt }), &[model, features])
}

pub fn calibrate(ctx: &Ctx, model: &Path, features: &Path, out: &Path) -> Result<()> {
    require_input(model, "train-forest")?;
    let forest = read_forest_file(model).with_context(|| format!("reading {}", model.display()))?;
    let (x, y) = labeled(load_features(features)?, features)?;
    let evt = build_evt_model(&forest, &x, &y, &ctx.config.evt)?;
    calibrate_spec(ctx, model, features).write(out, &encode_evt_model(&evt))?;
    for w in &evt.weibulls {
        eprintln!(
            "class {}: alpha {:.3} gamma {:.3} from {} tail votes",
            w.class, w.alpha, w.gamma, w.tail_size
        );
    }
    Ok(())
}

pub fn predict_spec<'a>(ctx: &'a Ctx<'a>, forest: &Path, evt: &Path, features: &Path, delta: Option<f64>) -> StageSpec<'a> {
    ctx.spec("predict", serde_json::json!({ "delta": delta }), &[forest, evt, features])
}

/// Writes `index,verdict,class,cdf_*,votes_*` rows.
pub fn predict(ctx: &Ctx, forest: &Path, evt: &Path, features: &Path, delta_override: Option<f64>, out: &Path) -> Result<()> {
    require_input(forest, "train-forest")?;
    require_input(evt, "calibrate")?;
    let model = read_forest_file(forest)?;
    let evt_model = read_evt_file(evt)?;
    if evt_model.trees != model.num_trees() || evt_model.num_classes() != model.num_classes() {
        bail!(
            "{} was calibrated for {} trees and {} classes; forest has {} and {}",
            evt.display(),
            evt_model.trees,
            evt_model.num_classes(),
            model.num_trees(),
            model.num_classes()
        );
    }
    let delta = delta_override.unwrap_or(evt_model.delta);
    validate_delta(delta)?;
    let set = load_features(features)?;
    let k = model.num_classes();
    let mut csv = String::from("index,verdict,class");
    for i in 0..k {
        write!(csv, ",cdf_{i}")?;
    }
    for i in 0..k {
        write!(csv, ",votes_{i}")?;
    }
    csv.push('\n');
    let mut unknown = 0;
    for (i, q) in set.features.iter().enumerate() {
        let p = evt_model.predict_with_delta(&model, q, delta)?;
        match p.verdict {
            Verdict::Known(c) => write!(csv, "{i},known,{c}")?,
            Verdict::Unknown => {
                unknown += 1;
                write!(csv, "{i},unknown,")?
            }
        }
        for v in &p.cdf {
            write!(csv, ",{v}")?;
        }
        for v in p.votes.counts() {
            write!(csv, ",{v}")?;
        }
        csv.push('\n');
    }
    predict_spec(ctx, forest, evt, features, delta_override).write(out, csv.as_bytes())?;
    eprintln!("{} predictions, {unknown} unknown -> {}", set.features.len(), out.display());
    Ok(())
}

/// Where a protocol reads its samples from.
pub enum Source<'a> {
    Scenarios(&'a Path),
    Features(&'a Path),
}

impl Source<'_> {
    fn path(&self) -> &Path {
        match self {
            Source::Scenarios(p) | Source::Features(p) => p,
        }
    }
}

fn corpus(ctx: &Ctx, source: &Source, softmax: Option<&Path>) -> Result<Corpus> {
    let corpus = match source {
        Source::Scenarios(path) => Corpus::from_scenarios(load_scenarios(ctx, path)?, ctx.config.extractor.params()?)?,
        Source::Features(path) => {
            let set = load_features(path)?;
            let labels = set.labels.iter().map(|l| l.map(|v| v as usize)).collect();
            Corpus::from_features(set.features, labels)?
        }
    };
    match softmax {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let scores = parse_softmax_csv(&text).with_context(|| format!("parsing {}", path.display()))?;
            Ok(corpus.with_softmax(scores.rows)?)
        }
        None => Ok(corpus),
    }
}

pub fn evaluate_spec<'a>(ctx: &'a Ctx<'a>, source: &Source, softmax: Option<&Path>) -> StageSpec<'a> {
    let c = ctx.config;
    let mut inputs = vec![source.path()];
    inputs.extend(softmax);
    let extractor = matches!(source, Source::Scenarios(_)).then_some(&c.extractor);
    ctx.spec(
        "evaluate",
        serde_json::json!({ "protocol": c.protocol_config(), "extractor": extractor }),
        &inputs,
    )
}

pub fn evaluate(ctx: &Ctx, source: &Source, softmax: Option<&Path>, out: &Path) -> Result<()> {
    let corpus = corpus(ctx, source, softmax)?;
    let report = run_protocol(&corpus, &ctx.config.protocol_config())?;
    let mut json = serde_json::to_value(&report)?;
    json["config_hash"] = serde_json::Value::String(ctx.config_hash.clone());
    let mut text = serde_json::to_string_pretty(&json)?;
    text.push('\n');
    evaluate_spec(ctx, source, softmax).write(out, text.as_bytes())?;
    for m in &report.summary {
        eprintln!("{}: macro-F1 {:.4} ± {:.4}", m.method, m.mean, m.std);
    }
    Ok(())
}

pub fn ablate_spec<'a>(ctx: &'a Ctx<'a>, source: &Source) -> StageSpec<'a> {
    let c = ctx.config;
    let extractor = matches!(source, Source::Scenarios(_)).then_some(&c.extractor);
    ctx.spec(
        "ablate",
        serde_json::json!({ "protocol": c.protocol_config(), "ablation": c.ablation, "extractor": extractor }),
        &[source.path()],
    )
}

pub fn ablate(ctx: &Ctx, source: &Source, out: &Path) -> Result<()> {
    let c = ctx.config;
    let kind = c.ablation.kind.context("ablation kind not set (--kind or ablation.kind)")?;
    let grid = SweepGrid::parse(kind, &c.ablation.grid)?;
    let corpus = corpus(ctx, source, None)?;
    let table = ablation_sweep(&corpus, &grid, &c.protocol_config())?;
    ablate_spec(ctx, source).write(out, table.to_csv().as_bytes())?;
    for s in &table.settings {
        eprintln!("{}: macro-F1 {:.4} ± {:.4}", s.setting, s.mean, s.std);
    }
    Ok(())
}
