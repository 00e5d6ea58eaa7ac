use std::borrow::Cow;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::baselines::{rf_conf_verdict, softmax_verdict};
use super::metrics::{macro_f1, mean_std, F1Report};
use crate::error::{OsrError, Result};
use crate::evt::{build_evt_model, validate_delta, EvtModel, EvtParams, Verdict, WeibullModel};
use crate::features::{fit_extractor, ExtractorParams, FeatureVector};
use crate::forest::{train_forest, ForestParams, SqrtRounding, VoteRecord};
use crate::scenario::{split_indices, LabeledScenario, ScenarioTensor, SplitRatios};
use crate::seed;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
enum Source {
    Features(Vec<FeatureVector>),
    Scenarios {
        tensors: Vec<ScenarioTensor>,
        extractor: ExtractorParams,
        /// Features of every tensor when the extractor ignores its training data.
        cached: Option<Vec<FeatureVector>>,
    },
}

/// Labeled samples to evaluate on. Labels are dataset class ids; `None` marks
/// samples from an outlier source.
#[derive(Debug, Clone)]
pub struct Corpus {
    source: Source,
    labels: Vec<Option<usize>>,
    softmax: Option<Vec<Vec<f64>>>,
}

impl Corpus {
    pub fn from_features(features: Vec<FeatureVector>, labels: Vec<Option<usize>>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(OsrError::LengthMismatch {
                what: "features vs labels",
                left: features.len(),
                right: labels.len(),
            });
        }
        if features.is_empty() {
            return Err(OsrError::EmptyData);
        }
        Ok(Self {
            source: Source::Features(features),
            labels,
            softmax: None,
        })
    }

    /// Scenario corpus labeled by known-class index. Data-independent
    /// extractors are applied once here and reused by every run.
    pub fn from_scenarios(scenarios: Vec<LabeledScenario>, extractor: ExtractorParams) -> Result<Self> {
        if scenarios.is_empty() {
            return Err(OsrError::EmptyData);
        }
        let labels = scenarios.iter().map(|s| s.label.known_index()).collect();
        let tensors: Vec<ScenarioTensor> = scenarios.into_iter().map(|s| s.tensor).collect();
        let cached = if extractor.is_data_independent() {
            let fitted = fit_extractor(&extractor, &tensors[..1])?;
            let refs: Vec<&ScenarioTensor> = tensors.iter().collect();
            Some(fitted.transform_all(&refs)?)
        } else {
            None
        };
        Ok(Self {
            source: Source::Scenarios {
                tensors,
                extractor,
                cached,
            },
            labels,
            softmax: None,
        })
    }

    /// Attaches per-sample class probabilities for the softmax baseline.
    /// Columns follow the ascending order of the known class ids.
    pub fn with_softmax(mut self, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.len() != self.len() {
            return Err(OsrError::LengthMismatch {
                what: "softmax rows vs samples",
                left: rows.len(),
                right: self.len(),
            });
        }
        self.softmax = Some(rows);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    /// Distinct labeled class ids, ascending.
    pub fn classes(&self) -> Vec<usize> {
        let mut c: Vec<usize> = self.labels.iter().flatten().copied().collect();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn outlier_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    pub fn extractor(&self) -> Option<ExtractorParams> {
        match &self.source {
            Source::Features(_) => None,
            Source::Scenarios { extractor, .. } => Some(*extractor),
        }
    }

    /// Features for all samples, with the extractor fitted on `train` if it needs data.
    fn features_for(&self, train: &[usize]) -> Result<Cow<'_, [FeatureVector]>> {
        match &self.source {
            Source::Features(f) => Ok(Cow::Borrowed(f)),
            Source::Scenarios {
                cached: Some(f), ..
            } => Ok(Cow::Borrowed(f)),
            Source::Scenarios {
                tensors,
                extractor,
                cached: None,
            } => {
                let fit_on: Vec<ScenarioTensor> = train.iter().map(|&i| tensors[i].clone()).collect();
                let fitted = fit_extractor(extractor, &fit_on)?;
                let refs: Vec<&ScenarioTensor> = tensors.iter().collect();
                Ok(Cow::Owned(fitted.transform_all(&refs)?))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    ClassSelection,
    OutlierAddition,
}

impl std::str::FromStr for ProtocolKind {
    type Err = OsrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "class-selection" => Ok(Self::ClassSelection),
            "outlier-addition" => Ok(Self::OutlierAddition),
            _ => Err(OsrError::InvalidParameter(format!("unknown protocol {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProtocolConfig {
    pub kind: ProtocolKind,
    /// Known classes drawn per class-selection repeat.
    pub num_known: usize,
    /// Fixed known classes for class selection; drawn at random when empty.
    pub known_classes: Vec<usize>,
    pub repeats: usize,
    /// One seed per repeat; derived from `seed` when empty.
    pub seeds: Vec<u64>,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub trees: usize,
    pub features_per_split: Option<usize>,
    pub rounding: SqrtRounding,
    pub evt: EvtParams,
    pub rf_conf_threshold: f64,
    pub softmax_threshold: f64,
    /// Outliers added per known test sample.
    pub outlier_ratio: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            kind: ProtocolKind::ClassSelection,
            num_known: 4,
            known_classes: Vec::new(),
            repeats: 5,
            seeds: Vec::new(),
            seed: 0,
            ratios: SplitRatios::default(),
            trees: 200,
            features_per_split: None,
            rounding: SqrtRounding::Nearest,
            evt: EvtParams::default(),
            rf_conf_threshold: 0.5,
            softmax_threshold: 0.5,
            outlier_ratio: 1.0,
        }
    }
}

fn unit_interval(value: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(OsrError::InvalidParameter(format!("{what} {value} outside [0, 1]")));
    }
    Ok(())
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(OsrError::InvalidParameter("repeats must be at least 1".into()));
        }
        if !self.seeds.is_empty() && self.seeds.len() != self.repeats {
            return Err(OsrError::InvalidParameter(format!(
                "{} seeds given for {} repeats",
                self.seeds.len(),
                self.repeats
            )));
        }
        if self.kind == ProtocolKind::ClassSelection {
            let k = if self.known_classes.is_empty() {
                self.num_known
            } else {
                self.known_classes.len()
            };
            if k < 2 {
                return Err(OsrError::InvalidParameter(format!(
                    "class selection needs at least 2 known classes, got {k}"
                )));
            }
        }
        if self.trees == 0 {
            return Err(OsrError::InvalidParameter("trees must be at least 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(OsrError::InvalidParameter("features_per_split must be positive".into()));
        }
        self.ratios.validate()?;
        self.evt.validate()?;
        unit_interval(self.rf_conf_threshold, "rf-conf threshold")?;
        unit_interval(self.softmax_threshold, "softmax threshold")?;
        if !(self.outlier_ratio.is_finite() && self.outlier_ratio >= 0.0) {
            return Err(OsrError::InvalidParameter(format!(
                "outlier ratio {} must be non-negative",
                self.outlier_ratio
            )));
        }
        Ok(())
    }

    pub fn repeat_seed(&self, repeat: usize) -> u64 {
        self.seeds
            .get(repeat)
            .copied()
            .unwrap_or_else(|| seed::derive(self.seed, repeat as u64))
    }
}

const TAG_CLASSES: u64 = 1;
const TAG_SPLIT: u64 = 2;
const TAG_FOREST: u64 = 3;
const TAG_OUTLIERS: u64 = 4;

/// Everything a run produces before scoring: test votes and the calibrated
/// EVT model. Scoring at another `delta` needs no retraining.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub repeat: usize,
    pub seed: u64,
    /// Dataset class ids of the known classes; position is the model class index.
    pub known_classes: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub truth: Vec<Option<usize>>,
    pub votes: Vec<VoteRecord>,
    pub evt: EvtModel,
    pub trees: usize,
}

fn select_classes(corpus: &Corpus, config: &ProtocolConfig, run_seed: u64) -> Result<Vec<usize>> {
    let available = corpus.classes();
    match config.kind {
        ProtocolKind::OutlierAddition => {
            if available.len() < 2 {
                return Err(OsrError::NeedTwoClasses(available.len()));
            }
            Ok(available)
        }
        ProtocolKind::ClassSelection if !config.known_classes.is_empty() => {
            let mut known = config.known_classes.clone();
            known.sort_unstable();
            known.dedup();
            if let Some(c) = known.iter().find(|c| !available.contains(c)) {
                return Err(OsrError::InvalidParameter(format!("known class {c} not in dataset")));
            }
            if known.len() >= available.len() {
                return Err(OsrError::InvalidParameter(
                    "class selection must leave at least one class unknown".into(),
                ));
            }
            Ok(known)
        }
        ProtocolKind::ClassSelection => {
            if config.num_known >= available.len() {
                return Err(OsrError::InvalidParameter(format!(
                    "num_known {} needs at least {} labeled classes, dataset has {}",
                    config.num_known,
                    config.num_known + 1,
                    available.len()
                )));
            }
            let mut pool = available;
            let mut rng = seed::stream_rng(seed::derive(run_seed, TAG_CLASSES), 0);
            pool.shuffle(&mut rng);
            pool.truncate(config.num_known);
            pool.sort_unstable();
            Ok(pool)
        }
    }
}

/// Trains the forest and EVT model of one repeat and votes on its test split.
pub fn prepare_run(corpus: &Corpus, config: &ProtocolConfig, repeat: usize) -> Result<PreparedRun> {
    let run_seed = config.repeat_seed(repeat);
    let known = select_classes(corpus, config, run_seed)?;
    let position = |label: Option<usize>| label.and_then(|c| known.binary_search(&c).ok());

    let split_seed = seed::derive(run_seed, TAG_SPLIT);
    let (train, calibration, test) = match config.kind {
        ProtocolKind::ClassSelection => {
            let keys: Vec<Option<usize>> = corpus.labels.iter().map(|&l| position(l)).collect();
            // Outlier-source samples take no part in class selection.
            let mut s = split_indices(&keys, config.ratios, split_seed)?;
            s.test.retain(|&i| corpus.labels[i].is_some());
            (s.train, s.calibration, s.test)
        }
        ProtocolKind::OutlierAddition => {
            let known_idx: Vec<usize> = (0..corpus.len()).filter(|&i| corpus.labels[i].is_some()).collect();
            let keys: Vec<Option<usize>> = known_idx.iter().map(|&i| position(corpus.labels[i])).collect();
            let s = split_indices(&keys, config.ratios, split_seed)?;
            let map = |v: Vec<usize>| v.into_iter().map(|j| known_idx[j]).collect::<Vec<_>>();
            let mut test = map(s.test);
            let required = (config.outlier_ratio * test.len() as f64).round() as usize;
            let mut outliers: Vec<usize> = (0..corpus.len()).filter(|&i| corpus.labels[i].is_none()).collect();
            if outliers.len() < required {
                return Err(OsrError::InsufficientOutliers {
                    required,
                    available: outliers.len(),
                });
            }
            let mut rng = seed::stream_rng(seed::derive(run_seed, TAG_OUTLIERS), 0);
            outliers.shuffle(&mut rng);
            test.extend_from_slice(&outliers[..required]);
            test.sort_unstable();
            (map(s.train), map(s.calibration), test)
        }
    };

    let features = corpus.features_for(&train)?;
    let gather = |idx: &[usize]| -> (Vec<FeatureVector>, Vec<usize>) {
        idx.iter()
            .map(|&i| (features[i].clone(), position(corpus.labels[i]).expect("known sample")))
            .unzip()
    };
    let (train_x, train_y) = gather(&train);
    let (cal_x, cal_y) = gather(&calibration);
    let params = ForestParams {
        trees: config.trees,
        seed: seed::derive(run_seed, TAG_FOREST),
        features_per_split: config.features_per_split,
        rounding: config.rounding,
        parallel: true,
    };
    let forest = train_forest(&train_x, &train_y, &params)?;
    let evt = build_evt_model(&forest, &cal_x, &cal_y, &config.evt)?;
    let test_x: Vec<FeatureVector> = test.iter().map(|&i| features[i].clone()).collect();
    let votes = forest.vote_all(&test_x)?;
    let truth = test.iter().map(|&i| position(corpus.labels[i])).collect();
    Ok(PreparedRun {
        repeat,
        seed: run_seed,
        known_classes: known,
        test_indices: test,
        truth,
        votes,
        evt,
        trees: config.trees,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RunResult {
    pub repeat: usize,
    pub seed: u64,
    pub known_classes: Vec<usize>,
    pub test_samples: usize,
    pub unknown_test_samples: usize,
    pub weibulls: Vec<WeibullModel>,
    pub evt: F1Report,
    pub rf_conf_naive: F1Report,
    pub softmax_naive: Option<F1Report>,
}

impl PreparedRun {
    pub fn evt_verdicts(&self, delta: f64) -> Vec<Verdict> {
        self.votes
            .iter()
            .map(|v| self.evt.decide(v.clone(), delta).verdict)
            .collect()
    }

    pub fn evt_score(&self, delta: f64) -> Result<F1Report> {
        macro_f1(&self.evt_verdicts(delta), &self.truth, self.known_classes.len())
    }

    pub fn score(&self, corpus: &Corpus, config: &ProtocolConfig, delta: f64) -> Result<RunResult> {
        let k = self.known_classes.len();
        let rf: Vec<Verdict> = self
            .votes
            .iter()
            .map(|v| rf_conf_verdict(v, self.trees, config.rf_conf_threshold))
            .collect();
        let softmax = match (&corpus.softmax, config.kind) {
            (Some(rows), ProtocolKind::OutlierAddition) => {
                let verdicts = self
                    .test_indices
                    .iter()
                    .map(|&i| {
                        let row = &rows[i];
                        if row.len() != k {
                            return Err(OsrError::DimensionMismatch {
                                expected: k,
                                actual: row.len(),
                            });
                        }
                        Ok(softmax_verdict(row, config.softmax_threshold))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Some(macro_f1(&verdicts, &self.truth, k)?)
            }
            _ => None,
        };
        Ok(RunResult {
            repeat: self.repeat,
            seed: self.seed,
            known_classes: self.known_classes.clone(),
            test_samples: self.truth.len(),
            unknown_test_samples: self.truth.iter().filter(|t| t.is_none()).count(),
            weibulls: self.evt.weibulls.clone(),
            evt: self.evt_score(delta)?,
            rf_conf_naive: macro_f1(&rf, &self.truth, k)?,
            softmax_naive: softmax,
        })
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub scores: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over repeats.
    pub std: f64,
}

impl MethodSummary {
    fn new(method: &str, scores: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&scores);
        Self {
            method: method.to_string(),
            scores,
            mean,
            std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Conventions {
    pub zero_division: String,
    pub macro_average: String,
    pub std: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub protocol: ProtocolKind,
    pub config: ProtocolConfig,
    pub extractor: Option<ExtractorParams>,
    pub runs: Vec<RunResult>,
    pub summary: Vec<MethodSummary>,
    /// Why the softmax baseline was not scored, if it was not.
    pub softmax_skipped: Option<String>,
    pub conventions: Conventions,
}

impl EvalReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.summary.iter().find(|m| m.method == name)
    }
}

pub const METHOD_EVT: &str = "vote-evt";
pub const METHOD_RF_CONF: &str = "rf-conf-naive";
pub const METHOD_SOFTMAX: &str = "softmax-naive";

pub fn prepare_runs(corpus: &Corpus, config: &ProtocolConfig) -> Result<Vec<PreparedRun>> {
    config.validate()?;
    (0..config.repeats)
        .into_par_iter()
        .map(|r| prepare_run(corpus, config, r))
        .collect()
}

/// Runs the configured protocol and assembles the report in repeat order.
pub fn run_protocol(corpus: &Corpus, config: &ProtocolConfig) -> Result<EvalReport> {
    let prepared = prepare_runs(corpus, config)?;
    report_from_runs(corpus, config, &prepared, config.evt.delta)
}

pub fn run_class_selection(corpus: &Corpus, config: &ProtocolConfig) -> Result<EvalReport> {
    run_protocol(
        corpus,
        &ProtocolConfig {
            kind: ProtocolKind::ClassSelection,
            ..config.clone()
        },
    )
}

pub fn run_outlier_addition(corpus: &Corpus, config: &ProtocolConfig) -> Result<EvalReport> {
    run_protocol(
        corpus,
        &ProtocolConfig {
            kind: ProtocolKind::OutlierAddition,
            ..config.clone()
        },
    )
}

pub fn report_from_runs(corpus: &Corpus, config: &ProtocolConfig, prepared: &[PreparedRun], delta: f64) -> Result<EvalReport> {
    validate_delta(delta)?;
    let runs = prepared
        .iter()
        .map(|p| p.score(corpus, config, delta))
        .collect::<Result<Vec<_>>>()?;
    let scores = |f: &dyn Fn(&RunResult) -> Option<f64>| runs.iter().filter_map(f).collect::<Vec<f64>>();
    let mut summary = vec![
        MethodSummary::new(METHOD_EVT, scores(&|r| Some(r.evt.macro_f1))),
        MethodSummary::new(METHOD_RF_CONF, scores(&|r| Some(r.rf_conf_naive.macro_f1))),
    ];
    let softmax_skipped = match (&corpus.softmax, config.kind) {
        (None, _) => Some("no softmax scores supplied".to_string()),
        (Some(_), ProtocolKind::ClassSelection) => {
            Some("class selection retrains per repeat; softmax scores apply to outlier addition only".to_string())
        }
        (Some(_), ProtocolKind::OutlierAddition) => {
            summary.push(MethodSummary::new(
                METHOD_SOFTMAX,
                scores(&|r| r.softmax_naive.as_ref().map(|s| s.macro_f1)),
            ));
            None
        }
    };
    let mut echoed = config.clone();
    echoed.evt.delta = delta;
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        protocol: config.kind,
        config: echoed,
        extractor: corpus.extractor(),
        runs,
        summary,
        softmax_skipped,
        conventions: Conventions {
            zero_division: "precision or recall with a zero denominator is 0".into(),
            macro_average: "unweighted mean over outcome classes (known and unknown) present in truth or predictions"
                .into(),
            std: "sample standard deviation (n - 1)".into(),
        },
    })
}
