//! Browser bindings for three small interactive views: a synthetic scenario
//! rendered frame by frame, a Weibull fit on sampled vote counts, and the
//! open-set decision regions of a forest trained on 2-D blobs.
//!
//! Each view is plain Rust underneath so it can be tested natively; the
//! `#[wasm_bindgen]` layer only converts errors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Weibull};
use vote_osr::evt::{build_evt_model, fit_weibull, weibull_cdf, EvtParams};
use vote_osr::forest::{train_forest, ForestParams};
use vote_osr::scenario::{SynthParams, SyntheticGenerator};
use vote_osr::{EvtModel, FeatureVector, GridConfig, ManeuverClass, RandomForest, Verdict};
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Names of the classes accepted by [`render_scenario`], in index order.
#[wasm_bindgen]
pub fn class_names() -> Vec<String> {
    ManeuverClass::ALL.iter().map(|c| c.name().to_string()).collect()
}

#[wasm_bindgen]
pub struct ScenarioView {
    rows: usize,
    cols: usize,
    steps: usize,
    cells: Vec<f32>,
}

#[wasm_bindgen]
impl ScenarioView {
    #[wasm_bindgen(getter)]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[wasm_bindgen(getter)]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[wasm_bindgen(getter)]
    pub fn steps(&self) -> usize {
        self.steps
    }

    /// One grid, row-major, values 0 (free), 0.5 (unobserved) or 1 (occupied).
    pub fn frame(&self, step: usize) -> Vec<f32> {
        let n = self.rows * self.cols;
        self.cells.get(step * n..(step + 1) * n).map(<[f32]>::to_vec).unwrap_or_default()
    }
}

pub fn scenario_view(class: usize, sample: usize, seed: u64) -> vote_osr::Result<ScenarioView> {
    let class = ManeuverClass::from_index(class)
        .ok_or_else(|| vote_osr::OsrError::InvalidParameter(format!("no class with index {class}")))?;
    let generator = SyntheticGenerator::new(GridConfig::default(), SynthParams::default(), seed)?;
    let tensor = generator.scenario(class, sample)?.tensor;
    let (rows, cols, steps) = tensor.shape();
    Ok(ScenarioView {
        rows,
        cols,
        steps,
        cells: tensor.flat_values(),
    })
}

#[wasm_bindgen]
pub fn render_scenario(class: usize, sample: usize, seed: u64) -> Result<ScenarioView, JsError> {
    scenario_view(class, sample, seed).map_err(js)
}

#[wasm_bindgen]
pub struct WeibullView {
    alpha: f64,
    gamma: f64,
    samples: Vec<f64>,
    xs: Vec<f64>,
    empirical: Vec<f64>,
    fitted: Vec<f64>,
}

#[wasm_bindgen]
impl WeibullView {
    #[wasm_bindgen(getter)]
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[wasm_bindgen(getter)]
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    #[wasm_bindgen(getter)]
    pub fn samples(&self) -> Vec<f64> {
        self.samples.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn xs(&self) -> Vec<f64> {
        self.xs.clone()
    }

    /// Fraction of samples at or below each of `xs`.
    #[wasm_bindgen(getter)]
    pub fn empirical(&self) -> Vec<f64> {
        self.empirical.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn fitted(&self) -> Vec<f64> {
        self.fitted.clone()
    }
}

/// Draws `n` vote counts from Weibull(`alpha`, `gamma`) capped at `trees`,
/// then fits them back. Counts are rounded like real votes.
pub fn weibull_view(alpha: f64, gamma: f64, n: usize, trees: u32, seed: u64) -> vote_osr::Result<WeibullView> {
    let dist = Weibull::new(alpha, gamma)
        .map_err(|e| vote_osr::OsrError::InvalidParameter(format!("weibull: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<f64> = (0..n)
        .map(|_| dist.sample(&mut rng).round().clamp(1.0, trees as f64))
        .collect();
    let fit = fit_weibull(&samples)?;
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let xs: Vec<f64> = (0..=trees).map(f64::from).collect();
    let empirical = xs
        .iter()
        .map(|&x| sorted.partition_point(|&s| s <= x) as f64 / n as f64)
        .collect();
    let fitted = xs.iter().map(|&x| weibull_cdf(x, fit.alpha, fit.gamma)).collect();
    Ok(WeibullView {
        alpha: fit.alpha,
        gamma: fit.gamma,
        samples,
        xs,
        empirical,
        fitted,
    })
}

#[wasm_bindgen]
pub fn fit_sampled_weibull(alpha: f64, gamma: f64, n: usize, trees: u32, seed: u64) -> Result<WeibullView, JsError> {
    weibull_view(alpha, gamma, n, trees, seed).map_err(js)
}

/// Half-width of the square shown by [`OpenSetDemo::decision_map`].
pub const EXTENT: f64 = 6.0;

const CENTERS: [(f64, f64); 3] = [(-2.5, -1.5), (2.5, -1.5), (0.0, 2.5)];

/// A forest and EVT model trained on three Gaussian blobs in the plane.
#[wasm_bindgen]
pub struct OpenSetDemo {
    forest: RandomForest,
    evt: EvtModel,
    points: Vec<f64>,
    labels: Vec<u32>,
}

fn blobs(per_class: usize, spread: f64, rng: &mut ChaCha8Rng) -> vote_osr::Result<(Vec<FeatureVector>, Vec<usize>)> {
    let noise = Normal::new(0.0, spread).map_err(|e| vote_osr::OsrError::InvalidParameter(format!("spread: {e}")))?;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (class, &(cx, cy)) in CENTERS.iter().enumerate() {
        for _ in 0..per_class {
            let x = cx + noise.sample(rng);
            let y = cy + noise.sample(rng);
            features.push(FeatureVector::new(vec![x as f32, y as f32])?);
            labels.push(class);
        }
    }
    Ok((features, labels))
}

impl OpenSetDemo {
    pub fn train(trees: usize, spread: f64, seed: u64) -> vote_osr::Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (train, train_labels) = blobs(150, spread, &mut rng)?;
        let (calib, calib_labels) = blobs(60, spread, &mut rng)?;
        let params = ForestParams {
            features_per_split: Some(2),
            parallel: false,
            ..ForestParams::new(trees, seed)
        };
        let forest = train_forest(&train, &train_labels, &params)?;
        let evt = build_evt_model(&forest, &calib, &calib_labels, &EvtParams::default())?;
        let points = train.iter().flat_map(|f| f.values().iter().map(|&v| v as f64)).collect();
        let labels = train_labels.iter().map(|&l| l as u32).collect();
        Ok(Self {
            forest,
            evt,
            points,
            labels,
        })
    }

    /// Verdict per cell of a `resolution x resolution` raster over
    /// `[-EXTENT, EXTENT]^2`, row 0 at the top: the class or -1 for unknown.
    pub fn verdicts(&self, delta: f64, resolution: usize) -> vote_osr::Result<Vec<i32>> {
        vote_osr::evt::validate_delta(delta)?;
        let step = 2.0 * EXTENT / resolution as f64;
        let mut out = Vec::with_capacity(resolution * resolution);
        for row in 0..resolution {
            let y = EXTENT - (row as f64 + 0.5) * step;
            for col in 0..resolution {
                let x = -EXTENT + (col as f64 + 0.5) * step;
                let q = FeatureVector::new(vec![x as f32, y as f32])?;
                let p = self.evt.predict_with_delta(&self.forest, &q, delta)?;
                out.push(match p.verdict {
                    Verdict::Known(c) => c as i32,
                    Verdict::Unknown => -1,
                });
            }
        }
        Ok(out)
    }
}

#[wasm_bindgen]
impl OpenSetDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(trees: usize, spread: f64, seed: u64) -> Result<OpenSetDemo, JsError> {
        Self::train(trees, spread, seed).map_err(js)
    }

    pub fn decision_map(&self, delta: f64, resolution: usize) -> Result<Vec<i32>, JsError> {
        self.verdicts(delta, resolution).map_err(js)
    }

    /// Training points as interleaved `x, y` pairs.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn labels(&self) -> Vec<u32> {
        self.labels.clone()
    }

    /// Fitted `(alpha, gamma)` per class, flattened.
    #[wasm_bindgen(getter)]
    pub fn weibulls(&self) -> Vec<f64> {
        self.evt.weibulls.iter().flat_map(|w| [w.alpha, w.gamma]).collect()
    }
}
