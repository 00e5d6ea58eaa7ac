//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Weibull};

use vote_osr::eval::{
    ablation_sweep, macro_f1, prepare_runs, report_from_runs, Corpus, PreparedRun, ProtocolConfig, SweepGrid,
    METHOD_EVT, METHOD_RF_CONF,
};
use vote_osr::evt::{
    decode_evt_model, encode_evt_model, fit_weibull, log_likelihood, weibull_cdf, EvtModel, Verdict, WeibullModel,
};
use vote_osr::features::{decode_feature_file, encode_feature_file, ExtractorParams, FeatureSet, FeatureVector};
use vote_osr::forest::{confidence, decode_forest, encode_forest, train_forest, ForestParams};
use vote_osr::scenario::{
    decode_scenarios, encode_scenarios, generate_synthetic_dataset, GridConfig, ManeuverClass, SynthParams,
};

const WEIBULL_REL_TOL: f64 = 0.02;
const WEIBULL_SAMPLES: usize = 100_000;
const WEIBULL_FIT_BUDGET: Duration = Duration::from_secs(1);
const CDF_AT_SCALE_TOL: f64 = 1e-12;
const CONFIDENCE_SUM_TOL: f64 = 1e-12;
const OOB_MIN: f64 = 0.95;
const SEED_SETS: u64 = 5;
const SEED_SETS_REQUIRED: usize = 4;
const ORDERING_BUDGET: Duration = Duration::from_secs(600);
const TREES_SPREAD_MAX: f64 = 0.05;
const DELTA_SPREAD_MAX: f64 = 0.10;
const SAMPLES_PER_CLASS: usize = 300;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn weibull_recovery() -> Outcome {
    let mut details = Vec::new();
    let mut pass = true;
    for (i, &(alpha, gamma)) in [(100.0, 5.0), (50.0, 1.0), (180.0, 12.0)].iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i as u64);
        let dist = Weibull::new(alpha, gamma).unwrap();
        let xs: Vec<f64> = (0..WEIBULL_SAMPLES).map(|_| dist.sample(&mut rng)).collect();
        let start = Instant::now();
        let fit = fit_weibull(&xs).unwrap();
        let elapsed = start.elapsed();
        let ea = (fit.alpha - alpha).abs() / alpha;
        let eg = (fit.gamma - gamma).abs() / gamma;
        // Likelihood oracle: no point of a 200x200 grid around the truth beats the fit.
        let best = fit.log_likelihood;
        let mut grid_best = f64::NEG_INFINITY;
        for a in 0..200 {
            for g in 0..200 {
                let ga = alpha * (0.9 + 0.2 * a as f64 / 199.0);
                let gg = gamma * (0.9 + 0.2 * g as f64 / 199.0);
                grid_best = grid_best.max(log_likelihood(&xs, ga, gg));
            }
        }
        let dominates = best >= grid_best - 1e-9 * best.abs();
        let ok = ea < WEIBULL_REL_TOL && eg < WEIBULL_REL_TOL && elapsed < WEIBULL_FIT_BUDGET && dominates;
        pass &= ok;
        details.push(format!(
            "({alpha},{gamma}) -> ({:.3},{:.4}) err ({:.2}%,{:.2}%) {:.0?} grid-dominated {dominates}",
            fit.alpha,
            fit.gamma,
            100.0 * ea,
            100.0 * eg,
            elapsed
        ));
    }
    outcome(pass, details.join("; "))
}

fn cdf_checks() -> Outcome {
    let zero = weibull_cdf(0.0, 150.0, 10.0) == 0.0;
    let at_scale = [(1.0, 0.5), (150.0, 10.0), (37.5, 3.0)]
        .iter()
        .map(|&(a, g)| (weibull_cdf(a, a, g) - (1.0 - (-1.0f64).exp())).abs())
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut monotone = 0;
    for _ in 0..1000 {
        let alpha = rng.random_range(1.0..300.0);
        let gamma = rng.random_range(0.5..12.0);
        let s = alpha * rng.random_range(0.05..1.2);
        let s2 = s * rng.random_range(1.001..1.01);
        if weibull_cdf(s, alpha, gamma) < weibull_cdf(s2, alpha, gamma) {
            monotone += 1;
        }
    }
    outcome(
        zero && at_scale < CDF_AT_SCALE_TOL && monotone == 1000,
        format!("cdf(0)=0 {zero}; |cdf(alpha)-(1-1/e)| max {at_scale:.1e}; strictly increasing {monotone}/1000"),
    )
}

fn blobs(n_per: usize, classes: usize, dim: usize, seed: u64) -> (Vec<FeatureVector>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for c in 0..classes {
        for _ in 0..n_per {
            let v: Vec<f32> = (0..dim)
                .map(|d| {
                    let center = if d % classes == c { 6.0 } else { 0.0 };
                    center + noise.sample(&mut rng) as f32
                })
                .collect();
            xs.push(FeatureVector::new(v).unwrap());
            ys.push(c);
        }
    }
    (xs, ys)
}

fn vote_invariants() -> Outcome {
    let (x, y) = blobs(60, 3, 6, 11);
    let forest = train_forest(&x, &y, &ForestParams::new(200, 5)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut sums_ok, mut conf_ok, mut argmax_ok) = (0, 0, 0);
    for _ in 0..1000 {
        let q = FeatureVector::new((0..6).map(|_| rng.random_range(-8.0f32..12.0)).collect()).unwrap();
        let votes = forest.vote(&q).unwrap();
        sums_ok += usize::from(votes.total() as usize == forest.num_trees());
        let conf = confidence(&votes, forest.num_trees());
        conf_ok += usize::from((conf.iter().sum::<f64>() - 1.0).abs() < CONFIDENCE_SUM_TOL && conf.iter().all(|c| (0.0..=1.0).contains(c)));
        argmax_ok += usize::from(forest.classify_closed(&q).unwrap() == votes.argmax());
    }
    outcome(
        sums_ok == 1000 && conf_ok == 1000 && argmax_ok == 1000,
        format!("vote sum = B {sums_ok}/1000; confidences sum to 1 {conf_ok}/1000; closed-set = argmax {argmax_ok}/1000"),
    )
}

fn forest_sanity() -> Outcome {
    let (x, y) = blobs(200, 2, 2, 21);
    let serial = ForestParams {
        parallel: false,
        ..ForestParams::new(50, 99)
    };
    let parallel = ForestParams {
        parallel: true,
        ..serial.clone()
    };
    let a = train_forest(&x, &y, &serial).unwrap();
    let b = train_forest(&x, &y, &parallel).unwrap();
    let oob = a.oob_accuracy(&x, &y).unwrap();
    let identical = encode_forest(&a) == encode_forest(&b);
    outcome(
        oob > OOB_MIN && identical,
        format!("OOB accuracy {oob:.4} (B=50); serial and parallel bytes identical {identical}"),
    )
}

/// Synthetic 7-class highway corpus on a 15 x 50 grid of 1 m x 4 m cells,
/// flattened into features.
fn synthetic_corpus() -> Corpus {
    let counts: BTreeMap<ManeuverClass, usize> =
        ManeuverClass::KNOWN.iter().map(|&c| (c, SAMPLES_PER_CLASS)).collect();
    let grid = GridConfig::with_cells(15, 50, 1.0, 4.0);
    let data = generate_synthetic_dataset(&counts, &grid, &SynthParams::default(), 2024).unwrap();
    Corpus::from_scenarios(data, ExtractorParams::Flatten).unwrap()
}

fn seed_set_config(set: u64) -> ProtocolConfig {
    ProtocolConfig {
        seed: 100 + set,
        ..ProtocolConfig::default()
    }
}

fn ordering(corpus: &Corpus, runs: &[Vec<PreparedRun>], elapsed: Duration) -> Outcome {
    let mut wins = 0;
    let mut parts = Vec::new();
    for (set, prepared) in runs.iter().enumerate() {
        let cfg = seed_set_config(set as u64);
        let report = report_from_runs(corpus, &cfg, prepared, cfg.evt.delta).unwrap();
        let evt = report.method(METHOD_EVT).unwrap();
        let rf = report.method(METHOD_RF_CONF).unwrap();
        wins += usize::from(evt.mean > rf.mean);
        parts.push(format!("{:.3}±{:.3} vs {:.3}±{:.3}", evt.mean, evt.std, rf.mean, rf.std));
    }
    outcome(
        wins >= SEED_SETS_REQUIRED && elapsed < ORDERING_BUDGET,
        format!(
            "EVT > RF-conf in {wins}/{SEED_SETS} seed sets [{}]; {:.1?}",
            parts.join(", "),
            elapsed
        ),
    )
}

fn mean_evt(runs: &[PreparedRun], delta: f64) -> f64 {
    runs.iter().map(|r| r.evt_score(delta).unwrap().macro_f1).sum::<f64>() / runs.len() as f64
}

fn ratio_trend(corpus: &Corpus, four_known: &[Vec<PreparedRun>]) -> Outcome {
    let mut ordered = 0;
    let mut parts = Vec::new();
    for set in 0..SEED_SETS {
        let cfg = seed_set_config(set);
        let mean_at = |k: usize| {
            let runs = prepare_runs(corpus, &ProtocolConfig { num_known: k, ..cfg.clone() }).unwrap();
            mean_evt(&runs, cfg.evt.delta)
        };
        let (f2, f4, f5) = (mean_at(2), mean_evt(&four_known[set as usize], cfg.evt.delta), mean_at(5));
        ordered += usize::from(f5 >= f4 && f4 >= f2);
        parts.push(format!("{f5:.3}/{f4:.3}/{f2:.3}"));
    }
    outcome(
        ordered >= SEED_SETS_REQUIRED,
        format!("5:2 >= 4:3 >= 2:5 in {ordered}/{SEED_SETS} seed sets [{}]", parts.join(", ")),
    )
}

fn trees_insensitivity(corpus: &Corpus) -> Outcome {
    let table = ablation_sweep(corpus, &SweepGrid::Trees(vec![100, 200, 300, 400, 500]), &seed_set_config(0)).unwrap();
    let means = table.means();
    let spread = means.iter().cloned().fold(f64::MIN, f64::max) - means.iter().cloned().fold(f64::MAX, f64::min);
    outcome(
        spread < TREES_SPREAD_MAX,
        format!(
            "B=100..500 means [{}] spread {spread:.4}",
            means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn delta_robustness(runs: &[PreparedRun]) -> Outcome {
    let means: Vec<f64> = [0.3, 0.4, 0.5, 0.6, 0.7].iter().map(|&d| mean_evt(runs, d)).collect();
    let spread = means.iter().cloned().fold(f64::MIN, f64::max) - means.iter().cloned().fold(f64::MAX, f64::min);
    outcome(
        spread < DELTA_SPREAD_MAX,
        format!(
            "delta=0.3..0.7 means [{}] spread {spread:.4}",
            means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

/// Macro-F1 by direct counting over the sample list for every outcome class.
fn brute_force_macro_f1(pred: &[usize], truth: &[usize], classes: usize) -> f64 {
    let mut sum = 0.0;
    let mut present = 0usize;
    for c in 0..classes {
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for (&p, &t) in pred.iter().zip(truth) {
            match (p == c, t == c) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
        if tp + fp + fn_ == 0 {
            continue;
        }
        present += 1;
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        if precision + recall > 0.0 {
            sum += 2.0 * precision * recall / (precision + recall);
        }
    }
    if present == 0 {
        0.0
    } else {
        sum / present as f64
    }
}

fn macro_f1_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut exact = 0;
    for _ in 0..100 {
        let k = rng.random_range(2..=6usize);
        let n = rng.random_range(1..=80usize);
        let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..=k)).collect();
        let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..=k)).collect();
        let verdicts: Vec<Verdict> = pred.iter().map(|&p| if p == k { Verdict::Unknown } else { Verdict::Known(p) }).collect();
        let labels: Vec<Option<usize>> = truth.iter().map(|&t| (t < k).then_some(t)).collect();
        let report = macro_f1(&verdicts, &labels, k).unwrap();
        exact += usize::from(report.macro_f1 == brute_force_macro_f1(&pred, &truth, k + 1));
    }
    outcome(exact == 100, format!("bitwise equal on {exact}/100 random vectors"))
}

fn truncations_fail<T>(bytes: &[u8], decode: impl Fn(&[u8]) -> vote_osr::Result<T>) -> (usize, usize) {
    let mut structured = 0;
    for cut in 0..bytes.len() {
        if let Ok(Err(_)) = catch_unwind(AssertUnwindSafe(|| decode(&bytes[..cut]))) {
            structured += 1;
        }
    }
    (structured, bytes.len())
}

fn flips_never_panic<T>(bytes: &[u8], decode: impl Fn(&[u8]) -> vote_osr::Result<T>, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut panics = 0;
    for _ in 0..300 {
        let mut b = bytes.to_vec();
        for _ in 0..rng.random_range(1..4) {
            let i = rng.random_range(0..b.len());
            b[i] = rng.random();
        }
        if rng.random_bool(0.3) {
            b.truncate(rng.random_range(0..b.len()));
        }
        panics += usize::from(catch_unwind(AssertUnwindSafe(|| decode(&b))).is_err());
    }
    panics
}

fn file_formats() -> Outcome {
    let grid = GridConfig::with_cells(6, 12, 2.5, 8.0);
    let counts = BTreeMap::from([(ManeuverClass::EgoFollowing, 3), (ManeuverClass::Outlier, 2)]);
    let scenarios = generate_synthetic_dataset(&counts, &grid, &SynthParams::default(), 5).unwrap();
    let osrg = encode_scenarios(&scenarios).unwrap();
    let back = decode_scenarios(&osrg, &grid).unwrap();
    let scen_ok = back.len() == scenarios.len()
        && back.iter().zip(&scenarios).all(|(a, b)| a.tensor == b.tensor && a.label == b.label);

    let (x, y) = blobs(20, 3, 4, 8);
    let labels: Vec<Option<u32>> = y.iter().enumerate().map(|(i, &c)| (i % 7 != 0).then_some(c as u32)).collect();
    let set = FeatureSet::new(x.clone(), labels).unwrap();
    let osrf = encode_feature_file(&set).unwrap();
    let feat_ok = decode_feature_file(&osrf).unwrap() == set;

    let forest = train_forest(&x, &y, &ForestParams::new(12, 3)).unwrap();
    let osrt = encode_forest(&forest);
    let forest_back = decode_forest(&osrt).unwrap();
    let forest_ok = encode_forest(&forest_back) == osrt
        && x.iter().all(|q| forest.vote(q).unwrap() == forest_back.vote(q).unwrap());

    let model = EvtModel {
        weibulls: (0..3)
            .map(|class| WeibullModel {
                class,
                alpha: 150.0 + class as f64 * 0.1,
                gamma: 7.25,
                tail_size: 11,
            })
            .collect(),
        lambda: 0.9,
        delta: 0.5,
        trees: 12,
    };
    let osre = encode_evt_model(&model);
    let evt_ok = decode_evt_model(&osre).unwrap() == model;

    let checks = [
        truncations_fail(&osrg, |b| decode_scenarios(b, &grid)),
        truncations_fail(&osrf, decode_feature_file),
        truncations_fail(&osrt, decode_forest),
        truncations_fail(&osre, decode_evt_model),
    ];
    let panics = flips_never_panic(&osrg, |b| decode_scenarios(b, &grid), 1)
        + flips_never_panic(&osrf, decode_feature_file, 2)
        + flips_never_panic(&osrt, decode_forest, 3)
        + flips_never_panic(&osre, decode_evt_model, 4);
    let truncated_ok = checks.iter().all(|(s, n)| s == n);
    outcome(
        scen_ok && feat_ok && forest_ok && evt_ok && truncated_ok && panics == 0,
        format!(
            "round trips scenario {scen_ok} feature {feat_ok} forest {forest_ok} evt {evt_ok}; \
             truncations rejected {}; corrupted inputs panicking {panics}/1200",
            checks.iter().map(|(s, n)| format!("{s}/{n}")).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    let mut report = |name: &'static str, o: Outcome| {
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, o));
    };

    report("weibull MLE recovery", weibull_recovery());
    report("CDF analytic checks", cdf_checks());
    report("vote and confidence invariants", vote_invariants());
    report("forest sanity", forest_sanity());

    let start = Instant::now();
    let corpus = synthetic_corpus();
    let four_known: Vec<Vec<PreparedRun>> = (0..SEED_SETS)
        .map(|set| prepare_runs(&corpus, &seed_set_config(set)).unwrap())
        .collect();
    let elapsed = start.elapsed();
    report("EVT beats RF-conf ordering", ordering(&corpus, &four_known, elapsed));
    report("known:unknown ratio trend", ratio_trend(&corpus, &four_known));
    report("tree-count insensitivity", trees_insensitivity(&corpus));
    report("delta robustness", delta_robustness(&four_known[0]));
    report("macro-F1 oracle", macro_f1_oracle());
    report("file formats", file_formats());

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
