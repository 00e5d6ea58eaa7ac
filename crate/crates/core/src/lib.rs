//! Vote-based open-set recognition for traffic scenarios.
//!
//! A random forest is trained on feature vectors extracted from ego-centric
//! occupancy-grid scenarios. On held-out calibration data, the number of
//! trees voting for the correct class is collected per class and the low tail
//! of each of those vote distributions is modelled by a two-parameter Weibull
//! distribution. At prediction time a sample is rejected for class `i` when
//! the Weibull CDF of its class-`i` vote count falls below a threshold `delta`;
//! a sample rejected for every known class is reported as unknown.
//!
//! The crate is organised along the processing chain:
//!
//! * [`scenario`] - grid configuration, rendering of trajectories into
//!   occupancy tensors, a synthetic scenario generator and dataset splitting.
//! * [`features`] - feature extractors and the feature file format.
//! * [`forest`] - a from-scratch random forest producing per-class votes.
//! * [`evt`] - vote-set collection, Weibull fitting and open-set prediction.
//! * [`eval`] - macro F-score, baselines, evaluation protocols and ablations.

pub mod binio;
pub mod error;
pub mod eval;
pub mod evt;
pub mod features;
pub mod forest;
pub mod scenario;
mod seed;

pub use error::{FormatError, OsrError, Result};
pub use evt::{EvtModel, OpenSetPrediction, Verdict, WeibullModel};
pub use features::{FeatureExtractor, FeatureVector};
pub use forest::{RandomForest, VoteRecord};
pub use scenario::{GridConfig, LabeledScenario, ManeuverClass, ScenarioTensor};
