//! Open-set evaluation: the macro-averaged F-score, naive threshold
//! baselines, the class-selection and outlier-addition protocols, and
//! hyper-parameter sweeps.

mod ablation;
mod baselines;
mod metrics;
mod protocol;

pub use ablation::{ablation_sweep, AblationKind, AblationRow, AblationTable, SettingSummary, SweepGrid};
pub use baselines::{
    baseline_rf_conf_naive, baseline_softmax_naive, parse_softmax_csv, rf_conf_verdict, softmax_verdict, SoftmaxScores,
};
pub use metrics::{macro_f1, mean_std, outcome_index, ClassScore, F1Report};
pub use protocol::{
    prepare_run, prepare_runs, report_from_runs, run_class_selection, run_outlier_addition, run_protocol, Conventions,
    Corpus, EvalReport, MethodSummary, PreparedRun, ProtocolConfig, ProtocolKind, RunResult, METHOD_EVT,
    METHOD_RF_CONF, METHOD_SOFTMAX, REPORT_SCHEMA_VERSION,
};
