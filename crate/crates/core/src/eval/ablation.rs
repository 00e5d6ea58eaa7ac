use std::fmt::Write;

use rayon::prelude::*;

use super::metrics::mean_std;
use super::protocol::{prepare_runs, Corpus, ProtocolConfig, ProtocolKind};
use crate::error::{OsrError, Result};
use crate::evt::validate_delta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationKind {
    Ratio,
    Delta,
    Trees,
}

impl std::str::FromStr for AblationKind {
    type Err = OsrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ratio" => Ok(Self::Ratio),
            "delta" => Ok(Self::Delta),
            "trees" => Ok(Self::Trees),
            _ => Err(OsrError::InvalidParameter(format!("unknown ablation kind {s:?}"))),
        }
    }
}

/// Settings of one sweep.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum SweepGrid {
    /// Numbers of known classes.
    Ratio(Vec<usize>),
    Delta(Vec<f64>),
    Trees(Vec<usize>),
}

impl SweepGrid {
    pub fn kind(&self) -> AblationKind {
        match self {
            Self::Ratio(_) => AblationKind::Ratio,
            Self::Delta(_) => AblationKind::Delta,
            Self::Trees(_) => AblationKind::Trees,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Self::Ratio(v) | Self::Trees(v) => v.len(),
            Self::Delta(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Parses a comma-separated grid. Ratio entries are `known:unknown`
    /// pairs or plain known-class counts.
    pub fn parse(kind: AblationKind, text: &str) -> Result<Self> {
        let items: Vec<&str> = text.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        let bad = |item: &str| OsrError::InvalidParameter(format!("bad grid entry {item:?}"));
        let grid = match kind {
            AblationKind::Ratio => Self::Ratio(
                items
                    .iter()
                    .map(|&item| {
                        let known = item.split_once(':').map_or(item, |(k, _)| k);
                        known.trim().parse().map_err(|_| bad(item))
                    })
                    .collect::<Result<_>>()?,
            ),
            AblationKind::Delta => Self::Delta(
                items
                    .iter()
                    .map(|&item| item.parse().map_err(|_| bad(item)))
                    .collect::<Result<_>>()?,
            ),
            AblationKind::Trees => Self::Trees(
                items
                    .iter()
                    .map(|&item| item.parse().map_err(|_| bad(item)))
                    .collect::<Result<_>>()?,
            ),
        };
        if grid.is_empty() {
            return Err(OsrError::InvalidParameter("empty sweep grid".into()));
        }
        Ok(grid)
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AblationRow {
    pub setting: String,
    pub run: usize,
    pub macro_f1: f64,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SettingSummary {
    pub setting: String,
    pub scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AblationTable {
    pub kind: AblationKind,
    pub settings: Vec<SettingSummary>,
}

impl AblationTable {
    pub fn rows(&self) -> Vec<AblationRow> {
        self.settings
            .iter()
            .flat_map(|s| {
                s.scores.iter().enumerate().map(|(run, &f)| AblationRow {
                    setting: s.setting.clone(),
                    run,
                    macro_f1: f,
                    mean: s.mean,
                    std: s.std,
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("setting,run,macro_f1,mean,std\n");
        for r in self.rows() {
            writeln!(out, "{},{},{},{},{}", r.setting, r.run, r.macro_f1, r.mean, r.std).expect("string write");
        }
        out
    }

    pub fn means(&self) -> Vec<f64> {
        self.settings.iter().map(|s| s.mean).collect()
    }
}

fn summarize(setting: String, scores: Vec<f64>) -> SettingSummary {
    let (mean, std) = mean_std(&scores);
    SettingSummary {
        setting,
        scores,
        mean,
        std,
    }
}

/// Reruns class selection for every grid setting and records the EVT macro-F1
/// per repeat. A delta sweep reuses one set of trained runs.
pub fn ablation_sweep(corpus: &Corpus, grid: &SweepGrid, base: &ProtocolConfig) -> Result<AblationTable> {
    if grid.is_empty() {
        return Err(OsrError::InvalidParameter("empty sweep grid".into()));
    }
    let base = ProtocolConfig {
        kind: ProtocolKind::ClassSelection,
        known_classes: Vec::new(),
        ..base.clone()
    };
    let total = corpus.classes().len();
    let settings = match grid {
        SweepGrid::Delta(deltas) => {
            for &d in deltas {
                validate_delta(d)?;
            }
            let runs = prepare_runs(corpus, &base)?;
            deltas
                .iter()
                .map(|&d| {
                    let scores = runs
                        .iter()
                        .map(|r| r.evt_score(d).map(|s| s.macro_f1))
                        .collect::<Result<Vec<_>>>()?;
                    Ok(summarize(format!("{d}"), scores))
                })
                .collect::<Result<Vec<_>>>()?
        }
        SweepGrid::Ratio(known) => known
            .par_iter()
            .map(|&k| {
                let config = ProtocolConfig {
                    num_known: k,
                    ..base.clone()
                };
                let runs = prepare_runs(corpus, &config)?;
                let scores = runs
                    .iter()
                    .map(|r| r.evt_score(config.evt.delta).map(|s| s.macro_f1))
                    .collect::<Result<Vec<_>>>()?;
                Ok(summarize(format!("{k}:{}", total.saturating_sub(k)), scores))
            })
            .collect::<Result<Vec<_>>>()?,
        SweepGrid::Trees(trees) => trees
            .par_iter()
            .map(|&b| {
                let config = ProtocolConfig {
                    trees: b,
                    ..base.clone()
                };
                let runs = prepare_runs(corpus, &config)?;
                let scores = runs
                    .iter()
                    .map(|r| r.evt_score(config.evt.delta).map(|s| s.macro_f1))
                    .collect::<Result<Vec<_>>>()?;
                Ok(summarize(b.to_string(), scores))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(AblationTable {
        kind: grid.kind(),
        settings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(
            SweepGrid::parse(AblationKind::Ratio, "2:5, 4:3,5").unwrap(),
            SweepGrid::Ratio(vec![2, 4, 5])
        );
        assert_eq!(
            SweepGrid::parse(AblationKind::Delta, "0.3,0.5").unwrap(),
            SweepGrid::Delta(vec![0.3, 0.5])
        );
        assert!(SweepGrid::parse(AblationKind::Trees, "").is_err());
        assert!(SweepGrid::parse(AblationKind::Trees, "100,x").is_err());
    }

    #[test]
    fn csv_layout() {
        let table = AblationTable {
            kind: AblationKind::Trees,
            settings: vec![summarize("100".into(), vec![0.5, 0.7])],
        };
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "setting,run,macro_f1,mean,std");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("100,0,0.5,0.6,"));
    }
}
