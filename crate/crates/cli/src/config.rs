//! Run configuration: a flat `section.key = value` file (TOML dotted keys)
//! with command-line overrides applied on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vote_osr::eval::{AblationKind, ProtocolConfig, ProtocolKind, SweepGrid};
use vote_osr::evt::EvtParams;
use vote_osr::features::{ExtractorKind, ExtractorParams};
use vote_osr::forest::{ForestParams, SqrtRounding};
use vote_osr::scenario::{GridConfig, ManeuverClass, SplitRatios, SynthParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub grid: GridSection,
    pub synth: SynthSection,
    pub extractor: ExtractorSection,
    pub forest: ForestSection,
    pub evt: EvtParams,
    pub protocol: ProtocolSection,
    pub ablation: AblationSection,
}


#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Directory receiving every artifact of `run`.
    pub out_dir: PathBuf,
    /// Existing scenario file used instead of generating one.
    pub dataset: Option<PathBuf>,
    /// Externally computed features used instead of extracting them.
    pub features: Option<PathBuf>,
    /// Per-sample class probabilities for the softmax baseline.
    pub softmax: Option<PathBuf>,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("osr-run"),
            dataset: None,
            features: None,
            softmax: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub rows: usize,
    pub cols: usize,
    pub cell_lat: f64,
    pub cell_long: f64,
    pub sensor_range_front: f64,
    pub sensor_range_rear: f64,
    pub occlusion: bool,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = GridConfig::default();
        Self {
            rows: g.rows,
            cols: g.cols,
            cell_lat: g.cell_lat,
            cell_long: g.cell_long,
            sensor_range_front: g.sensor_range_front,
            sensor_range_rear: g.sensor_range_rear,
            occlusion: g.occlusion,
        }
    }
}

impl GridSection {
    pub fn to_grid(&self) -> GridConfig {
        GridConfig {
            sensor_range_front: self.sensor_range_front,
            sensor_range_rear: self.sensor_range_rear,
            occlusion: self.occlusion,
            ..GridConfig::with_cells(self.rows, self.cols, self.cell_lat, self.cell_long)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub classes: Vec<ManeuverClass>,
    pub count_per_class: usize,
    /// Roundabout outlier scenarios added to the dataset.
    pub outliers: usize,
    pub params: SynthParams,
}

impl Default for SynthSection {
    fn default() -> Self {
        Self {
            classes: ManeuverClass::KNOWN.to_vec(),
            count_per_class: 300,
            outliers: 0,
            params: SynthParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractorSection {
    pub kind: ExtractorKind,
    /// Random-projection output dimension.
    pub dim: usize,
    pub projection_seed: u64,
    /// Retained PCA components.
    pub components: usize,
}

impl Default for ExtractorSection {
    fn default() -> Self {
        Self {
            kind: ExtractorKind::RandomProjection,
            dim: 64,
            projection_seed: 0,
            components: 32,
        }
    }
}

impl ExtractorSection {
    pub fn params(&self) -> Result<ExtractorParams> {
        Ok(match self.kind {
            ExtractorKind::Flatten => ExtractorParams::Flatten,
            ExtractorKind::RandomProjection => ExtractorParams::RandomProjection {
                dim: self.dim,
                seed: self.projection_seed,
            },
            ExtractorKind::Pca => ExtractorParams::Pca {
                components: self.components,
            },
            ExtractorKind::External => bail!("extractor.kind = external reads features from paths.features"),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestSection {
    pub trees: usize,
    pub features_per_split: Option<usize>,
    pub rounding: SqrtRounding,
}

impl Default for ForestSection {
    fn default() -> Self {
        Self {
            trees: 200,
            features_per_split: None,
            rounding: SqrtRounding::Nearest,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolSection {
    pub kind: ProtocolKind,
    pub num_known: usize,
    pub known_classes: Vec<usize>,
    pub repeats: usize,
    pub seeds: Vec<u64>,
    pub ratios: SplitRatios,
    pub rf_conf_threshold: f64,
    pub softmax_threshold: f64,
    pub outlier_ratio: f64,
}

impl Default for ProtocolSection {
    fn default() -> Self {
        let p = ProtocolConfig::default();
        Self {
            kind: p.kind,
            num_known: p.num_known,
            known_classes: p.known_classes,
            repeats: p.repeats,
            seeds: p.seeds,
            ratios: p.ratios,
            rf_conf_threshold: p.rf_conf_threshold,
            softmax_threshold: p.softmax_threshold,
            outlier_ratio: p.outlier_ratio,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblationSection {
    /// Sweep run by `run` and the default of `ablate`; none when unset.
    pub kind: Option<AblationKind>,
    /// Comma-separated settings, such as `2:5,4:3,5:2` or `100,200,300`.
    pub grid: String,
}

impl RunConfig {
    /// Parses config text and applies `overrides` (dotted key, TOML value).
    pub fn from_text(text: &str, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let mut table: toml::Table = text.parse().context("config is not valid key = value text")?;
        for (key, value) in overrides {
            set_dotted(&mut table, key, value.clone())?;
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .context("invalid configuration")?;
        Ok(config)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?,
            None => String::new(),
        };
        Self::from_text(&text, overrides)
    }

    /// Checks every value without touching any file.
    pub fn validate(&self) -> Result<()> {
        self.grid.to_grid().validate().context("grid")?;
        self.synth.params.validate().context("synth.params")?;
        if self.synth.classes.is_empty() {
            bail!("synth.classes is empty");
        }
        if let Some(c) = self.synth.classes.iter().find(|c| c.is_outlier()) {
            bail!("synth.classes lists {c}; use synth.outliers for outlier scenarios");
        }
        if self.extractor.kind != ExtractorKind::External {
            match self.extractor.params()? {
                ExtractorParams::RandomProjection { dim: 0, .. } => bail!("extractor.dim must be positive"),
                ExtractorParams::Pca { components: 0 } => bail!("extractor.components must be positive"),
                _ => {}
            }
        }
        self.protocol_config().validate().context("protocol")?;
        if let Some(kind) = self.ablation.kind {
            SweepGrid::parse(kind, &self.ablation.grid).context("ablation.grid")?;
        }
        Ok(())
    }

    pub fn protocol_config(&self) -> ProtocolConfig {
        let p = &self.protocol;
        ProtocolConfig {
            kind: p.kind,
            num_known: p.num_known,
            known_classes: p.known_classes.clone(),
            repeats: p.repeats,
            seeds: p.seeds.clone(),
            seed: self.seed,
            ratios: p.ratios,
            trees: self.forest.trees,
            features_per_split: self.forest.features_per_split,
            rounding: self.forest.rounding,
            evt: self.evt,
            rf_conf_threshold: p.rf_conf_threshold,
            softmax_threshold: p.softmax_threshold,
            outlier_ratio: p.outlier_ratio,
        }
    }

    pub fn forest_params(&self) -> ForestParams {
        ForestParams {
            trees: self.forest.trees,
            seed: self.seed,
            features_per_split: self.forest.features_per_split,
            rounding: self.forest.rounding,
            parallel: true,
        }
    }

    /// Hex SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

fn set_dotted(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).with_context(|| format!("bad key {key:?}"))?;
    let mut current = table;
    for part in parts {
        let entry = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = match entry {
            toml::Value::Table(t) => t,
            _ => bail!("key {key:?}: {part} is not a section"),
        };
    }
    current.insert(last.to_string(), value);
    Ok(())
}

/// Parses `key=value`; the value is read as TOML and falls back to a plain string.
pub fn parse_assignment(text: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = text
        .split_once('=')
        .with_context(|| format!("expected KEY=VALUE, got {text:?}"))?;
    Ok((key.trim().to_string(), parse_value(raw.trim())))
}

pub fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_values() {
        let c = RunConfig::from_text("", &[]).unwrap();
        assert_eq!(c.forest.trees, 200);
        assert_eq!(c.evt.lambda, 0.9);
        assert_eq!(c.evt.delta, 0.5);
        assert_eq!(c.grid.to_grid(), GridConfig::default());
        c.validate().unwrap();
    }

    #[test]
    fn dotted_keys_and_overrides() {
        let text = "seed = 3\nforest.trees = 50\nevt.delta = 0.4\nsynth.classes = [\"ego-following\", \"leader-cutin-left\"]\n";
        let c = RunConfig::from_text(text, &[parse_assignment("forest.trees=75").unwrap()]).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.forest.trees, 75);
        assert_eq!(c.evt.delta, 0.4);
        assert_eq!(c.synth.classes.len(), 2);
        let c = RunConfig::from_text("[protocol]\nkind = \"outlier-addition\"\n", &[]).unwrap();
        assert_eq!(c.protocol.kind, ProtocolKind::OutlierAddition);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::from_text("forest.tres = 5", &[]).is_err());
        let c = RunConfig::from_text("evt.delta = 1.5", &[]).unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_text("protocol.num_known = 1", &[]).unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_text("ablation.kind = \"trees\"\nablation.grid = \"\"", &[]).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.evt.delta = 0.6;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn values_fall_back_to_strings() {
        assert_eq!(parse_value("12"), toml::Value::Integer(12));
        assert_eq!(parse_value("flatten"), toml::Value::String("flatten".into()));
        assert_eq!(parse_value("\"pca\""), toml::Value::String("pca".into()));
    }
}
