//! Ego-centric space-time occupancy grids.
//!
//! A scenario is a stack of `N_ts` occupancy grids sampled every `dt`
//! seconds over the window ending at the trigger time `t0 = 0`. Each grid has
//! `rows` lateral cells (row 0 is the leftmost) and `cols` longitudinal cells
//! (column 0 is the rearmost).

mod io;
mod render;
mod split;
mod synth;

use std::fmt;
use std::str::FromStr;

pub use io::{decode_scenarios, encode_scenarios, read_scenario_file, write_scenario_file};
pub use render::{render_scenario, ActorTrack, Pose};
pub use split::{split_dataset, split_indices, DatasetSplits, SplitIndices, SplitRatios};
pub use synth::{generate_synthetic_dataset, SynthParams, SyntheticGenerator};

use crate::error::{OsrError, Result};

/// Geometry and timing of the scenario grids.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GridConfig {
    pub rows: usize,
    pub cols: usize,
    /// Lateral extent in meters, centered on the ego.
    pub span_lat: f64,
    /// Longitudinal extent in meters.
    pub span_long: f64,
    pub cell_lat: f64,
    pub cell_long: f64,
    /// Longitudinal coordinate of the grid's rear edge in the ego frame.
    pub long_offset: f64,
    /// Sampling period in seconds.
    pub dt: f64,
    /// Start of the window relative to `t0 = 0` (negative).
    pub t_lb: f64,
    /// Time-headway below which a leader makes a scene relevant.
    pub thw_trigger: f64,
    /// Cells further ahead than this are unobserved.
    pub sensor_range_front: f64,
    /// Cells further behind than this are unobserved.
    pub sensor_range_rear: f64,
    /// Mark cells shadowed by an occupied cell (along its row, away from the ego) as unknown.
    pub occlusion: bool,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rows: 30,
            cols: 200,
            span_lat: 15.0,
            span_long: 200.0,
            cell_lat: 0.5,
            cell_long: 1.0,
            long_offset: -50.0,
            dt: 0.2,
            t_lb: -1.8,
            thw_trigger: 4.0,
            sensor_range_front: 120.0,
            sensor_range_rear: 40.0,
            occlusion: true,
        }
    }
}

fn exact_ratio(num: f64, den: f64) -> Option<usize> {
    let r = num / den;
    let n = r.round();
    ((r - n).abs() < 1e-9 && n >= 1.0).then_some(n as usize)
}

impl GridConfig {
    /// A grid with the given cell counts and sizes and default timing and sensing.
    pub fn with_cells(rows: usize, cols: usize, cell_lat: f64, cell_long: f64) -> Self {
        let span_long = cols as f64 * cell_long;
        Self {
            rows,
            cols,
            span_lat: rows as f64 * cell_lat,
            span_long,
            cell_lat,
            cell_long,
            long_offset: -span_long / 4.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.span_lat,
            self.span_long,
            self.cell_lat,
            self.cell_long,
            self.long_offset,
            self.dt,
            self.t_lb,
            self.thw_trigger,
            self.sensor_range_front,
            self.sensor_range_rear,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(OsrError::InvalidConfig("non-finite grid parameter".into()));
        }
        if self.cell_lat <= 0.0 || self.cell_long <= 0.0 || self.dt <= 0.0 {
            return Err(OsrError::InvalidConfig(
                "cell sizes and dt must be positive".into(),
            ));
        }
        if exact_ratio(self.span_lat, self.cell_lat) != Some(self.rows) {
            return Err(OsrError::InvalidConfig(format!(
                "rows {} != span_lat {} / cell_lat {}",
                self.rows, self.span_lat, self.cell_lat
            )));
        }
        if exact_ratio(self.span_long, self.cell_long) != Some(self.cols) {
            return Err(OsrError::InvalidConfig(format!(
                "cols {} != span_long {} / cell_long {}",
                self.cols, self.span_long, self.cell_long
            )));
        }
        if self.t_lb > 0.0 {
            return Err(OsrError::InvalidConfig("t_lb must not be positive".into()));
        }
        let steps = -self.t_lb / self.dt;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(OsrError::InvalidConfig(format!(
                "window {} s is not a whole number of {} s steps",
                -self.t_lb, self.dt
            )));
        }
        Ok(())
    }

    /// Number of grids per scenario, `1 + (t0 - t_lb) / dt`.
    pub fn time_steps(&self) -> usize {
        1 + (-self.t_lb / self.dt).round() as usize
    }

    /// Sample instants, oldest first, ending at `t0 = 0`.
    pub fn sample_times(&self) -> Vec<f64> {
        let n = self.time_steps();
        (0..n).map(|k| -((n - 1 - k) as f64) * self.dt).collect()
    }

    /// `(rows, cols, time steps)`.
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.time_steps())
    }

    pub fn cells_per_grid(&self) -> usize {
        self.rows * self.cols
    }

    pub fn cells_per_tensor(&self) -> usize {
        self.cells_per_grid() * self.time_steps()
    }

    /// Lateral coordinate (left positive) of the center of row `i`.
    pub fn row_center(&self, i: usize) -> f64 {
        self.span_lat / 2.0 - (i as f64 + 0.5) * self.cell_lat
    }

    /// Longitudinal coordinate of the center of column `j`.
    pub fn col_center(&self, j: usize) -> f64 {
        self.long_offset + (j as f64 + 0.5) * self.cell_long
    }
}

/// Value of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[repr(u8)]
pub enum Occupancy {
    #[default]
    Free = 0,
    Unknown = 1,
    Occupied = 2,
}

impl Occupancy {
    pub fn value(self) -> f32 {
        match self {
            Occupancy::Free => 0.0,
            Occupancy::Unknown => 0.5,
            Occupancy::Occupied => 1.0,
        }
    }

    pub fn from_value(v: f32) -> Option<Self> {
        if v == 0.0 {
            Some(Occupancy::Free)
        } else if v == 0.5 {
            Some(Occupancy::Unknown)
        } else if v == 1.0 {
            Some(Occupancy::Occupied)
        } else {
            None
        }
    }
}

/// One `rows x cols` occupancy grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OccupancyGrid {
    rows: usize,
    cols: usize,
    cells: Vec<Occupancy>,
}

impl OccupancyGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, Occupancy::Free)
    }

    pub fn filled(rows: usize, cols: usize, value: Occupancy) -> Self {
        Self {
            rows,
            cols,
            cells: vec![value; rows * cols],
        }
    }

    pub fn from_cells(rows: usize, cols: usize, cells: Vec<Occupancy>) -> Result<Self> {
        if cells.len() != rows * cols {
            return Err(OsrError::LengthMismatch {
                what: "grid cells",
                left: cells.len(),
                right: rows * cols,
            });
        }
        Ok(Self { rows, cols, cells })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Occupancy {
        self.cells[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Occupancy) {
        self.cells[row * self.cols + col] = value;
    }

    pub fn cells(&self) -> &[Occupancy] {
        &self.cells
    }

    pub fn count(&self, value: Occupancy) -> usize {
        self.cells.iter().filter(|&&c| c == value).count()
    }
}

/// `N_ts` grids, oldest first, sharing one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTensor {
    config: GridConfig,
    grids: Vec<OccupancyGrid>,
}

impl ScenarioTensor {
    pub fn new(config: GridConfig, grids: Vec<OccupancyGrid>) -> Result<Self> {
        if grids.len() != config.time_steps() {
            return Err(OsrError::LengthMismatch {
                what: "grids per tensor",
                left: grids.len(),
                right: config.time_steps(),
            });
        }
        if let Some(g) = grids
            .iter()
            .find(|g| g.rows != config.rows || g.cols != config.cols)
        {
            return Err(OsrError::ShapeMismatch {
                expected: config.shape(),
                actual: (g.rows, g.cols, grids.len()),
            });
        }
        Ok(Self { config, grids })
    }

    /// A tensor with every cell set to `value`.
    pub fn filled(config: GridConfig, value: Occupancy) -> Self {
        let grids = (0..config.time_steps())
            .map(|_| OccupancyGrid::filled(config.rows, config.cols, value))
            .collect();
        Self { config, grids }
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    pub fn grids(&self) -> &[OccupancyGrid] {
        &self.grids
    }

    pub fn grids_mut(&mut self) -> &mut [OccupancyGrid] {
        &mut self.grids
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.config.rows, self.config.cols, self.grids.len())
    }

    /// Cells in time-major, then row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Occupancy> + '_ {
        self.grids.iter().flat_map(|g| g.cells.iter().copied())
    }

    pub fn flat_values(&self) -> Vec<f32> {
        self.cells().map(Occupancy::value).collect()
    }
}

/// The seven known highway classes plus the out-of-distribution class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ManeuverClass {
    EgoFollowing,
    EgoLeftLaneChange,
    EgoRightLaneChange,
    LeaderCutinLeft,
    LeaderCutinRight,
    LeaderCutoutLeft,
    LeaderCutoutRight,
    Outlier,
}

impl ManeuverClass {
    pub const KNOWN: [ManeuverClass; 7] = [
        ManeuverClass::EgoFollowing,
        ManeuverClass::EgoLeftLaneChange,
        ManeuverClass::EgoRightLaneChange,
        ManeuverClass::LeaderCutinLeft,
        ManeuverClass::LeaderCutinRight,
        ManeuverClass::LeaderCutoutLeft,
        ManeuverClass::LeaderCutoutRight,
    ];

    pub const ALL: [ManeuverClass; 8] = [
        ManeuverClass::EgoFollowing,
        ManeuverClass::EgoLeftLaneChange,
        ManeuverClass::EgoRightLaneChange,
        ManeuverClass::LeaderCutinLeft,
        ManeuverClass::LeaderCutinRight,
        ManeuverClass::LeaderCutoutLeft,
        ManeuverClass::LeaderCutoutRight,
        ManeuverClass::Outlier,
    ];

    /// 0..=6 for the known classes, 7 for [`ManeuverClass::Outlier`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Index among the known classes, `None` for the outlier class.
    pub fn known_index(self) -> Option<usize> {
        (!self.is_outlier()).then_some(self.index())
    }

    pub fn is_outlier(self) -> bool {
        self == ManeuverClass::Outlier
    }

    pub fn name(self) -> &'static str {
        match self {
            ManeuverClass::EgoFollowing => "ego-following",
            ManeuverClass::EgoLeftLaneChange => "ego-left-lane-change",
            ManeuverClass::EgoRightLaneChange => "ego-right-lane-change",
            ManeuverClass::LeaderCutinLeft => "leader-cutin-left",
            ManeuverClass::LeaderCutinRight => "leader-cutin-right",
            ManeuverClass::LeaderCutoutLeft => "leader-cutout-left",
            ManeuverClass::LeaderCutoutRight => "leader-cutout-right",
            ManeuverClass::Outlier => "outlier",
        }
    }
}

impl fmt::Display for ManeuverClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ManeuverClass {
    type Err = OsrError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| OsrError::InvalidParameter(format!("unknown class name {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScenario {
    pub tensor: ScenarioTensor,
    pub label: ManeuverClass,
    /// Seed the generator used for this sample; 0 when loaded from a file.
    pub seed: u64,
}
