use super::{GridConfig, Occupancy, OccupancyGrid, ScenarioTensor};
use crate::error::{OsrError, Result};

/// Planar pose in a world frame; `heading` in radians from the +x axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self { x, y, heading }
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.heading.is_finite()
    }

    /// Expresses `other` in the frame of `self`.
    fn relative(&self, other: &Pose) -> Pose {
        let (s, c) = self.heading.sin_cos();
        let dx = other.x - self.x;
        let dy = other.y - self.y;
        Pose {
            x: c * dx + s * dy,
            y: -s * dx + c * dy,
            heading: other.heading - self.heading,
        }
    }
}

/// A vehicle's poses sampled every `dt` and its rectangular footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorTrack {
    pub poses: Vec<Pose>,
    /// Extent along the heading, meters.
    pub length: f64,
    /// Extent across the heading, meters.
    pub width: f64,
}

fn window<'a>(poses: &'a [Pose], steps: usize, who: &str) -> Result<&'a [Pose]> {
    if poses.len() < steps {
        return Err(OsrError::InsufficientHorizon {
            required: steps,
            available: poses.len(),
        });
    }
    let w = &poses[poses.len() - steps..];
    if w.iter().any(|p| !p.is_finite()) {
        return Err(OsrError::InvalidTrajectory(format!("non-finite pose in {who}")));
    }
    Ok(w)
}

/// Renders trajectories into an ego-centric scenario tensor.
///
/// Poses are sampled every `config.dt` with the last sample at `t0`; only the
/// last `config.time_steps()` samples are used. A cell is occupied iff its
/// center lies inside an actor footprint. Unoccupied cells beyond the sensing
/// range, or behind an occupied cell along the same row (looking away from
/// the ego), are unknown. Everything else is free.
pub fn render_scenario(
    ego: &[Pose],
    actors: &[ActorTrack],
    config: &GridConfig,
) -> Result<ScenarioTensor> {
    config.validate()?;
    let steps = config.time_steps();
    let ego = window(ego, steps, "ego trajectory")?;
    let mut tracks = Vec::with_capacity(actors.len());
    for (k, a) in actors.iter().enumerate() {
        if !(a.length.is_finite() && a.width.is_finite() && a.length > 0.0 && a.width > 0.0) {
            return Err(OsrError::InvalidTrajectory(format!(
                "actor {k} has invalid extent {}x{}",
                a.length, a.width
            )));
        }
        tracks.push(window(&a.poses, steps, "actor trajectory")?);
    }

    let grids = (0..steps)
        .map(|t| {
            let mut grid = OccupancyGrid::new(config.rows, config.cols);
            for (track, actor) in tracks.iter().zip(actors) {
                let rel = ego[t].relative(&track[t]);
                rasterize(&mut grid, config, &rel, actor.length, actor.width);
            }
            mark_unknown(&mut grid, config);
            grid
        })
        .collect();
    ScenarioTensor::new(*config, grids)
}

/// Marks cells whose centers fall inside the footprint centered at `pose`.
fn rasterize(grid: &mut OccupancyGrid, config: &GridConfig, pose: &Pose, length: f64, width: f64) {
    let (s, c) = pose.heading.sin_cos();
    let (hl, hw) = (length / 2.0, width / 2.0);
    let ext_x = (c * hl).abs() + (s * hw).abs();
    let ext_y = (s * hl).abs() + (c * hw).abs();

    // Column j has center long_offset + (j + 0.5) * cell_long.
    let col_of = |x: f64| (x - config.long_offset) / config.cell_long - 0.5;
    let row_of = |y: f64| (config.span_lat / 2.0 - y) / config.cell_lat - 0.5;
    let j0 = col_of(pose.x - ext_x).ceil().max(0.0);
    let j1 = col_of(pose.x + ext_x).floor().min(config.cols as f64 - 1.0);
    let i0 = row_of(pose.y + ext_y).ceil().max(0.0);
    let i1 = row_of(pose.y - ext_y).floor().min(config.rows as f64 - 1.0);
    if j0 > j1 || i0 > i1 {
        return;
    }
    for i in i0 as usize..=i1 as usize {
        let dy = config.row_center(i) - pose.y;
        for j in j0 as usize..=j1 as usize {
            let dx = config.col_center(j) - pose.x;
            let along = c * dx + s * dy;
            let across = -s * dx + c * dy;
            if along.abs() <= hl && across.abs() <= hw {
                grid.set(i, j, Occupancy::Occupied);
            }
        }
    }
}

fn mark_unknown(grid: &mut OccupancyGrid, config: &GridConfig) {
    let cols = config.cols;
    // First column whose center lies ahead of the ego.
    let front = (0..cols).find(|&j| config.col_center(j) > 0.0).unwrap_or(cols);
    for i in 0..config.rows {
        if config.occlusion {
            let mut shadowed = false;
            for j in front..cols {
                match grid.get(i, j) {
                    Occupancy::Occupied => shadowed = true,
                    _ if shadowed => grid.set(i, j, Occupancy::Unknown),
                    _ => {}
                }
            }
            shadowed = false;
            for j in (0..front).rev() {
                match grid.get(i, j) {
                    Occupancy::Occupied => shadowed = true,
                    _ if shadowed => grid.set(i, j, Occupancy::Unknown),
                    _ => {}
                }
            }
        }
        for j in 0..cols {
            let x = config.col_center(j);
            if (x > config.sensor_range_front || x < -config.sensor_range_rear)
                && grid.get(i, j) != Occupancy::Occupied
            {
                grid.set(i, j, Occupancy::Unknown);
            }
        }
    }
}
