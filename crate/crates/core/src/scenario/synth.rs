//! Template-based synthetic traffic scenarios.
//!
//! World frame: the road runs along +x, lanes are centered at `y = k * lane_width`
//! with the ego starting in lane 0, and `t0 = 0` is the trigger time at which the
//! relevant leader is within the time-headway trigger. Outlier scenes put all
//! vehicles on a roundabout, so the ego-frame picture rotates and curves in a
//! way none of the highway templates do.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::render::{render_scenario, ActorTrack, Pose};
use super::{GridConfig, LabeledScenario, ManeuverClass};
use crate::error::{OsrError, Result};
use crate::seed;

/// Randomization ranges of the generator.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthParams {
    pub lane_width: f64,
    /// Ego speed range, m/s.
    pub speed: (f64, f64),
    /// Std-dev of other vehicles' speed around the ego speed, m/s.
    pub speed_spread: f64,
    /// Time headway of the relevant leader at `t0`, seconds.
    pub thw: (f64, f64),
    /// Duration of lane changes, cut-ins and cut-outs.
    pub lane_change_duration: (f64, f64),
    /// Std-dev of each vehicle's constant lateral offset from its lane center.
    pub lateral_jitter: f64,
    /// Upper bound (inclusive) on additional vehicles in the grid.
    pub max_background: usize,
    pub vehicle_length: (f64, f64),
    pub vehicle_width: (f64, f64),
    /// Speed range on the roundabout, m/s.
    pub roundabout_speed: (f64, f64),
    /// Ring radius range of the roundabout, m.
    pub roundabout_radius: (f64, f64),
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            lane_width: 3.75,
            speed: (20.0, 35.0),
            speed_spread: 1.5,
            thw: (0.5, 4.0),
            lane_change_duration: (1.0, 1.8),
            lateral_jitter: 0.2,
            max_background: 3,
            vehicle_length: (4.0, 5.5),
            vehicle_width: (1.7, 2.0),
            roundabout_speed: (5.0, 12.0),
            roundabout_radius: (15.0, 40.0),
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("speed", self.speed),
            ("thw", self.thw),
            ("lane_change_duration", self.lane_change_duration),
            ("vehicle_length", self.vehicle_length),
            ("vehicle_width", self.vehicle_width),
            ("roundabout_speed", self.roundabout_speed),
            ("roundabout_radius", self.roundabout_radius),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(OsrError::InvalidConfig(format!(
                    "synthetic range {name} = ({lo}, {hi}) must satisfy 0 < lo <= hi"
                )));
            }
        }
        if !(self.lane_width > 0.0 && self.lateral_jitter >= 0.0 && self.speed_spread >= 0.0) {
            return Err(OsrError::InvalidConfig("invalid lane or noise parameters".into()));
        }
        Ok(())
    }
}

/// Deterministic scenario source: sample `index` of class `class` depends only
/// on `(seed, class, index)`.
#[derive(Debug, Clone)]
pub struct SyntheticGenerator {
    config: GridConfig,
    params: SynthParams,
    seed: u64,
}

/// Smooth 0 -> 1 step with zero slope and curvature at both ends.
fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * u * (10.0 + u * (-15.0 + 6.0 * u))
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// A vehicle moving at constant speed along +x whose lane offset follows a
/// smooth ramp from `y0` to `y1` over `[start, start + duration]`.
#[derive(Debug, Clone, Copy)]
struct LaneMotion {
    x0: f64,
    speed: f64,
    y0: f64,
    y1: f64,
    start: f64,
    duration: f64,
}

impl LaneMotion {
    fn keep(x0: f64, speed: f64, y: f64) -> Self {
        Self {
            x0,
            speed,
            y0: y,
            y1: y,
            start: 0.0,
            duration: 1.0,
        }
    }

    fn position(&self, t: f64) -> (f64, f64) {
        let u = (t - self.start) / self.duration;
        (self.x0 + self.speed * t, self.y0 + (self.y1 - self.y0) * smoothstep(u))
    }
}

#[derive(Debug, Clone, Copy)]
enum Motion {
    Lane(LaneMotion),
    /// Counter-clockwise circle around the origin; `phase` is the angle at t0.
    Ring { radius: f64, omega: f64, phase: f64 },
    /// Straight approach along a spoke toward or away from the ring.
    Spoke { angle: f64, r0: f64, speed: f64 },
}

impl Motion {
    fn position(&self, t: f64) -> (f64, f64) {
        match *self {
            Motion::Lane(m) => m.position(t),
            Motion::Ring { radius, omega, phase } => {
                let a = phase + omega * t;
                (radius * a.cos(), radius * a.sin())
            }
            Motion::Spoke { angle, r0, speed } => {
                let r = r0 + speed * t;
                (r * angle.cos(), r * angle.sin())
            }
        }
    }

    fn pose(&self, t: f64) -> Pose {
        const H: f64 = 1e-3;
        let (x, y) = self.position(t);
        let (xa, ya) = self.position(t - H);
        let (xb, yb) = self.position(t + H);
        Pose::new(x, y, (yb - ya).atan2(xb - xa))
    }
}

struct Vehicle {
    motion: Motion,
    length: f64,
    width: f64,
}

impl SyntheticGenerator {
    pub fn new(config: GridConfig, params: SynthParams, seed: u64) -> Result<Self> {
        config.validate()?;
        params.validate()?;
        Ok(Self {
            config,
            params,
            seed,
        })
    }

    pub fn config(&self) -> &GridConfig {
        &self.config
    }

    /// Seed of one sample; also recorded on the [`LabeledScenario`].
    pub fn sample_seed(&self, class: ManeuverClass, index: usize) -> u64 {
        seed::derive(self.seed, ((class.index() as u64) << 40) ^ index as u64)
    }

    pub fn scenario(&self, class: ManeuverClass, index: usize) -> Result<LabeledScenario> {
        let sample_seed = self.sample_seed(class, index);
        let mut rng = seed::stream_rng(sample_seed, 0);
        let (ego, others) = if class.is_outlier() {
            self.roundabout(&mut rng)
        } else {
            self.highway(class, &mut rng)
        };
        let times = self.config.sample_times();
        let ego_poses: Vec<Pose> = times.iter().map(|&t| ego.pose(t)).collect();
        let actors: Vec<ActorTrack> = others
            .iter()
            .map(|v| ActorTrack {
                poses: times.iter().map(|&t| v.motion.pose(t)).collect(),
                length: v.length,
                width: v.width,
            })
            .collect();
        let tensor = render_scenario(&ego_poses, &actors, &self.config)?;
        Ok(LabeledScenario {
            tensor,
            label: class,
            seed: sample_seed,
        })
    }

    fn vehicle_size(&self, rng: &mut ChaCha8Rng) -> (f64, f64) {
        (
            uniform(rng, self.params.vehicle_length),
            uniform(rng, self.params.vehicle_width),
        )
    }

    /// Start time of a ramp of length `duration` lying inside the window.
    fn ramp_start(&self, rng: &mut ChaCha8Rng, duration: f64) -> f64 {
        let window = -self.config.t_lb;
        let slack = (window - duration).max(0.0);
        self.config.t_lb + if slack > 0.0 { rng.random_range(0.0..slack) } else { 0.0 }
    }

    fn jitter(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.params.lateral_jitter > 0.0 {
            Normal::new(0.0, self.params.lateral_jitter)
                .expect("positive std-dev")
                .sample(rng)
        } else {
            0.0
        }
    }

    fn other_speed(&self, rng: &mut ChaCha8Rng, ego_speed: f64) -> f64 {
        let d = if self.params.speed_spread > 0.0 {
            Normal::new(0.0, self.params.speed_spread)
                .expect("positive std-dev")
                .sample(rng)
        } else {
            0.0
        };
        (ego_speed + d).max(1.0)
    }

    fn highway(&self, class: ManeuverClass, rng: &mut ChaCha8Rng) -> (Motion, Vec<Vehicle>) {
        use ManeuverClass::*;
        let p = &self.params;
        let w = p.lane_width;
        let v_ego = uniform(rng, p.speed);
        let (ego_len, _) = self.vehicle_size(rng);
        let duration = uniform(rng, p.lane_change_duration);
        let start = self.ramp_start(rng, duration);
        let thw_gap = |rng: &mut ChaCha8Rng, lead_len: f64| {
            uniform(rng, p.thw) * v_ego + (ego_len + lead_len) / 2.0
        };

        let mut ego = LaneMotion::keep(0.0, v_ego, 0.0);
        let mut vehicles = Vec::new();
        let lane_vehicle = |rng: &mut ChaCha8Rng, x0: f64, y0: f64, y1: f64| {
            let (length, width) = self.vehicle_size(rng);
            let jitter = self.jitter(rng);
            let speed = self.other_speed(rng, v_ego);
            Vehicle {
                motion: Motion::Lane(LaneMotion {
                    x0,
                    speed,
                    y0: y0 + jitter,
                    y1: y1 + jitter,
                    start,
                    duration,
                }),
                length,
                width,
            }
        };

        match class {
            EgoFollowing => {
                let (l, _) = self.vehicle_size(rng);
                let gap = thw_gap(rng, l);
                vehicles.push(lane_vehicle(rng, gap, 0.0, 0.0));
            }
            EgoLeftLaneChange | EgoRightLaneChange => {
                let side = if class == EgoLeftLaneChange { 1.0 } else { -1.0 };
                ego = LaneMotion {
                    y1: side * w,
                    start,
                    duration,
                    ..ego
                };
                let (l, _) = self.vehicle_size(rng);
                let gap = thw_gap(rng, l);
                vehicles.push(lane_vehicle(rng, gap, side * w, side * w));
                // The leader in the lane being left.
                if rng.random_bool(0.8) {
                    let x0 = rng.random_range(12.0..60.0);
                    vehicles.push(lane_vehicle(rng, x0, 0.0, 0.0));
                }
            }
            LeaderCutinLeft | LeaderCutinRight => {
                let side = if class == LeaderCutinLeft { 1.0 } else { -1.0 };
                let (l, _) = self.vehicle_size(rng);
                let gap = thw_gap(rng, l);
                vehicles.push(lane_vehicle(rng, gap, side * w, 0.0));
                if rng.random_bool(0.6) {
                    let x0 = gap + rng.random_range(15.0..50.0);
                    vehicles.push(lane_vehicle(rng, x0, 0.0, 0.0));
                }
            }
            LeaderCutoutLeft | LeaderCutoutRight => {
                let side = if class == LeaderCutoutLeft { 1.0 } else { -1.0 };
                let (l, _) = self.vehicle_size(rng);
                let far = uniform(rng, (p.thw.0.max(1.5).min(p.thw.1), p.thw.1)) * v_ego
                    + (ego_len + l) / 2.0;
                let near = far * rng.random_range(0.3..0.75);
                vehicles.push(lane_vehicle(rng, near, 0.0, side * w));
                vehicles.push(lane_vehicle(rng, far, 0.0, 0.0));
            }
            Outlier => unreachable!("outliers use the roundabout generator"),
        }

        let background = rng.random_range(0..=p.max_background);
        for _ in 0..background {
            for _attempt in 0..10 {
                let lane = rng.random_range(-1i32..=1) as f64 * w;
                let x0 = rng.random_range(-40.0..110.0);
                let clear = vehicles.iter().all(|v| match v.motion {
                    Motion::Lane(m) => {
                        let near_lane = (m.y0 - lane).abs() < w / 2.0 || (m.y1 - lane).abs() < w / 2.0;
                        !near_lane || (m.x0 - x0).abs() > 10.0
                    }
                    _ => true,
                }) && ((ego.y0 - lane).abs() >= w / 2.0 && (ego.y1 - lane).abs() >= w / 2.0
                    || x0.abs() > 10.0);
                if clear {
                    vehicles.push(lane_vehicle(rng, x0, lane, lane));
                    break;
                }
            }
        }
        (Motion::Lane(ego), vehicles)
    }

    fn roundabout(&self, rng: &mut ChaCha8Rng) -> (Motion, Vec<Vehicle>) {
        let p = &self.params;
        let radius = uniform(rng, p.roundabout_radius);
        let v = uniform(rng, p.roundabout_speed);
        let omega = v / radius;
        let phase = rng.random_range(0.0..TAU);
        let ego = Motion::Ring {
            radius,
            omega,
            phase,
        };
        let mut vehicles = Vec::new();

        // Leader on the same ring within the headway trigger.
        let gap = uniform(rng, p.thw) * v + 5.0;
        let (length, width) = self.vehicle_size(rng);
        vehicles.push(Vehicle {
            motion: Motion::Ring {
                radius: radius + self.jitter(rng),
                omega: self.other_speed(rng, v) / radius,
                phase: phase + gap / radius,
            },
            length,
            width,
        });

        let extra = rng.random_range(1..=p.max_background.max(1) + 1);
        for _ in 0..extra {
            let (length, width) = self.vehicle_size(rng);
            let motion = if rng.random_bool(0.6) {
                let ring = if rng.random_bool(0.5) {
                    radius + p.lane_width
                } else {
                    (radius - p.lane_width).max(5.0)
                };
                let speed = uniform(rng, p.roundabout_speed);
                Motion::Ring {
                    radius: ring,
                    omega: speed / ring,
                    phase: phase + rng.random_range(-PI / 2.0..PI / 2.0),
                }
            } else {
                let angle = phase + rng.random_range(-PI / 3.0..PI / 3.0);
                let entering = rng.random_bool(0.5);
                let speed = uniform(rng, p.roundabout_speed);
                Motion::Spoke {
                    angle,
                    r0: radius + rng.random_range(6.0..40.0),
                    speed: if entering { -speed } else { speed },
                }
            };
            vehicles.push(Vehicle {
                motion,
                length,
                width,
            });
        }
        (ego, vehicles)
    }
}

/// Generates `counts[class]` scenarios per class.
///
/// Output is ordered by class index, then sample index, and is a pure
/// function of the arguments.
pub fn generate_synthetic_dataset(
    counts: &BTreeMap<ManeuverClass, usize>,
    config: &GridConfig,
    params: &SynthParams,
    seed: u64,
) -> Result<Vec<LabeledScenario>> {
    if let Some((class, _)) = counts.iter().find(|(_, &n)| n == 0) {
        return Err(OsrError::InvalidParameter(format!(
            "count for {class} must be positive"
        )));
    }
    let generator = SyntheticGenerator::new(*config, params.clone(), seed)?;
    let jobs: Vec<(ManeuverClass, usize)> = counts
        .iter()
        .flat_map(|(&c, &n)| (0..n).map(move |i| (c, i)))
        .collect();
    jobs.into_par_iter()
        .map(|(c, i)| generator.scenario(c, i))
        .collect()
}
