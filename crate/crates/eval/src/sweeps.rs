//! Target sweeps: feasible region, actual-vs-target distance, height maps
//! and in-place yaw.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pronk_core::thrust::JumpCommand;

use crate::output::{format_f64, CsvRow};
use crate::{failed, linspace, position_command, position_error, yaw_error_deg, Evaluator, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionRow {
    pub x: f64,
    pub y: f64,
    pub landing_error: f64,
    pub pass: bool,
}

impl CsvRow for RegionRow {
    const HEADER: &'static [&'static str] = &["x", "y", "landing_error", "pass"];
    fn fields(&self) -> Vec<String> {
        vec![
            format_f64(self.x),
            format_f64(self.y),
            format_f64(self.landing_error),
            self.pass.to_string(),
        ]
    }
}

/// Flat jumps to the given `(x, y)` targets. A jump passes when it lands
/// without failure within `threshold` of the target.
pub fn region_rows(eval: &Evaluator, targets: &[[f64; 2]], threshold: f64) -> Vec<RegionRow> {
    let cmds: Vec<JumpCommand> = targets.iter().map(|t| position_command(t[0], t[1], 0.0)).collect();
    eval.run_all(&cmds)
        .iter()
        .zip(targets)
        .map(|(o, t)| {
            let e = position_error(o);
            RegionRow {
                x: t[0],
                y: t[1],
                landing_error: e,
                pass: !failed(o) && e <= threshold,
            }
        })
        .collect()
}

/// Uniformly drawn flat targets over the sweep's x-y rectangle.
pub fn region_targets(spec: &SweepSpec) -> Vec<[f64; 2]> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let draw = |rng: &mut ChaCha8Rng, r: [f64; 2]| if r[0] < r[1] { rng.random_range(r[0]..=r[1]) } else { r[0] };
    (0..spec.region_samples)
        .map(|_| {
            let x = draw(&mut rng, spec.x);
            [x, draw(&mut rng, spec.y)]
        })
        .collect()
}

pub fn feasible_region(eval: &Evaluator, spec: &SweepSpec) -> Vec<RegionRow> {
    region_rows(eval, &region_targets(spec), spec.threshold)
}

/// Fraction of passing rows.
pub fn pass_rate(rows: &[RegionRow]) -> f64 {
    rows.iter().filter(|r| r.pass).count() as f64 / rows.len().max(1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvtRow {
    pub target_dist: f64,
    pub actual_dist: f64,
    pub failed: bool,
}

impl CsvRow for AvtRow {
    const HEADER: &'static [&'static str] = &["target_dist", "actual_dist", "failed"];
    fn fields(&self) -> Vec<String> {
        vec![format_f64(self.target_dist), format_f64(self.actual_dist), self.failed.to_string()]
    }
}

/// Straight jumps along ±x. Distances run from zero to the sweep bound in
/// that direction; the actual distance is the signed COM travel along it.
pub fn actual_vs_target(eval: &Evaluator, direction: Direction, spec: &SweepSpec) -> Vec<AvtRow> {
    let s = direction.sign();
    let reach = match direction {
        Direction::Forward => spec.x[1],
        Direction::Backward => -spec.x[0],
    }
    .max(0.0);
    let dists = linspace(0.0, reach, spec.avt_samples);
    let cmds: Vec<JumpCommand> = dists.iter().map(|d| position_command(s * d, 0.0, 0.0)).collect();
    eval.run_all(&cmds)
        .iter()
        .zip(&dists)
        .map(|(o, &d)| AvtRow {
            target_dist: d,
            actual_dist: s * (o.final_pose.position.x - o.start_pose.position.x),
            failed: failed(o),
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxUpRow {
    pub x: f64,
    pub y: f64,
    pub max_up_z: f64,
}

impl CsvRow for MaxUpRow {
    const HEADER: &'static [&'static str] = &["x", "y", "max_up_z"];
    fn fields(&self) -> Vec<String> {
        vec![format_f64(self.x), format_f64(self.y), format_f64(self.max_up_z)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinDownRow {
    pub x: f64,
    pub y: f64,
    pub min_down_z: f64,
}

impl CsvRow for MinDownRow {
    const HEADER: &'static [&'static str] = &["x", "y", "min_down_z"];
    fn fields(&self) -> Vec<String> {
        vec![format_f64(self.x), format_f64(self.y), format_f64(self.min_down_z)]
    }
}

fn levels(bound: f64, step: f64) -> Vec<f64> {
    let n = (bound.abs() / step + 1e-9).floor() as usize;
    (0..=n).map(|k| bound.signum() * k as f64 * step).collect()
}

/// Highest and lowest passing target heights per grid point. Heights are
/// scanned from zero in `height_step` increments; NaN where no level passes.
pub fn height_map(eval: &Evaluator, spec: &SweepSpec) -> (Vec<MaxUpRow>, Vec<MinDownRow>) {
    let xs = linspace(spec.x[0], spec.x[1], spec.height_grid[0]);
    let ys = linspace(spec.y[0], spec.y[1], spec.height_grid[1]);
    let up = levels(spec.z[1].max(0.0), spec.height_step);
    let down = levels(spec.z[0].min(0.0), spec.height_step);
    let grid: Vec<(f64, f64)> = xs.iter().flat_map(|&x| ys.iter().map(move |&y| (x, y))).collect();
    let cmds: Vec<JumpCommand> = grid
        .iter()
        .flat_map(|&(x, y)| up.iter().chain(&down).map(move |&z| position_command(x, y, z)))
        .collect();
    let outcomes = eval.run_all(&cmds);
    let per_point = up.len() + down.len();
    let mut ups = Vec::with_capacity(grid.len());
    let mut downs = Vec::with_capacity(grid.len());
    for (i, &(x, y)) in grid.iter().enumerate() {
        let chunk = &outcomes[i * per_point..(i + 1) * per_point];
        let passes = |o: &pronk_core::simulator::EpisodeOutcome| !failed(o) && position_error(o) <= spec.threshold;
        let max_up_z = up
            .iter()
            .zip(&chunk[..up.len()])
            .filter(|(_, o)| passes(o))
            .map(|(z, _)| *z)
            .fold(f64::NAN, f64::max);
        let min_down_z = down
            .iter()
            .zip(&chunk[up.len()..])
            .filter(|(_, o)| passes(o))
            .map(|(z, _)| *z)
            .fold(f64::NAN, f64::min);
        ups.push(MaxUpRow { x, y, max_up_z });
        downs.push(MinDownRow { x, y, min_down_z });
    }
    (ups, downs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawRow {
    pub yaw_cmd_deg: f64,
    pub yaw_err_deg: f64,
}

impl CsvRow for YawRow {
    const HEADER: &'static [&'static str] = &["yaw_cmd_deg", "yaw_err_deg"];
    fn fields(&self) -> Vec<String> {
        vec![format_f64(self.yaw_cmd_deg), format_f64(self.yaw_err_deg)]
    }
}

/// In-place jumps with the given yaw commands; the error is signed
/// (achieved minus commanded), in degrees.
pub fn yaw_rows(eval: &Evaluator, yaw_cmds_deg: &[f64]) -> Vec<YawRow> {
    let cmds: Vec<JumpCommand> = yaw_cmds_deg
        .iter()
        .map(|y| JumpCommand::new(Vector3::zeros(), Vector3::new(0.0, 0.0, y.to_radians())))
        .collect();
    eval.run_all(&cmds)
        .iter()
        .zip(yaw_cmds_deg)
        .map(|(o, &c)| YawRow {
            yaw_cmd_deg: c,
            yaw_err_deg: yaw_error_deg(o),
        })
        .collect()
}

/// Multiples of `yaw_step_deg` inside the sweep's yaw range.
pub fn yaw_commands(spec: &SweepSpec) -> Vec<f64> {
    let lo = (spec.yaw_deg[0] / spec.yaw_step_deg - 1e-9).ceil() as i64;
    let hi = (spec.yaw_deg[1] / spec.yaw_step_deg + 1e-9).floor() as i64;
    (lo..=hi).map(|k| k as f64 * spec.yaw_step_deg).collect()
}

pub fn yaw_sweep(eval: &Evaluator, spec: &SweepSpec) -> Vec<YawRow> {
    yaw_rows(eval, &yaw_commands(spec))
}
