//! Variable-speed random walk: path sampling, empirical kernels and the
//! diffusion matrix estimate.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::Serialize;

use crate::calculus::VertexField;
use crate::environment::ConductanceField;
use crate::error::{domain, Result};
use crate::lattice::Point;
use crate::rng::stream;
use crate::solvers::HeatKernelColumn;

/// Truncated fraction above which estimates carry a warning.
pub const TRUNCATION_WARNING: f64 = 0.01;

/// Jump times and visited vertices of one walk; `vertices[k]` is occupied on
/// `[jump_times[k-1], jump_times[k])` with `jump_times[-1] = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PathSample {
    pub seed: u64,
    pub index: u64,
    pub horizon: f64,
    pub jump_times: Vec<f64>,
    pub vertices: Vec<Point>,
    /// The walk reached the edge of the box before the horizon.
    pub truncated: bool,
}

impl PathSample {
    pub fn position_at(&self, t: f64) -> Point {
        let k = self.jump_times.partition_point(|&s| s <= t);
        self.vertices[k]
    }

    /// Nearest-neighbour steps and strictly increasing jump times.
    pub fn is_valid(&self) -> bool {
        self.vertices.len() == self.jump_times.len() + 1
            && self.vertices.windows(2).all(|p| (p[1] - p[0]).coords().iter().map(|c| c.abs()).sum::<i64>() == 1)
            && self.jump_times.windows(2).all(|s| s[1] > s[0])
            && self.jump_times.first().is_none_or(|&s| s > 0.0)
            && self.jump_times.last().is_none_or(|&s| s <= self.horizon)
    }
}

/// Index arithmetic over the ambient box of an environment.
struct Walk<'a> {
    w: &'a ConductanceField,
    side: usize,
    strides: Vec<usize>,
}

enum Recorder<'a> {
    None,
    Path(&'a mut Vec<f64>, &'a mut Vec<usize>),
}

impl<'a> Walk<'a> {
    fn new(w: &'a ConductanceField) -> Walk<'a> {
        let b = w.ambient();
        Walk {
            w,
            side: b.side(),
            strides: (0..b.dim()).map(|a| b.stride(a)).collect(),
        }
    }

    fn offsets(&self, i: usize) -> [usize; 4] {
        let mut off = [0; 4];
        for (a, &st) in self.strides.iter().enumerate() {
            off[a] = (i / st) % self.side;
        }
        off
    }

    /// Runs the walk from `start` up to `horizon`; returns the final index
    /// and whether the box edge was reached.
    fn run(&self, start: usize, horizon: f64, rng: &mut ChaCha8Rng, mut rec: Recorder<'_>) -> (usize, bool) {
        let d = self.strides.len();
        let mut i = start;
        let mut off = self.offsets(i);
        let mut now = 0.0;
        let mut rates = [0.0; 8];
        loop {
            if off[..d].iter().any(|&o| o == 0 || o + 1 == self.side) {
                return (i, true);
            }
            let mut mu = 0.0;
            for a in 0..d {
                rates[2 * a] = self.w.slot(i - self.strides[a], a);
                rates[2 * a + 1] = self.w.slot(i, a);
                mu += rates[2 * a] + rates[2 * a + 1];
            }
            let hold: f64 = rng.sample::<f64, _>(Exp1) / mu;
            now += hold;
            if now > horizon {
                return (i, false);
            }
            let mut target = rng.random::<f64>() * mu;
            let mut k = 2 * d - 1;
            for (j, r) in rates[..2 * d].iter().enumerate() {
                if target < *r {
                    k = j;
                    break;
                }
                target -= r;
            }
            let a = k / 2;
            if k % 2 == 0 {
                i -= self.strides[a];
                off[a] -= 1;
            } else {
                i += self.strides[a];
                off[a] += 1;
            }
            if let Recorder::Path(times, sites) = &mut rec {
                times.push(now);
                sites.push(i);
            }
        }
    }
}

fn start_index(w: &ConductanceField, x0: &Point) -> Result<usize> {
    w.ambient()
        .index_of(x0)
        .ok_or_else(|| domain(format!("start {x0:?} is outside the box")))
}

/// Gillespie simulation of the walk started at `x0`, reproducible from
/// `(seed, index)`. A walk that reaches the edge of the box stops there.
pub fn sample_path(w: &ConductanceField, x0: Point, horizon: f64, seed: u64, index: u64) -> Result<PathSample> {
    if !(horizon >= 0.0) {
        return Err(domain("horizon must be nonnegative"));
    }
    let start = start_index(w, &x0)?;
    let walk = Walk::new(w);
    let mut rng = stream(seed, index);
    let (mut times, mut sites) = (Vec::new(), vec![start]);
    let (_, truncated) = walk.run(start, horizon, &mut rng, Recorder::Path(&mut times, &mut sites));
    let b = w.ambient();
    Ok(PathSample {
        seed,
        index,
        horizon,
        jump_times: times,
        vertices: sites.into_iter().map(|i| b.point(i)).collect(),
        truncated,
    })
}

/// Positions at time `t` of paths `0..count`, `None` for truncated paths.
fn endpoints(w: &ConductanceField, x0: &Point, t: f64, count: usize, seed: u64) -> Result<Vec<Option<usize>>> {
    if !(t >= 0.0) {
        return Err(domain("time must be nonnegative"));
    }
    if count == 0 {
        return Err(domain("at least one path is needed"));
    }
    let start = start_index(w, x0)?;
    let walk = Walk::new(w);
    Ok((0..count as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream(seed, k);
            let (end, truncated) = walk.run(start, t, &mut rng, Recorder::None);
            (!truncated).then_some(end)
        })
        .collect())
}

/// Histogram of the walk's position at a fixed time.
#[derive(Clone, Debug)]
pub struct EmpiricalKernel {
    pub source: Point,
    pub t: f64,
    pub samples: usize,
    pub truncated: usize,
    /// Path counts per vertex of the ambient box.
    pub counts: Vec<u64>,
    pub probabilities: VertexField,
    /// More than 1% of paths were truncated.
    pub warning: bool,
}

impl EmpiricalKernel {
    pub fn truncated_fraction(&self) -> f64 {
        self.truncated as f64 / self.samples as f64
    }

    /// Binomial standard error of a histogram entry.
    pub fn standard_error(&self, y: &Point) -> f64 {
        let p = self.probabilities.get(y).unwrap_or(0.0);
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }

    /// Total variation distance to a kernel column on the same box.
    pub fn total_variation(&self, col: &HeatKernelColumn) -> f64 {
        let mut s = 0.0;
        for (p, v) in self.probabilities.domain().points().iter().zip(self.probabilities.values()) {
            s += (v - col.value(p)).abs();
        }
        for (p, v) in col.values.domain().points().iter().zip(col.values.values()) {
            if self.probabilities.get(p).is_none() {
                s += v.abs();
            }
        }
        0.5 * (s + self.truncated_fraction())
    }

    /// The histogram in kernel-column form; the leak is the truncated fraction.
    pub fn to_column(&self) -> HeatKernelColumn {
        HeatKernelColumn {
            source: self.source,
            t: self.t,
            values: self.probabilities.clone(),
            leak: self.truncated_fraction(),
            tolerance: (1.0 / self.samples as f64).sqrt(),
        }
    }
}

pub fn empirical_kernel(w: &ConductanceField, x0: Point, t: f64, samples: usize, seed: u64) -> Result<EmpiricalKernel> {
    let ends = endpoints(w, &x0, t, samples, seed)?;
    let b = w.ambient();
    let mut counts = vec![0u64; b.len()];
    let mut truncated = 0;
    for e in &ends {
        match e {
            Some(i) => counts[*i] += 1,
            None => truncated += 1,
        }
    }
    let probs = counts.iter().map(|&c| c as f64 / samples as f64).collect();
    let probabilities = VertexField::new(Arc::new(b.to_set()), probs)?;
    Ok(EmpiricalKernel {
        source: x0,
        t,
        samples,
        truncated,
        counts,
        probabilities,
        warning: truncated as f64 > TRUNCATION_WARNING * samples as f64,
    })
}

/// Empirical covariance of `X_{n^2 t} / (n sqrt t)`; the constant-one
/// environment gives twice the identity.
#[derive(Clone, Debug, Serialize)]
pub struct SigmaEstimate {
    pub matrix: Vec<Vec<f64>>,
    pub std_errors: Vec<Vec<f64>>,
    pub samples: usize,
    pub truncated: usize,
    pub warning: bool,
}

impl SigmaEstimate {
    pub fn determinant(&self) -> f64 {
        let d = self.matrix.len();
        nalgebra::DMatrix::from_fn(d, d, |i, j| self.matrix[i][j]).determinant()
    }
}

pub fn estimate_sigma(w: &ConductanceField, n: u32, t: f64, samples: usize, seed: u64) -> Result<SigmaEstimate> {
    if samples < 2 {
        return Err(domain("covariance needs at least two paths"));
    }
    let origin = Point::origin(w.dim());
    let time = (n as f64).powi(2) * t;
    let ends = endpoints(w, &origin, time, samples, seed)?;
    let b = w.ambient();
    let d = w.dim();
    // Exact integer moments; displacements are bounded by the box.
    let mut first = vec![0i128; d];
    let mut second = vec![vec![0i128; d]; d];
    let mut fourth = vec![vec![0i128; d]; d];
    let mut kept = 0usize;
    for e in ends.iter().flatten() {
        let x = b.point(*e);
        kept += 1;
        for i in 0..d {
            let xi = x.get(i) as i128;
            first[i] += xi;
            for j in 0..d {
                let pij = xi * x.get(j) as i128;
                second[i][j] += pij;
                fourth[i][j] += pij * pij;
            }
        }
    }
    if kept < 2 {
        return Err(domain("fewer than two untruncated paths"));
    }
    let m = kept as f64;
    let scale = time;
    let mut matrix = vec![vec![0.0; d]; d];
    let mut std_errors = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in 0..d {
            // Centered sum of products, still exact: m * S_ij - S_i S_j.
            let centered = kept as i128 * second[i][j] - first[i] * first[j];
            matrix[i][j] = centered as f64 / (m * (m - 1.0)) / scale;
            let mean_sq = second[i][j] as f64 / m;
            let var = (fourth[i][j] as f64 / m - mean_sq * mean_sq).max(0.0);
            std_errors[i][j] = (var / m).sqrt() / scale;
        }
    }
    let truncated = samples - kept;
    Ok(SigmaEstimate {
        matrix,
        std_errors,
        samples,
        truncated,
        warning: truncated as f64 > TRUNCATION_WARNING * samples as f64,
    })
}

/// CSV dump `path_index,jump_time,x1..xd`; the first row of each path has
/// jump time 0 and the start vertex.
pub fn write_paths_csv(paths: &[PathSample], mut out: impl Write) -> Result<()> {
    let Some(first) = paths.first() else {
        return Ok(());
    };
    let d = first.vertices[0].dim();
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    writeln!(out, "path_index,jump_time,{}", header.join(","))?;
    for p in paths {
        for (k, x) in p.vertices.iter().enumerate() {
            let s = if k == 0 { 0.0 } else { p.jump_times[k - 1] };
            let coords: Vec<String> = x.coords().iter().map(|c| c.to_string()).collect();
            writeln!(out, "{},{:.16e},{}", p.index, s, coords.join(","))?;
        }
    }
    Ok(())
}

/// Box radius keeping the walk inside up to time `t` with overwhelming probability.
pub fn walk_radius(t: f64, conductance: f64) -> u32 {
    (8.0 * (2.0 * conductance * t).sqrt() + 12.0).ceil() as u32
}
