//! Heat kernels, caloric and harmonic functions on boxes.

mod bessel;
mod harmonic;
mod ibvp;
mod operator;
mod uniformization;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bessel::{bessel_reference, scaled_bessel};
pub use harmonic::{solve_harmonic, HarmonicSolution};
pub use ibvp::{solve_caloric_ibvp, CaloricSolution, LateralData};
pub use operator::BoxOperator;

use crate::calculus::VertexField;
use crate::environment::{ConductanceField, EnvironmentLaw};
use crate::error::{config, domain, Error, Result};
use crate::lattice::{LatticeBox, Point};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Bound on the discarded Poisson mass.
    pub series_tol: f64,
    /// Largest mass allowed to reach the box boundary.
    pub max_leak: f64,
    /// Radius of the box kernels are computed on; 0 picks one from `t`.
    pub radius: u32,
    /// Spacing of stored instants in trajectories.
    pub time_step: f64,
    /// Relative equation residual accepted for caloric solutions.
    pub residual_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            series_tol: 1e-10,
            max_leak: 1e-12,
            radius: 0,
            time_step: 1.0,
            residual_tol: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("series tolerance", self.series_tol),
            ("max leak", self.max_leak),
            ("residual tolerance", self.residual_tol),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(config(format!("{name} {v} must lie in (0, 1)")));
            }
        }
        if !(self.time_step > 0.0 && self.time_step.is_finite()) {
            return Err(config("time step must be positive"));
        }
        Ok(())
    }
}

/// `e^{tL} u0` on the box of `w` with an absorbing boundary.
#[derive(Clone, Debug)]
pub struct Evolution {
    pub field: VertexField,
    /// Signed mass absorbed at the boundary.
    pub leak: f64,
    /// Number of lazy steps taken.
    pub steps: usize,
}

fn lift(op: &BoxOperator, u0: &VertexField) -> Result<Vec<f64>> {
    let ambient = op.ambient();
    let mut x = vec![0.0; ambient.len()];
    for (p, &v) in u0.domain().points().iter().zip(u0.values()) {
        if v == 0.0 {
            continue;
        }
        if !ambient.is_interior(p) {
            return Err(domain(format!("initial data at {p:?} is not inside the box")));
        }
        x[ambient.index_of(p).unwrap()] = v;
    }
    Ok(x)
}

fn evolve_with(op: &BoxOperator, x: &[f64], t: f64, cfg: &SolverConfig) -> Result<(Vec<f64>, f64, usize)> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(domain(format!("time {t} must be finite and nonnegative")));
    }
    let out = uniformization::propagate(op, x, t, cfg.series_tol);
    let mass: f64 = x.iter().map(|v| v.abs()).sum();
    let allowed = cfg.max_leak * mass.max(1.0);
    if out.leak.abs() > allowed {
        return Err(Error::Truncation {
            leak: out.leak.abs(),
            max_leak: allowed,
        });
    }
    Ok((out.values, out.leak, out.steps))
}

pub fn evolve(w: &ConductanceField, u0: &VertexField, t: f64, cfg: &SolverConfig) -> Result<Evolution> {
    cfg.validate()?;
    let op = BoxOperator::new(w)?;
    let x = lift(&op, u0)?;
    let (values, leak, steps) = evolve_with(&op, &x, t, cfg)?;
    let field = VertexField::new(Arc::new(op.ambient().to_set()), values)?;
    Ok(Evolution { field, leak, steps })
}

/// `y -> p_t(source, y)` on a box.
#[derive(Clone, Debug)]
pub struct HeatKernelColumn {
    pub source: Point,
    pub t: f64,
    pub values: VertexField,
    pub leak: f64,
    pub tolerance: f64,
}

impl HeatKernelColumn {
    pub fn value(&self, y: &Point) -> f64 {
        self.values.get(y).unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        crate::calculus::pairwise_sum(self.values.values())
    }
}

fn delta(op: &BoxOperator, source: &Point) -> Result<Vec<f64>> {
    let ambient = op.ambient();
    if !ambient.is_interior(source) {
        return Err(domain(format!("source {source:?} is not inside the box")));
    }
    let mut x = vec![0.0; ambient.len()];
    x[ambient.index_of(source).unwrap()] = 1.0;
    Ok(x)
}

pub fn heat_kernel(w: &ConductanceField, source: Point, t: f64, cfg: &SolverConfig) -> Result<HeatKernelColumn> {
    Ok(heat_kernel_trajectory(w, source, &[t], cfg)?.pop().unwrap())
}

/// Kernel columns from one source at increasing times, each evolved from
/// the previous one. Leaks accumulate along the trajectory.
pub fn heat_kernel_trajectory(
    w: &ConductanceField,
    source: Point,
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<Vec<HeatKernelColumn>> {
    cfg.validate()?;
    if times.is_empty() || times.windows(2).any(|p| !(p[1] >= p[0])) || times[0] < 0.0 {
        return Err(domain("times must be nonnegative and increasing"));
    }
    let op = BoxOperator::new(w)?;
    let set = Arc::new(op.ambient().to_set());
    let mut x = delta(&op, &source)?;
    let mut leak = 0.0;
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let (values, step_leak, _) = evolve_with(&op, &x, t - now, cfg)?;
        leak += step_leak;
        if leak > cfg.max_leak {
            return Err(Error::Truncation { leak, max_leak: cfg.max_leak });
        }
        x = values;
        now = t;
        out.push(HeatKernelColumn {
            source,
            t,
            values: VertexField::new(set.clone(), x.clone())?,
            leak,
            tolerance: cfg.series_tol,
        });
    }
    Ok(out)
}

/// Kernel columns for several sources, computed concurrently.
pub fn heat_kernels(
    w: &ConductanceField,
    sources: &[Point],
    t: f64,
    cfg: &SolverConfig,
) -> Result<Vec<HeatKernelColumn>> {
    sources
        .par_iter()
        .map(|&x| heat_kernel(w, x, t, cfg))
        .collect()
}

/// Box radius expected to keep the leak of `p_t(source, .)` below 1e-12.
pub fn default_radius(law: &EnvironmentLaw, source: &Point, t: f64) -> Result<u32> {
    let c = law
        .mean_conductance()
        .ok_or_else(|| config("a stored environment cannot be regrown into a larger box"))?;
    Ok((source.sup_norm() as f64 + 7.5 * (2.0 * c * t).sqrt() + 12.0).ceil() as u32)
}

/// Heat kernel in the environment `law(seed)`, sampled on a centered box that
/// is enlarged until the leak meets `cfg.max_leak`. Returns the column and
/// the environment it was computed in.
pub fn heat_kernel_in_law(
    law: &EnvironmentLaw,
    seed: u64,
    dim: usize,
    source: Point,
    times: &[f64],
    cfg: &SolverConfig,
) -> Result<(Vec<HeatKernelColumn>, ConductanceField)> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let mut radius = if cfg.radius > 0 {
        cfg.radius
    } else {
        default_radius(law, &source, t_max)?
    };
    let mut last = None;
    for _ in 0..8 {
        let w = law.generate(seed, LatticeBox::centered(dim, radius))?;
        match heat_kernel_trajectory(&w, source, times, cfg) {
            Ok(cols) => return Ok((cols, w)),
            Err(e @ Error::Truncation { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
        radius = (radius as f64 * 1.5).ceil() as u32;
    }
    Err(last.unwrap())
}

/// CSV dump `t,x1..xd,value` after a comment line with leak and tolerance.
pub fn write_kernel_csv(cols: &[HeatKernelColumn], mut out: impl Write) -> Result<()> {
    let Some(first) = cols.first() else {
        return Ok(());
    };
    let d = first.source.dim();
    let leak = cols.iter().fold(0.0, |m: f64, c| m.max(c.leak));
    writeln!(
        out,
        "# source={} leak={:e} tolerance={:e}",
        first.source.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(","),
        leak,
        first.tolerance
    )?;
    let header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    writeln!(out, "t,{},value", header.join(","))?;
    for col in cols {
        for (p, v) in col.values.domain().points().iter().zip(col.values.values()) {
            let coords: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
            writeln!(out, "{:.16e},{},{:.16e}", col.t, coords.join(","), v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_time_is_identity() {
        let b = LatticeBox::centered(2, 3);
        let w = EnvironmentLaw::ParetoMixture { a: 2.0, b: 2.0 }.generate(3, b).unwrap();
        let set = Arc::new(b.to_set());
        let u0 = VertexField::from_fn(set, |p| if b.is_interior(p) { (p.get(0) - 2 * p.get(1)) as f64 } else { 0.0 });
        let ev = evolve(&w, &u0, 0.0, &SolverConfig::default()).unwrap();
        assert_eq!(ev.field.values(), u0.values());
        assert_eq!(ev.leak, 0.0);
    }

    #[test]
    fn small_box_reports_truncation() {
        let b = LatticeBox::centered(1, 3);
        let w = ConductanceField::constant(b, 1.0).unwrap();
        let err = heat_kernel(&w, Point::origin(1), 5.0, &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
    }

    #[test]
    fn config_validation() {
        let mut c = SolverConfig::default();
        assert!(c.validate().is_ok());
        c.series_tol = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn csv_layout() {
        let b = LatticeBox::centered(1, 30);
        let w = ConductanceField::constant(b, 1.0).unwrap();
        let col = heat_kernel(&w, Point::origin(1), 1.0, &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_kernel_csv(&[col], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().starts_with("# source=0 leak="));
        assert_eq!(lines.next().unwrap(), "t,x1,value");
        assert_eq!(text.lines().count(), 2 + 61);
    }
}
