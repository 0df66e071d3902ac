//! Convergence of the rescaled heat kernel to a Gaussian.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Cell, ExperimentReport, ReportBuilder};
use crate::environment::EnvironmentLaw;
use crate::error::{config, domain, Result};
use crate::exponents::{gaussian_kernel, ExponentSet};
use crate::lattice::{LatticeBox, Point};
use crate::rng::derive_seed;
use crate::solvers::{bessel_reference, heat_kernel_in_law, SolverConfig};
use crate::walker::{estimate_sigma, walk_radius};

/// Agreement demanded between the solver and the Bessel product in constant fields.
pub const BESSEL_TOLERANCE: f64 = 1e-8;
/// Allowed deviation of the Riemann sum of the limit kernel from 1.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalLimitConfig {
    pub law: EnvironmentLaw,
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub n_ladder: Vec<u32>,
    pub t: f64,
    /// Points of R^d where the rescaled kernel is compared.
    pub grid: Vec<Vec<f64>>,
    pub seed: u64,
    /// Paths used to estimate the covariance in random fields.
    pub sigma_samples: usize,
    pub solver: SolverConfig,
}

/// `{-1, 0, 1}^d`.
pub fn unit_grid(dim: usize) -> Vec<Vec<f64>> {
    LatticeBox::centered(dim, 1)
        .points()
        .map(|p| p.coords().iter().map(|&c| c as f64).collect())
        .collect()
}

impl Default for LocalLimitConfig {
    fn default() -> Self {
        LocalLimitConfig {
            law: EnvironmentLaw::Constant { value: 1.0 },
            dim: 2,
            p: 4.0,
            q: 4.0,
            n_ladder: vec![8, 16, 32, 64],
            t: 1.0,
            grid: unit_grid(2),
            seed: 1,
            sigma_samples: 20_000,
            solver: SolverConfig::default(),
        }
    }
}

struct Level {
    n: u32,
    error: f64,
    bessel_error: Option<f64>,
    values: Vec<f64>,
    limits: Vec<f64>,
    norm_p: Vec<f64>,
    inv_norm_q: Vec<f64>,
}

fn lattice_point(n: u32, x: &[f64]) -> Point {
    let c: Vec<i64> = x.iter().map(|v| (n as f64 * v).floor() as i64).collect();
    Point::new(&c)
}

/// `sum_z n^-d k_t(z/n)` over the lattice points within eight standard
/// deviations.
fn riemann_mass(n: u32, t: f64, cov: &[Vec<f64>]) -> Result<f64> {
    let d = cov.len();
    let spread = cov.iter().enumerate().map(|(i, r)| r[i]).fold(0.0, f64::max);
    let reach = (8.0 * (spread * t).sqrt() * n as f64).ceil() as u32;
    let nf = n as f64;
    let terms: Vec<f64> = LatticeBox::centered(d, reach)
        .points()
        .map(|z| {
            let x: Vec<f64> = z.coords().iter().map(|&c| c as f64 / nf).collect();
            gaussian_kernel(t, &x, cov).map(|k| k / nf.powi(d as i32))
        })
        .collect::<Result<_>>()?;
    Ok(crate::calculus::pairwise_sum(&terms))
}

fn level(cfg: &LocalLimitConfig, env_seed: u64, n: u32, cov: &[Vec<f64>]) -> Result<Level> {
    let d = cfg.dim;
    let time = (n as f64).powi(2) * cfg.t;
    let origin = Point::origin(d);
    let (cols, w) = heat_kernel_in_law(&cfg.law, env_seed, d, origin, &[time], &cfg.solver)?;
    let scale = (n as f64).powi(d as i32);
    let mut out = Level {
        n,
        error: 0.0,
        bessel_error: None,
        values: Vec::new(),
        limits: Vec::new(),
        norm_p: Vec::new(),
        inv_norm_q: Vec::new(),
    };
    let unit = match cfg.law {
        EnvironmentLaw::Constant { value } => Some(value),
        _ => None,
    };
    for x in &cfg.grid {
        let y = lattice_point(n, x);
        let v = scale * cols[0].value(&y);
        let k = gaussian_kernel(cfg.t, x, cov)?;
        out.error = out.error.max((v - k).abs());
        if let Some(c) = unit {
            let reference = scale * bessel_reference(c * time, &y);
            out.bessel_error = Some(out.bessel_error.unwrap_or(0.0).max((v - reference).abs()));
        }
        let ball = LatticeBox::new(y, n);
        out.norm_p.push(w.norm(&ball, cfg.p)?);
        out.inv_norm_q.push(w.inverse_norm(&ball, cfg.q)?);
        out.values.push(v);
        out.limits.push(k);
    }
    Ok(out)
}

fn check(cfg: &LocalLimitConfig) -> Result<()> {
    ExponentSet::derive(cfg.dim, cfg.p, cfg.q)?;
    cfg.law.validate()?;
    cfg.solver.validate()?;
    if !(cfg.t > 0.0 && cfg.t.is_finite()) {
        return Err(config(format!("t must be positive, got {}", cfg.t)));
    }
    if cfg.n_ladder.is_empty() || cfg.n_ladder.contains(&0) {
        return Err(config("n ladder must be nonempty and positive"));
    }
    if cfg.grid.is_empty() || cfg.grid.iter().any(|x| x.len() != cfg.dim || x.iter().any(|v| !v.is_finite())) {
        return Err(config("grid points must be finite and of the lattice dimension"));
    }
    if cfg.sigma_samples < 2 {
        return Err(config("sigma_samples must be at least 2"));
    }
    Ok(())
}

/// Covariance of the limit: exact for constant fields, estimated from walks
/// at the largest scale otherwise.
fn limit_covariance(cfg: &LocalLimitConfig, env_seed: u64) -> Result<(Vec<Vec<f64>>, Option<Vec<Vec<f64>>>)> {
    let d = cfg.dim;
    if let EnvironmentLaw::Constant { value } = cfg.law {
        let cov = (0..d).map(|i| (0..d).map(|j| if i == j { 2.0 * value } else { 0.0 }).collect()).collect();
        return Ok((cov, None));
    }
    let n = *cfg.n_ladder.iter().max().unwrap();
    let c = cfg
        .law
        .mean_conductance()
        .ok_or_else(|| config("stored environments have no covariance estimate"))?;
    let radius = walk_radius((n as f64).powi(2) * cfg.t, c);
    let w = cfg.law.generate(env_seed, LatticeBox::centered(d, radius))?;
    let est = estimate_sigma(&w, n, cfg.t, cfg.sigma_samples, derive_seed(cfg.seed, "walk", 0))?;
    // The smallest eigenvalue must clear three standard errors.
    let m = nalgebra::DMatrix::from_fn(d, d, |i, j| est.matrix[i][j]);
    let smallest = m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
    let noise = est.std_errors.iter().flatten().copied().fold(0.0, f64::max);
    if !(smallest > 3.0 * noise) {
        return Err(domain(format!(
            "estimated covariance is singular within its error bars: smallest eigenvalue {smallest:e}, standard error {noise:e}"
        )));
    }
    Ok((est.matrix.clone(), Some(est.std_errors)))
}

pub fn run_local_limit(cfg: &LocalLimitConfig) -> Result<ExperimentReport> {
    let started = std::time::Instant::now();
    check(cfg)?;
    let env_seed = derive_seed(cfg.seed, "environment", 0);
    let (cov, cov_errors) = limit_covariance(cfg, env_seed)?;
    let levels: Vec<Level> = cfg
        .n_ladder
        .par_iter()
        .map(|&n| level(cfg, env_seed, n, &cov))
        .collect::<Result<_>>()?;

    let mut rep = ReportBuilder::new(
        "local_limit",
        cfg,
        &["n", "point", "scaled_kernel", "limit", "norm_p", "inv_norm_q"],
        started,
    );
    for lv in &levels {
        for (i, x) in cfg.grid.iter().enumerate() {
            let label: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rep.row(vec![
                Cell::from(lv.n as usize),
                label.join(" ").into(),
                lv.values[i].into(),
                lv.limits[i].into(),
                lv.norm_p[i].into(),
                lv.inv_norm_q[i].into(),
            ]);
        }
    }
    let errors: Vec<f64> = levels.iter().map(|l| l.error).collect();
    rep.measure("n_ladder", &cfg.n_ladder);
    rep.measure("sup_error", &errors);
    rep.measure("covariance", &cov);
    if let Some(e) = &cov_errors {
        rep.measure("covariance_std_errors", e);
    }
    let largest = *cfg.n_ladder.iter().max().unwrap();
    let mass = riemann_mass(largest, cfg.t, &cov)?;
    rep.measure("limit_riemann_mass", mass);
    rep.rule(
        "limit_normalized",
        (mass - 1.0).abs() <= NORMALIZATION_TOLERANCE,
        format!("lattice sum of the limit kernel at n = {largest} is {mass:.8}"),
    );
    let bessel: Vec<f64> = levels.iter().filter_map(|l| l.bessel_error).collect();
    if !bessel.is_empty() {
        let worst = bessel.iter().copied().fold(0.0, f64::max);
        rep.measure("bessel_error", &bessel);
        rep.rule(
            "bessel_match",
            worst <= BESSEL_TOLERANCE,
            format!("largest scaled deviation from the Bessel product {worst:e}"),
        );
    }
    if errors.len() >= 2 {
        if cfg.law.is_deterministic() {
            let strict = errors.windows(2).all(|w| w[1] < w[0]);
            rep.rule("error_decreasing", strict, format!("sup errors {errors:?}"));
        } else {
            let (first, last) = (errors[0], errors[errors.len() - 1]);
            rep.rule(
                "error_trend",
                last < first,
                format!("sup error {last:e} at the largest scale against {first:e} at the smallest"),
            );
        }
    }
    rep.counts(levels.len(), 0);
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Verdict;

    #[test]
    fn grid_has_nine_points() {
        let g = unit_grid(2);
        assert_eq!(g.len(), 9);
        assert!(g.contains(&vec![-1.0, 1.0]));
    }

    #[test]
    fn limit_mass_is_one() {
        let cov = vec![vec![2.0, 0.0], vec![0.0, 2.0]];
        let m = riemann_mass(16, 1.0, &cov).unwrap();
        assert!((m - 1.0).abs() < 1e-6, "{m}");
    }

    #[test]
    fn unit_field_small_ladder() {
        let cfg = LocalLimitConfig {
            n_ladder: vec![4, 8, 16],
            ..LocalLimitConfig::default()
        };
        let rep = run_local_limit(&cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{}", rep.to_json());
    }
}
