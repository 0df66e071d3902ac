//! Local boundedness and the weak Harnack inequality for positive caloric
//! functions with random positive data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{caloric_data, DataKind};
use super::{Cell, Distribution, ExperimentReport, ReportBuilder};
use crate::environment::EnvironmentLaw;
use crate::error::{config, Result};
use crate::exponents::{boundedness_constant, weak_harnack_constants, ExponentSet, WeakHarnackInputs};
use crate::lattice::{ball, LatticeBox};
use crate::rng::derive_seed;
use crate::solvers::{solve_caloric_ibvp, SolverConfig};

/// Density of the super-level set demanded in the Harnack part.
pub const HARNACK_DENSITY: f64 = 0.75;
/// Share of the past time window on which the level set is expected to persist.
pub const HARNACK_PAST_SHARE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessConfig {
    pub law: EnvironmentLaw,
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub n: u32,
    /// Time scale of the cylinder `[0, tau n^2] x B(n)`.
    pub tau: f64,
    pub trials: usize,
    pub seed: u64,
    pub c_free: f64,
    pub data: DataKind,
    pub knots: usize,
    pub solver: SolverConfig,
}

impl Default for BoundednessConfig {
    fn default() -> Self {
        BoundednessConfig {
            law: EnvironmentLaw::Constant { value: 1.0 },
            dim: 2,
            p: 4.0,
            q: 4.0,
            n: 16,
            tau: 1.0,
            trials: 50,
            seed: 1,
            c_free: 1.0,
            data: DataKind::Smoothed,
            knots: 16,
            solver: SolverConfig::default(),
        }
    }
}

/// Smallest `sigma2 = m/n` with `(1 - lambda)/(1 - sigma1) |B(n)|/|B(m)| <= 17/24`,
/// `lambda < sigma2 < 1` and `n >= 1/(1 - sigma2)`.
pub fn smallest_outer_ratio(dim: usize, n: u32, density: f64, sigma1: f64) -> Option<f64> {
    let volume = |r: u32| (2.0 * r as f64 + 1.0).powi(dim as i32);
    let lead = (1.0 - density) / (1.0 - sigma1);
    (1..n)
        .filter(|&m| m as f64 > density * n as f64)
        .map(|m| (m, m as f64 / n as f64))
        .find(|&(m, s)| lead * volume(n) / volume(m) <= 17.0 / 24.0 && n as f64 * (1.0 - s) >= 1.0)
        .map(|(_, s)| s)
}

struct Trial {
    env_seed: u64,
    data_seed: u64,
    bound_ratio: f64,
    boundedness: f64,
    level: f64,
    density: f64,
    harnack_ratio: Option<f64>,
    residual: f64,
}

/// `q`-quantile of a sample, `q` in [0, 1], lower order statistic.
fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((v.len() - 1) as f64 * q).floor() as usize;
    v[k]
}

fn trial(cfg: &BoundednessConfig, exps: &ExponentSet, k: u64) -> Result<Trial> {
    let env_seed = derive_seed(cfg.seed, "environment", k);
    let data_seed = derive_seed(cfg.seed, "data", k);
    let n = cfg.n;
    let region = LatticeBox::centered(cfg.dim, n);
    let w = cfg.law.generate(env_seed, region)?;
    let span = (n as f64).powi(2);
    let top = cfg.tau.max(1.0) * span;
    let knots: Vec<f64> = (0..=cfg.knots).map(|j| top * j as f64 / cfg.knots as f64).collect();
    let (lateral, initial) = caloric_data(&region, &knots, cfg.data, true, data_seed);
    let steps = (top / cfg.solver.time_step).ceil() as usize;
    let times: Vec<f64> = (0..=steps).map(|j| top * j as f64 / steps as f64).collect();
    let u = solve_caloric_ibvp(&w, &region, &times, &lateral, &initial, &cfg.solver)?;

    // Boundedness on Q_1 = [top - tau n^2, top] x B(n).
    let whole = region.to_set();
    let boundedness = boundedness_constant(w.norm(&region, cfg.p)?, w.inverse_norm(&region, cfg.q)?, cfg.tau, exps.interpolation)?;
    let half = ball(region.center(), n / 2);
    let sup = u.field.max(top - 0.5 * cfg.tau * span, top, &half)?;
    let l2 = u.field.norm(top - cfg.tau * span, top, &whole, 2.0, true)?;
    let bound_ratio = sup / (boundedness.powf(cfg.p / (cfg.p - 1.0)) * l2);

    // Weak Harnack on Q(n) = [top - n^2, top] x B(n) with the level set
    // at the lower HARNACK_DENSITY quantile.
    let window = u.field.instants_in(top - span, top);
    let samples: Vec<f64> = window.clone().flat_map(|j| u.field.slice(j).iter().copied()).collect();
    let level = quantile(&samples, 1.0 - HARNACK_DENSITY);
    let density = samples.iter().filter(|&&v| v >= level).count() as f64 / samples.len() as f64;
    let harnack_ratio = match smallest_outer_ratio(cfg.dim, n, HARNACK_DENSITY, HARNACK_PAST_SHARE) {
        Some(outer) if density >= HARNACK_DENSITY => {
            let unit = boundedness_constant(w.norm(&region, cfg.p)?, w.inverse_norm(&region, cfg.q)?, 1.0, exps.interpolation)?;
            let c = weak_harnack_constants(
                exps,
                &WeakHarnackInputs {
                    dim: cfg.dim,
                    density: HARNACK_DENSITY,
                    outer_ratio: outer,
                    norm_1: w.norm(&region, 1.0)?,
                    level,
                    boundedness: unit,
                    inv_norm_half_dim: w.inverse_norm(&region, cfg.dim as f64 / 2.0)?,
                    free_constant: cfg.c_free,
                },
            )?;
            let sigma = HARNACK_PAST_SHARE.sqrt().min(outer);
            let m = (sigma * n as f64).floor() as u32;
            let inner = ball(region.center(), m / 2);
            let low = u.field.min(top - 0.5 * (m as f64).powi(2), top, &inner)?;
            Some(low / c.floor)
        }
        _ => None,
    };
    Ok(Trial {
        env_seed,
        data_seed,
        bound_ratio,
        boundedness,
        level,
        density,
        harnack_ratio,
        residual: u.residual,
    })
}

fn check(cfg: &BoundednessConfig) -> Result<ExponentSet> {
    let exps = ExponentSet::derive(cfg.dim, cfg.p, cfg.q)?;
    cfg.law.validate()?;
    cfg.solver.validate()?;
    if !(cfg.tau > 0.0 && cfg.tau.is_finite()) {
        return Err(config(format!("tau must be positive, got {}", cfg.tau)));
    }
    if cfg.n < 2 || cfg.trials == 0 || cfg.knots == 0 {
        return Err(config("need n >= 2 and positive trials and knots"));
    }
    if !(cfg.c_free >= 1.0) {
        return Err(config("c_free must be at least 1"));
    }
    Ok(exps)
}

/// Per trial: `sup_{Q_1/2} u / (C^{p/(p-1)} ||u||_{L^2(Q_1)})` and, when the
/// level-set density holds, `min u / gamma` on the inner Harnack cylinder.
pub fn run_boundedness_harnack(cfg: &BoundednessConfig) -> Result<ExperimentReport> {
    let started = std::time::Instant::now();
    let exps = check(cfg)?;
    let results: Vec<Trial> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|k| trial(cfg, &exps, k))
        .collect::<Result<_>>()?;

    let mut rep = ReportBuilder::new(
        "boundedness_harnack",
        cfg,
        &[
            "trial", "environment_seed", "data_seed", "bound_ratio", "boundedness_constant", "level", "density",
            "harnack_ratio", "residual",
        ],
        started,
    );
    for (k, t) in results.iter().enumerate() {
        rep.row(vec![
            Cell::from(k),
            t.env_seed.into(),
            t.data_seed.into(),
            t.bound_ratio.into(),
            t.boundedness.into(),
            t.level.into(),
            t.density.into(),
            t.harnack_ratio.unwrap_or(f64::NAN).into(),
            t.residual.into(),
        ]);
    }
    let bound: Vec<f64> = results.iter().map(|t| t.bound_ratio).collect();
    let harnack: Vec<f64> = results.iter().filter_map(|t| t.harnack_ratio).collect();
    let skipped = results.len() - harnack.len();
    rep.counts(results.len(), skipped);
    let bd = Distribution::of(&bound);
    let hd = Distribution::of(&harnack);
    rep.measure("bound_ratio", &bd);
    rep.measure("harnack_ratio", &hd);
    rep.measure("harnack_skipped", skipped);
    rep.rule(
        "bound_ratio_finite",
        bound.iter().all(|r| r.is_finite() && *r > 0.0),
        format!("bound ratio ceiling {:.6}", bd.max),
    );
    rep.rule(
        "harnack_ratio_at_least_one",
        harnack.iter().all(|&r| r >= 1.0),
        format!("smallest ratio {:.6} over {} qualifying trials", hd.min, hd.count),
    );
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Verdict;

    #[test]
    fn outer_ratio_meets_its_constraints() {
        let s = smallest_outer_ratio(2, 16, 0.75, 0.5).unwrap();
        let m = (s * 16.0).round();
        let lead = 0.5 * (33.0f64 / (2.0 * m + 1.0)).powi(2);
        assert!(lead <= 17.0 / 24.0 && s > 0.75 && s < 1.0);
        let prev = m - 1.0;
        assert!(prev <= 12.0 || 0.5 * (33.0f64 / (2.0 * prev + 1.0)).powi(2) > 17.0 / 24.0);
        assert!(smallest_outer_ratio(2, 3, 0.75, 0.5).is_none());
    }

    #[test]
    fn constant_solution_gives_reciprocal_constant() {
        let cfg = BoundednessConfig {
            law: EnvironmentLaw::ParetoMixture { a: 8.0, b: 8.0 },
            n: 8,
            trials: 2,
            data: DataKind::Constant,
            ..BoundednessConfig::default()
        };
        let exps = check(&cfg).unwrap();
        let t = trial(&cfg, &exps, 0).unwrap();
        let expected = 1.0 / t.boundedness.powf(4.0 / 3.0);
        assert!((t.bound_ratio - expected).abs() < 1e-12 * expected, "{} {}", t.bound_ratio, expected);
        assert!(t.bound_ratio <= 1.0);
    }

    #[test]
    fn unit_environment_passes() {
        let cfg = BoundednessConfig {
            n: 16,
            trials: 3,
            ..BoundednessConfig::default()
        };
        let rep = run_boundedness_harnack(&cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{}", rep.to_json());
    }
}
