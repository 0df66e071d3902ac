//! Weak Harnack inequality and local boundedness for positive harmonic
//! functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{dirichlet_data, DataKind};
use super::{Cell, Distribution, ExperimentReport, ReportBuilder};
use crate::calculus::{lp_norm, pairwise_sum, VertexField};
use crate::environment::{ConductanceField, EnvironmentLaw};
use crate::error::{config, Result};
use crate::exponents::ExponentSet;
use crate::lattice::{ball, LatticeBox};
use crate::rng::derive_seed;
use crate::solvers::solve_harmonic;

/// Density used to pick the level: the median on `B(2n)`.
pub const LEVEL_DENSITY: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticHarnackConfig {
    pub law: EnvironmentLaw,
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub n: u32,
    pub trials: usize,
    pub seed: u64,
    pub c_free: f64,
    pub data: DataKind,
}

impl Default for EllipticHarnackConfig {
    fn default() -> Self {
        EllipticHarnackConfig {
            law: EnvironmentLaw::Constant { value: 1.0 },
            dim: 2,
            p: 4.0,
            q: 4.0,
            n: 16,
            trials: 50,
            seed: 1,
            c_free: 1.0,
            data: DataKind::Smoothed,
        }
    }
}

/// Exponent of `Lambda` in the lower bound: 1/2 for d = 2, otherwise
/// `1/2 + (gap + 1)/gap * p' (1/2 + 1/q - 1/d)` with `gap = 1/(d-1) - 1/(2p) - 1/(2q)`.
pub fn harnack_exponent(dim: usize, p: f64, q: f64) -> f64 {
    if dim == 2 {
        return 0.5;
    }
    let d = dim as f64;
    let gap = 1.0 / (d - 1.0) - 0.5 / p - 0.5 / q;
    let pp = p / (p - 1.0);
    0.5 + (gap + 1.0) / gap * pp * (0.5 + 1.0 / q - 1.0 / d)
}

/// `Lambda_{p,q}(S) = ||w||_p ||1/w||_q`, both normalized.
pub fn moment_balance(w: &ConductanceField, set: &LatticeBox, p: f64, q: f64) -> Result<f64> {
    Ok(w.norm(set, p)? * w.inverse_norm(set, q)?)
}

/// Level `epsilon`, measured density, and `epsilon exp(-c lambda^-1 Lambda^e)`.
pub fn harnack_floor(cfg: &EllipticHarnackConfig, u: &VertexField, w: &ConductanceField, center: &LatticeBox) -> Result<(f64, f64, f64, f64)> {
    let middle = LatticeBox::new(center.center(), 2 * cfg.n);
    let mut values: Vec<f64> = middle.points().map(|x| u.get(&x).unwrap()).collect();
    values.sort_by(f64::total_cmp);
    let level = values[((values.len() - 1) as f64 * (1.0 - LEVEL_DENSITY)).floor() as usize];
    let density = values.iter().filter(|&&v| v >= level).count() as f64 / values.len() as f64;
    let outer = LatticeBox::new(center.center(), 4 * cfg.n);
    let balance = if cfg.dim == 2 {
        moment_balance(w, &outer, 1.0, 1.0)?
    } else {
        moment_balance(w, &outer, cfg.p, cfg.q)?
    };
    let gamma = level * (-cfg.c_free / density * balance.powf(harnack_exponent(cfg.dim, cfg.p, cfg.q))).exp();
    Ok((level, density, balance, gamma))
}

/// `max_{B(n)} u` over the right side of the local bound with unit constant.
fn boundedness_ratio(cfg: &EllipticHarnackConfig, u: &VertexField, w: &ConductanceField, center: &LatticeBox) -> Result<f64> {
    let inner = ball(center.center(), cfg.n);
    let middle = LatticeBox::new(center.center(), 2 * cfg.n);
    let sup = u.max(&inner)?;
    let values: Vec<f64> = middle.points().map(|x| u.get(&x).unwrap()).collect();
    let rhs = if cfg.dim == 2 {
        let energy: Vec<f64> = middle
            .bonds()
            .map(|b| {
                let g = u.get(&b.upper()).unwrap() - u.get(&b.lower()).unwrap();
                w.get(&b).unwrap() * g * g
            })
            .collect();
        let gradient = (pairwise_sum(&energy) / energy.len() as f64).sqrt();
        cfg.n as f64 * w.inverse_norm(&middle, 1.0)?.sqrt() * gradient + lp_norm(&values, 1.0, true)?
    } else {
        // Integrability parameter 1 in the d >= 3 bound.
        let gap = 1.0 / (cfg.dim as f64 - 1.0) - 0.5 / cfg.p - 0.5 / cfg.q;
        let pp = cfg.p / (cfg.p - 1.0);
        moment_balance(w, &middle, cfg.p, cfg.q)?.powf((gap + 1.0) / (2.0 * gap)) * lp_norm(&values, 2.0 * pp, true)?
    };
    Ok(sup / rhs)
}

struct Trial {
    env_seed: u64,
    data_seed: u64,
    level: f64,
    density: f64,
    balance: f64,
    harnack_ratio: f64,
    bound_ratio: f64,
    residual: f64,
}

fn trial(cfg: &EllipticHarnackConfig, k: u64) -> Result<Trial> {
    let env_seed = derive_seed(cfg.seed, "environment", k);
    let data_seed = derive_seed(cfg.seed, "data", k);
    let region = LatticeBox::centered(cfg.dim, 4 * cfg.n);
    let w = cfg.law.generate(env_seed, region)?;
    let sol = solve_harmonic(&w, &region, &dirichlet_data(&region, cfg.data, true, data_seed))?;
    let (level, density, balance, gamma) = harnack_floor(cfg, &sol.field, &w, &region)?;
    let low = sol.field.min(&ball(region.center(), cfg.n))?;
    Ok(Trial {
        env_seed,
        data_seed,
        level,
        density,
        balance,
        harnack_ratio: low / gamma,
        bound_ratio: boundedness_ratio(cfg, &sol.field, &w, &region)?,
        residual: sol.residual,
    })
}

fn check(cfg: &EllipticHarnackConfig) -> Result<()> {
    ExponentSet::derive(cfg.dim, cfg.p, cfg.q)?;
    cfg.law.validate()?;
    if cfg.n == 0 || cfg.trials == 0 {
        return Err(config("need n >= 1 and at least one trial"));
    }
    if !(cfg.c_free > 0.0 && cfg.c_free.is_finite()) {
        return Err(config("c_free must be positive"));
    }
    Ok(())
}

pub fn run_elliptic_harnack(cfg: &EllipticHarnackConfig) -> Result<ExperimentReport> {
    let started = std::time::Instant::now();
    check(cfg)?;
    let results: Vec<Trial> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|k| trial(cfg, k))
        .collect::<Result<_>>()?;
    let mut rep = ReportBuilder::new(
        "elliptic_harnack",
        cfg,
        &[
            "trial", "environment_seed", "data_seed", "level", "density", "moment_balance", "harnack_ratio",
            "bound_ratio", "residual",
        ],
        started,
    );
    for (k, t) in results.iter().enumerate() {
        rep.row(vec![
            Cell::from(k),
            t.env_seed.into(),
            t.data_seed.into(),
            t.level.into(),
            t.density.into(),
            t.balance.into(),
            t.harnack_ratio.into(),
            t.bound_ratio.into(),
            t.residual.into(),
        ]);
    }
    // The level is a quantile, so the density hypothesis always holds.
    let skipped = results.iter().filter(|t| t.density < LEVEL_DENSITY).count();
    rep.counts(results.len(), skipped);
    let harnack: Vec<f64> = results
        .iter()
        .filter(|t| t.density >= LEVEL_DENSITY)
        .map(|t| t.harnack_ratio)
        .collect();
    let hd = Distribution::of(&harnack);
    let bd = Distribution::of(&results.iter().map(|t| t.bound_ratio).collect::<Vec<_>>());
    rep.measure("harnack_ratio", &hd);
    rep.measure("bound_ratio", &bd);
    rep.rule(
        "harnack_ratio_at_least_one",
        harnack.iter().all(|&r| r >= 1.0),
        format!("smallest ratio {:.6} over {} trials", hd.min, hd.count),
    );
    rep.rule(
        "moment_balance_at_least_one",
        results.iter().all(|t| t.balance >= 1.0 - 1e-12),
        "Jensen lower bound on the moment product",
    );
    rep.rule(
        "bound_ratio_finite",
        results.iter().all(|t| t.bound_ratio.is_finite() && t.bound_ratio > 0.0),
        format!("bound ratio ceiling {:.6}", bd.max),
    );
    Ok(rep.finish())
}
