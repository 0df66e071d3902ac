//! On-diagonal heat kernel bounds, trapping, and oscillation decay of the
//! kernel on nested parabolic cylinders.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Cell, ExperimentReport, MaximalNormRecord, ReportBuilder};
use crate::environment::EnvironmentLaw;
use crate::error::{config, Result};
use crate::exponents::{boundedness_constant, ExponentSet};
use crate::lattice::{ball, LatticeBox, Point};
use crate::rng::derive_seed;
use crate::solvers::{heat_kernel_in_law, HeatKernelColumn, SolverConfig};

/// Allowed growth of the ratio ceiling from the short-time sub-ladder to the full ladder.
pub const CEILING_GROWTH: f64 = 0.1;
/// Times up to this value form the short-time sub-ladder.
pub const SHORT_TIMES: f64 = 8.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatBoundsConfig {
    pub law: EnvironmentLaw,
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub t_ladder: Vec<f64>,
    pub seeds: usize,
    pub seed: u64,
    /// Exponent of the trap environment; 0 skips the trap branch.
    pub trap_qprime: f64,
    pub n_ladder: Vec<u32>,
    /// Scale of the kernel oscillation check; 0 skips it.
    pub holder_n: u32,
    pub holder_t: f64,
    pub solver: SolverConfig,
}

impl Default for HeatBoundsConfig {
    fn default() -> Self {
        HeatBoundsConfig {
            law: EnvironmentLaw::ParetoMixture { a: 8.0, b: 8.0 },
            dim: 2,
            p: 4.0,
            q: 4.0,
            t_ladder: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            seeds: 20,
            seed: 1,
            trap_qprime: 0.8,
            n_ladder: vec![8, 16],
            holder_n: 16,
            holder_t: 1.0,
            solver: SolverConfig::default(),
        }
    }
}

/// `e^{-2d n^{2 - d/q'}}`: the walk stays at the origin up to time `n^2`
/// with at least this probability.
pub fn trap_lower_bound(dim: usize, n: u32, qprime: f64) -> f64 {
    let n = n as f64;
    (-2.0 * dim as f64 * n.powf(2.0 - dim as f64 / qprime)).exp()
}

struct BoundRow {
    seed: u64,
    t: f64,
    value: f64,
    constant: f64,
    ratio: f64,
    maximal_ratio: f64,
}

fn bound_rows(cfg: &HeatBoundsConfig, exps: &ExponentSet, k: u64) -> Result<Vec<BoundRow>> {
    let seed = derive_seed(cfg.seed, "environment", k);
    let origin = Point::origin(cfg.dim);
    let (cols, w) = heat_kernel_in_law(&cfg.law, seed, cfg.dim, origin, &cfg.t_ladder, &cfg.solver)?;
    let power = 2.0 * cfg.p / (cfg.p - 1.0);
    let nu = exps.interpolation;
    let top = cfg.t_ladder.iter().copied().fold(1.0, f64::max).sqrt().floor() as u32;
    let mut norms = MaximalNormRecord::new(cfg.p);
    let mut inverse = MaximalNormRecord::new(cfg.q);
    for r in 1..=top {
        let b = LatticeBox::centered(cfg.dim, r);
        norms.push(r, w.norm(&b, cfg.p)?);
        inverse.push(r, w.inverse_norm(&b, cfg.q)?);
    }
    let mut rows = Vec::new();
    for col in &cols {
        let r = col.t.sqrt().floor().max(1.0) as u32;
        let b = LatticeBox::centered(cfg.dim, r);
        let constant = boundedness_constant(w.norm(&b, cfg.p)?, w.inverse_norm(&b, cfg.q)?, 1.0, nu)?;
        let value = col.value(&origin);
        let scaled = col.t.powf(cfg.dim as f64 / 2.0) * value;
        // Maximal norms over the balls up to radius sqrt(t).
        let i = (r as usize).min(norms.running_max.len()) - 1;
        let (mp, mq) = (norms.running_max[i], inverse.running_max[i]);
        let maximal = f64::max(1.0, (mq * (1.0 + mp).powf(2.0 - nu)).powf(1.0 / (1.0 - nu) * cfg.p / (cfg.p - 1.0)));
        rows.push(BoundRow {
            seed,
            t: col.t,
            value,
            constant,
            ratio: scaled / constant.powf(power),
            maximal_ratio: scaled / maximal,
        });
    }
    Ok(rows)
}

fn trap_value(cfg: &HeatBoundsConfig, n: u32) -> Result<f64> {
    let law = EnvironmentLaw::Trap {
        scale: n,
        qprime: cfg.trap_qprime,
    };
    let origin = Point::origin(cfg.dim);
    let (cols, _) = heat_kernel_in_law(&law, 0, cfg.dim, origin, &[(n as f64).powi(2)], &cfg.solver)?;
    Ok(cols[0].value(&origin))
}

/// Oscillation of `(s, y) -> p_{n^2 s}(0, y)` over the cylinders
/// `n^2 [t - r^2, t] x B(r n)` with `r = sqrt(t)/2` and `r/8`.
fn holder_ratio(cfg: &HeatBoundsConfig, seed: u64) -> Result<(f64, f64)> {
    let n = cfg.holder_n as f64;
    let t = cfg.holder_t;
    let radii = [0.5 * t.sqrt(), 0.5 * t.sqrt() / 8.0];
    let mut times: Vec<f64> = Vec::new();
    for r in radii {
        let (lo, hi) = (n * n * (t - r * r), n * n * t);
        times.extend((0..=16).map(|j| lo + (hi - lo) * j as f64 / 16.0));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    let origin = Point::origin(cfg.dim);
    let (cols, _) = heat_kernel_in_law(&cfg.law, seed, cfg.dim, origin, &times, &cfg.solver)?;
    let osc = |r: f64| -> f64 {
        let set = ball(origin, (r * n).floor() as u32);
        let lo_t = n * n * (t - r * r) - 1e-9;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for col in cols.iter().filter(|c: &&HeatKernelColumn| c.t >= lo_t) {
            for y in set.points() {
                let v = col.value(y);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        hi - lo
    };
    Ok((osc(radii[0]), osc(radii[1])))
}

fn check(cfg: &HeatBoundsConfig) -> Result<ExponentSet> {
    let exps = ExponentSet::derive(cfg.dim, cfg.p, cfg.q)?;
    cfg.law.validate()?;
    cfg.solver.validate()?;
    if cfg.t_ladder.is_empty() || cfg.n_ladder.is_empty() || cfg.seeds == 0 {
        return Err(config("ladders and seed count must be nonempty"));
    }
    if cfg.t_ladder.iter().any(|t| !(*t >= 1.0 && t.is_finite())) {
        return Err(config("ladder times must be at least 1"));
    }
    if cfg.n_ladder.contains(&0) {
        return Err(config("n ladder entries must be positive"));
    }
    if !(cfg.trap_qprime >= 0.0) || !(cfg.holder_t > 0.0) {
        return Err(config("trap exponent must be nonnegative and holder time positive"));
    }
    Ok(exps)
}

pub fn run_heat_bounds(cfg: &HeatBoundsConfig) -> Result<ExperimentReport> {
    let started = std::time::Instant::now();
    let exps = check(cfg)?;
    let mut ladder = cfg.t_ladder.clone();
    ladder.sort_by(f64::total_cmp);
    ladder.dedup();
    let cfg = &HeatBoundsConfig {
        t_ladder: ladder,
        ..cfg.clone()
    };
    let per_seed: Vec<Vec<BoundRow>> = (0..cfg.seeds as u64)
        .into_par_iter()
        .map(|k| bound_rows(cfg, &exps, k))
        .collect::<Result<_>>()?;
    let rows: Vec<BoundRow> = per_seed.into_iter().flatten().collect();

    let mut rep = ReportBuilder::new(
        "heat_bounds",
        cfg,
        &["branch", "environment_seed", "t", "n", "kernel", "constant", "ratio", "maximal_ratio"],
        started,
    );
    for r in &rows {
        rep.row(vec![
            "bound".into(),
            r.seed.into(),
            r.t.into(),
            0usize.into(),
            r.value.into(),
            r.constant.into(),
            r.ratio.into(),
            r.maximal_ratio.into(),
        ]);
    }
    let ceiling = |limit: f64| {
        rows.iter()
            .filter(|r| r.t <= limit)
            .map(|r| r.ratio)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let (short, full) = (ceiling(SHORT_TIMES), ceiling(f64::INFINITY));
    let running: Vec<f64> = cfg
        .t_ladder
        .iter()
        .map(|&t| ceiling(t))
        .collect();
    rep.measure("ratio_running_max", &running);
    rep.measure("ratio_ceiling_short", short);
    rep.measure("ratio_ceiling", full);
    rep.measure(
        "maximal_ratio_ceiling",
        rows.iter().map(|r| r.maximal_ratio).fold(f64::NEG_INFINITY, f64::max),
    );
    rep.rule("ratio_finite", rows.iter().all(|r| r.ratio.is_finite() && r.ratio > 0.0), "all ratios finite and positive");
    if short.is_finite() {
        rep.rule(
            "ceiling_stable",
            full <= (1.0 + CEILING_GROWTH) * short,
            format!("ceiling {full:.6} on the full ladder, {short:.6} for t <= {SHORT_TIMES}"),
        );
    }

    if cfg.trap_qprime > 0.0 {
        let values: Vec<f64> = cfg
            .n_ladder
            .par_iter()
            .map(|&n| trap_value(cfg, n))
            .collect::<Result<_>>()?;
        let mut lower_ok = true;
        let mut scaled = Vec::new();
        for (&n, &v) in cfg.n_ladder.iter().zip(&values) {
            let bound = trap_lower_bound(cfg.dim, n, cfg.trap_qprime);
            lower_ok &= v >= bound - 1e-10;
            let s = (n as f64).powi(cfg.dim as i32) * v;
            scaled.push(s);
            rep.row(vec![
                "trap".into(),
                0u64.into(),
                (n as f64).powi(2).into(),
                Cell::from(n as usize),
                v.into(),
                bound.into(),
                s.into(),
                f64::NAN.into(),
            ]);
        }
        rep.measure("trap_scaled_kernel", &scaled);
        rep.rule("trap_lower_bound", lower_ok, "p_{n^2}(0,0) above the holding-time bound");
        if scaled.len() >= 2 {
            let growth = scaled[scaled.len() - 1] / scaled[0];
            rep.measure("trap_growth", growth);
            rep.rule("trap_growth", growth >= 2.0, format!("n^d p grows by {growth:.6}"));
        }
    }

    if cfg.holder_n > 0 {
        let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|k| derive_seed(cfg.seed, "environment", k)).collect();
        let oscs: Vec<(f64, f64)> = seeds.par_iter().map(|&s| holder_ratio(cfg, s)).collect::<Result<_>>()?;
        let nd = (cfg.holder_n as f64).powi(cfg.dim as i32);
        let mut ratios = Vec::new();
        for (&s, &(outer, inner)) in seeds.iter().zip(&oscs) {
            let ratio = inner / outer;
            ratios.push(ratio);
            rep.row(vec![
                "holder".into(),
                s.into(),
                cfg.holder_t.into(),
                Cell::from(cfg.holder_n as usize),
                (nd * outer).into(),
                (nd * inner).into(),
                ratio.into(),
                f64::NAN.into(),
            ]);
        }
        rep.measure("holder_ratio", super::Distribution::of(&ratios));
        rep.rule("holder_decay", ratios.iter().all(|r| *r < 1.0), "kernel oscillation shrinks on the inner cylinder");
    }
    rep.counts(rows.len(), 0);
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Verdict;

    #[test]
    fn trap_bound_example() {
        // d = 2, q' = 0.8, n = 10: e^{-4 * 10^{-1/2}}.
        let b = trap_lower_bound(2, 10, 0.8);
        assert!((b - (-4.0 / 10f64.sqrt()).exp()).abs() < 1e-15);
        assert!(b >= 0.28226 && 100.0 * b >= 28.2);
    }

    #[test]
    fn unit_environment_small_ladder() {
        let cfg = HeatBoundsConfig {
            law: EnvironmentLaw::Constant { value: 1.0 },
            t_ladder: vec![1.0, 4.0, 16.0],
            seeds: 1,
            n_ladder: vec![4, 8],
            holder_n: 8,
            ..HeatBoundsConfig::default()
        };
        let rep = run_heat_bounds(&cfg).unwrap();
        assert!(rep.rule("ratio_finite").unwrap().verdict == Verdict::Pass);
        assert!(rep.rule("trap_lower_bound").unwrap().verdict == Verdict::Pass);
        assert!(rep.rule("holder_decay").unwrap().verdict == Verdict::Pass);
        // t p_t(0,0) = t (e^{-2t} I_0(2t))^2 decreases for the unit field.
        assert!(rep.rule("ceiling_stable").unwrap().verdict == Verdict::Pass);
    }
}
