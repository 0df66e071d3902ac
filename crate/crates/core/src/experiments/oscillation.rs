//! Oscillation decay of caloric functions on nested cylinders and of
//! harmonic functions on nested balls.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{caloric_data, dirichlet_data, DataKind};
use super::{Cell, Distribution, ExperimentReport, ReportBuilder};
use crate::environment::EnvironmentLaw;
use crate::error::{config, Result};
use crate::exponents::ExponentSet;
use crate::lattice::{ball, LatticeBox};
use crate::rng::derive_seed;
use crate::solvers::{solve_caloric_ibvp, solve_harmonic, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OscillationMode {
    Parabolic,
    Elliptic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationConfig {
    pub mode: OscillationMode,
    pub law: EnvironmentLaw,
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    pub n: u32,
    pub trials: usize,
    pub seed: u64,
    pub data: DataKind,
    /// Number of linear pieces of the lateral data in time.
    pub knots: usize,
    pub solver: SolverConfig,
}

impl Default for OscillationConfig {
    fn default() -> Self {
        OscillationConfig {
            mode: OscillationMode::Parabolic,
            law: EnvironmentLaw::ParetoMixture { a: 8.0, b: 8.0 },
            dim: 2,
            p: 4.0,
            q: 4.0,
            n: 64,
            trials: 50,
            seed: 1,
            data: DataKind::Smoothed,
            knots: 16,
            solver: SolverConfig::default(),
        }
    }
}

struct Trial {
    env_seed: u64,
    data_seed: u64,
    small: f64,
    large: f64,
    norm_p: f64,
    inv_norm_q: f64,
    residual: f64,
    within_data_range: bool,
}

impl Trial {
    fn degenerate(&self) -> bool {
        self.large < 1e-12
    }

    fn ratio(&self) -> f64 {
        if self.degenerate() {
            f64::NAN
        } else {
            self.small / self.large
        }
    }
}

fn parabolic_trial(cfg: &OscillationConfig, law: &EnvironmentLaw, data: DataKind, env_seed: u64, data_seed: u64) -> Result<Trial> {
    let n = cfg.n;
    let region = LatticeBox::centered(cfg.dim, n);
    let w = law.generate(env_seed, region)?;
    let top = (n as f64).powi(2);
    let m = n / 8;
    let window = (m as f64).powi(2);
    let knots: Vec<f64> = (0..=cfg.knots).map(|k| top * k as f64 / cfg.knots as f64).collect();
    let (lateral, initial) = caloric_data(&region, &knots, data, false, data_seed);
    let steps = (window / cfg.solver.time_step).ceil().max(1.0) as usize;
    let mut times = vec![0.0];
    times.extend((0..=steps).map(|k| top - window + window * k as f64 / steps as f64));
    let sol = solve_caloric_ibvp(&w, &region, &times, &lateral, &initial, &cfg.solver)?;

    let inner = ball(region.center(), m);
    let small = sol.field.oscillation(top - window, top, &inner)?;
    // By the maximum principle the oscillation over the full cylinder is
    // that of the data on its parabolic boundary.
    let data_values = lateral.values.iter().flatten().chain(initial.iter());
    let (lo, hi) = data_values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let slack = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    let within = sol.field.values().iter().all(|&v| v >= lo - slack && v <= hi + slack);
    Ok(Trial {
        env_seed,
        data_seed,
        small,
        large: hi - lo,
        norm_p: w.norm(&region, cfg.p)?,
        inv_norm_q: w.inverse_norm(&region, cfg.q)?,
        residual: sol.residual,
        within_data_range: within,
    })
}

fn elliptic_trial(cfg: &OscillationConfig, law: &EnvironmentLaw, data: DataKind, env_seed: u64, data_seed: u64) -> Result<Trial> {
    let n = cfg.n;
    let region = LatticeBox::centered(cfg.dim, 4 * n);
    let w = law.generate(env_seed, region)?;
    let boundary = dirichlet_data(&region, data, false, data_seed);
    let sol = solve_harmonic(&w, &region, &boundary)?;
    let inner = ball(region.center(), n);
    let small = sol.field.oscillation(&inner)?;
    let (lo, hi) = boundary.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let slack = 1e-9 * (1.0 + hi.abs().max(lo.abs()));
    let within = sol.field.values().iter().all(|&v| v >= lo - slack && v <= hi + slack);
    // The oscillation on B(4n) is that of the data.
    Ok(Trial {
        env_seed,
        data_seed,
        small,
        large: hi - lo,
        norm_p: w.norm(&region, cfg.p)?,
        inv_norm_q: w.inverse_norm(&region, cfg.q)?,
        residual: sol.residual,
        within_data_range: within,
    })
}

pub fn run_oscillation(cfg: &OscillationConfig) -> Result<ExperimentReport> {
    let started = std::time::Instant::now();
    ExponentSet::derive(cfg.dim, cfg.p, cfg.q)?;
    cfg.law.validate()?;
    cfg.solver.validate()?;
    if cfg.n < 16 {
        return Err(config("oscillation runs need n >= 16"));
    }
    if cfg.trials == 0 || cfg.knots == 0 {
        return Err(config("trials and knots must be positive"));
    }
    let name = match cfg.mode {
        OscillationMode::Parabolic => "oscillation_parabolic",
        OscillationMode::Elliptic => "oscillation_elliptic",
    };
    let trial = |law: &EnvironmentLaw, data: DataKind, e: u64, s: u64| match cfg.mode {
        OscillationMode::Parabolic => parabolic_trial(cfg, law, data, e, s),
        OscillationMode::Elliptic => elliptic_trial(cfg, law, data, e, s),
    };
    let results: Vec<Trial> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|k| {
            trial(
                &cfg.law,
                cfg.data,
                derive_seed(cfg.seed, "environment", k),
                derive_seed(cfg.seed, "data", k),
            )
        })
        .collect::<Result<_>>()?;

    let mut rep = ReportBuilder::new(
        name,
        cfg,
        &[
            "trial", "environment_seed", "data_seed", "ratio", "osc_small", "osc_large", "norm_p", "inv_norm_q",
            "residual", "degenerate",
        ],
        started,
    );
    for (k, t) in results.iter().enumerate() {
        rep.row(vec![
            Cell::from(k),
            t.env_seed.into(),
            t.data_seed.into(),
            t.ratio().into(),
            t.small.into(),
            t.large.into(),
            t.norm_p.into(),
            t.inv_norm_q.into(),
            t.residual.into(),
            t.degenerate().into(),
        ]);
    }
    let ratios: Vec<f64> = results.iter().map(Trial::ratio).collect();
    let degenerate = results.iter().filter(|t| t.degenerate()).count();
    rep.counts(results.len(), degenerate);
    let dist = Distribution::of(&ratios);
    rep.measure("ratio", &dist);
    rep.measure("degenerate_trials", degenerate);
    rep.measure("max_residual", results.iter().fold(0.0, |m: f64, t| m.max(t.residual)));
    let below = ratios.iter().filter(|r| !r.is_nan()).all(|&r| r < 1.0);
    rep.rule(
        "ratio_below_one",
        below,
        format!("largest ratio {:.6} over {} non-degenerate trials", dist.max, dist.count),
    );
    let within = results.iter().all(|t| t.within_data_range);
    rep.rule("maximum_principle", within, "solutions stay within the range of their data");

    if cfg.mode == OscillationMode::Elliptic {
        // Linear data in the unit environment: oscillations 2n and 8n.
        let unit = EnvironmentLaw::Constant { value: 1.0 };
        let control = trial(&unit, DataKind::Linear, 0, 0)?;
        let ratio = control.ratio();
        rep.measure("linear_control_ratio", ratio);
        rep.rule(
            "linear_control",
            (ratio - 0.25).abs() <= 0.02,
            format!("ratio {ratio:.6} for linear data, expected 0.25"),
        );
    }
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Verdict;

    #[test]
    fn constant_data_is_degenerate() {
        let cfg = OscillationConfig {
            mode: OscillationMode::Elliptic,
            n: 16,
            trials: 2,
            data: DataKind::Constant,
            ..OscillationConfig::default()
        };
        let rep = run_oscillation(&cfg).unwrap();
        assert_eq!(rep.skipped, 2);
        assert_eq!(rep.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn small_parabolic_run() {
        let cfg = OscillationConfig {
            n: 16,
            trials: 3,
            ..OscillationConfig::default()
        };
        let rep = run_oscillation(&cfg).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{}", rep.to_json());
        assert_eq!(rep.table.rows.len(), 3);
    }
}
