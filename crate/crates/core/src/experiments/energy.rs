//! Energy inequalities evaluated on computed caloric functions.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{caloric_data, DataKind};
use super::{Cell, ExperimentReport, ReportBuilder};
use crate::environment::EnvironmentLaw;
use crate::error::{config, Result};
use crate::inequalities::{caccioppoli_check, linear_cutoff, log_caccioppoli_check, EnergyCheck};
use crate::lattice::LatticeBox;
use crate::rng::derive_seed;
use crate::solvers::{solve_caloric_ibvp, CaloricSolution, SolverConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergySuiteConfig {
    pub law: EnvironmentLaw,
    pub dim: usize,
    pub n: u32,
    pub instances: usize,
    pub log_instances: usize,
    pub powers: Vec<f64>,
    pub seed: u64,
    pub knots: usize,
    pub solver: SolverConfig,
}

impl Default for EnergySuiteConfig {
    fn default() -> Self {
        EnergySuiteConfig {
            law: EnvironmentLaw::ParetoMixture { a: 8.0, b: 8.0 },
            dim: 2,
            n: 16,
            instances: 100,
            log_instances: 50,
            powers: vec![1.0, 2.0],
            seed: 1,
            knots: 16,
            solver: SolverConfig::default(),
        }
    }
}

struct Instance {
    env_seed: u64,
    data_seed: u64,
    checks: Vec<(String, EnergyCheck)>,
}

fn solve(cfg: &EnergySuiteConfig, law: &EnvironmentLaw, env_seed: u64, data_seed: u64) -> Result<(CaloricSolution, LatticeBox)> {
    let region = LatticeBox::centered(cfg.dim, cfg.n);
    let w = law.generate(env_seed, region)?;
    let top = (cfg.n as f64).powi(2);
    let knots: Vec<f64> = (0..=cfg.knots).map(|j| top * j as f64 / cfg.knots as f64).collect();
    let (lateral, initial) = caloric_data(&region, &knots, DataKind::Smoothed, true, data_seed);
    let steps = (top / cfg.solver.time_step).ceil() as usize;
    let times: Vec<f64> = (0..=steps).map(|j| top * j as f64 / steps as f64).collect();
    Ok((solve_caloric_ibvp(&w, &region, &times, &lateral, &initial, &cfg.solver)?, region))
}

fn instance(cfg: &EnergySuiteConfig, k: u64, with_powers: bool, with_log: bool) -> Result<Instance> {
    let env_seed = derive_seed(cfg.seed, "environment", k);
    let data_seed = derive_seed(cfg.seed, "data", k);
    let (sol, region) = solve(cfg, &cfg.law, env_seed, data_seed)?;
    let w = cfg.law.generate(env_seed, region)?;
    let set = Arc::new(region.to_set());
    let eta = linear_cutoff(set, region.center(), cfg.n / 2, cfg.n);
    let top = (cfg.n as f64).powi(2);
    let mut checks = Vec::new();
    if with_powers {
        for &a in &cfg.powers {
            checks.push((format!("caccioppoli_{a}"), caccioppoli_check(&w, &sol.field, &eta, a, 0.5 * top, top)?));
        }
    }
    if with_log {
        checks.push(("log_caccioppoli".to_string(), log_caccioppoli_check(&w, &sol.field, &eta)?));
    }
    Ok(Instance {
        env_seed,
        data_seed,
        checks,
    })
}

pub fn run_energy_suite(cfg: &EnergySuiteConfig) -> Result<ExperimentReport> {
    let started = std::time::Instant::now();
    cfg.law.validate()?;
    cfg.solver.validate()?;
    if cfg.dim < 1 || cfg.n < 2 || cfg.knots == 0 {
        return Err(config("need d >= 1, n >= 2 and at least one knot"));
    }
    if cfg.powers.iter().any(|a| !(*a >= 1.0 && a.is_finite())) {
        return Err(config("powers must be at least 1"));
    }
    let count = cfg.instances.max(cfg.log_instances);
    let results: Vec<Instance> = (0..count as u64)
        .into_par_iter()
        .map(|k| instance(cfg, k, (k as usize) < cfg.instances, (k as usize) < cfg.log_instances))
        .collect::<Result<_>>()?;

    let mut rep = ReportBuilder::new(
        "energy_suite",
        cfg,
        &["instance", "environment_seed", "data_seed", "inequality", "lhs", "rhs", "slack", "violations", "evaluations"],
        started,
    );
    let mut totals: Vec<(String, usize, usize)> = Vec::new();
    for (k, inst) in results.iter().enumerate() {
        for (name, c) in &inst.checks {
            rep.row(vec![
                Cell::from(k),
                inst.env_seed.into(),
                inst.data_seed.into(),
                name.as_str().into(),
                c.lhs.into(),
                c.rhs.into(),
                c.slack.into(),
                c.violations.into(),
                c.evaluations.into(),
            ]);
            match totals.iter_mut().find(|(n, _, _)| n == name) {
                Some(t) => {
                    t.1 += 1;
                    t.2 += c.violations;
                }
                None => totals.push((name.clone(), 1, c.violations)),
            }
        }
    }
    for (name, instances, violations) in &totals {
        rep.measure(&format!("{name}_violations"), violations);
        rep.rule(
            name,
            *violations == 0,
            format!("{violations} violations over {instances} instances"),
        );
    }
    rep.counts(results.len(), 0);
    Ok(rep.finish())
}
