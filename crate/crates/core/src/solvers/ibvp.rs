//! Caloric initial-boundary value problems on a box.
//!
//! Between consecutive step endpoints the lateral data is linear, so the
//! state (interior values, boundary values, boundary slope) evolves under a
//! linear generator whose lazy step moves each boundary value by
//! `slope / rate`. Uniformizing that augmented generator integrates the
//! boundary forcing exactly; only the Poisson tail is truncated.

use std::sync::Arc;

use super::operator::BoxOperator;
use super::uniformization::PoissonWindow;
use super::SolverConfig;
use crate::calculus::SpaceTimeField;
use crate::environment::ConductanceField;
use crate::error::{domain, Error, Result};
use crate::lattice::LatticeBox;

/// Values on the interior boundary of a box at increasing knots, linear in
/// between. `values[k]` lists boundary vertices in lexicographic order.
#[derive(Clone, Debug)]
pub struct LateralData {
    pub knots: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl LateralData {
    /// Data that does not depend on time.
    pub fn constant(t0: f64, t1: f64, values: Vec<f64>) -> LateralData {
        LateralData {
            knots: vec![t0, t1],
            values: vec![values.clone(), values],
        }
    }

    fn validate(&self, count: usize) -> Result<()> {
        if self.knots.is_empty() || self.knots.len() != self.values.len() {
            return Err(domain("lateral data needs one value vector per knot"));
        }
        if self.knots.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("lateral knots must be strictly increasing"));
        }
        if let Some(v) = self.values.iter().find(|v| v.len() != count) {
            return Err(domain(format!("lateral vector has {} entries, boundary has {count}", v.len())));
        }
        if self.values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(domain("lateral data must be finite"));
        }
        Ok(())
    }

    /// Interpolated data at `t` and the slope of the piece starting at `t`.
    fn at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let k = self.knots.partition_point(|&s| s <= t).clamp(1, self.knots.len().max(2) - 1);
        if self.knots.len() == 1 {
            return (self.values[0].clone(), vec![0.0; self.values[0].len()]);
        }
        let (t0, t1) = (self.knots[k - 1], self.knots[k]);
        let (a, b) = (&self.values[k - 1], &self.values[k]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let value = a.iter().zip(b).map(|(x, y)| x + s * (y - x)).collect();
        let slope = a.iter().zip(b).map(|(x, y)| (y - x) / h).collect();
        (value, slope)
    }

    fn sup(&self) -> f64 {
        self.values.iter().flatten().fold(0.0, |m, v| f64::max(m, v.abs()))
    }
}

/// A caloric function on a box with its worst equation residual.
#[derive(Clone, Debug)]
pub struct CaloricSolution {
    pub field: SpaceTimeField,
    /// Largest `|d/dt u - L u|` over interior vertices and stored instants.
    pub residual: f64,
}

/// Solves `d/dt u = L u` on the interior of `region` for `t` in
/// `[times[0], times[last]]`, with `u = lateral` on its interior boundary and
/// `u(times[0]) = initial` inside. Values are stored at each of `times`.
/// On boundary vertices the lateral data overrides `initial`.
pub fn solve_caloric_ibvp(
    w: &ConductanceField,
    region: &LatticeBox,
    times: &[f64],
    lateral: &LateralData,
    initial: &[f64],
    cfg: &SolverConfig,
) -> Result<CaloricSolution> {
    let local = w.restrict(region)?;
    let op = BoxOperator::new(&local)?;
    let n = region.len();
    if initial.len() != n {
        return Err(domain("initial data does not match the region"));
    }
    if initial.iter().any(|v| !v.is_finite()) {
        return Err(domain("initial data must be finite"));
    }
    lateral.validate(op.boundary().len())?;
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(domain("stored instants must be strictly increasing"));
    }
    let (t_start, t_end) = (times[0], times[times.len() - 1]);
    let span = 1e-12 * (1.0 + t_end.abs());
    if lateral.knots[0] > t_start + span || lateral.knots[lateral.knots.len() - 1] < t_end - span {
        return Err(domain("lateral data does not cover the time interval"));
    }
    let scale = initial
        .iter()
        .fold(lateral.sup(), |m, v| f64::max(m, v.abs()))
        .max(1.0);
    let tolerance = cfg.residual_tol * scale;

    let mut ends: Vec<f64> = times.to_vec();
    ends.extend(lateral.knots.iter().copied().filter(|&k| k > t_start && k < t_end));
    ends.sort_by(f64::total_cmp);
    ends.dedup_by(|a, b| (*a - *b).abs() <= span);

    let mut state = initial.to_vec();
    let (g0, _) = lateral.at(t_start);
    for (&i, v) in op.boundary().iter().zip(g0) {
        state[i] = v;
    }
    let mut stored = Vec::with_capacity(times.len() * n);
    stored.extend_from_slice(&state);
    let mut residual: f64 = 0.0;
    let mut next_store = 1;
    for pair in ends.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let (value, worst) = advance_refined(&op, lateral, &state, a, b, cfg, tolerance)?;
        state = value;
        if next_store < times.len() && (times[next_store] - b).abs() <= span {
            residual = residual.max(worst);
            stored.extend_from_slice(&state);
            next_store += 1;
        }
    }
    let field = SpaceTimeField::new(times.to_vec(), Arc::new(region.to_set()), stored)?;
    Ok(CaloricSolution { field, residual })
}

fn advance_refined(
    op: &BoxOperator,
    lateral: &LateralData,
    state: &[f64],
    a: f64,
    b: f64,
    cfg: &SolverConfig,
    tolerance: f64,
) -> Result<(Vec<f64>, f64)> {
    const BUDGET: u32 = 4;
    let mut last = f64::NAN;
    for attempt in 0..BUDGET {
        let pieces = 1usize << attempt;
        let series_tol = cfg.series_tol * 1e-2f64.powi(attempt as i32);
        let mut cur = state.to_vec();
        let mut worst = 0.0;
        for j in 0..pieces {
            let s0 = a + (b - a) * j as f64 / pieces as f64;
            let s1 = if j + 1 == pieces { b } else { a + (b - a) * (j + 1) as f64 / pieces as f64 };
            let (value, r) = advance(op, lateral, &cur, s0, s1, series_tol);
            cur = value;
            worst = r;
        }
        if worst <= tolerance {
            return Ok((cur, worst));
        }
        last = worst;
    }
    Err(Error::Solver(format!(
        "caloric residual {last:e} above {tolerance:e} on [{a}, {b}] after {BUDGET} refinements"
    )))
}

/// One augmented uniformization step from `a` to `b`; returns the state at
/// `b` and the residual there.
fn advance(op: &BoxOperator, lateral: &LateralData, state: &[f64], a: f64, b: f64, tol: f64) -> (Vec<f64>, f64) {
    let rate = op.rate();
    let n = state.len();
    let window = PoissonWindow::new(rate * (b - a), tol);
    let (_, slope) = lateral.at(a);
    let shift: Vec<f64> = slope.iter().map(|s| s / rate).collect();
    let mut value = vec![0.0; n];
    let mut deriv = vec![0.0; n];
    let mut cur = state.to_vec();
    let mut next = cur.clone();
    let end = window.end();
    for k in 0..=end {
        let wk = window.weight(k);
        let prev = if k == 0 { 0.0 } else { window.weight(k - 1) };
        let dk = rate * (prev - wk);
        if k == end {
            deriv.iter_mut().zip(&cur).for_each(|(d, c)| *d += dk * c);
            break;
        }
        op.lazy_step(&cur, &mut next, &mut [(&mut value, wk), (&mut deriv, dk)]);
        for (&i, s) in op.boundary().iter().zip(&shift) {
            next[i] = cur[i] + s;
        }
        std::mem::swap(&mut cur, &mut next);
    }
    let (g, _) = lateral.at(b);
    for (&i, v) in op.boundary().iter().zip(g) {
        value[i] = v;
    }
    let mut lu = vec![0.0; n];
    op.generator(&value, &mut lu);
    let mut worst: f64 = 0.0;
    for (i, (&l, &d)) in lu.iter().zip(&deriv).enumerate() {
        if !op.boundary().binary_search(&i).is_ok() {
            worst = worst.max((l - d).abs());
        }
    }
    (value, worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lateral_interpolation_is_piecewise_linear() {
        let data = LateralData {
            knots: vec![0.0, 2.0, 3.0],
            values: vec![vec![0.0], vec![4.0], vec![1.0]],
        };
        let (v, s) = data.at(1.0);
        assert_eq!((v[0], s[0]), (2.0, 2.0));
        let (v, s) = data.at(2.0);
        assert_eq!((v[0], s[0]), (4.0, -3.0));
        let (v, _) = data.at(3.0);
        assert_eq!(v[0], 1.0);
    }

    #[test]
    fn one_dimensional_linear_profile_is_stationary() {
        let region = LatticeBox::centered(1, 5);
        let w = ConductanceField::constant(region, 2.0).unwrap();
        let initial: Vec<f64> = region.points().map(|p| p.get(0) as f64).collect();
        let lateral = LateralData::constant(0.0, 3.0, vec![-5.0, 5.0]);
        let sol = solve_caloric_ibvp(&w, &region, &[0.0, 1.5, 3.0], &lateral, &initial, &SolverConfig::default()).unwrap();
        for k in 0..3 {
            for (a, b) in sol.field.slice(k).iter().zip(&initial) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert!(sol.residual < 1e-10);
    }
}
