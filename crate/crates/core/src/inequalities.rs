//! Radial cutoff optimisation, Sobolev ratios, energy (Caccioppoli-type)
//! checks on computed solutions and randomized suites for the elementary
//! chain-rule inequalities.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::calculus::{gradient_within, pairwise_sum, SpaceTimeField, VertexField};
use crate::environment::ConductanceField;
use crate::error::{domain, Result};
use crate::exponents::{truncated_log, truncated_log_slope};
use crate::lattice::{bonds_within, interior_boundary, sphere, Bond, LatticeBox, Point, VertexSet};
use crate::rng::stream;

/// Minimiser of `sum_k f(k) (phi(k+1) - phi(k))^2` over radial profiles with
/// `phi(inner) = 1`, `phi(outer) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialCutoff {
    pub inner: usize,
    pub outer: usize,
    /// `profile[i]` is the value on shell `inner + i`.
    pub profile: Vec<f64>,
    pub energy: f64,
}

fn check_shells(inner: usize, outer: usize, weights: &[f64]) -> Result<()> {
    if inner >= outer {
        return Err(domain(format!("need inner < outer, got {inner} >= {outer}")));
    }
    if weights.len() != outer - inner {
        return Err(domain(format!(
            "expected {} shell weights, got {}",
            outer - inner,
            weights.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= 0.0) || w.is_infinite()) {
        return Err(domain("shell weights must be finite and non-negative"));
    }
    Ok(())
}

/// `weights[k]` is the weight between shells `inner + k` and `inner + k + 1`.
pub fn optimal_radial_cutoff(inner: usize, outer: usize, weights: &[f64]) -> Result<RadialCutoff> {
    check_shells(inner, outer, weights)?;
    if let Some(k0) = weights.iter().position(|&w| w == 0.0) {
        let profile = (0..=weights.len())
            .map(|i| if i <= k0 { 1.0 } else { 0.0 })
            .collect();
        return Ok(RadialCutoff {
            inner,
            outer,
            profile,
            energy: 0.0,
        });
    }
    let inv: Vec<f64> = weights.iter().map(|w| 1.0 / w).collect();
    let total = pairwise_sum(&inv);
    let mut profile = Vec::with_capacity(inv.len() + 1);
    let mut acc = 0.0;
    profile.push(1.0);
    for (i, v) in inv.iter().enumerate() {
        acc += v;
        profile.push(if i + 1 == inv.len() { 0.0 } else { 1.0 - acc / total });
    }
    Ok(RadialCutoff {
        inner,
        outer,
        profile,
        energy: 1.0 / total,
    })
}

/// `sum_k f(k) (phi(k+1) - phi(k))^2`.
pub fn radial_energy(profile: &[f64], weights: &[f64]) -> f64 {
    let terms: Vec<f64> = weights
        .iter()
        .enumerate()
        .map(|(k, f)| f * (profile[k + 1] - profile[k]).powi(2))
        .collect();
    pairwise_sum(&terms)
}

/// `(outer - inner)^(-(1 + 1/delta)) (sum f^delta)^(1/delta)`, an upper bound
/// for the optimal energy.
pub fn cutoff_bound(inner: usize, outer: usize, weights: &[f64], delta: f64) -> Result<f64> {
    check_shells(inner, outer, weights)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(domain(format!("delta must be positive, got {delta}")));
    }
    let width = (outer - inner) as f64;
    let s: Vec<f64> = weights.iter().map(|f| f.powf(delta)).collect();
    Ok(width.powf(-(1.0 + 1.0 / delta)) * pairwise_sum(&s).powf(1.0 / delta))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProbeMode {
    /// `||f - mean||_{s*} / ||grad f||_s` on a ball.
    Bulk,
    /// `||f||_{s*} / (||grad f||_s + ||f||_s / n)` on the sphere of the ball.
    Sphere,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SobolevRatio {
    pub ratio: f64,
    /// Numerator positive over a vanishing denominator.
    pub infinite: bool,
}

/// Ratio of the two sides of a discrete Sobolev inequality (un-normalized sums).
pub fn sobolev_probe(f: &VertexField, ball: &LatticeBox, s: f64, mode: ProbeMode) -> Result<SobolevRatio> {
    let d = ball.dim() as f64;
    let (set, target, scale_term) = match mode {
        ProbeMode::Bulk => {
            if !(s >= 1.0 && s < d) {
                return Err(domain(format!("bulk probe needs 1 <= s < d, got {s}")));
            }
            (ball.to_set(), d * s / (d - s), false)
        }
        ProbeMode::Sphere => {
            let k = d - 1.0;
            if !(s >= 1.0 && s < k) {
                return Err(domain(format!("sphere probe needs 1 <= s < d - 1, got {s}")));
            }
            if ball.radius() == 0 {
                return Err(domain("sphere probe needs a positive radius"));
            }
            (sphere(ball.center(), ball.radius()), k * s / (k - s), true)
        }
    };
    let local = f.restrict(Arc::new(set.clone()))?;
    let numerator = if scale_term {
        local.norm(&set, target, false)?
    } else {
        let mean = local.sum(&set)? / set.len() as f64;
        local.map(|v| v - mean).norm(&set, target, false)?
    };
    let grad = gradient_within(&local);
    let mut denominator = if grad.values().is_empty() {
        0.0
    } else {
        grad.norm(&set, s, false)?
    };
    if scale_term {
        denominator += local.norm(&set, s, false)? / ball.radius() as f64;
    }
    Ok(if denominator > 0.0 {
        SobolevRatio {
            ratio: numerator / denominator,
            infinite: false,
        }
    } else {
        SobolevRatio {
            ratio: if numerator > 0.0 { f64::INFINITY } else { 0.0 },
            infinite: numerator > 0.0,
        }
    })
}

/// `1` on `B(center, inner)`, `0` outside `B(center, outer - 1)`, linear in
/// the sup-distance in between.
pub fn linear_cutoff(domain_set: Arc<VertexSet>, center: Point, inner: u32, outer: u32) -> VertexField {
    assert!(inner < outer);
    VertexField::from_fn(domain_set, |x| {
        let k = (*x - center).sup_norm() as f64;
        ((outer as f64 - k) / (outer - inner) as f64).clamp(0.0, 1.0)
    })
}

/// Like [`linear_cutoff`] but the ramp stops at `3/(outer + 2 - inner)` before
/// dropping to zero, which keeps neighbouring ratios of `eta^2` below 2.
pub fn ramp_cutoff(domain_set: Arc<VertexSet>, center: Point, inner: u32, outer: u32) -> VertexField {
    assert!(inner < outer);
    let len = (outer + 2 - inner) as f64;
    VertexField::from_fn(domain_set, |x| {
        let k = (*x - center).sup_norm();
        if k >= outer as i64 {
            0.0
        } else {
            ((outer as f64 + 2.0 - k as f64) / len).min(1.0)
        }
    })
}

/// `max{h(y)/h(x), 1}` over ordered neighbour pairs inside the domain with `h(x) != 0`.
pub fn ratio_oscillation(h: &VertexField) -> f64 {
    let mut worst: f64 = 1.0;
    for b in bonds_within(h.domain()) {
        let a = h.get(&b.lower()).unwrap();
        let c = h.get(&b.upper()).unwrap();
        if a != 0.0 {
            worst = worst.max(c / a);
        }
        if c != 0.0 {
            worst = worst.max(a / c);
        }
    }
    worst
}

/// Outcome of an energy inequality evaluated on a computed solution.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyCheck {
    /// Left side at the instant where it comes closest to the right side.
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    /// Number of instants (or windows) where the inequality failed.
    pub violations: usize,
    pub evaluations: usize,
}

impl EnergyCheck {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Bond data shared by both energy checks: endpoint indices, conductances and
/// the cutoff on the endpoints.
struct BondTable {
    ends: Vec<(usize, usize)>,
    w: Vec<f64>,
    eta: Vec<(f64, f64)>,
}

fn bond_table(w: &ConductanceField, u: &SpaceTimeField, eta: &VertexField) -> Result<BondTable> {
    let set = u.domain();
    if **eta.domain() != **set {
        return Err(domain("cutoff and solution must share a domain"));
    }
    let edge = interior_boundary(set);
    if edge.points().iter().any(|x| eta.get(x).unwrap() != 0.0) {
        return Err(domain("cutoff must vanish on the boundary of the domain"));
    }
    let mut table = BondTable {
        ends: Vec::new(),
        w: Vec::new(),
        eta: Vec::new(),
    };
    for b in bonds_within(set) {
        let (i, j) = (set.index_of(&b.lower()).unwrap(), set.index_of(&b.upper()).unwrap());
        let (ei, ej) = (eta.values()[i], eta.values()[j]);
        if ei == 0.0 && ej == 0.0 {
            continue;
        }
        let c = w
            .get(&b)
            .ok_or_else(|| domain(format!("no conductance on {b:?}")))?;
        table.ends.push((i, j));
        table.w.push(c);
        table.eta.push((ei, ej));
    }
    Ok(table)
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    let pieces: Vec<f64> = (0..times.len().saturating_sub(1))
        .map(|k| 0.5 * (times[k + 1] - times[k]) * (values[k] + values[k + 1]))
        .collect();
    pairwise_sum(&pieces)
}

/// Integrated energy estimate for positive sub-caloric `u` on the stored
/// time window `[top - outer_time, top]`, with time weight equal to 1 on the
/// last `inner_time` and linear below. At each instant t of the inner window
///
/// `E(t) + int zeta D <= 4 power^2 int zeta R + (outer - inner)^-1 int_{start}^{start + outer - inner} E`
///
/// where `E = sum eta^2 u^(2 power)`, `D = sum (eta^2)(e) w (grad u^power)^2`
/// and `R = sum w (u^power(e))^2 (grad eta)^2`, bond values being midpoints.
pub fn caccioppoli_check(
    w: &ConductanceField,
    u: &SpaceTimeField,
    eta: &VertexField,
    power: f64,
    inner_time: f64,
    outer_time: f64,
) -> Result<EnergyCheck> {
    if !(power >= 1.0) {
        return Err(domain("power must be at least 1"));
    }
    if !(0.0 < inner_time && inner_time < outer_time) {
        return Err(domain("need 0 < inner_time < outer_time"));
    }
    if u.values().iter().any(|v| !(*v > 0.0)) {
        return Err(domain("solution must be strictly positive"));
    }
    let table = bond_table(w, u, eta)?;
    let top = *u.times().last().unwrap();
    let start = top - outer_time;
    let range = u.instants_in(start, top);
    let times = &u.times()[range.clone()];
    if times.len() < 2 || (times[0] - start).abs() > 1e-9 * (1.0 + start.abs()) {
        return Err(domain("the outer time window must start at a stored instant"));
    }
    let ramp = outer_time - inner_time;
    let zeta = |t: f64| ((t - start) / ramp).clamp(0.0, 1.0);
    let eta2: Vec<f64> = eta.values().iter().map(|e| e * e).collect();

    let mut e_series = Vec::with_capacity(times.len());
    let mut d_series = Vec::with_capacity(times.len());
    let mut r_series = Vec::with_capacity(times.len());
    for k in range {
        let up: Vec<f64> = u.slice(k).iter().map(|v| v.powf(power)).collect();
        let e_terms: Vec<f64> = eta2.iter().zip(&up).map(|(a, v)| a * v * v).collect();
        let mut d_terms = Vec::with_capacity(table.ends.len());
        let mut r_terms = Vec::with_capacity(table.ends.len());
        for ((&(i, j), &c), &(ei, ej)) in table.ends.iter().zip(&table.w).zip(&table.eta) {
            let grad = up[j] - up[i];
            let mid = 0.5 * (up[i] + up[j]);
            d_terms.push(0.5 * (ei * ei + ej * ej) * c * grad * grad);
            r_terms.push(c * mid * mid * (ej - ei).powi(2));
        }
        let t = u.times()[k];
        e_series.push(pairwise_sum(&e_terms));
        d_series.push(zeta(t) * pairwise_sum(&d_terms));
        r_series.push(zeta(t) * pairwise_sum(&r_terms));
    }

    let ramp_end = times.partition_point(|&t| t <= start + ramp + 1e-9 * (1.0 + ramp));
    let initial = trapezoid(&times[..ramp_end], &e_series[..ramp_end]) / ramp;
    let coefficient = 4.0 * power * power;
    let mut check = EnergyCheck {
        lhs: 0.0,
        rhs: 0.0,
        slack: 0.0,
        violations: 0,
        evaluations: 0,
    };
    let mut best_gap = f64::INFINITY;
    for k in 1..times.len() {
        if times[k] < top - inner_time - 1e-9 * (1.0 + top.abs()) {
            continue;
        }
        let lhs = e_series[k] + trapezoid(&times[..=k], &d_series[..=k]);
        let rhs = coefficient * trapezoid(&times[..=k], &r_series[..=k]) + initial;
        let slack = 1e-6 * (lhs.abs() + rhs.abs());
        check.evaluations += 1;
        if lhs > rhs + slack {
            check.violations += 1;
        }
        if rhs - lhs < best_gap {
            best_gap = rhs - lhs;
            check.lhs = lhs;
            check.rhs = rhs;
            check.slack = slack;
        }
    }
    if check.evaluations == 0 {
        return Err(domain("no stored instant in the inner time window"));
    }
    Ok(check)
}

/// Logarithmic energy estimate for positive super-caloric `u` with the
/// truncated logarithm g. On each stored time step `[t_k, t_{k+1}]`
///
/// `sum eta^2 g(u) |_{t_k}^{t_{k+1}} + (1/6) int sum phi w (grad g(u))^2 <= 6 osr^2 dt sum w (grad eta)^2`
///
/// with `phi(e) = min(eta^2)` over the endpoints and `osr` the ratio
/// oscillation of eta. The same bound without the time derivative is also
/// checked bond-summed at each instant.
pub fn log_caccioppoli_check(w: &ConductanceField, u: &SpaceTimeField, eta: &VertexField) -> Result<EnergyCheck> {
    if u.values().iter().any(|v| !(*v > 0.0)) {
        return Err(domain("solution must be strictly positive"));
    }
    let table = bond_table(w, u, eta)?;
    let osr = ratio_oscillation(eta);
    let cutoff_energy = pairwise_sum(
        &table
            .w
            .iter()
            .zip(&table.eta)
            .map(|(c, (a, b))| c * (b - a) * (b - a))
            .collect::<Vec<_>>(),
    );
    let rhs_rate = 6.0 * osr * osr * cutoff_energy;
    let eta2: Vec<f64> = eta.values().iter().map(|e| e * e).collect();

    let mut level = Vec::new();
    let mut energy = Vec::new();
    let mut check = EnergyCheck {
        lhs: 0.0,
        rhs: 0.0,
        slack: 0.0,
        violations: 0,
        evaluations: 0,
    };
    let mut best_gap = f64::INFINITY;
    let mut record = |lhs: f64, rhs: f64, check: &mut EnergyCheck| {
        let slack = 1e-6 * (lhs.abs() + rhs.abs());
        check.evaluations += 1;
        if lhs > rhs + slack {
            check.violations += 1;
        }
        if rhs - lhs < best_gap {
            best_gap = rhs - lhs;
            check.lhs = lhs;
            check.rhs = rhs;
            check.slack = slack;
        }
    };
    for k in 0..u.times().len() {
        let s = u.slice(k);
        let g: Vec<f64> = s.iter().map(|&v| truncated_log(v)).collect::<Result<_>>()?;
        let gp: Vec<f64> = s.iter().map(|&v| truncated_log_slope(v)).collect::<Result<_>>()?;
        level.push(pairwise_sum(&eta2.iter().zip(&g).map(|(a, b)| a * b).collect::<Vec<_>>()));
        let mut e_terms = Vec::with_capacity(table.ends.len());
        let mut flux = Vec::with_capacity(table.ends.len());
        for ((&(i, j), &c), &(a, b)) in table.ends.iter().zip(&table.w).zip(&table.eta) {
            let dg = g[j] - g[i];
            e_terms.push(f64::min(a * a, b * b) * c * dg * dg);
            flux.push(-(b * b * gp[j] - a * a * gp[i]) * c * (s[j] - s[i]));
        }
        let e = pairwise_sum(&e_terms) / 6.0;
        energy.push(e);
        record(pairwise_sum(&flux) + e, rhs_rate, &mut check);
    }
    let times = u.times();
    for k in 0..times.len().saturating_sub(1) {
        let dt = times[k + 1] - times[k];
        let lhs = level[k + 1] - level[k] + 0.5 * dt * (energy[k] + energy[k + 1]);
        record(lhs, dt * rhs_rate, &mut check);
    }
    Ok(check)
}

/// One sample where an inequality failed beyond its slack.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub inequality: &'static str,
    pub inputs: Vec<(&'static str, f64)>,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteSummary {
    pub inequality: &'static str,
    pub samples: usize,
    pub violations: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct AppendixReport {
    pub suites: Vec<SuiteSummary>,
    pub violations: Vec<Violation>,
}

impl AppendixReport {
    pub fn total_violations(&self) -> usize {
        self.suites.iter().map(|s| s.violations).sum()
    }

    /// `inequality,inputs,lhs,rhs,slack` with inputs as `name=value` pairs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("inequality,inputs,lhs,rhs,slack\n");
        for v in &self.violations {
            let inputs: Vec<String> = v.inputs.iter().map(|(k, x)| format!("{k}={x:.16e}")).collect();
            let _ = writeln!(
                out,
                "{},{},{:.16e},{:.16e},{:.16e}",
                v.inequality,
                inputs.join(";"),
                v.lhs,
                v.rhs,
                v.slack
            );
        }
        out
    }
}

/// `x^a - y^a` for `x, y >= 0` without cancellation when x is close to y.
fn pow_diff(x: f64, y: f64, a: f64) -> f64 {
    if y == 0.0 {
        return x.powf(a);
    }
    if x == 0.0 {
        return -y.powf(a);
    }
    let r = (x - y) / y;
    let log_ratio = if r.abs() < 0.5 { r.ln_1p() } else { x.ln() - y.ln() };
    y.powf(a) * (a * log_ratio).exp_m1()
}

/// `|a|^p sign(a)`.
fn signed_pow(a: f64, p: f64) -> f64 {
    a.abs().powf(p).copysign(a)
}

fn signed_pow_gap(a: f64, b: f64, p: f64) -> f64 {
    if a == 0.0 || b == 0.0 || a.signum() != b.signum() {
        (signed_pow(a, p) - signed_pow(b, p)).abs()
    } else {
        pow_diff(a.abs(), b.abs(), p).abs()
    }
}

fn magnitude(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    // Exact zeros and ties exercise the boundary cases.
    match rng.random_range(0..20) {
        0 => 0.0,
        _ => 10f64.powf(rng.random_range(lo..hi)),
    }
}

struct Suite {
    summary: SuiteSummary,
    violations: Vec<Violation>,
}

impl Suite {
    fn new(name: &'static str) -> Suite {
        Suite {
            summary: SuiteSummary {
                inequality: name,
                samples: 0,
                violations: 0,
            },
            violations: Vec::new(),
        }
    }

    fn check(&mut self, inputs: Vec<(&'static str, f64)>, lhs: f64, rhs: f64, scale: f64) {
        self.summary.samples += 1;
        let slack = 1e-12 * scale;
        if !(lhs <= rhs + slack) {
            self.summary.violations += 1;
            if self.violations.len() < 1000 {
                self.violations.push(Violation {
                    inequality: self.summary.inequality,
                    inputs,
                    lhs,
                    rhs,
                    slack,
                });
            }
        }
    }
}

/// Randomized checks of the elementary inequalities behind the energy
/// estimates, `samples` draws each.
pub fn appendix_property_tests(samples: usize, seed: u64) -> AppendixReport {
    let mut suites = Vec::new();

    // |a~_p - b~_p| <= max(1, |p/q|) |a~_q - b~_q| (|a|^(p-q) + |b|^(p-q)), a~_p = |a|^p sign a.
    let mut s = Suite::new("signed_power_comparison");
    let mut rng = stream(seed, 0);
    for _ in 0..samples {
        let sign = |r: &mut rand_chacha::ChaCha8Rng| if r.random::<bool>() { 1.0 } else { -1.0 };
        let a = sign(&mut rng) * magnitude(&mut rng, -3.0, 2.0);
        let b = if rng.random_range(0..20) == 0 { a } else { sign(&mut rng) * magnitude(&mut rng, -3.0, 2.0) };
        let p = sign(&mut rng) * rng.random_range(0.05..3.0);
        let q = sign(&mut rng) * rng.random_range(0.05..3.0);
        let lhs = signed_pow_gap(a, b, p);
        let weight = a.abs().powf(p - q) + b.abs().powf(p - q);
        let rhs = f64::max(1.0, (p / q).abs()) * signed_pow_gap(a, b, q) * weight;
        if rhs.is_nan() {
            // 0 * inf: both sides vanish at a = b = 0.
            continue;
        }
        s.check(vec![("a", a), ("b", b), ("p", p), ("q", q)], lhs, rhs, lhs.abs() + rhs.abs());
    }
    suites.push(s);

    // (a^p - b^p)^2 <= p^2/(2p - 1) (a - b)(a^(2p-1) - b^(2p-1)), a, b >= 0, p > 1/2.
    let mut s = Suite::new("power_gradient_square");
    let mut rng = stream(seed, 1);
    for _ in 0..samples {
        let a = magnitude(&mut rng, -3.0, 2.0);
        let b = if rng.random_range(0..20) == 0 { a } else { magnitude(&mut rng, -3.0, 2.0) };
        let p = 0.5 + rng.random_range(1e-3..3.5);
        let lhs = pow_diff(a, b, p).powi(2);
        let rhs = p * p / (2.0 * p - 1.0) * (a - b) * pow_diff(a, b, 2.0 * p - 1.0);
        s.check(vec![("a", a), ("b", b), ("p", p)], lhs, rhs, lhs.abs() + rhs.abs());
    }
    suites.push(s);

    // (a^(2p-1) + b^(2p-1)) |a - b| <= |a^p - b^p| (a^p + b^p), a, b >= 0, p >= 1.
    let mut s = Suite::new("power_midpoint_product");
    let mut rng = stream(seed, 2);
    for _ in 0..samples {
        let a = magnitude(&mut rng, -3.0, 2.0);
        let b = if rng.random_range(0..20) == 0 { a } else { magnitude(&mut rng, -3.0, 2.0) };
        let p = rng.random_range(1.0..4.0);
        let lhs = (a.powf(2.0 * p - 1.0) + b.powf(2.0 * p - 1.0)) * (a - b).abs();
        let rhs = pow_diff(a, b, p).abs() * (a.powf(p) + b.powf(p));
        s.check(vec![("a", a), ("b", b), ("p", p)], lhs, rhs, lhs.abs() + rhs.abs());
    }
    suites.push(s);

    // Bond inequality for the truncated logarithm g with weight 1/3:
    // -(b^2 g'(y) - a^2 g'(x))(y - x)
    //   <= -(1/6) min(a^2, b^2)(g(y) - g(x))^2 + 6 max(a^2/b^2, b^2/a^2)(b - a)^2,
    // and <= max(-x g'(x), -y g'(y)) (b - a)^2 when a or b vanishes.
    let mut s = Suite::new("truncated_log_bond");
    let mut rng = stream(seed, 3);
    let weight = 1.0 / 3.0;
    for _ in 0..samples {
        let x = 10f64.powf(rng.random_range(-3.0..0.5));
        let y = if rng.random_range(0..20) == 0 { x } else { 10f64.powf(rng.random_range(-3.0..0.5)) };
        let mut a = rng.random_range(0.0..2.0);
        let mut b = rng.random_range(0.0..2.0);
        match rng.random_range(0..10) {
            0 => a = 0.0,
            1 => b = 0.0,
            2 => b = a,
            _ => {}
        }
        let (gx, gy) = (truncated_log(x).unwrap(), truncated_log(y).unwrap());
        let (dx, dy) = (truncated_log_slope(x).unwrap(), truncated_log_slope(y).unwrap());
        let lhs = -(b * b * dy - a * a * dx) * (y - x);
        let (rhs, scale) = if a.min(b) > 0.0 {
            let t1 = -(weight / 2.0) * (a * a).min(b * b) * (gy - gx).powi(2);
            let t2 = (2.0 / weight) * f64::max(a * a / (b * b), b * b / (a * a)) * (b - a).powi(2);
            (t1 + t2, lhs.abs() + t1.abs() + t2.abs())
        } else {
            let r = f64::max(-x * dx, -y * dy) * (b - a).powi(2);
            (r, lhs.abs() + r.abs())
        };
        s.check(vec![("x", x), ("y", y), ("a", a), ("b", b)], lhs, rhs, scale);
    }
    suites.push(s);

    let mut report = AppendixReport::default();
    for s in suites {
        report.suites.push(s.summary);
        report.violations.extend(s.violations);
    }
    report
}

/// Bonds joining consecutive shells, grouped by the inner shell radius.
pub fn shell_conductance_sums(w: &ConductanceField, inner: u32, outer: u32) -> Result<Vec<f64>> {
    let center = w.ambient().center();
    let mut out = Vec::new();
    for m in inner..outer {
        let mut terms = Vec::new();
        for b in crate::lattice::sphere_bonds(m, w.dim()) {
            let moved: Bond = b.translate(center);
            terms.push(
                w.get(&moved)
                    .ok_or_else(|| domain("shell bonds leave the ambient box"))?,
            );
        }
        out.push(pairwise_sum(&terms));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_examples() {
        let c = optimal_radial_cutoff(0, 2, &[1.0, 1.0]).unwrap();
        assert_eq!(c.profile, vec![1.0, 0.5, 0.0]);
        assert_eq!(c.energy, 0.5);
        let c = optimal_radial_cutoff(0, 2, &[1.0, 3.0]).unwrap();
        assert!((c.profile[1] - 0.25).abs() < 1e-15);
        assert!((c.energy - 0.75).abs() < 1e-15);
        assert!((radial_energy(&c.profile, &[1.0, 3.0]) - c.energy).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_gives_free_cutoff() {
        let c = optimal_radial_cutoff(2, 5, &[1.0, 0.0, 2.0]).unwrap();
        assert_eq!(c.energy, 0.0);
        assert_eq!(c.profile, vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn cutoff_errors() {
        assert!(optimal_radial_cutoff(2, 2, &[]).is_err());
        assert!(optimal_radial_cutoff(0, 2, &[1.0, -1.0]).is_err());
        assert!(cutoff_bound(0, 2, &[1.0, 4.0], 0.0).is_err());
    }

    #[test]
    fn cutoff_bound_example() {
        let v = cutoff_bound(0, 2, &[1.0, 4.0], 0.5).unwrap();
        assert!((v - 1.125).abs() < 1e-15);
    }

    #[test]
    fn bulk_probe_of_a_delta() {
        let ball = LatticeBox::centered(2, 1);
        let f = VertexField::from_fn(Arc::new(ball.to_set()), |p| if p.sup_norm() == 0 { 1.0 } else { 0.0 });
        let r = sobolev_probe(&f, &ball, 1.0, ProbeMode::Bulk).unwrap();
        assert!((r.ratio - (72f64 / 81.0).sqrt() / 4.0).abs() < 1e-15);
        assert!(!r.infinite);
        assert!(sobolev_probe(&f, &ball, 1.0, ProbeMode::Sphere).is_err());
    }

    #[test]
    fn ramp_cutoff_ratio_bound() {
        let set = Arc::new(LatticeBox::centered(2, 16).to_set());
        let eta = ramp_cutoff(set, Point::origin(2), 8, 16);
        let sq = eta.map(|v| v * v);
        assert!(ratio_oscillation(&sq) <= 2.0);
        assert_eq!(eta.get(&Point::new(&[16, 0])), Some(0.0));
        assert_eq!(eta.get(&Point::new(&[3, -8])), Some(1.0));
    }

    #[test]
    fn pow_diff_is_accurate_near_ties() {
        let x = 1.0 + 1e-12;
        let d = pow_diff(x, 1.0, 2.0);
        let exact = 2.0 * (x - 1.0) + (x - 1.0) * (x - 1.0);
        assert!((d - exact).abs() < 1e-27);
        assert_eq!(pow_diff(0.0, 2.0, 2.0), -4.0);
        assert_eq!(pow_diff(3.0, 0.0, 2.0), 9.0);
    }

    #[test]
    fn chain_example() {
        let (a, b, p): (f64, f64, f64) = (4.0, 1.0, 2.0);
        let lhs = pow_diff(a, b, p).powi(2);
        let rhs = p * p / (2.0 * p - 1.0) * (a - b) * pow_diff(a, b, 2.0 * p - 1.0);
        assert!((lhs - 225.0).abs() < 1e-12);
        assert!((rhs - 252.0).abs() < 1e-12);
    }

    #[test]
    fn small_appendix_run_is_clean() {
        let r = appendix_property_tests(2000, 3);
        assert_eq!(r.total_violations(), 0, "{}", r.to_csv());
        assert_eq!(r.suites.len(), 4);
    }
}
