//! Exponent algebra for the boundedness and Harnack estimates, the explicit
//! constants built from ergodic norms, the truncated logarithm used in the
//! logarithmic energy estimate and the limiting Gaussian kernel.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{config, domain, Result};

/// Derived exponents for an admissible triple (d, p, q).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentSet {
    pub dim: usize,
    pub p: f64,
    pub q: f64,
    /// `2/(d-1) - 1/p - 1/q`
    pub sphere_gap: f64,
    /// `2/d - 1/q`
    pub bulk_gap: f64,
    /// Integrability gained on spheres: `p` if d = 2, else `1 + p * sphere_gap`.
    pub sphere_exponent: f64,
    /// `1 - bulk_gap * (1 - 1/sphere_exponent)`
    pub interpolation: f64,
    /// `2 + 1/p + 1/(sphere_exponent * q)`
    pub bound_exponent: f64,
    /// `2 + 1/p + 1/q`, the exponent without the sphere improvement.
    pub crude_bound_exponent: f64,
    /// `bulk_gap / sphere_exponent`
    pub gain: f64,
    /// Parabolic Sobolev exponent with `1/Q = (1 - bulk_gap)/2`.
    pub sobolev_exponent: f64,
    /// Interpolation weight with `(1 + gain) * split = bulk_gap`.
    pub split: f64,
    /// Sphere Sobolev exponent, `1/p* = 1/(d-1) + (p - sphere_exponent)/(2p)`.
    pub sphere_sobolev: f64,
}

impl ExponentSet {
    pub fn derive(d: usize, p: f64, q: f64) -> Result<ExponentSet> {
        if d < 2 {
            return Err(config(format!("dimension must be at least 2, got {d}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(config(format!("p must lie in (1, inf), got {p}")));
        }
        let df = d as f64;
        if !(q > df / 2.0 && q.is_finite()) {
            return Err(config(format!("q must lie in (d/2, inf), got {q}")));
        }
        let sphere_gap = 2.0 / (df - 1.0) - 1.0 / p - 1.0 / q;
        if !(sphere_gap > 0.0) {
            return Err(config(format!(
                "1/p + 1/q < 2/(d-1) fails: {} >= {}",
                1.0 / p + 1.0 / q,
                2.0 / (df - 1.0)
            )));
        }
        let bulk_gap = 2.0 / df - 1.0 / q;
        let theta = if d == 2 { p } else { 1.0 + p * sphere_gap };
        let nu = 1.0 - bulk_gap * (1.0 - 1.0 / theta);
        let gain = bulk_gap / theta;
        let big_q = 2.0 / (1.0 - bulk_gap);
        let inv_nu_q = 1.0 / (nu * big_q);
        let split = (1.0 / (2.0 * (1.0 + gain)) - inv_nu_q) / (0.5 - inv_nu_q);
        let inv_sphere_sobolev = 1.0 / (df - 1.0) + (p - theta) / (2.0 * p);
        Ok(ExponentSet {
            dim: d,
            p,
            q,
            sphere_gap,
            bulk_gap,
            sphere_exponent: theta,
            interpolation: nu,
            bound_exponent: 2.0 + 1.0 / p + 1.0 / (theta * q),
            crude_bound_exponent: 2.0 + 1.0 / p + 1.0 / q,
            gain,
            sobolev_exponent: big_q,
            split,
            sphere_sobolev: 1.0 / inv_sphere_sobolev,
        })
    }

    /// Bulk Sobolev exponent `ds/(d - s)` for `1 <= s < d`.
    pub fn bulk_sobolev(&self, s: f64) -> Result<f64> {
        let d = self.dim as f64;
        if !(s >= 1.0 && s < d) {
            return Err(domain(format!("bulk Sobolev exponent needs 1 <= s < d, got {s}")));
        }
        Ok(d * s / (d - s))
    }

    /// `[(theta - nu)/(theta - 1), p/(p - 1), p nu/(p - theta)]`; the last
    /// entry is infinite when d = 2.
    pub fn interpolation_chain(&self) -> [f64; 3] {
        let th = self.sphere_exponent;
        let last = if self.dim == 2 {
            f64::INFINITY
        } else {
            self.p * self.interpolation / (self.p - th)
        };
        [
            (th - self.interpolation) / (th - 1.0),
            self.p / (self.p - 1.0),
            last,
        ]
    }

    /// Absolute residuals of the algebraic identities that must vanish.
    pub fn identity_residuals(&self) -> [f64; 3] {
        let e = self.gain;
        let nq = self.interpolation * self.sobolev_exponent;
        [
            (1.0 + e) * self.split - self.bulk_gap,
            (nq - 2.0 * (1.0 + e)) - 2.0 * e * (1.0 / (1.0 - self.bulk_gap) - 1.0),
            (self.sphere_exponent - self.interpolation) / (self.sphere_exponent - 1.0) - (1.0 + e),
        ]
    }

    /// `theta - bulk_gap (p - 1)`, positive for admissible triples.
    pub fn chain_margin(&self) -> f64 {
        self.sphere_exponent - self.bulk_gap * (self.p - 1.0)
    }
}

/// `max{1, tau^(1/2) (inv_norm_q (norm_p + 1/tau)^(2 - nu))^(1/(2(1 - nu)))}`.
pub fn boundedness_constant(norm_p: f64, inv_norm_q: f64, tau: f64, nu: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(domain(format!("time scale must be positive, got {tau}")));
    }
    if !(nu > 0.0 && nu < 1.0) {
        return Err(domain(format!("interpolation exponent must lie in (0, 1), got {nu}")));
    }
    if norm_p < 0.0 || inv_norm_q < 0.0 {
        return Err(domain("norms must be non-negative"));
    }
    let inner = inv_norm_q * (norm_p + 1.0 / tau).powf(2.0 - nu);
    Ok(f64::max(1.0, tau.sqrt() * inner.powf(1.0 / (2.0 * (1.0 - nu)))))
}

/// Product of the two ergodic norms.
pub fn moment_product(norm_p: f64, inv_norm_q: f64) -> f64 {
    norm_p * inv_norm_q
}

/// Smallest root in [1/4, 1/3] of `2c ln(1/c) = 1 - c`.
pub fn log_knot() -> f64 {
    static KNOT: OnceLock<f64> = OnceLock::new();
    *KNOT.get_or_init(|| {
        let f = |c: f64| 2.0 * c * (1.0 / c).ln() - (1.0 - c);
        let (mut lo, mut hi) = (0.25, 1.0 / 3.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        0.5 * (lo + hi)
    })
}

/// The truncated logarithm: `-ln z` up to the knot, then a quadratic that
/// reaches zero with zero slope at 1, and zero afterwards.
pub fn truncated_log(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(domain(format!("truncated logarithm needs z > 0, got {z}")));
    }
    let c = log_knot();
    Ok(if z <= c {
        -z.ln()
    } else if z <= 1.0 {
        (z - 1.0).powi(2) / (2.0 * c * (1.0 - c))
    } else {
        0.0
    })
}

/// Derivative of [`truncated_log`].
pub fn truncated_log_slope(z: f64) -> Result<f64> {
    if !(z > 0.0) {
        return Err(domain(format!("truncated logarithm needs z > 0, got {z}")));
    }
    let c = log_knot();
    Ok(if z <= c {
        -1.0 / z
    } else if z <= 1.0 {
        (z - 1.0) / (c * (1.0 - c))
    } else {
        0.0
    })
}

/// Lower-bound constants of the weak Harnack inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeakHarnackConstants {
    /// Lower bound at the top of the cylinder for one step of the density argument.
    pub step: f64,
    /// Final lower bound on the inner cylinder.
    pub floor: f64,
}

/// Inputs to [`weak_harnack_constants`].
#[derive(Clone, Copy, Debug)]
pub struct WeakHarnackInputs {
    pub dim: usize,
    /// Density `lambda` of the super-level set.
    pub density: f64,
    /// Outer radius ratio `sigma2`.
    pub outer_ratio: f64,
    /// `||w||_{L^1}` on the ball.
    pub norm_1: f64,
    /// Height `epsilon` of the super-level set.
    pub level: f64,
    /// The boundedness constant at time scale 1.
    pub boundedness: f64,
    /// `||1/w||_{L^{d/2}}` on the ball.
    pub inv_norm_half_dim: f64,
    pub free_constant: f64,
}

pub fn weak_harnack_constants(exps: &ExponentSet, inp: &WeakHarnackInputs) -> Result<WeakHarnackConstants> {
    if !(inp.density > 0.0 && inp.density < 1.0) {
        return Err(domain("density must lie in (0, 1)"));
    }
    if !(inp.outer_ratio > 0.0 && inp.outer_ratio < 1.0) {
        return Err(domain(format!("outer ratio must lie in (0, 1), got {}", inp.outer_ratio)));
    }
    if inp.norm_1 < 0.0 || inp.inv_norm_half_dim < 0.0 || inp.boundedness < 0.0 {
        return Err(domain("norms must be non-negative"));
    }
    if !(inp.free_constant >= 1.0) {
        return Err(domain("free constant must be at least 1"));
    }
    let c = inp.free_constant;
    let gap = (1.0 - inp.outer_ratio).powi(2) * inp.density.powi(inp.dim as i32);
    let step = (-c * (1.0 + inp.norm_1 / gap)).exp();
    let p = exps.p;
    let power = inp.boundedness.powf(2.0 * p / (p - 1.0));
    let floor = inp.level * (-c * (1.0 + inp.norm_1 + power * inp.inv_norm_half_dim)).exp();
    Ok(WeakHarnackConstants { step, floor })
}

/// Centered Gaussian density with covariance `t * cov` at `x`.
pub fn gaussian_kernel(t: f64, x: &[f64], cov: &[Vec<f64>]) -> Result<f64> {
    let d = x.len();
    if !(t > 0.0) {
        return Err(domain("time must be positive"));
    }
    if cov.len() != d || cov.iter().any(|r| r.len() != d) {
        return Err(domain("covariance has the wrong shape"));
    }
    let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
    let chol = m
        .cholesky()
        .ok_or_else(|| domain("covariance is not positive definite"))?;
    let det: f64 = chol.l().diagonal().iter().map(|v| v * v).product();
    if !(det > 0.0) {
        return Err(domain("covariance is singular"));
    }
    let v = DVector::from_column_slice(x);
    let quad = v.dot(&chol.solve(&v));
    let norm = ((2.0 * std::f64::consts::PI * t).powi(d as i32) * det).sqrt();
    Ok((-quad / (2.0 * t)).exp() / norm)
}
