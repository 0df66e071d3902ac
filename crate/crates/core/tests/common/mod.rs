//! Oracles shared by the integration tests.
#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use rcm_lab::calculus::{apply_generator, divergence, gradient, midpoint, BondField, MissingBonds, VertexField};
use rcm_lab::lattice::{bonds_within, BondSet};
use rcm_lab::environment::EnvironmentLaw;
use rcm_lab::lattice::{LatticeBox, Point};
use rcm_lab::rng::stream;

/// `e^{-2t} I_k(2t)` by its power series, for moderate `k` and `t`.
pub fn bessel_series(k: u32, t: f64) -> f64 {
    let mut term = (-2.0 * t).exp() * t.powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
    let mut sum = term;
    for m in 0..400u32 {
        term *= t * t / ((m + 1) as f64 * (m + k + 1) as f64);
        sum += term;
        if term < 1e-300 {
            break;
        }
    }
    sum
}

/// Product of one-dimensional kernels at `y`.
pub fn bessel_product(y: &Point, t: f64) -> f64 {
    y.coords().iter().map(|c| bessel_series(c.unsigned_abs() as u32, t)).product()
}

/// Worst relative residuals of summation by parts, the divergence form of the
/// generator and both product rules, for one random instance on `B(0, 12)`.
pub fn calculus_residuals(dim: usize, seed: u64) -> [f64; 3] {
    let radius = 12;
    let region = LatticeBox::centered(dim, radius);
    let set = Arc::new(region.to_set());
    let mut rng = stream(seed, dim as u64);
    let mut draw = |lo: f64, hi: f64| rng.random_range(lo..hi);

    let bonds = Arc::new(BondSet::new(bonds_within(&set)));
    let grad = |h: &VertexField| gradient(h, bonds.clone()).unwrap();

    // Summation by parts with f supported strictly inside.
    let f_vals: Vec<f64> = set
        .points()
        .iter()
        .map(|x| if x.sup_norm() < radius as i64 { draw(-1.0, 1.0) } else { 0.0 })
        .collect();
    let f = VertexField::new(set.clone(), f_vals).unwrap();
    let grad_f = grad(&f);
    let flux_vals: Vec<f64> = (0..bonds.len()).map(|_| draw(-3.0, 3.0)).collect();
    let flux = BondField::new(bonds.clone(), flux_vals).unwrap();
    let left: Vec<f64> = grad_f.values().iter().zip(flux.values()).map(|(a, b)| a * b).collect();
    let div = divergence(&flux, set.clone(), MissingBonds::Zero).unwrap();
    let right: Vec<f64> = f.values().iter().zip(div.values()).map(|(a, b)| a * b).collect();
    let scale: f64 = left.iter().chain(&right).map(|v| v.abs()).sum();
    let sbp = (left.iter().sum::<f64>() - right.iter().sum::<f64>()).abs() / scale;

    // L u + div(w grad u) = 0 on interior vertices.
    let w = EnvironmentLaw::ParetoMixture { a: 2.0, b: 1.0 }.generate(seed, region).unwrap();
    let u_vals: Vec<f64> = (0..set.len()).map(|_| draw(-2.0, 2.0)).collect();
    let u = VertexField::new(set.clone(), u_vals).unwrap();
    let grad_u = grad(&u);
    let current_vals: Vec<f64> = bonds
        .bonds()
        .iter()
        .zip(grad_u.values())
        .map(|(b, g)| w.get(b).unwrap() * g)
        .collect();
    let current = BondField::new(bonds.clone(), current_vals).unwrap();
    let inner = Arc::new(LatticeBox::centered(dim, radius - 1).to_set());
    let div = divergence(&current, inner.clone(), MissingBonds::Error).unwrap();
    let mut form: f64 = 0.0;
    for (x, dv) in inner.points().iter().zip(div.values()) {
        let lu = apply_generator(&w, &u, x).unwrap();
        let size: f64 = x
            .neighbors()
            .map(|y| w.between(*x, y).unwrap() * (u.get(&y).unwrap() - u.get(x).unwrap()).abs())
            .sum();
        form = form.max((lu + dv).abs() / size.max(f64::MIN_POSITIVE));
    }

    // grad(fg) = f(upper) grad g + g(lower) grad f = f(e) grad g + g(e) grad f.
    let g_vals: Vec<f64> = (0..set.len()).map(|_| draw(-2.0, 2.0)).collect();
    let g = VertexField::new(set.clone(), g_vals).unwrap();
    let fg = f.zip_with(&g, |a, b| a * b).unwrap();
    let (gf, gg, gfg) = (grad(&f), grad(&g), grad(&fg));
    let (mf, mg) = (midpoint(&f, bonds.clone()).unwrap(), midpoint(&g, bonds.clone()).unwrap());
    let mut product: f64 = 0.0;
    for (k, b) in bonds.bonds().iter().enumerate() {
        let (fu, gl) = (f.get(&b.upper()).unwrap(), g.get(&b.lower()).unwrap());
        let (dg, df, lhs) = (gg.values()[k], gf.values()[k], gfg.values()[k]);
        let (a1, a2) = (fu * dg, gl * df);
        let (b1, b2) = (mf.values()[k] * dg, mg.values()[k] * df);
        let size_one = lhs.abs() + a1.abs() + a2.abs();
        let size_two = lhs.abs() + b1.abs() + b2.abs();
        if size_one > 0.0 {
            product = product.max((lhs - (a1 + a2)).abs() / size_one);
        }
        if size_two > 0.0 {
            product = product.max((lhs - (b1 + b2)).abs() / size_two);
        }
    }
    [sbp, form, product]
}

/// Minimal radial energy from the Euler-Lagrange system, solved by
/// tridiagonal elimination. Weights must be positive.
pub fn tridiagonal_energy(weights: &[f64]) -> f64 {
    let m = weights.len();
    if m == 1 {
        return weights[0];
    }
    // Unknowns phi_1 .. phi_{m-1}; row k: (f_{k-1} + f_k) phi_k - f_{k-1} phi_{k-1} - f_k phi_{k+1} = 0.
    let n = m - 1;
    let mut diag: Vec<f64> = (1..m).map(|k| weights[k - 1] + weights[k]).collect();
    let mut rhs = vec![0.0; n];
    rhs[0] = weights[0];
    for k in 1..n {
        let factor = -weights[k] / diag[k - 1];
        diag[k] -= factor * -weights[k];
        rhs[k] -= factor * rhs[k - 1];
    }
    let mut phi = vec![0.0; n];
    phi[n - 1] = rhs[n - 1] / diag[n - 1];
    for k in (0..n - 1).rev() {
        phi[k] = (rhs[k] + weights[k + 1] * phi[k + 1]) / diag[k];
    }
    let mut profile = vec![1.0];
    profile.extend(phi);
    profile.push(0.0);
    weights
        .iter()
        .enumerate()
        .map(|(k, f)| f * (profile[k + 1] - profile[k]).powi(2))
        .sum()
}

/// Minimal energy over monotone profiles with values on the grid `j / steps`,
/// by dynamic programming over shells.
pub fn grid_energy(weights: &[f64], steps: usize) -> f64 {
    let h = 1.0 / steps as f64;
    // cost[j]: best energy so far with the current level at value j h.
    let mut cost = vec![f64::INFINITY; steps + 1];
    cost[steps] = 0.0;
    for (k, f) in weights.iter().enumerate() {
        let last = k + 1 == weights.len();
        let mut next = vec![f64::INFINITY; steps + 1];
        for (j, c) in cost.iter().enumerate() {
            if !c.is_finite() {
                continue;
            }
            for (i, slot) in next.iter_mut().enumerate().take(j + 1) {
                if last && i != 0 {
                    continue;
                }
                let step = (j - i) as f64 * h;
                *slot = slot.min(c + f * step * step);
            }
        }
        cost = next;
    }
    cost[0]
}

/// Largest energy increase caused by rounding `profile` to the grid.
pub fn rounding_allowance(profile: &[f64], weights: &[f64], steps: usize) -> f64 {
    let h = 1.0 / steps as f64;
    weights
        .iter()
        .enumerate()
        .map(|(k, f)| f * (2.0 * (profile[k + 1] - profile[k]).abs() * h + h * h))
        .sum()
}
