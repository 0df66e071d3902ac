//! Dirichlet problem `L u = 0` inside a box by preconditioned conjugate gradients.

use std::sync::Arc;

use super::operator::BoxOperator;
use crate::calculus::{pairwise_sum_with, VertexField};
use crate::environment::ConductanceField;
use crate::error::{domain, Error, Result};
use crate::lattice::LatticeBox;

#[derive(Clone, Debug)]
pub struct HarmonicSolution {
    pub field: VertexField,
    /// `max |L u|` over interior vertices divided by `max(1, max |data|)`.
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    pairwise_sum_with(a.len(), &|i| a[i] * b[i])
}

/// Harmonic extension of `dirichlet` (boundary vertices of `region` in
/// lexicographic order) to the interior of `region`.
pub fn solve_harmonic(w: &ConductanceField, region: &LatticeBox, dirichlet: &[f64]) -> Result<HarmonicSolution> {
    let local = w.restrict(region)?;
    let op = BoxOperator::new(&local)?;
    let n = region.len();
    if dirichlet.len() != op.boundary().len() {
        return Err(domain(format!(
            "expected {} boundary values, got {}",
            op.boundary().len(),
            dirichlet.len()
        )));
    }
    if dirichlet.iter().any(|v| !v.is_finite()) {
        return Err(domain("boundary data must be finite"));
    }
    let scale = dirichlet.iter().fold(1.0, |m: f64, v| m.max(v.abs()));
    let mut is_boundary = vec![false; n];
    op.boundary().iter().for_each(|&i| is_boundary[i] = true);
    let interior: Vec<usize> = (0..n).filter(|&i| !is_boundary[i]).collect();

    // Unknowns live on interior indices of a full-size vector with zero
    // boundary, so the stencil applies directly: A v = -L v.
    let mut lifted = vec![0.0; n];
    for (&i, &v) in op.boundary().iter().zip(dirichlet) {
        lifted[i] = v;
    }
    let mut rhs = vec![0.0; n];
    op.generator(&lifted, &mut rhs);
    let mut diag = vec![0.0; n];
    let mut unit = vec![0.0; n];
    let mut col = vec![0.0; n];
    for &i in &interior {
        diag[i] = local.total_conductance(&region.point(i)).unwrap();
    }
    let apply = |v: &[f64], out: &mut [f64]| {
        op.generator(v, out);
        out.iter_mut().for_each(|x| *x = -*x);
    };
    // b = L(lifted) restricted to the interior, since -L(v + lifted) = 0.
    let b = rhs;
    let mut x = vec![0.0; n];
    let mut r = b.clone();
    let mut z: Vec<f64> = (0..n).map(|i| if is_boundary[i] { 0.0 } else { r[i] / diag[i] }).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let target = 1e-13 * dot(&b, &b).sqrt().max(1e-300);
    let max_iter = 20 * n + 100;
    let mut iterations = 0;
    while dot(&r, &r).sqrt() > target {
        if iterations >= max_iter {
            return Err(Error::Solver(format!("conjugate gradients did not converge in {max_iter} iterations")));
        }
        apply(&p, &mut col);
        let alpha = rz / dot(&p, &col);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * col[i];
        }
        for &i in &interior {
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
    for (&i, &v) in op.boundary().iter().zip(dirichlet) {
        x[i] = v;
    }
    op.generator(&x, &mut unit);
    let residual = unit.iter().fold(0.0, |m: f64, v| m.max(v.abs())) / scale;
    if residual > 1e-10 {
        return Err(Error::Solver(format!("harmonic residual {residual:e} above 1e-10")));
    }
    let field = VertexField::new(Arc::new(region.to_set()), x)?;
    Ok(HarmonicSolution { field, residual, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::EnvironmentLaw;
    use crate::lattice::Point;

    #[test]
    fn linear_data_is_reproduced() {
        let region = LatticeBox::centered(2, 6);
        let w = ConductanceField::constant(region, 1.0).unwrap();
        let op = BoxOperator::new(&w).unwrap();
        let data: Vec<f64> = op.boundary().iter().map(|&i| region.point(i).get(0) as f64).collect();
        let sol = solve_harmonic(&w, &region, &data).unwrap();
        for x in region.points() {
            assert!((sol.field.value(&x).unwrap() - x.get(0) as f64).abs() < 1e-10);
        }
    }

    #[test]
    fn random_environment_residual_is_small() {
        let region = LatticeBox::new(Point::new(&[3, -2]), 7);
        let w = EnvironmentLaw::ParetoMixture { a: 2.5, b: 2.5 }.generate(4, region).unwrap();
        let op = BoxOperator::new(&w).unwrap();
        let data: Vec<f64> = (0..op.boundary().len()).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
        let sol = solve_harmonic(&w, &region, &data).unwrap();
        assert!(sol.residual <= 1e-10);
        let (lo, hi) = (-6.0, 6.0);
        assert!(sol.field.values().iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
    }
}
