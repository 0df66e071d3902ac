//! Poisson-weighted powers of the lazy step `P = I + L / rate`.

use super::operator::BoxOperator;

/// Normalized Poisson(`mean`) weights on `first..first + weights.len()`,
/// truncated where the discarded mass is far below `tol`.
#[derive(Clone, Debug)]
pub(crate) struct PoissonWindow {
    pub first: usize,
    pub weights: Vec<f64>,
}

impl PoissonWindow {
    pub fn new(mean: f64, tol: f64) -> PoissonWindow {
        if mean == 0.0 {
            return PoissonWindow { first: 0, weights: vec![1.0] };
        }
        // Recurrences outward from the mode avoid any factorial or gamma evaluation.
        let cut = 1e-4 * tol / (1.0 + mean.sqrt());
        let mode = mean.floor() as usize;
        let mut right = vec![1.0];
        let mut k = mode;
        loop {
            k += 1;
            let next = right[right.len() - 1] * mean / k as f64;
            if next < cut && (k as f64) > mean {
                break;
            }
            right.push(next);
        }
        let mut left = Vec::new();
        let mut w = 1.0;
        let mut k = mode;
        while k > 0 {
            w *= k as f64 / mean;
            if w < cut {
                break;
            }
            left.push(w);
            k -= 1;
        }
        let first = mode - left.len();
        left.reverse();
        left.extend(right);
        let total = crate::calculus::pairwise_sum(&left);
        left.iter_mut().for_each(|v| *v /= total);
        PoissonWindow { first, weights: left }
    }

    /// Index one past the last weighted power.
    pub fn end(&self) -> usize {
        self.first + self.weights.len()
    }

    /// Weight of `P^k`, zero outside the window.
    pub fn weight(&self, k: usize) -> f64 {
        if k < self.first {
            0.0
        } else {
            self.weights.get(k - self.first).copied().unwrap_or(0.0)
        }
    }
}

/// Result of `sum_k w_k P^k x` with the mass absorbed at the box boundary.
pub(crate) struct Propagated {
    pub values: Vec<f64>,
    pub leak: f64,
    pub steps: usize,
}

/// `e^{tL} x` with an absorbing boundary. Boundary entries of `x` must be zero.
pub(crate) fn propagate(op: &BoxOperator, x: &[f64], t: f64, tol: f64) -> Propagated {
    let window = PoissonWindow::new(op.rate() * t, tol);
    let n = x.len();
    let mut acc = vec![0.0; n];
    let mut cur = x.to_vec();
    let mut next = vec![0.0; n];
    let mut absorbed = 0.0;
    let mut leak_terms = Vec::with_capacity(window.weights.len());
    let end = window.end();
    for k in 0..end {
        let w = window.weight(k);
        if w != 0.0 {
            leak_terms.push(w * absorbed);
        }
        if k + 1 == end {
            acc.iter_mut().zip(&cur).for_each(|(a, c)| *a += w * c);
            break;
        }
        absorbed += op.exit_flux(&cur);
        op.lazy_step(&cur, &mut next, &mut [(&mut acc, w)]);
        std::mem::swap(&mut cur, &mut next);
    }
    Propagated {
        values: acc,
        leak: crate::calculus::pairwise_sum(&leak_terms),
        steps: end,
    }
}
