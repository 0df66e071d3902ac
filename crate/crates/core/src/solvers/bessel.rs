//! Closed-form heat kernel of the constant-conductance walk.

use crate::lattice::Point;

/// `e^{-2t} I_k(2t)` by its power series, summed relative to the largest term.
pub fn scaled_bessel(k: u64, t: f64) -> f64 {
    if t == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    let lt = t.ln();
    let ln_fact = |m: u64| -> f64 { (2..=m).map(|i| (i as f64).ln()).sum() };
    // log of term m: (2m + k) ln t - ln m! - ln (m + k)! - 2t
    let base = k as f64 * lt - ln_fact(k) - 2.0 * t;
    let mut logs = Vec::new();
    let mut log_term = base;
    let mut m: u64 = 0;
    let mut peak = f64::NEG_INFINITY;
    loop {
        logs.push(log_term);
        peak = peak.max(log_term);
        // Terms decrease geometrically past the peak with ratio t^2 / ((m+1)(m+k+1)).
        let ratio = t * t / ((m + 1) as f64 * (m + k + 1) as f64);
        if ratio < 0.5 && log_term < peak + (1e-17f64).ln() {
            break;
        }
        log_term += ratio.ln();
        m += 1;
    }
    let sum: f64 = logs.iter().map(|l| (l - peak).exp()).sum();
    (peak + sum.ln()).exp()
}

/// `prod_i e^{-2t} I_{|x_i|}(2t)`: the transition probability from the
/// origin to `x` at time `t` when every conductance is one.
pub fn bessel_reference(t: f64, x: &Point) -> f64 {
    x.coords()
        .iter()
        .map(|&c| scaled_bessel(c.unsigned_abs(), t))
        .product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        assert!((bessel_reference(1.0, &Point::origin(1)) - 0.308_508_3).abs() < 1e-7);
        assert!((bessel_reference(1.0, &Point::origin(2)) - 0.095_177_4).abs() < 1e-7);
        assert_eq!(bessel_reference(0.0, &Point::origin(3)), 1.0);
        assert_eq!(bessel_reference(0.0, &Point::unit(2, 1)), 0.0);
    }

    #[test]
    fn one_dimensional_kernel_is_a_distribution() {
        for &t in &[0.1, 3.0, 250.0] {
            let total: f64 = (-3000i64..=3000).map(|k| scaled_bessel(k.unsigned_abs(), t)).sum();
            assert!((total - 1.0).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn large_time_matches_the_gaussian_limit() {
        let t = 4096.0;
        let v = scaled_bessel(0, t);
        let gauss = 1.0 / (4.0 * std::f64::consts::PI * t).sqrt();
        assert!((v / gauss - 1.0).abs() < 1e-4);
    }
}
