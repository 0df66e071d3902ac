//! Reproducible boundary and initial data for caloric and harmonic trials.

use serde::{Deserialize, Serialize};

use crate::lattice::{LatticeBox, Point};
use crate::rng::{hash_words, mix64, unit_open};
use crate::solvers::{scaled_bessel, LateralData};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    /// Gaussian noise smoothed by the unit heat kernel at time 1.
    Smoothed,
    /// `x . e_1`, constant in time.
    Linear,
    /// The constant 1.
    Constant,
}

impl std::str::FromStr for DataKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<DataKind, String> {
        match s {
            "smoothed" => Ok(DataKind::Smoothed),
            "linear" => Ok(DataKind::Linear),
            "constant" => Ok(DataKind::Constant),
            _ => Err(format!("unknown data kind `{s}`")),
        }
    }
}

/// Standard Gaussian attached to `(seed, x, knot)` by Box-Muller.
fn noise(seed: u64, x: &Point, knot: u64) -> f64 {
    let mut words = [0u64; 5];
    for (w, &c) in words.iter_mut().zip(x.coords()) {
        *w = c as u64;
    }
    words[4] = knot;
    let h = hash_words(seed, &words);
    let (u1, u2) = (unit_open(h), unit_open(mix64(h ^ 0x5851_f42d_4c95_7f2d)));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Truncated product kernel `prod_i e^{-2} I_{z_i}(2)`, rescaled so the
/// smoothed noise has unit variance.
pub(crate) struct Smoother {
    taps: Vec<(Point, f64)>,
}

const REACH: i64 = 8;

impl Smoother {
    pub fn new(dim: usize) -> Smoother {
        let one: Vec<f64> = (0..=REACH).map(|k| scaled_bessel(k as u64, 1.0)).collect();
        let taps: Vec<(Point, f64)> = LatticeBox::centered(dim, REACH as u32)
            .points()
            .map(|z| {
                let w = z.coords().iter().map(|c| one[c.unsigned_abs() as usize]).product();
                (z, w)
            })
            .collect();
        let norm = taps.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        Smoother {
            taps: taps.into_iter().map(|(z, w)| (z, w / norm)).collect(),
        }
    }

    pub fn value(&self, seed: u64, x: &Point, knot: u64) -> f64 {
        self.taps.iter().map(|(z, w)| w * noise(seed, &(*x + *z), knot)).sum()
    }
}

pub(crate) fn pointwise(kind: DataKind, smoother: &Smoother, seed: u64, x: &Point, knot: u64, positive: bool) -> f64 {
    let v = match kind {
        DataKind::Smoothed => smoother.value(seed, x, knot),
        DataKind::Linear => x.get(0) as f64,
        DataKind::Constant => 1.0,
    };
    if positive && kind == DataKind::Smoothed {
        v.exp()
    } else {
        v
    }
}

/// Lateral data at `knots` and the initial slice on `region`. Positive data
/// exponentiates the smoothed field.
pub(crate) fn caloric_data(
    region: &LatticeBox,
    knots: &[f64],
    kind: DataKind,
    positive: bool,
    seed: u64,
) -> (LateralData, Vec<f64>) {
    let smoother = Smoother::new(region.dim());
    let edge: Vec<Point> = region.points().filter(|p| !region.is_interior(p)).collect();
    let values = (0..knots.len())
        .map(|k| {
            edge.iter()
                .map(|x| pointwise(kind, &smoother, seed, x, k as u64, positive))
                .collect()
        })
        .collect();
    let initial = region
        .points()
        .map(|x| pointwise(kind, &smoother, seed, &x, 0, positive))
        .collect();
    (
        LateralData {
            knots: knots.to_vec(),
            values,
        },
        initial,
    )
}

/// Dirichlet data on the edge of `region`, in lexicographic order.
pub(crate) fn dirichlet_data(region: &LatticeBox, kind: DataKind, positive: bool, seed: u64) -> Vec<f64> {
    let smoother = Smoother::new(region.dim());
    region
        .points()
        .filter(|p| !region.is_interior(p))
        .map(|x| pointwise(kind, &smoother, seed, &x, 0, positive))
        .collect()
}
