//! Vertex, bond and space-time fields with the discrete gradient, divergence,
//! generator and normalized Lebesgue norms.

use std::sync::Arc;

use crate::error::{domain, Result};
use crate::lattice::{bonds_within, Bond, BondSet, Point, VertexSet};

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Pairwise sum of `f(0), ..., f(len - 1)` without materialising the terms.
pub fn pairwise_sum_with(len: usize, f: &impl Fn(usize) -> f64) -> f64 {
    fn go(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
        if hi - lo <= 32 {
            return (lo..hi).map(f).sum();
        }
        let mid = lo + (hi - lo) / 2;
        go(lo, mid, f) + go(mid, hi, f)
    }
    go(0, len, f)
}

/// `(sum |v|^p)^(1/p)`, divided by the count inside the root when
/// `normalized`. `p = f64::INFINITY` gives the sup norm either way.
pub fn lp_norm(values: &[f64], p: f64, normalized: bool) -> Result<f64> {
    lp_norm_with(values.len(), p, normalized, &|i| values[i])
}

pub(crate) fn lp_norm_with(
    len: usize,
    p: f64,
    normalized: bool,
    f: &impl Fn(usize) -> f64,
) -> Result<f64> {
    if len == 0 {
        return Err(domain("norm over an empty set"));
    }
    if p.is_nan() || p <= 0.0 {
        return Err(domain(format!("norm exponent must be positive, got {p}")));
    }
    if p.is_infinite() {
        return Ok((0..len).map(|i| f(i).abs()).fold(0.0, f64::max));
    }
    let s = if p == 1.0 {
        pairwise_sum_with(len, &|i| f(i).abs())
    } else if p == 2.0 {
        pairwise_sum_with(len, &|i| f(i) * f(i))
    } else {
        pairwise_sum_with(len, &|i| f(i).abs().powf(p))
    };
    let s = if normalized { s / len as f64 } else { s };
    Ok(if p == 1.0 { s } else { s.powf(1.0 / p) })
}

/// Anything that assigns a conductance to (some) bonds.
pub trait Conductances {
    fn conductance(&self, bond: &Bond) -> Option<f64>;
}

#[derive(Clone, Debug)]
pub struct VertexField {
    domain: Arc<VertexSet>,
    values: Vec<f64>,
}

impl VertexField {
    pub fn new(domain: Arc<VertexSet>, values: Vec<f64>) -> Result<VertexField> {
        if domain.len() != values.len() {
            return Err(domain_len(domain.len(), values.len()));
        }
        Ok(VertexField { domain, values })
    }

    pub fn from_fn(domain: Arc<VertexSet>, f: impl Fn(&Point) -> f64) -> VertexField {
        let values = domain.points().iter().map(f).collect();
        VertexField { domain, values }
    }

    pub fn constant(domain: Arc<VertexSet>, c: f64) -> VertexField {
        let values = vec![c; domain.len()];
        VertexField { domain, values }
    }

    pub fn domain(&self) -> &Arc<VertexSet> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, p: &Point) -> Option<f64> {
        self.domain.index_of(p).map(|i| self.values[i])
    }

    pub fn value(&self, p: &Point) -> Result<f64> {
        self.get(p)
            .ok_or_else(|| domain(format!("{p:?} lies outside the field's domain")))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> VertexField {
        VertexField {
            domain: self.domain.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on the same domain.
    pub fn zip_with(&self, other: &VertexField, f: impl Fn(f64, f64) -> f64) -> Result<VertexField> {
        if *self.domain != *other.domain {
            return Err(domain("fields live on different domains"));
        }
        Ok(VertexField {
            domain: self.domain.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn restrict(&self, set: Arc<VertexSet>) -> Result<VertexField> {
        let values = set
            .points()
            .iter()
            .map(|p| self.value(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(VertexField { domain: set, values })
    }

    fn gather(&self, set: &VertexSet) -> Result<Vec<f64>> {
        if set.is_empty() {
            return Err(domain("empty vertex set"));
        }
        set.points().iter().map(|p| self.value(p)).collect()
    }

    pub fn norm(&self, set: &VertexSet, p: f64, normalized: bool) -> Result<f64> {
        lp_norm(&self.gather(set)?, p, normalized)
    }

    pub fn sum(&self, set: &VertexSet) -> Result<f64> {
        Ok(pairwise_sum(&self.gather(set)?))
    }

    pub fn max(&self, set: &VertexSet) -> Result<f64> {
        Ok(self.gather(set)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn min(&self, set: &VertexSet) -> Result<f64> {
        Ok(self.gather(set)?.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn oscillation(&self, set: &VertexSet) -> Result<f64> {
        Ok(self.max(set)? - self.min(set)?)
    }
}

fn domain_len(expected: usize, got: usize) -> crate::error::Error {
    domain(format!("expected {expected} values, got {got}"))
}

#[derive(Clone, Debug)]
pub struct BondField {
    domain: Arc<BondSet>,
    values: Vec<f64>,
}

impl BondField {
    pub fn new(domain: Arc<BondSet>, values: Vec<f64>) -> Result<BondField> {
        if domain.len() != values.len() {
            return Err(domain_len(domain.len(), values.len()));
        }
        Ok(BondField { domain, values })
    }

    pub fn from_fn(domain: Arc<BondSet>, f: impl Fn(&Bond) -> f64) -> BondField {
        let values = domain.bonds().iter().map(f).collect();
        BondField { domain, values }
    }

    pub fn domain(&self) -> &Arc<BondSet> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, b: &Bond) -> Option<f64> {
        self.domain.index_of(b).map(|i| self.values[i])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> BondField {
        BondField {
            domain: self.domain.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &BondField, f: impl Fn(f64, f64) -> f64) -> Result<BondField> {
        if *self.domain != *other.domain {
            return Err(domain("fields live on different bond sets"));
        }
        Ok(BondField {
            domain: self.domain.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    /// Norm over the bonds with both endpoints in `set`.
    pub fn norm(&self, set: &VertexSet, p: f64, normalized: bool) -> Result<f64> {
        let vals = bonds_within(set)
            .iter()
            .map(|b| {
                self.get(b)
                    .ok_or_else(|| domain(format!("bond {b:?} missing from the field")))
            })
            .collect::<Result<Vec<_>>>()?;
        lp_norm(&vals, p, normalized)
    }

    pub fn sum(&self) -> f64 {
        pairwise_sum(&self.values)
    }
}

impl Conductances for BondField {
    fn conductance(&self, bond: &Bond) -> Option<f64> {
        self.get(bond)
    }
}

/// `grad f(e) = f(upper) - f(lower)` on every bond of `bonds`.
pub fn gradient(f: &VertexField, bonds: Arc<BondSet>) -> Result<BondField> {
    let values = bonds
        .bonds()
        .iter()
        .map(|b| Ok(f.value(&b.upper())? - f.value(&b.lower())?))
        .collect::<Result<Vec<_>>>()?;
    Ok(BondField {
        domain: bonds,
        values,
    })
}

/// Gradient on the bonds with both endpoints in the field's domain.
pub fn gradient_within(f: &VertexField) -> BondField {
    let bonds = Arc::new(BondSet::new(bonds_within(f.domain())));
    gradient(f, bonds).expect("bonds lie inside the domain")
}

/// `h(e) = (h(upper) + h(lower)) / 2`.
pub fn midpoint(h: &VertexField, bonds: Arc<BondSet>) -> Result<BondField> {
    let values = bonds
        .bonds()
        .iter()
        .map(|b| Ok(0.5 * (h.value(&b.upper())? + h.value(&b.lower())?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(BondField {
        domain: bonds,
        values,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MissingBonds {
    Error,
    /// Treat bonds absent from the field as carrying zero.
    Zero,
}

/// `div F(x) = sum_i [F({x - e_i, x}) - F({x, x + e_i})]` for every x in `set`.
pub fn divergence(f: &BondField, set: Arc<VertexSet>, missing: MissingBonds) -> Result<VertexField> {
    let look = |b: Bond| match f.get(&b) {
        Some(v) => Ok(v),
        None if missing == MissingBonds::Zero => Ok(0.0),
        None => Err(domain(format!("bond {b:?} incident to the set is missing"))),
    };
    let values = set
        .points()
        .iter()
        .map(|x| {
            let mut acc = 0.0;
            for a in 0..x.dim() {
                acc += look(Bond::new(x.step(a, -1), a))? - look(Bond::new(*x, a))?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VertexField {
        domain: set,
        values,
    })
}

/// `L u(x) = sum_y w(x, y) (u(y) - u(x))` over the 2d neighbours of x.
pub fn apply_generator(w: &dyn Conductances, u: &VertexField, x: &Point) -> Result<f64> {
    let ux = u.value(x)?;
    let mut acc = 0.0;
    for y in x.neighbors() {
        let b = Bond::between(*x, y)?;
        let c = w
            .conductance(&b)
            .ok_or_else(|| domain(format!("no conductance on {b:?}")))?;
        let uy = u
            .get(&y)
            .ok_or_else(|| domain(format!("neighbour {y:?} of {x:?} has no value")))?;
        acc += c * (uy - ux);
    }
    Ok(acc)
}

/// Space-time measure `|I| * |S|` of a cylinder.
pub fn cylinder_measure(duration: f64, set: &VertexSet) -> f64 {
    duration * set.len() as f64
}

/// Values on a fixed vertex set at strictly increasing instants.
#[derive(Clone, Debug)]
pub struct SpaceTimeField {
    times: Vec<f64>,
    domain: Arc<VertexSet>,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(times: Vec<f64>, set: Arc<VertexSet>, values: Vec<f64>) -> Result<SpaceTimeField> {
        if times.is_empty() {
            return Err(domain("a space-time field needs at least one instant"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(domain("time grid must be strictly increasing"));
        }
        if values.len() != times.len() * set.len() {
            return Err(domain_len(times.len() * set.len(), values.len()));
        }
        Ok(SpaceTimeField {
            times,
            domain: set,
            values,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn domain(&self) -> &Arc<VertexSet> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn slice(&self, k: usize) -> &[f64] {
        let n = self.domain.len();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn snapshot(&self, k: usize) -> VertexField {
        VertexField {
            domain: self.domain.clone(),
            values: self.slice(k).to_vec(),
        }
    }

    pub fn value(&self, k: usize, p: &Point) -> Option<f64> {
        self.domain.index_of(p).map(|i| self.slice(k)[i])
    }

    /// Indices of stored instants inside `[t0, t1]`.
    pub fn instants_in(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        let eps = 1e-9 * (1.0 + t0.abs().max(t1.abs()));
        let lo = self.times.partition_point(|&t| t < t0 - eps);
        let hi = self.times.partition_point(|&t| t <= t1 + eps);
        lo..hi
    }

    fn cylinder_values(&self, t0: f64, t1: f64, set: &VertexSet) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let range = self.instants_in(t0, t1);
        if range.is_empty() || set.is_empty() {
            return Err(domain("cylinder contains no stored values"));
        }
        let idx = set
            .points()
            .iter()
            .map(|p| {
                self.domain
                    .index_of(p)
                    .ok_or_else(|| domain(format!("{p:?} outside the field's domain")))
            })
            .collect::<Result<Vec<_>>>()?;
        let times = self.times[range.clone()].to_vec();
        let rows = range
            .map(|k| {
                let s = self.slice(k);
                idx.iter().map(|&i| s[i]).collect()
            })
            .collect();
        Ok((times, rows))
    }

    pub fn max(&self, t0: f64, t1: f64, set: &VertexSet) -> Result<f64> {
        let (_, rows) = self.cylinder_values(t0, t1, set)?;
        Ok(rows.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn min(&self, t0: f64, t1: f64, set: &VertexSet) -> Result<f64> {
        let (_, rows) = self.cylinder_values(t0, t1, set)?;
        Ok(rows.iter().flatten().copied().fold(f64::INFINITY, f64::min))
    }

    /// Oscillation over the stored instants in `[t0, t1]` and the vertices of `set`.
    pub fn oscillation(&self, t0: f64, t1: f64, set: &VertexSet) -> Result<f64> {
        Ok(self.max(t0, t1, set)? - self.min(t0, t1, set)?)
    }

    /// Space-time Lebesgue norm with trapezoidal quadrature in time. With a
    /// single stored instant the time integral degenerates to that slice.
    pub fn norm(&self, t0: f64, t1: f64, set: &VertexSet, p: f64, normalized: bool) -> Result<f64> {
        let (times, rows) = self.cylinder_values(t0, t1, set)?;
        if p.is_infinite() {
            return Ok(rows.iter().flatten().fold(0.0, |m, v| f64::max(m, v.abs())));
        }
        if p <= 0.0 {
            return Err(domain("norm exponent must be positive"));
        }
        let slice_sums: Vec<f64> = rows
            .iter()
            .map(|r| pairwise_sum_with(r.len(), &|i| r[i].abs().powf(p)))
            .collect();
        let (integral, duration) = if times.len() == 1 {
            (slice_sums[0], 1.0)
        } else {
            let pieces: Vec<f64> = (0..times.len() - 1)
                .map(|k| 0.5 * (times[k + 1] - times[k]) * (slice_sums[k] + slice_sums[k + 1]))
                .collect();
            (pairwise_sum(&pieces), times[times.len() - 1] - times[0])
        };
        let s = if normalized {
            integral / cylinder_measure(duration, set)
        } else {
            integral
        };
        Ok(s.powf(1.0 / p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{ball, LatticeBox};

    fn origin_ball(d: usize, n: u32) -> Arc<VertexSet> {
        Arc::new(ball(Point::origin(d), n))
    }

    #[test]
    fn delta_norm_example() {
        let s = origin_ball(1, 1);
        let f = VertexField::from_fn(s.clone(), |p| if p.sup_norm() == 0 { 1.0 } else { 0.0 });
        let v = f.norm(&s, 2.0, true).unwrap();
        assert!((v - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(f.norm(&s, f64::INFINITY, true).unwrap(), 1.0);
        assert_eq!(f.norm(&s, f64::INFINITY, false).unwrap(), 1.0);
    }

    #[test]
    fn empty_norm_is_an_error() {
        assert!(lp_norm(&[], 2.0, true).is_err());
        let s = origin_ball(2, 1);
        let f = VertexField::constant(s, 1.0);
        let empty = VertexSet::from_points(2, []).unwrap();
        assert!(f.norm(&empty, 1.0, false).is_err());
    }

    #[test]
    fn cylinder_measure_example() {
        assert_eq!(cylinder_measure(2.0, &origin_ball(2, 1)), 18.0);
    }

    #[test]
    fn gradient_needs_both_endpoints() {
        let s = origin_ball(1, 1);
        let f = VertexField::from_fn(s, |p| p.get(0) as f64);
        let bonds = Arc::new(BondSet::new([Bond::new(Point::new(&[1]), 0)]));
        assert!(gradient(&f, bonds).is_err());
        let g = gradient_within(&f);
        assert!(g.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn divergence_of_missing_bonds() {
        let s = origin_ball(2, 1);
        let f = VertexField::from_fn(s.clone(), |p| p.get(0) as f64);
        let g = gradient_within(&f);
        assert!(divergence(&g, s.clone(), MissingBonds::Error).is_err());
        let inner = origin_ball(2, 0);
        let dv = divergence(&g, inner, MissingBonds::Error).unwrap();
        assert_eq!(dv.values(), &[0.0]);
        assert!(divergence(&g, s, MissingBonds::Zero).is_ok());
    }

    #[test]
    fn generator_of_linear_function_vanishes() {
        let s = origin_ball(2, 2);
        let f = VertexField::from_fn(s.clone(), |p| 3.0 * p.get(0) as f64 - p.get(1) as f64);
        let ones = BondField::from_fn(Arc::new(BondSet::new(bonds_within(&s))), |_| 1.0);
        let x = Point::new(&[1, -1]);
        assert_eq!(apply_generator(&ones, &f, &x).unwrap(), 0.0);
        assert!(apply_generator(&ones, &f, &Point::new(&[2, 0])).is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499500.0);
        assert_eq!(pairwise_sum_with(1000, &|i| i as f64), 499500.0);
    }

    #[test]
    fn space_time_norms_and_oscillation() {
        let s = Arc::new(LatticeBox::centered(1, 1).to_set());
        let times = vec![0.0, 1.0, 2.0];
        let values = vec![1.0; 9];
        let u = SpaceTimeField::new(times, s.clone(), values).unwrap();
        assert!((u.norm(0.0, 2.0, &s, 2.0, true).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(u.oscillation(0.0, 2.0, &s).unwrap(), 0.0);
        assert!(SpaceTimeField::new(vec![0.0, 0.0], s, vec![0.0; 6]).is_err());
    }
}
