//! Vertices, nearest-neighbour bonds and finite subsets of Z^d.

use rustc_hash::FxHashMap as HashMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::error::{domain, Result};

pub const MAX_DIM: usize = 4;

/// A vertex of Z^d, 1 <= d <= 4. Unused trailing coordinates are zero.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    dim: u8,
    coords: [i64; MAX_DIM],
}

impl Point {
    pub fn new(coords: &[i64]) -> Point {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "dimension must be in 1..=4"
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point {
            dim: coords.len() as u8,
            coords: c,
        }
    }

    pub fn origin(dim: usize) -> Point {
        Point::new(&[0; MAX_DIM][..dim])
    }

    pub fn unit(dim: usize, axis: usize) -> Point {
        let mut p = Point::origin(dim);
        p.coords[axis] = 1;
        p
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[i64] {
        &self.coords[..self.dim as usize]
    }

    pub fn get(&self, axis: usize) -> i64 {
        self.coords[axis]
    }

    pub fn sup_norm(&self) -> i64 {
        self.coords().iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// The point moved by `delta` along `axis`.
    pub fn step(&self, axis: usize, delta: i64) -> Point {
        let mut p = *self;
        p.coords[axis] += delta;
        p
    }

    /// All 2d nearest neighbours, ordered axis by axis with the minus side first.
    pub fn neighbors(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.dim()).flat_map(move |a| [self.step(a, -1), self.step(a, 1)])
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.coords())
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, rhs: Point) -> Point {
        debug_assert_eq!(self.dim, rhs.dim);
        let mut p = self;
        for i in 0..MAX_DIM {
            p.coords[i] += rhs.coords[i];
        }
        p
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, rhs: Point) -> Point {
        self + (-rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        let mut p = self;
        for c in p.coords.iter_mut() {
            *c = -*c;
        }
        p
    }
}

/// An undirected nearest-neighbour bond stored as `{lower, lower + e_axis}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Bond {
    lower: Point,
    axis: u8,
}

impl Bond {
    pub fn new(lower: Point, axis: usize) -> Bond {
        assert!(axis < lower.dim(), "axis out of range");
        Bond {
            lower,
            axis: axis as u8,
        }
    }

    /// The bond joining two nearest neighbours, in canonical orientation.
    pub fn between(x: Point, y: Point) -> Result<Bond> {
        if x.dim() != y.dim() {
            return Err(domain("points of different dimension"));
        }
        let diff = y - x;
        let mut axis = None;
        for (a, &c) in diff.coords().iter().enumerate() {
            if c != 0 {
                if c.abs() != 1 || axis.is_some() {
                    return Err(domain(format!("{x:?} and {y:?} are not neighbours")));
                }
                axis = Some(a);
            }
        }
        let axis = axis.ok_or_else(|| domain("a bond needs two distinct endpoints"))?;
        let lower = if diff.get(axis) > 0 { x } else { y };
        Ok(Bond::new(lower, axis))
    }

    pub fn lower(&self) -> Point {
        self.lower
    }

    pub fn upper(&self) -> Point {
        self.lower.step(self.axis as usize, 1)
    }

    pub fn axis(&self) -> usize {
        self.axis as usize
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn translate(&self, by: Point) -> Bond {
        Bond {
            lower: self.lower + by,
            axis: self.axis,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        *x == self.lower || *x == self.upper()
    }
}

/// The box `B(center, n) = {x : |x - center|_inf <= n}` with lexicographic
/// vertex numbering (first coordinate most significant).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
pub struct LatticeBox {
    center: Point,
    radius: u32,
}

impl LatticeBox {
    pub fn new(center: Point, radius: u32) -> LatticeBox {
        LatticeBox { center, radius }
    }

    pub fn centered(dim: usize, radius: u32) -> LatticeBox {
        LatticeBox::new(Point::origin(dim), radius)
    }

    pub fn center(&self) -> Point {
        self.center
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    pub fn side(&self) -> usize {
        2 * self.radius as usize + 1
    }

    pub fn len(&self) -> usize {
        self.side().pow(self.dim() as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Index offset of a unit step along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.side().pow((self.dim() - 1 - axis) as u32)
    }

    pub fn contains(&self, p: &Point) -> bool {
        p.dim() == self.dim() && (*p - self.center).sup_norm() <= self.radius as i64
    }

    /// Whether all 2d neighbours of `p` lie in the box.
    pub fn is_interior(&self, p: &Point) -> bool {
        p.dim() == self.dim() && (*p - self.center).sup_norm() < self.radius as i64
    }

    pub fn contains_box(&self, other: &LatticeBox) -> bool {
        other.dim() == self.dim()
            && (other.center - self.center).sup_norm() + other.radius as i64
                <= self.radius as i64
    }

    pub fn index_of(&self, p: &Point) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        let side = self.side() as i64;
        let n = self.radius as i64;
        let mut idx = 0i64;
        for (c, o) in p.coords().iter().zip(self.center.coords()) {
            idx = idx * side + (c - o + n);
        }
        Some(idx as usize)
    }

    pub fn point(&self, index: usize) -> Point {
        assert!(index < self.len(), "vertex index out of range");
        let side = self.side();
        let n = self.radius as i64;
        let d = self.dim();
        let mut coords = [0i64; MAX_DIM];
        let mut rest = index;
        for a in (0..d).rev() {
            coords[a] = (rest % side) as i64 - n + self.center.get(a);
            rest /= side;
        }
        Point::new(&coords[..d])
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(move |i| self.point(i))
    }

    /// Bonds with both endpoints in the box, in canonical order.
    pub fn bonds(&self) -> impl Iterator<Item = Bond> + '_ {
        let d = self.dim();
        self.points().flat_map(move |x| {
            (0..d)
                .filter(move |&a| self.contains(&x.step(a, 1)))
                .map(move |a| Bond::new(x, a))
        })
    }

    pub fn bond_count(&self) -> usize {
        let s = self.side();
        self.dim() * (s - 1) * s.pow(self.dim() as u32 - 1)
    }

    pub fn to_set(&self) -> VertexSet {
        VertexSet {
            dim: self.dim(),
            points: self.points().collect(),
            lookup: Lookup::Box(*self),
        }
    }
}

#[derive(Clone, Debug)]
enum Lookup {
    Box(LatticeBox),
    Map(HashMap<Point, usize>),
}

/// A finite vertex set with a bijective index (sorted lexicographically).
#[derive(Clone, Debug)]
pub struct VertexSet {
    dim: usize,
    points: Vec<Point>,
    lookup: Lookup,
}

impl VertexSet {
    pub fn from_points(dim: usize, points: impl IntoIterator<Item = Point>) -> Result<VertexSet> {
        let mut points: Vec<Point> = points.into_iter().collect();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(domain("vertex of the wrong dimension"));
        }
        points.sort_unstable();
        points.dedup();
        let map = points.iter().enumerate().map(|(i, p)| (*p, i)).collect();
        Ok(VertexSet {
            dim,
            points,
            lookup: Lookup::Map(map),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Point {
        self.points[index]
    }

    pub fn index_of(&self, p: &Point) -> Option<usize> {
        match &self.lookup {
            Lookup::Box(b) => b.index_of(p),
            Lookup::Map(m) => m.get(p).copied(),
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.index_of(p).is_some()
    }

    pub fn is_subset_of(&self, other: &VertexSet) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }

    /// The underlying box when the set was built from one.
    pub fn as_box(&self) -> Option<&LatticeBox> {
        match &self.lookup {
            Lookup::Box(b) => Some(b),
            Lookup::Map(_) => None,
        }
    }
}

impl PartialEq for VertexSet {
    fn eq(&self, other: &VertexSet) -> bool {
        self.dim == other.dim && self.points == other.points
    }
}

/// A finite set of bonds with an index, sorted canonically.
#[derive(Clone, Debug, PartialEq)]
pub struct BondSet {
    bonds: Vec<Bond>,
    lookup: HashMap<Bond, usize>,
}

impl BondSet {
    pub fn new(bonds: impl IntoIterator<Item = Bond>) -> BondSet {
        let mut bonds: Vec<Bond> = bonds.into_iter().collect();
        bonds.sort_unstable();
        bonds.dedup();
        let lookup = bonds.iter().enumerate().map(|(i, b)| (*b, i)).collect();
        BondSet { bonds, lookup }
    }

    pub fn len(&self) -> usize {
        self.bonds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bonds.is_empty()
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn index_of(&self, b: &Bond) -> Option<usize> {
        self.lookup.get(b).copied()
    }

    pub fn contains(&self, b: &Bond) -> bool {
        self.lookup.contains_key(b)
    }
}

pub fn ball(center: Point, radius: u32) -> VertexSet {
    LatticeBox::new(center, radius).to_set()
}

/// `{x : |x - center|_inf = radius}`.
pub fn sphere(center: Point, radius: u32) -> VertexSet {
    let b = LatticeBox::new(center, radius);
    let pts = b
        .points()
        .filter(|p| (*p - center).sup_norm() == radius as i64);
    VertexSet::from_points(center.dim(), pts).expect("dimension is consistent")
}

/// Vertices of `set` having at least one neighbour outside `set`.
pub fn interior_boundary(set: &VertexSet) -> VertexSet {
    let pts = set
        .points()
        .iter()
        .filter(|x| x.neighbors().any(|y| !set.contains(&y)))
        .copied();
    VertexSet::from_points(set.dim(), pts).expect("dimension is consistent")
}

/// Bonds with both endpoints in `set`, in canonical order.
pub fn bonds_within(set: &VertexSet) -> Vec<Bond> {
    let mut out = Vec::new();
    for x in set.points() {
        for a in 0..set.dim() {
            if set.contains(&x.step(a, 1)) {
                out.push(Bond::new(*x, a));
            }
        }
    }
    out
}

/// Bonds joining the sphere of radius m to the sphere of radius m + 1 around
/// the origin, in canonical order.
pub fn sphere_bonds(m: u32, dim: usize) -> Vec<Bond> {
    let inner = sphere(Point::origin(dim), m);
    let mut out = Vec::new();
    for x in inner.points() {
        for y in x.neighbors() {
            if y.sup_norm() == m as i64 + 1 {
                out.push(Bond::between(*x, y).expect("neighbours"));
            }
        }
    }
    out.sort_unstable();
    out
}
