//! Conductance fields on a box, the supported environment laws, shifts and
//! the plain-text field format.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::calculus::{lp_norm_with, BondField, Conductances};
use crate::error::{config, domain, Error, Result};
use crate::lattice::{Bond, BondSet, LatticeBox, Point};
use crate::rng::{hash_words, mix64, unit_open};

/// Strictly positive conductances on every bond of an ambient box.
///
/// Values are stored per (vertex, axis) slot; slots whose upper endpoint
/// leaves the box are unused.
#[derive(Clone, Debug, PartialEq)]
pub struct ConductanceField {
    ambient: LatticeBox,
    values: Vec<f64>,
}

impl ConductanceField {
    pub fn from_fn(ambient: LatticeBox, f: impl Fn(&Bond) -> f64) -> Result<ConductanceField> {
        let d = ambient.dim();
        let mut values = vec![0.0; ambient.len() * d];
        for b in ambient.bonds() {
            let v = f(&b);
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("conductance {v} on {b:?} is not positive")));
            }
            values[ambient.index_of(&b.lower()).unwrap() * d + b.axis()] = v;
        }
        Ok(ConductanceField { ambient, values })
    }

    pub fn constant(ambient: LatticeBox, c: f64) -> Result<ConductanceField> {
        ConductanceField::from_fn(ambient, |_| c)
    }

    pub fn ambient(&self) -> &LatticeBox {
        &self.ambient
    }

    pub fn dim(&self) -> usize {
        self.ambient.dim()
    }

    pub fn get(&self, b: &Bond) -> Option<f64> {
        if !self.ambient.contains(&b.upper()) {
            return None;
        }
        let i = self.ambient.index_of(&b.lower())?;
        Some(self.values[i * self.dim() + b.axis()])
    }

    pub fn between(&self, x: Point, y: Point) -> Option<f64> {
        self.get(&Bond::between(x, y).ok()?)
    }

    /// Conductance of the bond from vertex `index` to `index + e_axis`.
    /// Meaningless when that bond leaves the box.
    #[inline]
    pub(crate) fn slot(&self, index: usize, axis: usize) -> f64 {
        self.values[index * self.dim() + axis]
    }

    /// `mu(x) = sum_y w(x, y)`, defined when x is interior to the box.
    pub fn total_conductance(&self, x: &Point) -> Option<f64> {
        if !self.ambient.is_interior(x) {
            return None;
        }
        Some(x.neighbors().map(|y| self.between(*x, y).unwrap()).sum())
    }

    pub fn bonds(&self) -> impl Iterator<Item = (Bond, f64)> + '_ {
        self.ambient.bonds().map(move |b| (b, self.get(&b).unwrap()))
    }

    pub fn to_bond_field(&self) -> BondField {
        let set = std::sync::Arc::new(BondSet::new(self.ambient.bonds()));
        BondField::from_fn(set, |b| self.get(b).unwrap())
    }

    pub fn restrict(&self, sub: &LatticeBox) -> Result<ConductanceField> {
        if !self.ambient.contains_box(sub) {
            return Err(domain("sub-box is not contained in the ambient box"));
        }
        ConductanceField::from_fn(*sub, |b| self.get(b).unwrap())
    }

    /// `|| w^s ||_{L^p(ball)}` over the bonds of `ball`, normalized by their
    /// number when `normalized`. `s = 1` gives `||w||`, `s = -1` gives `||1/w||`.
    pub fn power_norm(&self, ball: &LatticeBox, power: f64, p: f64, normalized: bool) -> Result<f64> {
        if !self.ambient.contains_box(ball) {
            return Err(domain("ball leaves the ambient box"));
        }
        let bonds: Vec<Bond> = ball.bonds().collect();
        lp_norm_with(bonds.len(), p, normalized, &|i| {
            let w = self.get(&bonds[i]).unwrap();
            if power == 1.0 {
                w
            } else if power == -1.0 {
                1.0 / w
            } else {
                w.powf(power)
            }
        })
    }

    /// Normalized `||w||_{L^p(ball)}`.
    pub fn norm(&self, ball: &LatticeBox, p: f64) -> Result<f64> {
        self.power_norm(ball, 1.0, p, true)
    }

    /// Normalized `||1/w||_{L^q(ball)}`.
    pub fn inverse_norm(&self, ball: &LatticeBox, q: f64) -> Result<f64> {
        self.power_norm(ball, -1.0, q, true)
    }

    pub fn max_value(&self) -> f64 {
        self.bonds().map(|(_, v)| v).fold(0.0, f64::max)
    }
}

impl Conductances for ConductanceField {
    fn conductance(&self, bond: &Bond) -> Option<f64> {
        self.get(bond)
    }
}

/// Supported conductance distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnvironmentLaw {
    Constant { value: f64 },
    /// With probability 1/2 a Pareto value `U^(-1/a)`, otherwise `U^(1/b)`.
    ParetoMixture { a: f64, b: f64 },
    /// Unit conductances except `scale^(-d/qprime)` on the bonds at the origin.
    Trap { scale: u32, qprime: f64 },
    File { path: PathBuf },
}

impl EnvironmentLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EnvironmentLaw::Constant { value } if !(value > 0.0 && value.is_finite()) => {
                Err(config(format!("constant conductance must be positive, got {value}")))
            }
            EnvironmentLaw::ParetoMixture { a, .. } if !(a > 1.0 && a.is_finite()) => {
                Err(config(format!("pareto tail index a must exceed 1, got {a}")))
            }
            EnvironmentLaw::ParetoMixture { b, .. } if !(b > 0.0 && b.is_finite()) => {
                Err(config(format!("pareto index b must be positive, got {b}")))
            }
            EnvironmentLaw::Trap { scale, qprime } if scale == 0 || !(qprime > 0.0) => {
                Err(config("trap needs scale >= 1 and qprime > 0"))
            }
            _ => Ok(()),
        }
    }

    /// Whether the generated field ignores the seed.
    pub fn is_deterministic(&self) -> bool {
        !matches!(self, EnvironmentLaw::ParetoMixture { .. })
    }

    /// The field of this law on `ambient`. Values are functions of the seed
    /// and the bond alone, so overlapping boxes agree.
    pub fn generate(&self, seed: u64, ambient: LatticeBox) -> Result<ConductanceField> {
        self.validate()?;
        match self {
            EnvironmentLaw::Constant { value } => ConductanceField::constant(ambient, *value),
            EnvironmentLaw::ParetoMixture { a, b } => {
                ConductanceField::from_fn(ambient, |bond| pareto_mixture_value(seed, bond, *a, *b))
            }
            EnvironmentLaw::Trap { scale, qprime } => trap_environment(*scale, *qprime, ambient),
            EnvironmentLaw::File { path } => {
                let file = std::fs::File::open(path)?;
                load(std::io::BufReader::new(file))?.restrict(&ambient)
            }
        }
    }
}

impl std::fmt::Display for EnvironmentLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnvironmentLaw::Constant { value } => write!(f, "constant({value})"),
            EnvironmentLaw::ParetoMixture { a, b } => write!(f, "pareto_mixture({a},{b})"),
            EnvironmentLaw::Trap { scale, qprime } => write!(f, "trap({scale},{qprime})"),
            EnvironmentLaw::File { path } => write!(f, "file({})", path.display()),
        }
    }
}

/// Parses `constant(c)`, `pareto_mixture(a,b)`, `trap(n,qprime)` or `file(path)`.
impl std::str::FromStr for EnvironmentLaw {
    type Err = Error;

    fn from_str(text: &str) -> Result<EnvironmentLaw> {
        let text = text.trim();
        let bad = || config(format!("cannot parse environment law `{text}`"));
        let (name, rest) = text.split_once('(').ok_or_else(bad)?;
        let args = rest.strip_suffix(')').ok_or_else(bad)?;
        let nums = || -> Result<Vec<f64>> {
            args.split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|_| bad()))
                .collect()
        };
        let law = match name.trim() {
            "constant" => match nums()?[..] {
                [value] => EnvironmentLaw::Constant { value },
                _ => return Err(bad()),
            },
            "pareto_mixture" => match nums()?[..] {
                [a, b] => EnvironmentLaw::ParetoMixture { a, b },
                _ => return Err(bad()),
            },
            "trap" => match nums()?[..] {
                [n, qprime] if n >= 1.0 && n.fract() == 0.0 && n <= u32::MAX as f64 => EnvironmentLaw::Trap {
                    scale: n as u32,
                    qprime,
                },
                _ => return Err(bad()),
            },
            "file" if !args.trim().is_empty() => EnvironmentLaw::File {
                path: PathBuf::from(args.trim()),
            },
            _ => return Err(bad()),
        };
        law.validate()?;
        Ok(law)
    }
}

impl EnvironmentLaw {
    /// Expected conductance of a bond away from any trap; `None` for stored fields.
    pub fn mean_conductance(&self) -> Option<f64> {
        match *self {
            EnvironmentLaw::Constant { value } => Some(value),
            EnvironmentLaw::ParetoMixture { a, b } => Some(0.5 * a / (a - 1.0) + 0.5 * b / (b + 1.0)),
            EnvironmentLaw::Trap { .. } => Some(1.0),
            EnvironmentLaw::File { .. } => None,
        }
    }
}

/// The pareto-mixture conductance of one bond under `seed`.
pub fn pareto_mixture_value(seed: u64, bond: &Bond, a: f64, b: f64) -> f64 {
    let mut words = [0u64; 5];
    for (w, &c) in words.iter_mut().zip(bond.lower().coords()) {
        *w = c as u64;
    }
    words[4] = bond.axis() as u64;
    let h = hash_words(seed, &words);
    let u = unit_open(h);
    if mix64(h) & 1 == 0 {
        u.powf(-1.0 / a)
    } else {
        u.powf(1.0 / b)
    }
}

/// Unit conductances, except `n^(-d/qprime)` on the 2d bonds at the origin.
pub fn trap_environment(n: u32, qprime: f64, ambient: LatticeBox) -> Result<ConductanceField> {
    let d = ambient.dim();
    let origin = Point::origin(d);
    if !ambient.is_interior(&origin) {
        return Err(config("the origin must be interior to the ambient box"));
    }
    if n == 0 || !(qprime > 0.0) {
        return Err(config("trap needs n >= 1 and qprime > 0"));
    }
    let low = (n as f64).powf(-(d as f64) / qprime);
    ConductanceField::from_fn(ambient, |b| if b.contains(&origin) { low } else { 1.0 })
}

/// The translated field `e -> w(e + x)`, on the box moved by `-x`.
pub fn shift(w: &ConductanceField, x: Point) -> ConductanceField {
    let b = w.ambient();
    let target = LatticeBox::new(b.center() - x, b.radius());
    shift_into(w, x, target).expect("the shifted box maps onto the original")
}

/// `e -> w(e + x)` on `target`; every shifted bond must lie in the ambient box.
pub fn shift_into(w: &ConductanceField, x: Point, target: LatticeBox) -> Result<ConductanceField> {
    let moved = LatticeBox::new(target.center() + x, target.radius());
    if !w.ambient().contains_box(&moved) {
        return Err(domain("shift moves bonds outside the ambient box"));
    }
    ConductanceField::from_fn(target, |b| w.get(&b.translate(x)).unwrap())
}

const MAGIC: &str = "rcm-env";
const VERSION: &str = "v1";

/// Writes the header line and one `x1 .. xd axis value` line per bond in
/// canonical order. Axes are numbered from 1.
pub fn save(w: &ConductanceField, mut out: impl Write) -> Result<()> {
    let b = w.ambient();
    let center: Vec<String> = b.center().coords().iter().map(|c| c.to_string()).collect();
    writeln!(
        out,
        "{MAGIC} {VERSION} d={} center={} n={}",
        b.dim(),
        center.join(","),
        b.radius()
    )?;
    for (bond, v) in w.bonds() {
        for c in bond.lower().coords() {
            write!(out, "{c} ")?;
        }
        writeln!(out, "{} {:.16e}", bond.axis() + 1, v)?;
    }
    Ok(())
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

fn parse_header(line: &str) -> Result<LatticeBox> {
    let err = |m: &str| format_err(1, m);
    let mut parts = line.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(err("not an environment file (bad magic)"));
    }
    match parts.next() {
        Some(VERSION) => {}
        Some(v) => return Err(err(&format!("unsupported version {v}"))),
        None => return Err(err("missing version")),
    }
    let mut d = None;
    let mut center = None;
    let mut n = None;
    for part in parts {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| err(&format!("malformed header field {part}")))?;
        match key {
            "d" => d = val.parse::<usize>().ok(),
            "center" => {
                center = val
                    .split(',')
                    .map(|c| c.parse::<i64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .ok()
            }
            "n" => n = val.parse::<u32>().ok(),
            _ => return Err(err(&format!("unknown header field {key}"))),
        }
    }
    let d = d.filter(|d| (1..=4).contains(d)).ok_or_else(|| err("bad or missing d"))?;
    let center = center
        .filter(|c| c.len() == d)
        .ok_or_else(|| err("bad or missing center"))?;
    let n = n.ok_or_else(|| err("bad or missing n"))?;
    Ok(LatticeBox::new(Point::new(&center), n))
}

pub fn load(input: impl BufRead) -> Result<ConductanceField> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| format_err(1, "empty file"))??;
    let ambient = parse_header(&header)?;
    let d = ambient.dim();
    let mut values = vec![0.0; ambient.len() * d];
    let mut expected = ambient.bonds();
    let mut line_no = 1;
    for line in lines {
        let line = line?;
        line_no += 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bond = expected
            .next()
            .ok_or_else(|| format_err(line_no, "more bonds than the box holds"))?;
        if fields.len() != d + 2 {
            return Err(format_err(line_no, format!("expected {} fields", d + 2)));
        }
        let coords = fields[..d]
            .iter()
            .map(|s| s.parse::<i64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| format_err(line_no, "bad coordinate"))?;
        let axis: usize = fields[d]
            .parse()
            .map_err(|_| format_err(line_no, "bad axis"))?;
        if Point::new(&coords) != bond.lower() || axis != bond.axis() + 1 {
            return Err(format_err(
                line_no,
                format!("expected bond {:?} axis {}", bond.lower(), bond.axis() + 1),
            ));
        }
        let v: f64 = fields[d + 1]
            .parse()
            .map_err(|_| format_err(line_no, "bad value"))?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(format_err(line_no, format!("non-positive conductance {v}")));
        }
        values[ambient.index_of(&bond.lower()).unwrap() * d + bond.axis()] = v;
    }
    if expected.next().is_some() {
        return Err(format_err(line_no + 1, "file truncated: missing bonds"));
    }
    Ok(ConductanceField { ambient, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(c: &[i64]) -> Point {
        Point::new(c)
    }

    #[test]
    fn law_text_round_trips() {
        for text in ["constant(1.5)", "pareto_mixture(8,8)", "trap(10,0.8)", "file(env.txt)"] {
            let law: EnvironmentLaw = text.parse().unwrap();
            assert_eq!(law.to_string(), text);
        }
        for bad in ["pareto_mixture(8)", "trap(2.5,1)", "constant(-1)", "gauss(1)", "constant 1"] {
            assert!(bad.parse::<EnvironmentLaw>().is_err(), "{bad}");
        }
        let m = EnvironmentLaw::ParetoMixture { a: 8.0, b: 8.0 }.mean_conductance().unwrap();
        assert!((m - (4.0 / 7.0 + 4.0 / 9.0)).abs() < 1e-15);
    }

    #[test]
    fn trap_examples() {
        let w = trap_environment(4, 1.0, LatticeBox::centered(2, 3)).unwrap();
        assert_eq!(w.between(p(&[0, 0]), p(&[1, 0])), Some(0.0625));
        assert_eq!(w.between(p(&[1, 0]), p(&[2, 0])), Some(1.0));
        let w3 = trap_environment(2, 1.0, LatticeBox::centered(3, 1)).unwrap();
        assert_eq!(w3.between(p(&[0, 0, 0]), p(&[0, 0, -1])), Some(0.125));
        assert!(trap_environment(2, 1.0, LatticeBox::centered(2, 0)).is_err());
    }

    #[test]
    fn shifted_trap_moves_the_low_bonds() {
        let w = trap_environment(4, 1.0, LatticeBox::centered(2, 3)).unwrap();
        let s = shift(&w, p(&[1, 0]));
        assert_eq!(s.between(p(&[-1, 0]), p(&[-1, 1])), Some(0.0625));
        assert_eq!(s.between(p(&[0, 0]), p(&[1, 0])), Some(1.0));
        assert!(shift_into(&w, p(&[1, 0]), LatticeBox::centered(2, 3)).is_err());
        assert!(shift_into(&w, p(&[1, 0]), LatticeBox::centered(2, 2)).is_ok());
    }

    #[test]
    fn laws_are_validated() {
        let b = LatticeBox::centered(2, 1);
        assert!(EnvironmentLaw::Constant { value: 0.0 }.generate(0, b).is_err());
        assert!(EnvironmentLaw::ParetoMixture { a: 1.0, b: 1.0 }.generate(0, b).is_err());
        assert!(EnvironmentLaw::ParetoMixture { a: 2.0, b: 0.0 }.generate(0, b).is_err());
    }

    #[test]
    fn overlapping_boxes_agree() {
        let law = EnvironmentLaw::ParetoMixture { a: 8.0, b: 8.0 };
        let big = law.generate(5, LatticeBox::centered(2, 6)).unwrap();
        let small = law.generate(5, LatticeBox::new(p(&[2, -1]), 2)).unwrap();
        for (b, v) in small.bonds() {
            assert_eq!(big.get(&b), Some(v));
        }
    }

    #[test]
    fn roundtrip_is_exact() {
        let law = EnvironmentLaw::ParetoMixture { a: 3.0, b: 2.0 };
        let w = law.generate(11, LatticeBox::new(p(&[1, -2, 0]), 2)).unwrap();
        let mut buf = Vec::new();
        save(&w, &mut buf).unwrap();
        let back = load(buf.as_slice()).unwrap();
        assert_eq!(back, w);
    }

    #[test]
    fn load_errors_name_the_line() {
        let w = ConductanceField::constant(LatticeBox::centered(1, 1), 1.0).unwrap();
        let mut buf = Vec::new();
        save(&w, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();

        let bad_version = text.replacen("v1", "v2", 1);
        assert!(matches!(load(bad_version.as_bytes()), Err(Error::Format { line: 1, .. })));

        let negative = text.replacen("1.0000000000000000e0", "-1.0", 1);
        assert!(matches!(load(negative.as_bytes()), Err(Error::Format { line: 2, .. })));

        let truncated: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(matches!(load(truncated.as_bytes()), Err(Error::Format { line: 3, .. })));
    }
}
