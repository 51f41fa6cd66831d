//! Truncated multivariate power series over ℚ, used as brute-force ground
//! truth for every symbolic step.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exactnum::{fmt_rational, parse_rational, Rat};
use crate::leinartas::UnitProductRational;
use crate::poly::Poly;

/// Region kept by a truncation: total degree at most `total` and, when
/// given, coordinate `i` at most `per_axis[i]`. At least one bound is set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Truncation {
    pub total: Option<i64>,
    pub per_axis: Option<Vec<i64>>,
}

impl Truncation {
    pub fn total(bound: i64) -> Self {
        Truncation {
            total: Some(bound),
            per_axis: None,
        }
    }

    pub fn boxed(bounds: Vec<i64>) -> Self {
        Truncation {
            total: None,
            per_axis: Some(bounds),
        }
    }

    pub fn contains(&self, n: &[i64]) -> bool {
        if n.iter().any(|v| *v < 0) {
            return false;
        }
        if let Some(t) = self.total {
            if n.iter().sum::<i64>() > t {
                return false;
            }
        }
        if let Some(b) = &self.per_axis {
            if n.iter().zip(b).any(|(v, m)| v > m) {
                return false;
            }
        }
        true
    }

    /// Intersection of two truncation regions.
    pub fn meet(&self, other: &Truncation) -> Truncation {
        let total = match (self.total, other.total) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        let per_axis = match (&self.per_axis, &other.per_axis) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| *x.min(y)).collect()),
            (a, b) => a.clone().or_else(|| b.clone()),
        };
        Truncation { total, per_axis }
    }

    /// All points of the region in graded order (total degree, then lex).
    pub fn points(&self, dim: usize) -> Vec<Vec<i64>> {
        let axis_cap: Vec<i64> = (0..dim)
            .map(|i| {
                let a = self.per_axis.as_ref().map(|b| b[i]);
                match (a, self.total) {
                    (Some(a), Some(t)) => a.min(t),
                    (Some(a), None) => a,
                    (None, Some(t)) => t,
                    (None, None) => panic!("unbounded truncation"),
                }
            })
            .collect();
        let mut out = Vec::new();
        if dim == 0 {
            out.push(Vec::new());
            return out;
        }
        if axis_cap.iter().any(|c| *c < 0) {
            return out;
        }
        let mut n = vec![0i64; dim];
        loop {
            if self.contains(&n) {
                out.push(n.clone());
            }
            let mut i = dim;
            loop {
                if i == 0 {
                    out.sort_by(|a, b| (a.iter().sum::<i64>(), a).cmp(&(b.iter().sum::<i64>(), b)));
                    return out;
                }
                i -= 1;
                n[i] += 1;
                if n[i] <= axis_cap[i] && self.total.map_or(true, |t| n.iter().sum::<i64>() <= t) {
                    break;
                }
                n[i] = 0;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedSeries {
    dim: usize,
    trunc: Truncation,
    coeffs: BTreeMap<Vec<i64>, Rat>,
}

impl TruncatedSeries {
    pub fn zero(dim: usize, trunc: Truncation) -> Self {
        TruncatedSeries {
            dim,
            trunc,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn from_poly(p: &Poly, trunc: Truncation) -> Self {
        let mut s = TruncatedSeries::zero(p.nvars(), trunc);
        for (e, c) in p.terms() {
            s.add_at(e, c);
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn truncation(&self) -> &Truncation {
        &self.trunc
    }

    pub fn coeffs(&self) -> &BTreeMap<Vec<i64>, Rat> {
        &self.coeffs
    }

    pub fn coeff(&self, n: &[i64]) -> Rat {
        self.coeffs.get(n).cloned().unwrap_or_else(Rat::zero)
    }

    fn add_at(&mut self, n: &[i64], c: &Rat) {
        if c.is_zero() || !self.trunc.contains(n) {
            return;
        }
        let slot = self.coeffs.entry(n.to_vec()).or_insert_with(Rat::zero);
        *slot += c;
        if slot.is_zero() {
            self.coeffs.remove(n);
        }
    }

    pub fn add(&self, other: &TruncatedSeries) -> TruncatedSeries {
        assert_eq!(self.dim, other.dim);
        let mut out = TruncatedSeries::zero(self.dim, self.trunc.meet(&other.trunc));
        for (n, c) in self.coeffs.iter().chain(other.coeffs.iter()) {
            out.add_at(n, c);
        }
        out
    }

    pub fn scale(&self, k: &Rat) -> TruncatedSeries {
        let mut out = TruncatedSeries::zero(self.dim, self.trunc.clone());
        for (n, c) in &self.coeffs {
            out.add_at(n, &(c * k));
        }
        out
    }

    pub fn sub(&self, other: &TruncatedSeries) -> TruncatedSeries {
        self.add(&other.scale(&-Rat::one()))
    }

    /// Cauchy product, truncated to the common region.
    pub fn mul(&self, other: &TruncatedSeries) -> TruncatedSeries {
        assert_eq!(self.dim, other.dim);
        let mut out = TruncatedSeries::zero(self.dim, self.trunc.meet(&other.trunc));
        for (a, ca) in &self.coeffs {
            for (b, cb) in &other.coeffs {
                let n: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                if out.trunc.contains(&n) {
                    out.add_at(&n, &(ca * cb));
                }
            }
        }
        out
    }

    /// Points of the region whose coefficient is zero.
    pub fn zeros(&self) -> Vec<Vec<i64>> {
        let mut z: Vec<Vec<i64>> = self
            .trunc
            .points(self.dim)
            .into_iter()
            .filter(|n| !self.coeffs.contains_key(n))
            .collect();
        z.sort();
        z
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.coeffs
                .iter()
                .map(|(n, c)| json!({"n": n, "c": fmt_rational(c)}))
                .collect(),
        )
    }

    pub fn from_json(dim: usize, trunc: Truncation, v: &Value) -> Result<Self> {
        let arr = v.as_array().ok_or_else(|| Error::input("series JSON must be an array"))?;
        let mut s = TruncatedSeries::zero(dim, trunc);
        for item in arr {
            let n: Vec<i64> = serde_json::from_value(item["n"].clone())
                .map_err(|e| Error::input(format!("bad exponent in series JSON: {e}")))?;
            if n.len() != dim {
                return Err(Error::input(format!("exponent {n:?} does not have dimension {dim}")));
            }
            let c = parse_rational(item["c"].as_str().ok_or_else(|| Error::input("coefficient must be a string"))?)?;
            s.add_at(&n, &c);
        }
        Ok(s)
    }

    /// Aligned coefficient table; rows are the first coordinate. Only for
    /// dimension at most 2.
    pub fn table(&self) -> Option<String> {
        let points = self.trunc.points(self.dim);
        let mut out = String::new();
        match self.dim {
            1 => {
                for n in points {
                    let _ = writeln!(out, "{:>4}  {}", n[0], fmt_rational(&self.coeff(&n)));
                }
            }
            2 => {
                let rmax = points.iter().map(|n| n[0]).max().unwrap_or(0);
                let cmax = points.iter().map(|n| n[1]).max().unwrap_or(0);
                let cell = |n: &[i64]| {
                    if self.trunc.contains(n) {
                        fmt_rational(&self.coeff(n))
                    } else {
                        String::new()
                    }
                };
                let width = points.iter().map(|n| cell(n).len()).max().unwrap_or(1).max(3);
                let _ = write!(out, "{:>4} |", "m\\n");
                for j in 0..=cmax {
                    let _ = write!(out, " {j:>width$}");
                }
                out.push('\n');
                for i in 0..=rmax {
                    let _ = write!(out, "{i:>4} |");
                    for j in 0..=cmax {
                        let _ = write!(out, " {:>width$}", cell(&[i, j]));
                    }
                    out.push('\n');
                }
            }
            _ => return None,
        }
        Some(out)
    }
}

/// Exact power-series expansion of `r` at the origin within `trunc`.
pub fn expand_rational(r: &UnitProductRational, trunc: &Truncation) -> TruncatedSeries {
    let d = r.dim();
    let points = trunc.points(d);
    let mut vals: HashMap<Vec<i64>, Rat> = HashMap::new();
    for (e, c) in r.numerator().terms() {
        if trunc.contains(e) {
            vals.insert(e.clone(), c.clone());
        }
    }
    // dividing by (1 - c x^e) is the recurrence g(n) = f(n) + c g(n - e),
    // run in place along increasing total degree
    for block in r.blocks() {
        for _ in 0..block.mult {
            for n in &points {
                let prev: Vec<i64> = n.iter().zip(&block.e).map(|(a, b)| a - b).collect();
                if prev.iter().any(|v| *v < 0) {
                    continue;
                }
                let Some(gp) = vals.get(&prev) else { continue };
                let add = gp * &block.c;
                let slot = vals.entry(n.clone()).or_insert_with(Rat::zero);
                *slot += add;
            }
        }
    }
    let mut s = TruncatedSeries::zero(d, trunc.clone());
    for (n, c) in vals {
        s.add_at(&n, &c);
    }
    s
}

pub fn expand_sum(terms: &[UnitProductRational], dim: usize, trunc: &Truncation) -> TruncatedSeries {
    let mut s = TruncatedSeries::zero(dim, trunc.clone());
    for t in terms {
        s = s.add(&expand_rational(t, trunc));
    }
    s
}

pub fn hadamard_product(f1: &TruncatedSeries, f2: &TruncatedSeries) -> TruncatedSeries {
    assert_eq!(f1.dim, f2.dim);
    let mut out = TruncatedSeries::zero(f1.dim, f1.trunc.meet(&f2.trunc));
    for (n, c) in &f1.coeffs {
        if let Some(c2) = f2.coeffs.get(n) {
            out.add_at(n, &(c * c2));
        }
    }
    out
}

/// Coefficientwise `f(n)†`: reciprocal on the support, zero elsewhere.
pub fn hadamard_subinverse(f: &TruncatedSeries) -> TruncatedSeries {
    TruncatedSeries {
        dim: f.dim,
        trunc: f.trunc.clone(),
        coeffs: f.coeffs.iter().map(|(n, c)| (n.clone(), c.recip())).collect(),
    }
}

/// First mismatch `(n, c1, c2)` in lexicographic order within the common
/// region.
pub fn compare(f1: &TruncatedSeries, f2: &TruncatedSeries) -> Option<(Vec<i64>, Rat, Rat)> {
    assert_eq!(f1.dim, f2.dim);
    let common = f1.trunc.meet(&f2.trunc);
    let keys: std::collections::BTreeSet<&Vec<i64>> = f1.coeffs.keys().chain(f2.coeffs.keys()).collect();
    keys.into_iter()
        .filter(|n| common.contains(n))
        .map(|n| (n.clone(), f1.coeff(n), f2.coeff(n)))
        .find(|(_, a, b)| a != b)
}
