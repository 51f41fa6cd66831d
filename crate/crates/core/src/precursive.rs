//! Multivariate P-recursive systems: evaluation from initial data, solution
//! checks and vanishing propagation.
//!
//! A system of size `k` carries, for each coordinate `j`, a recursion
//! `Σ_{a ∈ [0,k]^d} Q_{j,a}(n_j) f(n - a) = 0` valid for `n ∈ ℕ_{≥k}^d`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::exactnum::{fmt_rational, parse_rational, rat, Rat};
use crate::leinartas::UnitProductRational;
use crate::oracle::{expand_rational, Truncation, TruncatedSeries};
use crate::polyexp::{evaluate_at, PiecewisePolyExp};
use crate::skewgeom::SkewGeomSum;

/// Largest integer range scanned when certifying zero-freeness.
const ROOT_SCAN_LIMIT: i64 = 1_000_000;

/// Univariate polynomial, coefficients in ascending degree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UniPoly(Vec<Rat>);

impl UniPoly {
    pub fn new(mut coeffs: Vec<Rat>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        UniPoly(coeffs)
    }

    pub fn constant(c: Rat) -> Self {
        UniPoly::new(vec![c])
    }

    pub fn coeffs(&self) -> &[Rat] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn eval(&self, y: i64) -> Rat {
        let y = rat(y);
        self.0.iter().rev().fold(Rat::zero(), |acc, c| acc * &y + c)
    }

    /// Every real root has absolute value below this bound.
    fn cauchy_bound(&self) -> Rat {
        let lead = self.0.last().expect("nonzero polynomial").abs();
        let m = self.0[..self.0.len() - 1]
            .iter()
            .map(|c| c.abs() / &lead)
            .max()
            .unwrap_or_else(Rat::zero);
        m + Rat::one()
    }

    /// First integer `y ≥ c` with `Q(y) = 0`, if any.
    pub fn integer_root_from(&self, c: i64) -> Result<Option<i64>> {
        if self.is_zero() {
            return Ok(Some(c));
        }
        let bound = self.cauchy_bound().floor().to_integer();
        let bound = bound
            .to_i64()
            .filter(|b| b.saturating_sub(c) <= ROOT_SCAN_LIMIT)
            .ok_or_else(|| Error::capability(format!("root bound {bound} too large to scan")))?;
        Ok((c..=bound).find(|y| self.eval(*y).is_zero()))
    }
}

impl fmt::Display for UniPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => fmt_rational(c),
                1 => format!("{}*y", fmt_rational(c)),
                _ => format!("{}*y^{i}", fmt_rational(c)),
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Section {
    /// fixed coordinate, 0-based
    pub coord: usize,
    pub value: i64,
    pub system: PRecursiveSystem,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PRecursiveSystem {
    dim: usize,
    k: i64,
    recursions: Vec<Vec<(Vec<i64>, UniPoly)>>,
    sections: Vec<Section>,
    initial: BTreeMap<Vec<i64>, Rat>,
}

impl PRecursiveSystem {
    pub fn new(
        dim: usize,
        k: i64,
        recursions: Vec<Vec<(Vec<i64>, UniPoly)>>,
        sections: Vec<Section>,
        initial: BTreeMap<Vec<i64>, Rat>,
    ) -> Result<Self> {
        if dim == 0 || k < 0 {
            return Err(Error::input("system needs d ≥ 1 and k ≥ 0"));
        }
        if recursions.len() != dim {
            return Err(Error::input(format!("expected {dim} recursions, got {}", recursions.len())));
        }
        let mut recs = Vec::with_capacity(dim);
        for (j, rec) in recursions.into_iter().enumerate() {
            let mut merged: BTreeMap<Vec<i64>, Vec<Rat>> = BTreeMap::new();
            for (a, q) in rec {
                if a.len() != dim || a.iter().any(|v| *v < 0 || *v > k) {
                    return Err(Error::input(format!("shift {a:?} of recursion {} outside [0,{k}]^{dim}", j + 1)));
                }
                let slot = merged.entry(a).or_default();
                for (i, c) in q.0.into_iter().enumerate() {
                    if slot.len() <= i {
                        slot.resize(i + 1, Rat::zero());
                    }
                    slot[i] += c;
                }
            }
            let rec: Vec<(Vec<i64>, UniPoly)> = merged
                .into_iter()
                .map(|(a, q)| (a, UniPoly::new(q)))
                .filter(|(_, q)| !q.is_zero())
                .collect();
            if rec.is_empty() {
                return Err(Error::input(format!("recursion {} has no nonzero coefficient", j + 1)));
            }
            recs.push(rec);
        }
        for s in &sections {
            if dim == 1 {
                return Err(Error::input("a one-dimensional system has no sections"));
            }
            if s.coord >= dim || s.value < 0 || s.value >= k {
                return Err(Error::input(format!(
                    "section x{}={} outside the base region",
                    s.coord + 1,
                    s.value
                )));
            }
            if s.system.dim != dim - 1 {
                return Err(Error::input("section system must have dimension d-1"));
            }
        }
        if initial.keys().any(|n| n.len() != dim || n.iter().any(|v| *v < 0)) {
            return Err(Error::input("initial values must sit on points of ℕ^d"));
        }
        Ok(PRecursiveSystem {
            dim,
            k,
            recursions: recs,
            sections,
            initial,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> i64 {
        self.k
    }

    pub fn recursion(&self, j: usize) -> &[(Vec<i64>, UniPoly)] {
        &self.recursions[j]
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn initial(&self) -> &BTreeMap<Vec<i64>, Rat> {
        &self.initial
    }

    fn interior(&self, n: &[i64]) -> bool {
        n.iter().all(|v| *v >= self.k)
    }

    pub fn to_json(&self) -> Value {
        let mut recs = Map::new();
        for (j, rec) in self.recursions.iter().enumerate() {
            let list: Vec<Value> = rec
                .iter()
                .map(|(a, q)| json!({"a": a, "q": q.0.iter().map(fmt_rational).collect::<Vec<_>>()}))
                .collect();
            recs.insert((j + 1).to_string(), Value::Array(list));
        }
        json!({
            "d": self.dim,
            "k": self.k,
            "recursions": recs,
            "sections": self.sections.iter().map(|s| json!({
                "coord": s.coord + 1,
                "value": s.value,
                "system": s.system.to_json(),
            })).collect::<Vec<_>>(),
            "initial": self.initial.iter().map(|(n, c)| json!({"n": n, "c": fmt_rational(c)})).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::input(format!("system JSON: bad {what}"));
        let dim = v["d"].as_u64().ok_or_else(|| bad("d"))? as usize;
        let k = v["k"].as_i64().ok_or_else(|| bad("k"))?;
        let recs_v = v["recursions"].as_object().ok_or_else(|| bad("recursions"))?;
        let mut recursions = Vec::with_capacity(dim);
        for j in 1..=dim {
            let list = recs_v
                .get(&j.to_string())
                .and_then(Value::as_array)
                .ok_or_else(|| bad(&format!("recursion {j}")))?;
            let mut rec = Vec::new();
            for e in list {
                let a: Vec<i64> = serde_json::from_value(e["a"].clone()).map_err(|_| bad("shift"))?;
                let q = e["q"]
                    .as_array()
                    .ok_or_else(|| bad("coefficient list"))?
                    .iter()
                    .map(|c| c.as_str().ok_or_else(|| bad("coefficient")).and_then(parse_rational))
                    .collect::<Result<Vec<_>>>()?;
                rec.push((a, UniPoly::new(q)));
            }
            recursions.push(rec);
        }
        let mut sections = Vec::new();
        if let Some(list) = v.get("sections").and_then(Value::as_array) {
            for s in list {
                let coord = s["coord"].as_u64().filter(|c| *c >= 1).ok_or_else(|| bad("section coord"))? as usize;
                let value = s["value"].as_i64().ok_or_else(|| bad("section value"))?;
                let system = PRecursiveSystem::from_json(&s["system"])?;
                sections.push(Section {
                    coord: coord - 1,
                    value,
                    system,
                });
            }
        }
        let mut initial = BTreeMap::new();
        if let Some(list) = v.get("initial").and_then(Value::as_array) {
            for e in list {
                let n: Vec<i64> = serde_json::from_value(e["n"].clone()).map_err(|_| bad("initial point"))?;
                let c = parse_rational(e["c"].as_str().ok_or_else(|| bad("initial value"))?)?;
                initial.insert(n, c);
            }
        }
        PRecursiveSystem::new(dim, k, recursions, sections, initial)
    }
}

/// One evaluation session with its own memo table.
pub struct Evaluator<'a> {
    sys: &'a PRecursiveSystem,
    /// recursion used for stepping
    j: usize,
    memo: HashMap<Vec<i64>, Rat>,
    sub: HashMap<usize, Evaluator<'a>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(sys: &'a PRecursiveSystem, j: usize) -> Result<Self> {
        if j >= sys.dim {
            return Err(Error::input(format!("no recursion {}", j + 1)));
        }
        Ok(Evaluator {
            sys,
            j,
            memo: HashMap::new(),
            sub: HashMap::new(),
        })
    }

    /// Value outside the interior: the first section covering `n`, else the
    /// initial data.
    fn boundary(&mut self, n: &[i64]) -> Result<Rat> {
        for (idx, s) in self.sys.sections.iter().enumerate() {
            if n[s.coord] == s.value {
                let key = idx;
                if !self.sub.contains_key(&key) {
                    let j = self.j.min(s.system.dim - 1);
                    self.sub.insert(key, Evaluator::new(&s.system, j)?);
                }
                let mut rest = n.to_vec();
                rest.remove(s.coord);
                return self.sub.get_mut(&key).expect("inserted").value(&rest);
            }
        }
        self.sys
            .initial
            .get(n)
            .cloned()
            .ok_or_else(|| Error::input(format!("missing initial value at {n:?}")))
    }

    /// Shift with the lex-minimal nonzero coefficient, and the rest.
    fn split(&self) -> (&'a (Vec<i64>, UniPoly), &'a [(Vec<i64>, UniPoly)]) {
        let rec = &self.sys.recursions[self.j];
        (&rec[0], &rec[1..])
    }

    pub fn value(&mut self, n: &[i64]) -> Result<Rat> {
        if n.len() != self.sys.dim || n.iter().any(|v| *v < 0) {
            return Err(Error::input(format!("evaluation point {n:?} not in ℕ^{}", self.sys.dim)));
        }
        let mut stack = vec![n.to_vec()];
        while let Some(top) = stack.last().cloned() {
            if self.memo.contains_key(&top) {
                stack.pop();
                continue;
            }
            if !self.sys.interior(&top) {
                let v = self.boundary(&top)?;
                self.memo.insert(top, v);
                stack.pop();
                continue;
            }
            let ((b, lead), rest) = self.split();
            let big_n: Vec<i64> = top.iter().zip(b).map(|(x, y)| x + y).collect();
            let mut missing = false;
            for (a, _) in rest {
                let p: Vec<i64> = big_n.iter().zip(a).map(|(x, y)| x - y).collect();
                if !self.memo.contains_key(&p) {
                    stack.push(p);
                    missing = true;
                }
            }
            if missing {
                continue;
            }
            let l = lead.eval(big_n[self.j]);
            if l.is_zero() {
                return Err(Error::capability(format!(
                    "polynomial leading coefficient vanishes: Q_{},{:?} at n{} = {} while stepping to {top:?}",
                    self.j + 1,
                    b,
                    self.j + 1,
                    big_n[self.j]
                )));
            }
            let mut acc = Rat::zero();
            for (a, q) in rest {
                let p: Vec<i64> = big_n.iter().zip(a).map(|(x, y)| x - y).collect();
                acc += q.eval(big_n[self.j]) * &self.memo[&p];
            }
            self.memo.insert(top, -acc / l);
            stack.pop();
        }
        Ok(self.memo[n].clone())
    }
}

/// Value at `n` stepping along recursion 1.
pub fn evaluate(sys: &PRecursiveSystem, n: &[i64]) -> Result<Rat> {
    evaluate_with(sys, n, 0)
}

/// Value at `n` stepping along recursion `j` (0-based).
pub fn evaluate_with(sys: &PRecursiveSystem, n: &[i64], j: usize) -> Result<Rat> {
    Evaluator::new(sys, j)?.value(n)
}

/// Anything with a coefficient at every point of ℕ^d.
pub trait CoeffSource {
    fn coeff_at(&self, n: &[i64]) -> Rat;
}

impl CoeffSource for PiecewisePolyExp {
    fn coeff_at(&self, n: &[i64]) -> Rat {
        evaluate_at(self, n)
    }
}

impl CoeffSource for SkewGeomSum {
    fn coeff_at(&self, n: &[i64]) -> Rat {
        self.coefficient_at(n)
    }
}

/// Zero outside the truncation.
impl CoeffSource for TruncatedSeries {
    fn coeff_at(&self, n: &[i64]) -> Rat {
        self.coeff(n)
    }
}

/// Adapter for closures.
pub struct FnSource<F>(pub F);

impl<F: Fn(&[i64]) -> Rat> CoeffSource for FnSource<F> {
    fn coeff_at(&self, n: &[i64]) -> Rat {
        (self.0)(n)
    }
}

fn interior_points(sys: &PRecursiveSystem, bound: i64) -> Vec<Vec<i64>> {
    Truncation::total(bound)
        .points(sys.dim)
        .into_iter()
        .filter(|n| sys.interior(n))
        .collect()
}

fn residual(sys: &PRecursiveSystem, f: &dyn CoeffSource, j: usize, n: &[i64]) -> Rat {
    let mut acc = Rat::zero();
    for (a, q) in &sys.recursions[j] {
        let p: Vec<i64> = n.iter().zip(a).map(|(x, y)| x - y).collect();
        let v = f.coeff_at(&p);
        if !v.is_zero() {
            acc += q.eval(n[j]) * v;
        }
    }
    acc
}

/// First recursion instance `(j, n)` (0-based `j`) violated by `f` with
/// `|n| ≤ bound`.
pub fn check_solution(sys: &PRecursiveSystem, f: &dyn CoeffSource, bound: i64) -> Option<(usize, Vec<i64>)> {
    let pts = interior_points(sys, bound);
    (0..sys.dim).find_map(|j| {
        pts.iter()
            .find(|n| !residual(sys, f, j, n).is_zero())
            .map(|n| (j, n.clone()))
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum VanishingVerdict {
    /// `f` vanishes on `∏ ℕ_{≥l_i}`; cross-checked to `|n| ≤ checked_to`.
    Propagates { region: Vec<i64>, checked_to: i64 },
    /// some `Q_{j,a}` (0-based `j`) has an integer root `at ≥ c`
    CoefficientZero { j: usize, a: Vec<i64>, at: i64 },
    /// `f` breaks recursion `j` (0-based) at `n`
    NotASolution { j: usize, n: Vec<i64> },
    /// nonzero value on a hypothesis strip
    StripNonzero { witness: Vec<i64>, value: Rat },
    /// propagated region holds a nonzero value
    CrossCheckFailed { witness: Vec<i64>, value: Rat },
}

impl VanishingVerdict {
    pub fn to_json(&self) -> Value {
        match self {
            VanishingVerdict::Propagates { region, checked_to } => {
                json!({"verdict": "propagates", "region": region, "checked_to": checked_to})
            }
            VanishingVerdict::CoefficientZero { j, a, at } => {
                json!({"verdict": "coefficient_zero", "recursion": j + 1, "a": a, "at": at})
            }
            VanishingVerdict::NotASolution { j, n } => {
                json!({"verdict": "not_a_solution", "recursion": j + 1, "n": n})
            }
            VanishingVerdict::StripNonzero { witness, value } => {
                json!({"verdict": "strip_nonzero", "witness": witness, "value": fmt_rational(value)})
            }
            VanishingVerdict::CrossCheckFailed { witness, value } => {
                json!({"verdict": "cross_check_failed", "witness": witness, "value": fmt_rational(value)})
            }
        }
    }
}

/// Checks the hypotheses of the vanishing lemma for `f` up to `|n| ≤ bound`
/// and, when they hold, asserts vanishing on `∏ ℕ_{≥l_i}`.
pub fn vanishing_propagate(
    sys: &PRecursiveSystem,
    f: &dyn CoeffSource,
    c: i64,
    strips: &[i64],
    bound: i64,
) -> Result<VanishingVerdict> {
    let d = sys.dim;
    if strips.len() != d {
        return Err(Error::input(format!("expected {d} strip positions")));
    }
    if c < 0 || strips.iter().any(|l| *l < c) {
        return Err(Error::input("strip positions must satisfy l_i ≥ c ≥ 0"));
    }
    for (j, rec) in sys.recursions.iter().enumerate() {
        for (a, q) in rec {
            if let Some(at) = q.integer_root_from(c)? {
                return Ok(VanishingVerdict::CoefficientZero { j, a: a.clone(), at });
            }
        }
    }
    let k = sys.k;
    if let Some((j, n)) = check_solution(sys, f, bound + k) {
        return Ok(VanishingVerdict::NotASolution { j, n });
    }
    let pts = Truncation::total(bound + k).points(d);
    for n in pts.iter().filter(|n| n.iter().sum::<i64>() <= bound) {
        let on_strip = (0..d).any(|i| {
            (strips[i]..strips[i] + k).contains(&n[i]) && (0..d).all(|m| m == i || n[m] >= c)
        });
        if on_strip {
            let v = f.coeff_at(n);
            if !v.is_zero() {
                return Ok(VanishingVerdict::StripNonzero { witness: n.clone(), value: v });
            }
        }
    }
    for n in pts.iter().filter(|n| n.iter().zip(strips).all(|(x, l)| x >= l)) {
        let v = f.coeff_at(n);
        if !v.is_zero() {
            return Ok(VanishingVerdict::CrossCheckFailed { witness: n.clone(), value: v });
        }
    }
    Ok(VanishingVerdict::Propagates {
        region: strips.to_vec(),
        checked_to: bound + k,
    })
}

/// Shift recursions of `P/Q` read off `Q`: the same constant-coefficient
/// recursion for every coordinate, valid once `n` clears the numerator.
/// One-dimensional systems carry their initial values; higher-dimensional
/// ones carry none.
pub fn derive_system(r: &UnitProductRational) -> Result<PRecursiveSystem> {
    if r.numerator().has_negative_exponent() {
        return Err(Error::input("numerator has negative exponents"));
    }
    let d = r.dim();
    let q = r.denominator();
    let k = q.max_norm().max(r.numerator().max_norm() + 1);
    let rec: Vec<(Vec<i64>, UniPoly)> = q
        .terms()
        .iter()
        .map(|(a, c)| (a.clone(), UniPoly::constant(c.clone())))
        .collect();
    let mut initial = BTreeMap::new();
    if d == 1 && k > 0 {
        let s = expand_rational(r, &Truncation::total(k - 1));
        for n in 0..k {
            let v = s.coeff(&[n]);
            initial.insert(vec![n], v);
        }
    }
    PRecursiveSystem::new(d, k, vec![rec; d], Vec::new(), initial)
}
