//! Simple linear and semilinear subsets of ℕ^d.
//!
//! A simple linear set is `offset + ℕ p_1 + … + ℕ p_s` with ℤ-independent
//! periods. Periods are kept in descending lexicographic order, which makes
//! structural equality coincide with set equality.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exactnum::{factor_rational, Rat};
use crate::intlat::{self, IntMatrix};

/// Upper bound on the number of pieces produced while enumerating finite
/// coordinate ranges in [`disjoint_union_of_linear`].
const PIECE_LIMIT: usize = 100_000;

#[derive(Clone, Serialize, Deserialize)]
#[serde(try_from = "SimpleLinearSetRepr", into = "SimpleLinearSetRepr")]
pub struct SimpleLinearSet {
    offset: Vec<i64>,
    periods: Vec<Vec<i64>>,
    left_inverse: Vec<Vec<Rat>>,
}

#[derive(Serialize, Deserialize)]
struct SimpleLinearSetRepr {
    offset: Vec<i64>,
    periods: Vec<Vec<i64>>,
}

impl TryFrom<SimpleLinearSetRepr> for SimpleLinearSet {
    type Error = Error;
    fn try_from(r: SimpleLinearSetRepr) -> Result<Self> {
        SimpleLinearSet::new(r.offset, r.periods)
    }
}

impl From<SimpleLinearSet> for SimpleLinearSetRepr {
    fn from(s: SimpleLinearSet) -> Self {
        SimpleLinearSetRepr {
            offset: s.offset,
            periods: s.periods,
        }
    }
}

impl SimpleLinearSet {
    pub fn new(offset: Vec<i64>, mut periods: Vec<Vec<i64>>) -> Result<Self> {
        let d = offset.len();
        if d == 0 {
            return Err(Error::input("simple linear set needs dimension at least 1"));
        }
        if offset.iter().any(|v| *v < 0) {
            return Err(Error::input(format!("offset {offset:?} has a negative entry")));
        }
        for p in &periods {
            if p.len() != d {
                return Err(Error::input(format!("period {p:?} does not have dimension {d}")));
            }
            if p.iter().any(|v| *v < 0) {
                return Err(Error::input(format!("period {p:?} has a negative entry")));
            }
        }
        periods.sort_by(|a, b| b.cmp(a));
        let left_inverse = intlat::rational_left_inverse(&periods, d)
            .ok_or_else(|| Error::input(format!("periods {periods:?} are linearly dependent")))?;
        Ok(SimpleLinearSet {
            offset,
            periods,
            left_inverse,
        })
    }

    /// The singleton `{point}`.
    pub fn point(point: Vec<i64>) -> Result<Self> {
        SimpleLinearSet::new(point, Vec::new())
    }

    /// All of ℕ^d with the unit periods.
    pub fn orthant(d: usize) -> Self {
        let periods = (0..d)
            .map(|i| {
                let mut e = vec![0; d];
                e[i] = 1;
                e
            })
            .collect();
        SimpleLinearSet::new(vec![0; d], periods).expect("unit vectors are independent")
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn rank(&self) -> usize {
        self.periods.len()
    }

    pub fn offset(&self) -> &[i64] {
        &self.offset
    }

    pub fn periods(&self) -> &[Vec<i64>] {
        &self.periods
    }

    /// Point with local coordinates `m`.
    pub fn point_at(&self, m: &[i64]) -> Vec<i64> {
        assert_eq!(m.len(), self.rank());
        let mut n = self.offset.clone();
        for (k, p) in m.iter().zip(&self.periods) {
            for (a, b) in n.iter_mut().zip(p) {
                *a += k * b;
            }
        }
        n
    }

    /// Unique rational coordinates of `v` in the period basis, if `v` is in
    /// the rational span.
    fn span_coords(&self, v: &[i64]) -> Option<Vec<Rat>> {
        let coords: Vec<Rat> = self
            .left_inverse
            .iter()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * Rat::from_integer((*b).into())).sum())
            .collect();
        for (r, target) in v.iter().enumerate() {
            let got: Rat = coords
                .iter()
                .zip(&self.periods)
                .map(|(c, p)| c * Rat::from_integer(p[r].into()))
                .sum();
            if got != Rat::from_integer((*target).into()) {
                return None;
            }
        }
        Some(coords)
    }

    fn integer_coords(&self, v: &[i64], nonneg: bool) -> Option<Vec<i64>> {
        let coords = self.span_coords(v)?;
        coords
            .iter()
            .map(|c| {
                if !c.is_integer() || (nonneg && c < &Rat::zero()) {
                    None
                } else {
                    c.to_integer().to_i64()
                }
            })
            .collect()
    }

    pub fn member_coords(&self, n: &[i64]) -> Option<Vec<i64>> {
        assert_eq!(n.len(), self.dim(), "dimension mismatch");
        let diff: Vec<i64> = n.iter().zip(&self.offset).map(|(a, b)| a - b).collect();
        self.integer_coords(&diff, true)
    }

    pub fn contains(&self, n: &[i64]) -> bool {
        self.member_coords(n).is_some()
    }

    /// Translate by `v` (all resulting entries must stay nonnegative).
    pub fn translate(&self, v: &[i64]) -> Result<Self> {
        let off = self.offset.iter().zip(v).map(|(a, b)| a + b).collect();
        SimpleLinearSet::new(off, self.periods.clone())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut vectors = Vec::new();
        for part in text.split(';') {
            let part = part.trim();
            let entries: Vec<i64> = part
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse::<i64>()
                        .map_err(|_| Error::input(format!("bad integer {t:?} in set literal {text:?}")))
                })
                .collect::<Result<_>>()?;
            vectors.push(entries);
        }
        let offset = vectors.remove(0);
        SimpleLinearSet::new(offset, vectors)
    }

    /// Literal form accepted by [`SimpleLinearSet::parse`].
    pub fn literal(&self) -> String {
        let join = |v: &[i64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let mut parts = vec![join(&self.offset)];
        parts.extend(self.periods.iter().map(|p| join(p)));
        parts.join(" ; ")
    }
}

impl PartialEq for SimpleLinearSet {
    fn eq(&self, other: &Self) -> bool {
        self.offset == other.offset && self.periods == other.periods
    }
}

impl Eq for SimpleLinearSet {}

impl Hash for SimpleLinearSet {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.offset.hash(state);
        self.periods.hash(state);
    }
}

impl PartialOrd for SimpleLinearSet {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for SimpleLinearSet {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.offset, &self.periods).cmp(&(&other.offset, &other.periods))
    }
}

fn fmt_vec(v: &[i64]) -> String {
    format!("({})", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
}

impl fmt::Display for SimpleLinearSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let nonzero_offset = self.offset.iter().any(|v| *v != 0);
        if self.periods.is_empty() {
            return write!(f, "{{{}}}", fmt_vec(&self.offset));
        }
        if nonzero_offset {
            write!(f, "{}", fmt_vec(&self.offset))?;
        }
        for (i, p) in self.periods.iter().enumerate() {
            if i > 0 || nonzero_offset {
                f.write_str("+")?;
            }
            write!(f, "{}N", fmt_vec(p))?;
        }
        Ok(())
    }
}

impl fmt::Debug for SimpleLinearSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SimpleLinearSet[{self}]")
    }
}

/// Finite union of simple linear sets, optionally known to be disjoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemilinearSet {
    dim: usize,
    pub components: Vec<SimpleLinearSet>,
    pub disjoint: bool,
}

impl SemilinearSet {
    pub fn empty(dim: usize) -> Self {
        SemilinearSet {
            dim,
            components: Vec::new(),
            disjoint: true,
        }
    }

    pub fn single(s: SimpleLinearSet) -> Self {
        SemilinearSet {
            dim: s.dim(),
            components: vec![s],
            disjoint: true,
        }
    }

    pub fn new(dim: usize, components: Vec<SimpleLinearSet>, disjoint: bool) -> Self {
        assert!(components.iter().all(|c| c.dim() == dim));
        SemilinearSet {
            dim,
            components,
            disjoint,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn contains(&self, n: &[i64]) -> bool {
        self.components.iter().any(|c| c.contains(n))
    }
}

impl fmt::Display for SemilinearSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return f.write_str("{}");
        }
        let parts: Vec<String> = self.components.iter().map(|c| c.to_string()).collect();
        f.write_str(&parts.join(" ∪ "))
    }
}

/// Containment certificate: `sub.offset = sup.point_at(mu)` and
/// `sub.periods[i] = Σ_j t[i][j] sup.periods[j]` with `t ≥ 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Containment {
    pub mu: Vec<i64>,
    pub t: Vec<Vec<i64>>,
}

pub fn member_coords(n: &[i64], s: &SimpleLinearSet) -> Option<Vec<i64>> {
    s.member_coords(n)
}

/// Exact: the certificate exists iff `sub ⊆ sup`.
pub fn contains_simple(sub: &SimpleLinearSet, sup: &SimpleLinearSet) -> Option<Containment> {
    assert_eq!(sub.dim(), sup.dim(), "dimension mismatch");
    let mu = sup.member_coords(&sub.offset)?;
    let t = sub
        .periods
        .iter()
        .map(|p| sup.integer_coords(p, true))
        .collect::<Option<Vec<_>>>()?;
    Some(Containment { mu, t })
}

fn to_big(v: &[i64]) -> Vec<BigInt> {
    v.iter().map(|x| BigInt::from(*x)).collect()
}

/// Solves `o1 + B1 m = o2 + B2 m'` over ℕ and returns the solution set as
/// `(offsets, generators)` in `m`-coordinates.
fn stacked_solutions(s1: &SimpleLinearSet, s2: &SimpleLinearSet) -> Result<intlat::DiophantineSolution> {
    let d = s1.dim();
    let (r1, r2) = (s1.rank(), s2.rank());
    let mut a = IntMatrix::zeros(d, r1 + r2);
    for i in 0..d {
        for (j, p) in s1.periods.iter().enumerate() {
            a.set(i, j, p[i].into());
        }
        for (j, p) in s2.periods.iter().enumerate() {
            a.set(i, r1 + j, (-p[i]).into());
        }
    }
    let b: Vec<i64> = (0..d).map(|i| s2.offset[i] - s1.offset[i]).collect();
    intlat::solve_nonneg(&a, &to_big(&b))
}

/// Exact intersection as a disjoint union of simple linear sets.
pub fn intersect_simple(s1: &SimpleLinearSet, s2: &SimpleLinearSet) -> Result<SemilinearSet> {
    assert_eq!(s1.dim(), s2.dim(), "dimension mismatch");
    let d = s1.dim();
    let sol = stacked_solutions(s1, s2)?;
    if sol.minimal_inhomogeneous.is_empty() {
        return Ok(SemilinearSet::empty(d));
    }
    let r1 = s1.rank();
    // n = o1 + B1 m is injective in m, so n-space generators keep the
    // solution monoid structure.
    let offsets: Vec<Vec<i64>> = sol.minimal_inhomogeneous.iter().map(|x| s1.point_at(&x[..r1])).collect();
    let zero = vec![0; r1];
    let gens: Vec<Vec<i64>> = sol
        .hilbert_basis
        .iter()
        .map(|x| {
            let base = s1.point_at(&zero);
            s1.point_at(&x[..r1]).iter().zip(&base).map(|(a, b)| a - b).collect()
        })
        .collect();
    let pieces = disjoint_union_of_linear(&offsets, &gens)?;
    Ok(SemilinearSet::new(d, pieces, true))
}

pub fn are_disjoint(s1: &SimpleLinearSet, s2: &SimpleLinearSet) -> Result<bool> {
    Ok(stacked_solutions(s1, s2)?.minimal_inhomogeneous.is_empty())
}

/// Coordinate box in ℕ^q; `hi[j] == None` means unbounded.
#[derive(Clone, Debug)]
struct CoordBox {
    lo: Vec<i64>,
    hi: Vec<Option<i64>>,
}

impl CoordBox {
    /// `self` minus the orthant `{c ≥ a}`, as disjoint boxes.
    fn minus_orthant(&self, a: &[i64]) -> Vec<CoordBox> {
        let misses = self.hi.iter().zip(a).any(|(h, av)| matches!(h, Some(h) if h < av));
        if misses {
            return vec![self.clone()];
        }
        let mut out = Vec::new();
        let mut cur = self.clone();
        for j in 0..a.len() {
            if cur.lo[j] < a[j] {
                let mut piece = cur.clone();
                piece.hi[j] = Some(a[j] - 1);
                out.push(piece);
                cur.lo[j] = a[j];
            }
        }
        out
    }
}

fn minimal_elements(mut v: Vec<Vec<i64>>) -> Vec<Vec<i64>> {
    v.sort();
    v.dedup();
    let le = |a: &[i64], b: &[i64]| a.iter().zip(b).all(|(x, y)| x <= y);
    v.iter()
        .filter(|x| !v.iter().any(|y| y != *x && le(y, x)))
        .cloned()
        .collect()
}

fn gens_matrix(gens: &[Vec<i64>], d: usize, negated_copy: bool) -> IntMatrix {
    let q = gens.len();
    let width = if negated_copy { 2 * q } else { q };
    let mut a = IntMatrix::zeros(d, width);
    for (j, g) in gens.iter().enumerate() {
        for i in 0..d {
            a.set(i, j, g[i].into());
            if negated_copy {
                a.set(i, q + j, (-g[i]).into());
            }
        }
    }
    a
}

/// Rewrites `⋃_i (o_i + ℕ G)` as a finite disjoint union of simple linear sets.
///
/// Each point gets the representative `(i, c)` with `i` minimal and then `c`
/// lexicographically minimal. Non-minimal coefficient vectors form an
/// upward-closed set read off Hilbert bases; its complement is cut into boxes
/// whose unbounded directions carry independent generators.
pub fn disjoint_union_of_linear(offsets: &[Vec<i64>], gens: &[Vec<i64>]) -> Result<Vec<SimpleLinearSet>> {
    let Some(first) = offsets.first() else {
        return Ok(Vec::new());
    };
    let d = first.len();
    let q = gens.len();
    let mut offsets: Vec<Vec<i64>> = offsets.to_vec();
    offsets.sort();
    offsets.dedup();

    // coefficient vectors with a lex-smaller alternative
    let mut non_canonical = Vec::new();
    if q > 0 {
        let hb = intlat::solve_nonneg(&gens_matrix(gens, d, true), &vec![BigInt::zero(); d])?;
        for x in &hb.hilbert_basis {
            let (u, v) = x.split_at(q);
            if u > v {
                non_canonical.push(u.to_vec());
            }
        }
    }

    let mut pieces = Vec::new();
    let pair_matrix = gens_matrix(gens, d, true);
    for (i, oi) in offsets.iter().enumerate() {
        let mut blocked = non_canonical.clone();
        for oj in &offsets[..i] {
            let rhs: Vec<i64> = oj.iter().zip(oi).map(|(a, b)| a - b).collect();
            let sol = intlat::solve_nonneg(&pair_matrix, &to_big(&rhs))?;
            blocked.extend(sol.minimal_inhomogeneous.iter().map(|x| x[..q].to_vec()));
        }
        let blocked = minimal_elements(blocked);
        let mut boxes = vec![CoordBox {
            lo: vec![0; q],
            hi: vec![None; q],
        }];
        for a in &blocked {
            boxes = boxes.iter().flat_map(|b| b.minus_orthant(a)).collect();
        }
        for b in boxes {
            emit_box(oi, gens, &b, &mut pieces)?;
        }
    }
    pieces.sort();
    Ok(pieces)
}

fn emit_box(o: &[i64], gens: &[Vec<i64>], b: &CoordBox, out: &mut Vec<SimpleLinearSet>) -> Result<()> {
    let q = gens.len();
    let finite: Vec<usize> = (0..q).filter(|&j| b.hi[j].is_some()).collect();
    let periods: Vec<Vec<i64>> = (0..q).filter(|&j| b.hi[j].is_none()).map(|j| gens[j].clone()).collect();
    let mut count: usize = 1;
    for &j in &finite {
        let width = (b.hi[j].unwrap() - b.lo[j] + 1) as usize;
        count = count.saturating_mul(width);
    }
    if count + out.len() > PIECE_LIMIT {
        return Err(Error::capability(format!(
            "disjoint decomposition needs more than {PIECE_LIMIT} pieces"
        )));
    }
    let mut c = b.lo.clone();
    loop {
        let mut off = o.to_vec();
        for (k, g) in c.iter().zip(gens) {
            for (a, gv) in off.iter_mut().zip(g) {
                *a += k * gv;
            }
        }
        out.push(SimpleLinearSet::new(off, periods.clone())?);
        // odometer over the finite coordinates
        let mut advanced = false;
        for &j in &finite {
            if c[j] < b.hi[j].unwrap() {
                c[j] += 1;
                advanced = true;
                break;
            }
            c[j] = b.lo[j];
        }
        if !advanced {
            return Ok(());
        }
    }
}

/// Splits `s` into the `∏ n_i` cosets of `offset + Σ (n_i p_i) ℕ`.
pub fn coset_refine(s: &SimpleLinearSet, indices: &[u32]) -> Result<Vec<SimpleLinearSet>> {
    if indices.len() != s.rank() {
        return Err(Error::input(format!(
            "coset refinement needs {} indices, got {}",
            s.rank(),
            indices.len()
        )));
    }
    if indices.contains(&0) {
        return Err(Error::input("coset refinement indices must be positive"));
    }
    let scaled: Vec<Vec<i64>> = s
        .periods
        .iter()
        .zip(indices)
        .map(|(p, &k)| p.iter().map(|v| v * k as i64).collect())
        .collect();
    let mut out = Vec::new();
    let mut j = vec![0i64; s.rank()];
    loop {
        out.push(SimpleLinearSet::new(s.point_at(&j), scaled.clone())?);
        let mut advanced = false;
        for i in 0..j.len() {
            if j[i] + 1 < indices[i] as i64 {
                j[i] += 1;
                advanced = true;
                break;
            }
            j[i] = 0;
        }
        if !advanced {
            break;
        }
    }
    out.sort();
    Ok(out)
}

fn family_meets(sets: &[&SimpleLinearSet]) -> Result<bool> {
    let Some(first) = sets.first() else {
        return Ok(true);
    };
    let d = first.dim();
    let ranks: Vec<usize> = sets.iter().map(|s| s.rank()).collect();
    let total: usize = ranks.iter().sum();
    let rows = d * (sets.len() - 1);
    if rows == 0 {
        return Ok(true);
    }
    let mut a = IntMatrix::zeros(rows, total);
    let mut b = vec![0i64; rows];
    for (k, s) in sets.iter().enumerate().skip(1) {
        let col_k: usize = ranks[..k].iter().sum();
        for i in 0..d {
            let r = (k - 1) * d + i;
            for (j, p) in first.periods.iter().enumerate() {
                a.set(r, j, p[i].into());
            }
            for (j, p) in s.periods.iter().enumerate() {
                a.set(r, col_k + j, (-p[i]).into());
            }
            b[r] = s.offset[i] - first.offset[i];
        }
    }
    Ok(!intlat::solve_nonneg(&a, &to_big(&b))?.minimal_inhomogeneous.is_empty())
}

/// Largest number of the given sets sharing a common point, with one
/// lexicographically first witness family (as indices).
pub fn max_overlap(sets: &[SimpleLinearSet]) -> Result<(usize, Vec<usize>)> {
    if sets.is_empty() {
        return Ok((0, Vec::new()));
    }
    // level-wise search: a family meets only if all its subfamilies do
    let mut level: Vec<Vec<usize>> = (0..sets.len()).map(|i| vec![i]).collect();
    let mut best = level[0].clone();
    loop {
        let current: BTreeSet<Vec<usize>> = level.iter().cloned().collect();
        let mut next = Vec::new();
        for fam in &level {
            let last = *fam.last().unwrap();
            for j in last + 1..sets.len() {
                let mut cand = fam.clone();
                cand.push(j);
                let all_subs_ok = (0..cand.len()).all(|drop| {
                    let mut sub = cand.clone();
                    sub.remove(drop);
                    current.contains(&sub)
                });
                if !all_subs_ok {
                    continue;
                }
                let members: Vec<&SimpleLinearSet> = cand.iter().map(|&i| &sets[i]).collect();
                if family_meets(&members)? {
                    next.push(cand);
                }
            }
        }
        if next.is_empty() {
            return Ok((best.len(), best));
        }
        best = next[0].clone();
        level = next;
    }
}

fn enumerate_simple(s: &SimpleLinearSet, bound: i64, out: &mut BTreeSet<Vec<i64>>) {
    fn rec(s: &SimpleLinearSet, idx: usize, point: &mut Vec<i64>, bound: i64, out: &mut BTreeSet<Vec<i64>>) {
        if point.iter().sum::<i64>() > bound {
            return;
        }
        if idx == s.rank() {
            out.insert(point.clone());
            return;
        }
        let p = &s.periods[idx];
        let step: i64 = p.iter().sum();
        let saved = point.clone();
        loop {
            rec(s, idx + 1, point, bound, out);
            for (a, b) in point.iter_mut().zip(p) {
                *a += b;
            }
            if step == 0 || point.iter().sum::<i64>() > bound {
                break;
            }
        }
        *point = saved;
    }
    let mut point = s.offset.clone();
    rec(s, 0, &mut point, bound, out);
}

/// All points of `s` of total degree at most `bound`, sorted.
pub fn enumerate_upto(s: &SemilinearSet, bound: i64) -> Vec<Vec<i64>> {
    let mut out = BTreeSet::new();
    for c in &s.components {
        enumerate_simple(c, bound, &mut out);
    }
    out.into_iter().collect()
}

pub fn enumerate_simple_upto(s: &SimpleLinearSet, bound: i64) -> Vec<Vec<i64>> {
    let mut out = BTreeSet::new();
    enumerate_simple(s, bound, &mut out);
    out.into_iter().collect()
}

/// `{n ∈ ℕ^d : λ^n = c}` as a disjoint union of simple linear sets.
pub fn power_fiber(lambda: &[Rat], c: &Rat) -> Result<SemilinearSet> {
    let d = lambda.len();
    if d == 0 {
        return Err(Error::input("power fiber needs at least one base"));
    }
    let fl = lambda.iter().map(factor_rational).collect::<Result<Vec<_>>>()?;
    let fc = factor_rational(c)?;
    let mut primes: BTreeSet<u64> = fc.factors.keys().copied().collect();
    for f in &fl {
        primes.extend(f.factors.keys().copied());
    }
    let primes: Vec<u64> = primes.into_iter().collect();
    // prime rows, then sign parity with a slack variable: Σ s_j n_j - 2 t = s_c
    let rows = primes.len() + 1;
    let mut a = IntMatrix::zeros(rows, d + 1);
    let mut b = vec![0i64; rows];
    for (r, p) in primes.iter().enumerate() {
        for (j, f) in fl.iter().enumerate() {
            a.set(r, j, f.exponent(*p).into());
        }
        b[r] = fc.exponent(*p);
    }
    for (j, f) in fl.iter().enumerate() {
        a.set(primes.len(), j, i64::from(f.sign < 0).into());
    }
    a.set(primes.len(), d, (-2).into());
    b[primes.len()] = i64::from(fc.sign < 0);
    let sol = intlat::solve_nonneg(&a, &to_big(&b))?;
    let offsets: Vec<Vec<i64>> = sol.minimal_inhomogeneous.iter().map(|x| x[..d].to_vec()).collect();
    // the slack is determined by n, so projection keeps generators distinct
    let gens: Vec<Vec<i64>> = sol.hilbert_basis.iter().map(|x| x[..d].to_vec()).collect();
    let pieces = disjoint_union_of_linear(&offsets, &gens)?;
    Ok(SemilinearSet::new(d, pieces, true))
}

/// Lattice GCD check helper: `gcd` of the entries of `v`.
pub fn vector_gcd(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, x| g.gcd(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{rat, ratio};

    fn sls(text: &str) -> SimpleLinearSet {
        SimpleLinearSet::parse(text).unwrap()
    }

    fn upper() -> SimpleLinearSet {
        sls("0,1 ; 1,1 ; 0,1")
    }

    fn brute_points(s: &SimpleLinearSet, bound: i64) -> BTreeSet<Vec<i64>> {
        let d = s.dim();
        let mut out = BTreeSet::new();
        let mut n = vec![0i64; d];
        loop {
            if n.iter().sum::<i64>() <= bound && s.contains(&n) {
                out.insert(n.clone());
            }
            let mut i = 0;
            loop {
                if i == d {
                    return out;
                }
                n[i] += 1;
                if n[i] <= bound {
                    break;
                }
                n[i] = 0;
                i += 1;
            }
        }
    }

    #[test]
    fn membership() {
        assert_eq!(upper().member_coords(&[2, 5]), Some(vec![2, 2]));
        let diag = sls("0,0 ; 1,1");
        assert_eq!(diag.member_coords(&[0, 0]), Some(vec![0]));
        assert_eq!(diag.member_coords(&[1, 2]), None);
        assert!(SimpleLinearSet::parse("0,0 ; 1,1 ; 2,2").is_err());
        assert!(SimpleLinearSet::parse("").is_err());
        assert!(SimpleLinearSet::new(vec![], vec![]).is_err());
    }

    #[test]
    fn canonical_period_order() {
        assert_eq!(sls("0,1 ; 0,1 ; 1,1"), upper());
        assert_eq!(upper().periods(), &[vec![1, 1], vec![0, 1]]);
        assert_eq!(upper().to_string(), "(0,1)+(1,1)N+(0,1)N");
    }

    #[test]
    fn containment() {
        let sub = sls("1,2 ; 2,2");
        let c = contains_simple(&sub, &upper()).unwrap();
        assert_eq!(c.mu, vec![1, 0]);
        assert_eq!(c.t, vec![vec![2, 0]]);
        let c = contains_simple(&upper(), &upper()).unwrap();
        assert_eq!(c.mu, vec![0, 0]);
        assert_eq!(c.t, vec![vec![1, 0], vec![0, 1]]);
        assert!(contains_simple(&sls("0,0 ; 1,1"), &upper()).is_none());
    }

    #[test]
    fn intersections() {
        let diag = sls("0,0 ; 1,1");
        assert!(intersect_simple(&diag, &upper()).unwrap().is_empty());
        assert!(intersect_simple(&diag, &sls("2,0 ; 2,1")).unwrap().is_empty());
        let all = SimpleLinearSet::orthant(2);
        let r = intersect_simple(&diag, &all).unwrap();
        assert_eq!(r.components, vec![diag.clone()]);
        assert!(r.disjoint);
    }

    #[test]
    fn coset_examples() {
        let diag = sls("0,0 ; 1,1");
        assert_eq!(
            coset_refine(&diag, &[2]).unwrap(),
            vec![sls("0,0 ; 2,2"), sls("1,1 ; 2,2")]
        );
        assert_eq!(coset_refine(&upper(), &[1, 1]).unwrap(), vec![upper()]);
        let pieces = coset_refine(&upper(), &[1, 3]).unwrap();
        let offs: Vec<&[i64]> = pieces.iter().map(|p| p.offset()).collect();
        assert_eq!(offs, vec![&[0, 1][..], &[0, 2][..], &[0, 3][..]]);
        for p in &pieces {
            assert_eq!(p.periods(), &[vec![1, 1], vec![0, 3]]);
        }
        let whole = enumerate_simple_upto(&upper(), 6);
        let union = enumerate_upto(&SemilinearSet::new(2, pieces, true), 6);
        assert_eq!(whole, union);
    }

    #[test]
    fn overlap_examples() {
        let supports = vec![
            sls("0,0 ; 1,1"),
            sls("0,0 ; 1,1"),
            upper(),
            sls("1,0 ; 1,1 ; 1,0"),
        ];
        assert_eq!(max_overlap(&supports).unwrap(), (2, vec![0, 1]));
        let all = SimpleLinearSet::orthant(2);
        assert_eq!(max_overlap(&[all.clone(), all.clone(), all]).unwrap().0, 3);
        assert_eq!(max_overlap(&[sls("0,0 ; 1,1"), upper()]).unwrap().0, 1);
    }

    #[test]
    fn enumeration_examples() {
        let diag = SemilinearSet::single(sls("0,0 ; 1,1"));
        assert_eq!(enumerate_upto(&diag, 4), vec![vec![0, 0], vec![1, 1], vec![2, 2]]);
        assert!(enumerate_upto(&SemilinearSet::empty(2), 5).is_empty());
        assert_eq!(
            enumerate_upto(&SemilinearSet::single(upper()), 3),
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2]]
        );
    }

    #[test]
    fn power_fibers() {
        let f = power_fiber(&[rat(2), ratio(1, 2)], &rat(1)).unwrap();
        assert_eq!(f.components, vec![sls("0,0 ; 1,1")]);
        let f = power_fiber(&[rat(2), rat(3)], &rat(6)).unwrap();
        assert_eq!(f.components, vec![sls("1,1")]);
        assert!(power_fiber(&[rat(2)], &rat(3)).unwrap().is_empty());
        // (-1)^n = 1: even n
        let f = power_fiber(&[rat(-1)], &rat(1)).unwrap();
        assert_eq!(f.components, vec![sls("0 ; 2")]);
        // 2^a * 4^b = 16 is not simple as a solution monoid
        let f = power_fiber(&[rat(2), rat(4)], &rat(16)).unwrap();
        let pts = enumerate_upto(&f, 10);
        assert_eq!(pts, vec![vec![0, 2], vec![2, 1], vec![4, 0]]);
    }

    #[test]
    fn union_of_overlapping_linear_sets() {
        // {0,2} + ℕ⟨(2),(3)⟩ over ℕ
        let pieces = disjoint_union_of_linear(&[vec![0], vec![2]], &[vec![2], vec![3]]).unwrap();
        let set = SemilinearSet::new(1, pieces.clone(), true);
        let got = enumerate_upto(&set, 20);
        let expect: Vec<Vec<i64>> = (0..=20).filter(|n| *n != 1).map(|n| vec![n]).collect();
        assert_eq!(got, expect);
        for (i, a) in pieces.iter().enumerate() {
            for b in &pieces[i + 1..] {
                assert!(are_disjoint(a, b).unwrap());
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_set(d: usize) -> impl Strategy<Value = SimpleLinearSet> {
            (
                proptest::collection::vec(0i64..=2, d),
                proptest::collection::vec(proptest::collection::vec(0i64..=2, d), 0..=d),
            )
                .prop_filter_map("independent", |(o, ps)| SimpleLinearSet::new(o, ps).ok())
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]
            #[test]
            fn intersection_matches_pointwise(a in small_set(2), b in small_set(2)) {
                let inter = intersect_simple(&a, &b).unwrap();
                let got: BTreeSet<Vec<i64>> = enumerate_upto(&inter, 10).into_iter().collect();
                let pa = brute_points(&a, 10);
                let pb = brute_points(&b, 10);
                let expect: BTreeSet<Vec<i64>> = pa.intersection(&pb).cloned().collect();
                prop_assert_eq!(got, expect);
                for (i, x) in inter.components.iter().enumerate() {
                    for y in &inter.components[i + 1..] {
                        prop_assert!(are_disjoint(x, y).unwrap());
                    }
                }
            }

            #[test]
            fn containment_is_exact(a in small_set(2), b in small_set(2)) {
                let pa = brute_points(&a, 12);
                let inside = pa.iter().all(|p| b.contains(p));
                match contains_simple(&a, &b) {
                    Some(c) => {
                        prop_assert!(inside);
                        prop_assert_eq!(b.point_at(&c.mu), a.offset().to_vec());
                    }
                    None => prop_assert!(!inside),
                }
            }

            #[test]
            fn cosets_partition(a in small_set(2), n1 in 1u32..=3, n2 in 1u32..=3) {
                let idx: Vec<u32> = [n1, n2][..a.rank()].to_vec();
                let pieces = coset_refine(&a, &idx).unwrap();
                for (i, x) in pieces.iter().enumerate() {
                    for y in &pieces[i + 1..] {
                        prop_assert!(are_disjoint(x, y).unwrap());
                    }
                }
                let union = enumerate_upto(&SemilinearSet::new(2, pieces, true), 10);
                prop_assert_eq!(union, enumerate_simple_upto(&a, 10));
            }

            #[test]
            fn overlap_matches_enumeration(sets in proptest::collection::vec(small_set(2), 1..=4)) {
                let (r, witness) = max_overlap(&sets).unwrap();
                let mut best = 0;
                for n0 in 0..=30i64 {
                    for n1 in 0..=30 - n0 {
                        let k = sets.iter().filter(|s| s.contains(&[n0, n1])).count();
                        best = best.max(k);
                    }
                }
                // small generators keep every witness point below total degree 30
                prop_assert_eq!(r, best);
                prop_assert_eq!(witness.len(), r);
            }
        }
    }
}
