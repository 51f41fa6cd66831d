//! Piecewise polynomial-exponential coefficient formulas on simple linear
//! sets, in local coordinates `n = offset + Σ m_i p_i`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exactnum::{fmt_rational, group_member, parse_rational, rat, rat_pow, rational_root, torsion_quotient, GroupSpec, Rat};
use crate::intlat::{self, IntMatrix};
use crate::leinartas::{common_denominator_sum, Block, DecompTerm, UnitProductRational};
use crate::poly::Poly;
use crate::semilin::{self, contains_simple, Containment, SimpleLinearSet};

/// Iteration cap for pairwise overlap splitting in [`to_partition`].
const SPLIT_LIMIT: usize = 2_000;

/// `Σ_j B_j(m) β_j^m` in `arity` local variables.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ExponentialPolynomial {
    arity: usize,
    terms: Vec<(Vec<Rat>, Poly)>,
}

impl ExponentialPolynomial {
    pub fn zero(arity: usize) -> Self {
        ExponentialPolynomial {
            arity,
            terms: Vec::new(),
        }
    }

    /// Canonical form: equal bases merged, zero polynomials dropped, terms
    /// sorted by base.
    pub fn new(arity: usize, terms: impl IntoIterator<Item = (Poly, Vec<Rat>)>) -> Self {
        let mut merged: BTreeMap<Vec<Rat>, Poly> = BTreeMap::new();
        for (b, beta) in terms {
            assert_eq!(b.nvars(), arity);
            assert_eq!(beta.len(), arity);
            assert!(beta.iter().all(|v| !v.is_zero()), "bases must be nonzero");
            let slot = merged.entry(beta).or_insert_with(|| Poly::zero(arity));
            *slot = &*slot + &b;
        }
        ExponentialPolynomial {
            arity,
            terms: merged.into_iter().filter(|(_, b)| !b.is_zero()).collect(),
        }
    }

    pub fn constant(c: Rat) -> Self {
        ExponentialPolynomial::new(0, [(Poly::constant(0, c), Vec::new())])
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// `(β, B)` pairs in canonical order.
    pub fn terms(&self) -> &[(Vec<Rat>, Poly)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add(&self, other: &ExponentialPolynomial) -> ExponentialPolynomial {
        assert_eq!(self.arity, other.arity);
        ExponentialPolynomial::new(
            self.arity,
            self.terms.iter().chain(&other.terms).map(|(beta, b)| (b.clone(), beta.clone())),
        )
    }

    pub fn scale(&self, k: &Rat) -> ExponentialPolynomial {
        ExponentialPolynomial::new(self.arity, self.terms.iter().map(|(beta, b)| (b.scale(k), beta.clone())))
    }

    pub fn eval(&self, m: &[i64]) -> Rat {
        assert_eq!(m.len(), self.arity);
        let mut total = Rat::zero();
        for (beta, b) in &self.terms {
            let mut v = b.eval_int(m);
            for (base, k) in beta.iter().zip(m) {
                v *= rat_pow(base, *k);
            }
            total += v;
        }
        total
    }

    /// Every `B_j` is constant.
    pub fn is_piecewise_exponential(&self) -> bool {
        self.terms.iter().all(|(_, b)| b.is_constant())
    }

    pub fn max_degree(&self) -> i64 {
        self.terms.iter().map(|(_, b)| b.total_degree()).max().unwrap_or(0)
    }

    /// Formula in coordinates `m'` with `m = μ + Tᵀ m'` (the transport along
    /// a containment certificate).
    pub fn transport(&self, cert: &Containment) -> ExponentialPolynomial {
        let s2 = cert.t.len();
        // m_j = μ_j + Σ_i T_ij m'_i
        let images: Vec<Poly> = (0..self.arity)
            .map(|j| {
                let mut p = Poly::constant(s2, rat(cert.mu[j]));
                for (i, row) in cert.t.iter().enumerate() {
                    if row[j] != 0 {
                        p = &p + &Poly::var(s2, i).scale(&rat(row[j]));
                    }
                }
                p
            })
            .collect();
        let terms = self.terms.iter().map(|(beta, b)| {
            let mut factor = Rat::one();
            for (base, mu) in beta.iter().zip(&cert.mu) {
                factor *= rat_pow(base, *mu);
            }
            let new_beta: Vec<Rat> = cert
                .t
                .iter()
                .map(|row| {
                    let mut v = Rat::one();
                    for (base, t) in beta.iter().zip(row) {
                        v *= rat_pow(base, *t);
                    }
                    v
                })
                .collect();
            let nb = if self.arity == 0 {
                Poly::constant(s2, b.constant_term())
            } else {
                b.compose(&images)
            };
            (nb.scale(&factor), new_beta)
        });
        ExponentialPolynomial::new(s2, terms)
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.terms
                .iter()
                .map(|(beta, b)| {
                    json!({
                        "B": b.terms().iter().map(|(e, c)| json!({"mono": e, "c": fmt_rational(c)})).collect::<Vec<_>>(),
                        "beta": beta.iter().map(fmt_rational).collect::<Vec<_>>(),
                    })
                })
                .collect(),
        )
    }

    pub fn from_json(arity: usize, v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::input(format!("bad {what} in formula JSON"));
        let mut terms = Vec::new();
        for t in v.as_array().ok_or_else(|| bad("terms"))? {
            let mut b = Poly::zero(arity);
            for mono in t["B"].as_array().ok_or_else(|| bad("B"))? {
                let e: Vec<i64> = serde_json::from_value(mono["mono"].clone()).map_err(|_| bad("monomial"))?;
                if e.len() != arity {
                    return Err(bad("monomial"));
                }
                b.add_term(e, parse_rational(mono["c"].as_str().ok_or_else(|| bad("coefficient"))?)?);
            }
            let beta = t["beta"]
                .as_array()
                .ok_or_else(|| bad("beta"))?
                .iter()
                .map(|x| parse_rational(x.as_str().unwrap_or("")))
                .collect::<Result<Vec<_>>>()?;
            if beta.len() != arity || beta.iter().any(Zero::is_zero) {
                return Err(bad("beta"));
            }
            terms.push((b, beta));
        }
        Ok(ExponentialPolynomial::new(arity, terms))
    }
}

fn local_names(s: usize) -> Vec<String> {
    (1..=s).map(|i| format!("m{i}")).collect()
}

impl fmt::Display for ExponentialPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let names = local_names(self.arity);
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(beta, b)| {
                let mut s = b.display_with(&names);
                if b.len() > 1 {
                    s = format!("({s})");
                }
                for (base, n) in beta.iter().zip(&names) {
                    if !base.is_one() {
                        let bs = fmt_rational(base);
                        if bs.contains('/') || bs.starts_with('-') {
                            s.push_str(&format!("*({bs})^{n}"));
                        } else {
                            s.push_str(&format!("*{bs}^{n}"));
                        }
                    }
                }
                s
            })
            .collect();
        f.write_str(&parts.join(" + "))
    }
}

impl fmt::Debug for ExponentialPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExpPoly[{self}]")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolyExpPiece {
    pub set: SimpleLinearSet,
    pub formula: ExponentialPolynomial,
}

impl PolyExpPiece {
    pub fn new(set: SimpleLinearSet, formula: ExponentialPolynomial) -> Result<Self> {
        if set.rank() != formula.arity() {
            return Err(Error::input("formula arity differs from the number of periods"));
        }
        Ok(PolyExpPiece { set, formula })
    }

    /// Value at a global point, or `None` outside the set.
    pub fn value_at(&self, n: &[i64]) -> Option<Rat> {
        self.set.member_coords(n).map(|m| self.formula.eval(&m))
    }

    /// Restriction to a simple subset of `self.set`.
    pub fn restrict(&self, sub: &SimpleLinearSet) -> Option<PolyExpPiece> {
        let cert = contains_simple(sub, &self.set)?;
        Some(PolyExpPiece {
            set: sub.clone(),
            formula: self.formula.transport(&cert),
        })
    }

    pub fn to_json(&self) -> Value {
        json!({
            "set": serde_json::to_value(&self.set).expect("set serializes"),
            "terms": self.formula.to_json(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let set: SimpleLinearSet =
            serde_json::from_value(v["set"].clone()).map_err(|e| Error::input(format!("bad set in piece JSON: {e}")))?;
        let formula = ExponentialPolynomial::from_json(set.rank(), &v["terms"])?;
        PolyExpPiece::new(set, formula)
    }
}

impl fmt::Display for PolyExpPiece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "on {}: {}", self.set, self.formula)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Semantics {
    Partition,
    Additive,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PiecewisePolyExp {
    pub dim: usize,
    pub pieces: Vec<PolyExpPiece>,
    pub semantics: Semantics,
}

impl PiecewisePolyExp {
    pub fn empty(dim: usize, semantics: Semantics) -> Self {
        PiecewisePolyExp {
            dim,
            pieces: Vec::new(),
            semantics,
        }
    }

    /// Concatenation; the result is additive.
    pub fn sum(dim: usize, parts: impl IntoIterator<Item = PiecewisePolyExp>) -> Self {
        let mut out = PiecewisePolyExp::empty(dim, Semantics::Additive);
        for p in parts {
            out.pieces.extend(p.pieces);
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "semantics": match self.semantics { Semantics::Partition => "partition", Semantics::Additive => "additive" },
            "pieces": self.pieces.iter().map(PolyExpPiece::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(dim: usize, v: &Value) -> Result<Self> {
        let semantics = match v["semantics"].as_str() {
            Some("partition") => Semantics::Partition,
            Some("additive") => Semantics::Additive,
            _ => return Err(Error::input("semantics must be \"partition\" or \"additive\"")),
        };
        let pieces = v["pieces"]
            .as_array()
            .ok_or_else(|| Error::input("pieces must be an array"))?
            .iter()
            .map(PolyExpPiece::from_json)
            .collect::<Result<Vec<_>>>()?;
        if pieces.iter().any(|p| p.set.dim() != dim) {
            return Err(Error::input("piece dimension mismatch"));
        }
        Ok(PiecewisePolyExp { dim, pieces, semantics })
    }
}

impl fmt::Display for PiecewisePolyExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in &self.pieces {
            writeln!(f, "{p}")?;
        }
        Ok(())
    }
}

/// `binom(m + k - 1, k - 1)` as a polynomial in variable `var` of `nvars`.
fn binomial_basis(nvars: usize, var: usize, k: u32) -> Poly {
    let mut p = Poly::one(nvars);
    for j in 1..k {
        let factor = &Poly::var(nvars, var) + &Poly::constant(nvars, rat(j as i64));
        p = (&p * &factor).scale(&Rat::new(BigInt::one(), BigInt::from(j)));
    }
    p
}

/// One piece per numerator monomial of a verified term.
pub fn term_to_pieces(t: &DecompTerm) -> Result<PiecewisePolyExp> {
    if !t.independent_verified {
        return Err(Error::input("term blocks are not verified independent"));
    }
    let r = &t.rational;
    let d = r.dim();
    // local order must match the canonical (descending) period order
    let mut blocks: Vec<&Block> = r.blocks().iter().collect();
    blocks.sort_by(|a, b| b.e.cmp(&a.e));
    let s = blocks.len();
    let periods: Vec<Vec<i64>> = blocks.iter().map(|b| b.e.clone()).collect();
    let beta: Vec<Rat> = blocks.iter().map(|b| b.c.clone()).collect();
    let mut shape = Poly::one(s);
    for (i, b) in blocks.iter().enumerate() {
        shape = &shape * &binomial_basis(s, i, b.mult);
    }
    let mut out = PiecewisePolyExp::empty(d, Semantics::Additive);
    for (a, kappa) in r.numerator().terms() {
        let set = SimpleLinearSet::new(a.clone(), periods.clone())?;
        let formula = ExponentialPolynomial::new(s, [(shape.scale(kappa), beta.clone())]);
        out.pieces.push(PolyExpPiece { set, formula });
    }
    Ok(out)
}

pub fn evaluate_at(p: &PiecewisePolyExp, n: &[i64]) -> Rat {
    match p.semantics {
        Semantics::Partition => p.pieces.iter().find_map(|pc| pc.value_at(n)).unwrap_or_else(Rat::zero),
        Semantics::Additive => p.pieces.iter().filter_map(|pc| pc.value_at(n)).sum(),
    }
}

/// Merges pieces on identical sets, drops zero formulas, sorts by set.
pub fn canonicalize(p: &PiecewisePolyExp) -> PiecewisePolyExp {
    let mut merged: BTreeMap<SimpleLinearSet, ExponentialPolynomial> = BTreeMap::new();
    for pc in &p.pieces {
        let slot = merged
            .entry(pc.set.clone())
            .or_insert_with(|| ExponentialPolynomial::zero(pc.set.rank()));
        *slot = slot.add(&pc.formula);
    }
    PiecewisePolyExp {
        dim: p.dim,
        pieces: merged
            .into_iter()
            .filter(|(_, f)| !f.is_zero())
            .map(|(set, formula)| PolyExpPiece { set, formula })
            .collect(),
        semantics: p.semantics,
    }
}

/// The pieces of `sup` minus a grid-aligned subset `sub`, with formulas
/// transported. `None` when `sub` is not grid-aligned in `sup`.
///
/// Grid-aligned: in local coordinates of `sup`, `sub` is a product of one
/// progression `μ_j + t_j ℕ` or point `{μ_j}` per coordinate.
fn subtract_aligned(sup: &PolyExpPiece, sub: &SimpleLinearSet) -> Option<Vec<PolyExpPiece>> {
    let cert = contains_simple(sub, &sup.set)?;
    let s = sup.set.rank();
    let mut step = vec![0i64; s];
    for row in &cert.t {
        let nz: Vec<usize> = (0..s).filter(|&j| row[j] != 0).collect();
        if nz.len() != 1 || step[nz[0]] != 0 {
            return None;
        }
        step[nz[0]] = row[nz[0]];
    }
    // per-coordinate progressions: (start, stride), stride 0 = single point
    let complement_1d = |mu: i64, t: i64| -> Vec<(i64, i64)> {
        let mut v: Vec<(i64, i64)> = (0..mu).map(|k| (k, 0)).collect();
        if t == 0 {
            v.push((mu + 1, 1));
        } else {
            v.extend((1..t).map(|r| (mu + r, t)));
        }
        v
    };
    let mut out = Vec::new();
    for j in 0..s {
        // coordinates before j inside sub, coordinate j outside, rest free
        for (start_j, stride_j) in complement_1d(cert.mu[j], step[j]) {
            let mut starts = vec![0i64; s];
            let mut strides = vec![1i64; s];
            for l in 0..j {
                starts[l] = cert.mu[l];
                strides[l] = step[l];
            }
            starts[j] = start_j;
            strides[j] = stride_j;
            let mu = starts.clone();
            let t: Vec<Vec<i64>> = (0..s)
                .filter(|&l| strides[l] != 0)
                .map(|l| {
                    let mut row = vec![0i64; s];
                    row[l] = strides[l];
                    row
                })
                .collect();
            let cert = Containment { mu, t };
            let offset = sup.set.point_at(&cert.mu);
            let periods: Vec<Vec<i64>> = cert
                .t
                .iter()
                .map(|row| {
                    let base = sup.set.point_at(&vec![0; s]);
                    sup.set.point_at(row).iter().zip(&base).map(|(a, b)| a - b).collect()
                })
                .collect();
            let set = SimpleLinearSet::new(offset, periods).ok()?;
            // recompute the certificate in the canonical period order
            let cert = contains_simple(&set, &sup.set)?;
            out.push(PolyExpPiece {
                formula: sup.formula.transport(&cert),
                set,
            });
        }
    }
    Some(out)
}

/// Tries to turn an additive pile into partition semantics.
///
/// Overlapping pieces are split along their intersections when those are
/// grid-aligned, then cosets are refined wherever two bases differ by sign
/// in a coordinate. Returns the input (canonicalized, additive) with a note
/// when a step is not available.
pub fn to_partition(p: &PiecewisePolyExp) -> (PiecewisePolyExp, Option<String>) {
    let mut cur = canonicalize(p);
    if cur.semantics == Semantics::Partition {
        return (torsion_refine(&cur), None);
    }
    let fallback = |note: String| (canonicalize(p), Some(note));
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > SPLIT_LIMIT {
            return fallback(format!("overlap splitting exceeded {SPLIT_LIMIT} rounds"));
        }
        let mut overlap = None;
        'search: for i in 0..cur.pieces.len() {
            for j in i + 1..cur.pieces.len() {
                match semilin::intersect_simple(&cur.pieces[i].set, &cur.pieces[j].set) {
                    Ok(inter) if !inter.is_empty() => {
                        overlap = Some((i, j, inter.components[0].clone()));
                        break 'search;
                    }
                    Ok(_) => {}
                    Err(e) => return fallback(format!("intersection failed: {e}")),
                }
            }
        }
        let Some((i, j, comp)) = overlap else { break };
        let mut replacement = Vec::new();
        for idx in [i, j] {
            let pc = &cur.pieces[idx];
            if pc.set == comp {
                replacement.push(pc.clone());
                continue;
            }
            let Some(rest) = subtract_aligned(pc, &comp) else {
                return fallback(format!(
                    "overlap {comp} of {} and {} is not grid-aligned",
                    cur.pieces[i].set, cur.pieces[j].set
                ));
            };
            replacement.push(pc.restrict(&comp).expect("component lies in both pieces"));
            replacement.extend(rest);
        }
        let mut pieces: Vec<PolyExpPiece> = cur
            .pieces
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i && *k != j)
            .map(|(_, pc)| pc.clone())
            .collect();
        pieces.extend(replacement);
        cur = canonicalize(&PiecewisePolyExp {
            dim: cur.dim,
            pieces,
            semantics: Semantics::Additive,
        });
    }
    cur.semantics = Semantics::Partition;
    (torsion_refine(&cur), None)
}

/// Refines coordinate `i` of a piece into two cosets whenever two of its
/// bases satisfy `β_i = -β'_i`, until no such pair remains.
pub fn torsion_refine(p: &PiecewisePolyExp) -> PiecewisePolyExp {
    let mut work: Vec<PolyExpPiece> = p.pieces.clone();
    let mut done = Vec::new();
    while let Some(pc) = work.pop() {
        let s = pc.set.rank();
        let terms = pc.formula.terms();
        let coord = (0..s).find(|&i| {
            terms.iter().enumerate().any(|(a, (ba, _))| {
                terms[a + 1..].iter().any(|(bb, _)| torsion_quotient(&ba[i], &bb[i]) == Some(2))
            })
        });
        match coord {
            None => done.push(pc),
            Some(i) => {
                let mut idx = vec![1u32; s];
                idx[i] = 2;
                let cosets = semilin::coset_refine(&pc.set, &idx).expect("valid refinement");
                for c in cosets {
                    work.push(pc.restrict(&c).expect("coset lies in piece"));
                }
            }
        }
    }
    canonicalize(&PiecewisePolyExp {
        dim: p.dim,
        pieces: done,
        semantics: p.semantics,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StructureVerdict {
    Polya,
    Bezivin { l_max: usize, within_r: Option<bool> },
    NotBezivin { piece: PolyExpPiece, term: usize },
    ConstantsOutsideGroup { piece: PolyExpPiece, value: Rat },
}

impl fmt::Display for StructureVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureVerdict::Polya => f.write_str("polya"),
            StructureVerdict::Bezivin { l_max, .. } => write!(f, "bezivin({l_max})"),
            StructureVerdict::NotBezivin { piece, .. } => write!(f, "not_bezivin (witness {piece})"),
            StructureVerdict::ConstantsOutsideGroup { piece, value } => {
                write!(f, "constants_outside_group ({} on {})", fmt_rational(value), piece.set)
            }
        }
    }
}

/// Reads the Bézivin/Pólya structure off a canonical partition.
pub fn classify_structure(p: &PiecewisePolyExp, g: &GroupSpec, r: Option<usize>) -> Result<StructureVerdict> {
    if p.semantics != Semantics::Partition {
        return Err(Error::capability(
            "pieces could not be arranged into a partition; structure not classified",
        ));
    }
    for pc in &p.pieces {
        if let Some(term) = pc.formula.terms().iter().position(|(_, b)| !b.is_constant()) {
            return Ok(StructureVerdict::NotBezivin {
                piece: pc.clone(),
                term,
            });
        }
    }
    for pc in &p.pieces {
        for (beta, b) in pc.formula.terms() {
            for v in std::iter::once(b.constant_term()).chain(beta.iter().cloned()) {
                if group_member(&v, g)?.is_none() {
                    return Ok(StructureVerdict::ConstantsOutsideGroup {
                        piece: pc.clone(),
                        value: v,
                    });
                }
            }
        }
    }
    let l_max = p.pieces.iter().map(|pc| pc.formula.terms().len()).max().unwrap_or(0);
    if l_max <= 1 {
        return Ok(StructureVerdict::Polya);
    }
    Ok(StructureVerdict::Bezivin {
        l_max,
        within_r: r.map(|r| l_max <= r),
    })
}

/// Global form `Σ A_ν(n) α_ν^n` valid on the piece's set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalForm {
    pub dim: usize,
    pub terms: Vec<(Poly, Vec<Rat>)>,
}

impl GlobalForm {
    pub fn eval(&self, n: &[i64]) -> Rat {
        self.terms
            .iter()
            .map(|(a, alpha)| {
                let mut v = a.eval_int(n);
                for (base, k) in alpha.iter().zip(n) {
                    v *= rat_pow(base, *k);
                }
                v
            })
            .sum()
    }
}

/// Lifts local coordinates to global ones: `m_i = ℓ_i · (n - offset)` with
/// `ℓ_i` integral when possible, else over a common denominator `N_i`, which
/// then needs an `N_i`-th root of every `β_i`. `Err` carries the reason.
pub fn lift_global(piece: &PolyExpPiece) -> std::result::Result<GlobalForm, String> {
    let set = &piece.set;
    let d = set.dim();
    let s = set.rank();
    let bt = IntMatrix::from_rows(set.periods(), d);
    let rational_inv = intlat::rational_left_inverse(set.periods(), d).ok_or("dependent periods")?;
    // rows (N_i, integer row q_i) with m_i = q_i·(n - a) / N_i
    let mut rows: Vec<(u32, Vec<i64>)> = Vec::with_capacity(s);
    for i in 0..s {
        let mut unit = vec![BigInt::zero(); s];
        unit[i] = BigInt::one();
        if let Some(l) = intlat::solve_integer(&bt, &unit) {
            let q = l.iter().map(|v| v.to_i64()).collect::<Option<Vec<_>>>().ok_or("left inverse overflow")?;
            rows.push((1, q));
            continue;
        }
        let den = rational_inv[i].iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
        let n = den.to_u32().ok_or("left inverse denominator too large")?;
        let q = rational_inv[i]
            .iter()
            .map(|v| (v * Rat::from_integer(den.clone())).to_integer().to_i64())
            .collect::<Option<Vec<_>>>()
            .ok_or("left inverse overflow")?;
        rows.push((n, q));
    }
    let a = set.offset();
    let mut terms = Vec::new();
    for (beta, b) in piece.formula.terms() {
        let mut gammas = Vec::with_capacity(s);
        for (base, (n, _)) in beta.iter().zip(&rows) {
            let g = rational_root(base, *n).ok_or_else(|| {
                format!("irrational root: {}^(1/{n}) is not rational", fmt_rational(base))
            })?;
            gammas.push(g);
        }
        let alpha: Vec<Rat> = (0..d)
            .map(|j| {
                let mut v = Rat::one();
                for (g, (_, q)) in gammas.iter().zip(&rows) {
                    v *= rat_pow(g, q[j]);
                }
                v
            })
            .collect();
        let mut scale = Rat::one();
        let images: Vec<Poly> = rows
            .iter()
            .zip(&gammas)
            .map(|((n, q), g)| {
                let p_i: i64 = -q.iter().zip(a).map(|(x, y)| x * y).sum::<i64>();
                scale *= rat_pow(g, p_i);
                let nn = Rat::from_integer(BigInt::from(*n));
                let mut img = Poly::constant(d, rat(p_i) / &nn);
                for (j, qj) in q.iter().enumerate() {
                    if *qj != 0 {
                        img = &img + &Poly::var(d, j).scale(&(rat(*qj) / &nn));
                    }
                }
                img
            })
            .collect();
        let a_poly = if s == 0 {
            Poly::constant(d, b.constant_term())
        } else {
            b.compose(&images)
        };
        terms.push((a_poly.scale(&scale), alpha));
    }
    Ok(GlobalForm { dim: d, terms })
}

/// Binomial-basis rewrite of a piece as unit-product fractions, one per
/// basis element.
pub fn piece_to_terms(piece: &PolyExpPiece) -> Vec<UnitProductRational> {
    let set = &piece.set;
    let d = set.dim();
    let s = set.rank();
    let mut out = Vec::new();
    for (beta, b) in piece.formula.terms() {
        let mut rest = b.clone();
        while let Some((alpha, c)) = rest.lex_max().map(|(a, c)| (a.clone(), c.clone())) {
            let ks: Vec<u32> = alpha.iter().map(|v| *v as u32 + 1).collect();
            let mut basis = Poly::one(s);
            let mut lead = Rat::one();
            for (i, &k) in ks.iter().enumerate() {
                basis = &basis * &binomial_basis(s, i, k);
                for j in 1..k {
                    lead /= rat(j as i64);
                }
            }
            let lambda = &c / &lead;
            rest = &rest - &basis.scale(&lambda);
            let blocks: Vec<Block> = (0..s)
                .map(|i| Block::new(beta[i].clone(), set.periods()[i].clone(), ks[i]).expect("valid block"))
                .collect();
            let num = Poly::monomial(d, set.offset().to_vec(), lambda);
            out.push(UnitProductRational::new(d, num, blocks).expect("valid term"));
        }
    }
    out
}

pub fn piece_to_rational(piece: &PolyExpPiece) -> UnitProductRational {
    common_denominator_sum(piece.set.dim(), &piece_to_terms(piece))
}
