//! Unit-product rational functions `P / ∏ (1 - c x^e)^k` and their
//! Leĭnartas decomposition into terms whose denominator blocks have
//! linearly independent exponents.

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exactnum::{fmt_rational, parse_rational, rat_pow, rational_root, Rat};
use crate::intlat::{self, IntMatrix};
use crate::oracle::{self, Truncation};
use crate::poly::Poly;

pub const DEFAULT_STEP_BUDGET: usize = 10_000;

/// One denominator factor `(1 - c x^e)^mult`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    pub c: Rat,
    pub e: Vec<i64>,
    pub mult: u32,
}

impl Block {
    pub fn new(c: Rat, e: Vec<i64>, mult: u32) -> Result<Self> {
        if c.is_zero() {
            return Err(Error::input("denominator block constant must be nonzero"));
        }
        if e.iter().any(|v| *v < 0) || e.iter().all(|v| *v == 0) {
            return Err(Error::input(format!(
                "denominator block exponent {e:?} must be nonnegative and nonzero"
            )));
        }
        if mult == 0 {
            return Err(Error::input("denominator block multiplicity must be positive"));
        }
        Ok(Block { c, e, mult })
    }

    /// `1 - c x^e`.
    pub fn factor(&self) -> Poly {
        Poly::one_minus(self.e.len(), &self.c, &self.e)
    }

    fn key(&self) -> (Vec<i64>, Rat) {
        (self.e.clone(), self.c.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct UnitProductRational {
    dim: usize,
    numerator: Poly,
    blocks: Vec<Block>,
}

impl UnitProductRational {
    /// Blocks with equal `(c, e)` are merged; blocks are sorted by `e`, then
    /// `c`.
    pub fn new(dim: usize, numerator: Poly, blocks: Vec<Block>) -> Result<Self> {
        if numerator.nvars() != dim {
            return Err(Error::input("numerator dimension mismatch"));
        }
        if numerator.has_negative_exponent() {
            return Err(Error::input("numerator must be a polynomial"));
        }
        let mut merged: BTreeMap<(Vec<i64>, Rat), u32> = BTreeMap::new();
        for b in blocks {
            if b.e.len() != dim {
                return Err(Error::input(format!("block exponent {:?} does not have dimension {dim}", b.e)));
            }
            *merged.entry(b.key()).or_insert(0) += b.mult;
        }
        let blocks = merged.into_iter().map(|((e, c), mult)| Block { c, e, mult }).collect();
        Ok(UnitProductRational { dim, numerator, blocks })
    }

    pub fn polynomial(p: Poly) -> Self {
        UnitProductRational::new(p.nvars(), p, Vec::new()).expect("polynomial input")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn numerator(&self) -> &Poly {
        &self.numerator
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn is_zero(&self) -> bool {
        self.numerator.is_zero()
    }

    pub fn denominator(&self) -> Poly {
        let mut q = Poly::one(self.dim);
        for b in &self.blocks {
            q = &q * &b.factor().pow(b.mult);
        }
        q
    }

    pub fn scale(&self, k: &Rat) -> Self {
        UnitProductRational {
            dim: self.dim,
            numerator: self.numerator.scale(k),
            blocks: self.blocks.clone(),
        }
    }

    /// Same value with dimension raised to `dim` (new trailing variables
    /// unused).
    pub fn embed(&self, dim: usize) -> Self {
        assert!(dim >= self.dim);
        let pad = |e: &[i64]| {
            let mut v = e.to_vec();
            v.resize(dim, 0);
            v
        };
        let numerator = Poly::from_terms(dim, self.numerator.terms().iter().map(|(e, c)| (pad(e), c.clone())));
        let blocks = self
            .blocks
            .iter()
            .map(|b| Block {
                c: b.c.clone(),
                e: pad(&b.e),
                mult: b.mult,
            })
            .collect();
        UnitProductRational { dim, numerator, blocks }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "numerator": self.numerator.terms().iter()
                .map(|(n, c)| json!({"n": n, "c": fmt_rational(c)}))
                .collect::<Vec<_>>(),
            "blocks": self.blocks.iter()
                .map(|b| json!({"c": fmt_rational(&b.c), "e": b.e, "mult": b.mult}))
                .collect::<Vec<_>>(),
        })
    }

    pub fn from_json(dim: usize, v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::input(format!("bad {what} in term JSON"));
        let mut num = Poly::zero(dim);
        for t in v["numerator"].as_array().ok_or_else(|| bad("numerator"))? {
            let n: Vec<i64> = serde_json::from_value(t["n"].clone()).map_err(|_| bad("exponent"))?;
            if n.len() != dim {
                return Err(bad("exponent"));
            }
            num.add_term(n, parse_rational(t["c"].as_str().ok_or_else(|| bad("coefficient"))?)?);
        }
        let mut blocks = Vec::new();
        for b in v["blocks"].as_array().ok_or_else(|| bad("blocks"))? {
            let c = parse_rational(b["c"].as_str().ok_or_else(|| bad("block constant"))?)?;
            let e: Vec<i64> = serde_json::from_value(b["e"].clone()).map_err(|_| bad("block exponent"))?;
            let mult = b["mult"].as_u64().and_then(|m| u32::try_from(m).ok()).ok_or_else(|| bad("multiplicity"))?;
            blocks.push(Block::new(c, e, mult)?);
        }
        UnitProductRational::new(dim, num, blocks)
    }
}

fn var_names(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x{i}")).collect()
}

/// Printer for the input grammar: `P` or `P/(f1*f2^k…)` with variables
/// `x1..xd`; compound numerators are parenthesized.
impl fmt::Display for UnitProductRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = var_names(self.dim);
        let num = self.numerator.display_with(&names);
        if self.numerator.len() > 1 || num.starts_with('-') && !self.blocks.is_empty() {
            write!(f, "({num})")?;
        } else {
            f.write_str(&num)?;
        }
        if self.blocks.is_empty() {
            return Ok(());
        }
        let factors: Vec<String> = self
            .blocks
            .iter()
            .map(|b| {
                let mono = crate::poly::monomial_string(&b.e, &names);
                let mag = b.c.abs();
                let sign = if b.c.is_negative() { '+' } else { '-' };
                let body = if mag.is_one() {
                    format!("(1{sign}{mono})")
                } else {
                    format!("(1{sign}{}*{mono})", fmt_rational(&mag))
                };
                if b.mult == 1 {
                    body
                } else {
                    format!("{body}^{}", b.mult)
                }
            })
            .collect();
        if factors.len() == 1 {
            write!(f, "/{}", factors[0])
        } else {
            write!(f, "/({})", factors.join("*"))
        }
    }
}

/// Sum over the least common denominator (blockwise maximal multiplicity),
/// without verification.
pub fn common_denominator_sum(dim: usize, terms: &[UnitProductRational]) -> UnitProductRational {
    let mut lcd: BTreeMap<(Vec<i64>, Rat), u32> = BTreeMap::new();
    for t in terms {
        for b in &t.blocks {
            let slot = lcd.entry(b.key()).or_insert(0);
            *slot = (*slot).max(b.mult);
        }
    }
    let mut num = Poly::zero(dim);
    for t in terms {
        let own: BTreeMap<(Vec<i64>, Rat), u32> = t.blocks.iter().map(|b| (b.key(), b.mult)).collect();
        let mut p = t.numerator.clone();
        for ((e, c), m) in &lcd {
            let have = own.get(&(e.clone(), c.clone())).copied().unwrap_or(0);
            if *m > have {
                p = &p * &Poly::one_minus(dim, c, e).pow(m - have);
            }
        }
        num = &num + &p;
    }
    let blocks = lcd.into_iter().map(|((e, c), mult)| Block { c, e, mult }).collect();
    UnitProductRational {
        dim,
        numerator: num,
        blocks,
    }
}

/// Single fraction equal to the sum of `terms`, checked against the oracle
/// to total degree 8.
pub fn normalize_sum(dim: usize, terms: &[UnitProductRational]) -> Result<UnitProductRational> {
    let r = common_denominator_sum(dim, terms);
    let t = Truncation::total(8);
    let lhs = oracle::expand_rational(&r, &t);
    let rhs = oracle::expand_sum(terms, dim, &t);
    if let Some((n, a, b)) = oracle::compare(&lhs, &rhs) {
        return Err(Error::verification(format!(
            "normalized sum differs from input at {n:?}: {} vs {}",
            fmt_rational(&a),
            fmt_rational(&b)
        )));
    }
    Ok(r)
}

/// Exact identity `Σ lhs = Σ rhs` of rational functions, by clearing
/// denominators.
pub fn exact_identity(dim: usize, lhs: &[UnitProductRational], rhs: &[UnitProductRational]) -> bool {
    let mut all: Vec<UnitProductRational> = lhs.to_vec();
    all.extend(rhs.iter().map(|t| t.scale(&-Rat::one())));
    common_denominator_sum(dim, &all).numerator.is_zero()
}

/// Result of [`gcd_normalize`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GcdSplit {
    pub blocks: Vec<Block>,
    pub note: Option<String>,
}

/// Splits `1 - c x^e` with `t = gcd(e) > 1` into rational binomial factors.
///
/// Over ℚ only `±1` are roots of unity, so a full split exists exactly when
/// `t = 2` and `c` is a rational square: `1 - a²u² = (1 - a u)(1 + a u)`.
pub fn gcd_normalize(block: &Block) -> GcdSplit {
    let t = crate::semilin::vector_gcd(&block.e);
    if t == 1 {
        return GcdSplit {
            blocks: vec![block.clone()],
            note: None,
        };
    }
    let unchanged = |note: String| GcdSplit {
        blocks: vec![block.clone()],
        note: Some(note),
    };
    if t != 2 {
        return unchanged(format!("irrational roots: gcd {t} of the exponent needs non-rational roots of unity"));
    }
    let Some(a) = (if block.c.is_positive() { rational_root(&block.c, 2) } else { None }) else {
        return unchanged(format!("irrational roots: {} is not a rational square", fmt_rational(&block.c)));
    };
    let half: Vec<i64> = block.e.iter().map(|v| v / 2).collect();
    GcdSplit {
        blocks: vec![
            Block {
                c: a.clone(),
                e: half.clone(),
                mult: block.mult,
            },
            Block {
                c: -a,
                e: half,
                mult: block.mult,
            },
        ],
        note: None,
    }
}

/// Applies [`gcd_normalize`] to every block of `r`.
pub fn gcd_normalize_all(r: &UnitProductRational) -> (UnitProductRational, Vec<String>) {
    let mut blocks = Vec::new();
    let mut notes = Vec::new();
    for b in &r.blocks {
        let s = gcd_normalize(b);
        blocks.extend(s.blocks);
        notes.extend(s.note);
    }
    let out = UnitProductRational::new(r.dim, r.numerator.clone(), blocks).expect("split blocks stay valid");
    (out, notes)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KernelVerdict {
    Independent,
    NoCommonRoot { k: Vec<i64>, lambda: Rat },
    DependentCommonRoot { k: Vec<i64> },
}

/// Evaluates `k ↦ ∏ c_i^{k_i}` on a basis of the integer kernel of the
/// exponent matrix.
pub fn kernel_character_test(blocks: &[(Rat, Vec<i64>)]) -> Result<KernelVerdict> {
    let Some(first) = blocks.first() else {
        return Ok(KernelVerdict::Independent);
    };
    let d = first.1.len();
    let cols: Vec<Vec<i64>> = blocks.iter().map(|b| b.1.clone()).collect();
    let a = IntMatrix::from_columns(&cols, d);
    let kernel = intlat::kernel_basis(&a);
    if kernel.is_empty() {
        return Ok(KernelVerdict::Independent);
    }
    let mut kernel_i64 = Vec::new();
    for k in &kernel {
        let k: Vec<i64> = k
            .iter()
            .map(|v| v.to_i64())
            .collect::<Option<_>>()
            .ok_or_else(|| Error::capability("kernel vector exceeds 64-bit range"))?;
        let mut lambda = Rat::one();
        for (ki, (c, _)) in k.iter().zip(blocks) {
            if *ki != 0 {
                lambda *= rat_pow(c, *ki);
            }
        }
        if !lambda.is_one() {
            return Ok(KernelVerdict::NoCommonRoot { k, lambda });
        }
        kernel_i64.push(k);
    }
    Ok(KernelVerdict::DependentCommonRoot {
        k: kernel_i64.swap_remove(0),
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecompTerm {
    pub rational: UnitProductRational,
    pub independent_verified: bool,
}

fn exponents_independent(blocks: &[Block], d: usize) -> bool {
    let cols: Vec<Vec<i64>> = blocks.iter().map(|b| b.e.clone()).collect();
    intlat::rank(&IntMatrix::from_columns(&cols, d)) == blocks.len()
}

struct Splitter<'a> {
    dim: usize,
    blocks: &'a [Block],
    factors: Vec<Poly>,
}

impl Splitter<'_> {
    /// `u_i = c_i x^{e_i}`.
    fn u(&self, i: usize) -> Poly {
        Poly::monomial(self.dim, self.blocks[i].e.clone(), self.blocks[i].c.clone())
    }

    /// `G_i` with `Σ G_i (1 - u_i) = 1`, built from `u^{k+} = λ u^{k-}`.
    fn cofactors(&self, k: &[i64], lambda: &Rat) -> Result<Vec<Poly>> {
        let s = self.blocks.len();
        let mut g = vec![Poly::zero(self.dim); s];
        // 1 - ∏ v_j = Σ_j (∏_{l<j} v_l)(1 - v_j)
        let telescope = |positive: bool, weight: &Rat, g: &mut Vec<Poly>| {
            let mut prefix = Poly::one(self.dim);
            for (i, &ki) in k.iter().enumerate() {
                let reps = if positive { ki.max(0) } else { (-ki).max(0) };
                for _ in 0..reps {
                    g[i] = &g[i] + &prefix.scale(weight);
                    prefix = &prefix * &self.u(i);
                }
            }
        };
        let inv = (Rat::one() - lambda).recip();
        telescope(true, &inv, &mut g);
        telescope(false, &(-(lambda * &inv)), &mut g);
        let mut check = Poly::zero(self.dim);
        for (gi, fi) in g.iter().zip(&self.factors) {
            check = &check + &(gi * fi);
        }
        if check != Poly::one(self.dim) {
            return Err(Error::verification("splitting identity does not reduce to 1"));
        }
        Ok(g)
    }

    /// Polynomial `R(w)` in `s` variables with `R(1 - u) = 0`.
    fn annihilator(&self, k: &[i64]) -> Poly {
        let s = self.blocks.len();
        let mut plus = Poly::one(s);
        let mut minus = Poly::one(s);
        for (i, &ki) in k.iter().enumerate() {
            let one_minus_w = &Poly::one(s) - &Poly::var(s, i);
            if ki > 0 {
                plus = &plus * &one_minus_w.pow(ki as u32);
            } else if ki < 0 {
                minus = &minus * &one_minus_w.pow((-ki) as u32);
            }
        }
        &plus - &minus
    }
}

/// Leĭnartas decomposition with the default step budget.
pub fn leinartas_decompose(r: &UnitProductRational) -> Result<Vec<DecompTerm>> {
    leinartas_decompose_with_budget(r, DEFAULT_STEP_BUDGET)
}

/// Rewrites `r` as a sum of terms whose blocks have linearly independent
/// exponent vectors, and checks the identity exactly.
///
/// States are multiplicity vectors over the blocks of `r`. A kernel vector
/// with character `λ ≠ 1` yields `Σ G_i (1 - u_i) = 1`, lowering one
/// multiplicity per summand. With `λ = 1` the relation `u^{k+} = u^{k-}`
/// becomes a polynomial identity in `w_i = 1 - u_i` whose linear part at the
/// last support index is nonzero; solving for that `w` trades one power of
/// it for higher powers of the others.
pub fn leinartas_decompose_with_budget(r: &UnitProductRational, budget: usize) -> Result<Vec<DecompTerm>> {
    if r.is_zero() {
        return Ok(Vec::new());
    }
    let d = r.dim;
    let s = r.blocks.len();
    let sp = Splitter {
        dim: d,
        blocks: &r.blocks,
        factors: r.blocks.iter().map(Block::factor).collect(),
    };
    let mut pending: BTreeMap<(u64, Vec<u32>), Poly> = BTreeMap::new();
    let push = |pending: &mut BTreeMap<(u64, Vec<u32>), Poly>, m: Vec<u32>, p: Poly| {
        if p.is_zero() {
            return;
        }
        let key = (m.iter().map(|v| *v as u64).sum(), m);
        let slot = pending.entry(key.clone()).or_insert_with(|| Poly::zero(d));
        *slot = &*slot + &p;
        if slot.is_zero() {
            pending.remove(&key);
        }
    };
    push(&mut pending, r.blocks.iter().map(|b| b.mult).collect(), r.numerator.clone());
    let mut done: BTreeMap<Vec<u32>, Poly> = BTreeMap::new();
    let mut steps = 0usize;

    while let Some(((_, m), p)) = pending.pop_last() {
        if p.is_zero() {
            continue;
        }
        let active: Vec<usize> = (0..s).filter(|&i| m[i] > 0).collect();
        let active_blocks: Vec<(Rat, Vec<i64>)> =
            active.iter().map(|&i| (r.blocks[i].c.clone(), r.blocks[i].e.clone())).collect();
        let verdict = kernel_character_test(&active_blocks)?;
        if verdict == KernelVerdict::Independent {
            let slot = done.entry(m).or_insert_with(|| Poly::zero(d));
            *slot = &*slot + &p;
            continue;
        }
        steps += 1;
        if steps > budget {
            return Err(Error::capability(format!("decomposition exceeded {budget} splitting steps")));
        }
        let lift = |k_active: &[i64]| {
            let mut k = vec![0i64; s];
            for (j, &i) in active.iter().enumerate() {
                k[i] = k_active[j];
            }
            k
        };
        match verdict {
            KernelVerdict::NoCommonRoot { k, lambda } => {
                let k = lift(&k);
                let g = sp.cofactors(&k, &lambda)?;
                for (i, gi) in g.iter().enumerate() {
                    if gi.is_zero() {
                        continue;
                    }
                    let mut m2 = m.clone();
                    m2[i] -= 1;
                    push(&mut pending, m2, &p * gi);
                }
            }
            KernelVerdict::DependentCommonRoot { k } => {
                let k = lift(&k);
                let rel = sp.annihilator(&k);
                let i0 = (0..s).rev().find(|&i| k[i] != 0).expect("nonzero kernel vector");
                let mut unit = vec![0i64; s];
                unit[i0] = 1;
                let ell = rel.coeff(&unit);
                if ell.is_zero() {
                    return Err(Error::verification("annihilating relation has no linear pivot"));
                }
                for (alpha, coef) in rel.terms() {
                    if *alpha == unit {
                        continue;
                    }
                    let mut numer = p.scale(&(-(coef / &ell)));
                    let mut m2 = m.clone();
                    for j in 0..s {
                        let target = m[j] as i64 + i64::from(j == i0) - alpha[j];
                        if target < 0 {
                            numer = &numer * &sp.factors[j].pow((-target) as u32);
                            m2[j] = 0;
                        } else {
                            m2[j] = target as u32;
                        }
                    }
                    push(&mut pending, m2, numer);
                }
            }
            KernelVerdict::Independent => unreachable!(),
        }
    }

    let mut terms = Vec::new();
    for (m, p) in done {
        if p.is_zero() {
            continue;
        }
        let blocks: Vec<Block> = (0..s)
            .filter(|&i| m[i] > 0)
            .map(|i| Block {
                c: r.blocks[i].c.clone(),
                e: r.blocks[i].e.clone(),
                mult: m[i],
            })
            .collect();
        let independent_verified = exponents_independent(&blocks, d);
        if !independent_verified {
            return Err(Error::verification("decomposition term has dependent blocks"));
        }
        terms.push(DecompTerm {
            rational: UnitProductRational {
                dim: d,
                numerator: p,
                blocks,
            },
            independent_verified,
        });
    }
    let rationals: Vec<UnitProductRational> = terms.iter().map(|t| t.rational.clone()).collect();
    if !exact_identity(d, &rationals, std::slice::from_ref(r)) {
        return Err(Error::verification("decomposition does not sum to the input"));
    }
    Ok(terms)
}
