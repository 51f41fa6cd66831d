//! Skew-geometric series `c0 x^{u0} / ∏ (1 - c_i x^{e_i})` with independent
//! `e_i`, and finite sums of them.

use std::fmt;

use num_traits::{One, Zero};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exactnum::{fmt_rational, group_member, parse_rational, rat_pow, torsion_quotient, GroupSpec, Rat};
use crate::leinartas::{Block, UnitProductRational};
use crate::poly::Poly;
use crate::polyexp::PolyExpPiece;
use crate::semilin::{self, contains_simple, SimpleLinearSet};

/// Cap on coset refinement rounds in [`torsion_normalize`].
const TORSION_BUDGET: usize = 1_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SkewGeometric {
    support: SimpleLinearSet,
    c0: Rat,
    /// constants aligned with `support.periods()`
    constants: Vec<Rat>,
}

impl SkewGeometric {
    pub fn new(c0: Rat, u0: Vec<i64>, factors: Vec<(Rat, Vec<i64>)>) -> Result<Self> {
        if factors.iter().any(|(c, _)| c.is_zero()) {
            return Err(Error::input("skew-geometric factor constants must be nonzero"));
        }
        if factors.iter().any(|(_, e)| e.iter().all(|v| *v == 0)) {
            return Err(Error::input("skew-geometric factor exponents must be nonzero"));
        }
        let mut factors = factors;
        factors.sort_by(|a, b| b.1.cmp(&a.1));
        let periods: Vec<Vec<i64>> = factors.iter().map(|f| f.1.clone()).collect();
        let support = SimpleLinearSet::new(u0, periods)
            .map_err(|e| Error::input(format!("not skew-geometric: {e}")))?;
        Ok(SkewGeometric {
            support,
            c0,
            constants: factors.into_iter().map(|f| f.0).collect(),
        })
    }

    fn from_parts(support: SimpleLinearSet, c0: Rat, constants: Vec<Rat>) -> Self {
        debug_assert_eq!(support.rank(), constants.len());
        SkewGeometric {
            support,
            c0,
            constants,
        }
    }

    pub fn support(&self) -> &SimpleLinearSet {
        &self.support
    }

    pub fn c0(&self) -> &Rat {
        &self.c0
    }

    pub fn u0(&self) -> &[i64] {
        self.support.offset()
    }

    /// `(c_i, e_i)` in canonical period order.
    pub fn factors(&self) -> Vec<(Rat, Vec<i64>)> {
        self.constants.iter().cloned().zip(self.support.periods().iter().cloned()).collect()
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn coefficient_at(&self, n: &[i64]) -> Rat {
        match self.support.member_coords(n) {
            None => Rat::zero(),
            Some(m) => {
                let mut v = self.c0.clone();
                for (c, k) in self.constants.iter().zip(&m) {
                    v *= rat_pow(c, *k);
                }
                v
            }
        }
    }

    pub fn to_rational(&self) -> UnitProductRational {
        let d = self.dim();
        let num = Poly::monomial(d, self.u0().to_vec(), self.c0.clone());
        let blocks = self
            .factors()
            .into_iter()
            .map(|(c, e)| Block::new(c, e, 1).expect("validated factor"))
            .collect();
        UnitProductRational::new(d, num, blocks).expect("validated series")
    }

    pub fn to_json(&self) -> Value {
        json!({
            "c0": fmt_rational(&self.c0),
            "u0": self.u0(),
            "factors": self.factors().iter().map(|(c, e)| json!({"c": fmt_rational(c), "e": e})).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let bad = |what: &str| Error::input(format!("bad {what} in skew-geometric JSON"));
        let c0 = parse_rational(v["c0"].as_str().ok_or_else(|| bad("c0"))?)?;
        let u0: Vec<i64> = serde_json::from_value(v["u0"].clone()).map_err(|_| bad("u0"))?;
        let mut factors = Vec::new();
        for f in v["factors"].as_array().ok_or_else(|| bad("factors"))? {
            let c = parse_rational(f["c"].as_str().ok_or_else(|| bad("factor constant"))?)?;
            let e: Vec<i64> = serde_json::from_value(f["e"].clone()).map_err(|_| bad("factor exponent"))?;
            if e.len() != u0.len() {
                return Err(bad("factor exponent"));
            }
            factors.push((c, e));
        }
        SkewGeometric::new(c0, u0, factors)
    }
}

impl fmt::Display for SkewGeometric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_rational())
    }
}

/// `1_S` as a skew-geometric series.
pub fn indicator_of(s: &SimpleLinearSet) -> SkewGeometric {
    SkewGeometric::from_parts(s.clone(), Rat::one(), vec![Rat::one(); s.rank()])
}

/// `F ⊙ 1_S` for `S` inside the support of `F`.
pub fn restrict_to(f: &SkewGeometric, s: &SimpleLinearSet) -> Result<SkewGeometric> {
    let cert = contains_simple(s, &f.support)
        .ok_or_else(|| Error::input(format!("{s} is not contained in the support {}", f.support)))?;
    let mut d0 = f.c0.clone();
    for (c, mu) in f.constants.iter().zip(&cert.mu) {
        d0 *= rat_pow(c, *mu);
    }
    let constants = cert
        .t
        .iter()
        .map(|row| {
            let mut v = Rat::one();
            for (c, t) in f.constants.iter().zip(row) {
                v *= rat_pow(c, *t);
            }
            v
        })
        .collect();
    Ok(SkewGeometric::from_parts(s.clone(), d0, constants))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ambiguity {
    Unambiguous,
    TriviallyAmbiguous,
    Ambiguous,
    Unknown,
}

impl Ambiguity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Ambiguity::Unambiguous => "unambiguous",
            Ambiguity::TriviallyAmbiguous => "trivially_ambiguous",
            Ambiguity::Ambiguous => "ambiguous",
            Ambiguity::Unknown => "unknown",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "unambiguous" => Ambiguity::Unambiguous,
            "trivially_ambiguous" => Ambiguity::TriviallyAmbiguous,
            "ambiguous" => Ambiguity::Ambiguous,
            "unknown" => Ambiguity::Unknown,
            _ => return Err(Error::input(format!("unknown sum status {s:?}"))),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SkewGeomSum {
    pub dim: usize,
    pub summands: Vec<SkewGeometric>,
    pub status: Ambiguity,
}

impl SkewGeomSum {
    /// Sum with status `unknown`, summands in canonical order.
    pub fn new(dim: usize, mut summands: Vec<SkewGeometric>) -> Self {
        assert!(summands.iter().all(|s| s.dim() == dim));
        summands.sort();
        SkewGeomSum {
            dim,
            summands,
            status: Ambiguity::Unknown,
        }
    }

    /// Sum with its status computed.
    pub fn classified(dim: usize, summands: Vec<SkewGeometric>) -> Result<Self> {
        let mut s = SkewGeomSum::new(dim, summands);
        s.status = classify_ambiguity(&s)?.0;
        Ok(s)
    }

    pub fn coefficient_at(&self, n: &[i64]) -> Rat {
        self.summands.iter().map(|s| s.coefficient_at(n)).sum()
    }

    pub fn to_json(&self) -> Value {
        json!({
            "status": self.status.as_str(),
            "summands": self.summands.iter().map(SkewGeometric::to_json).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(dim: usize, v: &Value) -> Result<Self> {
        let summands = v["summands"]
            .as_array()
            .ok_or_else(|| Error::input("sum JSON needs a summands array"))?
            .iter()
            .map(SkewGeometric::from_json)
            .collect::<Result<Vec<_>>>()?;
        if summands.iter().any(|s| s.dim() != dim) {
            return Err(Error::input("summand dimension mismatch"));
        }
        let mut s = SkewGeomSum::new(dim, summands);
        if let Some(st) = v["status"].as_str() {
            s.status = Ambiguity::parse(st)?;
        }
        Ok(s)
    }
}

pub fn to_rational(f: &SkewGeomSum) -> Vec<UnitProductRational> {
    f.summands.iter().map(SkewGeometric::to_rational).collect()
}

/// Exact ambiguity status and the largest number of summands sharing a point.
pub fn classify_ambiguity(f: &SkewGeomSum) -> Result<(Ambiguity, usize)> {
    let mut disjoint = true;
    let mut equal_or_disjoint = true;
    for (i, a) in f.summands.iter().enumerate() {
        for b in &f.summands[i + 1..] {
            if a.support == b.support {
                disjoint = false;
            } else if !semilin::are_disjoint(&a.support, &b.support)? {
                disjoint = false;
                equal_or_disjoint = false;
            }
        }
    }
    let supports: Vec<SimpleLinearSet> = f.summands.iter().map(|s| s.support.clone()).collect();
    let (r, _) = semilin::max_overlap(&supports)?;
    let status = if disjoint {
        Ambiguity::Unambiguous
    } else if equal_or_disjoint {
        Ambiguity::TriviallyAmbiguous
    } else {
        Ambiguity::Ambiguous
    };
    Ok((status, r))
}

/// Merges summands with equal support and constants, dropping zero ones.
fn merge_like(summands: Vec<SkewGeometric>) -> Vec<SkewGeometric> {
    let mut merged: std::collections::BTreeMap<(SimpleLinearSet, Vec<Rat>), Rat> = Default::default();
    for s in summands {
        *merged.entry((s.support, s.constants)).or_insert_with(Rat::zero) += s.c0;
    }
    merged
        .into_iter()
        .filter(|(_, c0)| !c0.is_zero())
        .map(|((support, constants), c0)| SkewGeometric::from_parts(support, c0, constants))
        .collect()
}

/// Refines shared supports until no two summands on one support have
/// constants differing by sign on a common period. The series is unchanged;
/// summands that cancel are dropped.
pub fn torsion_normalize(f: &SkewGeomSum) -> Result<SkewGeomSum> {
    let mut summands = merge_like(f.summands.clone());
    for _ in 0..TORSION_BUDGET {
        let mut hit = None;
        'search: for (i, a) in summands.iter().enumerate() {
            for b in &summands[i + 1..] {
                if a.support != b.support {
                    continue;
                }
                for (k, (ca, cb)) in a.constants.iter().zip(&b.constants).enumerate() {
                    if let Some(n) = torsion_quotient(ca, cb) {
                        if n > 1 {
                            hit = Some((a.support.clone(), k, n));
                            break 'search;
                        }
                    }
                }
            }
        }
        let Some((support, k, n)) = hit else {
            let mut out = SkewGeomSum::new(f.dim, summands);
            out.status = classify_ambiguity(&out)?.0;
            return Ok(out);
        };
        let mut idx = vec![1u32; support.rank()];
        idx[k] = n;
        let cosets = semilin::coset_refine(&support, &idx)?;
        let mut next = Vec::new();
        for s in summands {
            if s.support == support {
                for c in &cosets {
                    next.push(restrict_to(&s, c)?);
                }
            } else {
                next.push(s);
            }
        }
        summands = merge_like(next);
    }
    Err(Error::capability(format!("torsion refinement exceeded {TORSION_BUDGET} rounds")))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupVerdict {
    Polya,
    Bezivin { r_eff: usize, within_r: Option<bool> },
    Fail { witness: Rat },
}

impl fmt::Display for GroupVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupVerdict::Polya => f.write_str("polya"),
            GroupVerdict::Bezivin { r_eff, .. } => write!(f, "bezivin({r_eff})"),
            GroupVerdict::Fail { witness } => write!(f, "fail({})", fmt_rational(witness)),
        }
    }
}

/// Checks every constant against `G` and reads off Pólya/Bézivin.
pub fn certify_group(f: &SkewGeomSum, g: &GroupSpec, r: Option<usize>) -> Result<GroupVerdict> {
    for s in &f.summands {
        let constants = std::iter::once(&s.c0).filter(|c| !c.is_zero()).chain(&s.constants);
        for c in constants {
            if group_member(c, g)?.is_none() {
                return Ok(GroupVerdict::Fail { witness: c.clone() });
            }
        }
    }
    let (status, r_eff) = classify_ambiguity(f)?;
    if status == Ambiguity::Unambiguous {
        return Ok(GroupVerdict::Polya);
    }
    Ok(GroupVerdict::Bezivin {
        r_eff,
        within_r: r.map(|r| r_eff <= r),
    })
}

/// Summandwise reciprocal constants; exact for unambiguous sums only.
pub fn subinverse_unambiguous(f: &SkewGeomSum) -> Result<SkewGeomSum> {
    let status = match f.status {
        Ambiguity::Unknown => classify_ambiguity(f)?.0,
        s => s,
    };
    if status != Ambiguity::Unambiguous {
        return Err(Error::input(format!(
            "sub-inverse needs an unambiguous sum, got {}",
            status.as_str()
        )));
    }
    let mut out = Vec::with_capacity(f.summands.len());
    for s in &f.summands {
        if s.c0.is_zero() {
            return Err(Error::input("sub-inverse needs nonzero leading constants"));
        }
        out.push(SkewGeometric::from_parts(
            s.support.clone(),
            s.c0.recip(),
            s.constants.iter().map(|c| c.recip()).collect(),
        ));
    }
    let mut sum = SkewGeomSum::new(f.dim, out);
    sum.status = Ambiguity::Unambiguous;
    Ok(sum)
}

/// Summands of a piece whose formula has constant polynomials; `None`
/// otherwise.
pub fn from_piece(piece: &PolyExpPiece) -> Option<Vec<SkewGeometric>> {
    piece
        .formula
        .terms()
        .iter()
        .map(|(beta, b)| {
            b.is_constant()
                .then(|| SkewGeometric::from_parts(piece.set.clone(), b.constant_term(), beta.clone()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{rat, ratio};
    use proptest::prelude::*;
    use crate::oracle::{expand_rational, expand_sum, hadamard_product, hadamard_subinverse, compare, Truncation};

    fn sg(c0: i64, u0: &[i64], f: &[(i64, &[i64])]) -> SkewGeometric {
        SkewGeometric::new(rat(c0), u0.to_vec(), f.iter().map(|(c, e)| (rat(*c), e.to_vec())).collect()).unwrap()
    }

    fn sls(t: &str) -> SimpleLinearSet {
        SimpleLinearSet::parse(t).unwrap()
    }

    fn catalan() -> SkewGeomSum {
        SkewGeomSum::new(
            2,
            vec![
                sg(1, &[0, 0], &[(3, &[1, 0]), (1, &[0, 1])]),
                sg(-1, &[0, 0], &[(1, &[1, 0]), (2, &[0, 1])]),
                sg(-1, &[0, 0], &[(1, &[1, 0]), (1, &[0, 1])]),
            ],
        )
    }

    #[test]
    fn indicators() {
        let s = indicator_of(&sls("1,2 ; 1,0"));
        assert_eq!(s.to_rational().to_string(), "x1*x2^2/(1-x1)");
        assert_eq!(indicator_of(&sls("0,0 ; 1,1")).to_rational().to_string(), "1/(1-x1*x2)");
        assert_eq!(indicator_of(&sls("2,3")).to_rational().to_string(), "x1^2*x2^3");
    }

    #[test]
    fn coefficients() {
        let f = sg(6, &[1, 0], &[(2, &[1, 1]), (3, &[0, 1])]);
        assert_eq!(f.coefficient_at(&[3, 4]), rat(216));
        assert_eq!(f.coefficient_at(&[0, 4]), rat(0));
        assert_eq!(sg(5, &[2, 0], &[]).coefficient_at(&[2, 0]), rat(5));
        let t = Truncation::total(12);
        let s = expand_rational(&f.to_rational(), &t);
        for n in t.points(2) {
            assert_eq!(f.coefficient_at(&n), s.coeff(&n));
        }
    }

    #[test]
    fn restriction() {
        let f = sg(1, &[0, 0], &[(2, &[1, 0]), (3, &[0, 1])]);
        let r = restrict_to(&f, &sls("0,0 ; 1,1")).unwrap();
        assert_eq!(r, sg(1, &[0, 0], &[(6, &[1, 1])]));
        let t = Truncation::total(10);
        let ind = expand_rational(&indicator_of(&sls("0,0 ; 1,1")).to_rational(), &t);
        assert!(compare(&expand_rational(&r.to_rational(), &t), &hadamard_product(&expand_rational(&f.to_rational(), &t), &ind)).is_none());
        assert_eq!(restrict_to(&f, f.support()).unwrap(), f);
        let p = restrict_to(&f, &sls("2,1")).unwrap();
        assert_eq!(p, SkewGeometric::new(f.coefficient_at(&[2, 1]), vec![2, 1], vec![]).unwrap());
        assert!(restrict_to(&sg(1, &[0, 0], &[(2, &[1, 1])]), &sls("0,0 ; 1,0")).is_err());
    }

    #[test]
    fn ambiguity() {
        let sec3 = SkewGeomSum::new(
            2,
            vec![
                sg(1, &[0, 0], &[(2, &[1, 1])]),
                sg(1, &[0, 0], &[(3, &[1, 1])]),
                sg(1, &[0, 1], &[(3, &[1, 1]), (5, &[0, 1])]),
                sg(1, &[1, 0], &[(1, &[1, 1]), (1, &[1, 0])]),
            ],
        );
        assert_eq!(classify_ambiguity(&sec3).unwrap(), (Ambiguity::TriviallyAmbiguous, 2));
        assert_eq!(classify_ambiguity(&catalan()).unwrap(), (Ambiguity::TriviallyAmbiguous, 3));
        let one = SkewGeomSum::new(2, vec![sg(1, &[0, 0], &[(2, &[1, 1])])]);
        assert_eq!(classify_ambiguity(&one).unwrap(), (Ambiguity::Unambiguous, 1));
        let overlapping = SkewGeomSum::new(1, vec![sg(1, &[0], &[(1, &[1])]), sg(1, &[0], &[(1, &[2])])]);
        assert_eq!(classify_ambiguity(&overlapping).unwrap().0, Ambiguity::Ambiguous);
    }

    #[test]
    fn torsion_examples() {
        let f = SkewGeomSum::new(1, vec![sg(1, &[0], &[(2, &[1])]), sg(1, &[0], &[(-2, &[1])])]);
        let n = torsion_normalize(&f).unwrap();
        assert_eq!(n.summands, vec![sg(2, &[0], &[(4, &[2])])]);
        let t = Truncation::total(10);
        assert!(compare(&expand_sum(&to_rational(&f), 1, &t), &expand_sum(&to_rational(&n), 1, &t)).is_none());
        let c = catalan();
        assert_eq!(torsion_normalize(&c).unwrap().summands, c.summands);
        let one = SkewGeomSum::new(2, vec![sg(1, &[0, 0], &[(2, &[1, 1])])]);
        assert_eq!(torsion_normalize(&one).unwrap().summands, one.summands);
    }

    #[test]
    fn group_certification() {
        let g = GroupSpec::parse("2,3").unwrap();
        let f = SkewGeomSum::new(2, vec![sg(1, &[0, 0], &[(2, &[1, 0]), (3, &[0, 1])])]);
        assert_eq!(certify_group(&f, &g, None).unwrap(), GroupVerdict::Polya);
        let g3 = GroupSpec::parse("-1,2,3").unwrap();
        assert_eq!(
            certify_group(&catalan(), &g3, Some(3)).unwrap(),
            GroupVerdict::Bezivin {
                r_eff: 3,
                within_r: Some(true)
            }
        );
        let f = SkewGeomSum::new(1, vec![sg(1, &[0], &[(5, &[1])])]);
        assert_eq!(certify_group(&f, &g, None).unwrap(), GroupVerdict::Fail { witness: rat(5) });
    }

    #[test]
    fn subinverse() {
        let t = Truncation::total(10);
        let f = SkewGeomSum::new(2, vec![sg(1, &[0, 0], &[(6, &[1, 1])])]);
        let inv = subinverse_unambiguous(&f).unwrap();
        let expect = SkewGeometric::new(rat(1), vec![0, 0], vec![(ratio(1, 6), vec![1, 1])]).unwrap();
        assert_eq!(inv.summands, vec![expect]);
        assert_eq!(
            expand_sum(&to_rational(&inv), 2, &t),
            hadamard_subinverse(&expand_sum(&to_rational(&f), 2, &t))
        );
        let ind = SkewGeomSum::new(2, vec![indicator_of(&sls("1,0 ; 1,1"))]);
        assert_eq!(subinverse_unambiguous(&ind).unwrap().summands, ind.summands);
        assert_eq!(subinverse_unambiguous(&inv).unwrap().summands, f.summands);
        assert!(subinverse_unambiguous(&catalan()).is_err());
    }

    fn arb_series() -> impl Strategy<Value = SkewGeometric> {
        (1usize..=3).prop_flat_map(|d| {
            let e = prop::collection::vec(0i64..3, d);
            let c = prop::sample::select(vec![-3i64, -2, -1, 1, 2, 3, 5]);
            (
                prop::collection::vec(0i64..3, d),
                prop::collection::vec((c, e), 0..=3),
                prop::sample::select(vec![1i64, -1, 2, 3]),
            )
        })
        .prop_filter_map("independent exponents", |(u0, fs, c0)| {
            SkewGeometric::new(rat(c0), u0, fs.into_iter().map(|(c, e)| (rat(c), e)).collect()).ok()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn coefficient_matches_oracle(f in arb_series()) {
            let t = Truncation::total(12);
            let s = expand_rational(&f.to_rational(), &t);
            for n in t.points(f.dim()) {
                prop_assert_eq!(f.coefficient_at(&n), s.coeff(&n));
            }
        }

        #[test]
        fn torsion_preserves_series(cs in prop::collection::vec(prop::sample::select(vec![-2i64, 2, -3, 3]), 1..4)) {
            let f = SkewGeomSum::new(1, cs.iter().map(|c| sg(1, &[0], &[(*c, &[1])])).collect());
            let n = torsion_normalize(&f).unwrap();
            let t = Truncation::total(10);
            prop_assert!(compare(&expand_sum(&to_rational(&f), 1, &t), &expand_sum(&to_rational(&n), 1, &t)).is_none());
            for (i, a) in n.summands.iter().enumerate() {
                for b in &n.summands[i + 1..] {
                    if a.support() == b.support() {
                        for ((ca, _), (cb, _)) in a.factors().iter().zip(b.factors().iter()) {
                            prop_assert!(matches!(torsion_quotient(ca, cb), None | Some(1)));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let c = SkewGeomSum::classified(2, catalan().summands).unwrap();
        assert_eq!(SkewGeomSum::from_json(2, &c.to_json()).unwrap(), c);
    }
}
