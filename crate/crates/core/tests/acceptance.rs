//! Acceptance criteria, one pass/fail line each. Run with
//! `cargo test --test acceptance -- --nocapture` to see the report.

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{One, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use unitprod::exactnum::{group_member, rat, rat_pow, ratio, GroupSpec, Rat};
use unitprod::leinartas::{exact_identity, leinartas_decompose, Block, UnitProductRational};
use unitprod::oracle::{compare, expand_rational, expand_sum, hadamard_product, hadamard_subinverse, Truncation};
use unitprod::parse::parse;
use unitprod::pipeline::{analyze, AnalyzeOptions};
use unitprod::poly::Poly;
use unitprod::polyexp::{
    canonicalize, classify_structure, evaluate_at, lift_global, term_to_pieces, to_partition, PiecewisePolyExp,
    StructureVerdict,
};
use unitprod::precursive::{check_solution, evaluate, vanishing_propagate, FnSource, PRecursiveSystem, Section, UniPoly, VanishingVerdict};
use unitprod::semilin::{self, SimpleLinearSet};
use unitprod::skewgeom::{
    certify_group, indicator_of, restrict_to, subinverse_unambiguous, to_rational, GroupVerdict, SkewGeomSum,
    SkewGeometric,
};

type Outcome = Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Outcome {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Outcome {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:?}, limit {limit:?}"))
}

fn binom(n: i64, k: i64) -> Rat {
    if k < 0 || k > n {
        return Rat::zero();
    }
    let mut v = Rat::one();
    for i in 0..k {
        v = v * rat(n - i) / rat(i + 1);
    }
    v
}

fn pieces_of(terms: &[UnitProductRational], dim: usize) -> Result<PiecewisePolyExp, String> {
    let mut parts = Vec::new();
    for t in terms {
        for dt in leinartas_decompose(t).map_err(|e| e.to_string())? {
            parts.push(term_to_pieces(&dt).map_err(|e| e.to_string())?);
        }
    }
    Ok(to_partition(&canonicalize(&PiecewisePolyExp::sum(dim, parts))).0)
}

/// All points `a + Σ m_i b_i` with `m ∈ [0, mmax]^s`.
fn param_points(s: &SimpleLinearSet, mmax: i64) -> Vec<Vec<i64>> {
    let mut out = vec![s.offset().to_vec()];
    for p in s.periods() {
        let mut next = Vec::new();
        for base in &out {
            for m in 0..=mmax {
                next.push(base.iter().zip(p).map(|(x, y)| x + m * y).collect());
            }
        }
        out = next;
    }
    out
}

/// Points of `s` with total degree at most `bound`, by enumeration.
fn points_upto(s: &SimpleLinearSet, bound: i64) -> HashSet<Vec<i64>> {
    param_points(s, bound)
        .into_iter()
        .filter(|n| n.iter().sum::<i64>() <= bound)
        .collect()
}

fn random_set(rng: &mut ChaCha8Rng, d: usize, max_rank: usize) -> SimpleLinearSet {
    loop {
        let s = rng.gen_range(0..=max_rank);
        let offset: Vec<i64> = (0..d).map(|_| rng.gen_range(0..=3)).collect();
        let periods: Vec<Vec<i64>> = (0..s).map(|_| (0..d).map(|_| rng.gen_range(0..=3)).collect()).collect();
        if periods.iter().any(|p| p.iter().all(|v| *v == 0)) {
            continue;
        }
        if let Ok(set) = SimpleLinearSet::new(offset, periods) {
            return set;
        }
    }
}

fn group_constant(rng: &mut ChaCha8Rng) -> Rat {
    let mut v = Rat::one();
    for p in [2, 3, 5] {
        v *= rat_pow(&rat(p), rng.gen_range(-1..=2));
    }
    v
}

/// Unambiguous sum: cosets of one random set, constants from `pick`.
fn random_unambiguous(rng: &mut ChaCha8Rng, pick: fn(&mut ChaCha8Rng) -> Rat) -> SkewGeomSum {
    let d = rng.gen_range(1..=3);
    let base = loop {
        let s = random_set(rng, d, 3.min(d));
        if s.rank() >= 1 {
            break s;
        }
    };
    let idx: Vec<u32> = (0..base.rank()).map(|_| rng.gen_range(1..=2)).collect();
    let mut cosets = semilin::coset_refine(&base, &idx).expect("refinement");
    cosets.shuffle(rng);
    let keep = rng.gen_range(1..=cosets.len());
    let summands = cosets[..keep]
        .iter()
        .map(|c| {
            let factors = c.periods().iter().map(|p| (pick(rng), p.clone())).collect();
            SkewGeometric::new(pick(rng), c.offset().to_vec(), factors).expect("independent periods")
        })
        .collect();
    SkewGeomSum::classified(d, summands).expect("classification")
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let e = parse("1/((1-3*x1)*(1-x2)) - 1/((1-x1)*(1-2*x2)) - 1/((1-x1)*(1-x2))").map_err(|e| e.to_string())?;
    let opts = AnalyzeOptions {
        group: Some(GroupSpec::parse("-1,2,3").unwrap()),
        zero_scan: Some(30),
        ..Default::default()
    };
    let r = analyze(&e, &opts);
    ensure(r.verdict == "bezivin(3)", || format!("verdict {}", r.verdict))?;
    ensure(r.all_attested(), || format!("attestations {:?}", r.attestations))?;
    ensure(r.zeros == Some(vec![vec![1, 1], vec![2, 3]]), || format!("zeros {:?}", r.zeros))?;
    // independent scan from the closed form 3^m - 2^n - 1
    let mut zeros = Vec::new();
    for m in 0..=30i64 {
        for n in 0..=30 - m {
            if rat_pow(&rat(3), m) - rat_pow(&rat(2), n) - rat(1) == Rat::zero() {
                zeros.push(vec![m, n]);
            }
        }
    }
    ensure(r.zeros.as_ref() == Some(&zeros), || format!("closed-form zeros {zeros:?}"))?;
    within(start, Duration::from_secs(5))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let e = parse("1/(1-2*x1*x2) + 1/(1-3*x1*x2) + x2/((1-3*x1*x2)^2*(1-5*x2)) + x1/((1-x1*x2)*(1-x1))")
        .map_err(|e| e.to_string())?;
    let p = pieces_of(&e.terms, 2)?;
    let t = Truncation::total(20);
    let s = expand_sum(&e.terms, 2, &t);
    for n in t.points(2) {
        let (m, k) = (n[0], n[1]);
        let expected = if m == k {
            rat_pow(&rat(2), m) + rat_pow(&rat(3), m)
        } else if m < k {
            ratio(1, 5) * rat(m + 1) * rat_pow(&ratio(3, 5), m) * rat_pow(&rat(5), k)
        } else {
            rat(1)
        };
        let got = evaluate_at(&p, &n);
        ensure(got == s.coeff(&n) && got == expected, || format!("mismatch at {n:?}: {got}"))?;
    }
    let v = classify_structure(&p, &GroupSpec::parse("2,3,5").unwrap(), None).map_err(|e| e.to_string())?;
    match v {
        StructureVerdict::NotBezivin { piece, .. } => ensure(
            piece.set.contains(&[0, 1]) && piece.set.contains(&[2, 7]) && !piece.set.contains(&[1, 1]),
            || format!("witness piece {} is not the m<n piece", piece.set),
        )?,
        other => return Err(format!("verdict {other}")),
    }
    within(start, Duration::from_secs(10))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let r = parse("1/((1-x1)*(1-x2)*(1-x1*x2))").map_err(|e| e.to_string())?.terms.remove(0);
    let terms = leinartas_decompose(&r).map_err(|e| e.to_string())?;
    ensure(terms.iter().all(|t| t.independent_verified), || "dependent term".into())?;
    for t in &terms {
        let cols: Vec<Vec<i64>> = t.rational.blocks().iter().map(|b| b.e.clone()).collect();
        let rank = unitprod::intlat::rank(&unitprod::intlat::IntMatrix::from_columns(&cols, 2));
        ensure(rank == cols.len(), || format!("blocks of {} are dependent", t.rational))?;
    }
    let rationals: Vec<UnitProductRational> = terms.iter().map(|t| t.rational.clone()).collect();
    ensure(exact_identity(2, &[r.clone()], &rationals), || "identity fails".into())?;
    let p = pieces_of(&[r], 2)?;
    for n in 0..=15 {
        let v = evaluate_at(&p, &[n, n]);
        ensure(v == rat(n + 1), || format!("diagonal at {n}: {v}"))?;
    }
    within(start, Duration::from_secs(5))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let r = UnitProductRational::new(1, Poly::one(1), vec![Block::new(rat(2), vec![2], 1).unwrap()]).unwrap();
    let mut parts = Vec::new();
    for dt in leinartas_decompose(&r).map_err(|e| e.to_string())? {
        parts.push(term_to_pieces(&dt).map_err(|e| e.to_string())?);
    }
    let p = PiecewisePolyExp::sum(1, parts);
    let even = SimpleLinearSet::new(vec![0], vec![vec![2]]).unwrap();
    let piece = p.pieces.iter().find(|pc| pc.set == even).ok_or("no 2N piece")?;
    match lift_global(piece) {
        Ok(g) => return Err(format!("unexpected global form {g:?}")),
        Err(reason) => ensure(reason.contains("irrational root"), || format!("reason {reason:?}"))?,
    }
    let s = expand_rational(&r, &Truncation::total(20));
    for m in 0..=10 {
        let local = piece.value_at(&[2 * m]).ok_or("point off piece")?;
        ensure(local == rat_pow(&rat(2), m) && s.coeff(&[2 * m]) == local, || format!("f({})", 2 * m))?;
    }
    within(start, Duration::from_secs(1))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = GroupSpec::parse("2,3,5").unwrap();
    let t = Truncation::total(12);
    let mut flipped = 0;
    for case in 0..200 {
        let f = random_unambiguous(&mut rng, group_constant);
        let v = certify_group(&f, &g, None).map_err(|e| e.to_string())?;
        ensure(v == GroupVerdict::Polya, || format!("case {case}: {v}"))?;
        let s = expand_sum(&to_rational(&f), f.dim, &t);
        for c in s.coeffs().values() {
            ensure(group_member(c, &g).map_err(|e| e.to_string())?.is_some(), || format!("case {case}: {c} outside G"))?;
        }
        let i = rng.gen_range(0..f.summands.len());
        let victim = &f.summands[i];
        let mut factors = victim.factors();
        let mut c0 = victim.c0().clone();
        let slot = rng.gen_range(0..=factors.len());
        if slot == 0 {
            c0 = rat(7);
        } else {
            factors[slot - 1].0 = rat(7);
        }
        let mut summands = f.summands.clone();
        summands[i] = SkewGeometric::new(c0, victim.u0().to_vec(), factors).unwrap();
        let mutated = SkewGeomSum::classified(f.dim, summands).map_err(|e| e.to_string())?;
        if certify_group(&mutated, &g, None).map_err(|e| e.to_string())? == (GroupVerdict::Fail { witness: rat(7) }) {
            flipped += 1;
        }
    }
    ensure(flipped == 200, || format!("{flipped}/200 flipped"))
}

fn random_upr(rng: &mut ChaCha8Rng) -> UnitProductRational {
    loop {
        let d = rng.gen_range(1..=3);
        let mut num = Poly::zero(d);
        for _ in 0..rng.gen_range(1..=2) {
            let e: Vec<i64> = (0..d).map(|_| rng.gen_range(0..=1)).collect();
            num.add_term(e, rat(rng.gen_range(-2..=2)));
        }
        let consts = [rat(-2), rat(-1), rat(1), rat(2), rat(3), ratio(1, 2)];
        let blocks: Vec<Block> = (0..rng.gen_range(1..=3))
            .filter_map(|_| {
                let e: Vec<i64> = (0..d).map(|_| rng.gen_range(0..=2)).collect();
                Block::new(consts.choose(rng).unwrap().clone(), e, rng.gen_range(1..=2)).ok()
            })
            .collect();
        if blocks.is_empty() {
            continue;
        }
        if let Ok(r) = UnitProductRational::new(d, num, blocks) {
            return r;
        }
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let t = Truncation::total(12);
    for case in 0..100 {
        let r = random_upr(&mut rng);
        let d = r.dim();
        let p = pieces_of(&[r.clone()], d).map_err(|e| format!("case {case} ({r}): {e}"))?;
        let s = expand_rational(&r, &t);
        for n in t.points(d) {
            ensure(evaluate_at(&p, &n) == s.coeff(&n), || format!("case {case} ({r}) at {n:?}"))?;
        }
    }
    within(start, Duration::from_secs(60))
}

fn criterion_7() -> Outcome {
    const B: i64 = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..100 {
        let d = rng.gen_range(1..=3);
        let s1 = random_set(&mut rng, d, 2.min(d));
        let s2 = random_set(&mut rng, d, 2.min(d));
        let (p1, p2) = (points_upto(&s1, B), points_upto(&s2, B));

        let inter = semilin::intersect_simple(&s1, &s2).map_err(|e| e.to_string())?;
        let mut got = HashSet::new();
        for c in &inter.components {
            for n in points_upto(c, B) {
                ensure(got.insert(n), || format!("case {case}: overlapping components"))?;
            }
        }
        let want: HashSet<Vec<i64>> = p1.intersection(&p2).cloned().collect();
        ensure(got == want, || format!("case {case}: intersect {s1} {s2}"))?;

        // containment: half the instances are built inside s2
        let sub = if rng.gen_bool(0.5) && s2.rank() > 0 {
            let mu: Vec<i64> = (0..s2.rank()).map(|_| rng.gen_range(0..=1)).collect();
            let off = s2.point_at(&mu);
            let per: Vec<Vec<i64>> = (0..rng.gen_range(0..=s2.rank()))
                .map(|_| {
                    let t: Vec<i64> = (0..s2.rank()).map(|_| rng.gen_range(0..=1)).collect();
                    let p = s2.point_at(&t);
                    p.iter().zip(s2.offset()).map(|(a, b)| a - b).collect()
                })
                .collect();
            SimpleLinearSet::new(off, per).unwrap_or_else(|_| s1.clone())
        } else {
            s1.clone()
        };
        let sub_pts = param_points(&sub, B);
        let bigb = sub_pts.iter().map(|n| n.iter().sum::<i64>()).max().unwrap_or(0);
        let sup_pts = points_upto(&s2, bigb);
        let brute = sub_pts.iter().all(|n| sup_pts.contains(n));
        let cert = semilin::contains_simple(&sub, &s2);
        ensure(cert.is_some() == brute, || format!("case {case}: contains {sub} in {s2}"))?;
        if let Some(c) = cert {
            ensure(s2.point_at(&c.mu) == sub.offset(), || format!("case {case}: bad offset certificate"))?;
            for (row, per) in c.t.iter().zip(sub.periods()) {
                let img: Vec<i64> = s2.point_at(row).iter().zip(s2.offset()).map(|(a, b)| a - b).collect();
                ensure(row.iter().all(|v| *v >= 0) && &img == per, || format!("case {case}: bad period certificate"))?;
            }
        }

        let idx: Vec<u32> = (0..s1.rank()).map(|_| rng.gen_range(1..=3)).collect();
        let cosets = semilin::coset_refine(&s1, &idx).map_err(|e| e.to_string())?;
        let mut union = HashSet::new();
        for c in &cosets {
            for n in points_upto(c, B) {
                ensure(union.insert(n), || format!("case {case}: cosets overlap"))?;
            }
        }
        ensure(union == p1, || format!("case {case}: cosets of {s1} by {idx:?}"))?;

        let mut sets = vec![s1.clone(), s2.clone()];
        for _ in 0..rng.gen_range(0..=2) {
            sets.push(random_set(&mut rng, d, 2.min(d)));
        }
        let (r, which) = semilin::max_overlap(&sets).map_err(|e| e.to_string())?;
        // common points can sit well past B: {(3,1)k} meets (3,0)+(3,0)N+(2,2)N first at (18,6)
        const OVERLAP_B: i64 = 60;
        let pts: Vec<HashSet<Vec<i64>>> = sets.iter().map(|s| points_upto(s, OVERLAP_B)).collect();
        let mut best = 0;
        for n in Truncation::total(OVERLAP_B).points(d) {
            best = best.max(pts.iter().filter(|p| p.contains(&n)).count());
        }
        ensure(r == best && which.len() == r, || format!("case {case}: overlap {r} vs brute {best} for {:?} at {which:?}", sets.iter().map(ToString::to_string).collect::<Vec<_>>()))?;
    }
    Ok(())
}

fn one_dim(k: i64, rec: Vec<(i64, Vec<i64>)>, init: &[(i64, i64)]) -> PRecursiveSystem {
    PRecursiveSystem::new(
        1,
        k,
        vec![rec
            .into_iter()
            .map(|(a, q)| (vec![a], UniPoly::new(q.into_iter().map(rat).collect())))
            .collect()],
        vec![],
        init.iter().map(|(n, c)| (vec![*n], rat(*c))).collect(),
    )
    .unwrap()
}

fn shift_system(c1: i64, c2: i64) -> PRecursiveSystem {
    let q = |c: i64| UniPoly::constant(rat(c));
    PRecursiveSystem::new(
        2,
        1,
        vec![
            vec![(vec![0, 0], q(1)), (vec![1, 0], q(-c1))],
            vec![(vec![0, 0], q(1)), (vec![0, 1], q(-c2))],
        ],
        vec![],
        BTreeMap::new(),
    )
    .unwrap()
}

fn criterion_8() -> Outcome {
    let factorial = one_dim(1, vec![(0, vec![1]), (1, vec![0, -1])], &[(0, 1)]);
    let mut fact = Rat::one();
    for n in 0..=10i64 {
        if n > 0 {
            fact *= rat(n);
        }
        let v = evaluate(&factorial, &[n]).map_err(|e| e.to_string())?;
        ensure(v == fact, || format!("{n}! = {v}"))?;
    }
    let ones = one_dim(1, vec![(0, vec![1]), (1, vec![-1])], &[(0, 1)]);
    let rec = vec![
        (vec![0, 0], UniPoly::constant(rat(1))),
        (vec![1, 0], UniPoly::constant(rat(-1))),
        (vec![0, 1], UniPoly::constant(rat(-1))),
    ];
    let sections = (0..2)
        .map(|coord| Section {
            coord,
            value: 0,
            system: ones.clone(),
        })
        .collect();
    let pascal = PRecursiveSystem::new(2, 1, vec![rec.clone(), rec], sections, BTreeMap::new()).unwrap();
    for n in Truncation::total(10).points(2) {
        let v = evaluate(&pascal, &n).map_err(|e| e.to_string())?;
        ensure(v == binom(n[0] + n[1], n[0]), || format!("pascal {n:?} = {v}"))?;
    }
    let binom4 = one_dim(1, vec![(0, vec![0, 1]), (1, vec![-5, 1])], &[(0, 1)]);
    let f = FnSource(|n: &[i64]| binom(4, n[0]));
    let v = vanishing_propagate(&binom4, &f, 6, &[6], 30).map_err(|e| e.to_string())?;
    ensure(matches!(v, VanishingVerdict::Propagates { ref region, .. } if region == &vec![6]), || format!("{v:?}"))?;
    let g = FnSource(|n: &[i64]| rat_pow(&rat(2), n[0]) * rat_pow(&rat(3), n[1]));
    ensure(check_solution(&shift_system(2, 3), &g, 12).is_none(), || "2^m3^n rejected".into())?;
    match check_solution(&shift_system(2, 4), &g, 12) {
        Some((1, n)) => ensure(n == vec![1, 1], || format!("witness {n:?}")),
        other => Err(format!("perturbed system gave {other:?}")),
    }
}

fn signed_constant(rng: &mut ChaCha8Rng) -> Rat {
    let choices = [rat(1), rat(-1), rat(2), rat(-3), ratio(1, 2), ratio(5, 3), rat(6)];
    choices.choose(rng).unwrap().clone()
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let t = Truncation::total(10);
    for case in 0..50 {
        let f = random_unambiguous(&mut rng, signed_constant);
        let inv = subinverse_unambiguous(&f).map_err(|e| e.to_string())?;
        let back = subinverse_unambiguous(&inv).map_err(|e| e.to_string())?;
        ensure(back.summands == f.summands, || format!("case {case}: not an involution"))?;
        let lhs = expand_sum(&to_rational(&inv), f.dim, &t);
        let rhs = hadamard_subinverse(&expand_sum(&to_rational(&f), f.dim, &t));
        ensure(compare(&lhs, &rhs).is_none(), || format!("case {case}: sub-inverse differs"))?;
    }
    let mut done = 0;
    while done < 50 {
        let f = &random_unambiguous(&mut rng, signed_constant).summands[0];
        let supp = f.support();
        let s = supp.rank();
        let mu: Vec<i64> = (0..s).map(|_| rng.gen_range(0..=2)).collect();
        let per: Vec<Vec<i64>> = (0..rng.gen_range(0..=s))
            .map(|_| {
                let row: Vec<i64> = (0..s).map(|_| rng.gen_range(0..=2)).collect();
                supp.point_at(&row).iter().zip(supp.offset()).map(|(a, b)| a - b).collect()
            })
            .collect();
        if per.iter().any(|p: &Vec<i64>| p.iter().all(|v| *v == 0)) {
            continue;
        }
        let Ok(sub) = SimpleLinearSet::new(supp.point_at(&mu), per) else { continue };
        let r = restrict_to(f, &sub).map_err(|e| e.to_string())?;
        let d = f.dim();
        let lhs = expand_rational(&r.to_rational(), &t);
        let rhs = hadamard_product(
            &expand_rational(&f.to_rational(), &t),
            &expand_rational(&indicator_of(&sub).to_rational(), &t),
        );
        ensure(compare(&lhs, &rhs).is_none(), || format!("restriction {done} of {f} to {sub} in dim {d}"))?;
        done += 1;
    }
    Ok(())
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 Catalan series: bezivin(3), zeros {(1,1),(2,3)} to degree 30", criterion_1),
        ("2 worked example: three-case table to |n|<=20, not_bezivin on m<n", criterion_2),
        ("3 1/((1-x)(1-y)(1-xy)): independent terms, exact identity, diagonal n+1", criterion_3),
        ("4 1/(1-2x^2): no global form (irrational root), f(2m)=2^m", criterion_4),
        ("5 Polya certification on 200 random sums, 200/200 flips to fail(7)", criterion_5),
        ("6 decomposition vs oracle on 100 random fractions to |n|<=12", criterion_6),
        ("7 semilinear operations vs brute force on 100 instances", criterion_7),
        ("8 P-recursive evaluation, vanishing and solution checks", criterion_8),
        ("9 Hadamard sub-inverse and restriction round trips", criterion_9),
    ];
    let mut failures = Vec::new();
    for (name, run) in criteria {
        let start = Instant::now();
        match run() {
            Ok(()) => println!("PASS  {name}  ({:.2?})", start.elapsed()),
            Err(why) => {
                println!("FAIL  {name}: {why}");
                failures.push(name);
            }
        }
    }
    assert!(failures.is_empty(), "failed criteria: {failures:?}");
}

#[test]
fn binom_helper_is_exact() {
    assert_eq!(binom(30, 15), Rat::from(BigInt::from(155117520u64)));
    assert_eq!(binom(4, 5), Rat::zero());
}
