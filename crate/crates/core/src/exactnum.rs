//! Exact rationals, signed prime factorizations, and membership in finitely
//! generated subgroups of the nonzero rationals.
//!
//! A subgroup `G = <g_1, ..., g_t>` is modelled by its exponent lattice: one
//! row per prime in the joint support of the generators plus a sign row read
//! modulo 2. Membership of `g` is an integer linear system
//! `A k = v(g)` where the sign row is lifted into the integers with one
//! auxiliary variable, `s . k - 2 z = sign(g)`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::intlat::{self, IntMatrix};

pub type Int = BigInt;
pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn ratio(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// `q^k` for any integer `k`; `q` must be nonzero when `k < 0`.
pub fn rat_pow(q: &Rat, k: i64) -> Rat {
    if k >= 0 {
        num_traits::pow(q.clone(), k as usize)
    } else {
        num_traits::pow(q.recip(), (-k) as usize)
    }
}

/// Parses `a`, `-a` or `a/b` with `b > 0`.
pub fn parse_rational(text: &str) -> Result<Rat> {
    let t = text.trim();
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (t, None),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| Error::input(format!("malformed rational '{t}'")))?;
    let d: BigInt = match den {
        Some(d) => {
            if d.starts_with('-') || d.starts_with('+') {
                return Err(Error::input(format!("denominator must be positive in '{t}'")));
            }
            d.parse()
                .map_err(|_| Error::input(format!("malformed rational '{t}'")))?
        }
        None => BigInt::one(),
    };
    if d.is_zero() {
        return Err(Error::input(format!("zero denominator in '{t}'")));
    }
    Ok(Rat::new(n, d))
}

pub fn fmt_rational(q: &Rat) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Exact `n`-th root of a rational, if it exists in the rationals.
pub fn rational_root(q: &Rat, n: u32) -> Option<Rat> {
    if n == 0 {
        return None;
    }
    if n == 1 {
        return Some(q.clone());
    }
    if q.is_negative() && n % 2 == 0 {
        return None;
    }
    let num = q.numer().nth_root(n);
    let den = q.denom().nth_root(n);
    if num.pow(n) == *q.numer() && den.pow(n) == *q.denom() {
        Some(Rat::new(num, den))
    } else {
        None
    }
}

/// A nonzero rational written as `sign * prod p^e`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FactoredRational {
    pub sign: i8,
    pub factors: BTreeMap<u64, i64>,
}

impl FactoredRational {
    pub fn value(&self) -> Rat {
        let mut q = rat(self.sign as i64);
        for (&p, &e) in &self.factors {
            q *= rat_pow(&Rat::from_integer(BigInt::from(p)), e);
        }
        q
    }

    pub fn exponent(&self, p: u64) -> i64 {
        self.factors.get(&p).copied().unwrap_or(0)
    }
}

impl fmt::Display for FactoredRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", if self.sign < 0 { "-" } else { "+" })?;
        let parts: Vec<String> = self.factors.iter().map(|(p, e)| format!("{p}^{e}")).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

fn small_primes() -> &'static [u64] {
    use std::sync::OnceLock;
    static PRIMES: OnceLock<Vec<u64>> = OnceLock::new();
    PRIMES.get_or_init(|| {
        const LIMIT: usize = 1 << 16;
        let mut sieve = vec![true; LIMIT + 1];
        sieve[0] = false;
        sieve[1] = false;
        let mut i = 2;
        while i * i <= LIMIT {
            if sieve[i] {
                let mut j = i * i;
                while j <= LIMIT {
                    sieve[j] = false;
                    j += i;
                }
            }
            i += 1;
        }
        (2..=LIMIT).filter(|&k| sieve[k]).map(|k| k as u64).collect()
    })
}

fn factor_u64(mut n: u64, out: &mut BTreeMap<u64, i64>, sign: i64) {
    for &p in small_primes() {
        if p.saturating_mul(p) > n {
            break;
        }
        while n % p == 0 {
            *out.entry(p).or_insert(0) += sign;
            n /= p;
        }
    }
    // past the sieve: 6k +- 1 wheel
    let mut p = (*small_primes().last().unwrap() / 6 + 1) * 6 - 1;
    while (p as u128) * (p as u128) <= n as u128 {
        for q in [p, p + 2] {
            while n % q == 0 {
                *out.entry(q).or_insert(0) += sign;
                n /= q;
            }
        }
        p += 6;
    }
    if n > 1 {
        *out.entry(n).or_insert(0) += sign;
    }
}

/// Signed prime factorization by trial division.
///
/// Numerator and denominator must each fit in 64 bits after reduction.
pub fn factor_rational(q: &Rat) -> Result<FactoredRational> {
    if q.is_zero() {
        return Err(Error::input("cannot factor zero"));
    }
    let too_big = || Error::capability(format!("{} exceeds 2^64 factorization range", fmt_rational(q)));
    let num = q.numer().abs().to_u64().ok_or_else(too_big)?;
    let den = q.denom().to_u64().ok_or_else(too_big)?;
    let mut factors = BTreeMap::new();
    factor_u64(num, &mut factors, 1);
    factor_u64(den, &mut factors, -1);
    factors.retain(|_, e| *e != 0);
    Ok(FactoredRational {
        sign: if q.is_negative() { -1 } else { 1 },
        factors,
    })
}

/// Factorization of `q` over `primes`, or `None` when another prime divides
/// `q`. Works at any size.
fn factor_over(q: &Rat, primes: &[u64]) -> Option<FactoredRational> {
    if q.is_zero() {
        return None;
    }
    let mut factors = BTreeMap::new();
    let mut num = q.numer().abs();
    let mut den = q.denom().clone();
    for &p in primes {
        let bp = BigInt::from(p);
        for (part, sign) in [(&mut num, 1), (&mut den, -1)] {
            while (&*part % &bp).is_zero() {
                *part /= &bp;
                *factors.entry(p).or_insert(0) += sign;
            }
        }
    }
    if !num.is_one() || !den.is_one() {
        return None;
    }
    factors.retain(|_, e| *e != 0);
    Some(FactoredRational {
        sign: if q.is_negative() { -1 } else { 1 },
        factors,
    })
}

/// A finitely generated subgroup of the nonzero rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupSpec {
    generators: Vec<Rat>,
    primes: Vec<u64>,
    lattice: IntMatrix,
}

impl GroupSpec {
    pub fn new(generators: Vec<Rat>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::input("group needs at least one generator"));
        }
        let factored = generators
            .iter()
            .map(factor_rational)
            .collect::<Result<Vec<_>>>()?;
        let mut primes: Vec<u64> = factored.iter().flat_map(|f| f.factors.keys().copied()).collect();
        primes.sort_unstable();
        primes.dedup();
        let t = generators.len();
        let mut lattice = IntMatrix::zeros(primes.len() + 1, t);
        for (col, f) in factored.iter().enumerate() {
            for (row, &p) in primes.iter().enumerate() {
                lattice.set(row, col, BigInt::from(f.exponent(p)));
            }
            lattice.set(primes.len(), col, BigInt::from(if f.sign < 0 { 1 } else { 0 }));
        }
        Ok(GroupSpec {
            generators,
            primes,
            lattice,
        })
    }

    /// Parses the CLI form `"g1,g2,..."`.
    pub fn parse(text: &str) -> Result<Self> {
        let gens = text
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(parse_rational)
            .collect::<Result<Vec<_>>>()?;
        GroupSpec::new(gens)
    }

    pub fn generators(&self) -> &[Rat] {
        &self.generators
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    /// Exponent matrix: one column per generator, rows are primes then sign.
    pub fn lattice(&self) -> &IntMatrix {
        &self.lattice
    }

    fn reconstruct(&self, cert: &[Int]) -> Rat {
        let mut q = rat(1);
        for (g, k) in self.generators.iter().zip(cert) {
            q *= rat_pow(g, k.to_i64().expect("certificate exponent fits i64"));
        }
        q
    }
}

impl fmt::Display for GroupSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let gens: Vec<String> = self.generators.iter().map(fmt_rational).collect();
        write!(f, "<{}>", gens.join(","))
    }
}

/// Exponents `k` with `prod gen_i^k_i = g`, or `None` when `g` is not in the group.
pub fn group_member(g: &Rat, group: &GroupSpec) -> Result<Option<Vec<Int>>> {
    if g.is_zero() {
        return Err(Error::input("zero is not in any group of units"));
    }
    let Some(fg) = factor_over(g, &group.primes) else {
        return Ok(None);
    };
    let t = group.generators.len();
    let np = group.primes.len();
    // unknowns k_1..k_t and the sign carry z
    let mut a = IntMatrix::zeros(np + 1, t + 1);
    let mut b = Vec::with_capacity(np + 1);
    for (row, &p) in group.primes.iter().enumerate() {
        for col in 0..t {
            a.set(row, col, group.lattice.get(row, col).clone());
        }
        b.push(BigInt::from(fg.exponent(p)));
    }
    for col in 0..t {
        a.set(np, col, group.lattice.get(np, col).clone());
    }
    a.set(np, t, BigInt::from(-2));
    b.push(BigInt::from(if fg.sign < 0 { 1 } else { 0 }));
    let Some(mut sol) = intlat::solve_integer(&a, &b) else {
        return Ok(None);
    };
    sol.truncate(t);
    debug_assert_eq!(group.reconstruct(&sol), *g);
    Ok(Some(sol))
}

/// Minimal `N >= 1` with `c^N` in the group, or `None` if no power lands there.
///
/// Existence is decided by a rational span test on the prime exponents (even
/// powers clear the sign). The minimal `N` divides twice the product of the
/// Hermite pivots of the generator lattice, so only divisors of that bound
/// are tried.
pub fn root_power_member(c: &Rat, group: &GroupSpec) -> Result<Option<u64>> {
    if c.is_zero() {
        return Err(Error::input("zero is not in any group of units"));
    }
    let Some(fc) = factor_over(c, &group.primes) else {
        return Ok(None);
    };
    let np = group.primes.len();
    let t = group.generators.len();
    let mut prime_part = IntMatrix::zeros(np, t);
    for r in 0..np {
        for col in 0..t {
            prime_part.set(r, col, group.lattice.get(r, col).clone());
        }
    }
    let target: Vec<Int> = group.primes.iter().map(|&p| BigInt::from(fc.exponent(p))).collect();
    let rank = intlat::rank(&prime_part);
    let mut augmented = IntMatrix::zeros(np, t + 1);
    for r in 0..np {
        for col in 0..t {
            augmented.set(r, col, prime_part.get(r, col).clone());
        }
        augmented.set(r, t, target[r].clone());
    }
    if intlat::rank(&augmented) != rank {
        return Ok(None);
    }
    // rows of the HNF of the generator vectors (as rows)
    let h = intlat::hnf(&prime_part.transpose()).h;
    let mut bound = BigInt::from(2);
    for row in 0..h.rows() {
        if let Some(col) = (0..h.cols()).find(|&col| !h.get(row, col).is_zero()) {
            bound *= h.get(row, col).abs();
        }
    }
    let bound = bound
        .to_u64()
        .ok_or_else(|| Error::capability("root-power search bound exceeds 2^64"))?;
    let mut divisors: Vec<u64> = Vec::new();
    let mut i = 1u64;
    while i * i <= bound {
        if bound % i == 0 {
            divisors.push(i);
            if i != bound / i {
                divisors.push(bound / i);
            }
        }
        i += 1;
    }
    divisors.sort_unstable();
    for n in divisors {
        let power = rat_pow(c, n as i64);
        if group_member(&power, group)?.is_some() {
            return Ok(Some(n));
        }
    }
    Err(Error::verification(format!(
        "no power of {} up to {bound} lies in {group} despite rational span test",
        fmt_rational(c)
    )))
}

/// Order of `c / c'` as a root of unity; over the rationals only 1 and 2 occur.
pub fn torsion_quotient(c: &Rat, c_prime: &Rat) -> Option<u32> {
    if c.is_zero() || c_prime.is_zero() {
        return None;
    }
    if c == c_prime {
        Some(1)
    } else if *c == -c_prime.clone() {
        Some(2)
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fr(sign: i8, fs: &[(u64, i64)]) -> FactoredRational {
        FactoredRational {
            sign,
            factors: fs.iter().copied().collect(),
        }
    }

    #[test]
    fn membership_beyond_machine_words() {
        let g = group(&[2, 3, 5]);
        let big = rat_pow(&rat(5), 40) * rat_pow(&ratio(2, 3), 30);
        assert!(group_member(&big, &g).unwrap().is_some());
        assert!(group_member(&(big * rat(7)), &g).unwrap().is_none());
        assert_eq!(root_power_member(&rat_pow(&rat(10), 30), &g).unwrap(), Some(1));
    }

    fn group(gens: &[i64]) -> GroupSpec {
        GroupSpec::new(gens.iter().map(|&g| rat(g)).collect()).unwrap()
    }

    #[test]
    fn factor_examples() {
        assert_eq!(factor_rational(&rat(12)).unwrap(), fr(1, &[(2, 2), (3, 1)]));
        assert_eq!(factor_rational(&ratio(-8, 9)).unwrap(), fr(-1, &[(2, 3), (3, -2)]));
        assert_eq!(factor_rational(&rat(1)).unwrap(), fr(1, &[]));
        assert!(matches!(factor_rational(&rat(0)), Err(Error::Input(_))));
    }

    #[test]
    fn factor_large_prime_past_sieve() {
        let p: i64 = 1_000_000_007;
        let f = factor_rational(&ratio(p * 4, 3)).unwrap();
        assert_eq!(f, fr(1, &[(2, 2), (3, -1), (p as u64, 1)]));
        assert_eq!(f.value(), ratio(p * 4, 3));
    }

    #[test]
    fn factor_rejects_beyond_64_bits() {
        let big = Rat::from_integer(BigInt::from(u64::MAX) * 3);
        assert!(matches!(factor_rational(&big), Err(Error::Capability(_))));
    }

    #[test]
    fn membership_examples() {
        let g = group(&[2, 3]);
        assert_eq!(
            group_member(&rat(12), &g).unwrap(),
            Some(vec![BigInt::from(2), BigInt::from(1)])
        );
        assert_eq!(group_member(&rat(-6), &g).unwrap(), None);
        assert_eq!(group_member(&ratio(5, 4), &g).unwrap(), None);
    }

    #[test]
    fn membership_with_sign_generator() {
        let g = group(&[-1, 2, 3]);
        let cert = group_member(&ratio(-3, 4), &g).unwrap().unwrap();
        assert_eq!(g.reconstruct(&cert), ratio(-3, 4));
        // -2 as a generator: +4 = (-2)^2 reachable, -4 is not
        let g = group(&[-2]);
        assert!(group_member(&rat(4), &g).unwrap().is_some());
        assert!(group_member(&rat(-4), &g).unwrap().is_none());
        assert!(group_member(&rat(-8), &g).unwrap().is_some());
    }

    fn brute_root_power(c: &Rat, g: &GroupSpec, upto: u64) -> Option<u64> {
        (1..=upto).find(|&n| group_member(&rat_pow(c, n as i64), g).unwrap().is_some())
    }

    #[test]
    fn root_power_examples() {
        let g144 = group(&[144]);
        assert_eq!(brute_root_power(&rat(12), &g144, 10), Some(2));
        assert_eq!(root_power_member(&rat(12), &g144).unwrap(), Some(2));
        assert_eq!(root_power_member(&rat(2), &group(&[2, 3])).unwrap(), Some(1));
        assert_eq!(root_power_member(&rat(5), &group(&[2, 3])).unwrap(), None);
        assert_eq!(root_power_member(&rat(-2), &group(&[2])).unwrap(), Some(2));
        assert_eq!(root_power_member(&rat(2), &group(&[8, 9])).unwrap(), Some(3));
        assert_eq!(root_power_member(&rat(3), &group(&[4])).unwrap(), None);
    }

    #[test]
    fn torsion_examples() {
        assert_eq!(torsion_quotient(&rat(2), &rat(2)), Some(1));
        assert_eq!(torsion_quotient(&rat(2), &rat(-2)), Some(2));
        assert_eq!(torsion_quotient(&rat(2), &rat(3)), None);
    }

    #[test]
    fn rational_parsing() {
        assert_eq!(parse_rational("-3/6").unwrap(), ratio(-1, 2));
        assert_eq!(parse_rational(" 7 ").unwrap(), rat(7));
        assert!(parse_rational("1/-2").is_err());
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
        assert_eq!(fmt_rational(&ratio(6, -4)), "-3/2");
    }

    #[test]
    fn roots() {
        assert_eq!(rational_root(&ratio(4, 9), 2), Some(ratio(2, 3)));
        assert_eq!(rational_root(&rat(-8), 3), Some(rat(-2)));
        assert_eq!(rational_root(&rat(2), 2), None);
        assert_eq!(rational_root(&rat(-4), 2), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn products_of_generators_are_members(ks in proptest::collection::vec(-4i64..=4, 3)) {
                let g = GroupSpec::new(vec![rat(-2), ratio(3, 5), rat(10)]).unwrap();
                let mut q = rat(1);
                for (gen, k) in g.generators().iter().zip(&ks) {
                    q *= rat_pow(gen, *k);
                }
                let cert = group_member(&q, &g).unwrap().expect("member");
                prop_assert_eq!(g.reconstruct(&cert), q);
            }

            #[test]
            fn absence_matches_exhaustive_search(num in 1i64..60, den in 1i64..20, neg in any::<bool>()) {
                let g = GroupSpec::new(vec![rat(4), ratio(-1, 3), rat(6)]).unwrap();
                let q = ratio(if neg { -num } else { num }, den);
                if group_member(&q, &g).unwrap().is_none() {
                    const B: i64 = 6;
                    for a in -B..=B { for b in -B..=B { for c in -B..=B {
                        let v = rat_pow(&rat(4), a) * rat_pow(&ratio(-1, 3), b) * rat_pow(&rat(6), c);
                        prop_assert_ne!(v, q.clone());
                    }}}
                }
            }

            #[test]
            fn root_power_is_minimal(num in 1i64..50, den in 1i64..10) {
                let g = GroupSpec::new(vec![rat(144), rat(-8)]).unwrap();
                let c = ratio(num, den);
                if let Some(n) = root_power_member(&c, &g).unwrap() {
                    prop_assert!(group_member(&rat_pow(&c, n as i64), &g).unwrap().is_some());
                    for m in 1..n {
                        prop_assert!(group_member(&rat_pow(&c, m as i64), &g).unwrap().is_none());
                    }
                }
            }
        }
    }
}
