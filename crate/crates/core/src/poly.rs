//! Sparse multivariate polynomials over ℚ with exponents in ℤ^d.
//!
//! Negative exponents are allowed so that local-coordinate substitutions and
//! Laurent-style intermediate forms stay in one type.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::exactnum::{fmt_rational, rat_pow, Rat};

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<i64>, Rat>,
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(nvars: usize) -> Self {
        Poly::constant(nvars, Rat::one())
    }

    pub fn constant(nvars: usize, c: Rat) -> Self {
        Poly::monomial(nvars, vec![0; nvars], c)
    }

    pub fn monomial(nvars: usize, exp: Vec<i64>, c: Rat) -> Self {
        assert_eq!(exp.len(), nvars);
        let mut p = Poly::zero(nvars);
        p.add_term(exp, c);
        p
    }

    /// The variable `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        Poly::monomial(nvars, e, Rat::one())
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<i64>, Rat)>) -> Self {
        let mut p = Poly::zero(nvars);
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &BTreeMap<Vec<i64>, Rat> {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, exp: &[i64]) -> Rat {
        self.terms.get(exp).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn add_term(&mut self, exp: Vec<i64>, c: Rat) {
        assert_eq!(exp.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(exp);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        if c.is_zero() {
            return Poly::zero(self.nvars);
        }
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, v)| (e.clone(), v * c)).collect(),
        }
    }

    /// Multiply by the monomial `x^shift`.
    pub fn shift(&self, shift: &[i64]) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, v)| (e.iter().zip(shift).map(|(a, b)| a + b).collect(), v.clone()))
                .collect(),
        }
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::one(self.nvars);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(|e| e.iter().all(|v| *v == 0))
    }

    pub fn constant_term(&self) -> Rat {
        self.coeff(&vec![0; self.nvars])
    }

    pub fn has_negative_exponent(&self) -> bool {
        self.terms.keys().any(|e| e.iter().any(|v| *v < 0))
    }

    /// Largest total degree of a term (0 for the zero polynomial).
    pub fn total_degree(&self) -> i64 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Componentwise maximum exponent (zeros for the zero polynomial).
    pub fn max_exponents(&self) -> Vec<i64> {
        let mut m = vec![0; self.nvars];
        for e in self.terms.keys() {
            for (a, b) in m.iter_mut().zip(e) {
                *a = (*a).max(*b);
            }
        }
        m
    }

    /// Largest entry of any exponent vector in the support.
    pub fn max_norm(&self) -> i64 {
        self.terms.keys().flat_map(|e| e.iter().map(|v| v.abs())).max().unwrap_or(0)
    }

    pub fn degree_in(&self, i: usize) -> i64 {
        self.terms.keys().map(|e| e[i]).max().unwrap_or(0)
    }

    pub fn eval(&self, point: &[Rat]) -> Rat {
        assert_eq!(point.len(), self.nvars);
        let mut total = Rat::zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (x, k) in point.iter().zip(e) {
                if *k != 0 {
                    t *= rat_pow(x, *k);
                }
            }
            total += t;
        }
        total
    }

    pub fn eval_int(&self, point: &[i64]) -> Rat {
        let pt: Vec<Rat> = point.iter().map(|v| Rat::from_integer((*v).into())).collect();
        self.eval(&pt)
    }

    /// Substitute `x_i -> p_i` for polynomials `p_i` in a new variable set.
    /// Exponents must be nonnegative.
    pub fn compose(&self, images: &[Poly]) -> Poly {
        assert_eq!(images.len(), self.nvars);
        let target = images.first().map_or(0, |p| p.nvars);
        let mut out = Poly::zero(target);
        let mut cache: Vec<Vec<Poly>> = vec![vec![Poly::one(target)]; self.nvars];
        for (e, c) in &self.terms {
            let mut t = Poly::constant(target, c.clone());
            for (i, &k) in e.iter().enumerate() {
                assert!(k >= 0, "compose needs nonnegative exponents");
                while cache[i].len() <= k as usize {
                    let next = cache[i].last().unwrap() * &images[i];
                    cache[i].push(next);
                }
                t = &t * &cache[i][k as usize];
            }
            out = &out + &t;
        }
        out
    }

    /// Monomial change of variables `x^e -> y^(M e)` where `M` has `nvars`
    /// columns; the new dimension is the row count.
    pub fn monomial_map(&self, m: &[Vec<i64>]) -> Poly {
        let target = m.len();
        let mut out = Poly::zero(target);
        for (e, c) in &self.terms {
            let ne: Vec<i64> = m.iter().map(|row| row.iter().zip(e).map(|(a, b)| a * b).sum()).collect();
            out.add_term(ne, c.clone());
        }
        out
    }

    /// Drop every term whose total degree exceeds `bound`.
    pub fn truncate_total(&self, bound: i64) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<i64>() <= bound)
                .map(|(e, c)| (e.clone(), c.clone()))
                .collect(),
        }
    }

    /// Lexicographically largest exponent vector.
    pub fn lex_max(&self) -> Option<(&Vec<i64>, &Rat)> {
        self.terms.iter().next_back()
    }

    /// `1 - c x^e`.
    pub fn one_minus(nvars: usize, c: &Rat, e: &[i64]) -> Poly {
        let mut p = Poly::one(nvars);
        p.add_term(e.to_vec(), -c.clone());
        p
    }

    /// Rewrite with variables named `names`.
    pub fn display_with(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (idx, (e, c)) in self.terms.iter().enumerate() {
            let neg = c < &Rat::zero();
            let mag = if neg { -c.clone() } else { c.clone() };
            if idx == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mono = monomial_string(e, names);
            if mono.is_empty() {
                out.push_str(&fmt_rational(&mag));
            } else if mag.is_one() {
                out.push_str(&mono);
            } else {
                out.push_str(&fmt_rational(&mag));
                out.push('*');
                out.push_str(&mono);
            }
        }
        out
    }
}

/// `x1^2*x2` style rendering; empty for the unit monomial.
pub fn monomial_string(e: &[i64], names: &[String]) -> String {
    let parts: Vec<String> = e
        .iter()
        .zip(names)
        .filter(|(k, _)| **k != 0)
        .map(|(k, n)| if *k == 1 { n.clone() } else { format!("{n}^{k}") })
        .collect();
    parts.join("*")
}

/// Default variable names: `x`, `y`, `z` for d ≤ 3, else `x1..xd`.
pub fn default_names(d: usize) -> Vec<String> {
    if d <= 3 {
        ["x", "y", "z"][..d].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=d).map(|i| format!("x{i}")).collect()
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_with(&default_names(self.nvars)))
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Poly({self})")
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), -c.clone());
        }
        out
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = Poly::zero(self.nvars);
        for (e1, c1) in &self.terms {
            for (e2, c2) in &rhs.terms {
                let e: Vec<i64> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                out.add_term(e, c1 * c2);
            }
        }
        out
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(&-Rat::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{rat, ratio};

    #[test]
    fn arithmetic_and_eval() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = &(&x + &y) * &(&x - &y);
        assert_eq!(p, &(&x * &x) - &(&y * &y));
        assert_eq!(p.eval_int(&[3, 1]), rat(8));
        assert_eq!(p.total_degree(), 2);
        assert_eq!(Poly::one_minus(2, &rat(2), &[1, 1]).to_string(), "1 - 2*x*y");
        assert!((&p - &p).is_zero());
        assert_eq!(x.scale(&ratio(1, 2)).eval_int(&[4, 0]), rat(2));
    }

    #[test]
    fn composition() {
        // (1 + x)^2 with x -> y + 1
        let x = Poly::var(1, 0);
        let p = (&Poly::one(1) + &x).pow(2);
        let img = &Poly::var(1, 0) + &Poly::one(1);
        let q = p.compose(&[img]);
        assert_eq!(q.eval_int(&[1]), rat(9));
        let mm = Poly::var(2, 0).monomial_map(&[vec![1, 0], vec![2, 1], vec![0, 1]]);
        assert_eq!(mm, Poly::monomial(3, vec![1, 2, 0], rat(1)));
    }
}
