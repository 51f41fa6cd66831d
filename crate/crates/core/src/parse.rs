//! Parser and printer for sums of unit-product rational functions.
//!
//! ```text
//! input   := frac (('+'|'-') frac)*
//! frac    := ['-'|'+'] poly ['/' denom]
//! poly    := term | '(' term (('+'|'-') term)* ')'
//! term    := coef ['*' mono] | mono
//! denom   := dfactor {'*' dfactor} | '(' dfactor {'*' dfactor} ')'
//! dfactor := '(' '1' ('-'|'+') [coef '*'] mono ')' ['^' nat]
//! mono    := var ['^' nat] {'*' var ['^' nat]}
//! var     := 'x' nat
//! coef    := ['-'] nat ['/' nat]
//! ```

use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactnum::Rat;
use crate::leinartas::{Block, UnitProductRational};
use crate::poly::Poly;

/// 1-based source position.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalExpr {
    pub dim: usize,
    pub terms: Vec<UnitProductRational>,
    /// start of each term in the source
    pub spans: Vec<Span>,
}

impl fmt::Display for RationalExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let s = t.to_string();
            match (i, s.strip_prefix('-')) {
                (0, _) => f.write_str(&s)?,
                (_, Some(rest)) => write!(f, " - {rest}")?,
                (_, None) => write!(f, " + {s}")?,
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Num(BigInt),
    Var(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::Var(i) => write!(f, "variable x{i}"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Slash => f.write_str("'/'"),
            Tok::Caret => f.write_str("'^'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

fn err_at(span: Span, msg: impl fmt::Display) -> Error {
    Error::input(format!("{span}: {msg}"))
}

fn lex(text: &str) -> Result<Vec<(Tok, Span)>> {
    let mut out = Vec::new();
    let mut chars = text.chars().peekable();
    let (mut line, mut column) = (1, 1);
    while let Some(&ch) = chars.peek() {
        let span = Span { line, column };
        let mut advance = |ch: char| {
            if ch == '\n' {
                line += 1;
                column = 1;
            } else {
                column += 1;
            }
        };
        if ch.is_whitespace() {
            chars.next();
            advance(ch);
            continue;
        }
        if ch.is_ascii_digit() || ch == 'x' {
            chars.next();
            advance(ch);
            let mut digits = String::new();
            while let Some(&d) = chars.peek().filter(|d| d.is_ascii_digit()) {
                digits.push(d);
                chars.next();
                advance(d);
            }
            if ch == 'x' {
                let idx = digits
                    .parse::<usize>()
                    .ok()
                    .filter(|i| *i >= 1)
                    .ok_or_else(|| err_at(span, "variables are x1, x2, ..."))?;
                out.push((Tok::Var(idx), span));
            } else {
                let n: BigInt = format!("{ch}{digits}").parse().expect("digits");
                out.push((Tok::Num(n), span));
            }
            continue;
        }
        let tok = match ch {
            '+' => Tok::Plus,
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            _ => return Err(err_at(span, format!("unexpected character {ch:?}"))),
        };
        chars.next();
        advance(ch);
        out.push((tok, span));
    }
    out.push((Tok::End, Span { line, column }));
    Ok(out)
}

/// Polynomial over sparse exponent maps keyed by 1-based variable index.
type RawPoly = Vec<(Rat, Vec<(usize, i64)>)>;

struct RawFrac {
    sign: bool,
    num: RawPoly,
    blocks: Vec<(Rat, Vec<(usize, i64)>, u32)>,
    span: Span,
}

struct Parser {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    max_var: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.pos + 1).min(self.toks.len() - 1)].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, ctx: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(err_at(self.span(), format!("expected {want} {ctx}, found {}", self.peek())))
        }
    }

    fn nat(&mut self, ctx: &str) -> Result<BigInt> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(n)
            }
            t => Err(err_at(self.span(), format!("expected a number {ctx}, found {t}"))),
        }
    }

    fn small_nat(&mut self, ctx: &str) -> Result<i64> {
        let span = self.span();
        let n = self.nat(ctx)?;
        n.to_i64()
            .filter(|v| *v <= u32::MAX as i64)
            .ok_or_else(|| err_at(span, format!("{ctx} {n} is too large")))
    }

    /// `nat ['/' nat]`, consuming the slash only before a number.
    fn unsigned_coef(&mut self) -> Result<Rat> {
        let n = self.nat("")?;
        if *self.peek() == Tok::Slash && matches!(self.peek2(), Tok::Num(_)) {
            self.bump();
            let span = self.span();
            let d = self.nat("as denominator")?;
            if d.is_zero() {
                return Err(err_at(span, "division by zero"));
            }
            return Ok(Rat::new(n, d));
        }
        Ok(Rat::from_integer(n))
    }

    fn mono(&mut self) -> Result<Vec<(usize, i64)>> {
        let mut out = Vec::new();
        loop {
            let Tok::Var(i) = *self.peek() else {
                return Err(err_at(self.span(), format!("expected a variable, found {}", self.peek())));
            };
            self.bump();
            self.max_var = self.max_var.max(i);
            let mut e = 1;
            if *self.peek() == Tok::Caret {
                self.bump();
                e = self.small_nat("as exponent")?;
            }
            out.push((i, e));
            if *self.peek() == Tok::Star && matches!(self.peek2(), Tok::Var(_)) {
                self.bump();
            } else {
                return Ok(out);
            }
        }
    }

    fn term(&mut self) -> Result<(Rat, Vec<(usize, i64)>)> {
        match self.peek() {
            Tok::Num(_) => {
                let c = self.unsigned_coef()?;
                if *self.peek() == Tok::Star {
                    self.bump();
                    Ok((c, self.mono()?))
                } else {
                    Ok((c, Vec::new()))
                }
            }
            Tok::Var(_) => Ok((Rat::from_integer(1.into()), self.mono()?)),
            t => Err(err_at(self.span(), format!("expected a term, found {t}"))),
        }
    }

    fn signed_term(&mut self) -> Result<(Rat, Vec<(usize, i64)>)> {
        let neg = match self.peek() {
            Tok::Minus => {
                self.bump();
                true
            }
            Tok::Plus => {
                self.bump();
                false
            }
            _ => false,
        };
        let (c, m) = self.term()?;
        Ok((if neg { -c } else { c }, m))
    }

    fn poly(&mut self) -> Result<RawPoly> {
        if *self.peek() != Tok::LParen {
            return Ok(vec![self.term()?]);
        }
        self.bump();
        let mut out = vec![self.signed_term()?];
        while matches!(self.peek(), Tok::Plus | Tok::Minus) {
            out.push(self.signed_term()?);
        }
        self.expect(Tok::RParen, "to close the numerator")?;
        Ok(out)
    }

    fn not_unit(&self, span: Span, why: &str) -> Error {
        err_at(span, format!("denominator not unit-product: {why}"))
    }

    fn dfactor(&mut self) -> Result<(Rat, Vec<(usize, i64)>, u32)> {
        self.expect(Tok::LParen, "to open a denominator factor")?;
        let span = self.span();
        match self.peek() {
            Tok::Num(n) if *n == BigInt::from(1) && !matches!(self.peek2(), Tok::Slash | Tok::Star) => {
                self.bump();
            }
            Tok::Num(_) | Tok::Var(_) | Tok::Minus => {
                return Err(self.not_unit(span, "each factor must have constant term 1"));
            }
            t => return Err(err_at(span, format!("expected '1' in denominator factor, found {t}"))),
        }
        let span = self.span();
        let negate = match self.bump() {
            Tok::Minus => false,
            Tok::Plus => true,
            Tok::RParen => return Err(self.not_unit(span, "constant factor")),
            t => return Err(err_at(span, format!("expected '-' or '+' in denominator factor, found {t}"))),
        };
        let span = self.span();
        let (mut c, e) = match self.peek() {
            Tok::Var(_) => (Rat::from_integer(1.into()), self.mono()?),
            Tok::Num(_) | Tok::Minus => {
                let neg = *self.peek() == Tok::Minus;
                if neg {
                    self.bump();
                }
                let c = self.unsigned_coef()?;
                if *self.peek() != Tok::Star {
                    return Err(self.not_unit(self.span(), "each factor needs a monomial"));
                }
                self.bump();
                (if neg { -c } else { c }, self.mono()?)
            }
            t => return Err(err_at(span, format!("expected a coefficient or monomial, found {t}"))),
        };
        if negate {
            c = -c;
        }
        if c.is_zero() {
            return Err(self.not_unit(span, "zero coefficient"));
        }
        match self.peek() {
            Tok::RParen => {
                self.bump();
            }
            Tok::Plus | Tok::Minus => {
                return Err(self.not_unit(self.span(), "a factor must be 1 - c*monomial"));
            }
            t => return Err(err_at(self.span(), format!("expected ')' after denominator factor, found {t}"))),
        }
        let mut mult = 1;
        if *self.peek() == Tok::Caret {
            self.bump();
            let span = self.span();
            mult = self.small_nat("as multiplicity")?;
            if mult == 0 {
                return Err(err_at(span, "multiplicity must be positive"));
            }
        }
        Ok((c, e, mult as u32))
    }

    fn denom(&mut self) -> Result<Vec<(Rat, Vec<(usize, i64)>, u32)>> {
        let span = self.span();
        match (self.peek(), self.peek2()) {
            (Tok::LParen, Tok::LParen) => {
                self.bump();
                let mut out = vec![self.dfactor()?];
                while *self.peek() == Tok::Star {
                    self.bump();
                    out.push(self.dfactor()?);
                }
                self.expect(Tok::RParen, "to close the denominator")?;
                Ok(out)
            }
            (Tok::LParen, _) => {
                let mut out = vec![self.dfactor()?];
                while *self.peek() == Tok::Star {
                    self.bump();
                    out.push(self.dfactor()?);
                }
                Ok(out)
            }
            _ => Err(self.not_unit(span, "expected a product of factors (1 - c*monomial)")),
        }
    }

    fn frac(&mut self, sign: bool) -> Result<RawFrac> {
        let span = self.span();
        let num = self.poly()?;
        let mut blocks = Vec::new();
        if *self.peek() == Tok::Slash {
            self.bump();
            blocks = self.denom()?;
        }
        Ok(RawFrac { sign, num, blocks, span })
    }

    fn input(&mut self) -> Result<Vec<RawFrac>> {
        let mut sign = false;
        match self.peek() {
            Tok::Minus => {
                self.bump();
                sign = true;
            }
            Tok::Plus => {
                self.bump();
            }
            _ => {}
        }
        let mut out = vec![self.frac(sign)?];
        loop {
            match self.peek() {
                Tok::Plus | Tok::Minus => {
                    let sign = self.bump() == Tok::Minus;
                    out.push(self.frac(sign)?);
                }
                Tok::End => return Ok(out),
                t => return Err(err_at(self.span(), format!("unexpected {t}"))),
            }
        }
    }
}

fn dense(sparse: &[(usize, i64)], dim: usize) -> Vec<i64> {
    let mut e = vec![0; dim];
    for (i, k) in sparse {
        e[i - 1] += k;
    }
    e
}

/// Parses a sum of unit-product fractions in variables `x1..xd`, with `d`
/// the largest index used.
pub fn parse(text: &str) -> Result<RationalExpr> {
    parse_with_dim(text, 0)
}

/// As [`parse`] with at least `min_dim` variables.
pub fn parse_with_dim(text: &str, min_dim: usize) -> Result<RationalExpr> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        max_var: 0,
    };
    let raw = p.input()?;
    let dim = p.max_var.max(min_dim).max(1);
    let mut terms = Vec::with_capacity(raw.len());
    let mut spans = Vec::with_capacity(raw.len());
    for f in raw {
        let mut num = Poly::zero(dim);
        for (c, m) in &f.num {
            num.add_term(dense(m, dim), c.clone());
        }
        if f.sign {
            num = -&num;
        }
        let mut blocks = Vec::with_capacity(f.blocks.len());
        for (c, m, mult) in &f.blocks {
            let b = Block::new(c.clone(), dense(m, dim), *mult).map_err(|e| err_at(f.span, e))?;
            blocks.push(b);
        }
        terms.push(UnitProductRational::new(dim, num, blocks).map_err(|e| err_at(f.span, e))?);
        spans.push(f.span);
    }
    Ok(RationalExpr { dim, terms, spans })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exactnum::{rat, ratio};

    const CATALAN: &str = "1/((1-3*x1)*(1-x2)) - 1/((1-x1)*(1-2*x2)) - 1/((1-x1)*(1-x2))";

    #[test]
    fn catalan_expression() {
        let e = parse(CATALAN).unwrap();
        assert_eq!(e.dim, 2);
        assert_eq!(e.terms.len(), 3);
        assert_eq!(e.terms[1].numerator(), &Poly::constant(2, rat(-1)));
        let cs: Vec<Rat> = e.terms[0].blocks().iter().map(|b| b.c.clone()).collect();
        assert!(cs.contains(&rat(3)) && cs.contains(&rat(1)));
        assert_eq!(e.spans[1], Span { line: 1, column: 23 });
    }

    #[test]
    fn monomial_over_one_block() {
        let e = parse("x1*x2^2/(1-x1)").unwrap();
        assert_eq!(e.terms.len(), 1);
        assert_eq!(e.terms[0].numerator(), &Poly::monomial(2, vec![1, 2], rat(1)));
        assert_eq!(e.terms[0].blocks().len(), 1);
    }

    #[test]
    fn rejects_non_unit_product() {
        let err = parse("1/(1-x1-x2)").unwrap_err().to_string();
        assert!(err.contains("denominator not unit-product"), "{err}");
        assert!(err.contains("line 1, column 8"), "{err}");
        for bad in ["1/(2-x1)", "1/x1", "1/(1-3)", "1/(1-x1)^0"] {
            assert!(parse(bad).is_err(), "{bad}");
        }
        let err = parse("1/(1-x1)\n + (x1").unwrap_err().to_string();
        assert!(err.contains("line 2, column 7"), "{err}");
    }

    #[test]
    fn coefficients_and_signs() {
        let e = parse("(-1 + 1/2*x1)/((1+2*x1)^2*(1-1/3*x1*x2)) - x3").unwrap();
        assert_eq!(e.dim, 3);
        let b = e.terms[0].blocks();
        assert!(b.iter().any(|b| b.c == rat(-2) && b.mult == 2));
        assert!(b.iter().any(|b| b.c == ratio(1, 3) && b.e == vec![1, 1, 0]));
        assert_eq!(e.terms[1].numerator(), &Poly::monomial(3, vec![0, 0, 1], rat(-1)));
        let e = parse("1/(1 - -2*x1)").unwrap();
        assert_eq!(e.terms[0].blocks()[0].c, rat(-2));
    }

    #[test]
    fn print_round_trip() {
        for text in [
            CATALAN,
            "x1*x2^2/(1-x1)",
            "(-1 + 1/2*x1)/((1+2*x1)^2*(1-1/3*x1*x2)) - x3",
            "-x2/(1-x1*x2) + 3",
            "x2/(1-x1)*(1-5*x2)",
        ] {
            let e = parse(text).unwrap();
            let printed = e.to_string();
            let again = parse_with_dim(&printed, e.dim).unwrap_or_else(|err| panic!("{printed}: {err}"));
            assert_eq!(again.terms, e.terms, "{text} -> {printed}");
        }
    }
}
