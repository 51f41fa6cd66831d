//! Integer linear algebra: Hermite normal form, integer kernels, integer
//! solutions, and nonnegative solutions of linear Diophantine systems.

use std::collections::HashSet;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exactnum::Rat;

/// Default cap on the number of candidate vectors explored by [`solve_nonneg`].
pub const DEFAULT_NODE_LIMIT: usize = 1_000_000;

/// Dense integer matrix, row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            entries: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = IntMatrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    /// Builds a matrix from rows of machine integers; `cols` is needed when
    /// `rows` is empty.
    pub fn from_rows(rows: &[Vec<i64>], cols: usize) -> Self {
        let mut m = IntMatrix::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged matrix rows");
            for (j, v) in row.iter().enumerate() {
                m.set(i, j, BigInt::from(*v));
            }
        }
        m
    }

    /// Matrix whose columns are the given vectors, each of length `rows`.
    pub fn from_columns(columns: &[Vec<i64>], rows: usize) -> Self {
        let mut m = IntMatrix::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "ragged matrix columns");
            for (i, v) in col.iter().enumerate() {
                m.set(i, j, BigInt::from(*v));
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &BigInt {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: BigInt) {
        self.entries[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[BigInt] {
        &self.entries[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = IntMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let v = out.get(i, j) + a * other.get(k, j);
                    out.set(i, j, v);
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.entries.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    /// row[target] -= factor * row[source]
    fn sub_row(&mut self, target: usize, source: usize, factor: &BigInt) {
        if factor.is_zero() {
            return;
        }
        for c in 0..self.cols {
            let v = self.get(target, c) - factor * self.get(source, c);
            self.set(target, c, v);
        }
    }

    fn negate_row(&mut self, r: usize) {
        for c in 0..self.cols {
            let v = -self.get(r, c).clone();
            self.set(r, c, v);
        }
    }

    fn to_i64_rows(&self) -> Option<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.to_i64()).collect())
            .collect()
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = (0..self.rows)
            .map(|r| self.row(r).iter().map(|v| v.to_string()).collect())
            .collect();
        write!(f, "IntMatrix{rows:?}")
    }
}

/// Result of [`hnf`]: `u * a == h`, `h` in row Hermite form, and a basis of
/// the integer kernel `{x : a x = 0}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HnfResult {
    pub h: IntMatrix,
    pub u: IntMatrix,
    pub kernel: Vec<Vec<BigInt>>,
}

/// Row Hermite normal form via unimodular row operations.
///
/// Pivots are positive; entries above a pivot are reduced into `[0, pivot)`;
/// zero rows are at the bottom.
fn row_hnf(a: &IntMatrix) -> (IntMatrix, IntMatrix) {
    let mut h = a.clone();
    let mut u = IntMatrix::identity(a.rows);
    let mut pivot_row = 0;
    for col in 0..h.cols {
        if pivot_row == h.rows {
            break;
        }
        loop {
            // smallest nonzero magnitude at or below pivot_row
            let best = (pivot_row..h.rows)
                .filter(|&r| !h.get(r, col).is_zero())
                .min_by(|&x, &y| h.get(x, col).abs().cmp(&h.get(y, col).abs()));
            let Some(best) = best else { break };
            h.swap_rows(pivot_row, best);
            u.swap_rows(pivot_row, best);
            let mut done = true;
            for r in pivot_row + 1..h.rows {
                if h.get(r, col).is_zero() {
                    continue;
                }
                let q = h.get(r, col).div_floor(h.get(pivot_row, col));
                h.sub_row(r, pivot_row, &q);
                u.sub_row(r, pivot_row, &q);
                if !h.get(r, col).is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if h.get(pivot_row, col).is_zero() {
            continue;
        }
        if h.get(pivot_row, col).is_negative() {
            h.negate_row(pivot_row);
            u.negate_row(pivot_row);
        }
        let p = h.get(pivot_row, col).clone();
        for r in 0..pivot_row {
            let q = h.get(r, col).div_floor(&p);
            h.sub_row(r, pivot_row, &q);
            u.sub_row(r, pivot_row, &q);
        }
        pivot_row += 1;
    }
    (h, u)
}

fn is_zero_row(m: &IntMatrix, r: usize) -> bool {
    m.row(r).iter().all(Zero::is_zero)
}

/// Canonical row Hermite form of `a` with its transform, plus a canonical
/// integer kernel basis (itself in Hermite form).
pub fn hnf(a: &IntMatrix) -> HnfResult {
    let (h, u) = row_hnf(a);
    HnfResult {
        h,
        u,
        kernel: kernel_basis(a),
    }
}

/// Basis of `{x in Z^cols : a x = 0}`, canonicalized by Hermite form.
pub fn kernel_basis(a: &IntMatrix) -> Vec<Vec<BigInt>> {
    let (ht, ut) = row_hnf(&a.transpose());
    let raw: Vec<Vec<BigInt>> = (0..ht.rows())
        .filter(|&r| is_zero_row(&ht, r))
        .map(|r| ut.row(r).to_vec())
        .collect();
    if raw.is_empty() {
        return raw;
    }
    let mut k = IntMatrix::zeros(raw.len(), a.cols());
    for (i, row) in raw.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            k.set(i, j, v.clone());
        }
    }
    let (hk, _) = row_hnf(&k);
    (0..hk.rows())
        .filter(|&r| !is_zero_row(&hk, r))
        .map(|r| hk.row(r).to_vec())
        .collect()
}

pub fn rank(a: &IntMatrix) -> usize {
    let (h, _) = row_hnf(a);
    (0..h.rows()).filter(|&r| !is_zero_row(&h, r)).count()
}

/// Some integer solution of `a x = b`, or `None`.
///
/// Uses `U a^T = H`: with `x = U^T w` the system becomes `H^T w = b`, which
/// is solved row by row along the Hermite pivots. Deterministic.
pub fn solve_integer(a: &IntMatrix, b: &[BigInt]) -> Option<Vec<BigInt>> {
    assert_eq!(b.len(), a.rows());
    let (h, u) = row_hnf(&a.transpose());
    let mut residual = b.to_vec();
    let mut w = vec![BigInt::zero(); h.rows()];
    let mut next_col = 0;
    for r in 0..h.rows() {
        let Some(pc) = (0..h.cols()).find(|&c| !h.get(r, c).is_zero()) else {
            break;
        };
        if residual[next_col..pc].iter().any(|v| !v.is_zero()) {
            return None;
        }
        let (q, rem) = residual[pc].div_rem(h.get(r, pc));
        if !rem.is_zero() {
            return None;
        }
        for c in pc..h.cols() {
            residual[c] -= &q * h.get(r, c);
        }
        w[r] = q;
        next_col = pc + 1;
    }
    if residual.iter().any(|v| !v.is_zero()) {
        return None;
    }
    Some(u.transpose().mul_vec(&w))
}

/// Nonnegative solution set of `A x = b` as minimal solutions plus the
/// Hilbert basis of the homogeneous system.
///
/// Every solution is `m + sum c_h h` for some minimal `m` and `c_h >= 0`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct DiophantineSolution {
    pub minimal_inhomogeneous: Vec<Vec<i64>>,
    pub hilbert_basis: Vec<Vec<i64>>,
}

impl DiophantineSolution {
    pub fn is_empty(&self) -> bool {
        self.minimal_inhomogeneous.is_empty()
    }
}

pub fn solve_nonneg(a: &IntMatrix, b: &[BigInt]) -> Result<DiophantineSolution> {
    solve_nonneg_with_limit(a, b, DEFAULT_NODE_LIMIT)
}

/// Completion procedure of Contejean and Devie on `[A | -b]`.
///
/// The extra variable is capped at 1: its value-0 minimal solutions are the
/// Hilbert basis, its value-1 minimal solutions the minimal inhomogeneous
/// ones. Capping keeps completeness because every minimal solution is reached
/// through a chain of vectors below it.
pub fn solve_nonneg_with_limit(a: &IntMatrix, b: &[BigInt], node_limit: usize) -> Result<DiophantineSolution> {
    assert_eq!(b.len(), a.rows());
    let overflow = || Error::capability("Diophantine system entries exceed 64-bit range");
    let rows = a.to_i64_rows().ok_or_else(overflow)?;
    let rhs: Vec<i64> = b.iter().map(|v| v.to_i64()).collect::<Option<_>>().ok_or_else(overflow)?;
    let n = a.cols() + 1;
    let m = a.rows();
    // column images of unit vectors
    let col: Vec<Vec<i64>> = (0..n)
        .map(|j| {
            (0..m)
                .map(|i| if j < n - 1 { rows[i][j] } else { -rhs[i] })
                .collect()
        })
        .collect();

    let mut found: Vec<Vec<i64>> = Vec::new();
    let mut frontier: Vec<(Vec<i64>, Vec<i64>)> = (0..n)
        .map(|j| {
            let mut x = vec![0; n];
            x[j] = 1;
            (x, col[j].clone())
        })
        .collect();
    let mut nodes = frontier.len();
    let dominated = |x: &[i64], sols: &[Vec<i64>]| sols.iter().any(|s| s.iter().zip(x).all(|(p, q)| p <= q));

    while !frontier.is_empty() {
        let mut pending = Vec::new();
        for (x, ax) in frontier {
            if ax.iter().all(|v| *v == 0) {
                if !dominated(&x, &found) {
                    found.push(x);
                }
            } else {
                pending.push((x, ax));
            }
        }
        let mut next = Vec::new();
        let mut seen: HashSet<Vec<i64>> = HashSet::new();
        for (x, ax) in pending {
            if dominated(&x, &found) {
                continue;
            }
            for j in 0..n {
                let dot: i64 = ax.iter().zip(&col[j]).map(|(p, q)| p * q).sum();
                if dot >= 0 {
                    continue;
                }
                if j == n - 1 && x[n - 1] >= 1 {
                    continue;
                }
                let mut y = x.clone();
                y[j] += 1;
                if dominated(&y, &found) || !seen.insert(y.clone()) {
                    continue;
                }
                let ay: Vec<i64> = ax.iter().zip(&col[j]).map(|(p, q)| p + q).collect();
                next.push((y, ay));
                nodes += 1;
                if nodes > node_limit {
                    return Err(Error::capability(format!(
                        "Hilbert basis completion exceeded {node_limit} nodes"
                    )));
                }
            }
        }
        frontier = next;
    }

    let mut out = DiophantineSolution::default();
    for mut x in found {
        let last = x.pop().unwrap();
        if last == 0 {
            out.hilbert_basis.push(x);
        } else {
            out.minimal_inhomogeneous.push(x);
        }
    }
    out.hilbert_basis.sort();
    out.minimal_inhomogeneous.sort();
    Ok(out)
}

/// Rational left inverse of the `rows × s` matrix whose columns are
/// `columns`: returns `L` (`s × rows`) with `L B = I`, or `None` when the
/// columns are dependent. Only a maximal independent row subset is used.
pub fn rational_left_inverse(columns: &[Vec<i64>], rows: usize) -> Option<Vec<Vec<Rat>>> {
    let s = columns.len();
    // Gauss-Jordan on B^T augmented by the identity over the row space
    let mut work: Vec<Vec<Rat>> = (0..rows)
        .map(|r| {
            let mut line: Vec<Rat> = columns.iter().map(|c| Rat::from_integer(c[r].into())).collect();
            line.extend((0..rows).map(|k| if k == r { Rat::one() } else { Rat::zero() }));
            line
        })
        .collect();
    for col in 0..s {
        let start = col;
        let found = (start..rows).find(|&r| !work[r][col].is_zero())?;
        work.swap(start, found);
        let inv = work[start][col].recip();
        for v in work[start].iter_mut() {
            *v *= &inv;
        }
        for r in 0..rows {
            if r != start && !work[r][col].is_zero() {
                let f = work[r][col].clone();
                let pivot_line = work[start].clone();
                for (v, p) in work[r].iter_mut().zip(&pivot_line) {
                    *v -= &f * p;
                }
            }
        }
    }
    Some((0..s).map(|i| work[i][s..].to_vec()).collect())
}

#[cfg(test)]
fn to_bigints(v: &[i64]) -> Vec<BigInt> {
    v.iter().map(|&x| BigInt::from(x)).collect()
}
