//! Exact dense integer linear algebra over arbitrary-precision integers.
//!
//! Everything here is pure and exact: Smith normal form with its two
//! unimodular transforms, rank, saturated integer kernels and determinants.

use std::fmt;
use std::ops::Mul;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("expected {expected} entries for a {rows}x{cols} matrix, got {got}")]
    EntryCount {
        rows: usize,
        cols: usize,
        expected: usize,
        got: usize,
    },
    #[error("row {row} has length {got}, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        got: usize,
    },
}

/// Dense row-major matrix of arbitrary-precision integers.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntegerMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<BigInt>,
}

impl IntegerMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<BigInt>) -> Result<Self, ShapeError> {
        if entries.len() != rows * cols {
            return Err(ShapeError::EntryCount {
                rows,
                cols,
                expected: rows * cols,
                got: entries.len(),
            });
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![BigInt::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.entries[i * n + i] = BigInt::one();
        }
        m
    }

    /// Builds a matrix from a list of rows, all of which must have `cols` entries.
    pub fn from_rows(cols: usize, rows: Vec<Vec<BigInt>>) -> Result<Self, ShapeError> {
        let n_rows = rows.len();
        let mut entries = Vec::with_capacity(n_rows * cols);
        for (r, row) in rows.into_iter().enumerate() {
            if row.len() != cols {
                return Err(ShapeError::RaggedRow {
                    row: r,
                    expected: cols,
                    got: row.len(),
                });
            }
            entries.extend(row);
        }
        Ok(Self {
            rows: n_rows,
            cols,
            entries,
        })
    }

    /// Convenience constructor for small literal matrices.
    ///
    /// Panics if `values.len() != rows * cols`.
    pub fn from_i64(rows: usize, cols: usize, values: &[i64]) -> Self {
        assert_eq!(values.len(), rows * cols, "entry count mismatch");
        Self {
            rows,
            cols,
            entries: values.iter().map(|&x| BigInt::from(x)).collect(),
        }
    }

    pub fn diagonal(values: &[BigInt]) -> Self {
        let n = values.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in values.iter().enumerate() {
            m.entries[i * n + i] = d.clone();
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entries(&self) -> &[BigInt] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: BigInt) {
        self.entries[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<BigInt> {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    pub fn row_vecs(&self) -> Vec<Vec<BigInt>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    pub fn mul_vec(&self, x: &[BigInt]) -> Vec<BigInt> {
        assert_eq!(x.len(), self.cols, "vector length mismatch");
        (0..self.rows)
            .map(|i| dot(self.row(i), x))
            .collect()
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(cols: usize, blocks: &[IntegerMatrix]) -> Self {
        let mut entries = Vec::new();
        let mut rows = 0;
        for b in blocks {
            assert_eq!(b.cols, cols, "vstack column mismatch");
            rows += b.rows;
            entries.extend(b.entries.iter().cloned());
        }
        Self {
            rows,
            cols,
            entries,
        }
    }

    /// Determinant by fraction-free (Bareiss) elimination. `None` if not square.
    pub fn determinant(&self) -> Option<BigInt> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        if n == 0 {
            return Some(BigInt::one());
        }
        let mut a = self.row_vecs();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&i| !a[i][k].is_zero()) {
                    Some(i) => {
                        a.swap(i, k);
                        sign = -sign;
                    }
                    None => return Some(BigInt::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    a[i][j] = num / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        Some(sign * &a[n - 1][n - 1])
    }

    pub fn rank(&self) -> usize {
        rank_and_kernel(self).0
    }
}

impl fmt::Debug for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntegerMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, "; ")?;
            }
            let row: Vec<String> = self.row(i).iter().map(ToString::to_string).collect();
            write!(f, "{}", row.join(" "))?;
        }
        write!(f, "]")
    }
}

impl Mul for &IntegerMatrix {
    type Output = IntegerMatrix;

    fn mul(self, rhs: &IntegerMatrix) -> IntegerMatrix {
        assert_eq!(self.cols, rhs.rows, "inner dimension mismatch");
        let mut out = IntegerMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(k, j);
                    if !b.is_zero() {
                        out.entries[i * rhs.cols + j] += a * b;
                    }
                }
            }
        }
        out
    }
}

pub fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Result of [`smith_normal_form`]: `left · M · right = diagonal`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmithDecomposition {
    pub left: IntegerMatrix,
    pub diagonal: IntegerMatrix,
    pub right: IntegerMatrix,
    pub rank: usize,
    /// Positive, each dividing the next.
    pub elementary_divisors: Vec<BigInt>,
}

// Working state: the matrix being reduced plus the accumulated transforms.
struct Reduction {
    a: Vec<Vec<BigInt>>,
    u: Vec<Vec<BigInt>>,
    v: Vec<Vec<BigInt>>,
}

impl Reduction {
    fn swap_rows(&mut self, i: usize, j: usize) {
        self.a.swap(i, j);
        self.u.swap(i, j);
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        for row in self.a.iter_mut().chain(self.v.iter_mut()) {
            row.swap(i, j);
        }
    }

    /// row_dst -= q * row_src
    fn sub_row(&mut self, dst: usize, src: usize, q: &BigInt) {
        for m in [&mut self.a, &mut self.u] {
            let (s, d) = pick_two(m, src, dst);
            for (x, y) in d.iter_mut().zip(s.iter()) {
                *x -= q * y;
            }
        }
    }

    /// col_dst -= q * col_src
    fn sub_col(&mut self, dst: usize, src: usize, q: &BigInt) {
        for row in self.a.iter_mut().chain(self.v.iter_mut()) {
            let delta = q * &row[src];
            row[dst] -= delta;
        }
    }

    /// (row_i, row_j) <- (x·row_i + y·row_j, p·row_i + q·row_j)
    fn combine_rows(&mut self, i: usize, j: usize, [x, y, p, q]: [BigInt; 4]) {
        for m in [&mut self.a, &mut self.u] {
            let (ri, rj) = (m[i].clone(), m[j].clone());
            for (k, (a, b)) in ri.iter().zip(&rj).enumerate() {
                m[i][k] = &x * a + &y * b;
                m[j][k] = &p * a + &q * b;
            }
        }
    }

    /// (col_i, col_j) <- (x·col_i + y·col_j, p·col_i + q·col_j)
    fn combine_cols(&mut self, i: usize, j: usize, [x, y, p, q]: [BigInt; 4]) {
        for row in self.a.iter_mut().chain(self.v.iter_mut()) {
            let (a, b) = (row[i].clone(), row[j].clone());
            row[i] = &x * &a + &y * &b;
            row[j] = &p * &a + &q * &b;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for x in self.a[i].iter_mut().chain(self.u[i].iter_mut()) {
            *x = -&*x;
        }
    }
}

fn pick_two<T>(v: &mut [T], src: usize, dst: usize) -> (&T, &mut T) {
    assert_ne!(src, dst);
    if src < dst {
        let (lo, hi) = v.split_at_mut(dst);
        (&lo[src], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(src);
        (&hi[0], &mut lo[dst])
    }
}

/// Unimodular `[x, y, p, q]` sending `(a, b)` to `(gcd, 0)`; a plain
/// subtraction when `a` already divides `b`.
fn bezout(a: &BigInt, b: &BigInt) -> [BigInt; 4] {
    if b.is_multiple_of(a) {
        return [BigInt::one(), BigInt::zero(), -(b / a), BigInt::one()];
    }
    let e = a.extended_gcd(b);
    [e.x, e.y, -(b / &e.gcd), a / &e.gcd]
}

fn identity_rows(n: usize) -> Vec<Vec<BigInt>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigInt::one() } else { BigInt::zero() })
                .collect()
        })
        .collect()
}

fn from_row_vecs(cols: usize, rows: Vec<Vec<BigInt>>) -> IntegerMatrix {
    IntegerMatrix::from_rows(cols, rows).expect("rectangular by construction")
}

/// Smith normal form with transforms, by pivoting on the entry of least
/// absolute value and extended-gcd row/column steps.
pub fn smith_normal_form(m: &IntegerMatrix) -> SmithDecomposition {
    let (rows, cols) = (m.rows, m.cols);
    let mut st = Reduction {
        a: m.row_vecs(),
        u: identity_rows(rows),
        v: identity_rows(cols),
    };

    let mut t = 0;
    while t < rows.min(cols) {
        let Some((pi, pj)) = min_abs_nonzero(&st.a, t) else {
            break;
        };
        st.swap_rows(t, pi);
        st.swap_cols(t, pj);

        loop {
            for i in t + 1..rows {
                if !st.a[i][t].is_zero() {
                    let (a, b) = (st.a[t][t].clone(), st.a[i][t].clone());
                    st.combine_rows(t, i, bezout(&a, &b));
                }
            }
            for j in t + 1..cols {
                if !st.a[t][j].is_zero() {
                    let (a, b) = (st.a[t][t].clone(), st.a[t][j].clone());
                    st.combine_cols(t, j, bezout(&a, &b));
                }
            }
            // Clearing the row can refill the column, but only with a smaller pivot.
            if (t + 1..rows).any(|i| !st.a[i][t].is_zero()) {
                continue;
            }
            // Row and column t are clear; enforce divisibility of the rest.
            let pivot = st.a[t][t].clone();
            let offender = (t + 1..rows).find(|&i| {
                (t + 1..cols).any(|j| !st.a[i][j].is_multiple_of(&pivot))
            });
            match offender {
                Some(i) => {
                    let minus_one = -BigInt::one();
                    st.sub_row(t, i, &minus_one);
                }
                None => break,
            }
        }
        if st.a[t][t].is_negative() {
            st.negate_row(t);
        }
        t += 1;
    }

    let elementary_divisors = (0..t).map(|k| st.a[k][k].clone()).collect();
    SmithDecomposition {
        left: from_row_vecs(rows, st.u),
        diagonal: from_row_vecs(cols, st.a),
        right: from_row_vecs(cols, st.v),
        rank: t,
        elementary_divisors,
    }
}

fn min_abs_nonzero(a: &[Vec<BigInt>], t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, BigInt)> = None;
    for (i, row) in a.iter().enumerate().skip(t) {
        for (j, x) in row.iter().enumerate().skip(t) {
            if x.is_zero() {
                continue;
            }
            let mag = x.abs();
            if best.as_ref().is_none_or(|(_, _, b)| mag < *b) {
                best = Some((i, j, mag));
            }
        }
    }
    best.map(|(i, j, _)| (i, j))
}

/// Rank and a basis of the saturated kernel `{x ∈ ℤ^cols : Mx = 0}`.
///
/// Computed by unimodular column reduction to echelon form, independently of
/// [`smith_normal_form`]. The basis vectors are the trailing columns of the
/// accumulated unimodular transform, so they extend to a basis of `ℤ^cols`.
pub fn rank_and_kernel(m: &IntegerMatrix) -> (usize, Vec<Vec<BigInt>>) {
    let (rows, cols) = (m.rows, m.cols);
    let mut st = Reduction {
        a: m.row_vecs(),
        u: Vec::new(),
        v: identity_rows(cols),
    };

    let mut p = 0;
    for r in 0..rows {
        if p == cols {
            break;
        }
        loop {
            let pivot = (p..cols)
                .filter(|&j| !st.a[r][j].is_zero())
                .min_by(|&x, &y| st.a[r][x].abs().cmp(&st.a[r][y].abs()));
            let Some(j) = pivot else { break };
            st.swap_cols(p, j);
            let mut clear = true;
            for j in p + 1..cols {
                if st.a[r][j].is_zero() {
                    continue;
                }
                let q = &st.a[r][j] / &st.a[r][p];
                st.sub_col(j, p, &q);
                clear &= st.a[r][j].is_zero();
            }
            if clear {
                p += 1;
                break;
            }
        }
    }

    let kernel = (p..cols)
        .map(|j| {
            let mut x: Vec<BigInt> = st.v.iter().map(|row| row[j].clone()).collect();
            if x.iter().find(|e| !e.is_zero()).is_some_and(Signed::is_negative) {
                x.iter_mut().for_each(|e| *e = -&*e);
            }
            x
        })
        .collect();
    (p, kernel)
}

/// gcd of all entries (zero for the zero vector).
pub fn content(v: &[BigInt]) -> BigInt {
    v.iter().fold(BigInt::zero(), |g, x| g.gcd(x))
}
