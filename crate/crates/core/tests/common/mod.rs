//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use zcobs_core::arith::Prime;
use zcobs_core::document::{FiberDocument, Int};
use zcobs_core::fiber::{delta_matrix, SpecialFiber};
use zcobs_core::groups::{qz_complex_homology, QZHomology};
use zcobs_core::linalg::IntegerMatrix;
use zcobs_core::oracle::{brute_force_qz_homology, expected_at_level, OracleError};

pub fn big(rows: &[Vec<i64>]) -> Vec<Vec<BigInt>> {
    rows.iter()
        .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
        .collect()
}

pub fn matrix(rows: &[Vec<i64>], cols: usize) -> IntegerMatrix {
    IntegerMatrix::from_rows(cols, big(rows)).unwrap()
}

/// Determinant by cofactor expansion along the first row.
pub fn laplace_det(m: &[Vec<BigInt>]) -> BigInt {
    let n = m.len();
    if n == 0 {
        return BigInt::one();
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut total = BigInt::zero();
    for j in 0..n {
        if m[0][j].is_zero() {
            continue;
        }
        let minor: Vec<Vec<BigInt>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|&(k, _)| k != j)
                    .map(|(_, x)| x.clone())
                    .collect()
            })
            .collect();
        let term = &m[0][j] * laplace_det(&minor);
        if j % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    total
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if n < k {
        return Vec::new();
    }
    let mut out = subsets(n - 1, k);
    for mut s in subsets(n - 1, k - 1) {
        s.push(n - 1);
        out.push(s);
    }
    out
}

/// gcd of all `k × k` minors.
pub fn minors_gcd(m: &[Vec<BigInt>], cols: usize, k: usize) -> BigInt {
    let mut g = BigInt::zero();
    for rs in subsets(m.len(), k) {
        for cs in subsets(cols, k) {
            let sub: Vec<Vec<BigInt>> = rs
                .iter()
                .map(|&r| cs.iter().map(|&c| m[r][c].clone()).collect())
                .collect();
            g = g.gcd(&laplace_det(&sub));
        }
    }
    g
}

/// Elementary divisors `d_k = Δ_k / Δ_{k−1}` from determinantal divisors.
pub fn divisors_by_minors(m: &[Vec<BigInt>], cols: usize) -> Vec<BigInt> {
    let mut out = Vec::new();
    let mut prev = BigInt::one();
    for k in 1..=m.len().min(cols) {
        let delta = minors_gcd(m, cols, k);
        if delta.is_zero() {
            break;
        }
        out.push(&delta / &prev);
        prev = delta;
    }
    out
}

pub fn random_rows<R: Rng>(rng: &mut R, rows: usize, cols: usize, bound: i64) -> Vec<Vec<i64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-bound..=bound)).collect())
        .collect()
}

/// A random unimodular matrix and its inverse, built from elementary
/// operations.
pub fn random_unimodular<R: Rng>(rng: &mut R, n: usize, steps: usize) -> (IntegerMatrix, IntegerMatrix) {
    let mut p = IntegerMatrix::identity(n);
    let mut inv = IntegerMatrix::identity(n);
    if n < 2 {
        if n == 1 && rng.gen_bool(0.5) {
            p.set(0, 0, BigInt::from(-1));
            inv.set(0, 0, BigInt::from(-1));
        }
        return (p, inv);
    }
    for _ in 0..steps {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n);
        while j == i {
            j = rng.gen_range(0..n);
        }
        let c = BigInt::from(rng.gen_range(-2i64..=2));
        let mut e = IntegerMatrix::identity(n);
        let mut e_inv = IntegerMatrix::identity(n);
        match rng.gen_range(0..3) {
            0 => {
                // column j += c · column i
                e.set(i, j, c.clone());
                e_inv.set(i, j, -c);
            }
            1 => {
                e.set(i, i, BigInt::zero());
                e.set(j, j, BigInt::zero());
                e.set(i, j, BigInt::one());
                e.set(j, i, BigInt::one());
                e_inv = e.clone();
            }
            _ => {
                e.set(i, i, BigInt::from(-1));
                e_inv = e.clone();
            }
        }
        p = &p * &e;
        inv = &e_inv * &inv;
    }
    (p, inv)
}

fn to_big(v: &[Int]) -> Vec<BigInt> {
    v.iter().map(|x| x.0.clone()).collect()
}

fn to_doc(v: Vec<BigInt>) -> Vec<Int> {
    v.into_iter().map(Int).collect()
}

/// Rewrites component `c` in the basis given by the columns of `p`:
/// gram becomes `pᵀ·G·p` and coordinate vectors `x` become `p⁻¹·x`.
pub fn change_basis(doc: &FiberDocument, c: usize, p: &IntegerMatrix, inv: &IntegerMatrix) -> FiberDocument {
    let mut out = doc.clone();
    let comp = &doc.components[c];
    let rank = comp.lattice_rank;
    let gram = IntegerMatrix::from_rows(rank, comp.gram.iter().map(|r| to_big(r)).collect()).unwrap();
    let new_gram = &(&p.transpose() * &gram) * p;
    out.components[c].gram = new_gram.row_vecs().into_iter().map(to_doc).collect();
    out.components[c].curves = comp
        .curves
        .iter()
        .map(|x| to_doc(inv.mul_vec(&to_big(x))))
        .collect();
    let id = &comp.id;
    for d in &mut out.double_curves {
        if &d.left == id {
            d.class_in_left = to_doc(inv.mul_vec(&to_big(&d.class_in_left)));
        }
        if &d.right == id {
            d.class_in_right = to_doc(inv.mul_vec(&to_big(&d.class_in_right)));
        }
    }
    out
}

/// Appends a random integer combination of component `c`'s curves.
pub fn add_redundant_curve<R: Rng>(rng: &mut R, doc: &FiberDocument, c: usize) -> FiberDocument {
    let mut out = doc.clone();
    let comp = &doc.components[c];
    let mut sum = vec![BigInt::zero(); comp.lattice_rank];
    for curve in &comp.curves {
        let k = BigInt::from(rng.gen_range(-3i64..=3));
        for (s, x) in sum.iter_mut().zip(curve) {
            *s += &k * &x.0;
        }
    }
    out.components[c].curves.push(to_doc(sum));
    out
}

/// Appends a random lattice vector as a new curve on component `c`.
pub fn add_random_curve<R: Rng>(rng: &mut R, doc: &FiberDocument, c: usize) -> FiberDocument {
    let mut out = doc.clone();
    let rank = doc.components[c].lattice_rank;
    let v = (0..rank).map(|_| BigInt::from(rng.gen_range(-3i64..=3))).collect();
    out.components[c].curves.push(to_doc(v));
    out
}

pub fn homology_of(fiber: &SpecialFiber) -> QZHomology {
    let d = delta_matrix(fiber).unwrap();
    qz_complex_homology(&d.multiplicities, &d.matrix).unwrap()
}

/// Raises the level until the oracle's order stops growing and returns that
/// level, after checking both levels against the closed form.
pub fn oracle_agrees(
    v: &[BigInt],
    m: &IntegerMatrix,
    ell: u64,
    max_level: u32,
) -> Result<u32, String> {
    let h = qz_complex_homology(v, m).map_err(|e| e.to_string())?;
    let p = Prime::try_from(ell).unwrap();
    for n in 1..=max_level {
        let report = match brute_force_qz_homology(v, m, &p, n) {
            Ok(r) => r,
            Err(OracleError::StateSpaceTooLarge { .. }) => {
                return Err(format!("state space too large at level {n}"))
            }
            Err(e) => return Err(e.to_string()),
        };
        for answer in [&report.at_level, &report.at_next_level] {
            let want = expected_at_level(&h, &p, answer.level);
            if answer.group != want.group || answer.order != want.order {
                return Err(format!(
                    "level {}: oracle {} vs closed form {}",
                    answer.level, answer.group, want.group
                ));
            }
        }
        if h.divisible_rank > 0 {
            // Orders keep growing with the level; one pair of levels suffices.
            return Ok(n);
        }
        if report.stabilized() {
            let part = h.finite_part.ell_primary(&p);
            if report.at_level.group != part {
                return Err(format!("stable answer {} vs {}", report.at_level.group, part));
            }
            return Ok(n);
        }
    }
    Err(format!("no stabilization up to level {max_level}"))
}

pub fn abs_det_is_one(m: &IntegerMatrix) -> bool {
    laplace_det(&m.row_vecs()).abs().is_one()
}
