//! Brute-force enumeration oracle for the ℓ-primary part of the `ℚ/ℤ`
//! complex homology.
//!
//! At level `n` the oracle lists every `λ ∈ (ℓ^{-n}ℤ/ℤ)^a` with `Mλ` integral,
//! divides out the part of the diagonal line `ℚ/ℤ·v` that lives at that level,
//! and reads the group structure off element orders. No Smith form is
//! involved, so this is an independent check of the closed-form computation.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::arith::Prime;
use crate::groups::{check_complex, FiniteAbelianGroup, HomologyError, QZHomology};
use crate::linalg::{content, IntegerMatrix};
use crate::par::{map_collect, Execution};

/// Upper bound on search nodes visited by one level computation.
pub const STATE_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Complex(#[from] HomologyError),
    #[error("enumeration needs more than {limit} states")]
    StateSpaceTooLarge { limit: u64 },
    #[error("level must be at least 1")]
    ZeroLevel,
    #[error("the oracle only supports primes below 2^32")]
    PrimeTooLarge,
}

/// The quotient group found at one level, i.e. the `ℓ^n`-torsion of the
/// true homology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelAnswer {
    pub level: u32,
    pub order: BigUint,
    pub group: FiniteAbelianGroup,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BruteForceReport {
    pub ell: Prime,
    pub at_level: LevelAnswer,
    pub at_next_level: LevelAnswer,
}

impl BruteForceReport {
    /// Orders agree at levels n and n+1, so the level-n answer is the full ℓ-part.
    pub fn stabilized(&self) -> bool {
        self.at_level.order == self.at_next_level.order
    }
}

/// Runs the oracle at levels `n` and `n + 1`.
pub fn brute_force_qz_homology(
    v: &[BigInt],
    m: &IntegerMatrix,
    ell: &Prime,
    n: u32,
) -> Result<BruteForceReport, OracleError> {
    brute_force_qz_homology_with(v, m, ell, n, Execution::default())
}

pub fn brute_force_qz_homology_with(
    v: &[BigInt],
    m: &IntegerMatrix,
    ell: &Prime,
    n: u32,
    exec: Execution,
) -> Result<BruteForceReport, OracleError> {
    Ok(BruteForceReport {
        ell: ell.clone(),
        at_level: brute_force_level(v, m, ell, n, exec)?,
        at_next_level: brute_force_level(v, m, ell, n + 1, exec)?,
    })
}

/// What the oracle should find at level `n` given a homology computed by
/// other means: the ℓ-part truncated at `ℓ^n`, plus one `ℤ/ℓ^n` per
/// divisible summand.
pub fn expected_at_level(h: &QZHomology, ell: &Prime, n: u32) -> LevelAnswer {
    let cap = num_traits::pow(ell.value().clone(), n as usize);
    let mut chain: Vec<BigUint> = h
        .finite_part
        .ell_primary(ell)
        .chain()
        .iter()
        .map(|d| d.clone().min(cap.clone()))
        .collect();
    chain.extend(std::iter::repeat_n(cap, h.divisible_rank));
    let group = FiniteAbelianGroup::from_chain(chain).expect("truncation keeps the chain sorted");
    LevelAnswer {
        level: n,
        order: group.order(),
        group,
    }
}

struct Search {
    modulus: u64,
    order: Vec<usize>,
    // rows_done[d]: rows whose support is fully assigned once order[d] is set.
    rows_done: Vec<Vec<Vec<(usize, u64)>>>,
}

impl Search {
    fn new(m: &IntegerMatrix, modulus: u64) -> Self {
        let q = BigInt::from(modulus);
        let rows: Vec<Vec<(usize, u64)>> = (0..m.rows())
            .map(|i| {
                m.row(i)
                    .iter()
                    .enumerate()
                    .filter_map(|(j, x)| {
                        let r = x.mod_floor(&q).to_u64().expect("reduced below modulus");
                        (r != 0).then_some((j, r))
                    })
                    .collect::<Vec<_>>()
            })
            .filter(|r| !r.is_empty())
            .collect();

        let order = variable_order(m.cols(), &rows);
        let mut position = vec![0; m.cols()];
        for (d, &c) in order.iter().enumerate() {
            position[c] = d;
        }
        let mut rows_done = vec![Vec::new(); m.cols()];
        for row in rows {
            let last = row.iter().map(|&(c, _)| position[c]).max().expect("nonempty row");
            rows_done[last].push(row);
        }
        Self {
            modulus,
            order,
            rows_done,
        }
    }

    fn consistent(&self, depth: usize, x: &[u64]) -> bool {
        let q = self.modulus as u128;
        self.rows_done[depth].iter().all(|row| {
            row.iter()
                .fold(0u128, |acc, &(c, a)| (acc + a as u128 * x[c] as u128) % q)
                == 0
        })
    }

    /// Depth-first enumeration below a fixed value of the first variable.
    fn enumerate_from(
        &self,
        first: u64,
        visited: &AtomicU64,
        aborted: &AtomicBool,
    ) -> (u64, Vec<Vec<u64>>) {
        let a = self.order.len();
        let mut x = vec![0u64; a];
        let mut out = Vec::new();
        let mut local = 1u64;
        x[self.order[0]] = first;
        if !self.consistent(0, &x) {
            return (local, out);
        }
        if a == 1 {
            out.push(x);
            return (local, out);
        }
        // Iterative DFS: next[d] is the next candidate value at depth d.
        let mut next = vec![0u64; a];
        let mut depth = 1;
        loop {
            if next[depth] == self.modulus {
                next[depth] = 0;
                depth -= 1;
                if depth == 0 {
                    break;
                }
                continue;
            }
            let val = next[depth];
            next[depth] += 1;
            local += 1;
            if local.is_multiple_of(4096) {
                let total = visited.fetch_add(4096, Ordering::Relaxed) + 4096;
                if total > STATE_LIMIT || aborted.load(Ordering::Relaxed) {
                    aborted.store(true, Ordering::Relaxed);
                    return (local, out);
                }
            }
            x[self.order[depth]] = val;
            if !self.consistent(depth, &x) {
                continue;
            }
            if depth + 1 == a {
                out.push(x.clone());
            } else {
                depth += 1;
            }
        }
        (local, out)
    }
}

// Greedy order: next the column that completes the most rows, then the one
// touching the most partially assigned rows, then the lowest index.
fn variable_order(cols: usize, rows: &[Vec<(usize, u64)>]) -> Vec<usize> {
    let mut assigned = vec![false; cols];
    let mut order = Vec::with_capacity(cols);
    for _ in 0..cols {
        let score = |c: usize| {
            let mut completes = 0usize;
            let mut touches = 0usize;
            for row in rows {
                if !row.iter().any(|&(j, _)| j == c) {
                    continue;
                }
                touches += 1;
                if row.iter().all(|&(j, _)| j == c || assigned[j]) {
                    completes += 1;
                }
            }
            (completes, touches)
        };
        let best = (0..cols)
            .filter(|&c| !assigned[c])
            .max_by(|&a, &b| score(a).cmp(&score(b)).then(b.cmp(&a)))
            .expect("unassigned column left");
        assigned[best] = true;
        order.push(best);
    }
    order
}

/// One level of the oracle.
pub fn brute_force_level(
    v: &[BigInt],
    m: &IntegerMatrix,
    ell: &Prime,
    n: u32,
    exec: Execution,
) -> Result<LevelAnswer, OracleError> {
    check_complex(v, m)?;
    if n == 0 {
        return Err(OracleError::ZeroLevel);
    }
    let p = ell
        .to_u64()
        .filter(|&p| p < 1 << 32)
        .ok_or(OracleError::PrimeTooLarge)?;
    let q = p
        .checked_pow(n)
        .filter(|&q| q <= STATE_LIMIT)
        .ok_or(OracleError::StateSpaceTooLarge { limit: STATE_LIMIT })?;

    let search = Search::new(m, q);
    let visited = AtomicU64::new(0);
    let aborted = AtomicBool::new(false);
    let parts = map_collect(exec, (0..q).collect(), |first| {
        search.enumerate_from(first, &visited, &aborted)
    });
    let total: u64 = parts.iter().map(|(k, _)| k).sum();
    if total > STATE_LIMIT || aborted.load(Ordering::Relaxed) {
        return Err(OracleError::StateSpaceTooLarge { limit: STATE_LIMIT });
    }
    let kernel: Vec<Vec<u64>> = parts.into_iter().flat_map(|(_, s)| s).collect();

    // The diagonal line at this level is generated by v / gcd(v).
    let g = content(v);
    let qb = BigInt::from(q);
    let gen: Vec<u64> = v
        .iter()
        .map(|x| (x / &g).mod_floor(&qb).to_u64().expect("reduced"))
        .collect();
    let pivot = gen
        .iter()
        .position(|&x| x % p != 0)
        .expect("a primitive vector has an entry prime to ell");
    let inv = mod_inverse(gen[pivot], q);
    let in_line = |x: &[u64]| {
        let k = (x[pivot] as u128 * inv as u128 % q as u128) as u64;
        x.iter()
            .zip(&gen)
            .all(|(&xi, &gi)| (k as u128 * gi as u128 % q as u128) as u64 == xi)
    };

    // Smallest k with ℓ^k·x on the line, for each kernel element.
    let mut killed_at = vec![0u64; n as usize + 1];
    for x in &kernel {
        let mut y = x.clone();
        let mut k = 0;
        while !in_line(&y) {
            y.iter_mut().for_each(|e| *e = (*e as u128 * p as u128 % q as u128) as u64);
            k += 1;
        }
        killed_at[k] += 1;
    }
    let line = q;
    let quotient_order = kernel.len() as u64 / line;
    assert_eq!(quotient_order * line, kernel.len() as u64);

    // N_k = #elements killed by ℓ^k = ℓ^{Σ min(e_j, k)}.
    let mut log_n = Vec::with_capacity(n as usize + 1);
    let mut cumulative = 0u64;
    for count in &killed_at {
        cumulative += count;
        log_n.push(exact_log(cumulative / line, p));
    }
    // at_least[k] = #{j : e_j ≥ k}
    let at_least: Vec<u32> = (1..=n as usize).map(|k| log_n[k] - log_n[k - 1]).collect();
    let mut chain = Vec::new();
    for k in 1..=n as usize {
        let here = at_least[k - 1] - at_least.get(k).copied().unwrap_or(0);
        for _ in 0..here {
            chain.push(num_traits::pow(BigUint::from(p), k));
        }
    }
    let group = FiniteAbelianGroup::from_chain(chain).expect("ascending prime powers");
    debug_assert_eq!(group.order(), BigUint::from(quotient_order));
    Ok(LevelAnswer {
        level: n,
        order: BigUint::from(quotient_order),
        group,
    })
}

fn exact_log(mut x: u64, p: u64) -> u32 {
    let mut k = 0;
    while x > 1 {
        assert!(x.is_multiple_of(p), "element counts must be powers of ell");
        x /= p;
        k += 1;
    }
    k
}

fn mod_inverse(a: u64, q: u64) -> u64 {
    let e = BigInt::from(a).extended_gcd(&BigInt::from(q));
    debug_assert!(e.gcd == BigInt::from(1));
    let r = e.x.mod_floor(&BigInt::from(q));
    if r.is_zero() {
        0
    } else {
        r.to_u64().expect("below modulus")
    }
}
