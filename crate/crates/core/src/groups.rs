//! Finite abelian groups in divisor-chain form and the homology of the
//! two-term complex `ℚ/ℤ --v--> (ℚ/ℤ)^a --M--> (ℚ/ℤ)^b`.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::arith::{factorize, Prime};
use crate::linalg::{smith_normal_form, IntegerMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupError {
    #[error("cyclic orders must be positive, got {0}")]
    NonPositiveOrder(BigInt),
    #[error("divisor chain entry {index} ({value}) is invalid: {reason}")]
    InvalidChain {
        index: usize,
        value: BigUint,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HomologyError {
    #[error("augmentation has length {vector} but the matrix has {cols} columns")]
    DimensionMismatch { vector: usize, cols: usize },
    #[error("M·v is nonzero at row {row}; the input is not a complex")]
    ComplexConditionViolated { row: usize },
    #[error("the augmentation vector is zero")]
    ZeroAugmentation,
}

/// `ℤ/d₁ ⊕ … ⊕ ℤ/d_s` with `d₁ | d₂ | … | d_s`, every `d_k ≥ 2`.
///
/// The chain is canonical, so derived equality is group isomorphism.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
#[serde(transparent)]
pub struct FiniteAbelianGroup {
    chain: Vec<BigUint>,
}

impl FiniteAbelianGroup {
    pub fn trivial() -> Self {
        Self::default()
    }

    pub fn from_chain(chain: Vec<BigUint>) -> Result<Self, GroupError> {
        for (k, d) in chain.iter().enumerate() {
            if *d < BigUint::from(2u32) {
                return Err(GroupError::InvalidChain {
                    index: k,
                    value: d.clone(),
                    reason: "entries must be at least 2",
                });
            }
            if k > 0 && !d.is_multiple_of(&chain[k - 1]) {
                return Err(GroupError::InvalidChain {
                    index: k,
                    value: d.clone(),
                    reason: "entry is not a multiple of its predecessor",
                });
            }
        }
        Ok(Self { chain })
    }

    /// Canonical form of `⊕ ℤ/orders_k`; unit orders are dropped.
    pub fn from_cyclic_orders<'a>(
        orders: impl IntoIterator<Item = &'a BigInt>,
    ) -> Result<Self, GroupError> {
        let mut per_prime: BTreeMap<BigUint, Vec<u32>> = BTreeMap::new();
        for n in orders {
            if n <= &BigInt::zero() {
                return Err(GroupError::NonPositiveOrder(n.clone()));
            }
            for (p, e) in factorize(n.magnitude()) {
                per_prime.entry(p).or_default().push(e);
            }
        }
        let len = per_prime.values().map(Vec::len).max().unwrap_or(0);
        let mut chain = vec![BigUint::one(); len];
        for (p, mut exps) in per_prime {
            exps.sort_unstable_by(|a, b| b.cmp(a));
            // Largest power goes to the last chain entry.
            for (k, e) in exps.into_iter().enumerate() {
                chain[len - 1 - k] *= num_traits::pow(p.clone(), e as usize);
            }
        }
        Ok(Self { chain })
    }

    pub fn chain(&self) -> &[BigUint] {
        &self.chain
    }

    pub fn order(&self) -> BigUint {
        self.chain.iter().product()
    }

    pub fn is_trivial(&self) -> bool {
        self.chain.is_empty()
    }

    /// The ℓ-Sylow subgroup.
    pub fn ell_primary(&self, ell: &Prime) -> Self {
        let chain = self
            .chain
            .iter()
            .map(|d| ell.part_of(d))
            .filter(|d| !d.is_one())
            .collect();
        Self { chain }
    }

    /// Primes dividing the order, each with its primary component.
    pub fn primary_parts(&self) -> BTreeMap<BigUint, Self> {
        let Some(top) = self.chain.last() else {
            return BTreeMap::new();
        };
        factorize(top)
            .into_keys()
            .map(|p| {
                let ell = Prime::new(p.clone()).expect("factorize returns primes");
                (p, self.ell_primary(&ell))
            })
            .collect()
    }
}

impl fmt::Display for FiniteAbelianGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.chain.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self.chain.iter().map(|d| format!("Z/{d}")).collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Canonical divisor-chain form of `⊕ ℤ/orders_k`.
pub fn canonical_group(orders: &[BigInt]) -> Result<FiniteAbelianGroup, GroupError> {
    FiniteAbelianGroup::from_cyclic_orders(orders)
}

pub fn ell_primary(group: &FiniteAbelianGroup, ell: &Prime) -> FiniteAbelianGroup {
    group.ell_primary(ell)
}

/// Homology with `ℚ/ℤ` coefficients: `(ℚ/ℤ)^divisible_rank ⊕ finite_part`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QZHomology {
    pub divisible_rank: usize,
    pub finite_part: FiniteAbelianGroup,
}

/// Middle homology of `ℚ/ℤ --v--> (ℚ/ℤ)^a --M--> (ℚ/ℤ)^b`, i.e. the
/// λ with `Mλ ≡ 0` modulo the diagonal image of `v`, for all primes at once.
///
/// With `UMV = D`, the kernel of `M` on `(ℚ/ℤ)^a` is `⊕ ℤ/d_k ⊕ (ℚ/ℤ)^{a-r}`,
/// and `v` spans a divisible line inside the free part.
pub fn qz_complex_homology(v: &[BigInt], m: &IntegerMatrix) -> Result<QZHomology, HomologyError> {
    check_complex(v, m)?;
    let snf = smith_normal_form(m);
    let finite_part = FiniteAbelianGroup::from_cyclic_orders(&snf.elementary_divisors)
        .expect("elementary divisors are positive");
    Ok(QZHomology {
        divisible_rank: m.cols() - 1 - snf.rank,
        finite_part,
    })
}

pub(crate) fn check_complex(v: &[BigInt], m: &IntegerMatrix) -> Result<(), HomologyError> {
    if v.len() != m.cols() {
        return Err(HomologyError::DimensionMismatch {
            vector: v.len(),
            cols: m.cols(),
        });
    }
    if v.iter().all(Zero::is_zero) {
        return Err(HomologyError::ZeroAugmentation);
    }
    if let Some(row) = m.mul_vec(v).iter().position(|x| !x.is_zero()) {
        return Err(HomologyError::ComplexConditionViolated { row });
    }
    Ok(())
}
