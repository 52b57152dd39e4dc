//! Primality and factorization of arbitrary-precision integers.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0} is not a prime number")]
pub struct NotPrime(pub BigUint);

/// A prime number, checked on construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prime(BigUint);

impl Prime {
    pub fn new(p: impl Into<BigUint>) -> Result<Self, NotPrime> {
        let p = p.into();
        if is_prime(&p) {
            Ok(Self(p))
        } else {
            Err(NotPrime(p))
        }
    }

    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }

    /// Exponent of this prime in `n` (n must be nonzero).
    pub fn valuation(&self, n: &BigUint) -> u32 {
        assert!(!n.is_zero(), "valuation of zero");
        let mut n = n.clone();
        let mut k = 0;
        loop {
            let (q, r) = n.div_rem(&self.0);
            if !r.is_zero() {
                return k;
            }
            n = q;
            k += 1;
        }
    }

    /// The largest power of this prime dividing `n`.
    pub fn part_of(&self, n: &BigUint) -> BigUint {
        num_traits::pow(self.0.clone(), self.valuation(n) as usize)
    }
}

impl fmt::Display for Prime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl TryFrom<u64> for Prime {
    type Error = NotPrime;

    fn try_from(p: u64) -> Result<Self, NotPrime> {
        Prime::new(BigUint::from(p))
    }
}

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97,
];

/// Miller–Rabin with the first 25 primes as bases. Deterministic below
/// 3.3·10^24 and overwhelmingly reliable above.
pub fn is_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for p in SMALL_PRIMES {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;
    'witness: for a in SMALL_PRIMES {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Prime factorization of a positive integer as `prime -> exponent`.
pub fn factorize(n: &BigUint) -> BTreeMap<BigUint, u32> {
    assert!(!n.is_zero(), "cannot factor zero");
    let mut out = BTreeMap::new();
    let mut rest = n.clone();
    for p in 2u32..10_000 {
        let p = BigUint::from(p);
        if &p * &p > rest {
            break;
        }
        while (&rest % &p).is_zero() {
            rest /= &p;
            *out.entry(p.clone()).or_insert(0) += 1;
        }
    }
    let mut stack = vec![rest];
    while let Some(m) = stack.pop() {
        if m.is_one() {
            continue;
        }
        if is_prime(&m) {
            *out.entry(m).or_insert(0) += 1;
            continue;
        }
        let d = pollard_brent(&m);
        stack.push(&m / &d);
        stack.push(d);
    }
    out
}

pub fn factorize_int(n: &BigInt) -> BTreeMap<BigUint, u32> {
    factorize(n.magnitude())
}

// Finds a nontrivial factor of a composite with no small factors.
fn pollard_brent(n: &BigUint) -> BigUint {
    let mut c = BigUint::one();
    loop {
        let f = |x: &BigUint| (x * x + &c) % n;
        let mut y = BigUint::from(2u32);
        let mut r: u64 = 1;
        let mut q = BigUint::one();
        let mut g = BigUint::one();
        let mut x = y.clone();
        let mut ys = y.clone();
        while g.is_one() {
            x = y.clone();
            for _ in 0..r {
                y = f(&y);
            }
            let mut k = 0;
            while k < r && g.is_one() {
                ys = y.clone();
                for _ in 0..(128.min(r - k)) {
                    y = f(&y);
                    q = (q * abs_diff(&x, &y)) % n;
                }
                g = q.gcd(n);
                k += 128;
            }
            r *= 2;
        }
        if &g == n {
            loop {
                ys = f(&ys);
                g = abs_diff(&x, &ys).gcd(n);
                if !g.is_one() {
                    break;
                }
            }
        }
        if &g != n {
            return g;
        }
        c += 1u32;
    }
}

fn abs_diff(a: &BigUint, b: &BigUint) -> BigUint {
    if a >= b {
        a - b
    } else {
        b - a
    }
}

pub fn to_biguint(n: &BigInt) -> Option<BigUint> {
    match n.sign() {
        Sign::Minus => None,
        _ => Some(n.magnitude().clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_primality() {
        let primes: Vec<u64> = (0..60).filter(|&n| is_prime(&BigUint::from(n))).collect();
        assert_eq!(
            primes,
            vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59]
        );
    }

    #[test]
    fn rejects_composites_and_units() {
        for n in [0u64, 1, 4, 9, 561, 1_000_000] {
            assert!(Prime::try_from(n).is_err(), "{n}");
        }
        assert!(Prime::try_from(1_000_000_007).is_ok());
    }

    #[test]
    fn factors_products_of_large_primes() {
        let p = BigUint::from(1_000_000_007u64);
        let q = BigUint::from(998_244_353u64);
        let n = &p * &p * &q * 12u32;
        let f = factorize(&n);
        let expected: BTreeMap<BigUint, u32> = [
            (BigUint::from(2u32), 2),
            (BigUint::from(3u32), 1),
            (q.clone(), 1),
            (p.clone(), 2),
        ]
        .into_iter()
        .collect();
        assert_eq!(f, expected);
    }

    #[test]
    fn valuation_and_part() {
        let two = Prime::try_from(2).unwrap();
        assert_eq!(two.valuation(&BigUint::from(48u32)), 4);
        assert_eq!(two.part_of(&BigUint::from(48u32)), BigUint::from(16u32));
        assert_eq!(two.part_of(&BigUint::from(9u32)), BigUint::one());
    }
}
