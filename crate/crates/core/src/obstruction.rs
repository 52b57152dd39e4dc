//! End-to-end obstruction computation and report rendering, plus the
//! exactness check for curve degenerations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_bigint::{BigInt, BigUint};
use num_traits::{ToPrimitive, Zero};
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::arith::Prime;
use crate::fiber::{delta_matrix, FiberError, SpecialFiber};
use crate::groups::{qz_complex_homology, FiniteAbelianGroup, HomologyError, QZHomology};
use crate::linalg::IntegerMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Exact,
    UpperBound,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Exact => "exact",
            Status::UpperBound => "upper_bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixStats {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObstructionReport {
    pub fiber_name: String,
    pub homology: QZHomology,
    pub status: Status,
    pub per_prime: BTreeMap<BigUint, FiniteAbelianGroup>,
    pub warnings: Vec<String>,
    pub matrix_stats: MatrixStats,
}

pub const DIVISIBLE_RANK_WARNING: &str = "homology has a divisible part, so the obstruction group \
is not finite; the curve lists are probably too sparse or the data does not come from a regular model";

pub fn compute_obstruction(fiber: &SpecialFiber) -> Result<ObstructionReport, FiberError> {
    let delta = delta_matrix(fiber)?;
    let homology =
        qz_complex_homology(&delta.multiplicities, &delta.matrix).map_err(|e| match e {
            HomologyError::ComplexConditionViolated { row } => {
                FiberError::InternalComplexViolation { row }
            }
            other => unreachable!("delta_matrix guarantees a complex: {other}"),
        })?;
    let mut warnings = fiber.warnings.clone();
    if homology.divisible_rank > 0 {
        warnings.push(DIVISIBLE_RANK_WARNING.to_string());
    }
    let rank = delta.matrix.cols() - 1 - homology.divisible_rank;
    Ok(ObstructionReport {
        fiber_name: fiber.name.clone(),
        per_prime: homology.finite_part.primary_parts(),
        homology,
        status: if fiber.h1_geometric_vanishes {
            Status::Exact
        } else {
            Status::UpperBound
        },
        warnings,
        matrix_stats: MatrixStats {
            rows: delta.matrix.rows(),
            cols: delta.matrix.cols(),
            rank,
        },
    })
}

impl ObstructionReport {
    pub fn is_trivial(&self) -> bool {
        self.homology.divisible_rank == 0 && self.homology.finite_part.is_trivial()
    }

    /// The ℓ-primary part of the finite group (trivial when ℓ does not divide it).
    pub fn ell_part(&self, ell: &Prime) -> FiniteAbelianGroup {
        self.homology.finite_part.ell_primary(ell)
    }

    pub fn interpretation(&self) -> &'static str {
        match self.status {
            Status::Exact => {
                "A_0(X) (x) Z_l is isomorphic to the l-part of H for every prime l invertible \
                 in the residue field, under the hypotheses of the criterion"
            }
            Status::UpperBound => {
                "the true dual group is a quotient of Ker(delta); H bounds it from above"
            }
        }
    }

    /// Machine-readable report; `prime` restricts the chain and table to one prime.
    pub fn to_json(&self, prime: Option<&Prime>) -> String {
        let (chain, per_prime) = self.filtered(prime);
        let view = JsonView {
            fiber: &self.fiber_name,
            status: self.status,
            divisible_rank: self.homology.divisible_rank,
            divisor_chain: Chain(chain.chain()),
            per_prime: PerPrime(&per_prime),
            warnings: &self.warnings,
        };
        serde_json::to_string_pretty(&view).expect("reports serialize")
    }

    pub fn to_text(&self, prime: Option<&Prime>) -> String {
        let (chain, per_prime) = self.filtered(prime);
        let mut out = String::new();
        let _ = writeln!(out, "fiber: {}", self.fiber_name);
        let _ = writeln!(out, "status: {}", self.status.as_str());
        match prime {
            Some(p) => {
                let _ = writeln!(out, "H[{p}^inf]: {chain}");
            }
            None => {
                let _ = writeln!(out, "H: {chain}");
            }
        }
        let _ = writeln!(out, "divisible rank: {}", self.homology.divisible_rank);
        if per_prime.is_empty() {
            let _ = writeln!(out, "per prime: none");
        } else {
            let _ = writeln!(out, "per prime:");
            for (p, g) in &per_prime {
                let _ = writeln!(out, "  {p}: {g}");
            }
        }
        let s = self.matrix_stats;
        let _ = writeln!(out, "matrix: {} x {}, rank {}", s.rows, s.cols, s.rank);
        let _ = writeln!(out, "meaning: {}", self.interpretation());
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }

    fn filtered(
        &self,
        prime: Option<&Prime>,
    ) -> (FiniteAbelianGroup, BTreeMap<BigUint, FiniteAbelianGroup>) {
        match prime {
            None => (self.homology.finite_part.clone(), self.per_prime.clone()),
            Some(p) => {
                let part = self.ell_part(p);
                let mut map = BTreeMap::new();
                map.insert(p.value().clone(), part.clone());
                (part, map)
            }
        }
    }
}

#[derive(Serialize)]
struct JsonView<'a> {
    fiber: &'a str,
    status: Status,
    divisible_rank: usize,
    divisor_chain: Chain<'a>,
    per_prime: PerPrime<'a>,
    warnings: &'a [String],
}

struct Chain<'a>(&'a [BigUint]);

impl Serialize for Chain<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(self.0.len()))?;
        for d in self.0 {
            match d.to_u64() {
                Some(x) => seq.serialize_element(&x)?,
                None => seq.serialize_element(&d.to_string())?,
            }
        }
        seq.end()
    }
}

struct PerPrime<'a>(&'a BTreeMap<BigUint, FiniteAbelianGroup>);

impl Serialize for PerPrime<'_> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (p, g) in self.0 {
            map.serialize_entry(&p.to_string(), &Chain(g.chain()))?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DegenerationError {
    #[error("intersection matrix must be square and symmetric")]
    NotSymmetric,
    #[error("{multiplicities} multiplicities for a {size}x{size} matrix")]
    DimensionMismatch { size: usize, multiplicities: usize },
    #[error("multiplicities must be positive")]
    NonPositiveMultiplicity,
    #[error("m^T N is nonzero in column {column}; the sequence is not a complex")]
    NotAComplex { column: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CurveExactness {
    Exact,
    NotExact { rank: usize, expected: usize },
}

impl CurveExactness {
    pub fn is_exact(&self) -> bool {
        *self == CurveExactness::Exact
    }
}

/// Exactness over ℚ of `ℚ^I --N--> ℚ^I --mᵀ--> ℚ` in the middle, for the
/// intersection matrix of a reduced curve fiber.
pub fn validate_curve_degeneration(
    n: &IntegerMatrix,
    m: &[BigInt],
) -> Result<CurveExactness, DegenerationError> {
    if !n.is_symmetric() {
        return Err(DegenerationError::NotSymmetric);
    }
    if m.len() != n.rows() {
        return Err(DegenerationError::DimensionMismatch {
            size: n.rows(),
            multiplicities: m.len(),
        });
    }
    if m.iter().any(|x| x <= &BigInt::zero()) {
        return Err(DegenerationError::NonPositiveMultiplicity);
    }
    // N is symmetric, so mᵀN = (N m)ᵀ.
    if let Some(column) = n.mul_vec(m).iter().position(|x| !x.is_zero()) {
        return Err(DegenerationError::NotAComplex { column });
    }
    let rank = n.rank();
    let expected = n.rows() - 1;
    Ok(if rank == expected {
        CurveExactness::Exact
    } else {
        CurveExactness::NotExact { rank, expected }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::load_special_fiber;

    fn ints(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    const GOOD: &str = r#"{
      "name": "good",
      "h1_geometric_vanishes": true,
      "components": [{"id": "X0", "multiplicity": 1, "lattice_rank": 1,
        "gram": [[4]], "curves": [[1]], "kind": "k3"}]
    }"#;

    #[test]
    fn good_reduction_is_trivial_and_exact() {
        let r = compute_obstruction(&load_special_fiber(GOOD).unwrap()).unwrap();
        assert!(r.is_trivial());
        assert_eq!(r.status, Status::Exact);
        assert!(r.per_prime.is_empty());
        assert_eq!(
            r.to_json(None),
            "{\n  \"fiber\": \"good\",\n  \"status\": \"exact\",\n  \"divisible_rank\": 0,\n  \
             \"divisor_chain\": [],\n  \"per_prime\": {},\n  \"warnings\": []\n}"
        );
    }

    #[test]
    fn missing_h1_flag_gives_upper_bound() {
        let text = GOOD.replace("true", "false");
        let r = compute_obstruction(&load_special_fiber(&text).unwrap()).unwrap();
        assert_eq!(r.status, Status::UpperBound);
        assert!(r.to_json(None).contains("\"upper_bound\""));
    }

    #[test]
    fn curve_free_single_component_still_trivial() {
        let text = GOOD.replace("[[1]]", "[]");
        let r = compute_obstruction(&load_special_fiber(&text).unwrap()).unwrap();
        assert!(r.is_trivial());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn json_keys_and_prime_filter() {
        let r = ObstructionReport {
            fiber_name: "x".into(),
            homology: QZHomology {
                divisible_rank: 1,
                finite_part: FiniteAbelianGroup::from_cyclic_orders(&ints(&[4, 6])).unwrap(),
            },
            status: Status::Exact,
            per_prime: FiniteAbelianGroup::from_cyclic_orders(&ints(&[4, 6]))
                .unwrap()
                .primary_parts(),
            warnings: vec![DIVISIBLE_RANK_WARNING.into()],
            matrix_stats: MatrixStats {
                rows: 0,
                cols: 0,
                rank: 0,
            },
        };
        let json: serde_json::Value = serde_json::from_str(&r.to_json(None)).unwrap();
        assert_eq!(json["divisor_chain"], serde_json::json!([2, 12]));
        assert_eq!(json["per_prime"]["2"], serde_json::json!([2, 4]));
        assert_eq!(json["per_prime"]["3"], serde_json::json!([3]));
        let three = Prime::try_from(3).unwrap();
        let json: serde_json::Value = serde_json::from_str(&r.to_json(Some(&three))).unwrap();
        assert_eq!(json["divisor_chain"], serde_json::json!([3]));
        assert_eq!(json["per_prime"].as_object().unwrap().len(), 1);
        let five = Prime::try_from(5).unwrap();
        assert!(r.to_text(Some(&five)).contains("H[5^inf]: 0"));
    }

    #[test]
    fn i3_is_exact() {
        let n = IntegerMatrix::from_i64(3, 3, &[-2, 1, 1, 1, -2, 1, 1, 1, -2]);
        assert!(validate_curve_degeneration(&n, &ints(&[1, 1, 1]))
            .unwrap()
            .is_exact());
    }

    #[test]
    fn i0_star_is_exact() {
        let n = IntegerMatrix::from_i64(
            5,
            5,
            &[
                -2, 1, 1, 1, 1, //
                1, -2, 0, 0, 0, //
                1, 0, -2, 0, 0, //
                1, 0, 0, -2, 0, //
                1, 0, 0, 0, -2,
            ],
        );
        assert!(validate_curve_degeneration(&n, &ints(&[2, 1, 1, 1, 1]))
            .unwrap()
            .is_exact());
    }

    #[test]
    fn zero_matrix_is_not_exact() {
        assert_eq!(
            validate_curve_degeneration(&IntegerMatrix::zeros(2, 2), &ints(&[1, 1])),
            Ok(CurveExactness::NotExact {
                rank: 0,
                expected: 1
            })
        );
    }

    #[test]
    fn degeneration_preconditions() {
        let n = IntegerMatrix::from_i64(2, 2, &[-2, 1, 1, -2]);
        assert_eq!(
            validate_curve_degeneration(&n, &ints(&[1, 1])),
            Err(DegenerationError::NotAComplex { column: 0 })
        );
        let n = IntegerMatrix::from_i64(2, 2, &[0, 1, 0, 0]);
        assert_eq!(
            validate_curve_degeneration(&n, &ints(&[1, 1])),
            Err(DegenerationError::NotSymmetric)
        );
        assert!(validate_curve_degeneration(&IntegerMatrix::zeros(2, 2), &ints(&[1, 0])).is_err());
    }
}
