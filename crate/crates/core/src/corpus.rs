//! Bundled fixtures with expected results, and builders for fixture families.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::{
    from_ints, BranchDocument, ComponentDocument, CycleDocument, DoubleCurveDocument,
    FiberDocument, Int, SurfaceKind, TriplePointDocument,
};
use crate::fiber::{load_special_fiber, SpecialFiber};
use crate::kulikov::{classify_kulikov, consonance_solve, verify_certificate, K3Error};
use crate::linalg::IntegerMatrix;
use crate::obstruction::{compute_obstruction, validate_curve_degeneration, Status};
use crate::par::{map_collect, Execution};

/// What a fixture is expected to produce beyond its obstruction report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KulikovExpectation {
    NotChecked,
    /// Classification must refuse the fiber because a multiplicity exceeds 1.
    NonSemistable,
    /// The consonance solver must prove all `λᵢ` equal with a replayable certificate.
    AllEqual,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expected {
    Fiber {
        status: Status,
        divisible_rank: usize,
        divisor_chain: &'static [u64],
        kulikov: KulikovExpectation,
    },
    /// Each case in the document carries its own `expect_exact` flag.
    CurveMatrices,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fixture {
    pub name: &'static str,
    pub document: &'static str,
    pub expected: Expected,
    /// Where the numbers come from.
    pub note: &'static str,
}

impl Fixture {
    pub fn is_fiber(&self) -> bool {
        matches!(self.expected, Expected::Fiber { .. })
    }

    pub fn load(&self) -> Option<SpecialFiber> {
        self.is_fiber()
            .then(|| load_special_fiber(self.document).expect("bundled fixtures validate"))
    }
}

const fn fiber(
    name: &'static str,
    document: &'static str,
    divisor_chain: &'static [u64],
    kulikov: KulikovExpectation,
    note: &'static str,
) -> Fixture {
    Fixture {
        name,
        document,
        expected: Expected::Fiber {
            status: Status::Exact,
            divisible_rank: 0,
            divisor_chain,
            kulikov,
        },
        note,
    }
}

static FIXTURES: &[Fixture] = &[
    fiber(
        "good_reduction",
        include_str!("../../../fixtures/good_reduction.json"),
        &[],
        KulikovExpectation::NotChecked,
        "smooth special fiber; degree-zero cycles are divisible",
    ),
    fiber(
        "two_component",
        include_str!("../../../fixtures/two_component.json"),
        &[2],
        KulikovExpectation::NotChecked,
        "two rational components along D, curve pairings with D equal to 2 and 6 on both sides; \
         group confirmed by brute-force enumeration",
    ),
    fiber(
        "persson",
        include_str!("../../../fixtures/persson.json"),
        &[2],
        KulikovExpectation::NotChecked,
        "two copies of an elliptic surface glued along a reduced fiber, all pairings with it even \
         and their gcd 2; the expected group is Z/2",
    ),
    fiber(
        "quartic_k3",
        include_str!("../../../fixtures/quartic_k3.json"),
        &[],
        KulikovExpectation::NonSemistable,
        "2S + P1..P4 + Q1..Q4 with S an elliptic K3 carrying four I0* fibres and 2-torsion \
         sections, encoded as a sublattice of NS(S); the group is trivial",
    ),
    fiber(
        "typeII_chain",
        include_str!("../../../fixtures/typeII_chain.json"),
        &[],
        KulikovExpectation::AllEqual,
        "rational - elliptic ruled - rational chain, anchored at A0 by an exceptional curve",
    ),
    fiber(
        "tetrahedron_typeIII",
        include_str!("../../../fixtures/tetrahedron_typeIII.json"),
        &[],
        KulikovExpectation::AllEqual,
        "four planes blown up in six points, glued along a triangle of lines each",
    ),
    fiber(
        "octahedron_typeIII",
        include_str!("../../../fixtures/octahedron_typeIII.json"),
        &[],
        KulikovExpectation::AllEqual,
        "six quadrics blown up in four points, glued along a square of (-1)-curves each",
    ),
    Fixture {
        name: "kodaira_matrices",
        document: include_str!("../../../fixtures/kodaira_matrices.json"),
        expected: Expected::CurveMatrices,
        note: "Kodaira I3 and I0* intersection matrices, plus non-exact controls",
    },
];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown fixture {0:?}")]
pub struct UnknownFixture(pub String);

pub fn list_fixtures() -> Vec<&'static str> {
    FIXTURES.iter().map(|f| f.name).collect()
}

pub fn fixtures() -> &'static [Fixture] {
    FIXTURES
}

pub fn fixture(name: &str) -> Result<&'static Fixture, UnknownFixture> {
    FIXTURES
        .iter()
        .find(|f| f.name == name)
        .ok_or_else(|| UnknownFixture(name.to_string()))
}

/// A batch of curve-fiber intersection matrices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveMatrixSet {
    pub name: String,
    pub cases: Vec<CurveMatrixCase>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveMatrixCase {
    pub name: String,
    pub matrix: Vec<Vec<Int>>,
    pub multiplicities: Vec<Int>,
    pub expect_exact: bool,
}

impl CurveMatrixCase {
    pub fn matrix(&self) -> IntegerMatrix {
        IntegerMatrix::from_rows(
            self.matrix.len(),
            self.matrix.iter().map(|r| from_ints(r)).collect(),
        )
        .expect("square case matrix")
    }

    pub fn multiplicities(&self) -> Vec<BigInt> {
        from_ints(&self.multiplicities)
    }
}

pub fn load_curve_matrices(text: &str) -> Result<CurveMatrixSet, serde_json::Error> {
    serde_json::from_str(text)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub details: Vec<String>,
}

impl fmt::Display for FixtureOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "ok" } else { "FAIL" };
        write!(f, "{verdict:4} {}", self.name)?;
        if !self.details.is_empty() {
            write!(f, ": {}", self.details.join("; "))?;
        }
        Ok(())
    }
}

/// Checks one fixture against its expected values.
pub fn run_fixture(fx: &'static Fixture) -> FixtureOutcome {
    let mut problems = Vec::new();
    match &fx.expected {
        Expected::Fiber {
            status,
            divisible_rank,
            divisor_chain,
            kulikov,
        } => check_fiber(fx, *status, *divisible_rank, divisor_chain, *kulikov, &mut problems),
        Expected::CurveMatrices => check_curve_matrices(fx, &mut problems),
    }
    FixtureOutcome {
        name: fx.name,
        pass: problems.is_empty(),
        details: problems,
    }
}

fn check_fiber(
    fx: &Fixture,
    status: Status,
    divisible_rank: usize,
    divisor_chain: &[u64],
    kulikov: KulikovExpectation,
    problems: &mut Vec<String>,
) {
    let fiber = match load_special_fiber(fx.document) {
        Ok(f) => f,
        Err(e) => {
            problems.push(format!("does not load: {e}"));
            return;
        }
    };
    match load_special_fiber(&fiber.to_json()) {
        Ok(again) if again == fiber => {}
        _ => problems.push("document does not round-trip".into()),
    }
    match compute_obstruction(&fiber) {
        Err(e) => problems.push(format!("engine failed: {e}")),
        Ok(report) => {
            let chain: Vec<String> = report
                .homology
                .finite_part
                .chain()
                .iter()
                .map(ToString::to_string)
                .collect();
            let want: Vec<String> = divisor_chain.iter().map(ToString::to_string).collect();
            if chain != want {
                problems.push(format!("divisor chain {chain:?}, expected {want:?}"));
            }
            if report.homology.divisible_rank != divisible_rank {
                problems.push(format!(
                    "divisible rank {}, expected {divisible_rank}",
                    report.homology.divisible_rank
                ));
            }
            if report.status != status {
                problems.push(format!("status {}, expected {}", report.status.as_str(), status.as_str()));
            }
        }
    }
    match kulikov {
        KulikovExpectation::NotChecked => {}
        KulikovExpectation::NonSemistable => match classify_kulikov(&fiber) {
            Err(K3Error::NonSemistable { .. }) => {}
            other => problems.push(format!("expected a non-semistable refusal, got {other:?}")),
        },
        KulikovExpectation::AllEqual => match consonance_solve(&fiber) {
            Ok(cert) if cert.is_all_equal() && verify_certificate(&fiber, &cert) => {}
            Ok(_) => problems.push("certificate does not replay".into()),
            Err(e) => problems.push(format!("consonance failed: {e}")),
        },
    }
}

fn check_curve_matrices(fx: &Fixture, problems: &mut Vec<String>) {
    let set = match load_curve_matrices(fx.document) {
        Ok(s) => s,
        Err(e) => {
            problems.push(format!("does not parse: {e}"));
            return;
        }
    };
    for case in &set.cases {
        match validate_curve_degeneration(&case.matrix(), &case.multiplicities()) {
            Ok(r) if r.is_exact() == case.expect_exact => {}
            Ok(r) => problems.push(format!("{}: got {r:?}", case.name)),
            Err(e) => problems.push(format!("{}: {e}", case.name)),
        }
    }
}

/// Runs the whole corpus; outcomes are in corpus order.
pub fn run_all(exec: Execution) -> Vec<FixtureOutcome> {
    map_collect(exec, FIXTURES.iter().collect(), run_fixture)
}

fn ints(v: &[i64]) -> Vec<Int> {
    v.iter().map(|&x| Int::from(x)).collect()
}

fn gram_doc(rows: &[Vec<i64>]) -> Vec<Vec<Int>> {
    rows.iter().map(|r| ints(r)).collect()
}

/// Two rational components glued along one curve `D` with `(D²) = −2` on the
/// left and `2` on the right. Each side has basis `(D, x₁, …)` where the `x_k`
/// are disjoint `(−1)`-curves with `(x_k · D)` given by `pairings`.
pub fn two_component(name: &str, left: &[i64], right: &[i64]) -> FiberDocument {
    let side = |id: &str, d_square: i64, pairings: &[i64]| {
        let rank = pairings.len() + 1;
        let mut gram = vec![vec![0i64; rank]; rank];
        gram[0][0] = d_square;
        for (k, &p) in pairings.iter().enumerate() {
            gram[0][k + 1] = p;
            gram[k + 1][0] = p;
            gram[k + 1][k + 1] = -1;
        }
        let curves = (1..rank)
            .map(|k| {
                let mut v = vec![0i64; rank];
                v[k] = 1;
                ints(&v)
            })
            .collect();
        ComponentDocument {
            id: id.into(),
            multiplicity: Int::from(1),
            lattice_rank: rank,
            gram: gram_doc(&gram),
            curves,
            kind: SurfaceKind::Rational,
            anticanonical_cycle: None,
            anchored_end: None,
        }
    };
    let unit = |rank: usize| {
        let mut v = vec![0i64; rank];
        v[0] = 1;
        ints(&v)
    };
    FiberDocument {
        name: name.into(),
        h1_geometric_vanishes: true,
        components: vec![side("A1", -2, left), side("A2", 2, right)],
        double_curves: vec![DoubleCurveDocument {
            label: "D".into(),
            left: "A1".into(),
            right: "A2".into(),
            class_in_left: unit(left.len() + 1),
            class_in_right: unit(right.len() + 1),
        }],
        triple_points: Vec::new(),
    }
}

pub const TETRAHEDRON: [[usize; 3]; 4] = [[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]];

pub const OCTAHEDRON: [[usize; 3]; 8] = [
    [0, 2, 4],
    [0, 4, 3],
    [0, 3, 5],
    [0, 5, 2],
    [1, 2, 4],
    [1, 4, 3],
    [1, 3, 5],
    [1, 5, 2],
];

/// The seven-vertex triangulation of the torus; every vertex has degree 6.
pub fn torus7() -> Vec<[usize; 3]> {
    (0..7)
        .flat_map(|i| [[i, (i + 1) % 7, (i + 3) % 7], [i, (i + 2) % 7, (i + 3) % 7]])
        .collect()
}

/// Suspension of a `k`-gon: apexes `0` and `1`, equator `2..k+2`.
pub fn bipyramid(k: usize) -> Vec<[usize; 3]> {
    (0..k)
        .flat_map(|i| {
            let a = 2 + i;
            let b = 2 + (i + 1) % k;
            [[0, a, b], [1, a, b]]
        })
        .collect()
}

/// Lattice, branch classes (in cyclic order) and extra curves for a rational
/// component whose anticanonical cycle has `n` branches.
struct CycleLattice {
    gram: Vec<Vec<i64>>,
    branches: Vec<Vec<i64>>,
    extra: Vec<Vec<i64>>,
}

fn unit_vec(rank: usize, k: usize) -> Vec<i64> {
    let mut v = vec![0; rank];
    v[k] = 1;
    v
}

/// `H − e_a − e_b` in a blow-up of ℙ² with basis `H, e₁, …` (indices from 1).
fn line_through(rank: usize, a: usize, b: usize) -> Vec<i64> {
    let mut v = unit_vec(rank, 0);
    v[a] = -1;
    v[b] = -1;
    v
}

fn blown_up_plane(points: usize) -> Vec<Vec<i64>> {
    let rank = points + 1;
    (0..rank)
        .map(|k| {
            let mut row = vec![0; rank];
            row[k] = if k == 0 { 1 } else { -1 };
            row
        })
        .collect()
}

fn cycle_lattice(n: usize) -> CycleLattice {
    match n {
        3 => CycleLattice {
            gram: blown_up_plane(6),
            branches: vec![line_through(7, 1, 2), line_through(7, 3, 4), line_through(7, 5, 6)],
            extra: (1..=6).map(|k| unit_vec(7, k)).collect(),
        },
        4 => {
            // ℙ¹×ℙ¹ blown up in four points: basis f, s, e₁..e₄.
            let mut gram = vec![vec![0i64; 6]; 6];
            gram[0][1] = 1;
            gram[1][0] = 1;
            for (k, row) in gram.iter_mut().enumerate().skip(2) {
                row[k] = -1;
            }
            let minus = |base: usize, e: usize| {
                let mut v = unit_vec(6, base);
                v[e] = -1;
                v
            };
            CycleLattice {
                gram,
                branches: vec![minus(0, 2), minus(1, 3), minus(0, 4), minus(1, 5)],
                extra: (2..6).map(|k| unit_vec(6, k)).collect(),
            }
        }
        5 => {
            let lines: Vec<Vec<i64>> = (1..=4)
                .flat_map(|a| (a + 1..=4).map(move |b| line_through(5, a, b)))
                .collect();
            CycleLattice {
                gram: blown_up_plane(4),
                branches: vec![
                    unit_vec(5, 1),
                    line_through(5, 1, 2),
                    unit_vec(5, 2),
                    line_through(5, 2, 3),
                    line_through(5, 1, 4),
                ],
                extra: (1..=4).map(|k| unit_vec(5, k)).chain(lines).collect(),
            }
        }
        6 => CycleLattice {
            gram: blown_up_plane(3),
            branches: vec![
                unit_vec(4, 1),
                line_through(4, 1, 2),
                unit_vec(4, 2),
                line_through(4, 2, 3),
                unit_vec(4, 3),
                line_through(4, 3, 1),
            ],
            extra: Vec::new(),
        },
        _ => {
            // No surface model: a cycle of (−1)-curves meeting their neighbours once.
            let gram = (0..n)
                .map(|a| {
                    (0..n)
                        .map(|b| {
                            if a == b {
                                -1
                            } else if (a + 1) % n == b || (b + 1) % n == a {
                                1
                            } else {
                                0
                            }
                        })
                        .collect()
                })
                .collect();
            CycleLattice {
                gram,
                branches: (0..n).map(|k| unit_vec(n, k)).collect(),
                extra: Vec::new(),
            }
        }
    }
}

/// Neighbours of `v` in the cyclic order of its link, starting from the
/// smallest and stepping first towards the smaller of its two link neighbours.
fn link_order(triangles: &[[usize; 3]], v: usize) -> Vec<usize> {
    let mut adj: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for t in triangles.iter().filter(|t| t.contains(&v)) {
        let others: Vec<usize> = t.iter().copied().filter(|&x| x != v).collect();
        adj.entry(others[0]).or_default().insert(others[1]);
        adj.entry(others[1]).or_default().insert(others[0]);
    }
    let Some(&start) = adj.keys().next() else {
        return Vec::new();
    };
    let mut order = vec![start];
    let mut prev = usize::MAX;
    let mut cur = start;
    while let Some(&next) = adj[&cur].iter().find(|&&w| w != prev && !order.contains(&w)) {
        order.push(next);
        prev = cur;
        cur = next;
    }
    order
}

/// A semistable fiber whose dual complex is the given triangulated surface.
///
/// Each vertex becomes a rational component whose anticanonical cycle runs
/// through its incident double curves in link order, with `(−1)`-branches and
/// enough exceptional curves to seed propagation when the cycle is short.
pub fn triangulated_fiber(name: &str, triangles: &[[usize; 3]]) -> FiberDocument {
    let vertices: BTreeSet<usize> = triangles.iter().flatten().copied().collect();
    let vid = |v: usize| format!("V{v}");
    let label = |a: usize, b: usize| format!("E{}_{}", a.min(b), a.max(b));

    let orders: BTreeMap<usize, Vec<usize>> =
        vertices.iter().map(|&v| (v, link_order(triangles, v))).collect();
    let lattices: BTreeMap<usize, CycleLattice> = orders
        .iter()
        .map(|(&v, order)| (v, cycle_lattice(order.len())))
        .collect();
    let class_on = |v: usize, w: usize| {
        let k = orders[&v].iter().position(|&x| x == w).expect("neighbour");
        ints(&lattices[&v].branches[k])
    };

    let components = vertices
        .iter()
        .map(|&v| {
            let lat = &lattices[&v];
            let curves = lat.branches.iter().chain(&lat.extra).map(|c| ints(c)).collect();
            ComponentDocument {
                id: vid(v),
                multiplicity: Int::from(1),
                lattice_rank: lat.gram.len(),
                gram: gram_doc(&lat.gram),
                curves,
                kind: SurfaceKind::Rational,
                anticanonical_cycle: Some(CycleDocument {
                    branches: orders[&v]
                        .iter()
                        .map(|&w| BranchDocument {
                            edge: Some(label(v, w)),
                            self_intersection: Some(Int::from(-1)),
                            nodal: false,
                        })
                        .collect(),
                }),
                anchored_end: None,
            }
        })
        .collect();

    let edges: BTreeSet<(usize, usize)> = triangles
        .iter()
        .flat_map(|t| [(t[0], t[1]), (t[0], t[2]), (t[1], t[2])])
        .map(|(a, b)| (a.min(b), a.max(b)))
        .collect();
    let double_curves = edges
        .iter()
        .map(|&(a, b)| DoubleCurveDocument {
            label: label(a, b),
            left: vid(a),
            right: vid(b),
            class_in_left: class_on(a, b),
            class_in_right: class_on(b, a),
        })
        .collect();
    let triple_points = triangles
        .iter()
        .map(|t| {
            let mut t = *t;
            t.sort_unstable();
            TriplePointDocument {
                components: t.map(vid),
                edges: [label(t[0], t[1]), label(t[0], t[2]), label(t[1], t[2])],
            }
        })
        .collect();

    FiberDocument {
        name: name.into(),
        h1_geometric_vanishes: true,
        components,
        double_curves,
        triple_points,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fiber::SpecialFiber;

    fn build(doc: &FiberDocument) -> SpecialFiber {
        SpecialFiber::from_document(doc).unwrap()
    }

    #[test]
    fn names_are_unique_and_resolvable() {
        let names = list_fixtures();
        let set: BTreeSet<_> = names.iter().collect();
        assert_eq!(set.len(), names.len());
        for n in names {
            assert_eq!(fixture(n).unwrap().name, n);
        }
        assert_eq!(fixture("nope"), Err(UnknownFixture("nope".into())));
    }

    #[test]
    fn bundled_two_component_matches_builder() {
        let built = build(&two_component("two_component", &[2, 6], &[2, 6]));
        assert_eq!(fixture("two_component").unwrap().load().unwrap(), built);
    }

    #[test]
    fn bundled_triangulations_match_builder() {
        let tet = build(&triangulated_fiber("tetrahedron_typeIII", &TETRAHEDRON));
        assert_eq!(fixture("tetrahedron_typeIII").unwrap().load().unwrap(), tet);
        let oct = build(&triangulated_fiber("octahedron_typeIII", &OCTAHEDRON));
        assert_eq!(fixture("octahedron_typeIII").unwrap().load().unwrap(), oct);
    }

    #[test]
    fn link_orders_are_cycles() {
        for tris in [TETRAHEDRON.to_vec(), OCTAHEDRON.to_vec(), torus7(), bipyramid(7)] {
            let verts: BTreeSet<usize> = tris.iter().flatten().copied().collect();
            for v in verts {
                let order = link_order(&tris, v);
                let n = order.len();
                for k in 0..n {
                    let (a, b) = (order[k], order[(k + 1) % n]);
                    assert!(tris.iter().any(|t| t.contains(&v) && t.contains(&a) && t.contains(&b)));
                }
            }
        }
    }

    #[test]
    fn cycle_lattices_are_anticanonical_polygons() {
        for n in 3..=8 {
            let lat = cycle_lattice(n);
            let g = IntegerMatrix::from_rows(
                lat.gram.len(),
                lat.gram
                    .iter()
                    .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
                    .collect(),
            )
            .unwrap();
            let b: Vec<Vec<BigInt>> = lat
                .branches
                .iter()
                .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
                .collect();
            let pair = |x: &[BigInt], y: &[BigInt]| crate::linalg::dot(x, &g.mul_vec(y));
            for a in 0..n {
                for c in 0..n {
                    let want = if a == c {
                        -1
                    } else if (a + 1) % n == c || (c + 1) % n == a {
                        1
                    } else {
                        0
                    };
                    assert_eq!(pair(&b[a], &b[c]), BigInt::from(want), "n={n} {a} {c}");
                }
            }
        }
    }
}
