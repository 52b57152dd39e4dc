//! Combinatorial model of a special fiber `A = Σ mᵢAᵢ`.
//!
//! Each component carries a lattice (a free module with an intersection
//! form) standing in for its Néron–Severi group modulo torsion, plus a list
//! of curve classes. Double curves carry their class on both sides.

use std::collections::{HashMap, HashSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::document::{
    from_ints, to_ints, BranchDocument, ComponentDocument, CycleDocument, DoubleCurveDocument,
    FiberDocument, Int, SurfaceKind, TriplePointDocument,
};
use crate::linalg::{dot, IntegerMatrix};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FiberError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("component {component}: multiplicity does not divide the weighted sum of its double-curve classes")]
    NonIntegralDiagonal { component: String },
    #[error("internal complex violation: M·v is nonzero at row {row}")]
    InternalComplexViolation { row: usize },
    #[error("unknown component {0}")]
    UnknownComponent(String),
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> FiberError {
    FiberError::Validation {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    /// Index into [`SpecialFiber::double_curves`]; `None` for a branch inside
    /// the component's own singular locus.
    pub edge: Option<usize>,
    pub self_intersection: Option<BigInt>,
    pub nodal: bool,
}

/// Cyclically ordered branches of a component's anticanonical cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnticanonicalCycle {
    pub branches: Vec<Branch>,
}

impl AnticanonicalCycle {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Whether branches `a` and `b` are distinct and cyclically consecutive.
    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        let n = self.len();
        a != b && a < n && b < n && ((a + 1) % n == b || (b + 1) % n == a)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Component {
    pub id: String,
    pub multiplicity: BigInt,
    pub gram: IntegerMatrix,
    pub curves: Vec<Vec<BigInt>>,
    pub kind: SurfaceKind,
    pub anticanonical_cycle: Option<AnticanonicalCycle>,
    pub anchored_end: Option<bool>,
}

impl Component {
    pub fn lattice_rank(&self) -> usize {
        self.gram.rows()
    }

    pub fn pair(&self, x: &[BigInt], y: &[BigInt]) -> BigInt {
        dot(x, &self.gram.mul_vec(y))
    }

    /// Curve generators as the rows of a matrix.
    pub fn curve_matrix(&self) -> IntegerMatrix {
        IntegerMatrix::from_rows(self.lattice_rank(), self.curves.clone())
            .expect("validated curve lengths")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DoubleCurve {
    pub label: String,
    pub left: usize,
    pub right: usize,
    pub class_in_left: Vec<BigInt>,
    pub class_in_right: Vec<BigInt>,
}

impl DoubleCurve {
    pub fn other_end(&self, i: usize) -> Option<usize> {
        if i == self.left {
            Some(self.right)
        } else if i == self.right {
            Some(self.left)
        } else {
            None
        }
    }

    /// The class of this curve on component `i`, if `i` is one of its ends.
    pub fn class_on(&self, i: usize) -> Option<&[BigInt]> {
        if i == self.left {
            Some(&self.class_in_left)
        } else if i == self.right {
            Some(&self.class_in_right)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePoint {
    pub components: [usize; 3],
    pub edges: [usize; 3],
}

/// A validated special fiber. Immutable after loading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialFiber {
    pub name: String,
    pub h1_geometric_vanishes: bool,
    pub components: Vec<Component>,
    pub double_curves: Vec<DoubleCurve>,
    pub triple_points: Vec<TriplePoint>,
    pub warnings: Vec<String>,
}

/// Parses and validates a fiber document.
pub fn load_special_fiber(text: &str) -> Result<SpecialFiber, FiberError> {
    let doc: FiberDocument =
        serde_json::from_str(text).map_err(|e| FiberError::Parse(e.to_string()))?;
    SpecialFiber::from_document(&doc)
}

impl SpecialFiber {
    pub fn from_document(doc: &FiberDocument) -> Result<Self, FiberError> {
        if doc.components.is_empty() {
            return Err(invalid("components", "at least one component is required"));
        }

        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut components = Vec::with_capacity(doc.components.len());
        let mut warnings = Vec::new();
        for (i, c) in doc.components.iter().enumerate() {
            let path = format!("components[{i}]");
            if c.id.is_empty() {
                return Err(invalid(format!("{path}.id"), "component id is empty"));
            }
            if index.insert(&c.id, i).is_some() {
                return Err(invalid(format!("{path}.id"), format!("duplicate id {:?}", c.id)));
            }
            if c.multiplicity.0 < BigInt::one() {
                return Err(invalid(format!("{path}.multiplicity"), "must be at least 1"));
            }
            let rank = c.lattice_rank;
            if c.gram.len() != rank {
                return Err(invalid(
                    format!("{path}.gram"),
                    format!("expected {rank} rows, got {}", c.gram.len()),
                ));
            }
            let mut rows = Vec::with_capacity(rank);
            for (r, row) in c.gram.iter().enumerate() {
                if row.len() != rank {
                    return Err(invalid(
                        format!("{path}.gram[{r}]"),
                        format!("expected {rank} entries, got {}", row.len()),
                    ));
                }
                rows.push(from_ints(row));
            }
            let gram = IntegerMatrix::from_rows(rank, rows).expect("checked above");
            if !gram.is_symmetric() {
                return Err(invalid(format!("{path}.gram"), "matrix is not symmetric"));
            }
            let mut curves = Vec::with_capacity(c.curves.len());
            for (k, curve) in c.curves.iter().enumerate() {
                if curve.len() != rank {
                    return Err(invalid(
                        format!("{path}.curves[{k}]"),
                        format!("expected length {rank}, got {}", curve.len()),
                    ));
                }
                curves.push(from_ints(curve));
            }
            if curves.is_empty() {
                warnings.push(format!(
                    "component {} declares no curves and imposes no constraint",
                    c.id
                ));
            }
            components.push(Component {
                id: c.id.clone(),
                multiplicity: c.multiplicity.0.clone(),
                gram,
                curves,
                kind: c.kind,
                anticanonical_cycle: None,
                anchored_end: c.anchored_end,
            });
        }

        let resolve = |id: &str, path: String| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| invalid(path, format!("unknown component {id:?}")))
        };

        let mut labels: HashMap<&str, usize> = HashMap::new();
        let mut double_curves = Vec::with_capacity(doc.double_curves.len());
        for (e, d) in doc.double_curves.iter().enumerate() {
            let path = format!("double_curves[{e}]");
            if labels.insert(&d.label, e).is_some() {
                return Err(invalid(
                    format!("{path}.label"),
                    format!("duplicate label {:?}", d.label),
                ));
            }
            let left = resolve(&d.left, format!("{path}.left"))?;
            let right = resolve(&d.right, format!("{path}.right"))?;
            if left == right {
                return Err(invalid(path, "a double curve must join two distinct components"));
            }
            for (side, class, comp) in [
                ("class_in_left", &d.class_in_left, left),
                ("class_in_right", &d.class_in_right, right),
            ] {
                let rank = components[comp].lattice_rank();
                if class.len() != rank {
                    return Err(invalid(
                        format!("{path}.{side}"),
                        format!("expected length {rank}, got {}", class.len()),
                    ));
                }
                if class.iter().all(|x| x.0.is_zero()) {
                    return Err(invalid(format!("{path}.{side}"), "class is zero"));
                }
            }
            double_curves.push(DoubleCurve {
                label: d.label.clone(),
                left,
                right,
                class_in_left: from_ints(&d.class_in_left),
                class_in_right: from_ints(&d.class_in_right),
            });
        }

        let mut triple_points = Vec::with_capacity(doc.triple_points.len());
        for (t, tp) in doc.triple_points.iter().enumerate() {
            let path = format!("triple_points[{t}]");
            let mut comps = [0; 3];
            for (k, slot) in comps.iter_mut().enumerate() {
                *slot = resolve(&tp.components[k], format!("{path}.components[{k}]"))?;
            }
            if comps[0] == comps[1] || comps[1] == comps[2] || comps[0] == comps[2] {
                return Err(invalid(
                    format!("{path}.components"),
                    "components must be pairwise distinct",
                ));
            }
            let mut edges = [0; 3];
            for (k, slot) in edges.iter_mut().enumerate() {
                *slot = *labels.get(tp.edges[k].as_str()).ok_or_else(|| {
                    invalid(
                        format!("{path}.edges[{k}]"),
                        format!("unknown double curve {:?}", tp.edges[k]),
                    )
                })?;
            }
            let mut pairs: Vec<(usize, usize)> = edges
                .iter()
                .map(|&e| {
                    let d = &double_curves[e];
                    (d.left.min(d.right), d.left.max(d.right))
                })
                .collect();
            pairs.sort_unstable();
            let mut want = vec![
                (comps[0].min(comps[1]), comps[0].max(comps[1])),
                (comps[0].min(comps[2]), comps[0].max(comps[2])),
                (comps[1].min(comps[2]), comps[1].max(comps[2])),
            ];
            want.sort_unstable();
            if pairs != want {
                return Err(invalid(
                    format!("{path}.edges"),
                    "the three double curves must join the three component pairs",
                ));
            }
            triple_points.push(TriplePoint {
                components: comps,
                edges,
            });
        }

        for (i, c) in doc.components.iter().enumerate() {
            if let Some(cycle) = &c.anticanonical_cycle {
                let path = format!("components[{i}].anticanonical_cycle");
                components[i].anticanonical_cycle =
                    Some(parse_cycle(cycle, i, &labels, &double_curves, &path)?);
            }
        }

        let fiber = SpecialFiber {
            name: doc.name.clone(),
            h1_geometric_vanishes: doc.h1_geometric_vanishes,
            components,
            double_curves,
            triple_points,
            warnings,
        };
        if !fiber.dual_complex().is_connected() {
            return Err(invalid("double_curves", "the dual complex is disconnected"));
        }
        Ok(fiber)
    }

    pub fn to_document(&self) -> FiberDocument {
        let id = |i: usize| self.components[i].id.clone();
        let label = |e: usize| self.double_curves[e].label.clone();
        FiberDocument {
            name: self.name.clone(),
            h1_geometric_vanishes: self.h1_geometric_vanishes,
            components: self
                .components
                .iter()
                .map(|c| ComponentDocument {
                    id: c.id.clone(),
                    multiplicity: Int(c.multiplicity.clone()),
                    lattice_rank: c.lattice_rank(),
                    gram: c.gram.row_vecs().iter().map(|r| to_ints(r)).collect(),
                    curves: c.curves.iter().map(|r| to_ints(r)).collect(),
                    kind: c.kind,
                    anticanonical_cycle: c.anticanonical_cycle.as_ref().map(|cy| CycleDocument {
                        branches: cy
                            .branches
                            .iter()
                            .map(|b| BranchDocument {
                                edge: b.edge.map(label),
                                self_intersection: b.self_intersection.clone().map(Int),
                                nodal: b.nodal,
                            })
                            .collect(),
                    }),
                    anchored_end: c.anchored_end,
                })
                .collect(),
            double_curves: self
                .double_curves
                .iter()
                .map(|d| DoubleCurveDocument {
                    label: d.label.clone(),
                    left: id(d.left),
                    right: id(d.right),
                    class_in_left: to_ints(&d.class_in_left),
                    class_in_right: to_ints(&d.class_in_right),
                })
                .collect(),
            triple_points: self
                .triple_points
                .iter()
                .map(|t| TriplePointDocument {
                    components: t.components.map(id),
                    edges: t.edges.map(label),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("documents serialize")
    }

    pub fn component_index(&self, id: &str) -> Option<usize> {
        self.components.iter().position(|c| c.id == id)
    }

    pub fn multiplicities(&self) -> Vec<BigInt> {
        self.components.iter().map(|c| c.multiplicity.clone()).collect()
    }

    pub fn is_semistable(&self) -> bool {
        self.components.iter().all(|c| c.multiplicity.is_one())
    }

    /// `(C²)` of double curve `e` computed on its component `i`.
    pub fn self_intersection_on(&self, e: usize, i: usize) -> Option<BigInt> {
        let class = self.double_curves[e].class_on(i)?;
        Some(self.components[i].pair(class, class))
    }

    pub fn dual_complex(&self) -> DualComplex {
        DualComplex {
            vertices: self.components.iter().map(|c| c.id.clone()).collect(),
            edges: self
                .double_curves
                .iter()
                .map(|d| DualEdge {
                    label: d.label.clone(),
                    ends: (d.left, d.right),
                })
                .collect(),
            faces: self
                .triple_points
                .iter()
                .map(|t| DualFace {
                    vertices: t.components,
                    edges: t.edges,
                })
                .collect(),
        }
    }
}

fn parse_cycle(
    doc: &CycleDocument,
    component: usize,
    labels: &HashMap<&str, usize>,
    double_curves: &[DoubleCurve],
    path: &str,
) -> Result<AnticanonicalCycle, FiberError> {
    let n = doc.branches.len();
    if n == 0 {
        return Err(invalid(format!("{path}.branches"), "a cycle needs at least one branch"));
    }
    let mut seen = HashSet::new();
    let mut branches = Vec::with_capacity(n);
    for (k, b) in doc.branches.iter().enumerate() {
        let bpath = format!("{path}.branches[{k}]");
        let edge = match &b.edge {
            None => None,
            Some(label) => {
                let e = *labels.get(label.as_str()).ok_or_else(|| {
                    invalid(format!("{bpath}.edge"), format!("unknown double curve {label:?}"))
                })?;
                if double_curves[e].other_end(component).is_none() {
                    return Err(invalid(
                        format!("{bpath}.edge"),
                        format!("double curve {label:?} does not lie on this component"),
                    ));
                }
                if !seen.insert(e) {
                    return Err(invalid(
                        format!("{bpath}.edge"),
                        format!("double curve {label:?} appears twice"),
                    ));
                }
                Some(e)
            }
        };
        if b.nodal != (n == 1) {
            return Err(invalid(
                format!("{bpath}.nodal"),
                "a branch is nodal exactly when the cycle has a single branch",
            ));
        }
        branches.push(Branch {
            edge,
            self_intersection: b.self_intersection.as_ref().map(|x| x.0.clone()),
            nodal: b.nodal,
        });
    }
    Ok(AnticanonicalCycle { branches })
}

/// Restriction classes: for component `i`, column `j` of `Rᵢ` is the class of
/// `𝒪(Aⱼ)|_{Aᵢ}` in the lattice of `Aᵢ`.
///
/// Off-diagonal columns sum the double curves between `i` and `j`; the diagonal
/// column is forced by `Σⱼ mⱼ·c_{ij} = 0`.
pub fn restriction_classes(fiber: &SpecialFiber) -> Result<Vec<IntegerMatrix>, FiberError> {
    let count = fiber.components.len();
    let mut out = Vec::with_capacity(count);
    for (i, comp) in fiber.components.iter().enumerate() {
        let rank = comp.lattice_rank();
        let mut r = IntegerMatrix::zeros(rank, count);
        for d in &fiber.double_curves {
            let Some(j) = d.other_end(i) else { continue };
            let class = d.class_on(i).expect("incident");
            for (k, x) in class.iter().enumerate() {
                let cur = r.get(k, j) + x;
                r.set(k, j, cur);
            }
        }
        for k in 0..rank {
            let weighted: BigInt = (0..count)
                .filter(|&j| j != i)
                .map(|j| &fiber.components[j].multiplicity * r.get(k, j))
                .sum();
            let (q, rem) = weighted.div_rem(&comp.multiplicity);
            if !rem.is_zero() {
                return Err(FiberError::NonIntegralDiagonal {
                    component: comp.id.clone(),
                });
            }
            r.set(k, i, -q);
        }
        out.push(r);
    }
    Ok(out)
}

/// The integer matrix of `δ` and the multiplicity vector `v`, with `M·v = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaMatrix {
    pub matrix: IntegerMatrix,
    pub multiplicities: Vec<BigInt>,
    /// `row_owner[r]` is the component whose curve produced row `r`.
    pub row_owner: Vec<usize>,
}

pub fn delta_matrix(fiber: &SpecialFiber) -> Result<DeltaMatrix, FiberError> {
    let classes = restriction_classes(fiber)?;
    let count = fiber.components.len();
    let mut blocks = Vec::with_capacity(count);
    let mut row_owner = Vec::new();
    for (i, (comp, r)) in fiber.components.iter().zip(&classes).enumerate() {
        let block = &(&comp.curve_matrix() * &comp.gram) * r;
        row_owner.extend(std::iter::repeat_n(i, block.rows()));
        blocks.push(block);
    }
    let matrix = IntegerMatrix::vstack(count, &blocks);
    let multiplicities = fiber.multiplicities();
    if let Some(row) = matrix.mul_vec(&multiplicities).iter().position(|x| !x.is_zero()) {
        return Err(FiberError::InternalComplexViolation { row });
    }
    Ok(DeltaMatrix {
        matrix,
        multiplicities,
        row_owner,
    })
}

/// Degrees of the vertical 1-cycle `gamma` (a class on component `component`)
/// against every component.
pub fn degree_vector(
    fiber: &SpecialFiber,
    component: &str,
    gamma: &[BigInt],
) -> Result<Vec<BigInt>, FiberError> {
    let i = fiber
        .component_index(component)
        .ok_or_else(|| FiberError::UnknownComponent(component.to_string()))?;
    let comp = &fiber.components[i];
    if gamma.len() != comp.lattice_rank() {
        return Err(FiberError::DimensionMismatch {
            expected: comp.lattice_rank(),
            got: gamma.len(),
        });
    }
    let r = &restriction_classes(fiber)?[i];
    Ok((0..fiber.components.len())
        .map(|j| comp.pair(gamma, &r.column(j)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualEdge {
    pub label: String,
    pub ends: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualFace {
    pub vertices: [usize; 3],
    pub edges: [usize; 3],
}

/// Vertices are components, edges double curves, faces triple points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualComplex {
    pub vertices: Vec<String>,
    pub edges: Vec<DualEdge>,
    pub faces: Vec<DualFace>,
}

impl DualComplex {
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    /// Edge indices incident to vertex `v`.
    pub fn edges_at(&self, v: usize) -> Vec<usize> {
        (0..self.edges.len())
            .filter(|&e| self.edges[e].ends.0 == v || self.edges[e].ends.1 == v)
            .collect()
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges_at(v).len()
    }

    /// Distinct neighbouring vertices, ascending.
    pub fn neighbours(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .edges_at(v)
            .into_iter()
            .map(|e| {
                let (a, b) = self.edges[e].ends;
                if a == v {
                    b
                } else {
                    a
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Face indices containing edge `e`.
    pub fn faces_at_edge(&self, e: usize) -> Vec<usize> {
        (0..self.faces.len())
            .filter(|&f| self.faces[f].edges.contains(&e))
            .collect()
    }

    pub fn is_connected(&self) -> bool {
        let n = self.vertices.len();
        if n == 0 {
            return false;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for w in self.neighbours(v) {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}
