//! Audits for semistable K3 degenerations: Kulikov type, sphere recognition
//! of the dual complex, the Euler identity `Σ(6 − nᵢ) = 12`, minus-one-form
//! and triple-point checks, and a symbolic consonance solver that proves all
//! `λᵢ` equal on type II/III fibers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::SurfaceKind;
use crate::fiber::{DualComplex, SpecialFiber};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KulikovType {
    I,
    II,
    III,
}

impl fmt::Display for KulikovType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            KulikovType::I => "I",
            KulikovType::II => "II",
            KulikovType::III => "III",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub kind: KulikovType,
    pub reasons: Vec<String>,
}

/// A failed local condition on one component (and optionally one branch).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub component: String,
    pub branch: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.branch {
            Some(b) => write!(f, "{} branch {}: {}", self.component, b, self.message),
            None => write!(f, "{}: {}", self.component, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum K3Error {
    #[error("not a Kulikov degeneration: {0}")]
    NotKulikov(String),
    #[error("component {component} has multiplicity greater than 1")]
    NonSemistable { component: String },
    #[error("component {component} has no anticanonical cycle")]
    MissingCycleData { component: String },
    #[error("component {component} branch {branch}: self-intersection is neither derivable nor supplied")]
    MissingSelfIntersection { component: String, branch: usize },
    #[error("invalid anticanonical cycle on {component}: {message}")]
    InvalidCycle { component: String, message: String },
    #[error("no component has fewer than six branches, so no seed exists")]
    NoSeed,
    #[error("no end of the type II chain is marked as anchored")]
    NoAnchor,
    #[error("both ends of the type II chain are marked as anchored")]
    AmbiguousAnchor,
    #[error("fiber is not in minus-one-form: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    NotMinusOneForm(Vec<Violation>),
    #[error("propagation stopped before reaching {}", .frontier.join(", "))]
    Stuck {
        frontier: Vec<String>,
        certificate: Box<ConsonanceCertificate>,
    },
}

fn not_kulikov(msg: impl Into<String>) -> K3Error {
    K3Error::NotKulikov(msg.into())
}

/// Classifies a semistable fiber as Kulikov type I, II or III.
pub fn classify_kulikov(fiber: &SpecialFiber) -> Result<Classification, K3Error> {
    if let Some(c) = fiber.components.iter().find(|c| !c.multiplicity.is_one()) {
        return Err(K3Error::NonSemistable {
            component: c.id.clone(),
        });
    }
    let g = fiber.dual_complex();
    let count = fiber.components.len();

    if count == 1 {
        let c = &fiber.components[0];
        if c.kind != SurfaceKind::K3 {
            return Err(not_kulikov(format!(
                "the single component {} is {}, not a K3 surface",
                c.id, c.kind
            )));
        }
        return Ok(Classification {
            kind: KulikovType::I,
            reasons: vec![format!("single smooth K3 component {}", c.id)],
        });
    }

    if fiber.triple_points.is_empty() {
        let order = path_order(&g).ok_or_else(|| {
            not_kulikov("without triple points the dual graph must be a simple path")
        })?;
        let last = order.len() - 1;
        for (pos, &i) in order.iter().enumerate() {
            let c = &fiber.components[i];
            let want = if pos == 0 || pos == last {
                SurfaceKind::Rational
            } else {
                SurfaceKind::RuledOverElliptic
            };
            if c.kind != want {
                let role = if want == SurfaceKind::Rational {
                    "end"
                } else {
                    "interior"
                };
                return Err(not_kulikov(format!(
                    "{role} component {} is {}, expected {want}",
                    c.id, c.kind
                )));
            }
        }
        for pos in 1..last {
            let i = order[pos];
            let before = edge_between(&g, order[pos - 1], i).expect("path edge");
            let after = edge_between(&g, i, order[pos + 1]).expect("path edge");
            let comp = &fiber.components[i];
            let a = fiber.double_curves[before].class_on(i).expect("incident");
            let b = fiber.double_curves[after].class_on(i).expect("incident");
            if !comp.pair(a, b).is_zero() {
                return Err(not_kulikov(format!(
                    "double curves {} and {} meet on {}",
                    fiber.double_curves[before].label, fiber.double_curves[after].label, comp.id
                )));
            }
        }
        let ids: Vec<&str> = order.iter().map(|&i| fiber.components[i].id.as_str()).collect();
        return Ok(Classification {
            kind: KulikovType::II,
            reasons: vec![
                format!("chain {}", ids.join(" - ")),
                "rational ends, elliptic ruled interior, disjoint double curves".into(),
            ],
        });
    }

    if let Some(c) = fiber
        .components
        .iter()
        .find(|c| c.kind != SurfaceKind::Rational)
    {
        return Err(not_kulikov(format!(
            "component {} is {}, but a fiber with triple points needs rational components",
            c.id, c.kind
        )));
    }
    match is_sphere(&g) {
        SphereCheck::Yes => Ok(Classification {
            kind: KulikovType::III,
            reasons: vec![
                "all components rational".into(),
                format!(
                    "dual complex is a sphere ({} vertices, {} edges, {} faces)",
                    g.vertices.len(),
                    g.edges.len(),
                    g.faces.len()
                ),
            ],
        }),
        SphereCheck::No(why) => Err(not_kulikov(format!(
            "dual complex is not a sphere: {}",
            why.join("; ")
        ))),
    }
}

/// Vertex order along the dual graph if it is a simple path on at least two
/// vertices without parallel edges.
fn path_order(g: &DualComplex) -> Option<Vec<usize>> {
    let n = g.vertices.len();
    if n < 2 || g.edges.len() != n - 1 {
        return None;
    }
    if (0..n).any(|v| g.neighbours(v).len() != g.degree(v) || g.degree(v) > 2) {
        return None;
    }
    let start = (0..n).find(|&v| g.degree(v) == 1)?;
    let mut order = vec![start];
    let mut prev = usize::MAX;
    let mut cur = start;
    while let Some(&next) = g.neighbours(cur).iter().find(|&&w| w != prev) {
        order.push(next);
        prev = cur;
        cur = next;
        if order.len() > n {
            return None;
        }
    }
    (order.len() == n).then_some(order)
}

fn edge_between(g: &DualComplex, a: usize, b: usize) -> Option<usize> {
    g.edges
        .iter()
        .position(|e| e.ends == (a, b) || e.ends == (b, a))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SphereCheck {
    Yes,
    No(Vec<String>),
}

impl SphereCheck {
    pub fn is_yes(&self) -> bool {
        matches!(self, SphereCheck::Yes)
    }
}

/// A connected closed surface with Euler characteristic 2 is a sphere.
pub fn is_sphere(g: &DualComplex) -> SphereCheck {
    let mut why = Vec::new();
    if g.faces.is_empty() {
        return SphereCheck::No(vec!["no faces".into()]);
    }
    for e in 0..g.edges.len() {
        let k = g.faces_at_edge(e).len();
        if k != 2 {
            why.push(format!("edge {} lies in {k} faces", g.edges[e].label));
        }
    }
    for v in 0..g.vertices.len() {
        if !link_is_cycle(g, v) {
            why.push(format!("link of {} is not a single cycle", g.vertices[v]));
        }
    }
    if !g.is_connected() {
        why.push("not connected".into());
    }
    let chi = g.euler_characteristic();
    if chi != 2 {
        why.push(format!("Euler characteristic is {chi}"));
    }
    if why.is_empty() {
        SphereCheck::Yes
    } else {
        SphereCheck::No(why)
    }
}

/// The link of `v`: one node per incident edge, one arc per incident face.
fn link_is_cycle(g: &DualComplex, v: usize) -> bool {
    let nodes = g.edges_at(v);
    if nodes.len() < 3 {
        return false;
    }
    let slot = |e: usize| nodes.iter().position(|&x| x == e);
    let mut adj = vec![Vec::new(); nodes.len()];
    for f in &g.faces {
        if !f.vertices.contains(&v) {
            continue;
        }
        let mine: Vec<usize> = f
            .edges
            .iter()
            .filter_map(|&e| slot(e))
            .collect();
        if mine.len() != 2 {
            return false;
        }
        adj[mine[0]].push(mine[1]);
        adj[mine[1]].push(mine[0]);
    }
    if adj.iter().any(|a| a.len() != 2) {
        return false;
    }
    let mut seen = vec![false; nodes.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(x) = stack.pop() {
        for &y in &adj[x] {
            if !seen[y] {
                seen[y] = true;
                stack.push(y);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EulerCheck {
    pub value: i64,
    pub pass: bool,
    /// Components whose branch count differs from their vertex degree.
    pub degree_mismatches: Vec<String>,
}

/// `Σᵢ (6 − nᵢ)`, which must equal 12.
pub fn euler_check(fiber: &SpecialFiber) -> Result<EulerCheck, K3Error> {
    let g = fiber.dual_complex();
    let mut value = 0i64;
    let mut degree_mismatches = Vec::new();
    for (i, c) in fiber.components.iter().enumerate() {
        let cycle = c
            .anticanonical_cycle
            .as_ref()
            .ok_or_else(|| K3Error::MissingCycleData {
                component: c.id.clone(),
            })?;
        value += 6 - cycle.len() as i64;
        if cycle.len() != g.degree(i) {
            degree_mismatches.push(c.id.clone());
        }
    }
    Ok(EulerCheck {
        value,
        pass: value == 12,
        degree_mismatches,
    })
}

/// Self-intersection of branch `b` of component `i`: from the lattice when the
/// branch is a double curve, otherwise the supplied value.
fn branch_square(
    fiber: &SpecialFiber,
    i: usize,
    b: usize,
) -> Result<(BigInt, Option<Violation>), K3Error> {
    let comp = &fiber.components[i];
    let branch = &comp.anticanonical_cycle.as_ref().expect("checked").branches[b];
    let derived = branch.edge.and_then(|e| fiber.self_intersection_on(e, i));
    match (derived, &branch.self_intersection) {
        (Some(d), Some(s)) if &d != s => Ok((
            d.clone(),
            Some(Violation {
                component: comp.id.clone(),
                branch: Some(b),
                message: format!("supplied self-intersection {s} disagrees with lattice value {d}"),
            }),
        )),
        (Some(d), _) => Ok((d, None)),
        (None, Some(s)) => Ok((s.clone(), None)),
        (None, None) => Err(K3Error::MissingSelfIntersection {
            component: comp.id.clone(),
            branch: b,
        }),
    }
}

/// Smooth branches must have self-intersection −1, a nodal branch +1, and
/// no cycle may have more than six branches.
pub fn minus_one_form_check(fiber: &SpecialFiber) -> Result<Vec<Violation>, K3Error> {
    let mut out = Vec::new();
    for (i, c) in fiber.components.iter().enumerate() {
        let cycle = c
            .anticanonical_cycle
            .as_ref()
            .ok_or_else(|| K3Error::MissingCycleData {
                component: c.id.clone(),
            })?;
        let n = cycle.len();
        if n > 6 {
            out.push(Violation {
                component: c.id.clone(),
                branch: None,
                message: format!("{n} branches, but a rational anticanonical pair in minus-one-form has at most 6"),
            });
        }
        let want = BigInt::from(if n == 1 { 1 } else { -1 });
        for b in 0..n {
            let (square, conflict) = branch_square(fiber, i, b)?;
            out.extend(conflict);
            if square != want {
                out.push(Violation {
                    component: c.id.clone(),
                    branch: Some(b),
                    message: format!("self-intersection {square}, expected {want}"),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TriplePointResult {
    pub label: String,
    pub left_square: BigInt,
    pub right_square: BigInt,
    pub triple_points: usize,
    pub pass: bool,
}

/// `(C²)_left + (C²)_right + τ(C) = 0` for each double curve, `τ` counting
/// the triple points on `C`.
pub fn triple_point_check(fiber: &SpecialFiber) -> Vec<TriplePointResult> {
    let g = fiber.dual_complex();
    fiber
        .double_curves
        .iter()
        .enumerate()
        .map(|(e, d)| {
            let left_square = fiber.self_intersection_on(e, d.left).expect("incident");
            let right_square = fiber.self_intersection_on(e, d.right).expect("incident");
            let tau = g.faces_at_edge(e).len();
            let pass = (&left_square + &right_square + BigInt::from(tau)).is_zero();
            TriplePointResult {
                label: d.label.clone(),
                left_square,
                right_square,
                triple_points: tau,
                pass,
            }
        })
        .collect()
}

/// One deduction in a consonance proof. Components are named by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Step {
    /// A component with fewer than six branches: exceptional curves meeting
    /// one branch each force every `μ_C = 0`.
    SeedBySmallN { component: String, n: usize },
    /// Two adjacent branches with `μ = 0` force all `μ = 0` on the cycle.
    PolygonPropagation {
        component: String,
        branches: [usize; 2],
    },
    /// A neighbour of a consonant component is consonant.
    NeighbourPropagation { from: String, to: String },
    /// On an elliptic ruled component, `λ_from = λ_here` forces `λ_to = λ_here`.
    ChainRecurrence {
        component: String,
        from: String,
        to: String,
    },
    /// An exceptional curve on a non-minimal chain end meets its double curve once.
    Anchor {
        component: String,
        neighbour: String,
        justification: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum Conclusion {
    AllEqual,
    /// Class index of each component's `λ` under the derived equalities.
    /// Distinct indices may be assigned distinct values without violating
    /// any step used.
    Failure { witness: BTreeMap<String, usize> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsonanceCertificate {
    pub kulikov_type: KulikovType,
    pub seed: Option<String>,
    pub steps: Vec<Step>,
    pub conclusion: Conclusion,
}

impl ConsonanceCertificate {
    pub fn is_all_equal(&self) -> bool {
        self.conclusion == Conclusion::AllEqual
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("certificates serialize")
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("type: {}\n", self.kulikov_type);
        if let Some(seed) = &self.seed {
            out += &format!("seed: {seed}\n");
        }
        for (k, step) in self.steps.iter().enumerate() {
            out += &format!("{:>3}. {step}\n", k + 1);
        }
        match &self.conclusion {
            Conclusion::AllEqual => out += "result: all-equal\n",
            Conclusion::Failure { witness } => {
                out += "result: failure\nwitness:\n";
                for (id, class) in witness {
                    out += &format!("  {id}: class {class}\n");
                }
            }
        }
        out
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::SeedBySmallN { component, n } => {
                write!(f, "seed {component}: {n} branches")
            }
            Step::PolygonPropagation {
                component,
                branches: [a, b],
            } => write!(f, "polygon {component}: branches {a} and {b} vanish"),
            Step::NeighbourPropagation { from, to } => write!(f, "neighbour {from} -> {to}"),
            Step::ChainRecurrence {
                component,
                from,
                to,
            } => write!(f, "chain {component}: {from} -> {to}"),
            Step::Anchor {
                component,
                neighbour,
                justification,
            } => write!(f, "anchor {component} ~ {neighbour}: {justification}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverOptions {
    /// Run type II propagation without an anchor instead of failing with
    /// [`K3Error::NoAnchor`]. The result is then always `Stuck`.
    pub allow_missing_anchor: bool,
}

pub fn consonance_solve(fiber: &SpecialFiber) -> Result<ConsonanceCertificate, K3Error> {
    consonance_solve_with(fiber, SolverOptions::default())
}

pub fn consonance_solve_with(
    fiber: &SpecialFiber,
    options: SolverOptions,
) -> Result<ConsonanceCertificate, K3Error> {
    let class = classify_kulikov(fiber)?;
    let cert = match class.kind {
        KulikovType::I => ConsonanceCertificate {
            kulikov_type: KulikovType::I,
            seed: Some(fiber.components[0].id.clone()),
            steps: Vec::new(),
            conclusion: Conclusion::AllEqual,
        },
        KulikovType::II => solve_type_ii(fiber, options)?,
        KulikovType::III => solve_type_iii(fiber)?,
    };
    if cert.is_all_equal() {
        Ok(cert)
    } else {
        let frontier = frontier_of(fiber, &cert);
        Err(K3Error::Stuck {
            frontier,
            certificate: Box::new(cert),
        })
    }
}

fn frontier_of(fiber: &SpecialFiber, cert: &ConsonanceCertificate) -> Vec<String> {
    let Conclusion::Failure { witness } = &cert.conclusion else {
        return Vec::new();
    };
    let seed_class = cert.seed.as_ref().and_then(|s| witness.get(s)).copied();
    fiber
        .components
        .iter()
        .filter(|c| Some(witness[&c.id]) != seed_class)
        .map(|c| c.id.clone())
        .collect()
}

const ANCHOR_JUSTIFICATION: &str = "the ends have opposite K^2, so one end is not minimal; \
an exceptional curve E on it meets the anticanonical double curve with (C.E) = 1";

fn solve_type_ii(
    fiber: &SpecialFiber,
    options: SolverOptions,
) -> Result<ConsonanceCertificate, K3Error> {
    let g = fiber.dual_complex();
    let mut order = path_order(&g).expect("classified as type II");
    let last = order.len() - 1;
    let anchored = |i: usize| fiber.components[i].anchored_end == Some(true);
    let (a, b) = (anchored(order[0]), anchored(order[last]));
    if a && b {
        return Err(K3Error::AmbiguousAnchor);
    }
    if b {
        order.reverse();
    }
    let id = |i: usize| fiber.components[i].id.clone();
    let mut steps = Vec::new();
    if a || b {
        steps.push(Step::Anchor {
            component: id(order[0]),
            neighbour: id(order[1]),
            justification: ANCHOR_JUSTIFICATION.into(),
        });
        for pos in 1..last {
            steps.push(Step::ChainRecurrence {
                component: id(order[pos]),
                from: id(order[pos - 1]),
                to: id(order[pos + 1]),
            });
        }
    } else if !options.allow_missing_anchor {
        return Err(K3Error::NoAnchor);
    } else if order[0] > order[last] {
        order.reverse();
    }
    let mut cert = ConsonanceCertificate {
        kulikov_type: KulikovType::II,
        seed: Some(id(order[0])),
        steps,
        conclusion: Conclusion::AllEqual,
    };
    cert.conclusion = replay(fiber, &cert).expect("solver emits valid steps");
    Ok(cert)
}

/// Index of the component at the other end of each branch, `None` for a
/// branch inside the singular locus.
fn branch_targets(fiber: &SpecialFiber, i: usize) -> Vec<Option<usize>> {
    fiber.components[i]
        .anticanonical_cycle
        .as_ref()
        .map(|cy| {
            cy.branches
                .iter()
                .map(|b| b.edge.map(|e| fiber.double_curves[e].other_end(i).expect("incident")))
                .collect()
        })
        .unwrap_or_default()
}

/// For `n ≥ 3`, consecutive double-curve branches meet at a triple point.
fn check_cycle_geometry(fiber: &SpecialFiber) -> Result<(), K3Error> {
    for (i, c) in fiber.components.iter().enumerate() {
        let cycle = c.anticanonical_cycle.as_ref().expect("checked");
        let n = cycle.len();
        if n < 3 {
            continue;
        }
        for k in 0..n {
            let (Some(e), Some(f)) = (cycle.branches[k].edge, cycle.branches[(k + 1) % n].edge)
            else {
                continue;
            };
            let shared = fiber.triple_points.iter().any(|t| {
                t.components.contains(&i) && t.edges.contains(&e) && t.edges.contains(&f)
            });
            if !shared {
                return Err(K3Error::InvalidCycle {
                    component: c.id.clone(),
                    message: format!(
                        "adjacent branches {k} and {} share no triple point",
                        (k + 1) % n
                    ),
                });
            }
        }
    }
    Ok(())
}

fn solve_type_iii(fiber: &SpecialFiber) -> Result<ConsonanceCertificate, K3Error> {
    let violations = minus_one_form_check(fiber)?;
    if !violations.is_empty() {
        return Err(K3Error::NotMinusOneForm(violations));
    }
    check_cycle_geometry(fiber)?;

    let mut by_id: Vec<usize> = (0..fiber.components.len()).collect();
    by_id.sort_by(|&a, &b| fiber.components[a].id.cmp(&fiber.components[b].id));
    let cycle_len = |i: usize| {
        fiber.components[i]
            .anticanonical_cycle
            .as_ref()
            .map_or(0, |c| c.len())
    };
    let seeds: Vec<usize> = by_id.iter().copied().filter(|&i| cycle_len(i) < 6).collect();
    if seeds.is_empty() {
        return Err(K3Error::NoSeed);
    }

    let g = fiber.dual_complex();
    let id = |i: usize| fiber.components[i].id.clone();
    let mut state = State::new(fiber);
    let mut steps = Vec::new();
    let mut seeds = seeds.into_iter();
    let first = seeds.next().expect("nonempty");
    let mut pending = vec![Step::SeedBySmallN {
        component: id(first),
        n: cycle_len(first),
    }];

    loop {
        while let Some(step) = pending.pop() {
            state.apply(&step).expect("solver emits valid steps");
            steps.push(step);
            // Propagate to neighbours of every consonant component, in id order.
            for &i in &by_id {
                if !state.is_consonant(i) {
                    continue;
                }
                for &j in &by_id {
                    if state.is_consonant(j) || !g.neighbours(i).contains(&j) {
                        continue;
                    }
                    let step = Step::NeighbourPropagation {
                        from: id(i),
                        to: id(j),
                    };
                    if state.check(&step).is_ok() {
                        pending.push(step);
                        break;
                    }
                }
                if !pending.is_empty() {
                    break;
                }
            }
            if pending.is_empty() {
                for &j in &by_id {
                    if state.is_consonant(j) {
                        continue;
                    }
                    if let Some(step) = state.polygon_step(j) {
                        pending.push(step);
                        break;
                    }
                }
            }
        }
        if by_id.iter().all(|&i| state.is_consonant(i)) {
            break;
        }
        match seeds.find(|&s| !state.is_consonant(s)) {
            Some(s) => pending.push(Step::SeedBySmallN {
                component: id(s),
                n: cycle_len(s),
            }),
            None => break,
        }
    }

    Ok(ConsonanceCertificate {
        kulikov_type: KulikovType::III,
        seed: Some(id(first)),
        steps,
        conclusion: state.conclusion(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("step {index}: unknown component {id}")]
    UnknownComponent { index: usize, id: String },
    #[error("step {index}: {message}")]
    Invalid { index: usize, message: String },
}

/// Re-executes the steps of `cert` from scratch, checking each precondition,
/// and returns the conclusion they establish.
pub fn replay(fiber: &SpecialFiber, cert: &ConsonanceCertificate) -> Result<Conclusion, ReplayError> {
    let mut state = State::new(fiber);
    for (index, step) in cert.steps.iter().enumerate() {
        state.apply(step).map_err(|e| match e {
            StepError::Unknown(id) => ReplayError::UnknownComponent { index, id },
            StepError::Invalid(message) => ReplayError::Invalid { index, message },
        })?;
    }
    Ok(state.conclusion())
}

/// True when replaying `cert` reproduces its stated conclusion.
pub fn verify_certificate(fiber: &SpecialFiber, cert: &ConsonanceCertificate) -> bool {
    replay(fiber, cert).is_ok_and(|c| c == cert.conclusion)
}

/// Closing `μ_{j+1} = μ_j − μ_{j−1}` around an `n`-gon from two initial values.
/// This is the relation obtained by pairing against `C_j` when adjacent
/// branches meet once and each branch has square −1.
pub fn polygon_recurrence(n: usize, mu1: i64, mu2: i64) -> Vec<i64> {
    let mut mu = vec![mu1, mu2];
    while mu.len() < n {
        let k = mu.len();
        mu.push(mu[k - 1] - mu[k - 2]);
    }
    mu.truncate(n);
    mu
}

#[derive(Debug)]
enum StepError {
    Unknown(String),
    Invalid(String),
}

struct State<'a> {
    fiber: &'a SpecialFiber,
    parent: Vec<usize>,
    neighbours: Vec<Vec<usize>>,
}

impl<'a> State<'a> {
    fn new(fiber: &'a SpecialFiber) -> Self {
        let g = fiber.dual_complex();
        let count = fiber.components.len();
        State {
            fiber,
            parent: (0..count).collect(),
            neighbours: (0..count).map(|i| g.neighbours(i)).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root index wins, keeping the structure deterministic.
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[hi] = lo;
        }
    }

    fn same(&mut self, a: usize, b: usize) -> bool {
        self.find(a) == self.find(b)
    }

    fn is_consonant(&mut self, i: usize) -> bool {
        let ns = self.neighbours[i].clone();
        ns.into_iter().all(|j| self.same(i, j))
    }

    fn make_consonant(&mut self, i: usize) {
        for j in self.neighbours[i].clone() {
            self.union(i, j);
        }
    }

    fn index(&self, id: &str) -> Result<usize, StepError> {
        self.fiber
            .component_index(id)
            .ok_or_else(|| StepError::Unknown(id.to_string()))
    }

    /// `μ_C = 0` for branch `b` of component `i` under the current equalities.
    fn mu_zero(&mut self, i: usize, target: Option<usize>) -> bool {
        match target {
            None => true,
            Some(j) => self.same(i, j),
        }
    }

    /// Adjacent branches of `i` both with `μ = 0`, if any.
    fn zero_adjacent_pair(&mut self, i: usize) -> Option<[usize; 2]> {
        let targets = branch_targets(self.fiber, i);
        let n = targets.len();
        if n < 2 {
            return None;
        }
        let pairs = if n == 2 { 1 } else { n };
        (0..pairs).find_map(|k| {
            let l = (k + 1) % n;
            (self.mu_zero(i, targets[k]) && self.mu_zero(i, targets[l])).then_some([k, l])
        })
    }

    fn polygon_step(&mut self, i: usize) -> Option<Step> {
        self.zero_adjacent_pair(i).map(|branches| Step::PolygonPropagation {
            component: self.fiber.components[i].id.clone(),
            branches,
        })
    }

    fn check(&mut self, step: &Step) -> Result<(), StepError> {
        let invalid = |m: String| Err(StepError::Invalid(m));
        match step {
            Step::SeedBySmallN { component, n } => {
                let i = self.index(component)?;
                let actual = branch_targets(self.fiber, i).len();
                if actual == 0 || actual != *n || *n >= 6 {
                    return invalid(format!("{component} is not a seed with {n} branches"));
                }
                Ok(())
            }
            Step::PolygonPropagation {
                component,
                branches,
            } => {
                let i = self.index(component)?;
                let targets = branch_targets(self.fiber, i);
                let n = targets.len();
                let [a, b] = *branches;
                let adjacent = a < n && b < n && a != b && ((a + 1) % n == b || (b + 1) % n == a);
                if n < 2 || !adjacent {
                    return invalid(format!("branches {a}, {b} of {component} are not adjacent"));
                }
                if !(self.mu_zero(i, targets[a]) && self.mu_zero(i, targets[b])) {
                    return invalid(format!("branches {a}, {b} of {component} are not known to vanish"));
                }
                Ok(())
            }
            Step::NeighbourPropagation { from, to } => {
                let i = self.index(from)?;
                let j = self.index(to)?;
                if !self.neighbours[i].contains(&j) {
                    return invalid(format!("{to} is not a neighbour of {from}"));
                }
                if !self.is_consonant(i) {
                    return invalid(format!("{from} is not consonant"));
                }
                if self.neighbours[j].len() == 1 || self.zero_adjacent_pair(j).is_some() {
                    Ok(())
                } else {
                    invalid(format!("{to} has no adjacent pair of vanishing branches"))
                }
            }
            Step::ChainRecurrence {
                component,
                from,
                to,
            } => {
                let i = self.index(component)?;
                let h = self.index(from)?;
                let k = self.index(to)?;
                let ns = &self.neighbours[i];
                if ns.len() != 2 || !ns.contains(&h) || !ns.contains(&k) || h == k {
                    return invalid(format!("{component} is not an interior link between {from} and {to}"));
                }
                if self.fiber.components[i].kind != SurfaceKind::RuledOverElliptic {
                    return invalid(format!("{component} is not elliptic ruled"));
                }
                if !self.same(h, i) {
                    return invalid(format!("{from} and {component} are not known to agree"));
                }
                Ok(())
            }
            Step::Anchor {
                component,
                neighbour,
                ..
            } => {
                let i = self.index(component)?;
                let j = self.index(neighbour)?;
                if self.fiber.components[i].anchored_end != Some(true) {
                    return invalid(format!("{component} is not marked as anchored"));
                }
                if self.neighbours[i] != [j] {
                    return invalid(format!("{component} is not a chain end next to {neighbour}"));
                }
                Ok(())
            }
        }
    }

    fn apply(&mut self, step: &Step) -> Result<(), StepError> {
        self.check(step)?;
        match step {
            Step::SeedBySmallN { component, .. } | Step::PolygonPropagation { component, .. } => {
                let i = self.index(component)?;
                self.make_consonant(i);
            }
            Step::NeighbourPropagation { to, .. } => {
                let j = self.index(to)?;
                self.make_consonant(j);
            }
            Step::ChainRecurrence { component, to, .. } => {
                let (i, k) = (self.index(component)?, self.index(to)?);
                self.union(i, k);
            }
            Step::Anchor {
                component,
                neighbour,
                ..
            } => {
                let (i, j) = (self.index(component)?, self.index(neighbour)?);
                self.union(i, j);
            }
        }
        Ok(())
    }

    fn conclusion(&mut self) -> Conclusion {
        let count = self.parent.len();
        let roots: BTreeSet<usize> = (0..count).map(|i| self.find(i)).collect();
        if roots.len() == 1 {
            return Conclusion::AllEqual;
        }
        let mut index_of = BTreeMap::new();
        let mut witness = BTreeMap::new();
        for i in 0..count {
            let r = self.find(i);
            let next = index_of.len();
            let k = *index_of.entry(r).or_insert(next);
            witness.insert(self.fiber.components[i].id.clone(), k);
        }
        Conclusion::Failure { witness }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polygon_recurrence_closes_for_small_cycles() {
        // Over ℤ/N every solution of the full cyclic system with two adjacent
        // zeros is identically zero.
        for n in 3..=6usize {
            for modulus in [2i64, 3, 4, 5, 6, 7] {
                let total = (modulus as usize).pow(n as u32);
                for code in 0..total {
                    let mu: Vec<i64> = (0..n)
                        .map(|k| (code / (modulus as usize).pow(k as u32)) as i64 % modulus)
                        .collect();
                    let solves = (0..n).all(|j| {
                        let prev = mu[(j + n - 1) % n];
                        let next = mu[(j + 1) % n];
                        (prev - mu[j] + next).rem_euclid(modulus) == 0
                    });
                    if solves && mu[0] == 0 && mu[1] == 0 {
                        assert!(mu.iter().all(|&x| x == 0), "n={n} N={modulus} {mu:?}");
                    }
                }
            }
            assert!(polygon_recurrence(n, 0, 0).iter().all(|&x| x == 0));
        }
    }

    #[test]
    fn polygon_recurrence_has_period_six() {
        let mu = polygon_recurrence(8, 1, 2);
        assert_eq!(mu, vec![1, 2, 1, -1, -2, -1, 1, 2]);
    }
}
