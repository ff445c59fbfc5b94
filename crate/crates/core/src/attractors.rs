//! Trapping regions, attractors, attractor boundaries and the constructions
//! that build attractors around chain-stable sets.
//!
//! Grid-open means regular open: `U = interior(closure(U))`. In the adjacency
//! topology a set equal to its own interior is a union of connected
//! components, so the literal condition would only admit clopen sets.

use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chains::scc::tarjan;
use crate::chains::{build_chain_graph, is_chain_stable, ChainDecomposition, ChainGraph, StabilityReport};
use crate::error::{Error, Result};
use crate::space::{CellSet, GridSpace, Point, SpaceKind, TOL};
use crate::systems::{build_cell_map, CellMap, PointMap};

/// A multivalued map on cells: the outer approximation itself, or one step
/// of a chain graph.
pub trait CellRelation {
    fn space(&self) -> &Arc<GridSpace>;
    fn image(&self, s: &CellSet) -> CellSet;
}

impl CellRelation for CellMap {
    fn space(&self) -> &Arc<GridSpace> {
        CellMap::space(self)
    }

    fn image(&self, s: &CellSet) -> CellSet {
        CellMap::image(self, s)
    }
}

impl CellRelation for ChainGraph {
    fn space(&self) -> &Arc<GridSpace> {
        ChainGraph::space(self)
    }

    fn image(&self, s: &CellSet) -> CellSet {
        self.step(s)
    }
}

/// Open cell set together with the image of its closure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrappingRegion {
    pub u: CellSet,
    pub closure: CellSet,
    pub image_of_closure: CellSet,
}

impl TrappingRegion {
    /// `F(closure(U)) ⊆ U`.
    pub fn certified(&self) -> bool {
        self.image_of_closure.is_subset(&self.u)
    }
}

fn check_open(sp: &GridSpace, u: &CellSet) -> Result<()> {
    if u.universe() != sp.len() {
        return Err(Error::arg(format!("cell set over {} cells used on a space of {}", u.universe(), sp.len())));
    }
    if !sp.is_grid_open(u) {
        return Err(Error::arg("U is not grid-open (it differs from the interior of its closure)"));
    }
    Ok(())
}

/// Computes the closure image of a grid-open `U`, certified or not.
pub fn trapping_certificate<R: CellRelation + ?Sized>(f: &R, u: &CellSet) -> Result<TrappingRegion> {
    let sp = f.space();
    check_open(sp, u)?;
    let closure = sp.closure(u);
    let image_of_closure = f.image(&closure);
    Ok(TrappingRegion { u: u.clone(), closure, image_of_closure })
}

pub fn is_trapping<R: CellRelation + ?Sized>(f: &R, u: &CellSet) -> Result<bool> {
    Ok(trapping_certificate(f, u)?.certified())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attractor {
    pub trapping: TrappingRegion,
    pub lambda: CellSet,
    pub boundary: CellSet,
    pub iterations_to_fixpoint: usize,
}

/// Greatest fixed point of `S ↦ U ∩ F(S)` starting from `S = U`.
pub fn attractor_from_trapping<R: CellRelation + ?Sized>(f: &R, t: &TrappingRegion) -> Result<Attractor> {
    let fresh = trapping_certificate(f, &t.u)?;
    if !fresh.certified() || fresh != *t {
        return Err(Error::arg("U carries no valid trapping certificate for this map"));
    }
    let mut s = t.u.clone();
    let mut iterations = 0;
    loop {
        let mut next = f.image(&s);
        next.intersect_with(&t.u);
        iterations += 1;
        if next == s {
            break;
        }
        s = next;
    }
    let boundary = f.space().boundary(&s);
    Ok(Attractor { trapping: fresh, lambda: s, boundary, iterations_to_fixpoint: iterations })
}

/// Attractor of the trapping region `u`; argument error if `u` does not trap.
pub fn attractor_of<R: CellRelation + ?Sized>(f: &R, u: &CellSet) -> Result<Attractor> {
    let t = trapping_certificate(f, u)?;
    if !t.certified() {
        return Err(Error::arg("U is not a trapping region"));
    }
    attractor_from_trapping(f, &t)
}

/// Output of the construction around a chain-stable set `S`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainStableAttractor {
    /// Attractor of the δ-chain relation; contains `S`.
    pub attractor: Attractor,
    /// Attractor of the cell map itself inside the same trapping region.
    pub thin: Attractor,
    pub delta: f64,
    /// `S` together with everything reachable from it at δ plus one cell diameter.
    pub reach: CellSet,
    pub escape_radius: f64,
    pub a: f64,
}

/// Halving ladder below the graph's own δ.
pub fn default_delta_ladder(g: &ChainGraph) -> Vec<f64> {
    (0..8).map(|j| g.delta() / f64::from(1u32 << j)).collect()
}

/// Attractor Λ of the δ-chain relation with `S ⊆ Λ ⊆ B_a(S)`, δ chosen from
/// the default ladder.
pub fn attractor_from_chain_stable(g: &ChainGraph, s: &CellSet, a: f64) -> Result<ChainStableAttractor> {
    let map = if g.is_reversed() { Arc::new(g.map().reversed()) } else { g.map().clone() };
    attractor_from_chain_stable_on(&map, s, a, &default_delta_ladder(g))
}

/// Same construction over an explicit ladder of δ values.
///
/// `A = S ∪ reach(S)` in the graph at δ⁺ = δ + one cell diameter is closed
/// under that graph, so every cell in a δ-step of `A`, together with its
/// neighbors, lies in `A`; hence `U = interior(A)` traps the δ-graph.
pub fn attractor_from_chain_stable_on(
    map: &Arc<CellMap>,
    s: &CellSet,
    a: f64,
    ladder: &[f64],
) -> Result<ChainStableAttractor> {
    let sp = map.space().clone();
    if s.is_empty() {
        return Err(Error::arg("S must be nonempty"));
    }
    if !(a > 0.0) {
        return Err(Error::arg(format!("a must be positive, got {a}")));
    }
    if ladder.is_empty() || ladder.windows(2).any(|w| !(w[1] < w[0])) || ladder.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::arg("delta ladder must be positive and strictly decreasing"));
    }
    let target = sp.closed_neighborhood(s, a);
    let reach_at = |delta: f64| -> Result<(ChainGraph, CellSet)> {
        let wide = build_chain_graph(map.clone(), delta + sp.cell_diameter())?;
        let mut reach = wide.forward_reach(s);
        reach.union_with(s);
        Ok((wide, reach))
    };
    // containment is monotone in δ: find the largest δ that achieves it
    let (mut lo, mut hi) = (0usize, ladder.len());
    let mut found: Option<(usize, CellSet)> = None;
    while lo < hi {
        let mid = (lo + hi) / 2;
        let (_, reach) = reach_at(ladder[mid])?;
        if reach.is_subset(&target) {
            found = Some((mid, reach));
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let Some((k, reach)) = found else {
        return Err(Error::resolution(format!(
            "no delta down to {:e} keeps the forward reach of S within {a:e}",
            ladder[ladder.len() - 1]
        )));
    };
    let delta = ladder[k];
    let g = build_chain_graph(map.clone(), delta)?;
    if !s.is_subset(&g.step(s)) {
        return Err(Error::resolution(format!("S is not covered by its own δ-image at delta {delta:e}")));
    }
    let u = sp.interior(&reach);
    let t = trapping_certificate(&g, &u)?;
    if !t.certified() {
        return Err(Error::resolution(format!("interior of the reach does not trap at delta {delta:e}")));
    }
    let attractor = attractor_from_trapping(&g, &t)?;
    if !s.is_subset(&attractor.lambda) {
        return Err(Error::resolution("constructed attractor lost part of S"));
    }
    let thin = attractor_of(map.as_ref(), &u)?;
    let escape_radius = sp.directed_distance(&reach, s);
    Ok(ChainStableAttractor { attractor, thin, delta, reach, escape_radius, a })
}

/// Cells reached from `c` by paths of length ≥ 1.
pub fn chain_forward_set(g: &ChainGraph, c: &CellSet) -> Result<CellSet> {
    if c.is_empty() {
        return Err(Error::arg("C must be nonempty"));
    }
    Ok(g.forward_reach(c))
}

/// Cells of `targets` that are reached from some cell outside `lambda`.
fn reached_from_outside(g: &ChainGraph, lambda: &CellSet, targets: &CellSet) -> CellSet {
    g.forward_reach(&lambda.complement()).intersection(targets)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAttractor {
    pub component: usize,
    pub forward_set: CellSet,
    /// Cell outside the forward set with a chain into C.
    pub witness: usize,
    pub a: f64,
    pub construction: ChainStableAttractor,
    /// Every cell of C is reached by a chain from outside Λ.
    pub chain_boundary: bool,
    /// C lies in the grid boundary of Λ.
    pub grid_boundary: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum BoundaryConstruction {
    /// No chain enters C from outside its forward set.
    Initial { component: usize },
    Built(Box<BoundaryAttractor>),
}

/// Attractor whose boundary, in the chain sense, contains the component.
///
/// Boundary membership is checked as "every cell of C is reached by a chain
/// from outside Λ". At grid scale Λ is a fattened copy of a set that may have
/// empty interior, so the grid boundary of Λ is reported but not required.
pub fn attractor_with_c_in_boundary(
    g: &ChainGraph,
    d: &ChainDecomposition,
    component: usize,
) -> Result<BoundaryConstruction> {
    let sp = g.space();
    let c = &d
        .components
        .get(component)
        .ok_or_else(|| Error::arg(format!("no component {component}")))?
        .cells;
    let mut s = chain_forward_set(g, c)?;
    s.union_with(c);
    let incoming = g.backward_reach(c).difference(&s);
    let Some((witness, dist)) =
        incoming.iter().map(|y| (y, sp.distance_to_set(y, &s))).max_by(|p, q| p.1.total_cmp(&q.1))
    else {
        return Ok(BoundaryConstruction::Initial { component });
    };
    let margin = if sp.cell_radius() > 0.0 { sp.cell_radius() } else { 0.5 * dist };
    let a = dist - margin;
    if !(a > 0.0) {
        return Err(Error::resolution("incoming witness lies within one cell of the forward set"));
    }
    let construction = attractor_from_chain_stable(g, &s, a)?;
    let lambda = &construction.attractor.lambda;
    let chain_boundary = reached_from_outside(g, lambda, c) == *c;
    let grid_boundary = c.is_subset(&sp.boundary(lambda));
    Ok(BoundaryConstruction::Built(Box::new(BoundaryAttractor {
        component,
        forward_set: s,
        witness,
        a,
        construction,
        chain_boundary,
        grid_boundary,
    })))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryStability {
    /// Empty boundary: the attractor is clopen and there is nothing to check.
    pub vacuous: bool,
    pub delta: f64,
    pub epsilon: f64,
    pub report: Option<StabilityReport>,
    pub shadowing_certified: bool,
}

impl BoundaryStability {
    pub fn stable(&self) -> bool {
        self.vacuous || self.report.as_ref().is_some_and(|r| r.stable)
    }

    pub fn escape_radius(&self) -> f64 {
        self.report.as_ref().map_or(0.0, |r| r.escape_radius)
    }
}

pub fn verify_boundary_chain_stable(
    g: &ChainGraph,
    a: &Attractor,
    epsilon: f64,
    shadowing_certified: bool,
) -> Result<BoundaryStability> {
    let report = if a.boundary.is_empty() { None } else { Some(is_chain_stable(g, &a.boundary, epsilon)?) };
    Ok(BoundaryStability { vacuous: report.is_none(), delta: g.delta(), epsilon, report, shadowing_certified })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EscapeWitness {
    pub z: usize,
    /// Path from `z` to the queried cell.
    pub path: Vec<usize>,
}

/// A cell `z ∉ lambda` with a chain `z → x`, found by a backward search.
pub fn escape_witness(g: &ChainGraph, lambda: &CellSet, x: usize) -> Result<Option<EscapeWitness>> {
    if x >= g.len() {
        return Err(Error::arg(format!("cell {x} out of range")));
    }
    let n = g.len();
    let mut next = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    let mut found = None;
    'search: for &p in g.predecessors(x) {
        let p = p as usize;
        if next[p] == u32::MAX {
            next[p] = x as u32;
            if !lambda.contains(p) {
                found = Some(p);
                break 'search;
            }
            queue.push_back(p);
        }
    }
    while found.is_none() {
        let Some(c) = queue.pop_front() else { break };
        for &p in g.predecessors(c) {
            let p = p as usize;
            if next[p] == u32::MAX {
                next[p] = c as u32;
                if !lambda.contains(p) {
                    found = Some(p);
                    break;
                }
                queue.push_back(p);
            }
        }
    }
    Ok(found.map(|z| {
        let mut path = vec![z];
        let mut cur = z;
        loop {
            cur = next[cur] as usize;
            path.push(cur);
            if cur == x {
                break;
            }
        }
        EscapeWitness { z, path }
    }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearTerminal {
    pub construction: ChainStableAttractor,
    pub boundary: CellSet,
    /// Terminal pieces of the chain graph restricted to the boundary.
    pub candidates: Vec<CellSet>,
    pub chosen: CellSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum NearTerminalOutcome {
    Found(Box<NearTerminal>),
    HypothesesNotMet { reason: String },
}

/// Terminal set with empty grid interior inside `B_a(C)`, read off the
/// boundary of the attractor built around a terminal component C.
pub fn terminal_with_empty_interior_near(
    g: &ChainGraph,
    d: &ChainDecomposition,
    component: usize,
    a: f64,
) -> Result<NearTerminalOutcome> {
    let sp = g.space();
    let comp = d.components.get(component).ok_or_else(|| Error::arg(format!("no component {component}")))?;
    let not_met = |reason: &str| Ok(NearTerminalOutcome::HypothesesNotMet { reason: reason.to_string() });
    if !sp.is_connected() {
        return not_met("space is not connected");
    }
    if comp.cells.is_full() {
        return not_met("C is the whole space");
    }
    if !comp.is_terminal {
        return not_met("C is not terminal");
    }
    let construction = attractor_from_chain_stable(g, &comp.cells, a)?;
    let boundary = sp.boundary(&construction.attractor.lambda);
    let (keep, sub) = g.induced(&boundary);
    let scc = tarjan(&sub);
    let mut leaves = vec![true; scc.count];
    for v in 0..sub.node_count() {
        for &w in sub.row(v) {
            if scc.comp[v] != scc.comp[w as usize] {
                leaves[scc.comp[v] as usize] = false;
            }
        }
    }
    let mut candidates: Vec<CellSet> = (0..scc.count)
        .filter(|&k| leaves[k] && scc.cyclic[k])
        .map(|k| sp.set_of((0..keep.len()).filter(|&v| scc.comp[v] as usize == k).map(|v| keep[v])))
        .collect();
    candidates.sort_by_key(|c| c.first());
    let near = sp.closed_neighborhood(&comp.cells, a);
    let chosen = candidates.iter().find(|c| sp.interior(c).is_empty() && c.is_subset(&near)).cloned();
    match chosen {
        Some(chosen) => Ok(NearTerminalOutcome::Found(Box::new(NearTerminal { construction, boundary, candidates, chosen }))),
        None => Err(Error::resolution("no thin terminal piece on the attractor boundary at this resolution")),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchRoute {
    /// Found inside the attractor built around C.
    Attractor,
    /// Found by scanning components inside `B_a(C)`.
    Neighborhood,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborPair {
    pub terminal: usize,
    pub terminal_route: SearchRoute,
    pub initial: usize,
    pub initial_route: SearchRoute,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum NeighborOutcome {
    Found(NeighborPair),
    HypothesesNotMet { reason: String },
}

/// For C both initial and terminal but not clopen: a terminal D ≠ C and an
/// initial E ≠ C inside `B_a(C)`.
pub fn neighbors_of_nonclopen_bidirectional(
    g: &ChainGraph,
    d: &ChainDecomposition,
    component: usize,
    a: f64,
) -> Result<NeighborOutcome> {
    let sp = g.space();
    let comp = d.components.get(component).ok_or_else(|| Error::arg(format!("no component {component}")))?;
    let not_met = |reason: &str| Ok(NeighborOutcome::HypothesesNotMet { reason: reason.to_string() });
    if !(comp.is_initial && comp.is_terminal) {
        return not_met("C is not both initial and terminal");
    }
    if sp.is_clopen(&comp.cells) {
        return not_met("C is clopen");
    }
    let near = sp.closed_neighborhood(&comp.cells, a);
    let search = |graph: &ChainGraph, want_terminal: bool| -> Option<(usize, SearchRoute)> {
        let flag = |j: usize| {
            let x = &d.components[j];
            j != component && if want_terminal { x.is_terminal } else { x.is_initial }
        };
        if let Ok(built) = attractor_from_chain_stable(graph, &comp.cells, a) {
            let lambda = &built.attractor.lambda;
            if let Some(j) = (0..d.len()).find(|&j| flag(j) && d.components[j].cells.is_subset(lambda)) {
                return Some((j, SearchRoute::Attractor));
            }
        }
        (0..d.len()).find(|&j| flag(j) && d.components[j].cells.is_subset(&near)).map(|j| (j, SearchRoute::Neighborhood))
    };
    let rev = g.reversed();
    match (search(g, true), search(&rev, false)) {
        (Some((terminal, terminal_route)), Some((initial, initial_route))) => {
            Ok(NeighborOutcome::Found(NeighborPair { terminal, terminal_route, initial, initial_route }))
        }
        (None, _) => not_met("no terminal component other than C within a"),
        (_, None) => not_met("no initial component other than C within a"),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminalReach {
    pub component: usize,
    pub target: usize,
    /// Chain from the start cell to `target`; a single cell if it already
    /// lies in a terminal component.
    pub path: Vec<usize>,
}

/// Walks forward from `x` to a cell of some terminal component.
pub fn reach_terminal(g: &ChainGraph, d: &ChainDecomposition, x: usize) -> Result<TerminalReach> {
    if x >= g.len() {
        return Err(Error::arg(format!("cell {x} out of range")));
    }
    let terminal_of = |c: usize| d.component_of(c).filter(|&i| d.components[i].is_terminal);
    if let Some(component) = terminal_of(x) {
        return Ok(TerminalReach { component, target: x, path: vec![x] });
    }
    let start = g.space().set_of([x]);
    for graph in [g, g.link()] {
        if let Some(path) = graph.path_between(&start, |c| terminal_of(c).is_some()) {
            let target = *path.last().expect("nonempty path");
            let component = terminal_of(target).expect("terminal target");
            return Ok(TerminalReach { component, target, path });
        }
    }
    Err(Error::resolution(format!("no terminal component reachable from cell {x}")))
}

/// Cells whose forward cell-orbit lies in `closed_neighborhood(S, 2·cell_radius)`
/// over the whole second half of the horizon.
pub fn basin(map: &CellMap, s: &CellSet, horizon: usize) -> CellSet {
    let sp = map.space();
    let target = sp.closed_neighborhood(s, 2.0 * sp.cell_radius());
    basin_of(map, &target, horizon)
}

fn basin_of(map: &CellMap, target: &CellSet, horizon: usize) -> CellSet {
    let sp = map.space();
    let settle = horizon / 2;
    let inside: Vec<bool> = (0..sp.len())
        .into_par_iter()
        .map(|c| {
            let mut cur = sp.set_of([c]);
            for t in 1..=horizon {
                cur = map.image(&cur);
                if t >= settle && !cur.is_subset(target) {
                    return false;
                }
            }
            true
        })
        .collect();
    sp.set_of((0..sp.len()).filter(|&c| inside[c]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StableSetInclusion {
    pub basin: CellSet,
    pub boundary_basin: CellSet,
    /// Cells of `basin(S) \ S` missing from the boundary basin.
    pub violations: CellSet,
}

impl StableSetInclusion {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `basin(S) \ S ⊆ basin(∂S)`, with the boundary target fattened by one cell.
pub fn stable_set_inclusion(map: &CellMap, s: &CellSet, horizon: usize) -> StableSetInclusion {
    let sp = map.space();
    let b = basin(map, s, horizon);
    let edge = sp.closed_neighborhood(&sp.boundary(s), 2.0 * sp.cell_radius() + sp.cell_diameter());
    let boundary_basin = basin_of(map, &edge, horizon);
    let violations = b.difference(s).difference(&boundary_basin);
    StableSetInclusion { basin: b, boundary_basin, violations }
}

/// Geometric description of an open cell set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum USpec {
    /// Cells of a circle with centers in the open arc from `from` to `to`
    /// (counterclockwise, radians).
    Arc { from: f64, to: f64 },
    /// Cells of a 1-D grid with centers in `[from, to)`.
    Interval { from: f64, to: f64 },
    /// Cells with centers at max-distance `< radius` from `center`.
    Ball { center: Vec<f64>, radius: f64 },
    Cells { cells: Vec<usize> },
    Whole,
}

impl USpec {
    pub fn cells(&self, sp: &GridSpace) -> Result<CellSet> {
        let one_d = |what: &str| -> Result<()> {
            if sp.is_grid() && sp.dim() == 1 {
                Ok(())
            } else {
                Err(Error::config(format!("{what} U-spec needs a one-dimensional grid")))
            }
        };
        match self {
            USpec::Arc { from, to } => {
                one_d("arc")?;
                if sp.kind() != SpaceKind::Circle {
                    return Err(Error::config("arc U-spec needs a circle"));
                }
                let width = to - from;
                if !(width > 0.0 && width <= TAU) {
                    return Err(Error::config(format!("arc ({from}, {to}) must have length in (0, 2π]")));
                }
                Ok(sp.set_of((0..sp.len()).filter(|&c| {
                    let t = (sp.center(c).x() - from).rem_euclid(TAU);
                    t > TOL && t < width - TOL
                })))
            }
            USpec::Interval { from, to } => {
                one_d("interval")?;
                if !(to > from) {
                    return Err(Error::config(format!("interval [{from}, {to}) is empty")));
                }
                Ok(sp.set_of((0..sp.len()).filter(|&c| {
                    let x = sp.center(c).x();
                    x >= *from && x < *to
                })))
            }
            USpec::Ball { center, radius } => {
                if !sp.is_grid() || center.len() != sp.dim() {
                    return Err(Error::config(format!("ball center needs {} coordinates", sp.dim())));
                }
                let p = if center.len() == 1 { Point::new1(center[0]) } else { Point::new2(center[0], center[1]) };
                Ok(sp.set_of((0..sp.len()).filter(|&c| sp.point_distance(sp.center(c), p) < *radius)))
            }
            USpec::Cells { cells } => {
                if let Some(&c) = cells.iter().find(|&&c| c >= sp.len()) {
                    return Err(Error::config(format!("cell {c} out of range")));
                }
                Ok(sp.set_of(cells.iter().copied()))
            }
            USpec::Whole => Ok(sp.full_set()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLevel {
    pub resolution: usize,
    pub lambda_cells: usize,
    pub boundary_cells: usize,
    pub component_count: usize,
    /// `F(∂U) ⊆ S` for the ring `S = closure(U) \ Λ`.
    pub ring_hypothesis: bool,
    /// Hausdorff distance from `f^i(S)` to `∂Λ`, in cell diameters, for i = 0, 1, ...
    pub hausdorff: Vec<f64>,
    /// First iteration at or below two cell diameters.
    pub first_within: Option<usize>,
    /// Spread of the sequence from `first_within` on, in cell diameters.
    pub band: Option<f64>,
}

impl BoundaryLevel {
    pub fn settled(&self) -> bool {
        self.hausdorff.is_empty() || self.band.is_some_and(|b| b <= 1.0 + 1e-9)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryStudy {
    pub levels: Vec<BoundaryLevel>,
    /// Component counts agree on the two finest grids.
    pub counts_stable: bool,
    pub hausdorff_settled: bool,
}

/// Boundary component counts of the attractor of `u` across grids, and the
/// Hausdorff approach of the iterated ring `closure(U) \ Λ` to `∂Λ`.
/// The ring is iterated by the point map from its cell centers.
pub fn boundary_refinement_study(
    f: &PointMap,
    u: &USpec,
    grids: &[usize],
    iterations: usize,
) -> Result<BoundaryStudy> {
    if grids.is_empty() {
        return Err(Error::arg("need at least one grid"));
    }
    let mut levels = Vec::new();
    for &n in grids {
        let sp = Arc::new(f.default_space(n)?);
        let map = build_cell_map(f, sp.clone())?;
        let cells = u.cells(&sp)?;
        let att = attractor_of(&map, &cells)?;
        let boundary = &att.boundary;
        let ring = att.trapping.closure.difference(&att.lambda);
        let edge = att.trapping.closure.difference(&cells);
        let ring_hypothesis = map.image(&edge).is_subset(&ring);
        let diam = sp.cell_diameter();
        let mut hausdorff = Vec::new();
        if !ring.is_empty() && !boundary.is_empty() {
            let mut pts: Vec<Point> = ring.iter().map(|c| sp.center(c)).collect();
            for i in 0..=iterations {
                if i > 0 {
                    for p in pts.iter_mut() {
                        *p = f.forward(*p);
                    }
                }
                let image = sp.set_of(pts.iter().filter_map(|&p| sp.cell_of(p)));
                hausdorff.push(sp.hausdorff_distance(&image, boundary)? / diam);
            }
        }
        let first_within = hausdorff.iter().position(|&h| h <= 2.0 + 1e-9);
        let band = first_within.map(|k| {
            let tail = &hausdorff[k..];
            let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
            hi - lo
        });
        levels.push(BoundaryLevel {
            resolution: n,
            lambda_cells: att.lambda.len(),
            boundary_cells: boundary.len(),
            component_count: sp.connected_components(boundary).len(),
            ring_hypothesis,
            hausdorff,
            first_within,
            band,
        });
    }
    let counts_stable = match levels.len() {
        1 => true,
        k => levels[k - 1].component_count == levels[k - 2].component_count,
    };
    let hausdorff_settled = levels.iter().all(|l| l.settled());
    Ok(BoundaryStudy { levels, counts_stable, hausdorff_settled })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chains::chain_components;
    use std::f64::consts::PI;

    fn setup(f: &PointMap, n: usize) -> (Arc<GridSpace>, Arc<CellMap>) {
        let sp = Arc::new(f.default_space(n).unwrap());
        let map = Arc::new(build_cell_map(f, sp.clone()).unwrap());
        (sp, map)
    }

    fn arc(sp: &GridSpace, from: f64, to: f64) -> CellSet {
        USpec::Arc { from, to }.cells(sp).unwrap()
    }

    #[test]
    fn trapping_examples() {
        let f = PointMap::ns_circle(0.5).unwrap();
        let (sp, map) = setup(&f, 720);
        assert!(is_trapping(map.as_ref(), &sp.full_set()).unwrap());
        assert!(is_trapping(map.as_ref(), &arc(&sp, -0.5, 0.5)).unwrap());
        assert!(!is_trapping(map.as_ref(), &arc(&sp, PI - 0.5, PI + 0.5)).unwrap());
        // a set with a one-cell gap is not regular open
        let mut holey = arc(&sp, -0.5, 0.5);
        holey.remove(0);
        assert!(is_trapping(map.as_ref(), &holey).is_err());
    }

    #[test]
    fn identity_has_no_proper_trapping_arc() {
        let (sp, map) = setup(&PointMap::identity(), 360);
        for k in 1..12 {
            let from = 0.5 * k as f64;
            assert!(!is_trapping(map.as_ref(), &arc(&sp, from, from + 1.0)).unwrap());
        }
    }

    #[test]
    fn square_attractor_is_cluster_at_zero() {
        let f = PointMap::square_interval();
        let (sp, map) = setup(&f, 400);
        let u = USpec::Interval { from: 0.0, to: 0.5 }.cells(&sp).unwrap();
        let a = attractor_of(map.as_ref(), &u).unwrap();
        assert!(a.lambda.contains(0));
        assert!(a.lambda.len() <= 4, "{:?}", a.lambda.to_vec());
        assert!(a.lambda.is_subset(&u));
        assert_eq!(sp.connected_components(&a.boundary).len(), 1);
        assert!(a.iterations_to_fixpoint <= u.len() + 1);
    }

    #[test]
    fn ms4_attractor_is_closed_half_circle() {
        let f = PointMap::ms4_circle(0.3).unwrap();
        let (sp, map) = setup(&f, 720);
        let a = attractor_of(map.as_ref(), &arc(&sp, -0.3, PI + 0.3)).unwrap();
        let half = sp.set_of((0..=360).map(|c| c % 720));
        assert!(half.is_subset(&a.lambda));
        assert!(a.lambda.is_subset(&sp.closed_neighborhood(&half, 3.0 * sp.cell_diameter())));
        assert_eq!(sp.connected_components(&a.boundary).len(), 2);
    }

    #[test]
    fn whole_torus_is_its_own_attractor() {
        let (sp, map) = setup(&PointMap::cat_torus(), 31);
        let a = attractor_of(map.as_ref(), &sp.full_set()).unwrap();
        assert!(a.lambda.is_full() && a.boundary.is_empty());
    }

    #[test]
    fn forged_certificate_is_rejected() {
        let f = PointMap::ns_circle(0.5).unwrap();
        let (sp, map) = setup(&f, 180);
        let mut t = trapping_certificate(map.as_ref(), &arc(&sp, PI - 0.5, PI + 0.5)).unwrap();
        t.image_of_closure = t.u.clone();
        assert!(attractor_from_trapping(map.as_ref(), &t).is_err());
    }

    #[test]
    fn attractor_is_idempotent_and_monotone() {
        let f = PointMap::ms4_circle(0.3).unwrap();
        let (sp, map) = setup(&f, 360);
        let small = attractor_of(map.as_ref(), &arc(&sp, -0.3, PI + 0.3)).unwrap();
        let halo = sp.interior(&sp.closed_neighborhood(&small.lambda, 3.0 * sp.cell_diameter()));
        let again = attractor_of(map.as_ref(), &halo).unwrap();
        assert_eq!(again.lambda, small.lambda);
        let big = attractor_of(map.as_ref(), &arc(&sp, -0.6, PI + 0.6)).unwrap();
        assert!(small.lambda.is_subset(&big.lambda));
    }

    fn ns_graph(n: usize) -> (ChainGraph, ChainDecomposition) {
        let f = PointMap::ns_circle(0.5).unwrap();
        let (sp, map) = setup(&f, n);
        let g = build_chain_graph(map, sp.cell_diameter()).unwrap();
        let d = chain_components(&g);
        (g, d)
    }

    #[test]
    fn chain_stable_construction_contains_s() {
        let (g, d) = ns_graph(720);
        let sp = g.space();
        let s = d.find(0).unwrap().cells.clone();
        let a = 10.0 * sp.cell_diameter();
        let built = attractor_from_chain_stable(&g, &s, a).unwrap();
        let lambda = &built.attractor.lambda;
        assert!(s.is_subset(lambda));
        assert!(lambda.is_subset(&sp.closed_neighborhood(&s, a)));
        assert!(built.thin.lambda.is_subset(lambda));
        assert!(built.attractor.trapping.certified());

        let full = attractor_from_chain_stable(&g, &sp.full_set(), a).unwrap();
        assert!(full.attractor.lambda.is_full());
    }

    #[test]
    fn unstable_set_reports_resolution() {
        let (g, d) = ns_graph(360);
        let s = d.find(180).unwrap().cells.clone();
        let err = attractor_from_chain_stable(&g, &s, 5.0 * g.space().cell_diameter()).unwrap_err();
        assert!(matches!(err, Error::ResolutionInsufficient(_)));
    }

    #[test]
    fn forward_sets() {
        let (g, d) = ns_graph(360);
        let zero = &d.find(0).unwrap().cells;
        let fs = chain_forward_set(&g, zero).unwrap();
        assert!(zero.is_subset(&fs));
        assert!(g.space().directed_distance(&fs, zero) <= 3.0 * g.space().cell_diameter());
        let top = &d.find(180).unwrap().cells;
        assert!(chain_forward_set(&g, top).unwrap().len() >= 350);
        assert!(chain_forward_set(&g, &g.space().empty_set()).is_err());
    }

    #[test]
    fn boundary_constructions_on_ns() {
        let (g, d) = ns_graph(360);
        let top = d.component_of(180).unwrap();
        assert!(matches!(attractor_with_c_in_boundary(&g, &d, top).unwrap(), BoundaryConstruction::Initial { .. }));
        let zero = d.component_of(0).unwrap();
        let BoundaryConstruction::Built(b) = attractor_with_c_in_boundary(&g, &d, zero).unwrap() else {
            panic!("component at 0 is not initial");
        };
        assert!(b.chain_boundary);
        assert!(d.components[zero].cells.is_subset(&b.construction.attractor.lambda));
        let w = escape_witness(&g, &b.construction.attractor.lambda, 0).unwrap().unwrap();
        assert!(!b.construction.attractor.lambda.contains(w.z));
        assert_eq!(*w.path.last().unwrap(), 0);
        for pair in w.path.windows(2) {
            assert!(g.has_edge(pair[0], pair[1]));
        }
    }

    #[test]
    fn two_node_digraph_boundary() {
        let sp = Arc::new(GridSpace::abstract_discrete(2).unwrap());
        let map = Arc::new(CellMap::from_relation(sp, "ab", vec![vec![0, 1], vec![1]]).unwrap());
        let g = build_chain_graph(map, 0.5).unwrap();
        let d = crate::chains::classify_components(&g, chain_components(&g), 0.0);
        let b = d.component_of(1).unwrap();
        let BoundaryConstruction::Built(res) = attractor_with_c_in_boundary(&g, &d, b).unwrap() else {
            panic!("{{b}} has an incoming chain");
        };
        assert_eq!(res.construction.attractor.lambda.to_vec(), vec![1]);
        assert!(res.chain_boundary);
        assert_eq!(res.witness, 0);
        let a = d.component_of(0).unwrap();
        assert!(matches!(attractor_with_c_in_boundary(&g, &d, a).unwrap(), BoundaryConstruction::Initial { .. }));
    }

    #[test]
    fn escape_witnesses_exist_on_boundaries() {
        let f = PointMap::ms4_circle(0.3).unwrap();
        let (sp, map) = setup(&f, 360);
        let g = build_chain_graph(map.clone(), sp.cell_diameter()).unwrap();
        let a = attractor_of(map.as_ref(), &arc(&sp, -0.3, PI + 0.3)).unwrap();
        for x in a.boundary.iter() {
            let w = escape_witness(&g, &a.lambda, x).unwrap().expect("witness");
            assert!(!a.lambda.contains(w.z));
            assert_eq!(w.path[0], w.z);
            assert_eq!(*w.path.last().unwrap(), x);
        }
        let rep = verify_boundary_chain_stable(&g, &a, 5.0 * g.delta(), true).unwrap();
        assert!(rep.stable() && !rep.vacuous);
        assert!(rep.escape_radius() <= 5.0 * g.delta());
    }

    #[test]
    fn whole_space_boundary_is_vacuous() {
        let (sp, map) = setup(&PointMap::cat_torus(), 21);
        let g = build_chain_graph(map.clone(), sp.cell_diameter()).unwrap();
        let a = attractor_of(map.as_ref(), &sp.full_set()).unwrap();
        let rep = verify_boundary_chain_stable(&g, &a, 0.1, true).unwrap();
        assert!(rep.vacuous && rep.stable());
    }

    #[test]
    fn thin_terminal_near_zero() {
        for f in [PointMap::ns_circle(0.5).unwrap(), PointMap::ms4_circle(0.3).unwrap()] {
            let (sp, map) = setup(&f, 720);
            let g = build_chain_graph(map, sp.cell_diameter()).unwrap();
            let d = chain_components(&g);
            let c = d.component_of(0).unwrap();
            let NearTerminalOutcome::Found(res) = terminal_with_empty_interior_near(&g, &d, c, 0.5).unwrap() else {
                panic!("hypotheses hold at 0");
            };
            assert!(sp.interior(&res.chosen).is_empty());
            assert!(res.chosen.is_subset(&sp.closed_neighborhood(&d.components[c].cells, 0.5)));
            assert!(res.chosen.is_subset(&res.boundary));
        }
        let (g, d) = ns_graph(360);
        let top = d.component_of(180).unwrap();
        assert!(matches!(
            terminal_with_empty_interior_near(&g, &d, top, 0.5).unwrap(),
            NearTerminalOutcome::HypothesesNotMet { .. }
        ));
    }

    #[test]
    fn nonclopen_component_has_neighbors() {
        // C = {0} with self-loop, adjacent to a terminal {1} and an initial {2}
        let dist = vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0];
        let sp = Arc::new(GridSpace::abstract_metric(3, dist, &[(0, 1), (0, 2)]).unwrap());
        let map = Arc::new(CellMap::from_relation(sp, "cde", vec![vec![0], vec![1], vec![2, 1]]).unwrap());
        let g = build_chain_graph(map, 0.5).unwrap();
        let d = crate::chains::classify_components(&g, chain_components(&g), 0.0);
        let c = d.component_of(0).unwrap();
        let NeighborOutcome::Found(p) = neighbors_of_nonclopen_bidirectional(&g, &d, c, 1.0).unwrap() else {
            panic!("C is not clopen");
        };
        assert_eq!(p.terminal, d.component_of(1).unwrap());
        assert_eq!(p.initial, d.component_of(2).unwrap());

        let (g, d) = ns_graph(180);
        for i in 0..d.len() {
            assert!(matches!(
                neighbors_of_nonclopen_bidirectional(&g, &d, i, 0.5).unwrap(),
                NeighborOutcome::HypothesesNotMet { .. }
            ));
        }
        let (sp, map) = setup(&PointMap::cat_torus(), 21);
        let g = build_chain_graph(map, sp.cell_diameter()).unwrap();
        let d = chain_components(&g);
        assert!(matches!(
            neighbors_of_nonclopen_bidirectional(&g, &d, 0, 0.5).unwrap(),
            NeighborOutcome::HypothesesNotMet { .. }
        ));
    }

    #[test]
    fn terminal_reach_from_anywhere() {
        let (g, d) = ns_graph(360);
        let x = g.space().cell_of(Point::new1(2.0)).unwrap();
        let r = reach_terminal(&g, &d, x).unwrap();
        assert!(d.components[r.component].cells.contains(0));
        assert_eq!(r.path[0], x);
        for pair in r.path.windows(2) {
            assert!(g.has_edge(pair[0], pair[1]));
        }
        let inside = reach_terminal(&g, &d, 0).unwrap();
        assert_eq!(inside.path, vec![0]);
    }

    #[test]
    fn basins() {
        let f = PointMap::ns_circle(0.5).unwrap();
        let (sp, map) = setup(&f, 360);
        assert!(basin(&map, &sp.full_set(), 50).is_full());
        let zero = attractor_of(map.as_ref(), &arc(&sp, -0.5, 0.5)).unwrap().lambda;
        let b = basin(&map, &zero, 400);
        let missing = b.complement();
        assert!(!missing.is_empty() && missing.len() <= 12, "{:?}", missing.to_vec());
        assert!(missing.iter().all(|c| sp.dist(c, 180) <= 6.0 * sp.cell_diameter()));
        assert!(stable_set_inclusion(&map, &zero, 400).holds());
    }

    #[test]
    fn u_spec_parsing() {
        let sp = GridSpace::circle(36).unwrap();
        assert_eq!(USpec::Whole.cells(&sp).unwrap().len(), 36);
        assert!(USpec::Interval { from: 0.0, to: 1.0 }.cells(&sp).is_ok());
        assert!(USpec::Arc { from: 1.0, to: 0.5 }.cells(&sp).is_err());
        assert!(USpec::Cells { cells: vec![40] }.cells(&sp).is_err());
        let torus = GridSpace::torus2(10).unwrap();
        assert!(USpec::Arc { from: 0.0, to: 1.0 }.cells(&torus).is_err());
        let ball = USpec::Ball { center: vec![0.5, 0.5], radius: 0.15 }.cells(&torus).unwrap();
        assert!(!ball.is_empty() && torus.is_grid_open(&ball));
    }

    #[test]
    fn refinement_study_counts() {
        let f = PointMap::ms4_circle(0.3).unwrap();
        let st = boundary_refinement_study(&f, &USpec::Arc { from: -0.3, to: PI + 0.3 }, &[180, 360, 720], 60).unwrap();
        assert!(st.counts_stable);
        for l in &st.levels {
            assert_eq!(l.component_count, 2);
            assert!(l.ring_hypothesis);
        }
        let sq = boundary_refinement_study(
            &PointMap::square_interval(),
            &USpec::Interval { from: 0.0, to: 0.5 },
            &[200, 400],
            60,
        )
        .unwrap();
        assert!(sq.levels.iter().all(|l| l.component_count == 1));
        let whole = boundary_refinement_study(&PointMap::cat_torus(), &USpec::Whole, &[11, 21], 5).unwrap();
        assert!(whole.levels.iter().all(|l| l.component_count == 0 && l.hausdorff.is_empty()));
    }
}
