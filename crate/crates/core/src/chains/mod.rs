//! The δ-chain digraph and the recurrence structure read off from it.
//!
//! Paths of length `k ≥ 1` in a [`ChainGraph`] are grid-level δ-chains.
//! Everything here is stated at one fixed δ; [`refine`] sweeps δ and the
//! resolution together and records how the answers stabilize.

pub mod scc;

use std::collections::VecDeque;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{CellSet, GridSpace};
use crate::systems::{CellMap, PointMap};
use scc::{period, tarjan, Csr};

/// c → c' iff c' lies in the closed δ-neighborhood of the image of c.
#[derive(Clone, Debug)]
pub struct ChainGraph {
    map: Arc<CellMap>,
    delta: f64,
    succ: Csr,
    pred: Csr,
    soundness_bound: f64,
    reversed: bool,
    link: OnceLock<Option<Arc<ChainGraph>>>,
}

pub fn build_chain_graph(map: Arc<CellMap>, delta: f64) -> Result<ChainGraph> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::arg(format!("delta must be positive, got {delta}")));
    }
    let sp = map.space().clone();
    let r = delta + sp.cell_radius();
    let lists: Vec<Vec<u32>> = (0..sp.len())
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            for &d in map.forward_images(c) {
                sp.ball_cells(d as usize, r, &mut out);
            }
            out
        })
        .collect();
    let succ = Csr::from_lists(lists);
    let pred = succ.transpose();
    let soundness_bound = delta + 2.0 * sp.cell_radius() * (1.0 + map.lipschitz_bound());
    Ok(ChainGraph { map, delta, succ, pred, soundness_bound, reversed: false, link: OnceLock::new() })
}

impl ChainGraph {
    pub fn map(&self) -> &Arc<CellMap> {
        &self.map
    }

    pub fn space(&self) -> &Arc<GridSpace> {
        self.map.space()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Every path corresponds to a chain of the point map with steps at most this.
    pub fn soundness_bound(&self) -> f64 {
        self.soundness_bound
    }

    pub fn is_reversed(&self) -> bool {
        self.reversed
    }

    pub fn len(&self) -> usize {
        self.succ.node_count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn edge_count(&self) -> usize {
        self.succ.edge_count()
    }

    pub fn successors(&self, c: usize) -> &[u32] {
        self.succ.row(c)
    }

    pub fn predecessors(&self, c: usize) -> &[u32] {
        self.pred.row(c)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.succ.has_edge(a, b)
    }

    pub fn csr(&self) -> &Csr {
        &self.succ
    }

    /// The graph of the inverse map: every edge turned around.
    pub fn reversed(&self) -> ChainGraph {
        ChainGraph {
            map: self.map.clone(),
            delta: self.delta,
            succ: self.pred.clone(),
            pred: self.succ.clone(),
            soundness_bound: self.soundness_bound,
            reversed: !self.reversed,
            link: match self.link.get() {
                Some(Some(l)) => OnceLock::from(Some(Arc::new(l.reversed()))),
                _ => OnceLock::new(),
            },
        }
    }

    /// Graph at δ plus one cell diameter, used to decide which recurrent
    /// cells are chain equivalent. On spaces with zero cell radius this is
    /// the graph itself.
    pub fn link(&self) -> &ChainGraph {
        let l = self.link.get_or_init(|| {
            if self.space().cell_radius() == 0.0 {
                return None;
            }
            let wide = self.delta + self.space().cell_diameter();
            let base = build_chain_graph(self.map.clone(), wide).expect("positive delta");
            Some(Arc::new(if self.reversed { base.reversed() } else { base }))
        });
        l.as_deref().unwrap_or(self)
    }

    /// Cells at the end of some path of length ≥ 1 starting in `s`.
    pub fn forward_reach(&self, s: &CellSet) -> CellSet {
        bfs(&self.succ, s, self.space().empty_set())
    }

    /// Cells at the start of some path of length ≥ 1 ending in `s`.
    pub fn backward_reach(&self, s: &CellSet) -> CellSet {
        bfs(&self.pred, s, self.space().empty_set())
    }

    /// Shortest path from `s` to `target` (length ≥ 1), as a cell list.
    pub fn path_between(&self, s: &CellSet, target: impl Fn(usize) -> bool) -> Option<Vec<usize>> {
        shortest_path(&self.succ, s, target)
    }

    /// Image of a set under one step of the graph.
    pub fn step(&self, s: &CellSet) -> CellSet {
        let mut out = self.space().empty_set();
        for c in s.iter() {
            for &d in self.successors(c) {
                out.insert(d as usize);
            }
        }
        out
    }

    /// Subgraph induced on `s`, labelled by rank in `s`.
    pub fn induced(&self, s: &CellSet) -> (Vec<usize>, Csr) {
        let keep = s.to_vec();
        let g = self.succ.induced(&keep);
        (keep, g)
    }
}

fn bfs(g: &Csr, s: &CellSet, mut seen: CellSet) -> CellSet {
    let mut queue: VecDeque<usize> = VecDeque::new();
    for c in s.iter() {
        for &d in g.row(c) {
            if seen.insert(d as usize) {
                queue.push_back(d as usize);
            }
        }
    }
    while let Some(c) = queue.pop_front() {
        for &d in g.row(c) {
            if seen.insert(d as usize) {
                queue.push_back(d as usize);
            }
        }
    }
    seen
}

fn shortest_path(g: &Csr, s: &CellSet, target: impl Fn(usize) -> bool) -> Option<Vec<usize>> {
    let n = g.node_count();
    let mut parent = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    const ROOT: u32 = u32::MAX - 1;
    let visit = |from: u32, d: usize, parent: &mut Vec<u32>, queue: &mut VecDeque<usize>| -> Option<usize> {
        if parent[d] == u32::MAX {
            parent[d] = from;
            if target(d) {
                return Some(d);
            }
            queue.push_back(d);
        }
        None
    };
    let rebuild = |end: usize, parent: &[u32], start_of: &dyn Fn(usize) -> usize| -> Vec<usize> {
        let mut path = vec![end];
        let mut cur = end;
        loop {
            let p = parent[cur];
            if p >= ROOT {
                break;
            }
            path.push(p as usize);
            cur = p as usize;
            if path.len() > n + 1 {
                break;
            }
        }
        path.push(start_of(cur));
        path.reverse();
        path
    };
    // start cells are recorded separately so that paths have length ≥ 1
    let mut start_of = vec![u32::MAX; n];
    for c in s.iter() {
        for &d in g.row(c) {
            let d = d as usize;
            if parent[d] == u32::MAX {
                start_of[d] = c as u32;
            }
            if let Some(end) = visit(ROOT, d, &mut parent, &mut queue) {
                return Some(rebuild(end, &parent, &|x| start_of[x] as usize));
            }
        }
    }
    while let Some(c) = queue.pop_front() {
        for &d in g.row(c) {
            if let Some(end) = visit(c as u32, d as usize, &mut parent, &mut queue) {
                return Some(rebuild(end, &parent, &|x| start_of[x] as usize));
            }
        }
    }
    None
}

pub fn chain_reaches(g: &ChainGraph, a: usize, b: usize) -> Result<bool> {
    if a >= g.len() || b >= g.len() {
        return Err(Error::arg(format!("cell index out of range ({a}, {b})")));
    }
    Ok(g.forward_reach(&g.space().set_of([a])).contains(b))
}

/// Cells on a cycle of length ≥ 1; self-loops count.
pub fn chain_recurrent_set(g: &ChainGraph) -> CellSet {
    let s = tarjan(&g.succ);
    g.space().set_of((0..g.len()).filter(|&c| s.cyclic[s.comp[c] as usize]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainComponent {
    pub cells: CellSet,
    pub is_terminal: bool,
    pub is_initial: bool,
    /// sup distance from the component of its forward reach.
    pub escape_radius: f64,
    /// sup distance from the component of its backward reach.
    pub entry_radius: f64,
}

/// Condensation over cyclic components and transient singleton cells.
#[derive(Clone, Debug)]
pub struct Condensation {
    /// Condensation node of each cell.
    pub node_of: Vec<u32>,
    /// Component index of each node, `None` for transient cells.
    pub component_of_node: Vec<Option<usize>>,
    pub succ: Csr,
}

impl Condensation {
    pub fn node_count(&self) -> usize {
        self.component_of_node.len()
    }

    /// Sink nodes: no edge leaves them.
    pub fn is_sink(&self, node: usize) -> bool {
        self.succ.row(node).is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ChainDecomposition {
    pub recurrent: CellSet,
    pub components: Vec<ChainComponent>,
    pub condensation: Condensation,
    pub epsilon: f64,
    /// δ of the graph that decides chain equivalence.
    pub link_delta: f64,
}

impl ChainDecomposition {
    pub fn component_of(&self, c: usize) -> Option<usize> {
        if !self.recurrent.contains(c) {
            return None;
        }
        self.condensation.component_of_node[self.condensation.node_of[c] as usize]
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn terminal(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.components[i].is_terminal)
    }

    pub fn initial(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&i| self.components[i].is_initial)
    }

    /// Index of the component containing the given cell, if recurrent.
    pub fn find(&self, cell: usize) -> Option<&ChainComponent> {
        self.component_of(cell).map(|i| &self.components[i])
    }
}

/// Recurrent cells come from cycles of `g`; two of them are equivalent when
/// they are mutually reachable in [`ChainGraph::link`]. The condensation is
/// the SCC DAG of the link graph. Flags are computed for ε = +∞.
pub fn chain_components(g: &ChainGraph) -> ChainDecomposition {
    let sp = g.space();
    let recurrent = chain_recurrent_set(g);
    let link = g.link();
    let scc = tarjan(&link.succ);
    let mut comp_cells: Vec<Vec<usize>> = vec![Vec::new(); scc.count];
    for c in recurrent.iter() {
        comp_cells[scc.comp[c] as usize].push(c);
    }
    let mut ids: Vec<usize> = (0..scc.count).filter(|&i| !comp_cells[i].is_empty()).collect();
    ids.sort_by_key(|&i| comp_cells[i][0]);
    let mut component_of_scc = vec![None; scc.count];
    for (k, &i) in ids.iter().enumerate() {
        component_of_scc[i] = Some(k);
    }
    let mut node_lists: Vec<Vec<u32>> = vec![Vec::new(); scc.count];
    for c in 0..link.len() {
        let a = scc.comp[c];
        for &d in link.successors(c) {
            let b = scc.comp[d as usize];
            if a != b {
                node_lists[a as usize].push(b);
            }
        }
    }
    let condensation = Condensation {
        node_of: scc.comp.clone(),
        component_of_node: component_of_scc,
        succ: Csr::from_lists(node_lists),
    };
    let components: Vec<ChainComponent> = ids
        .iter()
        .map(|&i| ChainComponent {
            cells: sp.set_of(comp_cells[i].iter().copied()),
            is_terminal: false,
            is_initial: false,
            escape_radius: 0.0,
            entry_radius: 0.0,
        })
        .collect();
    let d = ChainDecomposition {
        recurrent,
        components,
        condensation,
        epsilon: f64::INFINITY,
        link_delta: link.delta(),
    };
    classify_components(g, d, f64::INFINITY)
}

/// Terminal: forward reach in the link graph meets no other component and
/// stays within `B_ε(C)`. Initial: the same for the reversed graph.
pub fn classify_components(g: &ChainGraph, mut d: ChainDecomposition, epsilon: f64) -> ChainDecomposition {
    let sp = g.space().clone();
    let g = g.link();
    let flags: Vec<(bool, f64, bool, f64)> = d
        .components
        .par_iter()
        .map(|comp| {
            let others = d.recurrent.difference(&comp.cells);
            let fwd = g.forward_reach(&comp.cells);
            let bwd = g.backward_reach(&comp.cells);
            let esc = sp.directed_distance(&fwd, &comp.cells);
            let ent = sp.directed_distance(&bwd, &comp.cells);
            let term = fwd.is_disjoint(&others) && within(&sp, &fwd, &comp.cells, epsilon);
            let init = bwd.is_disjoint(&others) && within(&sp, &bwd, &comp.cells, epsilon);
            (term, esc, init, ent)
        })
        .collect();
    for (comp, (term, esc, init, ent)) in d.components.iter_mut().zip(flags) {
        comp.is_terminal = term;
        comp.escape_radius = esc;
        comp.is_initial = init;
        comp.entry_radius = ent;
    }
    d.epsilon = epsilon;
    d
}

fn within(sp: &GridSpace, reach: &CellSet, s: &CellSet, epsilon: f64) -> bool {
    if epsilon.is_infinite() {
        return true;
    }
    reach.is_subset(&sp.closed_neighborhood(s, epsilon))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    pub escape_radius: f64,
    /// On failure: a path from `S` to a cell outside `B_ε(S)`.
    pub witness: Option<Vec<usize>>,
}

/// Forward reach of `s` contained in the ε-enclosure of `s`.
pub fn is_chain_stable(g: &ChainGraph, s: &CellSet, epsilon: f64) -> Result<StabilityReport> {
    if s.is_empty() {
        return Err(Error::arg("chain stability of the empty set is undefined"));
    }
    let sp = g.space();
    let reach = g.forward_reach(s);
    let escape_radius = sp.directed_distance(&reach, s);
    let nbhd = sp.closed_neighborhood(s, epsilon);
    if reach.is_subset(&nbhd) {
        return Ok(StabilityReport { stable: true, escape_radius, witness: None });
    }
    let witness = g.path_between(s, |c| !nbhd.contains(c));
    Ok(StabilityReport { stable: false, escape_radius, witness })
}

pub fn is_chain_transitive(g: &ChainGraph) -> bool {
    strongly_connected(&g.succ)
}

pub fn is_chain_mixing(g: &ChainGraph) -> bool {
    strongly_connected(&g.succ) && period(&g.succ) == 1
}

/// Transitivity of the graph restricted to `s`.
pub fn is_chain_transitive_on(g: &ChainGraph, s: &CellSet) -> bool {
    let (_, sub) = g.induced(s);
    strongly_connected(&sub)
}

pub fn is_chain_mixing_on(g: &ChainGraph, s: &CellSet) -> bool {
    let (_, sub) = g.induced(s);
    strongly_connected(&sub) && period(&sub) == 1
}

fn strongly_connected(g: &Csr) -> bool {
    if g.node_count() == 0 {
        return false;
    }
    let s = tarjan(g);
    s.count == 1 && s.cyclic[0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Separation {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
}

/// Minimum center distance between each pair of distinct components.
pub fn component_separation(space: &GridSpace, d: &ChainDecomposition) -> Vec<Separation> {
    let mut out = Vec::new();
    for a in 0..d.len() {
        for b in a + 1..d.len() {
            out.push(Separation {
                a,
                b,
                distance: space.set_separation(&d.components[a].cells, &d.components[b].cells),
            });
        }
    }
    out
}

/// No cell of CR \ C is adjacent to a cell of C.
pub fn clopen_in_cr(g: &ChainGraph, d: &ChainDecomposition, component: usize) -> Result<bool> {
    let comp = d
        .components
        .get(component)
        .ok_or_else(|| Error::arg(format!("no component {component}")))?;
    let rest = d.recurrent.difference(&comp.cells);
    Ok(g.space().closure(&comp.cells).is_disjoint(&rest))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub resolution: usize,
    pub delta: f64,
    pub component_count: usize,
    pub recurrent_cells: usize,
    pub component_sizes: Vec<usize>,
    pub terminal: Vec<bool>,
    pub initial: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinementReport {
    pub levels: Vec<LevelSummary>,
    /// `matches[k][i]`: component of level k matched by component i of level k + 1.
    pub matches: Vec<Vec<Option<usize>>>,
    /// CR at level k + 1 lies within one coarse cell of CR at level k.
    pub nested: Vec<bool>,
    pub counts_stable: bool,
    pub flags_stable: bool,
}

/// Sweep paired (resolution, δ) levels through a cell-map factory.
pub fn refine<F>(factory: F, resolutions: &[usize], deltas: &[f64]) -> Result<RefinementReport>
where
    F: Fn(usize) -> Result<Arc<CellMap>>,
{
    if resolutions.len() != deltas.len() {
        return Err(Error::config(format!(
            "{} resolutions but {} deltas",
            resolutions.len(),
            deltas.len()
        )));
    }
    if deltas.len() < 2 {
        return Err(Error::config("refinement needs at least two levels"));
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::config("delta ladder must be strictly decreasing"));
    }
    if resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::config("resolutions must be strictly increasing"));
    }
    let mut decomps = Vec::new();
    for (&n, &delta) in resolutions.iter().zip(deltas) {
        let map = factory(n)?;
        let g = build_chain_graph(map, delta)?;
        let d = chain_components(&g);
        decomps.push((g, d));
    }
    let levels: Vec<LevelSummary> = decomps
        .iter()
        .zip(resolutions.iter().zip(deltas))
        .map(|((_, d), (&n, &delta))| LevelSummary {
            resolution: n,
            delta,
            component_count: d.len(),
            recurrent_cells: d.recurrent.len(),
            component_sizes: d.components.iter().map(|c| c.cells.len()).collect(),
            terminal: d.components.iter().map(|c| c.is_terminal).collect(),
            initial: d.components.iter().map(|c| c.is_initial).collect(),
        })
        .collect();
    let mut matches = Vec::new();
    let mut nested = Vec::new();
    let mut flags_stable = true;
    for k in 0..decomps.len() - 1 {
        let (gc, dc) = &decomps[k];
        let (gf, df) = &decomps[k + 1];
        let (coarse, fine) = (gc.space(), gf.space());
        let to_coarse = |c: usize| coarse.cell_of(fine.center(c));
        let fat: Vec<CellSet> =
            dc.components.iter().map(|c| coarse.closed_neighborhood(&c.cells, coarse.cell_diameter())).collect();
        let m: Vec<Option<usize>> = df
            .components
            .iter()
            .map(|comp| {
                let mut best: Option<(usize, usize)> = None;
                for (j, f) in fat.iter().enumerate() {
                    let overlap = comp.cells.iter().filter(|&c| to_coarse(c).is_some_and(|x| f.contains(x))).count();
                    if overlap > 0 && best.is_none_or(|(o, _)| overlap > o) {
                        best = Some((overlap, j));
                    }
                }
                best.map(|(_, j)| j)
            })
            .collect();
        for (i, mj) in m.iter().enumerate() {
            match mj {
                Some(j) => {
                    let (a, b) = (&df.components[i], &dc.components[*j]);
                    if a.is_terminal != b.is_terminal || a.is_initial != b.is_initial {
                        flags_stable = false;
                    }
                }
                None => flags_stable = false,
            }
        }
        let cr_fat = coarse.closed_neighborhood(&dc.recurrent, coarse.cell_diameter());
        nested.push(df.recurrent.iter().all(|c| to_coarse(c).is_some_and(|x| cr_fat.contains(x))));
        matches.push(m);
    }
    let counts_stable = levels.windows(2).all(|w| w[0].component_count == w[1].component_count);
    Ok(RefinementReport { levels, matches, nested, counts_stable, flags_stable: flags_stable && counts_stable })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClopenCheck {
    pub component: usize,
    pub clopen: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrbitSeparation {
    pub component: usize,
    pub start_cell: usize,
    /// Smallest distance to the component over the sampled orbit tail.
    pub min_tail_distance: f64,
    pub entered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimalityReport {
    pub clopen_checks: Vec<ClopenCheck>,
    pub separations: Vec<OrbitSeparation>,
    /// Orbit part skipped (no point map available).
    pub orbit_checks_skipped: bool,
    pub passed: bool,
}

/// (a) interior-carrying components that are initial, terminal and clopen in
/// CR must be clopen in the space; (b) orbits started off an initial
/// component stay out of its enclosure.
pub fn minimality_and_separation_checks(
    g: &ChainGraph,
    d: &ChainDecomposition,
    f: Option<&PointMap>,
    horizon: usize,
    samples_per_component: usize,
) -> Result<MinimalityReport> {
    let sp = g.space();
    let mut clopen_checks = Vec::new();
    for (i, comp) in d.components.iter().enumerate() {
        let has_interior = !sp.interior(&comp.cells).is_empty();
        if has_interior && comp.is_initial && comp.is_terminal && clopen_in_cr(g, d, i)? {
            clopen_checks.push(ClopenCheck { component: i, clopen: sp.is_clopen(&comp.cells) });
        }
    }
    let mut separations = Vec::new();
    let skipped = f.is_none() || !sp.is_grid();
    if let Some(f) = f.filter(|_| sp.is_grid()) {
        for (i, comp) in d.components.iter().enumerate() {
            if !comp.is_initial || comp.is_terminal {
                continue;
            }
            let enclosure = sp.closed_neighborhood(&comp.cells, 0.0);
            // cells hugging the component first, then evenly spread cells
            let ring = sp.closure(&comp.cells).difference(&comp.cells);
            let outside = comp.cells.complement();
            let spread = outside.len().div_ceil(samples_per_component.max(1)).max(1);
            let mut starts: Vec<usize> = ring.iter().collect();
            starts.extend(outside.iter().step_by(spread));
            starts.sort_unstable();
            starts.dedup();
            for c in starts {
                let mut p = sp.center(c);
                let mut entered = false;
                let mut min_tail = f64::INFINITY;
                for t in 0..horizon {
                    p = f.forward(p);
                    let cell = sp.cell_of(p).expect("grid");
                    if enclosure.contains(cell) {
                        entered = true;
                    }
                    if t >= horizon / 2 {
                        min_tail = min_tail.min(sp.distance_to_set(cell, &comp.cells));
                    }
                }
                separations.push(OrbitSeparation { component: i, start_cell: c, min_tail_distance: min_tail, entered });
            }
        }
    }
    let passed = clopen_checks.iter().all(|c| c.clopen) && separations.iter().all(|s| !s.entered);
    Ok(MinimalityReport { clopen_checks, separations, orbit_checks_skipped: skipped, passed })
}
