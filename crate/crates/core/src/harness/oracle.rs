//! Random digraphs and brute-force answers computed from bitmask closures,
//! independent of the engine's graph code.

use std::sync::Arc;

use fixedbitset::FixedBitSet;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attractors::{attractor_with_c_in_boundary, chain_forward_set, escape_witness, reach_terminal, BoundaryConstruction};
use crate::chains::{build_chain_graph, chain_components, classify_components, is_chain_mixing, is_chain_transitive};
use crate::chains::ChainDecomposition;
use crate::space::TOL;
use crate::{CellMap, ChainGraph, Error, GridSpace, Result};

/// Largest node count the oracle accepts.
pub const MAX_NODES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomDigraph {
    pub nodes: usize,
    pub density: f64,
    pub seed: u64,
    /// Successor lists; every node has at least one.
    pub succ: Vec<Vec<usize>>,
}

impl RandomDigraph {
    /// Each edge `i → j` (self-loops included) is drawn with probability
    /// `density`; a node left without successors gets one uniform edge.
    pub fn generate(nodes: usize, density: f64, seed: u64) -> Result<Self> {
        if nodes == 0 || nodes > MAX_NODES {
            return Err(Error::config(format!("random digraph needs 1..={MAX_NODES} nodes, got {nodes}")));
        }
        if !(0.0..=1.0).contains(&density) {
            return Err(Error::config(format!("density must lie in [0, 1], got {density}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let succ = (0..nodes)
            .map(|_| {
                let mut row: Vec<usize> = (0..nodes).filter(|_| rng.gen_bool(density)).collect();
                if row.is_empty() {
                    row.push(rng.gen_range(0..nodes));
                }
                row
            })
            .collect();
        Ok(RandomDigraph { nodes, density, seed, succ })
    }

    pub fn from_edges(succ: Vec<Vec<usize>>) -> Result<Self> {
        let nodes = succ.len();
        if nodes == 0 || nodes > MAX_NODES {
            return Err(Error::config(format!("digraph needs 1..={MAX_NODES} nodes, got {nodes}")));
        }
        if succ.iter().any(|r| r.is_empty() || r.iter().any(|&j| j >= nodes)) {
            return Err(Error::config("every node needs at least one in-range successor"));
        }
        Ok(RandomDigraph { nodes, density: 0.0, seed: 0, succ })
    }

    pub fn cell_map(&self) -> Result<CellMap> {
        let sp = Arc::new(GridSpace::abstract_discrete(self.nodes)?);
        CellMap::from_relation(sp, "random_digraph", self.succ.clone())
    }

    /// Chain graph over the discrete space; any δ below 1 gives the relation itself.
    pub fn chain_graph(&self) -> Result<ChainGraph> {
        build_chain_graph(Arc::new(self.cell_map()?), 0.5)
    }
}

/// Brute-force facts about a digraph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BruteForce {
    pub nodes: usize,
    /// `reach[i]`: nodes at the end of a path of length ≥ 1 from `i`.
    pub reach: Vec<u32>,
    pub recurrent: u32,
    /// Classes of mutually reachable recurrent nodes, ordered by smallest member.
    pub classes: Vec<u32>,
    pub terminal: Vec<bool>,
    pub initial: Vec<bool>,
    pub transitive: bool,
    pub mixing: bool,
    /// Forward-closed nonempty sets `U` (`F(U) ⊆ U`) with their greatest
    /// invariant subsets.
    pub closed_sets: Vec<(u32, u32)>,
}

fn image(succ: &[u32], s: u32) -> u32 {
    let mut out = 0;
    let mut rest = s;
    while rest != 0 {
        let i = rest.trailing_zeros() as usize;
        out |= succ[i];
        rest &= rest - 1;
    }
    out
}

fn bits(s: u32) -> Vec<usize> {
    (0..32).filter(|&i| s >> i & 1 == 1).collect()
}

impl BruteForce {
    pub fn compute(g: &RandomDigraph) -> Self {
        let n = g.nodes;
        let succ: Vec<u32> = g.succ.iter().map(|r| r.iter().fold(0u32, |m, &j| m | 1 << j)).collect();
        // Warshall on bit rows
        let mut reach = succ.clone();
        for k in 0..n {
            for i in 0..n {
                if reach[i] >> k & 1 == 1 {
                    reach[i] |= reach[k];
                }
            }
        }
        let recurrent = (0..n).filter(|&i| reach[i] >> i & 1 == 1).fold(0u32, |m, i| m | 1 << i);
        let mut classes = Vec::new();
        let mut seen = 0u32;
        for i in bits(recurrent) {
            if seen >> i & 1 == 1 {
                continue;
            }
            let class = bits(recurrent).into_iter().filter(|&j| reach[i] >> j & 1 == 1 && reach[j] >> i & 1 == 1).fold(0u32, |m, j| m | 1 << j);
            seen |= class;
            classes.push(class);
        }
        let back = |c: u32| (0..n).filter(|&i| reach[i] & c != 0).fold(0u32, |m, i| m | 1 << i);
        let terminal = classes.iter().map(|&c| image(&reach, c) & !c == 0).collect();
        let initial = classes.iter().map(|&c| back(c) & !c == 0).collect();
        let full = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        let transitive = reach.iter().all(|&r| r == full);
        // some power of the relation is the complete relation
        let mixing = transitive && {
            let mut power = succ.clone();
            let bound = (n - 1) * (n - 1) + 1;
            let mut hit = power.iter().all(|&r| r == full);
            for _ in 1..bound.max(1) {
                if hit {
                    break;
                }
                power = power.iter().map(|&r| image(&succ, r)).collect();
                hit = power.iter().all(|&r| r == full);
            }
            hit
        };
        let mut closed_sets = Vec::new();
        for u in 1..=full {
            if image(&succ, u) & !u != 0 {
                continue;
            }
            let mut s = u;
            loop {
                let next = image(&succ, s) & u;
                if next == s {
                    break;
                }
                s = next;
            }
            closed_sets.push((u, s));
        }
        BruteForce { nodes: n, reach, recurrent, classes, terminal, initial, transitive, mixing, closed_sets }
    }

    /// Some forward-closed `U` has `C ⊆ Λ_U` with every node of C reached by
    /// a path from a node outside `Λ_U`.
    pub fn in_some_attractor_boundary(&self, class: u32) -> bool {
        self.closed_sets.iter().any(|&(_, lambda)| {
            if class & !lambda != 0 {
                return false;
            }
            let outside = !lambda & self.full();
            image(&self.reach, outside) & class == class
        })
    }

    fn full(&self) -> u32 {
        if self.nodes == 32 {
            u32::MAX
        } else {
            (1u32 << self.nodes) - 1
        }
    }

    pub fn class_of(&self, x: usize) -> Option<usize> {
        self.classes.iter().position(|&c| c >> x & 1 == 1)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleOutcome {
    pub queries: usize,
    pub mismatches: Vec<String>,
}

impl OracleOutcome {
    pub fn agrees(&self) -> bool {
        self.mismatches.is_empty()
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.queries += 1;
        if !ok {
            self.mismatches.push(what());
        }
    }
}

/// Runs every engine query on `g` and compares it with brute force.
pub fn compare_engine(g: &RandomDigraph) -> Result<OracleOutcome> {
    let bf = BruteForce::compute(g);
    let graph = g.chain_graph()?;
    let d = classify_components(&graph, chain_components(&graph), 0.0);
    let mut out = OracleOutcome::default();
    let mask = |s: &crate::CellSet| s.iter().fold(0u32, |m, i| m | 1 << i);

    out.check(mask(&d.recurrent) == bf.recurrent, || {
        format!("recurrent set: engine {:?}, oracle {:?}", d.recurrent.to_vec(), bits(bf.recurrent))
    });
    let mut engine_classes: Vec<u32> = d.components.iter().map(|c| mask(&c.cells)).collect();
    engine_classes.sort_by_key(|c| c.trailing_zeros());
    out.check(engine_classes == bf.classes, || format!("components: engine {engine_classes:?}, oracle {:?}", bf.classes));
    out.check(is_chain_transitive(&graph) == bf.transitive, || format!("transitive: oracle {}", bf.transitive));
    out.check(is_chain_mixing(&graph) == bf.mixing, || format!("mixing: oracle {}", bf.mixing));
    if !out.agrees() {
        return Ok(out);
    }
    for (k, comp) in d.components.iter().enumerate() {
        let class = mask(&comp.cells);
        let j = bf.classes.iter().position(|&c| c == class).expect("matched above");
        out.check(comp.is_terminal == bf.terminal[j], || format!("terminal flag of {:?}", bits(class)));
        out.check(comp.is_initial == bf.initial[j], || format!("initial flag of {:?}", bits(class)));
        let fwd = mask(&chain_forward_set(&graph, &comp.cells)?);
        out.check(fwd == image(&bf.reach, class), || format!("forward set of {:?}", bits(class)));

        // equivalence: not initial <=> C sits in the chain boundary of an attractor
        let brute = bf.in_some_attractor_boundary(class);
        out.check(brute == !bf.initial[j], || format!("oracle equivalence fails on {:?}", bits(class)));
        let engine = match attractor_with_c_in_boundary(&graph, &d, k)? {
            BoundaryConstruction::Initial { .. } => false,
            BoundaryConstruction::Built(b) => {
                let lambda = &b.construction.attractor.lambda;
                let mut every = b.chain_boundary && comp.cells.is_subset(lambda);
                for x in comp.cells.iter() {
                    every &= escape_witness(&graph, lambda, x)?.is_some_and(|w| !lambda.contains(w.z));
                }
                every
            }
        };
        out.check(engine == brute, || format!("boundary construction on {:?}: engine {engine}, oracle {brute}", bits(class)));
    }
    for x in 0..g.nodes {
        let r = reach_terminal(&graph, &d, x)?;
        let target_class = bf.class_of(r.target);
        let ok = target_class.is_some_and(|j| bf.terminal[j])
            && (r.target == x || bf.reach[x] >> r.target & 1 == 1)
            && r.path.first() == Some(&x)
            && r.path.windows(2).all(|w| g.succ[w[0]].contains(&w[1]));
        out.check(ok, || format!("terminal walk from {x}: {:?}", r.path));
    }
    Ok(out)
}

/// Parameters of the seeded sweep: node counts cycle through `1..=max_nodes`
/// (or stay at `fixed`) and densities cycle through `densities`.
pub fn sweep_case(seed: u64, max_nodes: usize, fixed: Option<usize>, densities: &[f64]) -> (usize, f64) {
    let n = fixed.unwrap_or(1 + (seed as usize % max_nodes));
    let density = densities[(seed as usize / max_nodes) % densities.len()];
    (n, density)
}

/// Grid sizes above this are not brute-forced.
pub const GRID_BRUTE_FORCE_LIMIT: usize = 1024;

/// Decomposition of a chain graph recomputed from center distances and
/// bitset transitive closures.
#[derive(Clone, Debug, PartialEq)]
pub struct GridBruteForce {
    pub recurrent: Vec<usize>,
    /// Classes ordered by smallest cell.
    pub classes: Vec<Vec<usize>>,
    pub terminal: Vec<bool>,
    pub initial: Vec<bool>,
}

fn closure_rows(map: &CellMap, r: f64) -> Vec<FixedBitSet> {
    let sp = map.space();
    let n = sp.len();
    let mut rows: Vec<FixedBitSet> = (0..n)
        .map(|c| {
            let mut row = FixedBitSet::with_capacity(n);
            for &d in map.forward_images(c) {
                for e in 0..n {
                    if sp.dist(d as usize, e) <= r + TOL {
                        row.insert(e);
                    }
                }
            }
            row
        })
        .collect();
    for k in 0..n {
        let rk = rows[k].clone();
        for row in rows.iter_mut() {
            if row.contains(k) {
                row.union_with(&rk);
            }
        }
    }
    rows
}

impl GridBruteForce {
    pub fn compute(map: &CellMap, delta: f64) -> Result<Self> {
        let sp = map.space();
        let n = sp.len();
        if n > GRID_BRUTE_FORCE_LIMIT {
            return Err(Error::arg(format!("brute force limited to {GRID_BRUTE_FORCE_LIMIT} cells, got {n}")));
        }
        let reach = closure_rows(map, delta + sp.cell_radius());
        let link = if sp.cell_radius() > 0.0 { closure_rows(map, delta + sp.cell_radius() + sp.cell_diameter()) } else { reach.clone() };
        let recurrent: Vec<usize> = (0..n).filter(|&c| reach[c].contains(c)).collect();
        let mut class_of = vec![usize::MAX; n];
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for &c in &recurrent {
            if class_of[c] != usize::MAX {
                continue;
            }
            let members: Vec<usize> =
                recurrent.iter().copied().filter(|&e| e == c || (link[c].contains(e) && link[e].contains(c))).collect();
            for &e in &members {
                class_of[e] = classes.len();
            }
            classes.push(members);
        }
        let is_rec = |c: usize| class_of[c] != usize::MAX;
        let mut terminal = Vec::new();
        let mut initial = Vec::new();
        for (k, cls) in classes.iter().enumerate() {
            let fwd_other = (0..n).any(|e| is_rec(e) && class_of[e] != k && cls.iter().any(|&c| link[c].contains(e)));
            let bwd_other = (0..n).any(|e| is_rec(e) && class_of[e] != k && cls.iter().any(|&c| link[e].contains(c)));
            terminal.push(!fwd_other);
            initial.push(!bwd_other);
        }
        Ok(GridBruteForce { recurrent, classes, terminal, initial })
    }

    /// Differences from an engine decomposition computed at ε = ∞.
    pub fn mismatches(&self, d: &ChainDecomposition) -> Vec<String> {
        let mut out = Vec::new();
        if d.recurrent.to_vec() != self.recurrent {
            out.push(format!("recurrent sets differ ({} engine cells, {} oracle)", d.recurrent.len(), self.recurrent.len()));
            return out;
        }
        let engine: Vec<Vec<usize>> = d.components.iter().map(|c| c.cells.to_vec()).collect();
        if engine != self.classes {
            out.push(format!("components differ ({} engine, {} oracle)", engine.len(), self.classes.len()));
            return out;
        }
        for (k, c) in d.components.iter().enumerate() {
            if c.is_terminal != self.terminal[k] || c.is_initial != self.initial[k] {
                out.push(format!("flags of component {k} differ"));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_self_loop() {
        let g = RandomDigraph::from_edges(vec![vec![0]]).unwrap();
        let bf = BruteForce::compute(&g);
        assert_eq!(bf.classes, vec![1]);
        assert!(bf.initial[0] && bf.terminal[0] && bf.mixing);
        assert!(compare_engine(&g).unwrap().agrees());
    }

    #[test]
    fn two_cycle_is_transitive_not_mixing() {
        let g = RandomDigraph::from_edges(vec![vec![1], vec![0]]).unwrap();
        let bf = BruteForce::compute(&g);
        assert_eq!(bf.classes, vec![0b11]);
        assert!(bf.transitive && !bf.mixing);
        assert!(compare_engine(&g).unwrap().agrees());
    }

    #[test]
    fn transient_chain_into_sink() {
        // 0 -> 1 -> 2 -> 2
        let g = RandomDigraph::from_edges(vec![vec![1], vec![2], vec![2]]).unwrap();
        let bf = BruteForce::compute(&g);
        assert_eq!(bf.recurrent, 0b100);
        assert_eq!(bf.classes, vec![0b100]);
        assert!(bf.terminal[0] && !bf.initial[0]);
        assert!(bf.in_some_attractor_boundary(0b100));
        let out = compare_engine(&g).unwrap();
        assert!(out.agrees(), "{:?}", out.mismatches);
    }

    #[test]
    fn generated_digraphs_are_total_and_reproducible() {
        let a = RandomDigraph::generate(12, 0.2, 42).unwrap();
        let b = RandomDigraph::generate(12, 0.2, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.succ.iter().all(|r| !r.is_empty()));
        assert!(RandomDigraph::generate(17, 0.2, 0).is_err());
    }

    #[test]
    fn seed_42_agrees() {
        let g = RandomDigraph::generate(12, 0.2, 42).unwrap();
        let out = compare_engine(&g).unwrap();
        assert!(out.agrees(), "{:?}", out.mismatches);
        assert!(out.queries > 12);
    }

    #[test]
    fn small_sweep_agrees() {
        for seed in 0..120 {
            let (n, p) = sweep_case(seed, 12, None, &[0.1, 0.2, 0.4]);
            let g = RandomDigraph::generate(n, p, seed).unwrap();
            let out = compare_engine(&g).unwrap();
            assert!(out.agrees(), "seed {seed}: {:?}", out.mismatches);
        }
    }
}

#[cfg(test)]
mod grid_tests {
    use super::*;
    use crate::{build_cell_map, chain_components, PointMap};

    #[test]
    fn north_south_grid_agrees() {
        let f = PointMap::ns_circle(0.5).unwrap();
        let sp = Arc::new(f.default_space(90).unwrap());
        let map = Arc::new(build_cell_map(&f, sp.clone()).unwrap());
        let delta = sp.cell_diameter();
        let bf = GridBruteForce::compute(&map, delta).unwrap();
        assert_eq!(bf.classes.len(), 2);
        let g = build_chain_graph(map, delta).unwrap();
        assert!(bf.mismatches(&chain_components(&g)).is_empty());
    }

    #[test]
    fn refuses_large_grids() {
        let f = PointMap::cat_torus();
        let sp = Arc::new(f.default_space(40).unwrap());
        let map = build_cell_map(&f, sp).unwrap();
        assert!(GridBruteForce::compute(&map, 0.1).is_err());
    }
}
