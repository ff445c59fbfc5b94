use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::oracle::{compare_engine, sweep_case, GridBruteForce, RandomDigraph, GRID_BRUTE_FORCE_LIMIT};
use super::report::{Check, SeriesRow, Witness};
use super::scenario::{LambdaSpec, Scenario, Suite, SystemSpec};
use crate::attractors::{
    attractor_from_chain_stable, attractor_of, attractor_with_c_in_boundary, boundary_refinement_study, escape_witness,
    neighbors_of_nonclopen_bidirectional, terminal_with_empty_interior_near, trapping_certificate,
    verify_boundary_chain_stable, BoundaryConstruction, NearTerminalOutcome, NeighborOutcome,
};
use crate::chains::{
    build_chain_graph, chain_components, classify_components, clopen_in_cr, is_chain_mixing, is_chain_transitive_on,
    refine, ChainDecomposition,
};
use crate::shadowing::{
    estimate_expansivity, estimate_shadowing_modulus, glue_orbits_linear, limit_shadowing_pipeline,
    shadow_linear_hyperbolic, stable_unstable_membership, HyperbolicSplitting, PipelineOptions, PipelineReport,
    PipelineVerdict, ShadowingMethod, EXPANSIVITY_FLOOR,
};
use crate::systems::generate_pseudo_orbit;
use crate::{build_cell_map, CellMap, CellSet, ChainGraph, Error, GridSpace, MapKind, Noise, Point, PointMap, Result, SpaceKind};

/// Empirical shadowing moduli below this count as collapsed.
pub const MODULUS_FLOOR: f64 = 1e-4;
/// Regression baseline for the cat map's expansivity estimate.
pub const CAT_EXPANSIVITY_BASELINE: f64 = 0.1;
/// Boundary escape radii must stay within this many δ.
pub const ESCAPE_FACTOR: f64 = 5.0;
/// Chain length for the modulus that certifies shadowing near an attractor.
const NEAR_ATTRACTOR_CHAIN: usize = 200;

/// One grid resolution: space, cell map and one chain graph per δ.
pub struct Level {
    pub n: usize,
    pub space: Arc<GridSpace>,
    pub map: Arc<CellMap>,
    pub graphs: Vec<ChainGraph>,
}

pub enum Subject {
    Map { f: PointMap, levels: Vec<Level> },
    Digraph { digraph: RandomDigraph, graph: ChainGraph },
}

pub struct Ctx<'a> {
    pub sc: &'a Scenario,
    pub system: String,
    pub subject: Subject,
}

#[derive(Default)]
pub struct SuiteOutput {
    pub checks: Vec<Check>,
    pub series: Vec<SeriesRow>,
}

impl SuiteOutput {
    fn series(&mut self, name: &str, system: &str, resolution: Option<usize>, index: usize, value: f64) {
        self.series.push(SeriesRow { series: name.into(), system: system.into(), resolution, index, value });
    }
}

/// Separates resolution-insufficient outcomes from real errors.
fn lift<T>(r: Result<T>) -> Result<std::result::Result<T, String>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(Error::ResolutionInsufficient(m)) => Ok(Err(m)),
        Err(e) => Err(e),
    }
}

impl<'a> Ctx<'a> {
    /// Builds maps and graphs for every resolution and δ of the scenario.
    pub fn build(sc: &'a Scenario, with_levels: bool) -> Result<Self> {
        let system = sc.system.label();
        let subject = match &sc.system {
            SystemSpec::Builtin { name, params } => {
                let f = PointMap::builtin(name, params)?;
                let levels = if with_levels {
                    sc.grid
                        .resolutions
                        .iter()
                        .map(|&n| {
                            let space = Arc::new(f.default_space(n)?);
                            let map = Arc::new(build_cell_map(&f, space.clone())?);
                            let graphs = sc
                                .grid
                                .delta_cells
                                .iter()
                                .map(|dc| build_chain_graph(map.clone(), dc * space.cell_diameter()))
                                .collect::<Result<Vec<_>>>()?;
                            Ok(Level { n, space, map, graphs })
                        })
                        .collect::<Result<Vec<_>>>()?
                } else {
                    Vec::new()
                };
                Subject::Map { f, levels }
            }
            SystemSpec::RandomDigraph { nodes, density, seed } => {
                let digraph = RandomDigraph::generate(*nodes, *density, *seed)?;
                let graph = digraph.chain_graph()?;
                Subject::Digraph { digraph, graph }
            }
        };
        Ok(Ctx { sc, system, subject })
    }

    fn check(&self, suite: Suite, name: &str) -> Check {
        Check::new(suite, name, &self.system)
    }

    /// (resolution, δ, graph, decomposition) for every graph of the scenario.
    fn graphs(&self) -> Vec<(usize, f64, &ChainGraph, ChainDecomposition)> {
        match &self.subject {
            Subject::Map { levels, .. } => levels
                .iter()
                .flat_map(|l| l.graphs.iter().map(move |g| (l.n, g.delta(), g, chain_components(g))))
                .collect(),
            Subject::Digraph { digraph, graph } => {
                vec![(digraph.nodes, graph.delta(), graph, classify_components(graph, chain_components(graph), 0.0))]
            }
        }
    }

    fn map_parts(&self) -> (&PointMap, &[Level]) {
        match &self.subject {
            Subject::Map { f, levels } => (f, levels),
            Subject::Digraph { .. } => unreachable!("grid suites are rejected for digraph scenarios"),
        }
    }

    fn pipeline_options(&self) -> PipelineOptions {
        let sh = &self.sc.shadowing;
        PipelineOptions {
            trials: sh.trials,
            limit_trials: sh.limit_trials,
            glue_trials: sh.glue_trials,
            seed: self.sc.seed,
            ..PipelineOptions::default()
        }
    }

    fn shadowing_method(&self, f: &PointMap) -> ShadowingMethod {
        if f.kind() == MapKind::CatTorus {
            ShadowingMethod::ExactLinear { splitting: HyperbolicSplitting::cat() }
        } else {
            ShadowingMethod::Empirical
        }
    }
}

pub fn run_suite(cx: &Ctx, suite: Suite) -> Result<SuiteOutput> {
    match suite {
        Suite::Decomposition => decomposition(cx),
        Suite::InteriorClopen => interior_clopen(cx),
        Suite::BoundaryStability => boundary_stability(cx),
        Suite::BoundaryAttractors => boundary_attractors(cx),
        Suite::Shadowing => shadowing(cx),
        Suite::Refinement => refinement(cx),
        Suite::BoundaryTopology => boundary_topology(cx),
        Suite::Oracle => oracle(cx),
    }
}

fn describe(sp: &GridSpace, d: &ChainDecomposition) -> String {
    let parts: Vec<String> = d
        .components
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let first = c.cells.first().expect("components are nonempty");
            let at = if sp.is_grid() {
                let p = sp.center(first);
                if sp.dim() == 1 {
                    format!("{:.4}", p.x())
                } else {
                    format!("({:.4}, {:.4})", p.x(), p.y())
                }
            } else {
                format!("node {first}")
            };
            let flag = match (c.is_initial, c.is_terminal) {
                (true, true) => "initial+terminal",
                (true, false) => "initial",
                (false, true) => "terminal",
                (false, false) => "neither",
            };
            format!("#{k} {} cells from {at} {flag}", c.cells.len())
        })
        .collect();
    parts.join("; ")
}

fn decomposition(cx: &Ctx) -> Result<SuiteOutput> {
    let suite = Suite::Decomposition;
    let mut out = SuiteOutput::default();
    for (idx, (n, delta, g, d)) in cx.graphs().into_iter().enumerate() {
        let sp = g.space();
        let terminal = d.terminal().count();
        let initial = d.initial().count();
        let covered: usize = d.components.iter().map(|c| c.cells.len()).sum();
        let mut problems = Vec::new();
        if covered != d.recurrent.len() {
            problems.push("components do not partition the recurrent set".to_string());
        }
        if !d.is_empty() && (terminal == 0 || initial == 0) {
            problems.push("no terminal or no initial component".to_string());
        }
        if let Some(want) = cx.sc.expect_components {
            if d.len() != want {
                problems.push(format!("expected {want} components, found {}", d.len()));
            }
        }
        let detail = if problems.is_empty() { describe(sp, &d) } else { problems.join("; ") };
        let check = cx
            .check(suite, "chain_components")
            .at(n)
            .delta(delta)
            .metric("components", d.len() as f64)
            .metric("terminal", terminal as f64)
            .metric("initial", initial as f64)
            .metric("recurrent_cells", d.recurrent.len() as f64)
            .expect(problems.is_empty(), detail, || Witness::Cells { cells: d.recurrent.to_vec() });
        out.checks.push(check);
        out.series("component_count", &cx.system, Some(n), idx, d.len() as f64);

        let brute = cx.check(suite, "brute_force_agreement").at(n).delta(delta);
        let brute = match &cx.subject {
            Subject::Digraph { digraph, .. } => {
                let o = compare_engine(digraph)?;
                brute.metric("queries", o.queries as f64).expect(o.agrees(), o.mismatches.join("; "), || Witness::Digraph {
                    succ: digraph.succ.clone(),
                    seed: digraph.seed,
                    density: digraph.density,
                    query: o.mismatches.join("; "),
                })
            }
            Subject::Map { .. } if sp.len() <= GRID_BRUTE_FORCE_LIMIT => {
                let bf = GridBruteForce::compute(g.map(), g.delta())?;
                let m = bf.mismatches(&d);
                let detail = if m.is_empty() { format!("{} cells closed by brute force", sp.len()) } else { m.join("; ") };
                brute.expect(m.is_empty(), detail, || Witness::Cells { cells: d.recurrent.to_vec() })
            }
            Subject::Map { .. } => continue,
        };
        out.checks.push(brute);
    }
    Ok(out)
}

/// Cells of the candidate Λ, or the reason there is none.
fn resolve_lambda(spec: &LambdaSpec, sp: &GridSpace, d: &ChainDecomposition) -> Result<std::result::Result<CellSet, String>> {
    Ok(match spec {
        LambdaSpec::Whole => Ok(sp.full_set()),
        LambdaSpec::Region { region } => Ok(region.cells(sp)?),
        LambdaSpec::Component { at } => {
            let p = if at.len() == 1 { Point::new1(at[0]) } else { Point::new2(at[0], at[1]) };
            match sp.cell_of(p).and_then(|c| d.find(c)) {
                Some(comp) => Ok(comp.cells.clone()),
                None => Err(format!("no chain component contains the cell of {at:?}")),
            }
        }
    })
}

fn pipeline_check(check: Check, r: &PipelineReport) -> Check {
    let check = check
        .metric("expansivity", r.expansivity.e_estimate)
        .metric("epsilon", r.epsilon)
        .metric("delta", r.delta)
        .metric("tested", r.tested as f64)
        .metric("shadowed", r.shadowed as f64)
        .metric("skipped", r.skipped as f64);
    match &r.verdict {
        PipelineVerdict::Pass => {
            check.pass(format!("{} of {} limit-pseudo-orbits limit-shadowed ({:?})", r.shadowed, r.tested, r.method))
        }
        PipelineVerdict::HypothesesNotMet { reason } => check.not_met(reason.clone()),
        PipelineVerdict::Fail => check.fail(
            format!("{} of {} limit-pseudo-orbits not limit-shadowed", r.counterexamples.len(), r.tested),
            Witness::Values { values: r.counterexamples.iter().map(|c| c.trial as f64).collect() },
        ),
    }
}

fn interior_clopen(cx: &Ctx) -> Result<SuiteOutput> {
    let suite = Suite::InteriorClopen;
    let (f, levels) = cx.map_parts();
    let mut out = SuiteOutput::default();
    for lvl in levels {
        let g = &lvl.graphs[0];
        let sp = &lvl.space;
        let d = chain_components(g);
        let base = |name: &str| cx.check(suite, name).at(lvl.n).delta(g.delta());
        let lambda = match resolve_lambda(&cx.sc.lambda, sp, &d)? {
            Ok(l) if !l.is_empty() => l,
            Ok(_) => {
                out.checks.push(base("lambda_has_interior").not_met("candidate Λ is empty"));
                continue;
            }
            Err(reason) => {
                out.checks.push(base("lambda_has_interior").not_met(reason));
                continue;
            }
        };

        let mut unmet: Option<String> = None;
        let mut note = |c: &Check| {
            if c.verdict != super::report::Verdict::Pass && unmet.is_none() {
                unmet = Some(c.name.clone());
            }
        };
        // interior robust to the grid's own error: erode by twice the soundness bound
        let robust = sp.eroded(&lambda, 2.0 * g.soundness_bound());
        let c = base("lambda_has_interior")
            .metric("lambda_cells", lambda.len() as f64)
            .metric("robust_interior_cells", robust.len() as f64);
        let c = if robust.is_empty() {
            c.not_met(format!("Λ has no interior after eroding by {:.3e}", 2.0 * g.soundness_bound()))
        } else {
            c.pass(format!("{} robust interior cells", robust.len()))
        };
        note(&c);
        out.checks.push(c);

        let c = base("lambda_chain_transitive");
        let c = if is_chain_transitive_on(g, &lambda) {
            c.pass("graph restricted to Λ is strongly connected")
        } else {
            c.not_met("graph restricted to Λ is not strongly connected")
        };
        note(&c);
        out.checks.push(c);

        let sh = &cx.sc.shadowing;
        let method = cx.shadowing_method(f);
        let r = limit_shadowing_pipeline(f, sp, &lambda, sh.b, sh.c, &method, &cx.pipeline_options())?;
        let c = pipeline_check(base("shadowing_certified"), &r);
        note(&c);
        out.checks.push(c);

        let conclusions = ["lambda_clopen", "lambda_is_whole_space", "chain_mixing", "initial_and_terminal", "clopen_in_recurrent_set"];
        if let Some(first) = unmet {
            for name in conclusions {
                out.checks.push(base(name).not_met(format!("no conclusion drawn: `{first}` not established")));
            }
            continue;
        }
        out.checks.push(base("lambda_clopen").expect(sp.is_clopen(&lambda), "grid boundary of Λ", || Witness::Cells {
            cells: sp.boundary(&lambda).to_vec(),
        }));
        let whole = base("lambda_is_whole_space");
        out.checks.push(if sp.is_connected() {
            whole.expect(lambda.is_full(), "X connected", || Witness::Cells { cells: lambda.complement().to_vec() })
        } else {
            whole.not_met("X is not connected")
        });
        out.checks.push(base("chain_mixing").expect(is_chain_mixing(g), "strongly connected and aperiodic", || {
            Witness::Cells { cells: Vec::new() }
        }));
        let meeting: Vec<usize> =
            (0..d.len()).filter(|&k| d.components[k].cells.intersects(&lambda)).collect();
        let single = match meeting.as_slice() {
            [k] if lambda.intersection(&d.recurrent).is_subset(&d.components[*k].cells) => Some(*k),
            _ => None,
        };
        let both = single.is_some_and(|k| d.components[k].is_initial && d.components[k].is_terminal);
        out.checks.push(base("initial_and_terminal").expect(
            both,
            format!("Λ meets {} component(s)", meeting.len()),
            || Witness::Values { values: meeting.iter().map(|&k| k as f64).collect() },
        ));
        let clopen_cr = match single {
            Some(k) => clopen_in_cr(g, &d, k)?,
            None => false,
        };
        out.checks.push(base("clopen_in_recurrent_set").expect(clopen_cr, "component containing Λ is clopen in CR", || {
            Witness::Cells { cells: d.recurrent.to_vec() }
        }));
    }
    Ok(out)
}

/// Whether shadowing near the attractor of `u` was established, and how.
fn certify_near(cx: &Ctx, f: &PointMap, lvl: &Level, u: &CellSet) -> Result<(bool, String)> {
    if f.kind() == MapKind::CatTorus {
        return Ok((true, "exact linear shadowing of a hyperbolic automorphism".into()));
    }
    let t = trapping_certificate(lvl.map.as_ref(), u)?;
    if !t.certified() {
        return Ok((false, "U is not a trapping region".into()));
    }
    let att = attractor_of(lvl.map.as_ref(), u)?;
    let sh = &cx.sc.shadowing;
    let region = lvl.space.closed_neighborhood(&att.lambda, sh.c);
    let eps = sh.epsilons.first().copied().unwrap_or(0.01);
    let est = estimate_shadowing_modulus(f, &lvl.space, &region, eps, sh.trials, NEAR_ATTRACTOR_CHAIN, cx.sc.seed)?;
    let ok = est.delta_estimate >= MODULUS_FLOOR;
    Ok((ok, format!("empirical modulus {:.3e} at ε = {eps}", est.delta_estimate)))
}

fn boundary_stability(cx: &Ctx) -> Result<SuiteOutput> {
    let suite = Suite::BoundaryStability;
    let (f, levels) = cx.map_parts();
    let mut out = SuiteOutput::default();
    let finest = levels.last().expect("validated: at least one resolution");
    for (ui, spec) in cx.sc.attractors.iter().enumerate() {
        let (certified, how) = certify_near(cx, f, finest, &spec.cells(&finest.space)?)?;
        for lvl in levels {
            let u = spec.cells(&lvl.space)?;
            let trapping = trapping_certificate(lvl.map.as_ref(), &u)?.certified();
            let att = if trapping { Some(attractor_of(lvl.map.as_ref(), &u)?) } else { None };
            for g in &lvl.graphs {
                for &ec in &cx.sc.grid.epsilon_cells {
                    let eps = ec * lvl.space.cell_diameter();
                    let c = cx
                        .check(suite, "boundary_chain_stable")
                        .at(lvl.n)
                        .delta(g.delta())
                        .epsilon(eps)
                        .metric("u_index", ui as f64);
                    let Some(att) = &att else {
                        out.checks.push(c.not_met("U is not a trapping region: no attractor to test"));
                        continue;
                    };
                    if !certified {
                        out.checks.push(c.not_met(format!("shadowing near Λ not established ({how})")));
                        continue;
                    }
                    let bs = verify_boundary_chain_stable(g, att, eps, certified)?;
                    let c = c
                        .metric("lambda_cells", att.lambda.len() as f64)
                        .metric("boundary_cells", att.boundary.len() as f64)
                        .metric("escape_radius", bs.escape_radius())
                        .metric("escape_in_delta", bs.escape_radius() / g.delta());
                    if bs.vacuous {
                        out.checks.push(c.pass("∂Λ is empty"));
                        continue;
                    }
                    let within = bs.escape_radius() <= ESCAPE_FACTOR * g.delta() + 1e-12;
                    let ok = bs.stable() && within;
                    let detail = format!(
                        "escape radius {:.2} δ, stable at ε: {}; shadowing: {how}",
                        bs.escape_radius() / g.delta(),
                        bs.stable()
                    );
                    let witness = bs.report.as_ref().and_then(|r| r.witness.clone());
                    out.checks.push(c.expect(ok, detail, || match witness {
                        Some(path) => Witness::Path { cells: path },
                        None => Witness::Cells { cells: att.boundary.to_vec() },
                    }));
                }
            }
        }
    }
    Ok(out)
}

/// Trapping arcs on a circle whose attractor has every cell of `c` reached
/// from outside it. Returns (arcs tested, trapping arcs, first counterexample).
fn trapping_arc_scan(g: &ChainGraph, map: &CellMap, c: &CellSet, stride: usize) -> Result<(usize, usize, Option<(usize, usize)>)> {
    let sp = g.space();
    let n = sp.len();
    let (mut tested, mut trapping) = (0, 0);
    for start in (0..n).step_by(stride) {
        for width in (stride..n).step_by(stride) {
            let u = sp.set_of((0..width).map(|t| (start + t) % n));
            tested += 1;
            if !trapping_certificate(map, &u)?.certified() {
                continue;
            }
            trapping += 1;
            let lambda = attractor_of(map, &u)?.lambda;
            if c.is_subset(&lambda) && c.is_subset(&g.forward_reach(&lambda.complement())) {
                return Ok((tested, trapping, Some((start, width))));
            }
        }
    }
    Ok((tested, trapping, None))
}

fn boundary_attractors(cx: &Ctx) -> Result<SuiteOutput> {
    let suite = Suite::BoundaryAttractors;
    let mut out = SuiteOutput::default();
    let mut seen = std::collections::BTreeSet::new();
    for (n, delta, g, d) in cx.graphs() {
        // first δ of each resolution
        if !seen.insert(n) {
            continue;
        }
        let sp = g.space();
        let a = if sp.is_grid() { cx.sc.corollaries.a_cells * sp.cell_diameter() } else { 0.5 };
        for (k, comp) in d.components.iter().enumerate() {
            let base = |name: &str| cx.check(suite, name).at(n).delta(delta).metric("component", k as f64);
            let c = base("boundary_attractor");
            let c = match lift(attractor_with_c_in_boundary(g, &d, k))? {
                Err(m) => c.insufficient(m),
                Ok(BoundaryConstruction::Initial { .. }) => c.expect(
                    comp.is_initial,
                    "no chain enters C from outside its forward set",
                    || Witness::Cells { cells: comp.cells.to_vec() },
                ),
                Ok(BoundaryConstruction::Built(b)) => {
                    let built = &b.construction;
                    let lambda = &built.attractor.lambda;
                    let enclosure = sp.closed_neighborhood(&b.forward_set, b.a);
                    let contained = b.forward_set.is_subset(lambda) && lambda.is_subset(&enclosure);
                    let mut first_path = None;
                    let mut escapes = true;
                    for x in comp.cells.iter() {
                        match escape_witness(g, lambda, x)? {
                            Some(w) => {
                                first_path.get_or_insert(w.path);
                            }
                            None => escapes = false,
                        }
                    }
                    let ok = !comp.is_initial && b.chain_boundary && contained && escapes;
                    let detail = format!(
                        "Λ has {} cells; C in chain boundary: {}, grid boundary: {}; S ⊆ Λ ⊆ B_a(S): {contained}",
                        lambda.len(),
                        b.chain_boundary,
                        b.grid_boundary
                    );
                    c.metric("a", b.a).metric("lambda_cells", lambda.len() as f64).metric("delta_used", built.delta).expect(
                        ok,
                        detail,
                        || match first_path {
                            Some(p) => Witness::Path { cells: p },
                            None => Witness::Cells { cells: comp.cells.to_vec() },
                        },
                    )
                }
            };
            out.checks.push(c);

            if comp.is_terminal {
                out.checks.push(chain_stable_check(base("chain_stable_attractor"), g, &comp.cells, a)?);
            }
            if comp.is_terminal {
                let c = base("thin_terminal_near").metric("a", a);
                let c = match lift(terminal_with_empty_interior_near(g, &d, k, a))? {
                    Err(m) => c.insufficient(m),
                    Ok(NearTerminalOutcome::HypothesesNotMet { reason }) => c.not_met(reason),
                    Ok(NearTerminalOutcome::Found(nt)) => {
                        let ok = sp.interior(&nt.chosen).is_empty()
                            && nt.chosen.is_subset(&sp.closed_neighborhood(&comp.cells, a));
                        c.metric("d_cells", nt.chosen.len() as f64).expect(
                            ok,
                            format!("terminal piece of {} cells on ∂Λ", nt.chosen.len()),
                            || Witness::Cells { cells: nt.chosen.to_vec() },
                        )
                    }
                };
                out.checks.push(c);
            }
            if comp.is_initial && comp.is_terminal {
                let c = base("bidirectional_neighbors").metric("a", a);
                let c = match lift(neighbors_of_nonclopen_bidirectional(g, &d, k, a))? {
                    Err(m) => c.insufficient(m),
                    Ok(NeighborOutcome::HypothesesNotMet { reason }) => c.not_met(reason),
                    Ok(NeighborOutcome::Found(p)) => {
                        let near = sp.closed_neighborhood(&comp.cells, a);
                        let (t, i) = (&d.components[p.terminal], &d.components[p.initial]);
                        let ok = p.terminal != k
                            && p.initial != k
                            && t.is_terminal
                            && i.is_initial
                            && t.cells.is_subset(&near)
                            && i.cells.is_subset(&near);
                        c.expect(ok, format!("terminal #{} and initial #{} near C", p.terminal, p.initial), || {
                            Witness::Values { values: vec![p.terminal as f64, p.initial as f64] }
                        })
                    }
                };
                out.checks.push(c);
            }
            if comp.is_initial && sp.kind() == SpaceKind::Circle {
                let stride = match cx.sc.corollaries.arc_stride {
                    0 => (sp.len() / 48).max(1),
                    s => s,
                };
                let (tested, trapping, hit) = trapping_arc_scan(g, g.map(), &comp.cells, stride)?;
                let c = base("no_trapping_arc_boundary")
                    .metric("arcs_tested", tested as f64)
                    .metric("trapping_arcs", trapping as f64);
                out.checks.push(c.expect(
                    hit.is_none(),
                    format!("{trapping} of {tested} arcs trap; none has C in its attractor's chain boundary"),
                    || {
                        let (s, w) = hit.expect("counterexample");
                        Witness::Cells { cells: (0..w).map(|t| (s + t) % sp.len()).collect() }
                    },
                ));
            }
        }
        // attractors of the configured regions are chain stable enclosures
        for (i, spec) in cx.sc.attractors.iter().enumerate() {
            let c = cx.check(suite, "chain_stable_attractor").at(n).delta(delta).metric("u_index", i as f64);
            let u = spec.cells(sp)?;
            let t = trapping_certificate(g.map().as_ref(), &u)?;
            if !t.certified() {
                out.checks.push(c.not_met("U does not trap under the cell map"));
                continue;
            }
            let s = attractor_of(g.map().as_ref(), &u)?.lambda;
            if s.is_empty() {
                out.checks.push(c.not_met("attractor of U is empty"));
                continue;
            }
            out.checks.push(chain_stable_check(c, g, &s, a)?);
        }
    }
    Ok(out)
}

/// Attractor around a chain-stable `s`, checked as `S ⊆ Λ ⊆ B_a(S)` on cells.
fn chain_stable_check(c: Check, g: &ChainGraph, s: &CellSet, a: f64) -> Result<Check> {
    let sp = g.space();
    let c = c.metric("a", a).metric("s_cells", s.len() as f64);
    Ok(match lift(attractor_from_chain_stable(g, s, a))? {
        Err(m) => c.insufficient(m),
        Ok(built) => {
            let lambda = &built.attractor.lambda;
            let outside = lambda.difference(&sp.closed_neighborhood(s, a));
            let missing = s.difference(lambda);
            let ok = missing.is_empty() && outside.is_empty();
            c.metric("lambda_cells", lambda.len() as f64).metric("delta_used", built.delta).expect(
                ok,
                format!("Λ has {} cells at δ = {:.3e}; S ⊆ Λ ⊆ B_a(S): {ok}", lambda.len(), built.delta),
                || Witness::Cells { cells: missing.union(&outside).to_vec() },
            )
        }
    })
}

fn shadowing(cx: &Ctx) -> Result<SuiteOutput> {
    let suite = Suite::Shadowing;
    let (f, levels) = cx.map_parts();
    let lvl = levels.last().expect("validated: at least one resolution");
    let sp = &lvl.space;
    let sh = &cx.sc.shadowing;
    let mut out = SuiteOutput::default();
    let method = cx.shadowing_method(f);

    if let ShadowingMethod::ExactLinear { splitting: h } = &method {
        let k = h.shadowing_constant;
        let delta = sh.delta;
        let seed = cx.sc.seed;
        let runs: Vec<std::result::Result<(bool, f64), String>> = (0..sh.chains)
            .into_par_iter()
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9 + i as u64));
                let x0 = Point::new2(rng.gen(), rng.gen());
                let noise = if i % 2 == 0 { Noise::Uniform } else { Noise::Adversarial };
                let po = generate_pseudo_orbit(f, x0, sh.length, delta, noise, rng.gen()).map_err(|e| e.to_string())?;
                let s = shadow_linear_hyperbolic(h, &po).map_err(|e| e.to_string())?;
                Ok((s.certificate.verified, s.certificate.rigorous_bound / delta))
            })
            .collect();
        let mut worst: f64 = 0.0;
        let mut bad = Vec::new();
        let bins = sh.histogram_bins.max(1);
        let mut hist = vec![0usize; bins + 1];
        for (i, r) in runs.iter().enumerate() {
            match r {
                Ok((verified, ratio)) => {
                    worst = worst.max(*ratio);
                    if !verified || *ratio > k {
                        bad.push(i as f64);
                    }
                    hist[((ratio / k * bins as f64) as usize).min(bins)] += 1;
                }
                Err(_) => bad.push(i as f64),
            }
        }
        for (b, count) in hist.iter().enumerate() {
            out.series("shadow_error_over_delta_histogram", &cx.system, None, b, *count as f64);
        }
        out.checks.push(
            cx.check(suite, "linear_shadowing_bound")
                .delta(delta)
                .metric("chains", sh.chains as f64)
                .metric("length", sh.length as f64)
                .metric("worst_bound_over_delta", worst)
                .metric("k", k)
                .metric("failures", bad.len() as f64)
                .expect(
                    bad.is_empty(),
                    format!("worst certified error {worst:.4} δ against K = {k:.4}"),
                    || Witness::Values { values: bad.clone() },
                ),
        );

        let r = limit_shadowing_pipeline(f, sp, &sp.full_set(), sh.b, sh.c, &method, &cx.pipeline_options())?;
        out.checks.push(pipeline_check(cx.check(suite, "limit_shadowing_pipeline").at(lvl.n), &r));

        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6c62_272e);
        let mut failures = Vec::new();
        for t in 0..sh.glue_trials {
            let x = Point::new2(rng.gen(), rng.gen());
            let th: f64 = rng.gen_range(0.0..TAU);
            let y = f.normalize(Point::new2(x.x() + 1e-6 * th.cos(), x.y() + 1e-6 * th.sin()));
            let glue = glue_orbits_linear(h, x, y, 30)?;
            let tor = &glue.toral;
            let to_x = stable_unstable_membership(tor, &tor.point(x), &glue.z, 30, 1e-12)?;
            let to_y = stable_unstable_membership(tor, &tor.point(y), &glue.z, 30, 1e-12)?;
            if !(to_x.in_wu && to_y.in_ws) {
                failures.push(t as f64);
            }
        }
        out.checks.push(cx.check(suite, "heteroclinic_glue").metric("pairs", sh.glue_trials as f64).expect(
            failures.is_empty(),
            "glued point lies on the unstable leaf of x and the stable leaf of y",
            || Witness::Values { values: failures.clone() },
        ));
    } else {
        let chain = sh.chain_length.unwrap_or(10 * lvl.n);
        for &eps in &sh.epsilons {
            let est = estimate_shadowing_modulus(f, sp, &sp.full_set(), eps, sh.trials, chain, cx.sc.seed)?;
            for (j, rung) in est.rungs.iter().enumerate() {
                out.series(&format!("modulus_shadowed_fraction_eps_{eps}"), &cx.system, Some(lvl.n), j, rung.shadowed as f64 / rung.trials.max(1) as f64);
            }
            let c = cx
                .check(suite, "shadowing_modulus")
                .at(lvl.n)
                .epsilon(eps)
                .metric("delta_estimate", est.delta_estimate)
                .metric("chain_length", chain as f64);
            out.checks.push(if est.delta_estimate >= MODULUS_FLOOR {
                c.pass(format!("empirical δ(ε) = {:.3e}", est.delta_estimate))
            } else {
                c.not_met(format!("modulus collapses to {:.3e}: no shadowing at this scale", est.delta_estimate))
            });
        }
        let d = chain_components(&lvl.graphs[0]);
        let c = cx.check(suite, "limit_shadowing_pipeline").at(lvl.n);
        out.checks.push(match resolve_lambda(&cx.sc.lambda, sp, &d)? {
            Ok(lambda) => {
                let r = limit_shadowing_pipeline(f, sp, &lambda, sh.b, sh.c, &method, &cx.pipeline_options())?;
                pipeline_check(c, &r)
            }
            Err(reason) => c.not_met(reason),
        });
    }

    let e = estimate_expansivity(f, sp, &sp.full_set(), 20, 12)?;
    let c = cx
        .check(suite, "expansivity")
        .at(lvl.n)
        .metric("e_estimate", e.e_estimate)
        .metric("min_separation", e.min_separation)
        .metric("valid_pairs", e.valid_pairs as f64);
    out.checks.push(if f.kind() == MapKind::CatTorus {
        c.expect(
            e.e_estimate >= CAT_EXPANSIVITY_BASELINE,
            format!("e = {} against baseline {CAT_EXPANSIVITY_BASELINE}", e.e_estimate),
            || Witness::Points { points: e.witness.iter().flat_map(|(p, q)| [p.0.to_vec(), q.0.to_vec()]).collect() },
        )
    } else if e.e_estimate > EXPANSIVITY_FLOOR {
        c.pass(format!("e = {}", e.e_estimate))
    } else {
        c.not_met(format!("not expansive at this scale (e = {:.1e})", e.e_estimate))
    });
    Ok(out)
}

fn refinement(cx: &Ctx) -> Result<SuiteOutput> {
    let suite = Suite::Refinement;
    let (_, levels) = cx.map_parts();
    let mut out = SuiteOutput::default();
    let resolutions: Vec<usize> = levels.iter().map(|l| l.n).collect();
    let deltas: Vec<f64> = levels.iter().map(|l| l.graphs[0].delta()).collect();
    let factory = |n: usize| {
        levels.iter().find(|l| l.n == n).map(|l| l.map.clone()).ok_or_else(|| Error::config(format!("no level {n}")))
    };
    let rep = refine(factory, &resolutions, &deltas)?;
    for (i, l) in rep.levels.iter().enumerate() {
        out.series("component_count_by_resolution", &cx.system, Some(l.resolution), i, l.component_count as f64);
    }
    let counts: Vec<String> = rep.levels.iter().map(|l| format!("{}@{}", l.component_count, l.resolution)).collect();
    let c = cx.check(suite, "component_counts_stable");
    out.checks.push(if rep.counts_stable {
        c.pass(counts.join(", "))
    } else {
        c.insufficient(format!("counts still changing: {}", counts.join(", ")))
    });
    let c = cx.check(suite, "flags_stable");
    out.checks.push(if rep.flags_stable {
        c.pass("matched components keep their flags")
    } else {
        c.insufficient("matched components change flags between levels")
    });
    let nested_fail: Vec<f64> = rep.nested.iter().enumerate().filter(|(_, &ok)| !ok).map(|(k, _)| k as f64).collect();
    out.checks.push(cx.check(suite, "recurrent_sets_nested").expect(
        nested_fail.is_empty(),
        "finer recurrent sets lie within one coarse cell of coarser ones",
        || Witness::Values { values: nested_fail.clone() },
    ));
    Ok(out)
}

fn boundary_topology(cx: &Ctx) -> Result<SuiteOutput> {
    let suite = Suite::BoundaryTopology;
    let (f, levels) = cx.map_parts();
    let mut out = SuiteOutput::default();
    let grids: Vec<usize> = levels.iter().map(|l| l.n).collect();
    let iterations = cx.sc.refinement.iterations;
    for (ui, spec) in cx.sc.attractors.iter().enumerate() {
        let base = |name: &str| cx.check(suite, name).metric("u_index", ui as f64);
        let trapping = levels
            .iter()
            .map(|l| Ok(trapping_certificate(l.map.as_ref(), &spec.cells(&l.space)?)?.certified()))
            .collect::<Result<Vec<bool>>>()?;
        if trapping.iter().any(|t| !t) {
            out.checks.push(base("boundary_components_stable").not_met("U is not a trapping region at every grid"));
            continue;
        }
        let study = match lift(boundary_refinement_study(f, spec, &grids, iterations))? {
            Ok(s) => s,
            Err(m) => {
                out.checks.push(base("boundary_components_stable").insufficient(m));
                continue;
            }
        };
        for l in &study.levels {
            out.series(&format!("boundary_components_u{ui}"), &cx.system, Some(l.resolution), 0, l.component_count as f64);
            for (i, h) in l.hausdorff.iter().enumerate() {
                out.series(&format!("hausdorff_cells_u{ui}"), &cx.system, Some(l.resolution), i, *h);
            }
        }
        let counts: Vec<String> = study.levels.iter().map(|l| format!("{}@{}", l.component_count, l.resolution)).collect();
        let mut c = base("boundary_components_stable");
        for l in &study.levels {
            c = c.metric(&format!("components_n{}", l.resolution), l.component_count as f64);
        }
        out.checks.push(if study.counts_stable {
            c.pass(counts.join(", "))
        } else {
            c.insufficient(format!("counts still changing: {}", counts.join(", ")))
        });

        let finest = study.levels.last().expect("nonempty grids");
        let c = base("hausdorff_approach").at(finest.resolution).metric("iterations", iterations as f64);
        out.checks.push(if finest.hausdorff.is_empty() {
            c.pass("ring or boundary empty: nothing to approach")
        } else {
            let ok = finest.first_within.is_some_and(|k| k <= iterations) && finest.settled();
            let c = match finest.first_within {
                Some(k) => c.metric("first_within", k as f64),
                None => c,
            };
            c.metric("band_cells", finest.band.unwrap_or(f64::NAN)).expect(
                ok,
                format!("first within 2 cells at iteration {:?}, band {:?} cells", finest.first_within, finest.band),
                || Witness::Values { values: finest.hausdorff.clone() },
            )
        });
        let ring = study.levels.iter().all(|l| l.ring_hypothesis);
        let c = base("ring_hypothesis");
        out.checks.push(if ring {
            c.pass("F(∂U) lies in the ring closure(U) \\ Λ at every grid")
        } else {
            c.not_met("F(∂U) leaves the ring at some grid")
        });
    }
    Ok(out)
}

fn oracle(cx: &Ctx) -> Result<SuiteOutput> {
    let suite = Suite::Oracle;
    let o = &cx.sc.oracle;
    let mut out = SuiteOutput::default();
    let runs: Vec<(u64, f64, RandomDigraph, super::oracle::OracleOutcome)> = (o.first_seed..o.first_seed + o.seeds)
        .into_par_iter()
        .map(|seed| {
            let (n, p) = sweep_case(seed, o.max_nodes, o.nodes, &o.densities);
            let g = RandomDigraph::generate(n, p, seed)?;
            let r = compare_engine(&g)?;
            Ok((seed, p, g, r))
        })
        .collect::<Result<Vec<_>>>()?;
    for &p in &o.densities {
        let of_p: Vec<_> = runs.iter().filter(|r| r.1 == p).collect();
        let queries: usize = of_p.iter().map(|r| r.3.queries).sum();
        let bad: Vec<_> = of_p.iter().filter(|r| !r.3.agrees()).collect();
        let c = cx
            .check(suite, "digraph_agreement")
            .metric("density", p)
            .metric("digraphs", of_p.len() as f64)
            .metric("queries", queries as f64)
            .metric("mismatched_digraphs", bad.len() as f64);
        out.checks.push(c.expect(
            bad.is_empty(),
            format!("{} digraphs, {queries} queries at density {p}", of_p.len()),
            || {
                let (seed, p, g, r) = bad[0];
                Witness::Digraph { succ: g.succ.clone(), seed: *seed, density: *p, query: r.mismatches.join("; ") }
            },
        ));
    }
    for (name, succ) in [("self_loop", vec![vec![0]]), ("two_cycle", vec![vec![1], vec![0]])] {
        let g = RandomDigraph::from_edges(succ)?;
        let r = compare_engine(&g)?;
        out.checks.push(cx.check(suite, &format!("trivial_{name}")).expect(r.agrees(), r.mismatches.join("; "), || {
            Witness::Digraph { succ: g.succ.clone(), seed: 0, density: 0.0, query: r.mismatches.join("; ") }
        }));
    }
    Ok(out)
}
