//! Acceptance criteria, one test each. Every test prints a single
//! `PASS`/`FAIL` line before asserting so a plain `cargo test -- --nocapture`
//! run doubles as a checklist. Timings are wall clock on one core; the tests
//! take a shared lock so they never compete with each other.

use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{Duration, Instant};

use chaintopo::harness::oracle::GridBruteForce;
use chaintopo::harness::suites::{CAT_EXPANSIVITY_BASELINE, ESCAPE_FACTOR, MODULUS_FLOOR};
use chaintopo::harness::{run_scenario, Check, Report, Scenario, Verdict};
use chaintopo::shadowing::{
    estimate_expansivity, estimate_shadowing_modulus, shadow_linear_hyperbolic, HyperbolicSplitting,
    EXPANSIVITY_FLOOR,
};
use chaintopo::{
    build_cell_map, build_chain_graph, chain_components, generate_pseudo_orbit, Noise, Point, PointMap, PseudoOrbit,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the checklist line, then fails the test with the details if needed.
fn verdict(id: u32, title: &str, elapsed: Duration, problems: &[String]) {
    let status = if problems.is_empty() { "PASS" } else { "FAIL" };
    println!("{status} criterion {id}: {title} ({:.2} s)", elapsed.as_secs_f64());
    assert!(problems.is_empty(), "criterion {id} failed:\n  {}", problems.join("\n  "));
}

fn scenario(text: &str) -> Scenario {
    let sc = Scenario::from_toml_str(text).expect("scenario parses");
    sc.validate().expect("scenario validates");
    sc
}

fn checks<'a>(r: &'a Report, name: &'a str) -> Vec<&'a Check> {
    let v: Vec<_> = r.checks_named(name).collect();
    assert!(!v.is_empty(), "no `{name}` checks in the report");
    v
}

fn metric(c: &Check, key: &str) -> f64 {
    *c.metrics.get(key).unwrap_or_else(|| panic!("`{}` has no metric `{key}`", c.name))
}

fn not_passing(r: &Report, name: &str, problems: &mut Vec<String>) {
    for c in checks(r, name) {
        if c.verdict != Verdict::Pass {
            problems.push(format!("{}/{} n={:?}: {} ({})", c.suite, c.name, c.resolution, c.verdict.as_str(), c.detail));
        }
    }
}

#[test]
fn chain_decomposition_of_circle_maps() {
    let _g = serial();
    const BUDGET: Duration = Duration::from_secs(5);
    let mut problems = Vec::new();
    let start = Instant::now();

    // (map, expected components as (angle, terminal, initial))
    let half = std::f64::consts::FRAC_PI_2;
    let cases = [
        (PointMap::ns_circle(0.5).unwrap(), vec![(0.0, true, false), (2.0 * half, false, true)]),
        (
            PointMap::ms4_circle(0.3).unwrap(),
            vec![(0.0, true, false), (half, false, true), (2.0 * half, true, false), (3.0 * half, false, true)],
        ),
    ];
    for (f, expected) in &cases {
        let t = Instant::now();
        let sp = Arc::new(f.default_space(720).unwrap());
        let map = Arc::new(build_cell_map(f, sp.clone()).unwrap());
        let g = build_chain_graph(map, sp.cell_diameter()).unwrap();
        let d = chain_components(&g);
        if d.components.len() != expected.len() {
            problems.push(format!("{}: {} components, want {}", f.name(), d.components.len(), expected.len()));
        }
        for &(angle, terminal, initial) in expected {
            let cell = sp.cell_of(Point::new1(angle)).unwrap();
            match d.find(cell) {
                None => problems.push(format!("{}: no component at {angle:.4}", f.name())),
                Some(c) if (c.is_terminal, c.is_initial) != (terminal, initial) => problems.push(format!(
                    "{}: component at {angle:.4} has terminal={} initial={}",
                    f.name(),
                    c.is_terminal,
                    c.is_initial
                )),
                Some(_) => {}
            }
        }
        if t.elapsed() > BUDGET {
            problems.push(format!("{} took {:.2?}", f.name(), t.elapsed()));
        }
    }

    // brute-force reachability at a small grid
    for (f, _) in &cases {
        let sp = Arc::new(f.default_space(90).unwrap());
        let map = Arc::new(build_cell_map(f, sp.clone()).unwrap());
        let g = build_chain_graph(map.clone(), sp.cell_diameter()).unwrap();
        let bf = GridBruteForce::compute(&map, sp.cell_diameter()).unwrap();
        for m in bf.mismatches(&chain_components(&g)) {
            problems.push(format!("{} at n=90: {m}", f.name()));
        }
    }
    verdict(1, "ns has 2 and ms4 has 4 classified components; brute force agrees", start.elapsed(), &problems);
}

#[test]
fn whole_torus_is_clopen_and_mixing_under_cat_map() {
    let _g = serial();
    const BUDGET: Duration = Duration::from_secs(60);
    let sc = scenario(
        r#"
name = "cat-interior"
seed = 7
suites = ["interior_clopen"]
[system]
kind = "builtin"
name = "cat_torus"
[grid]
resolutions = [101]
"#,
    );
    let start = Instant::now();
    let r = run_scenario(&sc).unwrap();
    let elapsed = start.elapsed();
    let mut problems = Vec::new();
    for name in [
        "lambda_has_interior",
        "lambda_chain_transitive",
        "shadowing_certified",
        "lambda_clopen",
        "lambda_is_whole_space",
        "chain_mixing",
        "initial_and_terminal",
        "clopen_in_recurrent_set",
    ] {
        not_passing(&r, name, &mut problems);
    }
    if elapsed > BUDGET {
        problems.push(format!("took {elapsed:.2?}"));
    }
    verdict(2, "cat n=101: Λ = X is clopen, chain mixing, initial and terminal", elapsed, &problems);
}

/// Least achievable sup error over true orbits near the chain's start, by
/// vertex enumeration of the linear program min t s.t. |A^i y − D_i|_∞ ≤ t.
fn minimax_oracle(po: &PseudoOrbit) -> f64 {
    let wrap = |v: f64| v - v.round();
    let mut pow = [[1.0, 0.0], [0.0, 1.0]];
    let mut drift = [0.0f64, 0.0];
    let mut rows: Vec<([f64; 2], f64)> = Vec::new();
    for i in 0..po.points.len() {
        if i > 0 {
            let x = po.points[i - 1];
            let e = [wrap(po.points[i].x() - 2.0 * x.x() - x.y()), wrap(po.points[i].y() - x.x() - x.y())];
            drift = [2.0 * drift[0] + drift[1] + e[0], drift[0] + drift[1] + e[1]];
            pow = [[2.0 * pow[0][0] + pow[1][0], 2.0 * pow[0][1] + pow[1][1]], [pow[0][0] + pow[1][0], pow[0][1] + pow[1][1]]];
        }
        for r in 0..2 {
            rows.push((pow[r], drift[r]));
            rows.push(([-pow[r][0], -pow[r][1]], -drift[r]));
        }
    }
    let value = |y: [f64; 2]| rows.iter().map(|(w, d)| w[0] * y[0] + w[1] * y[1] - d).fold(f64::MIN, f64::max);
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let mut best = value([0.0, 0.0]);
    let n = rows.len();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                let sel = [rows[a], rows[b], rows[c]];
                let mat = sel.map(|(w, _)| [w[0], w[1], -1.0]);
                let det = det3(mat);
                if det.abs() < 1e-12 {
                    continue;
                }
                let solve = |k: usize| {
                    let mut mk = mat;
                    for r in 0..3 {
                        mk[r][k] = sel[r].1;
                    }
                    det3(mk) / det
                };
                best = best.min(value([solve(0), solve(1)]));
            }
        }
    }
    best
}

#[test]
fn cat_chains_are_shadowed_within_the_linear_constant() {
    let _g = serial();
    const BUDGET: Duration = Duration::from_secs(30);
    const CHAINS: u64 = 1000;
    const LENGTH: usize = 10_000;
    const DELTA: f64 = 1e-8;
    const ORACLE_CHAINS: u64 = 100;
    const ORACLE_TOLERANCE: f64 = 0.10;

    let f = PointMap::cat_torus();
    let h = HyperbolicSplitting::cat();
    let (ls, lu) = ((3.0 - 5f64.sqrt()) / 2.0, (3.0 + 5f64.sqrt()) / 2.0);
    let k = 1.0 / (1.0 - ls) + 1.0 / (lu - 1.0);
    let mut problems = Vec::new();
    if (h.shadowing_constant - k).abs() > 1e-12 {
        problems.push(format!("K = {} but the eigenvalues give {k}", h.shadowing_constant));
    }

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for seed in 0..CHAINS {
        let x0 = Point::new2(rng.gen(), rng.gen());
        let noise = if seed % 2 == 0 { Noise::Uniform } else { Noise::Adversarial };
        let po = generate_pseudo_orbit(&f, x0, LENGTH, DELTA, noise, seed).unwrap();
        match shadow_linear_hyperbolic(&h, &po) {
            Ok(s) if s.certificate.verified && s.certificate.sup_error <= k * DELTA => {
                worst = worst.max(s.certificate.sup_error / DELTA);
            }
            Ok(s) => problems.push(format!("chain {seed}: sup error {:e} exceeds K·δ", s.certificate.sup_error)),
            Err(e) => problems.push(format!("chain {seed}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    if elapsed > BUDGET {
        problems.push(format!("{CHAINS} chains took {elapsed:.2?}"));
    }

    for seed in 0..ORACLE_CHAINS {
        let len = 2 + (seed as usize % 11);
        let noise = if seed % 2 == 0 { Noise::Uniform } else { Noise::Adversarial };
        let x0 = Point::new2((0.013 * seed as f64 + 0.05) % 1.0, (0.29 + 0.007 * seed as f64) % 1.0);
        let po = generate_pseudo_orbit(&f, x0, len, 1e-3, noise, seed).unwrap();
        let got = shadow_linear_hyperbolic(&h, &po).unwrap().certificate.sup_error;
        let want = minimax_oracle(&po);
        if (got - want).abs() > ORACLE_TOLERANCE * want.max(1e-12) {
            problems.push(format!("oracle chain {seed} (length {len}): solver {got:e}, minimax {want:e}"));
        }
    }
    verdict(
        3,
        &format!("{CHAINS} cat chains of length {LENGTH} shadowed within K·δ (worst {worst:.3}·δ); minimax oracle agrees"),
        elapsed,
        &problems,
    );
}

#[test]
fn attractor_boundary_is_chain_stable_on_refined_grids() {
    let _g = serial();
    const BUDGET: Duration = Duration::from_secs(20);
    let ms4 = scenario(
        r#"
name = "ms4-boundary-stability"
seed = 11
suites = ["boundary_stability"]
[system]
kind = "builtin"
name = "ms4_circle"
params = [0.3]
[grid]
resolutions = [180, 360, 720]
[[attractors]]
kind = "arc"
from = -0.3
to = 3.4415926535897931
"#,
    );
    let control = scenario(
        r#"
name = "identity-boundary-stability"
seed = 11
suites = ["boundary_stability"]
[system]
kind = "builtin"
name = "identity"
[grid]
resolutions = [360]
[[attractors]]
kind = "arc"
from = -0.3
to = 3.4415926535897931
"#,
    );
    let start = Instant::now();
    let r = run_scenario(&ms4).unwrap();
    let rc = run_scenario(&control).unwrap();
    let elapsed = start.elapsed();
    let mut problems = Vec::new();
    let stable = checks(&r, "boundary_chain_stable");
    for n in [180, 360, 720] {
        if !stable.iter().any(|c| c.resolution == Some(n)) {
            problems.push(format!("no check at n={n}"));
        }
    }
    for c in stable {
        if c.verdict != Verdict::Pass || metric(c, "escape_in_delta") > ESCAPE_FACTOR {
            problems.push(format!("n={:?}: {} ({})", c.resolution, c.verdict.as_str(), c.detail));
        }
    }
    for c in checks(&rc, "boundary_chain_stable") {
        if c.verdict != Verdict::HypothesesNotMet {
            problems.push(format!("identity control: {} ({})", c.verdict.as_str(), c.detail));
        }
    }
    if elapsed > BUDGET {
        problems.push(format!("took {elapsed:.2?}"));
    }
    verdict(4, "ms4 attractor boundary escapes within 5δ at n = 180, 360, 720; identity not applicable", elapsed, &problems);
}

#[test]
fn chain_stable_sets_sit_inside_their_attractors() {
    let _g = serial();
    const A_CELLS: f64 = 10.0;
    let ns = scenario(
        r#"
name = "ns-chain-stable"
seed = 1
suites = ["boundary_attractors"]
[system]
kind = "builtin"
name = "ns_circle"
params = [0.5]
[grid]
resolutions = [720]
[corollaries]
a_cells = 10.0
"#,
    );
    let ms4 = scenario(
        r#"
name = "ms4-chain-stable"
seed = 1
suites = ["boundary_attractors"]
[system]
kind = "builtin"
name = "ms4_circle"
params = [0.3]
[grid]
resolutions = [720]
[[attractors]]
kind = "arc"
from = -0.3
to = 3.4415926535897931
[corollaries]
a_cells = 10.0
"#,
    );
    let start = Instant::now();
    let mut problems = Vec::new();
    let cell = std::f64::consts::TAU / 720.0;
    for sc in [&ns, &ms4] {
        let r = run_scenario(sc).unwrap();
        let cs = checks(&r, "chain_stable_attractor");
        for c in &cs {
            if c.verdict != Verdict::Pass {
                problems.push(format!("{}: {} ({})", sc.name, c.verdict.as_str(), c.detail));
            }
            if (metric(c, "a") - A_CELLS * cell).abs() > 1e-12 {
                problems.push(format!("{}: a = {}", sc.name, metric(c, "a")));
            }
        }
        // the ms4 run must include the enclosure of [0, π]
        if sc.name.starts_with("ms4") && !cs.iter().any(|c| c.metrics.contains_key("u_index")) {
            problems.push("ms4: no check for the arc enclosure".into());
        }
        let ri = r.summary.resolution_insufficient;
        if ri > 0 {
            problems.push(format!("{}: {ri} resolution-insufficient verdicts", sc.name));
        }
    }
    verdict(5, "S ⊆ Λ ⊆ B_a(S) for ns 0-component and ms4 [0, π] enclosure at n = 720", start.elapsed(), &problems);
}

#[test]
fn attractor_boundary_equivalence_matches_brute_force() {
    let _g = serial();
    const BUDGET: Duration = Duration::from_secs(10);
    let sc = scenario(
        r#"
name = "digraph-sweep"
seed = 0
suites = ["oracle"]
[system]
kind = "random_digraph"
nodes = 12
density = 0.2
seed = 42
[oracle]
max_nodes = 12
densities = [0.1, 0.2, 0.4]
seeds = 1000
"#,
    );
    let start = Instant::now();
    let r = run_scenario(&sc).unwrap();
    let elapsed = start.elapsed();
    let mut problems = Vec::new();
    let sweep = checks(&r, "digraph_agreement");
    let digraphs: f64 = sweep.iter().map(|c| metric(c, "digraphs")).sum();
    if digraphs != 1000.0 {
        problems.push(format!("{digraphs} digraphs checked"));
    }
    for c in sweep {
        if c.verdict != Verdict::Pass || metric(c, "mismatched_digraphs") != 0.0 {
            problems.push(format!("{} ({})", c.verdict.as_str(), c.detail));
        }
    }
    if elapsed > BUDGET {
        problems.push(format!("took {elapsed:.2?}"));
    }
    verdict(6, "1000 random digraphs agree with the brute-force oracle", elapsed, &problems);
}

#[test]
fn attractor_boundary_topology_settles() {
    let _g = serial();
    let sc = scenario(
        r#"
name = "ms4-boundary-topology"
seed = 11
suites = ["boundary_topology"]
[system]
kind = "builtin"
name = "ms4_circle"
params = [0.3]
[grid]
resolutions = [360, 720]
[[attractors]]
kind = "arc"
from = -0.3
to = 3.4415926535897931
[refinement]
iterations = 50
"#,
    );
    let start = Instant::now();
    let r = run_scenario(&sc).unwrap();
    let mut problems = Vec::new();
    not_passing(&r, "boundary_components_stable", &mut problems);
    for c in checks(&r, "boundary_components_stable") {
        for n in [360, 720] {
            let k = metric(c, &format!("components_n{n}"));
            if k != 2.0 {
                problems.push(format!("{k} boundary components at n={n}"));
            }
        }
    }
    not_passing(&r, "hausdorff_approach", &mut problems);
    for c in checks(&r, "hausdorff_approach") {
        if !(metric(c, "first_within") <= 50.0 && metric(c, "band_cells") <= 1.0) {
            problems.push(format!("Hausdorff sequence: {}", c.detail));
        }
    }
    verdict(7, "ms4 boundary has 2 components at n = 360, 720; Hausdorff approach settles", start.elapsed(), &problems);
}

#[test]
fn controls_without_shadowing_collapse() {
    let _g = serial();
    const N: usize = 360;
    const TRIALS: usize = 6;
    let start = Instant::now();
    let mut problems = Vec::new();
    for f in [PointMap::identity(), PointMap::rotation_circle(std::f64::consts::TAU * (5f64.sqrt() - 1.0) / 2.0)] {
        let sp = f.default_space(N).unwrap();
        let all = sp.full_set();
        for eps in [0.01, 0.005, 0.001] {
            let m = estimate_shadowing_modulus(&f, &sp, &all, eps, TRIALS, 10 * N, 3).unwrap();
            if !(m.delta_estimate < MODULUS_FLOOR) {
                problems.push(format!("{} ε={eps}: modulus {:e}", f.name(), m.delta_estimate));
            }
        }
    }
    let id = PointMap::identity();
    let sp = id.default_space(N).unwrap();
    let e = estimate_expansivity(&id, &sp, &sp.full_set(), 20, 12).unwrap();
    if !(e.e_estimate < EXPANSIVITY_FLOOR) {
        problems.push(format!("identity expansivity {:e}", e.e_estimate));
    }
    let cat = PointMap::cat_torus();
    let sp = cat.default_space(61).unwrap();
    let e = estimate_expansivity(&cat, &sp, &sp.full_set(), 20, 12).unwrap();
    if !(e.e_estimate >= CAT_EXPANSIVITY_BASELINE) {
        problems.push(format!("cat expansivity {:e} below {CAT_EXPANSIVITY_BASELINE}", e.e_estimate));
    }
    verdict(8, "identity and rotation moduli collapse; identity not expansive, cat is", start.elapsed(), &problems);
}

#[test]
fn full_cat_scenario_reports_are_byte_identical() {
    let _g = serial();
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios/cat_full.toml");
    let sc = Scenario::load(std::path::Path::new(path)).unwrap();
    let start = Instant::now();
    let first = run_scenario(&sc).unwrap();
    let second = run_scenario(&sc).unwrap();
    let mut problems = Vec::new();
    let (a, b) = (first.to_json(), second.to_json());
    if a != b {
        let line = a.lines().zip(b.lines()).position(|(x, y)| x != y).unwrap_or(0);
        problems.push(format!("reports differ from line {}", line + 1));
    }
    if a.contains("total_seconds") {
        problems.push("timing leaked into report.json".into());
    }
    if first.exit_code() != 0 {
        problems.push(format!("cat full scenario is not all-pass: {:?}", first.summary));
    }
    verdict(9, "two cat full-suite runs give byte-identical reports", start.elapsed(), &problems);
}
