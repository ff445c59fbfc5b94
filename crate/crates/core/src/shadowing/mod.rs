//! Shadowing, limit shadowing and expansivity.
//!
//! Hyperbolic toral automorphisms get exact solvers and certificates
//! ([`linear`], [`exact`]). Other maps get search-based estimates that are
//! labelled as such and never promoted to certificates.

pub mod exact;
pub mod linear;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use exact::{glue_orbits_linear, DyadicPoint, ExactToral, Glue};
pub use linear::{shadow_linear_hyperbolic, shadow_linear_limit, HyperbolicSplitting, LinearShadow};

use crate::error::{Error, Result};
use crate::space::{CellSet, GridSpace, Point};
use crate::systems::{
    generate_pseudo_orbit, geometric_schedule, limit_pseudo_orbit_from, Dynamics, LimitPseudoOrbit, MapKind,
    Noise, PointMap, PseudoOrbit,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowMethod {
    ExactLinear,
    EmpiricalSearch,
}

/// One-sided error sequences of a limit shadow; entry j is the error at
/// index −j (backward) or +j (forward).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailErrors {
    pub backward: Vec<f64>,
    pub forward: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShadowingCertificate {
    pub orbit_start: Point,
    /// sup_i d(x_i, y_i) over the computed shadow orbit y.
    pub sup_error: f64,
    pub tail_errors: Option<TailErrors>,
    pub method: ShadowMethod,
    pub verified: bool,
    /// Largest one-step defect of the shadow orbit, computed exactly; zero
    /// for orbits obtained by iterating the map.
    pub residual: f64,
    /// A true orbit lies within this distance of the chain.
    pub rigorous_bound: f64,
    #[serde(skip)]
    pub shadow_orbit: Vec<Point>,
}

impl ShadowingCertificate {
    /// Recomputes sup_i d(x_i, y_i) from the stored shadow orbit.
    pub fn recompute_sup(&self, f: &PointMap, points: &[Point]) -> f64 {
        self.shadow_orbit.iter().zip(points).map(|(y, x)| f.point_distance(*x, *y)).fold(0.0, f64::max)
    }
}

/// d(x_i, f^i(x)) along a finite chain.
pub fn shadow_errors<D: Dynamics>(f: &D, points: &[D::Point], x: &D::Point) -> Vec<f64> {
    let mut y = x.clone();
    let mut out = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            y = f.forward(&y);
        }
        out.push(f.distance(p, &y));
    }
    out
}

/// True iff the orbit of `x` stays within `epsilon` of the whole chain.
pub fn verify_shadowing<D: Dynamics>(f: &D, po: &PseudoOrbit<D::Point>, x: &D::Point, epsilon: f64) -> bool {
    shadow_errors(f, &po.points, x).iter().all(|&e| e <= epsilon)
}

/// d(x_i, f^i(x)) for i = −m..m, with `x` placed at index 0.
pub fn limit_errors<D: Dynamics>(f: &D, lpo: &LimitPseudoOrbit<D::Point>, x: &D::Point) -> Vec<f64> {
    let m = lpo.m;
    let mut out = vec![0.0; 2 * m + 1];
    let mut y = x.clone();
    for j in 0..=m {
        if j > 0 {
            y = f.forward(&y);
        }
        out[m + j] = f.distance(&lpo.points[m + j], &y);
    }
    let mut y = x.clone();
    for j in 1..=m {
        y = f.inverse(&y);
        out[m - j] = f.distance(&lpo.points[m - j], &y);
    }
    out
}

/// Outcome of the windowed limit-shadowing test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCheck {
    pub sup_error: f64,
    /// First index in the outer thirds whose error exceeds the schedule.
    pub tail_violation: Option<i64>,
    pub passed: bool,
}

/// Schedule entry j, extended by its last value.
fn schedule_at(tail: &[f64], j: usize) -> f64 {
    tail.get(j).or(tail.last()).copied().unwrap_or(0.0)
}

/// Sup error at most `epsilon`, and on |i| > m/3 the error at i is at most
/// tail[|i|].
pub fn check_limit_errors(errors: &[f64], m: usize, epsilon: f64, tail: &[f64]) -> LimitCheck {
    let sup_error = errors.iter().copied().fold(0.0, f64::max);
    let mut tail_violation = None;
    for j in (m / 3 + 1)..=m {
        let tau = schedule_at(tail, j);
        if errors[m - j] > tau {
            tail_violation = Some(-(j as i64));
            break;
        }
        if errors[m + j] > tau {
            tail_violation = Some(j as i64);
            break;
        }
    }
    LimitCheck { sup_error, tail_violation, passed: sup_error <= epsilon && tail_violation.is_none() }
}

/// Windowed limit shadowing: sup error within `epsilon` and both one-sided
/// error sequences dominated by the decreasing `tail` schedule on the outer
/// thirds of the window.
pub fn verify_limit_shadowing<D: Dynamics>(
    f: &D,
    lpo: &LimitPseudoOrbit<D::Point>,
    x: &D::Point,
    epsilon: f64,
    tail: &[f64],
) -> bool {
    check_limit_errors(&limit_errors(f, lpo, x), lpo.m, epsilon, tail).passed
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Membership {
    pub in_ws: bool,
    pub in_wu: bool,
}

/// Stable/unstable leaf evidence: along the forward (resp. backward) orbit
/// the distance never grows beyond its start plus `tol` and ends below `tol`.
pub fn stable_unstable_membership<D: Dynamics>(
    f: &D,
    base: &D::Point,
    probe: &D::Point,
    horizon: usize,
    tol: f64,
) -> Result<Membership> {
    if horizon == 0 {
        return Err(Error::arg("horizon must be at least 1"));
    }
    let side = |forward: bool| {
        let d0 = f.distance(base, probe);
        let (mut a, mut b) = (base.clone(), probe.clone());
        let mut last = d0;
        for _ in 0..horizon {
            if forward {
                a = f.forward(&a);
                b = f.forward(&b);
            } else {
                a = f.inverse(&a);
                b = f.inverse(&b);
            }
            last = f.distance(&a, &b);
            if last > d0 + tol {
                return false;
            }
        }
        last <= tol
    };
    Ok(Membership { in_ws: side(true), in_wu: side(false) })
}

fn check_space(f: &PointMap, space: &GridSpace, region: &CellSet) -> Result<()> {
    if !f.compatible_with(space) {
        return Err(Error::arg(format!("map {} does not act on this space", f.name())));
    }
    if region.universe() != space.len() {
        return Err(Error::arg("region belongs to a different space"));
    }
    if region.is_empty() {
        return Err(Error::arg("region is empty"));
    }
    Ok(())
}

/// Uniform point of a uniformly chosen cell of `cells`.
fn sample_point(f: &PointMap, space: &GridSpace, cells: &[usize], rng: &mut ChaCha8Rng) -> Point {
    let c = cells[rng.gen_range(0..cells.len())];
    let mut p = space.center(c);
    for (k, ax) in space.axes().iter().enumerate() {
        let r = 0.499 * ax.step();
        p.0[k] += rng.gen_range(-r..=r);
    }
    f.normalize(p)
}

fn in_region(space: &GridSpace, region: &CellSet, p: Point) -> bool {
    space.cell_of(p).is_some_and(|c| region.contains(c))
}

/// Pattern search in the ambient coordinates; stops early once the
/// objective reaches `target`.
fn compass_search(
    f: &PointMap,
    objective: &dyn Fn(Point) -> f64,
    start: Point,
    step0: f64,
    min_step: f64,
    target: f64,
) -> (Point, f64) {
    let dims = f.dims();
    let mut best = f.normalize(start);
    let mut value = objective(best);
    let mut step = step0;
    let mut evals = 0usize;
    while value > target && step >= min_step && evals < 4000 {
        let mut moved = false;
        for k in 0..dims {
            for s in [1.0, -1.0] {
                let mut q = best;
                q.0[k] += s * step;
                let q = f.normalize(q);
                let v = objective(q);
                evals += 1;
                if v < value {
                    best = q;
                    value = v;
                    moved = true;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (best, value)
}

/// sup_i d(x_i, f^i(x)), abandoning the orbit once it exceeds `cap`.
fn capped_sup(f: &PointMap, points: &[Point], x: Point, cap: f64) -> f64 {
    let mut y = x;
    let mut w = f.point_distance(points[0], y);
    for p in &points[1..] {
        if w > cap {
            return w;
        }
        y = f.forward(y);
        w = w.max(f.point_distance(*p, y));
    }
    w
}

/// Multi-start search for a point whose orbit ε-shadows `po`, seeded at
/// x_0 and at the pull-backs of x_{k/2} and x_k.
pub fn search_shadow(f: &PointMap, po: &PseudoOrbit, epsilon: f64) -> (Point, f64) {
    let k = po.points.len() - 1;
    let starts =
        [po.points[0], f.iterate(&po.points[k / 2], -((k / 2) as i64)), f.iterate(&po.points[k], -(k as i64))];
    let objective = |x: Point| capped_sup(f, &po.points, x, 1.0);
    let mut best = (starts[0], f64::INFINITY);
    for s in starts {
        let r = compass_search(f, &objective, s, epsilon.max(1e-12), epsilon * 1e-4, epsilon);
        if r.1 < best.1 {
            best = r;
        }
        if best.1 <= epsilon {
            break;
        }
    }
    best
}

/// δ ladder scanned by [`estimate_shadowing_modulus`], from 0.1 down by
/// factors of 3.
pub fn modulus_ladder() -> Vec<f64> {
    (0..18).map(|j| 0.1 / 3f64.powi(j)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusRung {
    pub delta: f64,
    pub trials: usize,
    pub shadowed: usize,
    /// Largest best-found sup error over the trials.
    pub worst_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusFailure {
    pub delta: f64,
    pub trial: usize,
    pub noise: Noise,
    pub start: Point,
    pub best_error: f64,
}

/// Empirical δ(ε); an estimate, not a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimate {
    pub epsilon: f64,
    pub chain_length: usize,
    /// Largest ladder δ at which every sampled chain was shadowed; 0 if none.
    pub delta_estimate: f64,
    pub rungs: Vec<ModulusRung>,
    pub failures: Vec<ModulusFailure>,
}

/// Scans the δ ladder from the top and stops at the first rung where every
/// sampled chain (alternating uniform and adversarial noise, started in the
/// region) admits an ε-shadowing point. Chains depend only on the seed and
/// δ, so the estimate is nondecreasing in ε.
pub fn estimate_shadowing_modulus(
    f: &PointMap,
    space: &GridSpace,
    region: &CellSet,
    epsilon: f64,
    trials: usize,
    chain_length: usize,
    seed: u64,
) -> Result<ModulusEstimate> {
    check_space(f, space, region)?;
    if trials == 0 || chain_length == 0 {
        return Err(Error::arg("trials and chain_length must be at least 1"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::arg(format!("epsilon must be positive, got {epsilon}")));
    }
    let cells = region.to_vec();
    let starts: Vec<(Point, Noise, u64)> = (0..trials)
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(t as u64));
            let noise = if t % 2 == 0 { Noise::Uniform } else { Noise::Adversarial };
            (sample_point(f, space, &cells, &mut rng), noise, rng.gen())
        })
        .collect();
    let mut out =
        ModulusEstimate { epsilon, chain_length, delta_estimate: 0.0, rungs: Vec::new(), failures: Vec::new() };
    for delta in modulus_ladder() {
        let results: Vec<Result<f64>> = starts
            .par_iter()
            .map(|&(x0, noise, s)| {
                let po = generate_pseudo_orbit(f, x0, chain_length, delta, noise, s)?;
                let (x, err) = search_shadow(f, &po, epsilon);
                Ok(if verify_shadowing(f, &po, &x, epsilon) { err.min(epsilon) } else { err })
            })
            .collect();
        let mut rung = ModulusRung { delta, trials, shadowed: 0, worst_error: 0.0 };
        for (t, r) in results.into_iter().enumerate() {
            let err = r?;
            rung.worst_error = rung.worst_error.max(err);
            if err <= epsilon {
                rung.shadowed += 1;
            } else {
                let (start, noise, _) = starts[t];
                out.failures.push(ModulusFailure { delta, trial: t, noise, start, best_error: err });
            }
        }
        let all = rung.shadowed == trials;
        out.rungs.push(rung);
        if all {
            out.delta_estimate = delta;
            break;
        }
    }
    Ok(out)
}

/// Candidate expansive constants, largest first.
pub fn expansivity_ladder() -> Vec<f64> {
    let mut v = Vec::new();
    for e in 0..8 {
        let p = 10f64.powi(-e);
        v.extend([0.5 * p, 0.2 * p, 0.1 * p]);
    }
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansivityEstimate {
    /// Largest ladder value below every sampled pair's separation; the
    /// ladder top when no pair qualified (vacuous), 0 below the ladder.
    pub e_estimate: f64,
    /// Least sup_{|i|≤h} distance over valid pairs.
    pub min_separation: f64,
    pub witness: Option<(Point, Point)>,
    pub sampled_pairs: usize,
    /// Pairs whose orbits stayed in the region for |i| ≤ horizon.
    pub valid_pairs: usize,
    pub horizon: usize,
}

/// Sweeps pairs (p, p + s·v) over base points of the region, directions v
/// and separations s = 1e-1..1e-6, keeping pairs whose orbit windows stay in
/// the region.
pub fn estimate_expansivity(
    f: &PointMap,
    space: &GridSpace,
    region: &CellSet,
    horizon: usize,
    pair_grid: usize,
) -> Result<ExpansivityEstimate> {
    check_space(f, space, region)?;
    if horizon == 0 || pair_grid == 0 {
        return Err(Error::arg("horizon and pair_grid must be at least 1"));
    }
    let cells = region.to_vec();
    let dims = f.dims();
    let count = pair_grid.pow(dims as u32).min(cells.len());
    let bases: Vec<Point> = (0..count)
        .map(|j| {
            let c = cells[j * cells.len() / count];
            let mut p = space.center(c);
            // off-center, so that bases are not special points such as fixed points
            for (k, ax) in space.axes().iter().enumerate() {
                p.0[k] += 0.37 * ax.step() * (k as f64 + 1.0) / 2.0;
            }
            f.normalize(p)
        })
        .collect();
    let directions: Vec<[f64; 2]> = if dims == 1 {
        vec![[1.0, 0.0], [-1.0, 0.0]]
    } else {
        (0..8).map(|k| std::f64::consts::PI * k as f64 / 8.0).map(|t| [t.cos(), t.sin()]).collect()
    };
    let seps: Vec<f64> = (1..=6).map(|k| 10f64.powi(-k)).collect();
    let window = |p: Point| -> Option<Vec<Point>> {
        let mut out = Vec::with_capacity(2 * horizon + 1);
        let mut y = p;
        for i in 0..=horizon {
            if i > 0 {
                y = f.forward(y);
            }
            if !in_region(space, region, y) {
                return None;
            }
            out.push(y);
        }
        let mut y = p;
        for _ in 0..horizon {
            y = f.inverse(y);
            if !in_region(space, region, y) {
                return None;
            }
            out.push(y);
        }
        Some(out)
    };
    let per_base: Vec<(usize, usize, f64, Option<(Point, Point)>)> = bases
        .par_iter()
        .map(|&p| {
            let (mut sampled, mut valid, mut best, mut arg) = (0, 0, f64::INFINITY, None);
            let Some(wp) = window(p) else {
                return (directions.len() * seps.len(), 0, best, arg);
            };
            for v in &directions {
                for &s in &seps {
                    sampled += 1;
                    let q = f.normalize(Point([p.0[0] + s * v[0], p.0[1] + s * v[1]]));
                    let Some(wq) = window(q) else { continue };
                    valid += 1;
                    let sep = wp.iter().zip(&wq).map(|(a, b)| f.point_distance(*a, *b)).fold(0.0, f64::max);
                    if sep < best {
                        best = sep;
                        arg = Some((p, q));
                    }
                }
            }
            (sampled, valid, best, arg)
        })
        .collect();
    let mut est = ExpansivityEstimate {
        e_estimate: 0.0,
        min_separation: f64::INFINITY,
        witness: None,
        sampled_pairs: 0,
        valid_pairs: 0,
        horizon,
    };
    for (s, v, b, w) in per_base {
        est.sampled_pairs += s;
        est.valid_pairs += v;
        if b < est.min_separation {
            est.min_separation = b;
            est.witness = w;
        }
    }
    let ladder = expansivity_ladder();
    est.e_estimate = if est.valid_pairs == 0 {
        ladder[0]
    } else {
        ladder.iter().copied().find(|&e| e < est.min_separation).unwrap_or(0.0)
    };
    Ok(est)
}

/// How shadow points are produced in [`limit_shadowing_pipeline`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ShadowingMethod {
    ExactLinear { splitting: HyperbolicSplitting },
    Empirical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub horizon: usize,
    pub pair_grid: usize,
    /// Trials and chain length for the empirical modulus.
    pub trials: usize,
    pub chain_length: usize,
    /// Window half-width of the limit-pseudo-orbits.
    pub window: usize,
    pub limit_trials: usize,
    pub glue_trials: usize,
    /// Step errors decay like δ·rho^|i|.
    pub rho: f64,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            horizon: 20,
            pair_grid: 12,
            trials: 8,
            chain_length: 200,
            window: 30,
            limit_trials: 40,
            glue_trials: 10,
            rho: 0.5,
            seed: 7,
        }
    }
}

/// Expansive constants at or below this count as "not expansive".
pub const EXPANSIVITY_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum PipelineVerdict {
    Pass,
    Fail,
    HypothesesNotMet { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCounterexample {
    pub kind: String,
    pub trial: usize,
    pub sup_error: f64,
    pub tail_violation: Option<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub b: f64,
    pub c: f64,
    pub method: ShadowMethod,
    pub expansivity: ExpansivityEstimate,
    pub epsilon: f64,
    pub delta: f64,
    pub modulus: Option<ModulusEstimate>,
    pub tested: usize,
    pub shadowed: usize,
    /// Limit-pseudo-orbits discarded because they left B_b.
    pub skipped: usize,
    pub glued: usize,
    pub counterexamples: Vec<LimitCounterexample>,
    pub verdict: PipelineVerdict,
}

impl PipelineReport {
    /// Limit shadowing on B_b is claimed only when both hypotheses were
    /// established in this run and every stress test passed.
    pub fn asserts_limit_shadowing(&self) -> bool {
        self.verdict == PipelineVerdict::Pass
    }
}

/// Tail schedule used for the random limit-pseudo-orbits.
pub fn limit_tail_schedule(delta: f64, m: usize) -> Vec<f64> {
    geometric_schedule(12.0 * delta, 0.75, m).into_iter().map(|t| t.max(1e-13)).collect()
}

fn empirical_limit_shadow(f: &PointMap, lpo: &LimitPseudoOrbit, epsilon: f64, tail: &[f64]) -> Vec<f64> {
    let m = lpo.m;
    let objective = |x: Point| {
        let e = limit_errors(f, lpo, &x);
        let mut worst = e.iter().copied().fold(0.0, f64::max) / epsilon;
        for j in (m / 3 + 1)..=m {
            let tau = schedule_at(tail, j);
            worst = worst.max(e[m - j] / tau).max(e[m + j] / tau);
        }
        worst
    };
    let starts = [lpo.points[m], f.iterate(&lpo.points[0], m as i64), f.iterate(&lpo.points[2 * m], -(m as i64))];
    let mut best = (starts[0], f64::INFINITY);
    for s in starts {
        let r = compass_search(f, &objective, s, epsilon, 1e-16, 1.0);
        if r.1 < best.1 {
            best = r;
        }
        if best.1 <= 1.0 {
            break;
        }
    }
    limit_errors(f, lpo, &best.0)
}

/// Expansivity on B_c(S), then a shadowing modulus on B_c(S) at
/// ε = min(e, c − b)/2, then random (and, for linear maps, glued)
/// limit-pseudo-orbits in B_b(S) that must be limit-shadowed.
pub fn limit_shadowing_pipeline(
    f: &PointMap,
    space: &GridSpace,
    region: &CellSet,
    b: f64,
    c: f64,
    method: &ShadowingMethod,
    opts: &PipelineOptions,
) -> Result<PipelineReport> {
    check_space(f, space, region)?;
    if !(0.0 < b && b < c) {
        return Err(Error::arg(format!("need 0 < b < c, got b = {b}, c = {c}")));
    }
    if opts.window < 3 || !(opts.rho > 0.0 && opts.rho < 1.0) {
        return Err(Error::arg("window must be at least 3 and rho in (0, 1)"));
    }
    if let ShadowingMethod::ExactLinear { splitting } = method {
        if f.kind() != MapKind::CatTorus || splitting.matrix != [[2, 1], [1, 1]] {
            return Err(Error::arg("the exact linear method needs the cat map and its splitting"));
        }
    }
    let big = space.closed_neighborhood(region, c);
    let small = space.closed_neighborhood(region, b);
    let expansivity = estimate_expansivity(f, space, &big, opts.horizon, opts.pair_grid)?;
    let mut report = PipelineReport {
        b,
        c,
        method: match method {
            ShadowingMethod::ExactLinear { .. } => ShadowMethod::ExactLinear,
            ShadowingMethod::Empirical => ShadowMethod::EmpiricalSearch,
        },
        epsilon: 0.0,
        delta: 0.0,
        modulus: None,
        tested: 0,
        shadowed: 0,
        skipped: 0,
        glued: 0,
        counterexamples: Vec::new(),
        verdict: PipelineVerdict::Fail,
        expansivity,
    };
    let e = report.expansivity.e_estimate;
    if e <= EXPANSIVITY_FLOOR {
        report.verdict = PipelineVerdict::HypothesesNotMet {
            reason: format!("no expansive constant found on B_c (estimate {e:e})"),
        };
        return Ok(report);
    }
    let epsilon = 0.5 * e.min(c - b);
    report.epsilon = epsilon;
    let delta = match method {
        ShadowingMethod::ExactLinear { splitting } => epsilon / splitting.max_norm_gain(),
        ShadowingMethod::Empirical => {
            let est =
                estimate_shadowing_modulus(f, space, &big, epsilon, opts.trials, opts.chain_length, opts.seed)?;
            let d = est.delta_estimate;
            report.modulus = Some(est);
            d
        }
    };
    report.delta = delta;
    if delta <= 0.0 {
        report.verdict =
            PipelineVerdict::HypothesesNotMet { reason: format!("no shadowing modulus found on B_c at ε = {epsilon:e}") };
        return Ok(report);
    }

    let m = opts.window;
    let schedule = geometric_schedule(delta, opts.rho, m);
    let tail = limit_tail_schedule(delta, m);
    let cells = small.to_vec();
    let outcomes: Vec<Result<Option<LimitCheck>>> = (0..opts.limit_trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (0x5bd1_e995 + t as u64));
            let start = sample_point(f, space, &cells, &mut rng);
            let noise = if t % 2 == 0 { Noise::Uniform } else { Noise::Adversarial };
            let lpo = limit_pseudo_orbit_from(f, start, m, &schedule, noise, rng.gen())?;
            if !lpo.points.iter().all(|&p| in_region(space, &small, p)) {
                return Ok(None);
            }
            let errors = match method {
                ShadowingMethod::ExactLinear { splitting } => {
                    let s = shadow_linear_limit(splitting, &lpo)?;
                    let cert = &s.certificate;
                    if !cert.verified {
                        return Ok(Some(LimitCheck {
                            sup_error: cert.sup_error,
                            tail_violation: None,
                            passed: false,
                        }));
                    }
                    let slack = cert.rigorous_bound - cert.sup_error;
                    cert.shadow_orbit
                        .iter()
                        .zip(&lpo.points)
                        .map(|(y, x)| f.point_distance(*x, *y) + slack)
                        .collect::<Vec<f64>>()
                }
                ShadowingMethod::Empirical => empirical_limit_shadow(f, &lpo, epsilon, &tail),
            };
            Ok(Some(check_limit_errors(&errors, m, epsilon, &tail)))
        })
        .collect();
    for (t, r) in outcomes.into_iter().enumerate() {
        match r? {
            None => report.skipped += 1,
            Some(chk) => {
                report.tested += 1;
                if chk.passed {
                    report.shadowed += 1;
                } else {
                    report.counterexamples.push(LimitCounterexample {
                        kind: "random".into(),
                        trial: t,
                        sup_error: chk.sup_error,
                        tail_violation: chk.tail_violation,
                    });
                }
            }
        }
    }

    if let ShadowingMethod::ExactLinear { splitting } = method {
        let (ps, pu) = splitting.projection_norms();
        for t in 0..opts.glue_trials {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (0x2545_f491 + t as u64));
            let x = sample_point(f, space, &cells, &mut rng);
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let y = f.normalize(Point::new2(x.x() + 0.9 * delta * th.cos(), x.y() + 0.9 * delta * th.sin()));
            // both gluing orders
            for (p, q) in [(x, y), (y, x)] {
                let g = glue_orbits_linear(splitting, p, q, m)?;
                let rate = geometric_schedule((ps + pu) * g.defect * (1.0 + 1e-6), splitting.lambda_s, m);
                let rate: Vec<f64> = rate.into_iter().map(|r| r + 1e-300).collect();
                let errors = limit_errors(&g.toral, &g.lpo, &g.z);
                let chk = check_limit_errors(&errors, m, epsilon, &rate);
                report.tested += 1;
                report.glued += 1;
                if chk.passed {
                    report.shadowed += 1;
                } else {
                    report.counterexamples.push(LimitCounterexample {
                        kind: "glued".into(),
                        trial: t,
                        sup_error: chk.sup_error,
                        tail_violation: chk.tail_violation,
                    });
                }
            }
        }
    }

    report.verdict = if report.tested == 0 {
        PipelineVerdict::HypothesesNotMet { reason: "no limit-pseudo-orbit stayed in B_b".into() }
    } else if report.counterexamples.is_empty() {
        PipelineVerdict::Pass
    } else {
        PipelineVerdict::Fail
    };
    Ok(report)
}
