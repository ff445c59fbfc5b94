//! Built-in homeomorphisms, their cell-level outer approximations, and
//! pseudo-orbit generation.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Axis, CellSet, GridSpace, Point, SpaceKind, TOL};

/// Anything that can be iterated both ways and measured.
pub trait Dynamics: Sync {
    type Point: Clone + Send + Sync;

    fn forward(&self, p: &Self::Point) -> Self::Point;
    fn inverse(&self, p: &Self::Point) -> Self::Point;
    fn distance(&self, p: &Self::Point, q: &Self::Point) -> f64;

    /// `f^k(p)` for any integer `k`.
    fn iterate(&self, p: &Self::Point, k: i64) -> Self::Point {
        let mut q = p.clone();
        if k >= 0 {
            for _ in 0..k {
                q = self.forward(&q);
            }
        } else {
            for _ in 0..(-k) {
                q = self.inverse(&q);
            }
        }
        q
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "name")]
pub enum MapKind {
    CatTorus,
    NsCircle { a: f64 },
    Ms4Circle { a: f64 },
    SquareInterval,
    Identity,
    RotationCircle { alpha: f64 },
}

/// Names accepted by [`PointMap::builtin`].
pub const BUILTIN_NAMES: [&str; 6] =
    ["cat_torus", "ns_circle", "ms4_circle", "square_interval", "identity", "rotation_circle"];

/// A homeomorphism evaluated on ambient points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMap {
    kind: MapKind,
    name: String,
    parameters: Vec<f64>,
    lipschitz: f64,
}

impl PointMap {
    /// Look up a builtin; an empty parameter list selects the defaults
    /// (ns 0.5, ms4 0.3, rotation by 2π times the golden-ratio conjugate).
    pub fn builtin(name: &str, params: &[f64]) -> Result<Self> {
        let one = |default: f64| -> Result<f64> {
            match params {
                [] => Ok(default),
                [a] => Ok(*a),
                _ => Err(Error::config(format!("{name} takes one parameter, got {}", params.len()))),
            }
        };
        let none = || -> Result<()> {
            if params.is_empty() {
                Ok(())
            } else {
                Err(Error::config(format!("{name} takes no parameters")))
            }
        };
        match name {
            "cat_torus" => none().map(|_| Self::cat_torus()),
            "ns_circle" => Self::ns_circle(one(0.5)?),
            "ms4_circle" => Self::ms4_circle(one(0.3)?),
            "square_interval" => none().map(|_| Self::square_interval()),
            "identity" => none().map(|_| Self::identity()),
            "rotation_circle" => Ok(Self::rotation_circle(one(TAU * (5f64.sqrt() - 1.0) / 2.0)?)),
            other => Err(Error::config(format!(
                "unknown system '{other}'; expected one of {}",
                BUILTIN_NAMES.join(", ")
            ))),
        }
    }

    pub fn cat_torus() -> Self {
        Self::new(MapKind::CatTorus, "cat_torus", vec![], 3.0)
    }

    pub fn ns_circle(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::config(format!("ns_circle needs 0 < a < 1, got {a}")));
        }
        Ok(Self::new(MapKind::NsCircle { a }, "ns_circle", vec![a], 1.0 + a))
    }

    pub fn ms4_circle(a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 0.5) {
            return Err(Error::config(format!("ms4_circle needs 0 < a < 1/2, got {a}")));
        }
        Ok(Self::new(MapKind::Ms4Circle { a }, "ms4_circle", vec![a], 1.0 + 2.0 * a))
    }

    pub fn square_interval() -> Self {
        Self::new(MapKind::SquareInterval, "square_interval", vec![], 2.0)
    }

    /// Identity on the circle.
    pub fn identity() -> Self {
        Self::new(MapKind::Identity, "identity", vec![], 1.0)
    }

    pub fn rotation_circle(alpha: f64) -> Self {
        Self::new(MapKind::RotationCircle { alpha }, "rotation_circle", vec![alpha], 1.0)
    }

    fn new(kind: MapKind, name: &str, parameters: Vec<f64>, lipschitz: f64) -> Self {
        PointMap { kind, name: name.to_string(), parameters, lipschitz }
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parameters(&self) -> &[f64] {
        &self.parameters
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    pub fn domain(&self) -> SpaceKind {
        match self.kind {
            MapKind::CatTorus => SpaceKind::Torus2,
            MapKind::SquareInterval => SpaceKind::Interval,
            _ => SpaceKind::Circle,
        }
    }

    /// The grid this map is usually studied on, `n` cells per axis.
    pub fn default_space(&self, n: usize) -> Result<GridSpace> {
        match self.domain() {
            SpaceKind::Torus2 => GridSpace::torus2(n),
            SpaceKind::Interval => GridSpace::interval(n),
            _ => GridSpace::circle(n),
        }
    }

    fn domain_axes(&self) -> Vec<Axis> {
        match self.domain() {
            SpaceKind::Torus2 => vec![Axis { cells: 0, length: 1.0, periodic: true }; 2],
            SpaceKind::Interval => vec![Axis { cells: 0, length: 1.0, periodic: false }],
            _ => vec![Axis { cells: 0, length: TAU, periodic: true }],
        }
    }

    /// Whether `space` discretizes this map's domain.
    pub fn compatible_with(&self, space: &GridSpace) -> bool {
        let want = self.domain_axes();
        let have = space.axes();
        want.len() == have.len()
            && want
                .iter()
                .zip(have)
                .all(|(w, h)| w.periodic == h.periodic && (w.length - h.length).abs() < TOL)
    }

    pub fn forward(&self, p: Point) -> Point {
        match self.kind {
            MapKind::CatTorus => {
                let (x, y) = (p.x(), p.y());
                Point::new2((2.0 * x + y).rem_euclid(1.0), (x + y).rem_euclid(1.0))
            }
            MapKind::NsCircle { a } => circle(p.x() - a * p.x().sin()),
            MapKind::Ms4Circle { a } => circle(p.x() - a * (2.0 * p.x()).sin()),
            MapKind::SquareInterval => {
                let x = p.x().clamp(0.0, 1.0);
                Point::new1(x * x)
            }
            MapKind::Identity => circle(p.x()),
            MapKind::RotationCircle { alpha } => circle(p.x() + alpha),
        }
    }

    pub fn inverse(&self, p: Point) -> Point {
        match self.kind {
            MapKind::CatTorus => {
                let (x, y) = (p.x(), p.y());
                Point::new2((x - y).rem_euclid(1.0), (2.0 * y - x).rem_euclid(1.0))
            }
            MapKind::NsCircle { a } => circle(solve_monotone(p.x(), a, |t| t - a * t.sin(), |t| 1.0 - a * t.cos())),
            MapKind::Ms4Circle { a } => circle(solve_monotone(
                p.x(),
                a,
                |t| t - a * (2.0 * t).sin(),
                |t| 1.0 - 2.0 * a * (2.0 * t).cos(),
            )),
            MapKind::SquareInterval => Point::new1(p.x().clamp(0.0, 1.0).sqrt()),
            MapKind::Identity => circle(p.x()),
            MapKind::RotationCircle { alpha } => circle(p.x() - alpha),
        }
    }

    /// Derivative of one-dimensional maps; `None` on the torus.
    pub fn derivative_1d(&self, x: f64) -> Option<f64> {
        match self.kind {
            MapKind::CatTorus => None,
            MapKind::NsCircle { a } => Some(1.0 - a * x.cos()),
            MapKind::Ms4Circle { a } => Some(1.0 - 2.0 * a * (2.0 * x).cos()),
            MapKind::SquareInterval => Some(2.0 * x),
            MapKind::Identity | MapKind::RotationCircle { .. } => Some(1.0),
        }
    }

    /// Domain metric: arc length, flat-torus max-metric, or |x − y|.
    pub fn point_distance(&self, p: Point, q: Point) -> f64 {
        self.domain_axes()
            .iter()
            .enumerate()
            .map(|(k, ax)| ax.coord_distance(p.0[k], q.0[k]))
            .fold(0.0, f64::max)
    }

    /// Fold a point into the fundamental domain.
    pub fn normalize(&self, p: Point) -> Point {
        match self.domain() {
            SpaceKind::Torus2 => Point::new2(p.x().rem_euclid(1.0), p.y().rem_euclid(1.0)),
            SpaceKind::Interval => Point::new1(p.x().clamp(0.0, 1.0)),
            _ => circle(p.x()),
        }
    }

    pub fn dims(&self) -> usize {
        self.domain_axes().len()
    }

    pub fn orbit(&self, x: Point, k: usize) -> Vec<Point> {
        let mut v = Vec::with_capacity(k + 1);
        v.push(x);
        for i in 0..k {
            v.push(self.forward(v[i]));
        }
        v
    }
}

impl Dynamics for PointMap {
    type Point = Point;

    fn forward(&self, p: &Point) -> Point {
        PointMap::forward(self, *p)
    }

    fn inverse(&self, p: &Point) -> Point {
        PointMap::inverse(self, *p)
    }

    fn distance(&self, p: &Point, q: &Point) -> f64 {
        self.point_distance(*p, *q)
    }
}

fn circle(t: f64) -> Point {
    let t = t.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU
    Point::new1(if t >= TAU { 0.0 } else { t })
}

/// Solve g(t) = y for increasing g with |g(t) − t| ≤ a; Newton with a
/// bisection fallback on [y − a, y + a].
fn solve_monotone(y: f64, a: f64, g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64) -> f64 {
    let (mut lo, mut hi) = (y - a, y + a);
    let mut t = y;
    for _ in 0..200 {
        let r = g(t) - y;
        if r == 0.0 {
            return t;
        }
        if r < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        let step = r / dg(t);
        let mut next = t - step;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - t).abs() <= 1e-16 * t.abs().max(1.0) || hi - lo <= 1e-16 * t.abs().max(1.0) {
            return next;
        }
        t = next;
    }
    t
}

/// Combinatorial outer approximation of a map on a grid, with the inverse
/// relation stored as the transpose.
#[derive(Clone, Debug)]
pub struct CellMap {
    space: Arc<GridSpace>,
    name: String,
    lipschitz: f64,
    fwd_off: Vec<usize>,
    fwd: Vec<u32>,
    inv_off: Vec<usize>,
    inv: Vec<u32>,
}

/// Default sub-cell samples per axis.
pub fn default_samples(dims: usize) -> usize {
    if dims >= 2 {
        3
    } else {
        4
    }
}

/// Outer approximation with the default sampling density.
pub fn build_cell_map(f: &PointMap, space: Arc<GridSpace>) -> Result<CellMap> {
    let m = default_samples(space.dim());
    build_cell_map_with(f, space, m)
}

/// Sample each cell on an `m`-per-axis sub-grid (every point of the cell is
/// within `cell_radius / m` of a sample) and include every cell whose center
/// lies within `cell_radius + L * cell_radius / m` of a sampled image.
pub fn build_cell_map_with(f: &PointMap, space: Arc<GridSpace>, m: usize) -> Result<CellMap> {
    if m == 0 {
        return Err(Error::arg("need at least one sample per axis"));
    }
    if !f.compatible_with(&space) {
        return Err(Error::arg(format!("{} is not defined on a {} grid", f.name(), space.kind())));
    }
    let axes = space.axes().to_vec();
    let rad = space.cell_radius();
    let reach = rad + f.lipschitz_bound() * rad / m as f64;
    let frac: Vec<f64> = (0..m).map(|j| (j as f64 + 0.5) / m as f64 - 0.5).collect();
    let lists: Vec<Vec<u32>> = (0..space.len())
        .into_par_iter()
        .map(|c| {
            let center = space.center(c);
            let mut out = Vec::new();
            let mut buf = Vec::new();
            let mut visit = |p: Point| {
                let y = f.forward(p);
                let home = space.cell_of(y).expect("grid space");
                buf.clear();
                space.ball_cells(home, reach + rad, &mut buf);
                out.extend(buf.iter().copied().filter(|&d| {
                    space.point_distance(space.center(d as usize), y) <= reach + TOL
                }));
            };
            match axes.len() {
                1 => {
                    for &u in &frac {
                        let x = center.x() + u * axes[0].step();
                        visit(Point::new1(x));
                    }
                }
                _ => {
                    for &u in &frac {
                        for &v in &frac {
                            visit(Point::new2(
                                center.x() + u * axes[0].step(),
                                center.y() + v * axes[1].step(),
                            ));
                        }
                    }
                }
            }
            out.sort_unstable();
            out.dedup();
            out
        })
        .collect();
    Ok(CellMap::from_lists(space, f.name().to_string(), f.lipschitz_bound(), lists))
}

impl CellMap {
    /// Cell map from an explicit successor relation (abstract systems).
    pub fn from_relation(space: Arc<GridSpace>, name: &str, succ: Vec<Vec<usize>>) -> Result<Self> {
        if succ.len() != space.len() {
            return Err(Error::arg(format!("relation has {} rows for {} cells", succ.len(), space.len())));
        }
        let mut lists = Vec::with_capacity(succ.len());
        for (c, row) in succ.into_iter().enumerate() {
            if row.is_empty() {
                return Err(Error::arg(format!("cell {c} has no image")));
            }
            let mut v = Vec::with_capacity(row.len());
            for d in row {
                if d >= space.len() {
                    return Err(Error::arg(format!("image cell {d} out of range")));
                }
                v.push(d as u32);
            }
            v.sort_unstable();
            v.dedup();
            lists.push(v);
        }
        Ok(Self::from_lists(space, name.to_string(), 0.0, lists))
    }

    fn from_lists(space: Arc<GridSpace>, name: String, lipschitz: f64, lists: Vec<Vec<u32>>) -> Self {
        let n = space.len();
        let mut fwd_off = Vec::with_capacity(n + 1);
        fwd_off.push(0);
        let mut fwd = Vec::new();
        let mut indeg = vec![0usize; n];
        for l in &lists {
            fwd.extend_from_slice(l);
            fwd_off.push(fwd.len());
            for &d in l {
                indeg[d as usize] += 1;
            }
        }
        let (inv_off, inv) = transpose(&fwd_off, &fwd, &indeg);
        CellMap { space, name, lipschitz, fwd_off, fwd, inv_off, inv }
    }

    pub fn space(&self) -> &Arc<GridSpace> {
        &self.space
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn forward_images(&self, c: usize) -> &[u32] {
        &self.fwd[self.fwd_off[c]..self.fwd_off[c + 1]]
    }

    pub fn inverse_images(&self, c: usize) -> &[u32] {
        &self.inv[self.inv_off[c]..self.inv_off[c + 1]]
    }

    pub fn edge_count(&self) -> usize {
        self.fwd.len()
    }

    pub fn image(&self, s: &CellSet) -> CellSet {
        let mut out = self.space.empty_set();
        for c in s.iter() {
            for &d in self.forward_images(c) {
                out.insert(d as usize);
            }
        }
        out
    }

    /// Transposed relation, an outer approximation of the inverse map.
    pub fn reversed(&self) -> CellMap {
        CellMap {
            space: self.space.clone(),
            name: format!("{}^-1", self.name),
            lipschitz: self.lipschitz,
            fwd_off: self.inv_off.clone(),
            fwd: self.inv.clone(),
            inv_off: self.fwd_off.clone(),
            inv: self.fwd.clone(),
        }
    }

    pub fn preimage(&self, s: &CellSet) -> CellSet {
        let mut out = self.space.empty_set();
        for c in s.iter() {
            for &d in self.inverse_images(c) {
                out.insert(d as usize);
            }
        }
        out
    }
}

pub(crate) fn transpose(off: &[usize], adj: &[u32], indeg: &[usize]) -> (Vec<usize>, Vec<u32>) {
    let n = indeg.len();
    let mut t_off = Vec::with_capacity(n + 1);
    t_off.push(0);
    for &d in indeg {
        let last = *t_off.last().unwrap();
        t_off.push(last + d);
    }
    let mut fill = t_off[..n].to_vec();
    let mut t = vec![0u32; adj.len()];
    for c in 0..n {
        for &d in &adj[off[c]..off[c + 1]] {
            let d = d as usize;
            t[fill[d]] = c as u32;
            fill[d] += 1;
        }
    }
    // sources are visited in ascending order, so each row is already sorted
    (t_off, t)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Noise {
    /// Independent uniform perturbation of each coordinate in [−δ, δ].
    Uniform,
    /// Every step is pushed by exactly δ (max-norm) in one seed-chosen direction.
    Adversarial,
}

/// Finite chain `x_0, ..., x_k` with recomputed step errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoOrbit<P = Point> {
    pub points: Vec<P>,
    pub delta: f64,
    pub step_errors: Vec<f64>,
}

impl<P: Clone + Send + Sync> PseudoOrbit<P> {
    /// Validates `max step error ≤ delta` (with a 1e-12 slack).
    pub fn from_points<D: Dynamics<Point = P>>(f: &D, points: Vec<P>, delta: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::arg("a chain needs at least two points"));
        }
        let step_errors: Vec<f64> =
            points.windows(2).map(|w| f.distance(&f.forward(&w[0]), &w[1])).collect();
        let worst = step_errors.iter().copied().fold(0.0, f64::max);
        if worst > delta + TOL {
            return Err(Error::arg(format!("step error {worst:e} exceeds delta {delta:e}")));
        }
        Ok(PseudoOrbit { points, delta, step_errors })
    }

    /// Number of steps `k`.
    pub fn len(&self) -> usize {
        self.points.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.points.len() < 2
    }

    pub fn max_step_error(&self) -> f64 {
        self.step_errors.iter().copied().fold(0.0, f64::max)
    }
}

fn perturbation(dims: usize, delta: f64, noise: Noise, dir: &[f64; 2], rng: &mut ChaCha8Rng) -> [f64; 2] {
    match noise {
        Noise::Uniform => {
            let mut e = [0.0; 2];
            for v in e.iter_mut().take(dims) {
                *v = if delta > 0.0 { rng.gen_range(-delta..=delta) } else { 0.0 };
            }
            e
        }
        Noise::Adversarial => [dir[0] * delta, dir[1] * delta],
    }
}

/// Unit direction in the max-norm, drawn from the seed.
fn adversarial_direction(dims: usize, rng: &mut ChaCha8Rng) -> [f64; 2] {
    if dims == 1 {
        let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        return [s, 0.0];
    }
    let t: f64 = rng.gen_range(0.0..TAU);
    let (s, c) = t.sin_cos();
    let m = s.abs().max(c.abs());
    [c / m, s / m]
}

pub fn generate_pseudo_orbit(
    f: &PointMap,
    x0: Point,
    k: usize,
    delta: f64,
    noise: Noise,
    seed: u64,
) -> Result<PseudoOrbit> {
    if k == 0 {
        return Err(Error::arg("chain length must be at least 1"));
    }
    if !(delta >= 0.0) {
        return Err(Error::arg(format!("delta must be nonnegative, got {delta}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = f.dims();
    let dir = adversarial_direction(dims, &mut rng);
    let mut points = Vec::with_capacity(k + 1);
    points.push(f.normalize(x0));
    for i in 0..k {
        let y = f.forward(points[i]);
        let e = perturbation(dims, delta, noise, &dir, &mut rng);
        points.push(f.normalize(Point([y.0[0] + e[0], y.0[1] + e[1]])));
    }
    PseudoOrbit::from_points(f, points, delta)
}

/// Window `x_{-m}, ..., x_m` of a bi-infinite chain whose step errors decay
/// according to `schedule` (η_0, ..., η_m).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitPseudoOrbit<P = Point> {
    pub m: usize,
    pub points: Vec<P>,
    pub delta: f64,
    pub schedule: Vec<f64>,
    /// `step_errors[i + m]` is d(f(x_i), x_{i+1}) for i in −m..m.
    pub step_errors: Vec<f64>,
}

impl<P: Clone + Send + Sync> LimitPseudoOrbit<P> {
    pub fn from_points<D: Dynamics<Point = P>>(
        f: &D,
        m: usize,
        points: Vec<P>,
        delta: f64,
        schedule: Vec<f64>,
    ) -> Result<Self> {
        if points.len() != 2 * m + 1 {
            return Err(Error::arg(format!("window −{m}..{m} needs {} points", 2 * m + 1)));
        }
        if schedule.len() != m + 1 {
            return Err(Error::arg(format!("schedule needs {} entries", m + 1)));
        }
        if schedule.iter().any(|&e| !(e > 0.0)) || schedule.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::arg("schedule must be positive and nonincreasing"));
        }
        let step_errors: Vec<f64> =
            points.windows(2).map(|w| f.distance(&f.forward(&w[0]), &w[1])).collect();
        for (j, &e) in step_errors.iter().enumerate() {
            let i = j as i64 - m as i64;
            let eta = schedule[i.unsigned_abs() as usize];
            if e > eta.min(delta) + TOL {
                return Err(Error::arg(format!("step error {e:e} at index {i} exceeds its bound")));
            }
        }
        Ok(LimitPseudoOrbit { m, points, delta, schedule, step_errors })
    }

    pub fn point(&self, i: i64) -> &P {
        &self.points[(i + self.m as i64) as usize]
    }

    pub fn indices(&self) -> std::ops::RangeInclusive<i64> {
        -(self.m as i64)..=self.m as i64
    }
}

/// Geometric schedule η_j = δ ρ^j for a window of half-width `m`.
pub fn geometric_schedule(delta: f64, rho: f64, m: usize) -> Vec<f64> {
    (0..=m).map(|j| (delta * rho.powi(j as i32)).max(f64::MIN_POSITIVE)).collect()
}

/// Random limit-pseudo-orbit around the orbit of `x0`: starts at f^{-m}(x0)
/// and adds perturbations bounded by η_{|i|} at step i.
pub fn generate_limit_pseudo_orbit(
    f: &PointMap,
    x0: Point,
    m: usize,
    schedule: &[f64],
    noise: Noise,
    seed: u64,
) -> Result<LimitPseudoOrbit> {
    let start = f.iterate(&f.normalize(x0), -(m as i64));
    limit_pseudo_orbit_from(f, start, m, schedule, noise, seed)
}

/// Same as [`generate_limit_pseudo_orbit`] but `start` is taken as x_{-m}
/// directly, which avoids pulling back through an expanding inverse.
pub fn limit_pseudo_orbit_from(
    f: &PointMap,
    start: Point,
    m: usize,
    schedule: &[f64],
    noise: Noise,
    seed: u64,
) -> Result<LimitPseudoOrbit> {
    if schedule.len() != m + 1 {
        return Err(Error::arg(format!("schedule needs {} entries", m + 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims = f.dims();
    let dir = adversarial_direction(dims, &mut rng);
    let mut pts = Vec::with_capacity(2 * m + 1);
    pts.push(f.normalize(start));
    for j in 0..2 * m {
        let i = j as i64 - m as i64;
        let eta = schedule[i.unsigned_abs() as usize];
        let y = f.forward(pts[j]);
        let e = perturbation(dims, eta, noise, &dir, &mut rng);
        pts.push(f.normalize(Point([y.0[0] + e[0], y.0[1] + e[1]])));
    }
    LimitPseudoOrbit::from_points(f, m, pts, schedule[0], schedule.to_vec())
}

/// Outer enclosure of the ω-limit set of points in cell `c`: the union of
/// the cell iterates over `[burn_in, burn_in + horizon)`, intersected over
/// doubling burn-ins until it stops changing.
pub fn omega_limit(map: &CellMap, c: usize, burn_in: usize, horizon: usize) -> Result<CellSet> {
    if burn_in == 0 || horizon == 0 {
        return Err(Error::arg("burn_in and horizon must be at least 1"));
    }
    if c >= map.len() {
        return Err(Error::arg(format!("cell {c} out of range")));
    }
    let sp = map.space();
    let window = |start: usize| -> CellSet {
        let mut cur = sp.set_of([c]);
        for _ in 0..start {
            cur = map.image(&cur);
        }
        let mut acc = cur.clone();
        for _ in 1..horizon {
            cur = map.image(&cur);
            acc.union_with(&cur);
        }
        acc
    };
    let mut b = burn_in;
    let mut enclosure = window(b);
    for _ in 0..6 {
        b *= 2;
        let next = enclosure.intersection(&window(b));
        if next == enclosure {
            break;
        }
        enclosure = next;
    }
    Ok(enclosure)
}
