//! Finite cell models of compact metric spaces.
//!
//! A [`GridSpace`] is either a product of at most two uniform axes (circle,
//! flat torus, interval) or an abstract finite metric space given by an
//! explicit distance matrix. Topological notions use cell adjacency.

use std::collections::VecDeque;
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance on normalized coordinates for distance comparisons.
pub const TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    Circle,
    Torus2,
    Interval,
    Product,
    Abstract,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpaceKind::Circle => "circle",
            SpaceKind::Torus2 => "torus2",
            SpaceKind::Interval => "interval",
            SpaceKind::Product => "product",
            SpaceKind::Abstract => "abstract",
        };
        f.write_str(s)
    }
}

/// One uniform axis. Periodic axes put centers at `i * step`, non-periodic
/// axes at `(i + 0.5) * step`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub cells: usize,
    pub length: f64,
    pub periodic: bool,
}

impl Axis {
    pub fn step(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn center(&self, i: usize) -> f64 {
        let off = if self.periodic { 0.0 } else { 0.5 };
        (i as f64 + off) * self.step()
    }

    pub fn index_of(&self, x: f64) -> usize {
        let n = self.cells as i64;
        if self.periodic {
            let k = (x / self.step() + 0.5).floor() as i64;
            k.rem_euclid(n) as usize
        } else {
            let k = (x / self.step()).floor() as i64;
            k.clamp(0, n - 1) as usize
        }
    }

    /// Coordinate difference folded into the fundamental domain.
    pub fn coord_distance(&self, x: f64, y: f64) -> f64 {
        let d = (x - y).abs();
        if self.periodic {
            let d = d.rem_euclid(self.length);
            d.min(self.length - d)
        } else {
            d
        }
    }

    /// Center distance for an index difference.
    fn index_distance(&self, i: usize, j: usize) -> f64 {
        self.steps_between(i, j) as f64 * self.step()
    }

    fn steps_between(&self, i: usize, j: usize) -> usize {
        let k = i.abs_diff(j);
        if self.periodic {
            k.min(self.cells - k)
        } else {
            k
        }
    }

    /// Largest index offset whose center distance stays within `r`.
    fn reach(&self, r: f64) -> usize {
        let k = ((r / self.length + TOL) * self.cells as f64).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.cells)
        }
    }
}

/// Ambient point. One-dimensional spaces use coordinate 0 only.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct Point(pub [f64; 2]);

impl Point {
    pub fn new1(x: f64) -> Self {
        Point([x, 0.0])
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Point([x, y])
    }

    pub fn x(&self) -> f64 {
        self.0[0]
    }

    pub fn y(&self) -> f64 {
        self.0[1]
    }
}

/// Membership bitmask over the cells of one space.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CellSet {
    bits: FixedBitSet,
}

impl CellSet {
    pub fn empty(universe: usize) -> Self {
        CellSet { bits: FixedBitSet::with_capacity(universe) }
    }

    pub fn full(universe: usize) -> Self {
        let mut bits = FixedBitSet::with_capacity(universe);
        bits.insert_range(..);
        CellSet { bits }
    }

    pub fn from_cells<I: IntoIterator<Item = usize>>(universe: usize, cells: I) -> Self {
        let mut s = Self::empty(universe);
        for c in cells {
            s.insert(c);
        }
        s
    }

    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn is_full(&self) -> bool {
        self.len() == self.universe()
    }

    pub fn contains(&self, c: usize) -> bool {
        self.bits.contains(c)
    }

    /// Panics if `c` is outside the universe.
    pub fn insert(&mut self, c: usize) -> bool {
        let was = self.bits.contains(c);
        self.bits.insert(c);
        !was
    }

    pub fn remove(&mut self, c: usize) {
        self.bits.set(c, false);
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn first(&self) -> Option<usize> {
        self.bits.minimum()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub fn union(&self, other: &CellSet) -> CellSet {
        let mut s = self.clone();
        s.union_with(other);
        s
    }

    pub fn intersection(&self, other: &CellSet) -> CellSet {
        let mut s = self.clone();
        s.intersect_with(other);
        s
    }

    pub fn difference(&self, other: &CellSet) -> CellSet {
        let mut s = self.clone();
        s.difference_with(other);
        s
    }

    pub fn complement(&self) -> CellSet {
        let mut s = self.clone();
        s.bits.toggle_range(..);
        s
    }

    pub fn union_with(&mut self, other: &CellSet) {
        self.bits.union_with(&other.bits);
    }

    pub fn intersect_with(&mut self, other: &CellSet) {
        self.bits.intersect_with(&other.bits);
    }

    pub fn difference_with(&mut self, other: &CellSet) {
        self.bits.difference_with(&other.bits);
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.bits.is_subset(&other.bits)
    }

    pub fn is_disjoint(&self, other: &CellSet) -> bool {
        self.bits.is_disjoint(&other.bits)
    }

    pub fn intersects(&self, other: &CellSet) -> bool {
        !self.is_disjoint(other)
    }
}

impl fmt::Debug for CellSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CellSet[{}]", self.universe())?;
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Serialize, Deserialize)]
struct CellSetRepr {
    universe: usize,
    cells: Vec<usize>,
}

impl Serialize for CellSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        CellSetRepr { universe: self.universe(), cells: self.to_vec() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CellSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = CellSetRepr::deserialize(d)?;
        if let Some(&bad) = repr.cells.iter().find(|&&c| c >= repr.universe) {
            return Err(serde::de::Error::custom(format!(
                "cell {bad} outside universe {}",
                repr.universe
            )));
        }
        Ok(CellSet::from_cells(repr.universe, repr.cells))
    }
}

/// Closure, interior and boundary of a cell set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    pub closure: CellSet,
    pub interior: CellSet,
    pub boundary: CellSet,
}

#[derive(Clone, Debug)]
enum Geometry {
    Grid(Vec<Axis>),
    Abstract { dist: Vec<f64> },
}

/// Finite metric model with a symmetric reflexive adjacency relation.
#[derive(Clone, Debug)]
pub struct GridSpace {
    kind: SpaceKind,
    geometry: Geometry,
    n: usize,
    cell_radius: f64,
    adj_offsets: Vec<usize>,
    adj: Vec<u32>,
}

impl GridSpace {
    /// Circle of length 2π split into `n` arcs.
    pub fn circle(n: usize) -> Result<Self> {
        Self::grid(
            SpaceKind::Circle,
            vec![Axis { cells: n, length: std::f64::consts::TAU, periodic: true }],
        )
    }

    /// Unit flat torus with an `n × n` grid and the max-metric.
    pub fn torus2(n: usize) -> Result<Self> {
        let ax = Axis { cells: n, length: 1.0, periodic: true };
        Self::grid(SpaceKind::Torus2, vec![ax, ax])
    }

    /// The interval [0, 1].
    pub fn interval(n: usize) -> Result<Self> {
        Self::grid(SpaceKind::Interval, vec![Axis { cells: n, length: 1.0, periodic: false }])
    }

    pub fn product(axes: Vec<Axis>) -> Result<Self> {
        Self::grid(SpaceKind::Product, axes)
    }

    /// `n` points with the discrete metric and trivial adjacency.
    pub fn abstract_discrete(n: usize) -> Result<Self> {
        let mut dist = vec![1.0; n * n];
        for i in 0..n {
            dist[i * n + i] = 0.0;
        }
        Self::abstract_metric(n, dist, &[])
    }

    /// Abstract space from a row-major distance matrix and extra adjacent pairs.
    pub fn abstract_metric(n: usize, dist: Vec<f64>, adjacent: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::arg("space needs at least one cell"));
        }
        if dist.len() != n * n {
            return Err(Error::arg(format!("distance matrix has {} entries, need {}", dist.len(), n * n)));
        }
        for i in 0..n {
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::arg(format!("bad distance d({i},{j}) = {d}")));
                }
                if (d == 0.0) != (i == j) {
                    return Err(Error::arg(format!("d({i},{j}) = {d} violates definiteness")));
                }
                if (d - dist[j * n + i]).abs() > TOL {
                    return Err(Error::arg(format!("distance matrix not symmetric at ({i},{j})")));
                }
            }
        }
        let mut lists: Vec<Vec<u32>> = (0..n).map(|i| vec![i as u32]).collect();
        for &(a, b) in adjacent {
            if a >= n || b >= n {
                return Err(Error::arg(format!("adjacent pair ({a},{b}) out of range")));
            }
            lists[a].push(b as u32);
            lists[b].push(a as u32);
        }
        let (adj_offsets, adj) = pack(lists);
        Ok(GridSpace {
            kind: SpaceKind::Abstract,
            geometry: Geometry::Abstract { dist },
            n,
            cell_radius: 0.0,
            adj_offsets,
            adj,
        })
    }

    fn grid(kind: SpaceKind, axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::arg("grid spaces have one or two axes"));
        }
        for ax in &axes {
            if ax.cells == 0 {
                return Err(Error::arg("axis needs at least one cell"));
            }
            if !(ax.length.is_finite() && ax.length > 0.0) {
                return Err(Error::arg(format!("axis length {} must be positive", ax.length)));
            }
        }
        let n = axes.iter().map(|a| a.cells).product::<usize>();
        if n > u32::MAX as usize {
            return Err(Error::arg("grid too large"));
        }
        let cell_radius = axes.iter().map(|a| a.step() / 2.0).fold(0.0, f64::max);
        let mut space = GridSpace {
            kind,
            geometry: Geometry::Grid(axes),
            n,
            cell_radius,
            adj_offsets: Vec::new(),
            adj: Vec::new(),
        };
        let lists: Vec<Vec<u32>> = (0..n)
            .map(|c| {
                let mut v = Vec::new();
                space.for_each_offset_cell(c, &[1, 1], |d| v.push(d as u32));
                v
            })
            .collect();
        let (o, a) = pack(lists);
        space.adj_offsets = o;
        space.adj = a;
        Ok(space)
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_grid(&self) -> bool {
        matches!(self.geometry, Geometry::Grid(_))
    }

    pub fn axes(&self) -> &[Axis] {
        match &self.geometry {
            Geometry::Grid(axes) => axes,
            Geometry::Abstract { .. } => &[],
        }
    }

    pub fn dim(&self) -> usize {
        self.axes().len()
    }

    pub fn cell_radius(&self) -> f64 {
        self.cell_radius
    }

    /// Twice the cell radius; the unit in which "cells" are quoted.
    pub fn cell_diameter(&self) -> f64 {
        2.0 * self.cell_radius
    }

    /// Largest distance between any two cell centers.
    pub fn diameter(&self) -> f64 {
        match &self.geometry {
            Geometry::Grid(axes) => axes
                .iter()
                .map(|a| {
                    if a.periodic {
                        a.index_distance(0, a.cells / 2)
                    } else {
                        a.index_distance(0, a.cells - 1)
                    }
                })
                .fold(0.0, f64::max),
            Geometry::Abstract { dist } => dist.iter().copied().fold(0.0, f64::max),
        }
    }

    pub fn empty_set(&self) -> CellSet {
        CellSet::empty(self.n)
    }

    pub fn full_set(&self) -> CellSet {
        CellSet::full(self.n)
    }

    pub fn set_of<I: IntoIterator<Item = usize>>(&self, cells: I) -> CellSet {
        CellSet::from_cells(self.n, cells)
    }

    /// Row-major multi-index of a grid cell.
    pub fn coords(&self, c: usize) -> [usize; 2] {
        match self.axes() {
            [_] => [c, 0],
            [_, b] => [c / b.cells, c % b.cells],
            _ => [c, 0],
        }
    }

    pub fn index(&self, ij: [usize; 2]) -> usize {
        match self.axes() {
            [_, b] => ij[0] * b.cells + ij[1],
            _ => ij[0],
        }
    }

    pub fn center(&self, c: usize) -> Point {
        let ij = self.coords(c);
        let mut p = Point::default();
        for (k, ax) in self.axes().iter().enumerate() {
            p.0[k] = ax.center(ij[k]);
        }
        p
    }

    /// Cell containing an ambient point; `None` on abstract spaces.
    pub fn cell_of(&self, p: Point) -> Option<usize> {
        let axes = self.axes();
        if axes.is_empty() {
            return None;
        }
        let mut ij = [0usize; 2];
        for (k, ax) in axes.iter().enumerate() {
            ij[k] = ax.index_of(p.0[k]);
        }
        Some(self.index(ij))
    }

    /// Metric on ambient points: maximum over axes of the folded differences.
    pub fn point_distance(&self, p: Point, q: Point) -> f64 {
        self.axes()
            .iter()
            .enumerate()
            .map(|(k, ax)| ax.coord_distance(p.0[k], q.0[k]))
            .fold(0.0, f64::max)
    }

    /// Reduce a point into the fundamental domain of every periodic axis.
    pub fn wrap(&self, mut p: Point) -> Point {
        for (k, ax) in self.axes().iter().enumerate() {
            if ax.periodic {
                p.0[k] = p.0[k].rem_euclid(ax.length);
            }
        }
        p
    }

    pub fn metric(&self, a: usize, b: usize) -> Result<f64> {
        if a >= self.n || b >= self.n {
            return Err(Error::arg(format!("cell index out of range: ({a}, {b}) with {} cells", self.n)));
        }
        Ok(self.dist(a, b))
    }

    /// Center distance without bounds checking beyond the slice access.
    pub fn dist(&self, a: usize, b: usize) -> f64 {
        match &self.geometry {
            Geometry::Grid(axes) => {
                let (ia, ib) = (self.coords(a), self.coords(b));
                axes.iter()
                    .enumerate()
                    .map(|(k, ax)| ax.index_distance(ia[k], ib[k]))
                    .fold(0.0, f64::max)
            }
            Geometry::Abstract { dist } => dist[a * self.n + b],
        }
    }

    pub fn neighbors(&self, c: usize) -> &[u32] {
        &self.adj[self.adj_offsets[c]..self.adj_offsets[c + 1]]
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.neighbors(a).binary_search(&(b as u32)).is_ok()
    }

    /// Calls `visit` once for every cell whose multi-index differs from `c`
    /// by at most `reach[k]` along axis `k` (wrapping periodic axes).
    fn for_each_offset_cell(&self, c: usize, reach: &[usize; 2], mut visit: impl FnMut(usize)) {
        let axes = self.axes();
        let ij = self.coords(c);
        let ranges: Vec<Vec<usize>> = axes
            .iter()
            .enumerate()
            .map(|(k, ax)| axis_window(ax, ij[k], reach[k]))
            .collect();
        match ranges.as_slice() {
            [r0] => r0.iter().for_each(|&i| visit(i)),
            [r0, r1] => {
                for &i in r0 {
                    for &j in r1 {
                        visit(self.index([i, j]));
                    }
                }
            }
            _ => {}
        }
    }

    /// Cells whose centers lie within `r` of the center of `c`, unpadded.
    /// Output is appended to `out` in ascending order on grids.
    pub fn ball_cells(&self, c: usize, r: f64, out: &mut Vec<u32>) {
        match &self.geometry {
            Geometry::Grid(axes) => {
                let mut reach = [0usize; 2];
                for (k, ax) in axes.iter().enumerate() {
                    reach[k] = ax.reach(r);
                }
                self.for_each_offset_cell(c, &reach, |d| out.push(d as u32));
            }
            Geometry::Abstract { dist } => {
                let row = &dist[c * self.n..(c + 1) * self.n];
                out.extend(
                    row.iter()
                        .enumerate()
                        .filter(|(_, &d)| d <= r + TOL)
                        .map(|(j, _)| j as u32),
                );
            }
        }
    }

    /// Outer enclosure of B_r(S): cells within `r + cell_radius` of some
    /// center in `s`.
    pub fn closed_neighborhood(&self, s: &CellSet, r: f64) -> CellSet {
        let r = r.max(0.0) + self.cell_radius;
        let mut out = self.empty_set();
        if s.is_empty() {
            return out;
        }
        match &self.geometry {
            Geometry::Grid(axes) => {
                let reach: Vec<usize> = axes.iter().map(|a| a.reach(r)).collect();
                let stencil: usize = reach.iter().map(|k| 2 * k + 1).product();
                if s.len().saturating_mul(stencil) <= 4 * self.n {
                    let mut buf = Vec::new();
                    for c in s.iter() {
                        buf.clear();
                        self.ball_cells(c, r, &mut buf);
                        for &d in &buf {
                            out.insert(d as usize);
                        }
                    }
                } else {
                    out = s.clone();
                    for (k, &kk) in reach.iter().enumerate() {
                        out = self.dilate_axis(&out, k, kk);
                    }
                }
            }
            Geometry::Abstract { .. } => {
                let mut buf = Vec::new();
                for c in s.iter() {
                    buf.clear();
                    self.ball_cells(c, r, &mut buf);
                    for &d in &buf {
                        out.insert(d as usize);
                    }
                }
            }
        }
        out
    }

    /// Dilation along one axis by `k` index steps, using per-line prefix counts.
    fn dilate_axis(&self, s: &CellSet, axis: usize, k: usize) -> CellSet {
        let axes = self.axes();
        let ax = axes[axis];
        let n = ax.cells;
        let (lines, stride) = match (axes.len(), axis) {
            (1, _) => (1, 1),
            (_, 0) => (axes[1].cells, axes[1].cells),
            _ => (axes[0].cells, 1),
        };
        let mut out = self.empty_set();
        let mut line = vec![0u32; n];
        let mut prefix = vec![0u32; n + 1];
        for l in 0..lines {
            let base = if axes.len() == 1 {
                0
            } else if axis == 0 {
                l
            } else {
                l * axes[1].cells
            };
            for (i, v) in line.iter_mut().enumerate() {
                *v = s.contains(base + i * stride) as u32;
            }
            for i in 0..n {
                prefix[i + 1] = prefix[i] + line[i];
            }
            if prefix[n] == 0 {
                continue;
            }
            let count = |lo: i64, hi: i64| -> u32 {
                // inclusive window [lo, hi] in index space, wrapped if periodic
                if ax.periodic {
                    if hi - lo + 1 >= n as i64 {
                        return prefix[n];
                    }
                    let a = lo.rem_euclid(n as i64) as usize;
                    let b = hi.rem_euclid(n as i64) as usize;
                    if a <= b {
                        prefix[b + 1] - prefix[a]
                    } else {
                        prefix[n] - prefix[a] + prefix[b + 1]
                    }
                } else {
                    let a = lo.max(0) as usize;
                    let b = hi.min(n as i64 - 1) as usize;
                    prefix[b + 1] - prefix[a]
                }
            };
            for i in 0..n {
                if count(i as i64 - k as i64, i as i64 + k as i64) > 0 {
                    out.insert(base + i * stride);
                }
            }
        }
        out
    }

    pub fn closure(&self, s: &CellSet) -> CellSet {
        let mut out = s.clone();
        for c in s.iter() {
            for &d in self.neighbors(c) {
                out.insert(d as usize);
            }
        }
        out
    }

    pub fn interior(&self, s: &CellSet) -> CellSet {
        self.set_of(s.iter().filter(|&c| self.neighbors(c).iter().all(|&d| s.contains(d as usize))))
    }

    pub fn boundary(&self, s: &CellSet) -> CellSet {
        self.closure(s).difference(&self.interior(s))
    }

    pub fn topology(&self, s: &CellSet) -> Topology {
        let closure = self.closure(s);
        let interior = self.interior(s);
        let boundary = closure.difference(&interior);
        Topology { closure, interior, boundary }
    }

    pub fn is_clopen(&self, s: &CellSet) -> bool {
        self.boundary(s).is_empty()
    }

    /// Regular-open test: `s` equals the interior of its closure.
    pub fn is_grid_open(&self, s: &CellSet) -> bool {
        self.interior(&self.closure(s)) == *s
    }

    /// Maximal adjacency-connected pieces, ordered by smallest cell.
    pub fn connected_components(&self, s: &CellSet) -> Vec<CellSet> {
        let mut seen = self.empty_set();
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in s.iter() {
            if seen.contains(start) {
                continue;
            }
            let mut comp = self.empty_set();
            seen.insert(start);
            queue.push_back(start);
            while let Some(c) = queue.pop_front() {
                comp.insert(c);
                for &d in self.neighbors(c) {
                    let d = d as usize;
                    if s.contains(d) && seen.insert(d) {
                        queue.push_back(d);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.connected_components(&self.full_set()).len() == 1
    }

    /// Distance from cell `c` to the nearest center of `s` (+∞ if empty).
    pub fn distance_to_set(&self, c: usize, s: &CellSet) -> f64 {
        s.iter().map(|d| self.dist(c, d)).fold(f64::INFINITY, f64::min)
    }

    /// sup over `t` of the distance to `s`; 0 for empty `t`.
    pub fn directed_distance(&self, t: &CellSet, s: &CellSet) -> f64 {
        t.iter().map(|c| self.distance_to_set(c, s)).fold(0.0, f64::max)
    }

    /// Smallest center distance between the two sets (+∞ if either is empty).
    pub fn set_separation(&self, s: &CellSet, t: &CellSet) -> f64 {
        s.iter().map(|c| self.distance_to_set(c, t)).fold(f64::INFINITY, f64::min)
    }

    pub fn hausdorff_distance(&self, s: &CellSet, t: &CellSet) -> Result<f64> {
        if s.is_empty() || t.is_empty() {
            return Err(Error::arg("Hausdorff distance needs two nonempty sets"));
        }
        Ok(self.directed_distance(s, t).max(self.directed_distance(t, s)))
    }

    /// Cells of `s` whose centers are farther than `r` from every center
    /// outside `s` (for `r` at least one cell radius).
    pub fn eroded(&self, s: &CellSet, r: f64) -> CellSet {
        let outside = s.complement();
        if outside.is_empty() {
            return s.clone();
        }
        s.difference(&self.closed_neighborhood(&outside, (r - self.cell_radius).max(0.0)))
    }
}

fn axis_window(ax: &Axis, i: usize, k: usize) -> Vec<usize> {
    let n = ax.cells as i64;
    let k = k as i64;
    if ax.periodic {
        if 2 * k + 1 >= n {
            return (0..ax.cells).collect();
        }
        let mut v: Vec<usize> = (-k..=k).map(|o| (i as i64 + o).rem_euclid(n) as usize).collect();
        v.sort_unstable();
        v
    } else {
        let lo = (i as i64 - k).max(0);
        let hi = (i as i64 + k).min(n - 1);
        (lo..=hi).map(|x| x as usize).collect()
    }
}

fn pack(lists: Vec<Vec<u32>>) -> (Vec<usize>, Vec<u32>) {
    let mut offsets = Vec::with_capacity(lists.len() + 1);
    let mut flat = Vec::new();
    offsets.push(0);
    for mut l in lists {
        l.sort_unstable();
        l.dedup();
        flat.extend_from_slice(&l);
        offsets.push(flat.len());
    }
    (offsets, flat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn brute_neighborhood(sp: &GridSpace, s: &CellSet, r: f64) -> CellSet {
        let pad = r + sp.cell_radius();
        sp.set_of((0..sp.len()).filter(|&c| s.iter().any(|d| sp.dist(c, d) <= pad + 1e-12)))
    }

    #[test]
    fn circle_metric_examples() {
        let sp = GridSpace::circle(4).unwrap();
        assert!((sp.metric(0, 2).unwrap() - PI).abs() < 1e-15);
        assert_eq!(sp.metric(3, 3).unwrap(), 0.0);
        assert!(sp.metric(0, 4).is_err());
    }

    #[test]
    fn torus_max_metric() {
        let sp = GridSpace::torus2(10).unwrap();
        let a = sp.index([0, 0]);
        let b = sp.index([5, 5]);
        assert!((sp.metric(a, b).unwrap() - 0.5).abs() < 1e-15);
        assert!((sp.metric(a, sp.index([9, 2])).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn neighborhood_counts_on_circle() {
        let sp = GridSpace::circle(360).unwrap();
        let s = sp.set_of([0]);
        let step = sp.cell_diameter();
        let nb = sp.closed_neighborhood(&s, 5.0 * step);
        assert_eq!(nb, brute_neighborhood(&sp, &s, 5.0 * step));
        assert_eq!(nb.len(), 11);
        assert!(nb.contains(355) && nb.contains(5) && !nb.contains(6));
        assert_eq!(sp.closed_neighborhood(&s, 0.0), s);
        assert!(sp.closed_neighborhood(&sp.empty_set(), 1.0).is_empty());
        assert!(sp.closed_neighborhood(&sp.full_set(), 0.3).is_full());
    }

    #[test]
    fn dilation_path_matches_stencil_path() {
        let sp = GridSpace::torus2(23).unwrap();
        let s = sp.set_of((0..sp.len()).filter(|c| c % 7 == 0));
        let r = 2.3 * sp.cell_diameter();
        assert_eq!(sp.closed_neighborhood(&s, r), brute_neighborhood(&sp, &s, r));
        let iv = GridSpace::interval(40).unwrap();
        let t = iv.set_of((0..40).filter(|c| c % 9 == 0));
        assert_eq!(iv.closed_neighborhood(&t, 0.07), brute_neighborhood(&iv, &t, 0.07));
    }

    #[test]
    fn topology_of_trivial_sets() {
        let sp = GridSpace::circle(12).unwrap();
        let t = sp.topology(&sp.empty_set());
        assert!(t.closure.is_empty() && t.interior.is_empty() && t.boundary.is_empty());
        let t = sp.topology(&sp.full_set());
        assert!(t.closure.is_full() && t.interior.is_full() && t.boundary.is_empty());
        assert!(sp.is_clopen(&sp.full_set()));
        assert!(sp.is_clopen(&sp.empty_set()));
        assert!(!sp.is_clopen(&sp.set_of([3, 4, 5])));
    }

    #[test]
    fn arc_boundary_has_two_pieces() {
        let sp = GridSpace::circle(360).unwrap();
        let arc = sp.set_of(90..=270);
        let b = sp.boundary(&arc);
        assert_eq!(b.to_vec(), vec![89, 90, 270, 271]);
        assert_eq!(sp.connected_components(&b).len(), 2);
    }

    #[test]
    fn components_examples() {
        let sp = GridSpace::circle(360).unwrap();
        assert!(sp.connected_components(&sp.empty_set()).is_empty());
        let s = sp.set_of([358, 359, 0, 1, 179, 180, 181]);
        let comps = sp.connected_components(&s);
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].to_vec(), vec![0, 1, 358, 359]);
        let tor = GridSpace::torus2(9).unwrap();
        assert_eq!(tor.connected_components(&tor.full_set()).len(), 1);
    }

    #[test]
    fn hausdorff_examples() {
        let sp = GridSpace::circle(360).unwrap();
        let a = sp.set_of([0]);
        assert_eq!(sp.hausdorff_distance(&a, &a).unwrap(), 0.0);
        assert!((sp.hausdorff_distance(&a, &sp.set_of([180])).unwrap() - PI).abs() < 1e-12);
        assert!((sp.hausdorff_distance(&a, &sp.set_of([0, 90])).unwrap() - PI / 2.0).abs() < 1e-12);
        assert!(sp.hausdorff_distance(&a, &sp.empty_set()).is_err());
    }

    #[test]
    fn adjacency_is_symmetric_and_reflexive() {
        for sp in [GridSpace::circle(7).unwrap(), GridSpace::torus2(5).unwrap(), GridSpace::interval(6).unwrap()] {
            for c in 0..sp.len() {
                assert!(sp.is_adjacent(c, c));
                for &d in sp.neighbors(c) {
                    assert!(sp.is_adjacent(d as usize, c));
                    assert!(sp.dist(c, d as usize) <= sp.cell_diameter() + 1e-12);
                }
            }
        }
        let iv = GridSpace::interval(6).unwrap();
        assert_eq!(iv.neighbors(0), &[0, 1]);
    }

    #[test]
    fn abstract_space_validation() {
        assert!(GridSpace::abstract_metric(2, vec![0.0, 1.0, 2.0, 0.0], &[]).is_err());
        assert!(GridSpace::abstract_metric(2, vec![0.0, 0.0, 0.0, 0.0], &[]).is_err());
        let sp = GridSpace::abstract_discrete(4).unwrap();
        assert_eq!(sp.neighbors(2), &[2]);
        // every subset is clopen under the discrete topology
        assert!(sp.is_clopen(&sp.set_of([1, 3])));
        assert_eq!(sp.closed_neighborhood(&sp.set_of([1]), 0.5).to_vec(), vec![1]);
        assert!(sp.closed_neighborhood(&sp.set_of([1]), 1.0).is_full());
    }

    #[test]
    fn cell_lookup_round_trips() {
        let sp = GridSpace::torus2(13).unwrap();
        for c in 0..sp.len() {
            assert_eq!(sp.cell_of(sp.center(c)), Some(c));
        }
        let iv = GridSpace::interval(10).unwrap();
        assert_eq!(iv.cell_of(Point::new1(1.0)), Some(9));
        assert_eq!(iv.cell_of(Point::new1(0.0)), Some(0));
        let ci = GridSpace::circle(8).unwrap();
        assert_eq!(ci.cell_of(Point::new1(-0.01)), Some(0));
        assert_eq!(ci.cell_of(Point::new1(2.0 * PI - 0.01)), Some(0));
    }

    #[test]
    fn cellset_serde_round_trip() {
        let s = CellSet::from_cells(10, [1, 4, 9]);
        let js = serde_json::to_string(&s).unwrap();
        assert_eq!(js, r#"{"universe":10,"cells":[1,4,9]}"#);
        let back: CellSet = serde_json::from_str(&js).unwrap();
        assert_eq!(back, s);
        assert!(serde_json::from_str::<CellSet>(r#"{"universe":3,"cells":[5]}"#).is_err());
    }

    fn arb_space() -> impl Strategy<Value = GridSpace> {
        prop_oneof![
            (3usize..60).prop_map(|n| GridSpace::circle(n).unwrap()),
            (3usize..12).prop_map(|n| GridSpace::torus2(n).unwrap()),
            (3usize..60).prop_map(|n| GridSpace::interval(n).unwrap()),
        ]
    }

    fn arb_space_and_sets() -> impl Strategy<Value = (GridSpace, CellSet, CellSet)> {
        arb_space().prop_flat_map(|sp| {
            let n = sp.len();
            (
                Just(sp),
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(any::<bool>(), n),
            )
                .prop_map(move |(sp, a, b)| {
                    let s = CellSet::from_cells(n, (0..n).filter(|&i| a[i]));
                    let t = CellSet::from_cells(n, (0..n).filter(|&i| b[i]));
                    (sp, s, t)
                })
        })
    }

    proptest! {
        #[test]
        fn interior_subset_closure((sp, s, _t) in arb_space_and_sets()) {
            let t = sp.topology(&s);
            prop_assert!(t.interior.is_subset(&s));
            prop_assert!(s.is_subset(&t.closure));
            prop_assert_eq!(t.boundary, t.closure.difference(&t.interior));
        }

        #[test]
        fn connected_pieces_cross_boundary((sp, a, s) in arb_space_and_sets()) {
            // any connected A meeting both S and its complement meets ∂S
            let b = sp.boundary(&s);
            for piece in sp.connected_components(&a) {
                if piece.intersects(&s) && !piece.is_subset(&s) {
                    prop_assert!(piece.intersects(&b));
                }
            }
        }

        #[test]
        fn neighborhood_monotone((sp, s, t) in arb_space_and_sets(), r1 in 0.0f64..0.6, dr in 0.0f64..0.4) {
            let small = sp.closed_neighborhood(&s, r1);
            prop_assert!(s.is_subset(&small));
            prop_assert!(small.is_subset(&sp.closed_neighborhood(&s, r1 + dr)));
            prop_assert!(small.is_subset(&sp.closed_neighborhood(&s.union(&t), r1)));
            prop_assert_eq!(small, brute_neighborhood(&sp, &s, r1));
        }

        #[test]
        fn hausdorff_is_metric((sp, s, t) in arb_space_and_sets(), seed in 0usize..1000) {
            prop_assume!(!s.is_empty() && !t.is_empty());
            let u = sp.set_of([seed % sp.len()]);
            let st = sp.hausdorff_distance(&s, &t).unwrap();
            prop_assert!((st - sp.hausdorff_distance(&t, &s).unwrap()).abs() < 1e-15);
            let su = sp.hausdorff_distance(&s, &u).unwrap();
            let ut = sp.hausdorff_distance(&u, &t).unwrap();
            prop_assert!(st <= su + ut + 1e-12);
            prop_assert_eq!(st == 0.0, s == t);
        }

        #[test]
        fn only_trivial_sets_are_clopen((sp, s, _t) in arb_space_and_sets()) {
            prop_assert_eq!(sp.is_clopen(&s), s.is_empty() || s.is_full());
        }

        #[test]
        fn metric_triangle((sp, _s, _t) in arb_space_and_sets(), a in 0usize..10_000, b in 0usize..10_000, c in 0usize..10_000) {
            let n = sp.len();
            let (a, b, c) = (a % n, b % n, c % n);
            prop_assert!(sp.dist(a, c) <= sp.dist(a, b) + sp.dist(b, c) + 1e-12);
            prop_assert_eq!(sp.dist(a, b), sp.dist(b, a));
            prop_assert_eq!(sp.dist(a, b) == 0.0, a == b);
        }
    }
}
