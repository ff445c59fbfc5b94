//! Exact shadowing for hyperbolic toral automorphisms x ↦ A·x mod 1.

use serde::{Deserialize, Serialize};

use super::{ShadowMethod, ShadowingCertificate, TailErrors};
use crate::error::{Error, Result};
use crate::space::Point;
use crate::systems::{LimitPseudoOrbit, PseudoOrbit};

/// Largest accepted lifted step error (fraction of the fundamental domain).
pub const LIFT_LIMIT: f64 = 0.25;

/// Residual below which a computed shadow orbit counts as a true orbit up to
/// the stated slack.
pub const RESIDUAL_LIMIT: f64 = 1e-12;

/// Indices within this distance of either end feel the boundary freedom.
const EDGE: usize = 60;

/// Eigen-data of a 2×2 integer matrix with det 1 and trace > 2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicSplitting {
    pub matrix: [[i64; 2]; 2],
    pub lambda_u: f64,
    pub lambda_s: f64,
    /// Unit eigenvectors, first nonzero coordinate positive.
    pub unstable: [f64; 2],
    pub stable: [f64; 2],
    /// K = 1/(1−λ_s) + 1/(λ_u−1).
    pub shadowing_constant: f64,
    dual_u: [f64; 2],
    dual_s: [f64; 2],
}

impl HyperbolicSplitting {
    pub fn new(matrix: [[i64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = matrix;
        if matrix.iter().flatten().any(|v| v.abs() > 30) {
            return Err(Error::arg("matrix entries must be at most 30 in absolute value"));
        }
        if a * d - b * c != 1 {
            return Err(Error::arg(format!("determinant must be 1, got {}", a * d - b * c)));
        }
        let t = a + d;
        if t <= 2 {
            return Err(Error::arg(format!("trace {t} does not give real eigenvalues λ_u > 1 > λ_s > 0")));
        }
        let disc = ((t * t - 4) as f64).sqrt();
        let lambda_u = (t as f64 + disc) / 2.0;
        // the product is exactly 1
        let lambda_s = 1.0 / lambda_u;
        let eig = |l: f64| -> [f64; 2] {
            let v = if b != 0 { [b as f64, l - a as f64] } else { [l - d as f64, c as f64] };
            let n = v[0].hypot(v[1]);
            let s = if v[0] < 0.0 || (v[0] == 0.0 && v[1] < 0.0) { -1.0 } else { 1.0 };
            [s * v[0] / n, s * v[1] / n]
        };
        let unstable = eig(lambda_u);
        let stable = eig(lambda_s);
        let det = unstable[0] * stable[1] - stable[0] * unstable[1];
        let dual_u = [stable[1] / det, -stable[0] / det];
        let dual_s = [-unstable[1] / det, unstable[0] / det];
        Ok(HyperbolicSplitting {
            matrix,
            lambda_u,
            lambda_s,
            unstable,
            stable,
            shadowing_constant: constant_from(lambda_u, lambda_s),
            dual_u,
            dual_s,
        })
    }

    /// The cat map [[2,1],[1,1]].
    pub fn cat() -> Self {
        Self::new([[2, 1], [1, 1]]).expect("cat matrix is hyperbolic")
    }

    /// Coordinates (stable, unstable) of `v` in the eigenbasis.
    pub fn split(&self, v: [f64; 2]) -> (f64, f64) {
        (
            self.dual_s[0] * v[0] + self.dual_s[1] * v[1],
            self.dual_u[0] * v[0] + self.dual_u[1] * v[1],
        )
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        let m = self.matrix;
        [m[0][0] as f64 * v[0] + m[0][1] as f64 * v[1], m[1][0] as f64 * v[0] + m[1][1] as f64 * v[1]]
    }

    /// Max-norm gain: worst row of |P_s|/(1−λ_s) + |P_u|/(λ_u−1), where
    /// P_s, P_u are the spectral projections. Every δ-chain (max-norm
    /// step errors) has a true orbit within this multiple of δ.
    pub fn max_norm_gain(&self) -> f64 {
        let l1 = |v: [f64; 2]| v[0].abs() + v[1].abs();
        (0..2)
            .map(|r| {
                self.stable[r].abs() * l1(self.dual_s) / (1.0 - self.lambda_s)
                    + self.unstable[r].abs() * l1(self.dual_u) / (self.lambda_u - 1.0)
            })
            .fold(0.0, f64::max)
    }

    /// Max-norm size of the spectral projections (‖P_s‖∞, ‖P_u‖∞).
    pub fn projection_norms(&self) -> (f64, f64) {
        let l1 = |v: [f64; 2]| v[0].abs() + v[1].abs();
        let ps = self.stable[0].abs().max(self.stable[1].abs()) * l1(self.dual_s);
        let pu = self.unstable[0].abs().max(self.unstable[1].abs()) * l1(self.dual_u);
        (ps, pu)
    }
}

pub(crate) fn constant_from(lambda_u: f64, lambda_s: f64) -> f64 {
    1.0 / (1.0 - lambda_s) + 1.0 / (lambda_u - 1.0)
}

/// Solver output: the shadowing point, the a-priori bound and the evidence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearShadow {
    pub x: Point,
    /// a-priori max-norm bound, `max_norm_gain · max step error`
    pub bound: f64,
    pub certificate: ShadowingCertificate,
}

// Fixed point arithmetic on the torus, scale 2^120.
const FX_BITS: i32 = 120;
const FX_ONE: i128 = 1 << FX_BITS;

fn to_fx(v: f64) -> i128 {
    (v * 2f64.powi(FX_BITS)).round() as i128
}

fn from_fx(v: i128) -> f64 {
    v as f64 * 2f64.powi(-FX_BITS)
}

/// Representative of `v` mod 1 in (−1/2, 1/2].
fn centered(v: i128) -> i128 {
    let r = v.rem_euclid(FX_ONE);
    if r > FX_ONE / 2 {
        r - FX_ONE
    } else {
        r
    }
}

fn fx_point(p: &Point) -> [i128; 2] {
    [to_fx(p.x()).rem_euclid(FX_ONE), to_fx(p.y()).rem_euclid(FX_ONE)]
}

fn fx_apply(m: &[[i64; 2]; 2], p: [i128; 2]) -> [i128; 2] {
    [
        (m[0][0] as i128 * p[0] + m[0][1] as i128 * p[1]).rem_euclid(FX_ONE),
        (m[1][0] as i128 * p[0] + m[1][1] as i128 * p[1]).rem_euclid(FX_ONE),
    ]
}

/// Lifted step errors e_i = x_{i+1} − A·x_i, nearest representative.
fn lifted_errors(h: &HyperbolicSplitting, points: &[Point]) -> Result<Vec<[f64; 2]>> {
    let fx: Vec<[i128; 2]> = points.iter().map(fx_point).collect();
    let mut out = Vec::with_capacity(points.len().saturating_sub(1));
    for (i, w) in fx.windows(2).enumerate() {
        let img = fx_apply(&h.matrix, w[0]);
        let e = [from_fx(centered(w[1][0] - img[0])), from_fx(centered(w[1][1] - img[1]))];
        if e[0].abs().max(e[1].abs()) > LIFT_LIMIT {
            return Err(Error::AmbiguousLift(format!(
                "step {i} has error {:.3} beyond {LIFT_LIMIT}",
                e[0].abs().max(e[1].abs())
            )));
        }
        out.push(e);
    }
    Ok(out)
}

/// Corrections c_i (y_i = x_i + c_i is a true orbit) with the stable part
/// pinned to zero at the first index and the unstable part at the last.
fn base_corrections(h: &HyperbolicSplitting, errors: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let k = errors.len();
    let split: Vec<(f64, f64)> = errors.iter().map(|&e| h.split(e)).collect();
    let mut s = vec![0.0; k + 1];
    for i in 0..k {
        s[i + 1] = h.lambda_s * s[i] - split[i].0;
    }
    let mut u = vec![0.0; k + 1];
    for i in (0..k).rev() {
        u[i] = h.lambda_s * (u[i + 1] + split[i].1);
    }
    (0..=k)
        .map(|i| {
            [
                s[i] * h.stable[0] + u[i] * h.unstable[0],
                s[i] * h.stable[1] + u[i] * h.unstable[1],
            ]
        })
        .collect()
}

fn norm_inf(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Golden-section minimum of a convex function on [lo, hi].
fn golden(mut lo: f64, mut hi: f64, iters: usize, f: impl Fn(f64) -> f64) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_894_9;
    let mut a = hi - R * (hi - lo);
    let mut b = lo + R * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - R * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + R * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        (a, fa)
    } else {
        (b, fb)
    }
}

/// Uses the two free parameters of the true-orbit family (stable amplitude
/// at the start, unstable amplitude at the end) to minimize the sup error.
fn minimax_polish(h: &HyperbolicSplitting, c: &mut [[f64; 2]]) {
    let n = c.len();
    let m = c.iter().map(|&v| norm_inf(v)).fold(0.0, f64::max);
    if m == 0.0 {
        return;
    }
    let head: Vec<usize> = (0..n.min(EDGE)).collect();
    let tail: Vec<usize> = (n.saturating_sub(EDGE).max(head.len())..n).collect();
    let middle = c[head.len()..n - tail.len()].iter().map(|&v| norm_inf(v)).fold(0.0, f64::max);
    let pow_s: Vec<f64> = (0..n.min(EDGE)).map(|i| h.lambda_s.powi(i as i32)).collect();
    let last = n - 1;
    let weight = |i: usize, from_end: bool| -> f64 {
        let j = if from_end { last - i } else { i };
        pow_s.get(j).copied().unwrap_or(0.0)
    };
    let cost = |alpha: f64, beta: f64| -> f64 {
        let mut worst = middle;
        for &i in head.iter().chain(&tail) {
            let (ws, wu) = (alpha * weight(i, false), beta * weight(i, true));
            let v = [
                c[i][0] + ws * h.stable[0] + wu * h.unstable[0],
                c[i][1] + ws * h.stable[1] + wu * h.unstable[1],
            ];
            worst = worst.max(norm_inf(v));
        }
        worst
    };
    // |α| beyond 4m already makes the first error exceed m
    let r = 4.0 * m;
    let (alpha, _) = golden(-r, r, 60, |a| golden(-r, r, 60, |b| cost(a, b)).1);
    let (beta, best) = golden(-r, r, 60, |b| cost(alpha, b));
    if best < cost(0.0, 0.0) {
        for i in 0..n {
            let (ws, wu) = (alpha * weight(i, false), beta * weight(i, true));
            c[i][0] += ws * h.stable[0] + wu * h.unstable[0];
            c[i][1] += ws * h.stable[1] + wu * h.unstable[1];
        }
    }
}

/// Shadow orbit y_i = x_i + c_i in fixed point, its exact one-step residual
/// and the recomputed per-index errors.
fn certify(h: &HyperbolicSplitting, points: &[Point], c: &[[f64; 2]]) -> (Vec<Point>, Vec<f64>, f64) {
    let ys: Vec<[i128; 2]> = points
        .iter()
        .zip(c)
        .map(|(p, ci)| {
            let x = fx_point(p);
            [(x[0] + to_fx(ci[0])).rem_euclid(FX_ONE), (x[1] + to_fx(ci[1])).rem_euclid(FX_ONE)]
        })
        .collect();
    let mut residual = 0.0f64;
    for w in ys.windows(2) {
        let img = fx_apply(&h.matrix, w[0]);
        let r = [from_fx(centered(w[1][0] - img[0])), from_fx(centered(w[1][1] - img[1]))];
        residual = residual.max(norm_inf(r));
    }
    let errors = points
        .iter()
        .zip(&ys)
        .map(|(p, y)| {
            let x = fx_point(p);
            norm_inf([from_fx(centered(y[0] - x[0])), from_fx(centered(y[1] - x[1]))])
        })
        .collect();
    let orbit = ys.iter().map(|y| Point::new2(from_fx(y[0]), from_fx(y[1]))).collect();
    (orbit, errors, residual)
}

fn certificate(
    h: &HyperbolicSplitting,
    points: &[Point],
    c: &[[f64; 2]],
    start: usize,
    tails: Option<usize>,
) -> ShadowingCertificate {
    let (orbit, errors, residual) = certify(h, points, c);
    let sup_error = errors.iter().copied().fold(0.0, f64::max);
    let solver_sup = c.iter().map(|&v| norm_inf(v)).fold(0.0, f64::max);
    let tail_errors = tails.map(|m| TailErrors {
        backward: (0..=m).map(|j| errors[m - j]).collect(),
        forward: (0..=m).map(|j| errors[m + j]).collect(),
    });
    ShadowingCertificate {
        orbit_start: orbit[start],
        sup_error,
        tail_errors,
        method: ShadowMethod::ExactLinear,
        verified: residual <= RESIDUAL_LIMIT && (sup_error - solver_sup).abs() <= 1e-10,
        residual,
        rigorous_bound: sup_error + h.max_norm_gain() * residual,
        shadow_orbit: orbit,
    }
}

/// Shadowing point of a finite chain under x ↦ A·x mod 1.
///
/// The stable error components are summed forward and the unstable ones
/// backward from the terminal end. The two remaining free parameters are
/// then tuned to minimize the sup error.
pub fn shadow_linear_hyperbolic(h: &HyperbolicSplitting, po: &PseudoOrbit) -> Result<LinearShadow> {
    let errors = lifted_errors(h, &po.points)?;
    let mut c = base_corrections(h, &errors);
    minimax_polish(h, &mut c);
    let delta = errors.iter().map(|&e| norm_inf(e)).fold(0.0, f64::max);
    let certificate = certificate(h, &po.points, &c, 0, None);
    Ok(LinearShadow { x: certificate.orbit_start, bound: h.max_norm_gain() * delta, certificate })
}

/// Limit-shadowing point of a windowed limit-pseudo-orbit: corrections are
/// pinned at both window ends, so they inherit the decay of the step errors.
pub fn shadow_linear_limit(h: &HyperbolicSplitting, lpo: &LimitPseudoOrbit) -> Result<LinearShadow> {
    let errors = lifted_errors(h, &lpo.points)?;
    let c = base_corrections(h, &errors);
    let delta = errors.iter().map(|&e| norm_inf(e)).fold(0.0, f64::max);
    let certificate = certificate(h, &lpo.points, &c, lpo.m, Some(lpo.m));
    Ok(LinearShadow { x: certificate.orbit_start, bound: h.max_norm_gain() * delta, certificate })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shadowing::verify_shadowing;
    use crate::systems::{generate_pseudo_orbit, Noise, PointMap};

    fn chain_with_defect(f: &PointMap, x0: Point, k: usize, j: usize, e: [f64; 2]) -> PseudoOrbit {
        let mut pts = vec![x0];
        for i in 0..k {
            let y = f.forward(pts[i]);
            let y = if i == j { f.normalize(Point::new2(y.x() + e[0], y.y() + e[1])) } else { y };
            pts.push(y);
        }
        PseudoOrbit::from_points(f, pts, norm_inf(e)).unwrap()
    }

    #[test]
    fn cat_constants() {
        let h = HyperbolicSplitting::cat();
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((h.lambda_u - phi * phi).abs() < 1e-12);
        assert!((h.lambda_u * h.lambda_s - 1.0).abs() < 1e-12);
        assert!((h.shadowing_constant - 5f64.sqrt()).abs() < 1e-12);
        assert!((h.shadowing_constant - constant_from(h.lambda_u, h.lambda_s)).abs() < 1e-12);
        // symmetric matrix: orthonormal eigenvectors
        let dot = h.stable[0] * h.unstable[0] + h.stable[1] * h.unstable[1];
        assert!(dot.abs() < 1e-12);
        for v in [h.stable, h.unstable] {
            assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-12);
        }
        // A·v = λ·v
        let av = h.apply(h.unstable);
        assert!((av[0] - h.lambda_u * h.unstable[0]).abs() < 1e-12);
        let av = h.apply(h.stable);
        assert!((av[1] - h.lambda_s * h.stable[1]).abs() < 1e-12);
        assert!(h.max_norm_gain() > h.shadowing_constant && h.max_norm_gain() < 2.5);
    }

    #[test]
    fn rejects_non_hyperbolic() {
        assert!(HyperbolicSplitting::new([[1, 1], [0, 1]]).is_err());
        assert!(HyperbolicSplitting::new([[2, 1], [1, 2]]).is_err());
        assert!(HyperbolicSplitting::new([[0, -1], [1, 0]]).is_err());
        assert!(HyperbolicSplitting::new([[3, 1], [2, 1]]).is_ok());
    }

    #[test]
    fn split_round_trips() {
        let h = HyperbolicSplitting::new([[3, 1], [2, 1]]).unwrap();
        let v = [0.3, -0.7];
        let (s, u) = h.split(v);
        let back = [s * h.stable[0] + u * h.unstable[0], s * h.stable[1] + u * h.unstable[1]];
        assert!((back[0] - v[0]).abs() < 1e-14 && (back[1] - v[1]).abs() < 1e-14);
    }

    #[test]
    fn zero_error_chain_is_its_own_shadow() {
        let f = PointMap::cat_torus();
        let po = generate_pseudo_orbit(&f, Point::new2(0.3, 0.7), 12, 0.0, Noise::Uniform, 1).unwrap();
        let s = shadow_linear_hyperbolic(&HyperbolicSplitting::cat(), &po).unwrap();
        // the float chain carries rounding of order 1e-17 per step
        assert!(s.certificate.sup_error < 1e-15);
        assert!(s.bound < 1e-15);
        assert!(f.point_distance(s.x, po.points[0]) < 1e-15);
        assert!(s.certificate.verified);
    }

    #[test]
    fn large_errors_are_ambiguous() {
        let pts = vec![Point::new2(0.1, 0.1), Point::new2(0.7, 0.6)];
        let po = PseudoOrbit { points: pts, delta: 0.5, step_errors: vec![0.4] };
        assert!(matches!(
            shadow_linear_hyperbolic(&HyperbolicSplitting::cat(), &po),
            Err(Error::AmbiguousLift(_))
        ));
    }

    #[test]
    fn single_defect_decays_both_ways() {
        let f = PointMap::cat_torus();
        let h = HyperbolicSplitting::cat();
        let po = chain_with_defect(&f, Point::new2(0.21, 0.62), 40, 20, [1e-6, 0.0]);
        let c = base_corrections(&h, &lifted_errors(&h, &po.points).unwrap());
        let e: Vec<f64> = c.iter().map(|&v| norm_inf(v)).collect();
        // before the defect the error shrinks backward at rate 1/λ_u, after it forward at λ_s
        // far from the defect the chain's own rounding (1e-17) takes over
        for i in 12..20 {
            let r = e[i - 1] / e[i];
            assert!((r - h.lambda_s).abs() < 1e-6, "backward ratio {r} at {i}");
        }
        for i in 21..29 {
            let r = e[i + 1] / e[i];
            assert!((r - h.lambda_s).abs() < 1e-6, "forward ratio {r} at {i}");
        }
        let s = shadow_linear_hyperbolic(&h, &po).unwrap();
        assert!(s.certificate.verified);
        assert!(s.certificate.sup_error <= e.iter().copied().fold(0.0, f64::max) + 1e-18);
    }

    #[test]
    fn single_defect_is_not_vacuous() {
        // the bound's order is attained: a defect along the worst direction
        // needs at least half the geometric sum
        let f = PointMap::cat_torus();
        let h = HyperbolicSplitting::cat();
        let delta = 1e-6;
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let po = chain_with_defect(&f, Point::new2(0.4, 0.3), 60, 30, [delta, -delta]);
        let s = shadow_linear_hyperbolic(&h, &po).unwrap();
        assert!(s.certificate.sup_error >= 0.5 * phi * delta, "{}", s.certificate.sup_error);
        assert!(s.certificate.sup_error <= s.bound);
    }

    #[test]
    fn certificate_recomputes() {
        let f = PointMap::cat_torus();
        let h = HyperbolicSplitting::cat();
        for (seed, noise) in [(3, Noise::Uniform), (4, Noise::Adversarial)] {
            let po = generate_pseudo_orbit(&f, Point::new2(0.13, 0.77), 2000, 1e-8, noise, seed).unwrap();
            let s = shadow_linear_hyperbolic(&h, &po).unwrap();
            let c = &s.certificate;
            assert!(c.verified, "residual {}", c.residual);
            assert!(c.sup_error <= h.shadowing_constant * 1e-8);
            assert!(c.sup_error <= s.bound);
            let again = c.shadow_orbit.iter().zip(&po.points).map(|(y, x)| f.point_distance(*y, *x));
            let again = again.fold(0.0, f64::max);
            assert!((again - c.sup_error).abs() <= 1e-10);
        }
    }

    #[test]
    fn short_chain_resimulates() {
        let f = PointMap::cat_torus();
        let h = HyperbolicSplitting::cat();
        let po = generate_pseudo_orbit(&f, Point::new2(0.5, 0.25), 10, 1e-4, Noise::Uniform, 9).unwrap();
        let s = shadow_linear_hyperbolic(&h, &po).unwrap();
        let k = h.shadowing_constant * 1e-4;
        assert!(verify_shadowing(&f, &po, &s.x, k));
        assert!(!verify_shadowing(&f, &po, &s.x, 0.1 * s.certificate.sup_error));
    }

    /// Exact minimax orbit by vertex enumeration. Near x_0 the error at
    /// index i is affine in the displacement y: A^i·y − D_i, with D_i the
    /// lifted drift of the chain. The least sup is a linear program in
    /// (y, t) whose optimum sits where three of the ±coordinate constraints
    /// are active, so every triple is solved and the best feasible value
    /// is kept.
    fn minimax_oracle(po: &PseudoOrbit) -> f64 {
        let wrap = |v: f64| v - v.round();
        let mut pow = [[1.0, 0.0], [0.0, 1.0]];
        let mut drift = [0.0f64, 0.0];
        let mut rows: Vec<([f64; 2], f64)> = Vec::new();
        for i in 0..po.points.len() {
            if i > 0 {
                let x = po.points[i - 1];
                let ax = [2.0 * x.x() + x.y(), x.x() + x.y()];
                let e = [wrap(po.points[i].x() - ax[0]), wrap(po.points[i].y() - ax[1])];
                drift = [2.0 * drift[0] + drift[1] + e[0], drift[0] + drift[1] + e[1]];
                pow = [
                    [2.0 * pow[0][0] + pow[1][0], 2.0 * pow[0][1] + pow[1][1]],
                    [pow[0][0] + pow[1][0], pow[0][1] + pow[1][1]],
                ];
            }
            for r in 0..2 {
                rows.push((pow[r], drift[r]));
                rows.push(([-pow[r][0], -pow[r][1]], -drift[r]));
            }
        }
        let value = |y: [f64; 2]| rows.iter().map(|(w, d)| w[0] * y[0] + w[1] * y[1] - d).fold(f64::MIN, f64::max);
        let mut best = value([0.0, 0.0]);
        let n = rows.len();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    // w·y − t = d for the three rows
                    let m = [rows[a], rows[b], rows[c]];
                    let det3 = |col: [[f64; 3]; 3]| {
                        col[0][0] * (col[1][1] * col[2][2] - col[1][2] * col[2][1])
                            - col[0][1] * (col[1][0] * col[2][2] - col[1][2] * col[2][0])
                            + col[0][2] * (col[1][0] * col[2][1] - col[1][1] * col[2][0])
                    };
                    let mat = m.map(|(w, _)| [w[0], w[1], -1.0]);
                    let det = det3(mat);
                    if det.abs() < 1e-12 {
                        continue;
                    }
                    let rhs = m.map(|(_, d)| d);
                    let solve = |k: usize| {
                        let mut mk = mat;
                        for r in 0..3 {
                            mk[r][k] = rhs[r];
                        }
                        det3(mk) / det
                    };
                    let y = [solve(0), solve(1)];
                    best = best.min(value(y));
                }
            }
        }
        best
    }

    #[test]
    fn agrees_with_minimax_oracle() {
        let f = PointMap::cat_torus();
        let h = HyperbolicSplitting::cat();
        for seed in 0..40u64 {
            let k = 2 + (seed as usize % 11);
            let noise = if seed % 2 == 0 { Noise::Uniform } else { Noise::Adversarial };
            let x0 = Point::new2(0.05 * seed as f64 % 1.0, 0.37);
            let po = generate_pseudo_orbit(&f, x0, k, 1e-3, noise, seed).unwrap();
            let s = shadow_linear_hyperbolic(&h, &po).unwrap();
            let o = minimax_oracle(&po);
            let got = s.certificate.sup_error;
            assert!((got - o).abs() <= 0.1 * o.max(1e-12), "seed {seed} k {k}: solver {got} oracle {o}");
        }
    }
}
