//! Exact dyadic arithmetic for toral automorphisms.
//!
//! Points are pairs of integers mod 2^B read as coordinates p/2^B. An
//! integer matrix maps dyadics to dyadics, so orbits are computed without
//! rounding; only eigen-data (irrational) are rounded, to B bits.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use super::linear::{HyperbolicSplitting, LIFT_LIMIT};
use crate::error::{Error, Result};
use crate::space::Point;
use crate::systems::{Dynamics, LimitPseudoOrbit};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DyadicPoint {
    pub p: BigInt,
    pub q: BigInt,
}

/// x ↦ A·x mod 1 on dyadic points with a fixed number of fraction bits.
#[derive(Clone, Debug)]
pub struct ExactToral {
    matrix: [[i64; 2]; 2],
    bits: u32,
    one: BigInt,
    v_u: [BigInt; 2],
    v_s: [BigInt; 2],
    dual_u: [BigInt; 2],
    dual_s: [BigInt; 2],
}

/// `x / 2^bits` as a float, without overflow for large `bits`.
fn scaled_to_f64(x: &BigInt, bits: u32) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let len = x.bits();
    let shift = len.saturating_sub(62);
    let head = (x >> shift).to_f64().unwrap_or(0.0);
    let e = shift as i64 - bits as i64;
    let e = e.clamp(-2000, 2000) as i32;
    // split the power so that neither factor under- or overflows early
    head * 2f64.powi(e / 2) * 2f64.powi(e - e / 2)
}

/// Exact value of a finite float times 2^bits, rounded to an integer.
fn f64_to_scaled(v: f64, bits: u32) -> BigInt {
    if v == 0.0 || !v.is_finite() {
        return BigInt::zero();
    }
    let raw = v.abs().to_bits();
    let exp = ((raw >> 52) & 0x7ff) as i64;
    let frac = raw & ((1u64 << 52) - 1);
    let (mant, e) = if exp == 0 { (frac, -1074) } else { (frac | (1u64 << 52), exp - 1075) };
    let m = BigInt::from(mant);
    let shift = e + bits as i64;
    let mag = if shift >= 0 {
        m << shift as u64
    } else {
        let s = (-shift) as u64;
        (m + (BigInt::from(1) << (s - 1))) >> s
    };
    if v < 0.0 {
        -mag
    } else {
        mag
    }
}

impl ExactToral {
    pub fn new(h: &HyperbolicSplitting, bits: u32) -> Self {
        let [[a, b], [c, d]] = h.matrix;
        let one = BigInt::from(1) << bits;
        let t = a + d;
        let sqrt_disc = (BigInt::from(t * t - 4) << (2 * bits)).sqrt();
        let tb = BigInt::from(t) << bits;
        let lambda_u = (&tb + &sqrt_disc) >> 1;
        let lambda_s = (&tb - &sqrt_disc) >> 1;
        let eig = |l: &BigInt| -> [BigInt; 2] {
            let v = if b != 0 {
                [BigInt::from(b) << bits, l - (BigInt::from(a) << bits)]
            } else {
                [l - (BigInt::from(d) << bits), BigInt::from(c) << bits]
            };
            let norm = (&v[0] * &v[0] + &v[1] * &v[1]).sqrt();
            let neg = v[0].is_negative() || (v[0].is_zero() && v[1].is_negative());
            let unit = |x: &BigInt| {
                let u = (x << bits) / &norm;
                if neg {
                    -u
                } else {
                    u
                }
            };
            [unit(&v[0]), unit(&v[1])]
        };
        let v_u = eig(&lambda_u);
        let v_s = eig(&lambda_s);
        let det = (&v_u[0] * &v_s[1] - &v_s[0] * &v_u[1]) >> bits;
        let div = |x: BigInt| (x << bits) / &det;
        let dual_u = [div(v_s[1].clone()), div(-v_s[0].clone())];
        let dual_s = [div(-v_u[1].clone()), div(v_u[0].clone())];
        ExactToral { matrix: h.matrix, bits, one, v_u, v_s, dual_u, dual_s }
    }

    /// Precision that keeps a B-bit point on its stable/unstable leaf over
    /// `steps` iterations with 128 bits to spare.
    pub fn bits_for(h: &HyperbolicSplitting, steps: usize) -> u32 {
        128 + (2.0 * steps as f64 * h.lambda_u.log2()).ceil() as u32
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn point(&self, x: Point) -> DyadicPoint {
        DyadicPoint {
            p: f64_to_scaled(x.x(), self.bits).mod_floor(&self.one),
            q: f64_to_scaled(x.y(), self.bits).mod_floor(&self.one),
        }
    }

    pub fn to_point(&self, x: &DyadicPoint) -> Point {
        Point::new2(scaled_to_f64(&x.p, self.bits), scaled_to_f64(&x.q, self.bits))
    }

    /// Representative in (−1/2, 1/2] of a scaled coordinate difference.
    fn centered(&self, v: BigInt) -> BigInt {
        let r = v.mod_floor(&self.one);
        if r > (&self.one >> 1) {
            r - &self.one
        } else {
            r
        }
    }

    fn wrap(&self, p: BigInt, q: BigInt) -> DyadicPoint {
        DyadicPoint { p: p.mod_floor(&self.one), q: q.mod_floor(&self.one) }
    }

    fn mul(&self, a: &BigInt, b: &BigInt) -> BigInt {
        (a * b) >> self.bits
    }

    /// Nearest-representative displacement `to − from`, scaled.
    fn lift(&self, from: &DyadicPoint, to: &DyadicPoint) -> [BigInt; 2] {
        [self.centered(&to.p - &from.p), self.centered(&to.q - &from.q)]
    }

    /// `p + coef·v` where v is the unit unstable or stable eigenvector.
    pub fn eigen_offset(&self, p: &DyadicPoint, coef: f64, unstable: bool) -> DyadicPoint {
        let v = if unstable { &self.v_u } else { &self.v_s };
        let c = f64_to_scaled(coef, self.bits);
        self.wrap(&p.p + self.mul(&c, &v[0]), &p.q + self.mul(&c, &v[1]))
    }
}

impl Dynamics for ExactToral {
    type Point = DyadicPoint;

    fn forward(&self, x: &DyadicPoint) -> DyadicPoint {
        let [[a, b], [c, d]] = self.matrix.map(|r| r.map(BigInt::from));
        self.wrap(a * &x.p + b * &x.q, c * &x.p + d * &x.q)
    }

    fn inverse(&self, x: &DyadicPoint) -> DyadicPoint {
        // det = 1
        let [[a, b], [c, d]] = self.matrix.map(|r| r.map(BigInt::from));
        self.wrap(d * &x.p - b * &x.q, a * &x.q - c * &x.p)
    }

    fn distance(&self, x: &DyadicPoint, y: &DyadicPoint) -> f64 {
        let [dp, dq] = self.lift(x, y);
        scaled_to_f64(&dp.abs(), self.bits).max(scaled_to_f64(&dq.abs(), self.bits))
    }
}

/// Two orbits joined by a single defect at index 0, and the heteroclinic
/// point that limit-shadows the junction.
#[derive(Clone, Debug)]
pub struct Glue {
    pub toral: ExactToral,
    /// x_i = f^i(x) for i < 0 and f^i(y) for i ≥ 0.
    pub lpo: LimitPseudoOrbit<DyadicPoint>,
    pub z: DyadicPoint,
    pub defect: f64,
    /// Coefficients of y − x on the unit unstable and stable eigenvectors.
    pub unstable_coef: f64,
    pub stable_coef: f64,
    /// d(f^{-j}(z), f^{-j}(x)) for j = 0..=m.
    pub backward_errors: Vec<f64>,
    /// d(f^j(z), f^j(y)) for j = 0..=m.
    pub forward_errors: Vec<f64>,
}

impl Glue {
    pub fn z_point(&self) -> Point {
        self.toral.to_point(&self.z)
    }
}

/// Glues the backward orbit of `x` to the forward orbit of `y` on the
/// window −m..m. The point z = x + P_u(y − x) lies on the unstable leaf of
/// x and the stable leaf of y.
pub fn glue_orbits_linear(h: &HyperbolicSplitting, x: Point, y: Point, m: usize) -> Result<Glue> {
    if m == 0 {
        return Err(Error::arg("window half-width must be at least 1"));
    }
    let toral = ExactToral::new(h, ExactToral::bits_for(h, m));
    let xe = toral.point(x);
    let ye = toral.point(y);
    let d = toral.lift(&xe, &ye);
    let size = scaled_to_f64(&d[0].abs(), toral.bits).max(scaled_to_f64(&d[1].abs(), toral.bits));
    if size > LIFT_LIMIT {
        return Err(Error::AmbiguousLift(format!("points are {size:.3} apart")));
    }
    let coef = |dual: &[BigInt; 2]| toral.mul(&dual[0], &d[0]) + toral.mul(&dual[1], &d[1]);
    let a = coef(&toral.dual_u);
    let b = coef(&toral.dual_s);
    let z = toral.wrap(&xe.p + toral.mul(&a, &toral.v_u[0]), &xe.q + toral.mul(&a, &toral.v_u[1]));

    let mut back = vec![xe.clone()];
    for j in 0..m {
        let prev = toral.inverse(&back[j]);
        back.push(prev);
    }
    let mut points: Vec<DyadicPoint> = back[1..].iter().rev().cloned().collect();
    points.push(ye.clone());
    for j in 0..m {
        let next = toral.forward(&points[m + j]);
        points.push(next);
    }

    let mut backward_errors = Vec::with_capacity(m + 1);
    let mut zb = z.clone();
    for j in 0..=m {
        if j > 0 {
            zb = toral.inverse(&zb);
        }
        backward_errors.push(toral.distance(&zb, &back[j]));
    }
    let mut forward_errors = Vec::with_capacity(m + 1);
    let mut zf = z.clone();
    for j in 0..=m {
        if j > 0 {
            zf = toral.forward(&zf);
        }
        forward_errors.push(toral.distance(&zf, &points[m + j]));
    }

    let defect = toral.distance(&xe, &ye);
    let eta = defect.max(f64::MIN_POSITIVE);
    let lpo = LimitPseudoOrbit::from_points(&toral, m, points, eta, vec![eta; m + 1])?;
    Ok(Glue {
        unstable_coef: scaled_to_f64(&a, toral.bits),
        stable_coef: scaled_to_f64(&b, toral.bits),
        toral,
        lpo,
        z,
        defect,
        backward_errors,
        forward_errors,
    })
}
