//! Finite-dimensional ℓ_p spaces: norms, the normalized duality map, and
//! moduli of uniform convexity and smoothness with sampling verifiers.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::Rng;
use thiserror::Error;

use crate::audit::{fmt_coords, AuditReport};
use crate::sampling::{batched_audit, separated_pairs, unit_sphere};
use crate::scalar::{rational_from_decimal, rational_powi, ScalarFn};

/// Absolute slack for sampled inequality audits.
pub const SAMPLE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("p must exceed 1 and be finite (got {0})")]
    InvalidExponent(f64),
    #[error("dimension must be at least 1")]
    InvalidDimension,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("vector has a non-finite coordinate")]
    NonFinite,
    #[error("{what}: {value} outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },
}

/// A point of ℝ^dim (also used for dual coordinates).
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        if coords.iter().all(|c| c.is_finite()) {
            Ok(Self(coords))
        } else {
            Err(SpaceError::NonFinite)
        }
    }

    /// Unchecked constructor for internally produced coordinates.
    pub fn from_vec(coords: Vec<f64>) -> Self {
        Self(coords)
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        Self(v)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|c| c.is_finite())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, k: f64) -> Vector {
        Vector(self.0.iter().map(|a| k * a).collect())
    }

    /// `a·self + b·other`
    pub fn combine(&self, a: f64, other: &Vector, b: f64) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(x, y)| a * x + b * y).collect())
    }

    pub fn midpoint(&self, other: &Vector) -> Vector {
        self.combine(0.5, other, 0.5)
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&fmt_coords(&self.0))
    }
}

/// ℓ_p^dim with 1 < p < ∞.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpSpace {
    p: f64,
    dim: usize,
}

impl LpSpace {
    pub fn new(p: f64, dim: usize) -> Result<Self, SpaceError> {
        if !(p.is_finite() && p > 1.0) {
            return Err(SpaceError::InvalidExponent(p));
        }
        if dim == 0 {
            return Err(SpaceError::InvalidDimension);
        }
        Ok(Self { p, dim })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Conjugate exponent q = p/(p−1).
    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    pub fn check(&self, x: &Vector) -> Result<(), SpaceError> {
        if x.dim() != self.dim {
            return Err(SpaceError::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        Ok(())
    }

    pub fn norm(&self, x: &Vector) -> Result<f64, SpaceError> {
        self.check(x)?;
        Ok(self.norm_unchecked(x))
    }

    pub fn norm_unchecked(&self, x: &Vector) -> f64 {
        scaled_lp_norm(x.coords(), self.p)
    }

    /// Norm of a dual vector, i.e. the ℓ_q norm.
    pub fn dual_norm(&self, xstar: &Vector) -> Result<f64, SpaceError> {
        self.check(xstar)?;
        Ok(scaled_lp_norm(xstar.coords(), self.conjugate()))
    }

    pub fn distance(&self, x: &Vector, y: &Vector) -> f64 {
        self.norm_unchecked(&x.sub(y))
    }

    /// The normalized duality map: coordinates ‖x‖^(2−p)·sign(x_i)|x_i|^(p−1).
    pub fn duality_map(&self, x: &Vector) -> Result<Vector, SpaceError> {
        self.check(x)?;
        Ok(self.duality_map_unchecked(x))
    }

    pub fn duality_map_unchecked(&self, x: &Vector) -> Vector {
        if self.p == 2.0 {
            return x.clone();
        }
        let n = self.norm_unchecked(x);
        if n == 0.0 {
            return Vector::zeros(x.dim());
        }
        let e = self.p - 1.0;
        Vector(
            x.coords()
                .iter()
                .map(|&c| n * c.signum() * (c.abs() / n).powf(e))
                .collect(),
        )
    }

    /// ⟨y, x*⟩ = Σ y_i x*_i.
    pub fn pairing(&self, y: &Vector, xstar: &Vector) -> Result<f64, SpaceError> {
        self.check(y)?;
        self.check(xstar)?;
        Ok(dot(y.coords(), xstar.coords()))
    }

    pub fn pair_with(&self, y: &Vector, xstar: &Vector) -> f64 {
        dot(y.coords(), xstar.coords())
    }

    /// ⟨y, j(z)⟩, the combination every audit evaluates.
    pub fn pair_with_duality(&self, y: &Vector, z: &Vector) -> f64 {
        dot(y.coords(), self.duality_map_unchecked(z).coords())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scaled_lp_norm(v: &[f64], p: f64) -> f64 {
    let m = v.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    let s: f64 = v.iter().map(|c| (c.abs() / m).powf(p)).sum();
    m * s.powf(1.0 / p)
}

/// Modulus of uniform convexity η : (0,2] → (0,1].
#[derive(Debug, Clone)]
pub struct ConvexityModulus(ScalarFn);

impl ConvexityModulus {
    pub fn from_fn(f: ScalarFn) -> Self {
        Self(f)
    }

    /// η(ε) = ε²/8, the Hilbert-space bound; rational-valued.
    pub fn quadratic() -> Self {
        let eighth = BigRational::new(BigInt::from(1), BigInt::from(8));
        Self(ScalarFn::new("eps^2/8", |e| e * e / 8.0).with_exact(move |e| e * e * eighth.clone()))
    }

    pub fn function(&self) -> &ScalarFn {
        &self.0
    }

    pub fn label(&self) -> &str {
        self.0.label()
    }

    pub fn eval(&self, eps: f64) -> Result<f64, SpaceError> {
        if !(eps > 0.0 && eps <= 2.0) {
            return Err(SpaceError::Domain {
                what: "convexity modulus argument",
                value: eps,
                domain: "(0,2]",
            });
        }
        Ok(self.0.eval_f64(eps))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.scaled(factor))
    }
}

/// Modulus of uniform smoothness τ : (0,∞) → (0,∞).
#[derive(Debug, Clone)]
pub struct SmoothnessModulus(ScalarFn);

impl SmoothnessModulus {
    pub fn from_fn(f: ScalarFn) -> Self {
        Self(f)
    }

    /// τ(ε) = ε, valid for the Euclidean norm.
    pub fn identity() -> Self {
        Self(ScalarFn::new("eps", |e| e).with_exact(|e| e.clone()))
    }

    pub fn function(&self) -> &ScalarFn {
        &self.0
    }

    pub fn label(&self) -> &str {
        self.0.label()
    }

    pub fn eval(&self, eps: f64) -> Result<f64, SpaceError> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SpaceError::Domain {
                what: "smoothness modulus argument",
                value: eps,
                domain: "(0,inf)",
            });
        }
        Ok(self.0.eval_f64(eps))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.scaled(factor))
    }
}

/// η_p(ε) = 1 − (1 − (ε/2)^p)^(1/p) for p ≥ 2 and (p−1)ε²/8 for 1 < p < 2.
pub fn lp_convexity_modulus(space: &LpSpace) -> ConvexityModulus {
    let p = space.p();
    if p >= 2.0 {
        let label = format!("lp_convexity(p={p})");
        return ConvexityModulus(ScalarFn::new(label, move |e| {
            // 1 − (1−u)^(1/p) without cancellation for small u.
            -((-(e / 2.0).powf(p)).ln_1p() / p).exp_m1()
        }));
    }
    let label = format!("lp_convexity(p={p})");
    let f = ScalarFn::new(label, move |e| (p - 1.0) * e * e / 8.0);
    let f = match rational_from_decimal(p) {
        Some(pr) => {
            let coeff = (pr - BigRational::one()) / BigRational::from_integer(BigInt::from(8));
            f.with_exact(move |e| e * e * coeff.clone())
        }
        None => f,
    };
    ConvexityModulus(f)
}

/// τ_p(ε) = ε/(p−1) for p ≥ 2 and (pε/2)^(1/(p−1)) for 1 < p < 2.
pub fn lp_smoothness_modulus(space: &LpSpace) -> SmoothnessModulus {
    let p = space.p();
    let label = format!("lp_smoothness(p={p})");
    let pr = rational_from_decimal(p);
    if p >= 2.0 {
        let f = ScalarFn::new(label, move |e| e / (p - 1.0));
        let f = match pr {
            Some(pr) => {
                let denom = pr - BigRational::one();
                f.with_exact(move |e| e / denom.clone())
            }
            None => f,
        };
        return SmoothnessModulus(f);
    }
    let f = ScalarFn::new(label, move |e| (p * e / 2.0).powf(1.0 / (p - 1.0)));
    // Rational-valued when 1/(p−1) is an integer k, i.e. p = 1 + 1/k.
    let exact_power = pr.as_ref().and_then(|pr| {
        let r = pr - BigRational::one();
        if r.numer() == &BigInt::from(1) {
            u32::try_from(r.denom().clone()).ok()
        } else {
            None
        }
    });
    let f = match (pr, exact_power) {
        (Some(pr), Some(k)) => {
            let half_p = pr / BigRational::from_integer(BigInt::from(2));
            f.with_exact(move |e| rational_powi(&(half_p.clone() * e.clone()), k))
        }
        _ => f,
    };
    SmoothnessModulus(f)
}

/// Samples unit-ball pairs with ‖x − y‖ ≥ ε and checks
/// ‖(x+y)/2‖ ≤ 1 − η(ε). Running out of admissible pairs is flagged on the
/// report, not treated as failure.
pub fn verify_convexity_modulus(
    space: &LpSpace,
    eta: &ConvexityModulus,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<AuditReport, SpaceError> {
    let bound = 1.0 - eta.eval(eps)?;
    let name = format!("convexity_modulus[{} p={} eps={eps}]", eta.label(), space.p());
    let report = batched_audit(&name, SAMPLE_SLACK, samples, seed, |rng, count, rep| {
        let (pairs, exhausted) = separated_pairs(space, 1.0, eps, count, rng);
        if exhausted {
            rep.flag("sampler exhausted");
        }
        for (x, y) in pairs {
            let mid = space.norm_unchecked(&x.midpoint(&y));
            if !rep.record(mid - bound, || format!("x={x} y={y}")) {
                break;
            }
        }
    });
    Ok(report)
}

/// Samples unit x and ‖y‖ ≤ τ(ε) and checks ‖x+y‖ + ‖x−y‖ ≤ 2 + ε‖y‖.
pub fn verify_smoothness_modulus(
    space: &LpSpace,
    tau: &SmoothnessModulus,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<AuditReport, SpaceError> {
    let radius = tau.eval(eps)?;
    let name = format!("smoothness_modulus[{} p={} eps={eps}]", tau.label(), space.p());
    let report = batched_audit(&name, SAMPLE_SLACK, samples, seed, |rng, count, rep| {
        for i in 0..count {
            let x = unit_sphere(space, rng);
            let y = match i % 4 {
                0 if i == 0 => Vector::zeros(space.dim()),
                0 | 1 => unit_sphere(space, rng).scale(radius * rng.gen::<f64>()),
                2 => unit_sphere(space, rng).scale(radius),
                _ => {
                    // Collinear with x, at the radius or inside it.
                    let s = if rng.gen_bool(0.5) {
                        radius
                    } else {
                        radius * rng.gen::<f64>()
                    };
                    x.scale(if rng.gen_bool(0.5) { s } else { -s })
                }
            };
            let lhs = space.norm_unchecked(&x.add(&y)) + space.norm_unchecked(&x.sub(&y));
            let rhs = 2.0 + eps * space.norm_unchecked(&y);
            if !rep.record(lhs - rhs, || format!("x={x} y={y}")) {
                break;
            }
        }
    });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::seeded_rng;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn norm_examples() {
        let s2 = LpSpace::new(2.0, 2).unwrap();
        assert_eq!(s2.norm(&v(&[3.0, 4.0])).unwrap(), 5.0);
        for p in [1.5, 2.0, 3.0, 7.0] {
            let s = LpSpace::new(p, 3).unwrap();
            assert_eq!(s.norm(&Vector::zeros(3)).unwrap(), 0.0);
        }
        let s3 = LpSpace::new(3.0, 2).unwrap();
        let n = s3.norm(&v(&[1.0, 1.0])).unwrap();
        assert!((n - 2f64.powf(1.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn invalid_spaces_are_rejected() {
        assert_eq!(LpSpace::new(1.0, 2), Err(SpaceError::InvalidExponent(1.0)));
        assert!(LpSpace::new(f64::INFINITY, 2).is_err());
        assert!(LpSpace::new(f64::NAN, 2).is_err());
        assert_eq!(LpSpace::new(2.0, 0), Err(SpaceError::InvalidDimension));
        assert_eq!(Vector::new(vec![f64::NAN]), Err(SpaceError::NonFinite));
    }

    #[test]
    fn dimension_mismatch() {
        let s = LpSpace::new(2.0, 3).unwrap();
        assert_eq!(
            s.norm(&v(&[1.0, 2.0])),
            Err(SpaceError::DimensionMismatch { expected: 3, found: 2 })
        );
        assert!(s.duality_map(&v(&[1.0])).is_err());
        assert!(s.pairing(&v(&[1.0, 2.0, 3.0]), &v(&[1.0])).is_err());
    }

    #[test]
    fn duality_map_examples() {
        let s2 = LpSpace::new(2.0, 2).unwrap();
        assert_eq!(s2.duality_map(&v(&[3.0, 4.0])).unwrap(), v(&[3.0, 4.0]));

        let s3 = LpSpace::new(3.0, 2).unwrap();
        let x = v(&[1.0, 1.0]);
        let j = s3.duality_map(&x).unwrap();
        let expect = 2f64.powf(-1.0 / 3.0);
        for c in j.coords() {
            assert!((c - expect).abs() < 1e-15);
        }
        let pair = s3.pairing(&x, &j).unwrap();
        assert!((pair - 2f64.powf(2.0 / 3.0)).abs() < 1e-12);

        for p in [1.5, 2.0, 3.0] {
            let s = LpSpace::new(p, 4).unwrap();
            let e1 = Vector::basis(4, 0);
            assert_eq!(s.duality_map(&e1).unwrap(), e1);
            assert_eq!(s.duality_map(&Vector::zeros(4)).unwrap(), Vector::zeros(4));
        }
    }

    #[test]
    fn pairing_examples() {
        let s = LpSpace::new(2.0, 2).unwrap();
        assert_eq!(s.pairing(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        let x = v(&[3.0, 4.0]);
        assert_eq!(s.pairing(&x, &s.duality_map(&x).unwrap()).unwrap(), 25.0);
        assert_eq!(s.pairing(&v(&[1.0, 2.0]), &v(&[3.0, -1.0])).unwrap(), 1.0);
    }

    #[test]
    fn duality_is_positively_homogeneous() {
        let mut rng = seeded_rng(5);
        for p in [1.5, 2.0, 3.0] {
            let s = LpSpace::new(p, 5).unwrap();
            for _ in 0..200 {
                let x = crate::sampling::in_ball(&s, &Vector::zeros(5), 3.0, &mut rng);
                let k = rng.gen_range(0.01..50.0);
                let lhs = s.duality_map_unchecked(&x.scale(k));
                let rhs = s.duality_map_unchecked(&x).scale(k);
                let err = s.dual_norm(&lhs.sub(&rhs)).unwrap();
                assert!(err <= 1e-9 * (1.0 + k * s.norm_unchecked(&x)));
            }
        }
    }

    #[test]
    fn convexity_modulus_examples() {
        let s2 = LpSpace::new(2.0, 2).unwrap();
        let eta = lp_convexity_modulus(&s2);
        assert_eq!(eta.eval(2.0).unwrap(), 1.0);
        let s15 = LpSpace::new(1.5, 2).unwrap();
        assert_eq!(lp_convexity_modulus(&s15).eval(2.0).unwrap(), 0.25);
        let s3 = LpSpace::new(3.0, 2).unwrap();
        let eta3 = lp_convexity_modulus(&s3);
        let mut prev = 1.0;
        for k in 1..40 {
            let e = 2.0 / f64::powi(2.0, k);
            let val = eta3.eval(e).unwrap();
            assert!(val > 0.0 && val <= prev);
            prev = val;
        }
        assert!(eta.eval(0.0).is_err());
        assert!(eta.eval(2.5).is_err());
    }

    #[test]
    fn smoothness_modulus_examples() {
        let at = |p: f64, e: f64| lp_smoothness_modulus(&LpSpace::new(p, 2).unwrap()).eval(e).unwrap();
        assert_eq!(at(2.0, 1.0), 1.0);
        assert_eq!(at(3.0, 2.0), 1.0);
        assert!((at(1.5, 2.0) - 2.25).abs() < 1e-15);
        let tau = lp_smoothness_modulus(&LpSpace::new(2.0, 2).unwrap());
        assert!(tau.eval(0.0).is_err());
        assert!(tau.eval(-1.0).is_err());
    }

    #[test]
    fn exact_forms_where_rational() {
        let r = |n: i64, d: i64| BigRational::new(BigInt::from(n), BigInt::from(d));
        let eta15 = lp_convexity_modulus(&LpSpace::new(1.5, 2).unwrap());
        assert_eq!(eta15.function().eval_exact(&r(2, 1)).unwrap(), r(1, 4));
        assert!(!lp_convexity_modulus(&LpSpace::new(2.0, 2).unwrap())
            .function()
            .has_exact());
        let tau15 = lp_smoothness_modulus(&LpSpace::new(1.5, 2).unwrap());
        assert_eq!(tau15.function().eval_exact(&r(2, 1)).unwrap(), r(9, 4));
        let tau3 = lp_smoothness_modulus(&LpSpace::new(3.0, 2).unwrap());
        assert_eq!(tau3.function().eval_exact(&r(2, 1)).unwrap(), r(1, 1));
        let tau13 = lp_smoothness_modulus(&LpSpace::new(1.3, 2).unwrap());
        assert!(!tau13.function().has_exact());
    }

    #[test]
    fn antipodal_pair_meets_convexity_bound() {
        let s = LpSpace::new(2.0, 2).unwrap();
        let eta = lp_convexity_modulus(&s);
        let x = v(&[0.6, 0.8]);
        let y = x.scale(-1.0);
        let mid = s.norm(&x.midpoint(&y)).unwrap();
        assert!(mid <= 1.0 - eta.eval(2.0).unwrap());
    }

    #[test]
    fn verifiers_pass_on_shipped_moduli() {
        for p in [1.5, 2.0, 3.0] {
            let s = LpSpace::new(p, 2).unwrap();
            let eta = lp_convexity_modulus(&s);
            let r = verify_convexity_modulus(&s, &eta, 1.0, 2000, 1).unwrap();
            assert!(r.passed, "{r}");
            let tau = lp_smoothness_modulus(&s);
            let r = verify_smoothness_modulus(&s, &tau, 1.0, 2000, 1).unwrap();
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn inflated_convexity_modulus_fails() {
        let s = LpSpace::new(2.0, 2).unwrap();
        let eta = lp_convexity_modulus(&s).scaled(1.5);
        let r = verify_convexity_modulus(&s, &eta, 2.0, 500, 3).unwrap();
        assert!(!r.passed);
        assert!(r.witness.is_some());
    }

    #[test]
    fn degenerate_smoothness_sample_is_tight() {
        let s = LpSpace::new(3.0, 2).unwrap();
        let x = v(&[1.0, 0.0]);
        let y = Vector::zeros(2);
        let lhs = s.norm_unchecked(&x.add(&y)) + s.norm_unchecked(&x.sub(&y));
        assert_eq!(lhs, 2.0);
    }
}
