//! Approximating curves x_n = J_{λ_n A}x, the least metastable index, and
//! audits of the quantitative inequalities used along the convergence proof.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::audit::AuditReport;
use crate::moduli::{LambdaSequence, ModuliChain};
use crate::operators::Operator;
use crate::resolvent::{ResolventError, Resolver};
use crate::scalar::IndexFn;
use crate::space::{LpSpace, Vector};

/// Slack for the curve audits.
pub const CURVE_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetastabilityError {
    #[error("window at N = {candidate} needs a curve of length {required_length}, have {available}")]
    WindowExceedsCurve {
        candidate: u64,
        required_length: u64,
        available: usize,
    },
    #[error("no metastable index up to {0}")]
    NoIndexUpTo(u64),
    #[error("epsilon must be positive (got {0})")]
    InvalidEpsilon(f64),
    #[error("curve is empty")]
    EmptyCurve,
    #[error("invalid counterfunction `{0}`")]
    InvalidCounterfunction(String),
    #[error(transparent)]
    Resolvent(#[from] ResolventError),
}

/// The window-length function g in ∀g ∃N ∀m,n ∈ [N, N+g(N)].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Counterfunction {
    Constant(u64),
    Identity,
    /// n ↦ slope·n + offset.
    Affine {
        slope: u64,
        offset: u64,
    },
    /// Listed values, zero past the end.
    Table(Vec<u64>),
}

impl Counterfunction {
    pub fn eval(&self, n: u64) -> u64 {
        match self {
            Counterfunction::Constant(c) => *c,
            Counterfunction::Identity => n,
            Counterfunction::Affine { slope, offset } => slope.saturating_mul(n).saturating_add(*offset),
            Counterfunction::Table(values) => usize::try_from(n)
                .ok()
                .and_then(|i| values.get(i))
                .copied()
                .unwrap_or(0),
        }
    }

    pub fn label(&self) -> String {
        self.to_string()
    }

    pub fn as_index_fn(&self) -> IndexFn {
        let g = self.clone();
        IndexFn::new(self.label(), move |n| g.eval(n))
    }
}

impl fmt::Display for Counterfunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Counterfunction::Constant(c) => write!(f, "const:{c}"),
            Counterfunction::Identity => write!(f, "identity"),
            Counterfunction::Affine { slope, offset } => write!(f, "affine:{slope}:{offset}"),
            Counterfunction::Table(values) => {
                let parts: Vec<String> = values.iter().map(u64::to_string).collect();
                write!(f, "table:{}", parts.join(","))
            }
        }
    }
}

impl FromStr for Counterfunction {
    type Err = MetastabilityError;

    /// Parses `const:c`, `identity`, `affine:a:b` or `table:v0,v1,...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || MetastabilityError::InvalidCounterfunction(s.to_string());
        let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        let mut parts = s.trim().splitn(2, ':');
        let head = parts.next().unwrap_or("");
        let rest = parts.next();
        match (head, rest) {
            ("identity", None) => Ok(Counterfunction::Identity),
            ("const", Some(c)) => Ok(Counterfunction::Constant(num(c)?)),
            ("affine", Some(r)) => {
                let (a, b) = r.split_once(':').ok_or_else(bad)?;
                Ok(Counterfunction::Affine {
                    slope: num(a)?,
                    offset: num(b)?,
                })
            }
            ("table", Some(r)) => {
                let values: Result<Vec<u64>, _> = r.split(',').map(num).collect();
                Ok(Counterfunction::Table(values?))
            }
            _ => Err(bad()),
        }
    }
}

/// A computed approximating curve with residual certificates.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub points: Vec<Vector>,
    pub lambdas: Vec<f64>,
    pub base_point: Vector,
    pub residuals: Vec<f64>,
}

impl Curve {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// A curve given directly by its points, with placeholder λ_n = n+1 and
    /// zero residuals.
    pub fn from_points(base_point: Vector, points: Vec<Vector>) -> Self {
        let n = points.len();
        Self {
            points,
            lambdas: (0..n).map(|i| i as f64 + 1.0).collect(),
            base_point,
            residuals: vec![0.0; n],
        }
    }
}

/// x_n = J_{λ_n A}x for n < len, each solve warm-started at the previous point.
pub fn generate_curve(
    resolver: &Resolver,
    a: &Operator,
    x: &Vector,
    seq: &LambdaSequence,
    len: usize,
) -> Result<Curve, MetastabilityError> {
    let mut points: Vec<Vector> = Vec::with_capacity(len);
    let mut lambdas = Vec::with_capacity(len);
    let mut residuals = Vec::with_capacity(len);
    for n in 0..len {
        let lambda = seq.eval(n as u64);
        let out = resolver.resolve_from(a, lambda, x, points.last())?;
        points.push(out.point);
        lambdas.push(lambda);
        residuals.push(out.residual);
    }
    Ok(Curve {
        points,
        lambdas,
        base_point: x.clone(),
        residuals,
    })
}

/// A metastable index and the largest gap observed in its window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetastableIndex {
    pub n: u64,
    pub window_max_gap: f64,
}

fn window_max_gap(space: &LpSpace, pts: &[Vector]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            best = best.max(space.distance(&pts[i], &pts[j]));
        }
    }
    best
}

fn window_within(space: &LpSpace, pts: &[Vector], eps: f64) -> bool {
    // Endpoints and the first point against everything fail fastest.
    let last = pts.len() - 1;
    if space.distance(&pts[0], &pts[last]) > eps {
        return false;
    }
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if space.distance(&pts[i], &pts[j]) > eps {
                return false;
            }
        }
    }
    true
}

/// Least N ≤ n_max with ‖x_m − x_n‖ ≤ ε for all m, n ∈ [N, N+g(N)], by
/// exhaustive search.
pub fn find_metastable_n(
    curve: &Curve,
    space: &LpSpace,
    eps: f64,
    g: &Counterfunction,
    n_max: u64,
) -> Result<MetastableIndex, MetastabilityError> {
    if !(eps > 0.0) {
        return Err(MetastabilityError::InvalidEpsilon(eps));
    }
    if curve.is_empty() {
        return Err(MetastabilityError::EmptyCurve);
    }
    for n in 0..=n_max {
        let end = n.saturating_add(g.eval(n));
        if end >= curve.len() as u64 {
            return Err(MetastabilityError::WindowExceedsCurve {
                candidate: n,
                required_length: end.saturating_add(1),
                available: curve.len(),
            });
        }
        let window = &curve.points[n as usize..=end as usize];
        if window_within(space, window, eps) {
            return Ok(MetastableIndex {
                n,
                window_max_gap: window_max_gap(space, window),
            });
        }
    }
    Err(MetastabilityError::NoIndexUpTo(n_max))
}

/// ‖x_n − J_A x_n‖ ≤ b/λ_n + tol along the curve.
pub fn audit_asymptotic_regularity(resolver: &Resolver, curve: &Curve, a: &Operator, b: f64, tol: f64) -> AuditReport {
    let space = resolver.space();
    let mut report = AuditReport::new(format!("asymptotic_regularity[{}]", a.label()), tol);
    for (n, (xn, &lambda)) in curve.points.iter().zip(&curve.lambdas).enumerate() {
        let margin = match resolver.resolve_from(a, 1.0, xn, Some(xn)) {
            Ok(j) => space.distance(xn, &j.point) - b / lambda,
            Err(_) => f64::INFINITY,
        };
        if !report.record(margin, || format!("n={n} lambda={lambda}")) {
            break;
        }
    }
    report
}

/// ⟨x_n − x, j(x_n − p)⟩ ≤ tol along the curve for a certified zero p.
pub fn audit_projection_inequality(curve: &Curve, a: &Operator, p: &Vector, space: &LpSpace, tol: f64) -> AuditReport {
    let name = format!("projection_inequality[{}]", a.label());
    if let Err(e) = a.certify_zero(space, p, tol) {
        return AuditReport::inapplicable(name, tol, e.to_string());
    }
    let mut report = AuditReport::new(name, tol);
    for (n, xn) in curve.points.iter().enumerate() {
        let value = space.pair_with_duality(&xn.sub(&curve.base_point), &xn.sub(p));
        if !report.record(value, || format!("n={n} p={p}")) {
            break;
        }
    }
    report
}

/// Inputs shared by the two pairs of displayed bounds around J_{λA}x.
pub struct ResolventBoundCase<'a> {
    pub a: &'a Operator,
    pub x: &'a Vector,
    pub chain: &'a ModuliChain,
    pub eps: f64,
    pub tol: f64,
}

/// With J = J_{λA}x and v′ satisfying ‖v′ − J_Av′‖ ≤ δ(ε,λ):
/// ⟨J − x, j(J − J_Av′)⟩ ≤ δbλ ≤ ε/4,
/// ⟨J − x, j(J − v′) − j(J − J_Av′)⟩ ≤ ε/4, and
/// ⟨J − x, j(J − v′)⟩ ≤ ε/2.
/// When the hypothesis on v′ fails the report is inapplicable.
pub fn audit_resolvent_pairing_bounds(
    resolver: &Resolver,
    case: &ResolventBoundCase<'_>,
    lambda: f64,
    vprime: &Vector,
) -> AuditReport {
    let ResolventBoundCase { a, x, chain, eps, tol } = *case;
    let space = resolver.space();
    let name = format!("resolvent_pairing_bounds[{} eps={eps} lambda={lambda}]", a.label());
    let delta = match chain.delta(&eps, &lambda) {
        Ok(d) => d.value,
        Err(e) => return AuditReport::inapplicable(name, tol, e.to_string()),
    };
    let (j, jv) = match (resolver.resolve(a, lambda, x), resolver.resolve(a, 1.0, vprime)) {
        (Ok(j), Ok(jv)) => (j.point, jv.point),
        (Err(e), _) | (_, Err(e)) => {
            let mut r = AuditReport::new(name, tol);
            r.record(f64::INFINITY, || format!("resolvent failed: {e}"));
            return r;
        }
    };
    let defect = space.distance(vprime, &jv);
    if defect > delta {
        return AuditReport::inapplicable(
            name,
            tol,
            format!("||v'-J_A v'|| = {defect:e} exceeds delta = {delta:e}"),
        );
    }
    let b = chain.b() as f64;
    let step = j.sub(x);
    let first = space.pair_with_duality(&step, &j.sub(&jv));
    let second = space.pair_with(
        &step,
        &space
            .duality_map_unchecked(&j.sub(vprime))
            .sub(&space.duality_map_unchecked(&j.sub(&jv))),
    );
    let third = space.pair_with_duality(&step, &j.sub(vprime));
    let mut report = AuditReport::new(name, tol);
    let witness = || format!("x={x} v'={vprime}");
    let _ = report.record(first - delta * b * lambda, witness)
        && report.record(delta * b * lambda - eps / 4.0, witness)
        && report.record(second - eps / 4.0, witness)
        && report.record(third - eps / 2.0, witness);
    report
}

/// The same three bounds along the curve at index k, with
/// q = q(k, k, ε) and γ the bound modulus of the λ-sequence:
/// ⟨x_k − x, j(x_k − J_Av)⟩ ≤ q·b·λ_k ≤ p(ε)/4,
/// ⟨x_k − x, j(x_k − v) − j(x_k − J_Av)⟩ ≤ p(ε)/4, and
/// ⟨x_k − x, j(x_k − v)⟩ ≤ p(ε)/2.
/// Inapplicable when ‖v − J_Av‖ > q or λ_k > γ(k).
pub fn audit_curve_pairing_bounds(
    resolver: &Resolver,
    case: &ResolventBoundCase<'_>,
    curve: &Curve,
    k: usize,
    gamma: &IndexFn,
    v: &Vector,
) -> AuditReport {
    let ResolventBoundCase { a, chain, eps, tol, .. } = *case;
    let space = resolver.space();
    let name = format!("curve_pairing_bounds[{} eps={eps} k={k}]", a.label());
    let Some(xk) = curve.points.get(k) else {
        return AuditReport::inapplicable(name, tol, format!("curve has no index {k}"));
    };
    let lambda = curve.lambdas[k];
    if lambda > gamma.eval(k as u64) as f64 {
        return AuditReport::inapplicable(name, tol, format!("lambda_k = {lambda} exceeds gamma(k)"));
    }
    let (q, p_eps) = match (chain.q_mod(gamma, k as u64, k as u64, &eps), chain.p_fn().eval_f64(eps)) {
        (Ok(q), p) => (q, p),
        (Err(e), _) => return AuditReport::inapplicable(name, tol, e.to_string()),
    };
    let jv = match resolver.resolve(a, 1.0, v) {
        Ok(r) => r.point,
        Err(e) => {
            let mut r = AuditReport::new(name, tol);
            r.record(f64::INFINITY, || format!("resolvent failed: {e}"));
            return r;
        }
    };
    let defect = space.distance(v, &jv);
    if defect > q {
        return AuditReport::inapplicable(name, tol, format!("||v-J_A v|| = {defect:e} exceeds q = {q:e}"));
    }
    let b = chain.b() as f64;
    let step = xk.sub(&curve.base_point);
    let first = space.pair_with_duality(&step, &xk.sub(&jv));
    let second = space.pair_with(
        &step,
        &space
            .duality_map_unchecked(&xk.sub(v))
            .sub(&space.duality_map_unchecked(&xk.sub(&jv))),
    );
    let third = space.pair_with_duality(&step, &xk.sub(v));
    let mut report = AuditReport::new(name, tol);
    let witness = || format!("k={k} v={v}");
    let _ = report.record(first - q * b * lambda, witness)
        && report.record(q * b * lambda - p_eps / 4.0, witness)
        && report.record(second - p_eps / 4.0, witness)
        && report.record(third - p_eps / 2.0, witness);
    report
}

/// Distance chain from the curve point x_h to J_Av:
/// ‖x_h − J_Av‖ ≤ ‖x_h − v‖ + b/λ_h,
/// ‖x_h − J_Av‖² ≤ ‖x_h − v‖² + b²/λ_h² + 2b²/λ_h, and
/// ‖x_h − J_Av‖² ≤ ‖x_h − (v+J_Av)/2‖² + ν.
/// The chain needs λ_h² ≥ 4b²/ν, λ_h ≥ 8b²/ν, ‖x_h − v‖ ≤ b and the premise
/// ‖x_h − v‖² − ‖x_h − (v+J_Av)/2‖² ≤ ν/2; otherwise the report is
/// inapplicable.
#[allow(clippy::too_many_arguments)]
pub fn audit_near_fixed_point_chain(
    resolver: &Resolver,
    a: &Operator,
    curve: &Curve,
    v: &Vector,
    h: usize,
    chain: &ModuliChain,
    nu: f64,
    tol: f64,
) -> AuditReport {
    let space = resolver.space();
    let name = format!("near_fixed_point_chain[{} h={h} nu={nu}]", a.label());
    let Some(xh) = curve.points.get(h) else {
        return AuditReport::inapplicable(name, tol, format!("curve has no index {h}"));
    };
    if !(nu > 0.0) {
        return AuditReport::inapplicable(name, tol, format!("nu = {nu} must be positive"));
    }
    let lambda = curve.lambdas[h];
    let b = chain.b() as f64;
    if lambda * lambda < 4.0 * b * b / nu || lambda < 8.0 * b * b / nu {
        return AuditReport::inapplicable(
            name,
            tol,
            format!("lambda_h = {lambda} below 8b^2/nu = {}", 8.0 * b * b / nu),
        );
    }
    let jv = match resolver.resolve(a, 1.0, v) {
        Ok(r) => r.point,
        Err(e) => {
            let mut r = AuditReport::new(name, tol);
            r.record(f64::INFINITY, || format!("resolvent failed: {e}"));
            return r;
        }
    };
    let to_v = space.distance(xh, v);
    let to_jv = space.distance(xh, &jv);
    let to_mid = space.distance(xh, &v.midpoint(&jv));
    if to_v > b {
        return AuditReport::inapplicable(name, tol, format!("||x_h - v|| = {to_v} exceeds b"));
    }
    if to_v * to_v - to_mid * to_mid > nu / 2.0 {
        return AuditReport::inapplicable(name, tol, "premise ||x_h-v||^2 - ||x_h-mid||^2 <= nu/2 fails");
    }
    let mut report = AuditReport::new(name, tol);
    let witness = || format!("h={h} v={v}");
    let _ = report.record(to_jv - to_v - b / lambda, witness)
        && report.record(
            to_jv * to_jv - (to_v * to_v + b * b / (lambda * lambda) + 2.0 * b * b / lambda),
            witness,
        )
        && report.record(to_jv * to_jv - to_mid * to_mid - nu, witness);
    report
}

/// An approximation of the retraction Q x = lim J_{λ_n A}x.
#[derive(Debug, Clone, PartialEq)]
pub struct QEstimate {
    pub point: Vector,
    /// ‖Qx − J_A(Qx)‖.
    pub zero_residual: f64,
    /// b/λ_tail + tol, the certified bound on `zero_residual`.
    pub bound: f64,
}

/// Qx ≈ J_{λ_tail A}x, certified by ‖Qx − J_A(Qx)‖ ≤ b/λ_tail + tol.
pub fn estimate_q(
    resolver: &Resolver,
    a: &Operator,
    x: &Vector,
    lambda_tail: f64,
    b: f64,
) -> Result<QEstimate, MetastabilityError> {
    let point = resolver.resolve(a, lambda_tail, x)?.point;
    let j = resolver.resolve_from(a, 1.0, &point, Some(&point))?.point;
    let zero_residual = resolver.space().distance(&point, &j);
    Ok(QEstimate {
        point,
        zero_residual,
        bound: b / lambda_tail + resolver.tol(),
    })
}

/// ⟨x − Qx, j(p − Qx)⟩ ≤ tol for each certified zero p, the bound
/// certificate of Qx, and Qp = p within tol.
pub fn audit_sunny(
    resolver: &Resolver,
    a: &Operator,
    x: &Vector,
    q: &QEstimate,
    zeros: &[Vector],
    lambda_tail: f64,
    tol: f64,
) -> AuditReport {
    let space = resolver.space();
    let mut report = AuditReport::new(format!("sunny[{} lambda_tail={lambda_tail}]", a.label()), tol);
    if !report.record(q.zero_residual - q.bound, || format!("Qx={} not near a zero", q.point)) {
        return report;
    }
    for p in zeros {
        if let Err(e) = a.certify_zero(space, p, resolver.tol()) {
            report.record(f64::INFINITY, || format!("uncertified zero p={p}: {e}"));
            return report;
        }
        let pairing = space.pair_with_duality(&x.sub(&q.point), &p.sub(&q.point));
        if !report.record(pairing, || format!("x={x} p={p}")) {
            return report;
        }
        let fixed = match resolver.resolve(a, lambda_tail, p) {
            Ok(r) => space.distance(&r.point, p),
            Err(_) => f64::INFINITY,
        };
        if !report.record(fixed, || format!("Q moves zero p={p}")) {
            return report;
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{ConvexDomain, Mapping};
    use crate::space::{lp_convexity_modulus, lp_smoothness_modulus};
    use nalgebra::DMatrix;

    fn v(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    fn harmonic_curve(len: usize) -> Curve {
        let pts = (0..len).map(|n| v(&[1.0 / (n as f64 + 1.0)])).collect();
        Curve::from_points(v(&[1.0]), pts)
    }

    #[test]
    fn counterfunction_labels_round_trip() {
        for g in [
            Counterfunction::Constant(1),
            Counterfunction::Identity,
            Counterfunction::Affine { slope: 2, offset: 3 },
            Counterfunction::Table(vec![4, 1, 0]),
        ] {
            assert_eq!(g.label().parse::<Counterfunction>().unwrap(), g);
        }
        assert!("affine:2".parse::<Counterfunction>().is_err());
        assert!("const:-1".parse::<Counterfunction>().is_err());
        assert!("square".parse::<Counterfunction>().is_err());
        assert_eq!(Counterfunction::Affine { slope: 2, offset: 3 }.eval(5), 13);
    }

    #[test]
    fn constant_curve_is_metastable_at_zero() {
        let s = LpSpace::new(2.0, 2).unwrap();
        let curve = Curve::from_points(v(&[0.0, 0.0]), vec![v(&[1.0, 2.0]); 10]);
        let found = find_metastable_n(&curve, &s, 1e-12, &Counterfunction::Constant(5), 9).unwrap();
        assert_eq!(
            found,
            MetastableIndex {
                n: 0,
                window_max_gap: 0.0
            }
        );
    }

    #[test]
    fn harmonic_curve_examples() {
        let s = LpSpace::new(2.0, 1).unwrap();
        let curve = harmonic_curve(20);
        let g = Counterfunction::Constant(1);
        assert_eq!(find_metastable_n(&curve, &s, 0.5, &g, 10).unwrap().n, 0);
        let at = find_metastable_n(&curve, &s, 0.4, &g, 10).unwrap();
        assert_eq!(at.n, 1);
        assert!((at.window_max_gap - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_counterfunction_gives_zero() {
        let s = LpSpace::new(2.0, 1).unwrap();
        let found = find_metastable_n(&harmonic_curve(3), &s, 1e-9, &Counterfunction::Constant(0), 2).unwrap();
        assert_eq!(found.n, 0);
    }

    #[test]
    fn short_curve_reports_required_length() {
        let s = LpSpace::new(2.0, 1).unwrap();
        let err = find_metastable_n(
            &harmonic_curve(5),
            &s,
            1e-3,
            &Counterfunction::Affine { slope: 1, offset: 1 },
            100,
        )
        .unwrap_err();
        assert_eq!(
            err,
            MetastabilityError::WindowExceedsCurve {
                candidate: 2,
                required_length: 6,
                available: 5
            }
        );
    }

    #[test]
    fn identity_matrix_curve_audits() {
        let s = LpSpace::new(2.0, 2).unwrap();
        let r = Resolver::new(s);
        let dom = ConvexDomain::Ball {
            center: v(&[0.0, 0.0]),
            radius: 2.0,
        };
        let a = Operator::matrix("I", DMatrix::identity(2, 2), dom).unwrap();
        let x = v(&[1.0, -0.5]);
        let curve = generate_curve(&r, &a, &x, &LambdaSequence::n_plus_one(), 50).unwrap();
        for (n, pt) in curve.points.iter().enumerate() {
            assert!(s.distance(pt, &x.scale(1.0 / (n as f64 + 2.0))) < 1e-14);
            // Closed form of the projection pairing: −λ/(1+λ)²·‖x‖².
            let lambda = n as f64 + 1.0;
            let pairing = s.pair_with_duality(&pt.sub(&x), pt);
            let expected = -lambda / (1.0 + lambda).powi(2) * s.norm_unchecked(&x).powi(2);
            assert!((pairing - expected).abs() < 1e-14);
        }
        assert!(audit_asymptotic_regularity(&r, &curve, &a, 4.0, CURVE_SLACK).passed);
        assert!(audit_projection_inequality(&curve, &a, &v(&[0.0, 0.0]), &s, CURVE_SLACK).passed);
        let bad_zero = audit_projection_inequality(&curve, &a, &v(&[1.0, 0.0]), &s, CURVE_SLACK);
        assert!(bad_zero.is_inapplicable());
    }

    #[test]
    fn constant_map_asymptotic_regularity_closed_form() {
        let s = LpSpace::new(3.0, 2).unwrap();
        let r = Resolver::new(s);
        let c = v(&[0.3, 0.1]);
        let a = Operator::id_minus(
            Mapping::constant(c.clone()),
            2,
            ConvexDomain::Ball {
                center: c.clone(),
                radius: 2.0,
            },
        );
        let x = v(&[1.5, -0.5]);
        let curve = generate_curve(&r, &a, &x, &LambdaSequence::n_plus_one(), 30).unwrap();
        for (n, pt) in curve.points.iter().enumerate() {
            let lambda = n as f64 + 1.0;
            let j = r.resolve(&a, 1.0, pt).unwrap().point;
            let expected = s.distance(&x, &c) / (2.0 * (1.0 + lambda));
            assert!((s.distance(pt, &j) - expected).abs() < 1e-9);
        }
        assert!(audit_asymptotic_regularity(&r, &curve, &a, 4.0, CURVE_SLACK).passed);
    }

    fn chain(space: &LpSpace, b: u32) -> ModuliChain {
        ModuliChain::new(b, lp_convexity_modulus(space), lp_smoothness_modulus(space)).unwrap()
    }

    #[test]
    fn pairing_bounds_with_zero_vprime() {
        let s = LpSpace::new(2.0, 2).unwrap();
        let r = Resolver::new(s);
        let dom = ConvexDomain::Ball {
            center: v(&[0.0, 0.0]),
            radius: 2.0,
        };
        let a = Operator::matrix("I", DMatrix::identity(2, 2), dom).unwrap();
        let ch = chain(&s, 4);
        let x = v(&[1.0, 0.5]);
        for eps in [0.5, 1.0] {
            for lambda in [1.0, 10.0] {
                let case = ResolventBoundCase {
                    a: &a,
                    x: &x,
                    chain: &ch,
                    eps,
                    tol: CURVE_SLACK,
                };
                let rep = audit_resolvent_pairing_bounds(&r, &case, lambda, &v(&[0.0, 0.0]));
                assert!(rep.passed && !rep.is_inapplicable(), "{rep}");
            }
        }
        let case = ResolventBoundCase {
            a: &a,
            x: &x,
            chain: &ch,
            eps: 0.5,
            tol: CURVE_SLACK,
        };
        assert!(audit_resolvent_pairing_bounds(&r, &case, 1.0, &v(&[0.5, 0.0])).is_inapplicable());
    }

    #[test]
    fn near_fixed_point_chain_cases() {
        let s = LpSpace::new(2.0, 2).unwrap();
        let r = Resolver::new(s);
        let c = v(&[0.3, 0.1]);
        let a = Operator::id_minus(
            Mapping::constant(c.clone()),
            2,
            ConvexDomain::Ball {
                center: c.clone(),
                radius: 2.0,
            },
        );
        let x = v(&[1.0, 1.0]);
        let curve = generate_curve(&r, &a, &x, &LambdaSequence::n_plus_one(), 200).unwrap();
        let ch = chain(&s, 4);
        let at_zero = audit_near_fixed_point_chain(&r, &a, &curve, &c, 150, &ch, 1.0, CURVE_SLACK);
        assert!(at_zero.passed && !at_zero.is_inapplicable());
        assert!((at_zero.worst_margin + 1.0).abs() < 1e-9 || at_zero.worst_margin < 0.0);
        let near = v(&[0.31, 0.1]);
        let off = audit_near_fixed_point_chain(&r, &a, &curve, &near, 150, &ch, 1.0, CURVE_SLACK);
        assert!(off.passed && !off.is_inapplicable(), "{off}");
        assert!(audit_near_fixed_point_chain(&r, &a, &curve, &c, 10, &ch, 1.0, CURVE_SLACK).is_inapplicable());
    }

    #[test]
    fn q_estimates() {
        let s = LpSpace::new(2.0, 2).unwrap();
        let r = Resolver::new(s);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = Operator::matrix("diag(1,0)", m, ConvexDomain::WholeSpace).unwrap();
        let x = v(&[1.0, 1.0]);
        let q = estimate_q(&r, &a, &x, 1e4, 4.0).unwrap();
        assert!(s.distance(&q.point, &v(&[1.0 / (1.0 + 1e4), 1.0])) < 1e-14);
        assert!(q.zero_residual <= q.bound);
        let zeros: Vec<Vector> = [-1.0, 0.0, 0.5, 2.0].iter().map(|t| v(&[0.0, *t])).collect();
        assert!(audit_sunny(&r, &a, &x, &q, &zeros, 1e4, 1e-6).passed);
        let at_zero = estimate_q(&r, &a, &v(&[0.0, 0.7]), 1e4, 4.0).unwrap();
        assert_eq!(at_zero.point, v(&[0.0, 0.7]));
        let uncertified = audit_sunny(&r, &a, &x, &q, &[v(&[1.0, 0.0])], 1e4, 1e-6);
        assert!(!uncertified.passed);
    }
}
