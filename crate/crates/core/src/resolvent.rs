//! Resolvents J_{λA}x = (Id + λA)⁻¹x with a residual certificate.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::audit::AuditReport;
use crate::operators::{Mapping, Operator, OperatorKind};
use crate::space::{LpSpace, Vector};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// λ grid used by the resolvent audits.
pub const AUDIT_LAMBDAS: [f64; 5] = [0.1, 1.0, 10.0, 100.0, 1000.0];

/// Contraction factors above this switch Banach iteration to root finding.
const BANACH_CEILING: f64 = 0.9;

const NEWTON_MAX_STEPS: usize = 200;
const LINE_SEARCH_HALVINGS: usize = 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ResolventError {
    #[error("lambda must be positive and finite (got {0})")]
    InvalidLambda(f64),
    #[error("t must lie in (0,1) (got {0})")]
    InvalidT(f64),
    #[error("tolerance must be positive (got {0})")]
    InvalidTolerance(f64),
    #[error("no convergence after {iterations} iterations (last residual {last_residual:e})")]
    NonConvergence { last_residual: f64, iterations: usize },
    #[error("method {method:?} does not apply to operator `{operator}`")]
    MethodUnavailable { method: ResolventMethod, operator: String },
    #[error("singular system for operator `{0}`")]
    Singular(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ResolventMethod {
    LinearSolve,
    ClosedForm,
    BanachIteration,
    RootFind,
}

impl ResolventMethod {
    pub fn label(self) -> &'static str {
        match self {
            ResolventMethod::LinearSolve => "linear_solve",
            ResolventMethod::ClosedForm => "closed_form",
            ResolventMethod::BanachIteration => "banach_iteration",
            ResolventMethod::RootFind => "root_find",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventResult {
    pub point: Vector,
    /// ‖point + λA(point) − x‖.
    pub residual: f64,
    pub iterations: usize,
    pub method: ResolventMethod,
}

/// y + λA(y) − x.
fn residual_map(a: &Operator, lambda: f64, x: &Vector, y: &Vector) -> Vector {
    y.combine(1.0, &a.apply(y), lambda).sub(x)
}

pub fn resolvent_residual(space: &LpSpace, a: &Operator, lambda: f64, x: &Vector, y: &Vector) -> f64 {
    space.norm_unchecked(&residual_map(a, lambda, x, y))
}

#[derive(Debug, Clone)]
pub struct Resolver {
    space: LpSpace,
    tol: f64,
    max_iter: usize,
}

impl Resolver {
    pub fn new(space: LpSpace) -> Self {
        Self {
            space,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn space(&self) -> &LpSpace {
        &self.space
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    fn check(&self, lambda: f64) -> Result<(), ResolventError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ResolventError::InvalidLambda(lambda));
        }
        if !(self.tol > 0.0) {
            return Err(ResolventError::InvalidTolerance(self.tol));
        }
        Ok(())
    }

    /// The preferred method for an operator and λ.
    pub fn default_method(a: &Operator, lambda: f64) -> ResolventMethod {
        match a.kind() {
            OperatorKind::Zero | OperatorKind::ConstantTarget(_) | OperatorKind::DiagonalCubic { .. } => {
                ResolventMethod::ClosedForm
            }
            OperatorKind::Matrix(_) => ResolventMethod::LinearSolve,
            OperatorKind::IdMinus(t) => {
                let t_param = lambda / (1.0 + lambda);
                match t.lipschitz() {
                    Some(l) if t_param * l <= BANACH_CEILING => ResolventMethod::BanachIteration,
                    _ => ResolventMethod::RootFind,
                }
            }
        }
    }

    pub fn resolve(&self, a: &Operator, lambda: f64, x: &Vector) -> Result<ResolventResult, ResolventError> {
        self.resolve_from(a, lambda, x, None)
    }

    /// `resolve` with an optional starting guess for the iterative methods.
    pub fn resolve_from(
        &self,
        a: &Operator,
        lambda: f64,
        x: &Vector,
        warm: Option<&Vector>,
    ) -> Result<ResolventResult, ResolventError> {
        self.resolve_with(a, lambda, x, Self::default_method(a, lambda), warm)
    }

    /// Resolves with a forced method.
    pub fn resolve_with(
        &self,
        a: &Operator,
        lambda: f64,
        x: &Vector,
        method: ResolventMethod,
        warm: Option<&Vector>,
    ) -> Result<ResolventResult, ResolventError> {
        self.check(lambda)?;
        let unavailable = || ResolventError::MethodUnavailable {
            method,
            operator: a.label().to_string(),
        };
        let (point, iterations) = match (method, a.kind()) {
            (ResolventMethod::ClosedForm, OperatorKind::Zero) => (x.clone(), 0),
            (ResolventMethod::ClosedForm, OperatorKind::ConstantTarget(c)) => {
                (x.combine(1.0 / (1.0 + lambda), c, lambda / (1.0 + lambda)), 0)
            }
            (ResolventMethod::ClosedForm, OperatorKind::DiagonalCubic { weights }) => {
                diagonal_cubic(weights, lambda, x, self.tol / (2.0 * x.dim() as f64))
            }
            (ResolventMethod::LinearSolve, OperatorKind::Matrix(m)) => (linear_solve(m, lambda, x, a.label())?, 0),
            (ResolventMethod::BanachIteration, OperatorKind::IdMinus(t)) => {
                let tp = lambda / (1.0 + lambda);
                self.banach(t, tp, x, warm.unwrap_or(x))?
            }
            (ResolventMethod::RootFind, _) => self.root_find(a, lambda, x, warm.unwrap_or(x))?,
            _ => return Err(unavailable()),
        };
        let residual = resolvent_residual(&self.space, a, lambda, x, &point);
        if residual > self.tol || !residual.is_finite() {
            return Err(ResolventError::NonConvergence {
                last_residual: residual,
                iterations,
            });
        }
        Ok(ResolventResult {
            point,
            residual,
            iterations,
            method,
        })
    }

    /// Fixed point of u ↦ tT(u) + (1−t)x. Stops once the a posteriori bound
    /// on the distance to the fixed point is below tol/(1+λ), so the
    /// resolvent residual, which is (1+λ) times the fixed-point defect,
    /// stays below tol.
    fn banach(&self, t: &Mapping, tp: f64, x: &Vector, start: &Vector) -> Result<(Vector, usize), ResolventError> {
        let factor = tp * t.lipschitz().unwrap_or(1.0);
        // Defect ‖u − Φu‖ ≤ (1+factor)·dist(u, fix); the residual is the defect over (1−t).
        let target = 0.5 * self.tol * (1.0 - tp) / (1.0 + factor);
        let stop = if factor > 0.0 {
            target * (1.0 - factor) / factor
        } else {
            f64::INFINITY
        };
        let mut u = start.clone();
        let mut step = f64::INFINITY;
        for k in 1..=self.max_iter {
            let next = t.apply(&u).combine(tp, x, 1.0 - tp);
            step = self.space.distance(&next, &u);
            u = next;
            if step <= stop {
                return Ok((u, k));
            }
        }
        Err(ResolventError::NonConvergence {
            last_residual: step / (1.0 - tp),
            iterations: self.max_iter,
        })
    }

    /// Damped Newton on F(y) = y + λA(y) − x with a forward-difference
    /// Jacobian and backtracking on ‖F‖₂².
    fn root_find(
        &self,
        a: &Operator,
        lambda: f64,
        x: &Vector,
        start: &Vector,
    ) -> Result<(Vector, usize), ResolventError> {
        let n = x.dim();
        let f = |y: &Vector| residual_map(a, lambda, x, y);
        let l2 = |v: &Vector| v.coords().iter().map(|c| c * c).sum::<f64>().sqrt();
        let mut y = start.clone();
        let mut fy = f(&y);
        let limit = NEWTON_MAX_STEPS.min(self.max_iter);
        for k in 0..limit {
            if self.space.norm_unchecked(&fy) <= 0.5 * self.tol {
                return Ok((y, k));
            }
            let mut jac = DMatrix::<f64>::zeros(n, n);
            for j in 0..n {
                let h = 1e-7 * y.coords()[j].abs().max(1.0);
                let mut shifted = y.clone().into_inner();
                shifted[j] += h;
                let fs = f(&Vector::from_vec(shifted));
                for i in 0..n {
                    jac[(i, j)] = (fs.coords()[i] - fy.coords()[i]) / h;
                }
            }
            let rhs = DVector::from_iterator(n, fy.coords().iter().map(|c| -c));
            let Some(dir) = jac.lu().solve(&rhs) else {
                return Err(ResolventError::Singular(a.label().to_string()));
            };
            let dir = Vector::from_vec(dir.as_slice().to_vec());
            let base = l2(&fy);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..LINE_SEARCH_HALVINGS {
                let cand = y.combine(1.0, &dir, alpha);
                let fc = f(&cand);
                if l2(&fc) <= (1.0 - 1e-4 * alpha) * base {
                    y = cand;
                    fy = fc;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let last = self.space.norm_unchecked(&fy);
        if last <= self.tol {
            return Ok((y, limit));
        }
        Err(ResolventError::NonConvergence {
            last_residual: last,
            iterations: limit,
        })
    }

    /// x_t = tT(x_t) + (1−t)x by Banach iteration, with
    /// ‖x_t − (tT(x_t) + (1−t)x)‖ ≤ tol.
    pub fn psc_bridge(&self, t: &Mapping, tp: f64, x: &Vector) -> Result<Vector, ResolventError> {
        if !(tp > 0.0 && tp < 1.0) {
            return Err(ResolventError::InvalidT(tp));
        }
        let factor = tp * t.lipschitz().unwrap_or(1.0);
        if factor >= 1.0 {
            return Err(ResolventError::NonConvergence {
                last_residual: f64::INFINITY,
                iterations: 0,
            });
        }
        let stop = if factor > 0.0 {
            0.5 * self.tol * (1.0 - factor) / (factor * (1.0 + factor))
        } else {
            f64::INFINITY
        };
        let mut u = x.clone();
        let mut step = f64::INFINITY;
        for _ in 0..self.max_iter {
            let next = t.apply(&u).combine(tp, x, 1.0 - tp);
            step = self.space.distance(&next, &u);
            u = next;
            if step <= stop {
                let defect = self.space.distance(&u, &t.apply(&u).combine(tp, x, 1.0 - tp));
                if defect <= self.tol {
                    return Ok(u);
                }
            }
        }
        Err(ResolventError::NonConvergence {
            last_residual: step,
            iterations: self.max_iter,
        })
    }
}

fn linear_solve(m: &DMatrix<f64>, lambda: f64, x: &Vector, label: &str) -> Result<Vector, ResolventError> {
    let n = m.nrows();
    let system = DMatrix::<f64>::identity(n, n) + m * lambda;
    let rhs = DVector::from_column_slice(x.coords());
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| ResolventError::Singular(label.to_string()))?;
    Ok(Vector::from_vec(sol.as_slice().to_vec()))
}

/// Solves y + λw(y + y³) = x coordinatewise by Newton's method safeguarded
/// with bisection on the bracket between 0 and x.
fn diagonal_cubic(weights: &[f64], lambda: f64, x: &Vector, tol: f64) -> (Vector, usize) {
    let mut total = 0;
    let coords = x
        .coords()
        .iter()
        .zip(weights)
        .map(|(&xi, &w)| {
            let c = lambda * w;
            if c == 0.0 {
                return xi;
            }
            let f = |y: f64| y + c * (y + y * y * y) - xi;
            let (mut lo, mut hi) = if xi >= 0.0 { (0.0, xi) } else { (xi, 0.0) };
            let mut y = xi / (1.0 + c);
            for _ in 0..200 {
                total += 1;
                let fy = f(y);
                if fy.abs() <= tol {
                    break;
                }
                if fy > 0.0 {
                    hi = y;
                } else {
                    lo = y;
                }
                let next = y - fy / (1.0 + c * (1.0 + 3.0 * y * y));
                y = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
                if hi - lo <= f64::EPSILON * xi.abs() {
                    break;
                }
            }
            y
        })
        .collect();
    (Vector::from_vec(coords), total)
}

/// ‖J_{λA}u − J_{λA}v‖ ≤ ‖u − v‖ + 1e−8 on the given pairs, plus
/// J_{λA}p = p for each certified zero p.
pub fn check_resolvent_nonexpansive(
    resolver: &Resolver,
    a: &Operator,
    lambda: f64,
    pairs: &[(Vector, Vector)],
    zeros: &[Vector],
) -> AuditReport {
    let space = resolver.space();
    let mut report = AuditReport::new(format!("resolvent_nonexpansive[{} lambda={lambda}]", a.label()), 1e-8);
    for (u, v) in pairs {
        let ok = match (resolver.resolve(a, lambda, u), resolver.resolve(a, lambda, v)) {
            (Ok(ju), Ok(jv)) => {
                let margin = space.distance(&ju.point, &jv.point) - space.distance(u, v);
                report.record(margin, || format!("u={u} v={v}"))
            }
            (Err(e), _) | (_, Err(e)) => {
                report.record(f64::INFINITY, || format!("resolvent failed at u={u} v={v}: {e}"))
            }
        };
        if !ok {
            return report;
        }
    }
    for p in zeros {
        let margin = match resolver.resolve(a, lambda, p) {
            Ok(jp) => space.distance(&jp.point, p),
            Err(_) => f64::INFINITY,
        };
        if !report.record(margin, || format!("zero not fixed: p={p}")) {
            break;
        }
    }
    report
}

/// J_{λA}y stays in the operator's domain for every sampled y and λ.
pub fn check_domain_closure(resolver: &Resolver, a: &Operator, lambdas: &[f64], points: &[Vector]) -> AuditReport {
    let space = resolver.space();
    let mut report = AuditReport::new(format!("resolvent_domain_closure[{}]", a.label()), 0.0);
    for &lambda in lambdas {
        for y in points {
            let inside = match resolver.resolve(a, lambda, y) {
                Ok(r) => a.domain().contains(space, &r.point),
                Err(_) => false,
            };
            if !report.record(if inside { 0.0 } else { 1.0 }, || format!("lambda={lambda} y={y}")) {
                return report;
            }
        }
    }
    report
}
