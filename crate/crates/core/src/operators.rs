//! Accretive operators, self-mappings and their domains, with sampling
//! verifiers for accretivity (both Kato-equivalent forms) and for
//! (strong) pseudocontractivity.

use std::fmt;
use std::io::Read;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::audit::AuditReport;
use crate::sampling::{batch_rng, in_ball, REJECTION_FACTOR};
use crate::space::{LpSpace, SpaceError, Vector, SAMPLE_SLACK};

/// Membership slack for domain checks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error("point is not a zero of the operator (residual {residual:e} > {tol:e})")]
    NotAZero { residual: f64, tol: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("graph pair csv: {0}")]
    Csv(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// A self-map of a convex set, with an optional Lipschitz constant used to
/// pick a fixed-point solver.
#[derive(Clone)]
pub struct Mapping {
    label: String,
    lipschitz: Option<f64>,
    f: Arc<dyn Fn(&Vector) -> Vector + Send + Sync>,
}

impl Mapping {
    pub fn new(
        label: impl Into<String>,
        lipschitz: Option<f64>,
        f: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            lipschitz,
            f: Arc::new(f),
        }
    }

    pub fn identity() -> Self {
        Self::new("identity", Some(1.0), |x| x.clone())
    }

    pub fn constant(c: Vector) -> Self {
        Self::new(format!("constant{c}"), Some(0.0), move |_| c.clone())
    }

    /// x ↦ k·x.
    pub fn scaling(k: f64) -> Self {
        Self::new(format!("{k}*Id"), Some(k.abs()), move |x| x.scale(k))
    }

    /// Rotation by `angle` about `center` in the plane of the first two
    /// coordinates; other coordinates are left alone. An isometry of ℓ_2, and
    /// of every ℓ_p when `angle` is a multiple of π/2.
    pub fn rotation(center: Vector, angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        // Exact signed permutation for quarter turns.
        let quarter = (angle / std::f64::consts::FRAC_PI_2).round();
        let (s, c) = if (angle - quarter * std::f64::consts::FRAC_PI_2).abs() < 1e-15 {
            match (quarter as i64).rem_euclid(4) {
                0 => (0.0, 1.0),
                1 => (1.0, 0.0),
                2 => (0.0, -1.0),
                _ => (-1.0, 0.0),
            }
        } else {
            (s, c)
        };
        Self::new(format!("rotation(angle={angle})"), Some(1.0), move |x| {
            let mut out = x.clone().into_inner();
            let dx = x.coords()[0] - center.coords()[0];
            let dy = x.coords()[1] - center.coords()[1];
            out[0] = center.coords()[0] + c * dx - s * dy;
            out[1] = center.coords()[1] + s * dx + c * dy;
            Vector::from_vec(out)
        })
    }

    /// x ↦ clip_[lo,hi](k·x + (1−k)·anchor), a contraction of every ℓ_p
    /// mapping the box into itself.
    pub fn clipped_contraction(lo: Vector, hi: Vector, k: f64, anchor: Vector) -> Self {
        Self::new(format!("clip_contraction(k={k})"), Some(k), move |x| {
            let coords = x
                .coords()
                .iter()
                .zip(anchor.coords())
                .zip(lo.coords().iter().zip(hi.coords()))
                .map(|((xi, ai), (l, h))| (k * xi + (1.0 - k) * ai).clamp(*l, *h))
                .collect();
            Vector::from_vec(coords)
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        (self.f)(x)
    }
}

impl fmt::Debug for Mapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Mapping({}, L={:?})", self.label, self.lipschitz)
    }
}

/// U x = k·T x + (1−k)·u, a k-strong pseudocontraction when T is a
/// pseudocontraction.
pub fn strong_pseudocontraction(t: &Mapping, k: f64, u: Vector) -> Result<Mapping, OperatorError> {
    if !(k > 0.0 && k < 1.0) {
        return Err(OperatorError::InvalidParameter(format!("k = {k} must lie in (0,1)")));
    }
    let inner = t.clone();
    let lipschitz = t.lipschitz.map(|l| k * l);
    Ok(Mapping::new(format!("{k}*{}+(1-{k})u", t.label), lipschitz, move |x| {
        inner.apply(x).combine(k, &u, 1.0 - k)
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexDomain {
    WholeSpace,
    Ball {
        center: Vector,
        radius: f64,
    },
    Box {
        lo: Vector,
        hi: Vector,
    },
    BallIntersect {
        center: Vector,
        radius: f64,
        inner: Box<ConvexDomain>,
    },
}

/// Radius of the ball used to draw samples from an unbounded domain.
pub const WHOLE_SPACE_SAMPLE_RADIUS: f64 = 2.0;

impl ConvexDomain {
    pub fn contains(&self, space: &LpSpace, x: &Vector) -> bool {
        match self {
            ConvexDomain::WholeSpace => true,
            ConvexDomain::Ball { center, radius } => space.distance(x, center) <= radius + MEMBERSHIP_TOL,
            ConvexDomain::Box { lo, hi } => x
                .coords()
                .iter()
                .zip(lo.coords().iter().zip(hi.coords()))
                .all(|(c, (l, h))| *c >= l - MEMBERSHIP_TOL && *c <= h + MEMBERSHIP_TOL),
            ConvexDomain::BallIntersect { center, radius, inner } => {
                space.distance(x, center) <= radius + MEMBERSHIP_TOL && inner.contains(space, x)
            }
        }
    }

    /// Upper bound on the diameter, `None` when unbounded.
    pub fn diameter_bound(&self, space: &LpSpace) -> Option<f64> {
        match self {
            ConvexDomain::WholeSpace => None,
            ConvexDomain::Ball { radius, .. } => Some(2.0 * radius),
            ConvexDomain::Box { lo, hi } => Some(space.distance(hi, lo)),
            ConvexDomain::BallIntersect { radius, inner, .. } => {
                let own = 2.0 * radius;
                Some(inner.diameter_bound(space).map_or(own, |d| d.min(own)))
            }
        }
    }

    /// Smallest positive integer bounding the diameter.
    pub fn integer_diameter_bound(&self, space: &LpSpace) -> Option<u32> {
        self.diameter_bound(space).map(|d| (d - 1e-12).ceil().max(1.0) as u32)
    }

    pub fn sample(&self, space: &LpSpace, rng: &mut ChaCha8Rng) -> Vector {
        match self {
            ConvexDomain::WholeSpace => in_ball(space, &Vector::zeros(space.dim()), WHOLE_SPACE_SAMPLE_RADIUS, rng),
            ConvexDomain::Ball { center, radius } => in_ball(space, center, *radius, rng),
            ConvexDomain::Box { lo, hi } => {
                let coords = lo
                    .coords()
                    .iter()
                    .zip(hi.coords())
                    .map(|(l, h)| match rng.gen_range(0..8) {
                        0 => *l,
                        1 => *h,
                        _ => rng.gen_range(*l..=*h),
                    })
                    .collect();
                Vector::from_vec(coords)
            }
            ConvexDomain::BallIntersect { center, radius, inner } => {
                for _ in 0..REJECTION_FACTOR {
                    let x = in_ball(space, center, *radius, rng);
                    if inner.contains(space, &x) {
                        return x;
                    }
                }
                center.clone()
            }
        }
    }
}

#[derive(Debug, Clone)]
pub enum OperatorKind {
    Zero,
    Matrix(DMatrix<f64>),
    /// A(x)_i = w_i·(x_i + x_i³), w_i ≥ 0.
    DiagonalCubic {
        weights: Vec<f64>,
    },
    /// A(x) = x − c.
    ConstantTarget(Vector),
    /// A = Id − T.
    IdMinus(Mapping),
}

/// A single-valued accretive operator on a convex domain.
#[derive(Debug, Clone)]
pub struct Operator {
    label: String,
    dim: usize,
    kind: OperatorKind,
    domain: ConvexDomain,
}

impl Operator {
    pub fn new(
        label: impl Into<String>,
        dim: usize,
        kind: OperatorKind,
        domain: ConvexDomain,
    ) -> Result<Self, OperatorError> {
        match &kind {
            OperatorKind::Matrix(m) if m.nrows() != dim || m.ncols() != dim => {
                return Err(OperatorError::InvalidParameter(format!("matrix must be {dim}x{dim}")));
            }
            OperatorKind::DiagonalCubic { weights } if weights.len() != dim || weights.iter().any(|w| *w < 0.0) => {
                return Err(OperatorError::InvalidParameter(format!(
                    "need {dim} non-negative weights"
                )));
            }
            OperatorKind::ConstantTarget(c) if c.dim() != dim => {
                return Err(SpaceError::DimensionMismatch {
                    expected: dim,
                    found: c.dim(),
                }
                .into());
            }
            _ => {}
        }
        Ok(Self {
            label: label.into(),
            dim,
            kind,
            domain,
        })
    }

    pub fn zero(dim: usize, domain: ConvexDomain) -> Self {
        Self {
            label: "zero".into(),
            dim,
            kind: OperatorKind::Zero,
            domain,
        }
    }

    pub fn matrix(label: impl Into<String>, m: DMatrix<f64>, domain: ConvexDomain) -> Result<Self, OperatorError> {
        let dim = m.nrows();
        Self::new(label, dim, OperatorKind::Matrix(m), domain)
    }

    pub fn id_minus(t: Mapping, dim: usize, domain: ConvexDomain) -> Self {
        let label = format!("Id-{}", t.label());
        Self {
            label,
            dim,
            kind: OperatorKind::IdMinus(t),
            domain,
        }
    }

    pub fn constant_target(c: Vector, domain: ConvexDomain) -> Self {
        let dim = c.dim();
        Self {
            label: "constant_target".into(),
            dim,
            kind: OperatorKind::ConstantTarget(c),
            domain,
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        match &self.kind {
            OperatorKind::Zero => Vector::zeros(self.dim),
            OperatorKind::Matrix(m) => {
                let v = m * nalgebra::DVector::from_column_slice(x.coords());
                Vector::from_vec(v.as_slice().to_vec())
            }
            OperatorKind::DiagonalCubic { weights } => Vector::from_vec(
                x.coords()
                    .iter()
                    .zip(weights)
                    .map(|(c, w)| w * (c + c * c * c))
                    .collect(),
            ),
            OperatorKind::ConstantTarget(c) => x.sub(c),
            OperatorKind::IdMinus(t) => x.sub(&t.apply(x)),
        }
    }

    /// ‖A x‖, the zero residual.
    pub fn zero_residual(&self, space: &LpSpace, x: &Vector) -> f64 {
        space.norm_unchecked(&self.apply(x))
    }

    pub fn certify_zero(&self, space: &LpSpace, p: &Vector, tol: f64) -> Result<(), OperatorError> {
        space.check(p)?;
        let residual = self.zero_residual(space, p);
        if residual <= tol {
            Ok(())
        } else {
            Err(OperatorError::NotAZero { residual, tol })
        }
    }
}

/// Replaces the domain by its intersection with B̄(p, radius), where p is a
/// certified zero. The diameter bound becomes at most 2·radius.
pub fn restrict_domain(
    a: &Operator,
    space: &LpSpace,
    p: &Vector,
    radius: f64,
    tol: f64,
) -> Result<Operator, OperatorError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(OperatorError::InvalidParameter(format!(
            "radius {radius} must be positive"
        )));
    }
    a.certify_zero(space, p, tol)?;
    let mut out = a.clone();
    out.domain = ConvexDomain::BallIntersect {
        center: p.clone(),
        radius,
        inner: Box::new(a.domain.clone()),
    };
    Ok(out)
}

/// An element (x, y) of an operator's graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphPair {
    pub x: Vector,
    pub y: Vector,
}

pub fn graph_of(a: &Operator, points: &[Vector]) -> Vec<GraphPair> {
    points
        .iter()
        .map(|x| GraphPair {
            x: x.clone(),
            y: a.apply(x),
        })
        .collect()
}

/// Reads graph pairs from headerless CSV rows `x_1..x_d, y_1..y_d`.
pub fn graph_pairs_from_csv<R: Read>(reader: R, dim: usize) -> Result<Vec<GraphPair>, OperatorError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| OperatorError::Csv(e.to_string()))?;
        if record.len() != 2 * dim {
            return Err(OperatorError::Csv(format!(
                "row {}: expected {} columns, found {}",
                row + 1,
                2 * dim,
                record.len()
            )));
        }
        let vals: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| OperatorError::Csv(format!("row {}: {e}", row + 1)))?;
        let x = Vector::new(vals[..dim].to_vec())?;
        let y = Vector::new(vals[dim..].to_vec())?;
        out.push(GraphPair { x, y });
    }
    Ok(out)
}

/// Sampled point pairs from `domain`: independent draws plus nearby pairs.
pub fn sample_point_pairs(space: &LpSpace, domain: &ConvexDomain, count: usize, seed: u64) -> Vec<(Vector, Vector)> {
    let mut rng = batch_rng(seed, 0);
    (0..count)
        .map(|i| {
            let x = domain.sample(space, &mut rng);
            let y = if i % 3 == 2 {
                // A nearby point, pulled back toward x until it is inside.
                let mut y = in_ball(space, &x, 1e-3, &mut rng);
                for _ in 0..20 {
                    if domain.contains(space, &y) {
                        break;
                    }
                    y = x.midpoint(&y);
                }
                if domain.contains(space, &y) {
                    y
                } else {
                    x.clone()
                }
            } else {
                domain.sample(space, &mut rng)
            };
            (x, y)
        })
        .collect()
}

fn pairs_to_graph(a: &Operator, pairs: &[(Vector, Vector)]) -> Vec<(GraphPair, GraphPair)> {
    pairs
        .iter()
        .map(|(x1, x2)| {
            (
                GraphPair {
                    x: x1.clone(),
                    y: a.apply(x1),
                },
                GraphPair {
                    x: x2.clone(),
                    y: a.apply(x2),
                },
            )
        })
        .collect()
}

/// All unordered pairs of a graph sample.
pub fn all_graph_pairs(graph: &[GraphPair]) -> Vec<(GraphPair, GraphPair)> {
    let mut out = Vec::new();
    for i in 0..graph.len() {
        for j in i + 1..graph.len() {
            out.push((graph[i].clone(), graph[j].clone()));
        }
    }
    out
}

/// ‖x₁ − x₂‖ ≤ ‖x₁ − x₂ + λ(y₁ − y₂)‖ on graph pairs.
pub fn check_accretive_metric_graph(
    space: &LpSpace,
    lambda: f64,
    pairs: &[(GraphPair, GraphPair)],
    name: &str,
) -> AuditReport {
    let mut report = AuditReport::new(format!("accretive_metric[{name} lambda={lambda}]"), SAMPLE_SLACK);
    for (a, b) in pairs {
        let d = a.x.sub(&b.x);
        let lhs = space.norm_unchecked(&d);
        let rhs = space.norm_unchecked(&d.add(&a.y.sub(&b.y).scale(lambda)));
        if !report.record(lhs - rhs, || format!("x1={} x2={}", a.x, b.x)) {
            break;
        }
    }
    report
}

/// ⟨y₁ − y₂, j(x₁ − x₂)⟩ ≥ 0 on graph pairs.
pub fn check_accretive_dual_graph(space: &LpSpace, pairs: &[(GraphPair, GraphPair)], name: &str) -> AuditReport {
    let mut report = AuditReport::new(format!("accretive_dual[{name}]"), SAMPLE_SLACK);
    for (a, b) in pairs {
        let value = space.pair_with_duality(&a.y.sub(&b.y), &a.x.sub(&b.x));
        if !report.record(-value, || format!("x1={} x2={}", a.x, b.x)) {
            break;
        }
    }
    report
}

pub fn check_accretive_metric(space: &LpSpace, a: &Operator, lambda: f64, pairs: &[(Vector, Vector)]) -> AuditReport {
    check_accretive_metric_graph(space, lambda, &pairs_to_graph(a, pairs), a.label())
}

pub fn check_accretive_dual(space: &LpSpace, a: &Operator, pairs: &[(Vector, Vector)]) -> AuditReport {
    check_accretive_dual_graph(space, &pairs_to_graph(a, pairs), a.label())
}

/// Default λ grid for the metric accretivity check.
pub const KATO_LAMBDAS: [f64; 4] = [0.1, 1.0, 10.0, 100.0];

/// Both accretivity characterizations on the same sample.
#[derive(Debug, Clone)]
pub struct KatoReport {
    pub metric: AuditReport,
    pub dual: AuditReport,
}

impl KatoReport {
    pub fn agree(&self) -> bool {
        self.metric.passed == self.dual.passed
    }
}

pub fn check_kato_equivalence(
    space: &LpSpace,
    a: &Operator,
    lambdas: &[f64],
    pairs: &[(Vector, Vector)],
) -> KatoReport {
    let graph = pairs_to_graph(a, pairs);
    let mut metric = AuditReport::new(format!("accretive_metric[{}]", a.label()), SAMPLE_SLACK);
    for &l in lambdas {
        metric.absorb(&check_accretive_metric_graph(space, l, &graph, a.label()));
    }
    let dual = check_accretive_dual_graph(space, &graph, a.label());
    KatoReport { metric, dual }
}

/// Both pseudocontraction characterizations on the same sample.
#[derive(Debug, Clone)]
pub struct PseudocontractionReport {
    pub metric: AuditReport,
    pub dual: AuditReport,
}

impl PseudocontractionReport {
    pub fn agree(&self) -> bool {
        self.metric.passed == self.dual.passed
    }

    pub fn passed(&self) -> bool {
        self.metric.passed && self.dual.passed
    }
}

/// t‖x−y‖ ≤ ‖(t+1)(x−y) − (Tx−Ty)‖ over `t_grid`, and
/// ⟨Tx−Ty, j(x−y)⟩ ≤ ‖x−y‖².
pub fn check_pseudocontraction(
    t: &Mapping,
    space: &LpSpace,
    pairs: &[(Vector, Vector)],
    t_grid: &[f64],
) -> PseudocontractionReport {
    let mut metric = AuditReport::new(format!("pseudocontraction_metric[{}]", t.label()), SAMPLE_SLACK);
    let mut dual = AuditReport::new(format!("pseudocontraction_dual[{}]", t.label()), SAMPLE_SLACK);
    let mut metric_live = true;
    let mut dual_live = true;
    for (x, y) in pairs {
        let d = x.sub(y);
        let td = t.apply(x).sub(&t.apply(y));
        let nd = space.norm_unchecked(&d);
        if metric_live {
            for &s in t_grid {
                let rhs = space.norm_unchecked(&d.combine(s + 1.0, &td, -1.0));
                if !metric.record(s * nd - rhs, || format!("x={x} y={y} t={s}")) {
                    metric_live = false;
                    break;
                }
            }
        }
        if dual_live {
            let lhs = space.pair_with_duality(&td, &d);
            dual_live = dual.record(lhs - nd * nd, || format!("x={x} y={y}"));
        }
        if !metric_live && !dual_live {
            break;
        }
    }
    PseudocontractionReport { metric, dual }
}

/// ⟨Ux−Uy, j(x−y)⟩ ≤ k‖x−y‖².
pub fn check_strong_pseudocontraction(u: &Mapping, k: f64, space: &LpSpace, pairs: &[(Vector, Vector)]) -> AuditReport {
    let mut report = AuditReport::new(format!("strong_pseudocontraction[{} k={k}]", u.label()), SAMPLE_SLACK);
    for (x, y) in pairs {
        let d = x.sub(y);
        let lhs = space.pair_with_duality(&u.apply(x).sub(&u.apply(y)), &d);
        let nd = space.norm_unchecked(&d);
        if !report.record(lhs - k * nd * nd, || format!("x={x} y={y}")) {
            break;
        }
    }
    report
}

/// Fixed point of a mapping by Picard iteration. With a Lipschitz constant
/// L < 1 the loop stops on the a posteriori bound L/(1−L)·step ≤ tol;
/// otherwise on step ≤ tol.
pub fn fixed_point_by_iteration(
    t: &Mapping,
    space: &LpSpace,
    start: &Vector,
    tol: f64,
    max_iter: usize,
) -> Option<(Vector, usize)> {
    let threshold = match t.lipschitz() {
        Some(l) if l < 1.0 && l > 0.0 => tol * (1.0 - l) / l,
        Some(0.0) => f64::INFINITY,
        _ => tol,
    };
    let mut x = start.clone();
    for k in 1..=max_iter {
        let next = t.apply(&x);
        let step = space.distance(&next, &x);
        x = next;
        if step <= threshold {
            return Some((x, k));
        }
    }
    None
}
