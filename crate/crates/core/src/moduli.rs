//! The quantitative functions of the convergence proof: ψ, ω_τ, η₁, η₂, δ,
//! β, q, ν₁, ν₁*, the counterfunction majorant, and the moduli governing the
//! parameter sequences (λ_n) and (t_n).
//!
//! Every formula is generic over [`Scalar`], so the same code runs in `f64`
//! and in exact `BigRational` arithmetic. The exact path needs every function
//! slot (η, τ, p) to carry an exact form.

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use thiserror::Error;

use crate::audit::AuditReport;
use crate::metastability::Counterfunction;
use crate::sampling::{batched_audit, in_ball, separated_pairs};
use crate::scalar::{IndexFn, Scalar, ScalarError, ScalarFn};
use crate::space::{ConvexityModulus, LpSpace, SmoothnessModulus, Vector, SAMPLE_SLACK};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModuliError {
    #[error("{quantity}: {detail}")]
    Domain { quantity: &'static str, detail: String },
    #[error(transparent)]
    Scalar(#[from] ScalarError),
}

fn domain<S: Scalar>(quantity: &'static str, what: &str, value: &S, expected: &str) -> ModuliError {
    ModuliError::Domain {
        quantity,
        detail: format!("{what} = {} must be {expected}", value.render()),
    }
}

/// A value together with whether an argument had to be clamped into ψ's
/// domain (0,2] on the way.
#[derive(Debug, Clone, PartialEq)]
pub struct Flagged<S> {
    pub value: S,
    pub clamped: bool,
}

impl<S> Flagged<S> {
    fn plain(value: S) -> Self {
        Self { value, clamped: false }
    }
}

/// ψ_{b,η}(ε) = min( min(ε/2, ε²/(72b)·η²(ε/2b))²/4 , ε²/48·η²(ε/2b) ).
pub fn psi<S: Scalar>(b: &S, eta: &ConvexityModulus, eps: &S) -> Result<S, ModuliError> {
    let half = S::from_ratio(1, 2);
    if *b < half {
        return Err(domain("psi", "b", b, ">= 1/2"));
    }
    if !eps.is_positive() || *eps > S::from_ratio(2, 1) {
        return Err(domain("psi", "eps", eps, "in (0,2]"));
    }
    let eta_sq = S::apply(eta.function(), &(eps.clone() / (S::from_u64(2) * b.clone())))?.square();
    let eps_sq = eps.square();
    let inner = Scalar::min(
        eps.clone() * half,
        eps_sq.clone() / (S::from_u64(72) * b.clone()) * eta_sq.clone(),
    );
    let first = inner.square() / S::from_u64(4);
    let second = eps_sq / S::from_u64(48) * eta_sq;
    Ok(Scalar::min(first, second))
}

/// ψ with its argument clamped into (0,2].
pub fn psi_clamped<S: Scalar>(b: &S, eta: &ConvexityModulus, arg: &S) -> Result<Flagged<S>, ModuliError> {
    let two = S::from_u64(2);
    if *arg > two {
        Ok(Flagged {
            value: psi(b, eta, &two)?,
            clamped: true,
        })
    } else {
        Ok(Flagged::plain(psi(b, eta, arg)?))
    }
}

/// ω_τ(b,ε) = r₁(ε)²/(12 r₂(b)) · τ(r₁(ε)/(2 r₂(b))), r₁ = min(ε,2), r₂ = max(b,1).
pub fn omega_tau<S: Scalar>(tau: &SmoothnessModulus, b: &S, eps: &S) -> Result<S, ModuliError> {
    if !b.is_positive() {
        return Err(domain("omega_tau", "b", b, "> 0"));
    }
    if !eps.is_positive() {
        return Err(domain("omega_tau", "eps", eps, "> 0"));
    }
    let r1 = Scalar::min(eps.clone(), S::from_u64(2));
    let r2 = Scalar::max(b.clone(), S::from_u64(1));
    let tau_val = S::apply(tau.function(), &(r1.clone() / (S::from_u64(2) * r2.clone())))?;
    Ok(r1.square() / (S::from_u64(12) * r2) * tau_val)
}

/// n ↦ max_{i ≤ n} g(i), the nondecreasing majorant of a counterfunction.
pub fn g_majorant(g: &Counterfunction, n: u64) -> u64 {
    (0..=n).map(|i| g.eval(i)).max().unwrap_or(0)
}

/// ξ′(n) = ξ(n+1).
pub fn xi_prime(xi: &IndexFn) -> IndexFn {
    let inner = xi.clone();
    IndexFn::new(format!("{}'", xi.label()), move |n| inner.eval(n + 1))
}

/// λ = t/(1−t) on (0,1).
pub fn lambda_of_t(t: f64) -> Result<f64, ModuliError> {
    if !(t > 0.0 && t < 1.0) {
        return Err(domain("lambda_of_t", "t", &t, "in (0,1)"));
    }
    Ok(t / (1.0 - t))
}

/// t = λ/(1+λ) on (0,∞).
pub fn t_of_lambda(lambda: f64) -> Result<f64, ModuliError> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain("t_of_lambda", "lambda", &lambda, "in (0,inf)"));
    }
    Ok(lambda / (1.0 + lambda))
}

/// Placeholder for the injected function p(ε): ε²/96. Configurable; the
/// actual choice belongs to the surrounding argument this chain plugs into.
pub fn placeholder_p_fn() -> ScalarFn {
    let c = BigRational::new(BigInt::from(1), BigInt::from(96));
    ScalarFn::new("eps^2/96", |e| e * e / 96.0).with_exact(move |e| e * e * c.clone())
}

pub fn identity_p_fn() -> ScalarFn {
    ScalarFn::new("eps", |e| e).with_exact(|e| e.clone())
}

/// The configured quantitative data: diameter bound b, moduli η and τ, the
/// injected functions p(·) and s(·), and the counterfunction g.
#[derive(Debug, Clone)]
pub struct ModuliChain {
    b: u32,
    eta: ConvexityModulus,
    tau: SmoothnessModulus,
    p_fn: ScalarFn,
    s_fn: IndexFn,
    g: Counterfunction,
}

impl ModuliChain {
    pub fn new(b: u32, eta: ConvexityModulus, tau: SmoothnessModulus) -> Result<Self, ModuliError> {
        if b == 0 {
            return Err(ModuliError::Domain {
                quantity: "chain",
                detail: "b must be a positive integer".into(),
            });
        }
        Ok(Self {
            b,
            eta,
            tau,
            p_fn: placeholder_p_fn(),
            s_fn: IndexFn::identity(),
            g: Counterfunction::Constant(1),
        })
    }

    pub fn with_p_fn(mut self, p_fn: ScalarFn) -> Self {
        self.p_fn = p_fn;
        self
    }

    pub fn with_s_fn(mut self, s_fn: IndexFn) -> Self {
        self.s_fn = s_fn;
        self
    }

    pub fn with_counterfunction(mut self, g: Counterfunction) -> Self {
        self.g = g;
        self
    }

    pub fn b(&self) -> u32 {
        self.b
    }

    pub fn eta(&self) -> &ConvexityModulus {
        &self.eta
    }

    pub fn tau(&self) -> &SmoothnessModulus {
        &self.tau
    }

    pub fn p_fn(&self) -> &ScalarFn {
        &self.p_fn
    }

    pub fn s_fn(&self) -> &IndexFn {
        &self.s_fn
    }

    pub fn counterfunction(&self) -> &Counterfunction {
        &self.g
    }

    /// Whether every function slot can be evaluated exactly.
    pub fn supports_exact(&self) -> bool {
        self.eta.function().has_exact() && self.tau.function().has_exact() && self.p_fn.has_exact()
    }

    fn b_as<S: Scalar>(&self) -> S {
        S::from_u64(self.b as u64)
    }

    pub fn psi<S: Scalar>(&self, eps: &S) -> Result<S, ModuliError> {
        psi(&self.b_as(), &self.eta, eps)
    }

    pub fn omega_tau<S: Scalar>(&self, eps: &S) -> Result<S, ModuliError> {
        omega_tau(&self.tau, &self.b_as(), eps)
    }

    /// η₁ = min(ε, ½ψ(ε)).
    pub fn eta1<S: Scalar>(&self, eps: &S) -> Result<S, ModuliError> {
        let half_psi = self.psi(eps)? * S::from_ratio(1, 2);
        Ok(Scalar::min(eps.clone(), half_psi))
    }

    /// η₂ = min(ε, ½ψ(ω_τ(b, ε/2b))).
    pub fn eta2<S: Scalar>(&self, eps: &S) -> Result<Flagged<S>, ModuliError> {
        if !eps.is_positive() {
            return Err(domain("eta2", "eps", eps, "> 0"));
        }
        let b: S = self.b_as();
        let arg = self.omega_tau(&(eps.clone() / (S::from_u64(2) * b.clone())))?;
        let psi = psi_clamped(&b, &self.eta, &arg)?;
        Ok(Flagged {
            value: Scalar::min(eps.clone(), psi.value * S::from_ratio(1, 2)),
            clamped: psi.clamped,
        })
    }

    /// δ = min(η₂, ε/(4bλ), ω_τ(b, ε/4b)).
    pub fn delta<S: Scalar>(&self, eps: &S, lambda: &S) -> Result<Flagged<S>, ModuliError> {
        if !lambda.is_positive() {
            return Err(domain("delta", "lambda", lambda, "> 0"));
        }
        let eta2 = self.eta2(eps)?;
        let b: S = self.b_as();
        let four_b = S::from_u64(4) * b;
        let middle = eps.clone() / (four_b.clone() * lambda.clone());
        let last = self.omega_tau(&(eps.clone() / four_b))?;
        Ok(Flagged {
            value: Scalar::min(Scalar::min(eta2.value, middle), last),
            clamped: eta2.clamped,
        })
    }

    /// β(c,ε) = p(ε)/(4bγ(c)).
    pub fn beta<S: Scalar>(&self, gamma: &IndexFn, c: u64, eps: &S) -> Result<S, ModuliError> {
        let g = gamma.eval(c);
        if g == 0 {
            return Err(ModuliError::Domain {
                quantity: "beta",
                detail: format!("gamma({c}) must be >= 1"),
            });
        }
        let p = S::apply(&self.p_fn, eps)?;
        if !p.is_positive() {
            return Err(domain("beta", "p(eps)", &p, "> 0"));
        }
        Ok(p / (S::from_u64(4) * self.b_as::<S>() * S::from_u64(g)))
    }

    /// ω_τ(b, p(ε)/4b), the arm shared by q and ν₁*.
    fn omega_of_p<S: Scalar>(&self, eps: &S) -> Result<S, ModuliError> {
        let p = S::apply(&self.p_fn, eps)?;
        self.omega_tau(&(p / (S::from_u64(4) * self.b_as::<S>())))
    }

    /// q(c,d,ε) = min{β(c,ε), β(s(d),ε), ω_τ(b, p(ε)/4b)}.
    pub fn q_mod<S: Scalar>(&self, gamma: &IndexFn, c: u64, d: u64, eps: &S) -> Result<S, ModuliError> {
        let first = self.beta(gamma, c, eps)?;
        let second = self.beta(gamma, self.s_fn.eval(d), eps)?;
        let third = self.omega_of_p(eps)?;
        Ok(Scalar::min(Scalar::min(first, second), third))
    }

    /// ν₁(c,d,ε) = ½ψ(q(c,d,ε)).
    pub fn nu1<S: Scalar>(&self, gamma: &IndexFn, c: u64, d: u64, eps: &S) -> Result<Flagged<S>, ModuliError> {
        let q = self.q_mod(gamma, c, d, eps)?;
        let psi = psi_clamped(&self.b_as(), &self.eta, &q)?;
        Ok(Flagged {
            value: psi.value * S::from_ratio(1, 2),
            clamped: psi.clamped,
        })
    }

    /// Upper end of the index range of ν₁*: max(m, n + g^M(n)).
    pub fn nu1_star_range(&self, m: u64, n: u64) -> u64 {
        m.max(n + g_majorant(&self.g, n))
    }

    /// ν₁*(m,n) = ½ min_{c ≤ max(m, n+g^M(n))} ψ(min{β(c,ε), ω_τ(b, p(ε)/4b)}),
    /// enumerated over the whole range.
    pub fn nu1_star<S: Scalar>(&self, gamma: &IndexFn, m: u64, n: u64, eps: &S) -> Result<Flagged<S>, ModuliError> {
        let omega = self.omega_of_p(eps)?;
        let b: S = self.b_as();
        let mut best: Option<Flagged<S>> = None;
        for c in 0..=self.nu1_star_range(m, n) {
            let arg = Scalar::min(self.beta(gamma, c, eps)?, omega.clone());
            let val = psi_clamped(&b, &self.eta, &arg)?;
            best = Some(match best {
                None => val,
                Some(cur) => Flagged {
                    clamped: cur.clamped || val.clamped,
                    value: Scalar::min(cur.value, val.value),
                },
            });
        }
        let best = best.expect("index range is never empty");
        Ok(Flagged {
            value: best.value * S::from_ratio(1, 2),
            clamped: best.clamped,
        })
    }
}

/// A parameter sequence n ↦ λ_n in (0,∞).
#[derive(Clone)]
pub struct LambdaSequence {
    label: String,
    f: Arc<dyn Fn(u64) -> f64 + Send + Sync>,
}

impl LambdaSequence {
    pub fn new(label: impl Into<String>, f: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    /// λ_n = n + 1.
    pub fn n_plus_one() -> Self {
        Self::new("n_plus_1", |n| n as f64 + 1.0)
    }

    /// λ_n = t_n/(1−t_n).
    pub fn from_t(t: &TSequence) -> Self {
        let t = t.clone();
        Self::new(format!("lambda_of({})", t.label()), move |n| {
            let tn = t.eval(n);
            tn / (1.0 - tn)
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, n: u64) -> f64 {
        (self.f)(n)
    }
}

impl std::fmt::Debug for LambdaSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "LambdaSequence({})", self.label)
    }
}

/// A parameter sequence n ↦ t_n in (0,1).
#[derive(Clone)]
pub struct TSequence {
    label: String,
    f: Arc<dyn Fn(u64) -> f64 + Send + Sync>,
}

impl TSequence {
    pub fn new(label: impl Into<String>, f: impl Fn(u64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    /// t_n = 1 − 1/(n+2).
    pub fn one_minus_inv_n_plus_2() -> Self {
        Self::new("one_minus_inv_n_plus_2", |n| 1.0 - 1.0 / (n as f64 + 2.0))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, n: u64) -> f64 {
        (self.f)(n)
    }
}

impl std::fmt::Debug for TSequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "TSequence({})", self.label)
    }
}

/// Rate and bound moduli of a parameter sequence: `rate` is α (λ-sequences)
/// or ξ (t-sequences) and `gamma` the upper-bound modulus.
#[derive(Debug, Clone)]
pub struct SequenceModuli {
    pub rate: IndexFn,
    pub gamma: IndexFn,
}

impl SequenceModuli {
    /// α(n) = n, γ(n) = n+1 for λ_n = n+1.
    pub fn for_n_plus_one() -> Self {
        Self {
            rate: IndexFn::identity(),
            gamma: IndexFn::shift(1),
        }
    }

    /// ξ(n) = n, γ(n) = n+2 for t_n = 1 − 1/(n+2).
    pub fn for_default_t() -> Self {
        Self {
            rate: IndexFn::identity(),
            gamma: IndexFn::shift(2),
        }
    }

    /// The λ-moduli induced by t-moduli: (ξ′, γ).
    pub fn transferred_from_t(&self) -> Self {
        Self {
            rate: xi_prime(&self.rate),
            gamma: self.gamma.clone(),
        }
    }
}

/// Relative tolerance for the sequence-moduli audits (the default t-sequence
/// hits its bounds with equality up to rounding).
pub const SEQUENCE_TOL: f64 = 1e-9;

fn relative_margin(lhs: f64, rhs: f64) -> f64 {
    (lhs - rhs) / rhs.abs().max(1.0)
}

/// Suffix minima of `values`.
fn suffix_min(values: &[f64]) -> Vec<f64> {
    let mut out = values.to_vec();
    for i in (0..out.len().saturating_sub(1)).rev() {
        out[i] = out[i].min(out[i + 1]);
    }
    out
}

fn rate_horizon(rate: &IndexFn, n_max: u64) -> u64 {
    (0..=n_max).map(|n| rate.eval(n)).max().unwrap_or(0) + n_max + 1
}

/// Checks, for n ≤ n_max, that λ_m ≥ n+1 for every m in [α(n), H] and
/// λ_n ≤ γ(n). The horizon H lies n_max + 1 past the largest α(n); every m
/// up to it is enumerated.
pub fn check_lambda_moduli(seq: &LambdaSequence, moduli: &SequenceModuli, n_max: u64) -> AuditReport {
    let name = format!(
        "lambda_moduli[{} alpha={} gamma={}]",
        seq.label(),
        moduli.rate.label(),
        moduli.gamma.label()
    );
    let mut report = AuditReport::new(name, SEQUENCE_TOL);
    let horizon = rate_horizon(&moduli.rate, n_max);
    let values: Vec<f64> = (0..=horizon).map(|m| seq.eval(m)).collect();
    let tail_min = suffix_min(&values);
    for n in 0..=n_max {
        let a = moduli.rate.eval(n) as usize;
        let need = n as f64 + 1.0;
        if !report.record(relative_margin(need, tail_min[a]), || format!("rate fails at n={n}")) {
            break;
        }
        let g = moduli.gamma.eval(n) as f64;
        if !report.record(relative_margin(values[n as usize], g), || {
            format!("gamma fails at n={n}")
        }) {
            break;
        }
    }
    report
}

/// The t-sequence analogue: t_m ≥ 1 − 1/(n+1) for m ≥ ξ(n), t_n ≤ 1 − 1/γ(n).
pub fn check_t_moduli(seq: &TSequence, moduli: &SequenceModuli, n_max: u64) -> AuditReport {
    let name = format!(
        "t_moduli[{} xi={} gamma={}]",
        seq.label(),
        moduli.rate.label(),
        moduli.gamma.label()
    );
    let mut report = AuditReport::new(name, SEQUENCE_TOL);
    let horizon = rate_horizon(&moduli.rate, n_max);
    let values: Vec<f64> = (0..=horizon).map(|m| seq.eval(m)).collect();
    let tail_min = suffix_min(&values);
    for n in 0..=n_max {
        let x = moduli.rate.eval(n) as usize;
        let need = 1.0 - 1.0 / (n as f64 + 1.0);
        if !report.record(relative_margin(need, tail_min[x]), || format!("xi fails at n={n}")) {
            break;
        }
        let g = moduli.gamma.eval(n);
        let bound = if g == 0 {
            f64::NEG_INFINITY
        } else {
            1.0 - 1.0 / g as f64
        };
        if !report.record(relative_margin(values[n as usize], bound), || {
            format!("gamma fails at n={n}")
        }) {
            break;
        }
    }
    report
}

/// Samples pairs with ‖x‖,‖y‖ ≤ b and ‖x−y‖ ≥ ε and checks
/// ‖(x+y)/2‖² + ψ_{b,η}(ε) ≤ ½‖x‖² + ½‖y‖².
pub fn verify_psi_property(
    space: &LpSpace,
    eta: &ConvexityModulus,
    b: f64,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<AuditReport, ModuliError> {
    let psi_val = psi(&b, eta, &eps)?;
    let name = format!("psi_property[{} p={} b={b} eps={eps}]", eta.label(), space.p());
    Ok(batched_audit(&name, SAMPLE_SLACK, samples, seed, |rng, count, rep| {
        let (pairs, exhausted) = separated_pairs(space, b, eps, count, rng);
        if exhausted {
            rep.flag("sampler exhausted");
        }
        for (x, y) in pairs {
            let mid = space.norm_unchecked(&x.midpoint(&y));
            let lhs = mid * mid + psi_val;
            let nx = space.norm_unchecked(&x);
            let ny = space.norm_unchecked(&y);
            let rhs = 0.5 * nx * nx + 0.5 * ny * ny;
            if !rep.record(lhs - rhs, || format!("x={x} y={y}")) {
                break;
            }
        }
    }))
}

/// Samples ‖x‖,‖y‖ ≤ b with ‖x−y‖ ≤ ω_τ(b,ε) and checks ‖j(x) − j(y)‖ ≤ ε.
pub fn verify_omega_property(
    space: &LpSpace,
    tau: &SmoothnessModulus,
    b: f64,
    eps: f64,
    samples: usize,
    seed: u64,
) -> Result<AuditReport, ModuliError> {
    use rand::Rng;
    let omega = omega_tau(tau, &b, &eps)?;
    let name = format!("omega_property[{} p={} b={b} eps={eps}]", tau.label(), space.p());
    let origin = Vector::zeros(space.dim());
    Ok(batched_audit(&name, SAMPLE_SLACK, samples, seed, |rng, count, rep| {
        let mut done = 0;
        let mut attempts = 0;
        while done < count && attempts < count * crate::sampling::REJECTION_FACTOR {
            attempts += 1;
            let x = in_ball(space, &origin, b, rng);
            let r = if rng.gen_bool(0.5) {
                omega
            } else {
                omega * rng.gen::<f64>()
            };
            let y = x.add(&crate::sampling::unit_sphere(space, rng).scale(r));
            if space.norm_unchecked(&y) > b {
                continue;
            }
            done += 1;
            let jx = space.duality_map_unchecked(&x);
            let jy = space.duality_map_unchecked(&y);
            let gap = space.dual_norm(&jx.sub(&jy)).unwrap_or(f64::INFINITY);
            if !rep.record(gap - eps, || format!("x={x} y={y}")) {
                break;
            }
        }
        if done < count {
            rep.flag("sampler exhausted");
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{lp_convexity_modulus, lp_smoothness_modulus};
    use num_traits::One;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn rational_chain(b: u32) -> ModuliChain {
        ModuliChain::new(b, ConvexityModulus::quadratic(), SmoothnessModulus::identity())
            .unwrap()
            .with_p_fn(identity_p_fn())
    }

    #[test]
    fn psi_example_first_branch() {
        let eta = ConvexityModulus::quadratic();
        let val = psi(&r(1, 1), &eta, &r(2, 1)).unwrap();
        assert_eq!(val, r(1, 5_308_416));
        let f = psi(&1.0, &eta, &2.0).unwrap();
        assert!((f - 1.0 / 5_308_416.0).abs() < 1e-22);
    }

    #[test]
    fn psi_with_lp_modulus_p2() {
        let s = LpSpace::new(2.0, 2).unwrap();
        let eta = lp_convexity_modulus(&s);
        let e1 = 1.0 - 0.75f64.sqrt();
        let first = (2.0f64 / 2.0).min(4.0 / 72.0 * e1 * e1).powi(2) / 4.0;
        let second = 4.0 / 48.0 * e1 * e1;
        let val = psi(&1.0, &eta, &2.0).unwrap();
        assert!((val - first.min(second)).abs() < 1e-18);
    }

    #[test]
    fn psi_domain_errors() {
        let eta = ConvexityModulus::quadratic();
        assert!(psi(&1.0, &eta, &0.0).is_err());
        assert!(psi(&1.0, &eta, &2.5).is_err());
        assert!(psi(&0.25, &eta, &1.0).is_err());
        assert!(psi(&0.5, &eta, &1.0).unwrap() > 0.0);
    }

    #[test]
    fn omega_tau_examples() {
        let tau = SmoothnessModulus::identity();
        assert_eq!(omega_tau(&tau, &r(1, 1), &r(1, 1)).unwrap(), r(1, 24));
        assert_eq!(omega_tau(&tau, &r(2, 1), &r(3, 1)).unwrap(), r(1, 12));
        let a = omega_tau(&tau, &1.5, &2.0).unwrap();
        for e in [2.5, 3.0, 10.0] {
            assert_eq!(omega_tau(&tau, &1.5, &e).unwrap(), a);
        }
        assert!(omega_tau(&tau, &0.0, &1.0).is_err());
        assert!(omega_tau(&tau, &1.0, &-1.0).is_err());
    }

    #[test]
    fn eta1_and_eta2_examples() {
        let chain = rational_chain(1);
        assert_eq!(chain.eta1(&r(2, 1)).unwrap(), r(1, 10_616_832));
        let eta2 = chain.eta2(&r(2, 1)).unwrap();
        let expected = Scalar::min(r(2, 1), psi(&r(1, 1), chain.eta(), &r(1, 24)).unwrap() * r(1, 2));
        assert_eq!(eta2.value, expected);
        assert!(!eta2.clamped);
        for e in [0.01, 0.3, 1.0, 2.0] {
            let a = chain.eta1(&e).unwrap();
            assert!(a > 0.0 && a <= e);
            let b = chain.eta2(&e).unwrap().value;
            assert!(b > 0.0 && b <= e);
        }
    }

    #[test]
    fn eta2_clamps_large_omega() {
        // τ large enough that ω_τ(b, ε/2b) exceeds 2.
        let tau = SmoothnessModulus::from_fn(ScalarFn::new("1000eps", |e| 1000.0 * e));
        let chain = ModuliChain::new(1, ConvexityModulus::quadratic(), tau).unwrap();
        let out = chain.eta2(&4.0).unwrap();
        assert!(out.clamped);
        assert!(out.value > 0.0);
    }

    #[test]
    fn delta_examples() {
        let chain = rational_chain(1);
        let d = chain.delta(&r(4, 1), &r(1, 1)).unwrap().value;
        let eta2 = chain.eta2(&r(4, 1)).unwrap().value;
        let expected = Scalar::min(Scalar::min(eta2, r(1, 1)), r(1, 24));
        assert_eq!(d, expected);
        for lambda in [0.5, 1.0, 10.0, 1e3] {
            for eps in [0.1, 1.0, 4.0] {
                let dv = chain.delta(&eps, &lambda).unwrap().value;
                assert!(dv * chain.b() as f64 * lambda <= eps / 4.0 * (1.0 + 1e-15));
            }
        }
        let big = chain.delta(&1.0, &1e12).unwrap().value;
        assert!(big <= 1.0 / 4e12);
        assert!(chain.delta(&1.0, &0.0).is_err());
    }

    #[test]
    fn beta_examples() {
        let chain = rational_chain(1);
        let gamma = IndexFn::shift(1);
        assert_eq!(chain.beta(&gamma, 1, &r(1, 1)).unwrap(), r(1, 8));
        let mut prev = f64::INFINITY;
        for c in 0..20 {
            let v = chain.beta(&gamma, c, &0.7).unwrap();
            assert!(v < prev);
            prev = v;
            let prod = r(1, 1)
                * BigRational::from_integer(BigInt::from(gamma.eval(c)))
                * chain.beta(&gamma, c, &r(7, 10)).unwrap();
            assert_eq!(prod, r(7, 40));
        }
        let zero_gamma = IndexFn::new("zero", |_| 0);
        assert!(chain.beta(&zero_gamma, 0, &1.0).is_err());
    }

    #[test]
    fn q_mod_examples() {
        let gamma = IndexFn::shift(1);
        let chain = rational_chain(1).with_s_fn(IndexFn::new("2d", |d| 2 * d));
        let q = chain.q_mod(&gamma, 1, 1, &r(1, 1)).unwrap();
        let omega = omega_tau(chain.tau(), &r(1, 1), &r(1, 4)).unwrap();
        assert_eq!(omega, r(1, 1536));
        assert_eq!(q, Scalar::min(Scalar::min(r(1, 8), r(1, 12)), omega));

        let same = rational_chain(1);
        for c in 0..5 {
            let q = same.q_mod(&gamma, c, c, &r(1, 2)).unwrap();
            let expected = Scalar::min(
                same.beta(&gamma, c, &r(1, 2)).unwrap(),
                omega_tau(same.tau(), &r(1, 1), &r(1, 8)).unwrap(),
            );
            assert_eq!(q, expected);
        }
    }

    #[test]
    fn nu1_composition() {
        let gamma = IndexFn::shift(1);
        let chain = rational_chain(1).with_s_fn(IndexFn::new("2d", |d| 2 * d));
        let nu = chain.nu1(&gamma, 1, 1, &r(1, 1)).unwrap();
        let expected = psi(&r(1, 1), chain.eta(), &r(1, 1536)).unwrap() * r(1, 2);
        assert_eq!(nu.value, expected);
        assert!(nu.value > r(0, 1));
        assert!(nu.value <= psi(&r(1, 1), chain.eta(), &r(2, 1)).unwrap() * r(1, 2));
    }

    #[test]
    fn nu1_star_singleton_range() {
        let chain = rational_chain(1).with_counterfunction(Counterfunction::Constant(0));
        let gamma = IndexFn::shift(1);
        assert_eq!(chain.nu1_star_range(0, 0), 0);
        let eps = r(1, 2);
        let got = chain.nu1_star(&gamma, 0, 0, &eps).unwrap().value;
        let arg = Scalar::min(
            chain.beta(&gamma, 0, &eps).unwrap(),
            omega_tau(chain.tau(), &r(1, 1), &(eps.clone() / r(4, 1))).unwrap(),
        );
        assert_eq!(got, psi(&r(1, 1), chain.eta(), &arg).unwrap() * r(1, 2));
    }

    #[test]
    fn nu1_star_attained_at_range_end_for_monotone_gamma() {
        let gamma = IndexFn::shift(1);
        for g in [
            Counterfunction::Constant(2),
            Counterfunction::Identity,
            Counterfunction::Affine { slope: 2, offset: 3 },
        ] {
            let chain = rational_chain(2).with_counterfunction(g);
            for (m, n) in [(0, 0), (3, 1), (10, 2), (1, 4)] {
                let eps = r(3, 4);
                let star = chain.nu1_star(&gamma, m, n, &eps).unwrap().value;
                // Independent enumeration: evaluate every c and take the minimum.
                let top = chain.nu1_star_range(m, n);
                let omega = chain.omega_tau(&(eps.clone() * r(1, 1) / r(8, 1))).unwrap();
                let vals: Vec<BigRational> = (0..=top)
                    .map(|c| {
                        let arg = Scalar::min(chain.beta(&gamma, c, &eps).unwrap(), omega.clone());
                        psi(&r(2, 1), chain.eta(), &arg).unwrap() * r(1, 2)
                    })
                    .collect();
                let min = vals.iter().cloned().fold(vals[0].clone(), Scalar::min);
                assert_eq!(star, min);
                assert_eq!(star, vals[top as usize]);
                assert!(vals.iter().all(|v| star <= *v));
            }
        }
    }

    #[test]
    fn g_majorant_examples() {
        let affine = Counterfunction::Affine { slope: 2, offset: 3 };
        for n in 0..50 {
            assert_eq!(g_majorant(&affine, n), 2 * n + 3);
            assert_eq!(g_majorant(&Counterfunction::Constant(5), n), 5);
        }
        let table = Counterfunction::Table(vec![4, 1, 0]);
        let got: Vec<u64> = (0..6).map(|n| g_majorant(&table, n)).collect();
        assert_eq!(got, vec![4, 4, 4, 4, 4, 4]);
    }

    #[test]
    fn xi_prime_shifts() {
        let xp = xi_prime(&IndexFn::identity());
        for n in 0..100 {
            assert_eq!(xp.eval(n), n + 1);
        }
    }

    #[test]
    fn lambda_t_bridge() {
        assert_eq!(lambda_of_t(0.5).unwrap(), 1.0);
        assert_eq!(t_of_lambda(1.0).unwrap(), 0.5);
        let t = TSequence::one_minus_inv_n_plus_2();
        for n in 0..1000 {
            let l = lambda_of_t(t.eval(n)).unwrap();
            assert!((l - (n as f64 + 1.0)).abs() <= 1e-9 * (n as f64 + 1.0));
        }
        for k in 1..1000 {
            let t = k as f64 / 1000.0;
            if t >= 1.0 {
                continue;
            }
            let back = t_of_lambda(lambda_of_t(t).unwrap()).unwrap();
            assert!((back - t).abs() <= 1e-12);
        }
        assert!(lambda_of_t(0.0).is_err());
        assert!(lambda_of_t(1.0).is_err());
        assert!(t_of_lambda(0.0).is_err());
        assert!(t_of_lambda(f64::INFINITY).is_err());
    }

    #[test]
    fn default_sequence_moduli_hold() {
        let r = check_lambda_moduli(&LambdaSequence::n_plus_one(), &SequenceModuli::for_n_plus_one(), 10_000);
        assert!(r.passed, "{r}");
        let r = check_t_moduli(
            &TSequence::one_minus_inv_n_plus_2(),
            &SequenceModuli::for_default_t(),
            10_000,
        );
        assert!(r.passed, "{r}");
        let lam = LambdaSequence::from_t(&TSequence::one_minus_inv_n_plus_2());
        let r = check_lambda_moduli(&lam, &SequenceModuli::for_default_t().transferred_from_t(), 1000);
        assert!(r.passed, "{r}");
    }

    #[test]
    fn wrong_sequence_moduli_fail() {
        let bad = SequenceModuli {
            rate: IndexFn::new("zero", |_| 0),
            gamma: IndexFn::shift(1),
        };
        assert!(!check_lambda_moduli(&LambdaSequence::n_plus_one(), &bad, 10).passed);
        let bad_gamma = SequenceModuli {
            rate: IndexFn::identity(),
            gamma: IndexFn::identity(),
        };
        assert!(!check_lambda_moduli(&LambdaSequence::n_plus_one(), &bad_gamma, 10).passed);
    }

    #[test]
    fn exact_path_requires_exact_forms() {
        let s = LpSpace::new(3.0, 2).unwrap();
        let chain = ModuliChain::new(1, lp_convexity_modulus(&s), lp_smoothness_modulus(&s)).unwrap();
        assert!(!chain.supports_exact());
        assert!(matches!(chain.eta1(&BigRational::one()), Err(ModuliError::Scalar(_))));
        assert!(chain.eta1(&1.0).is_ok());
    }

    #[test]
    fn sampled_properties_pass() {
        let s = LpSpace::new(2.0, 2).unwrap();
        let r = verify_psi_property(&s, &lp_convexity_modulus(&s), 1.0, 1.0, 1000, 2).unwrap();
        assert!(r.passed, "{r}");
        let r = verify_omega_property(&s, &lp_smoothness_modulus(&s), 1.0, 0.1, 1000, 2).unwrap();
        assert!(r.passed, "{r}");
    }
}
