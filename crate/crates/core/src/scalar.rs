//! Number types shared by the floating-point and exact rational evaluation
//! paths, plus labelled function slots that can be evaluated in either.

use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalarError {
    #[error("function `{0}` has no exact rational form")]
    NoExactForm(String),
    #[error("{quantity}: argument {value} outside {domain}")]
    Domain {
        quantity: String,
        value: String,
        domain: &'static str,
    },
}

pub type FloatFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ExactFn = Arc<dyn Fn(&BigRational) -> BigRational + Send + Sync>;

/// A real function with a float implementation and, when the function is
/// rational-valued on rationals, an exact one.
#[derive(Clone)]
pub struct ScalarFn {
    label: String,
    float: FloatFn,
    exact: Option<ExactFn>,
}

impl ScalarFn {
    pub fn new(label: impl Into<String>, float: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            float: Arc::new(float),
            exact: None,
        }
    }

    pub fn with_exact(mut self, exact: impl Fn(&BigRational) -> BigRational + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        (self.float)(x)
    }

    pub fn eval_exact(&self, x: &BigRational) -> Result<BigRational, ScalarError> {
        match &self.exact {
            Some(f) => Ok(f(x)),
            None => Err(ScalarError::NoExactForm(self.label.clone())),
        }
    }

    /// `x ↦ factor · f(x)`, exact when `f` is.
    pub fn scaled(&self, factor: f64) -> Self {
        let inner = self.float.clone();
        let mut out = ScalarFn::new(format!("{factor}*{}", self.label), move |x| factor * inner(x));
        if let (Some(exact), Some(r)) = (self.exact.clone(), rational_from_decimal(factor)) {
            out.exact = Some(Arc::new(move |x| exact(x) * r.clone()));
        }
        out
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFn")
            .field("label", &self.label)
            .field("exact", &self.exact.is_some())
            .finish()
    }
}

/// A function ℕ → ℕ with a label (sequence moduli, `s`-style injections).
#[derive(Clone)]
pub struct IndexFn {
    label: String,
    f: Arc<dyn Fn(u64) -> u64 + Send + Sync>,
}

impl IndexFn {
    pub fn new(label: impl Into<String>, f: impl Fn(u64) -> u64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn identity() -> Self {
        Self::new("identity", |n| n)
    }

    pub fn shift(offset: u64) -> Self {
        Self::new(format!("n+{offset}"), move |n| n + offset)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, n: u64) -> u64 {
        (self.f)(n)
    }
}

impl fmt::Debug for IndexFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IndexFn({})", self.label)
    }
}

/// Arithmetic needed by the moduli formulas. Implemented for `f64` (fast
/// path) and `BigRational` (exact path).
pub trait Scalar:
    Clone + PartialOrd + fmt::Debug + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self>
{
    fn from_ratio(num: i64, den: i64) -> Self;
    fn from_u64(n: u64) -> Self;
    fn apply(f: &ScalarFn, x: &Self) -> Result<Self, ScalarError>;
    fn is_positive(&self) -> bool;
    fn render(&self) -> String;

    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn square(&self) -> Self {
        self.clone() * self.clone()
    }
}

impl Scalar for f64 {
    fn from_ratio(num: i64, den: i64) -> Self {
        num as f64 / den as f64
    }

    fn from_u64(n: u64) -> Self {
        n as f64
    }

    fn apply(f: &ScalarFn, x: &Self) -> Result<Self, ScalarError> {
        Ok(f.eval_f64(*x))
    }

    fn is_positive(&self) -> bool {
        *self > 0.0
    }

    fn render(&self) -> String {
        format!("{self}")
    }
}

impl Scalar for BigRational {
    fn from_ratio(num: i64, den: i64) -> Self {
        BigRational::new(BigInt::from(num), BigInt::from(den))
    }

    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }

    fn apply(f: &ScalarFn, x: &Self) -> Result<Self, ScalarError> {
        f.eval_exact(x)
    }

    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }

    fn render(&self) -> String {
        self.to_string()
    }
}

/// Exact rational for the shortest decimal representation of `x`, so that
/// `0.1` maps to `1/10` rather than its binary expansion.
pub fn rational_from_decimal(x: f64) -> Option<BigRational> {
    if !x.is_finite() {
        return None;
    }
    let text = format!("{x}");
    let (negative, digits) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text.as_str()),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    let mut numerator: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
    if negative {
        numerator = -numerator;
    }
    let denominator = num_traits::pow(BigInt::from(10u8), frac_part.len());
    Some(BigRational::new(numerator, denominator))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    r.to_f64().unwrap_or(f64::NAN)
}

/// `x` raised to a non-negative integer power.
pub fn rational_powi(x: &BigRational, exp: u32) -> BigRational {
    num_traits::pow(x.clone(), exp as usize)
}
