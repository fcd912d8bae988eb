//! Numerical toolkit for resolvents of accretive operators on ℓ_p spaces:
//! duality maps and moduli of convexity and smoothness, the explicit moduli
//! feeding a rate of metastability for the approximating curve
//! x_n = J_{λ_n A}x, and sampling audits of the inequalities behind it.

pub mod audit;
pub mod cli;
pub mod config;
pub mod metastability;
pub mod moduli;
pub mod operators;
pub mod resolvent;
pub mod sampling;
pub mod scalar;
pub mod space;
pub mod zoo;

pub use audit::AuditReport;
pub use space::{LpSpace, Vector};
