//! Named operator families with known zeros, selectable from configs.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::operators::{ConvexDomain, Mapping, Operator, OperatorKind};
use crate::space::{LpSpace, Vector};

/// Radius of the ball domains.
pub const DOMAIN_RADIUS: f64 = 2.0;

pub const NAMES: [&str; 10] = [
    "zero",
    "identity_matrix",
    "psd_matrix",
    "skew_matrix",
    "diag_kernel",
    "diag_cubic",
    "constant_target",
    "rotation",
    "clip_contraction",
    "id_minus_identity",
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ZooError {
    #[error("unknown operator `{name}` (known: {})", NAMES.join(", "))]
    Unknown { name: String },
    #[error("operator `{name}` {reason}")]
    Unsupported { name: String, reason: String },
}

/// An operator with a default starting point and some certified zeros.
#[derive(Debug, Clone)]
pub struct ZooEntry {
    pub name: &'static str,
    pub operator: Operator,
    pub base_point: Vector,
    pub zeros: Vec<Vector>,
}

/// x0_i = 0.8·(−0.5)^i.
pub fn default_base_point(dim: usize) -> Vector {
    Vector::from_vec((0..dim).map(|i| 0.8 * (-0.5f64).powi(i as i32)).collect())
}

fn padded(head: &[f64], dim: usize) -> Vector {
    Vector::from_vec((0..dim).map(|i| head.get(i).copied().unwrap_or(0.0)).collect())
}

fn ball(center: &Vector) -> ConvexDomain {
    ConvexDomain::Ball {
        center: center.clone(),
        radius: DOMAIN_RADIUS,
    }
}

/// Points of the form `anchor + s·e_i` for a few s, kept inside the domain.
fn kernel_points(space: &LpSpace, op: &Operator, anchor: &Vector, free: &[usize]) -> Vec<Vector> {
    let mut out = vec![anchor.clone()];
    for &i in free {
        for s in [-1.0, -0.35, 0.6, 1.5] {
            let p = anchor.add(&Vector::basis(anchor.dim(), i).scale(s));
            if op.domain().contains(space, &p) {
                out.push(p);
            }
        }
    }
    out
}

pub fn is_known(name: &str) -> bool {
    NAMES.contains(&name)
}

/// Entries usable in `space`: p = 2 only families are skipped otherwise, and
/// planar families need dimension ≥ 2.
pub fn entries(space: &LpSpace) -> Vec<ZooEntry> {
    NAMES.iter().filter_map(|n| build(n, space).ok()).collect()
}

pub fn build(name: &str, space: &LpSpace) -> Result<ZooEntry, ZooError> {
    let dim = space.dim();
    let p2 = space.p() == 2.0;
    let unsupported = |reason: &str| ZooError::Unsupported {
        name: name.to_string(),
        reason: reason.to_string(),
    };
    let origin = Vector::zeros(dim);
    let x0 = default_base_point(dim);
    let all: Vec<usize> = (0..dim).collect();
    let (key, operator, zeros) = match name {
        "zero" => {
            let op = Operator::zero(dim, ball(&origin));
            let zeros = kernel_points(space, &op, &origin, &all);
            ("zero", op, zeros)
        }
        "identity_matrix" => {
            let op = Operator::matrix("identity_matrix", DMatrix::identity(dim, dim), ball(&origin)).expect("square");
            ("identity_matrix", op, vec![origin.clone()])
        }
        "psd_matrix" => {
            if !p2 {
                return Err(unsupported("is accretive only for p = 2"));
            }
            let m = DMatrix::from_fn(dim, dim, |i, j| match i.abs_diff(j) {
                0 => 2.0,
                1 => 1.0,
                _ => 0.0,
            });
            let op = Operator::matrix("psd_matrix", m, ball(&origin)).expect("square");
            ("psd_matrix", op, vec![origin.clone()])
        }
        "skew_matrix" => {
            if !p2 {
                return Err(unsupported("is accretive only for p = 2"));
            }
            if dim < 2 {
                return Err(unsupported("needs dimension >= 2"));
            }
            let mut m = DMatrix::zeros(dim, dim);
            m[(0, 1)] = -1.0;
            m[(1, 0)] = 1.0;
            let op = Operator::matrix("skew_matrix", m, ball(&origin)).expect("square");
            let free: Vec<usize> = (2..dim).collect();
            let zeros = kernel_points(space, &op, &origin, &free);
            ("skew_matrix", op, zeros)
        }
        "diag_kernel" => {
            let mut m = DMatrix::zeros(dim, dim);
            m[(0, 0)] = 1.0;
            let op = Operator::matrix("diag_kernel", m, ball(&origin)).expect("square");
            let free: Vec<usize> = (1..dim).collect();
            let zeros = kernel_points(space, &op, &origin, &free);
            ("diag_kernel", op, zeros)
        }
        "diag_cubic" => {
            let weights: Vec<f64> = (0..dim).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
            let free: Vec<usize> = (0..dim).filter(|i| i % 2 == 1).collect();
            let op = Operator::new(
                "diag_cubic",
                dim,
                OperatorKind::DiagonalCubic { weights },
                ball(&origin),
            )
            .expect("weights");
            let zeros = kernel_points(space, &op, &origin, &free);
            ("diag_cubic", op, zeros)
        }
        "constant_target" => {
            let c = padded(&[0.3, 0.1], dim);
            let op = Operator::constant_target(c.clone(), ball(&c));
            ("constant_target", op, vec![c])
        }
        "rotation" => {
            if dim < 2 {
                return Err(unsupported("needs dimension >= 2"));
            }
            let center = padded(&[0.2, -0.1], dim);
            let angle = if p2 { FRAC_PI_3 } else { FRAC_PI_2 };
            let op =
                Operator::id_minus(Mapping::rotation(center.clone(), angle), dim, ball(&center)).with_label("rotation");
            let free: Vec<usize> = (2..dim).collect();
            let zeros = kernel_points(space, &op, &center, &free);
            ("rotation", op, zeros)
        }
        "clip_contraction" => {
            let lo = Vector::from_vec(vec![-1.0; dim]);
            let hi = Vector::from_vec(vec![1.0; dim]);
            let anchor = Vector::from_vec((0..dim).map(|i| [2.0, -0.5, 3.0][i % 3]).collect());
            let fixed = Vector::from_vec(anchor.coords().iter().map(|a| a.clamp(-1.0, 1.0)).collect());
            let t = Mapping::clipped_contraction(lo.clone(), hi.clone(), 0.5, anchor);
            let op = Operator::id_minus(t, dim, ConvexDomain::Box { lo, hi }).with_label("clip_contraction");
            ("clip_contraction", op, vec![fixed])
        }
        "id_minus_identity" => {
            let op = Operator::id_minus(Mapping::identity(), dim, ball(&origin)).with_label("id_minus_identity");
            let zeros = kernel_points(space, &op, &origin, &all);
            ("id_minus_identity", op, zeros)
        }
        _ => return Err(ZooError::Unknown { name: name.to_string() }),
    };
    let base_point = if operator.domain().contains(space, &x0) {
        x0
    } else {
        zeros[0].clone()
    };
    Ok(ZooEntry {
        name: key,
        operator,
        base_point,
        zeros,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_entry_has_certified_zeros_in_domain() {
        for p in [1.5, 2.0, 3.0] {
            for dim in [1, 2, 3] {
                let s = LpSpace::new(p, dim).unwrap();
                for e in entries(&s) {
                    assert!(e.operator.domain().contains(&s, &e.base_point), "{}", e.name);
                    assert!(e.operator.domain().integer_diameter_bound(&s).unwrap() <= 5);
                    for z in &e.zeros {
                        assert!(e.operator.certify_zero(&s, z, 1e-12).is_ok(), "{} {z}", e.name);
                        assert!(e.operator.domain().contains(&s, z));
                    }
                }
            }
        }
    }

    #[test]
    fn restrictions_by_space() {
        let s3 = LpSpace::new(3.0, 3).unwrap();
        assert!(matches!(build("psd_matrix", &s3), Err(ZooError::Unsupported { .. })));
        let s1 = LpSpace::new(2.0, 1).unwrap();
        assert!(build("rotation", &s1).is_err());
        assert_eq!(entries(&LpSpace::new(2.0, 3).unwrap()).len(), NAMES.len());
        let err = build("nope", &s3).unwrap_err().to_string();
        assert!(err.contains("clip_contraction") && err.contains("zero"));
    }
}
