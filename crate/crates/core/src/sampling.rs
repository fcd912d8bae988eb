//! Seeded sampling of points in ℓ_p balls and spheres.
//!
//! Audits split their sample budget into fixed-size batches. Batch `k` draws
//! from stream `k` of a ChaCha8 generator seeded with the audit seed, so the
//! merged report does not depend on how many threads ran the batches.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::audit::AuditReport;
use crate::space::{LpSpace, Vector};

pub const BATCH_SIZE: usize = 1024;

/// Rejection samplers give up after this many attempts per requested sample.
pub const REJECTION_FACTOR: usize = 100;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn batch_rng(seed: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch);
    rng
}

fn raw_direction(space: &LpSpace, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let sparse = space.dim() > 1 && rng.gen_bool(0.25);
    loop {
        let mut v: Vec<f64> = (0..space.dim()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        if sparse {
            // Zero out a random subset so axis-aligned configurations appear.
            let keep = rng.gen_range(0..space.dim());
            for (i, c) in v.iter_mut().enumerate() {
                if i != keep && rng.gen_bool(0.5) {
                    *c = 0.0;
                }
            }
        }
        if v.iter().any(|c| c.abs() > 1e-12) {
            return v;
        }
    }
}

/// A point on the unit sphere of `space`.
pub fn unit_sphere(space: &LpSpace, rng: &mut ChaCha8Rng) -> Vector {
    let v = Vector::from_vec(raw_direction(space, rng));
    let n = space.norm_unchecked(&v);
    v.scale(1.0 / n)
}

/// A point of the closed ball `B(center, radius)`. Half the draws land on the
/// boundary sphere, where most extremal configurations live.
pub fn in_ball(space: &LpSpace, center: &Vector, radius: f64, rng: &mut ChaCha8Rng) -> Vector {
    let dir = unit_sphere(space, rng);
    let r = if rng.gen_bool(0.5) {
        radius
    } else {
        radius * rng.gen::<f64>().powf(1.0 / space.dim() as f64)
    };
    center.add(&dir.scale(r))
}

/// Pairs `(x, y)` from the ball of radius `radius` about the origin with
/// `‖x − y‖ ≥ separation`, drawn by rejection from a plan that mixes
/// independent ball points, sphere points, near-antipodal and antipodal
/// pairs. Returns the pairs and whether the attempt cap was hit.
pub fn separated_pairs(
    space: &LpSpace,
    radius: f64,
    separation: f64,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<(Vector, Vector)>, bool) {
    let origin = Vector::zeros(space.dim());
    let mut out = Vec::with_capacity(count);
    let cap = count.saturating_mul(REJECTION_FACTOR);
    let mut attempts = 0usize;
    while out.len() < count && attempts < cap {
        let (x, y) = match attempts % 4 {
            0 => (
                in_ball(space, &origin, radius, rng),
                in_ball(space, &origin, radius, rng),
            ),
            1 => (
                unit_sphere(space, rng).scale(radius),
                unit_sphere(space, rng).scale(radius),
            ),
            2 => {
                let x = unit_sphere(space, rng);
                let sigma: f64 = rng.gen();
                let noise = unit_sphere(space, rng).scale(sigma);
                let y = x.scale(-1.0).add(&noise);
                let ny = space.norm_unchecked(&y);
                if ny == 0.0 {
                    attempts += 1;
                    continue;
                }
                (x.scale(radius), y.scale(radius / ny))
            }
            _ => {
                let x = unit_sphere(space, rng).scale(radius);
                let y = x.scale(-1.0);
                (x, y)
            }
        };
        attempts += 1;
        if space.norm_unchecked(&x.sub(&y)) >= separation {
            out.push((x, y));
        }
    }
    let exhausted = out.len() < count;
    (out, exhausted)
}

/// Runs `body` over `samples` draws split into batches and merges the batch
/// reports in batch order. `body` receives the batch generator, the number
/// of samples for the batch and the batch report to record into.
pub fn batched_audit<F>(name: &str, tolerance: f64, samples: usize, seed: u64, body: F) -> AuditReport
where
    F: Fn(&mut ChaCha8Rng, usize, &mut AuditReport) + Sync,
{
    let batches = samples.div_ceil(BATCH_SIZE);
    let parts: Vec<AuditReport> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = BATCH_SIZE.min(samples - b * BATCH_SIZE);
            let mut rng = batch_rng(seed, b as u64);
            let mut report = AuditReport::new(name, tolerance);
            body(&mut rng, count, &mut report);
            report
        })
        .collect();
    let mut merged = AuditReport::new(name, tolerance);
    for part in &parts {
        merged.absorb(part);
    }
    merged
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_points_have_unit_norm() {
        for p in [1.5, 2.0, 3.0] {
            let s = LpSpace::new(p, 4).unwrap();
            let mut rng = seeded_rng(7);
            for _ in 0..200 {
                let v = unit_sphere(&s, &mut rng);
                assert!((s.norm_unchecked(&v) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_points_stay_inside() {
        let s = LpSpace::new(3.0, 3).unwrap();
        let c = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let mut rng = seeded_rng(1);
        for _ in 0..500 {
            let v = in_ball(&s, &c, 2.0, &mut rng);
            assert!(s.norm_unchecked(&v.sub(&c)) <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn separated_pairs_respect_separation() {
        let s = LpSpace::new(2.0, 2).unwrap();
        let mut rng = seeded_rng(3);
        let (pairs, exhausted) = separated_pairs(&s, 1.0, 1.0, 300, &mut rng);
        assert!(!exhausted);
        for (x, y) in &pairs {
            assert!(s.norm_unchecked(&x.sub(y)) >= 1.0);
        }
    }

    #[test]
    fn batches_are_reproducible() {
        let run = || {
            batched_audit("r", 0.0, 3000, 11, |rng, n, rep| {
                for _ in 0..n {
                    let v: f64 = rng.gen();
                    rep.record(v - 1.0, String::new);
                }
            })
        };
        assert_eq!(run(), run());
        assert_eq!(run().samples, 3000);
    }
}
