//! Randomised self-checks of the group law and the frames.
//!
//! Each check reports the largest defect seen over its instances, so callers
//! can compare against their own tolerance as well as the default one.

use crate::error::Result;
use crate::frames::{
    check_invariance_with, commutator_table, expected_filiform_table, left_frame, right_frame_engel,
    right_frame_engel_standard, Frame, JacobianMode,
};
use crate::group::{compose_into, dilate_in_place, inverse_into, GroupDescriptor, GroupPoint};
use crate::seed;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

pub const GROUP_TOLERANCE: f64 = 1e-10;
pub const ANALYTIC_BRACKET_TOLERANCE: f64 = 1e-12;
pub const FD_BRACKET_TOLERANCE: f64 = 1e-8;
pub const INVARIANCE_TOLERANCE: f64 = 1e-10;

const CHUNK: usize = 4096;
/// Random coordinates are uniform in `[-BOX, BOX]`.
const BOX: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraCheck {
    pub name: String,
    pub step: usize,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl AlgebraCheck {
    fn new(name: &str, step: usize, instances: usize, max_error: f64, tolerance: f64) -> Self {
        AlgebraCheck {
            name: name.into(),
            step,
            instances,
            max_error,
            tolerance,
            pass: max_error <= tolerance,
        }
    }

    pub const CSV_HEADER: &'static str = "check,step,instances,max_error,tolerance,pass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:e},{:e},{}",
            self.name, self.step, self.instances, self.max_error, self.tolerance, self.pass
        )
    }
}

/// `max_k |a_k - b_k| / max(1, |a|_∞, |b|_∞)`.
fn relative_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

fn random_point(rng: &mut seed::Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.random_range(-BOX..BOX);
    }
}

/// Associativity, identity, inverse and the dilation automorphism on
/// `instances` random triples.
pub fn group_axiom_checks(step: usize, instances: usize, seed: u64) -> Result<Vec<AlgebraCheck>> {
    let d = GroupDescriptor::new(step)?.dimension();
    let chunks = instances.div_ceil(CHUNK);
    let worst = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seed::child_rng(seed, c as u64);
            let (mut x, mut y, mut z) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
            let (mut a, mut b, mut t) = (vec![0.0; d], vec![0.0; d], vec![0.0; d]);
            let zero = vec![0.0; d];
            let mut w = [0.0f64; 4];
            for _ in c * CHUNK..((c + 1) * CHUNK).min(instances) {
                random_point(&mut rng, &mut x);
                random_point(&mut rng, &mut y);
                random_point(&mut rng, &mut z);
                let lambda = rng.random_range(0.1..3.0);
                // (x∘y)∘z against x∘(y∘z)
                compose_into(&x, &y, &mut t);
                compose_into(&t, &z, &mut a);
                compose_into(&y, &z, &mut t);
                compose_into(&x, &t, &mut b);
                w[0] = w[0].max(relative_gap(&a, &b));
                compose_into(&x, &zero, &mut a);
                compose_into(&zero, &x, &mut b);
                w[1] = w[1].max(relative_gap(&a, &x)).max(relative_gap(&b, &x));
                inverse_into(&x, &mut t);
                compose_into(&x, &t, &mut a);
                compose_into(&t, &x, &mut b);
                w[2] = w[2].max(relative_gap(&a, &zero)).max(relative_gap(&b, &zero));
                // δ(x∘y) against δx∘δy
                compose_into(&x, &y, &mut a);
                dilate_in_place(lambda, &mut a);
                let (mut dx, mut dy) = (x.clone(), y.clone());
                dilate_in_place(lambda, &mut dx);
                dilate_in_place(lambda, &mut dy);
                compose_into(&dx, &dy, &mut b);
                w[3] = w[3].max(relative_gap(&a, &b));
            }
            w
        })
        .reduce(|| [0.0; 4], |p, q| [p[0].max(q[0]), p[1].max(q[1]), p[2].max(q[2]), p[3].max(q[3])]);
    Ok(["associativity", "identity", "inverse", "dilation_automorphism"]
        .iter()
        .zip(worst)
        .map(|(name, e)| AlgebraCheck::new(name, step, instances, e, GROUP_TOLERANCE))
        .collect())
}

fn random_points(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed);
    (0..count)
        .map(|_| {
            let mut x = vec![0.0; d];
            random_point(&mut rng, &mut x);
            x
        })
        .collect()
}

/// Brackets of the left frame against the filiform relations, with
/// analytic Jacobians and with finite differences. An unmatched table
/// reports an infinite error.
pub fn commutator_checks(step: usize, points: usize, seed: u64) -> Result<Vec<AlgebraCheck>> {
    let descriptor = GroupDescriptor::new(step)?;
    let frame = left_frame(descriptor);
    let pts = random_points(descriptor.dimension(), points, seed);
    let expected = expected_filiform_table(descriptor.dimension());
    Ok([
        ("commutators_analytic", JacobianMode::Analytic, ANALYTIC_BRACKET_TOLERANCE),
        ("commutators_fd", JacobianMode::FiniteDifference, FD_BRACKET_TOLERANCE),
    ]
    .iter()
    .map(|&(name, mode, tol)| {
        let table = commutator_table(&frame, &pts, mode);
        let err = if table.entries == expected { table.max_residual } else { f64::INFINITY };
        AlgebraCheck::new(name, step, points, err, tol)
    })
    .collect())
}

fn invariance_defect(frame: &Frame, pairs: usize, seed: u64) -> Result<f64> {
    let descriptor = frame.kind.descriptor();
    let d = descriptor.dimension();
    let mut rng = seed::rng(seed);
    let mut worst: f64 = 0.0;
    let (mut a, mut x) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..pairs {
        random_point(&mut rng, &mut a);
        random_point(&mut rng, &mut x);
        let alpha = GroupPoint::new(descriptor, a.clone())?;
        let xp = GroupPoint::new(descriptor, x.clone())?;
        for field in &frame.fields {
            worst = worst.max(check_invariance_with(field, &alpha, &xp, JacobianMode::Analytic)?);
        }
    }
    Ok(worst)
}

/// Invariance residual of the left frame of the given step on random
/// `(α, x)` pairs; for the Engel group also the two right frames.
pub fn invariance_checks(step: usize, pairs: usize, seed: u64) -> Result<Vec<AlgebraCheck>> {
    let descriptor = GroupDescriptor::new(step)?;
    let mut frames = vec![("invariance_left", left_frame(descriptor))];
    if step == 3 {
        frames.push(("invariance_right", right_frame_engel()));
        frames.push(("invariance_right_standard", right_frame_engel_standard()));
    }
    frames
        .iter()
        .enumerate()
        .map(|(i, (name, frame))| {
            let err = invariance_defect(frame, pairs, seed::child_seed(seed, i as u64))?;
            Ok(AlgebraCheck::new(name, step, pairs, err, INVARIANCE_TOLERANCE))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_algebra_checks_pass_on_small_runs() {
        for step in 3..=5 {
            let mut checks = group_axiom_checks(step, 2_000, 1).unwrap();
            checks.extend(commutator_checks(step, 3, 2).unwrap());
            checks.extend(invariance_checks(step, 50, 3).unwrap());
            for c in &checks {
                assert!(c.pass, "{c:?}");
            }
        }
    }

    #[test]
    fn relative_gap_scales_with_the_larger_entry() {
        assert_eq!(relative_gap(&[0.0, 0.5], &[0.0, 0.0]), 0.5);
        assert_eq!(relative_gap(&[100.0], &[101.0]), 1.0 / 101.0);
    }

    #[test]
    fn noncommuting_products_show_a_gap() {
        let x = [0.5, 1.0, 0.0, 0.0];
        let y = [1.0, -1.0, 0.3, 0.0];
        let mut a = [0.0; 4];
        compose_into(&x, &y, &mut a);
        let mut b = [0.0; 4];
        compose_into(&y, &x, &mut b);
        assert!(relative_gap(&a, &b) > 1e-3);
    }
}
