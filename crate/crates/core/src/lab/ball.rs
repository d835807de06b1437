//! Poincaré ratios on norm balls under Lebesgue measure,
//! `∫_B |f - f_B|^p / ∫_B |∇_G f|^p` with `B = {Norm ≤ r}`.
//!
//! Norm balls stand in for Carnot–Carathéodory balls; the two families are
//! nested into each other up to constant factors, so a finite supremum on
//! one carries over to the other. Points are drawn uniformly by rejection
//! from the box `|x_k| ≤ r^{w_k}`, which contains the ball for both norms.

use super::{HorizontalGradient, RatioEntry, TestFunctionFamily};
use super::poincare::EXCLUSION_SE;
use crate::calculus::estimate_frame;
use crate::error::{CarnotError, Result};
use crate::group::weight;
use crate::norms::NormKind;
use crate::seed;
use crate::stats;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

const CHUNK: usize = 4096;
/// Chunks drawn per round of rejection sampling.
const ROUND: usize = 32;
const MAX_PROPOSALS: usize = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallReport {
    pub radius: f64,
    pub exponent: f64,
    pub samples: usize,
    pub acceptance_rate: f64,
    pub ratios: Vec<RatioEntry>,
    pub excluded: Vec<usize>,
    pub sup_ratio: f64,
    pub argsup: Option<usize>,
}

/// `count` uniform points of `{Norm ≤ radius}`, row-major, and the
/// acceptance rate of the rejection step.
pub fn sample_norm_ball(kind: NormKind, radius: f64, count: usize, seed: u64) -> Result<(Vec<f64>, f64)> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CarnotError::Domain(format!("ball radius must be positive, got {radius}")));
    }
    let d = kind.dimension();
    let half: Vec<f64> = (0..d).map(|k| radius.powi(weight(k) as i32)).collect();
    let mut out = Vec::with_capacity(count * d);
    let mut proposals = 0usize;
    let mut next_chunk = 0u64;
    while out.len() < count * d {
        if proposals >= MAX_PROPOSALS {
            return Err(CarnotError::EmptyDomain(format!(
                "norm ball of radius {radius}: acceptance too low after {proposals} proposals"
            )));
        }
        let round: Vec<Vec<f64>> = (next_chunk..next_chunk + ROUND as u64)
            .into_par_iter()
            .map(|ch| {
                let mut rng = seed::child_rng(seed, ch);
                let mut x = vec![0.0; d];
                let mut acc = Vec::new();
                for _ in 0..CHUNK {
                    for k in 0..d {
                        x[k] = half[k] * (2.0 * rng.random::<f64>() - 1.0);
                    }
                    if kind.norm(&x) <= radius {
                        acc.extend_from_slice(&x);
                    }
                }
                acc
            })
            .collect();
        next_chunk += ROUND as u64;
        proposals += ROUND * CHUNK;
        for pts in round {
            out.extend(pts);
        }
    }
    let accepted = out.len() / d;
    out.truncate(count * d);
    Ok((out, accepted as f64 / proposals as f64))
}

/// Per-member ratio `mean_B |f - f_B|^p / mean_B |∇_G f|^p` on uniform
/// points of the ball, with the gradient guard of the Poincaré scan.
pub(crate) fn ball_ratio(
    kind: NormKind,
    points: &[f64],
    exponent: f64,
    f: &super::TestFn,
) -> Option<(f64, f64, f64, f64, f64)> {
    let mut eval = HorizontalGradient::new(kind, estimate_frame(kind));
    let (v, g): (Vec<f64>, Vec<f64>) = points.chunks_exact(kind.dimension()).map(|x| eval.eval(f, x)).unzip();
    let mean = stats::mean(&v);
    let num: Vec<f64> = v.iter().map(|v| (v - mean).abs().powf(exponent)).collect();
    let den: Vec<f64> = g.iter().map(|g| g.powf(exponent)).collect();
    let (b, b_se) = stats::mean_and_se(&den, stats::DEFAULT_BATCHES);
    if b == 0.0 || b <= EXCLUSION_SE * b_se {
        return None;
    }
    let (r, r_se) = stats::ratio_and_se(&num, &den, stats::DEFAULT_BATCHES);
    Some((r, r_se, stats::mean(&num), b, b_se))
}

pub fn ball_poincare_check(
    kind: NormKind,
    radius: f64,
    exponent: f64,
    family: &TestFunctionFamily,
    samples: usize,
    seed: u64,
) -> Result<BallReport> {
    if exponent < 1.0 {
        return Err(CarnotError::Domain(format!("exponent must be at least 1, got {exponent}")));
    }
    let (points, acceptance_rate) = sample_norm_ball(kind, radius, samples, seed)?;
    let scanned: Vec<(usize, Option<RatioEntry>)> = family
        .members
        .par_iter()
        .map(|m| {
            let entry = ball_ratio(kind, &points, exponent, &m.f).map(|(ratio, ratio_se, numerator, b, b_se)| RatioEntry {
                id: m.id,
                name: m.name.clone(),
                ratio,
                ratio_se,
                numerator,
                denominator: b,
                denominator_se: b_se,
            });
            (m.id, entry)
        })
        .collect();
    let excluded = scanned.iter().filter(|(_, e)| e.is_none()).map(|(id, _)| *id).collect();
    let ratios: Vec<RatioEntry> = scanned.into_iter().filter_map(|(_, e)| e).collect();
    let (argsup, sup_ratio) = ratios
        .iter()
        .fold((None, 0.0), |(arg, best), e| if e.ratio > best { (Some(e.id), e.ratio) } else { (arg, best) });
    Ok(BallReport {
        radius,
        exponent,
        samples,
        acceptance_rate,
        ratios,
        excluded,
        sup_ratio,
        argsup,
    })
}
