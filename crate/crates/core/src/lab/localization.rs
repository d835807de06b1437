//! The three-region split behind the global Poincaré inequality, and the
//! translation trick used on its outer region.
//!
//! With `w = Norm^{p-n} |||x|||ⁿ` and `g = |f - m|^q`, the total `μ(g)`
//! splits over `{w ≥ R}`, `{w < R, Norm ≤ L}` and `{w < R, Norm > L}`. The
//! first piece is bounded by `μ(g w) / R`, the second by a Lebesgue ball
//! inequality, and the third lives in `A_{L,R} = {|||x|||ⁿ ≤ R, Norm ≥ L}`,
//! which a fixed translation moves away from the degenerate hyperplane.

use super::ball::{ball_ratio, sample_norm_ball};
use super::TestFn;
use crate::error::{CarnotError, Result};
use crate::group::{compose_into, weight};
use crate::measures::{MeasureSpec, SampleBatch};
use crate::norms::NormKind;
use crate::seed;
use crate::stats::{self, KahanSum};
use rand::Rng;
use serde::Serialize;

/// Regions carrying less than this share of the samples get a warning.
const DEGENERATE_SHARE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationParams {
    pub r: f64,
    pub l: f64,
    /// Translation used on the outer region.
    pub shift: Vec<f64>,
}

impl LocalizationParams {
    /// `h = (0, 2R^{1/3}, 0, 0)` (applied on the left) for the Engel norm and
    /// `h = (2R^{1/n}, 0, …, 0)` (applied on the right) for filiform norms.
    pub fn new(kind: NormKind, r: f64, l: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(CarnotError::Domain(format!("R must be positive, got {r}")));
        }
        if !(l > 1.0 && l.is_finite()) {
            return Err(CarnotError::Domain(format!("L must exceed 1, got {l}")));
        }
        let n = kind.step() as f64;
        let mut shift = vec![0.0; kind.dimension()];
        shift[kind.aux_coordinate()] = 2.0 * r.powf(1.0 / n);
        Ok(LocalizationParams { r, l, shift })
    }

    /// The translated point: `h ∘ x` for Engel, `x ∘ h` for filiform.
    pub fn translate(&self, kind: NormKind, x: &[f64], out: &mut [f64]) {
        match kind {
            NormKind::Engel => compose_into(&self.shift, x, out),
            NormKind::Filiform(_) => compose_into(x, &self.shift, out),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationReport {
    pub params: LocalizationParams,
    /// Lebesgue mean of `f` over `{Norm ≤ L}`.
    pub m: f64,
    pub total: f64,
    pub terms: [f64; 3],
    pub region_shares: [f64; 3],
    /// `|Σ terms - total| / total`.
    pub partition_error: f64,
    /// `μ(g w) / R`.
    pub term1_bound: f64,
    pub term1_holds: bool,
    /// Lebesgue ratio of `f` on `{Norm ≤ L}`.
    pub ball_ratio: Option<f64>,
    /// `ball_ratio · e^{a L^p} · μ(|∇_G f|^q 1{Norm ≤ L})`, unperturbed only.
    pub term2_bound: Option<f64>,
    /// Every outer-region sample satisfies `|||x|||ⁿ ≤ R`.
    pub outer_in_annulus: bool,
    pub samples: usize,
    pub warnings: Vec<String>,
}

pub fn localization_decomposition(
    spec: &MeasureSpec,
    f: &TestFn,
    params: &LocalizationParams,
    batch: &SampleBatch,
    ball_samples: usize,
    seed: u64,
) -> Result<LocalizationReport> {
    if batch.is_empty() {
        return Err(CarnotError::EmptyDomain("localisation needs a non-empty batch".into()));
    }
    let kind = spec.kind;
    let q = spec.q();
    let n = kind.step() as i32;
    let (ball, _) = sample_norm_ball(kind, params.l, ball_samples, seed::named_seed(seed, "ball"))?;
    let d = kind.dimension();
    let mut grad = vec![0.0; d];
    let lebesgue: Vec<f64> = ball.chunks_exact(d).map(|x| f.value_and_gradient(kind, x, &mut grad)).collect();
    let m = stats::mean(&lebesgue);

    let mut eval = super::HorizontalGradient::new(kind, spec.frame());
    let mut total = KahanSum::new();
    let mut terms = [KahanSum::new(), KahanSum::new(), KahanSum::new()];
    let mut counts = [0usize; 3];
    let mut weighted = KahanSum::new();
    let mut inner_gradient = KahanSum::new();
    let mut outer_in_annulus = true;
    for x in batch.points() {
        let (v, gn) = eval.eval(f, x);
        let g = (v - m).abs().powf(q);
        let w = spec.ubound_weight(x);
        let norm = kind.norm(x);
        total.add(g);
        weighted.add(g * w);
        let region = if w >= params.r {
            0
        } else if norm <= params.l {
            inner_gradient.add(gn.powf(q));
            1
        } else {
            outer_in_annulus &= kind.aux(x).powi(n) <= params.r;
            2
        };
        terms[region].add(g);
        counts[region] += 1;
    }
    let count = batch.len() as f64;
    let total = total.value() / count;
    let terms = terms.map(|t| t.value() / count);
    let region_shares = counts.map(|c| c as f64 / count);
    let partition_error = if total > 0.0 {
        (terms.iter().sum::<f64>() - total).abs() / total
    } else {
        terms.iter().sum::<f64>().abs()
    };
    let term1_bound = weighted.value() / count / params.r;
    let mut warnings = Vec::new();
    for (i, s) in region_shares.iter().enumerate() {
        if *s < DEGENERATE_SHARE {
            warnings.push(format!("region {} holds only {:.2e} of the samples", i + 1, s));
        }
    }
    let ball_ratio = ball_ratio(kind, &ball, q, f).map(|r| r.0);
    let term2_bound = match (&spec.perturbation, ball_ratio) {
        (None, Some(r)) => Some(r * (spec.a * params.l.powf(spec.p)).exp() * inner_gradient.value() / count),
        _ => None,
    };
    Ok(LocalizationReport {
        params: params.clone(),
        m,
        total,
        terms,
        region_shares,
        partition_error,
        term1_bound,
        term1_holds: terms[0] <= term1_bound * (1.0 + 1e-12),
        ball_ratio,
        term2_bound,
        outer_in_annulus,
        samples: batch.len(),
        warnings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TranslationReport {
    pub params: LocalizationParams,
    pub samples: usize,
    pub proposals: usize,
    /// Samples with `Norm(shifted) ≥ Norm(x)`.
    pub norm_holds: usize,
    /// Samples with `|||shifted||| ≥ R^{1/n}`.
    pub aux_holds: usize,
    /// Samples whose non-auxiliary coordinates are unchanged by the shift.
    pub others_unchanged: usize,
    pub min_norm_gain: f64,
    pub min_aux_margin: f64,
}

impl TranslationReport {
    pub fn pass(&self) -> bool {
        self.norm_holds == self.samples && self.aux_holds == self.samples
    }
}

/// Rejection samples of `A_{L,R}` drawn from the box with `|aux| ≤ R^{1/n}`
/// and `|x_k| ≤ (2L)^{w_k}` elsewhere, then translated.
pub fn translation_trick_check(kind: NormKind, r: f64, l: f64, samples: usize, seed: u64) -> Result<TranslationReport> {
    let params = LocalizationParams::new(kind, r, l)?;
    let n = kind.step() as f64;
    let d = kind.dimension();
    let aux = kind.aux_coordinate();
    let floor = r.powf(1.0 / n);
    let half: Vec<f64> = (0..d)
        .map(|k| if k == aux { floor } else { (2.0 * l).powi(weight(k) as i32) })
        .collect();
    let mut rng = seed::rng(seed);
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut report = TranslationReport {
        params: params.clone(),
        samples: 0,
        proposals: 0,
        norm_holds: 0,
        aux_holds: 0,
        others_unchanged: 0,
        min_norm_gain: f64::INFINITY,
        min_aux_margin: f64::INFINITY,
    };
    let max_proposals = samples.saturating_mul(10_000).max(1_000_000);
    while report.samples < samples {
        if report.proposals >= max_proposals {
            return Err(CarnotError::EmptyDomain(format!(
                "A_(L,R) with L = {l}, R = {r}: no acceptance after {} proposals",
                report.proposals
            )));
        }
        report.proposals += 1;
        for k in 0..d {
            x[k] = half[k] * (2.0 * rng.random::<f64>() - 1.0);
        }
        let norm = kind.norm(&x);
        if norm < l {
            continue;
        }
        report.samples += 1;
        params.translate(kind, &x, &mut y);
        let gain = kind.norm(&y) - norm;
        let margin = kind.aux(&y) - floor;
        report.norm_holds += usize::from(gain >= 0.0);
        report.aux_holds += usize::from(margin >= 0.0);
        report.others_unchanged += usize::from((0..d).all(|k| k == aux || x[k] == y[k]));
        report.min_norm_gain = report.min_norm_gain.min(gain);
        report.min_aux_margin = report.min_aux_margin.min(margin);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{sample, SamplerConfig};

    #[test]
    fn shifts_follow_the_group_law() {
        let params = LocalizationParams::new(NormKind::Engel, 8.0, 2.0).unwrap();
        assert_eq!(params.shift, vec![0.0, 4.0, 0.0, 0.0]);
        let x = [0.3, -1.0, 2.0, -0.7];
        let mut y = [0.0; 4];
        params.translate(NormKind::Engel, &x, &mut y);
        assert_eq!(y, [0.3, 3.0, 2.0, -0.7]);

        let kind = NormKind::filiform(4).unwrap();
        let params = LocalizationParams::new(kind, 16.0, 2.0).unwrap();
        let x = [0.3, -1.0, 2.0, -0.7, 0.2];
        let mut y = [0.0; 5];
        params.translate(kind, &x, &mut y);
        assert_eq!(y, [4.3, -1.0, 2.0, -0.7, 0.2]);
    }

    #[test]
    fn translation_trick_holds_on_every_sample() {
        for kind in [NormKind::Engel, NormKind::filiform(4).unwrap()] {
            let rep = translation_trick_check(kind, 1.0, 2.0, 2_000, 11).unwrap();
            assert!(rep.pass(), "{rep:?}");
            assert_eq!(rep.others_unchanged, rep.samples);
        }
    }

    fn engel_batch() -> (MeasureSpec, SampleBatch) {
        let spec = MeasureSpec::new(NormKind::Engel, 1.0, 3.0).unwrap();
        let mut cfg = SamplerConfig::new(20_000);
        cfg.burn_in = 2_000;
        let batch = sample(&spec, &cfg, 4).unwrap();
        (spec, batch)
    }

    #[test]
    fn partition_sums_and_chebyshev_step() {
        let (spec, batch) = engel_batch();
        let f = TestFn::monomial(&[1, 1, 0, 0]);
        let params = LocalizationParams::new(spec.kind, 1.0, 2.0).unwrap();
        let rep = localization_decomposition(&spec, &f, &params, &batch, 20_000, 1).unwrap();
        assert!(rep.partition_error <= 1e-12, "{rep:?}");
        assert!(rep.term1_holds);
        assert!(rep.outer_in_annulus);
        assert!((rep.region_shares.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regions_shrink_as_thresholds_grow() {
        let (spec, batch) = engel_batch();
        let f = TestFn::monomial(&[0, 1, 0, 0]);
        let small = LocalizationParams::new(spec.kind, 0.5, 1.5).unwrap();
        let large = LocalizationParams::new(spec.kind, 2.0, 3.0).unwrap();
        let a = localization_decomposition(&spec, &f, &small, &batch, 5_000, 1).unwrap();
        let b = localization_decomposition(&spec, &f, &large, &batch, 5_000, 1).unwrap();
        assert!(b.region_shares[0] <= a.region_shares[0]);
        assert!(b.region_shares[0] + b.region_shares[2] <= a.region_shares[0] + a.region_shares[2]);
    }
}
