//! Monte Carlo probes of the coercive inequalities: U-bounds, q-Poincaré
//! constants, the Lebesgue ball inequality, the localisation split used in
//! the proofs, the translation trick, and a Galerkin spectral-gap estimate.
//!
//! Every probe works on a fixed [`SampleBatch`] so all moments of one test
//! function share their noise. Standard errors are batch means with
//! [`stats::DEFAULT_BATCHES`] batches. A probe "passes within 3 SE" when the
//! estimated slack is at most three standard errors; holdout checks also
//! inflate the fitted constants by [`HOLDOUT_MARGIN`].

mod ball;
mod family;
mod gap;
mod localization;
mod poincare;
mod ubound;

pub use ball::{ball_poincare_check, sample_norm_ball, BallReport};
pub use family::{default_family, weighted_monomials, Member, TestFn, TestFunctionFamily};
pub use gap::{gap_calibration, spectral_gap_galerkin, spectral_gap_on_batch, GapReport};
pub use localization::{
    localization_decomposition, translation_trick_check, LocalizationParams, LocalizationReport, TranslationReport,
};
pub use poincare::{poincare_on_batches, poincare_scan, PoincareReport, RatioEntry};
pub use ubound::{fit_constants, ubound_fit, ubound_on_batches, HoldoutCheck, MomentTriple, UBoundReport};

use crate::frames::Frame;
use crate::measures::{sample, MeasureSpec, SampleBatch, SamplerConfig};
use crate::norms::NormKind;
use crate::seed;
use crate::error::Result;

/// Factor applied to fitted constants before validating on held-out data.
pub const HOLDOUT_MARGIN: f64 = 1.05;
/// Number of standard errors tolerated by every Monte Carlo check.
pub const SE_SLACK: f64 = 3.0;

/// Horizontal gradient `(X_1 f, X_2 f)` of family members at a point.
pub(crate) struct HorizontalGradient {
    frame: Frame,
    kind: NormKind,
    grad: Vec<f64>,
    coef: Vec<f64>,
}

impl HorizontalGradient {
    pub(crate) fn new(kind: NormKind, frame: Frame) -> Self {
        let d = frame.dimension();
        HorizontalGradient {
            frame,
            kind,
            grad: vec![0.0; d],
            coef: vec![0.0; d],
        }
    }

    /// `(f(x), |∇_G f(x)|)`.
    pub(crate) fn eval(&mut self, f: &TestFn, x: &[f64]) -> (f64, f64) {
        let v = f.value_and_gradient(self.kind, x, &mut self.grad);
        let mut sq = 0.0;
        for j in 0..2 {
            self.frame.kind.coefficients_into(j, x, &mut self.coef);
            let c: f64 = self.coef.iter().zip(&self.grad).map(|(a, g)| a * g).sum();
            sq += c * c;
        }
        (v, sq.sqrt())
    }
}

/// Per-point values `f` and `|∇_G f|` over a batch.
pub(crate) fn member_values(spec: &MeasureSpec, f: &TestFn, batch: &SampleBatch) -> (Vec<f64>, Vec<f64>) {
    let mut eval = HorizontalGradient::new(spec.kind, spec.frame());
    batch.points().map(|x| eval.eval(f, x)).unzip()
}

/// Two independent batches: one to fit, one to validate.
pub(crate) fn train_and_holdout(spec: &MeasureSpec, samples: usize, seed: u64) -> Result<(SampleBatch, SampleBatch)> {
    let config = SamplerConfig::new(samples);
    let train = sample(spec, &config, seed::named_seed(seed, "train"))?;
    let holdout = sample(spec, &config, seed::named_seed(seed, "holdout"))?;
    Ok((train, holdout))
}
