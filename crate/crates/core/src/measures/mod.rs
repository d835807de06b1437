//! Probability measures `dμ = e^{-a Norm^p - W} / Z dx` built on the
//! homogeneous norms, optionally perturbed by a potential `W`.

mod batch_io;
mod certificate;
mod normalization;
mod sampler;

pub use batch_io::{read_batch, write_batch, write_batch_csv, BatchHeader, BATCH_MAGIC, BATCH_VERSION};
pub use certificate::{check_perturbation_certificate, CertificateReport};
pub use normalization::{
    ball_volume_from_z, estimate_z, estimate_z_importance, estimate_z_quadrature, z_scaling_factor, ZEstimate,
    ZMethod,
};
pub use sampler::{sample, ChainDiagnostics, SampleBatch, SamplerConfig};

use crate::calculus::{estimate_frame, norm_frame_derivatives, subgradient, ScalarField};
use crate::error::{CarnotError, Result};
use crate::frames::Frame;
use crate::norms::NormKind;
use crate::stats;
use std::fmt;
use std::sync::Arc;

/// A potential `W` with the constants of its growth certificate
/// `|∇W|^q ≤ δ Norm^{p-n} |||x|||ⁿ + γ_δ`, `W ≤ C̃ Norm`.
#[derive(Clone)]
pub struct Perturbation {
    pub name: String,
    pub potential: Arc<dyn ScalarField + Send + Sync>,
    pub delta: f64,
    pub gamma: f64,
    pub c_tilde: f64,
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Perturbation")
            .field("name", &self.name)
            .field("delta", &self.delta)
            .field("gamma", &self.gamma)
            .field("c_tilde", &self.c_tilde)
            .finish()
    }
}

/// `W = c · Norm`.
pub struct ScaledNorm {
    pub kind: NormKind,
    pub c: f64,
}

impl ScalarField for ScaledNorm {
    fn value(&self, x: &[f64]) -> f64 {
        self.c * self.kind.norm(x)
    }

    fn is_smooth_at(&self, x: &[f64]) -> bool {
        self.kind.is_smooth_at(x)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.kind.jet(x).gradient.into_iter().map(|g| self.c * g).collect())
    }
}

/// `W = c · x_1²`.
pub struct SquaredFirstCoordinate {
    pub c: f64,
}

impl ScalarField for SquaredFirstCoordinate {
    fn value(&self, x: &[f64]) -> f64 {
        self.c * x[0] * x[0]
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        g[0] = 2.0 * self.c * x[0];
        Some(g)
    }
}

#[derive(Debug, Clone)]
pub struct MeasureSpec {
    pub kind: NormKind,
    pub a: f64,
    pub p: f64,
    pub perturbation: Option<Perturbation>,
}

impl MeasureSpec {
    pub fn new(kind: NormKind, a: f64, p: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(CarnotError::Domain(format!("a must be positive, got {a}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(CarnotError::Domain(format!("p must exceed 1, got {p}")));
        }
        Ok(MeasureSpec {
            kind,
            a,
            p,
            perturbation: None,
        })
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> Self {
        self.perturbation = Some(perturbation);
        self
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    /// Conjugate exponent `q = p/(p-1)`.
    pub fn q(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Whether `p ≥ n`, the range where the coercive inequalities are proved.
    pub fn in_proven_regime(&self) -> bool {
        self.p >= self.kind.step() as f64
    }

    pub fn homogeneous_dimension(&self) -> usize {
        self.kind.descriptor().homogeneous_dimension()
    }

    /// Frame along which gradients of functions are taken.
    pub fn frame(&self) -> Frame {
        estimate_frame(self.kind)
    }

    /// `U = a Norm^p + W`.
    #[inline]
    pub fn potential(&self, x: &[f64]) -> f64 {
        let base = self.a * self.kind.norm(x).powf(self.p);
        match &self.perturbation {
            Some(w) => base + w.potential.value(x),
            None => base,
        }
    }

    #[inline]
    pub fn log_unnormalized_density(&self, x: &[f64]) -> f64 {
        -self.potential(x)
    }

    /// `∇_G U = a p Norm^{p-1} ∇_G Norm + ∇_G W` at a smooth point.
    pub fn potential_subgradient(&self, frame: &Frame, x: &[f64]) -> Result<[f64; 2]> {
        let d = norm_frame_derivatives(self.kind, frame, x);
        let c = self.a * self.p * d.value.powf(self.p - 1.0);
        let mut g = [c * d.first[0], c * d.first[1]];
        if let Some(w) = &self.perturbation {
            let gw = subgradient(w.potential.as_ref(), frame, x)?;
            g[0] += gw.components[0];
            g[1] += gw.components[1];
        }
        Ok(g)
    }

    /// `Norm^{p-n} |||x|||ⁿ`, the weight of the U-bound.
    #[inline]
    pub fn ubound_weight(&self, x: &[f64]) -> f64 {
        let n = self.kind.step() as i32;
        self.kind.norm(x).powf(self.p - n as f64) * self.kind.aux(x).powi(n)
    }

    /// Norm beyond which the density is below `e^{-150}` relative to the peak.
    pub fn tail_radius(&self) -> f64 {
        3.0 * (50.0 / self.a).powf(1.0 / self.p)
    }
}

/// Monte Carlo mean with batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    /// The outermost 0.1% of points (by norm) carry more than 1% of `Σ|f|`.
    pub tail_flag: bool,
}

/// `E[f]` over the batch.
pub fn expectation(batch: &SampleBatch, kind: NormKind, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Estimate> {
    let values: Vec<f64> = batch.points().map(&f).collect();
    let bad: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| !v.is_finite())
        .map(|(i, _)| i)
        .collect();
    if let Some(&first) = bad.first() {
        return Err(CarnotError::Data {
            count: bad.len(),
            first: batch.point(first).to_vec(),
        });
    }
    let (mean, se) = stats::mean_and_se(&values, stats::DEFAULT_BATCHES);
    let tail_flag = tail_share(batch, kind, &values) > 0.01;
    Ok(Estimate { mean, se, tail_flag })
}

/// Share of `Σ|f|` carried by the 0.1% of points with the largest norm.
pub fn tail_share(batch: &SampleBatch, kind: NormKind, values: &[f64]) -> f64 {
    let total: f64 = values.iter().map(|v| v.abs()).sum();
    if total == 0.0 || values.is_empty() {
        return 0.0;
    }
    let mut order: Vec<(f64, usize)> = batch.points().map(|x| kind.norm(x)).zip(0..).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let top = (values.len() / 1000).max(1);
    order[..top].iter().map(|&(_, i)| values[i].abs()).sum::<f64>() / total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_density_values() {
        let spec = MeasureSpec::new(NormKind::Engel, 1.0, 3.0).unwrap();
        assert_eq!(spec.log_unnormalized_density(&[0.0; 4]), 0.0);
        let v = spec.log_unnormalized_density(&[1.0; 4]);
        assert!((v + (3f64.powf(1.5) + 1.0)).abs() < 1e-12);
        assert!((v + 6.196).abs() < 1e-3);
        assert_eq!(
            spec.log_unnormalized_density(&[0.4, 1.0, -2.0, 0.5]),
            spec.log_unnormalized_density(&[-0.4, 1.0, -2.0, 0.5])
        );
    }

    #[test]
    fn spec_validation() {
        assert!(MeasureSpec::new(NormKind::Engel, 0.0, 3.0).is_err());
        assert!(MeasureSpec::new(NormKind::Engel, 1.0, 1.0).is_err());
        let s = MeasureSpec::new(NormKind::Engel, 1.0, 3.0).unwrap();
        assert!((1.0 / s.p + 1.0 / s.q() - 1.0).abs() < 1e-15);
        assert!(s.in_proven_regime());
        let s = MeasureSpec::new(NormKind::filiform(4).unwrap(), 1.0, 3.0).unwrap();
        assert!(!s.in_proven_regime());
    }
}
