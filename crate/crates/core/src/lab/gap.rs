//! Galerkin estimate of the spectral gap of `-Δ_G + ∇_G U · ∇_G`.
//!
//! On the span of non-constant monomials `φ_i`, the gap is bounded above by
//! the smallest eigenvalue of the pencil `(A, M)` with
//! `A_ij = μ(∇_G φ_i · ∇_G φ_j)` and `M = Cov_μ(φ_i, φ_j)`. Both matrices are
//! Jacobi-scaled by `diag(M)`, `M` is Cholesky-factored, and the pencil is
//! reduced to the symmetric matrix `L⁻¹ A L⁻ᵀ`. The standard error comes from
//! ten contiguous sub-batches.

use super::weighted_monomials;
use crate::error::{CarnotError, Result};
use crate::measures::{sample, MeasureSpec, SampleBatch, SamplerConfig};
use crate::seed;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

const SUBGROUPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub degree: usize,
    pub basis_size: usize,
    pub gap: f64,
    pub se: f64,
    pub subgroup_gaps: Vec<f64>,
    pub samples: usize,
    /// Euclidean Ornstein–Uhlenbeck calibration rather than a group measure.
    pub calibration: bool,
}

/// Raw sums for one block of points.
#[derive(Clone)]
struct Sums {
    count: usize,
    first: DVector<f64>,
    second: DMatrix<f64>,
    stiffness: DMatrix<f64>,
}

impl Sums {
    fn new(m: usize) -> Self {
        Sums {
            count: 0,
            first: DVector::zeros(m),
            second: DMatrix::zeros(m, m),
            stiffness: DMatrix::zeros(m, m),
        }
    }

    fn add(&mut self, values: &[f64], grads: &[[f64; 2]]) {
        let m = values.len();
        self.count += 1;
        for i in 0..m {
            self.first[i] += values[i];
            for j in 0..=i {
                self.second[(i, j)] += values[i] * values[j];
                self.stiffness[(i, j)] += grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1];
            }
        }
    }

    fn merge(&mut self, other: &Sums) {
        self.count += other.count;
        self.first += &other.first;
        self.second += &other.second;
        self.stiffness += &other.stiffness;
    }

    fn gap(&self) -> Result<f64> {
        let m = self.first.len();
        let n = self.count as f64;
        let mean = &self.first / n;
        let mut cov = DMatrix::zeros(m, m);
        let mut stiff = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..=i {
                let c = self.second[(i, j)] / n - mean[i] * mean[j];
                cov[(i, j)] = c;
                cov[(j, i)] = c;
                stiff[(i, j)] = self.stiffness[(i, j)] / n;
                stiff[(j, i)] = stiff[(i, j)];
            }
        }
        generalized_min_eigenvalue(&stiff, &cov)
    }
}

/// Smallest `λ` with `A v = λ M v`, `M` symmetric positive definite.
fn generalized_min_eigenvalue(a: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<f64> {
    let k = m.nrows();
    let mut scale = DVector::zeros(k);
    for i in 0..k {
        let d = m[(i, i)];
        if !(d > 0.0 && d.is_finite()) {
            return Err(CarnotError::Conditioning(format!(
                "basis function {i} has variance {d:e}; use more samples or a lower degree"
            )));
        }
        scale[i] = 1.0 / d.sqrt();
    }
    let ms = DMatrix::from_fn(k, k, |i, j| m[(i, j)] * scale[i] * scale[j]);
    let as_ = DMatrix::from_fn(k, k, |i, j| a[(i, j)] * scale[i] * scale[j]);
    let chol = ms.cholesky().ok_or_else(|| {
        CarnotError::Conditioning("covariance matrix is not positive definite; use more samples or a lower degree".into())
    })?;
    let l = chol.l();
    let left = l
        .solve_lower_triangular(&as_)
        .ok_or_else(|| CarnotError::Conditioning("singular Cholesky factor".into()))?;
    let reduced = l
        .solve_lower_triangular(&left.transpose())
        .ok_or_else(|| CarnotError::Conditioning("singular Cholesky factor".into()))?;
    let sym = (&reduced + reduced.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(CarnotError::Conditioning("non-finite eigenvalue".into()));
    }
    Ok(min)
}

fn report(points: impl Iterator<Item = (Vec<f64>, Vec<[f64; 2]>)>, total: usize, m: usize, degree: usize, calibration: bool) -> Result<GapReport> {
    if total < 2 * SUBGROUPS {
        return Err(CarnotError::EmptyDomain(format!("gap estimate needs at least {} samples", 2 * SUBGROUPS)));
    }
    let mut blocks = vec![Sums::new(m); SUBGROUPS];
    for (i, (v, g)) in points.enumerate() {
        blocks[i * SUBGROUPS / total].add(&v, &g);
    }
    let mut all = Sums::new(m);
    for b in &blocks {
        all.merge(b);
    }
    let gap = all.gap()?;
    let subgroup_gaps: Vec<f64> = blocks.iter().filter_map(|b| b.gap().ok()).collect();
    let se = if subgroup_gaps.len() >= 2 {
        let k = subgroup_gaps.len() as f64;
        let mean = subgroup_gaps.iter().sum::<f64>() / k;
        let var = subgroup_gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        f64::NAN
    };
    Ok(GapReport {
        degree,
        basis_size: m,
        gap,
        se,
        subgroup_gaps,
        samples: total,
        calibration,
    })
}

/// Gap estimate on an existing batch, basis of weighted degree `1..=degree`.
pub fn spectral_gap_on_batch(spec: &MeasureSpec, degree: usize, batch: &SampleBatch) -> Result<GapReport> {
    if degree == 0 {
        return Err(CarnotError::Domain("basis degree must be at least 1".into()));
    }
    let d = spec.dimension();
    let basis: Vec<super::TestFn> = weighted_monomials(d, degree).into_iter().map(super::TestFn::Monomial).collect();
    let m = basis.len();
    let frame = spec.frame();
    let mut grad = vec![0.0; d];
    let mut coef = vec![0.0; d];
    let points = batch.points().map(|x| {
        let mut values = Vec::with_capacity(m);
        let mut grads = Vec::with_capacity(m);
        for phi in &basis {
            values.push(phi.value_and_gradient(spec.kind, x, &mut grad));
            let mut hg = [0.0; 2];
            for (j, h) in hg.iter_mut().enumerate() {
                frame.kind.coefficients_into(j, x, &mut coef);
                *h = coef.iter().zip(&grad).map(|(a, g)| a * g).sum();
            }
            grads.push(hg);
        }
        (values, grads)
    });
    report(points, batch.len(), m, degree, false)
}

/// Samples `samples` points of `spec` and estimates the gap.
pub fn spectral_gap_galerkin(spec: &MeasureSpec, degree: usize, samples: usize, seed: u64) -> Result<GapReport> {
    let batch = sample(spec, &SamplerConfig::new(samples), seed)?;
    spectral_gap_on_batch(spec, degree, &batch)
}

/// Euclidean calibration: i.i.d. standard normal points of the plane,
/// ordinary gradient, monomials of degree `1..=degree`. The exact gap of
/// this Ornstein–Uhlenbeck generator is 1.
pub fn gap_calibration(degree: usize, samples: usize, seed: u64) -> Result<GapReport> {
    if degree == 0 {
        return Err(CarnotError::Domain("basis degree must be at least 1".into()));
    }
    let exps: Vec<(u32, u32)> = (1..=degree as u32)
        .flat_map(|deg| (0..=deg).rev().map(move |i| (i, deg - i)))
        .collect();
    let m = exps.len();
    let mut rng = seed::rng(seed);
    let points = (0..samples).map(move |_| {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let mut values = Vec::with_capacity(m);
        let mut grads = Vec::with_capacity(m);
        for &(i, j) in &exps {
            let (i, j) = (i as i32, j as i32);
            values.push(x.powi(i) * y.powi(j));
            let dx = if i > 0 { i as f64 * x.powi(i - 1) * y.powi(j) } else { 0.0 };
            let dy = if j > 0 { j as f64 * x.powi(i) * y.powi(j - 1) } else { 0.0 };
            grads.push([dx, dy]);
        }
        (values, grads)
    });
    report(points, samples, m, degree, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::NormKind;

    #[test]
    fn pencil_eigenvalue_matches_closed_form() {
        // A = diag(2, 6), M = [[1, 0.5], [0.5, 1]]: det(A - λM) = 0 gives
        // 0.75 λ² - 8 λ + 12 = 0.
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 6.0]);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let expected = (8.0 - (64.0f64 - 36.0).sqrt()) / 1.5;
        assert!((generalized_min_eigenvalue(&a, &m).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn singular_covariance_is_a_conditioning_error() {
        let a = DMatrix::identity(2, 2);
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(generalized_min_eigenvalue(&a, &m), Err(CarnotError::Conditioning(_))));
    }

    #[test]
    fn calibration_is_near_one() {
        let r = gap_calibration(3, 200_000, 2).unwrap();
        assert!((r.gap - 1.0).abs() < 0.05, "{r:?}");
    }

    #[test]
    fn larger_basis_never_raises_the_estimate() {
        let spec = MeasureSpec::new(NormKind::Engel, 1.0, 3.0).unwrap();
        let mut cfg = SamplerConfig::new(40_000);
        cfg.burn_in = 2_000;
        let batch = sample(&spec, &cfg, 8).unwrap();
        let g2 = spectral_gap_on_batch(&spec, 2, &batch).unwrap();
        let g3 = spectral_gap_on_batch(&spec, 3, &batch).unwrap();
        assert!(g2.gap > 0.0);
        assert!(g3.gap <= g2.gap * (1.0 + 1e-9), "{} {}", g3.gap, g2.gap);
    }
}
