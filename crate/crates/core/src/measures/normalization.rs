//! Normalisation constant `Z = ∫ e^{-a Norm^p - W} dx`.
//!
//! Quadrature path for the unperturbed Engel measure: writing
//! `Norm^n = M' + |x_last|` the last coordinate integrates in closed form,
//!
//! ```text
//! ∫_0^∞ e^{-a (M' + t)^r} dt = (1/r) a^{-1/r} Γ(1/r, a M'^r),   r = p/n,
//! ```
//!
//! and the remaining coordinates use a tensor Gauss–Legendre rule on the
//! positive orthant (the density is even in every coordinate), over
//! `[0, L^{w_k}]` with panels graded geometrically toward 0 and
//! `e^{-a L^p} = 10^{-12}`. The error estimate is the change between order
//! `m` and `2m`.
//!
//! Unperturbed filiform measures use dilations instead. Polar coordinates give
//! `∫ e^{-a Norm^p} = |B_1| Γ(1 + Q/p) a^{-Q/p}`, so one integral fixes every
//! `(a, p)`. With `a = 1, p = n` the density `e^{-Norm^n}` factorises once
//! `(x_1, x_2)` is fixed, because each remaining term of the power sum holds a
//! single coordinate. That leaves a 2-D rule over a product of 1-D integrals,
//! which stays cheap for every step.
//!
//! Importance path: product of Student-t (3 degrees of freedom) laws scaled
//! per coordinate by the dilation weights.

use super::MeasureSpec;
use crate::error::{CarnotError, Result};
use crate::group::weight;
use crate::norms::NormKind;
use crate::seed;
use crate::stats;
use gauss_quad::legendre::GaussLegendre;
use rand::Rng;
use rand_distr::StudentT;
use rayon::prelude::*;
use statrs::distribution::{Continuous, StudentsT};
use statrs::function::gamma::{gamma, gamma_ur};

const PANELS: usize = 6;
const FILIFORM_PANELS: usize = 12;
const STUDENT_DOF: f64 = 3.0;
/// Relative change between orders `m` and `2m` accepted by the quadrature.
pub const QUADRATURE_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZMethod {
    Quadrature,
    Importance,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZEstimate {
    pub value: f64,
    pub se: f64,
    pub method: ZMethod,
    pub warnings: Vec<String>,
}

/// Quadrature when it applies, otherwise importance sampling.
///
/// `budget` is the Gauss–Legendre order per panel for quadrature and the
/// sample count for importance sampling.
pub fn estimate_z(spec: &MeasureSpec, budget: usize, seed: u64) -> Result<ZEstimate> {
    if spec.perturbation.is_none() {
        estimate_z_quadrature(spec, budget)
    } else {
        estimate_z_importance(spec, budget, seed)
    }
}

fn rule(order: usize, upper: f64) -> Vec<(f64, f64)> {
    graded_rule(order, upper, PANELS)
}

fn graded_rule(order: usize, upper: f64, panels: usize) -> Vec<(f64, f64)> {
    let gl = GaussLegendre::new(order.try_into().expect("order is positive"));
    let mut out = Vec::with_capacity(order * panels);
    let mut hi = upper;
    for p in 0..panels {
        let lo = if p + 1 == panels { 0.0 } else { hi / 4.0 };
        let (c, h) = (0.5 * (hi + lo), 0.5 * (hi - lo));
        for &(x, w) in gl.as_node_weight_pairs() {
            out.push((c + h * x, h * w));
        }
        hi = lo;
    }
    out
}

fn tensor_integral(spec: &MeasureSpec, order: usize) -> f64 {
    let d = spec.dimension();
    let inner = d - 1;
    let n = spec.kind.step() as f64;
    let r = spec.p / n;
    let s = 1.0 / r;
    let prefactor = s * spec.a.powf(-s) * gamma(s);
    let l = ((1e12f64).ln() / spec.a).powf(1.0 / spec.p);
    let rules: Vec<Vec<(f64, f64)>> = (0..inner).map(|k| rule(order, l.powi(weight(k) as i32))).collect();
    let size = rules[0].len();
    let total: f64 = (0..size)
        .into_par_iter()
        .map(|i0| {
            let mut x = vec![0.0; d];
            let mut idx = vec![0usize; inner];
            idx[0] = i0;
            let mut acc = stats::KahanSum::new();
            loop {
                let mut w = 1.0;
                for k in 0..inner {
                    let (node, weight) = rules[k][idx[k]];
                    x[k] = node;
                    w *= weight;
                }
                x[d - 1] = 0.0;
                let m = spec.kind.power_sum(&x);
                let tail = if s == 1.0 {
                    (-spec.a * m.powf(r)).exp()
                } else {
                    gamma_ur(s, spec.a * m.powf(r))
                };
                acc.add(w * tail);
                // odometer over coordinates 1..inner
                let mut k = inner - 1;
                loop {
                    if k == 0 {
                        return acc.value();
                    }
                    idx[k] += 1;
                    if idx[k] < rules[k].len() {
                        break;
                    }
                    idx[k] = 0;
                    k -= 1;
                }
            }
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    prefactor * total * 2f64.powi(d as i32)
}

/// `∫ e^{-Norm^n} dx` for the filiform norm of step `n`.
fn filiform_unit_integral(n: usize, order: usize) -> f64 {
    let alpha = (n + 1) as f64 / 2.0;
    let gamma_exp = 2.0 * n as f64 / (n + 1) as f64;
    let l = (1e12f64).ln().powf(1.0 / n as f64);
    let outer = graded_rule(order, l, FILIFORM_PANELS);
    let inner: Vec<(f64, Vec<(f64, f64)>)> = (2..n)
        .map(|k| (alpha / k as f64, graded_rule(order, l.powi(weight(k) as i32), FILIFORM_PANELS)))
        .collect();
    let total: f64 = outer
        .par_iter()
        .map(|&(u, wu)| {
            let mut acc = stats::KahanSum::new();
            for &(v, wv) in &outer {
                let base = u.powf(alpha) + v.powf(alpha);
                let mut value = (-(base + v.powf(alpha)).powf(gamma_exp)).exp();
                for (exponent, nodes) in &inner {
                    let line: f64 = nodes
                        .iter()
                        .map(|&(y, wy)| wy * (-(base + y.powf(*exponent)).powf(gamma_exp)).exp())
                        .sum();
                    value *= 2.0 * line;
                }
                acc.add(wu * wv * value);
            }
            acc.value()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    // four sign patterns of (x_1, x_2), and ∫ e^{-|t|} dt = 2 for the last coordinate
    8.0 * total
}

fn quadrature_pass(spec: &MeasureSpec, order: usize) -> f64 {
    match spec.kind {
        NormKind::Engel => tensor_integral(spec, order),
        NormKind::Filiform(_) => {
            let n = spec.kind.step();
            let q = spec.homogeneous_dimension() as f64;
            let ball = filiform_unit_integral(n, order) / gamma(1.0 + q / n as f64);
            ball * gamma(1.0 + q / spec.p) * spec.a.powf(-q / spec.p)
        }
    }
}

pub fn estimate_z_quadrature(spec: &MeasureSpec, order: usize) -> Result<ZEstimate> {
    if spec.perturbation.is_some() {
        return Err(CarnotError::Unsupported(
            "quadrature normalisation needs an unperturbed measure".into(),
        ));
    }
    let order = order.max(2);
    let coarse = quadrature_pass(spec, order);
    let fine = quadrature_pass(spec, 2 * order);
    let err = (fine - coarse).abs();
    if !(fine > 0.0 && fine.is_finite()) {
        return Err(CarnotError::Precision {
            what: "normalisation quadrature".into(),
            achieved: f64::NAN,
            wanted: QUADRATURE_TOLERANCE,
        });
    }
    if err > QUADRATURE_TOLERANCE * fine {
        return Err(CarnotError::Precision {
            what: "normalisation quadrature".into(),
            achieved: err / fine,
            wanted: QUADRATURE_TOLERANCE,
        });
    }
    Ok(ZEstimate {
        value: fine,
        se: err,
        method: ZMethod::Quadrature,
        warnings: Vec::new(),
    })
}

pub fn estimate_z_importance(spec: &MeasureSpec, samples: usize, seed: u64) -> Result<ZEstimate> {
    if samples < 2 {
        return Err(CarnotError::Domain("importance sampling needs at least 2 samples".into()));
    }
    let d = spec.dimension();
    let c = spec.a.powf(-1.0 / spec.p);
    let scales: Vec<f64> = (0..d).map(|k| c.powi(weight(k) as i32)).collect();
    let refs: Vec<StudentsT> = scales
        .iter()
        .map(|&s| StudentsT::new(0.0, s, STUDENT_DOF).expect("valid Student-t parameters"))
        .collect();
    let t = StudentT::new(STUDENT_DOF).expect("valid degrees of freedom");
    const CHUNK: usize = 8192;
    let chunks = samples.div_ceil(CHUNK);
    let weights: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|ch| {
            let mut rng = seed::child_rng(seed, ch as u64);
            let mut x = vec![0.0; d];
            let end = ((ch + 1) * CHUNK).min(samples);
            (ch * CHUNK..end)
                .map(|_| {
                    let mut log_g = 0.0;
                    for k in 0..d {
                        x[k] = scales[k] * rng.sample(t);
                        log_g += refs[k].ln_pdf(x[k]);
                    }
                    (spec.log_unnormalized_density(&x) - log_g).exp()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let (value, se) = stats::mean_and_se(&weights, stats::DEFAULT_BATCHES);
    let mut warnings = Vec::new();
    let max = weights.iter().cloned().fold(0.0, f64::max);
    let share = max / stats::sum(weights.iter().copied());
    if share > 0.01 {
        warnings.push(format!("largest importance weight carries {share:.3} of the total"));
    }
    Ok(ZEstimate {
        value,
        se,
        method: ZMethod::Importance,
        warnings,
    })
}

/// `Z(a') / Z(a) = λ^Q` with `λ = (a/a')^{1/p}`.
pub fn z_scaling_factor(spec: &MeasureSpec, a_new: f64) -> f64 {
    (spec.a / a_new).powf(spec.homogeneous_dimension() as f64 / spec.p)
}

/// Lebesgue volume of `{Norm ≤ 1}` implied by `Z = |B_1| Γ(1 + Q/p) a^{-Q/p}`.
pub fn ball_volume_from_z(spec: &MeasureSpec, z: f64) -> f64 {
    let qp = spec.homogeneous_dimension() as f64 / spec.p;
    z / (gamma(1.0 + qp) * spec.a.powf(-qp))
}
