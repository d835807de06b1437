//! Upper bounds on the Carnot–Carathéodory distance from the identity by
//! optimising horizontal paths with piecewise-constant controls.
//!
//! A path has `K` segments of duration `τ = 1/K`; on segment `k` it follows
//! `u₁ X₁ + u₂ X₂` of the left frame. Left-invariant flows start from the
//! identity as the polynomial element
//! `e(u) = (u₁τ, u₂τ, u₂u₁τ²/2!, …, u₂u₁^{n-1}τⁿ/n!)`, and the endpoint is
//! the product `e(u_1) ∘ … ∘ e(u_K)`. Its Jacobian is chained exactly from
//! translation Jacobians of prefix and suffix products.
//!
//! Targets are first dilated to unit norm; controls then rescale linearly,
//! so the estimate is dilation-consistent by construction. The solver
//! minimises the energy `τ Σ |u_k|²` under the endpoint constraint by an
//! augmented Lagrangian with BFGS inner solves, finishes with Gauss–Newton
//! minimum-norm projections onto the constraint, and reports the path
//! length `τ Σ |u_k|` (≤ √energy). A `K`-segment solve also refines the
//! embedded solution of the `K/2` problem, so the value never increases
//! when `K` doubles.

use crate::error::{CarnotError, Result};
use crate::group::{
    compose_into, dilate_in_place, factorial, left_translation_jacobian, right_translation_jacobian, GroupDescriptor,
};
use crate::norms::NormKind;
use crate::seed;
use argmin::core::{CostFunction, Executor, Gradient};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::BFGS;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;

/// Smallest supported segment count.
pub const MIN_SEGMENTS: usize = 4;
/// Endpoint residual allowed relative to `1 + Norm(target)`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizontalPath {
    /// `(u₁, u₂)` per segment.
    pub controls: Vec<[f64; 2]>,
    /// Step `n` of the group (dimension `n + 1`).
    pub step: usize,
}

impl HorizontalPath {
    pub fn new(step: usize, controls: Vec<[f64; 2]>) -> Self {
        HorizontalPath { controls, step }
    }

    pub fn segments(&self) -> usize {
        self.controls.len()
    }

    pub fn duration(&self) -> f64 {
        1.0 / self.controls.len() as f64
    }

    /// `τ Σ |u_k|`.
    pub fn length(&self) -> f64 {
        self.duration() * self.controls.iter().map(|u| u[0].hypot(u[1])).sum::<f64>()
    }

    /// `τ Σ |u_k|²`.
    pub fn energy(&self) -> f64 {
        self.duration() * self.controls.iter().map(|u| u[0] * u[0] + u[1] * u[1]).sum::<f64>()
    }

    /// Points reached after each segment.
    pub fn trajectory(&self) -> Vec<Vec<f64>> {
        let d = self.step + 1;
        let tau = self.duration();
        let mut x = vec![0.0; d];
        let mut e = vec![0.0; d];
        let mut y = vec![0.0; d];
        self.controls
            .iter()
            .map(|u| {
                segment_element(*u, tau, &mut e);
                compose_into(&x, &e, &mut y);
                x.copy_from_slice(&y);
                x.clone()
            })
            .collect()
    }

    pub fn endpoint(&self) -> Vec<f64> {
        self.trajectory().pop().unwrap_or_else(|| vec![0.0; self.step + 1])
    }

    /// Each segment split in two; same curve, same length.
    pub fn refined(&self) -> Self {
        HorizontalPath {
            controls: self.controls.iter().flat_map(|u| [*u, *u]).collect(),
            step: self.step,
        }
    }

    /// CSV rows `segment,u1,u2,x1,…` with the point after each segment.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        let d = self.step + 1;
        let coords: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
        writeln!(w, "segment,u1,u2,{}", coords.join(","))?;
        for (k, (u, x)) in self.controls.iter().zip(self.trajectory()).enumerate() {
            let xs: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{},{},{}", k, u[0], u[1], xs.join(","))?;
        }
        Ok(())
    }
}

/// Flow of `u₁X₁ + u₂X₂` for time `tau` from the identity.
pub fn segment_element(u: [f64; 2], tau: f64, out: &mut [f64]) {
    out[0] = u[0] * tau;
    let mut p = u[1];
    for (k, o) in out.iter_mut().enumerate().skip(1) {
        *o = p * tau.powi(k as i32) / factorial(k);
        p *= u[0];
    }
}

/// Closed-form flow from `x`: `x ∘ e(u)`.
pub fn flow_segment(x: &[f64], u: [f64; 2], tau: f64) -> Vec<f64> {
    let mut e = vec![0.0; x.len()];
    segment_element(u, tau, &mut e);
    let mut y = vec![0.0; x.len()];
    compose_into(x, &e, &mut y);
    y
}

/// Classical Runge–Kutta integration of `γ' = u₁X₁(γ) + u₂X₂(γ)`.
pub fn flow_segment_rk4(x: &[f64], u: [f64; 2], tau: f64, substeps: usize) -> Vec<f64> {
    let d = x.len();
    let field = |y: &[f64]| -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[0] = u[0];
        let mut p = u[1];
        for (k, vk) in v.iter_mut().enumerate().skip(1) {
            *vk += p;
            p *= y[0] / k as f64;
        }
        v
    };
    let h = tau / substeps.max(1) as f64;
    let mut y = x.to_vec();
    for _ in 0..substeps.max(1) {
        let k1 = field(&y);
        let y2: Vec<f64> = (0..d).map(|i| y[i] + 0.5 * h * k1[i]).collect();
        let k2 = field(&y2);
        let y3: Vec<f64> = (0..d).map(|i| y[i] + 0.5 * h * k2[i]).collect();
        let k3 = field(&y3);
        let y4: Vec<f64> = (0..d).map(|i| y[i] + h * k3[i]).collect();
        let k4 = field(&y4);
        for i in 0..d {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Endpoint of the flat control vector `(u₁, u₂, u₁, u₂, …)` and, if asked,
/// its `d × 2K` Jacobian (row-major).
fn endpoint_and_jacobian(controls: &[f64], dim: usize, jacobian: Option<&mut [f64]>) -> Vec<f64> {
    let k = controls.len() / 2;
    let tau = 1.0 / k as f64;
    let elems: Vec<Vec<f64>> = (0..k)
        .map(|s| {
            let mut e = vec![0.0; dim];
            segment_element([controls[2 * s], controls[2 * s + 1]], tau, &mut e);
            e
        })
        .collect();
    // prefix[s] = e_0 ∘ … ∘ e_{s-1}
    let mut prefix = vec![vec![0.0; dim]; k + 1];
    for s in 0..k {
        let (head, tail) = prefix.split_at_mut(s + 1);
        compose_into(&head[s], &elems[s], &mut tail[0]);
    }
    let end = prefix[k].clone();
    let Some(jac) = jacobian else {
        return end;
    };
    // suffix[s] = e_s ∘ … ∘ e_{k-1}
    let mut suffix = vec![vec![0.0; dim]; k + 1];
    for s in (0..k).rev() {
        let (head, tail) = suffix.split_at_mut(s + 1);
        compose_into(&elems[s], &tail[0], &mut head[s]);
    }
    let cols = 2 * k;
    jac.iter_mut().for_each(|v| *v = 0.0);
    for s in 0..k {
        let (u1, u2) = (controls[2 * s], controls[2 * s + 1]);
        // ∂e/∂(u₁, u₂)
        let mut de = vec![[0.0; 2]; dim];
        de[0] = [tau, 0.0];
        for (c, row) in de.iter_mut().enumerate().skip(1) {
            let scale = tau.powi(c as i32) / factorial(c);
            row[1] = u1.powi(c as i32 - 1) * scale;
            if c >= 2 {
                row[0] = u2 * (c - 1) as f64 * u1.powi(c as i32 - 2) * scale;
            }
        }
        let left = left_translation_jacobian(&prefix[s], &suffix[s]);
        let right = right_translation_jacobian(&suffix[s + 1], &elems[s]);
        // left · right · de
        for r in 0..dim {
            for j in 0..2 {
                let mut acc = 0.0;
                for a in 0..dim {
                    let l = left[r * dim + a];
                    if l == 0.0 {
                        continue;
                    }
                    let mut inner = 0.0;
                    for b in 0..dim {
                        inner += right[a * dim + b] * de[b][j];
                    }
                    acc += l * inner;
                }
                jac[r * cols + 2 * s + j] = acc;
            }
        }
    }
    end
}

struct Lagrangian<'a> {
    target: &'a [f64],
    multipliers: Vec<f64>,
    penalty: f64,
}

impl Lagrangian<'_> {
    fn evaluate(&self, u: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let d = self.target.len();
        let cols = u.len();
        let tau = 2.0 / cols as f64;
        let mut jac = vec![0.0; d * cols];
        let want_grad = grad.is_some();
        let end = endpoint_and_jacobian(u, d, want_grad.then_some(&mut jac[..]));
        let c: Vec<f64> = end.iter().zip(self.target).map(|(a, b)| a - b).collect();
        let energy: f64 = tau * u.iter().map(|v| v * v).sum::<f64>();
        let value = energy
            + c.iter().zip(&self.multipliers).map(|(c, l)| c * l).sum::<f64>()
            + 0.5 * self.penalty * c.iter().map(|c| c * c).sum::<f64>();
        if let Some(g) = grad {
            let w: Vec<f64> = (0..d).map(|r| self.multipliers[r] + self.penalty * c[r]).collect();
            for j in 0..cols {
                g[j] = 2.0 * tau * u[j] + (0..d).map(|r| jac[r * cols + j] * w[r]).sum::<f64>();
            }
        }
        value
    }
}

impl CostFunction for Lagrangian<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, u: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.evaluate(u, None))
    }
}

impl Gradient for Lagrangian<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, u: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        let mut g = vec![0.0; u.len()];
        self.evaluate(u, Some(&mut g));
        Ok(g)
    }
}

fn residual(u: &[f64], target: &[f64]) -> f64 {
    let end = endpoint_and_jacobian(u, target.len(), None);
    end.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
}

fn constraint_system(u: &[f64], target: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let d = target.len();
    let mut jac = vec![0.0; d * u.len()];
    let end = endpoint_and_jacobian(u, d, Some(&mut jac));
    let c = DVector::from_iterator(d, end.iter().zip(target).map(|(a, b)| a - b));
    (DMatrix::from_row_slice(d, u.len(), &jac), c)
}

/// Levenberg–Marquardt steps `u ← u - Jᵀ(JJᵀ + λI)⁻¹ c` toward the
/// constraint set; the damping shrinks after each accepted step.
fn project(u: &mut Vec<f64>, target: &[f64], iterations: usize) {
    let d = target.len();
    let mut damping = 1e-6;
    for _ in 0..iterations {
        let (j, c) = constraint_system(u, target);
        let before = c.norm();
        if before <= 1e-15 {
            return;
        }
        let jjt = &j * j.transpose();
        let scale = jjt.diagonal().max().max(1e-300);
        let mut accepted = false;
        while damping < 1e8 {
            let shifted = &jjt + DMatrix::identity(d, d) * (damping * scale);
            let Some(chol) = shifted.cholesky() else {
                damping *= 10.0;
                continue;
            };
            let step = j.transpose() * chol.solve(&c);
            let trial: Vec<f64> = u.iter().zip(step.iter()).map(|(a, s)| a - s).collect();
            if residual(&trial, target) < before {
                *u = trial;
                damping = (damping / 10.0).max(1e-12);
                accepted = true;
                break;
            }
            damping *= 10.0;
        }
        if !accepted {
            return;
        }
    }
}

/// Homotopy from the endpoint `u` already reaches to `target`, for starts
/// stuck at a local minimum of the residual; keeps `u` unchanged on failure.
fn continuation(u: &mut Vec<f64>, target: &[f64]) {
    let tol = RESIDUAL_TOLERANCE * 1e-3;
    let start = endpoint_and_jacobian(u, target.len(), None);
    let mut path = u.clone();
    let (mut s, mut ds) = (0.0f64, 0.125);
    while s < 1.0 {
        let next = (s + ds).min(1.0);
        let waypoint: Vec<f64> = start.iter().zip(target).map(|(a, b)| a + next * (b - a)).collect();
        let mut trial = path.clone();
        project(&mut trial, &waypoint, 30);
        if residual(&trial, &waypoint) <= tol {
            path = trial;
            s = next;
            ds = (ds * 2.0).min(0.5);
        } else {
            ds *= 0.25;
            if ds < 1e-4 {
                return;
            }
        }
    }
    *u = path;
}

/// Energy descent along the constraint set: the minimum-norm solution of
/// the linearised constraint is the next iterate, damped and re-projected
/// until energy drops.
fn polish(u: &mut Vec<f64>, target: &[f64], iterations: usize) {
    let energy = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
    let tol = RESIDUAL_TOLERANCE * 1e-3;
    if residual(u, target) > tol {
        return;
    }
    for _ in 0..iterations {
        let (j, c) = constraint_system(u, target);
        let x = DVector::from_column_slice(u);
        let Some(chol) = (&j * j.transpose()).cholesky() else {
            return;
        };
        let v = j.transpose() * chol.solve(&(&j * &x - c));
        let dir = v - &x;
        if dir.norm() <= 1e-12 * x.norm().max(1.0) {
            return;
        }
        let e0 = energy(u);
        let mut t = 1.0;
        loop {
            let mut trial: Vec<f64> = u.iter().zip(dir.iter()).map(|(a, s)| a + t * s).collect();
            project(&mut trial, target, 30);
            if residual(&trial, target) <= tol && energy(&trial) < e0 {
                *u = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-3 {
                return;
            }
        }
    }
}

/// Augmented-Lagrangian solve from `start`; returns the controls and the
/// number of outer iterations.
fn solve_from(start: Vec<f64>, target: &[f64]) -> (Vec<f64>, usize) {
    let mut lag = Lagrangian {
        target,
        multipliers: vec![0.0; target.len()],
        penalty: 1e3,
    };
    let mut u = start;
    let mut last = residual(&u, target);
    let mut outer = 0;
    for _ in 0..15 {
        outer += 1;
        let n = u.len();
        let identity: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let solver = BFGS::new(MoreThuenteLineSearch::new())
            .with_tolerance_grad(1e-10)
            .expect("positive tolerance")
            .with_tolerance_cost(1e-14)
            .expect("non-negative tolerance");
        let problem = Lagrangian {
            target,
            multipliers: lag.multipliers.clone(),
            penalty: lag.penalty,
        };
        let result = Executor::new(problem, solver)
            .configure(|s| s.param(u.clone()).inv_hessian(identity).max_iters(300))
            .run();
        if let Ok(mut res) = result {
            if let Some(best) = res.state.take_best_param() {
                if best.iter().all(|v| v.is_finite()) {
                    u = best;
                }
            }
        }
        let end = endpoint_and_jacobian(&u, target.len(), None);
        let c: Vec<f64> = end.iter().zip(target).map(|(a, b)| a - b).collect();
        let res = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (l, ci) in lag.multipliers.iter_mut().zip(&c) {
            *l += lag.penalty * ci;
        }
        if res < 1e-9 {
            break;
        }
        if res > 0.25 * last {
            lag.penalty = (lag.penalty * 10.0).min(1e6);
        }
        last = res;
    }
    project(&mut u, target, 50);
    if residual(&u, target) > RESIDUAL_TOLERANCE * 1e-3 {
        continuation(&mut u, target);
    }
    (u, outer)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeodesicConfig {
    pub segments: usize,
    pub restarts: usize,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig {
            segments: 16,
            restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistanceEstimate {
    pub target: Vec<f64>,
    /// Length of the best path found, rescaled to the target's norm shell:
    /// an upper bound on the distance up to the endpoint residual.
    pub value: f64,
    pub residual: f64,
    pub segments: usize,
    pub iterations: usize,
    pub path: HorizontalPath,
}

/// Start for restart `r`: the straight move toward `(x₁, x₂)` plus a loop
/// that excites the brackets. Restart 0 is one circle; later restarts add
/// random Fourier modes of growing amplitude, so higher brackets get excited
/// too.
fn initial_controls(target: &[f64], segments: usize, r: usize, seed: u64) -> Vec<f64> {
    let mut rng = seed::rng(seed);
    let modes: Vec<(f64, f64, f64, f64)> = if r == 0 {
        vec![(1.0, 0.0, 1.0, 0.0)]
    } else {
        let scale = 1.0 + (r % 4) as f64;
        (1..=3)
            .map(|_| {
                let mut g = || scale * rng.sample::<f64, _>(StandardNormal);
                (g(), g(), g(), g())
            })
            .collect()
    };
    (0..segments)
        .flat_map(|s| {
            let t = 2.0 * std::f64::consts::PI * (s as f64 + 0.5) / segments as f64;
            let (mut u1, mut u2) = (target[0], target[1]);
            for (m, &(a1, b1, a2, b2)) in modes.iter().enumerate() {
                let f = (m + 1) as f64 * t;
                u1 += a1 * f.cos() + b1 * f.sin();
                u2 += a2 * f.sin() + b2 * f.cos();
            }
            [u1, u2]
        })
        .collect()
}

/// Normalised solve: `target` has unit norm (or is the identity).
fn solve_unit(target: &[f64], segments: usize, restarts: usize, seed: u64) -> Option<(Vec<f64>, usize)> {
    let mut candidates: Vec<(Vec<f64>, usize)> = Vec::new();
    if segments % 2 == 0 && segments / 2 >= MIN_SEGMENTS {
        if let Some((coarse, it)) = solve_unit(target, segments / 2, restarts, seed) {
            let embedded: Vec<f64> = coarse.chunks_exact(2).flat_map(|u| [u[0], u[1], u[0], u[1]]).collect();
            let (refined, it2) = solve_from(embedded.clone(), target);
            candidates.push((embedded, it));
            candidates.push((refined, it + it2));
        }
    }
    let starts: Vec<Vec<f64>> = (0..restarts.max(1))
        .map(|r| initial_controls(target, segments, r, seed::child_seed(seed, (segments * 1000 + r) as u64)))
        .collect();
    let solved: Vec<(Vec<f64>, usize)> = starts.into_par_iter().map(|s| solve_from(s, target)).collect();
    candidates.extend(solved);
    let tol = RESIDUAL_TOLERANCE * 1e-3;
    let length = |u: &[f64]| u.chunks_exact(2).map(|v| v[0].hypot(v[1])).sum::<f64>() / (u.len() / 2) as f64;
    candidates
        .into_iter()
        .filter(|(u, _)| residual(u, target) <= tol)
        .fold(None, |best: Option<(Vec<f64>, usize)>, cand| match best {
            Some(b) if length(&b.0) <= length(&cand.0) => Some(b),
            _ => Some(cand),
        })
        .map(|(mut u, it)| {
            polish(&mut u, target, 20);
            (u, it)
        })
}

/// Upper bound on the distance from the identity to `target` (left frame,
/// group of dimension `target.len()`).
pub fn approx_distance(target: &[f64], config: &GeodesicConfig, seed: u64) -> Result<DistanceEstimate> {
    let descriptor = GroupDescriptor::new(target.len().saturating_sub(1))?;
    if config.segments < MIN_SEGMENTS {
        return Err(CarnotError::Domain(format!(
            "need at least {MIN_SEGMENTS} segments, got {}",
            config.segments
        )));
    }
    if target.iter().any(|v| !v.is_finite()) {
        return Err(CarnotError::Domain("target has non-finite coordinates".into()));
    }
    let step = descriptor.step();
    let kind = NormKind::filiform(step)?;
    let scale = kind.norm(target);
    if scale == 0.0 {
        return Ok(DistanceEstimate {
            target: target.to_vec(),
            value: 0.0,
            residual: 0.0,
            segments: config.segments,
            iterations: 0,
            path: HorizontalPath::new(step, vec![[0.0, 0.0]; config.segments]),
        });
    }
    let mut unit = target.to_vec();
    dilate_in_place(1.0 / scale, &mut unit);
    let (u, iterations) = solve_unit(&unit, config.segments, config.restarts, seed).ok_or_else(|| {
        CarnotError::Infeasible(format!(
            "no path reached {target:?} within the residual tolerance"
        ))
    })?;
    let path = HorizontalPath::new(step, u.chunks_exact(2).map(|v| [scale * v[0], scale * v[1]]).collect());
    let end = path.endpoint();
    let residual = end.iter().zip(target).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let allowed = RESIDUAL_TOLERANCE * (1.0 + scale);
    if residual > allowed {
        return Err(CarnotError::Infeasible(format!(
            "best endpoint residual {residual:e} exceeds {allowed:e}"
        )));
    }
    // Dilating the path so its endpoint lies on the target's norm shell
    // removes the first-order effect of the endpoint residual on the length.
    let shell = scale / kind.norm(&end);
    Ok(DistanceEstimate {
        target: target.to_vec(),
        value: shell * path.length(),
        residual,
        segments: config.segments,
        iterations,
        path,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalencePoint {
    pub point: Vec<f64>,
    pub distance: f64,
    pub norm: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub norm: String,
    pub points: Vec<EquivalencePoint>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max / min`, an empirical equivalence constant. Distances are upper
    /// bounds, so the lower edge is conservative.
    pub band: f64,
}

/// `approx_distance(x) / Norm(x)` over `points`.
pub fn equivalence_scan(kind: NormKind, points: &[Vec<f64>], config: &GeodesicConfig, seed: u64) -> Result<EquivalenceReport> {
    if points.is_empty() {
        return Err(CarnotError::EmptyDomain("equivalence scan needs points".into()));
    }
    let results: Vec<Result<EquivalencePoint>> = points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if x.len() != kind.dimension() {
                return Err(CarnotError::DimensionMismatch {
                    expected: kind.dimension(),
                    actual: x.len(),
                });
            }
            let norm = kind.norm(x);
            if norm == 0.0 {
                return Err(CarnotError::Domain("equivalence scan points must avoid the origin".into()));
            }
            let est = approx_distance(x, config, seed::child_seed(seed, i as u64))?;
            Ok(EquivalencePoint {
                point: x.clone(),
                distance: est.value,
                norm,
                ratio: est.value / norm,
            })
        })
        .collect();
    let points: Vec<EquivalencePoint> = results.into_iter().collect::<Result<_>>()?;
    let min_ratio = points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let max_ratio = points.iter().map(|p| p.ratio).fold(0.0, f64::max);
    Ok(EquivalenceReport {
        norm: kind.name(),
        points,
        min_ratio,
        max_ratio,
        band: max_ratio / min_ratio,
    })
}

/// Points with coordinates uniform in `[-1, 1]^{w_k}` scaled boxes, for scans.
pub fn scan_points(kind: NormKind, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed);
    let d = kind.dimension();
    (0..count)
        .map(|_| (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_flow_matches_rk4() {
        let x = [0.3, -0.2, 0.7, 0.1];
        let u = [1.3, -0.8];
        let exact = flow_segment(&x, u, 0.25);
        let rk = flow_segment_rk4(&x, u, 0.25, 1);
        for (a, b) in exact.iter().zip(&rk) {
            assert!((a - b).abs() < 1e-12, "{exact:?} {rk:?}");
        }
        let x = [0.3, -0.2, 0.7, 0.1, -0.4, 0.9, 0.05];
        let exact = flow_segment(&x, u, 0.25);
        let rk = flow_segment_rk4(&x, u, 0.25, 128);
        for (a, b) in exact.iter().zip(&rk) {
            assert!((a - b).abs() < 1e-12, "{exact:?} {rk:?}");
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let u: Vec<f64> = (0..12).map(|i| ((i * 7) % 5) as f64 * 0.3 - 0.6).collect();
        let d = 5;
        let mut jac = vec![0.0; d * u.len()];
        endpoint_and_jacobian(&u, d, Some(&mut jac));
        for j in 0..u.len() {
            let h = 1e-6;
            let mut p = u.clone();
            let mut m = u.clone();
            p[j] += h;
            m[j] -= h;
            let ep = endpoint_and_jacobian(&p, d, None);
            let em = endpoint_and_jacobian(&m, d, None);
            for r in 0..d {
                let fd = (ep[r] - em[r]) / (2.0 * h);
                assert!((fd - jac[r * u.len() + j]).abs() < 1e-7, "r={r} j={j}");
            }
        }
    }

    #[test]
    fn identity_has_zero_distance() {
        let e = approx_distance(&[0.0; 4], &GeodesicConfig::default(), 1).unwrap();
        assert_eq!(e.value, 0.0);
    }

    #[test]
    fn horizontal_axes_have_unit_distance() {
        let cfg = GeodesicConfig::default();
        for t in [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]] {
            let e = approx_distance(&t, &cfg, 3).unwrap();
            assert!((1.0..=1.02).contains(&(e.value + 1e-12)), "{t:?} {}", e.value);
        }
    }

    #[test]
    fn doubling_segments_never_hurts() {
        let t = [0.2, -0.3, 0.5, 0.4];
        let a = approx_distance(&t, &GeodesicConfig { segments: 8, restarts: 2 }, 5).unwrap();
        let b = approx_distance(&t, &GeodesicConfig { segments: 16, restarts: 2 }, 5).unwrap();
        assert!(b.value <= a.value + 1e-8, "{} {}", a.value, b.value);
    }

    #[test]
    fn refined_path_keeps_endpoint_and_length() {
        let p = HorizontalPath::new(3, vec![[1.0, 0.5], [-0.3, 2.0], [0.4, 0.4], [0.0, -1.0]]);
        let r = p.refined();
        assert!((p.length() - r.length()).abs() < 1e-14);
        for (a, b) in p.endpoint().iter().zip(r.endpoint()) {
            assert!((a - b).abs() < 1e-13);
        }
    }
}
