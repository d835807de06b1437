//! Horizontal gradient and sub-Laplacian along a frame.
//!
//! With `V` the coefficient vector of a field `X`, for a scalar `f`
//!
//! ```text
//! X f   = V · ∇f
//! X² f  = Vᵀ (∇²f) V + ((DV) V) · ∇f
//! ```
//!
//! so Euclidean jets are enough for exact frame derivatives. Fields without a
//! jet fall back to 4th-order central differences along the frozen ray
//! `t ↦ x + t V(x)`; second derivatives nest two such differences.

use crate::error::{CarnotError, Result};
use crate::frames::{Frame, FrameKind, VectorField};
use crate::norms::{is_smooth, NormKind};

/// Step of the first-order frozen-ray difference.
pub const FD_STEP: f64 = 1e-5;
/// Outer step of the nested second-order difference.
pub const FD_OUTER_STEP: f64 = 1e-4;

/// A real function on `G_{n+1}` with optional closed-form Euclidean derivatives.
///
/// Implementations must tolerate concurrent calls.
pub trait ScalarField: Sync {
    fn value(&self, x: &[f64]) -> f64;

    fn is_smooth_at(&self, _x: &[f64]) -> bool {
        true
    }

    fn gradient(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Row-major Hessian.
    fn hessian(&self, _x: &[f64]) -> Option<Vec<f64>> {
        None
    }
}

impl ScalarField for NormKind {
    fn value(&self, x: &[f64]) -> f64 {
        self.norm(x)
    }

    fn is_smooth_at(&self, x: &[f64]) -> bool {
        is_smooth(*self, x)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.jet(x).gradient)
    }

    fn hessian(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(self.jet(x).hessian)
    }
}

/// The coordinate function `x ↦ x_k` (0-based `k`).
#[derive(Debug, Clone, Copy)]
pub struct Coordinate(pub usize);

impl ScalarField for Coordinate {
    fn value(&self, x: &[f64]) -> f64 {
        x[self.0]
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        g[self.0] = 1.0;
        Some(g)
    }

    fn hessian(&self, x: &[f64]) -> Option<Vec<f64>> {
        Some(vec![0.0; x.len() * x.len()])
    }
}

type ValueFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Scalar field assembled from closures.
pub struct FnField {
    value: ValueFn,
    gradient: Option<VectorFn>,
}

impl FnField {
    pub fn new(value: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FnField {
            value: Box::new(value),
            gradient: None,
        }
    }

    pub fn with_gradient(mut self, g: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.gradient = Some(Box::new(g));
        self
    }
}

impl ScalarField for FnField {
    fn value(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    fn gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }
}

/// `∇_G f = (X_1 f, X_2 f)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HorizontalVector {
    pub components: [f64; 2],
}

impl HorizontalVector {
    pub fn norm(&self) -> f64 {
        self.components[0].hypot(self.components[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMode {
    /// Closed form when available, differences otherwise.
    Auto,
    FiniteDifference,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// `(DV) V = Σ_i V_i ∂_i V`.
pub fn field_acceleration(field: &VectorField, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let v = field.coefficients(x);
    let j = field.coefficient_jacobian(x);
    (0..d).map(|k| (0..d).map(|i| j[k * d + i] * v[i]).sum()).collect()
}

fn stencil(mut g: impl FnMut(f64) -> f64, h: f64) -> f64 {
    (8.0 * (g(h) - g(-h)) - (g(2.0 * h) - g(-2.0 * h))) / (12.0 * h)
}

fn ray_derivative(f: &dyn Fn(&[f64]) -> f64, v: &[f64], x: &[f64], h: f64) -> f64 {
    let mut y = x.to_vec();
    stencil(
        |t| {
            for k in 0..x.len() {
                y[k] = x[k] + t * v[k];
            }
            f(&y)
        },
        h,
    )
}

/// `X f` by frozen-ray differences.
pub fn fd_first(f: &dyn ScalarField, field: &VectorField, x: &[f64]) -> f64 {
    let v = field.coefficients(x);
    ray_derivative(&|y| f.value(y), &v, x, FD_STEP)
}

/// `X² f` by nested frozen-ray differences.
pub fn fd_second(f: &dyn ScalarField, field: &VectorField, x: &[f64]) -> f64 {
    let v = field.coefficients(x);
    ray_derivative(&|y| fd_first(f, field, y), &v, x, FD_OUTER_STEP)
}

fn first_along(f: &dyn ScalarField, field: &VectorField, x: &[f64], mode: DerivativeMode) -> f64 {
    if mode == DerivativeMode::Auto {
        if let Some(g) = f.gradient(x) {
            return dot(&field.coefficients(x), &g);
        }
    }
    fd_first(f, field, x)
}

fn second_along(f: &dyn ScalarField, field: &VectorField, x: &[f64], mode: DerivativeMode) -> f64 {
    if mode == DerivativeMode::Auto {
        if let (Some(g), Some(h)) = (f.gradient(x), f.hessian(x)) {
            return quadratic_form(field, x, &g, &h);
        }
    }
    fd_second(f, field, x)
}

fn quadratic_form(field: &VectorField, x: &[f64], g: &[f64], h: &[f64]) -> f64 {
    let d = x.len();
    let v = field.coefficients(x);
    let mut q = 0.0;
    for r in 0..d {
        if v[r] != 0.0 {
            q += v[r] * (0..d).map(|c| h[r * d + c] * v[c]).sum::<f64>();
        }
    }
    q + dot(&field_acceleration(field, x), g)
}

fn require_smooth(f: &dyn ScalarField, x: &[f64]) -> Result<()> {
    if f.is_smooth_at(x) {
        Ok(())
    } else {
        Err(CarnotError::SingularPoint { point: x.to_vec() })
    }
}

pub fn subgradient(f: &dyn ScalarField, frame: &Frame, x: &[f64]) -> Result<HorizontalVector> {
    subgradient_with(f, frame, x, DerivativeMode::Auto)
}

pub fn subgradient_with(
    f: &dyn ScalarField,
    frame: &Frame,
    x: &[f64],
    mode: DerivativeMode,
) -> Result<HorizontalVector> {
    check_dimension(frame, x)?;
    require_smooth(f, x)?;
    let h = frame.horizontal();
    Ok(HorizontalVector {
        components: [first_along(f, &h[0], x, mode), first_along(f, &h[1], x, mode)],
    })
}

pub fn sublaplacian(f: &dyn ScalarField, frame: &Frame, x: &[f64]) -> Result<f64> {
    sublaplacian_with(f, frame, x, DerivativeMode::Auto)
}

pub fn sublaplacian_with(f: &dyn ScalarField, frame: &Frame, x: &[f64], mode: DerivativeMode) -> Result<f64> {
    check_dimension(frame, x)?;
    require_smooth(f, x)?;
    let h = frame.horizontal();
    Ok(second_along(f, &h[0], x, mode) + second_along(f, &h[1], x, mode))
}

fn check_dimension(frame: &Frame, x: &[f64]) -> Result<()> {
    if x.len() != frame.dimension() {
        return Err(CarnotError::DimensionMismatch {
            expected: frame.dimension(),
            actual: x.len(),
        });
    }
    Ok(())
}

/// First and second derivatives of a norm along the two generators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameDerivatives {
    pub value: f64,
    pub first: [f64; 2],
    pub second: [f64; 2],
}

impl FrameDerivatives {
    pub fn gradient_norm(&self) -> f64 {
        self.first[0].hypot(self.first[1])
    }

    pub fn laplacian(&self) -> f64 {
        self.second[0] + self.second[1]
    }
}

/// Exact frame derivatives of the norm from its Euclidean jet. The caller
/// guarantees `x` lies in the smooth region.
pub fn norm_frame_derivatives(kind: NormKind, frame: &Frame, x: &[f64]) -> FrameDerivatives {
    let jet = kind.jet(x);
    let h = frame.horizontal();
    let first = [
        dot(&h[0].coefficients(x), &jet.gradient),
        dot(&h[1].coefficients(x), &jet.gradient),
    ];
    let second = [
        quadratic_form(&h[0], x, &jet.gradient, &jet.hessian),
        quadratic_form(&h[1], x, &jet.gradient, &jet.hessian),
    ];
    FrameDerivatives {
        value: jet.value,
        first,
        second,
    }
}

/// The same derivatives by frozen-ray differences; the oracle for the tables.
pub fn norm_frame_derivatives_fd(kind: NormKind, frame: &Frame, x: &[f64]) -> FrameDerivatives {
    let h = frame.horizontal();
    FrameDerivatives {
        value: kind.norm(x),
        first: [fd_first(&kind, &h[0], x), fd_first(&kind, &h[1], x)],
        second: [fd_second(&kind, &h[0], x), fd_second(&kind, &h[1], x)],
    }
}

/// Hand-expanded derivatives of `N` along the mirrored Engel right frame
/// `X_1 = ∂_1 - x_2∂_3 - x_3∂_4`, `X_2 = ∂_2`:
///
/// ```text
/// X_1 M = 1.5‖x‖(2x_1 - s_3 x_2) - s_4 x_3           X_2 M = 3‖x‖ x_2
/// X_1²M = 3‖x‖ + 3(2x_1 - s_3 x_2)²/(4‖x‖) + s_4 x_2  X_2²M = 3‖x‖ + 3x_2²/‖x‖
/// X N = XM/(3N²),   X²N = X²M/(3N²) - (2/9)(XM)²/N⁵
/// ```
///
/// with `s_k = sgn(x_k)`.
pub fn engel_right_derivatives(x: &[f64]) -> FrameDerivatives {
    let s = crate::norms::engel_seminorm(x);
    let n = crate::norms::engel_norm(x);
    let (s3, s4) = (x[2].signum(), x[3].signum());
    let u = 2.0 * x[0] - s3 * x[1];
    let m1 = 1.5 * s * u - s4 * x[2];
    let m2 = 3.0 * s * x[1];
    let mm1 = 3.0 * s + 3.0 * u * u / (4.0 * s) + s4 * x[1];
    let mm2 = 3.0 * s + 3.0 * x[1] * x[1] / s;
    let n2 = n * n;
    let n5 = n2 * n2 * n;
    FrameDerivatives {
        value: n,
        first: [m1 / (3.0 * n2), m2 / (3.0 * n2)],
        second: [
            mm1 / (3.0 * n2) - 2.0 / 9.0 * m1 * m1 / n5,
            mm2 / (3.0 * n2) - 2.0 / 9.0 * m2 * m2 / n5,
        ],
    }
}

/// Coefficients appearing when `X_1², X_2²` of `Ñ` are expanded term by term.
///
/// `X_1²Ñ` carries `c1 |x_1|^{(n-3)/2} Σ S_j^{γ-1}` and
/// `c2 |x_1|^{n-1} Σ S_j^{γ-2}` (over `Ñ^{n-1}`), where `γ = 2n/(n+1)`.
/// `X_2²Ñ` carries, per `j`, `c1_j (x_1^{j-2})² |x_j|^{b_j-2} S_j^{γ-1}` and
/// `c2_j (x_1^{j-2})² |x_j|^{2b_j-2} S_j^{γ-2}`, `b_j = (n+1)/(2(j-1))`,
/// besides the mixed `x_2`/`x_j` and `x_{n+1}` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct FiliformConstants {
    pub step: usize,
    pub c1: f64,
    pub c2: f64,
    /// Indexed by `j = 3..=n` at position `j - 3`.
    pub c1_j: Vec<f64>,
    pub c2_j: Vec<f64>,
}

pub fn filiform_constants(step: usize) -> FiliformConstants {
    let n = step as f64;
    let gamma = 2.0 * n / (n + 1.0);
    let b = |j: usize| (n + 1.0) / (2.0 * (j - 1) as f64);
    let fact = |k: usize| crate::group::factorial(k);
    FiliformConstants {
        step,
        c1: (n - 1.0) / 2.0,
        c2: (n - 1.0) / 2.0,
        c1_j: (3..=step)
            .map(|j| gamma * b(j) * (b(j) - 1.0) / (n * fact(j - 2).powi(2)))
            .collect(),
        c2_j: (3..=step)
            .map(|j| gamma * (gamma - 1.0) * b(j) * b(j) / (n * fact(j - 2).powi(2)))
            .collect(),
    }
}

/// Frame a norm is differentiated along in the estimates: the
/// Engel norm along the right frame, the filiform norm along the left one.
pub fn estimate_frame(kind: NormKind) -> Frame {
    match kind {
        NormKind::Engel => crate::frames::right_frame_engel(),
        NormKind::Filiform(d) => crate::frames::left_frame(d),
    }
}

/// True when `kind` and `frame` are the pairing used by [`estimate_frame`].
pub fn is_estimate_frame(kind: NormKind, frame: &Frame) -> bool {
    matches!(
        (kind, frame.kind),
        (NormKind::Engel, FrameKind::RightEngel) | (NormKind::Filiform(_), FrameKind::Left(_))
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{left_frame, right_frame_engel};
    use crate::group::GroupDescriptor;

    #[test]
    fn coordinate_derivatives() {
        let frame = left_frame(GroupDescriptor::new(4).unwrap());
        let x = [2.0, 0.5, -1.0, 3.0, 0.7];
        let g = subgradient(&Coordinate(0), &frame, &x).unwrap();
        assert_eq!(g.components, [1.0, 0.0]);
        let g = subgradient(&Coordinate(2), &frame, &x).unwrap();
        assert_eq!(g.components, [0.0, 2.0]);
        let fd = subgradient_with(&Coordinate(2), &frame, &x, DerivativeMode::FiniteDifference).unwrap();
        assert!((fd.components[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn squared_coordinates() {
        let frame = left_frame(GroupDescriptor::engel());
        let x = [1.5, -0.3, 0.8, 2.0];
        let sq1 = FnField::new(|x: &[f64]| x[0] * x[0]);
        let lap = sublaplacian(&sq1, &frame, &x).unwrap();
        assert!((lap - 2.0).abs() < 1e-6);
        let sq3 = FnField::new(|x: &[f64]| x[2] * x[2]);
        let lap = sublaplacian(&sq3, &frame, &x).unwrap();
        assert!((lap - 2.0 * x[0] * x[0]).abs() < 1e-6);
    }

    #[test]
    fn engel_display_point() {
        let d = engel_right_derivatives(&[1.0; 4]);
        assert!((d.first[0] - 0.1579).abs() < 1e-3);
        assert!((d.first[1] - 0.5135).abs() < 1e-3);
        assert!((d.first[1] - 3f64.sqrt() / d.value.powi(2)).abs() < 1e-14);
        let s = 3f64.sqrt();
        assert!((d.gradient_norm() * d.value.powi(2) / (s * s) - 0.604).abs() < 1e-3);
        let table = norm_frame_derivatives(NormKind::Engel, &right_frame_engel(), &[1.0; 4]);
        for i in 0..2 {
            assert!((table.first[i] - d.first[i]).abs() < 1e-14);
            assert!((table.second[i] - d.second[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_points_are_rejected() {
        let frame = right_frame_engel();
        let err = subgradient(&NormKind::Engel, &frame, &[1.0, 1.0, 0.0, 1.0]).unwrap_err();
        assert!(matches!(err, CarnotError::SingularPoint { .. }));
    }

    #[test]
    fn filiform_x1_sign() {
        let k = NormKind::filiform(5).unwrap();
        let frame = left_frame(k.descriptor());
        for x in [[0.4, 1.0, -2.0, 0.3, 1.2, -0.9], [-0.4, 1.0, -2.0, 0.3, 1.2, -0.9]] {
            let d = norm_frame_derivatives(k, &frame, &x);
            assert_eq!(d.first[0].signum(), x[0].signum());
        }
    }

    #[test]
    fn constants_for_step_three() {
        let c = filiform_constants(3);
        assert_eq!(c.c1, 1.0);
        assert_eq!(c.c2, 1.0);
        assert_eq!(c.c1_j.len(), 1);
        // b_3 = 1 so the |x_3|^{b-2} term drops out
        assert_eq!(c.c1_j[0], 0.0);
    }
}
