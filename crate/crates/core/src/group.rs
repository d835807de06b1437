//! Arithmetic of the filiform groups `G_{n+1} = (R^{n+1}, ∘)`.
//!
//! Points live in the global polynomial chart. With 1-based coordinates the
//! law reads
//!
//! ```text
//! (x ∘ y)_1 = x_1 + y_1
//! (x ∘ y)_2 = x_2 + y_2
//! (x ∘ y)_k = x_k + y_k + Σ_{i=2}^{k-1} y_i x_1^{k-i} / (k-i)!     (k ≥ 3)
//! ```
//!
//! and the dilations are `δ_λ(x)_k = λ^{w_k} x_k` with weights
//! `(1, 1, 2, 3, …, n)`. The identity is the origin.
//!
//! The slice-level functions (`compose_into`, `inverse_into`, …) are what the
//! hot loops use; [`GroupPoint`] is the checked public face.

use crate::error::{CarnotError, Result};

/// Largest supported step. Beyond it the `x_1^k / k!` terms stop being sane
/// in double precision for moderate `x_1`.
pub const MAX_STEP: usize = 12;

/// Exact factorials `0! ..= 12!`.
pub const FACTORIALS: [u64; MAX_STEP + 1] = [
    1, 1, 2, 6, 24, 120, 720, 5040, 40320, 362880, 3628800, 39916800, 479001600,
];

#[inline]
pub fn factorial(k: usize) -> f64 {
    FACTORIALS[k] as f64
}

/// `x^m / m!` for `m ≤ MAX_STEP`.
#[inline]
pub fn scaled_power(x: f64, m: usize) -> f64 {
    x.powi(m as i32) / factorial(m)
}

/// Step `n` of a filiform group; the group has dimension `n + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupDescriptor {
    step: usize,
}

impl GroupDescriptor {
    pub fn new(step: usize) -> Result<Self> {
        if !(3..=MAX_STEP).contains(&step) {
            return Err(CarnotError::Domain(format!(
                "step must lie in 3..={MAX_STEP}, got {step}"
            )));
        }
        Ok(Self { step })
    }

    /// The Engel group `B_4 = G_4`.
    pub fn engel() -> Self {
        Self { step: 3 }
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn dimension(&self) -> usize {
        self.step + 1
    }

    /// Dilation weight of 0-based coordinate `k`.
    #[inline]
    pub fn weight(&self, k: usize) -> usize {
        weight(k)
    }

    pub fn weights(&self) -> Vec<usize> {
        (0..self.dimension()).map(weight).collect()
    }

    /// Homogeneous dimension `Q = 1 + 1 + 2 + … + n`.
    pub fn homogeneous_dimension(&self) -> usize {
        self.weights().iter().sum()
    }
}

#[inline]
pub fn weight(k: usize) -> usize {
    if k == 0 {
        1
    } else {
        k
    }
}

/// A point of `G_{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupPoint {
    descriptor: GroupDescriptor,
    coords: Vec<f64>,
}

impl GroupPoint {
    pub fn new(descriptor: GroupDescriptor, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != descriptor.dimension() {
            return Err(CarnotError::DimensionMismatch {
                expected: descriptor.dimension(),
                actual: coords.len(),
            });
        }
        if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(CarnotError::Domain(format!("non-finite coordinate {bad}")));
        }
        Ok(Self { descriptor, coords })
    }

    /// Infers the step from the coordinate count.
    pub fn from_coords(coords: &[f64]) -> Result<Self> {
        let step = coords.len().checked_sub(1).unwrap_or(0);
        Self::new(GroupDescriptor::new(step)?, coords.to_vec())
    }

    pub fn identity(descriptor: GroupDescriptor) -> Self {
        Self {
            descriptor,
            coords: vec![0.0; descriptor.dimension()],
        }
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        self.descriptor
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn is_identity(&self) -> bool {
        self.coords.iter().all(|&c| c == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.coords.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn check_same(&self, other: &GroupPoint) -> Result<()> {
        if self.descriptor != other.descriptor {
            return Err(CarnotError::DimensionMismatch {
                expected: self.descriptor.dimension(),
                actual: other.descriptor.dimension(),
            });
        }
        Ok(())
    }
}

/// `x ∘ y`.
pub fn compose(x: &GroupPoint, y: &GroupPoint) -> Result<GroupPoint> {
    x.check_same(y)?;
    let mut out = vec![0.0; x.coords.len()];
    compose_into(&x.coords, &y.coords, &mut out);
    Ok(GroupPoint {
        descriptor: x.descriptor,
        coords: out,
    })
}

/// Inverse element, by forward substitution in the triangular law.
pub fn inverse(x: &GroupPoint) -> GroupPoint {
    let mut out = vec![0.0; x.coords.len()];
    inverse_into(&x.coords, &mut out);
    GroupPoint {
        descriptor: x.descriptor,
        coords: out,
    }
}

/// `δ_λ(x)`.
pub fn dilate(lambda: f64, x: &GroupPoint) -> Result<GroupPoint> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CarnotError::Domain(format!(
            "dilation factor must be positive, got {lambda}"
        )));
    }
    let mut out = x.coords.clone();
    dilate_in_place(lambda, &mut out);
    Ok(GroupPoint {
        descriptor: x.descriptor,
        coords: out,
    })
}

pub fn compose_into(x: &[f64], y: &[f64], out: &mut [f64]) {
    let d = x.len();
    debug_assert!(y.len() == d && out.len() == d);
    let x1 = x[0];
    // powers[m] = x1^m / m!
    let mut powers = [0.0; MAX_STEP + 1];
    powers[0] = 1.0;
    for m in 1..d {
        powers[m] = powers[m - 1] * x1 / m as f64;
    }
    out[0] = x1 + y[0];
    out[1] = x[1] + y[1];
    for k in 2..d {
        let mut acc = x[k] + y[k];
        for i in 1..k {
            acc += y[i] * powers[k - i];
        }
        out[k] = acc;
    }
}

pub fn inverse_into(x: &[f64], out: &mut [f64]) {
    let d = x.len();
    let x1 = x[0];
    let mut powers = [0.0; MAX_STEP + 1];
    powers[0] = 1.0;
    for m in 1..d {
        powers[m] = powers[m - 1] * x1 / m as f64;
    }
    out[0] = -x1;
    out[1] = -x[1];
    for k in 2..d {
        let mut acc = -x[k];
        for i in 1..k {
            acc -= out[i] * powers[k - i];
        }
        out[k] = acc;
    }
}

pub fn dilate_in_place(lambda: f64, x: &mut [f64]) {
    for (k, c) in x.iter_mut().enumerate() {
        *c *= lambda.powi(weight(k) as i32);
    }
}

/// Jacobian (row-major, `d × d`) of the left translation `x ↦ α ∘ x`.
pub fn left_translation_jacobian(alpha: &[f64], _x: &[f64]) -> Vec<f64> {
    let d = alpha.len();
    let mut j = vec![0.0; d * d];
    for k in 0..d {
        j[k * d + k] = 1.0;
        if k >= 2 {
            for i in 1..k {
                j[k * d + i] = scaled_power(alpha[0], k - i);
            }
        }
    }
    j
}

/// Jacobian (row-major) of the right translation `x ↦ x ∘ α`.
pub fn right_translation_jacobian(alpha: &[f64], x: &[f64]) -> Vec<f64> {
    let d = alpha.len();
    let mut j = vec![0.0; d * d];
    for k in 0..d {
        j[k * d + k] = 1.0;
        if k >= 2 {
            // ∂/∂x_1 of Σ_{i=1}^{k-1} α_i x_1^{k-i}/(k-i)!
            let mut dx1 = 0.0;
            for i in 1..k {
                dx1 += alpha[i] * scaled_power(x[0], k - i - 1);
            }
            j[k * d] += dx1;
        }
    }
    j
}
