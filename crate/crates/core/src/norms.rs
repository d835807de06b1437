//! Homogeneous norms on the Engel and filiform groups.
//!
//! Engel (`n = 3`):
//!
//! ```text
//! ‖x‖ = (x_1² + x_2² + |x_3|)^{1/2},   N(x) = (‖x‖³ + |x_4|)^{1/3},   |||x||| = |x_2|
//! ```
//!
//! Filiform (`n ≥ 3`), with `S_j = |x_1|^{(n+1)/2} + |x_2|^{(n+1)/2} + |x_j|^{(n+1)/(2(j-1))}`:
//!
//! ```text
//! ‖x‖ⁿ = Σ_{j=2}^{n} S_j^{2n/(n+1)},   Ñ(x) = (‖x‖ⁿ + |x_{n+1}|)^{1/n},   |||x||| = |x_1|
//! ```
//!
//! The `j = 2` term counts `|x_2|` twice; that is intended and kept.
//!
//! Each norm is `M^{1/n}` for a function `M` homogeneous of degree `n`, which
//! is what the derivative code differentiates.

use crate::error::{CarnotError, Result};
use crate::group::{GroupDescriptor, GroupPoint};

/// Relative distance to a coordinate hyperplane below which a point counts as
/// singular: `|x_j| < 1e-9 (1 + ‖x‖_∞)`.
pub const SINGULAR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `N` on the Engel group.
    Engel,
    /// `Ñ` on `G_{n+1}`.
    Filiform(GroupDescriptor),
}

impl NormKind {
    pub fn filiform(step: usize) -> Result<Self> {
        Ok(NormKind::Filiform(GroupDescriptor::new(step)?))
    }

    pub fn descriptor(&self) -> GroupDescriptor {
        match self {
            NormKind::Engel => GroupDescriptor::engel(),
            NormKind::Filiform(d) => *d,
        }
    }

    pub fn step(&self) -> usize {
        self.descriptor().step()
    }

    pub fn dimension(&self) -> usize {
        self.descriptor().dimension()
    }

    /// Index (0-based) of the coordinate read by `|||·|||`.
    pub fn aux_coordinate(&self) -> usize {
        match self {
            NormKind::Engel => 1,
            NormKind::Filiform(_) => 0,
        }
    }

    pub fn name(&self) -> String {
        match self {
            NormKind::Engel => "engel".into(),
            NormKind::Filiform(d) => format!("filiform-{}", d.step()),
        }
    }

    #[inline]
    pub fn norm(&self, x: &[f64]) -> f64 {
        match self {
            NormKind::Engel => engel_norm(x),
            NormKind::Filiform(_) => filiform_norm(x),
        }
    }

    /// `‖x‖` paired with this norm.
    #[inline]
    pub fn seminorm(&self, x: &[f64]) -> f64 {
        match self {
            NormKind::Engel => engel_seminorm(x),
            NormKind::Filiform(_) => filiform_seminorm(x),
        }
    }

    /// `|||x|||`.
    #[inline]
    pub fn aux(&self, x: &[f64]) -> f64 {
        x[self.aux_coordinate()].abs()
    }

    /// `M = Normⁿ`, the degree-`n` homogeneous function under the root.
    #[inline]
    pub fn power_sum(&self, x: &[f64]) -> f64 {
        match self {
            NormKind::Engel => engel_seminorm(x).powi(3) + x[3].abs(),
            NormKind::Filiform(_) => filiform_seminorm_power(x) + x[x.len() - 1].abs(),
        }
    }

    /// Checked evaluation on a group point.
    pub fn evaluate(&self, x: &GroupPoint) -> Result<NormValue> {
        if x.descriptor() != self.descriptor() {
            return Err(CarnotError::DimensionMismatch {
                expected: self.dimension(),
                actual: x.coords().len(),
            });
        }
        let c = x.coords();
        Ok(NormValue {
            norm: self.norm(c),
            seminorm: self.seminorm(c),
            aux: self.aux(c),
            region: smooth_region(*self, c),
        })
    }

    /// Norm and Euclidean gradient at a smooth point.
    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let n = self.step();
        let mut g = vec![0.0; x.len()];
        match self {
            NormKind::Engel => engel_power_sum_jet(x, &mut g, None),
            NormKind::Filiform(_) => filiform_power_sum_jet(x, &mut g, None),
        }
        let norm = self.power_sum(x).powf(1.0 / n as f64);
        let first = 1.0 / (n as f64 * norm.powi(n as i32 - 1));
        g.iter_mut().for_each(|v| *v *= first);
        (norm, g)
    }

    /// Euclidean gradient and Hessian of the norm at a smooth point.
    pub fn jet(&self, x: &[f64]) -> NormJet {
        let n = self.step();
        let d = x.len();
        let mut g = vec![0.0; d];
        let mut h = vec![0.0; d * d];
        match self {
            NormKind::Engel => engel_power_sum_jet(x, &mut g, Some(&mut h)),
            NormKind::Filiform(_) => filiform_power_sum_jet(x, &mut g, Some(&mut h)),
        }
        let m = self.power_sum(x);
        let norm = m.powf(1.0 / n as f64);
        let nf = n as f64;
        let first = 1.0 / (nf * norm.powi(n as i32 - 1));
        let second = (nf - 1.0) / (nf * nf * norm.powi(2 * n as i32 - 1));
        for r in 0..d {
            for c in 0..d {
                h[r * d + c] = h[r * d + c] * first - second * g[r] * g[c];
            }
        }
        g.iter_mut().for_each(|v| *v *= first);
        NormJet {
            value: norm,
            gradient: g,
            hessian: h,
        }
    }
}

/// Norm together with its companions and region flag.
#[derive(Debug, Clone, PartialEq)]
pub struct NormValue {
    pub norm: f64,
    pub seminorm: f64,
    pub aux: f64,
    pub region: SmoothRegionFlag,
}

/// Value, Euclidean gradient and row-major Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct NormJet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmoothRegionFlag {
    pub is_smooth: bool,
    /// 1-based indices of coordinates sitting on a singular hyperplane.
    pub violated: Vec<usize>,
    /// Sign of every coordinate (0 on a hyperplane); identifies the component.
    pub signs: Vec<i8>,
}

#[inline]
pub fn engel_seminorm(x: &[f64]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2].abs()).sqrt()
}

#[inline]
pub fn engel_norm(x: &[f64]) -> f64 {
    (engel_seminorm(x).powi(3) + x[3].abs()).cbrt()
}

/// `‖x‖ⁿ` of the filiform norm; the step is read from the slice length.
#[inline]
pub fn filiform_seminorm_power(x: &[f64]) -> f64 {
    let n = x.len() - 1;
    let a = (n + 1) as f64 / 2.0;
    let gamma = 2.0 * n as f64 / (n + 1) as f64;
    let base = x[0].abs().powf(a) + x[1].abs().powf(a);
    (2..=n)
        .map(|j| (base + x[j - 1].abs().powf(a / (j - 1) as f64)).powf(gamma))
        .sum()
}

#[inline]
pub fn filiform_seminorm(x: &[f64]) -> f64 {
    filiform_seminorm_power(x).powf(1.0 / (x.len() - 1) as f64)
}

#[inline]
pub fn filiform_norm(x: &[f64]) -> f64 {
    let n = x.len() - 1;
    (filiform_seminorm_power(x) + x[n].abs()).powf(1.0 / n as f64)
}

pub fn aux_seminorm(kind: NormKind, x: &[f64]) -> f64 {
    kind.aux(x)
}

/// Which coordinates may vanish without leaving the smooth region.
fn singular_coordinates(kind: NormKind) -> Vec<usize> {
    match kind {
        NormKind::Engel => vec![2, 3],
        NormKind::Filiform(d) => (0..d.dimension()).collect(),
    }
}

pub fn smooth_region(kind: NormKind, x: &[f64]) -> SmoothRegionFlag {
    let scale = 1.0 + x.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let violated: Vec<usize> = singular_coordinates(kind)
        .into_iter()
        .filter(|&k| x[k].abs() < SINGULAR_TOLERANCE * scale)
        .map(|k| k + 1)
        .collect();
    SmoothRegionFlag {
        is_smooth: violated.is_empty(),
        violated,
        signs: x
            .iter()
            .map(|&c| if c > 0.0 { 1 } else if c < 0.0 { -1 } else { 0 })
            .collect(),
    }
}

#[inline]
pub fn is_smooth(kind: NormKind, x: &[f64]) -> bool {
    let scale = 1.0 + x.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    match kind {
        NormKind::Engel => x[2..4].iter().all(|c| c.abs() >= SINGULAR_TOLERANCE * scale),
        NormKind::Filiform(_) => x.iter().all(|c| c.abs() >= SINGULAR_TOLERANCE * scale),
    }
}

#[inline]
fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient and Hessian of `M = P^{3/2} + |x_4|`, `P = x_1² + x_2² + |x_3|`.
fn engel_power_sum_jet(x: &[f64], g: &mut [f64], h: Option<&mut [f64]>) {
    let p = x[0] * x[0] + x[1] * x[1] + x[2].abs();
    let s = p.sqrt();
    let dp = [2.0 * x[0], 2.0 * x[1], sgn(x[2]), 0.0];
    for i in 0..4 {
        g[i] = 1.5 * s * dp[i];
    }
    g[3] = sgn(x[3]);
    let Some(h) = h else { return };
    for r in 0..4 {
        for c in 0..4 {
            h[r * 4 + c] = 0.75 / s * dp[r] * dp[c];
        }
    }
    h[0] += 3.0 * s;
    h[5] += 3.0 * s;
}

/// Gradient and Hessian of `M = Σ_j S_j^γ + |x_{n+1}|`.
fn filiform_power_sum_jet(x: &[f64], g: &mut [f64], mut h: Option<&mut [f64]>) {
    let d = x.len();
    let n = d - 1;
    let a = (n + 1) as f64 / 2.0;
    let gamma = 2.0 * n as f64 / (n + 1) as f64;
    for j in 2..=n {
        let terms = [(0usize, a), (1usize, a), (j - 1, a / (j - 1) as f64)];
        // S, ∂S and the diagonal ∂²S, accumulated per coordinate
        let mut s = 0.0;
        let mut ds = [0.0; 3];
        let mut dds = [0.0; 3];
        let mut idx = [0usize; 3];
        let mut used = 0;
        for &(k, e) in &terms {
            let u = x[k].abs();
            s += u.powf(e);
            let slot = match idx[..used].iter().position(|&i| i == k) {
                Some(p) => p,
                None => {
                    idx[used] = k;
                    used += 1;
                    used - 1
                }
            };
            ds[slot] += e * u.powf(e - 1.0) * sgn(x[k]);
            dds[slot] += e * (e - 1.0) * u.powf(e - 2.0);
        }
        let t1 = gamma * s.powf(gamma - 1.0);
        for p in 0..used {
            g[idx[p]] += t1 * ds[p];
        }
        if let Some(h) = h.as_deref_mut() {
            let t2 = gamma * (gamma - 1.0) * s.powf(gamma - 2.0);
            for p in 0..used {
                h[idx[p] * d + idx[p]] += t1 * dds[p];
                for q in 0..used {
                    h[idx[p] * d + idx[q]] += t2 * ds[p] * ds[q];
                }
            }
        }
    }
    g[n] += sgn(x[n]);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::dilate_in_place;

    #[test]
    fn engel_values() {
        assert_eq!(engel_seminorm(&[0.0, 0.0, 0.0, 5.0]), 0.0);
        assert!((engel_seminorm(&[1.0; 4]) - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(engel_norm(&[0.0; 4]), 0.0);
        let expected = (3f64.powf(1.5) + 1.0).cbrt();
        assert!((engel_norm(&[1.0; 4]) - expected).abs() < 1e-15);
        assert!((expected - 1.8367).abs() < 1e-4);
    }

    #[test]
    fn filiform_values() {
        assert_eq!(filiform_norm(&[0.0; 5]), 0.0);
        let v = filiform_norm(&[1.0; 4]);
        assert!((v - (2.0 * 3f64.powf(1.5) + 1.0).cbrt()).abs() < 1e-14);
        assert!((v - 2.2501).abs() < 1e-4);
        assert!((filiform_norm(&[1.0, 0.0, 0.0, 0.0]) - 2f64.cbrt()).abs() < 1e-15);
    }

    #[test]
    fn aux_values() {
        assert_eq!(aux_seminorm(NormKind::Engel, &[3.0, -2.0, 1.0, 1.0]), 2.0);
        let k = NormKind::filiform(4).unwrap();
        assert_eq!(aux_seminorm(k, &[-2.0, 5.0, 0.0, 0.0, 0.0]), 2.0);
        assert_eq!(aux_seminorm(k, &[0.0; 5]), 0.0);
    }

    #[test]
    fn region_flags() {
        assert!(smooth_region(NormKind::Engel, &[1.0; 4]).is_smooth);
        let f = smooth_region(NormKind::Engel, &[1.0, 1.0, 0.0, 1.0]);
        assert!(!f.is_smooth);
        assert_eq!(f.violated, vec![3]);
        let k = NormKind::filiform(4).unwrap();
        assert!(smooth_region(k, &[1.0, -2.0, 0.5, 3.0, -1.0]).is_smooth);
        assert_eq!(smooth_region(k, &[0.0, -2.0, 0.5, 3.0, -1.0]).violated, vec![1]);
        assert!(is_smooth(k, &[1.0, -2.0, 0.5, 3.0, -1.0]));
    }

    #[test]
    fn homogeneity() {
        let x = [0.3, -1.1, 2.2, -0.7, 1.9];
        let k = NormKind::filiform(4).unwrap();
        let mut y = x;
        dilate_in_place(2.5, &mut y);
        assert!((k.norm(&y) - 2.5 * k.norm(&x)).abs() < 1e-12 * k.norm(&y));
    }

    fn fd_gradient(kind: NormKind, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (kind.norm(&p) - kind.norm(&m)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn jets_match_finite_differences() {
        let cases: Vec<(NormKind, Vec<f64>)> = vec![
            (NormKind::Engel, vec![0.7, -1.2, 0.9, -2.0]),
            (NormKind::filiform(3).unwrap(), vec![0.7, -1.2, 0.9, -2.0]),
            (NormKind::filiform(5).unwrap(), vec![0.7, -1.2, 0.9, -2.0, 1.3, 0.8]),
        ];
        for (kind, x) in cases {
            let jet = kind.jet(&x);
            assert_eq!(kind.value_and_gradient(&x).1, jet.gradient);
            let fd = fd_gradient(kind, &x);
            for (a, b) in jet.gradient.iter().zip(&fd) {
                assert!((a - b).abs() < 1e-7, "{kind:?} {a} {b}");
            }
            let d = x.len();
            let h = 1e-5;
            for c in 0..d {
                let mut p = x.clone();
                let mut m = x.clone();
                p[c] += h;
                m[c] -= h;
                let (gp, gm) = (kind.jet(&p).gradient, kind.jet(&m).gradient);
                for r in 0..d {
                    let fd = (gp[r] - gm[r]) / (2.0 * h);
                    assert!((jet.hessian[r * d + c] - fd).abs() < 1e-6, "{kind:?} ({r},{c})");
                }
            }
        }
    }
}
