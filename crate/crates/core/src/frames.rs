//! Canonical invariant frames on `G_{n+1}`.
//!
//! The left-invariant frame is
//!
//! ```text
//! X_1 = ∂_1,    X_j = Σ_{k=j}^{n+1} x_1^{k-j}/(k-j)! ∂_k    (j ≥ 2)
//! ```
//!
//! so `X_2 = ∂_2 + x_1 ∂_3 + … + x_1^{n-1}/(n-1)! ∂_{n+1}`, and the brackets are
//! `[X_1, X_j] = X_{j+1}` for `2 ≤ j ≤ n`, every other bracket vanishing.
//!
//! For the Engel group the right-invariant frame in common use is
//! `X_1 = ∂_1 - x_2 ∂_3 - x_3 ∂_4`, `X_j = ∂_j`. That frame is invariant under
//! right translations of the mirrored law `x ⋆ y = σ(σx ∘ σy)`, where
//! `σ(x) = (x_1, -x_2, x_3, -x_4)`; under `∘` itself the right-invariant
//! frame is `∂_1 + x_2 ∂_3 + x_3 ∂_4`. Both are provided. `σ` preserves the
//! Engel norm, so estimates along either frame coincide.

use crate::error::{CarnotError, Result};
use crate::group::{
    compose_into, left_translation_jacobian, right_translation_jacobian, scaled_power,
    GroupDescriptor, GroupPoint,
};
use nalgebra::DMatrix;

/// Which translations a field is invariant under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldLabel {
    LeftCanonical,
    RightCanonical,
}

/// Frame families implemented in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    /// Canonical left-invariant frame of `G_{n+1}`.
    Left(GroupDescriptor),
    /// Engel right-invariant frame `∂_1 - x_2∂_3 - x_3∂_4`, in the mirrored chart.
    RightEngel,
    /// Engel right-invariant frame `∂_1 + x_2∂_3 + x_3∂_4` of the law `∘`.
    RightEngelStandard,
}

impl FrameKind {
    pub fn descriptor(&self) -> GroupDescriptor {
        match self {
            FrameKind::Left(d) => *d,
            _ => GroupDescriptor::engel(),
        }
    }

    pub fn label(&self) -> FieldLabel {
        match self {
            FrameKind::Left(_) => FieldLabel::LeftCanonical,
            _ => FieldLabel::RightCanonical,
        }
    }

    /// Sign in front of the `x_2∂_3 + x_3∂_4` part of the Engel `X_1`.
    fn engel_sign(&self) -> f64 {
        match self {
            FrameKind::RightEngel => -1.0,
            _ => 1.0,
        }
    }

    /// Coefficient vector of field `index` (0-based) at `x`, written into `out`.
    #[inline]
    pub fn coefficients_into(&self, index: usize, x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|c| *c = 0.0);
        match self {
            FrameKind::Left(_) => {
                if index == 0 {
                    out[0] = 1.0;
                } else {
                    let mut p = 1.0;
                    out[index] = 1.0;
                    for k in index + 1..out.len() {
                        p *= x[0] / (k - index) as f64;
                        out[k] = p;
                    }
                }
            }
            FrameKind::RightEngel | FrameKind::RightEngelStandard => {
                out[index] = 1.0;
                if index == 0 {
                    let s = self.engel_sign();
                    out[2] = s * x[1];
                    out[3] = s * x[2];
                }
            }
        }
    }

    /// `J[k][i] = ∂_i a_k` (row-major) for field `index`.
    pub fn coefficient_jacobian(&self, index: usize, x: &[f64]) -> Vec<f64> {
        let d = x.len();
        let mut j = vec![0.0; d * d];
        match self {
            FrameKind::Left(_) => {
                if index > 0 {
                    for k in index + 1..d {
                        j[k * d] = scaled_power(x[0], k - index - 1);
                    }
                }
            }
            FrameKind::RightEngel | FrameKind::RightEngelStandard => {
                if index == 0 {
                    let s = self.engel_sign();
                    j[2 * d + 1] = s;
                    j[3 * d + 2] = s;
                }
            }
        }
        j
    }

    /// Whether `(X·∇)X = 0` for field `index`, i.e. its integral curves are
    /// the straight rays `x + tX(x)`.
    pub fn is_straight(&self, index: usize) -> bool {
        match self {
            FrameKind::Left(_) => true,
            _ => index != 0,
        }
    }
}

/// One field of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VectorField {
    pub kind: FrameKind,
    /// 1-based index `j` of `X_j`.
    pub index: usize,
}

impl VectorField {
    pub fn descriptor(&self) -> GroupDescriptor {
        self.kind.descriptor()
    }

    pub fn label(&self) -> FieldLabel {
        self.kind.label()
    }

    pub fn coefficients(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.kind.coefficients_into(self.index - 1, x, &mut out);
        out
    }

    pub fn coefficient_jacobian(&self, x: &[f64]) -> Vec<f64> {
        self.kind.coefficient_jacobian(self.index - 1, x)
    }

    /// `(Xg)(x)` for a scalar function, by the chain rule on a gradient.
    pub fn apply_to_gradient(&self, x: &[f64], grad: &[f64]) -> f64 {
        self.coefficients(x).iter().zip(grad).map(|(a, g)| a * g).sum()
    }
}

/// Ordered frame `{X_1, …, X_{n+1}}`; the first two fields generate.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub kind: FrameKind,
    pub fields: Vec<VectorField>,
    pub horizontal_count: usize,
}

impl Frame {
    fn build(kind: FrameKind) -> Self {
        let d = kind.descriptor().dimension();
        Frame {
            kind,
            fields: (1..=d).map(|index| VectorField { kind, index }).collect(),
            horizontal_count: 2,
        }
    }

    pub fn horizontal(&self) -> &[VectorField] {
        &self.fields[..self.horizontal_count]
    }

    pub fn field(&self, j: usize) -> &VectorField {
        &self.fields[j - 1]
    }

    pub fn dimension(&self) -> usize {
        self.fields.len()
    }
}

pub fn left_frame(descriptor: GroupDescriptor) -> Frame {
    Frame::build(FrameKind::Left(descriptor))
}

/// The Engel right-invariant frame `X_1 = ∂_1 - x_2∂_3 - x_3∂_4`, `X_j = ∂_j`.
pub fn right_frame_engel() -> Frame {
    Frame::build(FrameKind::RightEngel)
}

/// As [`right_frame_engel`] but for the given step; only `n = 3` exists.
pub fn right_frame(descriptor: GroupDescriptor) -> Result<Frame> {
    if descriptor.step() != 3 {
        return Err(CarnotError::Unsupported(format!(
            "right-invariant frame is only provided for the Engel group, not step {}",
            descriptor.step()
        )));
    }
    Ok(right_frame_engel())
}

/// Right-invariant Engel frame of the unmirrored law.
pub fn right_frame_engel_standard() -> Frame {
    Frame::build(FrameKind::RightEngelStandard)
}

/// `σ(x) = (x_1, -x_2, x_3, -x_4)`.
pub fn engel_mirror(x: &[f64]) -> Vec<f64> {
    vec![x[0], -x[1], x[2], -x[3]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianMode {
    Analytic,
    FiniteDifference,
}

/// The translation under which `field` should be invariant, applied to `x`.
pub fn invariant_translate(kind: FrameKind, alpha: &[f64], x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    match kind {
        FrameKind::Left(_) => compose_into(alpha, x, &mut out),
        FrameKind::RightEngelStandard => compose_into(x, alpha, &mut out),
        FrameKind::RightEngel => {
            let mut tmp = vec![0.0; 4];
            compose_into(&engel_mirror(x), &engel_mirror(alpha), &mut tmp);
            out = engel_mirror(&tmp);
        }
    }
    out
}

fn translation_jacobian(kind: FrameKind, alpha: &[f64], x: &[f64], mode: JacobianMode) -> Vec<f64> {
    let d = x.len();
    match mode {
        JacobianMode::Analytic => match kind {
            FrameKind::Left(_) => left_translation_jacobian(alpha, x),
            FrameKind::RightEngelStandard => right_translation_jacobian(alpha, x),
            FrameKind::RightEngel => {
                // Σ J(σα, σx) Σ with Σ = diag(1,-1,1,-1)
                let j = right_translation_jacobian(&engel_mirror(alpha), &engel_mirror(x));
                let s = [1.0, -1.0, 1.0, -1.0];
                let mut out = vec![0.0; 16];
                for r in 0..4 {
                    for c in 0..4 {
                        out[r * 4 + c] = s[r] * j[r * 4 + c] * s[c];
                    }
                }
                out
            }
        },
        JacobianMode::FiniteDifference => {
            let h = 1e-5;
            let mut j = vec![0.0; d * d];
            for c in 0..d {
                let eval = |t: f64| {
                    let mut y = x.to_vec();
                    y[c] += t;
                    invariant_translate(kind, alpha, &y)
                };
                let (p1, m1, p2, m2) = (eval(h), eval(-h), eval(2.0 * h), eval(-2.0 * h));
                for r in 0..d {
                    j[r * d + c] = (8.0 * (p1[r] - m1[r]) - (p2[r] - m2[r])) / (12.0 * h);
                }
            }
            j
        }
    }
}

/// `‖(XI)(τ_α x) - J_{τ_α}(x)·(XI)(x)‖_∞`, with `τ_α` the translation the
/// field's label refers to.
pub fn check_invariance(field: &VectorField, alpha: &GroupPoint, x: &GroupPoint) -> Result<f64> {
    check_invariance_with(field, alpha, x, JacobianMode::Analytic)
}

pub fn check_invariance_with(
    field: &VectorField,
    alpha: &GroupPoint,
    x: &GroupPoint,
    mode: JacobianMode,
) -> Result<f64> {
    let d = field.descriptor().dimension();
    for p in [alpha, x] {
        if p.coords().len() != d {
            return Err(CarnotError::DimensionMismatch {
                expected: d,
                actual: p.coords().len(),
            });
        }
    }
    let (a, xc) = (alpha.coords(), x.coords());
    let y = invariant_translate(field.kind, a, xc);
    let lhs = field.coefficients(&y);
    let ax = field.coefficients(xc);
    let j = translation_jacobian(field.kind, a, xc, mode);
    let mut res: f64 = 0.0;
    for r in 0..d {
        let jr: f64 = (0..d).map(|c| j[r * d + c] * ax[c]).sum();
        res = res.max((lhs[r] - jr).abs());
    }
    Ok(res)
}

/// Coefficients of `[X_i, X_j]` at `x` (1-based indices).
pub fn bracket_coefficients(frame: &Frame, i: usize, j: usize, x: &[f64], mode: JacobianMode) -> Vec<f64> {
    let d = x.len();
    let (fi, fj) = (frame.field(i), frame.field(j));
    let (ai, aj) = (fi.coefficients(x), fj.coefficients(x));
    match mode {
        JacobianMode::Analytic => {
            let (ji, jj) = (fi.coefficient_jacobian(x), fj.coefficient_jacobian(x));
            (0..d)
                .map(|k| {
                    (0..d)
                        .map(|c| ai[c] * jj[k * d + c] - aj[c] * ji[k * d + c])
                        .sum()
                })
                .collect()
        }
        JacobianMode::FiniteDifference => {
            // (X·∇)Y^k = d/dt Y^k(x + t X(x))
            let h = 1e-4;
            let directional = |dir: &[f64], f: &VectorField| -> Vec<f64> {
                let at = |t: f64| {
                    let y: Vec<f64> = x.iter().zip(dir).map(|(a, v)| a + t * v).collect();
                    f.coefficients(&y)
                };
                let (p1, m1, p2, m2) = (at(h), at(-h), at(2.0 * h), at(-2.0 * h));
                (0..d)
                    .map(|k| (8.0 * (p1[k] - m1[k]) - (p2[k] - m2[k])) / (12.0 * h))
                    .collect()
            };
            let a = directional(&ai, fj);
            let b = directional(&aj, fi);
            a.iter().zip(&b).map(|(p, q)| p - q).collect()
        }
    }
}

/// One entry of a commutator table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bracket {
    Zero,
    /// `[X_i, X_j] = X_k` (1-based).
    Field(usize),
    /// `[X_i, X_j] = -X_k`.
    NegField(usize),
    Unmatched,
}

#[derive(Debug, Clone)]
pub struct CommutatorTable {
    pub entries: Vec<Vec<Bracket>>,
    /// Largest deviation of a bracket from its assigned entry, over all points.
    pub max_residual: f64,
}

impl CommutatorTable {
    pub fn get(&self, i: usize, j: usize) -> Bracket {
        self.entries[i - 1][j - 1]
    }
}

/// Identifies each bracket `[X_i, X_j]` as zero or ±`X_k` from its values at
/// the given points.
pub fn commutator_table(frame: &Frame, points: &[Vec<f64>], mode: JacobianMode) -> CommutatorTable {
    let d = frame.dimension();
    let tol = match mode {
        JacobianMode::Analytic => 1e-12,
        JacobianMode::FiniteDifference => 1e-8,
    };
    let mut entries = vec![vec![Bracket::Unmatched; d]; d];
    let mut max_residual: f64 = 0.0;
    for i in 1..=d {
        for j in 1..=d {
            let vals: Vec<Vec<f64>> = points
                .iter()
                .map(|x| bracket_coefficients(frame, i, j, x, mode))
                .collect();
            let dev = |target: &dyn Fn(&[f64]) -> Vec<f64>| -> f64 {
                vals.iter()
                    .zip(points)
                    .map(|(v, x)| {
                        let t = target(x);
                        v.iter().zip(&t).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
                    })
                    .fold(0.0, f64::max)
            };
            let zero = dev(&|x: &[f64]| vec![0.0; x.len()]);
            if zero <= tol {
                entries[i - 1][j - 1] = Bracket::Zero;
                max_residual = max_residual.max(zero);
                continue;
            }
            let mut best = (f64::INFINITY, Bracket::Unmatched);
            for k in 1..=d {
                let f = frame.field(k);
                let plus = dev(&|x: &[f64]| f.coefficients(x));
                let minus = dev(&|x: &[f64]| f.coefficients(x).iter().map(|c| -c).collect());
                if plus < best.0 {
                    best = (plus, Bracket::Field(k));
                }
                if minus < best.0 {
                    best = (minus, Bracket::NegField(k));
                }
            }
            if best.0 <= tol {
                entries[i - 1][j - 1] = best.1;
                max_residual = max_residual.max(best.0);
            }
        }
    }
    CommutatorTable {
        entries,
        max_residual,
    }
}

/// The filiform relations `[X_1, X_j] = X_{j+1}` (2 ≤ j ≤ n), antisymmetry,
/// zero otherwise.
pub fn expected_filiform_table(dimension: usize) -> Vec<Vec<Bracket>> {
    let mut t = vec![vec![Bracket::Zero; dimension]; dimension];
    for j in 2..dimension {
        t[0][j - 1] = Bracket::Field(j + 1);
        t[j - 1][0] = Bracket::NegField(j + 1);
    }
    t
}

/// Rank at `x` of the fields reached from `{X_1, X_2}` by iterated brackets,
/// following the table.
pub fn generated_rank(frame: &Frame, table: &CommutatorTable, x: &[f64]) -> usize {
    let d = frame.dimension();
    let mut reached = vec![false; d];
    reached[0] = true;
    reached[1] = true;
    loop {
        let mut grew = false;
        for i in 1..=d {
            for j in 1..=d {
                if reached[i - 1] && reached[j - 1] {
                    if let Bracket::Field(k) | Bracket::NegField(k) = table.get(i, j) {
                        if !reached[k - 1] {
                            reached[k - 1] = true;
                            grew = true;
                        }
                    }
                }
            }
        }
        if !grew {
            break;
        }
    }
    let cols: Vec<Vec<f64>> = (1..=d)
        .filter(|k| reached[k - 1])
        .map(|k| frame.field(k).coefficients(x))
        .collect();
    let m = DMatrix::from_fn(d, cols.len(), |r, c| cols[c][r]);
    m.rank(1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn random_points(d: usize, count: usize, s: u64) -> Vec<Vec<f64>> {
        let mut r = seed::rng(s);
        (0..count)
            .map(|_| (0..d).map(|_| r.random_range(-3.0..3.0)).collect())
            .collect()
    }

    #[test]
    fn left_frame_coefficients() {
        let f = left_frame(GroupDescriptor::engel());
        assert_eq!(f.field(1).coefficients(&[4.0, 1.0, 2.0, 3.0]), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.field(2).coefficients(&[2.0, 0.0, 0.0, 0.0]), vec![0.0, 1.0, 2.0, 2.0]);
        assert_eq!(f.field(4).coefficients(&[2.0, 5.0, 0.0, 0.0]), vec![0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn right_engel_coefficients() {
        let f = right_frame_engel();
        assert_eq!(f.field(1).coefficients(&[0.0; 4]), vec![1.0, 0.0, 0.0, 0.0]);
        assert_eq!(f.field(1).coefficients(&[5.0, 2.0, 3.0, 7.0]), vec![1.0, 0.0, -2.0, -3.0]);
        assert_eq!(f.field(2).coefficients(&[5.0, 2.0, 3.0, 7.0]), vec![0.0, 1.0, 0.0, 0.0]);
        assert!(right_frame(GroupDescriptor::new(4).unwrap()).is_err());
    }

    #[test]
    fn bracket_x1_x2_on_x3_is_one() {
        let f = left_frame(GroupDescriptor::new(4).unwrap());
        for x in random_points(5, 20, 3) {
            let b = bracket_coefficients(&f, 1, 2, &x, JacobianMode::FiniteDifference);
            assert!((b[2] - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn tables_match_filiform_relations() {
        for n in 3..=6 {
            let d = GroupDescriptor::new(n).unwrap();
            let frame = left_frame(d);
            let pts = random_points(n + 1, 30, n as u64);
            for mode in [JacobianMode::Analytic, JacobianMode::FiniteDifference] {
                let t = commutator_table(&frame, &pts, mode);
                assert_eq!(t.entries, expected_filiform_table(n + 1), "n={n} {mode:?}");
            }
            let t = commutator_table(&frame, &pts, JacobianMode::Analytic);
            assert_eq!(generated_rank(&frame, &t, &vec![0.0; n + 1]), n + 1);
        }
        let pts = random_points(4, 30, 9);
        for frame in [right_frame_engel(), right_frame_engel_standard()] {
            let t = commutator_table(&frame, &pts, JacobianMode::Analytic);
            assert_eq!(t.get(2, 3), Bracket::Zero);
            assert!(matches!(t.get(1, 2), Bracket::Field(3) | Bracket::NegField(3)));
            assert_eq!(t.get(1, 4), Bracket::Zero);
        }
    }

    #[test]
    fn invariance_at_identity_is_exact() {
        let d = GroupDescriptor::new(5).unwrap();
        let e = GroupPoint::identity(d);
        let x = GroupPoint::new(d, vec![0.3, -2.0, 1.0, 0.5, 4.0, -1.0]).unwrap();
        for field in left_frame(d).fields {
            assert_eq!(check_invariance(&field, &e, &x).unwrap(), 0.0);
        }
    }

    #[test]
    fn mirrored_frame_fails_plain_right_translation() {
        // the displayed frame is not invariant for x ↦ x∘α; the standard one is
        let alpha = [0.5, 1.5, -0.7, 0.2];
        let x = [1.0, -0.4, 0.8, 2.0];
        let field = right_frame_engel().fields[0];
        let mut y = vec![0.0; 4];
        compose_into(&x, &alpha, &mut y);
        let j = right_translation_jacobian(&alpha, &x);
        let ax = field.coefficients(&x);
        let lhs = field.coefficients(&y);
        let res = (0..4)
            .map(|r| (lhs[r] - (0..4).map(|c| j[r * 4 + c] * ax[c]).sum::<f64>()).abs())
            .fold(0.0, f64::max);
        assert!(res > 0.1);
        let std = right_frame_engel_standard().fields[0];
        let a = GroupPoint::from_coords(&alpha).unwrap();
        let p = GroupPoint::from_coords(&x).unwrap();
        assert!(check_invariance(&std, &a, &p).unwrap() < 1e-12);
        assert!(check_invariance(&field, &a, &p).unwrap() < 1e-12);
    }

    #[test]
    fn analytic_and_fd_jacobians_agree() {
        let pts = random_points(4, 20, 11);
        for frame in [left_frame(GroupDescriptor::engel()), right_frame_engel()] {
            for w in pts.windows(2) {
                let a = GroupPoint::from_coords(&w[0]).unwrap();
                let x = GroupPoint::from_coords(&w[1]).unwrap();
                for f in &frame.fields {
                    let r = check_invariance_with(f, &a, &x, JacobianMode::FiniteDifference).unwrap();
                    assert!(r < 1e-8, "{r}");
                }
            }
        }
    }
}
