//! Test functions with closed-form Euclidean gradients.
//!
//! Members are small expression trees: monomials, products with the bump
//! `exp(-(Norm/r)²)`, bounded profiles `r tanh(Norm/r)`, and compositions
//! with translations, dilations and one-coordinate reflections. Gradients of
//! compositions go through the chain rule with the group Jacobians.

use crate::group::{
    compose_into, dilate_in_place, left_translation_jacobian, right_translation_jacobian, weight,
};
use crate::norms::NormKind;

#[derive(Debug, Clone, PartialEq)]
pub enum TestFn {
    Constant(f64),
    /// `Π x_k^{e_k}`.
    Monomial(Vec<u32>),
    /// `f · exp(-(Norm/r)²)`.
    Bump { inner: Box<TestFn>, radius: f64 },
    /// `r tanh(Norm/r)`.
    NormProfile { radius: f64 },
    /// `f(h ∘ x)`.
    LeftShift { inner: Box<TestFn>, h: Vec<f64> },
    /// `f(x ∘ h)`.
    RightShift { inner: Box<TestFn>, h: Vec<f64> },
    /// `f(δ_λ x)`.
    Dilate { inner: Box<TestFn>, lambda: f64 },
    /// `f` with coordinate `k` negated.
    Reflect { inner: Box<TestFn>, coordinate: usize },
}

impl TestFn {
    pub fn monomial(exps: &[u32]) -> Self {
        TestFn::Monomial(exps.to_vec())
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TestFn::Constant(_))
    }

    pub fn value(&self, kind: NormKind, x: &[f64]) -> f64 {
        let mut g = vec![0.0; x.len()];
        self.value_and_gradient(kind, x, &mut g)
    }

    /// Value, with the Euclidean gradient written into `grad`.
    pub fn value_and_gradient(&self, kind: NormKind, x: &[f64], grad: &mut [f64]) -> f64 {
        let d = x.len();
        match self {
            TestFn::Constant(c) => {
                grad.iter_mut().for_each(|g| *g = 0.0);
                *c
            }
            TestFn::Monomial(e) => {
                let mut v = 1.0;
                for k in 0..d {
                    v *= x[k].powi(e[k] as i32);
                }
                for k in 0..d {
                    grad[k] = if e[k] == 0 {
                        0.0
                    } else {
                        let mut p = e[k] as f64 * x[k].powi(e[k] as i32 - 1);
                        for i in (0..d).filter(|&i| i != k) {
                            p *= x[i].powi(e[i] as i32);
                        }
                        p
                    };
                }
                v
            }
            TestFn::Bump { inner, radius } => {
                let f = inner.value_and_gradient(kind, x, grad);
                let (n, gn) = kind.value_and_gradient(x);
                let t = n / radius;
                let chi = (-t * t).exp();
                let dchi = -2.0 * t * chi / radius;
                for k in 0..d {
                    grad[k] = grad[k] * chi + f * dchi * gn[k];
                }
                f * chi
            }
            TestFn::NormProfile { radius } => {
                let (n, gn) = kind.value_and_gradient(x);
                let th = (n / radius).tanh();
                let dv = 1.0 - th * th;
                for k in 0..d {
                    grad[k] = dv * gn[k];
                }
                radius * th
            }
            TestFn::LeftShift { inner, h } => {
                let mut y = vec![0.0; d];
                compose_into(h, x, &mut y);
                let j = left_translation_jacobian(h, x);
                chain(inner, kind, &y, &j, grad)
            }
            TestFn::RightShift { inner, h } => {
                let mut y = vec![0.0; d];
                compose_into(x, h, &mut y);
                let j = right_translation_jacobian(h, x);
                chain(inner, kind, &y, &j, grad)
            }
            TestFn::Dilate { inner, lambda } => {
                let mut y = x.to_vec();
                dilate_in_place(*lambda, &mut y);
                let v = inner.value_and_gradient(kind, &y, grad);
                for (k, g) in grad.iter_mut().enumerate() {
                    *g *= lambda.powi(weight(k) as i32);
                }
                v
            }
            TestFn::Reflect { inner, coordinate } => {
                let mut y = x.to_vec();
                y[*coordinate] = -y[*coordinate];
                let v = inner.value_and_gradient(kind, &y, grad);
                grad[*coordinate] = -grad[*coordinate];
                v
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            TestFn::Constant(c) => format!("{c}"),
            TestFn::Monomial(e) => {
                let parts: Vec<String> = e
                    .iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0)
                    .map(|(k, &p)| if p == 1 { format!("x{}", k + 1) } else { format!("x{}^{p}", k + 1) })
                    .collect();
                parts.join("*")
            }
            TestFn::Bump { inner, radius } => format!("({})*bump(r={radius})", inner.describe()),
            TestFn::NormProfile { radius } => format!("tanh_norm(r={radius})"),
            TestFn::LeftShift { inner, h } => format!("({})@left{:?}", inner.describe(), h),
            TestFn::RightShift { inner, h } => format!("({})@right{:?}", inner.describe(), h),
            TestFn::Dilate { inner, lambda } => format!("({})@dilate({lambda})", inner.describe()),
            TestFn::Reflect { inner, coordinate } => {
                format!("({})@flip(x{})", inner.describe(), coordinate + 1)
            }
        }
    }
}

/// `∇(f ∘ T)(x) = J_T(x)ᵀ ∇f(T x)`.
fn chain(inner: &TestFn, kind: NormKind, y: &[f64], j: &[f64], grad: &mut [f64]) -> f64 {
    let d = y.len();
    let mut gy = vec![0.0; d];
    let v = inner.value_and_gradient(kind, y, &mut gy);
    for c in 0..d {
        grad[c] = (0..d).map(|r| j[r * d + c] * gy[r]).sum();
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub id: usize,
    pub name: String,
    pub f: TestFn,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionFamily {
    pub kind: NormKind,
    pub members: Vec<Member>,
    pub train: Vec<usize>,
    pub holdout: Vec<usize>,
    pub description: String,
}

impl TestFunctionFamily {
    pub fn training(&self) -> impl Iterator<Item = &Member> {
        self.train.iter().map(|&i| &self.members[i])
    }

    pub fn holdout_members(&self) -> impl Iterator<Item = &Member> {
        self.holdout.iter().map(|&i| &self.members[i])
    }
}

/// Exponent vectors with weighted degree in `1..=max_degree`, ordered by
/// degree then lexicographically.
pub fn weighted_monomials(dimension: usize, max_degree: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for deg in 1..=max_degree {
        let mut e = vec![0u32; dimension];
        collect(&mut e, 0, deg, &mut out);
    }
    out
}

fn collect(e: &mut Vec<u32>, k: usize, remaining: usize, out: &mut Vec<Vec<u32>>) {
    if k == e.len() {
        if remaining == 0 {
            out.push(e.clone());
        }
        return;
    }
    let w = weight(k);
    for p in (0..=remaining / w).rev() {
        e[k] = p as u32;
        collect(e, k + 1, remaining - p * w, out);
    }
    e[k] = 0;
}

/// 75 members; every third one (positions 2, 5, 8, …) is held out, so 50
/// train and 25 validate. The constant sits at position 0. Up to sign the
/// family is closed under `x_1 ↦ -x_1`.
pub fn default_family(kind: NormKind) -> TestFunctionFamily {
    let d = kind.dimension();
    let monos = weighted_monomials(d, 3);
    let mut fs: Vec<TestFn> = vec![TestFn::Constant(1.0)];
    fs.extend(monos.iter().map(|e| TestFn::Monomial(e.clone())));
    for radius in [1.0, 2.0, 3.0] {
        for e in &monos {
            fs.push(TestFn::Bump {
                inner: Box::new(TestFn::Monomial(e.clone())),
                radius,
            });
        }
    }
    for radius in [1.0, 2.0] {
        fs.push(TestFn::NormProfile { radius });
    }
    let unit = |k: usize, p: u32| {
        let mut e = vec![0u32; d];
        e[k] = p;
        e
    };
    let x1x2 = {
        let mut e = vec![0u32; d];
        e[0] = 1;
        e[1] = 1;
        e
    };
    for lambda in [0.5, 2.0] {
        for e in [unit(0, 2), unit(2, 1)] {
            fs.push(TestFn::Dilate {
                inner: Box::new(TestFn::Monomial(e)),
                lambda,
            });
        }
    }
    let shift = |vals: &[f64]| {
        let mut h = vec![0.0; d];
        h[..vals.len()].copy_from_slice(vals);
        h
    };
    for h in [shift(&[0.5, -0.5, 0.25]), shift(&[-0.3, 0.4, 0.0, 0.2])] {
        for e in [unit(0, 1), unit(1, 1), unit(2, 1), x1x2.clone()] {
            let shifted = TestFn::LeftShift {
                inner: Box::new(TestFn::Monomial(e)),
                h: h.clone(),
            };
            fs.push(TestFn::Reflect {
                inner: Box::new(shifted.clone()),
                coordinate: 0,
            });
            fs.push(shifted);
        }
    }
    let members: Vec<Member> = fs
        .into_iter()
        .enumerate()
        .map(|(id, f)| Member {
            id,
            name: f.describe(),
            f,
        })
        .collect();
    let (holdout, train): (Vec<usize>, Vec<usize>) = (0..members.len()).partition(|i| i % 3 == 2);
    TestFunctionFamily {
        kind,
        members,
        train,
        holdout,
        description: "monomials of weighted degree <= 3, bump products, tanh norm profiles, dilated and left-translated monomials with x1 reflections".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_enumeration() {
        let m = weighted_monomials(4, 3);
        assert_eq!(m.len(), 13);
        assert_eq!(m[0], vec![1, 0, 0, 0]);
        assert!(m.contains(&vec![0, 0, 0, 1]));
        assert_eq!(weighted_monomials(5, 3), weighted_monomials(5, 3));
    }

    #[test]
    fn default_family_shape() {
        for kind in [NormKind::Engel, NormKind::filiform(4).unwrap()] {
            let fam = default_family(kind);
            assert_eq!(fam.members.len(), 75);
            assert_eq!(fam.train.len(), 50);
            assert_eq!(fam.holdout.len(), 25);
            assert!(fam.members[fam.train[0]].f.is_constant());
            let names: Vec<&str> = fam.members.iter().map(|m| m.name.as_str()).collect();
            assert!(names.contains(&"x1") && names.contains(&"x2"));
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let kind = NormKind::filiform(4).unwrap();
        let fam = default_family(kind);
        let x = [0.7, -0.4, 1.3, -0.9, 0.6];
        for m in &fam.members {
            let mut g = vec![0.0; 5];
            m.f.value_and_gradient(kind, &x, &mut g);
            for k in 0..5 {
                let h = 1e-6;
                let (mut p, mut q) = (x, x);
                p[k] += h;
                q[k] -= h;
                let fd = (m.f.value(kind, &p) - m.f.value(kind, &q)) / (2.0 * h);
                assert!((fd - g[k]).abs() < 1e-6 * (1.0 + fd.abs()), "{} k={k}", m.name);
            }
        }
    }

    #[test]
    fn closed_under_first_reflection_up_to_sign() {
        let kind = NormKind::Engel;
        let fam = default_family(kind);
        let x = [0.7, -0.4, 1.3, -0.9];
        let y = [-0.7, -0.4, 1.3, -0.9];
        for m in &fam.members {
            let target = m.f.value(kind, &y);
            let found = fam.members.iter().any(|o| {
                let v = o.f.value(kind, &x);
                (v - target).abs() < 1e-12 || (v + target).abs() < 1e-12
            });
            assert!(found, "{}", m.name);
        }
    }
}
