//! Audit of a perturbation's growth certificate on a point cloud.

use super::MeasureSpec;
use crate::calculus::subgradient;
use crate::norms::is_smooth;

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateReport {
    pub points: usize,
    /// `max (|∇W|^q - δ Norm^{p-n} |||x|||ⁿ - γ_δ)` over smooth points.
    pub gradient_violation: f64,
    pub gradient_argmax: Vec<f64>,
    /// `max (W - C̃ Norm)`.
    pub growth_violation: f64,
    pub growth_argmax: Vec<f64>,
    pub holds: bool,
}

/// Both certificate inequalities checked pointwise; an unperturbed spec
/// passes trivially.
pub fn check_perturbation_certificate(spec: &MeasureSpec, points: &[Vec<f64>]) -> CertificateReport {
    let mut report = CertificateReport {
        points: 0,
        gradient_violation: f64::NEG_INFINITY,
        gradient_argmax: Vec::new(),
        growth_violation: f64::NEG_INFINITY,
        growth_argmax: Vec::new(),
        holds: true,
    };
    let Some(w) = &spec.perturbation else {
        report.points = points.len();
        report.gradient_violation = 0.0;
        report.growth_violation = 0.0;
        return report;
    };
    let frame = spec.frame();
    let q = spec.q();
    for x in points {
        if !is_smooth(spec.kind, x) {
            continue;
        }
        report.points += 1;
        if let Ok(g) = subgradient(w.potential.as_ref(), &frame, x) {
            let v = g.norm().powf(q) - w.delta * spec.ubound_weight(x) - w.gamma;
            if v > report.gradient_violation {
                report.gradient_violation = v;
                report.gradient_argmax = x.clone();
            }
        }
        let v = w.potential.value(x) - w.c_tilde * spec.kind.norm(x);
        if v > report.growth_violation {
            report.growth_violation = v;
            report.growth_argmax = x.clone();
        }
    }
    report.holds = report.gradient_violation <= 0.0 && report.growth_violation <= 0.0;
    report
}
