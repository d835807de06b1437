//! q-Poincaré scan: ratios `μ|f - μf|^q / μ|∇_G f|^q` over a family, the
//! candidate constant `c₀ = 1.1 · sup` over training members, and its check
//! on held-out members with independent samples.

use super::{member_values, train_and_holdout, HoldoutCheck, TestFunctionFamily, SE_SLACK};
use crate::error::{CarnotError, Result};
use crate::measures::{MeasureSpec, SampleBatch};
use crate::stats;
use rayon::prelude::*;
use serde::Serialize;

/// `c₀` candidate as a multiple of the training supremum.
pub const C0_FACTOR: f64 = 1.1;
/// Members whose gradient moment is within this many SE of 0 are excluded.
pub const EXCLUSION_SE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEntry {
    pub id: usize,
    pub name: String,
    pub ratio: f64,
    pub ratio_se: f64,
    /// `μ|f - μf|^q`.
    pub numerator: f64,
    /// `μ|∇_G f|^q`.
    pub denominator: f64,
    pub denominator_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoincareReport {
    pub q: f64,
    pub train: Vec<RatioEntry>,
    /// Training members excluded by the gradient guard.
    pub excluded: Vec<usize>,
    pub sup_ratio: f64,
    pub argsup: Option<usize>,
    pub c0: f64,
    pub holdout: Vec<HoldoutCheck>,
    pub holdout_pass: bool,
    pub in_proven_regime: bool,
    pub train_samples: usize,
    pub holdout_samples: usize,
}

impl PoincareReport {
    pub fn pass(&self) -> bool {
        self.sup_ratio.is_finite() && self.argsup.is_some() && self.holdout_pass
    }

    pub const CSV_HEADER: &'static str = "function_id,ratio,ratio_se";

    pub fn csv_rows(&self) -> Vec<String> {
        self.train
            .iter()
            .map(|r| format!("{},{},{}", r.id, r.ratio, r.ratio_se))
            .collect()
    }
}

/// `|f - mean(f)|^q` per point; invariant under adding constants to `f`.
pub(crate) fn centered_powers(values: &[f64], q: f64) -> Vec<f64> {
    let m = stats::mean(values);
    values.iter().map(|v| (v - m).abs().powf(q)).collect()
}

fn member_powers(spec: &MeasureSpec, family: &TestFunctionFamily, id: usize, batch: &SampleBatch) -> (Vec<f64>, Vec<f64>) {
    let q = spec.q();
    let (v, g) = member_values(spec, &family.members[id].f, batch);
    (centered_powers(&v, q), g.iter().map(|g| g.powf(q)).collect())
}

pub fn poincare_on_batches(
    spec: &MeasureSpec,
    family: &TestFunctionFamily,
    train: &SampleBatch,
    holdout: &SampleBatch,
) -> Result<PoincareReport> {
    if train.is_empty() || holdout.is_empty() {
        return Err(CarnotError::EmptyDomain("Poincaré scan needs non-empty batches".into()));
    }
    let scanned: Vec<(usize, Option<RatioEntry>)> = family
        .train
        .par_iter()
        .map(|&id| {
            let (num, den) = member_powers(spec, family, id, train);
            let (b, b_se) = stats::mean_and_se(&den, stats::DEFAULT_BATCHES);
            if b <= EXCLUSION_SE * b_se || b == 0.0 {
                return (id, None);
            }
            let (ratio, ratio_se) = stats::ratio_and_se(&num, &den, stats::DEFAULT_BATCHES);
            let entry = RatioEntry {
                id,
                name: family.members[id].name.clone(),
                ratio,
                ratio_se,
                numerator: stats::mean(&num),
                denominator: b,
                denominator_se: b_se,
            };
            (id, Some(entry))
        })
        .collect();
    let excluded: Vec<usize> = scanned.iter().filter(|(_, e)| e.is_none()).map(|(id, _)| *id).collect();
    let entries: Vec<RatioEntry> = scanned.into_iter().filter_map(|(_, e)| e).collect();
    if let Some(bad) = entries.iter().find(|e| !e.ratio.is_finite()) {
        return Err(CarnotError::Domain(format!("member {} has a non-finite ratio", bad.name)));
    }
    let (argsup, sup_ratio) = entries
        .iter()
        .fold((None, 0.0), |(arg, best), e| if e.ratio > best { (Some(e.id), e.ratio) } else { (arg, best) });
    let c0 = C0_FACTOR * sup_ratio;
    let holdout_checks: Vec<HoldoutCheck> = family
        .holdout
        .par_iter()
        .map(|&id| {
            let (num, den) = member_powers(spec, family, id, holdout);
            let g: Vec<f64> = num.iter().zip(&den).map(|(n, d)| n - c0 * d).collect();
            let (slack, slack_se) = stats::mean_and_se(&g, stats::DEFAULT_BATCHES);
            HoldoutCheck {
                id,
                name: family.members[id].name.clone(),
                slack,
                slack_se,
                pass: slack <= SE_SLACK * slack_se,
            }
        })
        .collect();
    Ok(PoincareReport {
        q: spec.q(),
        train: entries,
        excluded,
        sup_ratio,
        argsup,
        c0,
        holdout_pass: holdout_checks.iter().all(|h| h.pass),
        holdout: holdout_checks,
        in_proven_regime: spec.in_proven_regime(),
        train_samples: train.len(),
        holdout_samples: holdout.len(),
    })
}

/// Draws independent training and holdout batches and scans the family.
pub fn poincare_scan(spec: &MeasureSpec, family: &TestFunctionFamily, samples: usize, seed: u64) -> Result<PoincareReport> {
    let (train, holdout) = train_and_holdout(spec, samples, seed)?;
    poincare_on_batches(spec, family, &train, &holdout)
}
