//! Run configuration: a JSON file merged under command-line flags.

use crate::error::CliError;
use carnot::measures::{MeasureSpec, Perturbation, ScaledNorm, SquaredFirstCoordinate};
use carnot::norms::NormKind;
use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GroupName {
    Engel,
    Filiform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationPreset {
    /// `W = c · Norm`.
    ScaledNorm,
    /// `W = c · x_1²`.
    X1Squared,
}

/// A bounded perturbation `W` with the constants of its growth certificate,
/// `|∇W|^q ≤ δ Norm^{p-n} |||x|||ⁿ + γ` and `W ≤ C̃ Norm`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub preset: PerturbationPreset,
    pub c: f64,
    pub delta: f64,
    pub gamma: f64,
    pub c_tilde: f64,
}

/// Every setting a command may read. Keys absent from both the file and the
/// flags take the documented defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub function: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationConfig>,
}

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_OUT: &str = "carnot-out";
pub const DEFAULT_FILIFORM_STEP: usize = 4;

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("invalid config {}: {e}", path.display())))
    }

    /// Fields set in `flags` win over fields set here.
    pub fn overlay(self, flags: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => { RunConfig { $($f: flags.$f.or(self.$f)),* } };
        }
        pick!(
            group, n, a, p, samples, seed, out, degree, radius, exponent, r, l, function, segments, restarts,
            points, target, calibration, perturbation
        )
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn out(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn samples_or(&self, default: usize) -> usize {
        self.samples.unwrap_or(default)
    }

    /// Engel unless `filiform` is asked for; `n` alone also selects filiform.
    pub fn kind(&self) -> Result<NormKind, CliError> {
        match (self.group, self.n) {
            (Some(GroupName::Engel), Some(n)) if n != 3 => {
                Err(CliError::Input(format!("the Engel group has step 3, got --n {n}")))
            }
            (Some(GroupName::Engel), _) | (None, None) => Ok(NormKind::Engel),
            (_, n) => NormKind::filiform(n.unwrap_or(DEFAULT_FILIFORM_STEP)).map_err(CliError::from),
        }
    }

    /// `a = 1` and `p = n` unless set.
    pub fn measure(&self) -> Result<MeasureSpec, CliError> {
        let kind = self.kind()?;
        let a = self.a.unwrap_or(1.0);
        let p = self.p.unwrap_or(kind.step() as f64);
        let spec = MeasureSpec::new(kind, a, p)?;
        Ok(match &self.perturbation {
            None => spec,
            Some(w) => {
                if !(w.c.is_finite() && w.delta >= 0.0 && w.gamma >= 0.0 && w.c_tilde >= 0.0) {
                    return Err(CliError::Input("perturbation constants must be finite and non-negative".into()));
                }
                let (name, potential): (&str, Arc<dyn carnot::calculus::ScalarField + Send + Sync>) = match w.preset {
                    PerturbationPreset::ScaledNorm => ("scaled_norm", Arc::new(ScaledNorm { kind, c: w.c })),
                    PerturbationPreset::X1Squared => ("x1_squared", Arc::new(SquaredFirstCoordinate { c: w.c })),
                };
                spec.with_perturbation(Perturbation {
                    name: name.into(),
                    potential,
                    delta: w.delta,
                    gamma: w.gamma,
                    c_tilde: w.c_tilde,
                })
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"group": "engel", "sample": 10}"#);
        assert!(err.is_err());
    }

    #[test]
    fn flags_override_the_file() {
        let file: RunConfig = serde_json::from_str(r#"{"group": "filiform", "n": 5, "seed": 1}"#).unwrap();
        let flags = RunConfig {
            seed: Some(9),
            ..RunConfig::default()
        };
        let merged = file.overlay(flags);
        assert_eq!(merged.seed(), 9);
        assert_eq!(merged.n, Some(5));
        assert_eq!(merged.kind().unwrap(), NormKind::filiform(5).unwrap());
    }

    #[test]
    fn engel_with_another_step_is_an_input_error() {
        let c = RunConfig {
            group: Some(GroupName::Engel),
            n: Some(4),
            ..RunConfig::default()
        };
        assert!(matches!(c.kind(), Err(CliError::Input(_))));
    }

    #[test]
    fn exponent_defaults_to_the_step() {
        let c = RunConfig {
            group: Some(GroupName::Filiform),
            ..RunConfig::default()
        };
        let spec = c.measure().unwrap();
        assert_eq!(spec.p, 4.0);
        assert_eq!(spec.a, 1.0);
    }
}
