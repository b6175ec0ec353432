//! Run configuration: defaults, an optional JSON file, then flags.

use std::path::Path;

use anyhow::Context;
use ddemph_core::acoustics::{Profile, ProsodyConfig, DEFAULT_V_MEL};
use ddemph_core::pipeline::{Mode, SynthesisConfig, DEFAULT_ALPHA_DD, DEFAULT_ALPHA_DD_NEUTRAL};
use ddemph_core::vocoder::{DEFAULT_ALPHA_MEL, DEFAULT_NOISE_SEED};
use serde::{Deserialize, Serialize};

/// Every field is optional; unset fields fall back to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<Mode>,
    pub profile: Option<Profile>,
    pub alpha_dd: Option<f64>,
    pub alpha_mel: Option<f64>,
    pub v_mel: Option<f64>,
    pub seed: Option<u64>,
    pub prosody: Option<ProsodyConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `over` win.
    pub fn overlay(self, over: RunConfig) -> RunConfig {
        RunConfig {
            mode: over.mode.or(self.mode),
            profile: over.profile.or(self.profile),
            alpha_dd: over.alpha_dd.or(self.alpha_dd),
            alpha_mel: over.alpha_mel.or(self.alpha_mel),
            v_mel: over.v_mel.or(self.v_mel),
            seed: over.seed.or(self.seed),
            prosody: over.prosody.or(self.prosody),
        }
    }

    /// Fills defaults. An unset `alpha_dd` under the neutral profile uses
    /// the reduced neutral preset.
    pub fn resolve(&self) -> SynthesisConfig {
        let profile = self.profile.unwrap_or(Profile::Expressive);
        let alpha_dd = self.alpha_dd.unwrap_or(match profile {
            Profile::Neutral => DEFAULT_ALPHA_DD_NEUTRAL,
            Profile::Expressive => DEFAULT_ALPHA_DD,
        });
        SynthesisConfig {
            mode: self.mode.unwrap_or(Mode::None),
            profile,
            alpha_dd,
            alpha_mel: self.alpha_mel.unwrap_or(DEFAULT_ALPHA_MEL),
            v_mel: self.v_mel.unwrap_or(DEFAULT_V_MEL),
            seed: self.seed.unwrap_or(DEFAULT_NOISE_SEED),
            prosody: self.prosody.clone().unwrap_or_default(),
        }
    }
}
