//! End-to-end rendering of an utterance under one emphasis mode.

use serde::{Deserialize, Serialize};

use crate::acoustics::{plan_prosody, render_mel, MelSpectrogram, Profile, ProsodyConfig, ProsodyPlan, DEFAULT_V_MEL};
use crate::analysis::{Alignment, WordAlignment};
use crate::duration::{dilate, predict_durations, validate_alpha, DurationModel, DurationSequence};
use crate::error::{Error, Result};
use crate::phonology::{upsample_flags, Utterance};
use crate::vocoder::{mel_emph_frames, FrameHops, Waveform, DEFAULT_ALPHA_MEL, DEFAULT_NOISE_SEED};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Unemphasized rendering.
    #[default]
    None,
    /// Duration dilation of the flagged word.
    Dd,
    /// Gain and hop stretching of the flagged word's mel frames.
    Mel,
    /// Rule-injected correlates on the flagged word, durations unchanged.
    Flag,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::None, Mode::Dd, Mode::Mel, Mode::Flag];

    pub fn name(self) -> &'static str {
        match self {
            Mode::None => "none",
            Mode::Dd => "dd",
            Mode::Mel => "mel",
            Mode::Flag => "flag",
        }
    }

    pub fn parse(s: &str) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.name() == s)
    }
}

pub const DEFAULT_ALPHA_DD: f64 = 1.5;
/// Neutral-profile default; the larger value is reserved for expressive use.
pub const DEFAULT_ALPHA_DD_NEUTRAL: f64 = 1.25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    pub mode: Mode,
    pub profile: Profile,
    pub alpha_dd: f64,
    pub alpha_mel: f64,
    pub v_mel: f64,
    pub seed: u64,
    pub prosody: ProsodyConfig,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            mode: Mode::None,
            profile: Profile::Expressive,
            alpha_dd: DEFAULT_ALPHA_DD,
            alpha_mel: DEFAULT_ALPHA_MEL,
            v_mel: DEFAULT_V_MEL,
            seed: DEFAULT_NOISE_SEED,
            prosody: ProsodyConfig::default(),
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        validate_alpha("alpha_dd", self.alpha_dd)?;
        validate_alpha("alpha_mel", self.alpha_mel)?;
        if !(self.v_mel.is_finite() && self.v_mel > 0.0) {
            return Err(Error::OutOfRange {
                name: "v_mel",
                value: self.v_mel,
                min: f64::MIN_POSITIVE,
                max: f64::MAX,
            });
        }
        self.prosody.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub mode: Mode,
    /// Durations before any emphasis was applied.
    pub base_durations: DurationSequence,
    /// Durations the mel spectrogram was rendered from.
    pub durations: DurationSequence,
    pub plan: ProsodyPlan,
    pub mel: MelSpectrogram,
    pub hops: FrameHops,
    pub waveform: Waveform,
    pub alignment: Alignment,
}

/// Renders `utt` under `config.mode`, emphasizing its target word.
///
/// `durations` overrides the model prediction (e.g. reference durations).
/// Modes other than `None` require an emphasis target.
pub fn synthesize(
    utt: &Utterance,
    model: &DurationModel,
    durations: Option<&DurationSequence>,
    config: &SynthesisConfig,
) -> Result<Synthesis> {
    config.validate()?;
    let base = match durations {
        Some(d) => DurationSequence::for_utterance(d.frames().to_vec(), utt)?,
        None => predict_durations(model, utt),
    };
    let target = utt.emphasis_target();
    if config.mode != Mode::None && target.is_none() {
        return Err(Error::invalid("synthesis", format!("mode {} needs an emphasis target", config.mode.name())));
    }
    let flags = upsample_flags(utt);

    let (used, plan) = match config.mode {
        Mode::None | Mode::Mel => {
            let plan = plan_prosody(utt, &base, config.profile, None, model, &config.prosody)?;
            (base.clone(), plan)
        }
        Mode::Dd => {
            let dilated = dilate(&base, &flags, config.alpha_dd)?;
            let plan = plan_prosody(utt, &dilated, config.profile, None, model, &config.prosody)?;
            (dilated, plan)
        }
        Mode::Flag => {
            let plan = plan_prosody(utt, &base, config.profile, Some(&flags), model, &config.prosody)?;
            (base.clone(), plan)
        }
    };
    let rendered = render_mel(&plan, utt)?;
    let frames = match (config.mode, target) {
        (Mode::Mel, Some(w)) => Some(plan.word_frames(utt, w)?),
        _ => None,
    };
    let (mel, hops, waveform) = mel_emph_frames(&rendered, frames, config.v_mel, config.alpha_mel, config.seed)?;
    let alignment = build_alignment(utt, &plan, &hops)?;
    Ok(Synthesis {
        mode: config.mode,
        base_durations: base,
        durations: used,
        plan,
        mel,
        hops,
        waveform,
        alignment,
    })
}

/// Word sample intervals implied by a plan and the hops it was vocoded with.
pub fn build_alignment(utt: &Utterance, plan: &ProsodyPlan, hops: &FrameHops) -> Result<Alignment> {
    if hops.len() != plan.n_frames() {
        return Err(Error::LengthMismatch {
            what: "hops",
            expected: plan.n_frames(),
            actual: hops.len(),
        });
    }
    let starts = hops.starts();
    let h = hops.as_slice();
    let words = utt
        .words()
        .iter()
        .enumerate()
        .map(|(w, word)| {
            let frames = plan.word_frames(utt, w)?;
            let last = frames.end - 1;
            Ok(WordAlignment {
                word_index: w,
                orthography: word.orthography.clone(),
                start_sample: starts[frames.start],
                end_sample: starts[last] + h[last] as usize,
                stressed_vowel_sample: word
                    .stressed_vowel
                    .and_then(|v| plan.phoneme_onset(v))
                    .map(|f| starts[f]),
                content_word: utt.is_content_word(w),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Alignment {
        sample_rate: crate::acoustics::SAMPLE_RATE,
        words,
    })
}
