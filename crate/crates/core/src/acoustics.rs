//! Deterministic parametric acoustic model.
//!
//! Phonemes and durations are expanded into a frame-level prosody plan
//! (F0, energy, inserted silences), then rendered into an 80-bin mel
//! spectrogram from fixed per-symbol spectral templates.

use std::ops::Range;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::duration::{predict_durations, DurationModel, DurationSequence};
use crate::error::{Error, Result};
use crate::phonology::{PhonemeClass, PhonemeFlags, Symbol, Utterance};

pub const N_MELS: usize = 80;
pub const FRAME_RATE_HZ: u32 = 80;
pub const SAMPLE_RATE: u32 = 24_000;
pub const WINDOW_MS: f64 = 50.0;
pub const MEL_FMAX_HZ: f64 = 12_000.0;

/// Loudness factor applied by mel-spectrogram emphasis.
pub const DEFAULT_V_MEL: f64 = 1.15;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Mel distance between adjacent band centers.
pub fn mel_band_spacing() -> f64 {
    hz_to_mel(MEL_FMAX_HZ) / (N_MELS + 1) as f64
}

/// Center frequency of mel band `b`.
pub fn band_center_hz(b: usize) -> f64 {
    mel_to_hz((b + 1) as f64 * mel_band_spacing())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    #[default]
    Neutral,
    Expressive,
}

/// Correlate-injection and intonation constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProsodyConfig {
    /// Provided/predicted word frame ratio that triggers injection.
    pub theta: f64,
    pub silence_frames: u32,
    pub peak_ratio: f64,
    pub low_ratio: f64,
    /// Vowel position (0..1) where the peak is reached.
    pub peak_position: f64,
    /// Vowel position (0..1) where the low target is reached.
    pub low_position: f64,
    pub f0_start_hz: f64,
    pub f0_end_hz: f64,
}

impl Default for ProsodyConfig {
    fn default() -> Self {
        ProsodyConfig {
            theta: 1.2,
            silence_frames: 3,
            peak_ratio: 1.20,
            low_ratio: 0.85,
            peak_position: 0.2,
            low_position: 0.6,
            f0_start_hz: 180.0,
            f0_end_hz: 140.0,
        }
    }
}

impl ProsodyConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.theta > 0.0
            && self.peak_ratio > 0.0
            && self.low_ratio > 0.0
            && 0.0 < self.peak_position
            && self.peak_position < self.low_position
            && self.low_position <= 1.0
            && self.f0_start_hz > 0.0
            && self.f0_end_hz > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("prosody config", format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanFrame {
    pub phoneme_index: usize,
    /// Zero on unvoiced frames.
    pub f0_hz: f64,
    pub energy_gain: f64,
    pub inserted_silence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelateEvent {
    pub word_index: usize,
    pub pre_stress_silence_frames: u32,
    pub pitch_peak_hz: f64,
    pub pitch_low_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsodyPlan {
    pub frames: Vec<PlanFrame>,
    pub profile: Profile,
    pub correlates: Vec<CorrelateEvent>,
}

impl ProsodyPlan {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn injected_silence_frames(&self) -> usize {
        self.frames.iter().filter(|f| f.inserted_silence).count()
    }

    /// Frames of `word`, inserted silences included.
    pub fn word_frames(&self, utt: &Utterance, word: usize) -> Result<Range<usize>> {
        let range = utt
            .words()
            .get(word)
            .ok_or(Error::WordIndex {
                index: word,
                n_words: utt.n_words(),
            })?
            .phoneme_range
            .clone();
        let start = self
            .frames
            .iter()
            .position(|f| range.contains(&f.phoneme_index));
        let end = self
            .frames
            .iter()
            .rposition(|f| range.contains(&f.phoneme_index));
        match (start, end) {
            (Some(s), Some(e)) => Ok(s..e + 1),
            _ => Err(Error::invalid("prosody plan", format!("word {word} has no frames"))),
        }
    }

    /// First non-silence frame of the phoneme.
    pub fn phoneme_onset(&self, phoneme: usize) -> Option<usize> {
        self.frames
            .iter()
            .position(|f| f.phoneme_index == phoneme && !f.inserted_silence)
    }
}

/// Expands durations into per-frame prosody, injecting emphasis correlates
/// (a silence before the stressed vowel and a rise-fall pitch accent on it).
///
/// Under the expressive profile a word is injected when its provided frames
/// reach `theta` times the model's own prediction. When `flags` are given
/// the flagged word is injected unconditionally.
pub fn plan_prosody(
    utt: &Utterance,
    durations: &DurationSequence,
    profile: Profile,
    flags: Option<&PhonemeFlags>,
    model: &DurationModel,
    config: &ProsodyConfig,
) -> Result<ProsodyPlan> {
    config.validate()?;
    let n = utt.n_phonemes();
    if durations.len() != n {
        return Err(Error::LengthMismatch {
            what: "durations",
            expected: n,
            actual: durations.len(),
        });
    }
    if let Some(f) = flags {
        if f.len() != n {
            return Err(Error::LengthMismatch {
                what: "emphasis flags",
                expected: n,
                actual: f.len(),
            });
        }
    }
    let predicted = predict_durations(model, utt);
    let inject: Vec<bool> = utt
        .words()
        .iter()
        .map(|word| {
            if word.stressed_vowel.is_none() {
                return false;
            }
            let flagged = flags
                .map(|f| word.phoneme_range.clone().any(|i| f.as_slice()[i]))
                .unwrap_or(false);
            let provided: u64 = durations.frames()[word.phoneme_range.clone()]
                .iter()
                .map(|&x| x as u64)
                .sum();
            let expected: u64 = predicted.frames()[word.phoneme_range.clone()]
                .iter()
                .map(|&x| x as u64)
                .sum();
            let lengthened = provided as f64 / expected as f64 >= config.theta - 1e-12;
            flagged || (profile == Profile::Expressive && lengthened)
        })
        .collect();

    let mut frames = Vec::with_capacity(durations.total() as usize);
    for (i, &d) in durations.frames().iter().enumerate() {
        let word = utt.word_of(i).expect("validated utterance covers every phoneme");
        let silence_here = inject[word] && utt.words()[word].stressed_vowel == Some(i);
        if silence_here {
            for _ in 0..config.silence_frames {
                frames.push(PlanFrame {
                    phoneme_index: i,
                    f0_hz: 0.0,
                    energy_gain: 0.0,
                    inserted_silence: true,
                });
            }
        }
        let phoneme = utt.phonemes()[i];
        for _ in 0..d {
            frames.push(PlanFrame {
                phoneme_index: i,
                f0_hz: if phoneme.voiced() { 1.0 } else { 0.0 },
                energy_gain: if phoneme.is_pause() { 0.0 } else { 1.0 },
                inserted_silence: false,
            });
        }
    }

    let total = frames.len();
    let baseline = |t: usize| -> f64 {
        if total <= 1 {
            config.f0_start_hz
        } else {
            config.f0_start_hz + (config.f0_end_hz - config.f0_start_hz) * t as f64 / (total - 1) as f64
        }
    };
    for (t, frame) in frames.iter_mut().enumerate() {
        if frame.f0_hz > 0.0 {
            frame.f0_hz = baseline(t);
        }
    }

    let mut correlates = Vec::new();
    for (w, word) in utt.words().iter().enumerate() {
        if !inject[w] {
            continue;
        }
        let vowel = word.stressed_vowel.expect("injection requires a stressed vowel");
        let onset = frames
            .iter()
            .position(|f| f.phoneme_index == vowel && !f.inserted_silence)
            .expect("vowel has at least one frame");
        let len = durations.frames()[vowel] as usize;
        let b0 = baseline(onset);
        let peak = config.peak_ratio * b0;
        let low = config.low_ratio * b0;
        for j in 0..len {
            let u = (j as f64 + 0.5) / len as f64;
            let f0 = if u <= config.peak_position {
                b0 + (peak - b0) * u / config.peak_position
            } else if u <= config.low_position {
                peak + (low - peak) * (u - config.peak_position)
                    / (config.low_position - config.peak_position)
            } else {
                low
            };
            frames[onset + j].f0_hz = f0;
        }
        correlates.push(CorrelateEvent {
            word_index: w,
            pre_stress_silence_frames: config.silence_frames,
            pitch_peak_hz: peak,
            pitch_low_hz: low,
        });
    }

    Ok(ProsodyPlan {
        frames,
        profile,
        correlates,
    })
}

/// Mel magnitudes (row-major, `n_frames x n_bins`) with an F0 track.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    n_bins: usize,
    magnitudes: Vec<f32>,
    f0: Vec<f32>,
    frame_rate: u32,
    sample_rate: u32,
}

impl MelSpectrogram {
    pub fn new(
        n_bins: usize,
        magnitudes: Vec<f32>,
        f0: Vec<f32>,
        frame_rate: u32,
        sample_rate: u32,
    ) -> Result<MelSpectrogram> {
        if n_bins == 0 || magnitudes.len() != f0.len() * n_bins {
            return Err(Error::invalid(
                "mel spectrogram",
                format!(
                    "{} magnitudes do not form {} frames of {n_bins} bins",
                    magnitudes.len(),
                    f0.len()
                ),
            ));
        }
        if !magnitudes.iter().all(|m| m.is_finite() && *m >= 0.0) {
            return Err(Error::invalid(
                "mel spectrogram",
                "magnitudes must be finite and nonnegative",
            ));
        }
        if !f0.iter().all(|f| f.is_finite() && *f >= 0.0) {
            return Err(Error::invalid(
                "mel spectrogram",
                "f0 values must be finite and nonnegative",
            ));
        }
        Ok(MelSpectrogram {
            n_bins,
            magnitudes,
            f0,
            frame_rate,
            sample_rate,
        })
    }

    pub fn n_frames(&self) -> usize {
        self.f0.len()
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn frame_rate(&self) -> u32 {
        self.frame_rate
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn magnitudes(&self) -> &[f32] {
        &self.magnitudes
    }

    pub fn f0_track(&self) -> &[f32] {
        &self.f0
    }

    pub fn row(&self, frame: usize) -> &[f32] {
        &self.magnitudes[frame * self.n_bins..(frame + 1) * self.n_bins]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.magnitudes.chunks_exact(self.n_bins)
    }
}

type Template = [f32; N_MELS];

const ZERO_TEMPLATE: Template = [0.0; N_MELS];

fn gauss(f: f64, center: f64, sigma: f64) -> f64 {
    let z = (f - center) / sigma;
    (-0.5 * z * z).exp()
}

/// Vowel-like envelope from three formants.
fn formants(f: f64, f1: f64, f2: f64, f3: f64) -> f64 {
    gauss(f, f1, 110.0) + 0.6 * gauss(f, f2, 160.0) + 0.35 * gauss(f, f3, 220.0)
        + 0.06 * (-f / 2500.0).exp()
}

fn voice_bar(f: f64) -> f64 {
    0.5 * gauss(f, 180.0, 90.0)
}

fn envelope(symbol: &str, f: f64) -> f64 {
    match symbol {
        "AA" => formants(f, 730.0, 1090.0, 2440.0),
        "AE" => formants(f, 660.0, 1720.0, 2410.0),
        "AH" => formants(f, 520.0, 1190.0, 2390.0),
        "AO" => formants(f, 570.0, 840.0, 2410.0),
        "AW" => formants(f, 700.0, 1300.0, 2500.0),
        "AY" => formants(f, 660.0, 1500.0, 2500.0),
        "EH" => formants(f, 530.0, 1840.0, 2480.0),
        "ER" => formants(f, 490.0, 1350.0, 1690.0),
        "EY" => formants(f, 480.0, 2000.0, 2600.0),
        "IH" => formants(f, 390.0, 1990.0, 2550.0),
        "IY" => formants(f, 270.0, 2290.0, 3010.0),
        "OW" => formants(f, 500.0, 900.0, 2400.0),
        "OY" => formants(f, 550.0, 1100.0, 2450.0),
        "UH" => formants(f, 440.0, 1020.0, 2240.0),
        "UW" => formants(f, 300.0, 870.0, 2240.0),
        "L" => 0.6 * formants(f, 360.0, 1300.0, 2700.0),
        "R" => 0.6 * formants(f, 420.0, 1300.0, 1600.0),
        "W" => 0.7 * formants(f, 300.0, 700.0, 2200.0),
        "Y" => 0.7 * formants(f, 280.0, 2200.0, 2900.0),
        "M" => 0.5 * (gauss(f, 250.0, 80.0) + 0.15 * gauss(f, 1100.0, 200.0) + 0.1 * gauss(f, 2200.0, 250.0)),
        "N" => 0.5 * (gauss(f, 250.0, 80.0) + 0.15 * gauss(f, 1500.0, 200.0) + 0.1 * gauss(f, 2500.0, 250.0)),
        "NG" => 0.5 * (gauss(f, 250.0, 80.0) + 0.15 * gauss(f, 2000.0, 200.0) + 0.1 * gauss(f, 2600.0, 250.0)),
        "S" => 0.35 * gauss(f, 7000.0, 1500.0),
        "Z" => 0.3 * (gauss(f, 7000.0, 1500.0) + voice_bar(f)),
        "SH" => 0.35 * gauss(f, 3500.0, 900.0),
        "ZH" => 0.3 * (gauss(f, 3500.0, 900.0) + voice_bar(f)),
        "F" => 0.15 * gauss(f, 5000.0, 4000.0),
        "V" => 0.2 * (gauss(f, 5000.0, 4000.0) + voice_bar(f)),
        "TH" => 0.12 * gauss(f, 5500.0, 4000.0),
        "DH" => 0.2 * (gauss(f, 5500.0, 4000.0) + voice_bar(f)),
        "HH" => 0.15 * formants(f, 520.0, 1190.0, 2390.0),
        "P" => 0.12 * gauss(f, 800.0, 600.0),
        "B" => 0.12 * (gauss(f, 800.0, 600.0) + voice_bar(f)),
        "T" => 0.15 * gauss(f, 4500.0, 1500.0),
        "D" => 0.15 * (gauss(f, 4500.0, 1500.0) + voice_bar(f)),
        "K" => 0.15 * gauss(f, 2000.0, 600.0),
        "G" => 0.15 * (gauss(f, 2000.0, 600.0) + voice_bar(f)),
        "CH" => 0.3 * gauss(f, 3200.0, 900.0),
        "JH" => 0.3 * (gauss(f, 3200.0, 900.0) + voice_bar(f)),
        _ => 0.0,
    }
}

fn templates() -> &'static [Template] {
    static TABLE: OnceLock<Vec<Template>> = OnceLock::new();
    TABLE.get_or_init(|| {
        Symbol::all()
            .map(|s| {
                let mut t = ZERO_TEMPLATE;
                if s.class() != PhonemeClass::Pause {
                    for (b, slot) in t.iter_mut().enumerate() {
                        let f = band_center_hz(b);
                        // floor keeps every non-pause row audibly nonzero
                        *slot = (envelope(s.name(), f) + 1e-3) as f32;
                    }
                }
                t
            })
            .collect()
    })
}

/// Built-in 80-band magnitude template of a symbol.
pub fn spectral_template(symbol: Symbol) -> &'static [f32; N_MELS] {
    let index = Symbol::all().position(|s| s == symbol).expect("inventory symbol");
    &templates()[index]
}

/// Renders the plan into mel frames: template times energy gain, with the
/// first two frames of each phoneme cross-faded from the preceding segment.
pub fn render_mel(plan: &ProsodyPlan, utt: &Utterance) -> Result<MelSpectrogram> {
    let n = plan.frames.len();
    let mut magnitudes = Vec::with_capacity(n * N_MELS);
    let mut f0 = Vec::with_capacity(n);
    let mut previous: Option<&Template> = None;
    let mut current: Option<(usize, bool)> = None;
    let mut fade_from: Option<&Template> = None;
    let mut j = 0usize;
    for frame in &plan.frames {
        let phoneme = utt.phonemes().get(frame.phoneme_index).ok_or_else(|| {
            Error::invalid(
                "prosody plan",
                format!("phoneme index {} out of range", frame.phoneme_index),
            )
        })?;
        let segment = (frame.phoneme_index, frame.inserted_silence);
        let template: &Template = if frame.inserted_silence {
            &ZERO_TEMPLATE
        } else {
            spectral_template(phoneme.symbol)
        };
        if current != Some(segment) {
            fade_from = previous;
            previous = Some(template);
            current = Some(segment);
            j = 0;
        }
        let gain = frame.energy_gain as f32;
        match fade_from {
            Some(from) if j < 2 && !frame.inserted_silence => {
                let w = (j + 1) as f32 / 3.0;
                magnitudes.extend(
                    from.iter()
                        .zip(template)
                        .map(|(a, b)| ((1.0 - w) * a + w * b) * gain),
                );
            }
            _ => magnitudes.extend(template.iter().map(|m| m * gain)),
        }
        f0.push(frame.f0_hz as f32);
        j += 1;
    }
    MelSpectrogram::new(N_MELS, magnitudes, f0, FRAME_RATE_HZ, SAMPLE_RATE)
}

/// Multiplies the magnitudes of `frames` by `v_mel`; everything else is kept.
pub fn apply_mel_emph_gain(
    mel: &MelSpectrogram,
    frames: Range<usize>,
    v_mel: f64,
) -> Result<MelSpectrogram> {
    if frames.start > frames.end || frames.end > mel.n_frames() {
        return Err(Error::FrameRange {
            start: frames.start,
            end: frames.end,
            len: mel.n_frames(),
        });
    }
    if !(v_mel.is_finite() && v_mel > 0.0) {
        return Err(Error::OutOfRange {
            name: "v_mel",
            value: v_mel,
            min: 0.0,
            max: f64::INFINITY,
        });
    }
    let gain = v_mel as f32;
    let mut out = mel.clone();
    for m in &mut out.magnitudes[frames.start * mel.n_bins..frames.end * mel.n_bins] {
        *m *= gain;
    }
    Ok(out)
}

/// Half-open frame interval of a word under cumulative durations.
pub fn frames_for_word(
    utt: &Utterance,
    durations: &DurationSequence,
    word: usize,
) -> Result<Range<usize>> {
    let w = utt.words().get(word).ok_or(Error::WordIndex {
        index: word,
        n_words: utt.n_words(),
    })?;
    if durations.len() != utt.n_phonemes() {
        return Err(Error::LengthMismatch {
            what: "durations",
            expected: utt.n_phonemes(),
            actual: durations.len(),
        });
    }
    let sum = |r: Range<usize>| -> usize { durations.frames()[r].iter().map(|&f| f as usize).sum() };
    let start = sum(0..w.phoneme_range.start);
    Ok(start..start + sum(w.phoneme_range.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duration::{dilate, DurationModel};
    use crate::phonology::{parse_utterance, upsample_flags};

    fn fixture() -> Utterance {
        parse_utterance(
            r#"{"words":[
                {"orthography":"it","phonemes":[{"symbol":"IH"},{"symbol":"T"}]},
                {"orthography":"is","phonemes":[{"symbol":"IH"},{"symbol":"Z"}]},
                {"orthography":"not","phonemes":[{"symbol":"N"},{"symbol":"AA","stress":"primary"},{"symbol":"T"}]}
            ],"emphasis_word_index":2}"#,
        )
        .unwrap()
    }

    #[test]
    fn neutral_plan_has_no_correlates() {
        let utt = fixture();
        let model = DurationModel::default();
        let d = predict_durations(&model, &utt);
        let plan = plan_prosody(&utt, &d, Profile::Neutral, None, &model, &ProsodyConfig::default()).unwrap();
        assert!(plan.correlates.is_empty());
        assert_eq!(plan.n_frames() as u64, d.total());
        assert_eq!(plan.frames[0].f0_hz, 180.0);
        assert_eq!(plan.frames.last().unwrap().f0_hz, 0.0); // T is unvoiced
    }

    #[test]
    fn expressive_plan_injects_on_dilated_word() {
        let utt = fixture();
        let model = DurationModel::default();
        let d = predict_durations(&model, &utt);
        let dd = dilate(&d, &upsample_flags(&utt), 1.5).unwrap();
        let plan = plan_prosody(&utt, &dd, Profile::Expressive, None, &model, &ProsodyConfig::default()).unwrap();
        assert_eq!(plan.correlates.len(), 1);
        assert_eq!(plan.correlates[0].word_index, 2);
        assert_eq!(plan.correlates[0].pre_stress_silence_frames, 3);
        assert_eq!(plan.n_frames() as u64, dd.total() + 3);
        let silence: Vec<_> = plan.frames.iter().filter(|f| f.inserted_silence).collect();
        assert!(silence.iter().all(|f| f.phoneme_index == 5 && f.f0_hz == 0.0 && f.energy_gain == 0.0));
        // the silence sits right before the vowel onset
        let onset = plan.phoneme_onset(5).unwrap();
        assert!(plan.frames[onset - 3..onset].iter().all(|f| f.inserted_silence));
    }

    #[test]
    fn flag_sim_injects_without_lengthening() {
        let utt = fixture().with_emphasis(Some(0)).unwrap();
        let model = DurationModel::default();
        let d = predict_durations(&model, &utt);
        let flags = upsample_flags(&utt);
        let plan = plan_prosody(&utt, &d, Profile::Neutral, Some(&flags), &model, &ProsodyConfig::default()).unwrap();
        assert_eq!(plan.correlates.len(), 1);
        assert_eq!(plan.correlates[0].word_index, 0);
    }

    #[test]
    fn injection_threshold_boundary() {
        let utt = fixture();
        let model = DurationModel::default();
        let d = predict_durations(&model, &utt);
        // "not" predicts N=5, AA=8, T=5 -> 18 frames; 1.2 x 18 = 21.6
        assert_eq!(&d.frames()[4..], &[5, 8, 5]);
        let mut below = d.frames().to_vec();
        below[5] += 3; // 21 frames, ratio 1.1667
        let mut at = d.frames().to_vec();
        at[5] += 4; // 22 frames
        let cfg = ProsodyConfig::default();
        let run = |frames: Vec<u32>| {
            let d = DurationSequence::new(frames).unwrap();
            plan_prosody(&utt, &d, Profile::Expressive, None, &model, &cfg).unwrap().correlates.len()
        };
        assert_eq!(run(below), 0);
        assert_eq!(run(at), 1);
        let d = DurationSequence::new(vec![8, 5, 8, 6, 5, 10, 5]).unwrap();
        let table = [
            (crate::duration::DurationKey::of(&utt, 5), 5.0),
        ]
        .into_iter()
        .collect();
        let fallback = PhonemeClass::ALL.iter().map(|&c| (c, if c == PhonemeClass::Vowel { 8.0 } else { 5.0 })).collect();
        let custom = DurationModel::new(table, fallback).unwrap();
        // predicted "not" = 5 + 5 + 5 = 15; provided 5 + 10 + 5 = 20 (1.333) and 18 = 1.2
        let d18 = DurationSequence::new(vec![8, 5, 8, 6, 5, 8, 5]).unwrap();
        let d17 = DurationSequence::new(vec![8, 5, 8, 6, 5, 7, 5]).unwrap();
        let count = |d: &DurationSequence| {
            plan_prosody(&utt, d, Profile::Expressive, None, &custom, &cfg).unwrap().correlates.len()
        };
        assert_eq!(count(&d), 1);
        assert_eq!(count(&d18), 1);
        assert_eq!(count(&d17), 0);
    }

    #[test]
    fn render_shapes_and_silence() {
        let utt = fixture();
        let model = DurationModel::default();
        let dd = dilate(&predict_durations(&model, &utt), &upsample_flags(&utt), 1.5).unwrap();
        let plan = plan_prosody(&utt, &dd, Profile::Expressive, None, &model, &ProsodyConfig::default()).unwrap();
        let mel = render_mel(&plan, &utt).unwrap();
        assert_eq!(mel.n_frames(), plan.n_frames());
        assert_eq!(mel.n_bins(), N_MELS);
        for (row, frame) in mel.rows().zip(&plan.frames) {
            if frame.inserted_silence {
                assert!(row.iter().all(|&m| m == 0.0));
            } else {
                assert!(row.iter().any(|&m| m > 0.0));
            }
        }
        assert_eq!(render_mel(&plan, &utt).unwrap(), mel);
    }

    #[test]
    fn render_five_frames() {
        let utt = parse_utterance(r#"{"words":[{"orthography":"a","phonemes":[{"symbol":"AH"}]}]}"#).unwrap();
        let plan = ProsodyPlan {
            frames: vec![
                PlanFrame {
                    phoneme_index: 0,
                    f0_hz: 150.0,
                    energy_gain: 1.0,
                    inserted_silence: false,
                };
                5
            ],
            profile: Profile::Neutral,
            correlates: vec![],
        };
        let mel = render_mel(&plan, &utt).unwrap();
        assert_eq!((mel.n_frames(), mel.n_bins()), (5, 80));
        assert_eq!(mel.f0_track(), &[150.0; 5]);
    }

    #[test]
    fn gain_multiplies_only_the_range() {
        let mel = MelSpectrogram::new(2, vec![1.0, 2.0, 3.0, 4.0], vec![100.0, 0.0], 80, 24000).unwrap();
        let out = apply_mel_emph_gain(&mel, 0..1, 1.15).unwrap();
        assert_eq!(out.row(0), &[1.15f32, 2.0 * 1.15f32]);
        assert_eq!(out.row(1), mel.row(1));
        assert_eq!(out.f0_track(), mel.f0_track());
        assert_eq!(apply_mel_emph_gain(&mel, 0..2, 1.0).unwrap(), mel);
        assert!(apply_mel_emph_gain(&mel, 1..3, 1.15).is_err());
        assert!(apply_mel_emph_gain(&mel, 0..1, 0.0).is_err());
    }

    #[test]
    fn gain_commutes_on_disjoint_ranges() {
        let utt = fixture();
        let model = DurationModel::default();
        let d = predict_durations(&model, &utt);
        let plan = plan_prosody(&utt, &d, Profile::Neutral, None, &model, &ProsodyConfig::default()).unwrap();
        let mel = render_mel(&plan, &utt).unwrap();
        let a = apply_mel_emph_gain(&apply_mel_emph_gain(&mel, 0..5, 1.15).unwrap(), 10..20, 1.3).unwrap();
        let b = apply_mel_emph_gain(&apply_mel_emph_gain(&mel, 10..20, 1.3).unwrap(), 0..5, 1.15).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn word_frame_bookkeeping() {
        let utt = parse_utterance(
            r#"{"words":[
                {"orthography":"ab","phonemes":[{"symbol":"AH"},{"symbol":"B"}]},
                {"orthography":"o","phonemes":[{"symbol":"OW"}]}
            ]}"#,
        )
        .unwrap();
        let d = DurationSequence::new(vec![2, 3, 4]).unwrap();
        assert_eq!(frames_for_word(&utt, &d, 1).unwrap(), 5..9);
        assert_eq!(frames_for_word(&utt, &d, 0).unwrap(), 0..5);
        assert!(frames_for_word(&utt, &d, 2).is_err());
    }
}
