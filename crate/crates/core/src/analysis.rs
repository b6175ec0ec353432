//! Acoustic measurement of rendered speech: F0 tracking, intensity, silence
//! detection, per-word reports and a machine emphasis detector.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vocoder::Waveform;

pub const INTENSITY_FLOOR_DB: f64 = -90.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PitchConfig {
    pub min_hz: f64,
    pub max_hz: f64,
    /// Minimum normalized autocorrelation peak for a voiced frame.
    pub voicing_threshold: f64,
    /// Frames quieter than this are unvoiced.
    pub energy_gate_db: f64,
    pub hop_s: f64,
    pub window_s: f64,
    /// A later lag peak must reach this fraction of the best peak to be
    /// skipped in favor of an earlier (higher-pitched) one.
    pub octave_ratio: f64,
}

impl Default for PitchConfig {
    fn default() -> Self {
        PitchConfig {
            min_hz: 70.0,
            max_hz: 400.0,
            voicing_threshold: 0.45,
            energy_gate_db: -50.0,
            hop_s: 0.010,
            window_s: 0.040,
            octave_ratio: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F0Frame {
    pub time_s: f64,
    pub f0_hz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct F0Track {
    pub hop_s: f64,
    pub window_s: f64,
    pub frames: Vec<F0Frame>,
}

impl F0Track {
    pub fn voiced(&self) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().filter_map(|f| f.f0_hz)
    }
}

fn rms_db(x: &[f64]) -> f64 {
    if x.is_empty() {
        return INTENSITY_FLOOR_DB;
    }
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    if ms <= 0.0 {
        INTENSITY_FLOOR_DB
    } else {
        (10.0 * ms.log10()).max(INTENSITY_FLOOR_DB)
    }
}

pub fn estimate_f0(wave: &Waveform) -> F0Track {
    estimate_f0_with(wave, &PitchConfig::default())
}

/// Normalized-autocorrelation pitch tracker with parabolic peak refinement.
pub fn estimate_f0_with(wave: &Waveform, config: &PitchConfig) -> F0Track {
    let sr = wave.sample_rate as f64;
    let hop = (config.hop_s * sr).round().max(1.0) as usize;
    let win = (config.window_s * sr).round().max(1.0) as usize;
    let lag_min = (sr / config.max_hz).floor() as usize;
    let lag_max = ((sr / config.min_hz).ceil() as usize).min(win.saturating_sub(2));
    let x: Vec<f64> = wave.samples.iter().map(|&s| s as f64).collect();

    let mut frames = Vec::new();
    let mut start = 0;
    while start + win <= x.len() {
        let frame = &x[start..start + win];
        let time_s = (start as f64 + win as f64 / 2.0) / sr;
        let f0_hz = if lag_min < 2 || lag_max <= lag_min || rms_db(frame) < config.energy_gate_db {
            None
        } else {
            frame_pitch(frame, lag_min, lag_max, sr, config)
        };
        frames.push(F0Frame { time_s, f0_hz });
        start += hop;
    }
    F0Track {
        hop_s: hop as f64 / sr,
        window_s: win as f64 / sr,
        frames,
    }
}

fn frame_pitch(frame: &[f64], lag_min: usize, lag_max: usize, sr: f64, config: &PitchConfig) -> Option<f64> {
    let n = frame.len();
    // prefix[i] = sum of squares of frame[..i]
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in frame {
        prefix.push(prefix.last().unwrap() + v * v);
    }
    let lo = lag_min - 1;
    let hi = lag_max + 1;
    let r: Vec<f64> = (lo..=hi)
        .map(|lag| {
            let len = n - lag;
            let dot: f64 = frame[..len].iter().zip(&frame[lag..]).map(|(a, b)| a * b).sum();
            let e0 = prefix[len];
            let e1 = prefix[n] - prefix[lag];
            let denom = (e0 * e1).sqrt();
            if denom > 0.0 {
                dot / denom
            } else {
                0.0
            }
        })
        .collect();
    let at = |lag: usize| r[lag - lo];

    let peaks: Vec<usize> = (lag_min..=lag_max)
        .filter(|&lag| at(lag) >= at(lag - 1) && at(lag) > at(lag + 1))
        .collect();
    let best = peaks.iter().map(|&l| at(l)).fold(f64::NEG_INFINITY, f64::max);
    if best.is_nan() || best < config.voicing_threshold {
        return None;
    }
    let lag = *peaks
        .iter()
        .find(|&&l| at(l) >= config.octave_ratio * best)
        .expect("best peak qualifies");

    let (a, b, c) = (at(lag - 1), at(lag), at(lag + 1));
    let curvature = a - 2.0 * b + c;
    let delta = if curvature.abs() > 1e-12 {
        (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let f0 = sr / (lag as f64 + delta);
    Some(f0.clamp(config.min_hz, config.max_hz))
}

/// Per-frame RMS level in dBFS. Frame `k` covers samples starting at
/// `k * time_step_s` for `window_s` (truncated at the end of the signal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityTrack {
    pub time_step_s: f64,
    pub window_s: f64,
    pub values_db: Vec<f64>,
}

impl IntensityTrack {
    pub fn frame_start_s(&self, k: usize) -> f64 {
        k as f64 * self.time_step_s
    }

    pub fn frame_center_s(&self, k: usize) -> f64 {
        self.frame_start_s(k) + self.window_s / 2.0
    }
}

pub const INTENSITY_STEP_S: f64 = 0.005;
pub const INTENSITY_WINDOW_S: f64 = 0.010;

pub fn intensity(wave: &Waveform) -> IntensityTrack {
    intensity_with(wave, INTENSITY_STEP_S, INTENSITY_WINDOW_S)
}

/// Rectangular-window RMS, `20 log10(rms)` floored at -90 dBFS.
pub fn intensity_with(wave: &Waveform, step_s: f64, window_s: f64) -> IntensityTrack {
    let sr = wave.sample_rate as f64;
    let step = (step_s * sr).round().max(1.0) as usize;
    let win = (window_s * sr).round().max(1.0) as usize;
    let x: Vec<f64> = wave.samples.iter().map(|&s| s as f64).collect();
    let values_db = (0..x.len())
        .step_by(step)
        .map(|start| rms_db(&x[start..(start + win).min(x.len())]))
        .collect();
    IntensityTrack {
        time_step_s: step as f64 / sr,
        window_s: win as f64 / sr,
        values_db,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start_s: f64,
    pub end_s: f64,
}

impl Segment {
    pub fn duration_ms(&self) -> f64 {
        (self.end_s - self.start_s) * 1000.0
    }
}

pub const SILENCE_THRESHOLD_DB: f64 = -50.0;
pub const SILENCE_MIN_MS: f64 = 25.0;

/// Maximal runs of frames below `threshold_db` lasting at least `min_ms`.
pub fn detect_silences(track: &IntensityTrack, threshold_db: f64, min_ms: f64) -> Vec<Segment> {
    let mut out = Vec::new();
    let mut run: Option<usize> = None;
    let n = track.values_db.len();
    for k in 0..=n {
        let quiet = k < n && track.values_db[k] < threshold_db;
        match (quiet, run) {
            (true, None) => run = Some(k),
            (false, Some(first)) => {
                let seg = Segment {
                    start_s: track.frame_start_s(first),
                    end_s: track.frame_start_s(k - 1) + track.window_s,
                };
                if seg.duration_ms() >= min_ms - 1e-9 {
                    out.push(seg);
                }
                run = None;
            }
            _ => {}
        }
    }
    out
}

/// Sample interval of one word, taken from synthesis metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAlignment {
    pub word_index: usize,
    pub orthography: String,
    pub start_sample: usize,
    pub end_sample: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stressed_vowel_sample: Option<usize>,
    pub content_word: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub sample_rate: u32,
    pub words: Vec<WordAlignment>,
}

impl Alignment {
    pub fn from_json(text: &str) -> Result<Alignment> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("alignment serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordAcousticReport {
    pub word_index: usize,
    pub orthography: String,
    pub content_word: bool,
    pub duration_ms: f64,
    pub f0_mean_hz: Option<f64>,
    pub f0_min_hz: Option<f64>,
    pub f0_max_hz: Option<f64>,
    pub f0_range_hz: Option<f64>,
    pub intensity_mean_db: f64,
    pub intensity_max_db: f64,
    pub pre_stress_silence_ms: f64,
}

/// Silences ending this close before a stressed-vowel onset count as
/// pre-stress silence. A silence may also overrun the onset by one
/// intensity window, since the frame straddling the onset is still quiet.
pub const PRE_STRESS_WINDOW_MS: f64 = 50.0;

pub fn word_report(wave: &Waveform, alignment: &Alignment) -> Result<Vec<WordAcousticReport>> {
    if alignment.sample_rate != wave.sample_rate {
        return Err(Error::invalid(
            "alignment",
            format!("sample rate {} differs from waveform {}", alignment.sample_rate, wave.sample_rate),
        ));
    }
    let mut previous_end = 0;
    for w in &alignment.words {
        if w.start_sample >= w.end_sample || w.end_sample > wave.len() || w.start_sample < previous_end {
            return Err(Error::invalid(
                "alignment",
                format!(
                    "word {} interval {}..{} is empty, overlapping or outside {} samples",
                    w.word_index,
                    w.start_sample,
                    w.end_sample,
                    wave.len()
                ),
            ));
        }
        if let Some(v) = w.stressed_vowel_sample {
            if !(w.start_sample..w.end_sample).contains(&v) {
                return Err(Error::invalid(
                    "alignment",
                    format!("stressed vowel of word {} lies outside the word", w.word_index),
                ));
            }
        }
        previous_end = w.end_sample;
    }

    let sr = wave.sample_rate as f64;
    let f0 = estimate_f0(wave);
    let level = intensity(wave);
    let silences = detect_silences(&level, SILENCE_THRESHOLD_DB, SILENCE_MIN_MS);

    let reports = alignment
        .words
        .iter()
        .map(|w| {
            let (t0, t1) = (w.start_sample as f64 / sr, w.end_sample as f64 / sr);
            let voiced: Vec<f64> = f0
                .frames
                .iter()
                .filter(|f| f.time_s >= t0 && f.time_s < t1)
                .filter_map(|f| f.f0_hz)
                .collect();
            let (f0_mean_hz, f0_min_hz, f0_max_hz) = if voiced.is_empty() {
                (None, None, None)
            } else {
                let mean = voiced.iter().sum::<f64>() / voiced.len() as f64;
                let min = voiced.iter().copied().fold(f64::INFINITY, f64::min);
                let max = voiced.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (Some(mean.clamp(min, max)), Some(min), Some(max))
            };
            let mut levels: Vec<f64> = (0..level.values_db.len())
                .filter(|&k| {
                    let c = level.frame_center_s(k);
                    c >= t0 && c < t1
                })
                .map(|k| level.values_db[k])
                .collect();
            if levels.is_empty() {
                let x: Vec<f64> = wave.samples[w.start_sample..w.end_sample].iter().map(|&s| s as f64).collect();
                levels.push(rms_db(&x));
            }
            let max_db = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let min_db = levels.iter().copied().fold(f64::INFINITY, f64::min);
            let energy = levels.iter().map(|db| 10f64.powf(db / 10.0)).sum::<f64>() / levels.len() as f64;
            let mean_db = (10.0 * energy.log10()).clamp(min_db, max_db);

            let pre_stress_silence_ms = w
                .stressed_vowel_sample
                .map(|onset| {
                    let onset_s = onset as f64 / sr;
                    silences
                        .iter()
                        .filter(|s| {
                            s.end_s <= onset_s + level.window_s + 1e-9
                                && s.end_s >= onset_s - PRE_STRESS_WINDOW_MS / 1000.0
                        })
                        .max_by(|a, b| a.end_s.total_cmp(&b.end_s))
                        .map(Segment::duration_ms)
                        .unwrap_or(0.0)
                })
                .unwrap_or(0.0);

            WordAcousticReport {
                word_index: w.word_index,
                orthography: w.orthography.clone(),
                content_word: w.content_word,
                duration_ms: (w.end_sample - w.start_sample) as f64 * 1000.0 / sr,
                f0_mean_hz,
                f0_min_hz,
                f0_max_hz,
                f0_range_hz: f0_max_hz.zip(f0_min_hz).map(|(hi, lo)| hi - lo),
                intensity_mean_db: mean_db,
                intensity_max_db: max_db,
                pre_stress_silence_ms,
            }
        })
        .collect();
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Identification {
    pub word_index: usize,
    /// False when every candidate scored zero (nothing differs from baseline).
    pub detected: bool,
    /// Per-word score; `None` for words that are not candidates.
    pub scores: Vec<Option<f64>>,
}

fn zscores(values: &[f64]) -> Vec<f64> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd < 1e-9 {
        vec![0.0; values.len()]
    } else {
        values.iter().map(|v| (v - mean) / sd).collect()
    }
}

/// Picks the word that departs most from an unemphasized rendering.
///
/// Each candidate (content words, or every word when none is marked) is
/// scored by the sum of z-scores, across candidates, of: duration ratio,
/// F0-range change, pre-stress silence change and peak intensity change.
/// Ties go to the lowest word index.
pub fn identify_emphasis(
    reports: &[WordAcousticReport],
    baseline: &[WordAcousticReport],
) -> Result<Identification> {
    if reports.len() != baseline.len() {
        return Err(Error::LengthMismatch {
            what: "baseline reports",
            expected: reports.len(),
            actual: baseline.len(),
        });
    }
    if reports.is_empty() {
        return Err(Error::Empty("word reports"));
    }
    let mut candidates: Vec<usize> = (0..reports.len()).filter(|&i| reports[i].content_word).collect();
    if candidates.is_empty() {
        candidates = (0..reports.len()).collect();
    }
    let feature = |f: &dyn Fn(&WordAcousticReport, &WordAcousticReport) -> f64| -> Vec<f64> {
        zscores(&candidates.iter().map(|&i| f(&reports[i], &baseline[i])).collect::<Vec<_>>())
    };
    let features = [
        feature(&|r, b| r.duration_ms / b.duration_ms),
        feature(&|r, b| r.f0_range_hz.unwrap_or(0.0) - b.f0_range_hz.unwrap_or(0.0)),
        feature(&|r, b| r.pre_stress_silence_ms - b.pre_stress_silence_ms),
        feature(&|r, b| r.intensity_max_db - b.intensity_max_db),
    ];
    let mut scores = vec![None; reports.len()];
    let mut best: Option<(usize, f64)> = None;
    for (c, &word) in candidates.iter().enumerate() {
        let score: f64 = features.iter().map(|f| f[c]).sum();
        scores[word] = Some(score);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((word, score));
        }
    }
    let detected = scores.iter().flatten().any(|s| s.abs() > 1e-9);
    Ok(Identification {
        word_index: best.expect("at least one candidate").0,
        detected,
        scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(freq: f64, amp: f64, seconds: f64) -> Waveform {
        let n = (seconds * 24000.0) as usize;
        Waveform::new(
            (0..n).map(|i| (amp * (2.0 * PI * freq * i as f64 / 24000.0).sin()) as f32).collect(),
            24000,
        )
    }

    #[test]
    fn pure_tone_pitch() {
        let track = estimate_f0(&sine(220.0, 0.5, 1.0));
        assert!(!track.frames.is_empty());
        assert!(track.frames.iter().all(|f| f.f0_hz.is_some()));
        for f0 in track.voiced() {
            assert!((f0 - 220.0).abs() / 220.0 < 0.02, "{f0}");
        }
    }

    #[test]
    fn silence_is_unvoiced() {
        let track = estimate_f0(&Waveform::new(vec![0.0; 24000], 24000));
        assert!(track.frames.iter().all(|f| f.f0_hz.is_none()));
    }

    #[test]
    fn empty_wave_gives_empty_track() {
        assert!(estimate_f0(&Waveform::new(vec![], 24000)).frames.is_empty());
    }

    #[test]
    fn sine_levels() {
        let unit = intensity(&sine(1000.0, 1.0, 0.5));
        assert!(unit.values_db[..90].iter().all(|v| (v + 3.0103).abs() < 0.1));
        let half = intensity(&sine(1000.0, 0.5, 0.5));
        assert!(half.values_db[..90].iter().all(|v| (v + 9.0309).abs() < 0.1));
        let zeros = intensity(&Waveform::new(vec![0.0; 2400], 24000));
        assert!(zeros.values_db.iter().all(|&v| v == INTENSITY_FLOOR_DB));
    }

    fn track(values: &[f64]) -> IntensityTrack {
        IntensityTrack {
            time_step_s: 0.01,
            window_s: 0.01,
            values_db: values.to_vec(),
        }
    }

    #[test]
    fn silence_runs() {
        let mut v = vec![-20.0; 10];
        v[3..8].fill(-90.0);
        let segs = detect_silences(&track(&v), -50.0, 25.0);
        assert_eq!(segs.len(), 1);
        assert!((segs[0].duration_ms() - 50.0).abs() < 1e-9);
        assert!((segs[0].start_s - 0.03).abs() < 1e-12);

        let mut one = vec![-20.0; 10];
        one[4] = -90.0;
        assert!(detect_silences(&track(&one), -50.0, 25.0).is_empty());

        let all = detect_silences(&track(&[-90.0; 7]), -50.0, 25.0);
        assert_eq!(all.len(), 1);
        assert!((all[0].duration_ms() - 70.0).abs() < 1e-9);
    }

    fn report(i: usize, duration_ms: f64) -> WordAcousticReport {
        WordAcousticReport {
            word_index: i,
            orthography: format!("w{i}"),
            content_word: true,
            duration_ms,
            f0_mean_hz: Some(150.0),
            f0_min_hz: Some(140.0),
            f0_max_hz: Some(160.0),
            f0_range_hz: Some(20.0),
            intensity_mean_db: -20.0,
            intensity_max_db: -15.0,
            pre_stress_silence_ms: 0.0,
        }
    }

    #[test]
    fn identical_reports_detect_nothing() {
        let base: Vec<_> = (0..4).map(|i| report(i, 200.0)).collect();
        let id = identify_emphasis(&base, &base).unwrap();
        assert_eq!(id.word_index, 0);
        assert!(!id.detected);
    }

    #[test]
    fn dominant_duration_wins() {
        let base: Vec<_> = (0..4).map(|i| report(i, 200.0)).collect();
        let mut emph = base.clone();
        emph[2].duration_ms = 300.0;
        let id = identify_emphasis(&emph, &base).unwrap();
        assert_eq!(id.word_index, 2);
        assert!(id.detected);
    }

    #[test]
    fn function_words_are_not_candidates() {
        let base: Vec<_> = (0..3).map(|i| report(i, 200.0)).collect();
        let mut emph = base.clone();
        emph[0].content_word = false;
        emph[0].duration_ms = 400.0;
        emph[2].duration_ms = 220.0;
        let id = identify_emphasis(&emph, &base).unwrap();
        assert_eq!(id.word_index, 2);
        assert_eq!(id.scores[0], None);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let base: Vec<_> = (0..3).map(|i| report(i, 200.0)).collect();
        assert!(identify_emphasis(&base[..2], &base).is_err());
    }

    #[test]
    fn single_tone_word_report() {
        let wave = sine(200.0, 0.3, 0.6);
        let alignment = Alignment {
            sample_rate: 24000,
            words: vec![WordAlignment {
                word_index: 0,
                orthography: "tone".into(),
                start_sample: 2400,
                end_sample: 12000,
                stressed_vowel_sample: Some(4800),
                content_word: true,
            }],
        };
        let r = &word_report(&wave, &alignment).unwrap()[0];
        assert!((r.f0_mean_hz.unwrap() - 200.0).abs() < 4.0);
        assert_eq!(r.pre_stress_silence_ms, 0.0);
        assert!((r.duration_ms - 400.0).abs() < 1e-9);
        assert!(r.f0_min_hz <= r.f0_mean_hz && r.f0_mean_hz <= r.f0_max_hz);
        assert!(r.intensity_mean_db <= r.intensity_max_db);
    }

    #[test]
    fn out_of_range_alignment_rejected() {
        let wave = sine(200.0, 0.3, 0.1);
        let alignment = Alignment {
            sample_rate: 24000,
            words: vec![WordAlignment {
                word_index: 0,
                orthography: "x".into(),
                start_sample: 0,
                end_sample: 5000,
                stressed_vowel_sample: None,
                content_word: true,
            }],
        };
        assert!(word_report(&wave, &alignment).is_err());
    }
}
