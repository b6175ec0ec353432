//! Excitation-plus-envelope overlap-add vocoder.
//!
//! Each mel frame becomes `hop` samples: a pulse train (voiced) or seeded
//! white noise (unvoiced) filtered by a 1200-tap zero-phase impulse response
//! derived from the frame's mel envelope, windowed by a raised cosine of
//! length `2 * hop` centered on the frame and overlap-added. Frame `i`
//! nominally covers samples `start_i..start_i + hop_i`.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::acoustics::{self, apply_mel_emph_gain, frames_for_word, MelSpectrogram, N_MELS};
use crate::duration::{scaled_ceil, validate_alpha, DurationSequence};
use crate::error::{Error, Result};
use crate::phonology::Utterance;

/// Waveform samples per mel frame at 24 kHz and 80 Hz.
pub const NOMINAL_HOP: u32 = 300;
/// Zero padding after the last hop.
pub const TAIL_SAMPLES: usize = NOMINAL_HOP as usize;
pub const IR_LEN: usize = 1200;
pub const PEAK_LIMIT: f32 = 0.89;
/// Seed of the unvoiced excitation when none is configured.
pub const DEFAULT_NOISE_SEED: u64 = 0x5EED_0001;
pub const DEFAULT_ALPHA_MEL: f64 = 1.25;

/// Linear gain from template magnitudes to waveform amplitude.
const OUTPUT_GAIN: f64 = 0.3;
const ENVELOPE_FFT: usize = 2048;
const FILTER_FFT: usize = 4096;
const HALF_IR: usize = IR_LEN / 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct FrameHops {
    hops: Vec<u32>,
}

impl FrameHops {
    pub fn new(hops: Vec<u32>) -> Result<FrameHops> {
        if hops.contains(&0) {
            return Err(Error::invalid("frame hops", "every hop must be at least one sample"));
        }
        Ok(FrameHops { hops })
    }

    pub fn uniform(n_frames: usize) -> FrameHops {
        FrameHops {
            hops: vec![NOMINAL_HOP; n_frames],
        }
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.hops
    }

    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }

    pub fn total(&self) -> usize {
        self.hops.iter().map(|&h| h as usize).sum()
    }

    /// Sample offset of every frame plus the final end offset.
    pub fn starts(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.hops.len() + 1);
        let mut acc = 0usize;
        out.push(0);
        for &h in &self.hops {
            acc += h as usize;
            out.push(acc);
        }
        out
    }
}

/// Hops of 300 samples, stretched to `ceil(300 * alpha_mel)` inside `range`.
pub fn make_hops(n_frames: usize, range: Option<Range<usize>>, alpha_mel: f64) -> Result<FrameHops> {
    validate_alpha("alpha_mel", alpha_mel)?;
    let mut hops = vec![NOMINAL_HOP; n_frames];
    if let Some(r) = range {
        if r.start > r.end || r.end > n_frames {
            return Err(Error::FrameRange {
                start: r.start,
                end: r.end,
                len: n_frames,
            });
        }
        let stretched = scaled_ceil(alpha_mel, NOMINAL_HOP);
        for h in &mut hops[r] {
            *h = stretched;
        }
    }
    Ok(FrameHops { hops })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f32>,
    pub sample_rate: u32,
    /// Set when the output was scaled down to `PEAK_LIMIT`.
    pub peak_normalized: bool,
}

impl Waveform {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Waveform {
        Waveform {
            samples,
            sample_rate,
            peak_normalized: false,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

pub fn vocode(mel: &MelSpectrogram, hops: &FrameHops) -> Result<Waveform> {
    vocode_seeded(mel, hops, DEFAULT_NOISE_SEED)
}

struct Filters {
    inverse_env: Arc<dyn Fft<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    /// FFT bin -> (lower band, upper band, weight of upper)
    interp: Vec<(usize, usize, f64)>,
}

impl Filters {
    fn new() -> Filters {
        let mut planner = FftPlanner::new();
        let spacing = acoustics::mel_band_spacing();
        let sr = acoustics::SAMPLE_RATE as f64;
        let interp = (0..=ENVELOPE_FFT / 2)
            .map(|k| {
                let hz = k as f64 * sr / ENVELOPE_FFT as f64;
                let pos = acoustics::hz_to_mel(hz) / spacing - 1.0;
                if pos <= 0.0 {
                    (0, 0, 0.0)
                } else if pos >= (N_MELS - 1) as f64 {
                    (N_MELS - 1, N_MELS - 1, 0.0)
                } else {
                    let lo = pos.floor() as usize;
                    (lo, lo + 1, pos - lo as f64)
                }
            })
            .collect();
        let window = (0..IR_LEN)
            .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * (n as f64 + 0.5) / IR_LEN as f64).cos())
            .collect();
        Filters {
            inverse_env: planner.plan_fft_inverse(ENVELOPE_FFT),
            forward: planner.plan_fft_forward(FILTER_FFT),
            inverse: planner.plan_fft_inverse(FILTER_FFT),
            window,
            interp,
        }
    }

    /// Zero-phase windowed impulse response, centered at `HALF_IR`.
    fn impulse_response(&self, row: &[f32]) -> Vec<f64> {
        let mut spec: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); ENVELOPE_FFT];
        for (k, &(lo, hi, w)) in self.interp.iter().enumerate() {
            let mag = OUTPUT_GAIN * ((1.0 - w) * row[lo] as f64 + w * row[hi] as f64);
            spec[k] = Complex::new(mag, 0.0);
            if k != 0 && k != ENVELOPE_FFT / 2 {
                spec[ENVELOPE_FFT - k] = Complex::new(mag, 0.0);
            }
        }
        self.inverse_env.process(&mut spec);
        let scale = 1.0 / ENVELOPE_FFT as f64;
        (0..IR_LEN)
            .map(|n| {
                let lag = (n + ENVELOPE_FFT - HALF_IR) % ENVELOPE_FFT;
                spec[lag].re * scale * self.window[n]
            })
            .collect()
    }

    fn spectrum(&self, signal: &[f64]) -> Vec<Complex<f64>> {
        let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); FILTER_FFT];
        for (slot, &x) in buf.iter_mut().zip(signal) {
            slot.re = x;
        }
        self.forward.process(&mut buf);
        buf
    }
}

/// Pulse positions following the F0 of whichever frame owns each sample.
fn pulse_train(mel: &MelSpectrogram, starts: &[usize], sample_rate: f64) -> Vec<(usize, f64)> {
    let mut pulses = Vec::new();
    let mut next: Option<f64> = None;
    for (i, &f0) in mel.f0_track().iter().enumerate() {
        let (s, e) = (starts[i] as f64, starts[i + 1] as f64);
        if f0 <= 0.0 {
            next = None;
            continue;
        }
        let period = sample_rate / f0 as f64;
        let mut t = next.unwrap_or(s);
        while t < e {
            pulses.push((t.round() as usize, period.sqrt()));
            t += period;
        }
        next = Some(t);
    }
    pulses
}

/// Synthesizes `sum(hops) + TAIL_SAMPLES` samples. Identical inputs and
/// seed give bit-identical output.
pub fn vocode_seeded(mel: &MelSpectrogram, hops: &FrameHops, seed: u64) -> Result<Waveform> {
    if hops.len() != mel.n_frames() {
        return Err(Error::LengthMismatch {
            what: "frame hops",
            expected: mel.n_frames(),
            actual: hops.len(),
        });
    }
    let sr = mel.sample_rate();
    let starts = hops.starts();
    let total = hops.total();
    let out_len = total + TAIL_SAMPLES;
    let mut out = vec![0f64; out_len];
    let silent: Vec<bool> = mel.rows().map(|r| r.iter().all(|&m| m == 0.0)).collect();

    if silent.iter().all(|&s| s) {
        return Ok(Waveform::new(vec![0.0; out_len], sr));
    }

    // noise[t + margin] is the excitation at absolute sample t
    let max_hop = hops.as_slice().iter().copied().max().unwrap_or(NOMINAL_HOP) as usize;
    let margin = max_hop + HALF_IR;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = 3f64.sqrt();
    let noise: Vec<f64> = (0..out_len + 2 * margin)
        .map(|_| rng.random_range(-amp..amp))
        .collect();
    let pulses = pulse_train(mel, &starts, sr as f64);

    let filters = Filters::new();
    let mut ir_cache: HashMap<Vec<u32>, Arc<(Vec<f64>, Vec<Complex<f64>>)>> = HashMap::new();

    for i in 0..mel.n_frames() {
        if silent[i] {
            continue;
        }
        let row = mel.row(i);
        let key: Vec<u32> = row.iter().map(|m| m.to_bits()).collect();
        let filter = ir_cache
            .entry(key)
            .or_insert_with(|| {
                let ir = filters.impulse_response(row);
                let spec = filters.spectrum(&ir);
                Arc::new((ir, spec))
            })
            .clone();
        let (ir, ir_spec) = (&filter.0, &filter.1);

        let hop = hops.as_slice()[i] as usize;
        let len = 2 * hop;
        let win_start = starts[i] as i64 - (hop / 2) as i64;
        let mut segment = vec![0f64; len];

        if mel.f0_track()[i] > 0.0 {
            // sparse excitation: add one shifted impulse response per pulse
            let lo = win_start - HALF_IR as i64;
            let hi = win_start + len as i64 + HALF_IR as i64;
            let first = pulses.partition_point(|&(p, _)| (p as i64) < lo);
            for &(p, a) in pulses[first..].iter().take_while(|&&(p, _)| (p as i64) < hi) {
                // y(t) = sum_j ir[j] x(t - j + HALF_IR), so n pairs with
                // tap j = n + HALF_IR - (p - win_start)
                let shift = p as i64 - win_start - HALF_IR as i64;
                let n_lo = shift.max(0) as usize;
                let n_hi = (shift + IR_LEN as i64).clamp(0, len as i64) as usize;
                for n in n_lo..n_hi {
                    segment[n] += a * ir[(n as i64 - shift) as usize];
                }
            }
        } else {
            let base = (win_start - HALF_IR as i64 + margin as i64) as usize;
            let excitation = &noise[base..base + len + IR_LEN];
            let mut buf = filters.spectrum(excitation);
            for (x, h) in buf.iter_mut().zip(ir_spec) {
                *x *= h;
            }
            filters.inverse.process(&mut buf);
            let scale = 1.0 / FILTER_FFT as f64;
            for (n, y) in segment.iter_mut().enumerate() {
                *y = buf[n + IR_LEN].re * scale;
            }
        }

        for (n, y) in segment.iter().enumerate() {
            let t = win_start + n as i64;
            if t < 0 || t as usize >= out_len {
                continue;
            }
            let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos();
            out[t as usize] += w * y;
        }
    }

    // all-zero frames are rendered as digital silence over their hop
    for (i, &s) in silent.iter().enumerate() {
        if s {
            out[starts[i]..starts[i + 1]].fill(0.0);
        }
    }

    let peak = out.iter().fold(0f64, |m, x| m.max(x.abs()));
    let mut wave = Waveform::new(Vec::new(), sr);
    let gain = if peak > 1.0 {
        wave.peak_normalized = true;
        PEAK_LIMIT as f64 / peak
    } else {
        1.0
    };
    wave.samples = out.iter().map(|&x| (x * gain) as f32).collect();
    Ok(wave)
}

/// Mel-spectrogram emphasis of one word over a given frame range: scales
/// its magnitudes by `v_mel` and stretches its hops by `alpha_mel`.
pub fn mel_emph_frames(
    mel: &MelSpectrogram,
    frames: Option<Range<usize>>,
    v_mel: f64,
    alpha_mel: f64,
    seed: u64,
) -> Result<(MelSpectrogram, FrameHops, Waveform)> {
    let (emphasized, hops) = match frames {
        Some(range) => (
            apply_mel_emph_gain(mel, range.clone(), v_mel)?,
            make_hops(mel.n_frames(), Some(range), alpha_mel)?,
        ),
        None => (mel.clone(), FrameHops::uniform(mel.n_frames())),
    };
    let wave = vocode_seeded(&emphasized, &hops, seed)?;
    Ok((emphasized, hops, wave))
}

/// Emphasizes `word` of a rendering made from `durations` with the
/// default moderate level (`V_mel = 1.15`, `alpha_mel = 1.25`).
pub fn mel_emph(
    mel: &MelSpectrogram,
    utt: &Utterance,
    durations: &DurationSequence,
    word: Option<usize>,
) -> Result<Waveform> {
    let frames = word
        .map(|w| frames_for_word(utt, durations, w))
        .transpose()?;
    if let Some(r) = &frames {
        if r.end > mel.n_frames() {
            return Err(Error::FrameRange {
                start: r.start,
                end: r.end,
                len: mel.n_frames(),
            });
        }
    }
    let (_, _, wave) = mel_emph_frames(
        mel,
        frames,
        acoustics::DEFAULT_V_MEL,
        DEFAULT_ALPHA_MEL,
        DEFAULT_NOISE_SEED,
    )?;
    Ok(wave)
}
