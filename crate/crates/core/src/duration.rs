//! Phoneme duration prediction and duration dilation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phonology::{PhonemeClass, PhonemeFlags, Stress, Symbol, Utterance};

/// Frame period of the duration grid (80 Hz).
pub const FRAME_PERIOD_MS: f64 = 12.5;

pub const ALPHA_MIN: f64 = 1.0;
pub const ALPHA_MAX: f64 = 1.5;

/// Per-phoneme frame counts, each at least one frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct DurationSequence {
    frames: Vec<u32>,
}

impl DurationSequence {
    pub fn new(frames: Vec<u32>) -> Result<DurationSequence> {
        if let Some(i) = frames.iter().position(|&f| f == 0) {
            return Err(Error::invalid(
                "durations",
                format!("phoneme {i} has zero frames"),
            ));
        }
        Ok(DurationSequence { frames })
    }

    pub fn for_utterance(frames: Vec<u32>, utt: &Utterance) -> Result<DurationSequence> {
        if frames.len() != utt.n_phonemes() {
            return Err(Error::LengthMismatch {
                what: "durations",
                expected: utt.n_phonemes(),
                actual: frames.len(),
            });
        }
        DurationSequence::new(frames)
    }

    pub fn frames(&self) -> &[u32] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.frames.iter().map(|&f| f as u64).sum()
    }

    pub fn total_ms(&self) -> f64 {
        self.total() as f64 * FRAME_PERIOD_MS
    }

    /// Parses a JSON array of positive integers.
    pub fn from_json(text: &str) -> Result<DurationSequence> {
        let frames: Vec<u32> = serde_json::from_str(text)?;
        DurationSequence::new(frames)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.frames).expect("durations serialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DurationKey {
    pub symbol: Symbol,
    pub stress: Stress,
    pub word_final: bool,
}

impl DurationKey {
    pub fn of(utt: &Utterance, index: usize) -> DurationKey {
        let p = utt.phonemes()[index];
        DurationKey {
            symbol: p.symbol,
            stress: p.stress,
            word_final: utt.is_word_final(index),
        }
    }

    fn encode(&self) -> String {
        let stress = match self.stress {
            Stress::None => "none",
            Stress::Primary => "primary",
            Stress::Secondary => "secondary",
        };
        let position = if self.word_final { "final" } else { "medial" };
        format!("{}/{stress}/{position}", self.symbol)
    }

    fn decode(text: &str) -> Option<DurationKey> {
        let mut parts = text.split('/');
        let symbol = Symbol::parse(parts.next()?)?;
        let stress = match parts.next()? {
            "none" => Stress::None,
            "primary" => Stress::Primary,
            "secondary" => Stress::Secondary,
            _ => return None,
        };
        let word_final = match parts.next()? {
            "final" => true,
            "medial" => false,
            _ => return None,
        };
        if parts.next().is_some() {
            return None;
        }
        Some(DurationKey {
            symbol,
            stress,
            word_final,
        })
    }
}

/// Keyed mean-duration table with a per-class fallback.
#[derive(Debug, Clone, PartialEq)]
pub struct DurationModel {
    table: BTreeMap<DurationKey, f64>,
    fallback: BTreeMap<PhonemeClass, f64>,
}

impl Default for DurationModel {
    fn default() -> Self {
        DurationModel {
            table: BTreeMap::new(),
            fallback: default_fallback(),
        }
    }
}

fn default_fallback() -> BTreeMap<PhonemeClass, f64> {
    use PhonemeClass::*;
    [
        (Vowel, 8.0),
        (Fricative, 6.0),
        (Nasal, 5.0),
        (Liquid, 5.0),
        (Glide, 4.0),
        (Stop, 5.0),
        (Affricate, 6.0),
        (Pause, 8.0),
    ]
    .into_iter()
    .collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    table: BTreeMap<String, f64>,
    fallback: BTreeMap<PhonemeClass, f64>,
}

impl DurationModel {
    pub fn new(
        table: BTreeMap<DurationKey, f64>,
        fallback: BTreeMap<PhonemeClass, f64>,
    ) -> Result<DurationModel> {
        for class in PhonemeClass::ALL {
            if !fallback.contains_key(&class) {
                return Err(Error::invalid(
                    "duration model",
                    format!("fallback is missing class {}", class.name()),
                ));
            }
        }
        let positive = |m: &f64| m.is_finite() && *m > 0.0;
        if !table.values().all(positive) || !fallback.values().all(positive) {
            return Err(Error::invalid("duration model", "means must be positive"));
        }
        Ok(DurationModel { table, fallback })
    }

    pub fn table(&self) -> &BTreeMap<DurationKey, f64> {
        &self.table
    }

    pub fn fallback(&self) -> &BTreeMap<PhonemeClass, f64> {
        &self.fallback
    }

    pub fn mean_for(&self, utt: &Utterance, index: usize) -> f64 {
        let key = DurationKey::of(utt, index);
        self.table
            .get(&key)
            .copied()
            .unwrap_or_else(|| self.fallback[&key.symbol.class()])
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            table: self.table.iter().map(|(k, v)| (k.encode(), *v)).collect(),
            fallback: self.fallback.clone(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("model serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<DurationModel> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        let mut table = BTreeMap::new();
        for (key, mean) in doc.table {
            let parsed = DurationKey::decode(&key).ok_or_else(|| {
                Error::format("duration model", format!("bad table key {key:?}"))
            })?;
            table.insert(parsed, mean);
        }
        DurationModel::new(table, doc.fallback)
    }
}

/// Fits mean frame counts per (symbol, stress, word-final) key.
///
/// Class fallbacks are the corpus means per class, with the built-in
/// defaults for classes the corpus never shows.
pub fn fit_duration_model(corpus: &[(Utterance, DurationSequence)]) -> Result<DurationModel> {
    if corpus.is_empty() {
        return Err(Error::Empty("duration corpus"));
    }
    let mut sums: BTreeMap<DurationKey, (f64, u32)> = BTreeMap::new();
    let mut class_sums: BTreeMap<PhonemeClass, (f64, u32)> = BTreeMap::new();
    for (utt, d) in corpus {
        if d.len() != utt.n_phonemes() {
            return Err(Error::LengthMismatch {
                what: "duration corpus entry",
                expected: utt.n_phonemes(),
                actual: d.len(),
            });
        }
        for (i, &frames) in d.frames().iter().enumerate() {
            let key = DurationKey::of(utt, i);
            let slot = sums.entry(key).or_default();
            slot.0 += frames as f64;
            slot.1 += 1;
            let slot = class_sums.entry(key.symbol.class()).or_default();
            slot.0 += frames as f64;
            slot.1 += 1;
        }
    }
    let table = sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect();
    let mut fallback = default_fallback();
    for (class, (s, n)) in class_sums {
        fallback.insert(class, s / n as f64);
    }
    DurationModel::new(table, fallback)
}

/// Round-half-up of the keyed mean, clamped to one frame.
pub fn predict_durations(model: &DurationModel, utt: &Utterance) -> DurationSequence {
    let frames = (0..utt.n_phonemes())
        .map(|i| round_half_up(model.mean_for(utt, i)).max(1))
        .collect();
    DurationSequence { frames }
}

fn round_half_up(x: f64) -> u32 {
    (x + 0.5).floor().max(0.0) as u32
}

/// Ceiling of `factor * value` that ignores binary representation error in
/// decimal factors (`1.1 * 10.0` is `11.000000000000002`).
pub(crate) fn scaled_ceil(factor: f64, value: u32) -> u32 {
    let exact = factor * value as f64;
    let tol = 1e-9 * exact.abs().max(1.0);
    let mut out = (exact - tol).ceil() as u32;
    if factor > 1.0 {
        // ceil(a*d) >= d + 1 holds exactly for every a > 1
        out = out.max(value + 1);
    }
    out
}

pub fn validate_alpha(name: &'static str, alpha: f64) -> Result<()> {
    if !(ALPHA_MIN..=ALPHA_MAX).contains(&alpha) {
        return Err(Error::OutOfRange {
            name,
            value: alpha,
            min: ALPHA_MIN,
            max: ALPHA_MAX,
        });
    }
    Ok(())
}

/// Lengthens every flagged phoneme to `ceil(alpha * d)`; unflagged phonemes
/// keep their duration. `alpha = 1.0` is accepted as an explicit no-op.
pub fn dilate(d: &DurationSequence, flags: &PhonemeFlags, alpha: f64) -> Result<DurationSequence> {
    validate_alpha("alpha_dd", alpha)?;
    if flags.len() != d.len() {
        return Err(Error::LengthMismatch {
            what: "emphasis flags",
            expected: d.len(),
            actual: flags.len(),
        });
    }
    let frames = d
        .frames
        .iter()
        .zip(flags.as_slice())
        .map(|(&f, &flagged)| if flagged { scaled_ceil(alpha, f) } else { f })
        .collect();
    Ok(DurationSequence { frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phonology::parse_utterance;
    use proptest::prelude::*;

    fn seq(v: &[u32]) -> DurationSequence {
        DurationSequence::new(v.to_vec()).unwrap()
    }

    fn flags(v: &[u8]) -> PhonemeFlags {
        PhonemeFlags::new(v.iter().map(|&b| b == 1).collect())
    }

    fn utt() -> Utterance {
        parse_utterance(
            r#"{"words":[
                {"orthography":"hot","phonemes":[{"symbol":"HH"},{"symbol":"AA","stress":"primary"},{"symbol":"T"}]},
                {"orthography":"pa","phonemes":[{"symbol":"P"},{"symbol":"AA","stress":"primary"}]}
            ]}"#,
        )
        .unwrap()
    }

    #[test]
    fn dilation_examples() {
        assert_eq!(dilate(&seq(&[4, 6, 10]), &flags(&[1, 1, 1]), 1.5).unwrap().frames(), &[6, 9, 15]);
        assert_eq!(dilate(&seq(&[3]), &flags(&[1]), 1.25).unwrap().frames(), &[4]);
        assert_eq!(dilate(&seq(&[5, 7]), &flags(&[0, 0]), 1.5).unwrap().frames(), &[5, 7]);
        assert_eq!(dilate(&seq(&[2, 2, 9]), &flags(&[0, 1, 0]), 1.25).unwrap().frames(), &[2, 3, 9]);
    }

    #[test]
    fn decimal_factors_do_not_overshoot() {
        assert_eq!(scaled_ceil(1.1, 10), 11);
        assert_eq!(scaled_ceil(1.1, 300), 330);
        assert_eq!(scaled_ceil(1.25, 300), 375);
        assert_eq!(scaled_ceil(1.0, 7), 7);
    }

    #[test]
    fn dilation_rejects_bad_inputs() {
        assert!(dilate(&seq(&[4]), &flags(&[1]), 2.0).is_err());
        assert!(dilate(&seq(&[4]), &flags(&[1]), 0.9).is_err());
        assert!(dilate(&seq(&[4, 4]), &flags(&[1]), 1.5).is_err());
        assert_eq!(dilate(&seq(&[4]), &flags(&[1]), 1.0).unwrap().frames(), &[4]);
    }

    #[test]
    fn zero_frame_rejected() {
        assert!(DurationSequence::new(vec![3, 0]).is_err());
        assert!(DurationSequence::from_json("[3, 0]").is_err());
        assert!(DurationSequence::from_json("[3, -1]").is_err());
    }

    #[test]
    fn fit_takes_means_per_key() {
        let u = utt();
        // AA primary appears word-medial in "hot" and word-final in "pa"
        let corpus = vec![
            (u.clone(), seq(&[5, 6, 4, 3, 9])),
            (u.clone(), seq(&[5, 8, 4, 3, 11])),
        ];
        let model = fit_duration_model(&corpus).unwrap();
        let aa = Symbol::parse("AA").unwrap();
        let medial = DurationKey {
            symbol: aa,
            stress: Stress::Primary,
            word_final: false,
        };
        let fin = DurationKey {
            word_final: true,
            ..medial
        };
        assert_eq!(model.table()[&medial], 7.0);
        assert_eq!(model.table()[&fin], 10.0);
        assert_eq!(model.fallback()[&PhonemeClass::Vowel], 8.5);
        assert_eq!(model.fallback()[&PhonemeClass::Nasal], 5.0);
    }

    #[test]
    fn fit_single_utterance_reproduces_durations() {
        let u = utt();
        let d = seq(&[5, 6, 4, 3, 9]);
        let model = fit_duration_model(&[(u.clone(), d.clone())]).unwrap();
        assert_eq!(predict_durations(&model, &u), d);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_duration_model(&[]).is_err());
        assert!(fit_duration_model(&[(utt(), seq(&[1, 2]))]).is_err());
    }

    #[test]
    fn prediction_rounds_half_up_and_clamps() {
        let u = utt();
        let hh = DurationKey::of(&u, 0);
        let aa = DurationKey::of(&u, 1);
        let t = DurationKey::of(&u, 2);
        let table = [(hh, 7.5), (aa, 0.6), (t, 2.49)].into_iter().collect();
        let model = DurationModel::new(table, default_fallback()).unwrap();
        let d = predict_durations(&model, &u);
        // P falls back to stop=5, final AA to vowel=8
        assert_eq!(d.frames(), &[8, 1, 2, 5, 8]);
    }

    #[test]
    fn model_json_round_trip() {
        let u = utt();
        let model = fit_duration_model(&[(u, seq(&[5, 6, 4, 3, 9]))]).unwrap();
        let back = DurationModel::from_json(&model.to_json()).unwrap();
        assert_eq!(back, model);
        assert!(DurationModel::from_json(r#"{"table":{},"fallback":{}}"#).is_err());
    }

    proptest! {
        #[test]
        fn dilation_is_monotone_local_and_lengthening(
            frames in proptest::collection::vec(1u32..200, 1..20),
            bits in proptest::collection::vec(any::<bool>(), 20),
            a1 in 1.0f64..=1.5,
            a2 in 1.0f64..=1.5,
        ) {
            let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
            let d = DurationSequence::new(frames.clone()).unwrap();
            let f = PhonemeFlags::new(bits[..frames.len()].to_vec());
            let small = dilate(&d, &f, lo).unwrap();
            let big = dilate(&d, &f, hi).unwrap();
            for i in 0..frames.len() {
                prop_assert!(small.frames()[i] <= big.frames()[i]);
                if f.as_slice()[i] {
                    if lo > 1.0 {
                        prop_assert!(small.frames()[i] > frames[i]);
                    }
                } else {
                    prop_assert_eq!(big.frames()[i], frames[i]);
                }
            }
        }

        #[test]
        fn predictions_are_at_least_one_frame(mean in 0.01f64..40.0) {
            let u = utt();
            let fallback = PhonemeClass::ALL.iter().map(|&c| (c, mean)).collect();
            let model = DurationModel::new(BTreeMap::new(), fallback).unwrap();
            prop_assert!(predict_durations(&model, &u).frames().iter().all(|&f| f >= 1));
        }
    }
}
