use std::collections::BTreeSet;

use ddemph_core::acoustics::{apply_mel_emph_gain, plan_prosody, render_mel, Profile, ProsodyConfig};
use ddemph_core::analysis::{detect_silences, estimate_f0, intensity, IntensityTrack};
use ddemph_core::corpus::{fixture_sentence, generate_corpus};
use ddemph_core::duration::{dilate, predict_durations, DurationModel, DurationSequence};
use ddemph_core::evalstats::{
    chi_square_sf, friedman, identifiability, mushra_summary, preference_delta, IdentifiabilityRecord,
    PreferenceTally, RatingsMatrix,
};
use ddemph_core::phonology::{parse_utterance, upsample_flags};
use ddemph_core::pipeline::{synthesize, Mode, SynthesisConfig};
use ddemph_core::vocoder::{make_hops, mel_emph_frames, vocode_seeded, Waveform, DEFAULT_NOISE_SEED};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn light() -> ProptestConfig {
    ProptestConfig::with_cases(24)
}

proptest! {
    #![proptest_config(light())]

    #[test]
    fn utterance_json_round_trips(seed in any::<u64>()) {
        for utt in generate_corpus(4, seed).unwrap() {
            let back = parse_utterance(&utt.to_json()).unwrap();
            prop_assert_eq!(&back, &utt);
            let covered: usize = utt.words().iter().map(|w| w.phoneme_range.len()).sum();
            prop_assert_eq!(covered, utt.n_phonemes());
            let target = utt.emphasis_target().unwrap();
            prop_assert_eq!(upsample_flags(&utt).weight(), utt.words()[target].phoneme_range.len());
            prop_assert_eq!(upsample_flags(&utt.with_emphasis(None).unwrap()).weight(), 0);
        }
    }

    #[test]
    fn synthesis_conserves_frames_and_samples(seed in any::<u64>(), mode in 0usize..4, expressive in any::<bool>()) {
        let utt = &generate_corpus(1, seed).unwrap()[0];
        let cfg = SynthesisConfig {
            mode: Mode::ALL[mode],
            profile: if expressive { Profile::Expressive } else { Profile::Neutral },
            ..SynthesisConfig::default()
        };
        let s = synthesize(utt, &DurationModel::default(), None, &cfg).unwrap();
        prop_assert_eq!(s.mel.n_frames(), s.durations.total() as usize + s.plan.injected_silence_frames());
        prop_assert_eq!(s.plan.injected_silence_frames(), 3 * s.plan.correlates.len());
        prop_assert_eq!(s.waveform.len(), s.hops.total() + 300);
    }

    #[test]
    fn neutral_dilation_only_repeats_template_rows(seed in any::<u64>(), alpha in 1.0f64..=1.5) {
        let utt = &generate_corpus(1, seed).unwrap()[0];
        let model = DurationModel::default();
        // three or more frames per phoneme keep every phoneme's steady-state row
        let d = DurationSequence::new(predict_durations(&model, utt).frames().iter().map(|&f| f.max(3)).collect()).unwrap();
        let dilated = dilate(&d, &upsample_flags(utt), alpha).unwrap();
        let cfg = ProsodyConfig::default();
        let rows = |d: &DurationSequence| {
            let plan = plan_prosody(utt, d, Profile::Neutral, None, &model, &cfg).unwrap();
            prop_assert!(plan.correlates.is_empty());
            let mel = render_mel(&plan, utt).unwrap();
            Ok(mel.rows().map(|r| r.iter().map(|v| v.to_bits()).collect::<Vec<_>>()).collect::<BTreeSet<_>>())
        };
        prop_assert_eq!(rows(&d)?, rows(&dilated)?);
    }
}

#[test]
fn mel_emph_raises_energy_without_moving_pitch() {
    let utt = fixture_sentence();
    let base = synthesize(&utt, &DurationModel::default(), None, &SynthesisConfig::default()).unwrap();
    let range = base.plan.word_frames(&utt, 5).unwrap();
    let (_, hops, plain) = mel_emph_frames(&base.mel, Some(range.clone()), 1.0, 1.25, DEFAULT_NOISE_SEED).unwrap();
    let (_, hops2, loud) = mel_emph_frames(&base.mel, Some(range.clone()), 1.15, 1.25, DEFAULT_NOISE_SEED).unwrap();
    assert_eq!(hops, hops2);
    let starts = hops.starts();
    let region = starts[range.start]..starts[range.end - 1] + hops.as_slice()[range.end - 1] as usize;
    let rms = |w: &Waveform| (w.samples[region.clone()].iter().map(|&x| (x as f64).powi(2)).sum::<f64>() / region.len() as f64).sqrt();
    assert!(rms(&loud) > rms(&plain));

    let voiced_median = |w: &Waveform, r: std::ops::Range<usize>| {
        let track = estimate_f0(w);
        let (t0, t1) = (r.start as f64 / 24000.0, r.end as f64 / 24000.0);
        let mut v: Vec<f64> = track
            .frames
            .iter()
            .filter(|f| f.time_s >= t0 && f.time_s < t1)
            .filter_map(|f| f.f0_hz)
            .collect();
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let orig_starts = base.hops.starts();
    let orig_region = orig_starts[range.start]..orig_starts[range.end - 1] + 300;
    let before = voiced_median(&base.waveform, orig_region);
    let after = voiced_median(&loud, region.clone());
    assert!((after - before).abs() / before < 0.02, "{before} -> {after}");
}

#[test]
fn mel_emph_word_ratio_within_one_hop() {
    for utt in generate_corpus(10, 3).unwrap() {
        let model = DurationModel::default();
        let base = synthesize(&utt, &model, None, &SynthesisConfig::default()).unwrap();
        let mel = synthesize(&utt, &model, None, &SynthesisConfig { mode: Mode::Mel, ..SynthesisConfig::default() }).unwrap();
        let t = utt.emphasis_target().unwrap();
        let len = |s: &ddemph_core::pipeline::Synthesis| (s.alignment.words[t].end_sample - s.alignment.words[t].start_sample) as f64;
        assert!((len(&mel) - 1.25 * len(&base)).abs() <= 300.0);
    }
}

#[test]
fn gain_touches_only_its_range_in_the_vocoder_input() {
    let utt = fixture_sentence();
    let base = synthesize(&utt, &DurationModel::default(), None, &SynthesisConfig::default()).unwrap();
    let n = base.mel.n_frames();
    let a = apply_mel_emph_gain(&base.mel, 0..5, 1.15).unwrap();
    let hops = make_hops(n, None, 1.25).unwrap();
    let w0 = vocode_seeded(&base.mel, &hops, 1).unwrap();
    let w1 = vocode_seeded(&a, &hops, 1).unwrap();
    // windows and impulse responses reach at most ~1.5 hops plus half an IR past the range
    let tail = 5 * 300 + 150 + 600 + 1;
    assert_eq!(w0.samples[tail..], w1.samples[tail..]);
}

fn sine_with_offset(prefix: usize) -> Waveform {
    let mut samples = vec![0.0f32; prefix];
    samples.extend((0..4800).map(|i| (0.4 * (2.0 * std::f64::consts::PI * 300.0 * i as f64 / 24000.0).sin()) as f32));
    Waveform::new(samples, 24000)
}

proptest! {
    #![proptest_config(light())]

    #[test]
    fn intensity_is_shift_invariant(steps in 0usize..20) {
        let base = intensity(&sine_with_offset(0));
        let shifted = intensity(&sine_with_offset(steps * 120));
        prop_assert_eq!(&shifted.values_db[steps..], &base.values_db[..]);
    }

    #[test]
    fn intensity_doubling_adds_six_db(amp in 0.01f64..0.45) {
        let w = |a: f64| Waveform::new((0..2400).map(|i| (a * (i as f64 * 0.3).sin()) as f32).collect(), 24000);
        let one = intensity(&w(amp));
        let two = intensity(&w(2.0 * amp));
        for (a, b) in one.values_db.iter().zip(&two.values_db) {
            prop_assert!((b - a - 6.0206).abs() < 0.01);
        }
    }

    #[test]
    fn silences_are_sorted_disjoint_and_long(values in prop::collection::vec(prop_oneof![Just(-90.0), Just(-20.0), -100.0f64..0.0], 1..200)) {
        let track = IntensityTrack { time_step_s: 0.005, window_s: 0.01, values_db: values };
        let segs = detect_silences(&track, -50.0, 25.0);
        for s in &segs {
            prop_assert!(s.duration_ms() >= 25.0 - 1e-9);
        }
        for pair in segs.windows(2) {
            prop_assert!(pair[0].end_s <= pair[1].start_s + 0.005 + 1e-12);
            prop_assert!(pair[0].start_s < pair[1].start_s);
        }
    }

    #[test]
    fn friedman_is_rank_based(rows in prop::collection::vec(prop::collection::vec(0u8..=10, 3), 2..12)) {
        let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64 * 10.0).collect()).collect();
        prop_assume!(rows.iter().any(|r| r[0] != r[1] || r[1] != r[2]));
        let labels = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let m = RatingsMatrix::new(labels.clone(), rows.clone()).unwrap();
        // strictly increasing map into [0, 100]
        let warped: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| (v / 100.0).powi(3) * 100.0).collect()).collect();
        let w = RatingsMatrix::new(labels, warped).unwrap();
        let (f1, f2) = (friedman(&m).unwrap(), friedman(&w).unwrap());
        prop_assert!((f1.q - f2.q).abs() < 1e-9);
        prop_assert!((f1.p_value - f2.p_value).abs() < 1e-12);
    }

    #[test]
    fn mushra_means_lie_within_column_range(rows in prop::collection::vec(prop::collection::vec(0.0f64..=100.0, 4), 1..30)) {
        let labels: Vec<String> = (0..4).map(|i| format!("s{i}")).collect();
        let m = RatingsMatrix::new(labels, rows.clone()).unwrap();
        for (j, s) in mushra_summary(&m).iter().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(s.mean >= lo - 1e-9 && s.mean <= hi + 1e-9);
            prop_assert!(s.ci_low <= s.mean && s.mean <= s.ci_high);
        }
    }

    #[test]
    fn preference_swap_symmetry(a in 0u64..500, b in 0u64..500) {
        prop_assume!(a + b > 0);
        let t = |x, y, lx: &str, ly: &str| PreferenceTally { system_a: lx.into(), system_b: ly.into(), votes_a: x, votes_b: y };
        let ab = preference_delta(&t(a, b, "dd", "mel")).unwrap();
        let ba = preference_delta(&t(b, a, "mel", "dd")).unwrap();
        prop_assert_eq!(ab.delta_pref, -ba.delta_pref);
        prop_assert_eq!(ab.p_value, ba.p_value);
        prop_assert!(ab.p_value > 0.0 && ab.p_value <= 1.0);
    }

    #[test]
    fn identifiability_ignores_record_order(picks in prop::collection::vec((0usize..5, 0usize..5, 0usize..3), 1..40), rot in 0usize..40) {
        let systems = ["dd", "mel", "none"];
        let records: Vec<IdentifiabilityRecord> = picks.iter().enumerate().map(|(i, &(t, c, s))| IdentifiabilityRecord {
            utterance_id: format!("u{i}"),
            system: systems[s].into(),
            true_word: t,
            chosen_word: c,
            n_words: 5,
            listener_id: None,
        }).collect();
        let mut rotated = records.clone();
        rotated.rotate_left(rot % records.len());
        rotated.reverse();
        prop_assert_eq!(identifiability(&records).unwrap(), identifiability(&rotated).unwrap());
    }

    #[test]
    fn chi_square_tail_matches_reference(x in 0.0f64..80.0, df in 1u32..=30) {
        let reference = 1.0 - ChiSquared::new(df as f64).unwrap().cdf(x);
        prop_assert!((chi_square_sf(x, df as f64) - reference).abs() < 1e-10);
    }
}

#[test]
fn chi_square_two_df_closed_form() {
    for i in 0..100 {
        let x = i as f64 * 0.37;
        assert!((chi_square_sf(x, 2.0) - (-x / 2.0).exp()).abs() < 1e-13);
    }
}

/// Exact binomial probabilities via Pascal's triangle, as an independent route.
#[test]
fn binomial_p_matches_pascal_triangle() {
    let mut row = vec![1.0f64];
    for n in 1..=60u64 {
        let mut next = vec![0.5 * row[0]];
        for k in 1..row.len() {
            next.push(0.5 * (row[k - 1] + row[k]));
        }
        next.push(0.5 * row[row.len() - 1]);
        row = next;
        for a in 0..=n {
            let lo = a.min(n - a) as usize;
            let tail: f64 = row[..=lo].iter().sum();
            let expect = (2.0 * tail).min(1.0);
            let got = preference_delta(&PreferenceTally {
                system_a: "a".into(),
                system_b: "b".into(),
                votes_a: a,
                votes_b: n - a,
            })
            .unwrap()
            .p_value;
            assert!((got - expect).abs() <= 1e-15 * expect.max(1e-300) + 1e-300, "n {n}, a {a}: {got} vs {expect}");
        }
    }
}

#[test]
fn expressive_threshold_is_exact_at_twelve_tenths() {
    // a word predicted at 10 frames is injected at 12 but not at 11
    let utt = parse_utterance(
        r#"{"words":[
            {"orthography":"a","phonemes":[{"symbol":"AH"}]},
            {"orthography":"go","phonemes":[{"symbol":"G"},{"symbol":"OW","stress":"primary"}]}
        ],"emphasis_word_index":1}"#,
    )
    .unwrap();
    let model = DurationModel::default();
    let predicted = predict_durations(&model, &utt);
    assert_eq!(predicted.frames()[1..].iter().sum::<u32>(), 13);
    let cfg = ProsodyConfig::default();
    let run = |go_frames: [u32; 2]| {
        let d = DurationSequence::new(vec![predicted.frames()[0], go_frames[0], go_frames[1]]).unwrap();
        plan_prosody(&utt, &d, Profile::Expressive, None, &model, &cfg).unwrap().correlates.len()
    };
    // 15/13 < 1.2 <= 16/13
    assert_eq!(run([5, 10]), 0);
    assert_eq!(run([5, 11]), 1);
}
