use ddemph_core::analysis::{word_report, Alignment};
use ddemph_core::corpus::fixture_sentence;
use ddemph_core::duration::DurationModel;
use ddemph_core::melfile::{read_mel, write_mel};
use ddemph_core::pipeline::{synthesize, Mode, SynthesisConfig};
use ddemph_core::wav::{read_wav, write_wav};

#[test]
fn rendered_artifacts_survive_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthesisConfig {
        mode: Mode::Dd,
        ..SynthesisConfig::default()
    };
    let s = synthesize(&fixture_sentence(), &DurationModel::default(), None, &cfg).unwrap();

    let mel_path = dir.path().join("out.mel");
    write_mel(&mel_path, &s.mel).unwrap();
    assert_eq!(read_mel(&mel_path).unwrap(), s.mel);

    let wav_path = dir.path().join("out.wav");
    write_wav(&wav_path, &s.waveform).unwrap();
    let wave = read_wav(&wav_path).unwrap();
    assert_eq!(wave.len(), s.waveform.len());
    for (a, b) in wave.samples.iter().zip(&s.waveform.samples) {
        assert!((a - b).abs() <= 1.0 / 32767.0);
    }

    let alignment = Alignment::from_json(&s.alignment.to_json()).unwrap();
    assert_eq!(alignment, s.alignment);
    let from_disk = word_report(&wave, &alignment).unwrap();
    let in_memory = word_report(&s.waveform, &s.alignment).unwrap();
    assert_eq!(from_disk.len(), in_memory.len());
    assert!((from_disk[5].pre_stress_silence_ms - in_memory[5].pre_stress_silence_ms).abs() < 1e-9);
    assert!((from_disk[5].duration_ms - in_memory[5].duration_ms).abs() < 1e-9);
}

#[test]
fn missing_files_are_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(read_wav(&dir.path().join("nope.wav")).is_err());
    assert!(read_mel(&dir.path().join("nope.mel")).is_err());
}
