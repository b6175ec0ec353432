//! 16-bit PCM mono WAV encoding and decoding.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::vocoder::Waveform;

/// Float to PCM: scale by 32767, round half away from zero, saturate.
pub fn to_pcm16(x: f32) -> i16 {
    let scaled = (x as f64 * 32767.0).round();
    scaled.clamp(i16::MIN as f64, i16::MAX as f64) as i16
}

pub fn encode_wav(wave: &Waveform) -> Result<Vec<u8>> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut cursor = Cursor::new(Vec::with_capacity(44 + 2 * wave.len()));
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec)?;
        let mut samples = writer.get_i16_writer(wave.len() as u32);
        for &x in &wave.samples {
            samples.write_sample(to_pcm16(x));
        }
        samples.flush()?;
        writer.finalize()?;
    }
    Ok(cursor.into_inner())
}

/// Decodes a mono WAV file (16-bit PCM or 32-bit float) into [-1, 1] samples.
pub fn decode_wav(bytes: &[u8]) -> Result<Waveform> {
    let mut reader = hound::WavReader::new(Cursor::new(bytes))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::format("wav", format!("{} channels, expected mono", spec.channels)));
    }
    let samples = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f32 / 32767.0))
            .collect::<std::result::Result<Vec<_>, _>>()?,
        (hound::SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .collect::<std::result::Result<Vec<_>, _>>()?,
        (format, bits) => {
            return Err(Error::format("wav", format!("unsupported {format:?} {bits}-bit samples")))
        }
    };
    Ok(Waveform::new(samples, spec.sample_rate))
}

pub fn write_wav(path: &Path, wave: &Waveform) -> Result<()> {
    std::fs::write(path, encode_wav(wave)?)?;
    Ok(())
}

pub fn read_wav(path: &Path) -> Result<Waveform> {
    decode_wav(&std::fs::read(path)?)
}
