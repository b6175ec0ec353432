//! Binary mel file: `MEL0` magic, four little-endian u32 header fields
//! (frames, bins, frame rate, sample rate), row-major f32 magnitudes, then
//! one f32 F0 value per frame.

use std::path::Path;

use crate::acoustics::MelSpectrogram;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"MEL0";
const HEADER_LEN: usize = 20;

pub fn encode_mel(mel: &MelSpectrogram) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * (mel.magnitudes().len() + mel.n_frames()));
    out.extend_from_slice(MAGIC);
    for field in [
        mel.n_frames() as u32,
        mel.n_bins() as u32,
        mel.frame_rate(),
        mel.sample_rate(),
    ] {
        out.extend_from_slice(&field.to_le_bytes());
    }
    for &m in mel.magnitudes() {
        out.extend_from_slice(&m.to_le_bytes());
    }
    for &f in mel.f0_track() {
        out.extend_from_slice(&f.to_le_bytes());
    }
    out
}

pub fn decode_mel(bytes: &[u8]) -> Result<MelSpectrogram> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::format("mel file", "truncated header"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format("mel file", "bad magic"));
    }
    let field = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap());
    let (n_frames, n_bins, frame_rate, sample_rate) = (field(0), field(1), field(2), field(3));
    let expected = (n_frames as u64)
        .checked_mul(n_bins as u64 + 1)
        .and_then(|v| v.checked_mul(4))
        .and_then(|v| v.checked_add(HEADER_LEN as u64));
    if expected != Some(bytes.len() as u64) {
        return Err(Error::format(
            "mel file",
            format!(
                "{} bytes do not match {n_frames} frames x {n_bins} bins",
                bytes.len()
            ),
        ));
    }
    let floats: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let split = n_frames as usize * n_bins as usize;
    let (mags, f0) = floats.split_at(split);
    MelSpectrogram::new(n_bins as usize, mags.to_vec(), f0.to_vec(), frame_rate, sample_rate)
}

pub fn write_mel(path: &Path, mel: &MelSpectrogram) -> Result<()> {
    std::fs::write(path, encode_mel(mel))?;
    Ok(())
}

pub fn read_mel(path: &Path) -> Result<MelSpectrogram> {
    decode_mel(&std::fs::read(path)?)
}
