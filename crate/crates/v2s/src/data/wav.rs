//! Strict mono 16-bit PCM WAV reader and writer.
//!
//! Only the exact format the rest of the system produces and consumes is
//! accepted — 16 kHz, one channel, 16-bit integer PCM. This is a contract,
//! not a limitation: rejecting everything else at the door yields precise
//! errors instead of silently resampled or remixed audio. Unknown RIFF
//! chunks (LIST, fact, …) are skipped, since many tools emit them.

use std::path::Path;

use crate::core::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

const EXPECTED: &str = "mono 16-bit PCM WAV at 16000 Hz";

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

/// Reads a WAV file into a [`Waveform`], mapping each sample to
/// `value / 32768` (so 16384 becomes exactly 0.5).
pub fn load_audio(path: &Path) -> Result<Waveform> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::Format(format!(
            "{}: not a RIFF/WAVE file, expected {EXPECTED}",
            path.display()
        )));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let tag = &bytes[at..at + 4];
        let size = u32_at(&bytes, at + 4) as usize;
        let body_start = at + 8;
        let body_end = body_start.checked_add(size).filter(|&e| e <= bytes.len()).ok_or_else(
            || {
                Error::Format(format!(
                    "{}: truncated {} chunk",
                    path.display(),
                    String::from_utf8_lossy(tag)
                ))
            },
        )?;
        match tag {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::Format(format!(
                        "{}: fmt chunk too short ({size} bytes)",
                        path.display()
                    )));
                }
                let body = &bytes[body_start..body_end];
                fmt = Some((u16_at(body, 0), u16_at(body, 2), u32_at(body, 4), u16_at(body, 14)));
            }
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {}
        }
        // Chunks are padded to even lengths.
        at = body_end + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| {
        Error::Format(format!("{}: missing fmt chunk", path.display()))
    })?;
    if format != 1 || channels != 1 || rate != SAMPLE_RATE || bits != 16 {
        return Err(Error::Format(format!(
            "{}: expected {EXPECTED}, got format {format}, {channels} channel(s), {rate} Hz, {bits} bits",
            path.display()
        )));
    }
    let data = data.ok_or_else(|| {
        Error::Format(format!("{}: missing data chunk", path.display()))
    })?;
    if data.len() % 2 != 0 {
        return Err(Error::Format(format!(
            "{}: data chunk has odd length {}",
            path.display(),
            data.len()
        )));
    }

    let samples = data
        .chunks_exact(2)
        .map(|pair| i16::from_le_bytes([pair[0], pair[1]]) as f32 / 32768.0)
        .collect();
    Waveform::new(samples, SAMPLE_RATE)
}

/// Writes a [`Waveform`] as mono 16-bit PCM, quantizing with round-to-nearest
/// and clamping to the i16 range (so the round trip is exact to 1/32768).
pub fn save_audio(path: &Path, waveform: &Waveform) -> Result<()> {
    if waveform.sample_rate() != SAMPLE_RATE {
        return Err(Error::Format(format!(
            "can only write {EXPECTED}, waveform is at {} Hz",
            waveform.sample_rate()
        )));
    }
    let data_len = (waveform.len() * 2) as u32;
    let mut bytes = Vec::with_capacity(44 + data_len as usize);
    bytes.extend_from_slice(b"RIFF");
    bytes.extend_from_slice(&(36 + data_len).to_le_bytes());
    bytes.extend_from_slice(b"WAVE");
    bytes.extend_from_slice(b"fmt ");
    bytes.extend_from_slice(&16u32.to_le_bytes());
    bytes.extend_from_slice(&1u16.to_le_bytes()); // PCM
    bytes.extend_from_slice(&1u16.to_le_bytes()); // mono
    bytes.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    bytes.extend_from_slice(&(SAMPLE_RATE * 2).to_le_bytes()); // byte rate
    bytes.extend_from_slice(&2u16.to_le_bytes()); // block align
    bytes.extend_from_slice(&16u16.to_le_bytes());
    bytes.extend_from_slice(b"data");
    bytes.extend_from_slice(&data_len.to_le_bytes());
    for &s in waveform.samples() {
        let q = (s as f64 * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        bytes.extend_from_slice(&q.to_le_bytes());
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_raw_wav(path: &Path, rate: u32, channels: u16, bits: u16, samples: &[i16]) {
        let data_len = (samples.len() * 2) as u32;
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36 + data_len).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&channels.to_le_bytes());
        bytes.extend_from_slice(&rate.to_le_bytes());
        bytes.extend_from_slice(&(rate * 2).to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&bits.to_le_bytes());
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&data_len.to_le_bytes());
        for &s in samples {
            bytes.extend_from_slice(&s.to_le_bytes());
        }
        std::fs::write(path, bytes).unwrap();
    }

    #[test]
    fn sample_scaling_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        write_raw_wav(&path, 16_000, 1, 16, &[0, 16_384, -16_384]);
        let wave = load_audio(&path).unwrap();
        assert_eq!(wave.samples(), &[0.0, 0.5, -0.5]);
    }

    #[test]
    fn wrong_sample_rate_is_rejected_by_name() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        write_raw_wav(&path, 44_100, 1, 16, &[0]);
        let err = load_audio(&path).unwrap_err().to_string();
        assert!(err.contains("44100"), "{err}");
        assert!(err.contains("16000"), "{err}");
    }

    #[test]
    fn stereo_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        write_raw_wav(&path, 16_000, 2, 16, &[0, 0]);
        assert!(load_audio(&path).is_err());
    }

    #[test]
    fn garbage_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        std::fs::write(&path, b"MP3 or something").unwrap();
        let err = load_audio(&path).unwrap_err().to_string();
        assert!(err.contains("RIFF"), "{err}");
    }

    #[test]
    fn unknown_chunks_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        // LIST chunk between fmt and data.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"RIFF");
        bytes.extend_from_slice(&(36 + 10 + 2u32).to_le_bytes());
        bytes.extend_from_slice(b"WAVE");
        bytes.extend_from_slice(b"fmt ");
        bytes.extend_from_slice(&16u32.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&1u16.to_le_bytes());
        bytes.extend_from_slice(&16_000u32.to_le_bytes());
        bytes.extend_from_slice(&32_000u32.to_le_bytes());
        bytes.extend_from_slice(&2u16.to_le_bytes());
        bytes.extend_from_slice(&16u16.to_le_bytes());
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(b"ab");
        bytes.extend_from_slice(b"data");
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&8_192i16.to_le_bytes());
        std::fs::write(&path, bytes).unwrap();
        let wave = load_audio(&path).unwrap();
        assert_eq!(wave.samples(), &[0.25]);
    }

    #[test]
    fn round_trip_is_exact_to_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let samples: Vec<f32> =
            (0..500).map(|i| ((i * 37 % 101) as f32 / 50.5 - 1.0).clamp(-1.0, 1.0)).collect();
        let wave = Waveform::new(samples.clone(), SAMPLE_RATE).unwrap();
        save_audio(&path, &wave).unwrap();
        let back = load_audio(&path).unwrap();
        assert_eq!(back.len(), wave.len());
        for (a, b) in samples.iter().zip(back.samples()) {
            assert!((a - b).abs() <= 1.0 / 32_768.0, "{a} vs {b}");
        }
    }

    #[test]
    fn full_scale_survives_the_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let wave = Waveform::new(vec![1.0, -1.0], SAMPLE_RATE).unwrap();
        save_audio(&path, &wave).unwrap();
        let back = load_audio(&path).unwrap();
        assert!((back.samples()[0] - 1.0).abs() <= 1.0 / 32_768.0);
        assert_eq!(back.samples()[1], -1.0);
    }
}
