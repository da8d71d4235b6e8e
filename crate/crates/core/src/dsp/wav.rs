//! WAV ingestion and output: 16-bit PCM, mono, 16 kHz only.

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use super::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

fn check_spec(spec: &WavSpec) -> Result<()> {
    if spec.channels != 1 {
        return Err(Error::Format(format!(
            "expected mono audio, found {} channels",
            spec.channels
        )));
    }
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(Error::Format(format!(
            "expected 16-bit integer PCM, found {}-bit {:?}",
            spec.bits_per_sample, spec.sample_format
        )));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::SampleRate {
            expected: SAMPLE_RATE,
            actual: spec.sample_rate,
        });
    }
    Ok(())
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    check_spec(&spec)?;
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / 32768.0))
        .collect::<Result<Vec<_>, _>>()?;
    Waveform::new(samples, spec.sample_rate)
}

/// Encode to 16-bit PCM, clipping to the representable range.
pub fn encode_wav(w: &Waveform) -> Result<Vec<u8>> {
    if w.sample_rate() != SAMPLE_RATE {
        return Err(Error::SampleRate {
            expected: SAMPLE_RATE,
            actual: w.sample_rate(),
        });
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut cursor = std::io::Cursor::new(Vec::new());
    {
        let mut writer = hound::WavWriter::new(&mut cursor, spec)?;
        for &s in w.samples() {
            let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
            writer.write_sample(v)?;
        }
        writer.finalize()?;
    }
    Ok(cursor.into_inner())
}

pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    std::fs::write(path, encode_wav(w)?)?;
    Ok(())
}
