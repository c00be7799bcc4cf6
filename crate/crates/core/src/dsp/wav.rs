//! Mono WAV input/output.

use std::path::Path;

use hound::{SampleFormat, WavSpec};

use crate::error::{Error, Result};

/// Reads a mono 16-bit PCM or 32-bit float file as samples in `[-1, 1]`.
/// The file's rate must equal `expected_rate`.
pub fn read_wav(path: impl AsRef<Path>, expected_rate: u32) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::WavFormat {
            path: path.to_path_buf(),
            detail: format!("{} channels, expected mono", spec.channels),
        });
    }
    if spec.sample_rate != expected_rate {
        return Err(Error::SampleRate {
            path: path.to_path_buf(),
            found: spec.sample_rate,
            expected: expected_rate,
        });
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| Ok(s? as f64 / 32_768.0))
            .collect(),
        (SampleFormat::Float, 32) => reader.samples::<f32>().map(|s| Ok(s? as f64)).collect(),
        (fmt, bits) => Err(Error::WavFormat {
            path: path.to_path_buf(),
            detail: format!("unsupported {bits}-bit {fmt:?} samples"),
        }),
    }
}

/// Writes a mono 32-bit float file.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let spec = WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    for &s in samples {
        writer.write_sample(s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}
