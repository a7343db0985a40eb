//! 16-bit PCM WAV output at the engine sample rate.
//!
//! Quantization rounds to the nearest code with no dither, so identical
//! buffers always encode to identical bytes.

use std::io::{Cursor, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::dsp::StereoBuffer;
use crate::error::{Error, Result};
use crate::model::{AudioClip, SAMPLE_RATE};

const FULL_SCALE: f64 = 32767.0;

fn spec(channels: u16) -> WavSpec {
    WavSpec {
        channels,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    }
}

/// Maps [-1, 1] onto the 16-bit range, clamping out-of-range input.
pub fn quantize(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * FULL_SCALE).round() as i16
}

pub fn dequantize(v: i16) -> f64 {
    f64::from(v) / FULL_SCALE
}

fn write_stereo<W: Write + Seek>(buffer: &StereoBuffer, out: W) -> Result<()> {
    let mut w = WavWriter::new(out, spec(2))?;
    for (l, r) in buffer.left.iter().zip(&buffer.right) {
        w.write_sample(quantize(*l))?;
        w.write_sample(quantize(*r))?;
    }
    w.finalize()?;
    Ok(())
}

/// Stereo WAV file contents for `buffer`.
pub fn wav_bytes(buffer: &StereoBuffer) -> Result<Vec<u8>> {
    let mut cursor = Cursor::new(Vec::new());
    write_stereo(buffer, &mut cursor)?;
    Ok(cursor.into_inner())
}

pub fn write_wav(buffer: &StereoBuffer, path: &Path) -> Result<()> {
    std::fs::write(path, wav_bytes(buffer)?)?;
    Ok(())
}

/// Writes a clip at its own channel count.
pub fn write_clip_wav(clip: &AudioClip, path: &Path) -> Result<()> {
    let mut w = WavWriter::create(path, spec(clip.channels))?;
    for s in &clip.samples {
        w.write_sample(quantize(*s))?;
    }
    w.finalize()?;
    Ok(())
}

fn read_samples(path: &Path) -> Result<(u16, Vec<f64>)> {
    let mut reader = WavReader::open(path)?;
    let s = reader.spec();
    if s.sample_rate != SAMPLE_RATE {
        return Err(Error::Schema {
            path: path.display().to_string(),
            message: format!("sample rate {} Hz, expected {SAMPLE_RATE} Hz", s.sample_rate),
        });
    }
    if s.channels == 0 || s.channels > 2 {
        return Err(Error::Schema {
            path: path.display().to_string(),
            message: format!("{} channels, expected 1 or 2", s.channels),
        });
    }
    let samples: Vec<f64> = match (s.sample_format, s.bits_per_sample) {
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|v| v.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>()?,
        (SampleFormat::Int, bits) => {
            let scale = f64::from(1u32 << (bits - 1));
            reader
                .samples::<i32>()
                .map(|v| v.map(|v| f64::from(v) / scale))
                .collect::<Result<_, _>>()?
        }
        (SampleFormat::Float, _) => reader
            .samples::<f32>()
            .map(|v| v.map(|v| f64::from(v).clamp(-1.0, 1.0)))
            .collect::<Result<_, _>>()?,
    };
    Ok((s.channels, samples))
}

/// Reads a stereo file written by [`write_wav`].
pub fn read_wav(path: &Path) -> Result<StereoBuffer> {
    let mut reader = WavReader::open(path)?;
    if reader.spec().channels != 2 || reader.spec().bits_per_sample != 16 {
        return Err(Error::Schema {
            path: path.display().to_string(),
            message: "expected 16-bit stereo".into(),
        });
    }
    let mut out = StereoBuffer::default();
    let samples: Vec<i16> = reader.samples::<i16>().collect::<Result<_, _>>()?;
    for frame in samples.chunks_exact(2) {
        out.left.push(dequantize(frame[0]));
        out.right.push(dequantize(frame[1]));
    }
    Ok(out)
}

/// Loads a user-supplied clip (mono or stereo, 48 kHz).
pub fn read_clip(path: &Path, id: &str) -> Result<AudioClip> {
    let (channels, samples) = read_samples(path)?;
    let clip = AudioClip {
        id: id.into(),
        channels,
        samples,
    };
    clip.check().map_err(|message| Error::Schema {
        path: path.display().to_string(),
        message,
    })?;
    Ok(clip)
}
