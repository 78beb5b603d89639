//! Minimal RIFF/WAVE PCM16 reader and writer.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Decoded audio: channel 0 only, scaled to `[-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavAudio {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
    pub channels: u16,
}

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_u16(buf: &[u8], at: usize) -> Result<u16> {
    buf.get(at..at + 2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .ok_or_else(|| format_err(at, "unexpected end of file"))
}

fn read_u32(buf: &[u8], at: usize) -> Result<u32> {
    buf.get(at..at + 4)
        .map(|b| u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| format_err(at, "unexpected end of file"))
}

struct Format {
    channels: u16,
    sample_rate: u32,
    block_align: u16,
}

fn parse_fmt(buf: &[u8], at: usize, size: usize) -> Result<Format> {
    if size < 16 {
        return Err(format_err(
            at,
            format!("fmt chunk too short ({size} bytes)"),
        ));
    }
    let mut tag = read_u16(buf, at)?;
    let channels = read_u16(buf, at + 2)?;
    let sample_rate = read_u32(buf, at + 4)?;
    let block_align = read_u16(buf, at + 12)?;
    let bits = read_u16(buf, at + 14)?;
    if tag == FORMAT_EXTENSIBLE {
        if size < 40 {
            return Err(format_err(at, "extensible fmt chunk too short"));
        }
        // First two bytes of the sub-format GUID carry the format tag.
        tag = read_u16(buf, at + 24)?;
    }
    if tag != FORMAT_PCM {
        return Err(format_err(
            at,
            format!("unsupported codec (format tag {tag:#06x})"),
        ));
    }
    if bits != 16 {
        return Err(format_err(at + 14, format!("unsupported bit depth {bits}")));
    }
    if channels == 0 {
        return Err(format_err(at + 2, "zero channels"));
    }
    if block_align != 2 * channels {
        return Err(format_err(
            at + 12,
            format!("block align {block_align} does not match {channels} 16-bit channels"),
        ));
    }
    Ok(Format {
        channels,
        sample_rate,
        block_align,
    })
}

/// Parses an in-memory WAV file.
pub fn parse_wav(buf: &[u8]) -> Result<WavAudio> {
    if buf.get(0..4) != Some(b"RIFF") {
        return Err(format_err(0, "missing RIFF tag"));
    }
    if buf.get(8..12) != Some(b"WAVE") {
        return Err(format_err(8, "missing WAVE tag"));
    }
    let mut at = 12;
    let mut format = None;
    while at + 8 <= buf.len() {
        let id = &buf[at..at + 4];
        let size = read_u32(buf, at + 4)? as usize;
        let body = at + 8;
        match id {
            b"fmt " => format = Some(parse_fmt(buf, body, size)?),
            b"data" => {
                let fmt = format
                    .as_ref()
                    .ok_or_else(|| format_err(at, "data chunk before fmt chunk"))?;
                // Tolerate truncated data chunks by reading whole frames only.
                let end = (body + size).min(buf.len());
                let frame = fmt.block_align as usize;
                let samples = buf[body..end]
                    .chunks_exact(frame)
                    .map(|f| f64::from(i16::from_le_bytes([f[0], f[1]])) / 32768.0)
                    .collect();
                return Ok(WavAudio {
                    samples,
                    sample_rate: fmt.sample_rate,
                    channels: fmt.channels,
                });
            }
            _ => {}
        }
        // Chunks are word-aligned.
        at = body + size + (size & 1);
    }
    Err(format_err(buf.len(), "no data chunk"))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<WavAudio> {
    parse_wav(&fs::read(path)?)
}

fn quantize(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Encodes interleaved frames (`channels` samples each) as PCM16.
pub fn encode_wav(frames: &[Vec<f64>], sample_rate: u32) -> Result<Vec<u8>> {
    let channels = frames.first().map_or(1, Vec::len);
    if channels == 0 || channels > u16::MAX as usize || frames.iter().any(|f| f.len() != channels) {
        return Err(Error::InvalidInput(
            "frames must share a non-zero channel count".into(),
        ));
    }
    let data_len = frames.len() * channels * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&((36 + data_len) as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&(channels as u16).to_le_bytes());
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2 * channels as u32).to_le_bytes());
    out.extend_from_slice(&(2 * channels as u16).to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for frame in frames {
        for &s in frame {
            out.extend_from_slice(&quantize(s).to_le_bytes());
        }
    }
    Ok(out)
}

/// Writes a mono PCM16 file.
pub fn write_wav(path: impl AsRef<Path>, samples: &[f64], sample_rate: u32) -> Result<()> {
    let frames: Vec<Vec<f64>> = samples.iter().map(|&s| vec![s]).collect();
    fs::write(path, encode_wav(&frames, sample_rate)?)?;
    Ok(())
}
