use std::io::{ErrorKind, Read};

use super::{bytes_per_sample, AudioError, AudioFrame};
use crate::config::RawInputConfig;

/// Decode one little-endian signed sample and normalize by 2^(bits-1).
pub fn decode_sample(bytes: &[u8], bits: u32) -> f64 {
    let v: i64 = match bits {
        8 => bytes[0] as i8 as i64,
        16 => i16::from_le_bytes([bytes[0], bytes[1]]) as i64,
        24 => ((i32::from_le_bytes([0, bytes[0], bytes[1], bytes[2]])) >> 8) as i64,
        32 => i32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as i64,
        _ => unreachable!("bit depth validated by caller"),
    };
    v as f64 / (1u64 << (bits - 1)) as f64
}

/// Quantize one sample, saturating outside [-1, 1), and append it
/// little-endian to `out`.
pub fn encode_sample(x: f64, bits: u32, out: &mut Vec<u8>) {
    let full = (1i64 << (bits - 1)) as f64;
    let x = if x.is_nan() { 0.0 } else { x.clamp(-1.0, 1.0) };
    let q = (x * full).round().clamp(-full, full - 1.0) as i64;
    let le = q.to_le_bytes();
    out.extend_from_slice(&le[..bits as usize / 8]);
}

/// Streaming RAW decoder: reads `hop_size_samples` interleaved sample frames
/// at a time and keeps the mapped channels in mapping order. A trailing
/// partial block is discarded.
pub struct RawDecoder<R> {
    reader: R,
    bits: u32,
    n_channels: usize,
    hop: usize,
    fs_hz: u32,
    mapping: Vec<usize>,
    buf: Vec<u8>,
    next_index: u64,
    done: bool,
}

impl<R: Read> RawDecoder<R> {
    pub fn new(reader: R, raw: &RawInputConfig, mapping: &[usize]) -> Result<Self, AudioError> {
        let bps = bytes_per_sample(raw.bits_per_sample)?;
        if let Some(&channel) = mapping.iter().find(|&&c| c >= raw.n_channels) {
            return Err(AudioError::BadMapping {
                channel,
                n_channels: raw.n_channels,
            });
        }
        Ok(Self {
            reader,
            bits: raw.bits_per_sample,
            n_channels: raw.n_channels,
            hop: raw.hop_size_samples,
            fs_hz: raw.sample_rate_hz,
            mapping: mapping.to_vec(),
            buf: vec![0; bps * raw.n_channels * raw.hop_size_samples],
            next_index: 0,
            done: false,
        })
    }

    /// Fill the block buffer; returns false at end of stream.
    fn fill(&mut self) -> Result<bool, AudioError> {
        let mut filled = 0;
        while filled < self.buf.len() {
            match self.reader.read(&mut self.buf[filled..]) {
                Ok(0) => return Ok(false),
                Ok(n) => filled += n,
                Err(e) if e.kind() == ErrorKind::Interrupted => {}
                Err(source) => {
                    return Err(AudioError::Io {
                        frames: self.next_index,
                        source,
                    })
                }
            }
        }
        Ok(true)
    }
}

impl<R: Read> Iterator for RawDecoder<R> {
    type Item = Result<AudioFrame, AudioError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.fill() {
            Ok(true) => {}
            Ok(false) => {
                self.done = true;
                return None;
            }
            Err(e) => {
                self.done = true;
                return Some(Err(e));
            }
        }
        let bps = self.bits as usize / 8;
        let stride = bps * self.n_channels;
        let samples = self
            .mapping
            .iter()
            .map(|&ch| {
                (0..self.hop)
                    .map(|n| {
                        let at = n * stride + ch * bps;
                        decode_sample(&self.buf[at..at + bps], self.bits)
                    })
                    .collect()
            })
            .collect();
        let frame = AudioFrame {
            frame_index: self.next_index,
            fs_hz: self.fs_hz,
            samples,
        };
        self.next_index += 1;
        Some(Ok(frame))
    }
}

/// Decode an in-memory RAW buffer into hop-sized frames.
pub fn decode_raw(bytes: &[u8], raw: &RawInputConfig, mapping: &[usize]) -> Result<Vec<AudioFrame>, AudioError> {
    RawDecoder::new(bytes, raw, mapping)?.collect()
}

/// Interleave and quantize frames to little-endian signed PCM.
pub fn encode_raw(frames: &[AudioFrame], bits: u32) -> Result<Vec<u8>, AudioError> {
    let bps = bytes_per_sample(bits)?;
    let total: usize = frames.iter().map(|f| f.len() * f.n_channels()).sum();
    let mut out = Vec::with_capacity(total * bps);
    for frame in frames {
        for n in 0..frame.len() {
            for ch in &frame.samples {
                encode_sample(ch[n], bits, &mut out);
            }
        }
    }
    Ok(out)
}
