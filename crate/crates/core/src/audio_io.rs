//! PCM audio in memory and on disk.
//!
//! Only RIFF/WAVE is understood: 16-bit integer PCM (format tag 1) and
//! 32-bit IEEE float (format tag 3), plus the extensible wrapper around
//! either. Files are written with the canonical 44-byte header.

use std::fs;
use std::path::Path;

use crate::{Error, Real, Result};

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Interleaved samples (channel-major frames) with their sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<T> {
    samples: Vec<T>,
    sample_rate: u32,
    channels: u16,
}

impl<T: Real> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32, channels: u16) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidBuffer("sample rate must be positive".into()));
        }
        if channels == 0 {
            return Err(Error::InvalidBuffer("at least one channel required".into()));
        }
        if samples.len() % channels as usize != 0 {
            return Err(Error::InvalidBuffer(format!(
                "{} samples do not divide into {} channels",
                samples.len(),
                channels
            )));
        }
        Ok(Self {
            samples,
            sample_rate,
            channels,
        })
    }

    pub fn mono(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        Self::new(samples, sample_rate, 1)
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> u16 {
        self.channels
    }

    pub fn is_mono(&self) -> bool {
        self.channels == 1
    }

    /// Number of frames (samples per channel).
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels as usize
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    /// Same rate and layout, new sample values. The length must keep the
    /// channel layout valid.
    pub fn with_samples(&self, samples: Vec<T>) -> Result<Self> {
        Self::new(samples, self.sample_rate, self.channels)
    }

    pub(crate) fn require_mono(&self, op: &str) -> Result<()> {
        if self.channels != 1 {
            return Err(Error::InvalidBuffer(format!(
                "{op} needs a mono buffer, got {} channels",
                self.channels
            )));
        }
        Ok(())
    }
}

/// On-disk sample encoding for [`save_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BitDepth {
    Int16,
    Float32,
}

/// Fields of the `fmt ` chunk plus the size of the `data` chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub format_tag: u16,
    pub channels: u16,
    pub sample_rate: u32,
    pub bits_per_sample: u16,
    pub data_bytes: u32,
}

impl WavInfo {
    pub fn frames(&self) -> u64 {
        let frame_bytes = self.channels as u64 * self.bits_per_sample as u64 / 8;
        if frame_bytes == 0 {
            0
        } else {
            self.data_bytes as u64 / frame_bytes
        }
    }

    pub fn duration_secs(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }
}

fn read_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn read_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Walks the chunk list and returns the format description together with
/// the byte range of the sample data.
fn parse_chunks(bytes: &[u8], path: &Path) -> Result<(WavInfo, std::ops::Range<usize>)> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::NotRiff(path.to_path_buf()));
    }
    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<std::ops::Range<usize>> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        let end = body.saturating_add(size).min(bytes.len());
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(Error::MalformedWav("fmt chunk too short".into()));
                }
                let mut tag = read_u16(bytes, body);
                let channels = read_u16(bytes, body + 2);
                let rate = read_u32(bytes, body + 4);
                let bits = read_u16(bytes, body + 14);
                if tag == FORMAT_EXTENSIBLE {
                    // sub-format GUID starts 24 bytes into the chunk; its first
                    // two bytes carry the plain format tag
                    if size < 40 || body + 26 > bytes.len() {
                        return Err(Error::MalformedWav("extensible fmt chunk too short".into()));
                    }
                    tag = read_u16(bytes, body + 24);
                }
                fmt = Some((tag, channels, rate, bits));
            }
            b"data" => {
                data = Some(body..end);
            }
            _ => {}
        }
        // chunks are padded to even sizes
        pos = body.saturating_add(size + (size & 1));
    }
    let (format_tag, channels, sample_rate, bits_per_sample) =
        fmt.ok_or_else(|| Error::MalformedWav("missing fmt chunk".into()))?;
    let data = data.ok_or_else(|| Error::MalformedWav("missing data chunk".into()))?;
    match (format_tag, bits_per_sample) {
        (FORMAT_PCM, 16) | (FORMAT_IEEE_FLOAT, 32) => {}
        (FORMAT_PCM, b) => {
            return Err(Error::UnsupportedCodec(format!("{b}-bit integer PCM")));
        }
        (FORMAT_IEEE_FLOAT, b) => {
            return Err(Error::UnsupportedCodec(format!("{b}-bit float PCM")));
        }
        (tag, _) => {
            return Err(Error::UnsupportedCodec(format!(
                "compressed or unknown format tag {tag:#06x}"
            )));
        }
    }
    if channels == 0 || sample_rate == 0 {
        return Err(Error::MalformedWav("zero channels or sample rate".into()));
    }
    let info = WavInfo {
        format_tag,
        channels,
        sample_rate,
        bits_per_sample,
        data_bytes: (data.end - data.start) as u32,
    };
    Ok((info, data))
}

/// Reads only the header fields of an in-memory WAV file.
pub fn wav_info(bytes: &[u8]) -> Result<WavInfo> {
    parse_chunks(bytes, Path::new("<memory>")).map(|(info, _)| info)
}

/// Decodes an in-memory WAV file. `path` is used for diagnostics only.
pub fn decode_wav<T: Real>(bytes: &[u8], path: &Path) -> Result<AudioBuffer<T>> {
    let (info, data) = parse_chunks(bytes, path)?;
    let payload = &bytes[data];
    let frame_bytes = info.channels as usize * info.bits_per_sample as usize / 8;
    // trailing partial frames are ignored
    let usable = payload.len() - payload.len() % frame_bytes;
    let payload = &payload[..usable];
    let samples: Vec<T> = match info.format_tag {
        FORMAT_PCM => payload
            .chunks_exact(2)
            .map(|c| T::lit(i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0))
            .collect(),
        _ => payload
            .chunks_exact(4)
            .map(|c| T::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect(),
    };
    AudioBuffer::new(samples, info.sample_rate, info.channels)
}

pub fn load_wav<T: Real>(path: impl AsRef<Path>) -> Result<AudioBuffer<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_wav(&bytes, path)
}

fn to_i16(x: f64) -> i16 {
    if x.is_nan() {
        return 0;
    }
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Encodes a buffer as a canonical 44-byte-header WAV file.
pub fn encode_wav<T: Real>(buffer: &AudioBuffer<T>, depth: BitDepth) -> Result<Vec<u8>> {
    if buffer.is_empty() {
        return Err(Error::InvalidBuffer("refusing to write an empty buffer".into()));
    }
    let (tag, bits) = match depth {
        BitDepth::Int16 => (FORMAT_PCM, 16u16),
        BitDepth::Float32 => (FORMAT_IEEE_FLOAT, 32u16),
    };
    let block_align = buffer.channels() as u32 * bits as u32 / 8;
    let data_bytes = buffer.len() as u64 * bits as u64 / 8;
    if data_bytes > (u32::MAX - 36) as u64 {
        return Err(Error::InvalidBuffer("buffer too large for a RIFF file".into()));
    }
    let data_bytes = data_bytes as u32;
    let mut out = Vec::with_capacity(44 + data_bytes as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_bytes).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&tag.to_le_bytes());
    out.extend_from_slice(&buffer.channels().to_le_bytes());
    out.extend_from_slice(&buffer.sample_rate().to_le_bytes());
    out.extend_from_slice(&(buffer.sample_rate() * block_align).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_bytes.to_le_bytes());
    match depth {
        BitDepth::Int16 => {
            for &s in buffer.samples() {
                out.extend_from_slice(&to_i16(s.as_f64()).to_le_bytes());
            }
        }
        BitDepth::Float32 => {
            for &s in buffer.samples() {
                out.extend_from_slice(&(s.as_f64() as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn save_wav<T: Real>(buffer: &AudioBuffer<T>, path: impl AsRef<Path>, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_wav(buffer, depth)?;
    fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Averages the channels of every frame. Mono input is returned unchanged.
pub fn downmix_to_mono<T: Real>(buffer: &AudioBuffer<T>) -> AudioBuffer<T> {
    if buffer.is_mono() {
        return buffer.clone();
    }
    let ch = buffer.channels() as usize;
    let scale = T::one() / T::from_usize_lossy(ch);
    let samples = buffer
        .samples()
        .chunks_exact(ch)
        .map(|frame| frame.iter().copied().sum::<T>() * scale)
        .collect();
    AudioBuffer {
        samples,
        sample_rate: buffer.sample_rate(),
        channels: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_layouts() {
        assert!(AudioBuffer::<f32>::new(vec![0.0; 3], 22050, 2).is_err());
        assert!(AudioBuffer::<f32>::new(vec![0.0; 4], 0, 2).is_err());
        assert!(AudioBuffer::<f32>::new(vec![0.0; 4], 8000, 0).is_err());
    }

    #[test]
    fn int16_full_scale_maps_below_one() {
        let buf = AudioBuffer::<f64>::mono(vec![32767.0 / 32768.0, -1.0], 8000).unwrap();
        let bytes = encode_wav(&buf, BitDepth::Int16).unwrap();
        assert_eq!(&bytes[44..46], &32767i16.to_le_bytes());
        assert_eq!(&bytes[46..48], &(-32768i16).to_le_bytes());
        let back: AudioBuffer<f64> = decode_wav(&bytes, Path::new("x")).unwrap();
        assert_eq!(back.samples()[0], 32767.0 / 32768.0);
        assert!((back.samples()[0] - 0.99997).abs() < 1e-5);
    }

    #[test]
    fn int16_saturates() {
        let buf = AudioBuffer::<f32>::mono(vec![1.5, -3.0], 8000).unwrap();
        let bytes = encode_wav(&buf, BitDepth::Int16).unwrap();
        let back: AudioBuffer<f32> = decode_wav(&bytes, Path::new("x")).unwrap();
        assert_eq!(back.samples(), &[32767.0 / 32768.0, -1.0]);
    }

    #[test]
    fn header_is_canonical() {
        let buf = AudioBuffer::<f32>::mono(vec![0.0; 110250], 22050).unwrap();
        let bytes = encode_wav(&buf, BitDepth::Int16).unwrap();
        assert_eq!(bytes.len(), 44 + 2 * 110250);
        let info = wav_info(&bytes).unwrap();
        assert_eq!(info.sample_rate, 22050);
        assert_eq!(info.channels, 1);
        // duration recomputed from byte rate fields
        let byte_rate = read_u32(&bytes, 28) as f64;
        let data_len = read_u32(&bytes, 40) as f64;
        assert_eq!(data_len / byte_rate, 5.0);
        assert_eq!(info.duration_secs(), 5.0);
    }

    #[test]
    fn empty_buffer_not_written() {
        let buf = AudioBuffer::<f32>::mono(vec![], 8000).unwrap();
        assert!(matches!(encode_wav(&buf, BitDepth::Float32), Err(Error::InvalidBuffer(_))));
    }

    #[test]
    fn distinct_diagnostics() {
        let missing = load_wav::<f32>("/definitely/not/here.wav");
        assert!(matches!(missing, Err(Error::Io { .. })));

        let not_riff = decode_wav::<f32>(b"ID3\x03 not a wave file at all", Path::new("a.mp3"));
        assert!(matches!(not_riff, Err(Error::NotRiff(_))));

        let buf = AudioBuffer::<f32>::mono(vec![0.1; 8], 8000).unwrap();
        let mut bytes = encode_wav(&buf, BitDepth::Int16).unwrap();
        // format tag 0x0055 is MPEG layer 3
        bytes[20..22].copy_from_slice(&0x0055u16.to_le_bytes());
        let codec = decode_wav::<f32>(&bytes, Path::new("b.wav"));
        assert!(matches!(codec, Err(Error::UnsupportedCodec(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let buf = AudioBuffer::<f32>::new(vec![0.25, -0.25, 0.5, -0.5], 16000, 2).unwrap();
        let plain = encode_wav(&buf, BitDepth::Float32).unwrap();
        let mut bytes = plain[..36].to_vec();
        bytes.extend_from_slice(b"LIST");
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(b"abc\0");
        bytes.extend_from_slice(&plain[36..]);
        let back: AudioBuffer<f32> = decode_wav(&bytes, Path::new("c.wav")).unwrap();
        assert_eq!(back, buf);
    }

    #[test]
    fn downmix_means() {
        let st = AudioBuffer::<f64>::new(vec![1.0, -1.0, 0.5, 0.1], 22050, 2).unwrap();
        let m = downmix_to_mono(&st);
        assert_eq!(m.channels(), 1);
        assert_eq!(m.sample_rate(), 22050);
        assert_eq!(m.samples()[0], 0.0);
        assert!((m.samples()[1] - 0.3).abs() < 1e-15);
        let mono = AudioBuffer::<f64>::mono(vec![0.2, 0.4], 22050).unwrap();
        assert_eq!(downmix_to_mono(&mono), mono);
    }
}
