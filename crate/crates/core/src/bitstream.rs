//! `.pism` container: a fixed header followed by self-contained frames.
//!
//! Header (little endian, 40 bytes):
//!
//! | offset | size | field                        |
//! |--------|------|------------------------------|
//! | 0      | 4    | magic `PISM`                 |
//! | 4      | 1    | version (1)                  |
//! | 5      | 1    | number of objects (2..=4)    |
//! | 6      | 1    | number of bands (11)         |
//! | 7      | 1    | downmix PCM bits (16 or 24)  |
//! | 8      | 4    | sample rate (48000)          |
//! | 12     | 24   | 12 band borders, u16 each    |
//! | 36     | 4    | frame count                  |
//!
//! Frame: side information packed MSB first and zero padded to a byte, then
//! 960 interleaved L/R PCM sample pairs, signed little endian.
//! Side information field order: for each band `(first, second)` object index
//! (2 bits each), then each band's ratio index (3 bits), then each object's
//! azimuth (7 bits) and elevation (6 bits) index.

use std::io::{Read, Write};

use crate::downmix::StereoDownmix;
use crate::error::{PismError, Result};
use crate::param::{side_info_bits, BandPartition, FrameSideInfo, NUM_BANDS, OBJECT_INDEX_BITS, RATIO_BITS};
use crate::scene::{QuantizedDirection, SceneConfig, AZIMUTH_BITS, ELEVATION_BITS, FRAME_LEN, SAMPLE_RATE_HZ};

pub const MAGIC: [u8; 4] = *b"PISM";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 40;

/// Sample width of the PCM downmix payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PcmBits {
    Sixteen,
    #[default]
    TwentyFour,
}

impl PcmBits {
    pub fn from_bits(bits: u8) -> Result<Self> {
        match bits {
            16 => Ok(PcmBits::Sixteen),
            24 => Ok(PcmBits::TwentyFour),
            other => Err(PismError::InvalidConfig(format!(
                "unsupported downmix sample width {other}"
            ))),
        }
    }

    pub fn bits(self) -> u8 {
        match self {
            PcmBits::Sixteen => 16,
            PcmBits::TwentyFour => 24,
        }
    }

    pub fn bytes(self) -> usize {
        usize::from(self.bits() / 8)
    }

    fn full_scale(self) -> f64 {
        f64::from(1u32 << (self.bits() - 1))
    }

    /// Rounds to the nearest code, saturating at full scale.
    pub fn to_code(self, sample: f64) -> i32 {
        let fs = self.full_scale();
        let v = if sample.is_finite() { (sample * fs).round() } else { 0.0 };
        v.clamp(-fs, fs - 1.0) as i32
    }

    pub fn from_code(self, code: i32) -> f64 {
        f64::from(code) / self.full_scale()
    }

    /// Value after a trip through the PCM payload.
    pub fn quantize(self, sample: f64) -> f64 {
        self.from_code(self.to_code(sample))
    }
}

/// Per-frame layout shared by packer and unpacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameFormat {
    pub num_objects: usize,
    pub pcm: PcmBits,
}

impl FrameFormat {
    pub fn side_bits(&self) -> usize {
        side_info_bits(self.num_objects, NUM_BANDS)
    }

    pub fn side_bytes(&self) -> usize {
        self.side_bits().div_ceil(8)
    }

    pub fn pcm_bytes(&self) -> usize {
        2 * FRAME_LEN * self.pcm.bytes()
    }

    pub fn frame_bytes(&self) -> usize {
        self.side_bytes() + self.pcm_bytes()
    }
}

/// Side information rate in bit/s.
pub fn side_info_bitrate(num_objects: usize, num_bands: usize, frame_rate_hz: u32) -> u64 {
    side_info_bits(num_objects, num_bands) as u64 * u64::from(frame_rate_hz)
}

struct BitWriter {
    bytes: Vec<u8>,
    bit: usize,
}

impl BitWriter {
    fn with_capacity(bytes: usize) -> Self {
        BitWriter {
            bytes: vec![0; bytes],
            bit: 0,
        }
    }

    fn put(&mut self, value: u32, width: u32) -> Result<()> {
        if value >> width != 0 {
            return Err(PismError::InvalidConfig(format!(
                "value {value} does not fit in {width} bits"
            )));
        }
        for i in (0..width).rev() {
            if (value >> i) & 1 == 1 {
                self.bytes[self.bit / 8] |= 0x80 >> (self.bit % 8);
            }
            self.bit += 1;
        }
        Ok(())
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    bit: usize,
}

impl BitReader<'_> {
    fn get(&mut self, width: u32) -> u32 {
        let mut v = 0;
        for _ in 0..width {
            let b = (self.bytes[self.bit / 8] >> (7 - self.bit % 8)) & 1;
            v = (v << 1) | u32::from(b);
            self.bit += 1;
        }
        v
    }
}

/// Packs side information and downmix into one frame. Samples are rounded to the PCM grid.
pub fn pack_frame(format: &FrameFormat, side: &FrameSideInfo, dmx: &StereoDownmix) -> Result<Vec<u8>> {
    if side.num_objects() != format.num_objects {
        return Err(PismError::ObjectCount {
            expected: format.num_objects,
            actual: side.num_objects(),
        });
    }
    if dmx.left.len() != FRAME_LEN || dmx.right.len() != FRAME_LEN {
        return Err(PismError::FrameLength {
            expected: FRAME_LEN,
            actual: dmx.left.len().min(dmx.right.len()),
        });
    }
    side.validate()?;

    let mut w = BitWriter::with_capacity(format.side_bytes());
    for &(a, b) in &side.dominant {
        w.put(u32::from(a), OBJECT_INDEX_BITS)?;
        w.put(u32::from(b), OBJECT_INDEX_BITS)?;
    }
    for &r in &side.ratio_index {
        w.put(u32::from(r), RATIO_BITS)?;
    }
    for d in &side.directions {
        w.put(u32::from(d.azimuth_index), AZIMUTH_BITS)?;
        w.put(u32::from(d.elevation_index), ELEVATION_BITS)?;
    }
    debug_assert_eq!(w.bit, format.side_bits());

    let mut out = w.bytes;
    out.reserve(format.pcm_bytes());
    let width = format.pcm.bytes();
    for (l, r) in dmx.left.iter().zip(&dmx.right) {
        for s in [l, r] {
            let code = format.pcm.to_code(*s);
            out.extend_from_slice(&code.to_le_bytes()[..width]);
        }
    }
    Ok(out)
}

/// Inverse of [`pack_frame`]. `offset` is the stream position of `bytes`, used in errors.
pub fn unpack_frame(format: &FrameFormat, bytes: &[u8], offset: u64) -> Result<(FrameSideInfo, StereoDownmix)> {
    if bytes.len() < format.frame_bytes() {
        return Err(PismError::Truncated {
            offset: offset + bytes.len() as u64,
            needed: format.frame_bytes() - bytes.len(),
        });
    }
    let mut r = BitReader { bytes, bit: 0 };
    let mut dominant = [(0u8, 0u8); NUM_BANDS];
    for d in dominant.iter_mut() {
        let a = r.get(OBJECT_INDEX_BITS) as u8;
        let b = r.get(OBJECT_INDEX_BITS) as u8;
        *d = (a, b);
    }
    let mut ratio_index = [0u8; NUM_BANDS];
    for v in ratio_index.iter_mut() {
        *v = r.get(RATIO_BITS) as u8;
    }
    let mut directions = Vec::with_capacity(format.num_objects);
    for _ in 0..format.num_objects {
        let az = r.get(AZIMUTH_BITS) as u8;
        let el = r.get(ELEVATION_BITS) as u8;
        directions.push(QuantizedDirection::new(az, el)?);
    }
    let side = FrameSideInfo {
        dominant,
        ratio_index,
        directions,
    };
    side.validate()
        .map_err(|e| PismError::CorruptStream(format!("frame at byte {offset}: {e}")))?;

    let width = format.pcm.bytes();
    let pcm = &bytes[format.side_bytes()..format.frame_bytes()];
    let mut dmx = StereoDownmix::silent();
    for (t, pair) in pcm.chunks_exact(2 * width).enumerate() {
        dmx.left[t] = format.pcm.from_code(read_signed(&pair[..width]));
        dmx.right[t] = format.pcm.from_code(read_signed(&pair[width..]));
    }
    Ok((side, dmx))
}

fn read_signed(le: &[u8]) -> i32 {
    let mut buf = [0u8; 4];
    buf[..le.len()].copy_from_slice(le);
    let shift = 32 - 8 * le.len() as u32;
    (i32::from_le_bytes(buf) << shift) >> shift
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamHeader {
    pub config: SceneConfig,
    pub bands: BandPartition,
    pub pcm: PcmBits,
    pub frame_count: u32,
}

impl StreamHeader {
    pub fn frame_format(&self) -> FrameFormat {
        FrameFormat {
            num_objects: self.config.num_objects(),
            pcm: self.pcm,
        }
    }

    /// Total stream size in bytes.
    pub fn stream_len(&self) -> u64 {
        HEADER_LEN as u64 + u64::from(self.frame_count) * self.frame_format().frame_bytes() as u64
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..4].copy_from_slice(&MAGIC);
        out[4] = VERSION;
        out[5] = self.config.num_objects() as u8;
        out[6] = NUM_BANDS as u8;
        out[7] = self.pcm.bits();
        out[8..12].copy_from_slice(&SAMPLE_RATE_HZ.to_le_bytes());
        for (i, b) in self.bands.borders().iter().enumerate() {
            out[12 + 2 * i..14 + 2 * i].copy_from_slice(&b.to_le_bytes());
        }
        out[36..40].copy_from_slice(&self.frame_count.to_le_bytes());
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(PismError::Truncated {
                offset: bytes.len() as u64,
                needed: HEADER_LEN - bytes.len(),
            });
        }
        if bytes[..4] != MAGIC {
            return Err(PismError::CorruptStream("bad magic, not a .pism stream".into()));
        }
        if bytes[4] != VERSION {
            return Err(PismError::CorruptStream(format!("unsupported version {}", bytes[4])));
        }
        let config = SceneConfig::new(usize::from(bytes[5])).map_err(|e| PismError::CorruptStream(e.to_string()))?;
        if usize::from(bytes[6]) != NUM_BANDS {
            return Err(PismError::CorruptStream(format!(
                "expected {NUM_BANDS} bands, header says {}",
                bytes[6]
            )));
        }
        let pcm = PcmBits::from_bits(bytes[7]).map_err(|e| PismError::CorruptStream(e.to_string()))?;
        let rate = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if rate != SAMPLE_RATE_HZ {
            return Err(PismError::CorruptStream(format!("unsupported sample rate {rate}")));
        }
        let mut borders = [0u16; NUM_BANDS + 1];
        for (i, b) in borders.iter_mut().enumerate() {
            *b = u16::from_le_bytes([bytes[12 + 2 * i], bytes[13 + 2 * i]]);
        }
        let bands = BandPartition::new(borders).map_err(|e| PismError::CorruptStream(e.to_string()))?;
        let frame_count = u32::from_le_bytes(bytes[36..40].try_into().unwrap());
        Ok(StreamHeader {
            config,
            bands,
            pcm,
            frame_count,
        })
    }

    pub fn read_from<R: Read>(reader: &mut R) -> Result<Self> {
        let mut buf = [0u8; HEADER_LEN];
        let got = read_full(reader, &mut buf)?;
        Self::parse(&buf[..got])
    }
}

fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match reader.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(got)
}

/// Writes a header and exactly `frame_count` frames.
pub struct StreamWriter<W: Write> {
    inner: W,
    header: StreamHeader,
    written: u32,
}

impl<W: Write> StreamWriter<W> {
    pub fn new(mut inner: W, header: StreamHeader) -> Result<Self> {
        inner.write_all(&header.to_bytes())?;
        Ok(StreamWriter {
            inner,
            header,
            written: 0,
        })
    }

    pub fn write_frame(&mut self, side: &FrameSideInfo, dmx: &StereoDownmix) -> Result<()> {
        if self.written >= self.header.frame_count {
            return Err(PismError::InvalidConfig(format!(
                "header announced {} frames",
                self.header.frame_count
            )));
        }
        let bytes = pack_frame(&self.header.frame_format(), side, dmx)?;
        self.inner.write_all(&bytes)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.frame_count {
            return Err(PismError::InvalidConfig(format!(
                "wrote {} of {} announced frames",
                self.written, self.header.frame_count
            )));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Sequential frame reader.
pub struct StreamReader<R: Read> {
    inner: R,
    header: StreamHeader,
    frames_read: u32,
    offset: u64,
    buf: Vec<u8>,
}

impl<R: Read> StreamReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let header = StreamHeader::read_from(&mut inner)?;
        let frame_bytes = header.frame_format().frame_bytes();
        Ok(StreamReader {
            inner,
            header,
            frames_read: 0,
            offset: HEADER_LEN as u64,
            buf: vec![0; frame_bytes],
        })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    pub fn next_frame(&mut self) -> Result<Option<(FrameSideInfo, StereoDownmix)>> {
        if self.frames_read >= self.header.frame_count {
            return Ok(None);
        }
        let got = read_full(&mut self.inner, &mut self.buf)?;
        let frame = unpack_frame(&self.header.frame_format(), &self.buf[..got], self.offset)?;
        self.offset += got as u64;
        self.frames_read += 1;
        Ok(Some(frame))
    }
}
