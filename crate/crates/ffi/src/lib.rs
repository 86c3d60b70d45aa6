//! C ABI for the pism codec.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Every fallible call returns a [`PismStatus`];
//! the message of the last failure on the calling thread is available from
//! [`pism_last_error_message`]. Audio is 32-bit float, planar, one frame of
//! [`PISM_FRAME_LEN`] samples per channel.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use pism_core::bitstream::{pack_frame, side_info_bitrate, unpack_frame, FrameFormat, PcmBits};
use pism_core::codec::{Decoder, DecoderSettings, Encoder};
use pism_core::downmix::Compensation;
use pism_core::error::PismError;
use pism_core::filterbank::DECODER_LATENCY;
use pism_core::param::{BandPartition, NUM_BANDS};
use pism_core::render::{LayoutName, SpeakerLayout};
use pism_core::scene::{Direction, SceneConfig, FRAME_LEN, FRAME_RATE_HZ};

/// Samples per channel in one frame.
pub const PISM_FRAME_LEN: usize = 960;
/// Number of band borders passed to the constructors.
pub const PISM_NUM_BAND_BORDERS: usize = 12;

const _: () = assert!(PISM_FRAME_LEN == FRAME_LEN && PISM_NUM_BAND_BORDERS == NUM_BANDS + 1);

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PismStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    CorruptFrame = 4,
    Internal = 5,
}

/// Output loudspeaker layout.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PismLayout {
    Surround5_1 = 0,
    Surround5_1_4 = 1,
    Surround7_1 = 2,
    Surround7_1_4 = 3,
}

impl From<PismLayout> for LayoutName {
    fn from(l: PismLayout) -> Self {
        match l {
            PismLayout::Surround5_1 => LayoutName::Surround5_1,
            PismLayout::Surround5_1_4 => LayoutName::Surround5_1_4,
            PismLayout::Surround7_1 => LayoutName::Surround7_1,
            PismLayout::Surround7_1_4 => LayoutName::Surround7_1_4,
        }
    }
}

/// How the encoder restores downmix energy lost to the dominant-pair model.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PismCompensation {
    TotalPower = 0,
    DominantPair = 1,
}

/// Opaque encoder handle.
pub struct PismEncoder {
    inner: Encoder,
    format: FrameFormat,
    frame: Vec<f64>,
}

/// Opaque decoder handle.
pub struct PismDecoder {
    inner: Decoder,
    format: FrameFormat,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: PismStatus, msg: impl Into<String>) -> PismStatus {
    set_error(msg);
    status
}

fn core_status(e: &PismError) -> PismStatus {
    match e {
        PismError::CorruptStream(_) | PismError::Truncated { .. } => PismStatus::CorruptFrame,
        PismError::Io(_) | PismError::Wav(_) => PismStatus::Internal,
        _ => PismStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (PismStatus, String)>) -> PismStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PismStatus::Ok,
        Ok(Err((status, msg))) => fail(status, msg),
        Err(_) => fail(PismStatus::Internal, "internal panic"),
    }
}

fn from_core(e: PismError) -> (PismStatus, String) {
    (core_status(&e), e.to_string())
}

fn null(what: &str) -> (PismStatus, String) {
    (PismStatus::NullPointer, format!("{what} is null"))
}

/// Band partition from an optional borders array.
unsafe fn bands_from(borders: *const u16) -> Result<BandPartition, (PismStatus, String)> {
    if borders.is_null() {
        return Ok(BandPartition::default());
    }
    BandPartition::from_slice(slice::from_raw_parts(borders, PISM_NUM_BAND_BORDERS)).map_err(from_core)
}

fn frame_format(num_objects: u32, downmix_bits: u32) -> Result<FrameFormat, (PismStatus, String)> {
    let config = SceneConfig::new(num_objects as usize).map_err(from_core)?;
    let bits = u8::try_from(downmix_bits).map_err(|_| {
        (
            PismStatus::InvalidArgument,
            format!("unsupported PCM width {downmix_bits}"),
        )
    })?;
    Ok(FrameFormat {
        num_objects: config.num_objects(),
        pcm: PcmBits::from_bits(bits).map_err(from_core)?,
    })
}

/// Copies the last error message of this thread into `buf` as a NUL-terminated
/// string, truncating if needed. Returns the full message length excluding the
/// terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn pism_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else { return 0 };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Samples per channel in one frame.
#[no_mangle]
pub extern "C" fn pism_frame_length() -> usize {
    FRAME_LEN
}

/// Decoder filterbank delay in samples.
#[no_mangle]
pub extern "C" fn pism_decoder_latency() -> usize {
    DECODER_LATENCY
}

/// Side information rate in bit/s, or 0 for an unsupported object count.
#[no_mangle]
pub extern "C" fn pism_side_info_bitrate(num_objects: u32) -> u64 {
    match SceneConfig::new(num_objects as usize) {
        Ok(_) => side_info_bitrate(num_objects as usize, NUM_BANDS, FRAME_RATE_HZ),
        Err(_) => 0,
    }
}

/// Size of one packed frame in bytes, or 0 for an unsupported configuration.
#[no_mangle]
pub extern "C" fn pism_frame_bytes(num_objects: u32, downmix_bits: u32) -> usize {
    frame_format(num_objects, downmix_bits).map_or(0, |f| f.frame_bytes())
}

/// Output channels of a layout, LFE included.
#[no_mangle]
pub extern "C" fn pism_layout_channel_count(layout: PismLayout) -> usize {
    SpeakerLayout::cicp(layout.into()).channel_count()
}

/// Creates an encoder for 2 to 4 objects.
///
/// `band_borders` is null for the default partition or points to
/// [`PISM_NUM_BAND_BORDERS`] values. `downmix_bits` is 16 or 24.
///
/// # Safety
/// `out` must be a valid pointer; `band_borders` must be null or readable.
#[no_mangle]
pub unsafe extern "C" fn pism_encoder_new(
    num_objects: u32,
    downmix_bits: u32,
    compensation: PismCompensation,
    band_borders: *const u16,
    out: *mut *mut PismEncoder,
) -> PismStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let format = frame_format(num_objects, downmix_bits)?;
        let bands = bands_from(band_borders)?;
        let config = SceneConfig::new(format.num_objects).map_err(from_core)?;
        let compensation = match compensation {
            PismCompensation::TotalPower => Compensation::TotalPower,
            PismCompensation::DominantPair => Compensation::DominantPair,
        };
        let enc = PismEncoder {
            inner: Encoder::new(config, bands, compensation),
            format,
            frame: Vec::with_capacity(FRAME_LEN * format.num_objects),
        };
        *out = Box::into_raw(Box::new(enc));
        Ok(())
    })
}

/// Releases an encoder. Null is ignored.
///
/// # Safety
/// `enc` must be null or a handle from [`pism_encoder_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pism_encoder_free(enc: *mut PismEncoder) {
    if !enc.is_null() {
        drop(Box::from_raw(enc));
    }
}

/// Encodes one frame into a packed frame of [`pism_frame_bytes`] bytes.
///
/// `objects` holds one pointer per object to [`PISM_FRAME_LEN`] samples.
/// `azimuth_deg` and `elevation_deg` hold one direction per object.
///
/// # Safety
/// All pointers must be valid for the sizes above; `out` for `out_len` bytes.
#[no_mangle]
pub unsafe extern "C" fn pism_encoder_encode_frame(
    enc: *mut PismEncoder,
    objects: *const *const f32,
    azimuth_deg: *const f32,
    elevation_deg: *const f32,
    out: *mut u8,
    out_len: usize,
    written: *mut usize,
) -> PismStatus {
    guard(|| {
        let enc = enc.as_mut().ok_or_else(|| null("encoder"))?;
        if objects.is_null() || azimuth_deg.is_null() || elevation_deg.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let n = enc.format.num_objects;
        let need = enc.format.frame_bytes();
        if out_len < need {
            return Err((
                PismStatus::BufferTooSmall,
                format!("frame needs {need} bytes, buffer has {out_len}"),
            ));
        }
        let ptrs = slice::from_raw_parts(objects, n);
        enc.frame.clear();
        for (i, &p) in ptrs.iter().enumerate() {
            if p.is_null() {
                return Err(null(&format!("object {i}")));
            }
            enc.frame
                .extend(slice::from_raw_parts(p, FRAME_LEN).iter().map(|&v| f64::from(v)));
        }
        let az = slice::from_raw_parts(azimuth_deg, n);
        let el = slice::from_raw_parts(elevation_deg, n);
        let dirs: Vec<Direction> = az
            .iter()
            .zip(el)
            .map(|(&a, &e)| Direction::new(f64::from(a), f64::from(e)))
            .collect();
        let frames: Vec<&[f64]> = enc.frame.chunks(FRAME_LEN).collect();
        let (side, dmx) = enc.inner.encode_frame(&frames, &dirs).map_err(from_core)?;
        let bytes = pack_frame(&enc.format, &side, &dmx).map_err(from_core)?;
        ptr::copy_nonoverlapping(bytes.as_ptr(), out, bytes.len());
        if !written.is_null() {
            *written = bytes.len();
        }
        Ok(())
    })
}

/// Creates a decoder. The stream parameters must match the encoder's.
///
/// # Safety
/// `out` must be a valid pointer; `band_borders` must be null or readable.
#[no_mangle]
pub unsafe extern "C" fn pism_decoder_new(
    layout: PismLayout,
    num_objects: u32,
    downmix_bits: u32,
    band_borders: *const u16,
    energy_correction: bool,
    out: *mut *mut PismDecoder,
) -> PismStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let format = frame_format(num_objects, downmix_bits)?;
        let bands = bands_from(band_borders)?;
        let settings = DecoderSettings { energy_correction };
        let inner = Decoder::new(SpeakerLayout::cicp(layout.into()), &bands, &settings).map_err(from_core)?;
        *out = Box::into_raw(Box::new(PismDecoder { inner, format }));
        Ok(())
    })
}

/// Releases a decoder. Null is ignored.
///
/// # Safety
/// `dec` must be null or a handle from [`pism_decoder_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pism_decoder_free(dec: *mut PismDecoder) {
    if !dec.is_null() {
        drop(Box::from_raw(dec));
    }
}

/// Output channels of the decoder, or 0 for a null handle.
///
/// # Safety
/// `dec` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn pism_decoder_channel_count(dec: *const PismDecoder) -> usize {
    dec.as_ref().map_or(0, |d| d.inner.channel_count())
}

/// Decodes one packed frame into `out`, channel-major: channel `c` occupies
/// `out[c * PISM_FRAME_LEN ..]`. Output lags the encoder input by
/// [`pism_decoder_latency`] samples.
///
/// # Safety
/// `frame` must be readable for `frame_len` bytes, `out` writable for `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn pism_decoder_decode_frame(
    dec: *mut PismDecoder,
    frame: *const u8,
    frame_len: usize,
    out: *mut f32,
    out_len: usize,
) -> PismStatus {
    guard(|| {
        let dec = dec.as_mut().ok_or_else(|| null("decoder"))?;
        if frame.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let need = dec.inner.channel_count() * FRAME_LEN;
        if out_len < need {
            return Err((
                PismStatus::BufferTooSmall,
                format!("output needs {need} samples, buffer has {out_len}"),
            ));
        }
        let expected = dec.format.frame_bytes();
        if frame_len != expected {
            return Err((
                PismStatus::CorruptFrame,
                format!("frame has {frame_len} bytes, expected {expected}"),
            ));
        }
        let bytes = slice::from_raw_parts(frame, frame_len);
        let (side, dmx) = unpack_frame(&dec.format, bytes, 0).map_err(from_core)?;
        let channels = dec.inner.decode_frame(&side, &dmx).map_err(from_core)?;
        let dst = slice::from_raw_parts_mut(out, need);
        for (d, s) in dst.iter_mut().zip(channels.iter().flatten()) {
            *d = *s as f32;
        }
        Ok(())
    })
}
