//! Object directions, their 13-bit quantization, and per-object metadata tracks.
//!
//! Angles follow the usual object-audio convention: positive azimuth is the
//! left hemisphere, positive elevation is up.

use std::io::Read;
use std::path::Path;

use crate::error::{PismError, Result};

pub const SAMPLE_RATE_HZ: u32 = 48_000;
pub const FRAME_RATE_HZ: u32 = 50;
pub const FRAME_LEN: usize = (SAMPLE_RATE_HZ / FRAME_RATE_HZ) as usize;

pub const MIN_OBJECTS: usize = 2;
pub const MAX_OBJECTS: usize = 4;

pub const AZIMUTH_BITS: u32 = 7;
pub const ELEVATION_BITS: u32 = 6;
pub const DIRECTION_BITS: u32 = AZIMUTH_BITS + ELEVATION_BITS;

const AZIMUTH_LEVELS: u32 = 1 << AZIMUTH_BITS;
const ELEVATION_LEVELS: u32 = 1 << ELEVATION_BITS;

/// Azimuth grid step in degrees (360 / 128).
pub const AZIMUTH_STEP_DEG: f64 = 360.0 / AZIMUTH_LEVELS as f64;
/// Elevation grid step in degrees (180 / 63, both poles on the grid).
pub const ELEVATION_STEP_DEG: f64 = 180.0 / (ELEVATION_LEVELS - 1) as f64;

/// Direction of one object for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    azimuth_deg: f64,
    elevation_deg: f64,
}

impl Direction {
    /// Azimuth is wrapped into [-180, 180), elevation clamped to [-90, 90].
    /// Non-finite angles are mapped to 0.
    pub fn new(azimuth_deg: f64, elevation_deg: f64) -> Self {
        let az = if azimuth_deg.is_finite() { azimuth_deg } else { 0.0 };
        let el = if elevation_deg.is_finite() { elevation_deg } else { 0.0 };
        let mut wrapped = (az + 180.0).rem_euclid(360.0) - 180.0;
        // rem_euclid can round up to exactly 360 for tiny negative inputs
        if wrapped >= 180.0 {
            wrapped -= 360.0;
        }
        Direction {
            azimuth_deg: wrapped,
            elevation_deg: el.clamp(-90.0, 90.0),
        }
    }

    pub fn azimuth_deg(&self) -> f64 {
        self.azimuth_deg
    }

    pub fn elevation_deg(&self) -> f64 {
        self.elevation_deg
    }

    /// Unit vector with x towards the front, y to the left and z up.
    pub fn unit_vector(&self) -> [f64; 3] {
        let az = self.azimuth_deg.to_radians();
        let el = self.elevation_deg.to_radians();
        [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
    }

    pub fn quantize(&self) -> QuantizedDirection {
        quantize_direction(*self)
    }
}

/// Direction indices as carried in the side information: 7-bit azimuth, 6-bit elevation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct QuantizedDirection {
    pub azimuth_index: u8,
    pub elevation_index: u8,
}

impl QuantizedDirection {
    pub fn new(azimuth_index: u8, elevation_index: u8) -> Result<Self> {
        if u32::from(azimuth_index) >= AZIMUTH_LEVELS || u32::from(elevation_index) >= ELEVATION_LEVELS {
            return Err(PismError::CorruptStream(format!(
                "direction index out of range: azimuth {azimuth_index}, elevation {elevation_index}"
            )));
        }
        Ok(QuantizedDirection {
            azimuth_index,
            elevation_index,
        })
    }

    pub fn dequantize(&self) -> Result<Direction> {
        dequantize_direction(*self)
    }
}

/// Uniform quantization, round to nearest with ties towards the larger index.
/// Azimuth indices wrap, so +180 - epsilon lands on index 0 (-180).
pub fn quantize_direction(direction: Direction) -> QuantizedDirection {
    let az = ((direction.azimuth_deg + 180.0) / AZIMUTH_STEP_DEG + 0.5).floor() as i64;
    let az = az.rem_euclid(i64::from(AZIMUTH_LEVELS)) as u8;
    let el = ((direction.elevation_deg + 90.0) / ELEVATION_STEP_DEG + 0.5).floor() as i64;
    let el = el.clamp(0, i64::from(ELEVATION_LEVELS) - 1) as u8;
    QuantizedDirection {
        azimuth_index: az,
        elevation_index: el,
    }
}

pub fn dequantize_direction(q: QuantizedDirection) -> Result<Direction> {
    let q = QuantizedDirection::new(q.azimuth_index, q.elevation_index)?;
    Ok(Direction::new(
        -180.0 + f64::from(q.azimuth_index) * AZIMUTH_STEP_DEG,
        -90.0 + f64::from(q.elevation_index) * ELEVATION_STEP_DEG,
    ))
}

/// Fixed stream parameters shared by encoder and decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneConfig {
    num_objects: usize,
}

impl SceneConfig {
    pub fn new(num_objects: usize) -> Result<Self> {
        if !(MIN_OBJECTS..=MAX_OBJECTS).contains(&num_objects) {
            return Err(PismError::InvalidConfig(format!(
                "object count must be between {MIN_OBJECTS} and {MAX_OBJECTS}, got {num_objects}"
            )));
        }
        Ok(SceneConfig { num_objects })
    }

    pub fn num_objects(&self) -> usize {
        self.num_objects
    }

    pub fn sample_rate_hz(&self) -> u32 {
        SAMPLE_RATE_HZ
    }

    pub fn frame_len(&self) -> usize {
        FRAME_LEN
    }
}

/// One direction per 20 ms frame for a single object.
#[derive(Debug, Clone, PartialEq)]
pub struct MetadataTrack {
    frames: Vec<Direction>,
}

impl MetadataTrack {
    pub fn new(frames: Vec<Direction>) -> Result<Self> {
        if frames.is_empty() {
            return Err(PismError::InvalidConfig("metadata track has no frames".into()));
        }
        Ok(MetadataTrack { frames })
    }

    pub fn constant(direction: Direction) -> Self {
        MetadataTrack {
            frames: vec![direction],
        }
    }

    /// Rows of `azimuth_deg,elevation_deg`. A non-numeric first row is taken as a header,
    /// blank lines and `#` comments are skipped.
    pub fn from_csv_reader<R: Read>(reader: R) -> std::result::Result<Self, String> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(reader);
        let mut frames = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| e.to_string())?;
            if record.iter().all(|f| f.is_empty()) {
                continue;
            }
            if record.len() < 2 {
                return Err(format!("row {}: expected azimuth_deg,elevation_deg", row + 1));
            }
            let az = record[0].parse::<f64>();
            let el = record[1].parse::<f64>();
            match (az, el) {
                (Ok(az), Ok(el)) if az.is_finite() && el.is_finite() => {
                    frames.push(Direction::new(az, el));
                }
                (Ok(_), Ok(_)) => return Err(format!("row {}: non-finite angle", row + 1)),
                _ if row == 0 && frames.is_empty() => continue,
                _ => return Err(format!("row {}: cannot parse angles", row + 1)),
            }
        }
        MetadataTrack::new(frames).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| PismError::Input {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        Self::from_csv_reader(file).map_err(|message| PismError::Input {
            path: path.to_owned(),
            message,
        })
    }

    /// Direction for `frame`; the last row is held past the end of the track.
    pub fn direction_at(&self, frame: usize) -> Direction {
        self.frames[frame.min(self.frames.len() - 1)]
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("azimuth_deg,elevation_deg\n");
        for d in &self.frames {
            out.push_str(&format!("{},{}\n", d.azimuth_deg, d.elevation_deg));
        }
        out
    }
}
