//! Parametric side information: per-band object powers, the two dominant
//! objects of each band and the quantized power ratio between them.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{PismError, Result};
use crate::filterbank::{TileGrid, DECODER_BINS, ENCODER_BINS, ENCODER_SLOTS};
use crate::scene::{Direction, QuantizedDirection, DIRECTION_BITS, MAX_OBJECTS, MIN_OBJECTS};

/// Number of parameter bands.
pub const NUM_BANDS: usize = 11;
pub const OBJECT_INDEX_BITS: u32 = 2;
pub const RATIO_BITS: u32 = 3;
pub const RATIO_LEVELS: u8 = 1 << RATIO_BITS;
const RATIO_FLOOR_GUARD: f64 = 1e-9;

/// Default band borders over the 240 encoder bins (100 Hz each), roughly logarithmic.
pub const DEFAULT_BORDERS: [u16; NUM_BANDS + 1] = [0, 2, 4, 7, 11, 17, 26, 40, 61, 93, 142, 240];

/// Parameter band borders `B(0) = 0 < B(1) < ... < B(11) = 240`. Band `l`
/// covers encoder bins `B(l) .. B(l + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandPartition {
    borders: [u16; NUM_BANDS + 1],
}

impl Default for BandPartition {
    fn default() -> Self {
        BandPartition {
            borders: DEFAULT_BORDERS,
        }
    }
}

impl BandPartition {
    pub fn new(borders: [u16; NUM_BANDS + 1]) -> Result<Self> {
        if borders[0] != 0 || usize::from(borders[NUM_BANDS]) != ENCODER_BINS {
            return Err(PismError::InvalidBands(format!(
                "borders must start at 0 and end at {ENCODER_BINS}, got {borders:?}"
            )));
        }
        if borders.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PismError::InvalidBands(format!(
                "borders must be strictly increasing, got {borders:?}"
            )));
        }
        Ok(BandPartition { borders })
    }

    pub fn from_slice(borders: &[u16]) -> Result<Self> {
        let arr: [u16; NUM_BANDS + 1] = borders.try_into().map_err(|_| {
            PismError::InvalidBands(format!("expected {} borders, got {}", NUM_BANDS + 1, borders.len()))
        })?;
        Self::new(arr)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PismError::Input {
            path: path.to_owned(),
            message: e.to_string(),
        })?;
        text.parse()
    }

    pub fn borders(&self) -> &[u16; NUM_BANDS + 1] {
        &self.borders
    }

    pub fn num_bands(&self) -> usize {
        NUM_BANDS
    }

    pub fn band_bins(&self, band: usize) -> std::ops::Range<usize> {
        usize::from(self.borders[band])..usize::from(self.borders[band + 1])
    }

    /// Parameter band of every decoder bin: the band holding the encoder bin at
    /// the decoder bin's centre. Bands narrower than a decoder bin may own none.
    pub fn decoder_band_of_bin(&self) -> [usize; DECODER_BINS] {
        let ratio = ENCODER_BINS / DECODER_BINS;
        let mut map = [0usize; DECODER_BINS];
        for (k, m) in map.iter_mut().enumerate() {
            let centre = k * ratio + ratio / 2;
            *m = self.borders[1..]
                .iter()
                .position(|&b| usize::from(b) > centre)
                .expect("last border is 240");
        }
        map
    }
}

impl FromStr for BandPartition {
    type Err = PismError;

    /// Twelve integers separated by whitespace or commas; `#` starts a comment.
    fn from_str(s: &str) -> Result<Self> {
        let mut values = Vec::new();
        for line in s.lines() {
            let line = line.split('#').next().unwrap_or("");
            for tok in line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
            {
                let v = tok
                    .parse::<u16>()
                    .map_err(|_| PismError::InvalidBands(format!("not a bin index: {tok:?}")))?;
                values.push(v);
            }
        }
        Self::from_slice(&values)
    }
}

impl fmt::Display for BandPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.borders.iter().map(|b| b.to_string()).collect();
        writeln!(f, "{}", parts.join(" "))
    }
}

/// Summed tile power per object and band.
#[derive(Debug, Clone, PartialEq)]
pub struct BandPowers {
    powers: Vec<[f64; NUM_BANDS]>,
}

impl BandPowers {
    pub fn from_rows(powers: Vec<[f64; NUM_BANDS]>) -> Result<Self> {
        for &p in powers.iter().flatten() {
            if !p.is_finite() || p < 0.0 {
                return Err(PismError::NegativePower(p));
            }
        }
        Ok(BandPowers { powers })
    }

    pub fn num_objects(&self) -> usize {
        self.powers.len()
    }

    pub fn get(&self, object: usize, band: usize) -> f64 {
        self.powers[object][band]
    }

    pub fn object(&self, object: usize) -> &[f64; NUM_BANDS] {
        &self.powers[object]
    }

    /// Powers of all objects in one band.
    pub fn band(&self, band: usize) -> Vec<f64> {
        self.powers.iter().map(|p| p[band]).collect()
    }

    pub fn total(&self) -> f64 {
        self.powers.iter().flatten().sum()
    }
}

/// `P_i(l) = sum_n sum_{k in band l} |X_i(k, n)|^2`.
pub fn band_powers(grids: &[TileGrid], bands: &BandPartition) -> Result<BandPowers> {
    let mut rows = Vec::with_capacity(grids.len());
    for (i, grid) in grids.iter().enumerate() {
        if !grid.has_shape(ENCODER_SLOTS, ENCODER_BINS) {
            return Err(PismError::ShapeMismatch(format!(
                "object {i}: expected {ENCODER_SLOTS}x{ENCODER_BINS} grid, got {}x{}",
                grid.slots(),
                grid.bins()
            )));
        }
        let mut row = [0.0; NUM_BANDS];
        for (l, p) in row.iter_mut().enumerate() {
            *p = bands.band_bins(l).map(|k| grid.bin_energy(k)).sum();
        }
        rows.push(row);
    }
    Ok(BandPowers { powers: rows })
}

/// The two objects with the largest power, most dominant first. Ties go to the
/// lower object index.
pub fn select_dominant(powers: &[f64]) -> (usize, usize) {
    assert!(powers.len() >= 2, "dominance needs at least two objects");
    let mut first = 0;
    let mut second = usize::MAX;
    for i in 1..powers.len() {
        if powers[i] > powers[first] {
            second = first;
            first = i;
        } else if second == usize::MAX || powers[i] > powers[second] {
            second = i;
        }
    }
    (first, second)
}

/// Power ratio `r1 = P1 / (P1 + P2)` of the dominant pair, 0.5 for a silent band.
pub fn power_ratio(p1: f64, p2: f64) -> Result<f64> {
    for p in [p1, p2] {
        if p.is_nan() || p < 0.0 {
            return Err(PismError::NegativePower(p));
        }
    }
    let sum = p1 + p2;
    if sum <= 0.0 {
        return Ok(0.5);
    }
    Ok(p1 / sum)
}

/// 3-bit index `floor(2 (r1 - 0.5) (2^3 - 1))`, clamped to `0..=7`.
pub fn quantize_ratio(p1: f64, p2: f64) -> Result<u8> {
    let r1 = power_ratio(p1, p2)?;
    let levels = f64::from(RATIO_LEVELS - 1);
    // the guard keeps exact reconstruction points (e.g. 3/14 + 0.5) on their own index
    let idx = (2.0 * (r1 - 0.5) * levels + RATIO_FLOOR_GUARD).floor();
    Ok(idx.clamp(0.0, levels) as u8)
}

/// `r1 = idx / (2 (2^3 - 1)) + 0.5`, `r2 = 1 - r1`.
pub fn dequantize_ratio(index: u8) -> Result<(f64, f64)> {
    if index >= RATIO_LEVELS {
        return Err(PismError::CorruptStream(format!("ratio index {index} exceeds 3 bits")));
    }
    let r1 = f64::from(index) / (2.0 * f64::from(RATIO_LEVELS - 1)) + 0.5;
    Ok((r1, 1.0 - r1))
}

/// Everything transmitted for one frame besides the downmix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameSideInfo {
    /// Per band, (most dominant, second) object index.
    pub dominant: [(u8, u8); NUM_BANDS],
    pub ratio_index: [u8; NUM_BANDS],
    pub directions: Vec<QuantizedDirection>,
}

impl FrameSideInfo {
    pub fn num_objects(&self) -> usize {
        self.directions.len()
    }

    /// Checks the field ranges against the object count.
    pub fn validate(&self) -> Result<()> {
        let n = self.directions.len();
        if !(MIN_OBJECTS..=MAX_OBJECTS).contains(&n) {
            return Err(PismError::CorruptStream(format!("{n} objects in side information")));
        }
        for (l, &(a, b)) in self.dominant.iter().enumerate() {
            if usize::from(a) >= n || usize::from(b) >= n {
                return Err(PismError::CorruptStream(format!(
                    "band {l}: dominant object index ({a}, {b}) out of range for {n} objects"
                )));
            }
            if a == b {
                return Err(PismError::CorruptStream(format!(
                    "band {l}: both dominant object indices are {a}"
                )));
            }
        }
        if let Some(r) = self.ratio_index.iter().find(|&&r| r >= RATIO_LEVELS) {
            return Err(PismError::CorruptStream(format!("ratio index {r} exceeds 3 bits")));
        }
        for d in &self.directions {
            QuantizedDirection::new(d.azimuth_index, d.elevation_index)?;
        }
        Ok(())
    }

    pub fn bit_cost(&self) -> usize {
        side_info_bits(self.num_objects(), NUM_BANDS)
    }
}

/// `4 L + 3 L + 13 N` bits per frame.
pub fn side_info_bits(num_objects: usize, num_bands: usize) -> usize {
    2 * OBJECT_INDEX_BITS as usize * num_bands + RATIO_BITS as usize * num_bands + DIRECTION_BITS as usize * num_objects
}

/// Per band, the dominant pair (most dominant first) and the ratio index.
pub type BandParameters = ([(u8, u8); NUM_BANDS], [u8; NUM_BANDS]);

/// Dominant pairs and ratio indices for every band of one frame.
pub fn band_parameters(powers: &BandPowers) -> Result<BandParameters> {
    if powers.num_objects() < MIN_OBJECTS {
        return Err(PismError::InvalidConfig(format!(
            "need at least {MIN_OBJECTS} objects, got {}",
            powers.num_objects()
        )));
    }
    let mut dominant = [(0u8, 1u8); NUM_BANDS];
    let mut ratio = [0u8; NUM_BANDS];
    for l in 0..NUM_BANDS {
        let band = powers.band(l);
        let (a, b) = select_dominant(&band);
        dominant[l] = (a as u8, b as u8);
        ratio[l] = quantize_ratio(band[a], band[b])?;
    }
    Ok((dominant, ratio))
}

/// Side information and band powers for one frame of object grids.
pub fn build_side_info(
    grids: &[TileGrid],
    bands: &BandPartition,
    directions: &[Direction],
) -> Result<(FrameSideInfo, BandPowers)> {
    if grids.len() != directions.len() {
        return Err(PismError::ObjectCount {
            expected: grids.len(),
            actual: directions.len(),
        });
    }
    if !(MIN_OBJECTS..=MAX_OBJECTS).contains(&grids.len()) {
        return Err(PismError::InvalidConfig(format!(
            "object count must be between {MIN_OBJECTS} and {MAX_OBJECTS}, got {}",
            grids.len()
        )));
    }
    let powers = band_powers(grids, bands)?;
    let (dominant, ratio_index) = band_parameters(&powers)?;
    let side = FrameSideInfo {
        dominant,
        ratio_index,
        directions: directions.iter().map(Direction::quantize).collect(),
    };
    Ok((side, powers))
}
