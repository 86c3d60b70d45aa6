//! Time-frequency transforms.
//!
//! The encoder uses an oddly stacked modified DFT with 4 slots of 240 bins
//! per 20 ms frame. The decoder uses a 60-band complex-modulated filterbank
//! with 16 slots per frame and an analysis/synthesis pair that reconstructs
//! the input after a fixed latency.

mod cldfb;
mod mdft;

pub use cldfb::{
    prototype_filter, DecoderAnalysis, DecoderSynthesis, DECODER_BINS, DECODER_HOP, DECODER_LATENCY,
    DECODER_PROTOTYPE_LEN, DECODER_SLOTS,
};
pub use mdft::{EncoderAnalysis, ENCODER_BINS, ENCODER_HOP, ENCODER_SLOTS, ENCODER_WINDOW_LEN};

pub use rustfft::num_complex::Complex64;

use crate::error::{PismError, Result};

/// Complex tiles of one frame, stored slot-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TileGrid {
    slots: usize,
    bins: usize,
    tiles: Vec<Complex64>,
}

impl TileGrid {
    pub fn zeros(slots: usize, bins: usize) -> Self {
        TileGrid {
            slots,
            bins,
            tiles: vec![Complex64::new(0.0, 0.0); slots * bins],
        }
    }

    pub fn from_tiles(slots: usize, bins: usize, tiles: Vec<Complex64>) -> Result<Self> {
        if tiles.len() != slots * bins {
            return Err(PismError::ShapeMismatch(format!(
                "{} tiles do not form a {slots}x{bins} grid",
                tiles.len()
            )));
        }
        Ok(TileGrid { slots, bins, tiles })
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    #[inline]
    pub fn get(&self, slot: usize, bin: usize) -> Complex64 {
        self.tiles[slot * self.bins + bin]
    }

    #[inline]
    pub fn set(&mut self, slot: usize, bin: usize, value: Complex64) {
        self.tiles[slot * self.bins + bin] = value;
    }

    pub fn slot(&self, slot: usize) -> &[Complex64] {
        &self.tiles[slot * self.bins..(slot + 1) * self.bins]
    }

    pub fn slot_mut(&mut self, slot: usize) -> &mut [Complex64] {
        &mut self.tiles[slot * self.bins..(slot + 1) * self.bins]
    }

    pub fn tiles(&self) -> &[Complex64] {
        &self.tiles
    }

    pub fn energy(&self) -> f64 {
        self.tiles.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Energy of one bin summed over all slots.
    pub fn bin_energy(&self, bin: usize) -> f64 {
        (0..self.slots).map(|n| self.get(n, bin).norm_sqr()).sum()
    }

    pub fn has_shape(&self, slots: usize, bins: usize) -> bool {
        self.slots == slots && self.bins == bins
    }
}

fn check_frame(frame: &[f64], expected: usize) -> Result<()> {
    if frame.len() != expected {
        return Err(PismError::FrameLength {
            expected,
            actual: frame.len(),
        });
    }
    Ok(())
}
