use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::{check_frame, Complex64, TileGrid};
use crate::error::Result;
use crate::scene::FRAME_LEN;

pub const ENCODER_SLOTS: usize = 4;
pub const ENCODER_BINS: usize = 240;
pub const ENCODER_HOP: usize = FRAME_LEN / ENCODER_SLOTS;
pub const ENCODER_WINDOW_LEN: usize = 2 * ENCODER_HOP;

/// Oddly stacked windowed DFT over 480 samples with a 240 sample hop.
///
/// Bin `k` is centred on `(k + 1/2) * 100 Hz`. With the sine window and the
/// `sqrt(2 / N)` scale the bins of one slot carry exactly the energy of the
/// windowed input.
pub struct EncoderAnalysis {
    history: Vec<f64>,
    window: Vec<f64>,
    twiddle: Vec<Complex64>,
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl Default for EncoderAnalysis {
    fn default() -> Self {
        Self::new()
    }
}

impl EncoderAnalysis {
    pub fn new() -> Self {
        let n = ENCODER_WINDOW_LEN;
        let window = (0..n).map(|t| (PI * (t as f64 + 0.5) / n as f64).sin()).collect();
        let twiddle = (0..n)
            .map(|t| Complex64::from_polar(1.0, -PI * t as f64 / n as f64))
            .collect();
        let fft = FftPlanner::new().plan_fft_forward(n);
        let scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        EncoderAnalysis {
            history: vec![0.0; ENCODER_HOP],
            window,
            twiddle,
            fft,
            scratch,
        }
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Analyzes one 960 sample frame into a 4x240 grid. Slot `n` covers frame
    /// samples `240 (n - 1) .. 240 (n + 1)`, the first slot reaching into the
    /// previous frame.
    pub fn analyze(&mut self, frame: &[f64]) -> Result<TileGrid> {
        check_frame(frame, FRAME_LEN)?;
        let n = ENCODER_WINDOW_LEN;
        let scale = (2.0 / n as f64).sqrt();
        let mut grid = TileGrid::zeros(ENCODER_SLOTS, ENCODER_BINS);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for slot in 0..ENCODER_SLOTS {
            for (t, b) in buf.iter_mut().enumerate() {
                let pos = slot * ENCODER_HOP + t;
                let x = if pos < ENCODER_HOP {
                    self.history[pos]
                } else {
                    frame[pos - ENCODER_HOP]
                };
                *b = self.twiddle[t] * (x * self.window[t]);
            }
            self.fft.process_with_scratch(&mut buf, &mut self.scratch);
            for (out, v) in grid.slot_mut(slot).iter_mut().zip(&buf[..ENCODER_BINS]) {
                *out = v * scale;
            }
        }
        self.history.copy_from_slice(&frame[FRAME_LEN - ENCODER_HOP..]);
        Ok(grid)
    }

    pub fn reset(&mut self) {
        self.history.iter_mut().for_each(|h| *h = 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::PismError;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    // naive oddly stacked DFT straight from the definition
    fn naive_slot(x: &[f64], w: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n / 2)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for t in 0..n {
                    let ph = -2.0 * PI * (k as f64 + 0.5) * t as f64 / n as f64;
                    acc += Complex64::from_polar(x[t] * w[t], ph);
                }
                acc * (2.0 / n as f64).sqrt()
            })
            .collect()
    }

    #[test]
    fn geometry_and_zero_frame() {
        let mut fb = EncoderAnalysis::new();
        let g = fb.analyze(&vec![0.0; FRAME_LEN]).unwrap();
        assert!(g.has_shape(4, 240));
        assert_eq!(g.energy(), 0.0);
    }

    #[test]
    fn wrong_frame_length_is_rejected() {
        let mut fb = EncoderAnalysis::new();
        assert!(matches!(
            fb.analyze(&[0.0; 100]),
            Err(PismError::FrameLength {
                expected: 960,
                actual: 100
            })
        ));
    }

    #[test]
    fn matches_naive_transform() {
        let mut fb = EncoderAnalysis::new();
        let x = noise(1, FRAME_LEN);
        let g = fb.analyze(&x).unwrap();
        let w = fb.window().to_vec();
        let mut padded = vec![0.0; ENCODER_HOP];
        padded.extend_from_slice(&x);
        for slot in 0..ENCODER_SLOTS {
            let seg = &padded[slot * ENCODER_HOP..slot * ENCODER_HOP + ENCODER_WINDOW_LEN];
            let naive = naive_slot(seg, &w);
            for (k, v) in naive.iter().enumerate() {
                assert!((v - g.get(slot, k)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn sinusoid_at_bin_centre_is_compact() {
        // bin 37 is centred on 3750 Hz
        let f = 3750.0;
        let x: Vec<f64> = (0..2 * FRAME_LEN)
            .map(|t| (2.0 * PI * f * t as f64 / 48_000.0).sin())
            .collect();
        let mut fb = EncoderAnalysis::new();
        fb.analyze(&x[..FRAME_LEN]).unwrap();
        let g = fb.analyze(&x[FRAME_LEN..]).unwrap();
        let total = g.energy();
        let near: f64 = (36..=38).map(|k| g.bin_energy(k)).sum();
        assert!(near / total >= 0.95, "fraction {}", near / total);
    }

    #[test]
    fn slot_energy_equals_windowed_energy() {
        let mut fb = EncoderAnalysis::new();
        let x = noise(7, FRAME_LEN);
        let g = fb.analyze(&x).unwrap();
        let w = fb.window().to_vec();
        let mut padded = vec![0.0; ENCODER_HOP];
        padded.extend_from_slice(&x);
        let windowed: f64 = (0..ENCODER_SLOTS)
            .map(|s| {
                (0..ENCODER_WINDOW_LEN)
                    .map(|t| (padded[s * ENCODER_HOP + t] * w[t]).powi(2))
                    .sum::<f64>()
            })
            .sum();
        let db = 10.0 * (g.energy() / windowed).log10();
        assert!(db.abs() < 0.1, "{db} dB");
        assert!(db.abs() < 1e-9);
    }

    #[test]
    fn linearity() {
        let a = noise(2, FRAME_LEN);
        let b = noise(3, FRAME_LEN);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.3 * x - 2.0 * y).collect();
        let ga = EncoderAnalysis::new().analyze(&a).unwrap();
        let gb = EncoderAnalysis::new().analyze(&b).unwrap();
        let gm = EncoderAnalysis::new().analyze(&mix).unwrap();
        for i in 0..gm.tiles().len() {
            let expect = ga.tiles()[i] * 0.3 - gb.tiles()[i] * 2.0;
            assert!((expect - gm.tiles()[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn one_hop_delay_shifts_slots() {
        let x = noise(4, 3 * FRAME_LEN);
        let mut delayed = vec![0.0; ENCODER_HOP];
        delayed.extend_from_slice(&x[..3 * FRAME_LEN - ENCODER_HOP]);
        let mut fa = EncoderAnalysis::new();
        let mut fb = EncoderAnalysis::new();
        let mut ga = Vec::new();
        let mut gb = Vec::new();
        for f in 0..3 {
            ga.push(fa.analyze(&x[f * FRAME_LEN..(f + 1) * FRAME_LEN]).unwrap());
            gb.push(fb.analyze(&delayed[f * FRAME_LEN..(f + 1) * FRAME_LEN]).unwrap());
        }
        // slot s of the original equals slot s + 1 of the delayed signal
        for s in 0..(3 * ENCODER_SLOTS - 1) {
            let (fa_, sa) = (s / ENCODER_SLOTS, s % ENCODER_SLOTS);
            let (fb_, sb) = ((s + 1) / ENCODER_SLOTS, (s + 1) % ENCODER_SLOTS);
            for k in 0..ENCODER_BINS {
                assert!((ga[fa_].get(sa, k) - gb[fb_].get(sb, k)).norm() < 1e-9);
            }
        }
    }
}
