use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use rustfft::{Fft, FftPlanner};

use super::{check_frame, Complex64, TileGrid};
use crate::error::{PismError, Result};
use crate::scene::FRAME_LEN;

pub const DECODER_BINS: usize = 60;
pub const DECODER_HOP: usize = DECODER_BINS;
pub const DECODER_SLOTS: usize = FRAME_LEN / DECODER_HOP;
pub const DECODER_PROTOTYPE_LEN: usize = 10 * DECODER_BINS;
/// Samples between an input sample and its reconstruction after analysis + synthesis.
pub const DECODER_LATENCY: usize = DECODER_PROTOTYPE_LEN - 1;

const MODULATION_LEN: usize = 2 * DECODER_BINS;
const QUADRATURE_POINTS: usize = 8192;

/// Smooth step with `v(u) + v(1 - u) = 1` and three vanishing derivatives at both ends.
fn smooth_step(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u.powi(4) * (35.0 - 84.0 * u + 70.0 * u * u - 20.0 * u.powi(3))
}

/// Magnitude response of the prototype: `sqrt(M) cos(pi/2 v(|w| M / pi))` for
/// `|w| < pi / M`, zero outside. Neighbouring channels (spaced `pi / M`) are
/// power complementary, so the analysis/synthesis pair sums to a delay.
fn prototype_response(omega: f64) -> f64 {
    let m = DECODER_BINS as f64;
    let u = omega.abs() * m / PI;
    if u >= 1.0 {
        0.0
    } else {
        m.sqrt() * (0.5 * PI * smooth_step(u)).cos()
    }
}

/// Linear-phase 600 tap prototype, obtained by numerically integrating the
/// inverse transform of [`prototype_response`].
pub fn prototype_filter() -> &'static [f64] {
    static PROTO: OnceLock<Vec<f64>> = OnceLock::new();
    PROTO.get_or_init(|| {
        let centre = (DECODER_PROTOTYPE_LEN - 1) as f64 / 2.0;
        let band_edge = PI / DECODER_BINS as f64;
        let dw = band_edge / QUADRATURE_POINTS as f64;
        let samples: Vec<(f64, f64)> = (0..QUADRATURE_POINTS)
            .map(|i| {
                let w = (i as f64 + 0.5) * dw;
                (w, prototype_response(w))
            })
            .collect();
        (0..DECODER_PROTOTYPE_LEN)
            .map(|t| {
                let tau = t as f64 - centre;
                samples.iter().map(|&(w, a)| a * (w * tau).cos()).sum::<f64>() * dw / PI
            })
            .collect()
    })
}

fn channel_phase(k: usize) -> Complex64 {
    // e^{-j w_k c}, w_k = pi (k + 1/2) / M, c = (L - 1) / 2
    let centre = (DECODER_PROTOTYPE_LEN - 1) as f64 / 2.0;
    let w = PI * (k as f64 + 0.5) / DECODER_BINS as f64;
    Complex64::from_polar(1.0, -w * centre)
}

fn half_bin_twiddle(sign: f64) -> Vec<Complex64> {
    (0..MODULATION_LEN)
        .map(|q| Complex64::from_polar(1.0, sign * PI * q as f64 / MODULATION_LEN as f64))
        .collect()
}

/// Complex-modulated analysis bank: 60 oddly stacked channels of 400 Hz, hop 60.
///
/// Channel `k` is the prototype shifted to `(k + 1/2) * 400 Hz`. One instance
/// holds the input history of a single stream.
pub struct DecoderAnalysis {
    history: Vec<f64>,
    prototype: &'static [f64],
    twiddle: Vec<Complex64>,
    phase: Vec<Complex64>,
    ifft: Arc<dyn Fft<f64>>,
}

impl Default for DecoderAnalysis {
    fn default() -> Self {
        Self::new()
    }
}

impl DecoderAnalysis {
    pub fn new() -> Self {
        DecoderAnalysis {
            history: vec![0.0; DECODER_PROTOTYPE_LEN],
            prototype: prototype_filter(),
            twiddle: half_bin_twiddle(1.0),
            phase: (0..DECODER_BINS).map(channel_phase).collect(),
            ifft: FftPlanner::new().plan_fft_inverse(MODULATION_LEN),
        }
    }

    pub fn analyze(&mut self, frame: &[f64]) -> Result<TileGrid> {
        check_frame(frame, FRAME_LEN)?;
        let scale = std::f64::consts::SQRT_2;
        let mut grid = TileGrid::zeros(DECODER_SLOTS, DECODER_BINS);
        let mut folded = vec![Complex64::new(0.0, 0.0); MODULATION_LEN];
        for (slot, chunk) in frame.chunks_exact(DECODER_HOP).enumerate() {
            // history[L-1] is the newest sample
            self.history.copy_within(DECODER_HOP.., 0);
            self.history[DECODER_PROTOTYPE_LEN - DECODER_HOP..].copy_from_slice(chunk);

            folded.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for t in 0..DECODER_PROTOTYPE_LEN {
                let u = self.prototype[t] * self.history[DECODER_PROTOTYPE_LEN - 1 - t];
                let q = t % MODULATION_LEN;
                if (t / MODULATION_LEN).is_multiple_of(2) {
                    folded[q].re += u;
                } else {
                    folded[q].re -= u;
                }
            }
            for (v, tw) in folded.iter_mut().zip(&self.twiddle) {
                *v *= tw;
            }
            self.ifft.process(&mut folded);
            for (k, out) in grid.slot_mut(slot).iter_mut().enumerate() {
                *out = folded[k] * self.phase[k] * scale;
            }
        }
        Ok(grid)
    }

    pub fn reset(&mut self) {
        self.history.iter_mut().for_each(|h| *h = 0.0);
    }
}

/// Synthesis counterpart of [`DecoderAnalysis`]. Output lags the analysis
/// input by [`DECODER_LATENCY`] samples.
pub struct DecoderSynthesis {
    overlap: Vec<f64>,
    prototype: &'static [f64],
    twiddle: Vec<Complex64>,
    phase: Vec<Complex64>,
    ifft: Arc<dyn Fft<f64>>,
}

impl Default for DecoderSynthesis {
    fn default() -> Self {
        Self::new()
    }
}

impl DecoderSynthesis {
    pub fn new() -> Self {
        DecoderSynthesis {
            overlap: vec![0.0; DECODER_PROTOTYPE_LEN + DECODER_HOP],
            prototype: prototype_filter(),
            twiddle: half_bin_twiddle(1.0),
            phase: (0..DECODER_BINS).map(channel_phase).collect(),
            ifft: FftPlanner::new().plan_fft_inverse(MODULATION_LEN),
        }
    }

    pub fn synthesize(&mut self, grid: &TileGrid) -> Result<Vec<f64>> {
        if !grid.has_shape(DECODER_SLOTS, DECODER_BINS) {
            return Err(PismError::ShapeMismatch(format!(
                "decoder synthesis needs a {DECODER_SLOTS}x{DECODER_BINS} grid, got {}x{}",
                grid.slots(),
                grid.bins()
            )));
        }
        // analysis scale sqrt(2) times synthesis scale 1/sqrt(2), times 2 for the
        // conjugate channels that are not stored
        let scale = std::f64::consts::SQRT_2;
        let mut out = Vec::with_capacity(FRAME_LEN);
        let mut modulated = vec![Complex64::new(0.0, 0.0); MODULATION_LEN];
        for slot in 0..DECODER_SLOTS {
            modulated.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for (k, y) in grid.slot(slot).iter().enumerate() {
                modulated[k] = y * self.phase[k];
            }
            self.ifft.process(&mut modulated);
            for (v, tw) in modulated.iter_mut().zip(&self.twiddle) {
                *v *= tw;
            }
            let base = DECODER_HOP - 1;
            for t in 0..DECODER_PROTOTYPE_LEN {
                let q = t % MODULATION_LEN;
                let sign = if (t / MODULATION_LEN).is_multiple_of(2) {
                    1.0
                } else {
                    -1.0
                };
                self.overlap[base + t] += scale * sign * self.prototype[t] * modulated[q].re;
            }
            out.extend_from_slice(&self.overlap[..DECODER_HOP]);
            self.overlap.copy_within(DECODER_HOP.., 0);
            let len = self.overlap.len();
            self.overlap[len - DECODER_HOP..].iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(out)
    }

    pub fn reset(&mut self) {
        self.overlap.iter_mut().for_each(|v| *v = 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(seed: u64, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    fn round_trip(x: &[f64]) -> Vec<f64> {
        let mut ana = DecoderAnalysis::new();
        let mut syn = DecoderSynthesis::new();
        let mut out = Vec::new();
        for frame in x.chunks_exact(FRAME_LEN) {
            let g = ana.analyze(frame).unwrap();
            out.extend(syn.synthesize(&g).unwrap());
        }
        out
    }

    fn snr_db(x: &[f64], y: &[f64], delay: usize) -> f64 {
        let mut sig = 0.0;
        let mut err = 0.0;
        for t in delay..y.len() {
            let r = x[t - delay];
            sig += r * r;
            err += (y[t] - r).powi(2);
        }
        10.0 * (sig / err).log10()
    }

    #[test]
    fn prototype_energy_is_half() {
        let e: f64 = prototype_filter().iter().map(|h| h * h).sum();
        assert!((e - 0.5).abs() < 1e-6, "{e}");
    }

    #[test]
    fn zero_in_zero_out() {
        let mut ana = DecoderAnalysis::new();
        let g = ana.analyze(&vec![0.0; FRAME_LEN]).unwrap();
        assert!(g.has_shape(16, 60));
        assert_eq!(g.energy(), 0.0);
        let y = DecoderSynthesis::new().synthesize(&g).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn malformed_grid_is_rejected() {
        let g = TileGrid::zeros(4, 240);
        assert!(DecoderSynthesis::new().synthesize(&g).is_err());
    }

    #[test]
    fn tone_lands_in_its_bin() {
        // 1000 Hz is the centre of bin 2; 800 Hz sits on the bin 1 / bin 2 border
        let tone = |f: f64| -> Vec<f64> {
            (0..2 * FRAME_LEN)
                .map(|t| (2.0 * PI * f * t as f64 / 48_000.0).sin())
                .collect()
        };
        let mut ana = DecoderAnalysis::new();
        let x = tone(1000.0);
        ana.analyze(&x[..FRAME_LEN]).unwrap();
        let g = ana.analyze(&x[FRAME_LEN..]).unwrap();
        let best = (0..DECODER_BINS)
            .max_by(|&a, &b| g.bin_energy(a).total_cmp(&g.bin_energy(b)))
            .unwrap();
        assert_eq!(best, 2);
        assert!(g.bin_energy(2) / g.energy() > 0.99);

        let mut ana = DecoderAnalysis::new();
        let x = tone(800.0);
        ana.analyze(&x[..FRAME_LEN]).unwrap();
        let g = ana.analyze(&x[FRAME_LEN..]).unwrap();
        let (e1, e2) = (g.bin_energy(1), g.bin_energy(2));
        assert!((e1 + e2) / g.energy() > 0.99);
        assert!((e1 / e2 - 1.0).abs() < 0.05);
    }

    #[test]
    fn noise_energy_consistency() {
        let x = noise(11, 6 * FRAME_LEN);
        let mut ana = DecoderAnalysis::new();
        let mut grid_e = 0.0;
        for (i, frame) in x.chunks_exact(FRAME_LEN).enumerate() {
            let g = ana.analyze(frame).unwrap();
            if i >= 1 {
                grid_e += g.energy();
            }
        }
        let time_e: f64 = x[FRAME_LEN..].iter().map(|v| v * v).sum();
        let db = 10.0 * (grid_e / time_e).log10();
        assert!(db.abs() < 0.1, "{db} dB");
    }

    #[test]
    fn round_trip_snr_full_band() {
        let x = noise(5, 20 * FRAME_LEN);
        let y = round_trip(&x);
        let snr = snr_db(&x, &y, DECODER_LATENCY);
        assert!(snr >= 40.0, "snr {snr}");
    }

    #[test]
    fn latency_is_constant() {
        for pos in [0usize, 17, 959, 1500] {
            let mut x = vec![0.0; 4 * FRAME_LEN];
            x[pos] = 1.0;
            let y = round_trip(&x);
            let peak = (0..y.len()).max_by(|&a, &b| y[a].abs().total_cmp(&y[b].abs())).unwrap();
            assert_eq!(peak - pos, DECODER_LATENCY);
            assert!((y[peak] - 1.0).abs() < 0.02, "{}", y[peak]);
        }
    }

    #[test]
    fn linearity() {
        let a = noise(8, FRAME_LEN);
        let b = noise(9, FRAME_LEN);
        let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 1.5 * x + 0.25 * y).collect();
        let ga = DecoderAnalysis::new().analyze(&a).unwrap();
        let gb = DecoderAnalysis::new().analyze(&b).unwrap();
        let gm = DecoderAnalysis::new().analyze(&mix).unwrap();
        for i in 0..gm.tiles().len() {
            assert!((ga.tiles()[i] * 1.5 + gb.tiles()[i] * 0.25 - gm.tiles()[i]).norm() < 1e-10);
        }
    }
}
