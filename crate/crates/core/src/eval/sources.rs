//! Seeded synthetic object signals standing in for recorded test material.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::scene::SAMPLE_RATE_HZ;

/// Default RMS level of generated signals (-26 dBFS).
pub const DEFAULT_RMS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    /// Noise with a long-term speech spectrum; `pitch_hz` shifts the low-frequency peak.
    Speech { pitch_hz: f64 },
    /// Harmonic tone complex with 1/k amplitudes up to 8 kHz.
    Tones { f0_hz: f64 },
    /// Exponentially decaying noise bursts at a fixed average rate.
    Transients { rate_hz: f64 },
    /// Noise restricted to `[low_hz, high_hz)`.
    BandNoise { low_hz: f64, high_hz: f64 },
}

/// `len` samples of the given kind at [`DEFAULT_RMS`].
pub fn generate(kind: SourceKind, seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = match kind {
        SourceKind::Speech { pitch_hz } => shaped_noise(&mut rng, len, |f| speech_spectrum(f, pitch_hz)),
        SourceKind::Tones { f0_hz } => tone_complex(&mut rng, len, f0_hz),
        SourceKind::Transients { rate_hz } => transients(&mut rng, len, rate_hz),
        SourceKind::BandNoise { low_hz, high_hz } => {
            shaped_noise(&mut rng, len, |f| if f >= low_hz && f < high_hz { 1.0 } else { 0.0 })
        }
    };
    normalize_rms(&mut x, DEFAULT_RMS);
    x
}

fn normalize_rms(x: &mut [f64], rms: f64) {
    let e = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
    if e > 0.0 {
        let g = rms / e.sqrt();
        x.iter_mut().for_each(|v| *v *= g);
    }
}

/// Long-term average speech magnitude: rises to a peak near twice the pitch,
/// then rolls off at about 6 dB per octave above 800 Hz, band-limited to 50 Hz .. 16 kHz.
fn speech_spectrum(f: f64, pitch_hz: f64) -> f64 {
    if !(50.0..16_000.0).contains(&f) {
        return 0.0;
    }
    let low = (f / (2.0 * pitch_hz)).min(1.0);
    low / (1.0 + (f / 800.0).powi(2)).sqrt()
}

fn shaped_noise(rng: &mut ChaCha8Rng, len: usize, shape: impl Fn(f64) -> f64) -> Vec<f64> {
    if len == 0 {
        return Vec::new();
    }
    let n = len;
    let mut spec: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut spec);
    for (k, c) in spec.iter_mut().enumerate() {
        let bin = k.min(n - k);
        let f = bin as f64 * f64::from(SAMPLE_RATE_HZ) / n as f64;
        *c *= shape(f);
    }
    planner.plan_fft_inverse(n).process(&mut spec);
    spec.iter().map(|c| c.re / n as f64).collect()
}

fn tone_complex(rng: &mut ChaCha8Rng, len: usize, f0_hz: f64) -> Vec<f64> {
    let harmonics: Vec<(f64, f64, f64)> = (1..)
        .map(|k| k as f64 * f0_hz)
        .take_while(|&f| f < 8_000.0)
        .enumerate()
        .map(|(i, f)| (f, 1.0 / (i + 1) as f64, rng.gen_range(0.0..std::f64::consts::TAU)))
        .collect();
    let w = std::f64::consts::TAU / f64::from(SAMPLE_RATE_HZ);
    (0..len)
        .map(|t| {
            harmonics
                .iter()
                .map(|&(f, a, ph)| a * (w * f * t as f64 + ph).sin())
                .sum()
        })
        .collect()
}

fn transients(rng: &mut ChaCha8Rng, len: usize, rate_hz: f64) -> Vec<f64> {
    let mut x = vec![0.0; len];
    let mean_gap = f64::from(SAMPLE_RATE_HZ) / rate_hz.max(0.1);
    let decay = (-1.0 / (0.03 * f64::from(SAMPLE_RATE_HZ))).exp();
    let mut t = rng.gen_range(0.0..mean_gap) as usize;
    while t < len {
        let mut env = 1.0;
        for v in x.iter_mut().skip(t).take((0.2 * f64::from(SAMPLE_RATE_HZ)) as usize) {
            *v += env * rng.gen_range(-1.0..1.0);
            env *= decay;
        }
        t += rng.gen_range(0.5 * mean_gap..1.5 * mean_gap) as usize;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    fn band_energy(x: &[f64], lo: f64, hi: f64) -> f64 {
        let n = x.len();
        let mut s: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut s);
        (0..n / 2)
            .filter(|&k| {
                let f = k as f64 * 48_000.0 / n as f64;
                f >= lo && f < hi
            })
            .map(|k| s[k].norm_sqr())
            .sum()
    }

    #[test]
    fn deterministic_and_normalized() {
        for kind in [
            SourceKind::Speech { pitch_hz: 150.0 },
            SourceKind::Tones { f0_hz: 220.0 },
            SourceKind::Transients { rate_hz: 4.0 },
            SourceKind::BandNoise {
                low_hz: 1000.0,
                high_hz: 2000.0,
            },
        ] {
            let a = generate(kind, 7, 9600);
            assert_eq!(a, generate(kind, 7, 9600));
            assert_ne!(a, generate(kind, 8, 9600));
            let rms = (a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64).sqrt();
            assert!((rms - DEFAULT_RMS).abs() < 1e-12);
        }
    }

    #[test]
    fn band_noise_stays_in_band() {
        let x = generate(
            SourceKind::BandNoise {
                low_hz: 2000.0,
                high_hz: 4000.0,
            },
            1,
            48_000,
        );
        let inside = band_energy(&x, 2000.0, 4000.0);
        let total = band_energy(&x, 0.0, 24_000.0);
        assert!(inside / total > 0.999999);
    }

    #[test]
    fn speech_noise_is_low_heavy() {
        let x = generate(SourceKind::Speech { pitch_hz: 120.0 }, 2, 48_000);
        assert!(band_energy(&x, 100.0, 1000.0) > 3.0 * band_energy(&x, 4000.0, 8000.0));
        assert!(band_energy(&x, 16_500.0, 24_000.0) < 1e-20);
    }
}
