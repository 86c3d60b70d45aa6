//! Objective comparison of a decoded render against the uncoded reference.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{PismError, Result};
use crate::param::{BandPartition, NUM_BANDS};
use crate::scene::SAMPLE_RATE_HZ;

/// Width of one encoder frequency bin.
const ENCODER_BIN_HZ: f64 = 100.0;
/// Window length of the short-term energy comparison.
pub const WINDOW_SECONDS: f64 = 1.0;
/// Per-band and per-window energies below this fraction of the reference
/// total count as silent.
const SILENCE_FLOOR: f64 = 1e-9;

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}

fn check_layouts(decoded: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<()> {
    if decoded.len() != reference.len() {
        return Err(PismError::ShapeMismatch(format!(
            "layout mismatch: decoded has {} channels, reference has {}",
            decoded.len(),
            reference.len()
        )));
    }
    if decoded.is_empty() {
        return Err(PismError::ShapeMismatch("no channels to compare".into()));
    }
    Ok(())
}

fn channel_sum(channels: &[Vec<f64>]) -> Vec<f64> {
    let len = channels.iter().map(Vec::len).max().unwrap_or(0);
    let mut s = vec![0.0; len];
    for ch in channels {
        for (a, b) in s.iter_mut().zip(ch) {
            *a += b;
        }
    }
    s
}

/// Delay of `decoded` relative to `reference` in samples, from the peak of the
/// full cross-correlation of the channel sums. Positive means decoded is late.
pub fn estimate_lag(decoded: &[Vec<f64>], reference: &[Vec<f64>]) -> isize {
    let a = channel_sum(decoded);
    let b = channel_sum(reference);
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let n = (a.len() + b.len()).next_power_of_two();
    let to_spec = |x: &[f64], planner: &mut FftPlanner<f64>| {
        let mut v: Vec<Complex64> = x.iter().map(|&s| Complex64::new(s, 0.0)).collect();
        v.resize(n, Complex64::new(0.0, 0.0));
        planner.plan_fft_forward(n).process(&mut v);
        v
    };
    let mut planner = FftPlanner::new();
    let sa = to_spec(&a, &mut planner);
    let sb = to_spec(&b, &mut planner);
    let mut xc: Vec<Complex64> = sa.iter().zip(&sb).map(|(p, q)| p * q.conj()).collect();
    planner.plan_fft_inverse(n).process(&mut xc);
    let max_pos = a.len() - 1;
    let max_neg = b.len() - 1;
    let mut best = (0isize, f64::MIN);
    for lag in -(max_neg as isize)..=(max_pos as isize) {
        let v = xc[lag.rem_euclid(n as isize) as usize].re;
        if v > best.1 {
            best = (lag, v);
        }
    }
    if best.1 <= 0.0 {
        0
    } else {
        best.0
    }
}

/// Overlapping parts of both renders after removing `lag`.
pub fn align(decoded: &[Vec<f64>], reference: &[Vec<f64>], lag: isize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (d_off, r_off) = if lag >= 0 {
        (lag as usize, 0)
    } else {
        (0, (-lag) as usize)
    };
    let len = decoded
        .iter()
        .map(|c| c.len().saturating_sub(d_off))
        .chain(reference.iter().map(|c| c.len().saturating_sub(r_off)))
        .min()
        .unwrap_or(0);
    let cut = |chs: &[Vec<f64>], off: usize| chs.iter().map(|c| c[off..off + len].to_vec()).collect();
    (cut(decoded, d_off), cut(reference, r_off))
}

/// Frequency edges in Hz of the parameter bands; the last band extends to Nyquist.
pub fn band_edges_hz(bands: &BandPartition) -> [f64; NUM_BANDS + 1] {
    let mut e = [0.0; NUM_BANDS + 1];
    for (o, &b) in e.iter_mut().zip(bands.borders()) {
        *o = f64::from(b) * ENCODER_BIN_HZ;
    }
    e[NUM_BANDS] = f64::from(SAMPLE_RATE_HZ) / 2.0;
    e
}

/// Energy of one channel per parameter band, from a single full-length FFT.
pub fn band_energies(x: &[f64], edges: &[f64; NUM_BANDS + 1]) -> [f64; NUM_BANDS] {
    let mut out = [0.0; NUM_BANDS];
    let n = x.len();
    if n == 0 {
        return out;
    }
    let mut s: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut s);
    for (k, c) in s.iter().enumerate() {
        let f = k.min(n - k) as f64 * f64::from(SAMPLE_RATE_HZ) / n as f64;
        if let Some(l) = (0..NUM_BANDS).find(|&l| f >= edges[l] && f < edges[l + 1]) {
            out[l] += c.norm_sqr() / n as f64;
        } else if f >= edges[NUM_BANDS] {
            out[NUM_BANDS - 1] += c.norm_sqr() / n as f64;
        }
    }
    out
}

/// Fraction of the total energy carried by `channel`.
pub fn channel_fraction(channels: &[Vec<f64>], channel: usize) -> f64 {
    let total: f64 = channels.iter().map(|c| energy(c)).sum();
    if total == 0.0 {
        return 0.0;
    }
    energy(&channels[channel]) / total
}

/// Per-channel band energies, `[band][channel]`.
pub fn band_channel_energies(channels: &[Vec<f64>], bands: &BandPartition) -> Vec<[f64; NUM_BANDS]> {
    let edges = band_edges_hz(bands);
    channels.iter().map(|c| band_energies(c, &edges)).collect()
}

/// Broadband decoded/reference energy error of consecutive windows, in dB.
/// Windows where the reference is silent are skipped.
pub fn window_errors_db(decoded: &[Vec<f64>], reference: &[Vec<f64>], window: usize) -> Vec<f64> {
    let len = reference.first().map_or(0, Vec::len);
    let window = window.max(1);
    let total: f64 = reference.iter().map(|c| energy(c)).sum();
    let mut out = Vec::new();
    let mut start = 0;
    while start < len {
        let end = (start + window).min(len);
        if end - start < window && start > 0 {
            break;
        }
        let e = |chs: &[Vec<f64>]| chs.iter().map(|c| energy(&c[start..end])).sum::<f64>();
        let (ed, er) = (e(decoded), e(reference));
        if er > SILENCE_FLOOR * total && er > 0.0 {
            out.push(db(ed.max(f64::MIN_POSITIVE) / er));
        }
        start = end;
    }
    out
}

/// Objective comparison of a decoded render against a reference render.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub channels: usize,
    pub compared_samples: usize,
    /// Delay removed from the decoded signal before comparison.
    pub lag_samples: isize,
    pub broadband_error_db: f64,
    pub window_seconds: f64,
    pub window_errors_db: Vec<f64>,
    pub max_abs_window_error_db: f64,
    /// Lower band edges in Hz.
    pub band_edges_hz: Vec<f64>,
    /// Decoded/reference energy per `[band][channel]` in dB; silent cells are 0.
    pub band_channel_errors_db: Vec<Vec<f64>>,
    /// Per band, overlap of the decoded and reference channel energy
    /// distributions: `Σ_ch min(p_dec, p_ref)`, 1 when identical.
    pub band_spatial_overlap: Vec<f64>,
    /// Per object, decoded energy fraction on the speaker the object sits on,
    /// when the scene is known.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub object_localization: Option<Vec<f64>>,
    /// Wall-clock processing speed over real time; not comparable across machines.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub encode_realtime_factor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decode_realtime_factor: Option<f64>,
}

/// Aligns the renders by cross-correlation and computes every metric.
pub fn evaluate(decoded: &[Vec<f64>], reference: &[Vec<f64>], bands: &BandPartition) -> Result<EvalReport> {
    check_layouts(decoded, reference)?;
    let lag = estimate_lag(decoded, reference);
    let (dec, refr) = align(decoded, reference, lag);
    let e_dec: f64 = dec.iter().map(|c| energy(c)).sum();
    let e_ref: f64 = refr.iter().map(|c| energy(c)).sum();
    let broadband = if e_ref == 0.0 && e_dec == 0.0 {
        0.0
    } else {
        db(e_dec.max(f64::MIN_POSITIVE) / e_ref.max(f64::MIN_POSITIVE))
    };

    let window = (WINDOW_SECONDS * f64::from(SAMPLE_RATE_HZ)) as usize;
    let windows = window_errors_db(&dec, &refr, window);
    let max_abs = windows.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let bd = band_channel_energies(&dec, bands);
    let br = band_channel_energies(&refr, bands);
    let mut errors = Vec::with_capacity(NUM_BANDS);
    let mut overlap = Vec::with_capacity(NUM_BANDS);
    for l in 0..NUM_BANDS {
        let td: f64 = bd.iter().map(|b| b[l]).sum();
        let tr: f64 = br.iter().map(|b| b[l]).sum();
        let floor = SILENCE_FLOOR * tr.max(td);
        errors.push(
            bd.iter()
                .zip(&br)
                .map(|(d, r)| {
                    if d[l] <= floor && r[l] <= floor {
                        0.0
                    } else {
                        db((d[l] + floor) / (r[l] + floor))
                    }
                })
                .collect(),
        );
        overlap.push(if td == 0.0 && tr == 0.0 {
            1.0
        } else if td == 0.0 || tr == 0.0 {
            0.0
        } else {
            bd.iter()
                .zip(&br)
                .map(|(d, r)| (d[l] / td).min(r[l] / tr))
                .sum::<f64>()
                .clamp(0.0, 1.0)
        });
    }

    Ok(EvalReport {
        channels: dec.len(),
        compared_samples: dec.first().map_or(0, Vec::len),
        lag_samples: lag,
        broadband_error_db: broadband,
        window_seconds: WINDOW_SECONDS,
        window_errors_db: windows,
        max_abs_window_error_db: max_abs,
        band_edges_hz: band_edges_hz(bands)[..NUM_BANDS].to_vec(),
        band_channel_errors_db: errors,
        band_spatial_overlap: overlap,
        object_localization: None,
        encode_realtime_factor: None,
        decode_realtime_factor: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn render(seed: u64, channels: usize, len: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..channels)
            .map(|c| {
                (0..len)
                    .map(|_| rng.gen_range(-1.0..1.0) * (c + 1) as f64 * 0.1)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn self_comparison_is_perfect() {
        let x = render(1, 5, 60_000);
        let r = evaluate(&x, &x, &BandPartition::default()).unwrap();
        assert_eq!(r.lag_samples, 0);
        assert_eq!(r.broadband_error_db, 0.0);
        assert!(r.band_channel_errors_db.iter().flatten().all(|v| v.abs() < 1e-9));
        assert!(r.band_spatial_overlap.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert_eq!(r.window_errors_db.len(), 1);
    }

    #[test]
    fn half_amplitude_is_minus_six_db() {
        let x = render(2, 3, 20_000);
        let half: Vec<Vec<f64>> = x.iter().map(|c| c.iter().map(|v| 0.5 * v).collect()).collect();
        let r = evaluate(&half, &x, &BandPartition::default()).unwrap();
        assert!((r.broadband_error_db + 6.0206).abs() < 1e-3);
        assert!(r
            .band_channel_errors_db
            .iter()
            .flatten()
            .all(|v| (v + 6.0206).abs() < 1e-3));
    }

    #[test]
    fn recovers_delay() {
        let x = render(3, 4, 30_000);
        let delayed: Vec<Vec<f64>> = x
            .iter()
            .map(|c| std::iter::repeat_n(0.0, 599).chain(c.iter().copied()).collect())
            .collect();
        assert_eq!(estimate_lag(&delayed, &x), 599);
        assert_eq!(estimate_lag(&x, &delayed), -599);
        let r = evaluate(&delayed, &x, &BandPartition::default()).unwrap();
        assert_eq!(r.lag_samples, 599);
        assert!(r.broadband_error_db.abs() < 1e-12);
    }

    #[test]
    fn layout_mismatch_is_an_error() {
        let a = render(4, 6, 100);
        let b = render(4, 12, 100);
        assert!(matches!(
            evaluate(&a, &b, &BandPartition::default()),
            Err(PismError::ShapeMismatch(_))
        ));
    }

    #[test]
    fn band_energies_sum_to_total() {
        let x = render(5, 1, 9999).remove(0);
        let e = band_energies(&x, &band_edges_hz(&BandPartition::default()));
        assert!((e.iter().sum::<f64>() - energy(&x)).abs() < 1e-9 * energy(&x));
    }

    #[test]
    fn swapped_channels_lower_overlap() {
        let x = render(6, 2, 20_000);
        let swapped = vec![x[1].clone(), x[0].clone()];
        let r = evaluate(&swapped, &x, &BandPartition::default()).unwrap();
        assert!(r.band_spatial_overlap.iter().all(|&v| v < 0.8));
        let json = serde_json::to_string(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.channels, 2);
    }

    #[test]
    fn window_errors_skip_silence() {
        let mut x = render(7, 2, 96_000);
        for c in &mut x {
            c[48_000..].iter_mut().for_each(|v| *v = 0.0);
        }
        assert_eq!(window_errors_db(&x, &x, 48_000), vec![0.0]);
    }
}
