use nalgebra::{DMatrix, Matrix2};

use crate::error::{PismError, Result};
use crate::filterbank::{TileGrid, DECODER_BINS, DECODER_SLOTS};
use crate::param::{dequantize_ratio, BandPartition, FrameSideInfo, NUM_BANDS};
use crate::render::covariance::{synthesize, TargetFactor, MAX_MIXING_GAIN};
use crate::render::efap::{DirectResponses, EfapPanner};
use crate::render::layout::SpeakerLayout;

/// `diag(Σ_n |X_L(k, n)|², Σ_n |X_R(k, n)|²)`; the downmix channels are
/// assumed uncorrelated.
pub fn input_covariance(left: &TileGrid, right: &TileGrid, bin: usize) -> Matrix2<f64> {
    Matrix2::new(left.bin_energy(bin), 0.0, 0.0, right.bin_energy(bin))
}

/// Renders decoded downmix tiles to loudspeaker tiles, one frame at a time.
///
/// Holds the previous frame's mixing matrices for the slot cross-fade.
#[derive(Debug, Clone)]
pub struct Renderer {
    layout: SpeakerLayout,
    panner: EfapPanner,
    prototype: DMatrix<f64>,
    band_of_bin: [usize; DECODER_BINS],
    energy_correction: bool,
    previous: Option<Vec<DMatrix<f64>>>,
}

/// Real part of `Σ_n X_L(k, n) X_R*(k, n)`.
pub fn cross_power(left: &TileGrid, right: &TileGrid, bin: usize) -> f64 {
    (0..left.slots())
        .map(|n| (left.get(n, bin) * right.get(n, bin).conj()).re)
        .sum()
}

/// `Σ_s |(M x)_s|²` summed over the frame for a real `M` and an input with
/// the given diagonal powers and cross power.
fn output_energy(m: &DMatrix<f64>, cx: &Matrix2<f64>, cross: f64) -> f64 {
    m.row_iter()
        .map(|r| r[0] * r[0] * cx[(0, 0)] + r[1] * r[1] * cx[(1, 1)] + 2.0 * r[0] * r[1] * cross)
        .sum()
}

/// Rescales `m` so that its output energy for the measured input, cross term
/// included, equals its output energy under the diagonal model.
fn correct_energy(m: &mut DMatrix<f64>, cx: &Matrix2<f64>, cross: f64) {
    let diagonal = output_energy(m, cx, 0.0);
    let actual = output_energy(m, cx, cross);
    let peak = m.amax();
    if diagonal <= 0.0 || actual <= 0.0 || peak == 0.0 {
        return;
    }
    let scale = (diagonal / actual).sqrt().min(MAX_MIXING_GAIN / peak);
    *m *= scale;
}

impl Renderer {
    pub fn new(layout: SpeakerLayout, bands: &BandPartition) -> Result<Self> {
        let panner = EfapPanner::new(&layout)?;
        let prototype = layout.prototype_matrix().0;
        Ok(Renderer {
            band_of_bin: bands.decoder_band_of_bin(),
            energy_correction: true,
            layout,
            panner,
            prototype,
            previous: None,
        })
    }

    /// Enables or disables the per-bin output energy correction for
    /// correlated downmix channels.
    pub fn with_energy_correction(mut self, enabled: bool) -> Self {
        self.energy_correction = enabled;
        self
    }

    pub fn energy_correction(&self) -> bool {
        self.energy_correction
    }

    pub fn layout(&self) -> &SpeakerLayout {
        &self.layout
    }

    pub fn panner(&self) -> &EfapPanner {
        &self.panner
    }

    pub fn reset(&mut self) {
        self.previous = None;
    }

    fn responses(&self, side: &FrameSideInfo) -> Result<Vec<DirectResponses>> {
        side.directions
            .iter()
            .map(|q| Ok(self.panner.gains(q.dequantize()?)))
            .collect()
    }

    fn factor(&self, side: &FrameSideInfo, band: usize, p_dmx: f64, dr: &[DirectResponses]) -> Result<TargetFactor> {
        let (i1, i2) = side.dominant[band];
        let (r1, r2) = dequantize_ratio(side.ratio_index[band])?;
        let d1 = dr[usize::from(i1)].gains();
        let d2 = dr[usize::from(i2)].gains();
        Ok(TargetFactor::from_components(&[d1, d2], [r1 * p_dmx, r2 * p_dmx]))
    }

    /// `Cy = R E Rᵀ` over the panned speakers for one band at downmix power `p_dmx`.
    pub fn target_covariance(&self, side: &FrameSideInfo, band: usize, p_dmx: f64) -> Result<DMatrix<f64>> {
        if band >= NUM_BANDS {
            return Err(PismError::InvalidBands(format!("band {band} out of range")));
        }
        side.validate()?;
        let dr = self.responses(side)?;
        Ok(self.factor(side, band, p_dmx, &dr)?.covariance())
    }

    /// One S x 2 mixing matrix per decoder bin.
    pub fn mixing_matrices(
        &self,
        left: &TileGrid,
        right: &TileGrid,
        side: &FrameSideInfo,
    ) -> Result<Vec<DMatrix<f64>>> {
        for g in [left, right] {
            if !g.has_shape(DECODER_SLOTS, DECODER_BINS) {
                return Err(PismError::ShapeMismatch(format!(
                    "downmix grid is {}x{}, expected {DECODER_SLOTS}x{DECODER_BINS}",
                    g.slots(),
                    g.bins()
                )));
            }
        }
        side.validate()?;
        let dr = self.responses(side)?;
        (0..DECODER_BINS)
            .map(|k| {
                let cx = input_covariance(left, right, k);
                let target = self.factor(side, self.band_of_bin[k], cx.trace(), &dr)?;
                let mut m = synthesize(&cx, &target, &self.prototype);
                if self.energy_correction {
                    correct_energy(&mut m, &cx, cross_power(left, right, k));
                }
                Ok(m)
            })
            .collect()
    }

    /// Loudspeaker tiles for every output channel; LFE channels stay silent.
    pub fn render_frame(&mut self, left: &TileGrid, right: &TileGrid, side: &FrameSideInfo) -> Result<Vec<TileGrid>> {
        let current = self.mixing_matrices(left, right, side)?;
        let previous = self.previous.take().unwrap_or_else(|| current.clone());
        let panned = self.layout.panned_channels();
        let mut out = vec![TileGrid::zeros(DECODER_SLOTS, DECODER_BINS); self.layout.channel_count()];

        for k in 0..DECODER_BINS {
            let (m0, m1) = (&previous[k], &current[k]);
            let cx = input_covariance(left, right, k);
            let cross = if self.energy_correction {
                cross_power(left, right, k)
            } else {
                0.0
            };
            let (e0, e1) = (output_energy(m0, &cx, cross), output_energy(m1, &cx, cross));
            for n in 0..DECODER_SLOTS {
                let a = (n + 1) as f64 / DECODER_SLOTS as f64;
                let mut m = m0 * (1.0 - a) + m1 * a;
                if self.energy_correction && n + 1 < DECODER_SLOTS {
                    // keep the faded matrix on the straight line between the two energies
                    let en = output_energy(&m, &cx, cross);
                    let peak = m.amax();
                    if en > 0.0 && peak > 0.0 {
                        m *= (((1.0 - a) * e0 + a * e1) / en).sqrt().min(MAX_MIXING_GAIN / peak);
                    }
                }
                let x = [left.get(n, k), right.get(n, k)];
                for (row, &ch) in panned.iter().enumerate() {
                    out[ch].set(n, k, x[0] * m[(row, 0)] + x[1] * m[(row, 1)]);
                }
            }
        }
        self.previous = Some(current);
        Ok(out)
    }
}

/// Applies a fixed S x 2 matrix to every tile; used to check the renderer
/// against a plain prototype mapping.
pub fn apply_matrix(m: &DMatrix<f64>, left: &TileGrid, right: &TileGrid) -> Vec<TileGrid> {
    let mut out = vec![TileGrid::zeros(left.slots(), left.bins()); m.nrows()];
    for n in 0..left.slots() {
        for k in 0..left.bins() {
            let (xl, xr) = (left.get(n, k), right.get(n, k));
            for (row, grid) in out.iter_mut().enumerate() {
                grid.set(n, k, xl * m[(row, 0)] + xr * m[(row, 1)]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::Complex64;
    use crate::render::layout::LayoutName;
    use crate::scene::{Direction, QuantizedDirection};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng) -> TileGrid {
        let tiles = (0..DECODER_SLOTS * DECODER_BINS)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        TileGrid::from_tiles(DECODER_SLOTS, DECODER_BINS, tiles).unwrap()
    }

    fn side(dirs: &[(f64, f64)], pair: (u8, u8), ratio: u8) -> FrameSideInfo {
        FrameSideInfo {
            dominant: [pair; NUM_BANDS],
            ratio_index: [ratio; NUM_BANDS],
            directions: dirs.iter().map(|&(a, e)| Direction::new(a, e).quantize()).collect(),
        }
    }

    fn renderer(name: LayoutName) -> Renderer {
        Renderer::new(SpeakerLayout::cicp(name), &BandPartition::default()).unwrap()
    }

    #[test]
    fn input_covariance_matches_naive_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (l, r) = (random_grid(&mut rng), random_grid(&mut rng));
        for k in [0, 7, 59] {
            let cx = input_covariance(&l, &r, k);
            let el: f64 = (0..DECODER_SLOTS).map(|n| l.get(n, k).norm_sqr()).sum();
            let er: f64 = (0..DECODER_SLOTS).map(|n| r.get(n, k).norm_sqr()).sum();
            assert!((cx[(0, 0)] - el).abs() < 1e-12 && (cx[(1, 1)] - er).abs() < 1e-12);
            assert_eq!((cx[(0, 1)], cx[(1, 0)]), (0.0, 0.0));
        }
        let z = TileGrid::zeros(DECODER_SLOTS, DECODER_BINS);
        assert_eq!(input_covariance(&z, &z, 3), Matrix2::zeros());
    }

    #[test]
    fn target_covariance_identities() {
        let r = renderer(LayoutName::Surround7_1_4);
        let s = side(&[(30.0, 20.0), (-100.0, 0.0), (0.0, 0.0)], (0, 1), 3);
        let cy = r.target_covariance(&s, 4, 2.5).unwrap();
        assert!((cy.trace() - 2.5).abs() < 1e-12);
        assert!((&cy - cy.transpose()).amax() < 1e-15);

        let full = side(&[(30.0, 20.0), (-100.0, 0.0), (0.0, 0.0)], (0, 1), 7);
        let cy = r.target_covariance(&full, 0, 1.0).unwrap();
        let eig = cy.clone().symmetric_eigen();
        let big = eig.eigenvalues.iter().filter(|&&e| e > 1e-12).count();
        assert_eq!(big, 1);

        // both objects on the Ltf speaker
        let same = side(&[(45.0, 35.0), (45.0, 35.0)], (0, 1), 2);
        let d = same.directions[0].dequantize().unwrap();
        assert_eq!(d.azimuth_deg(), 45.0);
        assert!((d.elevation_deg() - 35.0).abs() < 0.72);
        let cy = r.target_covariance(&same, 0, 3.0).unwrap();
        let ltf = r
            .layout()
            .panned_speakers()
            .iter()
            .position(|s| s.label == "Ltf")
            .unwrap();
        let lost = 3.0 - cy[(ltf, ltf)];
        // the elevation grid puts 35 degrees 0.7 degrees off
        assert!((0.0..0.05).contains(&lost), "{lost}");
        assert!((cy.trace() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn silence_in_silence_out() {
        let mut r = renderer(LayoutName::Surround5_1);
        let z = TileGrid::zeros(DECODER_SLOTS, DECODER_BINS);
        let s = side(&[(30.0, 0.0), (-30.0, 0.0), (110.0, 0.0)], (0, 1), 0);
        let out = r.render_frame(&z, &z, &s).unwrap();
        assert_eq!(out.len(), 6);
        assert!(out.iter().all(|g| g.energy() == 0.0));
    }

    #[test]
    fn stationary_frame_energy_matches_target_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (l, r) = (random_grid(&mut rng), random_grid(&mut rng));
        for name in LayoutName::ALL {
            let mut ren = renderer(name);
            let s = side(&[(20.0, 10.0), (-75.0, 0.0), (150.0, 30.0), (0.0, 60.0)], (2, 1), 4);
            ren.render_frame(&l, &r, &s).unwrap();
            let out = ren.render_frame(&l, &r, &s).unwrap();
            let e_out: f64 = out.iter().map(TileGrid::energy).sum();
            let band = BandPartition::default().decoder_band_of_bin();
            let e_target: f64 = (0..DECODER_BINS)
                .map(|k| {
                    ren.target_covariance(&s, band[k], input_covariance(&l, &r, k).trace())
                        .unwrap()
                        .trace()
                })
                .sum();
            let db = 10.0 * (e_out / e_target).log10();
            // random tiles are only nearly uncorrelated between channels
            assert!(db.abs() < 0.1, "{name}: {db} dB");
            assert_eq!(out[3].energy(), 0.0);
        }
    }

    #[test]
    fn single_object_lands_on_its_speaker() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (l, r) = (random_grid(&mut rng), random_grid(&mut rng));
        let mut ren = renderer(LayoutName::Surround7_1_4);
        let s = side(&[(135.0, 0.0), (-90.0, 0.0)], (0, 1), 7);
        let out = ren.render_frame(&l, &r, &s).unwrap();
        let total: f64 = out.iter().map(TileGrid::energy).sum();
        let lb = ren.layout().channel_of("Lb").unwrap();
        // 0 degrees elevation dequantizes to about +1.4, leaking a little upward
        assert!(out[lb].energy() / total > 0.99);
    }

    #[test]
    fn crossfade_starts_from_previous_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (l, r) = (random_grid(&mut rng), random_grid(&mut rng));
        let mut ren = renderer(LayoutName::Surround5_1).with_energy_correction(false);
        let a = side(&[(30.0, 0.0), (-30.0, 0.0)], (0, 1), 7);
        let b = side(&[(30.0, 0.0), (-30.0, 0.0)], (1, 0), 7);
        let ma = ren.mixing_matrices(&l, &r, &a).unwrap();
        let mb = ren.mixing_matrices(&l, &r, &b).unwrap();
        ren.render_frame(&l, &r, &a).unwrap();
        let out = ren.render_frame(&l, &r, &b).unwrap();
        let k = 10;
        let panned = ren.layout().panned_channels();
        for n in [0, 7, 15] {
            let w = (n + 1) as f64 / 16.0;
            let m = &ma[k] * (1.0 - w) + &mb[k] * w;
            for (row, &ch) in panned.iter().enumerate() {
                let expect = l.get(n, k) * m[(row, 0)] + r.get(n, k) * m[(row, 1)];
                assert!((out[ch].get(n, k) - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn corrected_crossfade_interpolates_energy() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let l = random_grid(&mut rng);
        // strongly correlated right channel
        let r = TileGrid::from_tiles(
            DECODER_SLOTS,
            DECODER_BINS,
            l.tiles()
                .iter()
                .map(|&v| v * 0.7 + Complex64::new(rng.gen_range(-0.1..0.1), 0.0))
                .collect(),
        )
        .unwrap();
        let mut ren = renderer(LayoutName::Surround7_1_4);
        let a = side(&[(10.0, 0.0), (-150.0, 30.0)], (0, 1), 7);
        let b = side(&[(10.0, 0.0), (-150.0, 30.0)], (1, 0), 7);
        ren.render_frame(&l, &r, &a).unwrap();
        let out = ren.render_frame(&l, &r, &b).unwrap();
        let ma = ren
            .clone()
            .with_energy_correction(true)
            .mixing_matrices(&l, &r, &a)
            .unwrap();
        let mb = ren.mixing_matrices(&l, &r, &b).unwrap();
        let k = 30;
        let cx = input_covariance(&l, &r, k);
        let cross = cross_power(&l, &r, k);
        let (ea, eb) = (output_energy(&ma[k], &cx, cross), output_energy(&mb[k], &cx, cross));
        // both endpoints carry the diagonal-model energy, so every slot does too
        assert!((ea - cx.trace()).abs() < 1e-9 * cx.trace());
        assert!((eb - cx.trace()).abs() < 1e-9 * cx.trace());
        let e_out: f64 = out.iter().map(|g| g.bin_energy(k)).sum();
        let db = 10.0 * (e_out / cx.trace()).log10();
        assert!(db.abs() < 0.5, "{db}");
    }

    #[test]
    fn energy_correction_removes_coherent_gain() {
        // identical channels: the diagonal model would sum them coherently
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = random_grid(&mut rng);
        let s = side(&[(0.0, 0.0), (0.0, 0.0)], (0, 1), 4);
        for corrected in [false, true] {
            let mut ren = renderer(LayoutName::Surround5_1).with_energy_correction(corrected);
            let out = ren.render_frame(&l, &l, &s).unwrap();
            let e: f64 = out.iter().map(TileGrid::energy).sum();
            let db = 10.0 * (e / (2.0 * l.energy())).log10();
            if corrected {
                assert!(db.abs() < 1e-9, "{db}");
            } else {
                assert!(db > 2.9, "{db}");
            }
        }
    }

    #[test]
    fn prototype_mapping_when_target_is_prototype() {
        // Cy equal to Q Cx Qᵀ with an orthogonal-compatible Q reproduces Q x
        let layout = SpeakerLayout::cicp(LayoutName::Surround5_1);
        let q = layout.prototype_matrix().0;
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (l, r) = (random_grid(&mut rng), random_grid(&mut rng));
        let k = 20;
        let cx = input_covariance(&l, &r, k);
        let cxd = DMatrix::from_iterator(2, 2, cx.iter().copied());
        let cy = &q * cxd * q.transpose();
        let m = crate::render::covariance::covariance_synthesis(&cx, &cy, &q);
        assert!((&m - &q).amax() < 1e-9, "{m}");
        let a = apply_matrix(&m, &l, &r);
        let b = apply_matrix(&q, &l, &r);
        for (ga, gb) in a.iter().zip(&b) {
            assert!((ga.energy() - gb.energy()).abs() < 1e-9 * gb.energy().max(1.0));
        }
    }

    #[test]
    fn malformed_side_info_is_rejected() {
        let ren = renderer(LayoutName::Surround5_1);
        let z = TileGrid::zeros(DECODER_SLOTS, DECODER_BINS);
        let mut s = side(&[(30.0, 0.0), (-30.0, 0.0)], (0, 1), 0);
        s.dominant[3] = (0, 3);
        assert!(matches!(
            ren.mixing_matrices(&z, &z, &s),
            Err(PismError::CorruptStream(_))
        ));
        let s = FrameSideInfo {
            directions: vec![QuantizedDirection::new(0, 0).unwrap(); 2],
            ..side(&[(0.0, 0.0), (0.0, 0.0)], (0, 1), 0)
        };
        let small = TileGrid::zeros(4, 60);
        assert!(matches!(
            ren.mixing_matrices(&small, &z, &s),
            Err(PismError::ShapeMismatch(_))
        ));
    }
}
