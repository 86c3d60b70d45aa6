use crate::error::{PismError, Result};
use crate::render::{EfapPanner, SpeakerLayout};
use crate::scene::{MetadataTrack, FRAME_LEN};

/// Uncoded reference: every object panned directly with unquantized metadata.
///
/// Gains are updated per frame and interpolated linearly across the frame
/// from the previous frame's gains. Output is channel-major in layout order
/// with silent LFE channels and the input length.
pub fn render_reference(
    objects: &[Vec<f64>],
    metadata: &[MetadataTrack],
    layout: &SpeakerLayout,
) -> Result<Vec<Vec<f64>>> {
    if objects.len() != metadata.len() {
        return Err(PismError::ObjectCount {
            expected: objects.len(),
            actual: metadata.len(),
        });
    }
    let len = objects.first().map_or(0, Vec::len);
    if objects.iter().any(|o| o.len() != len) {
        return Err(PismError::ShapeMismatch("objects differ in length".into()));
    }
    let panner = EfapPanner::new(layout)?;
    let panned = layout.panned_channels();
    let mut out = vec![vec![0.0; len]; layout.channel_count()];

    for (x, track) in objects.iter().zip(metadata) {
        let mut prev: Option<Vec<f64>> = None;
        for (f, chunk) in x.chunks(FRAME_LEN).enumerate() {
            let g = panner.gains(track.direction_at(f)).0;
            let g0 = prev.unwrap_or_else(|| g.clone());
            let start = f * FRAME_LEN;
            for (row, &ch) in panned.iter().enumerate() {
                let step = (g[row] - g0[row]) / FRAME_LEN as f64;
                if g[row] == 0.0 && g0[row] == 0.0 {
                    continue;
                }
                let dst = &mut out[ch][start..start + chunk.len()];
                for (t, (y, &v)) in dst.iter_mut().zip(chunk).enumerate() {
                    *y += v * (g0[row] + step * (t + 1) as f64);
                }
            }
            prev = Some(g);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::render::LayoutName;
    use crate::scene::Direction;

    fn energy(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum()
    }

    #[test]
    fn object_on_speaker_feeds_only_that_speaker() {
        let layout = SpeakerLayout::cicp(LayoutName::Surround7_1_4);
        let x: Vec<f64> = (0..3000).map(|t| (t as f64 * 0.05).sin()).collect();
        let out = render_reference(
            std::slice::from_ref(&x),
            &[MetadataTrack::constant(Direction::new(-135.0, 35.0))],
            &layout,
        )
        .unwrap();
        let rtb = layout.channel_of("Rtb").unwrap();
        assert_eq!(out[rtb], x);
        assert!(out.iter().enumerate().all(|(c, y)| c == rtb || energy(y) == 0.0));
    }

    #[test]
    fn static_panning_preserves_energy() {
        let layout = SpeakerLayout::cicp(LayoutName::Surround5_1_4);
        let x: Vec<f64> = (0..4800).map(|t| ((t * 7919) % 101) as f64 / 50.0 - 1.0).collect();
        let meta = MetadataTrack::constant(Direction::new(71.0, 12.0));
        let out = render_reference(std::slice::from_ref(&x), &[meta], &layout).unwrap();
        let e_out: f64 = out.iter().map(|c| energy(c)).sum();
        let db = 10.0 * (e_out / energy(&x)).log10();
        assert!(db.abs() < 0.01);
    }

    #[test]
    fn silence_stays_silent() {
        let layout = SpeakerLayout::cicp(LayoutName::Surround5_1);
        let objects = vec![vec![0.0; 2000]; 3];
        let meta = vec![MetadataTrack::constant(Direction::new(0.0, 0.0)); 3];
        let out = render_reference(&objects, &meta, &layout).unwrap();
        assert!(out.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn gains_ramp_between_frames() {
        let layout = SpeakerLayout::cicp(LayoutName::Surround7_1_4);
        let meta = MetadataTrack::new(vec![Direction::new(30.0, 0.0), Direction::new(-30.0, 0.0)]).unwrap();
        let out = render_reference(&[vec![1.0; 2 * FRAME_LEN]], &[meta], &layout).unwrap();
        let (l, r) = (layout.channel_of("L").unwrap(), layout.channel_of("R").unwrap());
        assert_eq!(out[l][FRAME_LEN - 1], 1.0);
        assert!((out[l][FRAME_LEN + 479] - 0.5).abs() < 1e-12);
        assert!((out[r][2 * FRAME_LEN - 1] - 1.0).abs() < 1e-12);
    }
}
