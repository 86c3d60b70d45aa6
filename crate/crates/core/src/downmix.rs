//! Two-channel downmix with fixed cardioids pointing at +90 and -90 degrees.

use std::f64::consts::FRAC_PI_2;

use crate::error::{PismError, Result};
use crate::param::{BandPowers, FrameSideInfo, NUM_BANDS};
use crate::scene::{Direction, FRAME_LEN};

/// One-pole smoothing coefficient for the compensation gain.
pub const COMPENSATION_SMOOTHING: f64 = 0.8;
pub const COMPENSATION_MIN: f64 = 1.0;
pub const COMPENSATION_MAX: f64 = 2.0;

/// `wL = 0.5 + 0.5 cos(theta - pi/2)`, `wR = 1 - wL`. Elevation plays no role.
pub fn cardioid_gains(azimuth_deg: f64) -> (f64, f64) {
    let theta = Direction::new(azimuth_deg, 0.0).azimuth_deg().to_radians();
    let left = (0.5 + 0.5 * (theta - FRAC_PI_2).cos()).clamp(0.0, 1.0);
    (left, 1.0 - left)
}

/// Left/right weights of every object for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DownmixGains {
    gains: Vec<(f64, f64)>,
}

impl DownmixGains {
    pub fn from_directions(directions: &[Direction]) -> Self {
        DownmixGains {
            gains: directions.iter().map(|d| cardioid_gains(d.azimuth_deg())).collect(),
        }
    }

    /// Gains from the transmitted (dequantized) azimuths, i.e. what the decoder sees.
    pub fn from_side_info(side: &FrameSideInfo) -> Result<Self> {
        let dirs = side
            .directions
            .iter()
            .map(|q| q.dequantize())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_directions(&dirs))
    }

    pub fn num_objects(&self) -> usize {
        self.gains.len()
    }

    pub fn get(&self, object: usize) -> (f64, f64) {
        self.gains[object]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StereoDownmix {
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

impl StereoDownmix {
    pub fn silent() -> Self {
        StereoDownmix {
            left: vec![0.0; FRAME_LEN],
            right: vec![0.0; FRAME_LEN],
        }
    }

    pub fn energy(&self) -> f64 {
        self.left.iter().chain(&self.right).map(|v| v * v).sum()
    }

    pub fn scale_ramp(&mut self, from: f64, to: f64) {
        let n = self.left.len();
        for t in 0..n {
            let g = ramp(from, to, t, n);
            self.left[t] *= g;
            self.right[t] *= g;
        }
    }
}

#[inline]
fn ramp(from: f64, to: f64, t: usize, len: usize) -> f64 {
    from + (to - from) * (t + 1) as f64 / len as f64
}

/// Sums the objects into two channels, each gain ramping linearly from its
/// previous-frame value to the current one.
pub fn mix_frame(objects: &[&[f64]], gains: &DownmixGains, prev_gains: &DownmixGains) -> Result<StereoDownmix> {
    if objects.len() != gains.num_objects() || prev_gains.num_objects() != gains.num_objects() {
        return Err(PismError::ObjectCount {
            expected: gains.num_objects(),
            actual: objects.len(),
        });
    }
    let mut dmx = StereoDownmix::silent();
    for (i, obj) in objects.iter().enumerate() {
        if obj.len() != FRAME_LEN {
            return Err(PismError::FrameLength {
                expected: FRAME_LEN,
                actual: obj.len(),
            });
        }
        let (l1, r1) = gains.get(i);
        let (l0, r0) = prev_gains.get(i);
        for (t, &x) in obj.iter().enumerate() {
            dmx.left[t] += x * ramp(l0, l1, t, FRAME_LEN);
            dmx.right[t] += x * ramp(r0, r1, t, FRAME_LEN);
        }
    }
    Ok(dmx)
}

/// Unsmoothed broadband compensation gain
/// `sqrt(sum_{i,l} P_i(l) / sum_l (P_first(l) + P_second(l)))`, clamped to [1, 2].
/// A silent frame gives 1.
pub fn compensation_gain(powers: &BandPowers, side: &FrameSideInfo) -> f64 {
    let total = powers.total();
    let dominant: f64 = (0..NUM_BANDS)
        .map(|l| {
            let (a, b) = side.dominant[l];
            powers.get(usize::from(a), l) + powers.get(usize::from(b), l)
        })
        .sum();
    if total <= 0.0 || dominant <= 0.0 {
        return 1.0;
    }
    (total / dominant).sqrt().clamp(COMPENSATION_MIN, COMPENSATION_MAX)
}

/// How the broadband compensation gain is derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Compensation {
    /// Total object power over the power of each band's dominant pair.
    DominantPair,
    /// Total object energy over the energy of the uncompensated downmix.
    #[default]
    TotalPower,
}

/// Unsmoothed gain `sqrt(sum_i |x_i|^2 / |dmx|^2)` for one frame, clamped to [1, 2].
pub fn total_power_gain(objects: &[&[f64]], dmx: &StereoDownmix) -> f64 {
    let total: f64 = objects.iter().flat_map(|x| x.iter()).map(|v| v * v).sum();
    let mixed = dmx.energy();
    if total <= 0.0 || mixed <= 0.0 {
        return 1.0;
    }
    (total / mixed).sqrt().clamp(COMPENSATION_MIN, COMPENSATION_MAX)
}

/// Stateful downmixer for one stream: keeps the previous gains and the
/// smoothed compensation gain.
#[derive(Debug, Clone, Default)]
pub struct Downmixer {
    mode: Compensation,
    prev_gains: Option<DownmixGains>,
    smoothed: Option<f64>,
}

impl Downmixer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_compensation(mode: Compensation) -> Self {
        Downmixer {
            mode,
            ..Self::default()
        }
    }

    pub fn mode(&self) -> Compensation {
        self.mode
    }

    pub fn compensation(&self) -> f64 {
        self.smoothed.unwrap_or(1.0)
    }

    /// Mixes one frame and applies the smoothed energy compensation.
    pub fn process(&mut self, objects: &[&[f64]], side: &FrameSideInfo, powers: &BandPowers) -> Result<StereoDownmix> {
        let gains = DownmixGains::from_side_info(side)?;
        let prev = self.prev_gains.take().unwrap_or_else(|| gains.clone());
        let mut dmx = mix_frame(objects, &gains, &prev)?;
        self.prev_gains = Some(gains);

        let prev_g = self.compensation();
        let raw = match self.mode {
            Compensation::DominantPair => compensation_gain(powers, side),
            Compensation::TotalPower => total_power_gain(objects, &dmx),
        };
        let g = COMPENSATION_SMOOTHING * prev_g + (1.0 - COMPENSATION_SMOOTHING) * raw;
        self.smoothed = Some(g);
        dmx.scale_ramp(prev_g, g);
        Ok(dmx)
    }
}
