use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{PismError, Result};

/// One loudspeaker. Angles in degrees, positive azimuth to the left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Speaker {
    pub label: &'static str,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub is_lfe: bool,
}

const fn spk(label: &'static str, azimuth_deg: f64, elevation_deg: f64) -> Speaker {
    Speaker {
        label,
        azimuth_deg,
        elevation_deg,
        is_lfe: false,
    }
}

const LFE: Speaker = Speaker {
    label: "LFE",
    azimuth_deg: 0.0,
    elevation_deg: 0.0,
    is_lfe: true,
};

// Channel order follows the CICP ChannelConfiguration tables (6, 16, 12, 19).
const CICP_5_1: [Speaker; 6] = [
    spk("L", 30.0, 0.0),
    spk("R", -30.0, 0.0),
    spk("C", 0.0, 0.0),
    LFE,
    spk("Ls", 110.0, 0.0),
    spk("Rs", -110.0, 0.0),
];

const CICP_5_1_4: [Speaker; 10] = [
    spk("L", 30.0, 0.0),
    spk("R", -30.0, 0.0),
    spk("C", 0.0, 0.0),
    LFE,
    spk("Ls", 110.0, 0.0),
    spk("Rs", -110.0, 0.0),
    spk("Ltf", 30.0, 35.0),
    spk("Rtf", -30.0, 35.0),
    spk("Ltr", 110.0, 35.0),
    spk("Rtr", -110.0, 35.0),
];

const CICP_7_1: [Speaker; 8] = [
    spk("L", 30.0, 0.0),
    spk("R", -30.0, 0.0),
    spk("C", 0.0, 0.0),
    LFE,
    spk("Ls", 110.0, 0.0),
    spk("Rs", -110.0, 0.0),
    spk("Lb", 135.0, 0.0),
    spk("Rb", -135.0, 0.0),
];

const CICP_7_1_4: [Speaker; 12] = [
    spk("L", 30.0, 0.0),
    spk("R", -30.0, 0.0),
    spk("C", 0.0, 0.0),
    LFE,
    spk("Lb", 135.0, 0.0),
    spk("Rb", -135.0, 0.0),
    spk("Lss", 90.0, 0.0),
    spk("Rss", -90.0, 0.0),
    spk("Ltf", 45.0, 35.0),
    spk("Rtf", -45.0, 35.0),
    spk("Ltb", 135.0, 35.0),
    spk("Rtb", -135.0, 35.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayoutName {
    Surround5_1,
    Surround5_1_4,
    Surround7_1,
    Surround7_1_4,
}

impl LayoutName {
    pub const ALL: [LayoutName; 4] = [
        LayoutName::Surround5_1,
        LayoutName::Surround5_1_4,
        LayoutName::Surround7_1,
        LayoutName::Surround7_1_4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            LayoutName::Surround5_1 => "5_1",
            LayoutName::Surround5_1_4 => "5_1_4",
            LayoutName::Surround7_1 => "7_1",
            LayoutName::Surround7_1_4 => "7_1_4",
        }
    }

    fn speakers(self) -> &'static [Speaker] {
        match self {
            LayoutName::Surround5_1 => &CICP_5_1,
            LayoutName::Surround5_1_4 => &CICP_5_1_4,
            LayoutName::Surround7_1 => &CICP_7_1,
            LayoutName::Surround7_1_4 => &CICP_7_1_4,
        }
    }
}

impl fmt::Display for LayoutName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LayoutName {
    type Err = PismError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('.', "_");
        LayoutName::ALL
            .into_iter()
            .find(|l| l.as_str() == norm)
            .ok_or_else(|| PismError::UnsupportedLayout(s.to_owned()))
    }
}

/// A loudspeaker layout in output channel order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerLayout {
    name: Option<LayoutName>,
    speakers: Vec<Speaker>,
}

impl SpeakerLayout {
    pub fn cicp(name: LayoutName) -> Self {
        SpeakerLayout {
            name: Some(name),
            speakers: name.speakers().to_vec(),
        }
    }

    /// A layout built from raw speaker positions; used for panner tests.
    pub fn custom(speakers: Vec<Speaker>) -> Self {
        SpeakerLayout { name: None, speakers }
    }

    pub fn name(&self) -> Option<LayoutName> {
        self.name
    }

    pub fn speakers(&self) -> &[Speaker] {
        &self.speakers
    }

    pub fn channel_count(&self) -> usize {
        self.speakers.len()
    }

    /// Output channel indices of the speakers that take part in panning.
    pub fn panned_channels(&self) -> Vec<usize> {
        (0..self.speakers.len()).filter(|&i| !self.speakers[i].is_lfe).collect()
    }

    pub fn panned_speakers(&self) -> Vec<Speaker> {
        self.speakers.iter().copied().filter(|s| !s.is_lfe).collect()
    }

    pub fn channel_of(&self, label: &str) -> Option<usize> {
        self.speakers.iter().position(|s| s.label == label)
    }

    /// Prototype rows for the panned speakers: left hemisphere (1, 0), right
    /// (0, 1), front and rear centre (0.5, 0.5).
    pub fn prototype_matrix(&self) -> PrototypeMatrix {
        let spk = self.panned_speakers();
        let mut q = DMatrix::zeros(spk.len(), 2);
        for (row, s) in spk.iter().enumerate() {
            let az = crate::scene::Direction::new(s.azimuth_deg, 0.0).azimuth_deg();
            let (l, r) = if az == 0.0 || az == -180.0 {
                (0.5, 0.5)
            } else if az > 0.0 {
                (1.0, 0.0)
            } else {
                (0.0, 1.0)
            };
            q[(row, 0)] = l;
            q[(row, 1)] = r;
        }
        PrototypeMatrix(q)
    }
}

/// Default mapping of the two downmix channels onto the panned speakers (S x 2).
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeMatrix(pub DMatrix<f64>);

impl PrototypeMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}
