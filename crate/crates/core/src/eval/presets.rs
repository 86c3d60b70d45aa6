use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{PismError, Result};
use crate::eval::sources::SourceKind;
use crate::scene::{Direction, MetadataTrack};

/// Content category of a test scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneType {
    Speech,
    SpeechFemale,
    SpeechMale,
    Music,
    MusicVocals,
    Mixed,
    Vocals,
}

impl SceneType {
    /// Synthetic stand-in for object `i` of a scene of this type.
    pub fn source_kind(self, object: usize) -> SourceKind {
        match self {
            SceneType::Speech => SourceKind::Speech {
                pitch_hz: [120.0, 210.0, 150.0, 190.0][object % 4],
            },
            SceneType::SpeechFemale => SourceKind::Speech {
                pitch_hz: 200.0 + 15.0 * object as f64,
            },
            SceneType::SpeechMale => SourceKind::Speech {
                pitch_hz: 110.0 + 10.0 * object as f64,
            },
            SceneType::Music => SourceKind::Tones {
                f0_hz: [110.0, 164.8, 220.0, 293.7][object % 4],
            },
            SceneType::MusicVocals => {
                if object == 0 {
                    SourceKind::Speech { pitch_hz: 220.0 }
                } else {
                    SourceKind::Tones {
                        f0_hz: [82.4, 196.0, 261.6][object % 3],
                    }
                }
            }
            SceneType::Mixed => match object % 3 {
                0 => SourceKind::Speech { pitch_hz: 140.0 },
                1 => SourceKind::Tones { f0_hz: 146.8 },
                _ => SourceKind::Transients { rate_hz: 3.0 },
            },
            SceneType::Vocals => SourceKind::Tones {
                f0_hz: [196.0, 246.9, 293.7, 392.0][object % 4],
            },
        }
    }
}

/// One object's trajectory: azimuth moves uniformly from start to end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObjectPath {
    pub azimuth_start_deg: f64,
    pub azimuth_end_deg: f64,
    pub elevation_deg: f64,
}

impl ObjectPath {
    const fn fixed(azimuth_deg: f64, elevation_deg: f64) -> Self {
        ObjectPath {
            azimuth_start_deg: azimuth_deg,
            azimuth_end_deg: azimuth_deg,
            elevation_deg,
        }
    }

    const fn moving(from_deg: f64, to_deg: f64, elevation_deg: f64) -> Self {
        ObjectPath {
            azimuth_start_deg: from_deg,
            azimuth_end_deg: to_deg,
            elevation_deg,
        }
    }

    pub fn is_moving(&self) -> bool {
        self.azimuth_start_deg != self.azimuth_end_deg
    }

    /// Per-frame directions, linear in azimuth from the first to the last frame.
    pub fn track(&self, frames: usize) -> MetadataTrack {
        if !self.is_moving() || frames <= 1 {
            return MetadataTrack::constant(Direction::new(self.azimuth_start_deg, self.elevation_deg));
        }
        let span = self.azimuth_end_deg - self.azimuth_start_deg;
        let dirs = (0..frames)
            .map(|f| {
                let t = f as f64 / (frames - 1) as f64;
                Direction::new(self.azimuth_start_deg + t * span, self.elevation_deg)
            })
            .collect();
        MetadataTrack::new(dirs).expect("at least one frame")
    }
}

/// A test scene geometry with four objects.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenePreset {
    pub name: &'static str,
    pub scene_type: SceneType,
    pub objects: [ObjectPath; 4],
}

use ObjectPath as P;

pub const PRESETS: [ScenePreset; 12] = [
    ScenePreset {
        name: "i1",
        scene_type: SceneType::Speech,
        objects: [
            P::fixed(0.0, -5.0),
            P::fixed(-180.0, -5.0),
            P::fixed(90.0, -5.0),
            P::fixed(-90.0, -5.0),
        ],
    },
    ScenePreset {
        name: "i2",
        scene_type: SceneType::SpeechFemale,
        objects: [
            P::fixed(60.0, 0.0),
            P::fixed(30.0, 0.0),
            P::fixed(-30.0, 0.0),
            P::fixed(-60.0, 0.0),
        ],
    },
    ScenePreset {
        name: "i3",
        scene_type: SceneType::Speech,
        objects: [
            P::fixed(0.0, 0.0),
            P::fixed(60.0, 0.0),
            P::moving(-30.0, -150.0, 15.0),
            P::fixed(-45.0, 0.0),
        ],
    },
    ScenePreset {
        name: "i4",
        scene_type: SceneType::SpeechMale,
        objects: [
            P::fixed(75.0, 30.0),
            P::fixed(25.0, 30.0),
            P::fixed(-25.0, 30.0),
            P::fixed(-75.0, 30.0),
        ],
    },
    ScenePreset {
        name: "i5",
        scene_type: SceneType::Speech,
        objects: [
            P::fixed(45.0, 0.0),
            P::fixed(-135.0, 0.0),
            P::fixed(-45.0, 0.0),
            P::fixed(135.0, 0.0),
        ],
    },
    ScenePreset {
        name: "i6",
        scene_type: SceneType::Music,
        objects: [
            P::fixed(100.0, 50.0),
            P::fixed(10.0, 50.0),
            P::fixed(-80.0, 50.0),
            P::fixed(-170.0, 50.0),
        ],
    },
    ScenePreset {
        name: "i7",
        scene_type: SceneType::Music,
        objects: [
            P::fixed(90.0, 0.0),
            P::fixed(30.0, 0.0),
            P::fixed(-30.0, 0.0),
            P::fixed(-90.0, 0.0),
        ],
    },
    ScenePreset {
        name: "i8",
        scene_type: SceneType::MusicVocals,
        objects: [
            P::fixed(0.0, 20.0),
            P::fixed(-70.0, 22.0),
            P::fixed(50.0, 18.0),
            P::fixed(-20.0, 0.0),
        ],
    },
    ScenePreset {
        name: "i9",
        scene_type: SceneType::Music,
        objects: [
            P::fixed(20.0, -5.0),
            P::fixed(40.0, 20.0),
            P::fixed(-30.0, 5.0),
            P::fixed(-45.0, -5.0),
        ],
    },
    ScenePreset {
        name: "i10",
        scene_type: SceneType::Mixed,
        objects: [
            P::moving(60.0, -10.0, 19.0),
            P::fixed(-60.0, 25.0),
            P::fixed(90.0, -15.0),
            P::fixed(-90.0, 0.0),
        ],
    },
    ScenePreset {
        name: "i11",
        scene_type: SceneType::Vocals,
        objects: [
            P::fixed(10.0, 15.0),
            P::fixed(-10.0, 20.0),
            P::fixed(10.0, 30.0),
            P::fixed(-10.0, 30.0),
        ],
    },
    ScenePreset {
        name: "i12",
        scene_type: SceneType::Speech,
        objects: [
            P::fixed(20.0, 0.0),
            P::fixed(20.0, 40.0),
            P::fixed(-20.0, 0.0),
            P::fixed(-20.0, 40.0),
        ],
    },
];

impl ScenePreset {
    pub fn all() -> &'static [ScenePreset] {
        &PRESETS
    }

    /// Metadata for the first `num_objects` objects over `frames` frames.
    pub fn tracks(&self, num_objects: usize, frames: usize) -> Vec<MetadataTrack> {
        self.objects[..num_objects].iter().map(|o| o.track(frames)).collect()
    }

    pub fn is_static(&self) -> bool {
        self.objects.iter().all(|o| !o.is_moving())
    }
}

impl fmt::Display for ScenePreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

impl FromStr for &'static ScenePreset {
    type Err = PismError;

    fn from_str(s: &str) -> Result<Self> {
        PRESETS
            .iter()
            .find(|p| p.name.eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| PismError::InvalidConfig(format!("unknown scene preset {s:?}")))
    }
}
