//! Objective evaluation harness: test-scene presets, synthetic sources, the
//! uncoded reference render and decoded-versus-reference metrics.

pub mod metrics;
pub mod presets;
pub mod reference;
pub mod sources;

use std::time::Instant;

pub use metrics::{evaluate, EvalReport};
pub use presets::{ObjectPath, ScenePreset, SceneType, PRESETS};
pub use reference::render_reference;
pub use sources::{generate, SourceKind};

use crate::codec::{decode_stream, encode_stream, frame_count, DecodedAudio, DecoderSettings, EncoderSettings};
use crate::error::Result;
use crate::render::SpeakerLayout;
use crate::scene::{MetadataTrack, SAMPLE_RATE_HZ};

/// Object signals with their metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<Vec<f64>>,
    pub metadata: Vec<MetadataTrack>,
}

impl Scene {
    /// Synthetic signals on a preset geometry. Object `i` uses seed `seed + i`.
    pub fn from_preset(preset: &ScenePreset, num_objects: usize, seconds: f64, seed: u64) -> Scene {
        let len = (seconds * f64::from(SAMPLE_RATE_HZ)).round() as usize;
        let objects = (0..num_objects)
            .map(|i| generate(preset.scene_type.source_kind(i), seed + i as u64, len))
            .collect();
        Scene {
            objects,
            metadata: preset.tracks(num_objects, frame_count(len)),
        }
    }

    pub fn duration_seconds(&self) -> f64 {
        self.objects.first().map_or(0, Vec::len) as f64 / f64::from(SAMPLE_RATE_HZ)
    }
}

/// Everything produced by one encode, decode and evaluate pass.
#[derive(Debug, Clone)]
pub struct SceneOutcome {
    pub bitstream: Vec<u8>,
    pub decoded: DecodedAudio,
    pub reference: Vec<Vec<f64>>,
    pub report: EvalReport,
}

/// Encodes, decodes and evaluates a scene against its reference render.
pub fn run_scene(
    scene: &Scene,
    layout: &SpeakerLayout,
    encoder: &EncoderSettings,
    decoder: &DecoderSettings,
) -> Result<SceneOutcome> {
    let t0 = Instant::now();
    let mut bitstream = Vec::new();
    encode_stream(&scene.objects, &scene.metadata, encoder, &mut bitstream)?;
    let t_enc = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let decoded = decode_stream(&bitstream[..], layout.clone(), decoder)?;
    let t_dec = t1.elapsed().as_secs_f64();

    let mut reference = render_reference(&scene.objects, &scene.metadata, layout)?;
    // the decoder emits whole frames; compare over the input length
    let len = scene.objects.first().map_or(0, Vec::len);
    let mut channels = decoded.channels.clone();
    channels.iter_mut().for_each(|c| c.truncate(len));
    reference.iter_mut().for_each(|c| c.truncate(len));

    let mut report = evaluate(&channels, &reference, &encoder.bands)?;
    let dur = scene.duration_seconds();
    report.encode_realtime_factor = realtime_factor(dur, t_enc);
    report.decode_realtime_factor = realtime_factor(dur, t_dec);
    Ok(SceneOutcome {
        bitstream,
        decoded,
        reference,
        report,
    })
}

/// Audio duration divided by processing time.
pub fn realtime_factor(audio_seconds: f64, elapsed_seconds: f64) -> Option<f64> {
    (elapsed_seconds > 0.0 && audio_seconds > 0.0).then(|| audio_seconds / elapsed_seconds)
}
