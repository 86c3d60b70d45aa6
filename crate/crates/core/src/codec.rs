//! Frame-level encoder and decoder, and whole-stream helpers on top of the
//! `.pism` container.

use std::io::{Read, Write};

use crate::bitstream::{side_info_bitrate, PcmBits, StreamHeader, StreamReader, StreamWriter};
use crate::downmix::{Compensation, Downmixer, StereoDownmix};
use crate::error::{PismError, Result};
use crate::filterbank::{DecoderAnalysis, DecoderSynthesis, EncoderAnalysis, DECODER_LATENCY};
use crate::param::{build_side_info, BandPartition, FrameSideInfo, NUM_BANDS};
use crate::render::{Renderer, SpeakerLayout};
use crate::scene::{Direction, MetadataTrack, SceneConfig, FRAME_LEN, FRAME_RATE_HZ};

/// Encoder-side choices that do not change the stream format beyond the header.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EncoderSettings {
    pub bands: BandPartition,
    pub pcm: PcmBits,
    pub compensation: Compensation,
}

/// Decoder-side choices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderSettings {
    /// Corrects each bin's output energy for correlation between the downmix
    /// channels, which the diagonal input covariance ignores.
    pub energy_correction: bool,
}

impl Default for DecoderSettings {
    fn default() -> Self {
        DecoderSettings {
            energy_correction: true,
        }
    }
}

/// Per-stream encoder state: one analysis bank per object plus the downmixer.
pub struct Encoder {
    config: SceneConfig,
    bands: BandPartition,
    analyses: Vec<EncoderAnalysis>,
    downmixer: Downmixer,
}

impl Encoder {
    pub fn new(config: SceneConfig, bands: BandPartition, compensation: Compensation) -> Self {
        Encoder {
            analyses: (0..config.num_objects()).map(|_| EncoderAnalysis::new()).collect(),
            config,
            bands,
            downmixer: Downmixer::with_compensation(compensation),
        }
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn bands(&self) -> &BandPartition {
        &self.bands
    }

    /// Encodes one 960-sample frame of every object.
    pub fn encode_frame(
        &mut self,
        objects: &[&[f64]],
        directions: &[Direction],
    ) -> Result<(FrameSideInfo, StereoDownmix)> {
        let n = self.config.num_objects();
        if objects.len() != n {
            return Err(PismError::ObjectCount {
                expected: n,
                actual: objects.len(),
            });
        }
        let grids = objects
            .iter()
            .zip(&mut self.analyses)
            .map(|(x, a)| a.analyze(x))
            .collect::<Result<Vec<_>>>()?;
        let (side, powers) = build_side_info(&grids, &self.bands, directions)?;
        let dmx = self.downmixer.process(objects, &side, &powers)?;
        Ok((side, dmx))
    }
}

/// Per-stream decoder state. Output lags the input by [`DECODER_LATENCY`].
pub struct Decoder {
    renderer: Renderer,
    analysis: [DecoderAnalysis; 2],
    synthesis: Vec<DecoderSynthesis>,
}

impl Decoder {
    pub fn new(layout: SpeakerLayout, bands: &BandPartition, settings: &DecoderSettings) -> Result<Self> {
        let channels = layout.channel_count();
        Ok(Decoder {
            renderer: Renderer::new(layout, bands)?.with_energy_correction(settings.energy_correction),
            analysis: [DecoderAnalysis::new(), DecoderAnalysis::new()],
            synthesis: (0..channels).map(|_| DecoderSynthesis::new()).collect(),
        })
    }

    pub fn layout(&self) -> &SpeakerLayout {
        self.renderer.layout()
    }

    pub fn channel_count(&self) -> usize {
        self.synthesis.len()
    }

    /// One frame of every output channel, channel-major.
    pub fn decode_frame(&mut self, side: &FrameSideInfo, dmx: &StereoDownmix) -> Result<Vec<Vec<f64>>> {
        let left = self.analysis[0].analyze(&dmx.left)?;
        let right = self.analysis[1].analyze(&dmx.right)?;
        let tiles = self.renderer.render_frame(&left, &right, side)?;
        tiles
            .iter()
            .zip(&mut self.synthesis)
            .map(|(g, s)| s.synthesize(g))
            .collect()
    }
}

/// What [`encode_stream`] wrote.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodeSummary {
    pub frames: u32,
    pub side_bits_per_frame: usize,
    pub side_bitrate_bps: u64,
}

/// Number of frames covering `len` samples.
pub fn frame_count(len: usize) -> usize {
    len.div_ceil(FRAME_LEN)
}

fn frame_slice(x: &[f64], frame: usize, buf: &mut Vec<f64>) {
    buf.clear();
    let start = (frame * FRAME_LEN).min(x.len());
    let end = ((frame + 1) * FRAME_LEN).min(x.len());
    buf.extend_from_slice(&x[start..end]);
    buf.resize(FRAME_LEN, 0.0);
}

/// Encodes equal-length mono objects with per-frame metadata into a stream.
/// The last frame is zero padded.
pub fn encode_stream<W: Write>(
    objects: &[Vec<f64>],
    metadata: &[MetadataTrack],
    settings: &EncoderSettings,
    out: W,
) -> Result<EncodeSummary> {
    let config = SceneConfig::new(objects.len())?;
    if metadata.len() != objects.len() {
        return Err(PismError::ObjectCount {
            expected: objects.len(),
            actual: metadata.len(),
        });
    }
    let len = objects[0].len();
    if let Some(bad) = objects.iter().find(|o| o.len() != len) {
        return Err(PismError::ShapeMismatch(format!(
            "objects differ in length ({len} and {} samples)",
            bad.len()
        )));
    }
    let frames = u32::try_from(frame_count(len))
        .map_err(|_| PismError::InvalidConfig(format!("{len} samples is too long for one stream")))?;
    let header = StreamHeader {
        config,
        bands: settings.bands,
        pcm: settings.pcm,
        frame_count: frames,
    };
    let mut writer = StreamWriter::new(out, header)?;
    let mut encoder = Encoder::new(config, settings.bands, settings.compensation);
    let mut bufs = vec![Vec::with_capacity(FRAME_LEN); objects.len()];
    for f in 0..frames as usize {
        for (buf, x) in bufs.iter_mut().zip(objects) {
            frame_slice(x, f, buf);
        }
        let slices: Vec<&[f64]> = bufs.iter().map(Vec::as_slice).collect();
        let dirs: Vec<Direction> = metadata.iter().map(|m| m.direction_at(f)).collect();
        let (side, dmx) = encoder.encode_frame(&slices, &dirs)?;
        writer.write_frame(&side, &dmx)?;
    }
    writer.finish()?;
    Ok(EncodeSummary {
        frames,
        side_bits_per_frame: crate::param::side_info_bits(objects.len(), NUM_BANDS),
        side_bitrate_bps: side_info_bitrate(objects.len(), NUM_BANDS, FRAME_RATE_HZ),
    })
}

/// Decoded loudspeaker signals, channel-major, aligned with the encoder input.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedAudio {
    pub layout: SpeakerLayout,
    pub channels: Vec<Vec<f64>>,
    /// Filterbank delay that was removed from the output.
    pub latency_samples: usize,
}

impl DecodedAudio {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Decodes a whole stream. One extra frame, rendered with the last side
/// information and a silent downmix, flushes the filterbank delay so the
/// output has exactly `frame_count * 960` samples with zero lag.
pub fn decode_stream<R: Read>(input: R, layout: SpeakerLayout, settings: &DecoderSettings) -> Result<DecodedAudio> {
    let mut reader = StreamReader::new(input)?;
    let header = reader.header().clone();
    let mut decoder = Decoder::new(layout.clone(), &header.bands, settings)?;
    let total = header.frame_count as usize * FRAME_LEN;
    let mut channels = vec![Vec::with_capacity(total + FRAME_LEN); decoder.channel_count()];
    let mut last_side = None;
    while let Some((side, dmx)) = reader.next_frame()? {
        push_frame(&mut channels, decoder.decode_frame(&side, &dmx)?);
        last_side = Some(side);
    }
    if let Some(side) = last_side {
        push_frame(&mut channels, decoder.decode_frame(&side, &StereoDownmix::silent())?);
    }
    for ch in &mut channels {
        if ch.len() >= DECODER_LATENCY + total {
            ch.drain(..DECODER_LATENCY);
        }
        ch.truncate(total);
    }
    Ok(DecodedAudio {
        layout,
        channels,
        latency_samples: DECODER_LATENCY,
    })
}

fn push_frame(channels: &mut [Vec<f64>], frame: Vec<Vec<f64>>) {
    for (ch, samples) in channels.iter_mut().zip(frame) {
        ch.extend(samples);
    }
}
