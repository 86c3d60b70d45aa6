use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use pism_core::bitstream::PcmBits;
use pism_core::codec::{decode_stream, encode_stream, frame_count, DecoderSettings, EncoderSettings};
use pism_core::downmix::Compensation;
use pism_core::eval::{
    evaluate, realtime_factor, render_reference, run_scene, EvalReport, Scene, ScenePreset, PRESETS,
};
use pism_core::param::BandPartition;
use pism_core::render::{LayoutName, SpeakerLayout};
use pism_core::scene::{MetadataTrack, SAMPLE_RATE_HZ};
use pism_core::wav;

#[derive(Parser)]
#[command(
    name = "pism",
    version,
    about = "Parametric object audio: encode, decode, render and evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode 2 to 4 mono objects with metadata into a .pism stream.
    Encode(EncodeArgs),
    /// Decode a .pism stream to a loudspeaker layout.
    Decode(DecodeArgs),
    /// Render the objects directly with unquantized metadata (uncoded reference).
    Reference(ReferenceArgs),
    /// Compare a decoded render against a reference render.
    Eval(EvalArgs),
    /// Write the synthetic objects and metadata of a test scene preset.
    Scene(SceneArgs),
    /// Encode, decode and evaluate every test scene preset.
    Batch(BatchArgs),
}

#[derive(Args)]
struct ObjectInputs {
    /// Mono 48 kHz object signals.
    #[arg(short = 'i', long = "input", num_args = 2..=4, required = true)]
    inputs: Vec<PathBuf>,
    /// One CSV per object with azimuth_deg,elevation_deg rows per 20 ms frame.
    #[arg(short = 'm', long = "metadata", num_args = 2..=4, required = true)]
    metadata: Vec<PathBuf>,
}

impl ObjectInputs {
    fn load(&self) -> Result<(Vec<Vec<f64>>, Vec<MetadataTrack>)> {
        if self.inputs.len() != self.metadata.len() {
            bail!(
                "{} inputs but {} metadata files",
                self.inputs.len(),
                self.metadata.len()
            );
        }
        let objects = wav::read_objects(&self.inputs)?;
        let tracks = self
            .metadata
            .iter()
            .map(|p| MetadataTrack::load(p))
            .collect::<pism_core::error::Result<Vec<_>>>()?;
        Ok((objects, tracks))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum CompensationArg {
    /// Object energy over downmix energy.
    Total,
    /// Total band power over dominant-pair band power.
    Pair,
}

impl From<CompensationArg> for Compensation {
    fn from(c: CompensationArg) -> Self {
        match c {
            CompensationArg::Total => Compensation::TotalPower,
            CompensationArg::Pair => Compensation::DominantPair,
        }
    }
}

#[derive(Args)]
struct EncoderOptions {
    /// Text file with 12 band borders in 100 Hz bins.
    #[arg(long)]
    bands: Option<PathBuf>,
    /// PCM width of the downmix payload.
    #[arg(long, default_value = "16", value_parser = parse_pcm_bits)]
    downmix_bits: PcmBits,
    #[arg(long, value_enum, default_value_t = CompensationArg::Total)]
    compensation: CompensationArg,
}

fn parse_pcm_bits(s: &str) -> std::result::Result<PcmBits, String> {
    let bits: u8 = s.parse().map_err(|e| format!("{e}"))?;
    PcmBits::from_bits(bits).map_err(|e| e.to_string())
}

impl EncoderOptions {
    fn settings(&self) -> Result<EncoderSettings> {
        let bands = match &self.bands {
            Some(p) => BandPartition::load(p)?,
            None => BandPartition::default(),
        };
        Ok(EncoderSettings {
            bands,
            pcm: self.downmix_bits,
            compensation: self.compensation.into(),
        })
    }
}

#[derive(Args)]
struct DecoderOptions {
    /// Use the bare diagonal input covariance without output energy correction.
    #[arg(long)]
    no_energy_correction: bool,
}

impl DecoderOptions {
    fn settings(&self) -> DecoderSettings {
        DecoderSettings {
            energy_correction: !self.no_energy_correction,
        }
    }
}

#[derive(Args)]
struct EncodeArgs {
    #[command(flatten)]
    objects: ObjectInputs,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    options: EncoderOptions,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// 5_1, 5_1_4, 7_1 or 7_1_4.
    #[arg(long)]
    layout: LayoutName,
    #[arg(short, long)]
    output: PathBuf,
    #[command(flatten)]
    options: DecoderOptions,
}

#[derive(Args)]
struct ReferenceArgs {
    #[command(flatten)]
    objects: ObjectInputs,
    #[arg(long)]
    layout: LayoutName,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    decoded: PathBuf,
    #[arg(long)]
    reference: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    bands: Option<PathBuf>,
}

#[derive(Args)]
struct SceneArgs {
    /// Preset name, i1 .. i12.
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(2..=4))]
    objects: u8,
    #[arg(long, default_value_t = 10.0)]
    seconds: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output directory for obj<N>.wav and obj<N>.csv.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long, default_value = "7_1_4")]
    layout: LayoutName,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u8).range(2..=4))]
    objects: u8,
    #[arg(long, default_value_t = 10.0)]
    seconds: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    json: Option<PathBuf>,
    #[command(flatten)]
    encoder: EncoderOptions,
    #[command(flatten)]
    decoder: DecoderOptions,
}

fn seconds_of(samples: usize) -> f64 {
    samples as f64 / f64::from(SAMPLE_RATE_HZ)
}

fn encode(args: &EncodeArgs) -> Result<()> {
    let (objects, tracks) = args.objects.load()?;
    let settings = args.options.settings()?;
    let t0 = Instant::now();
    let file = File::create(&args.output).with_context(|| format!("creating {}", args.output.display()))?;
    let summary = encode_stream(&objects, &tracks, &settings, BufWriter::new(file))?;
    let elapsed = t0.elapsed().as_secs_f64();
    println!(
        "side information: {} bits/frame, {} bit/s",
        summary.side_bits_per_frame, summary.side_bitrate_bps
    );
    println!("frames: {}", summary.frames);
    if let Some(rt) = realtime_factor(seconds_of(objects[0].len()), elapsed) {
        println!("encode speed: {rt:.1}x realtime (wall clock, not comparable to WMOPS)");
    }
    Ok(())
}

fn decode(args: &DecodeArgs) -> Result<()> {
    let t0 = Instant::now();
    let file = File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
    let decoded = decode_stream(
        BufReader::new(file),
        SpeakerLayout::cicp(args.layout),
        &args.options.settings(),
    )?;
    let elapsed = t0.elapsed().as_secs_f64();
    info!(
        "filterbank latency {} samples, compensated; output {} samples",
        decoded.latency_samples,
        decoded.len()
    );
    wav::write_channels(&args.output, &decoded.channels)?;
    println!(
        "decoded {} channels ({}), {} samples, latency {} samples compensated",
        decoded.channels.len(),
        args.layout,
        decoded.len(),
        decoded.latency_samples
    );
    if let Some(rt) = realtime_factor(seconds_of(decoded.len()), elapsed) {
        println!("decode speed: {rt:.1}x realtime (wall clock, not comparable to WMOPS)");
    }
    Ok(())
}

fn reference(args: &ReferenceArgs) -> Result<()> {
    let (objects, tracks) = args.objects.load()?;
    let out = render_reference(&objects, &tracks, &SpeakerLayout::cicp(args.layout))?;
    wav::write_channels(&args.output, &out)?;
    println!(
        "reference: {} channels ({}), {} samples",
        out.len(),
        args.layout,
        objects[0].len()
    );
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    serde_json::to_writer_pretty(BufWriter::new(file), value)?;
    Ok(())
}

fn print_report(name: &str, r: &EvalReport) {
    let worst_overlap = r.band_spatial_overlap.iter().copied().fold(1.0, f64::min);
    println!(
        "{name}: broadband {:+.2} dB, worst 1 s window {:.2} dB, lag {} samples, min band overlap {:.2}",
        r.broadband_error_db, r.max_abs_window_error_db, r.lag_samples, worst_overlap
    );
}

fn eval(args: &EvalArgs) -> Result<()> {
    let decoded = wav::read_channels(&args.decoded)?;
    let reference = wav::read_channels(&args.reference)?;
    let bands = match &args.bands {
        Some(p) => BandPartition::load(p)?,
        None => BandPartition::default(),
    };
    let report = evaluate(&decoded, &reference, &bands)?;
    print_report("eval", &report);
    if let Some(p) = &args.json {
        write_json(p, &report)?;
    }
    Ok(())
}

fn scene(args: &SceneArgs) -> Result<()> {
    let preset: &ScenePreset = args.preset.parse()?;
    let scene = Scene::from_preset(preset, usize::from(args.objects), args.seconds, args.seed);
    fs::create_dir_all(&args.output)?;
    for (i, (x, track)) in scene.objects.iter().zip(&scene.metadata).enumerate() {
        let stem = args.output.join(format!("obj{}", i + 1));
        wav::write_channels(&stem.with_extension("wav"), std::slice::from_ref(x))?;
        // expand held metadata to one row per frame
        let frames = (0..frame_count(x.len())).map(|f| track.direction_at(f)).collect();
        fs::write(stem.with_extension("csv"), MetadataTrack::new(frames)?.to_csv())?;
    }
    println!(
        "wrote {} objects of {} to {}",
        scene.objects.len(),
        preset,
        args.output.display()
    );
    Ok(())
}

#[derive(serde::Serialize)]
struct BatchEntry {
    scene: String,
    report: EvalReport,
}

fn batch(args: &BatchArgs) -> Result<()> {
    let layout = SpeakerLayout::cicp(args.layout);
    let encoder = args.encoder.settings()?;
    let decoder = args.decoder.settings();
    let results: Vec<Result<BatchEntry>> = std::thread::scope(|s| {
        let handles: Vec<_> = PRESETS
            .iter()
            .map(|p| {
                let (layout, encoder) = (&layout, &encoder);
                s.spawn(move || {
                    let scene = Scene::from_preset(p, usize::from(args.objects), args.seconds, args.seed);
                    let outcome = run_scene(&scene, layout, encoder, &decoder)?;
                    Ok(BatchEntry {
                        scene: p.name.to_owned(),
                        report: outcome.report,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("scene worker panicked"))
            .collect()
    });
    let entries = results.into_iter().collect::<Result<Vec<_>>>()?;
    for e in &entries {
        print_report(&e.scene, &e.report);
    }
    if let Some(p) = &args.json {
        write_json(p, &entries)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match &cli.command {
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Reference(a) => reference(a),
        Command::Eval(a) => eval(a),
        Command::Scene(a) => scene(a),
        Command::Batch(a) => batch(a),
    }
}
