//! RIFF/WAV reading and writing at the codec sample rate.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{PismError, Result};
use crate::scene::SAMPLE_RATE_HZ;

/// Bit depth of written loudspeaker files.
pub const OUTPUT_BITS: u16 = 24;

fn input_error(path: &Path, message: impl Into<String>) -> PismError {
    PismError::Input {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// All channels of a 48 kHz file as `[-1, 1)` floats, channel-major.
pub fn read_channels(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = WavReader::open(path).map_err(|e| input_error(path, e.to_string()))?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE_HZ {
        return Err(input_error(
            path,
            format!("sample rate is {} Hz, expected {SAMPLE_RATE_HZ} Hz", spec.sample_rate),
        ));
    }
    let channels = usize::from(spec.channels);
    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        SampleFormat::Int => {
            let scale = (1u64 << (spec.bits_per_sample - 1)) as f64;
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<std::result::Result<_, _>>()?
        }
    };
    let mut out = vec![Vec::with_capacity(interleaved.len() / channels.max(1)); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (ch, &v) in out.iter_mut().zip(frame) {
            ch.push(v);
        }
    }
    Ok(out)
}

/// A mono 48 kHz object signal.
pub fn read_mono(path: &Path) -> Result<Vec<f64>> {
    let mut channels = read_channels(path)?;
    if channels.len() != 1 {
        return Err(input_error(
            path,
            format!("expected mono, found {} channels", channels.len()),
        ));
    }
    Ok(channels.remove(0))
}

/// Reads equal-length mono files.
pub fn read_objects(paths: &[impl AsRef<Path>]) -> Result<Vec<Vec<f64>>> {
    let objects = paths
        .iter()
        .map(|p| read_mono(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    if let Some(first) = objects.first() {
        for (p, o) in paths.iter().zip(&objects) {
            if o.len() != first.len() {
                return Err(input_error(
                    p.as_ref(),
                    format!("{} samples, but the first object has {}", o.len(), first.len()),
                ));
            }
        }
    }
    Ok(objects)
}

/// Writes channel-major signals as interleaved 24-bit PCM, clipping to full scale.
pub fn write_channels(path: &Path, channels: &[Vec<f64>]) -> Result<()> {
    write_channels_with_bits(path, channels, OUTPUT_BITS)
}

pub fn write_channels_with_bits(path: &Path, channels: &[Vec<f64>], bits: u16) -> Result<()> {
    if channels.is_empty() || channels.len() > usize::from(u16::MAX) {
        return Err(PismError::InvalidConfig(format!(
            "cannot write {} channels",
            channels.len()
        )));
    }
    if !matches!(bits, 16 | 24) {
        return Err(PismError::InvalidConfig(format!("unsupported output bit depth {bits}")));
    }
    let len = channels[0].len();
    if channels.iter().any(|c| c.len() != len) {
        return Err(PismError::ShapeMismatch("output channels differ in length".into()));
    }
    let spec = WavSpec {
        channels: channels.len() as u16,
        sample_rate: SAMPLE_RATE_HZ,
        bits_per_sample: bits,
        sample_format: SampleFormat::Int,
    };
    let scale = (1i64 << (bits - 1)) as f64;
    let max = scale - 1.0;
    let mut writer = WavWriter::create(path, spec)?;
    for i in 0..len {
        for ch in channels {
            let code = (ch[i] * scale).round().clamp(-scale, max) as i32;
            writer.write_sample(code)?;
        }
    }
    writer.finalize()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_within_one_lsb() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.wav");
        let a: Vec<f64> = (0..500).map(|i| (i as f64 * 0.01).sin() * 0.9).collect();
        let b: Vec<f64> = a.iter().map(|v| -v * 0.5).collect();
        write_channels(&path, &[a.clone(), b.clone()]).unwrap();
        let back = read_channels(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (x, y) in a.iter().zip(&back[0]).chain(b.iter().zip(&back[1])) {
            assert!((x - y).abs() <= 1.0 / 8_388_608.0);
        }
    }

    #[test]
    fn clips_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.wav");
        write_channels_with_bits(&path, &[vec![2.0, -2.0]], 16).unwrap();
        let back = read_mono(&path).unwrap();
        assert_eq!(back, vec![32767.0 / 32768.0, -1.0]);
    }

    #[test]
    fn rejects_wrong_rate_and_channels() {
        let dir = tempfile::tempdir().unwrap();
        let p44 = dir.path().join("44.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 44_100,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p44, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_mono(&p44), Err(PismError::Input { .. })));

        let stereo = dir.path().join("st.wav");
        write_channels(&stereo, &[vec![0.0; 4], vec![0.0; 4]]).unwrap();
        let err = read_mono(&stereo).unwrap_err();
        assert!(err.to_string().contains("2 channels"));
    }

    #[test]
    fn rejects_unequal_lengths() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.wav");
        let b = dir.path().join("b.wav");
        write_channels(&a, &[vec![0.0; 10]]).unwrap();
        write_channels(&b, &[vec![0.0; 11]]).unwrap();
        assert!(read_objects(&[&a, &b]).is_err());
        assert_eq!(read_objects(&[&a, &a]).unwrap().len(), 2);
    }

    #[test]
    fn float_files_are_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: SAMPLE_RATE_HZ,
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(0.25f32).unwrap();
        w.finalize().unwrap();
        assert_eq!(read_mono(&p).unwrap(), vec![0.25]);
    }
}
