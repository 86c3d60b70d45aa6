use std::path::Path;
use std::process::{Command, Output};

use pism_core::wav;

fn pism(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pism"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = pism(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn objects_args(flag: &str, ext: &str, n: usize) -> Vec<String> {
    let mut v = vec![flag.to_owned()];
    v.extend((1..=n).map(|i| format!("s/obj{i}.{ext}")));
    v
}

#[test]
fn encode_decode_reference_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(
        dir,
        &[
            "scene",
            "--preset",
            "i5",
            "--objects",
            "3",
            "--seconds",
            "1.5",
            "-o",
            "s",
        ],
    );

    let mut enc: Vec<String> = vec!["encode".into()];
    enc.extend(objects_args("-i", "wav", 3));
    enc.extend(objects_args("-m", "csv", 3));
    enc.extend(["-o".into(), "x.pism".into(), "--downmix-bits".into(), "24".into()]);
    let stdout = ok(dir, &enc.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(stdout.contains("116 bits/frame, 5800 bit/s"), "{stdout}");

    let stdout = ok(dir, &["decode", "-i", "x.pism", "--layout", "5.1.4", "-o", "d.wav"]);
    assert!(stdout.contains("latency 599 samples compensated"), "{stdout}");
    let decoded = wav::read_channels(&dir.join("d.wav")).unwrap();
    assert_eq!(decoded.len(), 10);
    assert_eq!(decoded[0].len(), 72_000);

    let mut reference: Vec<String> = vec!["reference".into()];
    reference.extend(objects_args("-i", "wav", 3));
    reference.extend(objects_args("-m", "csv", 3));
    reference.extend(["--layout".into(), "5_1_4".into(), "-o".into(), "r.wav".into()]);
    ok(dir, &reference.iter().map(String::as_str).collect::<Vec<_>>());

    ok(
        dir,
        &["eval", "--decoded", "d.wav", "--reference", "r.wav", "--json", "e.json"],
    );
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("e.json")).unwrap()).unwrap();
    assert_eq!(report["channels"], 10);
    assert_eq!(report["lag_samples"], 0);
    assert!(report["max_abs_window_error_db"].as_f64().unwrap() < 1.0);
}

#[test]
fn bad_input_fails_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(
        dir,
        &[
            "scene",
            "--preset",
            "i1",
            "--objects",
            "2",
            "--seconds",
            "0.2",
            "-o",
            "s",
        ],
    );

    let out = pism(
        dir,
        &[
            "encode",
            "-i",
            "s/obj1.wav",
            "s/obj2.wav",
            "-m",
            "s/obj1.csv",
            "-o",
            "x.pism",
        ],
    );
    assert!(!out.status.success());

    let out = pism(
        dir,
        &["decode", "-i", "missing.pism", "--layout", "7.1.4", "-o", "d.wav"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.pism"));

    let out = pism(dir, &["decode", "-i", "s/obj1.wav", "--layout", "22.2", "-o", "d.wav"]);
    assert!(!out.status.success());

    std::fs::write(dir.join("junk.pism"), b"not a stream").unwrap();
    let out = pism(dir, &["decode", "-i", "junk.pism", "--layout", "7.1", "-o", "d.wav"]);
    assert!(!out.status.success());
    assert!(!dir.join("d.wav").exists());
}
