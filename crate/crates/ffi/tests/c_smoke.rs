//! Compiles `tests/c/smoke.c` against the generated header and the static
//! library, then runs it on a synthetic stream.

use std::path::{Path, PathBuf};
use std::process::Command;

use proctor_core::synth::{generate, NoiseProfile, Scenario};
use proctor_core::{write_record_stream, EventInterval, EventKind};

fn static_lib() -> PathBuf {
    // target/<profile>/deps/c_smoke-* -> target/<profile>/libproctor_ffi.a
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let lib = profile_dir.join("libproctor_ffi.a");
    assert!(lib.exists(), "{} not built", lib.display());
    lib
}

#[test]
fn c_program_links_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = Scenario {
        duration_sec: 60.0,
        fps: 3.0,
        seed: 4,
        events: vec![EventInterval::new(EventKind::Device, 30.0, 40.0).unwrap()],
        noise: NoiseProfile::default(),
    };
    let (records, _) = generate(&scenario).unwrap();
    let rec = dir.path().join("v.jsonl");
    write_record_stream(&records, std::fs::File::create(&rec).unwrap()).unwrap();

    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let exe = dir.path().join("smoke");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    let status = Command::new(cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(static_lib())
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());

    let out = Command::new(&exe).arg(&rec).output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}\n{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(
        stdout,
        "overall suspicious\ndevice 30.000 40.000\ndistance 0.300\nnull out -> 1\n"
    );
}
