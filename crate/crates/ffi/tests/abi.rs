use std::ffi::{CStr, CString};
use std::ptr;

use proctor_core::synth::{generate, NoiseProfile, Scenario};
use proctor_core::{write_record_stream, EventInterval, EventKind};
use proctor_ffi::*;

fn last_error() -> String {
    let p = proctor_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn device_stream() -> Vec<String> {
    let scenario = Scenario {
        duration_sec: 60.0,
        fps: 3.0,
        seed: 9,
        events: vec![EventInterval::new(EventKind::Device, 30.0, 40.0).unwrap()],
        noise: NoiseProfile::default(),
    };
    let (records, _) = generate(&scenario).unwrap();
    let mut buf = Vec::new();
    write_record_stream(&records, &mut buf).unwrap();
    String::from_utf8(buf).unwrap().lines().map(str::to_owned).collect()
}

#[test]
fn version_is_static_string() {
    let v = unsafe { CStr::from_ptr(proctor_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn streaming_analysis() {
    unsafe {
        let mut analyzer = ptr::null_mut();
        assert_eq!(proctor_analyzer_new(ptr::null(), false, &mut analyzer), ProctorStatus::Ok);
        for line in device_stream() {
            let c = CString::new(line).unwrap();
            assert_eq!(proctor_analyzer_push_json(analyzer, c.as_ptr()), ProctorStatus::Ok);
        }
        let mut report = ptr::null_mut();
        assert_eq!(proctor_analyzer_finish(analyzer, &mut report), ProctorStatus::Ok);

        let mut label = ProctorLabel::Clean;
        assert_eq!(proctor_report_overall(report, &mut label), ProctorStatus::Ok);
        assert_eq!(label, ProctorLabel::Suspicious);
        let mut n = 0;
        assert_eq!(proctor_report_frame_count(report, &mut n), ProctorStatus::Ok);
        assert_eq!(n, 180);

        let mut field = std::mem::zeroed::<ProctorFieldSummary>();
        assert_eq!(proctor_report_field(report, ProctorEventKind::Device, &mut field), ProctorStatus::Ok);
        assert_eq!((field.label, field.interval_count), (ProctorLabel::Suspicious, 1));
        assert!(field.supporting_ratio.is_nan());
        assert_eq!(proctor_report_field(report, ProctorEventKind::Absence, &mut field), ProctorStatus::Ok);
        assert_eq!(field.supporting_ratio, 0.0);

        let mut iv = std::mem::zeroed::<ProctorInterval>();
        assert_eq!(proctor_report_interval(report, ProctorEventKind::Device, 0, &mut iv), ProctorStatus::Ok);
        assert_eq!((iv.kind, iv.start_sec, iv.end_sec), (ProctorEventKind::Device, 30.0, 40.0));
        assert_eq!(
            proctor_report_interval(report, ProctorEventKind::Device, 1, &mut iv),
            ProctorStatus::OutOfRange
        );
        assert!(last_error().contains("interval 1"));

        let mut json = ptr::null_mut();
        assert_eq!(proctor_report_to_json(report, &mut json), ProctorStatus::Ok);
        let text = CStr::from_ptr(json).to_str().unwrap().to_owned();
        proctor_string_free(json);
        assert!(text.contains("\"overall\": \"suspicious\""));
        proctor_report_free(report);
    }
}

#[test]
fn config_handle() {
    unsafe {
        let mut cfg = ptr::null_mut();
        assert_eq!(proctor_config_new(&mut cfg), ProctorStatus::Ok);
        let key = CString::new("device_conf_threshold").unwrap();
        let ok = CString::new("0.7").unwrap();
        let bad = CString::new("-0.5").unwrap();
        assert_eq!(proctor_config_set(cfg, key.as_ptr(), ok.as_ptr()), ProctorStatus::Ok);
        assert_eq!(proctor_config_set(cfg, key.as_ptr(), bad.as_ptr()), ProctorStatus::Config);
        assert!(last_error().contains("device_conf_threshold"));
        let unknown = CString::new("nope").unwrap();
        assert_eq!(proctor_config_set(cfg, unknown.as_ptr(), ok.as_ptr()), ProctorStatus::Config);

        // the failed set left 0.7 in place, above the synthetic device confidence
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.jsonl");
        std::fs::write(&path, device_stream().join("\n")).unwrap();
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        let mut report = ptr::null_mut();
        assert_eq!(proctor_analyze_file(cpath.as_ptr(), cfg, false, &mut report), ProctorStatus::Ok);
        let mut label = ProctorLabel::Suspicious;
        proctor_report_overall(report, &mut label);
        assert_eq!(label, ProctorLabel::Clean);
        proctor_report_free(report);
        proctor_config_free(cfg);

        let cfg_path = dir.path().join("engine.toml");
        std::fs::write(&cfg_path, "fps = 5\nlink_gap_sec = 1.0\n").unwrap();
        let c = CString::new(cfg_path.to_str().unwrap()).unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(proctor_config_from_file(c.as_ptr(), &mut cfg), ProctorStatus::Ok);
        proctor_config_free(cfg);
        std::fs::write(&cfg_path, "fps = \"fast\"\n").unwrap();
        assert_eq!(proctor_config_from_file(c.as_ptr(), &mut cfg), ProctorStatus::Config);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut report = ptr::null_mut();
        assert_eq!(proctor_analyze_file(ptr::null(), ptr::null(), false, &mut report), ProctorStatus::NullPointer);
        let missing = CString::new("/nonexistent/x.jsonl").unwrap();
        assert_eq!(proctor_analyze_file(missing.as_ptr(), ptr::null(), false, &mut report), ProctorStatus::Io);
        assert!(last_error().contains("/nonexistent/x.jsonl"));

        let invalid = [0xffu8, 0xfe, 0];
        assert_eq!(
            proctor_analyze_file(invalid.as_ptr().cast(), ptr::null(), false, &mut report),
            ProctorStatus::InvalidUtf8
        );

        let mut analyzer = ptr::null_mut();
        proctor_analyzer_new(ptr::null(), false, &mut analyzer);
        let junk = CString::new("{\"index\": 0").unwrap();
        assert_eq!(proctor_analyzer_push_json(analyzer, junk.as_ptr()), ProctorStatus::Parse);
        proctor_analyzer_free(analyzer);

        // nobody ever faces the camera
        proctor_analyzer_new(ptr::null(), false, &mut analyzer);
        let empty_frame = |i: u32| {
            CString::new(format!(
                r#"{{"index": {i}, "t": {}, "w": 400, "h": 300, "faces": [], "objects": [], "tracker": {{"box": null, "conf": 0.0, "active": false}}}}"#,
                f64::from(i) / 3.0
            ))
            .unwrap()
        };
        for i in 0..60 {
            let line = empty_frame(i);
            assert_eq!(proctor_analyzer_push_json(analyzer, line.as_ptr()), ProctorStatus::Ok, "{}", last_error());
        }
        // the first frame past the window closes registration
        let line = empty_frame(60);
        assert_eq!(proctor_analyzer_push_json(analyzer, line.as_ptr()), ProctorStatus::RegistrationFailed);
        proctor_analyzer_free(analyzer);

        // a stream that ends inside the window fails at finish
        proctor_analyzer_new(ptr::null(), false, &mut analyzer);
        let line = empty_frame(0);
        proctor_analyzer_push_json(analyzer, line.as_ptr());
        assert_eq!(proctor_analyzer_finish(analyzer, &mut report), ProctorStatus::RegistrationFailed);

        // an empty stream has nobody to register either
        proctor_analyzer_new(ptr::null(), false, &mut analyzer);
        assert_eq!(proctor_analyzer_finish(analyzer, &mut report), ProctorStatus::RegistrationFailed);
        assert_eq!(proctor_analyzer_finish(ptr::null_mut(), &mut report), ProctorStatus::NullPointer);

        assert_eq!(proctor_report_overall(ptr::null(), ptr::null_mut()), ProctorStatus::NullPointer);
        proctor_report_free(ptr::null_mut());
        proctor_config_free(ptr::null_mut());
        proctor_string_free(ptr::null_mut());
    }
}

#[test]
fn masked_distance_entry_point() {
    let s: Vec<f64> = (0..128).map(|i| f64::from(i) / 256.0).collect();
    let mut t = s.clone();
    t[0] = 0.5;
    t[1] = 0.001;
    let mut d = -1.0;
    unsafe {
        assert_eq!(proctor_masked_distance(s.as_ptr(), t.as_ptr(), 128, 0.01, &mut d), ProctorStatus::Ok);
        assert!((d - 0.5).abs() < 1e-12);
        assert_eq!(
            proctor_masked_distance(s.as_ptr(), t.as_ptr(), 64, 0.01, &mut d),
            ProctorStatus::Validation
        );
        assert!(last_error().contains("128"));
        assert_eq!(
            proctor_masked_distance(ptr::null(), t.as_ptr(), 128, 0.01, &mut d),
            ProctorStatus::NullPointer
        );
        assert_eq!(
            proctor_masked_distance(s.as_ptr(), t.as_ptr(), 128, -1.0, &mut d),
            ProctorStatus::Validation
        );
    }
}

#[test]
fn header_matches_exports() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/proctor.h")).unwrap();
    for name in [
        "proctor_version",
        "proctor_last_error",
        "proctor_config_new",
        "proctor_config_from_file",
        "proctor_config_set",
        "proctor_config_free",
        "proctor_analyzer_new",
        "proctor_analyzer_push_json",
        "proctor_analyzer_finish",
        "proctor_analyzer_free",
        "proctor_analyze_file",
        "proctor_report_overall",
        "proctor_report_frame_count",
        "proctor_report_field",
        "proctor_report_interval",
        "proctor_report_to_json",
        "proctor_report_free",
        "proctor_string_free",
        "proctor_masked_distance",
    ] {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
    assert!(header.contains("typedef struct ProctorReport ProctorReport;"));
    assert!(header.contains("PROCTOR_STATUS_REGISTRATION_FAILED = 7"));
}
