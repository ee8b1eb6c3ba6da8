//! C ABI for the proctor analysis engine.
//!
//! All handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every call returns a [`ProctorStatus`]; on
//! failure [`proctor_last_error`] describes the problem. Strings passed in
//! must be NUL-terminated UTF-8.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use proctor_core::records::parse_record_line;
use proctor_core::{
    analyze_stream, masked_distance, AnalysisReport, Analyzer, EngineConfig, Error, EventKind, FaceEncoding, Label,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProctorStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    Validation = 5,
    Config = 6,
    RegistrationFailed = 7,
    Usage = 8,
    OutOfRange = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProctorLabel {
    Clean = 0,
    Suspicious = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProctorEventKind {
    AnotherPerson = 0,
    Device = 1,
    Absence = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProctorFieldSummary {
    pub label: ProctorLabel,
    pub interval_count: usize,
    /// NaN for fields without a supporting ratio.
    pub supporting_ratio: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProctorInterval {
    pub kind: ProctorEventKind,
    pub start_sec: f64,
    pub end_sec: f64,
}

/// Engine thresholds.
pub struct ProctorConfig {
    inner: EngineConfig,
}

/// Streaming analyzer fed one JSON record line at a time.
pub struct ProctorAnalyzer {
    inner: Analyzer,
    cfg: EngineConfig,
    line: usize,
}

/// Finished analysis.
pub struct ProctorReport {
    report: AnalysisReport,
    cfg: EngineConfig,
    gallery_size: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(ProctorStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io(_) => ProctorStatus::Io,
            Error::Parse { .. } | Error::Ordering { .. } => ProctorStatus::Parse,
            Error::Validation { .. } => ProctorStatus::Validation,
            Error::Config(_) => ProctorStatus::Config,
            Error::RegistrationFailed { .. } => ProctorStatus::RegistrationFailed,
            Error::Usage(_) => ProctorStatus::Usage,
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior NUL");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ProctorStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ProctorStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            ProctorStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(ProctorStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(ProctorStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn kind_of(kind: ProctorEventKind) -> EventKind {
    match kind {
        ProctorEventKind::AnotherPerson => EventKind::AnotherPerson,
        ProctorEventKind::Device => EventKind::Device,
        ProctorEventKind::Absence => EventKind::Absence,
    }
}

fn label_of(label: Label) -> ProctorLabel {
    match label {
        Label::Clean => ProctorLabel::Clean,
        Label::Suspicious => ProctorLabel::Suspicious,
    }
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn proctor_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn proctor_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default configuration.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proctor_config_new(out: *mut *mut ProctorConfig) -> ProctorStatus {
    guard(|| {
        let cfg = Box::new(ProctorConfig {
            inner: EngineConfig::default(),
        });
        write_out(out, Box::into_raw(cfg), "out")
    })
}

/// Configuration read from a `key = value` file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn proctor_config_from_file(path: *const c_char, out: *mut *mut ProctorConfig) -> ProctorStatus {
    guard(|| {
        let path = text(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = EngineConfig::load::<&str>(Some(Path::new(path)), &[])?;
        write_out(out, Box::into_raw(Box::new(ProctorConfig { inner })), "out")
    })
}

/// Sets one key; `value` uses the config file syntax (`0.5`, `true`).
///
/// # Safety
/// `cfg` must come from this library; `key` and `value` must be
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn proctor_config_set(
    cfg: *mut ProctorConfig,
    key: *const c_char,
    value: *const c_char,
) -> ProctorStatus {
    guard(|| {
        let cfg = deref_mut(cfg, "cfg")?;
        let (key, value) = (text(key, "key")?, text(value, "value")?);
        let mut next = cfg.inner.clone();
        next.set(key, value)?;
        next.validate()?;
        cfg.inner = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn proctor_config_free(cfg: *mut ProctorConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// New analyzer using a copy of `cfg` (NULL for defaults).
///
/// # Safety
/// `cfg` must come from this library or be NULL; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn proctor_analyzer_new(
    cfg: *const ProctorConfig,
    keep_per_frame: bool,
    out: *mut *mut ProctorAnalyzer,
) -> ProctorStatus {
    guard(|| {
        let cfg = cfg.as_ref().map(|c| c.inner.clone()).unwrap_or_default();
        let analyzer = Box::new(ProctorAnalyzer {
            inner: Analyzer::new(cfg.clone(), keep_per_frame),
            cfg,
            line: 0,
        });
        write_out(out, Box::into_raw(analyzer), "out")
    })
}

/// Feeds one frame record (a JSON object). Blank lines are ignored. After a
/// failure the analyzer should be discarded.
///
/// # Safety
/// `analyzer` must come from this library; `json` must be a NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn proctor_analyzer_push_json(analyzer: *mut ProctorAnalyzer, json: *const c_char) -> ProctorStatus {
    guard(|| {
        let a = deref_mut(analyzer, "analyzer")?;
        let json = text(json, "json")?;
        a.line += 1;
        if json.trim().is_empty() {
            return Ok(());
        }
        let frame = parse_record_line(json, a.line)?;
        a.inner.push(frame)?;
        Ok(())
    })
}

/// Finishes the stream. The analyzer is consumed whatever the outcome and
/// must not be used or freed afterwards.
///
/// # Safety
/// `analyzer` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn proctor_analyzer_finish(
    analyzer: *mut ProctorAnalyzer,
    out: *mut *mut ProctorReport,
) -> ProctorStatus {
    guard(|| {
        if analyzer.is_null() {
            return Err(null("analyzer"));
        }
        let a = Box::from_raw(analyzer);
        if out.is_null() {
            return Err(null("out"));
        }
        let outcome = a.inner.finish()?;
        let report = Box::new(ProctorReport {
            report: outcome.report,
            cfg: a.cfg,
            gallery_size: outcome.gallery.len(),
        });
        write_out(out, Box::into_raw(report), "out")
    })
}

/// # Safety
/// `analyzer` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn proctor_analyzer_free(analyzer: *mut ProctorAnalyzer) {
    if !analyzer.is_null() {
        drop(Box::from_raw(analyzer));
    }
}

/// Analyzes a JSON-lines record file.
///
/// # Safety
/// `path` must be a NUL-terminated string, `cfg` from this library or NULL,
/// `out` valid.
#[no_mangle]
pub unsafe extern "C" fn proctor_analyze_file(
    path: *const c_char,
    cfg: *const ProctorConfig,
    keep_per_frame: bool,
    out: *mut *mut ProctorReport,
) -> ProctorStatus {
    guard(|| {
        let path = text(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = cfg.as_ref().map(|c| c.inner.clone()).unwrap_or_default();
        let file = std::fs::File::open(path).map_err(|e| Failure(ProctorStatus::Io, format!("{path}: {e}")))?;
        let outcome = analyze_stream(std::io::BufReader::new(file), &cfg, keep_per_frame)?;
        let report = Box::new(ProctorReport {
            report: outcome.report,
            cfg,
            gallery_size: outcome.gallery.len(),
        });
        write_out(out, Box::into_raw(report), "out")
    })
}

/// # Safety
/// `report` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn proctor_report_overall(report: *const ProctorReport, out: *mut ProctorLabel) -> ProctorStatus {
    guard(|| write_out(out, label_of(deref(report, "report")?.report.overall), "out"))
}

/// # Safety
/// `report` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn proctor_report_frame_count(report: *const ProctorReport, out: *mut usize) -> ProctorStatus {
    guard(|| write_out(out, deref(report, "report")?.report.frame_count, "out"))
}

/// # Safety
/// `report` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn proctor_report_field(
    report: *const ProctorReport,
    kind: ProctorEventKind,
    out: *mut ProctorFieldSummary,
) -> ProctorStatus {
    guard(|| {
        let d = deref(report, "report")?.report.decision(kind_of(kind));
        let summary = ProctorFieldSummary {
            label: label_of(d.label),
            interval_count: d.intervals.len(),
            supporting_ratio: d.supporting_ratio.unwrap_or(f64::NAN),
        };
        write_out(out, summary, "out")
    })
}

/// Interval `index` of one field, in time order.
///
/// # Safety
/// `report` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn proctor_report_interval(
    report: *const ProctorReport,
    kind: ProctorEventKind,
    index: usize,
    out: *mut ProctorInterval,
) -> ProctorStatus {
    guard(|| {
        let d = deref(report, "report")?.report.decision(kind_of(kind));
        let iv = d.intervals.get(index).ok_or_else(|| {
            Failure(
                ProctorStatus::OutOfRange,
                format!("interval {index} of {} ({} intervals)", d.field, d.intervals.len()),
            )
        })?;
        let value = ProctorInterval {
            kind,
            start_sec: iv.start_sec,
            end_sec: iv.end_sec,
        };
        write_out(out, value, "out")
    })
}

/// Report as JSON (same document `proctor analyze` writes). Release the
/// string with [`proctor_string_free`].
///
/// # Safety
/// `report` must come from this library; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn proctor_report_to_json(report: *const ProctorReport, out: *mut *mut c_char) -> ProctorStatus {
    guard(|| {
        let r = deref(report, "report")?;
        let json = CString::new(r.report.to_json(&r.cfg, r.gallery_size)).expect("json has no NUL");
        write_out(out, json.into_raw(), "out")
    })
}

/// # Safety
/// `s` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn proctor_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `report` must come from this library or be NULL.
#[no_mangle]
pub unsafe extern "C" fn proctor_report_free(report: *mut ProctorReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Partial-face distance between a registered and an observed encoding;
/// components of `observed` with magnitude below `eps` are skipped. Both
/// arrays hold `len` doubles and `len` must be 128.
///
/// # Safety
/// `registered` and `observed` must point to `len` doubles; `out` must be
/// valid.
#[no_mangle]
pub unsafe extern "C" fn proctor_masked_distance(
    registered: *const f64,
    observed: *const f64,
    len: usize,
    eps: f64,
    out: *mut f64,
) -> ProctorStatus {
    guard(|| {
        if registered.is_null() {
            return Err(null("registered"));
        }
        if observed.is_null() {
            return Err(null("observed"));
        }
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Failure(ProctorStatus::Validation, format!("eps must be >= 0, got {eps}")));
        }
        let s = FaceEncoding::from_slice(std::slice::from_raw_parts(registered, len))?;
        let t = FaceEncoding::from_slice(std::slice::from_raw_parts(observed, len))?;
        write_out(out, masked_distance(&s, &t, eps), "out")
    })
}
