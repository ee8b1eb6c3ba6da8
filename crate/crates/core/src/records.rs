//! Frame-record data model, ground-truth labels and their text formats.
//!
//! A record stream is newline-delimited JSON, one frame per line:
//!
//! ```text
//! {"index":0,"t":0.0,"w":400,"h":300,
//!  "faces":[{"box":[x,y,w,h],"enc":[128 floats],"yaw":0.0,"pitch":0.0}],
//!  "objects":[{"cls":"body","box":[x,y,w,h],"conf":0.9}],
//!  "tracker":{"box":[x,y,w,h],"conf":10.0,"active":true}}
//! ```
//!
//! Labels are CSV with the header `kind,start_sec,end_sec`.

use std::fmt;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

pub const ENCODING_DIM: usize = 128;

/// A 128-dimensional face embedding. All components are finite.
#[derive(Clone, PartialEq, Deserialize)]
#[serde(try_from = "Vec<f64>")]
pub struct FaceEncoding([f64; ENCODING_DIM]);

impl FaceEncoding {
    pub fn new(values: [f64; ENCODING_DIM]) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(
                "encoding",
                format!("component {i} is not finite"),
            ));
        }
        Ok(Self(values))
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let arr: [f64; ENCODING_DIM] = values.try_into().map_err(|_| {
            Error::validation(
                "encoding",
                format!("encoding length {} (expected {ENCODING_DIM})", values.len()),
            )
        })?;
        Self::new(arr)
    }

    pub fn as_array(&self) -> &[f64; ENCODING_DIM] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FaceEncoding {
    type Error = String;

    fn try_from(v: Vec<f64>) -> std::result::Result<Self, String> {
        Self::from_slice(&v).map_err(|e| match e {
            Error::Validation { message, .. } => message,
            other => other.to_string(),
        })
    }
}

impl Serialize for FaceEncoding {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(s)
    }
}

impl fmt::Debug for FaceEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FaceEncoding([{:.4}, {:.4}, {:.4}, ..])", self.0[0], self.0[1], self.0[2])
    }
}

/// Axis-aligned box in pixels, serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    fn validate(&self, frame_w: u32, frame_h: u32) -> std::result::Result<(), String> {
        let vals = [self.x, self.y, self.w, self.h];
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(format!("box {vals:?} has a non-finite coordinate"));
        }
        if self.w <= 0.0 || self.h <= 0.0 {
            return Err(format!("box {vals:?} has non-positive extent"));
        }
        if self.x < 0.0 || self.y < 0.0 {
            return Err(format!("box {vals:?} has a negative corner"));
        }
        if self.x + self.w > f64::from(frame_w) || self.y + self.h > f64::from(frame_h) {
            return Err(format!("box {vals:?} exceeds frame {frame_w}x{frame_h}"));
        }
        Ok(())
    }
}

impl From<[f64; 4]> for BoundingBox {
    fn from([x, y, w, h]: [f64; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaceObservation {
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(rename = "enc")]
    pub encoding: FaceEncoding,
    #[serde(rename = "yaw")]
    pub yaw_deg: f64,
    #[serde(rename = "pitch")]
    pub pitch_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectClass {
    #[serde(rename = "body")]
    Body,
    #[serde(rename = "phone")]
    MobilePhone,
    #[serde(rename = "laptop")]
    Laptop,
}

impl ObjectClass {
    pub fn is_device(self) -> bool {
        matches!(self, ObjectClass::MobilePhone | ObjectClass::Laptop)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectObservation {
    #[serde(rename = "cls")]
    pub class: ObjectClass,
    #[serde(rename = "box")]
    pub bbox: BoundingBox,
    #[serde(rename = "conf")]
    pub confidence: f64,
}

/// Correlation-tracker output for one frame, as reported upstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackerState {
    #[serde(rename = "box")]
    pub bbox: Option<BoundingBox>,
    #[serde(rename = "conf")]
    pub confidence: f64,
    pub active: bool,
}

impl TrackerState {
    pub fn inactive() -> Self {
        Self {
            bbox: None,
            confidence: 0.0,
            active: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub index: u64,
    #[serde(rename = "t")]
    pub timestamp_sec: f64,
    #[serde(rename = "w")]
    pub frame_w: u32,
    #[serde(rename = "h")]
    pub frame_h: u32,
    pub faces: Vec<FaceObservation>,
    pub objects: Vec<ObjectObservation>,
    pub tracker: TrackerState,
}

impl FrameRecord {
    pub fn frame_diagonal(&self) -> f64 {
        f64::from(self.frame_w).hypot(f64::from(self.frame_h))
    }

    /// Checks every per-record invariant (ordering is checked by the stream).
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !self.timestamp_sec.is_finite() || self.timestamp_sec < 0.0 {
            return Err(format!("timestamp {} is not a non-negative finite number", self.timestamp_sec));
        }
        if self.frame_w == 0 || self.frame_h == 0 {
            return Err("frame dimensions must be positive".into());
        }
        for (i, face) in self.faces.iter().enumerate() {
            face.bbox
                .validate(self.frame_w, self.frame_h)
                .map_err(|m| format!("face {i}: {m}"))?;
            for (name, angle) in [("yaw", face.yaw_deg), ("pitch", face.pitch_deg)] {
                if !(-90.0..=90.0).contains(&angle) {
                    return Err(format!("face {i}: {name} {angle} outside [-90, 90]"));
                }
            }
        }
        for (i, obj) in self.objects.iter().enumerate() {
            obj.bbox
                .validate(self.frame_w, self.frame_h)
                .map_err(|m| format!("object {i}: {m}"))?;
            if !(0.0..=1.0).contains(&obj.confidence) {
                return Err(format!("object {i}: confidence {} outside [0, 1]", obj.confidence));
            }
        }
        let tr = &self.tracker;
        if !tr.confidence.is_finite() || tr.confidence < 0.0 {
            return Err(format!("tracker confidence {} is not a non-negative finite number", tr.confidence));
        }
        match (&tr.bbox, tr.active) {
            (None, true) => return Err("tracker is active but has no box".into()),
            (Some(b), _) => b
                .validate(self.frame_w, self.frame_h)
                .map_err(|m| format!("tracker: {m}"))?,
            (None, false) => {}
        }
        Ok(())
    }
}

/// Enforces strictly increasing frame index and timestamp.
#[derive(Debug, Default, Clone)]
pub struct StreamOrder {
    last: Option<(u64, f64)>,
}

impl StreamOrder {
    pub fn check(&mut self, line: usize, rec: &FrameRecord) -> Result<()> {
        if let Some((index, t)) = self.last {
            if rec.index <= index {
                return Err(Error::Ordering {
                    line,
                    message: format!("frame index {} does not follow {index}", rec.index),
                });
            }
            if rec.timestamp_sec <= t {
                return Err(Error::Ordering {
                    line,
                    message: format!("timestamp {} does not follow {t}", rec.timestamp_sec),
                });
            }
        }
        self.last = Some((rec.index, rec.timestamp_sec));
        Ok(())
    }
}

/// Decodes and validates a single record line. `line` is 1-based and only
/// used for error messages.
pub fn parse_record_line(text: &str, line: usize) -> Result<FrameRecord> {
    let rec: FrameRecord = serde_json::from_str(text).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    rec.validate().map_err(|message| Error::Parse { line, message })?;
    Ok(rec)
}

/// Streaming reader over a record stream. Holds one line in memory at a time.
pub struct RecordReader<R> {
    source: R,
    buf: String,
    line: usize,
    order: StreamOrder,
    failed: bool,
}

impl<R: BufRead> RecordReader<R> {
    pub fn new(source: R) -> Self {
        Self {
            source,
            buf: String::new(),
            line: 0,
            order: StreamOrder::default(),
            failed: false,
        }
    }
}

impl<R: BufRead> Iterator for RecordReader<R> {
    type Item = Result<FrameRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            self.buf.clear();
            self.line += 1;
            match self.source.read_line(&mut self.buf) {
                Ok(0) => return None,
                Ok(_) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e.into()));
                }
            }
            let text = self.buf.trim();
            if text.is_empty() {
                continue;
            }
            let res = parse_record_line(text, self.line)
                .and_then(|rec| self.order.check(self.line, &rec).map(|_| rec));
            self.failed = res.is_err();
            return Some(res);
        }
    }
}

pub fn read_record_stream<R: BufRead>(source: R) -> Result<Vec<FrameRecord>> {
    RecordReader::new(source).collect()
}

/// Writes one record per line. Records are validated first so a NaN or an
/// out-of-range value never reaches the sink.
pub fn write_record_stream<'a, W, I>(records: I, mut sink: W) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = &'a FrameRecord>,
{
    let mut order = StreamOrder::default();
    for (i, rec) in records.into_iter().enumerate() {
        rec.validate()
            .map_err(|m| Error::validation(format!("record {}", rec.index), m))?;
        order.check(i + 1, rec)?;
        serde_json::to_writer(&mut sink, rec).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    AnotherPerson,
    Device,
    Absence,
}

impl EventKind {
    pub const ALL: [EventKind; 3] = [EventKind::AnotherPerson, EventKind::Device, EventKind::Absence];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::AnotherPerson => "another_person",
            EventKind::Device => "device",
            EventKind::Absence => "absence",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

/// A typed, time-bounded cheating occurrence, `[start_sec, end_sec)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventInterval {
    pub kind: EventKind,
    pub start_sec: f64,
    pub end_sec: f64,
}

impl EventInterval {
    pub fn new(kind: EventKind, start_sec: f64, end_sec: f64) -> Result<Self> {
        if !start_sec.is_finite() || !end_sec.is_finite() {
            return Err(Error::validation(
                format!("{kind} interval"),
                "bounds must be finite",
            ));
        }
        if start_sec >= end_sec {
            return Err(Error::validation(
                format!("{kind} interval"),
                format!("start {start_sec} must be before end {end_sec}"),
            ));
        }
        Ok(Self {
            kind,
            start_sec,
            end_sec,
        })
    }

    pub fn duration(&self) -> f64 {
        self.end_sec - self.start_sec
    }
}

/// Checks that same-kind intervals do not overlap. Touching ends are fine.
pub fn validate_label_set(intervals: &[EventInterval]) -> Result<()> {
    for kind in EventKind::ALL {
        let mut same: Vec<&EventInterval> = intervals.iter().filter(|i| i.kind == kind).collect();
        same.sort_by(|a, b| a.start_sec.total_cmp(&b.start_sec));
        for pair in same.windows(2) {
            if pair[1].start_sec < pair[0].end_sec {
                return Err(Error::validation(
                    format!("{kind} labels"),
                    format!(
                        "[{}, {}] overlaps [{}, {}]",
                        pair[0].start_sec, pair[0].end_sec, pair[1].start_sec, pair[1].end_sec
                    ),
                ));
            }
        }
    }
    Ok(())
}

#[derive(Deserialize, Serialize)]
struct LabelRow {
    kind: String,
    start_sec: f64,
    end_sec: f64,
}

/// Reads a label file, preserving file order.
pub fn read_labels<R: Read>(source: R) -> Result<Vec<EventInterval>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut out = Vec::new();
    for row in rdr.deserialize::<LabelRow>() {
        let row = row.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let kind = row.kind.parse().map_err(|message| Error::Parse {
            line: out.len() + 2,
            message,
        })?;
        out.push(EventInterval::new(kind, row.start_sec, row.end_sec)?);
    }
    validate_label_set(&out)?;
    Ok(out)
}

pub fn write_labels<W: Write>(intervals: &[EventInterval], sink: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(sink);
    // header is emitted even for an empty label set
    wtr.write_record(["kind", "start_sec", "end_sec"])
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    for iv in intervals {
        wtr.write_record([
            iv.kind.as_str().to_string(),
            iv.start_sec.to_string(),
            iv.end_sec.to_string(),
        ])
        .map_err(|e| std::io::Error::other(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
