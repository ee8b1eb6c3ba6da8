//! Per-frame nomination, temporal linking and the three-field decision.
//!
//! Everything past nomination is a single-pass reducer over frames in
//! timestamp order, so a whole video can be analyzed while holding only the
//! registration window and the linked intervals in memory.

use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::face_match::classify_faces;
use crate::records::{EventInterval, EventKind, FrameRecord, ObjectClass, RecordReader, StreamOrder};
use crate::registration::{in_window, register_candidate, CandidateGallery};
use crate::track_reconcile::{reconcile, ReconciledFrame};

/// Slack for comparing timestamps that went through float division.
pub const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameVerdict {
    pub index: u64,
    #[serde(rename = "t")]
    pub timestamp_sec: f64,
    pub candidate_present: bool,
    pub other_face_nominated: bool,
    pub body_nominated: bool,
    pub device_nominated: bool,
    pub body_count: usize,
    pub max_device_conf: f64,
    /// Closest face distance in the frame, if any face was seen.
    pub face_distance: Option<f64>,
    pub max_body_conf: f64,
    pub tracker_used: bool,
    pub divergence_flag: bool,
}

impl FrameVerdict {
    pub fn another_person(&self) -> bool {
        self.other_face_nominated || self.body_nominated
    }

    pub fn absence_support(&self) -> bool {
        !self.candidate_present && self.body_count == 0
    }
}

pub fn nominate_frame(frame: &FrameRecord, rec: &ReconciledFrame, cfg: &EngineConfig) -> FrameVerdict {
    nominate_with_distance(frame, rec, None, cfg)
}

fn nominate_with_distance(
    frame: &FrameRecord,
    rec: &ReconciledFrame,
    face_distance: Option<f64>,
    cfg: &EngineConfig,
) -> FrameVerdict {
    let mut body_count = 0;
    let mut max_body_conf: f64 = 0.0;
    let mut max_device_conf: f64 = 0.0;
    let mut device_nominated = false;
    for obj in &frame.objects {
        match obj.class {
            ObjectClass::Body => {
                max_body_conf = max_body_conf.max(obj.confidence);
                if obj.confidence >= cfg.body_conf_threshold {
                    body_count += 1;
                }
            }
            ObjectClass::MobilePhone | ObjectClass::Laptop => {
                if obj.confidence >= cfg.device_conf_threshold {
                    device_nominated = true;
                    max_device_conf = max_device_conf.max(obj.confidence);
                }
            }
        }
    }
    FrameVerdict {
        index: frame.index,
        timestamp_sec: frame.timestamp_sec,
        candidate_present: rec.candidate_present,
        other_face_nominated: rec.other_face_count >= 1,
        body_nominated: (body_count == 1 && !rec.candidate_present) || body_count > 1,
        device_nominated,
        body_count,
        max_device_conf,
        face_distance,
        max_body_conf,
        tracker_used: rec.tracker_used,
        divergence_flag: rec.divergence_flag,
    }
}

/// Incrementally merges nominated timestamps into intervals.
#[derive(Debug, Clone)]
pub struct IntervalLinker {
    kind: EventKind,
    gap: f64,
    period: f64,
    open: Option<(f64, f64)>,
    closed: Vec<EventInterval>,
}

impl IntervalLinker {
    pub fn new(kind: EventKind, cfg: &EngineConfig) -> Self {
        Self {
            kind,
            gap: cfg.link_gap_sec,
            period: cfg.frame_period(),
            open: None,
            closed: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64) {
        self.open = match self.open {
            Some((start, last)) if t - last <= self.gap + TIME_EPS => Some((start, t)),
            Some(run) => {
                self.close(run, t);
                Some((t, t))
            }
            None => Some((t, t)),
        };
    }

    /// `next` is the start of the following run; the end is clamped to it
    /// so touching runs never overlap through rounding.
    fn close(&mut self, (start, last): (f64, f64), next: f64) {
        self.closed.push(EventInterval {
            kind: self.kind,
            start_sec: start,
            end_sec: (last + self.period).min(next),
        });
    }

    pub fn finish(mut self) -> Vec<EventInterval> {
        if let Some(run) = self.open.take() {
            self.close(run, f64::INFINITY);
        }
        self.closed
    }
}

/// Links nominated `(index, timestamp)` pairs, given in timestamp order.
/// Each interval ends one frame period after its last frame, or at the start
/// of the next interval if that comes first.
pub fn link_frames(kind: EventKind, nominated: &[(u64, f64)], cfg: &EngineConfig) -> Vec<EventInterval> {
    let mut linker = IntervalLinker::new(kind, cfg);
    for &(_, t) in nominated {
        linker.push(t);
    }
    linker.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Clean,
    Suspicious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDecision {
    pub field: EventKind,
    pub label: Label,
    #[serde(with = "interval_pairs")]
    pub intervals: Vec<EventInterval>,
    /// Fraction of frames supporting absence; set only for the absence field.
    pub supporting_ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub frame_count: usize,
    pub decisions: [FieldDecision; 3],
    pub overall: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_frame: Option<Vec<FrameVerdict>>,
}

impl AnalysisReport {
    pub fn decision(&self, kind: EventKind) -> &FieldDecision {
        &self.decisions[kind.index()]
    }

    pub fn intervals(&self) -> impl Iterator<Item = &EventInterval> {
        self.decisions.iter().flat_map(|d| d.intervals.iter())
    }
}

/// Folds frame verdicts into the final report.
#[derive(Debug, Clone)]
pub struct DecisionAccumulator {
    cfg: EngineConfig,
    another: IntervalLinker,
    device: IntervalLinker,
    absence: IntervalLinker,
    frames: usize,
    absence_frames: usize,
    per_frame: Option<Vec<FrameVerdict>>,
}

impl DecisionAccumulator {
    pub fn new(cfg: &EngineConfig, keep_per_frame: bool) -> Self {
        Self {
            cfg: cfg.clone(),
            another: IntervalLinker::new(EventKind::AnotherPerson, cfg),
            device: IntervalLinker::new(EventKind::Device, cfg),
            absence: IntervalLinker::new(EventKind::Absence, cfg),
            frames: 0,
            absence_frames: 0,
            per_frame: keep_per_frame.then(Vec::new),
        }
    }

    pub fn push(&mut self, v: FrameVerdict) {
        self.frames += 1;
        let t = v.timestamp_sec;
        if v.another_person() {
            self.another.push(t);
        }
        if v.device_nominated {
            self.device.push(t);
        }
        if v.absence_support() {
            self.absence_frames += 1;
            self.absence.push(t);
        }
        if let Some(pf) = self.per_frame.as_mut() {
            pf.push(v);
        }
    }

    pub fn finish(self) -> Result<AnalysisReport> {
        if self.frames == 0 {
            return Err(Error::Usage("no frames to decide on".into()));
        }
        let ratio = self.absence_frames as f64 / self.frames as f64;
        let by_count = |field, intervals: Vec<EventInterval>| FieldDecision {
            field,
            label: if intervals.is_empty() { Label::Clean } else { Label::Suspicious },
            intervals,
            supporting_ratio: None,
        };
        let decisions = [
            by_count(EventKind::AnotherPerson, self.another.finish()),
            by_count(EventKind::Device, self.device.finish()),
            FieldDecision {
                field: EventKind::Absence,
                label: if ratio > self.cfg.absence_ratio_limit {
                    Label::Suspicious
                } else {
                    Label::Clean
                },
                intervals: self.absence.finish(),
                supporting_ratio: Some(ratio),
            },
        ];
        let overall = if decisions.iter().any(|d| d.label == Label::Suspicious) {
            Label::Suspicious
        } else {
            Label::Clean
        };
        Ok(AnalysisReport {
            frame_count: self.frames,
            decisions,
            overall,
            per_frame: self.per_frame,
        })
    }
}

/// Decision over a complete verdict table. The table is kept in the report.
pub fn decide(per_frame: &[FrameVerdict], cfg: &EngineConfig) -> Result<AnalysisReport> {
    let mut acc = DecisionAccumulator::new(cfg, true);
    for v in per_frame {
        acc.push(v.clone());
    }
    acc.finish()
}

/// Runs matching, reconciliation and nomination for one frame.
pub fn process_frame(frame: &FrameRecord, gallery: &CandidateGallery, cfg: &EngineConfig) -> Result<FrameVerdict> {
    let faces = classify_faces(frame, gallery, cfg)?;
    let rec = reconcile(frame, &faces, cfg);
    Ok(nominate_with_distance(frame, &rec, faces.min_distance(), cfg))
}

enum Stage {
    Registering(Vec<FrameRecord>),
    Running(CandidateGallery, Box<DecisionAccumulator>),
}

/// Push-based analyzer for a frame stream.
///
/// Frames inside the registration window are buffered until the window
/// closes; after that every frame is processed as it arrives.
pub struct Analyzer {
    cfg: EngineConfig,
    keep_per_frame: bool,
    order: StreamOrder,
    pushed: usize,
    stage: Stage,
}

impl Analyzer {
    pub fn new(cfg: EngineConfig, keep_per_frame: bool) -> Self {
        Self {
            cfg,
            keep_per_frame,
            order: StreamOrder::default(),
            pushed: 0,
            stage: Stage::Registering(Vec::new()),
        }
    }

    pub fn gallery(&self) -> Option<&CandidateGallery> {
        match &self.stage {
            Stage::Running(g, _) => Some(g),
            Stage::Registering(_) => None,
        }
    }

    pub fn push(&mut self, frame: FrameRecord) -> Result<()> {
        self.pushed += 1;
        self.order.check(self.pushed, &frame)?;
        if let Stage::Registering(buf) = &mut self.stage {
            if in_window(&frame, &self.cfg) {
                buf.push(frame);
                return Ok(());
            }
            self.start_running()?;
        }
        self.run(&frame)
    }

    fn start_running(&mut self) -> Result<()> {
        let Stage::Registering(buf) = &mut self.stage else {
            return Ok(());
        };
        let buffered = std::mem::take(buf);
        let gallery = register_candidate(&buffered, &self.cfg)?;
        let acc = DecisionAccumulator::new(&self.cfg, self.keep_per_frame);
        self.stage = Stage::Running(gallery, Box::new(acc));
        for frame in &buffered {
            self.run(frame)?;
        }
        Ok(())
    }

    fn run(&mut self, frame: &FrameRecord) -> Result<()> {
        let Stage::Running(gallery, acc) = &mut self.stage else {
            unreachable!("run called before registration");
        };
        acc.push(process_frame(frame, gallery, &self.cfg)?);
        Ok(())
    }

    pub fn finish(mut self) -> Result<AnalysisOutcome> {
        self.start_running()?;
        let Stage::Running(gallery, acc) = self.stage else {
            unreachable!();
        };
        Ok(AnalysisOutcome {
            gallery,
            report: acc.finish()?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct AnalysisOutcome {
    pub gallery: CandidateGallery,
    pub report: AnalysisReport,
}

/// Analyzes an in-memory sequence of records.
pub fn analyze_records<'a, I>(records: I, cfg: &EngineConfig, keep_per_frame: bool) -> Result<AnalysisOutcome>
where
    I: IntoIterator<Item = &'a FrameRecord>,
{
    let mut analyzer = Analyzer::new(cfg.clone(), keep_per_frame);
    for rec in records {
        analyzer.push(rec.clone())?;
    }
    analyzer.finish()
}

/// Analyzes a JSONL record stream line by line.
pub fn analyze_stream<R: BufRead>(source: R, cfg: &EngineConfig, keep_per_frame: bool) -> Result<AnalysisOutcome> {
    let mut analyzer = Analyzer::new(cfg.clone(), keep_per_frame);
    for rec in RecordReader::new(source) {
        analyzer.push(rec?)?;
    }
    analyzer.finish()
}

mod interval_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::records::{EventInterval, EventKind};

    pub fn serialize<S: Serializer>(v: &[EventInterval], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|i| [i.start_sec, i.end_sec])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    // kind is restored from the enclosing field by `AnalysisReport::from_json`
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<EventInterval>, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs
            .into_iter()
            .map(|[start_sec, end_sec]| EventInterval {
                kind: EventKind::AnotherPerson,
                start_sec,
                end_sec,
            })
            .collect())
    }
}

/// Version tag written into every serialized report.
pub const REPORT_SCHEMA: &str = "proctor-report/1";

#[derive(Serialize, Deserialize)]
struct ReportFile<R> {
    schema: String,
    config: EngineConfig,
    gallery_size: usize,
    #[serde(flatten)]
    report: R,
}

impl AnalysisReport {
    /// Serializes the report with the config it was produced under.
    pub fn to_json(&self, cfg: &EngineConfig, gallery_size: usize) -> String {
        let file = ReportFile {
            schema: REPORT_SCHEMA.to_string(),
            config: cfg.clone(),
            gallery_size,
            report: self,
        };
        let mut text = serde_json::to_string_pretty(&file).expect("report serializes");
        text.push('\n');
        text
    }

    /// Decodes a report written by [`AnalysisReport::to_json`], returning
    /// the embedded config as well.
    pub fn from_json(text: &str) -> Result<(AnalysisReport, EngineConfig)> {
        let file: ReportFile<AnalysisReport> = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })?;
        if file.schema != REPORT_SCHEMA {
            return Err(Error::validation("report", format!("unsupported schema `{}`", file.schema)));
        }
        let mut report = file.report;
        for d in &mut report.decisions {
            for iv in &mut d.intervals {
                iv.kind = d.field;
            }
        }
        Ok((report, file.config))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{BoundingBox, ObjectObservation, TrackerState};

    fn frame_with(objects: Vec<(ObjectClass, f64)>) -> FrameRecord {
        FrameRecord {
            index: 0,
            timestamp_sec: 0.0,
            frame_w: 400,
            frame_h: 300,
            faces: vec![],
            objects: objects
                .into_iter()
                .map(|(class, confidence)| ObjectObservation {
                    class,
                    bbox: BoundingBox::new(1.0, 1.0, 10.0, 10.0),
                    confidence,
                })
                .collect(),
            tracker: TrackerState::inactive(),
        }
    }

    fn rec(present: bool, others: usize) -> ReconciledFrame {
        ReconciledFrame {
            candidate_present: present,
            other_face_count: others,
            tracker_used: false,
            divergence_flag: false,
        }
    }

    fn verdict(t: f64) -> FrameVerdict {
        FrameVerdict {
            index: (t * 3.0).round() as u64,
            timestamp_sec: t,
            candidate_present: true,
            other_face_nominated: false,
            body_nominated: false,
            device_nominated: false,
            body_count: 1,
            max_device_conf: 0.0,
            face_distance: Some(0.1),
            max_body_conf: 0.9,
            tracker_used: false,
            divergence_flag: false,
        }
    }

    #[test]
    fn legitimate_frame_nominates_nothing() {
        let cfg = EngineConfig::default();
        let v = nominate_frame(&frame_with(vec![(ObjectClass::Body, 0.9)]), &rec(true, 0), &cfg);
        assert!(!v.another_person() && !v.device_nominated && !v.absence_support());
        assert_eq!(v.body_count, 1);
    }

    #[test]
    fn body_rules() {
        let cfg = EngineConfig::default();
        let two = frame_with(vec![(ObjectClass::Body, 0.8), (ObjectClass::Body, 0.7)]);
        assert!(nominate_frame(&two, &rec(true, 0), &cfg).body_nominated);

        let one = frame_with(vec![(ObjectClass::Body, 0.8)]);
        assert!(nominate_frame(&one, &rec(false, 0), &cfg).body_nominated);

        let weak = frame_with(vec![(ObjectClass::Body, 0.8), (ObjectClass::Body, 0.64)]);
        let v = nominate_frame(&weak, &rec(true, 0), &cfg);
        assert!(!v.body_nominated);
        assert_eq!(v.body_count, 1);
        assert_eq!(v.max_body_conf, 0.8);

        assert!(nominate_frame(&frame_with(vec![]), &rec(true, 1), &cfg).other_face_nominated);
    }

    #[test]
    fn device_threshold_boundary() {
        let cfg = EngineConfig::default();
        let at = |c| nominate_frame(&frame_with(vec![(ObjectClass::MobilePhone, c)]), &rec(true, 0), &cfg);
        assert!(at(0.31).device_nominated);
        assert_eq!(at(0.31).max_device_conf, 0.31);
        assert!(at(0.30).device_nominated);
        assert!(!at(0.29).device_nominated);
        assert_eq!(at(0.29).max_device_conf, 0.0);
        let laptop = nominate_frame(&frame_with(vec![(ObjectClass::Laptop, 0.5)]), &rec(true, 0), &cfg);
        assert!(laptop.device_nominated);
    }

    #[test]
    fn linking() {
        let cfg = EngineConfig::default();
        assert!(link_frames(EventKind::Device, &[], &cfg).is_empty());

        let run = link_frames(EventKind::Device, &[(3, 1.0), (4, 4.0 / 3.0), (5, 5.0 / 3.0)], &cfg);
        assert_eq!(run.len(), 1);
        assert_eq!(run[0].start_sec, 1.0);
        assert!((run[0].end_sec - 2.0).abs() < 1e-12);

        let split = link_frames(EventKind::Device, &[(3, 1.0), (30, 10.0)], &cfg);
        assert_eq!(split.len(), 2);
        assert!((split[0].end_sec - 4.0 / 3.0).abs() < 1e-12);

        // exactly link_gap_sec apart still links, despite float rounding
        let edge = link_frames(EventKind::Device, &[(0, 0.0), (6, 6.0 / 3.0)], &cfg);
        assert_eq!(edge.len(), 1);
    }

    #[test]
    fn decide_requires_frames() {
        assert!(matches!(decide(&[], &EngineConfig::default()), Err(Error::Usage(_))));
    }

    #[test]
    fn all_clean() {
        let frames: Vec<_> = (0..30).map(|i| verdict(i as f64 / 3.0)).collect();
        let r = decide(&frames, &EngineConfig::default()).unwrap();
        assert_eq!(r.overall, Label::Clean);
        assert!(r.decisions.iter().all(|d| d.label == Label::Clean && d.intervals.is_empty()));
        assert_eq!(r.decision(EventKind::Absence).supporting_ratio, Some(0.0));
    }

    fn with_absence(n_support: usize) -> AnalysisReport {
        let frames: Vec<_> = (0..100)
            .map(|i| {
                let mut v = verdict(i as f64 / 3.0);
                if i < n_support {
                    v.candidate_present = false;
                    v.body_count = 0;
                }
                v
            })
            .collect();
        decide(&frames, &EngineConfig::default()).unwrap()
    }

    #[test]
    fn absence_ratio_boundary_is_exclusive() {
        let six = with_absence(6);
        assert_eq!(six.decision(EventKind::Absence).label, Label::Suspicious);
        assert_eq!(six.overall, Label::Suspicious);
        let five = with_absence(5);
        assert_eq!(five.decision(EventKind::Absence).label, Label::Clean);
        assert_eq!(five.decision(EventKind::Absence).intervals.len(), 1);
        assert_eq!(five.overall, Label::Clean);
    }

    #[test]
    fn single_device_interval_makes_video_suspicious() {
        let frames: Vec<_> = (0..30)
            .map(|i| {
                let mut v = verdict(i as f64 / 3.0);
                v.device_nominated = (10..14).contains(&i);
                v
            })
            .collect();
        let r = decide(&frames, &EngineConfig::default()).unwrap();
        assert_eq!(r.decision(EventKind::Device).label, Label::Suspicious);
        assert_eq!(r.decision(EventKind::Device).intervals.len(), 1);
        assert_eq!(r.decision(EventKind::AnotherPerson).label, Label::Clean);
        assert_eq!(r.overall, Label::Suspicious);
    }

    #[test]
    fn faces_and_bodies_share_one_field() {
        let frames: Vec<_> = (0..30)
            .map(|i| {
                let mut v = verdict(i as f64 / 3.0);
                v.other_face_nominated = i == 10;
                v.body_nominated = i == 11;
                v
            })
            .collect();
        let r = decide(&frames, &EngineConfig::default()).unwrap();
        assert_eq!(r.decision(EventKind::AnotherPerson).intervals.len(), 1);
    }

    #[test]
    fn report_json_round_trip() {
        let r = with_absence(6);
        let cfg = EngineConfig::default();
        let text = r.to_json(&cfg, 3);
        let (back, back_cfg) = AnalysisReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back_cfg, cfg);
    }
}
