//! Evaluation of predicted intervals against ground truth.
//!
//! Three families are computed:
//! - instance: each truth interval is matched to the prediction with the
//!   highest temporal IOU (and vice versa for false alarms). Matching is
//!   non-exclusive unless `strict_matching` is set.
//! - segment: truth and prediction are rasterized to frames, cut into
//!   fixed-length segments, and compared segment by segment.
//! - video: one Clean/Suspicious label per field per video, scored with
//!   precision, recall and F1 (Suspicious is the positive class).
//!
//! Rates with an empty denominator are reported as not applicable.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::engine::{AnalysisReport, Label};
use crate::error::{Error, Result};
use crate::records::{EventInterval, EventKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub iou_threshold: f64,
    pub segment_lens_sec: Vec<f64>,
    pub segment_match_rate: f64,
    pub fps: f64,
    /// One-to-one instance matching instead of the default non-exclusive one.
    pub strict_matching: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.1,
            segment_lens_sec: vec![1.0, 3.0],
            segment_match_rate: 0.5,
            fps: 3.0,
            strict_matching: false,
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")))
            }
        };
        unit("iou_threshold", self.iou_threshold)?;
        unit("segment_match_rate", self.segment_match_rate)?;
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if let Some(bad) = self.segment_lens_sec.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Config(format!("segment length must be positive, got {bad}")));
        }
        Ok(())
    }
}

/// A ratio kept as counts so it can be pooled across videos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Rate {
    pub hits: usize,
    pub total: usize,
}

impl Rate {
    pub fn new(hits: usize, total: usize) -> Self {
        Self { hits, total }
    }

    /// `None` when the denominator is empty.
    pub fn value(&self) -> Option<f64> {
        (self.total > 0).then(|| self.hits as f64 / self.total as f64)
    }

    pub fn add(&mut self, other: Rate) {
        self.hits += other.hits;
        self.total += other.total;
    }
}

impl Serialize for RateView {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.value().serialize(s)
    }
}

struct RateView(Rate);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DetectionRates {
    pub tdr: Rate,
    pub far: Rate,
}

impl DetectionRates {
    pub fn add(&mut self, other: DetectionRates) {
        self.tdr.add(other.tdr);
        self.far.add(other.far);
    }
}

/// Temporal IOU of two intervals.
pub fn interval_iou(a: &EventInterval, b: &EventInterval) -> f64 {
    let inter = (a.end_sec.min(b.end_sec) - a.start_sec.max(b.start_sec)).max(0.0);
    let union = a.duration() + b.duration() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}

fn best_iou(x: &EventInterval, others: &[&EventInterval]) -> f64 {
    others.iter().map(|o| interval_iou(x, o)).fold(0.0, f64::max)
}

/// Instance TDR/FAR for one kind; intervals of other kinds are ignored.
pub fn instance_rates(
    kind: EventKind,
    truth: &[EventInterval],
    pred: &[EventInterval],
    cfg: &MetricConfig,
) -> DetectionRates {
    let truth: Vec<&EventInterval> = truth.iter().filter(|i| i.kind == kind).collect();
    let pred: Vec<&EventInterval> = pred.iter().filter(|i| i.kind == kind).collect();

    if cfg.strict_matching {
        let matched = one_to_one_matches(&truth, &pred, cfg.iou_threshold);
        return DetectionRates {
            tdr: Rate::new(matched, truth.len()),
            far: Rate::new(pred.len() - matched, pred.len()),
        };
    }

    let hits = truth
        .iter()
        .filter(|t| best_iou(t, &pred) >= cfg.iou_threshold)
        .count();
    let false_alarms = pred
        .iter()
        .filter(|p| best_iou(p, &truth) < cfg.iou_threshold)
        .count();
    DetectionRates {
        tdr: Rate::new(hits, truth.len()),
        far: Rate::new(false_alarms, pred.len()),
    }
}

/// Greedy one-to-one assignment by descending IOU.
fn one_to_one_matches(truth: &[&EventInterval], pred: &[&EventInterval], threshold: f64) -> usize {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, t) in truth.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let iou = interval_iou(t, p);
            if iou >= threshold {
                pairs.push((iou, ti, pi));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut t_used = vec![false; truth.len()];
    let mut p_used = vec![false; pred.len()];
    let mut matched = 0;
    for (_, ti, pi) in pairs {
        if !t_used[ti] && !p_used[pi] {
            t_used[ti] = true;
            p_used[pi] = true;
            matched += 1;
        }
    }
    matched
}

/// Instance rates for every kind, indexed by [`EventKind::index`].
pub fn instance_metrics(truth: &[EventInterval], pred: &[EventInterval], cfg: &MetricConfig) -> [DetectionRates; 3] {
    EventKind::ALL.map(|k| instance_rates(k, truth, pred, cfg))
}

pub fn segment_frames(segment_len_sec: f64, fps: f64) -> usize {
    ((segment_len_sec * fps).round() as usize).max(1)
}

/// Segment TDR/FAR over two equal-length binary frame sequences. A trailing
/// partial segment is judged on its own length.
pub fn segment_metrics(
    truth_seq: &[bool],
    pred_seq: &[bool],
    segment_len_sec: f64,
    cfg: &MetricConfig,
) -> Result<DetectionRates> {
    if truth_seq.len() != pred_seq.len() {
        return Err(Error::Usage(format!(
            "truth has {} frames but prediction has {}",
            truth_seq.len(),
            pred_seq.len()
        )));
    }
    let seg = segment_frames(segment_len_sec, cfg.fps);
    let positive = |chunk: &[bool]| {
        let n = chunk.iter().filter(|b| **b).count();
        n as f64 / chunk.len() as f64 > cfg.segment_match_rate
    };
    let mut out = DetectionRates::default();
    for (t, p) in truth_seq.chunks(seg).zip(pred_seq.chunks(seg)) {
        let (t, p) = (positive(t), positive(p));
        if t {
            out.tdr.total += 1;
            out.tdr.hits += usize::from(p);
        }
        if p {
            out.far.total += 1;
            out.far.hits += usize::from(!t);
        }
    }
    Ok(out)
}

/// Rasterizes intervals: frame `i` (at `i / fps` seconds) is positive when
/// it falls in `[start, end)` of some interval.
pub fn intervals_to_frames(intervals: &[EventInterval], n_frames: usize, fps: f64) -> Vec<bool> {
    // frame boundaries are compared with a small slack so that timestamps
    // produced as i / fps map back to frame i exactly
    const FRAME_EPS: f64 = 1e-6;
    let mut out = vec![false; n_frames];
    for iv in intervals {
        let first = (iv.start_sec * fps - FRAME_EPS).ceil().max(0.0) as usize;
        let end = ((iv.end_sec * fps - FRAME_EPS).ceil().max(0.0) as usize).min(n_frames);
        for slot in out.iter_mut().take(end).skip(first) {
            *slot = true;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn record(&mut self, truth: bool, pred: bool) {
        match (truth, pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn precision(&self) -> Option<f64> {
        Rate::new(self.tp, self.tp + self.fp).value()
    }

    pub fn recall(&self) -> Option<f64> {
        Rate::new(self.tp, self.tp + self.fn_).value()
    }

    /// `2TP / (2TP + FP + FN)`: the harmonic mean of precision and recall
    /// where both exist, 0 when there are errors but no true positives, and
    /// undefined when there is nothing positive on either side.
    pub fn f1(&self) -> Option<f64> {
        let denom = 2 * self.tp + self.fp + self.fn_;
        (denom > 0).then(|| (2 * self.tp) as f64 / denom as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VideoScores {
    pub per_kind: [Confusion; 3],
    pub overall: Confusion,
}

impl VideoScores {
    pub fn record(&mut self, truth: &[EventInterval], report: &AnalysisReport) {
        let mut any_truth = false;
        for kind in EventKind::ALL {
            let t = truth.iter().any(|i| i.kind == kind);
            any_truth |= t;
            let p = report.decision(kind).label == Label::Suspicious;
            self.per_kind[kind.index()].record(t, p);
        }
        self.overall.record(any_truth, report.overall == Label::Suspicious);
    }
}

pub fn video_metrics(samples: &[(&[EventInterval], &AnalysisReport)]) -> Result<VideoScores> {
    if samples.is_empty() {
        return Err(Error::Usage("video metrics need at least one video".into()));
    }
    let mut scores = VideoScores::default();
    for (truth, report) in samples {
        scores.record(truth, report);
    }
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTable {
    pub segment_len_sec: f64,
    pub per_kind: [DetectionRates; 3],
}

/// Pooled scores over a set of videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub config: MetricConfig,
    pub videos: usize,
    pub instance: [DetectionRates; 3],
    pub segment: Vec<SegmentTable>,
    pub video: VideoScores,
}

impl MetricReport {
    pub fn new(config: &MetricConfig) -> Self {
        Self {
            config: config.clone(),
            videos: 0,
            instance: Default::default(),
            segment: config
                .segment_lens_sec
                .iter()
                .map(|&segment_len_sec| SegmentTable {
                    segment_len_sec,
                    per_kind: Default::default(),
                })
                .collect(),
            video: VideoScores::default(),
        }
    }

    /// Adds one analyzed video. Segment sequences span `report.frame_count`
    /// frames starting at t = 0.
    pub fn add_video(&mut self, truth: &[EventInterval], report: &AnalysisReport) -> Result<()> {
        let pred: Vec<EventInterval> = report.intervals().copied().collect();
        let n = report.frame_count;
        for (acc, rates) in self.instance.iter_mut().zip(instance_metrics(truth, &pred, &self.config)) {
            acc.add(rates);
        }
        for kind in EventKind::ALL {
            let of_kind = |v: &[EventInterval]| -> Vec<EventInterval> {
                v.iter().filter(|i| i.kind == kind).copied().collect()
            };
            let t = intervals_to_frames(&of_kind(truth), n, self.config.fps);
            let p = intervals_to_frames(&of_kind(&pred), n, self.config.fps);
            for table in &mut self.segment {
                let rates = segment_metrics(&t, &p, table.segment_len_sec, &self.config)?;
                table.per_kind[kind.index()].add(rates);
            }
        }
        self.video.record(truth, report);
        self.videos += 1;
        Ok(())
    }

    /// Machine-readable form with derived rates alongside the raw counts.
    pub fn to_json(&self) -> String {
        let rates = |r: &[DetectionRates; 3]| -> serde_json::Value {
            EventKind::ALL
                .iter()
                .map(|k| {
                    let d = r[k.index()];
                    (
                        k.as_str().to_string(),
                        serde_json::json!({
                            "tdr": RateView(d.tdr), "far": RateView(d.far),
                            "tdr_counts": d.tdr, "far_counts": d.far,
                        }),
                    )
                })
                .collect::<serde_json::Map<_, _>>()
                .into()
        };
        let prf = |c: &Confusion| {
            serde_json::json!({
                "precision": c.precision(),
                "recall": c.recall(),
                "f1": c.f1(),
                "counts": c,
            })
        };
        let mut video: serde_json::Map<String, serde_json::Value> = EventKind::ALL
            .iter()
            .map(|k| (k.as_str().to_string(), prf(&self.video.per_kind[k.index()])))
            .collect();
        video.insert("overall".into(), prf(&self.video.overall));
        let value = serde_json::json!({
            "config": self.config,
            "videos": self.videos,
            "instance": rates(&self.instance),
            "segment": self.segment.iter().map(|s| serde_json::json!({
                "segment_len_sec": s.segment_len_sec,
                "per_kind": rates(&s.per_kind),
            })).collect::<Vec<_>>(),
            "video": video,
        });
        let mut text = serde_json::to_string_pretty(&value).expect("metrics serialize");
        text.push('\n');
        text
    }

    /// Plain-text tables: instance, one per segment length, then video-level.
    pub fn render_tables(&self) -> String {
        fn cell(v: Option<f64>) -> String {
            v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"))
        }
        fn name(k: EventKind) -> &'static str {
            match k {
                EventKind::AnotherPerson => "Another person",
                EventKind::Device => "Device",
                EventKind::Absence => "Absence",
            }
        }
        let mut out = String::new();
        let mut table = |title: String, rows: &[DetectionRates; 3]| {
            let _ = writeln!(out, "{title}");
            let _ = writeln!(out, "{:<18}{:>10}{:>10}", "", "TDR", "FAR");
            for k in EventKind::ALL {
                let r = rows[k.index()];
                let _ = writeln!(out, "{:<18}{:>10}{:>10}", name(k), cell(r.tdr.value()), cell(r.far.value()));
            }
            let _ = writeln!(out);
        };
        table(
            format!("Instance (IOU >= {}){}", self.config.iou_threshold, if self.config.strict_matching { ", one-to-one" } else { "" }),
            &self.instance,
        );
        for s in &self.segment {
            table(format!("Segment ({} sec)", s.segment_len_sec), &s.per_kind);
        }
        let _ = writeln!(out, "Video-based ({} videos)", self.videos);
        let _ = writeln!(out, "{:<18}{:>10}{:>10}{:>10}", "", "Precision", "Recall", "F1");
        let rows = EventKind::ALL
            .iter()
            .map(|k| (name(*k), self.video.per_kind[k.index()]))
            .chain(std::iter::once(("Overall cheating", self.video.overall)));
        for (label, c) in rows {
            let _ = writeln!(
                out,
                "{:<18}{:>10}{:>10}{:>10}",
                label,
                cell(c.precision()),
                cell(c.recall()),
                cell(c.f1())
            );
        }
        out
    }
}
