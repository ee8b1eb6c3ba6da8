//! Per-frame timelines of truth, detections and raw traces.

use std::fmt::Write as _;

use crate::config::EngineConfig;
use crate::engine::{AnalysisReport, FrameVerdict};
use crate::error::{Error, Result};
use crate::records::{EventInterval, EventKind};

pub const TIMELINE_HEADER: &str =
    "t,truth_ap,pred_ap,truth_dev,pred_dev,truth_abs,pred_abs,face_distance,body_conf,device_conf";

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineRow {
    pub t: f64,
    /// Truth and prediction flags, indexed by [`EventKind::index`].
    pub truth: [bool; 3],
    pub pred: [bool; 3],
    pub face_distance: Option<f64>,
    pub body_conf: f64,
    pub device_conf: f64,
}

fn covers(intervals: &[EventInterval], kind: EventKind, t: f64) -> bool {
    const EPS: f64 = 1e-9;
    intervals
        .iter()
        .any(|i| i.kind == kind && t >= i.start_sec - EPS && t < i.end_sec - EPS)
}

pub fn timeline(report: &AnalysisReport, truth: &[EventInterval]) -> Result<Vec<TimelineRow>> {
    let frames: &[FrameVerdict] = report
        .per_frame
        .as_deref()
        .ok_or_else(|| Error::Usage("report has no per-frame table; re-run analyze with --per-frame".into()))?;
    let pred: Vec<EventInterval> = report.intervals().copied().collect();
    Ok(frames
        .iter()
        .map(|v| TimelineRow {
            t: v.timestamp_sec,
            truth: EventKind::ALL.map(|k| covers(truth, k, v.timestamp_sec)),
            pred: EventKind::ALL.map(|k| covers(&pred, k, v.timestamp_sec)),
            face_distance: v.face_distance,
            body_conf: v.max_body_conf,
            device_conf: v.max_device_conf,
        })
        .collect())
}

pub fn timeline_csv(rows: &[TimelineRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 48);
    out.push_str(TIMELINE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{}", r.t);
        for k in EventKind::ALL {
            let i = k.index();
            let _ = write!(out, ",{},{}", u8::from(r.truth[i]), u8::from(r.pred[i]));
        }
        let fd = r.face_distance.map(|d| d.to_string()).unwrap_or_default();
        let _ = writeln!(out, ",{fd},{},{}", r.body_conf, r.device_conf);
    }
    out
}

/// Timeline chart: one lane per field (truth in black, detections in red)
/// and a trace panel with the face distance, body and device confidences
/// and their thresholds as dashed lines.
pub fn timeline_svg(rows: &[TimelineRow], cfg: &EngineConfig) -> String {
    const W: f64 = 1200.0;
    const LEFT: f64 = 110.0;
    const LANE_H: f64 = 40.0;
    const TRACE_TOP: f64 = 170.0;
    const TRACE_H: f64 = 200.0;
    let t_end = rows.last().map_or(1.0, |r| r.t + cfg.frame_period()).max(1e-9);
    let x = |t: f64| LEFT + (W - LEFT - 20.0) * t / t_end;
    let y_max = rows
        .iter()
        .filter_map(|r| r.face_distance)
        .fold(1.0_f64, f64::max);
    let y = |v: f64| TRACE_TOP + TRACE_H * (1.0 - v / y_max);
    let period = cfg.frame_period();

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{}" font-family="sans-serif" font-size="12">"#,
        TRACE_TOP + TRACE_H + 40.0
    );
    let names = ["Another person", "Device", "Absence"];
    for k in EventKind::ALL {
        let i = k.index();
        let top = 10.0 + i as f64 * (LANE_H + 10.0);
        let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, top + LANE_H / 2.0 + 4.0, names[i]);
        let _ = writeln!(
            s,
            r##"<rect x="{LEFT}" y="{top}" width="{}" height="{LANE_H}" fill="none" stroke="#ccc"/>"##,
            W - LEFT - 20.0
        );
        for (flags, colour, y0) in [(0, "black", top), (1, "red", top + LANE_H / 2.0)] {
            let mut run: Option<f64> = None;
            for (j, r) in rows.iter().enumerate() {
                let on = if flags == 0 { r.truth[i] } else { r.pred[i] };
                match (on, run) {
                    (true, None) => run = Some(r.t),
                    (false, Some(start)) => {
                        rect(&mut s, x(start), y0, x(rows[j - 1].t + period) - x(start), LANE_H / 2.0, colour);
                        run = None;
                    }
                    _ => {}
                }
            }
            if let (Some(start), Some(last)) = (run, rows.last()) {
                rect(&mut s, x(start), y0, x(last.t + period) - x(start), LANE_H / 2.0, colour);
            }
        }
    }

    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TRACE_TOP}" width="{}" height="{TRACE_H}" fill="none" stroke="#ccc"/>"##,
        W - LEFT - 20.0
    );
    type Trace = (&'static str, &'static str, fn(&TimelineRow) -> Option<f64>, f64);
    let traces: [Trace; 3] = [
        ("face distance", "green", |r| r.face_distance, cfg.face_distance_threshold),
        ("body conf", "blue", |r| Some(r.body_conf), cfg.body_conf_threshold),
        ("device conf", "orange", |r| Some(r.device_conf), cfg.device_conf_threshold),
    ];
    for (n, (label, colour, get, threshold)) in traces.into_iter().enumerate() {
        let points: Vec<String> = rows
            .iter()
            .filter_map(|r| get(r).map(|v| format!("{:.2},{:.2}", x(r.t), y(v))))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{colour}" stroke-width="1" points="{}"/>"#,
            points.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="{colour}" stroke-dasharray="6,4"/>"#,
            W - 20.0,
            y = y(threshold)
        );
        let _ = writeln!(
            s,
            r#"<text x="4" y="{}" fill="{colour}">{label}</text>"#,
            TRACE_TOP + 14.0 + n as f64 * 16.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{LEFT}" y="{}">0 s</text><text x="{}" y="{}" text-anchor="end">{t_end:.1} s</text>"#,
        TRACE_TOP + TRACE_H + 20.0,
        W - 20.0,
        TRACE_TOP + TRACE_H + 20.0
    );
    s.push_str("</svg>\n");
    s
}

fn rect(s: &mut String, x: f64, y: f64, w: f64, h: f64, fill: &str) {
    let _ = writeln!(
        s,
        r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="{fill}" fill-opacity="0.7"/>"#,
        w.max(0.5)
    );
}
