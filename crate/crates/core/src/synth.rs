//! Scripted scenarios and a detection simulator that renders them as frame
//! records.
//!
//! Randomness comes from `ChaCha8Rng::seed_from_u64(seed)` (rand_chacha
//! 0.9) with Gaussian draws from `rand_distr::StandardNormal`, so a given
//! scenario file always produces the same byte stream.
//!
//! Scene layout (400x300 frame, pixels):
//! - candidate face `[170, 80, 60, 60]`, candidate body `[120, 60, 160, 240]`
//! - other person face `[40, 70, 50, 50]`, other body `[10, 40, 120, 250]`
//! - phone `[300, 150, 30, 50]`, laptop `[260, 200, 120, 90]`
//!
//! Rendering rules:
//! - the candidate's face, body and tracker disappear during absence
//! - during another-person events a second face appears, plus a second body
//!   unless the candidate is absent at the same time
//! - during device events a phone or laptop appears with confidence near 0.6

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::EngineConfig;
use crate::engine::analyze_records;
use crate::error::{Error, Result};
use crate::face_match::masked_distance;
use crate::metrics::{intervals_to_frames, MetricConfig, MetricReport};
use crate::records::{
    validate_label_set, BoundingBox, EventInterval, EventKind, FaceEncoding, FaceObservation, FrameRecord,
    ObjectClass, ObjectObservation, TrackerState, ENCODING_DIM,
};

pub const FRAME_W: u32 = 400;
pub const FRAME_H: u32 = 300;

const CANDIDATE_FACE: BoundingBox = BoundingBox { x: 170.0, y: 80.0, w: 60.0, h: 60.0 };
const CANDIDATE_BODY: BoundingBox = BoundingBox { x: 120.0, y: 60.0, w: 160.0, h: 240.0 };
const OTHER_FACE: BoundingBox = BoundingBox { x: 40.0, y: 70.0, w: 50.0, h: 50.0 };
const OTHER_BODY: BoundingBox = BoundingBox { x: 10.0, y: 40.0, w: 120.0, h: 250.0 };
const PHONE: BoundingBox = BoundingBox { x: 300.0, y: 150.0, w: 30.0, h: 50.0 };
const LAPTOP: BoundingBox = BoundingBox { x: 260.0, y: 200.0, w: 120.0, h: 90.0 };

const BODY_CONF: f64 = 0.9;
const OTHER_BODY_CONF: f64 = 0.85;
const DEVICE_CONF: f64 = 0.6;
const TRACKER_CONF: f64 = 10.0;
const LOST_TRACKER_CONF: f64 = 2.0;
/// Minimum separation between the candidate and any other identity.
const IDENTITY_SEPARATION: f64 = 2.0 * 0.65;
const ENCODING_SIGMA: f64 = 0.09;
/// Base encoding components are kept at least this far from zero so that
/// partial-face masking never hides them at zero noise.
const ENCODING_FLOOR: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseProfile {
    pub encoding_jitter_sigma: f64,
    pub miss_prob: f64,
    pub false_face_prob: f64,
    pub confidence_jitter_sigma: f64,
    pub tracker_dropout_prob: f64,
}

impl NoiseProfile {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("noise.miss_prob", self.miss_prob),
            ("noise.false_face_prob", self.false_face_prob),
            ("noise.tracker_dropout_prob", self.tracker_dropout_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::validation(name, format!("probability {p} outside [0, 1]")));
            }
        }
        for (name, s) in [
            ("noise.encoding_jitter_sigma", self.encoding_jitter_sigma),
            ("noise.confidence_jitter_sigma", self.confidence_jitter_sigma),
        ] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::validation(name, format!("sigma {s} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

fn default_fps() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub duration_sec: f64,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub seed: u64,
    #[serde(default)]
    pub events: Vec<EventInterval>,
    #[serde(default)]
    pub noise: NoiseProfile,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| Error::validation("scenario", e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_sec.is_finite() && self.duration_sec > 0.0) {
            return Err(Error::validation("duration_sec", "must be positive"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::validation("fps", "must be positive"));
        }
        for (i, ev) in self.events.iter().enumerate() {
            EventInterval::new(ev.kind, ev.start_sec, ev.end_sec)
                .map_err(|e| Error::validation(format!("events[{i}]"), e.to_string()))?;
            if ev.start_sec < 0.0 || ev.end_sec > self.duration_sec {
                return Err(Error::validation(
                    format!("events[{i}]"),
                    format!("[{}, {}] outside [0, {}]", ev.start_sec, ev.end_sec, self.duration_sec),
                ));
            }
        }
        validate_label_set(&self.events)?;
        self.noise.validate()
    }

    pub fn frame_count(&self) -> usize {
        (self.duration_sec * self.fps - 1e-6).ceil().max(0.0) as usize
    }

    /// Random event script for a `duration_sec` video.
    ///
    /// Events start after the registration window, same-kind events are at
    /// least five seconds apart, and every absence lasts long enough on its
    /// own to exceed the default 5% absence limit. About one script in five
    /// has no events at all.
    pub fn scripted(seed: u64, duration_sec: f64, noise: NoiseProfile) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5C1E_D5C1_1E00);
        let mut events = Vec::new();
        if rng.random::<f64>() >= 0.2 {
            let min_absence = (0.06 * duration_sec).ceil() + 1.0;
            for kind in EventKind::ALL {
                if rng.random::<f64>() >= 0.6 {
                    continue;
                }
                let count = rng.random_range(1..=2);
                let mut cursor: f64 = 25.0;
                for _ in 0..count {
                    let gap: f64 = rng.random_range(5.0..60.0);
                    let len = match kind {
                        EventKind::AnotherPerson => rng.random_range(6.0..25.0),
                        EventKind::Device => rng.random_range(6.0..20.0),
                        EventKind::Absence => rng.random_range(min_absence..min_absence + 15.0),
                    };
                    let start = (cursor + gap).round();
                    let end = (start + len).round();
                    if end > duration_sec - 5.0 {
                        break;
                    }
                    events.push(EventInterval { kind, start_sec: start, end_sec: end });
                    cursor = end;
                }
            }
        }
        Scenario {
            duration_sec,
            fps: 3.0,
            seed,
            events,
            noise,
        }
    }
}

fn base_encoding(rng: &mut ChaCha8Rng) -> [f64; ENCODING_DIM] {
    let mut v = [0.0; ENCODING_DIM];
    for x in &mut v {
        let g: f64 = rng.sample(StandardNormal);
        let raw = g * ENCODING_SIGMA;
        *x = if raw.abs() < ENCODING_FLOOR {
            ENCODING_FLOOR.copysign(raw)
        } else {
            raw
        };
    }
    v
}

fn distinct_identity(rng: &mut ChaCha8Rng, from: &FaceEncoding) -> FaceEncoding {
    loop {
        let cand = FaceEncoding::new(base_encoding(rng)).expect("finite");
        // both directions, since the masked distance is asymmetric
        if masked_distance(from, &cand, 0.0) > IDENTITY_SEPARATION
            && masked_distance(&cand, from, 0.0) > IDENTITY_SEPARATION
        {
            return cand;
        }
    }
}

struct Renderer<'a> {
    rng: ChaCha8Rng,
    noise: &'a NoiseProfile,
}

impl Renderer<'_> {
    fn chance(&mut self, p: f64) -> bool {
        p > 0.0 && self.rng.random::<f64>() < p
    }

    fn gauss(&mut self, sigma: f64) -> f64 {
        if sigma == 0.0 {
            return 0.0;
        }
        let g: f64 = self.rng.sample(StandardNormal);
        g * sigma
    }

    fn observe(&mut self, base: &FaceEncoding, bbox: BoundingBox) -> FaceObservation {
        let sigma = self.noise.encoding_jitter_sigma;
        let mut v = *base.as_array();
        for x in &mut v {
            *x += self.gauss(sigma);
        }
        let yaw = (self.rng.sample::<f64, _>(StandardNormal) * 8.0).clamp(-90.0, 90.0);
        let pitch = (self.rng.sample::<f64, _>(StandardNormal) * 5.0).clamp(-90.0, 90.0);
        FaceObservation {
            bbox,
            encoding: FaceEncoding::new(v).expect("finite"),
            yaw_deg: yaw,
            pitch_deg: pitch,
        }
    }

    fn object(&mut self, class: ObjectClass, bbox: BoundingBox, conf: f64) -> ObjectObservation {
        let jitter = self.gauss(self.noise.confidence_jitter_sigma);
        ObjectObservation {
            class,
            bbox,
            confidence: (conf + jitter).clamp(0.0, 1.0),
        }
    }
}

/// Renders a scenario to frame records. Returns the records and the truth
/// labels (the scenario's events).
pub fn generate(scenario: &Scenario) -> Result<(Vec<FrameRecord>, Vec<EventInterval>)> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let candidate = FaceEncoding::new(base_encoding(&mut rng)).expect("finite");
    let other = distinct_identity(&mut rng, &candidate);
    let mut r = Renderer {
        rng,
        noise: &scenario.noise,
    };

    let n = scenario.frame_count();
    let active = |kind: EventKind| {
        let evs: Vec<EventInterval> = scenario.events.iter().filter(|e| e.kind == kind).copied().collect();
        intervals_to_frames(&evs, n, scenario.fps)
    };
    let another = active(EventKind::AnotherPerson);
    let device = active(EventKind::Device);
    let absent = active(EventKind::Absence);
    // alternate phone/laptop by event for variety
    let laptop_events: Vec<EventInterval> = scenario
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Device)
        .skip(1)
        .step_by(2)
        .copied()
        .collect();
    let laptop = intervals_to_frames(&laptop_events, n, scenario.fps);

    let miss = scenario.noise.miss_prob;
    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let mut faces = Vec::new();
        let mut objects = Vec::new();

        if !absent[i] {
            if !r.chance(miss) {
                faces.push(r.observe(&candidate, CANDIDATE_FACE));
            }
            if !r.chance(miss) {
                objects.push(r.object(ObjectClass::Body, CANDIDATE_BODY, BODY_CONF));
            }
        }
        if another[i] {
            if !r.chance(miss) {
                faces.push(r.observe(&other, OTHER_FACE));
            }
            if !absent[i] && !r.chance(miss) {
                objects.push(r.object(ObjectClass::Body, OTHER_BODY, OTHER_BODY_CONF));
            }
        }
        if device[i] && !r.chance(miss) {
            let (class, bbox) = if laptop[i] {
                (ObjectClass::Laptop, LAPTOP)
            } else {
                (ObjectClass::MobilePhone, PHONE)
            };
            objects.push(r.object(class, bbox, DEVICE_CONF));
        }
        if r.chance(scenario.noise.false_face_prob) {
            let stranger = FaceEncoding::new(base_encoding(&mut r.rng)).expect("finite");
            let x = r.rng.random_range(0.0..(f64::from(FRAME_W) - 40.0));
            let y = r.rng.random_range(0.0..(f64::from(FRAME_H) - 40.0));
            faces.push(r.observe(&stranger, BoundingBox::new(x, y, 40.0, 40.0)));
        }

        let tracker = if !absent[i] && !r.chance(scenario.noise.tracker_dropout_prob) {
            let wobble = r.gauss(scenario.noise.confidence_jitter_sigma * TRACKER_CONF).abs();
            TrackerState {
                bbox: Some(CANDIDATE_FACE),
                confidence: (TRACKER_CONF - wobble).max(0.0),
                active: true,
            }
        } else {
            TrackerState {
                bbox: None,
                confidence: LOST_TRACKER_CONF,
                active: false,
            }
        };

        records.push(FrameRecord {
            index: i as u64,
            timestamp_sec: i as f64 / scenario.fps,
            frame_w: FRAME_W,
            frame_h: FRAME_H,
            faces,
            objects,
            tracker,
        });
    }
    Ok((records, scenario.events.clone()))
}

/// Simulates, analyzes and scores a batch of scenarios. Scenarios are
/// processed in parallel; pooling follows input order.
pub fn evaluate_scenarios(
    scenarios: &[Scenario],
    engine_cfg: &EngineConfig,
    metric_cfg: &MetricConfig,
) -> Result<MetricReport> {
    let analyzed: Vec<Result<_>> = scenarios
        .par_iter()
        .map(|s| {
            let (records, truth) = generate(s)?;
            let outcome = analyze_records(&records, engine_cfg, false)?;
            Ok((truth, outcome.report))
        })
        .collect();
    let mut report = MetricReport::new(metric_cfg);
    for item in analyzed {
        let (truth, analysis) = item?;
        report.add_video(&truth, &analysis)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub noise: NoiseProfile,
    pub report: MetricReport,
}

/// Evaluates every template at each noise point of the grid.
pub fn sweep(
    templates: &[Scenario],
    grid: &[NoiseProfile],
    engine_cfg: &EngineConfig,
    metric_cfg: &MetricConfig,
) -> Result<Vec<SweepRow>> {
    grid.iter()
        .map(|noise| {
            let scenarios: Vec<Scenario> = templates
                .iter()
                .map(|t| Scenario { noise: *noise, ..t.clone() })
                .collect();
            Ok(SweepRow {
                noise: *noise,
                report: evaluate_scenarios(&scenarios, engine_cfg, metric_cfg)?,
            })
        })
        .collect()
}
