//! Cheating-event analysis for recorded online exams and interviews.
//!
//! The engine consumes per-frame detector output (faces with 128-d
//! encodings, bodies, devices and a face tracker), registers the candidate
//! from the opening seconds of the video, and labels three fields
//! (another person, device, absence) as clean or suspicious. The
//! [`metrics`] module scores predictions against labelled intervals and
//! [`synth`] generates scripted test streams.

pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod face_match;
pub mod metrics;
pub mod plot;
pub mod records;
pub mod registration;
pub mod synth;
pub mod track_reconcile;

pub use config::EngineConfig;
pub use engine::{
    analyze_records, analyze_stream, decide, link_frames, nominate_frame, AnalysisOutcome, AnalysisReport,
    Analyzer, FieldDecision, FrameVerdict, Label,
};
pub use error::{Error, Result};
pub use face_match::{classify_faces, frame_face_distance, masked_distance, FaceMatchResult};
pub use metrics::{MetricConfig, MetricReport};
pub use records::{
    read_labels, read_record_stream, write_labels, write_record_stream, BoundingBox, EventInterval, EventKind,
    FaceEncoding, FaceObservation, FrameRecord, ObjectClass, ObjectObservation, TrackerState, ENCODING_DIM,
};
pub use registration::{register_candidate, CandidateGallery};
pub use track_reconcile::{reconcile, ReconciledFrame};
