//! Combines face-detector matches with the upstream face tracker.

use serde::Serialize;

use crate::config::EngineConfig;
use crate::face_match::FaceClassification;
use crate::records::FrameRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReconciledFrame {
    pub candidate_present: bool,
    pub other_face_count: usize,
    pub tracker_used: bool,
    pub divergence_flag: bool,
}

/// Tracker-assisted presence and the detector/tracker divergence rule.
///
/// A tracker below `tracker_min_confidence` is treated as inactive. When the
/// detector misses the candidate, a confident tracker keeps them present.
/// When both exist but their box centers are further apart than
/// `tracker_divergence_frac` of the frame diagonal, the frame gets one more
/// "other" face.
pub fn reconcile(frame: &FrameRecord, faces: &FaceClassification, cfg: &EngineConfig) -> ReconciledFrame {
    let tracker_box = match &frame.tracker {
        t if t.active && t.confidence >= cfg.tracker_min_confidence => t.bbox,
        _ => None,
    };

    let mut out = ReconciledFrame {
        candidate_present: faces.candidate_found,
        other_face_count: faces.other_face_count,
        tracker_used: false,
        divergence_flag: false,
    };
    let Some(tracked) = tracker_box else {
        return out;
    };

    match faces.candidate_face.map(|i| &frame.faces[i].bbox) {
        None => {
            out.candidate_present = true;
            out.tracker_used = true;
        }
        Some(detected) => {
            let (dx, dy) = detected.center();
            let (tx, ty) = tracked.center();
            let apart = (dx - tx).hypot(dy - ty);
            if apart > cfg.tracker_divergence_frac * frame.frame_diagonal() {
                out.divergence_flag = true;
                out.other_face_count += 1;
            }
        }
    }
    out
}
