//! Candidate registration from the opening window of a stream.

use serde::Serialize;

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::records::{FaceEncoding, FrameRecord};

/// Face encodings registered as the candidate, with the frames they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateGallery {
    #[serde(skip)]
    pub encodings: Vec<FaceEncoding>,
    pub source_frames: Vec<u64>,
    pub window_end_sec: f64,
}

impl CandidateGallery {
    /// Builds a gallery directly from encodings (source frames unknown).
    pub fn from_encodings(encodings: Vec<FaceEncoding>, window_end_sec: f64) -> Self {
        Self {
            source_frames: vec![0; encodings.len()],
            encodings,
            window_end_sec,
        }
    }

    pub fn len(&self) -> usize {
        self.encodings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.encodings.is_empty()
    }
}

pub(crate) fn in_window(rec: &FrameRecord, cfg: &EngineConfig) -> bool {
    rec.timestamp_sec < cfg.registration_window_sec
}

/// Registers every frontal-enough face seen before the window closes.
///
/// Records at or past `registration_window_sec` are ignored, so the result
/// depends only on the opening window. Exact duplicate encodings are kept
/// once.
pub fn register_candidate<'a, I>(records: I, cfg: &EngineConfig) -> Result<CandidateGallery>
where
    I: IntoIterator<Item = &'a FrameRecord>,
{
    let mut gallery = CandidateGallery {
        encodings: Vec::new(),
        source_frames: Vec::new(),
        window_end_sec: cfg.registration_window_sec,
    };
    for rec in records.into_iter().take_while(|r| in_window(r, cfg)) {
        for face in &rec.faces {
            if face.yaw_deg.abs() > cfg.yaw_limit_deg || face.pitch_deg.abs() > cfg.pitch_limit_deg {
                continue;
            }
            if gallery.encodings.contains(&face.encoding) {
                continue;
            }
            gallery.encodings.push(face.encoding.clone());
            gallery.source_frames.push(rec.index);
        }
    }
    if gallery.is_empty() {
        return Err(Error::RegistrationFailed {
            window_end_sec: cfg.registration_window_sec,
        });
    }
    Ok(gallery)
}
