//! Face distance against the registered gallery, with partial-face masking.
//!
//! The distance between a registered encoding `s` and an observed encoding
//! `t` is the Euclidean norm of `s - t`, except that components where
//! `|t[i]| < epsilon` are treated as unseen and contribute nothing. The
//! mask is taken from the observed face only, so the distance is not
//! symmetric in its arguments.

use serde::Serialize;

use crate::config::EngineConfig;
use crate::error::{Error, Result};
use crate::records::{FaceEncoding, FrameRecord};
use crate::registration::CandidateGallery;

pub fn masked_distance(registered: &FaceEncoding, observed: &FaceEncoding, epsilon: f64) -> f64 {
    masked_distance_slice(registered.as_array(), observed.as_array(), epsilon)
}

pub(crate) fn masked_distance_slice(registered: &[f64], observed: &[f64], epsilon: f64) -> f64 {
    registered
        .iter()
        .zip(observed)
        .filter(|(_, t)| t.abs() >= epsilon)
        .map(|(s, t)| (s - t) * (s - t))
        .sum::<f64>()
        .sqrt()
}

/// Minimum masked distance over the gallery and the index achieving it.
/// Ties resolve to the lowest gallery index.
pub fn frame_face_distance(
    gallery: &CandidateGallery,
    observed: &FaceEncoding,
    epsilon: f64,
) -> Result<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, enc) in gallery.encodings.iter().enumerate() {
        let d = masked_distance(enc, observed, epsilon);
        if best.is_none_or(|(bd, _)| d < bd) {
            best = Some((d, i));
        }
    }
    best.ok_or_else(|| Error::Usage("face distance requested against an empty gallery".into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FaceMatchResult {
    pub distance: f64,
    pub best_gallery_index: usize,
    pub is_candidate: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FaceClassification {
    pub candidate_found: bool,
    pub other_face_count: usize,
    /// One entry per face in frame order.
    pub matches: Vec<FaceMatchResult>,
    /// Position in `frame.faces` of the face attributed to the candidate.
    pub candidate_face: Option<usize>,
}

impl FaceClassification {
    pub fn min_distance(&self) -> Option<f64> {
        self.matches.iter().map(|m| m.distance).reduce(f64::min)
    }
}

/// Scores every face of a frame and splits them into candidate and others.
///
/// With `one_candidate_rule` on, only the closest passing face is the
/// candidate and any further passing faces count as other people.
pub fn classify_faces(
    frame: &FrameRecord,
    gallery: &CandidateGallery,
    cfg: &EngineConfig,
) -> Result<FaceClassification> {
    if gallery.is_empty() {
        return Err(Error::Usage("cannot classify faces without a gallery".into()));
    }
    let mut matches = Vec::with_capacity(frame.faces.len());
    for face in &frame.faces {
        let (distance, best_gallery_index) =
            frame_face_distance(gallery, &face.encoding, cfg.partial_epsilon)?;
        matches.push(FaceMatchResult {
            distance,
            best_gallery_index,
            is_candidate: distance <= cfg.face_distance_threshold,
        });
    }

    let mut candidate_face: Option<usize> = None;
    for (i, m) in matches.iter().enumerate() {
        if m.is_candidate && candidate_face.is_none_or(|c| m.distance < matches[c].distance) {
            candidate_face = Some(i);
        }
    }
    let passing = matches.iter().filter(|m| m.is_candidate).count();
    let failing = matches.len() - passing;
    let other_face_count = if cfg.one_candidate_rule {
        failing + passing.saturating_sub(1)
    } else {
        failing
    };

    Ok(FaceClassification {
        candidate_found: candidate_face.is_some(),
        other_face_count,
        matches,
        candidate_face,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::records::{BoundingBox, FaceObservation, TrackerState, ENCODING_DIM};
    use proptest::prelude::*;

    fn enc_with(head: &[f64]) -> FaceEncoding {
        let mut v = [0.0; ENCODING_DIM];
        v[..head.len()].copy_from_slice(head);
        FaceEncoding::new(v).unwrap()
    }

    /// Straight loop over all 128 components, written independently of the
    /// iterator chain above.
    fn brute_force(s: &[f64; ENCODING_DIM], t: &[f64; ENCODING_DIM], eps: f64) -> f64 {
        let mut acc = 0.0;
        for i in 0..ENCODING_DIM {
            let ti = if t[i].abs() < eps { s[i] } else { t[i] };
            acc += (s[i] - ti).powi(2);
        }
        acc.sqrt()
    }

    fn arb_encoding() -> impl Strategy<Value = FaceEncoding> {
        proptest::collection::vec(-0.5f64..0.5, ENCODING_DIM)
            .prop_map(|v| FaceEncoding::from_slice(&v).unwrap())
    }

    #[test]
    fn identical_vectors_are_zero() {
        let e = enc_with(&[0.3, -0.2, 0.005]);
        assert_eq!(masked_distance(&e, &e, 0.01), 0.0);
    }

    #[test]
    fn fully_masked_is_zero() {
        let s = FaceEncoding::new([0.1; ENCODING_DIM]).unwrap();
        let t = FaceEncoding::new([0.0; ENCODING_DIM]).unwrap();
        assert_eq!(masked_distance(&s, &t, 0.01), 0.0);
    }

    #[test]
    fn one_unmasked_index() {
        let s = enc_with(&[0.3]);
        let t = enc_with(&[0.7]);
        let d = masked_distance(&s, &t, 0.01);
        assert!((d - 0.4).abs() < 1e-12, "{d}");
        assert_eq!(d, brute_force(s.as_array(), t.as_array(), 0.01));
    }

    #[test]
    fn negative_components_are_masked_by_magnitude() {
        let s = enc_with(&[0.3, 0.3]);
        let t = enc_with(&[-0.005, -0.5]);
        let d = masked_distance(&s, &t, 0.01);
        assert!((d - 0.8).abs() < 1e-12, "{d}");
    }

    #[test]
    fn gallery_min_and_argmin() {
        let t = enc_with(&[1.0]);
        let a = enc_with(&[1.9]);
        let b = enc_with(&[1.3]);
        let g = CandidateGallery::from_encodings(vec![a.clone(), b.clone()], 20.0);
        let (d, idx) = frame_face_distance(&g, &t, 0.01).unwrap();
        assert!((d - 0.3).abs() < 1e-12);
        assert_eq!(idx, 1);

        let g = CandidateGallery::from_encodings(vec![b, a], 20.0);
        let (d2, idx2) = frame_face_distance(&g, &t, 0.01).unwrap();
        assert_eq!(d, d2);
        assert_eq!(idx2, 0);
    }

    #[test]
    fn ties_take_lowest_index_and_self_is_zero() {
        let t = enc_with(&[0.5, 0.5]);
        let g = CandidateGallery::from_encodings(
            vec![enc_with(&[0.9]), t.clone(), t.clone()],
            20.0,
        );
        assert_eq!(frame_face_distance(&g, &t, 0.01).unwrap(), (0.0, 1));
    }

    #[test]
    fn empty_gallery_is_usage_error() {
        let g = CandidateGallery::from_encodings(vec![], 20.0);
        let t = enc_with(&[0.5]);
        assert!(matches!(frame_face_distance(&g, &t, 0.01), Err(Error::Usage(_))));
    }

    fn frame_with(faces: Vec<FaceEncoding>) -> FrameRecord {
        FrameRecord {
            index: 0,
            timestamp_sec: 0.0,
            frame_w: 400,
            frame_h: 300,
            faces: faces
                .into_iter()
                .map(|encoding| FaceObservation {
                    bbox: BoundingBox::new(0.0, 0.0, 10.0, 10.0),
                    encoding,
                    yaw_deg: 0.0,
                    pitch_deg: 0.0,
                })
                .collect(),
            objects: vec![],
            tracker: TrackerState::inactive(),
        }
    }

    #[test]
    fn classify_cases() {
        let cfg = EngineConfig::default();
        let g = CandidateGallery::from_encodings(vec![enc_with(&[1.0])], 20.0);

        let c = classify_faces(&frame_with(vec![]), &g, &cfg).unwrap();
        assert_eq!((c.candidate_found, c.other_face_count, c.matches.len()), (false, 0, 0));

        let c = classify_faces(&frame_with(vec![enc_with(&[1.64])]), &g, &cfg).unwrap();
        assert!(c.candidate_found);
        assert_eq!(c.other_face_count, 0);

        // exactly at the threshold stays candidate
        let at = enc_with(&[1.0, 0.65]);
        let c = classify_faces(&frame_with(vec![at]), &g, &cfg).unwrap();
        assert_eq!(c.matches[0].distance, 0.65);
        assert!(c.candidate_found);

        let c = classify_faces(&frame_with(vec![enc_with(&[1.9]), enc_with(&[1.2])]), &g, &cfg)
            .unwrap();
        assert_eq!((c.candidate_found, c.other_face_count), (true, 1));
        assert_eq!(c.candidate_face, Some(1));
    }

    #[test]
    fn one_candidate_rule_toggle() {
        let g = CandidateGallery::from_encodings(vec![enc_with(&[1.0])], 20.0);
        let frame = frame_with(vec![enc_with(&[1.3]), enc_with(&[1.1])]);
        let on = classify_faces(&frame, &g, &EngineConfig::default()).unwrap();
        assert_eq!((on.other_face_count, on.candidate_face), (1, Some(1)));
        let off_cfg = EngineConfig {
            one_candidate_rule: false,
            ..EngineConfig::default()
        };
        let off = classify_faces(&frame, &g, &off_cfg).unwrap();
        assert_eq!(off.other_face_count, 0);
    }

    proptest! {
        #[test]
        fn self_distance_is_zero(x in arb_encoding(), eps in 0.0f64..1.0) {
            prop_assert_eq!(masked_distance(&x, &x, eps), 0.0);
        }

        #[test]
        fn non_increasing_in_epsilon(s in arb_encoding(), t in arb_encoding(), e1 in 0.0f64..0.6, e2 in 0.0f64..0.6) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(masked_distance(&s, &t, hi) <= masked_distance(&s, &t, lo));
        }

        #[test]
        fn matches_brute_force(s in arb_encoding(), t in arb_encoding(), eps in 0.0f64..0.3) {
            let d = masked_distance(&s, &t, eps);
            prop_assert!((d - brute_force(s.as_array(), t.as_array(), eps)).abs() <= 1e-12);
        }
    }
}
