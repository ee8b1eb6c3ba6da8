//! Engine thresholds and their flat `key = value` file format.
//!
//! Precedence when building a config: command-line overrides, then the
//! config file, then the built-in defaults. Every key is optional.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Environment variable naming a default config file for the CLI.
pub const CONFIG_ENV_VAR: &str = "PROCTOR_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Length of the opening window used to register the candidate, seconds.
    pub registration_window_sec: f64,
    /// Face distance above which a face is treated as another person.
    pub face_distance_threshold: f64,
    pub body_conf_threshold: f64,
    pub device_conf_threshold: f64,
    /// Encoding components of the observed face with magnitude below this
    /// value are ignored by the distance.
    pub partial_epsilon: f64,
    /// Absence is suspicious when the supporting-frame ratio exceeds this.
    pub absence_ratio_limit: f64,
    /// Nominated frames closer than this (seconds) join one interval.
    pub link_gap_sec: f64,
    pub yaw_limit_deg: f64,
    pub pitch_limit_deg: f64,
    /// Tracker quality below this counts as an inactive tracker.
    pub tracker_min_confidence: f64,
    /// Detector/tracker center distance, as a fraction of the frame
    /// diagonal, beyond which the frame gets an extra face.
    pub tracker_divergence_frac: f64,
    pub fps: f64,
    /// Attribute at most one below-threshold face per frame to the
    /// candidate; the rest count as other faces.
    pub one_candidate_rule: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            registration_window_sec: 20.0,
            face_distance_threshold: 0.65,
            body_conf_threshold: 0.65,
            device_conf_threshold: 0.30,
            partial_epsilon: 0.01,
            absence_ratio_limit: 0.05,
            link_gap_sec: 2.0,
            yaw_limit_deg: 30.0,
            pitch_limit_deg: 20.0,
            tracker_min_confidence: 7.0,
            tracker_divergence_frac: 0.2,
            fps: 3.0,
            one_candidate_rule: true,
        }
    }
}

impl EngineConfig {
    pub fn frame_period(&self) -> f64 {
        1.0 / self.fps
    }

    /// Parses config text and applies `key=value` overrides on top of it.
    pub fn from_text_with_overrides<S: AsRef<str>>(text: &str, overrides: &[S]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for raw in overrides {
            let (key, value) = split_override(raw.as_ref())?;
            table.insert(key.to_string(), parse_value(key, value)?);
        }
        let cfg: EngineConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_text_with_overrides::<&str>(text, &[])
    }

    /// Loads `path` if given (defaults otherwise) and applies overrides.
    pub fn load<S: AsRef<str>>(path: Option<&Path>, overrides: &[S]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => String::new(),
        };
        Self::from_text_with_overrides(&text, overrides)
    }

    /// Sets a single field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut table = toml::Table::try_from(&*self)
            .map_err(|e| Error::Config(e.to_string()))?;
        table.insert(key.to_string(), parse_value(key, value)?);
        let updated: EngineConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        updated.validate()?;
        *self = updated;
        Ok(())
    }

    pub fn to_text(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("registration_window_sec", self.registration_window_sec),
            ("face_distance_threshold", self.face_distance_threshold),
            ("body_conf_threshold", self.body_conf_threshold),
            ("device_conf_threshold", self.device_conf_threshold),
            ("partial_epsilon", self.partial_epsilon),
            ("absence_ratio_limit", self.absence_ratio_limit),
            ("link_gap_sec", self.link_gap_sec),
            ("yaw_limit_deg", self.yaw_limit_deg),
            ("pitch_limit_deg", self.pitch_limit_deg),
            ("tracker_min_confidence", self.tracker_min_confidence),
            ("tracker_divergence_frac", self.tracker_divergence_frac),
            ("fps", self.fps),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite, got {v}")));
            }
            if v < 0.0 {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        for (name, v) in [
            ("absence_ratio_limit", self.absence_ratio_limit),
            ("tracker_divergence_frac", self.tracker_divergence_frac),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.fps <= 0.0 {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if self.registration_window_sec <= 0.0 {
            return Err(Error::Config("registration_window_sec must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) fn split_override(raw: &str) -> Result<(&str, &str)> {
    raw.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| Error::Config(format!("override `{raw}` is not of the form key=value")))
}

fn parse_value(key: &str, value: &str) -> Result<toml::Value> {
    let doc: toml::Table = format!("v = {value}")
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse value `{value}`")))?;
    Ok(doc.get("v").cloned().expect("parsed single key"))
}
