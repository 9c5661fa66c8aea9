//! Gesture labels, angular velocity recordings and labeled datasets.

pub(crate) mod io;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vq::Vec3;

pub use io::{load_dataset, read_dataset, save_dataset, write_dataset};
pub use synth::{generate_dataset, generate_gesture, DatasetSpec, MAX_DURATION_S, MAX_PEAK_VELOCITY};

/// Nominal head tracker sampling rate.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 75.0;

/// The nine head gestures. Discriminants are the class labels 1..=9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
#[repr(u8)]
pub enum GestureLabel {
    BeingIdle = 1,
    RotatingLeft = 2,
    RotatingRight = 3,
    TiltingUpward = 4,
    TiltingDownward = 5,
    LeaningLeft = 6,
    LeaningRight = 7,
    Shaking = 8,
    Nodding = 9,
}

/// Rotation axis of a head motion, indexing the `(yaw, pitch, roll)` vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Yaw = 0,
    Pitch = 1,
    Roll = 2,
}

impl GestureLabel {
    pub const ALL: [GestureLabel; 9] = [
        GestureLabel::BeingIdle,
        GestureLabel::RotatingLeft,
        GestureLabel::RotatingRight,
        GestureLabel::TiltingUpward,
        GestureLabel::TiltingDownward,
        GestureLabel::LeaningLeft,
        GestureLabel::LeaningRight,
        GestureLabel::Shaking,
        GestureLabel::Nodding,
    ];

    pub const SIMPLE: [GestureLabel; 7] = [
        GestureLabel::BeingIdle,
        GestureLabel::RotatingLeft,
        GestureLabel::RotatingRight,
        GestureLabel::TiltingUpward,
        GestureLabel::TiltingDownward,
        GestureLabel::LeaningLeft,
        GestureLabel::LeaningRight,
    ];

    pub const COMPLEX: [GestureLabel; 2] = [GestureLabel::Shaking, GestureLabel::Nodding];

    pub fn value(self) -> u8 {
        self as u8
    }

    pub fn from_value(value: u8) -> Result<Self> {
        match value {
            1..=9 => Ok(Self::ALL[value as usize - 1]),
            _ => Err(Error::validation(format!("gesture label {value} is outside 1..=9"))),
        }
    }

    /// Zero-based position among the seven simple gestures.
    pub fn simple_index(self) -> Option<usize> {
        self.is_simple().then(|| self.value() as usize - 1)
    }

    pub fn is_simple(self) -> bool {
        self.value() <= 7
    }

    pub fn is_complex(self) -> bool {
        !self.is_simple()
    }

    pub fn name(self) -> &'static str {
        match self {
            GestureLabel::BeingIdle => "BeingIdle",
            GestureLabel::RotatingLeft => "RotatingLeft",
            GestureLabel::RotatingRight => "RotatingRight",
            GestureLabel::TiltingUpward => "TiltingUpward",
            GestureLabel::TiltingDownward => "TiltingDownward",
            GestureLabel::LeaningLeft => "LeaningLeft",
            GestureLabel::LeaningRight => "LeaningRight",
            GestureLabel::Shaking => "Shaking",
            GestureLabel::Nodding => "Nodding",
        }
    }

    /// Two-letter code as used in latency tables.
    pub fn code(self) -> &'static str {
        match self {
            GestureLabel::BeingIdle => "BI",
            GestureLabel::RotatingLeft => "RL",
            GestureLabel::RotatingRight => "RR",
            GestureLabel::TiltingUpward => "TU",
            GestureLabel::TiltingDownward => "TD",
            GestureLabel::LeaningLeft => "LL",
            GestureLabel::LeaningRight => "LR",
            GestureLabel::Shaking => "S",
            GestureLabel::Nodding => "N",
        }
    }

    /// Axis and sign of a one-way directional gesture. Positive yaw turns the
    /// head left, positive pitch tilts it up, positive roll leans it left.
    pub fn direction(self) -> Option<(Axis, f64)> {
        match self {
            GestureLabel::RotatingLeft => Some((Axis::Yaw, 1.0)),
            GestureLabel::RotatingRight => Some((Axis::Yaw, -1.0)),
            GestureLabel::TiltingUpward => Some((Axis::Pitch, 1.0)),
            GestureLabel::TiltingDownward => Some((Axis::Pitch, -1.0)),
            GestureLabel::LeaningLeft => Some((Axis::Roll, 1.0)),
            GestureLabel::LeaningRight => Some((Axis::Roll, -1.0)),
            _ => None,
        }
    }

    /// The directional gesture that undoes this one.
    pub fn opposite(self) -> Option<GestureLabel> {
        use GestureLabel::*;
        match self {
            RotatingLeft => Some(RotatingRight),
            RotatingRight => Some(RotatingLeft),
            TiltingUpward => Some(TiltingDownward),
            TiltingDownward => Some(TiltingUpward),
            LeaningLeft => Some(LeaningRight),
            LeaningRight => Some(LeaningLeft),
            _ => None,
        }
    }
}

impl fmt::Display for GestureLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<u8> for GestureLabel {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        GestureLabel::from_value(value)
    }
}

impl From<GestureLabel> for u8 {
    fn from(label: GestureLabel) -> u8 {
        label.value()
    }
}

/// Accepts a label number, a full name or a two-letter code.
impl FromStr for GestureLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Ok(v) = s.parse::<u8>() {
            return GestureLabel::from_value(v);
        }
        GestureLabel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s) || l.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown gesture {s:?}")))
    }
}

/// One `(yaw, pitch, roll)` angular velocity reading in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularVelocitySample {
    pub frame: u64,
    pub omega: Vec3,
}

impl AngularVelocitySample {
    pub fn new(frame: u64, omega: Vec3) -> Self {
        AngularVelocitySample { frame, omega }
    }

    pub fn norm(&self) -> f64 {
        self.omega.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    pub samples: Vec<AngularVelocitySample>,
    pub sample_rate_hz: f64,
}

impl MotionSequence {
    pub fn new(samples: Vec<AngularVelocitySample>, sample_rate_hz: f64) -> Result<Self> {
        let m = MotionSequence {
            samples,
            sample_rate_hz,
        };
        m.check()?;
        Ok(m)
    }

    /// Builds a sequence with consecutive frames starting at `first_frame`.
    pub fn from_vectors(vectors: impl IntoIterator<Item = Vec3>, first_frame: u64, sample_rate_hz: f64) -> Result<Self> {
        let samples = vectors
            .into_iter()
            .enumerate()
            .map(|(i, omega)| AngularVelocitySample::new(first_frame + i as u64, omega))
            .collect();
        MotionSequence::new(samples, sample_rate_hz)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::validation(format!(
                "sample rate {} must be a positive real",
                self.sample_rate_hz
            )));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.omega.iter().any(|x| !x.is_finite()) {
                return Err(Error::validation(format!("sample at frame {} is not finite", s.frame)));
            }
            if i > 0 && s.frame <= self.samples[i - 1].frame {
                return Err(Error::validation(format!(
                    "frame {} does not follow frame {}",
                    s.frame,
                    self.samples[i - 1].frame
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    pub fn vectors(&self) -> impl Iterator<Item = &Vec3> + '_ {
        self.samples.iter().map(|s| &s.omega)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGesture {
    pub id: String,
    pub label: GestureLabel,
    pub motion: MotionSequence,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub items: Vec<LabeledGesture>,
    /// Free text describing where the data came from.
    pub provenance: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn with_label(&self, label: GestureLabel) -> impl Iterator<Item = &LabeledGesture> + '_ {
        self.items.iter().filter(move |g| g.label == label)
    }

    /// Every angular velocity vector in the dataset, in item order.
    pub fn all_vectors(&self) -> Vec<Vec3> {
        self.items.iter().flat_map(|g| g.motion.vectors().copied()).collect()
    }

    /// Common sample rate of all items, if the dataset is non-empty.
    pub fn sample_rate_hz(&self) -> Option<f64> {
        self.items.first().map(|g| g.motion.sample_rate_hz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_numbering() {
        for (i, l) in GestureLabel::ALL.iter().enumerate() {
            assert_eq!(l.value() as usize, i + 1);
            assert_eq!(GestureLabel::from_value(l.value()).unwrap(), *l);
        }
        assert!(GestureLabel::SIMPLE.iter().all(|l| l.is_simple()));
        assert!(GestureLabel::COMPLEX.iter().all(|l| l.is_complex()));
        assert!(GestureLabel::from_value(0).is_err());
        assert!(GestureLabel::from_value(10).is_err());
    }

    #[test]
    fn parse_labels() {
        assert_eq!("RL".parse::<GestureLabel>().unwrap(), GestureLabel::RotatingLeft);
        assert_eq!("nodding".parse::<GestureLabel>().unwrap(), GestureLabel::Nodding);
        assert_eq!("8".parse::<GestureLabel>().unwrap(), GestureLabel::Shaking);
        assert!("wave".parse::<GestureLabel>().is_err());
    }

    #[test]
    fn frames_must_increase() {
        let s = vec![
            AngularVelocitySample::new(3, [0.0; 3]),
            AngularVelocitySample::new(3, [0.0; 3]),
        ];
        assert!(MotionSequence::new(s, 75.0).is_err());
        assert!(MotionSequence::new(vec![], 0.0).is_err());
    }
}
