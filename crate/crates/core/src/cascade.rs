//! The per-frame two-layer recognizer and its persisted model.
//!
//! Every sample is quantized and appended to a symbol buffer. When the buffer
//! holds `buffer_len` symbols it is scored against the seven simple-gesture
//! models and cleared. Rest, rotation and tilt decisions are pushed into a
//! meta-symbol queue of `queue_len`; whenever a push lands in a full queue the
//! queue is scored against the shaking and nodding models. The output
//! selection rule then picks either the complex or the simple label.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gesture::{AngularVelocitySample, GestureLabel};
use crate::hmm::{DiscreteHmm, Symbol};
use crate::training::{argmax, is_queued, ComplexCalibration, SimpleDecision};
use crate::vq::Codebook;

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_BUFFER_LEN: usize = 10;
pub const DEFAULT_QUEUE_LEN: usize = 10;
/// Runtime shaking threshold; stricter than the calibrated one so fast
/// rotations are not mistaken for shakes.
pub const DEFAULT_RUNTIME_TAU_SHAKE: f64 = -5.0;
pub const DEFAULT_RUNTIME_TAU_NOD: f64 = -4.0;

/// The complete trained recognizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeModel {
    pub format_version: u32,
    pub sample_rate_hz: f64,
    pub buffer_len: usize,
    pub queue_len: usize,
    pub runtime_tau_shake: f64,
    pub runtime_tau_nod: f64,
    pub codebook: Codebook,
    /// Labels 1..=7 in order.
    pub simple_models: Vec<DiscreteHmm>,
    pub complex: ComplexCalibration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Simple,
    Complex,
}

/// A label emitted at a buffer boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GestureEvent {
    pub label: GestureLabel,
    pub trigger_frame: u64,
    pub kind: EventKind,
    /// Log-likelihood of the winning model.
    pub score: f64,
}

#[derive(Serialize)]
struct WireEvent<'a> {
    frame: u64,
    label: u8,
    name: &'a str,
    kind: EventKind,
    score: f64,
}

impl GestureEvent {
    /// One-line JSON form used by the streaming service.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&WireEvent {
            frame: self.trigger_frame,
            label: self.label.value(),
            name: self.label.name(),
            kind: self.kind,
            score: self.score,
        })
        .expect("plain struct serializes")
    }
}

/// Complex-layer scores and the boundary at which they were computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexScores {
    pub scores: [f64; 2],
    pub boundary: u64,
}

/// Mutable per-stream state. One state per stream; the model is shared.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeState {
    pub symbol_buffer: Vec<Symbol>,
    pub meta_queue: VecDeque<GestureLabel>,
    pub last_complex_scores: Option<ComplexScores>,
    pub frames_seen: u64,
    pub boundaries: u64,
    buffer_len: usize,
    queue_len: usize,
}

impl CascadeState {
    pub fn reset(&mut self) {
        self.symbol_buffer.clear();
        self.meta_queue.clear();
        self.last_complex_scores = None;
        self.frames_seen = 0;
        self.boundaries = 0;
    }
}

/// Shaking or Nodding when either score beats its threshold (argmax, ties
/// to Shaking), otherwise `None`.
pub fn select_complex(scores: &[f64; 2], tau_shake: f64, tau_nod: f64) -> Option<GestureLabel> {
    (scores[0] > tau_shake || scores[1] > tau_nod).then(|| GestureLabel::COMPLEX[argmax(scores)])
}

/// Output selection between the simple scores `p_s` (labels 1..=7) and the
/// optional complex scores `p_c` (labels 8, 9).
pub fn output_select(p_s: &[f64], p_c: Option<&[f64]>, tau_shake: f64, tau_nod: f64) -> Result<GestureLabel> {
    if p_s.len() != 7 {
        return Err(Error::invalid(format!("expected 7 simple scores, got {}", p_s.len())));
    }
    if let Some(p_c) = p_c {
        let p_c: &[f64; 2] = p_c
            .try_into()
            .map_err(|_| Error::invalid(format!("expected 2 complex scores, got {}", p_c.len())))?;
        if let Some(label) = select_complex(p_c, tau_shake, tau_nod) {
            return Ok(label);
        }
    }
    Ok(GestureLabel::SIMPLE[argmax(p_s)])
}

pub(crate) fn decide_simple(models: &[DiscreteHmm], window: &[Symbol]) -> Result<SimpleDecision> {
    let mut scores = [f64::NEG_INFINITY; 7];
    for (s, hmm) in scores.iter_mut().zip(models) {
        *s = hmm.log_likelihood(window)?;
    }
    Ok(SimpleDecision {
        label: GestureLabel::SIMPLE[argmax(&scores)],
        scores,
    })
}

impl CascadeModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        codebook: Codebook,
        simple_models: Vec<DiscreteHmm>,
        complex: ComplexCalibration,
        runtime_tau_shake: f64,
        runtime_tau_nod: f64,
        buffer_len: usize,
        queue_len: usize,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        let model = CascadeModel {
            format_version: FORMAT_VERSION,
            sample_rate_hz,
            buffer_len,
            queue_len,
            runtime_tau_shake,
            runtime_tau_nod,
            codebook,
            simple_models,
            complex,
        };
        model.check()?;
        Ok(model)
    }

    pub fn check(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: self.format_version,
                expected: FORMAT_VERSION,
            });
        }
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(Error::validation(format!(
                "sample_rate_hz = {} must be positive",
                self.sample_rate_hz
            )));
        }
        if self.buffer_len == 0 {
            return Err(Error::validation("buffer_len must be at least 1"));
        }
        if self.queue_len == 0 {
            return Err(Error::validation("queue_len must be at least 1"));
        }
        for (name, tau) in [
            ("runtime_tau_shake", self.runtime_tau_shake),
            ("runtime_tau_nod", self.runtime_tau_nod),
        ] {
            if !(tau.is_finite() && tau <= 0.0) {
                return Err(Error::validation(format!("{name} = {tau} must be finite and <= 0")));
            }
        }
        self.codebook
            .check()
            .map_err(|e| Error::validation(format!("codebook: {e}")))?;
        if self.simple_models.len() != 7 {
            return Err(Error::validation(format!(
                "simple_models holds {} models, expected 7",
                self.simple_models.len()
            )));
        }
        for (i, hmm) in self.simple_models.iter().enumerate() {
            hmm.check()
                .map_err(|e| Error::validation(format!("simple_models[{i}]: {e}")))?;
            if hmm.n_symbols != self.codebook.k() {
                return Err(Error::validation(format!(
                    "simple_models[{i}] has {} symbols but the codebook has {} centers",
                    hmm.n_symbols,
                    self.codebook.k()
                )));
            }
        }
        self.complex
            .check()
            .map_err(|e| Error::validation(format!("complex: {e}")))
    }

    pub fn init_state(&self) -> Result<CascadeState> {
        self.check()?;
        Ok(CascadeState {
            symbol_buffer: Vec::with_capacity(self.buffer_len),
            meta_queue: VecDeque::with_capacity(self.queue_len),
            last_complex_scores: None,
            frames_seen: 0,
            boundaries: 0,
            buffer_len: self.buffer_len,
            queue_len: self.queue_len,
        })
    }

    /// Simple-layer decision for one buffer's worth of symbols.
    pub fn classify_window(&self, window: &[Symbol]) -> Result<SimpleDecision> {
        decide_simple(&self.simple_models, window)
    }

    /// Feeds one sample. Returns an event at every buffer boundary and
    /// nothing in between.
    pub fn step(&self, state: &mut CascadeState, sample: &AngularVelocitySample) -> Result<Option<GestureEvent>> {
        if state.buffer_len != self.buffer_len || state.queue_len != self.queue_len {
            return Err(Error::Usage(
                "cascade state was initialized for a different model".into(),
            ));
        }
        let symbol = self.codebook.quantize(&sample.omega)?;
        state.symbol_buffer.push(symbol);
        state.frames_seen += 1;
        if state.symbol_buffer.len() < self.buffer_len {
            return Ok(None);
        }

        let simple = decide_simple(&self.simple_models, &state.symbol_buffer)?;
        state.symbol_buffer.clear();
        state.boundaries += 1;

        let mut pushed = false;
        if is_queued(simple.label) {
            if state.meta_queue.len() == self.queue_len {
                state.meta_queue.pop_front();
            }
            state.meta_queue.push_back(simple.label);
            pushed = true;
        }

        // Scores from an earlier boundary are stale and never fire.
        let fresh = if pushed && state.meta_queue.len() == self.queue_len {
            let (front, back) = state.meta_queue.as_slices();
            let contents: Vec<GestureLabel> = front.iter().chain(back).copied().collect();
            let scores = self.complex.scores(&contents)?;
            state.last_complex_scores = Some(ComplexScores {
                scores,
                boundary: state.boundaries,
            });
            Some(scores)
        } else {
            None
        };

        let label = output_select(
            &simple.scores,
            fresh.as_ref().map(|s| s.as_slice()),
            self.runtime_tau_shake,
            self.runtime_tau_nod,
        )?;
        let event = if label.is_complex() {
            state.meta_queue.clear();
            let scores = fresh.expect("complex label needs fresh scores");
            GestureEvent {
                label,
                trigger_frame: sample.frame,
                kind: EventKind::Complex,
                score: scores[label.value() as usize - 8],
            }
        } else {
            GestureEvent {
                label,
                trigger_frame: sample.frame,
                kind: EventKind::Simple,
                score: simple.scores[label.value() as usize - 1],
            }
        };
        Ok(Some(event))
    }

    /// Runs a whole sample stream through a fresh state.
    pub fn run<'a, I>(&self, samples: I) -> Result<Vec<GestureEvent>>
    where
        I: IntoIterator<Item = &'a AngularVelocitySample>,
    {
        let mut state = self.init_state()?;
        let mut events = Vec::new();
        for s in samples {
            events.extend(self.step(&mut state, s)?);
        }
        Ok(events)
    }

    /// Canonical JSON document (fixed key order, shortest round-trip floats).
    pub fn to_json(&self) -> Result<String> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let version = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::validation("format_version is missing"))?;
        if version != FORMAT_VERSION as u64 {
            return Err(Error::UnsupportedVersion {
                found: u32::try_from(version).unwrap_or(u32::MAX),
                expected: FORMAT_VERSION,
            });
        }
        let model: CascadeModel = serde_json::from_value(value)?;
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.check()?;
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        CascadeModel::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::GestureLabel::*;

    #[test]
    fn complex_branch_fires_on_threshold() {
        let p_s = [-30.0, -20.0, -10.0, -25.0, -40.0, -50.0, -60.0];
        assert_eq!(output_select(&p_s, Some(&[-4.0, -9.0]), -5.0, -4.0).unwrap(), Shaking);
        assert_eq!(output_select(&p_s, Some(&[-6.0, -3.9]), -5.0, -4.0).unwrap(), Nodding);
        assert_eq!(output_select(&p_s, Some(&[-20.0, -20.0]), -5.0, -4.0).unwrap(), RotatingRight);
        assert_eq!(output_select(&p_s, None, -5.0, -4.0).unwrap(), RotatingRight);
    }

    #[test]
    fn threshold_is_strict() {
        let p_s = [0.0; 7];
        assert_eq!(output_select(&p_s, Some(&[-5.0, -4.0]), -5.0, -4.0).unwrap(), BeingIdle);
    }

    #[test]
    fn both_complex_at_neg_infinity_reduces_to_simple() {
        let p_s = [-9.0, -3.0, -3.0, -8.0, -7.0, -6.0, -5.0];
        let inf = f64::NEG_INFINITY;
        assert_eq!(output_select(&p_s, Some(&[inf, inf]), -5.0, -4.0).unwrap(), RotatingLeft);
    }

    #[test]
    fn arity_is_checked() {
        assert!(output_select(&[0.0; 6], None, -5.0, -4.0).is_err());
        assert!(output_select(&[0.0; 7], Some(&[0.0; 3]), -5.0, -4.0).is_err());
    }

    #[test]
    fn wire_event_shape() {
        let e = GestureEvent {
            label: Nodding,
            trigger_frame: 120,
            kind: EventKind::Complex,
            score: -3.5,
        };
        assert_eq!(
            e.to_json_line(),
            r#"{"frame":120,"label":9,"name":"Nodding","kind":"complex","score":-3.5}"#
        );
    }
}
