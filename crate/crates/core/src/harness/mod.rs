//! Driving a trained cascade in real time: replaying labeled recordings with
//! latency measurement, and a line-oriented TCP service.

mod replay;
mod server;

use crate::error::{Error, Result};
use crate::gesture::{
    generate_gesture, AngularVelocitySample, Dataset, GestureLabel, LabeledGesture, MotionSequence,
    DEFAULT_SAMPLE_RATE_HZ,
};
use crate::seeds;

pub use replay::{replay, ReplayReport, SegmentMatch, REALTIME_BUDGET_MS};
pub use server::{handle_connection, serve, ServerHandle};

/// A labeled stretch of a continuous recording, `[start_frame, end_frame)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub id: String,
    pub label: GestureLabel,
    pub start_frame: u64,
    pub end_frame: u64,
}

/// One continuous motion stream with the gestures performed in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub motion: MotionSequence,
    pub segments: Vec<Segment>,
}

impl Recording {
    /// Plays the dataset's items back to back; each item becomes a segment
    /// and frames are renumbered from 0.
    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        let rate = dataset.sample_rate_hz().unwrap_or(DEFAULT_SAMPLE_RATE_HZ);
        let mut samples = Vec::new();
        let mut segments = Vec::new();
        for g in &dataset.items {
            if g.motion.sample_rate_hz != rate {
                return Err(Error::invalid(format!("item {} has a different sample rate", g.id)));
            }
            let start = samples.len() as u64;
            samples.extend(
                g.motion
                    .vectors()
                    .enumerate()
                    .map(|(i, &omega)| AngularVelocitySample::new(start + i as u64, omega)),
            );
            segments.push(Segment {
                id: g.id.clone(),
                label: g.label,
                start_frame: start,
                end_frame: samples.len() as u64,
            });
        }
        Ok(Recording {
            motion: MotionSequence::new(samples, rate)?,
            segments,
        })
    }

    /// Inverse of [`from_dataset`](Self::from_dataset): one item per segment.
    pub fn to_dataset(&self, provenance: impl Into<String>) -> Result<Dataset> {
        let mut items = Vec::with_capacity(self.segments.len());
        for seg in &self.segments {
            let samples: Vec<AngularVelocitySample> = self
                .motion
                .samples
                .iter()
                .filter(|s| s.frame >= seg.start_frame && s.frame < seg.end_frame)
                .copied()
                .collect();
            items.push(LabeledGesture {
                id: seg.id.clone(),
                label: seg.label,
                motion: MotionSequence::new(samples, self.motion.sample_rate_hz)?,
            });
        }
        Ok(Dataset {
            items,
            provenance: provenance.into(),
        })
    }

    /// Samples of one segment as their own sequence (original frame numbers).
    pub fn segment_motion(&self, segment: &Segment) -> MotionSequence {
        MotionSequence {
            samples: self
                .motion
                .samples
                .iter()
                .filter(|s| s.frame >= segment.start_frame && s.frame < segment.end_frame)
                .copied()
                .collect(),
            sample_rate_hz: self.motion.sample_rate_hz,
        }
    }

    /// Labels of the non-idle segments in order.
    pub fn performed(&self) -> Vec<GestureLabel> {
        self.segments
            .iter()
            .filter(|s| s.label != GestureLabel::BeingIdle)
            .map(|s| s.label)
            .collect()
    }
}

/// Gesture order of the latency protocol; every gesture is followed by a
/// return to the neutral pose.
pub const PROTOCOL_ORDER: [GestureLabel; 8] = [
    GestureLabel::RotatingLeft,
    GestureLabel::RotatingRight,
    GestureLabel::TiltingUpward,
    GestureLabel::TiltingDownward,
    GestureLabel::LeaningLeft,
    GestureLabel::LeaningRight,
    GestureLabel::Nodding,
    GestureLabel::Shaking,
];

/// Timing of a synthesized protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub peak_velocity: f64,
    /// Head excursion of one-way gestures, rad.
    pub sweep_rad: f64,
    pub complex_duration_s: f64,
    /// Stillness after every movement.
    pub rest_s: f64,
    /// Stillness before the first gesture.
    pub lead_in_s: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for ProtocolSpec {
    fn default() -> Self {
        ProtocolSpec {
            peak_velocity: 2.0,
            sweep_rad: 0.7,
            complex_duration_s: 1.6,
            rest_s: 0.8,
            lead_in_s: 1.5,
            noise_sigma: 0.01,
            seed: 0,
        }
    }
}

fn rest(seconds: f64, noise: f64, seed: u64) -> Result<Vec<[f64; 3]>> {
    let mut out = Vec::new();
    let mut left = seconds;
    let mut k = 0;
    // Idle chunks are capped at the generator's maximum duration.
    while left > 1e-9 {
        let chunk = left.min(crate::gesture::MAX_DURATION_S);
        let g = generate_gesture(GestureLabel::BeingIdle, 1.0, chunk, noise, seeds::derive(seed, &[k]))?;
        out.extend(g.motion.vectors().copied());
        left -= chunk;
        k += 1;
    }
    Ok(out)
}

/// The sixteen-step protocol (eight gestures, each followed by a return to
/// neutral) preceded by a still lead-in. One-way gestures return with the
/// opposite pulse; shakes and nods end near neutral and return with rest
/// only. Neutral steps are labeled as being idle.
pub fn protocol_recording(spec: &ProtocolSpec) -> Result<Recording> {
    protocol_with_order(spec, &PROTOCOL_ORDER)
}

/// Same as [`protocol_recording`] with a custom gesture order.
pub fn protocol_with_order(spec: &ProtocolSpec, order: &[GestureLabel]) -> Result<Recording> {
    let rate = DEFAULT_SAMPLE_RATE_HZ;
    let mut vectors: Vec<[f64; 3]> = Vec::new();
    let mut segments = Vec::new();
    let mut push = |id: String, label: GestureLabel, chunk: Vec<[f64; 3]>, vectors: &mut Vec<[f64; 3]>| {
        let start = vectors.len() as u64;
        vectors.extend(chunk);
        segments.push(Segment {
            id,
            label,
            start_frame: start,
            end_frame: vectors.len() as u64,
        });
    };
    let seed = |tag: u64, i: usize| seeds::derive(spec.seed, &[tag, i as u64]);
    let sweep_duration = spec.sweep_rad * std::f64::consts::PI / (2.0 * spec.peak_velocity);

    push(
        "lead-in".into(),
        GestureLabel::BeingIdle,
        rest(spec.lead_in_s, spec.noise_sigma, seed(1, 0))?,
        &mut vectors,
    );
    for (i, &label) in order.iter().enumerate() {
        if label == GestureLabel::BeingIdle {
            return Err(Error::invalid("protocol steps must be non-idle gestures"));
        }
        let duration = if label.is_complex() {
            spec.complex_duration_s
        } else {
            sweep_duration
        };
        let mut chunk: Vec<[f64; 3]> = generate_gesture(label, spec.peak_velocity, duration, spec.noise_sigma, seed(2, i))?
            .motion
            .vectors()
            .copied()
            .collect();
        chunk.extend(rest(spec.rest_s, spec.noise_sigma, seed(3, i))?);
        push(format!("step{:02}-{}", 2 * i + 1, label.code()), label, chunk, &mut vectors);

        let mut back = Vec::new();
        if let Some(opposite) = label.opposite() {
            back.extend(
                generate_gesture(opposite, spec.peak_velocity, sweep_duration, spec.noise_sigma, seed(4, i))?
                    .motion
                    .vectors()
                    .copied(),
            );
        }
        back.extend(rest(spec.rest_s, spec.noise_sigma, seed(5, i))?);
        push(format!("step{:02}-neutral", 2 * i + 2), GestureLabel::BeingIdle, back, &mut vectors);
    }
    Ok(Recording {
        motion: MotionSequence::from_vectors(vectors, 0, rate)?,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_has_sixteen_steps_after_lead_in() {
        let rec = protocol_recording(&ProtocolSpec::default()).unwrap();
        assert_eq!(rec.segments.len(), 17);
        assert_eq!(rec.performed(), PROTOCOL_ORDER.to_vec());
        let mut next = 0;
        for s in &rec.segments {
            assert_eq!(s.start_frame, next);
            assert!(s.end_frame > s.start_frame);
            next = s.end_frame;
        }
        assert_eq!(next as usize, rec.motion.len());
    }

    #[test]
    fn dataset_round_trip() {
        let rec = protocol_recording(&ProtocolSpec::default()).unwrap();
        let d = rec.to_dataset("protocol").unwrap();
        assert_eq!(Recording::from_dataset(&d).unwrap(), rec);
    }
}
