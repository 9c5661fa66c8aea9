use std::io::Write;
use std::thread;
use std::time::{Duration, Instant};

use crate::cascade::{CascadeModel, EventKind, GestureEvent};
use crate::error::{Error, Result};
use crate::eval::{detect_motion_onset, mean, write_latency_table, LatencyRecord, DEFAULT_OMEGA_INIT};
use crate::gesture::GestureLabel;

use super::Recording;

/// Per-sample processing budget, ms (one tracker frame at 75 Hz).
pub const REALTIME_BUDGET_MS: f64 = 13.0;

/// How one performed gesture was detected.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMatch {
    pub segment: usize,
    pub label: GestureLabel,
    pub onset_frame: Option<u64>,
    /// Index into [`ReplayReport::events`] of the first matching trigger.
    pub event: Option<usize>,
    /// Matching triggers inside the segment.
    pub matching_triggers: usize,
    pub latency: Option<LatencyRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub events: Vec<GestureEvent>,
    /// Indices of events that start a new output (label change or complex).
    pub triggers: Vec<usize>,
    pub matches: Vec<SegmentMatch>,
    pub frames_processed: u64,
    pub max_step_ms: f64,
    pub mean_step_ms: f64,
    pub budget_violations: usize,
    pub wall_time_s: f64,
}

impl ReplayReport {
    pub fn latencies(&self) -> Vec<LatencyRecord> {
        self.matches.iter().filter_map(|m| m.latency).collect()
    }

    pub fn mean_latency(&self, complex: bool) -> Option<f64> {
        let xs: Vec<f64> = self
            .latencies()
            .iter()
            .filter(|r| r.gesture.is_complex() == complex)
            .map(|r| r.latency_s)
            .collect();
        mean(&xs)
    }

    /// Complex events that do not belong to a performed gesture of that label.
    pub fn false_complex_events(&self, recording: &Recording) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Complex)
            .filter(|e| {
                !recording
                    .segments
                    .iter()
                    .any(|s| s.label == e.label && e.trigger_frame >= s.start_frame && e.trigger_frame < s.end_frame)
            })
            .count()
    }

    /// Latency table with a single row for this run.
    pub fn write_latency_csv<W: Write>(&self, row_name: &str, out: W) -> Result<()> {
        write_latency_table(&[(row_name.to_string(), self.latencies())], out)
    }
}

fn is_trigger(events: &[GestureEvent], i: usize) -> bool {
    let e = &events[i];
    e.kind == EventKind::Complex || i == 0 || events[i - 1].label != e.label
}

/// Streams `recording` through a fresh cascade state, paced at
/// `rate_multiplier` times the recording's sample rate (`f64::INFINITY`
/// runs unpaced). Events depend only on the samples, never on pacing.
///
/// When `expected` is given it must equal the recording's performed
/// gestures in order.
pub fn replay(
    model: &CascadeModel,
    recording: &Recording,
    rate_multiplier: f64,
    expected: Option<&[GestureLabel]>,
) -> Result<ReplayReport> {
    if !(rate_multiplier > 0.0) {
        return Err(Error::invalid("rate multiplier must be positive"));
    }
    if let Some(expected) = expected {
        let performed = recording.performed();
        if performed != expected {
            return Err(Error::invalid(format!(
                "script lists {} gestures but the recording performs {:?}",
                expected.len(),
                performed.iter().map(|l| l.code()).collect::<Vec<_>>()
            )));
        }
    }
    let rate = recording.motion.sample_rate_hz;
    if rate != model.sample_rate_hz {
        return Err(Error::invalid(format!(
            "recording is sampled at {rate} Hz but the model expects {} Hz",
            model.sample_rate_hz
        )));
    }

    let period = if rate_multiplier.is_finite() {
        Some(Duration::from_secs_f64(1.0 / (rate * rate_multiplier)))
    } else {
        None
    };
    let mut state = model.init_state()?;
    let mut events = Vec::new();
    let mut step_ms = Vec::with_capacity(recording.motion.len());
    let start = Instant::now();
    for (i, sample) in recording.motion.samples.iter().enumerate() {
        if let Some(period) = period {
            let deadline = start + period * i as u32;
            let now = Instant::now();
            if deadline > now {
                thread::sleep(deadline - now);
            }
        }
        let t0 = Instant::now();
        let ev = model.step(&mut state, sample)?;
        step_ms.push(t0.elapsed().as_secs_f64() * 1e3);
        events.extend(ev);
    }
    let wall_time_s = start.elapsed().as_secs_f64();

    let triggers: Vec<usize> = (0..events.len()).filter(|&i| is_trigger(&events, i)).collect();
    let mut matches = Vec::new();
    for (si, seg) in recording.segments.iter().enumerate() {
        if seg.label == GestureLabel::BeingIdle {
            continue;
        }
        let onset = detect_motion_onset(&recording.segment_motion(seg), DEFAULT_OMEGA_INIT);
        let matching: Vec<usize> = triggers
            .iter()
            .copied()
            .filter(|&i| {
                let e = &events[i];
                e.label == seg.label
                    && e.trigger_frame >= onset.unwrap_or(seg.start_frame)
                    && e.trigger_frame < seg.end_frame
                    && (e.kind == EventKind::Complex) == seg.label.is_complex()
            })
            .collect();
        let event = matching.first().copied();
        let latency = match (onset, event) {
            (Some(onset), Some(i)) => Some(LatencyRecord::new(seg.label, onset, events[i].trigger_frame, rate)?),
            _ => None,
        };
        matches.push(SegmentMatch {
            segment: si,
            label: seg.label,
            onset_frame: onset,
            event,
            matching_triggers: matching.len(),
            latency,
        });
    }

    Ok(ReplayReport {
        frames_processed: step_ms.len() as u64,
        max_step_ms: step_ms.iter().copied().fold(0.0, f64::max),
        mean_step_ms: mean(&step_ms).unwrap_or(0.0),
        budget_violations: step_ms.iter().filter(|&&t| t > REALTIME_BUDGET_MS).count(),
        events,
        triggers,
        matches,
        wall_time_s,
    })
}
