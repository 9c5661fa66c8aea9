//! Programmable "robotic head" motion: half-sine angular velocity pulses
//! with additive Gaussian sensor noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Axis, Dataset, GestureLabel, LabeledGesture, MotionSequence, DEFAULT_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};
use crate::seeds;
use crate::vq::Vec3;

pub const MAX_DURATION_S: f64 = 2.0;
pub const MAX_PEAK_VELOCITY: f64 = 10.0;

/// Complex gestures shorter than this get two pulses instead of three.
const THREE_PULSE_MIN_DURATION_S: f64 = 1.2;

/// Number of samples in `duration_s` seconds at `rate_hz`.
pub(crate) fn sample_count(duration_s: f64, rate_hz: f64) -> usize {
    // Guard against products like 75 * 1.8 landing a hair under the integer.
    (duration_s * rate_hz + 1e-9).floor() as usize
}

fn noise_source(sigma: f64) -> Result<Option<Normal<f64>>> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::invalid(format!("noise sigma {sigma} must be a non-negative real")));
    }
    Ok((sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("checked sigma")))
}

/// Noise-free velocity profile of `label` sampled at `n` points.
fn profile(label: GestureLabel, peak: f64, n: usize, duration_s: f64) -> Vec<Vec3> {
    let mut out = vec![[0.0; 3]; n];
    let (axis, sign, pulses) = match label {
        GestureLabel::BeingIdle => return out,
        GestureLabel::Shaking => (Axis::Yaw, 1.0, complex_pulses(duration_s)),
        // Nods start with the head going down.
        GestureLabel::Nodding => (Axis::Pitch, -1.0, complex_pulses(duration_s)),
        other => {
            let (axis, sign) = other.direction().expect("directional gesture");
            (axis, sign, 1)
        }
    };
    for (i, v) in out.iter_mut().enumerate() {
        let phase = (i as f64 + 0.5) / n as f64;
        // Consecutive pulses alternate sign, which sin over several half
        // periods does on its own.
        v[axis as usize] = sign * peak * (PI * pulses as f64 * phase).sin();
    }
    out
}

fn complex_pulses(duration_s: f64) -> usize {
    if duration_s >= THREE_PULSE_MIN_DURATION_S {
        3
    } else {
        2
    }
}

/// Synthesizes one gesture at 75 Hz.
///
/// Directional gestures are a single half-sine pulse on their axis spanning
/// the whole duration. Shaking and nodding alternate 2 or 3 pulses on the yaw
/// or pitch axis. Being idle is noise only.
pub fn generate_gesture(
    label: GestureLabel,
    peak_velocity: f64,
    duration_s: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<LabeledGesture> {
    if !(peak_velocity > 0.0 && peak_velocity <= MAX_PEAK_VELOCITY) {
        return Err(Error::invalid(format!(
            "peak velocity {peak_velocity} rad/s must lie in (0, {MAX_PEAK_VELOCITY}]"
        )));
    }
    if !(duration_s > 0.0 && duration_s <= MAX_DURATION_S) {
        return Err(Error::invalid(format!(
            "duration {duration_s} s must lie in (0, {MAX_DURATION_S}]"
        )));
    }
    let noise = noise_source(noise_sigma)?;
    let n = sample_count(duration_s, DEFAULT_SAMPLE_RATE_HZ);
    if n == 0 {
        return Err(Error::invalid(format!("duration {duration_s} s yields no samples")));
    }
    let mut vectors = profile(label, peak_velocity, n, duration_s);
    if let Some(noise) = noise {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in &mut vectors {
            for x in v.iter_mut() {
                *x += noise.sample(&mut rng);
            }
        }
    }
    Ok(LabeledGesture {
        id: format!("{}-{seed:016x}", label.code()),
        label,
        motion: MotionSequence::from_vectors(vectors, 0, DEFAULT_SAMPLE_RATE_HZ)?,
    })
}

/// Parameters of a synthetic recording campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub participants: usize,
    pub repetitions: usize,
    /// Range of per-participant preferred peak velocity, rad/s.
    pub velocity_range: (f64, f64),
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            participants: 19,
            repetitions: 2,
            velocity_range: (1.0, 3.0),
            noise_sigma: 0.05,
            seed: 0,
        }
    }
}

/// Head excursion of a one-way gesture, rad. Together with the peak
/// velocity this fixes the pulse duration.
const SWEEP_RANGE_RAD: (f64, f64) = (0.5, 0.9);
const COMPLEX_DURATION_S: (f64, f64) = (1.3, 2.0);
const IDLE_DURATION_S: f64 = 2.0;
/// Repetition-to-repetition spread around a participant's preferred speed.
const PEAK_JITTER: f64 = 0.1;

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

/// `participants x 9 x repetitions` gestures. Each virtual participant keeps
/// one preferred peak velocity drawn from `velocity_range`.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    let (lo, hi) = spec.velocity_range;
    if !(lo > 0.0 && hi >= lo && hi <= MAX_PEAK_VELOCITY) {
        return Err(Error::invalid(format!(
            "velocity range [{lo}, {hi}] must be a positive interval within (0, {MAX_PEAK_VELOCITY}]"
        )));
    }
    if spec.participants == 0 || spec.repetitions == 0 {
        return Err(Error::invalid("participants and repetitions must be positive"));
    }
    noise_source(spec.noise_sigma)?;

    let mut items = Vec::with_capacity(spec.participants * spec.repetitions * 9);
    for p in 0..spec.participants {
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(spec.seed, &[p as u64]));
        let preferred = uniform(&mut rng, spec.velocity_range);
        for label in GestureLabel::ALL {
            for r in 0..spec.repetitions {
                let peak = (preferred * uniform(&mut rng, (1.0 - PEAK_JITTER, 1.0 + PEAK_JITTER)))
                    .min(MAX_PEAK_VELOCITY);
                let duration = match label {
                    GestureLabel::BeingIdle => IDLE_DURATION_S,
                    GestureLabel::Shaking | GestureLabel::Nodding => uniform(&mut rng, COMPLEX_DURATION_S),
                    _ => {
                        // Half-sine of peak v over T sweeps 2vT/pi radians.
                        let sweep = uniform(&mut rng, SWEEP_RANGE_RAD);
                        (sweep * PI / (2.0 * peak)).clamp(0.2, MAX_DURATION_S)
                    }
                };
                let noise_seed = rng.random::<u64>();
                let mut g = generate_gesture(label, peak, duration, spec.noise_sigma, noise_seed)?;
                g.id = format!("p{p:02}-{}-r{r}", label.code());
                items.push(g);
            }
        }
    }
    Ok(Dataset {
        items,
        provenance: format!(
            "synthetic participants={} repetitions={} velocity=[{lo},{hi}] noise_sigma={} seed={}",
            spec.participants, spec.repetitions, spec.noise_sigma, spec.seed
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_idle_is_zero() {
        let g = generate_gesture(GestureLabel::BeingIdle, 1.0, 2.0, 0.0, 4).unwrap();
        assert_eq!(g.motion.len(), 150);
        assert!(g.motion.vectors().all(|v| *v == [0.0; 3]));
    }

    #[test]
    fn rotating_left_is_positive_yaw_half_sine() {
        let g = generate_gesture(GestureLabel::RotatingLeft, 2.0, 1.0, 0.0, 1).unwrap();
        assert_eq!(g.motion.len(), 75);
        let yaw: Vec<f64> = g.motion.vectors().map(|v| v[0]).collect();
        let peak = yaw.iter().cloned().fold(f64::MIN, f64::max);
        assert!((peak - 2.0).abs() < 1e-12, "{peak}");
        assert!(yaw.iter().all(|&y| y > 0.0));
        assert!(g.motion.vectors().all(|v| v[1] == 0.0 && v[2] == 0.0));
    }

    #[test]
    fn directional_marginals() {
        for label in GestureLabel::SIMPLE.into_iter().skip(1) {
            let (axis, sign) = label.direction().unwrap();
            let g = generate_gesture(label, 1.5, 0.8, 0.0, 0).unwrap();
            let mut integral = [0.0; 3];
            for v in g.motion.vectors() {
                for d in 0..3 {
                    integral[d] += v[d] / 75.0;
                }
            }
            for d in 0..3 {
                if d == axis as usize {
                    assert!(integral[d] * sign > 0.0, "{label}");
                } else {
                    assert_eq!(integral[d], 0.0, "{label}");
                }
            }
        }
    }

    #[test]
    fn shaking_alternates_yaw() {
        let g = generate_gesture(GestureLabel::Shaking, 2.0, 1.8, 0.05, 12).unwrap();
        let mut flips = 0;
        let mut last_sign = 0.0;
        for v in g.motion.vectors() {
            // ignore near-zero samples so noise around crossings is not counted
            if v[0].abs() > 0.5 {
                let s = v[0].signum();
                if last_sign != 0.0 && s != last_sign {
                    flips += 1;
                }
                last_sign = s;
            }
        }
        assert!(flips >= 2, "{flips}");
        assert!(g.motion.vectors().all(|v| v[1].abs() <= 0.25));
    }

    #[test]
    fn sample_count_is_floor() {
        assert_eq!(sample_count(1.8, 75.0), 135);
        assert_eq!(sample_count(0.3, 75.0), 22);
        assert_eq!(sample_count(2.0, 75.0), 150);
    }

    #[test]
    fn bounds_are_enforced() {
        assert!(generate_gesture(GestureLabel::Nodding, 2.0, 2.5, 0.0, 0).is_err());
        assert!(generate_gesture(GestureLabel::Nodding, 11.0, 1.5, 0.0, 0).is_err());
        assert!(generate_gesture(GestureLabel::Nodding, 2.0, 1.5, -1.0, 0).is_err());
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let spec = DatasetSpec {
            participants: 1,
            repetitions: 1,
            velocity_range: (2.0, 2.0),
            noise_sigma: 0.0,
            seed: 3,
        };
        let d = generate_dataset(&spec).unwrap();
        assert_eq!(d.len(), 9);
        for label in GestureLabel::ALL {
            assert_eq!(d.with_label(label).count(), 1);
        }
        let full = DatasetSpec {
            seed: 8,
            ..DatasetSpec::default()
        };
        let a = generate_dataset(&full).unwrap();
        assert_eq!(a.len(), 342);
        assert_eq!(a, generate_dataset(&full).unwrap());
        assert!(a.items.iter().all(|g| g.motion.duration_s() <= MAX_DURATION_S));
    }
}
