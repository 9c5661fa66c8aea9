//! Macro-averaged classification metrics, motion onset detection and
//! recognition latency.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::gesture::{GestureLabel, MotionSequence};

/// Angular speed (rad/s) at which a head is considered to start moving.
pub const DEFAULT_OMEGA_INIT: f64 = 0.1;

/// Counts of (true, predicted) pairs. A prediction of `None` is a rejection
/// and lands in the `rejected` column, which has no matching row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub class_labels: Vec<GestureLabel>,
    /// `counts[t][p]`, indexed by position in `class_labels`.
    pub counts: Vec<Vec<u64>>,
    pub rejected: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroMetrics {
    pub precision: f64,
    pub recall: f64,
    pub average_accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub label: GestureLabel,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

impl ConfusionMatrix {
    pub fn empty(class_labels: &[GestureLabel]) -> Self {
        let c = class_labels.len();
        ConfusionMatrix {
            class_labels: class_labels.to_vec(),
            counts: vec![vec![0; c]; c],
            rejected: vec![0; c],
        }
    }

    /// Tallies `(truth, prediction)` pairs over the declared classes.
    pub fn from_pairs<I>(class_labels: &[GestureLabel], pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (GestureLabel, Option<GestureLabel>)>,
    {
        let mut m = ConfusionMatrix::empty(class_labels);
        for (truth, predicted) in pairs {
            m.add(truth, predicted)?;
        }
        Ok(m)
    }

    pub fn add(&mut self, truth: GestureLabel, predicted: Option<GestureLabel>) -> Result<()> {
        let t = self.position(truth)?;
        match predicted {
            Some(p) => {
                let p = self.position(p)?;
                self.counts[t][p] += 1;
            }
            None => self.rejected[t] += 1,
        }
        Ok(())
    }

    fn position(&self, label: GestureLabel) -> Result<usize> {
        self.class_labels
            .iter()
            .position(|&l| l == label)
            .ok_or_else(|| Error::invalid(format!("label {label} is not among the declared classes")))
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum::<u64>() + self.rejected.iter().sum::<u64>()
    }

    /// Per-class one-vs-rest precision, recall and accuracy. Ratios with a
    /// zero denominator count as 0.
    pub fn per_class(&self) -> Result<Vec<ClassMetrics>> {
        let total = self.total();
        if self.class_labels.is_empty() || total == 0 {
            return Err(Error::invalid("confusion matrix holds no counts"));
        }
        let c = self.class_labels.len();
        Ok((0..c)
            .map(|k| {
                let tp = self.counts[k][k];
                let fp: u64 = (0..c).filter(|&t| t != k).map(|t| self.counts[t][k]).sum();
                let fn_: u64 = (0..c).filter(|&p| p != k).map(|p| self.counts[k][p]).sum::<u64>() + self.rejected[k];
                let tn = total - tp - fp - fn_;
                ClassMetrics {
                    label: self.class_labels[k],
                    precision: ratio(tp, tp + fp),
                    recall: ratio(tp, tp + fn_),
                    accuracy: ratio(tp + tn, total),
                }
            })
            .collect())
    }

    pub fn macro_metrics(&self) -> Result<MacroMetrics> {
        let per_class = self.per_class()?;
        let n = per_class.len() as f64;
        Ok(MacroMetrics {
            precision: per_class.iter().map(|m| m.precision).sum::<f64>() / n,
            recall: per_class.iter().map(|m| m.recall).sum::<f64>() / n,
            average_accuracy: per_class.iter().map(|m| m.accuracy).sum::<f64>() / n,
        })
    }

    /// `class,precision,recall` rows, a `macro` row and an `accuracy` row
    /// carrying the average accuracy.
    pub fn write_report<W: Write>(&self, mut out: W) -> Result<()> {
        let per_class = self.per_class()?;
        let summary = self.macro_metrics()?;
        let io = |e| Error::io("<report>", e);
        writeln!(out, "class,precision,recall").map_err(io)?;
        for m in &per_class {
            writeln!(out, "{},{:.6},{:.6}", m.label.value(), m.precision, m.recall).map_err(io)?;
        }
        writeln!(out, "macro,{:.6},{:.6}", summary.precision, summary.recall).map_err(io)?;
        writeln!(out, "accuracy,{:.6},", summary.average_accuracy).map_err(io)?;
        Ok(())
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// First frame whose angular speed reaches `omega_init` (inclusive).
pub fn detect_motion_onset(motion: &MotionSequence, omega_init: f64) -> Option<u64> {
    motion.samples.iter().find(|s| s.norm() >= omega_init).map(|s| s.frame)
}

/// Seconds between motion onset and the frame that triggered recognition.
pub fn estimate_latency(onset_frame: u64, trigger_frame: u64, sample_rate_hz: f64) -> Result<f64> {
    if trigger_frame < onset_frame {
        return Err(Error::invalid(format!(
            "trigger frame {trigger_frame} precedes onset frame {onset_frame}"
        )));
    }
    if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
        return Err(Error::invalid(format!("sample rate {sample_rate_hz} must be positive")));
    }
    Ok((trigger_frame - onset_frame) as f64 / sample_rate_hz)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyRecord {
    pub gesture: GestureLabel,
    pub onset_frame: u64,
    pub trigger_frame: u64,
    pub latency_s: f64,
}

impl LatencyRecord {
    pub fn new(gesture: GestureLabel, onset_frame: u64, trigger_frame: u64, sample_rate_hz: f64) -> Result<Self> {
        Ok(LatencyRecord {
            gesture,
            onset_frame,
            trigger_frame,
            latency_s: estimate_latency(onset_frame, trigger_frame, sample_rate_hz)?,
        })
    }
}

/// Columns of the latency table, in order.
pub const LATENCY_COLUMNS: [GestureLabel; 8] = [
    GestureLabel::RotatingLeft,
    GestureLabel::RotatingRight,
    GestureLabel::TiltingUpward,
    GestureLabel::TiltingDownward,
    GestureLabel::LeaningLeft,
    GestureLabel::LeaningRight,
    GestureLabel::Shaking,
    GestureLabel::Nodding,
];

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Sample standard deviation (n - 1 denominator).
pub fn sample_std(xs: &[f64]) -> Option<f64> {
    let m = mean(xs)?;
    (xs.len() > 1).then(|| (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt())
}

/// Per-participant latency table with `mean` and `std` rows. When a
/// participant has several records for one gesture the first is used.
pub fn write_latency_table<W: Write>(rows: &[(String, Vec<LatencyRecord>)], mut out: W) -> Result<()> {
    let io = |e| Error::io("<report>", e);
    let header: Vec<&str> = LATENCY_COLUMNS.iter().map(|l| l.code()).collect();
    writeln!(out, "participant,{}", header.join(",")).map_err(io)?;

    let mut columns: BTreeMap<GestureLabel, Vec<f64>> = BTreeMap::new();
    for (participant, records) in rows {
        let cells: Vec<String> = LATENCY_COLUMNS
            .iter()
            .map(|&label| match records.iter().find(|r| r.gesture == label) {
                Some(r) => {
                    columns.entry(label).or_default().push(r.latency_s);
                    format!("{:.3}", r.latency_s)
                }
                None => String::new(),
            })
            .collect();
        writeln!(out, "{participant},{}", cells.join(",")).map_err(io)?;
    }
    for (name, stat) in [("mean", mean as fn(&[f64]) -> Option<f64>), ("std", sample_std)] {
        let cells: Vec<String> = LATENCY_COLUMNS
            .iter()
            .map(|l| {
                columns
                    .get(l)
                    .and_then(|xs| stat(xs))
                    .map(|v| format!("{v:.3}"))
                    .unwrap_or_default()
            })
            .collect();
        writeln!(out, "{name},{}", cells.join(",")).map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::{AngularVelocitySample, GestureLabel::*};

    #[test]
    fn empty_input_is_all_zero() {
        let m = ConfusionMatrix::from_pairs(&[BeingIdle, RotatingLeft], []).unwrap();
        assert_eq!(m.total(), 0);
        assert!(m.macro_metrics().is_err());
    }

    #[test]
    fn counts_land_in_place() {
        let m = ConfusionMatrix::from_pairs(
            &[BeingIdle, RotatingLeft],
            [(BeingIdle, Some(BeingIdle)), (BeingIdle, Some(BeingIdle))],
        )
        .unwrap();
        assert_eq!(m.counts, vec![vec![2, 0], vec![0, 0]]);
        assert!(ConfusionMatrix::from_pairs(&[BeingIdle], [(Shaking, None)]).is_err());
    }

    #[test]
    fn two_class_hand_computed() {
        let mut m = ConfusionMatrix::empty(&[Shaking, Nodding]);
        m.counts = vec![vec![2, 1], vec![0, 3]];
        let r = m.macro_metrics().unwrap();
        assert!((r.precision - 0.875).abs() < 1e-12);
        assert!((r.recall - 5.0 / 6.0).abs() < 1e-12);
        assert!((r.average_accuracy - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn rejections_are_misses() {
        let m = ConfusionMatrix::from_pairs(
            &[Shaking, Nodding],
            [
                (Shaking, Some(Shaking)),
                (Shaking, None),
                (Nodding, Some(Nodding)),
                (Nodding, Some(Nodding)),
            ],
        )
        .unwrap();
        let r = m.macro_metrics().unwrap();
        assert_eq!(r.precision, 1.0);
        assert!((r.recall - 0.75).abs() < 1e-12);
        assert!((r.average_accuracy - 0.875).abs() < 1e-12);
    }

    #[test]
    fn diagonal_is_perfect() {
        let m = ConfusionMatrix::from_pairs(
            &GestureLabel::SIMPLE,
            GestureLabel::SIMPLE.iter().map(|&l| (l, Some(l))),
        )
        .unwrap();
        let r = m.macro_metrics().unwrap();
        assert_eq!((r.precision, r.recall, r.average_accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn onset_is_inclusive() {
        let mut samples: Vec<_> = (0..10).map(|i| AngularVelocitySample::new(i, [0.0; 3])).collect();
        samples[5].omega = [0.1, 0.0, 0.0];
        let m = MotionSequence::new(samples, 75.0).unwrap();
        assert_eq!(detect_motion_onset(&m, 0.1), Some(5));
        let still = MotionSequence::from_vectors(vec![[0.0; 3]; 20], 0, 75.0).unwrap();
        assert_eq!(detect_motion_onset(&still, 0.1), None);
    }

    #[test]
    fn latency_examples() {
        assert!((estimate_latency(100, 116, 75.0).unwrap() - 0.213).abs() < 5e-4);
        assert!((estimate_latency(0, 52, 75.0).unwrap() - 0.693).abs() < 5e-4);
        assert_eq!(estimate_latency(7, 7, 75.0).unwrap(), 0.0);
        assert!(estimate_latency(8, 7, 75.0).is_err());
    }

    #[test]
    fn latency_table_shape() {
        let rec = |g, d| LatencyRecord::new(g, 0, d, 75.0).unwrap();
        let rows = vec![
            ("P1".to_string(), vec![rec(RotatingLeft, 16), rec(Nodding, 49)]),
            ("P2".to_string(), vec![rec(RotatingLeft, 13)]),
        ];
        let mut buf = Vec::new();
        write_latency_table(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "participant,RL,RR,TU,TD,LL,LR,S,N");
        assert_eq!(lines[1], "P1,0.213,,,,,,,0.653");
        assert!(lines[3].starts_with("mean,0.193,"));
        assert_eq!(lines.len(), 5);
    }
}
