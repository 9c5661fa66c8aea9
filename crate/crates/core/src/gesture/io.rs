//! Line-oriented dataset files.
//!
//! ```text
//! chmm-dataset v1 rate=75
//! # provenance: synthetic participants=19 ...
//! # gesture label=2 id=p00-RL-r0
//! 0,0.0123,-0.004,0.0311
//! 1,0.0731,0.0092,-0.0107
//!
//! # gesture label=9 id=p00-N-r0
//! ...
//! ```
//!
//! Rates are written with Rust's shortest round-trip float formatting, so a
//! saved dataset reloads bit-for-bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{AngularVelocitySample, Dataset, GestureLabel, LabeledGesture, MotionSequence, DEFAULT_SAMPLE_RATE_HZ};
use crate::error::{Error, Result};

const MAGIC: &str = "chmm-dataset v1";
const PROVENANCE_PREFIX: &str = "# provenance: ";
const GESTURE_PREFIX: &str = "# gesture ";

pub fn write_dataset<W: Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    let rate = dataset.sample_rate_hz().unwrap_or(DEFAULT_SAMPLE_RATE_HZ);
    writeln!(out, "{MAGIC} rate={rate}")?;
    if !dataset.provenance.is_empty() {
        writeln!(out, "{PROVENANCE_PREFIX}{}", dataset.provenance.replace('\n', " "))?;
    }
    for g in &dataset.items {
        writeln!(out, "{GESTURE_PREFIX}label={} id={}", g.label.value(), g.id)?;
        for s in &g.motion.samples {
            let [yaw, pitch, roll] = s.omega;
            writeln!(out, "{},{yaw},{pitch},{roll}", s.frame)?;
        }
        writeln!(out)?;
    }
    out.flush()
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(g) = dataset
        .items
        .iter()
        .find(|g| Some(g.motion.sample_rate_hz) != dataset.sample_rate_hz())
    {
        return Err(Error::invalid(format!(
            "gesture {} has a different sample rate; a dataset file carries one rate",
            g.id
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(dataset, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

struct Block {
    label: GestureLabel,
    id: String,
    samples: Vec<AngularVelocitySample>,
}

pub fn read_dataset<R: BufRead>(input: R) -> Result<Dataset> {
    let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
    let header = header.map_err(|e| Error::io("<dataset>", e))?;
    let rate = parse_header(&header)?;

    let mut dataset = Dataset::default();
    let mut block: Option<Block> = None;
    for (no, line) in lines {
        let line = line.map_err(|e| Error::io("<dataset>", e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if let Some(b) = block.take() {
                dataset.items.push(finish(b, rate, no)?);
            }
        } else if let Some(rest) = line.strip_prefix(PROVENANCE_PREFIX) {
            dataset.provenance = rest.to_string();
        } else if let Some(rest) = line.strip_prefix(GESTURE_PREFIX) {
            if let Some(b) = block.take() {
                dataset.items.push(finish(b, rate, no)?);
            }
            block = Some(parse_gesture_header(rest, no)?);
        } else if line.starts_with('#') {
            continue;
        } else {
            let b = block.as_mut().ok_or_else(|| Error::Parse {
                line: no,
                message: "sample record outside a gesture block".into(),
            })?;
            let sample = parse_record(line, no)?;
            if let Some(prev) = b.samples.last() {
                if sample.frame <= prev.frame {
                    return Err(Error::Parse {
                        line: no,
                        message: format!("frame {} does not follow frame {}", sample.frame, prev.frame),
                    });
                }
            }
            b.samples.push(sample);
        }
    }
    if let Some(b) = block.take() {
        dataset.items.push(finish(b, rate, 0)?);
    }
    Ok(dataset)
}

fn parse_header(line: &str) -> Result<f64> {
    let bad = |message: String| Error::Parse { line: 1, message };
    let rest = line
        .strip_prefix(MAGIC)
        .ok_or_else(|| bad(format!("expected header `{MAGIC} rate=<hz>`, found {line:?}")))?;
    let rate_text = rest
        .trim()
        .strip_prefix("rate=")
        .ok_or_else(|| bad("header lacks rate=<hz>".into()))?;
    let rate: f64 = rate_text
        .parse()
        .map_err(|_| bad(format!("bad sample rate {rate_text:?}")))?;
    if !(rate.is_finite() && rate > 0.0) {
        return Err(bad(format!("sample rate {rate} must be positive")));
    }
    Ok(rate)
}

fn parse_gesture_header(rest: &str, line: usize) -> Result<Block> {
    let mut label = None;
    let mut id = None;
    for field in rest.split_whitespace() {
        if let Some(v) = field.strip_prefix("label=") {
            let value: u8 = v.parse().map_err(|_| Error::Parse {
                line,
                message: format!("label {v:?} is not an integer"),
            })?;
            label = Some(GestureLabel::from_value(value).map_err(|_| {
                Error::validation(format!("line {line}: gesture label {value} is outside 1..=9"))
            })?);
        } else if let Some(v) = field.strip_prefix("id=") {
            id = Some(v.to_string());
        }
    }
    Ok(Block {
        label: label.ok_or_else(|| Error::Parse {
            line,
            message: "gesture header lacks label=".into(),
        })?,
        id: id.ok_or_else(|| Error::Parse {
            line,
            message: "gesture header lacks id=".into(),
        })?,
        samples: Vec::new(),
    })
}

/// Parses `<frame>,<yaw>,<pitch>,<roll>`.
pub(crate) fn parse_record(line: &str, line_no: usize) -> Result<AngularVelocitySample> {
    let bad = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 4 {
        return Err(bad(format!(
            "expected `frame,yaw,pitch,roll` (4 fields), found {} field(s)",
            fields.len()
        )));
    }
    let frame: u64 = fields[0]
        .parse()
        .map_err(|_| bad(format!("bad frame index {:?}", fields[0])))?;
    let mut omega = [0.0; 3];
    for (d, text) in fields[1..].iter().enumerate() {
        let x: f64 = text.parse().map_err(|_| bad(format!("bad angular velocity {text:?}")))?;
        if !x.is_finite() {
            return Err(bad(format!("angular velocity {text:?} is not finite")));
        }
        omega[d] = x;
    }
    Ok(AngularVelocitySample { frame, omega })
}

fn finish(block: Block, rate: f64, line: usize) -> Result<LabeledGesture> {
    let motion = MotionSequence::new(block.samples, rate).map_err(|e| Error::Parse {
        line,
        message: e.to_string(),
    })?;
    Ok(LabeledGesture {
        id: block.id,
        label: block.label,
        motion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::{generate_dataset, DatasetSpec};

    fn small() -> Dataset {
        generate_dataset(&DatasetSpec {
            participants: 2,
            repetitions: 1,
            seed: 5,
            ..DatasetSpec::default()
        })
        .unwrap()
    }

    fn to_bytes(d: &Dataset) -> Vec<u8> {
        let mut buf = Vec::new();
        write_dataset(d, &mut buf).unwrap();
        buf
    }

    #[test]
    fn round_trip_and_canonical_bytes() {
        let d = small();
        let bytes = to_bytes(&d);
        let back = read_dataset(bytes.as_slice()).unwrap();
        assert_eq!(back, d);
        assert_eq!(to_bytes(&back), bytes);
    }

    #[test]
    fn empty_dataset_is_header_only() {
        let bytes = to_bytes(&Dataset::default());
        assert_eq!(String::from_utf8(bytes.clone()).unwrap(), "chmm-dataset v1 rate=75\n");
        assert!(read_dataset(bytes.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn short_record_cites_line() {
        let text = "chmm-dataset v1 rate=75\n# gesture label=2 id=a\n0,0.1,0.2,0.3\n1,0.1,0.2\n";
        match read_dataset(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn label_ten_is_a_validation_error() {
        let text = "chmm-dataset v1 rate=75\n# gesture label=10 id=a\n0,0,0,0\n";
        assert!(matches!(read_dataset(text.as_bytes()), Err(Error::Validation(_))));
    }

    #[test]
    fn bad_header_and_orphan_records() {
        assert!(matches!(
            read_dataset("hello\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        let orphan = "chmm-dataset v1 rate=75\n0,0,0,0\n";
        assert!(matches!(read_dataset(orphan.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }
}
