//! K-Means codebooks over 3-D angular velocity vectors and the
//! minimum-distance quantizer that turns a motion sequence into symbols.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hmm::Symbol;

pub type Vec3 = [f64; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Codebook {
    /// Row `j` is the center quantized to symbol `j`.
    pub centers: Vec<Vec3>,
    /// Sum of squared distances of the fitting data to their centers.
    pub inertia: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iterations: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: 5,
            max_iterations: 100,
        }
    }
}

/// Trace of a single Lloyd run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansRun {
    pub centers: Vec<Vec3>,
    /// Inertia after each assignment step.
    pub inertia_history: Vec<f64>,
}

impl KMeansRun {
    pub fn inertia(&self) -> f64 {
        *self.inertia_history.last().expect("a run always assigns at least once")
    }
}

#[inline]
fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Index of the nearest center; the lowest index wins exact ties.
#[inline]
fn nearest(centers: &[Vec3], v: &Vec3) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = dist2(&centers[0], v);
    for (j, c) in centers.iter().enumerate().skip(1) {
        let d = dist2(c, v);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

fn check_finite(v: &Vec3) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("non-finite vector {v:?}")))
    }
}

impl Codebook {
    pub fn new(centers: Vec<Vec3>) -> Result<Self> {
        let cb = Codebook {
            centers,
            inertia: 0.0,
        };
        cb.check()?;
        Ok(cb)
    }

    pub fn k(&self) -> usize {
        self.centers.len()
    }

    pub fn check(&self) -> Result<()> {
        if self.centers.is_empty() {
            return Err(Error::validation("codebook has no centers"));
        }
        if let Some(j) = self.centers.iter().position(|c| c.iter().any(|x| !x.is_finite())) {
            return Err(Error::validation(format!("codebook center {j} is not finite")));
        }
        if !(self.inertia.is_finite() && self.inertia >= 0.0) {
            return Err(Error::validation("codebook inertia must be finite and non-negative"));
        }
        Ok(())
    }

    /// Symbol of the nearest center to `v` (Euclidean distance).
    pub fn quantize(&self, v: &Vec3) -> Result<Symbol> {
        check_finite(v)?;
        Ok(nearest(&self.centers, v).0)
    }

    pub fn quantize_all<'a, I>(&self, vectors: I) -> Result<Vec<Symbol>>
    where
        I: IntoIterator<Item = &'a Vec3>,
    {
        vectors.into_iter().map(|v| self.quantize(v)).collect()
    }
}

/// Fits `k` centers with `options.restarts` seeded Lloyd runs and keeps the
/// lowest-inertia run (earliest restart on ties).
pub fn kmeans_fit(vectors: &[Vec3], k: usize, seed: u64, options: &KMeansOptions) -> Result<Codebook> {
    if k == 0 {
        return Err(Error::invalid("k must be positive"));
    }
    if vectors.len() < k {
        return Err(Error::invalid(format!(
            "{} vectors cannot support {k} clusters",
            vectors.len()
        )));
    }
    if options.restarts == 0 || options.max_iterations == 0 {
        return Err(Error::invalid("restarts and max_iterations must be positive"));
    }
    for v in vectors {
        check_finite(v)?;
    }

    let mut best: Option<KMeansRun> = None;
    for restart in 0..options.restarts {
        let run = lloyd(vectors, k, restart_seed(seed, restart), options.max_iterations);
        if best.as_ref().is_none_or(|b| run.inertia() < b.inertia()) {
            best = Some(run);
        }
    }
    let best = best.expect("at least one restart");
    let inertia = best.inertia();
    Ok(Codebook {
        centers: best.centers,
        inertia,
    })
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    crate::seeds::derive(seed, &[0x6b6d, restart as u64])
}

/// One Lloyd run from `k` distinct data points. Stops at an assignment
/// fixpoint or after `max_iterations` center updates.
pub fn lloyd(vectors: &[Vec3], k: usize, seed: u64, max_iterations: usize) -> KMeansRun {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers: Vec<Vec3> = index::sample(&mut rng, vectors.len(), k)
        .into_iter()
        .map(|i| vectors[i])
        .collect();

    let mut assignment = vec![0usize; vectors.len()];
    let mut distances = vec![0.0; vectors.len()];
    let mut history = Vec::new();

    let assign = |centers: &[Vec3], assignment: &mut [usize], distances: &mut [f64]| -> (f64, bool) {
        let mut inertia = 0.0;
        let mut changed = false;
        for (i, v) in vectors.iter().enumerate() {
            let (j, d) = nearest(centers, v);
            if assignment[i] != j {
                assignment[i] = j;
                changed = true;
            }
            distances[i] = d;
            inertia += d;
        }
        (inertia, changed)
    };

    let (inertia, _) = assign(&centers, &mut assignment, &mut distances);
    history.push(inertia);

    for _ in 0..max_iterations {
        let mut sums = vec![[0.0; 3]; k];
        let mut counts = vec![0usize; k];
        for (v, &j) in vectors.iter().zip(&assignment) {
            counts[j] += 1;
            for d in 0..3 {
                sums[j][d] += v[d];
            }
        }
        for j in 0..k {
            if counts[j] > 0 {
                let n = counts[j] as f64;
                centers[j] = [sums[j][0] / n, sums[j][1] / n, sums[j][2] / n];
            }
        }
        // Empty clusters take over the point that is worst served by its
        // current center.
        for j in 0..k {
            if counts[j] == 0 {
                let far = distances
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                    .map(|(i, _)| i)
                    .expect("non-empty data");
                centers[j] = vectors[far];
                distances[far] = 0.0;
            }
        }
        let (inertia, changed) = assign(&centers, &mut assignment, &mut distances);
        history.push(inertia);
        if !changed {
            break;
        }
    }

    KMeansRun {
        centers,
        inertia_history: history,
    }
}
