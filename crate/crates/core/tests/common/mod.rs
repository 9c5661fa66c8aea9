//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use chmm::hmm::{DiscreteHmm, TrainingReport};

/// Sums the joint probability of every state path explicitly.
pub fn brute_force_log_likelihood(hmm: &DiscreteHmm, obs: &[usize]) -> f64 {
    let n = hmm.n_states;
    let t = obs.len();
    let mut total = 0.0;
    let mut path = vec![0usize; t];
    loop {
        let mut p = hmm.initial[path[0]] * hmm.emission[path[0]][obs[0]];
        for i in 1..t {
            p *= hmm.transition[path[i - 1]][path[i]] * hmm.emission[path[i]][obs[i]];
        }
        total += p;
        // odometer increment over all n^t paths
        let mut k = 0;
        loop {
            if k == t {
                return total.ln();
            }
            path[k] += 1;
            if path[k] < n {
                break;
            }
            path[k] = 0;
            k += 1;
        }
    }
}

/// Index of the nearest center by full scan; the first of equal distances wins.
pub fn nearest_center(centers: &[[f64; 3]], v: &[f64; 3]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let d: f64 = (0..3).map(|j| (c[j] - v[j]) * (c[j] - v[j])).sum();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Macro precision, recall and average accuracy from raw (truth, prediction)
/// pairs, one class at a time. `None` is a rejection.
pub fn per_class_macro(pairs: &[(usize, Option<usize>)], classes: usize) -> (f64, f64, f64) {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut p, mut r, mut a) = (0.0, 0.0, 0.0);
    for k in 0..classes {
        let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
        for &(truth, pred) in pairs {
            let is_truth = truth == k;
            let is_pred = pred == Some(k);
            match (is_truth, is_pred) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
        p += ratio(tp, tp + fp);
        r += ratio(tp, tp + fn_);
        a += ratio(tp + tn, pairs.len());
    }
    let c = classes as f64;
    (p / c, r / c, a / c)
}

/// Checks what every Baum-Welch run must satisfy.
pub fn check_training(start: &DiscreteHmm, trained: &DiscreteHmm, report: &TrainingReport) -> Result<(), String> {
    let h = &report.log_likelihood_history;
    if h.len() != report.iterations_run + 1 {
        return Err(format!("history has {} entries for {} iterations", h.len(), report.iterations_run));
    }
    for w in h.windows(2) {
        if w[1] < w[0] - 1e-10 {
            return Err(format!("log-likelihood decreased from {} to {}", w[0], w[1]));
        }
    }
    for (name, rows) in [("transition", &trained.transition), ("emission", &trained.emission)] {
        for (i, row) in rows.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 || row.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
                return Err(format!("{name} row {i} is not a distribution: {row:?}"));
            }
        }
    }
    if trained.initial != start.initial {
        return Err("initial distribution changed".into());
    }
    for i in 0..trained.n_states {
        for j in 0..trained.n_states {
            if (j < i || j > i + 1) && trained.transition[i][j] != 0.0 {
                return Err(format!("structural zero a[{i}][{j}] = {}", trained.transition[i][j]));
            }
        }
    }
    if !trained.validate().is_empty() {
        return Err(format!("{:?}", trained.validate()));
    }
    Ok(())
}

/// A small but fully trained cascade (one grid cell) on the default corpus.
pub fn small_model() -> chmm::CascadeModel {
    small_outcome().model
}

pub fn small_outcome() -> chmm::training::TrainOutcome {
    use chmm::gesture::{generate_dataset, DatasetSpec};
    use chmm::training::{train_cascade, TrainConfig};
    let mut config = TrainConfig::default().with_seed(0);
    config.grid.n_range = (3, 3);
    config.grid.m_range = (12, 12);
    config.grid.sessions = 1;
    train_cascade(&generate_dataset(&DatasetSpec::default()).unwrap(), &config).unwrap()
}
