//! Discrete left-right hidden Markov models.
//!
//! A model scores a symbol sequence with the scaled forward procedure and is
//! trained with multi-sequence Baum-Welch. Symbols are zero-based indices into
//! the emission alphabet, so a model with `n_symbols = M` accepts `0..M`.
//!
//! The initial distribution is pinned to the first state and is never
//! re-estimated; only the transition and emission matrices are learned.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index into a model's emission alphabet.
pub type Symbol = usize;

/// Row-sum tolerance for every stochastic vector in a model.
pub const STOCHASTIC_TOLERANCE: f64 = 1e-12;

/// Lower bound applied to emission probabilities during re-estimation.
pub const DEFAULT_EMISSION_FLOOR: f64 = 1e-6;

/// A discrete HMM `(A, B, pi)` restricted to the left-right topology: state
/// `i` may only stay in `i` or advance to `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteHmm {
    pub n_states: usize,
    pub n_symbols: usize,
    /// `n_states x n_states`, row-stochastic.
    pub transition: Vec<Vec<f64>>,
    /// `n_states x n_symbols`, row-stochastic.
    pub emission: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
}

/// One broken invariant found by [`DiscreteHmm::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape {
        what: &'static str,
        expected: String,
        found: String,
    },
    NonFinite {
        matrix: &'static str,
        row: usize,
        col: usize,
    },
    OutOfRange {
        matrix: &'static str,
        row: usize,
        col: usize,
        value: f64,
    },
    RowSum {
        matrix: &'static str,
        row: usize,
        sum: f64,
    },
    InitialSum {
        sum: f64,
    },
    NotLeftRight {
        row: usize,
        col: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape {
                what,
                expected,
                found,
            } => write!(f, "{what}: expected shape {expected}, found {found}"),
            Violation::NonFinite { matrix, row, col } => {
                write!(f, "{matrix}[{row}][{col}] is not finite")
            }
            Violation::OutOfRange {
                matrix,
                row,
                col,
                value,
            } => write!(f, "{matrix}[{row}][{col}] = {value} lies outside [0, 1]"),
            Violation::RowSum { matrix, row, sum } => {
                write!(f, "{matrix} row {row} sums to {sum}, not 1")
            }
            Violation::InitialSum { sum } => write!(f, "initial distribution sums to {sum}, not 1"),
            Violation::NotLeftRight { row, col, value } => write!(
                f,
                "transition[{row}][{col}] = {value} breaks the left-right structure"
            ),
        }
    }
}

/// Stopping rule and flooring for [`DiscreteHmm::baum_welch`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    pub max_iterations: usize,
    /// Stop once the total log-likelihood improves by less than this.
    pub tolerance: f64,
    pub emission_floor: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_iterations: 500,
            tolerance: 1e-6,
            emission_floor: DEFAULT_EMISSION_FLOOR,
        }
    }
}

/// Progress of one Baum-Welch run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingReport {
    /// Total natural-log likelihood of the corpus for the initial model and
    /// after every re-estimation; the last entry belongs to the returned model.
    pub log_likelihood_history: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl DiscreteHmm {
    /// Builds a model from explicit matrices and rejects it if any invariant
    /// fails.
    pub fn new(transition: Vec<Vec<f64>>, emission: Vec<Vec<f64>>, initial: Vec<f64>) -> Result<Self> {
        let hmm = DiscreteHmm {
            n_states: transition.len(),
            n_symbols: emission.first().map_or(0, Vec::len),
            transition,
            emission,
            initial,
        };
        hmm.check()?;
        Ok(hmm)
    }

    /// Random left-right model. Allowed transitions and every emission row are
    /// drawn from a seeded source and row-normalized; all initial mass sits on
    /// the first state.
    pub fn left_right(n_states: usize, n_symbols: usize, seed: u64) -> Result<Self> {
        if n_states == 0 || n_symbols == 0 {
            return Err(Error::invalid(format!(
                "left-right HMM needs at least one state and one symbol (got N={n_states}, M={n_symbols})"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut transition = vec![vec![0.0; n_states]; n_states];
        for (i, row) in transition.iter_mut().enumerate() {
            if i + 1 < n_states {
                let stay: f64 = rng.random_range(0.1..1.0);
                let advance: f64 = rng.random_range(0.1..1.0);
                row[i] = stay / (stay + advance);
                row[i + 1] = advance / (stay + advance);
            } else {
                row[i] = 1.0;
            }
        }
        let emission = (0..n_states)
            .map(|_| {
                let raw: Vec<f64> = (0..n_symbols).map(|_| rng.random_range(0.1..1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.into_iter().map(|p| p / total).collect()
            })
            .collect();
        let mut initial = vec![0.0; n_states];
        initial[0] = 1.0;
        Ok(DiscreteHmm {
            n_states,
            n_symbols,
            transition,
            emission,
            initial,
        })
    }

    /// Lists every broken invariant; an empty list means the model is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.n_states;
        let m = self.n_symbols;
        if n == 0 || m == 0 {
            out.push(Violation::Shape {
                what: "model",
                expected: "N >= 1, M >= 1".into(),
                found: format!("N={n}, M={m}"),
            });
            return out;
        }
        if self.transition.len() != n || self.transition.iter().any(|r| r.len() != n) {
            out.push(Violation::Shape {
                what: "transition",
                expected: format!("{n}x{n}"),
                found: shape_of(&self.transition),
            });
        }
        if self.emission.len() != n || self.emission.iter().any(|r| r.len() != m) {
            out.push(Violation::Shape {
                what: "emission",
                expected: format!("{n}x{m}"),
                found: shape_of(&self.emission),
            });
        }
        if self.initial.len() != n {
            out.push(Violation::Shape {
                what: "initial",
                expected: format!("{n}"),
                found: format!("{}", self.initial.len()),
            });
        }
        if !out.is_empty() {
            return out;
        }

        check_rows("transition", &self.transition, &mut out);
        check_rows("emission", &self.emission, &mut out);
        for (i, row) in self.transition.iter().enumerate() {
            for (j, &a) in row.iter().enumerate() {
                if (j < i || j > i + 1) && a != 0.0 {
                    out.push(Violation::NotLeftRight { row: i, col: j, value: a });
                }
            }
        }
        for (i, &p) in self.initial.iter().enumerate() {
            if !p.is_finite() {
                out.push(Violation::NonFinite {
                    matrix: "initial",
                    row: 0,
                    col: i,
                });
            } else if !(0.0..=1.0).contains(&p) {
                out.push(Violation::OutOfRange {
                    matrix: "initial",
                    row: 0,
                    col: i,
                    value: p,
                });
            }
        }
        let sum: f64 = self.initial.iter().sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            out.push(Violation::InitialSum { sum });
        }
        out
    }

    /// [`validate`](Self::validate) folded into a `Result`.
    pub fn check(&self) -> Result<()> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            let joined: Vec<String> = violations.iter().map(ToString::to_string).collect();
            Err(Error::validation(joined.join("; ")))
        }
    }

    fn check_symbols(&self, observations: &[Symbol]) -> Result<()> {
        if observations.is_empty() {
            return Err(Error::invalid("observation sequence is empty"));
        }
        if let Some((t, &o)) = observations.iter().enumerate().find(|(_, &o)| o >= self.n_symbols) {
            return Err(Error::invalid(format!(
                "symbol {o} at position {t} is outside the alphabet 0..{}",
                self.n_symbols
            )));
        }
        Ok(())
    }

    /// Natural-log likelihood `ln P(observations | model)` via the scaled
    /// forward procedure. Returns negative infinity for impossible sequences.
    pub fn log_likelihood(&self, observations: &[Symbol]) -> Result<f64> {
        self.check_symbols(observations)?;
        let mut alpha = vec![0.0; self.n_states];
        let mut next = vec![0.0; self.n_states];
        Ok(self.forward_scaled(observations, &mut alpha, &mut next))
    }

    /// Forward pass that keeps only the current column. Symbols must already
    /// be in range.
    fn forward_scaled(&self, obs: &[Symbol], alpha: &mut [f64], next: &mut [f64]) -> f64 {
        let n = self.n_states;
        for i in 0..n {
            alpha[i] = self.initial[i] * self.emission[i][obs[0]];
        }
        let mut log_likelihood = 0.0;
        let scale: f64 = alpha.iter().sum();
        if scale <= 0.0 {
            return f64::NEG_INFINITY;
        }
        alpha.iter_mut().for_each(|a| *a /= scale);
        log_likelihood += scale.ln();

        for &o in &obs[1..] {
            for j in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += alpha[i] * self.transition[i][j];
                }
                next[j] = acc * self.emission[j][o];
            }
            let scale: f64 = next.iter().sum();
            if scale <= 0.0 {
                return f64::NEG_INFINITY;
            }
            for j in 0..n {
                alpha[j] = next[j] / scale;
            }
            log_likelihood += scale.ln();
        }
        log_likelihood
    }

    /// Multi-sequence Baum-Welch. Expected counts are accumulated over the
    /// whole corpus before each M-step. Emission rows are re-estimated under
    /// the lower bound `options.emission_floor`, and rows belonging to states
    /// that receive no expected occupancy are left unchanged.
    pub fn baum_welch<S: AsRef<[Symbol]>>(
        &self,
        sequences: &[S],
        options: &TrainOptions,
    ) -> Result<(DiscreteHmm, TrainingReport)> {
        if sequences.is_empty() {
            return Err(Error::invalid("training corpus is empty"));
        }
        if options.max_iterations == 0 || !(options.tolerance > 0.0) {
            return Err(Error::invalid(
                "max_iterations must be positive and tolerance must be a positive real",
            ));
        }
        if options.emission_floor < 0.0 || options.emission_floor * self.n_symbols as f64 > 1.0 {
            return Err(Error::invalid(format!(
                "emission floor {} is infeasible for {} symbols",
                options.emission_floor, self.n_symbols
            )));
        }
        self.check()?;
        for seq in sequences {
            self.check_symbols(seq.as_ref())?;
        }

        let mut model = self.clone();
        // Start inside the floored parameter set so every later step is a
        // constrained EM step and the likelihood cannot drop.
        for row in &mut model.emission {
            if row.iter().any(|&p| p < options.emission_floor) {
                let counts = row.clone();
                *row = floored_distribution(&counts, options.emission_floor);
            }
        }

        let mut stats = SufficientStats::new(model.n_states, model.n_symbols);
        let mut log_likelihood = stats.accumulate(&model, sequences);
        if !log_likelihood.is_finite() {
            return Err(Error::invalid(
                "a training sequence has zero probability under the initial model",
            ));
        }
        let mut history = vec![log_likelihood];
        let mut iterations_run = 0;
        let mut converged = false;

        while iterations_run < options.max_iterations {
            let candidate = stats.maximize(&model, options.emission_floor);
            let candidate_ll = stats.accumulate(&candidate, sequences);
            iterations_run += 1;
            history.push(candidate_ll);
            model = candidate;
            if candidate_ll - log_likelihood < options.tolerance {
                converged = true;
                break;
            }
            log_likelihood = candidate_ll;
        }

        Ok((
            model,
            TrainingReport {
                log_likelihood_history: history,
                iterations_run,
                converged,
            },
        ))
    }
}

fn shape_of(rows: &[Vec<f64>]) -> String {
    match rows.first() {
        None => "0x0".into(),
        Some(first) if rows.iter().all(|r| r.len() == first.len()) => {
            format!("{}x{}", rows.len(), first.len())
        }
        Some(_) => format!("{} ragged rows", rows.len()),
    }
}

fn check_rows(matrix: &'static str, rows: &[Vec<f64>], out: &mut Vec<Violation>) {
    for (i, row) in rows.iter().enumerate() {
        let mut finite = true;
        for (j, &p) in row.iter().enumerate() {
            if !p.is_finite() {
                finite = false;
                out.push(Violation::NonFinite { matrix, row: i, col: j });
            } else if !(0.0..=1.0).contains(&p) {
                out.push(Violation::OutOfRange {
                    matrix,
                    row: i,
                    col: j,
                    value: p,
                });
            }
        }
        let sum: f64 = row.iter().sum();
        if finite && (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
            out.push(Violation::RowSum { matrix, row: i, sum });
        }
    }
}

/// Maximizes `sum_k counts[k] * ln p[k]` over distributions with every
/// `p[k] >= floor`. Entries whose unconstrained share falls under the floor
/// are pinned to it and the remaining mass is shared in proportion to counts.
pub(crate) fn floored_distribution(counts: &[f64], floor: f64) -> Vec<f64> {
    let m = counts.len();
    let mut pinned = vec![false; m];
    loop {
        let free_mass: f64 = counts
            .iter()
            .zip(&pinned)
            .filter(|(_, &p)| !p)
            .map(|(&c, _)| c)
            .sum();
        let n_pinned = pinned.iter().filter(|&&p| p).count();
        let budget = 1.0 - n_pinned as f64 * floor;
        if free_mass <= 0.0 {
            // Nothing left to share: spread the budget evenly over free slots.
            let n_free = m - n_pinned;
            return pinned
                .iter()
                .map(|&p| if p { floor } else { budget / n_free as f64 })
                .collect();
        }
        let lambda = free_mass / budget;
        let mut changed = false;
        for k in 0..m {
            if !pinned[k] && counts[k] / lambda < floor {
                pinned[k] = true;
                changed = true;
            }
        }
        if !changed {
            let mut dist: Vec<f64> = counts
                .iter()
                .zip(&pinned)
                .map(|(&c, &p)| if p { floor } else { c / lambda })
                .collect();
            let total: f64 = dist.iter().sum();
            dist.iter_mut().for_each(|p| *p /= total);
            return dist;
        }
    }
}

/// Expected transition and emission counts accumulated over a corpus.
struct SufficientStats {
    transition: Vec<Vec<f64>>,
    emission: Vec<Vec<f64>>,
    // Scratch buffers reused across sequences.
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    scale: Vec<f64>,
}

impl SufficientStats {
    fn new(n: usize, m: usize) -> Self {
        SufficientStats {
            transition: vec![vec![0.0; n]; n],
            emission: vec![vec![0.0; m]; n],
            alpha: Vec::new(),
            beta: Vec::new(),
            scale: Vec::new(),
        }
    }

    /// E-step over every sequence; returns the total log-likelihood.
    fn accumulate<S: AsRef<[Symbol]>>(&mut self, model: &DiscreteHmm, sequences: &[S]) -> f64 {
        self.transition.iter_mut().for_each(|r| r.fill(0.0));
        self.emission.iter_mut().for_each(|r| r.fill(0.0));
        let mut total = 0.0;
        for seq in sequences {
            let ll = self.accumulate_one(model, seq.as_ref());
            total += ll;
            if !ll.is_finite() {
                return f64::NEG_INFINITY;
            }
        }
        total
    }

    fn accumulate_one(&mut self, model: &DiscreteHmm, obs: &[Symbol]) -> f64 {
        let n = model.n_states;
        let len = obs.len();
        if self.alpha.len() < len {
            self.alpha.resize(len, vec![0.0; n]);
            self.beta.resize(len, vec![0.0; n]);
            self.scale.resize(len, 0.0);
        }
        let a = &model.transition;
        let b = &model.emission;

        let mut ll = 0.0;
        for t in 0..len {
            for j in 0..n {
                let prior = if t == 0 {
                    model.initial[j]
                } else {
                    let prev = &self.alpha[t - 1];
                    (0..n).map(|i| prev[i] * a[i][j]).sum()
                };
                self.alpha[t][j] = prior * b[j][obs[t]];
            }
            let c: f64 = self.alpha[t].iter().sum();
            if c <= 0.0 {
                return f64::NEG_INFINITY;
            }
            self.alpha[t].iter_mut().for_each(|x| *x /= c);
            self.scale[t] = c;
            ll += c.ln();
        }

        self.beta[len - 1].fill(1.0);
        for t in (0..len - 1).rev() {
            let c = self.scale[t + 1];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += a[i][j] * b[j][obs[t + 1]] * self.beta[t + 1][j];
                }
                self.beta[t][i] = acc / c;
            }
        }

        for t in 0..len {
            for i in 0..n {
                // With this scaling, alpha * beta is already the state posterior.
                self.emission[i][obs[t]] += self.alpha[t][i] * self.beta[t][i];
            }
            if t + 1 < len {
                let c = self.scale[t + 1];
                for i in 0..n {
                    let ai = self.alpha[t][i];
                    if ai == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        if a[i][j] == 0.0 {
                            continue;
                        }
                        self.transition[i][j] +=
                            ai * a[i][j] * b[j][obs[t + 1]] * self.beta[t + 1][j] / c;
                    }
                }
            }
        }
        ll
    }

    /// M-step. Structural zeros stay exactly zero because their expected
    /// counts are never touched.
    fn maximize(&self, current: &DiscreteHmm, floor: f64) -> DiscreteHmm {
        let mut next = current.clone();
        for (i, counts) in self.transition.iter().enumerate() {
            let total: f64 = counts.iter().sum();
            if total > 0.0 {
                next.transition[i] = counts.iter().map(|&c| c / total).collect();
            }
        }
        for (i, counts) in self.emission.iter().enumerate() {
            if counts.iter().sum::<f64>() > 0.0 {
                next.emission[i] = floored_distribution(counts, floor);
            }
        }
        next
    }
}
