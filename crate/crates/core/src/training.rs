//! Three-phase training: codebook, simple-gesture layer (with an `(N, M)`
//! grid search over K-Means sessions) and the complex-gesture layer with its
//! rejection thresholds.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cascade::{decide_simple, select_complex, CascadeModel, DEFAULT_RUNTIME_TAU_NOD, DEFAULT_RUNTIME_TAU_SHAKE};
use crate::error::{Error, Result};
use crate::eval::{ConfusionMatrix, MacroMetrics};
use crate::gesture::{Dataset, GestureLabel, LabeledGesture};
use crate::hmm::{DiscreteHmm, Symbol, TrainOptions};
use crate::seeds;
use crate::vq::{kmeans_fit, Codebook, KMeansOptions};

/// Symbols per simple-layer window (the runtime buffer length).
pub const DEFAULT_WINDOW_LEN: usize = 10;
/// Meta-symbols per complex-layer sequence (the runtime queue length).
pub const DEFAULT_QUEUE_LEN: usize = 10;
/// A symbol counts as "head at rest" when it makes up more than this share of
/// the idle training recordings.
pub const DEFAULT_IDLE_FRACTION: f64 = 0.1;
pub const COMPLEX_STATES: usize = 3;
/// Alphabet size of the complex-layer HMMs: rest, one direction, the other.
pub const COMPLEX_SYMBOLS: usize = 3;

/// Items of one dataset divided per label into two halves.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Dataset,
    pub test: Dataset,
}

/// Splits every label's items half/half with a seeded shuffle; the training
/// half gets the extra item when a label has an odd count.
pub fn split_half(dataset: &Dataset, seed: u64) -> Result<DatasetSplit> {
    let mut train = Dataset {
        items: Vec::new(),
        provenance: format!("train half of: {}", dataset.provenance),
    };
    let mut test = Dataset {
        items: Vec::new(),
        provenance: format!("test half of: {}", dataset.provenance),
    };
    for label in GestureLabel::ALL {
        let mut items: Vec<&LabeledGesture> = dataset.with_label(label).collect();
        if items.is_empty() {
            continue;
        }
        if items.len() < 2 {
            return Err(Error::validation(format!(
                "label {label} has {} item(s); at least 2 are needed to split",
                items.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seeds::derive(seed, &[0x5911, label.value() as u64]));
        items.shuffle(&mut rng);
        let n_train = items.len().div_ceil(2);
        train.items.extend(items[..n_train].iter().map(|&g| g.clone()));
        test.items.extend(items[n_train..].iter().map(|&g| g.clone()));
    }
    Ok(DatasetSplit { train, test })
}

/// Symbols that make up more than `min_fraction` of the quantized idle
/// recordings in `dataset`.
pub fn idle_symbols(dataset: &Dataset, codebook: &Codebook, min_fraction: f64) -> Result<BTreeSet<Symbol>> {
    let mut counts = vec![0usize; codebook.k()];
    let mut total = 0usize;
    for g in dataset.with_label(GestureLabel::BeingIdle) {
        for s in codebook.quantize_all(g.motion.vectors())? {
            counts[s] += 1;
            total += 1;
        }
    }
    if total == 0 {
        return Ok(BTreeSet::new());
    }
    Ok(counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c as f64 / total as f64 > min_fraction)
        .map(|(s, _)| s)
        .collect())
}

/// Consecutive windows cut from one recording.
pub type ItemWindows = Vec<Vec<Symbol>>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WindowSet {
    /// Per label, the windows of each recording in order.
    pub by_label: BTreeMap<GestureLabel, Vec<ItemWindows>>,
}

impl WindowSet {
    /// All windows of one label, flattened across recordings.
    pub fn windows(&self, label: GestureLabel) -> Vec<&[Symbol]> {
        self.by_label
            .get(&label)
            .map(|items| items.iter().flatten().map(Vec::as_slice).collect())
            .unwrap_or_default()
    }

    pub fn total_windows(&self) -> usize {
        self.by_label.values().flatten().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreparedWindows {
    pub train: WindowSet,
    pub test: WindowSet,
    /// Complex recordings cut without idle stripping, as the live stream
    /// presents them.
    pub complex_train: WindowSet,
    pub complex_test: WindowSet,
    /// Recordings that lost every symbol to idle stripping.
    pub emptied: usize,
}

/// Quantizes one recording, drops rest symbols unless it is an idle
/// recording, and cuts it into non-overlapping windows. A trailing partial
/// window is discarded. Returns `None` when stripping empties the recording.
pub fn recording_windows(
    gesture: &LabeledGesture,
    codebook: &Codebook,
    window_len: usize,
    idle_symbols: &BTreeSet<Symbol>,
) -> Result<Option<ItemWindows>> {
    let mut symbols = codebook.quantize_all(gesture.motion.vectors())?;
    if gesture.label != GestureLabel::BeingIdle {
        symbols.retain(|s| !idle_symbols.contains(s));
    }
    if symbols.is_empty() {
        return Ok(None);
    }
    Ok(Some(symbols.chunks_exact(window_len).map(<[Symbol]>::to_vec).collect()))
}

fn window_set(
    dataset: &Dataset,
    codebook: &Codebook,
    window_len: usize,
    idle_symbols: &BTreeSet<Symbol>,
    emptied: &mut usize,
) -> Result<WindowSet> {
    let mut set = WindowSet::default();
    for g in &dataset.items {
        match recording_windows(g, codebook, window_len, idle_symbols)? {
            Some(w) => set.by_label.entry(g.label).or_default().push(w),
            None => *emptied += 1,
        }
    }
    Ok(set)
}

/// Splits the dataset half/half per label and turns both halves into
/// symbol windows.
pub fn prepare_windows(
    dataset: &Dataset,
    codebook: &Codebook,
    window_len: usize,
    idle_symbols: &BTreeSet<Symbol>,
    seed: u64,
) -> Result<PreparedWindows> {
    if window_len == 0 {
        return Err(Error::invalid("window length must be positive"));
    }
    let split = split_half(dataset, seed)?;
    let mut emptied = 0;
    let train = window_set(&split.train, codebook, window_len, idle_symbols, &mut emptied)?;
    let test = window_set(&split.test, codebook, window_len, idle_symbols, &mut emptied)?;
    let keep_all = BTreeSet::new();
    let complex_only = |d: &Dataset| Dataset {
        items: d.items.iter().filter(|g| g.label.is_complex()).cloned().collect(),
        provenance: String::new(),
    };
    let complex_train = window_set(&complex_only(&split.train), codebook, window_len, &keep_all, &mut emptied)?;
    let complex_test = window_set(&complex_only(&split.test), codebook, window_len, &keep_all, &mut emptied)?;
    Ok(PreparedWindows {
        train,
        test,
        complex_train,
        complex_test,
        emptied,
    })
}

/// The seven simple-gesture HMMs, indexed by label 1..=7.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleLayer {
    pub models: Vec<DiscreteHmm>,
    pub window_len: usize,
}

/// Argmax over seven simple scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleDecision {
    pub label: GestureLabel,
    pub scores: [f64; 7],
}

/// Index of the largest score; the first index wins ties and an all
/// `-inf` vector maps to index 0.
pub(crate) fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

impl SimpleLayer {
    pub fn n_states(&self) -> usize {
        self.models[0].n_states
    }

    pub fn n_symbols(&self) -> usize {
        self.models[0].n_symbols
    }

    /// Scores a window against all seven models. Length is not checked.
    pub fn decide(&self, window: &[Symbol]) -> Result<SimpleDecision> {
        decide_simple(&self.models, window)
    }

    /// Label with the highest forward log-likelihood (lowest label on ties)
    /// together with the full score vector.
    pub fn classify(&self, window: &[Symbol]) -> Result<SimpleDecision> {
        if window.len() != self.window_len {
            return Err(Error::invalid(format!(
                "window has {} symbols, expected {}",
                window.len(),
                self.window_len
            )));
        }
        self.decide(window)
    }

    pub fn check(&self) -> Result<()> {
        if self.models.len() != 7 {
            return Err(Error::validation(format!(
                "simple layer needs 7 models, found {}",
                self.models.len()
            )));
        }
        if self.window_len == 0 {
            return Err(Error::validation("simple layer window length must be positive"));
        }
        let m = self.models[0].n_symbols;
        for (i, hmm) in self.models.iter().enumerate() {
            hmm.check()
                .map_err(|e| Error::validation(format!("simple_models[{i}]: {e}")))?;
            if hmm.n_symbols != m {
                return Err(Error::validation(format!(
                    "simple_models[{i}] has {} symbols, expected {m}",
                    hmm.n_symbols
                )));
            }
        }
        Ok(())
    }

    /// Confusion matrix of this layer over every window of the simple labels.
    pub fn confusion(&self, windows: &WindowSet) -> Result<ConfusionMatrix> {
        let mut m = ConfusionMatrix::empty(&GestureLabel::SIMPLE);
        for label in GestureLabel::SIMPLE {
            for w in windows.windows(label) {
                m.add(label, Some(self.classify(w)?.label))?;
            }
        }
        Ok(m)
    }
}

/// Trains one left-right HMM per simple label on that label's windows.
pub fn train_simple_layer(
    train: &WindowSet,
    n_states: usize,
    n_symbols: usize,
    window_len: usize,
    seed: u64,
    options: &TrainOptions,
) -> Result<SimpleLayer> {
    if n_states < 2 || n_symbols < 7 {
        return Err(Error::invalid(format!(
            "simple layer needs N >= 2 and M >= 7 (got N={n_states}, M={n_symbols})"
        )));
    }
    let models = GestureLabel::SIMPLE
        .iter()
        .map(|&label| {
            let windows = train.windows(label);
            if windows.is_empty() {
                return Err(Error::validation(format!("no training windows for {label}")));
            }
            let init = DiscreteHmm::left_right(
                n_states,
                n_symbols,
                seeds::derive(seed, &[0x51, label.value() as u64]),
            )?;
            Ok(init.baum_welch(&windows, options)?.0)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimpleLayer { models, window_len })
}

#[derive(Debug, Clone)]
pub struct GridConfig {
    pub n_range: (usize, usize),
    pub m_range: (usize, usize),
    pub sessions: usize,
    pub seed: u64,
    pub window_len: usize,
    pub idle_fraction: f64,
    pub kmeans: KMeansOptions,
    pub baum_welch: TrainOptions,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n_range: (2, 6),
            m_range: (7, 25),
            sessions: 5,
            seed: 0,
            window_len: DEFAULT_WINDOW_LEN,
            idle_fraction: DEFAULT_IDLE_FRACTION,
            kmeans: KMeansOptions::default(),
            baum_welch: TrainOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridCell {
    pub session: usize,
    pub n_states: usize,
    pub n_symbols: usize,
    pub average_accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// Idle stripping left some simple label without training windows, so
    /// no layer was trained; the metrics are zero.
    pub skipped: bool,
}

/// Everything needed to reuse the winning grid cell downstream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSimpleLayer {
    pub session: usize,
    pub codebook: Codebook,
    pub idle_symbols: BTreeSet<Symbol>,
    pub layer: SimpleLayer,
    pub windows: PreparedWindows,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    /// One entry per `(session, N, M)`, ordered by session, then M, then N.
    pub cells: Vec<GridCell>,
    pub best: GridCell,
    pub best_model: TrainedSimpleLayer,
}

impl GridSearchResult {
    pub fn skipped_cells(&self) -> usize {
        self.cells.iter().filter(|c| c.skipped).count()
    }

    pub fn best_accuracy(&self) -> f64 {
        self.best.average_accuracy
    }

    /// `N,M,session,average_accuracy`
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<report>", e);
        writeln!(out, "N,M,session,average_accuracy").map_err(io)?;
        for c in &self.cells {
            if c.skipped {
                writeln!(out, "{},{},{},", c.n_states, c.n_symbols, c.session).map_err(io)?;
            } else {
                writeln!(out, "{},{},{},{:.6}", c.n_states, c.n_symbols, c.session, c.average_accuracy).map_err(io)?;
            }
        }
        Ok(())
    }
}

/// Orders cells by accuracy, preferring fewer symbols, then fewer states,
/// then the earlier session when accuracies agree within 1e-12.
fn better(a: &GridCell, b: &GridCell) -> bool {
    if a.skipped != b.skipped {
        return b.skipped;
    }
    if (a.average_accuracy - b.average_accuracy).abs() > 1e-12 {
        return a.average_accuracy > b.average_accuracy;
    }
    (a.n_symbols, a.n_states, a.session) < (b.n_symbols, b.n_states, b.session)
}

/// Picks the best cell of a table by [`better`]'s ordering.
pub fn select_best(cells: &[GridCell]) -> Option<GridCell> {
    cells
        .iter()
        .copied()
        .reduce(|best, c| if better(&c, &best) { c } else { best })
}

/// Runs every session and `(N, M)` cell. Each session refits the codebook
/// for every M with its own seed; the dataset split is shared by all cells.
pub fn grid_search(dataset: &Dataset, config: &GridConfig) -> Result<GridSearchResult> {
    let (n_lo, n_hi) = config.n_range;
    let (m_lo, m_hi) = config.m_range;
    if n_lo < 2 || m_lo < 7 || n_hi < n_lo || m_hi < m_lo {
        return Err(Error::invalid(format!(
            "grid ranges N=[{n_lo},{n_hi}], M=[{m_lo},{m_hi}] must satisfy 2 <= N, 7 <= M and lo <= hi"
        )));
    }
    if config.sessions == 0 {
        return Err(Error::invalid("at least one session is required"));
    }
    let split_seed = seeds::derive(config.seed, &[0x5e55]);
    let split = split_half(dataset, split_seed)?;
    let vectors = dataset.all_vectors();

    let jobs: Vec<(usize, usize)> = (0..config.sessions)
        .flat_map(|s| (m_lo..=m_hi).map(move |m| (s, m)))
        .collect();

    let per_codebook: Vec<(Vec<GridCell>, Option<TrainedSimpleLayer>)> = jobs
        .par_iter()
        .map(|&(session, m)| -> Result<_> {
            let codebook = kmeans_fit(
                &vectors,
                m,
                seeds::derive(config.seed, &[0xc0de, session as u64, m as u64]),
                &config.kmeans,
            )?;
            let idle = idle_symbols(&split.train, &codebook, config.idle_fraction)?;
            let windows = prepare_windows(dataset, &codebook, config.window_len, &idle, split_seed)?;
            if GestureLabel::SIMPLE.iter().any(|&l| windows.train.windows(l).is_empty()) {
                let cells = (n_lo..=n_hi)
                    .map(|n| GridCell {
                        session,
                        n_states: n,
                        n_symbols: m,
                        average_accuracy: 0.0,
                        precision: 0.0,
                        recall: 0.0,
                        skipped: true,
                    })
                    .collect();
                return Ok((cells, None));
            }
            let trained: Vec<(GridCell, SimpleLayer)> = (n_lo..=n_hi)
                .into_par_iter()
                .map(|n| -> Result<_> {
                    let layer = train_simple_layer(
                        &windows.train,
                        n,
                        m,
                        config.window_len,
                        seeds::derive(config.seed, &[0x7a1, session as u64, m as u64, n as u64]),
                        &config.baum_welch,
                    )?;
                    let metrics = layer.confusion(&windows.test)?.macro_metrics()?;
                    Ok((
                        GridCell {
                            session,
                            n_states: n,
                            n_symbols: m,
                            average_accuracy: metrics.average_accuracy,
                            precision: metrics.precision,
                            recall: metrics.recall,
                            skipped: false,
                        },
                        layer,
                    ))
                })
                .collect::<Result<_>>()?;
            let cells: Vec<GridCell> = trained.iter().map(|(c, _)| *c).collect();
            let local_best = select_best(&cells).expect("non-empty N range");
            let layer = trained
                .into_iter()
                .find(|(c, _)| *c == local_best)
                .map(|(_, l)| l)
                .expect("best cell came from this batch");
            Ok((
                cells,
                Some(TrainedSimpleLayer {
                    session,
                    codebook,
                    idle_symbols: idle,
                    layer,
                    windows,
                }),
            ))
        })
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    let mut best: Option<(GridCell, TrainedSimpleLayer)> = None;
    for (batch, trained) in per_codebook {
        let local = select_best(&batch).expect("non-empty batch");
        cells.extend(batch);
        if let Some(trained) = trained {
            if best.as_ref().is_none_or(|(b, _)| better(&local, b)) {
                best = Some((local, trained));
            }
        }
    }
    let (best, best_model) =
        best.ok_or_else(|| Error::validation("idle stripping left a simple label without windows in every cell"))?;
    Ok(GridSearchResult {
        cells,
        best,
        best_model,
    })
}

/// Maps simple labels into one complex model's three-symbol alphabet:
/// 0 = rest (and anything off the model's axis), 1 and 2 = the two
/// directions of its axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComplexAlphabet {
    pub first: GestureLabel,
    pub second: GestureLabel,
}

impl ComplexAlphabet {
    pub const SHAKE: ComplexAlphabet = ComplexAlphabet {
        first: GestureLabel::RotatingLeft,
        second: GestureLabel::RotatingRight,
    };
    pub const NOD: ComplexAlphabet = ComplexAlphabet {
        first: GestureLabel::TiltingUpward,
        second: GestureLabel::TiltingDownward,
    };

    pub fn symbol(self, label: GestureLabel) -> Symbol {
        if label == self.first {
            1
        } else if label == self.second {
            2
        } else {
            0
        }
    }

    pub fn encode(self, meta: &[GestureLabel]) -> Vec<Symbol> {
        meta.iter().map(|&l| self.symbol(l)).collect()
    }
}

/// Whether a simple label is pushed into the complex layer's queue.
pub fn is_queued(label: GestureLabel) -> bool {
    matches!(
        label,
        GestureLabel::BeingIdle
            | GestureLabel::RotatingLeft
            | GestureLabel::RotatingRight
            | GestureLabel::TiltingUpward
            | GestureLabel::TiltingDownward
    )
}

/// `lambda_8`, `lambda_9` and their calibrated thresholds.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ComplexCalibration {
    pub shake_hmm: DiscreteHmm,
    pub nod_hmm: DiscreteHmm,
    pub tau_shake: f64,
    pub tau_nod: f64,
}

impl ComplexCalibration {
    /// `(ln P(S | shake), ln P(S | nod))` for a meta-symbol sequence.
    pub fn scores(&self, meta: &[GestureLabel]) -> Result<[f64; 2]> {
        Ok([
            self.shake_hmm.log_likelihood(&ComplexAlphabet::SHAKE.encode(meta))?,
            self.nod_hmm.log_likelihood(&ComplexAlphabet::NOD.encode(meta))?,
        ])
    }

    /// Shaking, Nodding, or `None` (rejected) when neither score clears its
    /// threshold.
    pub fn classify(&self, meta: &[GestureLabel]) -> Result<Option<GestureLabel>> {
        if meta.is_empty() {
            return Err(Error::invalid("empty meta-sequence"));
        }
        Ok(select_complex(&self.scores(meta)?, self.tau_shake, self.tau_nod))
    }

    pub fn check(&self) -> Result<()> {
        for (name, hmm) in [("shake_hmm", &self.shake_hmm), ("nod_hmm", &self.nod_hmm)] {
            hmm.check().map_err(|e| Error::validation(format!("{name}: {e}")))?;
            if hmm.n_symbols != COMPLEX_SYMBOLS {
                return Err(Error::validation(format!(
                    "{name} has {} symbols, expected {COMPLEX_SYMBOLS}",
                    hmm.n_symbols
                )));
            }
        }
        for (name, tau) in [("tau_shake", self.tau_shake), ("tau_nod", self.tau_nod)] {
            if !(tau.is_finite() && tau <= 0.0) {
                return Err(Error::validation(format!("{name} = {tau} must be finite and <= 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexConfig {
    pub n_states: usize,
    pub seed: u64,
    pub baum_welch: TrainOptions,
}

impl Default for ComplexConfig {
    fn default() -> Self {
        ComplexConfig {
            n_states: COMPLEX_STATES,
            seed: 0,
            baum_welch: TrainOptions::default(),
        }
    }
}

/// Simple-layer labels of a recording's windows, keeping only those that
/// enter the complex queue.
pub fn meta_sequence(layer: &SimpleLayer, windows: &[Vec<Symbol>]) -> Result<Vec<GestureLabel>> {
    let mut meta = Vec::with_capacity(windows.len());
    for w in windows {
        let label = layer.classify(w)?.label;
        if is_queued(label) {
            meta.push(label);
        }
    }
    Ok(meta)
}

/// One meta-sequence per complex recording, per label. Recordings with no
/// queued windows are skipped.
pub fn complex_sequences(
    layer: &SimpleLayer,
    windows: &WindowSet,
) -> Result<BTreeMap<GestureLabel, Vec<Vec<GestureLabel>>>> {
    let mut out = BTreeMap::new();
    for label in GestureLabel::COMPLEX {
        let mut seqs = Vec::new();
        for item in windows.by_label.get(&label).into_iter().flatten() {
            let meta = meta_sequence(layer, item)?;
            if !meta.is_empty() {
                seqs.push(meta);
            }
        }
        out.insert(label, seqs);
    }
    Ok(out)
}

/// Trains `lambda_8` on shaking and `lambda_9` on nodding meta-sequences and
/// sets each threshold to the lowest score among its own training sequences.
pub fn calibrate_complex_layer(
    layer: &SimpleLayer,
    train: &WindowSet,
    config: &ComplexConfig,
) -> Result<ComplexCalibration> {
    let seqs = complex_sequences(layer, train)?;
    let mut trained = Vec::with_capacity(2);
    for (label, alphabet) in [
        (GestureLabel::Shaking, ComplexAlphabet::SHAKE),
        (GestureLabel::Nodding, ComplexAlphabet::NOD),
    ] {
        let sequences: Vec<Vec<Symbol>> = seqs[&label].iter().map(|s| alphabet.encode(s)).collect();
        if sequences.is_empty() {
            return Err(Error::validation(format!("no training sequences for {label}")));
        }
        let init = DiscreteHmm::left_right(
            config.n_states,
            COMPLEX_SYMBOLS,
            seeds::derive(config.seed, &[0xc0, label.value() as u64]),
        )?;
        let (hmm, _) = init.baum_welch(&sequences, &config.baum_welch)?;
        let tau = sequences
            .iter()
            .map(|s| hmm.log_likelihood(s))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        trained.push((hmm, tau));
    }
    let (nod_hmm, tau_nod) = trained.pop().expect("two models");
    let (shake_hmm, tau_shake) = trained.pop().expect("two models");
    let calib = ComplexCalibration {
        shake_hmm,
        nod_hmm,
        tau_shake,
        tau_nod,
    };
    calib.check()?;
    Ok(calib)
}

/// Confusion of the complex layer over meta-sequences, with rejections.
pub fn complex_confusion(
    calib: &ComplexCalibration,
    sequences: &BTreeMap<GestureLabel, Vec<Vec<GestureLabel>>>,
) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::empty(&GestureLabel::COMPLEX);
    for (&label, seqs) in sequences {
        for s in seqs {
            m.add(label, calib.classify(s)?)?;
        }
    }
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub grid: GridConfig,
    pub complex: ComplexConfig,
    pub queue_len: usize,
    pub runtime_tau_shake: f64,
    pub runtime_tau_nod: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            grid: GridConfig::default(),
            complex: ComplexConfig::default(),
            queue_len: DEFAULT_QUEUE_LEN,
            runtime_tau_shake: DEFAULT_RUNTIME_TAU_SHAKE,
            runtime_tau_nod: DEFAULT_RUNTIME_TAU_NOD,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.grid.seed = seed;
        self.complex.seed = seeds::derive(seed, &[0xc011]);
        self
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: CascadeModel,
    pub grid: GridSearchResult,
    pub simple_test: MacroMetrics,
    pub complex_test: MacroMetrics,
    pub complex_confusion: ConfusionMatrix,
}

impl TrainOutcome {
    pub fn write_summary<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e| Error::io("<summary>", e);
        let b = &self.grid.best;
        writeln!(
            out,
            "best simple layer: N={} M={} session={} average_accuracy={:.4} precision={:.4} recall={:.4}",
            b.n_states, b.n_symbols, b.session, b.average_accuracy, b.precision, b.recall
        )
        .map_err(io)?;
        writeln!(
            out,
            "complex layer: average_accuracy={:.4} precision={:.4} recall={:.4}",
            self.complex_test.average_accuracy, self.complex_test.precision, self.complex_test.recall
        )
        .map_err(io)?;
        let c = &self.model.complex;
        writeln!(
            out,
            "calibrated thresholds: tau_shake={:.4} tau_nod={:.4}; runtime thresholds: tau_shake={} tau_nod={}",
            c.tau_shake, c.tau_nod, self.model.runtime_tau_shake, self.model.runtime_tau_nod
        )
        .map_err(io)?;
        Ok(())
    }
}

/// Full pipeline: grid search for the simple layer, complex-layer
/// calibration on the winning cell, held-out evaluation of both layers.
pub fn train_cascade(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    let grid = grid_search(dataset, &config.grid)?;
    let best = &grid.best_model;
    let complex = calibrate_complex_layer(&best.layer, &best.windows.complex_train, &config.complex)?;
    let simple_test = best.layer.confusion(&best.windows.test)?.macro_metrics()?;
    let test_seqs = complex_sequences(&best.layer, &best.windows.complex_test)?;
    let complex_confusion = complex_confusion(&complex, &test_seqs)?;
    let complex_test = complex_confusion.macro_metrics()?;

    let model = CascadeModel::new(
        best.codebook.clone(),
        best.layer.models.clone(),
        complex,
        config.runtime_tau_shake,
        config.runtime_tau_nod,
        config.grid.window_len,
        config.queue_len,
        dataset.sample_rate_hz().unwrap_or(crate::gesture::DEFAULT_SAMPLE_RATE_HZ),
    )?;
    Ok(TrainOutcome {
        model,
        grid,
        simple_test,
        complex_test,
        complex_confusion,
    })
}

/// Confusion matrices of both layers of a trained model on a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineEvaluation {
    /// Per-window simple-layer decisions on idle-stripped simple recordings.
    pub simple: ConfusionMatrix,
    /// Per-recording complex-layer decisions with the calibrated thresholds.
    pub complex: ConfusionMatrix,
}

impl OfflineEvaluation {
    /// The simple report, then a blank line and the complex report. A layer
    /// with no data in the dataset is left out.
    pub fn write_report<W: Write>(&self, mut out: W) -> Result<()> {
        let mut first = true;
        for m in [&self.simple, &self.complex] {
            if m.total() == 0 {
                continue;
            }
            if !first {
                writeln!(out).map_err(|e| Error::io("<report>", e))?;
            }
            m.write_report(&mut out)?;
            first = false;
        }
        Ok(())
    }
}

/// Scores every recording of `dataset` offline. Rest symbols are taken from
/// the dataset's own idle recordings with the training rule.
pub fn evaluate_model(model: &CascadeModel, dataset: &Dataset, idle_fraction: f64) -> Result<OfflineEvaluation> {
    model.check()?;
    let idle = idle_symbols(dataset, &model.codebook, idle_fraction)?;
    let layer = SimpleLayer {
        models: model.simple_models.clone(),
        window_len: model.buffer_len,
    };
    let mut simple = ConfusionMatrix::empty(&GestureLabel::SIMPLE);
    let mut complex = ConfusionMatrix::empty(&GestureLabel::COMPLEX);
    let keep_all = BTreeSet::new();
    for g in &dataset.items {
        if g.label.is_simple() {
            for w in recording_windows(g, &model.codebook, model.buffer_len, &idle)?.unwrap_or_default() {
                simple.add(g.label, Some(layer.classify(&w)?.label))?;
            }
        } else {
            let windows = recording_windows(g, &model.codebook, model.buffer_len, &keep_all)?.unwrap_or_default();
            let meta = meta_sequence(&layer, &windows)?;
            let predicted = if meta.is_empty() { None } else { model.complex.classify(&meta)? };
            complex.add(g.label, predicted)?;
        }
    }
    Ok(OfflineEvaluation { simple, complex })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gesture::{generate_dataset, DatasetSpec};

    fn small_dataset() -> Dataset {
        generate_dataset(&DatasetSpec {
            participants: 4,
            repetitions: 2,
            seed: 21,
            ..DatasetSpec::default()
        })
        .unwrap()
    }

    #[test]
    fn split_is_balanced() {
        let d = small_dataset();
        let s = split_half(&d, 3).unwrap();
        for label in GestureLabel::ALL {
            let a = s.train.with_label(label).count();
            let b = s.test.with_label(label).count();
            assert!(a.abs_diff(b) <= 1);
            assert_eq!(a + b, 8);
        }
    }

    #[test]
    fn split_needs_two_items() {
        let mut d = small_dataset();
        let keep = d.items.iter().position(|g| g.label == GestureLabel::Nodding).unwrap();
        let first = d.items[keep].clone();
        d.items.retain(|g| g.label != GestureLabel::Nodding);
        d.items.push(first);
        assert!(matches!(split_half(&d, 0), Err(Error::Validation(_))));
    }

    #[test]
    fn windows_have_fixed_length_and_count() {
        let d = small_dataset();
        let cb = kmeans_fit(&d.all_vectors(), 9, 1, &KMeansOptions::default()).unwrap();
        let none = BTreeSet::new();
        let prepared = prepare_windows(&d, &cb, 10, &none, 4).unwrap();
        let mut expected = 0;
        for g in &d.items {
            expected += g.motion.len() / 10;
        }
        assert_eq!(prepared.train.total_windows() + prepared.test.total_windows(), expected);
        for set in [&prepared.train, &prepared.test] {
            assert!(set.by_label.values().flatten().flatten().all(|w| w.len() == 10));
        }
    }

    #[test]
    fn idle_recordings_keep_rest_symbols() {
        let d = small_dataset();
        let cb = kmeans_fit(&d.all_vectors(), 9, 1, &KMeansOptions::default()).unwrap();
        let idle = idle_symbols(&d, &cb, DEFAULT_IDLE_FRACTION).unwrap();
        assert!(!idle.is_empty());
        let g = d.with_label(GestureLabel::BeingIdle).next().unwrap();
        let w = recording_windows(g, &cb, 10, &idle).unwrap().unwrap();
        assert_eq!(w.len(), g.motion.len() / 10);
        let rl = d.with_label(GestureLabel::RotatingLeft).next().unwrap();
        let stripped = recording_windows(rl, &cb, 1, &idle).unwrap().unwrap_or_default();
        assert!(stripped.iter().flatten().all(|s| !idle.contains(s)));
    }

    #[test]
    fn degenerate_corpus_concentrates_emission() {
        let mut set = WindowSet::default();
        for label in GestureLabel::SIMPLE {
            let sym = if label == GestureLabel::RotatingLeft { 5 } else { label.value() as usize };
            set.by_label.insert(label, vec![vec![vec![sym; 10]; 4]]);
        }
        let layer = train_simple_layer(&set, 3, 17, 10, 2, &TrainOptions::default()).unwrap();
        for hmm in &layer.models {
            assert!(hmm.validate().is_empty());
        }
        // every state that carries occupancy in the corpus
        let rl = &layer.models[1];
        assert!(rl.emission[0][5] >= 0.99);
        assert_eq!(layer, train_simple_layer(&set, 3, 17, 10, 2, &TrainOptions::default()).unwrap());
        assert_eq!(layer.classify(&[5; 10]).unwrap().label, GestureLabel::RotatingLeft);
    }

    #[test]
    fn identical_models_tie_to_idle() {
        let hmm = DiscreteHmm::left_right(2, 7, 0).unwrap();
        let layer = SimpleLayer {
            models: vec![hmm; 7],
            window_len: 10,
        };
        let d = layer.classify(&[3; 10]).unwrap();
        assert_eq!(d.label, GestureLabel::BeingIdle);
        assert_eq!(d.scores.len(), 7);
        assert!(layer.classify(&[3; 9]).is_err());
    }

    #[test]
    fn simple_layer_rejects_small_grid() {
        let set = WindowSet::default();
        assert!(train_simple_layer(&set, 1, 17, 10, 0, &TrainOptions::default()).is_err());
        assert!(train_simple_layer(&set, 3, 6, 10, 0, &TrainOptions::default()).is_err());
        assert!(matches!(
            train_simple_layer(&set, 3, 7, 10, 0, &TrainOptions::default()),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn tie_break_prefers_small_m_then_n() {
        let cell = |session, n, m, acc| GridCell {
            session,
            n_states: n,
            n_symbols: m,
            average_accuracy: acc,
            precision: 0.0,
            recall: 0.0,
            skipped: false,
        };
        let cells = [cell(0, 4, 12, 0.9), cell(1, 2, 17, 0.9), cell(0, 3, 12, 0.9 + 1e-13), cell(0, 6, 25, 0.8)];
        let best = select_best(&cells).unwrap();
        assert_eq!((best.n_states, best.n_symbols), (3, 12));

        let mut skipped = cell(0, 2, 7, 0.0);
        skipped.skipped = true;
        let best = select_best(&[skipped, cell(0, 2, 8, 0.0)]).unwrap();
        assert_eq!(best.n_symbols, 8);
    }

    #[test]
    fn alphabet_mapping() {
        use GestureLabel::*;
        let meta = [BeingIdle, RotatingLeft, RotatingRight, TiltingUpward, TiltingDownward];
        assert_eq!(ComplexAlphabet::SHAKE.encode(&meta), vec![0, 1, 2, 0, 0]);
        assert_eq!(ComplexAlphabet::NOD.encode(&meta), vec![0, 0, 0, 1, 2]);
    }

    #[test]
    fn empty_meta_sequence_rejected() {
        let hmm = DiscreteHmm::left_right(3, 3, 0).unwrap();
        let calib = ComplexCalibration {
            shake_hmm: hmm.clone(),
            nod_hmm: hmm,
            tau_shake: -6.93,
            tau_nod: -7.54,
        };
        assert!(calib.classify(&[]).is_err());
        assert!(calib.classify(&[GestureLabel::BeingIdle; 9]).is_ok());
    }
}
