//! Trajectory ensembles over initial-condition grids, LCN distributions,
//! entanglement sweeps and occupancy colorplots.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::chaos::{
    classify_trajectory, lcn_series, Classification, ClassifyOptions, TrajectoryClass,
};
use crate::error::{Error, Result};
use crate::model::{make_two_qubit, OscillatorFrequencies, WavefunctionModel};
use crate::trajectory::{
    default_xi0, integrate_streaming, IntegrationControls, RunSummary, TrajectoryRecord,
    TrajectorySink, TrajectoryStatus,
};

/// Environment variable holding the worker count for ensemble runs.
pub const WORKERS_ENV: &str = "BOHMFLOW_WORKERS";
pub const MIN_DISTRIBUTION_SAMPLES: usize = 30;
pub const DEFAULT_BIN_SIZE: f64 = 0.05;
pub const DEFAULT_COLORPLOT_DT: f64 = 0.05;
/// Relative tolerance when matching checkpoint times and grid divisions.
const TIME_MATCH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Cell-centred points of an `n_x × n_y` lattice.
    Grid,
    /// `n_x·n_y` independent uniform draws from a ChaCha stream.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub n_x: usize,
    pub n_y: usize,
    pub sampling: Sampling,
}

impl GridSpec {
    /// Lattice over `[lo, hi]²`.
    pub fn square(lo: f64, hi: f64, n: usize) -> Self {
        Self {
            x_range: [lo, hi],
            y_range: [lo, hi],
            n_x: n,
            n_y: n,
            sampling: Sampling::Grid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("x_range", self.x_range), ("y_range", self.y_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::Validation(format!(
                    "{name} must be a finite interval with lo < hi"
                )));
            }
        }
        if self.n_x == 0 || self.n_y == 0 {
            return Err(Error::Validation("grid counts must be positive".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Initial conditions in row order (x fastest).
    pub fn points(&self) -> Vec<[f64; 2]> {
        let [x0, x1] = self.x_range;
        let [y0, y1] = self.y_range;
        match self.sampling {
            Sampling::Grid => {
                let (hx, hy) = ((x1 - x0) / self.n_x as f64, (y1 - y0) / self.n_y as f64);
                (0..self.n_y)
                    .flat_map(|j| {
                        (0..self.n_x)
                            .map(move |i| [x0 + (i as f64 + 0.5) * hx, y0 + (j as f64 + 0.5) * hy])
                    })
                    .collect()
            }
            Sampling::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..self.len())
                    .map(|_| [rng.gen_range(x0..x1), rng.gen_range(y0..y1)])
                    .collect()
            }
        }
    }
}

/// Worker count from `BOHMFLOW_WORKERS`, if set to a positive integer.
pub fn workers_from_env() -> Option<usize> {
    std::env::var(WORKERS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnsembleOptions {
    pub classify: ClassifyOptions,
    /// Explicit worker count; falls back to the environment, then to all hardware threads.
    pub workers: Option<usize>,
}

fn run_in_pool<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers.or_else(workers_from_env) {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Validation(format!("cannot start worker pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRow {
    pub index: usize,
    pub start: [f64; 2],
    pub status: TrajectoryStatus,
    pub t_reached: f64,
    /// `None` when the integration did not complete.
    pub classification: Option<Classification>,
    /// χ at each checkpoint; `None` past the point where a run stopped.
    pub checkpoint_chi: Vec<Option<f64>>,
}

impl EnsembleRow {
    pub fn class(&self) -> Option<TrajectoryClass> {
        self.classification.map(|c| c.class)
    }

    pub fn final_chi(&self) -> Option<f64> {
        self.checkpoint_chi.last().copied().flatten()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleTable {
    pub model: WavefunctionModel,
    pub grid: GridSpec,
    pub controls: IntegrationControls,
    pub checkpoints: Vec<f64>,
    pub rows: Vec<EnsembleRow>,
}

impl EnsembleTable {
    pub fn checkpoint_index(&self, t: f64) -> Option<usize> {
        self.checkpoints
            .iter()
            .position(|&c| (c - t).abs() <= TIME_MATCH * c.abs().max(1.0))
    }

    pub fn failed(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| !r.status.is_completed())
            .count()
    }

    pub fn failed_fraction(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.failed() as f64 / self.rows.len() as f64
        }
    }

    pub fn count(&self, class: TrajectoryClass) -> usize {
        self.rows
            .iter()
            .filter(|r| r.class() == Some(class))
            .count()
    }

    pub fn fraction(&self, class: TrajectoryClass) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.count(class) as f64 / self.rows.len() as f64
        }
    }

    /// χ of the chaotic rows at checkpoint `idx`, in row order.
    pub fn chaotic_chi(&self, idx: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.class() == Some(TrajectoryClass::Chaotic))
            .filter_map(|r| r.checkpoint_chi.get(idx).copied().flatten())
            .collect()
    }
}

/// Keeps only stretching numbers.
#[derive(Default)]
struct StretchingSink {
    stretching: Vec<f64>,
}

impl TrajectorySink for StretchingSink {
    fn position(&mut self, _index: usize, _t: f64, _position: [f64; 2], _degraded: bool) {}

    fn stretching(&mut self, _index: usize, _t: f64, a: f64, _log_norm: f64) {
        self.stretching.push(a);
    }
}

fn validate_checkpoints(checkpoints: &[f64], controls: &IntegrationControls) -> Result<()> {
    if checkpoints.is_empty() {
        return Err(Error::Validation(
            "at least one checkpoint is required".into(),
        ));
    }
    for w in checkpoints.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Validation(
                "checkpoints must be strictly increasing".into(),
            ));
        }
    }
    for &c in checkpoints {
        if !(c > 0.0 && c <= controls.t_final * (1.0 + TIME_MATCH)) {
            return Err(Error::Validation(format!(
                "checkpoint {c} outside (0, t_final = {}]",
                controls.t_final
            )));
        }
    }
    Ok(())
}

fn run_row(
    model: &WavefunctionModel,
    index: usize,
    start: [f64; 2],
    controls: &IntegrationControls,
    checkpoints: &[f64],
    classify: &ClassifyOptions,
) -> EnsembleRow {
    let mut sink = StretchingSink {
        stretching: Vec::with_capacity(controls.renorm_count()),
    };
    let summary = integrate_streaming(model, start, Some(default_xi0()), controls, &mut sink)
        .unwrap_or_else(|e| RunSummary {
            status: TrajectoryStatus::Aborted {
                t: 0.0,
                reason: e.to_string(),
            },
            stats: Default::default(),
            final_position: start,
            t_reached: 0.0,
        });
    let lcn = lcn_series(&sink.stretching, controls.renorm_dt);
    let covered = lcn.times.last().copied().unwrap_or(0.0);
    let checkpoint_chi = checkpoints
        .iter()
        .map(|&c| {
            if c <= covered * (1.0 + TIME_MATCH) {
                lcn.chi_at(c)
            } else {
                None
            }
        })
        .collect();
    let classification = summary
        .status
        .is_completed()
        .then(|| classify_trajectory(&lcn, classify));
    EnsembleRow {
        index,
        start,
        status: summary.status,
        t_reached: summary.t_reached,
        classification,
        checkpoint_chi,
    }
}

/// Integrates every grid point with deviation tracking. Rows come back in grid
/// order whatever the scheduling; stalled runs keep their row with a status.
pub fn run_ensemble(
    model: &WavefunctionModel,
    grid: &GridSpec,
    controls: &IntegrationControls,
    checkpoints: &[f64],
    opts: &EnsembleOptions,
) -> Result<EnsembleTable> {
    controls.validate()?;
    grid.validate()?;
    validate_checkpoints(checkpoints, controls)?;
    let points = grid.points();
    let rows = run_in_pool(opts.workers, || {
        points
            .par_iter()
            .enumerate()
            .map(|(i, &p)| run_row(model, i, p, controls, checkpoints, &opts.classify))
            .collect::<Vec<_>>()
    })?;
    let done = rows.iter().filter(|r| r.status.is_completed()).count();
    log::info!("ensemble finished: {done}/{} completed", rows.len());
    Ok(EnsembleTable {
        model: *model,
        grid: *grid,
        controls: *controls,
        checkpoints: checkpoints.to_vec(),
        rows,
    })
}

/// Mean, spread and range of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator); 0 for a single value.
    pub std_dev: f64,
    pub standard_error: f64,
    pub min: f64,
    pub max: f64,
}

impl SampleSummary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let std_dev = if n > 1 {
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            n,
            mean,
            std_dev,
            standard_error: std_dev / (n as f64).sqrt(),
            min,
            max,
        })
    }

    /// `max − min`.
    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    /// Fraction of samples per bin; sums to 1.
    pub mass: Vec<f64>,
}

impl Histogram {
    /// Square-root rule for the bin count. A sample with no spread gets one
    /// zero-width bin.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if n == 0 {
            return Self {
                edges: Vec::new(),
                counts: Vec::new(),
                mass: Vec::new(),
            };
        }
        if hi <= lo {
            return Self {
                edges: vec![lo, hi],
                counts: vec![n],
                mass: vec![1.0],
            };
        }
        let bins = ((n as f64).sqrt().ceil() as usize).max(1);
        let width = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
        let mut counts = vec![0usize; bins];
        for &v in values {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
        let mass = counts.iter().map(|&c| c as f64 / n as f64).collect();
        Self {
            edges,
            counts,
            mass,
        }
    }

    /// Probability density in bin `i`.
    pub fn density(&self, i: usize) -> f64 {
        let w = self.edges[i + 1] - self.edges[i];
        if w > 0.0 {
            self.mass[i] / w
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LcnDistribution {
    pub summary: SampleSummary,
    pub histogram: Histogram,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    /// Anderson–Darling A² against a normal law with the sample mean and deviation.
    pub normality_statistic: f64,
    /// Largest gap between the empirical CDF and the fitted normal CDF.
    pub ks_distance: f64,
}

impl LcnDistribution {
    /// Moments are NaN when the sample has no spread.
    pub fn from_samples(values: &[f64]) -> Result<Self> {
        if values.len() < MIN_DISTRIBUTION_SAMPLES {
            return Err(Error::TooFewSamples {
                needed: MIN_DISTRIBUTION_SAMPLES,
                got: values.len(),
            });
        }
        let summary = SampleSummary::of(values).expect("non-empty");
        let n = values.len() as f64;
        let central = |p: i32| {
            values
                .iter()
                .map(|v| (v - summary.mean).powi(p))
                .sum::<f64>()
                / n
        };
        let (m2, m3, m4) = (central(2), central(3), central(4));
        let (skewness, excess_kurtosis) = if m2 > 0.0 {
            (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
        } else {
            (f64::NAN, f64::NAN)
        };
        let (normality_statistic, ks_distance) = normality(values, summary.mean, summary.std_dev);
        Ok(Self {
            summary,
            histogram: Histogram::of(values),
            skewness,
            excess_kurtosis,
            normality_statistic,
            ks_distance,
        })
    }

    pub fn mean(&self) -> f64 {
        self.summary.mean
    }

    pub fn std_dev(&self) -> f64 {
        self.summary.std_dev
    }
}

fn normality(values: &[f64], mean: f64, sd: f64) -> (f64, f64) {
    if !(sd > 0.0) {
        return (f64::NAN, f64::NAN);
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut cdf: Vec<f64> = values
        .iter()
        .map(|v| std_normal.cdf((v - mean) / sd))
        .collect();
    cdf.sort_by(f64::total_cmp);
    let n = cdf.len();
    let nf = n as f64;
    let clamp = |p: f64| p.clamp(1e-300, 1.0 - 1e-16);
    let mut s = 0.0;
    let mut ks: f64 = 0.0;
    for i in 0..n {
        let w = (2 * i + 1) as f64;
        s += w * (clamp(cdf[i]).ln() + (1.0 - clamp(cdf[n - 1 - i])).ln());
        ks = ks
            .max((i + 1) as f64 / nf - cdf[i])
            .max(cdf[i] - i as f64 / nf);
    }
    (-nf - s / nf, ks)
}

/// Distribution of χ over the chaotic rows at `checkpoint`.
pub fn lcn_distribution(table: &EnsembleTable, checkpoint: f64) -> Result<LcnDistribution> {
    let idx = table.checkpoint_index(checkpoint).ok_or_else(|| {
        Error::Validation(format!("{checkpoint} is not a checkpoint of this ensemble"))
    })?;
    LcnDistribution::from_samples(&table.chaotic_chi(idx))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub c2: f64,
    pub trajectories: usize,
    pub chaotic: usize,
    pub failed: usize,
    pub fraction_chaotic: f64,
    /// Chaotic-row statistics at the last checkpoint.
    pub final_stats: Option<SampleSummary>,
    /// Mean chaotic χ at every checkpoint.
    pub checkpoint_means: Vec<Option<f64>>,
}

impl SweepRow {
    pub fn from_table(c2: f64, table: &EnsembleTable) -> Self {
        let last = table.checkpoints.len() - 1;
        Self {
            c2,
            trajectories: table.rows.len(),
            chaotic: table.count(TrajectoryClass::Chaotic),
            failed: table.failed(),
            fraction_chaotic: table.fraction(TrajectoryClass::Chaotic),
            final_stats: SampleSummary::of(&table.chaotic_chi(last)),
            checkpoint_means: (0..=last)
                .map(|i| SampleSummary::of(&table.chaotic_chi(i)).map(|s| s.mean))
                .collect(),
        }
    }

    /// Δχ, the spread of chaotic χ at the last checkpoint.
    pub fn delta_chi(&self) -> Option<f64> {
        self.final_stats.map(|s| s.range())
    }

    pub fn mean_chi(&self) -> Option<f64> {
        self.final_stats.map(|s| s.mean)
    }

    pub fn std_dev(&self) -> Option<f64> {
        self.final_stats.map(|s| s.std_dev)
    }
}

/// One two-qubit ensemble per `c2`, all on the same grid.
pub fn entanglement_sweep(
    c2_values: &[f64],
    a0: f64,
    frequencies: OscillatorFrequencies,
    grid: &GridSpec,
    controls: &IntegrationControls,
    checkpoints: &[f64],
    opts: &EnsembleOptions,
) -> Result<Vec<SweepRow>> {
    if c2_values.is_empty() {
        return Err(Error::Validation("c2 list is empty".into()));
    }
    let models = c2_values
        .iter()
        .map(|&c2| make_two_qubit(c2, a0, frequencies).map(WavefunctionModel::from))
        .collect::<Result<Vec<_>>>()?;
    models
        .iter()
        .zip(c2_values)
        .map(|(m, &c2)| {
            let table = run_ensemble(m, grid, controls, checkpoints, opts)?;
            Ok(SweepRow::from_table(c2, &table))
        })
        .collect()
}

/// Rectangular binning region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Region {
    pub fn square(lo: f64, hi: f64) -> Self {
        Self {
            x: [lo, hi],
            y: [lo, hi],
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x[0] && p[0] < self.x[1] && p[1] >= self.y[0] && p[1] < self.y[1]
    }
}

/// Occupancy counts on square bins. Samples outside the region go to `overflow`.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorplotGrid {
    pub region: Region,
    pub bin_size: f64,
    pub n_x: usize,
    pub n_y: usize,
    /// Row-major, `counts[j·n_x + i]` for bin column `i` and row `j`.
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub total_samples: u64,
}

fn bin_count(range: [f64; 2], bin: f64) -> Result<usize> {
    let q = (range[1] - range[0]) / bin;
    let n = q.round();
    if !(n >= 1.0 && (q - n).abs() <= TIME_MATCH * n) {
        return Err(Error::Validation(format!(
            "region width {} is not a whole number of bins of size {bin}",
            range[1] - range[0]
        )));
    }
    Ok(n as usize)
}

impl ColorplotGrid {
    pub fn new(region: Region, bin_size: f64) -> Result<Self> {
        if !(bin_size > 0.0 && bin_size.is_finite()) {
            return Err(Error::Validation(format!(
                "bin_size must be positive, got {bin_size}"
            )));
        }
        let n_x = bin_count(region.x, bin_size)?;
        let n_y = bin_count(region.y, bin_size)?;
        Ok(Self {
            region,
            bin_size,
            n_x,
            n_y,
            counts: vec![0; n_x * n_y],
            overflow: 0,
            total_samples: 0,
        })
    }

    pub fn add(&mut self, p: [f64; 2]) {
        self.total_samples += 1;
        if !self.region.contains(p) {
            self.overflow += 1;
            return;
        }
        let i = (((p[0] - self.region.x[0]) / self.bin_size) as usize).min(self.n_x - 1);
        let j = (((p[1] - self.region.y[0]) / self.bin_size) as usize).min(self.n_y - 1);
        self.counts[j * self.n_x + i] += 1;
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.counts[j * self.n_x + i]
    }

    pub fn same_geometry(&self, other: &Self) -> bool {
        self.region == other.region
            && self.bin_size == other.bin_size
            && self.n_x == other.n_x
            && self.n_y == other.n_y
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if !self.same_geometry(other) {
            return Err(Error::GridMismatch);
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        self.total_samples += other.total_samples;
        Ok(())
    }

    pub fn inside_samples(&self) -> u64 {
        self.total_samples - self.overflow
    }

    /// Fraction of bins with at least one sample.
    pub fn occupied_fraction(&self) -> f64 {
        self.counts.iter().filter(|&&c| c > 0).count() as f64 / self.counts.len() as f64
    }

    /// Counts divided by the total number of samples (overflow included).
    pub fn probabilities(&self) -> Vec<f64> {
        let total = self.total_samples.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / total).collect()
    }
}

/// Colorplot of every sample of `record`.
pub fn colorplot(
    record: &TrajectoryRecord,
    region: Region,
    bin_size: f64,
) -> Result<ColorplotGrid> {
    let mut grid = ColorplotGrid::new(region, bin_size)?;
    record.positions.iter().for_each(|&p| grid.add(p));
    Ok(grid)
}

/// Frobenius norm of the difference of the two probability-normalized count matrices.
pub fn frobenius_distance(g1: &ColorplotGrid, g2: &ColorplotGrid) -> Result<f64> {
    if !g1.same_geometry(g2) {
        return Err(Error::GridMismatch);
    }
    let (p, q) = (g1.probabilities(), g2.probabilities());
    Ok(p.iter()
        .zip(&q)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColorplotSpec {
    pub region: Region,
    pub bin_size: f64,
    /// Spacing of the binned samples; a whole multiple of the sampling step.
    pub sample_dt: f64,
}

impl Default for ColorplotSpec {
    fn default() -> Self {
        Self {
            region: Region::square(-6.0, 6.0),
            bin_size: DEFAULT_BIN_SIZE,
            sample_dt: DEFAULT_COLORPLOT_DT,
        }
    }
}

struct ColorplotSink {
    grid: ColorplotGrid,
    stride: usize,
    snapshot_times: Vec<f64>,
    snapshots: Vec<ColorplotGrid>,
}

impl TrajectorySink for ColorplotSink {
    fn position(&mut self, index: usize, t: f64, position: [f64; 2], _degraded: bool) {
        if index % self.stride != 0 {
            return;
        }
        self.grid.add(position);
        while let Some(&s) = self.snapshot_times.get(self.snapshots.len()) {
            if t < s * (1.0 - TIME_MATCH) {
                break;
            }
            self.snapshots.push(self.grid.clone());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ColorplotRun {
    /// Colorplot accumulated up to each requested time, then the final one.
    /// Times past the end of a stalled run repeat the final grid.
    pub snapshots: Vec<ColorplotGrid>,
    pub summary: RunSummary,
}

impl ColorplotRun {
    pub fn final_grid(&self) -> &ColorplotGrid {
        self.snapshots
            .last()
            .expect("final colorplot is always present")
    }
}

/// Integrates one trajectory, binning positions every `spec.sample_dt` without storing them.
pub fn colorplot_run(
    model: &WavefunctionModel,
    start: [f64; 2],
    controls: &IntegrationControls,
    spec: &ColorplotSpec,
    snapshot_times: &[f64],
) -> Result<ColorplotRun> {
    let ratio = spec.sample_dt / controls.dt_sample;
    let stride = ratio.round();
    if !(stride >= 1.0 && (ratio - stride).abs() <= TIME_MATCH * stride) {
        return Err(Error::Validation(format!(
            "colorplot sample_dt ({}) must be a whole multiple of dt_sample ({})",
            spec.sample_dt, controls.dt_sample
        )));
    }
    if snapshot_times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Validation(
            "snapshot times must be strictly increasing".into(),
        ));
    }
    let mut sink = ColorplotSink {
        grid: ColorplotGrid::new(spec.region, spec.bin_size)?,
        stride: stride as usize,
        snapshot_times: snapshot_times.to_vec(),
        snapshots: Vec::with_capacity(snapshot_times.len() + 1),
    };
    let summary = integrate_streaming(model, start, None, controls, &mut sink)?;
    let mut snapshots = sink.snapshots;
    snapshots.truncate(snapshot_times.len());
    // A run that stopped early has accumulated nothing past its last sample.
    while snapshots.len() < snapshot_times.len() {
        snapshots.push(sink.grid.clone());
    }
    snapshots.push(sink.grid);
    Ok(ColorplotRun { snapshots, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_points_are_cell_centred() {
        let g = GridSpec::square(-4.0, 4.0, 4);
        let p = g.points();
        assert_eq!(p.len(), 16);
        assert_eq!(p[0], [-3.0, -3.0]);
        assert_eq!(p[1], [-1.0, -3.0]);
        assert_eq!(p[15], [3.0, 3.0]);
    }

    #[test]
    fn random_sampling_is_reproducible() {
        let g = GridSpec {
            sampling: Sampling::Random { seed: 7 },
            ..GridSpec::square(-4.0, 4.0, 5)
        };
        let (a, b) = (g.points(), g.points());
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.iter().all(|c| (-4.0..4.0).contains(c))));
        let other = GridSpec {
            sampling: Sampling::Random { seed: 8 },
            ..g
        }
        .points();
        assert_ne!(a, other);
    }

    #[test]
    fn identical_values_have_zero_spread() {
        let d = LcnDistribution::from_samples(&[0.25; 40]).unwrap();
        assert_eq!(d.std_dev(), 0.0);
        assert_eq!(d.mean(), 0.25);
        assert_eq!(d.histogram.mass, vec![1.0]);
    }

    #[test]
    fn too_few_samples() {
        assert_eq!(
            LcnDistribution::from_samples(&[1.0; 29]),
            Err(Error::TooFewSamples {
                needed: 30,
                got: 29
            })
        );
    }

    #[test]
    fn moments_of_a_known_sample() {
        // Symmetric two-point sample: skewness 0, excess kurtosis −2.
        let v: Vec<f64> = (0..40)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let d = LcnDistribution::from_samples(&v).unwrap();
        assert!(d.skewness.abs() < 1e-12);
        assert!((d.excess_kurtosis + 2.0).abs() < 1e-12);
        assert!((d.histogram.mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn colorplot_counts_and_overflow() {
        let mut g = ColorplotGrid::new(Region::square(-1.0, 1.0), 0.5).unwrap();
        assert_eq!((g.n_x, g.n_y), (4, 4));
        g.add([0.1, 0.1]);
        g.add([0.1, 0.1]);
        g.add([-0.9, 0.6]);
        g.add([5.0, 0.0]);
        assert_eq!(g.get(2, 2), 2);
        assert_eq!(g.get(0, 3), 1);
        assert_eq!(g.overflow, 1);
        assert_eq!(g.counts.iter().sum::<u64>() + g.overflow, g.total_samples);
    }

    #[test]
    fn bin_size_must_divide_region() {
        assert!(ColorplotGrid::new(Region::square(-1.0, 1.0), 0.3).is_err());
        assert!(ColorplotGrid::new(Region::square(-6.0, 6.0), 0.05).is_ok());
    }

    #[test]
    fn frobenius_of_equal_and_mismatched_grids() {
        let mut a = ColorplotGrid::new(Region::square(-1.0, 1.0), 0.5).unwrap();
        a.add([0.0, 0.0]);
        assert_eq!(frobenius_distance(&a, &a.clone()).unwrap(), 0.0);
        let mut b = ColorplotGrid::new(Region::square(-1.0, 1.0), 0.5).unwrap();
        b.add([0.9, 0.9]);
        assert!((frobenius_distance(&a, &b).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let c = ColorplotGrid::new(Region::square(-1.0, 1.0), 0.25).unwrap();
        assert_eq!(frobenius_distance(&a, &c), Err(Error::GridMismatch));
    }
}
