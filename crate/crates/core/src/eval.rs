//! Evaluation: ROC-AUC, sliding AUC, the sample-set uniformity check, the
//! incremental-vs-rebuild oracle, runtime benchmarks and ψ sweeps.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::LabeledInstance;
use crate::error::{IdkError, Result};
use crate::model::ModelState;
use crate::stream::{quantile, run_stream, Mode, ReplacementPolicy, ScoreRecord, StreamConfig};

/// Area under the ROC curve for anomaly scores (higher = more anomalous),
/// with tied scores counted as one half via midranks.
pub fn roc_auc(anomaly_scores: &[f64], labels: &[bool]) -> Result<f64> {
    if anomaly_scores.len() != labels.len() {
        return Err(IdkError::Metric(format!(
            "{} scores but {} labels",
            anomaly_scores.len(),
            labels.len()
        )));
    }
    if anomaly_scores.iter().any(|s| s.is_nan()) {
        return Err(IdkError::Metric("scores contain NaN".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(IdkError::Metric(
            "AUC needs at least one positive and one negative label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..anomaly_scores.len()).collect();
    order.sort_by(|&a, &b| anomaly_scores[a].total_cmp(&anomaly_scores[b]));

    // Sum of 1-based midranks over the positives.
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && anomaly_scores[order[j]] == anomaly_scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k]).count();
        pos_rank_sum += midrank * pos_in_group as f64;
        i = j;
    }
    let (p, n) = (n_pos as f64, n_neg as f64);
    let u = pos_rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AucPoint {
    pub center_index: u64,
    pub auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

/// AUC over the closed interval `[T - ω, T + ω]` of stream indices for
/// centres `T` stepping by `stride`. Only centres whose interval lies fully
/// inside the record range are evaluated; intervals without both classes
/// are skipped.
pub fn sliding_auc(records: &[ScoreRecord], omega: usize, stride: usize) -> Result<Vec<AucPoint>> {
    if stride == 0 {
        return Err(IdkError::param("stride must be positive"));
    }
    if records.windows(2).any(|w| w[0].stream_index >= w[1].stream_index) {
        return Err(IdkError::Metric("records must be sorted by stream index".into()));
    }
    let labels: Vec<bool> = records
        .iter()
        .map(|r| r.label)
        .collect::<Option<_>>()
        .ok_or_else(|| IdkError::Metric("sliding AUC needs labelled records".into()))?;
    let (Some(first), Some(last)) = (records.first(), records.last()) else {
        return Ok(Vec::new());
    };
    let omega = omega as u64;
    let mut out = Vec::new();
    let mut center = first.stream_index + omega;
    while center + omega <= last.stream_index {
        let lo = records.partition_point(|r| r.stream_index < center - omega);
        let hi = records.partition_point(|r| r.stream_index <= center + omega);
        let labs = &labels[lo..hi];
        let n_pos = labs.iter().filter(|&&l| l).count();
        let n_neg = labs.len() - n_pos;
        if n_pos > 0 && n_neg > 0 {
            let scores: Vec<f64> = records[lo..hi].iter().map(|r| -r.normal_score).collect();
            out.push(AucPoint {
                center_index: center,
                auc: roc_auc(&scores, labs)?,
                n_pos,
                n_neg,
            });
        }
        center += stride as u64;
    }
    Ok(out)
}

pub fn write_sliding_auc_csv<W: Write>(points: &[AucPoint], mut w: W) -> std::io::Result<()> {
    writeln!(w, "T,auc,n_pos,n_neg")?;
    for p in points {
        writeln!(w, "{},{:?},{},{}", p.center_index, p.auc, p.n_pos, p.n_neg)?;
    }
    w.flush()
}

fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Colexicographic rank of a sorted k-subset of `0..n`.
fn subset_rank(sorted: &[usize]) -> usize {
    sorted
        .iter()
        .enumerate()
        .map(|(i, &c)| binomial(c, i + 1).unwrap_or(0) as usize)
        .sum()
}

pub const MAX_ENUMERABLE_SUBSETS: u128 = 10_000;
pub const MIN_TRIALS_PER_SUBSET: u128 = 100;
pub const UNIFORMITY_ALPHA: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub omega: usize,
    pub psi: usize,
    pub step: usize,
    pub slides: usize,
    pub trials: usize,
    pub subsets: usize,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub pass: bool,
    pub counts: Vec<u64>,
}

/// Runs independent single-partitioning models through `slides` updates
/// and tests whether the final sample sets are uniform over all
/// C(ω, ψ) subsets of the window.
pub fn uniformity_test(
    omega: usize,
    psi: usize,
    step: usize,
    slides: usize,
    trials: usize,
    seed: u64,
) -> Result<UniformityReport> {
    uniformity_test_with(omega, psi, step, slides, trials, seed, ReplacementPolicy::Uniform)
}

pub fn uniformity_test_with(
    omega: usize,
    psi: usize,
    step: usize,
    slides: usize,
    trials: usize,
    seed: u64,
    policy: ReplacementPolicy,
) -> Result<UniformityReport> {
    StreamConfig {
        omega,
        step,
        psi,
        t: 1,
        seed,
        mode: Mode::Incremental,
    }
    .validate()?;
    let subsets = binomial(omega, psi)
        .filter(|&c| c <= MAX_ENUMERABLE_SUBSETS)
        .ok_or_else(|| {
            IdkError::param(format!(
                "C({omega}, {psi}) exceeds {MAX_ENUMERABLE_SUBSETS} subsets; too many to enumerate"
            ))
        })?;
    let needed = MIN_TRIALS_PER_SUBSET * subsets;
    if (trials as u128) < needed {
        return Err(IdkError::param(format!(
            "insufficient trials: {trials} given, at least {needed} needed for {subsets} subsets"
        )));
    }
    let subsets = subsets as usize;
    let stream: Vec<[f64; 1]> = (0..omega + slides * step).map(|i| [i as f64]).collect();

    let counts = (0..trials)
        .into_par_iter()
        .map(|trial| -> Result<usize> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial as u64);
            let mut m = ModelState::init(&stream[..omega], 0, psi, 1, &mut rng)?;
            for s in 0..slides {
                let from = omega + s * step;
                m.update_incremental_with(&stream[from..from + step], &mut rng, policy)?;
            }
            let start = m.window_start();
            let mut positions: Vec<usize> = m.sample_sets()[0]
                .iter()
                .map(|&s| (s - start) as usize)
                .collect();
            positions.sort_unstable();
            Ok(subset_rank(&positions))
        })
        .try_fold(
            || vec![0u64; subsets],
            |mut acc, rank| {
                acc[rank?] += 1;
                Ok::<_, IdkError>(acc)
            },
        )
        .try_reduce(
            || vec![0u64; subsets],
            |mut a, b| {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )?;

    let expected = trials as f64 / subsets as f64;
    let chi_square: f64 = counts
        .iter()
        .map(|&o| (o as f64 - expected).powi(2) / expected)
        .sum();
    let dof = subsets - 1;
    let p_value = if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64)
            .expect("positive degrees of freedom")
            .sf(chi_square)
    };
    Ok(UniformityReport {
        omega,
        psi,
        step,
        slides,
        trials,
        subsets,
        chi_square,
        dof,
        p_value,
        pass: p_value > UNIFORMITY_ALPHA,
        counts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub updates: usize,
    pub assignments_match: bool,
    pub counts_match: bool,
    pub max_score_rel_diff: f64,
    pub pass: bool,
}

/// Streams `points` through an incremental model and, after every update,
/// rebuilds the model from scratch on the same window with the same sample
/// sets. Assignments and counts must agree exactly; scores must agree to
/// `score_rel_tol`.
pub fn oracle_equivalence<P: AsRef<[f64]> + Sync>(
    points: &[P],
    omega: usize,
    step: usize,
    psi: usize,
    t: usize,
    seed: u64,
    score_rel_tol: f64,
) -> Result<OracleReport> {
    StreamConfig {
        omega,
        step,
        psi,
        t,
        seed,
        mode: Mode::Incremental,
    }
    .validate()?;
    if points.len() < omega {
        return Err(IdkError::param("stream shorter than the window"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut model = ModelState::init(&points[..omega], 0, psi, t, &mut rng)?;
    let mut report = OracleReport {
        updates: 0,
        assignments_match: true,
        counts_match: true,
        max_score_rel_diff: 0.0,
        pass: true,
    };
    let mut next = omega;
    while next < points.len() {
        let end = (next + step).min(points.len());
        model.update_incremental(&points[next..end], &mut rng)?;
        next = end;
        report.updates += 1;

        let start = model.window_start() as usize;
        let window = &points[start..start + omega];
        let oracle = ModelState::with_sample_sets(window, start as u64, &model.sample_sets())?;
        report.assignments_match &= oracle.assignment_matrix() == model.assignment_matrix();
        report.counts_match &= oracle.count_table() == model.count_table();
        for (r, x) in window.iter().enumerate() {
            let fresh = oracle.score(x.as_ref())?;
            let kept = model.score_row(r);
            let diff = (fresh - kept).abs();
            let rel = if diff == 0.0 { 0.0 } else { diff / fresh.abs().max(kept.abs()) };
            report.max_score_rel_diff = report.max_score_rel_diff.max(rel);
        }
    }
    report.pass =
        report.assignments_match && report.counts_match && report.max_score_rel_diff <= score_rel_tol;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub mode: Mode,
    pub omega: usize,
    pub step: usize,
    pub psi: usize,
    pub t: usize,
    pub seed: u64,
    pub repeats: usize,
    pub updates: usize,
    pub mean_update_time: f64,
    pub median_update_time: f64,
    pub total_time: f64,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchOptions {
    /// Seeds per grid cell: `cfg.seed`, `cfg.seed + 1`, ...
    pub repeats: usize,
    /// When set, each run only sees the first `ω + max_updates·l` instances.
    pub max_updates: Option<usize>,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            repeats: 1,
            max_updates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub per_seed: Vec<BenchRow>,
    /// One row per grid cell holding medians over the seeds.
    pub summary: Vec<BenchRow>,
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    quantile(values, 0.5)
}

/// Times every grid configuration on `source`. Per-update times exclude
/// building the initial window's model.
pub fn bench_runtime(grid: &[StreamConfig], source: &[LabeledInstance], opts: BenchOptions) -> Result<BenchReport> {
    if grid.is_empty() {
        return Err(IdkError::param("benchmark grid is empty"));
    }
    if opts.repeats == 0 {
        return Err(IdkError::param("repeats must be at least 1"));
    }
    for cfg in grid {
        cfg.validate()?;
    }
    let mut report = BenchReport {
        per_seed: Vec::new(),
        summary: Vec::new(),
    };
    // Repeats are the outer loop so that every pass visits the whole grid;
    // slow drift in machine speed then lands on all configurations alike
    // instead of on whichever ran last.
    let mut rows: Vec<Vec<BenchRow>> = vec![Vec::with_capacity(opts.repeats); grid.len()];
    for r in 0..opts.repeats {
        for (cfg, cell) in grid.iter().zip(rows.iter_mut()) {
            let len = opts
                .max_updates
                .map_or(source.len(), |u| (cfg.omega + u * cfg.step).min(source.len()));
            let run_cfg = StreamConfig {
                seed: cfg.seed.wrapping_add(r as u64),
                ..cfg.clone()
            };
            let out = run_stream(&source[..len], &run_cfg)?;
            let m = &out.metrics;
            cell.push(BenchRow {
                mode: m.mode,
                omega: cfg.omega,
                step: cfg.step,
                psi: cfg.psi,
                t: cfg.t,
                seed: run_cfg.seed,
                repeats: 1,
                updates: m.updates,
                mean_update_time: m.update_time_mean_secs,
                median_update_time: m.update_time_median_secs,
                total_time: m.total_time_secs,
                auc: m.auc,
            });
        }
    }
    for (cfg, cell) in grid.iter().zip(rows) {
        let pick = |f: fn(&BenchRow) -> f64| median(&mut cell.iter().map(f).collect::<Vec<_>>());
        let mut aucs: Vec<f64> = cell.iter().filter_map(|r| r.auc).collect();
        report.summary.push(BenchRow {
            seed: cfg.seed,
            repeats: opts.repeats,
            mean_update_time: pick(|r| r.mean_update_time),
            median_update_time: pick(|r| r.median_update_time),
            total_time: pick(|r| r.total_time),
            auc: (!aucs.is_empty()).then(|| median(&mut aucs)),
            ..cell[0].clone()
        });
        report.per_seed.extend(cell);
    }
    Ok(report)
}

pub fn write_bench_csv<W: Write>(rows: &[BenchRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)
            .map_err(|e| IdkError::State(format!("writing benchmark rows: {e}")))?;
    }
    wtr.flush()
        .map_err(|e| IdkError::State(format!("writing benchmark rows: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub psi: usize,
    pub auc: f64,
    pub total_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// ψ with the highest AUC; ties go to the smallest ψ.
    pub best_psi: usize,
}

pub fn psi_sweep(source: &[LabeledInstance], template: &StreamConfig, psi_values: &[usize]) -> Result<SweepResult> {
    if psi_values.is_empty() {
        return Err(IdkError::param("no psi values to sweep"));
    }
    let mut rows = Vec::with_capacity(psi_values.len());
    for &psi in psi_values {
        let cfg = StreamConfig {
            psi,
            ..template.clone()
        };
        let out = run_stream(source, &cfg)?;
        let auc = out
            .metrics
            .auc
            .ok_or_else(|| IdkError::Metric("sweep needs a stream with both labels".into()))?;
        rows.push(SweepRow {
            psi,
            auc,
            total_time: out.metrics.total_time_secs,
        });
    }
    let best = rows
        .iter()
        .fold(None::<&SweepRow>, |best, r| match best {
            Some(b) if b.auc > r.auc || (b.auc == r.auc && b.psi <= r.psi) => Some(b),
            _ => Some(r),
        })
        .expect("non-empty");
    let best_psi = best.psi;
    Ok(SweepResult { rows, best_psi })
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "psi,auc,total_time")?;
    for r in rows {
        writeln!(w, "{},{:?},{:?}", r.psi, r.auc, r.total_time)?;
    }
    w.flush()
}
