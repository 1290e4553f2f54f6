//! Detector modes and the sliding-window driver.
//!
//! An incremental update replaces only the samples drawn from the departed
//! batch, refreshes the feature map entries that those replacements can
//! change, and moves the running sum by the resulting deltas. A retrain
//! update redraws every partitioning from the new window. Offline mode
//! builds one model over the whole dataset.

use std::fmt;
use std::hint::select_unpredictable;
use std::io::Write;
use std::ops::Range;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::LabeledInstance;
use crate::error::{IdkError, Result};
use crate::eval::roc_auc;
use crate::kernel::{sq_dist, sq_dist_fixed, Partitioning};
use crate::model::{pack, ModelState, SLOT_MASK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Incremental sample replacement.
    #[serde(rename = "idks")]
    Incremental,
    /// Full model rebuild on every slide.
    Retrain,
    /// One model over the whole dataset.
    Offline,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Incremental => "idks",
            Mode::Retrain => "retrain",
            Mode::Offline => "offline",
        })
    }
}

impl FromStr for Mode {
    type Err = IdkError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "idks" | "incremental" => Ok(Mode::Incremental),
            "retrain" => Ok(Mode::Retrain),
            "offline" => Ok(Mode::Offline),
            other => Err(IdkError::param(format!(
                "unknown mode '{other}' (expected idks, retrain or offline)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamConfig {
    /// Window size ω.
    pub omega: usize,
    /// Update step size l.
    pub step: usize,
    pub psi: usize,
    pub t: usize,
    pub seed: u64,
    pub mode: Mode,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            omega: 2048,
            step: 100,
            psi: 4,
            t: 100,
            seed: 0,
            mode: Mode::Incremental,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.psi < 2 || self.psi >= self.omega {
            return Err(IdkError::param(format!(
                "psi must satisfy 2 <= psi < window ({}), got {}",
                self.omega, self.psi
            )));
        }
        if self.step == 0 || self.step > self.omega {
            return Err(IdkError::param(format!(
                "step must satisfy 1 <= step <= window ({}), got {}",
                self.omega, self.step
            )));
        }
        if self.t == 0 {
            return Err(IdkError::param("t must be at least 1"));
        }
        Ok(())
    }
}

/// How replacement samples are picked from the arrived batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReplacementPolicy {
    /// Uniform draw without replacement over the arrived positions.
    #[default]
    Uniform,
    /// Always the newest arrivals. Biased; exists as a negative control for
    /// the uniformity check.
    NewestOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct UpdateStats {
    /// Samples replaced across all partitionings (m).
    pub replaced_samples: usize,
    pub affected_partitionings: usize,
    pub wall_time: Duration,
}

/// Ring positions of `len` consecutive stream indices starting at `start`,
/// as at most two contiguous ranges.
fn ring_segments(start: u64, len: usize, omega: usize) -> [Range<usize>; 2] {
    let begin = (start % omega as u64) as usize;
    let first = len.min(omega - begin);
    [begin..begin + first, 0..len - first]
}

/// Number of interleaved partial histograms used while recounting. Rows
/// close together in the window usually land in the same slot, and
/// spreading their increments over several lanes keeps consecutive rows
/// from waiting on each other's store.
const LANES: usize = 4;

/// Re-derives nearest centre and membership for the persistent rows whose
/// codes are `code` (coordinates in `rows`, cached nearest distances in
/// `near`) after the `expired` slots of `p` were overwritten, and adds every
/// row's new membership to `hist` (`LANES × psi`, lane-major). Only a
/// replaced centre can newly become nearest, so rows whose cached nearest
/// survived are compared against the replaced centres alone; the rest get a
/// full search.
#[allow(clippy::too_many_arguments)]
fn rescan_persistent(
    p: &Partitioning,
    rows: &[f64],
    code: &mut [u32],
    near: &mut [f64],
    hist: &mut [u32],
    expired: &[usize],
    is_expired: &[bool],
    orphans: &mut Vec<u32>,
) {
    let dim = p.dim();
    if p.psi() <= SMALL_PSI {
        match dim {
            1 => return rescan_small::<1>(p, rows, code, near, hist, expired, orphans),
            2 => return rescan_small::<2>(p, rows, code, near, hist, expired, orphans),
            3 => return rescan_small::<3>(p, rows, code, near, hist, expired, orphans),
            _ => {}
        }
    }
    if let [e] = *expired {
        rescan_single(p, rows, code, near, hist, e, orphans);
        return;
    }

    let radii_sq = p.radii_sq();
    let psi = p.psi();
    let iter = rows.chunks_exact(dim).zip(code.iter_mut().zip(near.iter_mut()));
    for (i, (x, (slot, cur))) in iter.enumerate() {
        let cached = (*slot & SLOT_MASK) as usize;
        let (best, best_sq) = if is_expired[cached] {
            p.nearest(x)
        } else {
            let mut best = (cached, *cur);
            for &e in expired {
                let d = sq_dist(x, p.center(e));
                if d < best.1 || (d == best.1 && e < best.0) {
                    best = (e, d);
                }
            }
            best
        };
        let new = pack(best, best_sq < radii_sq[best]);
        hist[(i % LANES) * psi + best] += new >> 31;
        *slot = new;
        *cur = best_sq;
    }
}

/// Largest ψ served by [`rescan_small`]; a power of two.
const SMALL_PSI: usize = 64;

/// [`rescan_persistent`] for a small ψ and a dimension known at compile
/// time. Centres, radii and partial histograms live in fixed-size local
/// tables addressed through a mask, which keeps bounds checks out of the
/// loop, and the expired slots are a bit set. Whether a row changes ball is
/// close to a coin flip, so the hot loop is branch-free: rows whose nearest
/// was replaced are skipped and collected for a full search afterwards.
fn rescan_small<const D: usize>(
    p: &Partitioning,
    rows: &[f64],
    code: &mut [u32],
    near: &mut [f64],
    hist: &mut [u32],
    expired: &[usize],
    orphans: &mut Vec<u32>,
) {
    let psi = p.psi();
    let mut centers = [[0.0; D]; SMALL_PSI];
    let mut radii_sq = [0.0; SMALL_PSI];
    for k in 0..psi {
        centers[k].copy_from_slice(p.center(k));
        radii_sq[k] = p.radii_sq()[k];
    }
    let expired_bits = expired.iter().fold(0u64, |acc, &e| acc | 1 << e);
    let mut lanes = [[0u32; SMALL_PSI]; LANES];
    let (rows, _) = rows.as_chunks::<D>();
    if orphans.len() < code.len() {
        orphans.resize(code.len(), 0);
    }
    let n_orphans = match *expired {
        // By far the most common case.
        [e] => {
            single_pass_dispatch(rows, code, near, &centers[e & (SMALL_PSI - 1)], e as u32);
            tally(code, near, &radii_sq, &mut lanes, orphans)
        }
        _ => small_pass(rows, code, near, &centers, &radii_sq, expired, expired_bits, &mut lanes, orphans),
    };
    for (k, h) in hist[..psi].iter_mut().enumerate() {
        *h += lanes.iter().map(|lane| lane[k]).sum::<u32>();
    }
    let orphans = &orphans[..n_orphans];
    // The usual ψ values get a search whose trip count is known.
    match psi {
        2 => settle_orphans(rows, code, near, &centers[..2], &radii_sq, hist, orphans),
        4 => settle_orphans(rows, code, near, &centers[..4], &radii_sq, hist, orphans),
        8 => settle_orphans(rows, code, near, &centers[..8], &radii_sq, hist, orphans),
        _ => settle_orphans(rows, code, near, &centers[..psi], &radii_sq, hist, orphans),
    }
}

/// Full nearest-centre search for the listed rows of [`rescan_small`].
#[inline(always)]
fn settle_orphans<const D: usize>(
    rows: &[[f64; D]],
    code: &mut [u32],
    near: &mut [f64],
    centers: &[[f64; D]],
    radii_sq: &[f64; SMALL_PSI],
    hist: &mut [u32],
    orphans: &[u32],
) {
    for &i in orphans {
        let i = i as usize;
        let (mut k, mut sq) = (0, f64::INFINITY);
        for (j, c) in centers.iter().enumerate() {
            let d = sq_dist_fixed::<D>(&rows[i], c);
            let better = d < sq;
            sq = if better { d } else { sq };
            k = select_unpredictable(better, j, k);
        }
        let inside = sq < radii_sq[k & (SMALL_PSI - 1)];
        hist[k] += inside as u32;
        code[i] = pack(k, inside);
        near[i] = sq;
    }
}

/// Marks a row of [`single_pass`] whose nearest centre was the replaced one.
const ORPHAN: u32 = 1 << 30;

/// Rescan for a single replaced slot `e` with centre `ce`: leaves every
/// row's nearest slot in `code` (membership flag clear) and its distance in
/// `near`. Rows whose nearest was `e` itself get `e | ORPHAN`. The rows are
/// independent and the body is branch-free, so the loop vectorises; the
/// membership test needs a per-row radius lookup and is left to [`tally`].
#[inline(always)]
fn single_pass<const D: usize>(rows: &[[f64; D]], code: &mut [u32], near: &mut [f64], ce: &[f64; D], e: u32) {
    const MASK: u32 = SMALL_PSI as u32 - 1;
    for (x, (slot, cur)) in rows.iter().zip(code.iter_mut().zip(near.iter_mut())) {
        let cached = *slot & MASK;
        let d = sq_dist_fixed::<D>(x, ce);
        let c = *cur;
        let win = (d < c) | ((d == c) & (e < cached));
        let best = if win { e } else { cached };
        *slot = if cached == e { e | ORPHAN } else { best };
        *cur = if d < c { d } else { c };
    }
}

/// [`single_pass`], built for AVX2 when the CPU has it.
fn single_pass_dispatch<const D: usize>(
    rows: &[[f64; D]],
    code: &mut [u32],
    near: &mut [f64],
    ce: &[f64; D],
    e: u32,
) {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") {
        #[target_feature(enable = "avx2")]
        fn avx2<const D: usize>(rows: &[[f64; D]], code: &mut [u32], near: &mut [f64], ce: &[f64; D], e: u32) {
            single_pass(rows, code, near, ce, e)
        }
        // SAFETY: the CPU supports AVX2, checked just above.
        return unsafe { avx2(rows, code, near, ce, e) };
    }
    single_pass(rows, code, near, ce, e)
}

/// Completes the codes left by [`single_pass`] with their membership flag,
/// adds them to `lanes` and lists the [`ORPHAN`] rows. A row is inside
/// its nearest ball exactly when its distance is below that ball's radius,
/// whichever centre won. Returns the number of orphans.
#[inline(always)]
fn tally(
    code: &mut [u32],
    near: &[f64],
    radii_sq: &[f64; SMALL_PSI],
    lanes: &mut [[u32; SMALL_PSI]; LANES],
    orphans: &mut [u32],
) -> usize {
    const MASK: u32 = SMALL_PSI as u32 - 1;
    let mut n = 0;
    let mut settle = |i: usize, lane: &mut [u32; SMALL_PSI], slot: &mut u32, d: f64| {
        let c = *slot;
        let k = (c & MASK) as usize;
        let orphan = c & ORPHAN != 0;
        let inside = (d < radii_sq[k]) & !orphan;
        lane[k] += inside as u32;
        *slot = pack(k, inside);
        orphans[n] = i as u32;
        n += orphan as usize;
    };
    let (code_blocks, code_tail) = code.as_chunks_mut::<LANES>();
    let (near_blocks, near_tail) = near.as_chunks::<LANES>();
    for (b, (slots, ds)) in code_blocks.iter_mut().zip(near_blocks).enumerate() {
        for (j, lane) in lanes.iter_mut().enumerate() {
            settle(b * LANES + j, lane, &mut slots[j], ds[j]);
        }
    }
    let base = code_blocks.len() * LANES;
    for (j, (slot, &d)) in code_tail.iter_mut().zip(near_tail).enumerate() {
        settle(base + j, &mut lanes[j], slot, d);
    }
    n
}

/// Main pass of [`rescan_small`]: settles every row whose nearest centre
/// survived, tallying memberships into `lanes`, and lists the others in
/// `orphans`. Returns the number of orphans.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn small_pass<const D: usize>(
    rows: &[[f64; D]],
    code: &mut [u32],
    near: &mut [f64],
    centers: &[[f64; D]; SMALL_PSI],
    radii_sq: &[f64; SMALL_PSI],
    expired: &[usize],
    expired_bits: u64,
    lanes: &mut [[u32; SMALL_PSI]; LANES],
    orphans: &mut [u32],
) -> usize {
    const MASK: usize = SMALL_PSI - 1;
    let mut n_orphans = 0;
    let mut settle = |i: usize, lane: &mut [u32; SMALL_PSI], x: &[f64; D], slot: &mut u32, cur: &mut f64| {
        // The slot bits of a code are below SMALL_PSI; masking drops the
        // membership flag.
        let cached = *slot & MASK as u32;
        let orphan = (expired_bits >> cached) & 1 == 1;
        let mut best = cached;
        let mut best_sq = *cur;
        let mut inside = best_sq < radii_sq[cached as usize & MASK];
        for &e in expired {
            let e32 = e as u32;
            let d = sq_dist_fixed::<D>(x, &centers[e & MASK]);
            // A replaced centre wins for about one row in ψ, which is too
            // often to branch on. Only integers are selected; x86 has no
            // conditional move for floats.
            let win = (d < best_sq) | ((d == best_sq) & (e32 < best));
            best = select_unpredictable(win, e32, best);
            inside = select_unpredictable(win, d < radii_sq[e & MASK], inside);
            // Distances are never NaN; a plain comparison compiles to a
            // single `minsd`, unlike `f64::min`.
            best_sq = if d < best_sq { d } else { best_sq };
        }
        let inside = inside & !orphan;
        lane[best as usize & MASK] += inside as u32;
        *slot = pack(best as usize, inside);
        *cur = best_sq;
        orphans[n_orphans] = i as u32;
        n_orphans += orphan as usize;
    };
    // Rows go round the lanes in blocks so that each lane is a fixed
    // address within the block.
    let (row_blocks, row_tail) = rows.as_chunks::<LANES>();
    let (code_blocks, code_tail) = code.as_chunks_mut::<LANES>();
    let (near_blocks, near_tail) = near.as_chunks_mut::<LANES>();
    let blocks = row_blocks.iter().zip(code_blocks.iter_mut().zip(near_blocks.iter_mut()));
    for (b, (xs, (slots, curs))) in blocks.enumerate() {
        for (j, lane) in lanes.iter_mut().enumerate() {
            settle(b * LANES + j, lane, &xs[j], &mut slots[j], &mut curs[j]);
        }
    }
    let base = row_blocks.len() * LANES;
    let tail = row_tail.iter().zip(code_tail.iter_mut().zip(near_tail.iter_mut()));
    for (j, (x, (slot, cur))) in tail.enumerate() {
        settle(base + j, &mut lanes[j], x, slot, cur);
    }
    n_orphans
}

/// [`rescan_persistent`] for a single replaced slot `e`, outside the
/// small-ψ, low-dimension fast path. Same branch-free scheme as
/// [`rescan_small`].
fn rescan_single(
    p: &Partitioning,
    rows: &[f64],
    code: &mut [u32],
    near: &mut [f64],
    hist: &mut [u32],
    e: usize,
    orphans: &mut Vec<u32>,
) {
    let dim = p.dim();
    let radii_sq = p.radii_sq();
    let psi = p.psi();
    let ce = p.center(e);
    let e32 = e as u32;
    if orphans.len() < code.len() {
        orphans.resize(code.len(), 0);
    }
    let mut n_orphans = 0;
    let iter = rows.chunks_exact(dim).zip(code.iter_mut().zip(near.iter_mut()));
    for ((x, (slot, near)), i) in iter.zip(0u32..) {
        let cached = *slot & SLOT_MASK;
        let orphan = cached == e32;
        let cur = *near;
        let d = sq_dist(x, ce);
        let win = (d < cur) | ((d == cur) & (e32 < cached));
        let best = select_unpredictable(win, e32, cached);
        let inside = select_unpredictable(win, d < radii_sq[e], cur < radii_sq[cached as usize]) & !orphan;
        hist[(i as usize % LANES) * psi + best as usize] += inside as u32;
        *slot = pack(best as usize, inside);
        *near = if d < cur { d } else { cur };
        orphans[n_orphans] = i;
        n_orphans += orphan as usize;
    }
    for &i in &orphans[..n_orphans] {
        let i = i as usize;
        let (k, sq) = p.nearest(&rows[i * dim..(i + 1) * dim]);
        let inside = sq < radii_sq[k];
        hist[k] += inside as u32;
        code[i] = pack(k, inside);
        near[i] = sq;
    }
}

impl ModelState {
    fn check_batch<P: AsRef<[f64]>>(&self, arrived: &[P]) -> Result<usize> {
        let l = arrived.len();
        if l == 0 || l > self.omega {
            return Err(IdkError::State(format!(
                "batch of {l} instances cannot slide a window of {}",
                self.omega
            )));
        }
        for p in arrived {
            let p = p.as_ref();
            if p.len() != self.dim {
                return Err(IdkError::Dimension {
                    expected: self.dim,
                    got: p.len(),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(IdkError::param("arrived instance has a non-finite coordinate"));
            }
        }
        Ok(l)
    }

    /// Writes the arrived batch over the departed rows and advances the
    /// window by `arrived.len()`.
    fn advance<P: AsRef<[f64]>>(&mut self, arrived: &[P]) {
        let dim = self.dim;
        for (i, p) in arrived.iter().enumerate() {
            let pos = self.pos(self.window_start + i as u64);
            self.window[pos * dim..(pos + 1) * dim].copy_from_slice(p.as_ref());
        }
        self.window_start += arrived.len() as u64;
    }

    /// Slides the window by the arrived batch (the oldest `arrived.len()`
    /// rows depart) and updates the model incrementally.
    pub fn update_incremental<P, R>(&mut self, arrived: &[P], rng: &mut R) -> Result<UpdateStats>
    where
        P: AsRef<[f64]>,
        R: Rng + ?Sized,
    {
        self.update_incremental_with(arrived, rng, ReplacementPolicy::Uniform)
    }

    pub fn update_incremental_with<P, R>(
        &mut self,
        arrived: &[P],
        rng: &mut R,
        policy: ReplacementPolicy,
    ) -> Result<UpdateStats>
    where
        P: AsRef<[f64]>,
        R: Rng + ?Sized,
    {
        let started = Instant::now();
        let l = self.check_batch(arrived)?;
        self.fill_distances();
        let old_start = self.window_start;
        self.advance(arrived);
        let new_start = self.window_start;
        let first_arrived = old_start + self.omega as u64;

        let (omega, dim, psi) = (self.omega, self.dim, self.psi());
        // The arrived rows sit exactly where the departed rows were; every
        // other ring position holds a persistent row.
        let arrived_segs = ring_segments(old_start, l, omega);
        let persistent_segs = ring_segments(new_start, omega - l, omega);
        let window = &self.window;

        let mut stats = UpdateStats::default();
        let mut expired: Vec<usize> = Vec::with_capacity(psi);
        let mut is_expired = vec![false; psi];
        let mut picks: Vec<usize> = Vec::with_capacity(psi);
        let mut orphans: Vec<u32> = Vec::new();
        let mut hist: Vec<u32> = Vec::with_capacity(LANES * psi);

        for (p, col) in self
            .ensemble
            .as_mut_slice()
            .iter_mut()
            .zip(self.columns.iter_mut())
        {
            expired.clear();
            expired.extend(
                p.source_indices()
                    .iter()
                    .enumerate()
                    .filter(|(_, &s)| s < new_start)
                    .map(|(k, _)| k),
            );

            if expired.is_empty() {
                // Departed rows leave the running sum.
                for seg in &arrived_segs {
                    for pos in seg.clone() {
                        col.remove(col.code[pos]);
                    }
                }
            } else {
                let k = expired.len();
                picks.clear();
                match policy {
                    ReplacementPolicy::Uniform => picks.extend(index::sample(rng, l, k).iter()),
                    ReplacementPolicy::NewestOnly => picks.extend(l - k..l),
                }
                p.overwrite(
                    &expired,
                    picks
                        .iter()
                        .map(|&i| (first_arrived + i as u64, arrived[i].as_ref())),
                );
                for &e in &expired {
                    is_expired[e] = true;
                }

                // Every persistent row is revisited, so the running sum is
                // recounted from them rather than patched.
                hist.clear();
                hist.resize(LANES * psi, 0);
                for seg in &persistent_segs {
                    rescan_persistent(
                        p,
                        &window[seg.start * dim..seg.end * dim],
                        &mut col.code[seg.clone()],
                        &mut col.near_sq[seg.clone()],
                        &mut hist,
                        &expired,
                        &is_expired,
                        &mut orphans,
                    );
                }
                for (k, c) in col.counts.iter_mut().enumerate() {
                    *c = (0..LANES).map(|lane| hist[lane * psi + k]).sum();
                }

                for &e in &expired {
                    is_expired[e] = false;
                }
                stats.replaced_samples += k;
                stats.affected_partitionings += 1;
            }

            for seg in &arrived_segs {
                for pos in seg.clone() {
                    let a = col.refresh(pos, &window[pos * dim..(pos + 1) * dim], p);
                    col.add(a);
                }
            }
        }

        if cfg!(debug_assertions) {
            let end = self.window_end();
            debug_assert!(self
                .ensemble
                .iter()
                .flat_map(|p| p.source_indices())
                .all(|&s| s >= new_start && s < end));
        }
        stats.wall_time = started.elapsed();
        Ok(stats)
    }

    /// Slides the window by the arrived batch and rebuilds every
    /// partitioning from scratch on the new window.
    pub fn update_retrain<P, R>(&mut self, arrived: &[P], rng: &mut R) -> Result<UpdateStats>
    where
        P: AsRef<[f64]>,
        R: Rng + ?Sized,
    {
        let started = Instant::now();
        self.check_batch(arrived)?;
        self.advance(arrived);
        self.resample_all(rng);
        Ok(UpdateStats {
            replaced_samples: self.psi() * self.t(),
            affected_partitionings: self.t(),
            wall_time: started.elapsed(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub stream_index: u64,
    pub normal_score: f64,
    pub label: Option<bool>,
    /// 0 for the initial window, otherwise the update that admitted the
    /// instance.
    pub scored_at_step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub mode: Mode,
    pub omega: usize,
    pub step: usize,
    pub psi: usize,
    pub t: usize,
    pub seed: u64,
    pub instances: usize,
    pub updates: usize,
    pub total_time_secs: f64,
    pub init_time_secs: f64,
    pub update_time_mean_secs: f64,
    pub update_time_median_secs: f64,
    pub update_time_p95_secs: f64,
    pub update_time_max_secs: f64,
    pub replaced_samples_mean: f64,
    pub replaced_samples_max: usize,
    pub affected_partitionings_mean: f64,
    pub auc: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<ScoreRecord>,
    pub metrics: RunMetrics,
    /// Per-update wall time of the model update alone, in update order.
    /// Scoring the arrived batch costs the same in every mode and is
    /// excluded.
    pub update_times: Vec<Duration>,
}

pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn score_window_rows(model: &ModelState, source: &[LabeledInstance], rows: std::ops::Range<usize>, step: u64, out: &mut Vec<ScoreRecord>) {
    let offset = model.window_start() as usize;
    for r in rows {
        let s = offset + r;
        out.push(ScoreRecord {
            stream_index: s as u64,
            normal_score: model.score_row(r),
            label: source[s].label,
            scored_at_step: step,
        });
    }
}

/// Scores every instance of a static dataset against one model built on
/// the whole dataset.
pub fn offline_detect<R: Rng + ?Sized>(
    dataset: &[LabeledInstance],
    psi: usize,
    t: usize,
    rng: &mut R,
) -> Result<Vec<ScoreRecord>> {
    if dataset.len() < psi {
        return Err(IdkError::param(format!(
            "offline detection needs at least psi ({psi}) instances, got {}",
            dataset.len()
        )));
    }
    let points: Vec<&[f64]> = dataset.iter().map(|i| i.point.coords()).collect();
    let model = ModelState::init(&points, 0, psi, t, rng)?;
    let mut records = Vec::with_capacity(dataset.len());
    score_window_rows(&model, dataset, 0..dataset.len(), 0, &mut records);
    Ok(records)
}

fn records_auc(records: &[ScoreRecord]) -> Option<f64> {
    let mut scores = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for r in records {
        scores.push(-r.normal_score);
        labels.push(r.label?);
    }
    roc_auc(&scores, &labels).ok()
}

/// Runs a detector over a labelled stream in the configured mode. Each
/// instance is scored once: the first window against the initial model,
/// every later batch against the model updated to include it.
pub fn run_stream(source: &[LabeledInstance], cfg: &StreamConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut warnings = Vec::new();

    let mut effective = cfg.mode;
    if cfg.mode != Mode::Offline && source.len() < cfg.omega {
        let msg = format!(
            "stream has {} instances, fewer than the window ({}); falling back to offline mode",
            source.len(),
            cfg.omega
        );
        log::warn!("{msg}");
        warnings.push(msg);
        effective = Mode::Offline;
    }

    let mut update_times = Vec::new();
    let mut updates: Vec<UpdateStats> = Vec::new();
    let records;
    let init_time;

    if effective == Mode::Offline {
        records = offline_detect(source, cfg.psi, cfg.t, &mut rng)?;
        init_time = started.elapsed();
    } else {
        let omega = cfg.omega;
        let points: Vec<&[f64]> = source[..omega].iter().map(|i| i.point.coords()).collect();
        let mut model = ModelState::init(&points, 0, cfg.psi, cfg.t, &mut rng)?;
        let mut out = Vec::with_capacity(source.len());
        score_window_rows(&model, source, 0..omega, 0, &mut out);
        init_time = started.elapsed();

        let mut next = omega;
        let mut step_no = 0u64;
        while next < source.len() {
            let end = (next + cfg.step).min(source.len());
            let batch: Vec<&[f64]> = source[next..end].iter().map(|i| i.point.coords()).collect();
            step_no += 1;
            let stats = match effective {
                Mode::Incremental => model.update_incremental(&batch, &mut rng)?,
                _ => model.update_retrain(&batch, &mut rng)?,
            };
            let l = end - next;
            score_window_rows(&model, source, omega - l..omega, step_no, &mut out);
            update_times.push(stats.wall_time);
            updates.push(stats);
            next = end;
        }
        records = out;
    }

    let mut secs: Vec<f64> = update_times.iter().map(Duration::as_secs_f64).collect();
    secs.sort_by(f64::total_cmp);
    let n_up = updates.len().max(1) as f64;
    let metrics = RunMetrics {
        mode: effective,
        omega: cfg.omega,
        step: cfg.step,
        psi: cfg.psi,
        t: cfg.t,
        seed: cfg.seed,
        instances: source.len(),
        updates: updates.len(),
        total_time_secs: started.elapsed().as_secs_f64(),
        init_time_secs: init_time.as_secs_f64(),
        update_time_mean_secs: secs.iter().sum::<f64>() / n_up,
        update_time_median_secs: quantile(&secs, 0.5),
        update_time_p95_secs: quantile(&secs, 0.95),
        update_time_max_secs: secs.last().copied().unwrap_or(0.0),
        replaced_samples_mean: updates.iter().map(|u| u.replaced_samples as f64).sum::<f64>() / n_up,
        replaced_samples_max: updates.iter().map(|u| u.replaced_samples).max().unwrap_or(0),
        affected_partitionings_mean: updates
            .iter()
            .map(|u| u.affected_partitionings as f64)
            .sum::<f64>()
            / n_up,
        auc: records_auc(&records),
        warnings,
    };
    Ok(RunOutput {
        records,
        metrics,
        update_times,
    })
}

/// `stream_index,normal_score,label,scored_at_step`; an absent label is an
/// empty cell.
pub fn write_records_csv<W: Write>(records: &[ScoreRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "stream_index,normal_score,label,scored_at_step")?;
    for r in records {
        let label = match r.label {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        writeln!(
            w,
            "{},{:?},{},{}",
            r.stream_index, r.normal_score, label, r.scored_at_step
        )?;
    }
    w.flush()
}

#[derive(Serialize)]
struct RecordLine {
    stream_index: u64,
    normal_score: f64,
    label: Option<u8>,
    scored_at_step: u64,
}

pub fn write_records_ndjson<W: Write>(records: &[ScoreRecord], mut w: W) -> std::io::Result<()> {
    for r in records {
        let line = RecordLine {
            stream_index: r.stream_index,
            normal_score: r.normal_score,
            label: r.label.map(u8::from),
            scored_at_step: r.scored_at_step,
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Point;
    use crate::model::recount;

    fn stream(values: &[f64]) -> Vec<LabeledInstance> {
        values
            .iter()
            .map(|&v| LabeledInstance {
                point: Point::new(vec![v]).unwrap(),
                label: Some(false),
            })
            .collect()
    }

    #[test]
    fn single_candidate_replacement() {
        let w = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let mut m = ModelState::with_sample_sets(&w, 0, &[vec![0, 2]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stats = m.update_incremental(&[vec![4.0]], &mut rng).unwrap();
        assert_eq!(stats.replaced_samples, 1);
        assert_eq!(stats.affected_partitionings, 1);
        let mut set = m.sample_sets()[0].clone();
        set.sort_unstable();
        assert_eq!(set, vec![2, 4]);
        assert_eq!(m.window_start(), 1);
        let oracle = ModelState::with_sample_sets(&[[1.0], [2.0], [3.0], [4.0]], 1, &m.sample_sets()).unwrap();
        assert_eq!(m, oracle);
    }

    #[test]
    fn no_expiry_leaves_ensemble_untouched() {
        let w: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let mut m = ModelState::with_sample_sets(&w, 0, &[vec![3, 5], vec![4, 2]]).unwrap();
        let before = m.ensemble().clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let stats = m.update_incremental(&[vec![9.0], vec![2.5]], &mut rng).unwrap();
        assert_eq!(stats.replaced_samples, 0);
        assert_eq!(&before, m.ensemble());
        assert_eq!(recount(&m), m.count_table());
        let rows: Vec<Vec<f64>> = (0..6).map(|r| m.window_row(r).to_vec()).collect();
        assert_eq!(m, ModelState::with_sample_sets(&rows, 2, &m.sample_sets()).unwrap());
    }

    #[test]
    fn retrain_draws_from_new_window() {
        let w: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut m = ModelState::init(&w, 0, 3, 20, &mut rng).unwrap();
        let batch: Vec<Vec<f64>> = (10..14).map(|i| vec![i as f64]).collect();
        m.update_retrain(&batch, &mut rng).unwrap();
        assert!(m.sample_sets().iter().flatten().all(|&s| (4..14).contains(&s)));
        m.validate().unwrap();
    }

    #[test]
    fn retrain_and_incremental_agree_on_equal_sample_sets() {
        let w: Vec<Vec<f64>> = (0..12).map(|i| vec![(i * 5 % 7) as f64, (i % 3) as f64]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut inc = ModelState::init(&w, 0, 4, 6, &mut rng).unwrap();
        let batch: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64 * 1.5, 1.0]).collect();
        inc.update_incremental(&batch, &mut rng).unwrap();
        let mut retrained = ModelState::init(&w, 0, 4, 6, &mut rng).unwrap();
        retrained.update_retrain(&batch, &mut rng).unwrap();
        let rows: Vec<Vec<f64>> = (0..12).map(|r| retrained.window_row(r).to_vec()).collect();
        let pinned = ModelState::with_sample_sets(&rows, retrained.window_start(), &inc.sample_sets()).unwrap();
        assert_eq!(inc, pinned);
    }

    #[test]
    fn batch_validation() {
        let w: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = ModelState::init(&w, 0, 2, 1, &mut rng).unwrap();
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(matches!(m.update_incremental(&empty, &mut rng), Err(IdkError::State(_))));
        let big: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        assert!(matches!(m.update_incremental(&big, &mut rng), Err(IdkError::State(_))));
        assert!(matches!(
            m.update_retrain(&[vec![1.0, 2.0]], &mut rng),
            Err(IdkError::Dimension { .. })
        ));
    }

    #[test]
    fn newest_only_policy_picks_last_arrivals() {
        let w: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64]).collect();
        let mut m = ModelState::with_sample_sets(&w, 0, &[vec![0, 1]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch: Vec<Vec<f64>> = (4..7).map(|i| vec![i as f64 * 1.1]).collect();
        m.update_incremental_with(&batch, &mut rng, ReplacementPolicy::NewestOnly)
            .unwrap();
        let mut set = m.sample_sets()[0].clone();
        set.sort_unstable();
        assert_eq!(set, vec![5, 6]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = StreamConfig::default();
        cfg.validate().unwrap();
        cfg.psi = 1;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("2 <= psi < window"), "{msg}");
        cfg.psi = 2048;
        assert!(cfg.validate().is_err());
        cfg.psi = 4;
        cfg.step = 0;
        assert!(cfg.validate().is_err());
        cfg.step = 2049;
        assert!(cfg.validate().is_err());
        cfg.step = 100;
        cfg.t = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn window_sized_stream_has_no_updates() {
        let src = stream(&(0..16).map(|i| i as f64).collect::<Vec<_>>());
        let cfg = StreamConfig { omega: 16, step: 4, psi: 4, t: 10, seed: 3, mode: Mode::Incremental };
        let out = run_stream(&src, &cfg).unwrap();
        assert_eq!(out.records.len(), 16);
        assert_eq!(out.metrics.updates, 0);
        assert!(out.records.iter().all(|r| r.scored_at_step == 0));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let offline = offline_detect(&src, 4, 10, &mut rng).unwrap();
        assert_eq!(offline, out.records);
    }

    #[test]
    fn one_extra_batch_is_one_update() {
        let src = stream(&(0..20).map(|i| (i as f64).sqrt()).collect::<Vec<_>>());
        let cfg = StreamConfig { omega: 16, step: 4, psi: 3, t: 5, seed: 1, mode: Mode::Incremental };
        let out = run_stream(&src, &cfg).unwrap();
        assert_eq!(out.metrics.updates, 1);
        assert_eq!(out.records.len(), 20);
        for (i, r) in out.records.iter().enumerate() {
            assert_eq!(r.stream_index, i as u64);
            assert_eq!(r.scored_at_step, u64::from(i >= 16));
        }
    }

    #[test]
    fn partial_final_batch() {
        let src = stream(&(0..23).map(|i| (i % 7) as f64).collect::<Vec<_>>());
        for mode in [Mode::Incremental, Mode::Retrain] {
            let cfg = StreamConfig { omega: 10, step: 4, psi: 3, t: 4, seed: 2, mode };
            let out = run_stream(&src, &cfg).unwrap();
            assert_eq!(out.records.len(), 23);
            assert_eq!(out.metrics.updates, 4);
            assert_eq!(out.records.last().unwrap().scored_at_step, 4);
        }
    }

    #[test]
    fn constant_stream_scores_zero() {
        let src = stream(&[7.5; 40]);
        let cfg = StreamConfig { omega: 8, step: 3, psi: 2, t: 6, seed: 0, mode: Mode::Incremental };
        let out = run_stream(&src, &cfg).unwrap();
        assert_eq!(out.records.len(), 40);
        assert!(out.records.iter().all(|r| r.normal_score == 0.0));
    }

    #[test]
    fn short_stream_falls_back_to_offline() {
        let src = stream(&[0.0, 1.0, 2.0, 5.0]);
        let cfg = StreamConfig { omega: 8, step: 2, psi: 2, t: 3, seed: 0, mode: Mode::Incremental };
        let out = run_stream(&src, &cfg).unwrap();
        assert_eq!(out.metrics.mode, Mode::Offline);
        assert_eq!(out.metrics.warnings.len(), 1);
        assert_eq!(out.records.len(), 4);
    }

    #[test]
    fn offline_two_points_score_half() {
        let src = stream(&[1.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let recs = offline_detect(&src, 2, 1, &mut rng).unwrap();
        assert!(recs.iter().all(|r| r.normal_score == 0.5));
        assert!(offline_detect(&src, 3, 1, &mut rng).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let src = stream(&(0..300).map(|i| ((i * 37) % 101) as f64 / 10.0).collect::<Vec<_>>());
        let cfg = StreamConfig { omega: 64, step: 10, psi: 4, t: 12, seed: 77, mode: Mode::Incremental };
        let a = run_stream(&src, &cfg).unwrap();
        let b = run_stream(&src, &cfg).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn csv_and_ndjson_layout() {
        let recs = vec![
            ScoreRecord { stream_index: 0, normal_score: 0.25, label: Some(true), scored_at_step: 0 },
            ScoreRecord { stream_index: 1, normal_score: 0.0, label: None, scored_at_step: 3 },
        ];
        let mut csv = Vec::new();
        write_records_csv(&recs, &mut csv).unwrap();
        assert_eq!(
            String::from_utf8(csv).unwrap(),
            "stream_index,normal_score,label,scored_at_step\n0,0.25,1,0\n1,0.0,,3\n"
        );
        let mut nd = Vec::new();
        write_records_ndjson(&recs, &mut nd).unwrap();
        let text = String::from_utf8(nd).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"stream_index":0,"normal_score":0.25,"label":1,"scored_at_step":0}"#);
        assert_eq!(lines[1], r#"{"stream_index":1,"normal_score":0.0,"label":null,"scored_at_step":3}"#);
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [Mode::Incremental, Mode::Retrain, Mode::Offline] {
            assert_eq!(m.to_string().parse::<Mode>().unwrap(), m);
        }
        assert!("fast".parse::<Mode>().is_err());
    }
}
