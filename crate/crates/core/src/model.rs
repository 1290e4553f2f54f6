//! Model state over the live window: the ensemble, every window row's
//! compact feature map, and the integer running sum of those maps.
//!
//! Window rows live in a ring buffer addressed by `stream_index % ω`, so
//! the rows that depart on a slide occupy exactly the positions the arriving
//! rows will take. Per partitioning the model keeps one packed word per
//! row: the nearest centre in the low bits and, in the top bit, whether the
//! row lies inside that centre's ball.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IdkError, Result};
use crate::kernel::{sq_dist, PartitionEnsemble, Partitioning};

pub(crate) const UNASSIGNED: u32 = u32::MAX;

/// Membership flag of a packed row code.
pub(crate) const INSIDE: u32 = 1 << 31;
pub(crate) const SLOT_MASK: u32 = !INSIDE;

#[inline(always)]
pub(crate) fn pack(slot: usize, inside: bool) -> u32 {
    slot as u32 | ((inside as u32) << 31)
}

/// Packed row code to the [`UNASSIGNED`]-or-slot form.
#[inline]
pub(crate) fn unpack(code: u32) -> u32 {
    if code & INSIDE != 0 {
        code & SLOT_MASK
    } else {
        UNASSIGNED
    }
}

#[inline]
pub(crate) fn decode(raw: u32) -> Option<usize> {
    (raw != UNASSIGNED).then_some(raw as usize)
}

/// Window-size × t table of optional slot indices, rows in window order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignmentMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<u32>,
}

impl AssignmentMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> Option<usize> {
        decode(self.entries[row * self.cols + col])
    }

    pub fn row(&self, row: usize) -> impl Iterator<Item = Option<usize>> + '_ {
        self.entries[row * self.cols..(row + 1) * self.cols]
            .iter()
            .map(|&r| decode(r))
    }
}

/// t × ψ histogram of assignments: the running sum of the window's
/// feature vectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountTable {
    t: usize,
    psi: usize,
    counts: Vec<u32>,
}

impl CountTable {
    pub fn zeros(t: usize, psi: usize) -> Self {
        CountTable {
            t,
            psi,
            counts: vec![0; t * psi],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let t = rows.len();
        let psi = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != psi) {
            return Err(IdkError::param("count rows must share one length"));
        }
        Ok(CountTable {
            t,
            psi,
            counts: rows.into_iter().flatten().collect(),
        })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn psi(&self) -> usize {
        self.psi
    }

    pub fn get(&self, j: usize, k: usize) -> u32 {
        self.counts[j * self.psi + k]
    }

    pub fn row(&self, j: usize) -> &[u32] {
        &self.counts[j * self.psi..(j + 1) * self.psi]
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.t).map(|j| self.row(j).to_vec()).collect()
    }
}

/// Per-partitioning storage, indexed by ring position.
#[derive(Debug, Clone)]
pub(crate) struct Column {
    /// Packed nearest slot and membership flag per row.
    pub(crate) code: Vec<u32>,
    /// Squared distance from each row to its nearest centre. Only the
    /// incremental update reads it; see [`ModelState::near_fresh`].
    pub(crate) near_sq: Vec<f64>,
    pub(crate) counts: Vec<u32>,
}

// The distance cache is derived from the rest and may be stale.
impl PartialEq for Column {
    fn eq(&self, other: &Self) -> bool {
        self.code == other.code && self.counts == other.counts
    }
}

impl Column {
    fn empty(omega: usize, psi: usize) -> Self {
        Column {
            code: vec![0; omega],
            near_sq: vec![0.0; omega],
            counts: vec![0; psi],
        }
    }

    /// Full nearest-centre search for the row at `pos`, returning its new
    /// code. Counts are not touched.
    #[inline]
    pub(crate) fn refresh(&mut self, pos: usize, x: &[f64], p: &Partitioning) -> u32 {
        let (k, sq) = p.nearest(x);
        let code = pack(k, sq < p.radii_sq()[k]);
        self.code[pos] = code;
        self.near_sq[pos] = sq;
        code
    }

    /// [`Column::refresh`] without updating the distance cache.
    #[inline]
    fn refresh_code(&mut self, pos: usize, x: &[f64], p: &Partitioning) -> u32 {
        let (k, sq) = p.nearest(x);
        let code = pack(k, sq < p.radii_sq()[k]);
        self.code[pos] = code;
        code
    }

    // Whether a row is assigned is data dependent and close to a coin
    // flip, so the count updates are written without branches.
    #[inline(always)]
    pub(crate) fn add(&mut self, code: u32) {
        self.counts[(code & SLOT_MASK) as usize] += code >> 31;
    }

    #[inline(always)]
    pub(crate) fn remove(&mut self, code: u32) {
        self.counts[(code & SLOT_MASK) as usize] -= code >> 31;
    }
}

/// The model over the current window: ensemble, feature maps and running
/// sum.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub(crate) dim: usize,
    pub(crate) omega: usize,
    pub(crate) window_start: u64,
    pub(crate) window: Vec<f64>,
    pub(crate) ensemble: PartitionEnsemble,
    pub(crate) columns: Vec<Column>,
    /// Whether every column's `near_sq` matches its codes. A full rebuild
    /// for retraining leaves the cache alone, since only the incremental
    /// update uses it; that update refills it first when needed.
    pub(crate) near_fresh: bool,
}

impl PartialEq for ModelState {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.omega == other.omega
            && self.window_start == other.window_start
            && self.window == other.window
            && self.ensemble == other.ensemble
            && self.columns == other.columns
    }
}

fn validate_window<P: AsRef<[f64]>>(window: &[P]) -> Result<usize> {
    let dim = window
        .first()
        .map(|p| p.as_ref().len())
        .ok_or_else(|| IdkError::param("window is empty"))?;
    if dim == 0 {
        return Err(IdkError::param("points must have at least one coordinate"));
    }
    for p in window {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(IdkError::Dimension {
                expected: dim,
                got: p.len(),
            });
        }
        if p.iter().any(|c| !c.is_finite()) {
            return Err(IdkError::param("window contains a non-finite coordinate"));
        }
    }
    Ok(dim)
}

impl ModelState {
    /// Builds the initial model on `window`, whose first row carries stream
    /// index `window_start`. Each of the `t` partitionings draws ψ distinct
    /// rows uniformly from the window.
    pub fn init<P, R>(window: &[P], window_start: u64, psi: usize, t: usize, rng: &mut R) -> Result<Self>
    where
        P: AsRef<[f64]>,
        R: Rng + ?Sized,
    {
        let mut model = Self::empty_with_window(window, window_start, psi, t)?;
        model.resample_all(rng);
        model.fill_distances();
        Ok(model)
    }

    /// Builds a model whose partitionings use exactly the given sample
    /// source indices (in slot order). Assignments are computed from
    /// scratch, which makes this the reference construction for checking
    /// incrementally maintained state.
    pub fn with_sample_sets<P: AsRef<[f64]>>(
        window: &[P],
        window_start: u64,
        sample_sets: &[Vec<u64>],
    ) -> Result<Self> {
        let psi = sample_sets.first().map_or(0, Vec::len);
        let mut model = Self::empty_with_window(window, window_start, psi, sample_sets.len())?;
        let end = window_start + model.omega as u64;
        let mut parts = Vec::with_capacity(sample_sets.len());
        for set in sample_sets {
            if set.len() != psi {
                return Err(IdkError::param("every sample set must hold psi indices"));
            }
            if let Some(s) = set.iter().find(|&&s| s < window_start || s >= end) {
                return Err(IdkError::param(format!(
                    "sample source {s} outside window [{window_start}, {end})"
                )));
            }
            let samples: Vec<(u64, &[f64])> = set.iter().map(|&s| (s, model.point(s))).collect();
            parts.push(Partitioning::from_samples(&samples)?);
        }
        model.ensemble = PartitionEnsemble::new(parts)?;
        model.rebuild_columns();
        model.fill_distances();
        Ok(model)
    }

    fn empty_with_window<P: AsRef<[f64]>>(
        window: &[P],
        window_start: u64,
        psi: usize,
        t: usize,
    ) -> Result<Self> {
        let dim = validate_window(window)?;
        let omega = window.len();
        if psi < 2 || psi > omega {
            return Err(IdkError::param(format!(
                "psi must satisfy 2 <= psi <= window size ({omega}), got {psi}"
            )));
        }
        if t == 0 {
            return Err(IdkError::param("t must be at least 1"));
        }
        if psi > SLOT_MASK as usize {
            return Err(IdkError::param("psi too large"));
        }
        let mut ring = vec![0.0; omega * dim];
        for (r, p) in window.iter().enumerate() {
            let pos = ((window_start + r as u64) % omega as u64) as usize;
            ring[pos * dim..(pos + 1) * dim].copy_from_slice(p.as_ref());
        }
        // Placeholder partitionings; replaced before the model is returned.
        let placeholder = Partitioning::from_parts(dim, vec![0.0; psi * dim], (0..psi as u64).collect());
        Ok(ModelState {
            dim,
            omega,
            window_start,
            window: ring,
            ensemble: PartitionEnsemble::new(vec![placeholder; t])?,
            columns: vec![Column::empty(omega, psi); t],
            near_fresh: false,
        })
    }

    /// Redraws every partitioning from the current window and recomputes
    /// all feature maps.
    pub(crate) fn resample_all<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (omega, psi, dim) = (self.omega, self.psi(), self.dim);
        let parts: Vec<Partitioning> = (0..self.t())
            .map(|_| {
                let mut centers = Vec::with_capacity(psi * dim);
                let mut sources = Vec::with_capacity(psi);
                for r in index::sample(rng, omega, psi) {
                    let s = self.window_start + r as u64;
                    sources.push(s);
                    centers.extend_from_slice(self.point(s));
                }
                Partitioning::from_parts(dim, centers, sources)
            })
            .collect();
        self.ensemble = PartitionEnsemble::new(parts).expect("t >= 1 and uniform psi");
        self.rebuild_columns();
    }

    pub(crate) fn rebuild_columns(&mut self) {
        let psi = self.psi();
        for (j, p) in self.ensemble.as_slice().iter().enumerate() {
            let col = &mut self.columns[j];
            col.counts.clear();
            col.counts.resize(psi, 0);
            for pos in 0..self.omega {
                let x = &self.window[pos * self.dim..(pos + 1) * self.dim];
                let a = col.refresh_code(pos, x, p);
                col.add(a);
            }
        }
        self.near_fresh = false;
    }

    /// Brings the distance cache in line with the current centres.
    pub(crate) fn fill_distances(&mut self) {
        if self.near_fresh {
            return;
        }
        let dim = self.dim;
        for (p, col) in self.ensemble.as_slice().iter().zip(self.columns.iter_mut()) {
            for (pos, x) in self.window.chunks_exact(dim).enumerate() {
                let k = (col.code[pos] & SLOT_MASK) as usize;
                col.near_sq[pos] = sq_dist(x, p.center(k));
            }
        }
        self.near_fresh = true;
    }

    #[inline]
    pub(crate) fn pos(&self, stream_index: u64) -> usize {
        (stream_index % self.omega as u64) as usize
    }

    /// Coordinates of the window instance with the given stream index.
    /// The index must lie inside the window.
    #[inline]
    pub(crate) fn point(&self, stream_index: u64) -> &[f64] {
        let pos = self.pos(stream_index);
        &self.window[pos * self.dim..(pos + 1) * self.dim]
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn omega(&self) -> usize {
        self.omega
    }

    pub fn psi(&self) -> usize {
        self.ensemble.psi()
    }

    pub fn t(&self) -> usize {
        self.ensemble.t()
    }

    /// Stream index of the oldest window row.
    pub fn window_start(&self) -> u64 {
        self.window_start
    }

    pub fn window_end(&self) -> u64 {
        self.window_start + self.omega as u64
    }

    pub fn ensemble(&self) -> &PartitionEnsemble {
        &self.ensemble
    }

    /// Window row `row` (0 = oldest).
    pub fn window_row(&self, row: usize) -> &[f64] {
        self.point(self.window_start + row as u64)
    }

    pub fn sample_sets(&self) -> Vec<Vec<u64>> {
        self.ensemble
            .iter()
            .map(|p| p.source_indices().to_vec())
            .collect()
    }

    pub fn assignment(&self, row: usize, j: usize) -> Option<usize> {
        let pos = self.pos(self.window_start + row as u64);
        decode(unpack(self.columns[j].code[pos]))
    }

    pub fn assignment_matrix(&self) -> AssignmentMatrix {
        let t = self.t();
        let mut entries = Vec::with_capacity(self.omega * t);
        for r in 0..self.omega {
            let pos = self.pos(self.window_start + r as u64);
            entries.extend(self.columns.iter().map(|c| unpack(c.code[pos])));
        }
        AssignmentMatrix {
            rows: self.omega,
            cols: t,
            entries,
        }
    }

    pub fn count_table(&self) -> CountTable {
        CountTable {
            t: self.t(),
            psi: self.psi(),
            counts: self.columns.iter().flat_map(|c| c.counts.iter().copied()).collect(),
        }
    }

    #[inline]
    pub(crate) fn score_total_at(&self, pos: usize) -> u64 {
        self.columns
            .iter()
            .map(|c| {
                let code = c.code[pos];
                (c.counts[(code & SLOT_MASK) as usize] * (code >> 31)) as u64
            })
            .sum()
    }

    #[inline]
    pub(crate) fn normalise(&self, total: u64) -> f64 {
        total as f64 / (self.t() as f64 * self.omega as f64)
    }

    /// Normal score of window row `row` read off the stored assignments.
    pub fn score_row(&self, row: usize) -> f64 {
        let pos = self.pos(self.window_start + row as u64);
        self.normalise(self.score_total_at(pos))
    }

    /// Normal score of an arbitrary point: (1/t) Σ_j counts[j][a_j] / ω.
    /// Higher means more normal.
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(IdkError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        let total: u64 = self
            .ensemble
            .iter()
            .zip(&self.columns)
            .map(|(p, c)| p.assign_unchecked(x).map_or(0, |k| c.counts[k] as u64))
            .sum();
        Ok(self.normalise(total))
    }

    /// Checks sample legality and running-sum conservation.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = (self.window_start, self.window_end());
        for (j, p) in self.ensemble.iter().enumerate() {
            let mut sources = p.source_indices().to_vec();
            sources.sort_unstable();
            if sources.windows(2).any(|w| w[0] == w[1]) {
                return Err(IdkError::State(format!("partitioning {j} repeats a sample")));
            }
            if sources.iter().any(|&s| s < lo || s >= hi) {
                return Err(IdkError::State(format!(
                    "partitioning {j} holds a sample outside [{lo}, {hi})"
                )));
            }
        }
        if recount(self) != self.count_table() {
            return Err(IdkError::State("running sum disagrees with recount".into()));
        }
        Ok(())
    }
}

/// Recomputes the count table from the assignment matrix.
pub fn recount(m: &ModelState) -> CountTable {
    let matrix = m.assignment_matrix();
    let mut table = CountTable::zeros(m.t(), m.psi());
    for r in 0..matrix.rows() {
        for (j, a) in matrix.row(r).enumerate() {
            if let Some(k) = a {
                table.counts[j * table.psi + k] += 1;
            }
        }
    }
    table
}

/// Distributional similarity of two point sets under the ensemble:
/// (1/t) ⟨mean map of X, mean map of Y⟩.
pub fn idk_similarity<P: AsRef<[f64]>, Q: AsRef<[f64]>>(
    xs: &[P],
    ys: &[Q],
    ensemble: &PartitionEnsemble,
) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(IdkError::param("similarity needs two non-empty sets"));
    }
    let dim = ensemble.dim();
    for got in xs.iter().map(|p| p.as_ref().len()).chain(ys.iter().map(|q| q.as_ref().len())) {
        if got != dim {
            return Err(IdkError::Dimension { expected: dim, got });
        }
    }
    let psi = ensemble.psi();
    let (nx, ny) = (xs.len() as f64, ys.len() as f64);
    let mut total = 0.0;
    let mut hx = vec![0u64; psi];
    let mut hy = vec![0u64; psi];
    for p in ensemble.iter() {
        hx.iter_mut().for_each(|h| *h = 0);
        hy.iter_mut().for_each(|h| *h = 0);
        for x in xs {
            if let Some(k) = p.assign_unchecked(x.as_ref()) {
                hx[k] += 1;
            }
        }
        for y in ys {
            if let Some(k) = p.assign_unchecked(y.as_ref()) {
                hy[k] += 1;
            }
        }
        let dot: f64 = hx
            .iter()
            .zip(&hy)
            .map(|(&a, &b)| (a as f64 / nx) * (b as f64 / ny))
            .sum();
        total += dot;
    }
    Ok(total / ensemble.t() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn line(values: &[f64]) -> Vec<Vec<f64>> {
        values.iter().map(|&v| vec![v]).collect()
    }

    #[test]
    fn pinned_three_point_model() {
        let w = line(&[0.0, 1.0, 4.0]);
        let m = ModelState::with_sample_sets(&w, 0, &[vec![0, 1]]).unwrap();
        assert_eq!(m.count_table().to_rows(), vec![vec![1, 1]]);
        assert_eq!(m.assignment(2, 0), None);
        assert_eq!(m.score(&[0.0]).unwrap(), 1.0 / 3.0);
        assert_eq!(m.score(&[4.0]).unwrap(), 0.0);
        assert_eq!(m.score_row(0), 1.0 / 3.0);
        assert!(matches!(m.score(&[0.0, 0.0]), Err(IdkError::Dimension { .. })));
    }

    #[test]
    fn two_samples_score_half() {
        let w = line(&[2.0, 5.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = ModelState::init(&w, 0, 2, 1, &mut rng).unwrap();
        assert_eq!(m.score_row(0), 0.5);
        assert_eq!(m.score_row(1), 0.5);
    }

    #[test]
    fn unassigned_everywhere_scores_zero() {
        let w = line(&[0.0, 1.0, 2.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = ModelState::init(&w, 0, 3, 8, &mut rng).unwrap();
        assert_eq!(m.score(&[1000.0]).unwrap(), 0.0);
    }

    #[test]
    fn parameter_errors() {
        let w = line(&[0.0, 1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ModelState::init(&w, 0, 2, 0, &mut rng).is_err());
        assert!(ModelState::init(&w, 0, 1, 1, &mut rng).is_err());
        assert!(ModelState::init(&w, 0, 4, 1, &mut rng).is_err());
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(ModelState::init(&empty, 0, 2, 1, &mut rng).is_err());
        let ragged = vec![vec![0.0], vec![1.0, 2.0]];
        assert!(ModelState::init(&ragged, 0, 2, 1, &mut rng).is_err());
        assert!(ModelState::with_sample_sets(&w, 0, &[vec![0, 3]]).is_err());
    }

    #[test]
    fn psi_equal_omega_counts_positive_radius_rows() {
        // 0 and 0 coincide (zero radii), 5 and 9 have positive radii.
        let w = line(&[0.0, 0.0, 5.0, 9.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = ModelState::init(&w, 0, 4, 3, &mut rng).unwrap();
        for j in 0..3 {
            assert_eq!(m.count_table().row(j).iter().sum::<u32>(), 2);
        }
    }

    #[test]
    fn recount_matches_fresh_model() {
        let w: Vec<Vec<f64>> = (0..50).map(|i| vec![(i * 7 % 13) as f64, (i % 5) as f64]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let m = ModelState::init(&w, 100, 6, 10, &mut rng).unwrap();
        assert_eq!(recount(&m), m.count_table());
        m.validate().unwrap();
        for (r, x) in w.iter().enumerate() {
            assert_eq!(m.score_row(r), m.score(x).unwrap());
            for j in 0..10 {
                assert_eq!(m.assignment(r, j), m.ensemble().get(j).unwrap().assign(x).unwrap());
            }
        }
        assert!(m.sample_sets().iter().flatten().all(|&s| (100..150).contains(&s)));
    }

    #[test]
    fn empty_table_recount_is_zero() {
        let table = CountTable::zeros(3, 4);
        assert!(table.to_rows().iter().flatten().all(|&c| c == 0));
    }

    #[test]
    fn scores_are_bounded_and_pure() {
        let w: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64).sin() * 3.0]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = ModelState::init(&w, 0, 4, 25, &mut rng).unwrap();
        let before = m.clone();
        for i in -50..50 {
            let x = [i as f64 * 0.1];
            let s = m.score(&x).unwrap();
            assert!((0.0..=1.0).contains(&s));
            assert_eq!(s.to_bits(), m.score(&x).unwrap().to_bits());
            let scaled = s * 25.0 * 40.0;
            assert!((scaled - scaled.round()).abs() < 1e-9);
        }
        assert_eq!(m, before);
    }

    /// Brute force over hand-built partitionings: the fraction of
    /// partitionings in which x and y land in the same ball.
    #[test]
    fn singleton_similarity_is_shared_slot_fraction() {
        let parts = vec![
            Partitioning::from_samples(&[(0u64, vec![0.0]), (1, vec![1.0])]).unwrap(),
            Partitioning::from_samples(&[(0u64, vec![0.0]), (1, vec![3.0])]).unwrap(),
            Partitioning::from_samples(&[(0u64, vec![0.4]), (1, vec![-0.6])]).unwrap(),
        ];
        let e = PartitionEnsemble::new(parts).unwrap();
        let x = [[0.1]];
        let y = [[0.3]];
        // p0: both nearest 0 (radius 1) -> shared. p1: both slot 0 (radius 3)
        // -> shared. p2: x nearest 0.4 (dist .3 < 1), y nearest 0.4 -> shared.
        let shared = e
            .iter()
            .filter(|p| {
                let a = p.assign(&x[0]).unwrap();
                a.is_some() && a == p.assign(&y[0]).unwrap()
            })
            .count();
        assert_eq!(shared, 3);
        assert_eq!(idk_similarity(&x, &y, &e).unwrap(), 1.0);
        let z = [[2.5]];
        // z: p0 nearest 1.0 at 1.5 > 1 -> none; p1 nearest 3.0, 0.5 < 3 -> slot 1;
        // p2 nearest 0.4 at 2.1 > 1 -> none. Never shared with x.
        assert_eq!(idk_similarity(&x, &z, &e).unwrap(), 0.0);
        let w = [[0.9]];
        // w: p0 slot 1 (0.1 < 1), x slot 0 -> differ; p1 slot 0 -> shared;
        // p2 slot 0 (0.5 < 1) -> shared. Two of three.
        assert_eq!(idk_similarity(&x, &w, &e).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn similarity_symmetry_and_bounds() {
        let data: Vec<Vec<f64>> = (0..30).map(|i| vec![(i as f64 * 0.37).cos(), (i as f64).sqrt()]).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = ModelState::init(&data, 0, 4, 20, &mut rng).unwrap();
        let (xs, ys) = data.split_at(12);
        let a = idk_similarity(xs, ys, m.ensemble()).unwrap();
        let b = idk_similarity(ys, xs, m.ensemble()).unwrap();
        assert!((a - b).abs() < 1e-15);
        let self_sim = idk_similarity(xs, xs, m.ensemble()).unwrap();
        assert!((0.0..=1.0).contains(&self_sim));
        assert!(idk_similarity::<Vec<f64>, Vec<f64>>(&[], ys, m.ensemble()).is_err());
    }
}
