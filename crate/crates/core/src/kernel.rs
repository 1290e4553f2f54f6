//! Isolation Kernel feature map built from hypersphere partitionings.
//!
//! A [`Partitioning`] holds ψ sampled points. Each sample is the centre of a
//! ball whose radius is the distance to its nearest co-sampled neighbour. A
//! point maps to the slot of its nearest centre when it lies strictly inside
//! that centre's ball, and to nothing otherwise. An ensemble of `t`
//! independent partitionings yields the compact binary feature map used by
//! the model.
//!
//! All comparisons are carried out on squared Euclidean distances so that
//! nearest-centre search, tie-breaking and ball membership are evaluated on
//! one quantity. Reported radii are the square roots of the stored values.

use std::ops::Deref;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{IdkError, Result};

/// A finite, non-empty real vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(IdkError::param("a point needs at least one coordinate"));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(IdkError::param(format!(
                "coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(Point(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Point {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Point {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = IdkError;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

/// Squared Euclidean distance. Low dimensions get unrolled paths; every
/// path sums the squared differences left to right, so results are
/// identical whichever path runs.
#[inline(always)]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    match (a, b) {
        ([a0], [b0]) => {
            let d0 = a0 - b0;
            d0 * d0
        }
        ([a0, a1], [b0, b1]) => {
            let (d0, d1) = (a0 - b0, a1 - b1);
            d0 * d0 + d1 * d1
        }
        ([a0, a1, a2], [b0, b1, b2]) => {
            let (d0, d1, d2) = (a0 - b0, a1 - b1, a2 - b2);
            d0 * d0 + d1 * d1 + d2 * d2
        }
        _ => a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                let d = x - y;
                d * d
            })
            .sum(),
    }
}

/// Same summation order as [`sq_dist`], for a dimension known at compile
/// time.
#[inline(always)]
pub(crate) fn sq_dist_fixed<const D: usize>(a: &[f64], b: &[f64]) -> f64 {
    let (a, b): (&[f64; D], &[f64; D]) = (a.try_into().unwrap(), b.try_into().unwrap());
    let d = a[0] - b[0];
    let mut acc = d * d;
    for i in 1..D {
        let d = a[i] - b[i];
        acc += d * d;
    }
    acc
}

#[inline(always)]
fn nearest_fixed<const D: usize>(centers: &[f64], x: &[f64]) -> (usize, f64) {
    let x: &[f64; D] = x.try_into().expect("point dimension matches the partitioning");
    let (centers, _) = centers.as_chunks::<D>();
    let mut best = 0;
    let mut best_sq = f64::INFINITY;
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist_fixed::<D>(x, c);
        let better = d < best_sq;
        best_sq = if better { d } else { best_sq };
        best = if better { k } else { best };
    }
    (best, best_sq)
}

/// Borrowed view of one sample of a partitioning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSlot<'a> {
    pub point: &'a [f64],
    pub source_index: u64,
    pub radius: f64,
}

/// Squared nearest-neighbour distance of every centre within a flat
/// `psi × dim` buffer.
fn nearest_neighbour_sq(centers: &[f64], dim: usize) -> Vec<f64> {
    let psi = centers.len() / dim;
    let mut out = vec![f64::INFINITY; psi];
    for i in 0..psi {
        let ci = &centers[i * dim..(i + 1) * dim];
        for j in (i + 1)..psi {
            let d = sq_dist(ci, &centers[j * dim..(j + 1) * dim]);
            if d < out[i] {
                out[i] = d;
            }
            if d < out[j] {
                out[j] = d;
            }
        }
    }
    out
}

fn check_dims<P: AsRef<[f64]>>(points: impl IntoIterator<Item = P>, dim: usize) -> Result<()> {
    for p in points {
        let got = p.as_ref().len();
        if got != dim {
            return Err(IdkError::Dimension { expected: dim, got });
        }
    }
    Ok(())
}

/// Radius of each point's ball: the minimum Euclidean distance to every
/// other point in the set.
pub fn compute_radii<P: AsRef<[f64]>>(points: &[P]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(IdkError::param(format!(
            "radii need at least 2 samples, got {}",
            points.len()
        )));
    }
    let dim = points[0].as_ref().len();
    if dim == 0 {
        return Err(IdkError::param("samples must have at least one coordinate"));
    }
    check_dims(points.iter(), dim)?;
    let flat: Vec<f64> = points.iter().flat_map(|p| p.as_ref().iter().copied()).collect();
    Ok(nearest_neighbour_sq(&flat, dim)
        .into_iter()
        .map(f64::sqrt)
        .collect())
}

/// One random hypersphere partitioning of the feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct Partitioning {
    dim: usize,
    centers: Vec<f64>,
    sources: Vec<u64>,
    radii_sq: Vec<f64>,
}

impl Partitioning {
    /// Builds a partitioning from explicit `(source_index, point)` samples,
    /// keeping the given slot order.
    pub fn from_samples<P: AsRef<[f64]>>(samples: &[(u64, P)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(IdkError::param(format!(
                "psi must be at least 2, got {}",
                samples.len()
            )));
        }
        let dim = samples[0].1.as_ref().len();
        if dim == 0 {
            return Err(IdkError::param("samples must have at least one coordinate"));
        }
        check_dims(samples.iter().map(|s| &s.1), dim)?;
        let mut sources: Vec<u64> = samples.iter().map(|s| s.0).collect();
        let mut sorted = sources.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(IdkError::param("sample source indices must be distinct"));
        }
        let centers: Vec<f64> = samples
            .iter()
            .flat_map(|s| s.1.as_ref().iter().copied())
            .collect();
        sources.shrink_to_fit();
        Ok(Self::from_parts(dim, centers, sources))
    }

    /// Unchecked constructor for callers that already validated the samples.
    pub(crate) fn from_parts(dim: usize, centers: Vec<f64>, sources: Vec<u64>) -> Self {
        let radii_sq = nearest_neighbour_sq(&centers, dim);
        Partitioning {
            dim,
            centers,
            sources,
            radii_sq,
        }
    }

    pub(crate) fn radii_sq(&self) -> &[f64] {
        &self.radii_sq
    }

    pub fn psi(&self) -> usize {
        self.sources.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn center(&self, slot: usize) -> &[f64] {
        &self.centers[slot * self.dim..(slot + 1) * self.dim]
    }

    pub fn radius(&self, slot: usize) -> f64 {
        self.radii_sq[slot].sqrt()
    }

    pub fn source_indices(&self) -> &[u64] {
        &self.sources
    }

    pub fn slot(&self, slot: usize) -> SampleSlot<'_> {
        SampleSlot {
            point: self.center(slot),
            source_index: self.sources[slot],
            radius: self.radius(slot),
        }
    }

    pub fn slots(&self) -> impl Iterator<Item = SampleSlot<'_>> + '_ {
        (0..self.psi()).map(move |i| self.slot(i))
    }

    pub fn radii(&self) -> Vec<f64> {
        self.radii_sq.iter().map(|r| r.sqrt()).collect()
    }

    /// Nearest centre and its squared distance. Ties go to the lowest slot.
    #[inline]
    pub(crate) fn nearest(&self, x: &[f64]) -> (usize, f64) {
        match self.dim {
            1 => nearest_fixed::<1>(&self.centers, x),
            2 => nearest_fixed::<2>(&self.centers, x),
            3 => nearest_fixed::<3>(&self.centers, x),
            _ => {
                let mut best = 0;
                let mut best_sq = f64::INFINITY;
                for (k, c) in self.centers.chunks_exact(self.dim).enumerate() {
                    let d = sq_dist(x, c);
                    if d < best_sq {
                        best_sq = d;
                        best = k;
                    }
                }
                (best, best_sq)
            }
        }
    }

    /// Ball membership for a point whose nearest centre is `slot`.
    #[inline]
    pub(crate) fn member(&self, slot: usize, sq: f64) -> Option<usize> {
        (sq < self.radii_sq[slot]).then_some(slot)
    }

    #[inline]
    pub(crate) fn assign_unchecked(&self, x: &[f64]) -> Option<usize> {
        let (k, sq) = self.nearest(x);
        self.member(k, sq)
    }

    /// Slot whose ball contains `x`, where the slot must also be the centre
    /// nearest to `x`.
    pub fn assign(&self, x: &[f64]) -> Result<Option<usize>> {
        if x.len() != self.dim {
            return Err(IdkError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.assign_unchecked(x))
    }

    /// Overwrites the `expired` slots in place with `replacements` and
    /// recomputes the radius of every slot.
    pub fn replace_samples<P: AsRef<[f64]>>(
        &mut self,
        expired: &[usize],
        replacements: &[(u64, P)],
    ) -> Result<()> {
        if expired.len() != replacements.len() {
            return Err(IdkError::param(format!(
                "{} expired slots but {} replacements",
                expired.len(),
                replacements.len()
            )));
        }
        if expired.is_empty() {
            return Ok(());
        }
        let psi = self.psi();
        let mut is_expired = vec![false; psi];
        for &e in expired {
            if e >= psi {
                return Err(IdkError::param(format!("slot {e} out of range for psi={psi}")));
            }
            if std::mem::replace(&mut is_expired[e], true) {
                return Err(IdkError::param(format!("slot {e} listed twice")));
            }
        }
        check_dims(replacements.iter().map(|r| &r.1), self.dim)?;
        let mut incoming: Vec<u64> = replacements.iter().map(|r| r.0).collect();
        incoming.sort_unstable();
        if incoming.windows(2).any(|w| w[0] == w[1]) {
            return Err(IdkError::param("replacement source indices must be distinct"));
        }
        let clash = self
            .sources
            .iter()
            .enumerate()
            .any(|(k, s)| !is_expired[k] && incoming.binary_search(s).is_ok());
        if clash {
            return Err(IdkError::param(
                "replacement source index collides with a surviving sample",
            ));
        }
        self.overwrite(expired, replacements.iter().map(|(s, p)| (*s, p.as_ref())));
        Ok(())
    }

    pub(crate) fn overwrite<'a>(
        &mut self,
        expired: &[usize],
        replacements: impl Iterator<Item = (u64, &'a [f64])>,
    ) {
        let dim = self.dim;
        for (&slot, (source, point)) in expired.iter().zip(replacements) {
            self.sources[slot] = source;
            self.centers[slot * dim..(slot + 1) * dim].copy_from_slice(point);
        }
        self.radii_sq = nearest_neighbour_sq(&self.centers, dim);
    }
}

/// Draws ψ distinct window positions uniformly and builds a partitioning
/// from them.
pub fn build_partitioning<P, R>(window: &[(u64, P)], psi: usize, rng: &mut R) -> Result<Partitioning>
where
    P: AsRef<[f64]>,
    R: Rng + ?Sized,
{
    if window.is_empty() {
        return Err(IdkError::param("cannot sample from an empty window"));
    }
    if psi < 2 || psi > window.len() {
        return Err(IdkError::param(format!(
            "psi must satisfy 2 <= psi <= window size ({}), got {psi}",
            window.len()
        )));
    }
    let picked: Vec<(u64, &[f64])> = index::sample(rng, window.len(), psi)
        .into_iter()
        .map(|i| (window[i].0, window[i].1.as_ref()))
        .collect();
    Partitioning::from_samples(&picked)
}

/// `t` independent partitionings sharing ψ and dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionEnsemble {
    partitionings: Vec<Partitioning>,
}

impl PartitionEnsemble {
    pub fn new(partitionings: Vec<Partitioning>) -> Result<Self> {
        let first = partitionings
            .first()
            .ok_or_else(|| IdkError::param("an ensemble needs t >= 1 partitionings"))?;
        let (psi, dim) = (first.psi(), first.dim());
        if partitionings.iter().any(|p| p.psi() != psi || p.dim() != dim) {
            return Err(IdkError::param(
                "all partitionings must share psi and dimensionality",
            ));
        }
        Ok(PartitionEnsemble { partitionings })
    }

    pub fn t(&self) -> usize {
        self.partitionings.len()
    }

    pub fn psi(&self) -> usize {
        self.partitionings[0].psi()
    }

    pub fn dim(&self) -> usize {
        self.partitionings[0].dim()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Partitioning> {
        self.partitionings.iter()
    }

    pub fn get(&self, j: usize) -> Option<&Partitioning> {
        self.partitionings.get(j)
    }

    pub fn as_slice(&self) -> &[Partitioning] {
        &self.partitionings
    }

    pub(crate) fn as_mut_slice(&mut self) -> &mut [Partitioning] {
        &mut self.partitionings
    }

    /// Compact feature map of `x`: one optional slot per partitioning.
    pub fn feature_map(&self, x: &[f64]) -> Result<Vec<Option<usize>>> {
        if x.len() != self.dim() {
            return Err(IdkError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(self.iter().map(|p| p.assign_unchecked(x)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn part(points: &[&[f64]]) -> Partitioning {
        let samples: Vec<(u64, Vec<f64>)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (i as u64, p.to_vec()))
            .collect();
        Partitioning::from_samples(&samples).unwrap()
    }

    #[test]
    fn radii_from_pairwise_distances() {
        assert_eq!(compute_radii(&[[0.0], [1.0], [4.0]]).unwrap(), vec![1.0, 1.0, 3.0]);
        assert_eq!(compute_radii(&[[2.5], [2.5]]).unwrap(), vec![0.0, 0.0]);
        assert_eq!(compute_radii(&[[0.0, 0.0], [3.0, 4.0]]).unwrap(), vec![5.0, 5.0]);
        assert!(matches!(compute_radii(&[[1.0]]), Err(IdkError::Parameter(_))));
    }

    #[test]
    fn pinned_pair_from_three_point_window() {
        let p = part(&[&[0.0], &[1.0]]);
        assert_eq!(p.radii(), vec![1.0, 1.0]);
        assert_eq!(p.source_indices(), &[0, 1]);
    }

    #[test]
    fn psi_equal_to_window_takes_everything() {
        let window: Vec<(u64, Vec<f64>)> = (0..5).map(|i| (i as u64 + 10, vec![i as f64])).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = build_partitioning(&window, 5, &mut rng).unwrap();
        let mut got = p.source_indices().to_vec();
        got.sort_unstable();
        assert_eq!(got, vec![10, 11, 12, 13, 14]);
    }

    #[test]
    fn psi_bounds_are_enforced() {
        let window: Vec<(u64, Vec<f64>)> = (0..3).map(|i| (i as u64, vec![i as f64])).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(build_partitioning(&window, 1, &mut rng).is_err());
        assert!(build_partitioning(&window, 4, &mut rng).is_err());
        let empty: Vec<(u64, Vec<f64>)> = Vec::new();
        assert!(build_partitioning(&empty, 2, &mut rng).is_err());
    }

    #[test]
    fn assign_nearest_then_membership() {
        let p = part(&[&[0.0], &[1.0]]);
        assert_eq!(p.assign(&[0.0]).unwrap(), Some(0));
        assert_eq!(p.assign(&[4.0]).unwrap(), None);
        assert!(matches!(
            p.assign(&[0.0, 1.0]),
            Err(IdkError::Dimension { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn coincident_slots_match_nothing() {
        let p = part(&[&[3.0], &[3.0]]);
        assert_eq!(p.assign(&[3.0]).unwrap(), None);
    }

    #[test]
    fn ties_go_to_lowest_slot() {
        // x = 0 is equidistant (2) from slots 0 and 2; their radii are 4.
        let p = part(&[&[-2.0], &[10.0], &[2.0]]);
        assert_eq!(p.radii(), vec![4.0, 8.0, 4.0]);
        assert_eq!(p.assign(&[0.0]).unwrap(), Some(0));
    }

    #[test]
    fn farther_ball_does_not_count() {
        // x = 0.9 lies inside slot 0's big ball but is nearer to slot 1,
        // whose ball is too small to hold it.
        let p = part(&[&[0.0], &[1.0], &[1.05]]);
        assert!((p.radius(0) - 1.0).abs() < 1e-15);
        assert_eq!(p.assign(&[0.9]).unwrap(), None);
    }

    #[test]
    fn replace_recomputes_every_radius() {
        let mut p = part(&[&[0.0], &[1.0], &[4.0]]);
        assert_eq!(p.radii(), vec![1.0, 1.0, 3.0]);
        p.replace_samples(&[2], &[(7, vec![0.5])]).unwrap();
        assert_eq!(p.radii(), vec![0.5, 0.5, 0.5]);
        assert_eq!(p.source_indices(), &[0, 1, 7]);
        assert_eq!(p.center(2), &[0.5]);
    }

    #[test]
    fn empty_replacement_is_identity() {
        let mut p = part(&[&[0.0], &[1.0], &[4.0]]);
        let before = p.clone();
        p.replace_samples::<Vec<f64>>(&[], &[]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn replacement_validation() {
        let mut p = part(&[&[0.0], &[1.0], &[4.0]]);
        assert!(p.replace_samples(&[0, 1], &[(9, vec![1.0])]).is_err());
        // source 1 survives, so it cannot come back as a replacement
        assert!(p.replace_samples(&[0], &[(1, vec![1.0])]).is_err());
        assert!(p.replace_samples(&[0, 2], &[(8, vec![1.0]), (8, vec![2.0])]).is_err());
        assert!(p.replace_samples(&[0, 0], &[(8, vec![1.0]), (9, vec![2.0])]).is_err());
        assert!(p.replace_samples(&[5], &[(8, vec![1.0])]).is_err());
        // an expired slot's own source may be re-used
        p.replace_samples(&[0], &[(0, vec![-1.0])]).unwrap();
    }

    #[test]
    fn replace_all_equals_fresh_build() {
        let mut p = part(&[&[0.0], &[1.0], &[4.0]]);
        let fresh: Vec<(u64, Vec<f64>)> = vec![(5, vec![2.0]), (6, vec![-3.0]), (7, vec![9.0])];
        p.replace_samples(&[0, 1, 2], &fresh).unwrap();
        assert_eq!(p, Partitioning::from_samples(&fresh).unwrap());
    }

    #[test]
    fn from_samples_rejects_duplicates() {
        let samples = vec![(1u64, vec![0.0]), (1u64, vec![1.0])];
        assert!(Partitioning::from_samples(&samples).is_err());
    }

    #[test]
    fn point_validation() {
        assert!(Point::new(vec![]).is_err());
        assert!(Point::new(vec![1.0, f64::NAN]).is_err());
        assert!(Point::new(vec![f64::INFINITY]).is_err());
        assert_eq!(Point::new(vec![1.0, 2.0]).unwrap().dim(), 2);
    }

    fn samples_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..4).prop_flat_map(|d| {
            prop::collection::vec(
                prop::collection::vec((-4i32..5).prop_map(|v| v as f64 * 0.5), d),
                2..10,
            )
        })
    }

    proptest! {
        #[test]
        fn unrolled_distance_matches_generic_sum(
            pair in (1usize..6).prop_flat_map(|d| (
                prop::collection::vec(-1e3f64..1e3, d),
                prop::collection::vec(-1e3f64..1e3, d),
            ))
        ) {
            let (a, b) = pair;
            let generic: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
            prop_assert_eq!(sq_dist(&a, &b).to_bits(), generic.to_bits());
        }

        #[test]
        fn radii_are_permutation_equivariant(points in samples_strategy(), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            let radii = compute_radii(&points).unwrap();
            let mut order: Vec<usize> = (0..points.len()).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let permuted: Vec<Vec<f64>> = order.iter().map(|&i| points[i].clone()).collect();
            let permuted_radii = compute_radii(&permuted).unwrap();
            for (k, &i) in order.iter().enumerate() {
                prop_assert_eq!(permuted_radii[k], radii[i]);
            }
        }

        #[test]
        fn samples_fall_in_their_own_ball(points in samples_strategy()) {
            let samples: Vec<(u64, Vec<f64>)> =
                points.iter().cloned().enumerate().map(|(i, p)| (i as u64, p)).collect();
            let p = Partitioning::from_samples(&samples).unwrap();
            for i in 0..p.psi() {
                let got = p.assign(p.center(i)).unwrap();
                if p.radius(i) > 0.0 {
                    prop_assert_eq!(got, Some(i));
                } else {
                    prop_assert_eq!(got, None);
                }
            }
        }

        #[test]
        fn replacement_matches_rebuild_up_to_order(
            points in samples_strategy(),
            extra in prop::collection::vec((-4i32..5).prop_map(|v| v as f64 * 0.5), 1..4),
            mask in prop::collection::vec(any::<bool>(), 10),
        ) {
            let dim = points[0].len();
            let samples: Vec<(u64, Vec<f64>)> =
                points.iter().cloned().enumerate().map(|(i, p)| (i as u64, p)).collect();
            let mut p = Partitioning::from_samples(&samples).unwrap();
            let expired: Vec<usize> = (0..p.psi()).filter(|&i| mask[i]).collect();
            let repl: Vec<(u64, Vec<f64>)> = expired
                .iter()
                .enumerate()
                .map(|(n, _)| (100 + n as u64, (0..dim).map(|c| extra[(n + c) % extra.len()]).collect()))
                .collect();
            p.replace_samples(&expired, &repl).unwrap();

            let mut union: Vec<(u64, Vec<f64>)> = samples
                .iter()
                .enumerate()
                .filter(|(i, _)| !mask[*i])
                .map(|(_, s)| s.clone())
                .chain(repl.iter().cloned())
                .collect();
            union.sort_by_key(|s| s.0);
            let rebuilt = Partitioning::from_samples(&union).unwrap();
            let mut got: Vec<(u64, Vec<f64>, f64)> =
                p.slots().map(|s| (s.source_index, s.point.to_vec(), s.radius)).collect();
            got.sort_by_key(|s| s.0);
            let want: Vec<(u64, Vec<f64>, f64)> =
                rebuilt.slots().map(|s| (s.source_index, s.point.to_vec(), s.radius)).collect();
            prop_assert_eq!(got, want);
        }
    }
}
