//! Versioned JSON snapshots of a [`ModelState`].
//!
//! A snapshot stores the window in stream order, the sample sets with their
//! centres and squared radii, the per-row assignments and the count table.
//! Loading rebuilds the model from the window and sample sets and insists
//! that everything else matches bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{IdkError, Result};
use crate::model::ModelState;

pub const SNAPSHOT_FORMAT: &str = "idks-snapshot";
pub const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct PartitioningRecord {
    sources: Vec<u64>,
    centers: Vec<Vec<f64>>,
    radii_sq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Snapshot {
    format: String,
    version: u32,
    dim: usize,
    omega: usize,
    psi: usize,
    t: usize,
    window_start: u64,
    window: Vec<Vec<f64>>,
    partitionings: Vec<PartitioningRecord>,
    /// `assignments[row][j]`, `null` for unassigned.
    assignments: Vec<Vec<Option<usize>>>,
    counts: Vec<Vec<u32>>,
}

fn snapshot_of(m: &ModelState) -> Snapshot {
    let omega = m.omega();
    let matrix = m.assignment_matrix();
    Snapshot {
        format: SNAPSHOT_FORMAT.to_string(),
        version: SNAPSHOT_VERSION,
        dim: m.dim(),
        omega,
        psi: m.psi(),
        t: m.t(),
        window_start: m.window_start(),
        window: (0..omega).map(|r| m.window_row(r).to_vec()).collect(),
        partitionings: m
            .ensemble()
            .iter()
            .map(|p| PartitioningRecord {
                sources: p.source_indices().to_vec(),
                centers: (0..p.psi()).map(|k| p.center(k).to_vec()).collect(),
                radii_sq: p.radii_sq().to_vec(),
            })
            .collect(),
        assignments: (0..omega).map(|r| matrix.row(r).collect()).collect(),
        counts: m.count_table().to_rows(),
    }
}

fn mismatch(what: &str) -> IdkError {
    IdkError::Snapshot(format!("{what} disagrees with the state rebuilt from the window"))
}

fn restore(s: Snapshot) -> Result<ModelState> {
    if s.format != SNAPSHOT_FORMAT {
        return Err(IdkError::Snapshot(format!("unknown format {:?}", s.format)));
    }
    if s.version != SNAPSHOT_VERSION {
        return Err(IdkError::Snapshot(format!("unsupported version {}", s.version)));
    }
    if s.window.len() != s.omega || s.partitionings.len() != s.t || s.assignments.len() != s.omega {
        return Err(IdkError::Snapshot("section lengths do not match omega / t".into()));
    }
    if s.window.iter().any(|r| r.len() != s.dim) {
        return Err(IdkError::Snapshot(format!("window rows must have {} coordinates", s.dim)));
    }
    if s.partitionings.iter().any(|p| p.sources.len() != s.psi) {
        return Err(IdkError::Snapshot(format!("every partitioning must hold {} samples", s.psi)));
    }
    let sets: Vec<Vec<u64>> = s.partitionings.iter().map(|p| p.sources.clone()).collect();
    let model = ModelState::with_sample_sets(&s.window, s.window_start, &sets)
        .map_err(|e| IdkError::Snapshot(format!("invalid snapshot: {e}")))?;

    for (p, rec) in model.ensemble().iter().zip(&s.partitionings) {
        let centers_ok = rec.centers.len() == p.psi()
            && rec.centers.iter().enumerate().all(|(k, c)| c.as_slice() == p.center(k));
        if !centers_ok {
            return Err(mismatch("sample centres"));
        }
        if rec.radii_sq != p.radii_sq() {
            return Err(mismatch("sample radii"));
        }
    }
    let matrix = model.assignment_matrix();
    if (0..s.omega).any(|r| matrix.row(r).ne(s.assignments[r].iter().copied())) {
        return Err(mismatch("assignments"));
    }
    if model.count_table().to_rows() != s.counts {
        return Err(mismatch("counts"));
    }
    Ok(model)
}

pub fn save_snapshot_to<W: Write>(m: &ModelState, w: W) -> Result<()> {
    let mut w = BufWriter::new(w);
    serde_json::to_writer(&mut w, &snapshot_of(m))
        .map_err(|e| IdkError::Snapshot(format!("serialising snapshot: {e}")))?;
    w.flush()
        .map_err(|e| IdkError::Snapshot(format!("writing snapshot: {e}")))
}

pub fn load_snapshot_from<R: Read>(r: R) -> Result<ModelState> {
    let snap: Snapshot = serde_json::from_reader(BufReader::new(r))
        .map_err(|e| IdkError::Snapshot(format!("malformed snapshot: {e}")))?;
    restore(snap)
}

pub fn save_snapshot(m: &ModelState, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| IdkError::io(path, e))?;
    save_snapshot_to(m, f)
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<ModelState> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| IdkError::io(path, e))?;
    load_snapshot_from(f)
}
