//! Dataset ingestion, shuffling and the synthetic two-cluster drift stream.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{IdkError, Result};
use crate::kernel::Point;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub point: Point,
    /// `Some(true)` marks an anomaly.
    pub label: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub name: String,
    pub dim: usize,
    pub instances: Vec<LabeledInstance>,
}

impl LabeledDataset {
    pub fn new(name: impl Into<String>, instances: Vec<LabeledInstance>) -> Result<Self> {
        let dim = instances
            .first()
            .map(|i| i.point.dim())
            .ok_or_else(|| IdkError::Dataset("dataset is empty".into()))?;
        if let Some(i) = instances.iter().position(|i| i.point.dim() != dim) {
            return Err(IdkError::Dataset(format!(
                "instance {i} has {} features, expected {dim}",
                instances[i].point.dim()
            )));
        }
        Ok(LabeledDataset {
            name: name.into(),
            dim,
            instances,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn anomaly_count(&self) -> usize {
        self.instances.iter().filter(|i| i.label == Some(true)).count()
    }

    /// Writes `x0,..,x{d-1},label` with a header row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| IdkError::io(path, e))?;
        self.write_csv_to(BufWriter::new(file))
            .map_err(|e| IdkError::io(path, e))
    }

    pub fn write_csv_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.dim).map(|c| format!("x{c}")).collect();
        writeln!(w, "{},label", header.join(","))?;
        for inst in &self.instances {
            for c in inst.point.coords() {
                write!(w, "{c:?},")?;
            }
            match inst.label {
                Some(true) => writeln!(w, "1")?,
                Some(false) => writeln!(w, "0")?,
                None => writeln!(w)?,
            }
        }
        w.flush()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    /// Requires a header row.
    Name(String),
    /// Every column is a feature.
    Unlabeled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Normalization {
    #[default]
    None,
    /// Per-feature min-max fitted on the first `n` rows, applied to all.
    MinMaxFirstWindow(usize),
}

#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    pub label: LabelColumn,
    pub has_header: bool,
    pub normalize: Normalization,
}

fn parse_label(cell: &str) -> Option<bool> {
    match cell.trim() {
        "0" => Some(false),
        "1" => Some(true),
        other => match other.parse::<f64>() {
            Ok(0.0) => Some(false),
            Ok(1.0) => Some(true),
            _ => None,
        },
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| IdkError::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    read_csv(file, &name, opts)
}

pub fn read_csv<R: std::io::Read>(reader: R, name: &str, opts: &CsvOptions) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(opts.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let named_label = match &opts.label {
        LabelColumn::Name(n) => {
            if !opts.has_header {
                return Err(IdkError::Dataset(format!(
                    "label column '{n}' given by name but the file has no header"
                )));
            }
            let headers = rdr
                .headers()
                .map_err(|e| IdkError::Dataset(e.to_string()))?;
            let idx = headers
                .iter()
                .position(|h| h == n)
                .ok_or_else(|| IdkError::Dataset(format!("no column named '{n}'")))?;
            Some(idx)
        }
        _ => None,
    };

    let mut instances = Vec::new();
    let mut width = None;
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IdkError::Ingestion {
            row,
            column: 0,
            message: e.to_string(),
        })?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let n = rec.len();
        match width {
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(IdkError::Ingestion {
                    row,
                    column: n.min(w),
                    message: format!("expected {w} columns, found {n}"),
                })
            }
            _ => {}
        }
        let label_idx = match &opts.label {
            LabelColumn::Last => Some(n - 1),
            LabelColumn::Index(k) => Some(*k),
            LabelColumn::Name(_) => named_label,
            LabelColumn::Unlabeled => None,
        };
        if let Some(k) = label_idx {
            if k >= n {
                return Err(IdkError::Ingestion {
                    row,
                    column: k,
                    message: format!("label column {k} missing in a row of {n} columns"),
                });
            }
        }
        let mut coords = Vec::with_capacity(n);
        let mut label = None;
        for (column, cell) in rec.iter().enumerate() {
            if Some(column) == label_idx {
                label = Some(parse_label(cell).ok_or_else(|| IdkError::Ingestion {
                    row,
                    column,
                    message: format!("label '{cell}' is not 0 or 1"),
                })?);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| IdkError::Ingestion {
                row,
                column,
                message: format!("'{cell}' is not a number"),
            })?;
            if !v.is_finite() {
                return Err(IdkError::Ingestion {
                    row,
                    column,
                    message: format!("'{cell}' is not finite"),
                });
            }
            coords.push(v);
        }
        if coords.is_empty() {
            return Err(IdkError::Ingestion {
                row,
                column: 0,
                message: "row has no feature columns".into(),
            });
        }
        instances.push(LabeledInstance {
            point: Point::new(coords)?,
            label,
        });
    }

    let mut ds = LabeledDataset::new(name, instances)?;
    if let Normalization::MinMaxFirstWindow(n) = opts.normalize {
        minmax_normalize(&mut ds, n);
    }
    Ok(ds)
}

/// Fits per-feature min and max on the first `n` rows and maps every row
/// through `(x - min) / (max - min)`. Constant features map to 0.
pub fn minmax_normalize(ds: &mut LabeledDataset, n: usize) {
    let fit = &ds.instances[..n.min(ds.len())];
    let mut lo = vec![f64::INFINITY; ds.dim];
    let mut hi = vec![f64::NEG_INFINITY; ds.dim];
    for inst in fit {
        for (c, &v) in inst.point.coords().iter().enumerate() {
            lo[c] = lo[c].min(v);
            hi[c] = hi[c].max(v);
        }
    }
    for inst in &mut ds.instances {
        let coords: Vec<f64> = inst
            .point
            .coords()
            .iter()
            .enumerate()
            .map(|(c, &v)| {
                let range = hi[c] - lo[c];
                if range > 0.0 {
                    (v - lo[c]) / range
                } else {
                    0.0
                }
            })
            .collect();
        inst.point = Point::new(coords).expect("affine image of finite values");
    }
}

/// Uniform random permutation of the rows.
pub fn shuffle_dataset(ds: &LabeledDataset, seed: u64) -> LabeledDataset {
    let mut out = ds.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.instances.shuffle(&mut rng);
    out
}

/// Trajectories of the two cluster centres over normalised time u ∈ [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DriftPath {
    /// Both centres fixed.
    Stationary { a: [f64; 2], b: [f64; 2] },
    /// The first centre travels the arc at angles `start + sweep·u` on a
    /// circle; the second is always diametrically opposite.
    OpposingArcs {
        center: [f64; 2],
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl DriftPath {
    pub fn centers(&self, u: f64) -> ([f64; 2], [f64; 2]) {
        match *self {
            DriftPath::Stationary { a, b } => (a, b),
            DriftPath::OpposingArcs {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let theta = start_angle + sweep * u;
                let (s, c) = theta.sin_cos();
                (
                    [center[0] + radius * c, center[1] + radius * s],
                    [center[0] - radius * c, center[1] - radius * s],
                )
            }
        }
    }

    /// Axis-aligned bounding box `(min, max)` swept by both centres.
    fn extent(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut grow = |p: [f64; 2]| {
            for c in 0..2 {
                lo[c] = lo[c].min(p[c]);
                hi[c] = hi[c].max(p[c]);
            }
        };
        match *self {
            DriftPath::Stationary { a, b } => {
                grow(a);
                grow(b);
            }
            DriftPath::OpposingArcs {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let (a0, a1) = if sweep >= 0.0 {
                    (start_angle, start_angle + sweep)
                } else {
                    (start_angle + sweep, start_angle)
                };
                // Extremes of an arc sit at its ends or at multiples of π/2;
                // the opposite centre's angles are shifted by π.
                let mut angles = vec![a0, a1, a0 + std::f64::consts::PI, a1 + std::f64::consts::PI];
                let first = (a0 / FRAC_PI_2).ceil() as i64;
                let last = ((a1 + std::f64::consts::PI) / FRAC_PI_2).floor() as i64;
                for k in first..=last {
                    let a = k as f64 * FRAC_PI_2;
                    let on_first = a >= a0 && a <= a1;
                    let on_second = a >= a0 + std::f64::consts::PI && a <= a1 + std::f64::consts::PI;
                    if on_first || on_second {
                        angles.push(a);
                    }
                }
                for a in angles {
                    let (s, c) = a.sin_cos();
                    grow([center[0] + radius * c, center[1] + radius * s]);
                }
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoClusterSpec {
    pub n: usize,
    pub anomaly_rate: f64,
    pub cluster_sigma: f64,
    pub drift: DriftPath,
    /// Box `(min, max)` from which anomalies are drawn uniformly.
    pub bounds: ([f64; 2], [f64; 2]),
    pub seed: u64,
}

impl Default for TwoClusterSpec {
    fn default() -> Self {
        TwoClusterSpec {
            n: 100_000,
            anomaly_rate: 0.05,
            cluster_sigma: 0.5,
            drift: DriftPath::OpposingArcs {
                center: [10.0, 10.0],
                radius: 6.0,
                start_angle: FRAC_PI_4,
                sweep: FRAC_PI_2,
            },
            bounds: ([0.0, 0.0], [20.0, 20.0]),
            seed: 0,
        }
    }
}

impl TwoClusterSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(IdkError::param("n must be positive"));
        }
        if !(0.0..0.5).contains(&self.anomaly_rate) {
            return Err(IdkError::param(format!(
                "anomaly rate must lie in [0, 0.5), got {}",
                self.anomaly_rate
            )));
        }
        if !(self.cluster_sigma > 0.0 && self.cluster_sigma.is_finite()) {
            return Err(IdkError::param("cluster sigma must be positive"));
        }
        let (blo, bhi) = self.bounds;
        if (0..2).any(|c| blo[c].partial_cmp(&bhi[c]) != Some(std::cmp::Ordering::Less)) {
            return Err(IdkError::param("bounds must have min < max on both axes"));
        }
        let (lo, hi) = self.drift.extent();
        let pad = 3.0 * self.cluster_sigma;
        if (0..2).any(|c| lo[c] - pad < blo[c] || hi[c] + pad > bhi[c]) {
            return Err(IdkError::param(
                "bounds must contain both drift paths inflated by 3 sigma",
            ));
        }
        Ok(())
    }
}

/// Generates the two-cluster drift stream in stream order.
pub fn gen_two_cluster(spec: &TwoClusterSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.cluster_sigma).expect("sigma validated");
    let (lo, hi) = spec.bounds;
    let mut instances = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let u = i as f64 / spec.n as f64;
        let (coords, anomaly) = if rng.random::<f64>() < spec.anomaly_rate {
            (
                vec![rng.random_range(lo[0]..hi[0]), rng.random_range(lo[1]..hi[1])],
                true,
            )
        } else {
            let (a, b) = spec.drift.centers(u);
            let c = if rng.random::<bool>() { a } else { b };
            (
                vec![c[0] + noise.sample(&mut rng), c[1] + noise.sample(&mut rng)],
                false,
            )
        };
        instances.push(LabeledInstance {
            point: Point::new(coords)?,
            label: Some(anomaly),
        });
    }
    LabeledDataset::new("two-cluster", instances)
}
