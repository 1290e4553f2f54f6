//! Command-line front end: `run`, `bench`, `verify`, `sweep` and `replay`.
//!
//! Exit codes: 0 success, 1 configuration error, 2 ingestion error,
//! 3 runtime failure, 4 verification failure.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{
    gen_two_cluster, load_csv, shuffle_dataset, CsvOptions, LabelColumn, LabeledDataset, Normalization,
    TwoClusterSpec,
};
use crate::error::IdkError;
use crate::eval::{
    bench_runtime, oracle_equivalence, psi_sweep, sliding_auc, uniformity_test_with, write_bench_csv,
    write_sliding_auc_csv, write_sweep_csv, BenchOptions,
};
use crate::stream::{run_stream, write_records_csv, write_records_ndjson, Mode, ReplacementPolicy, StreamConfig};

const DATA_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;
const SHUFFLE_SEED_SALT: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Debug)]
enum Failure {
    Config(String),
    Ingestion(String),
    Runtime(String),
    Verification(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Ingestion(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Verification(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Ingestion(m) | Failure::Runtime(m) | Failure::Verification(m) => m,
        }
    }
}

impl From<IdkError> for Failure {
    fn from(e: IdkError) -> Self {
        match e {
            IdkError::Parameter(_) => Failure::Config(e.to_string()),
            IdkError::Dimension { .. } => Failure::Ingestion(e.to_string()),
            _ if e.is_ingestion() => Failure::Ingestion(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CmdResult<T = ()> = std::result::Result<T, Failure>;

fn write_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(format!("writing {}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "idks", version, about = "Streaming anomaly detection with an isolation distributional kernel")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Score a stream and write per-instance scores and run metrics.
    Run(RunArgs),
    /// Time the update step over a grid of window sizes and modes.
    Bench(BenchArgs),
    /// Check sample-set uniformity and incremental/rebuild equivalence.
    Verify(VerifyArgs),
    /// Compare AUC over a list of ψ values.
    Sweep(SweepArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
enum Synth {
    #[value(name = "two-cluster")]
    #[serde(rename = "two-cluster")]
    TwoCluster,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum NormalizeArg {
    None,
    Minmax,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum Sabotage {
    None,
    NewestOnly,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: IdkError| e.to_string())
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SourceArgs {
    /// CSV file to read, one instance per row.
    #[arg(long, conflicts_with = "synth")]
    input: Option<PathBuf>,
    /// Generate a synthetic stream instead of reading a file.
    #[arg(long, value_enum)]
    synth: Option<Synth>,
    /// Number of synthetic instances.
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    /// Fraction of synthetic instances that are anomalies.
    #[arg(long, default_value_t = 0.05)]
    anomaly_rate: f64,
    /// The input file starts with a header row.
    #[arg(long)]
    header: bool,
    /// Label column: `last` (default), `none`, a 0-based index, or a header name.
    #[arg(long)]
    label_column: Option<String>,
    #[arg(long, value_enum, default_value = "none")]
    normalize: NormalizeArg,
    /// Shuffle the instances (seeded) before streaming.
    #[arg(long)]
    shuffle: bool,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct ModelArgs {
    /// Window size ω.
    #[arg(long, default_value_t = 2048)]
    window: usize,
    /// Update step size l.
    #[arg(long, default_value_t = 100)]
    step: usize,
    /// Samples per partitioning ψ.
    #[arg(long, default_value_t = 4)]
    psi: usize,
    /// Number of partitionings.
    #[arg(long, default_value_t = 100)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ModelArgs {
    fn config(&self, mode: Mode) -> StreamConfig {
        StreamConfig {
            omega: self.window,
            step: self.step,
            psi: self.psi,
            t: self.t,
            seed: self.seed,
            mode,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct RunArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "idks", value_parser = parse_mode)]
    mode: Mode,
    /// Stride between sliding-AUC centres; defaults to the step size.
    #[arg(long)]
    auc_stride: Option<usize>,
    #[arg(long, env = "IDKS_OUT_DIR", default_value = "idks-out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct BenchArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, value_delimiter = ',', default_value = "1024,2048,4096,8192")]
    omegas: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "idks,retrain", value_parser = parse_mode)]
    modes: Vec<Mode>,
    #[arg(long, default_value_t = 100)]
    step: usize,
    #[arg(long, default_value_t = 4)]
    psi: usize,
    #[arg(long, default_value_t = 100)]
    t: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seeds per grid cell.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Limit each run to this many updates.
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long, env = "IDKS_OUT_DIR", default_value = "idks-out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct VerifyArgs {
    #[arg(long, default_value_t = 6)]
    window: usize,
    #[arg(long, default_value_t = 2)]
    psi: usize,
    #[arg(long, default_value_t = 2)]
    step: usize,
    #[arg(long, default_value_t = 3)]
    slides: usize,
    #[arg(long, default_value_t = 150_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Deliberately biased replacement, used as a negative control.
    #[arg(long, value_enum, default_value = "none")]
    sabotage: Sabotage,
    /// Length of the stream used for the equivalence check.
    #[arg(long, default_value_t = 3000)]
    oracle_n: usize,
    #[arg(long, default_value_t = 256)]
    oracle_window: usize,
    #[arg(long, default_value_t = 32)]
    oracle_step: usize,
    #[arg(long, default_value_t = 4)]
    oracle_psi: usize,
    #[arg(long, default_value_t = 10)]
    oracle_t: usize,
    #[arg(long, env = "IDKS_OUT_DIR", default_value = "idks-out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
struct SweepArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value = "idks", value_parser = parse_mode)]
    mode: Mode,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8,16,32,64")]
    psis: Vec<usize>,
    #[arg(long, env = "IDKS_OUT_DIR", default_value = "idks-out")]
    out: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct ReplayArgs {
    /// Manifest written by an earlier invocation.
    manifest: PathBuf,
    /// Output directory; defaults to the one recorded in the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFingerprint {
    /// `file` or `synthetic`.
    pub kind: String,
    pub path: Option<PathBuf>,
    pub sha256: String,
    pub instances: usize,
}

/// Written next to every output so a run can be audited and replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: serde_json::Value,
    pub seed: u64,
    pub params: serde_json::Value,
    pub input: Option<InputFingerprint>,
    pub started_at: String,
    pub finished_at: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn label_column(arg: &Option<String>) -> LabelColumn {
    match arg.as_deref().map(str::trim) {
        None | Some("last") => LabelColumn::Last,
        Some("none") => LabelColumn::Unlabeled,
        Some(s) => s
            .parse::<usize>()
            .map_or_else(|_| LabelColumn::Name(s.to_string()), LabelColumn::Index),
    }
}

/// Loads or generates the stream. `norm_rows` is the number of leading rows
/// a min-max normalisation is fitted on.
fn load_source(
    src: &SourceArgs,
    seed: u64,
    norm_rows: usize,
    default_synth: bool,
) -> CmdResult<(LabeledDataset, InputFingerprint)> {
    let normalize = match src.normalize {
        NormalizeArg::None => Normalization::None,
        NormalizeArg::Minmax => Normalization::MinMaxFirstWindow(norm_rows),
    };
    let (mut ds, mut fp) = match (&src.input, src.synth) {
        (Some(path), _) => {
            let bytes = fs::read(path).map_err(|e| Failure::from(IdkError::io(path, e)))?;
            let opts = CsvOptions {
                label: label_column(&src.label_column),
                has_header: src.header,
                normalize,
            };
            let ds = load_csv(path, &opts)?;
            let fp = InputFingerprint {
                kind: "file".into(),
                path: Some(path.clone()),
                sha256: sha256_hex(&bytes),
                instances: ds.len(),
            };
            (ds, fp)
        }
        (None, synth) if synth.is_some() || default_synth => {
            let spec = TwoClusterSpec {
                n: src.n,
                anomaly_rate: src.anomaly_rate,
                seed: seed ^ DATA_SEED_SALT,
                ..TwoClusterSpec::default()
            };
            let mut ds = gen_two_cluster(&spec)?;
            if let Normalization::MinMaxFirstWindow(n) = normalize {
                crate::data::minmax_normalize(&mut ds, n);
            }
            let fp = InputFingerprint {
                kind: "synthetic".into(),
                path: None,
                sha256: String::new(),
                instances: ds.len(),
            };
            (ds, fp)
        }
        (None, _) => return Err(Failure::Config("one of --input or --synth is required".into())),
    };
    if src.shuffle {
        ds = shuffle_dataset(&ds, seed ^ SHUFFLE_SEED_SALT);
    }
    if fp.kind == "synthetic" {
        let mut buf = Vec::new();
        ds.write_csv_to(&mut buf)
            .map_err(|e| Failure::Runtime(format!("fingerprinting input: {e}")))?;
        fp.sha256 = sha256_hex(&buf);
    }
    Ok((ds, fp))
}

fn create_out(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(|e| write_failure(dir, e))
}

fn write_file(dir: &Path, name: &str, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> CmdResult {
    let path = dir.join(name);
    let file = File::create(&path).map_err(|e| write_failure(&path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| write_failure(&path, e))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CmdResult {
    write_file(dir, name, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        writeln!(w)
    })
}

struct ManifestDraft {
    command: &'static str,
    args: serde_json::Value,
    seed: u64,
    started_at: String,
}

impl ManifestDraft {
    fn new<A: Serialize>(command: &'static str, args: &A, seed: u64) -> Self {
        ManifestDraft {
            command,
            args: serde_json::to_value(args).expect("arguments serialise"),
            seed,
            started_at: chrono::Utc::now().to_rfc3339(),
        }
    }

    fn finish<P: Serialize>(self, dir: &Path, params: &P, input: Option<InputFingerprint>) -> CmdResult {
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.into(),
            args: self.args,
            seed: self.seed,
            params: serde_json::to_value(params).expect("parameters serialise"),
            input,
            started_at: self.started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
        };
        write_json(dir, "manifest.json", &manifest)
    }
}

fn cmd_run(args: &RunArgs) -> CmdResult {
    let draft = ManifestDraft::new("run", args, args.model.seed);
    let cfg = args.model.config(args.mode);
    cfg.validate()?;
    let stride = args.auc_stride.unwrap_or(cfg.step);
    if stride == 0 {
        return Err(Failure::Config("--auc-stride must be positive".into()));
    }
    let (ds, fp) = load_source(&args.source, cfg.seed, cfg.omega, false)?;
    if ds.is_empty() {
        return Err(Failure::Ingestion("input contains no instances".into()));
    }
    let out = run_stream(&ds.instances, &cfg)?;

    create_out(&args.out)?;
    write_file(&args.out, "scores.csv", |w| write_records_csv(&out.records, w))?;
    write_file(&args.out, "scores.jsonl", |w| write_records_ndjson(&out.records, w))?;
    write_json(&args.out, "metrics.json", &out.metrics)?;
    let labelled = out.records.iter().all(|r| r.label.is_some());
    if labelled {
        let points = sliding_auc(&out.records, cfg.omega, stride)?;
        write_file(&args.out, "sliding_auc.csv", |w| write_sliding_auc_csv(&points, w))?;
    }
    draft.finish(&args.out, &cfg, Some(fp))?;

    let m = &out.metrics;
    println!(
        "mode={} instances={} updates={} mean_update={:.6}s total={:.3}s auc={}",
        m.mode,
        m.instances,
        m.updates,
        m.update_time_mean_secs,
        m.total_time_secs,
        m.auc.map_or("n/a".to_string(), |a| format!("{a:.4}"))
    );
    for w in &m.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> CmdResult {
    let draft = ManifestDraft::new("bench", args, args.seed);
    let grid: Vec<StreamConfig> = args
        .modes
        .iter()
        .flat_map(|&mode| {
            args.omegas.iter().map(move |&omega| StreamConfig {
                omega,
                step: args.step,
                psi: args.psi,
                t: args.t,
                seed: args.seed,
                mode,
            })
        })
        .collect();
    if grid.is_empty() {
        return Err(Failure::Config("benchmark grid is empty".into()));
    }
    for cfg in &grid {
        cfg.validate()?;
    }
    let norm_rows = args.omegas.iter().copied().min().unwrap_or(1);
    let (ds, fp) = load_source(&args.source, args.seed, norm_rows, true)?;
    let opts = BenchOptions {
        repeats: args.repeats,
        max_updates: args.updates,
    };
    let report = bench_runtime(&grid, &ds.instances, opts)?;

    create_out(&args.out)?;
    let csv_path = args.out.join("bench.csv");
    let f = File::create(&csv_path).map_err(|e| write_failure(&csv_path, e))?;
    write_bench_csv(&report.summary, f)?;
    let seeds_path = args.out.join("bench_per_seed.csv");
    let f = File::create(&seeds_path).map_err(|e| write_failure(&seeds_path, e))?;
    write_bench_csv(&report.per_seed, f)?;
    draft.finish(&args.out, &grid, Some(fp))?;

    println!("mode,omega,median_update_time,total_time,auc");
    for r in &report.summary {
        println!(
            "{},{},{:.6},{:.3},{}",
            r.mode,
            r.omega,
            r.median_update_time,
            r.total_time,
            r.auc.map_or(String::new(), |a| format!("{a:.4}"))
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct VerifyReport {
    uniformity: crate::eval::UniformityReport,
    oracle: crate::eval::OracleReport,
}

fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    let draft = ManifestDraft::new("verify", args, args.seed);
    let policy = match args.sabotage {
        Sabotage::None => ReplacementPolicy::Uniform,
        Sabotage::NewestOnly => ReplacementPolicy::NewestOnly,
    };
    StreamConfig {
        omega: args.oracle_window,
        step: args.oracle_step,
        psi: args.oracle_psi,
        t: args.oracle_t,
        seed: args.seed,
        mode: Mode::Incremental,
    }
    .validate()?;
    let uniformity = uniformity_test_with(
        args.window,
        args.psi,
        args.step,
        args.slides,
        args.trials,
        args.seed,
        policy,
    )?;
    println!(
        "uniformity: omega={} psi={} step={} slides={} trials={} subsets={} chi2={:.3} dof={} p={:.6} -> {}",
        uniformity.omega,
        uniformity.psi,
        uniformity.step,
        uniformity.slides,
        uniformity.trials,
        uniformity.subsets,
        uniformity.chi_square,
        uniformity.dof,
        uniformity.p_value,
        if uniformity.pass { "pass" } else { "FAIL" }
    );

    let spec = TwoClusterSpec {
        n: args.oracle_n.max(args.oracle_window),
        seed: args.seed ^ DATA_SEED_SALT,
        ..TwoClusterSpec::default()
    };
    let ds = gen_two_cluster(&spec)?;
    let points: Vec<&[f64]> = ds.instances.iter().map(|i| i.point.coords()).collect();
    let oracle = oracle_equivalence(
        &points,
        args.oracle_window,
        args.oracle_step,
        args.oracle_psi,
        args.oracle_t,
        args.seed,
        1e-12,
    )?;
    println!(
        "oracle: updates={} assignments_match={} counts_match={} max_score_rel_diff={:e} -> {}",
        oracle.updates,
        oracle.assignments_match,
        oracle.counts_match,
        oracle.max_score_rel_diff,
        if oracle.pass { "pass" } else { "FAIL" }
    );

    let pass = uniformity.pass && oracle.pass;
    create_out(&args.out)?;
    write_json(&args.out, "verify.json", &VerifyReport { uniformity, oracle })?;
    draft.finish(&args.out, args, None)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Verification("verification failed".into()))
    }
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let draft = ManifestDraft::new("sweep", args, args.model.seed);
    let template = args.model.config(args.mode);
    if args.psis.is_empty() {
        return Err(Failure::Config("--psis is empty".into()));
    }
    for &psi in &args.psis {
        StreamConfig { psi, ..template.clone() }.validate()?;
    }
    let (ds, fp) = load_source(&args.source, template.seed, template.omega, false)?;
    let result = psi_sweep(&ds.instances, &template, &args.psis)?;

    create_out(&args.out)?;
    write_file(&args.out, "sweep.csv", |w| write_sweep_csv(&result.rows, w))?;
    draft.finish(&args.out, &template, Some(fp))?;
    for r in &result.rows {
        println!("psi={} auc={:.4} time={:.3}s", r.psi, r.auc, r.total_time);
    }
    println!("argmax psi = {}", result.best_psi);
    Ok(())
}

fn from_manifest<T: serde::de::DeserializeOwned>(m: &RunManifest) -> CmdResult<T> {
    serde_json::from_value(m.args.clone())
        .map_err(|e| Failure::Config(format!("manifest arguments do not match '{}': {e}", m.command)))
}

fn check_input(recorded: &Option<InputFingerprint>) -> CmdResult {
    if let Some(InputFingerprint {
        kind,
        path: Some(path),
        sha256,
        ..
    }) = recorded
    {
        if kind == "file" {
            let bytes = fs::read(path).map_err(|e| Failure::from(IdkError::io(path, e)))?;
            if &sha256_hex(&bytes) != sha256 {
                return Err(Failure::Ingestion(format!(
                    "{} has changed since the manifest was written",
                    path.display()
                )));
            }
        }
    }
    Ok(())
}

fn cmd_replay(args: &ReplayArgs) -> CmdResult {
    let text = fs::read_to_string(&args.manifest)
        .map_err(|e| Failure::from(IdkError::io(&args.manifest, e)))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| Failure::Config(format!("malformed manifest: {e}")))?;
    check_input(&manifest.input)?;
    match manifest.command.as_str() {
        "run" => {
            let mut a: RunArgs = from_manifest(&manifest)?;
            if let Some(out) = &args.out {
                a.out = out.clone();
            }
            cmd_run(&a)
        }
        "bench" => {
            let mut a: BenchArgs = from_manifest(&manifest)?;
            if let Some(out) = &args.out {
                a.out = out.clone();
            }
            cmd_bench(&a)
        }
        "verify" => {
            let mut a: VerifyArgs = from_manifest(&manifest)?;
            if let Some(out) = &args.out {
                a.out = out.clone();
            }
            cmd_verify(&a)
        }
        "sweep" => {
            let mut a: SweepArgs = from_manifest(&manifest)?;
            if let Some(out) = &args.out {
                a.out = out.clone();
            }
            cmd_sweep(&a)
        }
        other => Err(Failure::Config(format!("unknown command '{other}' in manifest"))),
    }
}

/// Parses `args` (including the program name) and runs the subcommand,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Replay(a) => cmd_replay(a),
    };
    match result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.message());
            f.code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flag_defaults() {
        let cli = Cli::try_parse_from(["idks", "run", "--synth", "two-cluster", "--out", "x"]).unwrap();
        let Command::Run(a) = cli.command else { panic!() };
        assert_eq!(a.model.config(a.mode), StreamConfig::default());
        assert_eq!(a.source.synth, Some(Synth::TwoCluster));
        assert_eq!(a.source.normalize, NormalizeArg::None);
    }

    #[test]
    fn list_flags_split_on_commas() {
        let cli = Cli::try_parse_from(["idks", "bench", "--omegas", "8,16", "--modes", "retrain"]).unwrap();
        let Command::Bench(a) = cli.command else { panic!() };
        assert_eq!(a.omegas, vec![8, 16]);
        assert_eq!(a.modes, vec![Mode::Retrain]);
        assert!(Cli::try_parse_from(["idks", "run", "--mode", "bogus"]).is_err());
    }

    #[test]
    fn label_column_forms() {
        assert_eq!(label_column(&None), LabelColumn::Last);
        assert_eq!(label_column(&Some("none".into())), LabelColumn::Unlabeled);
        assert_eq!(label_column(&Some("2".into())), LabelColumn::Index(2));
        assert_eq!(label_column(&Some("y".into())), LabelColumn::Name("y".into()));
    }

    #[test]
    fn exit_codes_for_errors() {
        assert_eq!(Failure::from(IdkError::param("x")).code(), 1);
        assert_eq!(Failure::from(IdkError::Dataset("x".into())).code(), 2);
        assert_eq!(Failure::from(IdkError::State("x".into())).code(), 3);
        assert_eq!(main_with_args(["idks", "frobnicate"]), 1);
        assert_eq!(main_with_args(["idks", "--help"]), 0);
    }

    #[test]
    fn args_round_trip_through_json() {
        let cli = Cli::try_parse_from(["idks", "sweep", "--input", "a.csv", "--psis", "2,4", "--out", "o"]).unwrap();
        let Command::Sweep(a) = cli.command else { panic!() };
        let back: SweepArgs = serde_json::from_value(serde_json::to_value(&a).unwrap()).unwrap();
        assert_eq!(back.psis, a.psis);
        assert_eq!(back.source.input, a.source.input);
        assert_eq!(back.mode, a.mode);
    }
}
