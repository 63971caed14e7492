//! `qconv` command line: classical and quantum convolution runs, kernel
//! reshaping dumps, resource reports and run comparison.
//!
//! Exit codes: 0 success, 2 flag errors, 3 parse/IO errors, 4 shape errors,
//! 5 internal errors.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use qconv::circuits::{CircuitKind, Mode, ShotPlan};
use qconv::engine::{
    estimate_shot_budget, qconvolve, qconvolve_batched_sampling, resource_report,
    BatchedConvResult, QConvConfig, QConvResult, ResourceReport,
};
use qconv::qstate::{encode, CostLedger, PrepStrategy};
use qconv::reshape::{build_dbt_kernel, build_toeplitz_input, nnz_stats, NnzStats, SparseDump};
use qconv::tensor::{conv_reference, ConvShape, InputBatch, KernelBank, Tensor4};

use manifest::{digest_file, InputDigest, RunManifest};

const EXIT_FLAG: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_SHAPE: u8 = 4;
const EXIT_INTERNAL: u8 = 5;

#[derive(Debug)]
enum CliError {
    Flag(String),
    Lib(qconv::Error),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Flag(m) => write!(f, "{m}"),
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "{m}"),
        }
    }
}

impl From<qconv::Error> for CliError {
    fn from(e: qconv::Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Flag(_) => EXIT_FLAG,
            CliError::Io(_) => EXIT_PARSE,
            CliError::Lib(e) => match e {
                qconv::Error::Parse(_) => EXIT_PARSE,
                qconv::Error::Shape(_) | qconv::Error::DimMismatch { .. } => EXIT_SHAPE,
                qconv::Error::InvalidPlan(_) => EXIT_FLAG,
                _ => EXIT_INTERNAL,
            },
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "qconv",
    version,
    about = "Quantum convolution simulator: sparse reshaping, amplitude encoding, SWAP/interference estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Commands,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Exact,
    Sampled,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum CircuitArg {
    Swap,
    Interference,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Aa,
    SparseAa,
    Aqram,
    ParallelAqram,
}

impl From<StrategyArg> for PrepStrategy {
    fn from(v: StrategyArg) -> Self {
        match v {
            StrategyArg::Aa => PrepStrategy::AmplitudeAmplification,
            StrategyArg::SparseAa => PrepStrategy::SparseAmplitudeAmplification,
            StrategyArg::Aqram => PrepStrategy::AugmentedQram,
            StrategyArg::ParallelAqram => PrepStrategy::ParallelAugmentedQram,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BaselineArg {
    Dbt,
    Toeplitz,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Commands {
    /// Classical convolution of a tensor file by a kernel file
    Convolve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 0)]
        pad: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Quantum convolution via amplitude encoding and inner-product circuits
    Qconvolve {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 0)]
        pad: usize,
        #[arg(long, value_enum, default_value = "exact")]
        mode: ModeArg,
        /// Shots per estimated entry; derived from --epsilon/--delta if omitted
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        /// RNG seed; required in sampled mode, ignored in exact mode
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "interference")]
        circuit: CircuitArg,
        #[arg(long, value_enum, default_value = "aqram")]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 1)]
        parallel_units: u64,
        /// Batched superposition sampling over all (p, q) pairs
        #[arg(long)]
        batched: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump the reshaped kernel matrix (or the Toeplitz input baseline)
    Reshape {
        #[arg(long)]
        kernel: PathBuf,
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 0)]
        pad: usize,
        #[arg(long, value_enum, default_value = "dbt")]
        baseline: BaselineArg,
        /// Input tensor; required for --baseline toeplitz
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Qubit counts, ledger costs and the complexity comparison table
    Resources {
        #[arg(long)]
        height: usize,
        #[arg(long)]
        width: usize,
        #[arg(long, default_value_t = 1)]
        channels: usize,
        #[arg(long)]
        kernel_height: usize,
        #[arg(long)]
        kernel_width: usize,
        #[arg(long, default_value_t = 1)]
        filters: usize,
        #[arg(long, default_value_t = 1)]
        batch: usize,
        #[arg(long, default_value_t = 1)]
        stride: usize,
        #[arg(long, default_value_t = 0)]
        pad: usize,
        #[arg(long)]
        shots: Option<u64>,
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, value_enum, default_value = "aqram")]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 1)]
        parallel_units: u64,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate errors, shots and ledger costs across qconvolve result files
    Compare {
        /// qconvolve result JSON files
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read_input(path: &Path) -> CliResult<(InputBatch, InputDigest)> {
    let digest = digest_file(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let t = qconv::io::read_tensor(path)?;
    Ok((InputBatch::new(t.shape, t.data)?, digest))
}

fn read_kernel(path: &Path) -> CliResult<(KernelBank, InputDigest)> {
    let digest = digest_file(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let t = qconv::io::read_tensor(path)?;
    Ok((KernelBank::new(t.shape, t.data)?, digest))
}

fn write_output(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_pretty_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Io(format!("serialization failed: {e}")))
}

fn conv_shape_for(
    x: &InputBatch,
    k: &KernelBank,
    stride: usize,
    pad: usize,
) -> CliResult<ConvShape> {
    if x.c() != k.c() {
        return Err(qconv::Error::shape(format!(
            "input has {} channels but kernel expects {}",
            x.c(),
            k.c()
        ))
        .into());
    }
    Ok(ConvShape::new(
        x.n(),
        x.h(),
        x.w(),
        x.c(),
        k.r(),
        k.s(),
        k.m(),
        stride,
        stride,
        pad,
        pad,
    )?)
}

#[derive(Serialize)]
struct TensorDocument {
    shape: [usize; 4],
    data: Vec<f64>,
    manifest: RunManifest,
}

fn cmd_convolve(
    input: PathBuf,
    kernel: PathBuf,
    stride: usize,
    pad: usize,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let (x, dx) = read_input(&input)?;
    let (k, dk) = read_kernel(&kernel)?;
    let shape = conv_shape_for(&x, &k, stride, pad)?;
    log::debug!("convolve shape: {shape:?}");
    let y = conv_reference(&x, &k, &shape)?;
    let manifest = RunManifest::new(
        "convolve",
        json!({ "stride": stride, "pad": pad, "shape": shape }),
        None,
        vec![dx, dk],
    );
    let doc = TensorDocument {
        shape: y.0.shape,
        data: y.0.data,
        manifest,
    };
    write_output(&out, &to_pretty_json(&doc)?)
}

#[derive(Serialize)]
struct QconvDocument {
    manifest: RunManifest,
    config: QConvConfig,
    result: QConvResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    batched: Option<BatchedRankingDocument>,
}

#[derive(Serialize)]
struct BatchedRankingDocument {
    empirical_ranking: Vec<qconv::engine::RankedCell>,
    exact_ranking: Vec<qconv::engine::RankedCell>,
    valid_pairs: usize,
    excluded_pairs: Vec<(usize, usize)>,
    shots: u64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_qconvolve(
    input: PathBuf,
    kernel: PathBuf,
    stride: usize,
    pad: usize,
    mode: ModeArg,
    shots: Option<u64>,
    epsilon: f64,
    delta: f64,
    seed: Option<u64>,
    circuit: CircuitArg,
    strategy: StrategyArg,
    parallel_units: u64,
    batched: bool,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let (x, dx) = read_input(&input)?;
    let (k, dk) = read_kernel(&kernel)?;
    let shape = conv_shape_for(&x, &k, stride, pad)?;

    let plan = match mode {
        ModeArg::Exact => ShotPlan::exact(),
        ModeArg::Sampled => {
            // no silent entropy: seeds are mandatory when sampling
            let seed = seed.ok_or_else(|| {
                CliError::Flag("--seed is required in sampled mode".to_string())
            })?;
            match shots {
                Some(shots) => ShotPlan::sampled(shots, seed)?,
                None => {
                    let entries = (shape.efm() * shape.n) as u64;
                    estimate_shot_budget(epsilon, delta, entries)?.with_seed(seed)
                }
            }
        }
    };

    let cfg = QConvConfig {
        shape,
        plan,
        strategy: strategy.into(),
        circuit: match circuit {
            CircuitArg::Swap => CircuitKind::Swap,
            CircuitArg::Interference => CircuitKind::Interference,
        },
        batched,
        parallel_units,
    };
    log::debug!("qconvolve config: {cfg:?}");

    let (result, batched_doc) = if batched {
        if cfg.plan.mode != Mode::Sampled {
            return Err(CliError::Flag(
                "--batched requires --mode sampled".to_string(),
            ));
        }
        let BatchedConvResult {
            empirical_ranking,
            exact_ranking,
            outcome,
            result,
        } = qconvolve_batched_sampling(&x, &k, &cfg)?;
        (
            result,
            Some(BatchedRankingDocument {
                empirical_ranking,
                exact_ranking,
                valid_pairs: outcome.valid_pairs,
                excluded_pairs: outcome.excluded_pairs,
                shots: outcome.shots,
            }),
        )
    } else {
        (qconvolve(&x, &k, &cfg)?, None)
    };

    let manifest = RunManifest::new(
        "qconvolve",
        serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?,
        match mode {
            ModeArg::Sampled => seed,
            ModeArg::Exact => None,
        },
        vec![dx, dk],
    );
    let doc = QconvDocument {
        manifest,
        config: cfg,
        result,
        batched: batched_doc,
    };
    write_output(&out, &to_pretty_json(&doc)?)
}

#[derive(Serialize)]
struct ReshapeDocument {
    manifest: RunManifest,
    baseline: String,
    matrix: SparseDump,
    stats: NnzStats,
}

#[allow(clippy::too_many_arguments)]
fn cmd_reshape(
    kernel: PathBuf,
    height: usize,
    width: usize,
    stride: usize,
    pad: usize,
    baseline: BaselineArg,
    input: Option<PathBuf>,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let (k, dk) = read_kernel(&kernel)?;
    let mut digests = vec![dk];
    let (matrix, name) = match baseline {
        BaselineArg::Dbt => {
            let shape = ConvShape::new(
                1,
                height,
                width,
                k.c(),
                k.r(),
                k.s(),
                k.m(),
                stride,
                stride,
                pad,
                pad,
            )?;
            (build_dbt_kernel(&k, &shape)?, "dbt")
        }
        BaselineArg::Toeplitz => {
            let input = input.ok_or_else(|| {
                CliError::Flag("--baseline toeplitz requires --input".to_string())
            })?;
            let (x, dx) = read_input(&input)?;
            digests.push(dx);
            let shape = conv_shape_for(&x, &k, stride, pad)?;
            (build_toeplitz_input(&x, &shape)?, "toeplitz")
        }
    };
    let stats = nnz_stats(&matrix);
    let manifest = RunManifest::new(
        "reshape",
        json!({
            "height": height, "width": width, "stride": stride, "pad": pad,
            "baseline": name,
        }),
        None,
        digests,
    );
    let doc = ReshapeDocument {
        manifest,
        baseline: name.to_string(),
        matrix: matrix.to_dump(),
        stats,
    };
    write_output(&out, &to_pretty_json(&doc)?)
}

#[derive(Serialize)]
struct ResourcesDocument {
    manifest: RunManifest,
    report: ResourceReport,
}

fn render_resources_text(report: &ResourceReport) -> String {
    let mut s = String::new();
    s.push_str("qubit counts\n");
    s.push_str(&format!("  index p   : {}\n", report.qubits_index_p));
    s.push_str(&format!("  index q   : {}\n", report.qubits_index_q));
    s.push_str(&format!("  data      : {}\n", report.qubits_data));
    s.push_str(&format!("  ancilla   : {}\n", report.ancilla));
    s.push_str(&format!("  total     : {}\n", report.qubits_total));
    s.push_str(&format!("depth class : {}\n", report.depth_class));
    s.push_str("\nstate preparation costs (x polylog factor)\n");
    for cost in &report.strategy_costs {
        s.push_str(&format!(
            "  {:<16} nnz={:<6} copies={:<8} formula_cost={:.6}\n",
            cost.strategy.name(),
            cost.nnz,
            cost.copies,
            cost.formula_cost
        ));
    }
    s.push_str("\ncomplexity comparison\n");
    for row in &report.comparison {
        s.push_str(&format!(
            "  {}\n    qram: {} | depth: {} | preprocessing: {} | prep: {} | NISQ: {}\n",
            row.method,
            row.qram_complexity,
            row.circuit_depth,
            row.preprocessing_time,
            row.state_prep,
            row.nisq_suitability
        ));
    }
    s
}

#[allow(clippy::too_many_arguments)]
fn cmd_resources(
    height: usize,
    width: usize,
    channels: usize,
    kernel_height: usize,
    kernel_width: usize,
    filters: usize,
    batch: usize,
    stride: usize,
    pad: usize,
    shots: Option<u64>,
    epsilon: f64,
    delta: f64,
    strategy: StrategyArg,
    parallel_units: u64,
    format: FormatArg,
    out: Option<PathBuf>,
) -> CliResult<()> {
    let shape = ConvShape::new(
        batch,
        height,
        width,
        channels,
        kernel_height,
        kernel_width,
        filters,
        stride,
        stride,
        pad,
        pad,
    )?;
    let plan = match shots {
        Some(shots) => ShotPlan::sampled(shots, 0)?,
        None => estimate_shot_budget(epsilon, delta, (shape.efm() * shape.n) as u64)?,
    };
    let cfg = QConvConfig {
        shape,
        plan,
        strategy: strategy.into(),
        circuit: CircuitKind::Interference,
        batched: false,
        parallel_units,
    };
    // register a representative dense kernel-row vector so the Table-style
    // strategy costs carry concrete numbers: nnz = R*S*C in dimension HWC
    let ledger = CostLedger::new(parallel_units);
    let mut row = vec![0.0; shape.hwc()];
    for slot in row.iter_mut().take(shape.r * shape.s * shape.c) {
        *slot = 1.0;
    }
    encode(&row, &ledger, cfg.strategy)?;
    let report = resource_report(&shape, &cfg, &ledger);
    let manifest = RunManifest::new(
        "resources",
        serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?,
        None,
        vec![],
    );
    match format {
        FormatArg::Json => {
            let doc = ResourcesDocument { manifest, report };
            write_output(&out, &to_pretty_json(&doc)?)
        }
        FormatArg::Text | FormatArg::Csv => {
            let mut text = format!(
                "# manifest: {}\n",
                serde_json::to_string(&manifest).map_err(|e| CliError::Io(e.to_string()))?
            );
            text.push_str(&render_resources_text(&report));
            write_output(&out, &text)
        }
    }
}

#[derive(Deserialize)]
struct QconvDocumentIn {
    result: QConvResultIn,
}

#[derive(Deserialize)]
struct QConvResultIn {
    estimated: Tensor4,
    exact: Tensor4,
    max_abs_error: f64,
    report: ReportIn,
}

#[derive(Deserialize)]
struct ReportIn {
    shots_used: u64,
    ledger: LedgerIn,
}

#[derive(Deserialize)]
struct LedgerIn {
    preprocess_touches: u64,
    qram_queries: u64,
    prep_invocations: u64,
}

struct CompareRow {
    file: String,
    shape: [usize; 4],
    shots: u64,
    max_abs_error: f64,
    mean_abs_error: f64,
    preprocess_touches: u64,
    qram_queries: u64,
    prep_invocations: u64,
}

fn cmd_compare(results: Vec<PathBuf>, format: FormatArg, out: Option<PathBuf>) -> CliResult<()> {
    let mut rows = Vec::new();
    let mut digests = Vec::new();
    for path in &results {
        digests.push(
            digest_file(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?,
        );
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let doc: QconvDocumentIn = serde_json::from_str(&text).map_err(|e| {
            CliError::Lib(qconv::Error::parse(format!(
                "{} is not a qconvolve result file: {e}",
                path.display()
            )))
        })?;
        let r = doc.result;
        let mean_abs_error = r
            .estimated
            .data
            .iter()
            .zip(&r.exact.data)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / r.estimated.data.len().max(1) as f64;
        rows.push(CompareRow {
            file: path.display().to_string(),
            shape: r.estimated.shape,
            shots: r.report.shots_used,
            max_abs_error: r.max_abs_error,
            mean_abs_error,
            preprocess_touches: r.report.ledger.preprocess_touches,
            qram_queries: r.report.ledger.qram_queries,
            prep_invocations: r.report.ledger.prep_invocations,
        });
    }
    if let Some(first) = rows.first() {
        if rows.iter().any(|r| r.shape != first.shape) {
            return Err(qconv::Error::shape(
                "result files have different output shapes and cannot be compared",
            )
            .into());
        }
    }

    let manifest = RunManifest::new("compare", json!({ "files": results.len() }), None, digests);
    let manifest_line = format!(
        "# manifest: {}",
        serde_json::to_string(&manifest).map_err(|e| CliError::Io(e.to_string()))?
    );
    let text = match format {
        FormatArg::Csv => {
            let mut s = format!("{manifest_line}\n");
            s.push_str(
                "file,shots,max_abs_error,mean_abs_error,preprocess_touches,qram_queries,prep_invocations\n",
            );
            for r in &rows {
                s.push_str(&format!(
                    "{},{},{:.9e},{:.9e},{},{},{}\n",
                    r.file,
                    r.shots,
                    r.max_abs_error,
                    r.mean_abs_error,
                    r.preprocess_touches,
                    r.qram_queries,
                    r.prep_invocations
                ));
            }
            s
        }
        FormatArg::Text | FormatArg::Json => {
            let mut s = format!("{manifest_line}\n");
            s.push_str(&format!(
                "{:<40} {:>10} {:>14} {:>14} {:>12} {:>10} {:>10}\n",
                "file", "shots", "max_abs_err", "mean_abs_err", "preprocess", "qram", "preps"
            ));
            for r in &rows {
                s.push_str(&format!(
                    "{:<40} {:>10} {:>14.6e} {:>14.6e} {:>12} {:>10} {:>10}\n",
                    r.file,
                    r.shots,
                    r.max_abs_error,
                    r.mean_abs_error,
                    r.preprocess_touches,
                    r.qram_queries,
                    r.prep_invocations
                ));
            }
            s
        }
    };
    write_output(&out, &text)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Commands::Convolve {
            input,
            kernel,
            stride,
            pad,
            out,
        } => cmd_convolve(input, kernel, stride, pad, out),
        Commands::Qconvolve {
            input,
            kernel,
            stride,
            pad,
            mode,
            shots,
            epsilon,
            delta,
            seed,
            circuit,
            strategy,
            parallel_units,
            batched,
            out,
        } => cmd_qconvolve(
            input,
            kernel,
            stride,
            pad,
            mode,
            shots,
            epsilon,
            delta,
            seed,
            circuit,
            strategy,
            parallel_units,
            batched,
            out,
        ),
        Commands::Reshape {
            kernel,
            height,
            width,
            stride,
            pad,
            baseline,
            input,
            out,
        } => cmd_reshape(kernel, height, width, stride, pad, baseline, input, out),
        Commands::Resources {
            height,
            width,
            channels,
            kernel_height,
            kernel_width,
            filters,
            batch,
            stride,
            pad,
            shots,
            epsilon,
            delta,
            strategy,
            parallel_units,
            format,
            out,
        } => cmd_resources(
            height,
            width,
            channels,
            kernel_height,
            kernel_width,
            filters,
            batch,
            stride,
            pad,
            shots,
            epsilon,
            delta,
            strategy,
            parallel_units,
            format,
            out,
        ),
        Commands::Compare {
            results,
            format,
            out,
        } => cmd_compare(results, format, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("QCONV_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
