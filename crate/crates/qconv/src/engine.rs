//! End-to-end quantum convolution: reshape the kernel, encode rows and
//! columns once, estimate every output entry through the configured circuit,
//! rescale by the stored norms and assemble the output tensor, with a
//! resource report alongside.

use serde::{Deserialize, Serialize};

use crate::circuits::{
    batched_sample, derive_stream, estimate_overlap, BatchedOutcome, CircuitKind, Mode, ShotPlan,
};
use crate::error::{Error, Result};
use crate::qstate::{ceil_log2, encode, ledger_report, AmplitudeState, CostLedger, CostReport,
    LedgerSummary, PrepStrategy};
use crate::reshape::{build_dbt_kernel, reshape_output};
use crate::tensor::{conv_reference, flatten_input, ConvShape, DenseMatrix, InputBatch,
    KernelBank, OutputBatch};

/// Full configuration of one quantum convolution run.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QConvConfig {
    pub shape: ConvShape,
    pub plan: ShotPlan,
    pub strategy: PrepStrategy,
    pub circuit: CircuitKind,
    pub batched: bool,
    pub parallel_units: u64,
}

impl QConvConfig {
    pub fn exact(shape: ConvShape) -> Self {
        QConvConfig {
            shape,
            plan: ShotPlan::exact(),
            strategy: PrepStrategy::AugmentedQram,
            circuit: CircuitKind::Interference,
            batched: false,
            parallel_units: 1,
        }
    }
}

/// One row of the complexity comparison table, instantiated with concrete
/// numbers for the configured shape.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub qram_complexity: String,
    pub circuit_depth: String,
    pub preprocessing_time: String,
    pub state_prep: String,
    pub nisq_suitability: String,
}

/// Qubit counts and ledger-derived costs for a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResourceReport {
    pub qubits_index_p: u64,
    pub qubits_index_q: u64,
    pub qubits_data: u64,
    pub ancilla: u64,
    pub qubits_total: u64,
    pub ledger: LedgerSummary,
    pub shots_used: u64,
    pub depth_class: String,
    pub strategy_costs: Vec<CostReport>,
    pub comparison: Vec<ComparisonRow>,
}

/// Estimated and exact outputs plus per-entry standard errors. The standard
/// error vector follows the (N, E, F, M) data layout of the output tensors.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QConvResult {
    pub estimated: OutputBatch,
    pub exact: OutputBatch,
    pub std_errors: Vec<f64>,
    pub max_abs_error: f64,
    pub sign_loss: bool,
    pub report: ResourceReport,
}

/// Batched-mode output: (p, q) cells ranked by ancilla-0 frequency next to
/// the exact ranking by (1 + overlap).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankedCell {
    pub p: usize,
    pub q: usize,
    pub frequency: f64,
    pub exact_probability: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchedConvResult {
    pub empirical_ranking: Vec<RankedCell>,
    pub exact_ranking: Vec<RankedCell>,
    pub outcome: BatchedOutcome,
    pub result: QConvResult,
}

/// Hoeffding shot budget across `entries` estimates with a union bound:
/// per-entry confidence delta/entries.
pub fn estimate_shot_budget(epsilon: f64, delta: f64, entries: u64) -> Result<ShotPlan> {
    if entries < 1 {
        return Err(Error::InvalidPlan("entries must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidPlan(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    let mut plan = ShotPlan::from_precision(epsilon, delta / entries as f64, 0)?;
    plan.delta = delta;
    Ok(plan)
}

fn encode_states(
    vectors: impl Iterator<Item = Vec<f64>>,
    ledger: &CostLedger,
    strategy: PrepStrategy,
) -> Result<Vec<Option<AmplitudeState>>> {
    vectors
        .map(|v| {
            if v.iter().all(|&x| x == 0.0) {
                Ok(None)
            } else {
                encode(&v, ledger, strategy).map(Some)
            }
        })
        .collect()
}

/// Quantum convolution of a batch against a kernel bank. Zero rows and
/// columns short-circuit to exact zero entries without any circuit.
pub fn qconvolve(x: &InputBatch, k: &KernelBank, cfg: &QConvConfig) -> Result<QConvResult> {
    cfg.plan.validate()?;
    let shape = &cfg.shape;
    let kt = build_dbt_kernel(k, shape)?;
    let xmat = flatten_input(x);
    if xmat.rows != shape.hwc() || xmat.cols != shape.n {
        return Err(Error::shape(format!(
            "input shape {:?} inconsistent with configuration",
            x.0.shape
        )));
    }

    let ledger = CostLedger::new(cfg.parallel_units);
    let row_states = encode_states(
        (0..kt.rows()).map(|p| kt.row_dense(p)),
        &ledger,
        cfg.strategy,
    )?;
    let col_states = encode_states(
        (0..xmat.cols).map(|q| xmat.column(q)),
        &ledger,
        cfg.strategy,
    )?;

    let mut y_flat = DenseMatrix::zeros(shape.efm(), shape.n);
    let mut se_flat = DenseMatrix::zeros(shape.efm(), shape.n);
    let mut shots_used = 0u64;
    for (p, row_state) in row_states.iter().enumerate() {
        for (q, col_state) in col_states.iter().enumerate() {
            if let (Some(kp), Some(xq)) = (row_state, col_state) {
                // independent RNG stream per entry
                let entry_plan = cfg
                    .plan
                    .with_seed(derive_stream(cfg.plan.seed, (p * shape.n + q) as u64));
                let est = estimate_overlap(kp, xq, &entry_plan, cfg.circuit)?;
                let scale = kp.source_norm() * xq.source_norm();
                y_flat.set(p, q, scale * est.estimate);
                se_flat.set(p, q, scale * est.std_error);
                shots_used += est.shots;
            }
        }
    }

    let estimated = reshape_output(&y_flat, shape)?;
    let exact = conv_reference(x, k, shape)?;

    // standard errors rearranged to the output tensor layout
    let mut std_errors = vec![0.0; estimated.0.data.len()];
    for q in 0..shape.n {
        for p in 0..shape.efm() {
            let (ie, jf, dm) = shape.output_coords(p);
            std_errors[estimated.0.idx(q, ie, jf, dm)] = se_flat.get(p, q);
        }
    }

    let max_abs_error = estimated
        .0
        .data
        .iter()
        .zip(&exact.0.data)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);

    let mut report = resource_report(shape, cfg, &ledger);
    report.shots_used = shots_used;

    Ok(QConvResult {
        estimated,
        exact,
        std_errors,
        max_abs_error,
        sign_loss: cfg.circuit == CircuitKind::Swap,
        report,
    })
}

/// Batched superposition sampling: which (p, q) entries are large, rather
/// than a uniform-precision reconstruction of Y. The embedded QConvResult is
/// computed in exact mode.
pub fn qconvolve_batched_sampling(
    x: &InputBatch,
    k: &KernelBank,
    cfg: &QConvConfig,
) -> Result<BatchedConvResult> {
    cfg.plan.validate()?;
    let shape = &cfg.shape;
    let kt = build_dbt_kernel(k, shape)?;
    let xmat = flatten_input(x);
    let ledger = CostLedger::new(cfg.parallel_units);
    let row_states = encode_states(
        (0..kt.rows()).map(|p| kt.row_dense(p)),
        &ledger,
        cfg.strategy,
    )?;
    let col_states = encode_states(
        (0..xmat.cols).map(|q| xmat.column(q)),
        &ledger,
        cfg.strategy,
    )?;
    let outcome = batched_sample(&row_states, &col_states, &cfg.plan)?;

    let mut empirical: Vec<RankedCell> = outcome
        .cells
        .iter()
        .filter(|c| c.ancilla == 0)
        .map(|c| RankedCell {
            p: c.p,
            q: c.q,
            frequency: c.frequency,
            exact_probability: c.probability,
        })
        .collect();
    let mut exact = empirical.clone();
    empirical.sort_by(|a, b| {
        b.frequency
            .partial_cmp(&a.frequency)
            .unwrap()
            .then(a.p.cmp(&b.p))
            .then(a.q.cmp(&b.q))
    });
    exact.sort_by(|a, b| {
        b.exact_probability
            .partial_cmp(&a.exact_probability)
            .unwrap()
            .then(a.p.cmp(&b.p))
            .then(a.q.cmp(&b.q))
    });

    let mut exact_cfg = *cfg;
    exact_cfg.plan = ShotPlan::exact();
    let result = qconvolve(x, k, &exact_cfg)?;

    Ok(BatchedConvResult {
        empirical_ranking: empirical,
        exact_ranking: exact,
        outcome,
        result,
    })
}

fn comparison_rows(shape: &ConvShape) -> Vec<ComparisonRow> {
    let n = shape.hwc();
    let nnz_row = shape.r * shape.s * shape.c;
    vec![
        ComparisonRow {
            method: "this-work (sparse DBT reshaping)".into(),
            qram_complexity: format!(
                "O~(sqrt(nnz)) = O~({:.2}) for nnz={nnz_row}",
                (nnz_row as f64).sqrt()
            ),
            circuit_depth: "O~(1)".into(),
            preprocessing_time: format!("O(nnz) = O({nnz_row}) per kernel row"),
            state_prep: "efficient for sparse data".into(),
            nisq_suitability: "high".into(),
        },
        ComparisonRow {
            method: "Toeplitz + QMM".into(),
            qram_complexity: format!("O~(n^2) = O~({})", n * n),
            circuit_depth: format!("O(n) = O({n})"),
            preprocessing_time: format!("O(n^2) = O({}) per input", n * n),
            state_prep: "dense QRAM encoding".into(),
            nisq_suitability: "low".into(),
        },
        ComparisonRow {
            method: "plain SWAP test".into(),
            qram_complexity: format!("O~(n) = O~({n})"),
            circuit_depth: format!("O(n) = O({n})"),
            preprocessing_time: format!("O(n) = O({n})"),
            state_prep: "repetitive ancilla preparation".into(),
            nisq_suitability: "medium".into(),
        },
    ]
}

/// Qubit counts (recomputed from the shape every call), ledger costs and the
/// complexity comparison table.
pub fn resource_report(shape: &ConvShape, cfg: &QConvConfig, ledger: &CostLedger) -> ResourceReport {
    let qubits_index_p = ceil_log2(shape.efm());
    let qubits_index_q = ceil_log2(shape.n);
    let qubits_data = ceil_log2(shape.hwc());
    let nominal_shots = match cfg.plan.mode {
        Mode::Sampled => cfg.plan.shots * (shape.efm() * shape.n) as u64,
        Mode::Exact => 0,
    };
    let copies = match cfg.plan.mode {
        Mode::Sampled => cfg.plan.shots,
        Mode::Exact => 0,
    };
    ResourceReport {
        qubits_index_p,
        qubits_index_q,
        qubits_data,
        ancilla: 1,
        qubits_total: qubits_index_p + qubits_index_q + qubits_data + 1,
        ledger: ledger.snapshot(),
        shots_used: nominal_shots,
        depth_class: "constant-depth estimation layer + state preparation".into(),
        strategy_costs: PrepStrategy::ALL
            .iter()
            .map(|&s| ledger_report(ledger, s, copies))
            .collect(),
        comparison: comparison_rows(shape),
    }
}
