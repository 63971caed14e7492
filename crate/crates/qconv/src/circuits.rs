//! Statevector-level SWAP test and interference (Hadamard-style) test, with
//! exact-probability and shot-sampling estimators, plus the batched
//! superposition sampler over all (row, column) pairs.
//!
//! Both circuits are built gate by gate on an explicit statevector; the
//! closed-form probabilities live only in the tests that validate them.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{inner_product_exact, AmplitudeState};

/// Which inner-product circuit to run.
///
/// The SWAP test recovers only the overlap magnitude (its probability depends
/// on the squared overlap); the interference test recovers the signed overlap
/// for real states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitKind {
    Swap,
    Interference,
}

impl std::str::FromStr for CircuitKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "swap" => Ok(CircuitKind::Swap),
            "interference" => Ok(CircuitKind::Interference),
            other => Err(Error::parse(format!("unknown circuit '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    Sampled,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Mode::Exact),
            "sampled" => Ok(Mode::Sampled),
            other => Err(Error::parse(format!("unknown mode '{other}'"))),
        }
    }
}

/// Measurement plan: shot count, target precision, failure probability, seed.
/// Sampling uses the ChaCha12 generator throughout, so runs reproduce
/// bit-for-bit across platforms given the same seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotPlan {
    pub shots: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub mode: Mode,
}

/// Hoeffding shot count: ceil(ln(2/delta) / (2 epsilon^2)).
pub fn hoeffding_shots(epsilon: f64, delta: f64) -> Result<u64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidPlan(format!(
            "epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidPlan(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    Ok(((2.0 / delta).ln() / (2.0 * epsilon * epsilon)).ceil() as u64)
}

impl ShotPlan {
    pub fn exact() -> Self {
        ShotPlan {
            shots: 0,
            epsilon: 0.05,
            delta: 0.05,
            seed: 0,
            mode: Mode::Exact,
        }
    }

    pub fn sampled(shots: u64, seed: u64) -> Result<Self> {
        if shots < 1 {
            return Err(Error::InvalidPlan("sampled mode needs shots >= 1".into()));
        }
        Ok(ShotPlan {
            shots,
            epsilon: 0.05,
            delta: 0.05,
            seed,
            mode: Mode::Sampled,
        })
    }

    /// Derive the shot count from a (epsilon, delta) precision target.
    pub fn from_precision(epsilon: f64, delta: f64, seed: u64) -> Result<Self> {
        Ok(ShotPlan {
            shots: hoeffding_shots(epsilon, delta)?,
            epsilon,
            delta,
            seed,
            mode: Mode::Sampled,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidPlan("epsilon out of (0, 1)".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidPlan("delta out of (0, 1)".into()));
        }
        if self.mode == Mode::Sampled && self.shots < 1 {
            return Err(Error::InvalidPlan("sampled mode needs shots >= 1".into()));
        }
        Ok(())
    }
}

/// Derive an independent RNG stream for task `index` under a base seed
/// (splitmix64 finalizer).
pub fn derive_stream(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hadamard butterfly on the ancilla of a statevector laid out as
/// `[ancilla=0 block | ancilla=1 block]`, each block of length `block`.
/// Normalization (1/sqrt(2) per gate) is deferred: after two Hadamards the
/// caller divides probabilities by 4, which is exact in binary floating
/// point, so clean cases like identical states give exactly 1.0.
fn hadamard_ancilla(amp: &mut [f64], block: usize) {
    for t in 0..block {
        let a0 = amp[t];
        let a1 = amp[block + t];
        amp[t] = a0 + a1;
        amp[block + t] = a0 - a1;
    }
}

/// Gate-level SWAP test: prepare ancilla x phi x psi, Hadamard, controlled
/// SWAP of the two data registers, Hadamard, project onto ancilla 0.
pub fn swap_test_probability(phi: &AmplitudeState, psi: &AmplitudeState) -> Result<f64> {
    if phi.dim() != psi.dim() {
        return Err(Error::DimMismatch {
            left: phi.dim(),
            right: psi.dim(),
        });
    }
    let d = phi.dim();
    let block = d * d;
    let mut amp = vec![0.0; 2 * block];
    for i in 0..d {
        for j in 0..d {
            amp[i * d + j] = phi.amplitudes()[i] * psi.amplitudes()[j];
        }
    }
    hadamard_ancilla(&mut amp, block);
    // controlled-SWAP on the ancilla=1 block
    for i in 0..d {
        for j in (i + 1)..d {
            amp.swap(block + i * d + j, block + j * d + i);
        }
    }
    hadamard_ancilla(&mut amp, block);
    Ok(amp[..block].iter().map(|a| a * a).sum::<f64>() / 4.0)
}

/// Gate-level interference test: ancilla Hadamard, ancilla-controlled load of
/// `kp` (control 0) and `xq` (control 1), second Hadamard, project onto
/// ancilla 0. P(0) = (1 + <kp|xq>)/2 for real states.
pub fn interference_test_probability(
    kp: &AmplitudeState,
    xq: &AmplitudeState,
) -> Result<f64> {
    if kp.dim() != xq.dim() {
        return Err(Error::DimMismatch {
            left: kp.dim(),
            right: xq.dim(),
        });
    }
    let d = kp.dim();
    let mut amp = vec![0.0; 2 * d];
    amp[0] = 1.0; // |0>_ancilla |0>_data
    hadamard_ancilla(&mut amp, d);
    // controlled preparation: |0>|0> -> |0>|kp>, |1>|0> -> |1>|xq>
    let w0 = amp[0];
    let w1 = amp[d];
    for i in 0..d {
        amp[i] = w0 * kp.amplitudes()[i];
        amp[d + i] = w1 * xq.amplitudes()[i];
    }
    hadamard_ancilla(&mut amp, d);
    Ok(amp[..d].iter().map(|a| a * a).sum::<f64>() / 4.0)
}

/// One estimated overlap: the estimate, its standard error, the shot record
/// and the exact reference value.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EstimationResult {
    pub estimate: f64,
    pub exact_overlap: f64,
    pub p0_exact: f64,
    pub p0_observed: f64,
    pub shots: u64,
    pub std_error: f64,
    pub circuit: CircuitKind,
    pub sign_lost: bool,
}

fn invert_probability(p0: f64, circuit: CircuitKind) -> f64 {
    match circuit {
        CircuitKind::Interference => 2.0 * p0 - 1.0,
        // sampling noise can push p0 below 1/2; clamp before the square root
        CircuitKind::Swap => (2.0 * p0 - 1.0).max(0.0).sqrt(),
    }
}

/// Estimate the overlap between two states with the chosen circuit. Exact
/// mode returns the analytic value with zero variance; sampled mode draws
/// Bernoulli shots at the exact P(0) and inverts the circuit formula.
pub fn estimate_overlap(
    kp: &AmplitudeState,
    xq: &AmplitudeState,
    plan: &ShotPlan,
    circuit: CircuitKind,
) -> Result<EstimationResult> {
    plan.validate()?;
    let p0 = match circuit {
        CircuitKind::Swap => swap_test_probability(kp, xq)?,
        CircuitKind::Interference => interference_test_probability(kp, xq)?,
    };
    let exact_overlap = inner_product_exact(kp, xq)?;
    match plan.mode {
        Mode::Exact => Ok(EstimationResult {
            estimate: invert_probability(p0, circuit),
            exact_overlap,
            p0_exact: p0,
            p0_observed: p0,
            shots: 0,
            std_error: 0.0,
            circuit,
            sign_lost: circuit == CircuitKind::Swap,
        }),
        Mode::Sampled => {
            let mut rng = ChaCha12Rng::seed_from_u64(plan.seed);
            let mut zeros = 0u64;
            for _ in 0..plan.shots {
                if rng.gen::<f64>() < p0 {
                    zeros += 1;
                }
            }
            let p_hat = zeros as f64 / plan.shots as f64;
            let se_p = (p_hat * (1.0 - p_hat) / plan.shots as f64).sqrt();
            let estimate = invert_probability(p_hat, circuit);
            let std_error = match circuit {
                CircuitKind::Interference => 2.0 * se_p,
                CircuitKind::Swap => {
                    if estimate > 0.0 {
                        se_p / estimate
                    } else {
                        (2.0 * se_p).sqrt()
                    }
                }
            };
            Ok(EstimationResult {
                estimate,
                exact_overlap,
                p0_exact: p0,
                p0_observed: p_hat,
                shots: plan.shots,
                std_error,
                circuit,
                sign_lost: circuit == CircuitKind::Swap,
            })
        }
    }
}

/// One draw from the batched superposition measurement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchedSample {
    pub p: usize,
    pub q: usize,
    pub ancilla: u8,
}

/// One cell of the joint (p, q, ancilla) distribution.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct JointCell {
    pub p: usize,
    pub q: usize,
    pub ancilla: u8,
    pub probability: f64,
    pub count: u64,
    pub frequency: f64,
}

/// Result of the batched superposition sampler.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BatchedOutcome {
    pub cells: Vec<JointCell>,
    pub samples: Vec<BatchedSample>,
    pub excluded_pairs: Vec<(usize, usize)>,
    pub valid_pairs: usize,
    pub shots: u64,
}

/// Simulate measurement of the entangled batched state: a uniform
/// superposition over all encodable (p, q) pairs, each contributing ancilla-0
/// probability P_pq(0) / valid_pairs. Both ancilla outcomes are retained.
pub fn batched_sample(
    row_states: &[Option<AmplitudeState>],
    col_states: &[Option<AmplitudeState>],
    plan: &ShotPlan,
) -> Result<BatchedOutcome> {
    plan.validate()?;
    let mut excluded = Vec::new();
    let mut valid = Vec::new();
    for (p, row) in row_states.iter().enumerate() {
        for (q, col) in col_states.iter().enumerate() {
            match (row, col) {
                (Some(r), Some(c)) => valid.push((p, q, r, c)),
                _ => excluded.push((p, q)),
            }
        }
    }
    if valid.is_empty() {
        return Err(Error::Degenerate(
            "no (p, q) pair is encodable; every row or column is zero".into(),
        ));
    }
    let norm = valid.len() as f64;
    let mut cells = Vec::with_capacity(2 * valid.len());
    for &(p, q, r, c) in &valid {
        let p0 = interference_test_probability(r, c)?;
        cells.push(JointCell {
            p,
            q,
            ancilla: 0,
            probability: p0 / norm,
            count: 0,
            frequency: 0.0,
        });
        cells.push(JointCell {
            p,
            q,
            ancilla: 1,
            probability: (1.0 - p0) / norm,
            count: 0,
            frequency: 0.0,
        });
    }

    let mut samples = Vec::new();
    let shots = if plan.mode == Mode::Sampled { plan.shots } else { 0 };
    if shots > 0 {
        // cumulative distribution over cells
        let mut cdf = Vec::with_capacity(cells.len());
        let mut acc = 0.0;
        for cell in &cells {
            acc += cell.probability;
            cdf.push(acc);
        }
        let total = acc;
        let mut rng = ChaCha12Rng::seed_from_u64(plan.seed);
        samples.reserve(shots as usize);
        for _ in 0..shots {
            let u = rng.gen::<f64>() * total;
            let idx = cdf.partition_point(|&x| x < u).min(cells.len() - 1);
            cells[idx].count += 1;
            samples.push(BatchedSample {
                p: cells[idx].p,
                q: cells[idx].q,
                ancilla: cells[idx].ancilla,
            });
        }
        for cell in &mut cells {
            cell.frequency = cell.count as f64 / shots as f64;
        }
    }

    Ok(BatchedOutcome {
        cells,
        samples,
        excluded_pairs: excluded,
        valid_pairs: valid.len(),
        shots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::AmplitudeState;
    use rand_chacha::ChaCha12Rng;

    fn state(v: &[f64]) -> AmplitudeState {
        AmplitudeState::from_vector(v).unwrap()
    }

    fn random_state(rng: &mut ChaCha12Rng, dim: usize) -> AmplitudeState {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            if v.iter().any(|&x| x != 0.0) {
                return state(&v);
            }
        }
    }

    #[test]
    fn swap_identical_states() {
        let phi = state(&[1.0, 0.0]);
        assert_eq!(swap_test_probability(&phi, &phi).unwrap(), 1.0);
    }

    #[test]
    fn swap_orthogonal_states() {
        let phi = state(&[1.0, 0.0]);
        let psi = state(&[0.0, 1.0]);
        assert!((swap_test_probability(&phi, &psi).unwrap() - 0.5).abs() <= 1e-12);
    }

    #[test]
    fn swap_partial_overlap() {
        // overlap 1/sqrt(2) -> P(0) = (1 + 1/2)/2 = 0.75
        let phi = state(&[1.0, 1.0]);
        let psi = state(&[1.0, 0.0]);
        assert!((swap_test_probability(&phi, &psi).unwrap() - 0.75).abs() <= 1e-12);
    }

    #[test]
    fn interference_identical_and_negated() {
        let kp = state(&[0.6, 0.8]);
        assert!((interference_test_probability(&kp, &kp).unwrap() - 1.0).abs() <= 1e-12);
        let neg = state(&[-0.6, -0.8]);
        assert!(interference_test_probability(&kp, &neg).unwrap().abs() <= 1e-12);
        // the SWAP test cannot see the sign difference
        assert!((swap_test_probability(&kp, &neg).unwrap() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn interference_partial_overlap() {
        let kp = state(&[1.0, 1.0]);
        let xq = state(&[1.0, 0.0]);
        let expected = (1.0 + std::f64::consts::FRAC_1_SQRT_2) / 2.0;
        assert!((interference_test_probability(&kp, &xq).unwrap() - expected).abs() <= 1e-12);
    }

    #[test]
    fn gate_level_matches_formula_random_pairs() {
        let mut rng = ChaCha12Rng::seed_from_u64(0xC0FFEE);
        for _ in 0..200 {
            let dim = rng.gen_range(2..=32);
            let a = random_state(&mut rng, dim);
            let b = random_state(&mut rng, dim);
            let overlap = crate::qstate::inner_product_exact(&a, &b).unwrap();
            let p_swap = swap_test_probability(&a, &b).unwrap();
            let p_int = interference_test_probability(&a, &b).unwrap();
            assert!((p_swap - (1.0 + overlap * overlap) / 2.0).abs() <= 1e-12);
            assert!((p_int - (1.0 + overlap) / 2.0).abs() <= 1e-12);
            // symmetry and range
            assert_eq!(p_swap, swap_test_probability(&b, &a).unwrap());
            assert!((p_int - interference_test_probability(&b, &a).unwrap()).abs() <= 1e-12);
            assert!((0.0..=1.0 + 1e-12).contains(&p_int));
            assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&p_swap));
        }
    }

    #[test]
    fn dim_mismatch_rejected() {
        let a = state(&[1.0, 0.0]);
        let b = state(&[1.0, 0.0, 0.0]);
        assert!(swap_test_probability(&a, &b).is_err());
        assert!(interference_test_probability(&a, &b).is_err());
    }

    #[test]
    fn exact_mode_equals_inner_product() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let a = random_state(&mut rng, 8);
        let b = random_state(&mut rng, 8);
        let plan = ShotPlan::exact();
        let res = estimate_overlap(&a, &b, &plan, CircuitKind::Interference).unwrap();
        assert!((res.estimate - res.exact_overlap).abs() <= 1e-12);
        assert_eq!(res.std_error, 0.0);
    }

    #[test]
    fn swap_estimator_recovers_magnitude() {
        // b = -0.6*a + 0.8*a_perp gives <a|b> = -0.6 exactly
        let a = state(&[0.6, 0.8]);
        let b = state(&[-0.6 * 0.6 + 0.8 * -0.8, -0.6 * 0.8 + 0.8 * 0.6]);
        let overlap = crate::qstate::inner_product_exact(&a, &b).unwrap();
        assert!((overlap + 0.6).abs() <= 1e-12);
        let plan = ShotPlan::exact();
        let res = estimate_overlap(&a, &b, &plan, CircuitKind::Swap).unwrap();
        assert!((res.estimate - 0.6).abs() <= 1e-12);
        assert!(res.sign_lost);
    }

    #[test]
    fn sampling_concentrates() {
        let a = state(&[1.0, 1.0]);
        let b = state(&[1.0, -1.0]); // overlap 0
        let plan = ShotPlan::from_precision(0.05, 0.05, 0).unwrap();
        let mut failures = 0;
        for trial in 0..200u64 {
            let p = plan.with_seed(derive_stream(42, trial));
            let res = estimate_overlap(&a, &b, &p, CircuitKind::Interference).unwrap();
            if res.estimate.abs() > 0.1 {
                failures += 1;
            }
        }
        assert!(failures <= 10, "failures: {failures}/200");
    }

    #[test]
    fn sampling_unbiased() {
        let a = state(&[3.0, 1.0, 2.0, 0.5]);
        let b = state(&[1.0, -1.0, 0.5, 2.0]);
        let p0 = interference_test_probability(&a, &b).unwrap();
        let plan = ShotPlan::sampled(200, 0).unwrap();
        let mut mean = 0.0;
        let trials = 1000u64;
        for t in 0..trials {
            let p = plan.with_seed(derive_stream(7, t));
            mean += estimate_overlap(&a, &b, &p, CircuitKind::Interference)
                .unwrap()
                .p0_observed;
        }
        mean /= trials as f64;
        let se = (p0 * (1.0 - p0) / 200.0).sqrt() / (trials as f64).sqrt();
        assert!((mean - p0).abs() <= 3.0 * se, "mean {mean} vs exact {p0}");
    }

    #[test]
    fn batched_single_pair_identical() {
        let s = state(&[1.0, 2.0]);
        let plan = ShotPlan::exact();
        let out = batched_sample(&[Some(s.clone())], &[Some(s)], &plan).unwrap();
        let zero_cell = out.cells.iter().find(|c| c.ancilla == 0).unwrap();
        assert!((zero_cell.probability - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn batched_two_pair_distribution() {
        // one column, two rows: overlaps 1 and 0 -> ancilla-0 probs 0.5, 0.25
        let col = state(&[1.0, 0.0]);
        let row0 = state(&[1.0, 0.0]);
        let row1 = state(&[0.0, 1.0]);
        let plan = ShotPlan::exact();
        let out = batched_sample(&[Some(row0), Some(row1)], &[Some(col)], &plan).unwrap();
        let p00 = out
            .cells
            .iter()
            .find(|c| c.p == 0 && c.ancilla == 0)
            .unwrap()
            .probability;
        let p10 = out
            .cells
            .iter()
            .find(|c| c.p == 1 && c.ancilla == 0)
            .unwrap()
            .probability;
        assert!((p00 - 0.5).abs() <= 1e-12);
        assert!((p10 - 0.25).abs() <= 1e-12);
        let total: f64 = out.cells.iter().map(|c| c.probability).sum();
        assert!((total - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn batched_sampled_tv_distance() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        let rows: Vec<_> = (0..4).map(|_| Some(random_state(&mut rng, 4))).collect();
        let cols: Vec<_> = (0..2).map(|_| Some(random_state(&mut rng, 4))).collect();
        let plan = ShotPlan::sampled(100_000, 12345).unwrap();
        let out = batched_sample(&rows, &cols, &plan).unwrap();
        let tv: f64 = out
            .cells
            .iter()
            .map(|c| (c.probability - c.frequency).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.05, "total variation distance {tv}");
    }

    #[test]
    fn batched_all_zero_rejected() {
        let plan = ShotPlan::exact();
        let err = batched_sample(&[None, None], &[None], &plan);
        assert!(matches!(err, Err(Error::Degenerate(_))));
    }

    #[test]
    fn shot_budget_formula() {
        assert_eq!(hoeffding_shots(0.1, 0.05).unwrap(), 185);
    }
}
