//! Analytic pulse-to-unitary oracle and small statevector simulator.
//!
//! The oracle maps a (possibly perturbed) calibration to a gate unitary
//! with a linear Rabi model: the delivered rotation angle scales with the
//! stored amplitude magnitude, `theta = theta_nom * |amp| / |amp_cal|`,
//! and the drive axis picks up the channel frame phase, the stored phase
//! offset, and any argument change of the perturbed amplitude. Virtual-Z
//! rotations are exact. At the calibration point every gate reproduces its
//! textbook unitary up to global phase, so closed-form ideal distributions
//! are available for every experiment.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{BackendConfig, ConfigError};
use crate::float32_bits::BitIndex;
use crate::pulse_model::{
    check_validity, perturb_parameter, FlipTarget, FrameState, Gate, GateCalibration, PulseError,
};

#[derive(Debug, Error)]
pub enum SimError {
    /// The distinguished halted outcome: the controller refuses to transmit
    /// a pulse whose peak norm exceeds 1.0 or whose samples are non-finite.
    #[error("invalid pulse for gate {gate}: peak sample norm {max_norm} (halted)")]
    InvalidPulse { gate: String, max_norm: f64 },
    #[error("non-finite stored phase for gate {gate} (halted)")]
    NonFinitePhase { gate: String },
    #[error("distribution is not normalized: sum = {sum}")]
    Unnormalized { sum: f64 },
    #[error("negative probability {value} for outcome {outcome}")]
    NegativeProbability { outcome: String, value: f64 },
    #[error("invalid circuit: {0}")]
    BadCircuit(String),
    #[error(transparent)]
    Pulse(#[from] PulseError),
    #[error(transparent)]
    Calibration(#[from] ConfigError),
}

impl SimError {
    /// True for the outcomes the harness records as halted rather than
    /// measured.
    pub fn is_halt(&self) -> bool {
        matches!(
            self,
            SimError::InvalidPulse { .. } | SimError::NonFinitePhase { .. }
        )
    }
}

pub type Mat2 = [[Complex64; 2]; 2];
pub type Mat4 = [[Complex64; 4]; 4];

/// Unitary produced by the oracle: 2x2 for single-qubit drives, 4x4 for
/// the cross-resonance CNOT.
#[derive(Debug, Clone, PartialEq)]
pub enum GateUnitary {
    Single(Mat2),
    Two(Mat4),
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[c(0.0, 0.0); 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            *cell = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Exact virtual-Z rotation: diag(e^{-i a/2}, e^{i a/2}).
fn rz(angle: f64) -> Mat2 {
    [
        [Complex64::from_polar(1.0, -angle / 2.0), c(0.0, 0.0)],
        [c(0.0, 0.0), Complex64::from_polar(1.0, angle / 2.0)],
    ]
}

/// Resonant drive by `theta` about the equatorial axis at angle `phi`:
/// exp(-i theta/2 (cos phi X + sin phi Y)).
fn drive(theta: f64, phi: f64) -> Mat2 {
    let half = theta / 2.0;
    let (cos_h, sin_h) = (half.cos(), half.sin());
    let off = c(0.0, -1.0) * sin_h;
    [
        [c(cos_h, 0.0), off * Complex64::from_polar(1.0, -phi)],
        [off * Complex64::from_polar(1.0, phi), c(cos_h, 0.0)],
    ]
}

fn rx(theta: f64) -> Mat2 {
    drive(theta, 0.0)
}

/// Cross-resonance evolution exp(-i theta/2 Z (x) (cos phi X + sin phi Y))
/// in the |control, target> basis (row index = 2*control + target).
fn zx(theta: f64, phi: f64) -> Mat4 {
    let plus = drive(theta, phi);
    let minus = drive(-theta, phi);
    let mut out = [[c(0.0, 0.0); 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = plus[i][j];
            out[2 + i][2 + j] = minus[i][j];
        }
    }
    out
}

/// Kronecker product with the control factor first: element
/// [(2c+t), (2c'+t')] = a[c][c'] * b[t][t'].
fn kron2(a: &Mat2, b: &Mat2) -> Mat4 {
    let mut out = [[c(0.0, 0.0); 4]; 4];
    for ci in 0..2 {
        for cj in 0..2 {
            for ti in 0..2 {
                for tj in 0..2 {
                    out[2 * ci + ti][2 * cj + tj] = a[ci][cj] * b[ti][tj];
                }
            }
        }
    }
    out
}

/// Largest absolute entry of U~U - I; zero for a perfect unitary.
pub fn unitarity_defect(u: &GateUnitary) -> f64 {
    fn defect<const N: usize>(m: &[[Complex64; N]; N]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..N {
            for j in 0..N {
                let mut dot = c(0.0, 0.0);
                for (k, row) in m.iter().enumerate() {
                    dot += row[i].conj() * m[k][j];
                }
                let expected = if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) };
                worst = worst.max((dot - expected).norm());
            }
        }
        worst
    }
    match u {
        GateUnitary::Single(m) => defect(m),
        GateUnitary::Two(m) => defect(m),
    }
}

/// Build the gate unitary for a possibly perturbed calibration.
///
/// `nominal` is the backend's stored calibration for the same gate; the
/// rotation angle and axis are scaled relative to it. Refuses pulses that
/// fail the validity check, which callers record as a halted outcome.
pub fn pulse_to_unitary(
    applied: &GateCalibration,
    nominal: &GateCalibration,
    frame: &FrameState,
) -> Result<GateUnitary, SimError> {
    let validity = check_validity(&applied.envelope());
    if !validity.valid {
        return Err(SimError::InvalidPulse {
            gate: applied.gate.to_string(),
            max_norm: validity.max_norm,
        });
    }
    if !applied.phase.is_finite() {
        return Err(SimError::NonFinitePhase {
            gate: applied.gate.to_string(),
        });
    }
    let theta = nominal.theta_nom * applied.amp.norm() / nominal.amp.norm();
    let phi = frame.phase() + applied.phase as f64 + (applied.amp.arg() - nominal.amp.arg());
    let unitary = match applied.gate {
        Gate::X | Gate::Sx | Gate::Rx(_) => GateUnitary::Single(drive(theta, phi)),
        // Virtual-Z sandwich: RZ(pi/2) . drive(pi/2) . RZ(pi/2) equals the
        // Hadamard up to global phase at the calibration point.
        Gate::H => {
            let vz = rz(FRAC_PI_2);
            GateUnitary::Single(mat2_mul(&vz, &mat2_mul(&drive(theta, phi), &vz)))
        }
        // ZX rotation from the CR pulse, wrapped by fixed unperturbed
        // single-qubit corrections so the nominal composite is CNOT up to
        // global phase.
        Gate::Cnot => {
            let correction = kron2(&rz(-FRAC_PI_2), &rx(-FRAC_PI_2));
            GateUnitary::Two(mat4_mul(&correction, &zx(theta, phi)))
        }
    };
    Ok(unitary)
}

/// One gate application within a circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitOp {
    pub gate: Gate,
    /// Acting qubits; `[control, target]` for CNOT.
    pub qubits: Vec<u8>,
}

/// A 1- or 2-qubit circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: u8,
    ops: Vec<CircuitOp>,
}

impl Circuit {
    pub fn new(n_qubits: u8, ops: Vec<CircuitOp>) -> Result<Self, SimError> {
        if !(1..=2).contains(&n_qubits) {
            return Err(SimError::BadCircuit(format!(
                "only 1- or 2-qubit circuits are supported, got {n_qubits}"
            )));
        }
        for op in &ops {
            if op.qubits.len() != op.gate.arity() as usize {
                return Err(SimError::BadCircuit(format!(
                    "gate {} takes {} qubit(s), got {:?}",
                    op.gate,
                    op.gate.arity(),
                    op.qubits
                )));
            }
            if op.qubits.iter().any(|&q| q >= n_qubits) {
                return Err(SimError::BadCircuit(format!(
                    "qubit index out of range in {:?} for {n_qubits} qubit(s)",
                    op.qubits
                )));
            }
            if op.gate.arity() == 2 && op.qubits[0] == op.qubits[1] {
                return Err(SimError::BadCircuit(
                    "two-qubit gate needs distinct qubits".into(),
                ));
            }
        }
        Ok(Circuit { n_qubits, ops })
    }

    pub fn n_qubits(&self) -> u8 {
        self.n_qubits
    }

    pub fn ops(&self) -> &[CircuitOp] {
        &self.ops
    }
}

/// A single-bit perturbation of one gate's stored parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub gate: Gate,
    pub target: FlipTarget,
    pub index: BitIndex,
}

fn apply_single(state: &mut [Complex64], qubit: u8, m: &Mat2) {
    let step = 1usize << qubit;
    let mut i = 0;
    while i < state.len() {
        if i & step == 0 {
            let j = i | step;
            let (a, b) = (state[i], state[j]);
            state[i] = m[0][0] * a + m[0][1] * b;
            state[j] = m[1][0] * a + m[1][1] * b;
        }
        i += 1;
    }
}

fn apply_two(state: &mut [Complex64], control: u8, target: u8, m: &Mat4) {
    let cm = 1usize << control;
    let tm = 1usize << target;
    for i in 0..state.len() {
        if i & cm == 0 && i & tm == 0 {
            let idx = [i, i | tm, i | cm, i | cm | tm];
            let v = [state[idx[0]], state[idx[1]], state[idx[2]], state[idx[3]]];
            for (row, &out_index) in idx.iter().enumerate() {
                state[out_index] = (0..4).map(|k| m[row][k] * v[k]).sum();
            }
        }
    }
}

/// Run a circuit from |0...0> and return the final state vector.
///
/// At most one parameter is perturbed; an invalid perturbed pulse
/// propagates as the distinguished halted error.
pub fn run_circuit(
    circuit: &Circuit,
    backend: &BackendConfig,
    perturbation: Option<&Perturbation>,
) -> Result<Vec<Complex64>, SimError> {
    run_circuit_resolved(circuit, backend, &|nominal| match perturbation {
        Some(p) if p.gate == nominal.gate => {
            Ok(perturb_parameter(nominal, p.target, p.index)?)
        }
        _ => Ok(nominal.clone()),
    })
}

/// Run a circuit with an explicit calibration substituted for every
/// occurrence of its gate; all other gates run nominal. Used by the ECC
/// campaigns, whose decoded words are not expressible as single flips.
pub fn run_circuit_with_calibration(
    circuit: &Circuit,
    backend: &BackendConfig,
    applied: &GateCalibration,
) -> Result<Vec<Complex64>, SimError> {
    run_circuit_resolved(circuit, backend, &|nominal| {
        if nominal.gate == applied.gate {
            Ok(applied.clone())
        } else {
            Ok(nominal.clone())
        }
    })
}

fn run_circuit_resolved(
    circuit: &Circuit,
    backend: &BackendConfig,
    resolve: &dyn Fn(&GateCalibration) -> Result<GateCalibration, SimError>,
) -> Result<Vec<Complex64>, SimError> {
    let n = circuit.n_qubits();
    let mut state = vec![c(0.0, 0.0); 1 << n];
    state[0] = c(1.0, 0.0);
    let frames = vec![FrameState::new(); n as usize];
    for op in circuit.ops() {
        let nominal = backend.calibration_for(&op.gate)?;
        let applied = resolve(&nominal)?;
        let frame = &frames[op.qubits[0] as usize];
        match pulse_to_unitary(&applied, &nominal, frame)? {
            GateUnitary::Single(m) => apply_single(&mut state, op.qubits[0], &m),
            GateUnitary::Two(m) => apply_two(&mut state, op.qubits[0], op.qubits[1], &m),
        }
    }
    Ok(state)
}

/// Per-qubit readout confusion: `p01 = P(read 1 | state 0)` and
/// `p10 = P(read 0 | state 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutError {
    pub p01: f64,
    pub p10: f64,
}

impl ReadoutError {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (name, p) in [("p01", self.p01), ("p10", self.p10)] {
            if !(0.0..=0.5).contains(&p) {
                return Err(ConfigError::Invalid(format!(
                    "readout {name} must lie in [0, 0.5], got {p}"
                )));
            }
        }
        Ok(())
    }
}

/// Readout confusion for every qubit of a backend.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutModel {
    qubits: Vec<ReadoutError>,
}

impl ReadoutModel {
    pub fn new(qubits: Vec<ReadoutError>) -> Self {
        ReadoutModel { qubits }
    }

    pub fn noiseless(n: usize) -> Self {
        ReadoutModel {
            qubits: vec![ReadoutError { p01: 0.0, p10: 0.0 }; n],
        }
    }

    pub fn qubit(&self, q: usize) -> ReadoutError {
        self.qubits[q]
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }
}

/// Shot budget for a measurement: a finite sampled count or the exact
/// analytic distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotMode {
    Exact,
    Sampled(u64),
}

impl Serialize for ShotMode {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            ShotMode::Exact => serializer.serialize_str("exact"),
            ShotMode::Sampled(n) => serializer.serialize_u64(*n),
        }
    }
}

impl<'de> Deserialize<'de> for ShotMode {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct Visitor;
        impl serde::de::Visitor<'_> for Visitor {
            type Value = ShotMode;

            fn expecting(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str("\"exact\" or a positive shot count")
            }

            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<ShotMode, E> {
                if v == "exact" {
                    Ok(ShotMode::Exact)
                } else {
                    Err(E::custom(format!("expected \"exact\", got {v:?}")))
                }
            }

            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<ShotMode, E> {
                Ok(ShotMode::Sampled(v))
            }
        }
        deserializer.deserialize_any(Visitor)
    }
}

impl std::fmt::Display for ShotMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ShotMode::Exact => f.write_str("exact"),
            ShotMode::Sampled(n) => write!(f, "{n}"),
        }
    }
}

/// Probability map over measurement bitstrings. Keys read qubit `n-1`
/// down to qubit 0, left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Distribution {
    probs: BTreeMap<String, f64>,
}

impl Distribution {
    /// Tolerance on the probability sum for exact distributions.
    pub const NORMALIZATION_TOL: f64 = 1e-9;

    pub fn from_probs(probs: BTreeMap<String, f64>) -> Result<Self, SimError> {
        let mut sum = 0.0;
        for (outcome, &p) in &probs {
            if p < 0.0 || !p.is_finite() {
                return Err(SimError::NegativeProbability {
                    outcome: outcome.clone(),
                    value: p,
                });
            }
            sum += p;
        }
        if (sum - 1.0).abs() > Self::NORMALIZATION_TOL {
            return Err(SimError::Unnormalized { sum });
        }
        Ok(Distribution { probs })
    }

    pub fn probability(&self, outcome: &str) -> f64 {
        self.probs.get(outcome).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.probs.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn outcomes(&self) -> impl Iterator<Item = &str> {
        self.probs.keys().map(String::as_str)
    }

    fn check_normalized(&self) -> Result<(), SimError> {
        let sum: f64 = self.probs.values().sum();
        if (sum - 1.0).abs() > Self::NORMALIZATION_TOL {
            return Err(SimError::Unnormalized { sum });
        }
        Ok(())
    }
}

fn bitstring(index: usize, n_qubits: u8) -> String {
    (0..n_qubits)
        .rev()
        .map(|q| if index >> q & 1 == 1 { '1' } else { '0' })
        .collect()
}

/// Probability of reading `read` given state bit `actual` under `e`.
fn confusion(e: ReadoutError, actual: usize, read: usize) -> f64 {
    match (actual, read) {
        (0, 0) => 1.0 - e.p01,
        (0, 1) => e.p01,
        (1, 0) => e.p10,
        _ => 1.0 - e.p10,
    }
}

/// Measure a state: seeded shot sampling of the Born probabilities
/// composed with per-qubit readout confusion, or the exact analytic
/// distribution in [`ShotMode::Exact`]. Same seed, same output.
pub fn measure(
    state: &[Complex64],
    readout: &ReadoutModel,
    shots: ShotMode,
    seed: u64,
) -> Distribution {
    let n_qubits = state.len().trailing_zeros() as u8;
    assert_eq!(1usize << n_qubits, state.len(), "state length not a power of two");
    assert!(
        readout.len() >= n_qubits as usize,
        "readout model covers {} qubit(s), circuit has {n_qubits}",
        readout.len()
    );
    let born: Vec<f64> = state.iter().map(|a| a.norm_sqr()).collect();
    match shots {
        ShotMode::Exact => {
            let mut probs = BTreeMap::new();
            for read_index in 0..state.len() {
                let mut p = 0.0;
                for (actual_index, &pa) in born.iter().enumerate() {
                    let mut transition = pa;
                    for q in 0..n_qubits as usize {
                        transition *= confusion(
                            readout.qubit(q),
                            actual_index >> q & 1,
                            read_index >> q & 1,
                        );
                    }
                    p += transition;
                }
                probs.insert(bitstring(read_index, n_qubits), p);
            }
            Distribution { probs }
        }
        ShotMode::Sampled(shots) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut counts: BTreeMap<String, u64> = BTreeMap::new();
            for _ in 0..shots {
                let r: f64 = rng.random();
                let mut acc = 0.0;
                let mut drawn = state.len() - 1;
                for (i, &p) in born.iter().enumerate() {
                    acc += p;
                    if r < acc {
                        drawn = i;
                        break;
                    }
                }
                let mut read = drawn;
                for q in 0..n_qubits as usize {
                    let e = readout.qubit(q);
                    let flip_p = if drawn >> q & 1 == 0 { e.p01 } else { e.p10 };
                    if flip_p > 0.0 && rng.random_bool(flip_p) {
                        read ^= 1 << q;
                    }
                }
                *counts.entry(bitstring(read, n_qubits)).or_insert(0) += 1;
            }
            let probs = counts
                .into_iter()
                .map(|(k, v)| (k, v as f64 / shots as f64))
                .collect();
            Distribution { probs }
        }
    }
}

fn l1_distance(p: &Distribution, q: &Distribution) -> f64 {
    let keys: std::collections::BTreeSet<&str> = p.outcomes().chain(q.outcomes()).collect();
    keys.iter()
        .map(|k| (p.probability(k) - q.probability(k)).abs())
        .sum()
}

/// Total variation distance: half the L1 distance, in [0, 1].
pub fn tvd(p: &Distribution, q: &Distribution) -> Result<f64, SimError> {
    p.check_normalized()?;
    q.check_normalized()?;
    Ok(l1_distance(p, q) / 2.0)
}

/// TVD increase in percent, on the un-halved scale that tops out at 200:
/// `100 * (sum|flipped - ideal| - sum|original - ideal|)`. May be slightly
/// negative under shot noise; callers report it as-is.
pub fn tvd_increase_pct(
    flipped: &Distribution,
    original: &Distribution,
    ideal: &Distribution,
) -> f64 {
    100.0 * (l1_distance(flipped, ideal) - l1_distance(original, ideal))
}

/// Closed-form ideal measurement distribution for each gate experiment:
/// single-qubit gates applied to |0>, CNOT inside Bell-state preparation.
pub fn ideal_distribution(gate: &Gate) -> Distribution {
    let probs: BTreeMap<String, f64> = match gate {
        Gate::X => [("1".to_string(), 1.0)].into(),
        Gate::Sx | Gate::H => [("0".to_string(), 0.5), ("1".to_string(), 0.5)].into(),
        Gate::Rx(theta) => {
            let p1 = (theta / 2.0).sin().powi(2);
            [("0".to_string(), 1.0 - p1), ("1".to_string(), p1)].into()
        }
        Gate::Cnot => [("00".to_string(), 0.5), ("11".to_string(), 0.5)].into(),
    };
    Distribution { probs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::test_support::synthetic_backend;
    use crate::pulse_model::ComplexAmp;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_3, PI};

    fn one_qubit(gate: Gate) -> Circuit {
        Circuit::new(
            1,
            vec![CircuitOp {
                gate,
                qubits: vec![0],
            }],
        )
        .unwrap()
    }

    fn bell() -> Circuit {
        Circuit::new(
            2,
            vec![
                CircuitOp {
                    gate: Gate::H,
                    qubits: vec![0],
                },
                CircuitOp {
                    gate: Gate::Cnot,
                    qubits: vec![0, 1],
                },
            ],
        )
        .unwrap()
    }

    fn exact_noiseless(circuit: &Circuit, backend: &BackendConfig) -> Distribution {
        let state = run_circuit(circuit, backend, None).unwrap();
        measure(
            &state,
            &ReadoutModel::noiseless(circuit.n_qubits() as usize),
            ShotMode::Exact,
            0,
        )
    }

    #[test]
    fn nominal_gates_reproduce_textbook_distributions() {
        let backend = synthetic_backend();
        let cases: Vec<(Gate, Vec<(&str, f64)>)> = vec![
            (Gate::X, vec![("0", 0.0), ("1", 1.0)]),
            (Gate::H, vec![("0", 0.5), ("1", 0.5)]),
            (Gate::Sx, vec![("0", 0.5), ("1", 0.5)]),
            (Gate::Rx(FRAC_PI_3), vec![("0", 0.75), ("1", 0.25)]),
        ];
        for (gate, expected) in cases {
            let dist = exact_noiseless(&one_qubit(gate), &backend);
            for (outcome, p) in expected {
                assert!(
                    (dist.probability(outcome) - p).abs() < 1e-12,
                    "{gate}: P({outcome}) = {}",
                    dist.probability(outcome)
                );
            }
        }
        let dist = exact_noiseless(&bell(), &backend);
        assert!((dist.probability("00") - 0.5).abs() < 1e-12);
        assert!((dist.probability("11") - 0.5).abs() < 1e-12);
        assert!(dist.probability("01") < 1e-12);
        assert!(dist.probability("10") < 1e-12);
    }

    #[test]
    fn halved_amplitude_gives_half_excitation() {
        let backend = synthetic_backend();
        let nominal = backend.calibration_for(&Gate::X).unwrap();
        let halved = GateCalibration {
            amp: ComplexAmp::new(nominal.amp.re / 2.0, nominal.amp.im / 2.0),
            ..nominal.clone()
        };
        let u = pulse_to_unitary(&halved, &nominal, &FrameState::new()).unwrap();
        let GateUnitary::Single(m) = u else {
            panic!("single-qubit gate")
        };
        let p1 = m[1][0].norm_sqr();
        assert!((p1 - 0.5).abs() < 1e-12, "got {p1}");
    }

    #[test]
    fn collapsed_amplitude_acts_like_identity() {
        let backend = synthetic_backend();
        let nominal = backend.calibration_for(&Gate::X).unwrap();
        let tiny = GateCalibration {
            amp: ComplexAmp::new(2.24e-11, 0.0),
            ..nominal.clone()
        };
        let u = pulse_to_unitary(&tiny, &nominal, &FrameState::new()).unwrap();
        let GateUnitary::Single(m) = u else {
            panic!("single-qubit gate")
        };
        assert!(m[1][0].norm_sqr() < 1e-18);
        assert!((m[0][0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn produced_unitaries_are_unitary() {
        let backend = synthetic_backend();
        let frame = FrameState::new();
        for gate in [Gate::X, Gate::Sx, Gate::H, Gate::Rx(FRAC_PI_3), Gate::Cnot] {
            let nominal = backend.calibration_for(&gate).unwrap();
            let u = pulse_to_unitary(&nominal, &nominal, &frame).unwrap();
            assert!(unitarity_defect(&u) < 1e-10, "gate {gate}");
        }
    }

    #[test]
    fn invalid_pulse_is_refused_as_halt() {
        let backend = synthetic_backend();
        let nominal = backend.calibration_for(&Gate::X).unwrap();
        let blown = GateCalibration {
            amp: ComplexAmp::new(1.7e3, 0.0),
            ..nominal.clone()
        };
        let err = pulse_to_unitary(&blown, &nominal, &FrameState::new()).unwrap_err();
        assert!(err.is_halt());
    }

    #[test]
    fn run_circuit_preserves_norm() {
        let backend = synthetic_backend();
        for circuit in [one_qubit(Gate::H), one_qubit(Gate::Sx), bell()] {
            let state = run_circuit(&circuit, &backend, None).unwrap();
            let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn circuit_validation_rejects_bad_shapes() {
        assert!(Circuit::new(3, vec![]).is_err());
        assert!(Circuit::new(
            1,
            vec![CircuitOp {
                gate: Gate::Cnot,
                qubits: vec![0, 1],
            }],
        )
        .is_err());
        assert!(Circuit::new(
            2,
            vec![CircuitOp {
                gate: Gate::Cnot,
                qubits: vec![1, 1],
            }],
        )
        .is_err());
    }

    #[test]
    fn measure_exact_composes_readout_confusion() {
        // State |1>, p10 = 0.02.
        let state = vec![c(0.0, 0.0), c(1.0, 0.0)];
        let readout = ReadoutModel::new(vec![ReadoutError { p01: 0.0, p10: 0.02 }]);
        let dist = measure(&state, &readout, ShotMode::Exact, 0);
        assert!((dist.probability("0") - 0.02).abs() < 1e-15);
        assert!((dist.probability("1") - 0.98).abs() < 1e-15);
    }

    #[test]
    fn measure_sampled_matches_confusion_within_three_sigma() {
        let state = vec![c(0.0, 0.0), c(1.0, 0.0)];
        let readout = ReadoutModel::new(vec![ReadoutError { p01: 0.0, p10: 0.02 }]);
        let shots = 1_000_000u64;
        let dist = measure(&state, &readout, ShotMode::Sampled(shots), 1234);
        let sigma = (0.02f64 * 0.98 / shots as f64).sqrt();
        assert!((dist.probability("0") - 0.02).abs() < 3.0 * sigma);
    }

    #[test]
    fn measure_same_seed_is_identical() {
        let backend = synthetic_backend();
        let state = run_circuit(&one_qubit(Gate::H), &backend, None).unwrap();
        let readout = ReadoutModel::new(vec![ReadoutError {
            p01: 0.012,
            p10: 0.028,
        }]);
        let a = measure(&state, &readout, ShotMode::Sampled(4096), 77);
        let b = measure(&state, &readout, ShotMode::Sampled(4096), 77);
        assert_eq!(a, b);
        let other = measure(&state, &readout, ShotMode::Sampled(4096), 78);
        assert_ne!(a, other);
    }

    #[test]
    fn zero_readout_error_measures_pure_state_exactly() {
        let state = vec![c(0.0, 0.0), c(1.0, 0.0)];
        let dist = measure(&state, &ReadoutModel::noiseless(1), ShotMode::Sampled(500), 5);
        assert_eq!(dist.probability("1"), 1.0);
    }

    #[test]
    fn tvd_hand_examples() {
        let p = Distribution::from_probs([("0".into(), 0.5), ("1".into(), 0.5)].into()).unwrap();
        let q = Distribution::from_probs([("0".into(), 0.75), ("1".into(), 0.25)].into()).unwrap();
        assert_eq!(tvd(&p, &p).unwrap(), 0.0);
        assert!((tvd(&p, &q).unwrap() - 0.25).abs() < 1e-15);
        let zero = Distribution::from_probs([("0".into(), 1.0)].into()).unwrap();
        let one = Distribution::from_probs([("1".into(), 1.0)].into()).unwrap();
        assert_eq!(tvd(&zero, &one).unwrap(), 1.0);
    }

    #[test]
    fn tvd_rejects_unnormalized() {
        let bad = Distribution {
            probs: [("0".into(), 0.4), ("1".into(), 0.4)].into(),
        };
        let good = Distribution::from_probs([("0".into(), 1.0)].into()).unwrap();
        assert!(matches!(
            tvd(&bad, &good),
            Err(SimError::Unnormalized { .. })
        ));
    }

    #[test]
    fn tvd_increase_hand_examples() {
        let ideal = Distribution::from_probs([("1".into(), 1.0)].into()).unwrap();
        let zero = Distribution::from_probs([("0".into(), 1.0)].into()).unwrap();
        let half =
            Distribution::from_probs([("0".into(), 0.5), ("1".into(), 0.5)].into()).unwrap();
        assert_eq!(tvd_increase_pct(&ideal, &ideal, &ideal), 0.0);
        assert_eq!(tvd_increase_pct(&zero, &ideal, &ideal), 200.0);
        assert_eq!(tvd_increase_pct(&half, &ideal, &ideal), 100.0);
    }

    #[test]
    fn dose_response_is_monotone_toward_zero_amplitude() {
        let backend = synthetic_backend();
        let nominal = backend.calibration_for(&Gate::X).unwrap();
        let ideal = ideal_distribution(&Gate::X);
        let mut last = -1.0;
        for step in (0..=10).rev() {
            let scale = step as f64 / 10.0;
            let scaled = GateCalibration {
                amp: ComplexAmp::new((nominal.amp.re as f64 * scale) as f32, 0.0),
                ..nominal.clone()
            };
            let u = pulse_to_unitary(&scaled, &nominal, &FrameState::new()).unwrap();
            let GateUnitary::Single(m) = u else {
                panic!("single-qubit gate")
            };
            let mut state = vec![c(1.0, 0.0), c(0.0, 0.0)];
            apply_single(&mut state, 0, &m);
            let dist = measure(&state, &ReadoutModel::noiseless(1), ShotMode::Exact, 0);
            let t = tvd(&dist, &ideal).unwrap();
            assert!(t >= last - 1e-12, "tvd fell from {last} to {t}");
            last = t;
        }
    }

    proptest! {
        #[test]
        fn tvd_metric_axioms(raw_p in prop::collection::vec(0.0f64..1.0, 4),
                             raw_q in prop::collection::vec(0.0f64..1.0, 4),
                             raw_r in prop::collection::vec(0.0f64..1.0, 4)) {
            let normalize = |raw: &[f64]| {
                let sum: f64 = raw.iter().sum();
                prop_assume!(sum > 1e-6);
                let probs = raw
                    .iter()
                    .enumerate()
                    .map(|(i, &v)| (bitstring(i, 2), v / sum))
                    .collect();
                Ok(Distribution { probs })
            };
            let p = normalize(&raw_p)?;
            let q = normalize(&raw_q)?;
            let r = normalize(&raw_r)?;
            let pq = tvd(&p, &q).unwrap();
            let qp = tvd(&q, &p).unwrap();
            prop_assert!((pq - qp).abs() < 1e-12);
            prop_assert!(tvd(&p, &p).unwrap() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&pq));
            let pr = tvd(&p, &r).unwrap();
            let rq = tvd(&r, &q).unwrap();
            prop_assert!(pq <= pr + rq + 1e-12);
        }

        #[test]
        fn sampled_distributions_normalize(seed: u64) {
            let backend = synthetic_backend();
            let state = run_circuit(&one_qubit(Gate::H), &backend, None).unwrap();
            let readout = ReadoutModel::new(vec![ReadoutError { p01: 0.012, p10: 0.028 }]);
            let dist = measure(&state, &readout, ShotMode::Sampled(1024), seed);
            let sum: f64 = dist.iter().map(|(_, p)| p).sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn pi_rotation_equals_x_up_to_global_phase() {
        let m = drive(PI, 0.0);
        // Off-diagonal magnitudes 1, diagonal ~0.
        assert!(m[0][0].norm() < 1e-15);
        assert!((m[0][1].norm() - 1.0).abs() < 1e-15);
        assert!((m[1][0].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn h_composite_matches_hadamard_up_to_global_phase() {
        let backend = synthetic_backend();
        let nominal = backend.calibration_for(&Gate::H).unwrap();
        let u = pulse_to_unitary(&nominal, &nominal, &FrameState::new()).unwrap();
        let GateUnitary::Single(m) = u else {
            panic!("single-qubit gate")
        };
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let h = [
            [c(inv_sqrt2, 0.0), c(inv_sqrt2, 0.0)],
            [c(inv_sqrt2, 0.0), c(-inv_sqrt2, 0.0)],
        ];
        let phase = m[0][0] / h[0][0];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[i][j] - phase * h[i][j]).norm() < 1e-12, "entry {i}{j}");
            }
        }
    }

    #[test]
    fn cnot_composite_matches_cnot_up_to_global_phase() {
        let backend = synthetic_backend();
        let nominal = backend.calibration_for(&Gate::Cnot).unwrap();
        let u = pulse_to_unitary(&nominal, &nominal, &FrameState::new()).unwrap();
        let GateUnitary::Two(m) = u else {
            panic!("two-qubit gate")
        };
        // CNOT in the |control, target> basis.
        let expected = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 1.0, 0.0],
        ];
        let phase = m[0][0];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                let want = phase * expected[i][j];
                assert!((m[i][j] - want).norm() < 1e-12, "entry {i}{j}: {}", m[i][j]);
            }
        }
    }
}
