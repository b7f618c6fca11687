//! Experiment campaigns over bit indices: per-bit flip sweeps with
//! invalid-point interpolation, Monte-Carlo random flips evaluated before
//! and after the repetition code, and per-bit ECC effectiveness runs.
//!
//! Campaign items are independent and may run on worker threads; results
//! are merged in item order and every item derives its own RNG seed from
//! the master seed, so any worker count yields byte-identical reports.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{BackendConfig, ConfigError};
use crate::ecc::HammingLayout;
use crate::float32_bits::{BitIndex, Float32Word, WORD_BITS};
use crate::pulse_model::{
    check_validity, perturb_parameter, ComplexAmp, FlipTarget, Gate, GateCalibration,
};
use crate::quantum_sim::{
    ideal_distribution, measure, run_circuit, run_circuit_with_calibration, tvd_increase_pct,
    Circuit, CircuitOp, Distribution, Perturbation, ShotMode, SimError,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("gate {gate} does not use an imaginary amplitude component (target {target} unavailable)")]
    InvalidTarget { gate: String, target: FlipTarget },
    #[error("cannot interpolate a series with no measured points")]
    AllInvalid,
    #[error("monte-carlo needs at least one run")]
    ZeroRuns,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

// Seed streams: every campaign item draws from its own deterministic
// stream so schedules and worker counts cannot change any sample.
const STREAM_ORIGINAL: u64 = 1;
const STREAM_SWEEP: u64 = 2;
const STREAM_MC_DRAW: u64 = 3;
const STREAM_MC_PRE: u64 = 4;
const STREAM_MC_POST: u64 = 5;
const STREAM_ECC: u64 = 6;
const STREAM_ECC_OVERHEAD: u64 = 7;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn derive_seed(master: u64, stream: u64, item: u64) -> u64 {
    splitmix64(splitmix64(master ^ stream.rotate_left(17)) ^ item)
}

/// Run `f(0..n)` on up to `workers` threads, returning results in index
/// order regardless of scheduling.
fn parallel_map<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.max(1).min(n.max(1));
    if workers == 1 {
        return (0..n).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let chunk_size = n.div_ceil(workers);
    std::thread::scope(|scope| {
        for (w, chunk) in slots.chunks_mut(chunk_size).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(f(w * chunk_size + k));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("slot filled")).collect()
}

/// Minimal circuit exercising one gate: single-qubit gates run alone from
/// |0>, the CNOT runs inside Bell-state preparation with flips applied
/// only to its cross-resonance pulse.
pub fn experiment_circuit(gate: &Gate) -> Circuit {
    let ops = match gate {
        Gate::Cnot => vec![
            CircuitOp {
                gate: Gate::H,
                qubits: vec![0],
            },
            CircuitOp {
                gate: Gate::Cnot,
                qubits: vec![0, 1],
            },
        ],
        other => vec![CircuitOp {
            gate: *other,
            qubits: vec![0],
        }],
    };
    Circuit::new(gate.arity(), ops).expect("experiment circuits are well-formed")
}

/// Status of one per-bit entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    Measured,
    InvalidInterpolated,
    Halted,
}

impl EntryStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            EntryStatus::Measured => "measured",
            EntryStatus::InvalidInterpolated => "invalid_interpolated",
            EntryStatus::Halted => "halted",
        }
    }
}

/// One bit index of a campaign series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitEntry {
    pub bit_index: u8,
    pub tvd_increase_pct: f64,
    pub status: EntryStatus,
}

/// Per-bit TVD-increase series for one (gate, target) sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub backend: String,
    pub gate: String,
    pub target: FlipTarget,
    pub shots: ShotMode,
    pub seed: u64,
    /// Un-halved percent L1 distance between the unflipped run and the
    /// ideal distribution; the baseline subtracted from every entry.
    pub original_vs_ideal_pct: f64,
    pub entries: Vec<BitEntry>,
}

impl SweepResult {
    /// Indices whose flip halted the pulse (reported interpolated).
    pub fn interpolated_indices(&self) -> Vec<u8> {
        self.entries
            .iter()
            .filter(|e| e.status != EntryStatus::Measured)
            .map(|e| e.bit_index)
            .collect()
    }

    pub fn max_entry(&self) -> &BitEntry {
        self.entries
            .iter()
            .max_by(|a, b| {
                a.tvd_increase_pct
                    .partial_cmp(&b.tvd_increase_pct)
                    .expect("finite series")
            })
            .expect("32 entries")
    }

    /// Mean over an inclusive index range of the filled series.
    pub fn mean_over(&self, lo: u8, hi: u8) -> f64 {
        let values: Vec<f64> = self
            .entries
            .iter()
            .filter(|e| e.bit_index >= lo && e.bit_index <= hi)
            .map(|e| e.tvd_increase_pct)
            .collect();
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// Baseline distributions shared by every item of a campaign.
struct Baseline {
    circuit: Circuit,
    ideal: Distribution,
    original: Distribution,
    original_vs_ideal_pct: f64,
}

fn baseline(
    backend: &BackendConfig,
    gate: &Gate,
    shots: ShotMode,
    seed: u64,
) -> Result<Baseline, HarnessError> {
    let circuit = experiment_circuit(gate);
    let ideal = ideal_distribution(gate);
    let state = run_circuit(&circuit, backend, None)?;
    let original = measure(
        &state,
        backend.readout(),
        shots,
        derive_seed(seed, STREAM_ORIGINAL, 0),
    );
    let original_vs_ideal_pct = tvd_increase_pct(&original, &ideal, &ideal);
    Ok(Baseline {
        circuit,
        ideal,
        original,
        original_vs_ideal_pct,
    })
}

/// Flip each of the 32 bits of the targeted parameter one at a time,
/// measure the TVD increase, and fill halted indices by interpolation.
pub fn sweep_bits(
    backend: &BackendConfig,
    gate: &Gate,
    target: FlipTarget,
    shots: ShotMode,
    seed: u64,
    workers: usize,
) -> Result<SweepResult, HarnessError> {
    let nominal = backend.calibration_for(gate)?;
    if target == FlipTarget::AmpImag && !nominal.imag_used {
        return Err(HarnessError::InvalidTarget {
            gate: gate.to_string(),
            target,
        });
    }
    let base = baseline(backend, gate, shots, seed)?;
    let raw = parallel_map(WORD_BITS as usize, workers, |i| -> Result<Option<f64>, SimError> {
        let perturbation = Perturbation {
            gate: *gate,
            target,
            index: BitIndex::new(i as u8).expect("index below 32"),
        };
        match run_circuit(&base.circuit, backend, Some(&perturbation)) {
            Ok(state) => {
                let dist = measure(
                    &state,
                    backend.readout(),
                    shots,
                    derive_seed(seed, STREAM_SWEEP, i as u64),
                );
                Ok(Some(tvd_increase_pct(&dist, &base.original, &base.ideal)))
            }
            Err(e) if e.is_halt() => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut values = Vec::with_capacity(WORD_BITS as usize);
    for item in raw {
        values.push(item?);
    }
    let entries = fill_series(&values)?;
    Ok(SweepResult {
        backend: backend.name().to_string(),
        gate: gate.to_string(),
        target,
        shots,
        seed,
        original_vs_ideal_pct: base.original_vs_ideal_pct,
        entries,
    })
}

/// Fill gaps in a per-bit series by linear interpolation between the
/// nearest measured neighbours; edge gaps extend the nearest measured
/// value. Rejects an all-gap series.
pub fn interpolate_invalid(series: &[Option<f64>]) -> Result<Vec<f64>, HarnessError> {
    let measured: Vec<(usize, f64)> = series
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    if measured.is_empty() {
        return Err(HarnessError::AllInvalid);
    }
    let filled = series
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if let Some(v) = v {
                return *v;
            }
            let next = measured.iter().find(|(j, _)| *j > i);
            let prev = measured.iter().rev().find(|(j, _)| *j < i);
            match (prev, next) {
                (Some(&(j, a)), Some(&(k, b))) => {
                    a + (b - a) * (i - j) as f64 / (k - j) as f64
                }
                (Some(&(_, a)), None) => a,
                (None, Some(&(_, b))) => b,
                (None, None) => unreachable!("measured is non-empty"),
            }
        })
        .collect();
    Ok(filled)
}

fn fill_series(values: &[Option<f64>]) -> Result<Vec<BitEntry>, HarnessError> {
    let filled = interpolate_invalid(values)?;
    Ok(values
        .iter()
        .zip(&filled)
        .enumerate()
        .map(|(i, (raw, &value))| BitEntry {
            bit_index: i as u8,
            tvd_increase_pct: value,
            status: if raw.is_some() {
                EntryStatus::Measured
            } else {
                EntryStatus::InvalidInterpolated
            },
        })
        .collect())
}

/// One Monte-Carlo run: a uniformly drawn bit index with the damage it
/// caused before and after rep3 correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSample {
    pub run: u32,
    pub bit_index: u8,
    pub pre_ecc_pct: f64,
    pub post_ecc_pct: f64,
    /// Draws discarded because they landed on a halting index.
    pub redraws: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub pre_count: u32,
    pub post_count: u32,
}

/// Random-flip campaign result with pre/post-correction histograms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub backend: String,
    pub gate: String,
    pub runs: u32,
    pub shots: ShotMode,
    pub seed: u64,
    pub original_vs_ideal_pct: f64,
    pub samples: Vec<MonteCarloSample>,
    pub bin_width_pct: f64,
    pub bins: Vec<HistogramBin>,
}

impl MonteCarloResult {
    pub fn max_pre(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.pre_ecc_pct)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_post(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| s.post_ecc_pct)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Draw `runs` uniform bit indices in the real amplitude of `gate`
/// (re-drawing any index whose flip halts the pulse), and record the TVD
/// increase with and without rep3 protection.
pub fn monte_carlo(
    backend: &BackendConfig,
    gate: &Gate,
    runs: u32,
    shots: ShotMode,
    seed: u64,
    workers: usize,
) -> Result<MonteCarloResult, HarnessError> {
    if runs == 0 {
        return Err(HarnessError::ZeroRuns);
    }
    let nominal = backend.calibration_for(gate)?;
    let base = baseline(backend, gate, shots, seed)?;
    // Halting set, computed once: indices whose raw flip is untransmittable.
    let halts: Vec<bool> = (0..WORD_BITS)
        .map(|i| {
            let index = BitIndex::new(i).expect("index below 32");
            let flipped = perturb_parameter(&nominal, FlipTarget::AmpReal, index)
                .expect("real target always exists");
            !check_validity(&flipped.envelope()).valid
        })
        .collect();
    if halts.iter().all(|&h| h) {
        return Err(HarnessError::AllInvalid);
    }
    let samples_raw = parallel_map(runs as usize, workers, |r| -> Result<MonteCarloSample, HarnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_MC_DRAW, r as u64));
        let mut redraws = 0u32;
        let index = loop {
            let candidate = rng.random_range(0..WORD_BITS as usize) as u8;
            if !halts[candidate as usize] {
                break BitIndex::new(candidate).expect("index below 32");
            }
            redraws += 1;
        };
        let perturbation = Perturbation {
            gate: *gate,
            target: FlipTarget::AmpReal,
            index,
        };
        let pre_state = run_circuit(&base.circuit, backend, Some(&perturbation))?;
        let pre_dist = measure(
            &pre_state,
            backend.readout(),
            shots,
            derive_seed(seed, STREAM_MC_PRE, r as u64),
        );
        let decoded = decode_after_flip(&nominal, EccScheme::Rep3, index);
        let post_state = run_circuit_with_calibration(&base.circuit, backend, &decoded)?;
        let post_dist = measure(
            &post_state,
            backend.readout(),
            shots,
            derive_seed(seed, STREAM_MC_POST, r as u64),
        );
        Ok(MonteCarloSample {
            run: r as u32,
            bit_index: index.get(),
            pre_ecc_pct: tvd_increase_pct(&pre_dist, &base.original, &base.ideal),
            post_ecc_pct: tvd_increase_pct(&post_dist, &base.original, &base.ideal),
            redraws,
        })
    });
    let mut samples = Vec::with_capacity(runs as usize);
    for item in samples_raw {
        samples.push(item?);
    }
    let (bin_width_pct, bins) = build_histogram(&samples);
    Ok(MonteCarloResult {
        backend: backend.name().to_string(),
        gate: gate.to_string(),
        runs,
        shots,
        seed,
        original_vs_ideal_pct: base.original_vs_ideal_pct,
        samples,
        bin_width_pct,
        bins,
    })
}

const HISTOGRAM_BIN_WIDTH: f64 = 5.0;

fn build_histogram(samples: &[MonteCarloSample]) -> (f64, Vec<HistogramBin>) {
    let values = samples
        .iter()
        .flat_map(|s| [s.pre_ecc_pct, s.post_ecc_pct]);
    let min = values.clone().fold(f64::INFINITY, f64::min);
    let max = values.fold(f64::NEG_INFINITY, f64::max);
    let lo_edge = (min / HISTOGRAM_BIN_WIDTH).floor() * HISTOGRAM_BIN_WIDTH;
    let bin_count = (((max - lo_edge) / HISTOGRAM_BIN_WIDTH).floor() as usize + 1).max(1);
    let mut bins: Vec<HistogramBin> = (0..bin_count)
        .map(|b| HistogramBin {
            lo: lo_edge + b as f64 * HISTOGRAM_BIN_WIDTH,
            hi: lo_edge + (b + 1) as f64 * HISTOGRAM_BIN_WIDTH,
            pre_count: 0,
            post_count: 0,
        })
        .collect();
    let slot = |v: f64| {
        (((v - lo_edge) / HISTOGRAM_BIN_WIDTH).floor() as usize).min(bin_count - 1)
    };
    for sample in samples {
        bins[slot(sample.pre_ecc_pct)].pre_count += 1;
        bins[slot(sample.post_ecc_pct)].post_count += 1;
    }
    (HISTOGRAM_BIN_WIDTH, bins)
}

/// Which in-word codec an ECC evaluation exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EccScheme {
    Rep3,
    Hamming5,
}

impl std::fmt::Display for EccScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EccScheme::Rep3 => f.write_str("rep3"),
            EccScheme::Hamming5 => f.write_str("hamming5"),
        }
    }
}

impl EccScheme {
    fn encode(self, word: Float32Word) -> Float32Word {
        match self {
            EccScheme::Rep3 => crate::ecc::rep3_encode(word),
            EccScheme::Hamming5 => HammingLayout::new().encode(word),
        }
    }

    fn decode(self, stored: Float32Word) -> Float32Word {
        match self {
            EccScheme::Rep3 => crate::ecc::rep3_decode(stored).corrected_word,
            EccScheme::Hamming5 => HammingLayout::new().decode(stored).corrected_word,
        }
    }
}

/// Store the real amplitude encoded, flip `index` in storage, decode, and
/// return the calibration the controller would actually replay.
fn decode_after_flip(nominal: &GateCalibration, scheme: EccScheme, index: BitIndex) -> GateCalibration {
    let stored = scheme.encode(Float32Word::from_f32(nominal.amp.re));
    let decoded = scheme.decode(stored.flip(index));
    GateCalibration {
        amp: ComplexAmp::new(decoded.to_f32(), nominal.amp.im),
        ..nominal.clone()
    }
}

/// Per-bit post-correction series for one codec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EccEvalResult {
    pub backend: String,
    pub gate: String,
    pub scheme: EccScheme,
    pub shots: ShotMode,
    pub seed: u64,
    pub original_vs_ideal_pct: f64,
    /// TVD increase of the unflipped encode/decode round trip: the cost of
    /// sacrificing the repurposed low bits.
    pub nominal_overhead_pct: f64,
    pub entries: Vec<BitEntry>,
}

impl EccEvalResult {
    pub fn max_entry(&self) -> &BitEntry {
        self.entries
            .iter()
            .max_by(|a, b| {
                a.tvd_increase_pct
                    .partial_cmp(&b.tvd_increase_pct)
                    .expect("finite series")
            })
            .expect("32 entries")
    }
}

/// For each bit index: encode the real-amplitude word, flip the bit in
/// storage, decode with correction, and measure the residual TVD increase.
pub fn ecc_eval(
    backend: &BackendConfig,
    gate: &Gate,
    scheme: EccScheme,
    shots: ShotMode,
    seed: u64,
    workers: usize,
) -> Result<EccEvalResult, HarnessError> {
    let nominal = backend.calibration_for(gate)?;
    let base = baseline(backend, gate, shots, seed)?;
    // Clean encode/decode round trip, no flip: the pure cost of the scheme.
    let clean = {
        let stored = scheme.encode(Float32Word::from_f32(nominal.amp.re));
        let decoded = scheme.decode(stored);
        GateCalibration {
            amp: ComplexAmp::new(decoded.to_f32(), nominal.amp.im),
            ..nominal.clone()
        }
    };
    let overhead_state = run_circuit_with_calibration(&base.circuit, backend, &clean)?;
    let overhead_dist = measure(
        &overhead_state,
        backend.readout(),
        shots,
        derive_seed(seed, STREAM_ECC_OVERHEAD, 0),
    );
    let nominal_overhead_pct = tvd_increase_pct(&overhead_dist, &base.original, &base.ideal);
    let raw = parallel_map(WORD_BITS as usize, workers, |i| -> Result<Option<f64>, SimError> {
        let index = BitIndex::new(i as u8).expect("index below 32");
        let decoded = decode_after_flip(&nominal, scheme, index);
        match run_circuit_with_calibration(&base.circuit, backend, &decoded) {
            Ok(state) => {
                let dist = measure(
                    &state,
                    backend.readout(),
                    shots,
                    derive_seed(seed, STREAM_ECC, i as u64),
                );
                Ok(Some(tvd_increase_pct(&dist, &base.original, &base.ideal)))
            }
            Err(e) if e.is_halt() => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut values = Vec::with_capacity(WORD_BITS as usize);
    for item in raw {
        values.push(item?);
    }
    let entries = fill_series(&values)?;
    Ok(EccEvalResult {
        backend: backend.name().to_string(),
        gate: gate.to_string(),
        scheme,
        shots,
        seed,
        original_vs_ideal_pct: base.original_vs_ideal_pct,
        nominal_overhead_pct,
        entries,
    })
}
