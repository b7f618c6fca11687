//! Single-bit-flip fault injection for quantum gate pulse parameters.
//!
//! The library models a pulse controller whose gate calibrations (complex
//! I/Q amplitude and phase, stored as 32-bit IEEE 754 words) can suffer
//! single-bit upsets. It provides:
//!
//! * bit-exact float encode/decode/flip/classify primitives ([`float32_bits`]),
//! * in-word error-correcting codecs: 3-bit repetition over the seven
//!   highest-impact bits and a Hamming(29,24) code ([`ecc`]),
//! * DRAG pulse rendering, validity checking, and flip injection
//!   ([`pulse_model`]),
//! * an analytic pulse-to-unitary oracle with a small statevector engine,
//!   seeded shot sampling, and TVD metrics ([`quantum_sim`]),
//! * experiment campaigns: per-bit sweeps, Monte-Carlo random flips, and
//!   ECC effectiveness evaluation, with CSV/JSON/SVG reports ([`harness`],
//!   [`report`]),
//! * the `pulseflip` command-line interface ([`cli`]).
//!
//! Everything is deterministic given a configuration and a master seed;
//! campaign items derive their own seeds, so reports are byte-identical
//! under any worker count.

pub mod cli;
pub mod config;
pub mod ecc;
pub mod float32_bits;
pub mod harness;
pub mod pulse_model;
pub mod quantum_sim;
pub mod report;

pub use config::{BackendConfig, ConfigError};
pub use ecc::{hamming_decode, hamming_encode, majority3, rep3_decode, rep3_encode};
pub use ecc::{DecodeReport, HammingLayout, Rep3Layout};
pub use float32_bits::{
    classify_bit, decode_f32, encode_f32, flip_bit, BitClass, BitIndex, Float32Word,
};
pub use harness::{
    ecc_eval, interpolate_invalid, monte_carlo, sweep_bits, EccEvalResult, EccScheme,
    MonteCarloResult, SweepResult,
};
pub use pulse_model::{
    check_validity, perturb_parameter, render_drag, shift_phase, ComplexAmp, DragEnvelope,
    FlipTarget, FrameState, Gate, GateCalibration, PulseValidity,
};
pub use quantum_sim::{
    ideal_distribution, measure, pulse_to_unitary, run_circuit, tvd, tvd_increase_pct, Circuit,
    CircuitOp, Distribution, GateUnitary, Perturbation, ReadoutError, ReadoutModel, ShotMode,
};
pub use report::{write_report, ReportFormat};
