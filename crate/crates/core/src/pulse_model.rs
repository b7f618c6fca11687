//! Pulse parameterization: complex I/Q amplitude, DRAG envelope rendering,
//! frame-phase bookkeeping, validity checking, and single-bit flip
//! injection into stored parameters.
//!
//! All flippable parameters (amplitude real part, amplitude imaginary part,
//! phase) are stored in single precision; flips act on those 32-bit
//! patterns. Envelope metadata (duration, sigma, beta) is not flip-target
//! storage and stays in double precision.

use std::f64::consts::TAU;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::float32_bits::{BitIndex, Float32Word};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PulseError {
    #[error("gate {gate} does not use an imaginary amplitude component")]
    ImagUnused { gate: String },
    #[error("phase shift must be finite, got {0}")]
    NonFinitePhase(f64),
    #[error("invalid envelope: {0}")]
    InvalidEnvelope(String),
}

/// Complex drive amplitude, stored as an I/Q pair of single-precision
/// values exactly as it would sit in controller memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexAmp {
    pub re: f32,
    pub im: f32,
}

impl ComplexAmp {
    pub fn new(re: f32, im: f32) -> Self {
        ComplexAmp { re, im }
    }

    pub fn as_complex(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }

    pub fn norm(self) -> f64 {
        self.as_complex().norm()
    }

    pub fn arg(self) -> f64 {
        self.as_complex().arg()
    }

    pub fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// A renderable DRAG pulse: Gaussian envelope with a derivative-scaled
/// quadrature correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DragEnvelope {
    /// Sample count, >= 1.
    pub duration: u32,
    /// Gaussian width in samples, > 0.
    pub sigma: f64,
    /// Dimensionless DRAG coefficient.
    pub beta: f64,
    pub amp: ComplexAmp,
}

impl DragEnvelope {
    pub fn validate(&self) -> Result<(), PulseError> {
        if self.duration < 1 {
            return Err(PulseError::InvalidEnvelope(
                "duration must be at least 1 sample".into(),
            ));
        }
        if !self.sigma.is_finite() || self.sigma <= 0.0 {
            return Err(PulseError::InvalidEnvelope(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Render the DRAG samples:
/// `d_j = amp * g(t_j) * (1 + i * beta * (-(t_j - T/2) / sigma^2))`
/// with `g` the unit-peak Gaussian centered at `T/2` and `t_j = j + 0.5`.
pub fn render_drag(env: &DragEnvelope) -> Vec<Complex64> {
    let center = env.duration as f64 / 2.0;
    let amp = env.amp.as_complex();
    let inv_two_sigma_sq = 1.0 / (2.0 * env.sigma * env.sigma);
    (0..env.duration)
        .map(|j| {
            let t = j as f64 + 0.5;
            let x = t - center;
            let gauss = (-x * x * inv_two_sigma_sq).exp();
            let drag = Complex64::new(1.0, env.beta * (-x / (env.sigma * env.sigma)));
            amp * gauss * drag
        })
        .collect()
}

/// Result of the controller-side waveform check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseValidity {
    pub valid: bool,
    /// Peak sample magnitude; infinity when any sample is non-finite.
    pub max_norm: f64,
}

/// A pulse is transmittable iff every sample is finite and the peak sample
/// norm does not exceed 1.0. Invalidity is a result, not an error: the
/// harness records such pulses as halted.
pub fn check_validity(env: &DragEnvelope) -> PulseValidity {
    let mut max_norm = 0.0f64;
    for sample in render_drag(env) {
        let n = sample.norm();
        if !n.is_finite() {
            return PulseValidity {
                valid: false,
                max_norm: f64::INFINITY,
            };
        }
        max_norm = max_norm.max(n);
    }
    PulseValidity {
        valid: max_norm <= 1.0,
        max_norm,
    }
}

/// Accumulated modulation phase of a drive channel. A value type: thread it
/// through a simulation, never share it mutably.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrameState {
    phase: f64,
}

impl FrameState {
    pub fn new() -> Self {
        FrameState { phase: 0.0 }
    }

    /// Accumulated phase reduced to [0, 2*pi).
    pub fn phase(&self) -> f64 {
        self.phase.rem_euclid(TAU)
    }
}

/// Advance the channel frame: all subsequently generated pulses on the
/// channel pick up the new phase.
pub fn shift_phase(frame: FrameState, dphi: f64) -> Result<FrameState, PulseError> {
    if !dphi.is_finite() {
        return Err(PulseError::NonFinitePhase(dphi));
    }
    Ok(FrameState {
        phase: frame.phase + dphi,
    })
}

/// Which stored single-precision parameter a flip targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipTarget {
    AmpReal,
    AmpImag,
    Phase,
}

impl fmt::Display for FlipTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            FlipTarget::AmpReal => "real",
            FlipTarget::AmpImag => "imag",
            FlipTarget::Phase => "phase",
        };
        f.write_str(name)
    }
}

/// Gate whose pulse a calibration describes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X,
    Sx,
    H,
    /// Rotation about the x axis by the given angle in radians.
    Rx(f64),
    Cnot,
}

impl Gate {
    pub fn arity(&self) -> u8 {
        match self {
            Gate::Cnot => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gate::X => f.write_str("x"),
            Gate::Sx => f.write_str("sx"),
            Gate::H => f.write_str("h"),
            Gate::Rx(theta) => write!(f, "rx({theta})"),
            Gate::Cnot => f.write_str("cnot"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("unknown gate {0:?}; expected x, sx, h, cnot, or rx(<angle>)")]
pub struct ParseGateError(pub String);

impl std::str::FromStr for Gate {
    type Err = ParseGateError;

    /// Accepts `x`, `sx`, `h`, `cnot`, and `rx(<angle>)` where the angle is
    /// a decimal in radians, `pi`, or `pi/<n>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "x" => return Ok(Gate::X),
            "sx" => return Ok(Gate::Sx),
            "h" => return Ok(Gate::H),
            "cnot" => return Ok(Gate::Cnot),
            _ => {}
        }
        let angle_text = lower
            .strip_prefix("rx(")
            .and_then(|rest| rest.strip_suffix(')'))
            .ok_or_else(|| ParseGateError(s.to_string()))?;
        let angle = parse_angle(angle_text).ok_or_else(|| ParseGateError(s.to_string()))?;
        if !angle.is_finite() || angle <= 0.0 {
            return Err(ParseGateError(s.to_string()));
        }
        Ok(Gate::Rx(angle))
    }
}

fn parse_angle(text: &str) -> Option<f64> {
    let text = text.trim();
    if text == "pi" {
        return Some(std::f64::consts::PI);
    }
    if let Some(denominator) = text.strip_prefix("pi/") {
        let d: f64 = denominator.trim().parse().ok()?;
        return Some(std::f64::consts::PI / d);
    }
    text.parse().ok()
}

/// Calibrated pulse parameters for one gate: the flippable stored values
/// (amp, phase) plus envelope shape and the nominal rotation angle.
#[derive(Debug, Clone, PartialEq)]
pub struct GateCalibration {
    pub gate: Gate,
    pub amp: ComplexAmp,
    /// Stored single-precision frame-phase offset applied with the pulse.
    pub phase: f32,
    /// Nominal rotation angle delivered at the calibrated amplitude.
    pub theta_nom: f64,
    pub duration: u32,
    pub sigma: f64,
    pub beta: f64,
    /// Whether the Q component is part of this gate's calibration. The X
    /// gate does not use one; flips targeting it are rejected.
    pub imag_used: bool,
}

impl GateCalibration {
    pub fn envelope(&self) -> DragEnvelope {
        DragEnvelope {
            duration: self.duration,
            sigma: self.sigma,
            beta: self.beta,
            amp: self.amp,
        }
    }
}

/// Return a calibration identical to `cal` except that one bit of the
/// targeted single-precision parameter is flipped.
pub fn perturb_parameter(
    cal: &GateCalibration,
    target: FlipTarget,
    index: BitIndex,
) -> Result<GateCalibration, PulseError> {
    let flip = |v: f32| Float32Word::from_f32(v).flip(index).to_f32();
    let mut out = cal.clone();
    match target {
        FlipTarget::AmpReal => out.amp.re = flip(cal.amp.re),
        FlipTarget::AmpImag => {
            if !cal.imag_used {
                return Err(PulseError::ImagUnused {
                    gate: cal.gate.to_string(),
                });
            }
            out.amp.im = flip(cal.amp.im);
        }
        FlipTarget::Phase => out.phase = flip(cal.phase),
    }
    Ok(out)
}
