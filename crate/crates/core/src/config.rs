//! Backend configuration files.
//!
//! A backend config is a TOML document listing, per gate, the stored pulse
//! parameters (complex amplitude, phase, envelope shape, nominal rotation)
//! plus a per-qubit readout-error pair. Amplitude and phase values may be
//! written as numbers or as decimal strings; either way they are truncated
//! to single precision on load, because that is how the controller stores
//! them and flips act on the stored pattern.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::pulse_model::{check_validity, ComplexAmp, Gate, GateCalibration};
use crate::quantum_sim::{ReadoutError, ReadoutModel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("backend does not define gate {0}")]
    MissingGate(String),
}

/// A loaded, validated backend: per-gate calibrations plus readout errors.
#[derive(Debug, Clone)]
pub struct BackendConfig {
    name: String,
    gates: BTreeMap<GateKey, GateCalibration>,
    readout: ReadoutModel,
}

/// Keys of the gates a config file can define. Rotation gates are derived
/// from the X calibration rather than stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum GateKey {
    X,
    Sx,
    H,
    Cnot,
}

impl fmt::Display for GateKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GateKey::X => f.write_str("x"),
            GateKey::Sx => f.write_str("sx"),
            GateKey::H => f.write_str("h"),
            GateKey::Cnot => f.write_str("cnot"),
        }
    }
}

impl BackendConfig {
    pub fn new(
        name: impl Into<String>,
        gates: Vec<GateCalibration>,
        readout: ReadoutModel,
    ) -> Result<Self, ConfigError> {
        let name = name.into();
        let mut by_key = BTreeMap::new();
        for cal in gates {
            let key = match cal.gate {
                Gate::X => GateKey::X,
                Gate::Sx => GateKey::Sx,
                Gate::H => GateKey::H,
                Gate::Cnot => GateKey::Cnot,
                Gate::Rx(_) => {
                    return Err(ConfigError::Invalid(
                        "rotation gates are derived from the x calibration, not stored".into(),
                    ))
                }
            };
            if by_key.insert(key, cal).is_some() {
                return Err(ConfigError::Invalid(format!("duplicate gate {key}")));
            }
        }
        let config = BackendConfig {
            name,
            gates: by_key,
            readout,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        raw.build()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn readout(&self) -> &ReadoutModel {
        &self.readout
    }

    /// Calibration for a gate. Rotation gates are derived from the X pulse
    /// with linearly scaled amplitude: `a_rx(theta) = a_x * theta / pi`,
    /// truncated to single precision like any stored parameter.
    pub fn calibration_for(&self, gate: &Gate) -> Result<GateCalibration, ConfigError> {
        let lookup = |key: GateKey| {
            self.gates
                .get(&key)
                .cloned()
                .ok_or_else(|| ConfigError::MissingGate(key.to_string()))
        };
        match gate {
            Gate::X => lookup(GateKey::X),
            Gate::Sx => lookup(GateKey::Sx),
            Gate::H => lookup(GateKey::H),
            Gate::Cnot => lookup(GateKey::Cnot),
            Gate::Rx(theta) => {
                if !theta.is_finite() || *theta <= 0.0 {
                    return Err(ConfigError::Invalid(format!(
                        "rx angle must be positive and finite, got {theta}"
                    )));
                }
                let base = lookup(GateKey::X)?;
                let scale = theta / PI;
                Ok(GateCalibration {
                    gate: Gate::Rx(*theta),
                    amp: ComplexAmp::new(
                        (base.amp.re as f64 * scale) as f32,
                        (base.amp.im as f64 * scale) as f32,
                    ),
                    theta_nom: *theta,
                    // The derived Q component is a stored value in its own
                    // right, so rotation gates accept imaginary-part flips
                    // even though the underlying X pulse does not.
                    imag_used: true,
                    ..base
                })
            }
        }
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() {
            return Err(ConfigError::Invalid("backend name must be non-empty".into()));
        }
        if self.readout.is_empty() {
            return Err(ConfigError::Invalid(
                "at least one readout qubit is required".into(),
            ));
        }
        for q in 0..self.readout.len() {
            self.readout.qubit(q).validate()?;
        }
        for (key, cal) in &self.gates {
            let arity = cal.gate.arity() as usize;
            if arity == 2 && self.readout.len() < 2 {
                return Err(ConfigError::Invalid(format!(
                    "gate {key} needs readout data for 2 qubits"
                )));
            }
            cal.envelope()
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("gate {key}: {e}")))?;
            if !cal.amp.is_finite() || cal.amp.norm() == 0.0 {
                return Err(ConfigError::Invalid(format!(
                    "gate {key}: amplitude must be finite and nonzero"
                )));
            }
            if !cal.phase.is_finite() {
                return Err(ConfigError::Invalid(format!(
                    "gate {key}: phase must be finite"
                )));
            }
            if !cal.theta_nom.is_finite() || cal.theta_nom <= 0.0 {
                return Err(ConfigError::Invalid(format!(
                    "gate {key}: theta_nom must be positive and finite"
                )));
            }
            let validity = check_validity(&cal.envelope());
            if !validity.valid {
                return Err(ConfigError::Invalid(format!(
                    "gate {key}: calibrated pulse is invalid (peak norm {})",
                    validity.max_norm
                )));
            }
        }
        Ok(())
    }
}

/// A stored decimal that may be spelled as a TOML number or a string.
/// Strings keep full decimal precision in the file; both forms truncate to
/// single precision when they become stored pulse parameters.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Decimal {
    Number(f64),
    Text(String),
}

impl Decimal {
    fn to_f64(&self, field: &str) -> Result<f64, ConfigError> {
        let value = match self {
            Decimal::Number(v) => *v,
            Decimal::Text(s) => s.trim().parse::<f64>().map_err(|e| {
                ConfigError::Invalid(format!("field {field}: cannot parse {s:?}: {e}"))
            })?,
        };
        if !value.is_finite() {
            return Err(ConfigError::Invalid(format!(
                "field {field}: value must be finite, got {value}"
            )));
        }
        Ok(value)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    gates: RawGates,
    readout: Vec<RawReadout>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGates {
    x: Option<RawGate>,
    sx: Option<RawGate>,
    h: Option<RawGate>,
    cnot: Option<RawGate>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGate {
    qubits: u8,
    amp_re: Decimal,
    amp_im: Decimal,
    #[serde(default)]
    phase: Option<Decimal>,
    duration: u32,
    sigma: f64,
    beta: f64,
    theta_nom: f64,
    #[serde(default = "default_true")]
    imag_used: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReadout {
    p01: f64,
    p10: f64,
}

impl RawConfig {
    fn build(self) -> Result<BackendConfig, ConfigError> {
        let mut gates = Vec::new();
        let entries = [
            (GateKey::X, Gate::X, &self.gates.x),
            (GateKey::Sx, Gate::Sx, &self.gates.sx),
            (GateKey::H, Gate::H, &self.gates.h),
            (GateKey::Cnot, Gate::Cnot, &self.gates.cnot),
        ];
        for (key, gate, raw) in entries {
            let Some(raw) = raw else { continue };
            if raw.qubits != gate.arity() {
                return Err(ConfigError::Invalid(format!(
                    "gate {key}: expected qubits = {}, got {}",
                    gate.arity(),
                    raw.qubits
                )));
            }
            let phase = match &raw.phase {
                Some(d) => d.to_f64(&format!("{key}.phase"))? as f32,
                None => 0.0,
            };
            gates.push(GateCalibration {
                gate,
                amp: ComplexAmp::new(
                    raw.amp_re.to_f64(&format!("{key}.amp_re"))? as f32,
                    raw.amp_im.to_f64(&format!("{key}.amp_im"))? as f32,
                ),
                phase,
                theta_nom: raw.theta_nom,
                duration: raw.duration,
                sigma: raw.sigma,
                beta: raw.beta,
                imag_used: raw.imag_used,
            });
        }
        let readout = ReadoutModel::new(
            self.readout
                .iter()
                .map(|r| ReadoutError {
                    p01: r.p01,
                    p10: r.p10,
                })
                .collect(),
        );
        BackendConfig::new(self.name, gates, readout)
    }
}


#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "test-backend"

[gates.x]
qubits = 1
amp_re = "0.118"
amp_im = 0.0
duration = 160
sigma = 40.0
beta = 0.2
theta_nom = 3.141592653589793
imag_used = false

[gates.h]
qubits = 1
amp_re = "0.09618851775276127"
amp_im = "0.0008448724348311288"
duration = 160
sigma = 40.0
beta = 0.2
theta_nom = 1.5707963267948966

[[readout]]
p01 = 0.012
p10 = 0.028
"#;

    #[test]
    fn loads_minimal_config() {
        let config = BackendConfig::from_toml_str(MINIMAL, "inline").unwrap();
        assert_eq!(config.name(), "test-backend");
        let h = config.calibration_for(&Gate::H).unwrap();
        // Decimal strings truncate to single precision on load.
        assert_eq!(h.amp.re, 0.09618851775276127f64 as f32);
        assert_eq!(h.amp.im, 0.0008448724348311288f64 as f32);
        assert!(h.imag_used);
        let x = config.calibration_for(&Gate::X).unwrap();
        assert!(!x.imag_used);
        assert_eq!(x.phase, 0.0);
    }

    #[test]
    fn derives_rx_from_x() {
        let config = BackendConfig::from_toml_str(MINIMAL, "inline").unwrap();
        let theta = std::f64::consts::FRAC_PI_3;
        let rx = config.calibration_for(&Gate::Rx(theta)).unwrap();
        let x = config.calibration_for(&Gate::X).unwrap();
        assert_eq!(rx.amp.re, (x.amp.re as f64 * theta / PI) as f32);
        assert_eq!(rx.theta_nom, theta);
        assert!(rx.imag_used);
        assert!(config.calibration_for(&Gate::Rx(0.0)).is_err());
        assert!(config.calibration_for(&Gate::Rx(-1.0)).is_err());
    }

    #[test]
    fn missing_gate_is_reported() {
        let config = BackendConfig::from_toml_str(MINIMAL, "inline").unwrap();
        assert!(matches!(
            config.calibration_for(&Gate::Cnot),
            Err(ConfigError::MissingGate(_))
        ));
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = MINIMAL.replace("beta = 0.2", "beta = 0.2\nbogus = 1");
        assert!(matches!(
            BackendConfig::from_toml_str(&text, "inline"),
            Err(ConfigError::Parse { .. })
        ));
    }

    #[test]
    fn rejects_invalid_calibration_norm() {
        let text = MINIMAL.replace("amp_re = \"0.118\"", "amp_re = 1.25");
        let err = BackendConfig::from_toml_str(&text, "inline").unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)), "{err}");
    }

    #[test]
    fn rejects_out_of_range_readout() {
        let text = MINIMAL.replace("p01 = 0.012", "p01 = 0.7");
        assert!(BackendConfig::from_toml_str(&text, "inline").is_err());
    }

    #[test]
    fn rejects_cnot_without_second_readout_qubit() {
        let text = format!(
            "{MINIMAL}\n[gates.cnot]\nqubits = 2\namp_re = 0.0891\namp_im = 0.0047\nduration = 320\nsigma = 80.0\nbeta = 0.1\ntheta_nom = 1.5707963267948966\n"
        );
        let err = BackendConfig::from_toml_str(&text, "inline").unwrap_err();
        assert!(err.to_string().contains("2 qubits"), "{err}");
    }

    #[test]
    fn rejects_bad_arity() {
        let text = MINIMAL.replace("qubits = 1\namp_re = \"0.118\"", "qubits = 2\namp_re = \"0.118\"");
        assert!(BackendConfig::from_toml_str(&text, "inline").is_err());
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = BackendConfig::load(Path::new("/nonexistent/backend.toml")).unwrap_err();
        assert!(matches!(err, ConfigError::Io { .. }));
    }
}
