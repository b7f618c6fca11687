//! Acceptance suite: one test per criterion, each printing a PASS line
//! (run with `--nocapture` to see them). Every tolerance is pinned here.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pulseflip::ecc::{HammingLayout, Rep3Layout};
use pulseflip::float32_bits::{decode_f32, encode_f32, flip_bit, BitIndex, Float32Word};
use pulseflip::harness::{ecc_eval, monte_carlo, sweep_bits, EccScheme, EntryStatus};
use pulseflip::pulse_model::{check_validity, perturb_parameter, FlipTarget, FrameState, Gate};
use pulseflip::quantum_sim::{
    ideal_distribution, measure, pulse_to_unitary, run_circuit, tvd, unitarity_defect, Circuit,
    CircuitOp, Distribution, ReadoutModel, ShotMode,
};
use pulseflip::BackendConfig;

const SEED: u64 = 7;

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn valencia() -> BackendConfig {
    BackendConfig::load(&configs_dir().join("valencia_like.toml")).expect("shipped config loads")
}

fn pass(n: u8, name: &str) {
    println!("acceptance criterion {n} ({name}): PASS");
}

fn bit(i: u8) -> BitIndex {
    BitIndex::new(i).unwrap()
}

/// Criterion 1: flipping bit 3 of single-precision 0.09618851775276127
/// collapses the value to exactly the stored value times 2^-32, within
/// 1e-7 relative of the reference 2.239563395844968e-11.
#[test]
fn criterion_01_bit_flip_anchor() {
    let word = encode_f32(0.09618851775276127);
    let flipped = decode_f32(flip_bit(word, bit(3))) as f64;
    let identity = decode_f32(word) as f64 * (2f64).powi(-32);
    let rel_identity = (flipped - identity).abs() / identity;
    assert!(rel_identity < 1e-7, "identity deviation {rel_identity}");
    let reference = 2.239563395844968e-11;
    let rel_reference = (flipped - reference).abs() / reference;
    assert!(rel_reference < 1e-7, "reference-value deviation {rel_reference}");
    pass(1, "bit-flip anchor");
}

/// Criterion 2: -248.75 encodes to exactly its known IEEE 754 pattern.
#[test]
fn criterion_02_ieee_layout_anchor() {
    let word = encode_f32(-248.75);
    assert_eq!(word.to_string(), "11000011011110001100000000000000");
    assert_eq!(word.bits(), 0b11000011_01111000_11000000_00000000);
    pass(2, "IEEE 754 layout anchor");
}

/// Criterion 3: on the valencia-like H amplitude, real-part flips at
/// exponent indices 1 and 6 -- and only those -- blow the pulse norm past
/// 1.0. Bit-exact predicate over all 32 indices.
#[test]
fn criterion_03_invalid_pulse_detection() {
    let backend = valencia();
    let h = backend.calibration_for(&Gate::H).unwrap();
    let mut invalid = Vec::new();
    for i in 0..32u8 {
        let flipped = perturb_parameter(&h, FlipTarget::AmpReal, bit(i)).unwrap();
        let validity = check_validity(&flipped.envelope());
        if !validity.valid {
            assert!(validity.max_norm > 1.0, "bit {i}: non-norm invalidity");
            invalid.push(i);
        }
    }
    assert_eq!(invalid, vec![1, 6]);
    pass(3, "invalid-pulse detection at bits 1 and 6");
}

/// Criterion 4: the exact-mode X-gate real-amplitude sweep shows the
/// expected sensitivity structure: some exponent flip >= 180%, every index >= 18
/// below 5%, and mean(exponent) > mean(9-17) > mean(18-31).
#[test]
fn criterion_04_sensitivity_structure() {
    let backend = valencia();
    let sweep = sweep_bits(&backend, &Gate::X, FlipTarget::AmpReal, ShotMode::Exact, SEED, 2)
        .unwrap();
    let max_exponent = sweep
        .entries
        .iter()
        .filter(|e| (1..=8).contains(&e.bit_index) && e.status == EntryStatus::Measured)
        .map(|e| e.tvd_increase_pct)
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(max_exponent >= 180.0, "max exponent increase {max_exponent}");
    for e in sweep.entries.iter().filter(|e| e.bit_index >= 18) {
        assert!(
            e.tvd_increase_pct < 5.0,
            "bit {}: {}",
            e.bit_index,
            e.tvd_increase_pct
        );
    }
    let exponent = sweep.mean_over(1, 8);
    let mantissa_high = sweep.mean_over(9, 17);
    let mantissa_low = sweep.mean_over(18, 31);
    assert!(
        exponent > mantissa_high && mantissa_high > mantissa_low,
        "ordering violated: {exponent} / {mantissa_high} / {mantissa_low}"
    );
    // The same shading structure holds for the H sweep.
    let h_sweep = sweep_bits(&backend, &Gate::H, FlipTarget::AmpReal, ShotMode::Exact, SEED, 2)
        .unwrap();
    assert!(h_sweep.mean_over(1, 8) > h_sweep.mean_over(9, 17));
    assert!(h_sweep.mean_over(9, 17) > h_sweep.mean_over(18, 31));
    pass(4, "sensitivity structure (>=180% exponent, <5% low mantissa, ordering)");
}

/// Criterion 5: rep3 recovers every protected bit for every single flip at
/// any of the 21 triplet positions, over 200 randomized words. Zero
/// failures allowed.
#[test]
fn criterion_05_rep3_exact_correction() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut positions: Vec<u8> = Rep3Layout::PROTECTED.to_vec();
    for i in 0..7 {
        let (c1, c2) = Rep3Layout::copy_slots(i);
        positions.extend([c1, c2]);
    }
    assert_eq!(positions.len(), 21);
    for _ in 0..200 {
        let word = Float32Word::from_bits(rng.random());
        let encoded = pulseflip::rep3_encode(word);
        for &p in &positions {
            let report = pulseflip::rep3_decode(encoded.flip(bit(p)));
            for &protected in &Rep3Layout::PROTECTED {
                assert_eq!(
                    report.corrected_word.bit(bit(protected)),
                    word.bit(bit(protected)),
                    "word {word}, flip at {p}"
                );
            }
        }
    }
    pass(5, "rep3 exact correction, 21 positions x 200 words");
}

/// Criterion 6: rep3 end to end at 1024 shots: post-correction increase
/// below 7% at protected indices and below 40% at indices 10-17; nominal
/// encode/decode overhead at most 7% sampled and below 0.5% exact.
#[test]
fn criterion_06_rep3_end_to_end() {
    let backend = valencia();
    let result = ecc_eval(
        &backend,
        &Gate::X,
        EccScheme::Rep3,
        ShotMode::Sampled(1024),
        SEED,
        2,
    )
    .unwrap();
    for &p in &Rep3Layout::PROTECTED {
        let entry = &result.entries[p as usize];
        assert!(
            entry.tvd_increase_pct < 7.0,
            "protected bit {p}: {}",
            entry.tvd_increase_pct
        );
    }
    for i in 10..=17u8 {
        let entry = &result.entries[i as usize];
        assert!(
            entry.tvd_increase_pct < 40.0,
            "bit {i}: {}",
            entry.tvd_increase_pct
        );
    }
    assert!(
        result.nominal_overhead_pct <= 7.0,
        "sampled overhead {}",
        result.nominal_overhead_pct
    );
    let exact = ecc_eval(&backend, &Gate::X, EccScheme::Rep3, ShotMode::Exact, SEED, 2).unwrap();
    assert!(
        exact.nominal_overhead_pct.abs() < 0.5,
        "exact overhead {}",
        exact.nominal_overhead_pct
    );
    pass(6, "rep3 end-to-end bounds (<7% protected, <40% mid-mantissa, overhead)");
}

/// Criterion 7: 100-run Monte-Carlo on the X gate at the fixed seed:
/// post-ECC maximum below 40%, pre-ECC maximum at least 180%.
#[test]
fn criterion_07_monte_carlo() {
    let backend = valencia();
    let result = monte_carlo(&backend, &Gate::X, 100, ShotMode::Sampled(1024), SEED, 2).unwrap();
    assert_eq!(result.samples.len(), 100);
    assert!(result.max_post() < 40.0, "post-ECC max {}", result.max_post());
    assert!(result.max_pre() >= 180.0, "pre-ECC max {}", result.max_pre());
    // Two-population structure of the pre-ECC distribution: a large mass of
    // near-harmless flips plus a catastrophic tail.
    let low = result
        .samples
        .iter()
        .filter(|s| s.pre_ecc_pct < 20.0)
        .count();
    assert!(low >= 50, "only {low}/100 samples below 20%");
    pass(7, "monte-carlo (pre >= 180%, post < 40%, two populations)");
}

/// Criterion 8: Hamming(29,24) corrects every single flip at all 29
/// codeword positions over 200 randomized words, and its parity-check
/// matrix has distinct nonzero columns (sizing inequality included).
#[test]
#[allow(clippy::int_plus_one, clippy::assertions_on_constants)]
fn criterion_08_hamming_exhaustive() {
    // Keep the sizing inequality in its standard written form: 2^k - 1 >= n + k.
    assert!((1u32 << 5) - 1 >= 24 + 5);
    let columns = HammingLayout::parity_check_columns();
    for (i, &c) in columns.iter().enumerate() {
        assert_ne!(c, 0, "zero column at {i}");
        for &d in &columns[i + 1..] {
            assert_ne!(c, d, "duplicate column {c}");
        }
    }
    let data_mask = 0xffff_ff00u32;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..200 {
        let word = Float32Word::from_bits(rng.random());
        let encoded = pulseflip::hamming_encode(word);
        for p in 0..29u8 {
            let report = pulseflip::hamming_decode(encoded.flip(bit(p)));
            assert!(!report.detected_uncorrectable, "word {word}, flip {p}");
            assert_eq!(
                report.corrected_word.bits() & data_mask,
                word.bits() & data_mask,
                "word {word}, flip {p}"
            );
        }
    }
    pass(8, "hamming(29,24) exhaustive correction, 29 positions x 200 words");
}

fn random_distribution(rng: &mut ChaCha8Rng) -> Distribution {
    let raw: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
    let sum: f64 = raw.iter().sum::<f64>() + 4e-3;
    let mut probs = BTreeMap::new();
    let mut acc = 0.0;
    for (i, v) in raw.iter().enumerate() {
        let p = (v + 1e-3) / sum;
        acc += p;
        probs.insert(format!("{i:02b}"), p);
    }
    // Absorb rounding into the last outcome so the sum is exactly 1.
    if let Some(last) = probs.get_mut("11") {
        *last += 1.0 - acc;
    }
    Distribution::from_probs(probs).unwrap()
}

/// Criterion 9: metric axioms on 10^4 randomized triples at 1e-12; every
/// produced unitary within 1e-10 of unitarity; nominal calibrations
/// reproduce the closed-form ideal distributions in exact mode.
#[test]
fn criterion_09_metric_and_oracle_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..10_000 {
        let p = random_distribution(&mut rng);
        let q = random_distribution(&mut rng);
        let r = random_distribution(&mut rng);
        let pq = tvd(&p, &q).unwrap();
        assert!(tvd(&p, &p).unwrap() < 1e-12);
        assert!((pq - tvd(&q, &p).unwrap()).abs() < 1e-12);
        assert!((0.0..=1.0 + 1e-12).contains(&pq));
        assert!(pq <= tvd(&p, &r).unwrap() + tvd(&r, &q).unwrap() + 1e-12);
    }

    let backend = valencia();
    let frame = FrameState::new();
    let gates = [
        Gate::X,
        Gate::Sx,
        Gate::H,
        Gate::Rx(std::f64::consts::FRAC_PI_3),
        Gate::Cnot,
    ];
    for gate in &gates {
        let nominal = backend.calibration_for(gate).unwrap();
        let u = pulse_to_unitary(&nominal, &nominal, &frame).unwrap();
        assert!(unitarity_defect(&u) < 1e-10, "nominal {gate}");
        // Perturbed pulses that stay valid must also be unitary.
        for i in 0..32u8 {
            let applied = perturb_parameter(&nominal, FlipTarget::AmpReal, bit(i)).unwrap();
            match pulse_to_unitary(&applied, &nominal, &frame) {
                Ok(u) => assert!(unitarity_defect(&u) < 1e-10, "{gate} flip {i}"),
                Err(e) => assert!(e.is_halt(), "{gate} flip {i}: {e}"),
            }
        }
    }

    for gate in &gates {
        let circuit = match gate {
            Gate::Cnot => Circuit::new(
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
            .unwrap(),
            g => Circuit::new(
                1,
                vec![CircuitOp {
                    gate: *g,
                    qubits: vec![0],
                }],
            )
            .unwrap(),
        };
        let state = run_circuit(&circuit, &backend, None).unwrap();
        let noiseless = ReadoutModel::noiseless(circuit.n_qubits() as usize);
        let dist = measure(&state, &noiseless, ShotMode::Exact, 0);
        let ideal = ideal_distribution(gate);
        let distance = tvd(&dist, &ideal).unwrap();
        assert!(distance < 1e-12, "{gate}: tvd to ideal {distance:e}");
        if let Gate::Rx(_) = gate {
            assert!((dist.probability("1") - 0.25).abs() < 1e-12);
        }
    }
    pass(9, "tvd metric axioms, unitarity, exact ideal distributions");
}

/// Criterion 10: identical seed and config give byte-identical CSV/JSON
/// reports through the CLI, independent of the worker count.
#[test]
fn criterion_10_determinism() {
    let binary = env!("CARGO_BIN_EXE_pulseflip");
    let dir = std::env::temp_dir().join(format!("pulseflip-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let backend = configs_dir().join("valencia_like.toml");
    let run = |out: &Path, format: &str, workers: &str, subcommand: &[&str]| {
        let status = Command::new(binary)
            .args(subcommand)
            .args(["--backend"])
            .arg(&backend)
            .args(["--shots", "1024", "--seed", "7", "--format", format, "--workers", workers])
            .args(["--out"])
            .arg(out)
            .output()
            .expect("binary runs");
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    for (format, ext) in [("csv", "csv"), ("json", "json")] {
        let sweep_args = ["sweep", "--gate", "x", "--target", "real"];
        let a = run(&dir.join(format!("sweep-a.{ext}")), format, "1", &sweep_args);
        let b = run(&dir.join(format!("sweep-b.{ext}")), format, "4", &sweep_args);
        assert_eq!(a, b, "sweep {format} differs across workers");

        let mc_args = ["mc", "--gate", "x", "--runs", "50"];
        let a = run(&dir.join(format!("mc-a.{ext}")), format, "2", &mc_args);
        let b = run(&dir.join(format!("mc-b.{ext}")), format, "3", &mc_args);
        assert_eq!(a, b, "mc {format} differs across workers");

        let ecc_args = ["ecc", "--gate", "x", "--scheme", "rep3"];
        let a = run(&dir.join(format!("ecc-a.{ext}")), format, "1", &ecc_args);
        let b = run(&dir.join(format!("ecc-b.{ext}")), format, "8", &ecc_args);
        assert_eq!(a, b, "ecc {format} differs across workers");
    }
    let _ = std::fs::remove_dir_all(&dir);
    pass(10, "byte-identical reports across runs and worker counts");
}
