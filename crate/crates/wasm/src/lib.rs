//! Browser bindings for the noise-driven key exchange laboratory: three
//! interactive operations, each returning a JSON payload the demo page
//! plots. All heavy lifting stays in the core crate; this layer only
//! arranges results for display, with every value normalized to the Low
//! class variance so the page never deals in attovolts.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use noisekey_core::detection::{
    detect_partner_bit, estimate_variance, two_class_error, DetectorMode, ThresholdSet,
};
use noisekey_core::kljn::{
    loop_voltage_variance, simulate_bit_interval, BitPair, LoopConfig, ResistorPair,
    VarianceClass,
};
use noisekey_core::noise::NoiseParams;
use noisekey_core::protocol::sift_keys;
use noisekey_core::qkd::{run_bb84, Attack, Basis, SourceModel};
use noisekey_core::seed::SeedPath;

const DEMO_STREAM: u64 = 7000;

fn parse_mode(mode: &str) -> Result<DetectorMode, String> {
    match mode {
        "voltage_only" => Ok(DetectorMode::VoltageOnly),
        "current_only" => Ok(DetectorMode::CurrentOnly),
        "joint" => Ok(DetectorMode::Joint),
        other => Err(format!("unknown detector mode {other:?}")),
    }
}

fn demo_loop(alpha: f64, n_samples: u32, wire_pct: f64) -> Result<LoopConfig, String> {
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err("alpha must exceed 1".to_string());
    }
    if !(0.0..=50.0).contains(&wire_pct) {
        return Err("wire resistance must lie in [0, 50] % of R_L".to_string());
    }
    let r_low = 1000.0;
    let resistors = ResistorPair::new(r_low, r_low * alpha).map_err(|e| e.to_string())?;
    let params = NoiseParams::new(300.0, 1000.0, f64::from(n_samples.max(2)) / 2000.0)
        .map_err(|e| e.to_string())?;
    LoopConfig::new(resistors, params, r_low * wire_pct / 100.0, 0.0).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct IntervalView {
    alice_bit: u8,
    bob_bit: u8,
    class: &'static str,
    /// Voltage variance estimate in units of the Low class variance.
    est: f64,
    secure: bool,
    alice_correct: bool,
    bob_correct: bool,
}

#[derive(Serialize)]
struct SessionView {
    samples_per_bit: usize,
    sigma_mid: f64,
    sigma_high: f64,
    gamma1: f64,
    gamma2: f64,
    intervals: Vec<IntervalView>,
    /// Concatenated line voltage of the first few intervals, in units of
    /// the Low class standard deviation.
    waveform: Vec<f64>,
    waveform_intervals: usize,
    alice_key: String,
    bob_key: String,
    keys_agree: bool,
    secure_fraction: f64,
    detection_errors: usize,
}

fn class_name(class: VarianceClass) -> &'static str {
    match class {
        VarianceClass::Low => "low",
        VarianceClass::Mid => "mid",
        VarianceClass::High => "high",
    }
}

/// Runs one interactive key-exchange session and packages everything the
/// page draws: per-interval estimates against the thresholds, a waveform
/// strip, and the sifted keys.
pub fn kljn_session_json(
    alpha: f64,
    n_samples: u32,
    n_bits: u32,
    wire_pct: f64,
    mode: &str,
    seed: u64,
) -> Result<String, String> {
    let n_bits = n_bits.clamp(1, 256) as usize;
    let cfg = demo_loop(alpha, n_samples, wire_pct)?;
    let mode = parse_mode(mode)?;
    let thr_v = ThresholdSet::voltage_for(&cfg).map_err(|e| e.to_string())?;
    let thr_i = ThresholdSet::current_for(&cfg).map_err(|e| e.to_string())?;
    let sigma_low = loop_voltage_variance(BitPair::new(0, 0).unwrap(), &cfg);

    let base = SeedPath::new(seed, DEMO_STREAM, 0);
    let mut bit_rng = base.child(0).rng();
    use rand::Rng;

    let mut intervals = Vec::with_capacity(n_bits);
    let mut alice_raw = Vec::with_capacity(n_bits);
    let mut bob_raw = Vec::with_capacity(n_bits);
    let mut mask = Vec::with_capacity(n_bits);
    let mut waveform = Vec::new();
    let mut detection_errors = 0usize;
    let waveform_intervals = n_bits.min(12);

    for idx in 0..n_bits {
        let a: u8 = bit_rng.gen_range(0..=1);
        let b: u8 = bit_rng.gen_range(0..=1);
        let bp = BitPair::new(a, b).map_err(|e| e.to_string())?;
        let trace =
            simulate_bit_interval(bp, &cfg, base.child(1 + idx as u64)).map_err(|e| e.to_string())?;

        let decide = |own: u8, u: &[f64], i: &[f64]| {
            let est_v = estimate_variance(u).map_err(|e| e.to_string())?;
            let est_i = estimate_variance(i).map_err(|e| e.to_string())?;
            detect_partner_bit(Some(est_v), Some(est_i), own, Some(&thr_v), Some(&thr_i), mode)
                .map_err(|e| e.to_string())
        };
        let alice = decide(a, &trace.u_alice.samples, &trace.current.samples)?;
        let bob = decide(b, &trace.u_bob.samples, &trace.current_bob.samples)?;
        let alice_correct = alice.partner_bit == b;
        let bob_correct = bob.partner_bit == a;
        if !(alice_correct && bob_correct) {
            detection_errors += 1;
        }

        if idx < waveform_intervals {
            let scale = sigma_low.sqrt();
            waveform.extend(trace.u_eve.samples.iter().map(|v| v / scale));
        }
        intervals.push(IntervalView {
            alice_bit: a,
            bob_bit: b,
            class: class_name(bp.variance_class()),
            est: estimate_variance(&trace.u_eve.samples)
                .map_err(|e| e.to_string())?
                .value
                / sigma_low,
            secure: alice.secure && bob.secure,
            alice_correct,
            bob_correct,
        });
        alice_raw.push(a);
        bob_raw.push(b);
        mask.push(alice.secure && bob.secure);
    }

    let (alice_key, bob_key) = sift_keys(&alice_raw, &bob_raw, &mask).map_err(|e| e.to_string())?;
    let to_string = |key: &[u8]| key.iter().map(|b| char::from(b'0' + b)).collect::<String>();
    let kept = mask.iter().filter(|&&m| m).count();

    let view = SessionView {
        samples_per_bit: cfg.params.samples_per_bit(),
        sigma_mid: loop_voltage_variance(BitPair::new(0, 1).unwrap(), &cfg) / sigma_low,
        sigma_high: loop_voltage_variance(BitPair::new(1, 1).unwrap(), &cfg) / sigma_low,
        gamma1: thr_v.gamma1 / sigma_low,
        gamma2: thr_v.gamma2 / sigma_low,
        intervals,
        waveform,
        waveform_intervals,
        keys_agree: alice_key == bob_key,
        alice_key: to_string(&alice_key),
        bob_key: to_string(&bob_key),
        secure_fraction: kept as f64 / n_bits as f64,
        detection_errors,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct BerPoint {
    n_samples: usize,
    measured: f64,
    oracle: Option<f64>,
    joint_measured: f64,
}

#[derive(Serialize)]
struct BerCurve {
    points: Vec<BerPoint>,
    trials: u64,
}

/// Sweeps the per-bit sample budget and reports the measured voltage-only
/// error rate on the Low/Mid boundary, the exact oracle value, and the
/// measured joint-detector error rate from the same traces.
pub fn ber_curve_json(alpha: f64, trials: u32, seed: u64) -> Result<String, String> {
    let trials = u64::from(trials.clamp(100, 20_000));
    let mut points = Vec::new();
    for (i, n_samples) in [8u32, 16, 32, 64, 128, 256].into_iter().enumerate() {
        let cfg = demo_loop(alpha, n_samples, 0.0)?;
        let thr_v = ThresholdSet::voltage_for(&cfg).map_err(|e| e.to_string())?;
        let thr_i = ThresholdSet::current_for(&cfg).map_err(|e| e.to_string())?;
        let base = SeedPath::new(seed, DEMO_STREAM + 1 + i as u64, 0);
        let (mut err_v, mut err_j) = (0u64, 0u64);
        for t in 0..trials {
            let partner = (t % 2) as u8;
            let bp = BitPair::new(0, partner).map_err(|e| e.to_string())?;
            let trace =
                simulate_bit_interval(bp, &cfg, base.with_trial(t)).map_err(|e| e.to_string())?;
            let est_v = estimate_variance(&trace.u_alice.samples).map_err(|e| e.to_string())?;
            let est_i = estimate_variance(&trace.current.samples).map_err(|e| e.to_string())?;
            let v = detect_partner_bit(
                Some(est_v),
                None,
                0,
                Some(&thr_v),
                None,
                DetectorMode::VoltageOnly,
            )
            .map_err(|e| e.to_string())?;
            let j = detect_partner_bit(
                Some(est_v),
                Some(est_i),
                0,
                Some(&thr_v),
                Some(&thr_i),
                DetectorMode::Joint,
            )
            .map_err(|e| e.to_string())?;
            err_v += u64::from(v.partner_bit != partner);
            err_j += u64::from(j.partner_bit != partner);
        }
        let low = loop_voltage_variance(BitPair::new(0, 0).unwrap(), &cfg);
        let mid = loop_voltage_variance(BitPair::new(0, 1).unwrap(), &cfg);
        points.push(BerPoint {
            n_samples: n_samples as usize,
            measured: err_v as f64 / trials as f64,
            oracle: two_class_error(low, mid, n_samples as usize).ok(),
            joint_measured: err_j as f64 / trials as f64,
        });
    }
    serde_json::to_string(&BerCurve { points, trials }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SlotView {
    alice_bit: u8,
    alice_basis: char,
    bob_basis: char,
    bob_bit: Option<u8>,
    sifted: bool,
    error: bool,
    eve_known: bool,
}

#[derive(Serialize)]
struct Bb84View {
    qber: f64,
    sift_fraction: f64,
    eve_known_fraction: f64,
    sifted_bits: usize,
    slots: Vec<SlotView>,
    key_preview: String,
}

fn basis_char(b: Basis) -> char {
    match b {
        Basis::Rectilinear => 'R',
        Basis::Diagonal => 'D',
    }
}

/// Runs the photon protocol under the selected adversary and returns the
/// headline statistics plus the first slots for the table view.
pub fn bb84_json(n_slots: u32, attack: &str, mean_photons: f64, seed: u64) -> Result<String, String> {
    let n_slots = n_slots.clamp(14, 200_000) as usize;
    let (attack, source) = match attack {
        "none" => (Attack::None, SourceModel::IdealSingle),
        "intercept_resend" => (Attack::InterceptResend, SourceModel::IdealSingle),
        "pns" => (
            Attack::PhotonNumberSplitting,
            SourceModel::Poisson {
                mean_photons: mean_photons.clamp(0.01, 5.0),
            },
        ),
        other => return Err(format!("unknown attack {other:?}")),
    };
    let result = run_bb84(n_slots, source, attack, SeedPath::new(seed, DEMO_STREAM + 20, 0))
        .map_err(|e| e.to_string())?;
    let slots = result
        .records
        .iter()
        .take(14)
        .map(|r| SlotView {
            alice_bit: r.alice_bit,
            alice_basis: basis_char(r.alice_basis),
            bob_basis: basis_char(r.bob_basis),
            bob_bit: r.bob_bit,
            sifted: r.sifted,
            error: r.sifted && r.bob_bit != Some(r.alice_bit),
            eve_known: r.eve_known,
        })
        .collect();
    let key_preview: String = result
        .sifted_key_bob
        .iter()
        .take(32)
        .map(|b| char::from(b'0' + b))
        .collect();
    let view = Bb84View {
        qber: result.qber,
        sift_fraction: result.sift_fraction,
        eve_known_fraction: result.eve_known_fraction,
        sifted_bits: result.sifted_key_alice.len(),
        slots,
        key_preview,
    };
    serde_json::to_string(&view).map_err(|e| e.to_string())
}

// Thin wasm exports over the JSON builders above.

#[wasm_bindgen]
pub fn kljn_session(
    alpha: f64,
    n_samples: u32,
    n_bits: u32,
    wire_pct: f64,
    mode: String,
    seed: u64,
) -> Result<String, JsValue> {
    kljn_session_json(alpha, n_samples, n_bits, wire_pct, &mode, seed)
        .map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn ber_curve(alpha: f64, trials: u32, seed: u64) -> Result<String, JsValue> {
    ber_curve_json(alpha, trials, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn bb84_run(
    n_slots: u32,
    attack: String,
    mean_photons: f64,
    seed: u64,
) -> Result<String, JsValue> {
    bb84_json(n_slots, &attack, mean_photons, seed).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn session_payload_is_well_formed() {
        let json = kljn_session_json(10.0, 64, 40, 0.0, "joint", 7).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["intervals"].as_array().unwrap().len(), 40);
        assert_eq!(
            v["waveform"].as_array().unwrap().len(),
            12 * v["samples_per_bit"].as_u64().unwrap() as usize
        );
        assert!(v["keys_agree"].as_bool().unwrap());
        let g1 = v["gamma1"].as_f64().unwrap();
        let g2 = v["gamma2"].as_f64().unwrap();
        assert!(1.0 < g1 && g1 < g2);
        // identical calls are identical payloads
        assert_eq!(json, kljn_session_json(10.0, 64, 40, 0.0, "joint", 7).unwrap());
        assert!(kljn_session_json(0.5, 64, 40, 0.0, "joint", 7).is_err());
        assert!(kljn_session_json(10.0, 64, 40, 0.0, "psychic", 7).is_err());
    }

    #[test]
    fn ber_payload_tracks_oracle() {
        let json = ber_curve_json(10.0, 4000, 11).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let points = v["points"].as_array().unwrap();
        assert_eq!(points.len(), 6);
        for p in points {
            let measured = p["measured"].as_f64().unwrap();
            let oracle = p["oracle"].as_f64().unwrap();
            let sigma = (oracle * (1.0 - oracle) / 4000.0).sqrt();
            assert!(
                (measured - oracle).abs() < 4.0 * sigma + 1e-4,
                "N={}: {measured} vs {oracle}",
                p["n_samples"]
            );
            assert!(p["joint_measured"].as_f64().unwrap() <= measured + 3.0 * sigma);
        }
    }

    #[test]
    fn bb84_payload_shows_attack() {
        let clean: serde_json::Value =
            serde_json::from_str(&bb84_json(20_000, "none", 0.0, 5).unwrap()).unwrap();
        assert_eq!(clean["qber"].as_f64().unwrap(), 0.0);
        let attacked: serde_json::Value =
            serde_json::from_str(&bb84_json(20_000, "intercept_resend", 0.0, 5).unwrap()).unwrap();
        let qber = attacked["qber"].as_f64().unwrap();
        assert!((qber - 0.25).abs() < 0.02, "qber {qber}");
        assert_eq!(attacked["slots"].as_array().unwrap().len(), 14);
        let pns: serde_json::Value =
            serde_json::from_str(&bb84_json(20_000, "pns", 0.5, 5).unwrap()).unwrap();
        assert_eq!(pns["qber"].as_f64().unwrap(), 0.0);
        assert!(pns["eve_known_fraction"].as_f64().unwrap() > 0.1);
    }
}
