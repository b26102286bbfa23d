//! Full key-exchange sessions over the noise loop.
//!
//! Each bit interval: both ends select resistors from locally generated
//! random bits, the loop is sampled, and each end runs the variance detector
//! with knowledge of its own bit. An interval contributes to the key only if
//! BOTH ends flagged it secure (decided class Mid) — the conservative
//! reconciliation, needing nothing beyond a one-bit keep/discard flag over
//! the authenticated classical channel both parties are assumed to share.
//!
//! Key convention: the agreed key is Alice's bit at every kept position.
//! Kept positions hold complementary bits, so Bob forms his copy by flipping
//! his own bits there.

use serde::{Deserialize, Serialize};

use crate::detection::{
    detect_partner_bit, estimate_variance, DetectionOutcome, DetectorMode, ThresholdSet,
};
use crate::error::{Error, Result};
use crate::kljn::{simulate_bit_interval, BitPair, LoopConfig, LoopTrace};
use crate::seed::SeedPath;

/// Configuration of one key-exchange session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub loop_config: LoopConfig,
    pub n_bits: usize,
    pub detector_mode: DetectorMode,
    /// Voltage-units tolerance for the per-interval integrity check.
    pub integrity_tolerance: f64,
}

impl SessionConfig {
    pub fn new(
        loop_config: LoopConfig,
        n_bits: usize,
        detector_mode: DetectorMode,
        integrity_tolerance: f64,
    ) -> Result<Self> {
        if n_bits == 0 {
            return Err(Error::domain("a session needs at least one bit interval"));
        }
        if !(integrity_tolerance.is_finite() && integrity_tolerance >= 0.0) {
            return Err(Error::domain(format!(
                "integrity tolerance must be finite and >= 0, got {integrity_tolerance}"
            )));
        }
        Ok(SessionConfig {
            loop_config,
            n_bits,
            detector_mode,
            integrity_tolerance,
        })
    }
}

/// Default integrity tolerance: six standard deviations of the wire's own
/// thermal EMF, `6·sqrt(4kT·R_w·Δf)`, plus an epsilon floor. The wire EMF is
/// the one legitimate term in the exchanged measurement data that neither
/// end can observe or subtract, so it sets the noise floor of the voltage
/// comparison; at six sigma the residual false-alarm rate is ~2e-9 per
/// sample. On an ideal line the tolerance collapses to the epsilon floor
/// and clean traces still never alarm, because their residuals are
/// identically zero.
pub fn default_integrity_tolerance(config: &LoopConfig) -> f64 {
    let wire_emf_var = 4.0
        * crate::noise::BOLTZMANN_J_PER_K
        * config.params.temperature_kelvin
        * config.wire_resistance_ohm
        * config.params.bandwidth_hz;
    6.0 * wire_emf_var.sqrt() + f64::EPSILON
}

/// What an integrity alarm tripped on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AlarmKind {
    /// Terminal voltages disagree beyond the wire-drop allowance.
    VoltageMismatch,
    /// The two ends measured different loop currents.
    CurrentMismatch,
}

/// One tripped integrity alarm within a bit interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegrityAlarm {
    pub kind: AlarmKind,
    /// Worst offending sample index.
    pub sample: usize,
    /// Residual magnitude in volts at that sample.
    pub magnitude: f64,
}

/// Alarm raised by a session, tagged with the bit interval it occurred in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionAlarm {
    pub bit_index: usize,
    pub kind: AlarmKind,
}

/// Compares the two ends' exchanged measurement data for one interval.
///
/// Two residuals, both in volts:
///
/// * voltage: `|u_alice − u_bob − ī·R_w|` with `ī` the mean of the two
///   measured end currents. On a clean trace this residual is exactly the
///   wire's own EMF — the one legitimate term the parties cannot observe —
///   so it is identically zero on an ideal line and sits at the
///   `sqrt(4kT·R_w·Δf)` noise floor otherwise;
/// * current: `|i_alice − i_bob|` referred through the smallest node
///   resistance any bit combination presents, `R_L/2` — the most
///   conservative voltage equivalent of an end-to-end current gap. Clean
///   traces carry one loop current, so this residual is identically zero.
///
/// An alarm is emitted per kind whose worst-sample residual exceeds the
/// tolerance. Any current injected from the line splits toward the two ends
/// and appears in full as an end-to-end current mismatch, so active attacks
/// are visible even on an ideal (`R_w = 0`) line where the terminal voltages
/// stay equal.
pub fn integrity_check(
    trace: &LoopTrace,
    config: &LoopConfig,
    tolerance: f64,
) -> Result<Vec<IntegrityAlarm>> {
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(Error::domain(format!(
            "tolerance must be finite and >= 0, got {tolerance}"
        )));
    }
    let n = trace.u_alice.len();
    if trace.u_bob.len() != n || trace.current.len() != n || trace.current_bob.len() != n {
        return Err(Error::internal(format!(
            "trace length mismatch: {} / {} / {} / {}",
            n,
            trace.u_bob.len(),
            trace.current.len(),
            trace.current_bob.len()
        )));
    }
    let rw = config.wire_resistance_ohm;
    let r_node_min = config.resistors.r_low_ohm / 2.0;

    let mut worst_v = (0usize, 0.0f64);
    let mut worst_i = (0usize, 0.0f64);
    for k in 0..n {
        let ia = trace.current.samples[k];
        let ib = trace.current_bob.samples[k];
        let dv =
            (trace.u_alice.samples[k] - trace.u_bob.samples[k] - 0.5 * (ia + ib) * rw).abs();
        if dv > worst_v.1 {
            worst_v = (k, dv);
        }
        let di = (ia - ib).abs() * r_node_min;
        if di > worst_i.1 {
            worst_i = (k, di);
        }
    }

    let mut alarms = Vec::new();
    if worst_v.1 > tolerance {
        alarms.push(IntegrityAlarm {
            kind: AlarmKind::VoltageMismatch,
            sample: worst_v.0,
            magnitude: worst_v.1,
        });
    }
    if worst_i.1 > tolerance {
        alarms.push(IntegrityAlarm {
            kind: AlarmKind::CurrentMismatch,
            sample: worst_i.0,
            magnitude: worst_i.1,
        });
    }
    Ok(alarms)
}

/// Everything a completed session produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionResult {
    pub alice_raw: Vec<u8>,
    pub bob_raw: Vec<u8>,
    pub alice_decisions: Vec<DetectionOutcome>,
    pub bob_decisions: Vec<DetectionOutcome>,
    /// True where both ends decided the interval secure.
    pub secure_mask: Vec<bool>,
    pub alice_key: Vec<u8>,
    pub bob_key: Vec<u8>,
    /// Intervals where at least one end decided the wrong partner bit.
    pub detection_errors: usize,
    pub alarms: Vec<SessionAlarm>,
}

impl SessionResult {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

/// Applies the sift-and-flip rule: kept positions are where the mask holds;
/// the agreed key is Alice's bit there, so Alice keeps her bits and Bob
/// flips his.
pub fn sift_keys(
    alice_raw: &[u8],
    bob_raw: &[u8],
    secure_mask: &[bool],
) -> Result<(Vec<u8>, Vec<u8>)> {
    if alice_raw.len() != bob_raw.len() || alice_raw.len() != secure_mask.len() {
        return Err(Error::internal(format!(
            "sift length mismatch: {} / {} / {}",
            alice_raw.len(),
            bob_raw.len(),
            secure_mask.len()
        )));
    }
    let mut alice_key = Vec::new();
    let mut bob_key = Vec::new();
    for i in 0..alice_raw.len() {
        if secure_mask[i] {
            alice_key.push(alice_raw[i]);
            bob_key.push(1 - bob_raw[i]);
        }
    }
    Ok((alice_key, bob_key))
}

/// Runs a full session: per interval, independent uniform bits at both ends,
/// loop sampling, detection at both ends from their own terminal's voltage
/// and their own end's current, integrity check, then sifting into keys.
pub fn run_session(config: &SessionConfig, seed_path: SeedPath) -> Result<SessionResult> {
    let thr_v = ThresholdSet::voltage_for(&config.loop_config)?;
    let thr_i = ThresholdSet::current_for(&config.loop_config)?;

    let mut bit_rng = seed_path.child(0).rng();
    let mut alice_raw = Vec::with_capacity(config.n_bits);
    let mut bob_raw = Vec::with_capacity(config.n_bits);
    let mut alice_decisions = Vec::with_capacity(config.n_bits);
    let mut bob_decisions = Vec::with_capacity(config.n_bits);
    let mut secure_mask = Vec::with_capacity(config.n_bits);
    let mut detection_errors = 0usize;
    let mut alarms = Vec::new();

    use rand::Rng;
    for idx in 0..config.n_bits {
        let a: u8 = bit_rng.gen_range(0..=1);
        let b: u8 = bit_rng.gen_range(0..=1);
        let bitpair = BitPair::new(a, b)?;
        let trace = simulate_bit_interval(
            bitpair,
            &config.loop_config,
            seed_path.child(1 + idx as u64),
        )?;

        let decide = |own: u8, u: &[f64], i: &[f64]| -> Result<DetectionOutcome> {
            let est_v = estimate_variance(u)?;
            let est_i = estimate_variance(i)?;
            detect_partner_bit(
                Some(est_v),
                Some(est_i),
                own,
                Some(&thr_v),
                Some(&thr_i),
                config.detector_mode,
            )
        };
        let alice = decide(a, &trace.u_alice.samples, &trace.current.samples)?;
        let bob = decide(b, &trace.u_bob.samples, &trace.current_bob.samples)?;

        if alice.partner_bit != b || bob.partner_bit != a {
            detection_errors += 1;
        }
        for alarm in integrity_check(&trace, &config.loop_config, config.integrity_tolerance)? {
            alarms.push(SessionAlarm {
                bit_index: idx,
                kind: alarm.kind,
            });
        }

        secure_mask.push(alice.secure && bob.secure);
        alice_raw.push(a);
        bob_raw.push(b);
        alice_decisions.push(alice);
        bob_decisions.push(bob);
    }

    let (alice_key, bob_key) = sift_keys(&alice_raw, &bob_raw, &secure_mask)?;
    Ok(SessionResult {
        alice_raw,
        bob_raw,
        alice_decisions,
        bob_decisions,
        secure_mask,
        alice_key,
        bob_key,
        detection_errors,
        alarms,
    })
}

/// Returns the agreed key of a completed session — Alice's bits at kept
/// positions. Idempotent; validates the result's internal consistency.
pub fn distill_key(result: &SessionResult) -> Result<Vec<u8>> {
    let n = result.alice_raw.len();
    if result.bob_raw.len() != n
        || result.secure_mask.len() != n
        || result.alice_decisions.len() != n
        || result.bob_decisions.len() != n
    {
        return Err(Error::internal("session field lengths disagree"));
    }
    let kept = result.secure_mask.iter().filter(|&&m| m).count();
    if result.alice_key.len() != kept || result.bob_key.len() != kept {
        return Err(Error::internal(format!(
            "key length {} does not match {} kept positions",
            result.alice_key.len(),
            kept
        )));
    }
    let key: Vec<u8> = result
        .alice_raw
        .iter()
        .zip(&result.secure_mask)
        .filter(|(_, &m)| m)
        .map(|(&bit, _)| bit)
        .collect();
    if key != result.alice_key {
        return Err(Error::internal("alice_key does not match raw bits at kept positions"));
    }
    Ok(key)
}
