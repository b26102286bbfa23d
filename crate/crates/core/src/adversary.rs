//! The eavesdropper and her attacks.
//!
//! Eve measures the exposed wire noiselessly — the strongest passive
//! adversary, since security claims must hold against exact line samples.
//! Her passive tools are variance classification of the line voltage and,
//! when the wire has resistance, a single-tap variance comparison that
//! exploits the asymmetry between the 01 and 10 bit pairs. Her active tool
//! injects a deterministic current from the tap, which the legitimate
//! parties' measurement-exchange check is designed to expose.

use serde::{Deserialize, Serialize};

use crate::detection::{estimate_variance, ml_threshold};
use crate::error::{Error, Result};
use crate::kljn::{tap_voltage_variance, BitPair, LoopConfig, LoopTrace, VarianceClass};
use crate::noise::GaussianTrace;

/// What Eve records during one bit interval: the tap voltage and the loop
/// current, both measurable by anyone touching the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EveObservation {
    pub u_eve: GaussianTrace,
    pub current: GaussianTrace,
}

impl EveObservation {
    pub fn from_trace(trace: &LoopTrace) -> Result<Self> {
        if trace.u_eve.len() != trace.current.len() {
            return Err(Error::internal("observation traces differ in length"));
        }
        Ok(EveObservation {
            u_eve: trace.u_eve.clone(),
            current: trace.current.clone(),
        })
    }
}

/// Maximum-likelihood three-class decision on the tap-voltage variance,
/// using the two likelihood-crossing boundaries between adjacent classes.
/// Boundary ties resolve toward Mid, mirroring the legitimate detector.
pub fn passive_classify(obs: &EveObservation, config: &LoopConfig) -> Result<VarianceClass> {
    let low = tap_voltage_variance(BitPair::new(0, 0)?, config);
    let high = tap_voltage_variance(BitPair::new(1, 1)?, config);
    // The two Mid pairs coincide on an ideal line and differ only at
    // second order in R_w; their mean is the Mid hypothesis.
    let mid = 0.5
        * (tap_voltage_variance(BitPair::new(0, 1)?, config)
            + tap_voltage_variance(BitPair::new(1, 0)?, config));
    let gamma1 = ml_threshold(low, mid)?;
    let gamma2 = ml_threshold(mid, high)?;
    let est = estimate_variance(&obs.u_eve.samples)?;
    Ok(if est.value < gamma1 {
        VarianceClass::Low
    } else if est.value > gamma2 {
        VarianceClass::High
    } else {
        VarianceClass::Mid
    })
}

/// Eve's verdict on which end holds the high resistor during a Mid interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MidResolution {
    /// Alice low, Bob high.
    Bits01,
    /// Alice high, Bob low.
    Bits10,
}

/// Tries to resolve 01 from 10 by comparing the tap-voltage variance
/// estimate against the midpoint of the two tap-position-dependent Mid
/// variances. On an ideal line the two hypotheses are identical and the
/// fixed `estimate >= midpoint → Bits10` rule succeeds with probability
/// exactly 1/2; with wire resistance the hypotheses separate at first order
/// in `R_w` and the comparison gains real accuracy.
pub fn mid_resolution_attack(obs: &EveObservation, config: &LoopConfig) -> Result<MidResolution> {
    let v01 = tap_voltage_variance(BitPair::new(0, 1)?, config);
    let v10 = tap_voltage_variance(BitPair::new(1, 0)?, config);
    let midpoint = 0.5 * (v01 + v10);
    let est = estimate_variance(&obs.u_eve.samples)?;
    let above = est.value >= midpoint;
    Ok(if v01 > v10 {
        if above { MidResolution::Bits01 } else { MidResolution::Bits10 }
    } else {
        // Covers the ideal-line tie, where the choice is a fixed rule on
        // the estimate with no information behind it.
        if above { MidResolution::Bits10 } else { MidResolution::Bits01 }
    })
}

/// Superposes a deterministic current of the given amplitude injected from
/// the Eve tap. The injection splits toward the two ends through the
/// resistance divider, the terminal voltages rise consistently, and the two
/// ends no longer measure the same loop current — which is exactly what the
/// integrity check looks for. Amplitude 0 returns the trace unchanged.
pub fn inject_current(trace: &LoopTrace, amplitude: f64, config: &LoopConfig) -> Result<LoopTrace> {
    if !amplitude.is_finite() {
        return Err(Error::domain(format!(
            "injection amplitude must be finite, got {amplitude}"
        )));
    }
    let mut out = trace.clone();
    if amplitude == 0.0 {
        return Ok(out);
    }
    let ra = config.resistors.select(trace.bitpair.alice_bit);
    let rb = config.resistors.select(trace.bitpair.bob_bit);
    let rw = config.wire_resistance_ohm;
    let t = config.eve_tap_position;
    let s = ra + rb + rw;
    // Divider: the share flowing toward one end is set by the resistance of
    // the opposite path.
    let toward_alice = amplitude * (rb + (1.0 - t) * rw) / s;
    let toward_bob = amplitude * (ra + t * rw) / s;

    for k in 0..out.len() {
        out.u_alice.samples[k] += toward_alice * ra;
        out.u_bob.samples[k] += toward_bob * rb;
        out.u_eve.samples[k] += toward_alice * (ra + t * rw);
        // Loop current measured at each end, positive from Alice toward Bob:
        // the injected share toward Alice opposes it, the share toward Bob
        // adds to it.
        out.current.samples[k] -= toward_alice;
        out.current_bob.samples[k] += toward_bob;
    }
    Ok(out)
}
