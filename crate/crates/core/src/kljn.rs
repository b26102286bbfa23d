//! The Kirchhoff noise loop: two bit-selected resistors with independent
//! Johnson sources, joined by a wire of resistance `R_w`, observed at both
//! terminals and at an eavesdropper tap.
//!
//! # Circuit model
//!
//! Every resistive element sits at the common temperature `T` (thermal
//! equilibrium, the premise of the scheme), so each contributes its own
//! Johnson EMF: `e_A ~ N(0, 4kT·R_A·Δf)` at Alice, `e_B` at Bob, and
//! `e_w ~ N(0, 4kT·R_w·Δf)` for the wire itself. Per sample,
//!
//! ```text
//! i       = (e_A + e_w - e_B) / S,          S = R_A + R_w + R_B
//! u_alice = e_A - i·R_A
//! u_bob   = e_B + i·R_B
//! ```
//!
//! with the loop current taken positive flowing from Alice's source toward
//! Bob. The wire EMF vanishes at `R_w = 0`, where the model reduces to the
//! ideal loop and `u_alice == u_bob` exactly. Including the wire noise keeps
//! the loop in equilibrium at every node: the voltage variance anywhere on
//! the line equals `4kTΔf` times the resistance seen from that point, which
//! is what makes the current-variance formula below exact and gives the
//! wire-resistance information leak its physically correct (first-order)
//! size.
//!
//! Eve taps the wire at a fractional position `t ∈ [0, 1]` (0 = Alice end).
//! The wire is uniform, so her node sits between `t·R_w` and `(1−t)·R_w`
//! halves of the wire resistance, each with its share of the wire EMF.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{source_variance, GaussianTrace, NoiseParams};
use crate::seed::SeedPath;

/// The two-value resistor alphabet: bit 0 selects `R_L`, bit 1 selects `R_H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResistorPair {
    pub r_low_ohm: f64,
    pub r_high_ohm: f64,
}

impl ResistorPair {
    pub fn new(r_low_ohm: f64, r_high_ohm: f64) -> Result<Self> {
        if !(r_low_ohm.is_finite() && r_high_ohm.is_finite() && r_low_ohm > 0.0) {
            return Err(Error::domain(format!(
                "resistances must be finite and positive, got ({r_low_ohm}, {r_high_ohm})"
            )));
        }
        if r_high_ohm <= r_low_ohm {
            return Err(Error::domain(format!(
                "r_high must exceed r_low, got ({r_low_ohm}, {r_high_ohm})"
            )));
        }
        Ok(ResistorPair { r_low_ohm, r_high_ohm })
    }

    /// Resistance ratio `α = R_H / R_L > 1`.
    pub fn alpha(&self) -> f64 {
        self.r_high_ohm / self.r_low_ohm
    }

    /// Resistance selected by one party's bit.
    pub fn select(&self, bit: u8) -> f64 {
        if bit == 0 {
            self.r_low_ohm
        } else {
            self.r_high_ohm
        }
    }
}

/// Line-variance class of a bit combination. `Mid` — the two ends holding
/// different bits — is the only class an eavesdropper cannot resolve, hence
/// the only one that yields key material.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VarianceClass {
    Low,
    Mid,
    High,
}

/// One interval's bit selection at the two ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitPair {
    pub alice_bit: u8,
    pub bob_bit: u8,
}

impl BitPair {
    pub fn new(alice_bit: u8, bob_bit: u8) -> Result<Self> {
        if alice_bit > 1 || bob_bit > 1 {
            return Err(Error::domain(format!(
                "bits must be 0 or 1, got ({alice_bit}, {bob_bit})"
            )));
        }
        Ok(BitPair { alice_bit, bob_bit })
    }

    pub fn variance_class(&self) -> VarianceClass {
        match (self.alice_bit, self.bob_bit) {
            (0, 0) => VarianceClass::Low,
            (1, 1) => VarianceClass::High,
            _ => VarianceClass::Mid,
        }
    }
}

/// Full loop configuration for one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopConfig {
    pub resistors: ResistorPair,
    pub params: NoiseParams,
    /// Series wire resistance `R_w ≥ 0` (0 = ideal line).
    pub wire_resistance_ohm: f64,
    /// Eve's tap position along the wire, 0 = Alice end, 1 = Bob end.
    pub eve_tap_position: f64,
}

impl LoopConfig {
    pub fn new(
        resistors: ResistorPair,
        params: NoiseParams,
        wire_resistance_ohm: f64,
        eve_tap_position: f64,
    ) -> Result<Self> {
        if !(wire_resistance_ohm.is_finite() && wire_resistance_ohm >= 0.0) {
            return Err(Error::domain(format!(
                "wire resistance must be finite and >= 0, got {wire_resistance_ohm}"
            )));
        }
        if !(0.0..=1.0).contains(&eve_tap_position) {
            return Err(Error::domain(format!(
                "tap position must lie in [0, 1], got {eve_tap_position}"
            )));
        }
        Ok(LoopConfig {
            resistors,
            params,
            wire_resistance_ohm,
            eve_tap_position,
        })
    }

    /// Ideal-line loop with no wire resistance, tap at the Alice end.
    pub fn ideal(resistors: ResistorPair, params: NoiseParams) -> Self {
        LoopConfig {
            resistors,
            params,
            wire_resistance_ohm: 0.0,
            eve_tap_position: 0.0,
        }
    }

    fn series_resistance(&self, bitpair: BitPair) -> f64 {
        self.resistors.select(bitpair.alice_bit)
            + self.resistors.select(bitpair.bob_bit)
            + self.wire_resistance_ohm
    }
}

/// Line voltage variance for the ideal (`R_w = 0`) loop:
/// `4kT·(R_A·R_B)/(R_A+R_B)·Δf` with the resistors selected by the bits.
/// Satisfies `σ²_00 < σ²_01 = σ²_10 < σ²_11`.
pub fn loop_voltage_variance(bitpair: BitPair, config: &LoopConfig) -> f64 {
    let ra = config.resistors.select(bitpair.alice_bit);
    let rb = config.resistors.select(bitpair.bob_bit);
    source_variance(ra * rb / (ra + rb), &config.params)
}

/// Loop current variance `4kT·Δf/(R_A+R_B+R_w)`: two (three, with the wire)
/// Johnson sources driving the series resistance. Strictly decreasing in
/// `R_A+R_B`, so the class ordering is the reverse of the voltage ordering.
pub fn loop_current_variance(bitpair: BitPair, config: &LoopConfig) -> f64 {
    source_variance(1.0, &config.params) / config.series_resistance(bitpair)
}

/// Voltage variance at a terminal: `4kTΔf · R_own·(R_far+R_w)/S`, the
/// equilibrium noise of the resistance seen from that node. Reduces to
/// [`loop_voltage_variance`] at `R_w = 0`.
pub fn terminal_voltage_variance(bitpair: BitPair, config: &LoopConfig, alice_end: bool) -> f64 {
    let r_own = config.resistors.select(if alice_end {
        bitpair.alice_bit
    } else {
        bitpair.bob_bit
    });
    let r_far = config.resistors.select(if alice_end {
        bitpair.bob_bit
    } else {
        bitpair.alice_bit
    });
    let s = config.series_resistance(bitpair);
    source_variance(r_own * (r_far + config.wire_resistance_ohm) / s, &config.params)
}

/// Voltage variance at the eavesdropper tap:
/// `4kTΔf · (R_A+t·R_w)(R_B+(1−t)·R_w)/S`. For `R_w > 0` this differs
/// between the 01 and 10 bit pairs except at the wire midpoint — the
/// wire-resistance information leak.
pub fn tap_voltage_variance(bitpair: BitPair, config: &LoopConfig) -> f64 {
    let ra = config.resistors.select(bitpair.alice_bit);
    let rb = config.resistors.select(bitpair.bob_bit);
    let rw = config.wire_resistance_ohm;
    let t = config.eve_tap_position;
    let s = config.series_resistance(bitpair);
    source_variance((ra + t * rw) * (rb + (1.0 - t) * rw) / s, &config.params)
}

/// All sampled observables of one bit interval.
///
/// `current` is measured at Alice's end and `current_bob` at Bob's end; the
/// lumped loop makes them identical on every clean trace, and only an active
/// attacker injecting current from the line can make them differ. The source
/// EMFs are retained internally so tests can verify the loop equation
/// `e_A + e_w − i·S − e_B = 0` per sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopTrace {
    pub u_alice: GaussianTrace,
    pub u_bob: GaussianTrace,
    pub u_eve: GaussianTrace,
    pub current: GaussianTrace,
    pub current_bob: GaussianTrace,
    pub bitpair: BitPair,
    pub(crate) emf_alice: Vec<f64>,
    pub(crate) emf_bob: Vec<f64>,
    pub(crate) emf_wire: Vec<f64>,
}

impl LoopTrace {
    pub fn len(&self) -> usize {
        self.u_alice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_alice.is_empty()
    }

    /// Residual of the loop equation at one sample; zero up to rounding on
    /// any unmodified trace.
    pub fn kirchhoff_residual(&self, k: usize, config: &LoopConfig) -> f64 {
        let s = config.series_resistance(self.bitpair);
        self.emf_alice[k] + self.emf_wire[k] - self.current.samples[k] * s - self.emf_bob[k]
    }
}

/// Samples one bit interval of the loop under the model above. The trace
/// statistics converge to [`loop_voltage_variance`] and
/// [`loop_current_variance`] (exactly, for the ideal line) as the sampling
/// budget grows.
pub fn simulate_bit_interval(
    bitpair: BitPair,
    config: &LoopConfig,
    seed_path: SeedPath,
) -> Result<LoopTrace> {
    let n = config.params.samples_per_bit();
    let ra = config.resistors.select(bitpair.alice_bit);
    let rb = config.resistors.select(bitpair.bob_bit);
    let rw = config.wire_resistance_ohm;
    let t = config.eve_tap_position;
    let s = ra + rb + rw;

    let var_a = source_variance(ra, &config.params);
    let var_b = source_variance(rb, &config.params);
    let var_w = source_variance(rw, &config.params);

    // A zero-variance source is an all-zero trace; skip the generator.
    let source = |variance: f64, substream: u64| -> Result<Vec<f64>> {
        if variance == 0.0 {
            Ok(vec![0.0; n])
        } else {
            Ok(crate::noise::gen_gaussian_trace(variance, n, seed_path.child(substream))?.samples)
        }
    };
    let emf_alice = source(var_a, 0)?;
    let emf_bob = source(var_b, 1)?;
    let emf_wire = source(var_w, 2)?;
    // Decomposes the wire EMF between the two tap-split halves: the Alice-side
    // half is t·e_w plus an independent remainder with variance t(1−t)·var_w,
    // so Alice's and Bob's observables never depend on where Eve taps.
    let split = source(t * (1.0 - t) * var_w, 3)?;

    let mut u_alice = Vec::with_capacity(n);
    let mut u_bob = Vec::with_capacity(n);
    let mut u_eve = Vec::with_capacity(n);
    let mut current = Vec::with_capacity(n);

    for k in 0..n {
        let i = (emf_alice[k] + emf_wire[k] - emf_bob[k]) / s;
        if rw == 0.0 {
            // Ideal line: one node. Computing the node voltage once keeps the
            // three observations bit-identical, as the circuit demands.
            let u = (emf_alice[k] * rb + emf_bob[k] * ra) / s;
            u_alice.push(u);
            u_bob.push(u);
            u_eve.push(u);
        } else {
            let ua = emf_alice[k] - i * ra;
            let ub = emf_bob[k] + i * rb;
            let e_wire_alice_side = t * emf_wire[k] + split[k];
            u_alice.push(ua);
            u_bob.push(ub);
            u_eve.push(ua + e_wire_alice_side - i * t * rw);
        }
        current.push(i);
    }

    let trace = |samples: Vec<f64>, nominal| GaussianTrace {
        samples,
        nominal_variance: nominal,
        seed_path,
    };
    let i_var = loop_current_variance(bitpair, config);
    Ok(LoopTrace {
        u_alice: trace(u_alice, terminal_voltage_variance(bitpair, config, true)),
        u_bob: trace(u_bob, terminal_voltage_variance(bitpair, config, false)),
        u_eve: trace(u_eve, tap_voltage_variance(bitpair, config)),
        current: trace(current.clone(), i_var),
        current_bob: trace(current, i_var),
        bitpair,
        emf_alice,
        emf_bob,
        emf_wire,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::streams;
    use approx::assert_relative_eq;

    fn config(alpha: f64) -> LoopConfig {
        LoopConfig::ideal(
            ResistorPair::new(1000.0, 1000.0 * alpha).unwrap(),
            NoiseParams::new(300.0, 1000.0, 0.5).unwrap(),
        )
    }

    fn pair(a: u8, b: u8) -> BitPair {
        BitPair::new(a, b).unwrap()
    }

    fn sample_variance(xs: &[f64]) -> f64 {
        xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn variance_class_mapping() {
        assert_eq!(pair(0, 0).variance_class(), VarianceClass::Low);
        assert_eq!(pair(0, 1).variance_class(), VarianceClass::Mid);
        assert_eq!(pair(1, 0).variance_class(), VarianceClass::Mid);
        assert_eq!(pair(1, 1).variance_class(), VarianceClass::High);
    }

    #[test]
    fn resistor_pair_validation() {
        assert!(ResistorPair::new(100.0, 1000.0).is_ok());
        assert!(ResistorPair::new(1000.0, 100.0).is_err());
        assert!(ResistorPair::new(0.0, 100.0).is_err());
        assert!(ResistorPair::new(100.0, f64::INFINITY).is_err());
    }

    #[test]
    fn voltage_variance_ratios_at_alpha_10() {
        let cfg = config(10.0);
        let low = loop_voltage_variance(pair(0, 0), &cfg);
        let mid = loop_voltage_variance(pair(0, 1), &cfg);
        let high = loop_voltage_variance(pair(1, 1), &cfg);
        // 2a/(1+a) and a, exact in closed form
        assert_relative_eq!(mid / low, 20.0 / 11.0, max_relative = 1e-12);
        assert_relative_eq!(high / low, 10.0, max_relative = 1e-12);
        assert_eq!(
            loop_voltage_variance(pair(0, 1), &cfg),
            loop_voltage_variance(pair(1, 0), &cfg)
        );
    }

    #[test]
    fn voltage_variance_low_case_value() {
        // R_L = 1 kΩ, T = 300 K, Δf = 1 kHz, both bits 0: 4kT·(R_L/2)·Δf
        let cfg = LoopConfig::ideal(
            ResistorPair::new(1000.0, 10_000.0).unwrap(),
            NoiseParams::new(300.0, 1000.0, 0.5).unwrap(),
        );
        assert_relative_eq!(
            loop_voltage_variance(pair(0, 0), &cfg),
            8.284e-15,
            max_relative = 1e-4
        );
    }

    #[test]
    fn current_variance_ordering_and_ratio() {
        let cfg = config(10.0);
        let low = loop_current_variance(pair(0, 0), &cfg);
        let mid = loop_current_variance(pair(0, 1), &cfg);
        let high = loop_current_variance(pair(1, 1), &cfg);
        assert!(low > mid && mid > high, "current ordering must be reversed");
        assert_relative_eq!(low / high, 10.0, max_relative = 1e-12);
        assert_eq!(
            loop_current_variance(pair(0, 1), &cfg),
            loop_current_variance(pair(1, 0), &cfg)
        );
    }

    #[test]
    fn current_vanishes_for_large_wire_resistance() {
        let mut cfg = config(10.0);
        cfg.wire_resistance_ohm = 1e12;
        assert!(loop_current_variance(pair(0, 0), &cfg) < 1e-28);
    }

    #[test]
    fn ideal_line_voltages_identical() {
        let cfg = config(10.0);
        let trace = simulate_bit_interval(
            pair(0, 1),
            &cfg,
            SeedPath::new(1, streams::KLJN_LOOP, 0),
        )
        .unwrap();
        assert_eq!(trace.len(), cfg.params.samples_per_bit());
        for k in 0..trace.len() {
            assert_eq!(trace.u_alice.samples[k], trace.u_bob.samples[k]);
            assert_eq!(trace.u_alice.samples[k], trace.u_eve.samples[k]);
            assert_eq!(trace.current.samples[k], trace.current_bob.samples[k]);
        }
    }

    #[test]
    fn ideal_line_node_voltage_matches_symbolic_form() {
        let cfg = config(10.0);
        let bp = pair(1, 0);
        let trace =
            simulate_bit_interval(bp, &cfg, SeedPath::new(3, streams::KLJN_LOOP, 0)).unwrap();
        let ra = cfg.resistors.select(bp.alice_bit);
        let rb = cfg.resistors.select(bp.bob_bit);
        for k in 0..trace.len() {
            let expect = (trace.emf_alice[k] * rb + trace.emf_bob[k] * ra) / (ra + rb);
            assert_eq!(trace.u_alice.samples[k], expect);
        }
    }

    #[test]
    fn kirchhoff_identity_holds_per_sample() {
        for rw in [0.0, 10.0, 100.0] {
            let mut cfg = config(10.0);
            cfg.wire_resistance_ohm = rw;
            cfg.eve_tap_position = 0.3;
            let trace = simulate_bit_interval(
                pair(1, 1),
                &cfg,
                SeedPath::new(5, streams::KLJN_LOOP, 2),
            )
            .unwrap();
            let scale = trace.u_alice.nominal_variance.sqrt();
            for k in 0..trace.len() {
                let r = trace.kirchhoff_residual(k, &cfg);
                assert!(r.abs() < 1e-12 * scale, "residual {r} at sample {k}, rw {rw}");
            }
        }
    }

    #[test]
    fn sampled_variance_matches_analytic_mid_case() {
        let cfg = LoopConfig::ideal(
            ResistorPair::new(1000.0, 10_000.0).unwrap(),
            NoiseParams::new(300.0, 1000.0, 500.0).unwrap(), // N = 1e6
        );
        let bp = pair(0, 1);
        let trace =
            simulate_bit_interval(bp, &cfg, SeedPath::new(9, streams::KLJN_LOOP, 0)).unwrap();
        let analytic = loop_voltage_variance(bp, &cfg);
        assert_relative_eq!(
            sample_variance(&trace.u_alice.samples),
            analytic,
            max_relative = 0.01
        );
        assert_relative_eq!(
            sample_variance(&trace.current.samples),
            loop_current_variance(bp, &cfg),
            max_relative = 0.01
        );
    }

    #[test]
    fn wire_noise_keeps_line_in_equilibrium() {
        // With R_w > 0 the sampled variance at every observation point must
        // match the resistance seen from that point, and the measured current
        // must match the series formula.
        let mut cfg = LoopConfig::ideal(
            ResistorPair::new(1000.0, 10_000.0).unwrap(),
            NoiseParams::new(300.0, 1000.0, 500.0).unwrap(),
        );
        cfg.wire_resistance_ohm = 500.0;
        cfg.eve_tap_position = 0.25;
        let bp = pair(0, 1);
        let trace =
            simulate_bit_interval(bp, &cfg, SeedPath::new(13, streams::KLJN_LOOP, 0)).unwrap();
        assert_relative_eq!(
            sample_variance(&trace.u_alice.samples),
            terminal_voltage_variance(bp, &cfg, true),
            max_relative = 0.01
        );
        assert_relative_eq!(
            sample_variance(&trace.u_bob.samples),
            terminal_voltage_variance(bp, &cfg, false),
            max_relative = 0.01
        );
        assert_relative_eq!(
            sample_variance(&trace.u_eve.samples),
            tap_voltage_variance(bp, &cfg),
            max_relative = 0.01
        );
        assert_relative_eq!(
            sample_variance(&trace.current.samples),
            loop_current_variance(bp, &cfg),
            max_relative = 0.01
        );
    }

    #[test]
    fn mid_tap_variances_differ_only_with_wire_resistance() {
        let mut cfg = config(10.0);
        assert_eq!(
            tap_voltage_variance(pair(0, 1), &cfg),
            tap_voltage_variance(pair(1, 0), &cfg)
        );
        cfg.wire_resistance_ohm = 10.0; // 1% of R_L, tap at Alice end
        let v01 = tap_voltage_variance(pair(0, 1), &cfg);
        let v10 = tap_voltage_variance(pair(1, 0), &cfg);
        assert!(v10 > v01, "Alice holding R_H must raise her-end variance");
        // At the wire midpoint the leak closes by symmetry.
        cfg.eve_tap_position = 0.5;
        assert_relative_eq!(
            tap_voltage_variance(pair(0, 1), &cfg),
            tap_voltage_variance(pair(1, 0), &cfg),
            max_relative = 1e-12
        );
    }

    #[test]
    fn equilibrium_has_no_net_power_flow() {
        let cfg = LoopConfig::ideal(
            ResistorPair::new(1000.0, 10_000.0).unwrap(),
            NoiseParams::new(300.0, 1000.0, 500.0).unwrap(),
        );
        let trace = simulate_bit_interval(
            pair(0, 1),
            &cfg,
            SeedPath::new(17, streams::KLJN_LOOP, 0),
        )
        .unwrap();
        let n = trace.len() as f64;
        let mean_ui = trace
            .u_alice
            .samples
            .iter()
            .zip(&trace.current.samples)
            .map(|(u, i)| u * i)
            .sum::<f64>()
            / n;
        let sd_ui = (trace.u_alice.nominal_variance * trace.current.nominal_variance).sqrt();
        assert!(
            mean_ui.abs() < 3.0 * sd_ui / n.sqrt(),
            "mean u·i = {mean_ui}, bound {}",
            3.0 * sd_ui / n.sqrt()
        );
    }

    #[test]
    fn interval_simulation_is_deterministic() {
        let cfg = config(10.0);
        let path = SeedPath::new(23, streams::KLJN_LOOP, 4);
        let a = simulate_bit_interval(pair(1, 0), &cfg, path).unwrap();
        let b = simulate_bit_interval(pair(1, 0), &cfg, path).unwrap();
        assert_eq!(a, b);
    }
}
