//! Band-limited Johnson (thermal) noise synthesis.
//!
//! A resistor R at temperature T produces a zero-mean Gaussian voltage noise
//! with one-sided power spectral density `4kTR`. Band-limiting to `Δf` and
//! observing for one bit duration `Tb` admits at most `N = 2·Tb·Δf`
//! statistically independent samples (the Nyquist budget), so the synthesis
//! model is simply N i.i.d. Gaussian draws at the physically correct
//! variance — exact for every statistic computed downstream.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedPath;

/// Boltzmann constant, J/K (CODATA; fixed, not configurable).
pub const BOLTZMANN_J_PER_K: f64 = 1.380649e-23;

/// Physical constants and sampling budget for one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Temperature in kelvin. May be an "effective" temperature when the
    /// noise comes from an artificial generator rather than a physical
    /// resistor.
    pub temperature_kelvin: f64,
    /// Noise bandwidth Δf in hertz.
    pub bandwidth_hz: f64,
    /// Bit duration Tb in seconds.
    pub bit_duration_s: f64,
}

impl NoiseParams {
    pub fn new(temperature_kelvin: f64, bandwidth_hz: f64, bit_duration_s: f64) -> Result<Self> {
        for (name, v) in [
            ("temperature_kelvin", temperature_kelvin),
            ("bandwidth_hz", bandwidth_hz),
            ("bit_duration_s", bit_duration_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be finite and > 0, got {v}"
                )));
            }
        }
        let params = NoiseParams {
            temperature_kelvin,
            bandwidth_hz,
            bit_duration_s,
        };
        if params.samples_per_bit() == 0 {
            return Err(Error::config(format!(
                "sampling budget 2*Tb*df = {} yields zero independent samples per bit",
                2.0 * bit_duration_s * bandwidth_hz
            )));
        }
        Ok(params)
    }

    /// Maximum count of statistically independent noise samples per bit
    /// interval, `floor(2·Tb·Δf)`. The simulator never draws more per
    /// interval; sampling faster would only produce correlated samples and
    /// no additional information, for Eve just as for Alice and Bob.
    pub fn samples_per_bit(&self) -> usize {
        (2.0 * self.bit_duration_s * self.bandwidth_hz).floor() as usize
    }
}

/// One-sided voltage noise PSD of a resistor, `4kTR` in V²/Hz.
pub fn johnson_psd(resistance_ohm: f64, params: &NoiseParams) -> Result<f64> {
    if !resistance_ohm.is_finite() || resistance_ohm < 0.0 {
        return Err(Error::domain(format!(
            "resistance must be finite and >= 0, got {resistance_ohm}"
        )));
    }
    Ok(4.0 * BOLTZMANN_J_PER_K * params.temperature_kelvin * resistance_ohm)
}

/// Johnson source EMF variance over the band: `4kTR·Δf` (V²).
pub(crate) fn source_variance(resistance_ohm: f64, params: &NoiseParams) -> f64 {
    4.0 * BOLTZMANN_J_PER_K * params.temperature_kelvin * resistance_ohm * params.bandwidth_hz
}

/// A sampled zero-mean Gaussian process together with its nominal variance
/// and the seed path that regenerates it bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTrace {
    pub samples: Vec<f64>,
    pub nominal_variance: f64,
    pub seed_path: SeedPath,
}

impl GaussianTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Draws `n` independent zero-mean Gaussian samples with the given variance.
/// Deterministic under `seed_path`; a variance of zero yields an all-zero
/// trace (the degenerate Gaussian).
pub fn gen_gaussian_trace(variance: f64, n: usize, seed_path: SeedPath) -> Result<GaussianTrace> {
    if !(variance.is_finite() && variance >= 0.0) {
        return Err(Error::domain(format!(
            "variance must be finite and >= 0, got {variance}"
        )));
    }
    if n == 0 {
        return Err(Error::domain("trace length must be >= 1".to_string()));
    }
    let normal = Normal::new(0.0, variance.sqrt())
        .map_err(|e| Error::domain(format!("bad Gaussian parameters: {e}")))?;
    let mut rng = seed_path.rng();
    let samples = (0..n).map(|_| normal.sample(&mut rng)).collect();
    Ok(GaussianTrace {
        samples,
        nominal_variance: variance,
        seed_path,
    })
}
