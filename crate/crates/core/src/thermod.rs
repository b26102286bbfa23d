//! Wireless thermal-noise modulation over a flat line-of-sight channel.
//!
//! The transmitter conveys a bit by selecting which resistor feeds the
//! antenna, i.e. by indexing the power spectral density of the radiated
//! noise. The receiver sees complex baseband samples whose total variance is
//! the channel-scaled source variance plus its own chain noise,
//! `g·σ²_bit + σ²_rx`, and decides each bit by thresholding the per-interval
//! variance estimate. Unlike the wired loop there is no indeterminacy here:
//! anyone who knows the operating point demodulates equally well, which is
//! the whole stealth-versus-security trade of the scheme.
//!
//! The per-interval budget is `n = ⌊Tb·Δf⌋` complex samples — the same count
//! of real dimensions as the wired Nyquist budget.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

use crate::detection::{bep_oracle, ml_threshold, DecisionSide};
use crate::error::{Error, Result};
use crate::noise::{source_variance, NoiseParams};
use crate::seed::SeedPath;

/// One complex baseband sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iq {
    pub re: f64,
    pub im: f64,
}

impl Iq {
    pub fn magnitude_sq(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }
}

/// Operating point of one wireless link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TherModConfig {
    pub params: NoiseParams,
    /// Source resistance selected for bit 0 (the low-variance symbol).
    pub r_bit0_ohm: f64,
    /// Source resistance selected for bit 1.
    pub r_bit1_ohm: f64,
    /// Linear power gain of the channel.
    pub channel_gain: f64,
    /// Total complex variance of the receiver chain's own (disruptive) noise.
    pub rx_noise_var: f64,
    /// Decision threshold γ on the per-interval variance estimate.
    pub threshold: f64,
}

impl TherModConfig {
    pub fn new(
        params: NoiseParams,
        r_bit0_ohm: f64,
        r_bit1_ohm: f64,
        channel_gain: f64,
        rx_noise_var: f64,
        threshold: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("r_bit0_ohm", r_bit0_ohm),
            ("r_bit1_ohm", r_bit1_ohm),
            ("channel_gain", channel_gain),
            ("rx_noise_var", rx_noise_var),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::domain(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if r_bit0_ohm >= r_bit1_ohm {
            return Err(Error::domain(format!(
                "bit-0 resistance must be below bit-1 resistance, got ({r_bit0_ohm}, {r_bit1_ohm})"
            )));
        }
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::domain(format!("threshold must be positive, got {threshold}")));
        }
        let config = TherModConfig {
            params,
            r_bit0_ohm,
            r_bit1_ohm,
            channel_gain,
            rx_noise_var,
            threshold,
        };
        if config.n_per_bit() == 0 {
            return Err(Error::config(format!(
                "Tb*df = {} yields zero complex samples per bit",
                params.bit_duration_s * params.bandwidth_hz
            )));
        }
        Ok(config)
    }

    /// Complex samples per bit interval, `⌊Tb·Δf⌋`.
    pub fn n_per_bit(&self) -> usize {
        (self.params.bit_duration_s * self.params.bandwidth_hz).floor() as usize
    }

    /// Total received complex variance while the given bit is selected:
    /// `g·4kT·R_bit·Δf + σ²_rx`.
    pub fn total_variance(&self, bit: u8) -> f64 {
        let r = if bit == 0 { self.r_bit0_ohm } else { self.r_bit1_ohm };
        self.channel_gain * source_variance(r, &self.params) + self.rx_noise_var
    }

    /// The likelihood-crossing threshold between the two received
    /// variances. Errors when the channel makes the symbols identical
    /// (e.g. zero gain).
    pub fn default_threshold(
        params: NoiseParams,
        r_bit0_ohm: f64,
        r_bit1_ohm: f64,
        channel_gain: f64,
        rx_noise_var: f64,
    ) -> Result<f64> {
        let v0 = channel_gain * source_variance(r_bit0_ohm, &params) + rx_noise_var;
        let v1 = channel_gain * source_variance(r_bit1_ohm, &params) + rx_noise_var;
        ml_threshold(v0, v1)
    }
}

/// A transmitted-and-received frame of complex baseband samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasebandFrame {
    pub samples: Vec<Iq>,
    pub bits_truth: Vec<u8>,
    pub n_per_bit: usize,
}

/// Synthesizes the received baseband frame for a bit sequence: per bit,
/// `n_per_bit` circular complex Gaussian samples with per-component variance
/// `(g·σ²_bit + σ²_rx)/2`.
pub fn thermod_transmit(
    bits: &[u8],
    config: &TherModConfig,
    seed_path: SeedPath,
) -> Result<BasebandFrame> {
    if bits.is_empty() {
        return Err(Error::domain("need at least one bit"));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::domain("bits must be 0 or 1"));
    }
    let n = config.n_per_bit();
    let mut rng = seed_path.rng();
    let mut samples = Vec::with_capacity(bits.len() * n);
    for &bit in bits {
        let per_component = config.total_variance(bit) / 2.0;
        let normal = Normal::new(0.0, per_component.sqrt())
            .map_err(|e| Error::domain(format!("bad Gaussian parameters: {e}")))?;
        for _ in 0..n {
            samples.push(Iq {
                re: normal.sample(&mut rng),
                im: normal.sample(&mut rng),
            });
        }
    }
    Ok(BasebandFrame {
        samples,
        bits_truth: bits.to_vec(),
        n_per_bit: n,
    })
}

/// Threshold detector: per interval, estimate `σ̂² = mean |s|²` and decide 1
/// iff it exceeds γ.
pub fn thermod_detect(frame: &BasebandFrame, config: &TherModConfig) -> Result<Vec<u8>> {
    let n = frame.n_per_bit;
    if n == 0 || frame.samples.len() != frame.bits_truth.len() * n {
        return Err(Error::internal(format!(
            "frame geometry broken: {} samples for {} bits at {} per bit",
            frame.samples.len(),
            frame.bits_truth.len(),
            n
        )));
    }
    Ok(frame
        .samples
        .chunks_exact(n)
        .map(|chunk| {
            let est = chunk.iter().map(Iq::magnitude_sq).sum::<f64>() / n as f64;
            u8::from(est > config.threshold)
        })
        .collect())
}

/// Exact bit error probability of the threshold detector under equal
/// priors. The interval statistic over `n` complex samples is chi-square
/// with `2n` degrees of freedom, so the same incomplete-gamma tail applies.
pub fn thermod_ber_oracle(config: &TherModConfig) -> Result<f64> {
    let n2 = 2 * config.n_per_bit();
    let miss0 = bep_oracle(
        config.total_variance(0),
        config.threshold,
        n2,
        DecisionSide::DecideAbove,
    )?;
    let miss1 = bep_oracle(
        config.total_variance(1),
        config.threshold,
        n2,
        DecisionSide::DecideBelow,
    )?;
    Ok(0.5 * (miss0 + miss1))
}

/// Writes a frame as interleaved little-endian float64 `(re, im)` pairs at
/// `<base>.iq`, with a JSON sidecar `<base>.json` carrying the config, the
/// true bits, and the frame geometry for replay into external tools.
pub fn write_frame(frame: &BasebandFrame, config: &TherModConfig, base: &Path) -> Result<()> {
    let mut bin = Vec::with_capacity(frame.samples.len() * 16);
    for s in &frame.samples {
        bin.extend_from_slice(&s.re.to_le_bytes());
        bin.extend_from_slice(&s.im.to_le_bytes());
    }
    std::fs::File::create(base.with_extension("iq"))?.write_all(&bin)?;

    #[derive(Serialize)]
    struct Sidecar<'a> {
        config: &'a TherModConfig,
        bits_truth: &'a [u8],
        n_per_bit: usize,
        sample_count: usize,
    }
    let sidecar = serde_json::to_string_pretty(&Sidecar {
        config,
        bits_truth: &frame.bits_truth,
        n_per_bit: frame.n_per_bit,
        sample_count: frame.samples.len(),
    })
    .map_err(|e| Error::internal(format!("sidecar serialization: {e}")))?;
    std::fs::write(base.with_extension("json"), sidecar)?;
    Ok(())
}

/// Reads a frame written by [`write_frame`].
pub fn read_frame(base: &Path) -> Result<(BasebandFrame, TherModConfig)> {
    #[derive(Deserialize)]
    struct Sidecar {
        config: TherModConfig,
        bits_truth: Vec<u8>,
        n_per_bit: usize,
        sample_count: usize,
    }
    let sidecar: Sidecar =
        serde_json::from_str(&std::fs::read_to_string(base.with_extension("json"))?)
            .map_err(|e| Error::config(format!("bad sidecar: {e}")))?;

    let mut bin = Vec::new();
    std::fs::File::open(base.with_extension("iq"))?.read_to_end(&mut bin)?;
    if bin.len() != sidecar.sample_count * 16 {
        return Err(Error::config(format!(
            "binary length {} does not match {} samples",
            bin.len(),
            sidecar.sample_count
        )));
    }
    let samples = bin
        .chunks_exact(16)
        .map(|c| Iq {
            re: f64::from_le_bytes(c[0..8].try_into().unwrap()),
            im: f64::from_le_bytes(c[8..16].try_into().unwrap()),
        })
        .collect();
    Ok((
        BasebandFrame {
            samples,
            bits_truth: sidecar.bits_truth,
            n_per_bit: sidecar.n_per_bit,
        },
        sidecar.config,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::streams;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn params(n_per_bit: f64) -> NoiseParams {
        NoiseParams::new(300.0, 1000.0, n_per_bit / 1000.0).unwrap()
    }

    fn config(gain: f64, rx: f64, n_per_bit: f64) -> TherModConfig {
        let p = params(n_per_bit);
        let threshold = TherModConfig::default_threshold(p, 100.0, 10_000.0, gain, rx)
            .unwrap_or(rx.max(1e-30));
        TherModConfig::new(p, 100.0, 10_000.0, gain, rx, threshold).unwrap()
    }

    fn random_bits(n: usize, trial: u64) -> Vec<u8> {
        let mut rng = SeedPath::new(606, streams::THERMOD, trial).rng();
        (0..n).map(|_| rng.gen_range(0..=1)).collect()
    }

    fn ber(decided: &[u8], truth: &[u8]) -> f64 {
        decided
            .iter()
            .zip(truth)
            .filter(|(d, t)| d != t)
            .count() as f64
            / truth.len() as f64
    }

    #[test]
    fn config_validation() {
        let p = params(64.0);
        assert!(TherModConfig::new(p, 100.0, 10_000.0, 1.0, 0.0, 1e-18).is_ok());
        assert!(TherModConfig::new(p, 10_000.0, 100.0, 1.0, 0.0, 1e-18).is_err());
        assert!(TherModConfig::new(p, 100.0, 10_000.0, -1.0, 0.0, 1e-18).is_err());
        assert!(TherModConfig::new(p, 100.0, 10_000.0, 1.0, 0.0, 0.0).is_err());
        // sub-sample budget rejected
        let tiny = NoiseParams::new(300.0, 1000.0, 0.0009).unwrap();
        assert!(TherModConfig::new(tiny, 100.0, 10_000.0, 1.0, 0.0, 1e-18).is_err());
    }

    #[test]
    fn zero_gain_carries_only_receiver_noise() {
        let rx = 1e-15;
        let cfg = config(0.0, rx, 1000.0);
        let frame = thermod_transmit(
            &random_bits(1000, 0),
            &cfg,
            SeedPath::new(1, streams::THERMOD, 0),
        )
        .unwrap();
        let var = frame.samples.iter().map(Iq::magnitude_sq).sum::<f64>()
            / frame.samples.len() as f64;
        assert_relative_eq!(var, rx, max_relative = 0.01);
    }

    #[test]
    fn zero_source_resistance_on_bit_zero() {
        let p = params(1000.0);
        let rx = 1e-16;
        let threshold = TherModConfig::default_threshold(p, 0.0, 10_000.0, 1.0, rx).unwrap();
        let cfg = TherModConfig::new(p, 0.0, 10_000.0, 1.0, rx, threshold).unwrap();
        let frame =
            thermod_transmit(&[0; 1000], &cfg, SeedPath::new(2, streams::THERMOD, 0)).unwrap();
        let var = frame.samples.iter().map(Iq::magnitude_sq).sum::<f64>()
            / frame.samples.len() as f64;
        assert_relative_eq!(var, rx, max_relative = 0.01);
    }

    #[test]
    fn bit_one_variance_converges() {
        let cfg = config(2.0, 1e-16, 1000.0);
        let frame =
            thermod_transmit(&[1; 1000], &cfg, SeedPath::new(3, streams::THERMOD, 0)).unwrap();
        let var = frame.samples.iter().map(Iq::magnitude_sq).sum::<f64>()
            / frame.samples.len() as f64;
        assert_relative_eq!(var, cfg.total_variance(1), max_relative = 0.01);
    }

    #[test]
    fn noiseless_wide_separation_is_error_free() {
        // variance ratio 100, no receiver noise, 256 samples per bit
        let p = params(256.0);
        let threshold = TherModConfig::default_threshold(p, 100.0, 10_000.0, 1.0, 0.0).unwrap();
        let cfg = TherModConfig::new(p, 100.0, 10_000.0, 1.0, 0.0, threshold).unwrap();
        let bits = random_bits(10_000, 1);
        let frame = thermod_transmit(&bits, &cfg, SeedPath::new(4, streams::THERMOD, 0)).unwrap();
        let decided = thermod_detect(&frame, &cfg).unwrap();
        assert_eq!(ber(&decided, &bits), 0.0);
    }

    #[test]
    fn zero_gain_is_coin_flipping() {
        let cfg = config(0.0, 1e-15, 64.0);
        let bits = random_bits(10_000, 2);
        let frame = thermod_transmit(&bits, &cfg, SeedPath::new(5, streams::THERMOD, 0)).unwrap();
        let decided = thermod_detect(&frame, &cfg).unwrap();
        let measured = ber(&decided, &bits);
        assert!((measured - 0.5).abs() < 3.0 * (0.25f64 / 10_000.0).sqrt(), "ber {measured}");
    }

    #[test]
    fn monte_carlo_matches_oracle() {
        let cfg = config(1.0, 5e-16, 64.0);
        let expected = thermod_ber_oracle(&cfg).unwrap();
        let bits = random_bits(40_000, 3);
        let frame = thermod_transmit(&bits, &cfg, SeedPath::new(6, streams::THERMOD, 0)).unwrap();
        let measured = ber(&thermod_detect(&frame, &cfg).unwrap(), &bits);
        let sigma = (expected * (1.0 - expected) / bits.len() as f64).sqrt();
        assert!(
            (measured - expected).abs() < 3.0 * sigma,
            "measured {measured}, oracle {expected}"
        );
    }

    #[test]
    fn oracle_degenerate_cases() {
        // threshold far below both variances: always decide 1, BER 1/2
        let p = params(64.0);
        let cfg = TherModConfig::new(p, 100.0, 10_000.0, 1.0, 1e-16, 1e-30).unwrap();
        assert_relative_eq!(thermod_ber_oracle(&cfg).unwrap(), 0.5, max_relative = 1e-9);
        // identical hypotheses: 0.5 at any threshold
        let v = 1e-15;
        let even = TherModConfig {
            params: p,
            r_bit0_ohm: 100.0,
            r_bit1_ohm: 200.0,
            channel_gain: 0.0,
            rx_noise_var: v,
            threshold: v * 0.8,
        };
        assert_relative_eq!(thermod_ber_oracle(&even).unwrap(), 0.5, max_relative = 1e-12);
    }

    #[test]
    fn oracle_improves_with_budget_and_gain() {
        let b64 = thermod_ber_oracle(&config(1.0, 5e-16, 64.0)).unwrap();
        let b256 = thermod_ber_oracle(&config(1.0, 5e-16, 256.0)).unwrap();
        assert!(b64 > b256, "{b64} vs {b256}");
        let g_low = thermod_ber_oracle(&config(0.5, 5e-16, 64.0)).unwrap();
        let g_high = thermod_ber_oracle(&config(2.0, 5e-16, 64.0)).unwrap();
        assert!(g_low > g_high, "{g_low} vs {g_high}");
    }

    #[test]
    fn an_informed_eavesdropper_demodulates_equally() {
        let cfg = config(1.0, 5e-16, 64.0);
        let bits = random_bits(5000, 4);
        let frame = thermod_transmit(&bits, &cfg, SeedPath::new(7, streams::THERMOD, 0)).unwrap();
        let bob = thermod_detect(&frame, &cfg).unwrap();
        let eve = thermod_detect(&frame, &cfg).unwrap();
        let agreement = bob.iter().zip(&eve).filter(|(a, b)| a == b).count() as f64
            / bits.len() as f64;
        let measured_ber = ber(&bob, &bits);
        assert!(agreement >= 1.0 - 2.0 * measured_ber);
    }

    #[test]
    fn frame_io_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(1.0, 5e-16, 32.0);
        let bits = random_bits(50, 5);
        let frame = thermod_transmit(&bits, &cfg, SeedPath::new(8, streams::THERMOD, 0)).unwrap();
        let base = dir.path().join("frame");
        write_frame(&frame, &cfg, &base).unwrap();
        let (loaded, loaded_cfg) = read_frame(&base).unwrap();
        assert_eq!(loaded, frame);
        assert_eq!(loaded_cfg, cfg);
        // replay detection on the loaded frame
        assert_eq!(
            thermod_detect(&loaded, &loaded_cfg).unwrap(),
            thermod_detect(&frame, &cfg).unwrap()
        );
    }
}
