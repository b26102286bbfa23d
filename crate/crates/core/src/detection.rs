//! Partner-bit detection from noise-variance estimates.
//!
//! The information sits in the variance of a zero-mean Gaussian, so the
//! sufficient statistic for one interval is the mean of squares
//! `σ̂² = (1/N)·Σ x_k²`. Scaled by `N/σ²` it is chi-square with `N` degrees
//! of freedom, which gives every error probability in closed form through
//! the regularized incomplete gamma function — the oracle the Monte-Carlo
//! paths are checked against.
//!
//! A detector that knows its own end's bit faces a two-hypothesis test
//! between adjacent variance classes. Comparing `σ̂²` against the value
//! where the two candidate per-sample likelihoods cross is the exact
//! maximum-likelihood rule under equal priors for every `N`, not just
//! asymptotically, because the log-likelihood ratio is monotone in `σ̂²`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::kljn::{BitPair, LoopConfig, VarianceClass};
use crate::kljn::{loop_current_variance, loop_voltage_variance};

/// Mean-of-squares variance estimate (no mean subtraction; the process is
/// known zero-mean) together with the sample count behind it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimate {
    pub value: f64,
    pub n: usize,
}

/// Estimates the variance of a zero-mean process.
pub fn estimate_variance(samples: &[f64]) -> Result<VarianceEstimate> {
    if samples.is_empty() {
        return Err(Error::domain("cannot estimate variance of an empty trace"));
    }
    let value = samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64;
    Ok(VarianceEstimate {
        value,
        n: samples.len(),
    })
}

/// The point where two zero-mean Gaussian likelihoods with variances
/// `σa² < σb²` cross: `γ = σa²·σb²·ln(σb²/σa²)/(σb²−σa²)`, strictly between
/// the two variances.
pub fn ml_threshold(sigma_a_sq: f64, sigma_b_sq: f64) -> Result<f64> {
    if !(sigma_a_sq.is_finite() && sigma_b_sq.is_finite() && sigma_a_sq > 0.0) {
        return Err(Error::domain(format!(
            "variances must be finite and positive, got ({sigma_a_sq}, {sigma_b_sq})"
        )));
    }
    if sigma_b_sq <= sigma_a_sq {
        return Err(Error::domain(format!(
            "threshold requires sigma_a^2 < sigma_b^2, got ({sigma_a_sq}, {sigma_b_sq})"
        )));
    }
    Ok(sigma_a_sq * sigma_b_sq * (sigma_b_sq / sigma_a_sq).ln() / (sigma_b_sq - sigma_a_sq))
}

/// Which observable a threshold set applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignalDomain {
    Voltage,
    Current,
}

/// Per-class variances of one observable, indexed by [`VarianceClass`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassVariances {
    pub low: f64,
    pub mid: f64,
    pub high: f64,
}

impl ClassVariances {
    pub fn get(&self, class: VarianceClass) -> f64 {
        match class {
            VarianceClass::Low => self.low,
            VarianceClass::Mid => self.mid,
            VarianceClass::High => self.high,
        }
    }
}

/// The two decision boundaries of the three-level variance detector.
/// `gamma1` always separates the Low and Mid classes and `gamma2` the Mid
/// and High classes, so in the current domain — where the class variances
/// run in the opposite order — `gamma1 > gamma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSet {
    pub gamma1: f64,
    pub gamma2: f64,
    pub domain: SignalDomain,
    pub class_variances: ClassVariances,
}

impl ThresholdSet {
    pub fn from_class_variances(domain: SignalDomain, vars: ClassVariances) -> Result<Self> {
        let (gamma1, gamma2) = match domain {
            SignalDomain::Voltage => (
                ml_threshold(vars.low, vars.mid)?,
                ml_threshold(vars.mid, vars.high)?,
            ),
            SignalDomain::Current => (
                ml_threshold(vars.mid, vars.low)?,
                ml_threshold(vars.high, vars.mid)?,
            ),
        };
        Ok(ThresholdSet {
            gamma1,
            gamma2,
            domain,
            class_variances: vars,
        })
    }

    /// Voltage thresholds from the ideal-line class variances of a loop.
    pub fn voltage_for(config: &LoopConfig) -> Result<Self> {
        Self::from_class_variances(
            SignalDomain::Voltage,
            ClassVariances {
                low: loop_voltage_variance(BitPair::new(0, 0)?, config),
                mid: loop_voltage_variance(BitPair::new(0, 1)?, config),
                high: loop_voltage_variance(BitPair::new(1, 1)?, config),
            },
        )
    }

    /// Current thresholds from the series-loop class variances.
    pub fn current_for(config: &LoopConfig) -> Result<Self> {
        Self::from_class_variances(
            SignalDomain::Current,
            ClassVariances {
                low: loop_current_variance(BitPair::new(0, 0)?, config),
                mid: loop_current_variance(BitPair::new(0, 1)?, config),
                high: loop_current_variance(BitPair::new(1, 1)?, config),
            },
        )
    }
}

/// Which observables the detector consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectorMode {
    VoltageOnly,
    CurrentOnly,
    Joint,
}

/// Decision for one interval: the partner's bit, and whether the interval
/// is secure (decided class Mid, i.e. partner bit differs from own).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionOutcome {
    pub partner_bit: u8,
    pub secure: bool,
    pub estimate: VarianceEstimate,
}

/// Zero-mean Gaussian log-likelihood of a mean-of-squares statistic,
/// dropping the constant term.
fn log_likelihood(est: &VarianceEstimate, variance: f64) -> f64 {
    -(est.n as f64) / 2.0 * (variance.ln() + est.value / variance)
}

/// Decides the partner's bit from variance estimates and the detector's own
/// bit. Ties on a boundary resolve toward Mid (secure); the follow-up key
/// verification audits that bias rather than letting it pass silently.
pub fn detect_partner_bit(
    est_v: Option<VarianceEstimate>,
    est_i: Option<VarianceEstimate>,
    own_bit: u8,
    voltage: Option<&ThresholdSet>,
    current: Option<&ThresholdSet>,
    mode: DetectorMode,
) -> Result<DetectionOutcome> {
    if own_bit > 1 {
        return Err(Error::domain(format!("own bit must be 0 or 1, got {own_bit}")));
    }
    let need = |x: Option<VarianceEstimate>, what: &str| {
        x.ok_or_else(|| Error::usage(format!("{mode:?} detection requires {what}")))
    };
    fn need_thr<'a>(
        x: Option<&'a ThresholdSet>,
        dom: SignalDomain,
        mode: DetectorMode,
    ) -> Result<&'a ThresholdSet> {
        let t = x.ok_or_else(|| {
            Error::usage(format!("{mode:?} detection requires {dom:?} thresholds"))
        })?;
        if t.domain != dom {
            return Err(Error::usage(format!(
                "threshold domain {:?} does not match required {dom:?}",
                t.domain
            )));
        }
        Ok(t)
    }

    let (partner_bit, estimate) = match mode {
        DetectorMode::VoltageOnly => {
            let est = need(est_v, "a voltage estimate")?;
            let thr = need_thr(voltage, SignalDomain::Voltage, mode)?;
            let partner = if own_bit == 0 {
                u8::from(est.value >= thr.gamma1)
            } else {
                u8::from(est.value > thr.gamma2)
            };
            (partner, est)
        }
        DetectorMode::CurrentOnly => {
            let est = need(est_i, "a current estimate")?;
            let thr = need_thr(current, SignalDomain::Current, mode)?;
            // Current variances order opposite to voltage: the 00 class is
            // the noisiest, so the comparisons flip.
            let partner = if own_bit == 0 {
                u8::from(est.value <= thr.gamma1)
            } else {
                u8::from(est.value < thr.gamma2)
            };
            (partner, est)
        }
        DetectorMode::Joint => {
            let ev = need(est_v, "a voltage estimate")?;
            let ei = need(est_i, "a current estimate")?;
            let tv = need_thr(voltage, SignalDomain::Voltage, mode)?;
            let ti = need_thr(current, SignalDomain::Current, mode)?;
            // Candidate classes given own bit; the voltage and current
            // statistics are uncorrelated in the equilibrium loop, so the
            // joint log-likelihood is the sum of the per-domain terms.
            let class_of = |partner: u8| BitPair::new(own_bit, partner).unwrap().variance_class();
            let ll = |partner: u8| {
                let c = class_of(partner);
                log_likelihood(&ev, tv.class_variances.get(c))
                    + log_likelihood(&ei, ti.class_variances.get(c))
            };
            let (ll0, ll1) = (ll(0), ll(1));
            let partner = if ll0 == ll1 {
                1 - own_bit // tie toward Mid
            } else {
                u8::from(ll1 > ll0)
            };
            (partner, ev)
        }
    };

    Ok(DetectionOutcome {
        partner_bit,
        secure: partner_bit != own_bit,
        estimate,
    })
}

/// Which side of the threshold the decision takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionSide {
    DecideAbove,
    DecideBelow,
}

/// Exact probability that the mean-of-squares of `n` zero-mean Gaussian
/// samples with true variance `true_var` lands on the given side of
/// `gamma`: `P(σ̂² > γ) = Q(n/2, n·γ/(2σ²))` via the regularized incomplete
/// gamma function.
pub fn bep_oracle(true_var: f64, gamma: f64, n: usize, side: DecisionSide) -> Result<f64> {
    if !(true_var.is_finite() && true_var > 0.0 && gamma.is_finite() && gamma > 0.0) {
        return Err(Error::domain(format!(
            "oracle requires positive variance and threshold, got ({true_var}, {gamma})"
        )));
    }
    if n == 0 {
        return Err(Error::domain("oracle requires n >= 1"));
    }
    let x = n as f64 * gamma / (2.0 * true_var);
    let a = n as f64 / 2.0;
    Ok(match side {
        DecisionSide::DecideAbove => gamma_ur(a, x),
        DecisionSide::DecideBelow => gamma_lr(a, x),
    })
}

/// Equal-prior error probability of the maximum-likelihood test between two
/// variance hypotheses at `n` samples, with the threshold at the likelihood
/// crossing: `(P(σ̂² > γ | σa²) + P(σ̂² < γ | σb²))/2`.
pub fn two_class_error(sigma_a_sq: f64, sigma_b_sq: f64, n: usize) -> Result<f64> {
    let gamma = ml_threshold(sigma_a_sq, sigma_b_sq)?;
    Ok(0.5
        * (bep_oracle(sigma_a_sq, gamma, n, DecisionSide::DecideAbove)?
            + bep_oracle(sigma_b_sq, gamma, n, DecisionSide::DecideBelow)?))
}
