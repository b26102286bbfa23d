//! Seeded trial execution and metric aggregation.
//!
//! Every metric here is a proportion, so trials accumulate as
//! numerator/denominator count pairs: the point estimate is the pooled
//! ratio and the standard error the binomial one. Per-trial seeds derive
//! from (master seed, kind stream, sweep-point index, trial index), which
//! makes aggregates independent of execution order — parallel and serial
//! runs produce identical rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::time::Instant;

use crate::spec::{build_kind_config, expand_sweep, ExperimentSpec, KindConfig};
use crate::CliError;
use noisekey_core::adversary::{mid_resolution_attack, EveObservation, MidResolution};
use noisekey_core::detection::{
    bep_oracle, detect_partner_bit, estimate_variance, DecisionSide, DetectorMode, ThresholdSet,
};
use noisekey_core::kljn::{simulate_bit_interval, BitPair, LoopConfig};
use noisekey_core::protocol::run_session;
use noisekey_core::qkd::run_bb84;
use noisekey_core::seed::SeedPath;
use noisekey_core::thermod::{thermod_ber_oracle, thermod_detect, thermod_transmit};

/// One aggregated metric at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    /// Sweep coordinates in axis order, empty for unswept runs.
    pub sweep: Vec<(String, Value)>,
    pub metric: String,
    pub estimate: f64,
    pub std_error: f64,
    pub trials: u64,
    /// Wall-clock seconds spent on this sweep point. Carried in JSON
    /// reports only; CSV omits it so identical seeds give identical bytes.
    pub wall_time_s: f64,
}

/// Proportion counter.
#[derive(Debug, Clone, Copy, Default)]
struct Counts {
    num: u64,
    den: u64,
}

impl Counts {
    fn add(&mut self, other: Counts) {
        self.num += other.num;
        self.den += other.den;
    }

    fn estimate(&self) -> f64 {
        if self.den == 0 {
            return 0.0;
        }
        self.num as f64 / self.den as f64
    }

    fn std_error(&self) -> f64 {
        if self.den == 0 {
            return 0.0;
        }
        let p = self.estimate();
        (p * (1.0 - p) / self.den as f64).sqrt()
    }
}

fn metric_row(
    sweep: &[(String, Value)],
    name: &str,
    counts: Counts,
    trials: u64,
    wall_time_s: f64,
) -> ReportRow {
    ReportRow {
        sweep: sweep.to_vec(),
        metric: name.to_string(),
        estimate: counts.estimate(),
        std_error: counts.std_error(),
        trials,
        wall_time_s,
    }
}

fn exact_row(
    sweep: &[(String, Value)],
    name: &str,
    value: f64,
    trials: u64,
    wall_time_s: f64,
) -> ReportRow {
    ReportRow {
        sweep: sweep.to_vec(),
        metric: name.to_string(),
        estimate: value,
        std_error: 0.0,
        trials,
        wall_time_s,
    }
}

/// Closed-form error rate of the single-domain detector under uniform bits
/// at both ends: the average of the four per-case boundary tails. The joint
/// detector has no closed form here.
pub fn analytic_detection_ber(config: &LoopConfig, mode: DetectorMode) -> Option<f64> {
    let n = config.params.samples_per_bit();
    let tails = |thr: ThresholdSet, flipped: bool| -> Option<f64> {
        let v = thr.class_variances;
        let (g1, g2) = (thr.gamma1, thr.gamma2);
        // Own bit 0 compares on the Low/Mid boundary, own bit 1 on the
        // Mid/High boundary; each truth is equally likely.
        let err = if !flipped {
            bep_oracle(v.low, g1, n, DecisionSide::DecideAbove).ok()?
                + bep_oracle(v.mid, g1, n, DecisionSide::DecideBelow).ok()?
                + bep_oracle(v.mid, g2, n, DecisionSide::DecideAbove).ok()?
                + bep_oracle(v.high, g2, n, DecisionSide::DecideBelow).ok()?
        } else {
            bep_oracle(v.low, g1, n, DecisionSide::DecideBelow).ok()?
                + bep_oracle(v.mid, g1, n, DecisionSide::DecideAbove).ok()?
                + bep_oracle(v.mid, g2, n, DecisionSide::DecideBelow).ok()?
                + bep_oracle(v.high, g2, n, DecisionSide::DecideAbove).ok()?
        };
        Some(err / 4.0)
    };
    match mode {
        DetectorMode::VoltageOnly => tails(ThresholdSet::voltage_for(config).ok()?, false),
        DetectorMode::CurrentOnly => tails(ThresholdSet::current_for(config).ok()?, true),
        DetectorMode::Joint => None,
    }
}

fn run_point(
    kind_config: &KindConfig,
    sweep: &[(String, Value)],
    trials: u64,
    point_path: SeedPath,
) -> Result<Vec<ReportRow>, CliError> {
    let started = Instant::now();
    let rows = match kind_config {
        KindConfig::KljnBer { loop_config, mode } => {
            let thr_v = ThresholdSet::voltage_for(loop_config).map_err(CliError::from_core_run)?;
            let thr_i = ThresholdSet::current_for(loop_config).map_err(CliError::from_core_run)?;
            let per_trial: Vec<Counts> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let path = point_path.with_trial(t);
                    let mut rng = path.child(0).rng();
                    use rand::Rng;
                    let own: u8 = rng.gen_range(0..=1);
                    let partner: u8 = rng.gen_range(0..=1);
                    let bp = BitPair::new(own, partner).expect("bits are 0/1");
                    let trace = simulate_bit_interval(bp, loop_config, path.child(1))
                        .expect("validated config");
                    let est_v = estimate_variance(&trace.u_alice.samples).expect("non-empty");
                    let est_i = estimate_variance(&trace.current.samples).expect("non-empty");
                    let out = detect_partner_bit(
                        Some(est_v),
                        Some(est_i),
                        own,
                        Some(&thr_v),
                        Some(&thr_i),
                        *mode,
                    )
                    .expect("estimates match mode");
                    Counts {
                        num: u64::from(out.partner_bit != partner),
                        den: 1,
                    }
                })
                .collect();
            let mut ber = Counts::default();
            per_trial.into_iter().for_each(|c| ber.add(c));
            let wall = started.elapsed().as_secs_f64();
            let mut rows = vec![metric_row(sweep, "ber", ber, trials, wall)];
            if let Some(oracle) = analytic_detection_ber(loop_config, *mode) {
                rows.push(exact_row(sweep, "ber_oracle", oracle, trials, wall));
            }
            rows
        }
        KindConfig::KljnEve { loop_config } => {
            let per_trial: Vec<Counts> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let truth_is_10 = t % 2 == 1;
                    let bp = if truth_is_10 {
                        BitPair::new(1, 0)
                    } else {
                        BitPair::new(0, 1)
                    }
                    .expect("bits are 0/1");
                    let trace =
                        simulate_bit_interval(bp, loop_config, point_path.with_trial(t))
                            .expect("validated config");
                    let obs = EveObservation::from_trace(&trace).expect("aligned traces");
                    let verdict = mid_resolution_attack(&obs, loop_config).expect("mid class");
                    let hit = (verdict == MidResolution::Bits10) == truth_is_10;
                    Counts {
                        num: u64::from(hit),
                        den: 1,
                    }
                })
                .collect();
            let mut acc = Counts::default();
            per_trial.into_iter().for_each(|c| acc.add(c));
            let wall = started.elapsed().as_secs_f64();
            vec![metric_row(sweep, "eve_accuracy", acc, trials, wall)]
        }
        KindConfig::KljnKeygen { session } => {
            #[derive(Default, Clone, Copy)]
            struct SessionCounts {
                secure: Counts,
                agree: Counts,
                det_err: Counts,
                alarmed: Counts,
            }
            let per_trial: Vec<SessionCounts> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let result = run_session(session, point_path.with_trial(t))
                        .expect("validated config");
                    let n = session.n_bits as u64;
                    let kept = result.secure_mask.iter().filter(|&&m| m).count() as u64;
                    let mut alarmed_intervals: Vec<usize> =
                        result.alarms.iter().map(|a| a.bit_index).collect();
                    alarmed_intervals.dedup();
                    SessionCounts {
                        secure: Counts { num: kept, den: n },
                        agree: Counts {
                            num: u64::from(result.alice_key == result.bob_key),
                            den: 1,
                        },
                        det_err: Counts {
                            num: result.detection_errors as u64,
                            den: n,
                        },
                        alarmed: Counts {
                            num: alarmed_intervals.len() as u64,
                            den: n,
                        },
                    }
                })
                .collect();
            let mut total = SessionCounts::default();
            for c in per_trial {
                total.secure.add(c.secure);
                total.agree.add(c.agree);
                total.det_err.add(c.det_err);
                total.alarmed.add(c.alarmed);
            }
            let wall = started.elapsed().as_secs_f64();
            vec![
                metric_row(sweep, "secure_fraction", total.secure, trials, wall),
                metric_row(sweep, "key_agreement", total.agree, trials, wall),
                metric_row(sweep, "detection_error_rate", total.det_err, trials, wall),
                metric_row(sweep, "alarm_rate", total.alarmed, trials, wall),
            ]
        }
        KindConfig::Bb84 {
            n_slots,
            source,
            attack,
        } => {
            #[derive(Default, Clone, Copy)]
            struct QkdCounts {
                qber: Counts,
                sift: Counts,
                known: Counts,
            }
            let per_trial: Vec<QkdCounts> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let result = run_bb84(*n_slots, *source, *attack, point_path.with_trial(t))
                        .expect("validated config");
                    let sifted = result.sifted_key_alice.len() as u64;
                    let errors = result
                        .sifted_key_alice
                        .iter()
                        .zip(&result.sifted_key_bob)
                        .filter(|(a, b)| a != b)
                        .count() as u64;
                    let delivered = result
                        .records
                        .iter()
                        .filter(|r| r.photon_count >= 1)
                        .count() as u64;
                    let known = result.records.iter().filter(|r| r.eve_known).count() as u64;
                    QkdCounts {
                        qber: Counts {
                            num: errors,
                            den: sifted,
                        },
                        sift: Counts {
                            num: sifted,
                            den: *n_slots as u64,
                        },
                        known: Counts {
                            num: known,
                            den: delivered,
                        },
                    }
                })
                .collect();
            let mut total = QkdCounts::default();
            for c in per_trial {
                total.qber.add(c.qber);
                total.sift.add(c.sift);
                total.known.add(c.known);
            }
            let wall = started.elapsed().as_secs_f64();
            vec![
                metric_row(sweep, "qber", total.qber, trials, wall),
                metric_row(sweep, "sift_fraction", total.sift, trials, wall),
                metric_row(sweep, "eve_known_fraction", total.known, trials, wall),
            ]
        }
        KindConfig::Thermod { config, n_bits } => {
            let per_trial: Vec<Counts> = (0..trials)
                .into_par_iter()
                .map(|t| {
                    let path = point_path.with_trial(t);
                    let mut rng = path.child(0).rng();
                    use rand::Rng;
                    let bits: Vec<u8> = (0..*n_bits).map(|_| rng.gen_range(0..=1)).collect();
                    let frame = thermod_transmit(&bits, config, path.child(1))
                        .expect("validated config");
                    let decided = thermod_detect(&frame, config).expect("consistent frame");
                    let errors = decided
                        .iter()
                        .zip(&bits)
                        .filter(|(d, b)| d != b)
                        .count() as u64;
                    Counts {
                        num: errors,
                        den: *n_bits as u64,
                    }
                })
                .collect();
            let mut ber = Counts::default();
            per_trial.into_iter().for_each(|c| ber.add(c));
            let wall = started.elapsed().as_secs_f64();
            let oracle = thermod_ber_oracle(config).map_err(CliError::from_core_run)?;
            vec![
                metric_row(sweep, "ber", ber, trials, wall),
                exact_row(sweep, "ber_oracle", oracle, trials, wall),
            ]
        }
    };
    Ok(rows)
}

/// Executes every sweep point of a validated spec.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ReportRow>, CliError> {
    let points = expand_sweep(spec)?;
    let base = SeedPath::new(spec.master_seed, spec.kind.stream_id(), 0);
    let mut rows = Vec::new();
    for (index, point) in points.iter().enumerate() {
        let kind_config = build_kind_config(spec.kind, &point.config)?;
        let point_path = base.child(index as u64);
        rows.extend(run_point(
            &kind_config,
            &point.coordinates,
            spec.trials,
            point_path,
        )?);
    }
    Ok(rows)
}
