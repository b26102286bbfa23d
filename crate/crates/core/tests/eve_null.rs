//! The indistinguishability null on an ideal line: no deterministic
//! function of Eve's observation separates the two Mid bit pairs, because
//! their joint observation distributions are identical when the wire has no
//! resistance.

use noisekey_core::adversary::{mid_resolution_attack, EveObservation, MidResolution};
use noisekey_core::kljn::{simulate_bit_interval, BitPair, LoopConfig, ResistorPair};
use noisekey_core::noise::NoiseParams;
use noisekey_core::seed::{streams, SeedPath};
use rayon::prelude::*;

fn ideal_config(n_samples: usize) -> LoopConfig {
    LoopConfig::ideal(
        ResistorPair::new(1000.0, 10_000.0).unwrap(),
        NoiseParams::new(300.0, 1000.0, n_samples as f64 / 2000.0).unwrap(),
    )
}

/// Runs one classifier against alternating 01/10 truths and returns its
/// accuracy over the given trials.
fn accuracy_of(
    classifier: impl Fn(&EveObservation, &LoopConfig) -> bool + Sync,
    cfg: &LoopConfig,
    trials: u64,
    seed: u64,
) -> f64 {
    let hits: u64 = (0..trials)
        .into_par_iter()
        .map(|t| {
            let truth_is_10 = t % 2 == 1;
            let bp = if truth_is_10 {
                BitPair::new(1, 0).unwrap()
            } else {
                BitPair::new(0, 1).unwrap()
            };
            let trace =
                simulate_bit_interval(bp, cfg, SeedPath::new(seed, streams::KLJN_LOOP, t))
                    .unwrap();
            let obs = EveObservation::from_trace(&trace).unwrap();
            u64::from(classifier(&obs, cfg) == truth_is_10)
        })
        .sum();
    hits as f64 / trials as f64
}

#[test]
fn no_classifier_beats_chance_on_ideal_line() {
    let trials = 10_000u64;
    let bound = 3.0 * (0.25 / trials as f64).sqrt();
    let cfg = ideal_config(64);

    let variance_threshold = |obs: &EveObservation, cfg: &LoopConfig| {
        mid_resolution_attack(obs, cfg).unwrap() == MidResolution::Bits10
    };
    let sign_of_first_sample =
        |obs: &EveObservation, _: &LoopConfig| obs.u_eve.samples[0] > 0.0;
    // an arbitrary fixed classifier mixing both observables
    let fixed_mixture = |obs: &EveObservation, _: &LoopConfig| {
        obs.u_eve.samples[1].abs() > obs.u_eve.samples[2].abs()
            && obs.current.samples[0] < 0.0
            || obs.current.samples[3] > obs.current.samples[4]
    };

    for (name, acc) in [
        ("variance-threshold", accuracy_of(variance_threshold, &cfg, trials, 5001)),
        ("sign-of-first-sample", accuracy_of(sign_of_first_sample, &cfg, trials, 5002)),
        ("fixed-mixture", accuracy_of(fixed_mixture, &cfg, trials, 5003)),
    ] {
        assert!(
            (acc - 0.5).abs() < bound,
            "{name}: accuracy {acc} escapes the chance band ±{bound}"
        );
    }
}

#[test]
fn extra_samples_do_not_help_on_ideal_line() {
    // Accuracy of the variance attack at N = 16 and N = 256 must be
    // statistically indistinguishable (two-proportion z-test at the 1%
    // level, critical value 2.576).
    let trials = 10_000u64;
    let classify = |obs: &EveObservation, cfg: &LoopConfig| {
        mid_resolution_attack(obs, cfg).unwrap() == MidResolution::Bits10
    };
    let acc_small = accuracy_of(classify, &ideal_config(16), trials, 5004);
    let acc_large = accuracy_of(classify, &ideal_config(256), trials, 5005);
    let pooled = 0.5 * (acc_small + acc_large);
    let se = (pooled * (1.0 - pooled) * 2.0 / trials as f64).sqrt();
    let z = (acc_small - acc_large).abs() / se;
    assert!(z < 2.576, "z = {z} for accuracies {acc_small} vs {acc_large}");
}
