//! BB84 key distribution baseline, with ideal, intercept-resend, and
//! photon-number-splitting adversaries.
//!
//! Photons are classical records governed by the quantum measurement rules:
//! measuring in the preparation basis returns the encoded bit with
//! certainty, measuring in the other basis returns a uniform bit and leaves
//! the state as re-prepared by whoever measured. That is the entirety of
//! what the protocol's security rests on, so nothing more is simulated —
//! the channel is lossless and detectors are perfect except for empty
//! pulses.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::SeedPath;

/// Polarization basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// Horizontal/vertical.
    Rectilinear,
    /// ±45 degrees.
    Diagonal,
}

/// Photon source model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceModel {
    /// Exactly one photon per slot.
    IdealSingle,
    /// Weak coherent pulse: photon count per slot is Poisson-distributed.
    Poisson { mean_photons: f64 },
}

/// Channel adversary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attack {
    None,
    /// Eve measures every pulse in a random basis and resends her result.
    InterceptResend,
    /// Eve splits one photon off every multi-photon pulse and reads it
    /// after the bases are announced, never disturbing what Bob receives.
    PhotonNumberSplitting,
}

/// Everything recorded about one transmission slot. `photon_count` is the
/// count emitted by the source; `eve_known` marks slots whose bit Eve ends
/// up knowing with certainty once the bases become public.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhotonRecord {
    pub alice_bit: u8,
    pub alice_basis: Basis,
    pub photon_count: u32,
    pub bob_basis: Basis,
    pub bob_bit: Option<u8>,
    pub sifted: bool,
    pub eve_known: bool,
    pub eve_basis: Option<Basis>,
    pub eve_bit: Option<u8>,
}

/// Outcome of a protocol run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bb84Result {
    pub records: Vec<PhotonRecord>,
    pub sifted_key_alice: Vec<u8>,
    pub sifted_key_bob: Vec<u8>,
    /// Disagreement fraction on sifted positions (0 when nothing sifted).
    pub qber: f64,
    /// Sifted slots over all slots.
    pub sift_fraction: f64,
    /// Among slots that delivered at least one photon, the fraction whose
    /// bit Eve knows after basis announcement.
    pub eve_known_fraction: f64,
}

impl Bb84Result {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }
}

fn uniform_bit(rng: &mut ChaCha12Rng) -> u8 {
    rng.gen_range(0..=1)
}

fn uniform_basis(rng: &mut ChaCha12Rng) -> Basis {
    if rng.gen_range(0..=1) == 0 {
        Basis::Rectilinear
    } else {
        Basis::Diagonal
    }
}

/// Measures a photon prepared as `(bit, basis)` in `measure_basis`. Matching
/// bases read the encoded bit exactly; mismatched bases yield a uniformly
/// random result, and the photon's state collapses to whatever was read.
pub fn measure_photon(state: (u8, Basis), measure_basis: Basis, rng: &mut ChaCha12Rng) -> u8 {
    if state.1 == measure_basis {
        state.0
    } else {
        uniform_bit(rng)
    }
}

fn finalize(records: Vec<PhotonRecord>, n_slots: usize) -> Bb84Result {
    let mut sifted_key_alice = Vec::new();
    let mut sifted_key_bob = Vec::new();
    let mut errors = 0usize;
    let mut delivered = 0usize;
    let mut known = 0usize;
    for r in &records {
        if r.photon_count >= 1 {
            delivered += 1;
            known += usize::from(r.eve_known);
        }
        if r.sifted {
            let bob = r.bob_bit.expect("sifted slot must carry a detection");
            sifted_key_alice.push(r.alice_bit);
            sifted_key_bob.push(bob);
            errors += usize::from(bob != r.alice_bit);
        }
    }
    let sifted = sifted_key_alice.len();
    Bb84Result {
        qber: if sifted > 0 {
            errors as f64 / sifted as f64
        } else {
            0.0
        },
        sift_fraction: sifted as f64 / n_slots as f64,
        eve_known_fraction: if delivered > 0 {
            known as f64 / delivered as f64
        } else {
            0.0
        },
        records,
        sifted_key_alice,
        sifted_key_bob,
    }
}

/// Runs the protocol for `n_slots` transmissions. Deterministic under the
/// seed path; each slot consumes an independent derived stream, so a run
/// with the photon-number-splitting attack reuses exactly the randomness of
/// an unattacked run and differs only in Eve's bookkeeping.
pub fn run_bb84(
    n_slots: usize,
    source: SourceModel,
    attack: Attack,
    seed_path: SeedPath,
) -> Result<Bb84Result> {
    if n_slots == 0 {
        return Err(Error::domain("need at least one slot"));
    }
    if attack == Attack::PhotonNumberSplitting && matches!(source, SourceModel::IdealSingle) {
        return Err(Error::usage(
            "photon-number splitting requires a Poisson source",
        ));
    }
    let poisson = match source {
        SourceModel::IdealSingle => None,
        SourceModel::Poisson { mean_photons } => {
            if !(mean_photons.is_finite() && mean_photons > 0.0) {
                return Err(Error::domain(format!(
                    "mean photon number must be positive, got {mean_photons}"
                )));
            }
            Some(Poisson::new(mean_photons).map_err(|e| Error::domain(format!("{e}")))?)
        }
    };

    let mut records = Vec::with_capacity(n_slots);
    for slot in 0..n_slots {
        let mut rng = seed_path.child(slot as u64).rng();
        let alice_bit = uniform_bit(&mut rng);
        let alice_basis = uniform_basis(&mut rng);
        let photon_count = match &poisson {
            None => 1u32,
            Some(p) => p.sample(&mut rng) as u32,
        };

        let mut state = (alice_bit, alice_basis);
        let mut delivered_count = photon_count;
        let mut eve_known = false;
        let mut eve_basis = None;
        let mut eve_bit = None;

        if photon_count >= 1 {
            match attack {
                Attack::None => {}
                Attack::InterceptResend => {
                    let basis = uniform_basis(&mut rng);
                    let bit = measure_photon(state, basis, &mut rng);
                    state = (bit, basis);
                    // After the public basis discussion Eve learns whether
                    // her basis matched; those slots she knows for certain.
                    eve_known = basis == alice_basis;
                    eve_basis = Some(basis);
                    eve_bit = Some(bit);
                }
                Attack::PhotonNumberSplitting => {
                    if photon_count >= 2 {
                        delivered_count = photon_count - 1;
                        eve_known = true;
                    }
                }
            }
        }

        let bob_basis = uniform_basis(&mut rng);
        let bob_bit = if delivered_count >= 1 {
            Some(measure_photon(state, bob_basis, &mut rng))
        } else {
            None
        };
        let sifted = bob_bit.is_some() && alice_basis == bob_basis;
        records.push(PhotonRecord {
            alice_bit,
            alice_basis,
            photon_count,
            bob_basis,
            bob_bit,
            sifted,
            eve_known,
            eve_basis,
            eve_bit,
        });
    }
    Ok(finalize(records, n_slots))
}

/// Closed-form fraction of delivered pulses that leak to a
/// photon-number-splitting adversary: `P(n ≥ 2 | n ≥ 1)` for a Poisson
/// source with mean `mu`.
pub fn pns_known_fraction(mu: f64) -> Result<f64> {
    if !(mu.is_finite() && mu > 0.0) {
        return Err(Error::domain(format!("mu must be positive, got {mu}")));
    }
    let e = (-mu).exp();
    Ok((1.0 - e - mu * e) / (1.0 - e))
}

/// One line of a scripted exchange: pinned bit and bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptSlot {
    pub alice_bit: u8,
    pub alice_basis: Basis,
    pub bob_basis: Basis,
}

/// Parses a script file: one `bit,basis,basis` triple per line with bases
/// written `R` or `D`; blank lines and `#` comments are skipped.
pub fn parse_script(text: &str) -> Result<Vec<ScriptSlot>> {
    let basis = |s: &str, line: usize| match s.trim() {
        "R" | "r" => Ok(Basis::Rectilinear),
        "D" | "d" => Ok(Basis::Diagonal),
        other => Err(Error::config(format!("line {line}: unknown basis {other:?}"))),
    };
    let mut slots = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::config(format!(
                "line {}: expected bit,basis,basis",
                idx + 1
            )));
        }
        let bit: u8 = parts[0]
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("line {}: bad bit {:?}", idx + 1, parts[0])))?;
        if bit > 1 {
            return Err(Error::config(format!("line {}: bit must be 0 or 1", idx + 1)));
        }
        slots.push(ScriptSlot {
            alice_bit: bit,
            alice_basis: basis(parts[1], idx + 1)?,
            bob_basis: basis(parts[2], idx + 1)?,
        });
    }
    if slots.is_empty() {
        return Err(Error::config("script contains no slots"));
    }
    Ok(slots)
}

/// Runs the protocol with pinned bits and bases (ideal source, no attack).
/// Randomness is consumed only for Bob's mismatched-basis outcomes, which
/// never enter the sifted key.
pub fn run_bb84_scripted(script: &[ScriptSlot], seed_path: SeedPath) -> Result<Bb84Result> {
    if script.is_empty() {
        return Err(Error::domain("empty script"));
    }
    let mut records = Vec::with_capacity(script.len());
    for (slot, s) in script.iter().enumerate() {
        let mut rng = seed_path.child(slot as u64).rng();
        let bob_bit = measure_photon((s.alice_bit, s.alice_basis), s.bob_basis, &mut rng);
        records.push(PhotonRecord {
            alice_bit: s.alice_bit,
            alice_basis: s.alice_basis,
            photon_count: 1,
            bob_basis: s.bob_basis,
            bob_bit: Some(bob_bit),
            sifted: s.alice_basis == s.bob_basis,
            eve_known: false,
            eve_basis: None,
            eve_bit: None,
        });
    }
    Ok(finalize(records, script.len()))
}
