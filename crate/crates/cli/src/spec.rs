//! Experiment specification files: a single versioned JSON document that
//! names the experiment kind, its configuration, an optional parameter
//! sweep, the trial budget, and the master seed.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::CliError;
use noisekey_core::detection::DetectorMode;
use noisekey_core::kljn::{LoopConfig, ResistorPair};
use noisekey_core::noise::NoiseParams;
use noisekey_core::qkd::{Attack, SourceModel};
use noisekey_core::thermod::TherModConfig;

pub const SPEC_VERSION: u32 = 1;

/// Experiment families the runner knows how to drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    KljnBerSweep,
    KljnEve,
    KljnKeygen,
    Bb84Qber,
    ThermodBer,
}

impl ExperimentKind {
    /// Stable stream id for seed derivation, one per kind.
    pub fn stream_id(self) -> u64 {
        match self {
            ExperimentKind::KljnBerSweep => 10,
            ExperimentKind::KljnEve => 11,
            ExperimentKind::KljnKeygen => 12,
            ExperimentKind::Bb84Qber => 13,
            ExperimentKind::ThermodBer => 14,
        }
    }
}

/// Output format of a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSpec {
    pub path: String,
    pub format: ReportFormat,
}

/// One sweep axis: the dotted path of a config field and the values it
/// takes. Multiple axes expand to their cartesian product.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: String,
    pub values: Vec<Value>,
}

/// The experiment document as written on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub spec_version: u32,
    pub kind: ExperimentKind,
    pub config: Value,
    #[serde(default)]
    pub sweep: Vec<SweepAxis>,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

/// Digest over the canonicalized (sorted-key, compact) JSON form of the
/// spec, so any field change changes the hash.
pub fn spec_hash(spec: &ExperimentSpec) -> String {
    let value = serde_json::to_value(spec).expect("spec serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical_json(&value).as_bytes());
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            use std::fmt::Write;
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn canonical_json(value: &Value) -> String {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            let fields: Vec<String> = keys
                .into_iter()
                .map(|k| {
                    format!(
                        "{}:{}",
                        serde_json::to_string(k).unwrap(),
                        canonical_json(&map[k])
                    )
                })
                .collect();
            format!("{{{}}}", fields.join(","))
        }
        Value::Array(items) => {
            let parts: Vec<String> = items.iter().map(canonical_json).collect();
            format!("[{}]", parts.join(","))
        }
        other => serde_json::to_string(other).unwrap(),
    }
}

/// Follows a dotted path into a JSON tree, mutably.
fn lookup_path<'a>(root: &'a mut Value, path: &str) -> Option<&'a mut Value> {
    let mut node = root;
    for part in path.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(part)?,
            Value::Array(items) => items.get_mut(part.parse::<usize>().ok()?)?,
            _ => return None,
        };
    }
    Some(node)
}

/// One point of the expanded sweep: the overridden config blob plus the
/// axis values that produced it.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub config: Value,
    pub coordinates: Vec<(String, Value)>,
}

/// Expands the sweep axes into the cartesian product of config blobs.
/// Fails if any axis names a field that does not exist in the config.
pub fn expand_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepPoint>, CliError> {
    for axis in &spec.sweep {
        let mut probe = spec.config.clone();
        if lookup_path(&mut probe, &axis.param).is_none() {
            return Err(CliError::config(format!(
                "sweep parameter {:?} does not name a config field",
                axis.param
            )));
        }
        if axis.values.is_empty() {
            return Err(CliError::config(format!(
                "sweep parameter {:?} has no values",
                axis.param
            )));
        }
    }
    let mut points = vec![SweepPoint {
        config: spec.config.clone(),
        coordinates: Vec::new(),
    }];
    for axis in &spec.sweep {
        let mut expanded = Vec::with_capacity(points.len() * axis.values.len());
        for point in &points {
            for v in &axis.values {
                let mut config = point.config.clone();
                *lookup_path(&mut config, &axis.param).expect("probed above") = v.clone();
                let mut coordinates = point.coordinates.clone();
                coordinates.push((axis.param.clone(), v.clone()));
                expanded.push(SweepPoint {
                    config,
                    coordinates,
                });
            }
        }
        points = expanded;
    }
    Ok(points)
}

// Per-kind configuration blobs.

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResistorsCfg {
    pub r_low_ohm: f64,
    pub r_high_ohm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseCfg {
    pub temperature_kelvin: f64,
    pub bandwidth_hz: f64,
    pub bit_duration_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KljnLinkCfg {
    pub resistors: ResistorsCfg,
    pub noise: NoiseCfg,
    #[serde(default)]
    pub wire_resistance_ohm: f64,
    #[serde(default)]
    pub eve_tap_position: f64,
}

impl KljnLinkCfg {
    pub fn build(&self) -> Result<LoopConfig, CliError> {
        let resistors = ResistorPair::new(self.resistors.r_low_ohm, self.resistors.r_high_ohm)
            .map_err(CliError::from_core_config)?;
        let params = NoiseParams::new(
            self.noise.temperature_kelvin,
            self.noise.bandwidth_hz,
            self.noise.bit_duration_s,
        )
        .map_err(CliError::from_core_config)?;
        LoopConfig::new(
            resistors,
            params,
            self.wire_resistance_ohm,
            self.eve_tap_position,
        )
        .map_err(CliError::from_core_config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorModeCfg {
    VoltageOnly,
    CurrentOnly,
    Joint,
}

impl From<DetectorModeCfg> for DetectorMode {
    fn from(m: DetectorModeCfg) -> Self {
        match m {
            DetectorModeCfg::VoltageOnly => DetectorMode::VoltageOnly,
            DetectorModeCfg::CurrentOnly => DetectorMode::CurrentOnly,
            DetectorModeCfg::Joint => DetectorMode::Joint,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KljnBerCfg {
    #[serde(flatten)]
    pub link: KljnLinkCfg,
    pub detector_mode: DetectorModeCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KljnEveCfg {
    #[serde(flatten)]
    pub link: KljnLinkCfg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KljnKeygenCfg {
    #[serde(flatten)]
    pub link: KljnLinkCfg,
    pub n_bits: usize,
    pub detector_mode: DetectorModeCfg,
    /// Defaults to the wire-EMF-derived tolerance when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrity_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bb84Cfg {
    pub n_slots: usize,
    pub source: SourceModel,
    pub attack: Attack,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThermodCfg {
    pub noise: NoiseCfg,
    pub r_bit0_ohm: f64,
    pub r_bit1_ohm: f64,
    pub channel_gain: f64,
    pub rx_noise_var: f64,
    /// Defaults to the likelihood-crossing threshold when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    pub n_bits: usize,
}

impl ThermodCfg {
    pub fn build(&self) -> Result<TherModConfig, CliError> {
        let params = NoiseParams::new(
            self.noise.temperature_kelvin,
            self.noise.bandwidth_hz,
            self.noise.bit_duration_s,
        )
        .map_err(CliError::from_core_config)?;
        let threshold = match self.threshold {
            Some(t) => t,
            None => TherModConfig::default_threshold(
                params,
                self.r_bit0_ohm,
                self.r_bit1_ohm,
                self.channel_gain,
                self.rx_noise_var,
            )
            .map_err(CliError::from_core_config)?,
        };
        TherModConfig::new(
            params,
            self.r_bit0_ohm,
            self.r_bit1_ohm,
            self.channel_gain,
            self.rx_noise_var,
            threshold,
        )
        .map_err(CliError::from_core_config)
    }
}

/// Parses and structurally validates a spec document.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec, CliError> {
    let spec: ExperimentSpec = serde_json::from_str(text)
        .map_err(|e| CliError::config(format!("spec does not parse: {e}")))?;
    if spec.spec_version != SPEC_VERSION {
        return Err(CliError::config(format!(
            "unsupported spec_version {} (expected {SPEC_VERSION})",
            spec.spec_version
        )));
    }
    if spec.trials == 0 {
        return Err(CliError::config("trials must be >= 1"));
    }
    validate_config_points(&spec)?;
    Ok(spec)
}

/// Deserializes the config blob at every sweep point so bad values surface
/// before any work starts.
pub fn validate_config_points(spec: &ExperimentSpec) -> Result<(), CliError> {
    for point in expand_sweep(spec)? {
        build_kind_config(spec.kind, &point.config)?;
    }
    Ok(())
}

/// A fully built, kind-specific configuration.
#[derive(Debug, Clone)]
pub enum KindConfig {
    KljnBer {
        loop_config: LoopConfig,
        mode: DetectorMode,
    },
    KljnEve {
        loop_config: LoopConfig,
    },
    KljnKeygen {
        session: noisekey_core::protocol::SessionConfig,
    },
    Bb84 {
        n_slots: usize,
        source: SourceModel,
        attack: Attack,
    },
    Thermod {
        config: TherModConfig,
        n_bits: usize,
    },
}

pub fn build_kind_config(kind: ExperimentKind, blob: &Value) -> Result<KindConfig, CliError> {
    let parse = |what: &str, e: serde_json::Error| {
        CliError::config(format!("bad {what} config: {e}"))
    };
    Ok(match kind {
        ExperimentKind::KljnBerSweep => {
            let cfg: KljnBerCfg =
                serde_json::from_value(blob.clone()).map_err(|e| parse("kljn_ber_sweep", e))?;
            KindConfig::KljnBer {
                loop_config: cfg.link.build()?,
                mode: cfg.detector_mode.into(),
            }
        }
        ExperimentKind::KljnEve => {
            let cfg: KljnEveCfg =
                serde_json::from_value(blob.clone()).map_err(|e| parse("kljn_eve", e))?;
            KindConfig::KljnEve {
                loop_config: cfg.link.build()?,
            }
        }
        ExperimentKind::KljnKeygen => {
            let cfg: KljnKeygenCfg =
                serde_json::from_value(blob.clone()).map_err(|e| parse("kljn_keygen", e))?;
            let loop_config = cfg.link.build()?;
            let tolerance = cfg
                .integrity_tolerance
                .unwrap_or_else(|| noisekey_core::protocol::default_integrity_tolerance(&loop_config));
            let session = noisekey_core::protocol::SessionConfig::new(
                loop_config,
                cfg.n_bits,
                cfg.detector_mode.into(),
                tolerance,
            )
            .map_err(CliError::from_core_config)?;
            KindConfig::KljnKeygen { session }
        }
        ExperimentKind::Bb84Qber => {
            let cfg: Bb84Cfg =
                serde_json::from_value(blob.clone()).map_err(|e| parse("bb84_qber", e))?;
            if cfg.n_slots == 0 {
                return Err(CliError::config("n_slots must be >= 1"));
            }
            if cfg.attack == Attack::PhotonNumberSplitting
                && matches!(cfg.source, SourceModel::IdealSingle)
            {
                return Err(CliError::config(
                    "photon-number splitting requires a poisson source",
                ));
            }
            KindConfig::Bb84 {
                n_slots: cfg.n_slots,
                source: cfg.source,
                attack: cfg.attack,
            }
        }
        ExperimentKind::ThermodBer => {
            let cfg: ThermodCfg =
                serde_json::from_value(blob.clone()).map_err(|e| parse("thermod_ber", e))?;
            if cfg.n_bits == 0 {
                return Err(CliError::config("n_bits must be >= 1"));
            }
            KindConfig::Thermod {
                config: cfg.build()?,
                n_bits: cfg.n_bits,
            }
        }
    })
}
