//! Experiment configuration and the end-to-end runs: phase scans,
//! Hanbury Brown–Twiss correlations and the combined duality check.
//!
//! A config is a TOML file. Every key is optional; missing values come from
//! the versioned defaults in [`defaults`].
//!
//! ```toml
//! defaults = "v1"
//! netlist = "chip.lo"        # relative to the config file; bundled chip if absent
//! input = "a"
//! seed = 7
//! duration_ns = 1.0e7
//! phase_param = "phi"
//! phase = 0.0
//!
//! [params]                   # any other phase parameters, radians
//! [eta_override]             # element index -> reflectivity
//! "0" = 0.47
//!
//! [emitter]
//! lifetime_ns = 4.0
//! pump_rate_per_ns = 0.0966
//!
//! [channel]
//! chip_transmission = 0.6
//! [channel.detector]         # applied to every detector
//! jitter_sigma_ns = 0.5
//! [channel.detectors.h]      # per-detector overrides
//! dark_rate_per_ns = 2e-7
//!
//! [fringe]
//! points = 32                # or: phis = [0.0, 0.1, ...]
//!
//! [histogram]
//! bin_width_ns = 0.25
//! max_tau_ns = 20.0
//! normalization = "poisson"  # or "plateau" with plateau_min_tau_ns
//!
//! [hbt]
//! pair = ["e", "f"]
//!
//! [duality]
//! pair = ["h", "f"]
//! suppressed = "g"
//! reference = "h"
//! phase = 0.0
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Deserialize;
use thiserror::Error;

use crate::analysis::{cross_correlate_with, CorrelationHistogram, FringeResult, Normalization};
use crate::circuit::{output_distribution, OutputDistribution, UNITARY_TOL};
use crate::detection::{click_rate, propagate, ChannelParams, DetectorParams, DetectorRecord};
use crate::emitter::{emit_stream, EmissionStream, EmitterParams};
use crate::netlist::{
    elaborate, parse_netlist, CircuitSpec, Element, NetlistError, ParamBinding, CHIP_NETLIST,
};
use crate::rng::derive_seed;

/// Calibration choices used when a config leaves a value out.
pub mod defaults {
    pub const VERSION: &str = "v1";
    pub const SEED: u64 = 1;
    /// 100 ms of acquisition.
    pub const DURATION_NS: f64 = 1e8;
    pub const INPUT: &str = "a";
    pub const PHASE_PARAM: &str = "phi";
    pub const SOURCE_TO_CHIP_EFFICIENCY: f64 = 1.0;
    /// Typical waveguide transmission.
    pub const CHIP_TRANSMISSION: f64 = 0.6;
    /// Brings the detected rate to about 1e5 counts/s with the calibrated
    /// emitter and the default transmission, where a 50 ns dead time is a
    /// percent-level correction.
    pub const COLLECTION_EFFICIENCY: f64 = 2.4e-3;
    pub const FRINGE_POINTS: usize = 32;
    pub const BIN_WIDTH_NS: f64 = 0.25;
    pub const MAX_TAU_NS: f64 = 20.0;
    pub const HBT_PAIR: [&str; 2] = ["e", "f"];
    pub const DUALITY_PAIR: [&str; 2] = ["h", "f"];
    pub const DUALITY_SUPPRESSED: &str = "g";
    pub const DUALITY_REFERENCE: &str = "h";
    pub const DUALITY_PHASE: f64 = 0.0;
    // Lifetime, pump rate and detector defaults live in
    // `EmitterParams::default()` and `DetectorParams::default()`.
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {error}")]
    Netlist { path: String, error: NetlistError },
    #[error("model error: {0}")]
    Model(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl ExperimentError {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Io(_) => 2,
            ExperimentError::Netlist { .. } => 3,
            ExperimentError::Model(_) => 4,
        }
    }
}

fn config_err(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

fn model_err(e: impl std::fmt::Display) -> ExperimentError {
    ExperimentError::Model(e.to_string())
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetlistSource {
    Bundled,
    File(PathBuf),
    Inline(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub source_to_chip_efficiency: f64,
    pub chip_transmission: f64,
    pub detector: DetectorParams,
    pub per_detector: BTreeMap<String, DetectorParams>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            source_to_chip_efficiency: defaults::SOURCE_TO_CHIP_EFFICIENCY,
            chip_transmission: defaults::CHIP_TRANSMISSION,
            detector: DetectorParams::default(),
            per_detector: BTreeMap::new(),
        }
    }
}

impl ChannelConfig {
    /// Lossless detectors without jitter, dark counts or dead time.
    pub fn ideal() -> Self {
        Self {
            source_to_chip_efficiency: 1.0,
            chip_transmission: 1.0,
            detector: DetectorParams::ideal(),
            per_detector: BTreeMap::new(),
        }
    }

    pub fn for_outputs(&self, labels: &[String]) -> ChannelParams {
        ChannelParams {
            source_to_chip_efficiency: self.source_to_chip_efficiency,
            chip_transmission: self.chip_transmission,
            detectors: labels
                .iter()
                .map(|l| *self.per_detector.get(l).unwrap_or(&self.detector))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSettings {
    pub bin_width_ns: f64,
    pub max_tau_ns: f64,
    pub normalization: Normalization,
}

impl Default for HistogramSettings {
    fn default() -> Self {
        Self {
            bin_width_ns: defaults::BIN_WIDTH_NS,
            max_tau_ns: defaults::MAX_TAU_NS,
            normalization: Normalization::Poisson,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualitySettings {
    pub pair: (String, String),
    pub suppressed: String,
    pub reference: String,
    pub phase: f64,
}

impl Default for DualitySettings {
    fn default() -> Self {
        Self {
            pair: (
                defaults::DUALITY_PAIR[0].to_string(),
                defaults::DUALITY_PAIR[1].to_string(),
            ),
            suppressed: defaults::DUALITY_SUPPRESSED.to_string(),
            reference: defaults::DUALITY_REFERENCE.to_string(),
            phase: defaults::DUALITY_PHASE,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub netlist: NetlistSource,
    pub input: String,
    pub seed: u64,
    pub duration_ns: f64,
    /// Parameter varied by the fringe scan and fixed by the duality check.
    pub phase_param: String,
    /// Working value of `phase_param` for single-setting runs.
    pub phase: f64,
    pub params: BTreeMap<String, f64>,
    /// Element index → replacement coupler reflectivity.
    pub eta_overrides: BTreeMap<usize, f64>,
    pub emitter: EmitterParams,
    pub channel: ChannelConfig,
    pub fringe_phis: Vec<f64>,
    pub histogram: HistogramSettings,
    pub hbt_pair: (String, String),
    pub duality: DualitySettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            netlist: NetlistSource::Bundled,
            input: defaults::INPUT.to_string(),
            seed: defaults::SEED,
            duration_ns: defaults::DURATION_NS,
            phase_param: defaults::PHASE_PARAM.to_string(),
            phase: 0.0,
            params: BTreeMap::new(),
            eta_overrides: BTreeMap::new(),
            emitter: EmitterParams {
                collection_efficiency: defaults::COLLECTION_EFFICIENCY,
                ..EmitterParams::default()
            },
            channel: ChannelConfig::default(),
            fringe_phis: uniform_phases(defaults::FRINGE_POINTS),
            histogram: HistogramSettings::default(),
            hbt_pair: (
                defaults::HBT_PAIR[0].to_string(),
                defaults::HBT_PAIR[1].to_string(),
            ),
            duality: DualitySettings::default(),
        }
    }
}

/// `n` evenly spaced phases on `[0, 2π)`.
pub fn uniform_phases(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * 2.0 * PI / n as f64).collect()
}

// On-disk layout. Everything is optional and filled from defaults.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    defaults: Option<String>,
    netlist: Option<String>,
    input: Option<String>,
    seed: Option<u64>,
    duration_ns: Option<f64>,
    phase_param: Option<String>,
    phase: Option<f64>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default)]
    eta_override: BTreeMap<String, f64>,
    emitter: Option<EmitterSection>,
    channel: Option<ChannelSection>,
    fringe: Option<FringeSection>,
    histogram: Option<HistogramSection>,
    hbt: Option<HbtSection>,
    duality: Option<DualitySection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmitterSection {
    lifetime_ns: Option<f64>,
    pump_rate_per_ns: Option<f64>,
    blink_on_rate_per_ns: Option<f64>,
    blink_off_rate_per_ns: Option<f64>,
    collection_efficiency: Option<f64>,
}

#[derive(Debug, Default, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectorSection {
    efficiency: Option<f64>,
    jitter_sigma_ns: Option<f64>,
    dark_rate_per_ns: Option<f64>,
    dead_time_ns: Option<f64>,
}

impl DetectorSection {
    fn apply(&self, base: DetectorParams) -> DetectorParams {
        DetectorParams {
            efficiency: self.efficiency.unwrap_or(base.efficiency),
            jitter_sigma_ns: self.jitter_sigma_ns.unwrap_or(base.jitter_sigma_ns),
            dark_rate_per_ns: self.dark_rate_per_ns.unwrap_or(base.dark_rate_per_ns),
            dead_time_ns: self.dead_time_ns.unwrap_or(base.dead_time_ns),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSection {
    source_to_chip_efficiency: Option<f64>,
    chip_transmission: Option<f64>,
    detector: Option<DetectorSection>,
    #[serde(default)]
    detectors: BTreeMap<String, DetectorSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FringeSection {
    points: Option<usize>,
    phis: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HistogramSection {
    bin_width_ns: Option<f64>,
    max_tau_ns: Option<f64>,
    normalization: Option<String>,
    plateau_min_tau_ns: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct HbtSection {
    pair: Option<[String; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DualitySection {
    pair: Option<[String; 2]>,
    suppressed: Option<String>,
    reference: Option<String>,
    phase: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text, path.parent()).map_err(|e| match e {
            ExperimentError::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses a config; relative netlist paths resolve against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self, ExperimentError> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let mut cfg = ExperimentConfig::default();

        if let Some(v) = file.defaults {
            if v != defaults::VERSION {
                return Err(config_err(format!(
                    "unknown defaults version '{v}' (supported: {})",
                    defaults::VERSION
                )));
            }
        }
        if let Some(n) = file.netlist {
            let p = PathBuf::from(n);
            cfg.netlist = NetlistSource::File(match base_dir {
                Some(dir) if p.is_relative() => dir.join(p),
                _ => p,
            });
        }
        if let Some(v) = file.input {
            cfg.input = v;
        }
        if let Some(v) = file.seed {
            cfg.seed = v;
        }
        if let Some(v) = file.duration_ns {
            cfg.duration_ns = v;
        }
        if let Some(v) = file.phase_param {
            cfg.phase_param = v;
        }
        if let Some(v) = file.phase {
            cfg.phase = v;
        }
        cfg.params = file.params;
        for (k, eta) in file.eta_override {
            let idx: usize = k.parse().map_err(|_| {
                config_err(format!("eta_override key '{k}' is not an element index"))
            })?;
            cfg.eta_overrides.insert(idx, eta);
        }
        if let Some(e) = file.emitter {
            let d = cfg.emitter;
            cfg.emitter = EmitterParams {
                lifetime_ns: e.lifetime_ns.unwrap_or(d.lifetime_ns),
                pump_rate_per_ns: e.pump_rate_per_ns.unwrap_or(d.pump_rate_per_ns),
                blink_on_rate_per_ns: e.blink_on_rate_per_ns.unwrap_or(d.blink_on_rate_per_ns),
                blink_off_rate_per_ns: e.blink_off_rate_per_ns.unwrap_or(d.blink_off_rate_per_ns),
                collection_efficiency: e.collection_efficiency.unwrap_or(d.collection_efficiency),
            };
        }
        if let Some(c) = file.channel {
            if let Some(v) = c.source_to_chip_efficiency {
                cfg.channel.source_to_chip_efficiency = v;
            }
            if let Some(v) = c.chip_transmission {
                cfg.channel.chip_transmission = v;
            }
            if let Some(d) = c.detector {
                cfg.channel.detector = d.apply(cfg.channel.detector);
            }
            for (label, d) in c.detectors {
                let params = d.apply(cfg.channel.detector);
                cfg.channel.per_detector.insert(label, params);
            }
        }
        if let Some(f) = file.fringe {
            match (f.points, f.phis) {
                (Some(_), Some(_)) => {
                    return Err(config_err(
                        "[fringe] takes either 'points' or 'phis', not both",
                    ))
                }
                (Some(n), None) => cfg.fringe_phis = uniform_phases(n),
                (None, Some(p)) => cfg.fringe_phis = p,
                (None, None) => {}
            }
        }
        if let Some(h) = file.histogram {
            if let Some(v) = h.bin_width_ns {
                cfg.histogram.bin_width_ns = v;
            }
            if let Some(v) = h.max_tau_ns {
                cfg.histogram.max_tau_ns = v;
            }
            cfg.histogram.normalization = match h.normalization.as_deref() {
                None | Some("poisson") => Normalization::Poisson,
                Some("plateau") => Normalization::Plateau {
                    min_abs_tau_ns: h
                        .plateau_min_tau_ns
                        .unwrap_or(0.75 * cfg.histogram.max_tau_ns),
                },
                Some(other) => {
                    return Err(config_err(format!(
                        "unknown normalization '{other}' (poisson | plateau)"
                    )))
                }
            };
        }
        if let Some([a, b]) = file.hbt.and_then(|h| h.pair) {
            cfg.hbt_pair = (a, b);
        }
        if let Some(d) = file.duality {
            if let Some([a, b]) = d.pair {
                cfg.duality.pair = (a, b);
            }
            if let Some(v) = d.suppressed {
                cfg.duality.suppressed = v;
            }
            if let Some(v) = d.reference {
                cfg.duality.reference = v;
            }
            if let Some(v) = d.phase {
                cfg.duality.phase = v;
            }
        }
        Ok(cfg)
    }

    fn netlist_name(&self) -> String {
        match &self.netlist {
            NetlistSource::Bundled => "<bundled chip.lo>".into(),
            NetlistSource::File(p) => p.display().to_string(),
            NetlistSource::Inline(_) => "<inline netlist>".into(),
        }
    }

    /// Reads and parses the netlist, then applies the reflectivity overrides.
    pub fn load_circuit(&self) -> Result<CircuitSpec, ExperimentError> {
        let text = match &self.netlist {
            NetlistSource::Bundled => CHIP_NETLIST.to_string(),
            NetlistSource::Inline(t) => t.clone(),
            NetlistSource::File(p) => std::fs::read_to_string(p)
                .map_err(|e| config_err(format!("cannot read netlist {}: {e}", p.display())))?,
        };
        let mut spec = parse_netlist(&text).map_err(|error| ExperimentError::Netlist {
            path: self.netlist_name(),
            error,
        })?;
        for (&idx, &eta) in &self.eta_overrides {
            match spec.elements.get_mut(idx) {
                Some(Element::Coupler { eta: slot, .. }) => {
                    if !(0.0..=1.0).contains(&eta) {
                        return Err(config_err(format!(
                            "eta_override for element {idx}: {eta} outside [0, 1]"
                        )));
                    }
                    *slot = eta;
                }
                _ => {
                    return Err(config_err(format!(
                        "eta_override: element {idx} is not a coupler"
                    )))
                }
            }
        }
        Ok(spec)
    }

    fn binding(&self, spec: &CircuitSpec, phase: f64) -> ParamBinding {
        let mut b = ParamBinding(self.params.clone());
        if spec.phase_params.contains(&self.phase_param) {
            b.set(&self.phase_param, phase);
        }
        b
    }

    fn check_output(&self, spec: &CircuitSpec, label: &str) -> Result<usize, ExperimentError> {
        spec.output_mode(label).ok_or_else(|| {
            config_err(format!(
                "unknown detector '{label}' (outputs: {})",
                spec.outputs().join(", ")
            ))
        })
    }

    fn check_pair(
        &self,
        spec: &CircuitSpec,
        pair: &(String, String),
    ) -> Result<(usize, usize), ExperimentError> {
        if pair.0 == pair.1 {
            return Err(config_err(format!("detector pair uses '{}' twice", pair.0)));
        }
        Ok((
            self.check_output(spec, &pair.0)?,
            self.check_output(spec, &pair.1)?,
        ))
    }

    fn check_common(&self, spec: &CircuitSpec) -> Result<usize, ExperimentError> {
        // Physically invalid parameters are model errors; the config itself
        // was well-formed.
        self.emitter.validate().map_err(model_err)?;
        if !(self.duration_ns > 0.0 && self.duration_ns.is_finite()) {
            return Err(model_err(format!(
                "duration_ns must be positive, got {}",
                self.duration_ns
            )));
        }
        self.channel
            .for_outputs(&spec.outputs())
            .validate()
            .map_err(model_err)?;
        for label in self.channel.per_detector.keys() {
            self.check_output(spec, label)?;
        }
        CorrelationHistogram::empty(self.histogram.bin_width_ns, self.histogram.max_tau_ns)
            .map_err(|e| config_err(e.to_string()))?;
        spec.input_mode(&self.input).ok_or_else(|| {
            config_err(format!(
                "unknown input '{}' (inputs: {})",
                self.input,
                spec.inputs().join(", ")
            ))
        })
    }
}

struct Prepared {
    spec: CircuitSpec,
    input: usize,
    labels: Vec<String>,
    channel: ChannelParams,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, ExperimentError> {
    let spec = cfg.load_circuit()?;
    let input = cfg.check_common(&spec)?;
    let labels = spec.outputs();
    let channel = cfg.channel.for_outputs(&labels);
    Ok(Prepared {
        spec,
        input,
        labels,
        channel,
    })
}

impl Prepared {
    fn distribution(&self, binding: &ParamBinding) -> Result<OutputDistribution, ExperimentError> {
        let u = elaborate(&self.spec, binding).map_err(|e| match e {
            NetlistError::Binding(m) => config_err(m),
            other => model_err(other),
        })?;
        output_distribution(&u, self.input).map_err(model_err)
    }

    fn simulate(
        &self,
        cfg: &ExperimentConfig,
        binding: &ParamBinding,
        seed: u64,
    ) -> Result<(EmissionStream, Vec<DetectorRecord>), ExperimentError> {
        let dist = self.distribution(binding)?;
        let emissions =
            emit_stream(&cfg.emitter, cfg.duration_ns, derive_seed(seed, 0)).map_err(model_err)?;
        let records = propagate(
            &emissions,
            &dist,
            &self.labels,
            &self.channel,
            derive_seed(seed, 1),
        )
        .map_err(model_err)?;
        Ok((emissions, records))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeOutcome {
    pub result: FringeResult,
    pub emissions_per_point: Vec<usize>,
}

pub fn run_fringe(cfg: &ExperimentConfig) -> Result<FringeOutcome, ExperimentError> {
    let prep = prepare(cfg)?;
    if cfg.fringe_phis.is_empty() {
        return Err(config_err("fringe phase grid is empty"));
    }
    if !prep.spec.phase_params.contains(&cfg.phase_param) {
        return Err(config_err(format!(
            "netlist has no phase parameter '{}' to scan",
            cfg.phase_param
        )));
    }
    let points: Vec<(usize, Vec<f64>)> = cfg
        .fringe_phis
        .par_iter()
        .enumerate()
        .map(|(i, &phi)| {
            let binding = cfg.binding(&prep.spec, phi);
            let (em, recs) = prep.simulate(cfg, &binding, derive_seed(cfg.seed, i as u64))?;
            Ok((em.len(), click_rate(&recs, cfg.duration_ns)))
        })
        .collect::<Result<_, ExperimentError>>()?;

    let rates = (0..prep.labels.len())
        .map(|d| points.iter().map(|(_, r)| r[d]).collect())
        .collect();
    Ok(FringeOutcome {
        result: FringeResult::from_rates(cfg.fringe_phis.clone(), prep.labels.clone(), rates),
        emissions_per_point: points.iter().map(|(n, _)| *n).collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HbtOutcome {
    pub pair: (String, String),
    pub histogram: CorrelationHistogram,
    pub labels: Vec<String>,
    pub rates: Vec<f64>,
    pub emissions: usize,
    /// Detectors of the pair that recorded no clicks.
    pub empty_detectors: Vec<String>,
}

impl HbtOutcome {
    pub fn rate(&self, label: &str) -> Option<f64> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.rates[i])
    }
}

fn correlate_pair(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    pair: &(String, String),
    phase: f64,
) -> Result<HbtOutcome, ExperimentError> {
    let (ia, ib) = cfg.check_pair(&prep.spec, pair)?;
    let binding = cfg.binding(&prep.spec, phase);
    let (em, recs) = prep.simulate(cfg, &binding, cfg.seed)?;
    let histogram = cross_correlate_with(
        &recs[ia],
        &recs[ib],
        cfg.histogram.bin_width_ns,
        cfg.histogram.max_tau_ns,
        cfg.histogram.normalization,
    )
    .map_err(model_err)?;
    let empty_detectors = [ia, ib]
        .iter()
        .filter(|&&i| recs[i].is_empty())
        .map(|&i| prep.labels[i].clone())
        .collect();
    Ok(HbtOutcome {
        pair: pair.clone(),
        histogram,
        labels: prep.labels.clone(),
        rates: click_rate(&recs, cfg.duration_ns),
        emissions: em.len(),
        empty_detectors,
    })
}

/// Correlates the configured detector pair at the working phase.
pub fn run_hbt(cfg: &ExperimentConfig) -> Result<HbtOutcome, ExperimentError> {
    let prep = prepare(cfg)?;
    correlate_pair(cfg, &prep, &cfg.hbt_pair, cfg.phase)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityOutcome {
    pub hbt: HbtOutcome,
    pub phase: f64,
    pub suppressed: String,
    pub reference: String,
    /// Rate on the dark port over the rate on the bright port; `None` if the
    /// bright port saw nothing.
    pub suppression_ratio: Option<f64>,
}

/// Sets the interferometer to the configured (dark-port) phase, then
/// correlates the configured pair in the same run.
pub fn run_duality(cfg: &ExperimentConfig) -> Result<DualityOutcome, ExperimentError> {
    let prep = prepare(cfg)?;
    if !prep.spec.phase_params.contains(&cfg.phase_param) {
        return Err(config_err(format!(
            "netlist has no phase parameter '{}'",
            cfg.phase_param
        )));
    }
    let d = &cfg.duality;
    let is = cfg.check_output(&prep.spec, &d.suppressed)?;
    let ir = cfg.check_output(&prep.spec, &d.reference)?;
    let hbt = correlate_pair(cfg, &prep, &d.pair, d.phase)?;
    let (dark, bright) = (hbt.rates[is], hbt.rates[ir]);
    Ok(DualityOutcome {
        suppression_ratio: (bright > 0.0).then(|| dark / bright),
        hbt,
        phase: d.phase,
        suppressed: d.suppressed.clone(),
        reference: d.reference.clone(),
    })
}

/// Raw emission and click streams at the working phase.
pub fn run_simulate(
    cfg: &ExperimentConfig,
) -> Result<(EmissionStream, Vec<DetectorRecord>), ExperimentError> {
    let prep = prepare(cfg)?;
    let binding = cfg.binding(&prep.spec, cfg.phase);
    prep.simulate(cfg, &binding, cfg.seed)
}

/// Lints the netlist and config without running a simulation. Returns a
/// human-readable summary.
pub fn validate(cfg: &ExperimentConfig) -> Result<Vec<String>, ExperimentError> {
    let prep = prepare(cfg)?;
    let spec = &prep.spec;
    cfg.check_pair(spec, &cfg.hbt_pair)?;
    cfg.check_pair(spec, &cfg.duality.pair)?;
    cfg.check_output(spec, &cfg.duality.suppressed)?;
    cfg.check_output(spec, &cfg.duality.reference)?;
    if cfg.fringe_phis.is_empty() {
        return Err(config_err("fringe phase grid is empty"));
    }
    if cfg.fringe_phis.iter().any(|p| !p.is_finite()) {
        return Err(config_err("fringe phase grid has non-finite values"));
    }
    let binding = cfg.binding(spec, cfg.phase);
    let u = elaborate(spec, &binding).map_err(|e| match e {
        NetlistError::Binding(m) => config_err(m),
        other => model_err(other),
    })?;
    let err = u.unitarity_error();
    if err >= UNITARY_TOL {
        return Err(model_err(format!("circuit is not unitary (error {err:e})")));
    }
    let dist = output_distribution(&u, prep.input).map_err(model_err)?;
    let mut lines = vec![
        format!("netlist: {}", cfg.netlist_name()),
        format!(
            "circuit: {} ({} modes, {} elements)",
            spec.name.as_deref().unwrap_or("unnamed"),
            spec.mode_count,
            spec.elements.len()
        ),
        format!("phase parameters: {}", spec.phase_params.join(", ")),
        format!("unitarity error: {err:e}"),
        format!("input: {}", cfg.input),
    ];
    for (label, p) in prep.labels.iter().zip(&dist.probabilities) {
        lines.push(format!(
            "P({label}) at {} = {}: {p:.6}",
            cfg.phase_param, cfg.phase
        ));
    }
    lines.push(format!(
        "mean emission rate: {:.6e} /ns",
        cfg.emitter.mean_emission_rate_per_ns()
    ));
    lines.push("ok".into());
    Ok(lines)
}
