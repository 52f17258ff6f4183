//! Photon propagation from the emitter to detector clicks.
//!
//! Every emitted photon independently survives the port-independent loss
//! budget, is routed to one output port by sampling the circuit's output
//! distribution, then survives the detector efficiency of that port. Its
//! click time is the emission time plus Gaussian timing jitter. Dark counts
//! are added per detector as homogeneous Poisson processes, and the dead
//! time filter runs last on each sorted record.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::circuit::OutputDistribution;
use crate::emitter::EmissionStream;
use crate::rng::substream;

/// Number of emissions handled by one random substream. Results for a
/// given seed depend on this value, so it is fixed.
pub const BLOCK_SIZE: usize = 1 << 16;

/// Substream offset for dark counts, far above any block index.
const DARK_STREAM_BASE: u64 = 1 << 48;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("output probabilities sum to {0}, above 1; losses belong in the channel parameters")]
    Unnormalized(f64),
    #[error("invalid channel parameter: {0}")]
    InvalidChannel(String),
    #[error("{0}")]
    Mismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub efficiency: f64,
    /// RMS of the Gaussian timing jitter.
    pub jitter_sigma_ns: f64,
    pub dark_rate_per_ns: f64,
    pub dead_time_ns: f64,
}

impl Default for DetectorParams {
    /// Silicon APD figures: 0.5 ns RMS jitter, 100 dark counts per second,
    /// 50 ns dead time.
    fn default() -> Self {
        Self {
            efficiency: 1.0,
            jitter_sigma_ns: 0.5,
            dark_rate_per_ns: 1e-7,
            dead_time_ns: 50.0,
        }
    }
}

impl DetectorParams {
    pub fn ideal() -> Self {
        Self {
            efficiency: 1.0,
            jitter_sigma_ns: 0.0,
            dark_rate_per_ns: 0.0,
            dead_time_ns: 0.0,
        }
    }

    fn validate(&self, which: usize) -> Result<(), ModelError> {
        let ok = (0.0..=1.0).contains(&self.efficiency)
            && self.jitter_sigma_ns >= 0.0
            && self.jitter_sigma_ns.is_finite()
            && self.dark_rate_per_ns >= 0.0
            && self.dark_rate_per_ns.is_finite()
            && self.dead_time_ns >= 0.0
            && self.dead_time_ns.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidChannel(format!(
                "detector {which}: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelParams {
    pub source_to_chip_efficiency: f64,
    pub chip_transmission: f64,
    /// One entry per output mode.
    pub detectors: Vec<DetectorParams>,
}

impl ChannelParams {
    pub fn ideal(modes: usize) -> Self {
        Self {
            source_to_chip_efficiency: 1.0,
            chip_transmission: 1.0,
            detectors: vec![DetectorParams::ideal(); modes],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (name, v) in [
            ("source_to_chip_efficiency", self.source_to_chip_efficiency),
            ("chip_transmission", self.chip_transmission),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(ModelError::InvalidChannel(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        self.detectors
            .iter()
            .enumerate()
            .try_for_each(|(i, d)| d.validate(i))
    }

    /// Probability that a photon reaches the output ports.
    pub fn common_survival(&self) -> f64 {
        self.source_to_chip_efficiency * self.chip_transmission
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ClickSource {
    Photon,
    Dark,
}

impl ClickSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClickSource::Photon => "photon",
            ClickSource::Dark => "dark",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRecord {
    pub detector_id: String,
    pub clicks_ns: Vec<f64>,
    /// Origin of each click, parallel to `clicks_ns`.
    pub truth: Option<Vec<ClickSource>>,
    /// Length of the acquisition window.
    pub duration_ns: f64,
}

impl DetectorRecord {
    /// Record without provenance tags, e.g. for externally supplied data.
    pub fn from_clicks(detector_id: &str, clicks_ns: Vec<f64>, duration_ns: f64) -> Self {
        Self {
            detector_id: detector_id.to_string(),
            clicks_ns,
            truth: None,
            duration_ns,
        }
    }

    pub fn len(&self) -> usize {
        self.clicks_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clicks_ns.is_empty()
    }

    pub fn is_sorted(&self) -> bool {
        self.clicks_ns.windows(2).all(|w| w[0] <= w[1])
    }
}

type Tagged = (f64, ClickSource);

fn propagate_block(
    block: &[f64],
    block_index: usize,
    cumulative: &[f64],
    ch: &ChannelParams,
    jitter: &[Option<Normal<f64>>],
    seed: u64,
) -> Vec<Vec<Tagged>> {
    let mut rng = substream(seed, block_index as u64);
    let mut out = vec![Vec::new(); cumulative.len()];
    let survive = ch.common_survival();
    for &t in block {
        if rng.gen::<f64>() >= survive {
            continue;
        }
        let u = rng.gen::<f64>();
        let Some(port) = cumulative.iter().position(|&c| u < c) else {
            continue;
        };
        if rng.gen::<f64>() >= ch.detectors[port].efficiency {
            continue;
        }
        let click = match &jitter[port] {
            Some(n) => t + n.sample(&mut rng),
            None => t,
        };
        out[port].push((click, ClickSource::Photon));
    }
    out
}

fn dark_clicks(rate: f64, duration: f64, seed: u64, detector: usize) -> Vec<Tagged> {
    if rate <= 0.0 {
        return Vec::new();
    }
    let mut rng = substream(seed, DARK_STREAM_BASE + detector as u64);
    let gap = Exp::new(rate).expect("validated rate");
    let mut t = 0.0;
    let mut clicks = Vec::new();
    loop {
        t += gap.sample(&mut rng);
        if t >= duration {
            break;
        }
        clicks.push((t, ClickSource::Dark));
    }
    clicks
}

/// Non-paralyzable dead time: a click is kept only if it comes at least
/// `dead_time` after the previous kept click.
fn apply_dead_time(sorted: Vec<Tagged>, dead_time: f64) -> Vec<Tagged> {
    if dead_time <= 0.0 {
        return sorted;
    }
    let mut kept: Vec<Tagged> = Vec::with_capacity(sorted.len());
    for c in sorted {
        match kept.last() {
            Some(last) if c.0 - last.0 < dead_time => {}
            _ => kept.push(c),
        }
    }
    kept
}

pub fn propagate(
    emissions: &EmissionStream,
    dist: &OutputDistribution,
    labels: &[String],
    ch: &ChannelParams,
    seed: u64,
) -> Result<Vec<DetectorRecord>, ModelError> {
    ch.validate()?;
    let modes = dist.probabilities.len();
    if ch.detectors.len() != modes || labels.len() != modes {
        return Err(ModelError::Mismatch(format!(
            "{modes} output modes but {} detectors and {} labels",
            ch.detectors.len(),
            labels.len()
        )));
    }
    let total = dist.total();
    if total > 1.0 + 1e-9 {
        return Err(ModelError::Unnormalized(total));
    }
    let cumulative: Vec<f64> = dist
        .probabilities
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let jitter: Vec<Option<Normal<f64>>> = ch
        .detectors
        .iter()
        .map(|d| (d.jitter_sigma_ns > 0.0).then(|| Normal::new(0.0, d.jitter_sigma_ns).unwrap()))
        .collect();

    let blocks: Vec<Vec<Vec<Tagged>>> = emissions
        .times_ns
        .par_chunks(BLOCK_SIZE)
        .enumerate()
        .map(|(i, block)| propagate_block(block, i, &cumulative, ch, &jitter, seed))
        .collect();

    let duration = emissions.duration_ns;
    let records = (0..modes)
        .into_par_iter()
        .map(|port| {
            let det = &ch.detectors[port];
            let mut clicks: Vec<Tagged> = blocks
                .iter()
                .flat_map(|b| b[port].iter().copied())
                .collect();
            clicks.extend(dark_clicks(det.dark_rate_per_ns, duration, seed, port));
            clicks.sort_by(|a, b| a.0.total_cmp(&b.0));
            let clicks = apply_dead_time(clicks, det.dead_time_ns);
            let (times, truth) = clicks.into_iter().unzip();
            DetectorRecord {
                detector_id: labels[port].clone(),
                clicks_ns: times,
                truth: Some(truth),
                duration_ns: duration,
            }
        })
        .collect();
    Ok(records)
}

/// Clicks per nanosecond for each record over an acquisition window.
pub fn click_rate(records: &[DetectorRecord], window_ns: f64) -> Vec<f64> {
    records
        .iter()
        .map(|r| r.clicks_ns.len() as f64 / window_ns)
        .collect()
}
