//! Correlation histograms, jitter convolution and fringe visibility.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use thiserror::Error;

use crate::detection::DetectorRecord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("record '{0}' is not sorted")]
    Unsorted(String),
    #[error("invalid histogram settings: {0}")]
    InvalidBinning(String),
    #[error("visibility undefined: {0}")]
    Undefined(String),
    #[error("invalid intensities: {0}")]
    Domain(String),
    #[error("fringe fit failed: {0}")]
    Fit(String),
}

/// How raw coincidence counts are turned into `g²` estimates.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Normalization {
    /// Accidental-coincidence level of two independent streams:
    /// `n_a · n_b · bin / duration`.
    #[default]
    Poisson,
    /// Mean count of the bins with `|τ| ≥ min_abs_tau_ns`.
    Plateau { min_abs_tau_ns: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationHistogram {
    pub bin_width_ns: f64,
    /// Histogram covers `[-max_tau_ns, max_tau_ns)`.
    pub max_tau_ns: f64,
    pub counts: Vec<u64>,
    pub n_start: usize,
    pub n_stop: usize,
    pub duration_ns: f64,
    pub normalization: Normalization,
    /// `None` when the normalization is undefined (an empty stream or an
    /// empty plateau).
    pub normalized: Option<Vec<f64>>,
}

impl CorrelationHistogram {
    pub fn empty(bin_width_ns: f64, max_tau_ns: f64) -> Result<Self, AnalysisError> {
        let bins = bin_count(bin_width_ns, max_tau_ns)?;
        Ok(Self {
            bin_width_ns,
            max_tau_ns,
            counts: vec![0; bins],
            n_start: 0,
            n_stop: 0,
            duration_ns: 0.0,
            normalization: Normalization::Poisson,
            normalized: None,
        })
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_left(&self, k: usize) -> f64 {
        -self.max_tau_ns + k as f64 * self.bin_width_ns
    }

    pub fn bin_center(&self, k: usize) -> f64 {
        self.bin_left(k) + 0.5 * self.bin_width_ns
    }

    /// Index of the bin `[0, bin_width)`.
    pub fn zero_bin(&self) -> usize {
        self.bins() / 2
    }

    /// Normalized value of the zero-delay bin.
    pub fn g2_zero(&self) -> Option<f64> {
        self.normalized.as_ref().map(|n| n[self.zero_bin()])
    }

    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Expected counts per bin for uncorrelated streams.
    pub fn accidental_level(&self) -> Option<f64> {
        (self.n_start > 0 && self.n_stop > 0 && self.duration_ns > 0.0).then(|| {
            self.n_start as f64 * self.n_stop as f64 * self.bin_width_ns / self.duration_ns
        })
    }

    pub fn renormalize(&mut self, normalization: Normalization) {
        self.normalization = normalization;
        let level = match normalization {
            Normalization::Poisson => self.accidental_level(),
            Normalization::Plateau { min_abs_tau_ns } => {
                let plateau: Vec<u64> = (0..self.bins())
                    .filter(|&k| self.bin_center(k).abs() >= min_abs_tau_ns)
                    .map(|k| self.counts[k])
                    .collect();
                let mean = plateau.iter().sum::<u64>() as f64 / plateau.len().max(1) as f64;
                (mean > 0.0).then_some(mean)
            }
        };
        self.normalized =
            level.map(|level| self.counts.iter().map(|&c| c as f64 / level).collect());
    }

    /// Adds the counts and stream totals of a histogram computed over a
    /// disjoint segment of the data.
    pub fn merge(&mut self, other: &Self) -> Result<(), AnalysisError> {
        if self.bins() != other.bins()
            || self.bin_width_ns != other.bin_width_ns
            || self.max_tau_ns != other.max_tau_ns
        {
            return Err(AnalysisError::InvalidBinning(
                "cannot merge histograms with different binning".into(),
            ));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.n_start += other.n_start;
        self.n_stop += other.n_stop;
        self.duration_ns += other.duration_ns;
        self.renormalize(self.normalization);
        Ok(())
    }
}

fn bin_count(bin_width_ns: f64, max_tau_ns: f64) -> Result<usize, AnalysisError> {
    if !(bin_width_ns > 0.0 && bin_width_ns.is_finite()) {
        return Err(AnalysisError::InvalidBinning(format!(
            "bin width must be positive, got {bin_width_ns}"
        )));
    }
    if !(max_tau_ns > 0.0 && max_tau_ns.is_finite()) {
        return Err(AnalysisError::InvalidBinning(format!(
            "max tau must be positive, got {max_tau_ns}"
        )));
    }
    let half = max_tau_ns / bin_width_ns;
    let rounded = half.round();
    if (half - rounded).abs() > 1e-9 * half.max(1.0) || rounded < 1.0 {
        return Err(AnalysisError::InvalidBinning(format!(
            "max tau {max_tau_ns} is not a multiple of bin width {bin_width_ns}"
        )));
    }
    Ok(2 * rounded as usize)
}

/// Bin of delay `dt`, given `-max_tau <= dt < max_tau`.
#[inline]
fn bin_of(dt: f64, max_tau: f64, width: f64, bins: usize) -> Option<usize> {
    let k = ((dt + max_tau) / width).floor();
    (k >= 0.0 && (k as usize) < bins).then_some(k as usize)
}

fn count_pairs(starts: &[f64], stops: &[f64], max_tau: f64, width: f64, counts: &mut [u64]) {
    let bins = counts.len();
    let mut lo = 0;
    for &ta in starts {
        while lo < stops.len() && stops[lo] - ta < -max_tau {
            lo += 1;
        }
        for &tb in &stops[lo..] {
            let dt = tb - ta;
            if dt >= max_tau {
                break;
            }
            if let Some(k) = bin_of(dt, max_tau, width, bins) {
                counts[k] += 1;
            }
        }
    }
}

/// Start events handled per parallel task.
const CHUNK: usize = 1 << 14;

/// Full cross-correlation of two click streams: every pair with
/// `t_b − t_a ∈ [−max_tau, max_tau)` is counted in the bin of its delay.
pub fn cross_correlate(
    a: &DetectorRecord,
    b: &DetectorRecord,
    bin_width_ns: f64,
    max_tau_ns: f64,
) -> Result<CorrelationHistogram, AnalysisError> {
    cross_correlate_with(a, b, bin_width_ns, max_tau_ns, Normalization::Poisson)
}

pub fn cross_correlate_with(
    a: &DetectorRecord,
    b: &DetectorRecord,
    bin_width_ns: f64,
    max_tau_ns: f64,
    normalization: Normalization,
) -> Result<CorrelationHistogram, AnalysisError> {
    for r in [a, b] {
        if !r.is_sorted() {
            return Err(AnalysisError::Unsorted(r.detector_id.clone()));
        }
    }
    let mut hist = CorrelationHistogram::empty(bin_width_ns, max_tau_ns)?;
    let bins = hist.bins();
    let stops = &b.clicks_ns;

    // Each chunk of starts only needs the stops within max_tau of it, so
    // chunks are independent and their counts simply add.
    let partials: Vec<Vec<u64>> = a
        .clicks_ns
        .par_chunks(CHUNK)
        .map(|starts| {
            let mut counts = vec![0u64; bins];
            let first = starts[0];
            let from = stops.partition_point(|&t| t - first < -max_tau_ns);
            count_pairs(
                starts,
                &stops[from..],
                max_tau_ns,
                bin_width_ns,
                &mut counts,
            );
            counts
        })
        .collect();
    for p in partials {
        for (c, x) in hist.counts.iter_mut().zip(p) {
            *c += x;
        }
    }

    hist.n_start = a.len();
    hist.n_stop = b.len();
    hist.duration_ns = a.duration_ns.max(b.duration_ns);
    hist.renormalize(normalization);
    Ok(hist)
}

/// Combined timing jitter of a pair of independent detectors.
pub fn pair_sigma(sigma_a_ns: f64, sigma_b_ns: f64) -> f64 {
    sigma_a_ns.hypot(sigma_b_ns)
}

/// Kernel intervals across ±6σ; even so τ itself is a node.
const KERNEL_INTERVALS: usize = 2400;

/// Convolves `g2` with a zero-mean Gaussian of width `sigma_pair_ns` at each
/// point of `tau_grid`, by trapezoidal quadrature over ±6σ.
pub fn jitter_convolve_oracle<F>(g2: F, sigma_pair_ns: f64, tau_grid: &[f64]) -> Vec<f64>
where
    F: Fn(f64) -> f64,
{
    if sigma_pair_ns <= 0.0 {
        return tau_grid.iter().map(|&t| g2(t)).collect();
    }
    let half = 6.0 * sigma_pair_ns;
    let h = 2.0 * half / KERNEL_INTERVALS as f64;
    let nodes: Vec<(f64, f64)> = (0..=KERNEL_INTERVALS)
        .map(|i| {
            let x = -half + i as f64 * h;
            let end = if i == 0 || i == KERNEL_INTERVALS {
                0.5
            } else {
                1.0
            };
            let w = end * (-0.5 * (x / sigma_pair_ns).powi(2)).exp();
            (x, w)
        })
        .collect();
    let norm: f64 = nodes.iter().map(|(_, w)| w).sum();
    tau_grid
        .iter()
        .map(|&tau| nodes.iter().map(|&(x, w)| w * g2(tau - x)).sum::<f64>() / norm)
        .collect()
}

/// Fringe contrast `(I_max − I_min)/(I_max + I_min)`.
pub fn visibility(i_max: f64, i_min: f64) -> Result<f64, AnalysisError> {
    if !(i_max.is_finite() && i_min.is_finite()) || i_min < 0.0 || i_max < i_min {
        return Err(AnalysisError::Domain(format!(
            "need i_max >= i_min >= 0, got ({i_max}, {i_min})"
        )));
    }
    if i_max == 0.0 {
        return Err(AnalysisError::Undefined("both intensities are zero".into()));
    }
    Ok((i_max - i_min) / (i_max + i_min))
}

/// Least-squares fit of `offset + amplitude·cos(φ − phase_origin)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    pub amplitude: f64,
    pub offset: f64,
    /// In `(−π, π]`.
    pub phase_origin: f64,
    /// `amplitude / offset` clamped to `[0, 1]`.
    pub visibility: f64,
    pub residual_norm: f64,
}

fn distinct_phases(phis: &[f64]) -> usize {
    let mut wrapped: Vec<f64> = phis.iter().map(|p| p.rem_euclid(2.0 * PI)).collect();
    wrapped.sort_by(f64::total_cmp);
    let mut distinct = 0;
    let mut last: Option<f64> = None;
    for &w in &wrapped {
        if last.is_none_or(|l| w - l > 1e-12) {
            distinct += 1;
            last = Some(w);
        }
    }
    // 0 and 2π−ε wrap onto each other.
    if distinct > 1 && wrapped[0] + 2.0 * PI - wrapped[wrapped.len() - 1] <= 1e-12 {
        distinct -= 1;
    }
    distinct
}

pub fn fit_fringe(phis: &[f64], rates: &[f64]) -> Result<FringeFit, AnalysisError> {
    if phis.len() != rates.len() {
        return Err(AnalysisError::Fit(format!(
            "{} phases but {} rates",
            phis.len(),
            rates.len()
        )));
    }
    if phis.iter().chain(rates).any(|x| !x.is_finite()) {
        return Err(AnalysisError::Fit("non-finite input".into()));
    }
    if distinct_phases(phis) < 4 {
        return Err(AnalysisError::Fit(
            "need at least 4 distinct phases (mod 2π)".into(),
        ));
    }
    let n = phis.len();
    let design = DMatrix::from_fn(n, 3, |r, c| match c {
        0 => 1.0,
        1 => phis[r].cos(),
        _ => phis[r].sin(),
    });
    let y = DVector::from_column_slice(rates);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| AnalysisError::Fit(e.to_string()))?;
    let (offset, a, b) = (coef[0], coef[1], coef[2]);
    let residual_norm = (&design * &coef - &y).norm();
    let amplitude = a.hypot(b);
    let visibility = if offset > 0.0 {
        (amplitude / offset).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(FringeFit {
        amplitude,
        offset,
        phase_origin: b.atan2(a),
        visibility,
        residual_norm,
    })
}

/// Rates from a phase scan with per-detector extrema and visibilities.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeResult {
    pub phis: Vec<f64>,
    pub labels: Vec<String>,
    /// `rates[d][i]`: detector `d` at `phis[i]`.
    pub rates: Vec<Vec<f64>>,
    pub i_max: Vec<f64>,
    pub i_min: Vec<f64>,
    /// `None` where a detector saw no light at all.
    pub visibility: Vec<Option<f64>>,
    /// `None` for scans with too few distinct phases.
    pub fits: Vec<Option<FringeFit>>,
}

impl FringeResult {
    pub fn from_rates(phis: Vec<f64>, labels: Vec<String>, rates: Vec<Vec<f64>>) -> Self {
        let i_max: Vec<f64> = rates
            .iter()
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        let i_min: Vec<f64> = rates
            .iter()
            .map(|r| r.iter().copied().fold(f64::INFINITY, f64::min))
            .collect();
        let visibility = i_max
            .iter()
            .zip(&i_min)
            .map(|(&hi, &lo)| visibility(hi, lo).ok())
            .collect();
        let fits = rates.iter().map(|r| fit_fringe(&phis, r).ok()).collect();
        Self {
            phis,
            labels,
            rates,
            i_max,
            i_min,
            visibility,
            fits,
        }
    }

    pub fn detector(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}
