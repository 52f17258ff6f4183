//! Transition matrices for passive linear optical circuits.
//!
//! A [`TransitionMatrix`] maps input-mode amplitudes to output-mode
//! amplitudes: row = output mode, column = input mode. Elements are built
//! as small blocks ([`coupler_matrix`], [`phase_matrix`]), lifted into the
//! full mode space with [`embed`] and multiplied together in circuit order
//! with [`compose`].

use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Complex amplitude of a single optical mode.
pub type ComplexAmp = Complex64;

/// Default tolerance used when checking unitarity.
pub const UNITARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CircuitError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("structural error: {0}")]
    Structural(String),
}

/// Directional coupler reflectivity, the fraction of power that stays in
/// its own waveguide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplerParams {
    eta: f64,
}

impl CouplerParams {
    pub fn new(eta: f64) -> Result<Self, CircuitError> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(CircuitError::Domain(format!(
                "coupler reflectivity {eta} outside [0, 1]"
            )));
        }
        Ok(Self { eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Phase imparted by a phase shifter, in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSetting {
    phi: f64,
}

impl PhaseSetting {
    pub fn new(phi: f64) -> Result<Self, CircuitError> {
        if !phi.is_finite() {
            return Err(CircuitError::Domain(format!("phase {phi} is not finite")));
        }
        Ok(Self { phi })
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// Dense complex mode-transition matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    inner: DMatrix<ComplexAmp>,
}

impl TransitionMatrix {
    pub fn identity(dim: usize) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim),
        }
    }

    /// Builds a square matrix from row-major entries. Unitarity is not
    /// enforced here; use [`TransitionMatrix::is_unitary`] to check.
    pub fn from_row_slice(dim: usize, entries: &[ComplexAmp]) -> Result<Self, CircuitError> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(CircuitError::Structural(format!(
                "expected {} entries for a {dim}x{dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        if entries
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(CircuitError::Domain("non-finite matrix entry".into()));
        }
        Ok(Self {
            inner: DMatrix::from_row_slice(dim, dim, entries),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    /// Entry at (output mode, input mode).
    pub fn get(&self, output: usize, input: usize) -> ComplexAmp {
        self.inner[(output, input)]
    }

    /// Column of amplitudes for a photon entering `input`.
    pub fn column(&self, input: usize) -> Vec<ComplexAmp> {
        self.inner.column(input).iter().copied().collect()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            inner: self.inner.adjoint(),
        }
    }

    /// Max-absolute-entry deviation of `U† U` from the identity.
    pub fn unitarity_error(&self) -> f64 {
        let product = self.inner.adjoint() * &self.inner;
        let dim = self.dim();
        let mut worst = 0.0_f64;
        for r in 0..dim {
            for c in 0..dim {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((product[(r, c)] - target).norm());
            }
        }
        worst
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitarity_error() < tol
    }

    /// Largest entrywise distance to `other`; `None` on dimension mismatch.
    pub fn max_abs_diff(&self, other: &Self) -> Option<f64> {
        if self.dim() != other.dim() {
            return None;
        }
        Some(
            self.inner
                .iter()
                .zip(other.inner.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
        )
    }
}

impl fmt::Display for TransitionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.dim() {
            let row: Vec<String> = (0..self.dim())
                .map(|c| {
                    let z = self.get(r, c);
                    format!("{:+.6}{:+.6}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}

/// 2×2 directional coupler: `[[√η, i√(1−η)], [i√(1−η), √η]]`.
pub fn coupler_matrix(p: CouplerParams) -> TransitionMatrix {
    let stay = ComplexAmp::new(p.eta.sqrt(), 0.0);
    let cross = ComplexAmp::new(0.0, (1.0 - p.eta).sqrt());
    TransitionMatrix {
        inner: DMatrix::from_row_slice(2, 2, &[stay, cross, cross, stay]),
    }
}

/// 1×1 phase factor `e^{iφ}`.
pub fn phase_matrix(s: PhaseSetting) -> TransitionMatrix {
    TransitionMatrix {
        inner: DMatrix::from_element(1, 1, ComplexAmp::from_polar(1.0, s.phi)),
    }
}

/// Lifts `elem` onto `modes` of a `dim`-mode circuit; identity elsewhere.
pub fn embed(
    elem: &TransitionMatrix,
    modes: &[usize],
    dim: usize,
) -> Result<TransitionMatrix, CircuitError> {
    if elem.dim() != modes.len() {
        return Err(CircuitError::Structural(format!(
            "element acts on {} modes but {} were given",
            elem.dim(),
            modes.len()
        )));
    }
    for (i, &m) in modes.iter().enumerate() {
        if m >= dim {
            return Err(CircuitError::Structural(format!(
                "mode {m} out of range for {dim}-mode circuit"
            )));
        }
        if modes[..i].contains(&m) {
            return Err(CircuitError::Structural(format!("mode {m} listed twice")));
        }
    }
    let mut out = TransitionMatrix::identity(dim);
    for (i, &row) in modes.iter().enumerate() {
        for (j, &col) in modes.iter().enumerate() {
            out.inner[(row, col)] = elem.get(i, j);
        }
    }
    Ok(out)
}

/// Product of `elements` in circuit order: the first element acts first,
/// so `compose([A, B, C]) = C·B·A`.
pub fn compose(elements: &[TransitionMatrix]) -> Result<TransitionMatrix, CircuitError> {
    let first = elements
        .first()
        .ok_or_else(|| CircuitError::Structural("nothing to compose".into()))?;
    let dim = first.dim();
    let mut acc = first.inner.clone();
    for elem in &elements[1..] {
        if elem.dim() != dim {
            return Err(CircuitError::Structural(format!(
                "cannot compose {}-mode element into {dim}-mode circuit",
                elem.dim()
            )));
        }
        acc = &elem.inner * acc;
    }
    Ok(TransitionMatrix { inner: acc })
}

/// Mode assignments for the four-mode chip built by [`chip_unitary`].
pub mod chip {
    /// Input waveguide a (the photon's entry point).
    pub const INPUT_A: usize = 0;
    pub const INPUT_B: usize = 1;
    pub const INPUT_C: usize = 2;
    /// Waveguide d, which carries the thermal phase shifter.
    pub const INPUT_D: usize = 3;

    pub const OUTPUT_G: usize = 0;
    pub const OUTPUT_E: usize = 1;
    pub const OUTPUT_F: usize = 2;
    pub const OUTPUT_H: usize = 3;

    pub const INPUT_LABELS: [&str; 4] = ["a", "b", "c", "d"];
    pub const OUTPUT_LABELS: [&str; 4] = ["g", "e", "f", "h"];

    /// Design reflectivities `[η₁, η₂, η₃, η₄]`.
    pub const DESIGN_ETAS: [f64; 4] = [0.5, 0.5, 1.0 / 3.0, 1.0 / 3.0];
}

/// Four-mode chip: DC₁ splits a into the interferometer arms (a, d), the
/// phase sits on d, DC₃ and DC₄ tap each arm onto e and f, and DC₂ closes
/// the interferometer onto g and h.
///
/// `etas` is `[η₁, η₂, η₃, η₄]`.
pub fn chip_unitary(s: PhaseSetting, etas: [f64; 4]) -> Result<TransitionMatrix, CircuitError> {
    use chip::*;
    let [dc1, dc2, dc3, dc4] = etas.map(CouplerParams::new);
    let coupler =
        |p: Result<CouplerParams, CircuitError>, a, b| embed(&coupler_matrix(p?), &[a, b], 4);
    compose(&[
        coupler(dc1, INPUT_A, INPUT_D)?,
        embed(&phase_matrix(s), &[INPUT_D], 4)?,
        coupler(dc3, INPUT_A, OUTPUT_E)?,
        coupler(dc4, OUTPUT_F, INPUT_D)?,
        coupler(dc2, OUTPUT_G, OUTPUT_H)?,
    ])
}

/// Amplitudes and detection probabilities for a single photon.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputDistribution {
    pub amplitudes: Vec<ComplexAmp>,
    pub probabilities: Vec<f64>,
}

impl OutputDistribution {
    /// Distribution concentrated on `mode`.
    pub fn point_mass(dim: usize, mode: usize) -> Self {
        let mut amplitudes = vec![ComplexAmp::new(0.0, 0.0); dim];
        amplitudes[mode] = ComplexAmp::new(1.0, 0.0);
        Self::from_amplitudes(amplitudes)
    }

    pub fn from_amplitudes(amplitudes: Vec<ComplexAmp>) -> Self {
        let probabilities = amplitudes.iter().map(|a| a.norm_sqr()).collect();
        Self {
            amplitudes,
            probabilities,
        }
    }

    pub fn total(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

pub fn output_distribution(
    u: &TransitionMatrix,
    input_mode: usize,
) -> Result<OutputDistribution, CircuitError> {
    if input_mode >= u.dim() {
        return Err(CircuitError::Structural(format!(
            "input mode {input_mode} out of range for {}-mode circuit",
            u.dim()
        )));
    }
    Ok(OutputDistribution::from_amplitudes(u.column(input_mode)))
}
