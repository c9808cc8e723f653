//! Capacity of a MIMO channel known at both ends.
//!
//! With `H = U Σ^{1/2} V^H` the capacity-achieving covariance transmits along
//! the right singular vectors, `Q = V β V^H`, with powers from water-filling
//! over the eigenvalues of `H^H H`.
//!
//! Water level convention: we store the absolute level `w` and allocate
//! `β_g = (w − σ²/λ_g)^+`. The normalized level (`β_g = P(μ − σ²/λ_g)^+`)
//! is `μ = w / P`, see [`PowerAllocation::normalized_water_level`].

use crate::channel::{ChannelMatrix, NoiseSpec};
use crate::error::{domain, mismatch, shape, Result};
use crate::linalg::{frobenius_sq, log2_det_hpd, trace_re, validate_psd, RANK_TOL};
use crate::{CMatrix, Complex64};

const PSD_TOL: f64 = 1e-10;

/// Hermitian PSD transmit covariance `Q_x = E[x x^H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitCovariance(CMatrix);

impl TransmitCovariance {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        validate_psd(&matrix, PSD_TOL, "transmit covariance")?;
        Ok(Self(matrix))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(CMatrix::zeros(dim, dim))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        trace_re(&self.0)
    }
}

/// Water-filling result. `levels[g]` belongs to `eigenvalues[g]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub levels: Vec<f64>,
    pub water_level: f64,
    pub budget: f64,
    pub eigenvalues: Vec<f64>,
}

impl PowerAllocation {
    /// `μ` in the `β_g = P(μ − σ²/λ_g)^+` parameterization.
    pub fn normalized_water_level(&self) -> f64 {
        self.water_level / self.budget
    }

    pub fn active_modes(&self) -> usize {
        self.levels.iter().filter(|&&b| b > 0.0).count()
    }

    pub fn total(&self) -> f64 {
        self.levels.iter().sum()
    }

    /// `Σ_g log2(1 + λ_g β_g / σ²)`.
    pub fn bits(&self, noise: &NoiseSpec) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.levels)
            .map(|(l, b)| (1.0 + l * b / noise.variance()).log2())
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct CapacityResult {
    pub bits_per_symbol: f64,
    pub covariance: TransmitCovariance,
    pub allocation: PowerAllocation,
    /// `M × G` right singular vectors (eigen-beams) of the channel.
    pub beams: CMatrix,
}

/// `log2 det(I + σ⁻² H Q H^H)` in bits per symbol.
pub fn mutual_information_comm(
    h: &ChannelMatrix,
    q: &TransmitCovariance,
    noise: &NoiseSpec,
) -> Result<f64> {
    if h.cols() != q.dim() {
        return mismatch("mutual_information_comm", format!("Q of size {0}x{0}", h.cols()), shape(q.matrix()));
    }
    let hm = h.matrix();
    let n = hm.nrows();
    let m = CMatrix::identity(n, n) + (hm * q.matrix() * hm.adjoint()).unscale(noise.variance());
    Ok(log2_det_hpd(&m).max(0.0))
}

/// Classic water-filling: `β_g = (w − σ²/λ_g)^+` with `Σβ_g = budget`.
///
/// The level is found exactly by dropping the weakest mode until every
/// remaining mode is strictly above water.
pub fn waterfill(eigenvalues: &[f64], budget: f64, noise: &NoiseSpec) -> Result<PowerAllocation> {
    if eigenvalues.is_empty() {
        return domain("water-filling needs at least one eigenvalue");
    }
    if let Some(bad) = eigenvalues.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return domain(format!("eigenvalues must be positive and finite, got {bad}"));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return domain(format!("power budget must be positive, got {budget}"));
    }
    let sigma2 = noise.variance();
    let mut floors: Vec<f64> = eigenvalues.iter().map(|l| sigma2 / l).collect();
    floors.sort_by(f64::total_cmp);

    let mut level = budget + floors[0];
    for k in (1..=floors.len()).rev() {
        let candidate = (budget + floors[..k].iter().sum::<f64>()) / k as f64;
        if candidate > floors[k - 1] {
            level = candidate;
            break;
        }
    }
    let levels = eigenvalues
        .iter()
        .map(|l| {
            let x = level - sigma2 / l;
            if x > 0.0 {
                x
            } else {
                0.0
            }
        })
        .collect();
    Ok(PowerAllocation {
        levels,
        water_level: level,
        budget,
        eigenvalues: eigenvalues.to_vec(),
    })
}

/// Capacity and capacity-achieving covariance of `H` under `Tr(Q) ≤ budget`.
pub fn comm_capacity(h: &ChannelMatrix, budget: f64, noise: &NoiseSpec) -> Result<CapacityResult> {
    let hm = h.matrix();
    if frobenius_sq(hm) == 0.0 {
        return domain("channel matrix is zero");
    }
    let svd = hm.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let mut modes: Vec<(f64, usize)> = svd
        .singular_values
        .iter()
        .enumerate()
        .map(|(i, s)| (s * s, i))
        .collect();
    modes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let max = modes[0].0;
    modes.retain(|(l, _)| *l > RANK_TOL * max);

    let m = hm.ncols();
    let mut beams = CMatrix::zeros(m, modes.len());
    for (g, (_, i)) in modes.iter().enumerate() {
        beams.set_column(g, &v_t.row(*i).adjoint());
    }
    let eigenvalues: Vec<f64> = modes.iter().map(|(l, _)| *l).collect();
    let allocation = waterfill(&eigenvalues, budget, noise)?;

    let mut q = CMatrix::zeros(m, m);
    for (g, beta) in allocation.levels.iter().enumerate() {
        let v = beams.column(g);
        q += (v * v.adjoint()) * Complex64::new(*beta, 0.0);
    }
    let q = (&q + q.adjoint()).scale(0.5);
    Ok(CapacityResult {
        bits_per_symbol: allocation.bits(noise),
        covariance: TransmitCovariance(q),
        allocation,
        beams,
    })
}
