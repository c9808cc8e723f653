//! Estimation rate and sensing capacity.
//!
//! Sensing model `Y = X H + Z` with `X` the `T × M` probing block and the
//! columns of `H` i.i.d. with covariance `Q_h`. The estimation rate in bits
//! per transmission is `(N/T) log2 det(I_M + σ⁻² Q_h X^H X)`, equivalently
//! `(N/T) log2 det(I_T + σ⁻² X Q_h X^H)`.

use crate::channel::NoiseSpec;
use crate::comm::{waterfill, PowerAllocation};
use crate::error::{domain, mismatch, shape, Result};
use crate::linalg::{log2_abs_det, log2_det_hpd, unitary_dft, validate_psd, HermitianEigen};
use crate::{CMatrix, Complex64};

const PSD_TOL: f64 = 1e-10;

/// Hermitian PSD channel covariance `Q_h = E[h_n h_n^H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelCovariance {
    matrix: CMatrix,
    rank: usize,
}

impl ChannelCovariance {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        validate_psd(&matrix, PSD_TOL, "channel covariance")?;
        let rank = HermitianEigen::new(&matrix).rank();
        Ok(Self { matrix, rank })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Non-zero eigenpairs in descending order: (`λ_1..λ_G`, `V_h` of size `M × G`).
    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        let eig = HermitianEigen::new(&self.matrix);
        let g = self.rank;
        (eig.values[..g].to_vec(), eig.vectors.columns(0, g).into_owned())
    }
}

/// Probing block `X = U_x β^{1/2} V_h^H`.
#[derive(Debug, Clone)]
pub struct SensingWaveform {
    /// `T × M`
    pub block: CMatrix,
    /// `T × G`, orthonormal columns
    pub orthobasis: CMatrix,
    /// `M × G`
    pub eigvecs: CMatrix,
    pub allocation: PowerAllocation,
}

impl SensingWaveform {
    pub fn transmissions(&self) -> usize {
        self.block.nrows()
    }

    /// Recomputes `U_x β^{1/2} V_h^H` from the stored factors.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.orthobasis.clone();
        for (g, b) in self.allocation.levels.iter().enumerate() {
            scaled.column_mut(g).scale_mut(b.sqrt());
        }
        scaled * self.eigvecs.adjoint()
    }
}

#[derive(Debug, Clone)]
pub struct EstimationRateResult {
    pub bits_per_transmission: f64,
    /// `None` when `Q_h = 0`.
    pub allocation: Option<PowerAllocation>,
}

fn check_block(x: &CMatrix, qh: &ChannelCovariance) -> Result<()> {
    if x.ncols() != qh.dim() {
        return mismatch("estimation_rate", format!("T x {}", qh.dim()), shape(x));
    }
    if x.nrows() == 0 {
        return domain("probing block needs at least one transmission");
    }
    Ok(())
}

/// `(N/T) log2 det(I_M + σ⁻² Q_h X^H X)`, `T = rows of X`.
pub fn estimation_rate(
    x: &CMatrix,
    qh: &ChannelCovariance,
    noise: &NoiseSpec,
    rx_count: usize,
) -> Result<f64> {
    check_block(x, qh)?;
    let m = qh.dim();
    let t = x.nrows() as f64;
    let inner = CMatrix::identity(m, m) + (qh.matrix() * x.adjoint() * x).unscale(noise.variance());
    Ok((rx_count as f64 / t * log2_abs_det(&inner)).max(0.0))
}

/// Same rate through the `T × T` determinant `det(I_T + σ⁻² X Q_h X^H)`.
pub fn estimation_rate_time_domain(
    x: &CMatrix,
    qh: &ChannelCovariance,
    noise: &NoiseSpec,
    rx_count: usize,
) -> Result<f64> {
    check_block(x, qh)?;
    let t = x.nrows();
    let inner = CMatrix::identity(t, t) + (x * qh.matrix() * x.adjoint()).unscale(noise.variance());
    Ok((rx_count as f64 / t as f64 * log2_det_hpd(&inner)).max(0.0))
}

/// Rate-maximizing probing block under `Tr(X X^H) ≤ T·P_t`.
///
/// `U_x` is the first `G` columns of the unitary `T`-point DFT matrix.
pub fn optimal_sensing_waveform(
    qh: &ChannelCovariance,
    transmissions: usize,
    power_per_transmission: f64,
    noise: &NoiseSpec,
) -> Result<SensingWaveform> {
    let g = qh.rank();
    if g == 0 {
        return domain("channel covariance is zero; no direction to probe");
    }
    if transmissions < g {
        return domain(format!(
            "{transmissions} transmissions cannot carry {g} orthogonal probing streams"
        ));
    }
    let (values, eigvecs) = qh.eigen();
    let allocation = waterfill(&values, transmissions as f64 * power_per_transmission, noise)?;
    let orthobasis = unitary_dft(transmissions).columns(0, g).into_owned();
    let mut scaled = orthobasis.clone();
    for (k, b) in allocation.levels.iter().enumerate() {
        scaled.column_mut(k).scale_mut(b.sqrt());
    }
    let block = scaled * eigvecs.adjoint();
    Ok(SensingWaveform { block, orthobasis, eigvecs, allocation })
}

/// `(N/T) Σ_g log2(1 + λ_g β_g / σ²)` with water-filled `β`.
pub fn sensing_capacity(
    qh: &ChannelCovariance,
    rx_count: usize,
    transmissions: usize,
    power_per_transmission: f64,
    noise: &NoiseSpec,
) -> Result<EstimationRateResult> {
    if transmissions == 0 {
        return domain("need at least one transmission");
    }
    if qh.rank() == 0 {
        return Ok(EstimationRateResult { bits_per_transmission: 0.0, allocation: None });
    }
    let wf = optimal_sensing_waveform(qh, transmissions, power_per_transmission, noise)?;
    let bits = rx_count as f64 / transmissions as f64 * wf.allocation.bits(noise);
    Ok(EstimationRateResult { bits_per_transmission: bits, allocation: Some(wf.allocation) })
}

/// Random PSD covariance `A A^H / cols` of the given rank, for tests and sweeps.
pub fn random_covariance(dim: usize, rank: usize, rng: &mut crate::rng::GaussianStream) -> Result<ChannelCovariance> {
    let a = rng.complex_matrix(dim, rank, 1.0);
    let mut q = &a * a.adjoint();
    if rank > 0 {
        q.unscale_mut(rank as f64);
    }
    let q = (&q + q.adjoint()).map(|z| z * Complex64::new(0.5, 0.0));
    ChannelCovariance::new(q)
}
