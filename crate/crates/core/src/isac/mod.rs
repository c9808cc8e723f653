//! Joint communication and sensing waveform design.
//!
//! Two families live here:
//!
//! * [`weighted`]: maximize a normalized weighted sum of the communication
//!   mutual information and the sensing estimation rate over the transmit
//!   covariance.
//! * [`lsq`]: least-squares designs that trade the multi-user interference
//!   `‖H_c X − C‖_F²` against closeness to a radar reference waveform, under
//!   a covariance equality, a total energy, a per-antenna energy or a
//!   constant-modulus constraint.
//!
//! Throughout, `H_c` is `K × M`, the symbol block `C` is `K × T` and the
//! transmit block `X` is `M × T`.

pub mod lsq;
pub mod weighted;

use crate::channel::ChannelMatrix;
use crate::error::{domain, mismatch, shape, Result};
use crate::linalg::{frobenius_sq, is_finite, validate_psd, HermitianEigen};
use crate::CMatrix;

pub use lsq::{
    pareto_objective, solve_constant_modulus, solve_covariance_constrained, solve_pareto_tradeoff,
    solve_per_antenna, ConstrainedSolution,
};
pub use weighted::{WeightedMiProblem, WeightedMiSolution};

/// Desired symbols `C`, `K × T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolBlock(CMatrix);

impl SymbolBlock {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !is_finite(&matrix) {
            return domain("symbol block has non-finite entries");
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn users(&self) -> usize {
        self.0.nrows()
    }

    pub fn transmissions(&self) -> usize {
        self.0.ncols()
    }
}

/// Radar covariance `R_s` with a square-root factor, `factor·factorᴴ = R_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarCovariance {
    matrix: CMatrix,
    factor: CMatrix,
    rank: usize,
}

impl RadarCovariance {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        validate_psd(&matrix, 1e-10, "radar covariance")?;
        let eig = HermitianEigen::new(&matrix);
        let rank = eig.rank();
        let m = matrix.nrows();
        let mut factor = eig.vectors.clone();
        for c in 0..m {
            let s = if c < rank { eig.values[c].max(0.0).sqrt() } else { 0.0 };
            factor.column_mut(c).scale_mut(s);
        }
        Ok(Self { matrix, factor, rank })
    }

    /// `R_s = X_s X_sᴴ / T` for a reference waveform `X_s` (`M × T`).
    pub fn from_reference_waveform(xs: &CMatrix) -> Result<Self> {
        if xs.ncols() == 0 {
            return domain("reference waveform has no transmissions");
        }
        let r = xs * xs.adjoint();
        Self::new((&r + r.adjoint()).unscale(2.0 * xs.ncols() as f64))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// `M × M`; the trailing `M − rank` columns are zero.
    pub fn factor(&self) -> &CMatrix {
        &self.factor
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub(crate) fn reduced_factor(&self) -> CMatrix {
        self.factor.columns(0, self.rank).into_owned()
    }
}

/// Trade-off weight `ρ ∈ [0, 1]`; 1 is communication only.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TradeoffWeight(f64);

impl TradeoffWeight {
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return domain(format!("trade-off weight must lie in [0, 1], got {rho}"));
        }
        Ok(Self(rho))
    }

    pub fn rho(&self) -> f64 {
        self.0
    }
}

/// Transmit block `X`, `M × T`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformBlock(CMatrix);

impl WaveformBlock {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !is_finite(&matrix) {
            return domain("waveform block has non-finite entries");
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn energy(&self) -> f64 {
        frobenius_sq(&self.0)
    }

    pub fn antennas(&self) -> usize {
        self.0.nrows()
    }

    pub fn transmissions(&self) -> usize {
        self.0.ncols()
    }
}

/// `‖H_c X_c − C‖_F²`.
pub fn interference_power(xc: &WaveformBlock, hc: &ChannelMatrix, c: &SymbolBlock) -> Result<f64> {
    check_lsq_dims("interference_power", hc, c, xc.matrix())?;
    Ok(frobenius_sq(&(hc.matrix() * xc.matrix() - c.matrix())))
}

/// Checks `H_c: K×M`, `C: K×T`, `X: M×T`.
pub(crate) fn check_lsq_dims(
    context: &'static str,
    hc: &ChannelMatrix,
    c: &SymbolBlock,
    x: &CMatrix,
) -> Result<()> {
    let (k, m) = (hc.rows(), hc.cols());
    if c.users() != k {
        return mismatch(context, format!("{k} x T symbols"), shape(c.matrix()));
    }
    if x.nrows() != m || x.ncols() != c.transmissions() {
        return mismatch(context, format!("{m}x{}", c.transmissions()), shape(x));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::GaussianStream;
    use crate::Complex64;

    #[test]
    fn interference_power_cases() {
        let mut g = GaussianStream::new(4);
        let hc = ChannelMatrix::new(g.complex_matrix(2, 3, 1.0)).unwrap();
        let x = g.complex_matrix(3, 4, 1.0);
        let exact = SymbolBlock::new(hc.matrix() * &x).unwrap();
        let xb = WaveformBlock::new(x.clone()).unwrap();
        assert!(interference_power(&xb, &hc, &exact).unwrap() < 1e-24);

        let c = SymbolBlock::new(g.complex_matrix(2, 4, 1.0)).unwrap();
        let zero = WaveformBlock::new(CMatrix::zeros(3, 4)).unwrap();
        let p = interference_power(&zero, &hc, &c).unwrap();
        assert!((p - frobenius_sq(c.matrix())).abs() < 1e-12);

        let mut oracle = 0.0;
        for k in 0..2 {
            for t in 0..4 {
                let mut acc = Complex64::new(0.0, 0.0);
                for m in 0..3 {
                    acc += hc.matrix()[(k, m)] * x[(m, t)];
                }
                oracle += (acc - c.matrix()[(k, t)]).norm_sqr();
            }
        }
        assert!((interference_power(&xb, &hc, &c).unwrap() - oracle).abs() < 1e-10);

        let bad = WaveformBlock::new(CMatrix::zeros(2, 4)).unwrap();
        assert!(interference_power(&bad, &hc, &c).is_err());
    }

    #[test]
    fn radar_covariance_factor() {
        let mut g = GaussianStream::new(5);
        let xs = g.complex_matrix(3, 2, 1.0);
        let rs = RadarCovariance::from_reference_waveform(&xs).unwrap();
        assert_eq!(rs.rank(), 2);
        let f = rs.factor();
        assert!((f * f.adjoint() - rs.matrix()).norm() < 1e-10);
        assert!(RadarCovariance::new(CMatrix::from_diagonal_element(2, 2, Complex64::new(-1.0, 0.0))).is_err());
    }

    #[test]
    fn weight_range() {
        assert!(TradeoffWeight::new(1.2).is_err());
        assert!(TradeoffWeight::new(f64::NAN).is_err());
        assert_eq!(TradeoffWeight::new(0.25).unwrap().rho(), 0.25);
    }
}
