//! Scanning-beam precoders and superposition precoding for mmWave ISAC.

use std::f64::consts::PI;

use crate::channel::{steering_vector_normalized, ArrayGeometry, ChannelMatrix, NoiseSpec, SteeringDictionary};
use crate::error::{domain, mismatch, shape, IsacError, Result};
use crate::isac::SymbolBlock;
use crate::linalg::{frobenius_sq, is_finite, min_quadratic_on_sphere};
use crate::{CMatrix, CVector, Complex64};

const MAX_CONDITION: f64 = 1e12;
const MAX_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Normalization {
    /// Every column has unit norm.
    UnitColumns,
    /// `Tr(Fᴴ F) ≤ bound`.
    TotalTrace(f64),
    /// No constraint asserted.
    Unnormalized,
}

/// Precoder `F`, `M × I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Precoder {
    matrix: CMatrix,
    normalization: Normalization,
}

impl Precoder {
    pub fn new(matrix: CMatrix, normalization: Normalization) -> Result<Self> {
        if !is_finite(&matrix) {
            return domain("precoder has non-finite entries");
        }
        match normalization {
            Normalization::UnitColumns => {
                for (i, col) in matrix.column_iter().enumerate() {
                    if (col.norm() - 1.0).abs() > 1e-10 {
                        return domain(format!("precoder column {i} has norm {}", col.norm()));
                    }
                }
            }
            Normalization::TotalTrace(bound) => {
                let tr = frobenius_sq(&matrix);
                if tr > bound * (1.0 + 1e-10) {
                    return domain(format!("precoder trace {tr} exceeds bound {bound}"));
                }
            }
            Normalization::Unnormalized => {}
        }
        Ok(Self { matrix, normalization })
    }

    /// Scales each nonzero column to unit norm; zero columns are rejected.
    pub fn unit_columns(mut matrix: CMatrix) -> Result<Self> {
        for mut col in matrix.column_iter_mut() {
            let n = col.norm();
            if n == 0.0 {
                return domain("cannot normalize a zero precoder column");
            }
            col.unscale_mut(n);
        }
        Self::new(matrix, Normalization::UnitColumns)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    pub fn antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn streams(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn column(&self, i: usize) -> CVector {
        self.matrix.column(i).into_owned()
    }
}

/// Receive combiner `W`, `N × I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Combiner(CMatrix);

impl Combiner {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !is_finite(&matrix) {
            return domain("combiner has non-finite entries");
        }
        Ok(Self(matrix))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    /// `Wᴴ y`.
    pub fn combine(&self, y: &CVector) -> Result<CVector> {
        if y.len() != self.0.nrows() {
            return mismatch("Combiner::combine", format!("length {}", self.0.nrows()), format!("length {}", y.len()));
        }
        Ok(self.0.adjoint() * y)
    }
}

/// `|a(ϑ_i)ᴴ f|` over every dictionary grid point.
pub fn beampattern(dict: &SteeringDictionary, f: &CVector) -> Result<Vec<f64>> {
    if f.len() != dict.geometry().element_count() {
        return mismatch("beampattern", format!("length {}", dict.geometry().element_count()), format!("length {}", f.len()));
    }
    Ok((dict.matrix().adjoint() * f).iter().map(|z| z.norm()).collect())
}

/// Zero-forcing scanning precoder `F = (Ã* Ãᵀ)⁻¹ Ã* G`, the least-squares
/// solution of `Ãᵀ F = G` (exact when `D = M`).
///
/// `desired` is `D × I_s`. The result is returned unnormalized.
pub fn zf_scanning_precoder(dict: &SteeringDictionary, desired: &CMatrix) -> Result<Precoder> {
    let a = dict.matrix();
    if desired.nrows() != a.ncols() {
        return mismatch("zf_scanning_precoder", format!("{} x I", a.ncols()), shape(desired));
    }
    let a_conj = a.conjugate();
    let gram = &a_conj * a.transpose();
    let sv = gram.singular_values();
    let max = sv.max();
    let min = sv.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(IsacError::IllConditioned { condition });
    }
    let rhs = a_conj * desired;
    let f = gram
        .lu()
        .solve(&rhs)
        .ok_or(IsacError::IllConditioned { condition })?;
    Precoder::new(f, Normalization::Unnormalized)
}

/// `diag{√N a(N, arcsin(λ jΔϑ / d))} F`: steers every beam by `jΔϑ` in
/// normalized angle.
pub fn shift_schedule(base: &Precoder, geom: &ArrayGeometry, delta: f64, j: i64) -> Result<Precoder> {
    let n = geom.element_count();
    if base.antennas() != n {
        return mismatch("shift_schedule", format!("{n} x I precoder"), shape(base.matrix()));
    }
    let shift = j as f64 * delta;
    if !shift.is_finite() || (shift / geom.spacing_ratio()).abs() > 1.0 {
        return domain(format!(
            "shift {shift} exceeds the visible region for spacing ratio {}",
            geom.spacing_ratio()
        ));
    }
    let diag = steering_vector_normalized(n, shift).scale((n as f64).sqrt());
    let mut out = base.matrix().clone();
    for mut col in out.column_iter_mut() {
        col.component_mul_assign(&diag);
    }
    Precoder::new(out, base.normalization())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuperpositionMode {
    /// `√ρ F_c s_c + √(1−ρ) F_s s_s`
    Plain,
    /// `√ρ F_c s_c + √(1−ρ) F_s β s_s`
    BetaOnSensing,
    /// `√ρ F_c β s_c + √(1−ρ) F_s s_s`
    BetaOnComm,
    /// `[√ρ f_c + √(1−ρ) e^{jφ} f_s] s_c`
    SharedSymbol,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionConfig {
    rho: f64,
    beta: Vec<Complex64>,
    phase: f64,
}

impl SuperpositionConfig {
    /// `beta` may be empty when the mode does not use it; otherwise
    /// `Σ|β_i|² = len(β)`.
    pub fn new(rho: f64, beta: Vec<Complex64>, phase: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return domain(format!("power split must lie in [0, 1], got {rho}"));
        }
        if !phase.is_finite() {
            return domain("phase must be finite");
        }
        let len = beta.len() as f64;
        let total: f64 = beta.iter().map(|b| b.norm_sqr()).sum();
        if !beta.is_empty() && (total - len).abs() > 1e-9 * len {
            return domain(format!("beta energy {total} differs from its length {len}"));
        }
        Ok(Self { rho, beta, phase })
    }

    /// `β = diag{e^{jφ_i}}`.
    pub fn phase_only(rho: f64, phases: &[f64], phase: f64) -> Result<Self> {
        Self::new(rho, phases.iter().map(|&p| Complex64::from_polar(1.0, p)).collect(), phase)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn beta(&self) -> &[Complex64] {
        &self.beta
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }
}

/// One transmit vector `x_t` of the chosen superposition.
pub fn compose_isac_signal(
    cfg: &SuperpositionConfig,
    fc: &Precoder,
    fs: &Precoder,
    sc: &CVector,
    ss: &CVector,
    mode: SuperpositionMode,
) -> Result<CVector> {
    if fc.antennas() != fs.antennas() {
        return mismatch("compose_isac_signal", format!("{} antennas", fc.antennas()), shape(fs.matrix()));
    }
    let wc = cfg.rho.sqrt();
    let ws = (1.0 - cfg.rho).sqrt();
    let check = |sym: &CVector, p: &Precoder, what: &'static str| -> Result<()> {
        if sym.len() != p.streams() {
            return mismatch(what, format!("{} symbols", p.streams()), format!("{}", sym.len()));
        }
        Ok(())
    };
    let beta_times = |sym: &CVector| -> Result<CVector> {
        if cfg.beta.len() != sym.len() {
            return domain(format!("mode needs {} beta entries, got {}", sym.len(), cfg.beta.len()));
        }
        Ok(sym.component_mul(&CVector::from_column_slice(&cfg.beta)))
    };
    match mode {
        SuperpositionMode::Plain => {
            check(sc, fc, "communication symbols")?;
            check(ss, fs, "sensing symbols")?;
            Ok(fc.matrix() * sc.scale(wc) + fs.matrix() * ss.scale(ws))
        }
        SuperpositionMode::BetaOnSensing => {
            check(sc, fc, "communication symbols")?;
            check(ss, fs, "sensing symbols")?;
            Ok(fc.matrix() * sc.scale(wc) + fs.matrix() * beta_times(ss)?.scale(ws))
        }
        SuperpositionMode::BetaOnComm => {
            check(sc, fc, "communication symbols")?;
            check(ss, fs, "sensing symbols")?;
            Ok(fc.matrix() * beta_times(sc)?.scale(wc) + fs.matrix() * ss.scale(ws))
        }
        SuperpositionMode::SharedSymbol => {
            if fc.streams() != 1 || fs.streams() != 1 || sc.len() != 1 {
                return domain("shared-symbol mode needs single-column precoders and one symbol");
            }
            let rot = Complex64::from_polar(ws, cfg.phase);
            Ok((fc.column(0).scale(wc) + fs.column(0) * rot) * sc[0])
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherentPhase {
    pub phase: f64,
    /// The objective does not depend on the phase (`ρ ∈ {0, 1}` or
    /// `H_c f_s = 0` or `H_c f_c = 0`).
    pub degenerate: bool,
}

/// `φ` maximizing `‖H_c(√ρ f_c + √(1−ρ) e^{jφ} f_s)‖²`, i.e. `−arg(aᴴ b)`
/// with `a = H_c f_c`, `b = H_c f_s`.
pub fn optimize_coherent_phase(hc: &ChannelMatrix, fc: &CVector, fs: &CVector, rho: f64) -> Result<CoherentPhase> {
    if !(0.0..=1.0).contains(&rho) {
        return domain(format!("power split must lie in [0, 1], got {rho}"));
    }
    if fc.len() != hc.cols() || fs.len() != hc.cols() {
        return mismatch("optimize_coherent_phase", format!("length {}", hc.cols()), format!("{} / {}", fc.len(), fs.len()));
    }
    let a = hc.matrix() * fc;
    let b = hc.matrix() * fs;
    let cross = (a.adjoint() * &b)[(0, 0)];
    let scale = a.norm() * b.norm();
    if rho == 0.0 || rho == 1.0 || scale == 0.0 || cross.norm() <= 1e-300 {
        return Ok(CoherentPhase { phase: 0.0, degenerate: true });
    }
    Ok(CoherentPhase { phase: -cross.arg(), degenerate: false })
}

/// `‖H_c(√ρ f_c + √(1−ρ) e^{jφ} f_s)‖²`.
pub fn coherent_gain(hc: &ChannelMatrix, fc: &CVector, fs: &CVector, rho: f64, phase: f64) -> f64 {
    let x = fc.scale(rho.sqrt()) + fs * Complex64::from_polar((1.0 - rho).sqrt(), phase);
    (hc.matrix() * x).norm_squared()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaMode {
    /// Complex gains with `Σ|β_i|² = I_s`.
    Full,
    /// `|β_i| = 1`.
    PhaseOnly,
}

/// Receiver model for the communication SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SinrModel {
    /// Sensing beams carry the communication symbol (`s_s = s_c`), so every
    /// beam adds coherently: `SINR = ‖H_c(√ρ f_c + √(1−ρ) F_s β)‖² / σ²`.
    Coherent,
    /// Independent sensing symbols seen as interference by a matched filter
    /// `w = H_c f_c / ‖H_c f_c‖`:
    /// `SINR = ρ‖H_c f_c‖² / ((1−ρ) Σ_i |β_i|² |wᴴ H_c f_{s,i}|² + σ²)`.
    Interference,
}

#[derive(Debug, Clone)]
pub struct BetaResult {
    pub beta: Vec<Complex64>,
    pub sinr: f64,
    /// SINR at `β = I`.
    pub initial_sinr: f64,
    pub history: Vec<f64>,
    pub converged: bool,
}

/// SINR at a given `β` under `model`. `fc` must have a single column.
pub fn beta_sinr(
    hc: &ChannelMatrix,
    fc: &Precoder,
    fs: &Precoder,
    rho: f64,
    beta: &[Complex64],
    model: SinrModel,
    noise: &NoiseSpec,
) -> Result<f64> {
    let (a, b) = beta_terms(hc, fc, fs, rho)?;
    if beta.len() != b.ncols() {
        return domain(format!("need {} beta entries, got {}", b.ncols(), beta.len()));
    }
    Ok(sinr_of(&a, &b, beta, model, noise.variance()))
}

/// `a = √ρ H_c f_c`, `B = √(1−ρ) H_c F_s`.
fn beta_terms(hc: &ChannelMatrix, fc: &Precoder, fs: &Precoder, rho: f64) -> Result<(CVector, CMatrix)> {
    if fc.streams() != 1 {
        return domain("beta optimization assumes one communication stream");
    }
    if fc.antennas() != hc.cols() || fs.antennas() != hc.cols() {
        return mismatch("optimize_beta_sinr", format!("{} antennas", hc.cols()), shape(fs.matrix()));
    }
    let a = (hc.matrix() * fc.column(0)).scale(rho.sqrt());
    let b = (hc.matrix() * fs.matrix()).scale((1.0 - rho).sqrt());
    Ok((a, b))
}

fn sinr_of(a: &CVector, b: &CMatrix, beta: &[Complex64], model: SinrModel, noise: f64) -> f64 {
    match model {
        SinrModel::Coherent => {
            let y = a + b * CVector::from_column_slice(beta);
            y.norm_squared() / noise
        }
        SinrModel::Interference => {
            let na = a.norm();
            if na == 0.0 {
                return 0.0;
            }
            let w = a.unscale(na);
            let interference: f64 = b
                .column_iter()
                .zip(beta)
                .map(|(col, bi)| bi.norm_sqr() * (w.adjoint() * col)[(0, 0)].norm_sqr())
                .sum();
            a.norm_squared() / (interference + noise)
        }
    }
}

/// Optimizes the diagonal `β` applied to the sensing beams to maximize the
/// communication SINR.
///
/// `Full` + `Coherent` is solved globally as a quadratic on the sphere
/// `‖β‖² = I_s`. `PhaseOnly` + `Coherent` is cyclic coordinate ascent over
/// phases (each update closed form, so the SINR never decreases) from `β = I`
/// and from the phases of the full solution; the better run is returned.
/// Under `Interference` the phases are irrelevant and the full mode puts all
/// energy on the least interfering beam.
#[allow(clippy::too_many_arguments)]
pub fn optimize_beta_sinr(
    hc: &ChannelMatrix,
    fc: &Precoder,
    fs: &Precoder,
    rho: f64,
    mode: BetaMode,
    model: SinrModel,
    noise: &NoiseSpec,
) -> Result<BetaResult> {
    if !(rho > 0.0 && rho < 1.0) {
        return domain(format!("power split must lie in (0, 1), got {rho}"));
    }
    let (a, b) = beta_terms(hc, fc, fs, rho)?;
    let is = b.ncols();
    if is == 0 {
        return domain("no sensing beams");
    }
    let sigma2 = noise.variance();
    let ones = vec![Complex64::new(1.0, 0.0); is];
    let initial = sinr_of(&a, &b, &ones, model, sigma2);
    let single = |beta: Vec<Complex64>| {
        let s = sinr_of(&a, &b, &beta, model, sigma2);
        BetaResult { beta, sinr: s, initial_sinr: initial, history: vec![initial, s], converged: true }
    };
    match (model, mode) {
        (SinrModel::Interference, BetaMode::PhaseOnly) => Ok(single(ones)),
        (SinrModel::Interference, BetaMode::Full) => {
            let na = a.norm();
            if na == 0.0 {
                return Ok(single(ones));
            }
            let w = a.unscale(na);
            let leak: Vec<f64> = b.column_iter().map(|c| (w.adjoint() * c)[(0, 0)].norm_sqr()).collect();
            let best = (0..is).fold(0, |k, i| if leak[i] < leak[k] { i } else { k });
            let mut beta = vec![Complex64::new(0.0, 0.0); is];
            beta[best] = Complex64::new((is as f64).sqrt(), 0.0);
            let r = single(beta);
            if r.sinr < initial {
                return Ok(single(ones));
            }
            Ok(r)
        }
        (SinrModel::Coherent, BetaMode::Full) => {
            let full = coherent_full_beta(&a, &b);
            let r = single(full);
            if r.sinr < initial {
                return Ok(single(ones));
            }
            Ok(r)
        }
        (SinrModel::Coherent, BetaMode::PhaseOnly) => {
            let full = coherent_full_beta(&a, &b);
            let starts = [ones.clone(), full.iter().map(|z| unit(*z)).collect::<Vec<_>>()];
            let mut best: Option<BetaResult> = None;
            for start in starts {
                let r = phase_ascent(&a, &b, start, sigma2, initial);
                if best.as_ref().is_none_or(|x| r.sinr > x.sinr) {
                    best = Some(r);
                }
            }
            Ok(best.expect("two starts"))
        }
    }
}

fn unit(z: Complex64) -> Complex64 {
    if z.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z.unscale(z.norm())
    }
}

/// Maximizes `‖a + Bβ‖²` over `‖β‖² = I_s`.
fn coherent_full_beta(a: &CVector, b: &CMatrix) -> Vec<Complex64> {
    let is = b.ncols();
    let q = -(b.adjoint() * b);
    let lin = CMatrix::from_column_slice(is, 1, (b.adjoint() * a).as_slice());
    let beta = min_quadratic_on_sphere(&q, &lin, is as f64);
    beta.column(0).iter().copied().collect()
}

fn phase_ascent(a: &CVector, b: &CMatrix, start: Vec<Complex64>, sigma2: f64, initial: f64) -> BetaResult {
    let is = b.ncols();
    let mut beta = start;
    let mut y = a + b * CVector::from_column_slice(&beta);
    let mut s = y.norm_squared() / sigma2;
    let mut history = vec![s];
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        for i in 0..is {
            let col = b.column(i);
            let rest = &y - col * beta[i];
            let inner = (col.adjoint() * &rest)[(0, 0)];
            if inner.norm() == 0.0 {
                continue;
            }
            // maximize ‖rest + col e^{jφ}‖²: align col e^{jφ} with rest
            let new = unit(inner);
            y = rest + col * new;
            beta[i] = new;
        }
        let next = y.norm_squared() / sigma2;
        history.push(next);
        let gain = next - s;
        s = next;
        if gain <= 1e-13 * s.max(1.0) {
            converged = true;
            break;
        }
    }
    BetaResult { beta, sinr: s, initial_sinr: initial, history, converged }
}

/// Decision-directed cancellation `Y − G·S_known`, with `G` the effective
/// channel-times-precoder of the known stream.
pub fn cancel_known_symbols(y: &CMatrix, known: &SymbolBlock, channel_times_precoder: &CMatrix) -> Result<CMatrix> {
    let g = channel_times_precoder;
    if g.ncols() != known.users() || g.nrows() != y.nrows() || known.transmissions() != y.ncols() {
        return mismatch(
            "cancel_known_symbols",
            format!("{}x{} effective channel, {}x{} symbols", y.nrows(), known.users(), known.users(), y.ncols()),
            format!("{} and {}", shape(g), shape(known.matrix())),
        );
    }
    Ok(y - g * known.matrix())
}

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = (phi + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}
