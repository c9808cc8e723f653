//! Uniform linear arrays, geometric mmWave channels and their sparse virtual
//! representation on steering dictionaries.
//!
//! Angles are physical angles in radians in `[-π/2, π/2]`. The normalized
//! angle of a ULA with element spacing `d` and wavelength `λ` is
//! `ϑ = (d/λ)·sin θ`, and the steering vector is
//! `a(N, θ)[n] = exp(-j2πnϑ)/√N` for `n = 0..N-1`.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, mismatch, IsacError, Result};
use crate::linalg::is_finite;
use crate::rng::GaussianStream;
use crate::{CMatrix, CVector, Complex64};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    element_count: usize,
    spacing_ratio: f64,
}

impl ArrayGeometry {
    pub fn new(element_count: usize, spacing_ratio: f64) -> Result<Self> {
        if element_count == 0 {
            return domain("array needs at least one element");
        }
        if !(spacing_ratio > 0.0 && spacing_ratio.is_finite()) {
            return domain(format!("spacing ratio d/λ must be positive, got {spacing_ratio}"));
        }
        Ok(Self { element_count, spacing_ratio })
    }

    /// ULA with `d = λ/2`.
    pub fn half_wavelength(element_count: usize) -> Result<Self> {
        Self::new(element_count, 0.5)
    }

    pub fn element_count(&self) -> usize {
        self.element_count
    }

    pub fn spacing_ratio(&self) -> f64 {
        self.spacing_ratio
    }

    /// `ϑ = (d/λ) sin θ`.
    pub fn normalized_angle(&self, angle: f64) -> Result<f64> {
        check_angle(angle)?;
        Ok(self.spacing_ratio * angle.sin())
    }

    /// Inverse of [`normalized_angle`](Self::normalized_angle): `θ = arcsin(λϑ/d)`.
    pub fn physical_angle(&self, normalized: f64) -> Result<f64> {
        let s = normalized / self.spacing_ratio;
        if !(-1.0..=1.0).contains(&s) {
            return domain(format!(
                "normalized angle {normalized} is outside the visible region of d/λ = {}",
                self.spacing_ratio
            ));
        }
        Ok(s.asin())
    }
}

fn check_angle(angle: f64) -> Result<()> {
    if !(-FRAC_PI_2..=FRAC_PI_2).contains(&angle) {
        return domain(format!("angle {angle} rad outside [-π/2, π/2]"));
    }
    Ok(())
}

/// Steering vector for a normalized angle; no range restriction on `ϑ`.
pub fn steering_vector_normalized(element_count: usize, normalized: f64) -> CVector {
    let scale = 1.0 / (element_count as f64).sqrt();
    CVector::from_fn(element_count, |n, _| {
        Complex64::from_polar(scale, -2.0 * PI * n as f64 * normalized)
    })
}

pub fn steering_vector(geom: &ArrayGeometry, angle: f64) -> Result<CVector> {
    let nu = geom.normalized_angle(angle)?;
    Ok(steering_vector_normalized(geom.element_count, nu))
}

/// Complex noise variance `σ²` (`σ²/2` per real dimension).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    variance: f64,
}

impl NoiseSpec {
    pub fn new(variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite()) {
            return domain(format!("noise variance must be positive, got {variance}"));
        }
        Ok(Self { variance })
    }

    /// Noise level giving `snr_db` relative to `signal_power`.
    pub fn from_snr_db(signal_power: f64, snr_db: f64) -> Result<Self> {
        Self::new(signal_power / 10f64.powf(snr_db / 10.0))
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }
}

/// Channel matrix, rows are receive elements and columns transmit elements.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix(CMatrix);

impl ChannelMatrix {
    pub fn new(entries: CMatrix) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return domain("channel matrix must be non-empty");
        }
        if !is_finite(&entries) {
            return domain("channel matrix has non-finite entries");
        }
        Ok(Self(entries))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    /// Transposed channel; the sensing channel `H_s` is stored this way.
    pub fn transposed(&self) -> Self {
        Self(self.0.transpose())
    }
}

impl AsRef<CMatrix> for ChannelMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.0
    }
}

/// One propagation path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParameters {
    pub gain: Complex64,
    /// seconds
    pub delay: f64,
    /// Hz
    pub doppler: f64,
    /// angle of departure, rad
    pub aod: f64,
    /// angle of arrival, rad
    pub aoa: f64,
}

impl PathParameters {
    pub fn validate(&self) -> Result<()> {
        check_angle(self.aod)?;
        check_angle(self.aoa)?;
        if !(self.delay >= 0.0 && self.delay.is_finite()) {
            return domain(format!("path delay must be non-negative, got {}", self.delay));
        }
        if !self.doppler.is_finite() || !self.gain.re.is_finite() || !self.gain.im.is_finite() {
            return domain("path gain and Doppler must be finite");
        }
        Ok(())
    }

    /// `α·exp(-j2π f τ)·exp(j2π t f_D T_s)`.
    pub fn coefficient(&self, frequency: f64, t: usize, symbol_duration: f64) -> Complex64 {
        self.gain
            * Complex64::from_polar(1.0, -2.0 * PI * frequency * self.delay)
            * Complex64::from_polar(1.0, 2.0 * PI * t as f64 * self.doppler * symbol_duration)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmWaveChannelSpec {
    pub tx: ArrayGeometry,
    pub rx: ArrayGeometry,
    pub paths: Vec<PathParameters>,
    pub carrier_hz: f64,
    pub symbol_duration_s: f64,
}

impl MmWaveChannelSpec {
    pub fn new(
        tx: ArrayGeometry,
        rx: ArrayGeometry,
        paths: Vec<PathParameters>,
        carrier_hz: f64,
        symbol_duration_s: f64,
    ) -> Result<Self> {
        let spec = Self { tx, rx, paths, carrier_hz, symbol_duration_s };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return domain("channel needs at least one path");
        }
        if !(self.carrier_hz > 0.0 && self.carrier_hz.is_finite()) {
            return domain("carrier frequency must be positive");
        }
        if !(self.symbol_duration_s > 0.0 && self.symbol_duration_s.is_finite()) {
            return domain("symbol duration must be positive");
        }
        self.paths.iter().try_for_each(PathParameters::validate)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: SpecFile = toml::from_str(text).map_err(|e| IsacError::Config(e.to_string()))?;
        file.try_into()
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&SpecFile::from(self)).map_err(|e| IsacError::Config(e.to_string()))
    }
}

/// On-disk form: identical fields, angles in degrees.
#[derive(Debug, Serialize, Deserialize)]
struct SpecFile {
    carrier_hz: f64,
    symbol_duration_s: f64,
    tx: ArrayGeometry,
    rx: ArrayGeometry,
    paths: Vec<PathFile>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PathFile {
    gain: Complex64,
    delay_s: f64,
    doppler_hz: f64,
    aod_deg: f64,
    aoa_deg: f64,
}

impl TryFrom<SpecFile> for MmWaveChannelSpec {
    type Error = IsacError;

    fn try_from(f: SpecFile) -> Result<Self> {
        let tx = ArrayGeometry::new(f.tx.element_count, f.tx.spacing_ratio)?;
        let rx = ArrayGeometry::new(f.rx.element_count, f.rx.spacing_ratio)?;
        let paths = f
            .paths
            .into_iter()
            .map(|p| PathParameters {
                gain: p.gain,
                delay: p.delay_s,
                doppler: p.doppler_hz,
                aod: p.aod_deg.to_radians(),
                aoa: p.aoa_deg.to_radians(),
            })
            .collect();
        MmWaveChannelSpec::new(tx, rx, paths, f.carrier_hz, f.symbol_duration_s)
    }
}

impl From<&MmWaveChannelSpec> for SpecFile {
    fn from(s: &MmWaveChannelSpec) -> Self {
        Self {
            carrier_hz: s.carrier_hz,
            symbol_duration_s: s.symbol_duration_s,
            tx: s.tx,
            rx: s.rx,
            paths: s
                .paths
                .iter()
                .map(|p| PathFile {
                    gain: p.gain,
                    delay_s: p.delay,
                    doppler_hz: p.doppler,
                    aod_deg: p.aod.to_degrees(),
                    aoa_deg: p.aoa.to_degrees(),
                })
                .collect(),
        }
    }
}

fn check_symbol_index(t: usize) -> Result<()> {
    if t == 0 {
        return domain("symbol index is 1-based");
    }
    Ok(())
}

fn channel_at_frequency(spec: &MmWaveChannelSpec, t: usize, frequency: f64) -> Result<ChannelMatrix> {
    spec.validate()?;
    check_symbol_index(t)?;
    let mut h = CMatrix::zeros(spec.rx.element_count, spec.tx.element_count);
    for p in &spec.paths {
        let coeff = p.coefficient(frequency, t, spec.symbol_duration_s);
        let ar = steering_vector(&spec.rx, p.aoa)?;
        let at = steering_vector(&spec.tx, p.aod)?;
        h += ar * at.transpose() * coeff;
    }
    ChannelMatrix::new(h)
}

/// Narrowband channel at symbol `t` (1-based) as a sum of per-path outer
/// products.
pub fn synthesize_channel(spec: &MmWaveChannelSpec, t: usize) -> Result<ChannelMatrix> {
    channel_at_frequency(spec, t, spec.carrier_hz)
}

/// Same channel evaluated as `A_rx · diag(α) · diag(delay phases) ·
/// diag(Doppler phases) · A_tx^T`.
pub fn synthesize_channel_factored(spec: &MmWaveChannelSpec, t: usize) -> Result<ChannelMatrix> {
    spec.validate()?;
    check_symbol_index(t)?;
    let l = spec.paths.len();
    let mut a_rx = CMatrix::zeros(spec.rx.element_count, l);
    let mut a_tx = CMatrix::zeros(spec.tx.element_count, l);
    for (i, p) in spec.paths.iter().enumerate() {
        a_rx.set_column(i, &steering_vector(&spec.rx, p.aoa)?);
        a_tx.set_column(i, &steering_vector(&spec.tx, p.aod)?);
    }
    let gains = CMatrix::from_diagonal(&CVector::from_iterator(l, spec.paths.iter().map(|p| p.gain)));
    let delays = CMatrix::from_diagonal(&CVector::from_iterator(
        l,
        spec.paths
            .iter()
            .map(|p| Complex64::from_polar(1.0, -2.0 * PI * spec.carrier_hz * p.delay)),
    ));
    let dopplers = CMatrix::from_diagonal(&CVector::from_iterator(
        l,
        spec.paths.iter().map(|p| {
            Complex64::from_polar(1.0, 2.0 * PI * t as f64 * p.doppler * spec.symbol_duration_s)
        }),
    ));
    ChannelMatrix::new(a_rx * gains * delays * dopplers * a_tx.transpose())
}

/// Channel seen on OFDM subcarrier `n` (0-based), whose frequency is
/// `carrier + n·spacing`.
pub fn synthesize_subcarrier_channel(
    spec: &MmWaveChannelSpec,
    t: usize,
    subcarrier: usize,
    subcarrier_spacing_hz: f64,
) -> Result<ChannelMatrix> {
    channel_at_frequency(spec, t, spec.carrier_hz + subcarrier as f64 * subcarrier_spacing_hz)
}

/// Steering vectors on a grid uniform in normalized angle, covering one full
/// period `ϑ_i = -1/2 + i/D`, `i = 0..D-1`.
///
/// With `D = N` the matrix is a unitary DFT-type matrix. Grid points outside
/// the visible region (`|ϑ| > d/λ`, only possible for `d/λ < 1/2`) are kept
/// as atoms; their `angles` entry is clamped to ±π/2.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringDictionary {
    geometry: ArrayGeometry,
    normalized: Vec<f64>,
    angles: Vec<f64>,
    matrix: CMatrix,
}

impl SteeringDictionary {
    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn len(&self) -> usize {
        self.normalized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normalized.is_empty()
    }

    pub fn normalized_grid(&self) -> &[f64] {
        &self.normalized
    }

    pub fn grid_angles(&self) -> &[f64] {
        &self.angles
    }

    /// `N × D`, column `i` is the steering vector of grid point `i`.
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Nearest grid index to a normalized angle (periodic), with the signed
    /// wrapped distance `ϑ - ϑ_i`.
    pub fn nearest_normalized(&self, normalized: f64) -> (usize, f64) {
        let d = self.len() as f64;
        let pos = ((normalized + 0.5) * d).round();
        let idx = pos.rem_euclid(d) as usize;
        let mut diff = normalized - self.normalized[idx];
        diff -= diff.round();
        (idx, diff)
    }

    /// Nearest grid index to a physical angle.
    pub fn nearest(&self, angle: f64) -> Result<(usize, f64)> {
        Ok(self.nearest_normalized(self.geometry.normalized_angle(angle)?))
    }
}

pub fn build_dictionary(geom: &ArrayGeometry, grid_size: usize) -> Result<SteeringDictionary> {
    if grid_size < geom.element_count {
        return domain(format!(
            "dictionary size {grid_size} smaller than element count {}",
            geom.element_count
        ));
    }
    let normalized: Vec<f64> = (0..grid_size)
        .map(|i| -0.5 + i as f64 / grid_size as f64)
        .collect();
    let angles = normalized
        .iter()
        .map(|&nu| (nu / geom.spacing_ratio).clamp(-1.0, 1.0).asin())
        .collect();
    let mut matrix = CMatrix::zeros(geom.element_count, grid_size);
    for (i, &nu) in normalized.iter().enumerate() {
        matrix.set_column(i, &steering_vector_normalized(geom.element_count, nu));
    }
    Ok(SteeringDictionary { geometry: *geom, normalized, angles, matrix })
}

/// Per-path snapping distances in normalized-angle units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnapDistance {
    pub aoa: f64,
    pub aod: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VirtualChannel {
    /// `D_rx × D_tx`, entry `(aoa index, aod index)` carries the path coefficient.
    pub coefficients: CMatrix,
    pub snap: Vec<SnapDistance>,
}

impl VirtualChannel {
    /// `Ã_rx Σ̃ Ã_tx^T`.
    pub fn reconstruct(&self, dict_rx: &SteeringDictionary, dict_tx: &SteeringDictionary) -> CMatrix {
        dict_rx.matrix() * &self.coefficients * dict_tx.matrix().transpose()
    }

    pub fn nonzero_count(&self, tol: f64) -> usize {
        self.coefficients.iter().filter(|z| z.norm() > tol).count()
    }
}

/// Sparse coefficient matrix of the channel on the given dictionaries.
/// Off-grid paths are snapped to the nearest grid index.
pub fn virtual_coefficients(
    spec: &MmWaveChannelSpec,
    t: usize,
    dict_rx: &SteeringDictionary,
    dict_tx: &SteeringDictionary,
) -> Result<VirtualChannel> {
    spec.validate()?;
    check_symbol_index(t)?;
    if dict_rx.geometry.element_count != spec.rx.element_count {
        return mismatch("virtual_coefficients (rx)", spec.rx.element_count.to_string(), dict_rx.geometry.element_count.to_string());
    }
    if dict_tx.geometry.element_count != spec.tx.element_count {
        return mismatch("virtual_coefficients (tx)", spec.tx.element_count.to_string(), dict_tx.geometry.element_count.to_string());
    }
    let mut coefficients = CMatrix::zeros(dict_rx.len(), dict_tx.len());
    let mut snap = Vec::with_capacity(spec.paths.len());
    for p in &spec.paths {
        let (i, da) = dict_rx.nearest(p.aoa)?;
        let (j, dd) = dict_tx.nearest(p.aod)?;
        coefficients[(i, j)] += p.coefficient(spec.carrier_hz, t, spec.symbol_duration_s);
        snap.push(SnapDistance { aoa: da, aod: dd });
    }
    Ok(VirtualChannel { coefficients, snap })
}

/// I.i.d. unit-variance circularly-symmetric complex Gaussian channel.
pub fn random_channel(rows: usize, cols: usize, seed: u64) -> Result<ChannelMatrix> {
    if rows == 0 || cols == 0 {
        return domain("random channel dimensions must be positive");
    }
    ChannelMatrix::new(GaussianStream::new(seed).complex_matrix(rows, cols, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn broadside_and_endfire() {
        let a = steering_vector(&ArrayGeometry::half_wavelength(2).unwrap(), 0.0).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((a[0] - c(s, 0.0)).norm() < 1e-15 && (a[1] - c(s, 0.0)).norm() < 1e-15);

        let a = steering_vector(&ArrayGeometry::half_wavelength(4).unwrap(), FRAC_PI_2).unwrap();
        for (n, want) in [0.5, -0.5, 0.5, -0.5].iter().enumerate() {
            assert!((a[n] - c(*want, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn thirty_degrees_phase_progression() {
        let a = steering_vector(&ArrayGeometry::half_wavelength(8).unwrap(), PI / 6.0).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-14);
        // ϑ = 1/4: element 2 carries exp(-jπ)
        assert!((a[2].arg().abs() - PI).abs() < 1e-12);
    }

    #[test]
    fn steering_rejects_out_of_range() {
        let g = ArrayGeometry::half_wavelength(4).unwrap();
        assert!(steering_vector(&g, 2.0).is_err());
        assert!(steering_vector(&g, f64::NAN).is_err());
        assert!(ArrayGeometry::new(0, 0.5).is_err());
        assert!(ArrayGeometry::new(3, 0.0).is_err());
    }

    fn spec_with(paths: Vec<PathParameters>) -> MmWaveChannelSpec {
        MmWaveChannelSpec::new(
            ArrayGeometry::half_wavelength(4).unwrap(),
            ArrayGeometry::half_wavelength(3).unwrap(),
            paths,
            28e9,
            1e-6,
        )
        .unwrap()
    }

    fn path(gain: Complex64, aod: f64, aoa: f64) -> PathParameters {
        PathParameters { gain, delay: 0.0, doppler: 0.0, aod, aoa }
    }

    #[test]
    fn single_path_is_rank_one_outer_product() {
        let spec = spec_with(vec![path(c(1.0, 0.0), 0.3, -0.2)]);
        let h = synthesize_channel(&spec, 1).unwrap();
        let expected = steering_vector(&spec.rx, -0.2).unwrap()
            * steering_vector(&spec.tx, 0.3).unwrap().transpose();
        assert!((h.matrix() - expected).norm() < 1e-14);
        let sv = h.matrix().clone().singular_values();
        assert!(sv[1] < 1e-12);
    }

    #[test]
    fn opposite_gains_cancel() {
        let spec = spec_with(vec![path(c(1.0, 0.0), 0.4, 0.1), path(c(-1.0, 0.0), 0.4, 0.1)]);
        assert!(synthesize_channel(&spec, 1).unwrap().matrix().norm() < 1e-15);
    }

    #[test]
    fn symbol_index_is_one_based() {
        let spec = spec_with(vec![path(c(1.0, 0.0), 0.0, 0.0)]);
        assert!(synthesize_channel(&spec, 0).is_err());
        let mut empty = spec.clone();
        empty.paths.clear();
        assert!(synthesize_channel(&empty, 1).is_err());
    }

    #[test]
    fn outer_sum_matches_factored_form() {
        let mut g = GaussianStream::new(5);
        let paths: Vec<_> = (0..3)
            .map(|_| PathParameters {
                gain: g.complex(1.0),
                delay: g.uniform() * 1e-7,
                doppler: (g.uniform() - 0.5) * 2e4,
                aod: (g.uniform() - 0.5) * PI,
                aoa: (g.uniform() - 0.5) * PI,
            })
            .collect();
        let spec = spec_with(paths);
        for t in 1..=4 {
            let a = synthesize_channel(&spec, t).unwrap();
            let b = synthesize_channel_factored(&spec, t).unwrap();
            let err = (a.matrix() - b.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-10, "t={t}: {err}");
        }
    }

    #[test]
    fn square_dictionary_is_unitary() {
        let d = build_dictionary(&ArrayGeometry::half_wavelength(4).unwrap(), 4).unwrap();
        let gram = d.matrix().adjoint() * d.matrix();
        assert!((gram - CMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn overcomplete_dictionary_shape_and_norms() {
        let d = build_dictionary(&ArrayGeometry::half_wavelength(2).unwrap(), 8).unwrap();
        assert_eq!((d.matrix().nrows(), d.matrix().ncols()), (2, 8));
        let gram = d.matrix().adjoint() * d.matrix();
        for i in 0..8 {
            assert!((gram[(i, i)].re - 1.0).abs() < 1e-14);
        }
        assert!(build_dictionary(&ArrayGeometry::half_wavelength(4).unwrap(), 3).is_err());
    }

    #[test]
    fn nearest_wraps_around_the_period() {
        let d = build_dictionary(&ArrayGeometry::half_wavelength(4).unwrap(), 4).unwrap();
        // ϑ = 0.49 is closest to -0.5 modulo 1
        let (idx, dist) = d.nearest_normalized(0.49);
        assert_eq!(idx, 0);
        assert!((dist + 0.01).abs() < 1e-12);
    }

    #[test]
    fn virtual_single_path_reconstructs() {
        let rx = build_dictionary(&ArrayGeometry::half_wavelength(3).unwrap(), 6).unwrap();
        let tx = build_dictionary(&ArrayGeometry::half_wavelength(4).unwrap(), 8).unwrap();
        let spec = spec_with(vec![PathParameters {
            gain: c(0.7, -0.2),
            delay: 3e-9,
            doppler: 1500.0,
            aod: tx.grid_angles()[5],
            aoa: rx.grid_angles()[1],
        }]);
        let v = virtual_coefficients(&spec, 2, &rx, &tx).unwrap();
        assert_eq!(v.nonzero_count(1e-14), 1);
        assert!(v.coefficients[(1, 5)].norm() > 0.0);
        let h = synthesize_channel(&spec, 2).unwrap();
        assert!((v.reconstruct(&rx, &tx) - h.matrix()).norm() < 1e-10);
        assert!(v.snap[0].aoa.abs() < 1e-12 && v.snap[0].aod.abs() < 1e-12);
    }

    #[test]
    fn virtual_two_paths_and_zero_gain() {
        let rx = build_dictionary(&ArrayGeometry::half_wavelength(3).unwrap(), 3).unwrap();
        let tx = build_dictionary(&ArrayGeometry::half_wavelength(4).unwrap(), 4).unwrap();
        let spec = spec_with(vec![
            path(c(1.0, 0.0), tx.grid_angles()[0], rx.grid_angles()[2]),
            path(c(0.0, 2.0), tx.grid_angles()[3], rx.grid_angles()[1]),
        ]);
        let v = virtual_coefficients(&spec, 1, &rx, &tx).unwrap();
        assert_eq!(v.nonzero_count(1e-14), 2);
        assert!(v.coefficients[(2, 0)].norm() > 0.5 && v.coefficients[(1, 3)].norm() > 0.5);

        let zeroed = spec_with(vec![path(c(0.0, 0.0), 0.1, 0.2)]);
        let v = virtual_coefficients(&zeroed, 1, &rx, &tx).unwrap();
        assert_eq!(v.nonzero_count(0.0), 0);
    }

    #[test]
    fn random_channel_is_reproducible() {
        let a = random_channel(2, 2, 9).unwrap();
        assert_eq!(a, random_channel(2, 2, 9).unwrap());
        assert_ne!(a, random_channel(2, 2, 10).unwrap());
        let tall = random_channel(1000, 1, 3).unwrap();
        let p = tall.matrix().iter().map(|z| z.norm_sqr()).sum::<f64>() / 1000.0;
        assert!((p - 1.0).abs() < 0.1, "{p}");
        assert!(random_channel(0, 2, 1).is_err());
    }

    #[test]
    fn spec_toml_roundtrip_uses_degrees() {
        let spec = spec_with(vec![PathParameters {
            gain: c(0.5, 0.25),
            delay: 1e-8,
            doppler: 100.0,
            aod: 30f64.to_radians(),
            aoa: -10f64.to_radians(),
        }]);
        let text = spec.to_toml_string().unwrap();
        assert!(text.contains("aod_deg = 29.99") || text.contains("aod_deg = 30"));
        let back = MmWaveChannelSpec::from_toml_str(&text).unwrap();
        assert!((back.paths[0].aod - spec.paths[0].aod).abs() < 1e-15);
        assert_eq!(back.paths[0].gain, spec.paths[0].gain);
        assert!(MmWaveChannelSpec::from_toml_str("carrier_hz = 1.0").is_err());
    }

    proptest! {
        #[test]
        fn steering_vectors_have_unit_norm(n in 1usize..32, angle in -FRAC_PI_2..FRAC_PI_2, ratio in 0.1f64..1.0) {
            let a = steering_vector(&ArrayGeometry::new(n, ratio).unwrap(), angle).unwrap();
            prop_assert!((a.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn beam_shift_identity(n in 1usize..32, nu1 in -1.0f64..1.0, nu2 in -1.0f64..1.0) {
            let lhs = steering_vector_normalized(n, nu1 + nu2);
            let map = steering_vector_normalized(n, nu1).scale((n as f64).sqrt());
            let rhs = map.component_mul(&steering_vector_normalized(n, nu2));
            let err = (lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max);
            prop_assert!(err < 1e-12);
        }
    }
}
