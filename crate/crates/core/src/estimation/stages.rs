//! Doppler, delay and gain stages, and the full per-path pipeline.
//!
//! Sign conventions: a path contributes
//! `α e^{−j2π(f_c + nΔf)τ} e^{j2π t f_D T_s}` on subcarrier `n` at symbol `t`.
//! With on-grid `f_D = f_x/(T T_s)` and `τ = τ_x/(N_sc Δf)`, the forward
//! transform over symbols (kernel `e^{−j2πtk/T}`) peaks at `f_x` and the
//! inverse-direction transform over subcarriers (kernel `e^{+j2πnk/N}`)
//! peaks at `τ_x`.

use std::f64::consts::PI;

use rustfft::FftPlanner;

use crate::channel::SteeringDictionary;
use crate::error::{domain, Result};
use crate::{CMatrix, Complex64};

use super::search::beam_search_angles;
use super::ObservationTensor;

/// Peak of a transform: bin, value divided by the transform length, and the
/// ratio of the largest to the second-largest magnitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPeak {
    pub bin: usize,
    pub value: Complex64,
    pub peak_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOrder {
    /// Doppler per subcarrier, then delay across subcarriers.
    DopplerFirst,
    /// Delay per symbol, then Doppler across symbols.
    DelayFirst,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathEstimate {
    pub aod_index: usize,
    pub aoa_index: usize,
    /// Grid angles in radians.
    pub aod: f64,
    pub aoa: f64,
    pub doppler_bin: usize,
    pub delay_bin: usize,
    pub doppler_hz: f64,
    pub delay_s: f64,
    pub gain: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationReport {
    pub paths: Vec<PathEstimate>,
    pub residual_energy: f64,
    pub input_energy: f64,
    pub angle_peak_ratios: Vec<f64>,
    pub doppler_peak_ratios: Vec<f64>,
    pub delay_peak_ratios: Vec<f64>,
}

fn transform(data: &[Complex64], inverse: bool) -> Vec<Complex64> {
    let mut buf = data.to_vec();
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(buf.len())
    } else {
        planner.plan_fft_forward(buf.len())
    };
    fft.process(&mut buf);
    buf
}

/// Picks the bin with the largest summed power over several spectra (lowest
/// bin wins ties) and returns `(bin, peak ratio)`.
fn aggregate_peak(spectra: &[Vec<Complex64>]) -> (usize, f64) {
    let len = spectra[0].len();
    let power: Vec<f64> = (0..len).map(|k| spectra.iter().map(|s| s[k].norm_sqr()).sum()).collect();
    let best = (0..len).fold(0, |b, k| if power[k] > power[b] { k } else { b });
    let second = (0..len).filter(|&k| k != best).map(|k| power[k]).fold(0.0, f64::max);
    let ratio = if second > 0.0 { (power[best] / second).sqrt() } else { f64::INFINITY };
    (best, ratio)
}

fn single_peak(data: &[Complex64], inverse: bool, what: &str) -> Result<SpectralPeak> {
    if data.len() < 2 {
        return domain(format!("{what} transform needs at least 2 samples, got {}", data.len()));
    }
    if data.iter().all(|z| z.norm() == 0.0) {
        return domain(format!("{what} input is all zero"));
    }
    let spec = transform(data, inverse);
    let (bin, peak_ratio) = aggregate_peak(std::slice::from_ref(&spec));
    Ok(SpectralPeak { bin, value: spec[bin].unscale(data.len() as f64), peak_ratio })
}

/// Doppler bin of a symbol series `h[t']`, `t' = 0..T−1`: forward `T`-point
/// transform, value = peak / T.
pub fn estimate_doppler(h: &[Complex64]) -> Result<SpectralPeak> {
    single_peak(h, false, "Doppler")
}

/// Delay bin of a subcarrier series `c[n]`: inverse-direction `N`-point
/// transform, value = peak / N.
pub fn estimate_delay(c: &[Complex64]) -> Result<SpectralPeak> {
    single_peak(c, true, "delay")
}

/// `c_D = e^{j2π f_x / T}`, the Doppler phase of the first symbol.
pub fn doppler_correction(bin: usize, n_symbols: usize) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * bin as f64 / n_symbols as f64)
}

/// Inverts `c_l = c_D α e^{−j2πfτ}`: `α̂ = (c_l / c_D) e^{j2πfτ̂}`.
pub fn estimate_gain_phase(c_l: Complex64, c_d: Complex64, tau: f64, carrier_hz: f64) -> Result<Complex64> {
    if c_d.norm() == 0.0 || !c_d.re.is_finite() || !c_d.im.is_finite() {
        return domain("Doppler correction must be nonzero and finite");
    }
    Ok(c_l / c_d * Complex64::from_polar(1.0, 2.0 * PI * carrier_hz * tau))
}

struct StageOutput {
    doppler_bin: usize,
    delay_bin: usize,
    value: Complex64,
    doppler_ratio: f64,
    delay_ratio: f64,
}

fn rows(series: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..series.nrows()).map(|n| series.row(n).iter().copied().collect()).collect()
}

fn cols(series: &CMatrix) -> Vec<Vec<Complex64>> {
    (0..series.ncols()).map(|t| series.column(t).iter().copied().collect()).collect()
}

fn check_series(series: &CMatrix) -> Result<()> {
    if series.nrows() < 2 || series.ncols() < 2 {
        return domain("need at least 2 subcarriers and 2 symbols");
    }
    if series.iter().all(|z| z.norm() == 0.0) {
        return domain("path series is all zero");
    }
    Ok(())
}

/// `series` is `N_sc × T`.
fn doppler_then_delay(series: &CMatrix) -> Result<StageOutput> {
    check_series(series)?;
    let t = series.ncols() as f64;
    let spectra: Vec<Vec<Complex64>> = rows(series).iter().map(|r| transform(r, false)).collect();
    let (doppler_bin, doppler_ratio) = aggregate_peak(&spectra);
    let c: Vec<Complex64> = spectra.iter().map(|s| s[doppler_bin].unscale(t)).collect();
    let delay = estimate_delay(&c)?;
    Ok(StageOutput { doppler_bin, delay_bin: delay.bin, value: delay.value, doppler_ratio, delay_ratio: delay.peak_ratio })
}

fn delay_then_doppler(series: &CMatrix) -> Result<StageOutput> {
    check_series(series)?;
    let n = series.nrows() as f64;
    let spectra: Vec<Vec<Complex64>> = cols(series).iter().map(|c| transform(c, true)).collect();
    let (delay_bin, delay_ratio) = aggregate_peak(&spectra);
    let e: Vec<Complex64> = spectra.iter().map(|s| s[delay_bin].unscale(n)).collect();
    let doppler = estimate_doppler(&e)?;
    Ok(StageOutput {
        doppler_bin: doppler.bin,
        delay_bin,
        value: doppler.value,
        doppler_ratio: doppler.peak_ratio,
        delay_ratio,
    })
}

/// Angle search followed by per-path Doppler, delay and gain recovery.
pub fn estimate_paths(
    obs: &ObservationTensor,
    dict_tx: &SteeringDictionary,
    dict_rx: &SteeringDictionary,
    num_paths: usize,
    order: StageOrder,
) -> Result<EstimationReport> {
    let search = beam_search_angles(obs, dict_tx, dict_rx, num_paths)?;
    let grid = obs.grid();
    let mut report = EstimationReport {
        paths: Vec::with_capacity(num_paths),
        residual_energy: search.residual_energy,
        input_energy: search.input_energy,
        angle_peak_ratios: search.peak_ratios.clone(),
        doppler_peak_ratios: Vec::with_capacity(num_paths),
        delay_peak_ratios: Vec::with_capacity(num_paths),
    };
    for track in &search.tracks {
        let out = match order {
            StageOrder::DopplerFirst => doppler_then_delay(&track.series)?,
            StageOrder::DelayFirst => delay_then_doppler(&track.series)?,
        };
        let tau = grid.delay_of_bin(out.delay_bin);
        let c_d = doppler_correction(out.doppler_bin, grid.n_symbols);
        let gain = estimate_gain_phase(out.value, c_d, tau, obs.carrier_hz())?;
        report.paths.push(PathEstimate {
            aod_index: track.aod_index,
            aoa_index: track.aoa_index,
            aod: dict_tx.grid_angles()[track.aod_index],
            aoa: dict_rx.grid_angles()[track.aoa_index],
            doppler_bin: out.doppler_bin,
            delay_bin: out.delay_bin,
            doppler_hz: grid.doppler_of_bin(out.doppler_bin, obs.symbol_duration_s()),
            delay_s: tau,
            gain,
        });
        report.doppler_peak_ratios.push(out.doppler_ratio);
        report.delay_peak_ratios.push(out.delay_ratio);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_dictionary, ArrayGeometry, MmWaveChannelSpec, PathParameters};
    use crate::estimation::{observe, OfdmGrid};

    fn tone(len: usize, bin: usize, sign: f64, c: Complex64) -> Vec<Complex64> {
        (0..len)
            .map(|k| c * Complex64::from_polar(1.0, sign * 2.0 * PI * (k * bin % len) as f64 / len as f64))
            .collect()
    }

    #[test]
    fn doppler_on_grid() {
        let p = estimate_doppler(&tone(8, 3, 1.0, Complex64::new(1.0, 0.0))).unwrap();
        assert_eq!(p.bin, 3);
        assert!((p.value - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        let spec = transform(&tone(8, 3, 1.0, Complex64::new(1.0, 0.0)), false);
        assert!(spec.iter().enumerate().filter(|(k, _)| *k != 3).all(|(_, z)| z.norm() < 1e-10 * 8.0));
        assert_eq!(estimate_doppler(&[Complex64::new(2.0, 1.0); 8]).unwrap().bin, 0);
        assert!(estimate_doppler(&[Complex64::new(0.0, 0.0); 8]).is_err());
        assert!(estimate_doppler(&[Complex64::new(1.0, 0.0)]).is_err());
    }

    #[test]
    fn doppler_off_grid_is_nearest_and_weaker() {
        let t = 8;
        let off: Vec<Complex64> = (0..t).map(|k| Complex64::from_polar(1.0, 2.0 * PI * 2.4 * k as f64 / t as f64)).collect();
        let p = estimate_doppler(&off).unwrap();
        assert_eq!(p.bin, 2);
        // on-grid has no second peak at all
        assert!(p.peak_ratio.is_finite());
        assert!(estimate_doppler(&tone(8, 2, 1.0, Complex64::new(1.0, 0.0))).unwrap().peak_ratio > p.peak_ratio);
    }

    #[test]
    fn delay_on_grid() {
        let c = Complex64::new(0.2, -0.7);
        let p = estimate_delay(&tone(16, 5, -1.0, c)).unwrap();
        assert_eq!(p.bin, 5);
        assert!((p.value - c).norm() < 1e-14);
        let grid = OfdmGrid::new(16, 4, 1e5).unwrap();
        assert!((grid.delay_of_bin(5) - 5.0 / (16.0 * 1e5)).abs() < 1e-20);
        assert_eq!(estimate_delay(&tone(16, 0, -1.0, c)).unwrap().bin, 0);
    }

    #[test]
    fn gain_inversion() {
        assert!((estimate_gain_phase(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), 0.0, 28e9).unwrap()
            - Complex64::new(1.0, 0.0))
        .norm()
            < 1e-15);
        let (f, tau) = (28e9, 3.3e-9);
        for alpha in [Complex64::from_polar(0.5, PI / 4.0), Complex64::from_polar(0.8, PI - 1e-9)] {
            let c_d = doppler_correction(3, 8);
            let c_l = c_d * alpha * Complex64::from_polar(1.0, -2.0 * PI * f * tau);
            let got = estimate_gain_phase(c_l, c_d, tau, f).unwrap();
            assert!((got - alpha).norm() < 1e-9);
        }
        assert!(estimate_gain_phase(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), 0.0, 1.0).is_err());
    }

    fn on_grid_spec(
        tx: &SteeringDictionary,
        rx: &SteeringDictionary,
        grid: &OfdmGrid,
        ts: f64,
        picks: &[(usize, usize, usize, usize, Complex64)],
    ) -> MmWaveChannelSpec {
        let paths = picks
            .iter()
            .map(|&(i, j, fx, tx_bin, gain)| PathParameters {
                gain,
                delay: grid.delay_of_bin(tx_bin),
                doppler: grid.doppler_of_bin(fx, ts),
                aod: tx.grid_angles()[j],
                aoa: rx.grid_angles()[i],
            })
            .collect();
        MmWaveChannelSpec::new(*tx.geometry(), *rx.geometry(), paths, 28e9, ts).unwrap()
    }

    #[test]
    fn single_path_round_trip_both_orders() {
        let tx = build_dictionary(&ArrayGeometry::half_wavelength(4).unwrap(), 4).unwrap();
        let rx = build_dictionary(&ArrayGeometry::half_wavelength(3).unwrap(), 3).unwrap();
        let grid = OfdmGrid::new(16, 8, 120e3).unwrap();
        let ts = 1e-5;
        let alpha = Complex64::from_polar(0.7, 2.0);
        let spec = on_grid_spec(&tx, &rx, &grid, ts, &[(1, 3, 5, 7, alpha)]);
        let obs = observe(&spec, &grid, &CMatrix::identity(4, 4), None).unwrap();
        for order in [StageOrder::DopplerFirst, StageOrder::DelayFirst] {
            let r = estimate_paths(&obs, &tx, &rx, 1, order).unwrap();
            let p = &r.paths[0];
            assert_eq!((p.aoa_index, p.aod_index, p.doppler_bin, p.delay_bin), (1, 3, 5, 7));
            assert!((p.gain - alpha).norm() < 1e-9, "{order:?}: {}", p.gain);
            assert!(r.residual_energy < 1e-9 * r.input_energy);
        }
        let empty = estimate_paths(&obs, &tx, &rx, 0, StageOrder::DopplerFirst).unwrap();
        assert!(empty.paths.is_empty());
        assert_eq!(empty.residual_energy, empty.input_energy);
    }
}
