use std::f64::consts::PI;

use isac_core::estimation::on_grid_path;
use isac_core::precoding::{beampattern, coherent_gain, BetaMode, SinrModel};
use isac_core::sensing::random_covariance;
use isac_core::{
    build_dictionary, comm_capacity, estimate_paths, estimation_rate, interference_power, mutual_information_comm,
    observe, optimal_sensing_waveform, optimize_beta_sinr, optimize_coherent_phase, sensing_capacity,
    shift_schedule, solve_pareto_tradeoff, zf_scanning_precoder, ArrayGeometry, CMatrix, ChannelMatrix, Complex64,
    GaussianStream, MmWaveChannelSpec, NoiseSpec, ObservationTensor, OfdmGrid, Precoder, SteeringDictionary,
    SymbolBlock, TradeoffWeight, TransmitCovariance,
};
use rayon::prelude::*;

use crate::{Metric, ScenarioConfig, ScenarioKind, SimError, TrialResult, TrialTag};

/// Runs every (parameter point × trial) of `cfg`, then appends one mean and
/// one std row per parameter point.
///
/// Trials run on the current rayon pool; output order is parameter-major,
/// then trial index, whatever the scheduling.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<Vec<TrialResult>, SimError> {
    cfg.validate()?;
    let per_trial: Vec<Vec<Vec<Metric>>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_trial(cfg, trial))
        .collect::<Result<_, _>>()?;

    let sweep = cfg.sweep();
    let mut out = Vec::with_capacity(sweep.len() * (cfg.trials + 2));
    for (p, &value) in sweep.iter().enumerate() {
        for (trial, metrics) in per_trial.iter().enumerate() {
            out.push(row(cfg, value, TrialTag::Trial(trial), metrics[p].clone()));
        }
    }
    for (p, &value) in sweep.iter().enumerate() {
        let (mean, std) = aggregate(per_trial.iter().map(|m| m[p].as_slice()));
        out.push(row(cfg, value, TrialTag::Mean, mean));
        out.push(row(cfg, value, TrialTag::Std, std));
    }
    if let Some(r) = out.iter().find(|r| r.metrics.iter().any(|m| !m.value.is_finite())) {
        return Err(SimError::NonFinite(format!("{} {} = {}", r.scenario, r.param_name, r.param_value)));
    }
    Ok(out)
}

fn row(cfg: &ScenarioConfig, value: f64, trial: TrialTag, metrics: Vec<Metric>) -> TrialResult {
    TrialResult { scenario: cfg.kind, param_name: cfg.kind.param_name(), param_value: value, trial, metrics }
}

/// Sample mean and standard deviation of every metric, in first-seen order.
/// Metrics missing from a trial are skipped for that trial.
fn aggregate<'a>(trials: impl Iterator<Item = &'a [Metric]> + Clone) -> (Vec<Metric>, Vec<Metric>) {
    let mut names: Vec<&'static str> = Vec::new();
    for ms in trials.clone() {
        for m in ms {
            if !names.contains(&m.name) {
                names.push(m.name);
            }
        }
    }
    let mut mean = Vec::with_capacity(names.len());
    let mut std = Vec::with_capacity(names.len());
    for name in names {
        let vals: Vec<f64> = trials
            .clone()
            .filter_map(|ms| ms.iter().find(|m| m.name == name).map(|m| m.value))
            .collect();
        let n = vals.len() as f64;
        let mu = vals.iter().sum::<f64>() / n;
        let var = if vals.len() > 1 { vals.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        mean.push(Metric { name, value: mu });
        std.push(Metric { name, value: var.sqrt() });
    }
    (mean, std)
}

/// Metrics of one trial at every parameter point, in sweep order.
fn run_trial(cfg: &ScenarioConfig, trial: usize) -> Result<Vec<Vec<Metric>>, SimError> {
    let mut g = GaussianStream::with_stream(cfg.seed, trial as u64);
    match cfg.kind {
        ScenarioKind::CapacitySweep => capacity_trial(cfg, &mut g),
        ScenarioKind::SensingSweep => sensing_trial(cfg, &mut g),
        ScenarioKind::IsacTradeoff => tradeoff_trial(cfg, &mut g),
        ScenarioKind::MmwaveEstimation => estimation_trial(cfg, &mut g),
        ScenarioKind::BeamScan => beam_scan_trial(cfg, &mut g),
    }
}

fn metric(name: &'static str, value: f64) -> Metric {
    Metric { name, value }
}

/// `H`: `n_c × m`, unit-variance entries, shared by every power point.
fn capacity_trial(cfg: &ScenarioConfig, g: &mut GaussianStream) -> Result<Vec<Vec<Metric>>, SimError> {
    let h = ChannelMatrix::new(g.complex_matrix(cfg.n_c, cfg.m, 1.0))?;
    let noise = NoiseSpec::new(cfg.noise)?;
    cfg.powers
        .iter()
        .map(|&p| {
            let cap = comm_capacity(&h, p, &noise)?;
            Ok(vec![
                metric("comm_bits", cap.bits_per_symbol),
                metric("active_modes", cap.allocation.active_modes() as f64),
            ])
        })
        .collect()
}

/// `[I_m; 0]` scaled to `T·P`: equal power on every antenna.
fn isotropic_probe(t: usize, m: usize, power: f64) -> CMatrix {
    let mut x = CMatrix::zeros(t, m);
    let amp = Complex64::new((t as f64 * power / m as f64).sqrt(), 0.0);
    for i in 0..m {
        x[(i, i)] = amp;
    }
    x
}

/// Full-rank random `Q_h` of size `m`.
fn sensing_trial(cfg: &ScenarioConfig, g: &mut GaussianStream) -> Result<Vec<Vec<Metric>>, SimError> {
    let qh = random_covariance(cfg.m, cfg.m, g)?;
    let noise = NoiseSpec::new(cfg.noise)?;
    cfg.powers
        .iter()
        .map(|&p| {
            let cap = sensing_capacity(&qh, cfg.n_s, cfg.t, p, &noise)?;
            let iso = estimation_rate(&isotropic_probe(cfg.t, cfg.m, p), &qh, &noise, cfg.n_s)?;
            Ok(vec![metric("sensing_bits", cap.bits_per_transmission), metric("isotropic_bits", iso)])
        })
        .collect()
}

/// Pieces of one trade-off trial. `xs` is the `m × t` capacity-achieving
/// probe for `qh`, so the `ρ = 0` end reproduces the pure sensing design.
pub struct TradeoffInstance {
    pub hc: ChannelMatrix,
    pub symbols: SymbolBlock,
    pub qh: isac_core::ChannelCovariance,
    pub xs: CMatrix,
}

pub fn tradeoff_instance(cfg: &ScenarioConfig, trial: usize) -> Result<TradeoffInstance, SimError> {
    let mut g = GaussianStream::with_stream(cfg.seed, trial as u64);
    draw_tradeoff(cfg, &mut g)
}

fn draw_tradeoff(cfg: &ScenarioConfig, g: &mut GaussianStream) -> Result<TradeoffInstance, SimError> {
    let hc = ChannelMatrix::new(g.complex_matrix(cfg.k, cfg.m, 1.0))?;
    let qh = random_covariance(cfg.m, cfg.m, g)?;
    let symbols = SymbolBlock::new(g.complex_matrix(cfg.k, cfg.t, 1.0))?;
    let noise = NoiseSpec::new(cfg.noise)?;
    let xs = optimal_sensing_waveform(&qh, cfg.t, cfg.power, &noise)?.block.transpose();
    Ok(TradeoffInstance { hc, symbols, qh, xs })
}

fn tradeoff_trial(cfg: &ScenarioConfig, g: &mut GaussianStream) -> Result<Vec<Vec<Metric>>, SimError> {
    let inst = draw_tradeoff(cfg, g)?;
    let noise = NoiseSpec::new(cfg.noise)?;
    let energy = inst.xs.norm_squared();
    let t = cfg.t as f64;
    cfg.rho
        .iter()
        .map(|&rho| {
            let x = solve_pareto_tradeoff(&inst.hc, &inst.symbols, &inst.xs, TradeoffWeight::new(rho)?, energy)?;
            let xm = x.matrix();
            let q = TransmitCovariance::new((xm * xm.adjoint()).unscale(t))?;
            Ok(vec![
                metric("interference_power", interference_power(&x, &inst.hc, &inst.symbols)?),
                metric("waveform_distance", (xm - &inst.xs).norm_squared()),
                metric("comm_bits", mutual_information_comm(&inst.hc, &q, &noise)?),
                metric("sensing_bits", estimation_rate(&xm.transpose(), &inst.qh, &noise, cfg.n_s)?),
            ])
        })
        .collect()
}

struct EstimationSetup {
    tx: SteeringDictionary,
    rx: SteeringDictionary,
    grid: OfdmGrid,
}

fn estimation_setup(cfg: &ScenarioConfig) -> Result<EstimationSetup, SimError> {
    Ok(EstimationSetup {
        tx: build_dictionary(&ArrayGeometry::half_wavelength(cfg.m)?, cfg.d)?,
        rx: build_dictionary(&ArrayGeometry::half_wavelength(cfg.n_s)?, cfg.d)?,
        grid: OfdmGrid::new(cfg.n_sc, cfg.t, cfg.subcarrier_spacing_hz)?,
    })
}

/// Ground truth of one path: angle indices, Doppler and delay bins, gain.
#[derive(Debug, Clone, Copy, PartialEq)]
struct TruePath {
    aod: usize,
    aoa: usize,
    doppler: usize,
    delay: usize,
    gain: Complex64,
}

/// `l` on-grid paths with distinct angle pairs and `|α| ∈ [0.5, 1.5)`.
fn draw_paths(cfg: &ScenarioConfig, g: &mut GaussianStream) -> Vec<TruePath> {
    let mut paths: Vec<TruePath> = Vec::with_capacity(cfg.l);
    while paths.len() < cfg.l {
        let p = TruePath {
            aod: g.index(cfg.d),
            aoa: g.index(cfg.d),
            doppler: g.index(cfg.t),
            delay: g.index(cfg.n_sc),
            gain: Complex64::from_polar(0.5 + g.uniform(), 2.0 * PI * g.uniform()),
        };
        if paths.iter().all(|q| (q.aod, q.aoa) != (p.aod, p.aoa)) {
            paths.push(p);
        }
    }
    paths
}

/// Noiseless observation of `paths` under identity probing.
fn clean_observation(cfg: &ScenarioConfig, s: &EstimationSetup, paths: &[TruePath]) -> Result<ObservationTensor, SimError> {
    let params = paths
        .iter()
        .map(|p| on_grid_path(&s.tx, &s.rx, &s.grid, cfg.symbol_duration_s, p.aod, p.aoa, p.doppler, p.delay, p.gain))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = MmWaveChannelSpec::new(*s.tx.geometry(), *s.rx.geometry(), params, cfg.carrier_hz, cfg.symbol_duration_s)?;
    Ok(observe(&spec, &s.grid, &CMatrix::identity(cfg.m, cfg.m), None)?)
}

/// Adds `CN(0, σ²)` with `σ²` set so the mean per-sample signal power over
/// the noise power equals `snr_db`.
fn add_noise(clean: &ObservationTensor, snr_db: f64, g: &mut GaussianStream) -> Result<ObservationTensor, SimError> {
    let count = clean.samples().iter().map(|s| s.len()).sum::<usize>() as f64;
    let sigma2 = clean.energy() / count / 10f64.powf(snr_db / 10.0);
    let data = clean
        .samples()
        .iter()
        .map(|s| s + g.complex_matrix(s.nrows(), s.ncols(), sigma2))
        .collect();
    Ok(ObservationTensor::new(
        *clean.grid(),
        clean.carrier_hz(),
        clean.symbol_duration_s(),
        clean.probing().clone(),
        data,
    )?)
}

/// The noisy observation that trial `trial` sees at sweep point `snr_index`.
pub fn estimation_observation(cfg: &ScenarioConfig, trial: usize, snr_index: usize) -> Result<ObservationTensor, SimError> {
    cfg.validate()?;
    if cfg.kind != ScenarioKind::MmwaveEstimation || trial >= cfg.trials || snr_index >= cfg.snr_db.len() {
        return Err(SimError::Config(format!("no observation for trial {trial} at SNR point {snr_index}")));
    }
    let s = estimation_setup(cfg)?;
    let mut g = GaussianStream::with_stream(cfg.seed, trial as u64);
    let clean = clean_observation(cfg, &s, &draw_paths(cfg, &mut g))?;
    let mut obs = None;
    for &snr in &cfg.snr_db[..=snr_index] {
        obs = Some(add_noise(&clean, snr, &mut g)?);
    }
    Ok(obs.expect("sweep is non-empty"))
}

fn estimation_trial(cfg: &ScenarioConfig, g: &mut GaussianStream) -> Result<Vec<Vec<Metric>>, SimError> {
    let s = estimation_setup(cfg)?;
    let truth = draw_paths(cfg, g);
    let clean = clean_observation(cfg, &s, &truth)?;
    let l = truth.len() as f64;
    cfg.snr_db
        .iter()
        .map(|&snr| {
            let obs = add_noise(&clean, snr, g)?;
            let report = estimate_paths(&obs, &s.tx, &s.rx, cfg.l, cfg.stage_order.into())?;
            let (mut angle_err, mut doppler_err, mut delay_err, mut any_err) = (0.0, 0.0, 0.0, 0.0);
            let mut gain_sq = Vec::new();
            for p in &truth {
                match report.paths.iter().find(|e| (e.aod_index, e.aoa_index) == (p.aod, p.aoa)) {
                    Some(e) => {
                        let dop = (e.doppler_bin != p.doppler) as u8 as f64;
                        let del = (e.delay_bin != p.delay) as u8 as f64;
                        doppler_err += dop;
                        delay_err += del;
                        any_err += dop.max(del);
                        gain_sq.push((e.gain - p.gain).norm_sqr());
                    }
                    None => {
                        angle_err += 1.0;
                        doppler_err += 1.0;
                        delay_err += 1.0;
                        any_err += 1.0;
                    }
                }
            }
            let mut ms = vec![
                metric("bin_error_rate", any_err / l),
                metric("angle_error_rate", angle_err / l),
                metric("doppler_error_rate", doppler_err / l),
                metric("delay_error_rate", delay_err / l),
            ];
            if !gain_sq.is_empty() {
                ms.push(metric("gain_rmse", (gain_sq.iter().sum::<f64>() / gain_sq.len() as f64).sqrt()));
            }
            Ok(ms)
        })
        .collect()
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

/// `l` ZF scanning beams toward random grid directions serve as the sensing
/// precoder; the communication beam is the unit MRT vector of a random
/// `n_c × m` channel. Each beam is shifted by one grid step and its peak
/// checked.
fn beam_scan_trial(cfg: &ScenarioConfig, g: &mut GaussianStream) -> Result<Vec<Vec<Metric>>, SimError> {
    let geom = ArrayGeometry::half_wavelength(cfg.m)?;
    let dict = build_dictionary(&geom, cfg.d)?;
    let hc = ChannelMatrix::new(g.complex_matrix(cfg.n_c, cfg.m, 1.0))?;
    let mut targets: Vec<usize> = Vec::with_capacity(cfg.l);
    while targets.len() < cfg.l {
        let i = g.index(cfg.d);
        if !targets.contains(&i) {
            targets.push(i);
        }
    }
    let mut desired = CMatrix::zeros(cfg.d, cfg.l);
    for (col, &i) in targets.iter().enumerate() {
        desired[(i, col)] = Complex64::new(1.0, 0.0);
    }
    let fs = Precoder::unit_columns(zf_scanning_precoder(&dict, &desired)?.matrix().clone())?;
    let fc = Precoder::unit_columns(CMatrix::from_column_slice(cfg.m, 1, hc.matrix().row(0).adjoint().as_slice()))?;
    let noise = NoiseSpec::new(cfg.noise)?;

    let shifted = shift_schedule(&fs, &geom, 1.0 / cfg.d as f64, 1)?;
    let mut shift_error = 0.0f64;
    for i in 0..cfg.l {
        let before = argmax(&beampattern(&dict, &fs.column(i))?);
        let after = argmax(&beampattern(&dict, &shifted.column(i))?);
        shift_error = shift_error.max(((after + cfg.d - before) % cfg.d).abs_diff(1) as f64);
    }

    let (fc0, fs0) = (fc.column(0), fs.column(0));
    cfg.rho
        .iter()
        .map(|&rho| {
            let phase = optimize_coherent_phase(&hc, &fc0, &fs0, rho)?.phase;
            let mut ms = vec![
                metric("shift_peak_error", shift_error),
                metric("coherent_gain", coherent_gain(&hc, &fc0, &fs0, rho, phase)),
                metric("zero_phase_gain", coherent_gain(&hc, &fc0, &fs0, rho, 0.0)),
            ];
            if rho > 0.0 && rho < 1.0 {
                let b = optimize_beta_sinr(&hc, &fc, &fs, rho, BetaMode::Full, SinrModel::Coherent, &noise)?;
                ms.push(metric("sinr_initial", b.initial_sinr));
                ms.push(metric("sinr_optimized", b.sinr));
            }
            Ok(ms)
        })
        .collect()
}
