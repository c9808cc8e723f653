//! Channel parameter recovery from OFDM observations.
//!
//! Observations follow `Y_{n,t} = H_{n,t} P + Z_{n,t}` for subcarrier
//! `n = 0..N_sc−1` (frequency `f_c + nΔf`) and symbol `t = 1..T`, where `P`
//! is a known `M × Q` probing matrix and `H_{n,t}` the geometric channel.
//! Estimation runs in stages: a greedy dictionary search for the angle pairs,
//! then per path a Doppler transform over symbols, a delay transform over
//! subcarriers and a gain/phase correction.
//!
//! # File format
//!
//! Little-endian, no padding:
//!
//! | field | type |
//! |---|---|
//! | magic `ISACOBS1` | 8 bytes |
//! | `n_subcarriers`, `n_symbols`, `n_rx`, `n_tx`, `n_probe` | u32 each |
//! | `carrier_hz`, `subcarrier_spacing_hz`, `symbol_duration_s` | f64 each |
//! | probing matrix, row-major `n_tx × n_probe` | (re, im) f64 pairs |
//! | observations, order `[n][t][rx][probe]` | (re, im) f64 pairs |

mod search;
mod stages;

use std::io::{Read, Write};
use std::path::Path;

use crate::channel::{synthesize_subcarrier_channel, MmWaveChannelSpec, NoiseSpec, PathParameters, SteeringDictionary};
use crate::error::{domain, mismatch, shape, IsacError, Result};
use crate::linalg::{frobenius_sq, is_finite};
use crate::rng::GaussianStream;
use crate::{CMatrix, Complex64};

pub use search::{beam_search_angles, AngleTrack, BeamSearchResult};
pub use stages::{
    doppler_correction, estimate_delay, estimate_doppler, estimate_gain_phase, estimate_paths, EstimationReport,
    PathEstimate, SpectralPeak, StageOrder,
};

const MAGIC: &[u8; 8] = b"ISACOBS1";

/// OFDM sampling grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfdmGrid {
    pub n_subcarriers: usize,
    pub n_symbols: usize,
    pub subcarrier_spacing_hz: f64,
}

impl OfdmGrid {
    pub fn new(n_subcarriers: usize, n_symbols: usize, subcarrier_spacing_hz: f64) -> Result<Self> {
        if n_subcarriers == 0 || n_symbols == 0 {
            return domain("OFDM grid needs at least one subcarrier and one symbol");
        }
        if !(subcarrier_spacing_hz > 0.0 && subcarrier_spacing_hz.is_finite()) {
            return domain(format!("subcarrier spacing must be positive, got {subcarrier_spacing_hz}"));
        }
        Ok(Self { n_subcarriers, n_symbols, subcarrier_spacing_hz })
    }

    /// Delay of bin `k`: `k / (N_sc Δf)`.
    pub fn delay_of_bin(&self, bin: usize) -> f64 {
        bin as f64 / (self.n_subcarriers as f64 * self.subcarrier_spacing_hz)
    }

    /// Doppler of bin `k`: `k / (T T_s)`.
    pub fn doppler_of_bin(&self, bin: usize, symbol_duration_s: f64) -> f64 {
        bin as f64 / (self.n_symbols as f64 * symbol_duration_s)
    }
}

/// Received samples over subcarriers, symbols, receive elements and probes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTensor {
    grid: OfdmGrid,
    carrier_hz: f64,
    symbol_duration_s: f64,
    probing: CMatrix,
    /// `n_rx × n_probe` per sample, index `n · T + (t − 1)`.
    data: Vec<CMatrix>,
}

impl ObservationTensor {
    pub fn new(
        grid: OfdmGrid,
        carrier_hz: f64,
        symbol_duration_s: f64,
        probing: CMatrix,
        data: Vec<CMatrix>,
    ) -> Result<Self> {
        if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
            return domain(format!("carrier must be positive, got {carrier_hz}"));
        }
        if !(symbol_duration_s > 0.0 && symbol_duration_s.is_finite()) {
            return domain(format!("symbol duration must be positive, got {symbol_duration_s}"));
        }
        if probing.nrows() == 0 || probing.ncols() == 0 || !is_finite(&probing) {
            return domain("probing matrix must be non-empty and finite");
        }
        let expected = grid.n_subcarriers * grid.n_symbols;
        if data.len() != expected {
            return mismatch("ObservationTensor", format!("{expected} samples"), format!("{}", data.len()));
        }
        let rx = data[0].nrows();
        for d in &data {
            if d.nrows() != rx || d.ncols() != probing.ncols() || rx == 0 {
                return mismatch("ObservationTensor", format!("{rx}x{}", probing.ncols()), shape(d));
            }
            if !is_finite(d) {
                return domain("observations have non-finite entries");
            }
        }
        Ok(Self { grid, carrier_hz, symbol_duration_s, probing, data })
    }

    pub fn grid(&self) -> &OfdmGrid {
        &self.grid
    }

    pub fn n_subcarriers(&self) -> usize {
        self.grid.n_subcarriers
    }

    pub fn n_symbols(&self) -> usize {
        self.grid.n_symbols
    }

    pub fn n_rx(&self) -> usize {
        self.data[0].nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.probing.nrows()
    }

    pub fn n_probe(&self) -> usize {
        self.probing.ncols()
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn symbol_duration_s(&self) -> f64 {
        self.symbol_duration_s
    }

    pub fn probing(&self) -> &CMatrix {
        &self.probing
    }

    /// Sample at subcarrier `n` (0-based) and symbol `t` (1-based).
    pub fn sample(&self, n: usize, t: usize) -> &CMatrix {
        &self.data[n * self.grid.n_symbols + (t - 1)]
    }

    pub fn samples(&self) -> &[CMatrix] {
        &self.data
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(frobenius_sq).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + 16 * (self.probing.len() + self.data.len() * self.data[0].len()));
        out.extend_from_slice(MAGIC);
        for v in [self.n_subcarriers(), self.n_symbols(), self.n_rx(), self.n_tx(), self.n_probe()] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in [self.carrier_hz, self.grid.subcarrier_spacing_hz, self.symbol_duration_s] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut push = |z: Complex64| {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        };
        for r in 0..self.n_tx() {
            for q in 0..self.n_probe() {
                push(self.probing[(r, q)]);
            }
        }
        for d in &self.data {
            for r in 0..d.nrows() {
                for q in 0..d.ncols() {
                    push(d[(r, q)]);
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(IsacError::Format("bad magic".into()));
        }
        let mut dims = [0usize; 5];
        for d in dims.iter_mut() {
            *d = u32::from_le_bytes(cur.take(4)?.try_into().expect("4 bytes")) as usize;
        }
        let [n_sc, n_sym, n_rx, n_tx, n_probe] = dims;
        if dims.contains(&0) {
            return Err(IsacError::Format(format!("zero dimension in header {dims:?}")));
        }
        let carrier = cur.f64()?;
        let spacing = cur.f64()?;
        let ts = cur.f64()?;
        let needed = (n_tx * n_probe)
            .checked_add(n_sc.checked_mul(n_sym).and_then(|s| s.checked_mul(n_rx * n_probe)).unwrap_or(usize::MAX))
            .and_then(|c| c.checked_mul(16))
            .ok_or_else(|| IsacError::Format("dimensions overflow".into()))?;
        if bytes.len() - cur.pos != needed {
            return Err(IsacError::Format(format!(
                "payload is {} bytes, header implies {needed}",
                bytes.len() - cur.pos
            )));
        }
        let mut probing = CMatrix::zeros(n_tx, n_probe);
        for r in 0..n_tx {
            for q in 0..n_probe {
                probing[(r, q)] = cur.complex()?;
            }
        }
        let mut data = Vec::with_capacity(n_sc * n_sym);
        for _ in 0..n_sc * n_sym {
            let mut m = CMatrix::zeros(n_rx, n_probe);
            for r in 0..n_rx {
                for q in 0..n_probe {
                    m[(r, q)] = cur.complex()?;
                }
            }
            data.push(m);
        }
        let grid = OfdmGrid::new(n_sc, n_sym, spacing).map_err(|e| IsacError::Format(e.to_string()))?;
        Self::new(grid, carrier, ts, probing, data).map_err(|e| IsacError::Format(e.to_string()))
    }

    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(path: impl AsRef<Path>) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(IsacError::Format("unexpected end of data".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn complex(&mut self) -> Result<Complex64> {
        Ok(Complex64::new(self.f64()?, self.f64()?))
    }
}

/// Path whose angles, Doppler and delay sit exactly on the given grids.
#[allow(clippy::too_many_arguments)]
pub fn on_grid_path(
    dict_tx: &SteeringDictionary,
    dict_rx: &SteeringDictionary,
    grid: &OfdmGrid,
    symbol_duration_s: f64,
    aod_index: usize,
    aoa_index: usize,
    doppler_bin: usize,
    delay_bin: usize,
    gain: Complex64,
) -> Result<PathParameters> {
    if aod_index >= dict_tx.len() || aoa_index >= dict_rx.len() {
        return domain(format!("angle indices ({aod_index}, {aoa_index}) outside the dictionaries"));
    }
    if doppler_bin >= grid.n_symbols || delay_bin >= grid.n_subcarriers {
        return domain(format!("bins ({doppler_bin}, {delay_bin}) outside the OFDM grid"));
    }
    let p = PathParameters {
        gain,
        delay: grid.delay_of_bin(delay_bin),
        doppler: grid.doppler_of_bin(doppler_bin, symbol_duration_s),
        aod: dict_tx.grid_angles()[aod_index],
        aoa: dict_rx.grid_angles()[aoa_index],
    };
    p.validate()?;
    Ok(p)
}

/// Forward model: `Y_{n,t} = H_{n,t} P (+ Z_{n,t})`, with `Z` i.i.d.
/// `CN(0, σ²)` drawn from `rng` in `(n, t)` order when `noise` is given.
pub fn observe(
    spec: &MmWaveChannelSpec,
    grid: &OfdmGrid,
    probing: &CMatrix,
    noise: Option<(&NoiseSpec, &mut GaussianStream)>,
) -> Result<ObservationTensor> {
    if probing.nrows() != spec.tx.element_count() {
        return mismatch("observe", format!("{} x Q probing", spec.tx.element_count()), shape(probing));
    }
    let mut noise = noise;
    let mut data = Vec::with_capacity(grid.n_subcarriers * grid.n_symbols);
    for n in 0..grid.n_subcarriers {
        for t in 1..=grid.n_symbols {
            let h = synthesize_subcarrier_channel(spec, t, n, grid.subcarrier_spacing_hz)?;
            let mut y = h.matrix() * probing;
            if let Some((spec, rng)) = noise.as_mut() {
                y += rng.complex_matrix(y.nrows(), y.ncols(), spec.variance());
            }
            data.push(y);
        }
    }
    ObservationTensor::new(*grid, spec.carrier_hz, spec.symbol_duration_s, probing.clone(), data)
}
