use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use isac_core::StageOrder;
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    CapacitySweep,
    SensingSweep,
    IsacTradeoff,
    MmwaveEstimation,
    BeamScan,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::CapacitySweep,
        ScenarioKind::SensingSweep,
        ScenarioKind::IsacTradeoff,
        ScenarioKind::MmwaveEstimation,
        ScenarioKind::BeamScan,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::CapacitySweep => "capacity_sweep",
            ScenarioKind::SensingSweep => "sensing_sweep",
            ScenarioKind::IsacTradeoff => "isac_tradeoff",
            ScenarioKind::MmwaveEstimation => "mmwave_estimation",
            ScenarioKind::BeamScan => "beam_scan",
        }
    }

    /// Name of the swept parameter.
    pub fn param_name(self) -> &'static str {
        match self {
            ScenarioKind::CapacitySweep | ScenarioKind::SensingSweep => "power",
            ScenarioKind::IsacTradeoff | ScenarioKind::BeamScan => "rho",
            ScenarioKind::MmwaveEstimation => "snr_db",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| SimError::Config(format!("unknown scenario kind `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOrderConfig {
    #[default]
    DopplerFirst,
    DelayFirst,
}

impl From<StageOrderConfig> for StageOrder {
    fn from(o: StageOrderConfig) -> Self {
        match o {
            StageOrderConfig::DopplerFirst => StageOrder::DopplerFirst,
            StageOrderConfig::DelayFirst => StageOrder::DelayFirst,
        }
    }
}

/// One scenario, read from TOML. Every field has a default.
///
/// Dimensions: `m` transmit antennas, `n_c` communication receive antennas,
/// `n_s` sensing receive antennas, `k` users, `t` transmissions (OFDM symbols
/// for estimation), `n_sc` subcarriers, `d` dictionary size, `l` paths
/// (sensing beams in `beam_scan`).
///
/// Trial `i` draws everything from `GaussianStream::with_stream(seed, i)`,
/// so results do not depend on how trials are scheduled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub m: usize,
    pub n_c: usize,
    pub n_s: usize,
    pub k: usize,
    pub t: usize,
    pub n_sc: usize,
    pub d: usize,
    pub l: usize,
    /// Per-transmission power budget `P_t`.
    pub power: f64,
    pub noise: f64,
    pub rho: Vec<f64>,
    pub snr_db: Vec<f64>,
    /// Power points for the capacity and sensing sweeps.
    pub powers: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub carrier_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub symbol_duration_s: f64,
    pub stage_order: StageOrderConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            kind: ScenarioKind::CapacitySweep,
            m: 4,
            n_c: 2,
            n_s: 4,
            k: 2,
            t: 8,
            n_sc: 16,
            d: 8,
            l: 2,
            power: 1.0,
            noise: 1.0,
            rho: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            snr_db: vec![0.0, 10.0, 20.0, 30.0],
            powers: vec![1.0, 2.0, 4.0],
            trials: 10,
            seed: 0,
            out: None,
            carrier_hz: 28e9,
            subcarrier_spacing_hz: 120e3,
            symbol_duration_s: 1e-5,
            stage_order: StageOrderConfig::DopplerFirst,
        }
    }
}

impl ScenarioConfig {
    pub fn new(kind: ScenarioKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, SimError> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SimError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String, SimError> {
        toml::to_string(self).map_err(|e| SimError::Config(e.to_string()))
    }

    /// Values of the swept parameter, in output order.
    pub fn sweep(&self) -> &[f64] {
        match self.kind {
            ScenarioKind::CapacitySweep | ScenarioKind::SensingSweep => &self.powers,
            ScenarioKind::IsacTradeoff | ScenarioKind::BeamScan => &self.rho,
            ScenarioKind::MmwaveEstimation => &self.snr_db,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        for (name, v) in [
            ("m", self.m),
            ("n_c", self.n_c),
            ("n_s", self.n_s),
            ("k", self.k),
            ("t", self.t),
            ("n_sc", self.n_sc),
            ("d", self.d),
            ("l", self.l),
        ] {
            if v == 0 {
                return bad(format!("dimension `{name}` must be positive"));
            }
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        for (name, v) in [
            ("power", self.power),
            ("noise", self.noise),
            ("carrier_hz", self.carrier_hz),
            ("subcarrier_spacing_hz", self.subcarrier_spacing_hz),
            ("symbol_duration_s", self.symbol_duration_s),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("`{name}` must be positive and finite, got {v}"));
            }
        }
        if let Some(r) = self.rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return bad(format!("rho values must lie in [0, 1], got {r}"));
        }
        if let Some(p) = self.powers.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return bad(format!("powers must be positive and finite, got {p}"));
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return bad(format!("snr_db values must be finite, got {s}"));
        }
        if self.sweep().is_empty() {
            return bad(format!("`{}` list is empty", self.sweep_field()));
        }
        match self.kind {
            ScenarioKind::SensingSweep | ScenarioKind::IsacTradeoff if self.t < self.m => {
                bad(format!("t = {} transmissions cannot probe m = {} antennas", self.t, self.m))
            }
            ScenarioKind::MmwaveEstimation if self.d < self.m.max(self.n_s) => {
                bad(format!("dictionary size d = {} below the array sizes", self.d))
            }
            ScenarioKind::MmwaveEstimation if self.l > self.d * self.d => {
                bad(format!("l = {} paths exceed the {} angle pairs", self.l, self.d * self.d))
            }
            ScenarioKind::BeamScan if self.d < self.m || self.l > self.d => {
                bad(format!("beam_scan needs m <= d and l <= d, got m = {}, d = {}, l = {}", self.m, self.d, self.l))
            }
            _ => Ok(()),
        }
    }

    fn sweep_field(&self) -> &'static str {
        match self.kind {
            ScenarioKind::CapacitySweep | ScenarioKind::SensingSweep => "powers",
            ScenarioKind::IsacTradeoff | ScenarioKind::BeamScan => "rho",
            ScenarioKind::MmwaveEstimation => "snr_db",
        }
    }
}
