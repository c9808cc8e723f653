//! Numerical building blocks for MIMO integrated sensing and communication.
//!
//! * [`channel`]: ULA steering vectors, geometric mmWave channels, virtual
//!   (dictionary) representations and seeded random channels.
//! * [`comm`]: mutual information, water-filling and capacity of a known channel.
//! * [`sensing`]: estimation rate, optimal probing waveform and sensing capacity.
//! * [`isac`]: joint waveform design (weighted mutual information and the
//!   constrained least-squares family).
//! * [`precoding`]: ZF scanning beams, beam shifting and superposition precoding.
//! * [`estimation`]: angle / Doppler / delay / gain recovery from OFDM observations.

pub mod channel;
pub mod comm;
pub mod error;
pub mod estimation;
pub mod isac;
pub(crate) mod linalg;
pub mod precoding;
pub mod rng;
pub mod sensing;

pub use num_complex::Complex64;

pub type CMatrix = nalgebra::DMatrix<Complex64>;
pub type CVector = nalgebra::DVector<Complex64>;

pub use channel::{
    build_dictionary, random_channel, steering_vector, synthesize_channel, virtual_coefficients,
    ArrayGeometry, ChannelMatrix, MmWaveChannelSpec, NoiseSpec, PathParameters, SteeringDictionary,
};
pub use comm::{comm_capacity, mutual_information_comm, waterfill, CapacityResult, PowerAllocation, TransmitCovariance};
pub use error::{IsacError, Result};
pub use rng::GaussianStream;
pub use sensing::{
    estimation_rate, optimal_sensing_waveform, sensing_capacity, ChannelCovariance,
    EstimationRateResult, SensingWaveform,
};
pub use estimation::{
    beam_search_angles, estimate_delay, estimate_doppler, estimate_gain_phase, estimate_paths, observe,
    EstimationReport, ObservationTensor, OfdmGrid, PathEstimate, StageOrder,
};
pub use isac::{
    interference_power, solve_constant_modulus, solve_covariance_constrained, solve_pareto_tradeoff,
    solve_per_antenna, RadarCovariance, SymbolBlock, TradeoffWeight, WaveformBlock, WeightedMiProblem,
};
pub use precoding::{
    compose_isac_signal, optimize_beta_sinr, optimize_coherent_phase, shift_schedule, zf_scanning_precoder,
    Precoder, SuperpositionConfig, SuperpositionMode,
};
