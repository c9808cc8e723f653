//! Weighted mutual-information design over the transmit covariance.
//!
//! The communication term is `log2 det(I + σ⁻² H_c Q H_cᴴ)`. The sensing
//! term identifies the probing Gram matrix with `Xᴴ X = T·Q`, giving
//! `(N_s/T) log2 det(I + σ⁻² T Lᴴ Q L)` with `Q_h = L Lᴴ`. Each term is
//! divided by its own single-objective optimum so both endpoints score 1.

use std::f64::consts::LN_2;

use nalgebra::Cholesky;

use crate::channel::{ChannelMatrix, NoiseSpec};
use crate::comm::{comm_capacity, TransmitCovariance};
use crate::error::{domain, mismatch, shape, IsacError, Result};
use crate::linalg::{frobenius_sq, log2_det_hpd, project_psd_trace_ball};
use crate::sensing::{sensing_capacity, ChannelCovariance};
use crate::CMatrix;

use super::TradeoffWeight;

const MAX_ITERATIONS: usize = 10_000;
const STATIONARITY_TOL: f64 = 1e-10;
const ACCEPT_TOL: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct WeightedMiProblem {
    hc: CMatrix,
    /// `M × G` square-root factor of `Q_h`.
    sensing_factor: CMatrix,
    rho: f64,
    budget: f64,
    noise: f64,
    transmissions: usize,
    sensing_rx: usize,
    comm_norm: f64,
    sensing_norm: f64,
}

#[derive(Debug, Clone)]
pub struct WeightedMiSolution {
    pub covariance: TransmitCovariance,
    pub objective: f64,
    pub iterations: usize,
    /// `‖Π(Q + ∇f) − Q‖_F` at the returned point.
    pub stationarity: f64,
}

impl WeightedMiProblem {
    /// Normalizers are the communication capacity at `budget` and the sensing
    /// capacity with `transmissions` probes of power `budget` each.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        hc: &ChannelMatrix,
        qh: &ChannelCovariance,
        rho: TradeoffWeight,
        budget: f64,
        noise: &NoiseSpec,
        transmissions: usize,
        sensing_rx: usize,
    ) -> Result<Self> {
        if !(budget > 0.0 && budget.is_finite()) {
            return domain(format!("power budget must be positive, got {budget}"));
        }
        let comm = comm_capacity(hc, budget, noise)?.bits_per_symbol;
        let sens = sensing_capacity(qh, sensing_rx, transmissions, budget, noise)?.bits_per_transmission;
        Self::with_normalizers(hc, qh, rho, budget, noise, transmissions, sensing_rx, comm, sens)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_normalizers(
        hc: &ChannelMatrix,
        qh: &ChannelCovariance,
        rho: TradeoffWeight,
        budget: f64,
        noise: &NoiseSpec,
        transmissions: usize,
        sensing_rx: usize,
        comm_norm: f64,
        sensing_norm: f64,
    ) -> Result<Self> {
        if hc.cols() != qh.dim() {
            return mismatch("WeightedMiProblem", format!("{0}x{0} covariance", hc.cols()), shape(qh.matrix()));
        }
        if !(budget > 0.0 && budget.is_finite()) {
            return domain(format!("power budget must be positive, got {budget}"));
        }
        if transmissions == 0 {
            return domain("need at least one transmission");
        }
        let r = rho.rho();
        if r > 0.0 && !(comm_norm > 0.0) {
            return domain("communication normalizer is zero");
        }
        if r < 1.0 && !(sensing_norm > 0.0) {
            return domain("sensing normalizer is zero");
        }
        let (values, vectors) = qh.eigen();
        let mut sensing_factor = vectors;
        for (g, v) in values.iter().enumerate() {
            sensing_factor.column_mut(g).scale_mut(v.sqrt());
        }
        Ok(Self {
            hc: hc.matrix().clone(),
            sensing_factor,
            rho: r,
            budget,
            noise: noise.variance(),
            transmissions,
            sensing_rx,
            comm_norm,
            sensing_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.hc.ncols()
    }

    pub fn comm_normalizer(&self) -> f64 {
        self.comm_norm
    }

    pub fn sensing_normalizer(&self) -> f64 {
        self.sensing_norm
    }

    /// Unnormalized communication mutual information in bits.
    pub fn comm_bits(&self, q: &CMatrix) -> f64 {
        let k = self.hc.nrows();
        log2_det_hpd(&(CMatrix::identity(k, k) + (&self.hc * q * self.hc.adjoint()).unscale(self.noise)))
    }

    /// Unnormalized sensing estimation rate in bits per transmission.
    pub fn sensing_bits(&self, q: &CMatrix) -> f64 {
        let l = &self.sensing_factor;
        let g = l.ncols();
        if g == 0 {
            return 0.0;
        }
        let t = self.transmissions as f64;
        let inner = CMatrix::identity(g, g) + (l.adjoint() * q * l).scale(t / self.noise);
        self.sensing_rx as f64 / t * log2_det_hpd(&inner)
    }

    fn weights(&self) -> (f64, f64) {
        let wc = if self.rho > 0.0 { self.rho / self.comm_norm } else { 0.0 };
        let ws = if self.rho < 1.0 { (1.0 - self.rho) / self.sensing_norm } else { 0.0 };
        (wc, ws)
    }

    pub fn objective(&self, q: &TransmitCovariance) -> Result<f64> {
        if q.dim() != self.dim() {
            return mismatch("weighted objective", format!("{0}x{0}", self.dim()), shape(q.matrix()));
        }
        Ok(self.value(q.matrix()))
    }

    fn value(&self, q: &CMatrix) -> f64 {
        let (wc, ws) = self.weights();
        let mut v = 0.0;
        if wc > 0.0 {
            v += wc * self.comm_bits(q);
        }
        if ws > 0.0 {
            v += ws * self.sensing_bits(q);
        }
        v
    }

    /// Euclidean gradient with respect to Hermitian `Q`.
    fn gradient(&self, q: &CMatrix) -> CMatrix {
        let m = self.dim();
        let (wc, ws) = self.weights();
        let mut grad = CMatrix::zeros(m, m);
        if wc > 0.0 {
            grad += weighted_logdet_gradient(&self.hc, q, self.noise, 1.0).scale(wc / LN_2);
        }
        if ws > 0.0 && self.sensing_factor.ncols() > 0 {
            let a = self.sensing_factor.adjoint();
            let t = self.transmissions as f64;
            let g = weighted_logdet_gradient(&a, q, self.noise, t);
            grad += g.scale(ws * self.sensing_rx as f64 / (t * LN_2));
        }
        (&grad + grad.adjoint()).scale(0.5)
    }

    fn project(&self, q: &CMatrix) -> CMatrix {
        project_psd_trace_ball(q, self.budget)
    }

    /// Projected gradient ascent from `(P/M)·I` with a backtracking step.
    pub fn optimize(&self) -> Result<WeightedMiSolution> {
        let m = self.dim();
        let mut q = CMatrix::identity(m, m).scale(self.budget / m as f64);
        let mut f = self.value(&q);
        let mut step = self.budget;
        let mut stationarity = f64::INFINITY;
        for iter in 0..MAX_ITERATIONS {
            let grad = self.gradient(&q);
            stationarity = frobenius_sq(&(self.project(&(&q + &grad)) - &q)).sqrt();
            if stationarity < STATIONARITY_TOL {
                return self.finish(q, f, iter, stationarity);
            }
            let mut accepted = false;
            for _ in 0..60 {
                let cand = self.project(&(&q + grad.scale(step)));
                let d = &cand - &q;
                let fc = self.value(&cand);
                let lin = (grad.adjoint() * &d).trace().re;
                if fc >= f + lin - frobenius_sq(&d) / (2.0 * step) - 1e-15 * f.abs() {
                    q = cand;
                    f = fc;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                // step underflow: at numerical stationarity
                return self.finish(q, f, iter, stationarity);
            }
            step *= 2.0;
        }
        if stationarity < ACCEPT_TOL {
            return self.finish(q, f, MAX_ITERATIONS, stationarity);
        }
        Err(IsacError::NotConverged {
            solver: "weighted mutual information",
            iterations: MAX_ITERATIONS,
            objective: f,
            best: Some(Box::new(q)),
        })
    }

    fn finish(&self, q: CMatrix, objective: f64, iterations: usize, stationarity: f64) -> Result<WeightedMiSolution> {
        if stationarity >= ACCEPT_TOL && stationarity.is_finite() {
            return Err(IsacError::NotConverged {
                solver: "weighted mutual information",
                iterations,
                objective,
                best: Some(Box::new(q)),
            });
        }
        Ok(WeightedMiSolution { covariance: TransmitCovariance::new(q)?, objective, iterations, stationarity })
    }
}

/// `Aᴴ (σ²/s I + A Q Aᴴ)⁻¹ A`, the gradient of `ln det(I + s σ⁻² A Q Aᴴ)`.
fn weighted_logdet_gradient(a: &CMatrix, q: &CMatrix, noise: f64, s: f64) -> CMatrix {
    let k = a.nrows();
    let inner = CMatrix::identity(k, k).scale(noise / s) + a * q * a.adjoint();
    let inner = (&inner + inner.adjoint()).scale(0.5);
    let inv = Cholesky::new(inner.clone())
        .map(|c| c.inverse())
        .or_else(|| inner.try_inverse())
        .unwrap_or_else(|| CMatrix::zeros(k, k));
    a.adjoint() * inv * a
}
