//! Greedy angle search over Kronecker dictionary atoms `a_rx(i) a_tx(j)ᵀ`.

use crate::channel::SteeringDictionary;
use crate::error::{domain, mismatch, shape, IsacError, Result};
use crate::linalg::frobenius_sq;
use crate::{CMatrix, Complex64};

use super::ObservationTensor;

const CONDITION_LIMIT: f64 = 1e10;

/// One selected atom with its coefficient over the OFDM grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleTrack {
    pub aod_index: usize,
    pub aoa_index: usize,
    /// `N_sc × T`, entry `(n, t − 1)`.
    pub series: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSearchResult {
    pub tracks: Vec<AngleTrack>,
    /// `Σ ‖Ĥ_{n,t}‖²` of the de-probed channel samples.
    pub input_energy: f64,
    pub residual_energy: f64,
    /// Best over second-best aggregated atom energy at each round.
    pub peak_ratios: Vec<f64>,
}

/// Removes the probing matrix: `Ĥ = Y P⁺` with `P⁺ = Pᴴ (P Pᴴ)⁻¹`.
fn deprobe(obs: &ObservationTensor) -> Result<Vec<CMatrix>> {
    let p = obs.probing();
    if p.ncols() < p.nrows() {
        return domain(format!(
            "{} probes cannot resolve {} transmit elements",
            p.ncols(),
            p.nrows()
        ));
    }
    let gram = p * p.adjoint();
    let sv = gram.singular_values();
    let cond = sv.max() / sv.min();
    if !(cond <= CONDITION_LIMIT) {
        return Err(IsacError::IllConditioned { condition: cond });
    }
    let pinv = p.adjoint() * gram.try_inverse().ok_or(IsacError::IllConditioned { condition: cond })?;
    Ok(obs.samples().iter().map(|y| y * &pinv).collect())
}

/// Greedy matching over atom pairs: each round picks the atom whose
/// coefficient energy summed over all subcarriers and symbols is largest,
/// then refits all selected atoms jointly by least squares and deflates.
///
/// Ties go to the lowest `(aoa_index, aod_index)` in row-major order.
pub fn beam_search_angles(
    obs: &ObservationTensor,
    dict_tx: &SteeringDictionary,
    dict_rx: &SteeringDictionary,
    num_paths: usize,
) -> Result<BeamSearchResult> {
    if dict_tx.geometry().element_count() != obs.n_tx() {
        return mismatch("beam_search_angles", format!("{} tx elements", obs.n_tx()), shape(dict_tx.matrix()));
    }
    if dict_rx.geometry().element_count() != obs.n_rx() {
        return mismatch("beam_search_angles", format!("{} rx elements", obs.n_rx()), shape(dict_rx.matrix()));
    }
    let (dr, dt) = (dict_rx.len(), dict_tx.len());
    if num_paths > dr * dt {
        return domain(format!("{num_paths} paths exceed the {} available atoms", dr * dt));
    }
    let h = deprobe(obs)?;
    let input_energy: f64 = h.iter().map(frobenius_sq).sum();
    let (n_sc, n_sym) = (obs.n_subcarriers(), obs.n_symbols());
    let (nr, nt) = (obs.n_rx(), obs.n_tx());
    let ar = dict_rx.matrix();
    let at_conj = dict_tx.matrix().conjugate();

    let mut selected: Vec<(usize, usize)> = Vec::new();
    let mut peak_ratios = Vec::new();
    let mut residual = h.clone();
    let mut coeffs: Vec<Vec<Complex64>> = vec![Vec::new(); h.len()];
    for _ in 0..num_paths {
        let mut score = vec![0.0; dr * dt];
        for r in &residual {
            let z = ar.adjoint() * r * &at_conj;
            for i in 0..dr {
                for j in 0..dt {
                    score[i * dt + j] += z[(i, j)].norm_sqr();
                }
            }
        }
        let best = (0..score.len()).fold(0, |k, i| if score[i] > score[k] { i } else { k });
        let second = (0..score.len()).filter(|&i| i != best).map(|i| score[i]).fold(0.0, f64::max);
        let total_residual: f64 = residual.iter().map(frobenius_sq).sum();
        if score[best] <= 1e-24 * input_energy.max(f64::MIN_POSITIVE) || total_residual <= 1e-26 * input_energy {
            return domain(format!(
                "observations exhausted after {} of {num_paths} paths",
                selected.len()
            ));
        }
        let pair = (best / dt, best % dt);
        if selected.contains(&pair) {
            return domain(format!("atom {pair:?} selected twice; paths are not resolvable on this grid"));
        }
        selected.push(pair);
        peak_ratios.push(if second > 0.0 { (score[best] / second).sqrt() } else { f64::INFINITY });

        // joint least squares on vec(atoms)
        let k = selected.len();
        let mut phi = CMatrix::zeros(nr * nt, k);
        for (c, &(i, j)) in selected.iter().enumerate() {
            let atom = ar.column(i) * dict_tx.matrix().column(j).transpose();
            for (idx, v) in atom.iter().enumerate() {
                phi[(idx, c)] = *v;
            }
        }
        let gram = phi.adjoint() * &phi;
        let gram_inv = gram
            .try_inverse()
            .ok_or_else(|| IsacError::Domain("selected atoms are linearly dependent".into()))?;
        let proj = gram_inv * phi.adjoint();
        for (s, sample) in h.iter().enumerate() {
            let v = CMatrix::from_column_slice(nr * nt, 1, sample.as_slice());
            let c = &proj * &v;
            let fit = &phi * &c;
            residual[s] = sample - CMatrix::from_column_slice(nr, nt, fit.as_slice());
            coeffs[s] = c.iter().copied().collect();
        }
    }

    let tracks = selected
        .iter()
        .enumerate()
        .map(|(c, &(i, j))| AngleTrack {
            aoa_index: i,
            aod_index: j,
            series: CMatrix::from_fn(n_sc, n_sym, |n, t| coeffs[n * n_sym + t][c]),
        })
        .collect();
    Ok(BeamSearchResult {
        tracks,
        input_energy,
        residual_energy: residual.iter().map(frobenius_sq).sum(),
        peak_ratios,
    })
}
