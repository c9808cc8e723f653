//! Small dense helpers shared by the solvers. Everything here works on
//! `DMatrix<Complex64>` and assumes problem sizes in the tens.

use std::f64::consts::PI;

use nalgebra::{Cholesky, SymmetricEigen};

use crate::error::{domain, Result};
use crate::{CMatrix, Complex64};

/// Relative threshold below which an eigenvalue (or squared singular value)
/// counts as zero.
pub(crate) const RANK_TOL: f64 = 1e-12;

/// Eigen-decomposition of a Hermitian matrix with eigenvalues sorted in
/// descending order; `vectors` column `i` belongs to `values[i]`.
#[derive(Debug, Clone)]
pub(crate) struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn new(m: &CMatrix) -> Self {
        let n = m.nrows();
        if n == 0 {
            return Self { values: vec![], vectors: CMatrix::zeros(0, 0) };
        }
        let eig = SymmetricEigen::new(hermitian_part(m));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        Self { values, vectors }
    }

    /// Number of eigenvalues above `RANK_TOL * max(eigenvalue)`.
    pub fn rank(&self) -> usize {
        let max = self.values.first().copied().unwrap_or(0.0);
        if max <= 0.0 {
            return 0;
        }
        self.values.iter().filter(|&&v| v > RANK_TOL * max).count()
    }

}

pub(crate) fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub(crate) fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub(crate) fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub(crate) fn trace_re(m: &CMatrix) -> f64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)].re).sum()
}

/// Checks Hermitian symmetry and positive semi-definiteness with a tolerance
/// scaled by `max(1, ‖m‖_F)`.
pub(crate) fn validate_psd(m: &CMatrix, tol: f64, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return domain(format!("{what} must be square, got {}x{}", m.nrows(), m.ncols()));
    }
    if !is_finite(m) {
        return domain(format!("{what} has non-finite entries"));
    }
    let scale = frobenius_sq(m).sqrt().max(1.0);
    let skew = frobenius_sq(&(m - m.adjoint())).sqrt();
    if skew > tol * scale {
        return domain(format!("{what} is not Hermitian (skew norm {skew:.3e})"));
    }
    let eig = HermitianEigen::new(m);
    if let Some(&min) = eig.values.last() {
        if min < -tol * scale {
            return domain(format!("{what} is not positive semi-definite (eigenvalue {min:.3e})"));
        }
    }
    Ok(())
}

/// `log2 det(m)` for a Hermitian positive definite matrix.
pub(crate) fn log2_det_hpd(m: &CMatrix) -> f64 {
    let h = hermitian_part(m);
    match Cholesky::new(h.clone()) {
        Some(chol) => {
            let l = chol.l();
            2.0 * (0..l.nrows()).map(|i| l[(i, i)].re.ln()).sum::<f64>() / std::f64::consts::LN_2
        }
        None => HermitianEigen::new(&h).values.iter().map(|v| v.log2()).sum(),
    }
}

/// `log2 |det(m)|` for a general square matrix via LU.
pub(crate) fn log2_abs_det(m: &CMatrix) -> f64 {
    let lu = m.clone().lu();
    let u = lu.u();
    (0..u.nrows()).map(|i| u[(i, i)].norm().ln()).sum::<f64>() / std::f64::consts::LN_2
}

/// Unitary DFT matrix, entry `(k, n) = exp(-j2πkn/N)/√N`.
pub(crate) fn unitary_dft(n: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |k, m| {
        let phase = -2.0 * PI * ((k * m) % n) as f64 / n as f64;
        Complex64::from_polar(scale, phase)
    })
}

/// Euclidean projection of `values` onto `{v ≥ 0, Σv ≤ cap}`.
pub(crate) fn project_capped_simplex(values: &[f64], cap: f64) -> Vec<f64> {
    let clipped: Vec<f64> = values.iter().map(|v| v.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= cap {
        return clipped;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut shift = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        prefix += v;
        let candidate = (prefix - cap) / (k + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        } else {
            break;
        }
    }
    values.iter().map(|v| (v - shift).max(0.0)).collect()
}

/// Projection onto the trace-capped PSD cone `{Q ⪰ 0, Tr Q ≤ cap}`.
pub(crate) fn project_psd_trace_ball(m: &CMatrix, cap: f64) -> CMatrix {
    let eig = HermitianEigen::new(m);
    let projected = project_capped_simplex(&eig.values, cap);
    let n = projected.len();
    let mut scaled = eig.vectors.clone();
    for c in 0..n {
        scaled.column_mut(c).scale_mut(projected[c]);
    }
    hermitian_part(&(scaled * eig.vectors.adjoint()))
}

/// Global minimizer of `tr(X^H A X) − 2 Re tr(X^H B)` subject to
/// `‖X‖_F² = energy`, for Hermitian `A` (n×n) and `B` (n×k).
///
/// Stationary points satisfy `(A + λI) X = B`; the global one has
/// `A + λI ⪰ 0`, so the multiplier is found by bisection on
/// `μ = λ + λ_min(A) > 0` where `‖X(μ)‖_F²` is strictly decreasing.
pub(crate) fn min_quadratic_on_sphere(a: &CMatrix, b: &CMatrix, energy: f64) -> CMatrix {
    let n = a.nrows();
    let k = b.ncols();
    let eig = HermitianEigen::new(a);
    // ascending order is more natural here
    let vals: Vec<f64> = eig.values.iter().rev().copied().collect();
    let vecs = CMatrix::from_fn(n, n, |r, c| eig.vectors[(r, n - 1 - c)]);
    let a_min = vals[0];
    let mut rotated = vecs.adjoint() * b;
    let mut weights: Vec<f64> = (0..n)
        .map(|i| rotated.row(i).iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let total: f64 = weights.iter().sum();

    let scale = vals.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let gap_tol = 1e-12 * scale;
    let bottom: Vec<usize> = (0..n).filter(|&i| vals[i] - a_min <= gap_tol).collect();
    let bottom_weight: f64 = bottom.iter().map(|&i| weights[i]).sum();

    if bottom_weight <= 1e-28 * (total + 1.0) {
        // Possible hard case: no pull along the bottom eigenspace.
        let rest: f64 = (0..n)
            .filter(|i| !bottom.contains(i))
            .map(|i| weights[i] / (vals[i] - a_min).powi(2))
            .sum();
        if rest <= energy * (1.0 + 64.0 * f64::EPSILON) {
            let mut x = CMatrix::zeros(n, k);
            for i in 0..n {
                if !bottom.contains(&i) {
                    let d = vals[i] - a_min;
                    let row = rotated.row(i).scale(1.0 / d);
                    x.row_mut(i).copy_from(&row);
                }
            }
            let spare = energy - rest;
            // a gap at rounding level would turn into a √ε-sized spurious component
            if spare > 64.0 * f64::EPSILON * energy {
                x[(bottom[0], 0)] += Complex64::new(spare.sqrt(), 0.0);
            } else if rest > 0.0 {
                x.scale_mut((energy / rest).sqrt());
            }
            return vecs * x;
        }
        // μ > 0 but tiny: rounding noise along the bottom space would be
        // divided by μ, so drop it
        for &i in &bottom {
            rotated.row_mut(i).fill(Complex64::new(0.0, 0.0));
            weights[i] = 0.0;
        }
    }

    let solve = |mu: f64| -> CMatrix {
        let mut x = rotated.clone();
        for i in 0..n {
            let d = vals[i] - a_min + mu;
            x.row_mut(i).scale_mut(1.0 / d);
        }
        x
    };

    let norm_sq = |mu: f64| -> f64 {
        (0..n)
            .map(|i| weights[i] / (vals[i] - a_min + mu).powi(2))
            .sum()
    };
    let mut lo = 0.0_f64;
    let mut hi = (total / energy).sqrt().max(f64::MIN_POSITIVE);
    while norm_sq(hi) > energy {
        hi *= 2.0;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if norm_sq(mid) > energy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = if norm_sq(hi) > 0.0 { hi } else { lo };
    let mut x = vecs * solve(mu);
    let current = frobenius_sq(&x);
    if current > 0.0 {
        x.scale_mut((energy / current).sqrt());
    }
    x
}
