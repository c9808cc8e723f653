//! Constrained least-squares waveform designs.

use crate::channel::ChannelMatrix;
use crate::error::{domain, mismatch, shape, IsacError, Result};
use crate::linalg::{frobenius_sq, min_quadratic_on_sphere};
use crate::{CMatrix, Complex64};

use super::{check_lsq_dims, RadarCovariance, SymbolBlock, TradeoffWeight, WaveformBlock};

const MAX_SWEEPS: usize = 10_000;

/// Result of an iterative constrained design.
#[derive(Debug, Clone)]
pub struct ConstrainedSolution {
    pub waveform: WaveformBlock,
    pub objective: f64,
    /// Objective after initialization and after every sweep of the chosen start.
    pub history: Vec<f64>,
    pub sweeps: usize,
}

/// `ρ‖H_c X − C‖_F² + (1 − ρ)‖X − X_s‖_F²`.
pub fn pareto_objective(
    hc: &ChannelMatrix,
    c: &SymbolBlock,
    xs: &CMatrix,
    rho: TradeoffWeight,
    x: &CMatrix,
) -> Result<f64> {
    check_lsq_dims("pareto_objective", hc, c, x)?;
    check_reference(hc, c, xs)?;
    let r = rho.rho();
    Ok(r * frobenius_sq(&(hc.matrix() * x - c.matrix())) + (1.0 - r) * frobenius_sq(&(x - xs)))
}

fn check_reference(hc: &ChannelMatrix, c: &SymbolBlock, xs: &CMatrix) -> Result<()> {
    if xs.nrows() != hc.cols() || xs.ncols() != c.transmissions() {
        return mismatch(
            "reference waveform",
            format!("{}x{}", hc.cols(), c.transmissions()),
            shape(xs),
        );
    }
    Ok(())
}

/// Minimizes `‖H_c X − C‖_F²` subject to `X Xᴴ = T·R_s`.
///
/// Writing `T·R_s = F Fᴴ` with `F` of size `M × G` (`G = rank R_s`), every
/// feasible point is `X = F W` with `W Wᴴ = I_G`, and the problem becomes an
/// orthogonal Procrustes problem solved by the SVD of `Fᴴ H_cᴴ C`.
pub fn solve_covariance_constrained(
    hc: &ChannelMatrix,
    c: &SymbolBlock,
    rs: &RadarCovariance,
) -> Result<WaveformBlock> {
    let t = c.transmissions();
    if c.users() != hc.rows() {
        return mismatch("solve_covariance_constrained", format!("{} x T symbols", hc.rows()), shape(c.matrix()));
    }
    if rs.dim() != hc.cols() {
        return mismatch("solve_covariance_constrained", format!("{0}x{0} covariance", hc.cols()), shape(rs.matrix()));
    }
    let g = rs.rank();
    if g == 0 {
        return domain("radar covariance is zero");
    }
    if g > t {
        return domain(format!("rank {g} covariance cannot be realized over {t} transmissions"));
    }
    let f = rs.reduced_factor().scale((t as f64).sqrt());
    let b = f.adjoint() * hc.matrix().adjoint() * c.matrix();
    WaveformBlock::new(f * co_isometry_polar(&b))
}

/// Maximizer of `Re tr(Wᴴ B)` over `W Wᴴ = I` for a wide `B` (`G × T`, `G ≤ T`).
fn co_isometry_polar(b: &CMatrix) -> CMatrix {
    let (g, t) = b.shape();
    let svd = b.clone().svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let w = u * v_t;
    if (&w * w.adjoint() - CMatrix::identity(g, g)).norm() < 1e-10 {
        return w;
    }
    // B rank deficient: complete the row space by Gram-Schmidt on DFT rows.
    let mut rows: Vec<nalgebra::RowDVector<Complex64>> = Vec::with_capacity(g);
    for i in 0..g {
        let r = w.row(i).into_owned();
        if r.norm() > 0.5 {
            rows.push(r);
        }
    }
    let dft = crate::linalg::unitary_dft(t);
    let mut k = 0;
    while rows.len() < g {
        let mut cand = dft.row(k).into_owned();
        for r in &rows {
            let proj = (&cand * r.adjoint())[(0, 0)];
            cand -= r * proj;
        }
        let n = cand.norm();
        if n > 1e-6 {
            rows.push(cand.unscale(n));
        }
        k += 1;
    }
    CMatrix::from_fn(g, t, |i, j| rows[i][j])
}

/// Minimizes `ρ‖H_c X − C‖_F² + (1 − ρ)‖X − X_s‖_F²` subject to
/// `‖X‖_F² = energy`.
///
/// The stationary points are `X(λ) = (A + λI)⁻¹B` with
/// `A = ρH_cᴴH_c + (1 − ρ)I` and `B = ρH_cᴴC + (1 − ρ)X_s`; the global one
/// has `A + λI ⪰ 0`, located by bisection on the energy.
pub fn solve_pareto_tradeoff(
    hc: &ChannelMatrix,
    c: &SymbolBlock,
    xs: &CMatrix,
    rho: TradeoffWeight,
    energy: f64,
) -> Result<WaveformBlock> {
    check_reference(hc, c, xs)?;
    if c.users() != hc.rows() {
        return mismatch("solve_pareto_tradeoff", format!("{} x T symbols", hc.rows()), shape(c.matrix()));
    }
    if !(energy > 0.0 && energy.is_finite()) {
        return domain(format!("energy target must be positive, got {energy}"));
    }
    let (a, b) = pareto_quadratic(hc, c, xs, rho.rho());
    WaveformBlock::new(min_quadratic_on_sphere(&a, &b, energy))
}

fn pareto_quadratic(hc: &ChannelMatrix, c: &SymbolBlock, xs: &CMatrix, rho: f64) -> (CMatrix, CMatrix) {
    let h = hc.matrix();
    let m = h.ncols();
    let a = (h.adjoint() * h).scale(rho) + CMatrix::identity(m, m).scale(1.0 - rho);
    let b = (h.adjoint() * c.matrix()).scale(rho) + xs.scale(1.0 - rho);
    (a, b)
}

/// Pareto objective under equal per-antenna energy: every row of `X` has
/// squared norm `per_antenna_energy`.
///
/// Exact block coordinate descent over rows; each row update is the
/// closed-form minimizer on its sphere, so the objective never increases.
/// Several deterministic starts are run and the best kept.
pub fn solve_per_antenna(
    hc: &ChannelMatrix,
    c: &SymbolBlock,
    xs: &CMatrix,
    rho: TradeoffWeight,
    per_antenna_energy: f64,
) -> Result<ConstrainedSolution> {
    check_reference(hc, c, xs)?;
    if !(per_antenna_energy > 0.0 && per_antenna_energy.is_finite()) {
        return domain(format!("per-antenna energy must be positive, got {per_antenna_energy}"));
    }
    let m = xs.nrows();
    let starts = starting_points(hc, c, xs, rho, m as f64 * per_antenna_energy)?
        .into_iter()
        .map(|x| normalize_rows(x, per_antenna_energy))
        .collect();
    let update = |x: &mut CMatrix, e: &mut CMatrix| {
        let h = hc.matrix();
        let r = rho.rho();
        for i in 0..m {
            let hm = h.column(i);
            let row = x.row(i).into_owned();
            // e = H X − C; the rest-of-array residual for row i is e − h_i x_i
            let target = &hm * &row - &*e;
            let w = (hm.adjoint() * target).scale(r) + xs.row(i).scale(1.0 - r);
            let n = w.norm();
            if n == 0.0 {
                continue;
            }
            let new_row = w.scale(per_antenna_energy.sqrt() / n);
            *e += &hm * (&new_row - &row);
            x.row_mut(i).copy_from(&new_row);
        }
    };
    descend("solve_per_antenna", hc, c, xs, rho, starts, 1e-12, update)
}

/// Pareto objective with every entry of `X` of magnitude `modulus`.
///
/// Cyclic coordinate descent over entries; each phase has the closed-form
/// minimizer: the entry aligns with its local linear term `g`.
pub fn solve_constant_modulus(
    hc: &ChannelMatrix,
    c: &SymbolBlock,
    xs: &CMatrix,
    rho: TradeoffWeight,
    modulus: f64,
) -> Result<ConstrainedSolution> {
    check_reference(hc, c, xs)?;
    if !(modulus > 0.0 && modulus.is_finite()) {
        return domain(format!("modulus must be positive, got {modulus}"));
    }
    let (m, t) = xs.shape();
    let mut starts: Vec<CMatrix> = starting_points(hc, c, xs, rho, (m * t) as f64 * modulus * modulus)?
        .into_iter()
        .map(|x| x.map(|z| unit_phase(z).scale(modulus)))
        .collect();
    starts.push(CMatrix::from_element(m, t, Complex64::new(modulus, 0.0)));
    let update = |x: &mut CMatrix, e: &mut CMatrix| {
        let h = hc.matrix();
        let r = rho.rho();
        for j in 0..t {
            for i in 0..m {
                let hm = h.column(i);
                let old = x[(i, j)];
                let mut lin = Complex64::new(0.0, 0.0);
                for k in 0..hm.len() {
                    lin += hm[k].conj() * (hm[k] * old - e[(k, j)]);
                }
                let g = lin.scale(r) + xs[(i, j)].scale(1.0 - r);
                if g.norm() == 0.0 {
                    continue;
                }
                let new = g.unscale(g.norm()).scale(modulus);
                let delta = new - old;
                for k in 0..hm.len() {
                    e[(k, j)] += hm[k] * delta;
                }
                x[(i, j)] = new;
            }
        }
    };
    descend("solve_constant_modulus", hc, c, xs, rho, starts, 1e-10, update)
}

fn unit_phase(z: Complex64) -> Complex64 {
    if z.norm() == 0.0 {
        Complex64::new(1.0, 0.0)
    } else {
        z.unscale(z.norm())
    }
}

fn normalize_rows(mut x: CMatrix, energy: f64) -> CMatrix {
    let t = x.ncols();
    for i in 0..x.nrows() {
        let n = x.row(i).norm();
        if n > 0.0 {
            x.row_mut(i).scale_mut(energy.sqrt() / n);
        } else {
            x.row_mut(i).fill(Complex64::new((energy / t as f64).sqrt(), 0.0));
        }
    }
    x
}

/// Pareto solution at the requested weight, the reference waveform and the
/// communication-only Pareto solution.
fn starting_points(
    hc: &ChannelMatrix,
    c: &SymbolBlock,
    xs: &CMatrix,
    rho: TradeoffWeight,
    energy: f64,
) -> Result<Vec<CMatrix>> {
    let mut out = vec![solve_pareto_tradeoff(hc, c, xs, rho, energy)?.into_inner()];
    if frobenius_sq(xs) > 0.0 {
        out.push(xs.clone());
    }
    if rho.rho() < 1.0 {
        out.push(solve_pareto_tradeoff(hc, c, xs, TradeoffWeight(1.0), energy)?.into_inner());
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn descend(
    solver: &'static str,
    hc: &ChannelMatrix,
    c: &SymbolBlock,
    xs: &CMatrix,
    rho: TradeoffWeight,
    starts: Vec<CMatrix>,
    tol: f64,
    update: impl Fn(&mut CMatrix, &mut CMatrix),
) -> Result<ConstrainedSolution> {
    let mut best: Option<ConstrainedSolution> = None;
    let mut unconverged: Option<(f64, CMatrix)> = None;
    for mut x in starts {
        let mut e = hc.matrix() * &x - c.matrix();
        let mut f = pareto_objective(hc, c, xs, rho, &x)?;
        let mut history = vec![f];
        let mut converged = false;
        let mut sweeps = 0;
        while sweeps < MAX_SWEEPS {
            update(&mut x, &mut e);
            sweeps += 1;
            // refresh to keep the running residual from drifting
            e = hc.matrix() * &x - c.matrix();
            let next = pareto_objective(hc, c, xs, rho, &x)?;
            history.push(next);
            let gain = f - next;
            f = next;
            if gain <= tol * f.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            if unconverged.as_ref().is_none_or(|(o, _)| f < *o) {
                unconverged = Some((f, x));
            }
            continue;
        }
        if best.as_ref().is_none_or(|b| f < b.objective) {
            best = Some(ConstrainedSolution {
                waveform: WaveformBlock::new(x)?,
                objective: f,
                history,
                sweeps,
            });
        }
    }
    match (best, unconverged) {
        (Some(b), _) => Ok(b),
        (None, Some((objective, x))) => Err(IsacError::NotConverged {
            solver,
            iterations: MAX_SWEEPS,
            objective,
            best: Some(Box::new(x)),
        }),
        (None, None) => domain("no starting point"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::GaussianStream;

    struct Instance {
        hc: ChannelMatrix,
        c: SymbolBlock,
        xs: CMatrix,
    }

    fn instance(seed: u64, k: usize, m: usize, t: usize) -> Instance {
        let mut g = GaussianStream::new(seed);
        Instance {
            hc: ChannelMatrix::new(g.complex_matrix(k, m, 1.0)).unwrap(),
            c: SymbolBlock::new(g.complex_matrix(k, t, 1.0)).unwrap(),
            xs: g.complex_matrix(m, t, 1.0),
        }
    }

    fn w(r: f64) -> TradeoffWeight {
        TradeoffWeight::new(r).unwrap()
    }

    fn random_unitary(g: &mut GaussianStream, n: usize) -> CMatrix {
        let a = g.complex_matrix(n, n, 1.0);
        a.qr().q()
    }

    #[test]
    fn covariance_constrained_feasible_target() {
        let mut g = GaussianStream::new(1);
        let (m, t) = (3, 4);
        let hc = ChannelMatrix::new(CMatrix::identity(m, m)).unwrap();
        let cm = g.complex_matrix(m, t, 1.0);
        let rs = RadarCovariance::from_reference_waveform(&cm).unwrap();
        let c = SymbolBlock::new(cm.clone()).unwrap();
        let x = solve_covariance_constrained(&hc, &c, &rs).unwrap();
        assert!((x.matrix() - &cm).norm() < 1e-9);
    }

    #[test]
    fn covariance_constrained_beats_rotations() {
        let inst = instance(2, 2, 2, 2);
        let mut g = GaussianStream::new(3);
        let rs = RadarCovariance::from_reference_waveform(&g.complex_matrix(2, 2, 1.0)).unwrap();
        let x = solve_covariance_constrained(&inst.hc, &inst.c, &rs).unwrap();
        let t = 2.0;
        assert!((x.matrix() * x.matrix().adjoint() - rs.matrix().scale(t)).norm() < 1e-8);
        let best = super::super::interference_power(&x, &inst.hc, &inst.c).unwrap();
        let f = rs.factor().scale(t.sqrt());
        for _ in 0..2000 {
            let cand = WaveformBlock::new(&f * random_unitary(&mut g, 2)).unwrap();
            assert!(super::super::interference_power(&cand, &inst.hc, &inst.c).unwrap() >= best - 1e-9);
        }
    }

    #[test]
    fn covariance_constrained_low_rank() {
        let inst = instance(4, 2, 3, 4);
        let mut g = GaussianStream::new(5);
        let rs = RadarCovariance::from_reference_waveform(&g.complex_matrix(3, 1, 1.0)).unwrap();
        assert_eq!(rs.rank(), 1);
        let x = solve_covariance_constrained(&inst.hc, &inst.c, &rs).unwrap();
        assert!((x.matrix() * x.matrix().adjoint() - rs.matrix().scale(4.0)).norm() < 1e-8);
        let zero = RadarCovariance::new(CMatrix::zeros(3, 3)).unwrap();
        assert!(solve_covariance_constrained(&inst.hc, &inst.c, &zero).is_err());
    }

    #[test]
    fn covariance_constrained_zero_symbols_still_feasible() {
        let inst = instance(6, 2, 3, 4);
        let c = SymbolBlock::new(CMatrix::zeros(2, 4)).unwrap();
        let rs = RadarCovariance::new(CMatrix::identity(3, 3)).unwrap();
        let x = solve_covariance_constrained(&inst.hc, &c, &rs).unwrap();
        assert!((x.matrix() * x.matrix().adjoint() - CMatrix::identity(3, 3).scale(4.0)).norm() < 1e-8);
    }

    #[test]
    fn pareto_endpoints() {
        let inst = instance(7, 2, 2, 3);
        let e = frobenius_sq(&inst.xs);
        let x = solve_pareto_tradeoff(&inst.hc, &inst.c, &inst.xs, w(0.0), e).unwrap();
        assert!((x.matrix() - &inst.xs).norm() < 1e-8);

        let ls = inst.hc.matrix().clone().try_inverse().unwrap() * inst.c.matrix();
        let x = solve_pareto_tradeoff(&inst.hc, &inst.c, &inst.xs, w(1.0), frobenius_sq(&ls)).unwrap();
        assert!((x.matrix() - &ls).norm() < 1e-8);
    }

    #[test]
    fn pareto_stationarity_and_energy() {
        let inst = instance(8, 2, 3, 2);
        let rho = 0.4;
        let energy = 5.0;
        let x = solve_pareto_tradeoff(&inst.hc, &inst.c, &inst.xs, w(rho), energy).unwrap();
        assert!((x.energy() - energy).abs() < 1e-8);
        let (a, b) = pareto_quadratic(&inst.hc, &inst.c, &inst.xs, rho);
        // (A + λI) X = B for a real λ shared by all entries
        let ax = &a * x.matrix();
        let resid = &b - &ax;
        let lambda = (x.matrix().adjoint() * &resid).trace() / Complex64::new(energy, 0.0);
        assert!(lambda.im.abs() < 1e-8);
        assert!((resid - x.matrix().scale(lambda.re)).norm() < 1e-7);
    }

    #[test]
    fn pareto_rejects_zero_energy() {
        let inst = instance(9, 2, 2, 2);
        assert!(solve_pareto_tradeoff(&inst.hc, &inst.c, &inst.xs, w(0.5), 0.0).is_err());
    }

    #[test]
    fn per_antenna_contract() {
        let inst = instance(10, 2, 3, 4);
        let e = 1.5;
        let sol = solve_per_antenna(&inst.hc, &inst.c, &inst.xs, w(0.5), e).unwrap();
        for i in 0..3 {
            assert!((sol.waveform.matrix().row(i).norm_squared() - e).abs() < 1e-8);
        }
        assert!(sol.history.windows(2).all(|p| p[1] <= p[0] + 1e-12));
        let pareto = solve_pareto_tradeoff(&inst.hc, &inst.c, &inst.xs, w(0.5), 3.0 * e).unwrap();
        let init = normalize_rows(pareto.into_inner(), e);
        let f0 = pareto_objective(&inst.hc, &inst.c, &inst.xs, w(0.5), &init).unwrap();
        assert!(sol.objective <= f0 + 1e-12);
    }

    #[test]
    fn per_antenna_fixed_point() {
        let inst = instance(11, 2, 2, 3);
        let xs = normalize_rows(inst.xs.clone(), 2.0);
        let sol = solve_per_antenna(&inst.hc, &inst.c, &xs, w(0.0), 2.0).unwrap();
        assert!((sol.waveform.matrix() - &xs).norm() < 1e-10);
    }

    #[test]
    fn constant_modulus_contract() {
        let inst = instance(12, 2, 3, 4);
        let a = 0.7;
        let sol = solve_constant_modulus(&inst.hc, &inst.c, &inst.xs, w(0.6), a).unwrap();
        assert!(sol.waveform.matrix().iter().all(|z| (z.norm() - a).abs() < 1e-14));
        assert!(sol.history.windows(2).all(|p| p[1] <= p[0] + 1e-12));

        let cm = inst.xs.map(|z| unit_phase(z).scale(a));
        let fixed = solve_constant_modulus(&inst.hc, &inst.c, &cm, w(0.0), a).unwrap();
        assert!((fixed.waveform.matrix() - &cm).norm() < 1e-12);
    }
}
