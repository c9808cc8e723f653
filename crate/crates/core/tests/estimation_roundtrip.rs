use std::f64::consts::PI;

use isac_core::estimation::{beam_search_angles, on_grid_path};
use isac_core::{
    build_dictionary, estimate_delay, estimate_paths, observe, ArrayGeometry, CMatrix, Complex64, GaussianStream,
    MmWaveChannelSpec, NoiseSpec, ObservationTensor, OfdmGrid, SteeringDictionary, StageOrder,
};
use proptest::prelude::*;

const TS: f64 = 1e-5;
const SPACING: f64 = 120e3;
const CARRIER: f64 = 28e9;

struct Setup {
    tx: SteeringDictionary,
    rx: SteeringDictionary,
    grid: OfdmGrid,
}

fn setup(m: usize, n: usize, n_sc: usize, t: usize) -> Setup {
    Setup {
        tx: build_dictionary(&ArrayGeometry::half_wavelength(m).unwrap(), m).unwrap(),
        rx: build_dictionary(&ArrayGeometry::half_wavelength(n).unwrap(), n).unwrap(),
        grid: OfdmGrid::new(n_sc, t, SPACING).unwrap(),
    }
}

type Draw = (usize, usize, usize, usize, Complex64);

fn spec(s: &Setup, draws: &[Draw]) -> MmWaveChannelSpec {
    let paths = draws
        .iter()
        .map(|&(j, i, fx, tx, gain)| on_grid_path(&s.tx, &s.rx, &s.grid, TS, j, i, fx, tx, gain).unwrap())
        .collect();
    MmWaveChannelSpec::new(*s.tx.geometry(), *s.rx.geometry(), paths, CARRIER, TS).unwrap()
}

#[test]
fn two_orthogonal_paths_recovered() {
    let s = setup(4, 4, 16, 8);
    let draws = [
        (1, 2, 3, 5, Complex64::from_polar(1.0, 0.3)),
        (3, 0, 6, 11, Complex64::from_polar(0.6, -2.5)),
    ];
    let obs = observe(&spec(&s, &draws), &s.grid, &CMatrix::identity(4, 4), None).unwrap();
    let search = beam_search_angles(&obs, &s.tx, &s.rx, 2).unwrap();
    assert_eq!(search.tracks.len(), 2);
    for order in [StageOrder::DopplerFirst, StageOrder::DelayFirst] {
        let r = estimate_paths(&obs, &s.tx, &s.rx, 2, order).unwrap();
        assert!(r.residual_energy < 1e-8 * r.input_energy);
        for (p, d) in r.paths.iter().zip(&draws) {
            assert_eq!((p.aod_index, p.aoa_index, p.doppler_bin, p.delay_bin), (d.0, d.1, d.2, d.3));
            assert!((p.gain - d.4).norm() < 1e-9);
        }
    }
}

#[test]
fn collision_and_empty_observations() {
    let s = setup(2, 2, 4, 4);
    let obs = observe(&spec(&s, &[(0, 1, 1, 1, Complex64::new(1.0, 0.0))]), &s.grid, &CMatrix::identity(2, 2), None).unwrap();
    // one path cannot supply a second atom
    assert!(beam_search_angles(&obs, &s.tx, &s.rx, 2).is_err());

    let zero = ObservationTensor::new(
        s.grid,
        CARRIER,
        TS,
        CMatrix::identity(2, 2),
        vec![CMatrix::zeros(2, 2); 16],
    )
    .unwrap();
    assert!(beam_search_angles(&zero, &s.tx, &s.rx, 1).is_err());
    assert!(beam_search_angles(&zero, &s.tx, &s.rx, 0).unwrap().tracks.is_empty());
}

#[test]
fn oversampled_dictionary_and_general_probing() {
    let m = 3;
    let tx = build_dictionary(&ArrayGeometry::half_wavelength(m).unwrap(), 6).unwrap();
    let rx = build_dictionary(&ArrayGeometry::half_wavelength(2).unwrap(), 4).unwrap();
    let grid = OfdmGrid::new(8, 4, SPACING).unwrap();
    let s = Setup { tx, rx, grid };
    let alpha = Complex64::from_polar(0.9, 1.1);
    let sp = spec(&s, &[(4, 1, 2, 6, alpha)]);
    let mut g = GaussianStream::new(3);
    let probing = g.complex_matrix(m, 5, 1.0);
    let obs = observe(&sp, &s.grid, &probing, None).unwrap();
    let r = estimate_paths(&obs, &s.tx, &s.rx, 1, StageOrder::DopplerFirst).unwrap();
    let p = &r.paths[0];
    assert_eq!((p.aod_index, p.aoa_index, p.doppler_bin, p.delay_bin), (4, 1, 2, 6));
    assert!((p.gain - alpha).norm() < 1e-9);
}

#[test]
fn file_round_trip_preserves_estimates() {
    let s = setup(2, 3, 8, 4);
    let sp = spec(&s, &[(1, 2, 3, 4, Complex64::new(0.2, 0.4))]);
    let mut g = GaussianStream::new(4);
    let obs = observe(&sp, &s.grid, &CMatrix::identity(2, 2), Some((&NoiseSpec::new(1e-3).unwrap(), &mut g))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("obs.bin");
    obs.write_to(&path).unwrap();
    let back = ObservationTensor::read_from(&path).unwrap();
    assert_eq!(back, obs);
    let a = estimate_paths(&obs, &s.tx, &s.rx, 1, StageOrder::DelayFirst).unwrap();
    let b = estimate_paths(&back, &s.tx, &s.rx, 1, StageOrder::DelayFirst).unwrap();
    assert_eq!(a, b);
}

#[test]
fn noisy_delay_stage_finds_bin() {
    let n = 16;
    let bin = 5;
    let mut g = GaussianStream::new(5);
    // 20 dB per-sample SNR on a unit tone
    let sigma2 = 0.01;
    let mut hits = 0;
    for _ in 0..1000 {
        let c: Vec<Complex64> = (0..n)
            .map(|k| Complex64::from_polar(1.0, -2.0 * PI * (k * bin) as f64 / n as f64) + g.complex(sigma2))
            .collect();
        if estimate_delay(&c).unwrap().bin == bin {
            hits += 1;
        }
    }
    assert!(hits > 990, "{hits}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_on_grid_round_trip(
        seed in 0u64..100_000,
        m in 2usize..=4,
        n in 2usize..=4,
        n_sc in 2usize..=16,
        t in 2usize..=8,
        two in any::<bool>(),
    ) {
        let s = setup(m, n, n_sc, t);
        let mut g = GaussianStream::new(seed);
        let mut draws: Vec<Draw> = Vec::new();
        let count = if two { 2 } else { 1 };
        while draws.len() < count {
            let d = (g.index(m), g.index(n), g.index(t), g.index(n_sc), Complex64::from_polar(0.3 + g.uniform(), 2.0 * PI * g.uniform()));
            if draws.iter().all(|e| (e.0, e.1) != (d.0, d.1)) {
                draws.push(d);
            }
        }
        let obs = observe(&spec(&s, &draws), &s.grid, &CMatrix::identity(m, m), None).unwrap();
        let a = estimate_paths(&obs, &s.tx, &s.rx, count, StageOrder::DopplerFirst).unwrap();
        let b = estimate_paths(&obs, &s.tx, &s.rx, count, StageOrder::DelayFirst).unwrap();
        for r in [&a, &b] {
            for d in &draws {
                let p = r.paths.iter().find(|p| (p.aod_index, p.aoa_index) == (d.0, d.1)).expect("path found");
                prop_assert_eq!((p.doppler_bin, p.delay_bin), (d.2, d.3));
                prop_assert!((p.gain - d.4).norm() < 1e-9);
            }
        }
        for (p, q) in a.paths.iter().zip(&b.paths) {
            prop_assert_eq!((p.doppler_bin, p.delay_bin, p.aod_index, p.aoa_index), (q.doppler_bin, q.delay_bin, q.aod_index, q.aoa_index));
            prop_assert!((p.gain - q.gain).norm() < 1e-12);
        }
    }
}
