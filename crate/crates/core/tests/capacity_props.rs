use isac_core::comm::PowerAllocation;
use isac_core::sensing::{estimation_rate_time_domain, random_covariance};
use isac_core::{
    comm_capacity, estimation_rate, mutual_information_comm, optimal_sensing_waveform, random_channel,
    sensing_capacity, waterfill, NoiseSpec, TransmitCovariance,
};
use proptest::prelude::*;

fn kkt_holds(a: &PowerAllocation, noise: f64) {
    let w = a.water_level;
    for (b, l) in a.levels.iter().zip(&a.eigenvalues) {
        if *b > 0.0 {
            assert!((b + noise / l - w).abs() < 1e-9 * w.max(1.0));
        } else {
            assert!(noise / l >= w - 1e-9 * w.max(1.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn waterfill_kkt(vals in prop::collection::vec(1e-3f64..10.0, 1..8), budget in 1e-3f64..20.0, noise in 0.05f64..5.0) {
        let mut vals = vals;
        vals.sort_by(|a, b| b.total_cmp(a));
        let a = waterfill(&vals, budget, &NoiseSpec::new(noise).unwrap()).unwrap();
        prop_assert!((a.total() - budget).abs() < 1e-9 * budget.max(1.0));
        prop_assert!(a.levels.windows(2).all(|w| w[0] >= w[1] - 1e-12));
        kkt_holds(&a, noise);
    }

    #[test]
    fn capacity_covariance_achieves_capacity(seed in 0u64..100_000, n in 1usize..=5, m in 1usize..=5, p in 0.1f64..10.0) {
        let h = random_channel(n, m, seed).unwrap();
        let noise = NoiseSpec::new(0.7).unwrap();
        let cap = comm_capacity(&h, p, &noise).unwrap();
        let mi = mutual_information_comm(&h, &cap.covariance, &noise).unwrap();
        prop_assert!((mi - cap.bits_per_symbol).abs() < 1e-9 * mi.max(1.0));
        prop_assert!(cap.covariance.trace() <= p * (1.0 + 1e-12));
        let half = TransmitCovariance::new(cap.covariance.matrix().scale(0.5)).unwrap();
        prop_assert!(mutual_information_comm(&h, &half, &noise).unwrap() <= mi + 1e-12);
    }

    #[test]
    fn sensing_rate_sides_agree(seed in 0u64..100_000, t in 1usize..=8, m in 1usize..=6, rank in 0usize..=6) {
        let mut g = isac_core::GaussianStream::new(seed);
        let qh = random_covariance(m, rank.min(m), &mut g).unwrap();
        let x = g.complex_matrix(t, m, 1.0);
        let noise = NoiseSpec::new(0.4).unwrap();
        let a = estimation_rate(&x, &qh, &noise, 3).unwrap();
        let b = estimation_rate_time_domain(&x, &qh, &noise, 3).unwrap();
        prop_assert!((a - b).abs() < 1e-9 * a.max(1.0));
    }

    #[test]
    fn sensing_waveform_achieves_capacity(seed in 0u64..100_000, m in 1usize..=5, extra in 0usize..=3, p in 0.1f64..5.0) {
        let mut g = isac_core::GaussianStream::new(seed);
        let rank = 1 + g.index(m);
        let qh = random_covariance(m, rank, &mut g).unwrap();
        let t = qh.rank() + extra;
        let noise = NoiseSpec::new(1.0).unwrap();
        let wf = optimal_sensing_waveform(&qh, t, p, &noise).unwrap();
        let cap = sensing_capacity(&qh, 2, t, p, &noise).unwrap();
        let rate = estimation_rate(&wf.block, &qh, &noise, 2).unwrap();
        prop_assert!((rate - cap.bits_per_transmission).abs() < 1e-9 * rate.max(1.0));
        prop_assert!((wf.block.norm_squared() - t as f64 * p).abs() < 1e-9 * (t as f64 * p));
    }
}
