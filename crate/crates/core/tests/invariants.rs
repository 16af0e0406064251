use proptest::prelude::*;

use qmonitor::asymptotics::{delta_from_generator, legendre, operator_a};
use qmonitor::heat_stats::{analytic_g_itt, spin_heat_pmf};
use qmonitor::hilbert::{random_system, random_system_with, thermal_state, RandomEnsemble, Spin};
use qmonitor::io::SystemDocument;
use qmonitor::linalg::{self, CMatrix, C64};
use qmonitor::protocol::{exact_distribution, exact_distribution_fast, run_trajectory, ProtocolConfig, WaitingTime};
use qmonitor::transition::{chain_product, stochastic_deviation, transition_matrix, unistochastic_weights};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn transition_matrix_is_symmetric_doubly_stochastic(n in 2usize..10, seed in any::<u64>(), tau in 0.01f64..10.0) {
        let (sys, _) = random_system(n, seed).unwrap();
        let l = transition_matrix(&sys, tau).unwrap();
        prop_assert!(l.matrix().iter().all(|&x| x >= 0.0));
        prop_assert!(stochastic_deviation(l.matrix()) < 1e-10);
        prop_assert!(linalg::symmetric_defect(l.matrix()) < 1e-10);
        prop_assert!((l.spectrum()[0] - 1.0).abs() < 1e-10);
        prop_assert!(l.spectrum().iter().all(|&x| x.abs() <= 1.0 + 1e-10));
    }

    #[test]
    fn complex_hamiltonians_stay_doubly_stochastic(n in 2usize..8, seed in any::<u64>(), tau in 0.01f64..10.0) {
        let (sys, _) = random_system_with(n, seed, RandomEnsemble::Unitary).unwrap();
        prop_assert!(stochastic_deviation(&unistochastic_weights(&sys, tau)) < 1e-10);
    }

    #[test]
    fn chain_products_stay_stochastic(seed in any::<u64>(), taus in prop::collection::vec(0.05f64..4.0, 1..12)) {
        let (sys, _) = random_system(5, seed).unwrap();
        let ls: Vec<_> = taus.iter().map(|&t| transition_matrix(&sys, t).unwrap()).collect();
        let p = chain_product(&ls).unwrap();
        prop_assert!(p.stochastic_deviation < 1e-10 * taus.len() as f64);
    }

    #[test]
    fn operator_a_zero_mode_and_psd(twice in 1u32..120) {
        let spin = Spin::from_twice(twice).unwrap();
        let a = operator_a(spin);
        let scale = spin.value() * (spin.value() + 1.0);
        prop_assert!(a.row_iter().all(|r| r.sum().abs() <= 1e-12 * scale));
        let (vals, _) = linalg::eigh_real(&a).unwrap();
        prop_assert!(vals[0] > -1e-10 * scale);
    }

    #[test]
    fn delta_has_zero_mode(n in 2usize..8, seed in any::<u64>(), tau in 0.0f64..5.0) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let raw = CMatrix::from_fn(n, n, |_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let r = (&raw + raw.adjoint()) * C64::new(0.5, 0.0);
        let energies: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let delta = delta_from_generator(&r, &energies, tau);
        prop_assert!(delta.row_iter().all(|row| row.sum().abs() < 1e-12));
        prop_assert!(linalg::symmetric_defect(&delta) < 1e-14);
        prop_assert!((0..n).all(|i| (0..n).all(|j| i == j || delta[(i, j)] <= 0.0)));
    }

    #[test]
    fn legendre_is_bounded_on_the_interval(k in 0usize..40, x in -1.0f64..1.0) {
        prop_assert!(legendre(k, x).abs() <= 1.0 + 1e-12);
        let parity = if k % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!((legendre(k, -x) - parity * legendre(k, x)).abs() < 1e-12);
    }

    #[test]
    fn spin_pmf_normalized(twice in 1u32..16, omega in 0.1f64..3.0, beta in 0.0f64..2.0) {
        let pmf = spin_heat_pmf(Spin::from_twice(twice).unwrap(), omega, beta).unwrap();
        let total: f64 = pmf.probabilities().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(pmf.probabilities().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn characteristic_function_at_zero(n in 2usize..8, seed in any::<u64>(), beta in 0.0f64..2.0) {
        let (sys, _) = random_system(n, seed).unwrap();
        let rho = thermal_state(sys.hamiltonian(), beta).unwrap();
        prop_assert!((analytic_g_itt(sys.hamiltonian(), &rho, 0.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_oracles_agree(n in 2usize..5, m in 1usize..5, seed in any::<u64>(), tau in 0.1f64..3.0) {
        let (sys, rho) = random_system(n, seed).unwrap();
        let slow = exact_distribution(&sys, &rho, m, tau).unwrap();
        let fast = exact_distribution_fast(&sys, &rho, m, tau).unwrap();
        let total: f64 = slow.joint.iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let gap = slow.pair_probabilities().iter().zip(fast.pair_probabilities()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(gap < 1e-12);
    }

    #[test]
    fn trajectories_depend_only_on_seed_and_stream(seed in any::<u64>(), stream in any::<u64>()) {
        let (sys, rho) = random_system(4, 3).unwrap();
        let cfg = ProtocolConfig { measurements: 7, waiting: WaitingTime::Uniform { low: 0.2, high: 2.0 }, ensemble_size: 1, seed, record_outcomes: true };
        let a = run_trajectory(&sys, &rho, &cfg, stream).unwrap();
        let b = run_trajectory(&sys, &rho, &cfg, stream).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn system_documents_round_trip(n in 2usize..7, seed in any::<u64>()) {
        let (sys, rho) = random_system_with(n, seed, RandomEnsemble::Unitary).unwrap();
        let doc = SystemDocument::new(&sys, &rho);
        let back = SystemDocument::from_json(&doc.to_json()).unwrap();
        prop_assert_eq!(&doc, &back);
    }
}
