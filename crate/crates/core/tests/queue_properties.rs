use phnlab_core::queue::simulate_queue;
use phnlab_core::{ModelSpec, QueueConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn paths_respect_capacity_and_conservation(
        n in 1usize..40,
        alpha in 0.2f64..3.0,
        beta in -1.0f64..2.0,
        erlang in any::<bool>(),
        seed in any::<u64>(),
    ) {
        prop_assume!(n as f64 - beta * (n as f64).sqrt() > 0.0);
        let spec = if erlang { ModelSpec::erlang2(alpha, beta) } else { ModelSpec::exponential(alpha, beta) };
        let model = spec.build().unwrap();
        let mut cfg = QueueConfig::new(n, model.phase_type(), alpha, beta, 0.0, seed).unwrap();
        cfg.burn_in = 5.0;
        cfg.horizon = QueueConfig::horizon_for(cfg.burn_in, cfg.spacing, 50);
        let path = simulate_queue(&cfg).unwrap();
        let c = &path.counters;
        prop_assert!(c.max_busy <= n);
        prop_assert_eq!(
            c.initial_in_system + c.arrivals,
            c.in_system_at_horizon + c.departures + c.abandonments
        );
        prop_assert!((0.0..=1.0).contains(&c.busy_fraction));
        prop_assert_eq!(path.len(), 50);
    }
}
