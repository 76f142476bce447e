use phnlab_core::em::Stepper;
use phnlab_core::occupation::{occupation_scaling_check, occupation_weight, OccupationConfig};
use phnlab_core::seed::{rng_for, SeedRole};
use phnlab_core::ModelSpec;
use rand::Rng;
use rand_distr::StandardNormal;

#[test]
fn estimates_are_bounded_and_monotone_in_eps() {
    let m = ModelSpec::erlang2(1.0, 1.0).build().unwrap();
    let cfg = OccupationConfig {
        x0: vec![0.3, -0.1],
        t: 4.0,
        eta: 2e-3,
        eps_list: vec![0.4, 0.2, 0.1, 0.05, 0.02],
        n_paths: 200,
        seed: 3,
        tolerance: 0.2,
    };
    let rep = occupation_scaling_check(&m, &cfg).unwrap();
    for e in &rep.estimates {
        assert!(e.mean_l >= 0.0 && e.mean_l <= cfg.t);
    }
    // Estimates are listed by decreasing eps.
    for w in rep.estimates.windows(2) {
        let pooled = (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt();
        assert!(w[1].mean_l <= w[0].mean_l + 2.0 * pooled);
    }
}

/// Left-endpoint occupation along paths driven by the same Brownian motion
/// at steps `eta` and `eta / 2`.
fn paired_occupation(eta: f64, eps: f64, t: f64, path: u64) -> (f64, f64) {
    let m = ModelSpec::erlang2(1.0, 1.0).build().unwrap();
    let x0 = [0.1, -0.1];
    let mut rng = rng_for(9, SeedRole::Replication, path);
    let mut coarse = Stepper::new(&m, eta, &x0);
    let mut fine = Stepper::new(&m, eta / 2.0, &x0);
    let (mut lc, mut lf) = (0.0, 0.0);
    let n = (t / eta).round() as usize;
    for _ in 0..n {
        lc += occupation_weight(coarse.state(), eps) * eta;
        let a: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
        lf += occupation_weight(fine.state(), eps) * eta / 2.0;
        fine.step_with(&a).unwrap();
        lf += occupation_weight(fine.state(), eps) * eta / 2.0;
        fine.step_with(&b).unwrap();
        let c: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (u + v) / 2f64.sqrt()).collect();
        coarse.step_with(&c).unwrap();
    }
    (lc, lf)
}

#[test]
fn halving_the_step_barely_moves_the_estimate() {
    let eta = 0.01;
    let eps = 20.0 * eta;
    let (mut sc, mut sf) = (0.0, 0.0);
    for path in 0..100 {
        let (c, f) = paired_occupation(eta, eps, 10.0, path);
        sc += c;
        sf += f;
    }
    assert!(sf > 0.0);
    assert!((sc - sf).abs() / sf < 0.1, "{sc} vs {sf}");
}
