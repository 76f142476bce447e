use phnlab_core::em::{coupling_gap, em_step, simulate_chain, Stepper};
use phnlab_core::seed::{rng_for, SeedRole};
use phnlab_core::stats::log_log_slope;
use phnlab_core::{DiffusionModel, EmConfig, ModelSpec};
use rand::Rng;
use rand_distr::StandardNormal;

fn models() -> [DiffusionModel; 2] {
    [ModelSpec::exponential(1.0, 1.0).build().unwrap(), ModelSpec::erlang2(1.0, 1.0).build().unwrap()]
}

#[test]
fn chains_are_deterministic() {
    for m in models() {
        let cfg = EmConfig {
            eta: 0.05,
            n_steps: 5000,
            burn_in: 100,
            thin: 7,
            x0: vec![0.5; m.dim()],
            seed: 11,
            n_chains: 1,
        };
        let a = simulate_chain(&m, &cfg).unwrap();
        let b = simulate_chain(&m, &cfg).unwrap();
        let bits = |t: &phnlab_core::Trajectory| t.states.iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }
}

#[test]
fn one_step_law_matches_mean_and_covariance() {
    for m in models() {
        let d = m.dim();
        let eta = 0.1;
        let x: Vec<f64> = (0..d).map(|i| 0.7 - 0.9 * i as f64).collect();
        let n = 100_000;
        let mut rng = rng_for(21, SeedRole::Replication, d as u64);
        let steps: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                em_step(&m, &x, eta, &xi).unwrap()
            })
            .collect();
        let g = m.drift(&x);
        let cov = m.sigma_sq() * eta;
        let nf = n as f64;
        let mean: Vec<f64> = (0..d).map(|i| steps.iter().map(|s| s[i]).sum::<f64>() / nf).collect();
        for i in 0..d {
            let se = (cov[(i, i)] / nf).sqrt();
            assert!((mean[i] - x[i] - eta * g[i]).abs() <= 4.0 * se, "mean {i}");
            for j in 0..d {
                let c = steps.iter().map(|s| (s[i] - mean[i]) * (s[j] - mean[j])).sum::<f64>() / (nf - 1.0);
                let se_c = ((cov[(i, i)] * cov[(j, j)] + cov[(i, j)].powi(2)) / nf).sqrt();
                assert!((c - cov[(i, j)]).abs() <= 4.0 * se_c, "cov {i}{j}: {c} vs {}", cov[(i, j)]);
            }
        }
    }
}

#[test]
fn fourth_moment_is_stable_along_the_chain() {
    for m in models() {
        let eta = 0.05;
        let cfg = EmConfig {
            eta,
            n_steps: 200 + 400_000 * 20,
            burn_in: 200,
            thin: 20,
            x0: vec![0.0; m.dim()],
            seed: 5,
            n_chains: 1,
        };
        let t = simulate_chain(&m, &cfg).unwrap();
        let m4: Vec<f64> = t.rows().map(|x| x.iter().map(|v| v * v).sum::<f64>().powi(2)).collect();
        let half = m4.len() / 2;
        let a = m4[..half].iter().sum::<f64>() / half as f64;
        let b = m4[half..].iter().sum::<f64>() / (m4.len() - half) as f64;
        assert!((a - b).abs() / a < 0.05, "{a} vs {b}");
    }
}

#[test]
fn coupling_gap_is_third_order() {
    let etas = [0.1, 0.05, 0.025];
    for m in models() {
        let x = vec![0.2; m.dim()];
        let gaps: Vec<f64> = etas.iter().map(|&e| coupling_gap(&m, &x, e, 100, 10_000, 8).unwrap()).collect();
        let slope = log_log_slope(&etas, &gaps).unwrap();
        assert!((2.5..=3.5).contains(&slope), "slope {slope}");
    }
}

#[test]
fn stepper_matches_em_step() {
    let m = ModelSpec::erlang2(0.5, 1.0).build().unwrap();
    let mut st = Stepper::new(&m, 0.03, &[0.4, -1.0]);
    let xi = [0.3, -1.2];
    let direct = em_step(&m, &[0.4, -1.0], 0.03, &xi).unwrap();
    assert_eq!(st.step_with(&xi).unwrap(), direct.as_slice());
}
