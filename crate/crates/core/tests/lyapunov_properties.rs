use phnlab_core::lyapunov::{
    default_grid, fit_quadratic_bounds, lyapunov_gradient, lyapunov_hessian, lyapunov_value, tune_spec,
};
use phnlab_core::seed::{rng_for, SeedRole};
use phnlab_core::{DiffusionModel, LyapunovSpec, ModelSpec};
use rand::Rng;

fn tuned() -> Vec<(DiffusionModel, LyapunovSpec)> {
    [ModelSpec::exponential(1.0, 1.0), ModelSpec::erlang2(1.0, 1.0)]
        .iter()
        .map(|s| {
            let m = s.build().unwrap();
            let grid = default_grid(m.dim(), 4000, 20.0, 1);
            let (spec, _, fit) = tune_spec(&m, &grid).unwrap();
            assert!(fit.violations.is_empty());
            (m, spec)
        })
        .collect()
}

fn random_points(dim: usize, n: usize, radius: f64, salt: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_for(salt, SeedRole::Calibration, dim as u64);
    (0..n).map(|_| (0..dim).map(|_| rng.random_range(-radius..radius)).collect()).collect()
}

#[test]
fn quadratic_sandwich_and_gradient_growth_hold_on_fresh_points() {
    for (m, spec) in tuned() {
        let b = fit_quadratic_bounds(&m, &spec, &default_grid(m.dim(), 4000, 20.0, 2));
        assert!(b.c_hat1 > 0.0);
        for y in random_points(m.dim(), 5000, 14.0, 3) {
            let n2: f64 = y.iter().map(|v| v * v).sum();
            let v = lyapunov_value(&m, &spec, &y);
            assert!(v >= b.c_hat1 * n2 * (1.0 - 1e-9), "lower bound at {y:?}");
            assert!(v <= b.upper_c1 * n2 + b.upper_c2 + spec.c_hat2 + 1e-9, "upper bound at {y:?}");
            let g = lyapunov_gradient(&m, &spec, &y).norm();
            assert!(g <= b.grad_c * (1.0 + n2.sqrt()) * (1.0 + 1e-9));
        }
    }
}

#[test]
fn derivatives_match_finite_differences_away_from_kinks() {
    for (m, spec) in tuned() {
        let d = m.dim();
        let mut checked = 0;
        for y in random_points(d, 400, 6.0, 4) {
            let s: f64 = y.iter().sum();
            if s.abs() < 1e-3 || (s + 1.0).abs() < 1e-3 {
                continue;
            }
            checked += 1;
            let g = lyapunov_gradient(&m, &spec, &y);
            let hess = lyapunov_hessian(&m, &spec, &y);
            for i in 0..d {
                let h = 1e-6;
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[i] += h;
                ym[i] -= h;
                let fd = (lyapunov_value(&m, &spec, &yp) - lyapunov_value(&m, &spec, &ym)) / (2.0 * h);
                assert!((fd - g[i]).abs() <= 1e-5 * g.norm().max(1.0), "grad {i} at {y:?}");
                let gp = lyapunov_gradient(&m, &spec, &yp);
                let gm = lyapunov_gradient(&m, &spec, &ym);
                for j in 0..d {
                    let fd = (gp[j] - gm[j]) / (2.0 * h);
                    assert!((fd - hess[(j, i)]).abs() <= 1e-5 * hess.norm().max(1.0), "hess {j}{i} at {y:?}");
                }
            }
        }
        assert!(checked > 300);
    }
}
