use phnlab_core::{DiffusionModel, ModelSpec};
use proptest::prelude::*;

fn models() -> Vec<DiffusionModel> {
    vec![
        ModelSpec::exponential(1.0, 1.0).build().unwrap(),
        ModelSpec::erlang2(1.0, 1.0).build().unwrap(),
        ModelSpec::erlang2(0.3, -0.5).build().unwrap(),
        ModelSpec {
            p: vec![0.6, 0.4, 0.0],
            routing: vec![vec![0.0, 0.5, 0.2], vec![0.1, 0.0, 0.3], vec![0.0, 0.0, 0.0]],
            v: vec![1.5, 3.0, 2.0],
            alpha: 2.0,
            beta: 0.7,
        }
        .build()
        .unwrap(),
    ]
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-50.0f64..50.0, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn drift_is_lipschitz(k in 0usize..4, xs in point(3), ys in point(3)) {
        let m = &models()[k];
        let d = m.dim();
        let (x, y) = (&xs[..d], &ys[..d]);
        let lhs = norm(&diff(&m.drift(x), &m.drift(y)));
        prop_assert!(lhs <= m.c_op() * norm(&diff(x, y)) * (1.0 + 1e-12) + 1e-12);
        prop_assert!(norm(&m.drift(x)) <= m.c_op_tilde() * (1.0 + norm(x)));
    }

    #[test]
    fn smoothing_error_is_order_eps(k in 0usize..4, eps in 1e-4f64..0.9, scale in 0.0f64..3.0, s in -1.0f64..1.0, t in -1.0f64..1.0, u in -1.0f64..1.0) {
        let m = &models()[k];
        // Points concentrated around the kink band.
        let x: Vec<f64> = [s, t, u][..m.dim()].iter().map(|v| v * scale * eps).collect();
        let gap = norm(&diff(&m.smoothed_drift(&x, eps).unwrap(), &m.drift(&x)));
        prop_assert!(gap <= m.c_op() * eps);
    }

    #[test]
    fn drift_is_continuous_across_the_kink(k in 0usize..4, a in -5.0f64..5.0, b in -5.0f64..5.0, dir in prop::collection::vec(-1.0f64..1.0, 3), t in 1e-6f64..1.0) {
        let m = &models()[k];
        let d = m.dim();
        // x on the hyperplane e'x = 0.
        let mut x: Vec<f64> = [a, b, 0.0][..d].to_vec();
        let s: f64 = x.iter().sum();
        x[d - 1] -= s;
        let u = &dir[..d];
        let un = norm(u).max(1e-9);
        let plus: Vec<f64> = x.iter().zip(u).map(|(xi, ui)| xi + t * ui / un).collect();
        let minus: Vec<f64> = x.iter().zip(u).map(|(xi, ui)| xi - t * ui / un).collect();
        let jump = norm(&diff(&m.drift(&plus), &m.drift(&minus)));
        prop_assert!(jump <= 2.0 * m.c_op() * t * (1.0 + 1e-12));
    }
}

#[test]
fn cholesky_reconstructs_covariance() {
    for m in models() {
        let s = m.sigma_sq();
        let l = m.sigma();
        let back = l * l.transpose();
        assert!((back - s).abs().max() <= 1e-10);
        assert!((s - s.transpose()).abs().max() <= 1e-12);
    }
}
