use phnlab_core::em::{sample_invariant, SamplerConfig};
use phnlab_core::stats::{clt_experiment, w1_sliced, w1_to_quantiles, CltConfig, EmpiricalMeasure};
use phnlab_core::{Exact1DInvariant, ModelSpec, TestFunction};
use proptest::prelude::*;

#[test]
fn fine_step_em_matches_exact_law() {
    let model = ModelSpec::exponential(0.5, 1.0).build().unwrap();
    let law = Exact1DInvariant::new(0.5, 1.0).unwrap();
    let mut cfg = SamplerConfig::new(1e-3, 20_000, 20_000, 11);
    cfg.n_chains = 8;
    let set = sample_invariant(&model, &cfg).unwrap();
    let w1 = w1_to_quantiles(&set.points, |u| law.quantile(u)).unwrap();
    assert!(w1 < 0.06, "w1 = {w1}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn sliced_w1_of_a_translate_is_its_projected_length(
        shift in prop::collection::vec(-3.0f64..3.0, 2),
        pts in prop::collection::vec(-5.0f64..5.0, 2..60),
    ) {
        let pts = if pts.len() % 2 == 1 { pts[..pts.len() - 1].to_vec() } else { pts };
        let moved: Vec<f64> = pts.chunks(2).flat_map(|r| [r[0] + shift[0], r[1] + shift[1]]).collect();
        let a = EmpiricalMeasure::new(2, pts).unwrap();
        let b = EmpiricalMeasure::new(2, moved).unwrap();
        let dirs = phnlab_core::stats::sliced_directions(2, 8, 5);
        let expect = dirs.iter().map(|u| (u[0] * shift[0] + u[1] * shift[1]).abs()).sum::<f64>() / 8.0;
        let got = w1_sliced(&a, &b, 8, 5).unwrap();
        prop_assert!((got - expect).abs() < 1e-12, "{} vs {}", got, expect);
    }
}

#[test]
fn clt_mean_of_means_tracks_the_invariant_probability() {
    let model = ModelSpec::exponential(1.0, 1.0).build().unwrap();
    let law = Exact1DInvariant::new(1.0, 1.0).unwrap();
    let cfg = CltConfig::new(TestFunction::IndicatorE { c: 0.0 }, 0.01, 2000, 60, 4);
    let rep = clt_experiment(&model, &cfg).unwrap();
    let target = 1.0 - law.cdf(0.0);
    let slack = 4.0 * rep.mean_of_means_stderr + 0.02;
    assert!((rep.mean_of_means - target).abs() < slack, "{} vs {target}", rep.mean_of_means);
}
