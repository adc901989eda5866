use std::f64::consts::PI;

use proptest::prelude::*;

use ginibre::angular::{angular_count_cov, angular_count_mean, angular_count_var, ArcWindow};
use ginibre::asymptotics::{count_var_prediction, Window};
use ginibre::mc::{ks_normal_test, run_batch, McConfig, Sampler, Statistic};
use ginibre::radial::{radial_count_cov, radial_count_var, radial_mean_exact, Ensemble, ModulusWindow, RadialTestFunction};

#[test]
fn fixed_arc_ratio_approaches_one_at_log_rate() {
    let arc = ArcWindow::symmetric(PI / 2.0).unwrap();
    let scaled: Vec<f64> = (10..=14)
        .map(|p| {
            let n = 1usize << p;
            let r = count_var_prediction(n, &Window::Angular(arc)).unwrap();
            let nf = n as f64;
            (r.ratio - 1.0).abs() * nf.sqrt() / nf.ln()
        })
        .collect();
    let c = scaled[0];
    assert!(scaled.iter().all(|s| *s <= 1.05 * c), "{scaled:?}");
}

#[test]
fn fixed_annulus_ratio_residual_is_order_root_n() {
    // From N = 1000 on, √N · 0.4 > 10 puts the annulus in the fixed regime.
    let w = Window::Radial(ModulusWindow::new(0.4, 0.8).unwrap());
    let scaled: Vec<f64> = [1000usize, 10_000, 100_000]
        .iter()
        .map(|&n| (count_var_prediction(n, &w).unwrap().ratio - 1.0).abs() * (n as f64).sqrt())
        .collect();
    assert!(scaled.iter().all(|s| *s < 0.05), "{scaled:?}");
}

#[test]
fn narrow_windows_become_poissonian() {
    let n = 10_000usize;
    let mut last = (f64::INFINITY, f64::INFINITY);
    for s in [0.3, 0.1, 0.03, 0.01, 0.003] {
        let width = s / (n as f64).sqrt();
        let arc = ArcWindow::symmetric(width).unwrap();
        let ang = (angular_count_var(n, &arc).unwrap() / angular_count_mean(n, &arc) - 1.0).abs();
        let w = ModulusWindow::new(0.5, 0.5 + width).unwrap();
        let mean = radial_mean_exact(&RadialTestFunction::Indicator(w), n, Ensemble::Complex).unwrap();
        let rad = (radial_count_var(n, w.a, w.b, Ensemble::Complex).unwrap() / mean - 1.0).abs();
        assert!(ang < last.0 && rad < last.1, "s = {s}: {ang} {rad}");
        last = (ang, rad);
    }
    assert!(last.0 < 0.01 && last.1 < 0.01, "{last:?}");
}

#[test]
fn smooth_radial_statistic_is_gaussian_with_limit_variance() {
    let stats = [Statistic::Radial(RadialTestFunction::monomial(2))];
    let cfg = McConfig { n: 1000, ensemble: Ensemble::Complex, samples: 40_000, seed: 17, sampler: Sampler::Gamma };
    let batch = run_batch(&cfg, &stats).unwrap();
    let (var, se) = batch.cov(0, 0).unwrap();
    assert!((var - 0.5).abs() < 3.0 * se, "{var} ± {se}");
    assert!(ks_normal_test(&batch.values[0]).unwrap().pass);
}

#[test]
fn arc_count_covariances_match_sampled_matrices() {
    let arcs = [ArcWindow::new(-1.0, 0.5).unwrap(), ArcWindow::new(0.5, 2.0).unwrap()];
    let stats: Vec<Statistic> = arcs.iter().map(|a| Statistic::ArcCount(*a)).collect();
    let n = 24;
    let cfg = McConfig { n, ensemble: Ensemble::Complex, samples: 6000, seed: 23, sampler: Sampler::Matrix };
    let batch = run_batch(&cfg, &stats).unwrap();
    for (i, j) in [(0, 0), (1, 1), (0, 1)] {
        let (value, se) = batch.cov(i, j).unwrap();
        let exact = angular_count_cov(n, &arcs[i], &arcs[j]).unwrap();
        assert!((value - exact).abs() < 3.0 * se, "({i}, {j}): {value} ± {se} vs {exact}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn arc_variance_is_rotation_invariant(len in 0.05f64..6.0, shift in -3.0f64..3.0, n in 2usize..300) {
        let centred = ArcWindow::symmetric(len).unwrap();
        let lo = (-0.5 * len + shift).max(-PI);
        let moved = ArcWindow::new(lo, lo + len).unwrap_or(centred);
        let (a, b) = (angular_count_var(n, &centred).unwrap(), angular_count_var(n, &moved).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0), "{a} vs {b}");
    }

    #[test]
    fn count_covariances_obey_cauchy_schwarz(
        a in 0.0f64..1.2, da in 0.01f64..0.6, b in 0.0f64..1.2, db in 0.01f64..0.6, n in 1usize..400,
    ) {
        let (w1, w2) = (ModulusWindow::new(a, a + da).unwrap(), ModulusWindow::new(b, b + db).unwrap());
        let v1 = radial_count_var(n, w1.a, w1.b, Ensemble::Complex).unwrap();
        let v2 = radial_count_var(n, w2.a, w2.b, Ensemble::Complex).unwrap();
        prop_assert_eq!(v1, radial_count_cov(n, &w1, &w1, Ensemble::Complex).unwrap());
        let c = radial_count_cov(n, &w1, &w2, Ensemble::Complex).unwrap();
        prop_assert!(c * c <= v1 * v2 * (1.0 + 1e-9) + 1e-300);
        prop_assert_eq!(c, radial_count_cov(n, &w2, &w1, Ensemble::Complex).unwrap());
    }

    #[test]
    fn arc_covariances_are_symmetric_and_bounded(lo1 in -3.0f64..2.5, l1 in 0.05f64..0.6, lo2 in -3.0f64..2.5, l2 in 0.05f64..0.6, n in 1usize..200) {
        let (a, b) = (ArcWindow::new(lo1, lo1 + l1).unwrap(), ArcWindow::new(lo2, lo2 + l2).unwrap());
        let c = angular_count_cov(n, &a, &b).unwrap();
        prop_assert!((c - angular_count_cov(n, &b, &a).unwrap()).abs() <= 1e-12 * c.abs().max(1.0));
        let (va, vb) = (angular_count_var(n, &a).unwrap(), angular_count_var(n, &b).unwrap());
        prop_assert!(c * c <= va * vb * (1.0 + 1e-9));
    }
}
