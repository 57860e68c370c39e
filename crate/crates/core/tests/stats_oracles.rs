#![allow(clippy::excessive_precision)]

use mogam::stats::special::{
    f_survival, incomplete_beta, ln_gamma, normal_cdf, studentized_range_cdf, studentized_range_quantile,
};
use mogam::stats::{one_way_anova, tukey_hsd};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

fn groups_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-50.0..50.0f64, 2..12), 2..6)
}

/// SSB/(k−1) ÷ SSW/(N−k) written out directly.
fn direct_f(groups: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    }
    (ssb / (groups.len() - 1) as f64) / (ssw / (all.len() - groups.len()) as f64)
}

proptest! {
    #[test]
    fn anova_matches_direct_formula(groups in groups_strategy()) {
        let r = one_way_anova(&groups).unwrap();
        let f = direct_f(&groups);
        prop_assert!((r.f - f).abs() <= 1e-9 * f.max(1.0), "{} vs {}", r.f, f);
        prop_assert!(r.f >= 0.0 && (0.0..=1.0).contains(&r.p));
    }

    #[test]
    fn anova_f_invariant_under_shift_and_positive_scale(groups in groups_strategy(),
                                                         scale in 0.01..100.0f64, shift in -1e3..1e3f64) {
        let moved: Vec<Vec<f64>> = groups.iter().map(|g| g.iter().map(|x| x * scale + shift).collect()).collect();
        let a = one_way_anova(&groups).unwrap();
        let b = one_way_anova(&moved).unwrap();
        prop_assert!((a.f - b.f).abs() <= 1e-9 * a.f.max(1.0), "{} vs {}", a.f, b.f);
    }

    #[test]
    fn anova_p_matches_statrs(groups in groups_strategy()) {
        let r = one_way_anova(&groups).unwrap();
        let oracle = FisherSnedecor::new(r.df_between as f64, r.df_within as f64).unwrap().sf(r.f);
        prop_assert!((r.p - oracle).abs() <= 1e-9, "{} vs {}", r.p, oracle);
    }

    #[test]
    fn f_survival_matches_statrs(f in 0.0..40.0f64, d1 in 1u32..30, d2 in 1u32..200) {
        let oracle = FisherSnedecor::new(d1 as f64, d2 as f64).unwrap().sf(f);
        let ours = f_survival(f, d1 as f64, d2 as f64);
        prop_assert!((ours - oracle).abs() <= 1e-10, "{} vs {}", ours, oracle);
    }

    #[test]
    fn incomplete_beta_matches_statrs(x in 0.0..=1.0f64, a in 0.1..50.0f64, b in 0.1..50.0f64) {
        let oracle = statrs::function::beta::beta_reg(a, b, x);
        prop_assert!((incomplete_beta(x, a, b) - oracle).abs() <= 1e-10);
    }

    #[test]
    fn ln_gamma_matches_statrs(x in 0.01..150.0f64) {
        let oracle = statrs::function::gamma::ln_gamma(x);
        prop_assert!((ln_gamma(x) - oracle).abs() <= 1e-10 * oracle.abs().max(1.0));
    }

    /// statrs' normal CDF drifts by up to ~2.5e-11 (checked against mpmath);
    /// the tight check is the high-precision table below.
    #[test]
    fn normal_cdf_matches_statrs(x in -8.0..8.0f64) {
        let oracle = Normal::new(0.0, 1.0).unwrap().cdf(x);
        prop_assert!((normal_cdf(x) - oracle).abs() <= 5e-11);
    }

    /// With two groups Q = √2·|T|, so P(Q < q) = 2·F_t(q/√2) − 1.
    #[test]
    fn studentized_range_two_groups_matches_t(q in 0.05..8.0f64, df in 1u32..120) {
        let t = StudentsT::new(0.0, 1.0, df as f64).unwrap();
        let oracle = 2.0 * t.cdf(q / 2f64.sqrt()) - 1.0;
        let ours = studentized_range_cdf(q, 2.0, df as f64);
        prop_assert!((ours - oracle).abs() <= 1e-10, "q={} df={}: {} vs {}", q, df, ours, oracle);
    }

    #[test]
    fn studentized_range_quantile_inverts_cdf(p in 0.5..0.99f64, k in 2u32..8, df in 5u32..100) {
        let q = studentized_range_quantile(p, k as f64, df as f64);
        prop_assert!((studentized_range_cdf(q, k as f64, df as f64) - p).abs() <= 1e-8);
    }

    /// Equal-size groups sharing one centred residual vector, with only the
    /// first mean moved. There F = q²/k for the (0, j) pairs, so a significant
    /// Tukey pair must come with an ANOVA rejection. The implication is not
    /// claimed in general: unbalanced layouts can break it.
    #[test]
    fn tukey_significance_implies_anova_rejection(residual in prop::collection::vec(-5.0..5.0f64, 2..10),
                                                  k in 2usize..6, shift in 0.0..10.0f64) {
        let mean = residual.iter().sum::<f64>() / residual.len() as f64;
        let centred: Vec<f64> = residual.iter().map(|r| r - mean).collect();
        prop_assume!(centred.iter().any(|r| r.abs() > 1e-6));
        let groups: Vec<Vec<f64>> = (0..k)
            .map(|g| centred.iter().map(|r| r + if g == 0 { shift } else { 0.0 }).collect())
            .collect();
        let alpha = 0.05;
        let anova = one_way_anova(&groups).unwrap();
        let tukey = tukey_hsd(&groups, alpha).unwrap();
        if !tukey.significant_pairs().is_empty() {
            prop_assert!(anova.p < alpha, "Tukey pairs {:?} but ANOVA p = {}", tukey.significant_pairs(), anova.p);
        }
    }
}

#[test]
fn hand_fixture_from_sum_of_squares() {
    // means 2, 3, 4; grand 3; SSB = 3·(1 + 0 + 1) = 6; SSW = 3·2 = 6
    let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0]]).unwrap();
    assert!((r.ss_between - 6.0).abs() < 1e-12 && (r.ss_within - 6.0).abs() < 1e-12);
    assert!((r.f - 3.0).abs() < 1e-12);
    // d1 = 2: p = (1 + 2F/d2)^(−d2/2) = 2^−3
    assert!((r.p - 0.125).abs() < 1e-12);
}

#[test]
fn normal_cdf_matches_high_precision_table() {
    // 40-digit mpmath values
    let table = [
        (-8.0, 6.2209605742717841235e-16),
        (-6.5, 4.0160005838591178083e-11),
        (-5.0, 2.8665157187919391167e-7),
        (-3.3, 0.0004834241423837775071),
        (-2.0, 0.0227501319481792072),
        (-1.6566, 0.048800186182013743088),
        (-1.0, 0.15865525393145705141),
        (-0.3, 0.38208857781104736693),
        (0.25, 0.59870632568292372424),
        (1.0, 0.84134474606854294859),
        (1.5, 0.933192798731141934),
        (2.0, 0.9772498680518207928),
        (2.7, 0.99653302619695933336),
        (4.0, 0.99996832875816688008),
        (5.5, 0.99999998101043753411),
        (7.0, 0.99999999999872018746),
    ];
    for (x, want) in table {
        let got = normal_cdf(x);
        assert!((got - want).abs() <= 4e-16 && (got - want).abs() <= 1e-13 * want, "x={x}: {got} vs {want}");
    }
}

#[test]
fn studentized_range_matches_scipy_table() {
    // scipy.stats.studentized_range.cdf; the infinite-df row also agrees
    // with a 25-digit mpmath quadrature
    let table = [
        (3.5, 3.0, 10.0, 0.9228966891615896),
        (1.2, 3.0, 4.0, 0.3033581073950115),
        (4.0, 4.0, 30.0, 0.9609281640345446),
        (5.0, 5.0, 2.0, 0.7933654695361432),
        (2.5, 3.0, 1000.0, 0.818965276592564),
        // scipy swaps in the infinite-df value above df = 1e5, so stay below it
        (3.3, 3.0, 50000.0, 0.9486801663440677),
        (0.7, 6.0, 20.0, 0.004197692998120578),
        (6.0, 3.0, 7.0, 0.9906706290454163),
        (3.0, 4.0, f64::INFINITY, 0.8537285189523403),
    ];
    for (q, k, df, want) in table {
        let got = studentized_range_cdf(q, k, df);
        assert!((got - want).abs() <= 1e-9, "q={q} k={k} df={df}: {got} vs {want}");
    }
}
