mod common;

use common::{brute_ss, enumerate_p, f_oracle, ln_gamma, t_oracle};
use hudtrust::stats::dist::{f_upper, t_two_tailed};
use hudtrust::stats::mwu::{normal_p, u_distribution};
use hudtrust::stats::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn obs(subject: u32, between: &str, within: &str, value: f64) -> MixedObs {
    MixedObs {
        subject,
        between: between.into(),
        within: within.into(),
        value,
    }
}

fn table(values: &[Vec<f64>], groups: &[&str]) -> MixedDesignTable {
    let mut rows = Vec::new();
    for (k, row) in values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            rows.push(obs(k as u32 + 1, groups[k], &format!("e{j}"), *v));
        }
    }
    MixedDesignTable::new(rows).unwrap()
}

#[test]
fn anova_matches_brute_force_on_hand_table() {
    let values = vec![
        vec![3.0, 5.0],
        vec![4.0, 7.0],
        vec![6.0, 6.5],
        vec![8.0, 9.5],
    ];
    let groups = ["OMN", "OMN", "SEL", "SEL"];
    let r = mixed_anova(&table(&values, &groups)).unwrap();
    let ss = brute_ss(&values, &groups);
    let f_a = (ss.a / 1.0) / (ss.s_a / 2.0);
    let f_b = (ss.b / 1.0) / (ss.bs_a / 2.0);
    let f_ab = (ss.ab / 1.0) / (ss.bs_a / 2.0);
    assert!((r.between.f - f_a).abs() < 1e-9, "{} vs {f_a}", r.between.f);
    assert!((r.within.f - f_b).abs() < 1e-9);
    assert!((r.interaction.f - f_ab).abs() < 1e-9);
    assert_eq!((r.between.df_num, r.between.df_den), (1.0, 2.0));
    assert_eq!((r.within.df_num, r.within.df_den), (1.0, 2.0));
}

#[test]
fn anova_identical_values_give_zero_f() {
    let values = vec![vec![2.5; 3]; 6];
    let groups = ["OMN", "OMN", "OMN", "SEL", "SEL", "SEL"];
    let r = mixed_anova(&table(&values, &groups)).unwrap();
    for e in [&r.between, &r.within, &r.interaction] {
        assert_eq!((e.f, e.p), (0.0, 1.0));
    }
}

fn random_table(
    rng: &mut ChaCha8Rng,
    n_per: usize,
    b: usize,
) -> (Vec<Vec<f64>>, Vec<&'static str>) {
    let mut values = Vec::new();
    let mut groups = Vec::new();
    for k in 0..2 * n_per {
        let g = if k < n_per { "OMN" } else { "SEL" };
        let shift = rng.gen_range(-1.0..1.0);
        values.push(
            (0..b)
                .map(|j| shift + 0.3 * j as f64 + rng.gen_range(-1.0..1.0))
                .collect(),
        );
        groups.push(g);
    }
    (values, groups)
}

#[test]
fn anova_degrees_of_freedom_for_thirty_subjects() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (values, groups) = random_table(&mut rng, 15, 7);
    let r = mixed_anova(&table(&values, &groups)).unwrap();
    assert_eq!((r.between.df_num, r.between.df_den), (1.0, 28.0));
    assert_eq!((r.within.df_num, r.within.df_den), (6.0, 168.0));
    assert_eq!((r.interaction.df_num, r.interaction.df_den), (6.0, 168.0));
    assert_eq!(r.n_subjects, 30);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn anova_ss_identity_and_oracle(seed in any::<u64>(), n_per in 2..8usize, b in 2..6usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (values, groups) = random_table(&mut rng, n_per, b);
        let r = mixed_anova(&table(&values, &groups)).unwrap();
        let ss = brute_ss(&values, &groups);
        let sum = r.between.ss + r.ss_subjects_error + r.within.ss + r.interaction.ss + r.ss_within_error;
        prop_assert!((sum - r.ss_total).abs() <= 1e-8 * r.ss_total);
        prop_assert!((ss.total - r.ss_total).abs() <= 1e-9 * ss.total);
        for (got, want) in [
            (r.between.ss, ss.a), (r.ss_subjects_error, ss.s_a), (r.within.ss, ss.b),
            (r.interaction.ss, ss.ab), (r.ss_within_error, ss.bs_a),
        ] {
            prop_assert!((got - want).abs() <= 1e-9 * ss.total.max(1.0));
        }
        for e in [&r.between, &r.within, &r.interaction] {
            prop_assert!(e.f >= 0.0);
            prop_assert!(e.p > 0.0 && e.p <= 1.0);
        }
    }

    #[test]
    fn anova_is_scale_equivariant(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (values, groups) = random_table(&mut rng, 5, 4);
        let t = table(&values, &groups);
        let r1 = mixed_anova(&t).unwrap();
        let r10 = mixed_anova(&t.scaled(10.0)).unwrap();
        for (a, b) in [(&r1.between, &r10.between), (&r1.within, &r10.within), (&r1.interaction, &r10.interaction)] {
            prop_assert!((a.f - b.f).abs() <= 1e-9 * a.f.max(1.0));
            prop_assert!((a.p - b.p).abs() <= 1e-12);
        }
    }
}

#[test]
fn anova_design_errors() {
    let values = vec![vec![1.0, 2.0], vec![2.0, 3.5], vec![0.0, 1.0]];
    let r = mixed_anova(&table(&values, &["OMN", "OMN", "OMN"]));
    assert!(matches!(r, Err(StatsError::Design(_))));
    let one_level = vec![vec![1.0], vec![2.0], vec![3.0], vec![5.0]];
    assert!(matches!(
        mixed_anova(&table(&one_level, &["OMN", "OMN", "SEL", "SEL"])),
        Err(StatsError::Design(_))
    ));
    let dup = vec![obs(1, "OMN", "e0", 1.0), obs(1, "OMN", "e0", 2.0)];
    assert!(MixedDesignTable::new(dup).is_err());
    let two_groups = vec![obs(1, "OMN", "e0", 1.0), obs(1, "SEL", "e1", 2.0)];
    assert!(MixedDesignTable::new(two_groups).is_err());
}

#[test]
fn anova_drops_incomplete_subjects() {
    let values = vec![
        vec![3.0, 5.0],
        vec![4.0, 7.0],
        vec![6.0, 6.5],
        vec![8.0, 9.5],
        vec![1.0, 4.0],
        vec![2.0, 2.5],
    ];
    let groups = ["OMN", "OMN", "OMN", "SEL", "SEL", "SEL"];
    let mut t = table(&values, &groups);
    t.rows.retain(|r| !(r.subject == 6 && r.within == "e1"));
    let r = mixed_anova(&t).unwrap();
    assert_eq!(r.dropped, vec![6]);
    assert_eq!(r.n_subjects, 5);
}

#[test]
fn bonferroni_cases() {
    assert_eq!(bonferroni(&[0.04]), vec![0.04]);
    assert_eq!(bonferroni(&[0.3; 7]), vec![1.0; 7]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let m = rng.gen_range(1..30);
        let p: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
        for (raw, adj) in p.iter().zip(bonferroni(&p)) {
            assert_eq!(adj, f64::min(1.0, m as f64 * raw));
        }
    }
}

#[test]
fn posthoc_families() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (values, groups) = random_table(&mut rng, 6, 4);
    let t = table(&values, &groups);
    let between = posthoc_between(&t).unwrap();
    assert_eq!(between.len(), 4);
    let within = posthoc_within(&t).unwrap();
    assert_eq!(within.len(), 12);
    for c in &between {
        assert_eq!(c.p_adjusted, (c.test.p * 4.0).min(1.0));
        assert_eq!(c.test.method, Method::IndependentT);
    }
    for c in &within {
        assert_eq!(c.p_adjusted, (c.test.p * 6.0).min(1.0));
        assert_eq!(c.test.method, Method::PairedT);
    }
}

#[test]
fn paired_t_cases() {
    let r = paired_ttest(&[0.0, 0.0, 0.0, 0.0], &[1.0, -1.0, 2.0, -2.0]).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert!((r.p - 1.0).abs() < 1e-12);
    assert!(matches!(
        paired_ttest(&[0.0; 3], &[1.0; 3]),
        Err(StatsError::Degenerate(_))
    ));
    assert!(paired_ttest(&[1.0], &[2.0]).is_err());
    assert!(paired_ttest(&[1.0, 2.0], &[2.0]).is_err());
}

proptest! {
    #[test]
    fn paired_t_matches_textbook_formula(pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 2..40)) {
        let pre: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let post: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let n = pre.len() as f64;
        let d: Vec<f64> = pre.iter().zip(&post).map(|(a, b)| b - a).collect();
        let mean = d.iter().sum::<f64>() / n;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        prop_assume!(sd > 1e-9);
        let t = mean / (sd / n.sqrt());
        let r = paired_ttest(&pre, &post).unwrap();
        prop_assert!((r.statistic - t).abs() <= 1e-10 * t.abs().max(1.0));
        prop_assert_eq!(r.df.clone(), vec![n - 1.0]);
        prop_assert!(r.p > 0.0 && r.p <= 1.0);
        let scaled = paired_ttest(
            &pre.iter().map(|v| v * 10.0).collect::<Vec<_>>(),
            &post.iter().map(|v| v * 10.0).collect::<Vec<_>>(),
        ).unwrap();
        prop_assert!((scaled.statistic - r.statistic).abs() <= 1e-9 * r.statistic.abs().max(1.0));
        prop_assert!((scaled.p - r.p).abs() <= 1e-12);
    }
}

#[test]
fn one_sample_equals_paired_against_zero() {
    let d = [0.4, -0.1, 0.9, 0.3, 0.55];
    let a = one_sample_ttest(&d).unwrap();
    let b = paired_ttest(&[0.0; 5], &d).unwrap();
    assert_eq!((a.statistic, a.p), (b.statistic, b.p));
}

#[test]
fn independent_t_textbook() {
    let a = [5.1, 4.9, 6.2, 5.8, 6.0];
    let b = [4.1, 4.5, 3.9, 5.0];
    let (ma, mb) = (a.iter().sum::<f64>() / 5.0, b.iter().sum::<f64>() / 4.0);
    let va = a.iter().map(|v| (v - ma).powi(2)).sum::<f64>();
    let vb = b.iter().map(|v| (v - mb).powi(2)).sum::<f64>();
    let sp = (va + vb) / 7.0;
    let t = (ma - mb) / (sp * (1.0 / 5.0 + 1.0 / 4.0)).sqrt();
    let r = independent_ttest(&a, &b).unwrap();
    assert!((r.statistic - t).abs() < 1e-12);
    assert_eq!(r.df, vec![7.0]);
}

#[test]
fn mann_whitney_examples() {
    let r = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert_eq!(r.statistic, 0.0);
    assert!((r.p - 0.1).abs() < 1e-12);
    assert_eq!(r.method, Method::MannWhitneyExact);
    let same = mann_whitney_u(&[2.0, 4.0, 6.0], &[2.0, 4.0, 6.0]).unwrap();
    assert_eq!(same.statistic, 4.5);
    assert!(same.p > 0.99);
    assert!(mann_whitney_u(&[], &[1.0]).is_err());
    let dist = u_distribution(3, 3);
    assert_eq!(dist.iter().sum::<f64>(), 20.0);
    assert_eq!(dist[0], 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn mann_whitney_exact_matches_enumeration(seed in any::<u64>(), na in 1..9usize, nb in 1..9usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..na).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..nb).map(|_| rng.gen_range(0.2..1.2)).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        let (u, p) = enumerate_p(&a, &b);
        prop_assert_eq!(r.statistic, u);
        prop_assert!((r.p - p).abs() < 1e-12);
        let s = mann_whitney_u(&b, &a).unwrap();
        prop_assert_eq!(s.statistic, (na * nb) as f64 - r.statistic);
        prop_assert!((s.p - r.p).abs() < 1e-12);
        let scaled = mann_whitney_u(
            &a.iter().map(|v| v * 10.0).collect::<Vec<_>>(),
            &b.iter().map(|v| v * 10.0).collect::<Vec<_>>(),
        ).unwrap();
        prop_assert_eq!((scaled.statistic, scaled.p), (r.statistic, r.p));
    }

    #[test]
    fn mann_whitney_normal_close_to_exact_at_eight(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.gen_range(0.1..1.1)).collect();
        let (u, p) = enumerate_p(&a, &b);
        let ties = vec![1; 16];
        prop_assert!((normal_p(u, 8, 8, &ties) - p).abs() < 0.02);
    }

    #[test]
    fn mann_whitney_with_ties_is_symmetric(
        a in prop::collection::vec(1..8u8, 1..20), b in prop::collection::vec(1..8u8, 1..20),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        let s = mann_whitney_u(&b, &a).unwrap();
        prop_assert_eq!(s.statistic, (a.len() * b.len()) as f64 - r.statistic);
        prop_assert!((s.p - r.p).abs() < 1e-12);
        prop_assert!(r.p > 0.0 && r.p <= 1.0);
    }
}

#[test]
fn ln_gamma_oracle_is_sound() {
    assert!(ln_gamma(1.0).abs() < 1e-13);
    assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    assert!((ln_gamma(6.0) - 120f64.ln()).abs() < 1e-13);
}

#[test]
fn t_tail_matches_numeric_integration() {
    let points = [
        (0.5, 1.0),
        (1.0, 2.0),
        (2.0, 3.0),
        (0.3, 5.0),
        (2.5, 9.0),
        (1.7, 14.0),
        (2.05, 28.0),
        (3.1, 29.0),
        (0.01, 40.0),
        (4.0, 60.0),
        (1.96, 168.0),
        (6.0, 10.0),
    ];
    for (t, df) in points {
        let got = t_two_tailed(t, df);
        let want = t_oracle(t, df);
        assert!((got - want).abs() < 1e-10, "t={t} df={df}: {got} vs {want}");
    }
}

#[test]
fn f_tail_matches_numeric_integration() {
    let points = [
        (4.72, 1.0, 28.0),
        (13.9, 6.0, 168.0),
        (14.34, 4.0, 9.0),
        (0.5, 1.0, 2.0),
        (1.0, 2.0, 2.0),
        (2.2, 3.0, 12.0),
        (0.1, 6.0, 168.0),
        (3.0, 1.0, 5.0),
        (7.5, 2.0, 30.0),
        (1.5, 5.0, 5.0),
        (0.9, 10.0, 40.0),
        (25.0, 1.0, 100.0),
    ];
    for (f, d1, d2) in points {
        let got = f_upper(f, d1, d2);
        let want = f_oracle(f, d1, d2);
        assert!(
            (got - want).abs() < 1e-10,
            "F({d1},{d2})={f}: {got} vs {want}"
        );
    }
    assert_eq!(f_upper(0.0, 1.0, 2.0), 1.0);
}

#[test]
fn regression_exact_fit() {
    let x: Vec<Vec<f64>> = (0..10)
        .map(|i| vec![i as f64, (i * i % 7) as f64])
        .collect();
    let y: Vec<f64> = x.iter().map(|r| 1.5 + 2.0 * r[0] - 0.5 * r[1]).collect();
    let r = linear_regression(&x, &y).unwrap();
    assert!((r.r2 - 1.0).abs() < 1e-12);
    assert!(r.residuals.iter().all(|e| e.abs() < 1e-10));
    for (got, want) in r.coefficients.iter().zip([1.5, 2.0, -0.5]) {
        assert!((got - want).abs() < 1e-10);
    }
}

#[test]
fn regression_single_predictor_closed_form() {
    let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let y = [2.1, 3.9, 6.2, 7.8, 10.1, 12.2];
    let n = 6.0;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    let rows: Vec<Vec<f64>> = x.iter().map(|v| vec![*v]).collect();
    let r = linear_regression(&rows, &y).unwrap();
    assert!((r.coefficients[0] - intercept).abs() < 1e-12);
    assert!((r.coefficients[1] - slope).abs() < 1e-12);
    assert!((r.r2 - r2).abs() < 1e-12);
    assert!((r.adj_r2 - (1.0 - (1.0 - r2) * 5.0 / 4.0)).abs() < 1e-12);
    // With one predictor the overall F is the squared slope t.
    let t = slope / r.std_errors[1];
    assert!((r.overall.statistic - t * t).abs() < 1e-8 * t * t);
    assert!((r.overall.p - r.coefficient_p[1]).abs() < 1e-10);
}

#[test]
fn regression_shape_fourteen_by_four() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<Vec<f64>> = (0..14)
        .map(|_| (0..4).map(|_| rng.gen_range(1.0..7.0)).collect())
        .collect();
    let y: Vec<f64> = x
        .iter()
        .map(|r| 0.3 * r[0] - 0.2 * r[1] + rng.gen_range(-0.5..0.5))
        .collect();
    let r = linear_regression(&x, &y).unwrap();
    assert_eq!(r.overall.df, vec![4.0, 9.0]);
    assert!((r.adj_r2 - (1.0 - (1.0 - r.r2) * 13.0 / 9.0)).abs() < 1e-12);
    assert!(r.overall.p > 0.0 && r.overall.p <= 1.0);
    let scaled: Vec<f64> = y.iter().map(|v| v * 10.0).collect();
    let s = linear_regression(&x, &scaled).unwrap();
    assert!((s.overall.statistic - r.overall.statistic).abs() < 1e-8 * r.overall.statistic);
    assert!((s.overall.p - r.overall.p).abs() < 1e-12);
}

#[test]
fn regression_errors() {
    let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
    let y: Vec<f64> = (0..8).map(|i| i as f64 + (i % 3) as f64).collect();
    assert!(matches!(
        linear_regression(&x, &y),
        Err(StatsError::Singular(_))
    ));
    let short: Vec<Vec<f64>> = (0..3)
        .map(|i| vec![i as f64, 1.0 / (i as f64 + 1.0)])
        .collect();
    assert!(linear_regression(&short, &[1.0, 2.0, 3.0]).is_err());
    let x1: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
    assert!(matches!(
        linear_regression(&x1, &[2.0; 5]),
        Err(StatsError::Degenerate(_))
    ));
}

#[test]
fn rating_csv_round_trip() {
    use hudtrust::physio::Group;
    use hudtrust::stats::table::{read_ratings, write_ratings};
    let rows = vec![
        RatingRow {
            subject: 1,
            group: Group::Omn,
            question_id: "Dog:q1".into(),
            rating: 5.0,
        },
        RatingRow {
            subject: 2,
            group: Group::Sel,
            question_id: "trust".into(),
            rating: 7.0,
        },
    ];
    assert_eq!(read_ratings("r.csv", &write_ratings(&rows)).unwrap(), rows);
}
