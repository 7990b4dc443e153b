mod common;

use chrono::NaiveDate;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use drinkctx::learn::smote::balanced_counts;
use drinkctx::learn::{binary_auc, roc_auc_macro, smote_balance, Matrix};
use drinkctx::matching::match_window;
use drinkctx::night::{night_start_ms, NIGHT_MS, SLOT_MS};
use drinkctx::stats::{cohens_d, pearson, point_biserial, t_test, welch_t_test};

use common::*;

fn vec_pair(max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (4..=max).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0..100.0f64, n),
            prop::collection::vec(-100.0..100.0f64, n),
        )
    })
}

fn two_samples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-50.0..50.0f64, 2..30),
        prop::collection::vec(-50.0..50.0f64, 2..30),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn pearson_matches_pairwise_oracle((x, y) in vec_pair(50)) {
        let r = pearson(&x, &y).unwrap();
        prop_assert!((r.r - brute_pearson(&x, &y)).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&r.p));
        let back = pearson(&y, &x).unwrap();
        prop_assert!((r.r - back.r).abs() < 1e-12);
    }

    #[test]
    fn pearson_is_affine_invariant((x, y) in vec_pair(30), a in 0.5..4.0f64, b in -10.0..10.0f64) {
        let r = pearson(&x, &y).unwrap().r;
        let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let neg: Vec<f64> = x.iter().map(|v| -a * v + b).collect();
        prop_assert!((pearson(&xs, &y).unwrap().r - r).abs() < 1e-9);
        prop_assert!((pearson(&neg, &y).unwrap().r + r).abs() < 1e-9);
    }

    #[test]
    fn point_biserial_is_pearson_on_codes(
        y in prop::collection::vec(-10.0..10.0f64, 6..40),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b: Vec<bool> = (0..y.len()).map(|_| rng.random()).collect();
        b[0] = true;
        b[1] = false;
        let pb = point_biserial(&b, &y).unwrap();
        let coded: Vec<f64> = b.iter().map(|&v| if v { 1.0 } else { 0.0 }).collect();
        let pc = pearson(&coded, &y).unwrap();
        prop_assert_eq!(pb.r.to_bits(), pc.r.to_bits());
        prop_assert!((pb.r - brute_point_biserial(&b, &y)).abs() < 1e-9);
    }

    #[test]
    fn t_and_d_match_oracles((a, b) in two_samples()) {
        let t = t_test(&a, &b).unwrap();
        prop_assert!((t.t - brute_t(&a, &b)).abs() < 1e-9 * (1.0 + t.t.abs()));
        let d = cohens_d(&a, &b).unwrap();
        prop_assert!((d.d - brute_d(&a, &b)).abs() < 1e-9 * (1.0 + d.d.abs()));
        prop_assert!(d.ci_low <= d.d && d.d <= d.ci_high);
    }

    #[test]
    fn effect_size_is_antisymmetric((a, b) in two_samples()) {
        let ab = cohens_d(&a, &b).unwrap();
        let ba = cohens_d(&b, &a).unwrap();
        prop_assert!((ab.d + ba.d).abs() < 1e-12);
        prop_assert!((ab.ci_low + ba.ci_high).abs() < 1e-12);
        prop_assert!((ab.p - ba.p).abs() < 1e-12);
        let w1 = welch_t_test(&a, &b).unwrap();
        let w2 = welch_t_test(&b, &a).unwrap();
        prop_assert!((w1.t + w2.t).abs() < 1e-12);
    }

    #[test]
    fn binary_auc_equals_two_class_macro(
        scores in prop::collection::vec(0.0..1.0f64, 4..80),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut truth: Vec<bool> = (0..scores.len()).map(|_| rng.random()).collect();
        truth[0] = true;
        truth[1] = false;
        let labels: Vec<u8> = truth.iter().map(|&t| u8::from(t)).collect();
        let mut m = Matrix::with_cols(2);
        for &s in &scores {
            m.push_row(&[1.0 - s, s]);
        }
        let bin = binary_auc(&truth, &scores).unwrap();
        prop_assert_eq!(roc_auc_macro(&labels, &m).unwrap(), bin);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((binary_auc(&truth, &flipped).unwrap() + bin - 1.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_counts_respect_doubling(counts in prop::collection::vec(0usize..500, 2..5)) {
        let out = balanced_counts(&counts);
        let target = out.iter().copied().find(|&n| n > 0);
        let max = counts.iter().copied().max().unwrap();
        for (&n, &o) in counts.iter().zip(&out) {
            if n == 0 {
                prop_assert_eq!(o, 0);
            } else {
                prop_assert_eq!(Some(o), target);
                prop_assert!(o <= 2 * n && o <= max);
            }
        }
    }

    #[test]
    fn smote_points_lie_on_neighbor_segments(
        n0 in 2usize..15,
        n1 in 2usize..40,
        k in 1usize..6,
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Matrix::with_cols(3);
        let mut y = Vec::new();
        for (c, n) in [(0u8, n0), (1u8, n1)] {
            for _ in 0..n {
                let row: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + f64::from(c)).collect();
                x.push_row(&row);
                y.push(c);
            }
        }
        let out = smote_balance(&x, &y, 2, k, &mut rng).unwrap();
        let want = balanced_counts(&[n0, n1]);
        prop_assert_eq!(out.y.iter().filter(|&&c| c == 0).count(), want[0]);
        prop_assert_eq!(out.y.iter().filter(|&&c| c == 1).count(), want[1]);
        for s in &out.synthetic {
            let class = y[s.parent];
            prop_assert_eq!(y[s.neighbor], class);
            let members: Vec<usize> = (0..y.len()).filter(|&i| y[i] == class).collect();
            let radius = brute_knn_radius(&x, &members, s.parent, k);
            prop_assert!(sq_dist(x.row(s.parent), x.row(s.neighbor)) <= radius + 1e-12);
            for j in 0..3 {
                let (a, b) = (x.get(s.parent, j), x.get(s.neighbor, j));
                prop_assert!((out.x.get(s.row, j) - (a + s.gap * (b - a))).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn windows_translate_with_the_report(offset in 0i64..NIGHT_MS, weeks in 0i64..20) {
        let friday = NaiveDate::from_ymd_opt(2019, 10, 4).unwrap();
        let base = night_start_ms(friday) + offset;
        let later = base + weeks * 7 * 24 * 3_600_000;
        let a = match_window(base, 6);
        let b = match_window(later, 6);
        prop_assert_eq!(a.map(|w| w.range), b.map(|w| w.range));
        if let (Ok(w), Ok(next)) = (match_window(base, 6), match_window(base + SLOT_MS, 6)) {
            prop_assert_eq!(next.range.start, w.range.start + 1);
            prop_assert_eq!(next.range.len(), 6);
        }
    }
}

#[test]
fn t_cdf_matches_quadrature_on_a_grid() {
    for df in [1.0, 2.5, 6.0, 25.0] {
        for t in [-6.0, -1.3, 0.0, 0.4, 2.2, 9.0] {
            let got = drinkctx::stats::student_t_cdf(t, df);
            assert!((got - simpson_t_cdf(t, df)).abs() < 1e-6, "df {df} t {t}");
        }
    }
}
