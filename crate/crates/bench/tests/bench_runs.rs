//! Benchmark driver behaviour: row layout, determinism, metric agreement.

use hodlr::{hqr, TruncationControl};
use hodlr_bench::config::{BenchConfig, MatrixSpec, Method};
use hodlr_bench::gen::{gen_cauchy, gen_random_hodlr, CauchyConfig, CauchyParams};
use hodlr_bench::metrics::{accuracy, hqr_structure, summarize, Factors, MetricsOptions, Operand};
use hodlr_bench::record::{to_csv, CSV_HEADER};
use hodlr_bench::run::run_bench;

fn estimated() -> MetricsOptions {
    MetricsOptions {
        dense_limit: 0,
        estimate: true,
        ..MetricsOptions::default()
    }
}

#[test]
fn six_rows_per_seed_for_three_methods_and_two_sizes() {
    let config = BenchConfig {
        methods: vec![Method::Hqr, Method::Cholqr, Method::Cholqr2],
        sizes: vec![1000, 2000],
        seeds: vec![0, 1],
        metrics: estimated(),
        ..BenchConfig::default()
    };
    let rows = run_bench(&config).unwrap();
    assert_eq!(rows.len(), 12);
    for seed in [0, 1] {
        assert_eq!(rows.iter().filter(|r| r.seed == seed).count(), 6);
    }
    let csv = to_csv(&rows);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some(CSV_HEADER));
    assert_eq!(lines.count(), 12);
}

#[test]
fn identical_config_gives_identical_numbers() {
    let config = BenchConfig {
        methods: vec![Method::Hqr, Method::Cholqr2, Method::Dense],
        sizes: vec![200, 300],
        seeds: vec![5],
        n_min: 50,
        ..BenchConfig::default()
    };
    let strip_time = |csv: String| -> Vec<String> {
        csv.lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(14);
                f.join(",")
            })
            .collect()
    };
    let a = strip_time(to_csv(&run_bench(&config).unwrap()));
    let b = strip_time(to_csv(&run_bench(&config).unwrap()));
    assert_eq!(a, b);
}

#[test]
fn estimated_and_dense_e_orth_agree_to_two_digits() {
    // Truncation error must dominate roundoff for the estimate to be comparable.
    let a = gen_cauchy(&CauchyParams::new(CauchyConfig::A1, 512, 3), 64, 1e-12).unwrap();
    let f = hqr(&a, 1e-6).unwrap();
    let dense = accuracy(Operand::Hodlr(&a), &Factors::Wy(&f), &MetricsOptions::default()).unwrap();
    let est = accuracy(Operand::Hodlr(&a), &Factors::Wy(&f), &estimated()).unwrap();
    let digits = |x: f64, y: f64| (x - y).abs() <= 0.05 * x.abs().max(y.abs());
    assert!(digits(dense.e_orth, est.e_orth), "{dense:?} vs {est:?}");
    assert!(digits(dense.e_acc, est.e_acc), "{dense:?} vs {est:?}");
}

#[test]
fn hqr_on_random_instance_is_orthogonal_to_working_precision() {
    let a = gen_random_hodlr(1000, 250, 1, 0);
    let f = hqr(&a, 1e-10).unwrap();
    let acc = accuracy(Operand::Hodlr(&a), &Factors::Wy(&f), &MetricsOptions::default()).unwrap();
    assert!((1e-16..=1e-12).contains(&acc.e_orth), "{acc:?}");
    let kappa = summarize(Operand::Hodlr(&a), &MetricsOptions::default()).unwrap().kappa2;
    assert!((1e3..=1e7).contains(&kappa), "kappa {kappa:e}");
}

#[test]
fn y_ranks_never_exceed_q_ranks() {
    for n in [500, 1000, 2000] {
        let a = gen_random_hodlr(n, 250, 1, 1);
        let f = hqr(&a, 1e-10).unwrap();
        let s = hqr_structure(&a, &f, &TruncationControl::new(1e-10)).unwrap();
        assert!(s.rank_y.unwrap() <= s.rank_q.unwrap(), "n = {n}: {s:?}");
    }
}

#[test]
fn cauchy_conditioning_grows_across_configurations() {
    let kappas: Vec<f64> = CauchyConfig::ALL
        .into_iter()
        .map(|c| {
            let a = gen_cauchy(&CauchyParams::new(c, 1000, 0), 125, 1e-12).unwrap();
            summarize(Operand::Hodlr(&a), &MetricsOptions::default()).unwrap().kappa2
        })
        .collect();
    assert!(kappas[0] < kappas[1] && kappas[1] < kappas[2], "{kappas:?}");
}

#[test]
fn cholqr_orthogonality_loss_scales_with_kappa_squared() {
    let config = BenchConfig {
        matrix: MatrixSpec::Cauchy(CauchyConfig::A3),
        methods: vec![Method::Cholqr],
        sizes: vec![1000],
        ..BenchConfig::default()
    };
    let row = &run_bench(&config).unwrap()[0];
    let loss = row.kappa2 * row.kappa2 * f64::EPSILON;
    assert!(row.failed || row.e_orth >= 1e-2 * loss.min(1.0), "{row:?}");
}
