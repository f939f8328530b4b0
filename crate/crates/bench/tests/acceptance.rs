//! End-to-end acceptance checks. Every criterion prints one PASS/FAIL line;
//! the test fails if any criterion does.
//!
//! Run with `cargo test --release -p hodlr-bench --test acceptance -- --nocapture`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use hodlr::dense::{singular_values, truncation_rank, two_norm};
use hodlr::{block_qr, hqr, rect_qr_prototype, HodlrMatrix, LowRankBlock, PartitionTree, TruncationControl};
use hodlr_bench::config::{MatrixSpec, Method};
use hodlr_bench::gen::{block_rng, gen_random_hodlr, gen_random_hodlr_rect, CauchyConfig};
use hodlr_bench::metrics::{hqr_structure, summarize, MetricsOptions, Operand};
use hodlr_bench::record::BenchRecord;
use hodlr_bench::run::{generate, run_method, tolerance_sweep, SweepConfig};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Dense norms up to n = 2000, power iteration above.
fn metrics_options() -> MetricsOptions {
    MetricsOptions {
        dense_limit: 2000,
        estimate: true,
        ..MetricsOptions::default()
    }
}

fn normal(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = block_rng(seed, 0);
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn hqr_row(a: &HodlrMatrix, eps: f64, opts: &MetricsOptions) -> (BenchRecord, f64) {
    let summary = summarize(Operand::Hodlr(a), opts).unwrap();
    let (rec, _) = run_method(Method::Hqr, a, 0, eps, false, &summary, opts, false);
    (rec, summary.norm)
}

fn c1_dense_oracle() -> Verdict {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..10u64 {
        let n = [128, 256, 512][i as usize % 3];
        let a = gen_random_hodlr(n, 32, 1, 100 + i);
        let dense = a.to_dense();
        let norm = two_norm(&dense).unwrap();
        let f = hqr(&a, 1e-15).unwrap();
        let (_, r_dense) = block_qr(&dense, 32).unwrap();
        let diff = (f.r.to_dense().abs() - r_dense.abs()).amax() / norm;
        worst = worst.max(diff);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-10 && secs < 10.0,
        format!("max | |R_hqr| - |R_dense| | / ||A|| = {worst:.2e} (<= 1e-10), {secs:.1} s (< 10 s)"),
    )
}

fn c2_orthogonality_envelope() -> Verdict {
    let start = Instant::now();
    let opts = metrics_options();
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [1000, 2000, 4000] {
        let a = gen_random_hodlr(n, 250, 1, 0);
        let (rec, norm) = hqr_row(&a, 1e-10, &opts);
        let rel = rec.e_acc / norm;
        pass &= !rec.failed && rec.e_orth <= 1e-11 && rel <= 1e-9;
        parts.push(format!("n={n}: e_orth {:.1e}, e_acc/||A|| {rel:.1e}", rec.e_orth));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 120.0;
    verdict(pass, format!("{}; {secs:.1} s (< 120 s)", parts.join("; ")))
}

fn c3_cauchy() -> Verdict {
    let opts = metrics_options();
    let mut pass = true;
    let mut parts = Vec::new();
    for c in CauchyConfig::ALL {
        let a = generate(MatrixSpec::Cauchy(c), 2000, 250, 0, 1e-10, false).unwrap();
        let summary = summarize(Operand::Hodlr(&a), &opts).unwrap();
        let (h, _) = run_method(Method::Hqr, &a, 0, 1e-10, false, &summary, &opts, false);
        let rel = h.e_acc / summary.norm;
        let (ry, rt, rr) = (h.rank_y.unwrap_or(usize::MAX), h.rank_t.unwrap_or(usize::MAX), h.rank_r.unwrap_or(usize::MAX));
        pass &= !h.failed && h.e_orth <= 1e-8 && rel <= 1e-8 && ry <= 24 && rt <= 24 && rr <= 40;
        parts.push(format!(
            "{}: kappa {:.1e}, hqr e_orth {:.1e}, e_acc/||A|| {rel:.1e}, ranks Y/T/R {ry}/{rt}/{rr}",
            c.name(),
            summary.kappa2,
            h.e_orth
        ));
        if c == CauchyConfig::A3 {
            let (ch, _) = run_method(Method::Cholqr, &a, 0, 1e-10, false, &summary, &opts, false);
            pass &= ch.failed || ch.e_orth >= 1e-3;
            parts.push(if ch.failed {
                format!("a3 cholqr failed ({})", ch.error.unwrap_or_default())
            } else {
                format!("a3 cholqr e_orth {:.1e} (>= 1e-3)", ch.e_orth)
            });
        }
    }
    verdict(pass, parts.join("; "))
}

fn c4_cholqr_degradation() -> Verdict {
    let opts = metrics_options();
    let eps = 1e-12;
    let mut pass = true;
    let mut parts = Vec::new();
    let mut chol = Vec::new();
    let mut last_hqr = f64::NAN;
    for kappa in [1e2, 1e4, 1e6] {
        let a = generate(MatrixSpec::Spectrum { kappa }, 512, 64, 0, eps, false).unwrap();
        let summary = summarize(Operand::Hodlr(&a), &opts).unwrap();
        let row = |m| run_method(m, &a, 0, eps, false, &summary, &opts, false).0;
        let (h, c1, c2) = (row(Method::Hqr), row(Method::Cholqr), row(Method::Cholqr2));
        pass &= !h.failed;
        if !c1.failed && !c2.failed {
            pass &= c2.e_orth < c1.e_orth;
        }
        chol.push(if c1.failed { f64::INFINITY } else { c1.e_orth });
        last_hqr = h.e_orth;
        parts.push(format!(
            "kappa {kappa:.0e} (measured {:.2e}): hqr {:.1e}, cholqr {}, cholqr2 {}",
            summary.kappa2,
            h.e_orth,
            if c1.failed { "failed".to_string() } else { format!("{:.1e}", c1.e_orth) },
            if c2.failed { "failed".to_string() } else { format!("{:.1e}", c2.e_orth) },
        ));
    }
    pass &= chol.windows(2).all(|w| w[0] <= w[1]);
    pass &= chol[2] >= 1e2 * last_hqr;
    verdict(pass, parts.join("; "))
}

fn c5_tolerance_sweep() -> Verdict {
    let cfg = SweepConfig {
        metrics: metrics_options(),
        ..SweepConfig::default()
    };
    let rows = tolerance_sweep(&cfg).unwrap();
    if let Some(r) = rows.iter().find(|r| r.failed) {
        return verdict(false, format!("eps {:.0e} failed: {:?}", r.eps, r.error));
    }
    let fit: Vec<(f64, f64)> = rows.iter().filter(|r| r.eps >= 1e-12).map(|r| (r.eps.log10(), r.e_acc.log10())).collect();
    let slope = least_squares_slope(&fit);
    let tail: Vec<&BenchRecord> = rows.iter().filter(|r| r.eps <= 1e-14).collect();
    let ratios: Vec<f64> = tail.windows(2).map(|w| (w[0].e_acc / w[1].e_acc).max(w[1].e_acc / w[0].e_acc)).collect();
    let stagnates = !ratios.is_empty() && ratios.iter().all(|&r| r <= 10.0);
    let series: Vec<String> = rows.iter().map(|r| format!("{:.0e}:{:.1e}", r.eps, r.e_acc)).collect();
    verdict(
        (0.5..=1.5).contains(&slope) && stagnates,
        format!("slope {slope:.2} (in [0.5, 1.5]), tail ratios {ratios:.2?} (<= 10); e_acc by eps {}", series.join(" ")),
    )
}

fn least_squares_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mx, my) = (points.iter().map(|p| p.0).sum::<f64>() / n, points.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn c6_approximation_bound() -> Verdict {
    let mut worst = 0.0f64;
    let mut pass = true;
    for i in 0..20u64 {
        let n = [64, 100, 150, 200, 256][i as usize % 5];
        let tree = match i % 3 {
            0 => PartitionTree::balanced(n, 8),
            1 => PartitionTree::balanced(n, 24),
            _ => PartitionTree::with_level(n, 1 + (i % 4) as u32).unwrap(),
        };
        let noise = normal(n, n, 200 + i);
        let a = if i % 2 == 0 {
            noise
        } else {
            DMatrix::from_fn(n, n, |r, c| (-((r as f64 - c as f64).abs()) / 20.0).exp()) + noise * 1e-4
        };
        let norm = two_norm(&a).unwrap();
        let eps = [1e-1, 1e-3, 1e-6][i as usize % 3] * norm;
        let h = HodlrMatrix::from_dense(&a, &tree, &TruncationControl::new(eps)).unwrap();
        let err = two_norm(&(&a - h.to_dense())).unwrap();
        let bound = tree.level() as f64 * eps;
        pass &= err <= bound;
        worst = worst.max(err / bound);
    }
    verdict(pass, format!("max ||A - A_H|| / (level * eps) = {worst:.3} over 20 matrices (<= 1)"))
}

fn c7_truncation_optimality() -> Verdict {
    let mut pass = true;
    let mut worst = 0.0f64;
    let mut rank_mismatches = 0;
    for i in 0..100u64 {
        let mut rng = block_rng(300 + i, 1);
        let m = rng.random_range(8..80);
        let n = rng.random_range(8..80);
        let k = rng.random_range(1..=12.min(m).min(n));
        let block = LowRankBlock::new(normal(m, k, 400 + i), normal(k, n, 500 + i));
        let exact = block.to_dense();
        let sigma = singular_values(&exact).unwrap();
        let mut sigma: Vec<f64> = sigma.iter().copied().collect();
        sigma.sort_by(|a, b| b.total_cmp(a));
        // Threshold halfway (geometrically) between two retained singular values.
        let j = rng.random_range(0..=k);
        let eps = match j {
            0 => 2.0 * sigma[0],
            j if j == k => 0.5 * sigma[k - 1],
            j => (sigma[j - 1] * sigma[j]).sqrt(),
        };
        let expected = truncation_rank(&sigma, eps);
        for t in [
            block.truncate(&TruncationControl::new(eps)).unwrap(),
            LowRankBlock::from_dense(exact.as_view(), &TruncationControl::new(eps)).unwrap(),
        ] {
            let err = two_norm(&(&exact - t.to_dense())).unwrap();
            if t.rank() != expected {
                rank_mismatches += 1;
                pass = false;
            }
            pass &= err <= eps;
            worst = worst.max(err / eps);
        }
    }
    verdict(
        pass,
        format!("100 blocks: {rank_mismatches} rank mismatches, max error / eps = {worst:.3} (<= 1)"),
    )
}

fn c8_rank_observation() -> Verdict {
    let a = gen_random_hodlr(1000, 250, 1, 0);
    let f = hqr(&a, 1e-10).unwrap();
    let s = hqr_structure(&a, &f, &TruncationControl::new(1e-10)).unwrap();
    let (ry, rq, mem) = (s.rank_y.unwrap(), s.rank_q.unwrap(), s.mem_yt_rel.unwrap());
    verdict(
        ry <= rq && (1.5..=2.5).contains(&mem),
        format!("rank_Y {ry} <= rank_Q {rq}, mem_YT_rel {mem:.3} in [1.5, 2.5]"),
    )
}

fn c9_rectangular() -> Verdict {
    let h = gen_random_hodlr_rect(2000, 1000, 250, 1, 0).unwrap();
    let a = h.to_dense();
    let (rows, cols) = (h.row_tree().unwrap(), h.col_tree().unwrap());
    let f = rect_qr_prototype(&a, &rows, &cols, 1e-10).unwrap();
    let m = a.nrows();
    let q = f.apply_q(&DMatrix::identity(m, m)).unwrap();
    let mut e = q.tr_mul(&q);
    for i in 0..m {
        e[(i, i)] -= 1.0;
    }
    let e_orth = e.symmetric_eigenvalues().amax();
    let norm = two_norm(&a).unwrap();
    let e_acc = two_norm(&(&q * f.r.to_dense() - &a)).unwrap() / norm;
    let pr = f.permuted_r();
    let below = (0..pr.ncols()).flat_map(|j| (j + 1..pr.nrows()).map(move |i| (i, j))).filter(|&(i, j)| pr[(i, j)] != 0.0).count();
    verdict(
        e_orth <= 1e-11 && e_acc <= 1e-9 && below == 0,
        format!("e_orth {e_orth:.1e} (<= 1e-11), e_acc/||A|| {e_acc:.1e} (<= 1e-9), {below} nonzeros below the permuted diagonal"),
    )
}

fn c10_scaling() -> Verdict {
    let time = |n: usize| {
        let a = gen_random_hodlr(n, 250, 1, 0);
        (0..3)
            .map(|_| {
                let start = Instant::now();
                hqr(&a, 1e-10).unwrap();
                start.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let t: Vec<f64> = [4000, 8000, 16000, 32000].into_iter().map(time).collect();
    let ratios: Vec<f64> = t.windows(2).map(|w| w[1] / w[0]).collect();
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    verdict(
        mean <= 3.0,
        format!("t(n) for n = 4000..32000: {t:.3?} s; t(2n)/t(n) = {ratios:.2?}, mean {mean:.2} (<= 3.0)"),
    )
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("dense-oracle equivalence", c1_dense_oracle),
        ("orthogonality envelope", c2_orthogonality_envelope),
        ("Cauchy robustness", c3_cauchy),
        ("CholQR degradation law", c4_cholqr_degradation),
        ("tolerance sweep", c5_tolerance_sweep),
        ("HODLR approximation bound", c6_approximation_bound),
        ("truncation optimality", c7_truncation_optimality),
        ("rank observation", c8_rank_observation),
        ("rectangular prototype", c9_rectangular),
        ("scaling sanity", c10_scaling),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            verdict(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        println!("criterion {:>2} {} {name}: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        if !v.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn least_squares_slope_recovers_line() {
    let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 0.8 * i as f64 - 3.0)).collect();
    assert!((least_squares_slope(&pts) - 0.8).abs() < 1e-14);
}
