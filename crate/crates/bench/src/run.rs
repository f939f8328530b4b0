//! Benchmark driver: generate, factorize, measure.

use std::time::Instant;

use hodlr::{block_qr, cholqr, cholqr2, hodlr_norm_estimate, hqr_with_options, HodlrMatrix, HqrOptions};
use hodlr::{PartitionTree, TruncationControl, DEFAULT_BLOCK_SIZE};

use crate::config::{BenchConfig, ConfigError, MatrixSpec, Method};
use crate::gen::{cauchy_dense, dense_norm_estimate, gen_random_hodlr, prescribed_singular_values_dense, CauchyParams};
use crate::gen::GenError;
use crate::metrics::{
    accuracy, dense_structure, hodlr_qr_structure, hqr_structure, kappa2_estimate, summarize, Factors, MetricsError,
    MetricsOptions, NormMode, Operand, OperandSummary,
};
use crate::record::BenchRecord;

/// Builds the test matrix of `spec` at size `n`. Dense constructions are
/// compressed at `eps * ||A||_2`, or at `eps` when `absolute_eps` is set.
pub fn generate(
    spec: MatrixSpec,
    n: usize,
    n_min: usize,
    seed: u64,
    eps: f64,
    absolute_eps: bool,
) -> Result<HodlrMatrix, GenError> {
    let dense = match spec {
        MatrixSpec::Random { rank } => return Ok(gen_random_hodlr(n, n_min, rank, seed)),
        MatrixSpec::Cauchy(c) => cauchy_dense(&CauchyParams::new(c, n, seed))?,
        MatrixSpec::Spectrum { kappa } => prescribed_singular_values_dense(n, kappa, 2, seed),
    };
    let threshold = if absolute_eps { eps } else { eps * dense_norm_estimate(&dense) };
    Ok(HodlrMatrix::from_dense(&dense, &PartitionTree::balanced(n, n_min), &TruncationControl::new(threshold))?)
}

/// Scale applied to `eps` inside the factorizations.
fn norm_scale(a: &HodlrMatrix, absolute_eps: bool) -> f64 {
    if absolute_eps {
        1.0
    } else {
        hodlr_norm_estimate(a)
    }
}

#[derive(Debug, thiserror::Error)]
enum CellError {
    #[error(transparent)]
    Hodlr(#[from] hodlr::Error),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Factorizes `a` with `method` and measures the result. A factorization
/// or measurement failure yields a row with `failed` set.
///
/// With `want_kappa`, also returns `||A|| * ||R^{-1}||` as a condition
/// number estimate.
#[allow(clippy::too_many_arguments)]
pub fn run_method(
    method: Method,
    a: &HodlrMatrix,
    seed: u64,
    eps: f64,
    absolute_eps: bool,
    summary: &OperandSummary,
    opts: &MetricsOptions,
    want_kappa: bool,
) -> (BenchRecord, Option<f64>) {
    let n = a.rows();
    let mut rec = BenchRecord::empty(method, n, seed, eps);
    rec.kappa2 = summary.kappa2;
    match measure(method, a, eps, absolute_eps, summary, opts, want_kappa, &mut rec) {
        Ok(kappa) => (rec, kappa),
        Err(e) => {
            let mut failed = BenchRecord::failure(method, n, seed, eps, e.to_string());
            failed.kappa2 = summary.kappa2;
            failed.wall_time_s = rec.wall_time_s;
            (failed, None)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn measure(
    method: Method,
    a: &HodlrMatrix,
    eps: f64,
    absolute_eps: bool,
    summary: &OperandSummary,
    opts: &MetricsOptions,
    want_kappa: bool,
    rec: &mut BenchRecord,
) -> Result<Option<f64>, CellError> {
    let n = a.rows();
    let op = Operand::Hodlr(a);
    let kappa = |f: &Factors<'_>| -> Result<Option<f64>, CellError> {
        Ok(if want_kappa { Some(kappa2_estimate(summary.norm, f, n, opts)?) } else { None })
    };
    match method {
        Method::Hqr => {
            let hopts = HqrOptions {
                norm_override: absolute_eps.then_some(1.0),
                ..HqrOptions::new(eps)
            };
            let start = Instant::now();
            let f = hqr_with_options(a, &hopts)?;
            rec.wall_time_s = start.elapsed().as_secs_f64();
            let fac = Factors::Wy(&f);
            set_accuracy(rec, op, &fac, opts)?;
            rec.set_structure(&hqr_structure(a, &f, &TruncationControl::new(eps))?);
            kappa(&fac)
        }
        Method::Cholqr | Method::Cholqr2 => {
            let start = Instant::now();
            let tc = TruncationControl::new(eps * norm_scale(a, absolute_eps));
            let result = if method == Method::Cholqr { cholqr(a, &tc) } else { cholqr2(a, &tc) };
            rec.wall_time_s = start.elapsed().as_secs_f64();
            let (q, r) = result?;
            let fac = Factors::Hodlr { q: &q, r: &r };
            set_accuracy(rec, op, &fac, opts)?;
            rec.set_structure(&hodlr_qr_structure(a, &q, &r));
            kappa(&fac)
        }
        Method::Dense => {
            let dense = a.to_dense();
            let start = Instant::now();
            let (wy, r) = block_qr(&dense, DEFAULT_BLOCK_SIZE)?;
            let q = wy.explicit_q(n);
            rec.wall_time_s = start.elapsed().as_secs_f64();
            let fac = Factors::Dense { q: &q, r: &r };
            set_accuracy(rec, op, &fac, opts)?;
            rec.set_structure(&dense_structure(a));
            kappa(&fac)
        }
    }
}

fn set_accuracy(rec: &mut BenchRecord, a: Operand<'_>, f: &Factors<'_>, opts: &MetricsOptions) -> Result<(), CellError> {
    let acc = accuracy(a, f, opts)?;
    rec.e_orth = acc.e_orth;
    rec.e_acc = acc.e_acc;
    if !(acc.e_orth.is_finite() && acc.e_acc.is_finite()) {
        rec.failed = true;
        rec.error = Some("non-finite accuracy".into());
    }
    Ok(())
}

/// Rows for every method on one matrix. Condition numbers come from the
/// dense SVD, or in estimate mode from the first successful factorization.
fn run_matrix(
    a: &HodlrMatrix,
    methods: &[Method],
    seed: u64,
    eps: f64,
    absolute_eps: bool,
    opts: &MetricsOptions,
) -> Vec<BenchRecord> {
    let n = a.rows();
    let summary = match summarize(Operand::Hodlr(a), opts) {
        Ok(s) => s,
        Err(e) => {
            return methods.iter().map(|&m| BenchRecord::failure(m, n, seed, eps, e.to_string())).collect();
        }
    };
    let estimate = matches!(opts.mode(n), Ok(NormMode::Estimate));
    let mut kappa = None;
    let mut rows = Vec::with_capacity(methods.len());
    for &m in methods {
        let (rec, k) = run_method(m, a, seed, eps, absolute_eps, &summary, opts, estimate && kappa.is_none());
        kappa = kappa.or(k);
        rows.push(rec);
    }
    if let Some(k) = kappa {
        for r in &mut rows {
            r.kappa2 = k;
        }
    }
    rows
}

/// One row per `(n, seed, method)`, in that nesting order.
pub fn run_bench(config: &BenchConfig) -> Result<Vec<BenchRecord>, ConfigError> {
    config.validate()?;
    let mut out = Vec::new();
    for &n in &config.sizes {
        for &seed in &config.seeds {
            match generate(config.matrix, n, config.n_min, seed, config.eps, config.absolute_eps) {
                Ok(a) => out.extend(run_matrix(&a, &config.methods, seed, config.eps, config.absolute_eps, &config.metrics)),
                Err(e) => out.extend(
                    config.methods.iter().map(|&m| BenchRecord::failure(m, n, seed, config.eps, e.to_string())),
                ),
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub matrix: MatrixSpec,
    pub n: usize,
    pub n_min: usize,
    pub seed: u64,
    pub eps_list: Vec<f64>,
    pub absolute_eps: bool,
    pub metrics: MetricsOptions,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            matrix: MatrixSpec::Cauchy(crate::gen::CauchyConfig::A3),
            n: 1000,
            n_min: 250,
            seed: 0,
            eps_list: (1..=8).map(|k| 10f64.powi(-2 * k)).collect(),
            absolute_eps: false,
            metrics: MetricsOptions::default(),
        }
    }
}

/// hQR on one matrix for every tolerance in `eps_list`. The matrix is
/// compressed once, at the smallest tolerance in the list.
pub fn tolerance_sweep(config: &SweepConfig) -> Result<Vec<BenchRecord>, ConfigError> {
    let base = BenchConfig {
        matrix: config.matrix,
        methods: vec![Method::Hqr],
        sizes: vec![config.n],
        seeds: vec![config.seed],
        eps: config.eps_list.iter().copied().fold(f64::INFINITY, f64::min),
        n_min: config.n_min,
        absolute_eps: config.absolute_eps,
        metrics: config.metrics,
    };
    if config.eps_list.is_empty() {
        return Err(ConfigError::Inconsistent("eps list must be nonempty".into()));
    }
    base.validate()?;
    let a = match generate(config.matrix, config.n, config.n_min, config.seed, base.eps, config.absolute_eps) {
        Ok(a) => a,
        Err(e) => {
            return Ok(config
                .eps_list
                .iter()
                .map(|&eps| BenchRecord::failure(Method::Hqr, config.n, config.seed, eps, e.to_string()))
                .collect())
        }
    };
    let summary = match summarize(Operand::Hodlr(&a), &config.metrics) {
        Ok(s) => s,
        Err(e) => {
            return Ok(config
                .eps_list
                .iter()
                .map(|&eps| BenchRecord::failure(Method::Hqr, config.n, config.seed, eps, e.to_string()))
                .collect())
        }
    };
    Ok(config
        .eps_list
        .iter()
        .map(|&eps| run_method(Method::Hqr, &a, config.seed, eps, config.absolute_eps, &summary, &config.metrics, false).0)
        .collect())
}
