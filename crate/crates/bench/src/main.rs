use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hodlr::{hqr_with_options, read_hodlr, write_hodlr, HqrOptions, TruncationControl};
use hodlr_bench::config::{parse_eps_list, parse_matrix_spec, parse_methods, parse_number_list, BenchConfig, MatrixSpec, Method};
use hodlr_bench::metrics::{accuracy, hqr_structure, summarize, Factors, MetricsOptions, Operand};
use hodlr_bench::record::{write_csv, BenchRecord};
use hodlr_bench::run::{generate, run_bench, tolerance_sweep, SweepConfig};

#[derive(Parser)]
#[command(name = "hodlr-bench", version, about = "QR of HODLR matrices: generators, factorization and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a test matrix and write it as HDLR1.
    Gen(GenArgs),
    /// Factorize an HDLR1 matrix with hQR, write Y, T, R and print metrics.
    Qr(QrArgs),
    /// Run methods over sizes and seeds and write CSV.
    Bench(BenchArgs),
    /// Run hQR over a list of tolerances on one matrix and write CSV.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct MetricArgs {
    /// Use power-iteration norms above the dense limit.
    #[arg(long)]
    estimate: bool,
    /// Largest n for dense norms and condition numbers.
    #[arg(long, default_value_t = 4096)]
    dense_limit: usize,
}

impl MetricArgs {
    fn options(&self) -> MetricsOptions {
        MetricsOptions {
            dense_limit: self.dense_limit,
            estimate: self.estimate,
            ..MetricsOptions::default()
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// random, random:<rank>, cauchy:a1|a2|a3 or spectrum:<kappa>
    #[arg(long, default_value = "random", value_parser = parse_matrix_spec)]
    matrix: MatrixSpec,
    #[arg(long, short)]
    n: usize,
    #[arg(long, default_value_t = 250)]
    nmin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Compression tolerance for dense constructions.
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    #[arg(long)]
    absolute_eps: bool,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct QrArgs {
    input: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    #[arg(long)]
    absolute_eps: bool,
    /// Factors go to `<prefix>.Y.hdlr`, `<prefix>.T.hdlr`, `<prefix>.R.hdlr`.
    #[arg(long)]
    out_prefix: Option<PathBuf>,
    #[command(flatten)]
    metrics: MetricArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "random", value_parser = parse_matrix_spec)]
    matrix: MatrixSpec,
    #[arg(long, default_value = "hqr,cholqr,cholqr2")]
    methods: String,
    #[arg(long, default_value = "1000,2000,4000")]
    sizes: String,
    #[arg(long, default_value = "0")]
    seeds: String,
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    #[arg(long, default_value_t = 250)]
    nmin: usize,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    absolute_eps: bool,
    #[command(flatten)]
    metrics: MetricArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "cauchy:a3", value_parser = parse_matrix_spec)]
    matrix: MatrixSpec,
    #[arg(long, default_value = "1e-2,1e-4,1e-6,1e-8,1e-10,1e-12,1e-14,1e-16")]
    eps_list: String,
    #[arg(long, short, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 250)]
    nmin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    absolute_eps: bool,
    #[command(flatten)]
    metrics: MetricArgs,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(args) => gen(args),
        Command::Qr(args) => qr(args),
        Command::Bench(args) => bench(args),
        Command::Sweep(args) => sweep(args),
    }
}

fn gen(args: GenArgs) -> Result<()> {
    if args.n == 0 || args.nmin == 0 {
        bail!("n and nmin must be positive");
    }
    let a = generate(args.matrix, args.n, args.nmin, args.seed, args.eps, args.absolute_eps)?;
    write_hodlr(&a, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    let s = a.stats();
    eprintln!(
        "wrote {} ({}x{}, level {}, max off-diagonal rank {})",
        args.out.display(),
        a.rows(),
        a.cols(),
        a.level(),
        s.max_offdiag_rank
    );
    Ok(())
}

fn qr(args: QrArgs) -> Result<()> {
    let a = read_hodlr(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    if a.row_leaf_sizes() != a.col_leaf_sizes() {
        bail!("hqr needs a square partition, got {}x{}", a.rows(), a.cols());
    }
    let opts = args.metrics.options();
    let summary = summarize(Operand::Hodlr(&a), &opts)?;
    let hopts = HqrOptions {
        norm_override: args.absolute_eps.then_some(1.0),
        ..HqrOptions::new(args.eps)
    };
    let start = Instant::now();
    let f = hqr_with_options(&a, &hopts)?;
    let mut rec = BenchRecord::empty(Method::Hqr, a.rows(), 0, args.eps);
    rec.wall_time_s = start.elapsed().as_secs_f64();
    rec.kappa2 = summary.kappa2;
    let acc = accuracy(Operand::Hodlr(&a), &Factors::Wy(&f), &opts)?;
    rec.e_orth = acc.e_orth;
    rec.e_acc = acc.e_acc;
    rec.set_structure(&hqr_structure(&a, &f, &TruncationControl::new(args.eps))?);
    if let Some(prefix) = &args.out_prefix {
        for (name, h) in [("Y", &f.y), ("T", &f.t), ("R", &f.r)] {
            let path = with_suffix(prefix, name);
            write_hodlr(h, &path).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    write_csv(io::stdout().lock(), &[rec])?;
    Ok(())
}

fn with_suffix(prefix: &Path, name: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(format!(".{name}.hdlr"));
    PathBuf::from(s)
}

fn bench(args: BenchArgs) -> Result<()> {
    let config = BenchConfig {
        matrix: args.matrix,
        methods: parse_methods(&args.methods)?,
        sizes: parse_number_list(&args.sizes)?,
        seeds: parse_number_list(&args.seeds)?,
        eps: args.eps,
        n_min: args.nmin,
        absolute_eps: args.absolute_eps,
        metrics: args.metrics.options(),
    };
    let rows = run_bench(&config)?;
    emit(&rows, args.out.as_deref())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let config = SweepConfig {
        matrix: args.matrix,
        n: args.n,
        n_min: args.nmin,
        seed: args.seed,
        eps_list: parse_eps_list(&args.eps_list)?,
        absolute_eps: args.absolute_eps,
        metrics: args.metrics.options(),
    };
    let rows = tolerance_sweep(&config)?;
    emit(&rows, args.out.as_deref())
}

fn emit(rows: &[BenchRecord], out: Option<&Path>) -> Result<()> {
    for r in rows.iter().filter(|r| r.failed) {
        eprintln!("{} n={} seed={}: {}", r.method, r.n, r.seed, r.error.as_deref().unwrap_or("failed"));
    }
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(BufWriter::new(file), rows)?;
        }
        None => write_csv(io::stdout().lock(), rows)?,
    }
    io::stdout().flush()?;
    Ok(())
}
