//! Test-matrix generators, accuracy metrics and the benchmark driver behind
//! the `hodlr-bench` command.

pub mod config;
pub mod gen;
pub mod metrics;
pub mod record;
pub mod run;

pub use config::{parse_eps_list, parse_matrix_spec, parse_methods, parse_number_list, BenchConfig, ConfigError, MatrixSpec, Method};
pub use gen::{gen_cauchy, gen_random_hodlr, gen_random_hodlr_rect, CauchyConfig, CauchyParams, GenError};
pub use metrics::{accuracy, summarize, Accuracy, Factors, MetricsError, MetricsOptions, Operand};
pub use record::{write_csv, BenchRecord, CSV_HEADER};
pub use run::{generate, run_bench, run_method, tolerance_sweep, SweepConfig};
