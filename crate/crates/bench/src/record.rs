//! Benchmark rows and their CSV form.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::config::Method;
use crate::metrics::Structure;

pub const CSV_HEADER: &str =
    "method,n,seed,eps,kappa2,e_orth,e_acc,rank_Y,rank_T,rank_Q,rank_R,mem_YT_rel,mem_Q_rel,mem_R_rel,time_s,failed";

/// One `(method, n, seed, eps)` measurement. Fields that do not apply to the
/// method, or that could not be computed after a failure, are NaN.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchRecord {
    pub method: Method,
    pub n: usize,
    pub seed: u64,
    pub eps: f64,
    pub kappa2: f64,
    pub e_orth: f64,
    pub e_acc: f64,
    pub rank_y: Option<usize>,
    pub rank_t: Option<usize>,
    pub rank_q: Option<usize>,
    pub rank_r: Option<usize>,
    pub mem_yt_rel: f64,
    pub mem_q_rel: f64,
    pub mem_r_rel: f64,
    pub wall_time_s: f64,
    pub failed: bool,
    /// Reason for `failed`; not part of the CSV.
    pub error: Option<String>,
}

impl BenchRecord {
    /// A row with every measured field NaN.
    pub fn empty(method: Method, n: usize, seed: u64, eps: f64) -> Self {
        Self {
            method,
            n,
            seed,
            eps,
            kappa2: f64::NAN,
            e_orth: f64::NAN,
            e_acc: f64::NAN,
            rank_y: None,
            rank_t: None,
            rank_q: None,
            rank_r: None,
            mem_yt_rel: f64::NAN,
            mem_q_rel: f64::NAN,
            mem_r_rel: f64::NAN,
            wall_time_s: f64::NAN,
            failed: false,
            error: None,
        }
    }

    pub fn failure(method: Method, n: usize, seed: u64, eps: f64, reason: String) -> Self {
        Self {
            failed: true,
            error: Some(reason),
            ..Self::empty(method, n, seed, eps)
        }
    }

    pub fn set_structure(&mut self, s: &Structure) {
        self.rank_y = s.rank_y;
        self.rank_t = s.rank_t;
        self.rank_q = s.rank_q;
        self.rank_r = s.rank_r;
        self.mem_yt_rel = s.mem_yt_rel.unwrap_or(f64::NAN);
        self.mem_q_rel = s.mem_q_rel.unwrap_or(f64::NAN);
        self.mem_r_rel = s.mem_r_rel.unwrap_or(f64::NAN);
    }

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        write!(s, "{},{},{}", self.method, self.n, self.seed).unwrap();
        for x in [self.eps, self.kappa2, self.e_orth, self.e_acc] {
            write!(s, ",{}", float(x)).unwrap();
        }
        for r in [self.rank_y, self.rank_t, self.rank_q, self.rank_r] {
            write!(s, ",{}", r.map_or_else(|| "nan".to_string(), |r| r.to_string())).unwrap();
        }
        for x in [self.mem_yt_rel, self.mem_q_rel, self.mem_r_rel, self.wall_time_s] {
            write!(s, ",{}", float(x)).unwrap();
        }
        write!(s, ",{}", u8::from(self.failed)).unwrap();
        s
    }
}

/// 17 significant digits, NaN as `nan`.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{x:.16e}")
    }
}

pub fn write_csv<W: Write>(mut out: W, records: &[BenchRecord]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    out.flush()
}

pub fn to_csv(records: &[BenchRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}
