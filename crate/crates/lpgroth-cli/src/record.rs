//! One CSV row per replica or aggregate, with a fixed column set shared by
//! all subcommands. Floats are written with 17 significant digits so rows
//! parse back to the same bits.

use crate::error::{CliError, CliResult};
use serde::Serialize;
use std::io::{Read, Write};

pub const VERSION: &str = concat!("lpgroth ", env!("CARGO_PKG_VERSION"));

pub const HEADER: [&str; 19] = [
    "command",
    "quantity",
    "n",
    "p",
    "kappa",
    "t",
    "beta",
    "r",
    "replica",
    "value",
    "stderr",
    "transform",
    "residual",
    "converged",
    "iterations",
    "seed",
    "note",
    "version",
    "wall_time_s",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub command: String,
    pub quantity: String,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub kappa: Option<usize>,
    pub t: Option<f64>,
    pub beta: Option<f64>,
    pub r: Option<usize>,
    /// `None` on aggregate rows.
    pub replica: Option<u64>,
    pub value: f64,
    pub stderr: Option<f64>,
    /// Ground-state energy recovered from the Lagrangian at this `t`.
    pub transform: Option<f64>,
    pub residual: Option<f64>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub seed: u64,
    pub note: String,
    pub version: String,
    pub wall_time_s: Option<f64>,
}

impl ResultRecord {
    pub fn new(command: &str, quantity: &str, seed: u64, value: f64) -> Self {
        ResultRecord {
            command: command.into(),
            quantity: quantity.into(),
            n: None,
            p: None,
            kappa: None,
            t: None,
            beta: None,
            r: None,
            replica: None,
            value,
            stderr: None,
            transform: None,
            residual: None,
            converged: None,
            iterations: None,
            seed,
            note: String::new(),
            version: VERSION.into(),
            wall_time_s: None,
        }
    }

    pub fn to_row(&self) -> Vec<String> {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(T::to_string).unwrap_or_default()
        }
        let of = |v: &Option<f64>| v.map(fmt_f64).unwrap_or_default();
        vec![
            self.command.clone(),
            self.quantity.clone(),
            opt(&self.n),
            of(&self.p),
            opt(&self.kappa),
            of(&self.t),
            of(&self.beta),
            opt(&self.r),
            opt(&self.replica),
            fmt_f64(self.value),
            of(&self.stderr),
            of(&self.transform),
            of(&self.residual),
            opt(&self.converged),
            opt(&self.iterations),
            self.seed.to_string(),
            self.note.clone(),
            self.version.clone(),
            of(&self.wall_time_s),
        ]
    }

    pub fn from_row(row: &csv::StringRecord) -> CliResult<Self> {
        if row.len() != HEADER.len() {
            return Err(CliError::Config(format!("row has {} fields, expected {}", row.len(), HEADER.len())));
        }
        fn parse<T: std::str::FromStr>(col: &str, s: &str) -> CliResult<T> {
            s.parse().map_err(|_| CliError::Config(format!("column {col}: cannot parse {s:?}")))
        }
        fn opt<T: std::str::FromStr>(col: &str, s: &str) -> CliResult<Option<T>> {
            if s.is_empty() {
                Ok(None)
            } else {
                parse(col, s).map(Some)
            }
        }
        let f = |i: usize| &row[i];
        Ok(ResultRecord {
            command: f(0).into(),
            quantity: f(1).into(),
            n: opt("n", f(2))?,
            p: opt("p", f(3))?,
            kappa: opt("kappa", f(4))?,
            t: opt("t", f(5))?,
            beta: opt("beta", f(6))?,
            r: opt("r", f(7))?,
            replica: opt("replica", f(8))?,
            value: parse("value", f(9))?,
            stderr: opt("stderr", f(10))?,
            transform: opt("transform", f(11))?,
            residual: opt("residual", f(12))?,
            converged: opt("converged", f(13))?,
            iterations: opt("iterations", f(14))?,
            seed: parse("seed", f(15))?,
            note: f(16).into(),
            version: f(17).into(),
            wall_time_s: opt("wall_time_s", f(18))?,
        })
    }
}

/// 17 significant digits in scientific notation; `NaN` and `inf` spelled
/// so that `f64::from_str` reads them back.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_csv<W: Write>(records: &[ResultRecord], out: W) -> CliResult<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record(r.to_row())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> CliResult<Vec<ResultRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(CliError::Config(format!("unexpected header {header:?}")));
    }
    rd.records().map(|r| ResultRecord::from_row(&r?)).collect()
}

/// Mean and standard error of the mean; the error is `None` for one sample.
pub fn mean_stderr(xs: &[f64]) -> (f64, Option<f64>) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, None);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some((var / n).sqrt()))
}
