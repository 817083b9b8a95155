//! Experiment configuration: an optional TOML or JSON file merged with
//! command-line flags, flags taking precedence.

use crate::error::{CliError, CliResult};
use clap::{Args, ValueEnum};
use lpgroth::linalg::GramMatrix;
use lpgroth::parisi::QuadratureSpec;
use lpgroth::solvers::SolverConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum QuadKind {
    Grid,
    Mc,
}

/// Overlap endpoint `D`: a multiple of the identity or an explicit matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum DSpec {
    ScaledIdentity(f64),
    Matrix { dim: usize, rows: Vec<f64> },
}

impl DSpec {
    pub fn for_kappa(&self, kappa: usize) -> CliResult<GramMatrix> {
        match self {
            DSpec::ScaledIdentity(c) => GramMatrix::scaled_identity(kappa, *c).map_err(|e| CliError::config("d", e)),
            DSpec::Matrix { dim, rows } => {
                if *dim != kappa {
                    return Err(CliError::config("d", format!("matrix is {dim}x{dim} but kappa is {kappa}")));
                }
                GramMatrix::from_rows(*dim, rows.clone()).map_err(|e| CliError::config("d", e))
            }
        }
    }

    fn from_rows(rows: Vec<Vec<f64>>) -> CliResult<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(CliError::config("d", "matrix must be square and non-empty"));
        }
        for i in 0..dim {
            for j in 0..dim {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !a.is_finite() || (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                    return Err(CliError::config("d", "matrix must be finite and symmetric"));
                }
            }
        }
        let spec = DSpec::Matrix { dim, rows: rows.concat() };
        spec.for_kappa(dim)?;
        Ok(spec)
    }
}

impl FromStr for DSpec {
    type Err = CliError;

    /// `identity`, `identity*c`, `c*identity`, or rows separated by `;` with
    /// entries separated by `,`.
    fn from_str(s: &str) -> CliResult<Self> {
        let s = s.trim();
        let scale = |c: &str| {
            c.trim()
                .parse::<f64>()
                .ok()
                .filter(|c| *c >= 0.0 && c.is_finite())
                .ok_or_else(|| CliError::config("d", format!("bad identity scale {c:?}")))
        };
        if s == "identity" {
            return Ok(DSpec::ScaledIdentity(1.0));
        }
        if let Some(c) = s.strip_prefix("identity*") {
            return scale(c).map(DSpec::ScaledIdentity);
        }
        if let Some(c) = s.strip_suffix("*identity") {
            return scale(c).map(DSpec::ScaledIdentity);
        }
        let rows = s
            .split(';')
            .map(|row| row.split(',').map(|v| v.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::config("d", format!("cannot parse {s:?}: {e}")))?;
        DSpec::from_rows(rows)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum DValue {
    Text(String),
    Rows(Vec<Vec<f64>>),
}

/// Settings shared by every subcommand. Each one may also come from the
/// config file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Overrides {
    /// TOML or JSON config file; flags override its values.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// CSV output path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub n_grid: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub kappa: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub replicas: Option<usize>,
    /// Solver restarts per instance.
    #[arg(long, global = true)]
    pub restarts: Option<usize>,
    /// Iteration cap per solver restart.
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Largest number of levels for Parisi minimization.
    #[arg(long, global = true)]
    pub r_max: Option<usize>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub quad: Option<QuadKind>,
    /// Monte Carlo samples per layer when `--quad mc`.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Overlap endpoint: `identity`, `identity*c`, or rows like `1,0.2;0.2,1`.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub d: Option<String>,
    #[serde(rename = "d")]
    #[arg(skip)]
    d_file: Option<DValue>,
    /// Record per-task wall time in the output.
    #[arg(long, global = true)]
    #[serde(skip)]
    pub timing: bool,
    #[arg(skip)]
    #[serde(rename = "timing")]
    timing_file: Option<bool>,
}

/// Validated settings for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub n_grid: Vec<usize>,
    pub p: Vec<f64>,
    pub kappa: Vec<usize>,
    pub t_grid: Vec<f64>,
    pub replicas: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub r_max: usize,
    pub beta: Option<f64>,
    pub quad: QuadKind,
    pub samples: usize,
    pub d: DSpec,
    pub timing: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            workers: 1,
            out: None,
            n_grid: vec![64],
            p: vec![3.0],
            kappa: vec![1],
            t_grid: vec![1.0],
            replicas: 8,
            restarts: 8,
            max_iter: 5000,
            r_max: 3,
            beta: None,
            quad: QuadKind::Grid,
            samples: 100_000,
            d: DSpec::ScaledIdentity(1.0),
            timing: false,
        }
    }
}

fn read_file(path: &Path) -> CliResult<Overrides> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::config("config", e))
    } else {
        toml::from_str(&text).map_err(|e| CliError::config("config", e))
    }
}

impl ExperimentConfig {
    /// Merges defaults, the config file named by `flags.config`, and the
    /// flags, then validates.
    pub fn resolve(flags: &Overrides) -> CliResult<Self> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => Overrides::default(),
        };
        let mut c = ExperimentConfig::default();
        macro_rules! take {
            ($field:ident) => {
                if let Some(v) = flags.$field.clone().or(file.$field.clone()) {
                    c.$field = v;
                }
            };
        }
        take!(seed);
        take!(workers);
        take!(n_grid);
        take!(p);
        take!(kappa);
        take!(t_grid);
        take!(replicas);
        take!(restarts);
        take!(max_iter);
        take!(r_max);
        take!(quad);
        take!(samples);
        c.out = flags.out.clone().or(file.out.clone());
        c.beta = flags.beta.or(file.beta);
        c.timing = flags.timing || file.timing_file.unwrap_or(false);
        c.d = match (&flags.d, &file.d_file) {
            (Some(s), _) => s.parse()?,
            (None, Some(DValue::Text(s))) => s.parse()?,
            (None, Some(DValue::Rows(r))) => DSpec::from_rows(r.clone())?,
            (None, None) => c.d,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> CliResult<()> {
        let nonempty = |field: &str, len: usize| {
            if len == 0 {
                Err(CliError::config(field, "must not be empty"))
            } else {
                Ok(())
            }
        };
        nonempty("n-grid", self.n_grid.len())?;
        nonempty("p", self.p.len())?;
        nonempty("kappa", self.kappa.len())?;
        nonempty("t-grid", self.t_grid.len())?;
        if self.workers == 0 {
            return Err(CliError::config("workers", "must be at least 1"));
        }
        if self.n_grid.contains(&0) {
            return Err(CliError::config("n-grid", "entries must be at least 1"));
        }
        if self.kappa.contains(&0) {
            return Err(CliError::config("kappa", "entries must be at least 1"));
        }
        if self.p.iter().any(|p| !(p.is_finite() && *p >= 1.0)) {
            return Err(CliError::config("p", "entries must be finite and at least 1"));
        }
        if self.t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(CliError::config("t-grid", "entries must be finite and positive"));
        }
        if self.replicas == 0 {
            return Err(CliError::config("replicas", "must be at least 1"));
        }
        if self.restarts == 0 {
            return Err(CliError::config("restarts", "must be at least 1"));
        }
        if self.max_iter == 0 {
            return Err(CliError::config("max-iter", "must be at least 1"));
        }
        if self.r_max == 0 {
            return Err(CliError::config("r-max", "must be at least 1"));
        }
        if let Some(b) = self.beta {
            if !(b.is_finite() && b > 0.0) {
                return Err(CliError::config("beta", "must be finite and positive"));
            }
        }
        if self.samples < 2 {
            return Err(CliError::config("samples", "must be at least 2"));
        }
        for &k in &self.kappa {
            self.d.for_kappa(k)?;
        }
        Ok(())
    }

    /// Solver settings for one replica; restarts draw from a replica-specific
    /// stream.
    pub fn solver(&self, replica: u64) -> SolverConfig {
        SolverConfig {
            restarts: self.restarts,
            max_iter: self.max_iter,
            seed: self.seed.wrapping_add(replica.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            ..SolverConfig::default()
        }
    }

    pub fn quadrature(&self, kappa: usize) -> QuadratureSpec {
        match self.quad {
            QuadKind::Grid => QuadratureSpec::default_for(kappa),
            QuadKind::Mc => QuadratureSpec::monte_carlo(self.samples, self.seed),
        }
    }

    pub fn pool(&self) -> CliResult<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| CliError::config("workers", e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn d_specs() {
        assert_eq!("identity".parse::<DSpec>().unwrap(), DSpec::ScaledIdentity(1.0));
        assert_eq!("identity*2.5".parse::<DSpec>().unwrap(), DSpec::ScaledIdentity(2.5));
        assert_eq!("0.5*identity".parse::<DSpec>().unwrap(), DSpec::ScaledIdentity(0.5));
        let m: DSpec = "1,0.2;0.2,1".parse().unwrap();
        assert_eq!(m.for_kappa(2).unwrap().get(0, 1), 0.2);
        assert!(m.for_kappa(1).is_err());
        assert!("1,2;2,1".parse::<DSpec>().is_err(), "indefinite");
        assert!("1,0.2;0.3,1".parse::<DSpec>().is_err(), "asymmetric");
        assert!("identity*-1".parse::<DSpec>().is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = std::env::temp_dir().join(format!("lpgroth-cfg-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        std::fs::write(&path, "seed = 5\nn-grid = [8, 16]\nreplicas = 3\nd = [[2.0]]\ntiming = true\n").unwrap();
        let flags = Overrides { config: Some(path.clone()), replicas: Some(4), ..Default::default() };
        let c = ExperimentConfig::resolve(&flags).unwrap();
        assert_eq!((c.seed, c.replicas, c.n_grid.clone()), (5, 4, vec![8, 16]));
        assert_eq!(c.d, DSpec::Matrix { dim: 1, rows: vec![2.0] });
        assert!(c.timing);
        let json = dir.join("run.json");
        std::fs::write(&json, r#"{"p": [2.5], "d": "identity*3"}"#).unwrap();
        let c = ExperimentConfig::resolve(&Overrides { config: Some(json), ..Default::default() }).unwrap();
        assert_eq!((c.p.clone(), c.d.clone()), (vec![2.5], DSpec::ScaledIdentity(3.0)));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn validation_names_the_field() {
        let bad = Overrides { replicas: Some(0), ..Default::default() };
        let e = ExperimentConfig::resolve(&bad).unwrap_err();
        assert!(e.to_string().contains("replicas"), "{e}");
        assert_eq!(e.exit_code(), 1);
        let bad = Overrides { t_grid: Some(vec![1.0, -1.0]), ..Default::default() };
        assert!(ExperimentConfig::resolve(&bad).unwrap_err().to_string().contains("t-grid"));
        let bad = Overrides { kappa: Some(vec![2]), d: Some("1".into()), ..Default::default() };
        assert!(ExperimentConfig::resolve(&bad).unwrap_err().to_string().contains("d:"));
    }
}
