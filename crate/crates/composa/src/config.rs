//! Flat key-value configuration: INI-style sections and dotted keys, typed
//! access with diagnostics, and construction of problems and solver
//! configurations from a parsed map.

use crate::direction::{LinsolveConfig, LinsolveKind, Precond};
use crate::geometry::{LinesearchConfig, SlopeKind};
use crate::io::{self, IoError};
use crate::problems::{self, synthetic, ProblemError, ProblemSpec};
use crate::solver::{GammaWarmup, SolverConfig};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

#[derive(Debug)]
pub enum ConfigError {
    Parse {
        line: usize,
        message: String,
    },
    MissingKey(String),
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    UnknownKey(String),
    Io(IoError),
    Problem(ProblemError),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, message } => write!(f, "config line {line}: {message}"),
            ConfigError::MissingKey(k) => write!(f, "missing required config key '{k}'"),
            ConfigError::BadValue {
                key,
                value,
                expected,
            } => write!(
                f,
                "config key '{key}': bad value '{value}', expected {expected}"
            ),
            ConfigError::UnknownKey(k) => write!(f, "unknown config key '{k}'"),
            ConfigError::Io(e) => write!(f, "{e}"),
            ConfigError::Problem(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<IoError> for ConfigError {
    fn from(e: IoError) -> Self {
        ConfigError::Io(e)
    }
}

impl From<ProblemError> for ConfigError {
    fn from(e: ProblemError) -> Self {
        ConfigError::Problem(e)
    }
}

/// Every key the tool understands; anything else is rejected to catch typos.
const KNOWN_KEYS: &[&str] = &[
    "seed",
    "problem.kind",
    "problem.grid_n",
    "problem.beta",
    "problem.forcing",
    "problem.alpha",
    "problem.a",
    "problem.noise_xi",
    "problem.sigma",
    "problem.beta1",
    "problem.beta2",
    "problem.grid_rows",
    "problem.grid_cols",
    "problem.a_path",
    "problem.c_path",
    "problem.y_path",
    "problem.f_obs_path",
    "problem.xhat_path",
    "problem.edges_path",
    "solver.gamma",
    "solver.gamma_warmup",
    "solver.gamma0",
    "solver.gamma_ratio",
    "solver.tol_x",
    "solver.tol_f",
    "solver.tol_residual",
    "solver.max_iter",
    "solver.tol_act",
    "solver.eps_act",
    "solver.kappa_min",
    "solver.tol_qp",
    "solver.maxit_qp",
    "solver.active_set_reduction",
    "linsolve.kind",
    "linsolve.tol",
    "linsolve.maxit",
    "linsolve.partitions",
    "linsolve.overlap",
    "linsolve.precond",
    "linsolve.reorder",
    "linesearch.sigma",
    "linesearch.s_min",
    "linesearch.max_backtracks",
    "linesearch.slope",
    "admm.rho",
    "admm.tol",
    "admm.maxit",
    "bench.grid_n",
    "bench.block_grid_n",
];

/// Parsed configuration with the directory config-relative paths resolve
/// against.
#[derive(Debug, Clone)]
pub struct ConfigMap {
    map: BTreeMap<String, String>,
    base_dir: PathBuf,
}

/// Parses `key = value` lines with optional `[section]` headers that prefix
/// the keys; `#` and `;` start comments.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<ConfigMap, ConfigError> {
    let mut map = BTreeMap::new();
    let mut section = String::new();
    for (no, raw) in text.lines().enumerate() {
        let line = match raw.find(['#', ';']) {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(ConfigError::Parse {
                    line: no + 1,
                    message: "unterminated section header".into(),
                });
            }
            section = line[1..line.len() - 1].trim().to_string();
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(ConfigError::Parse {
                line: no + 1,
                message: format!("expected 'key = value', got '{line}'"),
            });
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        if key.is_empty() {
            return Err(ConfigError::Parse {
                line: no + 1,
                message: "empty key".into(),
            });
        }
        let full_key = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        if !KNOWN_KEYS.contains(&full_key.as_str()) {
            return Err(ConfigError::Parse {
                line: no + 1,
                message: format!("unknown key '{full_key}'"),
            });
        }
        map.insert(full_key, value.to_string());
    }
    Ok(ConfigMap {
        map,
        base_dir: base_dir.to_path_buf(),
    })
}

pub fn parse_config_file(path: &Path) -> Result<ConfigMap, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(IoError::Io(e)))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    parse_config(&text, &base)
}

impl ConfigMap {
    pub fn empty() -> ConfigMap {
        ConfigMap {
            map: BTreeMap::new(),
            base_dir: PathBuf::from("."),
        }
    }

    /// Applies `key=value` command-line overrides.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for ov in overrides {
            let Some(eq) = ov.find('=') else {
                return Err(ConfigError::BadValue {
                    key: ov.clone(),
                    value: String::new(),
                    expected: "key=value",
                });
            };
            let key = ov[..eq].trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError::UnknownKey(key));
            }
            self.map.insert(key, ov[eq + 1..].trim().to_string());
        }
        Ok(())
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn req_str(&self, key: &str) -> Result<&str, ConfigError> {
        self.get_str(key)
            .ok_or_else(|| ConfigError::MissingKey(key.into()))
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.into(),
                value: v.clone(),
                expected: "a float",
            }),
        }
    }

    pub fn req_f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.req_str(key)?;
        v.parse().map_err(|_| ConfigError::BadValue {
            key: key.into(),
            value: v.into(),
            expected: "a float",
        })
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.map.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: key.into(),
                value: v.clone(),
                expected: "an unsigned integer",
            }),
        }
    }

    pub fn req_usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.req_str(key)?;
        v.parse().map_err(|_| ConfigError::BadValue {
            key: key.into(),
            value: v.into(),
            expected: "an unsigned integer",
        })
    }

    pub fn get_bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.map.get(key).map(|s| s.to_lowercase()) {
            None => Ok(default),
            Some(v) if v == "true" || v == "1" || v == "on" => Ok(true),
            Some(v) if v == "false" || v == "0" || v == "off" => Ok(false),
            Some(v) => Err(ConfigError::BadValue {
                key: key.into(),
                value: v,
                expected: "a boolean",
            }),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get_str(key).map(|p| {
            let pb = PathBuf::from(p);
            if pb.is_absolute() {
                pb
            } else {
                self.base_dir.join(pb)
            }
        })
    }

    pub fn seed(&self) -> Result<u64, ConfigError> {
        match self.map.get("seed") {
            None => Ok(0),
            Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
                key: "seed".into(),
                value: v.clone(),
                expected: "an unsigned integer",
            }),
        }
    }

    /// Builds the problem described by the `problem.*` keys together with
    /// its default starting point.
    pub fn build_problem(&self) -> Result<(ProblemSpec, Vec<f64>), ConfigError> {
        let kind = self.req_str("problem.kind")?;
        let seed = self.seed()?;
        match kind {
            "quadratic_tv" => {
                let grid_n = self.req_usize("problem.grid_n")?;
                let beta = self.req_f64("problem.beta")?;
                let forcing = self.get_f64("problem.forcing", 10.0)?;
                let p = problems::build_quadratic_tv(grid_n, &|_, _| forcing, beta)?;
                let x0 = vec![0.0; p.dim()];
                Ok((p, x0))
            }
            "deconvolution" => {
                let a_path = self
                    .path("problem.a_path")
                    .ok_or_else(|| ConfigError::MissingKey("problem.a_path".into()))?;
                let y_path = self
                    .path("problem.y_path")
                    .ok_or_else(|| ConfigError::MissingKey("problem.y_path".into()))?;
                let a = io::read_matrix_market(&a_path)?;
                let y = io::read_vector_csv(&y_path)?;
                let alpha = self.get_f64("problem.alpha", 0.0)?;
                let beta = self.get_f64("problem.beta", 0.0)?;
                let edges = match self.path("problem.edges_path") {
                    Some(ep) => io::read_edges_csv(&ep)?,
                    None => Vec::new(),
                };
                let p = problems::build_deconvolution(a, &y, alpha, beta, &edges)?;
                let x0 = vec![0.0; p.dim()];
                Ok((p, x0))
            }
            "cauchy" => {
                let grid_n = self.req_usize("problem.grid_n")?;
                let a = self.req_f64("problem.a")?;
                let beta = self.req_f64("problem.beta")?;
                let f_obs = match self.path("problem.f_obs_path") {
                    Some(fp) => io::read_vector_csv(&fp)?,
                    None => {
                        // synthetic piecewise image with seeded Cauchy noise
                        let xi = self.get_f64("problem.noise_xi", 0.05)?;
                        let clean = synthetic::piecewise_image(grid_n);
                        synthetic::cauchy_noise(&clean, xi, seed)
                    }
                };
                let p = problems::build_cauchy_denoise(&f_obs, a, beta, grid_n)?;
                // observed image is the natural warm start
                Ok((p, f_obs))
            }
            "graph_trend" => {
                let beta1 = self.get_f64("problem.beta1", 1.0)?;
                let beta2 = self.get_f64("problem.beta2", 0.0)?;
                let (edges, y) =
                    match (self.path("problem.edges_path"), self.path("problem.y_path")) {
                        (Some(ep), Some(yp)) => {
                            (io::read_edges_csv(&ep)?, io::read_vector_csv(&yp)?)
                        }
                        _ => {
                            // synthetic grid graph with a noisy piecewise signal
                            let rows = self.get_usize("problem.grid_rows", 20)?;
                            let cols = self.get_usize("problem.grid_cols", 20)?;
                            let sigma = self.get_f64("problem.sigma", 0.1)?;
                            let edges = synthetic::grid_graph_edges(rows, cols);
                            let mut signal = vec![0.0; rows * cols];
                            for r in rows / 4..(3 * rows / 4) {
                                for c in cols / 5..(3 * cols / 5) {
                                    signal[r * cols + c] = 1.0;
                                }
                            }
                            let y = synthetic::gaussian_noise(&signal, sigma, seed);
                            (edges, y)
                        }
                    };
                let p = problems::build_graph_trend(&edges, &y, beta1, beta2)?;
                let x0 = vec![0.0; p.dim()];
                Ok((p, x0))
            }
            "prox" => {
                let xhat_path = self
                    .path("problem.xhat_path")
                    .ok_or_else(|| ConfigError::MissingKey("problem.xhat_path".into()))?;
                let xhat = io::read_vector_csv(&xhat_path)?;
                let alpha = self.req_f64("problem.alpha")?;
                let c = match self.path("problem.c_path") {
                    Some(cp) => io::read_matrix_market(&cp)?,
                    None => crate::linalg::SparseMatrix::identity(xhat.len()),
                };
                let p = problems::build_prox_instance(&xhat, c, alpha)?;
                let x0 = vec![0.0; p.dim()];
                Ok((p, x0))
            }
            other => Err(ConfigError::BadValue {
                key: "problem.kind".into(),
                value: other.into(),
                expected: "quadratic_tv | deconvolution | cauchy | graph_trend | prox",
            }),
        }
    }

    /// Builds the solver configuration from `solver.*`, `linsolve.*` and
    /// `linesearch.*` keys, defaulting everything absent.
    pub fn build_solver_config(&self) -> Result<SolverConfig, ConfigError> {
        let d = SolverConfig::default();
        let linsolve_kind = match self.get_str("linsolve.kind").unwrap_or("auto") {
            "auto" => LinsolveKind::Auto,
            "direct" => LinsolveKind::Direct,
            "pcg" => LinsolveKind::Pcg,
            "block_jacobi" => LinsolveKind::BlockJacobi,
            other => {
                return Err(ConfigError::BadValue {
                    key: "linsolve.kind".into(),
                    value: other.into(),
                    expected: "auto | direct | pcg | block_jacobi",
                })
            }
        };
        let precond = match self.get_str("linsolve.precond").unwrap_or("jacobi") {
            "jacobi" => Precond::Jacobi,
            "ic0" => Precond::Ic0,
            other => {
                return Err(ConfigError::BadValue {
                    key: "linsolve.precond".into(),
                    value: other.into(),
                    expected: "jacobi | ic0",
                })
            }
        };
        let bfs_reorder = match self.get_str("linsolve.reorder").unwrap_or("none") {
            "none" => false,
            "bfs" => true,
            other => {
                return Err(ConfigError::BadValue {
                    key: "linsolve.reorder".into(),
                    value: other.into(),
                    expected: "none | bfs",
                })
            }
        };
        let slope = match self.get_str("linesearch.slope").unwrap_or("minnorm") {
            "minnorm" => SlopeKind::MinNorm,
            "tilde" => SlopeKind::Tilde,
            other => {
                return Err(ConfigError::BadValue {
                    key: "linesearch.slope".into(),
                    value: other.into(),
                    expected: "minnorm | tilde",
                })
            }
        };
        let maxit = match self.get_usize("linsolve.maxit", 0)? {
            0 => None,
            n => Some(n),
        };
        Ok(SolverConfig {
            gamma: self.get_f64("solver.gamma", d.gamma)?,
            gamma_warmup: GammaWarmup {
                enabled: self.get_bool("solver.gamma_warmup", false)?,
                gamma0: self.get_f64("solver.gamma0", d.gamma_warmup.gamma0)?,
                ratio: self.get_f64("solver.gamma_ratio", d.gamma_warmup.ratio)?,
            },
            tol_x: self.get_f64("solver.tol_x", d.tol_x)?,
            tol_f: self.get_f64("solver.tol_f", d.tol_f)?,
            tol_residual: self.get_f64("solver.tol_residual", d.tol_residual)?,
            max_iter: self.get_usize("solver.max_iter", d.max_iter)?,
            tol_act: self.get_f64("solver.tol_act", d.tol_act)?,
            eps_act: self.get_f64("solver.eps_act", d.eps_act)?,
            kappa_min: self.get_f64("solver.kappa_min", d.kappa_min)?,
            tol_qp: self.get_f64("solver.tol_qp", d.tol_qp)?,
            maxit_qp: self.get_usize("solver.maxit_qp", d.maxit_qp)?,
            active_set_reduction: self
                .get_bool("solver.active_set_reduction", d.active_set_reduction)?,
            linsolve: LinsolveConfig {
                kind: linsolve_kind,
                tol: self.get_f64("linsolve.tol", 1e-8)?,
                maxit,
                partitions: self.get_usize("linsolve.partitions", 4)?,
                overlap: self.get_f64("linsolve.overlap", 0.2)?,
                precond,
                bfs_reorder,
            },
            linesearch: LinesearchConfig {
                sigma: self.get_f64("linesearch.sigma", 1e-2)?,
                s_min: self.get_f64("linesearch.s_min", 1e-12)?,
                max_backtracks: self.get_usize("linesearch.max_backtracks", 40)?,
                slope,
                eps_reg: crate::geometry::DEFAULT_EPS_REG,
            },
            seed: self.seed()?,
        })
    }
}
