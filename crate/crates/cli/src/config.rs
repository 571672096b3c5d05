//! Run configuration files (TOML).
//!
//! ```toml
//! [model]
//! name = "u1"            # u1 | cp1 | custom
//! s = 1.0                # or big_s = -0.5 for cp1 (s = -S)
//! # table = "f.txt"      # custom: two columns t f
//! # threshold = 2.0
//!
//! [domain]
//! n = 128                # grid points per axis
//! length = 20.0          # torus side, default 1
//! sigma = 4.0            # mollification width in grid spacings
//!
//! [[vortex]]
//! x = 0.5                # fractions of the side
//! y = 0.5
//! multiplicity = 1
//!
//! [solve]
//! q = 40.0               # or q_list = [...]; q_hat / q_hat_list give q = 2 q_hat
//!
//! [tolerances]
//! newton_tol = 1e-9
//!
//! [output]
//! dir = "out"
//! formats = ["tsv"]      # table formats: tsv, csv, json
//! ```

use std::fmt;
use std::path::{Path, PathBuf};

use mcs_core::solver::{ProblemSpec, Tolerances};
use mcs_core::{GridSpec, NonlinearityModel, VortexConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct ConfigError {
    /// Dotted path of the offending key, empty for syntax errors.
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "{}", self.message)
        } else {
            write!(f, "{}: {}", self.field, self.message)
        }
    }
}

fn err(field: &str, message: impl fmt::Display) -> ConfigError {
    ConfigError {
        field: field.to_string(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub domain: DomainSection,
    #[serde(default, rename = "vortex")]
    pub vortices: Vec<VortexEntry>,
    pub solve: SolveSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub name: String,
    pub s: Option<f64>,
    pub big_s: Option<f64>,
    pub table: Option<PathBuf>,
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub n: usize,
    #[serde(default = "unit_length")]
    pub length: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
}

fn unit_length() -> f64 {
    1.0
}

fn default_sigma() -> f64 {
    4.0
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VortexEntry {
    pub x: f64,
    pub y: f64,
    #[serde(default = "one")]
    pub multiplicity: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub q: Option<f64>,
    pub q_list: Option<Vec<f64>>,
    pub q_hat: Option<f64>,
    pub q_hat_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<TableFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            formats: default_formats(),
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_formats() -> Vec<TableFormat> {
    vec![TableFormat::Tsv]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    Tsv,
    Csv,
    Json,
}

/// A validated configuration: the problem at the first coupling and the
/// full list of couplings.
#[derive(Debug, Clone)]
pub struct Run {
    pub spec: ProblemSpec,
    pub q_list: Vec<f64>,
    pub sigma_cells: f64,
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| err("", e.to_string().trim_end()))
    }

    /// Checks every precondition and builds the problem spec. Relative table
    /// and output paths are resolved against `base`.
    pub fn resolve(&self, base: &Path) -> Result<Run, ConfigError> {
        let model = self.build_model(base)?;
        let grid = GridSpec::new(self.domain.n, self.domain.length)
            .map_err(|e| err("domain", e))?;
        if !(self.domain.sigma > 0.0 && self.domain.sigma.is_finite()) {
            return Err(err("domain.sigma", "must be positive"));
        }
        for (k, v) in self.vortices.iter().enumerate() {
            for (name, c) in [("x", v.x), ("y", v.y)] {
                if !(0.0..1.0).contains(&c) {
                    return Err(err(
                        &format!("vortex[{k}].{name}"),
                        format!("{c} is outside [0, 1)"),
                    ));
                }
            }
        }
        let pts: Vec<_> = self.vortices.iter().map(|v| (v.x, v.y, v.multiplicity)).collect();
        let vortices = VortexConfig::on_grid(&grid, &pts, self.domain.sigma)
            .map_err(|e| err("vortex", e))?;
        let q_list = self.q_list()?;
        let t = self.tolerances;
        if !(t.newton_tol > 0.0 && t.krylov_tol > 0.0 && t.max_newton_iters > 0) {
            return Err(err("tolerances", "tolerances and iteration limits must be positive"));
        }
        let spec = ProblemSpec::new(model, vortices, q_list[0], grid, t)
            .map_err(|e| err("", e))?;
        let mut output = self.output.clone();
        if output.dir.is_relative() {
            output.dir = base.join(&output.dir);
        }
        Ok(Run {
            spec,
            q_list,
            sigma_cells: self.domain.sigma,
            output,
        })
    }

    fn build_model(&self, base: &Path) -> Result<NonlinearityModel, ConfigError> {
        let m = &self.model;
        if !matches!(m.name.as_str(), "u1" | "cp1" | "custom") {
            return Err(err("model.name", format!("unknown model '{}'", m.name)));
        }
        let s = match (m.s, m.big_s, m.name.as_str()) {
            (Some(_), Some(_), _) => return Err(err("model", "give either s or big_s")),
            (Some(s), None, _) => s,
            (None, Some(big_s), "cp1") => -big_s,
            (None, Some(_), _) => return Err(err("model.big_s", "only meaningful for cp1")),
            (None, None, "u1") => 1.0,
            (None, None, _) => return Err(err("model.s", "missing")),
        };
        let model = match m.name.as_str() {
            "u1" => NonlinearityModel::u1(s),
            "cp1" => NonlinearityModel::cp1(s),
            "custom" => {
                let path = m
                    .table
                    .as_ref()
                    .ok_or_else(|| err("model.table", "custom models need a table file"))?;
                let (ts, fs) = read_table(&base.join(path))?;
                NonlinearityModel::custom(ts, fs, s)
            }
            other => return Err(err("model.name", format!("unknown model '{other}'"))),
        }
        .map_err(|e| err("model", e))?;
        match m.threshold {
            Some(t) => model.with_threshold(t).map_err(|e| err("model.threshold", e)),
            None => Ok(model),
        }
    }

    fn q_list(&self) -> Result<Vec<f64>, ConfigError> {
        let s = &self.solve;
        let given = [
            s.q.is_some(),
            s.q_list.is_some(),
            s.q_hat.is_some(),
            s.q_hat_list.is_some(),
        ];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(err("solve", "give exactly one of q, q_list, q_hat, q_hat_list"));
        }
        let (field, list) = if let Some(q) = s.q {
            ("solve.q", vec![q])
        } else if let Some(l) = &s.q_list {
            ("solve.q_list", l.clone())
        } else if let Some(qh) = s.q_hat {
            ("solve.q_hat", vec![2.0 * qh])
        } else {
            let l = s.q_hat_list.as_ref().expect("one entry is set");
            ("solve.q_hat_list", l.iter().map(|q| 2.0 * q).collect())
        };
        if list.is_empty() {
            return Err(err(field, "empty"));
        }
        if let Some(q) = list.iter().find(|q| !(**q > 0.0 && q.is_finite())) {
            return Err(err(field, format!("q must be positive and finite, got {q}")));
        }
        if list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(err(field, "q_list must be ascending"));
        }
        Ok(list)
    }
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err("model.table", format!("{}: {e}", path.display())))?;
    let mut ts = Vec::new();
    let mut fs = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|c| !c.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| err("model.table", format!("line {}: {e}", k + 1)))?;
        if cols.len() != 2 {
            return Err(err("model.table", format!("line {}: expected two columns", k + 1)));
        }
        ts.push(cols[0]);
        fs.push(cols[1]);
    }
    Ok((ts, fs))
}

pub fn load(path: &Path) -> Result<Run, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| err("", format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    RunConfig::parse(&text)?.resolve(base)
}
