use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use enflo_lab::extremal::{Objective, OptimizationConfig};
use enflo_lab::inequalities::PISIER_MAX_N;
use enflo_lab::{Exponent, NormSpec, TorusGeometry};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    VerifyIdentity,
    CheckLemmas,
    EstimateConstants,
    Scan,
    FitH,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::VerifyIdentity => "verify-identity",
            Command::CheckLemmas => "check-lemmas",
            Command::EstimateConstants => "estimate-constants",
            Command::Scan => "scan",
            Command::FitH => "fit-h",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    /// Empty means "derive k per cell" for `scan`.
    #[serde(default)]
    pub k: Vec<usize>,
    pub p: Vec<f64>,
    pub q: Vec<NormSpec>,
    pub d: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Max identity residual on verified tables.
    pub identity: f64,
    /// Max held-out residual of a coefficient fit.
    pub heldout: f64,
    /// Relative slack for proven inequalities.
    pub inequality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { identity: 1e-10, heldout: 1e-8, inequality: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Optimizer {
    pub restarts: usize,
    pub iterations: usize,
    pub step: f64,
    pub smoothing_eps: f64,
}

impl Default for Optimizer {
    fn default() -> Self {
        let base = OptimizationConfig::default();
        Optimizer {
            restarts: base.restarts,
            iterations: base.iterations,
            step: base.step,
            smoothing_eps: base.smoothing_eps,
        }
    }
}

impl Optimizer {
    pub fn with_seed(&self, seed: u64) -> OptimizationConfig {
        OptimizationConfig {
            restarts: self.restarts,
            iterations: self.iterations,
            step: self.step,
            seed,
            smoothing_eps: self.smoothing_eps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub command: Command,
    pub grid: Grid,
    pub seed: u64,
    /// Random tables per grid cell.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// `(f, x, ε)` samples per coefficient fit.
    #[serde(default = "default_fit_budget")]
    pub fit_budget: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub optimizer: Optimizer,
    /// Objectives for `estimate-constants`.
    #[serde(default)]
    pub objectives: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

fn default_samples() -> usize {
    5
}

fn default_fit_budget() -> usize {
    200
}

fn invalid(field: &str, msg: impl fmt::Display) -> anyhow::Error {
    anyhow::anyhow!("invalid config field `{field}`: {msg}")
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn default_for(command: Command) -> Self {
        let grid = |n: &[usize], m: &[usize], k: &[usize], p: &[f64], q: &[NormSpec], d: &[usize]| Grid {
            n: n.to_vec(),
            m: m.to_vec(),
            k: k.to_vec(),
            p: p.to_vec(),
            q: q.to_vec(),
            d: d.to_vec(),
        };
        let base = |command, grid| ExperimentConfig {
            schema_version: SCHEMA_VERSION,
            command,
            grid,
            seed: 0,
            samples: default_samples(),
            fit_budget: default_fit_budget(),
            tolerances: Tolerances::default(),
            optimizer: Optimizer::default(),
            objectives: Vec::new(),
            output: None,
        };
        let l2 = NormSpec::l2();
        match command {
            Command::VerifyIdentity | Command::FitH => {
                base(command, grid(&[1, 2, 3], &[8], &[1, 3], &[2.0], &[l2], &[1, 2]))
            }
            Command::CheckLemmas => base(
                command,
                grid(&[1, 2, 3], &[8, 12], &[1, 3], &[1.0, 1.5, 2.0], &[NormSpec::l1(), l2, NormSpec::linf()], &[1, 2]),
            ),
            Command::EstimateConstants => ExperimentConfig {
                objectives: ["scaled_enflo", "smoothing", "approximation"].map(String::from).to_vec(),
                optimizer: Optimizer { restarts: 3, iterations: 100, ..Optimizer::default() },
                ..base(command, grid(&[1, 2], &[8], &[3], &[1.5, 2.0], &[l2], &[1]))
            },
            Command::Scan => ExperimentConfig {
                optimizer: Optimizer { restarts: 3, iterations: 100, ..Optimizer::default() },
                ..base(command, grid(&[1, 2, 3], &[4, 8, 12], &[], &[2.0], &[l2], &[1]))
            },
        }
    }

    pub fn exponents(&self) -> Vec<Exponent> {
        self.grid.p.iter().map(|&p| Exponent::new(p).expect("validated")).collect()
    }

    /// Hypercube objectives ignore `m` and `k`.
    pub fn parsed_objectives(&self, k: usize) -> Result<Vec<Objective>> {
        self.objectives
            .iter()
            .map(|name| Objective::parse(name, Some(k)).map_err(|e| invalid("objectives", e)))
            .collect()
    }

    /// Fails on the first offending field before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid("schema_version", format!("expected {SCHEMA_VERSION}, got {}", self.schema_version)));
        }
        let g = &self.grid;
        for (field, list) in [("grid.n", &g.n), ("grid.m", &g.m), ("grid.d", &g.d)] {
            if list.is_empty() {
                return Err(invalid(field, "must not be empty"));
            }
        }
        if g.p.is_empty() {
            return Err(invalid("grid.p", "must not be empty"));
        }
        if g.q.is_empty() {
            return Err(invalid("grid.q", "must not be empty"));
        }
        if let Some(&n) = g.n.iter().find(|&&n| n == 0) {
            return Err(invalid("grid.n", format!("n={n} must be positive")));
        }
        if let Some(&d) = g.d.iter().find(|&&d| d == 0) {
            return Err(invalid("grid.d", format!("d={d} must be positive")));
        }
        for &p in &g.p {
            Exponent::new(p).map_err(|e| invalid("grid.p", e))?;
        }
        for &m in &g.m {
            if m < 2 || m % 2 != 0 {
                return Err(invalid("grid.m", format!("m={m} must be even and at least 2")));
            }
            if self.command == Command::Scan && m % 4 != 0 {
                return Err(invalid("grid.m", format!("scan needs m divisible by 4, got m={m}")));
            }
        }
        for &k in &g.k {
            if k % 2 == 0 {
                return Err(invalid("grid.k", format!("k={k} must be odd")));
            }
            for &m in &g.m {
                if 2 * k >= m {
                    return Err(invalid("grid.k", format!("k={k} must be below m/2 for m={m}")));
                }
            }
        }
        if self.command != Command::Scan && g.k.is_empty() {
            return Err(invalid("grid.k", format!("{} needs at least one k", self.command)));
        }
        if self.command == Command::Scan && g.k.len() > 1 {
            return Err(invalid("grid.k", "scan takes at most one fixed k (empty for the default rule)"));
        }
        for &n in &g.n {
            for &m in &g.m {
                TorusGeometry::new(n, m).map_err(|e| invalid("grid.n", e))?;
            }
        }
        if matches!(self.command, Command::CheckLemmas | Command::VerifyIdentity) && self.samples == 0 {
            return Err(invalid("samples", "must be at least 1"));
        }
        if matches!(self.command, Command::VerifyIdentity | Command::FitH) {
            let need = g.n.iter().map(|&n| 2 * (n + 1) * (n + 2)).max().unwrap_or(0);
            if self.fit_budget < need {
                return Err(invalid("fit_budget", format!("{} is below the {need} samples the largest n needs", self.fit_budget)));
            }
        }
        for (field, v) in [
            ("tolerances.identity", self.tolerances.identity),
            ("tolerances.heldout", self.tolerances.heldout),
            ("tolerances.inequality", self.tolerances.inequality),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("{v} must be a finite nonnegative number")));
            }
        }
        if matches!(self.command, Command::EstimateConstants | Command::Scan) {
            self.optimizer.with_seed(self.seed).validate().map_err(|e| invalid("optimizer", e))?;
        }
        if self.command == Command::EstimateConstants {
            if self.objectives.is_empty() {
                return Err(invalid("objectives", "must not be empty"));
            }
            for obj in self.parsed_objectives(g.k[0])? {
                let bad = match obj {
                    Objective::Pisier => g.n.iter().find(|&&n| !(2..=PISIER_MAX_N).contains(&n)),
                    Objective::Enflo => g.n.iter().find(|&&n| n > 20),
                    _ => None,
                };
                if let Some(n) = bad {
                    return Err(invalid("objectives", format!("{obj} is not available at n={n}")));
                }
            }
        }
        Ok(())
    }
}
