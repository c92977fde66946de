use std::path::{Path, PathBuf};

use diffggm::debias::BoundsConfig;
use diffggm::eval::Scenario;
use diffggm::ggm::{Correction, Method, NodewiseConfig};
use diffggm::simulate::generate_ggm_pair;
use diffggm::types::default_k_grid;
use diffggm::SolverConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{CorrectionArg, Flags, MethodArg};
use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSet {
    Lasso,
    Fused,
    Both,
}

impl MethodSet {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodSet::Lasso => vec![Method::DebiasedLasso],
            MethodSet::Fused => vec![Method::DebiasedFused],
            MethodSet::Both => vec![Method::DebiasedLasso, Method::DebiasedFused],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorrectionMode {
    None,
    Bh,
}

impl std::fmt::Display for CorrectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CorrectionMode::None => "none",
            CorrectionMode::Bh => "bh",
        })
    }
}

impl From<CorrectionMode> for Correction {
    fn from(c: CorrectionMode) -> Self {
        match c {
            CorrectionMode::None => Correction::None,
            CorrectionMode::Bh => Correction::Bh,
        }
    }
}

/// Fully resolved parameters of one run. Serialized as the run manifest, so
/// feeding a manifest back through `--config` replays the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: String,
    pub version: String,
    pub input_a: Option<PathBuf>,
    pub input_b: Option<PathBuf>,
    pub method: MethodSet,
    pub alpha: f64,
    pub correction: CorrectionMode,
    pub seed: u64,
    pub replicates: usize,
    pub n2_grid: Vec<usize>,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    pub sparsity: f64,
    pub diff_sparsity: f64,
    pub permutations: usize,
    /// Runtime only: results do not depend on it, so it stays out of manifests.
    #[serde(skip_serializing, default)]
    pub threads: Option<usize>,
    pub k_grid: Vec<f64>,
    pub cv_folds: usize,
    pub bounds_c: f64,
    pub bounds_a: f64,
    pub bounds_sd: usize,
    pub bounds_s12: usize,
    pub bounds_m: f64,
    pub single_budget: f64,
    pub min_bound_multiplier: f64,
    pub max_fusion_ratio: f64,
    pub solver_tol: f64,
    pub solver_max_iter: usize,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
}

impl RunConfig {
    pub fn defaults(command: &str) -> Self {
        let scenario = Scenario::default();
        let nodewise = NodewiseConfig::default();
        let bounds = BoundsConfig::default();
        RunConfig {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_a: None,
            input_b: None,
            method: MethodSet::Both,
            alpha: scenario.alpha,
            correction: CorrectionMode::None,
            seed: 0,
            replicates: if command == "benchmark" { 50 } else { 20 },
            n2_grid: vec![20, 60, 100, 150],
            p: scenario.p,
            n1: scenario.n1,
            n2: scenario.n2,
            sparsity: scenario.sparsity,
            diff_sparsity: scenario.diff_sparsity,
            permutations: 199,
            threads: None,
            k_grid: default_k_grid(),
            cv_folds: nodewise.cv_folds,
            bounds_c: bounds.c,
            bounds_a: bounds.a,
            bounds_sd: bounds.s_d,
            bounds_s12: bounds.s_12,
            bounds_m: bounds.m,
            single_budget: nodewise.single_budget,
            min_bound_multiplier: nodewise.min_bound_multiplier,
            max_fusion_ratio: nodewise.max_fusion_ratio,
            solver_tol: nodewise.solver.tol,
            solver_max_iter: nodewise.solver.max_iter,
            qp_tol: nodewise.qp.tol,
            qp_max_iter: nodewise.qp.max_iter,
        }
    }

    fn apply_flags(&mut self, f: &Flags) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = f.$field.clone() { self.$field = v; })*
            };
        }
        take!(
            alpha,
            seed,
            replicates,
            n2_grid,
            p,
            n1,
            n2,
            sparsity,
            diff_sparsity,
            k_grid
        );
        take!(
            bounds_c,
            bounds_a,
            bounds_sd,
            bounds_s12,
            bounds_m,
            permutations
        );
        if f.input_a.is_some() {
            self.input_a = f.input_a.clone();
        }
        if f.input_b.is_some() {
            self.input_b = f.input_b.clone();
        }
        if f.threads.is_some() {
            self.threads = f.threads;
        }
        if let Some(m) = f.method {
            self.method = match m {
                MethodArg::Lasso => MethodSet::Lasso,
                MethodArg::Fused => MethodSet::Fused,
                MethodArg::Both => MethodSet::Both,
            };
        }
        if let Some(c) = f.correction {
            self.correction = match c {
                CorrectionArg::None => CorrectionMode::None,
                CorrectionArg::Bh => CorrectionMode::Bh,
            };
        }
    }

    /// Defaults, then flags, then the config file.
    pub fn resolve(command: &str, flags: &Flags) -> CliResult<Self> {
        let mut cfg = RunConfig::defaults(command);
        cfg.apply_flags(flags);
        if let Some(path) = &flags.config {
            cfg = cfg.overlay_file(path)?;
        }
        if cfg.command != command {
            return Err(CliError::Config(format!(
                "config is for command '{}', not '{command}'",
                cfg.command
            )));
        }
        cfg.version = env!("CARGO_PKG_VERSION").to_string();
        cfg.validate()?;
        Ok(cfg)
    }

    fn overlay_file(&self, path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let Value::Object(overrides) = file else {
            return Err(CliError::Config(format!(
                "{}: expected a JSON object",
                path.display()
            )));
        };
        let Value::Object(mut merged) = serde_json::to_value(self).expect("config serializes")
        else {
            unreachable!("config serializes to an object");
        };
        merged.insert(
            "threads".into(),
            serde_json::to_value(self.threads).expect("serializes"),
        );
        for (key, value) in overrides {
            merged.insert(key, value);
        }
        serde_json::from_value(Value::Object(merged))
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            p: self.p,
            n1: self.n1,
            n2: self.n2,
            sparsity: self.sparsity,
            diff_sparsity: self.diff_sparsity,
            alpha: self.alpha,
        }
    }

    pub fn nodewise(&self) -> NodewiseConfig {
        NodewiseConfig {
            solver: SolverConfig {
                max_iter: self.solver_max_iter,
                tol: self.solver_tol,
                seed: self.seed,
            },
            qp: SolverConfig {
                max_iter: self.qp_max_iter,
                tol: self.qp_tol,
                seed: self.seed,
            },
            k_grid: self.k_grid.clone(),
            cv_folds: self.cv_folds,
            bounds: BoundsConfig {
                c: self.bounds_c,
                a: self.bounds_a,
                s_d: self.bounds_sd,
                s_12: self.bounds_s12,
                m: self.bounds_m,
            },
            single_budget: self.single_budget,
            min_bound_multiplier: self.min_bound_multiplier,
            max_fusion_ratio: self.max_fusion_ratio,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be positive".into());
        }
        if self.permutations < 19 {
            return bad(format!(
                "need at least 19 permutations, got {}",
                self.permutations
            ));
        }
        if self.n2_grid.is_empty() || self.n2_grid.iter().any(|&n| n < 2) {
            return bad("n2 grid must be non-empty with entries >= 2".into());
        }
        self.nodewise()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let needs_inputs = self.command == "test";
        let has_inputs = (self.input_a.is_some(), self.input_b.is_some());
        match has_inputs {
            (true, true) => {}
            (false, false) if !needs_inputs => {}
            _ if needs_inputs => return bad("test needs both --input-a and --input-b".into()),
            _ => return bad("give both --input-a and --input-b or neither".into()),
        }
        let simulates = !(self.command == "test" || (self.command == "permute" && has_inputs.0));
        if simulates {
            self.scenario()
                .validate()
                .map_err(|e| CliError::Config(e.to_string()))?;
            // Graph generation is cheap and catches infeasible sparsity targets early.
            let diff = if self.command == "permute" {
                0.0
            } else {
                self.diff_sparsity
            };
            generate_ggm_pair(self.p, self.sparsity, diff, 0)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let smallest_n2 = if self.command == "power-curve" {
                *self.n2_grid.iter().min().expect("non-empty")
            } else {
                self.n2
            };
            if self.n1.min(smallest_n2) < 2 * self.cv_folds {
                return bad(format!(
                    "{}-fold cross-validation needs at least {} samples per group",
                    self.cv_folds,
                    2 * self.cv_folds
                ));
            }
        }
        Ok(())
    }

    pub fn manifest_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("config serializes");
        text.push('\n');
        text
    }
}
