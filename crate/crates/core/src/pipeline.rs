//! Run configuration, stage orchestration and report emission.
//!
//! A run executes the stages `checks → discretize → barriers → primal → dual
//! → oracle → verify` selected by a [`Command`]. A failing stage is recorded
//! and every stage depending on it is skipped with a reason; the report is
//! always complete.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::barrier::{build_barriers, BarrierPair};
use crate::error::{Error, Result};
use crate::grid::{build_grid, discretize, DiscreteSystem, Grid, VectorGridFunction};
use crate::operator::{make_competitive, make_diagonal_linear, DataFn, OperatorSpec, Partition};
use crate::perron::{perron_solve, perron_solve_dual, pseudo_time_oracle, stable_step, OracleReport, SolveConfig, SolveReport};
use crate::structure::{run_checks, CheckReport, Condition, SamplerConfig};
use crate::viscosity::{classify, Classification, Verdict};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Builtin {
    Competitive,
    DiagonalLinear,
}

/// Operator selection. Parameters not used by the chosen builtin are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorConfig {
    pub builtin: Builtin,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f: Option<DataFn>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<DataFn>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<DataFn>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m2: Option<usize>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            builtin: Builtin::Competitive,
            lambda: None,
            alpha: None,
            beta: None,
            f: None,
            g: None,
            lambdas: None,
            data: None,
            m1: None,
            m2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub dim: usize,
    /// Per-axis `[low, high]`; defaults to the unit box.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bounds: Option<Vec<(f64, f64)>>,
    /// Nodes per axis; a single entry applies to every axis.
    pub nodes: Vec<usize>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            bounds: None,
            nodes: vec![101],
        }
    }
}

/// Sampler settings; the seed comes from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub sample_count: usize,
    pub value_range: (f64, f64),
    pub gradient_range: (f64, f64),
    pub matrix_scale: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            sample_count: d.sample_count,
            value_range: d.value_range,
            gradient_range: d.gradient_range,
            matrix_scale: d.matrix_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierSource {
    /// The four-step construction (competitive operator only).
    Auto,
    /// Spatially constant interior values, Dirichlet datum on the boundary.
    Constant { z: Vec<f64>, w: Vec<f64> },
    /// CSV files in the grid-function layout.
    Files { z: PathBuf, w: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub enabled: bool,
    /// Fraction of the stability bound used as pseudo-time step.
    pub step_fraction: f64,
    pub max_steps: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            step_fraction: 0.5,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub barrier: f64,
    pub classification: f64,
    /// Largest primal/dual discrepancy accepted as agreement.
    pub uniqueness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            barrier: 1e-8,
            classification: 1e-7,
            uniqueness: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Assertions {
    pub checks: bool,
    pub barriers: bool,
    pub converged: bool,
    pub solution: bool,
    pub uniqueness: bool,
}

impl Default for Assertions {
    fn default() -> Self {
        Self {
            checks: false,
            barriers: true,
            converged: true,
            solution: true,
            uniqueness: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub operator: OperatorConfig,
    pub grid: GridConfig,
    pub checks: Vec<Condition>,
    pub sampler: SamplingConfig,
    pub barriers: BarrierSource,
    pub solver: SolveConfig,
    pub oracle: OracleConfig,
    pub tolerances: Tolerances,
    pub assertions: Assertions,
    pub output: OutputConfig,
    pub seed: u64,
    /// Keys present in the input but not understood (non-strict mode).
    #[serde(skip)]
    pub ignored_keys: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            operator: OperatorConfig::default(),
            grid: GridConfig::default(),
            checks: vec![
                Condition::Ellipticity,
                Condition::Mon1,
                Condition::Mon2,
                Condition::CondIPrime,
                Condition::CondIi,
            ],
            sampler: SamplingConfig::default(),
            barriers: BarrierSource::Auto,
            solver: SolveConfig::default(),
            oracle: OracleConfig::default(),
            tolerances: Tolerances::default(),
            assertions: Assertions::default(),
            output: OutputConfig::default(),
            seed: 0,
            ignored_keys: Vec::new(),
        }
    }
}

fn config_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Maps a library validation error onto a config path below `prefix`.
fn at_path(prefix: &str, e: Error) -> Error {
    match e {
        Error::InvalidArgument { arg, reason } => config_err(&format!("{prefix}.{arg}"), reason),
        Error::Config { .. } | Error::Parse { .. } => e,
        other => config_err(prefix, other.to_string()),
    }
}

impl RunConfig {
    /// Fills builtin parameter defaults so that the echo shows them.
    fn apply_defaults(&mut self) {
        let op = &mut self.operator;
        if op.builtin == Builtin::Competitive {
            op.lambda.get_or_insert(1.0);
            op.alpha.get_or_insert(1.0);
            op.beta.get_or_insert(1.0);
            op.f.get_or_insert(DataFn::constant(1.0));
            op.g.get_or_insert(DataFn::constant(1.0));
        } else if let Some(lambdas) = &op.lambdas {
            op.m1.get_or_insert(lambdas.len());
            let m1 = op.m1.unwrap_or(0);
            op.m2.get_or_insert(lambdas.len().saturating_sub(m1));
        }
    }

    pub fn validate(&self) -> Result<()> {
        let op = &self.operator;
        let foreign: &[(&str, bool)] = match op.builtin {
            Builtin::Competitive => &[
                ("lambdas", op.lambdas.is_some()),
                ("data", op.data.is_some()),
                ("m1", op.m1.is_some()),
                ("m2", op.m2.is_some()),
            ],
            Builtin::DiagonalLinear => &[
                ("lambda", op.lambda.is_some()),
                ("alpha", op.alpha.is_some()),
                ("beta", op.beta.is_some()),
                ("f", op.f.is_some()),
                ("g", op.g.is_some()),
            ],
        };
        if let Some((key, _)) = foreign.iter().find(|(_, present)| *present) {
            return Err(config_err(&format!("operator.{key}"), "not a parameter of the selected builtin"));
        }
        self.sampler_config()
            .validate()
            .map_err(|e| at_path("sampler", e))?;
        self.solver.validate().map_err(|e| at_path("solver", e))?;
        let t = &self.tolerances;
        for (name, v) in [("barrier", t.barrier), ("classification", t.classification), ("uniqueness", t.uniqueness)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(&format!("tolerances.{name}"), "must be positive and finite"));
            }
        }
        if !(self.oracle.step_fraction > 0.0 && self.oracle.step_fraction <= 1.0) {
            return Err(config_err("oracle.step_fraction", "must lie in (0, 1]"));
        }
        if let BarrierSource::Constant { z, w } = &self.barriers {
            let m = self.build_operator()?.m();
            for (key, v) in [("z", z), ("w", w)] {
                if v.len() != m {
                    return Err(config_err(
                        &format!("barriers.constant.{key}"),
                        format!("expected {m} values, found {}", v.len()),
                    ));
                }
            }
        }
        let spec = self.build_operator()?;
        self.build_grid().map_err(|e| at_path("grid", e))?;
        if spec.dim() != self.grid.dim {
            return Err(config_err("grid.dim", "operator and grid dimensions differ"));
        }
        Ok(())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            sample_count: self.sampler.sample_count,
            value_range: self.sampler.value_range,
            gradient_range: self.sampler.gradient_range,
            matrix_scale: self.sampler.matrix_scale,
            seed: self.seed,
        }
    }

    pub fn build_operator(&self) -> Result<OperatorSpec> {
        let op = &self.operator;
        let dim = self.grid.dim;
        let missing = |key: &str| config_err(&format!("operator.{key}"), "required parameter missing");
        match op.builtin {
            Builtin::Competitive => make_competitive(
                op.lambda.unwrap_or(1.0),
                op.alpha.unwrap_or(1.0),
                op.beta.unwrap_or(1.0),
                op.f.clone().unwrap_or(DataFn::constant(1.0)),
                op.g.clone().unwrap_or(DataFn::constant(1.0)),
                dim,
            ),
            Builtin::DiagonalLinear => {
                let lambdas = op.lambdas.as_ref().ok_or_else(|| missing("lambdas"))?;
                let data = op.data.clone().ok_or_else(|| missing("data"))?;
                let m1 = op.m1.unwrap_or(lambdas.len());
                let m2 = op.m2.unwrap_or(lambdas.len().saturating_sub(m1));
                make_diagonal_linear(lambdas, data, Partition::new(m1, m2)?, dim)
            }
        }
        .map_err(|e| match e {
            Error::InvalidArgument { ref arg, .. } if arg == "dim" => at_path("grid", e),
            e => at_path("operator", e),
        })
    }

    pub fn build_grid(&self) -> Result<Grid> {
        let g = &self.grid;
        let nodes = match g.nodes.len() {
            1 => vec![g.nodes[0]; g.dim],
            _ => g.nodes.clone(),
        };
        let bounds = g.bounds.clone().unwrap_or_else(|| vec![(0.0, 1.0); g.dim]);
        build_grid(g.dim, &bounds, &nodes)
    }
}

/// Parses and validates a JSON config. In strict mode unknown keys are
/// rejected; otherwise they are kept in [`RunConfig::ignored_keys`].
pub fn parse_config(text: &str, strict: bool) -> Result<RunConfig> {
    let mut ignored = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let parsed: std::result::Result<RunConfig, _> = {
        let mut note = |path: serde_ignored::Path| ignored.push(path.to_string());
        let track = serde_ignored::Deserializer::new(&mut de, &mut note);
        serde_path_to_error::deserialize(track)
    };
    let mut cfg = parsed.map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            line: inner.line(),
            column: inner.column(),
            path,
            message: inner.to_string(),
        }
    })?;
    de.end().map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        path: ".".into(),
        message: e.to_string(),
    })?;
    if strict {
        if let Some(key) = ignored.first() {
            return Err(config_err(key, "unknown key"));
        }
    }
    cfg.ignored_keys = ignored;
    cfg.apply_defaults();
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Check,
    Barriers,
    Solve,
    Verify,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Checks,
    Discretize,
    Barriers,
    Primal,
    Dual,
    Oracle,
    Verify,
}

impl Command {
    pub fn stages(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            Command::Check => &[Checks],
            Command::Barriers => &[Discretize, Barriers],
            Command::Solve => &[Discretize, Barriers, Primal, Dual, Oracle],
            Command::Verify => &[Discretize, Barriers, Primal, Dual, Oracle, Verify],
            Command::All => &[Checks, Discretize, Barriers, Primal, Dual, Oracle, Verify],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub status: StageStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primal: Option<SolveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual: Option<SolveReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub a: String,
    pub b: String,
    pub max_abs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum UniquenessStatus {
    Agreement,
    Disagreement,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniquenessRecord {
    pub status: UniquenessStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_discrepancy: Option<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionRecord {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: String,
    pub command: Command,
    pub config: RunConfig,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub ignored_keys: Vec<String>,
    pub stages: Vec<StageRecord>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<CheckReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barriers: Option<BarrierPair>,
    pub solves: SolveSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub discrepancies: Vec<Discrepancy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uniqueness: Option<UniquenessRecord>,
    pub assertions: Vec<AssertionRecord>,
}

impl RunReport {
    pub fn stage(&self, stage: Stage) -> Option<&StageRecord> {
        self.stages.iter().find(|r| r.stage == stage)
    }

    pub fn check(&self, condition: Condition) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.condition == condition)
    }

    pub fn all_assertions_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// The report plus the fields it refers to.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub grid: Option<Grid>,
    pub barriers: Option<BarrierPair>,
    pub solution: Option<VectorGridFunction>,
    pub dual_solution: Option<VectorGridFunction>,
    pub oracle_solution: Option<VectorGridFunction>,
}

impl RunOutcome {
    /// 0 when every requested assertion passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.report.all_assertions_passed() {
            0
        } else {
            1
        }
    }
}

struct Recorder<'a> {
    requested: &'a [Stage],
    stages: Vec<StageRecord>,
}

impl Recorder<'_> {
    fn wants(&self, stage: Stage) -> bool {
        self.requested.contains(&stage)
    }

    fn push(&mut self, stage: Stage, status: StageStatus, reason: Option<String>) {
        if self.wants(stage) {
            self.stages.push(StageRecord { stage, status, reason });
        }
    }

    /// Runs `f` if the stage is requested and its prerequisite is available.
    fn run<T, P>(&mut self, stage: Stage, pre: Option<P>, missing: &str, f: impl FnOnce(P) -> Result<T>) -> Option<T> {
        if !self.wants(stage) {
            return None;
        }
        let Some(pre) = pre else {
            self.push(stage, StageStatus::Skipped, Some(missing.to_string()));
            return None;
        };
        match f(pre) {
            Ok(v) => {
                self.push(stage, StageStatus::Ok, None);
                Some(v)
            }
            Err(e) => {
                self.push(stage, StageStatus::Failed, Some(e.to_string()));
                None
            }
        }
    }

    fn status(&self, stage: Stage) -> Option<StageStatus> {
        self.stages.iter().find(|r| r.stage == stage).map(|r| r.status)
    }
}

fn load_barriers(system: &DiscreteSystem, source: &BarrierSource, tol: f64) -> Result<BarrierPair> {
    match source {
        BarrierSource::Auto => build_barriers(system, tol),
        BarrierSource::Constant { z, w } => {
            let z = system.constant_function(z)?;
            let w = system.constant_function(w)?;
            BarrierPair::verify(system, z, w, tol)
        }
        BarrierSource::Files { z, w } => {
            let read = |p: &Path| -> Result<VectorGridFunction> {
                let text = fs::read_to_string(p)?;
                VectorGridFunction::from_csv(system.grid(), system.partition(), &text)
            };
            BarrierPair::verify(system, read(z)?, read(w)?, tol)
        }
    }
}

fn uniqueness_record(cfg: &RunConfig, checks: &[CheckReport], primal: Option<&VectorGridFunction>, dual: Option<&VectorGridFunction>) -> UniquenessRecord {
    let tolerance = cfg.tolerances.uniqueness;
    let skipped = |reason: &str| UniquenessRecord {
        status: UniquenessStatus::Skipped,
        reason: Some(reason.to_string()),
        max_discrepancy: None,
        tolerance,
    };
    let find = |c: Condition| checks.iter().find(|r| r.condition == c);
    for (cond, label) in [(Condition::CondIPrime, "condition i'"), (Condition::CondIi, "condition ii")] {
        match find(cond) {
            None => return skipped(&format!("{label} not checked")),
            Some(r) if !r.passed => return skipped(&format!("{label} failed")),
            Some(_) => {}
        }
    }
    let (Some(p), Some(d)) = (primal, dual) else {
        return skipped("primal or dual solution unavailable");
    };
    let diff = p.max_abs_diff(d);
    UniquenessRecord {
        status: if diff <= tolerance {
            UniquenessStatus::Agreement
        } else {
            UniquenessStatus::Disagreement
        },
        reason: None,
        max_discrepancy: Some(diff),
        tolerance,
    }
}

/// Executes the stages selected by `command`. Never fails: stage errors are
/// recorded in the report.
pub fn run_pipeline(cfg: &RunConfig, command: Command) -> RunOutcome {
    let mut rec = Recorder {
        requested: command.stages(),
        stages: Vec::new(),
    };
    let setup = cfg.build_operator().and_then(|spec| Ok((spec, cfg.build_grid()?)));
    let setup_reason = match &setup {
        Ok(_) => String::new(),
        Err(e) => format!("invalid configuration: {e}"),
    };
    let (spec, grid) = match setup {
        Ok((s, g)) => (Some(s), Some(g)),
        Err(_) => (None, None),
    };

    let mut checks = Vec::new();
    if rec.wants(Stage::Checks) && spec.is_some() && cfg.checks.is_empty() {
        rec.push(Stage::Checks, StageStatus::Skipped, Some("no checks requested".into()));
    } else if let Some(found) = rec.run(Stage::Checks, spec.as_ref(), &setup_reason, |spec| {
        run_checks(spec, &cfg.sampler_config(), &cfg.checks)
    }) {
        checks = found;
    }

    let system = rec.run(Stage::Discretize, spec.as_ref().zip(grid.as_ref()), &setup_reason, |(s, g)| discretize(s, g));
    let barriers = rec.run(Stage::Barriers, system.as_ref(), "discretize stage unavailable", |sys| {
        load_barriers(sys, &cfg.barriers, cfg.tolerances.barrier)
    });
    let both = system.as_ref().zip(barriers.as_ref());
    let primal = rec.run(Stage::Primal, both, "barriers unavailable", |(sys, b)| perron_solve(sys, b, &cfg.solver));
    let dual = rec.run(Stage::Dual, both, "barriers unavailable", |(sys, b)| perron_solve_dual(sys, b, &cfg.solver));
    let oracle = if rec.wants(Stage::Oracle) && !cfg.oracle.enabled {
        rec.push(Stage::Oracle, StageStatus::Skipped, Some("oracle disabled".into()));
        None
    } else {
        rec.run(Stage::Oracle, both, "barriers unavailable", |(sys, b)| {
            let step = cfg.oracle.step_fraction * stable_step(sys);
            pseudo_time_oracle(sys, &b.z, step, cfg.solver.tol, cfg.oracle.max_steps)
        })
    };

    let mut discrepancies = Vec::new();
    let mut uniqueness = None;
    let classification = rec.run(
        Stage::Verify,
        system.as_ref().zip(primal.as_ref()),
        "primal solution unavailable",
        |(sys, p)| {
            let fields = [
                ("primal", Some(&p.solution)),
                ("dual", dual.as_ref().map(|d| &d.solution)),
                ("oracle", oracle.as_ref().map(|o| &o.solution)),
            ];
            for (i, (na, a)) in fields.iter().enumerate() {
                for (nb, b) in &fields[i + 1..] {
                    if let (Some(a), Some(b)) = (a, b) {
                        discrepancies.push(Discrepancy {
                            a: na.to_string(),
                            b: nb.to_string(),
                            max_abs: a.max_abs_diff(b),
                        });
                    }
                }
            }
            uniqueness = Some(uniqueness_record(cfg, &checks, Some(&p.solution), dual.as_ref().map(|d| &d.solution)));
            classify(sys, &p.solution, cfg.tolerances.classification)
        },
    );

    let mut assertions = Vec::new();
    let mut assert = |name: &str, passed: bool, detail: String| {
        assertions.push(AssertionRecord {
            name: name.into(),
            passed,
            detail,
        })
    };
    let failed: Vec<String> = rec
        .stages
        .iter()
        .filter(|r| r.status == StageStatus::Failed)
        .map(|r| format!("{:?}", r.stage).to_lowercase())
        .collect();
    assert(
        "stages",
        failed.is_empty(),
        if failed.is_empty() {
            "no stage failed".into()
        } else {
            format!("failed stages: {}", failed.join(", "))
        },
    );
    if rec.wants(Stage::Checks) && (cfg.assertions.checks || command == Command::Check) {
        let bad: Vec<String> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| serde_json::to_value(c.condition).map(|v| v.as_str().unwrap_or_default().to_string()).unwrap_or_default())
            .collect();
        let ran = rec.status(Stage::Checks) != Some(StageStatus::Failed);
        assert(
            "checks",
            ran && bad.is_empty(),
            if bad.is_empty() {
                format!("{} checks passed", checks.len())
            } else {
                format!("failed: {}", bad.join(", "))
            },
        );
    }
    if rec.wants(Stage::Barriers) && cfg.assertions.barriers {
        let ok = barriers.as_ref().is_some_and(|b| b.ordering_verified);
        assert(
            "barriers",
            ok,
            if ok {
                "z super-sub, w sub-super, ordered".into()
            } else {
                "barriers unavailable or unverified".into()
            },
        );
    }
    if cfg.assertions.converged && (rec.wants(Stage::Primal) || rec.wants(Stage::Dual) || rec.wants(Stage::Oracle)) {
        let mut detail = Vec::new();
        let mut ok = true;
        for (name, stage, conv) in [
            ("primal", Stage::Primal, primal.as_ref().map(|o| o.report.converged)),
            ("dual", Stage::Dual, dual.as_ref().map(|o| o.report.converged)),
            ("oracle", Stage::Oracle, oracle.as_ref().map(|o| o.report.converged)),
        ] {
            if !rec.wants(stage) || (stage == Stage::Oracle && !cfg.oracle.enabled) {
                continue;
            }
            let c = conv.unwrap_or(false);
            ok &= c;
            detail.push(format!("{name}: {}", if c { "converged" } else { "not converged" }));
        }
        assert("converged", ok, detail.join(", "));
    }
    if rec.wants(Stage::Verify) && cfg.assertions.solution {
        let verdict = classification.as_ref().map(|c| c.verdict);
        assert(
            "solution",
            verdict == Some(Verdict::Solution),
            match verdict {
                Some(v) => format!("classified as {v}"),
                None => "no classification".into(),
            },
        );
    }
    if rec.wants(Stage::Verify) && cfg.assertions.uniqueness {
        let (ok, detail) = match &uniqueness {
            Some(u) if u.status == UniquenessStatus::Agreement => (true, format!("primal/dual agree within {}", u.tolerance)),
            Some(u) if u.status == UniquenessStatus::Disagreement => (
                false,
                format!("primal/dual differ by {:?}", u.max_discrepancy.unwrap_or(f64::NAN)),
            ),
            Some(u) => (false, format!("skipped: {}", u.reason.clone().unwrap_or_default())),
            None => (false, "verify stage did not run".into()),
        };
        assert("uniqueness", ok, detail);
    }

    let report = RunReport {
        version: VERSION.to_string(),
        command,
        config: cfg.clone(),
        ignored_keys: cfg.ignored_keys.clone(),
        stages: rec.stages,
        checks,
        barriers: barriers.clone(),
        solves: SolveSection {
            primal: primal.as_ref().map(|o| o.report.clone()),
            dual: dual.as_ref().map(|o| o.report.clone()),
            oracle: oracle.as_ref().map(|o| o.report.clone()),
        },
        classification,
        discrepancies,
        uniqueness,
        assertions,
    };
    RunOutcome {
        report,
        grid,
        barriers,
        solution: primal.map(|o| o.solution),
        dual_solution: dual.map(|o| o.solution),
        oracle_solution: oracle.map(|o| o.solution),
    }
}

/// Writes `report.json` and the available field CSVs into `dir`.
pub fn emit(outcome: &RunOutcome, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("report.json");
    fs::write(&path, outcome.report.to_json()?)?;
    written.push(path);
    if let Some(grid) = &outcome.grid {
        let mut fields = Vec::new();
        if let Some(b) = &outcome.barriers {
            fields.push(("barrier_z.csv", &b.z));
            fields.push(("barrier_w.csv", &b.w));
        }
        if let Some(u) = &outcome.solution {
            fields.push(("solution.csv", u));
        }
        for (name, u) in fields {
            let path = dir.join(name);
            fs::write(&path, u.to_csv(grid))?;
            written.push(path);
        }
    }
    Ok(written)
}
