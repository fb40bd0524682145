//! Config-driven experiments: a TOML file describes one problem and scheme,
//! a run writes a per-step CSV trace and a one-line TSV summary.
//!
//! ```toml
//! id = "p1"
//! scheme = "proximal_point"      # or "halpern_generic", "halpern_mann"
//! seed = 7
//! anchor = { random = "normal", scale = 2.0 }
//! start = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
//!
//! [space]
//! dim = 10
//! p = 3.0
//!
//! [operator]
//! kind = "gradient_of_quadratic"
//! q_diag = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
//! c = { random = "uniform", scale = 1.0 }
//!
//! [schedules]
//! alpha = { kind = "power", scale = 1.0, exponent = 1.0 }
//! r = { kind = "constant", value = 1.0 }
//!
//! [budget]
//! max_iter = 100000
//! stop_tol = 1e-3
//! ```
//!
//! Random vectors are drawn from a ChaCha8 generator seeded with `seed`, one
//! stream per vector, so every vector is reproducible on its own. A random
//! start point is projected (Euclidean) onto the constraint set.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Deserialize;

use crate::driver::{
    run_halpern, run_halpern_mann, run_proximal_point, FaultInjection, HalpernConfig, IterationTrace, RunStatus,
    StopRule,
};
use crate::error::{Error, Result};
use crate::geometry::{LpSpace, PrimalVector};
use crate::mappings::{Mapping, MappingSequence};
use crate::operators::MonotoneOperator;
use crate::schedule::Schedule;
use crate::sequences::{fuzz_certificates, verify_example_claims, verify_example_claims_for, xu_recursion};
use crate::sets::ConvexSet;
use crate::tolerances::{MAX_ITER, MEMBERSHIP_TOL, STOP_TOL};

/// First line of every trace file.
pub const TRACE_HEADER: &str = "# halpern-trace v1";
pub const TRACE_COLUMNS: [&str; 8] = [
    "n",
    "alpha_n",
    "phi_w_xn",
    "res_fixed_point",
    "res_y_minus_Sx",
    "slack_b",
    "slack_c",
    "inner_iters",
];
pub const SUMMARY_COLUMNS: [&str; 9] = [
    "id",
    "status",
    "iterations",
    "final_error",
    "final_phi",
    "min_slack",
    "wall_clock_s",
    "seed",
    "exit_code",
];

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MAX_ITER: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;
pub const EXIT_INNER: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    HalpernGeneric,
    ProximalPoint,
    HalpernMann,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dim: usize,
    pub p: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomKind {
    /// `offset + scale * U(-1, 1)` per coordinate.
    Uniform,
    /// `offset + scale * N(0, 1)` per coordinate.
    Normal,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomVector {
    pub random: RandomKind,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Literal(Vec<f64>),
    Random(RandomVector),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// `A x = Q x - c`; give either `q` (rows) or `q_diag`.
    GradientOfQuadratic {
        q: Option<Vec<Vec<f64>>>,
        q_diag: Option<Vec<f64>>,
        c: VectorSpec,
    },
    /// `A x = M x + b`.
    LinearMonotone { m: Vec<Vec<f64>>, b: VectorSpec },
    /// `A x = J x - J z`.
    DualityResidual { z: VectorSpec },
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    #[default]
    WholeSpace,
    /// `<a, x> <= b`.
    HalfSpace {
        a: Vec<f64>,
        b: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Affine {
        origin: Vec<f64>,
        directions: Vec<Vec<f64>>,
    },
    Point {
        origin: Vec<f64>,
    },
}

/// The mapping `T` blended by `halpern_mann`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MappingSpec {
    /// Resolvent `L_r` of the `[operator]`.
    Resolvent {
        r: f64,
    },
    Projection {
        set: SetSpec,
    },
    Identity,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpecs {
    #[serde(default = "Schedule::harmonic")]
    pub alpha: Schedule,
    pub r: Option<Schedule>,
    pub beta: Option<Schedule>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRuleSpec {
    #[default]
    Reference,
    FixedPointResidual,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSpec {
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default)]
    pub stop_rule: StopRuleSpec,
}

fn default_max_iter() -> usize {
    MAX_ITER
}

fn default_stop_tol() -> f64 {
    STOP_TOL
}

impl Default for BudgetSpec {
    fn default() -> Self {
        Self {
            max_iter: MAX_ITER,
            stop_tol: STOP_TOL,
            stop_rule: StopRuleSpec::Reference,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<PathBuf>,
}

/// Fault injection for testing the monitors.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestingSpec {
    /// Multiplies `J S_n x_n` by this factor inside every step.
    pub scale_dual_map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub scheme: SchemeKind,
    #[serde(default)]
    pub seed: u64,
    pub anchor: VectorSpec,
    pub start: VectorSpec,
    pub space: SpaceSpec,
    pub operator: Option<OperatorSpec>,
    pub mapping: Option<MappingSpec>,
    #[serde(default)]
    pub constraint: SetSpec,
    pub schedules: ScheduleSpecs,
    #[serde(default)]
    pub budget: BudgetSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub testing: TestingSpec,
}

/// Command-line overrides applied on top of a config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Default output directory when neither the config nor `--out` sets one.
pub const DEFAULT_OUTPUT_DIR: &str = "results";

// Stream ids of the seeded vectors.
const STREAM_C: u64 = 1;
const STREAM_B: u64 = 2;
const STREAM_Z: u64 = 3;
const STREAM_ANCHOR: u64 = 4;
const STREAM_START: u64 = 5;

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads and parses a config file. Parse errors carry line information.
    pub fn parse(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn draw(&self, spec: &VectorSpec, dim: usize, stream: u64) -> Vec<f64> {
        match spec {
            VectorSpec::Literal(v) => v.clone(),
            VectorSpec::Random(r) => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(stream);
                (0..dim)
                    .map(|_| {
                        let e: f64 = match r.random {
                            RandomKind::Uniform => rng.random_range(-1.0..1.0),
                            RandomKind::Normal => StandardNormal.sample(&mut rng),
                        };
                        r.offset + r.scale * e
                    })
                    .collect()
            }
        }
    }

    /// Checks every hypothesis and builds the problem. All violations are
    /// reported together.
    pub fn build(&self, overrides: &Overrides) -> Result<Experiment> {
        let mut cfg = self.clone();
        if let Some(seed) = overrides.seed {
            cfg.seed = seed;
        }
        let output_dir = overrides
            .out
            .clone()
            .or_else(|| cfg.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        let halpern = cfg.build_halpern()?;
        Ok(Experiment {
            config: cfg,
            halpern,
            output_dir,
        })
    }

    fn build_halpern(&self) -> Result<HalpernConfig> {
        let mut issues = Vec::new();
        if self.id.is_empty() || self.id.contains(['/', '\\', '\t', '\n']) {
            issues.push(format!("id {:?} must be a nonempty plain file name", self.id));
        }

        let s = &self.schedules;
        issues.extend(s.alpha.check_anchor_weights());
        if let Some(r) = &s.r {
            issues.extend(r.check_resolvent_parameters());
        }
        if let Some(b) = &s.beta {
            issues.extend(b.check_blend_weights());
        }
        let b = &self.budget;
        if !(b.stop_tol > 0.0 && b.stop_tol.is_finite()) {
            issues.push(format!("budget: stop_tol = {} must be positive", b.stop_tol));
        }
        if let Some(f) = self.testing.scale_dual_map {
            if !(f.is_finite() && f > 0.0) {
                issues.push(format!("testing: scale_dual_map = {f} must be positive"));
            }
        }

        let uses_resolvents = match self.scheme {
            SchemeKind::ProximalPoint => {
                if s.r.is_none() {
                    issues.push("proximal_point: schedules.r is required".into());
                }
                if s.beta.is_some() || self.mapping.is_some() {
                    issues.push("proximal_point: schedules.beta and [mapping] do not apply".into());
                }
                if self.constraint != SetSpec::WholeSpace {
                    issues.push("proximal_point: constraint must be whole_space".into());
                }
                true
            }
            SchemeKind::HalpernMann => {
                if s.beta.is_none() || self.mapping.is_none() {
                    issues.push("halpern_mann: schedules.beta and [mapping] are required".into());
                }
                if s.r.is_some() {
                    issues.push("halpern_mann: schedules.r does not apply".into());
                }
                false
            }
            SchemeKind::HalpernGeneric => match (&s.r, &s.beta) {
                (Some(_), None) => true,
                (None, Some(_)) => {
                    if self.mapping.is_none() {
                        issues.push("halpern_generic: a blend sequence needs [mapping]".into());
                    }
                    false
                }
                _ => {
                    issues.push("halpern_generic: give exactly one of schedules.r or schedules.beta".into());
                    false
                }
            },
        };
        let needs_operator = uses_resolvents || matches!(self.mapping, Some(MappingSpec::Resolvent { .. }));
        if needs_operator && self.operator.is_none() {
            issues.push("[operator] is required for resolvent mappings".into());
        }

        let space = match LpSpace::new(self.space.dim, self.space.p) {
            Ok(sp) => sp,
            Err(e) => {
                issues.push(format!("space: {e}"));
                return Err(Error::Hypothesis(issues));
            }
        };
        let dim = space.dim();
        let vector = |name: &str, spec: &VectorSpec, stream: u64, issues: &mut Vec<String>| {
            let v = self.draw(spec, dim, stream);
            match space.primal(v) {
                Ok(p) => Some(p),
                Err(e) => {
                    issues.push(format!("{name}: {e}"));
                    None
                }
            }
        };

        let constraint = match build_set(&self.constraint) {
            Ok(c) => Some(c),
            Err(e) => {
                issues.push(format!("constraint: {e}"));
                None
            }
        };
        let anchor = vector("anchor", &self.anchor, STREAM_ANCHOR, &mut issues);
        let mut start = vector("start", &self.start, STREAM_START, &mut issues);
        if let (Some(c), Some(x1)) = (&constraint, &start) {
            if matches!(self.start, VectorSpec::Random(_)) {
                start = c.euclidean_project(x1).ok();
            } else if !c.contains(x1, MEMBERSHIP_TOL).unwrap_or(false) {
                issues.push("start: x_1 must lie in the constraint set".into());
            }
        }

        let operator = match &self.operator {
            None => None,
            Some(spec) => match spec {
                OperatorSpec::GradientOfQuadratic { q, q_diag, c } => {
                    let c = vector("operator.c", c, STREAM_C, &mut issues);
                    let q = match (q, q_diag) {
                        (Some(rows), None) => matrix(rows, dim)
                            .map_err(|e| issues.push(format!("operator.q: {e}")))
                            .ok(),
                        (None, Some(d)) if d.len() == dim => {
                            Some(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
                        }
                        (None, Some(d)) => {
                            issues.push(format!("operator.q_diag: expected {dim} entries, found {}", d.len()));
                            None
                        }
                        _ => {
                            issues.push("operator: give exactly one of q or q_diag".into());
                            None
                        }
                    };
                    match (q, c) {
                        (Some(q), Some(c)) => MonotoneOperator::gradient_of_quadratic(q, c.into_coords())
                            .map_err(|e| issues.push(format!("operator: {e}")))
                            .ok(),
                        _ => None,
                    }
                }
                OperatorSpec::LinearMonotone { m, b } => {
                    let b = vector("operator.b", b, STREAM_B, &mut issues);
                    let m = matrix(m, dim).map_err(|e| issues.push(format!("operator.m: {e}"))).ok();
                    match (m, b) {
                        (Some(m), Some(b)) => MonotoneOperator::linear(m, b.into_coords())
                            .map_err(|e| issues.push(format!("operator: {e}")))
                            .ok(),
                        _ => None,
                    }
                }
                OperatorSpec::DualityResidual { z } => {
                    vector("operator.z", z, STREAM_Z, &mut issues).map(MonotoneOperator::duality_residual)
                }
            },
        };

        let base = match &self.mapping {
            None => None,
            Some(MappingSpec::Identity) => Some(Mapping::identity()),
            Some(MappingSpec::Projection { set }) => build_set(set)
                .and_then(Mapping::projection)
                .map_err(|e| issues.push(format!("mapping: {e}")))
                .ok(),
            Some(MappingSpec::Resolvent { r }) => operator.clone().and_then(|op| {
                Mapping::resolvent(op, *r)
                    .map_err(|e| issues.push(format!("mapping: {e}")))
                    .ok()
            }),
        };

        if !issues.is_empty() {
            return Err(Error::Hypothesis(issues));
        }
        let sequence = if uses_resolvents {
            MappingSequence::resolvent(operator.expect("checked"), s.r.clone().expect("checked"))?
        } else {
            MappingSequence::blend(base.expect("checked"), s.beta.clone().expect("checked"))?
        };
        let stop_rule = match b.stop_rule {
            StopRuleSpec::Reference => StopRule::Reference,
            StopRuleSpec::FixedPointResidual => StopRule::FixedPointResidual,
        };
        Ok(HalpernConfig::new(
            anchor.expect("checked"),
            start.expect("checked"),
            constraint.expect("checked"),
            sequence,
            s.alpha.clone(),
        )?
        .with_budget(b.max_iter, b.stop_tol)?
        .with_stop_rule(stop_rule)
        .with_fault(self.testing.scale_dual_map.map(FaultInjection::ScaleDualMap)))
    }
}

fn matrix(rows: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidParameter(format!("expected a {dim}x{dim} matrix")));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

fn build_set(spec: &SetSpec) -> Result<ConvexSet> {
    match spec {
        SetSpec::WholeSpace => Ok(ConvexSet::WholeSpace),
        SetSpec::HalfSpace { a, b } => ConvexSet::half_space(a.clone(), *b),
        SetSpec::Box { lo, hi } => ConvexSet::boxed(lo.clone(), hi.clone()),
        SetSpec::Ball { center, radius } => ConvexSet::ball(center.clone(), *radius),
        SetSpec::Affine { origin, directions } => ConvexSet::affine(origin.clone(), directions),
        SetSpec::Point { origin } => ConvexSet::point(origin.clone()),
    }
}

/// A validated experiment, ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    config: ExperimentConfig,
    halpern: HalpernConfig,
    output_dir: PathBuf,
}

impl Experiment {
    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn halpern(&self) -> &HalpernConfig {
        &self.halpern
    }

    pub fn output_dir(&self) -> &Path {
        &self.output_dir
    }

    pub fn trace_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.csv", self.config.id))
    }

    pub fn summary_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.summary.tsv", self.config.id))
    }

    /// Final iterate and reference point, one coordinate per row.
    pub fn vectors_path(&self) -> PathBuf {
        self.output_dir.join(format!("{}.vectors.csv", self.config.id))
    }
}

/// Parses and validates a config file.
pub fn load_experiment(path: &Path, overrides: &Overrides) -> Result<Experiment> {
    ExperimentConfig::parse(path)?.build(overrides)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub id: String,
    pub status: String,
    pub iterations: usize,
    pub final_error: f64,
    pub final_phi: f64,
    pub min_slack: f64,
    pub wall_clock: Duration,
    pub seed: u64,
    pub exit_code: i32,
}

impl RunSummary {
    fn record(&self) -> [String; 9] {
        [
            self.id.clone(),
            self.status.clone(),
            self.iterations.to_string(),
            format!("{:e}", self.final_error),
            format!("{:e}", self.final_phi),
            format!("{:e}", self.min_slack),
            format!("{:.3}", self.wall_clock.as_secs_f64()),
            self.seed.to_string(),
            self.exit_code.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub summary: RunSummary,
    pub trace: IterationTrace,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        self.summary.exit_code
    }
}

/// Invariant violations take priority over solver failures and budget
/// exhaustion.
pub fn exit_code_for_trace(trace: &IterationTrace) -> i32 {
    if trace.invariant_violations() > 0 {
        EXIT_INVARIANT
    } else {
        match trace.status {
            RunStatus::Converged => EXIT_OK,
            RunStatus::MaxIter => EXIT_MAX_ITER,
            RunStatus::InnerSolverFailure(_) => EXIT_INNER,
        }
    }
}

/// Exit code for an error raised before or around a run.
pub fn exit_code_for_error(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::InnerSolver(_) => EXIT_INNER,
        _ => EXIT_CONFIG,
    }
}

fn status_label(status: &RunStatus) -> &'static str {
    match status {
        RunStatus::Converged => "converged",
        RunStatus::MaxIter => "max_iter",
        RunStatus::InnerSolverFailure(_) => "inner_solver_failure",
    }
}

/// Runs the experiment and writes its trace, vectors and summary files.
pub fn run_experiment(exp: &Experiment) -> Result<RunOutcome> {
    let t0 = Instant::now();
    let cfg = &exp.halpern;
    let trace = match exp.config.scheme {
        SchemeKind::ProximalPoint => run_proximal_point(cfg)?,
        SchemeKind::HalpernMann => run_halpern_mann(cfg)?,
        SchemeKind::HalpernGeneric => run_halpern(cfg),
    };
    let wall_clock = t0.elapsed();
    let summary = RunSummary {
        id: exp.config.id.clone(),
        status: status_label(&trace.status).to_string(),
        iterations: trace.iterations(),
        final_error: trace.final_error,
        final_phi: trace.final_phi,
        min_slack: trace.min_slack(),
        wall_clock,
        seed: exp.config.seed,
        exit_code: exit_code_for_trace(&trace),
    };
    fs::create_dir_all(&exp.output_dir).map_err(|e| io_error(&exp.output_dir, e))?;
    write_trace(&exp.trace_path(), &trace)?;
    write_vectors(&exp.vectors_path(), &trace.final_iterate, &trace.reference)?;
    write_summaries(&exp.summary_path(), std::slice::from_ref(&summary))?;
    Ok(RunOutcome { summary, trace })
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<fs::File> {
    fs::File::create(path).map_err(|e| io_error(path, e))
}

/// Writes the per-step CSV. Floats use the shortest round-trip form, so
/// equal traces give byte-identical files.
pub fn write_trace(path: &Path, trace: &IterationTrace) -> Result<()> {
    let mut file = create(path)?;
    writeln!(file, "{TRACE_HEADER}").map_err(|e| io_error(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(TRACE_COLUMNS).map_err(|e| io_error(path, e))?;
    for r in &trace.rows {
        w.write_record([
            r.n.to_string(),
            format!("{:e}", r.alpha),
            format!("{:e}", r.phi_w_x),
            format!("{:e}", r.res_fixed_point),
            format!("{:e}", r.res_y_minus_sx),
            format!("{:e}", r.slack_b),
            format!("{:e}", r.slack_c),
            r.inner_iterations.to_string(),
        ])
        .map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

fn write_vectors(path: &Path, x: &PrimalVector, w: &PrimalVector) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record(["i", "x_final", "reference"])
        .map_err(|e| io_error(path, e))?;
    for (i, (a, b)) in x.coords().iter().zip(w.coords()).enumerate() {
        out.write_record([i.to_string(), format!("{a:e}"), format!("{b:e}")])
            .map_err(|e| io_error(path, e))?;
    }
    out.flush().map_err(|e| io_error(path, e))
}

/// Tab-separated summary table with a header row.
pub fn write_summaries(path: &Path, rows: &[RunSummary]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(create(path)?);
    w.write_record(SUMMARY_COLUMNS).map_err(|e| io_error(path, e))?;
    for r in rows {
        w.write_record(r.record()).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

/// Reads back a trace written by [`write_trace`].
pub fn read_trace(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let body = text
        .strip_prefix(TRACE_HEADER)
        .ok_or_else(|| Error::Config(format!("{}: missing trace header", path.display())))?;
    let mut r = csv::Reader::from_reader(body.trim_start().as_bytes());
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| io_error(path, e))?;
            rec.iter()
                .map(|f| f.parse::<f64>().map_err(|e| io_error(path, e)))
                .collect()
        })
        .collect()
}

/// Runs one config file; errors become a row with the matching exit code.
pub fn run_path(path: &Path, overrides: &Overrides) -> SuiteRow {
    let fallback_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    match load_experiment(path, overrides).and_then(|exp| run_experiment(&exp)) {
        Ok(outcome) => SuiteRow {
            id: outcome.summary.id.clone(),
            path: path.to_path_buf(),
            exit_code: outcome.summary.exit_code,
            summary: Some(outcome.summary),
            error: None,
        },
        Err(e) => SuiteRow {
            id: fallback_id,
            path: path.to_path_buf(),
            exit_code: exit_code_for_error(&e),
            summary: None,
            error: Some(e.to_string()),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteRow {
    pub id: String,
    pub path: PathBuf,
    pub exit_code: i32,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    /// Sorted by experiment id.
    pub rows: Vec<SuiteRow>,
}

impl SuiteReport {
    /// The largest exit code of any run, 0 for an empty suite.
    pub fn exit_code(&self) -> i32 {
        self.rows.iter().map(|r| r.exit_code).max().unwrap_or(EXIT_OK)
    }

    /// Summary table, one tab-separated line per run, header first.
    pub fn to_tsv(&self) -> String {
        let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
        w.write_record(SUMMARY_COLUMNS).expect("in-memory write");
        for r in &self.rows {
            let record = match &r.summary {
                Some(s) => s.record(),
                None => {
                    let mut rec: [String; 9] = Default::default();
                    rec[0] = r.id.clone();
                    rec[1] = if r.exit_code == EXIT_IO { "io_error" } else { "error" }.to_string();
                    rec[8] = r.exit_code.to_string();
                    rec
                }
            };
            w.write_record(record).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8")
    }
}

/// Every `*.toml` file directly inside `dir`, sorted by name.
pub fn suite_configs(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == "toml"))
        .collect();
    paths.sort();
    Ok(paths)
}

/// Runs all configs in `dir` with at most `parallelism` runs at a time.
pub fn run_suite(dir: &Path, parallelism: usize, overrides: &Overrides) -> Result<SuiteReport> {
    let paths = suite_configs(dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let mut rows: Vec<SuiteRow> = pool.install(|| paths.par_iter().map(|p| run_path(p, overrides)).collect());
    rows.sort_by(|a, b| a.id.cmp(&b.id).then_with(|| a.path.cmp(&b.path)));
    Ok(SuiteReport { rows })
}

/// One line of the `verify-lemmas` report.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Finite checks of the sequence lemmas: the example claims up to `n_max`,
/// `fuzz` random certificate trials each way, and the recursion orbit.
pub fn verify_lemmas(n_max: usize, fuzz: usize, seed: u64) -> Result<Vec<LemmaCheck>> {
    let mut checks = Vec::new();

    let t = Instant::now();
    let r = verify_example_claims(n_max)?;
    checks.push(LemmaCheck {
        name: "example claims".into(),
        passed: r.confirmed() && r.rises_only_at_odd,
        detail: format!(
            "N = {n_max}: rising subsequence {}, rises only at odd m {}, no dominating subsequence {} ({:.3}s)",
            r.claim_rising_subsequence,
            r.rises_only_at_odd,
            r.claim_no_dominating_subsequence,
            t.elapsed().as_secs_f64()
        ),
    });

    let tampered = verify_example_claims_for(|n| if n % 2 == 1 { 0.0 } else { 1.0 }, n_max.min(100))?;
    checks.push(LemmaCheck {
        name: "tampered sequence detected".into(),
        passed: !tampered.claim_no_dominating_subsequence,
        detail: format!("witness {:?}", tampered.witness),
    });

    let t = Instant::now();
    let f = fuzz_certificates(fuzz, 200, seed);
    checks.push(LemmaCheck {
        name: "tau certificates".into(),
        passed: f.passed(),
        detail: format!(
            "oscillating {}/{} certified, monotone {}/{} rejected, false certificates {} ({:.3}s)",
            f.oscillating_certified,
            f.oscillating,
            f.monotone_rejected,
            f.monotone,
            f.false_certificates,
            t.elapsed().as_secs_f64()
        ),
    });

    let n = 100_000;
    let orbit = xu_recursion(1.0, &Schedule::power(1.0, 0.5), &Schedule::harmonic(), n)?;
    let last = orbit.get(n);
    checks.push(LemmaCheck {
        name: "recursion orbit".into(),
        passed: last <= 1e-3,
        detail: format!("alpha_n = n^-1/2, gamma_n = 1/n: xi_{n} = {last:e}"),
    });
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROXIMAL: &str = r#"
id = "tiny"
scheme = "proximal_point"
seed = 3
anchor = [3.0, 3.0]
start = { random = "uniform", scale = 2.0 }

[space]
dim = 2
p = 3.0

[operator]
kind = "gradient_of_quadratic"
q_diag = [1.0, 1.0]
c = [1.0, -2.0]

[schedules]
r = { kind = "constant", value = 1.0 }

[budget]
max_iter = 100000
stop_tol = 1e-3
"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::from_toml(PROXIMAL).unwrap();
        assert_eq!(cfg.scheme, SchemeKind::ProximalPoint);
        assert_eq!(cfg.schedules.alpha, Schedule::harmonic());
        let exp = cfg.build(&Overrides::default()).unwrap();
        assert_eq!(exp.halpern().reference().coords(), &[1.0, -2.0]);
        assert_eq!(exp.output_dir(), Path::new(DEFAULT_OUTPUT_DIR));
    }

    #[test]
    fn random_vectors_are_seeded() {
        let cfg = ExperimentConfig::from_toml(PROXIMAL).unwrap();
        let a = cfg.build(&Overrides::default()).unwrap();
        let b = cfg.build(&Overrides::default()).unwrap();
        assert_eq!(a.halpern().start(), b.halpern().start());
        let c = cfg
            .build(&Overrides {
                seed: Some(4),
                out: None,
            })
            .unwrap();
        assert_ne!(a.halpern().start(), c.halpern().start());
        assert_eq!(c.config().seed, 4);
    }

    #[test]
    fn reports_every_violation() {
        let text = PROXIMAL
            .replace("r = { kind = \"constant\", value = 1.0 }", "r = { kind = \"power\", scale = 1.0, exponent = 1.0 }\nalpha = { kind = \"constant\", value = 0.5 }\nbeta = { kind = \"power\", scale = -0.5, exponent = 1.0, offset = 1.0 }");
        let e = ExperimentConfig::from_toml(&text)
            .unwrap()
            .build(&Overrides::default())
            .unwrap_err();
        let msg = e.to_string();
        for needle in ["alpha_n -> 0", "inf r_n > 0", "limsup beta_n < 1", "do not apply"] {
            assert!(msg.contains(needle), "{needle} missing from {msg}");
        }
    }

    #[test]
    fn rejects_exponent_out_of_range() {
        let text = PROXIMAL.replace("p = 3.0", "p = 1.0");
        let e = ExperimentConfig::from_toml(&text)
            .unwrap()
            .build(&Overrides::default())
            .unwrap_err();
        assert!(e.to_string().contains("exponent"), "{e}");
    }

    #[test]
    fn parse_errors_carry_lines() {
        let e = ExperimentConfig::from_toml("id = \"x\"\nscheme = 3\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code_for_error(&Error::Io("x".into())), EXIT_IO);
        assert_eq!(exit_code_for_error(&Error::Hypothesis(vec![])), EXIT_CONFIG);
    }

    #[test]
    fn lemma_report_passes() {
        let checks = verify_lemmas(100, 10, 1).unwrap();
        assert_eq!(checks.len(), 4);
        assert!(checks.iter().all(|c| c.passed), "{checks:?}");
    }
}
