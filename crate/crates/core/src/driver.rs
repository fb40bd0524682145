//! Halpern-type iterations
//!
//! ```text
//! x_{n+1} = Q_C J^{-1}(alpha_n J u + (1 - alpha_n) J S_n x_n)
//! ```
//!
//! with per-step monitoring of the inequalities that drive their strong
//! convergence to `w = Q_F(u)`.

use crate::error::{Error, Result};
use crate::geometry::{dual_blend, duality_map, lyapunov, pairing, DualVector, LpSpace, PrimalVector};
use crate::mappings::{BlendDiagnostics, MapOptions, MappingSequence};
use crate::schedule::Schedule;
use crate::sequences::{eventually_increasing_tau, RealSequencePrefix, TauOutcome};
use crate::sets::{ConvexSet, ProjectionOptions};
use crate::tolerances::{MAX_ITER, MEMBERSHIP_TOL, STEP_SLACK, STOP_TOL, UCFT_DIFF, UCFT_GAP};

/// When a run counts as converged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StopRule {
    /// `|x_n - w|_p <= stop_tol`.
    #[default]
    Reference,
    /// `|x_n - S_n x_n|_p <= stop_tol`, for runs where `w` is only nominal.
    FixedPointResidual,
}

/// Deliberate corruption of a step, used to check that the monitors fire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FaultInjection {
    /// Multiplies `J S_n x_n` by this factor before mixing with `J u`.
    ScaleDualMap(f64),
}

/// A validated Halpern problem.
#[derive(Debug, Clone, PartialEq)]
pub struct HalpernConfig {
    space: LpSpace,
    anchor: PrimalVector,
    start: PrimalVector,
    constraint: ConvexSet,
    sequence: MappingSequence,
    alpha: Schedule,
    max_iter: usize,
    stop_tol: f64,
    stop_rule: StopRule,
    options: MapOptions,
    fault: Option<FaultInjection>,
    reference: PrimalVector,
}

impl HalpernConfig {
    /// Validates the hypotheses and computes the reference point `w`.
    ///
    /// `w` is `Q_F(u)` for the common fixed point set `F` of the sequence,
    /// or `Q_C(u)` when every point is fixed.
    pub fn new(
        anchor: PrimalVector,
        start: PrimalVector,
        constraint: ConvexSet,
        sequence: MappingSequence,
        alpha: Schedule,
    ) -> Result<Self> {
        let space = anchor.space();
        let mut issues = alpha.check_anchor_weights();
        if start.space() != space {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: start.dim(),
            });
        }
        constraint.validate()?;
        if let Some(d) = constraint.dim() {
            if d != space.dim() {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    found: d,
                });
            }
        }
        if !constraint.contains(&start, MEMBERSHIP_TOL)? {
            issues.push("start point x_1 must lie in C".to_string());
        }
        if !issues.is_empty() {
            return Err(Error::Hypothesis(issues));
        }

        let fixed = sequence.common_fixed_points(space)?;
        let reference = match fixed {
            ConvexSet::WholeSpace => reference_solution(&constraint, &anchor)?,
            f => reference_solution(&f, &anchor)?,
        };
        if !constraint.contains(&reference, MEMBERSHIP_TOL)? {
            return Err(Error::Hypothesis(vec![
                "reference point Q_F(u) must lie in C".to_string()
            ]));
        }

        let options = MapOptions {
            projection: ProjectionOptions {
                probes: 8,
                ..ProjectionOptions::default()
            },
            ..MapOptions::default()
        };
        Ok(Self {
            space,
            anchor,
            start,
            constraint,
            sequence,
            alpha,
            max_iter: MAX_ITER,
            stop_tol: STOP_TOL,
            stop_rule: StopRule::Reference,
            options,
            fault: None,
            reference,
        })
    }

    pub fn with_budget(mut self, max_iter: usize, stop_tol: f64) -> Result<Self> {
        if !(stop_tol > 0.0 && stop_tol.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "stop_tol = {stop_tol} must be positive"
            )));
        }
        self.max_iter = max_iter;
        self.stop_tol = stop_tol;
        Ok(self)
    }

    pub fn with_stop_rule(mut self, rule: StopRule) -> Self {
        self.stop_rule = rule;
        self
    }

    pub fn with_options(mut self, options: MapOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_fault(mut self, fault: Option<FaultInjection>) -> Self {
        self.fault = fault;
        self
    }

    pub fn space(&self) -> LpSpace {
        self.space
    }

    pub fn anchor(&self) -> &PrimalVector {
        &self.anchor
    }

    pub fn start(&self) -> &PrimalVector {
        &self.start
    }

    pub fn constraint(&self) -> &ConvexSet {
        &self.constraint
    }

    pub fn sequence(&self) -> &MappingSequence {
        &self.sequence
    }

    pub fn alpha(&self) -> &Schedule {
        &self.alpha
    }

    pub fn max_iter(&self) -> usize {
        self.max_iter
    }

    pub fn stop_tol(&self) -> f64 {
        self.stop_tol
    }

    pub fn reference(&self) -> &PrimalVector {
        &self.reference
    }
}

/// `Q_F(u)` for a computable `F`.
pub fn reference_solution(f: &ConvexSet, u: &PrimalVector) -> Result<PrimalVector> {
    match f {
        ConvexSet::WholeSpace => Ok(u.clone()),
        ConvexSet::Affine { origin, basis } if basis.is_empty() => u.space().primal(origin.clone()),
        set => {
            let opts = ProjectionOptions {
                probes: 1000,
                ..ProjectionOptions::default()
            };
            let res = set.generalized_projection_with(u, &opts)?;
            if !res.converged {
                return Err(Error::InnerSolver(format!(
                    "reference projection did not converge (stationarity {:.3e}, vi residual {:.3e})",
                    res.stationarity, res.vi_residual
                )));
            }
            Ok(res.point)
        }
    }
}

/// Everything measured during one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub alpha: f64,
    pub s_x: PrimalVector,
    /// `|x_n - S_n x_n|_p`.
    pub res_fixed_point: f64,
    /// `|y_n - S_n x_n|_p`.
    pub res_y_minus_sx: f64,
    pub phi_w_x: f64,
    pub phi_w_x_next: f64,
    /// `alpha phi(w,u) + phi(w,S_n x_n) - phi(w,x_{n+1})`.
    pub slack_b: f64,
    /// `(1 - alpha) phi(w,x_n) + 2 alpha <y_n - w, Ju - Jw> - phi(w,x_{n+1})`.
    pub slack_c: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
    pub blend: Option<BlendDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub x_next: PrimalVector,
    pub y: PrimalVector,
    pub diagnostics: StepDiagnostics,
}

/// Quantities fixed for a whole run.
struct Frame {
    ju: DualVector,
    phi_w_u: f64,
    /// `Ju - Jw`.
    anchor_gap: DualVector,
}

impl Frame {
    fn new(cfg: &HalpernConfig) -> Result<Self> {
        let ju = duality_map(&cfg.anchor);
        let jw = duality_map(&cfg.reference);
        Ok(Self {
            anchor_gap: &ju - &jw,
            phi_w_u: lyapunov(&cfg.reference, &cfg.anchor)?,
            ju,
        })
    }
}

/// One step from `x = x_n`.
pub fn halpern_step(cfg: &HalpernConfig, n: usize, x: &PrimalVector) -> Result<StepOutput> {
    let frame = Frame::new(cfg)?;
    step_with(cfg, &frame, n, x, &cfg.options)
}

fn step_with(cfg: &HalpernConfig, frame: &Frame, n: usize, x: &PrimalVector, opts: &MapOptions) -> Result<StepOutput> {
    if x.space() != cfg.space {
        return Err(Error::DimensionMismatch {
            expected: cfg.space.dim(),
            found: x.dim(),
        });
    }
    let w = &cfg.reference;
    let alpha = cfg.alpha.value(n);
    let mapped = cfg.sequence.apply_indexed_with(n, x, opts)?;
    let s_x = mapped.point;
    let mut jsx = duality_map(&s_x);
    if let Some(FaultInjection::ScaleDualMap(f)) = cfg.fault {
        jsx = jsx.scale(f);
    }
    let y = dual_blend(alpha, &frame.ju, &jsx)?;
    let projected = cfg.constraint.generalized_projection_with(&y, &opts.projection)?;
    let x_next = projected.point;
    if !x_next.is_finite() {
        return Err(Error::NonFinite);
    }

    let phi_w_x = lyapunov(w, x)?;
    let phi_w_sx = lyapunov(w, &s_x)?;
    let phi_w_x_next = lyapunov(w, &x_next)?;
    let cross = pairing(&(&y - w), &frame.anchor_gap)?;
    let diagnostics = StepDiagnostics {
        alpha,
        res_fixed_point: (x - &s_x).norm(),
        res_y_minus_sx: (&y - &s_x).norm(),
        phi_w_x,
        phi_w_x_next,
        slack_b: alpha * frame.phi_w_u + phi_w_sx - phi_w_x_next,
        slack_c: (1.0 - alpha) * phi_w_x + 2.0 * alpha * cross - phi_w_x_next,
        inner_iterations: mapped.inner_iterations + projected.inner_iterations,
        inner_converged: mapped.converged && projected.converged,
        blend: mapped.blend,
        s_x,
    };
    Ok(StepOutput { x_next, y, diagnostics })
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Converged,
    MaxIter,
    InnerSolverFailure(String),
}

/// One row per performed step `x_n -> x_{n+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub alpha: f64,
    /// `phi(w, x_n)`.
    pub phi_w_x: f64,
    pub res_fixed_point: f64,
    pub res_y_minus_sx: f64,
    pub slack_b: f64,
    pub slack_c: f64,
    /// `max(phi(w,x_1), phi(w,u)) - phi(w, x_n)`.
    pub slack_bounded: f64,
    pub inner_iterations: usize,
    /// `x_n`, kept on a down-sampled subset of rows.
    pub x: Option<PrimalVector>,
    pub blend: Option<BlendDiagnostics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
    pub status: RunStatus,
    /// Index `n` of the final iterate `x_n`.
    pub final_index: usize,
    pub final_iterate: PrimalVector,
    pub reference: PrimalVector,
    /// `|x_final - w|_p`.
    pub final_error: f64,
    /// `phi(w, x_final)`.
    pub final_phi: f64,
    /// `max(phi(w,x_1), phi(w,u))`.
    pub boundedness_bound: f64,
    pub stop_tol: f64,
}

impl IterationTrace {
    /// Number of steps performed.
    pub fn iterations(&self) -> usize {
        self.final_index - 1
    }

    /// Smallest of all slacks `b`, `c` and boundedness, `+inf` without rows.
    pub fn min_slack(&self) -> f64 {
        let final_bounded = self.boundedness_bound - self.final_phi;
        self.rows
            .iter()
            .flat_map(|r| [r.slack_b, r.slack_c, r.slack_bounded])
            .fold(final_bounded, f64::min)
    }

    /// Number of slacks below `-STEP_SLACK`, including the boundedness
    /// slack of the final iterate.
    pub fn invariant_violations(&self) -> usize {
        self.rows
            .iter()
            .flat_map(|r| [r.slack_b, r.slack_c, r.slack_bounded])
            .chain([self.boundedness_bound - self.final_phi])
            .filter(|&s| !(s >= -STEP_SLACK))
            .count()
    }

    fn tail(&self, fraction: f64) -> &[TraceRow] {
        let k = ((self.rows.len() as f64 * fraction).ceil() as usize).min(self.rows.len());
        &self.rows[self.rows.len() - k..]
    }

    /// Largest `|y_n - S_n x_n|_p` over the last `fraction` of the rows.
    pub fn tail_max_y_residual(&self, fraction: f64) -> f64 {
        self.tail(fraction).iter().map(|r| r.res_y_minus_sx).fold(0.0, f64::max)
    }

    /// Whether a blend row in the last 10% has a vanishing convexity gap
    /// while `|Jx - JTx|_q` stays large.
    pub fn uc_ft_flagged(&self) -> bool {
        self.tail(0.1)
            .iter()
            .filter_map(|r| r.blend)
            .any(|b| b.convexity_gap < UCFT_GAP && b.dual_gap >= UCFT_DIFF)
    }

    /// `phi(w, x_n)` for every recorded `n`, followed by the final value.
    pub fn phi_prefix(&self) -> Result<RealSequencePrefix> {
        let mut values: Vec<f64> = self.rows.iter().map(|r| r.phi_w_x).collect();
        values.push(self.final_phi);
        RealSequencePrefix::new(values)
    }

    /// Trend of `phi(w, x_n)`: a certificate from the eventually increasing
    /// `tau` construction, plus `alpha` along `tau` on the last half.
    pub fn trend(&self, alpha: &Schedule, cauchy_tol: f64) -> Result<TrendReport> {
        let prefix = self.phi_prefix()?;
        let monotone = prefix.values().windows(2).all(|w| w[1] <= w[0]);
        let outcome = eventually_increasing_tau(&prefix, cauchy_tol)?;
        let mut alpha_along_tau_tail = 0.0;
        let mut alpha_tail_bound = 0.0;
        if let TauOutcome::Certificate(cert) = &outcome {
            let len = prefix.len();
            let start = len / 2 + 1;
            alpha_along_tau_tail = (start..=len).map(|n| alpha.value(cert.tau(n))).fold(0.0, f64::max);
            alpha_tail_bound = (cert.tau(start)..=len).map(|k| alpha.value(k)).fold(0.0, f64::max);
        }
        Ok(TrendReport {
            monotone,
            outcome,
            alpha_along_tau_tail,
            alpha_tail_bound,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrendReport {
    /// `phi(w, x_n)` never increased.
    pub monotone: bool,
    pub outcome: TauOutcome,
    /// `max alpha_{tau(n)}` over the last half of the prefix.
    pub alpha_along_tau_tail: f64,
    /// `max alpha_k` over `k >= tau(first index of the last half)`.
    pub alpha_tail_bound: f64,
}

/// Runs the generic scheme until the stop rule or the budget is met.
pub fn run_halpern(cfg: &HalpernConfig) -> IterationTrace {
    let stride = cfg.max_iter.div_ceil(1000).max(1);
    let w = cfg.reference.clone();
    let phi_w = |x: &PrimalVector| lyapunov(&w, x).expect("same space");
    let bound = phi_w(&cfg.start).max(phi_w(&cfg.anchor));
    let mut rows = Vec::new();
    let mut x = cfg.start.clone();
    let mut n = 1;

    let frame = match Frame::new(cfg) {
        Ok(f) => f,
        Err(e) => return finish(cfg, rows, RunStatus::InnerSolverFailure(e.to_string()), n, x, bound),
    };
    let mut opts = cfg.options.clone();
    let status = loop {
        if cfg.stop_rule == StopRule::Reference && (&x - &w).norm() <= cfg.stop_tol {
            break RunStatus::Converged;
        }
        if n > cfg.max_iter {
            break RunStatus::MaxIter;
        }
        let step = match step_with(cfg, &frame, n, &x, &opts) {
            Ok(s) => s,
            Err(e) => break RunStatus::InnerSolverFailure(format!("step {n}: {e}")),
        };
        let d = &step.diagnostics;
        rows.push(TraceRow {
            n,
            alpha: d.alpha,
            phi_w_x: d.phi_w_x,
            res_fixed_point: d.res_fixed_point,
            res_y_minus_sx: d.res_y_minus_sx,
            slack_b: d.slack_b,
            slack_c: d.slack_c,
            slack_bounded: bound - d.phi_w_x,
            inner_iterations: d.inner_iterations,
            x: ((n - 1) % stride == 0).then(|| x.clone()),
            blend: d.blend,
        });
        if !d.inner_converged {
            break RunStatus::InnerSolverFailure(format!("step {n}: inner solver missed its tolerance"));
        }
        if cfg.stop_rule == StopRule::FixedPointResidual && d.res_fixed_point <= cfg.stop_tol {
            break RunStatus::Converged;
        }
        opts.resolvent.warm_start = Some(step.diagnostics.s_x);
        x = step.x_next;
        n += 1;
    };
    finish(cfg, rows, status, n, x, bound)
}

fn finish(
    cfg: &HalpernConfig,
    rows: Vec<TraceRow>,
    status: RunStatus,
    n: usize,
    x: PrimalVector,
    bound: f64,
) -> IterationTrace {
    let w = cfg.reference.clone();
    IterationTrace {
        final_error: (&x - &w).norm(),
        final_phi: lyapunov(&w, &x).expect("same space"),
        rows,
        status,
        final_index: n,
        final_iterate: x,
        reference: w,
        boundedness_bound: bound,
        stop_tol: cfg.stop_tol,
    }
}

/// `x_{n+1} = J^{-1}(alpha_n J u + (1 - alpha_n) J L_{r_n} x_n)`, converging
/// to `Q_{A^{-1} 0}(u)`.
pub fn run_proximal_point(cfg: &HalpernConfig) -> Result<IterationTrace> {
    if cfg.constraint != ConvexSet::WholeSpace {
        return Err(Error::InvalidParameter(
            "proximal point scheme needs C = whole space".into(),
        ));
    }
    if !matches!(cfg.sequence, MappingSequence::Resolvent { .. }) {
        return Err(Error::InvalidParameter(
            "proximal point scheme needs a resolvent sequence".into(),
        ));
    }
    Ok(run_halpern(cfg))
}

/// `x_{n+1} = Q_C J^{-1}(alpha_n J u + (1 - alpha_n)(beta_n J x_n + (1 - beta_n) J T x_n))`,
/// converging to `Q_{F(T)}(u)`.
pub fn run_halpern_mann(cfg: &HalpernConfig) -> Result<IterationTrace> {
    if !matches!(cfg.sequence, MappingSequence::Blend { .. }) {
        return Err(Error::InvalidParameter(
            "Halpern-Mann scheme needs a blend sequence".into(),
        ));
    }
    Ok(run_halpern(cfg))
}
