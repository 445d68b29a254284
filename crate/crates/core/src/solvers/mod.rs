//! Lanczos-type solvers as resumable state machines.
//!
//! Each algorithm follows the same life cycle: [`init`] computes `r0 = b - A x0`
//! (and runs any prologue the recurrence needs), [`SolverState::step`] advances
//! one iteration of the main loop, and [`run`] loops `step` under a budget.
//! Every denominator is tested before it is divided through; a near-zero one
//! ends the run with a [`StepOutcome::Breakdown`] naming it.
//!
//! The shadow sequence is the monomial one, `y_k = (Aᵀ)^k y`.

mod a12;
mod a4;
mod a5b10;
mod a8b10;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::{matvec, norm2, CsrMatrix, Scalar, Vector};

pub use a12::A12Coefficients;
pub use a4::A4Coefficients;

/// Default residual-norm stopping threshold.
pub const DEFAULT_TOL: f64 = 1e-13;
/// Default relative threshold under which a denominator counts as zero.
pub const DEFAULT_BREAKDOWN_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgoId {
    A4,
    A12,
    A5B10,
    A8B10,
}

impl AlgoId {
    pub const ALL: [AlgoId; 4] = [AlgoId::A4, AlgoId::A12, AlgoId::A5B10, AlgoId::A8B10];

    /// Iterate updates performed inside [`init`] before the main loop.
    pub fn prologue_iterations(self) -> usize {
        match self {
            AlgoId::A4 | AlgoId::A8B10 => 0,
            AlgoId::A5B10 => 1,
            AlgoId::A12 => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgoId::A4 => "A4",
            AlgoId::A12 => "A12",
            AlgoId::A5B10 => "A5B10",
            AlgoId::A8B10 => "A8B10",
        }
    }
}

impl fmt::Display for AlgoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgoId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| !matches!(c, '/' | '_' | '-'))
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "a4" => Ok(AlgoId::A4),
            "a12" => Ok(AlgoId::A12),
            "a5b10" => Ok(AlgoId::A5B10),
            "a8b10" => Ok(AlgoId::A8B10),
            _ => Err(Error::InvalidConfig(format!("unknown algorithm '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once `‖r_k‖ <= tol`.
    pub tol: Scalar,
    /// A denominator `d` is treated as zero when `|d| <= breakdown_eps * scale`,
    /// where `scale` is the magnitude `d` would have without cancellation.
    pub breakdown_eps: Scalar,
    pub max_iters: usize,
}

impl SolverConfig {
    pub fn new(tol: Scalar, breakdown_eps: Scalar, max_iters: usize) -> Result<Self> {
        let cfg = SolverConfig {
            tol,
            breakdown_eps,
            max_iters,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Defaults for an `n`-dimensional system: `tol = 1e-13` and `5n` iterations.
    pub fn for_dimension(n: usize) -> Self {
        SolverConfig {
            tol: DEFAULT_TOL,
            breakdown_eps: DEFAULT_BREAKDOWN_EPS,
            max_iters: 5 * n.max(1),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if !(self.breakdown_eps > 0.0 && self.breakdown_eps.is_finite()) {
            return Err(Error::InvalidConfig(
                "breakdown_eps must be positive".into(),
            ));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// A denominator that vanished (or a coefficient that overflowed).
#[derive(Debug, Clone, PartialEq)]
pub struct Breakdown {
    pub label: String,
    pub value: Scalar,
}

impl Breakdown {
    fn tagged(mut self, algo: AlgoId) -> Self {
        if !self.label.starts_with(algo.name()) {
            self.label = format!("{algo}.{}", self.label);
        }
        self
    }
}

impl fmt::Display for Breakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {:e}", self.label, self.value)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Continue,
    Converged,
    Breakdown(Breakdown),
    IterLimit,
}

impl StepOutcome {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, StepOutcome::Continue)
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, StepOutcome::Converged)
    }

    pub fn breakdown(&self) -> Option<&Breakdown> {
        match self {
            StepOutcome::Breakdown(b) => Some(b),
            _ => None,
        }
    }
}

impl fmt::Display for StepOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepOutcome::Continue => f.write_str("Continue"),
            StepOutcome::Converged => f.write_str("Converged"),
            StepOutcome::Breakdown(b) => write!(f, "Breakdown({})", b.label),
            StepOutcome::IterLimit => f.write_str("IterLimit"),
        }
    }
}

/// A quantity the next step will divide by, with the magnitude it is judged against.
#[derive(Debug, Clone, PartialEq)]
pub struct Denominator {
    pub label: &'static str,
    pub value: Scalar,
    pub scale: Scalar,
}

impl Denominator {
    /// `|value| <= eps * scale`, or not a usable number at all.
    pub fn is_below(&self, eps: Scalar) -> bool {
        !self.value.is_finite() || self.value == 0.0 || self.value.abs() <= eps * self.scale
    }
}

/// Coefficients of the most recent main-loop step, for inspection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficients {
    A4(A4Coefficients),
    A12(A12Coefficients),
    A5B10 { d: Scalar, a: Scalar, c1: Scalar },
    A8B10 { a: Scalar, b1: Scalar, c1: Scalar },
}

pub(crate) enum StepError {
    Breakdown(Breakdown),
    Fatal(Error),
}

impl From<Error> for StepError {
    fn from(err: Error) -> Self {
        match err {
            Error::NonFinite { op } => StepError::Breakdown(Breakdown {
                label: format!("non-finite {op}"),
                value: f64::INFINITY,
            }),
            other => StepError::Fatal(other),
        }
    }
}

type StepResult<T> = std::result::Result<T, StepError>;

/// Screens denominators before division. In step mode a near-zero value
/// aborts the step; in report mode values are collected and only an exact
/// zero or non-finite value stops the evaluation.
pub(crate) struct Guard {
    eps: Scalar,
    report: Option<Vec<Denominator>>,
}

impl Guard {
    fn stepping(eps: Scalar) -> Self {
        Guard { eps, report: None }
    }

    fn reporting() -> Self {
        Guard {
            eps: 0.0,
            report: Some(Vec::new()),
        }
    }

    fn check(&mut self, label: &'static str, value: Scalar, scale: Scalar) -> StepResult<Scalar> {
        let den = Denominator {
            label,
            value,
            scale,
        };
        let hopeless = !value.is_finite() || value == 0.0;
        let fail = match &mut self.report {
            Some(seen) => {
                seen.push(den);
                hopeless
            }
            None => hopeless || value.abs() <= self.eps * scale,
        };
        if fail {
            return Err(StepError::Breakdown(Breakdown {
                label: label.to_string(),
                value,
            }));
        }
        Ok(value)
    }

    /// Checks a freshly computed coefficient for overflow.
    fn finite(&self, label: &'static str, value: Scalar) -> StepResult<Scalar> {
        if value.is_finite() {
            Ok(value)
        } else {
            Err(StepError::Breakdown(Breakdown {
                label: format!("non-finite {label}"),
                value,
            }))
        }
    }
}

/// Scale of a scalar product `(u, v)`: `‖u‖·‖v‖`.
fn dot_scale(u: &Vector, v: &Vector) -> Scalar {
    norm2(u) * norm2(v)
}

enum Kernel {
    A4(a4::A4),
    A12(a12::A12),
    A5B10(a5b10::A5B10),
    A8B10(a8b10::A8B10),
}

/// What a main-loop step produced, before it is committed to the state.
pub(crate) struct Advance<P> {
    x: Vector,
    r: Vector,
    pending: P,
}

/// One run of a Lanczos-type algorithm on `A x = b`.
pub struct SolverState<'a> {
    algo: AlgoId,
    a: &'a CsrMatrix,
    b: &'a Vector,
    cfg: SolverConfig,
    y0: Vector,
    x: Vector,
    r: Vector,
    initial_residual: Scalar,
    iterations: usize,
    outcome: StepOutcome,
    last: Option<Coefficients>,
    kernel: Option<Kernel>,
}

/// Starts `algo` from `x0` with shadow vector `y`.
///
/// A prologue breakdown, or an `x0` that already solves the system, is
/// reported through [`SolverState::outcome`] rather than as an error.
pub fn init<'a>(
    algo: AlgoId,
    a: &'a CsrMatrix,
    b: &'a Vector,
    x0: Vector,
    y: &Vector,
    cfg: SolverConfig,
) -> Result<SolverState<'a>> {
    cfg.validate()?;
    a.ensure_square()?;
    let n = a.nrows();
    for (what, len) in [("b", b.len()), ("x0", x0.len()), ("y", y.len())] {
        if len != n {
            return Err(Error::DimensionMismatch {
                op: what_op(what),
                expected: n,
                found: len,
            });
        }
    }
    if y.is_zero() {
        return Err(Error::ZeroShadow);
    }

    let mut x = x0;
    let mut r = b.sub(&matvec(a, &x)?)?;
    let initial_residual = norm2(&r);
    let mut iterations = 0;
    let (kernel, mut outcome) = if initial_residual <= cfg.tol {
        (None, StepOutcome::Converged)
    } else {
        let ctx = Ctx { a, tol: cfg.tol };
        let mut guard = Guard::stepping(cfg.breakdown_eps);
        let started = match algo {
            AlgoId::A4 => Ok(Kernel::A4(a4::A4::new(y.clone()))),
            AlgoId::A8B10 => Ok(Kernel::A8B10(a8b10::A8B10::new(y.clone(), r.clone()))),
            AlgoId::A5B10 => {
                a5b10::A5B10::start(&ctx, &mut guard, y, &mut x, &mut r, &mut iterations)
                    .map(Kernel::A5B10)
            }
            AlgoId::A12 => a12::A12::start(&ctx, &mut guard, y, &mut x, &mut r, &mut iterations)
                .map(Kernel::A12),
        };
        match started {
            Ok(kernel) => (Some(kernel), StepOutcome::Continue),
            Err(StepError::Breakdown(bd)) => (None, StepOutcome::Breakdown(bd.tagged(algo))),
            Err(StepError::Fatal(err)) => return Err(err),
        }
    };
    let mut state = SolverState {
        algo,
        a,
        b,
        cfg,
        y0: y.clone(),
        x,
        r,
        initial_residual,
        iterations,
        outcome: StepOutcome::Continue,
        last: None,
        kernel,
    };
    if outcome == StepOutcome::Continue {
        outcome = state.classify();
    }
    state.outcome = outcome;
    Ok(state)
}

fn what_op(what: &str) -> &'static str {
    match what {
        "b" => "init: b",
        "x0" => "init: x0",
        _ => "init: y",
    }
}

pub(crate) struct Ctx<'a> {
    a: &'a CsrMatrix,
    tol: Scalar,
}

impl<'a> SolverState<'a> {
    pub fn algo(&self) -> AlgoId {
        self.algo
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn x(&self) -> &Vector {
        &self.x
    }

    pub fn r(&self) -> &Vector {
        &self.r
    }

    pub fn into_x(self) -> Vector {
        self.x
    }

    /// The shadow vector the run started from.
    pub fn y0(&self) -> &Vector {
        &self.y0
    }

    pub fn residual_norm(&self) -> Scalar {
        norm2(&self.r)
    }

    /// `‖b - A x0‖` as computed by [`init`].
    pub fn initial_residual(&self) -> Scalar {
        self.initial_residual
    }

    /// Iterate updates so far, prologue included.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn outcome(&self) -> &StepOutcome {
        &self.outcome
    }

    pub fn last_coefficients(&self) -> Option<Coefficients> {
        self.last
    }

    pub fn matrix(&self) -> &'a CsrMatrix {
        self.a
    }

    pub fn rhs(&self) -> &'a Vector {
        self.b
    }

    /// Advances one main-loop iteration.
    pub fn step(&mut self) -> Result<StepOutcome> {
        if self.outcome.is_terminal() {
            return Err(Error::Terminal(self.outcome.to_string()));
        }
        let ctx = Ctx {
            a: self.a,
            tol: self.cfg.tol,
        };
        let mut guard = Guard::stepping(self.cfg.breakdown_eps);
        let Some(kernel) = self.kernel.as_mut() else {
            return Err(Error::Terminal(self.outcome.to_string()));
        };
        let result = match kernel {
            Kernel::A4(k) => k.advance(&ctx, &mut guard, &self.x, &self.r).map(|adv| {
                self.last = Some(Coefficients::A4(adv.pending.coefficients()));
                k.commit(adv, &mut self.x, &mut self.r)
            }),
            Kernel::A12(k) => k.advance(&ctx, &mut guard, &self.x, &self.r).map(|adv| {
                self.last = Some(Coefficients::A12(adv.pending.coefficients()));
                k.commit(adv, &mut self.x, &mut self.r)
            }),
            Kernel::A5B10(k) => k.advance(&ctx, &mut guard, &self.x, &self.r).map(|adv| {
                let (d, a, c1) = adv.pending.coefficients();
                self.last = Some(Coefficients::A5B10 { d, a, c1 });
                k.commit(adv, &mut self.x, &mut self.r)
            }),
            Kernel::A8B10(k) => k.advance(&ctx, &mut guard, &self.x, &self.r).map(|adv| {
                let (a, b1, c1) = adv.pending.coefficients();
                self.last = Some(Coefficients::A8B10 { a, b1, c1 });
                k.commit(adv, &mut self.x, &mut self.r)
            }),
        };
        self.outcome = match result {
            Ok(()) => {
                self.iterations += 1;
                self.classify()
            }
            Err(StepError::Breakdown(bd)) => StepOutcome::Breakdown(bd.tagged(self.algo)),
            Err(StepError::Fatal(err)) => return Err(err),
        };
        Ok(self.outcome.clone())
    }

    /// Current values of everything the next step will divide by. Evaluation
    /// stops early only at an exact zero or a non-finite value.
    pub fn denominator_report(&self) -> Vec<Denominator> {
        let ctx = Ctx {
            a: self.a,
            tol: self.cfg.tol,
        };
        let Some(kernel) = self.kernel.as_ref().filter(|_| !self.outcome.is_terminal()) else {
            return Vec::new();
        };
        let mut guard = Guard::reporting();
        // Only the collected denominators matter here.
        let _ = match kernel {
            Kernel::A4(k) => k.advance(&ctx, &mut guard, &self.x, &self.r).map(drop),
            Kernel::A12(k) => k.advance(&ctx, &mut guard, &self.x, &self.r).map(drop),
            Kernel::A5B10(k) => k.advance(&ctx, &mut guard, &self.x, &self.r).map(drop),
            Kernel::A8B10(k) => k.advance(&ctx, &mut guard, &self.x, &self.r).map(drop),
        };
        guard.report.unwrap_or_default()
    }

    fn classify(&self) -> StepOutcome {
        if norm2(&self.r) <= self.cfg.tol {
            StepOutcome::Converged
        } else if self.iterations >= self.cfg.max_iters {
            StepOutcome::IterLimit
        } else {
            StepOutcome::Continue
        }
    }
}

impl fmt::Debug for SolverState<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverState")
            .field("algo", &self.algo)
            .field("iterations", &self.iterations)
            .field("residual", &self.residual_norm())
            .field("outcome", &self.outcome)
            .finish()
    }
}

/// Steps until a terminal outcome or until `budget` steps have been taken.
/// A state that is already terminal comes back untouched with a count of 0.
pub fn run(state: &mut SolverState<'_>, budget: usize) -> Result<(StepOutcome, usize)> {
    if budget == 0 {
        return Err(Error::InvalidConfig("budget must be at least 1".into()));
    }
    if state.outcome.is_terminal() {
        return Ok((state.outcome.clone(), 0));
    }
    let mut used = 0;
    let mut outcome = StepOutcome::Continue;
    while used < budget {
        outcome = state.step()?;
        used += 1;
        if outcome.is_terminal() {
            break;
        }
    }
    Ok((outcome, used))
}

/// Runs `algo` from `x0` until termination or `cfg.max_iters`.
pub fn solve(
    algo: AlgoId,
    a: &CsrMatrix,
    b: &Vector,
    x0: Vector,
    y: &Vector,
    cfg: SolverConfig,
) -> Result<(StepOutcome, Vector, usize)> {
    let mut state = init(algo, a, b, x0, y, cfg)?;
    if !state.outcome.is_terminal() {
        run(&mut state, cfg.max_iters)?;
    }
    let outcome = state.outcome.clone();
    let iterations = state.iterations;
    Ok((outcome, state.into_x(), iterations))
}
