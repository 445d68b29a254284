//! Switching between Lanczos-type algorithms instead of stopping at a breakdown.
//!
//! A run is a sequence of cycles. Each cycle starts one pool member from the
//! last iterate of the previous cycle (fresh residual `b - A x`, shadow
//! sequence restarted from the original `y`) and runs it until the strategy
//! says to hand over:
//!
//! * [`Strategy::St1`]: on breakdown only,
//! * [`Strategy::St2`]: after a fixed number of iterations, or earlier on breakdown,
//! * [`Strategy::St3`]: when a monitored denominator drops below a threshold, or on breakdown.
//!
//! The next algorithm comes from a [`SelectionPolicy`]. Picking the algorithm
//! that just ran is a restart, picking another one is a proper switch.
//!
//! The shadow vector of every cycle after the first is, by default, the
//! residual at the handoff. Reusing the original `y` is available, but the
//! handed-over residual is already orthogonal to the leading powers of `Aᵀ`
//! applied to it, so the new cycle starts next to a breakdown.
//!
//! Coin tosses use SplitMix64 seeded directly with the configured seed; a draw
//! from a pool of `m` members is `(next_u64() · m) >> 64`.

use std::fmt;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;

use crate::error::{Error, Result};
use crate::linalg::{matvec, norm2, CsrMatrix, Scalar, Vector};
use crate::solvers::{
    self, AlgoId, Breakdown, SolverConfig, SolverState, StepOutcome, DEFAULT_TOL,
};

pub const DEFAULT_CYCLE_LEN: usize = 20;
pub const DEFAULT_MONITOR_THRESHOLD: Scalar = 1e-8;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    St1,
    St2 {
        cycle_len: usize,
    },
    St3 {
        monitor_threshold: Scalar,
        check_every: usize,
    },
}

impl Strategy {
    pub fn st2() -> Self {
        Strategy::St2 {
            cycle_len: DEFAULT_CYCLE_LEN,
        }
    }

    pub fn st3() -> Self {
        Strategy::St3 {
            monitor_threshold: DEFAULT_MONITOR_THRESHOLD,
            check_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Strategy::St1 => Ok(()),
            Strategy::St2 { cycle_len: 0 } => Err(Error::InvalidConfig(
                "cycle length must be at least 1".into(),
            )),
            Strategy::St3 {
                monitor_threshold,
                check_every,
            } if !(monitor_threshold > 0.0 && monitor_threshold.is_finite())
                || check_every == 0 =>
            {
                Err(Error::InvalidConfig(
                    "ST3 needs a positive threshold and check interval".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Strategy::St1 => "ST1",
            Strategy::St2 { .. } => "ST2",
            Strategy::St3 { .. } => "ST3",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyMode {
    CoinToss { seed: u64 },
    RoundRobin,
    Fixed(AlgoId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionPolicy {
    pool: Vec<AlgoId>,
    mode: PolicyMode,
}

impl SelectionPolicy {
    pub fn new(pool: Vec<AlgoId>, mode: PolicyMode) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::InvalidConfig("algorithm pool is empty".into()));
        }
        for (i, algo) in pool.iter().enumerate() {
            if pool[..i].contains(algo) {
                return Err(Error::InvalidConfig(format!(
                    "{algo} appears twice in the pool"
                )));
            }
        }
        if let PolicyMode::Fixed(algo) = mode {
            if !pool.contains(&algo) {
                return Err(Error::InvalidConfig(format!(
                    "fixed algorithm {algo} is not in the pool"
                )));
            }
        }
        Ok(SelectionPolicy { pool, mode })
    }

    pub fn coin_toss(pool: Vec<AlgoId>, seed: u64) -> Result<Self> {
        SelectionPolicy::new(pool, PolicyMode::CoinToss { seed })
    }

    pub fn pool(&self) -> &[AlgoId] {
        &self.pool
    }

    pub fn mode(&self) -> PolicyMode {
        self.mode
    }

    /// A fresh generator for this policy's coin.
    pub fn rng(&self) -> SplitMix64 {
        let seed = match self.mode {
            PolicyMode::CoinToss { seed } => seed,
            _ => 0,
        };
        SplitMix64::seed_from_u64(seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Restart,
    ProperSwitch,
}

impl Selection {
    fn classify(from: AlgoId, to: AlgoId) -> Self {
        if from == to {
            Selection::Restart
        } else {
            Selection::ProperSwitch
        }
    }
}

/// Picks the algorithm for the next cycle.
pub fn select_next(
    policy: &SelectionPolicy,
    current: AlgoId,
    rng: &mut SplitMix64,
) -> (AlgoId, Selection) {
    let pool = &policy.pool;
    let next = match policy.mode {
        PolicyMode::CoinToss { .. } => pool[draw(rng, pool.len())],
        PolicyMode::RoundRobin => {
            let pos = pool
                .iter()
                .position(|&a| a == current)
                .unwrap_or(pool.len() - 1);
            pool[(pos + 1) % pool.len()]
        }
        PolicyMode::Fixed(algo) => algo,
    };
    (next, Selection::classify(current, next))
}

/// Uniform index in `0..m` by multiply-shift.
fn draw(rng: &mut SplitMix64, m: usize) -> usize {
    ((u128::from(rng.next_u64()) * m as u128) >> 64) as usize
}

/// Derives an independent seed for the `index`-th run of a batch.
pub fn split_seed(seed: u64, index: u64) -> u64 {
    SplitMix64::seed_from_u64(seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .next_u64()
}

/// Shadow vector used by cycles after the first.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ShadowRestart {
    /// `y = b - A x` at the handoff.
    #[default]
    Residual,
    /// The `y` passed to [`run_switching`].
    Original,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchPlan {
    pub strategy: Strategy,
    pub policy: SelectionPolicy,
    pub start: AlgoId,
    /// `max_iters` is ignored; the global budget bounds the run instead.
    pub cfg: SolverConfig,
    /// Iterations allowed across all cycles.
    pub global_budget: usize,
    pub shadow: ShadowRestart,
    /// Largest recomputed `‖b - A x‖` accepted when a cycle reports
    /// convergence; above it the run hands off from the current iterate.
    pub accept_tol: Scalar,
}

impl SwitchPlan {
    /// ST2 with 20-iteration cycles and coin-toss selection, starting from
    /// the first pool member, with a budget of `100n`.
    pub fn st2_coin_toss(pool: Vec<AlgoId>, seed: u64, n: usize) -> Result<Self> {
        let start = *pool
            .first()
            .ok_or_else(|| Error::InvalidConfig("algorithm pool is empty".into()))?;
        Ok(SwitchPlan {
            strategy: Strategy::st2(),
            policy: SelectionPolicy::coin_toss(pool, seed)?,
            start,
            cfg: SolverConfig::for_dimension(n),
            global_budget: 100 * n.max(1),
            shadow: ShadowRestart::default(),
            accept_tol: 10.0 * DEFAULT_TOL,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.strategy.validate()?;
        self.cfg.validate()?;
        if !self.policy.pool.contains(&self.start) {
            return Err(Error::InvalidConfig(format!(
                "start algorithm {} is not in the pool",
                self.start
            )));
        }
        if let PolicyMode::Fixed(algo) = self.policy.mode {
            if algo != self.start {
                return Err(Error::InvalidConfig(
                    "a fixed policy must start with its algorithm".into(),
                ));
            }
        }
        if self.accept_tol.is_nan() || self.accept_tol < self.cfg.tol {
            return Err(Error::InvalidConfig(
                "acceptance tolerance must be at least the stopping tolerance".into(),
            ));
        }
        if self.global_budget == 0 {
            return Err(Error::InvalidConfig(
                "global budget must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Short description such as `A4+A12/ST2`.
    pub fn label(&self) -> String {
        let pool: Vec<&str> = self.policy.pool.iter().map(|a| a.name()).collect();
        format!("{}/{}", pool.join("+"), self.strategy.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// An ST2 cycle ran its full length.
    CycleEnd,
    BreakdownSwitch,
    MonitorSwitch,
    /// The recurrence residual met the tolerance but the recomputed one did not.
    ResidualGap,
    Converged,
    Exhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchEvent {
    pub kind: EventKind,
    /// Total iterations when the event happened.
    pub iteration: usize,
    pub from: AlgoId,
    /// Algorithm started by the handoff; `None` for terminal events.
    pub to: Option<AlgoId>,
    /// `‖b - A x‖` recomputed at the event.
    pub residual: Scalar,
    /// Pool members that broke down at this iterate before `to` was started.
    pub rejected: Vec<AlgoId>,
    pub breakdown: Option<Breakdown>,
}

impl SwitchEvent {
    /// Restart when the handoff keeps the algorithm, proper switch otherwise.
    pub fn selection(&self) -> Option<Selection> {
        self.to.map(|to| Selection::classify(self.from, to))
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, EventKind::Converged | EventKind::Exhausted)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SwitchTrace {
    pub events: Vec<SwitchEvent>,
}

impl SwitchTrace {
    pub fn restarts(&self) -> usize {
        self.count(Selection::Restart)
    }

    pub fn switches(&self) -> usize {
        self.count(Selection::ProperSwitch)
    }

    fn count(&self, which: Selection) -> usize {
        self.events
            .iter()
            .filter(|e| e.selection() == Some(which))
            .count()
    }

    pub fn last(&self) -> Option<&SwitchEvent> {
        self.events.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Exhaustion {
    /// The global iteration budget ran out.
    Budget,
    /// Every pool member broke down at the same iterate.
    PoolBrokenDown(Vec<(AlgoId, Breakdown)>),
}

impl fmt::Display for Exhaustion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exhaustion::Budget => f.write_str("budget"),
            Exhaustion::PoolBrokenDown(all) => {
                let parts: Vec<String> = all
                    .iter()
                    .map(|(a, b)| format!("{a}: {}", b.label))
                    .collect();
                write!(f, "pool broke down ({})", parts.join("; "))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    Exhausted(Exhaustion),
}

#[derive(Debug, Clone)]
pub struct SwitchResult {
    pub termination: Termination,
    pub x: Vector,
    /// Residual norm carried by the final recurrence.
    pub residual: Scalar,
    /// `‖b - A x‖` for the returned iterate.
    pub true_residual: Scalar,
    pub iterations: usize,
    pub trace: SwitchTrace,
}

impl SwitchResult {
    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

/// Starts `next` from the iterate `prev_x` with a recomputed residual and
/// shadow vector `y`.
pub fn handoff<'a>(
    a: &'a CsrMatrix,
    b: &'a Vector,
    prev_x: &Vector,
    y: &Vector,
    next: AlgoId,
    cfg: SolverConfig,
) -> Result<SolverState<'a>> {
    solvers::init(next, a, b, prev_x.clone(), y, cfg)
}

fn true_residual(a: &CsrMatrix, b: &Vector, x: &Vector) -> Result<Scalar> {
    Ok(norm2(&b.sub(&matvec(a, x)?)?))
}

/// Why a cycle stopped.
enum CycleEnd {
    Outcome(StepOutcome),
    Monitor(String),
}

/// Drives cycles under `plan` until convergence or exhaustion.
pub fn run_switching(
    a: &CsrMatrix,
    b: &Vector,
    x0: Vector,
    y: &Vector,
    plan: &SwitchPlan,
) -> Result<SwitchResult> {
    plan.validate()?;
    run_switching_observed(a, b, x0, y, plan, |_, _| {})
}

/// As [`run_switching`], calling `observe` with the index of the current
/// cycle and its state after every (re)start and after each step.
pub fn run_switching_observed(
    a: &CsrMatrix,
    b: &Vector,
    x0: Vector,
    y: &Vector,
    plan: &SwitchPlan,
    mut observe: impl FnMut(usize, &SolverState<'_>),
) -> Result<SwitchResult> {
    plan.validate()?;
    let mut rng = plan.policy.rng();
    let mut trace = SwitchTrace::default();
    let mut used = 0usize;
    let mut current = plan.start;
    let mut x = x0;
    // Members that broke down at the current iterate without moving it.
    let mut stalled: Vec<(AlgoId, Breakdown)> = Vec::new();
    let mut cycle = 0usize;

    loop {
        let remaining = plan.global_budget - used;
        if remaining < current.prologue_iterations() {
            let event_residual = true_residual(a, b, &x)?;
            return Ok(exhausted(
                trace,
                Exhaustion::Budget,
                current,
                used,
                x,
                event_residual,
                event_residual,
            ));
        }
        let cfg = SolverConfig {
            max_iters: remaining.max(1),
            ..plan.cfg
        };
        let shadow = match plan.shadow {
            ShadowRestart::Residual if !trace.events.is_empty() => {
                let r = b.sub(&matvec(a, &x)?)?;
                if r.is_zero() {
                    y.clone()
                } else {
                    r
                }
            }
            _ => y.clone(),
        };
        let mut state = handoff(a, b, &x, &shadow, current, cfg)?;
        observe(cycle, &state);

        let end = if state.outcome().is_terminal() {
            CycleEnd::Outcome(state.outcome().clone())
        } else {
            run_cycle(&mut state, plan, remaining, &mut |s| observe(cycle, s))?
        };

        let progressed = state.iterations() > 0;
        used += state.iterations();
        let residual = state.residual_norm();
        x = state.into_x();
        let event_residual = true_residual(a, b, &x)?;

        cycle += 1;
        if progressed {
            stalled.clear();
        }

        let (kind, breakdown) = match end {
            CycleEnd::Outcome(StepOutcome::Converged) if event_residual > plan.accept_tol => {
                (EventKind::ResidualGap, None)
            }
            CycleEnd::Outcome(StepOutcome::Converged) => {
                trace.events.push(SwitchEvent {
                    kind: EventKind::Converged,
                    iteration: used,
                    from: current,
                    to: None,
                    residual: event_residual,
                    rejected: Vec::new(),
                    breakdown: None,
                });
                return Ok(SwitchResult {
                    termination: Termination::Converged,
                    x,
                    residual,
                    true_residual: event_residual,
                    iterations: used,
                    trace,
                });
            }
            CycleEnd::Outcome(StepOutcome::Breakdown(bd)) if !progressed => {
                stalled.push((current, bd.clone()));
                let tried: Vec<AlgoId> = stalled.iter().map(|(a, _)| *a).collect();
                let untried = rotate_from(plan.policy.pool(), current)
                    .into_iter()
                    .find(|a| !tried.contains(a));
                match untried {
                    Some(next) => {
                        let folded = trace
                            .events
                            .last_mut()
                            .filter(|e| e.iteration == used && !e.is_terminal());
                        match folded {
                            Some(event) => {
                                event.rejected.push(current);
                                event.to = Some(next);
                            }
                            None => trace.events.push(SwitchEvent {
                                kind: EventKind::BreakdownSwitch,
                                iteration: used,
                                from: current,
                                to: Some(next),
                                residual: event_residual,
                                rejected: vec![current],
                                breakdown: Some(bd),
                            }),
                        }
                        current = next;
                        continue;
                    }
                    None => {
                        return Ok(exhausted(
                            trace,
                            Exhaustion::PoolBrokenDown(std::mem::take(&mut stalled)),
                            current,
                            used,
                            x,
                            residual,
                            event_residual,
                        ));
                    }
                }
            }
            CycleEnd::Outcome(StepOutcome::Breakdown(bd)) => (EventKind::BreakdownSwitch, Some(bd)),
            CycleEnd::Outcome(StepOutcome::IterLimit) => {
                return Ok(exhausted(
                    trace,
                    Exhaustion::Budget,
                    current,
                    used,
                    x,
                    residual,
                    event_residual,
                ));
            }
            CycleEnd::Outcome(StepOutcome::Continue) => (EventKind::CycleEnd, None),
            CycleEnd::Monitor(label) => (
                EventKind::MonitorSwitch,
                Some(Breakdown {
                    label,
                    value: f64::NAN,
                }),
            ),
        };

        if used >= plan.global_budget {
            return Ok(exhausted(
                trace,
                Exhaustion::Budget,
                current,
                used,
                x,
                residual,
                event_residual,
            ));
        }
        let (next, _) = select_next(&plan.policy, current, &mut rng);
        trace.events.push(SwitchEvent {
            kind,
            iteration: used,
            from: current,
            to: Some(next),
            residual: event_residual,
            rejected: Vec::new(),
            breakdown,
        });
        current = next;
    }
}

fn run_cycle(
    state: &mut SolverState<'_>,
    plan: &SwitchPlan,
    remaining: usize,
    observe: &mut dyn FnMut(&SolverState<'_>),
) -> Result<CycleEnd> {
    let steps = match plan.strategy {
        Strategy::St2 { cycle_len } => cycle_len.saturating_sub(state.iterations()),
        _ => usize::MAX,
    }
    .min(remaining.saturating_sub(state.iterations()));

    let mut taken = 0;
    while taken < steps {
        let outcome = state.step()?;
        taken += 1;
        observe(state);
        if outcome.is_terminal() {
            return Ok(CycleEnd::Outcome(outcome));
        }
        if let Strategy::St3 {
            monitor_threshold,
            check_every,
        } = plan.strategy
        {
            if taken % check_every == 0 {
                if let Some(d) = state
                    .denominator_report()
                    .into_iter()
                    .find(|d| d.is_below(monitor_threshold))
                {
                    return Ok(CycleEnd::Monitor(d.label.to_string()));
                }
            }
        }
    }
    if state.iterations() >= remaining {
        return Ok(CycleEnd::Outcome(StepOutcome::IterLimit));
    }
    Ok(CycleEnd::Outcome(StepOutcome::Continue))
}

/// Pool members in order, starting after `current`.
fn rotate_from(pool: &[AlgoId], current: AlgoId) -> Vec<AlgoId> {
    let pos = pool.iter().position(|&a| a == current).map_or(0, |p| p + 1);
    pool[pos..].iter().chain(&pool[..pos]).copied().collect()
}

fn exhausted(
    mut trace: SwitchTrace,
    reason: Exhaustion,
    current: AlgoId,
    used: usize,
    x: Vector,
    residual: Scalar,
    true_residual: Scalar,
) -> SwitchResult {
    trace.events.push(SwitchEvent {
        kind: EventKind::Exhausted,
        iteration: used,
        from: current,
        to: None,
        residual: true_residual,
        rejected: Vec::new(),
        breakdown: None,
    });
    SwitchResult {
        termination: Termination::Exhausted(reason),
        x,
        residual,
        true_residual,
        iterations: used,
        trace,
    }
}
