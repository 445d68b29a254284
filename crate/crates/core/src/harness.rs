//! Batch runs over problem grids, with timing and tabular reports.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::{matvec, norm2, Scalar, Vector};
use crate::problems::{gen_baheux, read_matrix_market, BaheuxSpec, ProblemInstance};
use crate::solvers::{self, AlgoId, SolverConfig, StepOutcome, DEFAULT_TOL};
use crate::switching::{
    run_switching, split_seed, PolicyMode, SelectionPolicy, ShadowRestart, Strategy, SwitchPlan,
    Termination, DEFAULT_SEED,
};

/// The four two-member pools of the standard ST2 comparison.
pub const STANDARD_POOLS: [[AlgoId; 2]; 4] = [
    [AlgoId::A4, AlgoId::A12],
    [AlgoId::A4, AlgoId::A5B10],
    [AlgoId::A4, AlgoId::A8B10],
    [AlgoId::A5B10, AlgoId::A8B10],
];

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    /// Every combination of `sizes` and `deltas`.
    Baheux {
        sizes: Vec<usize>,
        deltas: Vec<Scalar>,
    },
    File {
        matrix: PathBuf,
        rhs: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Solo(AlgoId),
    Switching {
        strategy: Strategy,
        pool: Vec<AlgoId>,
        /// First pool member when `None`.
        start: Option<AlgoId>,
    },
}

impl Method {
    /// ST2 with a coin toss over `pool`.
    pub fn st2(pool: &[AlgoId], cycle_len: usize) -> Self {
        Method::Switching {
            strategy: Strategy::St2 { cycle_len },
            pool: pool.to_vec(),
            start: None,
        }
    }

    /// `A4` for a solo run, `A4+A12/ST2` for a switching one.
    pub fn label(&self) -> String {
        match self {
            Method::Solo(algo) => algo.name().to_string(),
            Method::Switching { strategy, pool, .. } => {
                let names: Vec<&str> = pool.iter().map(|a| a.name()).collect();
                format!("{}/{}", names.join("+"), strategy.label())
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let Method::Switching {
            strategy,
            pool,
            start,
        } = self
        {
            strategy.validate()?;
            SelectionPolicy::new(pool.clone(), PolicyMode::RoundRobin)?;
            if let Some(start) = start {
                if !pool.contains(start) {
                    return Err(Error::InvalidConfig(format!(
                        "start algorithm {start} is not in the pool"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSource,
    pub methods: Vec<Method>,
    pub tol: Scalar,
    /// Iteration budget per run; `5n` for solo runs and `100n` for
    /// switching runs when `None`.
    pub budget: Option<usize>,
    pub seed: u64,
    pub repeats: usize,
}

impl ExperimentConfig {
    pub fn new(problem: ProblemSource, methods: Vec<Method>) -> Self {
        ExperimentConfig {
            problem,
            methods,
            tol: DEFAULT_TOL,
            budget: None,
            seed: DEFAULT_SEED,
            repeats: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidConfig("repeats must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidConfig("tolerance must be positive".into()));
        }
        if self.budget == Some(0) {
            return Err(Error::InvalidConfig("budget must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig(
                "no solver or switching plan given".into(),
            ));
        }
        for method in &self.methods {
            method.validate()?;
        }
        if let ProblemSource::Baheux { sizes, deltas } = &self.problem {
            if sizes.is_empty() || deltas.is_empty() {
                return Err(Error::InvalidConfig("empty problem grid".into()));
            }
            for &n in sizes {
                for &delta in deltas {
                    BaheuxSpec::new(n, delta)?;
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Converged,
    Breakdown(String),
    IterLimit,
    Exhausted(String),
    /// The run could not be carried out at all.
    Failed(String),
}

impl RunOutcome {
    pub fn label(&self) -> &'static str {
        match self {
            RunOutcome::Converged => "Converged",
            RunOutcome::Breakdown(_) => "Breakdown",
            RunOutcome::IterLimit => "IterLimit",
            RunOutcome::Exhausted(_) => "Exhausted",
            RunOutcome::Failed(_) => "Failed",
        }
    }

    pub fn is_converged(&self) -> bool {
        *self == RunOutcome::Converged
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub n: usize,
    /// `NaN` for problems read from a file.
    pub delta: Scalar,
    pub combo: String,
    pub outcome: RunOutcome,
    /// Residual norm carried by the recurrence at the end of the run.
    pub residual: Scalar,
    /// Recomputed `‖b - A x‖`.
    pub true_residual: Scalar,
    pub iterations: usize,
    pub switches: usize,
    pub restarts: usize,
    /// Median wall time over the repeats.
    pub seconds: f64,
    pub x: Option<Vector>,
}

struct Solved {
    outcome: RunOutcome,
    residual: Scalar,
    x: Vector,
    iterations: usize,
    switches: usize,
    restarts: usize,
}

/// Runs every method on every problem. A run that fails is recorded rather
/// than aborting the batch; only configuration errors are returned.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let problems: Vec<(Scalar, Result<ProblemInstance>)> = match &cfg.problem {
        ProblemSource::Baheux { sizes, deltas } => deltas
            .iter()
            .flat_map(|&delta| {
                sizes
                    .iter()
                    .map(move |&n| (delta, BaheuxSpec::new(n, delta).and_then(gen_baheux)))
            })
            .collect(),
        ProblemSource::File { matrix, rhs } => {
            vec![(f64::NAN, read_matrix_market(matrix, rhs.as_deref()))]
        }
    };

    let mut records = Vec::new();
    let mut cell = 0u64;
    for (delta, problem) in &problems {
        for method in &cfg.methods {
            let seed = split_seed(cfg.seed, cell);
            cell += 1;
            let record = match problem {
                Ok(p) => run_cell(p, *delta, method, cfg, seed),
                Err(e) => failed_record(0, *delta, method, e),
            };
            records.push(record);
        }
    }
    Ok(records)
}

fn run_cell(
    p: &ProblemInstance,
    delta: Scalar,
    method: &Method,
    cfg: &ExperimentConfig,
    seed: u64,
) -> RunRecord {
    let mut times = Vec::with_capacity(cfg.repeats);
    let mut first = None;
    for _ in 0..cfg.repeats {
        let start = Instant::now();
        let solved = solve_once(p, method, cfg, seed);
        times.push(start.elapsed().as_secs_f64());
        if first.is_none() {
            first = Some(solved);
        }
    }
    times.sort_by(f64::total_cmp);
    let seconds = median(&times);
    match first.expect("repeats is at least 1") {
        Ok(s) => {
            let true_residual = b_minus_ax(p, &s.x);
            RunRecord {
                n: p.n(),
                delta,
                combo: method.label(),
                outcome: s.outcome,
                residual: s.residual,
                true_residual,
                iterations: s.iterations,
                switches: s.switches,
                restarts: s.restarts,
                seconds,
                x: Some(s.x),
            }
        }
        Err(e) => failed_record(p.n(), delta, method, &e),
    }
}

fn median(sorted: &[f64]) -> f64 {
    let m = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[m]
    } else {
        0.5 * (sorted[m - 1] + sorted[m])
    }
}

fn b_minus_ax(p: &ProblemInstance, x: &Vector) -> Scalar {
    matvec(&p.a, x)
        .and_then(|ax| p.b.sub(&ax))
        .map(|r| norm2(&r))
        .unwrap_or(f64::NAN)
}

fn failed_record(n: usize, delta: Scalar, method: &Method, err: &Error) -> RunRecord {
    RunRecord {
        n,
        delta,
        combo: method.label(),
        outcome: RunOutcome::Failed(err.to_string()),
        residual: f64::NAN,
        true_residual: f64::NAN,
        iterations: 0,
        switches: 0,
        restarts: 0,
        seconds: 0.0,
        x: None,
    }
}

fn solve_once(
    p: &ProblemInstance,
    method: &Method,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Solved> {
    let n = p.n();
    let x0 = Vector::zeros(n);
    let y = p.b.sub(&matvec(&p.a, &x0)?)?;
    let y = if y.is_zero() { Vector::ones(n) } else { y };
    match method {
        Method::Solo(algo) => {
            let budget = cfg.budget.unwrap_or(5 * n);
            let scfg = SolverConfig {
                tol: cfg.tol,
                max_iters: budget,
                ..SolverConfig::for_dimension(n)
            };
            let mut state = solvers::init(*algo, &p.a, &p.b, x0, &y, scfg)?;
            if !state.outcome().is_terminal() {
                solvers::run(&mut state, budget)?;
            }
            let outcome = match state.outcome() {
                StepOutcome::Converged => RunOutcome::Converged,
                StepOutcome::Breakdown(bd) => RunOutcome::Breakdown(bd.label.clone()),
                _ => RunOutcome::IterLimit,
            };
            let residual = state.residual_norm();
            let iterations = state.iterations();
            Ok(Solved {
                outcome,
                residual,
                x: state.into_x(),
                iterations,
                switches: 0,
                restarts: 0,
            })
        }
        Method::Switching {
            strategy,
            pool,
            start,
        } => {
            let plan = SwitchPlan {
                strategy: *strategy,
                policy: SelectionPolicy::coin_toss(pool.clone(), seed)?,
                start: start.unwrap_or(pool[0]),
                cfg: SolverConfig {
                    tol: cfg.tol,
                    ..SolverConfig::for_dimension(n)
                },
                global_budget: cfg.budget.unwrap_or(100 * n),
                shadow: ShadowRestart::Residual,
                accept_tol: 10.0 * cfg.tol,
            };
            let result = run_switching(&p.a, &p.b, x0, &y, &plan)?;
            let outcome = match &result.termination {
                Termination::Converged => RunOutcome::Converged,
                Termination::Exhausted(why) => RunOutcome::Exhausted(why.to_string()),
            };
            Ok(Solved {
                outcome,
                residual: result.residual,
                iterations: result.iterations,
                switches: result.trace.switches(),
                restarts: result.trace.restarts(),
                x: result.x,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Markdown,
}

pub const CSV_HEADER: &str = "n,delta,combo,outcome,residual,iterations,switches,restarts,seconds";

/// Five significant digits in scientific notation.
pub fn sci(v: f64) -> String {
    format!("{v:.4e}")
}

fn delta_text(delta: Scalar) -> String {
    if delta.is_nan() {
        "-".into()
    } else {
        delta.to_string()
    }
}

pub fn emit_table(records: &[RunRecord], format: TableFormat) -> Result<String> {
    if records.is_empty() {
        return Err(Error::InvalidConfig("no records to report".into()));
    }
    Ok(match format {
        TableFormat::Csv => emit_csv(records),
        TableFormat::Markdown => emit_markdown(records),
    })
}

fn emit_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            delta_text(r.delta),
            r.combo,
            r.outcome.label(),
            sci(r.residual),
            r.iterations,
            r.switches,
            r.restarts,
            sci(r.seconds)
        );
    }
    out
}

/// One table per `delta`: a row per `n` and a residual/time column pair per
/// combo. Runs that did not converge are marked with `*`.
fn emit_markdown(records: &[RunRecord]) -> String {
    let deltas = distinct(records.iter().map(|r| delta_text(r.delta)));
    let combos = distinct(records.iter().map(|r| r.combo.clone()));
    let mut out = String::new();
    for (i, delta) in deltas.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "delta = {delta}\n");
        let rows: Vec<&RunRecord> = records
            .iter()
            .filter(|r| &delta_text(r.delta) == delta)
            .collect();
        out.push_str("| n |");
        for combo in &combos {
            let _ = write!(out, " {combo} residual | {combo} T(s) |");
        }
        out.push_str("\n|---|");
        out.push_str(&"---|---|".repeat(combos.len()));
        out.push('\n');
        for n in distinct(rows.iter().map(|r| r.n)) {
            let _ = write!(out, "| {n} |");
            for combo in &combos {
                match rows.iter().find(|r| r.n == n && &r.combo == combo) {
                    Some(r) => {
                        let mark = if r.outcome.is_converged() { "" } else { "*" };
                        let _ = write!(out, " {}{mark} | {} |", sci(r.residual), sci(r.seconds));
                    }
                    None => out.push_str(" - | - |"),
                }
            }
            out.push('\n');
        }
    }
    out
}

fn distinct<T: PartialEq>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut seen = Vec::new();
    for item in items {
        if !seen.contains(&item) {
            seen.push(item);
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(n: usize, combo: &str) -> RunRecord {
        RunRecord {
            n,
            delta: 0.2,
            combo: combo.into(),
            outcome: RunOutcome::Converged,
            residual: 5.5067e-14,
            true_residual: 6e-14,
            iterations: 30,
            switches: 1,
            restarts: 0,
            seconds: 0.0123456,
            x: None,
        }
    }

    #[test]
    fn single_record_csv() {
        let text = emit_table(&[record(20, "A4+A12/ST2")], TableFormat::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "20,0.2,A4+A12/ST2,Converged,5.5067e-14,30,1,0,1.2346e-2"
        );
    }

    #[test]
    fn markdown_shape() {
        let mut records = Vec::new();
        for n in [20, 40, 60] {
            records.push(record(n, "A4+A12/ST2"));
            records.push(record(n, "A4+A5B10/ST2"));
        }
        let text = emit_table(&records, TableFormat::Markdown).unwrap();
        let table: Vec<&str> = text.lines().filter(|l| l.starts_with('|')).collect();
        assert_eq!(table.len(), 5);
        assert_eq!(table[0].matches("T(s)").count(), 2);
        assert_eq!(table[0].matches("residual").count(), 2);
        assert!(table[2].starts_with("| 20 |"));
    }

    #[test]
    fn empty_records_rejected() {
        assert!(emit_table(&[], TableFormat::Csv).is_err());
    }

    #[test]
    fn scientific_rendering() {
        assert_eq!(sci(1.0), "1.0000e0");
        assert_eq!(sci(2.15524e-14), "2.1552e-14");
    }

    #[test]
    fn config_validation() {
        let problem = ProblemSource::Baheux {
            sizes: vec![20],
            deltas: vec![0.0],
        };
        let mut cfg = ExperimentConfig::new(problem.clone(), vec![Method::Solo(AlgoId::A4)]);
        assert!(cfg.validate().is_ok());
        cfg.repeats = 0;
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::new(problem.clone(), vec![]);
        assert!(cfg.validate().is_err());
        let bad = ProblemSource::Baheux {
            sizes: vec![25],
            deltas: vec![0.0],
        };
        assert!(ExperimentConfig::new(bad, vec![Method::Solo(AlgoId::A4)])
            .validate()
            .is_err());
        let start_outside = Method::Switching {
            strategy: Strategy::st2(),
            pool: vec![AlgoId::A4],
            start: Some(AlgoId::A12),
        };
        assert!(ExperimentConfig::new(problem, vec![start_outside])
            .validate()
            .is_err());
    }

    #[test]
    fn missing_file_is_recorded() {
        let problem = ProblemSource::File {
            matrix: PathBuf::from("/nonexistent/matrix.mtx"),
            rhs: None,
        };
        let records = run_experiment(&ExperimentConfig::new(
            problem,
            vec![Method::Solo(AlgoId::A4)],
        ))
        .unwrap();
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].outcome.label(), "Failed");
    }

    #[test]
    fn a4_a12_solves_smallest_problem() {
        let problem = ProblemSource::Baheux {
            sizes: vec![20],
            deltas: vec![0.0],
        };
        let cfg = ExperimentConfig::new(problem, vec![Method::st2(&STANDARD_POOLS[0], 20)]);
        let records = run_experiment(&cfg).unwrap();
        assert_eq!(records[0].combo, "A4+A12/ST2");
        assert!(records[0].outcome.is_converged());
        assert!(records[0].residual <= 1e-13);
    }

    #[test]
    fn solo_a4_fails_at_n100() {
        let problem = ProblemSource::Baheux {
            sizes: vec![100],
            deltas: vec![0.2],
        };
        let records = run_experiment(&ExperimentConfig::new(
            problem,
            vec![Method::Solo(AlgoId::A4)],
        ))
        .unwrap();
        assert!(
            !records[0].outcome.is_converged(),
            "{:?}",
            records[0].outcome
        );
    }
}
