//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::collections::HashMap;
use std::process::ExitCode;

use lanczos_switch::harness::{
    run_experiment, ExperimentConfig, Method, ProblemSource, RunRecord, STANDARD_POOLS,
};
use lanczos_switch::solvers::{self, Coefficients};
use lanczos_switch::switching::{run_switching_observed, PolicyMode, SelectionPolicy, SwitchPlan};
use lanczos_switch::{
    direct_solve_oracle, gen_baheux, matvec, AlgoId, BaheuxSpec, CsrMatrix, SolverConfig,
    StepOutcome, Strategy, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SIZES: [usize; 10] = [20, 40, 60, 80, 100, 200, 400, 600, 800, 1000];
const DELTAS: [f64; 4] = [0.0, 0.2, 5.0, 8.0];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn switching_grid() -> Vec<RunRecord> {
    let problem = ProblemSource::Baheux {
        sizes: SIZES.to_vec(),
        deltas: DELTAS.to_vec(),
    };
    let methods = STANDARD_POOLS
        .iter()
        .map(|pool| Method::st2(pool, 20))
        .collect();
    run_experiment(&ExperimentConfig::new(problem, methods)).expect("valid grid")
}

fn switching_convergence(records: &[RunRecord]) -> Verdict {
    let bad: Vec<String> = records
        .iter()
        .filter(|r| !(r.outcome.is_converged() && r.true_residual <= 1e-12))
        .map(|r| {
            format!(
                "n={} delta={} {} {:?} {:e}",
                r.n, r.delta, r.combo, r.outcome, r.true_residual
            )
        })
        .collect();
    let worst = records.iter().map(|r| r.true_residual).fold(0.0, f64::max);
    if bad.is_empty() {
        verdict(
            true,
            format!(
                "{} runs converged, worst ||b-Ax|| = {worst:.3e}",
                records.len()
            ),
        )
    } else {
        verdict(
            false,
            format!(
                "{} of {} failed: {}",
                bad.len(),
                records.len(),
                bad.join("; ")
            ),
        )
    }
}

fn solo_fragility() -> Verdict {
    let problem = ProblemSource::Baheux {
        sizes: SIZES.iter().copied().filter(|&n| n >= 60).collect(),
        deltas: DELTAS.to_vec(),
    };
    let methods = AlgoId::ALL.iter().map(|&a| Method::Solo(a)).collect();
    let records = run_experiment(&ExperimentConfig::new(problem, methods)).expect("valid grid");
    let mut parts = Vec::new();
    let mut pass = true;
    for algo in AlgoId::ALL {
        let runs: Vec<&RunRecord> = records.iter().filter(|r| r.combo == algo.name()).collect();
        let failed = runs.iter().filter(|r| !r.outcome.is_converged()).count();
        pass &= failed > 0;
        parts.push(format!("{algo} failed {failed}/{}", runs.len()));
    }
    verdict(pass, parts.join(", "))
}

fn oracle_equivalence(records: &[RunRecord]) -> Verdict {
    let mut oracles: HashMap<(usize, u64), Vector> = HashMap::new();
    let mut worst_oracle = 0.0f64;
    let mut worst_ones = 0.0f64;
    let mut checked = 0;
    for r in records
        .iter()
        .filter(|r| r.n <= 400 && r.outcome.is_converged())
    {
        let x = r.x.as_ref().expect("converged runs keep x");
        let oracle = oracles.entry((r.n, r.delta.to_bits())).or_insert_with(|| {
            let p = gen_baheux(BaheuxSpec::new(r.n, r.delta).unwrap()).unwrap();
            direct_solve_oracle(&p.a, &p.b).unwrap()
        });
        let diff = x.sub(oracle).unwrap().norm_inf() / oracle.norm_inf();
        let ones = x.sub(&Vector::ones(r.n)).unwrap().norm_inf();
        worst_oracle = worst_oracle.max(diff);
        worst_ones = worst_ones.max(ones);
        checked += 1;
    }
    verdict(
        checked > 0 && worst_oracle <= 1e-8 && worst_ones <= 1e-8,
        format!(
            "{checked} runs, worst vs oracle {worst_oracle:.3e}, worst vs ones {worst_ones:.3e}"
        ),
    )
}

fn random_system(n: usize, rng: &mut ChaCha8Rng) -> (CsrMatrix, Vector, Vector) {
    let mut triplets = Vec::new();
    for i in 0..n {
        triplets.push((i, i, 4.0 + rng.random_range(-1.0..1.0)));
        for j in 0..n {
            if i != j && rng.random_bool(0.3) {
                triplets.push((i, j, rng.random_range(-1.0..1.0)));
            }
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &triplets).unwrap();
    let b = Vector::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    let x0 = Vector::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
    (a, b, x0)
}

struct InvariantStats {
    steps: usize,
    per_algo: HashMap<AlgoId, usize>,
    after_handoff: usize,
    worst_identity: f64,
    a4_steps: usize,
    worst_normalization: f64,
}

/// Cycles of 5 over all four algorithms on random systems, checking every
/// observed state.
fn invariant_suite() -> InvariantStats {
    let mut stats = InvariantStats {
        steps: 0,
        per_algo: HashMap::new(),
        after_handoff: 0,
        worst_identity: 0.0,
        a4_steps: 0,
        worst_normalization: 0.0,
    };
    for n in [10, 20, 30] {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        let mut steps_here = 0;
        let mut seed = 0;
        while steps_here < 200 {
            let (a, b, x0) = random_system(n, &mut rng);
            let anorm = a.norm_inf();
            let y = b.sub(&matvec(&a, &x0).unwrap()).unwrap();
            let plan = SwitchPlan {
                strategy: Strategy::St2 { cycle_len: 5 },
                policy: SelectionPolicy::new(AlgoId::ALL.to_vec(), PolicyMode::CoinToss { seed })
                    .unwrap(),
                start: AlgoId::ALL[seed as usize % 4],
                cfg: SolverConfig::for_dimension(n),
                global_budget: 10 * n,
                shadow: Default::default(),
                accept_tol: 1e-12,
            };
            seed += 1;
            let mut last_cycle = usize::MAX;
            let mut cycle_steps = 0;
            run_switching_observed(&a, &b, x0, &y, &plan, |cycle, s| {
                if cycle != last_cycle {
                    last_cycle = cycle;
                    cycle_steps = 0;
                } else {
                    cycle_steps += 1;
                }
                let direct = b.sub(&matvec(&a, s.x()).unwrap()).unwrap();
                let gap = s.r().sub(&direct).unwrap().norm2() / (b.norm2() + anorm * s.x().norm2());
                stats.worst_identity = stats.worst_identity.max(gap);
                if cycle_steps == 0 {
                    return;
                }
                steps_here += 1;
                stats.steps += 1;
                *stats.per_algo.entry(s.algo()).or_default() += 1;
                if cycle_steps == 1 && cycle > 0 {
                    stats.after_handoff += 1;
                }
                if let Some(Coefficients::A4(c)) = s.last_coefficients() {
                    stats.a4_steps += 1;
                    let err = (c.a * (c.b + c.e) - 1.0).abs();
                    stats.worst_normalization = stats.worst_normalization.max(err);
                }
            })
            .unwrap();
        }
    }
    stats
}

fn residual_identity(stats: &InvariantStats) -> Verdict {
    let every_algo = AlgoId::ALL
        .iter()
        .all(|a| stats.per_algo.get(a).copied().unwrap_or(0) > 0);
    let mut counts: Vec<String> = AlgoId::ALL
        .iter()
        .map(|a| format!("{a}:{}", stats.per_algo.get(a).copied().unwrap_or(0)))
        .collect();
    counts.sort();
    verdict(
        stats.steps >= 600
            && every_algo
            && stats.after_handoff > 0
            && stats.worst_identity <= 1e-10,
        format!(
            "{} steps ({}), {} first steps after a handoff, worst relative gap {:.3e}",
            stats.steps,
            counts.join(" "),
            stats.after_handoff,
            stats.worst_identity
        ),
    )
}

fn a4_normalization(stats: &InvariantStats) -> Verdict {
    verdict(
        stats.a4_steps > 0 && stats.worst_normalization <= 1e-14,
        format!(
            "{} A4 steps, worst |A(B+E) - 1| = {:.3e}",
            stats.a4_steps, stats.worst_normalization
        ),
    )
}

/// Runs `algo` to termination, failing on any non-finite entry on the way.
fn run_checked(algo: AlgoId, a: &CsrMatrix, b: &Vector, y: &Vector) -> Result<StepOutcome, String> {
    let n = b.len();
    let finite =
        |s: &solvers::SolverState<'_>| s.x().iter().chain(s.r().iter()).all(|v| v.is_finite());
    let mut state = solvers::init(
        algo,
        a,
        b,
        Vector::zeros(n),
        y,
        SolverConfig::for_dimension(n),
    )
    .map_err(|e| e.to_string())?;
    if !finite(&state) {
        return Err("non-finite entry after init".into());
    }
    while !state.outcome().is_terminal() {
        state.step().map_err(|e| e.to_string())?;
        if !finite(&state) {
            return Err(format!(
                "non-finite entry at iteration {}",
                state.iterations()
            ));
        }
    }
    Ok(state.outcome().clone())
}

fn breakdown_honesty() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut runs = 0;
    let mut failures = Vec::new();
    let mut record = |case: String, algo: AlgoId, outcome: Result<StepOutcome, String>| {
        runs += 1;
        match outcome {
            Ok(StepOutcome::Breakdown(bd)) if bd.label.starts_with(algo.name()) => {}
            other => failures.push(format!("{case} {algo}: {other:?}")),
        }
    };
    for case in 0..60 {
        let n = rng.random_range(6..30);
        let (a, _, _) = random_system(n, &mut rng);
        let half = n / 2;
        // b lives on the first half of the coordinates and y on the second,
        // so (y, r_0) = 0 exactly.
        let b = Vector::new(
            (0..n)
                .map(|i| {
                    if i < half {
                        rng.random_range(0.5..1.5)
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
        .unwrap();
        let y = Vector::new(
            (0..n)
                .map(|i| {
                    if i >= half {
                        rng.random_range(0.5..1.5)
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
        .unwrap();
        // A relative overlap of 1e-14 between y and r_0.
        let eta = 1e-14 * y.norm2() / b.norm2();
        let near = Vector::new(y.iter().zip(b.iter()).map(|(u, v)| u + eta * v).collect()).unwrap();
        for algo in AlgoId::ALL {
            record(
                format!("orthogonal #{case}"),
                algo,
                run_checked(algo, &a, &b, &y),
            );
            record(
                format!("near-orthogonal #{case}"),
                algo,
                run_checked(algo, &a, &b, &near),
            );
        }
    }
    // Singular 2x2 moment matrix for the A12 prologue, exact and perturbed.
    let a = CsrMatrix::from_dense(&[vec![1.0, 0.0], vec![1.0, 2.0]]).unwrap();
    let b = Vector::new(vec![1.0, 1.0]).unwrap();
    for eps in [0.0, 1e-15, -3e-15] {
        let y = Vector::new(vec![1.0, eps]).unwrap();
        record(
            format!("degenerate moments eps={eps:e}"),
            AlgoId::A12,
            run_checked(AlgoId::A12, &a, &b, &y),
        );
    }
    verdict(
        failures.is_empty(),
        if failures.is_empty() {
            format!("{runs} runs, all ended in a labeled breakdown with finite iterates")
        } else {
            format!("{} of {runs} runs: {}", failures.len(), failures.join("; "))
        },
    )
}

fn determinism() -> Verdict {
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for (i, pool) in STANDARD_POOLS.iter().enumerate() {
        for (n, delta) in [(100, 5.0), (200, 0.2), (400, 8.0)] {
            let p = gen_baheux(BaheuxSpec::new(n, delta).unwrap()).unwrap();
            let plan = SwitchPlan::st2_coin_toss(pool.to_vec(), 42 + i as u64, n).unwrap();
            let run = || {
                run_switching_observed(&p.a, &p.b, Vector::zeros(n), &p.b, &plan, |_, _| {})
                    .unwrap()
            };
            let (first, second) = (run(), run());
            compared += 1;
            let events_equal = first.trace.events.len() == second.trace.events.len()
                && first
                    .trace
                    .events
                    .iter()
                    .zip(&second.trace.events)
                    .all(|(e, f)| {
                        e.kind == f.kind
                            && e.iteration == f.iteration
                            && e.from == f.from
                            && e.to == f.to
                            && e.rejected == f.rejected
                            && e.residual.to_bits() == f.residual.to_bits()
                    });
            let x_equal = first
                .x
                .iter()
                .zip(second.x.iter())
                .all(|(u, v)| u.to_bits() == v.to_bits());
            if !(events_equal && x_equal) {
                mismatches.push(format!("{} n={n} delta={delta}", plan.label()));
            }
        }
    }
    verdict(
        mismatches.is_empty(),
        format!(
            "{compared} repeated runs, {} mismatches{}",
            mismatches.len(),
            if mismatches.is_empty() {
                String::new()
            } else {
                format!(": {}", mismatches.join("; "))
            }
        ),
    )
}

fn main() -> ExitCode {
    let grid = switching_grid();
    let stats = invariant_suite();
    let verdicts = [
        ("1 switching convergence", switching_convergence(&grid)),
        ("2 solo fragility", solo_fragility()),
        ("3 oracle equivalence", oracle_equivalence(&grid)),
        ("4 residual identity", residual_identity(&stats)),
        ("5 breakdown honesty", breakdown_honesty()),
        ("6 determinism", determinism()),
        ("7 A4 normalization", a4_normalization(&stats)),
    ];
    let mut all = true;
    for (name, v) in &verdicts {
        all &= v.pass;
        println!(
            "criterion {name}: {} ({})",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
