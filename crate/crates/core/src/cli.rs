//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};

use crate::error::{Error, Result};
use crate::harness::{
    emit_table, run_experiment, ExperimentConfig, Method, ProblemSource, TableFormat,
};
use crate::solvers::{AlgoId, DEFAULT_TOL};
use crate::switching::{Strategy, DEFAULT_CYCLE_LEN, DEFAULT_MONITOR_THRESHOLD, DEFAULT_SEED};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SwitchArg {
    St1,
    St2,
    St3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Md,
}

/// Solve Baheux-type or MatrixMarket systems with Lanczos-type algorithms,
/// alone or switching between them, and report residuals and timings.
#[derive(Debug, Parser)]
#[command(name = "lanczos-switch", version)]
pub struct Args {
    /// `baheux` or `mm:<path>` for a MatrixMarket file.
    #[arg(long)]
    pub problem: String,
    /// Baheux dimensions (multiples of 10).
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    /// Baheux asymmetry parameters.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub delta: Vec<f64>,
    /// Right-hand side file for `mm:` problems; defaults to `A·ones`.
    #[arg(long)]
    pub rhs: Option<PathBuf>,
    /// Run an algorithm on its own (a4, a12, a5b10, a8b10).
    #[arg(long, value_delimiter = ',')]
    pub solo: Vec<AlgoId>,
    /// Switching strategy.
    #[arg(long = "switch", value_enum)]
    pub strategy: Option<SwitchArg>,
    /// Comma-separated pool; repeat the flag for several pools.
    #[arg(long)]
    pub pool: Vec<String>,
    /// First algorithm of each switching run.
    #[arg(long)]
    pub start: Option<AlgoId>,
    /// ST2 cycle length.
    #[arg(long, default_value_t = DEFAULT_CYCLE_LEN)]
    pub cycle: usize,
    /// ST3 denominator threshold, relative to each denominator's scale.
    #[arg(long, default_value_t = DEFAULT_MONITOR_THRESHOLD)]
    pub monitor_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    /// Iteration budget per run (default 5n solo, 100n switching).
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Timed repetitions per run; the median is reported.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    pub format: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Args {
    pub fn to_config(&self) -> Result<ExperimentConfig> {
        let problem = match self.problem.as_str() {
            "baheux" => {
                if self.rhs.is_some() {
                    return Err(usage("--rhs only applies to mm: problems"));
                }
                if self.n.is_empty() {
                    return Err(usage("--problem baheux needs --n"));
                }
                ProblemSource::Baheux {
                    sizes: self.n.clone(),
                    deltas: if self.delta.is_empty() {
                        vec![0.0]
                    } else {
                        self.delta.clone()
                    },
                }
            }
            other => match other.strip_prefix("mm:") {
                Some(path) if !path.is_empty() => {
                    if !self.n.is_empty() || !self.delta.is_empty() {
                        return Err(usage("--n and --delta only apply to baheux problems"));
                    }
                    ProblemSource::File {
                        matrix: PathBuf::from(path),
                        rhs: self.rhs.clone(),
                    }
                }
                _ => return Err(usage("--problem must be baheux or mm:<path>")),
            },
        };

        let mut methods: Vec<Method> = self.solo.iter().map(|&a| Method::Solo(a)).collect();
        match self.strategy {
            Some(arg) => {
                if self.pool.is_empty() {
                    return Err(usage("--switch needs at least one --pool"));
                }
                let strategy = match arg {
                    SwitchArg::St1 => Strategy::St1,
                    SwitchArg::St2 => Strategy::St2 {
                        cycle_len: self.cycle,
                    },
                    SwitchArg::St3 => Strategy::St3 {
                        monitor_threshold: self.monitor_threshold,
                        check_every: 1,
                    },
                };
                for list in &self.pool {
                    let pool = list
                        .split(',')
                        .map(|s| s.trim().parse::<AlgoId>())
                        .collect::<Result<Vec<_>>>()?;
                    methods.push(Method::Switching {
                        strategy,
                        pool,
                        start: self.start,
                    });
                }
            }
            None => {
                if !self.pool.is_empty() || self.start.is_some() {
                    return Err(usage("--pool and --start need --switch"));
                }
            }
        }
        if methods.is_empty() {
            return Err(usage("give --solo or --switch"));
        }

        let cfg = ExperimentConfig {
            problem,
            methods,
            tol: self.tol,
            budget: self.budget,
            seed: self.seed,
            repeats: self.repeats,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn usage(msg: &str) -> Error {
    Error::InvalidConfig(msg.to_string())
}

/// Parses `args` (program name first), runs, and writes the report.
/// Returns 0 when every run converged, 2 when some did not, and 1 on bad
/// usage or an I/O failure.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(args) => args,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&args) {
        Ok(all_converged) => {
            if all_converged {
                EXIT_OK
            } else {
                EXIT_NOT_CONVERGED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

fn execute(args: &Args) -> Result<bool> {
    let cfg = args.to_config()?;
    let records = run_experiment(&cfg)?;
    let format = match args.format {
        FormatArg::Csv => TableFormat::Csv,
        FormatArg::Md => TableFormat::Markdown,
    };
    let text = emit_table(&records, format)?;
    match &args.out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    for r in records.iter().filter(|r| !r.outcome.is_converged()) {
        eprintln!("n={} {}: {:?}", r.n, r.combo, r.outcome);
    }
    Ok(records.iter().all(|r| r.outcome.is_converged()))
}
