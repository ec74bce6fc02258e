//! Command-line front end.
//!
//! Every command is a pure function of its flags: seeds default to
//! [`DEFAULT_SEED`] and Monte Carlo loops are keyed per realization/sample, so
//! re-runs are byte-identical for any `RAYON_NUM_THREADS`.
//!
//! Exit codes: 0 success, 1 invalid configuration, 2 infeasible offset,
//! 3 enumeration budget exceeded.

use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::bia::{estimate_dof, rate_curve, DofRecord, Scheme};
use crate::fading::ChannelProcess;
use crate::pairing::{self, lower_bound_sweep, pairing_report, to_decimal, ReportOptions};
use crate::zpattern::decompose_period;
use crate::Error;

pub const DEFAULT_SEED: u64 = 20_130_101;
pub const PROGRAM: &str = "bia-sim";

#[derive(Debug, Parser)]
#[command(name = PROGRAM, version, about = "Blind interference alignment on homogeneous block fading channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit the type-Z decomposition of one or more 3N-slot periods.
    Schedule(ScheduleArgs),
    /// Monte Carlo sum rate and DoF slope of the blind scheme.
    Simulate(SimulateArgs),
    /// K-user pairing probabilities: closed form, bound, enumeration, sampling.
    Pairing(PairingArgs),
    /// Lower-bound curves versus K for several coherence lengths.
    #[command(name = "sweep-fig4")]
    SweepFig4(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Full,
    SingleStream,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Full => Scheme::Full,
            SchemeArg::SingleStream => Scheme::SingleStream,
        }
    }
}

#[derive(Debug, Args)]
pub struct Output {
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write to PATH instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub offset: u64,
    #[arg(long, default_value_t = 1)]
    pub periods: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 5)]
    pub n: u64,
    #[arg(long, default_value_t = 2)]
    pub offset: u64,
    #[arg(long, default_value_t = 30.0)]
    pub snr_low_db: f64,
    #[arg(long, default_value_t = 50.0)]
    pub snr_high_db: f64,
    /// SNR points (dB) for the rate curve.
    #[arg(long, value_delimiter = ',', default_value = "0,10,20,30,40,50")]
    pub snr_grid_db: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub realizations: u64,
    #[arg(long, default_value_t = 1)]
    pub periods: u64,
    #[arg(long, value_enum, default_value = "full")]
    pub scheme: SchemeArg,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct PairingArgs {
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub k: u64,
    /// Maximum number of offset tuples the exhaustive count may visit.
    #[arg(long, default_value_t = pairing::DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long)]
    pub skip_oracle: bool,
    /// Monte Carlo samples; 0 disables the estimate.
    #[arg(long, default_value_t = 0)]
    pub samples: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "12,30,30000")]
    pub n_values: Vec<u64>,
    #[arg(long, default_value_t = 2)]
    pub k_min: u64,
    #[arg(long, default_value_t = 10)]
    pub k_max: u64,
    /// Add enumerated probabilities where within budget.
    #[arg(long)]
    pub exact: bool,
    #[arg(long, default_value_t = pairing::DEFAULT_BUDGET)]
    pub budget: u64,
    #[arg(long, default_value_t = 0)]
    pub samples: u64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[command(flatten)]
    pub output: Output,
}

/// Result of one invocation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InfeasibleOffset { .. } => 2,
        Error::BudgetExceeded { .. } => 3,
        _ => 1,
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

/// Parses `args` (without the program name) and runs the command.
pub fn run<I, S>(args: I) -> Outcome
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let cli =
        match Cli::try_parse_from(std::iter::once(PROGRAM.to_string()).chain(args.iter().cloned()))
        {
            Ok(cli) => cli,
            Err(e) => {
                let code = if e.use_stderr() { 1 } else { 0 };
                let text = e.render().to_string();
                return if code == 0 {
                    Outcome {
                        code,
                        stdout: text.into_bytes(),
                        stderr: String::new(),
                    }
                } else {
                    Outcome {
                        code,
                        stdout: Vec::new(),
                        stderr: text,
                    }
                };
            }
        };
    let invocation = std::iter::once(PROGRAM.to_string())
        .chain(args)
        .collect::<Vec<_>>()
        .join(" ");

    let (result, output) = match &cli.command {
        Command::Schedule(a) => (cmd_schedule(a, &invocation), &a.output),
        Command::Simulate(a) => (cmd_simulate(a, &invocation), &a.output),
        Command::Pairing(a) => (cmd_pairing(a, &invocation), &a.output),
        Command::SweepFig4(a) => (cmd_sweep_fig4(a, &invocation), &a.output),
    };
    match result {
        Ok(text) => match &output.out {
            Some(path) => match std::fs::write(path, text) {
                Ok(()) => Outcome {
                    code: 0,
                    stdout: Vec::new(),
                    stderr: String::new(),
                },
                Err(e) => Outcome {
                    code: 1,
                    stdout: Vec::new(),
                    stderr: format!("error: cannot write {}: {e}\n", path.display()),
                },
            },
            None => Outcome {
                code: 0,
                stdout: text.into_bytes(),
                stderr: String::new(),
            },
        },
        Err(e) => Outcome {
            code: exit_code(&e),
            stdout: Vec::new(),
            stderr: format!("error: {e}\n"),
        },
    }
}

fn comment(invocation: &str, seed: Option<u64>) -> String {
    match seed {
        Some(s) => format!("# {invocation} (seed {s})\n"),
        None => format!("# {invocation}\n"),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

pub fn cmd_schedule(a: &ScheduleArgs, invocation: &str) -> crate::Result<String> {
    if a.periods == 0 {
        return Err(invalid("--periods must be >= 1"));
    }
    let plans = (0..a.periods)
        .map(|p| decompose_period(a.n, a.offset, p))
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(match a.output.format {
        Format::Json => pretty(&serde_json::to_value(&plans).expect("plans serialize")),
        Format::Csv => {
            let mut s = comment(invocation, None);
            s.push_str("N,offset,tau,period,block,n1,n2,n3,orientation\n");
            for plan in &plans {
                for (i, b) in plan.blocks.iter().enumerate() {
                    let [n1, n2, n3] = b.slots;
                    writeln!(
                        s,
                        "{},{},{},{},{i},{n1},{n2},{n3},{}",
                        plan.n, plan.offset, plan.tau, plan.period, b.orientation
                    )
                    .unwrap();
                }
            }
            s
        }
    })
}

pub fn cmd_simulate(a: &SimulateArgs, invocation: &str) -> crate::Result<String> {
    if a.realizations == 0 {
        return Err(invalid("--realizations must be >= 1"));
    }
    if a.periods == 0 {
        return Err(invalid("--periods must be >= 1"));
    }
    if a.snr_grid_db.is_empty() || a.snr_grid_db.iter().any(|x| !x.is_finite()) {
        return Err(invalid(
            "--snr-grid-db must be a nonempty list of finite values",
        ));
    }
    let mut plan = decompose_period(a.n, a.offset, 0)?;
    for p in 1..a.periods {
        plan.blocks
            .extend(decompose_period(a.n, a.offset, p)?.blocks);
    }
    let schedules = plan.schedules()?;
    let process = ChannelProcess::new(a.seed, 2)?;
    let scheme = Scheme::from(a.scheme);
    let dof = estimate_dof(
        &process,
        &schedules,
        &plan,
        a.snr_low_db,
        a.snr_high_db,
        a.realizations,
        a.seed,
        scheme,
    )?;
    let rates = rate_curve(
        &process,
        &schedules,
        &plan,
        &a.snr_grid_db,
        a.realizations,
        a.seed,
        scheme,
    )?;
    let record = DofRecord {
        n: a.n,
        offset: a.offset,
        snr_db_low: a.snr_low_db,
        snr_db_high: a.snr_high_db,
        realizations: a.realizations,
        dof_mean: dof.mean,
        dof_stderr: dof.stderr,
        singular_skips: dof.singular_skips,
    };
    Ok(match a.output.format {
        Format::Json => pretty(&json!({
            "seed": a.seed,
            "scheme": scheme,
            "dof": record,
            "rates": rates,
        })),
        Format::Csv => {
            let mut s = comment(invocation, Some(a.seed));
            s.push_str(DofRecord::CSV_HEADER);
            s.push('\n');
            s.push_str(&record.csv_row());
            s.push('\n');
            s.push_str("# sum rate per slot (bits)\n");
            s.push_str("snr_db,rate_mean,rate_stderr,singular_skips\n");
            for r in &rates {
                writeln!(
                    s,
                    "{},{:.6},{:.6},{}",
                    r.snr_db, r.rate_mean, r.rate_stderr, r.singular_skips
                )
                .unwrap();
            }
            s
        }
    })
}

pub fn cmd_pairing(a: &PairingArgs, invocation: &str) -> crate::Result<String> {
    let opts = ReportOptions {
        budget: a.budget,
        skip_oracle: a.skip_oracle,
        samples: a.samples,
        seed: a.seed,
    };
    let report = pairing_report(a.n, a.k, &opts)?;
    Ok(match a.output.format {
        Format::Json => pretty(&report.to_json()),
        Format::Csv => {
            let mut s = comment(invocation, Some(a.seed));
            s.push_str(pairing::PairingReport::CSV_HEADER);
            s.push('\n');
            s.push_str(&report.csv_row());
            s.push('\n');
            s
        }
    })
}

pub fn cmd_sweep_fig4(a: &SweepArgs, invocation: &str) -> crate::Result<String> {
    if a.n_values.is_empty() {
        return Err(invalid("--n-values must be nonempty"));
    }
    if a.k_min < 2 || a.k_max < a.k_min {
        return Err(invalid("need 2 <= --k-min <= --k-max"));
    }
    let ks: Vec<u64> = (a.k_min..=a.k_max).collect();
    let opts = ReportOptions {
        budget: a.budget,
        skip_oracle: !a.exact,
        samples: a.samples,
        seed: a.seed,
    };
    let rows = lower_bound_sweep(&a.n_values, &ks, a.exact, &opts)?;
    Ok(match a.output.format {
        Format::Json => pretty(&serde_json::Value::Array(
            rows.iter()
                .map(|r| {
                    json!({
                        "N": r.n,
                        "K": r.k,
                        "lower_bound": to_decimal(&r.lower_bound, 6),
                        "lower_bound_exact": r.lower_bound.to_string(),
                        "exact": r.exact.as_ref().map(|p| p.to_string()),
                        "mc": r.monte_carlo,
                    })
                })
                .collect(),
        )),
        Format::Csv => {
            let mut s = comment(invocation, Some(a.seed));
            s.push_str("N,K,lower_bound");
            if a.exact {
                s.push_str(",exact");
            }
            if a.samples > 0 {
                s.push_str(",mc,mc_stderr");
            }
            s.push('\n');
            for r in &rows {
                write!(s, "{},{},{}", r.n, r.k, to_decimal(&r.lower_bound, 6)).unwrap();
                if a.exact {
                    write!(
                        s,
                        ",{}",
                        r.exact
                            .as_ref()
                            .map(|p| to_decimal(p, 6))
                            .unwrap_or_default()
                    )
                    .unwrap();
                }
                if let Some(mc) = r.monte_carlo {
                    write!(s, ",{:.6},{:.6}", mc.estimate, mc.stderr).unwrap();
                }
                s.push('\n');
            }
            s
        }
    })
}
