use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use irs_autocorr::estimator::{estimate, EstimateStatus};
use irs_autocorr::experiment::{
    self, read_truth_csv, write_truth_csv, ExperimentSpec, RunOptions, Table, TOOL_VERSION,
};
use irs_autocorr::measurement::Campaign;
use irs_autocorr::numerics::{normalized_frobenius_error, HermitianMatrix};
use irs_autocorr::sdp::write_objective_csv;
use irs_autocorr::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_ITER_CAPPED: u8 = 5;

/// IRS channel autocorrelation estimation from received-power measurements.
#[derive(Parser)]
#[command(name = "irs-autocorr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file (`key = value` lines); desk defaults otherwise.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `scenario.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `experiment.trials`.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads. Results do not depend on it.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Ratio trajectory per trial at the first T of the grid.
    Convergence(Common),
    /// Normalized Frobenius error of the proposed and trace-min estimates.
    ErrorVsT(Common),
    /// Effective channel gain of every configured scheme.
    GainVsT(Common),
    /// Estimate from a campaign CSV.
    Estimate {
        campaign: PathBuf,
        /// `n,re,im` file with the true equivalent channel.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Also write the estimate as `i,j,re,im` rows.
        #[arg(long)]
        matrix_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate one trial's campaign.
    GenCampaign {
        /// Campaign length; the largest T of the grid by default.
        #[arg(long)]
        t: Option<usize>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
        /// Also write the true equivalent channel as `n,re,im` rows.
        #[arg(long)]
        truth_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        Error::NumericalFailure { .. } => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn load_spec(c: &Common) -> Result<ExperimentSpec, Error> {
    let mut spec = match &c.config {
        Some(path) => ExperimentSpec::from_config_str(&std::fs::read_to_string(path)?)?,
        None => ExperimentSpec::default(),
    };
    if let Some(seed) = c.seed {
        spec.scenario.seed = seed;
    }
    if let Some(trials) = c.trials {
        spec.trials = trials;
    }
    spec.validate()?;
    Ok(spec)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn options(c: &Common) -> RunOptions {
    RunOptions { parallel: c.parallel.max(1) }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Convergence(c) => {
            let spec = load_spec(&c)?;
            let results = experiment::convergence(&spec, options(&c))?;
            let mut iters: Vec<usize> =
                results.iter().filter_map(|r| r.iterations_to_threshold(spec.estimator.epsilon)).collect();
            iters.sort_unstable();
            if let Some(m) = iters.get(iters.len() / 2) {
                eprintln!("{} of {} trials reached epsilon; median iterations {m}", iters.len(), results.len());
            }
            Table::convergence(&results, spec.bits).write_csv(&spec, output(c.out.as_deref())?)?;
        }
        Command::ErrorVsT(c) => {
            let spec = load_spec(&c)?;
            let rows = experiment::error_vs_t(&spec, options(&c))?;
            Table::errors(&rows).write_csv(&spec, output(c.out.as_deref())?)?;
        }
        Command::GainVsT(c) => {
            let spec = load_spec(&c)?;
            let rows = experiment::gain_vs_t(&spec, options(&c))?;
            Table::gains(&rows).write_csv(&spec, output(c.out.as_deref())?)?;
        }
        Command::GenCampaign { t, trial, truth_out, common } => {
            let spec = load_spec(&common)?;
            let t = t.unwrap_or(*spec.t_grid.last().expect("validated grid"));
            let tr = experiment::trial_with_length(&spec, trial, t)?;
            tr.campaign.write_csv(output(common.out.as_deref())?)?;
            if let Some(p) = truth_out {
                write_truth_csv(&tr.channel.h_bar, BufWriter::new(File::create(p)?))?;
            }
        }
        Command::Estimate { campaign, truth, matrix_out, common } => {
            let spec = load_spec(&common)?;
            let camp = Campaign::read_csv(BufReader::new(File::open(&campaign)?))?;
            let truth = match truth {
                Some(p) => Some(read_truth_csv(BufReader::new(File::open(p)?))?),
                None => None,
            };
            let res = estimate(&camp, &spec.estimator)?;
            let error = match &truth {
                Some(h) => {
                    let h = HermitianMatrix::outer(h);
                    let target = if camp.bits == 1 { h.real_part() } else { h };
                    format!("{:e}", normalized_frobenius_error(&res.h_hat, &target)?)
                }
                None => String::new(),
            };
            let mut out = output(common.out.as_deref())?;
            writeln!(out, "# irs-autocorr {TOOL_VERSION} estimate b={} N={} T={}", camp.bits, camp.dim, camp.len())?;
            writeln!(out, "status,outer_iterations,final_ratio,max_power_residual_w,residual_flagged,error")?;
            writeln!(
                out,
                "{},{},{},{:e},{},{}",
                res.status.as_str(),
                res.outer_iterations,
                res.final_ratio().map_or_else(String::new, |g| format!("{g:e}")),
                res.max_power_residual,
                res.residual_flagged,
                error
            )?;
            out.flush()?;
            if let Some(p) = matrix_out {
                write_objective_csv(&res.h_hat, BufWriter::new(File::create(p)?))?;
            }
            return Ok(match res.status {
                EstimateStatus::Converged => 0,
                EstimateStatus::IterCapped => EXIT_ITER_CAPPED,
                EstimateStatus::SolverFailed => EXIT_SOLVER,
            });
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
