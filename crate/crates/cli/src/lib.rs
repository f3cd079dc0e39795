//! `pamq`: command-line front end for the SEP engines.

pub mod config;
pub mod format;
pub mod jobs;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use crate::config::{parse_range, parse_window, Command, FloorMode, Format, Grid, JobConfig, JobFile, SystemSpec};
use pamq_core::optimizer::DesignVariables;
use pamq_core::sep::QuantizerKind;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    /// Malformed JSON; the message carries line and column.
    #[error("invalid config: {0}")]
    Config(serde_json::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] pamq_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for invalid input, 2 for numerical failure.
    pub fn exit_code(&self) -> i32 {
        use pamq_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io { .. } => 1,
            CliError::Core(E::Quadrature { .. } | E::ProbabilityRange { .. } | E::InsufficientPoints { .. }) => 2,
            CliError::Core(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "pamq", version, about = "SEP of low-resolution ADC M-PAM receivers over Nakagami-m fading")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Exact SEP over an SNR grid (or a q1 sweep, or the noiseless floor).
    Sep(JobArgs),
    /// Minimum-SEP quantizer (and optionally constellation) design.
    Optimize(JobArgs),
    /// Error floors: exact, optimal over resolutions, or along a schedule.
    Floor(JobArgs),
    /// Decay-exponent experiment with theory comparison.
    Dvo(JobArgs),
    /// Monte Carlo link simulation.
    Simulate(JobArgs),
    /// Exact SEP against the AQNM approximation.
    CompareAqnm(JobArgs),
    /// Runs a JSON job file (one job or an array of jobs).
    Run {
        config: PathBuf,
        /// Overrides `threads` of every job.
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Args)]
struct JobArgs {
    /// JSON file with the system section; flags below override it.
    #[arg(long)]
    system: Option<PathBuf>,
    /// Nakagami shape m (>= 0.5).
    #[arg(long)]
    m: Option<f64>,
    /// Nakagami spread Ω.
    #[arg(long)]
    omega: Option<f64>,
    /// ADC resolution b.
    #[arg(long)]
    bits: Option<u32>,
    /// Modulation order M.
    #[arg(long = "mod")]
    order: Option<usize>,
    /// Positive amplitudes, e.g. 1,3.
    #[arg(long, value_delimiter = ',')]
    constellation: Option<Vec<f64>>,
    /// Positive quantizer boundaries, e.g. 0.5,1,2.
    #[arg(long, value_delimiter = ',')]
    q: Option<Vec<f64>>,
    /// Uniform quantizer step.
    #[arg(long)]
    step: Option<f64>,
    /// SNR grid in dB, start:step:stop or a comma list.
    #[arg(long = "snr-db")]
    snr_db: Option<String>,
    /// Boundary grid for a 2-bit q1 sweep, start:step:stop.
    #[arg(long = "q1-sweep")]
    q1_sweep: Option<String>,
    /// Noiseless (infinite-SNR) regime.
    #[arg(long)]
    noiseless: bool,
    /// Optimize the constellation together with the quantizer.
    #[arg(long)]
    joint: bool,
    /// Uniform quantizer (single step variable).
    #[arg(long)]
    uniform: bool,
    /// Optimize (ρ, q1) of the geometric constellation (noiseless).
    #[arg(long)]
    geometric: bool,
    /// Fit window in dB, lo:hi.
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    antennas: Option<usize>,
    /// Monte Carlo trials per point.
    #[arg(long)]
    trials: Option<u64>,
    /// Optimizer start points.
    #[arg(long)]
    starts: Option<usize>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// AQNM distortion factor (default: Lloyd-Max value for the resolution).
    #[arg(long)]
    alpha: Option<f64>,
    /// Floor mode: exact, optimal or schedule.
    #[arg(long = "floor-mode", value_parser = ["exact", "optimal", "schedule"])]
    floor_mode: Option<String>,
    /// Resolutions for the optimal floor mode, start:step:stop.
    #[arg(long = "bits-range")]
    bits_range: Option<String>,
    /// Ratios ρ for the schedule floor mode, start:step:stop or a comma list.
    #[arg(long)]
    rhos: Option<String>,
    /// Schedule exponent a.
    #[arg(long)]
    exponent: Option<f64>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<String>,
    /// Output format.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Print the equivalent JSON job and exit.
    #[arg(long = "emit-config")]
    emit_config: bool,
}

fn grid_arg(s: &str) -> Result<Grid, CliError> {
    if s.contains(':') {
        parse_range(s)?;
        Ok(Grid::Range(s.to_string()))
    } else {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("'{v}' is not a number")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Grid::List)
    }
}

fn read_file(path: &std::path::Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))
}

impl JobArgs {
    fn into_job(self, command: Command) -> Result<(JobConfig, bool), CliError> {
        let mut job = JobConfig::new(command);
        if let Some(p) = &self.system {
            job.system = serde_json::from_str::<SystemSpec>(&read_file(p)?).map_err(CliError::Config)?;
        }
        let s = &mut job.system;
        if let Some(v) = self.m {
            s.m = v;
        }
        if let Some(v) = self.omega {
            s.omega = v;
        }
        if let Some(v) = self.bits {
            s.bits = v;
        }
        if let Some(v) = self.order {
            s.order = v;
        }
        if self.constellation.is_some() {
            s.constellation = self.constellation;
        }
        if self.q.is_some() {
            s.boundaries = self.q;
        }
        if self.step.is_some() {
            s.uniform_step = self.step;
        }
        if let Some(g) = &self.snr_db {
            job.sweep.snr_db = Some(grid_arg(g)?);
        }
        if let Some(g) = &self.q1_sweep {
            job.sweep.q1 = Some(grid_arg(g)?);
        }
        job.noiseless = self.noiseless;
        let kind = if self.uniform {
            QuantizerKind::Uniform
        } else {
            QuantizerKind::Nonuniform
        };
        job.optimize.variables = match (self.geometric, self.joint, self.uniform) {
            (true, false, false) => DesignVariables::GeometricNoiseless,
            (true, _, _) => return Err(CliError::Usage("--geometric excludes --joint and --uniform".into())),
            (false, false, false) => DesignVariables::QuantizerOnly,
            (false, false, true) => DesignVariables::UniformStepOnly,
            (false, true, false) => DesignVariables::JointNonuniform,
            (false, true, true) => DesignVariables::JointUniform,
        };
        job.dvo.kind = kind;
        job.dvo.joint = self.joint;
        job.floor.kind = kind;
        if let Some(w) = &self.window {
            job.dvo.window = parse_window(w)?;
        }
        if let Some(a) = self.antennas {
            job.simulate.antennas = a;
            job.dvo.antennas = a;
        }
        if let Some(n) = self.trials {
            job.simulate.trials = n;
            job.dvo.trials = n;
        }
        if let Some(n) = self.starts {
            job.optimize.starts = n;
            job.dvo.starts = n;
        }
        job.threads = self.threads;
        if let Some(seed) = self.seed {
            job.seed = seed;
        }
        job.aqnm.alpha = self.alpha;
        if let Some(mode) = &self.floor_mode {
            job.floor.mode = match mode.as_str() {
                "exact" => FloorMode::Exact,
                "optimal" => FloorMode::Optimal,
                _ => FloorMode::Schedule,
            };
        }
        if let Some(g) = &self.bits_range {
            job.floor.bits = Some(grid_arg(g)?);
        }
        if let Some(g) = &self.rhos {
            job.floor.rhos = Some(grid_arg(g)?);
        }
        job.floor.a = self.exponent;
        job.output.path = self.out;
        job.output.format = self.format.as_deref().map(|f| if f == "json" { Format::Json } else { Format::Csv });
        Ok((job, self.emit_config))
    }
}

/// Runs one job and writes its artifacts; returns the exit code.
pub fn run_job(job: &JobConfig) -> Result<i32, CliError> {
    let out = jobs::execute(job)?;
    if let Some(body) = &out.body {
        let path = job.output.path.as_deref();
        format::emit(path, body).map_err(|e| CliError::io(path.unwrap_or("<stdout>"), e))?;
    }
    if let Some(summary) = &out.summary {
        println!("{summary}");
    }
    if out.nonconverged > 0 {
        eprintln!("pamq: {} design(s) did not converge", out.nonconverged);
        return Ok(2);
    }
    Ok(0)
}

fn run_inner(cli: Cli) -> Result<i32, CliError> {
    let (command, args) = match cli.command {
        Cmd::Sep(a) => (Command::Sep, a),
        Cmd::Optimize(a) => (Command::Optimize, a),
        Cmd::Floor(a) => (Command::Floor, a),
        Cmd::Dvo(a) => (Command::Dvo, a),
        Cmd::Simulate(a) => (Command::Simulate, a),
        Cmd::CompareAqnm(a) => (Command::CompareAqnm, a),
        Cmd::Run { config, threads } => {
            let mut jobs = JobFile::parse(&read_file(&config)?)?;
            let mut code = 0;
            for job in &mut jobs {
                job.apply_env()?;
                if threads.is_some() {
                    job.threads = threads;
                }
                code = code.max(run_job(job)?);
            }
            return Ok(code);
        }
    };
    let (mut job, emit) = args.into_job(command)?;
    if emit {
        println!("{}", serde_json::to_string_pretty(&job).expect("job serializes"));
        return Ok(0);
    }
    job.apply_env()?;
    run_job(&job)
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("pamq: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn job(args: &[&str]) -> JobConfig {
        let mut argv = vec!["pamq"];
        argv.extend_from_slice(args);
        let cli = Cli::try_parse_from(argv).unwrap();
        let (c, a) = match cli.command {
            Cmd::Sep(a) => (Command::Sep, a),
            Cmd::Optimize(a) => (Command::Optimize, a),
            Cmd::Dvo(a) => (Command::Dvo, a),
            _ => unreachable!(),
        };
        a.into_job(c).unwrap().0
    }

    #[test]
    fn flags_map_to_job() {
        let j = job(&[
            "sep", "--m", "1", "--omega", "1", "--bits", "2", "--mod", "4", "--constellation", "1,3", "--q", "1.5",
            "--snr-db", "0:2:40", "--out", "curve.csv",
        ]);
        assert_eq!(j.system.constellation, Some(vec![1.0, 3.0]));
        assert_eq!(j.system.boundaries, Some(vec![1.5]));
        assert_eq!(j.snr_grid().unwrap().len(), 21);
        assert_eq!(j.output.path.as_deref(), Some("curve.csv"));
        let j = job(&["dvo", "--bits", "3", "--joint", "--window", "20:50"]);
        assert!(j.dvo.joint);
        assert_eq!(j.dvo.window, (20.0, 50.0));
        let j = job(&["optimize", "--joint", "--uniform"]);
        assert_eq!(j.optimize.variables, DesignVariables::JointUniform);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(run(["pamq", "sep", "--bogus"]), 1);
        assert_eq!(run(["pamq", "sep", "--snr-db", "0:0:1"]), 1);
        assert_eq!(run(["pamq", "--help"]), 0);
        assert_eq!(CliError::Core(pamq_core::Error::Quadrature { value: 0.0, abs_error: 1.0 }).exit_code(), 2);
    }
}
