//! Job configuration shared by the command-line flags and `pamq run`.

use pamq_core::optimizer::DesignVariables;
use pamq_core::sep::QuantizerKind;
use pamq_core::{ChannelModel, Constellation, Quantizer, UniformQuantizer};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Sep,
    Optimize,
    Floor,
    Dvo,
    Simulate,
    CompareAqnm,
}

/// Inclusive grid, either `"start:step:stop"` or an explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Range(String),
    List(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            Grid::List(v) => {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(CliError::Usage("grid values must be finite".into()));
                }
                Ok(v.clone())
            }
            Grid::Range(s) => parse_range(s),
        }
    }
}

/// Parses `start:step:stop` (inclusive, `step > 0`, `stop >= start`).
pub fn parse_range(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || CliError::Usage(format!("grid '{s}' must be start:step:stop"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|_| bad());
    let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if !(start.is_finite() && stop.is_finite() && step > 0.0 && step.is_finite() && stop >= start) {
        return Err(bad());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    if n > 1_000_000 {
        return Err(CliError::Usage(format!("grid '{s}' has too many points")));
    }
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

/// Parses `lo:hi`.
pub fn parse_window(s: &str) -> Result<(f64, f64), CliError> {
    let bad = || CliError::Usage(format!("window '{s}' must be lo:hi with lo < hi"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let lo = a.trim().parse::<f64>().map_err(|_| bad())?;
    let hi = b.trim().parse::<f64>().map_err(|_| bad())?;
    if !(lo < hi) {
        return Err(bad());
    }
    Ok((lo, hi))
}

fn one() -> f64 {
    1.0
}

fn four() -> usize {
    4
}

fn two() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default = "one")]
    pub m: f64,
    #[serde(default = "one")]
    pub omega: f64,
    #[serde(default = "four")]
    pub order: usize,
    #[serde(default = "two")]
    pub bits: u32,
    /// Positive amplitudes `ρ_0 < … < ρ_{M/2-1}`; defaults to `1, 3, 5, …`.
    #[serde(default)]
    pub constellation: Option<Vec<f64>>,
    /// Positive boundaries `q_1 < … < q_K`.
    #[serde(default)]
    pub boundaries: Option<Vec<f64>>,
    /// Uniform quantizer step (alternative to `boundaries`).
    #[serde(default)]
    pub uniform_step: Option<f64>,
}

impl Default for SystemSpec {
    fn default() -> Self {
        Self {
            m: 1.0,
            omega: 1.0,
            order: 4,
            bits: 2,
            constellation: None,
            boundaries: None,
            uniform_step: None,
        }
    }
}

impl SystemSpec {
    pub fn constellation(&self) -> Result<Constellation, CliError> {
        let c = match &self.constellation {
            Some(a) => Constellation::new(a.clone())?,
            None => Constellation::equidistant(self.order, 1.0)?,
        };
        if c.order() != self.order {
            return Err(CliError::Usage(format!(
                "constellation lists {} amplitudes but M = {} needs {}",
                c.half(),
                self.order,
                self.order / 2
            )));
        }
        Ok(c)
    }

    pub fn has_quantizer(&self) -> bool {
        self.boundaries.is_some() || self.uniform_step.is_some()
    }

    pub fn quantizer(&self) -> Result<Quantizer, CliError> {
        match (&self.boundaries, self.uniform_step) {
            (Some(_), Some(_)) => Err(CliError::Usage("give either boundaries or uniform_step, not both".into())),
            (Some(q), None) => Ok(Quantizer::new(q.clone(), self.bits)?),
            (None, Some(step)) => Ok(UniformQuantizer { step, bits: self.bits }.materialize()?),
            (None, None) => Err(CliError::Usage("this command needs a quantizer (--q or --step)".into())),
        }
    }

    pub fn channel(&self) -> Result<ChannelModel, CliError> {
        Ok(ChannelModel::noiseless(self.m, self.omega)?)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub snr_db: Option<Grid>,
    /// Sweep of the single boundary of a 2-bit quantizer.
    #[serde(default)]
    pub q1: Option<Grid>,
}

fn default_starts() -> usize {
    16
}

fn default_max_iterations() -> usize {
    2000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSpec {
    #[serde(default = "default_variables")]
    pub variables: DesignVariables,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_variables() -> DesignVariables {
    DesignVariables::QuantizerOnly
}

impl Default for OptimizeSpec {
    fn default() -> Self {
        Self {
            variables: default_variables(),
            starts: default_starts(),
            max_iterations: default_max_iterations(),
        }
    }
}

fn default_trials() -> u64 {
    1_000_000
}

fn default_antennas() -> usize {
    1
}

fn default_batch() -> u64 {
    1 << 16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSpec {
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_antennas")]
    pub antennas: usize,
    #[serde(default = "default_batch")]
    pub batch_size: u64,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        Self {
            trials: default_trials(),
            antennas: default_antennas(),
            batch_size: default_batch(),
        }
    }
}

fn default_kind() -> QuantizerKind {
    QuantizerKind::Nonuniform
}

fn default_window() -> (f64, f64) {
    (20.0, 50.0)
}

fn default_dvo_trials() -> u64 {
    10_000_000
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DvoSpec {
    #[serde(default = "default_kind")]
    pub kind: QuantizerKind,
    #[serde(default = "default_window")]
    pub window: (f64, f64),
    #[serde(default = "default_antennas")]
    pub antennas: usize,
    #[serde(default = "default_dvo_trials")]
    pub trials: u64,
    /// Optimize the constellation together with the quantizer.
    #[serde(default = "default_true")]
    pub joint: bool,
    #[serde(default = "default_starts")]
    pub starts: usize,
}

impl Default for DvoSpec {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            window: default_window(),
            antennas: default_antennas(),
            trials: default_dvo_trials(),
            joint: true,
            starts: default_starts(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloorMode {
    /// Exact floor and its bounds for the given system.
    Exact,
    /// Optimal uniform and geometric-boundary floors over a range of resolutions.
    Optimal,
    /// Floor bound along a geometric-constellation schedule.
    Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FloorSpec {
    #[serde(default = "default_floor_mode")]
    pub mode: FloorMode,
    /// Resolutions for `optimal` mode.
    #[serde(default)]
    pub bits: Option<Grid>,
    /// Ratios `ρ` for `schedule` mode.
    #[serde(default)]
    pub rhos: Option<Grid>,
    /// Exponent `a` of `q_1 = √(C² ρ^a)` for `schedule` mode.
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default = "default_kind")]
    pub kind: QuantizerKind,
}

fn default_floor_mode() -> FloorMode {
    FloorMode::Exact
}

impl Default for FloorSpec {
    fn default() -> Self {
        Self {
            mode: FloorMode::Exact,
            bits: None,
            rhos: None,
            a: None,
            kind: default_kind(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AqnmSpec {
    /// Distortion factor; defaults to `1 - D` of the Lloyd-Max quantizer.
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<String>,
    #[serde(default)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    pub command: Command,
    #[serde(default)]
    pub system: SystemSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub noiseless: bool,
    #[serde(default)]
    pub optimize: OptimizeSpec,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default)]
    pub dvo: DvoSpec,
    #[serde(default)]
    pub floor: FloorSpec,
    #[serde(default)]
    pub aqnm: AqnmSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl JobConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            system: SystemSpec::default(),
            sweep: SweepSpec::default(),
            noiseless: false,
            optimize: OptimizeSpec::default(),
            simulate: SimulateSpec::default(),
            dvo: DvoSpec::default(),
            floor: FloorSpec::default(),
            aqnm: AqnmSpec::default(),
            output: OutputSpec::default(),
            seed: 0,
            threads: None,
        }
    }

    /// Applies `PAMQ_SEED` when set.
    pub fn apply_env(&mut self) -> Result<(), CliError> {
        if let Ok(s) = std::env::var("PAMQ_SEED") {
            self.seed = s
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("PAMQ_SEED '{s}' is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn snr_grid(&self) -> Result<Vec<f64>, CliError> {
        match &self.sweep.snr_db {
            Some(g) => g.values(),
            None => Err(CliError::Usage("this command needs an SNR grid (--snr-db)".into())),
        }
    }
}

/// One job or a list of jobs, as accepted by `pamq run`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JobFile {
    One(Box<JobConfig>),
    Many(Vec<JobConfig>),
}

impl JobFile {
    pub fn parse(text: &str) -> Result<Vec<JobConfig>, CliError> {
        // parse as a value first so errors point at the offending line
        let value: serde_json::Value = serde_json::from_str(text).map_err(CliError::Config)?;
        if value.is_array() {
            let jobs: Vec<JobConfig> = serde_json::from_str(text).map_err(CliError::Config)?;
            Ok(jobs)
        } else {
            let job: JobConfig = serde_json::from_str(text).map_err(CliError::Config)?;
            Ok(vec![job])
        }
    }
}
