//! Dispatch of a validated job to the numerical engines.

use pamq_core::aqnm::aqnm_alpha;
use pamq_core::asymptotics::{
    dq_metric, dvo_experiment, floor_schedule, optimal_nonuniform_floor, optimal_uniform_floor, DvoExperiment,
};
use pamq_core::montecarlo::{simulate, simulate_noiseless, SimSpec};
use pamq_core::optimizer::{optimize_from, DesignProblem, DesignResult, DesignVariables};
use pamq_core::sep::{floor_bounds, sep_aqnm, sep_closed_form, sep_noiseless, sep_quadrature};
use pamq_core::system::db_to_linear;
use pamq_core::{ChannelModel, Constellation, Quantizer, SepResult};
use serde_json::{json, Value};

use crate::config::{Command, FloorMode, Format, JobConfig};
use crate::format::{sci, sci_list, Table};
use crate::CliError;

/// Artifacts of one job.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Main artifact, written to `output.path` (stdout when unset).
    pub body: Option<Vec<u8>>,
    /// Summary printed on stdout.
    pub summary: Option<String>,
    /// Designs whose optimizer did not meet its tolerance.
    pub nonconverged: usize,
}

/// Runs `job`, inside a dedicated pool when `threads` is set.
pub fn execute(job: &JobConfig) -> Result<Outcome, CliError> {
    match job.threads {
        Some(0) => Err(CliError::Usage("threads must be >= 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            pool.install(|| dispatch(job))
        }
        None => dispatch(job),
    }
}

fn dispatch(job: &JobConfig) -> Result<Outcome, CliError> {
    match job.command {
        Command::Sep => run_sep(job),
        Command::Optimize => run_optimize(job),
        Command::Floor => run_floor(job),
        Command::Dvo => run_dvo(job),
        Command::Simulate => run_simulate(job),
        Command::CompareAqnm => run_compare_aqnm(job),
    }
}

/// Exact SEP: finite series for integer `m`, quadrature otherwise, region
/// masses in the noiseless regime.
pub fn evaluate_sep(c: &Constellation, q: &Quantizer, ch: &ChannelModel) -> Result<SepResult, CliError> {
    let r = if ch.is_noiseless() {
        sep_noiseless(c, q, ch)?
    } else if ch.integer_m().is_some() {
        sep_closed_form(c, q, ch)?
    } else {
        sep_quadrature(c, q, ch)?
    };
    Ok(r)
}

fn table_outcome(job: &JobConfig, table: Table) -> Result<Outcome, CliError> {
    let body = match job.output.format.unwrap_or(Format::Csv) {
        Format::Csv => table.to_csv().map_err(|e| CliError::io("<csv>", e))?,
        Format::Json => json_lines(&table_json(&table)),
    };
    Ok(Outcome {
        body: Some(body),
        summary: None,
        nonconverged: 0,
    })
}

fn json_lines(v: &Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s.into_bytes()
}

/// Table as an array of objects; numeric cells become JSON numbers.
fn table_json(t: &Table) -> Value {
    Value::Array(
        t.rows
            .iter()
            .map(|r| {
                let obj = t
                    .header
                    .iter()
                    .zip(r)
                    .map(|(h, cell)| {
                        let v = match cell.parse::<f64>() {
                            Ok(x) if x.is_finite() && !cell.contains(';') => json!(x),
                            _ => json!(cell),
                        };
                        (h.to_string(), v)
                    })
                    .collect();
                Value::Object(obj)
            })
            .collect(),
    )
}

fn run_sep(job: &JobConfig) -> Result<Outcome, CliError> {
    let s = &job.system;
    let c = s.constellation()?;
    let base = s.channel()?;
    if let Some(q1_grid) = &job.sweep.q1 {
        if s.bits != 2 {
            return Err(CliError::Usage("a q1 sweep needs bits = 2 (one positive boundary)".into()));
        }
        let q1s = q1_grid.values()?;
        let snrs = job.snr_grid()?;
        let mut t = Table::new(&["q1", "snr_db", "sep", "method", "abs_error_est"]);
        for &q1 in &q1s {
            let q = Quantizer::new(vec![q1], 2)?;
            for &db in &snrs {
                let ch = ChannelModel::at_snr_db(s.m, s.omega, &c, db)?;
                let r = evaluate_sep(&c, &q, &ch)?;
                t.push(vec![sci(q1), sci(db), sci(r.value), r.method.as_str().into(), sci(r.abs_error_est)]);
            }
        }
        return table_outcome(job, t);
    }
    let q = s.quantizer()?;
    let mut t = Table::new(&["snr_db", "sep", "method", "abs_error_est"]);
    if job.noiseless {
        let r = evaluate_sep(&c, &q, &base)?;
        t.push(vec!["inf".into(), sci(r.value), r.method.as_str().into(), sci(r.abs_error_est)]);
    } else {
        for db in job.snr_grid()? {
            let ch = ChannelModel::at_snr_db(s.m, s.omega, &c, db)?;
            let r = evaluate_sep(&c, &q, &ch)?;
            t.push(vec![sci(db), sci(r.value), r.method.as_str().into(), sci(r.abs_error_est)]);
        }
    }
    table_outcome(job, t)
}

fn design_problem(job: &JobConfig, snr_db: Option<f64>) -> Result<DesignProblem, CliError> {
    let s = &job.system;
    let mut p = DesignProblem::new(s.channel()?, snr_db, s.order, s.bits, job.optimize.variables)
        .with_starts(job.optimize.starts)
        .with_seed(job.seed);
    p.max_iterations = job.optimize.max_iterations;
    if s.constellation.is_some() || job.optimize.variables != DesignVariables::GeometricNoiseless {
        p = p.with_constellation(s.constellation()?);
    }
    Ok(p)
}

fn design_json(snr_db: Option<f64>, d: &DesignResult) -> Value {
    let q = d.quantizer.boundaries();
    let ratios: Vec<f64> = q.windows(2).map(|w| w[0] / w[1]).collect();
    json!({
        "snr_db": snr_db,
        "boundaries": q,
        "amplitudes": d.constellation.amplitudes(),
        "sep": d.sep,
        "method": d.method.as_str(),
        "converged": d.converged,
        "starts": d.starts_used,
        "boundary_ratios": ratios,
    })
}

fn run_optimize(job: &JobConfig) -> Result<Outcome, CliError> {
    let points: Vec<Option<f64>> = if job.noiseless {
        vec![None]
    } else {
        job.snr_grid()?.into_iter().map(Some).collect()
    };
    let mut designs = Vec::with_capacity(points.len());
    let mut warm: Option<DesignResult> = None;
    for &db in &points {
        let p = design_problem(job, db)?;
        let d = optimize_from(&p, warm.as_ref())?;
        warm = Some(d.clone());
        designs.push((db, d));
    }
    let nonconverged = designs.iter().filter(|(_, d)| !d.converged).count();
    let default_format = if designs.len() == 1 { Format::Json } else { Format::Csv };
    let body = match job.output.format.unwrap_or(default_format) {
        Format::Json if designs.len() == 1 => json_lines(&design_json(designs[0].0, &designs[0].1)),
        Format::Json => json_lines(&Value::Array(designs.iter().map(|(db, d)| design_json(*db, d)).collect())),
        Format::Csv => {
            let mut t = Table::new(&["snr_db", "sep", "method", "converged", "boundaries", "amplitudes"]);
            for (db, d) in &designs {
                t.push(vec![
                    db.map_or_else(|| "inf".into(), sci),
                    sci(d.sep),
                    d.method.as_str().into(),
                    d.converged.to_string(),
                    sci_list(d.quantizer.boundaries()),
                    sci_list(d.constellation.amplitudes()),
                ]);
            }
            t.to_csv().map_err(|e| CliError::io("<csv>", e))?
        }
    };
    Ok(Outcome {
        body: Some(body),
        summary: None,
        nonconverged,
    })
}

fn integer_grid(values: &[f64], what: &str) -> Result<Vec<u32>, CliError> {
    values
        .iter()
        .map(|&b| {
            if b.fract() == 0.0 && (1.0..=64.0).contains(&b) {
                Ok(b as u32)
            } else {
                Err(CliError::Usage(format!("{what} value {b} must be an integer in [1, 64]")))
            }
        })
        .collect()
}

fn run_floor(job: &JobConfig) -> Result<Outcome, CliError> {
    let s = &job.system;
    let ch = s.channel()?;
    match job.floor.mode {
        FloorMode::Exact => {
            let c = s.constellation()?;
            let q = s.quantizer()?;
            let exact = sep_noiseless(&c, &q, &ch)?;
            let fb = floor_bounds(&c, &q, &ch)?;
            let v = json!({
                "floor": exact.value,
                "f_lower": fb.lower.value,
                "f_upper": fb.upper.value,
                "ratio_assumption": fb.ratio_assumption,
            });
            Ok(Outcome {
                body: Some(json_lines(&v)),
                summary: None,
                nonconverged: 0,
            })
        }
        FloorMode::Optimal => {
            let c = s.constellation()?;
            let grid = match &job.floor.bits {
                Some(g) => g.values()?,
                None => (4..=10).map(f64::from).collect(),
            };
            let bits = integer_grid(&grid, "bits")?;
            let mut t = Table::new(&[
                "bits",
                "uniform_step",
                "uniform_floor",
                "uniform_log2_floor",
                "nonuniform_q1",
                "nonuniform_floor",
                "nonuniform_log2_floor",
            ]);
            let ln2 = std::f64::consts::LN_2;
            for &b in &bits {
                let u = optimal_uniform_floor(&c, &ch, b)?;
                let n = optimal_nonuniform_floor(&c, &ch, b)?;
                t.push(vec![
                    b.to_string(),
                    sci(u.scale),
                    sci(u.ln_floor.exp()),
                    sci(u.ln_floor / ln2),
                    sci(n.scale),
                    sci(n.ln_floor.exp()),
                    sci(n.ln_floor / ln2),
                ]);
            }
            let mut out = table_outcome(job, t)?;
            let (lo, hi) = (*bits.iter().min().unwrap_or(&0), *bits.iter().max().unwrap_or(&0));
            if hi > lo {
                let du = dq_metric(|b| Ok(optimal_uniform_floor(&c, &ch, b)?.ln_floor), lo..=hi)?;
                let dn = dq_metric(|b| Ok(optimal_nonuniform_floor(&c, &ch, b)?.ln_floor), lo..=hi)?;
                let v = json!({
                    "uniform": {"slope": du.slope, "r2": du.r2, "successive": du.successive},
                    "nonuniform": {"slope": dn.slope, "r2": dn.r2, "successive": dn.successive, "diverging": dn.diverging},
                });
                out.summary = Some(serde_json::to_string(&v).expect("json value serializes"));
            }
            Ok(out)
        }
        FloorMode::Schedule => {
            let rhos = job
                .floor
                .rhos
                .as_ref()
                .ok_or_else(|| CliError::Usage("schedule mode needs rhos".into()))?
                .values()?;
            let a = job
                .floor
                .a
                .ok_or_else(|| CliError::Usage("schedule mode needs the exponent a".into()))?;
            let pts = floor_schedule(&rhos, a, s.bits, s.order, &ch, job.floor.kind)?;
            let mut t = Table::new(&["rho", "bound"]);
            for (rho, bound) in pts {
                t.push(vec![sci(rho), sci(bound)]);
            }
            table_outcome(job, t)
        }
    }
}

fn run_dvo(job: &JobConfig) -> Result<Outcome, CliError> {
    let s = &job.system;
    let d = &job.dvo;
    let snr_db = match &job.sweep.snr_db {
        Some(g) => g.values()?,
        None => crate::config::parse_range(&format!("{}:2.5:{}", d.window.0, d.window.1))?,
    };
    let exp = DvoExperiment {
        m: s.m,
        omega: s.omega,
        bits: s.bits,
        order: s.order,
        kind: d.kind,
        antennas: u32::try_from(d.antennas).map_err(|_| CliError::Usage("too many antennas".into()))?,
        snr_db,
        window: d.window,
        starts: d.starts,
        seed: job.seed,
        trials: d.trials,
        joint: d.joint,
    };
    let report = dvo_experiment(&exp)?;
    let mut t = Table::new(&["snr_db", "sep", "method"]);
    for p in &report.curve {
        t.push(vec![sci(p.snr_db), sci(p.sep), p.method.clone()]);
    }
    let summary = json!({
        "slope": report.estimate.slope,
        "theory": report.theory,
        "theory_exact": report.theory_exact,
        "r2": report.estimate.r2,
        "window": [report.estimate.window.0, report.estimate.window.1],
        "points": report.estimate.points,
    });
    let mut out = table_outcome(job, t)?;
    if job.output.path.is_none() {
        out.body = None;
    }
    out.summary = Some(serde_json::to_string(&summary).expect("json value serializes"));
    Ok(out)
}

fn run_simulate(job: &JobConfig) -> Result<Outcome, CliError> {
    let s = &job.system;
    let c = s.constellation()?;
    let q = s.quantizer()?;
    let snrs = if job.noiseless { vec![] } else { job.snr_grid()? };
    let mut spec = SimSpec::new(c, q, s.channel()?, snrs, job.simulate.trials)
        .with_seed(job.seed)
        .with_antennas(job.simulate.antennas);
    spec.batch_size = job.simulate.batch_size;
    let estimates = if job.noiseless {
        vec![simulate_noiseless(&spec)?]
    } else {
        simulate(&spec)?
    };
    let mut t = Table::new(&["snr_db", "trials", "errors", "sep_hat", "stderr", "method"]);
    for e in estimates {
        t.push(vec![
            e.snr_db.map_or_else(|| "inf".into(), sci),
            e.trials.to_string(),
            e.errors.to_string(),
            sci(e.sep_hat),
            sci(e.stderr),
            "monte_carlo".into(),
        ]);
    }
    table_outcome(job, t)
}

/// One row of an exact-versus-AQNM comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AqnmRow {
    pub snr_db: f64,
    pub exact: f64,
    pub aqnm: f64,
    pub alpha: f64,
    /// `|aqnm - exact| / exact`.
    pub rel_gap: f64,
}

/// Exact SEP (given quantizer, or quantizer-only optimum per SNR with
/// continuation) against the AQNM approximation.
pub fn compare_aqnm(job: &JobConfig) -> Result<Vec<AqnmRow>, CliError> {
    let s = &job.system;
    let c = s.constellation()?;
    let alpha = match job.aqnm.alpha {
        Some(a) => a,
        None => aqnm_alpha(s.bits)?,
    };
    let fixed = if s.has_quantizer() { Some(s.quantizer()?) } else { None };
    let mut warm: Option<DesignResult> = None;
    let mut rows = Vec::new();
    for db in job.snr_grid()? {
        let exact = match &fixed {
            Some(q) => evaluate_sep(&c, q, &ChannelModel::at_snr_db(s.m, s.omega, &c, db)?)?.value,
            None => {
                let mut p = design_problem(job, Some(db))?;
                p.variables = DesignVariables::QuantizerOnly;
                let d = optimize_from(&p, warm.as_ref())?;
                let v = d.sep;
                warm = Some(d);
                v
            }
        };
        let aqnm = sep_aqnm(&c, db_to_linear(db), alpha)?.value;
        rows.push(AqnmRow {
            snr_db: db,
            exact,
            aqnm,
            alpha,
            rel_gap: (aqnm - exact).abs() / exact,
        });
    }
    Ok(rows)
}

fn run_compare_aqnm(job: &JobConfig) -> Result<Outcome, CliError> {
    let mut t = Table::new(&["snr_db", "exact", "aqnm", "alpha", "rel_gap"]);
    for r in compare_aqnm(job)? {
        t.push(vec![sci(r.snr_db), sci(r.exact), sci(r.aqnm), sci(r.alpha), sci(r.rel_gap)]);
    }
    table_outcome(job, t)
}
