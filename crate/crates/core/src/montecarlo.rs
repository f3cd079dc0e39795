//! Seeded link-level simulation: uniform symbols, Nakagami fading per antenna,
//! in-phase Gaussian noise of variance `σ²/2`, b-bit quantization and ML detection.
//!
//! Every `(point, batch)` pair draws from its own ChaCha8 stream
//! `seed_from_u64(seed)` with stream id `(point << 32) | batch`, so results
//! do not depend on how batches are scheduled across threads.

use crate::detector::{ml_detect_midpoint, ml_detect_simo, quantize, Symbol};
use crate::error::{Error, Result};
use crate::system::{db_to_linear, symbol_energy, ChannelModel, Constellation, FadingSampler, Quantizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Batches evaluated per wave in target-error mode; fixed so the stopping
/// point does not depend on the thread count.
const WAVE: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub constellation: Constellation,
    pub quantizer: Quantizer,
    /// Fading parameters; `sigma2` is replaced per point by `E_s / SNR`.
    pub channel: ChannelModel,
    pub snr_db: Vec<f64>,
    pub trials: u64,
    #[serde(default = "default_antennas")]
    pub antennas: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_batch")]
    pub batch_size: u64,
    /// Stop a point once this many errors are counted (whole batches, in
    /// batch order). `trials` remains the budget.
    #[serde(default)]
    pub target_errors: Option<u64>,
}

fn default_antennas() -> usize {
    1
}

fn default_batch() -> u64 {
    1 << 16
}

impl SimSpec {
    pub fn new(constellation: Constellation, quantizer: Quantizer, channel: ChannelModel, snr_db: Vec<f64>, trials: u64) -> Self {
        Self {
            constellation,
            quantizer,
            channel,
            snr_db,
            trials,
            antennas: 1,
            seed: 0,
            batch_size: default_batch(),
            target_errors: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_antennas(mut self, antennas: usize) -> Self {
        self.antennas = antennas;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Domain("trials must be >= 1".into()));
        }
        if self.antennas == 0 {
            return Err(Error::Domain("antennas must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Domain("batch_size must be >= 1".into()));
        }
        if let Some(s) = self.snr_db.iter().find(|s| !s.is_finite()) {
            return Err(Error::Domain(format!("snr_db {s} must be finite")));
        }
        Ok(())
    }
}

/// Error-count estimate at one operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    /// `None` for the noiseless regime.
    pub snr_db: Option<f64>,
    pub trials: u64,
    pub errors: u64,
    pub sep_hat: f64,
    /// Binomial standard error `√(p̂(1-p̂)/n)`.
    pub stderr: f64,
}

impl SimEstimate {
    fn from_counts(snr_db: Option<f64>, errors: u64, trials: u64) -> Self {
        let p = errors as f64 / trials as f64;
        Self {
            snr_db,
            trials,
            errors,
            sep_hat: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        }
    }

    /// `(sep_hat - p) / stderr`, using the reference value's own binomial
    /// error when no errors were observed.
    pub fn z_score(&self, p: f64) -> f64 {
        let se = if self.stderr > 0.0 {
            self.stderr
        } else {
            (p * (1.0 - p) / self.trials as f64).sqrt()
        };
        (self.sep_hat - p) / se
    }
}

/// ML decision from per-antenna gains and outputs: the midpoint rule for a
/// single antenna, the product likelihood otherwise.
pub fn detect(c: &Constellation, q: &Quantizer, h: &[f64], y: &[i32], sigma2: f64) -> Result<Symbol> {
    if h.len() == 1 && y.len() == 1 {
        ml_detect_midpoint(c, q, h[0], y[0])
    } else {
        ml_detect_simo(c, q, h, y, sigma2)
    }
}

struct Link<'a> {
    c: &'a Constellation,
    q: &'a Quantizer,
    fading: FadingSampler,
    noise_std: f64,
    sigma2: f64,
    antennas: usize,
}

impl Link<'_> {
    fn symbol_from_ordinal(&self, k: usize) -> Symbol {
        let half = self.c.half();
        if k < half {
            Symbol::positive(k)
        } else {
            Symbol::negative(k - half)
        }
    }

    /// Errors in `n` trials on one stream.
    fn run_batch(&self, rng: &mut ChaCha8Rng, n: u64) -> Result<u64> {
        let order = self.c.order();
        let mut h = vec![0.0; self.antennas];
        let mut y = vec![0i32; self.antennas];
        let mut errors = 0;
        for _ in 0..n {
            let sent = self.symbol_from_ordinal(rng.random_range(0..order));
            let x = sent.value(self.c);
            for a in 0..self.antennas {
                h[a] = self.fading.amplitude(rng).max(f64::MIN_POSITIVE);
                let w: f64 = if self.noise_std > 0.0 {
                    self.noise_std * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                y[a] = quantize(self.q, h[a] * x + w);
            }
            if detect(self.c, self.q, &h, &y, self.sigma2)? != sent {
                errors += 1;
            }
        }
        Ok(errors)
    }
}

fn batch_rng(seed: u64, point: u64, batch: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((point << 32) | batch);
    rng
}

fn run_point(spec: &SimSpec, link: &Link<'_>, point: u64) -> Result<(u64, u64)> {
    let batches = spec.trials.div_ceil(spec.batch_size);
    if batches > u32::MAX as u64 {
        return Err(Error::Domain("too many batches for the stream layout".into()));
    }
    let size = |b: u64| spec.batch_size.min(spec.trials - b * spec.batch_size);
    let one = |b: u64| -> Result<(u64, u64)> {
        let n = size(b);
        let mut rng = batch_rng(spec.seed, point, b);
        Ok((link.run_batch(&mut rng, n)?, n))
    };
    match spec.target_errors {
        None => {
            let parts = (0..batches).into_par_iter().map(one).collect::<Result<Vec<_>>>()?;
            Ok(parts.iter().fold((0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1)))
        }
        Some(target) => {
            let (mut errors, mut trials) = (0, 0);
            let mut start = 0;
            while start < batches {
                let end = (start + WAVE).min(batches);
                let parts = (start..end).into_par_iter().map(one).collect::<Result<Vec<_>>>()?;
                for (e, n) in parts {
                    errors += e;
                    trials += n;
                    if errors >= target {
                        return Ok((errors, trials));
                    }
                }
                start = end;
            }
            Ok((errors, trials))
        }
    }
}

/// Simulates every SNR point of `spec`.
pub fn simulate(spec: &SimSpec) -> Result<Vec<SimEstimate>> {
    spec.validate()?;
    let es = symbol_energy(&spec.constellation);
    let fading = spec.channel.sampler();
    spec.snr_db
        .iter()
        .enumerate()
        .map(|(point, &db)| {
            let sigma2 = es / db_to_linear(db);
            let link = Link {
                c: &spec.constellation,
                q: &spec.quantizer,
                fading,
                noise_std: (0.5 * sigma2).sqrt(),
                sigma2,
                antennas: spec.antennas,
            };
            let (errors, trials) = run_point(spec, &link, point as u64)?;
            Ok(SimEstimate::from_counts(Some(db), errors, trials))
        })
        .collect()
}

/// Simulates the noiseless regime (`σ² = 0`, detector sees `|h| x` exactly).
/// The SNR list of `spec` is ignored. Single antenna only.
pub fn simulate_noiseless(spec: &SimSpec) -> Result<SimEstimate> {
    spec.validate()?;
    if spec.antennas != 1 {
        return Err(Error::Domain("noiseless simulation supports a single antenna".into()));
    }
    let link = Link {
        c: &spec.constellation,
        q: &spec.quantizer,
        fading: spec.channel.sampler(),
        noise_std: 0.0,
        sigma2: 0.0,
        antennas: 1,
    };
    let (errors, trials) = run_point(spec, &link, 0)?;
    Ok(SimEstimate::from_counts(None, errors, trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(snr: Vec<f64>, trials: u64) -> SimSpec {
        SimSpec::new(
            Constellation::new(vec![1.0, 3.0]).unwrap(),
            Quantizer::new(vec![2.0], 2).unwrap(),
            ChannelModel::noiseless(1.0, 1.0).unwrap(),
            snr,
            trials,
        )
    }

    #[test]
    fn counts_are_consistent() {
        let mut s = spec(vec![10.0], 10_000);
        s.batch_size = 3000;
        let e = simulate(&s).unwrap()[0];
        assert_eq!(e.trials, 10_000);
        assert_eq!(e.sep_hat, e.errors as f64 / 1e4);
        let p = e.sep_hat;
        assert!((e.stderr - (p * (1.0 - p) / 1e4).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn random_guess_at_very_low_snr() {
        let e = simulate(&spec(vec![-60.0], 200_000)).unwrap()[0];
        assert!((e.sep_hat - 0.75).abs() < 3.0 * e.stderr, "{e:?}");
    }

    #[test]
    fn reproducible_across_batch_scheduling() {
        let s = spec(vec![5.0, 15.0], 50_000).with_seed(42);
        let a = simulate(&s).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| simulate(&s).unwrap());
        assert_eq!(a, b);
        let c = simulate(&s.clone().with_seed(43)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn target_error_mode_stops_on_batch_boundary() {
        let mut s = spec(vec![0.0], 1_000_000);
        s.batch_size = 1000;
        s.target_errors = Some(500);
        let e = simulate(&s).unwrap()[0];
        assert!(e.errors >= 500 && e.trials % 1000 == 0 && e.trials < 1_000_000);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        assert_eq!(pool.install(|| simulate(&s).unwrap())[0], e);
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(simulate(&spec(vec![1.0], 0)).is_err());
        assert!(simulate(&spec(vec![1.0], 10).with_antennas(0)).is_err());
        assert!(simulate_noiseless(&spec(vec![], 10).with_antennas(2)).is_err());
    }
}
