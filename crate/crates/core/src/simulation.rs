//! Monte Carlo simulation of the canonical SDE
//! `dR = (aR + b)dt + Σ_k d_k^{1/α_k} R(t−)^{1/α_k} dZ_k(t)`
//! with a full-truncation Euler scheme, plus the estimators used to check
//! the model's distributional properties.

use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig12;
use crate::model::{generator_on_exponential, GcirParams};
use crate::stable_noise::StableIncrementSampler;

/// Positivity treatment of the Euler step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Positivity {
    /// Positive part inside the coefficients; the stored value is floored at
    /// zero while the auxiliary state is not.
    #[default]
    FullTruncation,
}

/// Time discretization and sampling setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub positivity: Positivity,
    /// Store every `record_every`-th step (the final step is always stored).
    #[serde(default = "one")]
    pub record_every: usize,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

fn one() -> usize {
    1
}

/// Default step for long runs, 2⁻¹⁰ years.
pub const DEFAULT_DT: f64 = 1.0 / 1024.0;

impl SchemeConfig {
    /// `n_steps = horizon / dt`, which must be an integer up to rounding.
    pub fn new(horizon: f64, dt: f64, n_paths: usize, seed: u64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite() && horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("need dt > 0 and horizon > 0 (got {dt}, {horizon})")));
        }
        let steps = (horizon / dt).round();
        if steps < 1.0 || (steps * dt - horizon).abs() > 1e-9 * horizon {
            return Err(Error::domain(format!("horizon {horizon} is not a multiple of dt {dt}")));
        }
        let cfg = Self {
            dt,
            n_steps: steps as usize,
            n_paths,
            seed,
            positivity: Positivity::FullTruncation,
            record_every: 1,
            threads: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every;
        self
    }

    /// Stores only the initial and the final value.
    pub fn terminal_only(mut self) -> Self {
        self.record_every = self.n_steps;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.n_steps as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::domain(format!("dt must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 || self.n_paths == 0 {
            return Err(Error::domain("n_steps and n_paths must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::domain("record_every must be at least 1"));
        }
        if self.threads == Some(0) {
            return Err(Error::domain("threads must be at least 1"));
        }
        Ok(())
    }

    fn recorded_steps(&self) -> Vec<usize> {
        let mut steps: Vec<usize> = (0..=self.n_steps).step_by(self.record_every).collect();
        if *steps.last().expect("step 0 is recorded") != self.n_steps {
            steps.push(self.n_steps);
        }
        steps
    }
}

/// Simulated paths on the recorded grid, stored path by path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    times: Vec<f64>,
    values: Vec<f64>,
    n_paths: usize,
    params: GcirParams,
    r0: f64,
}

struct Driver {
    coef: f64,
    exponent: f64,
    sampler: StableIncrementSampler,
}

/// Simulates `cfg.n_paths` independent paths started at `r0`.
///
/// Path `i` draws from a ChaCha8 stream selected by `(seed, i)`, so the
/// output does not depend on the number of threads.
pub fn simulate(params: &GcirParams, r0: f64, cfg: &SchemeConfig) -> Result<PathEnsemble> {
    if !(r0 >= 0.0 && r0.is_finite()) {
        return Err(Error::domain(format!("r0 must be finite and nonnegative, got {r0}")));
    }
    cfg.validate()?;
    let d = params.to_canonical()?.d;
    let drivers: Vec<Driver> = params
        .components()
        .iter()
        .zip(&d)
        .map(|(c, &dk)| {
            let alpha = c.alpha.value();
            Ok(Driver {
                coef: dk.powf(1.0 / alpha),
                exponent: 1.0 / alpha,
                sampler: StableIncrementSampler::new(c.alpha, cfg.dt)?,
            })
        })
        .collect::<Result<_>>()?;

    let steps = cfg.recorded_steps();
    let n_rec = steps.len();
    let times: Vec<f64> = steps.iter().map(|&k| k as f64 * cfg.dt).collect();
    let (a, b, dt) = (params.a, params.b, cfg.dt);
    let mut values = vec![0.0; cfg.n_paths * n_rec];

    let run = |values: &mut [f64]| {
        values.par_chunks_mut(n_rec).enumerate().for_each(|(i, row)| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(i as u64);
            // `x` is the unfloored auxiliary state; only its positive part is stored.
            let mut x = r0;
            row[0] = x;
            let mut next = 1;
            for k in 1..=cfg.n_steps {
                let r = x.max(0.0);
                if r > 0.0 || b != 0.0 {
                    x += (a * r + b) * dt;
                    if r > 0.0 {
                        for drv in &drivers {
                            let scale = if drv.exponent == 0.5 { r.sqrt() } else { r.powf(drv.exponent) };
                            x += drv.coef * scale * drv.sampler.sample(&mut rng);
                        }
                    }
                }
                if next < n_rec && steps[next] == k {
                    row[next] = x.max(0.0);
                    next += 1;
                }
            }
        });
    };
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::domain(format!("cannot start {n} worker threads: {e}")))?
            .install(|| run(&mut values)),
        None => run(&mut values),
    }
    Ok(PathEnsemble { times, values, n_paths: cfg.n_paths, params: params.clone(), r0 })
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn from_iter(values: impl Iterator<Item = f64>) -> Self {
        let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
        for v in values {
            n += 1;
            let delta = v - mean;
            mean += delta / n as f64;
            m2 += delta * (v - mean);
        }
        let stderr = if n > 1 { (m2 / (n - 1) as f64 / n as f64).sqrt() } else { 0.0 };
        Self { mean, stderr }
    }

    /// `(mean − target)/stderr`, zero when both numerator and error vanish.
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = self.mean - target;
        if diff == 0.0 {
            0.0
        } else {
            diff / self.stderr
        }
    }
}

impl PathEnsemble {
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn params(&self) -> &GcirParams {
        &self.params
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn path(&self, i: usize) -> &[f64] {
        let n = self.times.len();
        &self.values[i * n..(i + 1) * n]
    }

    /// All path values at recorded time index `j`.
    pub fn at(&self, j: usize) -> Vec<f64> {
        self.values.iter().skip(j).step_by(self.times.len()).copied().collect()
    }

    pub fn terminal(&self) -> Vec<f64> {
        self.at(self.times.len() - 1)
    }

    /// Recorded time index closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        self.times
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 - t).abs().total_cmp(&(y.1 - t).abs()))
            .map(|(j, _)| j)
            .expect("ensembles have at least one time")
    }

    /// Sample mean of `R` at each recorded time.
    pub fn means(&self) -> Vec<Estimate> {
        (0..self.times.len()).map(|j| Estimate::from_iter(self.at(j).into_iter())).collect()
    }

    /// Writes `time,path_id,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "time,path_id,value")?;
        for i in 0..self.n_paths {
            for (t, v) in self.times.iter().zip(self.path(i)) {
                writeln!(out, "{},{},{}", sig12(*t), i, sig12(*v))?;
            }
        }
        Ok(())
    }

    /// Binary dump: `b"GCIR"`, a version byte, then little-endian
    /// `u64 n_paths`, `u64 n_times`, `f64 r0`, the times and the values path
    /// by path.
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&[BINARY_VERSION])?;
        out.write_all(&(self.n_paths as u64).to_le_bytes())?;
        out.write_all(&(self.times.len() as u64).to_le_bytes())?;
        out.write_all(&self.r0.to_le_bytes())?;
        for v in self.times.iter().chain(&self.values) {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }
}

pub const BINARY_MAGIC: &[u8; 4] = b"GCIR";
pub const BINARY_VERSION: u8 = 1;

/// Contents of a binary ensemble dump.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleDump {
    pub n_paths: usize,
    pub r0: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

pub fn read_binary<R: Read>(mut input: R) -> Result<EnsembleDump> {
    let bad = |m: &str| Error::Parse { line: 0, message: m.to_string() };
    let mut header = [0u8; 5];
    input.read_exact(&mut header)?;
    if &header[..4] != BINARY_MAGIC {
        return Err(bad("missing GCIR magic"));
    }
    if header[4] != BINARY_VERSION {
        return Err(bad("unsupported ensemble version"));
    }
    let mut word = [0u8; 8];
    let mut next = |input: &mut R| -> Result<[u8; 8]> {
        input.read_exact(&mut word)?;
        Ok(word)
    };
    let n_paths = u64::from_le_bytes(next(&mut input)?) as usize;
    let n_times = u64::from_le_bytes(next(&mut input)?) as usize;
    let r0 = f64::from_le_bytes(next(&mut input)?);
    let total = n_paths
        .checked_add(1)
        .and_then(|p| p.checked_mul(n_times))
        .ok_or_else(|| bad("ensemble dimensions overflow"))?;
    let mut floats = Vec::with_capacity(total.min(1 << 24));
    for _ in 0..total {
        floats.push(f64::from_le_bytes(next(&mut input)?));
    }
    let values = floats.split_off(n_times);
    Ok(EnsembleDump { n_paths, r0, times: floats, values })
}

/// `ℰ(t) = e^{at}r0 + (b/a)(e^{at} − 1)`, or `r0 + bt` when `a = 0`.
pub fn mean_formula(params: &GcirParams, r0: f64, t: f64) -> f64 {
    let a = params.a;
    if a == 0.0 {
        r0 + params.b * t
    } else {
        (a * t).exp() * r0 + params.b * (a * t).exp_m1() / a
    }
}

/// Sample mean against the mean formula at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCheck {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub formula: f64,
    pub z: f64,
}

pub fn mean_check(ensemble: &PathEnsemble) -> Vec<MeanCheck> {
    ensemble
        .times
        .iter()
        .zip(ensemble.means())
        .map(|(&t, est)| {
            let formula = mean_formula(&ensemble.params, ensemble.r0, t);
            MeanCheck { t, mean: est.mean, stderr: est.stderr, formula, z: est.z_score(formula) }
        })
        .collect()
}

/// z-scores of the centered martingale `e^{−at}(R(t) − ℰ(t))` at each
/// recorded time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub times: Vec<f64>,
    pub z_scores: Vec<f64>,
    pub max_abs_z: f64,
}

pub fn martingale_check(ensemble: &PathEnsemble) -> MartingaleReport {
    let a = ensemble.params.a;
    let z_scores: Vec<f64> = ensemble
        .times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let centre = mean_formula(&ensemble.params, ensemble.r0, t);
            let scale = (-a * t).exp();
            Estimate::from_iter(ensemble.at(j).into_iter().map(|r| scale * (r - centre))).z_score(0.0)
        })
        .collect();
    let max_abs_z = z_scores.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    MartingaleReport { times: ensemble.times.clone(), z_scores, max_abs_z }
}

/// Monte Carlo estimate of the generator on `e^{−λx}` against its closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorCheck {
    pub empirical: f64,
    pub analytic: f64,
    pub stderr: f64,
    pub z: f64,
}

/// `(𝔼e^{−λR(h)} − e^{−λx})/h` from paths started at `x` with step `h/20`.
pub fn generator_mc_check(
    params: &GcirParams,
    x: f64,
    lambda: f64,
    h: f64,
    n_paths: usize,
    seed: u64,
) -> Result<GeneratorCheck> {
    if !(h > 0.0 && h <= 1e-3) || !(lambda > 0.0) {
        return Err(Error::domain(format!("need 0 < h <= 1e-3 and lambda > 0 (got {h}, {lambda})")));
    }
    let mut cfg = SchemeConfig::new(h, h / 20.0, n_paths, seed)?.terminal_only();
    cfg.n_steps = 20;
    let ensemble = simulate(params, x, &cfg)?;
    let base = (-lambda * x).exp();
    let est = Estimate::from_iter(ensemble.terminal().into_iter().map(|r| ((-lambda * r).exp() - base) / h));
    let analytic = generator_on_exponential(params, x, lambda);
    Ok(GeneratorCheck { empirical: est.mean, analytic, stderr: est.stderr, z: est.z_score(analytic) })
}

/// Hill estimate of the tail index from the `k` largest samples:
/// `k / Σ_{i≤k} ln(X_(i)/X_(k+1))`.
pub fn hill_tail_index(samples: &[f64], k: usize) -> Result<f64> {
    if k < 2 || k >= samples.len() {
        return Err(Error::domain(format!("Hill needs 2 <= k < n (k = {k}, n = {})", samples.len())));
    }
    let mut sorted: Vec<f64> = samples.to_vec();
    let pivot = sorted.len() - k - 1;
    sorted.select_nth_unstable_by(pivot, |x, y| x.total_cmp(y));
    let threshold = sorted[pivot];
    if !(threshold > 0.0) {
        return Err(Error::domain("the (k+1)-th largest sample must be positive"));
    }
    let sum: f64 = sorted[pivot + 1..].iter().map(|x| (x / threshold).ln()).sum();
    Ok(k as f64 / sum)
}

/// Hill estimates at `k/2`, `k` and `2k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HillReport {
    pub k: usize,
    pub estimate: f64,
    pub at_half_k: f64,
    pub at_double_k: f64,
    /// True when the three estimates spread by more than 15%.
    pub unstable: bool,
}

pub fn hill_report(samples: &[f64], k: usize) -> Result<HillReport> {
    let estimate = hill_tail_index(samples, k)?;
    let at_half_k = hill_tail_index(samples, (k / 2).max(2))?;
    let at_double_k = hill_tail_index(samples, (2 * k).min(samples.len() - 1))?;
    let lo = estimate.min(at_half_k).min(at_double_k);
    let hi = estimate.max(at_half_k).max(at_double_k);
    Ok(HillReport { k, estimate, at_half_k, at_double_k, unstable: hi > 1.15 * lo })
}

/// Sample mean of `R^p` at each recorded time.
pub fn empirical_moment(ensemble: &PathEnsemble, p: f64) -> Vec<Estimate> {
    let alpha_g = ensemble.params.alpha_min();
    if p >= alpha_g {
        log::warn!("moment of order {p} >= alpha_g = {alpha_g} is infinite; the estimate will not settle");
    }
    (0..ensemble.times.len())
        .map(|j| Estimate::from_iter(ensemble.at(j).into_iter().map(|r| r.powf(p))))
        .collect()
}
