//! Fitting model parameters to an observed spot-rate curve by minimizing
//! the squared relative distance `Σ_i (y(T_i) − ŷ(T_i))²/ŷ(T_i)²` with a
//! multi-start Nelder–Mead search.

mod nelder_mead;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use nelder_mead::{Minimum, NelderMead};

use crate::error::{Error, Result};
use crate::market_data::YieldCurve;
use crate::model::{Component, GcirParams};
use crate::term_structure::{spot_rate_from_price, PricingProblem};

/// Lower margin of free indices above 1.
pub const ALPHA_EPS: f64 = 1e-3;
/// Upper cap of free indices; `α = 2` is only reached by fixing it.
pub const ALPHA_CAP: f64 = 2.0 - 1e-6;
/// Upper bound of the calibrated short rate.
pub const R0_MAX: f64 = 0.2;
/// Weight given to components appended when seeding a larger family.
pub const NEAR_ZERO_ETA: f64 = 1e-12;

/// Model family to calibrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    /// `g = 1`, `α = 2`.
    Cir,
    /// `g = 1`, `α` free.
    StableCir,
    /// `g = 2`, `α₁ = 2`, `α₂` free.
    AlphaCir,
    /// `g = k`; indices free, with `α₁ = 2` as a separately fitted branch.
    Gcir(usize),
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelFamily::Cir => write!(f, "CIR"),
            ModelFamily::StableCir => write!(f, "stable-CIR"),
            ModelFamily::AlphaCir => write!(f, "alpha-CIR"),
            ModelFamily::Gcir(k) => write!(f, "GCIR({k})"),
        }
    }
}

impl FromStr for ModelFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let family = match lower.as_str() {
            "cir" => ModelFamily::Cir,
            "stable-cir" => ModelFamily::StableCir,
            "alpha-cir" => ModelFamily::AlphaCir,
            _ => {
                let k = lower
                    .strip_prefix("gcir(")
                    .and_then(|r| r.strip_suffix(')'))
                    .and_then(|k| k.parse::<usize>().ok())
                    .ok_or_else(|| Error::domain(format!("unknown model family {s:?}")))?;
                if k == 0 {
                    return Err(Error::domain("GCIR(k) needs k >= 1"));
                }
                ModelFamily::Gcir(k)
            }
        };
        Ok(family)
    }
}

impl Serialize for ModelFamily {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelFamily {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Parameter structure searched by one optimizer run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    gaussian_lead: bool,
    g: usize,
}

impl ModelFamily {
    pub fn components(&self) -> usize {
        match self {
            ModelFamily::Cir | ModelFamily::StableCir => 1,
            ModelFamily::AlphaCir => 2,
            ModelFamily::Gcir(k) => *k,
        }
    }

    fn layouts(&self) -> Vec<Layout> {
        match *self {
            ModelFamily::Cir => vec![Layout { gaussian_lead: true, g: 1 }],
            ModelFamily::StableCir => vec![Layout { gaussian_lead: false, g: 1 }],
            ModelFamily::AlphaCir => vec![Layout { gaussian_lead: true, g: 2 }],
            ModelFamily::Gcir(k) => vec![Layout { gaussian_lead: true, g: k }, Layout { gaussian_lead: false, g: k }],
        }
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn softplus_inv(y: f64) -> f64 {
    let y = y.max(1e-300);
    if y > 30.0 {
        y
    } else {
        y.exp_m1().ln()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-300, 1.0 - 1e-16);
    (p / (1.0 - p)).ln()
}

impl Layout {
    fn free_alphas(&self) -> usize {
        self.g - usize::from(self.gaussian_lead)
    }

    /// `θ = [a, softplus⁻¹ b, logit(r0/R0_MAX), softplus⁻¹ η_1..η_g, α-params]`.
    /// Free indices are nested: `α = L + (U − L)σ(θ)` with `U` the previous
    /// index (or the cap) and `L = 1 + ε`.
    fn decode(&self, theta: &[f64]) -> Result<(GcirParams, f64)> {
        let a = theta[0];
        let b = softplus(theta[1]);
        let r0 = R0_MAX * logistic(theta[2]);
        let etas = theta[3..3 + self.g].iter().map(|&t| softplus(t));
        let lo = 1.0 + ALPHA_EPS;
        let mut upper = ALPHA_CAP;
        let mut alphas = Vec::with_capacity(self.g);
        if self.gaussian_lead {
            alphas.push(2.0);
        }
        for &t in &theta[3 + self.g..] {
            let alpha = lo + (upper - lo) * logistic(t);
            alphas.push(alpha);
            upper = alpha;
        }
        let components = alphas
            .into_iter()
            .zip(etas)
            .map(|(alpha, eta)| Component::new(alpha, eta))
            .collect::<Result<Vec<_>>>()?;
        Ok((GcirParams::new(a, b, components)?, r0))
    }

    /// Inverse of [`Layout::decode`]; a seed with fewer components is padded
    /// with near-zero weights. `None` when the seed does not fit the layout.
    fn encode(&self, params: &GcirParams, r0: f64) -> Option<Vec<f64>> {
        let comps = params.components();
        if comps.len() > self.g || comps[0].alpha.is_gaussian() != self.gaussian_lead {
            return None;
        }
        let mut theta = vec![params.a, softplus_inv(params.b), logit(r0 / R0_MAX)];
        for k in 0..self.g {
            theta.push(softplus_inv(comps.get(k).map_or(NEAR_ZERO_ETA, |c| c.eta)));
        }
        let lo = 1.0 + ALPHA_EPS;
        let mut upper = ALPHA_CAP;
        for k in usize::from(self.gaussian_lead)..self.g {
            let t = match comps.get(k) {
                Some(c) => logit((c.alpha.value() - lo) / (upper - lo)),
                None => 0.0,
            };
            theta.push(t);
            upper = lo + (upper - lo) * logistic(t);
        }
        Some(theta)
    }
}

/// The calibration error functional `Σ_i (y(T_i) − ŷ(T_i))²/ŷ(T_i)²`.
pub fn error_functional(params: &GcirParams, r0: f64, curve: &YieldCurve) -> Result<f64> {
    check_curve(curve)?;
    let model = crate::term_structure::spot_curve(params, r0, &curve.maturities())?;
    Ok(squared_relative_error(&model, &curve.rates()))
}

fn squared_relative_error(model: &[f64], market: &[f64]) -> f64 {
    model.iter().zip(market).map(|(y, m)| ((y - m) / m).powi(2)).sum()
}

fn check_curve(curve: &YieldCurve) -> Result<()> {
    if let Some(p) = curve.points().iter().find(|p| p.rate == 0.0) {
        return Err(Error::domain(format!("market rate at maturity {} is zero; relative error undefined", p.maturity)));
    }
    Ok(())
}

/// Optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    pub diameter_tol: f64,
    /// Worker threads for the restarts; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self { restarts: 8, seed: 0, max_iterations: 2000, diameter_tol: 1e-10, threads: None }
    }
}

/// One maturity of the fitted curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub maturity: f64,
    pub market: f64,
    pub model: f64,
    /// `(model − market)/market`
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Best error of each run, in run order.
    pub restart_errors: Vec<f64>,
    pub evaluations: usize,
    pub seeded: bool,
}

/// Outcome of [`calibrate`]. `error` equals the sum of squared residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub family: ModelFamily,
    pub params: GcirParams,
    pub r0: f64,
    pub error: f64,
    pub error_x100: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    pub residuals: Vec<Residual>,
    pub diagnostics: Diagnostics,
}

/// Objective with a cache of bond coefficients at the curve maturities,
/// keyed by the rounded model part of `θ` (the short rate enters only
/// through `y = (e^{A + B r0} − 1)/T`).
struct Objective<'a> {
    layout: Layout,
    maturities: &'a [f64],
    market: &'a [f64],
    cache: HashMap<Vec<i64>, Option<Vec<(f64, f64)>>>,
}

impl<'a> Objective<'a> {
    fn coefficients(&mut self, theta: &[f64]) -> Option<Vec<(f64, f64)>> {
        let key: Vec<i64> = theta
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != 2)
            .map(|(_, t)| (t * 2f64.powi(40)).round() as i64)
            .collect();
        if let Some(hit) = self.cache.get(&key) {
            return hit.clone();
        }
        let value = self.price(theta);
        self.cache.insert(key, value.clone());
        value
    }

    fn price(&self, theta: &[f64]) -> Option<Vec<(f64, f64)>> {
        let (params, _) = self.layout.decode(theta).ok()?;
        let horizon = *self.maturities.last()?;
        let coeffs = PricingProblem::new(params, horizon)
            .ok()?
            .with_maturities(self.maturities)
            .sparse()
            .solve()
            .ok()?;
        self.maturities.iter().map(|&t| coeffs.at(t).ok()).collect()
    }

    fn value(&mut self, theta: &[f64]) -> f64 {
        let Some(coeffs) = self.coefficients(theta) else {
            return f64::INFINITY;
        };
        let r0 = R0_MAX * logistic(theta[2]);
        let model: Vec<f64> = coeffs
            .iter()
            .zip(self.maturities)
            .map(|(&(a, b), &t)| spot_rate_from_price((-a - b * r0).exp(), t))
            .collect();
        let err = squared_relative_error(&model, self.market);
        if err.is_finite() {
            err
        } else {
            f64::INFINITY
        }
    }
}

/// A scattered starting point for restart `index`.
fn scattered_start(layout: Layout, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut theta = vec![
        rng.random_range(-1.0..2.0),
        softplus_inv(rng.random_range(0.001..0.05)),
        logit(rng.random_range(0.0005..0.05) / R0_MAX),
    ];
    for _ in 0..layout.g {
        theta.push(softplus_inv(rng.random_range(0.01..1.0)));
    }
    for _ in 0..layout.free_alphas() {
        theta.push(rng.random_range(-2.0..2.0));
    }
    theta
}

struct RunResult {
    layout: Layout,
    minimum: Minimum,
    evaluations: usize,
    seeded: bool,
}

const POLISH_ROUNDS: usize = 3;

fn run(
    layout: Layout,
    start: Vec<f64>,
    step: f64,
    seeded: bool,
    maturities: &[f64],
    market: &[f64],
    config: &CalibrationConfig,
) -> RunResult {
    let mut objective = Objective { layout, maturities, market, cache: HashMap::new() };
    let nm = NelderMead { diameter_tol: config.diameter_tol, max_iterations: config.max_iterations };
    let mut minimum = nm.minimize(|x| objective.value(x), &start, step);
    let mut evaluations = minimum.evaluations;
    let mut iterations = minimum.iterations;
    // Restarting from the best vertex with a fresh simplex undoes collapse
    // along flat directions.
    for _ in 0..POLISH_ROUNDS {
        if iterations >= config.max_iterations {
            break;
        }
        let budget = NelderMead { max_iterations: config.max_iterations - iterations, ..nm };
        let next = budget.minimize(|x| objective.value(x), &minimum.x, 0.05);
        evaluations += next.evaluations;
        iterations += next.iterations;
        let improved = next.value < minimum.value;
        if next.value <= minimum.value {
            minimum = Minimum { iterations, evaluations, ..next };
        }
        if !improved {
            break;
        }
    }
    minimum.iterations = iterations;
    minimum.evaluations = evaluations;
    RunResult { layout, minimum, evaluations, seeded }
}

/// Calibrates `family` to `curve`.
pub fn calibrate(family: ModelFamily, curve: &YieldCurve, config: &CalibrationConfig) -> Result<CalibrationReport> {
    calibrate_seeded(family, curve, config, None)
}

/// As [`calibrate`], with run 0 of every matching branch started from
/// `seed = (params, r0)`, padded with near-zero components if it has fewer
/// than the family. The reported error never exceeds the seed's error.
pub fn calibrate_seeded(
    family: ModelFamily,
    curve: &YieldCurve,
    config: &CalibrationConfig,
    seed: Option<(&GcirParams, f64)>,
) -> Result<CalibrationReport> {
    check_curve(curve)?;
    if config.restarts == 0 {
        return Err(Error::domain("calibration needs at least one restart"));
    }
    let maturities = curve.maturities();
    let market = curve.rates();

    let mut jobs: Vec<(Layout, Vec<f64>, f64, bool)> = Vec::new();
    for (branch, layout) in family.layouts().into_iter().enumerate() {
        let seeded_start = seed.and_then(|(p, r0)| layout.encode(p, r0));
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(branch as u64);
        for restart in 0..config.restarts {
            let start = scattered_start(layout, &mut rng);
            match (&seeded_start, restart) {
                (Some(s), 0) => jobs.push((layout, s.clone(), 0.1, true)),
                _ => jobs.push((layout, start, 0.5, false)),
            }
        }
    }

    let execute = || -> Vec<RunResult> {
        jobs.par_iter()
            .map(|(layout, start, step, seeded)| run(*layout, start.clone(), *step, *seeded, &maturities, &market, config))
            .collect()
    };
    let results = match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::domain(format!("cannot start {n} worker threads: {e}")))?
            .install(execute),
        None => execute(),
    };

    // Minimum error, ties to the lowest run index.
    let best = results
        .iter()
        .enumerate()
        .min_by(|(i, x), (j, y)| x.minimum.value.total_cmp(&y.minimum.value).then(i.cmp(j)))
        .map(|(_, r)| r)
        .expect("at least one run");
    if !best.minimum.value.is_finite() {
        return Err(Error::Integration(format!("no {family} parameters priced the curve")));
    }
    let (params, r0) = best.layout.decode(&best.minimum.x)?;
    let model = crate::term_structure::spot_curve(&params, r0, &maturities)?;
    let residuals: Vec<Residual> = maturities
        .iter()
        .zip(&market)
        .zip(&model)
        .map(|((&maturity, &market), &model)| Residual {
            maturity,
            market,
            model,
            residual: (model - market) / market,
        })
        .collect();
    let error: f64 = residuals.iter().map(|r| r.residual * r.residual).sum();
    Ok(CalibrationReport {
        family,
        params,
        r0,
        error,
        error_x100: 100.0 * error,
        iterations: best.minimum.iterations,
        restarts: results.len(),
        converged: best.minimum.converged,
        residuals,
        diagnostics: Diagnostics {
            restart_errors: results.iter().map(|r| r.minimum.value).collect(),
            evaluations: results.iter().map(|r| r.evaluations).sum(),
            seeded: best.seeded,
        },
    })
}

/// Errors of the seeded chain CIR → α-CIR → GCIR(2) → GCIR(3), with
/// GCIR(1) seeded from CIR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NestingReport {
    pub cir: f64,
    pub alpha_cir: f64,
    /// Errors of GCIR(1), GCIR(2), GCIR(3).
    pub gcir: Vec<f64>,
    /// True when every nested step is no worse than its seed plus `1e-8`.
    pub monotone: bool,
    pub reports: Vec<CalibrationReport>,
}

/// Tolerance of the nesting comparisons.
pub const NESTING_TOL: f64 = 1e-8;

pub fn nested_error_monotonicity(curve: &YieldCurve, config: &CalibrationConfig) -> Result<NestingReport> {
    let seed_of = |r: &CalibrationReport| (r.params.clone(), r.r0);
    let cir = calibrate(ModelFamily::Cir, curve, config)?;
    let (p, r0) = seed_of(&cir);
    let alpha_cir = calibrate_seeded(ModelFamily::AlphaCir, curve, config, Some((&p, r0)))?;
    let gcir1 = calibrate_seeded(ModelFamily::Gcir(1), curve, config, Some((&p, r0)))?;
    let better = if alpha_cir.error <= gcir1.error { &alpha_cir } else { &gcir1 };
    let (p, r0) = seed_of(better);
    let gcir2 = calibrate_seeded(ModelFamily::Gcir(2), curve, config, Some((&p, r0)))?;
    let (p, r0) = seed_of(&gcir2);
    let gcir3 = calibrate_seeded(ModelFamily::Gcir(3), curve, config, Some((&p, r0)))?;
    let monotone = alpha_cir.error <= cir.error + NESTING_TOL
        && gcir1.error <= cir.error + NESTING_TOL
        && gcir2.error <= alpha_cir.error.min(gcir1.error) + NESTING_TOL
        && gcir3.error <= gcir2.error + NESTING_TOL;
    Ok(NestingReport {
        cir: cir.error,
        alpha_cir: alpha_cir.error,
        gcir: vec![gcir1.error, gcir2.error, gcir3.error],
        monotone,
        reports: vec![cir, alpha_cir, gcir1, gcir2, gcir3],
    })
}
