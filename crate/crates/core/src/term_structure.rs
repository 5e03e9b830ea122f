//! Zero-coupon bond prices `P(t,T) = exp(−A(T−t) − B(T−t)R(t))`.
//!
//! `B` solves `B′ = 1 + ℛ(B)`, `B(0) = 0` and `A′ = bB`, `A(0) = 0`. Both
//! are integrated with an adaptive Dormand–Prince scheme; `B` can also be
//! obtained by inverting the 𝒢-function, which serves as a cross-check.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig12;
use crate::model::{GFunction, GcirParams};
use crate::numerics::Dopri5;

/// Fine step of the default grid below two years (one week-ish, 1/48 y).
const SHORT_STEP: f64 = 1.0 / 48.0;
/// Step of the default grid beyond two years.
const LONG_STEP: f64 = 1.0 / 12.0;
const SHORT_END: f64 = 2.0;

/// A pricing request: parameters, horizon and integrator tolerances.
#[derive(Debug, Clone)]
pub struct PricingProblem {
    pub params: GcirParams,
    pub horizon: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Maturities that must appear exactly on the output grid.
    pub maturities: Vec<f64>,
    /// When false only `0`, the maturities and the horizon are tabulated.
    pub dense: bool,
}

impl PricingProblem {
    pub fn new(params: GcirParams, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain(format!("pricing horizon {horizon} must be positive")));
        }
        Ok(Self {
            params,
            horizon,
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            maturities: Vec::new(),
            dense: true,
        })
    }

    pub fn with_maturities(mut self, maturities: &[f64]) -> Self {
        self.maturities = maturities.to_vec();
        self
    }

    /// Tabulate only at the requested maturities (and the horizon).
    pub fn sparse(mut self) -> Self {
        self.dense = false;
        self
    }

    pub fn with_tolerances(mut self, rel_tol: f64, abs_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self.abs_tol = abs_tol;
        self
    }

    /// Output grid: the default dense grid (or just the endpoints) merged
    /// with the requested maturities inside `(0, horizon]`.
    pub fn grid(&self) -> Result<Vec<f64>> {
        let mut grid = vec![0.0];
        if self.dense {
            grid.extend(default_grid(self.horizon).into_iter().skip(1));
        } else {
            grid.push(self.horizon);
        }
        for &m in &self.maturities {
            if !(m >= 0.0) || m > self.horizon * (1.0 + 1e-12) {
                return Err(Error::domain(format!(
                    "maturity {m} outside [0, {}]",
                    self.horizon
                )));
            }
            grid.push(m.min(self.horizon));
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup_by(|x, y| (*x - *y).abs() <= 1e-12 * y.abs().max(1.0));
        Ok(grid)
    }

    fn solver(&self) -> Dopri5 {
        Dopri5::new(self.rel_tol, self.abs_tol)
    }

    /// Solves for `A` and `B` jointly.
    pub fn solve(&self) -> Result<BondCoefficients> {
        let grid = self.grid()?;
        let p = &self.params;
        let states = self.solver().solve_on_grid(
            |_, y: &[f64; 2]| [1.0 + p.branching(y[0].max(0.0)), p.b * y[0]],
            [0.0, 0.0],
            &grid,
        )?;
        BondCoefficients::from_states(grid, states.iter().map(|s| (s[1], s[0])))
    }
}

/// Default maturity grid: step 1/48 year up to 2 years, 1/12 thereafter,
/// always ending at `horizon`.
pub fn default_grid(horizon: f64) -> Vec<f64> {
    let mut grid = Vec::new();
    let short_n = (SHORT_END.min(horizon) / SHORT_STEP).floor() as usize;
    grid.extend((0..=short_n).map(|i| i as f64 * SHORT_STEP));
    if horizon > SHORT_END {
        let long_n = ((horizon - SHORT_END) / LONG_STEP).floor() as usize;
        grid.extend((1..=long_n).map(|i| SHORT_END + i as f64 * LONG_STEP));
    }
    if horizon - grid[grid.len() - 1] > 1e-12 {
        grid.push(horizon);
    }
    grid
}

/// Tabulated `A(v)`, `B(v)` on an ascending grid of times to maturity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondCoefficients {
    pub grid: Vec<f64>,
    pub a_values: Vec<f64>,
    pub b_values: Vec<f64>,
}

impl BondCoefficients {
    fn from_states(grid: Vec<f64>, states: impl Iterator<Item = (f64, f64)>) -> Result<Self> {
        let (a_values, b_values): (Vec<f64>, Vec<f64>) = states.unzip();
        if a_values.iter().chain(&b_values).any(|v| !v.is_finite()) {
            return Err(Error::Integration("non-finite bond coefficients".into()));
        }
        Ok(Self { grid, a_values, b_values })
    }

    pub fn horizon(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// `(A(v), B(v))` by linear interpolation between grid nodes.
    pub fn at(&self, v: f64) -> Result<(f64, f64)> {
        let g = &self.grid;
        if !(v >= 0.0) || v > self.horizon() * (1.0 + 1e-12) {
            return Err(Error::domain(format!(
                "time to maturity {v} outside the tabulated range [0, {}]",
                self.horizon()
            )));
        }
        let i = g.partition_point(|&x| x < v);
        if i < g.len() && (g[i] - v).abs() <= 1e-12 * v.max(1.0) {
            return Ok((self.a_values[i], self.b_values[i]));
        }
        if i == 0 {
            return Ok((self.a_values[0], self.b_values[0]));
        }
        if i == g.len() {
            let last = g.len() - 1;
            return Ok((self.a_values[last], self.b_values[last]));
        }
        let w = (v - g[i - 1]) / (g[i] - g[i - 1]);
        let lerp = |y: &[f64]| y[i - 1] + w * (y[i] - y[i - 1]);
        Ok((lerp(&self.a_values), lerp(&self.b_values)))
    }

    /// CSV with header `v,A,B` and 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("v,A,B\n");
        for ((v, a), b) in self.grid.iter().zip(&self.a_values).zip(&self.b_values) {
            let _ = writeln!(out, "{},{},{}", sig12(*v), sig12(*a), sig12(*b));
        }
        out
    }
}

/// `B` alone (the `A` column is left at zero).
pub fn solve_b(problem: &PricingProblem) -> Result<BondCoefficients> {
    let grid = problem.grid()?;
    let p = &problem.params;
    let states = problem.solver().solve_on_grid(
        |_, y: &[f64; 1]| [1.0 + p.branching(y[0].max(0.0))],
        [0.0],
        &grid,
    )?;
    BondCoefficients::from_states(grid, states.iter().map(|s| (0.0, s[0])))
}

/// Completes `b_part` with `A(v) = b ∫₀ᵛ B(s) ds`, integrating `A` as an
/// appended state of the `B` equation on the same grid.
pub fn solve_a(problem: &PricingProblem, b_part: BondCoefficients) -> Result<BondCoefficients> {
    let full = PricingProblem { maturities: b_part.grid.clone(), ..problem.clone() }.solve()?;
    let mut a_values = Vec::with_capacity(b_part.grid.len());
    for &v in &b_part.grid {
        a_values.push(full.at(v)?.0);
    }
    Ok(BondCoefficients { a_values, ..b_part })
}

/// `B(v)` as `𝒢⁻¹(v)`.
pub fn invert_g_for_b(params: &GcirParams, v: f64) -> Result<f64> {
    GFunction::new(params)?.inverse(v)
}

/// `P = exp(−A(v) − B(v)·r)` with `v = T − t`.
pub fn bond_price(coeffs: &BondCoefficients, time_to_maturity: f64, r: f64) -> Result<f64> {
    let (a, b) = coeffs.at(time_to_maturity)?;
    Ok((-a - b * r).exp())
}

/// Simple-compounding spot rates `y(T) = (1/T)(1/P(0,T) − 1)`.
pub fn model_spot_rates(coeffs: &BondCoefficients, maturities: &[f64], r0: f64) -> Result<Vec<f64>> {
    maturities
        .iter()
        .map(|&t| {
            if !(t > 0.0) {
                return Err(Error::domain(format!("spot rate needs a positive maturity, got {t}")));
            }
            let p = bond_price(coeffs, t, r0)?;
            let y = spot_rate_from_price(p, t);
            if !y.is_finite() {
                return Err(Error::Range(format!("bond price {p:e} at maturity {t} gives a non-finite spot rate")));
            }
            Ok(y)
        })
        .collect()
}

/// `y = (1/T)(1/P − 1)`.
pub fn spot_rate_from_price(price: f64, maturity: f64) -> f64 {
    (1.0 / price - 1.0) / maturity
}

/// Model spot rates for `params` and `r0` on `maturities`, solving the
/// pricing ODEs only at the maturities themselves.
pub fn spot_curve(params: &GcirParams, r0: f64, maturities: &[f64]) -> Result<Vec<f64>> {
    let horizon = maturities.iter().cloned().fold(0.0, f64::max);
    let coeffs = PricingProblem::new(params.clone(), horizon)?
        .with_maturities(maturities)
        .sparse()
        .solve()?;
    model_spot_rates(&coeffs, maturities, r0)
}

/// Solution `(σ(t,λ), ρ(t,λ))` of `∂σ/∂t = 1 + ℛ(σ)`, `σ(0,λ) = λ`,
/// `ρ = ∫₀ᵗ ℱ(σ(s,λ)) ds`; the claim `e^{−λR(t)}` is worth
/// `exp(−ρ − σx)` at time 0 when `R(0) = x`.
pub fn sigma_rho(params: &GcirParams, t: f64, lambda_claim: f64) -> Result<(f64, f64)> {
    if !(lambda_claim >= 0.0) {
        return Err(Error::domain(format!("claim parameter {lambda_claim} must be >= 0")));
    }
    if !(t >= 0.0) {
        return Err(Error::domain(format!("time {t} must be >= 0")));
    }
    if t == 0.0 {
        return Ok((lambda_claim, 0.0));
    }
    let states = Dopri5::default().solve_on_grid(
        |_, y: &[f64; 2]| [1.0 + params.branching(y[0].max(0.0)), params.immigration(y[0])],
        [lambda_claim, 0.0],
        &[0.0, t],
    )?;
    Ok((states[1][0], states[1][1]))
}

/// Price at time 0 of the claim `e^{−λR(t)}` paid at `t`, given `R(0) = x`.
pub fn exponential_claim_price(params: &GcirParams, t: f64, lambda_claim: f64, x: f64) -> Result<f64> {
    let (sigma, rho) = sigma_rho(params, t, lambda_claim)?;
    Ok((-rho - sigma * x).exp())
}

/// Closed-form CIR coefficients for `B′ = 1 + aB − ηB²`, `A′ = bB`:
/// with `γ = √(a² + 4η)`,
/// `B(v) = 2(e^{γv} − 1) / ((γ − a)(e^{γv} − 1) + 2γ)` and
/// `A(v) = −(b/η) ln(2γ e^{(γ−a)v/2} / ((γ − a)(e^{γv} − 1) + 2γ))`.
pub fn cir_closed_form(a: f64, b: f64, eta: f64, v: f64) -> (f64, f64) {
    let gamma = (a * a + 4.0 * eta).sqrt();
    let decay = (-gamma * v).exp();
    let grown = -(-gamma * v).exp_m1(); // 1 − e^{−γv}
    let denom = (gamma - a) * grown + 2.0 * gamma * decay;
    let b_coef = 2.0 * grown / denom;
    let a_coef = -(b / eta) * ((2.0 * gamma).ln() - 0.5 * (gamma + a) * v - denom.ln());
    (a_coef, b_coef)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::lambda_zero;

    fn unit_gaussian(b: f64) -> GcirParams {
        GcirParams::cir(0.0, b, 1.0).unwrap()
    }

    #[test]
    fn default_grid_shape() {
        let g = default_grid(30.0);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 1.0 / 48.0).abs() < 1e-15);
        assert!((g[96] - 2.0).abs() < 1e-12);
        assert!((g[97] - (2.0 + 1.0 / 12.0)).abs() < 1e-12);
        assert!((g[g.len() - 1] - 30.0).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let short = default_grid(0.1);
        assert_eq!(short[short.len() - 1], 0.1);
    }

    #[test]
    fn grid_merges_maturities() {
        let p = PricingProblem::new(unit_gaussian(0.0), 5.0).unwrap().with_maturities(&[0.3, 1.0]);
        let g = p.grid().unwrap();
        assert!(g.contains(&0.3));
        assert_eq!(g.iter().filter(|&&x| x == 1.0).count(), 1);
        let bad = PricingProblem::new(unit_gaussian(0.0), 5.0).unwrap().with_maturities(&[6.0]);
        assert!(bad.grid().is_err());
    }

    #[test]
    fn b_is_tanh() {
        let p = PricingProblem::new(unit_gaussian(0.0), 30.0).unwrap();
        let c = solve_b(&p).unwrap();
        assert_eq!(c.b_values[0], 0.0);
        for (v, b) in c.grid.iter().zip(&c.b_values) {
            assert!((b - v.tanh()).abs() < 1e-9, "v = {v}");
        }
        let (_, b1) = c.at(1.0).unwrap();
        assert!((b1 - 0.761_594).abs() < 1e-6);
    }

    #[test]
    fn a_is_log_cosh() {
        let p = PricingProblem::new(unit_gaussian(0.02), 30.0).unwrap();
        let c = solve_a(&p, solve_b(&p).unwrap()).unwrap();
        for (v, a) in c.grid.iter().zip(&c.a_values) {
            assert!((a - 0.02 * v.cosh().ln()).abs() < 1e-9, "v = {v}");
        }
        let (a1, _) = c.at(1.0).unwrap();
        assert!((a1 - 0.008_675_6).abs() < 1e-7);
    }

    #[test]
    fn a_vanishes_without_immigration_and_scales_with_b() {
        let base = GcirParams::from_pairs(0.3, 0.0, &[(2.0, 0.4), (1.5, 0.1)]).unwrap();
        let c = PricingProblem::new(base.clone(), 10.0).unwrap().solve().unwrap();
        assert!(c.a_values.iter().all(|&a| a == 0.0));

        let mut p1 = base.clone();
        p1.b = 0.01;
        let mut p2 = base;
        p2.b = 0.02;
        let c1 = PricingProblem::new(p1, 10.0).unwrap().solve().unwrap();
        let c2 = PricingProblem::new(p2, 10.0).unwrap().solve().unwrap();
        for i in 0..c1.grid.len() {
            // Equal up to the integrator tolerance: A enters the step-size control.
            assert!((c2.a_values[i] - 2.0 * c1.a_values[i]).abs() < 1e-10 * c2.a_values[i].max(1e-3));
            assert!((c1.b_values[i] - c2.b_values[i]).abs() < 1e-10);
        }
    }

    #[test]
    fn cir_matches_closed_form() {
        for &(a, b, eta) in &[(0.5, 0.02, 0.3), (-1.2, 0.05, 0.8), (1.7, 0.0, 0.05)] {
            let p = PricingProblem::new(GcirParams::cir(a, b, eta).unwrap(), 30.0).unwrap();
            let c = p.solve().unwrap();
            for i in 1..c.grid.len() {
                let (ac, bc) = cir_closed_form(a, b, eta, c.grid[i]);
                assert!((c.b_values[i] - bc).abs() / bc < 1e-8, "B at {}", c.grid[i]);
                if b > 0.0 {
                    assert!((c.a_values[i] - ac).abs() / ac < 1e-8, "A at {}", c.grid[i]);
                }
            }
        }
    }

    #[test]
    fn b_monotone_and_below_lambda_zero() {
        let params = GcirParams::from_pairs(0.2, 0.01, &[(2.0, 0.5), (1.3, 0.2)]).unwrap();
        let l0 = lambda_zero(&params).unwrap();
        let c = PricingProblem::new(params, 30.0).unwrap().solve().unwrap();
        assert!(c.b_values.windows(2).all(|w| w[1] >= w[0]));
        assert!(c.b_values.iter().all(|&b| b <= l0 * (1.0 + 1e-10)));
        assert!(c.b_values[c.b_values.len() - 1] / l0 > 0.9);
        assert!(c.a_values.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn g_inverse_examples() {
        let p = unit_gaussian(0.0);
        assert_eq!(invert_g_for_b(&p, 0.0).unwrap(), 0.0);
        assert!((invert_g_for_b(&p, 1.0).unwrap() - 1f64.tanh()).abs() < 1e-10);
        assert!((invert_g_for_b(&p, 30.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn g_inverse_agrees_with_ode() {
        let params = GcirParams::from_pairs(-0.4, 0.02, &[(1.9, 0.6), (1.4, 0.3)]).unwrap();
        let c = PricingProblem::new(params.clone(), 30.0).unwrap().solve().unwrap();
        let g = GFunction::new(&params).unwrap();
        for i in 1..=60 {
            let v = i as f64 * 0.5;
            let (_, b) = c.at(v).unwrap();
            assert!((g.inverse(v).unwrap() - b).abs() < 1e-6, "v = {v}");
        }
    }

    #[test]
    fn bond_prices() {
        let p = PricingProblem::new(unit_gaussian(0.02), 30.0).unwrap().with_maturities(&[1.0]);
        let c = p.solve().unwrap();
        assert_eq!(bond_price(&c, 0.0, 0.05).unwrap(), 1.0);
        let (a1, _) = c.at(1.0).unwrap();
        assert!((bond_price(&c, 1.0, 0.0).unwrap() - (-a1).exp()).abs() < 1e-15);
        let expected = (-0.02 * 1f64.cosh().ln() - 1f64.tanh() * 0.01).exp();
        assert!((bond_price(&c, 1.0, 0.01).unwrap() - expected).abs() < 1e-10);
        assert!(bond_price(&c, 31.0, 0.01).is_err());
        for &v in &[0.1, 1.3, 7.7, 29.9] {
            let price = bond_price(&c, v, 0.03).unwrap();
            assert!(price > 0.0 && price <= 1.0);
        }
    }

    #[test]
    fn spot_rate_arithmetic() {
        assert_eq!(spot_rate_from_price(1.0, 3.0), 0.0);
        assert!((spot_rate_from_price(0.99, 1.0) - 0.010_101_010_1).abs() < 1e-10);
        assert!((spot_rate_from_price(0.98, 2.0) - 0.010_204_081_6).abs() < 1e-10);
        let c = PricingProblem::new(unit_gaussian(0.0), 2.0).unwrap().solve().unwrap();
        assert!(model_spot_rates(&c, &[0.0], 0.01).is_err());
        let y = model_spot_rates(&c, &[1.0, 2.0], 0.0).unwrap();
        assert!(y.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn sigma_rho_cases() {
        let p = unit_gaussian(0.02);
        let (s, r) = sigma_rho(&p, 0.0, 0.7).unwrap();
        assert_eq!((s, r), (0.7, 0.0));
        let (s, r) = sigma_rho(&p, 1.0, 0.0).unwrap();
        assert!((s - 1f64.tanh()).abs() < 1e-10);
        assert!((r - 0.02 * 1f64.cosh().ln()).abs() < 1e-10);
        for &t in &[0.5, 1.0, 3.0] {
            let (s, _) = sigma_rho(&p, t, 0.5).unwrap();
            assert!((s - (t + 0.5f64.atanh()).tanh()).abs() < 1e-10, "t = {t}");
        }
        // Above λ₀, σ decreases towards it.
        let (s, _) = sigma_rho(&p, 5.0, 3.0).unwrap();
        assert!(s > 1.0 && s < 1.001);
    }

    #[test]
    fn coefficients_csv() {
        let c = PricingProblem::new(unit_gaussian(0.02), 1.0).unwrap().sparse().solve().unwrap();
        let csv = c.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("v,A,B"));
        assert_eq!(lines.next(), Some("0,0,0"));
        assert!(lines.next().unwrap().starts_with("1,0.00867"));
    }
}
