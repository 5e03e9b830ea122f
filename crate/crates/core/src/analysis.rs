//! Deterministic companions of the simulation: the moment-bound ODE
//! `𝔼R(t)^p ≤ e^{apt}I_p(t)`, the growth envelope of `I_p` and the
//! classification of long-run behaviour.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::sig12;
use crate::model::GcirParams;
use crate::numerics::{brent, expand_bracket_up, gamma, Dopri5};

/// Solution of the moment-bound ODE on a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentBound {
    pub p: f64,
    pub grid: Vec<f64>,
    pub i_values: Vec<f64>,
    /// `e^{apt}·I_p(t)`, the bound on `𝔼R(t)^p`.
    pub envelope: Vec<f64>,
}

impl MomentBound {
    /// Writes `t,I_p,envelope` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,I_p,envelope")?;
        for ((t, i), e) in self.grid.iter().zip(&self.i_values).zip(&self.envelope) {
            writeln!(out, "{},{},{}", sig12(*t), sig12(*i), sig12(*e))?;
        }
        Ok(())
    }
}

/// Coefficients of the right-hand side of the moment ODE.
#[derive(Debug, Clone, PartialEq)]
struct MomentTerms {
    a: f64,
    p: f64,
    /// `(c(p−1) + b)p`
    source: f64,
    /// `(α_i, h_{α_i})` for the components entering the sum.
    jumps: Vec<(f64, f64)>,
}

impl MomentTerms {
    fn new(params: &GcirParams, p: f64) -> Result<Self> {
        let alpha_g = params.alpha_min();
        if !(p > 1.0 && p < alpha_g) {
            return Err(Error::domain(format!("moment order p = {p} must lie in (1, alpha_g = {alpha_g})")));
        }
        let comps = params.components();
        let (c, rest) = if comps[0].alpha.is_gaussian() { (comps[0].eta, &comps[1..]) } else { (0.0, comps) };
        let scale = p * (p - 1.0) / gamma(2.0 - p);
        let jumps = rest
            .iter()
            .map(|k| {
                let alpha = k.alpha.value();
                (alpha, scale * gamma(alpha - p) * k.eta)
            })
            .collect();
        Ok(Self { a: params.a, p, source: (c * (p - 1.0) + params.b) * p, jumps })
    }

    /// `dJ/dt` for `J = I^{1/p}`:
    /// `(1/p)[e^{−at}(c(p−1)+b)p + Σ_i e^{a(1−α_i)t}h_{α_i}J^{2−α_i}]`.
    /// Unlike `dI/dt` it stays bounded as `I → 0`.
    fn root_rate(&self, t: f64, j: f64) -> f64 {
        let j = j.max(0.0);
        let mut rate = (-self.a * t).exp() * self.source;
        for &(alpha, h) in &self.jumps {
            rate += (self.a * (1.0 - alpha) * t).exp() * h * j.powf(2.0 - alpha);
        }
        rate / self.p
    }

    /// Right-hand side of the autonomous equation for `E_p = e^{apt}I_p`.
    fn stationary_residual(&self, e: f64) -> f64 {
        let p = self.p;
        let mut r = self.a * p * e + self.source * e.powf((p - 1.0) / p);
        for &(alpha, h) in &self.jumps {
            r += h * e.powf((p + 1.0 - alpha) / p);
        }
        r
    }
}

/// The jump weights `h_{α_i} = p(p−1)Γ(α_i−p)η_i/Γ(2−p)` entering the sum.
pub fn moment_weights(params: &GcirParams, p: f64) -> Result<Vec<(f64, f64)>> {
    Ok(MomentTerms::new(params, p)?.jumps)
}

/// Integrates
/// `dI/dt = e^{−at}(c(p−1)+b)p·I^{(p−1)/p} + Σ_i e^{a(1−α_i)t}h_{α_i}I^{(p+1−α_i)/p}`
/// from `I(0) = r0^p` on a uniform grid of 200 steps. The equation is
/// integrated for `I^{1/p}`, which removes the singular slope at `I = 0`.
///
/// `c = η₁` and the sum starts at the second component when `α₁ = 2`;
/// otherwise `c = 0` and the sum runs over all components.
pub fn moment_ode(params: &GcirParams, r0: f64, p: f64, horizon: f64) -> Result<MomentBound> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    let grid: Vec<f64> = (0..=200).map(|i| horizon * i as f64 / 200.0).collect();
    moment_ode_on_grid(params, r0, p, &grid)
}

/// [`moment_ode`] on a caller-supplied increasing grid starting at 0.
pub fn moment_ode_on_grid(params: &GcirParams, r0: f64, p: f64, grid: &[f64]) -> Result<MomentBound> {
    let terms = MomentTerms::new(params, p)?;
    if !(r0 >= 0.0 && r0.is_finite()) {
        return Err(Error::domain(format!("r0 must be nonnegative, got {r0}")));
    }
    if grid.first() != Some(&0.0) || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::domain("moment grid must start at 0 and increase strictly"));
    }
    let i_values = if r0 == 0.0 && params.b == 0.0 {
        // The process is absorbed at 0; the minimal solution is identically 0.
        vec![0.0; grid.len()]
    } else {
        Dopri5::new(1e-10, 1e-14)
            .solve_on_grid(|t, y: &[f64; 1]| [terms.root_rate(t, y[0])], [r0], grid)?
            .into_iter()
            .map(|y| y[0].max(0.0).powf(p))
            .collect()
    };
    let envelope = grid.iter().zip(&i_values).map(|(t, i)| (params.a * p * t).exp() * i).collect();
    Ok(MomentBound { p, grid: grid.to_vec(), i_values, envelope })
}

/// Closed-form upper bound on `I_p` for `a ≥ 0`:
/// `I(t) = (r0^{p(1−γ)}∨1 + (1−γ)h(e^{βt}−1)/β)^{1/(1−γ)}`, with the `β = 0`
/// limit `(r0^{p(1−γ)}∨1 + (1−γ)ht)^{1/(1−γ)}`, where `β = a(1−α_g)`,
/// `γ = (p+1−α_g)/p` and `h` the sum of all source weights.
pub fn moment_bound_closed_form(params: &GcirParams, r0: f64, p: f64, t: f64) -> Result<f64> {
    let terms = MomentTerms::new(params, p)?;
    if params.a < 0.0 {
        return Err(Error::domain("the closed-form bound needs a >= 0"));
    }
    let alpha_g = params.alpha_min();
    let gamma_exp = (p + 1.0 - alpha_g) / p;
    let h = terms.source + terms.jumps.iter().map(|j| j.1).sum::<f64>();
    let beta = params.a * (1.0 - alpha_g);
    let base = r0.powf(p * (1.0 - gamma_exp)).max(1.0);
    let growth = if beta == 0.0 { t } else { (beta * t).exp_m1() / beta };
    Ok((base + (1.0 - gamma_exp) * h * growth).powf(1.0 / (1.0 - gamma_exp)))
}

/// Asymptotic class of `e^{apt}I_p(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "kebab-case")]
pub enum GrowthEnvelope {
    /// `const·e^{apt}` when `a > 0`.
    Exponential { rate: f64 },
    /// `const·t^{p/(α_g−1)}` when `a = 0`.
    Polynomial { exponent: f64 },
    /// Converges to the fixed point `e_p` when `a < 0`.
    Bounded { e_p: f64 },
}

pub fn growth_envelope(params: &GcirParams, p: f64) -> Result<GrowthEnvelope> {
    let terms = MomentTerms::new(params, p)?;
    let a = params.a;
    Ok(if a > 0.0 {
        GrowthEnvelope::Exponential { rate: a * p }
    } else if a == 0.0 {
        GrowthEnvelope::Polynomial { exponent: p / (params.alpha_min() - 1.0) }
    } else {
        GrowthEnvelope::Bounded { e_p: fixed_point(&terms)? }
    })
}

/// The unique positive root `e_p` of
/// `ap·e + (c(p−1)+b)p·e^{(p−1)/p} + Σ_i h_{α_i}e^{(p+1−α_i)/p} = 0` (`a < 0`).
pub fn stationary_moment_level(params: &GcirParams, p: f64) -> Result<f64> {
    if !(params.a < 0.0) {
        return Err(Error::domain("the fixed point e_p exists only for a < 0"));
    }
    fixed_point(&MomentTerms::new(params, p)?)
}

/// Residual of the defining equation of `e_p`.
pub fn stationary_moment_residual(params: &GcirParams, p: f64, e: f64) -> Result<f64> {
    Ok(MomentTerms::new(params, p)?.stationary_residual(e))
}

fn fixed_point(terms: &MomentTerms) -> Result<f64> {
    let f = |e: f64| terms.stationary_residual(e);
    let (lo, hi) = expand_bracket_up(f, 0.0, 1.0, 1e300)?;
    let lo = if lo == 0.0 { f64::MIN_POSITIVE } else { lo };
    brent(f, lo, hi, 1e-15)
}

/// Long-run behaviour of `R(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StationaryCase {
    /// `b = 0`, `a ≤ 0`: `R_∞ = 0` almost surely.
    DegenerateZero,
    /// `b > 0`, `a < 0`: `𝔼R_∞ = −b/a`.
    FiniteMean,
    /// `b > 0`, `a = 0`, `α_g < 2`: `P(R_∞ > r) ~ C r^{−(2−α_g)}`.
    HeavyTail,
    /// No limit distribution.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryVerdict {
    pub case: StationaryCase,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail_exponent: Option<f64>,
}

pub fn stationary_verdict(params: &GcirParams) -> StationaryVerdict {
    let (a, b) = (params.a, params.b);
    let alpha_g = params.alpha_min();
    let mut verdict = StationaryVerdict { case: StationaryCase::None, mean: None, tail_constant: None, tail_exponent: None };
    if b == 0.0 && a <= 0.0 {
        verdict.case = StationaryCase::DegenerateZero;
        verdict.mean = Some(0.0);
    } else if b > 0.0 && a < 0.0 {
        verdict.case = StationaryCase::FiniteMean;
        verdict.mean = Some(-b / a);
    } else if b > 0.0 && a == 0.0 && alpha_g < 2.0 {
        let eta_g = params.components().last().expect("g >= 1").eta;
        verdict.case = StationaryCase::HeavyTail;
        verdict.tail_exponent = Some(2.0 - alpha_g);
        verdict.tail_constant = Some(b / (eta_g * (2.0 - alpha_g) * gamma(alpha_g - 1.0)));
    }
    verdict
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::mean_formula;

    #[test]
    fn domain_checks() {
        let p = GcirParams::from_pairs(0.0, 0.02, &[(2.0, 0.3), (1.5, 0.2)]).unwrap();
        assert!(moment_ode(&p, 0.01, 1.5, 1.0).is_err());
        assert!(moment_ode(&p, 0.01, 1.0, 1.0).is_err());
        assert!(moment_ode(&p, 0.01, 1.4, 1.0).is_ok());
    }

    #[test]
    fn absorbed_state_gives_zero() {
        let p = GcirParams::from_pairs(0.5, 0.0, &[(1.5, 1.0)]).unwrap();
        let m = moment_ode(&p, 0.0, 1.2, 2.0).unwrap();
        assert!(m.i_values.iter().all(|&v| v == 0.0));
        // With immigration the bound leaves 0 at once.
        let p = GcirParams::from_pairs(0.0, 0.02, &[(2.0, 1.0)]).unwrap();
        let m = moment_ode(&p, 0.0, 1.5, 1.0).unwrap();
        assert_eq!(m.i_values[0], 0.0);
        assert!(m.i_values[1..].iter().all(|&v| v > 0.0));
        assert!(m.i_values.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn pure_jump_matches_closed_form() {
        // b = 0, a = 0, r0 >= 1: the ODE is dI/dt = h I^γ exactly.
        let params = GcirParams::from_pairs(0.0, 0.0, &[(1.5, 0.8)]).unwrap();
        let (r0, p) = (1.3, 1.25);
        let m = moment_ode(&params, r0, p, 3.0).unwrap();
        for (t, i) in m.grid.iter().zip(&m.i_values) {
            let exact = moment_bound_closed_form(&params, r0, p, *t).unwrap();
            assert!((i - exact).abs() < 1e-8 * exact, "t = {t}: {i} vs {exact}");
        }
        // With immigration and small r0 the closed form is only an upper bound.
        let params = GcirParams::from_pairs(0.2, 0.05, &[(2.0, 0.4), (1.5, 0.8)]).unwrap();
        let m = moment_ode(&params, 0.02, p, 3.0).unwrap();
        for (t, i) in m.grid.iter().zip(&m.i_values) {
            assert!(*i <= moment_bound_closed_form(&params, 0.02, p, *t).unwrap());
        }
    }

    #[test]
    fn weights_formula() {
        let params = GcirParams::from_pairs(0.0, 0.0, &[(2.0, 0.5), (1.7, 0.3), (1.4, 0.2)]).unwrap();
        let p = 1.2;
        let w = moment_weights(&params, p).unwrap();
        assert_eq!(w.len(), 2);
        let expected = p * (p - 1.0) / gamma(2.0 - p) * gamma(1.7 - p) * 0.3;
        assert!((w[0].1 - expected).abs() < 1e-15);
        let stable_only = GcirParams::from_pairs(0.0, 0.0, &[(1.7, 0.3)]).unwrap();
        assert_eq!(moment_weights(&stable_only, p).unwrap().len(), 1);
    }

    #[test]
    fn fixed_point_for_negative_drift() {
        let params = GcirParams::from_pairs(-0.8, 0.02, &[(2.0, 0.3), (1.5, 0.2)]).unwrap();
        let p = 1.25;
        let e_p = stationary_moment_level(&params, p).unwrap();
        assert!(e_p > 0.0);
        assert!(stationary_moment_residual(&params, p, e_p).unwrap().abs() < 1e-12);
        assert_eq!(growth_envelope(&params, p).unwrap(), GrowthEnvelope::Bounded { e_p });
        let m = moment_ode(&params, 0.05, p, 60.0).unwrap();
        let last = *m.envelope.last().unwrap();
        assert!((last - e_p).abs() < 1e-6, "{last} vs {e_p}");
    }

    #[test]
    fn envelope_classes() {
        let up = GcirParams::from_pairs(0.5, 0.02, &[(1.5, 0.2)]).unwrap();
        assert_eq!(growth_envelope(&up, 1.2).unwrap(), GrowthEnvelope::Exponential { rate: 0.6 });
        let flat = GcirParams::from_pairs(0.0, 0.02, &[(1.5, 0.2)]).unwrap();
        match growth_envelope(&flat, 1.2).unwrap() {
            GrowthEnvelope::Polynomial { exponent } => assert!((exponent - 2.4).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn near_one_matches_mean() {
        let params = GcirParams::from_pairs(0.3, 0.02, &[(2.0, 0.1), (1.5, 0.1)]).unwrap();
        let (r0, p) = (1.0, 1.01);
        let m = moment_ode(&params, r0, p, 2.0).unwrap();
        for (t, e) in m.grid.iter().zip(&m.envelope).skip(1) {
            let mean = mean_formula(&params, r0, *t);
            let approx = e.powf(1.0 / p);
            assert!((approx - mean).abs() < 0.01 * mean, "t = {t}: {approx} vs {mean}");
        }
    }

    #[test]
    fn verdicts() {
        let v = stationary_verdict(&GcirParams::cir(-1.0, 0.0, 0.5).unwrap());
        assert_eq!(v.case, StationaryCase::DegenerateZero);
        let v = stationary_verdict(&GcirParams::cir(-0.5, 0.02, 0.5).unwrap());
        assert_eq!(v.case, StationaryCase::FiniteMean);
        assert!((v.mean.unwrap() - 0.04).abs() < 1e-15);
        assert!(v.tail_constant.is_none());
        let v = stationary_verdict(&GcirParams::from_pairs(0.0, 0.02, &[(1.5, 1.0)]).unwrap());
        assert_eq!(v.case, StationaryCase::HeavyTail);
        assert_eq!(v.tail_exponent, Some(0.5));
        let expected = 0.02 / (0.5 * std::f64::consts::PI.sqrt());
        assert!((v.tail_constant.unwrap() - expected).abs() < 1e-15);
        assert_eq!(stationary_verdict(&GcirParams::cir(0.0, 0.02, 0.5).unwrap()).case, StationaryCase::None);
        assert_eq!(stationary_verdict(&GcirParams::cir(0.1, 0.0, 0.5).unwrap()).case, StationaryCase::None);
        let json = serde_json::to_string(&stationary_verdict(&GcirParams::cir(-1.0, 0.0, 0.5).unwrap())).unwrap();
        assert_eq!(json, r#"{"case":"degenerate-zero","mean":0.0}"#);
    }

    #[test]
    fn csv_header() {
        let params = GcirParams::from_pairs(0.0, 0.02, &[(1.5, 0.2)]).unwrap();
        let mut out = Vec::new();
        moment_ode(&params, 0.01, 1.2, 1.0).unwrap().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,I_p,envelope\n0,"));
        assert_eq!(text.lines().count(), 202);
    }
}
