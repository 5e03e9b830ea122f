//! The parameter set of the class 𝔸_g(a, b; α₁..α_g; η₁..η_g) and the
//! functions it induces: branching and immigration mechanisms, the root λ₀,
//! the 𝒢-function and the generator applied to exponentials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{brent, expand_bracket_up, Quadrature};
use crate::stable_noise::{c_alpha, StableIndex};

/// One noise component: stability index and its weight `η` in the branching
/// mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub alpha: StableIndex,
    pub eta: f64,
}

impl Component {
    pub fn new(alpha: f64, eta: f64) -> Result<Self> {
        Ok(Self { alpha: StableIndex::new(alpha)?, eta })
    }
}

/// Parameters of a model in 𝔸_g.
///
/// Invariants: `g ≥ 1`, `2 ≥ α₁ > … > α_g > 1`, every `η_k > 0`, `b ≥ 0`.
/// Serialized as `{"a": …, "b": …, "components": [{"alpha": …, "eta": …}, …]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct GcirParams {
    pub a: f64,
    pub b: f64,
    components: Vec<Component>,
}

#[derive(Deserialize)]
struct RawParams {
    a: f64,
    b: f64,
    components: Vec<Component>,
}

impl TryFrom<RawParams> for GcirParams {
    type Error = Error;
    fn try_from(raw: RawParams) -> Result<Self> {
        GcirParams::new(raw.a, raw.b, raw.components)
    }
}

/// SDE coefficient scales `d_k = η_k / c_{α_k}` of the canonical
/// representation `dR = (aR + b)dt + Σ d_k^{1/α_k} R^{1/α_k} dZ^{α_k}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalCoefficients {
    pub d: Vec<f64>,
}

impl GcirParams {
    pub fn new(a: f64, b: f64, components: Vec<Component>) -> Result<Self> {
        if !a.is_finite() {
            return Err(Error::params(format!("drift slope a = {a} is not finite")));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::params(format!("drift intercept b = {b} must be >= 0")));
        }
        if components.is_empty() {
            return Err(Error::params("at least one noise component is required"));
        }
        for c in &components {
            if !(c.eta > 0.0 && c.eta.is_finite()) {
                return Err(Error::params(format!("weight eta = {} must be positive", c.eta)));
            }
        }
        if components.windows(2).any(|w| w[0].alpha.value() <= w[1].alpha.value()) {
            return Err(Error::params("stability indices must be strictly decreasing"));
        }
        Ok(Self { a, b, components })
    }

    /// Builds parameters from `(α_k, η_k)` pairs.
    pub fn from_pairs(a: f64, b: f64, pairs: &[(f64, f64)]) -> Result<Self> {
        let components = pairs
            .iter()
            .map(|&(alpha, eta)| Component::new(alpha, eta))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::params(e.to_string()))?;
        Self::new(a, b, components)
    }

    /// The classical CIR model `dR = (aR + b)dt + √(2η R) dW`.
    pub fn cir(a: f64, b: f64, eta: f64) -> Result<Self> {
        Self::from_pairs(a, b, &[(2.0, eta)])
    }

    /// Builds parameters from the SDE scales `d_k` of the canonical form.
    pub fn from_canonical(a: f64, b: f64, alphas: &[f64], d: &[f64]) -> Result<Self> {
        if alphas.len() != d.len() {
            return Err(Error::params("alphas and d must have equal length"));
        }
        let pairs = alphas
            .iter()
            .zip(d)
            .map(|(&alpha, &dk)| Ok((alpha, dk * c_alpha(alpha)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(a, b, &pairs)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn g(&self) -> usize {
        self.components.len()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.alpha.value()).collect()
    }

    pub fn etas(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.eta).collect()
    }

    /// The smallest index `α_g`, which sets the tail of the short rate.
    pub fn alpha_min(&self) -> f64 {
        self.components[self.components.len() - 1].alpha.value()
    }

    /// `η₁` when the leading component is Brownian, else zero.
    pub fn diffusion_weight(&self) -> f64 {
        let first = self.components[0];
        if first.alpha.is_gaussian() {
            first.eta
        } else {
            0.0
        }
    }

    pub fn to_canonical(&self) -> Result<CanonicalCoefficients> {
        let d = self
            .components
            .iter()
            .map(|c| Ok(c.eta / c.alpha.c()?))
            .collect::<Result<Vec<_>>>()?;
        Ok(CanonicalCoefficients { d })
    }

    /// Branching mechanism `ℛ(λ) = aλ − Σ η_k λ^{α_k}`.
    pub fn branching(&self, lambda: f64) -> f64 {
        branching_mechanism(self, lambda)
    }

    /// `ℛ′(λ) = a − Σ α_k η_k λ^{α_k − 1}`.
    pub fn branching_derivative(&self, lambda: f64) -> f64 {
        self.a
            - self
                .components
                .iter()
                .map(|c| {
                    let al = c.alpha.value();
                    al * c.eta * lambda.powf(al - 1.0)
                })
                .sum::<f64>()
    }

    /// Immigration mechanism `ℱ(λ) = bλ`.
    pub fn immigration(&self, lambda: f64) -> f64 {
        immigration_mechanism(self, lambda)
    }
}

/// `ℛ(λ) = aλ − Σ_k η_k λ^{α_k}`.
pub fn branching_mechanism(params: &GcirParams, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    params.a * lambda
        - params
            .components
            .iter()
            .map(|c| c.eta * lambda.powf(c.alpha.value()))
            .sum::<f64>()
}

/// `ℱ(λ) = bλ`.
pub fn immigration_mechanism(params: &GcirParams, lambda: f64) -> f64 {
    params.b * lambda
}

/// `d_k = η_k / c_{α_k}`.
pub fn to_canonical(params: &GcirParams) -> Result<CanonicalCoefficients> {
    params.to_canonical()
}

/// Smallest `λ > 0` with `1 + ℛ(λ) = 0`: the horizontal asymptote of `B`.
pub fn lambda_zero(params: &GcirParams) -> Result<f64> {
    let f = |l: f64| 1.0 + branching_mechanism(params, l);
    let (lo, hi) = expand_bracket_up(f, 0.0, 1.0, 1e300)
        .map_err(|e| Error::Root(format!("lambda_zero: {e} (degenerate parameters?)")))?;
    if !f(hi).is_finite() {
        return Err(Error::Root("lambda_zero: root beyond the floating-point range".into()));
    }
    let root = brent(f, lo, hi, 1e-14)?;
    let slope = params.branching_derivative(root);
    if !(slope < 0.0) {
        return Err(Error::Root(format!("R'(lambda_0) = {slope} is not negative")));
    }
    Ok(root)
}

/// `𝒢(x) = ∫₀ˣ dy / (1 + ℛ(y))` on `[0, λ₀)`, with λ₀ cached.
///
/// Below `λ₀/2` the integral is taken directly in `y`. Above it the variable
/// is `z = −ln(λ₀ − y)`, in which the integrand tends to the constant
/// `1/|ℛ′(λ₀)|` and the logarithmic divergence at λ₀ becomes linear growth
/// in `z`. The split keeps small arguments resolvable when λ₀ is huge.
#[derive(Debug, Clone)]
pub struct GFunction<'a> {
    params: &'a GcirParams,
    lambda0: f64,
    quad: Quadrature,
    /// `𝒢(λ₀/2)`.
    g_mid: f64,
}

impl<'a> GFunction<'a> {
    pub fn new(params: &'a GcirParams) -> Result<Self> {
        let mut g = Self {
            params,
            lambda0: lambda_zero(params)?,
            quad: Quadrature { abs_tol: 1e-12, rel_tol: 1e-13, max_intervals: 4000 },
            g_mid: 0.0,
        };
        g.g_mid = g.eval_direct(g.x_mid())?;
        Ok(g)
    }

    pub fn lambda0(&self) -> f64 {
        self.lambda0
    }

    fn x_mid(&self) -> f64 {
        0.5 * self.lambda0
    }

    /// `1 + ℛ(λ₀ − h)` computed from the gap `h` without cancellation.
    pub fn one_plus_branching_below_root(&self, h: f64) -> f64 {
        let l0 = self.lambda0;
        let u = h / l0;
        let mut value = -self.params.a * h;
        for c in self.params.components() {
            let al = c.alpha.value();
            // 1 − (1 − u)^α
            let drop = -(al * (-u).ln_1p()).exp_m1();
            value += c.eta * l0.powf(al) * drop;
        }
        value
    }

    fn eval_direct(&self, x: f64) -> Result<f64> {
        if x == 0.0 {
            return Ok(0.0);
        }
        self.quad.integrate(|y| 1.0 / (1.0 + self.params.branching(y)), 0.0, x)
    }

    fn z_integrand(&self, z: f64) -> f64 {
        let h = (-z).exp();
        h / self.one_plus_branching_below_root(h)
    }

    fn z_of(&self, x: f64) -> f64 {
        -(self.lambda0 - x).ln()
    }

    /// 𝒢 expressed in the variable `z = −ln(λ₀ − x)`.
    pub fn eval_z(&self, z: f64) -> Result<f64> {
        let z_mid = self.z_of(self.x_mid());
        if z <= z_mid {
            return self.eval_direct((self.lambda0 - (-z).exp()).max(0.0));
        }
        Ok(self.g_mid + self.quad.integrate(|s| self.z_integrand(s), z_mid, z)?)
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(Error::domain(format!("G-function argument {x} is negative")));
        }
        if x >= self.lambda0 {
            return Err(Error::domain(format!(
                "G-function argument {x} is not below lambda_0 = {}",
                self.lambda0
            )));
        }
        if x <= self.x_mid() {
            return self.eval_direct(x);
        }
        self.eval_z(self.z_of(x))
    }

    /// The unique `x ∈ [0, λ₀)` with `𝒢(x) = v`: Brent's method in `x`
    /// below `λ₀/2`, bisection in `z` above.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !(v >= 0.0) {
            return Err(Error::domain(format!("G-inverse argument {v} is negative")));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        if v <= self.g_mid {
            let f = |x: f64| self.eval_direct(x).map_or(f64::NAN, |g| g - v);
            return brent(f, 0.0, self.x_mid(), 1e-15);
        }
        let z_mid = self.z_of(self.x_mid());
        let mut lo = z_mid;
        let mut width = 1.0;
        let mut hi = z_mid + width;
        while self.eval_z(hi)? < v {
            lo = hi;
            width *= 2.0;
            hi = z_mid + width;
            if width > 1e6 {
                return Err(Error::Root(format!("G-inverse: no bracket for v = {v}")));
            }
        }
        let x_of = |z: f64| self.lambda0 - (-z).exp();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if x_of(hi) - x_of(lo) <= 4.0 * f64::EPSILON * self.lambda0 || hi - lo < 1e-14 {
                break;
            }
            if self.eval_z(mid)? < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(x_of(0.5 * (lo + hi)))
    }
}

/// `𝒢(x)` for a single argument.
pub fn g_function(params: &GcirParams, x: f64) -> Result<f64> {
    GFunction::new(params)?.eval(x)
}

/// The generator applied to `f_λ(y) = e^{−λy}`:
/// `𝒜f_λ(x) = e^{−λx}·[x Σ_k η_k λ^{α_k} − (ax + b)λ]`.
pub fn generator_on_exponential(params: &GcirParams, x: f64, lambda: f64) -> f64 {
    let jumps: f64 = params
        .components
        .iter()
        .map(|c| c.eta * lambda.powf(c.alpha.value()))
        .sum();
    (-lambda * x).exp() * (x * jumps - (params.a * x + params.b) * lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;

    fn unit_gaussian() -> GcirParams {
        GcirParams::from_pairs(0.0, 0.0, &[(2.0, 1.0)]).unwrap()
    }

    #[test]
    fn validation() {
        assert!(GcirParams::from_pairs(0.0, -0.1, &[(2.0, 1.0)]).is_err());
        assert!(GcirParams::from_pairs(0.0, 0.0, &[]).is_err());
        assert!(GcirParams::from_pairs(0.0, 0.0, &[(1.5, 1.0), (1.7, 1.0)]).is_err());
        assert!(GcirParams::from_pairs(0.0, 0.0, &[(1.5, 1.0), (1.5, 1.0)]).is_err());
        assert!(GcirParams::from_pairs(0.0, 0.0, &[(1.5, 0.0)]).is_err());
        assert!(GcirParams::from_pairs(f64::NAN, 0.0, &[(1.5, 1.0)]).is_err());
        assert!(GcirParams::from_pairs(0.0, 0.0, &[(2.5, 1.0)]).is_err());
    }

    #[test]
    fn json_format() {
        let p = GcirParams::from_pairs(0.5, 0.02, &[(2.0, 0.3), (1.5, 0.2)]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(
            s,
            r#"{"a":0.5,"b":0.02,"components":[{"alpha":2.0,"eta":0.3},{"alpha":1.5,"eta":0.2}]}"#
        );
        let back: GcirParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        let bad = r#"{"a":0,"b":0,"components":[{"alpha":1.5,"eta":1},{"alpha":1.8,"eta":1}]}"#;
        assert!(serde_json::from_str::<GcirParams>(bad).is_err());
    }

    #[test]
    fn canonical_conversion() {
        let p = GcirParams::from_pairs(0.0, 0.0, &[(2.0, 0.5)]).unwrap();
        assert_eq!(p.to_canonical().unwrap().d, vec![1.0]);
        let c15 = c_alpha(1.5).unwrap();
        let p = GcirParams::from_pairs(0.0, 0.0, &[(1.5, c15)]).unwrap();
        assert!((p.to_canonical().unwrap().d[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn canonical_round_trip_table_values() {
        // α-CIR fit for 08.04.2022: d₁ = 1.902, d₂ = 9.12e-6 with α = 1.999.
        let p = GcirParams::from_canonical(0.939, 0.005, &[2.0, 1.999], &[1.902, 9.12e-6]).unwrap();
        let d = p.to_canonical().unwrap().d;
        assert!((d[0] - 1.902).abs() / 1.902 < 1e-12);
        assert!((d[1] - 9.12e-6).abs() / 9.12e-6 < 1e-12);
    }

    #[test]
    fn branching_examples() {
        let p = unit_gaussian();
        assert_eq!(p.branching(0.0), 0.0);
        assert_eq!(p.branching(2.0), -4.0);
        let p = GcirParams::from_pairs(1.0, 0.0, &[(2.0, 0.5), (1.5, 0.3)]).unwrap();
        assert!((p.branching(1.0) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn branching_matches_unreduced_form() {
        // ℛ(λ) = −cλ² + aλ − ∫(e^{−λv} − 1 + λv) μ(dv), μ(dv) = Σ_{k≥2} d_k v^{−1−α_k} dv.
        let p = GcirParams::from_pairs(1.0, 0.0, &[(2.0, 0.5), (1.5, 0.3), (1.2, 0.1)]).unwrap();
        let d = p.to_canonical().unwrap().d;
        let c = d[0] / 2.0;
        for &lambda in &[0.3, 1.0, 2.5] {
            let mu_density = |v: f64| d[1] * v.powf(-2.5) + d[2] * v.powf(-2.2);
            let integrand = |v: f64| {
                if v == 0.0 {
                    return 0.0;
                }
                let lv = lambda * v;
                let core = if lv < 1e-4 { 0.5 * lv * lv - lv * lv * lv / 6.0 } else { (-lv).exp_m1() + lv };
                core * mu_density(v)
            };
            let head = integrate(integrand, 0.0, 1.0).unwrap();
            let tail = integrate(|u: f64| if u == 0.0 { 0.0 } else { integrand(1.0 / u) / (u * u) }, 0.0, 1.0).unwrap();
            let unreduced = -c * lambda * lambda + p.a * lambda - (head + tail);
            assert!((unreduced - p.branching(lambda)).abs() < 1e-7, "lambda = {lambda}");
        }
    }

    #[test]
    fn immigration_examples() {
        let p = GcirParams::from_pairs(0.0, 0.0, &[(2.0, 1.0)]).unwrap();
        assert_eq!(p.immigration(5.0), 0.0);
        let p = GcirParams::from_pairs(0.0, 0.02, &[(2.0, 1.0)]).unwrap();
        assert!((p.immigration(3.0) - 0.06).abs() < 1e-17);
        let p = GcirParams::from_canonical(0.939, 0.005, &[2.0, 1.999], &[1.902, 9.12e-6]).unwrap();
        assert_eq!(p.immigration(1.0), 0.005);
    }

    #[test]
    fn lambda_zero_examples() {
        assert!((lambda_zero(&unit_gaussian()).unwrap() - 1.0).abs() < 1e-13);
        let p = GcirParams::from_pairs(0.0, 0.0, &[(1.5, 1.0)]).unwrap();
        assert!((lambda_zero(&p).unwrap() - 1.0).abs() < 1e-13);
        let p = GcirParams::from_pairs(1.0, 0.0, &[(2.0, 1.0)]).unwrap();
        assert!((lambda_zero(&p).unwrap() - (1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-13);
    }

    #[test]
    fn lambda_zero_degenerate() {
        // λ₀^{0.002} ≈ 1e12: far beyond f64.
        let p = GcirParams::from_pairs(1e6, 0.0, &[(1.002, 1e-6)]).unwrap();
        assert!(matches!(lambda_zero(&p), Err(Error::Root(_))));
        // Huge but finite.
        let p = GcirParams::from_pairs(0.0, 0.0, &[(1.001, 1e-30)]).unwrap();
        let l0 = lambda_zero(&p).unwrap();
        assert!((l0 / 1e30f64.powf(1.0 / 1.001) - 1.0).abs() < 1e-12);
        let g = GFunction::new(&p).unwrap();
        assert!((g.eval(1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((g.inverse(1.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn g_function_atanh() {
        let p = unit_gaussian();
        assert_eq!(g_function(&p, 0.0).unwrap(), 0.0);
        assert!((g_function(&p, 0.5).unwrap() - 0.5f64.atanh()).abs() < 1e-12);
        assert!((g_function(&p, 0.5).unwrap() - 0.549_306).abs() < 1e-6);
        assert!((g_function(&p, 0.99).unwrap() - 2.646_652).abs() < 1e-6);
        assert!(g_function(&p, 1.0).is_err());
        assert!(g_function(&p, -0.1).is_err());
    }

    #[test]
    fn g_function_far_into_divergence() {
        let p = unit_gaussian();
        let g = GFunction::new(&p).unwrap();
        let x = 1.0 - 1e-12;
        assert!((g.eval(x).unwrap() - x.atanh()).abs() < 1e-6);
    }

    #[test]
    fn g_inverse_identity() {
        let p = GcirParams::from_pairs(0.4, 0.01, &[(2.0, 0.3), (1.4, 0.2)]).unwrap();
        let g = GFunction::new(&p).unwrap();
        let l0 = g.lambda0();
        for i in 0..=20 {
            let x = 0.99 * l0 * i as f64 / 20.0;
            let v = g.eval(x).unwrap();
            assert!((g.inverse(v).unwrap() - x).abs() < 1e-8, "x = {x}");
        }
    }

    #[test]
    fn generator_examples() {
        let p = GcirParams::from_pairs(0.3, 0.0, &[(2.0, 1.0)]).unwrap();
        assert_eq!(generator_on_exponential(&p, 0.0, 1.7), 0.0);
        let v = generator_on_exponential(&unit_gaussian(), 1.0, 1.0);
        assert!((v - (-1f64).exp()).abs() < 1e-15);
        assert!((v - 0.367_88).abs() < 1e-5);
        let p = GcirParams::from_pairs(1.0, 0.02, &[(1.5, 1.0)]).unwrap();
        let v = generator_on_exponential(&p, 2.0, 1.0);
        assert!((v - (-2f64).exp() * (2.0 - 2.02)).abs() < 1e-15);
    }

    #[test]
    fn generator_recovers_drift() {
        // −∂/∂λ 𝒜f_λ(x) at λ = 0 equals ax + b.
        let p = GcirParams::from_pairs(-0.7, 0.03, &[(2.0, 0.4), (1.6, 0.2)]).unwrap();
        let h = 1e-10;
        for &x in &[0.0, 0.5, 2.0] {
            let slope = (generator_on_exponential(&p, x, h) - generator_on_exponential(&p, x, 0.0)) / h;
            assert!((-slope - (p.a * x + p.b)).abs() < 1e-5, "x = {x}");
        }
    }
}
