//! Canonical spectrally positive stable martingales.
//!
//! For `α = 2` the canonical martingale is a standard Brownian motion with
//! Laplace exponent `λ²/2`. For `α ∈ (1, 2)` it is the pure-jump Lévy
//! martingale with Lévy measure `v^{-α-1} dv` on `v > 0`, whose Laplace
//! exponent is `c_α λ^α` with `c_α = Γ(2−α)/(α(α−1))`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand::distr::Open01;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::gamma;

/// Indices in `(1, NEAR_ONE]` are accepted but logged as near-degenerate.
pub const NEAR_ONE: f64 = 1.001;

/// `c_α` values above this bound are reported as a range error.
pub const C_ALPHA_MAX: f64 = 1e12;

/// A stability index `α ∈ (1, 2]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct StableIndex(f64);

impl StableIndex {
    pub const GAUSSIAN: StableIndex = StableIndex(2.0);

    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 1.0 && alpha <= 2.0) {
            return Err(Error::domain(format!("stability index {alpha} outside (1, 2]")));
        }
        if alpha <= NEAR_ONE {
            log::warn!("stability index {alpha} is within 1e-3 of the degenerate boundary 1");
        }
        Ok(Self(alpha))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn is_gaussian(self) -> bool {
        self.0 == 2.0
    }

    pub fn is_near_one(self) -> bool {
        self.0 <= NEAR_ONE
    }

    /// The normalizing constant `c_α`.
    pub fn c(self) -> Result<f64> {
        c_alpha(self.0)
    }
}

impl TryFrom<f64> for StableIndex {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        StableIndex::new(value)
    }
}

impl From<StableIndex> for f64 {
    fn from(value: StableIndex) -> f64 {
        value.0
    }
}

/// Laplace-exponent constant of the canonical α-stable martingale:
/// `1/2` at `α = 2`, otherwise `Γ(2−α)/(α(α−1))`.
///
/// The two branches are not continuous: `c_α → ∞` as `α → 2⁻`.
pub fn c_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::domain(format!("c_alpha: index {alpha} outside (1, 2]")));
    }
    if alpha == 2.0 {
        return Ok(0.5);
    }
    let c = gamma(2.0 - alpha) / (alpha * (alpha - 1.0));
    if !c.is_finite() || c > C_ALPHA_MAX {
        return Err(Error::Range(format!("c_alpha({alpha}) = {c:e} exceeds {C_ALPHA_MAX:e}")));
    }
    Ok(c)
}

/// One term `γ b^α` of a stable mixture exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableTerm {
    pub gamma: f64,
    pub alpha: StableIndex,
}

/// `J(b) = Σ_k γ_k b^{α_k}` with positive weights and distinct indices,
/// stored sorted by decreasing index.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct StableMixtureExponent {
    terms: Vec<StableTerm>,
}

impl<'de> Deserialize<'de> for StableMixtureExponent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let terms = Vec::<StableTerm>::deserialize(d)?;
        StableMixtureExponent::new(terms).map_err(serde::de::Error::custom)
    }
}

impl StableMixtureExponent {
    pub fn new(mut terms: Vec<StableTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::domain("stable mixture needs at least one term"));
        }
        for t in &terms {
            if !(t.gamma > 0.0 && t.gamma.is_finite()) {
                return Err(Error::domain(format!("mixture weight {} must be positive", t.gamma)));
            }
        }
        terms.sort_by(|x, y| y.alpha.value().total_cmp(&x.alpha.value()));
        if terms.windows(2).any(|w| w[0].alpha == w[1].alpha) {
            return Err(Error::domain("mixture indices must be pairwise distinct"));
        }
        Ok(Self { terms })
    }

    /// Builds a mixture from `(γ, α)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let terms = pairs
            .iter()
            .map(|&(gamma, alpha)| Ok(StableTerm { gamma, alpha: StableIndex::new(alpha)? }))
            .collect::<Result<Vec<_>>>()?;
        Self::new(terms)
    }

    /// A single canonical α-stable martingale, `J(b) = c_α b^α`.
    pub fn canonical(alpha: f64) -> Result<Self> {
        Self::from_pairs(&[(c_alpha(alpha)?, alpha)])
    }

    pub fn terms(&self) -> &[StableTerm] {
        &self.terms
    }

    /// Smallest index, which governs the behavior of `J` at zero.
    pub fn min_index(&self) -> StableIndex {
        self.terms[self.terms.len() - 1].alpha
    }

    /// Weight attached to `alpha`, or zero.
    pub fn weight_of(&self, alpha: f64) -> f64 {
        self.terms
            .iter()
            .find(|t| t.alpha.value() == alpha)
            .map_or(0.0, |t| t.gamma)
    }

    pub fn eval(&self, b: f64) -> f64 {
        laplace_exponent(self, b)
    }
}

/// `J(b) = Σ γ_k b^{α_k}`; zero at `b = 0`.
pub fn laplace_exponent(mix: &StableMixtureExponent, b: f64) -> f64 {
    if b == 0.0 {
        return 0.0;
    }
    mix.terms.iter().map(|t| t.gamma * b.powf(t.alpha.value())).sum()
}

/// Asymptotic tail `P(Z^α(t) > z) ~ t / (α z^α)` of the canonical
/// α-stable martingale, `α ∈ (1, 2)`.
pub fn tail_probability_asymptote(alpha: f64, t: f64, z: f64) -> Result<f64> {
    if alpha == 2.0 {
        return Err(Error::domain("the Gaussian case has no power tail"));
    }
    if !(alpha > 1.0 && alpha < 2.0) {
        return Err(Error::domain(format!("index {alpha} outside (1, 2)")));
    }
    if !(t > 0.0 && z > 0.0) {
        return Err(Error::domain("tail asymptote needs t > 0 and z > 0"));
    }
    Ok(t / (alpha * z.powf(alpha)))
}

/// Sampler for increments of the canonical α-stable martingale over a fixed
/// time step.
///
/// For `α < 2` the increment is `σ X` where `X ~ S_α(1, 1, 0)` (totally
/// skewed to the right, zero mean) is drawn with the Chambers–Mallows–Stuck
/// transform and `σ^α = dt · c_α · |cos(πα/2)|`, which makes
/// `E exp(−λ σX) = exp(dt c_α λ^α)`.
#[derive(Debug, Clone, Copy)]
pub struct StableIncrementSampler {
    alpha: f64,
    kind: SamplerKind,
}

#[derive(Debug, Clone, Copy)]
enum SamplerKind {
    Gaussian { sd: f64 },
    Skewed { scale: f64, shift: f64, s: f64, inv_alpha: f64, exponent: f64 },
}

impl StableIncrementSampler {
    pub fn new(alpha: StableIndex, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("time step {dt} must be positive")));
        }
        let a = alpha.value();
        let kind = if alpha.is_gaussian() {
            SamplerKind::Gaussian { sd: dt.sqrt() }
        } else {
            let c = c_alpha(a)?;
            let half_angle = FRAC_PI_2 * a;
            let tan_t = half_angle.tan();
            SamplerKind::Skewed {
                scale: (dt * c * half_angle.cos().abs()).powf(1.0 / a),
                shift: tan_t.atan() / a,
                s: (1.0 + tan_t * tan_t).powf(0.5 / a),
                inv_alpha: 1.0 / a,
                exponent: (1.0 - a) / a,
            }
        };
        Ok(Self { alpha: a, kind })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            SamplerKind::Gaussian { sd } => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            SamplerKind::Skewed { scale, shift, s, inv_alpha, exponent } => {
                let u: f64 = Open01.sample(rng);
                let v = PI * (u - 0.5);
                let w: f64 = Exp1.sample(rng);
                let arg = self.alpha * (v + shift);
                let x = s * arg.sin() / v.cos().powf(inv_alpha)
                    * ((v - arg).cos() / w).powf(exponent);
                scale * x
            }
        }
    }
}

/// One increment of the canonical α-stable martingale over `dt`.
pub fn sample_increment<R: Rng + ?Sized>(alpha: StableIndex, dt: f64, rng: &mut R) -> Result<f64> {
    Ok(StableIncrementSampler::new(alpha, dt)?.sample(rng))
}
