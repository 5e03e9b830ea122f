//! Reduction of generating pairs `(G, Z)` with independent stable-mixture
//! coordinates to the canonical class 𝔸_g.
//!
//! A pair generates an affine model exactly when the Laplace exponent of
//! the projection `⟨G(x), Z⟩` is linear in `x`:
//! `J_{Z^{G(x)}}(b) = x Σ_k η_k b^{α_k}`. Every coordinate here has a finite
//! stable-mixture exponent, so the projection is computed exactly and the
//! weights `η_k` are read off per index.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Component, GcirParams};
use crate::stable_noise::{StableMixtureExponent, StableTerm};

/// Relative tolerance of every structural identity checked here.
pub const IDENTITY_TOL: f64 = 1e-8;

/// A coordinate coefficient `G_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CoefficientMap {
    /// `κ x^p`
    Power { kappa: f64, p: f64 },
    /// Tabulated values, linearly interpolated between nodes.
    Table { x: Vec<f64>, g: Vec<f64> },
}

impl CoefficientMap {
    fn validate(&self) -> Result<()> {
        match self {
            CoefficientMap::Power { kappa, p } => {
                if !(*kappa >= 0.0 && kappa.is_finite() && *p > 0.0 && p.is_finite()) {
                    return Err(Error::domain(format!("power map needs kappa >= 0, p > 0 (got {kappa}, {p})")));
                }
            }
            CoefficientMap::Table { x, g } => {
                if x.len() != g.len() || x.len() < 2 {
                    return Err(Error::domain("table map needs equally long x and g with >= 2 nodes"));
                }
                if x.windows(2).any(|w| !(w[1] > w[0])) || !(x[0] >= 0.0) {
                    return Err(Error::domain("table nodes must be nonnegative and strictly increasing"));
                }
                if g.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(Error::domain("table values must be finite and nonnegative"));
                }
                if x[0] == 0.0 && g[0] != 0.0 {
                    return Err(Error::domain("G(0) must vanish for infinite-variation noise"));
                }
            }
        }
        Ok(())
    }

    /// `G(x)`; `None` outside a table's range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        match self {
            CoefficientMap::Power { kappa, p } => Some(if x == 0.0 { 0.0 } else { kappa * x.powf(*p) }),
            CoefficientMap::Table { x: xs, g } => {
                if x < xs[0] || x > xs[xs.len() - 1] {
                    return None;
                }
                let i = xs.partition_point(|&n| n < x);
                if xs[i] == x {
                    return Some(g[i]);
                }
                let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                Some(g[i - 1] + w * (g[i] - g[i - 1]))
            }
        }
    }

    fn table_nodes(&self) -> Option<&[f64]> {
        match self {
            CoefficientMap::Table { x, .. } => Some(x),
            CoefficientMap::Power { .. } => None,
        }
    }
}

/// One noise coordinate with its coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    #[serde(rename = "J")]
    pub exponent: StableMixtureExponent,
    #[serde(rename = "G")]
    pub coefficient: CoefficientMap,
}

/// Laplace exponents `J_1..J_d` of independent noise coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec {
    pub coordinates: Vec<StableMixtureExponent>,
}

/// A candidate generating pair `(G, Z)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair")]
pub struct GeneratingPair {
    coordinates: Vec<Coordinate>,
}

#[derive(Deserialize)]
struct RawPair {
    coordinates: Vec<Coordinate>,
}

impl TryFrom<RawPair> for GeneratingPair {
    type Error = Error;
    fn try_from(raw: RawPair) -> Result<Self> {
        GeneratingPair::new(raw.coordinates)
    }
}

impl GeneratingPair {
    pub fn new(coordinates: Vec<Coordinate>) -> Result<Self> {
        if coordinates.is_empty() {
            return Err(Error::domain("a generating pair needs at least one coordinate"));
        }
        for c in &coordinates {
            c.coefficient.validate()?;
        }
        Ok(Self { coordinates })
    }

    pub fn from_parts(noise: NoiseSpec, maps: Vec<CoefficientMap>) -> Result<Self> {
        if noise.coordinates.len() != maps.len() {
            return Err(Error::domain("noise and coefficient dimensions differ"));
        }
        Self::new(
            noise
                .coordinates
                .into_iter()
                .zip(maps)
                .map(|(exponent, coefficient)| Coordinate { exponent, coefficient })
                .collect(),
        )
    }

    /// The canonical pair of a parameter set: coordinate `k` is the
    /// canonical `α_k`-stable martingale and `G_k(x) = (d_k x)^{1/α_k}`.
    pub fn canonical(params: &GcirParams) -> Result<Self> {
        let d = params.to_canonical()?.d;
        let coordinates = params
            .components()
            .iter()
            .zip(d)
            .map(|(c, dk)| {
                let alpha = c.alpha.value();
                Ok(Coordinate {
                    exponent: StableMixtureExponent::canonical(alpha)?,
                    coefficient: CoefficientMap::Power { kappa: dk.powf(1.0 / alpha), p: 1.0 / alpha },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coordinates)
    }

    pub fn coordinates(&self) -> &[Coordinate] {
        &self.coordinates
    }

    pub fn dimension(&self) -> usize {
        self.coordinates.len()
    }

    pub fn noise(&self) -> NoiseSpec {
        NoiseSpec { coordinates: self.coordinates.iter().map(|c| c.exponent.clone()).collect() }
    }

    fn coefficients_at(&self, x: f64) -> Option<Vec<f64>> {
        self.coordinates.iter().map(|c| c.coefficient.eval(x)).collect()
    }
}

/// Laplace exponent of the projection: `Σ_i J_i(b G_i(x))`.
pub fn projection_exponent(pair: &GeneratingPair, x: f64, b: f64) -> Option<f64> {
    let g = pair.coefficients_at(x)?;
    Some(
        pair.coordinates
            .iter()
            .zip(g)
            .map(|(c, gi)| c.exponent.eval(b * gi))
            .sum(),
    )
}

/// Probe points in `x` (state) and `b` (Laplace argument).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeGrid {
    pub x: Vec<f64>,
    pub b: Vec<f64>,
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (l, h) = (lo.ln(), hi.ln());
    (0..n).map(|i| (l + (h - l) * i as f64 / (n - 1) as f64).exp()).collect()
}

impl Default for ProbeGrid {
    /// `x ∈ [1e-6, 1]`, `b ∈ [1e-3, 10]`, log-spaced.
    fn default() -> Self {
        Self { x: log_space(1e-6, 1.0, 25), b: log_space(1e-3, 10.0, 17) }
    }
}

impl ProbeGrid {
    /// The default grid, except that when some coefficient is tabulated the
    /// `x` probes are the table nodes inside `[1e-6, 1]`.
    pub fn for_pair(pair: &GeneratingPair) -> Self {
        let mut grid = Self::default();
        let mut nodes: Vec<f64> = pair
            .coordinates
            .iter()
            .filter_map(|c| c.coefficient.table_nodes())
            .flatten()
            .copied()
            .filter(|&x| (1e-6..=1.0).contains(&x))
            .collect();
        if !nodes.is_empty() {
            nodes.sort_by(f64::total_cmp);
            nodes.dedup();
            grid.x = nodes;
        }
        grid
    }
}

/// Why a pair was not reduced to 𝔸_g, and where.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub reason: String,
    pub x: Option<f64>,
    pub b: Option<f64>,
}

impl Rejection {
    fn at(reason: impl Into<String>, x: Option<f64>, b: Option<f64>) -> Self {
        Self { reason: reason.into(), x, b }
    }
}

/// Outcome of [`classify`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum Classification {
    /// The pair generates the class with these `(α_k, η_k)`, sorted by
    /// decreasing index.
    Affine { components: Vec<Component> },
    Rejected(Rejection),
}

impl Classification {
    pub fn components(&self) -> Option<&[Component]> {
        match self {
            Classification::Affine { components } => Some(components),
            Classification::Rejected(_) => None,
        }
    }

    /// Completes an affine verdict with drift parameters.
    pub fn into_params(self, a: f64, b: f64) -> Option<Result<GcirParams>> {
        match self {
            Classification::Affine { components } => Some(GcirParams::new(a, b, components)),
            Classification::Rejected(_) => None,
        }
    }
}

fn relative_spread(values: &[f64]) -> (f64, usize) {
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return (0.0, 0);
    }
    let reference = values[0];
    let mut worst = (0.0, 0);
    for (i, v) in values.iter().enumerate() {
        let dev = (v - reference).abs() / scale;
        if dev > worst.0 {
            worst = (dev, i);
        }
    }
    worst
}

/// Tests linearity in `x` of the projection exponent and extracts the
/// weights `η_k` of each index present in the noise.
pub fn classify(pair: &GeneratingPair, grid: &ProbeGrid) -> Result<Classification> {
    if grid.x.len() < 2 || grid.b.is_empty() || grid.x.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::domain("probe grid needs >= 2 positive x values and a b value"));
    }
    let coeffs: Vec<Vec<f64>> = grid
        .x
        .iter()
        .map(|&x| {
            pair.coefficients_at(x)
                .ok_or_else(|| Error::domain(format!("coefficient table does not cover x = {x}")))
        })
        .collect::<Result<_>>()?;

    // Linearity of the projection exponent, one b at a time.
    let mut all_zero = true;
    for &b in &grid.b {
        let ratios: Vec<f64> = grid
            .x
            .iter()
            .zip(&coeffs)
            .map(|(&x, g)| {
                pair.coordinates
                    .iter()
                    .zip(g)
                    .map(|(c, gi)| c.exponent.eval(b * gi))
                    .sum::<f64>()
                    / x
            })
            .collect();
        all_zero &= ratios.iter().all(|&r| r == 0.0);
        let (dev, at) = relative_spread(&ratios);
        if dev > IDENTITY_TOL {
            return Ok(Classification::Rejected(Rejection::at(
                format!("projection exponent is not linear in x (relative deviation {dev:.3e})"),
                Some(grid.x[at]),
                Some(b),
            )));
        }
    }
    if all_zero {
        return Ok(Classification::Rejected(Rejection::at("projection exponent vanishes identically", None, None)));
    }

    // Weights per index: η_α(x) = Σ_i γ_{i,α} G_i(x)^α / x must be constant.
    let mut by_index: BTreeMap<u64, Vec<(usize, StableTerm)>> = BTreeMap::new();
    for (i, c) in pair.coordinates.iter().enumerate() {
        for t in c.exponent.terms() {
            by_index.entry(t.alpha.value().to_bits()).or_default().push((i, *t));
        }
    }
    let mut components = Vec::new();
    for (bits, terms) in by_index.iter().rev() {
        let alpha = f64::from_bits(*bits);
        let etas: Vec<f64> = grid
            .x
            .iter()
            .zip(&coeffs)
            .map(|(&x, g)| terms.iter().map(|(i, t)| t.gamma * g[*i].powf(alpha)).sum::<f64>() / x)
            .collect();
        let (dev, at) = relative_spread(&etas);
        if dev > IDENTITY_TOL {
            return Ok(Classification::Rejected(Rejection::at(
                format!("weight of index {alpha} is not linear in x (relative deviation {dev:.3e})"),
                Some(grid.x[at]),
                None,
            )));
        }
        let eta = etas.iter().sum::<f64>() / etas.len() as f64;
        if eta > 0.0 {
            components.push(Component::new(alpha, eta)?);
        }
    }

    // The fitted mixture must reproduce the b-profile.
    for &b in &grid.b {
        let fitted: f64 = components.iter().map(|c| c.eta * b.powf(c.alpha.value())).sum();
        for (&x, g) in grid.x.iter().zip(&coeffs) {
            let direct: f64 =
                pair.coordinates.iter().zip(g).map(|(c, gi)| c.exponent.eval(b * gi)).sum::<f64>() / x;
            if (direct - fitted).abs() > IDENTITY_TOL * direct.abs().max(f64::MIN_POSITIVE) {
                return Ok(Classification::Rejected(Rejection::at(
                    "stable-mixture fit does not reproduce the projection exponent",
                    Some(x),
                    Some(b),
                )));
            }
        }
    }
    Ok(Classification::Affine { components })
}

/// Cases of the two-dimensional characterization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tag2d {
    /// Proportional coefficients; both coordinates share the index.
    Ia,
    /// Both coordinates `α₁`-stable with `c₁G₁^{α₁} + c₂G₂^{α₁} = η₁x`.
    Ib,
    /// `G_i = (η_i x / c_i)^{1/α_i}` with distinct indices.
    II,
    Reject,
}

fn pure_index(j: &StableMixtureExponent) -> Option<(f64, f64)> {
    match j.terms() {
        [t] => Some((t.alpha.value(), t.gamma)),
        _ => None,
    }
}

/// Tags a two-dimensional pair with its case; Ia takes precedence over Ib.
pub fn verify_2d(pair: &GeneratingPair) -> Result<Tag2d> {
    if pair.dimension() != 2 {
        return Err(Error::domain(format!("verify_2d needs d = 2, got {}", pair.dimension())));
    }
    let grid = ProbeGrid::for_pair(pair);
    let coeffs: Vec<Vec<f64>> = match grid.x.iter().map(|&x| pair.coefficients_at(x)).collect() {
        Some(c) => c,
        None => return Ok(Tag2d::Reject),
    };
    if coeffs.iter().flatten().any(|&g| !(g > 0.0)) {
        return Ok(Tag2d::Reject);
    }
    let components = match classify(pair, &grid)? {
        Classification::Affine { components } => components,
        Classification::Rejected(_) => return Ok(Tag2d::Reject),
    };
    let (Some((a1, c1)), Some((a2, c2))) = (
        pure_index(&pair.coordinates[0].exponent),
        pure_index(&pair.coordinates[1].exponent),
    ) else {
        return Ok(Tag2d::Reject);
    };
    match components.as_slice() {
        [single] => {
            let alpha = single.alpha.value();
            if a1 != alpha || a2 != alpha {
                return Ok(Tag2d::Reject);
            }
            let ratios: Vec<f64> = coeffs.iter().map(|g| g[1] / g[0]).collect();
            if relative_spread(&ratios).0 <= IDENTITY_TOL {
                return Ok(Tag2d::Ia);
            }
            let identity_holds = grid.x.iter().zip(&coeffs).all(|(&x, g)| {
                let lhs = c1 * g[0].powf(alpha) + c2 * g[1].powf(alpha);
                (lhs - single.eta * x).abs() <= IDENTITY_TOL * single.eta * x
            });
            Ok(if identity_holds { Tag2d::Ib } else { Tag2d::Reject })
        }
        [_, _] if a1 != a2 => {
            let forms_hold = [(0, a1, c1), (1, a2, c2)].iter().all(|&(i, alpha, _)| {
                let scaled: Vec<f64> =
                    grid.x.iter().zip(&coeffs).map(|(&x, g)| g[i].powf(alpha) / x).collect();
                relative_spread(&scaled).0 <= IDENTITY_TOL
            });
            Ok(if forms_hold { Tag2d::II } else { Tag2d::Reject })
        }
        _ => Ok(Tag2d::Reject),
    }
}

/// Weights `(γ₁, γ₂, γ₃, γ̃₃)` of the three-dimensional noise
/// `J₁ = γ₁b^{α₁}`, `J₂ = γ₂b^{α₂}`, `J₃ = γ₃b^{α₁} + γ̃₃b^{α₂}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Family3dWeights {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub gamma3_tilde: f64,
}

/// Builds the member of the three-dimensional family selected by a
/// tabulated `G₃`:
/// `G₁ = ((η₁x − γ₃G₃^{α₁})/γ₁)^{1/α₁}`, `G₂ = ((η₂x − γ̃₃G₃^{α₂})/γ₂)^{1/α₂}`.
///
/// `G₃` must satisfy `0 ≤ G₃(x) ≤ (η₁x/γ₃)^{1/α₁} ∧ (η₂x/γ̃₃)^{1/α₂}` at every
/// node; the first violation is reported with its `x`.
pub fn build_3d_family(
    weights: Family3dWeights,
    eta: (f64, f64),
    alphas: (f64, f64),
    x: &[f64],
    g3: &[f64],
) -> std::result::Result<GeneratingPair, Rejection> {
    let reject = |msg: String, x: Option<f64>| Rejection::at(msg, x, None);
    let Family3dWeights { gamma1, gamma2, gamma3, gamma3_tilde } = weights;
    let (eta1, eta2) = eta;
    let (a1, a2) = alphas;
    if !(a1 > a2) {
        return Err(reject(format!("indices must satisfy alpha1 > alpha2 (got {a1}, {a2})"), None));
    }
    if [gamma1, gamma2, gamma3, gamma3_tilde, eta1, eta2].iter().any(|v| !(*v > 0.0)) {
        return Err(reject("weights must be positive".into(), None));
    }
    if x.len() != g3.len() {
        return Err(reject("G3 table lengths differ".into(), None));
    }
    let mut g1 = Vec::with_capacity(x.len());
    let mut g2 = Vec::with_capacity(x.len());
    for (&xi, &gi) in x.iter().zip(g3) {
        let bound = bound_3d(weights, eta, alphas, xi);
        if !(gi >= 0.0) || gi > bound * (1.0 + 1e-12) {
            return Err(reject(format!("G3({xi}) = {gi} violates 0 <= G3 <= {bound}"), Some(xi)));
        }
        g1.push(((eta1 * xi - gamma3 * gi.powf(a1)).max(0.0) / gamma1).powf(1.0 / a1));
        g2.push(((eta2 * xi - gamma3_tilde * gi.powf(a2)).max(0.0) / gamma2).powf(1.0 / a2));
    }
    let mix = |pairs: &[(f64, f64)]| StableMixtureExponent::from_pairs(pairs).map_err(|e| reject(e.to_string(), None));
    let table = |g: Vec<f64>| CoefficientMap::Table { x: x.to_vec(), g };
    GeneratingPair::new(vec![
        Coordinate { exponent: mix(&[(gamma1, a1)])?, coefficient: table(g1) },
        Coordinate { exponent: mix(&[(gamma2, a2)])?, coefficient: table(g2) },
        Coordinate { exponent: mix(&[(gamma3, a1), (gamma3_tilde, a2)])?, coefficient: table(g3.to_vec()) },
    ])
    .map_err(|e| reject(e.to_string(), None))
}

/// Upper bound `(η₁x/γ₃)^{1/α₁} ∧ (η₂x/γ̃₃)^{1/α₂}` on `G₃(x)`.
pub fn bound_3d(weights: Family3dWeights, eta: (f64, f64), alphas: (f64, f64), x: f64) -> f64 {
    let first = (eta.0 * x / weights.gamma3).powf(1.0 / alphas.0);
    let second = (eta.1 * x / weights.gamma3_tilde).powf(1.0 / alphas.1);
    first.min(second)
}

/// Index of regular variation at zero of a Laplace exponent,
/// `lim_{x→0⁺} log(J(2x)/J(x)) / log 2`, from the probes
/// `x ∈ {1e-2, 1e-4, 1e-6}` accelerated with Aitken's Δ² extrapolation.
pub fn regular_variation_index<F: Fn(f64) -> f64>(j: F) -> f64 {
    let probe = |x: f64| (j(2.0 * x) / j(x)).ln() / 2f64.ln();
    let s = [probe(1e-2), probe(1e-4), probe(1e-6)];
    let d1 = s[1] - s[0];
    let d2 = s[2] - s[1];
    let curvature = d2 - d1;
    if curvature.abs() <= 1e-14 || d2.abs() <= 1e-14 {
        return s[2];
    }
    s[2] - d2 * d2 / curvature
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stable_noise::c_alpha;

    fn power(kappa: f64, p: f64) -> CoefficientMap {
        CoefficientMap::Power { kappa, p }
    }

    fn coord(pairs: &[(f64, f64)], g: CoefficientMap) -> Coordinate {
        Coordinate { exponent: StableMixtureExponent::from_pairs(pairs).unwrap(), coefficient: g }
    }

    fn example_pair(alpha: f64) -> GeneratingPair {
        let c = c_alpha(alpha).unwrap();
        let k = 2f64.powf(-1.0 / alpha);
        GeneratingPair::new(vec![
            coord(&[(c, alpha)], power(k, 1.0 / alpha)),
            coord(&[(c, alpha)], power(k, 1.0 / alpha)),
        ])
        .unwrap()
    }

    #[test]
    fn projection_examples() {
        let pair = example_pair(1.5);
        assert_eq!(projection_exponent(&pair, 0.0, 3.0), Some(0.0));
        let c = c_alpha(1.5).unwrap();
        for &(x, b) in &[(0.3, 2.0), (1.0, 0.5), (4.0, 1.7)] {
            let v = projection_exponent(&pair, x, b).unwrap();
            assert!((v - x * c * b.powf(1.5)).abs() < 1e-12 * v, "({x}, {b})");
        }
        let params = GcirParams::from_pairs(0.0, 0.0, &[(2.0, 0.3), (1.5, 0.2)]).unwrap();
        let canonical = GeneratingPair::canonical(&params).unwrap();
        let (x, b): (f64, f64) = (0.7, 1.3);
        let expected: f64 = x * (0.3 * b * b + 0.2 * b.powf(1.5));
        assert!((projection_exponent(&canonical, x, b).unwrap() - expected).abs() < 1e-13);
    }

    #[test]
    fn classify_canonical_round_trip() {
        let params = GcirParams::from_pairs(0.0, 0.0, &[(2.0, 0.3), (1.5, 0.2)]).unwrap();
        let pair = GeneratingPair::canonical(&params).unwrap();
        let got = classify(&pair, &ProbeGrid::default()).unwrap();
        let comps = got.components().unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!(comps[0].alpha.value(), 2.0);
        assert_eq!(comps[1].alpha.value(), 1.5);
        assert!((comps[0].eta - 0.3).abs() < 1e-10);
        assert!((comps[1].eta - 0.2).abs() < 1e-10);
    }

    #[test]
    fn classify_example_pair() {
        for &alpha in &[1.2, 1.5, 2.0] {
            let got = classify(&example_pair(alpha), &ProbeGrid::default()).unwrap();
            let comps = got.components().unwrap();
            assert_eq!(comps.len(), 1);
            assert_eq!(comps[0].alpha.value(), alpha);
            let c = c_alpha(alpha).unwrap();
            assert!((comps[0].eta - c).abs() < 1e-10 * c);
        }
    }

    #[test]
    fn classify_rejects_nonlinear() {
        let pair = GeneratingPair::new(vec![coord(&[(c_alpha(1.5).unwrap(), 1.5)], power(1.0, 1.0))]).unwrap();
        match classify(&pair, &ProbeGrid::default()).unwrap() {
            Classification::Rejected(r) => {
                assert!(r.x.is_some() && r.b.is_some());
                assert!(r.reason.contains("not linear"));
            }
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn classify_rejects_zero_map() {
        let pair = GeneratingPair::new(vec![coord(&[(1.0, 1.5)], power(0.0, 1.0))]).unwrap();
        assert!(matches!(classify(&pair, &ProbeGrid::default()).unwrap(), Classification::Rejected(_)));
    }

    #[test]
    fn classify_needs_usable_grid() {
        let pair = example_pair(1.5);
        let grid = ProbeGrid { x: vec![0.5], b: vec![1.0] };
        assert!(classify(&pair, &grid).is_err());
    }

    #[test]
    fn two_dimensional_tags() {
        let ia = GeneratingPair::new(vec![
            coord(&[(0.5, 2.0)], power(0.7, 0.5)),
            coord(&[(0.5, 2.0)], power(0.3, 0.5)),
        ])
        .unwrap();
        assert_eq!(verify_2d(&ia).unwrap(), Tag2d::Ia);

        let ii = GeneratingPair::new(vec![
            coord(&[(0.5, 2.0)], power(2f64.sqrt(), 0.5)),
            coord(&[(c_alpha(1.5).unwrap(), 1.5)], power(1.0, 1.0 / 1.5)),
        ])
        .unwrap();
        assert_eq!(verify_2d(&ii).unwrap(), Tag2d::II);

        let reject = GeneratingPair::new(vec![
            coord(&[(c_alpha(1.5).unwrap(), 1.5)], power(1.0, 1.0)),
            coord(&[(0.5, 2.0)], power(1.0, 0.5)),
        ])
        .unwrap();
        assert_eq!(verify_2d(&reject).unwrap(), Tag2d::Reject);
        assert!(verify_2d(&example_pair(1.5)).is_ok());
        let one_d = GeneratingPair::new(vec![coord(&[(0.5, 2.0)], power(1.0, 0.5))]).unwrap();
        assert!(verify_2d(&one_d).is_err());
    }

    #[test]
    fn two_dimensional_ib_with_tables() {
        // c₁G₁² + c₂G₂² = ηx with a non-constant split s(x) = x/(1+x).
        let (c1, c2, eta) = (0.5, 0.8, 1.3);
        let x: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
        let s = |x: f64| x / (1.0 + x);
        let g1: Vec<f64> = x.iter().map(|&x| (eta * x * s(x) / c1).sqrt()).collect();
        let g2: Vec<f64> = x.iter().map(|&x| (eta * x * (1.0 - s(x)) / c2).sqrt()).collect();
        let pair = GeneratingPair::new(vec![
            coord(&[(c1, 2.0)], CoefficientMap::Table { x: x.clone(), g: g1 }),
            coord(&[(c2, 2.0)], CoefficientMap::Table { x, g: g2 }),
        ])
        .unwrap();
        assert_eq!(verify_2d(&pair).unwrap(), Tag2d::Ib);
        let comps = classify(&pair, &ProbeGrid::for_pair(&pair)).unwrap();
        assert!((comps.components().unwrap()[0].eta - eta).abs() < 1e-12);
    }

    #[test]
    fn three_dimensional_family() {
        let w = Family3dWeights { gamma1: 0.7, gamma2: 1.1, gamma3: 0.4, gamma3_tilde: 0.9 };
        let (eta, alphas) = ((0.3, 0.2), (1.8, 1.3));
        let x: Vec<f64> = (0..=50).map(|i| (i as f64 / 50.0).powi(2)).collect();

        // G₃ ≡ 0 reduces to the two-dimensional case-II forms.
        let zero = build_3d_family(w, eta, alphas, &x, &vec![0.0; x.len()]).unwrap();
        let g1 = &zero.coordinates()[0].coefficient;
        let xi = x[20];
        let expected = (eta.0 * xi / w.gamma1).powf(1.0 / alphas.0);
        assert!((g1.eval(xi).unwrap() - expected).abs() < 1e-14);

        let half: Vec<f64> = x.iter().map(|&xi| 0.5 * bound_3d(w, eta, alphas, xi)).collect();
        let pair = build_3d_family(w, eta, alphas, &x, &half).unwrap();
        let comps = classify(&pair, &ProbeGrid::for_pair(&pair)).unwrap();
        let comps = comps.components().unwrap();
        assert_eq!(comps.len(), 2);
        assert_eq!((comps[0].alpha.value(), comps[1].alpha.value()), alphas);
        assert!((comps[0].eta - eta.0).abs() < 1e-10);
        assert!((comps[1].eta - eta.1).abs() < 1e-10);

        let mut bad = half.clone();
        bad[30] = 2.0 * bound_3d(w, eta, alphas, x[30]);
        let err = build_3d_family(w, eta, alphas, &x, &bad).unwrap_err();
        assert_eq!(err.x, Some(x[30]));
    }

    #[test]
    fn regular_variation_examples() {
        let pure2 = StableMixtureExponent::from_pairs(&[(0.7, 2.0)]).unwrap();
        assert!((regular_variation_index(|b| pure2.eval(b)) - 2.0).abs() < 1e-6);
        let pure12 = StableMixtureExponent::from_pairs(&[(3.0, 1.2)]).unwrap();
        assert!((regular_variation_index(|b| pure12.eval(b)) - 1.2).abs() < 1e-6);
        let mix = StableMixtureExponent::from_pairs(&[(1.0, 2.0), (1.0, 1.5)]).unwrap();
        assert!((regular_variation_index(|b| mix.eval(b)) - 1.5).abs() < 1e-4);
    }

    #[test]
    fn pair_json_format() {
        let json = r#"{"coordinates":[
            {"J":[{"gamma":0.5,"alpha":2.0}],"G":{"kind":"power","kappa":1.0,"p":0.5}},
            {"J":[{"gamma":1.0,"alpha":1.5}],"G":{"kind":"table","x":[0.0,1.0],"g":[0.0,1.0]}}
        ]}"#;
        let pair: GeneratingPair = serde_json::from_str(json).unwrap();
        assert_eq!(pair.dimension(), 2);
        let back: GeneratingPair = serde_json::from_str(&serde_json::to_string(&pair).unwrap()).unwrap();
        assert_eq!(back, pair);
        let bad = r#"{"coordinates":[{"J":[{"gamma":1,"alpha":1.5}],"G":{"kind":"table","x":[0.0,1.0],"g":[0.3,1.0]}}]}"#;
        assert!(serde_json::from_str::<GeneratingPair>(bad).is_err());
    }
}
