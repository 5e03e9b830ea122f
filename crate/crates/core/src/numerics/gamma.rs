/// Gamma function at double precision.
///
/// Backed by the Lanczos-type `tgamma` of the `libm` crate. Poles at the
/// non-positive integers return `NaN` or an infinity.
#[inline]
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}
