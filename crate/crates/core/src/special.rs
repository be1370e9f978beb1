/// Gamma function.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `1 / Γ(α + 1)`, the normalisation applied to every chord sum.
pub fn mass_normalisation(alpha: f64) -> f64 {
    1.0 / gamma(alpha + 1.0)
}
