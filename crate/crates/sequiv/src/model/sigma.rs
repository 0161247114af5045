//! Maps Sigma(H) applied to the base energy when constructing a derived
//! Lagrangian. Each comes with its exact derivative, which enters the
//! velocity integrand G = Sigma'(H) d2L/dv2.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMap {
    /// Sigma(z) = alpha z + beta. With alpha = 1, beta = 0 the derived
    /// Lagrangian reproduces the base one up to a total time derivative.
    IdentityAffine { alpha: f64, beta: f64 },
    /// Sigma(z) = z^2 / 2, the worked family whose derived Lagrangian is
    /// quartic in the velocity.
    HalfSquare,
}

impl SigmaMap {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            SigmaMap::IdentityAffine { alpha, beta } => alpha * z + beta,
            SigmaMap::HalfSquare => 0.5 * z * z,
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            SigmaMap::IdentityAffine { alpha, .. } => *alpha,
            SigmaMap::HalfSquare => z,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            SigmaMap::IdentityAffine { .. } => "identity-affine",
            SigmaMap::HalfSquare => "half-square",
        }
    }
}
