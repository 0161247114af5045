//! One-dimensional Lagrangians and the construction of derived forms that
//! share their classical trajectories.
//!
//! Starting from a base L(x, v) = v^2/2 - V(x) with energy
//! H = v dL/dv - L, a map Sigma produces
//!
//! ```text
//! L'(x, v) = v * Int_c^v G(x, u) du - Sigma(H(x, v)),
//! G(x, u)  = Sigma'(H(x, u)) * d2L/dv2(x, u).
//! ```
//!
//! Every such L' yields the same solution set as L while its conjugate
//! momentum and Hamiltonian differ. For Sigma(z) = z^2/2 and c = 0 the
//! construction closes in elementary terms,
//!
//! ```text
//! L' = v^4/24 + v^2 V / 2 - V^2 / 2,      H' = H^2 / 2,
//! ```
//!
//! and those closed forms are registered as fast analytic channels; every
//! other combination goes through adaptive quadrature in v and five-point
//! differencing in x.

use crate::error::{Error, Result};
use crate::model::{PhaseRegion, Potential, SigmaMap};
use crate::quad;

/// Absolute tolerance for the velocity quadrature.
const QUAD_TOL: f64 = 1e-12;

/// Below this second-derivative magnitude the Legendre transform is
/// treated as degenerate.
const HESSIAN_CUTOFF: f64 = 1e-12;

/// Gauge terms d Phi(x)/dt = Phi'(x) v that can be added to a Lagrangian
/// without changing its equations of motion.
#[derive(Debug, Clone, Copy)]
pub enum Gauge {
    /// Phi = a x
    Linear(f64),
    /// Phi = a x^2
    Quadratic(f64),
    /// Phi = a sin x
    Sine(f64),
}

impl Gauge {
    fn dphi_dx(&self, x: f64) -> f64 {
        match *self {
            Gauge::Linear(a) => a,
            Gauge::Quadratic(a) => 2.0 * a * x,
            Gauge::Sine(a) => a * x.cos(),
        }
    }

    fn d2phi_dx2(&self, x: f64) -> f64 {
        match *self {
            Gauge::Linear(_) => 0.0,
            Gauge::Quadratic(a) => 2.0 * a,
            Gauge::Sine(a) => -a * x.sin(),
        }
    }
}

/// How a derived form computes its values and partials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivedChannels {
    /// Registered closed form for base + half-square Sigma with c = 0.
    ClosedFormQuartic,
    /// Velocity quadrature plus finite differencing in x.
    Quadrature,
}

#[derive(Debug, Clone)]
pub enum Lagrangian {
    /// L = v^2/2 - V(x)
    Base { potential: Potential },
    /// L' built from an inner form, a Sigma map, and the lower limit c of
    /// the velocity integral.
    Derived { base: Box<Lagrangian>, sigma: SigmaMap, lower_limit: f64, channels: DerivedChannels },
    /// factor * L, same trajectories, different momenta.
    Scaled { base: Box<Lagrangian>, factor: f64 },
    /// L + Phi'(x) v, identical dynamics and identical velocity Hessian.
    GaugeAugmented { base: Box<Lagrangian>, gauge: Gauge },
}

impl Lagrangian {
    pub fn base(potential: Potential) -> Self {
        Lagrangian::Base { potential }
    }

    pub fn scaled(self, factor: f64) -> Result<Self> {
        if !factor.is_finite() {
            return Err(Error::InvalidParameter(format!("scale factor must be finite, got {factor}")));
        }
        Ok(Lagrangian::Scaled { base: Box::new(self), factor })
    }

    pub fn with_gauge(self, gauge: Gauge) -> Self {
        Lagrangian::GaugeAugmented { base: Box::new(self), gauge }
    }

    /// The potential of the underlying base form, when there is one all
    /// the way down.
    pub fn potential(&self) -> Option<&Potential> {
        match self {
            Lagrangian::Base { potential } => Some(potential),
            Lagrangian::Derived { base, .. }
            | Lagrangian::Scaled { base, .. }
            | Lagrangian::GaugeAugmented { base, .. } => base.potential(),
        }
    }

    /// Representative x for construction-time probes: the middle of a
    /// tabulated domain, otherwise 0.
    fn probe_x(&self) -> f64 {
        match self.potential().and_then(|p| p.domain()) {
            Some((lo, hi)) => 0.5 * (lo + hi),
            None => 0.0,
        }
    }

    pub fn evaluate(&self, x: f64, v: f64) -> Result<f64> {
        match self {
            Lagrangian::Base { potential } => Ok(0.5 * v * v - potential.eval(x)?),
            Lagrangian::Derived { base, sigma, lower_limit, channels } => match channels {
                DerivedChannels::ClosedFormQuartic => {
                    let pot = closed_form_potential(base)?;
                    let vv = pot.eval(x)?;
                    Ok(v.powi(4) / 24.0 + 0.5 * v * v * vv - 0.5 * vv * vv)
                }
                DerivedChannels::Quadrature => {
                    let q = velocity_integral(base, sigma, *lower_limit, x, v)?;
                    let h = legendre_energy(base, x, v)?;
                    Ok(v * q - sigma.eval(h))
                }
            },
            Lagrangian::Scaled { base, factor } => Ok(factor * base.evaluate(x, v)?),
            Lagrangian::GaugeAugmented { base, gauge } => {
                Ok(base.evaluate(x, v)? + gauge.dphi_dx(x) * v)
            }
        }
    }

    /// dL/dv. For derived forms this is the velocity integral of G itself:
    /// differentiating v * Int G du - Sigma(H) gives
    /// Int G du + v G - Sigma'(H) v d2L/dv2, and the last two terms cancel
    /// by the definition of G.
    pub fn d_dv(&self, x: f64, v: f64) -> Result<f64> {
        match self {
            Lagrangian::Base { .. } => Ok(v),
            Lagrangian::Derived { base, sigma, lower_limit, channels } => match channels {
                DerivedChannels::ClosedFormQuartic => {
                    let pot = closed_form_potential(base)?;
                    Ok(v * v * v / 6.0 + v * pot.eval(x)?)
                }
                DerivedChannels::Quadrature => velocity_integral(base, sigma, *lower_limit, x, v),
            },
            Lagrangian::Scaled { base, factor } => Ok(factor * base.d_dv(x, v)?),
            Lagrangian::GaugeAugmented { base, gauge } => Ok(base.d_dv(x, v)? + gauge.dphi_dx(x)),
        }
    }

    /// d2L/dv2, which for derived forms equals G(x, v).
    pub fn d2_dv2(&self, x: f64, v: f64) -> Result<f64> {
        match self {
            Lagrangian::Base { .. } => Ok(1.0),
            Lagrangian::Derived { base, sigma, lower_limit: _, channels } => match channels {
                DerivedChannels::ClosedFormQuartic => {
                    let pot = closed_form_potential(base)?;
                    Ok(0.5 * v * v + pot.eval(x)?)
                }
                DerivedChannels::Quadrature => hessian_field_value(base, sigma, x, v),
            },
            Lagrangian::Scaled { base, factor } => Ok(factor * base.d2_dv2(x, v)?),
            Lagrangian::GaugeAugmented { base, .. } => base.d2_dv2(x, v),
        }
    }

    pub fn d_dx(&self, x: f64, v: f64) -> Result<f64> {
        match self {
            Lagrangian::Base { potential } => Ok(-potential.derivative(x)?),
            Lagrangian::Derived { base, channels, .. } => match channels {
                DerivedChannels::ClosedFormQuartic => {
                    let pot = closed_form_potential(base)?;
                    Ok((0.5 * v * v - pot.eval(x)?) * pot.derivative(x)?)
                }
                DerivedChannels::Quadrature => fd5(|xx| self.evaluate(xx, v), x),
            },
            Lagrangian::Scaled { base, factor } => Ok(factor * base.d_dx(x, v)?),
            Lagrangian::GaugeAugmented { base, gauge } => {
                Ok(base.d_dx(x, v)? + gauge.d2phi_dx2(x) * v)
            }
        }
    }

    /// Mixed partial d2L/dx dv.
    pub fn d2_dxdv(&self, x: f64, v: f64) -> Result<f64> {
        match self {
            Lagrangian::Base { .. } => Ok(0.0),
            Lagrangian::Derived { base, channels, .. } => match channels {
                DerivedChannels::ClosedFormQuartic => {
                    let pot = closed_form_potential(base)?;
                    Ok(v * pot.derivative(x)?)
                }
                DerivedChannels::Quadrature => fd5(|xx| self.d_dv(xx, v), x),
            },
            Lagrangian::Scaled { base, factor } => Ok(factor * base.d2_dxdv(x, v)?),
            Lagrangian::GaugeAugmented { base, gauge } => Ok(base.d2_dxdv(x, v)? + gauge.d2phi_dx2(x)),
        }
    }
}

fn closed_form_potential(base: &Lagrangian) -> Result<&Potential> {
    match base {
        Lagrangian::Base { potential } => Ok(potential),
        _ => Err(Error::InvalidParameter(
            "closed-form channels require a plain base Lagrangian underneath".into(),
        )),
    }
}

/// G(x, u) = Sigma'(H_base(x, u)) * d2L_base/dv2(x, u).
fn hessian_field_value(base: &Lagrangian, sigma: &SigmaMap, x: f64, u: f64) -> Result<f64> {
    let h = legendre_energy(base, x, u)?;
    Ok(sigma.derivative(h) * base.d2_dv2(x, u)?)
}

fn velocity_integral(
    base: &Lagrangian,
    sigma: &SigmaMap,
    lower_limit: f64,
    x: f64,
    v: f64,
) -> Result<f64> {
    let inner_err = std::cell::Cell::new(None);
    let r = quad::integrate(
        |u| match hessian_field_value(base, sigma, x, u) {
            Ok(g) => g,
            Err(e) => {
                inner_err.set(Some(e));
                f64::NAN
            }
        },
        lower_limit,
        v,
        QUAD_TOL,
    );
    match (r, inner_err.into_inner()) {
        (_, Some(e)) => Err(e),
        (Ok(q), None) => Ok(q.value),
        (Err(e), None) => Err(e),
    }
}

/// Five-point central first derivative, step scaled to the argument.
fn fd5<F: FnMut(f64) -> Result<f64>>(mut f: F, x: f64) -> Result<f64> {
    let h = 1e-4 * (1.0 + x.abs());
    let f2p = f(x + 2.0 * h)?;
    let f1p = f(x + h)?;
    let f1m = f(x - h)?;
    let f2m = f(x - 2.0 * h)?;
    Ok((-f2p + 8.0 * f1p - 8.0 * f1m + f2m) / (12.0 * h))
}

/// Energy function H(x, v) = v dL/dv - L of any form, guarded against a
/// degenerate velocity Hessian.
pub fn legendre_energy(l: &Lagrangian, x: f64, v: f64) -> Result<f64> {
    let g = l.d2_dv2(x, v)?;
    if g.abs() < HESSIAN_CUTOFF {
        return Err(Error::DegenerateHessian(g.abs()));
    }
    Ok(v * l.d_dv(x, v)? - l.evaluate(x, v)?)
}

/// d2L/dv2 as a standalone operation.
pub fn hessian(l: &Lagrangian, x: f64, v: f64) -> Result<f64> {
    l.d2_dv2(x, v)
}

/// The integrand field G of the derived construction, packaged with its
/// ingredients.
#[derive(Debug, Clone)]
pub struct HessianField {
    pub base: Box<Lagrangian>,
    pub sigma: SigmaMap,
}

impl HessianField {
    pub fn new(base: Lagrangian, sigma: SigmaMap) -> Self {
        Self { base: Box::new(base), sigma }
    }

    pub fn eval(&self, x: f64, u: f64) -> Result<f64> {
        hessian_field_value(&self.base, &self.sigma, x, u)
    }
}

/// Energy form carried together with the Lagrangian it came from; the
/// offset tracks the additive constant left free by the construction.
#[derive(Debug, Clone)]
pub struct HamiltonianForm {
    pub lagrangian: Lagrangian,
    pub constant_offset: f64,
}

impl HamiltonianForm {
    pub fn new(lagrangian: Lagrangian) -> Self {
        Self { lagrangian, constant_offset: 0.0 }
    }

    pub fn evaluate(&self, x: f64, v: f64) -> Result<f64> {
        Ok(legendre_energy(&self.lagrangian, x, v)? + self.constant_offset)
    }
}

/// Build the derived Lagrangian for (base, Sigma, c). The worked
/// half-square family with c = 0 gets analytic channels; everything else
/// uses quadrature plus differencing. A probe evaluation runs so that a
/// non-convergent velocity integral fails at construction.
pub fn build_sprime_lagrangian(base: &Lagrangian, sigma: SigmaMap, c: f64) -> Result<Lagrangian> {
    if !c.is_finite() {
        return Err(Error::InvalidParameter(format!("lower integration limit must be finite, got {c}")));
    }
    let channels = if matches!(base, Lagrangian::Base { .. })
        && matches!(sigma, SigmaMap::HalfSquare)
        && c == 0.0
    {
        DerivedChannels::ClosedFormQuartic
    } else {
        DerivedChannels::Quadrature
    };
    finish_build(base, sigma, c, channels)
}

/// Same construction but forced through the numeric channels, used to
/// cross-check the registered closed forms.
pub fn build_sprime_lagrangian_quadrature(
    base: &Lagrangian,
    sigma: SigmaMap,
    c: f64,
) -> Result<Lagrangian> {
    if !c.is_finite() {
        return Err(Error::InvalidParameter(format!("lower integration limit must be finite, got {c}")));
    }
    finish_build(base, sigma, c, DerivedChannels::Quadrature)
}

fn finish_build(
    base: &Lagrangian,
    sigma: SigmaMap,
    c: f64,
    channels: DerivedChannels,
) -> Result<Lagrangian> {
    let built = Lagrangian::Derived {
        base: Box::new(base.clone()),
        sigma,
        lower_limit: c,
        channels,
    };
    let x0 = base.probe_x();
    for v in [c - 1.0, c + 0.5, c + 1.0] {
        built.evaluate(x0, v)?;
    }
    Ok(built)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivalenceOutcome {
    /// The two forms differ by at most a total time derivative.
    Equivalent,
    /// Same trajectories are possible, but the forms are not related by a
    /// total derivative.
    SEquivalentOnly,
}

#[derive(Debug, Clone)]
pub struct EquivalenceReport {
    pub outcome: EquivalenceOutcome,
    /// max |d2(L1 - L2)/dv2| over the sample grid.
    pub max_hessian_gap: f64,
}

/// Sampled test of whether L1 - L2 is a total time derivative. A difference
/// f(x) + g(x) v is exactly linear in v, so the criterion is a vanishing
/// second velocity derivative of the difference across the region.
pub fn equivalence_test(
    l1: &Lagrangian,
    l2: &Lagrangian,
    region: &PhaseRegion,
    nx: usize,
    nv: usize,
) -> Result<EquivalenceReport> {
    if nx < 2 || nv < 2 {
        return Err(Error::InvalidParameter("equivalence test needs at least a 2x2 sample".into()));
    }
    let mut max_gap: f64 = 0.0;
    for (x, v) in region.samples(nx, nv) {
        let gap = (l1.d2_dv2(x, v)? - l2.d2_dv2(x, v)?).abs();
        max_gap = max_gap.max(gap);
    }
    let outcome = if max_gap <= 1e-8 {
        EquivalenceOutcome::Equivalent
    } else {
        EquivalenceOutcome::SEquivalentOnly
    };
    Ok(EquivalenceReport { outcome, max_hessian_gap: max_gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;

    fn vplus1() -> Potential {
        Potential::shifted_harmonic(1.0, 1.0).unwrap()
    }

    fn worked_family() -> (Lagrangian, Lagrangian) {
        let base = Lagrangian::base(vplus1());
        let derived = build_sprime_lagrangian(&base, SigmaMap::HalfSquare, 0.0).unwrap();
        (base, derived)
    }

    /// Independent statement of the quartic closed form and its energy.
    fn quartic_oracle(x: f64, v: f64) -> (f64, f64) {
        let vv = 0.5 * x * x + 1.0;
        let lp = v.powi(4) / 24.0 + 0.5 * v * v * vv - 0.5 * vv * vv;
        let hp = v.powi(4) / 8.0 + 0.5 * v * v * vv + 0.5 * vv * vv;
        (lp, hp)
    }

    #[test]
    fn base_form_values() {
        let l = Lagrangian::base(vplus1());
        assert_relative_eq!(l.evaluate(0.0, 1.0).unwrap(), -0.5);
        assert_relative_eq!(l.d_dv(0.3, 0.7).unwrap(), 0.7);
        assert_relative_eq!(l.d2_dv2(5.0, -2.0).unwrap(), 1.0);
        assert_relative_eq!(l.d_dx(2.0, 0.0).unwrap(), -2.0);
    }

    #[test]
    fn closed_form_channels_match_oracle() {
        let (_, derived) = worked_family();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let x: f64 = rng.gen_range(-5.0..5.0);
            let v: f64 = rng.gen_range(-5.0..5.0);
            let (lp, hp) = quartic_oracle(x, v);
            assert_relative_eq!(derived.evaluate(x, v).unwrap(), lp, epsilon = 1e-12, max_relative = 1e-12);
            assert_relative_eq!(
                legendre_energy(&derived, x, v).unwrap(),
                hp,
                epsilon = 1e-12,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn quadrature_channels_match_closed_form() {
        let base = Lagrangian::base(vplus1());
        let numeric = build_sprime_lagrangian_quadrature(&base, SigmaMap::HalfSquare, 0.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let x: f64 = rng.gen_range(-5.0..5.0);
            let v: f64 = rng.gen_range(-5.0..5.0);
            let (lp, hp) = quartic_oracle(x, v);
            assert!((numeric.evaluate(x, v).unwrap() - lp).abs() <= 1e-10, "x = {x}, v = {v}");
            assert!((legendre_energy(&numeric, x, v).unwrap() - hp).abs() <= 1e-10);
        }
    }

    #[test]
    fn derived_momentum_and_hessian() {
        let (_, derived) = worked_family();
        // dL'/dv = v^3/6 + v V, d2L'/dv2 = v^2/2 + V = H of the base form
        let x = 0.3;
        let v = 0.7;
        let pot = 0.5 * x * x + 1.0;
        assert_relative_eq!(derived.d_dv(x, v).unwrap(), v * v * v / 6.0 + v * pot, epsilon = 1e-13);
        assert_relative_eq!(hessian(&derived, x, v).unwrap(), 0.5 * v * v + pot, epsilon = 1e-13);
    }

    #[test]
    fn numeric_x_derivatives_match_analytic() {
        let base = Lagrangian::base(vplus1());
        let numeric = build_sprime_lagrangian_quadrature(&base, SigmaMap::HalfSquare, 0.0).unwrap();
        let analytic = build_sprime_lagrangian(&base, SigmaMap::HalfSquare, 0.0).unwrap();
        for (x, v) in [(0.3, 0.7), (-1.2, 2.0), (2.5, -0.4), (0.0, 1.5)] {
            let dn = numeric.d_dx(x, v).unwrap();
            let da = analytic.d_dx(x, v).unwrap();
            assert!((dn - da).abs() <= 1e-6 * (1.0 + da.abs()), "d_dx {dn} vs {da}");
            let mn = numeric.d2_dxdv(x, v).unwrap();
            let ma = analytic.d2_dxdv(x, v).unwrap();
            assert!((mn - ma).abs() <= 1e-6 * (1.0 + ma.abs()), "d2_dxdv {mn} vs {ma}");
        }
    }

    #[test]
    fn identity_sigma_reproduces_base() {
        let base = Lagrangian::base(vplus1());
        let same = build_sprime_lagrangian(
            &base,
            SigmaMap::IdentityAffine { alpha: 1.0, beta: 0.0 },
            0.0,
        )
        .unwrap();
        for (x, v) in [(0.0, 0.5), (1.0, -2.0), (-2.0, 1.3)] {
            assert_relative_eq!(
                same.evaluate(x, v).unwrap(),
                base.evaluate(x, v).unwrap(),
                epsilon = 1e-10
            );
        }
        let region = PhaseRegion::new(-2.0, 2.0, -2.0, 2.0).unwrap();
        let rep = equivalence_test(&base, &same, &region, 15, 15).unwrap();
        assert_eq!(rep.outcome, EquivalenceOutcome::Equivalent);
    }

    #[test]
    fn legendre_identity_on_derived_forms() {
        // H' = Sigma(H) for the affine map as well, up to the additive
        // constant beta absorbed in the offset bookkeeping.
        let base = Lagrangian::base(vplus1());
        let sigma = SigmaMap::IdentityAffine { alpha: 2.0, beta: 0.0 };
        let derived = build_sprime_lagrangian(&base, sigma, 0.0).unwrap();
        for (x, v) in [(0.4, 1.1), (-1.0, 0.7), (1.7, -1.9)] {
            let h = legendre_energy(&base, x, v).unwrap();
            let hp = legendre_energy(&derived, x, v).unwrap();
            assert!((hp - sigma.eval(h)).abs() <= 1e-9, "hp {hp} vs Sigma(H) {}", sigma.eval(h));
        }
    }

    #[test]
    fn gauge_terms_are_equivalent() {
        let base = Lagrangian::base(vplus1());
        let region = PhaseRegion::new(-2.0, 2.0, -2.0, 2.0).unwrap();
        for gauge in [Gauge::Linear(1.0), Gauge::Quadratic(1.0), Gauge::Sine(1.0)] {
            let aug = base.clone().with_gauge(gauge);
            let rep = equivalence_test(&base, &aug, &region, 21, 21).unwrap();
            assert_eq!(rep.outcome, EquivalenceOutcome::Equivalent, "{gauge:?}");
            assert!(rep.max_hessian_gap <= 1e-12);
        }
    }

    #[test]
    fn scaled_form_is_s_equivalent_only() {
        let base = Lagrangian::base(vplus1());
        let doubled = base.clone().scaled(2.0).unwrap();
        let region = PhaseRegion::new(-2.0, 2.0, -2.0, 2.0).unwrap();
        let rep = equivalence_test(&base, &doubled, &region, 15, 15).unwrap();
        assert_eq!(rep.outcome, EquivalenceOutcome::SEquivalentOnly);
        assert_relative_eq!(rep.max_hessian_gap, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn derived_vs_base_is_s_equivalent_only() {
        let (base, derived) = worked_family();
        let region = PhaseRegion::new(-2.0, 2.0, -2.0, 2.0).unwrap();
        let rep = equivalence_test(&base, &derived, &region, 15, 15).unwrap();
        assert_eq!(rep.outcome, EquivalenceOutcome::SEquivalentOnly);
    }

    #[test]
    fn hessian_field_matches_base_energy_for_half_square() {
        // For Sigma = z^2/2 over the plain base form, G(x, u) equals the
        // base energy H(x, u) itself.
        let base = Lagrangian::base(vplus1());
        let field = HessianField::new(base.clone(), SigmaMap::HalfSquare);
        for (x, u) in [(0.0, 0.3), (1.0, -1.4), (-2.0, 2.2)] {
            let g = field.eval(x, u).unwrap();
            let h = legendre_energy(&base, x, u).unwrap();
            assert_relative_eq!(g, h, epsilon = 1e-13);
        }
    }

    #[test]
    fn degenerate_hessian_is_reported() {
        let base = Lagrangian::base(vplus1());
        let flat = base.scaled(0.0).unwrap();
        assert!(matches!(
            legendre_energy(&flat, 0.0, 1.0),
            Err(Error::DegenerateHessian(_))
        ));
    }

    #[test]
    fn hamiltonian_form_offset() {
        let (base, _) = worked_family();
        let mut hf = HamiltonianForm::new(base);
        hf.constant_offset = 2.5;
        // H = v^2/2 + V, at (0, 1): 0.5 + 1.0, plus the offset
        assert_relative_eq!(hf.evaluate(0.0, 1.0).unwrap(), 4.0, epsilon = 1e-13);
    }
}
