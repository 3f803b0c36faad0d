//! Algebra of the reduced four-equation system.
//!
//! State `u = (B, E, D, v)`, liquid fraction `L = 1 − (B + E + D)`,
//! flux
//!
//! ```text
//! F(u) = (B v, E v, D v, (3L − 2) v² / (2L) + γ (L + ln(1 − L)))
//! ```
//!
//! and reaction source `G(u) = (Γ_B, Γ_E, Γ_D, Γ_v)`. Anything that divides
//! by `L` or `1 − L` requires `0 < L < 1` and returns [`Error::Domain`]
//! otherwise.

use crate::error::{Error, Result};
use crate::linalg::Mat4;
use crate::scalar::{c, Scalar};

/// Point value of the conserved unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PhaseState<T> {
    /// Bacteria volume fraction.
    pub b: T,
    /// EPS volume fraction.
    pub e: T,
    /// Dead-cell volume fraction.
    pub d: T,
    /// Solid-phase velocity.
    pub v: T,
}

impl<T: Scalar> PhaseState<T> {
    pub fn new(b: T, e: T, d: T, v: T) -> Self {
        PhaseState { b, e, d, v }
    }

    pub fn from_array([b, e, d, v]: [T; 4]) -> Self {
        PhaseState { b, e, d, v }
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.b, self.e, self.d, self.v]
    }

    pub fn liquid_fraction(&self) -> T {
        liquid_fraction(self)
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }

    /// Volume fractions nonnegative and summing to at most one.
    pub fn is_physical(&self) -> bool {
        let zero = T::zero();
        self.b >= zero
            && self.e >= zero
            && self.d >= zero
            && self.b + self.e + self.d <= T::one()
            && self.v.is_finite()
    }

    /// `self + s · other`, componentwise.
    pub fn axpy(&self, s: T, other: &Self) -> Self {
        PhaseState {
            b: self.b + s * other.b,
            e: self.e + s * other.e,
            d: self.d + s * other.d,
            v: self.v + s * other.v,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-T::one(), other)
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        let a = self.to_array();
        let b = other.to_array();
        a.iter()
            .zip(&b)
            .fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).abs()))
    }
}

/// Physical coefficients of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    /// Bacteria growth rate `k_B` (1/time).
    pub k_b: T,
    /// EPS production rate `k_E` (1/time).
    pub k_e: T,
    /// Bacteria death rate `k_D` (1/time).
    pub k_d: T,
    /// Dead-cell consumption rate `k_N` (1/time).
    pub k_n: T,
    /// EPS decay rate `ε` (1/time).
    pub eps: T,
    /// Share of dying bacteria that becomes dead-cell mass (dimensionless).
    pub alpha: T,
    /// Pressure stiffness `γ` (velocity²); sets the acoustic wave speed.
    pub gamma: T,
    /// Interphase friction `M` (1/time).
    pub friction: T,
}

/// Rate multiplier of the `fast` preset.
pub const FAST_SCALE: f64 = 1e6;
pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_FRICTION: f64 = 1e-6;

impl<T: Scalar> ModelParams<T> {
    /// Reference biofilm rates with `γ = 1`, `M = 1e-6`.
    pub fn table1() -> Self {
        ModelParams {
            k_b: c(8e-6),
            k_e: c(12e-6),
            k_d: c(2e-7),
            k_n: c(1e-6),
            eps: c(1.25e-7),
            alpha: c(0.25),
            gamma: c(DEFAULT_GAMMA),
            friction: c(DEFAULT_FRICTION),
        }
    }

    /// [`table1`](Self::table1) with all rates and `M` multiplied by 1e6, so
    /// relaxation happens on O(1) time scales. `γ` is unchanged.
    pub fn fast() -> Self {
        Self::table1().with_rates_scaled(c(FAST_SCALE))
    }

    /// Multiplies `k_B, k_E, k_D, k_N, ε` and `M` by `factor`.
    pub fn with_rates_scaled(mut self, factor: T) -> Self {
        self.k_b *= factor;
        self.k_e *= factor;
        self.k_d *= factor;
        self.k_n *= factor;
        self.eps *= factor;
        self.friction *= factor;
        self
    }

    /// All coefficients finite and strictly positive.
    pub fn validate(&self) -> Result<()> {
        let named = [
            ("kB", self.k_b),
            ("kE", self.k_e),
            ("kD", self.k_d),
            ("kN", self.k_n),
            ("eps", self.eps),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("M", self.friction),
        ];
        for (name, x) in named {
            if !x.is_finite() || x <= T::zero() {
                return Err(Error::InvalidParameter(format!(
                    "{name} = {x:e} must be finite and strictly positive"
                )));
            }
        }
        Ok(())
    }

    pub fn max_rate(&self) -> T {
        [self.k_b, self.k_e, self.k_d, self.k_n, self.eps]
            .into_iter()
            .fold(T::zero(), T::max)
    }
}

/// Mass-exchange rates and momentum source at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionVector<T> {
    pub g_b: T,
    pub g_e: T,
    pub g_d: T,
    pub g_v: T,
}

impl<T: Scalar> ReactionVector<T> {
    /// Liquid exchange rate closing the mixture: `Γ_L = −(Γ_B + Γ_E + Γ_D)`.
    pub fn g_l(&self) -> T {
        -(self.g_b + self.g_e + self.g_d)
    }

    pub fn to_array(&self) -> [T; 4] {
        [self.g_b, self.g_e, self.g_d, self.g_v]
    }
}

pub fn liquid_fraction<T: Scalar>(u: &PhaseState<T>) -> T {
    T::one() - (u.b + u.e + u.d)
}

/// Liquid fraction, checked to lie strictly inside (0, 1).
pub(crate) fn interior_liquid<T: Scalar>(u: &PhaseState<T>) -> Result<T> {
    let l = liquid_fraction(u);
    if l > T::zero() && l < T::one() && u.v.is_finite() {
        Ok(l)
    } else {
        Err(Error::Domain(format!(
            "liquid fraction L = {:e} must lie strictly in (0, 1) (v = {:e})",
            l.as_f64(),
            u.v.as_f64()
        )))
    }
}

/// Liquid velocity recovered from the zero-net-flux constraint,
/// `v_L = (L − 1) / L · v`.
pub fn liquid_velocity<T: Scalar>(u: &PhaseState<T>) -> Result<T> {
    let l = interior_liquid(u)?;
    Ok((l - T::one()) / l * u.v)
}

pub fn reaction<T: Scalar>(u: &PhaseState<T>, p: &ModelParams<T>) -> Result<ReactionVector<T>> {
    let l = interior_liquid(u)?;
    Ok(reaction_with_liquid(u, l, p))
}

pub(crate) fn reaction_with_liquid<T: Scalar>(
    u: &PhaseState<T>,
    l: T,
    p: &ModelParams<T>,
) -> ReactionVector<T> {
    let g_b = p.k_b * u.b * l - p.k_d * u.b;
    let g_e = p.k_e * u.b * l - p.eps * u.e;
    let g_d = p.alpha * p.k_d * u.b - p.k_n * u.d;
    let g_l = -(g_b + g_e + g_d);
    let g_v = (g_l - p.friction) * u.v / (l * (T::one() - l));
    ReactionVector { g_b, g_e, g_d, g_v }
}

pub fn flux<T: Scalar>(u: &PhaseState<T>, p: &ModelParams<T>) -> Result<[T; 4]> {
    let l = interior_liquid(u)?;
    Ok(flux_with_liquid(u, l, p))
}

pub(crate) fn flux_with_liquid<T: Scalar>(u: &PhaseState<T>, l: T, p: &ModelParams<T>) -> [T; 4] {
    let v = u.v;
    let kinetic = (c::<T>(3.0) * l - c(2.0)) * v * v / (c::<T>(2.0) * l);
    let pressure = p.gamma * (l + (-l).ln_1p());
    [u.b * v, u.e * v, u.d * v, kinetic + pressure]
}

/// `η = Lγ / (1 − L) − v² / L²`; positive exactly on the symmetrizable set.
pub fn eta<T: Scalar>(u: &PhaseState<T>, p: &ModelParams<T>) -> Result<T> {
    let l = interior_liquid(u)?;
    Ok(eta_with_liquid(u, l, p))
}

fn eta_with_liquid<T: Scalar>(u: &PhaseState<T>, l: T, p: &ModelParams<T>) -> T {
    l * p.gamma / (T::one() - l) - u.v * u.v / (l * l)
}

/// `Δ = Lγ / (1 − L) − v² / L`; the eigenvalues are real iff `Δ ≥ 0`.
pub fn delta<T: Scalar>(u: &PhaseState<T>, p: &ModelParams<T>) -> Result<T> {
    let l = interior_liquid(u)?;
    Ok(delta_with_liquid(u, l, p))
}

fn delta_with_liquid<T: Scalar>(u: &PhaseState<T>, l: T, p: &ModelParams<T>) -> T {
    l * p.gamma / (T::one() - l) - u.v * u.v / l
}

/// Flux Jacobian `A(u) = ∂F/∂u`.
pub fn jacobian<T: Scalar>(u: &PhaseState<T>, p: &ModelParams<T>) -> Result<Mat4<T>> {
    let l = interior_liquid(u)?;
    let eta = eta_with_liquid(u, l, p);
    let v = u.v;
    let z = T::zero();
    Ok(Mat4([
        [v, z, z, u.b],
        [z, v, z, u.e],
        [z, z, v, u.d],
        [eta, eta, eta, (c::<T>(3.0) * l - c(2.0)) * v / l],
    ]))
}

/// Diagonal symmetrizer `A₀ = diag(η, Bη/E, Bη/D, B)`; `A₀·A` is symmetric.
pub fn symmetrizer<T: Scalar>(u: &PhaseState<T>, p: &ModelParams<T>) -> Result<Mat4<T>> {
    let l = interior_liquid(u)?;
    if u.e <= T::zero() || u.d <= T::zero() {
        return Err(Error::Domain(format!(
            "symmetrizer needs E > 0 and D > 0 (E = {:e}, D = {:e})",
            u.e.as_f64(),
            u.d.as_f64()
        )));
    }
    let eta = eta_with_liquid(u, l, p);
    if !(eta > T::zero()) {
        return Err(Error::NotSymmetrizable { eta: eta.as_f64() });
    }
    Ok(Mat4::from_diagonal([
        eta,
        u.b * eta / u.e,
        u.b * eta / u.d,
        u.b,
    ]))
}

/// Characteristic speeds in ascending order: `v` (twice) and
/// `(2L − 1)v / L ± √((1 − L)Δ)`.
pub fn eigenvalues<T: Scalar>(u: &PhaseState<T>, p: &ModelParams<T>) -> Result<[T; 4]> {
    let l = interior_liquid(u)?;
    eigenvalues_with_liquid(u, l, p)
}

pub(crate) fn eigenvalues_with_liquid<T: Scalar>(
    u: &PhaseState<T>,
    l: T,
    p: &ModelParams<T>,
) -> Result<[T; 4]> {
    let delta = delta_with_liquid(u, l, p);
    if delta < T::zero() {
        return Err(Error::ComplexEigenvalues {
            delta: delta.as_f64(),
        });
    }
    let center = (c::<T>(2.0) * l - T::one()) * u.v / l;
    let radius = ((T::one() - l) * delta).sqrt();
    let mut ev = [u.v, u.v, center - radius, center + radius];
    ev.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(ev)
}

/// Largest `|λ|` over the characteristic speeds.
pub(crate) fn max_abs_eigenvalue_with_liquid<T: Scalar>(
    u: &PhaseState<T>,
    l: T,
    p: &ModelParams<T>,
) -> Result<T> {
    let ev = eigenvalues_with_liquid(u, l, p)?;
    Ok(ev[0].abs().max(ev[3].abs()))
}

/// Velocity bound of the symmetrizable set: `L^{3/2} γ^{1/2} / (1 − L)^{1/2}`.
pub fn velocity_bound<T: Scalar>(u: &PhaseState<T>, p: &ModelParams<T>) -> Result<T> {
    let l = interior_liquid(u)?;
    Ok(velocity_bound_with_liquid(l, p))
}

fn velocity_bound_with_liquid<T: Scalar>(l: T, p: &ModelParams<T>) -> T {
    (l * l * l * p.gamma / (T::one() - l)).sqrt()
}

/// Membership in `W = {(B, E, D) ∈ [0,1]³, 0 < L < 1, |v| < L^{3/2}γ^{1/2}/(1−L)^{1/2}}`.
/// The boundary `η = 0` is outside.
pub fn in_hyperbolic_domain<T: Scalar>(u: &PhaseState<T>, p: &ModelParams<T>) -> bool {
    let Ok(l) = interior_liquid(u) else {
        return false;
    };
    let zero = T::zero();
    if u.b < zero || u.e < zero || u.d < zero {
        return false;
    }
    u.v.abs() < velocity_bound_with_liquid(l, p)
}
