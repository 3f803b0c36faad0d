//! Total dissipativity of the reaction source at the interior equilibrium.
//!
//! The source factors as `G(u) = D(u, ū)(u − ū)`. The system is totally
//! dissipative near `ū` when the symmetric part of `A₀(ū) D(ū, ū)` is
//! negative definite. That matrix splits into a 3×3 block coupling
//! `(B, E, D)` and a decoupled friction entry; the block is tested with the
//! Routh–Hurwitz conditions on its characteristic cubic, and the whole
//! matrix is cross-checked through its eigenvalues.

use crate::error::{Error, Result};
use crate::linalg::Mat4;
use crate::model::{self, interior_liquid, ModelParams, PhaseState};
use crate::scalar::{c, Scalar};

/// Relative band `|λ_max| ≤ MARGINAL_BAND · ‖S‖_max` in which definiteness
/// is reported as marginal.
pub const MARGINAL_BAND: f64 = 1e-14;

/// Bisection stops once the transition bracket is this narrow.
pub const TRANSITION_WIDTH: f64 = 1e-6;

/// EPS decay rate shared by every member of the one-parameter family.
pub const FAMILY_EPS: f64 = 1.25e-7;

/// The unique interior zero of the reaction terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint<T> {
    pub b: T,
    pub e: T,
    pub d: T,
    /// Always zero.
    pub v: T,
    /// `L̄ = kD / kB`, evaluated directly from the rates.
    pub l: T,
}

impl<T: Scalar> EquilibriumPoint<T> {
    pub fn state(&self) -> PhaseState<T> {
        PhaseState::new(self.b, self.e, self.d, self.v)
    }
}

/// Interior equilibrium
///
/// ```text
/// B̄ = (1 − kD/kB) / (1 + α kD/kN + kD kE/(ε kB)),
/// Ē = B̄ kE kD / (ε kB),   D̄ = B̄ α kD / kN,   v̄ = 0.
/// ```
pub fn equilibrium<T: Scalar>(p: &ModelParams<T>) -> Result<EquilibriumPoint<T>> {
    p.validate()?;
    if !(p.k_b > p.k_d) {
        return Err(Error::NoPositiveEquilibrium {
            k_b: p.k_b.as_f64(),
            k_d: p.k_d.as_f64(),
        });
    }
    let e_ratio = p.k_e * p.k_d / (p.eps * p.k_b);
    let d_ratio = p.alpha * p.k_d / p.k_n;
    let b = (T::one() - p.k_d / p.k_b) / (T::one() + d_ratio + e_ratio);
    Ok(EquilibriumPoint {
        b,
        e: b * e_ratio,
        d: b * d_ratio,
        v: T::zero(),
        l: p.k_d / p.k_b,
    })
}

/// Dissipation matrix with `G(u) = D(u, ū)(u − ū)` for every `u` with
/// `0 < L < 1`:
///
/// ```text
/// | −B kB          −B kB        −B kB       0                   |
/// | kE (L − B̄)     −(ε + kE B̄)  −kE B̄       0                   |
/// | kN D / B̄       0            −kN B / B̄   0                   |
/// | 0              0            0           (Γ_L − M)/(L(1 − L)) |
/// ```
///
/// The EPS row is the exact factorization of `Γ_E = kE B L − ε E` using
/// `kE B̄ L̄ = ε Ē`.
pub fn dissipation_matrix<T: Scalar>(
    u: &PhaseState<T>,
    ubar: &EquilibriumPoint<T>,
    p: &ModelParams<T>,
) -> Result<Mat4<T>> {
    let l = interior_liquid(u)?;
    let g = model::reaction_with_liquid(u, l, p);
    let z = T::zero();
    let bkb = u.b * p.k_b;
    Ok(Mat4([
        [-bkb, -bkb, -bkb, z],
        [
            p.k_e * (l - ubar.b),
            -(p.eps + p.k_e * ubar.b),
            -p.k_e * ubar.b,
            z,
        ],
        [p.k_n * u.d / ubar.b, z, -p.k_n * u.b / ubar.b, z],
        [z, z, z, (g.g_l() - p.friction) / (l * (T::one() - l))],
    ]))
}

/// Symmetric part of `A₀(ū) D(ū, ū)`.
pub fn symmetrized_a0d<T: Scalar>(p: &ModelParams<T>) -> Result<Mat4<T>> {
    let ubar = equilibrium(p)?;
    symmetrized_a0d_at(&ubar, p)
}

fn symmetrized_a0d_at<T: Scalar>(ubar: &EquilibriumPoint<T>, p: &ModelParams<T>) -> Result<Mat4<T>> {
    let u = ubar.state();
    let a0 = model::symmetrizer(&u, p)?;
    let d = dissipation_matrix(&u, ubar, p)?;
    Ok((a0 * d).symmetric_part())
}

/// Coefficients of `λ³ + a1 λ² + a2 λ + a3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhCoefficients<T> {
    pub a1: T,
    pub a2: T,
    pub a3: T,
}

/// The three Routh–Hurwitz conditions for a cubic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RhFlags {
    /// `a1 > 0`
    pub a1_positive: bool,
    /// `a3 > 0`
    pub a3_positive: bool,
    /// `a1 a2 − a3 > 0`
    pub hurwitz_positive: bool,
}

impl RhFlags {
    pub fn all(&self) -> bool {
        self.a1_positive && self.a3_positive && self.hurwitz_positive
    }

    pub fn as_array(&self) -> [bool; 3] {
        [self.a1_positive, self.a3_positive, self.hurwitz_positive]
    }
}

pub fn rh_check<T: Scalar>(a1: T, a2: T, a3: T) -> RhFlags {
    RhFlags {
        a1_positive: a1 > T::zero(),
        a3_positive: a3 > T::zero(),
        hurwitz_positive: a1 * a2 - a3 > T::zero(),
    }
}

/// The `(B, E, D)` block of [`symmetrized_a0d`] multiplied by `(kB − kD)/γ`.
///
/// `A₀(ū)` carries the factor `γ / (kB − kD)` on its first three diagonal
/// entries; removing it leaves a block whose entries are products of two
/// rates. The factor is positive, so definiteness is unaffected.
pub fn normalized_block<T: Scalar>(p: &ModelParams<T>) -> Result<[[T; 3]; 3]> {
    let s = symmetrized_a0d(p)?;
    Ok(normalize(&s, p))
}

fn normalize<T: Scalar>(s: &Mat4<T>, p: &ModelParams<T>) -> [[T; 3]; 3] {
    let scale = (p.k_b - p.k_d) / p.gamma;
    let mut block = [[T::zero(); 3]; 3];
    for (i, row) in block.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = scale * s[(i, j)];
        }
    }
    block
}

fn coefficients_of<T: Scalar>(m: &[[T; 3]; 3]) -> RhCoefficients<T> {
    let trace = m[0][0] + m[1][1] + m[2][2];
    let minor = |i: usize, j: usize| m[i][i] * m[j][j] - m[i][j] * m[j][i];
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    RhCoefficients {
        a1: -trace,
        a2: minor(0, 1) + minor(0, 2) + minor(1, 2),
        a3: -det,
    }
}

/// Characteristic-polynomial coefficients of [`normalized_block`]:
/// `a1 = −trace`, `a2 = Σ principal 2×2 minors`, `a3 = −det`.
pub fn rh_coefficients<T: Scalar>(p: &ModelParams<T>) -> Result<RhCoefficients<T>> {
    Ok(coefficients_of(&normalized_block(p)?))
}

/// The printed closed-form expressions for `a1, a2, a3`, evaluated verbatim.
/// Only used as a diagnostic next to [`rh_coefficients`].
pub fn closed_form_coefficients<T: Scalar>(p: &ModelParams<T>) -> Result<RhCoefficients<T>> {
    let ubar = equilibrium(p)?;
    let (b, kb, kd, kn, ke, e, al) = (ubar.b, p.k_b, p.k_d, p.k_n, p.k_e, p.eps, p.alpha);
    let two = c::<T>(2.0);
    let four = c::<T>(4.0);

    let a1 = b * kb * kd + e * e * kb / ke + e * b + kn * kn / al;

    let a2 = e * e * b * kb * kb * kd / ke
        + e * b * kb * kn * kn / al
        + e * kb * kd * kn * kn / al
        + b * kb * kd * (e * b * kb + e * kd + kd * kn + e * e) / two
        - b * b * kb * kb * (kd * kd + e * e) / two
        - kd * kd * (kn * kn + e * e) / four;

    let a3 = e * e * b * kb * kb * kd * kd * kn / (two * ke)
        + e * e * b * kb * kb * kd * kn * kn / (al * ke)
        + e * b * kb * kd * kn * kn * (b * kb + e + kd) / (two * al)
        + e * b * kb * kd * kd * kn * (e + b * kb) / four
        - e * b * kb * kd * (e * b * kb * kn + e * b * kb * kd + kd * kn * kn) / four
        - e * e * kb * kd * kd * (kn * kn + b * b * kb * kb) / (four * ke)
        - kn * kn * (e * e * kd * kd + e * e * b * b * kb * kb + b * b * kb * kb * kd * kd)
            / (four * al);

    Ok(RhCoefficients { a1, a2, a3 })
}

/// Numeric coefficients next to the closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormCheck<T> {
    pub numeric: RhCoefficients<T>,
    pub closed_form: RhCoefficients<T>,
    /// `|closed − numeric| / |numeric|` per coefficient.
    pub relative_difference: [T; 3],
    /// RH flags the closed forms would give.
    pub closed_form_flags: RhFlags,
}

impl<T: Scalar> ClosedFormCheck<T> {
    pub fn agrees(&self, tol: T) -> bool {
        self.relative_difference.iter().all(|&r| r <= tol)
    }
}

pub fn closed_form_check<T: Scalar>(p: &ModelParams<T>) -> Result<ClosedFormCheck<T>> {
    let numeric = rh_coefficients(p)?;
    let closed_form = closed_form_coefficients(p)?;
    let rel = |a: T, b: T| (a - b).abs() / b.abs();
    Ok(ClosedFormCheck {
        numeric,
        closed_form,
        relative_difference: [
            rel(closed_form.a1, numeric.a1),
            rel(closed_form.a2, numeric.a2),
            rel(closed_form.a3, numeric.a3),
        ],
        closed_form_flags: rh_check(closed_form.a1, closed_form.a2, closed_form.a3),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Definiteness {
    NegativeDefinite,
    /// Largest eigenvalue inside the rounding band around zero.
    Marginal,
    NotNegative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipativityReport<T> {
    pub equilibrium: EquilibriumPoint<T>,
    pub coefficients: RhCoefficients<T>,
    pub rh: RhFlags,
    /// Decoupled friction entry `−kB² M B̄ / (kD (kB − kD))`.
    pub block44: T,
    pub block44_negative: bool,
    /// Largest eigenvalue of the full 4×4 symmetric part.
    pub max_eigenvalue: T,
    pub definiteness: Definiteness,
    /// Whether the eigenvalue sign test agrees with the RH verdict (always
    /// true outside the marginal band).
    pub eigen_agrees: bool,
    pub verdict: bool,
}

/// Runs the full (D)-condition test at the equilibrium of `p`.
///
/// `verdict` requires all three RH conditions on the 3×3 block and a
/// negative friction entry. A marginal eigenvalue forces `false`.
pub fn is_totally_dissipative<T: Scalar>(p: &ModelParams<T>) -> Result<DissipativityReport<T>> {
    let ubar = equilibrium(p)?;
    let s = symmetrized_a0d_at(&ubar, p)?;
    let coefficients = coefficients_of(&normalize(&s, p));
    let rh = rh_check(coefficients.a1, coefficients.a2, coefficients.a3);
    let block44 = s[(3, 3)];
    let block44_negative = block44 < T::zero();

    let max_eigenvalue = s.symmetric_eigenvalues()[3];
    let band = c::<T>(MARGINAL_BAND) * s.max_abs();
    let definiteness = if max_eigenvalue < -band {
        Definiteness::NegativeDefinite
    } else if max_eigenvalue <= band {
        Definiteness::Marginal
    } else {
        Definiteness::NotNegative
    };

    let structural = rh.all() && block44_negative;
    let eigen_agrees = match definiteness {
        Definiteness::NegativeDefinite => structural,
        Definiteness::NotNegative => !structural,
        Definiteness::Marginal => true,
    };
    let verdict = structural && definiteness != Definiteness::Marginal;

    Ok(DissipativityReport {
        equilibrium: ubar,
        coefficients,
        rh,
        block44,
        block44_negative,
        max_eigenvalue,
        definiteness,
        eigen_agrees,
        verdict,
    })
}

/// One-parameter family with fixed `ε = 1.25e-7`:
/// `kN = 10aε, kE = 100aε, kD = 2aε, kB = 70aε, α = 0.25`.
pub fn param_family<T: Scalar>(a: T, gamma: T, friction: T) -> Result<ModelParams<T>> {
    if !a.is_finite() || a <= T::zero() {
        return Err(Error::InvalidParameter(format!(
            "family parameter a = {:e} must be positive",
            a.as_f64()
        )));
    }
    let eps = c::<T>(FAMILY_EPS);
    let params = ModelParams {
        k_b: c::<T>(70.0) * a * eps,
        k_e: c::<T>(100.0) * a * eps,
        k_d: c::<T>(2.0) * a * eps,
        k_n: c::<T>(10.0) * a * eps,
        eps,
        alpha: c(0.25),
        gamma,
        friction,
    };
    params.validate()?;
    Ok(params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow<T> {
    pub a: T,
    pub report: DissipativityReport<T>,
}

/// A verdict change between two grid points, refined by bisection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition<T> {
    pub lower: T,
    pub upper: T,
    /// Verdict at `lower`.
    pub verdict_below: bool,
}

impl<T: Scalar> Transition<T> {
    pub fn point(&self) -> T {
        c::<T>(0.5) * (self.lower + self.upper)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult<T> {
    pub rows: Vec<SweepRow<T>>,
    pub transitions: Vec<Transition<T>>,
}

/// Evaluates [`is_totally_dissipative`] on `a_min, a_min + step, …, ≤ a_max`
/// over [`param_family`] and refines every verdict change.
pub fn sweep<T: Scalar>(
    a_min: T,
    a_max: T,
    step: T,
    gamma: T,
    friction: T,
) -> Result<SweepResult<T>> {
    let finite = a_min.is_finite() && a_max.is_finite() && step.is_finite();
    if !finite || a_min <= T::zero() || a_max < a_min || step <= T::zero() {
        return Err(Error::InvalidParameter(format!(
            "sweep range needs 0 < a_min <= a_max and step > 0 (got {:e}, {:e}, {:e})",
            a_min.as_f64(),
            a_max.as_f64(),
            step.as_f64()
        )));
    }
    let span = ((a_max - a_min) / step).as_f64();
    let count = (span + 1e-9).floor() as usize + 1;

    let mut rows = Vec::with_capacity(count);
    for i in 0..count {
        let a = a_min + T::lit(i as f64) * step;
        let report = is_totally_dissipative(&param_family(a, gamma, friction)?)?;
        rows.push(SweepRow { a, report });
    }

    let verdict_at = |a: T| -> bool {
        param_family(a, gamma, friction)
            .and_then(|p| is_totally_dissipative(&p))
            .map(|r| r.verdict)
            .unwrap_or(false)
    };
    let width = c::<T>(TRANSITION_WIDTH);
    let transitions = rows
        .windows(2)
        .filter(|w| w[0].report.verdict != w[1].report.verdict)
        .map(|w| {
            let verdict_below = w[0].report.verdict;
            let (mut lo, mut hi) = (w[0].a, w[1].a);
            while hi - lo > width {
                let mid = c::<T>(0.5) * (lo + hi);
                if verdict_at(mid) == verdict_below {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Transition {
                lower: lo,
                upper: hi,
                verdict_below,
            }
        })
        .collect();

    Ok(SweepResult { rows, transitions })
}
