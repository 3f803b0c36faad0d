//! Discrete Sobolev norms of the deviation from equilibrium, the
//! sup-plus-integral functional `N_l`, and exponential decay fitting.

use crate::dissipativity::EquilibriumPoint;
use crate::error::{Error, Result};
use crate::model::PhaseState;
use crate::scalar::{c, Scalar};
use crate::solver::BoundaryCondition;

/// Minimum number of cells for the boundary stencils.
pub const MIN_NORM_CELLS: usize = 5;

/// Minimum number of samples inside a fit window.
pub const MIN_FIT_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SobolevNorms<T> {
    pub l2: T,
    pub h1: T,
    pub h2: T,
}

/// Norms of `w = u − ū` on a uniform grid.
///
/// Derivatives use second-order central differences; with
/// [`BoundaryCondition::Periodic`] the stencils wrap, otherwise the two end
/// cells use second-order one-sided stencils.
#[allow(clippy::needless_range_loop)]
pub fn discrete_norms<T: Scalar>(
    cells: &[PhaseState<T>],
    ubar: &EquilibriumPoint<T>,
    dx: T,
    bc: BoundaryCondition,
) -> Result<SobolevNorms<T>> {
    let n = cells.len();
    if n < MIN_NORM_CELLS {
        return Err(Error::GridTooSmall {
            cells: n,
            min: MIN_NORM_CELLS,
        });
    }
    let ub = ubar.state().to_array();
    let w: Vec<[T; 4]> = cells
        .iter()
        .map(|u| {
            let a = u.to_array();
            [a[0] - ub[0], a[1] - ub[1], a[2] - ub[2], a[3] - ub[3]]
        })
        .collect();

    let two = c::<T>(2.0);
    let inv_2dx = T::one() / (two * dx);
    let inv_dx2 = T::one() / (dx * dx);
    let (mut s0, mut s1, mut s2) = (T::zero(), T::zero(), T::zero());

    for i in 0..n {
        for k in 0..4 {
            let at = |j: usize| w[j][k];
            let (d1, d2) = match bc {
                BoundaryCondition::Periodic => {
                    let (im, ip) = ((i + n - 1) % n, (i + 1) % n);
                    (
                        (at(ip) - at(im)) * inv_2dx,
                        (at(ip) - two * at(i) + at(im)) * inv_dx2,
                    )
                }
                BoundaryCondition::EquilibriumDirichlet if i == 0 => (
                    (-c::<T>(3.0) * at(0) + c::<T>(4.0) * at(1) - at(2)) * inv_2dx,
                    (two * at(0) - c::<T>(5.0) * at(1) + c::<T>(4.0) * at(2) - at(3)) * inv_dx2,
                ),
                BoundaryCondition::EquilibriumDirichlet if i == n - 1 => (
                    (c::<T>(3.0) * at(n - 1) - c::<T>(4.0) * at(n - 2) + at(n - 3)) * inv_2dx,
                    (two * at(n - 1) - c::<T>(5.0) * at(n - 2) + c::<T>(4.0) * at(n - 3)
                        - at(n - 4))
                        * inv_dx2,
                ),
                BoundaryCondition::EquilibriumDirichlet => (
                    (at(i + 1) - at(i - 1)) * inv_2dx,
                    (at(i + 1) - two * at(i) + at(i - 1)) * inv_dx2,
                ),
            };
            s0 += at(i) * at(i);
            s1 += d1 * d1;
            s2 += d2 * d2;
        }
    }
    let l2sq = s0 * dx;
    let h1sq = l2sq + s1 * dx;
    let h2sq = h1sq + s2 * dx;
    Ok(SobolevNorms {
        l2: l2sq.sqrt(),
        h1: h1sq.sqrt(),
        h2: h2sq.sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSample<T> {
    pub t: T,
    pub l2: T,
    pub h1: T,
    pub h2: T,
    /// `½ · h2²`
    pub energy: T,
}

impl<T: Scalar> NormSample<T> {
    pub fn new(t: T, norms: SobolevNorms<T>) -> Self {
        NormSample {
            t,
            l2: norms.l2,
            h1: norms.h1,
            h2: norms.h2,
            energy: c::<T>(0.5) * norms.h2 * norms.h2,
        }
    }

    pub fn norm(&self, level: SobolevLevel) -> T {
        match level {
            SobolevLevel::L2 => self.l2,
            SobolevLevel::H1 => self.h1,
            SobolevLevel::H2 => self.h2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SobolevLevel {
    L2,
    H1,
    H2,
}

impl SobolevLevel {
    pub fn from_order(l: u8) -> Option<Self> {
        match l {
            0 => Some(Self::L2),
            1 => Some(Self::H1),
            2 => Some(Self::H2),
            _ => None,
        }
    }
}

/// Time series of norms with strictly increasing times.
#[derive(Debug, Clone, PartialEq)]
pub struct NormTrace<T> {
    samples: Vec<NormSample<T>>,
    pub dx: T,
}

impl<T: Scalar> NormTrace<T> {
    pub fn new(dx: T) -> Self {
        NormTrace {
            samples: Vec::new(),
            dx,
        }
    }

    pub fn push(&mut self, sample: NormSample<T>) -> Result<()> {
        if let Some(last) = self.samples.last() {
            if !(sample.t > last.t) {
                return Err(Error::InvalidParameter(format!(
                    "trace times must increase strictly ({:e} after {:e})",
                    sample.t.as_f64(),
                    last.t.as_f64()
                )));
            }
        }
        let norms = [sample.l2, sample.h1, sample.h2];
        if norms.iter().any(|x| !(*x >= T::zero())) {
            return Err(Error::InvalidParameter(format!(
                "trace norms must be nonnegative at t = {:e}",
                sample.t.as_f64()
            )));
        }
        self.samples.push(sample);
        Ok(())
    }

    /// Builds a trace from `(t, l2, h1, h2)` rows; energy is derived.
    pub fn from_norms(dx: T, rows: impl IntoIterator<Item = (T, T, T, T)>) -> Result<Self> {
        let mut trace = NormTrace::new(dx);
        for (t, l2, h1, h2) in rows {
            trace.push(NormSample::new(t, SobolevNorms { l2, h1, h2 }))?;
        }
        Ok(trace)
    }

    pub fn samples(&self) -> &[NormSample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn extent(&self) -> Option<(T, T)> {
        Some((self.samples.first()?.t, self.samples.last()?.t))
    }
}

/// `N_l(t)` with `N_l² = sup_{τ ≤ t} ‖w(τ)‖_l² + ∫₀ᵗ ‖w(τ)‖_l² dτ`.
///
/// The integral uses the trapezoidal rule; for `t` between samples the
/// squared norm is interpolated linearly.
pub fn functional_n<T: Scalar>(trace: &NormTrace<T>, level: SobolevLevel, t: T) -> Result<T> {
    let samples = trace.samples();
    let (start, end) = trace.extent().ok_or(Error::InsufficientData {
        samples: 0,
        required: 1,
    })?;
    if !(t >= start && t <= end) {
        return Err(Error::OutOfRange {
            t: t.as_f64(),
            start: start.as_f64(),
            end: end.as_f64(),
        });
    }
    let sq = |s: &NormSample<T>| {
        let x = s.norm(level);
        x * x
    };
    let half = c::<T>(0.5);
    let mut sup = sq(&samples[0]);
    let mut integral = T::zero();
    for pair in samples.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if a.t >= t {
            break;
        }
        let (ya, yb) = (sq(a), sq(b));
        if b.t <= t {
            integral += half * (b.t - a.t) * (ya + yb);
            sup = sup.max(yb);
        } else {
            let y_t = ya + (yb - ya) * (t - a.t) / (b.t - a.t);
            integral += half * (t - a.t) * (ya + y_t);
            sup = sup.max(y_t);
        }
    }
    Ok((sup + integral).sqrt())
}

/// Closed time interval of a fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitWindow<T> {
    pub t_start: T,
    pub t_end: T,
}

impl<T: Scalar> FitWindow<T> {
    /// Window from `t0 + fraction · (t_last − t0)` to the end of the trace.
    pub fn from_start_fraction(trace: &NormTrace<T>, fraction: T) -> Result<Self> {
        if !(fraction >= T::zero() && fraction < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "window start fraction {:e} must lie in [0, 1)",
                fraction.as_f64()
            )));
        }
        let (t0, t1) = trace.extent().ok_or(Error::InsufficientData {
            samples: 0,
            required: MIN_FIT_SAMPLES,
        })?;
        Ok(FitWindow {
            t_start: t0 + fraction * (t1 - t0),
            t_end: t1,
        })
    }

    /// Second half of the trace.
    pub fn second_half(trace: &NormTrace<T>) -> Result<Self> {
        Self::from_start_fraction(trace, c(0.5))
    }
}

/// Least-squares fit `h2(t) ≈ C1 · h2(0) · e^{−βt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit<T> {
    /// Decay rate; positive for decay.
    pub beta: T,
    /// Prefactor relative to the first sample of the trace.
    pub c1: T,
    pub r_squared: T,
    /// Window actually used.
    pub window: FitWindow<T>,
    pub samples: usize,
    /// True when a zero norm forced the window to end early.
    pub shrunk: bool,
}

/// Fits a line through `(t, ln h2)` over `window`.
pub fn fit_decay<T: Scalar>(trace: &NormTrace<T>, window: FitWindow<T>) -> Result<DecayFit<T>> {
    let (t0, t1) = trace.extent().ok_or(Error::InsufficientData {
        samples: 0,
        required: MIN_FIT_SAMPLES,
    })?;
    if !(window.t_start >= t0 && window.t_end <= t1) || !(window.t_start < window.t_end) {
        return Err(Error::OutOfRange {
            t: window.t_start.as_f64(),
            start: t0.as_f64(),
            end: t1.as_f64(),
        });
    }
    let mut in_window: Vec<&NormSample<T>> = trace
        .samples()
        .iter()
        .filter(|s| s.t >= window.t_start && s.t <= window.t_end)
        .collect();
    if in_window.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            samples: in_window.len(),
            required: MIN_FIT_SAMPLES,
        });
    }

    let mut shrunk = false;
    if let Some(pos) = in_window.iter().position(|s| !(s.h2 > T::zero())) {
        let t_bad = in_window[pos].t;
        in_window.truncate(pos);
        if in_window.len() < MIN_FIT_SAMPLES {
            return Err(Error::NonPositiveNorm { t: t_bad.as_f64() });
        }
        shrunk = true;
    }

    let n = T::lit(in_window.len() as f64);
    let t_mean = in_window.iter().fold(T::zero(), |acc, s| acc + s.t) / n;
    let y_mean = in_window.iter().fold(T::zero(), |acc, s| acc + s.h2.ln()) / n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for s in &in_window {
        let dt = s.t - t_mean;
        let dy = s.h2.ln() - y_mean;
        sxx += dt * dt;
        sxy += dt * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * t_mean;
    let ss_res = in_window.iter().fold(T::zero(), |acc, s| {
        let r = s.h2.ln() - (y_mean + slope * (s.t - t_mean));
        acc + r * r
    });
    let r_squared = if syy > T::zero() {
        (T::one() - ss_res / syy).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };

    let h2_initial = trace.samples()[0].h2;
    Ok(DecayFit {
        beta: -slope,
        c1: intercept.exp() / h2_initial,
        r_squared,
        window: FitWindow {
            t_start: in_window[0].t,
            t_end: in_window[in_window.len() - 1].t,
        },
        samples: in_window.len(),
        shrunk,
    })
}
