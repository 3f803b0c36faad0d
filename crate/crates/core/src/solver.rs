//! Explicit finite-volume solver for `∂t u + ∂x F(u) = G(u)` on an interval.
//!
//! Cells carry averages of `(B, E, D, v)`. Interfaces use the local Rusanov
//! flux with the analytic characteristic speeds, time stepping is SSP-RK2
//! (Heun) with the source evaluated inside each stage. Ghost cells wrap for
//! periodic boundaries or hold the equilibrium state otherwise.

use std::f64::consts::PI;

use crate::analysis::{discrete_norms, NormSample, NormTrace};
use crate::dissipativity::{self, EquilibriumPoint};
use crate::error::{Error, Result};
use crate::model::{self, interior_liquid, ModelParams, PhaseState};
use crate::scalar::{c, Scalar};

/// Lower bound kept by `B`, `E` and `D` in every cell.
pub const COMPONENT_FLOOR: f64 = 1e-6;

pub const MIN_CELLS: usize = 16;

/// Fraction of `1/ρ(D(ū, ū))` allowed as time step for the explicit source.
pub const SOURCE_DT_FACTOR: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Periodic,
    /// Ghost cells frozen at the equilibrium state.
    EquilibriumDirichlet,
}

impl BoundaryCondition {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryCondition::Periodic => "periodic",
            BoundaryCondition::EquilibriumDirichlet => "equilibrium-dirichlet",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "periodic" => Some(Self::Periodic),
            "equilibrium-dirichlet" => Some(Self::EquilibriumDirichlet),
            _ => None,
        }
    }
}

/// Uniform cell-centred grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    pub x_min: T,
    pub x_max: T,
    pub nx: usize,
}

impl<T: Scalar> Grid1D<T> {
    pub fn new(x_min: T, x_max: T, nx: usize) -> Result<Self> {
        let grid = Grid1D { x_min, x_max, nx };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < MIN_CELLS {
            return Err(Error::GridTooSmall {
                cells: self.nx,
                min: MIN_CELLS,
            });
        }
        if !(self.x_min.is_finite() && self.x_max.is_finite() && self.x_max > self.x_min) {
            return Err(Error::InvalidParameter(format!(
                "grid needs finite x_min < x_max (got {:e}, {:e})",
                self.x_min.as_f64(),
                self.x_max.as_f64()
            )));
        }
        Ok(())
    }

    pub fn length(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn dx(&self) -> T {
        self.length() / T::lit(self.nx as f64)
    }

    pub fn center(&self, i: usize) -> T {
        self.x_min + (T::lit(i as f64) + c(0.5)) * self.dx()
    }
}

/// Spatial shape of the initial perturbation, unit peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile<T> {
    /// `exp(−(x − center)² / width²)`
    Gaussian { width: T, center: T },
    /// `sin(2πk (x − x_min) / (x_max − x_min))`
    Sine { wavenumber: T },
    /// Constant one.
    Uniform,
}

impl<T: Scalar> Profile<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Profile::Gaussian { .. } => "gaussian",
            Profile::Sine { .. } => "sine",
            Profile::Uniform => "uniform",
        }
    }

    pub fn shape(&self, x: T, grid: &Grid1D<T>) -> T {
        match *self {
            Profile::Gaussian { width, center } => {
                let s = (x - center) / width;
                (-s * s).exp()
            }
            Profile::Sine { wavenumber } => {
                (c::<T>(2.0 * PI) * wavenumber * (x - grid.x_min) / grid.length()).sin()
            }
            Profile::Uniform => T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Perturbation<T> {
    pub profile: Profile<T>,
    /// Per-component amplitude for `(B, E, D, v)`.
    pub amplitude: [T; 4],
}

impl<T: Scalar> Perturbation<T> {
    pub fn none() -> Self {
        Perturbation {
            profile: Profile::Uniform,
            amplitude: [T::zero(); 4],
        }
    }
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Table1,
    /// Reference rates and friction multiplied by [`model::FAST_SCALE`].
    Fast,
    Custom,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Table1 => "table1",
            Preset::Fast => "fast",
            Preset::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "table1" => Some(Self::Table1),
            "fast" => Some(Self::Fast),
            "custom" => Some(Self::Custom),
            _ => None,
        }
    }

    /// Factor applied to the rates and friction.
    pub fn scale_factor(&self) -> f64 {
        match self {
            Preset::Fast => model::FAST_SCALE,
            Preset::Table1 | Preset::Custom => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T> {
    pub grid: Grid1D<T>,
    /// Courant number in (0, 1].
    pub cfl: T,
    pub t_end: T,
    pub bc: BoundaryCondition,
    pub perturbation: Perturbation<T>,
    /// Snapshot cadence in steps.
    pub snapshot_every: usize,
    /// Resolved parameters (any preset scaling already applied).
    pub params: ModelParams<T>,
    /// Provenance of `params`.
    pub preset: Preset,
    /// Max-norm radius of the ball around `ū` the trajectory is checked against.
    pub omega_radius: T,
    /// Optional extra cap on the time step.
    pub dt_max: Option<T>,
}

impl<T: Scalar> SimConfig<T> {
    /// Defaults: `cfl = 0.9`, `t_end = 10`, equilibrium ghosts, no
    /// perturbation, snapshots every 100 steps, `r = 0.1`.
    pub fn new(params: ModelParams<T>, grid: Grid1D<T>) -> Self {
        SimConfig {
            grid,
            cfl: c(0.9),
            t_end: c(10.0),
            bc: BoundaryCondition::EquilibriumDirichlet,
            perturbation: Perturbation::none(),
            snapshot_every: 100,
            params,
            preset: Preset::Custom,
            omega_radius: c(0.1),
            dt_max: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.params.validate()?;
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "cfl = {:e} must lie in (0, 1]",
                self.cfl.as_f64()
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= T::zero()) {
            return Err(Error::InvalidParameter("t_end must be finite and >= 0".into()));
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidParameter("snapshot_every must be >= 1".into()));
        }
        if !(self.omega_radius > T::zero()) {
            return Err(Error::InvalidParameter("omega radius must be positive".into()));
        }
        if let Some(dt) = self.dt_max {
            if !(dt > T::zero()) {
                return Err(Error::InvalidParameter("dt_max must be positive".into()));
            }
        }
        if self.perturbation.amplitude.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("perturbation amplitudes must be finite".into()));
        }
        match self.perturbation.profile {
            Profile::Gaussian { width, center } => {
                if !(width > T::zero()) || !center.is_finite() {
                    return Err(Error::InvalidParameter(
                        "gaussian width must be positive and center finite".into(),
                    ));
                }
            }
            Profile::Sine { wavenumber } => {
                if !wavenumber.is_finite() {
                    return Err(Error::InvalidParameter("sine wavenumber must be finite".into()));
                }
            }
            Profile::Uniform => {}
        }
        Ok(())
    }
}

/// Cell averages at a time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState<T> {
    pub cells: Vec<PhaseState<T>>,
    pub t: T,
    pub step: usize,
}

impl<T: Scalar> FieldState<T> {
    pub fn uniform(u: PhaseState<T>, nx: usize) -> Self {
        FieldState {
            cells: vec![u; nx],
            t: T::zero(),
            step: 0,
        }
    }

    /// Largest `‖u_i − ū‖_∞` over the cells.
    pub fn max_deviation(&self, ubar: &EquilibriumPoint<T>) -> T {
        let ub = ubar.state();
        self.cells
            .iter()
            .fold(T::zero(), |acc, u| acc.max(u.max_abs_diff(&ub)))
    }

    /// `Σ (B + E + D) dx`
    pub fn solid_mass(&self, dx: T) -> T {
        self.cells
            .iter()
            .fold(T::zero(), |acc, u| acc + (u.b + u.e + u.d))
            * dx
    }
}

/// Why a cell is not admissible for the solver, if it is not.
pub fn admissibility_violation<T: Scalar>(u: &PhaseState<T>, p: &ModelParams<T>) -> Option<String> {
    if !u.is_finite() {
        return Some("non-finite component".into());
    }
    let floor = c::<T>(COMPONENT_FLOOR);
    let ceiling = T::one() - floor;
    for (name, x) in [("B", u.b), ("E", u.e), ("D", u.d)] {
        if !(x >= floor && x <= ceiling) {
            return Some(format!(
                "{name} = {:e} outside [{COMPONENT_FLOOR:e}, 1 - {COMPONENT_FLOOR:e}]",
                x.as_f64()
            ));
        }
    }
    if !model::in_hyperbolic_domain(u, p) {
        let l = u.liquid_fraction();
        return Some(match model::velocity_bound(u, p) {
            Ok(bound) => format!(
                "|v| = {:e} not below the symmetrizability bound {:e} (L = {:e})",
                u.v.abs().as_f64(),
                bound.as_f64(),
                l.as_f64()
            ),
            Err(_) => format!("liquid fraction L = {:e} outside (0, 1)", l.as_f64()),
        });
    }
    None
}

/// `u_i = ū + amplitude ⊙ profile(x_i)`, without admissibility checks.
pub fn build_perturbed_field<T: Scalar>(cfg: &SimConfig<T>, ubar: &EquilibriumPoint<T>) -> FieldState<T> {
    let base = ubar.state().to_array();
    let amp = cfg.perturbation.amplitude;
    let cells = (0..cfg.grid.nx)
        .map(|i| {
            let s = cfg.perturbation.profile.shape(cfg.grid.center(i), &cfg.grid);
            PhaseState::from_array([
                base[0] + amp[0] * s,
                base[1] + amp[1] * s,
                base[2] + amp[2] * s,
                base[3] + amp[3] * s,
            ])
        })
        .collect();
    FieldState {
        cells,
        t: T::zero(),
        step: 0,
    }
}

/// Perturbed equilibrium with every cell checked against `W` and the floors.
pub fn init_perturbation<T: Scalar>(cfg: &SimConfig<T>) -> Result<FieldState<T>> {
    cfg.validate()?;
    let ubar = dissipativity::equilibrium(&cfg.params)?;
    let field = build_perturbed_field(cfg, &ubar);
    for (cell, u) in field.cells.iter().enumerate() {
        if let Some(reason) = admissibility_violation(u, &cfg.params) {
            return Err(Error::PerturbationTooLarge { cell, reason });
        }
    }
    Ok(field)
}

/// Largest characteristic speed over the cells.
pub fn max_wave_speed<T: Scalar>(state: &FieldState<T>, p: &ModelParams<T>) -> Result<T> {
    state.cells.iter().try_fold(T::zero(), |acc, u| {
        let l = interior_liquid(u)?;
        Ok(acc.max(model::max_abs_eigenvalue_with_liquid(u, l, p)?))
    })
}

/// Local Rusanov flux `½(F(uL) + F(uR)) − ½ s (uR − uL)`, `s = max |λ|` over
/// both states.
pub fn numerical_flux<T: Scalar>(
    ul: &PhaseState<T>,
    ur: &PhaseState<T>,
    p: &ModelParams<T>,
) -> Result<[T; 4]> {
    for u in [ul, ur] {
        if !model::in_hyperbolic_domain(u, p) {
            return Err(Error::Domain(format!(
                "Rusanov flux needs states in the hyperbolic domain, got {:?}",
                u.to_array().map(|x| x.as_f64())
            )));
        }
    }
    let (fl, sl) = cell_flux(ul, p)?;
    let (fr, sr) = cell_flux(ur, p)?;
    Ok(rusanov(&fl, &fr, ul, ur, sl.max(sr)))
}

fn cell_flux<T: Scalar>(u: &PhaseState<T>, p: &ModelParams<T>) -> Result<([T; 4], T)> {
    let l = interior_liquid(u)?;
    let f = model::flux_with_liquid(u, l, p);
    let s = model::max_abs_eigenvalue_with_liquid(u, l, p)?;
    Ok((f, s))
}

#[inline]
fn rusanov<T: Scalar>(
    fl: &[T; 4],
    fr: &[T; 4],
    ul: &PhaseState<T>,
    ur: &PhaseState<T>,
    s: T,
) -> [T; 4] {
    let half = c::<T>(0.5);
    let a = ul.to_array();
    let b = ur.to_array();
    let mut out = [T::zero(); 4];
    for k in 0..4 {
        out[k] = half * (fl[k] + fr[k]) - half * s * (b[k] - a[k]);
    }
    out
}

/// Cell whose evaluation failed, with the cause.
type CellFailure = (usize, Error);

/// Semi-discrete scheme and SSP-RK2 stepping for one configuration.
#[derive(Debug, Clone)]
pub struct Solver<T> {
    cfg: SimConfig<T>,
    ubar: EquilibriumPoint<T>,
    source_dt_cap: T,
}

impl<T: Scalar> Solver<T> {
    pub fn new(cfg: SimConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let ubar = dissipativity::equilibrium(&cfg.params)?;
        let d = dissipativity::dissipation_matrix(&ubar.state(), &ubar, &cfg.params)?;
        let rho = d.spectral_radius();
        let source_dt_cap = if rho > T::zero() {
            c::<T>(SOURCE_DT_FACTOR) / rho
        } else {
            T::infinity()
        };
        Ok(Solver {
            cfg,
            ubar,
            source_dt_cap,
        })
    }

    pub fn config(&self) -> &SimConfig<T> {
        &self.cfg
    }

    pub fn equilibrium(&self) -> &EquilibriumPoint<T> {
        &self.ubar
    }

    /// `0.5 / ρ(D(ū, ū))`
    pub fn source_dt_cap(&self) -> T {
        self.source_dt_cap
    }

    /// `min(cfl / (s_max/dx + ρ/2), 0.5 / ρ, dt_max)` with `ρ = ρ(D(ū, ū))`.
    ///
    /// The first term keeps `−2·cfl·s dt/dx − ρ dt` (the most negative
    /// eigenvalue of the linearized scheme) inside Heun's real stability
    /// interval `[−2, 0]`; with `ρ = 0` it is the plain CFL rule.
    pub fn time_step(&self, state: &FieldState<T>) -> Result<T> {
        let s = max_wave_speed(state, &self.cfg.params)?;
        let mut dt = self.source_dt_cap;
        let rho_half = if self.source_dt_cap.is_finite() {
            c::<T>(0.25) / self.source_dt_cap
        } else {
            T::zero()
        };
        let rate = s / self.cfg.grid.dx() + rho_half;
        if rate > T::zero() {
            dt = dt.min(self.cfg.cfl / rate);
        }
        if let Some(cap) = self.cfg.dt_max {
            dt = dt.min(cap);
        }
        Ok(dt)
    }

    /// `du_i/dt = −(f_{i+1/2} − f_{i−1/2}) / dx + G(u_i)`.
    pub fn rhs(&self, cells: &[PhaseState<T>]) -> Result<Vec<[T; 4]>> {
        self.rhs_cells(cells).map_err(|(_, e)| e)
    }

    fn rhs_cells(&self, cells: &[PhaseState<T>]) -> std::result::Result<Vec<[T; 4]>, CellFailure> {
        let n = cells.len();
        let p = &self.cfg.params;
        let (left, right) = match self.cfg.bc {
            BoundaryCondition::Periodic => (cells[n - 1], cells[0]),
            BoundaryCondition::EquilibriumDirichlet => (self.ubar.state(), self.ubar.state()),
        };

        // index 0 and n + 1 are ghosts
        let mut fluxes = Vec::with_capacity(n + 2);
        let mut liquid = Vec::with_capacity(n + 2);
        let padded = std::iter::once(&left).chain(cells).chain(std::iter::once(&right));
        for (j, u) in padded.enumerate() {
            let cell = j.saturating_sub(1).min(n - 1);
            let l = interior_liquid(u).map_err(|e| (cell, e))?;
            let s = model::max_abs_eigenvalue_with_liquid(u, l, p).map_err(|e| (cell, e))?;
            fluxes.push((model::flux_with_liquid(u, l, p), s));
            liquid.push(l);
        }
        let at = |j: usize| -> &PhaseState<T> {
            if j == 0 {
                &left
            } else if j == n + 1 {
                &right
            } else {
                &cells[j - 1]
            }
        };

        let interface: Vec<[T; 4]> = (0..=n)
            .map(|j| {
                let (fl, sl) = &fluxes[j];
                let (fr, sr) = &fluxes[j + 1];
                rusanov(fl, fr, at(j), at(j + 1), sl.max(*sr))
            })
            .collect();

        let inv_dx = T::one() / self.cfg.grid.dx();
        let out = (0..n)
            .map(|i| {
                let g = model::reaction_with_liquid(&cells[i], liquid[i + 1], p).to_array();
                let mut r = [T::zero(); 4];
                for k in 0..4 {
                    r[k] = -(interface[i + 1][k] - interface[i][k]) * inv_dx + g[k];
                }
                r
            })
            .collect();
        Ok(out)
    }

    fn stage_error(&self, t: T, cells: &[PhaseState<T>], (cell, err): CellFailure) -> Error {
        let u = cells[cell];
        if !u.is_finite() {
            return Error::NonFiniteValue { cell, t: t.as_f64() };
        }
        match err {
            Error::ComplexEigenvalues { .. } => err,
            other => Error::LeftHyperbolicDomain {
                cell,
                t: t.as_f64(),
                state: u.to_array().map(|x| x.as_f64()),
                reason: other.to_string(),
            },
        }
    }

    fn check_cells(&self, t: T, cells: &[PhaseState<T>]) -> Result<()> {
        for (cell, u) in cells.iter().enumerate() {
            if !u.is_finite() {
                return Err(Error::NonFiniteValue { cell, t: t.as_f64() });
            }
            if let Some(reason) = admissibility_violation(u, &self.cfg.params) {
                return Err(Error::LeftHyperbolicDomain {
                    cell,
                    t: t.as_f64(),
                    state: u.to_array().map(|x| x.as_f64()),
                    reason,
                });
            }
        }
        Ok(())
    }

    /// Forward-Euler predictor `u + dt · L(u)` (first Heun stage).
    pub fn euler_stage(&self, state: &FieldState<T>, dt: T) -> Result<Vec<PhaseState<T>>> {
        let r = self
            .rhs_cells(&state.cells)
            .map_err(|f| self.stage_error(state.t, &state.cells, f))?;
        Ok(state
            .cells
            .iter()
            .zip(&r)
            .map(|(u, ri)| u.axpy(dt, &PhaseState::from_array(*ri)))
            .collect())
    }

    /// One SSP-RK2 step with a given `dt`, unchecked against the CFL limit.
    pub fn step_with_dt(&self, state: &FieldState<T>, dt: T) -> Result<FieldState<T>> {
        let t_new = state.t + dt;
        let stage = self.euler_stage(state, dt)?;
        self.check_cells(t_new, &stage)?;
        let r = self
            .rhs_cells(&stage)
            .map_err(|f| self.stage_error(t_new, &stage, f))?;
        let half = c::<T>(0.5);
        let cells: Vec<PhaseState<T>> = state
            .cells
            .iter()
            .zip(&stage)
            .zip(&r)
            .map(|((u0, u1), r1)| {
                let corrected = u1.axpy(dt, &PhaseState::from_array(*r1));
                PhaseState::from_array({
                    let (a, b) = (u0.to_array(), corrected.to_array());
                    [
                        half * (a[0] + b[0]),
                        half * (a[1] + b[1]),
                        half * (a[2] + b[2]),
                        half * (a[3] + b[3]),
                    ]
                })
            })
            .collect();
        self.check_cells(t_new, &cells)?;
        Ok(FieldState {
            cells,
            t: t_new,
            step: state.step + 1,
        })
    }

    /// One step with the stable time step from [`time_step`](Self::time_step).
    pub fn step(&self, state: &FieldState<T>) -> Result<FieldState<T>> {
        let dt = self.time_step(state)?;
        self.step_with_dt(state, dt)
    }
}

/// Summary of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport<T> {
    pub trace: NormTrace<T>,
    pub steps: usize,
    pub t_final: T,
    /// Largest `max_i ‖u_i − ū‖_∞` seen over the run.
    pub max_deviation: T,
    pub stayed_in_omega: bool,
    /// Largest characteristic speed seen over the run.
    pub max_wave_speed: T,
    pub source_dt_cap: T,
    /// Whether the parameters pass the total-dissipativity test.
    pub dissipative: bool,
}

/// Time loop with per-step norm tracking.
#[derive(Debug, Clone)]
pub struct Simulation<T> {
    solver: Solver<T>,
    state: FieldState<T>,
    trace: NormTrace<T>,
    max_deviation: T,
    max_speed: T,
    dissipative: bool,
    rejected_dt: Option<T>,
}

impl<T: Scalar> Simulation<T> {
    pub fn new(cfg: SimConfig<T>) -> Result<Self> {
        let state = init_perturbation(&cfg)?;
        Self::from_state(cfg, state)
    }

    /// Starts from an explicit field; the field must be admissible.
    pub fn from_state(cfg: SimConfig<T>, state: FieldState<T>) -> Result<Self> {
        let solver = Solver::new(cfg)?;
        if state.cells.len() != cfg.grid.nx {
            return Err(Error::InvalidParameter(format!(
                "field has {} cells, grid has {}",
                state.cells.len(),
                cfg.grid.nx
            )));
        }
        solver.check_cells(state.t, &state.cells)?;
        let dissipative = dissipativity::is_totally_dissipative(&cfg.params)
            .map(|r| r.verdict)
            .unwrap_or(false);
        if !dissipative {
            log::warn!("parameters are not totally dissipative at equilibrium; running anyway");
        }
        let ubar = *solver.equilibrium();
        let mut trace = NormTrace::new(cfg.grid.dx());
        let norms = discrete_norms(&state.cells, &ubar, cfg.grid.dx(), cfg.bc)?;
        trace.push(NormSample::new(state.t, norms))?;
        let max_speed = max_wave_speed(&state, &cfg.params)?;
        Ok(Simulation {
            max_deviation: state.max_deviation(&ubar),
            solver,
            state,
            trace,
            max_speed,
            dissipative,
            rejected_dt: None,
        })
    }

    pub fn state(&self) -> &FieldState<T> {
        &self.state
    }

    pub fn solver(&self) -> &Solver<T> {
        &self.solver
    }

    pub fn trace(&self) -> &NormTrace<T> {
        &self.trace
    }

    pub fn is_finished(&self) -> bool {
        self.state.t >= self.solver.cfg.t_end
    }

    /// Snapshot cadence: step 0, every `snapshot_every` steps, and the end.
    pub fn wants_snapshot(&self) -> bool {
        self.state.step.is_multiple_of(self.solver.cfg.snapshot_every) || self.is_finished()
    }

    /// The candidate field of a failed step, recomputed with a forward-Euler
    /// predictor so the offending cells can be inspected.
    pub fn rejected_field(&self) -> Option<FieldState<T>> {
        let dt = self.rejected_dt?;
        let cells = self.solver.euler_stage(&self.state, dt).ok()?;
        Some(FieldState {
            cells,
            t: self.state.t + dt,
            step: self.state.step + 1,
        })
    }

    /// Advances one step (the last one is shortened to land on `t_end`).
    pub fn advance(&mut self) -> Result<()> {
        let cfg = self.solver.cfg;
        let remaining = cfg.t_end - self.state.t;
        let dt = self.solver.time_step(&self.state)?.min(remaining);
        let next = match self.solver.step_with_dt(&self.state, dt) {
            Ok(next) => next,
            Err(e) => {
                self.rejected_dt = Some(dt);
                return Err(e);
            }
        };
        // absorb round-off so the loop terminates exactly at t_end
        let mut next = next;
        if dt == remaining {
            next.t = cfg.t_end;
        }
        let ubar = *self.solver.equilibrium();
        let norms = discrete_norms(&next.cells, &ubar, cfg.grid.dx(), cfg.bc)?;
        self.trace.push(NormSample::new(next.t, norms))?;
        self.max_deviation = self.max_deviation.max(next.max_deviation(&ubar));
        self.max_speed = self.max_speed.max(max_wave_speed(&next, &cfg.params)?);
        self.state = next;
        Ok(())
    }

    pub fn report(&self) -> RunReport<T> {
        RunReport {
            trace: self.trace.clone(),
            steps: self.state.step,
            t_final: self.state.t,
            max_deviation: self.max_deviation,
            stayed_in_omega: self.max_deviation <= self.solver.cfg.omega_radius,
            max_wave_speed: self.max_speed,
            source_dt_cap: self.solver.source_dt_cap,
            dissipative: self.dissipative,
        }
    }

    pub fn into_report(self) -> RunReport<T> {
        self.report()
    }
}

/// Runs to `t_end`, keeping snapshots in memory.
pub fn simulate<T: Scalar>(cfg: SimConfig<T>) -> Result<(Vec<FieldState<T>>, RunReport<T>)> {
    let mut sim = Simulation::new(cfg)?;
    let mut snapshots = vec![sim.state().clone()];
    while !sim.is_finished() {
        sim.advance()?;
        if sim.wants_snapshot() {
            snapshots.push(sim.state().clone());
        }
    }
    Ok((snapshots, sim.into_report()))
}
