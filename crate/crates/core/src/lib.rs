//! Four-phase biofilm mixture model in one space dimension.
//!
//! The reduced system for bacteria `B`, EPS `E`, dead cells `D` and the
//! solid-phase velocity `v` is a hyperbolic balance law
//!
//! ```text
//! ∂t u + ∂x F(u) = G(u),   u = (B, E, D, v),   L = 1 − (B + E + D)
//! ```
//!
//! This crate provides its algebraic structure ([`model`]), the
//! total-dissipativity analysis at the interior equilibrium
//! ([`dissipativity`]), an explicit finite-volume solver ([`solver`]) and
//! the norm/decay diagnostics used to check long-time behaviour
//! ([`analysis`]).
//!
//! Everything is generic over a [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision instantiation.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod dissipativity;
pub mod error;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod solver;

pub use error::{Error, Result};
pub use linalg::Mat4;
pub use scalar::Scalar;

pub use analysis::{DecayFit, FitWindow, NormSample, NormTrace, SobolevLevel, SobolevNorms};
pub use dissipativity::{
    Definiteness, DissipativityReport, EquilibriumPoint, RhCoefficients, RhFlags, SweepResult,
    SweepRow, Transition,
};
pub use model::{ModelParams, PhaseState, ReactionVector};
pub use solver::{
    BoundaryCondition, FieldState, Grid1D, Perturbation, Preset, Profile, RunReport, SimConfig,
    Simulation, Solver,
};

pub type PhaseState64 = PhaseState<f64>;
pub type ModelParams64 = ModelParams<f64>;
pub type ReactionVector64 = ReactionVector<f64>;
pub type EquilibriumPoint64 = EquilibriumPoint<f64>;
pub type DissipativityReport64 = DissipativityReport<f64>;
pub type Mat4f64 = Mat4<f64>;
pub type SimConfig64 = SimConfig<f64>;
pub type FieldState64 = FieldState<f64>;
pub type NormTrace64 = NormTrace<f64>;
pub type DecayFit64 = DecayFit<f64>;

pub type PhaseState32 = PhaseState<f32>;
pub type ModelParams32 = ModelParams<f32>;
