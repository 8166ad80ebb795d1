//! Steady-state rate-equation model of a single molecule under pump and
//! depletion lasers.
//!
//! The model is incoherent: every optical transition contributes a
//! Lorentzian-weighted rate W = S·w·Γe·L(δ; Γ_trans) in both directions,
//! vibrational levels relax one-way at their own Γ, and |S1,0⟩ decays to
//! |S0,0⟩ at Γe = 1/T1. Spectra are built point by point from the stationary
//! populations.

mod evolve;
mod noise;
mod spectra;
mod system;

use thiserror::Error;

pub use evolve::{time_evolve, time_evolve_with, EvolveOptions, EvolveStats};
pub use noise::add_noise;
pub use spectra::{anchor_wavenumber, fluorex_spectrum, fluorex_values, saturation_curve, sted_spectrum, sted_values, ScanAxis};
pub use system::{build_rate_matrix, excited_population, lorentzian, steady_state, Populations, RateSystem, EXCITED, GROUND};

use crate::levels::LevelError;
use crate::spectrum::SpectrumError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("unknown level id `{0}`")]
    UnknownLevel(String),
    #[error("pump must target an S1 level or the 00ZPL, got `{0}`")]
    PumpTarget(String),
    #[error("depletion must target an S0 level, got `{0}`")]
    DepletionTarget(String),
    #[error("drive targeting `{0}` has the wrong role")]
    WrongRole(String),
    #[error("saturation parameter must be finite and >= 0, got {0}")]
    InvalidSaturation(f64),
    #[error("dwell scale must be finite and > 0, got {0}")]
    InvalidDwell(f64),
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid scan axis: {0}")]
    InvalidAxis(String),
    #[error("rate matrix for {states} states has shape {rows}x{cols}")]
    Shape { states: usize, rows: usize, cols: usize },
    #[error("rate {from} -> {to} must be finite and >= 0, got {rate}")]
    InvalidRate { from: String, to: String, rate: f64 },
    #[error("generator has no unique stationary state")]
    Singular,
    #[error("no fluorescence without depletion; depletion factor undefined")]
    DarkReference,
    #[error("invalid initial state: {0}")]
    InvalidInitial(String),
    #[error("step size underflow at t = {time} (h = {step})")]
    StepUnderflow { time: f64, step: f64 },
    #[error("step limit {steps} reached at t = {time}")]
    StepLimit { time: f64, steps: usize },
    #[error(transparent)]
    Level(#[from] LevelError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}
