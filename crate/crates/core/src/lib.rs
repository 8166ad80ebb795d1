//! Simulation and fitting of high-resolution single-molecule vibronic spectra.
//!
//! * [`units`]: spectroscopic unit conversions and the lifetime–linewidth relation.
//! * [`levels`]: level scheme of the molecule and the laser drives.
//! * [`fcmodel`]: displaced-harmonic-oscillator Franck–Condon factors and stick spectra.
//! * [`ratesim`]: rate-equation model producing fluorescence-excitation, STED and saturation spectra.
//! * [`fitkit`]: Levenberg–Marquardt fitting, peak detection and the concrete fit models.
//! * [`specpipe`]: file formats, cross-molecule statistics and the command line.

pub mod fcmodel;
pub mod fitkit;
pub mod levels;
pub mod ratesim;
pub mod specpipe;
pub mod spectrum;
pub mod units;

pub use spectrum::{AxisUnit, Spectrum, SpectrumKind, ValueUnit};
