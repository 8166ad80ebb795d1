//! Level structure of a single dye molecule and the lasers driving it.
//!
//! The vibrationless levels |S0,0⟩ and |S1,0⟩ are implicit anchors. Every
//! [`VibronicLevel`] sits at a positive wavenumber above the vibrationless
//! level of its own electronic state. Linewidths are stored as Γ/2π in GHz.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel target id for driving the purely electronic 00ZPL transition.
pub const ZPL_TARGET: &str = "00ZPL";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LevelError {
    #[error("unknown level id `{0}`")]
    UnknownLevel(String),
    #[error("level `{id}` has non-positive linewidth {gamma_ghz} GHz")]
    NonPositiveWidth { id: String, gamma_ghz: f64 },
    #[error("molecule needs at least two atoms, got {0}")]
    TooFewAtoms(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElectronicState {
    S0,
    S1,
}

impl fmt::Display for ElectronicState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElectronicState::S0 => f.write_str("S0"),
            ElectronicState::S1 => f.write_str("S1"),
        }
    }
}

/// Assignment tag. Metadata only; the simulation never looks at it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LevelKind {
    Fundamental,
    Overtone,
    Combination,
    Satellite,
    #[default]
    Unassigned,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibronicLevel {
    pub id: String,
    pub state: ElectronicState,
    /// cm⁻¹ above the vibrationless level of `state`.
    pub wavenumber: f64,
    /// Vibrational relaxation FWHM Γ/2π in GHz.
    pub gamma_over_2pi: f64,
    /// Relative squared Rabi frequency Ω²/Ω²_max.
    pub relative_fc: f64,
    pub kind: LevelKind,
}

impl VibronicLevel {
    pub fn new(id: impl Into<String>, state: ElectronicState, wavenumber: f64, gamma_over_2pi: f64, relative_fc: f64) -> Self {
        VibronicLevel {
            id: id.into(),
            state,
            wavenumber,
            gamma_over_2pi,
            relative_fc,
            kind: LevelKind::Unassigned,
        }
    }

    pub fn with_kind(mut self, kind: LevelKind) -> Self {
        self.kind = kind;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelScheme {
    pub zpl_frequency_thz: f64,
    pub t1_ns: f64,
    pub s0_levels: Vec<VibronicLevel>,
    pub s1_levels: Vec<VibronicLevel>,
    /// Weight of detuning-independent stimulated emission into the phonon
    /// sidebands and the dense bath of weak modes.
    pub baseline_sideband_cross_section: f64,
}

/// A broken invariant found by [`validate_scheme`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub level_id: Option<String>,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.level_id {
            Some(id) => write!(f, "level `{}`: {}", id, self.rule),
            None => write!(f, "scheme: {}", self.rule),
        }
    }
}

impl LevelScheme {
    pub fn new(zpl_frequency_thz: f64, t1_ns: f64) -> Self {
        LevelScheme {
            zpl_frequency_thz,
            t1_ns,
            s0_levels: Vec::new(),
            s1_levels: Vec::new(),
            baseline_sideband_cross_section: 0.0,
        }
    }

    /// Adds a level to the list matching its electronic state.
    pub fn push(&mut self, level: VibronicLevel) {
        match level.state {
            ElectronicState::S0 => self.s0_levels.push(level),
            ElectronicState::S1 => self.s1_levels.push(level),
        }
    }

    pub fn with_level(mut self, level: VibronicLevel) -> Self {
        self.push(level);
        self
    }

    /// Natural 00ZPL FWHM in GHz, 1/(2π·T1).
    pub fn zpl_linewidth_ghz(&self) -> f64 {
        1.0 / (2.0 * PI * self.t1_ns)
    }

    /// Spontaneous decay rate of |S1,0⟩ in s⁻¹.
    pub fn excited_decay_rate(&self) -> f64 {
        1e9 / self.t1_ns
    }

    pub fn levels(&self) -> impl Iterator<Item = &VibronicLevel> {
        self.s0_levels.iter().chain(self.s1_levels.iter())
    }

    pub fn level(&self, id: &str) -> Option<&VibronicLevel> {
        self.levels().find(|l| l.id == id)
    }

    pub fn level_mut(&mut self, id: &str) -> Option<&mut VibronicLevel> {
        self.s0_levels.iter_mut().chain(self.s1_levels.iter_mut()).find(|l| l.id == id)
    }
}

/// Lists every broken invariant. An empty list means the scheme is usable.
pub fn validate_scheme(scheme: &LevelScheme) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut scheme_rule = |rule: String| out.push(Violation { level_id: None, rule });
    if !(scheme.t1_ns > 0.0 && scheme.t1_ns.is_finite()) {
        scheme_rule(format!("t1_ns must be > 0, got {}", scheme.t1_ns));
    }
    if !(scheme.zpl_frequency_thz > 0.0 && scheme.zpl_frequency_thz.is_finite()) {
        scheme_rule(format!("zpl_frequency_thz must be > 0, got {}", scheme.zpl_frequency_thz));
    }
    let b = scheme.baseline_sideband_cross_section;
    if !(b >= 0.0 && b.is_finite()) {
        scheme_rule(format!("baseline_sideband_cross_section must be >= 0, got {b}"));
    }

    let mut seen = HashSet::new();
    let lists = [
        (ElectronicState::S0, &scheme.s0_levels),
        (ElectronicState::S1, &scheme.s1_levels),
    ];
    for (state, levels) in lists {
        for level in levels.iter() {
            let mut violation = |rule: String| {
                out.push(Violation { level_id: Some(level.id.clone()), rule });
            };
            if level.id.is_empty() {
                violation("id must not be empty".into());
            }
            if level.id == ZPL_TARGET {
                violation(format!("id `{ZPL_TARGET}` is reserved for the zero-phonon line"));
            }
            if !seen.insert(level.id.as_str()) {
                violation("duplicate level id".into());
            }
            if level.state != state {
                violation(format!("listed under {state} but tagged {}", level.state));
            }
            if !(level.wavenumber > 0.0 && level.wavenumber.is_finite()) {
                violation(format!("wavenumber must be > 0, got {}", level.wavenumber));
            }
            if !(level.gamma_over_2pi > 0.0 && level.gamma_over_2pi.is_finite()) {
                violation(format!("gamma_over_2pi must be > 0, got {}", level.gamma_over_2pi));
            }
            if !(0.0..=1.0).contains(&level.relative_fc) {
                violation(format!("relative_fc must lie in [0, 1], got {}", level.relative_fc));
            }
        }
    }
    out
}

/// FWHM (GHz) of the optical transition from the vibrationless level of the
/// other electronic state to `level_id`.
///
/// [`ZPL_TARGET`] resolves to the natural 00ZPL width.
pub fn transition_linewidth(scheme: &LevelScheme, level_id: &str) -> Result<f64, LevelError> {
    if level_id == ZPL_TARGET {
        return Ok(scheme.zpl_linewidth_ghz());
    }
    let level = scheme
        .level(level_id)
        .ok_or_else(|| LevelError::UnknownLevel(level_id.to_string()))?;
    level_transition_linewidth(scheme, level)
}

pub(crate) fn level_transition_linewidth(scheme: &LevelScheme, level: &VibronicLevel) -> Result<f64, LevelError> {
    if !(level.gamma_over_2pi > 0.0) {
        return Err(LevelError::NonPositiveWidth {
            id: level.id.clone(),
            gamma_ghz: level.gamma_over_2pi,
        });
    }
    // Lorentzian widths add under convolution.
    Ok(level.gamma_over_2pi + scheme.zpl_linewidth_ghz())
}

/// Number of vibrational normal modes: 3N−6, or 3N−5 for linear molecules.
pub fn mode_count(n_atoms: usize, linear: bool) -> Result<usize, LevelError> {
    if n_atoms < 2 {
        return Err(LevelError::TooFewAtoms(n_atoms));
    }
    Ok(if linear { 3 * n_atoms - 5 } else { 3 * n_atoms - 6 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriveRole {
    Pump,
    Depletion,
}

/// A continuous-wave laser acting on the molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct LaserDrive {
    pub role: DriveRole,
    /// Level id the detuning refers to, or [`ZPL_TARGET`] for the pump.
    pub target: String,
    /// GHz from the center of the target transition.
    pub detuning_ghz: f64,
    /// P/P_sat at line center of a unit-weight transition.
    pub saturation: f64,
}

impl LaserDrive {
    pub fn pump(target: impl Into<String>, saturation: f64) -> Self {
        LaserDrive {
            role: DriveRole::Pump,
            target: target.into(),
            detuning_ghz: 0.0,
            saturation,
        }
    }

    pub fn depletion(target: impl Into<String>, saturation: f64) -> Self {
        LaserDrive {
            role: DriveRole::Depletion,
            target: target.into(),
            detuning_ghz: 0.0,
            saturation,
        }
    }

    pub fn detuned(mut self, detuning_ghz: f64) -> Self {
        self.detuning_ghz = detuning_ghz;
        self
    }

    pub fn targets_zpl(&self) -> bool {
        self.target == ZPL_TARGET
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_s1() -> LevelScheme {
        LevelScheme::new(402.57, 7.0).with_level(
            VibronicLevel::new("w290", ElectronicState::S1, 290.0, 10.9, 1.0).with_kind(LevelKind::Fundamental),
        )
    }

    #[test]
    fn valid_scheme_has_no_violations() {
        assert!(validate_scheme(&sample_s1()).is_empty());
    }

    #[test]
    fn duplicate_id_is_one_violation() {
        let mut s = sample_s1();
        s.push(VibronicLevel::new("w290", ElectronicState::S0, 291.0, 2.0, 0.5));
        let v = validate_scheme(&s);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].level_id.as_deref(), Some("w290"));
        assert!(v[0].rule.contains("duplicate"));
    }

    #[test]
    fn zero_width_is_one_violation() {
        let mut s = sample_s1();
        s.s1_levels[0].gamma_over_2pi = 0.0;
        let v = validate_scheme(&s);
        assert_eq!(v.len(), 1);
        assert!(v[0].rule.contains("gamma"));
        // idempotent, no side effects
        assert_eq!(validate_scheme(&s), v);
    }

    #[test]
    fn reserved_and_misfiled_levels() {
        let mut s = sample_s1();
        s.s0_levels.push(VibronicLevel::new(ZPL_TARGET, ElectronicState::S1, 10.0, 1.0, 2.0));
        let v = validate_scheme(&s);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn transition_widths() {
        let s = sample_s1().with_level(VibronicLevel::new("v290", ElectronicState::S0, 290.0, 2.0, 1.0));
        assert!((transition_linewidth(&s, "v290").unwrap() - 2.0227).abs() < 1e-4);
        assert!((transition_linewidth(&s, "w290").unwrap() - 10.9227).abs() < 1e-4);
        assert!((transition_linewidth(&s, ZPL_TARGET).unwrap() - 0.022736).abs() < 1e-6);
        assert!(matches!(transition_linewidth(&s, "nope"), Err(LevelError::UnknownLevel(_))));
        let mut bad = s.clone();
        bad.s0_levels[0].gamma_over_2pi = 0.0;
        assert!(matches!(
            transition_linewidth(&bad, "v290"),
            Err(LevelError::NonPositiveWidth { .. })
        ));
        for l in s.levels() {
            let w = transition_linewidth(&s, &l.id).unwrap();
            assert!(w >= l.gamma_over_2pi.max(s.zpl_linewidth_ghz()));
        }
    }

    #[test]
    fn normal_mode_counts() {
        assert_eq!(mode_count(58, false).unwrap(), 168);
        assert_eq!(mode_count(2, true).unwrap(), 1);
        assert_eq!(mode_count(3, false).unwrap(), 3);
        assert!(mode_count(1, false).is_err());
    }
}
