use super::{build_rate_matrix, excited_population, RateError};
use crate::levels::{ElectronicState, LaserDrive, LevelScheme, ZPL_TARGET};
use crate::spectrum::{AxisUnit, Spectrum, SpectrumKind, ValueUnit};
use crate::units::GHZ_PER_WAVENUMBER;

/// Laser positions for a frequency scan.
///
/// With [`AxisUnit::Wavenumber`] the points are absolute positions in cm⁻¹
/// above the vibrationless level of the addressed manifold (pump: S1, excitation
/// offset from the 00ZPL; depletion: S0, Stokes shift from the 00ZPL). With
/// [`AxisUnit::DetuningGhz`] they are detunings from the `anchor` level.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanAxis {
    pub unit: AxisUnit,
    /// Level id (or [`ZPL_TARGET`]) the drive is referenced to.
    pub anchor: String,
    pub points: Vec<f64>,
}

impl ScanAxis {
    pub fn wavenumber(anchor: impl Into<String>, points: Vec<f64>) -> Self {
        ScanAxis {
            unit: AxisUnit::Wavenumber,
            anchor: anchor.into(),
            points,
        }
    }

    pub fn detuning(anchor: impl Into<String>, points: Vec<f64>) -> Self {
        ScanAxis {
            unit: AxisUnit::DetuningGhz,
            anchor: anchor.into(),
            points,
        }
    }

    /// Recovers the scan from a spectrum written by this module.
    pub fn from_spectrum(spectrum: &Spectrum) -> Result<Self, RateError> {
        let anchor = spectrum
            .meta_str("anchor")
            .ok_or_else(|| RateError::InvalidAxis("spectrum metadata lacks `anchor`".into()))?;
        match spectrum.axis_unit {
            AxisUnit::Wavenumber | AxisUnit::DetuningGhz => Ok(ScanAxis {
                unit: spectrum.axis_unit,
                anchor: anchor.to_string(),
                points: spectrum.axis.clone(),
            }),
            other => Err(RateError::InvalidAxis(format!("axis unit {other} is not a frequency scan"))),
        }
    }

    /// Detuning in GHz of every point from the anchor transition.
    pub fn detunings(&self, scheme: &LevelScheme) -> Result<Vec<f64>, RateError> {
        let anchor_cm1 = anchor_wavenumber(scheme, &self.anchor)?;
        match self.unit {
            AxisUnit::DetuningGhz => Ok(self.points.clone()),
            AxisUnit::Wavenumber => Ok(self.points.iter().map(|w| (w - anchor_cm1) * GHZ_PER_WAVENUMBER).collect()),
            other => Err(RateError::InvalidAxis(format!("axis unit {other} is not a frequency scan"))),
        }
    }
}

/// Position of the anchor in cm⁻¹ from the 00ZPL (0 for the 00ZPL itself).
pub fn anchor_wavenumber(scheme: &LevelScheme, anchor: &str) -> Result<f64, RateError> {
    if anchor == ZPL_TARGET {
        return Ok(0.0);
    }
    Ok(scheme
        .level(anchor)
        .ok_or_else(|| RateError::UnknownLevel(anchor.to_string()))?
        .wavenumber)
}

/// Steady-state |S1,0⟩ population at each pump detuning.
pub fn fluorex_values(scheme: &LevelScheme, anchor: &str, detunings: &[f64], s_p: f64) -> Result<Vec<f64>, RateError> {
    detunings
        .iter()
        .map(|&d| {
            let pump = LaserDrive::pump(anchor, s_p).detuned(d);
            excited_population(&build_rate_matrix(scheme, &pump, None)?)
        })
        .collect()
}

/// Depletion factor D at each depletion detuning, for a fixed pump.
pub fn sted_values(
    scheme: &LevelScheme,
    pump: &LaserDrive,
    anchor: &str,
    detunings: &[f64],
    s_d: f64,
) -> Result<Vec<f64>, RateError> {
    let reference = excited_population(&build_rate_matrix(
        scheme,
        pump,
        Some(&LaserDrive::depletion(anchor, 0.0)),
    )?)?;
    if !(reference > 0.0) {
        return Err(RateError::DarkReference);
    }
    detunings
        .iter()
        .map(|&d| {
            let depletion = LaserDrive::depletion(anchor, s_d).detuned(d);
            let ne = excited_population(&build_rate_matrix(scheme, pump, Some(&depletion))?)?;
            Ok(((reference - ne) / reference).max(0.0))
        })
        .collect()
}

fn check_anchor(scheme: &LevelScheme, anchor: &str, state: ElectronicState) -> Result<(), RateError> {
    if anchor == ZPL_TARGET {
        return match state {
            ElectronicState::S1 => Ok(()),
            ElectronicState::S0 => Err(RateError::DepletionTarget(anchor.to_string())),
        };
    }
    let level = scheme.level(anchor).ok_or_else(|| RateError::UnknownLevel(anchor.to_string()))?;
    match (state, level.state) {
        (ElectronicState::S1, ElectronicState::S1) | (ElectronicState::S0, ElectronicState::S0) => Ok(()),
        (ElectronicState::S1, _) => Err(RateError::PumpTarget(anchor.to_string())),
        (ElectronicState::S0, _) => Err(RateError::DepletionTarget(anchor.to_string())),
    }
}

/// Fluorescence-excitation spectrum: normalized excited population versus
/// pump position.
pub fn fluorex_spectrum(scheme: &LevelScheme, scan: &ScanAxis, s_p: f64) -> Result<Spectrum, RateError> {
    check_anchor(scheme, &scan.anchor, ElectronicState::S1)?;
    let detunings = scan.detunings(scheme)?;
    let values = fluorex_values(scheme, &scan.anchor, &detunings, s_p)?;
    let spectrum = Spectrum::new(
        SpectrumKind::Fluorex,
        scan.unit,
        ValueUnit::Population,
        scan.points.clone(),
        values,
    )?;
    Ok(spectrum
        .with_meta("anchor", &scan.anchor)
        .with_meta("reference_cm1", anchor_wavenumber(scheme, &scan.anchor)?)
        .with_meta("sp", s_p))
}

/// STED spectrum: depletion factor D versus depletion-laser position while the
/// pump is held fixed.
pub fn sted_spectrum(scheme: &LevelScheme, pump: &LaserDrive, scan: &ScanAxis, s_d: f64) -> Result<Spectrum, RateError> {
    check_anchor(scheme, &pump.target, ElectronicState::S1)?;
    check_anchor(scheme, &scan.anchor, ElectronicState::S0)?;
    let detunings = scan.detunings(scheme)?;
    let values = sted_values(scheme, pump, &scan.anchor, &detunings, s_d)?;
    let spectrum = Spectrum::new(SpectrumKind::Sted, scan.unit, ValueUnit::Depletion, scan.points.clone(), values)?;
    Ok(spectrum
        .with_meta("anchor", &scan.anchor)
        .with_meta("reference_cm1", anchor_wavenumber(scheme, &scan.anchor)?)
        .with_meta("pump", &pump.target)
        .with_meta("pump_detuning_ghz", pump.detuning_ghz)
        .with_meta("sp", pump.saturation)
        .with_meta("sd", s_d))
}

/// On-resonance excited population versus pump power, with S = P/P_sat.
pub fn saturation_curve(
    scheme: &LevelScheme,
    pump_target: &str,
    powers: &[f64],
    power_unit: AxisUnit,
    p_sat: f64,
) -> Result<Spectrum, RateError> {
    if !(p_sat > 0.0 && p_sat.is_finite()) {
        return Err(RateError::InvalidSaturation(p_sat));
    }
    if !matches!(power_unit, AxisUnit::PowerNw | AxisUnit::PowerUw) {
        return Err(RateError::InvalidAxis(format!("{power_unit} is not a power unit")));
    }
    if let Some(&p) = powers.iter().find(|&&p| !(p >= 0.0)) {
        return Err(RateError::InvalidSaturation(p));
    }
    check_anchor(scheme, pump_target, ElectronicState::S1)?;
    let values = powers
        .iter()
        .map(|&p| excited_population(&build_rate_matrix(scheme, &LaserDrive::pump(pump_target, p / p_sat), None)?))
        .collect::<Result<Vec<_>, _>>()?;
    let spectrum = Spectrum::new(
        SpectrumKind::Saturation,
        power_unit,
        ValueUnit::Population,
        powers.to_vec(),
        values,
    )?;
    Ok(spectrum.with_meta("anchor", pump_target).with_meta("p_sat", p_sat))
}
