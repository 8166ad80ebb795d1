//! Spectroscopic unit conversions.
//!
//! Spectral positions are carried as wavenumbers (cm⁻¹), frequencies (GHz/THz)
//! or vacuum wavelengths (nm); lifetimes as ps/ns; powers as nW/µW. Every value
//! is tagged with its [`Unit`] and converting between dimensions that are not
//! related by a definition is an error.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Speed of light in GHz per cm⁻¹ (exact, from c = 299 792 458 m/s).
pub const GHZ_PER_WAVENUMBER: f64 = 29.979_245_8;

/// Speed of light in nm·THz.
pub const C_NM_THZ: f64 = 299_792.458;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum UnitError {
    #[error("non-finite input value {0}")]
    NonFinite(f64),
    #[error("{what} must be strictly positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("cannot convert {from} to {to}")]
    Incompatible { from: Unit, to: Unit },
    #[error("unknown unit `{0}`")]
    UnknownUnit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    WavenumberCm1,
    FrequencyGhz,
    FrequencyThz,
    WavelengthNm,
    TimePs,
    TimeNs,
    PowerNw,
    PowerUw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Spectral,
    Time,
    Power,
}

impl Unit {
    pub const ALL: [Unit; 8] = [
        Unit::WavenumberCm1,
        Unit::FrequencyGhz,
        Unit::FrequencyThz,
        Unit::WavelengthNm,
        Unit::TimePs,
        Unit::TimeNs,
        Unit::PowerNw,
        Unit::PowerUw,
    ];

    pub fn dimension(self) -> Dimension {
        match self {
            Unit::WavenumberCm1 | Unit::FrequencyGhz | Unit::FrequencyThz | Unit::WavelengthNm => {
                Dimension::Spectral
            }
            Unit::TimePs | Unit::TimeNs => Dimension::Time,
            Unit::PowerNw | Unit::PowerUw => Dimension::Power,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Unit::WavenumberCm1 => "wavenumber_cm1",
            Unit::FrequencyGhz => "frequency_GHz",
            Unit::FrequencyThz => "frequency_THz",
            Unit::WavelengthNm => "wavelength_nm",
            Unit::TimePs => "time_ps",
            Unit::TimeNs => "time_ns",
            Unit::PowerNw => "power_nW",
            Unit::PowerUw => "power_uW",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Unit {
    type Err = UnitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let unit = match s {
            "wavenumber_cm1" | "wavenumber_cm-1" | "wavenumber_cm⁻¹" | "cm-1" => Unit::WavenumberCm1,
            "frequency_GHz" | "GHz" => Unit::FrequencyGhz,
            "frequency_THz" | "THz" => Unit::FrequencyThz,
            "wavelength_nm" | "nm" => Unit::WavelengthNm,
            "time_ps" | "ps" => Unit::TimePs,
            "time_ns" | "ns" => Unit::TimeNs,
            "power_nW" | "nW" => Unit::PowerNw,
            "power_uW" | "power_µW" | "uW" | "µW" => Unit::PowerUw,
            other => return Err(UnitError::UnknownUnit(other.to_string())),
        };
        Ok(unit)
    }
}

/// A unit-tagged scalar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: Unit,
}

impl Quantity {
    pub fn new(value: f64, unit: Unit) -> Result<Self, UnitError> {
        finite(value)?;
        Ok(Quantity { value, unit })
    }

    /// Converts within a dimension (wavelength ↔ frequency/wavenumber included).
    ///
    /// The linewidth ↔ lifetime relation crosses dimensions and is only
    /// available through [`Quantity::linewidth_to_lifetime`] and
    /// [`Quantity::lifetime_to_linewidth`].
    pub fn convert_to(self, to: Unit) -> Result<Quantity, UnitError> {
        if self.unit.dimension() != to.dimension() {
            return Err(UnitError::Incompatible { from: self.unit, to });
        }
        if self.unit == to {
            return Ok(self);
        }
        let value = match to.dimension() {
            Dimension::Spectral => from_ghz(to_ghz(self)?, to)?,
            Dimension::Time => match to {
                Unit::TimePs => self.value * 1e3,
                _ => self.value * 1e-3,
            },
            Dimension::Power => match to {
                Unit::PowerNw => self.value * 1e3,
                _ => self.value * 1e-3,
            },
        };
        Quantity::new(value, to)
    }

    /// Interprets a spectral quantity as a FWHM and returns the lifetime in `to`.
    pub fn linewidth_to_lifetime(self, to: Unit) -> Result<Quantity, UnitError> {
        if self.unit == Unit::WavelengthNm || self.unit.dimension() != Dimension::Spectral {
            return Err(UnitError::Incompatible { from: self.unit, to });
        }
        let ps = linewidth_to_lifetime(to_ghz(self)?)?;
        Quantity::new(ps, Unit::TimePs)?.convert_to(to)
    }

    /// Interprets a time as a lifetime and returns the natural FWHM in `to`.
    pub fn lifetime_to_linewidth(self, to: Unit) -> Result<Quantity, UnitError> {
        if self.unit.dimension() != Dimension::Time
            || to == Unit::WavelengthNm
            || to.dimension() != Dimension::Spectral
        {
            return Err(UnitError::Incompatible { from: self.unit, to });
        }
        let ps = self.convert_to(Unit::TimePs)?.value;
        let ghz = lifetime_to_linewidth(ps)?;
        from_ghz(ghz, to).and_then(|v| Quantity::new(v, to))
    }
}

fn finite(x: f64) -> Result<f64, UnitError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(UnitError::NonFinite(x))
    }
}

fn positive(what: &'static str, x: f64) -> Result<f64, UnitError> {
    finite(x)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(UnitError::NonPositive { what, value: x })
    }
}

fn to_ghz(q: Quantity) -> Result<f64, UnitError> {
    match q.unit {
        Unit::WavenumberCm1 => wavenumber_to_frequency(q.value),
        Unit::FrequencyGhz => finite(q.value),
        Unit::FrequencyThz => finite(q.value * 1e3),
        Unit::WavelengthNm => Ok(wavelength_to_frequency(q.value)? * 1e3),
        other => Err(UnitError::Incompatible { from: other, to: Unit::FrequencyGhz }),
    }
}

fn from_ghz(ghz: f64, to: Unit) -> Result<f64, UnitError> {
    match to {
        Unit::WavenumberCm1 => frequency_to_wavenumber(ghz),
        Unit::FrequencyGhz => finite(ghz),
        Unit::FrequencyThz => finite(ghz * 1e-3),
        Unit::WavelengthNm => frequency_to_wavelength(ghz * 1e-3),
        other => Err(UnitError::Incompatible { from: Unit::FrequencyGhz, to: other }),
    }
}

/// cm⁻¹ → GHz.
pub fn wavenumber_to_frequency(wavenumber: f64) -> Result<f64, UnitError> {
    Ok(finite(wavenumber)? * GHZ_PER_WAVENUMBER)
}

/// GHz → cm⁻¹.
pub fn frequency_to_wavenumber(ghz: f64) -> Result<f64, UnitError> {
    Ok(finite(ghz)? / GHZ_PER_WAVENUMBER)
}

/// Natural FWHM (GHz) → lifetime (ps), from Δν = 1/(2πT).
pub fn linewidth_to_lifetime(fwhm_ghz: f64) -> Result<f64, UnitError> {
    let fwhm = positive("linewidth", fwhm_ghz)?;
    // 1/(2π·GHz) is in ns
    Ok(1e3 / (2.0 * PI * fwhm))
}

/// Lifetime (ps) → natural FWHM (GHz).
pub fn lifetime_to_linewidth(lifetime_ps: f64) -> Result<f64, UnitError> {
    let t = positive("lifetime", lifetime_ps)?;
    Ok(1e3 / (2.0 * PI * t))
}

/// Vacuum wavelength (nm) → frequency (THz).
pub fn wavelength_to_frequency(nm: f64) -> Result<f64, UnitError> {
    Ok(C_NM_THZ / positive("wavelength", nm)?)
}

/// Frequency (THz) → vacuum wavelength (nm).
pub fn frequency_to_wavelength(thz: f64) -> Result<f64, UnitError> {
    Ok(C_NM_THZ / positive("frequency", thz)?)
}

/// Converts a FWHM in GHz to an angular decay rate in rad/s.
pub fn ghz_to_angular_rate(ghz: f64) -> f64 {
    2.0 * PI * ghz * 1e9
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn wavenumber_examples() {
        assert_eq!(wavenumber_to_frequency(1.0).unwrap(), 29.9792458);
        assert_eq!(wavenumber_to_frequency(0.0).unwrap(), 0.0);
        assert!((wavenumber_to_frequency(290.0).unwrap() - 8694.0).abs() < 0.1);
        assert!(wavenumber_to_frequency(f64::NAN).is_err());
    }

    #[test]
    fn lifetime_examples() {
        assert!((linewidth_to_lifetime(10.9).unwrap() - 14.6).abs() < 0.05);
        assert!((linewidth_to_lifetime(2.0).unwrap() - 79.6).abs() < 0.05);
        let fwhm = lifetime_to_linewidth(7000.0).unwrap();
        assert!((fwhm - 0.0227).abs() < 1e-4);
        assert_relative_eq!(linewidth_to_lifetime(fwhm).unwrap(), 7000.0, max_relative = 1e-14);
        assert!(linewidth_to_lifetime(0.0).is_err());
        assert!(linewidth_to_lifetime(-1.0).is_err());
    }

    #[test]
    fn wavelength_examples() {
        assert!((wavelength_to_frequency(744.7).unwrap() - 402.57).abs() < 0.01);
        assert_eq!(wavelength_to_frequency(299_792.458).unwrap(), 1.0);
        assert!((wavelength_to_frequency(700.0).unwrap() - 428.27).abs() < 0.01);
        assert!(wavelength_to_frequency(0.0).is_err());
    }

    #[test]
    fn quantity_conversions() {
        let q = Quantity::new(2.0, Unit::FrequencyGhz).unwrap();
        let t = q.linewidth_to_lifetime(Unit::TimePs).unwrap();
        assert!((t.value - 79.6).abs() < 0.05);
        let ns = Quantity::new(7.0, Unit::TimeNs).unwrap();
        let mhz = ns.lifetime_to_linewidth(Unit::FrequencyGhz).unwrap().value * 1e3;
        assert!(mhz > 22.5 && mhz < 23.0);
        assert!(q.convert_to(Unit::TimePs).is_err());
        let uw = Quantity::new(18.6, Unit::PowerUw).unwrap();
        assert_relative_eq!(uw.convert_to(Unit::PowerNw).unwrap().value, 18_600.0);
        let nm = Quantity::new(744.7, Unit::WavelengthNm).unwrap();
        let thz = nm.convert_to(Unit::FrequencyThz).unwrap().value;
        assert_relative_eq!(thz, C_NM_THZ / 744.7, max_relative = 1e-15);
    }

    #[test]
    fn unit_names_round_trip() {
        for u in Unit::ALL {
            assert_eq!(u.name().parse::<Unit>().unwrap(), u);
        }
        assert!("furlong".parse::<Unit>().is_err());
    }

    proptest! {
        #[test]
        fn wavenumber_round_trip(x in 1e-6f64..1e6) {
            let back = frequency_to_wavenumber(wavenumber_to_frequency(x).unwrap()).unwrap();
            prop_assert!(((back - x) / x).abs() < 1e-12);
        }

        #[test]
        fn linewidth_lifetime_product(f in 1e-6f64..1e6) {
            let t = linewidth_to_lifetime(f).unwrap();
            // GHz·ps = 1e-3
            prop_assert!((f * t * 1e-3 - 1.0 / (2.0 * PI)).abs() < 1e-15);
            prop_assert!(linewidth_to_lifetime(f * 1.001).unwrap() < t);
            let back = lifetime_to_linewidth(t).unwrap();
            prop_assert!(((back - f) / f).abs() < 1e-14);
        }
    }
}
