use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::units::GHZ_PER_WAVENUMBER;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("axis has {axis} points but there are {values} values")]
    LengthMismatch { axis: usize, values: usize },
    #[error("axis is not strictly increasing at index {0}")]
    NonMonotoneAxis(usize),
    #[error("non-finite entry at index {0}")]
    NonFinite(usize),
    #[error("spectrum is empty")]
    Empty,
    #[error("unknown {what} `{value}`")]
    UnknownTag { what: &'static str, value: String },
}

macro_rules! string_enum {
    ($(#[$m:meta])* $name:ident, $what:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = SpectrumError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(SpectrumError::UnknownTag { what: $what, value: other.to_string() }),
                }
            }
        }
    };
}

string_enum!(
    /// What a spectrum measures.
    SpectrumKind, "kind" {
        Fluorex => "fluorex",
        Sted => "sted",
        Saturation => "saturation",
        Calculated => "calculated",
    }
);

string_enum!(
    AxisUnit, "axis unit" {
        Wavenumber => "cm-1",
        DetuningGhz => "GHz",
        PowerNw => "nW",
        PowerUw => "uW",
    }
);

string_enum!(
    ValueUnit, "value unit" {
        Population => "population",
        Depletion => "depletion",
        Counts => "counts",
        Intensity => "intensity",
    }
);

/// Axis/value pairs plus free-form provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub kind: SpectrumKind,
    pub axis_unit: AxisUnit,
    pub value_unit: ValueUnit,
    pub axis: Vec<f64>,
    pub values: Vec<f64>,
    pub meta: BTreeMap<String, String>,
}

impl Spectrum {
    pub fn new(
        kind: SpectrumKind,
        axis_unit: AxisUnit,
        value_unit: ValueUnit,
        axis: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, SpectrumError> {
        let s = Spectrum {
            kind,
            axis_unit,
            value_unit,
            axis,
            values,
            meta: BTreeMap::new(),
        };
        s.check()?;
        Ok(s)
    }

    pub fn check(&self) -> Result<(), SpectrumError> {
        if self.axis.len() != self.values.len() {
            return Err(SpectrumError::LengthMismatch {
                axis: self.axis.len(),
                values: self.values.len(),
            });
        }
        check_axis(&self.axis)?;
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(SpectrumError::NonFinite(i));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis.is_empty()
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.to_string(), value.to_string());
        self
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key).and_then(|v| v.parse().ok())
    }

    pub fn meta_str(&self, key: &str) -> Option<&str> {
        self.meta.get(key).map(String::as_str)
    }

    /// Axis spacing in cm⁻¹ when the axis is spectral.
    pub fn axis_in_wavenumber(&self, x: f64) -> Option<f64> {
        match self.axis_unit {
            AxisUnit::Wavenumber => Some(x),
            AxisUnit::DetuningGhz => Some(x / GHZ_PER_WAVENUMBER),
            _ => None,
        }
    }
}

pub(crate) fn check_axis(axis: &[f64]) -> Result<(), SpectrumError> {
    if let Some(i) = axis.iter().position(|v| !v.is_finite()) {
        return Err(SpectrumError::NonFinite(i));
    }
    if let Some(i) = axis.windows(2).position(|w| w[1] <= w[0]) {
        return Err(SpectrumError::NonMonotoneAxis(i + 1));
    }
    Ok(())
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| if i == n - 1 { stop } else { start + step * i as f64 }).collect()
        }
    }
}

/// `n` logarithmically spaced points from `start` to `stop` inclusive.
pub fn logspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    linspace(start.ln(), stop.ln(), n).into_iter().map(f64::exp).collect()
}
