use std::path::Path;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};

use super::{read_text, write_text, PipeError};
use crate::levels::{validate_scheme, ElectronicState, LevelKind, LevelScheme, VibronicLevel};

fn positive<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(D::Error::custom(format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(D::Error::custom(format!("must be finite and >= 0, got {v}")))
    }
}

fn unit_interval<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(D::Error::custom(format!("must lie in [0, 1], got {v}")))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LevelFile {
    id: String,
    #[serde(deserialize_with = "positive")]
    wavenumber_cm1: f64,
    #[serde(deserialize_with = "positive")]
    gamma_ghz: f64,
    #[serde(deserialize_with = "unit_interval")]
    relative_fc: f64,
    #[serde(default)]
    kind: LevelKind,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemeFile {
    #[serde(deserialize_with = "positive")]
    zpl_frequency_thz: f64,
    #[serde(deserialize_with = "positive")]
    t1_ns: f64,
    #[serde(default, deserialize_with = "non_negative")]
    baseline_sideband_cross_section: f64,
    #[serde(default)]
    s0_levels: Vec<LevelFile>,
    #[serde(default)]
    s1_levels: Vec<LevelFile>,
}

fn to_file(level: &VibronicLevel) -> LevelFile {
    LevelFile {
        id: level.id.clone(),
        wavenumber_cm1: level.wavenumber,
        gamma_ghz: level.gamma_over_2pi,
        relative_fc: level.relative_fc,
        kind: level.kind,
    }
}

fn from_file(level: LevelFile, state: ElectronicState) -> VibronicLevel {
    VibronicLevel::new(level.id, state, level.wavenumber_cm1, level.gamma_ghz, level.relative_fc).with_kind(level.kind)
}

/// Parses and validates a level scheme. Errors name the offending JSON path,
/// e.g. `s0_levels[0].gamma_ghz`.
pub fn parse_scheme(text: &str) -> Result<LevelScheme, PipeError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: SchemeFile = serde_path_to_error::deserialize(de).map_err(|e| PipeError::Schema {
        path: match e.path().to_string() {
            p if p == "." => "$".to_string(),
            p => p,
        },
        message: e.inner().to_string(),
    })?;
    let scheme = LevelScheme {
        zpl_frequency_thz: file.zpl_frequency_thz,
        t1_ns: file.t1_ns,
        baseline_sideband_cross_section: file.baseline_sideband_cross_section,
        s0_levels: file.s0_levels.into_iter().map(|l| from_file(l, ElectronicState::S0)).collect(),
        s1_levels: file.s1_levels.into_iter().map(|l| from_file(l, ElectronicState::S1)).collect(),
    };
    if let Some(v) = validate_scheme(&scheme).into_iter().next() {
        let path = match &v.level_id {
            Some(id) => level_path(&scheme, id),
            None => "$".to_string(),
        };
        return Err(PipeError::Schema { path, message: v.rule });
    }
    Ok(scheme)
}

// Last occurrence, so a duplicated id points at the repeat.
fn level_path(scheme: &LevelScheme, id: &str) -> String {
    for (list, name) in [(&scheme.s1_levels, "s1_levels"), (&scheme.s0_levels, "s0_levels")] {
        if let Some(i) = list.iter().rposition(|l| l.id == id) {
            return format!("{name}[{i}].id");
        }
    }
    "$".to_string()
}

pub fn scheme_to_json(scheme: &LevelScheme) -> String {
    let file = SchemeFile {
        zpl_frequency_thz: scheme.zpl_frequency_thz,
        t1_ns: scheme.t1_ns,
        baseline_sideband_cross_section: scheme.baseline_sideband_cross_section,
        s0_levels: scheme.s0_levels.iter().map(to_file).collect(),
        s1_levels: scheme.s1_levels.iter().map(to_file).collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn read_scheme(path: &Path) -> Result<LevelScheme, PipeError> {
    parse_scheme(&read_text(path)?)
}

pub fn write_scheme(scheme: &LevelScheme, path: &Path) -> Result<(), PipeError> {
    write_text(path, &scheme_to_json(scheme))
}
