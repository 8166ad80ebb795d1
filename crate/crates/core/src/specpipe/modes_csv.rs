//! Mode lists for Franck–Condon predictions and the stick table output.
//!
//! Input columns: `mode_id,wavenumber_cm1,value,flag`, where `flag` says
//! whether `value` is the fundamental's intensity relative to the 00ZPL
//! (`intensity`, equal to the Huang–Rhys factor S) or the displacement α
//! itself (`alpha`).

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_text, PipeError};
use crate::fcmodel::{ModeDisplacement, VibronicStick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeValueKind {
    Intensity,
    Alpha,
}

#[derive(Debug, Deserialize)]
struct ModeRow {
    mode_id: i64,
    wavenumber_cm1: f64,
    value: f64,
    flag: ModeValueKind,
}

pub fn parse_modes_csv(text: &str) -> Result<Vec<ModeDisplacement>, PipeError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(text.as_bytes());
    let mut modes = Vec::new();
    for row in reader.deserialize::<ModeRow>() {
        let row = row.map_err(|e| PipeError::Format {
            line: e.position().map(|p| p.line() as usize).unwrap_or(1),
            message: match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
                _ => e.to_string(),
            },
        })?;
        let alpha = match row.flag {
            ModeValueKind::Alpha => row.value,
            ModeValueKind::Intensity if row.value >= 0.0 => row.value.sqrt(),
            ModeValueKind::Intensity => {
                return Err(PipeError::Argument(format!("mode {}: negative intensity {}", row.mode_id, row.value)))
            }
        };
        modes.push(ModeDisplacement::new(row.mode_id, row.wavenumber_cm1, alpha)?);
    }
    if modes.is_empty() {
        return Err(PipeError::Format {
            line: 1,
            message: "no modes".into(),
        });
    }
    Ok(modes)
}

pub fn read_modes(path: &Path) -> Result<Vec<ModeDisplacement>, PipeError> {
    parse_modes_csv(&read_text(path)?)
}

#[derive(Serialize)]
struct StickRow {
    wavenumber_cm1: f64,
    intensity: f64,
    quanta: String,
}

/// `wavenumber_cm1,intensity,quanta` with quanta written as `mode:n;mode:n`.
pub fn sticks_to_csv(sticks: &[VibronicStick]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in sticks {
        let quanta = s.quanta.iter().map(|(m, n)| format!("{m}:{n}")).collect::<Vec<_>>().join(";");
        w.serialize(StickRow {
            wavenumber_cm1: s.wavenumber,
            intensity: s.intensity,
            quanta,
        })
        .expect("in-memory CSV write");
    }
    String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcmodel::relative_intensities;

    #[test]
    fn both_flags_give_alpha() {
        let modes = parse_modes_csv("mode_id,wavenumber_cm1,value,flag\n1,290,0.0961,intensity\n2,580, 0.31 ,alpha\n").unwrap();
        assert!((modes[0].alpha - 0.31).abs() < 1e-12);
        assert_eq!(modes[1].alpha, 0.31);
    }

    #[test]
    fn bad_rows_are_located() {
        let err = parse_modes_csv("mode_id,wavenumber_cm1,value,flag\n1,290,0.1,alpha\n2,x,0.1,alpha\n").unwrap_err();
        assert!(matches!(err, PipeError::Format { line: 3, .. }), "{err}");
        let err = parse_modes_csv("mode_id,wavenumber_cm1,value,flag\n1,290,0.1,beta\n").unwrap_err();
        assert!(matches!(err, PipeError::Format { line: 2, .. }), "{err}");
        assert!(parse_modes_csv("mode_id,wavenumber_cm1,value,flag\n").is_err());
    }

    #[test]
    fn stick_table() {
        let modes = parse_modes_csv("mode_id,wavenumber_cm1,value,flag\n7,290,0.31,alpha\n").unwrap();
        let csv = sticks_to_csv(&relative_intensities(&modes, 1).unwrap());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "wavenumber_cm1,intensity,quanta");
        assert_eq!(lines.len(), 3);
        assert!(lines[2].starts_with("290.0,") && lines[2].ends_with(",7:1"), "{}", lines[2]);
    }
}
