use serde::{Deserialize, Serialize};

use super::{levenberg_marquardt, FitError, FitOptions, FitProblem, FitResult, ModelKind, Parameter};
use crate::levels::{validate_scheme, LaserDrive, LevelScheme};
use crate::ratesim::{anchor_wavenumber, fluorex_values, sted_values};
use crate::spectrum::{AxisUnit, Spectrum, SpectrumKind, ValueUnit};
use crate::units::GHZ_PER_WAVENUMBER;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateModel {
    Fluorex,
    Sted,
}

/// Experimental conditions of a rate-model spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFitSetup {
    pub model: RateModel,
    /// Level the scanned laser is referenced to.
    pub anchor: String,
    /// Anchor position (cm⁻¹) that a GHz detuning axis is measured from.
    pub reference_cm1: f64,
    pub s_p: f64,
    pub s_d: f64,
    /// Fixed pump of a STED scan.
    pub pump: Option<LaserDrive>,
    /// Signal per unit of model value (dwell scale for count data).
    pub scale: f64,
}

impl RateFitSetup {
    /// Reads the conditions from the metadata written by the simulator:
    /// `anchor`, `reference_cm1`, `sp`, `sd`, `pump`, `pump_detuning_ghz`
    /// and, for count data, `dwell_scale`.
    pub fn from_spectrum(spectrum: &Spectrum, template: &LevelScheme) -> Result<Self, FitError> {
        let model = match spectrum.kind {
            SpectrumKind::Fluorex => RateModel::Fluorex,
            SpectrumKind::Sted => RateModel::Sted,
            other => return Err(FitError::Setup(format!("rate-model fits need a fluorex or sted spectrum, got {other}"))),
        };
        let need = |key: &str| {
            spectrum
                .meta_f64(key)
                .ok_or_else(|| FitError::Setup(format!("spectrum metadata lacks numeric `{key}`")))
        };
        let anchor = spectrum
            .meta_str("anchor")
            .ok_or_else(|| FitError::Setup("spectrum metadata lacks `anchor`".into()))?
            .to_string();
        let reference_cm1 = match spectrum.meta_f64("reference_cm1") {
            Some(r) => r,
            None => anchor_wavenumber(template, &anchor)?,
        };
        let scale = match spectrum.value_unit {
            ValueUnit::Counts => need("dwell_scale")?,
            _ => 1.0,
        };
        let (s_d, pump) = match model {
            RateModel::Fluorex => (0.0, None),
            RateModel::Sted => {
                let target = spectrum
                    .meta_str("pump")
                    .ok_or_else(|| FitError::Setup("spectrum metadata lacks `pump`".into()))?;
                let detuning = spectrum.meta_f64("pump_detuning_ghz").unwrap_or(0.0);
                (need("sd")?, Some(LaserDrive::pump(target, need("sp")?).detuned(detuning)))
            }
        };
        Ok(RateFitSetup {
            model,
            anchor,
            reference_cm1,
            s_p: need("sp")?,
            s_d,
            pump,
            scale,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub result: FitResult,
    /// Template with the fitted values written back.
    pub scheme: LevelScheme,
    pub setup: RateFitSetup,
}

#[derive(Debug, Clone, Copy)]
enum Slot {
    Wavenumber(usize),
    Gamma(usize),
    Fc(usize),
    Baseline,
    T1,
    Sp,
    Sd,
    Scale,
}

struct Model {
    template: LevelScheme,
    setup: RateFitSetup,
    slots: Vec<Slot>,
    /// Scanned-laser offsets from the vibrationless level, GHz.
    offsets: Vec<f64>,
}

fn level_index(scheme: &LevelScheme, id: &str) -> Option<usize> {
    scheme.levels().position(|l| l.id == id)
}

fn nth_level_mut(scheme: &mut LevelScheme, i: usize) -> &mut crate::levels::VibronicLevel {
    let n0 = scheme.s0_levels.len();
    if i < n0 {
        &mut scheme.s0_levels[i]
    } else {
        &mut scheme.s1_levels[i - n0]
    }
}

impl Model {
    fn apply(&self, x: &[f64]) -> (LevelScheme, RateFitSetup) {
        let mut scheme = self.template.clone();
        let mut setup = self.setup.clone();
        for (slot, &v) in self.slots.iter().zip(x) {
            match *slot {
                Slot::Wavenumber(i) => nth_level_mut(&mut scheme, i).wavenumber = v,
                Slot::Gamma(i) => nth_level_mut(&mut scheme, i).gamma_over_2pi = v,
                Slot::Fc(i) => nth_level_mut(&mut scheme, i).relative_fc = v,
                Slot::Baseline => scheme.baseline_sideband_cross_section = v,
                Slot::T1 => scheme.t1_ns = v,
                Slot::Sp => setup.s_p = v,
                Slot::Sd => setup.s_d = v,
                Slot::Scale => setup.scale = v,
            }
        }
        if let Some(pump) = setup.pump.as_mut() {
            pump.saturation = setup.s_p;
        }
        (scheme, setup)
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), FitError> {
        let (scheme, setup) = self.apply(x);
        let anchor_ghz = anchor_wavenumber(&scheme, &setup.anchor)? * GHZ_PER_WAVENUMBER;
        let detunings: Vec<f64> = self.offsets.iter().map(|o| o - anchor_ghz).collect();
        let values = match setup.model {
            RateModel::Fluorex => fluorex_values(&scheme, &setup.anchor, &detunings, setup.s_p)?,
            RateModel::Sted => sted_values(&scheme, setup.pump.as_ref().expect("sted setup has a pump"), &setup.anchor, &detunings, setup.s_d)?,
        };
        for (o, v) in out.iter_mut().zip(values) {
            *o = setup.scale * v;
        }
        Ok(())
    }
}

/// Fits rate-equation parameters of `template` to a fluorex or STED spectrum.
///
/// Free parameters are named `<level id>.wavenumber`, `<level id>.gamma`
/// (natural Γ/2π in GHz), `<level id>.fc`, `baseline`, `t1`, `sp`, `sd` and
/// `scale`; everything else stays at its template or setup value. The
/// setup is taken from the spectrum metadata.
pub fn fit_rate_model(spectrum: &Spectrum, template: &LevelScheme, free: &[String], opts: &FitOptions) -> Result<RateFit, FitError> {
    let setup = RateFitSetup::from_spectrum(spectrum, template)?;
    fit_rate_model_with(spectrum, template, free, setup, opts)
}

pub fn fit_rate_model_with(
    spectrum: &Spectrum,
    template: &LevelScheme,
    free: &[String],
    setup: RateFitSetup,
    opts: &FitOptions,
) -> Result<RateFit, FitError> {
    spectrum.check().map_err(|e| FitError::Setup(e.to_string()))?;
    if let Some(v) = validate_scheme(template).first() {
        return Err(FitError::Setup(format!("template: {v}")));
    }
    let offsets: Vec<f64> = match spectrum.axis_unit {
        AxisUnit::Wavenumber => spectrum.axis.iter().map(|w| w * GHZ_PER_WAVENUMBER).collect(),
        AxisUnit::DetuningGhz => spectrum.axis.iter().map(|d| setup.reference_cm1 * GHZ_PER_WAVENUMBER + d).collect(),
        other => return Err(FitError::Setup(format!("axis unit {other} is not a frequency scan"))),
    };
    let extent_cm1 = (offsets[offsets.len() - 1] - offsets[0]) / GHZ_PER_WAVENUMBER;
    let window = extent_cm1.max(1.0);

    let mut slots = Vec::with_capacity(free.len());
    let mut params = Vec::with_capacity(free.len());
    for name in free {
        let (slot, initial) = match name.as_str() {
            "baseline" => (Slot::Baseline, template.baseline_sideband_cross_section),
            "t1" => (Slot::T1, template.t1_ns),
            "sp" => (Slot::Sp, setup.s_p),
            "sd" => (Slot::Sd, setup.s_d),
            "scale" => (Slot::Scale, setup.scale),
            other => {
                let (id, field) = other.rsplit_once('.').ok_or_else(|| FitError::UnknownParameter(other.to_string()))?;
                let i = level_index(template, id).ok_or_else(|| FitError::UnknownParameter(other.to_string()))?;
                let level = template.level(id).expect("index found");
                match field {
                    "wavenumber" => (Slot::Wavenumber(i), level.wavenumber),
                    "gamma" => (Slot::Gamma(i), level.gamma_over_2pi),
                    "fc" => (Slot::Fc(i), level.relative_fc),
                    _ => return Err(FitError::UnknownParameter(other.to_string())),
                }
            }
        };
        let p = Parameter::new(name.clone(), initial);
        params.push(match slot {
            Slot::Wavenumber(_) => p.bounded((initial - window).max(1e-9), initial + window),
            _ => p.lower(0.0),
        });
        slots.push(slot);
    }

    let model_kind = match setup.model {
        RateModel::Fluorex => ModelKind::RateFluorex,
        RateModel::Sted => ModelKind::RateSted,
    };
    let mut problem = FitProblem::new(model_kind, params, spectrum.values.clone());
    problem.fixed = vec![
        ("sp".to_string(), setup.s_p),
        ("sd".to_string(), setup.s_d),
        ("scale".to_string(), setup.scale),
        ("baseline".to_string(), template.baseline_sideband_cross_section),
        ("t1".to_string(), template.t1_ns),
    ]
    .into_iter()
    .filter(|(n, _)| !free.contains(n))
    .collect();

    let model = Model {
        template: template.clone(),
        setup,
        slots,
        offsets,
    };
    let result = levenberg_marquardt(&problem, |x, out| model.eval(x, out), opts)?;
    let (scheme, setup) = model.apply(&result.values());
    Ok(RateFit { result, scheme, setup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levels::{ElectronicState, VibronicLevel};
    use crate::ratesim::{add_noise, fluorex_spectrum, sted_spectrum, ScanAxis};
    use crate::spectrum::linspace;

    fn scheme() -> LevelScheme {
        let mut s = LevelScheme::new(402.57, 7.0)
            .with_level(VibronicLevel::new("w290", ElectronicState::S1, 290.0, 10.9, 1.0))
            .with_level(VibronicLevel::new("v670", ElectronicState::S0, 670.0, 4.0, 1.0));
        s.baseline_sideband_cross_section = 0.05;
        s
    }

    fn names(n: &[&str]) -> Vec<String> {
        n.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn fluorex_width_under_strong_saturation() {
        let truth = scheme();
        let scan = ScanAxis::detuning("w290", linspace(-150.0, 150.0, 301));
        let spec = fluorex_spectrum(&truth, &scan, 10.0).unwrap();
        let mut start = truth.clone();
        start.level_mut("w290").unwrap().gamma_over_2pi = 25.0;
        start.level_mut("w290").unwrap().wavenumber = 290.4;
        start.level_mut("w290").unwrap().relative_fc = 0.6;
        let fit = fit_rate_model(&spec, &start, &names(&["w290.wavenumber", "w290.gamma", "w290.fc"]), &FitOptions::default()).unwrap();
        assert!(fit.result.converged);
        let g = fit.result.value("w290.gamma").unwrap();
        assert!((g / 10.9 - 1.0).abs() < 1e-8, "{g}");
        assert!((fit.result.value("w290.wavenumber").unwrap() - 290.0).abs() < 1e-8);
        assert_eq!(fit.scheme.level("w290").unwrap().gamma_over_2pi, g);
    }

    #[test]
    fn noisy_sted_dip() {
        let truth = scheme();
        let pump = LaserDrive::pump("w290", 1.0);
        let scan = ScanAxis::wavenumber("v670", linspace(669.0, 671.0, 201));
        let clean = sted_spectrum(&truth, &pump, &scan, 5.0).unwrap();
        let noisy = add_noise(&clean, 3, 1e5).unwrap();
        let mut start = truth.clone();
        start.level_mut("v670").unwrap().gamma_over_2pi = 7.0;
        start.level_mut("v670").unwrap().relative_fc = 0.5;
        start.baseline_sideband_cross_section = 0.0;
        let free = names(&["v670.wavenumber", "v670.gamma", "v670.fc", "baseline"]);
        let fit = fit_rate_model(&noisy, &start, &free, &FitOptions::default()).unwrap();
        let g = fit.result.value("v670.gamma").unwrap();
        assert!((g / 4.0 - 1.0).abs() < 0.05, "{g}");
        assert!(fit.result.get("v670.gamma").unwrap().sigma > 0.0);
    }

    #[test]
    fn unknown_parameters_are_rejected() {
        let truth = scheme();
        let spec = fluorex_spectrum(&truth, &ScanAxis::detuning("w290", linspace(-50.0, 50.0, 21)), 1.0).unwrap();
        for bad in ["nope.gamma", "w290.colour", "gamma"] {
            assert_eq!(
                fit_rate_model(&spec, &truth, &names(&[bad]), &FitOptions::default()).unwrap_err(),
                FitError::UnknownParameter(bad.into())
            );
        }
    }

    #[test]
    fn needs_a_rate_spectrum() {
        let s = Spectrum::new(SpectrumKind::Calculated, AxisUnit::Wavenumber, ValueUnit::Intensity, vec![1.0, 2.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(fit_rate_model(&s, &scheme(), &[], &FitOptions::default()), Err(FitError::Setup(_))));
    }
}
