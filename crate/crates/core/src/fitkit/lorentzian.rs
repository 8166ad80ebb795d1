use serde::{Deserialize, Serialize};

use super::peaks::{detect_peaks_with, PeakOptions};
use super::{levenberg_marquardt, FitError, FitOptions, FitProblem, FitResult, ModelKind, Parameter};
use crate::ratesim::lorentzian;
use crate::spectrum::Spectrum;

/// Peak-height parameterized Lorentzian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakGuess {
    pub center: f64,
    pub fwhm: f64,
    pub amplitude: f64,
}

/// baseline + Σ Aᵢ / (1 + (2(x − cᵢ)/Γᵢ)²) on every axis point.
pub fn multi_lorentzian(axis: &[f64], baseline: f64, peaks: &[PeakGuess]) -> Vec<f64> {
    axis.iter()
        .map(|&x| baseline + peaks.iter().map(|p| p.amplitude * lorentzian(x - p.center, p.fwhm)).sum::<f64>())
        .collect()
}

fn unpack(x: &[f64]) -> (f64, Vec<PeakGuess>) {
    let peaks = x[1..]
        .chunks_exact(3)
        .map(|c| PeakGuess {
            center: c[0],
            fwhm: c[1],
            amplitude: c[2],
        })
        .collect();
    (x[0], peaks)
}

/// Fits `n_peaks` Lorentzians plus a constant baseline.
///
/// Parameters are named `baseline` and `peak<i>.center|fwhm|amplitude`
/// (i from 1, ordered as the initial guesses). Without `init` the guesses
/// come from [`detect_peaks_with`] at 5 % of the data range, keeping the
/// `n_peaks` most prominent maxima.
pub fn fit_lorentzian_multi(
    spectrum: &Spectrum,
    n_peaks: usize,
    init: Option<&[PeakGuess]>,
    opts: &FitOptions,
) -> Result<FitResult, FitError> {
    spectrum.check().map_err(|e| FitError::Setup(e.to_string()))?;
    if n_peaks == 0 {
        return Err(FitError::Setup("n_peaks must be >= 1".into()));
    }
    let axis = &spectrum.axis;
    let values = &spectrum.values;
    let lo = axis[0];
    let hi = axis[axis.len() - 1];
    let step = (hi - lo) / (axis.len().max(2) - 1) as f64;
    let floor = values.iter().cloned().fold(f64::INFINITY, f64::min);

    let guesses: Vec<PeakGuess> = match init {
        Some(g) if g.len() != n_peaks => {
            return Err(FitError::Setup(format!("{} initial peaks given for n_peaks = {n_peaks}", g.len())))
        }
        Some(g) => g.to_vec(),
        None => {
            let top = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut found = detect_peaks_with(axis, values, &PeakOptions::new(0.05 * (top - floor), 0.0));
            if found.len() < n_peaks {
                return Err(FitError::TooFewPeaks {
                    requested: n_peaks,
                    found: found.len(),
                });
            }
            found.sort_by(|a, b| b.prominence.total_cmp(&a.prominence));
            found.truncate(n_peaks);
            found.sort_by(|a, b| a.center.total_cmp(&b.center));
            found
                .iter()
                .map(|p| PeakGuess {
                    center: p.center,
                    fwhm: if p.width > 0.0 && p.width.is_finite() { p.width } else { 4.0 * step },
                    amplitude: p.height - floor,
                })
                .collect()
        }
    };

    let mut free = vec![Parameter::new("baseline", if init.is_some() { 0.0 } else { floor })];
    for (i, g) in guesses.iter().enumerate() {
        let i = i + 1;
        free.push(Parameter::new(format!("peak{i}.center"), g.center).bounded(lo, hi));
        free.push(Parameter::new(format!("peak{i}.fwhm"), g.fwhm).lower(0.0));
        free.push(Parameter::new(format!("peak{i}.amplitude"), g.amplitude));
    }
    let problem = FitProblem::new(ModelKind::MultiLorentzian, free, values.clone());
    levenberg_marquardt(
        &problem,
        |x, out| {
            let (baseline, peaks) = unpack(x);
            out.copy_from_slice(&multi_lorentzian(axis, baseline, &peaks));
            Ok(())
        },
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratesim::add_noise;
    use crate::spectrum::{linspace, AxisUnit, SpectrumKind, ValueUnit};

    fn line(axis: Vec<f64>, baseline: f64, peaks: &[PeakGuess]) -> Spectrum {
        let values = multi_lorentzian(&axis, baseline, peaks);
        Spectrum::new(SpectrumKind::Fluorex, AxisUnit::DetuningGhz, ValueUnit::Intensity, axis, values).unwrap()
    }

    const NARROW: PeakGuess = PeakGuess {
        center: 0.0,
        fwhm: 0.023,
        amplitude: 1.0,
    };

    #[test]
    fn noiseless_single_line_is_exact() {
        let s = line(linspace(-0.2, 0.2, 801), 0.0, &[NARROW]);
        let fit = fit_lorentzian_multi(&s, 1, None, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!(fit.value("peak1.center").unwrap().abs() < 1e-9);
        assert!((fit.value("peak1.fwhm").unwrap() - 0.023).abs() < 1e-9);
        assert!((fit.value("peak1.amplitude").unwrap() - 1.0).abs() < 1e-9);
        assert!(fit.value("baseline").unwrap().abs() < 1e-9);
    }

    #[test]
    fn poisson_noise_monte_carlo() {
        let clean = line(linspace(-0.2, 0.2, 401), 0.0, &[NARROW]);
        let mut worst_center = 0.0f64;
        let mut worst_width = 0.0f64;
        for seed in 0..50 {
            let noisy = add_noise(&clean, seed, 1e4).unwrap();
            let fit = fit_lorentzian_multi(&noisy, 1, None, &FitOptions::default()).unwrap();
            worst_center = worst_center.max(fit.value("peak1.center").unwrap().abs());
            worst_width = worst_width.max((fit.value("peak1.fwhm").unwrap() / 0.023 - 1.0).abs());
        }
        assert!(worst_center < 0.023 / 20.0, "center error {worst_center}");
        assert!(worst_width < 0.10, "width error {worst_width}");
    }

    #[test]
    fn two_peaks_one_fwhm_apart() {
        let truth = [
            PeakGuess {
                center: -2.5,
                fwhm: 5.0,
                amplitude: 1.0,
            },
            PeakGuess {
                center: 2.5,
                fwhm: 5.0,
                amplitude: 0.7,
            },
        ];
        let s = line(linspace(-40.0, 40.0, 1601), 0.1, &truth);
        let init = [
            PeakGuess {
                center: -4.0,
                fwhm: 3.0,
                amplitude: 0.8,
            },
            PeakGuess {
                center: 4.0,
                fwhm: 3.0,
                amplitude: 0.8,
            },
        ];
        let fit = fit_lorentzian_multi(&s, 2, Some(&init), &FitOptions::default()).unwrap();
        let c1 = fit.value("peak1.center").unwrap();
        let c2 = fit.value("peak2.center").unwrap();
        assert!((c1 + 2.5).abs() < 1e-8 && (c2 - 2.5).abs() < 1e-8, "{c1} {c2}");
        assert!((fit.value("peak2.amplitude").unwrap() - 0.7).abs() < 1e-8);
        assert!((fit.value("baseline").unwrap() - 0.1).abs() < 1e-8);
    }

    #[test]
    fn too_few_peaks() {
        let s = line(linspace(-1.0, 1.0, 201), 0.0, &[NARROW]);
        assert_eq!(
            fit_lorentzian_multi(&s, 3, None, &FitOptions::default()).unwrap_err(),
            FitError::TooFewPeaks { requested: 3, found: 1 }
        );
    }

    #[test]
    fn scaling_the_signal_keeps_centers_and_widths() {
        let peak = PeakGuess {
            center: 1.3,
            fwhm: 4.0,
            amplitude: 1.0,
        };
        let clean = line(linspace(-30.0, 30.0, 601), 0.05, &[peak]);
        let noisy = add_noise(&clean, 9, 1e3).unwrap();
        let mut scaled = noisy.clone();
        scaled.values.iter_mut().for_each(|v| *v *= 3.0);
        let a = fit_lorentzian_multi(&noisy, 1, None, &FitOptions::default()).unwrap();
        let b = fit_lorentzian_multi(&scaled, 1, None, &FitOptions::default()).unwrap();
        for name in ["peak1.center", "peak1.fwhm"] {
            let (x, y) = (a.value(name).unwrap(), b.value(name).unwrap());
            assert!((x - y).abs() < 1e-7 * x.abs().max(1.0), "{name}: {x} vs {y}");
        }
        let ratio = b.value("peak1.amplitude").unwrap() / a.value("peak1.amplitude").unwrap();
        assert!((ratio - 3.0).abs() < 1e-7);
    }
}
