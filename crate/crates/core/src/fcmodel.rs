//! Franck–Condon factors in the displaced harmonic oscillator picture without
//! Duschinsky mixing.
//!
//! Each mode is described by its dimensionless displacement α = ΔQ/(2ΔQ_zpm);
//! the Huang–Rhys factor is S = α². Transitions out of the vibrationless level
//! then follow a Poisson distribution in the number of quanta, and modes
//! factorize.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use thiserror::Error;

use crate::spectrum::{check_axis, AxisUnit, Spectrum, SpectrumError, SpectrumKind, ValueUnit};
use crate::units::GHZ_PER_WAVENUMBER;

/// Combination/overtone positions within this distance of the harmonic sum
/// count as harmonic (cm⁻¹).
pub const HARMONIC_THRESHOLD_CM1: f64 = 0.15;

/// Default cap on the number of enumerated sticks.
pub const DEFAULT_STICK_BUDGET: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FcError {
    #[error("Huang-Rhys factor must be finite and >= 0, got {0}")]
    NegativeHuangRhys(f64),
    #[error("intensity ratio must be finite and >= 0, got {0}")]
    NegativeRatio(f64),
    #[error("displacement alpha must be finite and >= 0, got {0}")]
    InvalidAlpha(f64),
    #[error("quantum number {0} exceeds the supported maximum of {max}", max = MAX_NUMERIC_QUANTA)]
    TooManyQuanta(u32),
    #[error("overlap quadrature did not converge (last change {last_change:e} with {points} points)")]
    NoConvergence { last_change: f64, points: usize },
    #[error("mode {mode_id}: wavenumber must be > 0, got {wavenumber}")]
    InvalidWavenumber { mode_id: i64, wavenumber: f64 },
    #[error("max_total_quanta must be >= 1")]
    NoQuanta,
    #[error("{required} sticks exceed the budget of {budget}")]
    BudgetExceeded { required: u128, budget: usize },
    #[error("scaling slope must be > 0, got {0}")]
    InvalidSlope(f64),
    #[error("linewidth must be > 0, got {0}")]
    InvalidWidth(f64),
    #[error("{sticks} sticks but {widths} widths")]
    WidthCount { sticks: usize, widths: usize },
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeDisplacement {
    pub mode_id: i64,
    /// cm⁻¹
    pub wavenumber: f64,
    pub alpha: f64,
}

impl ModeDisplacement {
    pub fn new(mode_id: i64, wavenumber: f64, alpha: f64) -> Result<Self, FcError> {
        let m = ModeDisplacement { mode_id, wavenumber, alpha };
        m.check()?;
        Ok(m)
    }

    pub fn huang_rhys(&self) -> f64 {
        self.alpha * self.alpha
    }

    fn check(&self) -> Result<(), FcError> {
        if !(self.wavenumber > 0.0 && self.wavenumber.is_finite()) {
            return Err(FcError::InvalidWavenumber {
                mode_id: self.mode_id,
                wavenumber: self.wavenumber,
            });
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(FcError::InvalidAlpha(self.alpha));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VibronicStick {
    /// cm⁻¹, Σ nᵢ·ω̃ᵢ.
    pub wavenumber: f64,
    /// Relative to the strongest stick.
    pub intensity: f64,
    /// Non-zero quanta per mode id.
    pub quanta: BTreeMap<i64, u32>,
}

impl VibronicStick {
    pub fn total_quanta(&self) -> u32 {
        self.quanta.values().sum()
    }
}

/// e^{−S}·Sⁿ/n!, the FC factor for 0 → n quanta.
pub fn fc_factor_poisson(huang_rhys: f64, n: u32) -> Result<f64, FcError> {
    let s = huang_rhys;
    if !(s >= 0.0 && s.is_finite()) {
        return Err(FcError::NegativeHuangRhys(s));
    }
    if s == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    Ok((-s + n as f64 * s.ln() - ln_fact).exp())
}

/// α from a measured overtone-to-fundamental ratio of squared Rabi
/// frequencies, α = ratio^{1/2}.
pub fn huang_rhys_from_ratio(ratio: f64) -> Result<f64, FcError> {
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(FcError::NegativeRatio(ratio));
    }
    Ok(ratio.sqrt())
}

pub const MAX_NUMERIC_QUANTA: u32 = 20;

/// Normalized Hermite functions ψ₀..ψ_max at ξ via the three-term recurrence.
fn hermite_functions(xi: f64, max: usize, out: &mut [f64]) {
    out[0] = PI.powf(-0.25) * (-0.5 * xi * xi).exp();
    if max >= 1 {
        out[1] = 2f64.sqrt() * xi * out[0];
    }
    for k in 1..max {
        let kf = k as f64;
        out[k + 1] = (2.0 / (kf + 1.0)).sqrt() * xi * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// |⟨n|m̃⟩|², where |m̃⟩ is the m-th oscillator eigenfunction displaced by
/// 2α·ΔQ_zpm, evaluated by quadrature.
///
/// The trapezoid rule on a window wide enough to contain both wavefunctions is
/// refined by doubling until successive estimates agree to 1e−10.
pub fn fc_overlap_numeric(alpha: f64, n: u32, m: u32) -> Result<f64, FcError> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(FcError::InvalidAlpha(alpha));
    }
    if n > MAX_NUMERIC_QUANTA || m > MAX_NUMERIC_QUANTA {
        return Err(FcError::TooManyQuanta(n.max(m)));
    }
    // displacement in units of √(ħ/ω): ΔQ_zpm = 1/√2
    let shift = 2f64.sqrt() * alpha;
    let classical = (2.0 * n.max(m) as f64 + 1.0).sqrt();
    let half_width = classical + 12.0;
    let lo = shift.min(0.0) - half_width;
    let hi = shift.max(0.0) + half_width;

    let (nu, mu) = (n as usize, m as usize);
    let mut left = vec![0.0; nu.max(1) + 1];
    let mut right = vec![0.0; mu.max(1) + 1];
    let integrand = |xi: f64, left: &mut [f64], right: &mut [f64]| {
        hermite_functions(xi, nu.max(1), left);
        hermite_functions(xi - shift, mu.max(1), right);
        left[nu] * right[mu]
    };

    let mut intervals = 64usize;
    let mut h = (hi - lo) / intervals as f64;
    let mut sum = 0.5 * (integrand(lo, &mut left, &mut right) + integrand(hi, &mut left, &mut right));
    for i in 1..intervals {
        sum += integrand(lo + i as f64 * h, &mut left, &mut right);
    }
    let mut estimate = sum * h;
    let mut last_change = f64::INFINITY;
    while intervals < 1 << 22 {
        // new midpoints only
        for i in 0..intervals {
            sum += integrand(lo + (i as f64 + 0.5) * h, &mut left, &mut right);
        }
        intervals *= 2;
        h *= 0.5;
        let refined = sum * h;
        last_change = (refined - estimate).abs();
        estimate = refined;
        if last_change < 1e-10 && intervals >= 256 {
            return Ok(estimate * estimate);
        }
    }
    Err(FcError::NoConvergence {
        last_change,
        points: intervals + 1,
    })
}

/// Binomial coefficient C(n, k) saturating at `u128::MAX`.
fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// All vibronic sticks with Σnᵢ ≤ `max_total_quanta`, with the default budget.
pub fn relative_intensities(modes: &[ModeDisplacement], max_total_quanta: u32) -> Result<Vec<VibronicStick>, FcError> {
    relative_intensities_with_budget(modes, max_total_quanta, DEFAULT_STICK_BUDGET)
}

/// Enumerates every quanta assignment with Σnᵢ ≤ `max_total_quanta`.
///
/// Intensities are products of single-mode Poisson factors, normalized so the
/// strongest stick is 1. Sticks with exactly zero intensity are dropped.
/// The result is sorted by wavenumber.
pub fn relative_intensities_with_budget(
    modes: &[ModeDisplacement],
    max_total_quanta: u32,
    budget: usize,
) -> Result<Vec<VibronicStick>, FcError> {
    if max_total_quanta == 0 {
        return Err(FcError::NoQuanta);
    }
    for m in modes {
        m.check()?;
    }
    // number of assignments = C(M + Q, Q)
    let required = binomial(modes.len() as u64 + max_total_quanta as u64, max_total_quanta as u64);
    if required > budget as u128 {
        return Err(FcError::BudgetExceeded { required, budget });
    }

    let tables: Vec<Vec<f64>> = modes
        .iter()
        .map(|m| (0..=max_total_quanta).map(|n| fc_factor_poisson(m.huang_rhys(), n)).collect())
        .collect::<Result<_, _>>()?;

    let mut sticks = Vec::with_capacity(required as usize);
    let mut quanta = vec![0u32; modes.len()];
    enumerate(modes, &tables, 0, max_total_quanta, &mut quanta, &mut sticks);

    let max = sticks.iter().map(|s| s.intensity).fold(0.0, f64::max);
    if max > 0.0 {
        for s in &mut sticks {
            s.intensity /= max;
        }
    }
    sticks.retain(|s| s.intensity > 0.0);
    sticks.sort_by(|a, b| {
        a.wavenumber
            .total_cmp(&b.wavenumber)
            .then_with(|| a.quanta.iter().cmp(b.quanta.iter()))
    });
    Ok(sticks)
}

fn enumerate(
    modes: &[ModeDisplacement],
    tables: &[Vec<f64>],
    index: usize,
    remaining: u32,
    quanta: &mut [u32],
    out: &mut Vec<VibronicStick>,
) {
    if index == modes.len() {
        let mut intensity = 1.0;
        let mut wavenumber = 0.0;
        let mut map = BTreeMap::new();
        for (i, &n) in quanta.iter().enumerate() {
            intensity *= tables[i][n as usize];
            if n > 0 {
                wavenumber += n as f64 * modes[i].wavenumber;
                *map.entry(modes[i].mode_id).or_insert(0) += n;
            }
        }
        out.push(VibronicStick {
            wavenumber,
            intensity,
            quanta: map,
        });
        return;
    }
    for n in 0..=remaining {
        quanta[index] = n;
        enumerate(modes, tables, index + 1, remaining - n, quanta, out);
    }
    quanta[index] = 0;
}

/// Line width assignment for [`stick_to_spectrum`], FWHM in GHz.
#[derive(Debug, Clone, PartialEq)]
pub enum Broadening {
    Uniform(f64),
    PerStick(Vec<f64>),
}

/// Sums area-normalized Lorentzians, one per stick, on a cm⁻¹ axis.
pub fn stick_to_spectrum(sticks: &[VibronicStick], broadening: &Broadening, axis: &[f64]) -> Result<Spectrum, FcError> {
    if axis.is_empty() {
        return Err(SpectrumError::Empty.into());
    }
    check_axis(axis)?;
    let widths_cm1: Vec<f64> = match broadening {
        Broadening::Uniform(g) => vec![*g; sticks.len()],
        Broadening::PerStick(ws) => {
            if ws.len() != sticks.len() {
                return Err(FcError::WidthCount {
                    sticks: sticks.len(),
                    widths: ws.len(),
                });
            }
            ws.clone()
        }
    }
    .into_iter()
    .map(|g| {
        if g > 0.0 && g.is_finite() {
            Ok(g / GHZ_PER_WAVENUMBER)
        } else {
            Err(FcError::InvalidWidth(g))
        }
    })
    .collect::<Result<_, _>>()?;

    let values = axis
        .iter()
        .map(|&x| {
            sticks
                .iter()
                .zip(&widths_cm1)
                .map(|(s, &g)| {
                    let half = 0.5 * g;
                    let d = x - s.wavenumber;
                    s.intensity * half / (PI * (d * d + half * half))
                })
                .sum()
        })
        .collect();
    let spectrum = Spectrum::new(
        SpectrumKind::Calculated,
        AxisUnit::Wavenumber,
        ValueUnit::Intensity,
        axis.to_vec(),
        values,
    )?;
    Ok(spectrum)
}

/// Signed deviation of a combination/overtone from the harmonic sum, cm⁻¹.
pub fn anharmonicity_defect(nu_combination: f64, nu_a: f64, nu_b: f64) -> f64 {
    nu_combination - (nu_a + nu_b)
}

/// True if the defect is below [`HARMONIC_THRESHOLD_CM1`] in magnitude.
pub fn is_harmonic(defect: f64) -> bool {
    defect.abs() < HARMONIC_THRESHOLD_CM1
}

/// Applies w ↦ slope·w + intercept to every mode. α is unchanged.
pub fn apply_scaling(modes: &[ModeDisplacement], slope: f64, intercept: f64) -> Result<Vec<ModeDisplacement>, FcError> {
    if !(slope > 0.0 && slope.is_finite()) {
        return Err(FcError::InvalidSlope(slope));
    }
    modes
        .iter()
        .map(|m| ModeDisplacement::new(m.mode_id, slope * m.wavenumber + intercept, m.alpha))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn poisson_examples() {
        assert_eq!(fc_factor_poisson(0.0, 0).unwrap(), 1.0);
        assert_eq!(fc_factor_poisson(0.0, 1).unwrap(), 0.0);
        assert!((fc_factor_poisson(0.0961, 1).unwrap() - 0.08730).abs() < 1e-5);
        assert!(fc_factor_poisson(-0.1, 0).is_err());
    }

    #[test]
    fn ratio_examples() {
        assert!((huang_rhys_from_ratio(0.0961).unwrap() - 0.31).abs() < 1e-12);
        assert_eq!(huang_rhys_from_ratio(0.0).unwrap(), 0.0);
        assert_eq!(huang_rhys_from_ratio(1.0).unwrap(), 1.0);
        assert!(huang_rhys_from_ratio(-1.0).is_err());
    }

    #[test]
    fn numeric_overlap_examples() {
        assert!((fc_overlap_numeric(0.0, 0, 0).unwrap() - 1.0).abs() < 1e-10);
        assert!(fc_overlap_numeric(0.0, 1, 0).unwrap() < 1e-20);
        let numeric = fc_overlap_numeric(0.31, 0, 2).unwrap();
        let analytic = fc_factor_poisson(0.0961, 2).unwrap();
        assert!((numeric - analytic).abs() < 1e-8);
        assert!(fc_overlap_numeric(0.3, 21, 0).is_err());
    }

    #[test]
    fn single_mode_overtone_ratio() {
        let mode = ModeDisplacement::new(1, 290.0, 0.31).unwrap();
        let sticks = relative_intensities(&[mode], 2).unwrap();
        let wn: Vec<f64> = sticks.iter().map(|s| s.wavenumber).collect();
        assert_eq!(wn, vec![0.0, 290.0, 580.0]);
        let ratio = sticks[2].intensity / sticks[1].intensity;
        assert!((ratio - 0.0481).abs() < 1e-4);
        assert!((ratio - mode.huang_rhys() / 2.0).abs() < 1e-15);
        assert_eq!(sticks[0].intensity, 1.0);
    }

    #[test]
    fn combination_follows_product_rule() {
        let a = ModeDisplacement::new(1, 290.0, 0.31).unwrap();
        let b = ModeDisplacement::new(2, 270.0, 0.2).unwrap();
        let sticks = relative_intensities(&[a, b], 2).unwrap();
        let comb = sticks.iter().find(|s| s.wavenumber == 560.0).unwrap();
        let zero = sticks.iter().find(|s| s.total_quanta() == 0).unwrap();
        let expected = fc_factor_poisson(a.huang_rhys(), 1).unwrap() * fc_factor_poisson(b.huang_rhys(), 1).unwrap()
            / (fc_factor_poisson(a.huang_rhys(), 0).unwrap() * fc_factor_poisson(b.huang_rhys(), 0).unwrap());
        assert!((comb.intensity / zero.intensity - expected).abs() < 1e-14);
        assert_eq!(sticks.len(), 6);
    }

    #[test]
    fn undisplaced_mode_contributes_nothing() {
        let a = ModeDisplacement::new(1, 290.0, 0.0).unwrap();
        let sticks = relative_intensities(&[a], 3).unwrap();
        assert_eq!(sticks.len(), 1);
        assert_eq!(sticks[0].wavenumber, 0.0);
        let b = ModeDisplacement::new(2, 100.0, 0.5).unwrap();
        let sticks = relative_intensities(&[a, b], 2).unwrap();
        assert!(sticks.iter().all(|s| !s.quanta.contains_key(&1)));
    }

    #[test]
    fn budget_is_enforced() {
        let modes: Vec<_> = (0..50).map(|i| ModeDisplacement::new(i, 100.0 + i as f64, 0.1).unwrap()).collect();
        assert!(matches!(relative_intensities(&modes, 5), Err(FcError::BudgetExceeded { .. })));
        assert!(relative_intensities_with_budget(&modes[..3], 2, 10).is_ok());
        assert!(relative_intensities(&modes[..1], 0).is_err());
    }

    #[test]
    fn single_stick_peak_height() {
        let stick = VibronicStick {
            wavenumber: 290.0,
            intensity: 1.0,
            quanta: BTreeMap::from([(1, 1)]),
        };
        let gamma_ghz = 10.0;
        let g = gamma_ghz / GHZ_PER_WAVENUMBER;
        let axis: Vec<f64> = (0..2001).map(|i| 288.0 + i as f64 * 0.002).collect();
        let spec = stick_to_spectrum(std::slice::from_ref(&stick), &Broadening::Uniform(gamma_ghz), &axis).unwrap();
        let (imax, &vmax) = spec
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        assert!((axis[imax] - 290.0).abs() < 1e-9);
        assert!((vmax - 2.0 / (PI * g)).abs() < 1e-9 * vmax);

        let double =
            stick_to_spectrum(&[stick.clone(), stick], &Broadening::Uniform(gamma_ghz), &axis).unwrap();
        for (d, s) in double.values.iter().zip(&spec.values) {
            assert_eq!(*d, 2.0 * s);
        }
        assert!(stick_to_spectrum(&[], &Broadening::Uniform(1.0), &[]).is_err());
        assert!(stick_to_spectrum(&[], &Broadening::Uniform(1.0), &[1.0, 0.0]).is_err());
    }

    #[test]
    fn triad_is_resolved() {
        let sticks: Vec<_> = [(177.0, 0.2), (234.0, 0.3), (290.0, 1.0)]
            .iter()
            .map(|&(w, i)| VibronicStick {
                wavenumber: w,
                intensity: i,
                quanta: BTreeMap::new(),
            })
            .collect();
        let axis: Vec<f64> = (0..=3000).map(|i| 150.0 + i as f64 * 0.05).collect();
        let spec = stick_to_spectrum(&sticks, &Broadening::Uniform(10.0), &axis).unwrap();
        let maxima: Vec<f64> = (1..axis.len() - 1)
            .filter(|&i| spec.values[i] > spec.values[i - 1] && spec.values[i] > spec.values[i + 1])
            .map(|i| axis[i])
            .collect();
        assert_eq!(maxima, vec![177.0, 234.0, 290.0]);
    }

    #[test]
    fn anharmonicity_examples() {
        let d = anharmonicity_defect(580.10, 290.0, 290.0);
        assert!((d - 0.10).abs() < 1e-9 && is_harmonic(d));
        assert_eq!(anharmonicity_defect(580.0, 290.0, 290.0), 0.0);
        let d = anharmonicity_defect(581.0, 290.0, 290.0);
        assert!((d - 1.0).abs() < 1e-12 && !is_harmonic(d));
    }

    #[test]
    fn scaling_examples() {
        let m = [ModeDisplacement::new(7, 290.0, 0.31).unwrap()];
        assert_eq!(apply_scaling(&m, 1.0, 0.0).unwrap(), m.to_vec());
        let scaled = apply_scaling(&m, 0.98, 0.0).unwrap();
        assert!((scaled[0].wavenumber - 284.2).abs() < 1e-9);
        assert_eq!(scaled[0].alpha, 0.31);
        assert!(apply_scaling(&m, 1.0, -300.0).is_err());
        assert!(apply_scaling(&m, 0.0, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn poisson_partial_sums_normalize(s in 0.0f64..5.0) {
            let total: f64 = (0..=50).map(|n| fc_factor_poisson(s, n).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn broadening_is_linear(scale in 0.01f64..100.0) {
            let sticks = vec![
                VibronicStick { wavenumber: 100.0, intensity: 0.4, quanta: BTreeMap::new() },
                VibronicStick { wavenumber: 101.0, intensity: 1.0, quanta: BTreeMap::new() },
            ];
            let scaled: Vec<_> = sticks.iter().map(|s| VibronicStick { intensity: s.intensity * scale, ..s.clone() }).collect();
            let axis: Vec<f64> = (0..50).map(|i| 99.0 + i as f64 * 0.1).collect();
            let a = stick_to_spectrum(&sticks, &Broadening::PerStick(vec![5.0, 8.0]), &axis).unwrap();
            let b = stick_to_spectrum(&scaled, &Broadening::PerStick(vec![5.0, 8.0]), &axis).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                prop_assert!((x * scale - y).abs() <= 1e-12 * y.abs().max(1e-300));
            }
        }
    }
}
