use std::collections::BTreeMap;

use nalgebra::DMatrix;
use proptest::prelude::*;

use vibronic::fcmodel::{relative_intensities, stick_to_spectrum, Broadening, ModeDisplacement, VibronicStick};
use vibronic::fitkit::{fit_lorentzian_multi, multi_lorentzian, FitOptions, PeakGuess};
use vibronic::levels::{transition_linewidth, validate_scheme, ElectronicState, LaserDrive, LevelScheme, VibronicLevel};
use vibronic::ratesim::{add_noise, steady_state, sted_values, RateSystem};
use vibronic::specpipe::{match_modes, mode_statistics, ModeFit, MoleculeRecord, Provenance};
use vibronic::spectrum::linspace;
use vibronic::units::{lifetime_to_linewidth, linewidth_to_lifetime};
use vibronic::{AxisUnit, Spectrum, SpectrumKind, ValueUnit};

fn sted_scheme(fc: f64, baseline: f64) -> LevelScheme {
    let mut s = LevelScheme::new(402.57, 7.0)
        .with_level(VibronicLevel::new("e290", ElectronicState::S1, 290.0, 10.9, 1.0))
        .with_level(VibronicLevel::new("g670", ElectronicState::S0, 670.0, 4.0, fc));
    s.baseline_sideband_cross_section = baseline;
    s
}

proptest! {
    #[test]
    fn linewidth_lifetime_product(fwhm in 1e-4f64..1e4, other in 1e-4f64..1e4) {
        let tau = linewidth_to_lifetime(fwhm).unwrap();
        prop_assert!((fwhm * tau / 1e3 * std::f64::consts::TAU - 1.0).abs() < 4.0 * f64::EPSILON);
        let back = lifetime_to_linewidth(tau).unwrap();
        prop_assert!((back / fwhm - 1.0).abs() < 4.0 * f64::EPSILON);
        if other > fwhm {
            prop_assert!(linewidth_to_lifetime(other).unwrap() < tau);
        }
    }

    #[test]
    fn transition_width_dominates_parts(gamma in 0.0f64..50.0, t1 in 0.1f64..100.0, s1 in any::<bool>()) {
        let state = if s1 { ElectronicState::S1 } else { ElectronicState::S0 };
        let scheme = LevelScheme::new(402.57, t1).with_level(VibronicLevel::new("v", state, 300.0, gamma, 1.0));
        let w = transition_linewidth(&scheme, "v").unwrap();
        prop_assert!(w >= gamma.max(scheme.zpl_linewidth_ghz()));
        let first = validate_scheme(&scheme);
        prop_assert_eq!(&first, &validate_scheme(&scheme));
    }

    #[test]
    fn multi_mode_intensities_factorize(
        alphas in prop::collection::vec(0.05f64..1.2, 2..=3),
    ) {
        let modes: Vec<ModeDisplacement> = alphas
            .iter()
            .enumerate()
            .map(|(i, &a)| ModeDisplacement::new(i as i64 + 1, 250.0 + 173.0 * i as f64, a).unwrap())
            .collect();
        let sticks = relative_intensities(&modes, 3).unwrap();
        let origin = sticks.iter().find(|s| s.quanta.is_empty()).unwrap().intensity;
        let expected_count = if modes.len() == 2 { 10 } else { 20 };
        prop_assert_eq!(sticks.len(), expected_count);
        for stick in &sticks {
            let mut product = 1.0;
            for (mode, &n) in &stick.quanta {
                let s = modes[(*mode - 1) as usize].huang_rhys();
                product *= s.powi(n as i32) / (1..=n).product::<u32>() as f64;
            }
            prop_assert!((stick.intensity / origin / product - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn broadening_is_linear(a in 0.0f64..5.0, b in 0.0f64..5.0, c in 0.1f64..10.0) {
        let stick = |w: f64, i: f64| VibronicStick { wavenumber: w, intensity: i, quanta: BTreeMap::new() };
        let axis = linspace(250.0, 350.0, 201);
        let broad = Broadening::Uniform(10.0);
        let both = stick_to_spectrum(&[stick(290.0, c * a), stick(310.0, c * b)], &broad, &axis).unwrap();
        let first = stick_to_spectrum(&[stick(290.0, a)], &broad, &axis).unwrap();
        let second = stick_to_spectrum(&[stick(310.0, b)], &broad, &axis).unwrap();
        for i in 0..axis.len() {
            let sum = c * (first.values[i] + second.values[i]);
            prop_assert!((both.values[i] - sum).abs() <= 1e-12 * sum.abs().max(1e-300));
        }
    }

    #[test]
    fn steady_state_is_a_distribution(n in 2usize..7, seed_rates in prop::collection::vec(-3.0f64..3.0, 36)) {
        let mut rates = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    rates[(i, j)] = 1e9 * 10f64.powf(seed_rates[i * 6 + j]);
                }
            }
        }
        let labels = (0..n).map(|i| format!("s{i}")).collect();
        let pops = steady_state(&RateSystem::new(labels, rates).unwrap()).unwrap();
        prop_assert!((pops.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(pops.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn depletion_never_decreases_with_dump_power(
        detuning in -60.0f64..60.0,
        sd in 0.0f64..1e3,
        factor in 1.0f64..10.0,
        fc in 0.01f64..2.0,
        baseline in 0.0f64..0.2,
    ) {
        let scheme = sted_scheme(fc, baseline);
        let pump = LaserDrive::pump("e290", 1.0);
        let low = sted_values(&scheme, &pump, "g670", &[detuning], sd).unwrap()[0];
        let high = sted_values(&scheme, &pump, "g670", &[detuning], sd * factor).unwrap()[0];
        prop_assert!(high >= low, "D({}) = {high} < D({sd}) = {low}", sd * factor);
        prop_assert!((0.0..1.0).contains(&high));
    }

    #[test]
    fn matching_ignores_record_order(
        offsets in prop::collection::vec((-0.6f64..0.6, -0.6f64..0.6), 3..7),
        rotate in 0usize..7,
    ) {
        let records: Vec<MoleculeRecord> = offsets
            .iter()
            .enumerate()
            .map(|(i, &(a, b))| MoleculeRecord {
                molecule_id: format!("M{i}"),
                sample_id: "S".into(),
                s0_modes: vec![
                    ModeFit { wavenumber_cm1: 290.0 + a, gamma_ghz: 4.0, relative_omega2: 1.0 },
                    ModeFit { wavenumber_cm1: 670.0 + b, gamma_ghz: 4.0, relative_omega2: 0.5 },
                ],
                s1_modes: vec![],
                provenance: Provenance::default(),
            })
            .collect();
        let mut shuffled = records.clone();
        shuffled.rotate_left(rotate % records.len());
        shuffled.reverse();
        let report = |r: &[MoleculeRecord]| {
            let s0 = match_modes(r, ElectronicState::S0, 2.0).unwrap();
            let s1 = match_modes(r, ElectronicState::S1, 2.0).unwrap();
            mode_statistics(&s0, &s1, 10.0).unwrap()
        };
        prop_assert_eq!(
            serde_json::to_string(&report(&records)).unwrap(),
            serde_json::to_string(&report(&shuffled)).unwrap()
        );
    }
}

#[test]
fn fits_are_bitwise_reproducible() {
    let axis = linspace(-100.0, 100.0, 201);
    let peak = PeakGuess { center: 3.0, fwhm: 23.0, amplitude: 1.0 };
    let values = multi_lorentzian(&axis, 0.01, &[peak]);
    let clean = Spectrum::new(SpectrumKind::Fluorex, AxisUnit::DetuningGhz, ValueUnit::Population, axis, values).unwrap();
    let noisy = add_noise(&clean, 7, 1e4).unwrap();
    let run = || serde_json::to_string(&fit_lorentzian_multi(&noisy, 1, None, &FitOptions::default()).unwrap()).unwrap();
    assert_eq!(run(), run());
    assert_eq!(add_noise(&clean, 7, 1e4).unwrap(), noisy);
}
