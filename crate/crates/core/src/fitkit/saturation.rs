use super::{levenberg_marquardt, FitError, FitOptions, FitProblem, FitResult, ModelKind, Parameter};

/// R∞·(P/P_sat)/(1 + P/P_sat).
pub fn saturation_law(power: f64, r_inf: f64, p_sat: f64) -> f64 {
    let s = power / p_sat;
    r_inf * s / (1.0 + s)
}

/// Fits `r_inf` and `p_sat` to (power, rate) pairs.
///
/// The start values come from the straight line 1/R = 1/R∞ + (P_sat/R∞)·1/P,
/// which is already exact for noiseless data.
pub fn fit_saturation(powers: &[f64], rates: &[f64], opts: &FitOptions) -> Result<FitResult, FitError> {
    if powers.len() != rates.len() {
        return Err(FitError::Setup(format!("{} powers but {} rates", powers.len(), rates.len())));
    }
    if powers.len() < 3 {
        return Err(FitError::InsufficientData {
            points: powers.len(),
            params: 2,
        });
    }
    if let Some(p) = powers.iter().chain(rates).find(|v| !v.is_finite()) {
        return Err(FitError::DegenerateData(format!("non-finite value {p}")));
    }
    if powers.iter().all(|&p| p == powers[0]) {
        return Err(FitError::DegenerateData("all powers are equal".into()));
    }

    let (r_inf, p_sat) = linearized_guess(powers, rates).unwrap_or_else(|| {
        let top = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(f64::MIN_POSITIVE);
        let mut sorted = powers.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted[sorted.len() / 2];
        (1.1 * top, if mid > 0.0 { mid } else { sorted[sorted.len() - 1] })
    });

    let problem = FitProblem::new(
        ModelKind::Saturation,
        vec![Parameter::new("r_inf", r_inf).lower(0.0), Parameter::new("p_sat", p_sat).lower(0.0)],
        rates.to_vec(),
    );
    levenberg_marquardt(
        &problem,
        |x, out| {
            for (o, &p) in out.iter_mut().zip(powers) {
                *o = saturation_law(p, x[0], x[1]);
            }
            Ok(())
        },
        opts,
    )
}

fn linearized_guess(powers: &[f64], rates: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = powers
        .iter()
        .zip(rates)
        .filter(|(p, r)| **p > 0.0 && **r > 0.0)
        .map(|(p, r)| (1.0 / p, 1.0 / r))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    (intercept > 0.0 && slope > 0.0).then(|| (1.0 / intercept, slope / intercept))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::logspace;

    fn exact(p_sat: f64, r_inf: f64) -> (Vec<f64>, Vec<f64>) {
        let powers = logspace(0.01 * p_sat, 100.0 * p_sat, 40);
        let rates = powers.iter().map(|&p| saturation_law(p, r_inf, p_sat)).collect();
        (powers, rates)
    }

    #[test]
    fn recovers_both_saturation_powers() {
        let (p, r) = exact(1.4, 5.0e4);
        let nw = fit_saturation(&p, &r, &FitOptions::default()).unwrap();
        assert!((nw.value("p_sat").unwrap() / 1.4 - 1.0).abs() < 1e-8);
        let (p, r) = exact(18.6e3, 5.0e4);
        let uw = fit_saturation(&p, &r, &FitOptions::default()).unwrap();
        assert!((uw.value("p_sat").unwrap() / 18.6e3 - 1.0).abs() < 1e-8);
        assert!((uw.value("r_inf").unwrap() / 5.0e4 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rough_start_still_converges() {
        // one perturbed point makes the linear guess inexact
        let powers = [0.5, 1.0, 2.0, 4.0, 8.0, 30.0];
        let rates: Vec<f64> = powers.iter().map(|&p| saturation_law(p, 2.0, 3.0) + if p == 2.0 { 1e-3 } else { 0.0 }).collect();
        let fit = fit_saturation(&powers, &rates, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.value("p_sat").unwrap() - 3.0).abs() < 0.05);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(
            fit_saturation(&[1.0, 1.0, 1.0], &[0.2, 0.3, 0.4], &FitOptions::default()),
            Err(FitError::DegenerateData(_))
        ));
        assert!(matches!(
            fit_saturation(&[1.0, 2.0], &[0.2, 0.3], &FitOptions::default()),
            Err(FitError::InsufficientData { .. })
        ));
    }
}
