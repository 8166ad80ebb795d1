//! Explicit Dormand–Prince 5(4) integration of dn/dt = G·n.
//!
//! Used as an independent check of [`super::steady_state`]. Every stage of an
//! explicit Runge–Kutta step is a combination of G·n terms whose entries sum
//! to zero, so total population is conserved up to rounding.

use nalgebra::{DMatrix, DVector};

use super::{Populations, RateError, RateSystem};

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Smallest step allowed, relative to the total time.
    pub min_step_fraction: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            rtol: 1e-12,
            atol: 1e-14,
            max_steps: 20_000_000,
            min_step_fraction: 1e-18,
        }
    }
}

/// Integration trace statistics.
#[derive(Debug, Clone, Default)]
pub struct EvolveStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest |Σn − 1| observed over accepted steps.
    pub max_population_drift: f64,
}

pub fn time_evolve(system: &RateSystem, initial: &[f64], t: f64) -> Result<Populations, RateError> {
    time_evolve_with(system, initial, t, &EvolveOptions::default()).map(|(n, _)| n)
}

// Dormand–Prince tableau (G is time independent, so the c nodes are not needed)
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b* (error weights)
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

pub fn time_evolve_with(
    system: &RateSystem,
    initial: &[f64],
    t: f64,
    opts: &EvolveOptions,
) -> Result<(Populations, EvolveStats), RateError> {
    let n = system.len();
    if initial.len() != n || initial.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(RateError::InvalidInitial(format!(
            "expected {n} non-negative populations, got {initial:?}"
        )));
    }
    let total: f64 = initial.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(RateError::InvalidInitial(format!("populations sum to {total}, not 1")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(RateError::InvalidInitial(format!("time {t} must be finite and >= 0")));
    }
    let mut stats = EvolveStats::default();
    let mut y = DVector::from_column_slice(initial);
    if t == 0.0 {
        return Ok((initial.to_vec(), stats));
    }
    let g: DMatrix<f64> = system.generator();
    let stiffness = g.diagonal().amax();
    if stiffness == 0.0 {
        return Ok((initial.to_vec(), stats));
    }

    let h_min = t * opts.min_step_fraction;
    let mut h = (0.01 / stiffness).min(t);
    let mut time = 0.0;
    let mut k1 = &g * &y;

    while time < t {
        if stats.accepted + stats.rejected >= opts.max_steps {
            return Err(RateError::StepLimit { time, steps: opts.max_steps });
        }
        let last = time + h >= t;
        if last {
            h = t - time;
        }
        let k2 = &g * (&y + &k1 * (h * A21));
        let k3 = &g * (&y + (&k1 * A31 + &k2 * A32) * h);
        let k4 = &g * (&y + (&k1 * A41 + &k2 * A42 + &k3 * A43) * h);
        let k5 = &g * (&y + (&k1 * A51 + &k2 * A52 + &k3 * A53 + &k4 * A54) * h);
        let k6 = &g * (&y + (&k1 * A61 + &k2 * A62 + &k3 * A63 + &k4 * A64 + &k5 * A65) * h);
        let y_new = &y + (&k1 * B1 + &k3 * B3 + &k4 * B4 + &k5 * B5 + &k6 * B6) * h;
        let k7 = &g * &y_new;
        let err = (&k1 * E1 + &k3 * E3 + &k4 * E4 + &k5 * E5 + &k6 * E6 + &k7 * E7) * h;

        let mut norm = 0.0f64;
        for i in 0..n {
            let scale = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            norm = norm.max(err[i].abs() / scale);
        }

        if norm <= 1.0 {
            time = if last { t } else { time + h };
            y = y_new;
            k1 = k7;
            stats.accepted += 1;
            let drift = (y.sum() - 1.0).abs();
            stats.max_population_drift = stats.max_population_drift.max(drift);
        } else {
            stats.rejected += 1;
        }

        let factor = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
        if h < h_min && time < t {
            return Err(RateError::StepUnderflow { time, step: h });
        }
    }
    let pops = y.iter().map(|&v| if v < 0.0 && v > -1e-14 { 0.0 } else { v }).collect();
    Ok((pops, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level(k: f64) -> RateSystem {
        let rates = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, k, 0.0]);
        RateSystem::new(vec!["g".into(), "e".into()], rates).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let sys = two_level(3.0);
        assert_eq!(time_evolve(&sys, &[0.25, 0.75], 0.0).unwrap(), vec![0.25, 0.75]);
    }

    #[test]
    fn exponential_decay() {
        let k = 2.5;
        let sys = two_level(k);
        for &t in &[0.1, 0.5, 1.0, 3.0] {
            let n = time_evolve(&sys, &[0.0, 1.0], t).unwrap();
            let exact = (-k * t).exp();
            assert!((n[1] - exact).abs() < 1e-8, "t={t}: {} vs {exact}", n[1]);
            assert!((n[0] + n[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_unnormalized_initial() {
        let sys = two_level(1.0);
        assert!(time_evolve(&sys, &[0.5, 0.6], 1.0).is_err());
        assert!(time_evolve(&sys, &[1.0], 1.0).is_err());
    }

    #[test]
    fn step_limit_reported() {
        let sys = two_level(1e3);
        let opts = EvolveOptions { max_steps: 3, ..Default::default() };
        assert!(matches!(
            time_evolve_with(&sys, &[0.0, 1.0], 10.0, &opts),
            Err(RateError::StepLimit { .. })
        ));
        let opts = EvolveOptions { min_step_fraction: 0.5, ..Default::default() };
        assert!(matches!(
            time_evolve_with(&sys, &[0.0, 1.0], 10.0, &opts),
            Err(RateError::StepUnderflow { .. })
        ));
    }
}
