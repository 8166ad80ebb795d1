use nalgebra::{DMatrix, DVector};

use super::RateError;
use crate::levels::{level_transition_linewidth, DriveRole, ElectronicState, LaserDrive, LevelScheme};
use crate::units::{ghz_to_angular_rate, GHZ_PER_WAVENUMBER};

/// Normalized Lorentzian profile with unit peak, 1/(1+(2δ/Γ)²).
pub fn lorentzian(detuning: f64, fwhm: f64) -> f64 {
    let x = 2.0 * detuning / fwhm;
    1.0 / (1.0 + x * x)
}

/// Populations indexed like [`RateSystem::labels`].
pub type Populations = Vec<f64>;

/// Incoherent transition rates between labelled states.
///
/// `rates[(i, j)]` is the rate in s⁻¹ for population flowing from state `i`
/// to state `j`. The diagonal is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct RateSystem {
    labels: Vec<String>,
    rates: DMatrix<f64>,
}

impl RateSystem {
    pub fn new(labels: Vec<String>, rates: DMatrix<f64>) -> Result<Self, RateError> {
        let n = labels.len();
        if n == 0 || rates.nrows() != n || rates.ncols() != n {
            return Err(RateError::Shape {
                states: n,
                rows: rates.nrows(),
                cols: rates.ncols(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let r = rates[(i, j)];
                if i != j && !(r >= 0.0 && r.is_finite()) {
                    return Err(RateError::InvalidRate {
                        from: labels[i].clone(),
                        to: labels[j].clone(),
                        rate: r,
                    });
                }
            }
        }
        let mut rates = rates;
        rates.fill_diagonal(0.0);
        Ok(RateSystem { labels, rates })
    }

    fn empty(labels: Vec<String>) -> Self {
        let n = labels.len();
        RateSystem {
            labels,
            rates: DMatrix::zeros(n, n),
        }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.rates[(from, to)]
    }

    pub fn rates(&self) -> &DMatrix<f64> {
        &self.rates
    }

    fn add(&mut self, from: usize, to: usize, rate: f64) {
        self.rates[(from, to)] += rate;
    }

    /// dn/dt = G·n with G[j,i] = rate(i→j) and G[i,i] = −Σⱼ rate(i→j).
    /// Columns of G sum to zero.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut g = self.rates.transpose();
        for i in 0..n {
            let out: f64 = self.rates.row(i).iter().sum();
            g[(i, i)] = -out;
        }
        g
    }

    /// Smallest strictly positive transition rate.
    pub fn min_rate(&self) -> Option<f64> {
        self.rates.iter().copied().filter(|&r| r > 0.0).reduce(f64::min)
    }

    pub fn max_rate(&self) -> Option<f64> {
        self.rates.iter().copied().filter(|&r| r > 0.0).reduce(f64::max)
    }
}

pub const GROUND: &str = "g";
pub const EXCITED: &str = "e";

/// Assembles the rate system for one molecule under a pump and an optional
/// depletion laser.
///
/// States: `g` = |S0,0⟩, `e` = |S1,0⟩, `p:<id>` for every S1 vibronic level
/// (only when the pump addresses the vibronic manifold) and `d:<id>` for every
/// S0 vibronic level (only when a depletion laser is present). Each drive
/// positions the laser relative to its target level; all levels of the
/// addressed manifold are driven with their own detunings and `relative_fc`
/// weights.
pub fn build_rate_matrix(
    scheme: &LevelScheme,
    pump: &LaserDrive,
    depletion: Option<&LaserDrive>,
) -> Result<RateSystem, RateError> {
    if pump.role != DriveRole::Pump {
        return Err(RateError::WrongRole(pump.target.clone()));
    }
    if !(scheme.t1_ns > 0.0) {
        return Err(RateError::InvalidScheme(format!("t1_ns must be > 0, got {}", scheme.t1_ns)));
    }
    check_saturation(pump)?;
    let gamma_e = scheme.excited_decay_rate();

    let vibronic_pump = !pump.targets_zpl();
    // laser offset from the respective vibrationless transition, GHz
    let pump_offset = if vibronic_pump {
        let target = scheme
            .level(&pump.target)
            .ok_or_else(|| RateError::UnknownLevel(pump.target.clone()))?;
        if target.state != ElectronicState::S1 {
            return Err(RateError::PumpTarget(pump.target.clone()));
        }
        target.wavenumber * GHZ_PER_WAVENUMBER + pump.detuning_ghz
    } else {
        pump.detuning_ghz
    };

    let depletion_offset = match depletion {
        Some(d) => {
            if d.role != DriveRole::Depletion {
                return Err(RateError::WrongRole(d.target.clone()));
            }
            check_saturation(d)?;
            let target = scheme
                .level(&d.target)
                .ok_or_else(|| RateError::UnknownLevel(d.target.clone()))?;
            if target.state != ElectronicState::S0 {
                return Err(RateError::DepletionTarget(d.target.clone()));
            }
            Some((d, target.wavenumber * GHZ_PER_WAVENUMBER + d.detuning_ghz))
        }
        None => None,
    };

    let mut labels = vec![GROUND.to_string(), EXCITED.to_string()];
    if vibronic_pump {
        labels.extend(scheme.s1_levels.iter().map(|l| format!("p:{}", l.id)));
    }
    if depletion_offset.is_some() {
        labels.extend(scheme.s0_levels.iter().map(|l| format!("d:{}", l.id)));
    }
    let mut sys = RateSystem::empty(labels);
    let (g, e) = (0usize, 1usize);

    sys.add(e, g, gamma_e);

    if vibronic_pump {
        for (j, level) in scheme.s1_levels.iter().enumerate() {
            let p = 2 + j;
            let width = level_transition_linewidth(scheme, level)?;
            let detuning = pump_offset - level.wavenumber * GHZ_PER_WAVENUMBER;
            let w = pump.saturation * level.relative_fc * gamma_e * lorentzian(detuning, width);
            sys.add(g, p, w);
            sys.add(p, g, w);
            sys.add(p, e, ghz_to_angular_rate(level.gamma_over_2pi));
        }
    } else {
        let w = pump.saturation * gamma_e * lorentzian(pump_offset, scheme.zpl_linewidth_ghz());
        sys.add(g, e, w);
        sys.add(e, g, w);
    }

    if let Some((drive, offset)) = depletion_offset {
        let first = sys.len() - scheme.s0_levels.len();
        for (k, level) in scheme.s0_levels.iter().enumerate() {
            let d = first + k;
            let width = level_transition_linewidth(scheme, level)?;
            let detuning = offset - level.wavenumber * GHZ_PER_WAVENUMBER;
            let w = drive.saturation * level.relative_fc * gamma_e * lorentzian(detuning, width);
            sys.add(e, d, w);
            sys.add(d, e, w);
            sys.add(d, g, ghz_to_angular_rate(level.gamma_over_2pi));
        }
        let baseline = drive.saturation * gamma_e * scheme.baseline_sideband_cross_section;
        if !(baseline >= 0.0 && baseline.is_finite()) {
            return Err(RateError::InvalidScheme(format!(
                "baseline_sideband_cross_section must be >= 0, got {}",
                scheme.baseline_sideband_cross_section
            )));
        }
        sys.add(e, g, baseline);
    }

    Ok(sys)
}

fn check_saturation(drive: &LaserDrive) -> Result<(), RateError> {
    if drive.saturation >= 0.0 && drive.saturation.is_finite() {
        Ok(())
    } else {
        Err(RateError::InvalidSaturation(drive.saturation))
    }
}

const SINGULAR_PIVOT: f64 = 1e-12;

/// Stationary populations: the normalized null vector of the generator.
pub fn steady_state(system: &RateSystem) -> Result<Populations, RateError> {
    let n = system.len();
    let mut a = system.generator();
    let mut b = DVector::zeros(n);
    // Replace one balance equation by normalization.
    a.row_mut(n - 1).fill(1.0);
    b[n - 1] = 1.0;
    // Equilibrate rows; rates routinely span several decades.
    for i in 0..n {
        let scale = a.row(i).amax();
        if scale == 0.0 {
            return Err(RateError::Singular);
        }
        a.row_mut(i).scale_mut(1.0 / scale);
        b[i] /= scale;
    }
    let lu = a.full_piv_lu();
    let u = lu.u();
    let diag_max = u.diagonal().amax();
    let diag_min = u.diagonal().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if !(diag_min > SINGULAR_PIVOT * diag_max) {
        return Err(RateError::Singular);
    }
    let x = lu.solve(&b).ok_or(RateError::Singular)?;
    let mut pops: Vec<f64> = x.iter().map(|&v| if v < 0.0 && v > -1e-14 { 0.0 } else { v }).collect();
    if pops.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(RateError::Singular);
    }
    let total: f64 = pops.iter().sum();
    pops.iter_mut().for_each(|v| *v /= total);
    Ok(pops)
}

/// Excited-state (|S1,0⟩) population at steady state.
pub fn excited_population(system: &RateSystem) -> Result<f64, RateError> {
    let pops = steady_state(system)?;
    Ok(pops[system.index_of(EXCITED).ok_or(RateError::Singular)?])
}
