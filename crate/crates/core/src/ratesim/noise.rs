use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::RateError;
use crate::spectrum::{Spectrum, ValueUnit};

/// Replaces every value by a Poisson count with mean `value · dwell_scale`.
///
/// The draw sequence depends only on `seed`, so equal seeds give equal spectra.
pub fn add_noise(spectrum: &Spectrum, seed: u64, dwell_scale: f64) -> Result<Spectrum, RateError> {
    if !(dwell_scale > 0.0 && dwell_scale.is_finite()) {
        return Err(RateError::InvalidDwell(dwell_scale));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(spectrum.values.len());
    for &v in &spectrum.values {
        let mean = v * dwell_scale;
        if !(mean >= 0.0 && mean.is_finite()) {
            return Err(RateError::InvalidDwell(mean));
        }
        let count = if mean == 0.0 {
            0.0
        } else {
            Poisson::new(mean).map_err(|_| RateError::InvalidDwell(mean))?.sample(&mut rng)
        };
        values.push(count);
    }
    let mut out = spectrum.clone();
    out.values = values;
    out.value_unit = ValueUnit::Counts;
    Ok(out
        .with_meta("seed", seed)
        .with_meta("dwell_scale", dwell_scale)
        .with_meta("noise_of", spectrum.value_unit))
}
