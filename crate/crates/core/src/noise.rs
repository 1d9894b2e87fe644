//! Poisson transmission noise for simulated sinograms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{invalid, Result};
use crate::sinogram::Sinogram;

/// Replaces each line integral p with −log(max(k, 1) / I0) where
/// k ~ Poisson(I0 · e^{−p}), and attaches the normalized transmission counts
/// k / I0 as statistical weights. `i0 = None` is the noiseless passthrough.
/// Deterministic for a given seed.
pub fn add_poisson_noise(sino: &Sinogram, i0: Option<f64>, seed: u64) -> Result<Sinogram> {
    let Some(i0) = i0 else {
        return Ok(sino.clone());
    };
    if !(i0 > 0.0) || !i0.is_finite() {
        return Err(invalid("photon flux I0 must be positive and finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(sino.n_rays());
    let mut weights = Vec::with_capacity(sino.n_rays());
    for &p in sino.data() {
        if !p.is_finite() {
            return Err(invalid("sinogram contains non-finite line integrals"));
        }
        let mean = i0 * (-p).exp();
        let counts = if mean > 1e12 {
            // Gaussian regime; Poisson sampling overflows long before this.
            (mean + mean.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)).max(1.0)
        } else {
            let k = Poisson::new(mean.max(1e-12))
                .map_err(|e| invalid(format!("poisson parameter: {e}")))?
                .sample(&mut rng);
            k.max(1.0)
        };
        data.push(-(counts / i0).ln());
        weights.push(counts / i0);
    }
    Sinogram::new(sino.geometry.clone(), sino.n_slices(), data)?.with_weights(weights)
}
