//! Poisson noise injection for sinograms.
//!
//! The clean sinogram is turned into expected counts with a scale `c` chosen
//! so that a sample equal to the reference mean `m` gets standard deviation
//! `sigma_fraction * m` after rescaling: `c = 1 / (sigma_fraction^2 * m)`.

use rand_distr::{Distribution, Poisson};

use crate::{Error, Result, SeededRng, Sinogram};

/// Expected counts per unit of line integral at the given noise level.
pub fn counts_per_unit(sigma_fraction: f64, reference_mean: f64) -> f64 {
    1.0 / (sigma_fraction * sigma_fraction * reference_mean)
}

/// Noisy copy of `s` with the standard deviation pinned at `sigma_fraction`
/// of the (negatives-clamped) mean of `s` itself.
pub fn add_poisson_noise(s: &Sinogram, sigma_fraction: f64, rng: &mut SeededRng) -> Result<Sinogram> {
    let mean = s.data().iter().map(|v| v.max(0.0)).sum::<f64>() / s.data().len() as f64;
    add_poisson_noise_at(s, sigma_fraction, mean, rng)
}

/// As [`add_poisson_noise`], with the mean that sets the noise level given
/// explicitly (e.g. the mean of a well-sampled reference sinogram).
pub fn add_poisson_noise_at(
    s: &Sinogram,
    sigma_fraction: f64,
    reference_mean: f64,
    rng: &mut SeededRng,
) -> Result<Sinogram> {
    if !(sigma_fraction > 0.0) || !sigma_fraction.is_finite() {
        return Err(Error::InvalidParameter(format!("sigma fraction must be positive (got {sigma_fraction})")));
    }
    if !(reference_mean > 0.0) {
        return Err(Error::InvalidParameter(format!("noise reference mean must be positive (got {reference_mean})")));
    }
    let counts_per_unit = counts_per_unit(sigma_fraction, reference_mean);
    let mut out = s.clone();
    for v in out.data_mut() {
        let lambda = v.max(0.0) * counts_per_unit;
        *v = if lambda > 0.0 {
            let draw: f64 = Poisson::new(lambda)
                .map_err(|e| Error::InvalidParameter(format!("poisson rate {lambda}: {e}")))?
                .sample(rng.inner_mut());
            draw / counts_per_unit
        } else {
            0.0
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Geometry;

    fn stats(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    #[test]
    fn std_matches_target_at_the_mean() {
        let g = Geometry::new(100, 1000).unwrap();
        let m = 37.5;
        let s = Sinogram::filled(&g, m);
        let noisy = add_poisson_noise(&s, 0.03, &mut SeededRng::new(1)).unwrap();
        let (mean, std) = stats(noisy.data());
        assert!(((std - 0.03 * m) / (0.03 * m)).abs() < 0.02, "std {std}");
        assert!(((mean - m) / m).abs() < 1e-3);
    }

    #[test]
    fn mean_preserved_per_sample() {
        let g = Geometry::new(1, 4).unwrap();
        let s = Sinogram::from_vec(&g, vec![0.5, 2.0, 10.0, -3.0]).unwrap();
        let mut rng = SeededRng::new(2);
        let mut acc = [0.0; 4];
        let draws = 10_000;
        for _ in 0..draws {
            let n = add_poisson_noise_at(&s, 0.05, 4.0, &mut rng).unwrap();
            for (a, v) in acc.iter_mut().zip(n.data()) {
                *a += v / draws as f64;
            }
        }
        for (a, want) in acc.iter().zip([0.5, 2.0, 10.0, 0.0]) {
            if want == 0.0 {
                assert_eq!(*a, 0.0);
            } else {
                assert!(((a - want) / want).abs() < 0.01, "{a} vs {want}");
            }
        }
    }

    #[test]
    fn vanishing_sigma_recovers_input() {
        let g = Geometry::new(3, 5).unwrap();
        let s = Sinogram::from_vec(&g, (0..15).map(|i| 1.0 + i as f64).collect()).unwrap();
        let n = add_poisson_noise(&s, 1e-6, &mut SeededRng::new(3)).unwrap();
        for (a, b) in n.data().iter().zip(s.data()) {
            assert!((a - b).abs() / b < 1e-4);
        }
    }

    #[test]
    fn deterministic_and_decorrelated() {
        let g = Geometry::new(100, 100).unwrap();
        let s = Sinogram::filled(&g, 20.0);
        let a = add_poisson_noise(&s, 0.03, &mut SeededRng::new(7)).unwrap();
        let b = add_poisson_noise(&s, 0.03, &mut SeededRng::new(7)).unwrap();
        let c = add_poisson_noise(&s, 0.03, &mut SeededRng::new(8)).unwrap();
        assert_eq!(a, b);
        let (ma, sa) = stats(a.data());
        let (mc, sc) = stats(c.data());
        let cov = a.data().iter().zip(c.data()).map(|(x, y)| (x - ma) * (y - mc)).sum::<f64>() / 9999.0;
        assert!((cov / (sa * sc)).abs() < 0.05);
    }

    #[test]
    fn rejects_bad_sigma() {
        let g = Geometry::new(1, 1).unwrap();
        let s = Sinogram::filled(&g, 1.0);
        assert!(add_poisson_noise(&s, 0.0, &mut SeededRng::new(0)).is_err());
        assert!(add_poisson_noise(&s, -1.0, &mut SeededRng::new(0)).is_err());
    }
}
