use super::ProjectionImage;
use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Detector noise: photon counts `Poisson(i0·exp(-g)) + N(0, sigma²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub i0: f64,
    pub sigma: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams { i0: 1e5, sigma: 10.0 }
    }
}

/// Replaces each line integral `g` by `ln(i0 / n)` with `n` the noisy count
/// clamped to at least one photon. Pixel `p` draws from its own ChaCha stream
/// `(seed, p)`, so the result is independent of thread scheduling.
pub fn apply_noise(image: &ProjectionImage, params: &NoiseParams, seed: u64) -> Result<ProjectionImage> {
    if !(params.i0 >= 1.0 && params.i0.is_finite()) {
        return Err(Error::InvalidInput(format!("photon count must be >= 1, got {}", params.i0)));
    }
    if !(params.sigma >= 0.0 && params.sigma.is_finite()) {
        return Err(Error::InvalidInput(format!("electronic noise must be >= 0, got {}", params.sigma)));
    }
    let gauss = Normal::new(0.0, params.sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let data = image
        .data
        .par_iter()
        .enumerate()
        .map(|(p, &g)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(p as u64);
            let lambda = params.i0 * (-g).exp();
            let counts = if lambda > 0.0 {
                Poisson::new(lambda).map(|d| d.sample(&mut rng)).unwrap_or(lambda)
            } else {
                0.0
            };
            let n = (counts + gauss.sample(&mut rng)).max(1.0);
            (params.i0 / n).ln()
        })
        .collect();
    ProjectionImage::new(image.width, image.height, data, image.geometry.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::Geometry;

    fn flat(g: f64, n: usize) -> ProjectionImage {
        ProjectionImage::new(n, 1, vec![g; n], Geometry::default()).unwrap()
    }

    #[test]
    fn deterministic_per_seed() {
        let img = flat(1.0, 500);
        let p = NoiseParams::default();
        assert_eq!(apply_noise(&img, &p, 3).unwrap(), apply_noise(&img, &p, 3).unwrap());
        assert_ne!(apply_noise(&img, &p, 3).unwrap().data, apply_noise(&img, &p, 4).unwrap().data);
    }

    #[test]
    fn noiseless_limit_recovers_input() {
        let img = ProjectionImage::new(4, 1, vec![0.0, 0.5, 2.0, 5.0], Geometry::default()).unwrap();
        let p = NoiseParams { i0: 1e12, sigma: 0.0 };
        let out = apply_noise(&img, &p, 1).unwrap();
        for (a, b) in out.data.iter().zip(&img.data) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn empirical_spread_matches_counting_statistics() {
        // Var[ln(i0/N)] ≈ (λ + σ²) / λ² for large λ.
        let g = 1.0;
        let p = NoiseParams::default();
        let n = 20000;
        let out = apply_noise(&flat(g, n), &p, 11).unwrap();
        let mean = out.data.iter().sum::<f64>() / n as f64;
        let var = out.data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let lambda = p.i0 * (-g).exp();
        let want = (lambda + p.sigma * p.sigma) / (lambda * lambda);
        assert!((mean - g).abs() < 1e-3, "{mean}");
        assert!((var / want - 1.0).abs() < 0.05, "{var} vs {want}");
    }

    #[test]
    fn opaque_pixels_saturate_at_one_photon() {
        let out = apply_noise(&flat(200.0, 10), &NoiseParams { i0: 1e5, sigma: 0.0 }, 0).unwrap();
        assert!(out.data.iter().all(|&v| (v - 1e5f64.ln()).abs() < 1e-12));
    }

    #[test]
    fn invalid_parameters() {
        let img = flat(1.0, 2);
        assert!(apply_noise(&img, &NoiseParams { i0: 0.0, sigma: 1.0 }, 0).is_err());
        assert!(apply_noise(&img, &NoiseParams { i0: 10.0, sigma: -1.0 }, 0).is_err());
    }
}
