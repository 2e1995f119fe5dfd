use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ImageGray;
use crate::error::{usage, Result};
use crate::random::normal_vec;

/// Adds `N(0, σ²)` noise pixelwise from a seeded ChaCha stream, then clamps
/// to `[0, 1]`.
pub fn add_gaussian_noise(img: &ImageGray, sigma: f64, seed: u64) -> Result<ImageGray> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return usage(format!("noise sigma must be non-negative, got {sigma}"));
    }
    if sigma == 0.0 {
        return Ok(img.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = normal_vec(&mut rng, img.len());
    let pixels = img.pixels().iter().zip(noise).map(|(p, e)| p + sigma * e).collect();
    Ok(ImageGray::clamped(img.side(), pixels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_is_identity() {
        let img = ImageGray::constant(4, 0.3).unwrap();
        assert_eq!(add_gaussian_noise(&img, 0.0, 9).unwrap(), img);
        assert!(add_gaussian_noise(&img, -0.1, 9).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let img = ImageGray::constant(16, 0.5).unwrap();
        let a = add_gaussian_noise(&img, 0.05, 1).unwrap();
        assert_eq!(a, add_gaussian_noise(&img, 0.05, 1).unwrap());
        assert_ne!(a, add_gaussian_noise(&img, 0.05, 2).unwrap());
    }

    #[test]
    fn empirical_std_matches_sigma() {
        // mid-gray keeps clamping out of play at σ = 0.05
        let img = ImageGray::constant(64, 0.5).unwrap();
        let noisy = add_gaussian_noise(&img, 0.05, 17).unwrap();
        let diffs: Vec<f64> = noisy.pixels().iter().map(|p| p - 0.5).collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let std = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 0.05).abs() <= 0.05 * 0.05, "std {std}");
    }
}
