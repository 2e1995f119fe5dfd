//! Grayscale images, the discrete gradient, noise, PGM files and the
//! TV denoising problem.

mod denoise;
mod gradient;
mod noise;
mod pgm;
mod phantom;

pub use denoise::{
    build_denoise_problem, denoise, denoise_fixed, denoise_operators, DenoiseAlgorithm, DenoiseOutcome, DenoiseParams,
};
pub use gradient::DiscreteGradient;
pub use noise::add_gaussian_noise;
pub use pgm::{decode_pgm, encode_pgm, load_pgm, save_pgm, PgmFormat};
pub use phantom::shepp_logan;

use crate::error::{check_dim, usage, Result};
use crate::hvector::HVector;

/// Square grayscale image with row-major pixels in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageGray {
    side: usize,
    pixels: Vec<f64>,
}

impl ImageGray {
    /// Rejects non-finite values; clamps the rest to `[0, 1]`.
    pub fn new(side: usize, pixels: Vec<f64>) -> Result<Self> {
        if side == 0 {
            return usage("image side must be positive");
        }
        check_dim(side * side, pixels.len())?;
        if pixels.iter().any(|p| !p.is_finite()) {
            return usage("pixel values must be finite");
        }
        Ok(Self::clamped(side, pixels))
    }

    pub(crate) fn clamped(side: usize, mut pixels: Vec<f64>) -> Self {
        pixels.iter_mut().for_each(|p| *p = p.clamp(0.0, 1.0));
        Self { side, pixels }
    }

    pub fn constant(side: usize, value: f64) -> Result<Self> {
        Self::new(side, vec![value; side * side])
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.side + col]
    }

    pub fn to_hvector(&self) -> HVector {
        HVector::raw(self.pixels.clone())
    }

    /// Image from a primal iterate; values outside `[0, 1]` are clamped.
    pub fn from_hvector(side: usize, u: &HVector) -> Result<Self> {
        check_dim(side * side, u.dim())?;
        Ok(Self::clamped(side, u.as_slice().to_vec()))
    }
}
