use super::ImageGray;
use crate::error::Result;

/// (intensity, a, b, x0, y0, φ in degrees); the modified head phantom with
/// intensities summing into `[0, 1]`.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Shepp–Logan phantom sampled at pixel centers on `[−1, 1]²`.
pub fn shepp_logan(side: usize) -> Result<ImageGray> {
    let mut pixels = vec![0.0; side * side];
    for (row, chunk) in pixels.chunks_mut(side.max(1)).enumerate() {
        // row 0 is the top of the image
        let y = 1.0 - (2.0 * row as f64 + 1.0) / side as f64;
        for (col, p) in chunk.iter_mut().enumerate() {
            let x = (2.0 * col as f64 + 1.0) / side as f64 - 1.0;
            for &(val, a, b, x0, y0, phi) in &ELLIPSES {
                let (s, c) = phi.to_radians().sin_cos();
                let dx = x - x0;
                let dy = y - y0;
                let xr = dx * c + dy * s;
                let yr = -dx * s + dy * c;
                if (xr / a).powi(2) + (yr / b).powi(2) <= 1.0 {
                    *p += val;
                }
            }
        }
    }
    ImageGray::new(side, pixels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phantom_structure() {
        let img = shepp_logan(96).unwrap();
        assert_eq!(img.side(), 96);
        assert_eq!(img.get(0, 0), 0.0);
        // skull rim is bright, brain tissue is dim but non-zero
        let max = img.pixels().iter().cloned().fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
        assert!((img.get(48, 48) - 0.2).abs() < 0.11);
        assert_eq!(shepp_logan(96).unwrap(), img);
        assert!(shepp_logan(0).is_err());
    }
}
