use crate::error::{check_dim, usage, Result};
use crate::linear::LinearMap;

/// Forward-difference gradient `D = (I ⊗ D₁; D₁ ⊗ I)` on `M × M` images,
/// with `D₁` the forward difference whose last row is zero.
///
/// The first `M²` outputs are horizontal differences (zero in the last
/// column), the last `M²` vertical differences (zero in the last row).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscreteGradient {
    side: usize,
}

impl DiscreteGradient {
    pub fn new(side: usize) -> Result<Self> {
        if side == 0 {
            return usage("image side must be positive");
        }
        Ok(Self { side })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn pixels(&self) -> usize {
        self.side * self.side
    }

    /// `(Id + DᵀD)⁻¹ rhs` by matrix-free conjugate gradients.
    pub fn solve_identity_plus_dtd(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.pixels(), rhs.len())?;
        self.solve_identity_plus_gram(rhs)
    }
}

impl LinearMap for DiscreteGradient {
    fn dim_in(&self) -> usize {
        self.pixels()
    }

    fn dim_out(&self) -> usize {
        2 * self.pixels()
    }

    fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let n = self.side;
        let m = n * n;
        let (h, v) = out.split_at_mut(m);
        for i in 0..n {
            let row = &u[i * n..(i + 1) * n];
            let hrow = &mut h[i * n..(i + 1) * n];
            for j in 0..n - 1 {
                hrow[j] = row[j + 1] - row[j];
            }
            hrow[n - 1] = 0.0;
        }
        for i in 0..n - 1 {
            for j in 0..n {
                v[i * n + j] = u[(i + 1) * n + j] - u[i * n + j];
            }
        }
        v[(n - 1) * n..].iter_mut().for_each(|x| *x = 0.0);
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.side;
        let m = n * n;
        let (h, v) = y.split_at(m);
        out.iter_mut().for_each(|x| *x = 0.0);
        for i in 0..n {
            for j in 0..n - 1 {
                let t = h[i * n + j];
                out[i * n + j] -= t;
                out[i * n + j + 1] += t;
            }
        }
        for i in 0..n - 1 {
            for j in 0..n {
                let t = v[i * n + j];
                out[i * n + j] -= t;
                out[(i + 1) * n + j] += t;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{operator_norm, DenseMatrix};
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// `D` assembled from explicit Kronecker products.
    fn dense_gradient(n: usize) -> DMatrix<f64> {
        let mut d1 = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            d1[(i, i)] = -1.0;
            d1[(i, i + 1)] = 1.0;
        }
        let id = DMatrix::<f64>::identity(n, n);
        let top = id.kronecker(&d1);
        let bottom = d1.kronecker(&id);
        let mut d = DMatrix::zeros(2 * n * n, n * n);
        d.rows_mut(0, n * n).copy_from(&top);
        d.rows_mut(n * n, n * n).copy_from(&bottom);
        d
    }

    fn random(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn two_by_two_example() {
        let d = DiscreteGradient::new(2).unwrap();
        let (a, b, c, e) = (0.1, 0.7, 0.4, 0.2);
        let out = d.apply(&[a, b, c, e]);
        assert_eq!(out, vec![b - a, 0.0, e - c, 0.0, c - a, e - b, 0.0, 0.0]);
        assert_eq!(d.apply(&[0.3; 4]), vec![0.0; 8]);
        assert_eq!(d.adjoint(&[0.0; 8]), vec![0.0; 4]);
    }

    #[test]
    fn matches_dense_kronecker_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=4 {
            let d = DiscreteGradient::new(n).unwrap();
            let dense = DenseMatrix::from_nalgebra(&dense_gradient(n));
            let u = random(&mut rng, n * n);
            let y = random(&mut rng, 2 * n * n);
            for (a, b) in d.apply(&u).iter().zip(dense.apply(&u)) {
                assert!((a - b).abs() < 1e-12);
            }
            for (a, b) in d.adjoint(&y).iter().zip(dense.adjoint(&y)) {
                assert!((a - b).abs() < 1e-12);
            }
            let dm = dense_gradient(n);
            let a = DMatrix::identity(n * n, n * n) + dm.transpose() * &dm;
            let exact = a.lu().solve(&DVector::from_column_slice(&u)).unwrap();
            let x = d.solve_identity_plus_dtd(&u).unwrap();
            for (a, b) in x.iter().zip(exact.iter()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = DiscreteGradient::new(13).unwrap();
        let u = random(&mut rng, 169);
        let y = random(&mut rng, 338);
        let lhs: f64 = d.apply(&u).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(d.adjoint(&y)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn single_pixel_solve_is_identity() {
        let d = DiscreteGradient::new(1).unwrap();
        assert_eq!(d.solve_identity_plus_dtd(&[0.42]).unwrap(), vec![0.42]);
    }

    #[test]
    fn solve_residual_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [8, 16, 32] {
            let d = DiscreteGradient::new(n).unwrap();
            let rhs = random(&mut rng, n * n);
            let x = d.solve_identity_plus_dtd(&rhs).unwrap();
            let dtdx = d.adjoint(&d.apply(&x));
            let res: f64 = x
                .iter()
                .zip(&dtdx)
                .zip(&rhs)
                .map(|((a, b), r)| (a + b - r).powi(2))
                .sum::<f64>()
                .sqrt();
            let nr: f64 = rhs.iter().map(|r| r * r).sum::<f64>().sqrt();
            assert!(res <= 1e-10 * (1.0 + nr), "M={n}: residual {res}");
        }
    }

    #[test]
    fn norm_within_standard_bound() {
        for n in [8, 16, 32, 64] {
            let d = DiscreteGradient::new(n).unwrap();
            let norm = operator_norm(&d, 200, 1e-10);
            assert!(norm * norm <= 8.0, "M={n}: {norm}");
            assert!(norm * norm > 7.0);
        }
    }
}
