//! Seeded operator families for rate studies and property checks.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{usage, Result};
use crate::hvector::HVector;
use crate::linear::{DenseMatrix, LinearMap};
use crate::operators::{Cone, OperatorDesc, ProxSpec};
use crate::random::normal_vec;
use crate::splitting::SplitProblem;

/// Which set of linear-convergence assumptions a family meets.
///
/// * `A`: `A₁..A_{n−1}` monotone and `L`-Lipschitz, `A_n` `μ`-strongly monotone.
/// * `B`: `A₁..A_{n−1}` `μ`-strongly monotone and `L`-Lipschitz, `A_n` monotone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    A,
    B,
}

impl std::str::FromStr for Case {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Case::A),
            "b" => Ok(Case::B),
            _ => usage(format!("case must be 'a' or 'b', got '{s}'")),
        }
    }
}

/// Affine operators `A_i x = M_i x + c_i` sharing one space.
#[derive(Clone, Debug)]
pub struct AffineFamily {
    pub ops: Vec<OperatorDesc>,
    pub matrices: Vec<DMatrix<f64>>,
    pub shifts: Vec<DVector<f64>>,
    pub mu: f64,
    pub lip: f64,
    pub case: Option<Case>,
}

impl AffineFamily {
    pub fn dim(&self) -> usize {
        self.shifts[0].len()
    }

    pub fn problem(&self, gamma: f64) -> Result<SplitProblem> {
        SplitProblem::new(self.ops.clone(), gamma)
    }

    /// The zero of `∑ A_i` by a dense linear solve of `(∑ M_i) x = −∑ c_i`.
    pub fn direct_zero(&self) -> Result<DVector<f64>> {
        let d = self.dim();
        let m: DMatrix<f64> = self.matrices.iter().fold(DMatrix::zeros(d, d), |acc, mi| acc + mi);
        let c: DVector<f64> = self.shifts.iter().fold(DVector::zeros(d), |acc, ci| acc + ci);
        m.lu()
            .solve(&(-c))
            .ok_or_else(|| crate::Error::Usage("sum of operators is singular".to_string()))
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
    DMatrix::from_vec(d, d, normal_vec(rng, d * d))
}

/// A random matrix with `sym(M) ⪰ μI` and, if `lip` is given, `‖M‖₂ ≤ lip`.
///
/// `M = μI + t(PPᵀ/d + K)` with `K` skew; `t` is scaled to meet the norm bound.
pub fn monotone_matrix(rng: &mut ChaCha8Rng, d: usize, mu: f64, lip: Option<f64>) -> Result<DMatrix<f64>> {
    if !(mu >= 0.0) {
        return usage(format!("mu must be non-negative, got {mu}"));
    }
    let g = random_matrix(rng, d);
    let h = random_matrix(rng, d);
    let base = (&h * h.transpose()) / d as f64 + (&g - g.transpose()) * 0.5;
    let t = match lip {
        Some(l) if l < mu => return usage(format!("Lipschitz constant {l} is below the monotonicity modulus {mu}")),
        Some(l) => {
            let nb = base.singular_values().max();
            if nb == 0.0 {
                0.0
            } else {
                (l - mu) / nb
            }
        }
        None => 1.0,
    };
    Ok(DMatrix::identity(d, d) * mu + base * t)
}

fn affine_op(m: &DMatrix<f64>, c: &DVector<f64>, mu: f64, lip: Option<f64>) -> Result<OperatorDesc> {
    let op = OperatorDesc::affine(&DenseMatrix::from_nalgebra(m), &HVector::raw(c.as_slice().to_vec()))?;
    // the constructed moduli are exact lower/upper bounds; rounding in the
    // eigen-solver must not push μ below them
    let floor = op.mu().max(mu);
    let op = op.with_mu(floor);
    Ok(match lip {
        Some(l) => op.with_lip(Some(l)),
        None => op,
    })
}

/// Affine family satisfying assumption set `case` with constants `(μ, L)`.
pub fn case_family(case: Case, n: usize, d: usize, mu: f64, lip: f64, seed: u64) -> Result<AffineFamily> {
    if n < 2 || d == 0 {
        return usage(format!("need n >= 2 and d >= 1, got n={n}, d={d}"));
    }
    if !(mu > 0.0) || !(lip > 0.0) {
        return usage(format!("need mu > 0 and L > 0, got mu={mu}, L={lip}"));
    }
    if case == Case::B && lip < mu {
        return usage(format!("case (b) needs L >= mu, got mu={mu}, L={lip}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrices = Vec::with_capacity(n);
    let mut shifts = Vec::with_capacity(n);
    let mut ops = Vec::with_capacity(n);
    for i in 0..n {
        let last = i == n - 1;
        let (m_i, lip_i) = match (case, last) {
            (Case::A, false) => (0.0, Some(lip)),
            (Case::A, true) => (mu, None),
            (Case::B, false) => (mu, Some(lip)),
            (Case::B, true) => (0.0, None),
        };
        let m = monotone_matrix(&mut rng, d, m_i, lip_i)?;
        let c = DVector::from_vec(normal_vec(&mut rng, d));
        ops.push(affine_op(&m, &c, m_i, lip_i)?);
        matrices.push(m);
        shifts.push(c);
    }
    Ok(AffineFamily {
        ops,
        matrices,
        shifts,
        mu,
        lip,
        case: Some(case),
    })
}

/// Merely monotone affine family (`μ = 0`): no contraction is certified.
pub fn monotone_family(n: usize, d: usize, lip: f64, seed: u64) -> Result<AffineFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matrices = Vec::new();
    let mut shifts = Vec::new();
    let mut ops = Vec::new();
    for _ in 0..n {
        let m = monotone_matrix(&mut rng, d, 0.0, Some(lip))?;
        let c = DVector::from_vec(normal_vec(&mut rng, d));
        ops.push(affine_op(&m, &c, 0.0, Some(lip))?.with_mu(0.0));
        matrices.push(m);
        shifts.push(c);
    }
    Ok(AffineFamily {
        ops,
        matrices,
        shifts,
        mu: 0.0,
        lip,
        case: None,
    })
}

/// Random operator of a random cataloged kind on `ℝ^d`, with valid `μ` metadata.
pub fn random_operator(rng: &mut ChaCha8Rng, d: usize) -> Result<OperatorDesc> {
    let kinds = if d >= 2 { 8 } else { 6 };
    Ok(match rng.gen_range(0..kinds) {
        0 => OperatorDesc::zero(d),
        1 => OperatorDesc::scaled_identity(d, rng.gen_range(0.0..2.0))?,
        2 => {
            let mu = if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.0..1.5)
            };
            let m = monotone_matrix(rng, d, mu, None)?;
            let c = DVector::from_vec(normal_vec(rng, d));
            affine_op(&m, &c, mu, None)?
        }
        3 => {
            let b = HVector::raw(normal_vec(rng, d));
            OperatorDesc::subdifferential(ProxSpec::quadratic_shift(b), d, 1.0, Some(1.0))?
        }
        4 => {
            let lambda = rng.gen_range(0.05..3.0);
            OperatorDesc::subdifferential(ProxSpec::scaled_square(lambda)?, d, lambda, Some(lambda))?
        }
        5 => {
            let cones = (0..d)
                .map(|_| match rng.gen_range(0..3) {
                    0 => Cone::NonPositive,
                    1 => Cone::NonNegative,
                    _ => Cone::Origin,
                })
                .collect();
            OperatorDesc::cone_shift(rng.gen_range(0.1..2.0), cones)?
        }
        6 if d % 2 == 0 => {
            let lambda3 = if rng.gen_bool(0.5) {
                0.0
            } else {
                rng.gen_range(0.0..1.0)
            };
            let spec = ProxSpec::iso(rng.gen_range(0.05..2.0), lambda3)?;
            OperatorDesc::subdifferential(spec, d, lambda3, None)?
        }
        _ => {
            let d1 = rng.gen_range(1..d);
            let d2 = d - d1;
            let c: Arc<dyn LinearMap> = Arc::new(DenseMatrix::new(d2, d1, normal_vec(rng, d1 * d2))?);
            OperatorDesc::skew_block(c)
        }
    })
}

/// `n` random operators on `ℝ^d`.
pub fn random_family(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Result<Vec<OperatorDesc>> {
    (0..n).map(|_| random_operator(rng, d)).collect()
}

/// Three zero operators on ℝ: every `(t, t)` is a fixed point of `T_MT`.
pub fn zero_triple(gamma: f64) -> Result<SplitProblem> {
    SplitProblem::new(vec![OperatorDesc::zero(1); 3], gamma)
}

/// `μId + N_{ℝ₋}`, `μId + N_{ℝ₊}`, `μId + N_{{0}}` on ℝ: strongly monotone
/// but not Lipschitz, with the ray `ℝ₋ × {0}` fixed by `T_MT`.
pub fn cone_triple(mu: f64, gamma: f64) -> Result<SplitProblem> {
    SplitProblem::new(
        vec![
            OperatorDesc::cone_shift(mu, vec![Cone::NonPositive])?,
            OperatorDesc::cone_shift(mu, vec![Cone::NonNegative])?,
            OperatorDesc::cone_shift(mu, vec![Cone::Origin])?,
        ],
        gamma,
    )
}
