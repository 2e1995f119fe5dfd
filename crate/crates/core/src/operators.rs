//! Maximally monotone operators represented by their resolvents.
//!
//! Every operator enters the splitting schemes only through
//! `J_A = (Id + A)⁻¹`, which is single-valued and firmly nonexpansive, plus
//! two pieces of metadata: a strong-monotonicity modulus `mu >= 0` and an
//! optional Lipschitz constant.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, usage, Result};
use crate::hvector::HVector;
use crate::linear::{operator_norm, DenseMatrix, LinearMap};

type ProxFn = Arc<dyn Fn(&HVector) -> HVector + Send + Sync>;
type ValueFn = Arc<dyn Fn(&HVector) -> f64 + Send + Sync>;
type ResolventFn = Arc<dyn Fn(&HVector) -> Result<HVector> + Send + Sync>;

/// `(w + b) / 2`, the prox of `½‖· − b‖²`.
pub fn prox_quadratic_shift(w: &HVector, b: &HVector) -> Result<HVector> {
    check_dim(w.dim(), b.dim())?;
    Ok(HVector::raw(
        w.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| 0.5 * (x + y))
            .collect(),
    ))
}

/// `w / (1 + λ)`, the prox of `(λ/2)‖·‖²`.
pub fn prox_scaled_square(w: &HVector, lambda: f64) -> Result<HVector> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return usage(format!("lambda must be positive, got {lambda}"));
    }
    Ok(w.scaled(1.0 / (1.0 + lambda)))
}

/// Prox of `λ₂‖·‖_iso + (λ₃/2)‖·‖²` on `v = (v¹, v²) ∈ ℝ^{2m}`.
///
/// Each pixel pair `(v¹_i, v²_i)` is shrunk by
/// `α_i = max(0, 1 − λ₂/‖(v¹_i, v²_i)‖)` and the result is scaled by
/// `1/(1 + λ₃)`. A pair whose norm equals `λ₂` exactly maps to zero.
pub fn prox_iso(v: &HVector, lambda2: f64, lambda3: f64) -> Result<HVector> {
    if v.dim() % 2 != 0 {
        return usage(format!("iso prox needs an even length, got {}", v.dim()));
    }
    if !(lambda2 > 0.0) || !(lambda3 >= 0.0) {
        return usage(format!(
            "iso prox needs lambda2 > 0 and lambda3 >= 0, got ({lambda2}, {lambda3})"
        ));
    }
    let m = v.dim() / 2;
    let s = 1.0 / (1.0 + lambda3);
    let (h, w) = v.as_slice().split_at(m);
    let mut out = vec![0.0; 2 * m];
    for i in 0..m {
        let mag = h[i].hypot(w[i]);
        if mag > lambda2 {
            let alpha = s * (1.0 - lambda2 / mag);
            out[i] = alpha * h[i];
            out[m + i] = alpha * w[i];
        }
    }
    Ok(HVector::raw(out))
}

/// Prox of the conjugate through the Moreau decomposition: `w − prox_f(w)`.
pub fn prox_conjugate(prox_f: &ProxSpec, w: &HVector) -> Result<HVector> {
    let p = prox_f.prox(w)?;
    Ok(w - &p)
}

/// Resolvent of the skew block `[[0, C*], [−C, 0]]` on `H₁ × H₂`.
///
/// Returns `(u, v)` with `(Id + C*C) u = p − C*q` and `v = q + C u`.
pub fn resolvent_skew(p: &HVector, q: &HVector, c: &dyn LinearMap) -> Result<(HVector, HVector)> {
    check_dim(c.dim_in(), p.dim())?;
    check_dim(c.dim_out(), q.dim())?;
    let ctq = c.adjoint(q.as_slice());
    let rhs: Vec<f64> = p.as_slice().iter().zip(&ctq).map(|(a, b)| a - b).collect();
    let u = c.solve_identity_plus_gram(&rhs)?;
    let cu = c.apply(&u);
    let v: Vec<f64> = q.as_slice().iter().zip(&cu).map(|(a, b)| a + b).collect();
    Ok((HVector::raw(u), HVector::raw(v)))
}

/// Per-coordinate cone `K` of an operator `μId + N_K` as declared in the
/// non-contraction example.
///
/// The resolvent projects onto the polar cone `N_K(0)`: `ℝ₋ ↦ ℝ₊`,
/// `ℝ₊ ↦ ℝ₋`, `{0} ↦ ℝ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cone {
    NonPositive,
    NonNegative,
    Origin,
}

impl Cone {
    fn project_polar(self, t: f64) -> f64 {
        match self {
            Cone::NonPositive => t.max(0.0),
            Cone::NonNegative => t.min(0.0),
            Cone::Origin => t,
        }
    }
}

/// `P_{N_K}(w / (1 + μ))` applied coordinatewise.
pub fn resolvent_cone_shift(w: &HVector, mu: f64, cones: &[Cone]) -> Result<HVector> {
    if !(mu > 0.0) {
        return usage(format!("mu must be positive, got {mu}"));
    }
    check_dim(cones.len(), w.dim())?;
    let s = 1.0 / (1.0 + mu);
    Ok(HVector::raw(
        w.as_slice()
            .iter()
            .zip(cones)
            .map(|(&x, k)| k.project_polar(s * x))
            .collect(),
    ))
}

/// A user-supplied proximable function.
#[derive(Clone)]
pub struct CustomProx {
    pub name: String,
    pub prox: ProxFn,
    pub value: Option<ValueFn>,
    pub conjugate_value: Option<ValueFn>,
}

impl fmt::Debug for CustomProx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomProx").field("name", &self.name).finish()
    }
}

/// Closed convex functions with a closed-form prox.
#[derive(Clone, Debug)]
pub enum ProxSpec {
    /// `f = 0`
    Zero,
    /// `½‖u − b‖²`
    QuadraticShift {
        b: HVector,
    },
    /// `(λ/2)‖u‖²`
    ScaledSquare {
        lambda: f64,
    },
    /// `λ₂‖v‖_iso + (λ₃/2)‖v‖²` on `ℝ^{2m}`
    Iso {
        lambda2: f64,
        lambda3: f64,
    },
    Custom(CustomProx),
}

impl ProxSpec {
    pub fn quadratic_shift(b: HVector) -> Self {
        ProxSpec::QuadraticShift { b }
    }

    pub fn scaled_square(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return usage(format!("lambda must be positive, got {lambda}"));
        }
        Ok(ProxSpec::ScaledSquare { lambda })
    }

    pub fn iso(lambda2: f64, lambda3: f64) -> Result<Self> {
        if !(lambda2 > 0.0) || !(lambda3 >= 0.0) {
            return usage(format!(
                "iso needs lambda2 > 0 and lambda3 >= 0, got ({lambda2}, {lambda3})"
            ));
        }
        Ok(ProxSpec::Iso { lambda2, lambda3 })
    }

    pub fn custom(name: impl Into<String>, prox: impl Fn(&HVector) -> HVector + Send + Sync + 'static) -> Self {
        ProxSpec::Custom(CustomProx {
            name: name.into(),
            prox: Arc::new(prox),
            value: None,
            conjugate_value: None,
        })
    }

    pub fn tag(&self) -> &str {
        match self {
            ProxSpec::Zero => "zero",
            ProxSpec::QuadraticShift { .. } => "quadratic",
            ProxSpec::ScaledSquare { .. } => "scaled-square",
            ProxSpec::Iso { .. } => "iso-norm",
            ProxSpec::Custom(c) => &c.name,
        }
    }

    pub fn prox(&self, w: &HVector) -> Result<HVector> {
        match self {
            ProxSpec::Zero => Ok(w.clone()),
            ProxSpec::QuadraticShift { b } => prox_quadratic_shift(w, b),
            ProxSpec::ScaledSquare { lambda } => prox_scaled_square(w, *lambda),
            ProxSpec::Iso { lambda2, lambda3 } => prox_iso(w, *lambda2, *lambda3),
            ProxSpec::Custom(c) => Ok((c.prox)(w)),
        }
    }

    /// `f(u)`; may be `+∞` outside the domain.
    pub fn value(&self, u: &HVector) -> Result<f64> {
        match self {
            ProxSpec::Zero => Ok(0.0),
            ProxSpec::QuadraticShift { b } => {
                check_dim(b.dim(), u.dim())?;
                Ok(0.5 * u.dist(b).powi(2))
            }
            ProxSpec::ScaledSquare { lambda } => Ok(0.5 * lambda * u.norm_sq()),
            ProxSpec::Iso { lambda2, lambda3 } => {
                let mags = pixel_magnitudes(u)?;
                Ok(lambda2 * mags.iter().sum::<f64>() + 0.5 * lambda3 * u.norm_sq())
            }
            ProxSpec::Custom(c) => match &c.value {
                Some(f) => Ok(f(u)),
                None => usage(format!("function '{}' has no value evaluator", c.name)),
            },
        }
    }

    /// Fenchel conjugate `f*(y)` for the cataloged functions.
    pub fn conjugate_value(&self, y: &HVector) -> Result<f64> {
        match self {
            ProxSpec::Zero => Ok(if y.as_slice().iter().all(|&t| t == 0.0) {
                0.0
            } else {
                f64::INFINITY
            }),
            ProxSpec::QuadraticShift { b } => {
                check_dim(b.dim(), y.dim())?;
                Ok(0.5 * y.norm_sq() + y.dot(b))
            }
            ProxSpec::ScaledSquare { lambda } => Ok(y.norm_sq() / (2.0 * lambda)),
            ProxSpec::Iso { lambda2, lambda3 } => {
                // (λ₂‖·‖_iso + (λ₃/2)‖·‖²)* = dist²(·, B_λ₂) / (2λ₃), pixelwise balls
                let mags = pixel_magnitudes(y)?;
                if *lambda3 == 0.0 {
                    let inside = mags.iter().all(|&r| r <= lambda2 * (1.0 + 1e-12));
                    return Ok(if inside { 0.0 } else { f64::INFINITY });
                }
                let excess: f64 = mags.iter().map(|&r| (r - lambda2).max(0.0).powi(2)).sum();
                Ok(excess / (2.0 * lambda3))
            }
            ProxSpec::Custom(c) => match &c.conjugate_value {
                Some(f) => Ok(f(y)),
                None => usage(format!("function '{}' has no closed-form conjugate", c.name)),
            },
        }
    }
}

fn pixel_magnitudes(v: &HVector) -> Result<Vec<f64>> {
    if v.dim() % 2 != 0 {
        return usage(format!("iso norm needs an even length, got {}", v.dim()));
    }
    let m = v.dim() / 2;
    let (h, w) = v.as_slice().split_at(m);
    Ok(h.iter().zip(w).map(|(a, b)| a.hypot(*b)).collect())
}

/// `x ↦ Mx + c` with `M` monotone, resolvent via a cached LU of `Id + M`.
#[derive(Clone, Debug)]
pub struct AffineOperator {
    matrix: DMatrix<f64>,
    shift: DVector<f64>,
    lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
}

impl AffineOperator {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn shift(&self) -> &DVector<f64> {
        &self.shift
    }

    pub fn eval(&self, x: &HVector) -> HVector {
        let xv = DVector::from_column_slice(x.as_slice());
        HVector::raw((&self.matrix * xv + &self.shift).as_slice().to_vec())
    }
}

/// What kind of operator a descriptor holds.
#[derive(Clone)]
pub enum OperatorKind {
    Zero,
    ScaledIdentity {
        mu: f64,
    },
    Affine(Arc<AffineOperator>),
    /// `∂f` of a proximable `f`.
    Subdifferential(ProxSpec),
    /// `∇f` of a smooth proximable `f`.
    Gradient(ProxSpec),
    /// `[[0, C*], [−C, 0]]` on `H₁ × H₂`.
    SkewBlock(Arc<dyn LinearMap>),
    /// `μId + N_K` with per-coordinate cones.
    ConeShift {
        mu: f64,
        cones: Vec<Cone>,
    },
    /// `(∂f, ∂g*)` on `H₁ × H₂`; resolvent `(prox_f, Id − prox_g)`.
    PrimalDualPair {
        f: ProxSpec,
        g: ProxSpec,
        split: usize,
    },
    Custom(ResolventFn),
}

impl fmt::Debug for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::Zero => write!(f, "Zero"),
            OperatorKind::ScaledIdentity { mu } => write!(f, "ScaledIdentity({mu})"),
            OperatorKind::Affine(_) => write!(f, "Affine"),
            OperatorKind::Subdifferential(p) => write!(f, "Subdifferential({})", p.tag()),
            OperatorKind::Gradient(p) => write!(f, "Gradient({})", p.tag()),
            OperatorKind::SkewBlock(c) => write!(f, "SkewBlock({c:?})"),
            OperatorKind::ConeShift { mu, cones } => write!(f, "ConeShift({mu}, {cones:?})"),
            OperatorKind::PrimalDualPair { f: pf, g, .. } => {
                write!(f, "PrimalDualPair({}, {})", pf.tag(), g.tag())
            }
            OperatorKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// A maximally monotone operator on `ℝ^dim` given by its resolvent and
/// monotonicity metadata.
#[derive(Clone, Debug)]
pub struct OperatorDesc {
    kind: OperatorKind,
    dim: usize,
    mu: f64,
    lip: Option<f64>,
}

impl OperatorDesc {
    pub fn zero(dim: usize) -> Self {
        Self {
            kind: OperatorKind::Zero,
            dim,
            mu: 0.0,
            lip: Some(0.0),
        }
    }

    /// `μ Id`; `mu = 0` is allowed and equals the zero operator.
    pub fn scaled_identity(dim: usize, mu: f64) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return usage(format!("mu must be non-negative, got {mu}"));
        }
        Ok(Self {
            kind: OperatorKind::ScaledIdentity { mu },
            dim,
            mu,
            lip: Some(mu),
        })
    }

    /// `x ↦ Mx + c`. Rejects `M` whose symmetric part is not positive
    /// semidefinite. Metadata: `mu = λ_min(sym M)`, `lip = ‖M‖₂`.
    pub fn affine(matrix: &DenseMatrix, shift: &HVector) -> Result<Self> {
        let d = matrix.rows();
        check_dim(d, matrix.cols())?;
        check_dim(d, shift.dim())?;
        let m = matrix.to_nalgebra();
        let sym = (&m + m.transpose()) * 0.5;
        let lam_min = sym.symmetric_eigenvalues().min();
        let lip = m.singular_values().max();
        if lam_min < -1e-10 * (1.0 + lip) {
            return usage(format!("affine operator is not monotone (λ_min = {lam_min:.3e})"));
        }
        let lu = (DMatrix::identity(d, d) + &m).lu();
        Ok(Self {
            kind: OperatorKind::Affine(Arc::new(AffineOperator {
                matrix: m,
                shift: DVector::from_column_slice(shift.as_slice()),
                lu,
            })),
            dim: d,
            mu: lam_min.max(0.0),
            lip: Some(lip),
        })
    }

    pub fn subdifferential(spec: ProxSpec, dim: usize, mu: f64, lip: Option<f64>) -> Result<Self> {
        Self::with_checked_meta(OperatorKind::Subdifferential(spec), dim, mu, lip)
    }

    pub fn gradient(spec: ProxSpec, dim: usize, mu: f64, lip: f64) -> Result<Self> {
        Self::with_checked_meta(OperatorKind::Gradient(spec), dim, mu, Some(lip))
    }

    /// Skew block for `C`; the Lipschitz constant is `‖C‖` by power iteration.
    pub fn skew_block(c: Arc<dyn LinearMap>) -> Self {
        let lip = operator_norm(c.as_ref(), 200, 1e-10);
        Self::skew_block_with_norm(c, lip)
    }

    pub fn skew_block_with_norm(c: Arc<dyn LinearMap>, c_norm: f64) -> Self {
        let dim = c.dim_in() + c.dim_out();
        Self {
            kind: OperatorKind::SkewBlock(c),
            dim,
            mu: 0.0,
            lip: Some(c_norm),
        }
    }

    /// `μId + N_K`; strongly monotone with modulus `mu`, not Lipschitz.
    pub fn cone_shift(mu: f64, cones: Vec<Cone>) -> Result<Self> {
        if !(mu > 0.0) {
            return usage(format!("mu must be positive, got {mu}"));
        }
        let lip = if cones.iter().all(|&k| k == Cone::Origin) {
            // polar of {0} is ℝ, so this is just μId
            Some(mu)
        } else {
            None
        };
        Ok(Self {
            dim: cones.len(),
            kind: OperatorKind::ConeShift { mu, cones },
            mu,
            lip,
        })
    }

    /// `(∂f, ∂g*)` on `ℝ^{d1} × ℝ^{d2}`.
    pub fn primal_dual_pair(f: ProxSpec, g: ProxSpec, d1: usize, d2: usize, mu: f64, lip: Option<f64>) -> Result<Self> {
        Self::with_checked_meta(OperatorKind::PrimalDualPair { f, g, split: d1 }, d1 + d2, mu, lip)
    }

    pub fn custom(
        dim: usize,
        mu: f64,
        lip: Option<f64>,
        resolvent: impl Fn(&HVector) -> Result<HVector> + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::with_checked_meta(OperatorKind::Custom(Arc::new(resolvent)), dim, mu, lip)
    }

    fn with_checked_meta(kind: OperatorKind, dim: usize, mu: f64, lip: Option<f64>) -> Result<Self> {
        if dim == 0 {
            return usage("operator dimension must be positive");
        }
        if !(mu >= 0.0) || !mu.is_finite() {
            return usage(format!("mu must be non-negative, got {mu}"));
        }
        if let Some(l) = lip {
            if !(l >= 0.0) || !l.is_finite() {
                return usage(format!("Lipschitz constant must be non-negative, got {l}"));
            }
        }
        Ok(Self { kind, dim, mu, lip })
    }

    /// Replaces the strong-monotonicity modulus, e.g. with a known lower bound.
    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_lip(mut self, lip: Option<f64>) -> Self {
        self.lip = lip;
        self
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn lip(&self) -> Option<f64> {
        self.lip
    }

    /// `J_A(w) = (Id + A)⁻¹ w`.
    pub fn resolvent(&self, w: &HVector) -> Result<HVector> {
        w.check_dim(self.dim)?;
        match &self.kind {
            OperatorKind::Zero => Ok(w.clone()),
            OperatorKind::ScaledIdentity { mu } => Ok(w.scaled(1.0 / (1.0 + mu))),
            OperatorKind::Affine(a) => {
                let rhs = DVector::from_column_slice(w.as_slice()) - &a.shift;
                let x =
                    a.lu.solve(&rhs)
                        .ok_or_else(|| crate::Error::Usage("Id + M is singular".to_string()))?;
                Ok(HVector::raw(x.as_slice().to_vec()))
            }
            OperatorKind::Subdifferential(p) | OperatorKind::Gradient(p) => p.prox(w),
            OperatorKind::SkewBlock(c) => {
                let (p, q) = w.split(c.dim_in());
                let (u, v) = resolvent_skew(&p, &q, c.as_ref())?;
                Ok(HVector::concat(&u, &v))
            }
            OperatorKind::ConeShift { mu, cones } => resolvent_cone_shift(w, *mu, cones),
            OperatorKind::PrimalDualPair { f, g, split } => {
                let (p, q) = w.split(*split);
                let u = f.prox(&p)?;
                let v = prox_conjugate(g, &q)?;
                Ok(HVector::concat(&u, &v))
            }
            OperatorKind::Custom(r) => r(w),
        }
    }

    /// Forward evaluation for single-valued linear/affine kinds.
    pub fn eval(&self, x: &HVector) -> Option<HVector> {
        match &self.kind {
            OperatorKind::Zero => Some(HVector::zeros(x.dim())),
            OperatorKind::ScaledIdentity { mu } => Some(x.scaled(*mu)),
            OperatorKind::Affine(a) => Some(a.eval(x)),
            OperatorKind::SkewBlock(c) => {
                let (u, v) = x.split(c.dim_in());
                let ctv = c.adjoint(v.as_slice());
                let cu = c.apply(u.as_slice());
                let top = HVector::raw(ctv);
                let bottom = HVector::raw(cu.iter().map(|t| -t).collect());
                Some(HVector::concat(&top, &bottom))
            }
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> HVector {
        HVector::from_slice(xs).unwrap()
    }

    /// Golden-section search for a unimodal scalar function on [lo, hi].
    fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - r * (hi - lo);
            let b = lo + r * (hi - lo);
            if f(a) < f(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn quadratic_shift_examples() {
        let b = v(&[0.3, -2.0]);
        assert_eq!(prox_quadratic_shift(&b, &b).unwrap(), b);
        assert_eq!(prox_quadratic_shift(&v(&[0.0]), &v(&[1.0])).unwrap(), v(&[0.5]));
        let out = prox_quadratic_shift(&v(&[2.0, -4.0]), &v(&[0.0, 2.0])).unwrap();
        assert_eq!(out, v(&[1.0, -1.0]));
        // coordinatewise brute force of ½(u−b)² + ½(u−w)²
        for (w, b, got) in [(2.0, 0.0, out[0]), (-4.0, 2.0, out[1])] {
            let u = golden_min(|u| 0.5 * (u - b) * (u - b) + 0.5 * (u - w) * (u - w), -10.0, 10.0);
            assert!((u - got).abs() < 1e-6);
        }
        assert!(prox_quadratic_shift(&v(&[1.0]), &v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn scaled_square_examples() {
        assert_eq!(prox_scaled_square(&v(&[0.0]), 1.0).unwrap(), v(&[0.0]));
        assert_eq!(prox_scaled_square(&v(&[2.0]), 1.0).unwrap(), v(&[1.0]));
        let got = prox_scaled_square(&v(&[3.0]), 0.5).unwrap()[0];
        assert!((got - 2.0).abs() < 1e-15);
        let u = golden_min(|u| 0.25 * u * u + 0.5 * (u - 3.0) * (u - 3.0), -10.0, 10.0);
        assert!((u - got).abs() < 1e-6);
        assert!(prox_scaled_square(&v(&[1.0]), 0.0).is_err());
        assert!(prox_scaled_square(&v(&[1.0]), -1.0).is_err());
    }

    #[test]
    fn iso_examples() {
        assert_eq!(prox_iso(&v(&[0.0, 0.0]), 0.7, 0.2).unwrap(), v(&[0.0, 0.0]));
        let a = prox_iso(&v(&[3.0, 4.0]), 1.0, 0.0).unwrap();
        assert!((a[0] - 2.4).abs() < 1e-15 && (a[1] - 3.2).abs() < 1e-15);
        let b = prox_iso(&v(&[3.0, 4.0]), 1.0, 1.0).unwrap();
        assert!((b[0] - 1.2).abs() < 1e-15 && (b[1] - 1.6).abs() < 1e-15);
        // norm exactly at threshold collapses to zero
        assert_eq!(prox_iso(&v(&[3.0, 4.0]), 5.0, 0.0).unwrap(), v(&[0.0, 0.0]));
        assert!(prox_iso(&v(&[1.0, 2.0, 3.0]), 1.0, 0.0).is_err());
    }

    #[test]
    fn iso_matches_two_dimensional_brute_force() {
        // minimize λ₂√(a²+b²) + (λ₃/2)(a²+b²) + ½‖(a,b) − (3,4)‖² by nested golden search
        for lambda3 in [0.0, 1.0] {
            let obj = |a: f64, b: f64| {
                (a * a + b * b).sqrt() + 0.5 * lambda3 * (a * a + b * b) + 0.5 * ((a - 3.0).powi(2) + (b - 4.0).powi(2))
            };
            let best_b = |a: f64| golden_min(|b| obj(a, b), -10.0, 10.0);
            let a = golden_min(|a| obj(a, best_b(a)), -10.0, 10.0);
            let b = best_b(a);
            let got = prox_iso(&v(&[3.0, 4.0]), 1.0, lambda3).unwrap();
            assert!((got[0] - a).abs() < 1e-6, "{} vs {a}", got[0]);
            assert!((got[1] - b).abs() < 1e-6, "{} vs {b}", got[1]);
        }
    }

    #[test]
    fn conjugate_prox_examples() {
        assert_eq!(
            prox_conjugate(&ProxSpec::Zero, &v(&[1.5, -2.0])).unwrap(),
            v(&[0.0, 0.0])
        );
        let b = v(&[0.4, 1.0]);
        let spec = ProxSpec::quadratic_shift(b.clone());
        assert_eq!(prox_conjugate(&spec, &b).unwrap(), v(&[0.0, 0.0]));
        // f = ½‖·‖² is self-conjugate
        let half = ProxSpec::scaled_square(1.0).unwrap();
        let got = prox_conjugate(&half, &v(&[2.0])).unwrap();
        assert_eq!(got, v(&[1.0]));
        assert_eq!(got, half.prox(&v(&[2.0])).unwrap());
    }

    #[test]
    fn skew_resolvent_examples() {
        let (u, w) = resolvent_skew(&v(&[1.0, 2.0]), &v(&[3.0]), &DenseMatrix::zeros(1, 2)).unwrap();
        assert_eq!((u, w), (v(&[1.0, 2.0]), v(&[3.0])));
        let (u, w) = resolvent_skew(&v(&[1.0]), &v(&[0.0]), &DenseMatrix::scalar(1.0)).unwrap();
        assert!((u[0] - 0.5).abs() < 1e-14 && (w[0] - 0.5).abs() < 1e-14);
        let (u, w) = resolvent_skew(&v(&[5.0]), &v(&[0.0]), &DenseMatrix::scalar(2.0)).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-14 && (w[0] - 2.0).abs() < 1e-14);
    }

    #[test]
    fn cone_shift_examples() {
        let r = |w: f64, k: Cone| resolvent_cone_shift(&v(&[w]), 1.0, &[k]).unwrap()[0];
        assert_eq!(r(0.0, Cone::NonPositive), 0.0);
        assert_eq!(r(-1.0, Cone::NonPositive), 0.0);
        assert_eq!(r(-1.0, Cone::NonNegative), -0.5);
        assert_eq!(r(3.0, Cone::Origin), 1.5);
        assert!(resolvent_cone_shift(&v(&[1.0]), 0.0, &[Cone::Origin]).is_err());
    }

    #[test]
    fn conjugate_values_satisfy_fenchel_young_equality() {
        // f(p) + f*(w − p) = ⟨p, w − p⟩ at p = prox_f(w)
        let b = v(&[0.5, -1.0, 2.0, 0.1]);
        let specs = [
            ProxSpec::quadratic_shift(b),
            ProxSpec::scaled_square(0.3).unwrap(),
            ProxSpec::iso(0.7, 0.2).unwrap(),
            ProxSpec::iso(0.7, 0.0).unwrap(),
        ];
        let w = v(&[1.3, -0.2, 0.9, 2.2]);
        for s in &specs {
            let p = s.prox(&w).unwrap();
            let y = &w - &p;
            let lhs = s.value(&p).unwrap() + s.conjugate_value(&y).unwrap();
            assert!((lhs - p.dot(&y)).abs() < 1e-12, "{}", s.tag());
        }
    }

    #[test]
    fn affine_rejects_non_monotone() {
        let m = DenseMatrix::new(2, 2, vec![-1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(OperatorDesc::affine(&m, &HVector::zeros(2)).is_err());
        let m = DenseMatrix::new(2, 2, vec![1.0, 2.0, -2.0, 1.0]).unwrap();
        let op = OperatorDesc::affine(&m, &v(&[1.0, 0.0])).unwrap();
        assert!((op.mu() - 1.0).abs() < 1e-12);
        assert!((op.lip().unwrap() - 5f64.sqrt()).abs() < 1e-12);
        // x = J(w) solves x + Mx + c = w
        let w = v(&[0.3, -0.8]);
        let x = op.resolvent(&w).unwrap();
        let back = &x + &op.eval(&x).unwrap();
        assert!(back.dist(&w) < 1e-14);
    }

    #[test]
    fn skew_block_metadata_and_inverse() {
        let c: Arc<dyn LinearMap> = Arc::new(DenseMatrix::new(1, 2, vec![3.0, 4.0]).unwrap());
        let op = OperatorDesc::skew_block(c);
        assert_eq!(op.dim(), 3);
        assert!((op.lip().unwrap() - 5.0).abs() < 1e-8);
        let w = v(&[1.0, -2.0, 0.5]);
        let x = op.resolvent(&w).unwrap();
        assert!((&x + &op.eval(&x).unwrap()).dist(&w) < 1e-12);
        assert_eq!(
            OperatorDesc::skew_block(Arc::new(DenseMatrix::zeros(2, 2))).lip(),
            Some(0.0)
        );
    }

    #[test]
    fn resolvent_checks_dimension() {
        let op = OperatorDesc::zero(3);
        assert!(op.resolvent(&v(&[1.0])).is_err());
    }
}
