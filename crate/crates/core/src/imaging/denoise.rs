use std::sync::Arc;

use serde::Serialize;

use super::{DiscreteGradient, ImageGray};
use crate::diagnostics::primal_dual_gap;
use crate::error::{usage, Result};
use crate::hvector::HVector;
use crate::operators::{OperatorDesc, ProxSpec};
use crate::primal_dual::{
    assemble_operators, run_fixed, run_primal_dual, PdProblem, ReferenceMode, MIN_REFERENCE_ITERATIONS,
};
use crate::splitting::{dr_product_apply, drive, DriveOptions, IterationTrace, ProductPoint, Step};

/// Parameters of
/// `min ½‖u − b‖² + (λ₁/2)‖u‖² + (g₂ □ g₃)(Du)`,
/// `g₂ = λ₂‖·‖_iso + (λ₃/2)‖·‖²`, `g₃ = (λ₄/2)‖·‖²`, plus run settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DenoiseParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
    pub gamma: f64,
    pub noise_sigma: f64,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for DenoiseParams {
    fn default() -> Self {
        Self {
            lambda1: 0.01,
            lambda2: 0.05,
            lambda3: 0.0001,
            lambda4: 10.0,
            gamma: 0.99,
            noise_sigma: 0.05,
            seed: 0,
            tol: 1e-4,
            max_iter: 500,
        }
    }
}

impl DenoiseParams {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("lambda4", self.lambda4),
            ("tol", self.tol),
        ] {
            if !(x > 0.0) || !x.is_finite() {
                return usage(format!("{name} must be positive, got {x}"));
            }
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return usage(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.noise_sigma >= 0.0) || !self.noise_sigma.is_finite() {
            return usage(format!("noise sigma must be non-negative, got {}", self.noise_sigma));
        }
        if self.max_iter == 0 {
            return usage("max_iter must be at least 1");
        }
        Ok(())
    }

    /// Stopping rule `‖Δ(p, q)‖ / m ≤ tol` with `m` the pixel count.
    pub fn drive_options(&self, pixels: usize) -> DriveOptions {
        DriveOptions::new(self.tol, self.max_iter).normalized_by(pixels as f64)
    }
}

/// Three-operator primal-dual problem with `C = D`, `α = 1`, `σ = λ₁`,
/// `τ = λ₃`, `β_g = λ₄`.
pub fn build_denoise_problem(noisy: &ImageGray, params: &DenoiseParams) -> Result<PdProblem> {
    params.validate()?;
    let d = DiscreteGradient::new(noisy.side())?;
    PdProblem::new(
        Arc::new(d),
        vec![
            ProxSpec::quadratic_shift(noisy.to_hvector()),
            ProxSpec::scaled_square(params.lambda1)?,
        ],
        vec![
            ProxSpec::iso(params.lambda2, params.lambda3)?,
            ProxSpec::scaled_square(params.lambda4)?,
        ],
        1.0,
        params.lambda1,
        params.lambda3,
        params.lambda4,
        params.gamma,
    )
}

pub fn denoise_operators(problem: &PdProblem) -> Result<Vec<OperatorDesc>> {
    assemble_operators(problem)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DenoiseAlgorithm {
    /// The minimal-lifting primal-dual method.
    Mt,
    /// Douglas–Rachford on the product space `H^n`.
    DrProduct,
}

impl DenoiseAlgorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            DenoiseAlgorithm::Mt => "mt",
            DenoiseAlgorithm::DrProduct => "dr-product",
        }
    }
}

impl std::str::FromStr for DenoiseAlgorithm {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mt" => Ok(DenoiseAlgorithm::Mt),
            "dr-product" => Ok(DenoiseAlgorithm::DrProduct),
            _ => usage(format!("algorithm must be 'mt' or 'dr-product', got '{s}'")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DenoiseOutcome {
    pub restored: ImageGray,
    pub trace: IterationTrace,
    /// Length of the reference run, if one was made.
    pub reference_iterations: Option<usize>,
}

impl DenoiseOutcome {
    pub fn iterations(&self) -> usize {
        self.trace.iterations()
    }
}

/// Runs `algorithm` from zero on the noisy image until the stopping rule
/// holds or `max_iter` is reached.
pub fn denoise(
    noisy: &ImageGray,
    params: &DenoiseParams,
    algorithm: DenoiseAlgorithm,
    mode: ReferenceMode,
) -> Result<DenoiseOutcome> {
    let problem = build_denoise_problem(noisy, params)?;
    let opts = params.drive_options(noisy.len());
    match algorithm {
        DenoiseAlgorithm::Mt => {
            let run = run_primal_dual(&problem, problem.zero_state(), &opts, mode)?;
            let (u, _) = run.shadow.last();
            Ok(DenoiseOutcome {
                restored: ImageGray::from_hvector(noisy.side(), u)?,
                trace: run.trace,
                reference_iterations: run.reference.map(|r| r.iterations),
            })
        }
        DenoiseAlgorithm::DrProduct => run_dr(&problem, noisy.side(), &opts, mode),
    }
}

fn dr_fixed(ops: &[OperatorDesc], z0: ProductPoint, iterations: usize) -> Result<ProductPoint> {
    let mut z = z0;
    for _ in 0..iterations {
        z = dr_product_apply(ops, &z)?.0;
    }
    Ok(z)
}

fn run_dr(problem: &PdProblem, side: usize, opts: &DriveOptions, mode: ReferenceMode) -> Result<DenoiseOutcome> {
    let ops = assemble_operators(problem)?;
    let d1 = problem.primal_dim();
    let z0 = ProductPoint::zeros(ops.len(), ops[0].dim());
    let plain = |z: &ProductPoint| Ok(Step::new(dr_product_apply(&ops, z)?.0));
    let ref_iters = match mode {
        ReferenceMode::None => None,
        ReferenceMode::Iterations(k) => Some(k),
        ReferenceMode::Auto => {
            let (_, pilot) = drive(plain, z0.clone(), opts, None)?;
            Some((10 * pilot.iterations()).max(MIN_REFERENCE_ITERATIONS))
        }
    };
    let (z, trace) = match ref_iters {
        None => drive(plain, z0, opts, None)?,
        Some(k) => {
            let zstar = dr_fixed(&ops, z0.clone(), k)?;
            let (ustar, vstar) = zstar.diagonal_mean().split(d1);
            drive(
                |z| {
                    let (next, shadow) = dr_product_apply(&ops, z)?;
                    let (u, v) = shadow.split(d1);
                    let gap = primal_dual_gap(&u, &v, &ustar, &vstar, problem)?;
                    Ok(Step::with_gap(next, gap))
                },
                z0,
                opts,
                Some(&zstar),
            )?
        }
    };
    let (u, _) = z.diagonal_mean().split(d1);
    Ok(DenoiseOutcome {
        restored: ImageGray::from_hvector(side, &u)?,
        trace,
        reference_iterations: ref_iters,
    })
}

/// Restored image after exactly `iterations` steps from zero.
pub fn denoise_fixed(
    noisy: &ImageGray,
    params: &DenoiseParams,
    algorithm: DenoiseAlgorithm,
    iterations: usize,
) -> Result<ImageGray> {
    let problem = build_denoise_problem(noisy, params)?;
    let u: HVector = match algorithm {
        DenoiseAlgorithm::Mt => {
            let (_, sh) = run_fixed(&problem, &problem.zero_state(), iterations)?;
            sh.last().0.clone()
        }
        DenoiseAlgorithm::DrProduct => {
            let ops = assemble_operators(&problem)?;
            let z = dr_fixed(&ops, ProductPoint::zeros(ops.len(), ops[0].dim()), iterations)?;
            z.diagonal_mean().split(problem.primal_dim()).0
        }
    };
    ImageGray::from_hvector(noisy.side(), &u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::snr;
    use crate::imaging::{add_gaussian_noise, shepp_logan};
    use crate::linear::LinearMap;
    use nalgebra::DVector;

    #[test]
    fn operator_constants_from_parameters() {
        let img = ImageGray::constant(4, 0.5).unwrap();
        let p = build_denoise_problem(&img, &DenoiseParams::default()).unwrap();
        let ops = denoise_operators(&p).unwrap();
        assert!((ops[2].mu() - 0.01).abs() < 1e-15);
        assert!((ops[1].lip().unwrap() - 1e4).abs() < 1e-9);
        assert!(ops[0].lip().unwrap() <= 8f64.sqrt());
        let ones = DenoiseParams {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            lambda4: 1.0,
            ..DenoiseParams::default()
        };
        let p = build_denoise_problem(&img, &ones).unwrap();
        assert_eq!(denoise_operators(&p).unwrap()[2].mu(), 1.0);
        let bad = DenoiseParams {
            lambda2: 0.0,
            ..DenoiseParams::default()
        };
        assert!(build_denoise_problem(&img, &bad).is_err());
    }

    #[test]
    fn constant_image_limit() {
        // Du* = 0, so u* = b / (1 + λ₁)
        let img = ImageGray::constant(3, 0.6).unwrap();
        let params = DenoiseParams {
            tol: 1e-12,
            max_iter: 5000,
            ..DenoiseParams::default()
        };
        let out = denoise(&img, &params, DenoiseAlgorithm::Mt, ReferenceMode::None).unwrap();
        for &p in out.restored.pixels() {
            assert!((p - 0.6 / 1.01).abs() < 1e-8, "{p}");
        }
    }

    #[test]
    fn limit_satisfies_primal_optimality() {
        let img = shepp_logan(4).unwrap();
        let params = DenoiseParams {
            tol: 1e-13,
            max_iter: 20000,
            ..DenoiseParams::default()
        };
        let p = build_denoise_problem(&img, &params).unwrap();
        let run =
            crate::primal_dual::run_primal_dual(&p, p.zero_state(), &params.drive_options(16), ReferenceMode::None)
                .unwrap();
        let (u, v) = run.shadow.last();
        // u = b − λ₁u − Dᵀv
        let d = DiscreteGradient::new(4).unwrap();
        let dtv = DVector::from_vec(d.adjoint(v.as_slice()));
        let b = DVector::from_column_slice(img.pixels());
        let uu = DVector::from_column_slice(u.as_slice());
        let res = (&uu * 1.01 + dtv - b).norm();
        assert!(res < 1e-7, "{res}");
    }

    #[test]
    fn deterministic_and_clamped() {
        let clean = shepp_logan(16).unwrap();
        let noisy = add_gaussian_noise(&clean, 0.05, 3).unwrap();
        let params = DenoiseParams::default();
        let a = denoise(&noisy, &params, DenoiseAlgorithm::Mt, ReferenceMode::None).unwrap();
        let b = denoise(&noisy, &params, DenoiseAlgorithm::Mt, ReferenceMode::None).unwrap();
        assert_eq!(a.restored, b.restored);
        assert!(a.restored.pixels().iter().all(|p| (0.0..=1.0).contains(p)));
        assert!(snr(&clean, &a.restored).unwrap().is_finite());
        let dr = denoise(&noisy, &params, DenoiseAlgorithm::DrProduct, ReferenceMode::None).unwrap();
        assert!(dr.iterations() >= 1);
    }
}
