//! Numerical checks of the contraction analysis of `T_MT`.
//!
//! The descent inequality, the ε- and α-chains with the contraction factors
//! they certify, least-squares rate fitting on iteration traces, the
//! primal-dual gap and the SNR used for denoising reports.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{check_dim, usage, Result};
use crate::families::AffineFamily;
use crate::families::Case;
use crate::hvector::HVector;
use crate::imaging::ImageGray;
use crate::primal_dual::PdProblem;
use crate::random::normal_vec;
use crate::splitting::{
    mt_apply, mt_shadow, run_mt, DriveOptions, IterState, IterationTrace, LiftedPoint, SplitProblem,
};

/// Slack of the descent inequality at `(z, z̄)`:
///
/// `‖z−z̄‖² − 2γ∑μ_i‖x_i−x̄_i‖² − ‖Tz−Tz̄‖² − γ(1−γ)∑_{i<n}‖(x_i−x_{i+1})−(x̄_i−x̄_{i+1})‖²
///  − γ‖(x_n−x₁)−(x̄_n−x̄₁)‖²`.
///
/// It is non-negative for maximally `μ_i`-monotone operators.
pub fn check_descent_inequality(problem: &SplitProblem, z: &LiftedPoint, zbar: &LiftedPoint) -> Result<f64> {
    let gamma = problem.gamma();
    let (tz, x) = mt_apply(problem, z)?;
    let (tzbar, xbar) = mt_apply(problem, zbar)?;
    let n = problem.n();
    let dx: Vec<HVector> = x.xs.iter().zip(&xbar.xs).map(|(a, b)| a - b).collect();

    let strong: f64 = problem.ops().iter().zip(&dx).map(|(op, d)| op.mu() * d.norm_sq()).sum();
    let chain: f64 = (0..n - 1).map(|i| dx[i].dist(&dx[i + 1]).powi(2)).sum();
    let wrap = dx[n - 1].dist(&dx[0]).powi(2);

    let rhs = z.distance(zbar).powi(2) - 2.0 * gamma * strong;
    let lhs = tz.distance(&tzbar).powi(2) + gamma * (1.0 - gamma) * chain + gamma * wrap;
    Ok(rhs - lhs)
}

/// Tolerance the descent slack must clear: `−1e−10·(1 + ‖z−z̄‖²)`.
pub fn descent_tolerance(z: &LiftedPoint, zbar: &LiftedPoint) -> f64 {
    -1e-10 * (1.0 + z.distance(zbar).powi(2))
}

/// ε-chain `ε₂, …, ε_{n−1}` with `ε_{i+1} = √(2 − 1/ε_i)` and the bound
/// `ε′ = min{2−ε₂, 2−1/ε_i−ε_{i+1}, 1−1/ε_{n−1}}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpsilonChain {
    pub eps: Vec<f64>,
    pub eps_prime: f64,
}

/// Builds the ε-chain for `n` operators starting from `eps2 ∈ (1, 2)`.
///
/// For `n = 2` the chain is empty and `ε′ = 1`.
pub fn epsilon_chain(n: usize, eps2: f64) -> Result<EpsilonChain> {
    if n < 2 {
        return usage(format!("need n >= 2, got {n}"));
    }
    if !(eps2 > 1.0 && eps2 < 2.0) {
        return usage(format!("eps2 must lie in (1, 2), got {eps2}"));
    }
    if n == 2 {
        return Ok(EpsilonChain {
            eps: Vec::new(),
            eps_prime: 1.0,
        });
    }
    let mut eps = vec![eps2];
    for _ in 3..n {
        let prev = *eps.last().unwrap();
        eps.push((2.0 - 1.0 / prev).sqrt());
    }
    let mut eps_prime = (2.0 - eps2).min(1.0 - 1.0 / eps.last().unwrap());
    for w in eps.windows(2) {
        eps_prime = eps_prime.min(2.0 - 1.0 / w[0] - w[1]);
    }
    Ok(EpsilonChain { eps, eps_prime })
}

/// Grid of starting values searched by [`best_epsilon_chain`].
pub fn eps2_grid() -> impl Iterator<Item = f64> {
    (1..=19).map(|k| 1.0 + 0.05 * k as f64)
}

/// ε-chain maximizing `ε′` over `ε₂ ∈ {1.05, 1.10, …, 1.95}`.
pub fn best_epsilon_chain(n: usize) -> Result<EpsilonChain> {
    let mut best: Option<EpsilonChain> = None;
    for eps2 in eps2_grid() {
        let c = epsilon_chain(n, eps2)?;
        if best.as_ref().is_none_or(|b| c.eps_prime > b.eps_prime) {
            best = Some(c);
        }
    }
    Ok(best.unwrap())
}

/// Backward α-chain `α₁, …, α_{n−1}` with `α_{n−1} = 1 + 2μ/(1−γ)`,
/// `α_{i−1} = √(2 − 1/α_i)` and `α′ = min{1−1/α₁, 2−1/α_i−α_{i−1}}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AlphaChain {
    /// `alpha[0] = α₁`, …, `alpha[n−2] = α_{n−1}`
    pub alpha: Vec<f64>,
    pub alpha_prime: f64,
}

pub fn alpha_chain(n: usize, gamma: f64, mu: f64) -> Result<AlphaChain> {
    if n < 2 {
        return usage(format!("need n >= 2, got {n}"));
    }
    if !(gamma > 0.0 && gamma < 1.0) {
        return usage(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return usage(format!("mu must be positive, got {mu}"));
    }
    let mut alpha = vec![0.0; n - 1];
    alpha[n - 2] = 1.0 + 2.0 * mu / (1.0 - gamma);
    for i in (1..n - 1).rev() {
        alpha[i - 1] = (2.0 - 1.0 / alpha[i]).sqrt();
    }
    let mut alpha_prime = 1.0 - 1.0 / alpha[0];
    for i in 1..n - 1 {
        alpha_prime = alpha_prime.min(2.0 - 1.0 / alpha[i] - alpha[i - 1]);
    }
    Ok(AlphaChain { alpha, alpha_prime })
}

/// `η = 1/(1 + L/√ε′)²`.
pub fn eta(lip: f64, eps_prime: f64) -> f64 {
    1.0 / (1.0 + lip / eps_prime.sqrt()).powi(2)
}

/// Constants behind a certified contraction factor.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaCertificate {
    pub case: Case,
    pub eps_prime: f64,
    /// Present for case (a) only.
    pub alpha_prime: Option<f64>,
    pub eta: f64,
    /// `‖Tz − Tz̄‖² ≤ β‖z − z̄‖²`
    pub beta: f64,
}

impl BetaCertificate {
    /// Lipschitz constant of `T_MT` implied by `β`: `√β`.
    pub fn lipschitz_factor(&self) -> f64 {
        self.beta.sqrt()
    }
}

/// Contraction factor for assumption set `case`:
/// `β_a = 1 − γ(1−γ)α′η`, `β_b = 1 − 2γμη`.
///
/// `eps2 = None` selects the ε-chain with the largest `ε′` on the default grid.
pub fn theoretical_beta(
    n: usize,
    gamma: f64,
    mu: f64,
    lip: f64,
    case: Case,
    eps2: Option<f64>,
) -> Result<BetaCertificate> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return usage(format!("gamma must lie in (0, 1), got {gamma}"));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return usage(format!("mu must be positive, got {mu}"));
    }
    if !(lip > 0.0) || !lip.is_finite() {
        return usage(format!("Lipschitz constant must be positive, got {lip}"));
    }
    if case == Case::B && mu > lip {
        return usage(format!(
            "a mu-strongly monotone L-Lipschitz operator needs mu <= L, got mu={mu}, L={lip}"
        ));
    }
    let chain = match eps2 {
        Some(e) => epsilon_chain(n, e)?,
        None => best_epsilon_chain(n)?,
    };
    let eta = eta(lip, chain.eps_prime);
    let (alpha_prime, beta) = match case {
        Case::A => {
            let a = alpha_chain(n, gamma, mu)?.alpha_prime;
            (Some(a), 1.0 - gamma * (1.0 - gamma) * a * eta)
        }
        Case::B => (None, 1.0 - 2.0 * gamma * mu * eta),
    };
    Ok(BetaCertificate {
        case,
        eps_prime: chain.eps_prime,
        alpha_prime,
        eta,
        beta,
    })
}

/// Least-squares fit of `log d_k ≈ a + k log r` over a trace tail.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateReport {
    pub fitted_rate: f64,
    pub r_squared: f64,
    pub points: usize,
    pub theoretical_beta: Option<f64>,
    pub certificate: Option<BetaCertificate>,
}

impl RateReport {
    pub fn with_certificate(mut self, cert: BetaCertificate) -> Self {
        self.theoretical_beta = Some(cert.beta);
        self.certificate = Some(cert);
        self
    }
}

/// Minimum number of positive distances [`fit_rate`] needs after dropping
/// the transient.
pub const MIN_FIT_POINTS: usize = 10;

/// Fits the R-linear rate of the reference distances recorded in `trace`.
///
/// The first 10% of the records are skipped as transient; zero distances
/// are ignored.
pub fn fit_rate(trace: &IterationTrace) -> Result<RateReport> {
    let points: Vec<(f64, f64)> = trace
        .records
        .iter()
        .filter_map(|r| r.dist_to_ref.map(|d| (r.k as f64, d)))
        .collect();
    fit_rate_points(&points)
}

/// Same as [`fit_rate`] for a bare sequence `d_1, d_2, …`.
pub fn fit_rate_sequence(distances: &[f64]) -> Result<RateReport> {
    let points: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .map(|(i, &d)| ((i + 1) as f64, d))
        .collect();
    fit_rate_points(&points)
}

fn fit_rate_points(points: &[(f64, f64)]) -> Result<RateReport> {
    let skip = points.len() / 10;
    let tail: Vec<(f64, f64)> = points[skip..]
        .iter()
        .filter(|(_, d)| *d > 0.0 && d.is_finite())
        .map(|&(k, d)| (k, d.ln()))
        .collect();
    if tail.len() < MIN_FIT_POINTS {
        return usage(format!(
            "rate fit needs at least {MIN_FIT_POINTS} positive distances, got {}",
            tail.len()
        ));
    }
    let (slope, r_squared) = linear_fit(&tail);
    Ok(RateReport {
        fitted_rate: slope.exp(),
        r_squared,
        points: tail.len(),
        theoretical_beta: None,
        certificate: None,
    })
}

/// Ordinary least squares `y ≈ a + b x`; returns `(b, r²)`. A constant
/// response is fitted exactly and reports `r² = 1`.
pub(crate) fn linear_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let r_squared = if syy <= 1e-30 * n {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    (slope, r_squared)
}

/// Primal-dual gap
/// `G(u,v) = (∑f_i(u) + ⟨Cu, v*⟩ − ∑g_i*(v*)) − (∑f_i(u*) + ⟨Cu*, v⟩ − ∑g_i*(v))`.
///
/// Non-negative when `(u*, v*)` is the saddle point; zero at `(u*, v*)`.
pub fn primal_dual_gap(u: &HVector, v: &HVector, ustar: &HVector, vstar: &HVector, problem: &PdProblem) -> Result<f64> {
    let c = problem.c();
    check_dim(c.dim_in(), u.dim())?;
    check_dim(c.dim_in(), ustar.dim())?;
    check_dim(c.dim_out(), v.dim())?;
    check_dim(c.dim_out(), vstar.dim())?;
    let f_sum = |x: &HVector| -> Result<f64> { problem.f().iter().map(|f| f.value(x)).sum() };
    let g_conj_sum = |y: &HVector| -> Result<f64> { problem.g().iter().map(|g| g.conjugate_value(y)).sum() };
    let cu = HVector::raw(c.apply(u.as_slice()));
    let custar = HVector::raw(c.apply(ustar.as_slice()));
    let first = f_sum(u)? + cu.dot(vstar) - g_conj_sum(vstar)?;
    let second = f_sum(ustar)? + custar.dot(v) - g_conj_sum(v)?;
    Ok(first - second)
}

/// Reported SNR when the restoration is exact.
pub const SNR_CAP_DB: f64 = 300.0;

/// `20·log₁₀(‖original‖ / ‖original − restored‖)` in dB, capped at
/// [`SNR_CAP_DB`].
pub fn snr(original: &ImageGray, restored: &ImageGray) -> Result<f64> {
    check_dim(original.side(), restored.side())?;
    let signal = original.pixels().iter().map(|x| x * x).sum::<f64>().sqrt();
    if signal == 0.0 {
        return usage("SNR needs a non-zero original image");
    }
    let err = original
        .pixels()
        .iter()
        .zip(restored.pixels())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((20.0 * (signal / err).log10()).min(SNR_CAP_DB))
}

/// Largest observed `‖Tz − Tz̄‖ / ‖z − z̄‖` over the given pairs.
pub fn max_one_step_ratio(problem: &SplitProblem, pairs: &[(LiftedPoint, LiftedPoint)]) -> Result<f64> {
    let mut worst = 0.0f64;
    for (z, zbar) in pairs {
        let den = z.distance(zbar);
        if den == 0.0 {
            continue;
        }
        let (tz, _) = mt_apply(problem, z)?;
        let (tzbar, _) = mt_apply(problem, zbar)?;
        worst = worst.max(tz.distance(&tzbar) / den);
    }
    Ok(worst)
}

/// Iterates `T_MT` from `z0` until `‖Tz − z‖ ≤ 1e−14·(1 + ‖z‖)` or
/// `max_iter` steps; returns the last iterate and the number of steps.
pub fn reference_fixed_point(problem: &SplitProblem, z0: LiftedPoint, max_iter: usize) -> Result<(LiftedPoint, usize)> {
    let mut z = z0;
    for k in 1..=max_iter {
        let (next, _) = mt_apply(problem, &z)?;
        let change = next.distance(&z);
        let scale = 1.0 + next.blocks().iter().map(HVector::norm_sq).sum::<f64>().sqrt();
        z = next;
        if change <= 1e-14 * scale {
            return Ok((z, k));
        }
    }
    Ok((z, max_iter))
}

/// Empirical contraction study of one affine family.
#[derive(Clone, Debug, Serialize)]
pub struct FamilyStudy {
    pub gamma: f64,
    /// Present when the family meets assumption set (a) or (b).
    pub certificate: Option<BetaCertificate>,
    /// Largest sampled `‖Tz − Tz̄‖ / ‖z − z̄‖`.
    pub max_ratio: f64,
    /// Rate fitted to the distance trace of a run from zero, if the run was
    /// long enough to fit.
    pub rate: Option<RateReport>,
    pub iterations: usize,
    /// `‖x₁* − x_direct‖` between the limit shadow and the direct solve.
    pub direct_error: Option<f64>,
}

/// Samples one-step ratios on `pairs` random pairs, then runs `T_MT` from
/// zero to `tol` against a high-accuracy reference and fits the rate.
pub fn study_affine_family(
    fam: &AffineFamily,
    gamma: f64,
    pairs: usize,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<FamilyStudy> {
    let problem = fam.problem(gamma)?;
    let n = problem.n();
    let d = problem.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| LiftedPoint::new((0..n - 1).map(|_| HVector::raw(normal_vec(rng, d))).collect());
    let samples = (0..pairs)
        .map(|_| Ok((draw(&mut rng)?, draw(&mut rng)?)))
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = max_one_step_ratio(&problem, &samples)?;

    let certificate = match fam.case {
        Some(case) => Some(theoretical_beta(n, gamma, fam.mu, fam.lip, case, None)?),
        None => None,
    };
    let (zstar, _) = reference_fixed_point(&problem, problem.zero_point(), 20 * max_iter)?;
    let opts = DriveOptions::new(tol, max_iter);
    let (_, trace) = run_mt(&problem, problem.zero_point(), &opts, Some(&zstar))?;
    let rate = fit_rate(&trace).ok().map(|r| match &certificate {
        Some(c) => r.with_certificate(c.clone()),
        None => r,
    });
    let direct_error = match fam.direct_zero() {
        Ok(x) => {
            let x1 = mt_shadow(&problem, &zstar)?.xs.swap_remove(0);
            Some(x1.dist(&HVector::raw(x.as_slice().to_vec())))
        }
        Err(_) => None,
    };
    Ok(FamilyStudy {
        gamma,
        certificate,
        max_ratio,
        rate,
        iterations: trace.iterations(),
        direct_error,
    })
}
