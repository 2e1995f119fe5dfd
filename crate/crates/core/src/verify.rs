//! Named property suites run by `minlift verify`.
//!
//! Each suite samples seeded random instances, checks one family of
//! invariants and reports a single pass/fail outcome with a short detail
//! line. The `corrupt_prox` switch perturbs every cataloged prox by a small
//! offset so the negative path can be exercised.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::diagnostics::{
    alpha_chain, best_epsilon_chain, check_descent_inequality, descent_tolerance, eps2_grid, epsilon_chain, fit_rate,
    study_affine_family, theoretical_beta,
};
use crate::error::{usage, Result};
use crate::families::{case_family, cone_triple, random_family, zero_triple, Case};
use crate::hvector::HVector;
use crate::imaging::{add_gaussian_noise, denoise, shepp_logan, DenoiseAlgorithm, DenoiseParams, DiscreteGradient};
use crate::linear::{operator_norm, DenseMatrix, LinearMap};
use crate::operators::{prox_conjugate, resolvent_skew, CustomProx, OperatorDesc, ProxSpec};
use crate::primal_dual::{
    from_lifted, pd_step, run_fixed, run_primal_dual, split_problem, to_lifted, PdProblem, PdState, ReferenceMode,
};
use crate::random::normal_vec;
use crate::splitting::{
    dr_apply, mt_apply, mt_fixed_point_residual, DriveOptions, IterState, LiftedPoint, SplitProblem,
};

#[derive(Clone, Copy, Debug)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Shift every cataloged prox by `1e−3`; the Moreau and oracle suites
    /// must then fail.
    pub corrupt_prox: bool,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            seed: 20240601,
            corrupt_prox: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub checks: usize,
    pub detail: String,
}

type SuiteFn = fn(&VerifyConfig) -> Result<SuiteOutcome>;

const SUITES: &[(&str, SuiteFn)] = &[
    ("moreau", suite_moreau),
    ("prox-oracle", suite_prox_oracle),
    ("firm-nonexpansive", suite_firm_nonexpansive),
    ("skew-resolvent", suite_skew_resolvent),
    ("dr-reduction", suite_dr_reduction),
    ("consensus", suite_consensus),
    ("nonexpansive", suite_nonexpansive),
    ("counterexamples", suite_counterexamples),
    ("descent", suite_descent),
    ("chains", suite_chains),
    ("beta-range", suite_beta_range),
    ("contraction", suite_contraction),
    ("pd-equivalence", suite_pd_equivalence),
    ("pd-optimality", suite_pd_optimality),
    ("pd-rate", suite_pd_rate),
    ("gradient", suite_gradient),
    ("norm-bound", suite_norm_bound),
    ("denoise-end-to-end", suite_denoise),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

pub fn run_suite(name: &str, cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    match SUITES.iter().find(|(n, _)| *n == name) {
        Some((_, f)) => f(cfg),
        None => usage(format!(
            "unknown suite '{name}'; available: {}",
            suite_names().join(", ")
        )),
    }
}

/// Runs every suite, or only `filter` when given.
pub fn run_suites(filter: Option<&str>, cfg: &VerifyConfig) -> Result<Vec<SuiteOutcome>> {
    match filter {
        Some(name) => Ok(vec![run_suite(name, cfg)?]),
        None => SUITES.iter().map(|(_, f)| f(cfg)).collect(),
    }
}

/// Counts checks and keeps the first failure message.
struct Tally {
    name: &'static str,
    checks: usize,
    failures: usize,
    first_failure: Option<String>,
    worst: f64,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            checks: 0,
            failures: 0,
            first_failure: None,
            worst: 0.0,
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(msg());
            }
        }
    }

    /// `err ≤ tol`, tracking the worst error.
    fn close(&mut self, err: f64, tol: f64, what: &str) {
        self.worst = self.worst.max(err);
        self.check(err <= tol, || format!("{what}: error {err:.3e} > {tol:.1e}"));
    }

    fn finish(self) -> SuiteOutcome {
        let detail = match self.first_failure {
            None => format!("{} checks, worst error {:.2e}", self.checks, self.worst),
            Some(f) => format!("{} of {} checks failed; first: {f}", self.failures, self.checks),
        };
        SuiteOutcome {
            name: self.name,
            passed: self.failures == 0,
            checks: self.checks,
            detail,
        }
    }
}

fn rng_for(cfg: &VerifyConfig, salt: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

fn randn(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> HVector {
    HVector::raw(normal_vec(rng, d).into_iter().map(|x| scale * x).collect())
}

fn corrupt(spec: ProxSpec) -> ProxSpec {
    let name = format!("corrupted {}", spec.tag());
    let (p, v, c) = (spec.clone(), spec.clone(), spec);
    ProxSpec::Custom(CustomProx {
        name,
        prox: Arc::new(move |w: &HVector| p.prox(w).expect("catalog prox").map(|x| x + 1e-3)),
        value: Some(Arc::new(move |u: &HVector| v.value(u).unwrap_or(f64::INFINITY))),
        conjugate_value: Some(Arc::new(move |y: &HVector| {
            c.conjugate_value(y).unwrap_or(f64::INFINITY)
        })),
    })
}

/// A cataloged function on `ℝ^d` with an independently coded prox of its
/// conjugate.
struct CatalogEntry {
    spec: ProxSpec,
    conj_prox: Box<dyn Fn(&HVector) -> HVector>,
}

fn catalog(rng: &mut ChaCha8Rng, d: usize, corrupted: bool) -> Vec<CatalogEntry> {
    let mut out: Vec<CatalogEntry> = Vec::new();
    out.push(CatalogEntry {
        spec: ProxSpec::Zero,
        conj_prox: Box::new(move |w| HVector::zeros(w.dim())),
    });
    let b = randn(rng, d, 1.0);
    let bc = b.clone();
    out.push(CatalogEntry {
        spec: ProxSpec::quadratic_shift(b),
        // f* = ½‖y‖² + ⟨y, b⟩
        conj_prox: Box::new(move |w| (w - &bc).scaled(0.5)),
    });
    let lambda = rng.gen_range(0.05..5.0);
    out.push(CatalogEntry {
        spec: ProxSpec::ScaledSquare { lambda },
        conj_prox: Box::new(move |w| w.scaled(lambda / (1.0 + lambda))),
    });
    if d % 2 == 0 {
        for lambda3 in [0.0, rng.gen_range(0.01..2.0)] {
            let lambda2 = rng.gen_range(0.05..2.0);
            out.push(CatalogEntry {
                spec: ProxSpec::Iso { lambda2, lambda3 },
                // radial prox of dist²(·, B_λ₂)/(2λ₃), or projection when λ₃ = 0
                conj_prox: Box::new(move |w| {
                    let m = w.dim() / 2;
                    let mut out = w.clone();
                    for i in 0..m {
                        let r = w[i].hypot(w[m + i]);
                        if r > lambda2 {
                            let target = (lambda3 * r + lambda2) / (1.0 + lambda3);
                            let s = target / r;
                            let o = out.as_mut_slice();
                            o[i] *= s;
                            o[m + i] *= s;
                        }
                    }
                    out
                }),
            });
        }
    }
    if corrupted {
        for e in &mut out {
            e.spec = corrupt(e.spec.clone());
        }
    }
    out
}

fn suite_moreau(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("moreau");
    let mut rng = rng_for(cfg, 1);
    for _ in 0..50 {
        let d = 2 * rng.gen_range(1..5);
        for e in catalog(&mut rng, d, cfg.corrupt_prox) {
            let w = randn(&mut rng, d, 2.0);
            let p = e.spec.prox(&w)?;
            let q = prox_conjugate(&e.spec, &w)?;
            t.close((&p + &q).dist(&w), 1e-12 * (1.0 + w.norm()), "decomposition");
            let oracle = (e.conj_prox)(&w);
            t.close(q.dist(&oracle), 1e-10 * (1.0 + w.norm()), e.spec.tag());
        }
    }
    Ok(t.finish())
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..120 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Minimizes `f(u) + ½‖w − u‖²` on `ℝ^d`, `d ≤ 2`, by (nested) golden-section search.
fn brute_prox(spec: &ProxSpec, w: &HVector) -> Result<HVector> {
    let obj = |u: &HVector| spec.value(u).unwrap_or(f64::INFINITY) + 0.5 * u.dist(w).powi(2);
    let r = 2.0 * w.norm() + 2.0;
    match w.dim() {
        1 => {
            let x = golden_min(|x| obj(&HVector::raw(vec![x])), w[0] - r, w[0] + r);
            Ok(HVector::raw(vec![x]))
        }
        2 => {
            let inner = |x: f64| golden_min(|y| obj(&HVector::raw(vec![x, y])), w[1] - r, w[1] + r);
            let x = golden_min(|x| obj(&HVector::raw(vec![x, inner(x)])), w[0] - r, w[0] + r);
            Ok(HVector::raw(vec![x, inner(x)]))
        }
        d => usage(format!("brute-force prox supports d <= 2, got {d}")),
    }
}

fn suite_prox_oracle(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("prox-oracle");
    let mut rng = rng_for(cfg, 2);
    for _ in 0..8 {
        for d in [1, 2] {
            for e in catalog(&mut rng, d, cfg.corrupt_prox) {
                let w = randn(&mut rng, d, 1.5);
                let p = e.spec.prox(&w)?;
                let b = brute_prox(&e.spec, &w)?;
                t.close(p.dist(&b), 1e-6, e.spec.tag());
            }
        }
    }
    Ok(t.finish())
}

fn resolvent_catalog(rng: &mut ChaCha8Rng, cfg: &VerifyConfig) -> Result<OperatorDesc> {
    let d = rng.gen_range(1..=8);
    if rng.gen_bool(0.2) {
        let d1 = rng.gen_range(1..=4);
        let d2 = 2 * rng.gen_range(1..=2);
        let mut f = catalog(rng, d1, cfg.corrupt_prox);
        let mut g = catalog(rng, d2, cfg.corrupt_prox);
        let fi = rng.gen_range(0..f.len());
        let gi = rng.gen_range(0..g.len());
        return OperatorDesc::primal_dual_pair(f.swap_remove(fi).spec, g.swap_remove(gi).spec, d1, d2, 0.0, None);
    }
    crate::families::random_operator(rng, d)
}

fn suite_firm_nonexpansive(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("firm-nonexpansive");
    let mut rng = rng_for(cfg, 3);
    for _ in 0..1000 {
        let op = resolvent_catalog(&mut rng, cfg)?;
        let d = op.dim();
        let x = randn(&mut rng, d, 3.0);
        let y = randn(&mut rng, d, 3.0);
        let (jx, jy) = (op.resolvent(&x)?, op.resolvent(&y)?);
        let lhs = jx.dist(&jy).powi(2) + (&x - &jx).dist(&(&y - &jy)).powi(2);
        let rhs = x.dist(&y).powi(2);
        t.close((lhs - rhs).max(0.0) / rhs, 1e-12, &format!("{:?}", op.kind()));
    }
    Ok(t.finish())
}

fn random_dense(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Result<DenseMatrix> {
    DenseMatrix::new(rows, cols, normal_vec(rng, rows * cols))
}

fn suite_skew_resolvent(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("skew-resolvent");
    let mut rng = rng_for(cfg, 4);
    for _ in 0..200 {
        let (d1, d2) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let c = random_dense(&mut rng, d2, d1)?;
        let p = randn(&mut rng, d1, 2.0);
        let q = randn(&mut rng, d2, 2.0);
        let (u, v) = resolvent_skew(&p, &q, &c)?;
        // u + C*v = p, v − Cu = q
        let top = &(&u + &HVector::raw(c.adjoint(v.as_slice()))) - &p;
        let bottom = &(&v - &HVector::raw(c.apply(u.as_slice()))) - &q;
        let scale = (p.norm_sq() + q.norm_sq()).sqrt();
        t.close(top.norm().max(bottom.norm()) / scale, 1e-10, "block equations");
    }
    Ok(t.finish())
}

fn suite_dr_reduction(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("dr-reduction");
    let mut rng = rng_for(cfg, 5);
    for _ in 0..1000 {
        let d = rng.gen_range(1..=6);
        let ops = random_family(&mut rng, 2, d)?;
        let gamma = rng.gen_range(0.01..0.99);
        let z = randn(&mut rng, d, 3.0);
        let problem = SplitProblem::new(ops.clone(), gamma)?;
        let (zplus, _) = mt_apply(&problem, &LiftedPoint::new(vec![z.clone()])?)?;
        let dr = dr_apply(&ops[0], &ops[1], &z)?;
        let relaxed = z.scaled(1.0 - gamma).add_scaled(gamma, &dr);
        t.close(
            zplus.blocks()[0].dist(&relaxed),
            1e-12 * (1.0 + z.norm()),
            "relaxed step",
        );
    }
    Ok(t.finish())
}

fn suite_consensus(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("consensus");
    let mut rng = rng_for(cfg, 6);
    for _ in 0..30 {
        let n = rng.gen_range(2..=5);
        let d = rng.gen_range(1..=6);
        let case = if rng.gen_bool(0.5) { Case::A } else { Case::B };
        let fam = case_family(case, n, d, 1.0, 2.0, rng.gen())?;
        let problem = fam.problem(0.5)?;
        let mut z = problem.zero_point();
        let mut res = mt_fixed_point_residual(&problem, &z)?;
        for _ in 0..20000 {
            if res.residual <= 1e-10 {
                break;
            }
            z = mt_apply(&problem, &z)?.0;
            res = mt_fixed_point_residual(&problem, &z)?;
        }
        t.check(res.residual <= 1e-10, || {
            format!("no fixed point reached (residual {:.2e})", res.residual)
        });
        if res.residual <= 1e-10 {
            t.close(res.consensus, 1e-8, "consensus");
            t.close(res.operator_sum, 1e-8, "operator sum");
        }
    }
    Ok(t.finish())
}

fn random_pair(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Result<(LiftedPoint, LiftedPoint)> {
    let scale = [0.1, 1.0, 10.0][rng.gen_range(0..3)];
    let draw = |rng: &mut ChaCha8Rng| LiftedPoint::new((0..n - 1).map(|_| randn(rng, d, scale)).collect());
    Ok((draw(rng)?, draw(rng)?))
}

fn suite_nonexpansive(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("nonexpansive");
    let mut rng = rng_for(cfg, 7);
    for _ in 0..500 {
        let n = rng.gen_range(2..=6);
        let d = rng.gen_range(1..=6);
        let ops = random_family(&mut rng, n, d)?
            .into_iter()
            .map(|o| o.with_mu(0.0))
            .collect();
        let problem = SplitProblem::new(ops, rng.gen_range(0.05..0.95))?;
        let (z, zbar) = random_pair(&mut rng, n, d)?;
        let (tz, _) = mt_apply(&problem, &z)?;
        let (tzbar, _) = mt_apply(&problem, &zbar)?;
        let ratio = tz.distance(&tzbar) / z.distance(&zbar);
        t.close((ratio - 1.0).max(0.0), 1e-12, "Lipschitz ratio");
    }
    Ok(t.finish())
}

fn suite_counterexamples(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("counterexamples");
    let mut rng = rng_for(cfg, 8);
    let lifted = |a: f64, b: f64| LiftedPoint::new(vec![HVector::raw(vec![a]), HVector::raw(vec![b])]);
    for gamma in [0.1, 0.5, 0.9] {
        let zero = zero_triple(gamma)?;
        let mut ts: Vec<f64> = vec![0.0, 1.0, -1.0, 1e6, -3.5e-7];
        ts.extend((0..20).map(|_| rng.gen_range(-100.0..100.0)));
        for &s in &ts {
            let z = lifted(s, s)?;
            let res = mt_fixed_point_residual(&zero, &z)?.residual;
            t.close(res, 1e-14, "zero triple (t, t)");
        }
        let mu = rng.gen_range(0.1..3.0);
        let cones = cone_triple(mu, gamma)?;
        let mut ray: Vec<f64> = vec![0.0, -1.0, -1e6];
        ray.extend((0..20).map(|_| -rng.gen_range(0.0..100.0)));
        for &s in &ray {
            let z = lifted(s, 0.0)?;
            let res = mt_fixed_point_residual(&cones, &z)?.residual;
            t.close(res, 1e-14, "cone triple (t, 0)");
        }
        // two distinct fixed points rule out a contraction
        t.check(ts.len() >= 2 && ray.len() >= 2, || "fewer than two fixed points".into());
    }
    Ok(t.finish())
}

fn suite_descent(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("descent");
    let mut rng = rng_for(cfg, 9);
    let mut worst_rel = f64::INFINITY;
    for _ in 0..1000 {
        let n = rng.gen_range(2..=6);
        let d = rng.gen_range(1..=8);
        let ops = random_family(&mut rng, n, d)?;
        let problem = SplitProblem::new(ops, rng.gen_range(0.01..0.99))?;
        let (z, zbar) = random_pair(&mut rng, n, d)?;
        let slack = check_descent_inequality(&problem, &z, &zbar)?;
        let tol = descent_tolerance(&z, &zbar);
        worst_rel = worst_rel.min(slack / -tol);
        t.check(slack >= tol, || format!("slack {slack:.3e} below {tol:.3e}"));
    }
    let mut out = t.finish();
    if out.passed {
        out.detail = format!("{} draws, smallest slack/scale {:.2e}", out.checks, worst_rel * 1e-10);
    }
    Ok(out)
}

fn suite_chains(_cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("chains");
    for n in 2..=10 {
        for eps2 in eps2_grid() {
            let e = epsilon_chain(n, eps2)?.eps_prime;
            t.check(e > 0.0, || format!("eps' = {e} for n={n}, eps2={eps2}"));
        }
        let best = best_epsilon_chain(n)?.eps_prime;
        t.check(best > 0.0 && best <= 1.0, || format!("best eps' = {best} for n={n}"));
        for k in 1..=9 {
            let gamma = k as f64 / 10.0;
            for mu in [0.1, 1.0, 10.0] {
                let a = alpha_chain(n, gamma, mu)?.alpha_prime;
                t.check(a > 0.0, || format!("alpha' = {a} for n={n}, gamma={gamma}, mu={mu}"));
            }
        }
    }
    Ok(t.finish())
}

fn suite_beta_range(_cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("beta-range");
    for n in 2..=10 {
        for k in 1..=9 {
            let gamma = k as f64 / 10.0;
            for mu in [0.1, 1.0, 10.0] {
                for lip in [0.1, 1.0, 10.0, 100.0] {
                    for case in [Case::A, Case::B] {
                        if case == Case::B && mu > lip {
                            continue;
                        }
                        let b = theoretical_beta(n, gamma, mu, lip, case, None)?.beta;
                        t.check(b > 0.0 && b < 1.0, || {
                            format!("beta = {b} for n={n}, gamma={gamma}, mu={mu}, L={lip}, {case:?}")
                        });
                    }
                }
            }
        }
    }
    Ok(t.finish())
}

fn suite_contraction(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("contraction");
    let mut rng = rng_for(cfg, 10);
    let mut margin = f64::INFINITY;
    for case in [Case::A, Case::B] {
        for gamma in [0.3, 0.5, 0.7] {
            for _ in 0..4 {
                let fam = case_family(case, 3, 20, 1.0, 2.0, rng.gen())?;
                let study = study_affine_family(&fam, gamma, 20, 1e-10, 20000, rng.gen())?;
                let beta = study.certificate.as_ref().map_or(1.0, |c| c.beta);
                margin = margin.min(beta - study.max_ratio);
                t.check(study.max_ratio <= beta + 1e-9, || {
                    format!("{case:?} gamma={gamma}: ratio {:.6} > beta {beta:.6}", study.max_ratio)
                });
                match &study.rate {
                    Some(r) => t.check(r.fitted_rate <= beta + 0.02 && r.r_squared >= 0.95, || {
                        format!(
                            "{case:?} gamma={gamma}: rate {:.4}, r2 {:.4}, beta {beta:.4}",
                            r.fitted_rate, r.r_squared
                        )
                    }),
                    None => t.check(false, || format!("{case:?} gamma={gamma}: trace too short to fit")),
                }
            }
        }
    }
    let mut out = t.finish();
    if out.passed {
        out.detail = format!("{} checks, smallest beta - ratio {margin:.3e}", out.checks);
    }
    Ok(out)
}

fn random_pd_problem(rng: &mut ChaCha8Rng, n: usize) -> Result<PdProblem> {
    let d1 = rng.gen_range(1..=4);
    let d2 = 2 * rng.gen_range(1..=2);
    let c = random_dense(rng, d2, d1)?;
    let pick = |rng: &mut ChaCha8Rng, d: usize| {
        let mut cat = catalog(rng, d, false);
        let i = rng.gen_range(0..cat.len());
        cat.swap_remove(i).spec
    };
    let f = (0..n - 1).map(|_| pick(rng, d1)).collect();
    let g = (0..n - 1).map(|_| pick(rng, d2)).collect();
    PdProblem::new(Arc::new(c), f, g, 1.0, 1.0, 1.0, 1.0, rng.gen_range(0.05..0.95))
}

fn suite_pd_equivalence(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("pd-equivalence");
    let mut rng = rng_for(cfg, 11);
    for n in 2..=4 {
        for _ in 0..100 {
            let p = random_pd_problem(&mut rng, n)?;
            let sp = split_problem(&p)?;
            let state = PdState {
                p: (0..n - 1).map(|_| randn(&mut rng, p.primal_dim(), 2.0)).collect(),
                q: (0..n - 1).map(|_| randn(&mut rng, p.dual_dim(), 2.0)).collect(),
            };
            let (next, _) = pd_step(&p, &state)?;
            let (z, _) = mt_apply(&sp, &to_lifted(&state)?)?;
            let back = from_lifted(&z, p.primal_dim())?;
            let scale = 1.0 + state.distance(&p.zero_state());
            t.close(next.distance(&back) / scale, 1e-12, &format!("n={n}"));
        }
    }
    Ok(t.finish())
}

fn suite_pd_optimality(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("pd-optimality");
    let mut rng = rng_for(cfg, 12);
    for _ in 0..10 {
        // min ½(u−b)² + (a/2)u² + (g₂□g₃)(cu), g_i = (l_i/2)v²:
        // g₂□g₃ = (h/2)v² with 1/h = 1/l₂ + 1/l₃, so u* = b / (1 + a + h c²)
        let b = rng.gen_range(-2.0..2.0);
        let a = rng.gen_range(0.1..2.0);
        let c = rng.gen_range(-2.0..2.0);
        let (l2, l3) = (rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0));
        let h = 1.0 / (1.0 / l2 + 1.0 / l3);
        let expected = b / (1.0 + a + h * c * c);
        let p = PdProblem::new(
            Arc::new(DenseMatrix::scalar(c)),
            vec![
                ProxSpec::quadratic_shift(HVector::raw(vec![b])),
                ProxSpec::scaled_square(a)?,
            ],
            vec![ProxSpec::scaled_square(l2)?, ProxSpec::scaled_square(l3)?],
            1.0,
            a,
            l2,
            l3,
            0.5,
        )?;
        let (_, sh) = run_fixed(&p, &p.zero_state(), 3000)?;
        for u in &sh.u {
            t.close((u[0] - expected).abs(), 1e-8, "closed-form optimum");
        }
    }
    Ok(t.finish())
}

fn suite_pd_rate(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("pd-rate");
    let mut rng = rng_for(cfg, 13);
    for _ in 0..5 {
        let d1 = 6;
        let c = random_dense(&mut rng, 4, d1)?;
        let p = PdProblem::new(
            Arc::new(c),
            vec![
                ProxSpec::quadratic_shift(randn(&mut rng, d1, 1.0)),
                ProxSpec::scaled_square(0.5)?,
            ],
            vec![ProxSpec::iso(0.3, 0.5)?, ProxSpec::scaled_square(2.0)?],
            1.0,
            0.5,
            0.5,
            2.0,
            0.9,
        )?;
        let opts = DriveOptions::new(1e-11, 5000);
        let run = run_primal_dual(&p, p.zero_state(), &opts, ReferenceMode::Auto)?;
        let r = fit_rate(&run.trace)?;
        t.check(r.fitted_rate < 1.0 && r.r_squared >= 0.95, || {
            format!("rate {:.4}, r2 {:.4}", r.fitted_rate, r.r_squared)
        });
    }
    Ok(t.finish())
}

fn suite_gradient(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("gradient");
    let mut rng = rng_for(cfg, 14);
    for m in 1..=4 {
        let d = DiscreteGradient::new(m)?;
        // dense D column by column from unit vectors
        let cols: Vec<Vec<f64>> = (0..m * m)
            .map(|j| {
                let mut e = vec![0.0; m * m];
                e[j] = 1.0;
                d.apply(&e)
            })
            .collect();
        let dense = nalgebra::DMatrix::from_fn(2 * m * m, m * m, |i, j| cols[j][i]);
        let u = normal_vec(&mut rng, m * m);
        let y = normal_vec(&mut rng, 2 * m * m);
        let du = &dense * nalgebra::DVector::from_column_slice(&u);
        let dty = dense.transpose() * nalgebra::DVector::from_column_slice(&y);
        let lhs: f64 = d.apply(&u).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = u.iter().zip(d.adjoint(&y)).map(|(a, b)| a * b).sum();
        t.close((lhs - rhs).abs(), 1e-12, "adjoint identity");
        let err_t = d
            .adjoint(&y)
            .iter()
            .zip(dty.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        t.close(err_t, 1e-9, "dense adjoint");
        let err = d
            .apply(&u)
            .iter()
            .zip(du.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        t.close(err, 1e-9, "dense gradient");
        let a = nalgebra::DMatrix::identity(m * m, m * m) + dense.transpose() * &dense;
        let exact = a.lu().solve(&nalgebra::DVector::from_column_slice(&u)).expect("SPD");
        let x = d.solve_identity_plus_dtd(&u)?;
        let err = x
            .iter()
            .zip(exact.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        t.close(err, 1e-9, "dense solve");
    }
    Ok(t.finish())
}

fn suite_norm_bound(_cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("norm-bound");
    for m in [8, 16, 32, 64] {
        let d = DiscreteGradient::new(m)?;
        let norm = operator_norm(&d, 200, 1e-10);
        t.check(norm * norm <= 8.0, || format!("M={m}: ||D||^2 = {}", norm * norm));
    }
    Ok(t.finish())
}

fn suite_denoise(cfg: &VerifyConfig) -> Result<SuiteOutcome> {
    let mut t = Tally::new("denoise-end-to-end");
    let clean = shepp_logan(24)?;
    let params = DenoiseParams {
        seed: cfg.seed,
        ..DenoiseParams::default()
    };
    let noisy = add_gaussian_noise(&clean, params.noise_sigma, params.seed)?;
    for alg in [DenoiseAlgorithm::Mt, DenoiseAlgorithm::DrProduct] {
        let a = denoise(&noisy, &params, alg, ReferenceMode::None)?;
        let b = denoise(&noisy, &params, alg, ReferenceMode::None)?;
        t.check(a.restored == b.restored, || {
            format!("{} not deterministic", alg.as_str())
        });
        t.check(a.restored.pixels().iter().all(|p| (0.0..=1.0).contains(p)), || {
            format!("{} output outside [0, 1]", alg.as_str())
        });
    }
    Ok(t.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite_is_usage_error() {
        assert!(run_suite("nope", &VerifyConfig::default()).is_err());
    }

    #[test]
    fn fast_suites_pass() {
        let cfg = VerifyConfig::default();
        for name in [
            "moreau",
            "prox-oracle",
            "skew-resolvent",
            "counterexamples",
            "chains",
            "beta-range",
        ] {
            let out = run_suite(name, &cfg).unwrap();
            assert!(out.passed, "{name}: {}", out.detail);
        }
    }

    #[test]
    fn corruption_is_detected() {
        let cfg = VerifyConfig {
            corrupt_prox: true,
            ..VerifyConfig::default()
        };
        assert!(!run_suite("moreau", &cfg).unwrap().passed);
        assert!(!run_suite("prox-oracle", &cfg).unwrap().passed);
    }
}
