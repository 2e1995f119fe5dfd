//! The primal-dual method obtained by specializing `T_MT` to
//!
//! `min_u  f₂(u) + … + f_n(u) + (g₂ □ … □ g_n)(Cu)`
//!
//! on `H₁ × H₂`. The first operator is the skew block `[[0, C*], [−C, 0]]`,
//! the remaining ones are `(∂f_i, ∂g_i*)`. A lifted point `z_i` is encoded
//! as the concatenation `(p_i, q_i)`.

use std::sync::Arc;

use serde::Serialize;

use crate::diagnostics::primal_dual_gap;
use crate::error::{check_dim, usage, Result};
use crate::hvector::HVector;
use crate::linear::{operator_norm, LinearMap};
use crate::operators::{prox_conjugate, resolvent_skew, OperatorDesc, ProxSpec};
use crate::splitting::{drive, DriveOptions, IterState, IterationTrace, LiftedPoint, SplitProblem, Step};

/// Power-iteration budget used to certify `‖C‖`.
pub const NORM_POWER_STEPS: usize = 200;
pub const NORM_POWER_TOL: f64 = 1e-10;

/// Smallest reference run; longer runs use ten times the stopping index.
pub const MIN_REFERENCE_ITERATIONS: usize = 200;

#[derive(Clone, Debug)]
pub struct PdProblem {
    c: Arc<dyn LinearMap>,
    c_norm: f64,
    f: Vec<ProxSpec>,
    g: Vec<ProxSpec>,
    /// Lipschitz constant of `∇f_i`, `2 ≤ i ≤ n−1`
    pub alpha: f64,
    /// strong convexity of `f_n`
    pub sigma: f64,
    /// strong convexity of `g_i`, `2 ≤ i ≤ n−1`
    pub tau: f64,
    /// Lipschitz constant of `∇g_n`
    pub beta_g: f64,
    pub gamma: f64,
}

impl PdProblem {
    /// `f` and `g` hold `f₂..f_n` and `g₂..g_n`. `‖C‖` is estimated by power
    /// iteration and cached.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        c: Arc<dyn LinearMap>,
        f: Vec<ProxSpec>,
        g: Vec<ProxSpec>,
        alpha: f64,
        sigma: f64,
        tau: f64,
        beta_g: f64,
        gamma: f64,
    ) -> Result<Self> {
        let c_norm = operator_norm(c.as_ref(), NORM_POWER_STEPS, NORM_POWER_TOL);
        Self::with_norm(c, c_norm, f, g, alpha, sigma, tau, beta_g, gamma)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_norm(
        c: Arc<dyn LinearMap>,
        c_norm: f64,
        f: Vec<ProxSpec>,
        g: Vec<ProxSpec>,
        alpha: f64,
        sigma: f64,
        tau: f64,
        beta_g: f64,
        gamma: f64,
    ) -> Result<Self> {
        if f.is_empty() || f.len() != g.len() {
            return usage(format!(
                "need as many f's as g's (at least one each), got {} and {}",
                f.len(),
                g.len()
            ));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return usage(format!("gamma must lie in (0, 1), got {gamma}"));
        }
        for (name, x) in [("alpha", alpha), ("sigma", sigma), ("tau", tau), ("beta_g", beta_g)] {
            if !(x > 0.0) || !x.is_finite() {
                return usage(format!("{name} must be positive, got {x}"));
            }
        }
        Ok(Self {
            c,
            c_norm,
            f,
            g,
            alpha,
            sigma,
            tau,
            beta_g,
            gamma,
        })
    }

    pub fn c(&self) -> &dyn LinearMap {
        self.c.as_ref()
    }

    pub fn c_norm(&self) -> f64 {
        self.c_norm
    }

    pub fn f(&self) -> &[ProxSpec] {
        &self.f
    }

    pub fn g(&self) -> &[ProxSpec] {
        &self.g
    }

    /// Number of operators `n`.
    pub fn n(&self) -> usize {
        self.f.len() + 1
    }

    pub fn primal_dim(&self) -> usize {
        self.c.dim_in()
    }

    pub fn dual_dim(&self) -> usize {
        self.c.dim_out()
    }

    /// `min{σ, 1/β_g}`
    pub fn last_modulus(&self) -> f64 {
        self.sigma.min(1.0 / self.beta_g)
    }

    /// `max{α, 1/τ}`
    pub fn middle_lipschitz(&self) -> f64 {
        self.alpha.max(1.0 / self.tau)
    }

    pub fn zero_state(&self) -> PdState {
        let k = self.n() - 1;
        PdState {
            p: vec![HVector::zeros(self.primal_dim()); k],
            q: vec![HVector::zeros(self.dual_dim()); k],
        }
    }

    fn check_state(&self, s: &PdState) -> Result<()> {
        check_dim(self.n() - 1, s.p.len())?;
        check_dim(self.n() - 1, s.q.len())?;
        for (p, q) in s.p.iter().zip(&s.q) {
            check_dim(self.primal_dim(), p.dim())?;
            check_dim(self.dual_dim(), q.dim())?;
        }
        Ok(())
    }
}

/// `(p_1..p_{n−1}, q_1..q_{n−1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct PdState {
    pub p: Vec<HVector>,
    pub q: Vec<HVector>,
}

impl IterState for PdState {
    fn scalar_dim(&self) -> usize {
        self.p.iter().chain(&self.q).map(HVector::dim).sum()
    }

    fn distance(&self, other: &Self) -> f64 {
        self.p
            .iter()
            .zip(&other.p)
            .chain(self.q.iter().zip(&other.q))
            .map(|(a, b)| a.dist(b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn is_finite(&self) -> bool {
        self.p.iter().chain(&self.q).all(HVector::is_finite)
    }
}

/// Primal and dual shadows `(u_i, v_i)` of one step.
#[derive(Clone, Debug, PartialEq)]
pub struct PdShadow {
    pub u: Vec<HVector>,
    pub v: Vec<HVector>,
}

impl PdShadow {
    /// `(u_n, v_n)`, the pair the gap is evaluated at.
    pub fn last(&self) -> (&HVector, &HVector) {
        (self.u.last().unwrap(), self.v.last().unwrap())
    }
}

fn combine(a: &HVector, b: &HVector, c: &HVector) -> HVector {
    // a + b − c
    let mut out = a + b;
    out.axpy(-1.0, c);
    out
}

/// Shadows of one step without the state update.
pub fn pd_shadow(problem: &PdProblem, state: &PdState) -> Result<PdShadow> {
    problem.check_state(state)?;
    let n = problem.n();
    let (p, q) = (&state.p, &state.q);
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let (u1, v1) = resolvent_skew(&p[0], &q[0], problem.c())?;
    u.push(u1);
    v.push(v1);
    for i in 1..n - 1 {
        let fi = &problem.f[i - 1];
        let gi = &problem.g[i - 1];
        u.push(fi.prox(&combine(&p[i], &u[i - 1], &p[i - 1]))?);
        v.push(prox_conjugate(gi, &combine(&q[i], &v[i - 1], &q[i - 1]))?);
    }
    let un = problem.f[n - 2].prox(&combine(&u[0], &u[n - 2], &p[n - 2]))?;
    let vn = prox_conjugate(&problem.g[n - 2], &combine(&v[0], &v[n - 2], &q[n - 2]))?;
    u.push(un);
    v.push(vn);
    Ok(PdShadow { u, v })
}

/// One iteration of the primal-dual method:
/// `p_i⁺ = p_i + γ(u_{i+1} − u_i)`, `q_i⁺ = q_i + γ(v_{i+1} − v_i)`.
pub fn pd_step(problem: &PdProblem, state: &PdState) -> Result<(PdState, PdShadow)> {
    let sh = pd_shadow(problem, state)?;
    let g = problem.gamma;
    let advance = |z: &[HVector], x: &[HVector]| -> Vec<HVector> {
        z.iter()
            .enumerate()
            .map(|(i, zi)| zi.add_scaled(g, &(&x[i + 1] - &x[i])))
            .collect()
    };
    let next = PdState {
        p: advance(&state.p, &sh.u),
        q: advance(&state.q, &sh.v),
    };
    Ok((next, sh))
}

/// Operators `A₁, …, A_n` on `H₁ × H₂` whose `T_MT` is the primal-dual step.
pub fn assemble_operators(problem: &PdProblem) -> Result<Vec<OperatorDesc>> {
    let n = problem.n();
    let (d1, d2) = (problem.primal_dim(), problem.dual_dim());
    let mut ops = Vec::with_capacity(n);
    ops.push(OperatorDesc::skew_block_with_norm(problem.c.clone(), problem.c_norm));
    for i in 0..n - 1 {
        let last = i == n - 2;
        let (mu, lip) = if last {
            (problem.last_modulus(), None)
        } else {
            (0.0, Some(problem.middle_lipschitz()))
        };
        ops.push(OperatorDesc::primal_dual_pair(
            problem.f[i].clone(),
            problem.g[i].clone(),
            d1,
            d2,
            mu,
            lip,
        )?);
    }
    Ok(ops)
}

pub fn split_problem(problem: &PdProblem) -> Result<SplitProblem> {
    SplitProblem::new(assemble_operators(problem)?, problem.gamma)
}

/// `z_i = (p_i, q_i)`.
pub fn to_lifted(state: &PdState) -> Result<LiftedPoint> {
    LiftedPoint::new(
        state
            .p
            .iter()
            .zip(&state.q)
            .map(|(p, q)| HVector::concat(p, q))
            .collect(),
    )
}

pub fn from_lifted(z: &LiftedPoint, primal_dim: usize) -> Result<PdState> {
    if primal_dim == 0 || z.block_dim() <= primal_dim {
        return usage(format!(
            "block of dimension {} cannot hold a primal part of dimension {primal_dim} and a dual part",
            z.block_dim()
        ));
    }
    let (p, q) = z.blocks().iter().map(|b| b.split(primal_dim)).unzip();
    Ok(PdState { p, q })
}

/// How the high-accuracy reference `(p*, q*)` is produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceMode {
    None,
    /// `max(200, 10·k)` iterations, `k` being the stopping index of the run.
    Auto,
    Iterations(usize),
}

/// High-accuracy fixed point and its shadow.
#[derive(Clone, Debug)]
pub struct PdReference {
    pub state: PdState,
    pub u: HVector,
    pub v: HVector,
    pub iterations: usize,
}

#[derive(Clone, Debug)]
pub struct PdRun {
    pub state: PdState,
    /// Shadow of the final state.
    pub shadow: PdShadow,
    pub trace: IterationTrace,
    pub reference: Option<PdReference>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RunSummary {
    pub iterations: usize,
    pub status: &'static str,
    pub last_change: f64,
}

impl PdRun {
    pub fn summary(&self) -> RunSummary {
        RunSummary {
            iterations: self.trace.iterations(),
            status: self.trace.status.as_str(),
            last_change: self.trace.last_change().unwrap_or(f64::NAN),
        }
    }
}

/// Runs exactly `iterations` steps (no early stop) and returns the final
/// state and its shadow.
pub fn run_fixed(problem: &PdProblem, z0: &PdState, iterations: usize) -> Result<(PdState, PdShadow)> {
    let mut z = z0.clone();
    for _ in 0..iterations {
        z = pd_step(problem, &z)?.0;
    }
    let sh = pd_shadow(problem, &z)?;
    Ok((z, sh))
}

fn reference_run(problem: &PdProblem, z0: &PdState, iterations: usize) -> Result<PdReference> {
    let (state, sh) = run_fixed(problem, z0, iterations)?;
    let (u, v) = sh.last();
    Ok(PdReference {
        u: u.clone(),
        v: v.clone(),
        state,
        iterations,
    })
}

/// Drives the primal-dual method from `z0`.
///
/// With a reference the run records distances `‖z^k − z*‖/m` and the gap at
/// `(u_n^k, v_n^k)`; the reference is computed before the recorded run, so
/// the cost roughly triples under [`ReferenceMode::Auto`].
pub fn run_primal_dual(problem: &PdProblem, z0: PdState, opts: &DriveOptions, mode: ReferenceMode) -> Result<PdRun> {
    problem.check_state(&z0)?;
    let reference = match mode {
        ReferenceMode::None => None,
        ReferenceMode::Iterations(k) => Some(reference_run(problem, &z0, k)?),
        ReferenceMode::Auto => {
            let (_, pilot) = drive(|z| Ok(Step::new(pd_step(problem, z)?.0)), z0.clone(), opts, None)?;
            let k = (10 * pilot.iterations()).max(MIN_REFERENCE_ITERATIONS);
            Some(reference_run(problem, &z0, k)?)
        }
    };
    let (state, trace) = match &reference {
        None => drive(|z| Ok(Step::new(pd_step(problem, z)?.0)), z0, opts, None)?,
        Some(r) => drive(
            |z| {
                let (next, sh) = pd_step(problem, z)?;
                let (u, v) = sh.last();
                let gap = primal_dual_gap(u, v, &r.u, &r.v, problem)?;
                Ok(Step::with_gap(next, gap))
            },
            z0,
            opts,
            Some(&r.state),
        )?,
    };
    let shadow = pd_shadow(problem, &state)?;
    Ok(PdRun {
        state,
        shadow,
        trace,
        reference,
    })
}
