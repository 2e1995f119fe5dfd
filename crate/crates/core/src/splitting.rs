//! Fixed-point operators for `0 ∈ A₁x + … + A_nx` and a generic iteration driver.
//!
//! * [`mt_apply`]: resolvent splitting with minimal lifting, state in `H^{n−1}`.
//! * [`dr_apply`]: Douglas–Rachford for two operators.
//! * [`dr_product_apply`]: Douglas–Rachford on the product space `H^n`
//!   with the diagonal constraint.

use std::time::Instant;

use serde::Serialize;

use crate::error::{check_dim, usage, Result};
use crate::hvector::HVector;
use crate::operators::OperatorDesc;

/// State `z = (z₁, …, z_{n−1}) ∈ H^{n−1}` of the minimal-lifting iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftedPoint {
    blocks: Vec<HVector>,
}

impl LiftedPoint {
    pub fn new(blocks: Vec<HVector>) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return usage("a lifted point needs at least one block (n >= 2)");
        };
        let d = first.dim();
        for b in &blocks {
            check_dim(d, b.dim())?;
        }
        Ok(Self { blocks })
    }

    pub fn zeros(blocks: usize, dim: usize) -> Self {
        Self {
            blocks: vec![HVector::zeros(dim); blocks],
        }
    }

    pub fn blocks(&self) -> &[HVector] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<HVector> {
        self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn block_dim(&self) -> usize {
        self.blocks[0].dim()
    }

    /// Flattens into one vector of length `(n−1)·d`.
    pub fn flatten(&self) -> HVector {
        HVector::raw(self.blocks.iter().flat_map(|b| b.as_slice().iter().copied()).collect())
    }

    pub fn unflatten(flat: &HVector, dim: usize) -> Result<Self> {
        if dim == 0 || flat.dim() % dim != 0 {
            return usage(format!("cannot split length {} into blocks of {dim}", flat.dim()));
        }
        Self::new(flat.as_slice().chunks(dim).map(|c| HVector::raw(c.to_vec())).collect())
    }
}

/// Shadow tuple `x = (x₁, …, x_n)` produced alongside each step.
#[derive(Clone, Debug, PartialEq)]
pub struct ShadowTuple {
    pub xs: Vec<HVector>,
}

impl ShadowTuple {
    /// `max_i ‖x_i − x₁‖`
    pub fn consensus_gap(&self) -> f64 {
        let x1 = &self.xs[0];
        self.xs.iter().map(|x| x.dist(x1)).fold(0.0, f64::max)
    }
}

/// `n` operators on a common space and the step size `γ ∈ (0, 1)`.
#[derive(Clone, Debug)]
pub struct SplitProblem {
    ops: Vec<OperatorDesc>,
    gamma: f64,
}

impl SplitProblem {
    pub fn new(ops: Vec<OperatorDesc>, gamma: f64) -> Result<Self> {
        if ops.len() < 2 {
            return usage(format!("need at least two operators, got {}", ops.len()));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return usage(format!("gamma must lie in (0, 1), got {gamma}"));
        }
        let d = ops[0].dim();
        for op in &ops {
            check_dim(d, op.dim())?;
        }
        Ok(Self { ops, gamma })
    }

    pub fn ops(&self) -> &[OperatorDesc] {
        &self.ops
    }

    pub fn n(&self) -> usize {
        self.ops.len()
    }

    pub fn dim(&self) -> usize {
        self.ops[0].dim()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn zero_point(&self) -> LiftedPoint {
        LiftedPoint::zeros(self.n() - 1, self.dim())
    }

    fn check_point(&self, z: &LiftedPoint) -> Result<()> {
        check_dim(self.n() - 1, z.len())?;
        check_dim(self.dim(), z.block_dim())
    }
}

/// Shadow tuple for `z`: `x₁ = J₁(z₁)`, `x_i = J_i(z_i + x_{i−1} − z_{i−1})`,
/// `x_n = J_n(x₁ + x_{n−1} − z_{n−1})`.
pub fn mt_shadow(problem: &SplitProblem, z: &LiftedPoint) -> Result<ShadowTuple> {
    problem.check_point(z)?;
    let n = problem.n();
    let ops = problem.ops();
    let zs = z.blocks();
    let mut xs = Vec::with_capacity(n);
    xs.push(ops[0].resolvent(&zs[0])?);
    for i in 1..n - 1 {
        let arg = &(&zs[i] + &xs[i - 1]) - &zs[i - 1];
        xs.push(ops[i].resolvent(&arg)?);
    }
    let arg = &(&xs[0] + &xs[n - 2]) - &zs[n - 2];
    xs.push(ops[n - 1].resolvent(&arg)?);
    Ok(ShadowTuple { xs })
}

/// One application of `T_MT`: `z⁺_i = z_i + γ(x_{i+1} − x_i)`.
pub fn mt_apply(problem: &SplitProblem, z: &LiftedPoint) -> Result<(LiftedPoint, ShadowTuple)> {
    let x = mt_shadow(problem, z)?;
    let gamma = problem.gamma();
    let blocks = z
        .blocks()
        .iter()
        .enumerate()
        .map(|(i, zi)| zi.add_scaled(gamma, &(&x.xs[i + 1] - &x.xs[i])))
        .collect();
    Ok((LiftedPoint { blocks }, x))
}

/// Operator values implied by the resolvent steps:
/// `y₁ = z₁ − x₁ ∈ A₁x₁`, `y_i = z_i − z_{i−1} + x_{i−1} − x_i ∈ A_i x_i`,
/// `y_n = x₁ + x_{n−1} − x_n − z_{n−1} ∈ A_n x_n`.
pub fn resolvent_implied_values(z: &LiftedPoint, x: &ShadowTuple) -> Vec<HVector> {
    let zs = z.blocks();
    let xs = &x.xs;
    let n = xs.len();
    let mut ys = Vec::with_capacity(n);
    ys.push(&zs[0] - &xs[0]);
    for i in 1..n - 1 {
        ys.push(&(&(&zs[i] - &zs[i - 1]) + &xs[i - 1]) - &xs[i]);
    }
    ys.push(&(&(&xs[0] + &xs[n - 2]) - &xs[n - 1]) - &zs[n - 2]);
    ys
}

/// Fixed-point diagnostics at `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedPointResidual {
    /// `‖T_MT(z) − z‖`
    pub residual: f64,
    /// `max_i ‖x_i − x₁‖`
    pub consensus: f64,
    /// `‖∑ y_i‖` over the resolvent-implied operator values
    pub operator_sum: f64,
}

pub fn mt_fixed_point_residual(problem: &SplitProblem, z: &LiftedPoint) -> Result<FixedPointResidual> {
    let (zplus, x) = mt_apply(problem, z)?;
    let residual = zplus.distance(z);
    let ys = resolvent_implied_values(z, &x);
    let mut sum = HVector::zeros(problem.dim());
    for y in &ys {
        sum.axpy(1.0, y);
    }
    Ok(FixedPointResidual {
        residual,
        consensus: x.consensus_gap(),
        operator_sum: sum.norm(),
    })
}

/// `T_DR(z) = z + J_{A₂}(2J_{A₁}(z) − z) − J_{A₁}(z)`.
pub fn dr_apply(a1: &OperatorDesc, a2: &OperatorDesc, z: &HVector) -> Result<HVector> {
    let x = a1.resolvent(z)?;
    let y = a2.resolvent(&x.scaled(2.0).add_scaled(-1.0, z))?;
    Ok(&(z + &y) - &x)
}

/// A point `Z = (Z₁, …, Z_n)` of the product space `H^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductPoint {
    pub blocks: Vec<HVector>,
}

impl ProductPoint {
    pub fn zeros(n: usize, dim: usize) -> Self {
        Self {
            blocks: vec![HVector::zeros(dim); n],
        }
    }

    /// Projection onto the diagonal, returned as the common block.
    pub fn diagonal_mean(&self) -> HVector {
        let mut mean = HVector::zeros(self.blocks[0].dim());
        let w = 1.0 / self.blocks.len() as f64;
        for b in &self.blocks {
            mean.axpy(w, b);
        }
        mean
    }
}

/// One Douglas–Rachford step on `H^n` for `0 ∈ (N_Δ + A)(x)`.
///
/// The first resolvent is the diagonal projection `P`, the second is
/// `(J_{A₁}, …, J_{A_n})` componentwise:
/// `Z⁺ = Z + J_A(2PZ − Z) − PZ`. Returns `Z⁺` and the shadow `PZ`
/// (a single block of the diagonal).
pub fn dr_product_apply(ops: &[OperatorDesc], z: &ProductPoint) -> Result<(ProductPoint, HVector)> {
    if ops.len() < 2 {
        return usage(format!("need at least two operators, got {}", ops.len()));
    }
    check_dim(ops.len(), z.blocks.len())?;
    for (op, b) in ops.iter().zip(&z.blocks) {
        check_dim(op.dim(), b.dim())?;
    }
    let mean = z.diagonal_mean();
    let blocks = ops
        .iter()
        .zip(&z.blocks)
        .map(|(op, zi)| {
            let reflected = mean.scaled(2.0).add_scaled(-1.0, zi);
            let y = op.resolvent(&reflected)?;
            Ok(&(zi + &y) - &mean)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((ProductPoint { blocks }, mean))
}

/// States the driver can iterate on.
pub trait IterState: Clone {
    /// Total number of scalar entries.
    fn scalar_dim(&self) -> usize;
    fn distance(&self, other: &Self) -> f64;
    fn is_finite(&self) -> bool;
}

impl IterState for HVector {
    fn scalar_dim(&self) -> usize {
        self.dim()
    }

    fn distance(&self, other: &Self) -> f64 {
        self.dist(other)
    }

    fn is_finite(&self) -> bool {
        HVector::is_finite(self)
    }
}

fn blocks_distance(a: &[HVector], b: &[HVector]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dist(y).powi(2)).sum::<f64>().sqrt()
}

impl IterState for LiftedPoint {
    fn scalar_dim(&self) -> usize {
        self.blocks.iter().map(HVector::dim).sum()
    }

    fn distance(&self, other: &Self) -> f64 {
        blocks_distance(&self.blocks, &other.blocks)
    }

    fn is_finite(&self) -> bool {
        self.blocks.iter().all(HVector::is_finite)
    }
}

impl IterState for ProductPoint {
    fn scalar_dim(&self) -> usize {
        self.blocks.iter().map(HVector::dim).sum()
    }

    fn distance(&self, other: &Self) -> f64 {
        blocks_distance(&self.blocks, &other.blocks)
    }

    fn is_finite(&self) -> bool {
        self.blocks.iter().all(HVector::is_finite)
    }
}

/// Output of one step map evaluation.
#[derive(Clone, Debug)]
pub struct Step<S> {
    pub next: S,
    /// Optional primal-dual gap evaluated at the shadow of this step.
    pub gap: Option<f64>,
}

impl<S> Step<S> {
    pub fn new(next: S) -> Self {
        Self { next, gap: None }
    }

    pub fn with_gap(next: S, gap: f64) -> Self {
        Self { next, gap: Some(gap) }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct DriveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Divisor `m` in `‖z^k − z^{k−1}‖ / m`; defaults to the scalar dimension.
    pub normalization: Option<f64>,
}

impl DriveOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            normalization: None,
        }
    }

    pub fn normalized_by(mut self, m: f64) -> Self {
        self.normalization = Some(m);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIter,
    Diverged,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max-iter",
            Status::Diverged => "diverged",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    /// `‖z^k − z^{k−1}‖ / m`
    pub norm_change: f64,
    /// `‖z^k − z*‖ / m` when a reference was supplied
    pub dist_to_ref: Option<f64>,
    pub gap: Option<f64>,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
    pub status: Status,
    pub normalization: f64,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.k)
    }

    pub fn distances(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.dist_to_ref).collect()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.gap).collect()
    }

    pub fn last_change(&self) -> Option<f64> {
        self.records.last().map(|r| r.norm_change)
    }
}

/// Iterates `z^{k+1} = T(z^k)` until the normalized change drops to `tol`
/// or `max_iter` steps have run.
///
/// A non-finite iterate stops the run with [`Status::Diverged`]; the last
/// finite state is returned. Errors raised by the step map propagate.
pub fn drive<S, F>(mut step: F, z0: S, opts: &DriveOptions, reference: Option<&S>) -> Result<(S, IterationTrace)>
where
    S: IterState,
    F: FnMut(&S) -> Result<Step<S>>,
{
    if !(opts.tol > 0.0) {
        return usage(format!("tol must be positive, got {}", opts.tol));
    }
    if opts.max_iter == 0 {
        return usage("max_iter must be at least 1");
    }
    let m = opts.normalization.unwrap_or(z0.scalar_dim() as f64);
    if !(m > 0.0) {
        return usage(format!("normalization must be positive, got {m}"));
    }
    let start = Instant::now();
    let mut z = z0;
    let mut records = Vec::new();
    let mut status = Status::MaxIter;
    for k in 1..=opts.max_iter {
        let Step { next, gap } = step(&z)?;
        let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
        if !next.is_finite() {
            records.push(TraceRecord {
                k,
                norm_change: f64::NAN,
                dist_to_ref: None,
                gap,
                elapsed_ms,
            });
            status = Status::Diverged;
            break;
        }
        let norm_change = next.distance(&z) / m;
        records.push(TraceRecord {
            k,
            norm_change,
            dist_to_ref: reference.map(|r| next.distance(r) / m),
            gap,
            elapsed_ms,
        });
        z = next;
        if norm_change <= opts.tol {
            status = Status::Converged;
            break;
        }
    }
    Ok((
        z,
        IterationTrace {
            records,
            status,
            normalization: m,
        },
    ))
}

/// Drives `T_MT` from `z0`.
pub fn run_mt(
    problem: &SplitProblem,
    z0: LiftedPoint,
    opts: &DriveOptions,
    reference: Option<&LiftedPoint>,
) -> Result<(LiftedPoint, IterationTrace)> {
    drive(|z| Ok(Step::new(mt_apply(problem, z)?.0)), z0, opts, reference)
}
