//! Krylov solvers and the two-step RBF solve.
//!
//! The interpolation system `[[K, Q], [Q^T, 0]] [u; c] = [d; 0]` is solved by
//! writing `u = T̂ w` in the polynomial-free part of the hierarchical basis,
//! solving `K_W w = T̂^T d` with restarted GMRES, and recovering the
//! polynomial part as `c = L^T (d - K u)`.

use std::time::Instant;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{check_len, Error, Result};
use crate::geometry::{normalize_nodes, Normalization, Octree};
use crate::hbasis::build_hb;
use crate::kernels::{eval_unchecked, kernel_matrix_unchecked, KernelOperator, KernelSpec};
use crate::linalg::{dot, norm2, symmetric_condition};
use crate::mrop::{MultiResOperator, SsorPreconditioner};
use crate::nodes::NodeSet;
use crate::polyspace::{build_q, orthonormal_poly_basis, poly_dim, MonomialBasis};
use crate::Point3;

/// A square linear map on `R^dim`.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.ncols(), x.len())?;
        Ok((self * DVector::from_column_slice(x)).as_slice().to_vec())
    }
}

pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.0, x.len())?;
        Ok(x.to_vec())
    }
}

/// Jacobi scaling `x -> x / diag`, optionally with an exactly inverted
/// trailing block.
pub struct DiagonalPreconditioner {
    diag: Vec<f64>,
    tail: Option<(usize, Cholesky<f64, Dyn>)>,
}

impl DiagonalPreconditioner {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if let Some(i) = diag.iter().position(|d| *d == 0.0 || !d.is_finite()) {
            return Err(Error::Singular(format!("diagonal entry {i} is {}", diag[i])));
        }
        Ok(Self { diag, tail: None })
    }

    /// Replaces the scaling of the last `block.nrows()` unknowns, starting at
    /// `start`, by the inverse of the positive definite `block`.
    pub fn with_dense_tail(mut self, start: usize, block: DMatrix<f64>) -> Result<Self> {
        check_len(self.diag.len() - start.min(self.diag.len()), block.nrows())?;
        let chol = block
            .cholesky()
            .ok_or_else(|| Error::Singular("trailing preconditioner block is not positive definite".into()))?;
        self.tail = Some((start, chol));
        Ok(self)
    }
}

impl LinearOperator for DiagonalPreconditioner {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.diag.len(), x.len())?;
        let mut y: Vec<f64> = x.iter().zip(&self.diag).map(|(v, d)| v / d).collect();
        if let Some((start, chol)) = &self.tail {
            let t = chol.solve(&DVector::from_column_slice(&x[*start..]));
            y[*start..].copy_from_slice(t.as_slice());
        }
        Ok(y)
    }
}

#[derive(Debug, Clone)]
pub struct CgResult {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Final relative residual `|b - A x| / |b|`.
    pub residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator, stopping
/// at relative residual `tol` or after `cap` iterations.
pub fn cg(a: &dyn LinearOperator, b: &[f64], tol: f64, cap: usize) -> Result<CgResult> {
    let n = a.dim();
    check_len(n, b.len())?;
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgResult {
            x,
            iterations: 0,
            converged: true,
            residual: 0.0,
        });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut iterations = 0;
    while iterations < cap {
        if rr.sqrt() <= tol * bnorm {
            break;
        }
        let ap = a.apply(&p)?;
        let curv = dot(&p, &ap);
        if curv <= 0.0 {
            return Err(Error::Indefinite(format!(
                "CG met curvature {curv:.3e} at iteration {iterations}; check the sign convention of the operator"
            )));
        }
        let alpha = rr / curv;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        iterations += 1;
    }
    let residual = rr.sqrt() / bnorm;
    Ok(CgResult {
        x,
        iterations,
        converged: residual <= tol,
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct GmresResult {
    pub x: Vec<f64>,
    /// Arnoldi steps taken over all restart cycles.
    pub iterations: usize,
    pub converged: bool,
    /// True relative residual `|b - A x| / |b|` of the returned iterate.
    pub residual: f64,
    /// Preconditioned relative residual after every Arnoldi step.
    pub history: Vec<f64>,
    pub restarts: usize,
    /// Set when the Arnoldi process produced a zero vector without reaching
    /// the target.
    pub breakdown: bool,
}

/// Left-preconditioned GMRES(`restart`) that stops on the true,
/// unpreconditioned relative residual. The preconditioned residual only
/// decides when to test a candidate; the ratio between the two residual
/// norms is re-estimated at each test.
pub fn gmres_restarted(
    a: &dyn LinearOperator,
    m: &dyn LinearOperator,
    b: &[f64],
    restart: usize,
    tol: f64,
    max_iterations: usize,
) -> Result<GmresResult> {
    let n = a.dim();
    check_len(n, b.len())?;
    check_len(n, m.dim())?;
    if restart == 0 {
        return Err(Error::Config("GMRES restart must be at least 1".into()));
    }
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    let mut history = Vec::new();
    if bnorm == 0.0 {
        return Ok(GmresResult {
            x,
            iterations: 0,
            converged: true,
            residual: 0.0,
            history,
            restarts: 0,
            breakdown: false,
        });
    }
    let mut iterations = 0;
    let mut restarts = 0;
    let mut pre_b: Option<f64> = None;
    loop {
        let r = if iterations == 0 && restarts == 0 {
            b.to_vec()
        } else {
            let ax = a.apply(&x)?;
            b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
        };
        let rnorm = norm2(&r);
        let residual = rnorm / bnorm;
        if residual <= tol || iterations >= max_iterations {
            return Ok(GmresResult {
                x,
                iterations,
                converged: residual <= tol,
                residual,
                history,
                restarts,
                breakdown: false,
            });
        }
        let z = m.apply(&r)?;
        let beta = norm2(&z);
        if beta == 0.0 {
            return Ok(GmresResult {
                x,
                iterations,
                converged: false,
                residual,
                history,
                restarts,
                breakdown: true,
            });
        }
        let pre_b = *pre_b.get_or_insert(beta);
        let mut ratio = rnorm / beta;

        let mut basis: Vec<Vec<f64>> = vec![z.iter().map(|v| v / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let mut cs = vec![0.0; restart];
        let mut sn = vec![0.0; restart];
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut cycle_x = None;
        for j in 0..restart {
            let aw = a.apply(&basis[j])?;
            let mut w = m.apply(&aw)?;
            iterations += 1;
            let wnorm0 = norm2(&w);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][j] = hij;
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
            }
            let hnext = norm2(&w);
            h[j + 1][j] = hnext;
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = h[j][j].hypot(h[j + 1][j]);
            cs[j] = h[j][j] / denom;
            sn[j] = h[j + 1][j] / denom;
            h[j][j] = denom;
            h[j + 1][j] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            let est = g[j + 1].abs();
            history.push(est / pre_b);

            let lucky = hnext <= 1e-14 * wnorm0.max(f64::MIN_POSITIVE);
            let last = j + 1 == restart || iterations >= max_iterations;
            let candidate = ratio * est <= tol * bnorm;
            if candidate || lucky || last {
                let y = back_solve(&h, &g, j + 1);
                let mut xc = x.clone();
                for (yi, v) in y.iter().zip(&basis) {
                    for (xk, vk) in xc.iter_mut().zip(v) {
                        *xk += yi * vk;
                    }
                }
                if last || lucky {
                    cycle_x = Some(xc);
                    break;
                }
                let axc = a.apply(&xc)?;
                let rc: f64 = b
                    .iter()
                    .zip(&axc)
                    .map(|(bi, ai)| (bi - ai) * (bi - ai))
                    .sum::<f64>()
                    .sqrt();
                if rc <= tol * bnorm {
                    return Ok(GmresResult {
                        x: xc,
                        iterations,
                        converged: true,
                        residual: rc / bnorm,
                        history,
                        restarts,
                        breakdown: false,
                    });
                }
                ratio = rc / est.max(f64::MIN_POSITIVE);
            }
            basis.push(w.iter().map(|v| v / hnext).collect());
        }
        if let Some(xc) = cycle_x {
            x = xc;
        }
        restarts += 1;
    }
}

fn back_solve(h: &[Vec<f64>], g: &[f64], k: usize) -> Vec<f64> {
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[i][j] * y[j];
        }
        y[i] = s / h[i][i];
    }
    y
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionerKind {
    None,
    Diagonal,
    BlockSsor,
}

impl PreconditionerKind {
    pub fn name(self) -> &'static str {
        match self {
            PreconditionerKind::None => "none",
            PreconditionerKind::Diagonal => "diag",
            PreconditionerKind::BlockSsor => "ssor",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub preconditioner: PreconditionerKind,
    pub restart: usize,
    /// Target for `|d_W - K_W w| / |d_W|`.
    pub tol: f64,
    pub inner_tol: f64,
    pub inner_cap: usize,
    /// Cap on Arnoldi steps over all restarts.
    pub max_iterations: usize,
    /// Distance criterion multiplier for the sparsified diagonal blocks.
    pub tau_scale: f64,
    /// Fail instead of warning when an inner block solve misses its target.
    pub strict_inner: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            preconditioner: PreconditionerKind::Diagonal,
            restart: 100,
            tol: 1e-3,
            inner_tol: 1e-6,
            inner_cap: 500,
            max_iterations: 5000,
            tau_scale: 1.0,
            strict_inner: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.inner_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.restart == 0 {
            return Err(Error::Config("restart must be at least 1".into()));
        }
        if !(self.tau_scale > 0.0) {
            return Err(Error::Config("distance criterion must be positive".into()));
        }
        Ok(())
    }
}

/// Seconds spent per pipeline phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseTimings {
    pub setup: f64,
    pub basis: f64,
    pub preconditioner: f64,
    pub solve: f64,
    pub recover: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub n: usize,
    pub kernel: String,
    pub m: usize,
    pub p: usize,
    pub preconditioner: PreconditionerKind,
    pub depth: usize,
    pub outer_iterations: usize,
    /// Inner CG iterations accumulated per level (block SSOR only).
    pub inner_iterations: Vec<(i32, usize)>,
    pub residual_history: Vec<f64>,
    /// `|d_W - K_W w| / |d_W|` at exit.
    pub final_residual: f64,
    /// `max_i |s(x_i) - d_i|`.
    pub interpolation_residual: f64,
    pub converged: bool,
    pub timings: PhaseTimings,
}

/// Kernel coefficients `u`, polynomial coefficients `c` in the orthonormal
/// basis `L`, and everything needed to evaluate the interpolant.
#[derive(Debug, Clone)]
pub struct RBFSolution {
    pub u: Vec<f64>,
    pub c: Vec<f64>,
    /// `c` expressed in monomials of the normalized coordinates.
    pub c_monomial: Vec<f64>,
    pub report: SolveReport,
    pub interpolant: Interpolant,
}

/// `s(x) = sum_j u_j K(x, x_j) + sum_i c_i q_i(x)`, with `x` mapped through
/// the stored normalization and `q_i` the monomials of degree at most `m`.
#[derive(Debug, Clone)]
pub struct Interpolant {
    pub kernel: KernelSpec,
    pub normalization: Normalization,
    /// Normalized nodes.
    pub nodes: Vec<Point3>,
    pub u: Vec<f64>,
    pub c_monomial: Vec<f64>,
    pub m: usize,
}

impl Interpolant {
    pub fn evaluate(&self, queries: &[Point3]) -> Vec<f64> {
        let basis = MonomialBasis::new(self.m);
        let mut q = vec![0.0; basis.len()];
        queries
            .iter()
            .map(|x| {
                let xn = self.normalization.forward(x);
                let mut s = 0.0;
                for (node, &uj) in self.nodes.iter().zip(&self.u) {
                    s += uj * eval_unchecked(&self.kernel, &xn, node);
                }
                basis.eval_into(&xn, &mut q);
                s + dot(&q, &self.c_monomial)
            })
            .collect()
    }
}

/// Evaluates a solved interpolant at queries given in original coordinates.
pub fn evaluate_interpolant(sol: &RBFSolution, queries: &[Point3]) -> Vec<f64> {
    sol.interpolant.evaluate(queries)
}

fn node_values(nodes: &NodeSet) -> Result<&[f64]> {
    let d = nodes
        .values
        .as_deref()
        .ok_or_else(|| Error::Config("node set has no values to interpolate".into()))?;
    check_len(nodes.len(), d.len())?;
    Ok(d)
}

/// Full hierarchical-basis solve of the interpolation problem.
pub fn solve_rbf(
    nodes: &NodeSet,
    kernel: KernelSpec,
    m: usize,
    p: usize,
    opts: &SolveOptions,
) -> Result<RBFSolution> {
    kernel.validate()?;
    opts.validate()?;
    if p < m {
        return Err(Error::Domain(format!("need p >= m, got p = {p}, m = {m}")));
    }
    let d = node_values(nodes)?;
    let mut timings = PhaseTimings::default();

    let t0 = Instant::now();
    let (points, norm) = normalize_nodes(&nodes.points)?;
    let tree = Octree::build(&points, poly_dim(p))?;
    let kop = KernelOperator::new(kernel, points.clone())?;
    timings.setup = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let hb = build_hb(&tree, &points, m, p)?;
    let depth = tree.depth();
    let op = MultiResOperator::new(tree, hb, kop)?;
    timings.basis = t0.elapsed().as_secs_f64();

    let dim = op.dim();
    let sign = op.sign();
    let rhs: Vec<f64> = op.hb().analyze(d, 0..dim).into_iter().map(|v| sign * v).collect();

    let t0 = Instant::now();
    let a = op.signed();
    let identity = IdentityOperator(dim);
    let mut diag = None;
    let mut ssor = None;
    let precond: &dyn LinearOperator = match opts.preconditioner {
        PreconditionerKind::None => &identity,
        PreconditionerKind::Diagonal => {
            let mut pre = DiagonalPreconditioner::new(op.diag_preconditioner()?)?;
            // the few polynomial complement columns are coupled strongly and
            // are inverted exactly
            if let Some((start, block)) = op.complement_block() {
                pre = pre.with_dense_tail(start, block)?;
            }
            diag.insert(pre)
        }
        PreconditionerKind::BlockSsor => {
            let blocks = op.build_sparse_diag_blocks(opts.tau_scale);
            let s = SsorPreconditioner::new(&op, blocks, opts.inner_tol, opts.inner_cap);
            ssor.insert(if opts.strict_inner { s } else { s.lenient() })
        }
    };
    timings.preconditioner = t0.elapsed().as_secs_f64();

    let t0 = Instant::now();
    let gm = gmres_restarted(&a, precond, &rhs, opts.restart, opts.tol, opts.max_iterations)?;
    timings.solve = t0.elapsed().as_secs_f64();
    if !gm.converged {
        log::warn!(
            "GMRES stopped after {} iterations at residual {:.3e} (target {:.1e})",
            gm.iterations,
            gm.residual,
            opts.tol
        );
    }
    let inner_iterations = ssor.as_ref().map(|s| s.inner_iterations()).unwrap_or_default();

    let t0 = Instant::now();
    let u = op.hb().synthesize(&gm.x, 0..dim);
    let ku = op.kernel().apply(&u)?;
    let l = op.hb().poly_basis();
    let resid = DVector::from_iterator(d.len(), d.iter().zip(&ku).map(|(di, ki)| di - ki));
    let c_vec = l.transpose() * &resid;
    let fit = l * &c_vec;
    let interpolation_residual = ku
        .iter()
        .zip(fit.iter())
        .zip(d)
        .map(|((k, f), di)| (k + f - di).abs())
        .fold(0.0, f64::max);
    let c: Vec<f64> = c_vec.as_slice().to_vec();
    let c_monomial = (&op.hb().poly_g * &c_vec).as_slice().to_vec();
    timings.recover = t0.elapsed().as_secs_f64();

    let report = SolveReport {
        n: nodes.len(),
        kernel: kernel.short_name().to_string(),
        m,
        p,
        preconditioner: opts.preconditioner,
        depth,
        outer_iterations: gm.iterations,
        inner_iterations,
        residual_history: gm.history,
        final_residual: gm.residual,
        interpolation_residual,
        converged: gm.converged,
        timings,
    };
    let interpolant = Interpolant {
        kernel,
        normalization: norm,
        nodes: points,
        u: u.clone(),
        c_monomial: c_monomial.clone(),
        m,
    };
    Ok(RBFSolution {
        u,
        c,
        c_monomial,
        report,
        interpolant,
    })
}

/// Dense oracle solution of the saddle system in normalized coordinates.
#[derive(Debug, Clone)]
pub struct DirectSolution {
    pub u: Vec<f64>,
    /// Monomial coefficients in normalized coordinates.
    pub c_raw: Vec<f64>,
    pub interpolant: Interpolant,
}

/// Largest `N + M(m)` accepted by the dense oracles.
pub const DENSE_ORACLE_LIMIT: usize = 4000;

/// Assembles `[[K, Q], [Q^T, 0]]` with the monomial `Q` and solves it by LU
/// with partial pivoting.
pub fn direct_solve_saddle(points: &[Point3], d: &[f64], kernel: KernelSpec, m: usize) -> Result<DirectSolution> {
    kernel.validate()?;
    check_len(points.len(), d.len())?;
    let mq = poly_dim(m);
    let n = points.len();
    if n + mq > DENSE_ORACLE_LIMIT {
        return Err(Error::Config(format!(
            "dense saddle solve limited to N + M(m) <= {DENSE_ORACLE_LIMIT}, got {}",
            n + mq
        )));
    }
    let (pts, norm) = normalize_nodes(points)?;
    orthonormal_poly_basis(&pts, m)?;
    let s = saddle_matrix(&pts, &kernel, m, 1.0);
    let mut rhs = DVector::zeros(n + mq);
    rhs.rows_mut(0, n).copy_from_slice(d);
    let sol = s
        .lu()
        .solve(&rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular("saddle matrix is singular".into()))?;
    let u = sol.rows(0, n).iter().copied().collect::<Vec<_>>();
    let c_raw = sol.rows(n, mq).iter().copied().collect::<Vec<_>>();
    Ok(DirectSolution {
        interpolant: Interpolant {
            kernel,
            normalization: norm,
            nodes: pts,
            u: u.clone(),
            c_monomial: c_raw.clone(),
            m,
        },
        u,
        c_raw,
    })
}

/// `[[K, alpha Q], [alpha Q^T, 0]]` on already normalized nodes.
pub fn saddle_matrix(points: &[Point3], kernel: &KernelSpec, m: usize, alpha: f64) -> DMatrix<f64> {
    let k = kernel_matrix_unchecked(kernel, points);
    assemble_saddle(&k, &(build_q(points, m) * alpha))
}

fn assemble_saddle(k: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = k.nrows();
    let mq = q.ncols();
    let mut s = DMatrix::zeros(n + mq, n + mq);
    s.view_mut((0, 0), (n, n)).copy_from(k);
    s.view_mut((0, n), (n, mq)).copy_from(q);
    s.view_mut((n, 0), (mq, n)).copy_from(&q.transpose());
    s
}

/// Largest node count accepted by the dense conditioning experiment.
pub const CONDITION_LIMIT: usize = 2000;

/// How the scale factor `alpha` enters the polynomial block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyScaling {
    /// Polynomials evaluated on the scaled domain, `Q_ij = q_j(alpha x_i)`.
    Domain,
    /// The block multiplied through, `alpha Q`.
    Multiplier,
}

impl PolyScaling {
    pub fn name(self) -> &'static str {
        match self {
            PolyScaling::Domain => "domain",
            PolyScaling::Multiplier => "multiplier",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionRow {
    pub alpha: f64,
    /// 2-norm condition number of the scaled saddle matrix.
    pub kappa_saddle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    pub scaling: PolyScaling,
    pub rows: Vec<ConditionRow>,
    /// 2-norm condition number of the decoupled operator `K_W`.
    pub kappa_kw: f64,
}

/// Condition numbers of the saddle system `[[K, Q_alpha], [Q_alpha^T, 0]]`
/// for each `alpha` and of `K_W`. The saddle system is assembled on the input
/// coordinates, as the interpolation problem is posed; `K_W` is the operator
/// the solver iterates on. Both matrices are symmetric, so the ratio of the
/// extreme eigenvalue magnitudes is the 2-norm condition number.
pub fn condition_experiment(
    points: &[Point3],
    kernel: KernelSpec,
    m: usize,
    p: usize,
    alphas: &[f64],
    scaling: PolyScaling,
) -> Result<ConditionReport> {
    kernel.validate()?;
    if points.len() > CONDITION_LIMIT {
        return Err(Error::Config(format!(
            "conditioning experiment assembles dense matrices and is limited to N <= {CONDITION_LIMIT}"
        )));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::Config(format!("scale factors must be positive, got {a}")));
    }
    let (pts, _) = normalize_nodes(points)?;
    orthonormal_poly_basis(&pts, m)?;
    let k = kernel_matrix_unchecked(&kernel, points);
    let rows = alphas
        .iter()
        .map(|&alpha| {
            let q = match scaling {
                PolyScaling::Domain => {
                    let scaled: Vec<Point3> = points.iter().map(|x| x.map(|v| alpha * v)).collect();
                    build_q(&scaled, m)
                }
                PolyScaling::Multiplier => build_q(points, m) * alpha,
            };
            ConditionRow {
                alpha,
                kappa_saddle: symmetric_condition(&assemble_saddle(&k, &q)),
            }
        })
        .collect();
    let op = MultiResOperator::build(&pts, kernel, m, p)?;
    Ok(ConditionReport {
        scaling,
        rows,
        kappa_kw: symmetric_condition(&op.dense_kw()),
    })
}
