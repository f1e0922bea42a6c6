//! The kernel operator expressed in the polynomial-free part of the
//! hierarchical basis, `K_W = T̂^T K T̂`, where `T̂` holds every detail column
//! plus the complement block. Columns are grouped into level blocks (finest
//! level first, the complement block last), which is the structure the
//! diagonal and block-SSOR preconditioners work on.

use std::cell::RefCell;
use std::io::Write;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::geometry::Octree;
use crate::hbasis::{build_hb, BasisBlock, HBTransform, LevelRange};
use crate::kernels::{cross_kernel, KernelOperator, KernelSpec};
use crate::polyspace::poly_dim;
use crate::solver::{cg, LinearOperator};
use crate::sparse::CsrMatrix;
use crate::Point3;

/// Kernel entries evaluated per chunk when forming box-pair products.
const CHUNK_ENTRIES: usize = 1 << 21;

#[derive(Debug, Clone)]
pub struct MultiResOperator {
    tree: Octree,
    hb: HBTransform,
    kernel: KernelOperator,
    sign: f64,
}

/// Sparsified diagonal block of one level.
#[derive(Debug, Clone)]
pub struct SparseBlock {
    pub level: i32,
    /// Global column range of the level.
    pub range: Range<usize>,
    /// Entries indexed relative to `range.start`.
    pub matrix: CsrMatrix,
}

impl SparseBlock {
    pub fn max_row_nnz(&self) -> usize {
        (0..self.matrix.nrows())
            .map(|i| self.matrix.row_nnz(i))
            .max()
            .unwrap_or(0)
    }
}

/// Largest entry magnitude among pairs of boxes whose centers lie
/// `widths..widths+1` box sides apart (same and adjacent boxes share bin 1).
#[derive(Debug, Clone, PartialEq)]
pub struct DecayBin {
    pub widths: usize,
    /// Lower edge of the bin in normalized units.
    pub distance: f64,
    pub max_abs: f64,
    pub entries: usize,
}

impl MultiResOperator {
    pub fn new(tree: Octree, hb: HBTransform, kernel: KernelOperator) -> Result<Self> {
        check_len(hb.n_nodes, kernel.len())?;
        check_len(hb.n_nodes, tree.node_count())?;
        let sign = kernel.spec().sign.signum();
        Ok(Self {
            tree,
            hb,
            kernel,
            sign,
        })
    }

    /// Octree with capacity `M(p)`, basis and kernel operator on normalized
    /// nodes.
    pub fn build(points: &[Point3], spec: KernelSpec, m: usize, p: usize) -> Result<Self> {
        let tree = Octree::build(points, poly_dim(p))?;
        let hb = build_hb(&tree, points, m, p)?;
        let kernel = KernelOperator::new(spec, points.to_vec())?;
        Self::new(tree, hb, kernel)
    }

    pub fn dim(&self) -> usize {
        self.hb.reduced_dim()
    }

    pub fn hb(&self) -> &HBTransform {
        &self.hb
    }

    pub fn tree(&self) -> &Octree {
        &self.tree
    }

    pub fn kernel(&self) -> &KernelOperator {
        &self.kernel
    }

    /// `-1` when the kernel is negative definite on the constrained space,
    /// so that `sign * K_W` is positive definite.
    pub fn sign(&self) -> f64 {
        self.sign
    }

    /// Nonempty level ranges in column order.
    pub fn level_ranges(&self) -> Vec<&LevelRange> {
        self.hb.levels.iter().filter(|l| !l.range.is_empty()).collect()
    }

    /// `K_W a`.
    pub fn matvec_kw(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), a.len())?;
        Ok(self.kw_restricted(a, 0..self.dim(), 0..self.dim()))
    }

    /// Rows `rows` of `K_W x`, where `x` lives on the columns `cols` (indexed
    /// relative to `cols.start`) and is zero elsewhere.
    pub(crate) fn kw_restricted(&self, x: &[f64], cols: Range<usize>, rows: Range<usize>) -> Vec<f64> {
        if cols.is_empty() || rows.is_empty() {
            return vec![0.0; rows.len()];
        }
        let v = self.hb.synthesize(x, cols);
        let mut kv = vec![0.0; v.len()];
        self.kernel.apply_into(&v, &mut kv);
        self.hb.analyze(&kv, rows)
    }

    /// `Psi_a^T K Psi_b` for two basis blocks, by direct summation.
    pub fn block_product(&self, a: &BasisBlock, b: &BasisBlock) -> DMatrix<f64> {
        let pts = self.kernel.points();
        let spec = self.kernel.spec();
        let bpts: Vec<Point3> = b.support.iter().map(|&i| pts[i]).collect();
        let chunk = (CHUNK_ENTRIES / bpts.len().max(1)).max(1);
        let mut out = DMatrix::zeros(a.count(), b.count());
        let mut start = 0;
        while start < a.support.len() {
            let end = (start + chunk).min(a.support.len());
            let apts: Vec<Point3> = a.support[start..end].iter().map(|&i| pts[i]).collect();
            let k = cross_kernel(spec, &apts, &bpts);
            let kb = k * &b.coeffs;
            out += a.coeffs.rows(start, end - start).transpose() * kb;
            start = end;
        }
        out
    }

    /// `|a(psi_i, psi_i)|` for every column of `T̂`.
    pub fn diag_preconditioner(&self) -> Result<Vec<f64>> {
        let mut diag = vec![0.0; self.dim()];
        let cols = 0..self.dim();
        for blk in self.hb.blocks_in(&cols) {
            let prod = self.block_product(blk, blk);
            for c in 0..blk.count() {
                let v = prod[(c, c)].abs();
                if v == 0.0 || !v.is_finite() {
                    return Err(Error::Singular(format!(
                        "basis vector {} (level {}) has diagonal entry {v}",
                        blk.offset + c,
                        blk.level
                    )));
                }
                diag[blk.offset + c] = v;
            }
        }
        Ok(diag)
    }

    /// `sign * K_W` restricted to the polynomial complement columns, with
    /// the first complement column. `None` when `m = p`.
    pub fn complement_block(&self) -> Option<(usize, DMatrix<f64>)> {
        let range = self.hb.complement_range();
        let blk = self.hb.blocks_in(&range).next()?;
        Some((range.start, self.block_product(blk, blk) * self.sign))
    }

    /// Dense `T̂` (`N x dim`); test oracle.
    pub fn dense_t_hat(&self) -> DMatrix<f64> {
        self.hb.dense().columns(0, self.dim()).into_owned()
    }

    /// Dense `K_W = T̂^T K T̂`; test oracle.
    pub fn dense_kw(&self) -> DMatrix<f64> {
        let t = self.dense_t_hat();
        let k = match self.kernel.dense() {
            Some(k) => k.clone(),
            None => crate::kernels::kernel_matrix_unchecked(self.kernel.spec(), self.kernel.points()),
        };
        let kt = k * &t;
        t.transpose() * kt
    }

    /// Grid coordinates of every box making up `L`: the owner box and its
    /// nonempty same-level neighbors.
    fn neighborhood(&self, level: usize, owner: usize) -> Vec<[i64; 3]> {
        let boxes = self.tree.boxes(level);
        let mut out = vec![to_i64(boxes[owner].coords)];
        out.extend(self.tree.neighbors(level, owner).into_iter().map(|k| to_i64(boxes[k].coords)));
        out
    }

    /// Sparsified diagonal blocks for every nonempty level. On detail level
    /// `i` an entry is kept when the neighborhoods of the two owner boxes are
    /// within `tau_scale * 2^-i`; the complement block is always dense.
    /// `tau_scale = f64::INFINITY` gives the exact diagonal blocks.
    pub fn build_sparse_diag_blocks(&self, tau_scale: f64) -> Vec<SparseBlock> {
        let mut out = Vec::new();
        for lr in self.level_ranges() {
            let blocks = &self.hb.blocks[lr.blocks.clone()];
            let base = lr.range.start;
            let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lr.range.len()];
            let hoods: Vec<Vec<[i64; 3]>> = if lr.level >= 0 {
                blocks
                    .iter()
                    .map(|b| self.neighborhood(lr.level as usize, b.owner.expect("detail blocks have owners")))
                    .collect()
            } else {
                Vec::new()
            };
            for a in 0..blocks.len() {
                for b in a..blocks.len() {
                    let keep = a == b
                        || lr.level < 0
                        || within_gap(&hoods[a], &hoods[b], tau_scale * tau_scale);
                    if !keep {
                        continue;
                    }
                    let prod = self.block_product(&blocks[a], &blocks[b]);
                    let (oa, ob) = (blocks[a].offset - base, blocks[b].offset - base);
                    for r in 0..prod.nrows() {
                        // the upper triangle is mirrored so the block is exactly symmetric
                        let first = if a == b { r } else { 0 };
                        for c in first..prod.ncols() {
                            let v = prod[(r, c)];
                            rows[oa + r].push((ob + c, v));
                            if a != b || r != c {
                                rows[ob + c].push((oa + r, v));
                            }
                        }
                    }
                }
            }
            out.push(SparseBlock {
                level: lr.level,
                range: lr.range.clone(),
                matrix: CsrMatrix::from_rows(lr.range.len(), rows),
            });
        }
        out
    }

    /// Exact level-`level` entries binned by the distance between the centers
    /// of the owning boxes, in units of that level's box side.
    pub fn decay_profile(&self, level: usize) -> Vec<DecayBin> {
        let Some(lr) = self.hb.levels.iter().find(|l| l.level == level as i32) else {
            return Vec::new();
        };
        let blocks = &self.hb.blocks[lr.blocks.clone()];
        let boxes = self.tree.boxes(level);
        let side = boxes.first().map(|b| b.side).unwrap_or(1.0);
        let mut bins: Vec<(f64, usize)> = Vec::new();
        for a in 0..blocks.len() {
            let ca = boxes[blocks[a].owner.unwrap()].center();
            for b in a..blocks.len() {
                let cb = boxes[blocks[b].owner.unwrap()].center();
                let d = crate::kernels::dist2(&ca, &cb).sqrt() / side;
                let bin = (d.floor() as usize).max(1);
                if bins.len() <= bin {
                    bins.resize(bin + 1, (0.0, 0));
                }
                let prod = self.block_product(&blocks[a], &blocks[b]);
                bins[bin].0 = bins[bin].0.max(prod.amax());
                bins[bin].1 += prod.len();
            }
        }
        bins.into_iter()
            .enumerate()
            .filter(|(_, (_, n))| *n > 0)
            .map(|(w, (max_abs, entries))| DecayBin {
                widths: w,
                distance: w as f64 * side,
                max_abs,
                entries,
            })
            .collect()
    }

    /// Writes every sparse block as `i j value` lines, each level preceded by
    /// a `# level L` comment. Indices are global columns.
    pub fn dump_sparse_blocks<W: Write>(blocks: &[SparseBlock], mut w: W) -> std::io::Result<()> {
        for blk in blocks {
            writeln!(w, "# level {}", blk.level)?;
            for i in 0..blk.matrix.nrows() {
                let (cols, vals) = blk.matrix.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    writeln!(w, "{} {} {v:?}", blk.range.start + i, blk.range.start + c)?;
                }
            }
        }
        Ok(())
    }

    /// The positive definite operator `sign * K_W`.
    pub fn signed(&self) -> SignedKw<'_> {
        SignedKw(self)
    }
}

fn to_i64(c: [u64; 3]) -> [i64; 3] {
    [c[0] as i64, c[1] as i64, c[2] as i64]
}

/// Squared gap, in box sides, between two unions of same-level boxes.
fn neighborhood_gap2(a: &[[i64; 3]], b: &[[i64; 3]]) -> f64 {
    let gap = |u: i64, v: i64| ((u - v).abs() - 1).max(0) as f64;
    let mut best = f64::INFINITY;
    for x in a {
        for y in b {
            let d: f64 = (0..3).map(|k| gap(x[k], y[k]).powi(2)).sum();
            best = best.min(d);
        }
    }
    best
}

/// Whether two box unions are within `sqrt(limit2)` box sides. The gap
/// between bounding hulls never exceeds the true gap, so it screens out most
/// far pairs before the pairwise check.
fn within_gap(a: &[[i64; 3]], b: &[[i64; 3]], limit2: f64) -> bool {
    let hull = |s: &[[i64; 3]]| {
        let mut lo = s[0];
        let mut hi = s[0];
        for c in s {
            for k in 0..3 {
                lo[k] = lo[k].min(c[k]);
                hi[k] = hi[k].max(c[k]);
            }
        }
        (lo, hi)
    };
    let (alo, ahi) = hull(a);
    let (blo, bhi) = hull(b);
    let hull_gap2: f64 = (0..3)
        .map(|k| ((blo[k] - ahi[k] - 1).max(alo[k] - bhi[k] - 1)).max(0) as f64)
        .map(|g| g * g)
        .sum();
    hull_gap2 <= limit2 && neighborhood_gap2(a, b) <= limit2
}

/// `sign * K_W` as a linear operator.
pub struct SignedKw<'a>(&'a MultiResOperator);

impl LinearOperator for SignedKw<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.0.matvec_kw(x)?;
        y.iter_mut().for_each(|v| *v *= self.0.sign);
        Ok(y)
    }
}

struct SignedCsr<'a>(&'a CsrMatrix, f64);

impl LinearOperator for SignedCsr<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.0.matvec(x);
        y.iter_mut().for_each(|v| *v *= self.1);
        Ok(y)
    }
}

/// Block symmetric Gauss-Seidel preconditioner on the level blocks of
/// `sign * K_W`.
///
/// With `U` the blocks coupling a finer row level to a coarser column level
/// and `D` the (sparsified) diagonal blocks, the preconditioner is
/// `(U + D) D^-1 (U^T + D)`; its inverse is applied as a coarse-to-fine
/// substitution with `U + D`, a multiply by `D`, and a fine-to-coarse
/// substitution with `U^T + D`. Off-diagonal products use the exact operator;
/// diagonal blocks are inverted with CG.
pub struct SsorPreconditioner<'a> {
    op: &'a MultiResOperator,
    blocks: Vec<SparseBlock>,
    inner_tol: f64,
    inner_cap: usize,
    strict: bool,
    inner_iterations: RefCell<Vec<usize>>,
}

impl<'a> SsorPreconditioner<'a> {
    pub fn new(op: &'a MultiResOperator, blocks: Vec<SparseBlock>, inner_tol: f64, inner_cap: usize) -> Self {
        let n = blocks.len();
        Self {
            op,
            blocks,
            inner_tol,
            inner_cap,
            strict: true,
            inner_iterations: RefCell::new(vec![0; n]),
        }
    }

    /// In lenient mode an inner solve that misses its tolerance or detects
    /// indefiniteness is logged and the best available block solution used.
    pub fn lenient(mut self) -> Self {
        self.strict = false;
        self
    }

    pub fn blocks(&self) -> &[SparseBlock] {
        &self.blocks
    }

    /// Inner CG iterations accumulated per level block, with the level.
    pub fn inner_iterations(&self) -> Vec<(i32, usize)> {
        self.blocks
            .iter()
            .zip(self.inner_iterations.borrow().iter())
            .map(|(b, &n)| (b.level, n))
            .collect()
    }

    fn inner_solve(&self, b: usize, rhs: &[f64]) -> Result<Vec<f64>> {
        let blk = &self.blocks[b];
        let a = SignedCsr(&blk.matrix, self.op.sign);
        match cg(&a, rhs, self.inner_tol, self.inner_cap) {
            Ok(res) => {
                self.inner_iterations.borrow_mut()[b] += res.iterations;
                if !res.converged {
                    if self.strict {
                        return Err(Error::Preconditioner {
                            level: blk.level,
                            iterations: res.iterations,
                            residual: res.residual,
                        });
                    }
                    log::warn!(
                        "inner solve on level {} stopped at residual {:.3e} after {} iterations",
                        blk.level,
                        res.residual,
                        res.iterations
                    );
                }
                Ok(res.x)
            }
            Err(e) if !self.strict => {
                log::warn!("inner solve on level {} failed ({e}); using its diagonal", blk.level);
                Ok(rhs
                    .iter()
                    .enumerate()
                    .map(|(i, r)| r / blk.matrix.get(i, i).unwrap_or(1.0).abs())
                    .collect())
            }
            Err(e) => Err(e),
        }
    }
}

impl LinearOperator for SsorPreconditioner<'_> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, beta: &[f64]) -> Result<Vec<f64>> {
        let dim = self.op.dim();
        check_len(dim, beta.len())?;
        let sign = self.op.sign;
        let nb = self.blocks.len();
        let mut gamma = vec![0.0; dim];
        for b in (0..nb).rev() {
            let r = self.blocks[b].range.clone();
            let mut rhs = beta[r.clone()].to_vec();
            let after = r.end..dim;
            if !after.is_empty() {
                let t = self.op.kw_restricted(&gamma[after.clone()], after, r.clone());
                for (x, y) in rhs.iter_mut().zip(t) {
                    *x -= sign * y;
                }
            }
            let sol = self.inner_solve(b, &rhs)?;
            gamma[r].copy_from_slice(&sol);
        }
        let mut eta = vec![0.0; dim];
        for blk in &self.blocks {
            let r = blk.range.clone();
            let y = blk.matrix.matvec(&gamma[r.clone()]);
            for (e, v) in eta[r].iter_mut().zip(y) {
                *e = sign * v;
            }
        }
        let mut mu = vec![0.0; dim];
        for b in 0..nb {
            let r = self.blocks[b].range.clone();
            let mut rhs = eta[r.clone()].to_vec();
            let before = 0..r.start;
            if !before.is_empty() {
                let t = self.op.kw_restricted(&mu[before.clone()], before, r.clone());
                for (x, y) in rhs.iter_mut().zip(t) {
                    *x -= sign * y;
                }
            }
            let sol = self.inner_solve(b, &rhs)?;
            mu[r].copy_from_slice(&sol);
        }
        Ok(mu)
    }
}

/// Dense `(U^T + D)^-1 D (U + D)^-1` for a dense `sign * K_W` and dense
/// diagonal blocks; test oracle for [`SsorPreconditioner`].
pub fn dense_ssor_inverse(a: &DMatrix<f64>, d: &DMatrix<f64>, ranges: &[Range<usize>]) -> DMatrix<f64> {
    let n = a.nrows();
    let mut upper = DMatrix::zeros(n, n);
    for (bi, ri) in ranges.iter().enumerate() {
        for rj in &ranges[bi + 1..] {
            upper.view_mut((ri.start, rj.start), (ri.len(), rj.len()))
                .copy_from(&a.view((ri.start, rj.start), (ri.len(), rj.len())));
        }
    }
    let ud = &upper + d;
    let lu1 = ud.clone().lu();
    let lu2 = (upper.transpose() + d).lu();
    let first = lu1.try_inverse().expect("nonsingular");
    let second = lu2.try_inverse().expect("nonsingular");
    second * d * first
}

/// Euclidean norm helper for tests and reports.
pub fn vec_norm(v: &[f64]) -> f64 {
    DVector::from_column_slice(v).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;

    fn cloud(n: usize, seed: u64) -> Vec<Point3> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        (0..n).map(|_| [next(), next(), next()]).collect()
    }

    fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
        cloud(n.div_ceil(3), seed).into_iter().flatten().take(n).collect()
    }

    #[test]
    fn zero_and_unit_columns_match_dense() {
        let pts = cloud(200, 1);
        let op = MultiResOperator::build(&pts, KernelSpec::biharmonic(), 0, 1).unwrap();
        assert_eq!(op.dim(), 199);
        assert!(op.matvec_kw(&vec![0.0; 199]).unwrap().iter().all(|&v| v == 0.0));
        let dense = op.dense_kw();
        let mut e = vec![0.0; 199];
        e[1] = 1.0;
        let col = op.matvec_kw(&e).unwrap();
        let scale = dense.column(1).amax();
        for (i, v) in col.iter().enumerate() {
            assert!((v - dense[(i, 1)]).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn symmetric_and_definite() {
        let pts = cloud(300, 2);
        let op = MultiResOperator::build(&pts, KernelSpec::biharmonic(), 1, 3).unwrap();
        for t in 0..20 {
            let a = rand_vec(op.dim(), 10 + t);
            let b = rand_vec(op.dim(), 100 + t);
            let ka = op.matvec_kw(&a).unwrap();
            let kb = op.matvec_kw(&b).unwrap();
            let lhs: f64 = ka.iter().zip(&b).map(|(x, y)| x * y).sum();
            let rhs: f64 = a.iter().zip(&kb).map(|(x, y)| x * y).sum();
            assert!((lhs - rhs).abs() <= 1e-9 * vec_norm(&a) * vec_norm(&b));
            let q: f64 = ka.iter().zip(&a).map(|(x, y)| x * y).sum();
            assert!(q < 0.0);
        }
    }

    #[test]
    fn diagonal_matches_dense() {
        let pts = cloud(300, 3);
        let op = MultiResOperator::build(&pts, KernelSpec::biharmonic(), 0, 1).unwrap();
        let d = op.diag_preconditioner().unwrap();
        let dense = op.dense_kw();
        for (i, v) in d.iter().enumerate() {
            assert!(*v > 0.0);
            assert!((v - dense[(i, i)].abs()).abs() <= 1e-11 * dense[(i, i)].abs().max(1e-300));
        }
    }

    #[test]
    fn sparse_blocks_agree_with_dense() {
        let pts = cloud(500, 4);
        let op = MultiResOperator::build(&pts, KernelSpec::biharmonic(), 3, 3).unwrap();
        let dense = op.dense_kw();
        let bound = 8 * poly_dim(3) * 343;
        for blk in op.build_sparse_diag_blocks(1.0) {
            assert!(blk.max_row_nnz() <= bound);
            let base = blk.range.start;
            for i in 0..blk.matrix.nrows() {
                let mut kept_max = 0.0f64;
                for j in 0..blk.matrix.ncols() {
                    let exact = dense[(base + i, base + j)];
                    if let Some(v) = blk.matrix.get(i, j) {
                        assert!((v - exact).abs() <= 1e-11 * dense.amax());
                        assert_eq!(Some(v), blk.matrix.get(j, i));
                        kept_max = kept_max.max(v.abs());
                    }
                }
                for j in 0..blk.matrix.ncols() {
                    if blk.matrix.get(i, j).is_none() {
                        assert!(dense[(base + i, base + j)].abs() < kept_max);
                    }
                }
            }
        }
    }

    #[test]
    fn exact_blocks_on_single_box_level() {
        let pts = cloud(120, 5);
        let op = MultiResOperator::build(&pts, KernelSpec::multiquadric(0.01), 1, 3).unwrap();
        let dense = op.dense_kw();
        for blk in op.build_sparse_diag_blocks(1.0) {
            let lr = op.hb.levels.iter().find(|l| l.level == blk.level).unwrap();
            if lr.blocks.len() == 1 {
                let r = blk.range.clone();
                let want = dense.view((r.start, r.start), (r.len(), r.len()));
                assert!((blk.matrix.to_dense() - want).amax() <= 1e-11 * dense.amax());
            }
        }
    }

    #[test]
    fn ssor_matches_dense_oracle() {
        let pts = cloud(300, 6);
        let op = MultiResOperator::build(&pts, KernelSpec::biharmonic(), 1, 3).unwrap();
        let blocks = op.build_sparse_diag_blocks(1.0);
        let ranges: Vec<_> = blocks.iter().map(|b| b.range.clone()).collect();
        assert!(ranges.len() >= 2);
        let a = op.dense_kw() * op.sign();
        let mut d = DMatrix::zeros(op.dim(), op.dim());
        for b in &blocks {
            d.view_mut((b.range.start, b.range.start), (b.range.len(), b.range.len()))
                .copy_from(&(b.matrix.to_dense() * op.sign()));
        }
        let oracle = dense_ssor_inverse(&a, &d, &ranges);
        let ssor = SsorPreconditioner::new(&op, blocks, 1e-12, 2000);
        let beta = rand_vec(op.dim(), 7);
        let got = ssor.apply(&beta).unwrap();
        let want = &oracle * DVector::from_column_slice(&beta);
        let err = (DVector::from_vec(got) - &want).norm() / want.norm();
        assert!(err <= 1e-5, "{err}");
    }

    #[test]
    fn single_level_ssor_is_block_solve() {
        // 20 nodes with m = 1, p = 3: only the complement block remains
        let pts = cloud(20, 8);
        let op = MultiResOperator::build(&pts, KernelSpec::biharmonic(), 1, 3).unwrap();
        let blocks = op.build_sparse_diag_blocks(1.0);
        assert_eq!(blocks.len(), 1);
        let a = op.dense_kw() * op.sign();
        let ssor = SsorPreconditioner::new(&op, blocks, 1e-13, 500);
        let beta = rand_vec(op.dim(), 9);
        let got = ssor.apply(&beta).unwrap();
        let want = a.lu().solve(&DVector::from_column_slice(&beta)).unwrap();
        let err = (DVector::from_vec(got) - &want).norm() / want.norm();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn gap_between_box_unions() {
        let a = [[0, 0, 0], [1, 0, 0]];
        let b = [[4, 0, 0]];
        assert_eq!(neighborhood_gap2(&a, &b), 4.0);
        let c = [[3, 3, 0]];
        assert_eq!(neighborhood_gap2(&a, &c), 5.0);
        assert_eq!(neighborhood_gap2(&a, &[[2, 1, 1]]), 0.0);
        assert!(within_gap(&a, &b, 4.0));
        assert!(!within_gap(&a, &b, 3.9));
    }

    #[test]
    fn decay_profile_bins() {
        let pts = cloud(400, 10);
        let op = MultiResOperator::build(&pts, KernelSpec::biharmonic(), 0, 0).unwrap();
        let prof = op.decay_profile(op.hb.depth.saturating_sub(1));
        assert!(!prof.is_empty());
        assert_eq!(prof[0].widths, 1);
        let near = prof[0].max_abs;
        assert!(prof.iter().all(|b| b.max_abs <= near));
        assert!(prof.iter().all(|b| b.entries > 0));
    }
}
