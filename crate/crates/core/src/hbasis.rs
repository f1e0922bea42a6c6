//! Adapted discrete hierarchical basis.
//!
//! Every box of the octree, from the finest level up to the root, receives a
//! set of orthonormal vectors: the node indicators for a leaf, or the average
//! vectors handed up by its children otherwise. The SVD of their moment matrix
//! against the degree-`p` monomials splits them into averages (row space),
//! which move to the parent, and details (null space), which annihilate every
//! polynomial of degree `p` and become basis columns. The averages left at the
//! root span `P^p(X)` and are replaced by an orthonormal basis of `P^m(X)`
//! and its complement in `P^p(X)`.
//!
//! Vectors are stored per box as a dense coefficient block over the box's
//! node indices.

use std::io::{Read, Write};
use std::ops::Range;

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::geometry::Octree;
use crate::linalg::{fix_sign, numerical_rank, svd};
use crate::polyspace::{build_q, orthonormal_poly_basis, poly_dim};
use crate::Point3;

/// Relative singular-value cut for the per-box rank decision.
pub const RANK_RTOL: f64 = 1e-12;
/// Absolute floor of the per-box rank cut.
pub const RANK_ATOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VectorKind {
    Average,
    Detail,
    /// Part of `P^p(X)` orthogonal to `P^m(X)`.
    PolyComplement,
    /// Orthonormal basis of `P^m(X)`.
    PolyCoarse,
}

impl VectorKind {
    fn code(self) -> u8 {
        match self {
            VectorKind::Average => 0,
            VectorKind::Detail => 1,
            VectorKind::PolyComplement => 2,
            VectorKind::PolyCoarse => 3,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        Ok(match c {
            0 => VectorKind::Average,
            1 => VectorKind::Detail,
            2 => VectorKind::PolyComplement,
            3 => VectorKind::PolyCoarse,
            _ => return Err(Error::Parse {
                line: 0,
                message: format!("unknown vector kind {c} in snapshot"),
            }),
        })
    }
}

/// A single sparse basis vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisVector {
    pub support: Vec<usize>,
    pub coeffs: Vec<f64>,
    /// Level `0..=n`, or `-1` for the two polynomial blocks.
    pub level: i32,
    /// Owning box as `(level, index within level)`.
    pub owner: Option<(usize, usize)>,
    pub kind: VectorKind,
}

impl BasisVector {
    pub fn canonical(i: usize, level: usize, owner: usize) -> Self {
        Self {
            support: vec![i],
            coeffs: vec![1.0],
            level: level as i32,
            owner: Some((level, owner)),
            kind: VectorKind::Average,
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        for (&i, &c) in self.support.iter().zip(&self.coeffs) {
            v[i] = c;
        }
        v
    }
}

/// Columns sharing one support: the details of one box, or one of the two
/// global polynomial blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisBlock {
    pub level: i32,
    pub owner: Option<usize>,
    pub kind: VectorKind,
    /// Sorted node indices.
    pub support: Vec<usize>,
    /// `support.len() x count` coefficients, one column per basis vector.
    pub coeffs: DMatrix<f64>,
    /// Global index of the first column.
    pub offset: usize,
}

impl BasisBlock {
    pub fn count(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.count()
    }
}

/// Contiguous global column range holding every column of one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelRange {
    pub level: i32,
    pub range: Range<usize>,
    /// Indices into [`HBTransform::blocks`].
    pub blocks: Range<usize>,
}

/// The orthonormal matrix `P` with columns ordered as: details of level `n`
/// down to level 0, then the complement block, then the `P^m(X)` block.
#[derive(Debug, Clone)]
pub struct HBTransform {
    pub n_nodes: usize,
    pub m: usize,
    pub p: usize,
    /// Finest octree level.
    pub depth: usize,
    pub capacity: usize,
    pub blocks: Vec<BasisBlock>,
    /// Detail levels from `n` down to 0 followed by level `-1` (complement).
    pub levels: Vec<LevelRange>,
    /// Monomial coefficients of the `P^m(X)` columns: `L = Q_m G`.
    pub poly_g: DMatrix<f64>,
    /// Sum over boxes of `|support| * (2s + M(p))`.
    pub cost: u64,
}

/// Splits the orthonormal columns of `v` (rows = the nodes `local`, already
/// in box coordinates) into averages and details. Returns `(averages,
/// details)` as coefficient blocks over the same rows.
fn split_box(local: &[Point3], v: &DMatrix<f64>, p: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = v.ncols();
    let q = build_q(local, p);
    let moments = q.transpose() * v;
    let padded = if moments.nrows() < s {
        let mut z = DMatrix::zeros(s, s);
        z.view_mut((0, 0), moments.shape()).copy_from(&moments);
        z
    } else {
        moments
    };
    let dec = svd(padded);
    let rank = numerical_rank(&dec.s, RANK_RTOL, RANK_ATOL);
    let mut right = dec.v;
    for j in 0..s {
        fix_sign(&mut right, j);
    }
    let avg = v * right.columns(0, rank);
    let det = v * right.columns(rank, s - rank);
    (avg, det)
}

fn box_frame(points: &[Point3], support: &[usize]) -> (Point3, f64) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &i in support {
        for a in 0..3 {
            lo[a] = lo[a].min(points[i][a]);
            hi[a] = hi[a].max(points[i][a]);
        }
    }
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
    let side = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
    (center, if side > 0.0 { side } else { 1.0 })
}

fn to_frame(points: &[Point3], support: &[usize], center: Point3, side: f64) -> Vec<Point3> {
    support
        .iter()
        .map(|&i| {
            let x = points[i];
            [
                (x[0] - center[0]) / side,
                (x[1] - center[1]) / side,
                (x[2] - center[2]) / side,
            ]
        })
        .collect()
}

/// One splitting step on an arbitrary orthonormal family. Returns the
/// averages and the details, all supported on the union of input supports.
pub fn poly_ortho(
    vectors: &[BasisVector],
    p: usize,
    points: &[Point3],
) -> Result<(Vec<BasisVector>, Vec<BasisVector>)> {
    if vectors.is_empty() {
        return Err(Error::EmptyInput("poly_ortho needs at least one vector"));
    }
    let mut support: Vec<usize> = vectors.iter().flat_map(|v| v.support.iter().copied()).collect();
    support.sort_unstable();
    support.dedup();
    if let Some(&bad) = support.iter().find(|&&i| i >= points.len()) {
        return Err(Error::Contract(format!("support index {bad} out of range")));
    }
    let mut pos = vec![usize::MAX; points.len()];
    for (r, &i) in support.iter().enumerate() {
        pos[i] = r;
    }
    let mut v = DMatrix::<f64>::zeros(support.len(), vectors.len());
    for (c, vec) in vectors.iter().enumerate() {
        if vec.support.len() != vec.coeffs.len() {
            return Err(Error::Contract("support and coefficient lengths differ".into()));
        }
        for (&i, &x) in vec.support.iter().zip(&vec.coeffs) {
            v[(pos[i], c)] += x;
        }
    }
    let gram = v.transpose() * &v;
    for i in 0..gram.nrows() {
        for j in 0..gram.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            if (gram[(i, j)] - target).abs() > 1e-10 {
                return Err(Error::Contract(format!(
                    "input vectors are not orthonormal: <v{i}, v{j}> = {}",
                    gram[(i, j)]
                )));
            }
        }
    }
    let (center, side) = box_frame(points, &support);
    let local = to_frame(points, &support, center, side);
    let (avg, det) = split_box(&local, &v, p);
    let level = vectors[0].level;
    let owner = vectors[0].owner;
    let wrap = |m: &DMatrix<f64>, kind| -> Vec<BasisVector> {
        (0..m.ncols())
            .map(|c| BasisVector {
                support: support.clone(),
                coeffs: m.column(c).iter().copied().collect(),
                level,
                owner,
                kind,
            })
            .collect()
    };
    Ok((wrap(&avg, VectorKind::Average), wrap(&det, VectorKind::Detail)))
}

/// Builds the hierarchical basis on normalized nodes and their octree.
/// Orthonormal basis of the root averages with `P^m(X)` projected out. The
/// root averages span the sampled `P^p(X)`, which can be rank deficient when
/// the nodes lie on an algebraic surface of degree at most `p`.
fn root_complement(
    tree: &Octree,
    root_avg: &DMatrix<f64>,
    lm: &DMatrix<f64>,
    n_nodes: usize,
    p: usize,
) -> Result<DMatrix<f64>> {
    let r = root_avg.ncols();
    let mp = poly_dim(p);
    if r < lm.ncols() {
        return Err(Error::Unisolvent {
            degree: p,
            rank: r,
            required: lm.ncols(),
        });
    }
    if r < mp {
        log::warn!("degree {p} polynomials have rank {r} of {mp} on the nodes; the basis keeps {r} moments");
    }
    let extra = r - lm.ncols();
    if extra == 0 {
        return Ok(DMatrix::zeros(n_nodes, 0));
    }
    let mut a = DMatrix::zeros(n_nodes, r);
    for (row, &i) in tree.root().nodes.iter().enumerate() {
        a.row_mut(i).copy_from(&root_avg.row(row));
    }
    // The averages are orthonormal and span the regression polynomials, so
    // with B = A^T L the wanted directions are A times an orthonormal basis of
    // range(B)^perp. A Householder QR of [B | I] yields it exactly; an SVD of
    // the projected averages was observed to lose orthogonality when all
    // singular values cluster at one.
    let b = a.transpose() * lm;
    if (lm - &a * &b).amax() > 1e-8 {
        return Err(Error::Logic(
            "regression polynomials are not in the span of the root averages".into(),
        ));
    }
    let mut bi = DMatrix::zeros(r, lm.ncols() + r);
    bi.columns_mut(0, lm.ncols()).copy_from(&b);
    bi.columns_mut(lm.ncols(), r).fill_with_identity();
    let q = bi.qr().q();
    let mut d = &a * q.columns(lm.ncols(), extra);
    for j in 0..extra {
        fix_sign(&mut d, j);
    }
    Ok(d)
}

pub fn build_hb(tree: &Octree, points: &[Point3], m: usize, p: usize) -> Result<HBTransform> {
    if p < m {
        return Err(Error::Domain(format!(
            "basis needs p >= m, got p = {p}, m = {m}"
        )));
    }
    let n_nodes = points.len();
    check_len(tree.node_count(), n_nodes)?;
    let lm = orthonormal_poly_basis(points, m)?;
    let mp = poly_dim(p);
    let depth = tree.depth();

    let mut pos = vec![usize::MAX; n_nodes];
    let mut cost: u64 = 0;
    // averages[k] for the boxes of the level below the one being processed
    let mut below: Vec<DMatrix<f64>> = Vec::new();
    let mut detail_levels: Vec<Vec<BasisBlock>> = Vec::with_capacity(depth + 1);
    for j in (0..=depth).rev() {
        let boxes = tree.boxes(j);
        let mut averages = Vec::with_capacity(boxes.len());
        let mut details = Vec::new();
        for (k, b) in boxes.iter().enumerate() {
            let rows = b.nodes.len();
            let v = if b.is_leaf() {
                DMatrix::identity(rows, rows)
            } else {
                for (r, &i) in b.nodes.iter().enumerate() {
                    pos[i] = r;
                }
                let s: usize = b.children.iter().map(|&c| below[c].ncols()).sum();
                let mut v = DMatrix::zeros(rows, s);
                let mut col = 0;
                for &c in &b.children {
                    let child = &tree.boxes(j + 1)[c];
                    let a = &below[c];
                    for (r, &i) in child.nodes.iter().enumerate() {
                        let row = pos[i];
                        for t in 0..a.ncols() {
                            v[(row, col + t)] = a[(r, t)];
                        }
                    }
                    col += a.ncols();
                }
                v
            };
            let s = v.ncols();
            cost += (rows * (2 * s + mp)) as u64;
            let local = to_frame(points, &b.nodes, b.center(), b.side);
            let (avg, det) = split_box(&local, &v, p);
            if det.ncols() > 0 {
                details.push(BasisBlock {
                    level: j as i32,
                    owner: Some(k),
                    kind: VectorKind::Detail,
                    support: b.nodes.clone(),
                    coeffs: det,
                    offset: 0,
                });
            }
            averages.push(avg);
        }
        below = averages;
        detail_levels.push(details);
    }
    let root_avg = below.pop().unwrap_or_else(|| DMatrix::zeros(0, 0));
    let complement = root_complement(tree, &root_avg, &lm.l, n_nodes, p)?;

    let all: Vec<usize> = (0..n_nodes).collect();
    let mut blocks = Vec::new();
    let mut levels = Vec::new();
    let mut offset = 0;
    let mut push_level = |level: i32, group: Vec<BasisBlock>, blocks: &mut Vec<BasisBlock>| {
        let start = offset;
        let first = blocks.len();
        for mut blk in group {
            blk.offset = offset;
            offset += blk.count();
            blocks.push(blk);
        }
        levels.push(LevelRange {
            level,
            range: start..offset,
            blocks: first..blocks.len(),
        });
    };
    for (idx, group) in detail_levels.into_iter().enumerate() {
        push_level((depth - idx) as i32, group, &mut blocks);
    }
    let comp_group = if complement.ncols() > 0 {
        vec![BasisBlock {
            level: -1,
            owner: None,
            kind: VectorKind::PolyComplement,
            support: all.clone(),
            coeffs: complement,
            offset: 0,
        }]
    } else {
        Vec::new()
    };
    push_level(-1, comp_group, &mut blocks);
    let poly_offset = levels.last().map(|l| l.range.end).unwrap_or(0);
    blocks.push(BasisBlock {
        level: -1,
        owner: None,
        kind: VectorKind::PolyCoarse,
        support: all,
        coeffs: lm.l,
        offset: poly_offset,
    });
    let hb = HBTransform {
        n_nodes,
        m,
        p,
        depth,
        capacity: tree.capacity,
        blocks,
        levels,
        poly_g: lm.g,
        cost,
    };
    if hb.total_columns() != n_nodes {
        return Err(Error::Logic(format!(
            "basis has {} columns for {} nodes",
            hb.total_columns(),
            n_nodes
        )));
    }
    Ok(hb)
}

impl HBTransform {
    pub fn total_columns(&self) -> usize {
        self.blocks.iter().map(|b| b.count()).sum()
    }

    /// Number of columns of `T̂` (details plus complement): `N - M(m)`.
    pub fn reduced_dim(&self) -> usize {
        self.n_nodes - poly_dim(self.m)
    }

    pub fn poly_range(&self) -> Range<usize> {
        self.reduced_dim()..self.n_nodes
    }

    pub fn complement_range(&self) -> Range<usize> {
        self.levels.last().map(|l| l.range.clone()).unwrap_or(0..0)
    }

    /// The `P^m(X)` block `L`.
    pub fn poly_basis(&self) -> &DMatrix<f64> {
        &self.blocks.last().expect("polynomial block always present").coeffs
    }

    pub fn detail_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.kind == VectorKind::Detail)
            .map(|b| b.count())
            .sum()
    }

    /// Generous bound on [`HBTransform::cost`]: every box of a level touches
    /// its nodes with at most `max(capacity, 8 M(p))` input vectors.
    pub fn cost_bound(&self) -> u64 {
        let mp = poly_dim(self.p);
        let s = self.capacity.max(8 * mp);
        (self.n_nodes * (self.depth + 1) * (2 * s + mp)) as u64
    }

    /// Basis vector at global column `col`.
    pub fn vector(&self, col: usize) -> Option<BasisVector> {
        let blk = self.blocks.iter().find(|b| b.range().contains(&col))?;
        let c = col - blk.offset;
        Some(BasisVector {
            support: blk.support.clone(),
            coeffs: blk.coeffs.column(c).iter().copied().collect(),
            level: blk.level,
            owner: blk.owner.map(|k| (blk.level as usize, k)),
            kind: blk.kind,
        })
    }

    /// Analysis `w = P^T v`.
    pub fn apply_pt(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_nodes, v.len())?;
        Ok(self.analyze(v, 0..self.n_nodes))
    }

    /// Synthesis `v = P w`.
    pub fn apply_p(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_nodes, w.len())?;
        Ok(self.synthesize(w, 0..self.n_nodes))
    }

    /// Coefficients `P[:, cols]^T v`; `cols` must be a union of whole blocks.
    pub(crate) fn analyze(&self, v: &[f64], cols: Range<usize>) -> Vec<f64> {
        let mut out = vec![0.0; cols.len()];
        for blk in self.blocks_in(&cols) {
            for c in 0..blk.count() {
                let col = blk.coeffs.column(c);
                let mut acc = 0.0;
                for (r, &i) in blk.support.iter().enumerate() {
                    acc += col[r] * v[i];
                }
                out[blk.offset + c - cols.start] = acc;
            }
        }
        out
    }

    /// `P[:, cols] w` for `w` indexed relative to `cols.start`.
    pub(crate) fn synthesize(&self, w: &[f64], cols: Range<usize>) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes];
        for blk in self.blocks_in(&cols) {
            for c in 0..blk.count() {
                let x = w[blk.offset + c - cols.start];
                if x == 0.0 {
                    continue;
                }
                let col = blk.coeffs.column(c);
                for (r, &i) in blk.support.iter().enumerate() {
                    out[i] += col[r] * x;
                }
            }
        }
        out
    }

    pub(crate) fn blocks_in<'a>(&'a self, cols: &'a Range<usize>) -> impl Iterator<Item = &'a BasisBlock> + 'a {
        self.blocks.iter().filter(move |b| {
            let r = b.range();
            debug_assert!(
                r.is_empty() || (r.start >= cols.start && r.end <= cols.end) || r.end <= cols.start || r.start >= cols.end,
                "column range splits a block"
            );
            r.start >= cols.start && r.end <= cols.end && !r.is_empty()
        })
    }

    /// Dense `N x N` matrix `P`; intended for test oracles at small `N`.
    pub fn dense(&self) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.n_nodes, self.n_nodes);
        for blk in &self.blocks {
            for c in 0..blk.count() {
                for (r, &i) in blk.support.iter().enumerate() {
                    p[(i, blk.offset + c)] = blk.coeffs[(r, c)];
                }
            }
        }
        p
    }

    /// Largest `|<psi, q>|` over detail columns against the degree-`p`
    /// monomials, and over complement columns against degree `m`.
    pub fn moment_residuals(&self, points: &[Point3]) -> (f64, f64) {
        let qp = build_q(points, self.p);
        let qm = build_q(points, self.m);
        let mut detail = 0.0f64;
        let mut comp = 0.0f64;
        for blk in &self.blocks {
            let (q, slot) = match blk.kind {
                VectorKind::Detail => (&qp, &mut detail),
                VectorKind::PolyComplement => (&qm, &mut comp),
                _ => continue,
            };
            let rows = q.select_rows(blk.support.iter());
            let r = rows.transpose() * &blk.coeffs;
            *slot = slot.max(r.amax());
        }
        (detail, comp)
    }

    const MAGIC: &'static [u8; 8] = b"HBRBFSNP";
    const VERSION: u32 = 1;

    /// Binary snapshot: magic, version, sizes, then every block with its
    /// support and column-major coefficients. All values little-endian.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(Self::MAGIC)?;
        w.write_all(&Self::VERSION.to_le_bytes())?;
        for v in [
            self.n_nodes as u64,
            self.m as u64,
            self.p as u64,
            self.depth as u64,
            self.capacity as u64,
            self.cost,
            self.total_columns() as u64,
            self.blocks.len() as u64,
        ] {
            w.write_all(&v.to_le_bytes())?;
        }
        for blk in &self.blocks {
            w.write_all(&blk.level.to_le_bytes())?;
            w.write_all(&blk.owner.map(|k| k as i64).unwrap_or(-1).to_le_bytes())?;
            w.write_all(&[blk.kind.code()])?;
            w.write_all(&(blk.support.len() as u64).to_le_bytes())?;
            w.write_all(&(blk.count() as u64).to_le_bytes())?;
            for &i in &blk.support {
                w.write_all(&(i as u64).to_le_bytes())?;
            }
            for x in blk.coeffs.iter() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        w.write_all(&(self.poly_g.nrows() as u64).to_le_bytes())?;
        for x in self.poly_g.iter() {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<Self> {
        fn bad(message: impl Into<String>) -> Error {
            Error::Parse {
                line: 0,
                message: message.into(),
            }
        }
        fn u64_(r: &mut impl Read) -> Result<u64> {
            let mut b = [0u8; 8];
            r.read_exact(&mut b)?;
            Ok(u64::from_le_bytes(b))
        }
        fn f64_(r: &mut impl Read) -> Result<f64> {
            Ok(f64::from_bits(u64_(r)?))
        }
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != Self::MAGIC {
            return Err(bad("not a basis snapshot"));
        }
        let mut vb = [0u8; 4];
        r.read_exact(&mut vb)?;
        let version = u32::from_le_bytes(vb);
        if version != Self::VERSION {
            return Err(bad(format!("unsupported snapshot version {version}")));
        }
        let n_nodes = u64_(&mut r)? as usize;
        let m = u64_(&mut r)? as usize;
        let p = u64_(&mut r)? as usize;
        let depth = u64_(&mut r)? as usize;
        let capacity = u64_(&mut r)? as usize;
        let cost = u64_(&mut r)?;
        let columns = u64_(&mut r)? as usize;
        let nblocks = u64_(&mut r)? as usize;
        if columns != n_nodes || p < m {
            return Err(bad("inconsistent snapshot header"));
        }
        let mut blocks = Vec::with_capacity(nblocks);
        let mut offset = 0;
        for _ in 0..nblocks {
            let mut lb = [0u8; 4];
            r.read_exact(&mut lb)?;
            let level = i32::from_le_bytes(lb);
            let owner = u64_(&mut r)? as i64;
            let mut kb = [0u8; 1];
            r.read_exact(&mut kb)?;
            let kind = VectorKind::from_code(kb[0])?;
            let rows = u64_(&mut r)? as usize;
            let cols = u64_(&mut r)? as usize;
            if rows > n_nodes || cols > n_nodes {
                return Err(bad("block larger than node count"));
            }
            let support = (0..rows)
                .map(|_| u64_(&mut r).map(|x| x as usize))
                .collect::<Result<Vec<_>>>()?;
            let data = (0..rows * cols).map(|_| f64_(&mut r)).collect::<Result<Vec<_>>>()?;
            blocks.push(BasisBlock {
                level,
                owner: (owner >= 0).then_some(owner as usize),
                kind,
                support,
                coeffs: DMatrix::from_vec(rows, cols, data),
                offset,
            });
            offset += cols;
        }
        let g_rows = u64_(&mut r)? as usize;
        let g_data = (0..g_rows * g_rows).map(|_| f64_(&mut r)).collect::<Result<Vec<_>>>()?;
        let poly_g = DMatrix::from_vec(g_rows, g_rows, g_data);

        let mut levels: Vec<LevelRange> = Vec::new();
        for lvl in (-1..=depth as i32).rev() {
            let first = blocks.iter().position(|b| b.level == lvl && b.kind != VectorKind::PolyCoarse);
            let (start, first) = match first {
                Some(f) => (blocks[f].offset, f),
                None => {
                    let prev = levels.last().map(|l| (l.range.end, l.blocks.end)).unwrap_or((0, 0));
                    (prev.0, prev.1)
                }
            };
            let mut end_blk = first;
            while end_blk < blocks.len()
                && blocks[end_blk].level == lvl
                && blocks[end_blk].kind != VectorKind::PolyCoarse
            {
                end_blk += 1;
            }
            let end = blocks[first..end_blk].iter().map(|b| b.count()).sum::<usize>() + start;
            levels.push(LevelRange {
                level: lvl,
                range: start..end,
                blocks: first..end_blk,
            });
        }
        Ok(Self {
            n_nodes,
            m,
            p,
            depth,
            capacity,
            blocks,
            levels,
            poly_g,
            cost,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Octree;
    use crate::linalg::{orthonormality_defect, projector_distance};

    fn cloud(n: usize, seed: u64) -> Vec<Point3> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        (0..n).map(|_| [next(), next(), next()]).collect()
    }

    fn hb(n: usize, m: usize, p: usize, seed: u64) -> (Vec<Point3>, HBTransform) {
        let pts = cloud(n, seed);
        let tree = Octree::build(&pts, poly_dim(p)).unwrap();
        let hb = build_hb(&tree, &pts, m, p).unwrap();
        (pts, hb)
    }

    #[test]
    fn canonical_vector_is_an_average() {
        let pts = cloud(5, 1);
        let (avg, det) = poly_ortho(&[BasisVector::canonical(2, 0, 0)], 3, &pts).unwrap();
        assert!(det.is_empty());
        assert_eq!(avg.len(), 1);
        assert_eq!(avg[0].to_dense(5), vec![0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn small_family_has_no_details() {
        let pts = cloud(20, 2);
        let vs: Vec<_> = (0..10).map(|i| BasisVector::canonical(i, 0, 0)).collect();
        let (avg, det) = poly_ortho(&vs, 1, &pts).unwrap();
        assert_eq!(avg.len() + det.len(), 10);
        assert_eq!(det.len(), 6);
        let (avg, det) = poly_ortho(&vs[..4], 1, &pts).unwrap();
        assert_eq!((avg.len(), det.len()), (4, 0));
    }

    #[test]
    fn details_annihilate_box_polynomials() {
        let pts = cloud(23, 3);
        let vs: Vec<_> = (0..23).map(|i| BasisVector::canonical(i, 0, 0)).collect();
        let (_, det) = poly_ortho(&vs, 3, &pts).unwrap();
        assert_eq!(det.len(), 3);
        let q = build_q(&pts, 3);
        for d in &det {
            let v = nalgebra::DVector::from_vec(d.to_dense(23));
            assert!((q.transpose() * &v).amax() <= 1e-10);
        }
        let dmat = DMatrix::from_fn(23, 3, |i, j| det[j].to_dense(23)[i]);
        // independent oracle: trailing left singular vectors of the padded Q
        let null = {
            let dec = nalgebra::linalg::SVD::new(
                DMatrix::from_fn(23, 23, |i, j| if j < 20 { q[(i, j)] } else { 0.0 }),
                true,
                false,
            );
            dec.u.unwrap().columns(20, 3).into_owned()
        };
        assert!(projector_distance(&dmat, &null) < 1e-8);
    }

    #[test]
    fn rejects_non_orthonormal_input() {
        let pts = cloud(4, 4);
        let mut v = BasisVector::canonical(0, 0, 0);
        v.coeffs[0] = 2.0;
        assert!(matches!(poly_ortho(&[v], 1, &pts), Err(Error::Contract(_))));
    }

    #[test]
    fn minimal_node_set_has_only_polynomial_columns() {
        let (_, hb) = hb(20, 1, 3, 5);
        assert_eq!(hb.detail_count(), 0);
        assert_eq!(hb.complement_range().len(), 16);
        assert_eq!(hb.poly_range().len(), 4);
    }

    #[test]
    fn orthonormal_with_vanishing_moments() {
        let (pts, hb) = hb(400, 1, 3, 6);
        assert_eq!(hb.total_columns(), 400);
        let p = hb.dense();
        assert!(orthonormality_defect(&p) <= 1e-10);
        let (det, comp) = hb.moment_residuals(&pts);
        assert!(det <= 1e-9, "{det}");
        assert!(comp <= 1e-9, "{comp}");
        assert!(hb.cost <= hb.cost_bound());
    }

    #[test]
    fn level_ranges_are_contiguous() {
        let (_, hb) = hb(600, 0, 3, 7);
        let mut expect = 0;
        for (i, lvl) in hb.levels.iter().enumerate() {
            assert_eq!(lvl.range.start, expect);
            assert_eq!(lvl.level, hb.depth as i32 - i as i32);
            expect = lvl.range.end;
        }
        assert_eq!(expect, hb.reduced_dim());
        assert_eq!(hb.complement_range().len(), 19);
    }

    #[test]
    fn polynomial_data_lands_in_coarse_block() {
        let (pts, hb) = hb(300, 2, 3, 8);
        let v: Vec<f64> = pts.iter().map(|p| 1.0 + p[0] - 2.0 * p[1] * p[2] + p[2] * p[2]).collect();
        let w = hb.apply_pt(&v).unwrap();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for (i, x) in w.iter().enumerate() {
            if !hb.poly_range().contains(&i) {
                assert!(x.abs() <= 1e-9 * norm);
            }
        }
    }

    #[test]
    fn round_trip_and_snapshot() {
        let (_, hb) = hb(500, 3, 3, 9);
        let v: Vec<f64> = cloud(500, 10).iter().map(|p| p[0]).collect();
        let back = hb.apply_p(&hb.apply_pt(&v).unwrap()).unwrap();
        let err = v.iter().zip(&back).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(err <= 1e-11 * norm);
        let dense = hb.dense().transpose() * nalgebra::DVector::from_vec(v.clone());
        let w = hb.apply_pt(&v).unwrap();
        for (a, b) in w.iter().zip(dense.iter()) {
            assert!((a - b).abs() <= 1e-12 * norm);
        }

        let mut buf = Vec::new();
        hb.write_snapshot(&mut buf).unwrap();
        let back = HBTransform::read_snapshot(buf.as_slice()).unwrap();
        assert_eq!(back.blocks, hb.blocks);
        assert_eq!(back.levels, hb.levels);
        assert_eq!(back.poly_g, hb.poly_g);
        assert!(HBTransform::read_snapshot(&buf[..10]).is_err());
    }

    #[test]
    fn rejects_p_below_m() {
        let pts = cloud(50, 11);
        let tree = Octree::build(&pts, 4).unwrap();
        assert!(matches!(build_hb(&tree, &pts, 2, 1), Err(Error::Domain(_))));
    }
}
