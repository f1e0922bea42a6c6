//! Trivariate polynomial spaces sampled on node sets.
//!
//! Monomials are ordered by total degree and, within a degree, by descending
//! exponent of x, then y: `1, x, y, z, x^2, xy, xz, y^2, yz, z^2, ...`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{fix_sign, numerical_rank, svd};
use crate::Point3;

/// Singular values at or below this fraction of the largest count as zero
/// when deciding unisolvency.
pub const UNISOLVENT_RTOL: f64 = 1e-10;

/// Dimension of the trivariate polynomials of total degree at most `m`.
pub const fn poly_dim(m: usize) -> usize {
    (m + 1) * (m + 2) * (m + 3) / 6
}

/// [`poly_dim`] for externally supplied, possibly negative degrees.
pub fn poly_dim_checked(m: i64) -> Result<usize> {
    if m < 0 {
        return Err(Error::Domain(format!("polynomial degree {m} is negative")));
    }
    Ok(poly_dim(m as usize))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MonomialBasis {
    pub degree: usize,
    pub exponents: Vec<[u32; 3]>,
}

impl MonomialBasis {
    pub fn new(degree: usize) -> Self {
        let mut exponents = Vec::with_capacity(poly_dim(degree));
        for total in 0..=degree as u32 {
            for a in (0..=total).rev() {
                for b in (0..=total - a).rev() {
                    exponents.push([a, b, total - a - b]);
                }
            }
        }
        Self { degree, exponents }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    /// Writes every monomial evaluated at `p` into `out`.
    pub fn eval_into(&self, p: &Point3, out: &mut [f64]) {
        let d = self.degree;
        let mut pows = vec![[1.0f64; 3]; d + 1];
        for k in 1..=d {
            for a in 0..3 {
                pows[k][a] = pows[k - 1][a] * p[a];
            }
        }
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = pows[e[0] as usize][0] * pows[e[1] as usize][1] * pows[e[2] as usize][2];
        }
    }

    pub fn eval(&self, p: &Point3) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        self.eval_into(p, &mut out);
        out
    }
}

/// Vandermonde-type matrix `Q[i][j] = q_j(x_i)`.
pub fn build_q(points: &[Point3], m: usize) -> DMatrix<f64> {
    let basis = MonomialBasis::new(m);
    let mut q = DMatrix::zeros(points.len(), basis.len());
    let mut row = vec![0.0; basis.len()];
    for (i, p) in points.iter().enumerate() {
        basis.eval_into(p, &mut row);
        for (j, v) in row.iter().enumerate() {
            q[(i, j)] = *v;
        }
    }
    q
}

/// Orthonormal basis `L` of the sampled polynomial space together with the
/// change of basis `G` satisfying `L = Q G` for the monomial matrix `Q`.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    pub degree: usize,
    pub l: DMatrix<f64>,
    pub g: DMatrix<f64>,
}

impl PolyBasis {
    /// Monomial coefficients of the polynomial whose `L`-coordinates are `c`.
    pub fn to_monomial(&self, c: &[f64]) -> Vec<f64> {
        let v = &self.g * nalgebra::DVector::from_column_slice(c);
        v.as_slice().to_vec()
    }
}

/// Orthonormal basis of `P^m(X)` via a rank-revealing SVD of the monomial
/// matrix. Columns are signed so the first largest entry is positive, which
/// makes the constant column `+1/sqrt(N)`.
pub fn orthonormal_poly_basis(points: &[Point3], m: usize) -> Result<PolyBasis> {
    let required = poly_dim(m);
    if points.is_empty() {
        return Err(Error::EmptyInput("polynomial basis needs nodes"));
    }
    if points.len() < required {
        return Err(Error::Unisolvent {
            degree: m,
            rank: points.len().min(required),
            required,
        });
    }
    let q = build_q(points, m);
    let dec = svd(q);
    let rank = numerical_rank(&dec.s, UNISOLVENT_RTOL, 0.0);
    if rank < required {
        return Err(Error::Unisolvent {
            degree: m,
            rank,
            required,
        });
    }
    let mut l = dec.u.columns(0, required).into_owned();
    let mut g = dec.v.columns(0, required).into_owned();
    for j in 0..required {
        let inv = 1.0 / dec.s[j];
        g.column_mut(j).scale_mut(inv);
        if fix_sign(&mut l, j) < 0.0 {
            g.column_mut(j).neg_mut();
        }
    }
    Ok(PolyBasis { degree: m, l, g })
}

/// Orthonormal basis of the part of `P^p(X)` orthogonal to `P^m(X)`.
pub fn poly_complement_basis(points: &[Point3], m: usize, p: usize) -> Result<DMatrix<f64>> {
    if p < m {
        return Err(Error::Domain(format!(
            "complement needs p >= m, got p = {p}, m = {m}"
        )));
    }
    let lm = orthonormal_poly_basis(points, m)?;
    complement_from(points, &lm.l, m, p)
}

fn complement_from(
    points: &[Point3],
    lm: &DMatrix<f64>,
    m: usize,
    p: usize,
) -> Result<DMatrix<f64>> {
    let extra = poly_dim(p) - poly_dim(m);
    if extra == 0 {
        return Ok(DMatrix::zeros(points.len(), 0));
    }
    let required = poly_dim(p);
    if points.len() < required {
        return Err(Error::Unisolvent {
            degree: p,
            rank: points.len(),
            required,
        });
    }
    let qp = build_q(points, p);
    let scale = svd(qp.clone()).s[0];
    let mut e = qp.columns(poly_dim(m), extra).into_owned();
    // two projection passes keep the result orthogonal to working precision
    for _ in 0..2 {
        let coef = lm.transpose() * &e;
        e -= lm * coef;
    }
    let dec = svd(e);
    // measured against the full monomial matrix, not the projected remainder
    let rank = numerical_rank(&dec.s, 0.0, UNISOLVENT_RTOL * scale);
    if rank < extra {
        return Err(Error::Unisolvent {
            degree: p,
            rank: poly_dim(m) + rank,
            required,
        });
    }
    let mut d = dec.u.columns(0, extra).into_owned();
    for j in 0..extra {
        fix_sign(&mut d, j);
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{orthonormality_defect, projector_distance};

    fn cloud(n: usize, seed: u64) -> Vec<Point3> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        (0..n).map(|_| [next(), next(), next()]).collect()
    }

    #[test]
    fn dims() {
        assert_eq!(poly_dim(0), 1);
        assert_eq!(poly_dim(1), 4);
        assert_eq!(poly_dim(3), 20);
        assert!(poly_dim_checked(-1).is_err());
        for m in 0..6 {
            assert_eq!(MonomialBasis::new(m).len(), poly_dim(m));
        }
    }

    #[test]
    fn ordering() {
        let b = MonomialBasis::new(2);
        assert_eq!(
            b.exponents,
            vec![
                [0, 0, 0],
                [1, 0, 0],
                [0, 1, 0],
                [0, 0, 1],
                [2, 0, 0],
                [1, 1, 0],
                [1, 0, 1],
                [0, 2, 0],
                [0, 1, 1],
                [0, 0, 2]
            ]
        );
    }

    #[test]
    fn q_entries_and_prefix() {
        let q0 = build_q(&[[0.1, 0.2, 0.3], [0.4, -0.2, 0.0]], 0);
        assert!(q0.iter().all(|&v| v == 1.0));
        let q1 = build_q(&[[0.0; 3]], 1);
        assert_eq!(q1.as_slice(), &[1.0, 0.0, 0.0, 0.0]);
        let pts = cloud(10, 3);
        let q = build_q(&pts, 2);
        let basis = MonomialBasis::new(2);
        for (i, p) in pts.iter().enumerate() {
            for (j, e) in basis.exponents.iter().enumerate() {
                let direct = p[0].powi(e[0] as i32) * p[1].powi(e[1] as i32) * p[2].powi(e[2] as i32);
                assert!((q[(i, j)] - direct).abs() <= 1e-16);
            }
        }
        let q5 = build_q(&pts, 5);
        let q3 = build_q(&pts, 3);
        assert_eq!(q5.columns(0, 20).into_owned(), q3);
    }

    #[test]
    fn constant_basis() {
        let pts = cloud(4, 1);
        let b = orthonormal_poly_basis(&pts, 0).unwrap();
        for v in b.l.iter() {
            assert!((v - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn unisolvency() {
        let plane: Vec<Point3> = cloud(10, 2).into_iter().map(|p| [p[0], p[1], 0.0]).collect();
        match orthonormal_poly_basis(&plane, 1) {
            Err(Error::Unisolvent { rank, required, .. }) => {
                assert_eq!(rank, 3);
                assert_eq!(required, 4);
            }
            other => panic!("unexpected {other:?}"),
        }
        let tetra = [[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.0, 0.5]];
        assert!(orthonormal_poly_basis(&tetra, 1).is_ok());
    }

    #[test]
    fn orthonormal_and_same_span() {
        let pts = cloud(100, 7);
        let b = orthonormal_poly_basis(&pts, 3).unwrap();
        assert!(orthonormality_defect(&b.l) <= 1e-12);
        let q = build_q(&pts, 3);
        let lg = &q * &b.g;
        assert!((&lg - &b.l).amax() < 1e-10);
        let qr = q.qr().q();
        assert!(projector_distance(&qr, &b.l) < 1e-10);
    }

    #[test]
    fn complement_properties() {
        let pts = cloud(20, 11);
        assert_eq!(poly_complement_basis(&pts, 1, 1).unwrap().ncols(), 0);
        let d = poly_complement_basis(&pts, 0, 1).unwrap();
        assert_eq!(d.ncols(), 3);
        for j in 0..3 {
            assert!(d.column(j).sum().abs() < 1e-12);
        }
        assert!(poly_complement_basis(&pts, 2, 1).is_err());

        let pts = cloud(200, 5);
        let d = poly_complement_basis(&pts, 1, 3).unwrap();
        assert_eq!(d.ncols(), 16);
        let l1 = orthonormal_poly_basis(&pts, 1).unwrap().l;
        assert!((build_q(&pts, 1).transpose() * &d).amax() <= 1e-10);
        let both = nalgebra::DMatrix::from_fn(200, 20, |i, j| if j < 4 { l1[(i, j)] } else { d[(i, j - 4)] });
        assert!(orthonormality_defect(&both) < 1e-12);
        let l3 = orthonormal_poly_basis(&pts, 3).unwrap().l;
        assert!(projector_distance(&both, &l3) < 1e-9);
    }
}
