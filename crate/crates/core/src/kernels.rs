//! Radial kernel seed functions and dense kernel assembly.
//!
//! Every kernel here has the form `scale * (r^2 + delta^2)^(l/2)` with
//! `l = +1` (biharmonic, multiquadric) or `l = -1` (inverse multiquadric).
//! Kernel mat-vecs are exact O(N^2) sums; [`KernelOperator`] hides whether
//! the matrix is cached or evaluated on the fly so a fast-summation backend
//! can be dropped in behind the same interface.

use nalgebra::DMatrix;

use crate::error::{check_len, Error, Result};
use crate::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `K(r) = r`.
    Biharmonic,
    /// `K(r) = (r^2 + delta^2)^(1/2)`.
    Multiquadric,
    /// `K(r) = (r^2 + delta^2)^(-1/2)`.
    InverseMultiquadric,
}

/// Sign of `v^T K v` on the polynomial-orthogonal subspace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Definiteness {
    PositiveDefinite,
    NegativeDefinite,
}

impl Definiteness {
    pub fn signum(self) -> f64 {
        match self {
            Definiteness::PositiveDefinite => 1.0,
            Definiteness::NegativeDefinite => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Shape parameter in units of the normalized domain.
    pub delta: f64,
    /// Positive multiplier applied to the seed function.
    pub scale: f64,
    /// Order of conditional definiteness.
    pub cpd_order: usize,
    pub sign: Definiteness,
}

impl KernelSpec {
    pub fn biharmonic() -> Self {
        Self {
            family: KernelFamily::Biharmonic,
            delta: 0.0,
            scale: 1.0,
            cpd_order: 1,
            sign: Definiteness::NegativeDefinite,
        }
    }

    pub fn multiquadric(delta: f64) -> Self {
        Self {
            family: KernelFamily::Multiquadric,
            delta,
            scale: 1.0,
            cpd_order: 1,
            sign: Definiteness::NegativeDefinite,
        }
    }

    pub fn inverse_multiquadric(delta: f64, scale: f64) -> Self {
        Self {
            family: KernelFamily::InverseMultiquadric,
            delta,
            scale,
            cpd_order: 0,
            sign: Definiteness::PositiveDefinite,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    /// Builds a spec from the generic `(r^2 + delta^2)^(l/2)` form. Only
    /// `l = 1` and `l = -1` are supported.
    pub fn from_exponent(l: i32, delta: f64, scale: f64) -> Result<Self> {
        let spec = match (l, delta == 0.0) {
            (1, true) => Self::biharmonic().with_scale(scale),
            (1, false) => Self::multiquadric(delta).with_scale(scale),
            (-1, _) => Self::inverse_multiquadric(delta, scale),
            _ => {
                return Err(Error::Config(format!(
                    "unsupported kernel exponent l = {l}; only +1 and -1 are available"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Config(format!(
                "kernel scale must be positive, got {}",
                self.scale
            )));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!(
                "kernel delta must be nonnegative, got {}",
                self.delta
            )));
        }
        let (order, sign) = match self.family {
            KernelFamily::Biharmonic => {
                if self.delta != 0.0 {
                    return Err(Error::Config("biharmonic kernel requires delta = 0".into()));
                }
                (1, Definiteness::NegativeDefinite)
            }
            KernelFamily::Multiquadric => {
                if self.delta == 0.0 {
                    return Err(Error::Config("multiquadric kernel requires delta > 0".into()));
                }
                (1, Definiteness::NegativeDefinite)
            }
            KernelFamily::InverseMultiquadric => {
                if self.delta == 0.0 {
                    return Err(Error::Config(
                        "inverse multiquadric kernel requires delta > 0".into(),
                    ));
                }
                (0, Definiteness::PositiveDefinite)
            }
        };
        if self.cpd_order != order || self.sign != sign {
            return Err(Error::Config(format!(
                "{:?} kernel must have cpd_order {order} and sign {sign:?}",
                self.family
            )));
        }
        Ok(())
    }

    pub fn exponent(&self) -> i32 {
        match self.family {
            KernelFamily::Biharmonic | KernelFamily::Multiquadric => 1,
            KernelFamily::InverseMultiquadric => -1,
        }
    }

    /// Evaluates the seed function at squared distance `r2`.
    #[inline]
    pub fn radial(&self, r2: f64) -> f64 {
        match self.family {
            KernelFamily::Biharmonic => self.scale * r2.sqrt(),
            KernelFamily::Multiquadric => self.scale * (r2 + self.delta * self.delta).sqrt(),
            KernelFamily::InverseMultiquadric => {
                self.scale / (r2 + self.delta * self.delta).sqrt()
            }
        }
    }

    /// Value at zero separation, i.e. the diagonal of every kernel matrix.
    pub fn at_origin(&self) -> f64 {
        self.radial(0.0)
    }

    pub fn short_name(&self) -> &'static str {
        match self.family {
            KernelFamily::Biharmonic => "biharmonic",
            KernelFamily::Multiquadric => "mq",
            KernelFamily::InverseMultiquadric => "imq",
        }
    }
}

#[inline]
pub(crate) fn dist2(x: &Point3, y: &Point3) -> f64 {
    let dx = x[0] - y[0];
    let dy = x[1] - y[1];
    let dz = x[2] - y[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub(crate) fn eval_unchecked(spec: &KernelSpec, x: &Point3, y: &Point3) -> f64 {
    spec.radial(dist2(x, y))
}

pub fn eval_kernel(spec: &KernelSpec, x: &Point3, y: &Point3) -> Result<f64> {
    spec.validate()?;
    Ok(eval_unchecked(spec, x, y))
}

/// Dense symmetric kernel matrix; the upper triangle is computed and mirrored.
pub fn kernel_matrix(spec: &KernelSpec, points: &[Point3]) -> Result<DMatrix<f64>> {
    spec.validate()?;
    if points.is_empty() {
        return Err(Error::EmptyInput("kernel_matrix needs at least one node"));
    }
    Ok(kernel_matrix_unchecked(spec, points))
}

pub(crate) fn kernel_matrix_unchecked(spec: &KernelSpec, points: &[Point3]) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let v = eval_unchecked(spec, &points[i], &points[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Rectangular cross-kernel block `K(rows_i, cols_j)`.
pub fn cross_kernel(spec: &KernelSpec, rows: &[Point3], cols: &[Point3]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| {
        eval_unchecked(spec, &rows[i], &cols[j])
    })
}

/// Matrix-free `K v` with a fixed row-major accumulation order.
pub fn kernel_matvec(spec: &KernelSpec, points: &[Point3], v: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    check_len(points.len(), v.len())?;
    let mut out = vec![0.0; points.len()];
    matvec_free(spec, points, v, &mut out);
    Ok(out)
}

fn matvec_free(spec: &KernelSpec, points: &[Point3], v: &[f64], out: &mut [f64]) {
    for (xi, o) in points.iter().zip(out.iter_mut()) {
        let mut acc = 0.0;
        for (xj, &vj) in points.iter().zip(v) {
            acc += eval_unchecked(spec, xi, xj) * vj;
        }
        *o = acc;
    }
}

/// Largest node count for which [`KernelOperator::new`] caches the dense matrix.
pub const DENSE_CACHE_LIMIT: usize = 3000;

/// Kernel mat-vec backend bound to a fixed node set.
#[derive(Debug, Clone)]
pub struct KernelOperator {
    spec: KernelSpec,
    points: Vec<Point3>,
    dense: Option<DMatrix<f64>>,
}

impl KernelOperator {
    /// Caches the dense matrix when `N <= DENSE_CACHE_LIMIT`, otherwise evaluates
    /// entries on the fly.
    pub fn new(spec: KernelSpec, points: Vec<Point3>) -> Result<Self> {
        spec.validate()?;
        if points.is_empty() {
            return Err(Error::EmptyInput("kernel operator needs at least one node"));
        }
        let dense = (points.len() <= DENSE_CACHE_LIMIT)
            .then(|| kernel_matrix_unchecked(&spec, &points));
        Ok(Self {
            spec,
            points,
            dense,
        })
    }

    pub fn matrix_free(spec: KernelSpec, points: Vec<Point3>) -> Result<Self> {
        spec.validate()?;
        if points.is_empty() {
            return Err(Error::EmptyInput("kernel operator needs at least one node"));
        }
        Ok(Self {
            spec,
            points,
            dense: None,
        })
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dense(&self) -> Option<&DMatrix<f64>> {
        self.dense.as_ref()
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.points.len(), v.len())?;
        let mut out = vec![0.0; v.len()];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    pub(crate) fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        match &self.dense {
            Some(k) => {
                let n = v.len();
                // column-major storage: accumulate column by column
                out.iter_mut().for_each(|o| *o = 0.0);
                for (j, &vj) in v.iter().enumerate() {
                    if vj == 0.0 {
                        continue;
                    }
                    let col = &k.as_slice()[j * n..(j + 1) * n];
                    for (o, &kij) in out.iter_mut().zip(col) {
                        *o += kij * vj;
                    }
                }
            }
            None => matvec_free(&self.spec, &self.points, v, out),
        }
    }

    /// Entry `K(x_i, x_j)`.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match &self.dense {
            Some(k) => k[(i, j)],
            None => eval_unchecked(&self.spec, &self.points[i], &self.points[j]),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_values() {
        let b = KernelSpec::biharmonic();
        assert_eq!(eval_kernel(&b, &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(eval_kernel(&b, &[0.3; 3], &[0.3; 3]).unwrap(), 0.0);
        let mq = KernelSpec::multiquadric(0.01);
        assert!((eval_kernel(&mq, &[0.2; 3], &[0.2; 3]).unwrap() - 0.01).abs() < 1e-18);
        let imq = KernelSpec::inverse_multiquadric(0.01, 0.01);
        assert!((eval_kernel(&imq, &[0.0; 3], &[0.0; 3]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut bad = KernelSpec::inverse_multiquadric(0.0, 1.0);
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        bad = KernelSpec::biharmonic();
        bad.delta = 0.5;
        assert!(bad.validate().is_err());
        assert!(KernelSpec::multiquadric(0.0).validate().is_err());
        assert!(KernelSpec::from_exponent(3, 0.1, 1.0).is_err());
        assert_eq!(
            KernelSpec::from_exponent(-1, 0.1, 2.0).unwrap(),
            KernelSpec::inverse_multiquadric(0.1, 2.0)
        );
        let mut wrong_order = KernelSpec::multiquadric(0.1);
        wrong_order.cpd_order = 0;
        assert!(wrong_order.validate().is_err());
    }

    #[test]
    fn small_matrices() {
        let b = KernelSpec::biharmonic();
        let k1 = kernel_matrix(&b, &[[0.0; 3]]).unwrap();
        assert_eq!(k1[(0, 0)], 0.0);
        let k2 = kernel_matrix(&b, &[[0.0; 3], [1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(k2, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let y = kernel_matvec(&b, &[[0.0; 3], [1.0, 0.0, 0.0]], &[1.0, 0.0]).unwrap();
        assert_eq!(y, vec![0.0, 1.0]);
        assert!(kernel_matrix(&b, &[]).is_err());
        assert!(matches!(
            kernel_matvec(&b, &[[0.0; 3]], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn operator_backends_agree() {
        let pts: Vec<Point3> = (0..40)
            .map(|i| {
                let t = i as f64;
                [(t * 0.37).sin() * 0.5, (t * 0.71).cos() * 0.5, (t * 0.13).sin() * 0.4]
            })
            .collect();
        let v: Vec<f64> = (0..40).map(|i| ((i * 7 % 11) as f64) - 5.0).collect();
        let spec = KernelSpec::multiquadric(0.05);
        let a = KernelOperator::new(spec, pts.clone()).unwrap().apply(&v).unwrap();
        let b = KernelOperator::matrix_free(spec, pts).unwrap().apply(&v).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-13 * (1.0 + y.abs()));
        }
    }
}
