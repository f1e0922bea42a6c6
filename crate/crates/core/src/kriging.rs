//! Generalized least squares and best linear unbiased estimation with an RBF
//! covariance.
//!
//! With covariance `K` and regression polynomials `Q` of degree `m`, the GLSQ
//! coefficients `c = (Q^T K^-1 Q)^-1 Q^T K^-1 Y` coincide with the polynomial
//! part of the interpolation system `[[K, Q], [Q^T, 0]] [u; c] = [Y; 0]`, and
//! the BLUE predictor is the resulting interpolant. All kernel evaluations
//! use the normalized coordinates of the observation sites.

use nalgebra::{DMatrix, DVector, Dyn, LU};

use crate::error::{check_len, Error, Result};
use crate::geometry::{normalize_nodes, Normalization};
use crate::kernels::{cross_kernel, kernel_matrix_unchecked, Definiteness, KernelSpec};
use crate::polyspace::{build_q, orthonormal_poly_basis, poly_dim, MonomialBasis};
use crate::solver::{direct_solve_saddle, saddle_matrix, solve_rbf, Interpolant, SolveOptions, DENSE_ORACLE_LIMIT};
use crate::nodes::NodeSet;
use crate::testcases::{Stream, TAG_NOISE};
use crate::Point3;

/// Relative eigenvalue floor of the covariance square root.
pub const EIGEN_CLIP: f64 = 1e-12;
/// Most negative relative eigenvalue tolerated before the covariance is
/// declared indefinite.
pub const EIGEN_NEGATIVE_TOL: f64 = 1e-8;
/// Round-off allowance below zero for the mean squared error.
pub const MSE_NEGATIVE_TOL: f64 = 1e-10;

const QUERY_CHUNK: usize = 256;

/// Which variance the MSE surface is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MseScale {
    /// `K` is the exact covariance.
    KnownCovariance,
    /// `K` is known up to a factor, estimated as `Y^T u / N` from the fit.
    Profiled,
}

#[derive(Debug, Clone)]
pub enum FitMethod {
    /// Hierarchical-basis GMRES solve.
    Hierarchical(SolveOptions),
    /// Dense LU of the saddle system.
    Dense,
}

struct SaddleFactor {
    lu: LU<f64, Dyn, Dyn>,
    nodes: Vec<Point3>,
    normalization: Normalization,
}

/// An RBF covariance model over observation sites.
pub struct RegressionModel {
    pub kernel: KernelSpec,
    pub m: usize,
    pub points: Vec<Point3>,
    pub y: Vec<f64>,
    fitted: Option<Interpolant>,
    factor: Option<SaddleFactor>,
}

fn require_covariance(kernel: &KernelSpec) -> Result<()> {
    kernel.validate()?;
    if kernel.sign != Definiteness::PositiveDefinite || kernel.cpd_order != 0 {
        return Err(Error::Model(format!(
            "{} kernel is not positive definite and cannot serve as a covariance",
            kernel.short_name()
        )));
    }
    Ok(())
}

impl RegressionModel {
    pub fn new(kernel: KernelSpec, m: usize, points: Vec<Point3>, y: Vec<f64>) -> Result<Self> {
        require_covariance(&kernel)?;
        check_len(points.len(), y.len())?;
        if points.is_empty() {
            return Err(Error::EmptyInput("regression needs observations"));
        }
        Ok(Self {
            kernel,
            m,
            points,
            y,
            fitted: None,
            factor: None,
        })
    }

    pub fn fit(&mut self, method: FitMethod) -> Result<&Interpolant> {
        let interp = match method {
            FitMethod::Hierarchical(opts) => {
                let nodes = NodeSet::with_values(self.points.clone(), self.y.clone())?;
                let sol = solve_rbf(&nodes, self.kernel, self.m, self.m.max(3), &opts)?;
                if !sol.report.converged {
                    log::warn!("regression fit did not reach the residual target");
                }
                sol.interpolant
            }
            FitMethod::Dense => direct_solve_saddle(&self.points, &self.y, self.kernel, self.m)?.interpolant,
        };
        Ok(self.fitted.insert(interp))
    }

    pub fn fitted(&self) -> Option<&Interpolant> {
        self.fitted.as_ref()
    }

    /// BLUE prediction at `queries`.
    pub fn predict(&self, queries: &[Point3]) -> Result<Vec<f64>> {
        let f = self
            .fitted
            .as_ref()
            .ok_or_else(|| Error::Model("model has not been fitted".into()))?;
        Ok(f.evaluate(queries))
    }

    /// Factorizes the saddle matrix once; later MSE calls reuse it.
    fn saddle_factor(&mut self) -> Result<&SaddleFactor> {
        if self.factor.is_none() {
            let n = self.points.len();
            let mq = poly_dim(self.m);
            if n + mq > DENSE_ORACLE_LIMIT {
                return Err(Error::Config(format!(
                    "MSE needs a dense saddle factorization, limited to N + M(m) <= {DENSE_ORACLE_LIMIT}"
                )));
            }
            let (nodes, normalization) = normalize_nodes(&self.points)?;
            orthonormal_poly_basis(&nodes, self.m)?;
            let lu = saddle_matrix(&nodes, &self.kernel, self.m, 1.0).lu();
            if !lu.is_invertible() {
                return Err(Error::Singular("saddle matrix is singular".into()));
            }
            self.factor = Some(SaddleFactor {
                lu,
                nodes,
                normalization,
            });
        }
        Ok(self.factor.as_ref().expect("set above"))
    }

    /// Pointwise mean squared error of the BLUE predictor,
    /// `K(x, x) - [k(x); q(x)]^T S^-1 [k(x); q(x)]` with `S` the saddle matrix,
    /// optionally rescaled by the profiled process variance.
    pub fn mse(&mut self, queries: &[Point3], scale: MseScale) -> Result<Vec<f64>> {
        let factor_scale = match scale {
            MseScale::KnownCovariance => 1.0,
            MseScale::Profiled => self.profiled_variance()?,
        };
        let kernel = self.kernel;
        let m = self.m;
        let f = self.saddle_factor()?;
        let n = f.nodes.len();
        let basis = MonomialBasis::new(m);
        let k0 = kernel.at_origin();
        let mut out = Vec::with_capacity(queries.len());
        for chunk in queries.chunks(QUERY_CHUNK) {
            let xs: Vec<Point3> = chunk.iter().map(|x| f.normalization.forward(x)).collect();
            let kx = cross_kernel(&kernel, &f.nodes, &xs);
            let mut rhs = DMatrix::zeros(n + basis.len(), xs.len());
            rhs.view_mut((0, 0), (n, xs.len())).copy_from(&kx);
            for (j, x) in xs.iter().enumerate() {
                let q = basis.eval(x);
                for (i, v) in q.iter().enumerate() {
                    rhs[(n + i, j)] = *v;
                }
            }
            let sol = f.lu.solve(&rhs).ok_or_else(|| Error::Singular("saddle matrix is singular".into()))?;
            for j in 0..xs.len() {
                let mse = k0 - rhs.column(j).dot(&sol.column(j));
                if mse < -MSE_NEGATIVE_TOL * k0.max(1.0) || !mse.is_finite() {
                    return Err(Error::Degenerate(format!(
                        "mean squared error {mse:.3e} at query {:?} is negative beyond round-off",
                        chunk[j]
                    )));
                }
                out.push(mse.max(0.0) * factor_scale);
            }
        }
        Ok(out)
    }

    /// `Y^T K^-1 (Y - Q c) / N`, the maximum-likelihood process variance
    /// factor when `K` is known only up to scale.
    pub fn profiled_variance(&mut self) -> Result<f64> {
        let n = self.points.len();
        let mut rhs = DVector::zeros(n + poly_dim(self.m));
        rhs.rows_mut(0, n).copy_from_slice(&self.y);
        let f = self.saddle_factor()?;
        let sol = f.lu.solve(&rhs).ok_or_else(|| Error::Singular("saddle matrix is singular".into()))?;
        let v: f64 = self.y.iter().zip(sol.rows(0, n).iter()).map(|(a, b)| a * b).sum();
        Ok((v / n as f64).max(0.0))
    }
}

/// GLSQ coefficients for an explicit covariance `k` and regression matrix
/// `q`, via a Cholesky factorization of `k`.
pub fn glsq_with_covariance(k: &DMatrix<f64>, q: &DMatrix<f64>, y: &[f64]) -> Result<Vec<f64>> {
    check_len(k.nrows(), y.len())?;
    check_len(k.nrows(), q.nrows())?;
    let chol = k
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Model("covariance matrix is not positive definite".into()))?;
    let kinv_q = chol.solve(q);
    let kinv_y = chol.solve(&DVector::from_column_slice(y));
    let normal = q.transpose() * &kinv_q;
    let rhs = q.transpose() * kinv_y;
    let c = normal
        .cholesky()
        .ok_or_else(|| Error::Singular("Q^T K^-1 Q is singular".into()))?
        .solve(&rhs);
    Ok(c.as_slice().to_vec())
}

/// GLSQ regression coefficients, as monomial coefficients in the normalized
/// coordinates of `points`.
pub fn glsq_fit(points: &[Point3], y: &[f64], kernel: KernelSpec, m: usize) -> Result<Vec<f64>> {
    require_covariance(&kernel)?;
    check_len(points.len(), y.len())?;
    if points.len() > DENSE_ORACLE_LIMIT {
        return Err(Error::Config(format!(
            "dense GLSQ limited to N <= {DENSE_ORACLE_LIMIT}"
        )));
    }
    let (nodes, _) = normalize_nodes(points)?;
    orthonormal_poly_basis(&nodes, m)?;
    let k = kernel_matrix_unchecked(&kernel, &nodes);
    glsq_with_covariance(&k, &build_q(&nodes, m), y)
}

/// `|x|_1^3`, the smooth trend of the simulated observations.
pub fn trend(x: &Point3) -> f64 {
    (x[0].abs() + x[1].abs() + x[2].abs()).powi(3)
}

/// Symmetric square root `C` of the covariance with `C C = K`, eigenvalues
/// below `EIGEN_CLIP * lambda_max` set to zero.
pub fn covariance_sqrt(k: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = k.symmetric_eigen();
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if lmin < -EIGEN_NEGATIVE_TOL * lmax {
        return Err(Error::Model(format!(
            "covariance is indefinite: eigenvalue {lmin:.3e} against maximum {lmax:.3e}"
        )));
    }
    let roots = eig
        .eigenvalues
        .map(|l| if l > EIGEN_CLIP * lmax { l.sqrt() } else { 0.0 });
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Observations `Y_i = |x_i|_1^3 + eps_i` with `eps ~ N(0, K)` drawn from the
/// seeded generator.
pub fn simulate_observations(points: &[Point3], kernel: KernelSpec, seed: u64) -> Result<Vec<f64>> {
    require_covariance(&kernel)?;
    if points.len() > DENSE_ORACLE_LIMIT {
        return Err(Error::Config(format!(
            "noise simulation limited to N <= {DENSE_ORACLE_LIMIT}"
        )));
    }
    let (nodes, _) = normalize_nodes(points)?;
    let c = covariance_sqrt(kernel_matrix_unchecked(&kernel, &nodes))?;
    let s = Stream::new(seed, TAG_NOISE);
    let z = DVector::from_iterator(points.len(), (0..points.len() as u64).map(|i| s.normal(i)));
    let eps = c * z;
    Ok(points.iter().zip(eps.iter()).map(|(x, e)| trend(x) + e).collect())
}

/// Mean squared leave-one-out residual of the BLUE interpolant with
/// covariance `kernel`. For the saddle system `S [u; c] = [Y; 0]` the residual
/// at site `i` when it is left out is `u_i / (S^-1)_ii`.
pub fn loo_mse(points: &[Point3], y: &[f64], kernel: KernelSpec, m: usize) -> Result<f64> {
    require_covariance(&kernel)?;
    check_len(points.len(), y.len())?;
    if points.len() > DENSE_ORACLE_LIMIT {
        return Err(Error::Config(format!(
            "leave-one-out scan limited to N <= {DENSE_ORACLE_LIMIT}"
        )));
    }
    let (nodes, _) = normalize_nodes(points)?;
    orthonormal_poly_basis(&nodes, m)?;
    let n = nodes.len();
    let inv = saddle_matrix(&nodes, &kernel, m, 1.0)
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular("saddle matrix is singular".into()))?;
    let u = inv.view((0, 0), (n, n)) * DVector::from_column_slice(y);
    let mut sum = 0.0;
    for i in 0..n {
        let e = u[i] / inv[(i, i)];
        sum += e * e;
    }
    Ok(sum / n as f64)
}

/// `(delta, loo_mse)` for each shape parameter of an inverse multiquadric
/// covariance with the given scale.
pub fn loo_delta_scan(
    points: &[Point3],
    y: &[f64],
    scale: f64,
    m: usize,
    deltas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    deltas
        .iter()
        .map(|&d| Ok((d, loo_mse(points, y, KernelSpec::inverse_multiquadric(d, scale), m)?)))
        .collect()
}

/// Side of the square prediction grid.
pub const GRID_SIDE: usize = 40;

/// `GRID_SIDE x GRID_SIDE` points spanning `[0, 1]^2` in `(x1, x2)` at
/// `x3 = 0.5`, with `x2` varying fastest.
pub fn kriging_grid() -> Vec<Point3> {
    let t = |k: usize| k as f64 / (GRID_SIDE - 1) as f64;
    (0..GRID_SIDE)
        .flat_map(|i| (0..GRID_SIDE).map(move |j| [t(i), t(j), 0.5]))
        .collect()
}

/// Sum of absolute differences between horizontally and vertically adjacent
/// grid values.
pub fn grid_total_variation(values: &[f64], side: usize) -> f64 {
    assert_eq!(values.len(), side * side);
    let mut tv = 0.0;
    for i in 0..side {
        for j in 0..side {
            let v = values[i * side + j];
            if j + 1 < side {
                tv += (values[i * side + j + 1] - v).abs();
            }
            if i + 1 < side {
                tv += (values[(i + 1) * side + j] - v).abs();
            }
        }
    }
    tv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testcases::{gen_bimodal, gen_uniform_cube};

    fn imq() -> KernelSpec {
        KernelSpec::inverse_multiquadric(0.01, 0.01)
    }

    #[test]
    fn rejects_conditionally_definite_kernels() {
        let pts = gen_uniform_cube(10, 1).points;
        assert!(matches!(
            RegressionModel::new(KernelSpec::biharmonic(), 0, pts.clone(), vec![0.0; 10]),
            Err(Error::Model(_))
        ));
        assert!(matches!(glsq_fit(&pts, &[0.0; 10], KernelSpec::multiquadric(0.1), 0), Err(Error::Model(_))));
        let model = RegressionModel::new(imq(), 0, pts, vec![0.0; 10]).unwrap();
        assert!(matches!(model.predict(&[[0.0; 3]]), Err(Error::Model(_))));
    }

    #[test]
    fn identity_covariance_is_ordinary_least_squares() {
        let pts = gen_uniform_cube(30, 2).points;
        let y: Vec<f64> = gen_uniform_cube(30, 3).values.unwrap();
        let q = build_q(&pts, 1);
        let c = glsq_with_covariance(&DMatrix::identity(30, 30), &q, &y).unwrap();
        let ols = (q.transpose() * &q).lu().solve(&(q.transpose() * DVector::from_vec(y))).unwrap();
        for (a, b) in c.iter().zip(ols.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn exact_polynomial_data_is_recovered() {
        let pts = gen_uniform_cube(60, 4).points;
        let (nodes, _) = normalize_nodes(&pts).unwrap();
        let c0 = [0.3, -1.0, 2.0, 0.5];
        let q = build_q(&nodes, 1);
        let y: Vec<f64> = (&q * DVector::from_row_slice(&c0)).as_slice().to_vec();
        let c = glsq_fit(&pts, &y, KernelSpec::inverse_multiquadric(0.1, 1.0), 1).unwrap();
        for (a, b) in c.iter().zip(&c0) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn glsq_equals_saddle_block() {
        let set = gen_bimodal(200, 5);
        let y = set.values.unwrap();
        for m in [0, 1, 2] {
            let c = glsq_fit(&set.points, &y, imq(), m).unwrap();
            let direct = direct_solve_saddle(&set.points, &y, imq(), m).unwrap();
            let diff: f64 = c.iter().zip(&direct.c_raw).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let norm: f64 = direct.c_raw.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(diff <= 1e-8 * norm, "m = {m}: {diff} vs {norm}");
        }
    }

    #[test]
    fn prediction_and_mse_at_nodes() {
        let set = gen_uniform_cube(80, 6);
        let y = set.values.unwrap();
        let kernel = KernelSpec::inverse_multiquadric(0.2, 1.0);
        let mut model = RegressionModel::new(kernel, 1, set.points.clone(), y.clone()).unwrap();
        model.fit(FitMethod::Dense).unwrap();
        let pred = model.predict(&set.points[..10]).unwrap();
        for (p, v) in pred.iter().zip(&y) {
            assert!((p - v).abs() < 1e-8);
        }
        let mse = model.mse(&set.points[..10], MseScale::KnownCovariance).unwrap();
        assert!(mse.iter().all(|v| v.abs() < 1e-8), "{mse:?}");
        let inside = model.mse(&kriging_grid()[..100], MseScale::KnownCovariance).unwrap();
        assert!(inside.iter().all(|v| *v >= 0.0 && *v < kernel.at_origin() * 1.5));
    }

    #[test]
    fn far_field_mse_tends_to_prior_variance() {
        let set = gen_uniform_cube(50, 7);
        let kernel = KernelSpec::inverse_multiquadric(0.05, 1.0);
        let mut model = RegressionModel::new(kernel, 0, set.points.clone(), set.values.unwrap()).unwrap();
        let far = model.mse(&[[1e4, 1e4, 1e4]], MseScale::KnownCovariance).unwrap()[0];
        // cross-covariances vanish, leaving K(0) plus the variance of the estimated mean
        let (nodes, _) = normalize_nodes(&set.points).unwrap();
        let k = kernel_matrix_unchecked(&kernel, &nodes);
        let ones = DVector::from_element(50, 1.0);
        let kinv_ones = k.cholesky().unwrap().solve(&ones);
        let limit = kernel.at_origin() + 1.0 / ones.dot(&kinv_ones);
        assert!((far - limit).abs() <= 1e-3 * limit, "{far} vs {limit}");
        assert!(far > kernel.at_origin());
    }

    #[test]
    fn unbiased_for_polynomial_data() {
        let pts = gen_bimodal(150, 8).points;
        let poly = |x: &Point3| 1.0 + 2.0 * x[0] - x[1] + 0.5 * x[2] * x[2] - x[0] * x[1];
        let y: Vec<f64> = pts.iter().map(poly).collect();
        let mut model = RegressionModel::new(imq(), 2, pts, y).unwrap();
        model.fit(FitMethod::Dense).unwrap();
        let queries = gen_uniform_cube(100, 9).points;
        let pred = model.predict(&queries).unwrap();
        for (q, p) in queries.iter().zip(&pred) {
            assert!((p - poly(q)).abs() <= 1e-8 * poly(q).abs().max(1.0), "{p} vs {}", poly(q));
        }
    }

    #[test]
    fn hierarchical_fit_matches_dense() {
        let set = gen_bimodal(200, 10);
        let y = simulate_observations(&set.points, imq(), 3).unwrap();
        let mut dense = RegressionModel::new(imq(), 1, set.points.clone(), y.clone()).unwrap();
        dense.fit(FitMethod::Dense).unwrap();
        let mut hb = RegressionModel::new(imq(), 1, set.points.clone(), y).unwrap();
        let opts = SolveOptions {
            tol: 1e-12,
            ..Default::default()
        };
        hb.fit(FitMethod::Hierarchical(opts)).unwrap();
        let grid = kriging_grid();
        let a = dense.predict(&grid[..200]).unwrap();
        let b = hb.predict(&grid[..200]).unwrap();
        let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        for (x, z) in a.iter().zip(&b) {
            assert!((x - z).abs() <= 1e-6 * scale);
        }
    }

    #[test]
    fn simulation_determinism_and_zero_noise_limit() {
        let pts = gen_bimodal(100, 11).points;
        let a = simulate_observations(&pts, imq(), 5).unwrap();
        assert_eq!(a, simulate_observations(&pts, imq(), 5).unwrap());
        assert_ne!(a, simulate_observations(&pts, imq(), 6).unwrap());
        let tiny = simulate_observations(&pts, KernelSpec::inverse_multiquadric(0.01, 1e-300), 5).unwrap();
        for (x, y) in pts.iter().zip(&tiny) {
            assert!((trend(x) - y).abs() <= 1e-12 * trend(x).max(1.0));
        }
    }

    #[test]
    fn noise_covariance_monte_carlo() {
        let pts = gen_uniform_cube(50, 12).points;
        let kernel = KernelSpec::inverse_multiquadric(0.1, 1.0);
        let trials = 200;
        let eps: Vec<Vec<f64>> = (0..trials)
            .map(|s| {
                let y = simulate_observations(&pts, kernel, 1000 + s).unwrap();
                pts.iter().zip(&y).map(|(x, v)| v - trend(x)).collect()
            })
            .collect();
        let (nodes, _) = normalize_nodes(&pts).unwrap();
        let k = kernel_matrix_unchecked(&kernel, &nodes);
        let mut outside = 0;
        let mut total = 0;
        for i in 0..50 {
            for j in i..50 {
                let s = eps.iter().map(|e| e[i] * e[j]).sum::<f64>() / trials as f64;
                let se = ((k[(i, i)] * k[(j, j)] + k[(i, j)].powi(2)) / trials as f64).sqrt();
                total += 1;
                if (s - k[(i, j)]).abs() > 3.0 * se {
                    outside += 1;
                }
            }
        }
        // a 3-SE band misses about 0.3% of entries by chance
        assert!(outside * 100 <= total, "{outside} of {total} outside");
    }

    #[test]
    fn indefinite_covariance_rejected() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(covariance_sqrt(k), Err(Error::Model(_))));
        let k = DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]);
        let c = covariance_sqrt(k.clone()).unwrap();
        assert!((&c * &c - k).amax() < 1e-14);
    }

    #[test]
    fn loo_shortcut_matches_refits() {
        let set = gen_bimodal(40, 5);
        let y = simulate_observations(&set.points, imq(), 5).unwrap();
        let kernel = KernelSpec::inverse_multiquadric(0.3, 1.0);
        let (nodes, _) = normalize_nodes(&set.points).unwrap();
        let mut brute = 0.0;
        for i in 0..nodes.len() {
            let rest: Vec<Point3> = (0..nodes.len()).filter(|&j| j != i).map(|j| nodes[j]).collect();
            let yr: Vec<f64> = (0..nodes.len()).filter(|&j| j != i).map(|j| y[j]).collect();
            let s = saddle_matrix(&rest, &kernel, 1, 1.0);
            let mut rhs = DVector::zeros(s.nrows());
            rhs.rows_mut(0, rest.len()).copy_from_slice(&yr);
            let sol = s.lu().solve(&rhs).unwrap();
            let kx = cross_kernel(&kernel, &rest, &nodes[i..i + 1]);
            let q = MonomialBasis::new(1).eval(&nodes[i]);
            let pred = kx.column(0).dot(&sol.rows(0, rest.len()))
                + q.iter().zip(sol.rows(rest.len(), q.len()).iter()).map(|(a, b)| a * b).sum::<f64>();
            brute += (y[i] - pred).powi(2);
        }
        brute /= nodes.len() as f64;
        let fast = loo_mse(&set.points, &y, kernel, 1).unwrap();
        assert!((fast - brute).abs() <= 1e-8 * brute, "{fast} vs {brute}");
        let scan = loo_delta_scan(&set.points, &y, 1.0, 1, &[0.3, 1.0]).unwrap();
        assert_eq!(scan.len(), 2);
        assert_eq!(scan[0], (0.3, fast));
    }

    #[test]
    fn grid_layout() {
        let g = kriging_grid();
        assert_eq!(g.len(), 1600);
        assert_eq!(g[0], [0.0, 0.0, 0.5]);
        assert_eq!(g[1], [0.0, 1.0 / 39.0, 0.5]);
        assert_eq!(g[1599], [1.0, 1.0, 0.5]);
        let flat = vec![2.0; 1600];
        assert_eq!(grid_total_variation(&flat, 40), 0.0);
        let ramp: Vec<f64> = g.iter().map(|p| p[0]).collect();
        assert!((grid_total_variation(&ramp, 40) - 40.0).abs() < 1e-12);
    }
}
