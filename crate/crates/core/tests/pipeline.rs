//! End-to-end checks through the public API: file round trips, the
//! hierarchical solve against the dense saddle solve, and basis invariants on
//! random node sets.

use hbrbf::geometry::{normalize_nodes, Octree};
use hbrbf::hbasis::build_hb;
use hbrbf::kernels::KernelSpec;
use hbrbf::linalg::orthonormality_defect;
use hbrbf::nodes::NodeSet;
use hbrbf::polyspace::{build_q, poly_dim};
use hbrbf::solver::{direct_solve_saddle, solve_rbf, PreconditionerKind, SolveOptions};
use hbrbf::testcases::{gen_bimodal, gen_uniform_cube, gen_vplane, Stream};
use hbrbf::Point3;
use proptest::prelude::*;

fn tight(preconditioner: PreconditionerKind) -> SolveOptions {
    SolveOptions {
        preconditioner,
        tol: 1e-10,
        max_iterations: 20000,
        ..SolveOptions::default()
    }
}

fn queries(n: usize) -> Vec<Point3> {
    let s = Stream::new(17, 99);
    (0..n as u64)
        .map(|i| [s.uniform(3 * i), s.uniform(3 * i + 1), s.uniform(3 * i + 2)])
        .collect()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

#[test]
fn csv_round_trip_gives_identical_solve() {
    let dir = std::env::temp_dir().join(format!("hbrbf-pipeline-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("nodes.csv");
    let set = gen_uniform_cube(300, 21);
    set.save(&path).unwrap();
    let loaded = NodeSet::load(&path).unwrap();
    std::fs::remove_dir_all(&dir).unwrap();
    assert_eq!(loaded.points, set.points);
    let opts = SolveOptions::default();
    let a = solve_rbf(&set, KernelSpec::biharmonic(), 1, 3, &opts).unwrap();
    let b = solve_rbf(&loaded, KernelSpec::biharmonic(), 1, 3, &opts).unwrap();
    assert_eq!(a.u, b.u);
    assert_eq!(a.c, b.c);
}

#[test]
fn vplane_solve_matches_dense_saddle() {
    let set = gen_vplane(600, 8);
    let d = set.values.clone().unwrap();
    let kernel = KernelSpec::biharmonic();
    let sol = solve_rbf(&set, kernel, 1, 3, &tight(PreconditionerKind::Diagonal)).unwrap();
    assert!(sol.report.converged);
    let dense = direct_solve_saddle(&set.points, &d, kernel, 1).unwrap();
    let q = queries(200);
    let err = max_rel(&sol.interpolant.evaluate(&q), &dense.interpolant.evaluate(&q));
    assert!(err < 1e-6, "relative difference {err:.3e}");
    let at_nodes = sol.interpolant.evaluate(&set.points);
    assert!(max_rel(&at_nodes, &d) < 1e-7);
}

#[test]
fn preconditioners_agree_on_bimodal_data() {
    let set = gen_bimodal(400, 12);
    let kernel = KernelSpec::biharmonic();
    let q = queries(100);
    let opts = |kind| SolveOptions {
        tol: 1e-8,
        ..tight(kind)
    };
    let reference = solve_rbf(&set, kernel, 2, 3, &opts(PreconditionerKind::Diagonal)).unwrap();
    assert!(reference.report.converged);
    let expect = reference.interpolant.evaluate(&q);
    for kind in [PreconditionerKind::None, PreconditionerKind::BlockSsor] {
        let sol = solve_rbf(&set, kernel, 2, 3, &opts(kind)).unwrap();
        assert!(sol.report.converged, "{}", kind.name());
        let err = max_rel(&sol.interpolant.evaluate(&q), &expect);
        assert!(err < 1e-5, "{}: {err:.3e}", kind.name());
    }
}

fn check_basis(pts: &[Point3], m: usize) -> (f64, f64) {
    let tree = Octree::build(pts, poly_dim(3)).unwrap();
    let hb = build_hb(&tree, pts, m, 3).unwrap();
    let p = hb.dense();
    let annihilated = build_q(pts, m).transpose() * p.columns(0, hb.reduced_dim());
    (orthonormality_defect(&p), annihilated.amax())
}

#[test]
fn root_complement_with_clustered_spectrum() {
    // one-level tree on which an SVD of the projected root averages, whose
    // nonzero singular values all equal one, returned a non-orthogonal basis
    let set = gen_uniform_cube(99, 14987722214104781535);
    let (pts, _) = normalize_nodes(&set.points).unwrap();
    let (defect, moments) = check_basis(&pts, 1);
    assert!(defect < 1e-12 && moments < 1e-12, "{defect:.2e} {moments:.2e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn basis_is_orthonormal_and_annihilates_polynomials(n in 40usize..160, seed in any::<u64>(), m in 0usize..=3) {
        let set = gen_uniform_cube(n, seed);
        let (pts, _) = normalize_nodes(&set.points).unwrap();
        let (defect, moments) = check_basis(&pts, m);
        prop_assert!(defect < 1e-10);
        prop_assert!(moments < 1e-10);
    }
}
