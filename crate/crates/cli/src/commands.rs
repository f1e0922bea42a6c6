use std::path::Path;

use hbrbf::geometry::normalize_nodes;
use hbrbf::kernels::KernelSpec;
use hbrbf::kriging::{
    grid_total_variation, kriging_grid, loo_delta_scan, simulate_observations, trend, FitMethod, MseScale,
    RegressionModel, GRID_SIDE,
};
use hbrbf::mrop::MultiResOperator;
use hbrbf::nodes::NodeSet;
use hbrbf::solver::{condition_experiment, solve_rbf};
use hbrbf::testcases::GeneratorSpec;

use crate::config::RunConfig;
use crate::report::{num, sci, secs, Report};
use crate::CliError;

/// Nodes from `--in`, or the configured test case.
fn load_nodes(cfg: &RunConfig) -> Result<NodeSet, CliError> {
    let set = match &cfg.input {
        Some(path) => NodeSet::load(path)?,
        None => GeneratorSpec {
            case: cfg.case,
            n: cfg.n,
            seed: cfg.seed,
        }
        .generate()?,
    };
    set.validate()?;
    log::info!("{} nodes from {}", set.len(), source_name(cfg, &set));
    Ok(set)
}

fn source_name(cfg: &RunConfig, set: &NodeSet) -> String {
    match &cfg.input {
        Some(p) => p.display().to_string(),
        None => set.id.clone(),
    }
}

fn kernel_fields(k: &KernelSpec) -> [String; 3] {
    [k.short_name().to_string(), num(k.delta), num(k.scale)]
}

pub fn generate(cfg: &RunConfig) -> Result<(), CliError> {
    let spec = GeneratorSpec {
        case: cfg.case,
        n: cfg.n,
        seed: cfg.seed,
    };
    let set = spec.generate()?;
    match &cfg.output {
        Some(path) => set.save(path)?,
        None => set.write_csv(std::io::stdout().lock())?,
    }
    eprintln!(
        "generated {} {} nodes (requested {}) with seed {}",
        set.len(),
        cfg.case.name(),
        cfg.n,
        cfg.seed
    );
    Ok(())
}

pub const SOLVE_HEADER: &[&str] = &[
    "source", "n", "kernel", "delta", "scale", "m", "p", "precond", "depth", "outer_iterations",
    "inner_iterations", "final_residual", "interpolation_residual", "converged", "setup_s", "basis_s",
    "precond_s", "solve_s", "recover_s",
];

pub fn solve(cfg: &RunConfig) -> Result<(), CliError> {
    let set = load_nodes(cfg)?;
    let sol = solve_rbf(&set, cfg.kernel, cfg.m, cfg.p, &cfg.solve)?;
    let r = &sol.report;
    let t = &r.timings;
    let mut report = Report::new(SOLVE_HEADER);
    let [kernel, delta, scale] = kernel_fields(&cfg.kernel);
    report.push(vec![
        source_name(cfg, &set),
        r.n.to_string(),
        kernel,
        delta,
        scale,
        r.m.to_string(),
        r.p.to_string(),
        r.preconditioner.name().to_string(),
        r.depth.to_string(),
        r.outer_iterations.to_string(),
        r.inner_iterations.iter().map(|(_, n)| n).sum::<usize>().to_string(),
        sci(r.final_residual),
        sci(r.interpolation_residual),
        r.converged.to_string(),
        secs(t.setup),
        secs(t.basis),
        secs(t.preconditioner),
        secs(t.solve),
        secs(t.recover),
    ]);
    report.emit(cfg.output.as_deref())?;
    if let Some(path) = &cfg.solution {
        write_solution(path, &sol.u, &sol.c, &sol.c_monomial)?;
    }
    if !r.converged {
        return Err(CliError::NotConverged(format!(
            "GMRES stopped after {} iterations at residual {:.3e} (target {:.1e})",
            r.outer_iterations, r.final_residual, cfg.solve.tol
        )));
    }
    Ok(())
}

fn write_solution(path: &Path, u: &[f64], c: &[f64], c_mono: &[f64]) -> Result<(), CliError> {
    let mut out = String::from("kind,index,value\n");
    for (kind, v) in [("u", u), ("c", c), ("c_monomial", c_mono)] {
        for (i, x) in v.iter().enumerate() {
            out.push_str(&format!("{kind},{i},{}\n", num(*x)));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub const CONDITION_HEADER: &[&str] = &[
    "source", "n", "kernel", "delta", "scale", "m", "p", "scaling", "alpha", "kappa_saddle", "kappa_kw",
];

pub fn condition(cfg: &RunConfig) -> Result<(), CliError> {
    let set = load_nodes(cfg)?;
    let rep = condition_experiment(&set.points, cfg.kernel, cfg.m, cfg.p, &cfg.alphas, cfg.poly_scaling)?;
    let mut report = Report::new(CONDITION_HEADER);
    for row in &rep.rows {
        let [kernel, delta, scale] = kernel_fields(&cfg.kernel);
        report.push(vec![
            source_name(cfg, &set),
            set.len().to_string(),
            kernel,
            delta,
            scale,
            cfg.m.to_string(),
            cfg.p.to_string(),
            rep.scaling.name().to_string(),
            num(row.alpha),
            sci(row.kappa_saddle),
            sci(rep.kappa_kw),
        ]);
    }
    report.emit(cfg.output.as_deref())
}

pub const DECAY_HEADER: &[&str] = &[
    "source", "n", "kernel", "m", "p", "level", "widths", "distance", "max_abs", "entries",
];

pub fn decay(cfg: &RunConfig) -> Result<(), CliError> {
    let set = load_nodes(cfg)?;
    let (pts, _) = normalize_nodes(&set.points)?;
    let op = MultiResOperator::build(&pts, cfg.kernel, cfg.m, cfg.p)?;
    let level = cfg.level.unwrap_or(op.tree().depth());
    let bins = op.decay_profile(level);
    if bins.is_empty() {
        log::warn!("level {level} has no detail vectors");
    }
    let mut report = Report::new(DECAY_HEADER);
    for b in bins {
        report.push(vec![
            source_name(cfg, &set),
            set.len().to_string(),
            cfg.kernel.short_name().to_string(),
            cfg.m.to_string(),
            cfg.p.to_string(),
            level.to_string(),
            b.widths.to_string(),
            num(b.distance),
            sci(b.max_abs),
            b.entries.to_string(),
        ]);
    }
    report.emit(cfg.output.as_deref())
}

pub const KRIGING_SUMMARY_HEADER: &[&str] = &[
    "source", "n", "seed", "delta", "scale", "m", "mse_scale", "mean_mse", "total_variation", "rms_vs_trend",
];
pub const LOO_HEADER: &[&str] = &["source", "n", "m", "delta", "loo_mse"];

/// Simulates (or reads) observations, fits each regression order and writes
/// `prediction_m{m}.csv` and `mse_m{m}.csv` on the standard grid, plus an
/// appended `summary.csv` in the output directory.
pub fn kriging(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = cfg
        .output
        .as_deref()
        .ok_or_else(|| CliError::Usage("kriging needs --out <directory>".into()))?;
    std::fs::create_dir_all(dir)?;
    let set = load_nodes(cfg)?;
    let source = source_name(cfg, &set);
    let y = match (&cfg.input, &set.values) {
        (Some(_), Some(v)) => {
            log::info!("using the input values as observations");
            v.clone()
        }
        _ => simulate_observations(&set.points, cfg.kernel, cfg.seed)?,
    };
    let grid = kriging_grid();
    let truth: Vec<f64> = grid.iter().map(trend).collect();
    let mut summary = Report::new(KRIGING_SUMMARY_HEADER);
    let mut loo = Report::new(LOO_HEADER);
    for &m in &cfg.orders {
        let mut kernel = cfg.kernel;
        if let Some(deltas) = &cfg.delta_list {
            let scan = loo_delta_scan(&set.points, &y, cfg.kernel.scale, m, deltas)?;
            for (d, e) in &scan {
                loo.push(vec![source.clone(), set.len().to_string(), m.to_string(), num(*d), sci(*e)]);
            }
            let best = scan.iter().min_by(|a, b| a.1.total_cmp(&b.1)).expect("nonempty list");
            kernel = KernelSpec::inverse_multiquadric(best.0, cfg.kernel.scale);
            log::info!("m = {m}: leave-one-out picks delta = {}", best.0);
        }
        let mut model = RegressionModel::new(kernel, m, set.points.clone(), y.clone())?;
        let method = if cfg.dense_fit {
            FitMethod::Dense
        } else {
            FitMethod::Hierarchical(cfg.solve.clone())
        };
        model.fit(method)?;
        let pred = model.predict(&grid)?;
        let mse = model.mse(&grid, cfg.mse_scale)?;
        NodeSet::with_values(grid.clone(), pred.clone())?.save(dir.join(format!("prediction_m{m}.csv")))?;
        NodeSet::with_values(grid.clone(), mse.clone())?.save(dir.join(format!("mse_m{m}.csv")))?;
        let rms = (pred.iter().zip(&truth).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / grid.len() as f64).sqrt();
        summary.push(vec![
            source.clone(),
            set.len().to_string(),
            cfg.seed.to_string(),
            num(kernel.delta),
            num(kernel.scale),
            m.to_string(),
            match cfg.mse_scale {
                MseScale::Profiled => "profiled",
                MseScale::KnownCovariance => "known",
            }
            .to_string(),
            sci(mse.iter().sum::<f64>() / mse.len() as f64),
            sci(grid_total_variation(&pred, GRID_SIDE)),
            sci(rms),
        ]);
    }
    summary.emit(Some(&dir.join("summary.csv")))?;
    if cfg.delta_list.is_some() {
        loo.emit(Some(&dir.join("loo_scan.csv")))?;
    }
    Ok(())
}
