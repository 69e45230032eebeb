//! Subcommand implementations. Each one validates the configuration
//! fields it needs, runs the library, and stages its artifacts; main
//! commits them only on success.

use std::path::Path;
use std::process::ExitCode;

use fracq::dimension::{
    box_dimension_estimate, dimension_report, graph_dim_bounds, solve_moran as moran_solver,
    solve_qdim_exponent,
};
use fracq::ifs::{attractor_sample, IFSystem};
use fracq::measure::{chaos_game as chaos_sampler, countable_example_measure, EmpiricalMeasure};
use fracq::quant::{estimate_qdim_with, exact_quantize_1d, lloyd_quantize, QdimBackend};
use fracq::transform::{graph_sample, tops_code};
use fracq::verify as battery;

use crate::config::{self, RunConfig};
use crate::fail::{CliError, CliResult};
use crate::output::{csv_cloud, csv_quote, fmt_f64, Artifacts};

const DEFAULT_TOPS_DEPTH: usize = 40;
const DEFAULT_BURN_IN: usize = 64;
const DEFAULT_MAX_ITERS: usize = 300;
const DEFAULT_REL_TOL: f64 = 1e-12;
const DEFAULT_ATOM_COUNT: usize = 2000;
const DEFAULT_GRAPH_DEPTH: usize = 12;
/// Slack added around analytic dimension windows before the containment
/// verdict, absorbing finite-scale bias of the box-count fit.
const WINDOW_PAD: f64 = 0.08;

fn require<'a, T>(opt: &'a Option<T>, name: &str) -> CliResult<&'a T> {
    opt.as_ref()
        .ok_or_else(|| CliError::Validation(format!("{}: required for this subcommand", name)))
}

fn built_system(cfg: &RunConfig) -> CliResult<IFSystem> {
    config::build_system(require(&cfg.system, "system")?, "system")
}

fn require_seed(cfg: &RunConfig, why: &str) -> CliResult<u64> {
    cfg.seed.ok_or_else(|| {
        CliError::Validation(format!("seed: required {} (set it or pass --seed)", why))
    })
}

/// The measure a quantization subcommand operates on: the countable
/// atomic benchmark when requested, otherwise a seeded chaos-game sample
/// of the configured system's invariant measure.
fn built_measure(cfg: &RunConfig) -> CliResult<EmpiricalMeasure> {
    let wants_countable = cfg.atom_count.is_some()
        || matches!(&cfg.system, Some(s) if s.builtin.as_deref() == Some("countable-example"));
    if wants_countable {
        let atoms = cfg.atom_count.unwrap_or(DEFAULT_ATOM_COUNT);
        return Ok(countable_example_measure(atoms)?.measure);
    }
    let system = built_system(cfg)?;
    let samples = *require(&cfg.samples, "samples")?;
    let seed = require_seed(cfg, "to sample the invariant measure")?;
    let burn = cfg.burn_in.unwrap_or(DEFAULT_BURN_IN);
    Ok(chaos_sampler(&system, samples, burn, seed)?)
}

fn parse_backend(cfg: &RunConfig) -> CliResult<QdimBackend> {
    match cfg.backend.as_deref() {
        None => Ok(QdimBackend::Lloyd),
        Some(b) => match b.to_ascii_lowercase().as_str() {
            "lloyd" => Ok(QdimBackend::Lloyd),
            "exact-1d" => Ok(QdimBackend::Exact1d),
            other => Err(CliError::Validation(format!(
                "backend: unknown backend '{}' (expected lloyd or exact-1d)",
                other
            ))),
        },
    }
}

fn power_scales(coarse_exp: u32, fine_exp: u32) -> Vec<f64> {
    (coarse_exp..=fine_exp)
        .map(|k| 0.5f64.powi(k as i32))
        .collect()
}

pub fn solve_moran(cfg: &RunConfig) -> CliResult<Artifacts> {
    let ratios = require(&cfg.ratios, "ratios")?;
    let s = moran_solver(ratios)?;
    println!("s = {}", fmt_f64(s));
    let mut art = Artifacts::new();
    art.add("moran.csv", format!("s,{}\n", fmt_f64(s)).into_bytes());
    Ok(art)
}

pub fn qdim_exponent(cfg: &RunConfig) -> CliResult<Artifacts> {
    let probs = require(&cfg.probs, "probs")?;
    let ratios = require(&cfg.ratios, "ratios")?;
    let r = *require(&cfg.r, "r")?;
    let l = solve_qdim_exponent(probs, ratios, r)?;
    println!("l_r = {}", fmt_f64(l));
    let mut art = Artifacts::new();
    art.add(
        "qdim_exponent.csv",
        format!("l_r,{}\n", fmt_f64(l)).into_bytes(),
    );
    Ok(art)
}

pub fn attractor(cfg: &RunConfig) -> CliResult<Artifacts> {
    let system = built_system(cfg)?;
    let depth = *require(&cfg.depth, "depth")?;
    let cloud = attractor_sample(&system, depth, &system.default_seed_point())?;
    println!("enumerated {} points at depth {}", cloud.len(), depth);
    let mut art = Artifacts::new();
    art.add("attractor.csv", csv_cloud(&cloud, None));
    Ok(art)
}

pub fn tops(cfg: &RunConfig) -> CliResult<Artifacts> {
    let system = built_system(cfg)?;
    let points = require(&cfg.points, "points")?;
    if points.is_empty() {
        return Err(CliError::Validation("points: must be non-empty".into()));
    }
    let k = cfg.tops_depth.unwrap_or(DEFAULT_TOPS_DEPTH);
    let mut text = String::new();
    for t in 0..system.dim() {
        text.push_str(&format!("x{},", t + 1));
    }
    text.push_str("code,certified\n");
    for (i, p) in points.iter().enumerate() {
        let res = tops_code(&system, p, k, cfg.tops_tolerance)
            .map_err(|e| CliError::from(e).prefixed(&format!("points[{}]", i)))?;
        for v in p {
            text.push_str(&fmt_f64(*v));
            text.push(',');
        }
        text.push_str(&format!("{},{}\n", res.code.word(), res.certified));
    }
    println!("addressed {} points to depth {}", points.len(), k);
    let mut art = Artifacts::new();
    art.add("tops.csv", text.into_bytes());
    Ok(art)
}

pub fn transform_graph(cfg: &RunConfig) -> CliResult<Artifacts> {
    let f = built_system(cfg)?;
    let g = config::build_system(
        require(&cfg.second_system, "second_system")?,
        "second_system",
    )?;
    let depth = *require(&cfg.depth, "depth")?;
    let k = cfg.tops_depth.unwrap_or(DEFAULT_TOPS_DEPTH);
    let inputs = attractor_sample(&f, depth, &f.default_seed_point())?;
    let sample = graph_sample(&f, &g, &inputs, k)?;
    println!(
        "graph sample: {} points, {} failures",
        sample.points.len(),
        sample.failures.len()
    );
    let mut art = Artifacts::new();
    art.add("graph.csv", csv_cloud(&sample.points, None));
    if !sample.failures.is_empty() {
        let mut text = String::from("index,step,reason\n");
        for fail in &sample.failures {
            text.push_str(&format!(
                "{},{},{}\n",
                fail.index,
                fail.step,
                csv_quote(&fail.reason)
            ));
        }
        art.add("graph_failures.csv", text.into_bytes());
    }
    Ok(art)
}

pub fn chaos_game(cfg: &RunConfig) -> CliResult<Artifacts> {
    let system = built_system(cfg)?;
    let samples = *require(&cfg.samples, "samples")?;
    let seed = require_seed(cfg, "for the chaos game")?;
    let burn = cfg.burn_in.unwrap_or(DEFAULT_BURN_IN);
    let m = chaos_sampler(&system, samples, burn, seed)?;
    println!("sampled {} weighted points", m.len());
    let mut art = Artifacts::new();
    art.add("measure.csv", csv_cloud(m.cloud(), Some(m.weights())));
    Ok(art)
}

pub fn quantize(cfg: &RunConfig) -> CliResult<Artifacts> {
    let m = built_measure(cfg)?;
    let n = *require(&cfg.n_centers, "n_centers")?;
    let r = *require(&cfg.r, "r")?;
    let backend = parse_backend(cfg)?;
    let (q, backend_name) = match backend {
        QdimBackend::Lloyd => {
            let seed = require_seed(cfg, "for the lloyd backend")?;
            let iters = cfg.max_iters.unwrap_or(DEFAULT_MAX_ITERS);
            let tol = cfg.rel_tol.unwrap_or(DEFAULT_REL_TOL);
            (lloyd_quantize(&m, n, r, seed, iters, tol)?, "lloyd")
        }
        QdimBackend::Exact1d => (exact_quantize_1d(&m, n, r)?, "exact-1d"),
    };
    println!(
        "distortion = {} with {} centers (converged: {})",
        fmt_f64(q.distortion),
        q.centers.len(),
        q.converged
    );
    let mut art = Artifacts::new();
    art.add("centers.csv", csv_cloud(&q.centers, None));
    art.add_json(
        "quantize.json",
        &serde_json::json!({
            "backend": backend_name,
            "order": q.order,
            "n_centers": n,
            "distortion": q.distortion,
            "converged": q.converged,
            "iterations": q.iterations,
            "distortion_trace": q.distortion_trace,
        }),
    )?;
    Ok(art)
}

pub fn estimate_qdim(cfg: &RunConfig) -> CliResult<Artifacts> {
    let m = built_measure(cfg)?;
    let r = *require(&cfg.r, "r")?;
    let n_grid = require(&cfg.n_grid, "n_grid")?;
    let backend = parse_backend(cfg)?;
    let seed = match backend {
        QdimBackend::Lloyd => require_seed(cfg, "for the lloyd backend")?,
        QdimBackend::Exact1d => cfg.seed.unwrap_or(0),
    };
    let drop_smallest = cfg.drop_smallest.unwrap_or(true);
    let fit = estimate_qdim_with(&m, r, n_grid, seed, backend, drop_smallest)?;
    println!(
        "slope = {} (r_squared = {})",
        fmt_f64(fit.slope),
        fmt_f64(fit.r_squared)
    );
    let mut text = String::from("n,e_n,log_n,neg_log_e\n");
    for (&n, &e) in fit.n_grid.iter().zip(&fit.errors) {
        text.push_str(&format!(
            "{},{},{},{}\n",
            n,
            fmt_f64(e),
            fmt_f64((n as f64).ln()),
            fmt_f64(-e.ln())
        ));
    }
    let mut art = Artifacts::new();
    art.add("qdim_fit.csv", text.into_bytes());
    art.add_json(
        "qdim_fit.json",
        &serde_json::json!({
            "order": r,
            "slope": fit.slope,
            "r_squared": fit.r_squared,
            "n_grid": fit.n_grid,
            "errors": fit.errors,
            "drop_smallest": drop_smallest,
        }),
    )?;
    Ok(art)
}

pub fn box_dim(cfg: &RunConfig) -> CliResult<Artifacts> {
    let system = built_system(cfg)?;
    let depth = *require(&cfg.depth, "depth")?;
    let scales = require(&cfg.scales, "scales")?;
    let cloud = attractor_sample(&system, depth, &system.default_seed_point())?;
    let fit = box_dimension_estimate(&cloud, scales)?;
    println!(
        "slope = {} (r_squared = {})",
        fmt_f64(fit.slope),
        fmt_f64(fit.r_squared)
    );
    let mut text = String::from("scale,count\n");
    for (&s, &c) in fit.scales.iter().zip(&fit.counts) {
        text.push_str(&format!("{},{}\n", fmt_f64(s), c));
    }
    let mut art = Artifacts::new();
    art.add("box_counts.csv", text.into_bytes());
    art.add_json("box_fit.json", &fit)?;
    Ok(art)
}

pub fn report(cfg: &RunConfig) -> CliResult<Artifacts> {
    if cfg.second_system.is_some() {
        return graph_report(cfg);
    }
    let system = built_system(cfg)?;
    let r = *require(&cfg.r, "r")?;
    let box_estimate = match (&cfg.depth, &cfg.scales) {
        (Some(depth), Some(scales)) => {
            let cloud = attractor_sample(&system, *depth, &system.default_seed_point())?;
            Some(box_dimension_estimate(&cloud, scales)?.slope)
        }
        _ => None,
    };
    let empirical_qdim = match (&cfg.samples, &cfg.n_grid) {
        (Some(samples), Some(n_grid)) => {
            let seed = require_seed(cfg, "to estimate the empirical dimension")?;
            let burn = cfg.burn_in.unwrap_or(DEFAULT_BURN_IN);
            let m = chaos_sampler(&system, *samples, burn, seed)?;
            let backend = parse_backend(cfg)?;
            let drop_smallest = cfg.drop_smallest.unwrap_or(true);
            Some(estimate_qdim_with(&m, r, n_grid, seed, backend, drop_smallest)?.slope)
        }
        _ => None,
    };
    let rep = dimension_report(&system, r, box_estimate, empirical_qdim)?;
    println!(
        "similarity dimension in [{}, {}], quantization dimension in [{}, {}]",
        fmt_f64(rep.moran_lower),
        fmt_f64(rep.moran_upper),
        fmt_f64(rep.qdim_lower),
        fmt_f64(rep.qdim_upper)
    );
    let mut art = Artifacts::new();
    art.add_json("report.json", &rep)?;
    Ok(art)
}

/// Two-system report: analytic window [s1, s2] for the dimension of the
/// transformation graph, a box-count estimate over the graph sample, and
/// the containment verdict.
fn graph_report(cfg: &RunConfig) -> CliResult<Artifacts> {
    let f = built_system(cfg)?;
    let g = config::build_system(
        require(&cfg.second_system, "second_system")?,
        "second_system",
    )?;
    let (s1, s2) = graph_dim_bounds(&f, &g)?;
    let depth = cfg.depth.unwrap_or(DEFAULT_GRAPH_DEPTH);
    let k = cfg.tops_depth.unwrap_or(DEFAULT_TOPS_DEPTH);
    let scales = match &cfg.scales {
        Some(s) => s.clone(),
        None => power_scales(2, 7),
    };
    let inputs = attractor_sample(&f, depth, &f.default_seed_point())?;
    let sample = graph_sample(&f, &g, &inputs, k)?;
    let fit = box_dimension_estimate(&sample.points, &scales)?;
    let contained = fit.slope >= s1 - WINDOW_PAD && fit.slope <= s2 + WINDOW_PAD;
    println!(
        "graph dimension window [{}, {}], box estimate {} -> {}",
        fmt_f64(s1),
        fmt_f64(s2),
        fmt_f64(fit.slope),
        if contained { "contained" } else { "outside" }
    );
    let mut art = Artifacts::new();
    art.add_json(
        "report.json",
        &serde_json::json!({
            "s1": s1,
            "s2": s2,
            "box_estimate": fit.slope,
            "r_squared": fit.r_squared,
            "graph_points": sample.points.len(),
            "tops_failures": sample.failures.len(),
            "window_pad": WINDOW_PAD,
            "contained": contained,
        }),
    )?;
    Ok(art)
}

/// Runs the acceptance battery, printing one verdict line per check.
/// Artifacts are written only when an output directory was requested.
pub fn verify(out: Option<&Path>) -> CliResult<ExitCode> {
    let results = battery::run_all();
    let mut all_passed = true;
    for res in &results {
        println!("{}", res.status_line());
        all_passed &= res.passed;
    }
    if let Some(dir) = out {
        let rows: Vec<serde_json::Value> = results
            .iter()
            .map(|res| {
                serde_json::json!({
                    "name": res.name,
                    "passed": res.passed,
                    "seconds": res.seconds,
                    "detail": res.detail,
                })
            })
            .collect();
        let mut art = Artifacts::new();
        art.add_json("verify.json", &rows)?;
        art.commit(dir)?;
    }
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

impl CliError {
    /// Prepends a configuration field path to the message, keeping the
    /// failure class.
    fn prefixed(self, field: &str) -> CliError {
        match self {
            CliError::Validation(m) => CliError::Validation(format!("{}: {}", field, m)),
            CliError::Numerical(m) => CliError::Numerical(format!("{}: {}", field, m)),
            CliError::Budget(m) => CliError::Budget(format!("{}: {}", field, m)),
        }
    }
}
