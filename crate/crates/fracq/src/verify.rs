//! The verification battery: nine numbered end-to-end checks covering the
//! headline numeric guarantees of the crate (solver accuracy, quantization
//! slope windows, graph and product identities, and the property suites).
//! `tests/acceptance.rs` and the CLI `verify` subcommand both run this
//! battery, one reported line per check.

use std::time::Instant;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::code_space::{gamma_antichain, is_maximal_antichain, word_probability};
use crate::dimension::{
    box_dimension_estimate, graph_dim_bounds, product_qdim_check, qdim_bounds, solve_moran,
    solve_qdim_exponent,
};
use crate::exec;
use crate::geom::BoxRegion;
use crate::ifs::{
    attractor_sample, builtins, diagonal_product, hausdorff_distance, ContractionMap, IFSystem,
    PointCloud,
};
use crate::measure::{
    chaos_game, countable_example_measure, measure_of_box, min_ball_mass, product_measure_residual,
    EmpiricalMeasure,
};
use crate::quant::{
    estimate_qdim, estimate_qdim_with, lloyd_quantize, mixture_distortion_check,
    pushforward_distortion_check, quantizer_mesh, QdimBackend, Quantizer,
};
use crate::transform::{graph_sample, transform_point};
use crate::Result;

/// Seed shared by every stochastic check; any fixed value works, the battery
/// is deterministic given one.
pub const VERIFY_SEED: u64 = 7;

const LOG2_OVER_LOG3: f64 = 0.6309297535714574;

/// Outcome of one check: a stable name, the verdict, the wall-clock cost,
/// and a one-line numeric summary.
#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub detail: String,
}

impl CheckResult {
    pub fn status_line(&self) -> String {
        format!(
            "{} {} ({:.2}s): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.seconds,
            self.detail
        )
    }
}

/// Runs a check body under a wall-clock budget (seconds). A check passes
/// only if its numeric conditions hold and it finishes within budget.
fn run_check(
    name: &'static str,
    budget: f64,
    body: impl FnOnce() -> Result<(bool, String)>,
) -> CheckResult {
    let start = Instant::now();
    let (ok, mut detail) = match body() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {}", e)),
    };
    let seconds = start.elapsed().as_secs_f64();
    let timely = seconds <= budget;
    if !timely {
        detail = format!(
            "{}; runtime {:.1}s exceeds the {:.0}s budget",
            detail, seconds, budget
        );
    }
    CheckResult {
        name,
        passed: ok && timely,
        seconds,
        detail,
    }
}

fn unit_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn powers_of_two(lo: u32, hi: u32) -> Vec<usize> {
    (lo..=hi).map(|k| 1usize << k).collect()
}

/// Moran and exponent solvers hit pinned closed-form values, and the
/// self-similar identity p_i = c_i^s forces the exponent back to s.
pub fn check_solver_accuracy() -> CheckResult {
    run_check("solver-accuracy", 1.0, || {
        let third = 1.0 / 3.0;
        let mut worst = (solve_moran(&[third, third])? - LOG2_OVER_LOG3).abs();
        let q = solve_qdim_exponent(&[0.5, 0.5], &[third, third], 2.0)?;
        worst = worst.max((q - LOG2_OVER_LOG3).abs());
        // Self-similar identity on an unequal-ratio system.
        let ratios = [third, 0.5];
        let s = solve_moran(&ratios)?;
        let probs: Vec<f64> = ratios.iter().map(|c| c.powf(s)).collect();
        for &r in &[0.5, 1.0, 2.0, 5.0] {
            let l = solve_qdim_exponent(&probs, &ratios, r)?;
            worst = worst.max((l - s).abs());
        }
        Ok((
            worst <= 1e-9,
            format!("max solver deviation {:.2e} (cap 1e-9)", worst),
        ))
    })
}

/// Exact-DP slopes of the countable atomic benchmark land on the predicted
/// r/(2r+1) exponents.
pub fn check_countable_slopes() -> CheckResult {
    run_check("countable-slopes", 300.0, || {
        let m = countable_example_measure(2000)?.measure;
        let grid = powers_of_two(1, 8);
        let s1 = estimate_qdim_with(&m, 1.0, &grid, 0, QdimBackend::Exact1d, true)?.slope;
        let s2 = estimate_qdim_with(&m, 2.0, &grid, 0, QdimBackend::Exact1d, true)?.slope;
        let ok = (s1 - 1.0 / 3.0).abs() <= 0.08 && (s2 - 0.4).abs() <= 0.08;
        Ok((
            ok,
            format!(
                "slope r=1 {:.4} (target 0.3333 +/- 0.08), r=2 {:.4} (target 0.4 +/- 0.08)",
                s1, s2
            ),
        ))
    })
}

/// Lloyd-backed slope on a sampled middle-third measure stays inside the
/// log2/log3 +/- 0.06 window, and the analytic bounds collapse onto it.
pub fn check_cantor_qdim() -> CheckResult {
    run_check("cantor-qdim", 300.0, || {
        let wifs = builtins::cantor3().with_probs(vec![0.5, 0.5])?;
        let m = chaos_game(&wifs, 100_000, 64, VERIFY_SEED)?;
        let fit = estimate_qdim(&m, 2.0, &powers_of_two(2, 8), VERIFY_SEED)?;
        let (k, l) = qdim_bounds(&wifs, 2.0)?;
        let bounds_dev = (k - LOG2_OVER_LOG3).abs().max((l - LOG2_OVER_LOG3).abs());
        let ok = fit.slope >= 0.571 && fit.slope <= 0.691 && bounds_dev <= 1e-9;
        Ok((
            ok,
            format!(
                "slope {:.4} in [0.571, 0.691]; bound deviation {:.2e} (cap 1e-9)",
                fit.slope, bounds_dev
            ),
        ))
    })
}

/// On the bi-Lipschitz benchmark the empirical slope lands between the
/// two-sided analytic bounds (with regression slack).
pub fn check_bilip_window() -> CheckResult {
    run_check("bilip-window", 600.0, || {
        let wifs = builtins::bilip().with_probs(vec![0.5, 0.5])?;
        let (k1, l1) = qdim_bounds(&wifs, 1.0)?;
        let m = chaos_game(&wifs, 100_000, 64, VERIFY_SEED)?;
        let fit = estimate_qdim(&m, 1.0, &powers_of_two(2, 8), VERIFY_SEED)?;
        let ok = fit.slope >= k1 - 0.08 && fit.slope <= l1 + 0.08;
        Ok((
            ok,
            format!(
                "slope {:.4} in [{:.4}, {:.4}]",
                fit.slope,
                k1 - 0.08,
                l1 + 0.08
            ),
        ))
    })
}

const GRAPH_DEPTH: usize = 12;
const GRAPH_TOPS_DEPTH: usize = 40;

fn graph_cloud() -> Result<(IFSystem, IFSystem, PointCloud, usize)> {
    let f = builtins::binary();
    let g = builtins::thirds();
    let inputs = attractor_sample(&f, GRAPH_DEPTH, &f.default_seed_point())?;
    let sample = graph_sample(&f, &g, &inputs, GRAPH_TOPS_DEPTH)?;
    let failures = sample.failures.len();
    Ok((f, g, sample.points, failures))
}

/// The sampled transformation graph and the sampled diagonal-product
/// attractor agree to within the sampling resolution.
pub fn check_graph_product() -> CheckResult {
    run_check("graph-product", 60.0, || {
        let (f, g, graph, failures) = graph_cloud()?;
        let h = diagonal_product(&f, &g)?;
        let cloud = attractor_sample(&h, GRAPH_DEPTH, &h.default_seed_point())?;
        let dist = hausdorff_distance(&graph, &cloud)?;
        let cap = 4.0 * 2f64.powi(-(GRAPH_DEPTH as i32));
        let ok = failures == 0 && dist <= cap;
        Ok((
            ok,
            format!(
                "hausdorff {:.2e} (cap {:.2e}), {} addressing failures",
                dist, cap, failures
            ),
        ))
    })
}

/// The box-counting slope of the same graph sits inside the Moran sandwich
/// from the per-branch contraction bounds.
pub fn check_graph_boxdim() -> CheckResult {
    run_check("graph-boxdim", 120.0, || {
        let (f, g, graph, failures) = graph_cloud()?;
        let (s1, s2) = graph_dim_bounds(&f, &g)?;
        let scales: Vec<f64> = (2..=7).map(|k| 2f64.powi(-k)).collect();
        let fit = box_dimension_estimate(&graph, &scales)?;
        let ok = failures == 0 && fit.slope >= s1 - 0.08 && fit.slope <= s2 + 0.08;
        Ok((
            ok,
            format!(
                "box slope {:.4} in [{:.4}, {:.4}]",
                fit.slope,
                s1 - 0.08,
                s2 + 0.08
            ),
        ))
    })
}

/// Sampled product measures factor over boxes, and the uneven-weight
/// invariant measure puts the predicted mass on the left half.
pub fn check_product_measure() -> CheckResult {
    run_check("product-measure", 600.0, || {
        let f = builtins::binary().with_probs(vec![0.5, 0.5])?;
        let boxes: Vec<BoxRegion> = (0..4)
            .map(|k| BoxRegion::interval(k as f64 / 4.0, (k + 1) as f64 / 4.0))
            .collect::<Result<_>>()?;
        let residual = product_measure_residual(&f, &f, &boxes, &boxes, 1_000_000, VERIFY_SEED)?;

        let skew = builtins::binary().with_probs(vec![1.0 / 3.0, 2.0 / 3.0])?;
        let m = chaos_game(&skew, 1_000_000, 64, VERIFY_SEED)?;
        let mass = measure_of_box(&m, &BoxRegion::interval(0.0, 0.5)?)?;
        let ok = residual <= 0.01 && (mass - 1.0 / 3.0).abs() <= 0.01;
        Ok((ok, format!(
            "factorization residual {:.4} (cap 0.01); left-half mass {:.4} (target 0.3333 +/- 0.01)",
            residual, mass
        )))
    })
}

/// The product quantization dimension strictly exceeds both factor
/// dimensions, by a wide pinned margin on the Cantor square and strictly on
/// randomized admissible inputs.
pub fn check_product_qdim() -> CheckResult {
    run_check("product-qdim", 600.0, || {
        let pinned = product_qdim_check(&[0.5, 0.5], &[0.5, 0.5], 1.0 / 3.0, 2.0)?;
        let margin = pinned.d_r - pinned.d_r_star.max(pinned.d_r_prime);
        let mut strict_failures = 0usize;
        let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
        for _ in 0..20 {
            let p1 = 0.2 + 0.6 * unit_f64(&mut rng);
            let q1 = 0.2 + 0.6 * unit_f64(&mut rng);
            let c = 0.15 + 0.3 * unit_f64(&mut rng);
            let r = 0.5 + 3.5 * unit_f64(&mut rng);
            let res = product_qdim_check(&[p1, 1.0 - p1], &[q1, 1.0 - q1], c, r)?;
            if !res.strict {
                strict_failures += 1;
            }
        }
        let ok = pinned.strict && margin >= 0.5 && strict_failures == 0;
        Ok((
            ok,
            format!(
                "pinned margin {:.4} (floor 0.5); {}/20 randomized inputs strict",
                margin,
                20 - strict_failures
            ),
        ))
    })
}

struct BatteryTally {
    lloyd_traces: usize,
    trace_ok: bool,
    mesh_quantizers: usize,
    mesh_ok: bool,
}

fn lloyd_and_mesh_battery(benchmarks: &[EmpiricalMeasure]) -> Result<BatteryTally> {
    let mut tally = BatteryTally {
        lloyd_traces: 0,
        trace_ok: true,
        mesh_quantizers: 0,
        mesh_ok: true,
    };
    let mut audit = |m: &EmpiricalMeasure, q: &Quantizer| -> Result<()> {
        tally.lloyd_traces += 1;
        for w in q.distortion_trace.windows(2) {
            if w[1] > w[0] * (1.0 + 1e-12) + 1e-300 {
                tally.trace_ok = false;
            }
        }
        let mesh = quantizer_mesh(m, &q.centers)?;
        if mesh > 0.0 {
            tally.mesh_quantizers += 1;
            let ball = min_ball_mass(m, mesh / 2.0)?;
            let floor = (mesh / 2.0).powf(q.order) * ball;
            if floor > q.distortion * (1.0 + 1e-9) + 1e-12 {
                tally.mesh_ok = false;
            }
        }
        Ok(())
    };
    for m in benchmarks {
        for &r in &[1.0, 2.0, 0.8] {
            for &n in &[3usize, 9] {
                let q = lloyd_quantize(m, n, r, VERIFY_SEED, 60, 1e-10)?;
                audit(m, &q)?;
            }
        }
    }
    Ok(tally)
}

fn antichain_battery() -> Result<(bool, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(VERIFY_SEED);
    let mut worst = 0.0f64;
    let mut all_maximal = true;
    for _ in 0..100 {
        // Rejection-sample a probability vector whose entries stay above
        // 0.05 so the antichain stays enumerable.
        let probs = loop {
            let n = 2 + (rng.next_u64() % 4) as usize;
            let raw: Vec<f64> = (0..n)
                .map(|_| -unit_f64(&mut rng).max(1e-12).ln())
                .collect();
            let total: f64 = raw.iter().sum();
            let mut probs: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let sum = exec::kahan_sum(probs.iter().copied());
            if let Some(last) = probs.last_mut() {
                *last += 1.0 - sum;
            }
            if probs.iter().all(|&p| p >= 0.05) {
                break probs;
            }
        };
        let min_p = probs.iter().cloned().fold(f64::INFINITY, f64::min);
        let eps = min_p * (0.05 + 0.95 * unit_f64(&mut rng));
        let gamma = gamma_antichain(&probs, eps)?;
        let mass = exec::kahan_sum(
            gamma
                .words()
                .iter()
                .map(|w| word_probability(w, &probs).unwrap_or(f64::NAN)),
        );
        worst = worst.max((mass - 1.0).abs());
        all_maximal &= is_maximal_antichain(&gamma);
    }
    Ok((all_maximal, worst))
}

fn distortion_inequality_battery() -> Result<f64> {
    let countable = countable_example_measure(150)?.measure;
    let uniform = {
        let coords: Vec<f64> = (0..200).map(|k| (k as f64 + 0.5) / 200.0).collect();
        EmpiricalMeasure::uniform(PointCloud::from_flat(coords, 1)?)?
    };
    let chaos = chaos_game(
        &builtins::binary().with_probs(vec![0.5, 0.5])?,
        2000,
        64,
        VERIFY_SEED,
    )?;
    let maps = vec![
        ContractionMap::affine_1d(0.5, 0.1)?,
        ContractionMap::affine_1d(1.0 / 3.0, 2.0 / 3.0)?,
        ContractionMap::monotone_1d(
            |x| 0.33 * x + 0.01 * (3.0 * x).sin(),
            0.30,
            0.36,
            (-1.0, 2.0),
        )?,
    ];
    let mut worst_slack = 0.0f64;
    let mut track = |lhs: f64, rhs: f64| {
        worst_slack = worst_slack.max(lhs - (rhs + 1e-12 * (1.0 + rhs.abs())));
    };
    for m in [&countable, &uniform, &chaos] {
        for f in &maps {
            for &r in &[1.0, 2.0] {
                for &n in &[2usize, 5] {
                    let (lhs, rhs) = pushforward_distortion_check(m, f, n, r)?;
                    track(lhs, rhs);
                }
            }
        }
    }
    for &r in &[1.0, 2.0] {
        let components = vec![(countable.clone(), 0.3), (uniform.clone(), 0.7)];
        let (lhs, rhs) = mixture_distortion_check(&components, &[3, 5], r)?;
        track(lhs, rhs);
        let single = vec![(chaos.clone(), 1.0)];
        let (lhs, rhs) = mixture_distortion_check(&single, &[4], r)?;
        track(lhs, rhs);
    }
    Ok(worst_slack)
}

fn tops_identity_battery() -> Result<(usize, f64)> {
    let f = builtins::thirds();
    let points = attractor_sample(&f, 10, &f.default_seed_point())?;
    let count = points.len().min(1000);
    let mut worst = 0.0f64;
    for i in 0..count {
        let x = points.point(i);
        let y = transform_point(&f, &f, x, GRAPH_TOPS_DEPTH)?;
        worst = worst.max((y[0] - x[0]).abs());
    }
    Ok((count, worst))
}

/// The property battery: Lloyd descent traces never increase, mass-threshold
/// antichains carry unit mass, the pushforward and mixture distortion
/// inequalities hold with FP-level slack, every produced quantizer obeys the
/// mesh lower bound, and the self-transformation is the identity.
pub fn check_property_battery() -> CheckResult {
    run_check("property-battery", 600.0, || {
        let benchmarks = vec![
            countable_example_measure(300)?.measure,
            chaos_game(
                &builtins::cantor3().with_probs(vec![0.5, 0.5])?,
                20_000,
                64,
                VERIFY_SEED,
            )?,
            chaos_game(
                &builtins::bilip().with_probs(vec![0.5, 0.5])?,
                10_000,
                64,
                VERIFY_SEED,
            )?,
            chaos_game(
                &diagonal_product(
                    &builtins::binary().with_probs(vec![0.5, 0.5])?,
                    &builtins::thirds(),
                )?,
                5_000,
                64,
                VERIFY_SEED,
            )?,
        ];
        let tally = lloyd_and_mesh_battery(&benchmarks)?;
        let (antichains_maximal, mass_dev) = antichain_battery()?;
        let distortion_slack = distortion_inequality_battery()?;
        let (tops_points, tops_residual) = tops_identity_battery()?;
        let tops_tol = 1e-6;
        let ok = tally.trace_ok
            && tally.mesh_ok
            && antichains_maximal
            && mass_dev <= 1e-12
            && distortion_slack <= 0.0
            && tops_residual <= tops_tol;
        Ok((
            ok,
            format!(
                "{} Lloyd traces monotone: {}; mesh bound on {} quantizers: {}; \
             antichain mass deviation {:.1e} (cap 1e-12, all maximal: {}); \
             distortion inequality slack {:.1e} (cap 0); \
             self-map identity on {} points, residual {:.1e} (cap {:.0e})",
                tally.lloyd_traces,
                tally.trace_ok,
                tally.mesh_quantizers,
                tally.mesh_ok,
                mass_dev,
                antichains_maximal,
                distortion_slack.max(0.0),
                tops_points,
                tops_residual,
                tops_tol
            ),
        ))
    })
}

/// Runs the whole battery in criterion order.
pub fn run_all() -> Vec<CheckResult> {
    vec![
        check_solver_accuracy(),
        check_countable_slopes(),
        check_cantor_qdim(),
        check_bilip_window(),
        check_graph_product(),
        check_graph_boxdim(),
        check_product_measure(),
        check_product_qdim(),
        check_property_battery(),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_line_formats_verdict_first() {
        let res = CheckResult {
            name: "example",
            passed: true,
            seconds: 0.25,
            detail: "ok".into(),
        };
        assert!(res.status_line().starts_with("PASS example"));
        let res = CheckResult {
            passed: false,
            ..res
        };
        assert!(res.status_line().starts_with("FAIL example"));
    }

    #[test]
    fn run_check_converts_errors_and_budget_overruns() {
        let res = run_check("boom", 10.0, || {
            Err(crate::Error::InvalidInput("bad input".into()))
        });
        assert!(!res.passed);
        assert!(res.detail.contains("bad input"));

        let res = run_check("slow", 0.0, || Ok((true, "fine".into())));
        assert!(!res.passed);
        assert!(res.detail.contains("exceeds"));
    }
}
