//! Order-r quantization: Voronoi assignment, distortion, Lloyd descent
//! with restarts (upper bounds on V_{n,r}), an exact 1-D dynamic-programming
//! solver, quantizer mesh, and regression estimation of the quantization
//! dimension.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::geom::{euclidean, euclidean_sq};
use crate::ifs::{ContractionMap, PointCloud};
use crate::measure::EmpiricalMeasure;

/// Fixed number of seeded Lloyd initializations; the best run wins.
pub const LLOYD_RESTARTS: usize = 8;

/// Atom cap for the exact dynamic program.
pub const EXACT_ATOM_BUDGET: usize = 5000;

const TERNARY_ITERS: usize = 200;
const INNER_STEPS: usize = 50;
const INNER_TOL: f64 = 1e-10;
/// Outer iterations with relative improvement below tolerance before the
/// Lloyd loop is declared converged.
const STALL_LIMIT: usize = 3;

/// A center set with its order-r distortion. `distortion` is an upper
/// bound on V_{n,r} for Lloyd outputs and the exact value for the DP
/// solver.
#[derive(Clone, Debug)]
pub struct Quantizer {
    pub centers: PointCloud,
    pub order: f64,
    pub distortion: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Distortion after each outer Lloyd iteration of the winning restart;
    /// empty for the exact solver.
    pub distortion_trace: Vec<f64>,
}

/// Least-squares fit of log n against −log e_{n,r}.
#[derive(Clone, Debug)]
pub struct QDimFit {
    pub n_grid: Vec<usize>,
    /// Quantization errors e_{n,r} = V_{n,r}^{1/r} per grid entry.
    pub errors: Vec<f64>,
    pub slope: f64,
    pub r_squared: f64,
}

/// Which solver feeds the dimension estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QdimBackend {
    Lloyd,
    Exact1d,
}

fn validate_order(r: f64) -> Result<()> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidInput(format!(
            "order r must be positive, got {}",
            r
        )));
    }
    Ok(())
}

/// Nearest center per support point, ties to the lowest center index.
pub fn voronoi_assign(m: &EmpiricalMeasure, centers: &PointCloud) -> Result<Vec<usize>> {
    if centers.is_empty() {
        return Err(Error::InvalidInput("centers must be non-empty".into()));
    }
    if centers.dim() != m.dim() {
        return Err(Error::InvalidInput(format!(
            "center dimension {} does not match measure dimension {}",
            centers.dim(),
            m.dim()
        )));
    }
    Ok(exec::map_range(m.len(), |i| {
        let p = m.point(i);
        let mut best = (f64::INFINITY, 0usize);
        for (k, c) in centers.iter().enumerate() {
            let d = euclidean_sq(p, c);
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }))
}

/// Σ_j w_j · min_a ‖x_j − a‖^r.
pub fn distortion(m: &EmpiricalMeasure, centers: &PointCloud, r: f64) -> Result<f64> {
    validate_order(r)?;
    if centers.is_empty() {
        return Err(Error::InvalidInput("centers must be non-empty".into()));
    }
    if centers.dim() != m.dim() {
        return Err(Error::InvalidInput(format!(
            "center dimension {} does not match measure dimension {}",
            centers.dim(),
            m.dim()
        )));
    }
    Ok(exec::sum_over(m.len(), |i| {
        let p = m.point(i);
        let mut best = f64::INFINITY;
        for c in centers.iter() {
            best = best.min(euclidean_sq(p, c));
        }
        m.weight(i) * pow_r(best.sqrt(), r)
    }))
}

/// Max over support points of the distance to the assigned center.
pub fn quantizer_mesh(m: &EmpiricalMeasure, centers: &PointCloud) -> Result<f64> {
    if centers.is_empty() {
        return Err(Error::InvalidInput("centers must be non-empty".into()));
    }
    if centers.dim() != m.dim() {
        return Err(Error::InvalidInput(format!(
            "center dimension {} does not match measure dimension {}",
            centers.dim(),
            m.dim()
        )));
    }
    let worst_sq = exec::max_over(m.len(), |i| {
        let p = m.point(i);
        let mut best = f64::INFINITY;
        for c in centers.iter() {
            best = best.min(euclidean_sq(p, c));
        }
        best
    });
    Ok(worst_sq.sqrt())
}

fn pow_r(d: f64, r: f64) -> f64 {
    if r == 2.0 {
        d * d
    } else if r == 1.0 {
        d
    } else {
        d.powf(r)
    }
}

/// Sorted, duplicate-merged view of a 1-D measure with prefix sums of
/// w, w·x, and w·x², giving O(1) interval costs for r ∈ {1, 2}.
struct Sorted1D {
    xs: Vec<f64>,
    ws: Vec<f64>,
    pw: Vec<f64>,
    pwx: Vec<f64>,
    pwx2: Vec<f64>,
}

impl Sorted1D {
    fn build(m: &EmpiricalMeasure) -> Result<Self> {
        if m.dim() != 1 {
            return Err(Error::Unsupported(
                "sorted-interval machinery is 1-D only".into(),
            ));
        }
        let mut order: Vec<usize> = (0..m.len()).collect();
        order.sort_by(|&a, &b| m.point(a)[0].total_cmp(&m.point(b)[0]));
        let mut xs: Vec<f64> = Vec::with_capacity(m.len());
        let mut ws: Vec<f64> = Vec::with_capacity(m.len());
        for &i in &order {
            let x = m.point(i)[0];
            let w = m.weight(i);
            if xs.last() == Some(&x) {
                *ws.last_mut().expect("non-empty") += w;
            } else {
                xs.push(x);
                ws.push(w);
            }
        }
        let n = xs.len();
        let mut pw = vec![0.0; n + 1];
        let mut pwx = vec![0.0; n + 1];
        let mut pwx2 = vec![0.0; n + 1];
        for k in 0..n {
            pw[k + 1] = pw[k] + ws[k];
            pwx[k + 1] = pwx[k] + ws[k] * xs[k];
            pwx2[k + 1] = pwx2[k] + ws[k] * xs[k] * xs[k];
        }
        Ok(Sorted1D {
            xs,
            ws,
            pw,
            pwx,
            pwx2,
        })
    }

    fn len(&self) -> usize {
        self.xs.len()
    }

    /// Cost of atoms [i, j) quantized at a, for any r ≥ 0 (O(log) for
    /// r ∈ {1, 2}, O(j−i) otherwise).
    fn cost_at(&self, i: usize, j: usize, a: f64, r: f64) -> f64 {
        if r == 2.0 {
            let w = self.pw[j] - self.pw[i];
            let wx = self.pwx[j] - self.pwx[i];
            let wx2 = self.pwx2[j] - self.pwx2[i];
            return (wx2 - 2.0 * a * wx + a * a * w).max(0.0);
        }
        if r == 1.0 {
            // Split the interval at a: Σ w(a−x) left plus Σ w(x−a) right.
            let s = i + self.xs[i..j].partition_point(|&x| x <= a);
            let left = a * (self.pw[s] - self.pw[i]) - (self.pwx[s] - self.pwx[i]);
            let right = (self.pwx[j] - self.pwx[s]) - a * (self.pw[j] - self.pw[s]);
            return (left + right).max(0.0);
        }
        let mut acc = 0.0;
        for k in i..j {
            acc += self.ws[k] * pow_r((self.xs[k] - a).abs(), r);
        }
        acc
    }

    /// Smallest atom position holding at least half the interval's mass.
    fn median_center(&self, i: usize, j: usize) -> f64 {
        let half = 0.5 * (self.pw[j] - self.pw[i]) + self.pw[i];
        let k = self.pw[i + 1..j].partition_point(|&c| c < half);
        self.xs[i + k]
    }

    /// Optimal center and cost of atoms [i, j) for order r ≥ 1.
    fn cell(&self, i: usize, j: usize, r: f64) -> (f64, f64) {
        debug_assert!(i < j);
        if j - i == 1 {
            return (self.xs[i], 0.0);
        }
        if r == 2.0 {
            let w = self.pw[j] - self.pw[i];
            let wx = self.pwx[j] - self.pwx[i];
            let wx2 = self.pwx2[j] - self.pwx2[i];
            let c = wx / w;
            return (c, (wx2 - wx * wx / w).max(0.0));
        }
        if r == 1.0 {
            let c = self.median_center(i, j);
            return (c, self.cost_at(i, j, c, 1.0));
        }
        // Convex in the center for r ≥ 1: ternary search.
        let (mut lo, mut hi) = (self.xs[i], self.xs[j - 1]);
        for _ in 0..TERNARY_ITERS {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if self.cost_at(i, j, m1, r) <= self.cost_at(i, j, m2, r) {
                hi = m2;
            } else {
                lo = m1;
            }
            if hi - lo < 1e-15 * (1.0 + hi.abs()) {
                break;
            }
        }
        let c = 0.5 * (lo + hi);
        (c, self.cost_at(i, j, c, r))
    }
}

/// One row of the interval DP by divide and conquer over the monotone
/// argmin: best[j] = min over i of prev[i] + cost(i, j).
fn dp_row(sorted: &Sorted1D, prev: &[f64], r: f64, row: &mut [f64], arg: &mut [u32]) {
    let m = sorted.len();
    // Stack of (jlo, jhi, ilo, ihi) half-open j ranges.
    let mut stack = vec![(1usize, m + 1, 0usize, m)];
    while let Some((jlo, jhi, ilo, ihi)) = stack.pop() {
        if jlo >= jhi {
            continue;
        }
        let j = jlo + (jhi - jlo) / 2;
        let hi = ihi.min(j);
        let mut best = (f64::INFINITY, ilo);
        for i in ilo..hi {
            if prev[i].is_finite() {
                let v = prev[i] + sorted.cell(i, j, r).1;
                // Ties keep the largest split so backtracking never walks
                // through empty segments.
                if v <= best.0 {
                    best = (v, i);
                }
            }
        }
        row[j] = best.0;
        arg[j] = best.1 as u32;
        stack.push((jlo, j, ilo, best.1 + 1));
        stack.push((j + 1, jhi, best.1, ihi));
    }
}

fn exact_grid_impl(m: &EmpiricalMeasure, ns: &[usize], r: f64) -> Result<Vec<Quantizer>> {
    validate_order(r)?;
    if r < 1.0 {
        return Err(Error::Unsupported(
            "the exact solver needs r >= 1 (optimal 1-D cells are intervals)".into(),
        ));
    }
    if ns.is_empty() || ns.iter().any(|&n| n < 1) {
        return Err(Error::InvalidInput(
            "cluster counts must be at least 1".into(),
        ));
    }
    let sorted = Sorted1D::build(m)?;
    let atoms = sorted.len();
    if atoms > EXACT_ATOM_BUDGET {
        return Err(Error::BudgetExceeded(format!(
            "{} distinct atoms exceed the exact-solver budget of {}",
            atoms, EXACT_ATOM_BUDGET
        )));
    }
    let k_max = ns.iter().copied().max().expect("non-empty").min(atoms);
    // Row 1 directly; rows 2..k_max by divide and conquer.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(k_max);
    let mut args: Vec<Vec<u32>> = Vec::with_capacity(k_max);
    let mut first = vec![f64::INFINITY; atoms + 1];
    first[0] = 0.0;
    for j in 1..=atoms {
        first[j] = sorted.cost_at(0, j, sorted.cell(0, j, r).0, r);
    }
    rows.push(first);
    args.push(vec![0; atoms + 1]);
    for _ in 1..k_max {
        let prev = rows.last().expect("at least one row");
        let mut row = vec![f64::INFINITY; atoms + 1];
        let mut arg = vec![0u32; atoms + 1];
        row[0] = 0.0;
        dp_row(&sorted, prev, r, &mut row, &mut arg);
        rows.push(row);
        args.push(arg);
    }
    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let k = n.min(atoms);
        let value = rows[k - 1][atoms].max(0.0);
        // Backtrack the segment boundaries, then place each cell's center.
        let mut centers = Vec::with_capacity(k);
        let mut j = atoms;
        for row in (0..k).rev() {
            if j == 0 {
                break;
            }
            let i = if row == 0 { 0 } else { args[row][j] as usize };
            centers.push(sorted.cell(i, j, r).0);
            j = i;
        }
        centers.reverse();
        out.push(Quantizer {
            centers: PointCloud::from_flat(centers, 1)?,
            order: r,
            distortion: if n >= atoms { 0.0 } else { value },
            converged: true,
            iterations: 0,
            distortion_trace: Vec::new(),
        });
    }
    Ok(out)
}

/// Exact V_{n,r} of a 1-D discrete measure by dynamic programming over
/// contiguous atom intervals. Refuses r < 1 and more than 5000 atoms.
pub fn exact_quantize_1d(m: &EmpiricalMeasure, n: usize, r: f64) -> Result<Quantizer> {
    Ok(exact_grid_impl(m, &[n], r)?.pop().expect("one result"))
}

/// Exact solutions for several n from a single DP pass.
pub fn exact_quantize_1d_grid(
    m: &EmpiricalMeasure,
    ns: &[usize],
    r: f64,
) -> Result<Vec<Quantizer>> {
    exact_grid_impl(m, ns, r)
}

fn next_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Distance-weighted sequential seeding: the first center is drawn by
/// mass, each next one with probability proportional to w·d^r against the
/// centers chosen so far.
fn seed_centers_1d(sorted: &Sorted1D, n: usize, r: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = sorted.len();
    let mut cum: Vec<f64> = Vec::with_capacity(m);
    let mut centers = Vec::with_capacity(n);
    let mut dist: Vec<f64> = vec![f64::INFINITY; m];
    for t in 0..n {
        let mut total = 0.0;
        cum.clear();
        for j in 0..m {
            let mass = if t == 0 {
                sorted.ws[j]
            } else {
                sorted.ws[j] * pow_r(dist[j], r)
            };
            total += mass;
            cum.push(total);
        }
        let idx = if total > 0.0 {
            let u = next_f64(rng) * total;
            cum.partition_point(|&c| c <= u).min(m - 1)
        } else {
            // Every atom already coincides with a center.
            (rng.next_u64() % m as u64) as usize
        };
        let c = sorted.xs[idx];
        centers.push(c);
        for j in 0..m {
            dist[j] = dist[j].min((sorted.xs[j] - c).abs());
        }
    }
    centers.sort_by(f64::total_cmp);
    centers
}

/// Cell boundaries for sorted centers: atom j belongs to the center whose
/// midpoint interval contains x_j, midpoints going left on ties.
fn boundaries_1d(sorted: &Sorted1D, centers: &[f64]) -> Vec<usize> {
    let mut bounds = Vec::with_capacity(centers.len() + 1);
    bounds.push(0);
    for k in 0..centers.len() - 1 {
        let mid = 0.5 * (centers[k] + centers[k + 1]);
        bounds.push(sorted.xs.partition_point(|&x| x <= mid));
    }
    bounds.push(sorted.len());
    bounds
}

struct LloydRun {
    centers: Vec<f64>,
    distortion: f64,
    trace: Vec<f64>,
    converged: bool,
    iterations: usize,
}

fn lloyd_1d_run(
    sorted: &Sorted1D,
    n: usize,
    r: f64,
    max_iters: usize,
    rel_tol: f64,
    rng: &mut ChaCha8Rng,
) -> LloydRun {
    let mut centers = seed_centers_1d(sorted, n, r, rng);
    let mut trace: Vec<f64> = Vec::new();
    let mut stall = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;
    loop {
        let mut bounds = boundaries_1d(sorted, &centers);
        // Reseed empty cells onto distinct worst-served atoms: splitting
        // the highest-distortion cells while every point's nearest-center
        // distance can only shrink.
        if (0..n).any(|k| bounds[k] == bounds[k + 1]) {
            let mut contrib: Vec<(f64, usize)> = Vec::with_capacity(sorted.len());
            for k in 0..n {
                for j in bounds[k]..bounds[k + 1] {
                    contrib.push((
                        sorted.ws[j] * pow_r((sorted.xs[j] - centers[k]).abs(), r),
                        j,
                    ));
                }
            }
            contrib.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut donor = contrib.into_iter();
            for k in 0..n {
                if bounds[k] == bounds[k + 1] {
                    if let Some((_, j)) = donor.next() {
                        centers[k] = sorted.xs[j];
                    }
                }
            }
            centers.sort_by(f64::total_cmp);
            bounds = boundaries_1d(sorted, &centers);
        }
        let mut cost = 0.0;
        for k in 0..n {
            if bounds[k] < bounds[k + 1] {
                cost += sorted.cost_at(bounds[k], bounds[k + 1], centers[k], r);
            }
        }
        if let Some(&prev) = trace.last() {
            if prev - cost <= rel_tol * prev.max(f64::MIN_POSITIVE) {
                stall += 1;
            } else {
                stall = 0;
            }
        }
        trace.push(cost);
        if stall >= STALL_LIMIT {
            converged = true;
            break;
        }
        if iterations >= max_iters {
            break;
        }
        iterations += 1;
        for k in 0..n {
            let (lo, hi) = (bounds[k], bounds[k + 1]);
            if lo >= hi {
                continue;
            }
            if r >= 1.0 {
                centers[k] = sorted.cell(lo, hi, r).0;
            } else {
                // Non-convex cell objective: try the weighted median, keep
                // it only when it does not increase the cell cost.
                let cand = sorted.median_center(lo, hi);
                if sorted.cost_at(lo, hi, cand, r) <= sorted.cost_at(lo, hi, centers[k], r) {
                    centers[k] = cand;
                }
            }
        }
        centers.sort_by(f64::total_cmp);
    }
    let distortion = *trace.last().expect("at least one iteration");
    LloydRun {
        centers,
        distortion,
        trace,
        converged,
        iterations,
    }
}

/// Generic-dimension Lloyd pieces: brute-force assignment, safeguarded
/// center updates.
struct DenseMeasure {
    coords: Vec<f64>,
    ws: Vec<f64>,
    dim: usize,
}

impl DenseMeasure {
    fn point(&self, j: usize) -> &[f64] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    fn len(&self) -> usize {
        self.ws.len()
    }
}

fn seed_centers_nd(mm: &DenseMeasure, n: usize, r: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = mm.len();
    let d = mm.dim;
    let mut centers: Vec<f64> = Vec::with_capacity(n * d);
    let mut dist = vec![f64::INFINITY; m];
    let mut cum = Vec::with_capacity(m);
    for t in 0..n {
        let mut total = 0.0;
        cum.clear();
        for j in 0..m {
            let mass = if t == 0 {
                mm.ws[j]
            } else {
                mm.ws[j] * pow_r(dist[j], r)
            };
            total += mass;
            cum.push(total);
        }
        let idx = if total > 0.0 {
            let u = next_f64(rng) * total;
            cum.partition_point(|&c| c <= u).min(m - 1)
        } else {
            (rng.next_u64() % m as u64) as usize
        };
        let c = mm.point(idx).to_vec();
        for j in 0..m {
            dist[j] = dist[j].min(euclidean(mm.point(j), &c));
        }
        centers.extend_from_slice(&c);
    }
    centers
}

fn lloyd_nd_run(
    mm: &DenseMeasure,
    n: usize,
    r: f64,
    max_iters: usize,
    rel_tol: f64,
    rng: &mut ChaCha8Rng,
) -> LloydRun {
    let d = mm.dim;
    let m = mm.len();
    let mut centers = seed_centers_nd(mm, n, r, rng);
    let mut assign = vec![0usize; m];
    let mut trace: Vec<f64> = Vec::new();
    let mut stall = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;
    let cell_cost = |centers: &[f64], assign: &[usize], k: usize, a: &[f64]| -> f64 {
        let _ = centers;
        let mut acc = 0.0;
        for j in 0..m {
            if assign[j] == k {
                acc += mm.ws[j] * pow_r(euclidean(mm.point(j), a), r);
            }
        }
        acc
    };
    loop {
        for j in 0..m {
            let p = mm.point(j);
            let mut best = (f64::INFINITY, 0usize);
            for k in 0..n {
                let dsq = euclidean_sq(p, &centers[k * d..(k + 1) * d]);
                if dsq < best.0 {
                    best = (dsq, k);
                }
            }
            assign[j] = best.1;
        }
        let mut counts = vec![0usize; n];
        for &a in &assign {
            counts[a] += 1;
        }
        if counts.iter().any(|&c| c == 0) {
            let mut contrib: Vec<(f64, usize)> = (0..m)
                .map(|j| {
                    let k = assign[j];
                    (
                        mm.ws[j] * pow_r(euclidean(mm.point(j), &centers[k * d..(k + 1) * d]), r),
                        j,
                    )
                })
                .collect();
            contrib.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut donor = contrib.into_iter();
            for k in 0..n {
                if counts[k] == 0 {
                    if let Some((_, j)) = donor.next() {
                        centers[k * d..(k + 1) * d].copy_from_slice(mm.point(j));
                    }
                }
            }
            for j in 0..m {
                let p = mm.point(j);
                let mut best = (f64::INFINITY, 0usize);
                for k in 0..n {
                    let dsq = euclidean_sq(p, &centers[k * d..(k + 1) * d]);
                    if dsq < best.0 {
                        best = (dsq, k);
                    }
                }
                assign[j] = best.1;
            }
        }
        let mut cost = 0.0;
        for j in 0..m {
            let k = assign[j];
            cost += mm.ws[j] * pow_r(euclidean(mm.point(j), &centers[k * d..(k + 1) * d]), r);
        }
        if let Some(&prev) = trace.last() {
            if prev - cost <= rel_tol * prev.max(f64::MIN_POSITIVE) {
                stall += 1;
            } else {
                stall = 0;
            }
        }
        trace.push(cost);
        if stall >= STALL_LIMIT {
            converged = true;
            break;
        }
        if iterations >= max_iters {
            break;
        }
        iterations += 1;
        for k in 0..n {
            let old: Vec<f64> = centers[k * d..(k + 1) * d].to_vec();
            let mut cand = vec![0.0; d];
            if r == 2.0 {
                let mut wsum = 0.0;
                for j in 0..m {
                    if assign[j] == k {
                        wsum += mm.ws[j];
                        for t in 0..d {
                            cand[t] += mm.ws[j] * mm.point(j)[t];
                        }
                    }
                }
                if wsum > 0.0 {
                    for c in &mut cand {
                        *c /= wsum;
                    }
                } else {
                    cand.copy_from_slice(&old);
                }
            } else {
                // Damped reweighted iteration on the cell objective,
                // starting from the current center.
                cand.copy_from_slice(&old);
                for _ in 0..INNER_STEPS {
                    let mut num = vec![0.0; d];
                    let mut den = 0.0;
                    for j in 0..m {
                        if assign[j] == k {
                            let dist = euclidean(mm.point(j), &cand).max(1e-300);
                            let wgt = mm.ws[j] * pow_r(dist, r) / (dist * dist);
                            den += wgt;
                            for t in 0..d {
                                num[t] += wgt * mm.point(j)[t];
                            }
                        }
                    }
                    if den <= 0.0 {
                        break;
                    }
                    let mut shift = 0.0;
                    for t in 0..d {
                        let next = 0.5 * cand[t] + 0.5 * num[t] / den;
                        shift += (next - cand[t]).abs();
                        cand[t] = next;
                    }
                    if shift < INNER_TOL {
                        break;
                    }
                }
            }
            // Safeguard: never accept an update that worsens the cell.
            if cell_cost(&centers, &assign, k, &cand) <= cell_cost(&centers, &assign, k, &old) {
                centers[k * d..(k + 1) * d].copy_from_slice(&cand);
            }
        }
    }
    let distortion = *trace.last().expect("at least one iteration");
    LloydRun {
        centers,
        distortion,
        trace,
        converged,
        iterations,
    }
}

fn distinct_support(m: &EmpiricalMeasure) -> PointCloud {
    let d = m.dim();
    let mut order: Vec<usize> = (0..m.len()).collect();
    order.sort_by(|&a, &b| {
        m.point(a)
            .iter()
            .zip(m.point(b))
            .find_map(|(x, y)| {
                let c = x.total_cmp(y);
                (c != std::cmp::Ordering::Equal).then_some(c)
            })
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut cloud = PointCloud::new(d);
    let mut last: Option<&[f64]> = None;
    for &i in &order {
        let p = m.point(i);
        if last != Some(p) {
            cloud.push(p);
        }
        last = Some(p);
    }
    cloud
}

/// Lloyd descent for the order-r quantization problem: best of
/// `LLOYD_RESTARTS` seeded runs, each alternating nearest-center
/// assignment with per-cell center updates (exact for r ≥ 1 in 1-D and
/// r = 2 anywhere, safeguarded descent otherwise). The reported distortion
/// is an upper bound on V_{n,r}.
pub fn lloyd_quantize(
    m: &EmpiricalMeasure,
    n: usize,
    r: f64,
    seed: u64,
    max_iters: usize,
    rel_tol: f64,
) -> Result<Quantizer> {
    validate_order(r)?;
    if n < 1 {
        return Err(Error::InvalidInput(
            "center count must be at least 1".into(),
        ));
    }
    if max_iters < 1 {
        return Err(Error::InvalidInput("max_iters must be at least 1".into()));
    }
    if !(rel_tol >= 0.0) {
        return Err(Error::InvalidInput("rel_tol must be non-negative".into()));
    }
    let support = distinct_support(m);
    if n >= support.len() {
        return Ok(Quantizer {
            distortion: 0.0,
            order: r,
            converged: true,
            iterations: 0,
            distortion_trace: Vec::new(),
            centers: support,
        });
    }
    let runs: Vec<LloydRun> = if m.dim() == 1 {
        let sorted = Sorted1D::build(m)?;
        exec::map_range(LLOYD_RESTARTS, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            lloyd_1d_run(&sorted, n, r, max_iters, rel_tol, &mut rng)
        })
    } else {
        let mm = DenseMeasure {
            coords: m.cloud().coords().to_vec(),
            ws: m.weights().to_vec(),
            dim: m.dim(),
        };
        exec::map_range(LLOYD_RESTARTS, |t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            lloyd_nd_run(&mm, n, r, max_iters, rel_tol, &mut rng)
        })
    };
    let best = runs
        .into_iter()
        .min_by(|a, b| a.distortion.total_cmp(&b.distortion))
        .expect("at least one restart");
    let d = m.dim();
    // Dedup pass: coincident centers are merged.
    let mut centers = PointCloud::new(d);
    for k in 0..best.centers.len() / d {
        let c = &best.centers[k * d..(k + 1) * d];
        if !centers.iter().any(|q| q == c) {
            centers.push(c);
        }
    }
    Ok(Quantizer {
        centers,
        order: r,
        distortion: best.distortion,
        converged: best.converged,
        iterations: best.iterations,
        distortion_trace: best.trace,
    })
}

fn regress(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    (slope, r2)
}

/// Lloyd settings used inside the dimension estimator: tighter than the
/// API defaults because slope windows are sensitive to solver slack.
const QDIM_MAX_ITERS: usize = 300;
const QDIM_REL_TOL: f64 = 1e-12;

/// Fits log n against −log e_{n,r} over the grid; the smallest grid entry
/// is dropped by default since the dimension is an n → ∞ limit.
pub fn estimate_qdim(m: &EmpiricalMeasure, r: f64, n_grid: &[usize], seed: u64) -> Result<QDimFit> {
    estimate_qdim_with(m, r, n_grid, seed, QdimBackend::Lloyd, true)
}

pub fn estimate_qdim_with(
    m: &EmpiricalMeasure,
    r: f64,
    n_grid: &[usize],
    seed: u64,
    backend: QdimBackend,
    drop_smallest: bool,
) -> Result<QDimFit> {
    validate_order(r)?;
    if n_grid.len() < 2 {
        return Err(Error::InvalidGrid("need at least 2 grid entries".into()));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidGrid(
            "n grid must be strictly increasing".into(),
        ));
    }
    if n_grid[0] < 1 {
        return Err(Error::InvalidGrid("cluster counts start at 1".into()));
    }
    let values: Vec<f64> = match backend {
        QdimBackend::Exact1d => exact_quantize_1d_grid(m, n_grid, r)?
            .into_iter()
            .map(|q| q.distortion)
            .collect(),
        QdimBackend::Lloyd => {
            let mut vals = Vec::with_capacity(n_grid.len());
            for &n in n_grid {
                let per_n_seed = seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                vals.push(
                    lloyd_quantize(m, n, r, per_n_seed, QDIM_MAX_ITERS, QDIM_REL_TOL)?.distortion,
                );
            }
            vals
        }
    };
    let errors: Vec<f64> = values.iter().map(|v| v.powf(1.0 / r)).collect();
    if errors.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidGrid(
            "zero quantization error: a grid entry reaches the support size".into(),
        ));
    }
    let skip = if drop_smallest && errors.len() > 2 {
        1
    } else {
        0
    };
    let xs: Vec<f64> = errors[skip..].iter().map(|&e| -e.ln()).collect();
    let ys: Vec<f64> = n_grid[skip..].iter().map(|&n| (n as f64).ln()).collect();
    let (slope, r_squared) = regress(&xs, &ys);
    Ok(QDimFit {
        n_grid: n_grid.to_vec(),
        errors,
        slope,
        r_squared,
    })
}

/// (V_{n,r}(μ∘f⁻¹), c^r·V_{n,r}(μ)) via the exact 1-D solver; the first
/// never exceeds the second for a contraction with upper constant c.
pub fn pushforward_distortion_check(
    m: &EmpiricalMeasure,
    f: &ContractionMap,
    n: usize,
    r: f64,
) -> Result<(f64, f64)> {
    if m.dim() != 1 || f.dim() != 1 {
        return Err(Error::Unsupported("the exact check is 1-D only".into()));
    }
    let pushed = m.pushforward(f)?;
    let lhs = exact_quantize_1d(&pushed, n, r)?.distortion;
    let rhs = pow_r(f.upper_lip(), r) * exact_quantize_1d(m, n, r)?.distortion;
    Ok((lhs, rhs))
}

/// (V_{Σn_i, r}(Σ s_i μ_i), Σ s_i V_{n_i, r}(μ_i)) via the exact solver.
pub fn mixture_distortion_check(
    components: &[(EmpiricalMeasure, f64)],
    allocations: &[usize],
    r: f64,
) -> Result<(f64, f64)> {
    if components.is_empty() || components.len() != allocations.len() {
        return Err(Error::InvalidInput(
            "components and allocations must be non-empty and equal length".into(),
        ));
    }
    let total_weight: f64 = components.iter().map(|(_, s)| s).sum();
    if (total_weight - 1.0).abs() > 1e-12 || components.iter().any(|(_, s)| !(*s > 0.0)) {
        return Err(Error::InvalidInput(
            "mixture weights must be positive and sum to 1".into(),
        ));
    }
    let mut coords = Vec::new();
    let mut weights = Vec::new();
    let mut rhs = 0.0;
    for ((comp, s), &n_i) in components.iter().zip(allocations) {
        if comp.dim() != 1 {
            return Err(Error::Unsupported("the exact check is 1-D only".into()));
        }
        rhs += s * exact_quantize_1d(comp, n_i, r)?.distortion;
        for j in 0..comp.len() {
            coords.push(comp.point(j)[0]);
            weights.push(s * comp.weight(j));
        }
    }
    let sum: f64 = exec::kahan_sum(weights.iter().copied());
    if let Some(last) = weights.last_mut() {
        *last += 1.0 - sum;
    }
    let mixture = EmpiricalMeasure::new(PointCloud::from_flat(coords, 1)?, weights)?;
    let n: usize = allocations.iter().sum();
    let lhs = exact_quantize_1d(&mixture, n, r)?.distortion;
    Ok((lhs, rhs))
}
