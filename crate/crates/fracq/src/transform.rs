//! The tops code of a point (greedy maximal addressing), fractal
//! transformations between systems with matching map counts, and graph
//! sampling in the product space.

use crate::code_space::{CodePrefix, TailConvention, Word};
use crate::error::{Error, Result};
use crate::exec;
use crate::geom::euclidean_sq;
use crate::ifs::{address_point, attractor_sample, IFSystem, PointCloud};

/// Cap on the helper cloud used for membership tests in dimensions ≥ 2.
const CLOUD_BUDGET: usize = 4096;

/// A depth-K prefix of the maximal address of a point.
#[derive(Clone, Debug)]
pub struct TopsResult {
    pub code: CodePrefix,
    /// The point after K inverse steps; lies in the hull (clamped against
    /// numerical drift).
    pub residual_point: Vec<f64>,
    /// True when every membership decision used exact 1-D image intervals.
    pub certified: bool,
}

enum Branches {
    /// Exact image intervals [f_i(a), f_i(b)] of the hull, one per map.
    Intervals(Vec<(f64, f64)>),
    /// Per-map samples of f_i(A); membership by distance.
    Clouds(Vec<PointCloud>),
}

struct TopsContext<'a> {
    system: &'a IFSystem,
    branches: Branches,
    tol: f64,
}

impl<'a> TopsContext<'a> {
    fn new(system: &'a IFSystem, tol: Option<f64>) -> Result<Self> {
        if let Some(t) = tol {
            if !(t > 0.0) {
                return Err(Error::InvalidInput("tolerance must be positive".into()));
            }
        }
        for (i, map) in system.maps().iter().enumerate() {
            if !map.has_inverse() {
                return Err(Error::Unsupported(format!(
                    "map {} has no inverse; tops codes need invertible maps",
                    i + 1
                )));
            }
        }
        if system.dim() == 1 {
            let hull = system.hull().ok_or_else(|| {
                Error::Unsupported("1-D tops codes need a hull for image intervals".into())
            })?;
            let (a, b) = (hull.lower()[0], hull.upper()[0]);
            // Every injective continuous 1-D map is monotone, so the image
            // of [a, b] is exactly the sorted endpoint pair.
            let intervals = system
                .maps()
                .iter()
                .map(|f| {
                    let (u, v) = (f.apply(&[a])[0], f.apply(&[b])[0]);
                    (u.min(v), u.max(v))
                })
                .collect();
            return Ok(TopsContext {
                system,
                branches: Branches::Intervals(intervals),
                tol: tol.unwrap_or(1e-9),
            });
        }
        let n = system.map_count();
        let mut depth = 1usize;
        while n.pow(depth as u32 + 1) <= CLOUD_BUDGET {
            depth += 1;
        }
        let seed = system.default_seed_point();
        let full = attractor_sample(system, depth, &seed)?;
        let block = full.len() / n;
        let d = system.dim();
        let per_branch = (0..n)
            .map(|i| {
                PointCloud::from_flat(
                    full.coords()[i * block * d..(i + 1) * block * d].to_vec(),
                    d,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let diam = system
            .hull_diameter()
            .map(Ok)
            .unwrap_or_else(|| full.bounding_box().map(|b| b.diameter(system.metric())))?;
        let resolution = system.max_upper_lip().powi(depth as i32 - 1) * diam;
        Ok(TopsContext {
            system,
            branches: Branches::Clouds(per_branch),
            tol: tol.unwrap_or(2.0 * resolution),
        })
    }

    fn certified(&self) -> bool {
        matches!(self.branches, Branches::Intervals(_))
    }

    /// Distance from x to branch i's image region (0 when inside).
    fn branch_distance(&self, i: usize, x: &[f64]) -> f64 {
        match &self.branches {
            Branches::Intervals(iv) => {
                let (lo, hi) = iv[i];
                (lo - x[0]).max(x[0] - hi).max(0.0)
            }
            Branches::Clouds(clouds) => {
                let mut best = f64::INFINITY;
                for q in clouds[i].iter() {
                    best = best.min(euclidean_sq(x, q));
                }
                best.sqrt()
            }
        }
    }

    fn clamp_to_hull(&self, x: &mut [f64]) {
        if let Some(h) = self.system.hull() {
            for k in 0..x.len() {
                x[k] = x[k].clamp(h.lower()[k], h.upper()[k]);
            }
        }
    }

    fn descend(&self, x: &[f64], k: usize) -> Result<TopsResult> {
        let n = self.system.map_count();
        let mut cur = x.to_vec();
        let mut symbols = Vec::with_capacity(k);
        for step in 0..k {
            // Largest admissible index wins; that makes the output the
            // maximum address under first-differing-symbol order.
            let mut chosen = None;
            for i in (0..n).rev() {
                if self.branch_distance(i, &cur) <= self.tol {
                    chosen = Some(i);
                    break;
                }
            }
            let i = match chosen {
                Some(i) => i,
                None => {
                    // Numerical drift: snap to the nearest branch when it
                    // is credibly close, otherwise fail loudly.
                    let mut best = (f64::INFINITY, 0usize);
                    for i in (0..n).rev() {
                        let dist = self.branch_distance(i, &cur);
                        if dist < best.0 {
                            best = (dist, i);
                        }
                    }
                    if best.0 <= 10.0 * self.tol {
                        best.1
                    } else {
                        return Err(Error::AddressFailure {
                            step,
                            reason: format!(
                                "point is {:.3e} from the nearest branch image (tol {:.3e})",
                                best.0, self.tol
                            ),
                        });
                    }
                }
            };
            symbols.push(i as u32 + 1);
            cur = self.system.map(i).apply_inverse(&cur)?;
            self.clamp_to_hull(&mut cur);
        }
        let word = Word::new(symbols, n as u32)?;
        Ok(TopsResult {
            code: CodePrefix::new(word, TailConvention::RepeatLast),
            residual_point: cur,
            certified: self.certified(),
        })
    }
}

/// Depth-K prefix of the maximal address of x under F, by greedy descent:
/// at each step take the largest branch whose image region contains the
/// point, then apply that branch's inverse. `tol` overrides the membership
/// tolerance (default 1e-9 for exact 1-D intervals, twice the helper-cloud
/// resolution otherwise).
pub fn tops_code(f: &IFSystem, x: &[f64], k: usize, tol: Option<f64>) -> Result<TopsResult> {
    if k < 1 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    if x.len() != f.dim() {
        return Err(Error::InvalidInput(format!(
            "point dimension {} does not match system dimension {}",
            x.len(),
            f.dim()
        )));
    }
    TopsContext::new(f, tol)?.descend(x, k)
}

/// The fractal transformation x ↦ address_G(tops_F(x)) at depth K; the
/// result is within (max upper_lip of G)^K · diam(hull_G) of the exact
/// transform.
pub fn transform_point(f: &IFSystem, g: &IFSystem, x: &[f64], k: usize) -> Result<Vec<f64>> {
    if f.map_count() != g.map_count() {
        return Err(Error::InvalidInput(format!(
            "map counts differ: {} vs {}",
            f.map_count(),
            g.map_count()
        )));
    }
    let tops = tops_code(f, x, k, None)?;
    let seed = g.default_seed_point();
    Ok(address_point(g, &tops.code, &seed)?.point)
}

/// One input point that could not be addressed.
#[derive(Clone, Debug)]
pub struct GraphFailure {
    pub index: usize,
    pub step: usize,
    pub reason: String,
}

/// Sampled graph {(x, T(x))} in the product space, with failures listed
/// per input index.
#[derive(Clone, Debug)]
pub struct GraphSample {
    pub points: PointCloud,
    pub failures: Vec<GraphFailure>,
}

/// Evaluates the fractal transformation on every input point; output order
/// matches input order with failed points omitted.
pub fn graph_sample(f: &IFSystem, g: &IFSystem, xs: &PointCloud, k: usize) -> Result<GraphSample> {
    if f.map_count() != g.map_count() {
        return Err(Error::InvalidInput(format!(
            "map counts differ: {} vs {}",
            f.map_count(),
            g.map_count()
        )));
    }
    if xs.dim() != f.dim() {
        return Err(Error::InvalidInput(format!(
            "cloud dimension {} does not match source dimension {}",
            xs.dim(),
            f.dim()
        )));
    }
    let ctx = TopsContext::new(f, None)?;
    let g_seed = g.default_seed_point();
    let results = exec::map_range(xs.len(), |i| {
        let x = xs.point(i);
        match ctx.descend(x, k) {
            Ok(tops) => match address_point(g, &tops.code, &g_seed) {
                Ok(a) => Ok((x.to_vec(), a.point)),
                Err(e) => Err((i, k, e.to_string())),
            },
            Err(Error::AddressFailure { step, reason }) => Err((i, step, reason)),
            Err(e) => Err((i, 0, e.to_string())),
        }
    });
    let mut points = PointCloud::new(f.dim() + g.dim());
    let mut failures = Vec::new();
    let mut buf = vec![0.0; f.dim() + g.dim()];
    for r in results {
        match r {
            Ok((x, y)) => {
                buf[..f.dim()].copy_from_slice(&x);
                buf[f.dim()..].copy_from_slice(&y);
                points.push(&buf);
            }
            Err((index, step, reason)) => failures.push(GraphFailure {
                index,
                step,
                reason,
            }),
        }
    }
    Ok(GraphSample { points, failures })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{apply_word, builtins, diagonal_product, hausdorff_distance};

    fn symbols_of(t: &TopsResult) -> Vec<u32> {
        t.code.word().symbols().to_vec()
    }

    #[test]
    fn tops_binary_half_prefers_larger_symbol() {
        let f = builtins::binary();
        let t = tops_code(&f, &[0.5], 8, None).unwrap();
        assert_eq!(symbols_of(&t), vec![2, 1, 1, 1, 1, 1, 1, 1]);
        assert!(t.certified);
    }

    #[test]
    fn tops_binary_fixed_point() {
        let f = builtins::binary();
        let t = tops_code(&f, &[0.0], 10, None).unwrap();
        assert_eq!(symbols_of(&t), vec![1; 10]);
        assert!(t.residual_point[0].abs() < 1e-9);
    }

    #[test]
    fn tops_cantor_unique_address() {
        let f = builtins::cantor3();
        let t = tops_code(&f, &[1.0 / 3.0], 6, None).unwrap();
        assert_eq!(symbols_of(&t), vec![1, 2, 2, 2, 2, 2]);
    }

    #[test]
    fn tops_rejects_far_point() {
        let f = builtins::cantor3();
        // 0.5 is in the deleted middle gap.
        match tops_code(&f, &[0.5], 4, None) {
            Err(Error::AddressFailure { step, .. }) => assert_eq!(step, 0),
            other => panic!("expected address failure, got {:?}", other.map(|t| t.code)),
        }
    }

    /// Brute-force oracle: lexicographically largest depth-k word whose
    /// cylinder could contain x.
    fn max_address_brute(f: &IFSystem, x: f64, k: usize) -> Vec<u32> {
        let n = f.map_count();
        let hull = f.hull().unwrap();
        let mid = [0.5 * (hull.lower()[0] + hull.upper()[0])];
        let radius = 0.5 * (hull.upper()[0] - hull.lower()[0]);
        let mut best: Option<Vec<u32>> = None;
        for idx in 0..n.pow(k as u32) {
            let mut rem = idx;
            let mut sym = vec![0u32; k];
            for pos in (0..k).rev() {
                sym[pos] = (rem % n) as u32 + 1;
                rem /= n;
            }
            let w = Word::new(sym.clone(), n as u32).unwrap();
            let center = apply_word(f, &w, &mid).unwrap()[0];
            let width: f64 = w
                .symbols()
                .iter()
                .map(|&s| f.map((s - 1) as usize).upper_lip())
                .product();
            if (center - x).abs() <= width * radius + 1e-12 {
                if best.as_ref().map(|b| &sym > b).unwrap_or(true) {
                    best = Some(sym);
                }
            }
        }
        best.unwrap()
    }

    #[test]
    fn tops_matches_bruteforce_maximum() {
        let f = builtins::binary();
        for &x in &[0.5, 0.25, 0.75, 0.375] {
            let t = tops_code(&f, &[x], 6, None).unwrap();
            assert_eq!(symbols_of(&t), max_address_brute(&f, x, 6), "x = {}", x);
        }
        let g = builtins::thirds();
        for &x in &[1.0 / 3.0, 2.0 / 3.0, 0.5] {
            let t = tops_code(&g, &[x], 6, None).unwrap();
            assert_eq!(symbols_of(&t), max_address_brute(&g, x, 6), "x = {}", x);
        }
    }

    #[test]
    fn transform_identity_on_attractor() {
        let f = builtins::thirds();
        let xs = attractor_sample(&f, 8, &f.default_seed_point()).unwrap();
        let k = 30;
        let bound = f.max_upper_lip().powi(k as i32) * 1.0 + 1e-9;
        for p in xs.iter() {
            let y = transform_point(&f, &f, p, k).unwrap();
            assert!((y[0] - p[0]).abs() <= bound, "{} -> {}", p[0], y[0]);
        }
    }

    #[test]
    fn transform_binary_to_thirds_examples() {
        let f = builtins::binary();
        let g = builtins::thirds();
        let y = transform_point(&f, &g, &[0.0], 30).unwrap();
        assert!(y[0].abs() < 1e-12);
        let y = transform_point(&f, &g, &[0.5], 30).unwrap();
        assert!((y[0] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn graph_sample_diagonal_when_g_equals_f() {
        let f = builtins::binary();
        let xs = attractor_sample(&f, 6, &f.default_seed_point()).unwrap();
        let gs = graph_sample(&f, &f, &xs, 30).unwrap();
        assert!(gs.failures.is_empty());
        assert_eq!(gs.points.len(), xs.len());
        for p in gs.points.iter() {
            assert!((p[0] - p[1]).abs() < 2f64.powi(-30) + 1e-12);
        }
    }

    #[test]
    fn graph_sample_reports_failures() {
        let f = builtins::cantor3();
        let g = builtins::thirds();
        let mut xs = PointCloud::new(1);
        xs.push(&[0.0]);
        xs.push(&[0.5]); // gap point, unaddressable
        xs.push(&[1.0]);
        let gs = graph_sample(&f, &g, &xs, 10).unwrap();
        assert_eq!(gs.points.len(), 2);
        assert_eq!(gs.failures.len(), 1);
        assert_eq!(gs.failures[0].index, 1);
    }

    #[test]
    fn graph_sample_matches_product_attractor() {
        let f = builtins::binary();
        let g = builtins::thirds();
        let depth = 8;
        let xs = attractor_sample(&f, depth, &f.default_seed_point()).unwrap();
        let gs = graph_sample(&f, &g, &xs, 40).unwrap();
        assert!(gs.failures.is_empty());
        let h = diagonal_product(&f, &g).unwrap();
        let hs = attractor_sample(&h, depth, &h.default_seed_point()).unwrap();
        let dist = hausdorff_distance(&gs.points, &hs).unwrap();
        assert!(
            dist <= 4.0 * f.max_upper_lip().powi(depth as i32),
            "hausdorff {}",
            dist
        );
    }

    #[test]
    fn tops_cloud_mode_in_two_dimensions() {
        let f = builtins::binary();
        let h = diagonal_product(&f, &f).unwrap();
        let t = tops_code(&h, &[0.0, 0.0], 6, None).unwrap();
        assert_eq!(symbols_of(&t), vec![1; 6]);
        assert!(!t.certified);
        let t = tops_code(&h, &[0.75, 0.75], 2, None).unwrap();
        assert_eq!(symbols_of(&t), vec![2, 2]);
    }
}
