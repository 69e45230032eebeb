//! Chaos-game sampling of invariant measures, box-mass queries,
//! invariance and product-factorization residuals, and the exact countable
//! atomic benchmark measure.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec;
use crate::geom::BoxRegion;
use crate::ifs::{ContractionMap, IFSystem, MapKind, PointCloud};

/// Samples per independent generator stream; fixed so output is identical
/// regardless of how streams are scheduled.
const STREAM_LEN: usize = 65_536;

/// Hard cap on chaos-game sample counts.
pub const MAX_SAMPLES: usize = 100_000_000;

/// A finitely supported probability measure: points with masses summing
/// to 1.
#[derive(Clone, Debug)]
pub struct EmpiricalMeasure {
    cloud: PointCloud,
    weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(cloud: PointCloud, weights: Vec<f64>) -> Result<Self> {
        if cloud.len() != weights.len() {
            return Err(Error::InvalidInput(format!(
                "{} points with {} weights",
                cloud.len(),
                weights.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::InvalidInput(
                "measure needs at least one atom".into(),
            ));
        }
        if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidInput(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total = exec::kahan_sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {}, not 1",
                total
            )));
        }
        Ok(EmpiricalMeasure { cloud, weights })
    }

    /// Uniform weights 1/len on a cloud.
    pub fn uniform(cloud: PointCloud) -> Result<Self> {
        let n = cloud.len();
        if n == 0 {
            return Err(Error::InvalidInput(
                "measure needs at least one atom".into(),
            ));
        }
        let w = 1.0 / n as f64;
        EmpiricalMeasure::new(cloud, vec![w; n])
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.cloud.dim()
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.cloud.point(i)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Image measure under f: same weights on mapped points.
    pub fn pushforward(&self, f: &ContractionMap) -> Result<Self> {
        if f.dim() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "map dimension {} does not match measure dimension {}",
                f.dim(),
                self.dim()
            )));
        }
        let d = self.dim();
        let mapped = exec::map_range(self.len(), |i| f.apply(self.point(i)));
        let mut coords = Vec::with_capacity(self.len() * d);
        for p in mapped {
            coords.extend_from_slice(&p);
        }
        Ok(EmpiricalMeasure {
            cloud: PointCloud::from_flat(coords, d)?,
            weights: self.weights.clone(),
        })
    }

    /// Dilation x ↦ λ·x of every atom.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda == 0.0 {
            return Err(Error::InvalidInput(
                "scale must be finite and nonzero".into(),
            ));
        }
        let coords = self.cloud.coords().iter().map(|&c| lambda * c).collect();
        Ok(EmpiricalMeasure {
            cloud: PointCloud::from_flat(coords, self.dim())?,
            weights: self.weights.clone(),
        })
    }
}

/// Uniform f64 in [0, 1) from the top 53 bits of a u64 draw.
fn next_f64(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn chaos_stream(
    wifs: &IFSystem,
    cum: &[f64],
    start: &[f64],
    burn_in: usize,
    count: usize,
    seed: u64,
    stream: u64,
) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let d = wifs.dim();
    let mut x = start.to_vec();
    let mut next = vec![0.0; d];
    let mut out = Vec::with_capacity(count * d);
    for k in 0..burn_in + count {
        let u = next_f64(&mut rng);
        let i = cum.partition_point(|&c| c <= u).min(cum.len() - 1);
        wifs.map(i).apply_into(&x, &mut next);
        std::mem::swap(&mut x, &mut next);
        if k >= burn_in {
            out.extend_from_slice(&x);
        }
    }
    out
}

/// Draws n_samples points of the invariant measure of a weighted system by
/// the chaos game. Sampling is split into fixed-length seeded streams
/// concatenated in stream order, so the output depends only on
/// (system, n_samples, burn_in, seed).
pub fn chaos_game(
    wifs: &IFSystem,
    n_samples: usize,
    burn_in: usize,
    seed: u64,
) -> Result<EmpiricalMeasure> {
    let probs = wifs
        .probs()
        .ok_or_else(|| Error::InvalidInput("chaos game requires probabilities".into()))?;
    if n_samples < 1 {
        return Err(Error::InvalidInput("n_samples must be at least 1".into()));
    }
    if n_samples > MAX_SAMPLES {
        return Err(Error::BudgetExceeded(format!(
            "{} samples exceed the {} cap",
            n_samples, MAX_SAMPLES
        )));
    }
    let mut cum = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for &p in probs {
        acc += p;
        cum.push(acc);
    }
    let start = wifs
        .hull()
        .map(|h| h.center())
        .unwrap_or_else(|| wifs.default_seed_point());
    let n_streams = n_samples.div_ceil(STREAM_LEN);
    let blocks = exec::map_range(n_streams, |t| {
        let count = STREAM_LEN.min(n_samples - t * STREAM_LEN);
        chaos_stream(wifs, &cum, &start, burn_in, count, seed, t as u64 + 1)
    });
    let d = wifs.dim();
    let mut coords = Vec::with_capacity(n_samples * d);
    for b in blocks {
        coords.extend(b);
    }
    EmpiricalMeasure::uniform(PointCloud::from_flat(coords, d)?)
}

/// Mass of a closed box: boundary atoms count fully.
pub fn measure_of_box(m: &EmpiricalMeasure, b: &BoxRegion) -> Result<f64> {
    if b.dim() != m.dim() {
        return Err(Error::InvalidInput(format!(
            "box dimension {} does not match measure dimension {}",
            b.dim(),
            m.dim()
        )));
    }
    Ok(exec::sum_over(m.len(), |i| {
        if b.contains(m.point(i)) {
            m.weight(i)
        } else {
            0.0
        }
    }))
}

/// How box preimages are evaluated in `invariance_residual`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreimageMode {
    /// Exact box preimages for 1-D affine maps, else cloud pushforward.
    Auto,
    /// Exact box preimages; errors on non-affine or multi-dimensional maps.
    Preimage,
    /// μ(f_i^{-1}(B)) evaluated as the mass the mapped cloud puts in B.
    Pushforward,
}

fn preimage_interval(map: &ContractionMap, b: &BoxRegion) -> Result<BoxRegion> {
    let (scale, offset) = map
        .as_affine_1d()
        .ok_or_else(|| Error::Unsupported("exact preimages need 1-D affine maps".into()))?;
    let u = (b.lower()[0] - offset) / scale;
    let v = (b.upper()[0] - offset) / scale;
    BoxRegion::interval(u.min(v), u.max(v))
}

/// Max over boxes of |μ(B) − Σ p_i μ(f_i^{-1}(B))|: how far the empirical
/// measure is from being invariant for the given weighted system.
pub fn invariance_residual(
    m: &EmpiricalMeasure,
    wifs: &IFSystem,
    boxes: &[BoxRegion],
) -> Result<f64> {
    invariance_residual_with(m, wifs, boxes, PreimageMode::Auto)
}

pub fn invariance_residual_with(
    m: &EmpiricalMeasure,
    wifs: &IFSystem,
    boxes: &[BoxRegion],
    mode: PreimageMode,
) -> Result<f64> {
    let probs = wifs
        .probs()
        .ok_or_else(|| Error::InvalidInput("invariance check requires probabilities".into()))?;
    if boxes.is_empty() {
        return Err(Error::InvalidInput("at least one box is required".into()));
    }
    let all_affine_1d = wifs.dim() == 1
        && wifs
            .maps()
            .iter()
            .all(|f| f.kind() != MapKind::General && f.as_affine_1d().is_some());
    let use_preimage = match mode {
        PreimageMode::Preimage => {
            if !all_affine_1d {
                return Err(Error::Unsupported(
                    "exact preimages need 1-D affine maps".into(),
                ));
            }
            true
        }
        PreimageMode::Pushforward => false,
        PreimageMode::Auto => all_affine_1d,
    };
    let pushed: Vec<EmpiricalMeasure> = if use_preimage {
        Vec::new()
    } else {
        wifs.maps()
            .iter()
            .map(|f| m.pushforward(f))
            .collect::<Result<_>>()?
    };
    let mut worst = 0.0f64;
    for b in boxes {
        let lhs = measure_of_box(m, b)?;
        let mut rhs = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            let mass = if use_preimage {
                measure_of_box(m, &preimage_interval(wifs.map(i), b)?)?
            } else {
                measure_of_box(&pushed[i], b)?
            };
            rhs += p * mass;
        }
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Samples the product system and both factors, then reports the max over
/// box pairs of |μ_{F×G}(A×B) − μ_F(A)·μ_G(B)|.
pub fn product_measure_residual(
    f: &IFSystem,
    g: &IFSystem,
    boxes_a: &[BoxRegion],
    boxes_b: &[BoxRegion],
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    if boxes_a.is_empty() || boxes_b.is_empty() {
        return Err(Error::InvalidInput(
            "both box lists must be non-empty".into(),
        ));
    }
    let product = crate::ifs::full_product(f, g)?;
    let burn = 64;
    let m_prod = chaos_game(&product, n_samples, burn, seed)?;
    let m_f = chaos_game(f, n_samples, burn, seed ^ 0x9E37_79B9_7F4A_7C15)?;
    let m_g = chaos_game(g, n_samples, burn, seed ^ 0xD1B5_4A32_D192_ED03)?;
    let mass_a: Vec<f64> = boxes_a
        .iter()
        .map(|a| measure_of_box(&m_f, a))
        .collect::<Result<_>>()?;
    let mass_b: Vec<f64> = boxes_b
        .iter()
        .map(|b| measure_of_box(&m_g, b))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for (a, &ma) in boxes_a.iter().zip(&mass_a) {
        for (b, &mb) in boxes_b.iter().zip(&mass_b) {
            let joint = measure_of_box(&m_prod, &a.product(b))?;
            worst = worst.max((joint - ma * mb).abs());
        }
    }
    Ok(worst)
}

/// The countable atomic benchmark: atoms x_m = (1/m + 1/(m+1))/2 with
/// weights proportional to m^{-2}, truncated at M and renormalized.
#[derive(Clone, Debug)]
pub struct CountableMeasure {
    pub measure: EmpiricalMeasure,
    /// Mass of the discarded atoms m > M under the untruncated weights
    /// (6/π²)·m^{-2}; bounds the truncation bias of downstream estimates.
    pub tail_mass: f64,
}

pub fn countable_example_measure(m_count: usize) -> Result<CountableMeasure> {
    if m_count < 2 {
        return Err(Error::InvalidInput(
            "the countable example needs at least 2 atoms".into(),
        ));
    }
    // Atoms in ascending x order: m = M down to 1.
    let mut coords = Vec::with_capacity(m_count);
    let mut weights = Vec::with_capacity(m_count);
    let mut partial = 0.0;
    for m in (1..=m_count).rev() {
        let mf = m as f64;
        coords.push(0.5 * (1.0 / mf + 1.0 / (mf + 1.0)));
        let w = 1.0 / (mf * mf);
        weights.push(w);
        partial += w;
    }
    for w in &mut weights {
        *w /= partial;
    }
    // Make the sum exactly 1 against accumulated rounding.
    let sum: f64 = weights.iter().sum();
    if let Some(last) = weights.last_mut() {
        *last += 1.0 - sum;
    }
    let gamma = 6.0 / (std::f64::consts::PI * std::f64::consts::PI);
    let tail_mass = 1.0 - gamma * partial;
    Ok(CountableMeasure {
        measure: EmpiricalMeasure::new(PointCloud::from_flat(coords, 1)?, weights)?,
        tail_mass,
    })
}

/// min over support points x of μ(B(x, radius)) with open balls; the
/// empirical form of the positive-ball-mass bound used by the mesh lemma.
pub fn min_ball_mass(m: &EmpiricalMeasure, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidInput("radius must be positive".into()));
    }
    if m.dim() == 1 {
        // Sort once; each ball is a contiguous weight range.
        let mut order: Vec<usize> = (0..m.len()).collect();
        order.sort_by(|&a, &b| m.point(a)[0].total_cmp(&m.point(b)[0]));
        let xs: Vec<f64> = order.iter().map(|&i| m.point(i)[0]).collect();
        let mut prefix = vec![0.0; xs.len() + 1];
        for (k, &i) in order.iter().enumerate() {
            prefix[k + 1] = prefix[k] + m.weight(i);
        }
        let mut best = f64::INFINITY;
        for &x in &xs {
            let lo = xs.partition_point(|&v| v <= x - radius);
            let hi = xs.partition_point(|&v| v < x + radius);
            best = best.min(prefix[hi] - prefix[lo]);
        }
        return Ok(best);
    }
    let r2 = radius * radius;
    let neg_min = exec::max_over(m.len(), |i| {
        let p = m.point(i);
        let mut mass = 0.0;
        for j in 0..m.len() {
            if crate::geom::euclidean_sq(p, m.point(j)) < r2 {
                mass += m.weight(j);
            }
        }
        -mass
    });
    Ok(-neg_min)
}
