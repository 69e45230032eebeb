//! Contraction maps with certified bi-Lipschitz constants, IFS/WIFS
//! containers, deterministic attractor sampling, product and refinement
//! constructions, and 1-D separation checks.

use std::fmt;
use std::sync::Arc;

use crate::code_space::{CodePrefix, Word};
use crate::error::{Error, Result};
use crate::exec;
use crate::geom::{euclidean, euclidean_sq, BoxRegion, Metric};

/// Cap on deterministic word-enumeration sizes (attractor sampling,
/// refinement).
pub const MAX_ENUM_POINTS: usize = 10_000_000;

const FIXED_POINT_ITERS: usize = 200;

/// Map family, tracked so product/refinement constructions know when exact
/// affine composition is available.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapKind {
    Similarity,
    Affine,
    General,
}

/// User-asserted separation condition of a system. Machine verification is
/// provided only for 1-D affine systems (`check_interval_separation`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Separation {
    None,
    Osc,
    Sosc,
    Ssc,
}

impl Separation {
    /// SSC implies SOSC implies OSC; rank orders by strength.
    fn rank(self) -> u8 {
        match self {
            Separation::None => 0,
            Separation::Osc => 1,
            Separation::Sosc => 2,
            Separation::Ssc => 3,
        }
    }

    pub fn implies_sosc(self) -> bool {
        self.rank() >= Separation::Sosc.rank()
    }

    fn weaker_of(a: Separation, b: Separation) -> Separation {
        if a.rank() <= b.rank() {
            a
        } else {
            b
        }
    }
}

impl fmt::Display for Separation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Separation::None => "none",
            Separation::Osc => "OSC",
            Separation::Sosc => "SOSC",
            Separation::Ssc => "SSC",
        };
        write!(f, "{}", s)
    }
}

#[derive(Clone)]
struct AffineBody {
    /// Row-major d×d matrix.
    matrix: Vec<f64>,
    offset: Vec<f64>,
}

impl AffineBody {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for r in 0..d {
            let mut acc = self.offset[r];
            let row = &self.matrix[r * d..(r + 1) * d];
            for (a, v) in row.iter().zip(x) {
                acc += a * v;
            }
            out[r] = acc;
        }
    }
}

type DynMap = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

#[derive(Clone)]
enum MapBody {
    Affine {
        fwd: AffineBody,
        inv: Option<AffineBody>,
    },
    General {
        fwd: DynMap,
        inv: Option<DynMap>,
    },
}

/// A contraction f with certified constants
/// `lower_lip · ‖x−y‖ ≤ ‖f(x)−f(y)‖ ≤ upper_lip · ‖x−y‖`.
#[derive(Clone)]
pub struct ContractionMap {
    body: MapBody,
    dim: usize,
    lower_lip: f64,
    upper_lip: f64,
    kind: MapKind,
}

impl fmt::Debug for ContractionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ContractionMap")
            .field("dim", &self.dim)
            .field("lower_lip", &self.lower_lip)
            .field("upper_lip", &self.upper_lip)
            .field("kind", &self.kind)
            .finish()
    }
}

fn validate_lips(lower: f64, upper: f64, kind: MapKind) -> Result<()> {
    if !(lower > 0.0) || !(lower <= upper) || !(upper < 1.0) {
        return Err(Error::InvalidInput(format!(
            "need 0 < lower_lip <= upper_lip < 1, got ({}, {})",
            lower, upper
        )));
    }
    if kind == MapKind::Similarity && lower != upper {
        return Err(Error::InvalidInput(
            "a similarity must have lower_lip = upper_lip".into(),
        ));
    }
    Ok(())
}

/// Inverse of a d×d row-major matrix by Gauss-Jordan with partial pivoting.
fn matrix_inverse(d: usize, m: &[f64]) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut inv = vec![0.0; d * d];
    for i in 0..d {
        inv[i * d + i] = 1.0;
    }
    for col in 0..d {
        let pivot =
            (col..d).max_by(|&r1, &r2| a[r1 * d + col].abs().total_cmp(&a[r2 * d + col].abs()))?;
        if a[pivot * d + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..d {
                a.swap(col * d + k, pivot * d + k);
                inv.swap(col * d + k, pivot * d + k);
            }
        }
        let p = a[col * d + col];
        for k in 0..d {
            a[col * d + k] /= p;
            inv[col * d + k] /= p;
        }
        for r in 0..d {
            if r != col {
                let factor = a[r * d + col];
                if factor != 0.0 {
                    for k in 0..d {
                        a[r * d + k] -= factor * a[col * d + k];
                        inv[r * d + k] -= factor * inv[col * d + k];
                    }
                }
            }
        }
    }
    Some(inv)
}

impl ContractionMap {
    /// 1-D affine map x ↦ scale·x + offset; a similarity of ratio |scale|.
    pub fn affine_1d(scale: f64, offset: f64) -> Result<Self> {
        let s = scale.abs();
        validate_lips(s, s, MapKind::Similarity)?;
        let fwd = AffineBody {
            matrix: vec![scale],
            offset: vec![offset],
        };
        let inv = AffineBody {
            matrix: vec![1.0 / scale],
            offset: vec![-offset / scale],
        };
        Ok(ContractionMap {
            body: MapBody::Affine {
                fwd,
                inv: Some(inv),
            },
            dim: 1,
            lower_lip: s,
            upper_lip: s,
            kind: MapKind::Similarity,
        })
    }

    /// Affine map x ↦ M·x + b with caller-certified Lipschitz constants.
    /// The exact inverse is stored whenever M is invertible.
    pub fn affine(
        matrix: Vec<f64>,
        offset: Vec<f64>,
        lower_lip: f64,
        upper_lip: f64,
        kind: MapKind,
    ) -> Result<Self> {
        let d = offset.len();
        if d == 0 || matrix.len() != d * d {
            return Err(Error::InvalidInput(format!(
                "matrix has {} entries, expected {}x{}",
                matrix.len(),
                d,
                d
            )));
        }
        if kind == MapKind::General {
            return Err(Error::InvalidInput(
                "affine constructor cannot build a general-kind map".into(),
            ));
        }
        validate_lips(lower_lip, upper_lip, kind)?;
        let inv = matrix_inverse(d, &matrix).map(|mi| {
            let mut ioff = vec![0.0; d];
            for r in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += mi[r * d + k] * offset[k];
                }
                ioff[r] = -acc;
            }
            AffineBody {
                matrix: mi,
                offset: ioff,
            }
        });
        Ok(ContractionMap {
            body: MapBody::Affine {
                fwd: AffineBody { matrix, offset },
                inv,
            },
            dim: d,
            lower_lip,
            upper_lip,
            kind,
        })
    }

    /// General map from user-supplied closures. The inverse, when given, is
    /// trusted here and round-trip-checked by `IFSystem::new` against the
    /// hull.
    pub fn general(
        dim: usize,
        fwd: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
        inv: Option<DynMap>,
        lower_lip: f64,
        upper_lip: f64,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        validate_lips(lower_lip, upper_lip, MapKind::General)?;
        Ok(ContractionMap {
            body: MapBody::General {
                fwd: Arc::new(fwd),
                inv,
            },
            dim,
            lower_lip,
            upper_lip,
            kind: MapKind::General,
        })
    }

    /// Strictly monotone 1-D map with a bisection inverse over `bracket`.
    /// The lower Lipschitz constant certifies injectivity.
    pub fn monotone_1d(
        f: impl Fn(f64) -> f64 + Send + Sync + Clone + 'static,
        lower_lip: f64,
        upper_lip: f64,
        bracket: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = bracket;
        if !(lo < hi) {
            return Err(Error::InvalidInput("bracket must satisfy lo < hi".into()));
        }
        let increasing = f(lo) < f(hi);
        let finv = f.clone();
        let inv = move |y: &[f64], out: &mut [f64]| {
            let target = y[0];
            let (mut a, mut b) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (a + b);
                let v = finv(mid);
                if (v < target) == increasing {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            out[0] = 0.5 * (a + b);
        };
        ContractionMap::general(
            1,
            move |x, out| out[0] = f(x[0]),
            Some(Arc::new(inv)),
            lower_lip,
            upper_lip,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower_lip(&self) -> f64 {
        self.lower_lip
    }

    pub fn upper_lip(&self) -> f64 {
        self.upper_lip
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn has_inverse(&self) -> bool {
        match &self.body {
            MapBody::Affine { inv, .. } => inv.is_some(),
            MapBody::General { inv, .. } => inv.is_some(),
        }
    }

    /// For 1-D affine maps: (scale, offset).
    pub fn as_affine_1d(&self) -> Option<(f64, f64)> {
        match &self.body {
            MapBody::Affine { fwd, .. } if self.dim == 1 => Some((fwd.matrix[0], fwd.offset[0])),
            _ => None,
        }
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        match &self.body {
            MapBody::Affine { fwd, .. } => fwd.apply_into(x, out),
            MapBody::General { fwd, .. } => fwd(x, out),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.apply_into(x, &mut out);
        out
    }

    pub fn apply_inverse(&self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        match &self.body {
            MapBody::Affine { inv: Some(inv), .. } => {
                inv.apply_into(y, &mut out);
                Ok(out)
            }
            MapBody::General { inv: Some(inv), .. } => {
                inv(y, &mut out);
                Ok(out)
            }
            _ => Err(Error::Unsupported("map has no inverse".into())),
        }
    }

    /// self ∘ other (apply `other` first). Affine pairs compose exactly;
    /// anything else chains closures. Lipschitz constants multiply.
    pub fn compose(&self, other: &ContractionMap) -> Result<ContractionMap> {
        if self.dim != other.dim {
            return Err(Error::InvalidInput(format!(
                "cannot compose maps of dimensions {} and {}",
                self.dim, other.dim
            )));
        }
        let lower = self.lower_lip * other.lower_lip;
        let upper = self.upper_lip * other.upper_lip;
        let kind = match (self.kind, other.kind) {
            (MapKind::Similarity, MapKind::Similarity) => MapKind::Similarity,
            (MapKind::General, _) | (_, MapKind::General) => MapKind::General,
            _ => MapKind::Affine,
        };
        if let (MapBody::Affine { fwd: a, inv: ai }, MapBody::Affine { fwd: b, inv: bi }) =
            (&self.body, &other.body)
        {
            let d = self.dim;
            // self(other(x)) = A·(B·x + b_off) + a_off
            let mut matrix = vec![0.0; d * d];
            for r in 0..d {
                for c in 0..d {
                    let mut acc = 0.0;
                    for k in 0..d {
                        acc += a.matrix[r * d + k] * b.matrix[k * d + c];
                    }
                    matrix[r * d + c] = acc;
                }
            }
            let mut offset = a.offset.clone();
            for r in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    acc += a.matrix[r * d + k] * b.offset[k];
                }
                offset[r] += acc;
            }
            // (self ∘ other)^{-1} = other^{-1} ∘ self^{-1}
            let inv = match (ai, bi) {
                (Some(ai), Some(bi)) => {
                    let mut im = vec![0.0; d * d];
                    for r in 0..d {
                        for c in 0..d {
                            let mut acc = 0.0;
                            for k in 0..d {
                                acc += bi.matrix[r * d + k] * ai.matrix[k * d + c];
                            }
                            im[r * d + c] = acc;
                        }
                    }
                    let mut io = bi.offset.clone();
                    for r in 0..d {
                        let mut acc = 0.0;
                        for k in 0..d {
                            acc += bi.matrix[r * d + k] * ai.offset[k];
                        }
                        io[r] += acc;
                    }
                    Some(AffineBody {
                        matrix: im,
                        offset: io,
                    })
                }
                _ => None,
            };
            return Ok(ContractionMap {
                body: MapBody::Affine {
                    fwd: AffineBody { matrix, offset },
                    inv,
                },
                dim: d,
                lower_lip: lower,
                upper_lip: upper,
                kind,
            });
        }
        let outer = self.clone();
        let inner = other.clone();
        let d = self.dim;
        let fwd = move |x: &[f64], out: &mut [f64]| {
            let mut tmp = vec![0.0; d];
            inner.apply_into(x, &mut tmp);
            outer.apply_into(&tmp, out);
        };
        let inv: Option<DynMap> = if self.has_inverse() && other.has_inverse() {
            let outer = self.clone();
            let inner = other.clone();
            Some(Arc::new(move |y: &[f64], out: &mut [f64]| {
                let tmp = outer.apply_inverse(y).expect("checked inverse");
                let res = inner.apply_inverse(&tmp).expect("checked inverse");
                out.copy_from_slice(&res);
            }))
        } else {
            None
        };
        Ok(ContractionMap {
            body: MapBody::General {
                fwd: Arc::new(fwd),
                inv,
            },
            dim: d,
            lower_lip: lower,
            upper_lip: upper,
            kind: MapKind::General,
        })
    }

    /// Fixed point by iteration from `start`; converges geometrically at
    /// rate `upper_lip`.
    pub fn fixed_point(&self, start: &[f64]) -> Vec<f64> {
        let mut cur = start.to_vec();
        let mut next = vec![0.0; self.dim];
        for _ in 0..FIXED_POINT_ITERS {
            self.apply_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    /// Block-diagonal pairing (self(x), other(y)) with constants taken per
    /// the given metric: min of lower lips, max of upper lips.
    fn pair(&self, other: &ContractionMap) -> Result<ContractionMap> {
        let lower = self.lower_lip.min(other.lower_lip);
        let upper = self.upper_lip.max(other.upper_lip);
        let d1 = self.dim;
        let d2 = other.dim;
        let d = d1 + d2;
        // A similarity needs equal ratios on both blocks.
        let kind = match (self.kind, other.kind) {
            (MapKind::Similarity, MapKind::Similarity) if self.upper_lip == other.upper_lip => {
                MapKind::Similarity
            }
            (MapKind::General, _) | (_, MapKind::General) => MapKind::General,
            _ => MapKind::Affine,
        };
        if let (MapBody::Affine { fwd: a, inv: ai }, MapBody::Affine { fwd: b, inv: bi }) =
            (&self.body, &other.body)
        {
            let block = |m1: &AffineBody, m2: &AffineBody| {
                let mut matrix = vec![0.0; d * d];
                for r in 0..d1 {
                    for c in 0..d1 {
                        matrix[r * d + c] = m1.matrix[r * d1 + c];
                    }
                }
                for r in 0..d2 {
                    for c in 0..d2 {
                        matrix[(d1 + r) * d + (d1 + c)] = m2.matrix[r * d2 + c];
                    }
                }
                let mut offset = m1.offset.clone();
                offset.extend_from_slice(&m2.offset);
                AffineBody { matrix, offset }
            };
            let inv = match (ai, bi) {
                (Some(ai), Some(bi)) => Some(block(ai, bi)),
                _ => None,
            };
            return Ok(ContractionMap {
                body: MapBody::Affine {
                    fwd: block(a, b),
                    inv,
                },
                dim: d,
                lower_lip: lower,
                upper_lip: upper,
                kind: if kind == MapKind::General {
                    MapKind::Affine
                } else {
                    kind
                },
            });
        }
        let first = self.clone();
        let second = other.clone();
        let fwd = move |x: &[f64], out: &mut [f64]| {
            first.apply_into(&x[..d1], &mut out[..d1]);
            second.apply_into(&x[d1..], &mut out[d1..]);
        };
        let inv: Option<DynMap> = if self.has_inverse() && other.has_inverse() {
            let first = self.clone();
            let second = other.clone();
            Some(Arc::new(move |y: &[f64], out: &mut [f64]| {
                let l = first.apply_inverse(&y[..d1]).expect("checked inverse");
                let r = second.apply_inverse(&y[d1..]).expect("checked inverse");
                out[..d1].copy_from_slice(&l);
                out[d1..].copy_from_slice(&r);
            }))
        } else {
            None
        };
        Ok(ContractionMap {
            body: MapBody::General {
                fwd: Arc::new(fwd),
                inv,
            },
            dim: d,
            lower_lip: lower,
            upper_lip: upper,
            kind: MapKind::General,
        })
    }
}

/// A flat-storage list of d-vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    coords: Vec<f64>,
    dim: usize,
}

impl PointCloud {
    pub fn new(dim: usize) -> Self {
        PointCloud {
            coords: Vec::new(),
            dim,
        }
    }

    pub fn from_flat(coords: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || coords.len() % dim != 0 {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not form {}-vectors",
                coords.len(),
                dim
            )));
        }
        Ok(PointCloud { coords, dim })
    }

    pub fn from_points(points: &[Vec<f64>], dim: usize) -> Result<Self> {
        let mut cloud = PointCloud::new(dim);
        for p in points {
            if p.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "point of dimension {} in a {}-dimensional cloud",
                    p.len(),
                    dim
                )));
            }
            cloud.coords.extend_from_slice(p);
        }
        Ok(cloud)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn push(&mut self, p: &[f64]) {
        debug_assert_eq!(p.len(), self.dim);
        self.coords.extend_from_slice(p);
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn bounding_box(&self) -> Result<BoxRegion> {
        if self.is_empty() {
            return Err(Error::InvalidInput(
                "empty cloud has no bounding box".into(),
            ));
        }
        let mut lower = self.point(0).to_vec();
        let mut upper = lower.clone();
        for p in self.iter() {
            for k in 0..self.dim {
                lower[k] = lower[k].min(p[k]);
                upper[k] = upper[k].max(p[k]);
            }
        }
        BoxRegion::new(lower, upper)
    }
}

/// An iterated function system: N ≥ 2 contractions on a common space, an
/// optional probability vector (making it a WIFS), a user-declared
/// separation condition, and an optional invariant hull.
#[derive(Clone, Debug)]
pub struct IFSystem {
    maps: Vec<ContractionMap>,
    dim: usize,
    probs: Option<Vec<f64>>,
    separation: Separation,
    hull: Option<BoxRegion>,
    metric: Metric,
}

impl IFSystem {
    pub fn new(maps: Vec<ContractionMap>) -> Result<Self> {
        if maps.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "an IFS needs at least 2 maps, got {}",
                maps.len()
            )));
        }
        let dim = maps[0].dim();
        if maps.iter().any(|m| m.dim() != dim) {
            return Err(Error::InvalidInput(
                "all maps must share one dimension".into(),
            ));
        }
        Ok(IFSystem {
            maps,
            dim,
            probs: None,
            separation: Separation::None,
            hull: None,
            metric: Metric::Euclidean,
        })
    }

    pub fn with_probs(mut self, probs: Vec<f64>) -> Result<Self> {
        crate::code_space::validate_probs(&probs)?;
        if probs.len() != self.maps.len() {
            return Err(Error::InvalidInput(format!(
                "{} probabilities for {} maps",
                probs.len(),
                self.maps.len()
            )));
        }
        self.probs = Some(probs);
        Ok(self)
    }

    /// Attach an invariant hull. Checks forward_i(hull) ⊆ hull within 1e-9
    /// on the corners, and round-trips every stored inverse through the
    /// corners and center.
    pub fn with_hull(mut self, hull: BoxRegion) -> Result<Self> {
        if hull.dim() != self.dim {
            return Err(Error::InvalidInput(format!(
                "hull dimension {} does not match system dimension {}",
                hull.dim(),
                self.dim
            )));
        }
        let mut samples = hull.corners();
        samples.push(hull.center());
        for (i, map) in self.maps.iter().enumerate() {
            for corner in &samples {
                let img = map.apply(corner);
                for k in 0..self.dim {
                    if img[k] < hull.lower()[k] - 1e-9 || img[k] > hull.upper()[k] + 1e-9 {
                        return Err(Error::InvalidInput(format!(
                            "map {} sends a hull corner outside the hull on axis {}",
                            i + 1,
                            k
                        )));
                    }
                }
                if map.has_inverse() {
                    let back = map.apply_inverse(&img)?;
                    if euclidean(&back, corner) > 1e-9 {
                        return Err(Error::InvalidInput(format!(
                            "map {}: inverse(forward(x)) misses x by more than 1e-9",
                            i + 1
                        )));
                    }
                }
            }
        }
        self.hull = Some(hull);
        Ok(self)
    }

    pub fn with_separation(mut self, separation: Separation) -> Self {
        self.separation = separation;
        self
    }

    pub(crate) fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn map_count(&self) -> usize {
        self.maps.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn map(&self, i: usize) -> &ContractionMap {
        &self.maps[i]
    }

    pub fn maps(&self) -> &[ContractionMap] {
        &self.maps
    }

    pub fn probs(&self) -> Option<&[f64]> {
        self.probs.as_deref()
    }

    pub fn separation(&self) -> Separation {
        self.separation
    }

    pub fn hull(&self) -> Option<&BoxRegion> {
        self.hull.as_ref()
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn lower_lips(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.lower_lip()).collect()
    }

    pub fn upper_lips(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.upper_lip()).collect()
    }

    pub fn max_upper_lip(&self) -> f64 {
        self.maps.iter().map(|m| m.upper_lip()).fold(0.0, f64::max)
    }

    /// Hull diameter in the system metric, when a hull is present.
    pub fn hull_diameter(&self) -> Option<f64> {
        self.hull.as_ref().map(|h| h.diameter(self.metric))
    }

    /// Deterministic on-attractor anchor: the fixed point of map 1,
    /// iterated from the hull center (or the origin).
    pub fn default_seed_point(&self) -> Vec<f64> {
        let start = self
            .hull
            .as_ref()
            .map(|h| h.center())
            .unwrap_or_else(|| vec![0.0; self.dim]);
        self.maps[0].fixed_point(&start)
    }

    fn check_word(&self, w: &Word) -> Result<()> {
        if w.alphabet_size() as usize != self.maps.len() {
            return Err(Error::InvalidInput(format!(
                "word alphabet size {} does not match map count {}",
                w.alphabet_size(),
                self.maps.len()
            )));
        }
        Ok(())
    }
}

/// f_{w1} ∘ f_{w2} ∘ … ∘ f_{wk}(x): the first symbol is the outermost map.
pub fn apply_word(ifs: &IFSystem, w: &Word, x: &[f64]) -> Result<Vec<f64>> {
    ifs.check_word(w)?;
    if x.len() != ifs.dim() {
        return Err(Error::InvalidInput(format!(
            "point dimension {} does not match system dimension {}",
            x.len(),
            ifs.dim()
        )));
    }
    let mut cur = x.to_vec();
    let mut next = vec![0.0; ifs.dim()];
    for &s in w.symbols().iter().rev() {
        ifs.map((s - 1) as usize).apply_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(cur)
}

/// Address evaluation at the code's truncation depth, plus the certified
/// bound on the distance to the true address.
#[derive(Clone, Debug, PartialEq)]
pub struct AddressedPoint {
    pub point: Vec<f64>,
    /// (max upper_lip)^depth · diam(hull); `None` when the hull is unknown.
    pub error_bound: Option<f64>,
    pub depth: usize,
}

pub fn address_point(ifs: &IFSystem, code: &CodePrefix, x0: &[f64]) -> Result<AddressedPoint> {
    if let Some(h) = ifs.hull() {
        if !h.contains(x0) {
            return Err(Error::InvalidInput(
                "starting point must lie inside the hull".into(),
            ));
        }
    }
    let depth = code.truncation_depth();
    let point = apply_word(ifs, code.word(), x0)?;
    let error_bound = ifs
        .hull_diameter()
        .map(|diam| ifs.max_upper_lip().powi(depth as i32) * diam);
    Ok(AddressedPoint {
        point,
        error_bound,
        depth,
    })
}

/// All depth-k images of the seed point, ordered lexicographically by word.
/// Every output point lies within (max upper_lip)^k · diam(hull) of the
/// attractor when the seed is inside the hull.
pub fn attractor_sample(ifs: &IFSystem, depth: usize, seed_point: &[f64]) -> Result<PointCloud> {
    if depth < 1 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    if seed_point.len() != ifs.dim() {
        return Err(Error::InvalidInput(format!(
            "seed dimension {} does not match system dimension {}",
            seed_point.len(),
            ifs.dim()
        )));
    }
    let n = ifs.map_count();
    let total = (n as f64).powi(depth as i32);
    if total > MAX_ENUM_POINTS as f64 {
        return Err(Error::BudgetExceeded(format!(
            "{}^{} points exceed the {} cap",
            n, depth, MAX_ENUM_POINTS
        )));
    }
    let d = ifs.dim();
    let mut level = seed_point.to_vec();
    for _ in 0..depth {
        let count = level.len() / d;
        // Words of length t+1 in lex order are (first symbol)-major blocks
        // over the length-t enumeration, so block i is map i applied to the
        // whole previous level.
        let next = exec::map_range(n * count, |idx| {
            let (i, j) = (idx / count, idx % count);
            let mut out = vec![0.0; d];
            ifs.map(i).apply_into(&level[j * d..(j + 1) * d], &mut out);
            out
        });
        level.clear();
        for p in next {
            level.extend_from_slice(&p);
        }
    }
    PointCloud::from_flat(level, d)
}

/// Symmetric Hausdorff distance between finite clouds (Euclidean).
pub fn hausdorff_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("clouds must be non-empty".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let directed = |from: &PointCloud, to: &PointCloud| {
        exec::max_over(from.len(), |i| {
            let p = from.point(i);
            let mut best = f64::INFINITY;
            for q in to.iter() {
                best = best.min(euclidean_sq(p, q));
            }
            best.sqrt()
        })
    };
    Ok(directed(a, b).max(directed(b, a)))
}

/// The diagonal product H = { (f_i(x), g_i(y)) } under the max metric.
/// Lipschitz constants are min/max per index; separation and probabilities
/// are inherited from F.
pub fn diagonal_product(f: &IFSystem, g: &IFSystem) -> Result<IFSystem> {
    if f.map_count() != g.map_count() {
        return Err(Error::InvalidInput(format!(
            "map counts differ: {} vs {}",
            f.map_count(),
            g.map_count()
        )));
    }
    let maps: Vec<ContractionMap> = f
        .maps()
        .iter()
        .zip(g.maps())
        .map(|(fm, gm)| fm.pair(gm))
        .collect::<Result<_>>()?;
    let mut out = IFSystem::new(maps)?
        .with_separation(f.separation())
        .with_metric(Metric::Max);
    if let (Some(hf), Some(hg)) = (f.hull(), g.hull()) {
        out = out.with_hull(hf.product(hg))?;
    }
    if let Some(p) = f.probs() {
        out = out.with_probs(p.to_vec())?;
    }
    Ok(out)
}

/// The full product WIFS { Ψ_ij = (f_i(x), g_j(y)) } ordered
/// lexicographically by (i, j), with probabilities p_i·q_j, under the
/// Euclidean product norm.
pub fn full_product(f: &IFSystem, g: &IFSystem) -> Result<IFSystem> {
    let (p, q) = match (f.probs(), g.probs()) {
        (Some(p), Some(q)) => (p, q),
        _ => {
            return Err(Error::InvalidInput(
                "full product requires probability vectors on both factors".into(),
            ))
        }
    };
    let mut maps = Vec::with_capacity(f.map_count() * g.map_count());
    let mut probs = Vec::with_capacity(maps.capacity());
    for (i, fm) in f.maps().iter().enumerate() {
        for (j, gm) in g.maps().iter().enumerate() {
            maps.push(fm.pair(gm)?);
            probs.push(p[i] * q[j]);
        }
    }
    let mut out = IFSystem::new(maps)?
        .with_probs(probs)?
        .with_separation(Separation::weaker_of(f.separation(), g.separation()));
    if let (Some(hf), Some(hg)) = (f.hull(), g.hull()) {
        out = out.with_hull(hf.product(hg))?;
    }
    Ok(out)
}

/// The refinement with maps f_i ∘ f_σ over all length-m words i in
/// lexicographic order and probabilities p_i. With `sigma_is_sosc_witness`
/// (a user assertion that f_σ(A) lies inside the OSC open set) the result
/// is declared SSC; otherwise no separation is claimed.
pub fn refine_ifs(
    ifs: &IFSystem,
    sigma: &Word,
    m: usize,
    sigma_is_sosc_witness: bool,
) -> Result<IFSystem> {
    let probs = ifs
        .probs()
        .ok_or_else(|| Error::InvalidInput("refinement requires probabilities".into()))?
        .to_vec();
    ifs.check_word(sigma)?;
    if m < 1 {
        return Err(Error::InvalidInput(
            "refinement depth must be at least 1".into(),
        ));
    }
    let n = ifs.map_count();
    let total = (n as f64).powi(m as i32);
    if total > MAX_ENUM_POINTS as f64 {
        return Err(Error::BudgetExceeded(format!(
            "{}^{} refined maps exceed the {} cap",
            n, m, MAX_ENUM_POINTS
        )));
    }
    // f_sigma as a single composed map (identity handled by sigma = ∅
    // upstream: an empty sigma leaves f_i ∘ f_∅ = f_i).
    let f_sigma: Option<ContractionMap> = {
        let mut acc: Option<ContractionMap> = None;
        for &s in sigma.symbols() {
            let next = ifs.map((s - 1) as usize);
            acc = Some(match acc {
                None => next.clone(),
                Some(a) => a.compose(next)?,
            });
        }
        acc
    };
    let count = total as usize;
    let mut maps = Vec::with_capacity(count);
    let mut new_probs = Vec::with_capacity(count);
    let mut word = vec![0usize; m];
    for idx in 0..count {
        // Decode idx into the length-m word in lexicographic order.
        let mut rem = idx;
        for k in (0..m).rev() {
            word[k] = rem % n;
            rem /= n;
        }
        let mut composed = ifs.map(word[m - 1]).clone();
        for k in (0..m - 1).rev() {
            composed = ifs.map(word[k]).compose(&composed)?;
        }
        if let Some(fs) = &f_sigma {
            composed = composed.compose(fs)?;
        }
        let p: f64 = word.iter().map(|&k| probs[k]).product();
        maps.push(composed);
        new_probs.push(p);
    }
    let mut out = IFSystem::new(maps)?.with_probs(new_probs)?;
    if sigma_is_sosc_witness {
        out = out.with_separation(Separation::Ssc);
    }
    if let Some(h) = ifs.hull() {
        out = out.with_hull(h.clone())?;
    }
    Ok(out)
}

/// Verdict of the 1-D affine separation check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntervalSeparation {
    Ssc,
    OscTouching,
    Overlapping,
}

/// Classifies a 1-D affine system by its hull image intervals: disjoint
/// closures (SSC), touching endpoints (OSC), or overlapping interiors.
pub fn check_interval_separation(ifs: &IFSystem) -> Result<IntervalSeparation> {
    if ifs.dim() != 1 {
        return Err(Error::Unsupported(
            "separation check handles 1-D systems only".into(),
        ));
    }
    let hull = ifs
        .hull()
        .ok_or_else(|| Error::Unsupported("separation check requires a hull".into()))?;
    let (a, b) = (hull.lower()[0], hull.upper()[0]);
    let mut intervals = Vec::with_capacity(ifs.map_count());
    for map in ifs.maps() {
        let (scale, offset) = map
            .as_affine_1d()
            .ok_or_else(|| Error::Unsupported("separation check requires affine maps".into()))?;
        let (u, v) = (scale * a + offset, scale * b + offset);
        intervals.push((u.min(v), u.max(v)));
    }
    intervals.sort_by(|x, y| x.partial_cmp(y).expect("finite interval bounds"));
    let tol = 1e-12 * (b - a).max(1.0);
    let mut touching = false;
    for pair in intervals.windows(2) {
        let gap = pair[1].0 - pair[0].1;
        if gap < -tol {
            return Ok(IntervalSeparation::Overlapping);
        }
        if gap <= tol {
            touching = true;
        }
    }
    Ok(if touching {
        IntervalSeparation::OscTouching
    } else {
        IntervalSeparation::Ssc
    })
}

/// Ready-made benchmark systems. All live on the hull [0, 1] and come
/// without probabilities; attach a vector with `with_probs`.
pub mod builtins {
    use super::*;

    /// {x/2, x/2 + 1/2}: the full interval, touching branches.
    pub fn binary() -> IFSystem {
        let maps = vec![
            ContractionMap::affine_1d(0.5, 0.0).unwrap(),
            ContractionMap::affine_1d(0.5, 0.5).unwrap(),
        ];
        IFSystem::new(maps)
            .unwrap()
            .with_hull(BoxRegion::interval(0.0, 1.0).unwrap())
            .unwrap()
            .with_separation(Separation::Sosc)
    }

    /// {x/3, x/3 + 2/3}: the middle-third set, strictly separated.
    pub fn cantor3() -> IFSystem {
        let maps = vec![
            ContractionMap::affine_1d(1.0 / 3.0, 0.0).unwrap(),
            ContractionMap::affine_1d(1.0 / 3.0, 2.0 / 3.0).unwrap(),
        ];
        IFSystem::new(maps)
            .unwrap()
            .with_hull(BoxRegion::interval(0.0, 1.0).unwrap())
            .unwrap()
            .with_separation(Separation::Ssc)
    }

    /// {y/3, 2y/3 + 1/3}: unequal touching branches filling [0, 1].
    pub fn thirds() -> IFSystem {
        let maps = vec![
            ContractionMap::affine_1d(1.0 / 3.0, 0.0).unwrap(),
            ContractionMap::affine_1d(2.0 / 3.0, 1.0 / 3.0).unwrap(),
        ];
        IFSystem::new(maps)
            .unwrap()
            .with_hull(BoxRegion::interval(0.0, 1.0).unwrap())
            .unwrap()
            .with_separation(Separation::Sosc)
    }

    /// Genuinely bi-Lipschitz pair f(x) = 0.33x + 0.01·sin(3x) + t,
    /// t ∈ {0, 0.64}. On [0, 1] the derivative stays in
    /// [0.33 − 0.03, 0.33 + 0.03] ⊂ [0.30, 0.36], so s = 0.30 and c = 0.36
    /// are certified; images [0, 0.332] and [0.64, 0.972] are disjoint.
    pub fn bilip() -> IFSystem {
        let branch = |shift: f64| {
            ContractionMap::monotone_1d(
                move |x| 0.33 * x + 0.01 * (3.0 * x).sin() + shift,
                0.30,
                0.36,
                (-1.0, 2.0),
            )
            .unwrap()
        };
        IFSystem::new(vec![branch(0.0), branch(0.64)])
            .unwrap()
            .with_hull(BoxRegion::interval(0.0, 1.0).unwrap())
            .unwrap()
            .with_separation(Separation::Ssc)
    }

    /// {x/3, x/2, x/2 + 1/2}: an overlapping three-map system.
    pub fn overlapping3() -> IFSystem {
        let maps = vec![
            ContractionMap::affine_1d(1.0 / 3.0, 0.0).unwrap(),
            ContractionMap::affine_1d(0.5, 0.0).unwrap(),
            ContractionMap::affine_1d(0.5, 0.5).unwrap(),
        ];
        IFSystem::new(maps)
            .unwrap()
            .with_hull(BoxRegion::interval(0.0, 1.0).unwrap())
            .unwrap()
    }
}
