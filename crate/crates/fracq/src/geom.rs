//! Shared geometric primitives: metrics and axis-aligned boxes.

use crate::error::{Error, Result};

/// Metric on R^d. `Euclidean` is the default everywhere; `Max` is used by
/// diagonal product systems, whose Lipschitz bookkeeping is done in the
/// max metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Max,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::Euclidean => euclidean(a, b),
            Metric::Max => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max),
        }
    }
}

#[inline]
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    euclidean_sq(a, b).sqrt()
}

#[inline]
pub fn euclidean_sq(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s
}

/// Closed axis-aligned box [lower_1, upper_1] × … × [lower_d, upper_d].
/// Boundary points count as inside.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxRegion {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidInput(
                "box bounds must be non-empty and of equal dimension".into(),
            ));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !l.is_finite() || !u.is_finite() || l > u {
                return Err(Error::InvalidInput(format!(
                    "box axis {}: need finite lower <= upper, got [{}, {}]",
                    i, l, u
                )));
            }
        }
        Ok(BoxRegion { lower, upper })
    }

    /// 1-D interval shorthand.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        BoxRegion::new(vec![lo], vec![hi])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        debug_assert_eq!(x.len(), self.dim());
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    pub fn diameter(&self, metric: Metric) -> f64 {
        metric.distance(&self.lower, &self.upper)
    }

    /// All 2^d corners, in binary-counter order over the axes.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut out = Vec::with_capacity(1 << d);
        for mask in 0..(1usize << d) {
            let corner: Vec<f64> = (0..d)
                .map(|k| {
                    if mask >> k & 1 == 0 {
                        self.lower[k]
                    } else {
                        self.upper[k]
                    }
                })
                .collect();
            out.push(corner);
        }
        out
    }

    /// Cartesian product: bounds of `self` followed by bounds of `other`.
    pub fn product(&self, other: &BoxRegion) -> BoxRegion {
        let mut lower = self.lower.clone();
        lower.extend_from_slice(&other.lower);
        let mut upper = self.upper.clone();
        upper.extend_from_slice(&other.upper);
        BoxRegion { lower, upper }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_box_contains_boundary() {
        let b = BoxRegion::interval(0.0, 1.0).unwrap();
        assert!(b.contains(&[0.0]));
        assert!(b.contains(&[1.0]));
        assert!(!b.contains(&[1.0 + 1e-12]));
    }

    #[test]
    fn max_metric_diameter() {
        let b = BoxRegion::new(vec![0.0, 0.0], vec![3.0, 4.0]).unwrap();
        assert_eq!(b.diameter(Metric::Max), 4.0);
        assert_eq!(b.diameter(Metric::Euclidean), 5.0);
    }

    #[test]
    fn degenerate_bounds_rejected() {
        assert!(BoxRegion::interval(1.0, 0.0).is_err());
        assert!(BoxRegion::new(vec![], vec![]).is_err());
    }

    #[test]
    fn corners_enumerate_all() {
        let b = BoxRegion::new(vec![0.0, 2.0], vec![1.0, 3.0]).unwrap();
        let cs = b.corners();
        assert_eq!(cs.len(), 4);
        assert!(cs.contains(&vec![0.0, 2.0]));
        assert!(cs.contains(&vec![1.0, 3.0]));
    }
}
