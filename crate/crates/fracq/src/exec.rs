//! Execution helpers. With the `parallel` feature the hot loops run on
//! rayon; without it they run sequentially. Reductions always combine
//! fixed-size chunks in index order, so results are bit-identical whatever
//! the thread count.

/// Fixed chunk length for ordered reductions. Must not depend on the
/// number of threads.
pub(crate) const CHUNK: usize = 16_384;

#[cfg(feature = "parallel")]
pub(crate) fn map_range<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..len).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_range<U, F>(len: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..len).map(f).collect()
}

/// Partial results over consecutive index chunks, in chunk order.
#[cfg(feature = "parallel")]
pub(crate) fn chunk_partials<U, F>(len: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(std::ops::Range<usize>) -> U + Sync + Send,
{
    use rayon::prelude::*;
    let chunks = len.div_ceil(CHUNK).max(1);
    (0..chunks)
        .into_par_iter()
        .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(len)))
        .collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn chunk_partials<U, F>(len: usize, f: F) -> Vec<U>
where
    F: Fn(std::ops::Range<usize>) -> U,
{
    let chunks = len.div_ceil(CHUNK).max(1);
    (0..chunks)
        .map(|c| f(c * CHUNK..((c + 1) * CHUNK).min(len)))
        .collect()
}

/// Sum of `f(i)` over `0..len`, accumulated per chunk and then folded in
/// chunk order.
pub(crate) fn sum_over<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    chunk_partials(len, |range| {
        let mut acc = 0.0;
        for i in range {
            acc += f(i);
        }
        acc
    })
    .into_iter()
    .sum()
}

/// Max of `f(i)` over `0..len`. Floating max is order-insensitive, but we
/// keep the chunked shape for symmetry.
pub(crate) fn max_over<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    chunk_partials(len, |range| {
        let mut acc = f64::NEG_INFINITY;
        for i in range {
            acc = acc.max(f(i));
        }
        acc
    })
    .into_iter()
    .fold(f64::NEG_INFINITY, f64::max)
}

/// True when the crate was built with the rayon lane.
pub fn parallelism_enabled() -> bool {
    cfg!(feature = "parallel")
}

/// Compensated (Kahan) sum; keeps long uniform-weight sums within an ulp.
pub(crate) fn kahan_sum(xs: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut carry = 0.0;
    for x in xs {
        let y = x - carry;
        let t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    sum
}
