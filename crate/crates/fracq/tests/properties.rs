//! Randomized invariants: code ordering, antichain mass, contraction
//! bookkeeping, Lloyd descent, and quantization-error monotonicity and
//! covariance.

use proptest::prelude::*;

use fracq::code_space::{
    compare_codes, gamma_antichain, is_maximal_antichain, word_probability, CodeOrdering,
    CodePrefix, TailConvention, Word,
};
use fracq::dimension::box_dimension_estimate;
use fracq::ifs::{apply_word, attractor_sample, builtins, refine_ifs, PointCloud};
use fracq::measure::EmpiricalMeasure;
use fracq::quant::{exact_quantize_1d, exact_quantize_1d_grid, lloyd_quantize};

fn tail_strategy() -> impl Strategy<Value = TailConvention> {
    prop_oneof![
        Just(TailConvention::RepeatLast),
        Just(TailConvention::RepeatMin),
        Just(TailConvention::RepeatMax),
    ]
}

/// A word of length 1..=8 over a shared alphabet of size 2..=4, plus a tail.
fn code_strategy(alphabet: u32) -> impl Strategy<Value = CodePrefix> {
    (
        proptest::collection::vec(1..=alphabet, 1..=8),
        tail_strategy(),
    )
        .prop_map(move |(symbols, tail)| {
            CodePrefix::new(Word::new(symbols, alphabet).unwrap(), tail)
        })
}

fn probs_strategy() -> impl Strategy<Value = Vec<f64>> {
    (2usize..=4)
        .prop_flat_map(|n| proptest::collection::vec(1u32..=100, n))
        .prop_map(|raw| {
            let total: f64 = raw.iter().map(|&x| x as f64).sum();
            let mut probs: Vec<f64> = raw.iter().map(|&x| x as f64 / total).collect();
            let sum: f64 = probs.iter().sum();
            if let Some(last) = probs.last_mut() {
                *last += 1.0 - sum;
            }
            probs
        })
        .prop_filter("entries bounded below", |p| p.iter().all(|&x| x >= 0.02))
}

/// Random atomic measure on [0, 1] with 3..=40 atoms.
fn measure_strategy() -> impl Strategy<Value = EmpiricalMeasure> {
    proptest::collection::vec((0.0f64..1.0, 0.01f64..1.0), 3..=40).prop_map(|atoms| {
        let coords: Vec<f64> = atoms.iter().map(|&(x, _)| x).collect();
        let total: f64 = atoms.iter().map(|&(_, w)| w).sum();
        let mut weights: Vec<f64> = atoms.iter().map(|&(_, w)| w / total).collect();
        let sum: f64 = weights.iter().sum();
        if let Some(last) = weights.last_mut() {
            *last += 1.0 - sum;
        }
        EmpiricalMeasure::new(PointCloud::from_flat(coords, 1).unwrap(), weights).unwrap()
    })
}

proptest! {
    /// Swapping arguments flips the ordering, comparison with itself is
    /// equality, and the verdict is stable once the prefixes are expanded
    /// past the certified depth.
    #[test]
    fn code_order_is_consistent(
        (a, b, extra) in (2u32..=4).prop_flat_map(|n| (code_strategy(n), code_strategy(n), 0usize..5))
    ) {
        let ab = compare_codes(&a, &b).unwrap();
        let ba = compare_codes(&b, &a).unwrap();
        let flipped = match ab.ordering {
            CodeOrdering::Less => CodeOrdering::Greater,
            CodeOrdering::EqualToDepth => CodeOrdering::EqualToDepth,
            CodeOrdering::Greater => CodeOrdering::Less,
        };
        prop_assert_eq!(ba.ordering, flipped);

        let aa = compare_codes(&a, &a).unwrap();
        prop_assert_eq!(aa.ordering, CodeOrdering::EqualToDepth);

        let depth = ab.certified_depth + extra;
        let ax = a.expand_prefix(depth).unwrap();
        let bx = b.expand_prefix(depth).unwrap();
        prop_assert_eq!(compare_codes(&ax, &bx).unwrap().ordering, ab.ordering);
    }

    /// Mass-threshold antichains are maximal, carry unit mass, and respect
    /// the 1/(eps * min p) size bound.
    #[test]
    fn gamma_antichain_mass_and_size(probs in probs_strategy(), frac in 0.05f64..=1.0) {
        let min_p = probs.iter().cloned().fold(f64::INFINITY, f64::min);
        let eps = min_p * frac;
        let gamma = gamma_antichain(&probs, eps).unwrap();
        prop_assert!(is_maximal_antichain(&gamma));
        let mut mass = 0.0;
        let mut carry = 0.0;
        for w in gamma.words() {
            let x = word_probability(w, &probs).unwrap() - carry;
            let t = mass + x;
            carry = (t - mass) - x;
            mass = t;
        }
        prop_assert!((mass - 1.0).abs() <= 1e-12, "mass {}", mass);
        let cap = 1.0 / (eps * min_p) * (1.0 + 1e-9);
        prop_assert!(gamma.len() as f64 <= cap, "{} words, cap {}", gamma.len(), cap);
    }

    /// Composite maps contract by exactly the product of the per-symbol
    /// Lipschitz bounds.
    #[test]
    fn word_application_respects_contraction_bounds(
        symbols in proptest::collection::vec(1u32..=2, 0..=10),
        x in 0.0f64..=1.0,
        y in 0.0f64..=1.0,
    ) {
        let f = builtins::thirds();
        let w = Word::new(symbols, 2).unwrap();
        let fx = apply_word(&f, &w, &[x]).unwrap()[0];
        let fy = apply_word(&f, &w, &[y]).unwrap()[0];
        let mut lower = 1.0;
        let mut upper = 1.0;
        for &s in w.symbols() {
            lower *= f.map((s - 1) as usize).lower_lip();
            upper *= f.map((s - 1) as usize).upper_lip();
        }
        // The absolute slack covers cancellation: deep branches map both
        // points near a common offset, so the difference of the images
        // carries roundoff at the scale of the images, not of the gap.
        let gap = (x - y).abs();
        prop_assert!((fx - fy).abs() <= upper * gap * (1.0 + 1e-12) + 1e-15);
        prop_assert!((fx - fy).abs() >= lower * gap * (1.0 - 1e-12) - 1e-15);
    }

    /// Refinement enumerates length-m words in lexicographic order and
    /// multiplies Lipschitz constants exactly.
    #[test]
    fn refinement_tracks_lipschitz_products(
        sigma in proptest::collection::vec(1u32..=2, 0..=4),
        m in 1usize..=3,
    ) {
        let f = builtins::thirds().with_probs(vec![0.5, 0.5]).unwrap();
        let sigma = Word::new(sigma, 2).unwrap();
        let refined = refine_ifs(&f, &sigma, m, false).unwrap();
        prop_assert_eq!(refined.map_count(), 1 << m);
        let sigma_lip: f64 = sigma
            .symbols()
            .iter()
            .map(|&s| f.map((s - 1) as usize).upper_lip())
            .product();
        for i in 0..refined.map_count() {
            let mut word_lip = 1.0;
            for j in 0..m {
                let symbol = (i >> (m - 1 - j)) & 1;
                word_lip *= f.map(symbol).upper_lip();
            }
            let expected = word_lip * sigma_lip;
            let got = refined.map(i).upper_lip();
            prop_assert!((got - expected).abs() <= 1e-12 * expected, "map {}: {} vs {}", i, got, expected);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Every Lloyd descent trace is non-increasing, for exact and
    /// safeguarded center updates alike.
    #[test]
    fn lloyd_traces_never_increase(
        m in measure_strategy(),
        n in 1usize..=6,
        r_pick in 0usize..3,
        seed in any::<u64>(),
    ) {
        let r = [1.0, 2.0, 0.7][r_pick];
        let q = lloyd_quantize(&m, n, r, seed, 40, 1e-9).unwrap();
        for w in q.distortion_trace.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-300, "trace rose: {} -> {}", w[0], w[1]);
        }
    }

    /// Optimal distortion is non-increasing in the codebook size.
    #[test]
    fn exact_distortion_non_increasing_in_n(m in measure_strategy(), r_pick in 0usize..2) {
        let r = [1.0, 2.0][r_pick];
        let grid: Vec<usize> = (1..=6).collect();
        let qs = exact_quantize_1d_grid(&m, &grid, r).unwrap();
        for pair in qs.windows(2) {
            prop_assert!(pair[1].distortion <= pair[0].distortion + 1e-15);
        }
    }

    /// Scaling the support by lambda scales the order-r distortion by
    /// lambda^r.
    #[test]
    fn exact_distortion_scaling_covariance(
        m in measure_strategy(),
        lambda in 0.1f64..=10.0,
        n in 1usize..=4,
        r_pick in 0usize..2,
    ) {
        let r = [1.0, 2.0][r_pick];
        let base = exact_quantize_1d(&m, n, r).unwrap().distortion;
        let scaled = exact_quantize_1d(&m.scaled(lambda).unwrap(), n, r).unwrap().distortion;
        let expected = lambda.powf(r) * base;
        prop_assert!(
            (scaled - expected).abs() <= 1e-9 * (1.0 + expected),
            "{} vs {}",
            scaled,
            expected
        );
    }

    /// The box-counting slope is invariant under a common rescaling of the
    /// cloud and the scale ladder. Power-of-two factors keep the rescaling
    /// exact in floating point, so the box counts must match exactly.
    #[test]
    fn box_slope_scale_invariant(exponent in -3i32..=3) {
        let lambda = 2f64.powi(exponent);
        let f = builtins::binary();
        let cloud = attractor_sample(&f, 10, &f.default_seed_point()).unwrap();
        let scales: Vec<f64> = (2..=6).map(|k| 2f64.powi(-k)).collect();
        let base = box_dimension_estimate(&cloud, &scales).unwrap().slope;

        let coords: Vec<f64> = cloud.coords().iter().map(|&x| x * lambda).collect();
        let scaled_cloud = PointCloud::from_flat(coords, 1).unwrap();
        let scaled_scales: Vec<f64> = scales.iter().map(|&s| s * lambda).collect();
        let scaled = box_dimension_estimate(&scaled_cloud, &scaled_scales).unwrap().slope;
        prop_assert!((scaled - base).abs() <= 1e-9, "{} vs {}", scaled, base);
    }
}
