// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::LN_2;

use infostream_core::dist::{divergence_exact, divergence_via_g, l1_distance, l2_distance, l2_squared};
use infostream_core::streaming::{item_counts, LargeSmallEstimator, LargeSmallParams};
use infostream_core::{entropy_exact, entropy_of_counts, DivergenceKind, Distribution};
use proptest::prelude::*;

const SLACK: f64 = 1e-9;

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    // Roughly a third of the entries are zero, so supports differ.
    prop::collection::vec(prop_oneof![Just(0u32), 1u32..1000, 1u32..1000], n)
        .prop_filter("needs mass", |w| w.iter().any(|&x| x > 0))
        .prop_map(|w| w.into_iter().map(f64::from).collect())
}

fn pair() -> impl Strategy<Value = (Distribution, Distribution)> {
    (2usize..=64).prop_flat_map(|n| (weights(n), weights(n))).prop_map(|(a, b)| {
        (
            Distribution::from_weights(&a).unwrap(),
            Distribution::from_weights(&b).unwrap(),
        )
    })
}

fn d(kind: DivergenceKind, p: &Distribution, q: &Distribution) -> f64 {
    divergence_exact(kind, p, q).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn chain_inequality((p, q) in pair()) {
        let hel = d(DivergenceKind::Hellinger, &p, &q);
        let tri = d(DivergenceKind::Triangle, &p, &q);
        let js = d(DivergenceKind::JensenShannon, &p, &q);
        prop_assert!(hel / 2.0 <= tri / 2.0 + SLACK);
        prop_assert!(tri / 2.0 <= js + SLACK);
        prop_assert!(js <= LN_2 * tri + SLACK);
        prop_assert!(LN_2 * tri <= 2.0 * LN_2 * hel + SLACK);
    }

    #[test]
    fn norm_sandwich((p, q) in pair()) {
        let tri = d(DivergenceKind::Triangle, &p, &q);
        let l1 = l1_distance(&p, &q).unwrap();
        let l2sq = l2_squared(&p, &q).unwrap();
        let l2 = l2_distance(&p, &q).unwrap();
        let sup = p.max_prob() + q.max_prob();
        prop_assert!(l2sq / sup <= tri + SLACK);
        prop_assert!(tri <= l1 + SLACK);
        prop_assert!(l1 <= (p.n() as f64).sqrt() * l2 + SLACK);
    }

    #[test]
    fn symmetric_kinds_commute((p, q) in pair()) {
        for kind in DivergenceKind::ALL.into_iter().filter(|k| k.is_symmetric()) {
            prop_assert!((d(kind, &p, &q) - d(kind, &q, &p)).abs() <= SLACK);
        }
    }

    #[test]
    fn g_form_matches_definition((p, q) in pair()) {
        for kind in DivergenceKind::BOUNDED {
            let a = d(kind, &p, &q);
            let b = divergence_via_g(kind, &p, &q).unwrap();
            prop_assert!((a - b).abs() <= SLACK, "{:?}: {} vs {}", kind, a, b);
        }
    }

    #[test]
    fn entropy_is_permutation_invariant_and_capped(w in (2usize..=64).prop_flat_map(weights), seed in any::<u64>()) {
        let p = Distribution::from_weights(&w).unwrap();
        let mut shuffled = w.clone();
        infostream_core::SplitMix64::new(seed).shuffle(&mut shuffled);
        let q = Distribution::from_weights(&shuffled).unwrap();
        let h = entropy_exact(&p);
        prop_assert!((h - entropy_exact(&q)).abs() <= SLACK);
        prop_assert!(h <= (p.support_size() as f64).log2() + SLACK);
        let u = Distribution::uniform(p.support_size()).unwrap();
        prop_assert!(h <= entropy_exact(&u) + SLACK);
    }
}

#[test]
fn g_is_bounded_on_dense_grid() {
    for kind in DivergenceKind::BOUNDED {
        let tau = kind.tau().unwrap();
        for k in 0..=100_000 {
            let x = k as f64 / 100_000.0;
            let g = kind.g(x);
            assert!((0.0..=tau + SLACK).contains(&g), "{kind:?} g({x}) = {g}");
        }
    }
}

#[test]
fn bounded_kinds_are_self_conjugate_on_grid() {
    for kind in DivergenceKind::BOUNDED {
        for k in 1..=2000 {
            let x = k as f64 / 100.0;
            assert!((kind.conjugate(x) - kind.f(x)).abs() <= SLACK * (1.0 + kind.f(x)));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The Large-Small output never falls below the empirical entropy.
    #[test]
    fn large_small_never_underestimates(
        n in 2usize..2000,
        m in 1usize..20_000,
        skew in 1u32..6,
        alpha in 0.2f64..0.9,
        eps in 0.01f64..0.5,
        seed in any::<u64>(),
    ) {
        let mut rng = infostream_core::SplitMix64::new(seed);
        let items: Vec<usize> = (0..m)
            .map(|_| (0..skew).map(|_| rng.below_usize(n)).min().unwrap())
            .collect();
        let h = entropy_of_counts(item_counts(n, items.iter().copied()));
        let params = LargeSmallParams::new(alpha, eps, n, m as u64).with_seed(seed);
        let mut e = LargeSmallEstimator::new(params).unwrap();
        e.extend(items.iter().copied()).unwrap();
        prop_assert!(e.finish().estimate >= h - 1e-9);
    }
}
