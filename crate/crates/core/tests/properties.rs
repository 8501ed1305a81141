use irregwave::bench::theoretical_exponent;
use irregwave::coeffs::{apply_threshold, levels, ThresholdRule};
use irregwave::design::DesignDensity;
use irregwave::wavelet::{CoefficientTree, PeriodizedBasis, WaveletFamily};
use irregwave::zero_affected::{build_index_sets, circular_distance};
use proptest::prelude::*;
use std::sync::OnceLock;

fn basis(n: usize) -> &'static PeriodizedBasis {
    static CACHE: OnceLock<Vec<PeriodizedBasis>> = OnceLock::new();
    let all = CACHE.get_or_init(|| {
        (1..=4)
            .map(|n| PeriodizedBasis::daubechies(n).unwrap())
            .collect()
    });
    &all[n - 1]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_index_is_hit_or_free(n in 1usize..=4, x0 in 0.02f64..0.98, extra in 0u32..5) {
        let family = WaveletFamily::daubechies(n).unwrap();
        let m = family.min_level() + extra;
        let sets = build_index_sets(m, m..m + 3, x0, &family).unwrap();
        let (l, u) = family.phi_support();
        let mut all: Vec<usize> = sets.phi_hit.iter().chain(&sets.phi_free).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..1usize << m).collect::<Vec<_>>());
        prop_assert!(sets.phi_hit.len() <= (u - l + 2) as usize);
        prop_assert!(sets.star.iter().all(|k| sets.phi_free.contains(k)));
        for lvl in &sets.psi {
            let mut all: Vec<usize> = lvl.hit.iter().chain(&lvl.free).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..1usize << lvl.level).collect::<Vec<_>>());
        }
    }

    #[test]
    fn affected_and_free_parts_add_up(
        n in 1usize..=3,
        x0 in 0.05f64..0.95,
        seed in proptest::collection::vec(-1.0f64..1.0, 64),
        x in 0.0f64..1.0,
    ) {
        let basis = basis(n);
        let m = basis.min_level();
        let big_j = m + 2;
        let sets = build_index_sets(m, m..big_j, x0, basis.family()).unwrap();
        let mut full = CoefficientTree::zeros(m, big_j);
        let mut next = seed.iter().cycle();
        for a in full.a.iter_mut() {
            *a = *next.next().unwrap();
        }
        for level in full.b.iter_mut() {
            for b in level.iter_mut() {
                *b = *next.next().unwrap();
            }
        }
        let mut affected = CoefficientTree::zeros(m, m);
        let mut free = full.clone();
        for &k in &sets.phi_hit {
            affected.a[k] = full.a[k];
            free.a[k] = 0.0;
        }
        let sum = affected.reconstruct(basis, x) + free.reconstruct(basis, x);
        prop_assert!((sum - full.reconstruct(basis, x)).abs() < 1e-10);
    }

    #[test]
    fn survivors_shrink_as_d_grows(
        b in -2.0f64..2.0,
        j in 2u32..8,
        k_frac in 0.0f64..1.0,
        d1 in 0.1f64..5.0,
        factor in 1.0f64..4.0,
        alpha in 0.2f64..3.0,
    ) {
        let k = ((1usize << j) as f64 * k_frac) as usize % (1usize << j);
        let k0 = (1usize << j) as f64 * 0.5;
        let loose = ThresholdRule::polynomial(d1, 4096, alpha, 1.0);
        let strict = ThresholdRule::polynomial(d1 * factor, 4096, alpha, 1.0);
        if apply_threshold(&strict, b, j, k, k0) != 0.0 {
            prop_assert_eq!(apply_threshold(&loose, b, j, k, k0), b);
        }
    }

    #[test]
    fn threshold_decreases_away_from_the_zero(j in 2u32..9, alpha in 0.1f64..3.0, k_frac in 0.0f64..1.0) {
        let size = 1usize << j;
        let k = (size as f64 * k_frac) as usize % size;
        let k0 = size as f64 * 0.5;
        let rule = ThresholdRule::polynomial(1.0, 4096, alpha, 1.0);
        let dist = circular_distance(k, k0, j);
        let further = circular_distance((k + 1) % size, k0, j);
        if further > dist {
            prop_assert!(rule.squared_level(j, further) <= rule.squared_level(j, dist));
        }
    }

    #[test]
    fn exponent_is_continuous_at_the_elbow(s in 0.6f64..3.0, p in 1.0f64..10.0) {
        let s_prime = s + 0.5 - 1.0 / p;
        let alpha = s_prime / s;
        let below = theoretical_exponent(s, Some(p), alpha * (1.0 - 1e-9), 0.0, 1.0);
        let above = theoretical_exponent(s, Some(p), alpha * (1.0 + 1e-9), 0.0, 1.0);
        prop_assert!((below - above).abs() < 1e-6);
    }

    #[test]
    fn finest_level_grows_with_n(log_n in 10.0f64..24.0, step in 1.0f64..4.0, alpha in 0.2f64..3.0) {
        let family = WaveletFamily::daubechies(1).unwrap();
        let n1 = log_n.exp2() as usize;
        let n2 = (log_n + step).exp2() as usize;
        let (_, j1) = levels(n1, &family, alpha, 0.0, 1.0).unwrap();
        let (_, j2) = levels(n2, &family, alpha, 0.0, 1.0).unwrap();
        prop_assert!(j2 >= j1);
    }

    #[test]
    fn inverse_cdf_is_a_right_inverse(u in 0.0f64..1.0, alpha in 0.3f64..3.0, x0 in 0.1f64..0.9) {
        let g = DesignDensity::new(x0, alpha, 0.0, 1.0).unwrap();
        let x = g.invert_cdf(u).unwrap();
        prop_assert!((g.eval_cdf(x) - u).abs() < 1e-9);
    }
}
