use irregwave::adapt::{Estimator, EstimatorConfig, FSup, Tuning};
use irregwave::bench::{catalog_entry, run_monte_carlo, Scenario};
use irregwave::coeffs::{levels, CoefficientBank};
use irregwave::design::{DesignDensity, DesignKind};
use irregwave::quad;
use irregwave::wavelet::{Generator, PeriodizedBasis};
use irregwave::zero_affected::{assemble_system, build_index_sets, circular_distance};
use irregwave::RealFn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

fn noise(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn d3() -> PeriodizedBasis {
    PeriodizedBasis::daubechies(3).unwrap()
}

fn vee() -> DesignDensity {
    DesignDensity::new(0.5, 1.0, 0.0, 1.0).unwrap()
}

#[test]
fn gram_matrix_is_identity() {
    let basis = d3();
    let (m, big_j) = (3u32, 6u32);
    let mut elems: Vec<(Generator, u32, usize)> =
        (0..1 << m).map(|k| (Generator::Scaling, m, k)).collect();
    for j in m..big_j {
        elems.extend((0..1usize << j).map(|k| (Generator::Wavelet, j, k)));
    }
    let nodes = 1usize << 14;
    let xs: Vec<f64> = (0..=nodes).map(|i| i as f64 / nodes as f64).collect();
    let values: Vec<Vec<f64>> = elems
        .iter()
        .map(|&(g, l, k)| {
            xs.iter()
                .map(|&x| basis.element(g, l, k as i64, x))
                .collect()
        })
        .collect();
    let mut worst = 0.0f64;
    for (i, vi) in values.iter().enumerate() {
        for (j, vj) in values.iter().enumerate().skip(i) {
            let prod: Vec<f64> = vi.iter().zip(vj).map(|(a, b)| a * b).collect();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((quad::trapezoid(&xs, &prod) - target).abs());
        }
    }
    assert!(worst < 1e-5, "worst Gram defect {worst}");
}

#[test]
fn projection_of_a_reconstruction_is_stable() {
    let basis = d3();
    let f = catalog_entry("kink").unwrap();
    let tree = basis.project(&f, 3, 7).unwrap();
    let g = |x: f64| tree.reconstruct(&basis, x);
    let again = basis.project(&g, 3, 7).unwrap();
    let diff: f64 = tree
        .a
        .iter()
        .zip(&again.a)
        .map(|(a, b)| (a - b).powi(2))
        .chain(
            tree.b
                .iter()
                .flatten()
                .zip(again.b.iter().flatten())
                .map(|(a, b)| (a - b).powi(2)),
        )
        .sum();
    assert!(diff.sqrt() < 1e-8, "{diff}");
}

#[test]
fn rescaled_local_matrix_converges() {
    let basis = d3();
    let g = vee();
    let scaled = |m: u32| assemble_system(&basis, &g, m, 0.0).unwrap().a * (m as f64).exp2();
    for m in [7u32, 8] {
        let (a, b) = (scaled(m), scaled(m + 1));
        let top = b.amax();
        for (x, y) in a.iter().zip(b.iter()) {
            // relative for entries of visible size, absolute for tiny ones
            assert!(
                (x - y).abs() <= 0.05 * y.abs().max(0.01 * top),
                "m={m}: {x} vs {y}"
            );
        }
    }
}

#[test]
fn coefficient_variance_follows_the_distance_envelope() {
    // sample variance of raw wavelet estimates <= KAPPA n^-1 2^{j alpha} |k - k0j|^-alpha
    const KAPPA: f64 = 1.0;
    let basis = d3();
    let g = vee();
    let n = 4096;
    let (m, big_j) = levels(n, basis.family(), 1.0, 0.0, 1.0).unwrap();
    let f = catalog_entry("trig3").unwrap();
    let j = big_j - 1;
    let sets = build_index_sets(m, m..big_j, 0.5, basis.family()).unwrap();
    let free = &sets.psi[(j - m) as usize].free;
    let reps = 500;
    let mut samples = vec![Vec::with_capacity(reps); free.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..reps {
        let s = g.draw_with(n, &mut rng, 11);
        let ys: Vec<f64> = s.xs.iter().map(|&x| f.eval(x) + noise(&mut rng)).collect();
        let bank = CoefficientBank::compute(&s.xs, &ys, &g, &basis, m, big_j).unwrap();
        for (slot, &k) in samples.iter_mut().zip(free) {
            slot.push(bank.wavelet(j, k).unwrap());
        }
    }
    let mut worst = 0.0f64;
    for (vals, &k) in samples.iter().zip(free) {
        let mean = vals.iter().sum::<f64>() / reps as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let dist = circular_distance(k, (1u64 << j) as f64 * 0.5, j);
        let envelope = (j as f64).exp2() / dist / n as f64;
        worst = worst.max(var / envelope);
    }
    assert!(worst <= KAPPA, "variance ratio {worst}");
}

fn noisy(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let g = vee();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = g.draw_with(n, &mut rng, seed);
    let f = catalog_entry("trig3").unwrap();
    let ys =
        s.xs.iter()
            .map(|&x| f.eval(x) + 0.3 * noise(&mut rng))
            .collect();
    (s.xs, ys)
}

#[test]
fn survivors_shrink_as_d_grows_on_fixed_data() {
    let (xs, ys) = noisy(1 << 14, 5);
    let basis = Arc::new(d3());
    let g = Arc::new(vee());
    let mut previous: Option<Vec<bool>> = None;
    for d in [0.05, 0.1, 0.3, 1.0, 3.0, 1e12] {
        let cfg = EstimatorConfig {
            d: Tuning::Value(d),
            lambda: Tuning::Value(0.5),
            sigma: 0.3,
            f_sup: FSup::Manual(2.0),
            ..Default::default()
        };
        let est = Estimator::new(basis.clone(), g.clone(), cfg).unwrap();
        let fit = est.fit(&xs, &ys).unwrap();
        let alive: Vec<bool> = fit
            .zero_free
            .b
            .iter()
            .flatten()
            .map(|v| *v != 0.0)
            .collect();
        if let Some(prev) = &previous {
            if prev.len() == alive.len() {
                assert!(
                    alive.iter().zip(prev).all(|(now, before)| !now || *before),
                    "d = {d}"
                );
            }
        }
        if d > 1e6 {
            assert!(alive.iter().all(|a| !a));
        }
        previous = Some(alive);
    }
}

#[test]
fn integrable_fit_of_zero_responses_is_zero() {
    let g = Arc::new(DesignDensity::new(0.5, 0.5, 0.0, 1.0).unwrap());
    let s = g.draw(4096, 1);
    let ys = vec![0.0; s.xs.len()];
    let cfg = EstimatorConfig {
        f_sup: FSup::Manual(1.0),
        ..Default::default()
    };
    let fit = Estimator::new(Arc::new(d3()), g, cfg)
        .unwrap()
        .fit_integrable(&s.xs, &ys)
        .unwrap();
    for i in 0..=100 {
        assert_eq!(fit.eval(i as f64 / 100.0), 0.0);
    }
}

#[test]
fn risk_decreases_in_n_for_a_smooth_target() {
    let mut votes = 0;
    for seed in 0..5 {
        let s = Scenario {
            name: "smooth".into(),
            function: catalog_entry("trig3").unwrap(),
            density: Arc::new(vee()),
            basis: Arc::new(PeriodizedBasis::daubechies(1).unwrap()),
            config: EstimatorConfig {
                d: Tuning::Value(0.5),
                lambda: Tuning::Value(0.5),
                f_sup: FSup::Manual(3.0),
                ..Default::default()
            },
            design: DesignKind::Random,
            noise: 1.0,
            n_grid: vec![1 << 10, 1 << 12, 1 << 14],
            replicates: 20,
            seed,
            risk_grid_p: 12,
            tolerance: 0.15,
        };
        if run_monte_carlo(&s, None).unwrap().risks_decreasing() {
            votes += 1;
        }
    }
    assert!(votes >= 3, "{votes} of 5 seeds decreasing");
}
