//! Sampling distributions checked against their exact moments. Every check
//! allows five standard deviations, so a correct sampler fails with
//! probability below 1e-6 per assertion.

use assemblies::graph::{sample_fiber, sample_recurrent_graph};
use assemblies::rng::make_rng;
use assemblies::stimuli::{
    make_overlapping_class, make_stimulus_class, HalfspaceClass, StimulusSource,
};
use assemblies::ModelConfig;

fn within(observed: f64, mean: f64, sd: f64, what: &str) {
    assert!(
        (observed - mean).abs() <= 5.0 * sd,
        "{what}: observed {observed}, expected {mean} +- 5 * {sd}"
    );
}

#[test]
fn recurrent_edge_count_is_binomial() {
    for (n, p, seed) in [(2000, 0.05, 1), (500, 0.5, 2), (3000, 0.002, 3)] {
        let config = ModelConfig::new(n, 1, p, 0.1, seed).unwrap();
        let g = sample_recurrent_graph(&config, &mut make_rng(seed, "graph")).unwrap();
        let pairs = (n * (n - 1)) as f64;
        within(
            g.edge_count() as f64,
            pairs * p,
            (pairs * p * (1.0 - p)).sqrt(),
            "edge count",
        );
    }
}

#[test]
fn fiber_edge_count_is_binomial() {
    let (n_src, n_tgt, p) = (784, 1500, 0.1);
    let f = sample_fiber(n_src, n_tgt, p, &mut make_rng(4, "fiber")).unwrap();
    let pairs = (n_src * n_tgt) as f64;
    within(
        f.weights.edge_count() as f64,
        pairs * p,
        (pairs * p * (1.0 - p)).sqrt(),
        "fiber edges",
    );
}

#[test]
fn in_degrees_have_binomial_mean_and_variance() {
    let (n, p) = (2000, 0.1);
    let config = ModelConfig::new(n, 1, p, 0.1, 5).unwrap();
    let g = sample_recurrent_graph(&config, &mut make_rng(5, "graph")).unwrap();
    let degrees: Vec<f64> = (0..n).map(|t| g.in_degree(t) as f64).collect();
    let m = (n - 1) as f64 * p;
    let var = m * (1.0 - p);
    let mean = degrees.iter().sum::<f64>() / n as f64;
    within(mean, m, (var / n as f64).sqrt(), "mean in-degree");
    let sample_var = degrees.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // The sample variance of a near-normal variable has sd about var * sqrt(2 / (n - 1)).
    within(
        sample_var,
        var,
        var * (2.0 / (n - 1) as f64).sqrt(),
        "in-degree variance",
    );
}

#[test]
fn edge_sources_are_uniform_over_positions() {
    // Gap sampling must not favour low or high source indices.
    let (n, p) = (1000, 0.2);
    let config = ModelConfig::new(n, 1, p, 0.1, 6).unwrap();
    let g = sample_recurrent_graph(&config, &mut make_rng(6, "graph")).unwrap();
    let mut buckets = [0usize; 10];
    for (s, _, _) in g.edges() {
        buckets[s as usize / 100] += 1;
    }
    // Each bucket holds 100 sources; the 100 self-pairs are spread evenly.
    let cell = 100.0 * (n - 1) as f64 * p;
    for (b, &count) in buckets.iter().enumerate() {
        within(
            count as f64,
            cell,
            (cell * (1.0 - p)).sqrt(),
            &format!("bucket {b}"),
        );
    }
}

#[test]
fn stimulus_samples_fire_core_at_r_and_background_at_qk_over_n() {
    let (n, k, r, q) = (1000, 100, 0.9, 0.1);
    let mut rng = make_rng(7, "class");
    let class = make_stimulus_class(k, n, r, q, &mut rng).unwrap();
    let draws = 400;
    let (mut on_core, mut off_core) = (0.0, 0.0);
    for _ in 0..draws {
        let x = class.draw(&mut rng);
        for (i, &v) in x.iter().enumerate() {
            if class.core.binary_search(&(i as u32)).is_ok() {
                on_core += v;
            } else {
                off_core += v;
            }
        }
    }
    let trials_core = (draws * k) as f64;
    within(
        on_core,
        trials_core * r,
        (trials_core * r * (1.0 - r)).sqrt(),
        "core firings",
    );
    let off = q * k as f64 / n as f64;
    let trials_off = (draws * (n - k)) as f64;
    within(
        off_core,
        trials_off * off,
        (trials_off * off * (1.0 - off)).sqrt(),
        "background firings",
    );
}

#[test]
fn overlapping_cores_share_exactly_round_alpha_k() {
    let mut rng = make_rng(8, "class");
    let base = make_stimulus_class(100, 1000, 0.9, 0.1, &mut rng).unwrap();
    for alpha in [0.0, 0.2, 0.33, 0.5, 1.0] {
        let other = make_overlapping_class(&base, alpha, 0.9, 0.1, &mut rng).unwrap();
        let shared = other
            .core
            .iter()
            .filter(|c| base.core.binary_search(c).is_ok())
            .count();
        assert_eq!(shared, (alpha * 100.0_f64).round() as usize);
        assert_eq!(other.k(), 100);
    }
}

#[test]
fn halfspace_coordinates_have_the_stated_means() {
    let (n, k, support, delta) = (1000, 100, 100, 1.0);
    let mut rng = make_rng(9, "halfspace");
    let h = HalfspaceClass::uniform_support(n, k, support, delta, &mut rng).unwrap();
    let draws = 2000;
    let mut pos = vec![0.0; n];
    let mut neg = vec![0.0; n];
    for _ in 0..draws {
        h.sample(true, &mut rng)
            .activation
            .iter()
            .zip(&mut pos)
            .for_each(|(x, s)| *s += x);
        h.sample(false, &mut rng)
            .activation
            .iter()
            .zip(&mut neg)
            .for_each(|(x, s)| *s += x);
    }
    let base = k as f64 / n as f64;
    let on: Vec<usize> = (0..n).filter(|&i| h.v[i] > 0.0).collect();
    assert_eq!(on.len(), support);
    // Pool coordinates with equal means to get tight checks.
    let pool = |sums: &[f64], idx: &mut dyn Iterator<Item = usize>, mean: f64, what: &str| {
        let (total, count) = idx.fold((0.0, 0usize), |(t, c), i| (t + sums[i], c + 1));
        let trials = (count * draws) as f64;
        within(
            total,
            trials * mean,
            (trials * mean * (1.0 - mean)).sqrt(),
            what,
        );
    };
    let raised = base + delta / (support as f64).sqrt();
    pool(&pos, &mut on.iter().copied(), raised, "positive support");
    pool(
        &pos,
        &mut (0..n).filter(|i| h.v[*i] == 0.0),
        base,
        "positive off-support",
    );
    pool(&neg, &mut (0..n), base, "negative");
}
