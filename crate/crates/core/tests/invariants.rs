use ehr_denoise::baselines::{soft_impute, SoftImputeConfig};
use ehr_denoise::data::{corrupt, or_merge, sample_clean, GeneratorSpec, NoiseSpec};
use ehr_denoise::eval::{auprc, bootstrap_ci, BootstrapSpec};
use ehr_denoise::oracle::{
    closed_form_discrepancy, mse_of_denoiser, random_instance, MixtureNoiseExact, OptimalDenoiser,
};
use ehr_denoise::thresholding::{apply_thresholded, ThresholdVector};
use ehr_denoise::{BinaryMatrix, ProbMatrix};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = BinaryMatrix> {
    proptest::collection::vec(proptest::collection::vec(0u8..2, cols), rows)
        .prop_map(|r| BinaryMatrix::from_rows(&r).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn closed_form_matches_posterior(n in 1usize..6, beta in 0.01f64..1.0, seed in any::<u64>()) {
        let (dist, noise) = random_instance(n, beta, seed, 0).unwrap();
        prop_assert!(closed_form_discrepancy(&dist, &noise).unwrap() < 1e-10);
    }

    #[test]
    fn optimal_denoiser_beats_identity(n in 1usize..5, beta in 0.01f64..1.0, seed in any::<u64>()) {
        let (dist, noise) = random_instance(n, beta, seed, 1).unwrap();
        let opt = OptimalDenoiser::new(&dist, &noise).unwrap();
        let best = mse_of_denoiser(&dist, &noise, |s| opt.denoise_state(s).unwrap()).unwrap();
        let ident = mse_of_denoiser(&dist, &noise, |s| {
            (0..n).map(|d| ((s >> d) & 1) as f64).collect()
        }).unwrap();
        prop_assert!(best <= ident + 1e-12);
    }

    #[test]
    fn clean_noise_gives_identity(n in 1usize..5, seed in any::<u64>()) {
        let (dist, _) = random_instance(n, 0.5, seed, 2).unwrap();
        let noise = MixtureNoiseExact::identity(n, 1.0).unwrap();
        let opt = OptimalDenoiser::new(&dist, &noise).unwrap();
        for s in (0..1usize << n).filter(|&s| opt.is_reachable(s)) {
            let f = opt.denoise_state(s).unwrap();
            for (d, v) in f.iter().enumerate() {
                prop_assert_eq!(*v, ((s >> d) & 1) as f64);
            }
        }
    }

    #[test]
    fn corruption_only_removes_ones(
        cols in 1usize..20, beta in 0.0f64..=1.0, drop in 0.0f64..=1.0, seed in any::<u64>()
    ) {
        let clean = sample_clean(&GeneratorSpec::uniform(cols, 1, 0.2, 0.4, seed), 40).unwrap();
        let noisy = corrupt(&clean, &NoiseSpec::uniform(beta, drop, cols).unwrap(), seed ^ 1).unwrap();
        prop_assert!(noisy.is_subset_of(&clean));
        prop_assert_eq!(or_merge(&noisy, &clean).unwrap(), clean);
    }

    #[test]
    fn thresholding_keeps_observed_ones(
        x in matrix(6, 5),
        g in proptest::collection::vec(0.0f64..=1.0, 30),
        phi in proptest::collection::vec(0.0f64..=1.0, 5),
        hard in any::<bool>(),
    ) {
        let g = ProbMatrix::new(6, 5, g).unwrap();
        let thr = ThresholdVector { phi, cap: vec![1.0; 5], alpha: 100.0 };
        let out = apply_thresholded(&g, &thr, &x, hard).unwrap();
        for i in 0..6 {
            for j in 0..5 {
                let v = out.get(i, j);
                if x.get(i, j) {
                    prop_assert_eq!(v, 1.0);
                } else {
                    prop_assert!(v >= 0.0 && v <= g.get(i, j));
                }
            }
        }
    }

    #[test]
    fn soft_impute_objective_does_not_increase(x in matrix(12, 6), shrinkage in 0.01f64..2.0) {
        prop_assume!(x.count_ones() > 0);
        let cfg = SoftImputeConfig { shrinkage, max_rank: None, max_iters: 30, tol: 0.0 };
        let r = soft_impute(&x, &cfg).unwrap();
        for w in r.objective.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn bootstrap_is_deterministic(seed in any::<u64>(), n in 10usize..80) {
        let scores: Vec<f64> = (0..n).map(|i| ((i * 7919) % 101) as f64).collect();
        let labels: Vec<bool> = (0..n).map(|i| i % 3 == 0).collect();
        let metric = |rows: &[usize]| {
            let s: Vec<f64> = rows.iter().map(|&r| scores[r]).collect();
            let l: Vec<bool> = rows.iter().map(|&r| labels[r]).collect();
            auprc(&s, &l)
        };
        let spec = BootstrapSpec::new(seed);
        let a = bootstrap_ci(n, metric, &spec).unwrap();
        let b = bootstrap_ci(n, metric, &spec).unwrap();
        prop_assert_eq!(a, b);
    }
}
