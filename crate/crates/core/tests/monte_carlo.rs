use diffggm::debias::{debias_difference, estimate_m_joint, NoiseEstimate};
use diffggm::fused::solve_fused;
use diffggm::ggm::{cross_validate_lasso, estimate_noise, fold_assignment, NodewiseConfig};
use diffggm::lasso::{solve_lasso_gram, GramProblem};
use diffggm::simulate::{generate_ggm_pair, sample_gaussian};
use diffggm::{standardize, RegularizationParams, SampleMatrix, SolverConfig};
use nalgebra::DMatrix;
use ndarray::{array, Array1, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| StandardNormal.sample(rng))
}

fn regression(x: &SampleMatrix, beta: &Array1<f64>, rng: &mut ChaCha8Rng) -> Array1<f64> {
    let noise: Array1<f64> = Array1::from_shape_fn(x.n(), |_| StandardNormal.sample(rng));
    x.data().dot(beta) + noise
}

#[test]
fn noise_estimate_is_close_to_unit_on_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut beta = Array1::zeros(20);
    beta[0] = 1.0;
    beta[3] = -0.7;
    beta[11] = 0.5;
    let cfg = NodewiseConfig::default();
    let mut total = 0.0;
    for _ in 0..100 {
        let x = standardize(gaussian(100, 20, &mut rng).view()).unwrap();
        let y = regression(&x, &beta, &mut rng);
        total += estimate_noise(&x, y.view(), &cfg).unwrap();
    }
    let mean = total / 100.0;
    assert!((0.9..=1.1).contains(&mean), "mean noise estimate {mean}");
}

#[test]
fn debiased_difference_is_centred_on_the_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let beta1 = array![0.8, 0.0, -0.5, 0.0, 0.3];
    let beta2 = array![0.8, 0.6, -0.5, 0.0, 0.0];
    let truth = &beta1 - &beta2;
    let reps = 200;
    let mut draws = Array2::zeros((reps, 5));
    let params = RegularizationParams::new(0.05, 0.05);
    for r in 0..reps {
        let x1 = standardize(gaussian(200, 5, &mut rng).view()).unwrap();
        let x2 = standardize(gaussian(100, 5, &mut rng).view()).unwrap();
        let (y1, y2) = (
            regression(&x1, &beta1, &mut rng),
            regression(&x2, &beta2, &mut rng),
        );
        let fit = solve_fused(
            &x1,
            y1.view(),
            &x2,
            y2.view(),
            &params,
            &SolverConfig::default(),
        )
        .unwrap();
        let m = estimate_m_joint(
            &x1.covariance(),
            &x2.covariance(),
            200,
            100,
            0.01,
            0.01,
            &SolverConfig::qp(),
        )
        .unwrap();
        let d = debias_difference(
            &fit,
            &m,
            &x1,
            y1.view(),
            &x2,
            y2.view(),
            NoiseEstimate::new(1.0, 1.0).unwrap(),
        )
        .unwrap();
        draws.row_mut(r).assign(&d.beta_d);
    }
    let mean = draws.mean_axis(Axis(0)).unwrap();
    let se = draws.std_axis(Axis(0), 1.0) / (reps as f64).sqrt();
    for j in 0..5 {
        assert!(
            (mean[j] - truth[j]).abs() <= 3.0 * se[j],
            "coordinate {j}: mean {} truth {} se {}",
            mean[j],
            truth[j],
            se[j]
        );
    }
}

#[test]
fn sample_covariance_converges_to_model_covariance() {
    let pair = generate_ggm_pair(5, 0.4, 0.2, 7).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let x = sample_gaussian(pair.theta1.view(), 100_000, &mut rng).unwrap();
    let emp = x.t().dot(&x) / 100_000.0;
    let theta = DMatrix::from_fn(5, 5, |i, j| pair.theta1[[i, j]]);
    let cov = theta.try_inverse().unwrap();
    let frob = (0..5)
        .flat_map(|i| (0..5).map(move |j| (i, j)))
        .map(|(i, j)| (emp[[i, j]] - cov[(i, j)]).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(frob < 0.05, "Frobenius distance {frob}");
}

#[test]
fn generated_precisions_are_positive_definite() {
    for seed in 0..5 {
        let pair = generate_ggm_pair(6, 0.4, 0.2, seed).unwrap();
        for theta in [&pair.theta1, &pair.theta2] {
            let m = DMatrix::from_fn(6, 6, |i, j| theta[[i, j]]);
            let min_eig = m.symmetric_eigen().eigenvalues.min();
            assert!(min_eig > 1e-6, "seed {seed}: {min_eig}");
        }
        // 15 pairs: round(0.4·15) = 6 edges per model, round(0.2·15/2) = 2 removed from each.
        let count = |t: &Array2<f64>| {
            (0..6)
                .flat_map(|i| (i + 1..6).map(move |j| (i, j)))
                .filter(|&(i, j)| t[[i, j]] != 0.0)
                .count()
        };
        assert_eq!(count(&pair.theta1), 6);
        assert_eq!(count(&pair.theta2), 6);
        let diffs = (0..6)
            .flat_map(|i| (i + 1..6).map(move |j| (i, j)))
            .filter(|&(i, j)| pair.theta1[[i, j]] != pair.theta2[[i, j]])
            .count();
        assert_eq!(diffs, 4);
    }
}

#[test]
fn cross_validated_choice_is_near_the_grid_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut beta = Array1::zeros(15);
    beta[2] = 1.0;
    beta[7] = -0.8;
    let cfg = NodewiseConfig::default();
    let x = standardize(gaussian(90, 15, &mut rng).view()).unwrap();
    let y = regression(&x, &beta, &mut rng);
    let scale = (15f64.ln() / 90.0).sqrt();
    let chosen = cross_validate_lasso(&x, y.view(), scale, &cfg).unwrap();

    // Recompute every grid point's held-out error directly from the raw rows.
    let folds = fold_assignment(90, cfg.cv_folds, cfg.seed);
    let error_at = |k: f64| -> f64 {
        folds
            .iter()
            .map(|test| {
                let train: Vec<usize> = (0..90).filter(|i| !test.contains(i)).collect();
                let (xt, yt) = (x.data().select(Axis(0), &train), y.select(Axis(0), &train));
                let prob = GramProblem::from_data(xt.view(), yt.view()).unwrap();
                let fit = solve_lasso_gram(&prob, k * scale, &cfg.solver, None).unwrap();
                let (xh, yh) = (x.data().select(Axis(0), test), y.select(Axis(0), test));
                let r = &yh - &xh.dot(&fit.beta);
                r.dot(&r) / test.len() as f64
            })
            .sum()
    };
    let best = cfg
        .k_grid
        .iter()
        .map(|&k| error_at(k))
        .fold(f64::INFINITY, f64::min);
    assert!(error_at(chosen) <= 1.05 * best, "chosen {chosen}");
}
