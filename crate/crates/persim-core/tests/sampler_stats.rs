//! Distributional checks on the synthetic samplers: coordinate marginals,
//! label semantics, transform equivalence, and hard-instance moments.

use persim_core::learners::class_to_est_transform;
use persim_core::rng::stream_rng;
use persim_core::tasks::{
    draw_hard_mean_instance, draw_meta_instance, sample_class_one, sample_est_one, sample_x,
    MeanInstance,
};

/// Sample coordinate means concentrate on p (bands are >6 standard errors).
#[test]
fn coordinate_marginals_match_p() {
    let p = [0.5, -0.5, 0.0, 0.9];
    let n = 100_000usize;
    let mut rng = stream_rng(21, 0);
    let mut sums = [0i64; 4];
    for _ in 0..n {
        let x = sample_x(&p, &mut rng);
        for (s, &v) in sums.iter_mut().zip(&x) {
            *s += v as i64;
        }
    }
    for (k, &s) in sums.iter().enumerate() {
        let mean = s as f64 / n as f64;
        assert!(
            (mean - p[k]).abs() <= 0.02,
            "coordinate {k}: mean {mean} vs p {}",
            p[k]
        );
    }
}

/// Classification samples: labels are unbiased coin flips, and the labeled
/// coordinate correlates with the label exactly through p — E[y x_j] = p_j
/// while the raw x_j marginal is scrambled to mean p_j * E[y] = 0.
#[test]
fn class_sampler_label_semantics() {
    let inst = MeanInstance::new(vec![0.6, -0.4], vec![0, 1]).unwrap();
    let n = 50_000usize;
    let mut rng = stream_rng(22, 0);
    let mut y_sum = 0i64;
    let mut yx_sum = [0i64; 2];
    let mut x_sum = [0i64; 2];
    for _ in 0..n {
        for s in sample_class_one(&inst, &mut rng) {
            y_sum += s.y as i64;
            yx_sum[s.j] += (s.y * s.x[s.j]) as i64;
            x_sum[s.j] += s.x[s.j] as i64;
        }
    }
    let y_mean = y_sum as f64 / (2 * n) as f64;
    assert!(y_mean.abs() <= 0.013, "label mean {y_mean}");
    for person in 0..2 {
        let yx = yx_sum[person] as f64 / n as f64;
        let x = x_sum[person] as f64 / n as f64;
        let p = inst.p()[inst.j()[person]];
        assert!((yx - p).abs() <= 0.02, "person {person}: E[y x_j] = {yx} vs {p}");
        assert!(x.abs() <= 0.02, "person {person}: scrambled marginal {x}");
    }
}

/// Unscrambling a classification sample reproduces the estimation
/// distribution: the transformed target coordinate has mean p_j again.
#[test]
fn transform_restores_estimation_distribution() {
    let inst = MeanInstance::new(vec![-0.7], vec![0]).unwrap();
    let n = 50_000usize;
    let mut rng = stream_rng(23, 0);
    let mut direct = 0i64;
    let mut transformed = 0i64;
    for _ in 0..n {
        direct += sample_est_one(&inst, &mut rng)[0].x[0] as i64;
        let class = &sample_class_one(&inst, &mut rng)[0];
        transformed += class_to_est_transform(class).x[0] as i64;
    }
    let a = direct as f64 / n as f64;
    let b = transformed as f64 / n as f64;
    assert!((a - -0.7).abs() <= 0.02, "direct {a}");
    assert!((b - -0.7).abs() <= 0.02, "transformed {b}");
}

/// Hard instances: coordinate means are uniform on [-lambda, lambda]
/// (mean 0, variance lambda^2/3), indices are uniform over [d].
#[test]
fn hard_instance_moments() {
    let d = 100_000usize;
    let inst = draw_hard_mean_instance(d, 1, 1.0, &mut stream_rng(24, 0)).unwrap();
    let mean = inst.p().iter().sum::<f64>() / d as f64;
    let var = inst.p().iter().map(|p| p * p).sum::<f64>() / d as f64 - mean * mean;
    assert!(mean.abs() <= 0.011, "mean {mean}");
    let ratio = var / (1.0 / 3.0);
    assert!((0.97..=1.03).contains(&ratio), "variance ratio {ratio}");

    // scaled width
    let inst = draw_hard_mean_instance(d, 1, 0.5, &mut stream_rng(24, 1)).unwrap();
    let var = inst.p().iter().map(|p| p * p).sum::<f64>() / d as f64;
    let ratio = var / (0.25 / 3.0);
    assert!((0.97..=1.03).contains(&ratio), "lambda=0.5 variance ratio {ratio}");

    // index marginal: chi-squared-style sanity on a small d
    let small = draw_hard_mean_instance(4, 40_000, 1.0, &mut stream_rng(24, 2)).unwrap();
    for bucket in 0..4 {
        let count = small.j().iter().filter(|&&j| j == bucket).count();
        let frac = count as f64 / 40_000.0;
        assert!((frac - 0.25).abs() <= 0.01, "bucket {bucket}: {frac}");
    }
}

/// Metalearning instances: one extra slot, the last one, is the held-out
/// test task; training slots form a consistent instance over the same means.
#[test]
fn meta_instance_layout() {
    let meta = draw_meta_instance(50, 7, 0.8, &mut stream_rng(25, 0)).unwrap();
    assert_eq!(meta.t(), 7);
    assert_eq!(meta.j().len(), 8);
    assert_eq!(meta.test_index(), meta.j()[7]);
    let train = meta.train_instance();
    assert_eq!(train.t(), 7);
    assert_eq!(train.p(), meta.p());
    assert_eq!(train.j(), &meta.j()[..7]);
    assert!(meta.p().iter().all(|p| p.abs() <= 0.8));
}
