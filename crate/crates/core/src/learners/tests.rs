use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn random_data(seed: u64, n: usize, d: usize) -> (Matrix, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect();
    let y = rows.iter().map(|r| u8::from(r[0] + 0.5 * r[1] + rng.random_range(-0.7..0.7) > 0.0)).collect();
    (Matrix::from_rows(&rows).unwrap(), y)
}

fn as_f64(y: &[u8]) -> Vec<f64> {
    y.iter().map(|&v| v as f64).collect()
}

type Objective = fn(&Matrix, &[f64], &[f64], f64, f64) -> f64;
type Gradient = fn(&Matrix, &[f64], &[f64], f64, f64) -> (Vec<f64>, f64);

/// Worst relative error between the analytic gradient and central differences.
fn gradient_error(obj: Objective, grad: Gradient, x: &Matrix, y: &[f64], w: &[f64], b: f64, l2: f64) -> f64 {
    let h = 1e-6;
    let (gw, gb) = grad(x, y, w, b, l2);
    let mut analytic = gw;
    analytic.push(gb);
    let mut numeric = Vec::new();
    for k in 0..=w.len() {
        let eval = |delta: f64| {
            let mut w2 = w.to_vec();
            let mut b2 = b;
            if k < w.len() {
                w2[k] += delta;
            } else {
                b2 += delta;
            }
            obj(x, y, &w2, b2, l2)
        };
        numeric.push((eval(h) - eval(-h)) / (2.0 * h));
    }
    let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-8);
    diff / scale
}

#[test]
fn logistic_and_svm_gradients_match_finite_differences() {
    let (x, y) = random_data(3, 40, 4);
    let y = as_f64(&y);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let w: Vec<f64> = (0..4).map(|_| rng.random_range(-1.5..1.5)).collect();
        let b = rng.random_range(-1.0..1.0);
        let l2 = rng.random_range(1e-3..1.0);
        let e = gradient_error(logistic_objective, logistic_gradient, &x, &y, &w, b, l2);
        assert!(e < 1e-5, "logistic rel err {e}");
        let e = gradient_error(svm_objective, svm_subgradient, &x, &y, &w, b, l2);
        assert!(e < 1e-5, "svm rel err {e}");
    }
}

#[test]
fn logistic_gradient_vanishes_at_fit() {
    let (x, y) = random_data(5, 60, 3);
    let m = fit(&ModelSpec::new(Hyper::LogisticRegression { l2: 0.05 }, 0), &x, &y).unwrap();
    let Fitted::LogisticRegression(lr) = &m.fitted else { panic!() };
    let (gw, gb) = logistic_gradient(&x, &as_f64(&y), &lr.weights, lr.bias, 0.05);
    let inf = gw.iter().chain([&gb]).fold(0.0f64, |a, g| a.max(g.abs()));
    assert!(inf < 1e-6, "{inf}");
}

#[test]
fn zero_weight_logistic_is_half() {
    let lr = LogisticRegression { weights: vec![0.0; 3], bias: 0.0 };
    for row in [[1.0, 2.0, 3.0], [-5.0, 0.0, 9.0]] {
        assert_eq!(lr.predict_row(&row), 0.5);
    }
}

#[test]
fn gnb_posteriors_normalize_and_separate() {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..10 {
        rows.push(vec![-5.0 + 0.1 * i as f64]);
        y.push(0);
        rows.push(vec![5.0 + 0.1 * i as f64]);
        y.push(1);
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let m = fit(&ModelSpec::new(Hyper::GaussianNb { var_smoothing: 1e-9 }, 0), &x, &y).unwrap();
    assert!(m.feature_importances.is_none());
    let p = m.predict_proba(&x).unwrap();
    let acc = p.iter().zip(&y).filter(|(p, t)| u8::from(**p >= 0.5) == **t).count();
    assert_eq!(acc, 20);

    let (x, y) = random_data(8, 50, 5);
    let m = fit(&ModelSpec::new(Hyper::GaussianNb { var_smoothing: 1e-9 }, 0), &x, &y).unwrap();
    let Fitted::GaussianNb(g) = &m.fitted else { panic!() };
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let row: Vec<f64> = (0..5).map(|_| rng.random_range(-6.0..6.0)).collect();
        let (p0, p1) = g.posteriors(&row);
        assert!((p0 + p1 - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn depth_two_tree_fits_xor() {
    let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
    let y = [0, 1, 1, 0];
    let m = fit(&ModelSpec::new(Hyper::DecisionTree { max_depth: Some(2), min_leaf: 1 }, 0), &x, &y).unwrap();
    let p = m.predict_proba(&x).unwrap();
    assert_eq!(p, vec![0.0, 1.0, 1.0, 0.0]);
    let Fitted::DecisionTree(t) = &m.fitted else { panic!() };
    assert_eq!(t.tree.split_count(), 3);
}

#[test]
fn forest_probability_is_mean_of_trees() {
    let (x, y) = random_data(21, 80, 4);
    let m = fit(&ModelSpec::new(Hyper::RandomForest { n_estimators: 3, max_depth: None, min_leaf: 1 }, 9), &x, &y).unwrap();
    let Fitted::RandomForest(rf) = &m.fitted else { panic!() };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut two_of_three = 0;
    for _ in 0..500 {
        let row: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let outs = rf.tree_outputs(&row);
        assert_eq!(m.predict_row(&row), outs.iter().sum::<f64>() / 3.0);
        let mut sorted = outs.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted == [0.0, 1.0, 1.0] {
            two_of_three += 1;
            assert_eq!(m.predict_row(&row), 2.0 / 3.0);
        }
    }
    assert!(two_of_three > 0);
}

#[test]
fn adaboost_staged_error_non_increasing_early() {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..12 {
        for j in 0..12 {
            let (a, b) = (i as f64 / 11.0, j as f64 / 11.0);
            rows.push(vec![a, b]);
            y.push(u8::from(a + b > 1.05));
        }
    }
    let x = Matrix::from_rows(&rows).unwrap();
    let m = fit(&ModelSpec::new(Hyper::Adaboost { n_estimators: 50, learning_rate: 1.0, max_depth: 1 }, 0), &x, &y).unwrap();
    let Fitted::Adaboost(ab) = &m.fitted else { panic!() };
    assert!(ab.alphas.iter().all(|a| a.is_finite() && *a > 0.0));
    let staged = &ab.staged_train_error;
    assert!(staged.len() >= 3);
    for w in staged[..3].windows(2) {
        assert!(w[1] <= w[0], "{staged:?}");
    }
    assert!(staged.last().unwrap() < &staged[0]);
}

#[test]
fn every_algorithm_is_deterministic_and_bounded() {
    let (x, y) = random_data(2, 70, 6);
    let (probe, _) = random_data(99, 30, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for alg in Algorithm::ALL {
        let spec = ModelSpec::new(Hyper::sample(alg, &mut rng), 5);
        let a = fit(&spec, &x, &y).unwrap();
        let b = fit(&spec, &x, &y).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap(), "{alg}");
        let pa = a.predict_proba(&probe).unwrap();
        let pb = b.predict_proba(&probe).unwrap();
        assert_eq!(pa.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), pb.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert!(pa.iter().all(|p| (0.0..=1.0).contains(p)));
        match &a.feature_importances {
            Some(imp) => {
                assert!(alg.has_importances());
                assert!(imp.iter().all(|v| *v >= 0.0));
                assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
            None => assert!(!alg.has_importances()),
        }
        let back = TrainedModel::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(back, a);
    }
}

#[test]
fn boosting_and_forest_learn_signal() {
    let (x, y) = random_data(31, 150, 4);
    for params in [
        Hyper::default_for(Algorithm::GradientBoosting),
        Hyper::default_for(Algorithm::RandomForest),
        Hyper::default_for(Algorithm::LinearSvm),
        Hyper::default_for(Algorithm::LogisticRegression),
    ] {
        let m = fit(&ModelSpec::new(params, 1), &x, &y).unwrap();
        let p = m.predict_proba(&x).unwrap();
        let acc = p.iter().zip(&y).filter(|(p, t)| u8::from(**p >= 0.5) == **t).count() as f64 / y.len() as f64;
        assert!(acc > 0.8, "{params:?}: {acc}");
    }
}

#[test]
fn fit_rejects_bad_input() {
    let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
    let spec = ModelSpec::new(Hyper::default_for(Algorithm::DecisionTree), 0);
    assert!(fit(&spec, &x, &[1, 1]).is_err());
    let nan = Matrix::from_rows(&[vec![f64::NAN], vec![2.0]]).unwrap();
    assert!(fit(&spec, &nan, &[0, 1]).is_err());
    let m = fit(&spec, &x, &[0, 1]).unwrap();
    assert!(m.predict_proba(&Matrix::zeros(1, 2)).is_err());
}
