use approx::assert_abs_diff_eq;
use mind_core::gradcheck::{check_inputs, DEFAULT_STEP};
use mind_core::tensor::{Array, Graph, TensorError};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(shape: &[usize], seed: u64) -> Array<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Array::from_shape_vec(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn matmul_examples() {
    let g = Graph::<f64>::new();
    let eye = g.constant(Array::from_rows(&[[1.0, 0.0], [0.0, 1.0]]));
    let b = g.constant(Array::from_rows(&[[2.0, 3.0], [4.0, 5.0]]));
    assert_eq!(eye.matmul(&b).unwrap().value(), b.value());

    let row = g.constant(Array::from_rows(&[[1.0, 2.0]]));
    let col = g.constant(Array::from_rows(&[[3.0], [4.0]]));
    assert_eq!(row.matmul(&col).unwrap().value().data(), &[11.0]);
}

#[test]
fn matmul_shape_mismatch_names_both_shapes() {
    let g = Graph::<f64>::new();
    let a = g.constant(Array::zeros(&[2, 3]));
    let b = g.constant(Array::zeros(&[2, 3]));
    let err = a.matmul(&b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]"), "{msg}");
}

#[test]
fn matmul_gradcheck() {
    let inputs = [random(&[3, 4], 1), random(&[4, 2], 2)];
    let check = check_inputs::<TensorError, _>(&inputs, DEFAULT_STEP, |_, t| {
        Ok(t[0].matmul(&t[1])?.sq_norm())
    })
    .unwrap();
    assert!(check.passes(1e-6), "{check:?}");
}

#[test]
fn gelu_values_and_slope_at_zero() {
    let g = Graph::<f64>::new();
    let x = g.variable(Array::from_rows(&[[0.0, 10.0]]));
    let y = x.gelu();
    let v = y.value();
    assert_eq!(v.data()[0], 0.0);
    assert!((v.data()[1] - 10.0).abs() < 1e-6);

    y.sum().backward().unwrap();
    assert_abs_diff_eq!(x.grad().data()[0], 0.5, epsilon = 1e-15);
    let fd = check_inputs::<TensorError, _>(&[Array::from_rows(&[[0.0]])], DEFAULT_STEP, |_, t| Ok(t[0].gelu().sum()))
        .unwrap();
    assert!(fd.passes(1e-8), "{fd:?}");
}

#[test]
fn softplus_is_stable_at_extremes() {
    let g = Graph::<f64>::new();
    let v = g.constant(Array::from_rows(&[[0.0, 100.0, -100.0]])).softplus().value();
    assert_abs_diff_eq!(v.data()[0], std::f64::consts::LN_2, epsilon = 1e-15);
    assert!((v.data()[1] - 100.0).abs() < 1e-9);
    let tiny = v.data()[2];
    assert!(tiny.is_finite() && tiny > 0.0);
    assert_abs_diff_eq!(tiny / (-100f64).exp(), 1.0, epsilon = 1e-12);
}

#[test]
fn grad_reverse_is_identity_forward_and_negates_backward() {
    let g = Graph::<f64>::new();
    let x = g.variable(Array::from_rows(&[[1.0, 2.0, 3.0]]));
    let y = x.grad_reverse(1.0);
    assert_eq!(y.value(), x.value());
    y.sum().backward().unwrap();
    assert_eq!(x.grad().data(), &[-1.0, -1.0, -1.0]);

    let g = Graph::<f64>::new();
    let x = g.variable(Array::from_rows(&[[1.0, 2.0, 3.0]]));
    x.grad_reverse(1.0).grad_reverse(1.0).mul(&x).unwrap().sum().backward().unwrap();
    // Two reversals cancel, so both factors of x·x contribute +x.
    assert_eq!(x.grad().data(), &[2.0, 4.0, 6.0]);
}

#[test]
fn center_cols_removes_mean() {
    let g = Graph::<f64>::new();
    let c = g.constant(Array::from_rows(&[[1.0], [3.0]])).center_cols().unwrap();
    assert_eq!(c.value().data(), &[-1.0, 1.0]);

    let x = random(&[32, 8], 3);
    let c = g.constant(x).center_cols().unwrap().value();
    for j in 0..8 {
        let mean: f64 = (0..32).map(|i| c.get(i, j)).sum::<f64>() / 32.0;
        assert!(mean.abs() < 1e-12);
    }
}

#[test]
fn center_cols_gradcheck() {
    let check = check_inputs::<TensorError, _>(&[random(&[5, 3], 4), random(&[5, 3], 5)], DEFAULT_STEP, |_, t| {
        Ok(t[0].center_cols()?.mul(&t[1])?.sum())
    })
    .unwrap();
    assert!(check.passes(1e-5), "{check:?}");
}

#[test]
fn backward_of_sum_and_product() {
    let g = Graph::<f64>::new();
    let x = g.variable(Array::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
    x.sum().backward().unwrap();
    assert_eq!(x.grad().data(), &[1.0; 4]);

    let g = Graph::<f64>::new();
    let x = g.variable(Array::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
    let y = g.variable(Array::from_rows(&[[5.0, -6.0], [7.0, 0.5]]));
    x.mul(&y).unwrap().sum().backward().unwrap();
    assert_eq!(x.grad(), y.value());
}

#[test]
fn composite_gradcheck() {
    let inputs = [random(&[4, 3], 6), random(&[3, 3], 7), random(&[3], 8)];
    let check = check_inputs::<TensorError, _>(&inputs, DEFAULT_STEP, |_, t| {
        let h = t[0].matmul_t(&t[1])?.add_bias(&t[2])?.gelu();
        let smooth_norm = h.mul(&h)?.add_scalar(1.0).sqrt().sum();
        Ok(h.softplus().log_softmax().mean().add(&smooth_norm)?)
    })
    .unwrap();
    assert!(check.passes(1e-6), "{check:?}");
}

proptest! {
    #[test]
    fn centered_columns_have_zero_mean(rows in 2usize..12, cols in 1usize..6, seed in any::<u64>()) {
        let g = Graph::<f64>::new();
        let c = g.constant(random(&[rows, cols], seed)).center_cols().unwrap().value();
        for j in 0..cols {
            let mean: f64 = (0..rows).map(|i| c.get(i, j)).sum::<f64>() / rows as f64;
            prop_assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>(), scale in 0.0f64..500.0) {
        let g = Graph::<f64>::new();
        let x = random(&[rows, cols], seed).map(|v| v * scale);
        let s = g.constant(x).softmax().value();
        for i in 0..rows {
            let total: f64 = s.row(i).iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grad_reverse_scales_gradient(scale in 0.0f64..4.0, seed in any::<u64>()) {
        let x0 = random(&[2, 3], seed);
        let g = Graph::<f64>::new();
        let x = g.variable(x0.clone());
        x.mul(&x).unwrap().sum().backward().unwrap();
        let plain = x.grad();
        let g = Graph::<f64>::new();
        let x = g.variable(x0);
        let r = x.grad_reverse(scale);
        r.mul(&r).unwrap().sum().backward().unwrap();
        for (a, b) in x.grad().data().iter().zip(plain.data()) {
            prop_assert_eq!(*a, -scale * b);
        }
    }
}
