use mind_core::nn::{
    sample_noise, CyclicDirection, ForwardOptions, Modality, ModelConfig, ModelParams, StatsNet, TaskKind,
};
use mind_core::tensor::{Array, Graph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DIMS: [usize; 3] = [47, 5, 6];

fn params(d_k: usize, task: TaskKind, seed: u64) -> ModelParams<f64> {
    let mut cfg = ModelConfig::with_d_k(d_k, DIMS, task);
    cfg.seed = seed;
    ModelParams::new(cfg).unwrap()
}

fn random(rows: usize, cols: usize, seed: u64) -> Array<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array::from_shape_vec(&[rows, cols], (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn inputs(n: usize, seed: u64) -> [Array<f64>; 3] {
    [random(n, DIMS[0], seed), random(n, DIMS[1], seed + 1), random(n, DIMS[2], seed + 2)]
}

fn perturb(p: &mut ModelParams<f64>, name: &str) {
    let id = p.store().id_of(name).unwrap_or_else(|| panic!("no parameter {name}"));
    for v in p.store_mut().get_mut(id).data_mut() {
        *v += 0.25;
    }
}

#[test]
fn projection_shape_and_identity() {
    let p = params(64, TaskKind::Regression, 0);
    let g = Graph::new();
    let net = p.bind(&g);
    let z = net.project_input(&g.constant(random(4, 47, 1)), Modality::Visual).unwrap();
    assert_eq!(z.shape(), vec![4, 64]);

    // d_m = d_k with identity weight and zero bias passes input through.
    let mut cfg = ModelConfig::with_d_k(5, [5, 5, 5], TaskKind::Regression);
    cfg.seed = 3;
    let mut q = ModelParams::<f64>::new(cfg).unwrap();
    let w = q.projection(Modality::Acoustic).weight;
    *q.store_mut().get_mut(w) = Array::eye(5);
    let g = Graph::new();
    let x = random(3, 5, 2);
    let z = q.bind(&g).project_input(&g.constant(x.clone()), Modality::Acoustic).unwrap();
    assert_eq!(z.value(), x);
}

#[test]
fn projection_weights_receive_gradient() {
    let p = params(8, TaskKind::Regression, 0);
    let g = Graph::new();
    let net = p.bind(&g);
    net.project_input(&g.constant(random(4, 47, 1)), Modality::Visual)
        .unwrap()
        .sum()
        .backward()
        .unwrap();
    let w = p.projection(Modality::Visual).weight;
    let grad = g.param_grads().into_iter().find(|(id, _)| *id == w).unwrap().1;
    assert!(grad.data().iter().any(|v| *v != 0.0));
}

#[test]
fn shared_encoder_is_shared_and_private_encoders_are_not() {
    let base = params(8, TaskKind::Regression, 0);
    let z = random(5, 8, 9);
    let encode = |p: &ModelParams<f64>| {
        let g = Graph::new();
        let net = p.bind(&g);
        let zt = g.constant(z.clone());
        let s = net.encode_shared(&zt).unwrap().value();
        let pv = net.encode_private(&zt, Modality::Visual).unwrap().value();
        let pa = net.encode_private(&zt, Modality::Acoustic).unwrap().value();
        (s, pv, pa)
    };
    let (s0, pv0, pa0) = encode(&base);

    let mut shared = base.clone();
    perturb(&mut shared, "shared.weight");
    let (s1, pv1, pa1) = encode(&shared);
    assert_ne!(s0, s1);
    assert_eq!((pv0.clone(), pa0.clone()), (pv1, pa1));

    let mut private_v = base.clone();
    perturb(&mut private_v, "private.V.weight");
    let (s2, pv2, pa2) = encode(&private_v);
    assert_eq!(s0, s2);
    assert_ne!(pv0, pv2);
    assert_eq!(pa0, pa2);
}

#[test]
fn zero_input_and_zero_bias_encode_to_zero() {
    let p = params(8, TaskKind::Regression, 0);
    for n in [1, 3, 17] {
        let g = Graph::new();
        let s = p.bind(&g).encode_shared(&g.constant(Array::zeros(&[n, 8]))).unwrap();
        assert_eq!(s.shape(), vec![n, 8]);
        assert!(s.value().data().iter().all(|v| *v == 0.0));
    }
}

#[test]
fn noise_sampling() {
    let a: Array<f64> = sample_noise(4, 8, &mut ChaCha8Rng::seed_from_u64(1));
    let b: Array<f64> = sample_noise(4, 8, &mut ChaCha8Rng::seed_from_u64(1));
    assert_eq!(a, b);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c: Array<f64> = sample_noise(4, 8, &mut rng);
    let d: Array<f64> = sample_noise(4, 8, &mut rng);
    assert_ne!(c, d);

    let big: Array<f64> = sample_noise(1000, 1000, &mut rng);
    let n = big.len() as f64;
    let mean = big.data().iter().sum::<f64>() / n;
    let var = big.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 0.01, "mean {mean}");
    assert!((var - 1.0).abs() < 0.01, "variance {var}");
}

#[test]
fn statistics_network_shapes() {
    let mut p = params(8, TaskKind::Regression, 0);
    let g = Graph::new();
    let x = g.constant(random(6, 8, 1));
    let y = g.constant(random(6, 8, 2));
    let t = p.bind(&g).statistics_score(&x, &y, StatsNet::Private(Modality::Text)).unwrap();
    assert_eq!(t.shape(), vec![6, 1]);

    let last = p.stats_net(StatsNet::Private(Modality::Text)).last().weight;
    p.store_mut().get_mut(last).data_mut().fill(0.0);
    let g = Graph::new();
    let x = g.constant(random(6, 8, 1));
    let y = g.constant(random(6, 8, 2));
    let t = p.bind(&g).statistics_score(&x, &y, StatsNet::Private(Modality::Text)).unwrap();
    assert!(t.value().data().iter().all(|v| *v == 0.0));
}

#[test]
fn recon_decoder_is_row_wise() {
    let p = params(8, TaskKind::Regression, 0);
    let parts = [random(5, 8, 1), random(5, 8, 2), random(5, 8, 3)];
    let perm = [3, 0, 4, 1, 2];
    let run = |arrays: &[Array<f64>; 3]| {
        let g = Graph::new();
        let [s, pp, n] = arrays.clone().map(|a| g.constant(a));
        p.bind(&g).decode_recon(&s, &pp, &n, Modality::Visual).unwrap().value()
    };
    let out = run(&parts);
    assert_eq!(out.shape(), &[5, 8]);
    let permuted = run(&parts.clone().map(|a| a.select_rows(&perm)));
    assert_eq!(permuted, out.select_rows(&perm));
}

#[test]
fn cyclic_decoder_shapes_and_separation() {
    let p = params(8, TaskKind::Regression, 0);
    let run = |p: &ModelParams<f64>, m: Modality| {
        let g = Graph::new();
        let net = p.bind(&g);
        let to_n = net
            .decode_cyclic(&g.constant(random(3, 16, 1)), CyclicDirection::InfoToNoise, m)
            .unwrap()
            .value();
        let to_f = net
            .decode_cyclic(&g.constant(random(3, 8, 2)), CyclicDirection::NoiseToInfo, m)
            .unwrap()
            .value();
        (to_n, to_f)
    };
    let (n_v, f_v) = run(&p, Modality::Visual);
    assert_eq!(n_v.shape(), &[3, 8]);
    assert_eq!(f_v.shape(), &[3, 16]);

    let mut q = p.clone();
    perturb(&mut q, "cyc.noise_to_info.V.0.weight");
    assert_ne!(run(&q, Modality::Visual).1, f_v);
    assert_eq!(run(&q, Modality::Acoustic), run(&p, Modality::Acoustic));
}

#[test]
fn noise_branch_does_not_reach_the_prediction() {
    let p = params(8, TaskKind::Regression, 0);
    let x = inputs(6, 10);
    let opts = ForwardOptions::default();
    let run = |noise_seed: u64| {
        let g = Graph::new();
        let set = p
            .bind(&g)
            .forward_full(&x, &mut ChaCha8Rng::seed_from_u64(noise_seed), &opts)
            .unwrap();
        (set.y_hat.value(), set.y_noise.value(), set.n[0].value())
    };
    let (y1, yn1, n1) = run(1);
    let (y2, yn2, n2) = run(2);
    assert_eq!(y1.shape(), &[6, 1]);
    assert_eq!(y1, y2);
    assert_ne!(n1, n2);
    assert_ne!(yn1, yn2);

    let mut q = p.clone();
    perturb(&mut q, "private.T.weight");
    let g = Graph::new();
    let y3 = q.bind(&g).predict(&x, &opts).unwrap().y_hat.value();
    assert_ne!(y3, y1, "P_T still feeds fusion");
    perturb(&mut q, "noise_head.0.weight");
    let g = Graph::new();
    assert_eq!(q.bind(&g).predict(&x, &opts).unwrap().y_hat.value(), y3);
}

#[test]
fn noise_predict_reversal_contract() {
    let p = params(8, TaskKind::Classification { classes: 3 }, 0);
    let n_in = [random(4, 8, 1), random(4, 8, 2), random(4, 8, 3)];
    let run = |grl: Option<f64>| {
        let g = Graph::new();
        let n = n_in.clone().map(|a| g.variable(a));
        let y = p.bind(&g).noise_predict(&n, grl).unwrap();
        let value = y.value();
        y.mul(&y).unwrap().sum().backward().unwrap();
        let head: Vec<_> = g.param_grads().into_iter().map(|(_, a)| a).collect();
        (value, n.map(|t| t.grad()), head)
    };
    let (v0, dn0, head0) = run(None);
    let (v1, dn1, head1) = run(Some(1.0));
    assert_eq!(v0.shape(), &[4, 3]);
    assert_eq!(v0, v1);
    for (a, b) in dn0.iter().zip(&dn1) {
        assert_eq!(*a, b.map(|v| -v));
    }
    assert_eq!(head0, head1);
}

#[test]
fn full_pass_shapes_determinism_and_coverage() {
    let p = params(8, TaskKind::Regression, 0);
    let x = inputs(5, 20);
    let opts = ForwardOptions::default();
    let g = Graph::new();
    let set = p.bind(&g).forward_full(&x, &mut ChaCha8Rng::seed_from_u64(4), &opts).unwrap();
    for m in 0..3 {
        for t in [&set.z[m], &set.s[m], &set.p[m], &set.n[m], &set.z_hat[m]] {
            assert_eq!(t.shape(), vec![5, 8]);
        }
        assert_eq!(set.g[m].shape(), vec![5, 8]);
        assert_eq!(set.f[m].shape(), vec![5, 16]);
    }

    let g2 = Graph::new();
    let again = p.bind(&g2).forward_full(&x, &mut ChaCha8Rng::seed_from_u64(4), &opts).unwrap();
    assert_eq!(set.y_hat.value(), again.y_hat.value());
    assert_eq!(set.n[2].value(), again.n[2].value());
}

#[test]
fn wrong_feature_width_is_reported() {
    let p = params(8, TaskKind::Regression, 0);
    let g = Graph::new();
    let err = p
        .bind(&g)
        .project_input(&g.constant(random(2, 46, 0)), Modality::Visual)
        .unwrap_err()
        .to_string();
    assert!(err.contains("46") && err.contains("47"), "{err}");
}
