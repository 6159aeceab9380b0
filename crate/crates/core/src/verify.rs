//! Self-check suite: finite-difference gradient checks of every loss term,
//! a brute-force HSIC comparison, estimator bounds, the Barlow Twins identity
//! case and the gradient-reversal contract.
//!
//! The oracles here are deliberately naive (explicit centering matrices,
//! Gram matrices, per-coordinate central differences) so that they share no
//! structure with the code under test.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::gradcheck::{all_coords, check_inputs, check_params, GradCheck, DEFAULT_STEP};
use crate::losses::{
    bt_loss, cons_loss, cross_correlation, cyclic_recon_loss, diff_loss, info_loss, mi_jsd_estimate, recon_loss,
    task_loss, InfoPermutations, LossTerm, Targets,
};
use crate::nn::{CyclicDirection, ForwardOptions, Modality, ModelConfig, ModelError, ModelParams, StatsNet, TaskKind};
use crate::tensor::{Array, Graph, ParamId, Tensor, TensorError};

/// HSIC implementation under test; swappable so the harness itself can be
/// shown to catch a wrong one.
pub type HsicFn = for<'g> fn(&Tensor<'g, f64>, &Tensor<'g, f64>) -> Result<Tensor<'g, f64>, ModelError>;

#[derive(Clone, Copy)]
pub struct VerifyHooks {
    pub hsic: HsicFn,
}

impl Default for VerifyHooks {
    fn default() -> Self {
        Self {
            hsic: crate::losses::hsic::<f64>,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifySettings {
    /// Random parameter/input draws per loss gradient check.
    pub grad_draws: usize,
    pub grad_tol: f64,
    pub hsic_instances: usize,
    pub hsic_tol: f64,
    pub mi_draws: usize,
    pub seed: u64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        Self {
            grad_draws: 20,
            grad_tol: 1e-4,
            hsic_instances: 100,
            hsic_tol: 1e-10,
            mi_draws: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let w = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        let _ = writeln!(s, "{:<w$}  {:<6}  detail", "check", "result");
        for c in &self.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{:<w$}  {:<6}  {}", c.name, verdict, c.detail);
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        let _ = writeln!(s, "{} checks, {failed} failed", self.checks.len());
        s
    }
}

fn normal(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array<f64> {
    Array::from_shape_vec(&[rows, cols], (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect())
        .expect("positive dims")
}

/// A small model and one batch for gradient checks.
pub struct GradFixture {
    pub params: ModelParams<f64>,
    pub inputs: [Array<f64>; 3],
    pub noise: [Array<f64>; 3],
    pub targets: Targets,
    pub perms: InfoPermutations,
    pub lambda_bt: f64,
}

impl GradFixture {
    /// Even draws use a regression head, odd draws a 3-class head.
    pub fn draw(draw: u64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ draw.wrapping_mul(0x2545_F491_4F6C_DD1D));
        let n = 6;
        let task = if draw % 2 == 0 {
            TaskKind::Regression
        } else {
            TaskKind::Classification { classes: 3 }
        };
        let mut cfg = ModelConfig::with_d_k(4, [3, 4, 5], task);
        cfg.seed = rng.gen();
        let params = ModelParams::new(cfg).expect("valid fixture config");
        let inputs = [3, 4, 5].map(|d| normal(n, d, &mut rng));
        let noise = [0, 1, 2].map(|_| normal(n, 4, &mut rng));
        let targets = match task {
            TaskKind::Regression => Targets::Scores((0..n).map(|_| rng.gen_range(-3.0..3.0)).collect()),
            TaskKind::Classification { classes } => Targets::Classes {
                labels: (0..n).map(|_| rng.gen_range(0..classes)).collect(),
                classes,
            },
        };
        let perms = InfoPermutations::sample(n, &mut rng).expect("n ≥ 2");
        Self {
            params,
            inputs,
            noise,
            targets,
            perms,
            lambda_bt: 4.0,
        }
    }

    /// One loss term on this fixture, with the reversal layers removed so the
    /// analytic gradient is the true derivative.
    pub fn term<'g>(&self, net: &crate::nn::BoundModel<'g, '_, f64>, term: LossTerm) -> Result<Tensor<'g, f64>, ModelError> {
        let opts = ForwardOptions {
            grl_scale: None,
            ..Default::default()
        };
        let set = net.forward_with_noise(&self.inputs, &self.noise, &opts)?;
        let all = Modality::ALL;
        match term {
            LossTerm::Task => task_loss(&set.y_hat, &self.targets),
            LossTerm::NoisePred => task_loss(&set.y_noise, &self.targets),
            LossTerm::Info => info_loss(net, &set, &all, &self.perms),
            LossTerm::Cons => cons_loss(&set.s, self.lambda_bt),
            LossTerm::Diff => diff_loss(&set, &all),
            LossTerm::Recon => recon_loss(&set.z, &set.z_hat, net.params.config().d_k),
            LossTerm::Cyr => Ok(cyclic_recon_loss(net, &set.f, &set.n, &all, None)?.normalized),
        }
    }
}

/// Worst finite-difference check of one loss term over `draws` fixtures,
/// covering every parameter coordinate the term depends on.
pub fn loss_gradcheck(term: LossTerm, draws: usize, seed: u64) -> Result<GradCheck, ModelError> {
    let mut worst: Option<GradCheck> = None;
    for d in 0..draws as u64 {
        let fx = GradFixture::draw(d, seed);
        let graph = Graph::new();
        let reached: Vec<ParamId> = {
            let loss = fx.term(&fx.params.bind(&graph), term)?;
            loss.backward()?;
            graph.param_grads().into_iter().map(|(id, _)| id).collect()
        };
        let coords: Vec<_> = all_coords(&fx.params)
            .into_iter()
            .filter(|(id, _)| reached.contains(id))
            .collect();
        let r = check_params(&fx.params, &coords, DEFAULT_STEP, |net| fx.term(net, term))?;
        if worst.map_or(true, |w| r.rel_error > w.rel_error) {
            worst = Some(r);
        }
    }
    Ok(worst.expect("at least one draw"))
}

/// `(n-1)^{-2} Tr(U K₁ U K₂)` with explicit `U = I - 11ᵀ/n` and `K = R Rᵀ`.
pub fn hsic_bruteforce(r1: &Array<f64>, r2: &Array<f64>) -> f64 {
    let n = r1.rows();
    let gram = |r: &Array<f64>| {
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                k[i][j] = (0..r.cols()).map(|c| r.get(i, c) * r.get(j, c)).sum();
            }
        }
        k
    };
    let mul = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| {
        let mut c = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                c[i][j] = (0..n).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        c
    };
    let u: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j)) - 1.0 / n as f64).collect())
        .collect();
    let prod = mul(&mul(&u, &gram(r1)), &mul(&u, &gram(r2)));
    (0..n).map(|i| prod[i][i]).sum::<f64>() / ((n - 1) as f64).powi(2)
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn failed(name: &str, e: impl std::fmt::Display) -> CheckResult {
    check(name, false, format!("error: {e}"))
}

fn hsic_check(settings: &VerifySettings, hooks: &VerifyHooks) -> Result<CheckResult, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x4853_4943);
    let mut worst = 0.0f64;
    for _ in 0..settings.hsic_instances {
        let n = rng.gen_range(2..=8);
        let (d1, d2) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let a = normal(n, d1, &mut rng);
        let b = normal(n, d2, &mut rng);
        let g = Graph::new();
        let got = (hooks.hsic)(&g.constant(a.clone()), &g.constant(b.clone()))?.item();
        let want = hsic_bruteforce(&a, &b);
        worst = worst.max((got - want).abs() / want.abs().max(1.0));
    }
    Ok(check(
        "hsic_bruteforce",
        worst <= settings.hsic_tol,
        format!("{} instances, max error {worst:.2e}", settings.hsic_instances),
    ))
}

fn hsic_properties(hooks: &VerifyHooks) -> Result<CheckResult, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut ok = true;
    for _ in 0..50 {
        let n = rng.gen_range(2..=10);
        let a = normal(n, 3, &mut rng);
        let b = normal(n, 2, &mut rng);
        let g = Graph::new();
        let (ta, tb) = (g.constant(a.clone()), g.constant(b));
        let ab = (hooks.hsic)(&ta, &tb)?.item();
        let ba = (hooks.hsic)(&tb, &ta)?.item();
        let shifted = (hooks.hsic)(&g.constant(a.map(|v| v + 5.0)), &tb)?.item();
        ok &= ab >= 0.0 && (ab - ba).abs() <= 1e-12 * ab.max(1.0) && (ab - shifted).abs() <= 1e-9 * ab.max(1.0);
    }
    Ok(check(
        "hsic_symmetric_nonnegative",
        ok,
        "symmetry, non-negativity, shift invariance".into(),
    ))
}

fn mi_checks(settings: &VerifySettings) -> Result<[CheckResult; 2], ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x4d49);
    let mut max_est = f64::NEG_INFINITY;
    for _ in 0..settings.mi_draws {
        let mut cfg = ModelConfig::with_d_k(4, [2, 2, 2], TaskKind::Regression);
        cfg.seed = rng.gen();
        let mut params = ModelParams::<f64>::new(cfg)?;
        let gain = 10f64.powf(rng.gen_range(-1.0..1.5));
        scale_stats(&mut params, gain);
        let n = rng.gen_range(2..=12);
        let scale = 10f64.powf(rng.gen_range(-1.0..1.0));
        let x = normal(n, 4, &mut rng).map(|v| v * scale);
        let y = normal(n, 4, &mut rng).map(|v| v * scale);
        let g = Graph::new();
        let net = params.bind(&g);
        let est = mi_jsd_estimate(&net, &g.constant(x), &g.constant(y), StatsNet::Private(Modality::Text), &mut rng)?;
        max_est = max_est.max(est.item());
    }
    let bound = check(
        "mi_jsd_upper_bound",
        max_est <= 0.0,
        format!("{} draws, max estimate {max_est:.3e}", settings.mi_draws),
    );

    let mut cfg = ModelConfig::with_d_k(4, [2, 2, 2], TaskKind::Regression);
    cfg.seed = 3;
    let mut params = ModelParams::<f64>::new(cfg)?;
    scale_stats(&mut params, 0.0);
    let g = Graph::new();
    let x = normal(9, 4, &mut rng);
    let y = normal(9, 4, &mut rng);
    let est = mi_jsd_estimate(
        &params.bind(&g),
        &g.constant(x),
        &g.constant(y),
        StatsNet::Private(Modality::Visual),
        &mut rng,
    )?
    .item();
    let err = (est + 2.0 * std::f64::consts::LN_2).abs();
    let zero = check(
        "mi_jsd_zero_discriminator",
        err <= 1e-12,
        format!("estimate {est:.15}, |est + 2 ln 2| = {err:.1e}"),
    );
    Ok([bound, zero])
}

fn scale_stats(params: &mut ModelParams<f64>, gain: f64) {
    let ids: Vec<ParamId> = params
        .store()
        .iter()
        .filter(|(_, name, _)| name.starts_with("stats."))
        .map(|(id, _, _)| id)
        .collect();
    for id in ids {
        let a = params.store_mut().get_mut(id);
        *a = a.map(|v| v * gain);
    }
}

fn bt_identity() -> Result<CheckResult, ModelError> {
    // centered, mutually orthogonal columns: C = I exactly up to the epsilon guard
    let a = Array::from_rows(&[
        [1.0, 1.0, 1.0],
        [1.0, -1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
    ]);
    let g = Graph::new();
    let t = g.constant(a.clone());
    let c = cross_correlation(&t, &t)?.value();
    let c_err = (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| (c.get(i, j) - f64::from(u8::from(i == j))).abs())
        .fold(0.0, f64::max);
    let loss = bt_loss(&t, &t, 3.0)?.item();
    // rescaling one view does not change correlations
    let loss_scaled = bt_loss(&t, &g.constant(a.map(|v| 7.0 * v - 2.0)), 3.0)?.item();
    let ok = c_err <= 1e-8 && loss.abs() <= 1e-12 && loss_scaled.abs() <= 1e-12;
    Ok(check(
        "bt_identity",
        ok,
        format!("max |C - I| = {c_err:.1e}, loss {loss:.1e}, rescaled {loss_scaled:.1e}"),
    ))
}

fn grl_forward() -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = normal(5, 4, &mut rng).map(|v| v * 1e3);
    let g = Graph::new();
    let x = g.variable(a.clone());
    let same = [1.0, 0.5, 2.0].iter().all(|&s| {
        let y = x.grad_reverse(s).value();
        y.data().iter().zip(a.data()).all(|(p, q)| p.to_bits() == q.to_bits())
    });
    check("grl_forward_identity", same, "bitwise identical outputs".into())
}

/// Gradients wrt the noise input and the head parameters, with and without
/// the reversal layer.
fn grl_flip<F>(name: &str, head_prefix: &str, f: F) -> Result<CheckResult, ModelError>
where
    F: for<'g> Fn(&crate::nn::BoundModel<'g, '_, f64>, &Tensor<'g, f64>, Option<f64>) -> Result<Tensor<'g, f64>, ModelError>,
{
    let mut cfg = ModelConfig::with_d_k(4, [3, 3, 3], TaskKind::Regression);
    cfg.seed = 11;
    let params = ModelParams::<f64>::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n_val = normal(6, 4, &mut rng);
    let run = |grl: Option<f64>| -> Result<(Array<f64>, Vec<(String, Array<f64>)>), ModelError> {
        let g = Graph::new();
        let n = g.variable(n_val.clone());
        let loss = f(&params.bind(&g), &n, grl)?;
        loss.backward()?;
        let heads = g
            .param_grads()
            .into_iter()
            .map(|(id, a)| (params.store().name(id).to_string(), a))
            .filter(|(name, _)| name.starts_with(head_prefix))
            .collect();
        Ok((n.grad(), heads))
    };
    let (gn_on, heads_on) = run(Some(1.0))?;
    let (gn_off, heads_off) = run(None)?;
    let flipped = gn_on.data().iter().zip(gn_off.data()).all(|(a, b)| *a == -*b)
        && gn_off.data().iter().any(|&v| v != 0.0);
    let heads_same = !heads_on.is_empty() && heads_on == heads_off;
    Ok(check(
        name,
        flipped && heads_same,
        format!(
            "input gradient flipped: {flipped}; {} head gradients unchanged: {heads_same}",
            heads_on.len()
        ),
    ))
}

fn grl_checks() -> Result<[CheckResult; 2], ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let y: Vec<f64> = (0..6).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let targets = Targets::Scores(y);
    let np = grl_flip("grl_noise_predict", "noise_head.", |net, n, grl| {
        let zeros = net.graph.constant(Array::zeros(&[6, 4]));
        let y_noise = net.noise_predict(&[*n, zeros, n.scale(0.5)], grl)?;
        task_loss(&y_noise, &targets)
    })?;
    let target = normal(6, 8, &mut rng);
    let cyc = grl_flip("grl_decode_cyclic", "cyc.noise_to_info.A.", |net, n, grl| {
        let input = match grl {
            Some(s) => n.grad_reverse(s),
            None => *n,
        };
        let f_hat = net.decode_cyclic(&input, CyclicDirection::NoiseToInfo, Modality::Acoustic)?;
        Ok(net.graph.constant(target.clone()).sub(&f_hat)?.sq_norm())
    })?;
    Ok([np, cyc])
}

fn primitive_checks(settings: &VerifySettings) -> Result<CheckResult, TensorError> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed ^ 0x5052);
    type Prim = for<'g> fn(&'g Graph<f64>, &[Tensor<'g, f64>]) -> Result<Tensor<'g, f64>, TensorError>;
    let prims: [(&str, Prim); 8] = [
        ("matmul", |_, v| Ok(v[0].matmul(&v[1])?.gelu().sum())),
        ("matmul_t", |_, v| Ok(v[0].matmul_t(&v[2])?.softplus().mean())),
        ("softmax", |_, v| Ok(v[0].softmax().mul(&v[0])?.sum())),
        ("log_softmax", |_, v| Ok(v[0].log_softmax().sq_norm())),
        ("center_cols", |_, v| Ok(v[0].center_cols()?.transpose().matmul(&v[0])?.sq_norm())),
        ("sqrt_div", |_, v| {
            let den = v[0].mul(&v[0])?.sum_rows().add_scalar(1.0).sqrt();
            Ok(v[0].div(&den.select_rows(&[0, 0, 0, 0])?)?.sum())
        }),
        ("concat_select_trace", |_, v| {
            let c = Tensor::concat(&[v[0], v[2]])?.select_rows(&[3, 1, 0])?;
            Ok(c.matmul_t(&c)?.trace()?.log())
        }),
        ("add_bias", |g, v| {
            let b = g.constant(Array::from_rows(&[[0.5, -1.0, 2.0]]));
            Ok(v[0].add_bias(&b)?.gelu().sq_norm())
        }),
    ];
    let mut worst = 0.0f64;
    let mut worst_name = "";
    for (name, f) in prims {
        let inputs = [normal(4, 3, &mut rng), normal(3, 5, &mut rng), normal(4, 3, &mut rng)];
        let r = check_inputs(&inputs, DEFAULT_STEP, f)?;
        if r.rel_error >= worst {
            worst = r.rel_error;
            worst_name = name;
        }
    }
    Ok(check(
        "grad_primitives",
        worst <= settings.grad_tol,
        format!("8 compositions, worst rel error {worst:.2e} ({worst_name})"),
    ))
}

pub fn run_verify(settings: &VerifySettings, hooks: &VerifyHooks) -> VerifyReport {
    let mut checks = Vec::new();
    for term in LossTerm::ALL {
        let name = format!("grad_{term}");
        checks.push(match loss_gradcheck(term, settings.grad_draws, settings.seed) {
            Ok(r) => check(
                &name,
                r.passes(settings.grad_tol),
                format!(
                    "{} draws, worst rel error {:.2e} over {} coordinates",
                    settings.grad_draws, r.rel_error, r.checked
                ),
            ),
            Err(e) => failed(&name, e),
        });
    }
    checks.push(primitive_checks(settings).unwrap_or_else(|e| failed("grad_primitives", e)));
    checks.push(hsic_check(settings, hooks).unwrap_or_else(|e| failed("hsic_bruteforce", e)));
    checks.push(hsic_properties(hooks).unwrap_or_else(|e| failed("hsic_symmetric_nonnegative", e)));
    match mi_checks(settings) {
        Ok(r) => checks.extend(r),
        Err(e) => checks.push(failed("mi_jsd", e)),
    }
    checks.push(bt_identity().unwrap_or_else(|e| failed("bt_identity", e)));
    checks.push(grl_forward());
    match grl_checks() {
        Ok(r) => checks.extend(r),
        Err(e) => checks.push(failed("grl_sign", e)),
    }
    VerifyReport { checks }
}
