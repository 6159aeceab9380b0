//! The seven loss terms and their weighted combination.
//!
//! Every term is built on the autodiff graph so one backward pass from the
//! weighted total reaches all parameter groups.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{BoundModel, CyclicDirection, DisentangledSet, ForwardOptions, Modality, ModelError, StatsNet};
use crate::scalar::Scalar;
use crate::tensor::{Array, Tensor, TensorError};

/// Guard added to cross-correlation denominators.
pub const CORR_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTerm {
    Task,
    #[serde(rename = "np")]
    NoisePred,
    Info,
    Cons,
    Diff,
    Recon,
    Cyr,
}

impl LossTerm {
    pub const ALL: [LossTerm; 7] = [
        LossTerm::Task,
        LossTerm::NoisePred,
        LossTerm::Info,
        LossTerm::Cons,
        LossTerm::Diff,
        LossTerm::Recon,
        LossTerm::Cyr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossTerm::Task => "task",
            LossTerm::NoisePred => "np",
            LossTerm::Info => "info",
            LossTerm::Cons => "cons",
            LossTerm::Diff => "diff",
            LossTerm::Recon => "recon",
            LossTerm::Cyr => "cyr",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LossTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossTerm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LossTerm::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown loss term {s:?}"))
    }
}

/// The four weights of the composite objective plus the Barlow Twins
/// off-diagonal weight. `lambda_bt = None` means "use d_k".
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub lambda_bt: Option<f64>,
}

/// β and γ are scaled down by powers of ten until their weighted gradient
/// norm at initialization is within 10× of the task gradient on the default
/// synthetic task (`λ_BT = d_k` inflates the raw consistency term).
impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 1e-4,
            gamma: 0.1,
            lambda: 1.0,
            lambda_bt: None,
        }
    }
}

impl LossWeights {
    pub fn lambda_bt_for(&self, d_k: usize) -> f64 {
        self.lambda_bt.unwrap_or(d_k as f64)
    }

    /// Weight multiplying `term` in the total.
    pub fn weight(&self, term: LossTerm) -> f64 {
        match term {
            LossTerm::Task | LossTerm::NoisePred => 1.0,
            LossTerm::Info => self.alpha,
            LossTerm::Cons => self.beta,
            LossTerm::Diff => self.gamma,
            LossTerm::Recon | LossTerm::Cyr => self.lambda,
        }
    }
}

/// Which terms are computed. A disabled term is logged as exactly 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossFlags {
    enabled: [bool; 7],
}

impl Default for LossFlags {
    fn default() -> Self {
        Self { enabled: [true; 7] }
    }
}

impl LossFlags {
    pub fn only(term: LossTerm) -> Self {
        let mut enabled = [false; 7];
        enabled[term.index()] = true;
        Self { enabled }
    }

    pub fn is_enabled(&self, term: LossTerm) -> bool {
        self.enabled[term.index()]
    }

    pub fn set(&mut self, term: LossTerm, on: bool) {
        self.enabled[term.index()] = on;
    }

    pub fn without(mut self, term: LossTerm) -> Self {
        self.set(term, false);
        self
    }
}

/// Raw loss values of one step with the weights that combined them.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub task: f64,
    pub np: f64,
    pub info: f64,
    pub cons: f64,
    pub diff: f64,
    pub recon: f64,
    pub cyr: f64,
    /// Cyclic reconstruction before batch averaging and width normalization.
    pub cyr_raw: f64,
    pub total: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub lambda_bt: f64,
}

impl LossBreakdown {
    pub fn term(&self, term: LossTerm) -> f64 {
        match term {
            LossTerm::Task => self.task,
            LossTerm::NoisePred => self.np,
            LossTerm::Info => self.info,
            LossTerm::Cons => self.cons,
            LossTerm::Diff => self.diff,
            LossTerm::Recon => self.recon,
            LossTerm::Cyr => self.cyr,
        }
    }

    fn term_mut(&mut self, term: LossTerm) -> &mut f64 {
        match term {
            LossTerm::Task => &mut self.task,
            LossTerm::NoisePred => &mut self.np,
            LossTerm::Info => &mut self.info,
            LossTerm::Cons => &mut self.cons,
            LossTerm::Diff => &mut self.diff,
            LossTerm::Recon => &mut self.recon,
            LossTerm::Cyr => &mut self.cyr,
        }
    }

    /// `task + np + α·info + β·cons + γ·diff + λ·(recon + cyr)` from the logged values.
    pub fn recomputed_total(&self) -> f64 {
        self.task
            + self.np
            + self.alpha * self.info
            + self.beta * self.cons
            + self.gamma * self.diff
            + self.lambda * (self.recon + self.cyr)
    }
}

/// Supervision targets for one batch.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    Scores(Vec<f64>),
    Classes { labels: Vec<usize>, classes: usize },
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Scores(v) => v.len(),
            Targets::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Uniform random permutation of `0..n` without fixed points, by rejection.
pub fn derangement<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<usize>, TensorError> {
    if n < 2 {
        return Err(TensorError::BatchSize { op: "derangement", n });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return Ok(perm);
        }
    }
}

/// Jensen-Shannon MI lower bound with the marginal pairs given by `perm`:
/// `mean(-sp(-T(x_i, y_i))) - mean(sp(T(x_i, y_perm(i))))`.
pub fn mi_jsd_estimate_with<'g, T: Scalar>(
    net: &BoundModel<'g, '_, T>,
    x: &Tensor<'g, T>,
    y: &Tensor<'g, T>,
    which: StatsNet,
    perm: &[usize],
) -> Result<Tensor<'g, T>, ModelError> {
    let n = y.with_value(|a| a.rows());
    if n < 2 {
        return Err(TensorError::BatchSize { op: "mi_jsd_estimate", n }.into());
    }
    let joint = net.statistics_score(x, y, which)?;
    let marginal = net.statistics_score(x, &y.select_rows(perm)?, which)?;
    let joint_term = joint.neg().softplus().neg().mean();
    let marginal_term = marginal.softplus().mean();
    Ok(joint_term.sub(&marginal_term)?)
}

pub fn mi_jsd_estimate<'g, T: Scalar, R: Rng + ?Sized>(
    net: &BoundModel<'g, '_, T>,
    x: &Tensor<'g, T>,
    y: &Tensor<'g, T>,
    which: StatsNet,
    rng: &mut R,
) -> Result<Tensor<'g, T>, ModelError> {
    let n = y.with_value(|a| a.rows());
    let perm = derangement(n, rng)?;
    mi_jsd_estimate_with(net, x, y, which, &perm)
}

/// Marginal permutations for the nine estimator terms, drawn in the order
/// S_V, S_A, S_T, P_V, P_A, P_T, N_V, N_A, N_T.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoPermutations {
    pub invariant: [Vec<usize>; 3],
    pub private: [Vec<usize>; 3],
    pub noise: [Vec<usize>; 3],
}

impl InfoPermutations {
    pub fn sample<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self, TensorError> {
        let mut draw = || -> Result<[Vec<usize>; 3], TensorError> {
            Ok([derangement(n, rng)?, derangement(n, rng)?, derangement(n, rng)?])
        };
        Ok(Self {
            invariant: draw()?,
            private: draw()?,
            noise: draw()?,
        })
    }
}

/// `Σ -Î(Z_V⊕Z_A⊕Z_T; S_m) + Σ -Î(Z_m; P_m) + Σ -Î(G_m; N_m)` over active modalities.
pub fn info_loss<'g, T: Scalar>(
    net: &BoundModel<'g, '_, T>,
    set: &DisentangledSet<'g, T>,
    active: &[Modality],
    perms: &InfoPermutations,
) -> Result<Tensor<'g, T>, ModelError> {
    let n = set.z[0].with_value(|a| a.rows());
    let d = net.params.config().d_k;
    let z_parts = Modality::ALL.map(|m| {
        if active.contains(&m) {
            set.z[m.index()]
        } else {
            net.graph.constant(Array::zeros(&[n, d]))
        }
    });
    let z_all = Tensor::concat(&z_parts)?;
    let mut terms = Vec::with_capacity(3 * active.len());
    for &m in active {
        let i = m.index();
        terms.push(mi_jsd_estimate_with(net, &z_all, &set.s[i], StatsNet::Invariant, &perms.invariant[i])?);
        terms.push(mi_jsd_estimate_with(net, &set.z[i], &set.p[i], StatsNet::Private(m), &perms.private[i])?);
        terms.push(mi_jsd_estimate_with(net, &set.g[i], &set.n[i], StatsNet::Private(m), &perms.noise[i])?);
    }
    Ok(sum_all(net, &terms)?.neg())
}

/// Barlow Twins cross-correlation of two `n×d` views after mean-centering.
pub fn cross_correlation<'g, T: Scalar>(a: &Tensor<'g, T>, b: &Tensor<'g, T>) -> Result<Tensor<'g, T>, ModelError> {
    if a.shape() != b.shape() {
        return Err(TensorError::Shape {
            op: "cross_correlation",
            lhs: a.shape(),
            rhs: b.shape(),
        }
        .into());
    }
    let ac = a.center_cols()?;
    let bc = b.center_cols()?;
    let num = ac.transpose().matmul(&bc)?;
    let na = ac.mul(&ac)?.sum_rows().sqrt();
    let nb = bc.mul(&bc)?.sum_rows().sqrt();
    let den = na.transpose().matmul(&nb)?.add_scalar(T::of(CORR_EPS));
    Ok(num.div(&den)?)
}

/// `Σ_i (1 - C_ii)² + λ_BT · Σ_{i≠j} C_ij²`.
pub fn bt_loss<'g, T: Scalar>(a: &Tensor<'g, T>, b: &Tensor<'g, T>, lambda_bt: f64) -> Result<Tensor<'g, T>, ModelError> {
    let c = cross_correlation(a, b)?;
    let d = c.with_value(|x| x.rows());
    let eye = c.graph().constant(Array::eye(d));
    let diag = c.mul(&eye)?;
    let on = eye.sub(&diag)?.sq_norm();
    let off = c.sub(&diag)?.sq_norm();
    Ok(on.add(&off.scale(T::of(lambda_bt)))?)
}

/// Barlow Twins loss summed over unordered pairs of invariant components.
pub fn cons_loss<'g, T: Scalar>(s: &[Tensor<'g, T>], lambda_bt: f64) -> Result<Tensor<'g, T>, ModelError> {
    let first = s.first().ok_or(TensorError::Empty { op: "cons_loss" })?;
    let mut terms = Vec::new();
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            terms.push(bt_loss(&s[i], &s[j], lambda_bt)?);
        }
    }
    sum_terms(first.graph(), &terms)
}

/// HSIC with inner-product kernels: `(n-1)^{-2} Tr(U K₁ U K₂)`.
///
/// With `K = R Rᵀ` and idempotent centering `U`, the trace equals
/// `‖(U R₁)ᵀ (U R₂)‖²_F`, which avoids building the `n×n` Gram matrices.
pub fn hsic<'g, T: Scalar>(r1: &Tensor<'g, T>, r2: &Tensor<'g, T>) -> Result<Tensor<'g, T>, ModelError> {
    let n = r1.with_value(|a| a.rows());
    let n2 = r2.with_value(|a| a.rows());
    if n != n2 {
        return Err(ModelError::Rows { op: "hsic", lhs: n, rhs: n2 });
    }
    if n < 2 {
        return Err(TensorError::BatchSize { op: "hsic", n }.into());
    }
    let a = r1.center_cols()?;
    let b = r2.center_cols()?;
    let cross = a.transpose().matmul(&b)?;
    let scale = 1.0 / ((n - 1) as f64).powi(2);
    Ok(cross.sq_norm().scale(T::of(scale)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    #[serde(rename = "S")]
    Invariant,
    #[serde(rename = "P")]
    Specific,
    #[serde(rename = "N")]
    Noise,
}

impl Component {
    pub fn tag(self) -> &'static str {
        match self {
            Component::Invariant => "S",
            Component::Specific => "P",
            Component::Noise => "N",
        }
    }
}

pub type ComponentRef = (Component, Modality);

/// Pairs penalized by the difference loss: `(S_m, P_m)`, `(S_m, N_m)`,
/// `(P_m, N_m)` per modality and `(P_a, P_b)` per unordered modality pair.
pub fn diff_pairs(active: &[Modality]) -> Vec<(ComponentRef, ComponentRef)> {
    use Component::*;
    let mut pairs = Vec::new();
    for &m in active {
        pairs.push(((Invariant, m), (Specific, m)));
        pairs.push(((Invariant, m), (Noise, m)));
        pairs.push(((Specific, m), (Noise, m)));
    }
    for (i, &a) in active.iter().enumerate() {
        for &b in &active[i + 1..] {
            pairs.push(((Specific, a), (Specific, b)));
        }
    }
    pairs
}

fn component<'g, T: Scalar>(set: &DisentangledSet<'g, T>, (c, m): ComponentRef) -> Tensor<'g, T> {
    match c {
        Component::Invariant => set.s[m.index()],
        Component::Specific => set.p[m.index()],
        Component::Noise => set.n[m.index()],
    }
}

/// Sum of HSIC over [`diff_pairs`].
pub fn diff_loss<'g, T: Scalar>(set: &DisentangledSet<'g, T>, active: &[Modality]) -> Result<Tensor<'g, T>, ModelError> {
    let terms = diff_pairs(active)
        .into_iter()
        .map(|(a, b)| hsic(&component(set, a), &component(set, b)))
        .collect::<Result<Vec<_>, _>>()?;
    sum_terms(set.h.graph(), &terms)
}

/// `(1/M) Σ_m ‖Z_m - Ẑ_m‖² / d_k`, squared norm summed over features and
/// averaged over the batch.
pub fn recon_loss<'g, T: Scalar>(z: &[Tensor<'g, T>], z_hat: &[Tensor<'g, T>], d_k: usize) -> Result<Tensor<'g, T>, ModelError> {
    let first = z.first().ok_or(TensorError::Empty { op: "recon_loss" })?;
    let mut terms = Vec::with_capacity(z.len());
    for (a, b) in z.iter().zip(z_hat) {
        let n = a.with_value(|x| x.rows());
        terms.push(a.sub(b)?.sq_norm().scale(T::of(1.0 / (n * d_k) as f64)));
    }
    Ok(sum_terms(first.graph(), &terms)?.scale(T::of(1.0 / z.len() as f64)))
}

/// Cyclic reconstruction between `F_m` and `N_m` through reversal layers.
#[derive(Debug, Clone, Copy)]
pub struct CyclicLoss<'g, T: Scalar> {
    /// Batch-averaged, divided by target width; this is what is optimized.
    pub normalized: Tensor<'g, T>,
    /// Plain sum of squared errors.
    pub raw: f64,
}

pub fn cyclic_recon_loss<'g, T: Scalar>(
    net: &BoundModel<'g, '_, T>,
    f: &[Tensor<'g, T>; 3],
    n: &[Tensor<'g, T>; 3],
    active: &[Modality],
    grl_scale: Option<f64>,
) -> Result<CyclicLoss<'g, T>, ModelError> {
    let reverse = |t: &Tensor<'g, T>| match grl_scale {
        Some(s) => t.grad_reverse(T::of(s)),
        None => *t,
    };
    let mut terms = Vec::with_capacity(2 * active.len());
    let mut raw = 0.0;
    for &m in active {
        let i = m.index();
        let rows = f[i].with_value(|a| a.rows());
        let f_width = f[i].with_value(|a| a.cols());
        let n_width = n[i].with_value(|a| a.cols());
        let f_hat = net.decode_cyclic(&reverse(&n[i]), CyclicDirection::NoiseToInfo, m)?;
        let n_hat = net.decode_cyclic(&reverse(&f[i]), CyclicDirection::InfoToNoise, m)?;
        let to_info = f[i].sub(&f_hat)?.sq_norm();
        let to_noise = n[i].sub(&n_hat)?.sq_norm();
        raw += to_info.item().as_f64() + to_noise.item().as_f64();
        terms.push(to_info.scale(T::of(1.0 / (rows * f_width) as f64)));
        terms.push(to_noise.scale(T::of(1.0 / (rows * n_width) as f64)));
    }
    Ok(CyclicLoss {
        normalized: sum_terms(net.graph, &terms)?,
        raw,
    })
}

/// Mean squared error for scores, mean cross-entropy over raw class scores.
pub fn task_loss<'g, T: Scalar>(y_hat: &Tensor<'g, T>, targets: &Targets) -> Result<Tensor<'g, T>, ModelError> {
    let (n, w) = y_hat.with_value(|a| a.dims2())?;
    if n != targets.len() {
        return Err(ModelError::Rows {
            op: "task_loss",
            lhs: n,
            rhs: targets.len(),
        });
    }
    let graph = y_hat.graph();
    match targets {
        Targets::Scores(y) => {
            let y = graph.constant(Array::from_shape_vec(&[n, 1], y.iter().map(|&v| T::of(v)).collect())?);
            Ok(y_hat.sub(&y)?.sq_norm().scale(T::of(1.0 / n as f64)))
        }
        Targets::Classes { labels, classes } => {
            if w != *classes {
                return Err(TensorError::Shape {
                    op: "task_loss",
                    lhs: vec![n, w],
                    rhs: vec![n, *classes],
                }
                .into());
            }
            let mut onehot = Array::zeros(&[n, w]);
            for (i, &l) in labels.iter().enumerate() {
                if l >= w {
                    return Err(ModelError::LabelRange { label: l, classes: w });
                }
                onehot.set(i, l, T::one());
            }
            let onehot = graph.constant(onehot);
            Ok(y_hat.log_softmax().mul(&onehot)?.sum().scale(T::of(-1.0 / n as f64)))
        }
    }
}

/// Same form as [`task_loss`], applied to the noise-branch prediction.
pub fn noise_pred_loss<'g, T: Scalar>(y_noise: &Tensor<'g, T>, targets: &Targets) -> Result<Tensor<'g, T>, ModelError> {
    task_loss(y_noise, targets)
}

/// Loss terms of one step; `None` marks a disabled term.
#[derive(Debug, Clone, Default)]
pub struct LossParts<'g, T: Scalar> {
    pub terms: [Option<Tensor<'g, T>>; 7],
    pub cyr_raw: f64,
}

impl<'g, T: Scalar> LossParts<'g, T> {
    pub fn get(&self, term: LossTerm) -> Option<Tensor<'g, T>> {
        self.terms[term.index()]
    }

    pub fn set(&mut self, term: LossTerm, value: Tensor<'g, T>) {
        self.terms[term.index()] = Some(value);
    }
}

/// Weighted total on the graph plus its logged breakdown. Fails on the first
/// non-finite term.
pub fn total_loss<'g, T: Scalar>(
    parts: &LossParts<'g, T>,
    weights: &LossWeights,
    lambda_bt: f64,
) -> Result<(Option<Tensor<'g, T>>, LossBreakdown), ModelError> {
    let mut bd = LossBreakdown {
        cyr_raw: parts.cyr_raw,
        alpha: weights.alpha,
        beta: weights.beta,
        gamma: weights.gamma,
        lambda: weights.lambda,
        lambda_bt,
        ..Default::default()
    };
    for term in LossTerm::ALL {
        if let Some(t) = parts.get(term) {
            let v = t.item().as_f64();
            if !v.is_finite() {
                return Err(ModelError::NonFinite(format!("loss term {term}")));
            }
            *bd.term_mut(term) = v;
        }
    }
    // Same association order as LossBreakdown::recomputed_total.
    let weighted = |term: LossTerm| parts.get(term).map(|t| t.scale(T::of(weights.weight(term))));
    let recon_cyr = match (parts.get(LossTerm::Recon), parts.get(LossTerm::Cyr)) {
        (Some(r), Some(c)) => Some(r.add(&c)?.scale(T::of(weights.lambda))),
        (Some(r), None) => Some(r.scale(T::of(weights.lambda))),
        (None, Some(c)) => Some(c.scale(T::of(weights.lambda))),
        (None, None) => None,
    };
    let ordered = [
        parts.get(LossTerm::Task),
        parts.get(LossTerm::NoisePred),
        weighted(LossTerm::Info),
        weighted(LossTerm::Cons),
        weighted(LossTerm::Diff),
        recon_cyr,
    ];
    let mut total: Option<Tensor<'g, T>> = None;
    for t in ordered.into_iter().flatten() {
        total = Some(match total {
            Some(acc) => acc.add(&t)?,
            None => t,
        });
    }
    bd.total = total.map_or(0.0, |t| t.item().as_f64());
    if !bd.total.is_finite() {
        return Err(ModelError::NonFinite("total loss".into()));
    }
    Ok((total, bd))
}

/// Builds every enabled term for one forward pass.
pub fn compute_parts<'g, T: Scalar, R: Rng + ?Sized>(
    net: &BoundModel<'g, '_, T>,
    set: &DisentangledSet<'g, T>,
    targets: &Targets,
    opts: &ForwardOptions,
    flags: &LossFlags,
    lambda_bt: f64,
    rng: &mut R,
) -> Result<LossParts<'g, T>, ModelError> {
    let active = opts.active_modalities();
    let d_k = net.params.config().d_k;
    let mut parts = LossParts::default();
    if flags.is_enabled(LossTerm::Task) {
        parts.set(LossTerm::Task, task_loss(&set.y_hat, targets)?);
    }
    if flags.is_enabled(LossTerm::NoisePred) {
        parts.set(LossTerm::NoisePred, noise_pred_loss(&set.y_noise, targets)?);
    }
    if flags.is_enabled(LossTerm::Info) && !active.is_empty() {
        let n = set.z[0].with_value(|a| a.rows());
        let perms = InfoPermutations::sample(n, rng)?;
        parts.set(LossTerm::Info, info_loss(net, set, &active, &perms)?);
    }
    if flags.is_enabled(LossTerm::Cons) && active.len() >= 2 {
        let s: Vec<_> = active.iter().map(|m| set.s[m.index()]).collect();
        parts.set(LossTerm::Cons, cons_loss(&s, lambda_bt)?);
    }
    if flags.is_enabled(LossTerm::Diff) && !active.is_empty() {
        parts.set(LossTerm::Diff, diff_loss(set, &active)?);
    }
    if flags.is_enabled(LossTerm::Recon) && !active.is_empty() {
        let z: Vec<_> = active.iter().map(|m| set.z[m.index()]).collect();
        let z_hat: Vec<_> = active.iter().map(|m| set.z_hat[m.index()]).collect();
        parts.set(LossTerm::Recon, recon_loss(&z, &z_hat, d_k)?);
    }
    if flags.is_enabled(LossTerm::Cyr) && !active.is_empty() {
        let cyc = cyclic_recon_loss(net, &set.f, &set.n, &active, opts.grl_scale)?;
        parts.cyr_raw = cyc.raw;
        parts.set(LossTerm::Cyr, cyc.normalized);
    }
    Ok(parts)
}

fn sum_terms<'g, T: Scalar>(graph: &'g crate::tensor::Graph<T>, terms: &[Tensor<'g, T>]) -> Result<Tensor<'g, T>, ModelError> {
    let mut it = terms.iter();
    let Some(first) = it.next() else {
        return Ok(graph.constant(Array::scalar(T::zero())));
    };
    let mut acc = *first;
    for t in it {
        acc = acc.add(t)?;
    }
    Ok(acc)
}

fn sum_all<'g, T: Scalar>(net: &BoundModel<'g, '_, T>, terms: &[Tensor<'g, T>]) -> Result<Tensor<'g, T>, ModelError> {
    sum_terms(net.graph, terms)
}
