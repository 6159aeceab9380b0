use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::params::{LayerBuilder, Linear, Mlp, ParamStore};
use super::{Modality, ModelConfig, ModelError};
use crate::scalar::Scalar;
use crate::tensor::{Array, Graph, Tensor};

/// Which statistics network scores a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsNet {
    /// `ω_S`, shared by the three invariant terms.
    Invariant,
    /// `ω_{P_m}`, shared by the private and noise terms of modality `m`.
    Private(Modality),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CyclicDirection {
    /// `D_C(·; θ_{F_m})`: from `F_m` (2·d_k) back to `N_m` (d_k).
    InfoToNoise,
    /// `D_C(·; θ_{N_m})`: from `N_m` (d_k) back to `F_m` (2·d_k).
    NoiseToInfo,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Layout {
    projections: [Linear; 3],
    shared: Linear,
    private: [Linear; 3],
    stats_invariant: Mlp,
    stats_private: [Mlp; 3],
    recon: Vec<Mlp>,
    noise_to_info: [Mlp; 3],
    info_to_noise: [Mlp; 3],
    fusion: Linear,
    head: Mlp,
    noise_head: Mlp,
}

/// All trainable parameters plus the config that shaped them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T: Scalar> {
    config: ModelConfig,
    store: ParamStore<T>,
    layout: Layout,
}

impl<T: Scalar> ModelParams<T> {
    /// Seed-deterministic initialization from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut store = ParamStore::new();
        let layout = {
            let mut b = LayerBuilder {
                store: &mut store,
                rng: ChaCha8Rng::seed_from_u64(config.seed),
            };
            let d = config.d_k;
            let out = config.task.output_width();
            let per_mod = |f: &mut dyn FnMut(Modality) -> Mlp| -> [Mlp; 3] {
                Modality::ALL.map(|m| f(m))
            };
            let projections = Modality::ALL.map(|m| b.linear(&format!("proj.{m}"), config.input_dims[m.index()], d));
            let shared = b.linear("shared", d, d);
            let private = Modality::ALL.map(|m| b.linear(&format!("private.{m}"), d, d));
            let stats_invariant = b.mlp("stats.inv", 4 * d, config.stats_hidden, config.stats_layers, 1);
            let stats_private = per_mod(&mut |m| {
                b.mlp(&format!("stats.{m}"), 2 * d, config.stats_hidden, config.stats_layers, 1)
            });
            let recon = if config.per_modality_recon {
                Modality::ALL
                    .iter()
                    .map(|m| b.mlp(&format!("recon.{m}"), 3 * d, d, 1, d))
                    .collect()
            } else {
                vec![b.mlp("recon", 3 * d, d, 1, d)]
            };
            let noise_to_info = per_mod(&mut |m| b.mlp(&format!("cyc.noise_to_info.{m}"), d, d, 1, 2 * d));
            let info_to_noise = per_mod(&mut |m| b.mlp(&format!("cyc.info_to_noise.{m}"), 2 * d, d, 1, d));
            let fusion = b.linear("fusion", 6 * d, d);
            let head = b.mlp("head", d, config.head_hidden, config.head_layers, out);
            let noise_head = b.mlp("noise_head", 3 * d, config.head_hidden, config.head_layers, out);
            Layout {
                projections,
                shared,
                private,
                stats_invariant,
                stats_private,
                recon,
                noise_to_info,
                info_to_noise,
                fusion,
                head,
                noise_head,
            }
        };
        Ok(Self { config, store, layout })
    }

    /// Rebuilds the parameter set from a config and arrays stored in layout order.
    pub fn from_parts(config: ModelConfig, arrays: Vec<(String, Array<T>)>) -> Result<Self, ModelError> {
        let mut params = Self::new(config)?;
        if arrays.len() != params.store.len() {
            return Err(ModelError::Config(format!(
                "expected {} parameter groups, found {}",
                params.store.len(),
                arrays.len()
            )));
        }
        for (id, (name, value)) in params.store.ids().collect::<Vec<_>>().into_iter().zip(arrays) {
            let slot = params.store.get_mut(id);
            if slot.shape() != value.shape() {
                return Err(ModelError::Config(format!(
                    "parameter {name}: shape {:?} does not match {:?}",
                    value.shape(),
                    slot.shape()
                )));
            }
            *slot = value;
        }
        Ok(params)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn store(&self) -> &ParamStore<T> {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.store
    }

    pub fn num_scalars(&self) -> usize {
        self.store.num_scalars()
    }

    pub fn projection(&self, m: Modality) -> &Linear {
        &self.layout.projections[m.index()]
    }

    pub fn shared_encoder(&self) -> &Linear {
        &self.layout.shared
    }

    pub fn private_encoder(&self, m: Modality) -> &Linear {
        &self.layout.private[m.index()]
    }

    pub fn stats_net(&self, which: StatsNet) -> &Mlp {
        match which {
            StatsNet::Invariant => &self.layout.stats_invariant,
            StatsNet::Private(m) => &self.layout.stats_private[m.index()],
        }
    }

    pub fn cyclic_decoder(&self, dir: CyclicDirection, m: Modality) -> &Mlp {
        match dir {
            CyclicDirection::InfoToNoise => &self.layout.info_to_noise[m.index()],
            CyclicDirection::NoiseToInfo => &self.layout.noise_to_info[m.index()],
        }
    }

    pub fn recon_decoder(&self, m: Modality) -> &Mlp {
        if self.layout.recon.len() == 1 {
            &self.layout.recon[0]
        } else {
            &self.layout.recon[m.index()]
        }
    }

    pub fn fusion(&self) -> &Linear {
        &self.layout.fusion
    }

    pub fn head(&self) -> &Mlp {
        &self.layout.head
    }

    pub fn noise_head(&self) -> &Mlp {
        &self.layout.noise_head
    }

    pub fn bind<'g, 'p>(&'p self, graph: &'g Graph<T>) -> BoundModel<'g, 'p, T> {
        BoundModel { graph, params: self }
    }

    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let mut store = ParamStore::new();
        for (_, name, v) in self.store.iter() {
            store.add(name, v.cast());
        }
        ModelParams {
            config: self.config.clone(),
            store,
            layout: self.layout.clone(),
        }
    }
}

/// I.i.d. standard normal `n×d` sample.
pub fn sample_noise<T: Scalar, R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Array<T> {
    let data = (0..n * d)
        .map(|_| T::of(rng.sample::<f64, _>(StandardNormal)))
        .collect();
    Array::from_shape_vec(&[n.max(1), d.max(1)], data).expect("n, d ≥ 1")
}

/// Switches that change how the forward pass is wired.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOptions {
    /// Modalities taking part, in V, A, T order.
    pub active: [bool; 3],
    /// Zero `S_m` at the fusion input.
    pub mute_invariant: bool,
    /// Zero `P_m` at the fusion input.
    pub mute_specific: bool,
    /// Fuse the projected features `Z_m` directly instead of `S_m`, `P_m`.
    pub non_disentangled: bool,
    /// Gradient reversal scale; `None` removes the reversal layers.
    pub grl_scale: Option<f64>,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self {
            active: [true; 3],
            mute_invariant: false,
            mute_specific: false,
            non_disentangled: false,
            grl_scale: Some(1.0),
        }
    }
}

impl ForwardOptions {
    pub fn is_active(&self, m: Modality) -> bool {
        self.active[m.index()]
    }

    pub fn active_modalities(&self) -> Vec<Modality> {
        Modality::ALL.into_iter().filter(|&m| self.is_active(m)).collect()
    }
}

/// Every intermediate of one full forward pass, on one graph.
#[derive(Debug, Clone)]
pub struct DisentangledSet<'g, T: Scalar> {
    pub z: [Tensor<'g, T>; 3],
    pub s: [Tensor<'g, T>; 3],
    pub p: [Tensor<'g, T>; 3],
    pub g: [Tensor<'g, T>; 3],
    pub n: [Tensor<'g, T>; 3],
    pub f: [Tensor<'g, T>; 3],
    pub z_hat: [Tensor<'g, T>; 3],
    pub h: Tensor<'g, T>,
    pub y_hat: Tensor<'g, T>,
    pub y_noise: Tensor<'g, T>,
}

/// Prediction path only: no noise branch.
#[derive(Debug, Clone)]
pub struct Prediction<'g, T: Scalar> {
    pub z: [Tensor<'g, T>; 3],
    pub s: [Tensor<'g, T>; 3],
    pub p: [Tensor<'g, T>; 3],
    pub h: Tensor<'g, T>,
    pub y_hat: Tensor<'g, T>,
}

/// Parameters bound to one graph.
#[derive(Clone, Copy)]
pub struct BoundModel<'g, 'p, T: Scalar> {
    pub graph: &'g Graph<T>,
    pub params: &'p ModelParams<T>,
}

fn rows<T: Scalar>(t: &Tensor<'_, T>) -> usize {
    t.with_value(|a| a.rows())
}

impl<'g, T: Scalar> BoundModel<'g, '_, T> {
    fn store(&self) -> &ParamStore<T> {
        &self.params.store
    }

    fn d_k(&self) -> usize {
        self.params.config.d_k
    }

    fn zeros(&self, n: usize, d: usize) -> Tensor<'g, T> {
        self.graph.constant(Array::zeros(&[n, d]))
    }

    fn check_rows(&self, op: &'static str, parts: &[&Tensor<'g, T>]) -> Result<usize, ModelError> {
        let n = rows(parts[0]);
        for t in &parts[1..] {
            let r = rows(t);
            if r != n {
                return Err(ModelError::Rows { op, lhs: n, rhs: r });
            }
        }
        Ok(n)
    }

    /// Per-modality linear map from raw features to `d_k`.
    pub fn project_input(&self, x: &Tensor<'g, T>, m: Modality) -> Result<Tensor<'g, T>, ModelError> {
        let expected = self.params.config.input_dims[m.index()];
        let got = x.with_value(|a| a.cols());
        if got != expected {
            return Err(ModelError::Config(format!(
                "modality {m} has {got} features, config expects {expected}"
            )));
        }
        self.params.layout.projections[m.index()].forward(self.graph, self.store(), x)
    }

    /// `S_m = GeLU(Z_m·Wᵀ + b)` with the one shared parameter set.
    pub fn encode_shared(&self, z: &Tensor<'g, T>) -> Result<Tensor<'g, T>, ModelError> {
        Ok(self.params.layout.shared.forward(self.graph, self.store(), z)?.gelu())
    }

    /// Private encoder of modality `m`; serves both `P_m` and `N_m`.
    pub fn encode_private(&self, x: &Tensor<'g, T>, m: Modality) -> Result<Tensor<'g, T>, ModelError> {
        Ok(self.params.layout.private[m.index()]
            .forward(self.graph, self.store(), x)?
            .gelu())
    }

    /// `T_ω(x, y)` per row, shape `n×1`.
    pub fn statistics_score(
        &self,
        x: &Tensor<'g, T>,
        y: &Tensor<'g, T>,
        which: StatsNet,
    ) -> Result<Tensor<'g, T>, ModelError> {
        self.check_rows("statistics_score", &[x, y])?;
        let xy = Tensor::concat(&[*x, *y])?;
        self.params.stats_net(which).forward(self.graph, self.store(), &xy)
    }

    /// `Ẑ_m = D_R(S_m ⊕ P_m ⊕ N_m)`.
    pub fn decode_recon(
        &self,
        s: &Tensor<'g, T>,
        p: &Tensor<'g, T>,
        n: &Tensor<'g, T>,
        m: Modality,
    ) -> Result<Tensor<'g, T>, ModelError> {
        self.check_rows("decode_recon", &[s, p, n])?;
        let x = Tensor::concat(&[*s, *p, *n])?;
        self.params.recon_decoder(m).forward(self.graph, self.store(), &x)
    }

    pub fn decode_cyclic(
        &self,
        x: &Tensor<'g, T>,
        dir: CyclicDirection,
        m: Modality,
    ) -> Result<Tensor<'g, T>, ModelError> {
        self.params.cyclic_decoder(dir, m).forward(self.graph, self.store(), x)
    }

    /// `h = FC(S_V ⊕ S_A ⊕ S_T ⊕ P_V ⊕ P_A ⊕ P_T)`, `Ŷ = G(h)`.
    pub fn fuse_predict(
        &self,
        s: &[Tensor<'g, T>; 3],
        p: &[Tensor<'g, T>; 3],
    ) -> Result<(Tensor<'g, T>, Tensor<'g, T>), ModelError> {
        let all: Vec<&Tensor<'g, T>> = s.iter().chain(p.iter()).collect();
        self.check_rows("fuse_predict", &all)?;
        let x = Tensor::concat(&[s[0], s[1], s[2], p[0], p[1], p[2]])?;
        let h = self.params.layout.fusion.forward(self.graph, self.store(), &x)?;
        let y = self.params.layout.head.forward(self.graph, self.store(), &h)?;
        Ok((h, y))
    }

    /// `Ŷ_N = G_N(GRL(N_V ⊕ N_A ⊕ N_T))`; `grl_scale = None` leaves out the reversal.
    pub fn noise_predict(&self, n: &[Tensor<'g, T>; 3], grl_scale: Option<f64>) -> Result<Tensor<'g, T>, ModelError> {
        self.check_rows("noise_predict", &[&n[0], &n[1], &n[2]])?;
        let mut x = Tensor::concat(n)?;
        if let Some(scale) = grl_scale {
            x = x.grad_reverse(T::of(scale));
        }
        self.params.layout.noise_head.forward(self.graph, self.store(), &x)
    }

    fn encode_inputs(
        &self,
        inputs: &[Array<T>; 3],
    ) -> Result<([Tensor<'g, T>; 3], [Tensor<'g, T>; 3], [Tensor<'g, T>; 3]), ModelError> {
        let mut z = Vec::with_capacity(3);
        let mut s = Vec::with_capacity(3);
        let mut p = Vec::with_capacity(3);
        for m in Modality::ALL {
            let x = self.graph.constant(inputs[m.index()].clone());
            let zm = self.project_input(&x, m)?;
            s.push(self.encode_shared(&zm)?);
            p.push(self.encode_private(&zm, m)?);
            z.push(zm);
        }
        Ok((to3(z), to3(s), to3(p)))
    }

    fn fusion_inputs(
        &self,
        z: &[Tensor<'g, T>; 3],
        s: &[Tensor<'g, T>; 3],
        p: &[Tensor<'g, T>; 3],
        opts: &ForwardOptions,
    ) -> ([Tensor<'g, T>; 3], [Tensor<'g, T>; 3]) {
        let n = rows(&z[0]);
        let d = self.d_k();
        let pick = |m: Modality, t: Tensor<'g, T>, muted: bool| {
            if muted || !opts.is_active(m) {
                self.zeros(n, d)
            } else {
                t
            }
        };
        if opts.non_disentangled {
            (
                Modality::ALL.map(|m| pick(m, z[m.index()], false)),
                Modality::ALL.map(|_| self.zeros(n, d)),
            )
        } else {
            (
                Modality::ALL.map(|m| pick(m, s[m.index()], opts.mute_invariant)),
                Modality::ALL.map(|m| pick(m, p[m.index()], opts.mute_specific)),
            )
        }
    }

    /// Prediction path used for evaluation.
    pub fn predict(&self, inputs: &[Array<T>; 3], opts: &ForwardOptions) -> Result<Prediction<'g, T>, ModelError> {
        let (z, s, p) = self.encode_inputs(inputs)?;
        let (fs, fp) = self.fusion_inputs(&z, &s, &p, opts);
        let (h, y_hat) = self.fuse_predict(&fs, &fp)?;
        Ok(Prediction { z, s, p, h, y_hat })
    }

    /// Full pass with caller-supplied noise `G_m`.
    pub fn forward_with_noise(
        &self,
        inputs: &[Array<T>; 3],
        noise: &[Array<T>; 3],
        opts: &ForwardOptions,
    ) -> Result<DisentangledSet<'g, T>, ModelError> {
        let (z, s, p) = self.encode_inputs(inputs)?;
        let mut g = Vec::with_capacity(3);
        let mut nv = Vec::with_capacity(3);
        let mut f = Vec::with_capacity(3);
        let mut z_hat = Vec::with_capacity(3);
        for m in Modality::ALL {
            let i = m.index();
            let gm = self.graph.constant(noise[i].clone());
            let nm = self.encode_private(&gm, m)?;
            f.push(Tensor::concat(&[s[i], p[i]])?);
            z_hat.push(self.decode_recon(&s[i], &p[i], &nm, m)?);
            g.push(gm);
            nv.push(nm);
        }
        let n_batch = rows(&z[0]);
        let (fs, fp) = self.fusion_inputs(&z, &s, &p, opts);
        let (h, y_hat) = self.fuse_predict(&fs, &fp)?;
        let noise_in = Modality::ALL.map(|m| {
            if opts.is_active(m) {
                nv[m.index()]
            } else {
                self.zeros(n_batch, self.d_k())
            }
        });
        let y_noise = self.noise_predict(&noise_in, opts.grl_scale)?;
        Ok(DisentangledSet {
            z,
            s,
            p,
            g: to3(g),
            n: to3(nv),
            f: to3(f),
            z_hat: to3(z_hat),
            h,
            y_hat,
            y_noise,
        })
    }

    /// Full pass with fresh noise drawn from `rng`.
    pub fn forward_full<R: Rng + ?Sized>(
        &self,
        inputs: &[Array<T>; 3],
        rng: &mut R,
        opts: &ForwardOptions,
    ) -> Result<DisentangledSet<'g, T>, ModelError> {
        let n = inputs[0].rows();
        let d = self.d_k();
        let noise = [sample_noise(n, d, rng), sample_noise(n, d, rng), sample_noise(n, d, rng)];
        self.forward_with_noise(inputs, &noise, opts)
    }
}

fn to3<X>(v: Vec<X>) -> [X; 3] {
    v.try_into().unwrap_or_else(|_| panic!("three modalities"))
}
