//! Mixture of autoencoder experts used as a similarity model.
//!
//! Each expert is an autoencoder `state_dim -> hidden -> bottleneck -> hidden
//! -> state_dim`. A gating network maps the same (normalized) state to
//! softmax weights over experts and the reconstruction is the weighted sum of
//! expert outputs. The loss `L` of a state is the MSE between that
//! reconstruction and the normalized state itself; states resembling the
//! demonstrations reconstruct well and get a low `L`.

pub mod demos;

use std::path::Path;

pub use demos::{subsample_demos, DemoRecord, DemoSet};

use crate::error::{check_len, Error, Result};
use crate::nn::{
    checkpoint, mse, mse_grad, softmax, Activation, AdamConfig, AdamState, DenseNet, Gradients, InitScheme,
};
use crate::rng::SeededRng;
use crate::textio::{join_f64, read_file, write_file, Lines};

pub const MOE_HEADER: &str = "moe-guide-moe v1";

/// Lower bound applied to per-dimension standard deviations.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension z-normalization fitted on demonstration states.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    pub fn fit<'a>(states: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Result<Self> {
        let states: Vec<&[f64]> = states.into_iter().collect();
        if states.is_empty() {
            return Err(Error::EmptyDemos);
        }
        let n = states.len() as f64;
        let mut mean = vec![0.0; dim];
        for s in &states {
            check_len("normalizer fit", dim, s.len())?;
            mean.iter_mut().zip(*s).for_each(|(m, v)| *m += v / n);
        }
        let mut var = vec![0.0; dim];
        for s in &states {
            var.iter_mut()
                .zip(s.iter().zip(&mean))
                .for_each(|(acc, (v, m))| *acc += (v - m) * (v - m) / n);
        }
        Ok(Self {
            mean,
            std: var.into_iter().map(f64::sqrt).collect(),
        })
    }

    pub fn normalize(&self, s: &[f64]) -> Result<Vec<f64>> {
        check_len("state", self.mean.len(), s.len())?;
        Ok(s.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, sd))| (v - m) / sd.max(STD_FLOOR))
            .collect())
    }

    pub fn denormalize(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_len("state", self.mean.len(), z.len())?;
        Ok(z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, sd))| v * sd.max(STD_FLOOR) + m)
            .collect())
    }
}

/// Layer widths and gating options for a mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoeArch {
    pub experts: usize,
    pub bottleneck: usize,
    pub hidden: usize,
    /// Hidden width of the gate; 0 gives a single linear gate layer.
    pub gate_hidden: usize,
    /// Keep only the `k` largest gate logits. `None` means dense gating.
    pub top_k: Option<usize>,
    pub init: InitScheme,
}

impl Default for MoeArch {
    fn default() -> Self {
        Self {
            experts: 2,
            bottleneck: 1,
            hidden: 64,
            gate_hidden: 32,
            top_k: None,
            init: InitScheme::UniformGlorot,
        }
    }
}

impl MoeArch {
    pub fn validate(&self, state_dim: usize) -> Result<()> {
        if self.experts == 0 {
            return Err(Error::config("experts", "need at least one expert"));
        }
        if self.hidden == 0 {
            return Err(Error::config("hidden", "must be positive"));
        }
        if self.bottleneck == 0 || self.bottleneck >= state_dim {
            return Err(Error::config(
                "bottleneck",
                format!(
                    "must satisfy 0 < bottleneck < state_dim ({state_dim}), got {}",
                    self.bottleneck
                ),
            ));
        }
        if let Some(k) = self.top_k {
            if k == 0 || k > self.experts {
                return Err(Error::config("top_k", "must lie in 1..=experts"));
            }
        }
        Ok(())
    }

    fn expert_dims(&self, d: usize) -> [usize; 5] {
        [d, self.hidden, self.bottleneck, self.hidden, d]
    }

    fn gate_dims(&self, d: usize) -> Vec<usize> {
        if self.gate_hidden == 0 {
            vec![d, self.experts]
        } else {
            vec![d, self.gate_hidden, self.experts]
        }
    }

    /// Total trainable parameters across experts and gate.
    pub fn num_params(&self, state_dim: usize) -> usize {
        let count = |dims: &[usize]| dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum::<usize>();
        self.experts * count(&self.expert_dims(state_dim)) + count(&self.gate_dims(state_dim))
    }

    /// Smallest expert hidden width for which `self` (with that width) has at
    /// least `budget` parameters.
    pub fn with_matched_budget(mut self, state_dim: usize, budget: usize) -> Self {
        self.hidden = 1;
        while self.num_params(state_dim) < budget {
            self.hidden += 1;
        }
        self
    }
}

fn expert_activations() -> [Activation; 4] {
    // Linear bottleneck: a ReLU on a 1-wide code can die and freeze the expert.
    [
        Activation::Relu,
        Activation::Identity,
        Activation::Relu,
        Activation::Identity,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoEModel {
    experts: Vec<DenseNet>,
    gate: DenseNet,
    state_dim: usize,
    top_k: Option<usize>,
    normalizer: Option<Normalizer>,
}

impl MoEModel {
    /// Freshly initialized mixture with no normalizer. Nets are drawn from
    /// `rng` in order: experts first, then the gate.
    pub fn init(state_dim: usize, arch: &MoeArch, rng: &mut SeededRng) -> Result<Self> {
        arch.validate(state_dim)?;
        let experts = (0..arch.experts)
            .map(|_| DenseNet::new(&arch.expert_dims(state_dim), &expert_activations(), arch.init, rng))
            .collect::<Result<Vec<_>>>()?;
        let gate_dims = arch.gate_dims(state_dim);
        let mut gate_acts = vec![Activation::Relu; gate_dims.len() - 2];
        gate_acts.push(Activation::Identity);
        let gate = DenseNet::new(&gate_dims, &gate_acts, arch.init, rng)?;
        Ok(Self {
            experts,
            gate,
            state_dim,
            top_k: arch.top_k,
            normalizer: None,
        })
    }

    /// Assembles a model from explicit networks. Every expert must map
    /// `state_dim -> state_dim` and the gate must emit one logit per expert.
    pub fn from_parts(
        experts: Vec<DenseNet>,
        gate: DenseNet,
        normalizer: Option<Normalizer>,
        top_k: Option<usize>,
    ) -> Result<Self> {
        let first = experts
            .first()
            .ok_or_else(|| Error::config("experts", "need at least one expert"))?;
        let state_dim = first.input_dim();
        for e in &experts {
            check_len("expert input", state_dim, e.input_dim())?;
            check_len("expert output", state_dim, e.output_dim())?;
        }
        check_len("gate input", state_dim, gate.input_dim())?;
        check_len("gate output", experts.len(), gate.output_dim())?;
        if let Some(n) = &normalizer {
            check_len("normalizer", state_dim, n.mean.len())?;
            check_len("normalizer", state_dim, n.std.len())?;
        }
        if let Some(k) = top_k {
            if k == 0 || k > experts.len() {
                return Err(Error::config("top_k", "must lie in 1..=experts"));
            }
        }
        Ok(Self {
            experts,
            gate,
            state_dim,
            top_k,
            normalizer,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn num_experts(&self) -> usize {
        self.experts.len()
    }

    /// Narrowest hidden width of the first expert.
    pub fn bottleneck(&self) -> usize {
        let dims = self.experts[0].layer_dims();
        dims[1..dims.len() - 1].iter().copied().min().unwrap_or(self.state_dim)
    }

    pub fn experts(&self) -> &[DenseNet] {
        &self.experts
    }

    pub fn gate(&self) -> &DenseNet {
        &self.gate
    }

    pub fn normalizer(&self) -> Option<&Normalizer> {
        self.normalizer.as_ref()
    }

    pub fn set_normalizer(&mut self, normalizer: Normalizer) -> Result<()> {
        check_len("normalizer", self.state_dim, normalizer.mean.len())?;
        check_len("normalizer", self.state_dim, normalizer.std.len())?;
        self.normalizer = Some(normalizer);
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.experts.iter().map(DenseNet::num_params).sum::<usize>() + self.gate.num_params()
    }

    pub fn normalize_state(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.normalizer.as_ref().ok_or(Error::UnfittedNormalizer)?.normalize(s)
    }

    fn gate_weights_from_logits(&self, logits: &[f64]) -> Vec<f64> {
        match self.top_k {
            Some(k) if k < logits.len() => {
                let mut order: Vec<usize> = (0..logits.len()).collect();
                // Stable sort keeps the lower index first among equal logits.
                order.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]));
                let keep = &order[..k];
                let sub: Vec<f64> = keep.iter().map(|&i| logits[i]).collect();
                let w = softmax(&sub);
                let mut out = vec![0.0; logits.len()];
                for (&i, wi) in keep.iter().zip(w) {
                    out[i] = wi;
                }
                out
            }
            _ => softmax(logits),
        }
    }

    pub fn gate_weights(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.gate_weights_from_logits(&self.gate.forward(x)?))
    }

    /// Weighted reconstruction of an already-normalized state, together with
    /// the gate weights used.
    pub fn reconstruct(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len("state", self.state_dim, x.len())?;
        let weights = self.gate_weights(x)?;
        let mut x_hat = vec![0.0; self.state_dim];
        for (expert, &w) in self.experts.iter().zip(&weights) {
            if w == 0.0 {
                continue;
            }
            let out = expert.forward(x)?;
            x_hat.iter_mut().zip(out).for_each(|(acc, o)| *acc += w * o);
        }
        Ok((x_hat, weights))
    }

    /// Reconstruction loss of a raw (unnormalized) state.
    pub fn loss(&self, s: &[f64]) -> Result<f64> {
        let x = self.normalize_state(s)?;
        let (x_hat, _) = self.reconstruct(&x)?;
        mse(&x_hat, &x)
    }

    /// Mean reconstruction loss over raw states.
    pub fn mean_loss<'a>(&self, states: impl IntoIterator<Item = &'a [f64]>) -> Result<f64> {
        let mut total = 0.0;
        let mut n = 0usize;
        for s in states {
            total += self.loss(s)?;
            n += 1;
        }
        Ok(if n == 0 { 0.0 } else { total / n as f64 })
    }

    /// Loss and parameter gradients for one normalized sample, scaled by
    /// `weight` (typically `1 / batch_size`).
    fn sample_gradients(
        &self,
        x: &[f64],
        weight: f64,
        expert_grads: &mut [Gradients],
        gate_grads: &mut Gradients,
    ) -> Result<f64> {
        let gate_trace = self.gate.forward_trace(x)?;
        let w = self.gate_weights_from_logits(&gate_trace.output);
        let traces = self
            .experts
            .iter()
            .map(|e| e.forward_trace(x))
            .collect::<Result<Vec<_>>>()?;
        let mut x_hat = vec![0.0; self.state_dim];
        for (t, &wi) in traces.iter().zip(&w) {
            x_hat.iter_mut().zip(&t.output).for_each(|(acc, o)| *acc += wi * o);
        }
        let loss = mse(&x_hat, x)?;
        let g: Vec<f64> = mse_grad(&x_hat, x).into_iter().map(|v| v * weight).collect();

        let mut d_weights = vec![0.0; w.len()];
        for (i, (expert, trace)) in self.experts.iter().zip(&traces).enumerate() {
            d_weights[i] = g.iter().zip(&trace.output).map(|(a, b)| a * b).sum();
            if w[i] == 0.0 {
                continue;
            }
            let upstream: Vec<f64> = g.iter().map(|v| v * w[i]).collect();
            let (grads, _) = expert.backward_trace(trace, &upstream)?;
            expert_grads[i].add_assign(&grads);
        }
        // Softmax Jacobian restricted to the active experts.
        let dot: f64 = w.iter().zip(&d_weights).map(|(a, b)| a * b).sum();
        let d_logits: Vec<f64> = w
            .iter()
            .zip(&d_weights)
            .map(|(&wi, &di)| if wi == 0.0 { 0.0 } else { wi * (di - dot) })
            .collect();
        let (grads, _) = self.gate.backward_trace(&gate_trace, &d_logits)?;
        gate_grads.add_assign(&grads);
        Ok(loss)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{MOE_HEADER}\n");
        out.push_str(&format!(
            "manifest state_dim={} experts={} bottleneck={} top_k={}\n",
            self.state_dim,
            self.experts.len(),
            self.bottleneck(),
            self.top_k.unwrap_or(0)
        ));
        match &self.normalizer {
            Some(n) => {
                out.push_str(&format!("mean {}\n", join_f64(&n.mean, " ")));
                out.push_str(&format!("std {}\n", join_f64(&n.std, " ")));
            }
            None => out.push_str("unnormalized\n"),
        }
        for (i, e) in self.experts.iter().enumerate() {
            out.push_str(&format!("expert {i}\n"));
            checkpoint::write_block(e, &mut out);
        }
        out.push_str("gate\n");
        checkpoint::write_block(&self.gate, &mut out);
        out
    }

    pub fn from_text(path: &Path, text: &str) -> Result<Self> {
        let mut lines = Lines::new(path, text);
        if lines.next_line()?.trim() != MOE_HEADER {
            return Err(lines.err(format!("expected header `{MOE_HEADER}`")));
        }
        let m = lines.expect("manifest")?;
        if m.len() != 4 {
            return Err(lines.err("manifest needs state_dim=, experts=, bottleneck=, top_k="));
        }
        let state_dim: usize = lines.kv(m[0], "state_dim")?;
        let n_experts: usize = lines.kv(m[1], "experts")?;
        let bottleneck: usize = lines.kv(m[2], "bottleneck")?;
        let top_k: usize = lines.kv(m[3], "top_k")?;

        let first = lines.next_line()?;
        let normalizer = if first.trim() == "unnormalized" {
            None
        } else {
            let toks: Vec<&str> = first.split_whitespace().collect();
            if toks.first() != Some(&"mean") {
                return Err(lines.err("expected `mean` or `unnormalized`"));
            }
            let mean = lines.parse_all(&toks[1..], "mean")?;
            let std_toks = lines.expect("std")?;
            let std = lines.parse_all(&std_toks, "std")?;
            Some(Normalizer { mean, std })
        };
        let mut experts = Vec::with_capacity(n_experts);
        for i in 0..n_experts {
            let idx = lines.expect("expert")?;
            if idx.len() != 1 || lines.parse::<usize>(idx[0], "expert index")? != i {
                return Err(lines.err(format!("expected `expert {i}`")));
            }
            experts.push(checkpoint::read_block(&mut lines)?);
        }
        lines.expect("gate")?;
        let gate = checkpoint::read_block(&mut lines)?;
        let model = Self::from_parts(experts, gate, normalizer, (top_k > 0).then_some(top_k))
            .map_err(|e| lines.err(e.to_string()))?;
        if model.state_dim != state_dim || model.bottleneck() != bottleneck {
            return Err(lines.err("manifest disagrees with stored networks"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(path, &read_file(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    /// Full batch up to 4096 samples, otherwise shuffled minibatches of 256.
    Auto,
    Full,
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: BatchSize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            learning_rate: 1e-3,
            batch_size: BatchSize::Auto,
            seed: 0,
        }
    }
}

const AUTO_FULL_BATCH_LIMIT: usize = 4096;
const AUTO_MINIBATCH: usize = 256;

/// Trained model plus the mean training loss of every epoch.
#[derive(Debug, Clone)]
pub struct TrainedMoe {
    pub model: MoEModel,
    pub history: Vec<f64>,
}

/// Jointly trains gate and experts on the demonstration states by minimizing
/// the mean mixture reconstruction loss. `cfg.epochs == 0` returns the
/// initialized model with a fitted normalizer.
pub fn train_moe(demos: &DemoSet, arch: &MoeArch, cfg: &TrainConfig) -> Result<TrainedMoe> {
    if demos.is_empty() {
        return Err(Error::EmptyDemos);
    }
    if !(cfg.learning_rate > 0.0 && cfg.learning_rate.is_finite()) {
        return Err(Error::config("learning_rate", "must be positive"));
    }
    let mut rng = SeededRng::new(cfg.seed);
    let mut model = MoEModel::init(demos.state_dim, arch, &mut rng)?;
    let normalizer = Normalizer::fit(demos.states(), demos.state_dim)?;
    let data = demos
        .states()
        .map(|s| normalizer.normalize(s))
        .collect::<Result<Vec<_>>>()?;
    model.normalizer = Some(normalizer);

    let batch = match cfg.batch_size {
        BatchSize::Auto if data.len() <= AUTO_FULL_BATCH_LIMIT => data.len(),
        BatchSize::Auto => AUTO_MINIBATCH,
        BatchSize::Full => data.len(),
        BatchSize::Fixed(0) => return Err(Error::config("batch_size", "must be positive")),
        BatchSize::Fixed(n) => n.min(data.len()),
    };
    let shuffle = batch < data.len();

    let adam_cfg = AdamConfig::with_lr(cfg.learning_rate);
    let mut expert_opt: Vec<AdamState> = model.experts.iter().map(|e| AdamState::new(e, adam_cfg)).collect();
    let mut gate_opt = AdamState::new(&model.gate, adam_cfg);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        if shuffle {
            rng.shuffle(&mut order);
        }
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let mut expert_grads: Vec<Gradients> = model.experts.iter().map(Gradients::zeros_like).collect();
            let mut gate_grads = Gradients::zeros_like(&model.gate);
            let w = 1.0 / chunk.len() as f64;
            for &i in chunk {
                epoch_loss += model.sample_gradients(&data[i], w, &mut expert_grads, &mut gate_grads)?;
            }
            if !epoch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            for ((net, opt), g) in model.experts.iter_mut().zip(&mut expert_opt).zip(&expert_grads) {
                opt.apply(net, g)?;
            }
            gate_opt.apply(&mut model.gate, &gate_grads)?;
        }
        history.push(epoch_loss / data.len() as f64);
    }
    Ok(TrainedMoe { model, history })
}
