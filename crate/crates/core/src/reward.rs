//! Latent reward model: a compact regressor from (latent, condition,
//! timestep) to three scalar scores, trained with a combined regression and
//! pairwise preference objective.
//!
//! The forward pass is
//! `[flatten(z_t) | one-hot(cond) | step_embed(t)] -> tanh hidden -> linear`,
//! all in double precision, with hand-derived analytic gradients verified
//! against central finite differences.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::TensorStore;
use crate::mixture::Condition;
use crate::rng::stream;
use crate::tensor::Latent;

pub const NUM_DIMS: usize = 3;
pub const DIM_NAMES: [&str; NUM_DIMS] = ["vq", "mq", "ta"];

/// Anything that scores a latent at a timestep; lets tests substitute
/// oracle-perfect or constant predictors for the trained network.
pub trait LatentScorer {
    fn predict(&self, z: &Latent, cond: Condition, t: usize) -> Result<[f64; NUM_DIMS]>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardNet {
    frames: usize,
    dim: usize,
    num_conditions: usize,
    steps: usize,
    embed_width: usize,
    hidden: usize,
    /// hidden x input, row-major.
    w1: Vec<f64>,
    b1: Vec<f64>,
    /// 3 x hidden, row-major.
    w2: Vec<f64>,
    b2: Vec<f64>,
    /// steps x embed_width; row index is min(t, steps - 1).
    step_embed: Vec<f64>,
}

/// Gradient blocks, same shapes as the parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub step_embed: Vec<f64>,
}

impl Gradients {
    pub fn block(&self, name: &str) -> Option<&[f64]> {
        match name {
            "w1" => Some(&self.w1),
            "b1" => Some(&self.b1),
            "w2" => Some(&self.w2),
            "b2" => Some(&self.b2),
            "step_embed" => Some(&self.step_embed),
            _ => None,
        }
    }
}

impl RewardNet {
    pub fn zeros(
        frames: usize,
        dim: usize,
        num_conditions: usize,
        steps: usize,
        embed_width: usize,
        hidden: usize,
    ) -> Result<Self> {
        if frames == 0 || dim == 0 || num_conditions == 0 || steps < 2 || embed_width == 0 || hidden == 0
        {
            return Err(Error::invalid("reward net sizes must be positive"));
        }
        let input = frames * dim + num_conditions + 1 + embed_width;
        let net = RewardNet {
            frames,
            dim,
            num_conditions,
            steps,
            embed_width,
            hidden,
            w1: vec![0.0; hidden * input],
            b1: vec![0.0; hidden],
            w2: vec![0.0; NUM_DIMS * hidden],
            b2: vec![0.0; NUM_DIMS],
            step_embed: vec![0.0; steps * embed_width],
        };
        let expected =
            (frames * dim + num_conditions + 1 + embed_width) * hidden + hidden + NUM_DIMS * hidden
                + NUM_DIMS
                + steps * embed_width;
        if net.param_count() != expected {
            return Err(Error::Internal("parameter count mismatch".into()));
        }
        Ok(net)
    }

    pub fn random(
        seed: u64,
        frames: usize,
        dim: usize,
        num_conditions: usize,
        steps: usize,
        embed_width: usize,
        hidden: usize,
    ) -> Result<Self> {
        let mut net = Self::zeros(frames, dim, num_conditions, steps, embed_width, hidden)?;
        let mut rng = stream(seed, "reward-init", &[]);
        let input = net.input_width();
        let w1_scale = 1.0 / (input as f64).sqrt();
        for v in &mut net.w1 {
            let g: f64 = rng.sample(StandardNormal);
            *v = g * w1_scale;
        }
        let w2_scale = 1.0 / (hidden as f64).sqrt();
        for v in &mut net.w2 {
            let g: f64 = rng.sample(StandardNormal);
            *v = g * w2_scale;
        }
        for v in &mut net.step_embed {
            let g: f64 = rng.sample(StandardNormal);
            *v = g * 0.5;
        }
        Ok(net)
    }

    pub fn input_width(&self) -> usize {
        self.frames * self.dim + self.num_conditions + 1 + self.embed_width
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len() + self.step_embed.len()
    }

    pub fn shape(&self) -> (usize, usize, usize, usize, usize, usize) {
        (
            self.frames,
            self.dim,
            self.num_conditions,
            self.steps,
            self.embed_width,
            self.hidden,
        )
    }

    fn embed_row(&self, t: usize) -> usize {
        t.min(self.steps - 1)
    }

    /// Parameter blocks in a fixed order, paired with [`Gradients`] blocks.
    pub fn param_blocks(&self) -> [(&'static str, &[f64]); 5] {
        [
            ("w1", &self.w1),
            ("b1", &self.b1),
            ("w2", &self.w2),
            ("b2", &self.b2),
            ("step_embed", &self.step_embed),
        ]
    }

    pub fn param_block_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        match name {
            "w1" => Some(&mut self.w1),
            "b1" => Some(&mut self.b1),
            "w2" => Some(&mut self.w2),
            "b2" => Some(&mut self.b2),
            "step_embed" => Some(&mut self.step_embed),
            _ => None,
        }
    }

    fn input_vector(&self, z: &Latent, cond: Condition, t: usize) -> Result<Vec<f64>> {
        if z.frames() != self.frames || z.dim() != self.dim {
            return Err(Error::invalid("latent shape does not match reward net"));
        }
        if t > self.steps {
            return Err(Error::invalid(format!(
                "timestep {t} out of range 0..={}",
                self.steps
            )));
        }
        let onehot_index = match cond {
            Condition::Prompt(k) if k < self.num_conditions => k,
            Condition::Prompt(k) => {
                return Err(Error::invalid(format!(
                    "condition {k} out of range for K={}",
                    self.num_conditions
                )))
            }
            Condition::Null => self.num_conditions,
        };
        let mut u = Vec::with_capacity(self.input_width());
        u.extend_from_slice(z.as_slice());
        for i in 0..self.num_conditions + 1 {
            u.push(if i == onehot_index { 1.0 } else { 0.0 });
        }
        let row = self.embed_row(t);
        u.extend_from_slice(&self.step_embed[row * self.embed_width..(row + 1) * self.embed_width]);
        Ok(u)
    }

    fn forward_from_input(&self, u: &[f64]) -> (Vec<f64>, [f64; NUM_DIMS]) {
        let mut h = vec![0.0; self.hidden];
        for (j, hj) in h.iter_mut().enumerate() {
            let mut a = self.b1[j];
            let row = &self.w1[j * u.len()..(j + 1) * u.len()];
            for (wi, ui) in row.iter().zip(u) {
                a += wi * ui;
            }
            *hj = a.tanh();
        }
        let mut out = [0.0; NUM_DIMS];
        for (d, od) in out.iter_mut().enumerate() {
            let mut acc = self.b2[d];
            let row = &self.w2[d * self.hidden..(d + 1) * self.hidden];
            for (wi, hi) in row.iter().zip(&h) {
                acc += wi * hi;
            }
            *od = acc;
        }
        (h, out)
    }
}

impl LatentScorer for RewardNet {
    /// Raw (unclamped) scores; clamping happens where they are consumed.
    fn predict(&self, z: &Latent, cond: Condition, t: usize) -> Result<[f64; NUM_DIMS]> {
        let u = self.input_vector(z, cond, t)?;
        Ok(self.forward_from_input(&u).1)
    }
}

/// Per-dimension squared error.
pub fn regression_loss(pred: &[f64; NUM_DIMS], target: &[f64; NUM_DIMS]) -> [f64; NUM_DIMS] {
    let mut out = [0.0; NUM_DIMS];
    for d in 0..NUM_DIMS {
        let e = pred[d] - target[d];
        out[d] = e * e;
    }
    out
}

/// Ordered preference pair (i, j) with label y = 1 iff target_i exceeds target_j.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PreferencePair {
    pub i: usize,
    pub j: usize,
    pub label: bool,
}

/// All ordered within-batch pairs per dimension, ties excluded.
pub fn preference_pairs(
    targets: &[[f64; NUM_DIMS]],
    tie_eps: f64,
) -> [Vec<PreferencePair>; NUM_DIMS] {
    let mut out: [Vec<PreferencePair>; NUM_DIMS] = Default::default();
    for d in 0..NUM_DIMS {
        for i in 0..targets.len() {
            for j in 0..targets.len() {
                if i == j {
                    continue;
                }
                if (targets[i][d] - targets[j][d]).abs() > tie_eps {
                    out[d].push(PreferencePair {
                        i,
                        j,
                        label: targets[i][d] > targets[j][d],
                    });
                }
            }
        }
    }
    out
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy on pairwise score differences for one
/// dimension; zero when the pair set is empty.
pub fn preference_loss(preds: &[[f64; NUM_DIMS]], pairs: &[PreferencePair], d: usize) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let total: f64 = pairs
        .iter()
        .map(|p| {
            let delta = preds[p.i][d] - preds[p.j][d];
            let sign = if p.label { 1.0 } else { -1.0 };
            softplus(-sign * delta)
        })
        .sum();
    total / pairs.len() as f64
}

/// Weighted sum over dimensions of both objectives.
pub fn total_loss(
    reg: &[f64; NUM_DIMS],
    pref: &[f64; NUM_DIMS],
    lambda_reg: &[f64; NUM_DIMS],
    lambda_pref: &[f64; NUM_DIMS],
) -> f64 {
    (0..NUM_DIMS)
        .map(|d| lambda_reg[d] * reg[d] + lambda_pref[d] * pref[d])
        .sum()
}

/// Where the preference labels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PrefLabelSource {
    /// Credited latent targets r_tilde (includes the similarity factor).
    #[default]
    LatentTarget,
    /// Raw video-level rewards, for the ablation.
    VideoReward,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    /// 1-indexed epoch at which the learning rate drops.
    pub lr_drop_epoch: usize,
    pub lr_drop_factor: f64,
    pub momentum: f64,
    pub lambda_reg: [f64; NUM_DIMS],
    pub lambda_pref: [f64; NUM_DIMS],
    pub tie_eps: f64,
    pub pref_labels: PrefLabelSource,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 15,
            batch_size: 16,
            lr0: 0.03,
            lr_drop_epoch: 10,
            lr_drop_factor: 0.1,
            momentum: 0.9,
            lambda_reg: [1.0; NUM_DIMS],
            lambda_pref: [1.0; NUM_DIMS],
            tie_eps: 1e-6,
            pref_labels: PrefLabelSource::LatentTarget,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size must be at least 2"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        let all_weights = self.lambda_reg.iter().chain(self.lambda_pref.iter());
        for w in all_weights {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::invalid("loss weights must be non-negative"));
            }
        }
        let ok = self.lr0.is_finite()
            && self.lr0 >= 0.0
            && self.momentum.is_finite()
            && (0.0..1.0).contains(&self.momentum);
        if !ok {
            return Err(Error::invalid("bad optimizer constants"));
        }
        Ok(())
    }

    fn lr_at_epoch(&self, epoch: usize) -> f64 {
        if epoch >= self.lr_drop_epoch {
            self.lr0 * self.lr_drop_factor
        } else {
            self.lr0
        }
    }
}

/// One training example with both target flavours.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub z: Latent,
    pub cond: Condition,
    pub t: usize,
    /// Regression target (always the credited latent target).
    pub reg_target: [f64; NUM_DIMS],
    /// Targets used only for preference labels.
    pub pref_target: [f64; NUM_DIMS],
}

impl TrainSample {
    pub fn from_dataset(
        sample: &crate::dataset::DatasetSample,
        pref_labels: PrefLabelSource,
    ) -> Self {
        let s = &sample.sample;
        TrainSample {
            z: s.z_t.clone(),
            cond: s.cond,
            t: s.t,
            reg_target: s.r_tilde.as_array(),
            pref_target: match pref_labels {
                PrefLabelSource::LatentTarget => s.r_tilde.as_array(),
                PrefLabelSource::VideoReward => s.r_video.as_array(),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub reg: [f64; NUM_DIMS],
    pub pref: [f64; NUM_DIMS],
    pub total: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub lr: f64,
    pub reg: [f64; NUM_DIMS],
    pub pref: [f64; NUM_DIMS],
    pub total: f64,
}

/// Batch loss with the exact analytic gradient of every parameter.
pub fn backward(
    net: &RewardNet,
    batch: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<(Gradients, LossBreakdown)> {
    let b = batch.len();
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let input_width = net.input_width();
    let mut inputs = Vec::with_capacity(b);
    let mut hiddens = Vec::with_capacity(b);
    let mut outputs = Vec::with_capacity(b);
    for s in batch {
        let u = net.input_vector(&s.z, s.cond, s.t)?;
        let (h, out) = net.forward_from_input(&u);
        inputs.push(u);
        hiddens.push(h);
        outputs.push(out);
    }

    let mut reg = [0.0; NUM_DIMS];
    for (out, s) in outputs.iter().zip(batch) {
        let l = regression_loss(out, &s.reg_target);
        for d in 0..NUM_DIMS {
            reg[d] += l[d] / b as f64;
        }
    }
    let pref_targets: Vec<[f64; NUM_DIMS]> = batch.iter().map(|s| s.pref_target).collect();
    let pairs = preference_pairs(&pref_targets, cfg.tie_eps);
    let mut pref = [0.0; NUM_DIMS];
    for d in 0..NUM_DIMS {
        pref[d] = preference_loss(&outputs, &pairs[d], d);
    }
    let total = total_loss(&reg, &pref, &cfg.lambda_reg, &cfg.lambda_pref);

    // dL/d(output scalar) per sample, regression + preference terms.
    let mut d_out = vec![[0.0; NUM_DIMS]; b];
    for (grad, (out, s)) in d_out.iter_mut().zip(outputs.iter().zip(batch)) {
        for d in 0..NUM_DIMS {
            grad[d] += cfg.lambda_reg[d] * 2.0 * (out[d] - s.reg_target[d]) / b as f64;
        }
    }
    for d in 0..NUM_DIMS {
        if pairs[d].is_empty() {
            continue;
        }
        let scale = cfg.lambda_pref[d] / pairs[d].len() as f64;
        for p in &pairs[d] {
            let delta = outputs[p.i][d] - outputs[p.j][d];
            let sign = if p.label { 1.0 } else { -1.0 };
            // d softplus(-sign * delta) / d delta = -sign * sigmoid(-sign * delta)
            let g = -sign * sigmoid(-sign * delta) * scale;
            d_out[p.i][d] += g;
            d_out[p.j][d] -= g;
        }
    }

    let mut grads = Gradients {
        w1: vec![0.0; net.w1.len()],
        b1: vec![0.0; net.b1.len()],
        w2: vec![0.0; net.w2.len()],
        b2: vec![0.0; net.b2.len()],
        step_embed: vec![0.0; net.step_embed.len()],
    };
    // Accumulate in sample-index order to keep results bit-deterministic.
    for i in 0..b {
        let u = &inputs[i];
        let h = &hiddens[i];
        let mut d_hidden = vec![0.0; net.hidden];
        for (d, &gd) in d_out[i].iter().enumerate() {
            if gd == 0.0 {
                continue;
            }
            grads.b2[d] += gd;
            let row = d * net.hidden;
            for j in 0..net.hidden {
                grads.w2[row + j] += gd * h[j];
                d_hidden[j] += gd * net.w2[row + j];
            }
        }
        let embed_offset = input_width - net.embed_width;
        let embed_row = net.embed_row(batch[i].t) * net.embed_width;
        for j in 0..net.hidden {
            let da = d_hidden[j] * (1.0 - h[j] * h[j]);
            if da == 0.0 {
                continue;
            }
            grads.b1[j] += da;
            let row = j * input_width;
            for (ix, ui) in u.iter().enumerate() {
                grads.w1[row + ix] += da * ui;
            }
            // Input gradient flows into the embedding table rows.
            for e in 0..net.embed_width {
                grads.step_embed[embed_row + e] += da * net.w1[row + embed_offset + e];
            }
        }
    }

    Ok((grads, LossBreakdown { reg, pref, total }))
}

/// SGD with momentum over shuffled minibatches; deterministic from the
/// config seed. Returns the per-epoch loss log.
pub fn train(
    net: &mut RewardNet,
    samples: &[TrainSample],
    cfg: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let mut velocity = Gradients {
        w1: vec![0.0; net.w1.len()],
        b1: vec![0.0; net.b1.len()],
        w2: vec![0.0; net.w2.len()],
        b2: vec![0.0; net.b2.len()],
        step_embed: vec![0.0; net.step_embed.len()],
    };
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut global_batch = 0usize;
    for epoch in 1..=cfg.epochs {
        let lr = cfg.lr_at_epoch(epoch);
        order.shuffle(&mut stream(cfg.seed, "train-shuffle", &[epoch as u64]));
        let mut epoch_reg = [0.0; NUM_DIMS];
        let mut epoch_pref = [0.0; NUM_DIMS];
        let mut epoch_total = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<TrainSample> =
                chunk.iter().map(|&ix| samples[ix].clone()).collect();
            let (grads, loss) = backward(net, &batch, cfg)?;
            if !loss.total.is_finite() {
                return Err(Error::TrainingDiverged {
                    batch_index: global_batch,
                    detail: format!("total loss = {}", loss.total),
                });
            }
            step_sgd(net, &mut velocity, &grads, lr, cfg.momentum);
            for d in 0..NUM_DIMS {
                epoch_reg[d] += loss.reg[d];
                epoch_pref[d] += loss.pref[d];
            }
            epoch_total += loss.total;
            batches += 1;
            global_batch += 1;
        }
        let n = batches as f64;
        log.push(EpochStats {
            epoch,
            lr,
            reg: epoch_reg.map(|v| v / n),
            pref: epoch_pref.map(|v| v / n),
            total: epoch_total / n,
        });
    }
    Ok(log)
}

fn step_sgd(net: &mut RewardNet, vel: &mut Gradients, grads: &Gradients, lr: f64, momentum: f64) {
    let update = |p: &mut [f64], v: &mut [f64], g: &[f64]| {
        for i in 0..p.len() {
            v[i] = momentum * v[i] + g[i];
            p[i] -= lr * v[i];
        }
    };
    update(&mut net.w1, &mut vel.w1, &grads.w1);
    update(&mut net.b1, &mut vel.b1, &grads.b1);
    update(&mut net.w2, &mut vel.w2, &grads.w2);
    update(&mut net.b2, &mut vel.b2, &grads.b2);
    update(&mut net.step_embed, &mut vel.step_embed, &grads.step_embed);
}

/// One cell of the preference-accuracy table.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AccuracyCell {
    pub timestep: usize,
    /// 0 = VQ, 1 = MQ, 2 = TA.
    pub dim: usize,
    pub accuracy: f64,
    pub pairs: usize,
}

/// Held-out pairwise ranking accuracy per (dimension, timestep), pairs drawn
/// within the same timestep only. Cells without valid pairs are absent.
pub fn eval_preference_accuracy<S: LatentScorer + ?Sized, R: Rng + ?Sized>(
    scorer: &S,
    samples: &[TrainSample],
    probe_timesteps: &[usize],
    tie_eps: f64,
    rng: &mut R,
) -> Result<Vec<AccuracyCell>> {
    let mut by_t: BTreeMap<usize, Vec<&TrainSample>> = BTreeMap::new();
    for s in samples {
        if probe_timesteps.contains(&s.t) {
            by_t.entry(s.t).or_default().push(s);
        }
    }
    let mut cells = Vec::new();
    for (&t, group) in &by_t {
        let mut preds = Vec::with_capacity(group.len());
        for s in group {
            preds.push(scorer.predict(&s.z, s.cond, s.t)?);
        }
        let targets: Vec<[f64; NUM_DIMS]> = group.iter().map(|s| s.pref_target).collect();
        let pairs = preference_pairs(&targets, tie_eps);
        for d in 0..NUM_DIMS {
            if pairs[d].is_empty() {
                continue;
            }
            let mut correct = 0usize;
            for p in &pairs[d] {
                let delta = preds[p.i][d] - preds[p.j][d];
                let ok = if delta == 0.0 {
                    rng.random::<bool>()
                } else {
                    (delta > 0.0) == p.label
                };
                if ok {
                    correct += 1;
                }
            }
            cells.push(AccuracyCell {
                timestep: t,
                dim: d,
                accuracy: correct as f64 / pairs[d].len() as f64,
                pairs: pairs[d].len(),
            });
        }
    }
    Ok(cells)
}

/// Checkpoint metadata stored alongside the parameter blocks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub schema_version: u32,
    pub frames: usize,
    pub dim: usize,
    pub num_conditions: usize,
    pub steps: usize,
    pub embed_width: usize,
    pub hidden: usize,
    pub config_hash: String,
    pub tool_version: String,
}

impl RewardNet {
    pub fn save(&self, path: &Path, config_hash: &str, tool_version: &str) -> Result<()> {
        let header = CheckpointHeader {
            schema_version: 1,
            frames: self.frames,
            dim: self.dim,
            num_conditions: self.num_conditions,
            steps: self.steps,
            embed_width: self.embed_width,
            hidden: self.hidden,
            config_hash: config_hash.to_string(),
            tool_version: tool_version.to_string(),
        };
        let mut store = TensorStore::new();
        store.insert_bytes(
            "meta",
            serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?,
        )?;
        let input = self.input_width() as u64;
        store.insert_f64("w1", vec![self.hidden as u64, input], self.w1.clone())?;
        store.insert_f64("b1", vec![self.hidden as u64], self.b1.clone())?;
        store.insert_f64(
            "w2",
            vec![NUM_DIMS as u64, self.hidden as u64],
            self.w2.clone(),
        )?;
        store.insert_f64("b2", vec![NUM_DIMS as u64], self.b2.clone())?;
        store.insert_f64(
            "step_embed",
            vec![self.steps as u64, self.embed_width as u64],
            self.step_embed.clone(),
        )?;
        store.write_to(path)
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointHeader)> {
        let store = TensorStore::read_from(path)?;
        let header: CheckpointHeader = serde_json::from_slice(store.get_bytes("meta")?)
            .map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        let mut net = RewardNet::zeros(
            header.frames,
            header.dim,
            header.num_conditions,
            header.steps,
            header.embed_width,
            header.hidden,
        )?;
        let expect = |name: &str, dims: &[u64]| -> Result<Vec<f64>> {
            let (got_dims, data) = store.get_f64(name)?;
            if got_dims != dims {
                return Err(Error::Format(format!(
                    "block '{name}' has dims {got_dims:?}, expected {dims:?}"
                )));
            }
            Ok(data.to_vec())
        };
        net.w1 = expect("w1", &[net.hidden as u64, net.input_width() as u64])?;
        net.b1 = expect("b1", &[net.hidden as u64])?;
        net.w2 = expect("w2", &[NUM_DIMS as u64, net.hidden as u64])?;
        net.b2 = expect("b2", &[NUM_DIMS as u64])?;
        net.step_embed = expect(
            "step_embed",
            &[net.steps as u64, net.embed_width as u64],
        )?;
        Ok((net, header))
    }
}
