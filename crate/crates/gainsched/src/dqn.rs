//! Value-based scheduler: an MLP maps the 15-dimensional observation to one
//! Q-value per gain vector, trained by TD backups with experience replay and
//! a periodically synced target network.
//!
//! The implementation keeps everything in f64 and on one thread so that a
//! run is bitwise reproducible from its seed.

use crate::env::{QuadEnv, StepOutcome, Transition};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_FORMAT: &str = "dqn-checkpoint-v1";

#[derive(Debug, Error)]
pub enum DqnError {
    #[error("invalid network shape: {0}")]
    InvalidShape(String),
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}

/// Training hyperparameters. Serializable so checkpoints can echo the
/// configuration they were produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Hidden layer widths.
    pub hidden: Vec<usize>,
    /// Discount factor, in (0, 1).
    pub gamma: f64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Hard target-network copy period, in trainer steps.
    pub target_sync_period: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Environment steps over which epsilon anneals linearly.
    pub epsilon_decay_steps: usize,
    /// Environment steps collected before updates begin.
    pub warmup_steps: usize,
    pub replay_capacity: usize,
    pub episodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128],
            gamma: 0.99,
            batch_size: 64,
            learning_rate: 1e-3,
            target_sync_period: 1000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 50_000,
            warmup_steps: 2000,
            replay_capacity: 100_000,
            episodes: 300,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DqnError> {
        let bad = |msg: String| Err(DqnError::InvalidShape(msg));
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0,1), got {}", self.gamma));
        }
        if self.batch_size == 0 || self.replay_capacity < self.batch_size {
            return bad(format!(
                "need replay_capacity >= batch_size >= 1, got {} / {}",
                self.replay_capacity, self.batch_size
            ));
        }
        if !(self.learning_rate > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.target_sync_period == 0 || self.epsilon_decay_steps == 0 {
            return bad("target_sync_period and epsilon_decay_steps must be >= 1".into());
        }
        for e in [self.epsilon_start, self.epsilon_end] {
            if !(0.0..=1.0).contains(&e) {
                return bad(format!("epsilon values must lie in [0,1], got {e}"));
            }
        }
        if self.hidden.iter().any(|h| *h == 0) {
            return bad("hidden widths must be >= 1".into());
        }
        Ok(())
    }
}

/// Linearly annealed exploration rate at a given environment step.
pub fn epsilon_at(env_step: usize, config: &TrainConfig) -> f64 {
    if env_step >= config.epsilon_decay_steps {
        return config.epsilon_end;
    }
    let frac = env_step as f64 / config.epsilon_decay_steps as f64;
    config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac
}

/// Fully connected ReLU network, linear output head.
#[derive(Debug, Clone, PartialEq)]
pub struct QNetwork {
    sizes: Vec<usize>,
    w: Vec<DMatrix<f64>>,
    b: Vec<DVector<f64>>,
}

/// Per-layer parameter gradients, same shapes as the network.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub dw: Vec<DMatrix<f64>>,
    pub db: Vec<DVector<f64>>,
}

fn check_sizes(sizes: &[usize]) -> Result<(), DqnError> {
    if sizes.len() < 2 {
        return Err(DqnError::InvalidShape(format!(
            "need at least input and output layers, got {sizes:?}"
        )));
    }
    if sizes.iter().any(|s| *s == 0) {
        return Err(DqnError::InvalidShape(format!("zero-width layer in {sizes:?}")));
    }
    Ok(())
}

impl QNetwork {
    /// Fresh network with fan-in scaled uniform init (+-1/sqrt(fan_in)).
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Result<Self, DqnError> {
        check_sizes(sizes)?;
        let mut w = Vec::new();
        let mut b = Vec::new();
        for l in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let data: Vec<f64> =
                (0..fan_out * fan_in).map(|_| rng.random_range(-bound..bound)).collect();
            w.push(DMatrix::from_vec(fan_out, fan_in, data));
            let bias: Vec<f64> = (0..fan_out).map(|_| rng.random_range(-bound..bound)).collect();
            b.push(DVector::from_vec(bias));
        }
        Ok(Self { sizes: sizes.to_vec(), w, b })
    }

    /// All-zero network of the given shape.
    pub fn zeros(sizes: &[usize]) -> Result<Self, DqnError> {
        check_sizes(sizes)?;
        let w = (0..sizes.len() - 1)
            .map(|l| DMatrix::zeros(sizes[l + 1], sizes[l]))
            .collect();
        let b = (0..sizes.len() - 1).map(|l| DVector::zeros(sizes[l + 1])).collect();
        Ok(Self { sizes: sizes.to_vec(), w, b })
    }

    /// Assemble from explicit layer parameters.
    pub fn from_parts(w: Vec<DMatrix<f64>>, b: Vec<DVector<f64>>) -> Result<Self, DqnError> {
        if w.is_empty() || w.len() != b.len() {
            return Err(DqnError::InvalidShape("weight/bias layer counts differ".into()));
        }
        let mut sizes = vec![w[0].ncols()];
        for (l, (wl, bl)) in w.iter().zip(&b).enumerate() {
            if wl.nrows() != bl.len() || wl.ncols() != sizes[l] {
                return Err(DqnError::InvalidShape(format!("layer {l} shapes inconsistent")));
            }
            sizes.push(wl.nrows());
        }
        check_sizes(&sizes)?;
        Ok(Self { sizes, w, b })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn num_params(&self) -> usize {
        self.w.iter().map(|w| w.len()).sum::<usize>() + self.b.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn weights(&self, layer: usize) -> &DMatrix<f64> {
        &self.w[layer]
    }

    pub fn biases(&self, layer: usize) -> &DVector<f64> {
        &self.b[layer]
    }

    /// Q-values for a single observation.
    pub fn forward(&self, obs: &[f64]) -> DVector<f64> {
        assert_eq!(obs.len(), self.input_dim(), "observation length mismatch");
        let mut a = DVector::from_column_slice(obs);
        let last = self.w.len() - 1;
        for l in 0..self.w.len() {
            let mut z = &self.w[l] * a + &self.b[l];
            if l < last {
                z.apply(|v| *v = v.max(0.0));
            }
            a = z;
        }
        a
    }

    /// Q-values for a batch, one observation per column.
    pub fn forward_batch(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self.activations(x).pop().unwrap()
    }

    /// Layer activations: index 0 is the input, last is the output.
    fn activations(&self, x: &DMatrix<f64>) -> Vec<DMatrix<f64>> {
        assert_eq!(x.nrows(), self.input_dim(), "observation length mismatch");
        let mut acts = Vec::with_capacity(self.w.len() + 1);
        acts.push(x.clone());
        let last = self.w.len() - 1;
        for l in 0..self.w.len() {
            let mut z = &self.w[l] * acts.last().unwrap();
            for mut col in z.column_iter_mut() {
                col += &self.b[l];
            }
            if l < last {
                z.apply(|v| *v = v.max(0.0));
            }
            acts.push(z);
        }
        acts
    }

    /// Mean squared TD error over the batch and its parameter gradients.
    /// Only the taken-action output of each sample enters the loss, so the
    /// head layer is handled sparsely (scatter for its gradient, gather for
    /// the downstream delta).
    pub fn loss_and_grads(
        &self,
        x: &DMatrix<f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> (f64, Gradients) {
        let batch = x.ncols();
        assert!(batch > 0 && actions.len() == batch && targets.len() == batch);
        let acts = self.activations(x);
        let q = acts.last().unwrap();
        let nl = self.w.len();
        let mut dw: Vec<DMatrix<f64>> =
            self.w.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect();
        let mut db: Vec<DVector<f64>> = self.b.iter().map(|b| DVector::zeros(b.len())).collect();

        let mut loss = 0.0;
        let head_in = &acts[nl - 1];
        let mut delta = DMatrix::zeros(head_in.nrows(), batch);
        for (bi, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let err = q[(a, bi)] - y;
            loss += err * err;
            let g = 2.0 * err / batch as f64;
            for j in 0..head_in.nrows() {
                dw[nl - 1][(a, j)] += g * head_in[(j, bi)];
                delta[(j, bi)] = g * self.w[nl - 1][(a, j)];
            }
            db[nl - 1][a] += g;
        }
        loss /= batch as f64;

        if nl > 1 {
            delta.zip_apply(&acts[nl - 1], |d, a| {
                if a <= 0.0 {
                    *d = 0.0;
                }
            });
        }
        for l in (0..nl - 1).rev() {
            dw[l] = &delta * acts[l].transpose();
            db[l] = delta.column_sum();
            if l > 0 {
                delta = self.w[l].transpose() * delta;
                delta.zip_apply(&acts[l], |d, a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
            }
        }
        (loss, Gradients { dw, db })
    }

    /// Parameters in checkpoint order: layer-major, each layer its weight
    /// matrix row-major followed by its bias.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in 0..self.w.len() {
            let w = &self.w[l];
            for i in 0..w.nrows() {
                for j in 0..w.ncols() {
                    out.push(w[(i, j)]);
                }
            }
            out.extend(self.b[l].iter().copied());
        }
        out
    }

    /// Inverse of `flat_params` for a given shape.
    pub fn from_flat(sizes: &[usize], data: &[f64]) -> Result<Self, DqnError> {
        check_sizes(sizes)?;
        let mut net = Self::zeros(sizes)?;
        let expected = net.num_params();
        if data.len() != expected {
            return Err(DqnError::InvalidShape(format!(
                "expected {expected} parameters for {sizes:?}, got {}",
                data.len()
            )));
        }
        let mut cursor = 0;
        for l in 0..net.w.len() {
            let (rows, cols) = (net.w[l].nrows(), net.w[l].ncols());
            for i in 0..rows {
                for j in 0..cols {
                    net.w[l][(i, j)] = data[cursor];
                    cursor += 1;
                }
            }
            for i in 0..rows {
                net.b[l][i] = data[cursor];
                cursor += 1;
            }
        }
        Ok(net)
    }
}

/// Adam optimizer state matching one network's shapes.
#[derive(Debug, Clone)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    mw: Vec<DMatrix<f64>>,
    vw: Vec<DMatrix<f64>>,
    mb: Vec<DVector<f64>>,
    vb: Vec<DVector<f64>>,
}

impl Adam {
    pub fn new(net: &QNetwork) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            mw: net.w.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            vw: net.w.iter().map(|w| DMatrix::zeros(w.nrows(), w.ncols())).collect(),
            mb: net.b.iter().map(|b| DVector::zeros(b.len())).collect(),
            vb: net.b.iter().map(|b| DVector::zeros(b.len())).collect(),
        }
    }

    pub fn step(&mut self, net: &mut QNetwork, grads: &Gradients, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        };
        for l in 0..net.w.len() {
            update(
                net.w[l].as_mut_slice(),
                grads.dw[l].as_slice(),
                self.mw[l].as_mut_slice(),
                self.vw[l].as_mut_slice(),
            );
            update(
                net.b[l].as_mut_slice(),
                grads.db[l].as_slice(),
                self.mb[l].as_mut_slice(),
                self.vb[l].as_mut_slice(),
            );
        }
    }
}

/// Uniform ring buffer of transitions.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    cursor: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: Vec::with_capacity(capacity.min(1 << 20)), cursor: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.cursor] = t;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
    }

    /// Uniform sample with replacement.
    pub fn sample(&self, rng: &mut impl Rng, batch: usize) -> Vec<Transition> {
        assert!(!self.items.is_empty(), "cannot sample an empty buffer");
        (0..batch).map(|_| self.items[rng.random_range(0..self.items.len())]).collect()
    }
}

/// Greedy argmax with lowest-index tie-breaking.
pub fn greedy_action(q: &DVector<f64>) -> usize {
    let mut best = 0;
    for (i, v) in q.iter().enumerate().skip(1) {
        if *v > q[best] {
            best = i;
        }
    }
    best
}

/// Epsilon-greedy action selection over the network's Q-values.
pub fn act(net: &QNetwork, obs: &[f64], epsilon: f64, rng: &mut impl Rng) -> usize {
    debug_assert!((0.0..=1.0).contains(&epsilon));
    if rng.random::<f64>() < epsilon {
        rng.random_range(0..net.output_dim())
    } else {
        greedy_action(&net.forward(obs))
    }
}

/// TD backup targets: bootstrap through everything except failure aborts
/// (the time horizon is not a property of the state, a crash is).
pub fn td_targets(batch: &[Transition], target_net: &QNetwork, gamma: f64) -> Vec<f64> {
    let next = DMatrix::from_fn(target_net.input_dim(), batch.len(), |i, b| {
        batch[b].next_obs.to_array()[i]
    });
    let q_next = target_net.forward_batch(&next);
    batch
        .iter()
        .enumerate()
        .map(|(b, t)| {
            let failed = t.termination.is_some_and(|term| term.is_failure());
            if failed {
                t.reward
            } else {
                t.reward + gamma * q_next.column(b).max()
            }
        })
        .collect()
}

/// One TD update on a sampled batch; returns the loss before the update.
pub fn train_step(
    net: &mut QNetwork,
    opt: &mut Adam,
    target_net: &QNetwork,
    batch: &[Transition],
    gamma: f64,
    lr: f64,
) -> f64 {
    let x = DMatrix::from_fn(net.input_dim(), batch.len(), |i, b| batch[b].obs.to_array()[i]);
    let actions: Vec<usize> = batch.iter().map(|t| t.action).collect();
    let targets = td_targets(batch, target_net, gamma);
    let (loss, grads) = net.loss_and_grads(&x, &actions, &targets);
    opt.step(net, &grads, lr);
    loss
}

/// Hard-copy the online parameters into the target every `period` trainer
/// steps.
pub fn sync_target(net: &QNetwork, target_net: &mut QNetwork, period: usize, step: usize) {
    if period >= 1 && step % period == 0 {
        *target_net = net.clone();
    }
}

/// Per-episode training log record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeStats {
    pub episode: usize,
    /// Undiscounted return.
    pub ret: f64,
    /// Mean TD loss over the episode's updates (0 before updates begin).
    pub mean_loss: f64,
    /// Exploration rate at the first step of the episode.
    pub epsilon: f64,
    /// Cumulative environment steps after the episode.
    pub env_steps: usize,
    /// Steps in this episode.
    pub steps: usize,
    /// Whether the episode ended in a failure abort.
    pub failed: bool,
}

#[derive(Debug, Clone)]
pub struct TrainResult {
    pub net: QNetwork,
    pub stats: Vec<EpisodeStats>,
    pub env_steps: usize,
    pub train_steps: u64,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(
        "training diverged: {failures} of the last {window} episodes ended in failure aborts \
         (at episode {episode})"
    )]
    Diverged { episode: usize, failures: usize, window: usize },
    #[error(transparent)]
    Invalid(#[from] DqnError),
}

/// Number of trailing episodes inspected for the divergence guard.
pub const DIVERGENCE_WINDOW: usize = 50;
/// Fraction of failure terminations in the window above which training
/// aborts.
pub const DIVERGENCE_FAILURE_FRACTION: f64 = 0.9;

/// Full training loop. Single-threaded and driven by one seeded generator:
/// network init, per-episode environment seeds, exploration draws, and
/// replay sampling all consume the same stream, so a (seed, config) pair
/// fixes the run bitwise.
pub fn train(
    env: &mut QuadEnv,
    config: &TrainConfig,
    seed: u64,
    mut on_episode: impl FnMut(&EpisodeStats),
) -> Result<TrainResult, TrainError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sizes = vec![crate::env::Observation::LEN];
    sizes.extend_from_slice(&config.hidden);
    sizes.push(env.table().len());
    let mut net = QNetwork::new(&sizes, &mut rng)?;
    let mut target_net = net.clone();
    let mut opt = Adam::new(&net);
    let mut replay = ReplayBuffer::new(config.replay_capacity);

    let mut stats: Vec<EpisodeStats> = Vec::with_capacity(config.episodes);
    let mut env_steps = 0usize;
    let mut train_steps = 0u64;

    for episode in 0..config.episodes {
        let ep_seed = rng.next_u64();
        let mut obs = env.reset(ep_seed);
        let ep_epsilon = epsilon_at(env_steps, config);
        let mut ret = 0.0;
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        let mut steps = 0usize;
        let failed = loop {
            let eps = epsilon_at(env_steps, config);
            let action = act(&net, &obs.to_array(), eps, &mut rng);
            let out = env.step(action);
            replay.push(out.transition);
            ret += out.transition.reward;
            obs = out.transition.next_obs;
            env_steps += 1;
            steps += 1;
            if env_steps >= config.warmup_steps && replay.len() >= config.batch_size {
                let batch = replay.sample(&mut rng, config.batch_size);
                let loss = train_step(
                    &mut net,
                    &mut opt,
                    &target_net,
                    &batch,
                    config.gamma,
                    config.learning_rate,
                );
                train_steps += 1;
                loss_sum += loss;
                loss_count += 1;
                sync_target(&net, &mut target_net, config.target_sync_period, train_steps as usize);
            }
            if let Some(term) = out.transition.termination {
                break term.is_failure();
            }
        };
        let record = EpisodeStats {
            episode,
            ret,
            mean_loss: if loss_count > 0 { loss_sum / loss_count as f64 } else { 0.0 },
            epsilon: ep_epsilon,
            env_steps,
            steps,
            failed,
        };
        on_episode(&record);
        stats.push(record);
        if stats.len() >= DIVERGENCE_WINDOW {
            let failures = stats[stats.len() - DIVERGENCE_WINDOW..]
                .iter()
                .filter(|s| s.failed)
                .count();
            if (failures as f64) > DIVERGENCE_FAILURE_FRACTION * DIVERGENCE_WINDOW as f64 {
                return Err(TrainError::Diverged {
                    episode,
                    failures,
                    window: DIVERGENCE_WINDOW,
                });
            }
        }
    }

    Ok(TrainResult { net, stats, env_steps, train_steps })
}

/// Roll one episode under the greedy policy. The environment must have been
/// reset by the caller; every step outcome is returned for logging.
pub fn greedy_episode(env: &mut QuadEnv, net: &QNetwork) -> Vec<StepOutcome> {
    let mut outs = Vec::new();
    loop {
        let obs = env.observation();
        let action = greedy_action(&net.forward(&obs.to_array()));
        let out = env.step(action);
        let done = out.transition.done();
        outs.push(out);
        if done {
            return outs;
        }
    }
}

/// Roll one episode holding a single action. The environment must have been
/// reset by the caller.
pub fn fixed_action_episode(env: &mut QuadEnv, action: usize) -> Vec<StepOutcome> {
    let mut outs = Vec::new();
    loop {
        let out = env.step(action);
        let done = out.transition.done();
        outs.push(out);
        if done {
            return outs;
        }
    }
}

/// Checkpoint metadata stored alongside the parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub train_steps: u64,
    pub train_config: Option<TrainConfig>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointHeader {
    format: String,
    layer_sizes: Vec<usize>,
    param_count: u64,
    seed: u64,
    train_steps: u64,
    train_config: Option<TrainConfig>,
}

/// Serialize as a single-line JSON header followed by the parameters as a
/// flat little-endian f64 block (layer-major, weights row-major, then bias).
pub fn save_checkpoint(
    path: &Path,
    net: &QNetwork,
    meta: &CheckpointMeta,
) -> Result<(), DqnError> {
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.to_string(),
        layer_sizes: net.sizes().to_vec(),
        param_count: net.num_params() as u64,
        seed: meta.seed,
        train_steps: meta.train_steps,
        train_config: meta.train_config.clone(),
    };
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut out, &header)
        .map_err(|e| DqnError::BadCheckpoint(e.to_string()))?;
    out.write_all(b"\n")?;
    for v in net.flat_params() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<(QNetwork, CheckpointMeta), DqnError> {
    let mut reader = BufReader::new(std::fs::File::open(path)?);
    let mut header_bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = reader.read(&mut byte)?;
        if n == 0 {
            return Err(DqnError::BadCheckpoint("missing header line".into()));
        }
        if byte[0] == b'\n' {
            break;
        }
        header_bytes.push(byte[0]);
        if header_bytes.len() > 1 << 20 {
            return Err(DqnError::BadCheckpoint("header exceeds 1 MiB".into()));
        }
    }
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| DqnError::BadCheckpoint(format!("header parse: {e}")))?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(DqnError::BadCheckpoint(format!(
            "unsupported format {:?}, expected {CHECKPOINT_FORMAT:?}",
            header.format
        )));
    }
    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    if body.len() != header.param_count as usize * 8 {
        return Err(DqnError::BadCheckpoint(format!(
            "parameter block holds {} bytes, header promises {}",
            body.len(),
            header.param_count * 8
        )));
    }
    let data: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(DqnError::BadCheckpoint("non-finite parameter".into()));
    }
    let net = QNetwork::from_flat(&header.layer_sizes, &data)?;
    Ok((
        net,
        CheckpointMeta {
            seed: header.seed,
            train_steps: header.train_steps,
            train_config: header.train_config,
        },
    ))
}
