//! Actor-critic training over a slotted placement environment.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use super::codec::{ActionMatrix, StateCodec, StateVector};
use super::net::{soft_update, ActorCritic, MlpGrads};
use super::replay::{ReplayBuffer, Transition};
use super::reward::{compute_reward, RewardReference};
use super::RlError;

/// Result of proposing a placement for the current slot.
pub struct EnvStep {
    pub state: StateVector,
    /// Evaluation time of the slot under the proposed placement.
    pub slot_time: f64,
    /// The placement actually applied, as a one-hot action matrix: the
    /// replay memory stores realized decisions, not raw noisy scores.
    pub realized_action: Vec<f64>,
}

/// A slotted environment the trainer refines placements against. Each
/// slot accepts several proposals; the best one is committed when the
/// slot advances.
pub trait PlacementEnv {
    fn codec(&self) -> &StateCodec;
    /// Start a fresh episode; returns the state at the first slot.
    fn reset(&mut self) -> Result<StateVector, RlError>;
    /// Evaluation time of the slot's default placement, before any
    /// proposal.
    fn current_slot_time(&self) -> f64;
    /// Try a placement for this slot's pending datasets.
    fn propose(&mut self, action: &ActionMatrix) -> Result<EnvStep, RlError>;
    /// Commit the best proposal seen this slot and advance. Returns the
    /// committed slot time, the committed placement as a flat one-hot
    /// action, and the next state (None when the episode is over).
    fn advance_slot(&mut self) -> Result<(f64, Vec<f64>, Option<StateVector>), RlError>;
    /// Zero-based index of the current decision slot.
    fn slot_index(&self) -> usize;
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub episodes: usize,
    pub maxstep: usize,
    pub gamma: f64,
    pub tau: f64,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub buffer_capacity: usize,
    pub batch: usize,
    pub hidden: usize,
    pub noise_start: f64,
    pub noise_end: f64,
    /// Gradient updates run every this-many environment steps.
    pub update_every: usize,
    /// Softmax temperature of the policy-gradient projection.
    pub policy_temperature: f64,
    pub reward_reference: RewardReference,
    /// Whether rewards compare per-slot times or episode running averages.
    pub reward_granularity: RewardGranularity,
    pub seed: u64,
}

/// Time signal the reward operates on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardGranularity {
    /// The slot's own evaluation time; sharp per-action signal.
    #[default]
    SlotTime,
    /// Running average over the episode's committed slots.
    EpisodeAverage,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 200,
            maxstep: 20,
            gamma: 0.99,
            tau: 0.01,
            lr_actor: 0.001,
            lr_critic: 0.001,
            buffer_capacity: 1500,
            batch: 32,
            hidden: 64,
            noise_start: 0.3,
            noise_end: 0.01,
            update_every: 1,
            policy_temperature: 1.0,
            reward_reference: RewardReference::MinTable,
            reward_granularity: RewardGranularity::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainLogRow {
    pub episode: usize,
    pub slot: usize,
    pub reward: f64,
    pub t_avg: f64,
    pub min_t: f64,
}

pub struct TrainOutput {
    pub nets: ActorCritic,
    /// Minimum average transfer time observed per slot index.
    pub min_t: Vec<f64>,
    pub log: Vec<TrainLogRow>,
    pub updates: u64,
    pub transitions: u64,
}

/// Actor output plus zero-mean Gaussian exploration noise. Half of the
/// noisy draws perturb every score; the other half concentrate a strong
/// kick on a few pending rows, which explores single-dataset moves around
/// the current policy.
pub fn act_with_noise<R: Rng>(
    nets: &ActorCritic,
    codec: &StateCodec,
    state: &[f64],
    noise_scale: f64,
    rng: &mut R,
) -> Result<ActionMatrix, RlError> {
    let mut out = nets.actor.forward(state)?;
    if noise_scale != 0.0 {
        if rng.random::<f64>() < 0.5 {
            for v in out.iter_mut() {
                let z: f64 = StandardNormal.sample(rng);
                *v += noise_scale * z;
            }
        } else {
            let layout = codec.action_layout();
            let pending: Vec<usize> = (0..layout.rows)
                .filter(|&r| {
                    state
                        .get(layout.pending_offset + r)
                        .is_some_and(|&v| v != 0.0)
                })
                .collect();
            if !pending.is_empty() {
                let kicks = rng.random_range(1..=pending.len().min(3));
                for _ in 0..kicks {
                    let row = pending[rng.random_range(0..pending.len())];
                    for c in 0..layout.cols {
                        let z: f64 = StandardNormal.sample(rng);
                        out[row * layout.cols + c] += 2.0 * z;
                    }
                }
            }
        }
    }
    Ok(codec.action_from_flat(out))
}

/// How to read pending-dataset flags out of a state vector, so policy
/// scores can be projected onto the same manifold as the stored realized
/// actions (one-hot on pending rows, zeros elsewhere). `rows == 0` means
/// no masking. The temperature keeps the projection soft enough that the
/// policy gradient does not vanish once scores separate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionLayout {
    pub cols: usize,
    pub rows: usize,
    /// Offset of the per-row pending flags inside the state vector.
    pub pending_offset: usize,
    pub temperature: f64,
}

impl ActionLayout {
    pub fn unmasked(cols: usize) -> Self {
        ActionLayout {
            cols,
            rows: 0,
            pending_offset: 0,
            temperature: 1.0,
        }
    }

    pub fn with_temperature(mut self, t: f64) -> Self {
        self.temperature = t;
        self
    }

    fn row_pending(&self, state: &[f64], row: usize) -> bool {
        if self.rows == 0 {
            return true;
        }
        state
            .get(self.pending_offset + row)
            .is_some_and(|&v| v != 0.0)
    }
}

/// Row-wise softmax over pending rows, zeros elsewhere: the critic is
/// trained on realized one-hot placements, so policy scores are mapped
/// onto that manifold before they reach it.
fn row_softmax(scores: &[f64], state: &[f64], layout: &ActionLayout) -> Vec<f64> {
    let cols = layout.cols;
    let mut out = Vec::with_capacity(scores.len());
    for (r, row) in scores.chunks(cols).enumerate() {
        if !layout.row_pending(state, r) {
            out.extend(std::iter::repeat(0.0).take(row.len()));
            continue;
        }
        let t = layout.temperature.max(1e-6);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = row.iter().map(|v| ((v - max) / t).exp()).collect();
        let sum: f64 = exps.iter().sum();
        out.extend(exps.iter().map(|e| e / sum));
    }
    out
}

/// Backward through the masked row softmax: grad_z = y .* (grad_y -
/// (grad_y . y)) per pending row, zeros on masked rows.
fn row_softmax_backward(soft: &[f64], upstream: &[f64], state: &[f64], layout: &ActionLayout) -> Vec<f64> {
    let cols = layout.cols;
    let mut out = Vec::with_capacity(soft.len());
    let t = layout.temperature.max(1e-6);
    for (r, (y, g)) in soft.chunks(cols).zip(upstream.chunks(cols)).enumerate() {
        if !layout.row_pending(state, r) {
            out.extend(std::iter::repeat(0.0).take(y.len()));
            continue;
        }
        let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
        out.extend(y.iter().zip(g).map(|(a, b)| a * (b - dot) / t));
    }
    out
}

/// Per-sample targets y_j = rw_j + gamma * Q'(s'_j, mu'(s'_j)), with the
/// target actor's scores softmaxed onto the placement simplex. Terminal
/// transitions do not bootstrap.
pub fn critic_targets(
    batch: &[&Transition],
    gamma: f64,
    nets: &ActorCritic,
    layout: &ActionLayout,
) -> Result<Vec<f64>, RlError> {
    let mut out = Vec::with_capacity(batch.len());
    for t in batch {
        if t.done {
            out.push(t.reward);
            continue;
        }
        let next_scores = nets.actor_target.forward(&t.next_state)?;
        let next_action = row_softmax(&next_scores, &t.next_state, layout);
        let q = nets.critic_value(&nets.critic_target, &t.next_state, &next_action)?;
        out.push(t.reward + gamma * q);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
}

/// One critic descent step on the mean squared target error and one actor
/// ascent step along the sampled policy gradient.
pub fn update_networks(
    batch: &[&Transition],
    nets: &mut ActorCritic,
    lr_actor: f64,
    lr_critic: f64,
    gamma: f64,
    layout: &ActionLayout,
) -> Result<UpdateStats, RlError> {
    assert!(!batch.is_empty());
    let b = batch.len() as f64;
    let targets = critic_targets(batch, gamma, nets, layout)?;

    let mut critic_grads = MlpGrads::zeros_like(&nets.critic);
    let mut loss = 0.0;
    for (t, &y) in batch.iter().zip(&targets) {
        let mut input = t.state.clone();
        input.extend_from_slice(&t.action);
        let trace = nets.critic.forward_trace(&input)?;
        let q = trace.output()[0];
        let err = y - q;
        loss += err * err / b;
        // d(mean (y - q)^2)/dq = -2 (y - q) / B
        let (g, _) = nets.critic.backprop(&trace, &[-2.0 * err / b]);
        critic_grads.add(&g);
    }
    if !loss.is_finite() {
        return Err(RlError::NonFinite("critic loss"));
    }
    nets.critic.descend(&critic_grads, lr_critic);

    let mut actor_grads = MlpGrads::zeros_like(&nets.actor);
    let state_dim = nets.actor.input_dim();
    for t in batch.iter() {
        let actor_trace = nets.actor.forward_trace(&t.state)?;
        let soft = row_softmax(actor_trace.output(), &t.state, layout);
        let mut input = t.state.clone();
        input.extend_from_slice(&soft);
        let critic_trace = nets.critic.forward_trace(&input)?;
        // dQ/da through the critic, averaged over the batch, then back
        // through the softmax onto the raw scores.
        let (_, dinput) = nets.critic.backprop(&critic_trace, &[1.0 / b]);
        let dq_dsoft = &dinput[state_dim..];
        let dq_dscores = row_softmax_backward(&soft, dq_dsoft, &t.state, layout);
        let (g, _) = nets.actor.backprop(&actor_trace, &dq_dscores);
        actor_grads.add(&g);
    }
    nets.actor.add_scaled(&actor_grads, lr_actor); // ascent

    if !nets.actor.is_finite() || !nets.critic.is_finite() {
        return Err(RlError::NonFinite("network parameters"));
    }
    Ok(UpdateStats { critic_loss: loss })
}

/// Run the full training loop: episodes over slots over refinement steps,
/// with replay, target networks, and the per-slot minimum table.
pub fn train<E: PlacementEnv>(env: &mut E, cfg: &TrainConfig) -> Result<TrainOutput, RlError> {
    train_from(env, cfg, None)
}

/// As `train`, optionally resuming from existing networks.
pub fn train_from<E: PlacementEnv>(
    env: &mut E,
    cfg: &TrainConfig,
    resume: Option<ActorCritic>,
) -> Result<TrainOutput, RlError> {
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let codec = env.codec().clone();
    let mut nets = resume.unwrap_or_else(|| {
        ActorCritic::new(codec.state_dim(), codec.action_dim(), cfg.hidden, &mut rng)
    });
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut min_t: Vec<f64> = Vec::new();
    let mut log = Vec::new();
    let mut updates = 0u64;
    let mut transitions = 0u64;
    let mut step_counter = 0u64;

    for episode in 1..=cfg.episodes {
        let noise_scale = if cfg.episodes <= 1 {
            cfg.noise_start
        } else {
            let f = (episode - 1) as f64 / (cfg.episodes - 1) as f64;
            cfg.noise_start + f * (cfg.noise_end - cfg.noise_start)
        };
        let mut state = env.reset()?;
        let mut committed_sum = 0.0;
        let mut committed_count = 0usize;
        loop {
            let k = env.slot_index();
            let slot_entry_state = state.clone();
            let baseline = env.current_slot_time();
            // The reward compares either per-slot times or episode running
            // averages, depending on the configured granularity.
            let as_signal = |slot_time: f64, committed_sum: f64, committed_count: usize| match cfg
                .reward_granularity
            {
                RewardGranularity::SlotTime => slot_time,
                RewardGranularity::EpisodeAverage => {
                    (committed_sum + slot_time) / (committed_count + 1) as f64
                }
            };
            let baseline_signal = as_signal(baseline, committed_sum, committed_count);
            if min_t.len() <= k {
                min_t.resize(k + 1, f64::INFINITY);
            }
            if !min_t[k].is_finite() {
                // First encounter: seed with the default-policy value.
                min_t[k] = baseline_signal;
            }
            let mut prev_t = baseline;
            let mut last_reward = 0.0;
            let mut last_avg = baseline_signal;
            let mut last_action: Vec<f64> = Vec::new();
            for step in 0..cfg.maxstep {
                let action = act_with_noise(&nets, &codec, &state, noise_scale, &mut rng)?;
                let EnvStep {
                    state: next_state,
                    slot_time,
                    realized_action,
                } = env.propose(&action)?;
                let t_prev = as_signal(prev_t, committed_sum, committed_count);
                let t_next = as_signal(slot_time, committed_sum, committed_count);
                let reference = match cfg.reward_reference {
                    RewardReference::MinTable => min_t[k],
                    RewardReference::RunningAverage => t_prev,
                };
                let reward = compute_reward(episode, t_prev, t_next, reference);
                if min_t[k] > t_next {
                    min_t[k] = t_next;
                }
                last_action = realized_action.clone();
                buffer.push(Transition {
                    state: state.clone(),
                    action: realized_action,
                    reward,
                    next_state: next_state.clone(),
                    done: step + 1 == cfg.maxstep,
                });
                transitions += 1;
                if buffer.len() >= cfg.batch && step_counter % cfg.update_every as u64 == 0 {
                    let batch = buffer.sample(cfg.batch, &mut rng)?;
                    update_networks(
                        &batch,
                        &mut nets,
                        cfg.lr_actor,
                        cfg.lr_critic,
                        cfg.gamma,
                        &codec.action_layout().with_temperature(cfg.policy_temperature),
                    )?;
                    soft_update(&nets.critic, &mut nets.critic_target, cfg.tau);
                    soft_update(&nets.actor, &mut nets.actor_target, cfg.tau);
                    updates += 1;
                }
                step_counter += 1;
                state = next_state;
                prev_t = slot_time;
                last_reward = reward;
                last_avg = t_next;
            }
            log.push(TrainLogRow {
                episode,
                slot: k,
                reward: last_reward,
                t_avg: last_avg,
                min_t: min_t[k],
            });
            let (committed, committed_action, next) = env.advance_slot()?;
            // The committed placement is the action the run actually
            // applies; remembering it keeps the replay memory anchored on
            // good placements even late in training. When the last
            // proposal already was the commit, there is nothing to add.
            let commit_is_new = committed_action != last_action;
            let t_prev = as_signal(baseline, committed_sum, committed_count);
            let t_next = as_signal(committed, committed_sum, committed_count);
            let reference = match cfg.reward_reference {
                RewardReference::MinTable => min_t[k],
                RewardReference::RunningAverage => t_prev,
            };
            let commit_reward = compute_reward(episode, t_prev, t_next, reference);
            if min_t[k] > t_next {
                min_t[k] = t_next;
            }
            if commit_is_new {
                buffer.push(Transition {
                    state: slot_entry_state,
                    action: committed_action,
                    reward: commit_reward,
                    next_state: state.clone(),
                    done: true,
                });
                transitions += 1;
            }
            committed_sum += committed;
            committed_count += 1;
            match next {
                Some(next_state) => state = next_state,
                None => break,
            }
        }
    }
    Ok(TrainOutput {
        nets,
        min_t,
        log,
        updates,
        transitions,
    })
}
