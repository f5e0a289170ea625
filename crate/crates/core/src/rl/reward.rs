//! Piecewise reward over average transmission times.

/// (c1, c2, c3, c4).
pub const REWARD_C: (f64, f64, f64, f64) = (0.1, 1.0, 0.1, 0.01);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardBranch {
    /// First episode: proportional improvement of the average time.
    FirstEpisode,
    /// Later episodes, close to the best seen: bonus plus shaped gap.
    NearBest,
    /// Later episodes, far from the best seen: small shaped gap.
    Far,
}

/// What the middle branch compares the new average against: the per-slot
/// minimum table (default) or the episode running average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RewardReference {
    #[default]
    MinTable,
    RunningAverage,
}

/// Exactly one branch applies to any input.
pub fn reward_branch(episode: usize, t_next: f64, min_t: f64) -> RewardBranch {
    let (_, _, c3, _) = REWARD_C;
    if episode <= 1 {
        RewardBranch::FirstEpisode
    } else if t_next < min_t + 1.0 / c3 {
        RewardBranch::NearBest
    } else {
        RewardBranch::Far
    }
}

/// Reward for moving the average transfer time from `t_prev` to `t_next`
/// in episode `episode` (1-based), with `min_t` the reference minimum for
/// the current slot.
pub fn compute_reward(episode: usize, t_prev: f64, t_next: f64, min_t: f64) -> f64 {
    let (c1, c2, c3, c4) = REWARD_C;
    match reward_branch(episode, t_next, min_t) {
        RewardBranch::FirstEpisode => c1 * (t_prev - t_next),
        RewardBranch::NearBest => c2 + c3 * (min_t - t_next),
        RewardBranch::Far => c4 * (min_t - t_next),
    }
}
