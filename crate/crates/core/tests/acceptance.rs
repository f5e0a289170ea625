//! Acceptance suite: one test per criterion, each printing a PASS line.
//! Run with `cargo test --test acceptance -- --nocapture` to see them.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use common::*;
use wfplace::model::{
    capacity_feasible, slot_transfer_time, stage_transfer_time, validate_scenario, ChargePolicy,
    DatasetId, Stage,
};
use wfplace::optimize::{run_de_dpso, OptimizerConfig};
use wfplace::rl::{
    compute_reward, reward_branch, soft_update, ActorCritic, Mlp, ReplayBuffer, RewardBranch,
    Transition,
};

fn pass(criterion: &str, detail: String, started: Instant) {
    println!(
        "criterion {criterion}: PASS ({detail}, {:.2?})",
        started.elapsed()
    );
}

/// Criterion 1: stage/slot transfer times equal an independent per-dataset
/// accumulator exactly (rational arithmetic) on 200 random scenarios with
/// at most 3 datacenters and 8 datasets.
#[test]
fn criterion_1_transfer_time_oracle_equivalence() {
    let started = Instant::now();
    let mut compared = 0usize;
    for seed in 0..200u64 {
        let s = random_tiny_scenario(seed);
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xfeed);
        let p = random_placement_over(&s, &mut rng);
        for stage in [Stage::Build, Stage::Runtime] {
            for policy in [ChargePolicy::PerTransfer, ChargePolicy::PerConsumer] {
                let got = stage_transfer_time(&s, &p, stage, policy).unwrap();
                let (pri, sh, ush, total) = oracle_stage_times(&s, &p, stage, policy);
                assert_eq!(*got.private.ratio(), pri, "seed {seed} {stage:?} {policy:?}");
                assert_eq!(*got.public_shared.ratio(), sh, "seed {seed}");
                assert_eq!(*got.public_unshared.ratio(), ush, "seed {seed}");
                assert_eq!(*got.total.ratio(), total, "seed {seed}");
                compared += 4;
            }
        }
        // Slot accounting against a direct per-demand loop.
        let mut demands: Vec<(DatasetId, wfplace::model::DcId)> = Vec::new();
        for d in &s.datasets {
            if rng.random_range(0..2) == 0 {
                let dc = s.datacenters[rng.random_range(0..s.datacenters.len())].id;
                demands.push((d.id, dc));
            }
        }
        let report = slot_transfer_time(&s, &p, &demands, 1).unwrap();
        let mut time = num_rational::BigRational::from_integer(0.into());
        let mut moves = 0u64;
        let mut bytes = 0u64;
        for &(d, dest) in &demands {
            let loc = p.get(d).unwrap();
            if loc != dest {
                time += oracle_cost(&s, loc, dest, s.dataset(d).unwrap().size_mb);
                moves += 1;
                bytes += s.dataset(d).unwrap().size_mb;
            }
        }
        assert_eq!(*report.time.ratio(), time, "seed {seed} slot");
        assert_eq!(report.moves, moves);
        assert_eq!(report.bytes_mb, bytes);
        compared += 1;
    }
    assert!(started.elapsed().as_secs_f64() < 5.0, "criterion 1 over budget");
    pass("1 (transfer-time oracle equivalence)", format!("{compared} comparisons over 200 scenarios"), started);
}

/// Criterion 2: on 20 three-datacenter fixtures with 6 public datasets,
/// the hybrid optimizer at the published parameters returns the
/// 729-placement enumeration optimum in at least 95 of 100 seeded runs
/// per fixture.
#[test]
fn criterion_2_build_time_optimality_at_desk_scale() {
    let started = Instant::now();
    let fixtures: Vec<u64> = (0..20).collect();
    let results: Vec<(u64, usize, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = fixtures
            .chunks(10)
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|&f| {
                            let s = enumeration_fixture(f ^ 0xace0);
                            assert_eq!(validate_scenario(&s), vec![]);
                            assert_eq!(s.public_order().len(), 6);
                            let optimum = enumeration_optimum(&s);
                            let mut hits = 0usize;
                            let mut worst = 0.0f64;
                            for seed in 0..100u64 {
                                let cfg = OptimizerConfig {
                                    n: 100,
                                    itermax: 2000,
                                    f: 0.15,
                                    cr_p: 0.1,
                                    cr_g: 0.1,
                                    seed,
                                };
                                let t0 = Instant::now();
                                let (_, fit) = run_de_dpso(&s, &cfg).unwrap();
                                worst = worst.max(t0.elapsed().as_secs_f64());
                                if *fit.ratio() == optimum {
                                    hits += 1;
                                }
                            }
                            (f, hits, worst)
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect()
    });
    let mut min_hits = 100usize;
    let mut slowest = 0.0f64;
    for (fixture, hits, worst) in results {
        assert!(
            hits >= 95,
            "fixture {fixture}: only {hits}/100 runs reached the enumeration optimum"
        );
        min_hits = min_hits.min(hits);
        slowest = slowest.max(worst);
    }
    assert!(slowest < 10.0, "a run took {slowest:.2} s (budget 10 s)");
    pass(
        "2 (build-time optimality at desk scale)",
        format!("worst fixture {min_hits}/100 hits, slowest run {slowest:.3} s"),
        started,
    );
}

/// Criterion 3: every actor/critic parameter gradient and the critic's
/// action-input gradient match central finite differences (h = 1e-5) at
/// relative error < 1e-4, on networks with 64 hidden units.
#[test]
fn criterion_3_gradient_correctness() {
    let started = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(99);
    let state_dim = 10;
    let action_dim = 12;
    let nets = ActorCritic::new(state_dim, action_dim, 64, &mut rng);
    let state: Vec<f64> = (0..state_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let action: Vec<f64> = (0..action_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h = 1e-5;
    let tol = 1e-4;
    let mut checked = 0usize;

    let check_net = |net: &Mlp, input: &[f64], weights: &[f64], checked: &mut usize| {
        let objective = |net: &Mlp| -> f64 {
            net.forward(input)
                .unwrap()
                .iter()
                .zip(weights)
                .map(|(o, w)| o * w)
                .sum()
        };
        let trace = net.forward_trace(input).unwrap();
        let (grads, dx) = net.backprop(&trace, weights);
        let flat: Vec<f64> = grads
            .layers
            .iter()
            .flat_map(|l| l.w.iter().chain(l.b.iter()).copied())
            .collect();
        let mut probe = net.clone();
        let n_params = flat.len();
        for idx in 0..n_params {
            let orig = probe.params().nth(idx).unwrap();
            {
                let p = probe.params_mut().nth(idx).unwrap();
                *p = orig + h;
            }
            let up = objective(&probe);
            {
                let p = probe.params_mut().nth(idx).unwrap();
                *p = orig - h;
            }
            let down = objective(&probe);
            {
                let p = probe.params_mut().nth(idx).unwrap();
                *p = orig;
            }
            let numeric = (up - down) / (2.0 * h);
            let analytic = flat[idx];
            let denom = (numeric.abs() + analytic.abs()).max(1e-8);
            assert!(
                (numeric - analytic).abs() / denom < tol,
                "param {idx}: numeric {numeric} vs analytic {analytic}"
            );
            *checked += 1;
        }
        dx
    };

    // Actor: every parameter.
    let aw: Vec<f64> = (0..action_dim).map(|i| ((i * 7) as f64 * 0.13).sin()).collect();
    check_net(&nets.actor, &state, &aw, &mut checked);

    // Critic: every parameter, plus the action-input gradient that drives
    // the policy update.
    let mut critic_input = state.clone();
    critic_input.extend_from_slice(&action);
    let dx = check_net(&nets.critic, &critic_input, &[1.0], &mut checked);
    for k in 0..action_dim {
        let mut up = critic_input.clone();
        up[state_dim + k] += h;
        let mut down = critic_input.clone();
        down[state_dim + k] -= h;
        let numeric =
            (nets.critic.forward(&up).unwrap()[0] - nets.critic.forward(&down).unwrap()[0])
                / (2.0 * h);
        let analytic = dx[state_dim + k];
        let denom = (numeric.abs() + analytic.abs()).max(1e-8);
        assert!(
            (numeric - analytic).abs() / denom < tol,
            "critic action grad {k}: numeric {numeric} vs analytic {analytic}"
        );
        checked += 1;
    }
    assert!(started.elapsed().as_secs_f64() < 30.0, "criterion 3 over budget");
    pass("3 (gradient correctness)", format!("{checked} gradients checked"), started);
}

/// Criterion 4: exhaustive branch tests of the reward with
/// c = (0.1, 1, 0.1, 0.01) match hand-evaluated values to 1e-12, and
/// exactly one branch fires per input.
#[test]
fn criterion_4_reward_function() {
    let started = Instant::now();
    let cases = [
        // (episode, t_prev, t_next, min_t, expected)
        (1usize, 500.0, 450.0, 0.0, 5.0),
        (1, 100.0, 100.0, 0.0, 0.0),
        (1, 10.0, 60.0, 999.0, -5.0),
        (2, 0.0, 405.0, 400.0, 1.0 + 0.1 * (400.0 - 405.0)), // 0.5
        (2, 0.0, 400.0, 400.0, 1.0),
        (3, 0.0, 395.0, 400.0, 1.0 + 0.1 * 5.0),
        (2, 0.0, 600.0, 400.0, 0.01 * (400.0 - 600.0)), // -2.0
        (2, 0.0, 410.0, 400.0, 0.01 * -10.0),
        (7, 0.0, 1e6, 0.0, 0.01 * -1e6),
    ];
    for (episode, t_prev, t_next, min_t, expected) in cases {
        let got = compute_reward(episode, t_prev, t_next, min_t);
        assert!(
            (got - expected).abs() <= 1e-12,
            "reward({episode}, {t_prev}, {t_next}, {min_t}) = {got}, expected {expected}"
        );
    }
    let mut count = 0usize;
    for episode in [1usize, 2, 3, 5, 50] {
        for t_next in [0.0, 1.0, 9.99, 10.0, 10.01, 399.0, 409.999, 410.0, 1e9] {
            for min_t in [0.0, 1.0, 400.0, 1e8] {
                let b = reward_branch(episode, t_next, min_t);
                let first = episode <= 1;
                let near = episode > 1 && t_next < min_t + 10.0;
                let far = episode > 1 && t_next >= min_t + 10.0;
                let fired = [first, near, far].iter().filter(|&&x| x).count();
                assert_eq!(fired, 1);
                match b {
                    RewardBranch::FirstEpisode => assert!(first),
                    RewardBranch::NearBest => assert!(near),
                    RewardBranch::Far => assert!(far),
                }
                count += 1;
            }
        }
    }
    pass("4 (reward function)", format!("{count} branch inputs partitioned"), started);
}

/// Criterion 5: the soft-update contraction holds exactly, and the replay
/// ring keeps exactly the last `capacity` transitions over 10 000 random
/// insert/sample sequences.
#[test]
fn criterion_5_ddpg_mechanics() {
    let started = Instant::now();
    // Exact contraction on dyadic values, where float arithmetic is exact.
    let tau = 0.25;
    let mut online = Mlp::zeros(&[2, 2]);
    let mut target = Mlp::zeros(&[2, 2]);
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    for (o, t) in online.params_mut().zip([1.0, 0.5, -0.75, 2.0, 0.25, -1.5]) {
        *o = t;
    }
    for (tp, v) in target.params_mut().zip([0.0, -0.5, 0.25, 1.0, -0.25, 0.5]) {
        *tp = v;
    }
    let before: Vec<f64> = target.params().collect();
    let online_params: Vec<f64> = online.params().collect();
    soft_update(&online, &mut target, tau);
    for ((t_new, t_old), o) in target.params().zip(before).zip(online_params) {
        assert_eq!(t_new - o, (1.0 - tau) * (t_old - o), "exact contraction");
    }
    // tau = 1 and tau = 0 are the identity cases, exactly.
    let snapshot = target.clone();
    soft_update(&online, &mut target, 1.0);
    assert_eq!(target, online);
    target = snapshot.clone();
    soft_update(&online, &mut target, 0.0);
    assert_eq!(target, snapshot);
    // Random values contract within float tolerance.
    let mut t2 = Mlp::new(&[3, 4, 2], &mut rng);
    let o2 = Mlp::new(&[3, 4, 2], &mut rng);
    let before: Vec<f64> = t2.params().collect();
    soft_update(&o2, &mut t2, 0.01);
    for ((t_new, t_old), o) in t2.params().zip(before).zip(o2.params()) {
        assert!(((t_new - o) - 0.99 * (t_old - o)).abs() < 1e-12);
    }

    // Ring semantics over 10 000 random insert/sample operations.
    let mut pushed = 0u64;
    let mut ops = 0usize;
    let mut capacity = 1;
    let mut buf = ReplayBuffer::new(capacity); // replaced per sequence below
    for op in 0..10_000usize {
        if op % 500 == 0 {
            capacity = rng.random_range(1..=64);
            buf = ReplayBuffer::new(capacity);
            pushed = 0;
        }
        if rng.random_range(0..3) < 2 {
            buf.push(Transition {
                state: vec![pushed as f64],
                action: vec![],
                reward: pushed as f64,
                next_state: vec![],
                done: false,
            });
            pushed += 1;
            let held: Vec<u64> = buf.iter_in_order().map(|t| t.reward as u64).collect();
            let expect: Vec<u64> = (pushed.saturating_sub(capacity as u64)..pushed).collect();
            assert_eq!(held, expect, "ring order after {pushed} pushes");
        } else {
            let batch = rng.random_range(1..=8);
            match buf.sample(batch, &mut rng) {
                Ok(sampled) => {
                    assert_eq!(sampled.len(), batch);
                    let mut seen = BTreeSet::new();
                    for t in sampled {
                        assert!(t.reward as u64 >= pushed.saturating_sub(capacity as u64));
                        assert!((t.reward as u64) < pushed);
                        seen.insert(t.reward as u64);
                    }
                    assert_eq!(seen.len(), batch, "sampling without replacement");
                }
                Err(_) => assert!(buf.len() < batch),
            }
        }
        ops += 1;
    }
    pass("5 (DDPG mechanics)", format!("{ops} buffer operations verified"), started);
}

/// Criterion 9 (model side): bandwidth scaling is exactly homogeneous and
/// the stage decomposition always adds up; the engine-side invariants are
/// asserted by every simulation in this suite.
#[test]
fn model_invariants_monotonicity_and_decomposition() {
    let started = Instant::now();
    let mut checked = 0usize;
    for seed in 0..40u64 {
        let s = random_tiny_scenario(seed);
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xd00d);
        let p = random_placement_over(&s, &mut rng);
        let base = stage_transfer_time(&s, &p, Stage::Build, ChargePolicy::PerTransfer).unwrap();

        // Scale every bandwidth by k: every time scales by exactly 1/k.
        let k = 4u64;
        let scaled_matrix: Vec<Vec<f64>> = (0..s.datacenters.len())
            .map(|i| {
                (0..s.datacenters.len())
                    .map(|j| s.bandwidth.mbps(i, j) * k as f64)
                    .collect()
            })
            .collect();
        let s2 = wfplace::model::Scenario::assemble(
            s.regions,
            s.datacenters.clone(),
            wfplace::model::BandwidthTable::new(scaled_matrix).unwrap(),
            s.workflows.clone(),
            s.datasets.clone(),
            s.events.clone(),
        )
        .unwrap();
        let scaled = stage_transfer_time(&s2, &p, Stage::Build, ChargePolicy::PerTransfer).unwrap();
        assert_eq!(scaled.total.scale(k, 1), base.total, "homogeneity, seed {seed}");

        // Decomposition identity.
        let sum = base.private.clone() + &base.public_shared + &base.public_unshared;
        assert_eq!(sum, base.total);
        let _ = capacity_feasible(&s, &p);
        checked += 2;
    }
    pass("9a (model invariants)", format!("{checked} checks over 40 scenarios"), started);
}
