// scratch experiment: train with RunningAverage reference and evaluate
use wfplace::rl::*;
use wfplace::rl::train_from;
use wfplace::sim::*;
use wfplace::scenario::*;
use wfplace::optimize::OptimizerConfig;

fn main() {
    let cfg_path = std::env::args().nth(1).unwrap();
    let episodes: usize = std::env::args().nth(2).unwrap().parse().unwrap();
    let maxstep: usize = std::env::args().nth(3).unwrap().parse().unwrap();
    let update_every: usize = std::env::args().nth(4).unwrap().parse().unwrap();
    let reference: String = std::env::args().nth(5).unwrap();
    let lr_actor: f64 = std::env::args().nth(6).map(|v| v.parse().unwrap()).unwrap_or(0.001);
    let lr_critic: f64 = std::env::args().nth(7).map(|v| v.parse().unwrap()).unwrap_or(0.001);
    let noise_end: f64 = std::env::args().nth(8).map(|v| v.parse().unwrap()).unwrap_or(0.01);
    let gamma: f64 = std::env::args().nth(9).map(|v| v.parse().unwrap()).unwrap_or(0.99);
    let s = load_scenario(&cfg_path).unwrap();
    let mut cfg = SimConfig::desk_scale();
    cfg.optimizer = OptimizerConfig { n: 24, itermax: 60, ..Default::default() };
    cfg.slot_optimizer = OptimizerConfig { n: 16, itermax: 40, ..Default::default() };
    cfg.rl_train = TrainConfig {
        episodes, maxstep, update_every,
        reward_reference: if reference == "avg" { RewardReference::RunningAverage } else { RewardReference::MinTable },
        lr_actor, lr_critic, noise_end, gamma,
        seed: 7,
        ..Default::default()
    };
    let t0 = std::time::Instant::now();
    let mut env = SlotPlacementEnv::new(&s, &cfg).unwrap();
    // Train in segments, printing greedy performance between them.
    let segment = 25usize;
    let mut done_eps = 0usize;
    let mut nets_so_far: Option<wfplace::rl::ActorCritic> = None;
    let mut out = None;
    while done_eps < episodes {
        let chunk = segment.min(episodes - done_eps);
        let mut c = cfg.rl_train.clone();
        c.episodes = chunk;
        c.seed = cfg.rl_train.seed + done_eps as u64;
        // keep the noise schedule global across segments
        let f0 = done_eps as f64 / episodes as f64;
        let f1 = (done_eps + chunk) as f64 / episodes as f64;
        c.noise_start = cfg.rl_train.noise_start + f0 * (cfg.rl_train.noise_end - cfg.rl_train.noise_start);
        c.noise_end = cfg.rl_train.noise_start + f1 * (cfg.rl_train.noise_end - cfg.rl_train.noise_start);
        let o = train_from(&mut env, &c, nets_so_far.take()).unwrap();
        done_eps += chunk;
        let mut ce = cfg.clone();
        ce.rl_policy = Some(o.nets.clone());
        let g = run_strategy(&s, Strategy::DymRl, &ce, 7).unwrap();
        eprintln!("after {done_eps} eps: greedy avg {:.2}", g.avg_slot_time.seconds_f64());
        nets_so_far = Some(o.nets.clone());
        out = Some(o);
    }
    let out = out.unwrap();
    eprintln!("train: {:?} ({} updates)", t0.elapsed(), out.updates);
    // learning curve: mean committed t_avg per episode quartile
    let eps: Vec<usize> = out.log.iter().map(|r| r.episode).collect();
    let max_ep = *eps.iter().max().unwrap();
    for e in [1, max_ep/4, max_ep/2, max_ep] {
        let sel: Vec<f64> = out.log.iter().filter(|r| r.episode == e).map(|r| r.t_avg).collect();
        eprintln!("episode {e}: final-step t_avg mean {:.2}", sel.iter().sum::<f64>()/sel.len() as f64);
    }
    // evaluation: 20 paired seeds
    let t1 = std::time::Instant::now();
    let mut sums = [0.0f64; 3];
    let n_eval = 20;
    for seed in 0..n_eval {
        let mut c = cfg.clone();
        c.rl_policy = Some(out.nets.clone());
        let rl = run_strategy(&s, Strategy::DymRl, &c, seed).unwrap();
        let rnd = run_strategy(&s, Strategy::Random, &c, seed).unwrap();
        let dd = run_strategy(&s, Strategy::DeDpso, &c, seed).unwrap();
        sums[0] += rl.avg_slot_time.seconds_f64();
        sums[1] += rnd.avg_slot_time.seconds_f64();
        sums[2] += dd.avg_slot_time.seconds_f64();
    }
    eprintln!("eval ({:?}): dym_rl {:.2}, random {:.2}, de_dpso {:.2}", t1.elapsed(),
        sums[0]/n_eval as f64, sums[1]/n_eval as f64, sums[2]/n_eval as f64);
    eprintln!("rl/random = {:.3} (need <= 0.8), rl/de_dpso = {:.3} (need <= 1.1)",
        sums[0]/sums[1], sums[0]/sums[2]);
    // diagnostic: inspect the first decision slot with the trained nets
    {
        use wfplace::rl::PlacementEnv;
        let mut env2 = SlotPlacementEnv::new(&s, &cfg).unwrap();
        let state = env2.reset().unwrap();
        let codec = env2.codec().clone();
        let nets = &out.nets;
        // actor greedy proposal
        let scores = nets.actor.forward(&state).unwrap();
        let act = codec.action_from_flat(scores);
        let step = env2.propose(&act).unwrap();
        let q_greedy = nets.critic_value(&nets.critic, &state, &step.realized_action).unwrap();
        eprintln!("slot0 greedy: t={:.2} Q={:.3}", step.slot_time, q_greedy);
        // default (birth) time = current_slot_time at reset
        let t_default = env2.current_slot_time();
        eprintln!("slot0 default t={:.2}", t_default);
        // sample 200 random placements: measure best t and correlation of Q with t
        let mut x = 0x12345678u64;
        let mut next = move || { x ^= x << 13; x ^= x >> 7; x ^= x << 17; (x as f64 / u64::MAX as f64) * 2.0 - 1.0 };
        let mut best_t = f64::INFINITY;
        let mut best_q_of_best_t = 0.0;
        let mut pairs: Vec<(f64, f64)> = vec![];
        for _ in 0..200 {
            let flat: Vec<f64> = (0..codec.action_dim()).map(|_| next()).collect();
            let a = codec.action_from_flat(flat);
            let st = env2.propose(&a).unwrap();
            let q = nets.critic_value(&nets.critic, &state, &st.realized_action).unwrap();
            pairs.push((st.slot_time, q));
            if st.slot_time < best_t { best_t = st.slot_time; best_q_of_best_t = q; }
        }
        let n = pairs.len() as f64;
        let (mt, mq) = (pairs.iter().map(|p| p.0).sum::<f64>()/n, pairs.iter().map(|p| p.1).sum::<f64>()/n);
        let cov = pairs.iter().map(|p| (p.0-mt)*(p.1-mq)).sum::<f64>()/n;
        let (st_, sq) = ((pairs.iter().map(|p| (p.0-mt)*(p.0-mt)).sum::<f64>()/n).sqrt(), (pairs.iter().map(|p| (p.1-mq)*(p.1-mq)).sum::<f64>()/n).sqrt());
        eprintln!("slot0 sampled 200: best_t={:.2} (Q={:.3}), mean_t={:.2}, corr(t,Q)={:.3}", best_t, best_q_of_best_t, mt, cov/(st_*sq));
    }
    // diagnostic: greedy eval on the exact training build map (seed = train seed)
    let mut c = cfg.clone();
    c.rl_policy = Some(out.nets.clone());
    let rl_train_seed = run_strategy(&s, Strategy::DymRl, &c, 7).unwrap();
    eprintln!("greedy at train seed: {:.2}", rl_train_seed.avg_slot_time.seconds_f64());
    let dd_train_seed = run_strategy(&s, Strategy::DeDpso, &c, 7).unwrap();
    let per_slot = |s: &wfplace::sim::RunSummary| -> Vec<f64> {
        s.reports.iter().map(|r| r.time.seconds_f64()).collect()
    };
    eprintln!("per-slot rl:      {:?}", per_slot(&rl_train_seed).iter().map(|v| (v*10.0).round()/10.0).collect::<Vec<_>>());
    eprintln!("per-slot de_dpso: {:?}", per_slot(&dd_train_seed).iter().map(|v| (v*10.0).round()/10.0).collect::<Vec<_>>());
}
