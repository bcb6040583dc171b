use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uabs_core::channel::{self, collect_reward, ChannelParams, RewardParams};
use uabs_core::env::{
    self, encode_state, gen_random_task, uabs_move, Action, AreaSpec, EncoderConfig, GueSpec, RandomTaskSpec,
    Simulator, WaypointPath,
};
use uabs_core::geom::Vec2;
use uabs_core::policy::{init_params, PolicyArch, N_ACTIONS};
use uabs_core::reinforce::discounted_returns;

fn area() -> AreaSpec {
    AreaSpec::new(300.0, 200.0, 100.0).unwrap()
}

fn point() -> impl Strategy<Value = Vec2> {
    (0.0..=300.0f64, 0.0..=200.0f64).prop_map(|(x, y)| Vec2::new(x, y))
}

proptest! {
    #[test]
    fn uabs_never_leaves_area(start in point(), acts in prop::collection::vec(0..N_ACTIONS, 1..80), v in 0.0..60.0f64) {
        let a = area();
        let mut p = start;
        for i in acts {
            p = uabs_move(p, Action::from_index(i).unwrap(), v, &a);
            prop_assert!(a.contains(p), "{p:?}");
        }
    }

    #[test]
    fn gue_advances_by_arc_length(
        pts in prop::collection::vec(point(), 2..6),
        speed in 0.5..40.0f64,
        start in 1u32..10,
    ) {
        let path = WaypointPath::new(pts, &area()).unwrap();
        let len = path.length();
        prop_assume!(len > 1.0);
        let g = GueSpec { path: path.clone(), speed, start_time: start };
        let horizon = 10_000;
        prop_assert_eq!(g.position(start - 1, horizon), None);
        prop_assert_eq!(g.position(start, horizon), Some(path.points()[0]));
        let mut last_active = start;
        for t in start..start + 2 + (len / speed) as u32 + 2 {
            match g.position(t, horizon) {
                Some(p) => {
                    let walked = ((t - start) as f64 * speed).min(len);
                    let expect = path.point_at(walked);
                    prop_assert!(p.distance(expect) < 1e-6, "t={} {:?} vs {:?}", t, p, expect);
                    prop_assert_eq!(t, last_active + u32::from(t > start));
                    last_active = t;
                }
                None => prop_assert!(t > last_active),
            }
        }
        // The step that reaches the end is the final active one.
        let end_pos = g.position(last_active, horizon).unwrap();
        prop_assert!(end_pos.distance(*path.points().last().unwrap()) < 1e-6);
    }

    #[test]
    fn encoding_has_fixed_length(seed in any::<u64>(), k_nn in 0usize..12, steps in 0u32..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let task = gen_random_task(&RandomTaskSpec::urban(), &mut rng);
        let enc = EncoderConfig { k_nn };
        let chan = ChannelParams::urban();
        let rew = RewardParams::default();
        let mut s = env::reset(&task, &mut rng);
        for _ in 0..steps.min(task.horizon) {
            let f = encode_state(&s, &task, &enc);
            prop_assert_eq!(f.len(), enc.feature_len());
            prop_assert!(f.iter().all(|v| v.is_finite()));
            let active = s.gues.iter().filter(|g| g.active()).count();
            let filled = (0..k_nn).filter(|k| f[2 + 3 * k] == 1.0).count();
            prop_assert_eq!(filled, active.min(k_nn));
            let a = Action::from_index(rng.gen_range(0..N_ACTIONS)).unwrap();
            s = env::step(&s, a, &task, &chan, &rew, &mut rng).unwrap().next;
        }
    }

    #[test]
    fn reward_law(n in 0usize..40, c_max in 0u32..15, seed in any::<u64>()) {
        let eligible: Vec<usize> = (0..n).map(|i| i * 3 + 1).collect();
        let c = collect_reward(&eligible, &RewardParams { c_max }, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(c.reward as usize, n.min(c_max as usize));
        prop_assert_eq!(c.served.len(), c.reward as usize);
        prop_assert!(c.served.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(c.served.iter().all(|g| eligible.contains(g)));
    }

    #[test]
    fn returns_match_double_sum(rewards in prop::collection::vec(0.0..20.0f64, 0..60), gamma in 0.0..=1.0f64) {
        let g = discounted_returns(&rewards, gamma);
        prop_assert_eq!(g.len(), rewards.len());
        for t in 0..rewards.len() {
            let brute: f64 = (t..rewards.len()).map(|k| gamma.powi((k - t) as i32) * rewards[k]).sum();
            prop_assert!((g[t] - brute).abs() <= 1e-12 * brute.abs().max(1.0), "t={} {} vs {}", t, g[t], brute);
        }
    }

    #[test]
    fn score_function_has_zero_mean(seed in any::<u64>(), x in prop::collection::vec(-2.0..2.0f64, 4)) {
        let p = init_params(&PolicyArch::new(4, vec![6]), &mut ChaCha8Rng::seed_from_u64(seed));
        let probs = p.action_probs(&x).unwrap();
        let mut acc = vec![0.0; p.len()];
        for (i, &pi) in probs.iter().enumerate() {
            let g = p.log_prob_grad(&x, Action::from_index(i).unwrap()).unwrap();
            for (a, gi) in acc.iter_mut().zip(g) {
                *a += pi * gi;
            }
        }
        prop_assert!(acc.iter().all(|v| v.abs() < 1e-12), "{acc:?}");
        prop_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p_los_is_monotone_and_bounded(a in 0.0..90.0f64, b in 0.0..90.0f64) {
        let c = ChannelParams::urban();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (pl, ph) = (channel::p_los(lo, &c), channel::p_los(hi, &c));
        prop_assert!(pl <= ph);
        prop_assert!((0.0..=1.0).contains(&pl) && (0.0..=1.0).contains(&ph));
    }
}

#[test]
fn same_seed_same_trajectory() {
    let (cw, _) = env::make_toy_tasks();
    let run = |seed| {
        let mut sim = Simulator::new(cw.clone(), ChannelParams::toy(), RewardParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = sim.reset(&mut rng);
        let mut out = Vec::new();
        while !s.is_terminal(sim.task()) {
            let a = Action::from_index(rng.gen_range(0..N_ACTIONS)).unwrap();
            let tr = sim.step(&s, a, &mut rng).unwrap();
            out.push((tr.reward, tr.served.clone(), tr.next.uabs_pos));
            s = tr.next;
        }
        (out, sim.calls())
    };
    let (a, calls) = run(5);
    assert_eq!(a, run(5).0);
    assert_eq!(a.len(), 60);
    assert_eq!(calls, 61);
}

#[test]
fn stepping_past_horizon_fails() {
    let (cw, _) = env::make_toy_tasks();
    let mut sim = Simulator::new(cw, ChannelParams::toy(), RewardParams::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut s = sim.reset(&mut rng);
    for _ in 0..60 {
        s = sim.step(&s, Action::Hover, &mut rng).unwrap().next;
    }
    assert!(sim.step(&s, Action::Hover, &mut rng).is_err());
}
