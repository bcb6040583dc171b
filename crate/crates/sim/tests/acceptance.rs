//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use uabs_core::channel::{self, collect_reward, ChannelParams, RewardParams};
use uabs_core::comps::{self, bc_loss, meta_gradient_for_episode, off_policy_adapt, MetaConfig, MetaGradMode};
use uabs_core::comps::{MetaState, TaskArchiveEntry};
use uabs_core::env::{self, Action, EncoderConfig, Simulator};
use uabs_core::policy::{init_params, PolicyArch, PolicyParams, N_ACTIONS};
use uabs_core::reinforce::{self, discounted_returns, policy_gradient, reinforce_update, Episode, RLConfig, StepRecord};
use uabs_sim::archive::{self, ArchiveError};
use uabs_sim::config::{Method, RunConfig, Scenario};
use uabs_sim::harness::{self, RunReport};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn main() {
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();

    let started = Instant::now();
    let toy_cfg = RunConfig::preset(Scenario::Toy);
    let toy = harness::run_toy(&toy_cfg);
    let toy_secs = started.elapsed().as_secs_f64();

    results.push((1, "toy ordering", match &toy {
        Ok(r) => toy_ordering(&toy_cfg, r, toy_secs),
        Err(e) => outcome(false, format!("toy run failed: {e}")),
    }));
    results.push((2, "cold-start equality", match &toy {
        Ok(r) => cold_start(&toy_cfg, r),
        Err(e) => outcome(false, format!("toy run failed: {e}")),
    }));
    results.push((3, "gradient correctness", gradient_checks()));
    results.push((4, "off-policy/on-policy reduction", off_policy_reduction()));
    results.push((5, "channel oracles", channel_oracles()));
    results.push((6, "reward law", reward_law()));
    results.push((7, "returns recursion", returns_recursion()));
    results.push((8, "BC loss anchor", bc_anchor()));
    results.push((9, "meta-gradient sanity", meta_gradient_sanity()));
    results.push((10, "meta-update makes no simulator calls", match &toy {
        Ok(r) => no_env_calls(&toy_cfg, r),
        Err(e) => outcome(false, format!("toy run failed: {e}")),
    }));
    results.push((11, "determinism and persistence", determinism_and_persistence()));

    println!();
    let mut failed = 0;
    for (n, name, o) in &results {
        println!("{} criterion {n:>2} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn tail_mean(r: &RunReport, method: Method, seed: u64, range: std::ops::RangeInclusive<usize>) -> f64 {
    let v: Vec<f64> = r
        .rows
        .iter()
        .filter(|row| row.method == method && row.seed == seed && range.contains(&row.task_index))
        .map(|row| row.mean_packets)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn toy_ordering(cfg: &RunConfig, r: &RunReport, secs: f64) -> Outcome {
    let mut wins = 0;
    let (mut comps_total, mut conv_total) = (0.0, 0.0);
    let mut per_seed = Vec::new();
    for &s in &cfg.seeds {
        let c = tail_mean(r, Method::Comps, s, 40..=49);
        let v = tail_mean(r, Method::Conventional, s, 40..=49);
        wins += usize::from(c >= v);
        comps_total += c;
        conv_total += v;
        per_seed.push(format!("{c:.1}/{v:.1}"));
    }
    let n = cfg.seeds.len() as f64;
    let (cm, vm) = (comps_total / n, conv_total / n);
    let gain = cm / vm - 1.0;
    println!("toy per-seed comps/conventional over i in [40,49]: {}", per_seed.join(" "));
    outcome(
        wins >= 8 && gain >= 0.15,
        format!(
            "comps >= conventional in {wins}/{} seeds; seed-mean {cm:.2} vs {vm:.2} ({:+.1}%); run took {secs:.0} s",
            cfg.seeds.len(),
            100.0 * gain
        ),
    )
}

fn cold_start(cfg: &RunConfig, r: &RunReport) -> Outcome {
    let mut mismatches = Vec::new();
    for &s in &cfg.seeds {
        let at0: Vec<f64> = Method::ALL
            .iter()
            .filter_map(|&m| r.rows.iter().find(|row| row.method == m && row.seed == s && row.task_index == 0))
            .map(|row| row.mean_packets)
            .collect();
        if at0.len() != 3 || at0.iter().any(|v| v.to_bits() != at0[0].to_bits()) {
            mismatches.push(format!("seed {s}: {at0:?}"));
        }
    }
    outcome(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            format!("identical i=0 mean_packets for all methods in {} seeds", cfg.seeds.len())
        } else {
            mismatches.join("; ")
        },
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

fn random_policy(rng: &mut ChaCha8Rng) -> PolicyParams {
    let input = rng.gen_range(2..7);
    let hidden: Vec<usize> = (0..rng.gen_range(0..3)).map(|_| rng.gen_range(2..8)).collect();
    let mut p = init_params(&PolicyArch::new(input, hidden), rng);
    for t in p.theta.iter_mut() {
        *t += rng.gen_range(-0.3..0.3);
    }
    p
}

fn random_features(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect()
}

fn random_episode(rng: &mut ChaCha8Rng, p: &PolicyParams, len: usize) -> Episode {
    let steps = (0..len)
        .map(|_| {
            let features = random_features(rng, p.arch.input_dim);
            let probs = p.action_probs(&features).unwrap();
            let (action, behavior_prob) = uabs_core::policy::sample_action(rng, &probs);
            StepRecord { features, action, reward: rng.gen_range(0..6), behavior_prob }
        })
        .collect();
    Episode::new(steps)
}

fn central_diff(p: &PolicyParams, f: impl Fn(&PolicyParams) -> f64) -> Vec<f64> {
    let h = 1e-5;
    let mut probe = p.clone();
    (0..p.len())
        .map(|k| {
            let base = probe.theta[k];
            probe.theta[k] = base + h;
            let up = f(&probe);
            probe.theta[k] = base - h;
            let down = f(&probe);
            probe.theta[k] = base;
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_lp, mut worst_pg) = (0.0f64, 0.0f64);
    let instances = 100;
    for _ in 0..instances {
        let p = random_policy(&mut rng);
        let x = random_features(&mut rng, p.arch.input_dim);
        let a = Action::from_index(rng.gen_range(0..N_ACTIONS)).unwrap();
        let g = p.log_prob_grad(&x, a).unwrap();
        let fd = central_diff(&p, |q| q.log_probs(&x).unwrap()[a.index()]);
        worst_lp = g.iter().zip(&fd).map(|(&u, &v)| rel_err(u, v)).fold(worst_lp, f64::max);

        let len = rng.gen_range(1..15);
        let e = random_episode(&mut rng, &p, len);
        let gamma = rng.gen_range(0.0..1.0);
        let g = policy_gradient(&p, &e, gamma).unwrap();
        let returns = discounted_returns(&e.rewards(), gamma);
        let surrogate = |q: &PolicyParams| {
            e.steps()
                .iter()
                .zip(&returns)
                .map(|(s, r)| r * q.log_probs(&s.features).unwrap()[s.action.index()])
                .sum::<f64>()
        };
        let fd = central_diff(&p, surrogate);
        worst_pg = g.iter().zip(&fd).map(|(&u, &v)| rel_err(u, v)).fold(worst_pg, f64::max);
    }
    outcome(
        worst_lp <= 1e-4 && worst_pg <= 1e-4,
        format!("{instances} instances each; worst relative error log_prob_grad {worst_lp:.2e}, policy_gradient {worst_pg:.2e}"),
    )
}

fn off_policy_reduction() -> Outcome {
    let enc = EncoderConfig::default();
    let arch = PolicyArch::new(enc.feature_len(), vec![64]);
    let (cw, ccw) = env::make_toy_tasks();
    let mut worst = 0.0f64;
    let episodes = 50;
    for i in 0..episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + i);
        let p = init_params(&arch, &mut rng);
        let task = if i % 2 == 0 { cw.clone() } else { ccw.clone() };
        let mut sim = Simulator::new(task, ChannelParams::toy(), RewardParams::default()).unwrap();
        let e = reinforce::run_episode(&p, &mut sim, &enc, &mut rng).unwrap();
        let eta = rng.gen_range(1e-4..1e-1);
        let gamma = rng.gen_range(0.5..1.0);
        let on = reinforce_update(&p, &e, &RLConfig { episodes: 1, gamma, eta }).unwrap();
        let off = off_policy_adapt(&p, &e, &MetaConfig { eta, gamma, ..MetaConfig::default() }).unwrap();
        worst = on.theta.iter().zip(&off.theta).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    outcome(worst <= 1e-12, format!("{episodes} toy episodes; max per-coordinate difference {worst:.2e}"))
}

fn channel_oracles() -> Outcome {
    let urban = ChannelParams::urban();
    let pl = channel::path_loss_db(30_000.0, 100.0, 0.0).unwrap();
    let snr = channel::snr_db(&urban, pl);
    let at_alpha = channel::p_los(urban.alpha, &urban);
    let exact = 1.0 / (1.0 + urban.alpha);
    let grid: Vec<f64> = (0..=90).map(|d| channel::p_los(d as f64, &urban)).collect();
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let pass = (pl - 101.9924).abs() <= 1e-3 && (snr - 18.0076).abs() <= 1e-3 && (at_alpha - exact).abs() <= 1e-12 && increasing;
    outcome(
        pass,
        format!(
            "path loss {pl:.4} dB, SNR {snr:.4} dB, p_los(alpha) - 1/(1+alpha) = {:.1e}, strictly increasing on 0..=90 deg: {increasing}",
            at_alpha - exact
        ),
    )
}

fn reward_law() -> Outcome {
    let rew = RewardParams { c_max: 10 };
    let mut problems = Vec::new();
    for count in 0..=20usize {
        let eligible: Vec<usize> = (0..count).map(|g| 2 * g + 1).collect();
        let mut seen = std::collections::BTreeSet::new();
        let draws = if count > 10 { 4000 } else { 50 };
        for seed in 0..draws {
            let c = collect_reward(&eligible, &rew, &mut ChaCha8Rng::seed_from_u64(seed));
            let ok = c.reward as usize == count.min(10)
                && c.served.len() == c.reward as usize
                && c.served.windows(2).all(|w| w[0] < w[1])
                && c.served.iter().all(|g| eligible.contains(g));
            if !ok {
                problems.push(format!("count {count} seed {seed}: {c:?}"));
            }
            seen.insert(c.served);
        }
        // On small overflows every admissible subset must be reachable.
        if (11..=13).contains(&count) {
            let subsets = binomial(count, 10);
            if seen.len() != subsets {
                problems.push(format!("count {count}: {} of {subsets} subsets reached", seen.len()));
            }
        }
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "r = min(10, count) and served is a sorted subset of eligible for counts 0..=20; all subsets reachable for 11..=13".into()
        } else {
            problems.join("; ")
        },
    )
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn returns_recursion() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let len = rng.gen_range(0..80);
        let r: Vec<f64> = (0..len).map(|_| rng.gen_range(0..11) as f64).collect();
        let gamma = rng.gen_range(0.0..=1.0);
        let g = discounted_returns(&r, gamma);
        for t in 0..len {
            let brute: f64 = (t..len).map(|k| gamma.powi((k - t) as i32) * r[k]).sum();
            worst = worst.max((g[t] - brute).abs() / brute.abs().max(1.0));
        }
    }
    outcome(worst <= 1e-12, format!("1000 sequences; worst relative deviation {worst:.2e}"))
}

fn bc_anchor() -> Outcome {
    let enc = EncoderConfig::default();
    let p = PolicyParams::zeros(&PolicyArch::new(enc.feature_len(), vec![64]));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let steps = (0..60)
        .map(|_| StepRecord {
            features: random_features(&mut rng, enc.feature_len()),
            action: Action::from_index(rng.gen_range(0..N_ACTIONS)).unwrap(),
            reward: 1,
            behavior_prob: 1.0 / 9.0,
        })
        .collect();
    let loss = bc_loss(&p, &Episode::new(steps)).unwrap();
    let expect = 60.0 * 9f64.ln();
    outcome((loss - expect).abs() <= 1e-9, format!("loss {loss:.12}, 60 ln 9 = {expect:.12}"))
}

fn small_entry(rng: &mut ChaCha8Rng, p: &PolicyParams) -> TaskArchiveEntry {
    let full_set: Vec<Episode> = (0..3).map(|_| random_episode(rng, p, 20)).collect();
    let totals: Vec<u64> = full_set.iter().map(Episode::total_reward).collect();
    let skilled_index = reinforce::select_skilled(&totals).unwrap();
    TaskArchiveEntry { task_index: 0, full_set, skilled_index }
}

fn meta_gradient_sanity() -> Outcome {
    let arch = PolicyArch::new(3, vec![3]);
    assert!(arch.param_count() <= 50);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst0 = 0.0f64;
    let mut cosines = Vec::new();
    for _ in 0..20 {
        let p = init_params(&arch, &mut rng);
        let entry = small_entry(&mut rng, &p);
        let n = rng.gen_range(0..entry.full_set.len());

        let cfg0 = MetaConfig { eta: 0.0, ..MetaConfig::default() };
        let fo = meta_gradient_for_episode(&p, &entry, n, &cfg0, MetaGradMode::FirstOrder).unwrap();
        let fd = meta_gradient_for_episode(&p, &entry, n, &cfg0, MetaGradMode::FiniteDifference).unwrap();
        worst0 = fo.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(worst0, f64::max);

        let cfg = MetaConfig { eta: rng.gen_range(1e-3..1e-1), ..MetaConfig::default() };
        let fo = meta_gradient_for_episode(&p, &entry, n, &cfg, MetaGradMode::FirstOrder).unwrap();
        let fd = meta_gradient_for_episode(&p, &entry, n, &cfg, MetaGradMode::FiniteDifference).unwrap();
        let dot: f64 = fo.iter().zip(&fd).map(|(a, b)| a * b).sum();
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        cosines.push(dot / (norm(&fo) * norm(&fd)));
    }
    let mean_cos = cosines.iter().sum::<f64>() / cosines.len() as f64;
    let min_cos = cosines.iter().copied().fold(f64::INFINITY, f64::min);
    outcome(
        worst0 <= 1e-6 && mean_cos > 0.0,
        format!(
            "eta=0 max difference {worst0:.2e}; eta in [1e-3,1e-1] on {}-parameter nets: mean cosine {mean_cos:.6} (min {min_cos:.6}) over 20 trials",
            arch.param_count()
        ),
    )
}

fn no_env_calls(cfg: &RunConfig, r: &RunReport) -> Outcome {
    let expected = cfg.seeds.len() * cfg.k;
    let nonzero = r.audit.iter().filter(|a| a.env_calls_during_meta != 0).count();
    outcome(
        nonzero == 0 && r.audit.len() == expected,
        format!("{} meta-updates audited (expected {expected}); {nonzero} with simulator calls", r.audit.len()),
    )
}

fn run_cli(dir: &Path, out: &str) -> Result<Vec<u8>, String> {
    let status = Command::new(env!("CARGO_BIN_EXE_uabs"))
        .args(["toy", "--config"])
        .arg(dir.join("small.toml"))
        .arg("--out")
        .arg(dir.join(out))
        .output()
        .map_err(|e| e.to_string())?;
    if !status.status.success() {
        return Err(String::from_utf8_lossy(&status.stderr).into_owned());
    }
    let text = std::fs::read_to_string(dir.join(out)).map_err(|e| e.to_string())?;
    Ok(text
        .lines()
        .filter(|l| !l.starts_with("# timestamp="))
        .flat_map(|l| l.bytes().chain(*b"\n"))
        .collect())
}

fn determinism_and_persistence() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.toml"), "K = 6\nN = 10\nseeds = [0, 1, 2]\n").unwrap();
    let (a, b) = match (run_cli(dir.path(), "a.csv"), run_cli(dir.path(), "b.csv")) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, format!("CLI run failed: {e}")),
    };
    let identical = a == b && !a.is_empty();

    let enc = EncoderConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut state = MetaState::new(init_params(&PolicyArch::new(enc.feature_len(), vec![64]), &mut rng));
    let (cw, ccw) = env::make_toy_tasks();
    for task in [cw, ccw] {
        let mut sim = Simulator::new(task, ChannelParams::toy(), RewardParams::default()).unwrap();
        comps::train_and_archive(&mut state, &mut sim, &RLConfig { episodes: 4, ..RLConfig::default() }, &enc, &mut rng)
            .unwrap();
    }
    let path = dir.path().join("meta.arch");
    archive::save(&state, &path).unwrap();
    let back = archive::load(&path).unwrap();
    let lossless = archive::encode(&back) == archive::encode(&state)
        && back.theta0.theta.iter().zip(&state.theta0.theta).all(|(x, y)| x.to_bits() == y.to_bits())
        && back == state;

    let bytes = std::fs::read(&path).unwrap();
    let mut corrupt = bytes.clone();
    let mid = bytes.len() / 2;
    corrupt[mid] ^= 0x01;
    let detects_flip = matches!(archive::decode(&corrupt), Err(ArchiveError::ChecksumMismatch));
    let detects_cut = matches!(archive::decode(&bytes[..bytes.len() - 10]), Err(ArchiveError::Truncated));

    outcome(
        identical && lossless && detects_flip && detects_cut,
        format!(
            "CLI metrics identical apart from timestamp: {identical}; archive ({} bytes) round-trip bitwise: {lossless}; flipped byte detected: {detects_flip}; truncation detected: {detects_cut}",
            bytes.len()
        ),
    )
}
