//! Acceptance gate. Prints one line per criterion and exits non-zero when
//! any of them fails.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::time::{Duration, Instant};

use pleasance::eventlog::{log_hash, read_log, replay, write_log};
use pleasance_core::bt::{estimate_ilsr, estimate_mm, BtOptions, ComparisonDataset, StrengthEstimate};
use pleasance_core::protocol::{build_schedule, LikertRating, ProtocolConfig};
use pleasance_core::simulation::{recovery_metrics, run_session, CohortConfig, RunOptions, SyntheticParticipant};
use pleasance_core::stimulus::{default_catalog, generate_trajectory_with, lm_vibration_frequency, StrokeRepeat};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

type Check = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_ratings(rng: &mut ChaCha8Rng) -> Vec<LikertRating> {
    (0..15u8).map(|i| LikertRating { stimulus_id: i, value: rng.random_range(-3..=3), is_anchor: false }).collect()
}

fn round_robin_count() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let all_once = ProtocolConfig { gap_repeats: vec![1; 7], synthetic_weight: 1 };
    for k in 0..2000 {
        let ratings = random_ratings(&mut rng);
        let counts = build_schedule(&ratings, 15, k, &ProtocolConfig::default()).map_err(|e| e.to_string())?.counts();
        ensure(counts.total_pairs() == 105, || format!("vector {k}: {} pairs classified", counts.total_pairs()))?;
        let full = build_schedule(&ratings, 15, k, &all_once).map_err(|e| e.to_string())?;
        ensure(full.trials.len() == 105 && full.omitted.is_empty(), || format!("vector {k}: {} trials", full.trials.len()))?;
    }
    Ok("2000 rating vectors, 105 pairs each".into())
}

fn count_identity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for k in 0..2000 {
        let ratings = random_ratings(&mut rng);
        let s = build_schedule(&ratings, 15, k, &ProtocolConfig::default()).map_err(|e| e.to_string())?;
        let c = s.counts();
        ensure(c.total_trials == 2 * c.twice() + c.once(), || format!("vector {k}: {c:?}"))?;
        ensure(c.omitted() + c.once() + c.twice() == 105, || format!("vector {k}: {c:?}"))?;
        // twice-presented pairs are exactly the equal-rating pairs
        let v: Vec<i8> = ratings.iter().map(|r| r.value).collect();
        let equal = (0..15).flat_map(|i| (i + 1..15).map(move |j| (i, j))).filter(|&(i, j)| v[i] == v[j]).count();
        ensure(c.twice() == equal, || format!("vector {k}: {equal} tied pairs"))?;
    }
    // reported averages, compared in tenths
    let (twice, once, total) = (13.1f64, 27.7f64, 53.9f64);
    let tenths = |x: f64| (x * 10.0).round() as i64;
    ensure(2 * tenths(twice) + tenths(once) == tenths(total), || "reported averages".into())?;
    Ok("2000 schedules; 2*13.1 + 27.7 = 53.9".into())
}

fn two_item_closed_form() -> Check {
    let ds = ComparisonDataset::from_pairs(2, &[(0, 1), (0, 1), (1, 0)]).map_err(|e| e.to_string())?;
    let opts = BtOptions { alpha: 0.0, tol: 1e-14, max_iter: 100_000, ..BtOptions::default() };
    let mut worst: f64 = 0.0;
    for est in [estimate_ilsr(&ds, &opts), estimate_mm(&ds, &opts)] {
        let ratio = est.map_err(|e| e.to_string())?.strength_ratio(0, 1);
        worst = worst.max((ratio - 2.0).abs());
    }
    ensure(worst < 1e-6, || format!("|ratio - 2| = {worst:e}"))?;
    Ok(format!("|ratio - 2| = {worst:.1e}"))
}

fn centered(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| x - m).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (centered(a), centered(b));
    a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn oracle_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = BtOptions { alpha: 0.05, tol: 1e-12, max_iter: 200_000, ..BtOptions::default() };
    let (mut worst_pair, mut worst_oracle): (f64, f64) = (0.0, 0.0);
    for k in 0..200 {
        let n = rng.random_range(2..=5);
        let m = rng.random_range(0..=30);
        let pairs: Vec<(usize, usize)> = (0..m)
            .map(|_| {
                let w = rng.random_range(0..n);
                let l = (w + rng.random_range(1..n)) % n;
                (w, l)
            })
            .collect();
        let ds = ComparisonDataset::from_pairs(n, &pairs).map_err(|e| e.to_string())?;
        let ilsr = estimate_ilsr(&ds, &opts).map_err(|e| e.to_string())?;
        let mm = estimate_mm(&ds, &opts).map_err(|e| e.to_string())?;
        let best = oracle::Problem { n, pairs: &pairs, alpha: opts.alpha }.solve();
        let d_pair = max_diff(&ilsr.theta, &mm.theta);
        let d_oracle = max_diff(&ilsr.theta, &best).max(max_diff(&mm.theta, &best));
        ensure(d_pair < 1e-4, || format!("instance {k}: ILSR vs MM {d_pair:e}"))?;
        ensure(d_oracle < 1e-3, || format!("instance {k}: vs oracle {d_oracle:e}"))?;
        worst_pair = worst_pair.max(d_pair);
        worst_oracle = worst_oracle.max(d_oracle);
    }
    Ok(format!("200 instances; max ILSR/MM {worst_pair:.1e}, max vs oracle {worst_oracle:.1e}"))
}

fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

fn check_normalized(est: &StrengthEstimate, what: &str) -> Result<bool, String> {
    let spread = est.theta.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - est.theta.iter().copied().fold(f64::INFINITY, f64::min);
    let Some(s) = &est.normalized_scores else {
        ensure(spread <= 1e-12, || format!("{what}: no scores for spread {spread:e}"))?;
        return Ok(false);
    };
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ensure(min == -3.0 && max == 3.0, || format!("{what}: range [{min}, {max}]"))?;
    // theta's argsort must sort the scores; only float-level ties may merge
    let order = argsort(&est.theta);
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        let strict = est.theta[b] - est.theta[a] > 1e-9 * spread;
        let ok = if strict { s[a] < s[b] } else { s[a] <= s[b] };
        ensure(ok, || format!("{what}: items {a} and {b} change order"))?;
    }
    Ok(true)
}

fn normalization_contract() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let opts = BtOptions::default();
    let mut checked = 0;
    for k in 0..500 {
        let n = rng.random_range(2..=15);
        let m = rng.random_range(0..=60);
        let pairs: Vec<(usize, usize)> = (0..m)
            .map(|_| {
                let w = rng.random_range(0..n);
                (w, (w + rng.random_range(1..n)) % n)
            })
            .collect();
        let ds = ComparisonDataset::from_pairs(n, &pairs).map_err(|e| e.to_string())?;
        let est = estimate_ilsr(&ds, &opts).map_err(|e| e.to_string())?;
        checked += check_normalized(&est, &format!("instance {k}"))? as usize;
    }
    for seed in 0..20 {
        let p = CohortConfig::calibrated(1, seed).participant(0, 15);
        let run = run_session(&p, default_catalog(), seed, &RunOptions::default()).map_err(|e| e.to_string())?;
        checked += check_normalized(&run.estimate, &format!("session {seed}"))? as usize;
    }
    Ok(format!("{checked} non-degenerate estimates"))
}

fn strict_utilities(seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u: Vec<f64> = (0..15).map(|i| i as f64 + rng.random_range(0.05..0.95)).collect();
    u.shuffle(&mut rng);
    u.iter().map(|x| x * rng.random_range(0.1..2.0)).collect()
}

fn noiseless_recovery() -> Check {
    for seed in 0..100 {
        let p = SyntheticParticipant {
            utilities: strict_utilities(10_000 + seed),
            choice_temperature: 1.0,
            rating_noise_sd: 0.0,
            deterministic_choice: true,
            seed,
        };
        let run = run_session(&p, default_catalog(), seed, &RunOptions::default()).map_err(|e| e.to_string())?;
        let tau = recovery_metrics(&p.utilities, &run.estimate.theta).map_err(|e| e.to_string())?.kendall_tau;
        ensure(tau == 1.0, || format!("seed {seed}: tau {tau}"))?;
    }
    Ok("100 seeds, tau = 1".into())
}

fn correlation_property() -> Check {
    let cohort = CohortConfig::calibrated(10, 21);
    let mut total = 0.0;
    for (i, p) in cohort.cohort(15).iter().enumerate() {
        let run = run_session(p, default_catalog(), 500 + i as u64, &RunOptions::default()).map_err(|e| e.to_string())?;
        total += run.result.r;
    }
    let mean = total / 10.0;
    ensure(mean > 0.8, || format!("mean r {mean:.3}"))?;
    Ok(format!("mean r {mean:.3} over 10 sessions"))
}

fn trial_budget() -> Check {
    let cohort = CohortConfig::calibrated(200, 31);
    let mut total = 0usize;
    for (i, p) in cohort.cohort(15).iter().enumerate() {
        let run = run_session(p, default_catalog(), 7000 + i as u64, &RunOptions::default()).map_err(|e| e.to_string())?;
        total += run.state.schedule().map_or(0, |s| s.trials.len());
    }
    let mean = total as f64 / 200.0;
    ensure((48.0..=60.0).contains(&mean), || format!("mean trials {mean:.1}"))?;
    Ok(format!("mean trials {mean:.1} over 200 seeds"))
}

fn lm_frequency() -> Check {
    let f = lm_vibration_frequency(100.0, 15.0).map_err(|e| e.to_string())?;
    let err = (f - 100.0 / 15.0).abs();
    ensure(err <= 1e-12, || format!("f = {f}"))?;
    Ok(format!("f = {f} Hz"))
}

fn trajectory_counts() -> Check {
    let mut max_x: f64 = 0.0;
    for spec in default_catalog() {
        for repeat in [StrokeRepeat::Wrap, StrokeRepeat::Clamp] {
            let frames = generate_trajectory_with(&spec, repeat);
            ensure(frames.len() == 3000, || format!("stimulus {}: {} frames", spec.id, frames.len()))?;
            if spec.pattern.is_lateral_modulation() {
                for f in &frames {
                    for focus in &f.foci {
                        max_x = max_x.max(focus.x_mm.abs());
                    }
                }
            }
        }
    }
    ensure(max_x <= 5.0, || format!("LM excursion {max_x}"))?;
    Ok(format!("15 stimuli x 2 stroke modes, 3000 frames; max LM |x| {max_x:.3} mm"))
}

fn digest<T: serde::Serialize>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("serializable")))
}

fn replay_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let opts = BtOptions::default();
    for seed in 0..20u64 {
        let p = CohortConfig::calibrated(1, seed).participant(0, 15);
        let run = run_session(&p, default_catalog(), seed, &RunOptions::default()).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("{seed}.jsonl"));
        write_log(&path, run.state.event_log()).map_err(|e| e.to_string())?;
        let state = replay(&read_log(&path).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        ensure(state == run.state, || format!("seed {seed}: state differs"))?;
        ensure(log_hash(state.event_log()) == log_hash(run.state.event_log()), || format!("seed {seed}: log hash"))?;
        let dataset = state.assemble_dataset().map_err(|e| e.to_string())?;
        ensure(digest(&dataset) == digest(&run.dataset), || format!("seed {seed}: dataset hash"))?;
        let est = estimate_ilsr(&dataset, &opts).map_err(|e| e.to_string())?;
        ensure(digest(&est) == digest(&run.estimate), || format!("seed {seed}: estimate hash"))?;
    }
    Ok("20 sessions; state, dataset and estimate hashes equal".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("round-robin count", Duration::from_secs(1), round_robin_count),
        ("count identity", Duration::from_secs(1), count_identity),
        ("two-item closed form", Duration::from_secs(1), two_item_closed_form),
        ("oracle equivalence", Duration::from_secs(60), oracle_equivalence),
        ("normalization contract", Duration::from_secs(1), normalization_contract),
        ("noiseless recovery", Duration::from_secs(30), noiseless_recovery),
        ("correlation property", Duration::from_secs(60), correlation_property),
        ("trial budget", Duration::from_secs(60), trial_budget),
        ("LM frequency", Duration::from_secs(1), lm_frequency),
        ("trajectory counts", Duration::from_secs(5), trajectory_counts),
        ("replay determinism", Duration::from_secs(10), replay_determinism),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
    println!("{} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
