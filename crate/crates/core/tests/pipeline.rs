mod common;

use common::synthetic::{spread_patterns, CoinOracle, PoolOracle, StepOracle};
use rand::Rng;
use spinmem::dynamics::{enumerate_minima, is_local_min};
use spinmem::pipeline::*;
use spinmem::sk::{realization_memories, sample_sk, SkSettings};
use spinmem::{DynamicsKind, RandomSource, SpinConfig};

fn quick() -> PipelineConfig {
    PipelineConfig {
        capacity_bootstrap: 200,
        samples_bootstrap: 50,
        volume_bootstrap: 20,
        basin_bootstrap: 30,
        ..PipelineConfig::default()
    }
}

#[test]
fn identity_oracle_returns_stimuli() {
    let rng = RandomSource::new(5);
    let out = sample_attractors(&IdentityOracle { n: 9 }, 25, &rng).unwrap();
    for (i, o) in out.iter().enumerate() {
        let mut r = rng.split(i as u64);
        assert_eq!(o, &SpinConfig::random_binary(9, &mut r));
    }
}

#[test]
fn sd_outputs_are_local_minima() {
    let sk = sample_sk(10, &mut RandomSource::new(12)).unwrap();
    let oracle = DescentOracle::new(sk.j.clone(), DynamicsKind::SD);
    for o in sample_attractors(&oracle, 100, &RandomSource::new(1)).unwrap() {
        assert!(is_local_min(&sk.j, &o).unwrap());
    }
}

#[test]
fn default_sample_table() {
    assert_eq!(
        [16, 12, 8, 4].map(default_samples),
        [400, 200, 100, 50]
    );
}

#[test]
fn identical_configs_one_candidate() {
    let c = vec![SpinConfig::from_signs(&[1, -1, 1, 1, -1]).unwrap(); 12];
    let cands = cluster_candidates(&c, 1.0, 0.21).unwrap();
    assert_eq!(cands.len(), 1);
    assert_eq!(cands[0].count(), 12);
}

#[test]
fn two_separated_groups_two_candidates() {
    let a = SpinConfig::from_signs(&[1, 1, 1, 1, 1, 1]).unwrap();
    let b = SpinConfig::from_signs(&[1, 1, 1, -1, -1, 1]).unwrap();
    let mut c = vec![a.clone(); 5];
    c.extend(vec![b.clone(); 7]);
    let cands = cluster_candidates(&c, 1.0, 0.21).unwrap();
    assert_eq!(cands.len(), 2);
    assert_eq!(cands[0].reference, a);
    assert_eq!(cands[1].reference, b);
    assert_eq!((cands[0].count(), cands[1].count()), (5, 7));
}

#[test]
fn planted_partition_recovered() {
    let n = 16;
    let mut rng = RandomSource::new(77);
    let centres = spread_patterns(n, 6, 4, &mut rng);
    let mut configs = Vec::new();
    let mut truth = Vec::new();
    for _ in 0..120 {
        let k = rng.random_range(0..centres.len());
        let v: Vec<f64> = centres[k]
            .values()
            .iter()
            .map(|s| s * (1.0 + 0.19 * rng.sample::<f64, _>(rand_distr::StandardNormal)))
            .collect();
        configs.push(SpinConfig::new(v).unwrap().unit().unwrap());
        truth.push(k);
    }
    let mut intra = Vec::new();
    for a in 0..configs.len() {
        for b in a + 1..configs.len() {
            let d = spinmem::spin::overlap_distance(&configs[a], &configs[b]).unwrap();
            if truth[a] == truth[b] {
                intra.push(d);
            } else {
                assert!(d >= 2.0, "{d}");
            }
        }
    }
    let mean_intra = intra.iter().sum::<f64>() / intra.len() as f64;
    assert!((mean_intra - 0.3).abs() < 0.1, "{mean_intra}");
    let cands = cluster_candidates(&configs, 1.0, 0.21).unwrap();
    let used: std::collections::BTreeSet<usize> = truth.iter().copied().collect();
    assert_eq!(cands.len(), used.len());
    for c in &cands {
        let k = truth[c.members[0]];
        assert!(c.members.iter().all(|&i| truth[i] == k));
        assert_eq!(c.count(), truth.iter().filter(|&&t| t == k).count());
        assert_eq!(c.reference, centres[k]);
    }
}

#[test]
fn screening_minimum_and_non_minimum() {
    let sk = sample_sk(10, &mut RandomSource::new(3)).unwrap();
    let oracle = DescentOracle::new(sk.j.clone(), DynamicsKind::SD);
    let minimum = enumerate_minima(&sk.j).unwrap().remove(0);
    let mut rng = RandomSource::new(4);
    let s = screen_candidate(&oracle, &Candidate::single(minimum.clone()), 30, 0.75, false, &mut rng).unwrap();
    assert!(s.pass && s.p0 == 1.0);
    let off = (0..10)
        .map(|k| minimum.flipped(k).unwrap())
        .find(|c| !is_local_min(&sk.j, c).unwrap())
        .unwrap();
    let s = screen_candidate(&oracle, &Candidate::single(off), 30, 0.75, false, &mut rng).unwrap();
    assert!(!s.pass && s.p0 == 0.0);
}

fn binomial_tail(n: u64, k: u64, p: f64) -> f64 {
    // P(X >= k) for X ~ Bin(n, p)
    let mut total = 0.0;
    for x in k..=n {
        let mut c = 1.0;
        for i in 0..x {
            c *= (n - i) as f64 / (i + 1) as f64;
        }
        total += c * p.powi(x as i32) * (1.0 - p).powi((n - x) as i32);
    }
    total
}

#[test]
fn screening_pass_rate_is_binomial() {
    let mut rng = RandomSource::new(8);
    let memory = SpinConfig::random_binary(8, &mut rng);
    let oracle = CoinOracle { memory: memory.clone(), decoy: memory.flipped(0).unwrap(), p: 0.8 };
    let cand = Candidate::single(memory);
    let reps = 2000;
    let passes = (0..reps)
        .filter(|_| screen_candidate(&oracle, &cand, 30, 0.75, true, &mut rng).unwrap().pass)
        .count();
    // pass iff at least 23 of 30 succeed
    let q = binomial_tail(30, 23, 0.8);
    let sigma = (q * (1.0 - q) / reps as f64).sqrt();
    let got = passes as f64 / reps as f64;
    assert!((got - q).abs() < 2.0 * sigma + 1e-3, "{got} vs {q}");
}

#[test]
fn step_oracle_basin_between_edges() {
    let mut rng = RandomSource::new(21);
    let memory = SpinConfig::random_binary(16, &mut rng);
    let oracle = StepOracle { memory: memory.clone(), edge: 3 };
    let cand = Candidate::single(memory);
    let cfg = PipelineConfig::default();
    for seed in 0..10 {
        let mut r = RandomSource::new(seed);
        let s = screen_candidate(&oracle, &cand, 30, 0.75, false, &mut r).unwrap();
        let curve = estimate_basin(&oracle, &cand, &s.outcomes, &cfg, &mut r).unwrap();
        assert!((2.0..=3.0).contains(&curve.basin), "seed {seed}: {}", curve.basin);
        for p in &curve.points {
            assert_eq!(p.p, if p.e < 3 { 1.0 } else { 0.0 });
        }
        assert!(curve.basin_err >= 0.0);
        assert_eq!(curve.trials.len(), 60);
    }
}

#[test]
fn always_failing_oracle_has_zero_basin() {
    let mut rng = RandomSource::new(2);
    let memory = SpinConfig::random_binary(12, &mut rng);
    let oracle = CoinOracle { memory: memory.clone(), decoy: memory.negated(), p: 0.0 };
    let cand = Candidate::single(memory);
    let curve = estimate_basin(&oracle, &cand, &[false; 30], &PipelineConfig::default(), &mut rng).unwrap();
    assert_eq!(curve.basin, 0.0);
}

#[test]
fn single_attractor_capacity_one() {
    let mut rng = RandomSource::new(3);
    let memory = SpinConfig::random_binary(8, &mut rng);
    let oracle = PoolOracle { memories: vec![memory.clone()], radius: 0 };
    let r = run_pipeline(&oracle, &quick(), &RandomSource::new(1)).unwrap();
    assert_eq!(r.capacity, 1.0);
    assert_eq!(r.memories, vec![memory]);
    assert_eq!(r.candidates[0].volume, 256.0);
}

#[test]
fn basin_volume_examples() {
    assert_eq!(basin_volume(400, 400, 16).unwrap(), 65536.0);
    assert_eq!(basin_volume(0, 400, 16).unwrap(), 0.0);
    let v = basin_volume(34, 400, 16).unwrap();
    assert!((v - 5570.56).abs() < 1e-9);
    assert!(basin_volume(1, 0, 4).is_err());
    assert!(basin_volume(5, 4, 4).is_err());
}

#[test]
fn samples_curve_flat_for_one_memory() {
    let labels = vec![Some(0); 100];
    let c = capacity_vs_samples(&labels, &default_sizes(100), 100, &mut RandomSource::new(1)).unwrap();
    assert!(c.rows.iter().all(|r| r.mean == 1.0));
    assert!((c.intercept - 1.0).abs() < 1e-12);
    assert!((c.fraction - 1.0).abs() < 1e-12);
}

#[test]
fn coupon_collector_intercept() {
    let mut rng = RandomSource::new(9);
    for k in [10usize, 30, 60] {
        let labels: Vec<Option<usize>> = (0..400).map(|_| Some(rng.random_range(0..k))).collect();
        let c = capacity_vs_samples(&labels, &default_sizes(400), 500, &mut rng).unwrap();
        let rel = (c.intercept - k as f64).abs() / k as f64;
        assert!(rel < 0.05, "K = {k}: intercept {}", c.intercept);
    }
}

#[test]
fn pool_oracle_pipeline_intercept() {
    let mut rng = RandomSource::new(10);
    let memories = spread_patterns(16, 25, 5, &mut rng);
    let oracle = PoolOracle { memories, radius: 2 };
    let r = run_pipeline(&oracle, &quick(), &RandomSource::new(4)).unwrap();
    assert_eq!(r.candidates.len(), 25);
    assert_eq!(r.capacity_count, 25);
    assert!(r.capacity > 24.0 && r.capacity <= 25.0, "{}", r.capacity);
    for c in &r.candidates {
        let b = c.curve.as_ref().unwrap().basin;
        assert!((2.0..=3.0).contains(&b), "{b}");
    }
    let rel = (r.capacity_vs_samples.intercept - 25.0).abs() / 25.0;
    assert!(rel < 0.05, "{}", r.capacity_vs_samples.intercept);
}

#[test]
fn sk_sd_capacity_matches_exhaustive_n16() {
    let sk = sample_sk(16, &mut RandomSource::new(2024)).unwrap();
    let settings = SkSettings::new(16, DynamicsKind::SD, 0.5);
    let truth = realization_memories(&sk.j, &settings, &mut RandomSource::new(0)).unwrap().memories as f64;
    let oracle = DescentOracle::new(sk.j.clone(), DynamicsKind::SD);

    let exact = run_pipeline(
        &oracle,
        &PipelineConfig { exact: true, strict: true, samples: Some(1000), ..quick() },
        &RandomSource::new(6),
    )
    .unwrap();
    assert_eq!(exact.capacity, truth);

    let sampled = run_pipeline(&oracle, &PipelineConfig { strict: true, ..quick() }, &RandomSource::new(6)).unwrap();
    let tol = 2.0 * sampled.capacity_err.max(1.0);
    assert!((sampled.capacity - truth).abs() <= tol, "{} +- {} vs {truth}", sampled.capacity, sampled.capacity_err);
}

#[test]
fn pipeline_is_deterministic() {
    let sk = sample_sk(10, &mut RandomSource::new(5)).unwrap();
    let oracle = DescentOracle::new(sk.j.clone(), DynamicsKind::MH);
    let a = run_pipeline(&oracle, &quick(), &RandomSource::new(99)).unwrap();
    let b = run_pipeline(&oracle, &quick(), &RandomSource::new(99)).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.trials_csv(), b.trials_csv());
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn stricter_threshold_never_adds_memories() {
    for seed in 0..4 {
        let sk = sample_sk(12, &mut RandomSource::new(seed)).unwrap();
        let oracle = DescentOracle::new(sk.j.clone(), DynamicsKind::MH);
        let run = |t: f64| {
            run_pipeline(&oracle, &PipelineConfig { threshold: t, exact: true, ..quick() }, &RandomSource::new(seed))
                .unwrap()
        };
        let (lo, hi) = (run(0.5), run(0.75));
        assert!(hi.capacity <= lo.capacity, "seed {seed}");
    }
}

#[test]
fn volumes_never_exceed_state_space() {
    let sk = sample_sk(12, &mut RandomSource::new(8)).unwrap();
    let oracle = DescentOracle::new(sk.j.clone(), DynamicsKind::SD);
    let r = run_pipeline(&oracle, &quick(), &RandomSource::new(2)).unwrap();
    let all: f64 = r.candidates.iter().map(|c| c.volume).sum();
    assert!((all - 4096.0).abs() < 1e-9);
    assert!(r.memory_volume_total <= 4096.0);
    let csv = r.trials_csv();
    assert!(csv.starts_with("candidate,e,success\n"));
}
