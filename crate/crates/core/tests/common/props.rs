//! Property checks shared by the property suite and the acceptance run.
//! Each runs `cases` fuzz cases and returns the first failure.

use std::sync::LazyLock;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use spinmem::cavity::{CavityParams, SitePlan};
use spinmem::pipeline::{crossing, run_pipeline, tanh_curve, DescentOracle, PipelineConfig};
use spinmem::semiclassical::{Model, Network, NetworkState, SimParams, TrialDrive};
use spinmem::sk::sample_sk;
use spinmem::spin::*;
use spinmem::{DynamicsKind, RandomSource, SpinConfig};

fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    })
}

pub fn binary(max_n: usize) -> impl Strategy<Value = SpinConfig> {
    proptest::collection::vec(prop::bool::ANY, 2..=max_n)
        .prop_map(|b| SpinConfig::binary(b.into_iter().map(|x| if x { 1.0 } else { -1.0 }).collect()).unwrap())
}

pub fn gaussian_j(n: usize, seed: u64) -> CouplingMatrix {
    sample_sk(n, &mut RandomSource::new(seed)).unwrap().j
}

/// Single-flip energy deltas agree with full recomputation along a walk.
pub fn energy_deltas(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(binary(20), any::<u64>()), |(s, seed)| {
            let j = gaussian_j(s.len(), seed);
            let e0 = ising_energy(&j, &s).unwrap();
            let mut cur = s.clone();
            let mut e = e0;
            for k in 0..s.len() {
                let d = delta_energy(&j, &cur, k).unwrap();
                cur = cur.flipped(k).unwrap();
                let next = ising_energy(&j, &cur).unwrap();
                prop_assert!((e + d - next).abs() <= 1e-12 * (1.0 + next.abs()) * s.len() as f64);
                e = next;
            }
            for k in (0..s.len()).rev() {
                cur = cur.flipped(k).unwrap();
            }
            prop_assert_eq!(&cur, &s);
            prop_assert!((ising_energy(&j, &cur).unwrap() - e0).abs() <= 1e-12 * (1.0 + e0.abs()));
            prop_assert!((e0 - ising_energy(&j, &s.negated()).unwrap()).abs() <= 1e-12 * (1.0 + e0.abs()));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Overlap distance equals the twin-folded Hamming distance on binary
/// patterns and is symmetric and flip invariant.
pub fn overlap_is_hamming(cases: u32) -> Result<(), String> {
    let pair = (1usize..=24).prop_flat_map(|n| {
        (proptest::collection::vec(prop::bool::ANY, n), proptest::collection::vec(prop::bool::ANY, n))
    });
    runner(cases)
        .run(&pair, |(x, y)| {
            let to = |b: &[bool]| SpinConfig::binary(b.iter().map(|&v| if v { 1.0 } else { -1.0 }).collect()).unwrap();
            let (a, b) = (to(&x), to(&y));
            let n = a.len();
            let (ua, ub) = (a.unit().unwrap(), b.unit().unwrap());
            let d = overlap_distance(&ua, &ub).unwrap();
            let h = a.hamming(&b).unwrap();
            prop_assert!((d - h.min(n - h) as f64).abs() < 1e-9);
            prop_assert!(d >= 0.0);
            prop_assert_eq!(d, overlap_distance(&ub, &ua).unwrap());
            prop_assert!((d - overlap_distance(&ua.negated(), &ub).unwrap()).abs() < 1e-12);
            prop_assert!((d - overlap_distance(&ua, &ub.negated()).unwrap()).abs() < 1e-12);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// The fitted-curve crossing inverts the tanh model.
pub fn tanh_crossing(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(0.5001f64..2.0, 0.05f64..5.0, -5.0f64..10.0, 0.05f64..0.95), |(a1, a2, a3, thr)| {
            let a = [a1, a2, a3];
            prop_assume!(a1 > thr);
            let b = crossing(&a, thr).unwrap();
            prop_assert!((tanh_curve(&a, b) - thr).abs() < 1e-9, "{:?} {} {}", a, thr, b);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub static NETWORK: LazyLock<Network> =
    LazyLock::new(|| Network::new(SitePlan::j1(), CavityParams::default(), SimParams::default()).unwrap());

/// Random spins on the sphere, positions within 4 µm of the centres, stimulus
/// signs and a time in the trial.
pub fn sc_state() -> impl Strategy<Value = (NetworkState, Vec<bool>, f64)> {
    let n = 16;
    (
        proptest::collection::vec((0.0f64..std::f64::consts::PI, 0.0f64..std::f64::consts::TAU), n),
        proptest::collection::vec((-4.0f64..4.0, -4.0f64..4.0), n),
        proptest::collection::vec(prop::bool::ANY, n),
        0.0f64..8.0,
    )
        .prop_map(|(angles, offsets, signs, t)| {
            let centres = NETWORK.plan.sites();
            let mut s = NetworkState::normal(centres);
            for i in 0..angles.len() {
                let (th, ph) = angles[i];
                s.sx[i] = 0.5 * th.sin() * ph.cos();
                s.sy[i] = 0.5 * th.sin() * ph.sin();
                s.sz[i] = 0.5 * th.cos();
                s.positions[i] = [centres[i][0] + offsets[i].0, centres[i][1] + offsets[i].1];
            }
            (s, signs, t)
        })
}

pub fn drive(signs: &[bool]) -> TrialDrive {
    let s = SpinConfig::binary(signs.iter().map(|&b| if b { 1.0 } else { -1.0 }).collect()).unwrap();
    TrialDrive::clean(&NETWORK, &s).unwrap()
}

/// `S · dS/dt = 0` at every site.
pub fn spin_length_conserved(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&sc_state(), |(state, signs, t)| {
            let d = drive(&signs);
            let mut m = Model::new(&NETWORK, &d);
            let y = state.to_vec();
            let mut dy = vec![0.0; y.len()];
            m.rhs(t, &y, &mut dy);
            let n = state.len();
            let scale = dy.iter().take(3 * n).map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..n {
                let dot = y[i] * dy[i] + y[n + i] * dy[n + i] + y[2 * n + i] * dy[2 * n + i];
                prop_assert!(dot.abs() <= 1e-12 * scale.max(1.0), "site {}: {}", i, dot);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Analytic position gradient against central differences, within 1e-6
/// relative to the largest gradient component.
pub fn gradient_matches_fd(cases: u32) -> Result<(), String> {
    runner(cases)
        .run(&(sc_state(), 0usize..16, 0usize..2), |((state, signs, t), site, axis)| {
            let d = drive(&signs);
            let mut m = Model::new(&NETWORK, &d);
            let g = m.position_gradient(t, &state);
            let big = g.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max);
            let h = 1e-4;
            let mut at = |delta: f64| {
                let mut s = state.clone();
                s.positions[site][axis] += delta;
                m.energy(t, &s).total()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let want = g[site][axis];
            prop_assert!((fd - want).abs() <= 1e-6 * big.max(1e-3), "fd {} vs {} (scale {})", fd, want, big);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Child streams replay, and the whole pipeline is a function of its seed.
pub fn seed_determinism(cases: u32) -> Result<(), String> {
    use rand::RngCore;
    runner(cases)
        .run(&(any::<u64>(), proptest::collection::vec(any::<u64>(), 0..4)), |(seed, path)| {
            let mut a = RandomSource::new(seed).split_path(&path);
            let mut b = RandomSource::new(seed).split_path(&path);
            for _ in 0..8 {
                prop_assert_eq!(a.next_u64(), b.next_u64());
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let cfg = PipelineConfig {
        samples: Some(12),
        screen_trials: 3,
        adaptive_trials: 3,
        basin_bootstrap: 2,
        capacity_bootstrap: 4,
        samples_bootstrap: 2,
        volume_bootstrap: 2,
        ..PipelineConfig::default()
    };
    runner(cases)
        .run(&(any::<u64>(), 4usize..=7), |(seed, n)| {
            let oracle = DescentOracle::new(gaussian_j(n, seed), DynamicsKind::MH);
            let rng = RandomSource::new(seed);
            let a = run_pipeline(&oracle, &cfg, &rng).unwrap();
            let b = run_pipeline(&oracle, &cfg, &rng).unwrap();
            prop_assert_eq!(a.capacity.to_bits(), b.capacity.to_bits());
            prop_assert_eq!(a, b);
            Ok(())
        })
        .map_err(|e| e.to_string())
}
