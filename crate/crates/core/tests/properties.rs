//! Fuzzed invariants, 10,000 cases each.

mod common;

use common::props::{self, binary, drive, gaussian_j, sc_state, NETWORK};
use proptest::prelude::*;
use spinmem::cavity::{plan_coupling_matrix, CavityParams, Point, SitePlan};
use spinmem::dynamics::*;
use spinmem::hopfield::{hebbian, stored_memory_count, MemoryCriterion, PatternSet, RecallEstimator};
use spinmem::semiclassical::Model;
use spinmem::sk::{realization_memories, SkSettings};
use spinmem::spin::*;
use spinmem::{RandomSource, SpinConfig};

const CASES: u32 = 10_000;

#[test]
fn energy_deltas_and_flip_symmetry() {
    props::energy_deltas(CASES).unwrap();
}

#[test]
fn overlap_distance_is_hamming() {
    props::overlap_is_hamming(CASES).unwrap();
}

#[test]
fn tanh_crossing_inverts() {
    props::tanh_crossing(CASES).unwrap();
}

#[test]
fn spin_length_is_conserved_by_eom() {
    props::spin_length_conserved(CASES).unwrap();
}

#[test]
fn position_gradient_matches_finite_differences() {
    props::gradient_matches_fd(CASES).unwrap();
}

#[test]
fn seed_determinism() {
    props::seed_determinism(CASES).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn overlap_distance_real_amplitudes(v in proptest::collection::vec(-1.0f64..1.0, 2..16), w_seed in any::<u64>()) {
        prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
        let a = SpinConfig::new(v.clone()).unwrap().unit().unwrap();
        let b = SpinConfig::random_binary(v.len(), &mut RandomSource::new(w_seed)).unit().unwrap();
        let d = overlap_distance(&a, &b).unwrap();
        prop_assert!(d >= 0.0 && d <= v.len() as f64 / 2.0 + 1e-12);
        prop_assert_eq!(d, overlap_distance(&b, &a).unwrap());
    }

    #[test]
    fn errors_applied_twice_cancel(s in binary(20), seed in any::<u64>(), e in 0usize..20) {
        let sites = error_sites(s.len(), e, &mut RandomSource::new(seed));
        let once = apply_errors_at(&s, &sites).unwrap();
        prop_assert_eq!(once.hamming(&s).unwrap(), sites.len());
        prop_assert_eq!(apply_errors_at(&once, &sites).unwrap(), s);
    }

    #[test]
    fn relax_ends_in_local_minimum(s in binary(18), seed in any::<u64>(), k in 0usize..4) {
        let kind = [DynamicsKind::MH, DynamicsKind::SD, DynamicsKind::SD_DETERMINISTIC, DynamicsKind::SD_RATE][k];
        let j = gaussian_j(s.len(), seed);
        let mut rng = RandomSource::new(seed ^ 0x55);
        let (out, steps) = relax_with_trajectory(&j, &s, kind, &mut rng).unwrap();
        prop_assert!(is_local_min(&j, &out).unwrap());
        let mut prev = ising_energy(&j, &s).unwrap();
        for st in &steps {
            prop_assert!(st.energy < prev);
            prev = st.energy;
        }
    }

    #[test]
    fn lowest_index_sd_ignores_rng(s in binary(16), seed in any::<u64>(), a in any::<u64>(), b in any::<u64>()) {
        // integer couplings produce frequent exact ties
        let n = s.len();
        let mut r = RandomSource::new(seed);
        let j = CouplingMatrix::from_upper(n, |_, _| rand::Rng::random_range(&mut r, -2i32..=2) as f64).unwrap();
        let x = relax(&j, &s, DynamicsKind::SD_DETERMINISTIC, &mut RandomSource::new(a)).unwrap();
        let y = relax(&j, &s, DynamicsKind::SD_DETERMINISTIC, &mut RandomSource::new(b)).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn deterministic_sd_single_flip_recall_is_m_over_n(n in 2usize..=10, seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let j = gaussian_j(n, seed);
        let minima = enumerate_minima(&j).unwrap();
        let memory = &minima[pick.index(minima.len())];
        let kind = DynamicsKind::SD_DETERMINISTIC;
        let mut rng = RandomSource::new(0);
        let m = (0..n)
            .filter(|&k| relax(&j, &memory.flipped(k).unwrap(), kind, &mut rng).unwrap() == *memory)
            .count();
        let p = exact_single_flip_recall(&j, memory, kind, Scoring::Exact, 100_000).unwrap().unwrap();
        prop_assert_eq!(p, m as f64 / n as f64);
    }

    #[test]
    fn hebbian_structure(n in 2usize..=20, p in 1usize..=6, seed in any::<u64>()) {
        let pats = PatternSet::random(n, p, &mut RandomSource::new(seed)).unwrap();
        let j = hebbian(&pats);
        for a in 0..n {
            prop_assert_eq!(j.get(a, a), 0.0);
            for b in 0..n {
                let v = j.get(a, b);
                prop_assert_eq!(v, j.get(b, a));
                if a != b {
                    prop_assert!(v.abs() <= p as f64 && v.fract() == 0.0);
                    prop_assert_eq!((v as i64 - p as i64).rem_euclid(2), 0);
                }
            }
        }
    }

    #[test]
    fn hopfield_count_ignores_pattern_sign(n in 3usize..=12, p in 1usize..=4, seed in any::<u64>(), flip in any::<prop::sample::Index>()) {
        let pats = PatternSet::random(n, p, &mut RandomSource::new(seed)).unwrap();
        let mut flipped = pats.patterns().to_vec();
        let k = flip.index(p);
        flipped[k] = flipped[k].negated();
        let flipped = PatternSet::new(flipped).unwrap();
        prop_assert_eq!(hebbian(&pats), hebbian(&flipped));
        for kind in [DynamicsKind::MH, DynamicsKind::SD] {
            let c = MemoryCriterion { kind, estimator: RecallEstimator::Exact { fallback_trials: 100 }, ..Default::default() };
            let a = stored_memory_count(&pats, &c, &mut RandomSource::new(1)).unwrap();
            let b = stored_memory_count(&flipped, &c, &mut RandomSource::new(1)).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn single_pattern_always_recalled(n in 3usize..=24, seed in any::<u64>()) {
        let pats = PatternSet::random(n, 1, &mut RandomSource::new(seed)).unwrap();
        let j = hebbian(&pats);
        for kind in [DynamicsKind::MH, DynamicsKind::SD] {
            let p = exact_single_flip_recall(&j, &pats.patterns()[0], kind, Scoring::Exact, 100_000).unwrap().unwrap();
            prop_assert_eq!(p, 1.0);
        }
    }

    #[test]
    fn sk_counts_scale_invariant_and_threshold_monotone(n in 2usize..=8, seed in any::<u64>(), c in 0.01f64..100.0, k in 0usize..2) {
        let kind = [DynamicsKind::MH, DynamicsKind::SD][k];
        let j = gaussian_j(n, seed);
        let cj = j.scaled(c).unwrap();
        let s = SkSettings::new(n, kind, 0.5);
        let a = realization_memories(&j, &s, &mut RandomSource::new(0)).unwrap();
        let b = realization_memories(&cj, &s, &mut RandomSource::new(0)).unwrap();
        prop_assert_eq!(a, b);
        let strict = realization_memories(&j, &SkSettings::new(n, kind, 0.75), &mut RandomSource::new(0)).unwrap();
        prop_assert!(strict.memories <= a.memories);
        prop_assert!(a.memories <= a.minima);
    }

    #[test]
    fn random_plan_matrix_symmetric_positive_diagonal(pts in proptest::collection::vec((-120.0f64..120.0, -120.0f64..120.0), 1..10)) {
        let mut sites: Vec<Point> = Vec::new();
        for (x, y) in pts {
            if sites.iter().all(|s| (s[0] - x).hypot(s[1] - y) > 1e-6) {
                sites.push([x, y]);
            }
        }
        let plan = SitePlan::new(sites).unwrap();
        let j = plan_coupling_matrix(&plan, &CavityParams::default()).unwrap();
        for a in 0..j.n() {
            prop_assert!(j.get(a, a) > 0.0);
            for b in 0..j.n() {
                prop_assert_eq!(j.get(a, b), j.get(b, a));
            }
        }
    }

}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(CASES))]

    #[test]
    fn eom_z2_symmetry((state, signs, t) in sc_state()) {
        let d = drive(&signs);
        let flipped_signs: Vec<bool> = signs.iter().map(|b| !b).collect();
        let dn = drive(&flipped_signs);
        let mut flipped = state.clone();
        for i in 0..state.len() {
            flipped.sx[i] = -state.sx[i];
            flipped.sy[i] = -state.sy[i];
        }
        let n = state.len();
        let (y, yf) = (state.to_vec(), flipped.to_vec());
        let (mut dy, mut dyf) = (vec![0.0; y.len()], vec![0.0; y.len()]);
        Model::new(&NETWORK, &d).rhs(t, &y, &mut dy);
        Model::new(&NETWORK, &dn).rhs(t, &yf, &mut dyf);
        let scale = dy.iter().map(|v| v.abs()).fold(1.0, f64::max);
        for k in 0..y.len() {
            let want = if k < 2 * n { -dy[k] } else { dy[k] };
            prop_assert!((dyf[k] - want).abs() <= 1e-12 * scale, "component {}", k);
        }
    }

}
