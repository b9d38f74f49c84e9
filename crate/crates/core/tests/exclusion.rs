use proptest::prelude::*;

use sepkit::exclusion::{
    apply_move, binomial_measure_sampler, duality_check, lift, move_rate, multi_duality_check, simulate_sep_direct,
    simulate_sep_ladder, single_duality_function, LadderConfig, ParticleConfig, SumTree,
};
use sepkit::rng::rng_from_seed;
use sepkit::{Environment, SepError};

fn env_from(dims: &[usize], alpha: Vec<u32>) -> Environment {
    Environment::from_alpha(dims, alpha).unwrap()
}

fn small_env() -> impl Strategy<Value = Environment> {
    (3usize..7, 1usize..3).prop_flat_map(|(side, d)| {
        let n = side.pow(d as u32);
        proptest::collection::vec(1u32..4, n).prop_map(move |a| env_from(&vec![side; d], a))
    })
}

fn env_and_config() -> impl Strategy<Value = (Environment, ParticleConfig)> {
    small_env().prop_flat_map(|e| {
        let caps: Vec<_> = e.alpha().iter().map(|&a| 0..=a).collect();
        (Just(e), caps).prop_map(|(e, eta)| {
            let c = ParticleConfig::new(&e, eta).unwrap();
            (e, c)
        })
    })
}

#[test]
fn occupancy_above_alpha_is_rejected() {
    let e = env_from(&[4], vec![1, 2, 1, 3]);
    assert!(ParticleConfig::new(&e, vec![0, 3, 0, 0]).is_err());
    assert!(ParticleConfig::new(&e, vec![0, 0, 0]).is_err());
    assert!(ParticleConfig::new(&e, vec![1, 2, 1, 3]).is_ok());
}

#[test]
fn move_rates_follow_free_room() {
    let e = env_from(&[4], vec![2, 3, 1, 1]);
    let eta = [2, 1, 0, 1];
    assert_eq!(move_rate(&e, &eta, 0, 1), 2 * (3 - 1));
    assert_eq!(move_rate(&e, &eta, 1, 0), 0);
    assert_eq!(move_rate(&e, &eta, 1, 2), 1);
    assert_eq!(move_rate(&e, &eta, 2, 1), 0);
    assert_eq!(move_rate(&e, &eta, 3, 0), 0);
}

#[test]
fn move_between_non_neighbours_fails() {
    let e = env_from(&[6], vec![2; 6]);
    let c = ParticleConfig::new(&e, vec![1; 6]).unwrap();
    assert!(matches!(apply_move(&e, &c, 0, 3), Err(SepError::NotNeighbours { .. })));
}

#[test]
fn single_particle_duality_on_a_tiny_ring() {
    let e = env_from(&[5], vec![1, 2, 3, 1, 2]);
    let c = ParticleConfig::new(&e, vec![1, 0, 2, 0, 1]).unwrap();
    for x in 0..5 {
        assert!(duality_check(&e, &c, x).unwrap().max_abs_residual < 1e-13);
    }
    assert_eq!(single_duality_function(&e, 2, &c), 2.0 / 3.0);
}

#[test]
fn lift_and_project_round_trip() {
    let e = env_from(&[3, 3], vec![1, 2, 3, 2, 1, 3, 3, 2, 1]);
    let c = ParticleConfig::new(&e, vec![1, 1, 2, 0, 1, 3, 0, 2, 0]).unwrap();
    let l = lift(&e, &c).unwrap();
    assert_eq!(l.project(), c);
    assert_eq!(LadderConfig::from_bits(&e, l.bits().to_vec()).unwrap(), l);
}

#[test]
fn same_seed_same_trajectory() {
    let e = Environment::sample(&"iid:1,2,3".parse().unwrap(), &[16], 4).unwrap();
    let c = binomial_measure_sampler(&e, 0.4, 8).unwrap();
    let a = simulate_sep_direct(&e, &c, 5.0, 99).unwrap();
    let b = simulate_sep_direct(&e, &c, 5.0, 99).unwrap();
    assert_eq!(a, b);
    let a = simulate_sep_ladder(&e, &lift(&e, &c).unwrap(), 5.0, 99).unwrap();
    let b = simulate_sep_ladder(&e, &lift(&e, &c).unwrap(), 5.0, 99).unwrap();
    assert_eq!(a, b);
}

#[test]
fn full_and_empty_configurations_are_frozen() {
    let e = Environment::sample(&"iid:1,3".parse().unwrap(), &[8], 1).unwrap();
    for c in [ParticleConfig::empty(&e), ParticleConfig::full(&e)] {
        let traj = simulate_sep_direct(&e, &c, 10.0, 3).unwrap();
        assert!(traj.events.is_empty());
        assert_eq!(traj.replay(&e).unwrap(), c);
    }
}

#[test]
fn sum_tree_matches_linear_scan() {
    let mut rng = rng_from_seed(11);
    use rand::Rng;
    let mut vals: Vec<u64> = (0..37).map(|_| rng.random_range(0..9)).collect();
    let mut tree = SumTree::new(&vals);
    for _ in 0..500 {
        let i = rng.random_range(0..vals.len());
        let v = rng.random_range(0..9);
        vals[i] = v;
        tree.set(i, v);
        let total: u64 = vals.iter().sum();
        assert_eq!(tree.total(), total);
        if total > 0 {
            let u = rng.random_range(0..total);
            let mut acc = 0;
            let want = vals
                .iter()
                .position(|&w| {
                    acc += w;
                    acc > u
                })
                .unwrap();
            assert_eq!(tree.find(u), want);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn duality_residual_vanishes((e, c) in env_and_config(), x in 0usize..1000) {
        let x = x % e.size();
        prop_assert!(duality_check(&e, &c, x).unwrap().max_abs_residual < 1e-12);
    }

    #[test]
    fn multi_duality_residual_vanishes((e, c) in env_and_config(), seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let mut eta = vec![0u32; e.size()];
        for _ in 0..rng.random_range(1..=4) {
            let x = rng.random_range(0..e.size());
            eta[x] = (eta[x] + 1).min(e.at(x));
        }
        let xi = ParticleConfig::new(&e, eta).unwrap();
        prop_assert!(multi_duality_check(&e, &xi, &c).unwrap().max_abs_residual < 1e-9);
    }

    #[test]
    fn dynamics_conserve_mass_and_capacity((e, c) in env_and_config(), seed in any::<u64>()) {
        let traj = simulate_sep_direct(&e, &c, 2.0, seed).unwrap();
        let end = traj.replay(&e).unwrap();
        prop_assert_eq!(end.total(), c.total());
        prop_assert!(end.eta().iter().zip(e.alpha()).all(|(&n, &a)| n <= a));
        let ladder = simulate_sep_ladder(&e, &lift(&e, &c).unwrap(), 2.0, seed).unwrap();
        prop_assert_eq!(ladder.replay(&e).unwrap().total(), c.total());
    }

    #[test]
    fn allowed_moves_have_positive_rate((e, c) in env_and_config(), x in 0usize..1000, slot in 0usize..4) {
        let x = x % e.size();
        let y = e.torus().neighbour(x, slot % e.torus().degree());
        let r = move_rate(&e, c.eta(), x, y);
        let next = apply_move(&e, &c, x, y).unwrap();
        prop_assert_eq!(next.total(), c.total());
        if r > 0 {
            prop_assert_eq!(next.at(x) + 1, c.at(x));
            prop_assert_eq!(next.at(y), c.at(y) + 1);
        } else {
            prop_assert_eq!(next, c);
        }
    }
}
