mod common;

use dmmt::inference::rho_star_step;
use dmmt::simulate::SimRng;
use dmmt::{
    fit, lambda_star, prob_null, psi, representative_tree, rho_star, sample_state_tree, Dataset,
    PriorSpec, RegionKey, State,
};
use proptest::prelude::*;
use rand::SeedableRng;

use common::{rel_err, Cell, Prior};

fn spec(cap: usize) -> PriorSpec {
    PriorSpec {
        depth_cap: cap,
        ..PriorSpec::default()
    }
}

fn oracle(spec: &PriorSpec) -> Prior {
    Prior {
        beta: spec.beta,
        gamma: spec.gamma,
        depth_cap: spec.depth_cap,
    }
}

fn one_d(g1: &[f64], g2: &[f64]) -> (Dataset, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let rows = |v: &[f64]| v.iter().map(|&x| vec![x]).collect::<Vec<_>>();
    (Dataset::new(1, g1.to_vec(), g2.to_vec()).unwrap(), rows(g1), rows(g2))
}

#[test]
fn phi_divide_matches_enumeration_at_depth_one() {
    let s = spec(1);
    let (data, a, b) = one_d(&[0.25], &[0.75]);
    let model = fit(&data, &s).unwrap();
    let got = model.log_phi(model.root()).unwrap()[0].exp();
    let want = common::phi(&oracle(&s), 1, common::D, &a, &b);
    assert!(rel_err(got, want) < 1e-12, "{got} vs {want}");
}

#[test]
fn psi_divide_matches_enumeration_at_depth_two() {
    let s = spec(2);
    let (data, a, b) = one_d(&[0.2], &[0.8]);
    let model = fit(&data, &s).unwrap();
    let got = psi(&model, model.root(), State::Divide).unwrap();
    let want = common::prob_null(&oracle(&s), 1, [1.0, 0.0, 0.0], &a, &b);
    assert!(rel_err(got, want) < 1e-12, "{got} vs {want}");
}

#[test]
fn two_dimensional_oracle() {
    let s = spec(2);
    let pts1 = [[0.1, 0.2], [0.6, 0.7], [0.6, 0.7]];
    let pts2 = [[0.9, 0.1], [0.3, 0.8]];
    let data = Dataset::from_rows(
        2,
        &pts1.iter().map(|p| p.to_vec()).collect::<Vec<_>>(),
        &pts2.iter().map(|p| p.to_vec()).collect::<Vec<_>>(),
    )
    .unwrap();
    let a: Vec<Vec<f64>> = pts1.iter().map(|p| p.to_vec()).collect();
    let b: Vec<Vec<f64>> = pts2.iter().map(|p| p.to_vec()).collect();
    let model = fit(&data, &s).unwrap();
    let phi = model.log_phi(model.root()).unwrap();
    for g in 0..3 {
        let want = common::phi(&oracle(&s), 2, g, &a, &b);
        assert!(rel_err(phi[g].exp(), want) < 1e-10);
    }
    let want = common::prob_null(&oracle(&s), 2, s.rho0, &a, &b);
    assert!(rel_err(prob_null(&model), want) < 1e-10);
}

#[test]
fn subregion_phi_matches_enumeration() {
    // a region below the root, with the cap two levels further down
    let s = spec(3);
    let (data, a, b) = one_d(&[0.55, 0.6, 0.9], &[0.7, 0.72, 0.1]);
    let model = fit(&data, &s).unwrap();
    let key: RegionKey = "1".parse().unwrap();
    let phi = model.log_phi(&key).unwrap();
    let cell = Cell {
        bounds: vec![(0.5, 1.0)],
        level: 1,
    };
    for g in 0..3 {
        let want: f64 = common::configurations(&oracle(&s), &cell, g, &a, &b)
            .iter()
            .map(|c| c.weight)
            .sum();
        assert!(rel_err(phi[g].exp(), want) < 1e-10);
    }
}

#[test]
fn rho_star_matches_sampled_marginals() {
    let s = spec(6);
    let g1: Vec<f64> = (0..30).map(|i| (i as f64 * 0.618).fract() * 0.5).collect();
    let g2: Vec<f64> = (0..30).map(|i| 0.3 + (i as f64 * 0.414).fract() * 0.6).collect();
    let model = fit(&Dataset::new(1, g1, g2).unwrap(), &s).unwrap();
    let branch: Vec<RegionKey> = ["-", "0", "01"].iter().map(|k| k.parse().unwrap()).collect();
    let exact = rho_star(&model, &branch).unwrap();

    // in one dimension every sampled tree either reaches the node or its
    // branch stopped above it, in which case the node counts as stopped
    let mut rng = SimRng::seed_from_u64(3);
    let b = 20_000;
    let mut divide = 0;
    for _ in 0..b {
        let t = sample_state_tree(&model, &mut rng);
        if t.nodes.iter().any(|n| n.key == branch[2] && n.state == State::Divide) {
            divide += 1;
        }
    }
    let est = divide as f64 / b as f64;
    let se = (exact[0] * (1.0 - exact[0]) / b as f64).sqrt().max(1e-4);
    assert!((est - exact[0]).abs() < 4.0 * se, "{est} vs {}", exact[0]);
}

#[test]
fn rho_star_root_is_divide_row_and_stop_absorbs() {
    let s = spec(5);
    let model = fit(&Dataset::new(1, vec![0.1, 0.2, 0.3], vec![0.7, 0.8]).unwrap(), &s).unwrap();
    let root = rho_star(&model, &[model.root().clone()]).unwrap();
    assert_eq!(root, model.posterior_transition(model.root(), State::Divide).unwrap());
    let all_stop = rho_star_step(&model, Some([0.0, 0.0, 1.0]), &"1".parse().unwrap()).unwrap();
    assert_eq!(all_stop, [0.0, 0.0, 1.0]);
}

#[test]
fn lambda_star_uniform_on_empty_subtree() {
    let s = spec(6);
    let data = Dataset::new(2, vec![0.1, 0.1, 0.2, 0.2], vec![0.15, 0.1]).unwrap();
    let model = fit(&data, &s).unwrap();
    let key: RegionKey = "1;1".parse().unwrap();
    assert_eq!(model.counts(&key), (0, 0));
    let l = lambda_star(&model, &key, [0.3, 0.3, 0.4]).unwrap();
    assert_eq!(l, vec![0.5, 0.5]);
}

#[test]
fn representative_tree_stop_rule() {
    let s = spec(8);
    let g1: Vec<f64> = (0..60).map(|i| 0.8 + 0.1 * (i as f64 / 60.0)).collect();
    let g2: Vec<f64> = (0..60).map(|i| i as f64 / 60.0).collect();
    let model = fit(&Dataset::new(1, g1, g2).unwrap(), &s).unwrap();
    for delta in [0.2, 0.5, 0.8, 0.95] {
        let tree = representative_tree(&model, delta).unwrap();
        assert!(tree.depth() <= s.depth_cap);
        for n in &tree.nodes {
            let should_stop = n.rho_star[2] > 1.0 - delta || n.level >= s.depth_cap;
            assert_eq!(n.stopped, should_stop, "{} at delta {delta}", n.key);
            assert_eq!(n.children.is_none(), n.stopped);
            assert!(n.effect_size >= 0.0);
        }
    }
}

#[test]
fn merge_only_prior_has_no_divide_mass() {
    let s = PriorSpec {
        rho0: [0.0, 1.0, 0.0],
        gamma: 1e-12,
        depth_cap: 4,
        ..PriorSpec::default()
    };
    let model = fit(&Dataset::new(1, vec![0.1, 0.2], vec![0.8, 0.9]).unwrap(), &s).unwrap();
    assert!(prob_null(&model) > 1.0 - 1e-9);
}

fn unit_points(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, 0..max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn order_and_swap_invariance(g1 in unit_points(25), g2 in unit_points(25), rot in 0usize..25) {
        let s = spec(8);
        let base = prob_null(&fit(&Dataset::new(1, g1.clone(), g2.clone()).unwrap(), &s).unwrap());
        let mut r1 = g1.clone();
        if !r1.is_empty() {
            let k = rot % r1.len();
            r1.rotate_left(k);
            r1.reverse();
        }
        let permuted = prob_null(&fit(&Dataset::new(1, r1, g2.clone()).unwrap(), &s).unwrap());
        let swapped = prob_null(&fit(&Dataset::new(1, g2, g1).unwrap(), &s).unwrap());
        prop_assert!((base - permuted).abs() <= 1e-12);
        prop_assert!((base - swapped).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn small_oracle_agreement(g1 in unit_points(4), g2 in unit_points(3), cap in 1usize..=3) {
        let s = spec(cap);
        let (data, a, b) = one_d(&g1, &g2);
        let model = fit(&data, &s).unwrap();
        let want = common::prob_null(&oracle(&s), 1, s.rho0, &a, &b);
        prop_assert!(rel_err(prob_null(&model), want) < 1e-10);
    }

    #[test]
    fn pseudo_counts_are_prior_plus_counts(g1 in unit_points(30), g2 in unit_points(30)) {
        let s = spec(6);
        let model = fit(&Dataset::new(1, g1, g2).unwrap(), &s).unwrap();
        for node in model.nodes() {
            let [(l1, r1), (l2, r2)] = model.posterior_pseudo_counts(&node.key, 0, State::Divide).unwrap();
            let [(a1, a2), (b1, b2)] = node.child_counts[0];
            prop_assert_eq!((l1, r1, l2, r2), (0.5 + a1 as f64, 0.5 + b1 as f64, 0.5 + a2 as f64, 0.5 + b2 as f64));
        }
    }
}
