//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use dmmt::inference::psi;
use dmmt::simulate::{benchmark, median, run_replicates, split_statistics, SimRng};
use dmmt::{
    fit, prob_null, representative_tree, roc_auc, sample_state_tree, Dataset, PriorSpec, RegionKey,
    Scenario, ScenarioId, State,
};
use rand::{Rng, SeedableRng};

use common::{rel_err, Cell, Prior};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn oracle_prior(spec: &PriorSpec) -> Prior {
    Prior {
        beta: spec.beta,
        gamma: spec.gamma,
        depth_cap: spec.depth_cap,
    }
}

fn rows(xs: &[f64]) -> Vec<Vec<f64>> {
    xs.iter().map(|&x| vec![x]).collect()
}

/// Small 1D datasets: random sizes up to six points in total, drawn from a
/// coarse grid so duplicates and shared cells are common.
fn small_datasets(count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let grid = [0.0, 0.1, 0.2, 0.25, 0.3, 0.5, 0.55, 0.7, 0.75, 0.8, 0.9, 0.99];
    let mut rng = SimRng::seed_from_u64(seed);
    let mut out = vec![
        (vec![], vec![]),
        (vec![0.25], vec![0.75]),
        (vec![0.2], vec![0.8]),
        (vec![0.3, 0.3, 0.3], vec![]),
        (vec![], vec![0.1, 0.1, 0.9, 0.9]),
        (vec![0.1, 0.1, 0.1], vec![0.1, 0.1, 0.1]),
    ];
    while out.len() < count {
        let total = rng.random_range(1..=6);
        let n1 = rng.random_range(0..=total);
        let pick = |rng: &mut SimRng| grid[rng.random_range(0..grid.len())];
        let g1 = (0..n1).map(|_| pick(&mut rng)).collect();
        let g2 = (n1..total).map(|_| pick(&mut rng)).collect();
        out.push((g1, g2));
    }
    out
}

fn criterion_1() -> Outcome {
    let mut worst_phi = 0.0f64;
    let mut worst_null = 0.0f64;
    let mut cases = 0;
    for cap in 1..=3 {
        for rho0 in [[1.0, 0.0, 0.0], [0.5, 0.5, 0.0], [0.2, 0.3, 0.5]] {
            let spec = PriorSpec {
                depth_cap: cap,
                rho0,
                ..PriorSpec::default()
            };
            let prior = oracle_prior(&spec);
            for (g1, g2) in small_datasets(40, 100 + cap as u64) {
                let model = fit(&Dataset::new(1, g1.clone(), g2.clone()).unwrap(), &spec).unwrap();
                let phi = model.log_phi(model.root()).unwrap();
                for g in 0..3 {
                    let want = common::phi(&prior, 1, g, &rows(&g1), &rows(&g2));
                    worst_phi = worst_phi.max(rel_err(phi[g].exp(), want));
                }
                let want = common::prob_null(&prior, 1, rho0, &rows(&g1), &rows(&g2));
                worst_null = worst_null.max(rel_err(prob_null(&model), want));
                cases += 1;
            }
        }
    }
    outcome(
        worst_phi <= 1e-10 && worst_null <= 1e-10,
        format!("{cases} datasets, max rel err phi {worst_phi:.2e}, prob_null {worst_null:.2e} (tol 1e-10)"),
    )
}

fn criterion_2() -> Outcome {
    let b = 10_000;
    let mut lines = Vec::new();
    let mut pass = true;
    let models = [
        (ScenarioId::LocalShift1d, 30, 6),
        (ScenarioId::GlobalShift1d, 25, 8),
        (ScenarioId::LocalShift2d, 40, 8),
        (ScenarioId::GlobalDispersion1d, 20, 12),
        (ScenarioId::GlobalShift2d, 15, 12),
    ];
    for (i, (id, n, cap)) in models.into_iter().enumerate() {
        let spec = PriorSpec {
            depth_cap: cap,
            ..PriorSpec::default()
        };
        let mut rng = SimRng::seed_from_u64(900 + i as u64);
        let (g1, g2) = Scenario::new(id).with_sizes(n, n).generate(&mut rng);
        let data = dmmt::rescale(&g1, &g2).unwrap();
        let model = fit(&data, &spec).unwrap();
        let exact = prob_null(&model);
        let hits = (0..b)
            .filter(|_| !sample_state_tree(&model, &mut rng).ever_divided)
            .count();
        let est = hits as f64 / b as f64;
        let se = (est * (1.0 - est) / b as f64).sqrt();
        let ok = (est - exact).abs() <= 3.0 * se;
        pass &= ok;
        lines.push(format!("{id}: exact {exact:.4} mc {est:.4} ({:.2} se)", (est - exact).abs() / se));
    }
    outcome(pass, lines.join("; "))
}

fn random_dataset(rng: &mut SimRng, p: usize, n1: usize, n2: usize) -> Dataset {
    // clustered coordinates so the tree has deep occupied regions
    let mut draw = |n: usize, centre: f64| -> Vec<f64> {
        (0..n * p)
            .map(|_| (centre + 0.1 * dmmt::simulate::standard_normal(rng)).rem_euclid(1.0))
            .map(|x: f64| if x >= 1.0 { 0.0 } else { x })
            .collect()
    };
    let a = draw(n1, 0.3);
    let b = draw(n2, 0.45);
    Dataset::new(p, a, b).unwrap()
}

fn criterion_3() -> Outcome {
    let mut rng = SimRng::seed_from_u64(31);
    let mut worst = 0.0f64;
    let mut psi_ok = true;
    let mut checked_nodes = 0usize;
    for case in 0..12 {
        let p = 1 + case % 3;
        let spec = PriorSpec {
            depth_cap: [12, 8, 6][p - 1],
            ..PriorSpec::default()
        };
        let data = random_dataset(&mut rng, p, 20 + 5 * case, 25 + 3 * case);
        let model = fit(&data, &spec).unwrap();
        for node in model.nodes() {
            for g in State::ALL {
                let row = model.posterior_transition(&node.key, g).unwrap();
                worst = worst.max((row.iter().sum::<f64>() - 1.0).abs());
                let v = psi(&model, &node.key, g).unwrap();
                psi_ok &= (0.0..=1.0).contains(&v);
            }
            for g in [State::Divide, State::Merge] {
                let dir = model.posterior_direction(&node.key, g).unwrap();
                worst = worst.max((dir.iter().sum::<f64>() - 1.0).abs());
            }
            checked_nodes += 1;
        }
        let tree = representative_tree(&model, spec.delta_star).unwrap();
        for n in &tree.nodes {
            worst = worst.max((n.rho_star.iter().sum::<f64>() - 1.0).abs());
            if let Some(l) = &n.lambda_star {
                worst = worst.max((l.iter().sum::<f64>() - 1.0).abs());
            }
        }
    }

    // terminal regions: engine closed forms against enumeration of the
    // subtree below them, which does not use the shortcut
    let mut lemma_worst = 0.0f64;
    let mut exact = true;
    let mut terminal = 0;
    while terminal < 1000 {
        let p = 1 + rng.random_range(0..2usize);
        let remaining = if p == 1 { 3 } else { 2 };
        let level = rng.random_range(0..=4usize);
        let spec = PriorSpec {
            depth_cap: level + remaining,
            ..PriorSpec::default()
        };
        let (n1, n2) = (rng.random_range(0..4), rng.random_range(0..4));
        let data = random_dataset(&mut rng, p, n1, n2);
        let model = fit(&data, &spec).unwrap();
        let mut key = RegionKey::root(p).unwrap();
        for _ in 0..level {
            let j = rng.random_range(0..p);
            let (l, r) = key.split(j).unwrap();
            key = if rng.random::<bool>() { r } else { l };
        }
        let (n1, n2) = model.counts(&key);
        if n1 + n2 > 1 {
            continue;
        }
        terminal += 1;
        let phi = model.log_phi(&key).unwrap();
        let closed = ((n1 + n2) * level) as f64 * std::f64::consts::LN_2;
        exact &= phi.iter().all(|&v| v == closed);
        for g in State::ALL {
            exact &= model.posterior_transition(&key, g).unwrap() == model.prior_matrix(level).row(g);
        }
        let cell = Cell {
            bounds: key.bounds().iter().map(|iv| (iv.lo, iv.hi)).collect(),
            level,
        };
        let pts = |t: usize| -> Vec<Vec<f64>> {
            (0..if t == 1 { data.n1() } else { data.n2() })
                .map(|i| data.point(t, i).to_vec())
                .collect()
        };
        let prior = oracle_prior(&spec);
        for g in 0..3 {
            let configs = common::configurations(&prior, &cell, g, &pts(1), &pts(2));
            let want: f64 = configs.iter().map(|c| c.weight).sum();
            lemma_worst = lemma_worst.max(rel_err(phi[g].exp(), want));
        }
    }
    let pass = worst <= 1e-10 && psi_ok && exact && lemma_worst <= 1e-10;
    outcome(
        pass,
        format!(
            "{checked_nodes} nodes, max |sum-1| {worst:.2e}, psi in [0,1]: {psi_ok}; \
             {terminal} terminal nodes exact: {exact}, vs enumeration {lemma_worst:.2e}"
        ),
    )
}

/// Prior-only enumeration of never-divide configurations over levels
/// `0..enumerated`, closing each deeper merge subtree with `tail`.
fn prior_null_by_enumeration(spec: &PriorSpec, enumerated: usize, tail: f64) -> f64 {
    fn configs(spec: &PriorSpec, level: usize, parent: usize, enumerated: usize, tail: f64) -> Vec<(f64, bool)> {
        if level == enumerated {
            // a node at the boundary level: only a merge parent can keep the
            // configuration divide-free, with probability `tail`
            return match parent {
                0 => vec![(1.0, true)],
                1 => vec![(tail, false), (1.0 - tail, true)],
                _ => unreachable!(),
            };
        }
        let rho = spec.transition_matrix(level).0[parent];
        let mut out = vec![(rho[2], false)];
        // divide configurations never count towards the null, so only the
        // merge branch is expanded
        let kids = configs(spec, level + 1, 1, enumerated, tail);
        for a in &kids {
            for b in &kids {
                out.push((rho[1] * a.0 * b.0, a.1 || b.1));
            }
        }
        out
    }
    let mut total = 0.0;
    for (g, &w) in spec.rho0.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        if g == 2 {
            total += w;
            continue;
        }
        total += w * configs(spec, 0, g, enumerated, tail)
            .iter()
            .filter(|c| !c.1)
            .map(|c| c.0)
            .sum::<f64>();
    }
    total
}

fn criterion_4() -> Outcome {
    let spec = PriorSpec::default();
    let empty = Dataset::new(1, vec![], vec![]).unwrap();
    let by_recursion = prob_null(&fit(&empty, &spec).unwrap());

    // merge-parent null probability of an empty level-4 subtree, by a
    // separate bottom-up loop over the prior rows
    let enumerated = 4;
    let mut tail = 1.0;
    for k in (enumerated..spec.depth_cap).rev() {
        let m = spec.transition_matrix(k).0[1];
        tail = m[2] + m[1] * tail * tail;
    }
    let by_enumeration = prior_null_by_enumeration(&spec, enumerated, tail);
    let agree = rel_err(by_recursion, by_enumeration);
    let pass = agree <= 1e-10 && (0.40..=0.60).contains(&by_recursion);
    outcome(
        pass,
        format!("recursion {by_recursion:.12}, enumeration {by_enumeration:.12}, rel diff {agree:.2e}; band [0.40, 0.60]"),
    )
}

fn auc_for(id: ScenarioId, replicates: usize, seed: u64) -> f64 {
    let results = run_replicates(&Scenario::new(id), replicates, &PriorSpec::default(), seed).unwrap();
    let (null, alt) = split_statistics(&results);
    roc_auc(&null, &alt).unwrap()
}

fn criterion_5() -> Outcome {
    let local = auc_for(ScenarioId::LocalShift1d, 200, 2024);
    let global = auc_for(ScenarioId::GlobalShift1d, 200, 2025);
    outcome(
        local >= 0.90 && global >= 0.80,
        format!("1d-local-shift AUC {local:.4} (>= 0.90), 1d-global-shift AUC {global:.4} (>= 0.80)"),
    )
}

fn criterion_6() -> Outcome {
    let sizes = [100, 400, 1600];
    let spec = PriorSpec::default();
    let mut null_medians = Vec::new();
    let mut alt_medians = Vec::new();
    for &n in &sizes {
        let sc = Scenario::new(ScenarioId::LocalShift1d).with_sizes(n, n);
        let results = run_replicates(&sc, 50, &spec, 606).unwrap();
        let pn = |null: bool| -> Vec<f64> {
            results.iter().filter(|r| r.is_null == null).map(|r| r.prob_null).collect()
        };
        null_medians.push(median(&pn(true)));
        alt_medians.push(median(&pn(false)));
    }
    let null_up = null_medians.windows(2).all(|w| w[1] >= w[0]);
    let alt_down = alt_medians.windows(2).all(|w| w[1] <= w[0]);
    let last = *alt_medians.last().unwrap();
    outcome(
        null_up && alt_down && last < 0.05,
        format!("n {sizes:?}: null medians {null_medians:.4?}, alternative medians {alt_medians:.4?}"),
    )
}

fn criterion_7() -> Outcome {
    let spec = PriorSpec::default();
    let replicates = 100;
    let results = run_replicates(&Scenario::new(ScenarioId::LocalShift1d), replicates, &spec, 707).unwrap();
    let hits = results
        .iter()
        .filter(|r| !r.is_null)
        .filter(|r| {
            r.top_region_raw_bounds
                .as_ref()
                .map(|b| b[0].0 < 0.95 && 0.85 < b[0].1)
                .unwrap_or(false)
        })
        .count();
    let frac = hits as f64 / replicates as f64;
    outcome(frac >= 0.80, format!("{hits}/{replicates} top regions intersect (0.85, 0.95) (>= 80%)"))
}

fn criterion_8() -> Outcome {
    let spec = PriorSpec::default();
    let sc = Scenario::new(ScenarioId::LocalShift1d);
    let report = benchmark(&sc, &[200, 400, 800, 1600], 15, 5, &spec, 88).unwrap();
    let times: Vec<String> = report
        .rows
        .iter()
        .map(|r| format!("{}:{:.3}ms", r.n, r.median_fit_millis))
        .collect();
    let slope = report.log_log_slope;

    let rerun = |seed| {
        run_replicates(&sc, 24, &spec, seed)
            .unwrap()
            .into_iter()
            .map(|r| (r.seed, r.prob_null.to_bits(), r.top_region_key, r.top_effect_size.map(f64::to_bits)))
            .collect::<Vec<_>>()
    };
    let identical = rerun(8) == rerun(8);
    let mut rng_a = SimRng::seed_from_u64(8);
    let mut rng_b = SimRng::seed_from_u64(8);
    let same_data = sc.generate(&mut rng_a) == sc.generate(&mut rng_b);
    outcome(
        (0.8..=1.3).contains(&slope) && identical && same_data,
        format!("median fit times [{}], slope {slope:.3} (in [0.8, 1.3]); rerun identical: {}", times.join(", "), identical && same_data),
    )
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags such as `--quiet`; a name filter
    // restricts which criteria run.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, &str, fn() -> Outcome); 8] = [
        ("1", "brute-force oracle equivalence", criterion_1),
        ("2", "Monte Carlo conjugacy self-consistency", criterion_2),
        ("3", "normalization and terminal nodes", criterion_3),
        ("4", "prior null probability", criterion_4),
        ("5", "power separation", criterion_5),
        ("6", "consistency trends", criterion_6),
        ("7", "localization", criterion_7),
        ("8", "runtime scaling and determinism", criterion_8),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let o = run();
        let status = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "[{status}] criterion {id} ({name}): {} [{:.1}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
