//! Browser bindings for the demo page in `www/`. Each exported function takes
//! plain numbers and strings and returns a number or a JSON string; the
//! `*_json` functions beside them hold the logic and run natively too.

use dmmt::simulate::{replicate_seed, roc_curve, run_replicates, split_statistics, SimRng};
use dmmt::{fit, prob_null, representative_tree, rescale, roc_auc, Dataset, NullSummary, PriorSpec, Scenario, ScenarioId};
use rand::SeedableRng;
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn prior(beta: f64, gamma: f64, depth_cap: usize, delta_star: f64) -> Result<PriorSpec, String> {
    let spec = PriorSpec {
        beta,
        gamma,
        depth_cap,
        delta_star,
        ..PriorSpec::default()
    };
    spec.validate().map_err(|e| e.to_string())?;
    Ok(spec)
}

fn scenario(id: &str) -> Result<Scenario, String> {
    id.parse::<ScenarioId>().map(Scenario::new).map_err(|e| e.to_string())
}

/// Prior probability that the two distributions coincide, from a fit on no data.
pub fn prior_null(beta: f64, gamma: f64, depth_cap: usize) -> Result<f64, String> {
    let spec = prior(beta, gamma, depth_cap, 0.8)?;
    let empty = Dataset::new(1, vec![], vec![]).map_err(|e| e.to_string())?;
    let model = fit(&empty, &spec).map_err(|e| e.to_string())?;
    Ok(prob_null(&model))
}

#[derive(Serialize)]
struct Region {
    key: String,
    level: usize,
    bounds: Vec<(f64, f64)>,
    rho_star: [f64; 3],
    effect_size: f64,
    stopped: bool,
    counts: (usize, usize),
}

/// Simulate one dataset, fit it and return the data, the null probability and
/// every representative-tree node in raw coordinates.
pub fn analyze_json(id: &str, seed: u64, beta: f64, gamma: f64, delta_star: f64) -> Result<String, String> {
    let sc = scenario(id)?;
    let spec = prior(beta, gamma, 12, delta_star)?;
    let mut rng = SimRng::seed_from_u64(replicate_seed(seed, 0));
    let (g1, g2) = sc.generate(&mut rng);
    let data = rescale(&g1, &g2).map_err(|e| e.to_string())?;
    let model = fit(&data, &spec).map_err(|e| e.to_string())?;
    let summary = NullSummary::of(&model);
    let tree = representative_tree(&model, delta_star).map_err(|e| e.to_string())?;
    let regions: Vec<Region> = tree
        .nodes
        .iter()
        .map(|n| Region {
            key: n.key.to_string(),
            level: n.level,
            bounds: tree
                .raw_bounds(&n.key)
                .unwrap_or_default()
                .iter()
                .map(|iv| (iv.lo, iv.hi))
                .collect(),
            rho_star: n.rho_star,
            effect_size: n.effect_size,
            stopped: n.stopped,
            counts: n.counts,
        })
        .collect();
    let top = tree.top_region().map(|n| n.key.to_string());
    let doc = json!({
        "scenario": sc.id,
        "dims": sc.dims(),
        "prob_null": summary.prob_null,
        "log_odds": summary.log_odds,
        "group1": g1,
        "group2": g2,
        "regions": regions,
        "top_region": top,
        "delta_star": delta_star,
    });
    Ok(doc.to_string())
}

/// Replicated alternatives against permuted-label nulls: AUC and ROC curve.
pub fn roc_json(id: &str, replicates: usize, seed: u64) -> Result<String, String> {
    if replicates == 0 || replicates > 500 {
        return Err("replicates must be between 1 and 500".into());
    }
    let sc = scenario(id)?;
    let results = run_replicates(&sc, replicates, &PriorSpec::default(), seed).map_err(|e| e.to_string())?;
    let (null_stats, alt_stats) = split_statistics(&results);
    let auc = roc_auc(&null_stats, &alt_stats).map_err(|e| e.to_string())?;
    Ok(json!({
        "scenario": sc.id,
        "replicates": replicates,
        "auc": auc,
        "curve": roc_curve(&null_stats, &alt_stats),
        "null_prob_null": null_stats.iter().map(|s| 1.0 - s).collect::<Vec<_>>(),
        "alt_prob_null": alt_stats.iter().map(|s| 1.0 - s).collect::<Vec<_>>(),
    })
    .to_string())
}

#[wasm_bindgen]
pub fn prior_null_probability(beta: f64, gamma: f64, depth_cap: u32) -> Result<f64, JsError> {
    prior_null(beta, gamma, depth_cap as usize).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn analyze_scenario(id: &str, seed: u32, beta: f64, gamma: f64, delta_star: f64) -> Result<String, JsError> {
    analyze_json(id, seed as u64, beta, gamma, delta_star).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn roc_demo(id: &str, replicates: u32, seed: u32) -> Result<String, JsError> {
    roc_json(id, replicates as usize, seed as u64).map_err(|e| JsError::new(&e))
}
