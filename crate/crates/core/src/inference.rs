//! Posterior summaries: the null probability recursion, backward sampling of
//! state trees, and the representative partition tree with effect sizes.

use rand::Rng;
use serde::Serialize;

use crate::engine::PosteriorModel;
use crate::error::{DmmtError, Result};
use crate::model::State;
use crate::partition::{Interval, RegionKey, Rescaling};

pub const TREE_SCHEMA_VERSION: &str = "dmmt-tree/1";

/// Posterior probability that the two distributions are identical on `key`,
/// given the parent of `key` is in state `from`.
pub fn psi(model: &PosteriorModel, key: &RegionKey, from: State) -> Result<f64> {
    if from == State::Stop {
        return Ok(1.0);
    }
    let row = model.posterior_transition(key, from)?;
    match model.node(key) {
        Some(node) => Ok((row[2] + row[1] * node.merge_null_sum).clamp(0.0, 1.0)),
        None => Ok(model.sparse_psi(key.level())[from.index()]),
    }
}

/// `Pr(H0 | x1, x2) = sum_g rho0_g Ψ(Ω, g)`, with `rho0` the posterior of the
/// root's parent state.
pub fn prob_null(model: &PosteriorModel) -> f64 {
    let root = model.root();
    let rho0 = model.posterior_initial();
    State::ALL
        .iter()
        .zip(rho0)
        .filter(|(_, w)| *w > 0.0)
        .map(|(&g, w)| w * psi(model, root, g).expect("root key is always valid"))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// The null probability with the transforms used for reporting and ROC analysis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NullSummary {
    pub prob_null: f64,
    /// `ln(prob_null / (1 - prob_null))`.
    pub log_odds: f64,
    /// `1 - prob_null`; larger means stronger evidence of a difference.
    pub statistic: f64,
}

impl NullSummary {
    pub fn of(model: &PosteriorModel) -> Self {
        let p = prob_null(model);
        NullSummary {
            prob_null: p,
            log_odds: p.ln() - (1.0 - p).ln(),
            statistic: 1.0 - p,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampledNode {
    pub key: RegionKey,
    pub state: State,
    pub direction: Option<usize>,
    /// Arena indices of the left and right child.
    pub children: Option<(usize, usize)>,
}

/// One posterior draw of the state and direction tree. `nodes[0]` is the root.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledStateTree {
    pub nodes: Vec<SampledNode>,
    pub ever_divided: bool,
}

impl SampledStateTree {
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.key.level()).max().unwrap_or(0)
    }
}

fn draw<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    // rounding: fall back to the last positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// Draw a state tree top-down from the posterior.
pub fn sample_state_tree<R: Rng + ?Sized>(model: &PosteriorModel, rng: &mut R) -> SampledStateTree {
    let parent_state = State::from_index(draw(rng, &model.posterior_initial()));
    let mut nodes: Vec<SampledNode> = Vec::new();
    let mut ever_divided = false;
    // (key, parent state, slot to patch in the parent)
    let mut stack = vec![(model.root().clone(), parent_state, None::<(usize, bool)>)];
    while let Some((key, from, slot)) = stack.pop() {
        let row = model
            .posterior_transition(&key, from)
            .expect("sampled keys stay within the depth cap");
        let state = State::from_index(draw(rng, &row));
        let idx = nodes.len();
        if let Some((parent, right)) = slot {
            let c = nodes[parent].children.get_or_insert((usize::MAX, usize::MAX));
            if right {
                c.1 = idx;
            } else {
                c.0 = idx;
            }
        }
        let mut node = SampledNode {
            key: key.clone(),
            state,
            direction: None,
            children: None,
        };
        if state != State::Stop {
            ever_divided |= state == State::Divide;
            let lambda = model
                .posterior_direction(&key, state)
                .expect("non-stop state has directions");
            let j = draw(rng, &lambda);
            node.direction = Some(j);
            let (l, r) = key.split(j).expect("depth cap is below the key limit");
            stack.push((r, state, Some((idx, true))));
            stack.push((l, state, Some((idx, false))));
        }
        nodes.push(node);
    }
    SampledStateTree {
        nodes,
        ever_divided,
    }
}

/// Given the branch marginal at the parent (or `None` at the root), the
/// marginal state probabilities at `key` along that branch.
pub fn rho_star_step(model: &PosteriorModel, parent: Option<[f64; 3]>, key: &RegionKey) -> Result<[f64; 3]> {
    let weights = parent.unwrap_or_else(|| model.posterior_initial());
    let mut out = [0.0; 3];
    for from in State::ALL {
        let w = weights[from.index()];
        if w == 0.0 {
            continue;
        }
        let row = model.posterior_transition(key, from)?;
        for (o, r) in out.iter_mut().zip(row) {
            *o += w * r;
        }
    }
    Ok(out)
}

/// Marginal posterior state probabilities at the last key of `branch`, which
/// must start at the root and descend one cut at a time.
pub fn rho_star(model: &PosteriorModel, branch: &[RegionKey]) -> Result<[f64; 3]> {
    let first = branch
        .first()
        .ok_or_else(|| DmmtError::InvalidInput("empty branch".into()))?;
    if first != model.root() {
        return Err(DmmtError::InvalidInput(format!("branch starts at {first}, not the root")));
    }
    let mut rho = rho_star_step(model, None, first)?;
    for pair in branch.windows(2) {
        if pair[1].level() != pair[0].level() + 1 || !is_child(&pair[0], &pair[1]) {
            return Err(DmmtError::InvalidInput(format!("{} is not a child of {}", pair[1], pair[0])));
        }
        rho = rho_star_step(model, Some(rho), &pair[1])?;
    }
    Ok(rho)
}

fn is_child(parent: &RegionKey, child: &RegionKey) -> bool {
    (0..parent.dims()).any(|j| {
        parent
            .split(j)
            .map(|(l, r)| &l == child || &r == child)
            .unwrap_or(false)
    })
}

/// Direction summary `sum_{g in {d,m}} rho*_g λ_j(A, g | x)`, renormalized over
/// the non-stop mass.
pub fn lambda_star(model: &PosteriorModel, key: &RegionKey, rho: [f64; 3]) -> Result<Vec<f64>> {
    let active = rho[0] + rho[1];
    if active <= 0.0 {
        return Err(DmmtError::FullyStopped(key.to_string()));
    }
    let mut out = vec![0.0; model.dims()];
    for state in [State::Divide, State::Merge] {
        let w = rho[state.index()];
        if w == 0.0 {
            continue;
        }
        for (o, l) in out.iter_mut().zip(model.posterior_direction(key, state)?) {
            *o += w * l;
        }
    }
    out.iter_mut().for_each(|v| *v /= active);
    Ok(out)
}

/// Largest absolute log odds ratio of posterior left/right mass between the
/// two groups, over all cut directions.
pub fn effect_size(model: &PosteriorModel, key: &RegionKey) -> Result<f64> {
    let mut best = 0.0f64;
    for j in 0..model.dims() {
        let [(l1, r1), (l2, r2)] = model.posterior_pseudo_counts(key, j, State::Divide)?;
        let e = ((l1 / r1).ln() - (l2 / r2).ln()).abs();
        best = best.max(e);
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepTreeNode {
    pub key: RegionKey,
    pub level: usize,
    pub rho_star: [f64; 3],
    /// `None` when the node carries no non-stop mass.
    pub lambda_star: Option<Vec<f64>>,
    pub chosen_direction: Option<usize>,
    pub stopped: bool,
    pub effect_size: f64,
    pub counts: (usize, usize),
    #[serde(skip)]
    pub children: Option<[usize; 2]>,
}

/// Representative partition tree, stored as an arena with the root at index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct RepTree {
    pub nodes: Vec<RepTreeNode>,
    pub delta_star: f64,
    pub depth_cap: usize,
    pub dims: usize,
    pub total_counts: (usize, usize),
    pub rescaling: Option<Rescaling>,
}

/// Build the representative tree top-down: a branch stops once its stop mass
/// exceeds `1 - delta_star` or it reaches the depth cap, otherwise it is cut
/// along the direction of largest `lambda*` (smallest index on ties).
pub fn representative_tree(model: &PosteriorModel, delta_star: f64) -> Result<RepTree> {
    if !(delta_star > 0.0 && delta_star < 1.0) {
        return Err(DmmtError::InvalidPrior {
            name: "delta_star",
            reason: format!("{delta_star} is not in (0, 1)"),
        });
    }
    let cap = model.prior().depth_cap;
    let mut nodes: Vec<RepTreeNode> = Vec::new();
    let mut stack: Vec<(RegionKey, Option<[f64; 3]>, Option<(usize, usize)>)> =
        vec![(model.root().clone(), None, None)];
    while let Some((key, parent_rho, slot)) = stack.pop() {
        let rho = rho_star_step(model, parent_rho, &key)?;
        let lambda = lambda_star(model, &key, rho).ok();
        let level = key.level();
        let stopped = rho[2] > 1.0 - delta_star || level >= cap || lambda.is_none();
        let chosen = if stopped {
            None
        } else {
            lambda.as_ref().map(|l| argmax_first(l))
        };
        let idx = nodes.len();
        if let Some((parent, side)) = slot {
            nodes[parent].children.get_or_insert([usize::MAX; 2])[side] = idx;
        }
        nodes.push(RepTreeNode {
            effect_size: effect_size(model, &key)?,
            counts: model.counts(&key),
            key: key.clone(),
            level,
            rho_star: rho,
            lambda_star: lambda,
            chosen_direction: chosen,
            stopped,
            children: None,
        });
        if let Some(j) = chosen {
            let (l, r) = key.split(j)?;
            stack.push((r, Some(rho), Some((idx, 1))));
            stack.push((l, Some(rho), Some((idx, 0))));
        }
    }
    Ok(RepTree {
        nodes,
        delta_star,
        depth_cap: cap,
        dims: model.dims(),
        total_counts: (model.dataset().n1(), model.dataset().n2()),
        rescaling: model.dataset().provenance().cloned(),
    })
}

fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize)]
struct NodeDoc {
    key: String,
    level: usize,
    bounds: Vec<Interval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    raw_bounds: Option<Vec<Interval>>,
    rho_star: [f64; 3],
    lambda_star: Option<Vec<f64>>,
    chosen_direction: Option<usize>,
    stopped: bool,
    effect_size: f64,
    counts: [usize; 2],
    children: Vec<NodeDoc>,
}

#[derive(Serialize)]
struct TreeDoc<'a> {
    schema_version: &'static str,
    dims: usize,
    delta_star: f64,
    depth_cap: usize,
    n1: usize,
    n2: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    rescaling: Option<&'a Rescaling>,
    root: NodeDoc,
}

impl RepTree {
    pub fn root(&self) -> &RepTreeNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &RepTreeNode> {
        self.nodes.iter().filter(|n| n.children.is_none())
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.level).max().unwrap_or(0)
    }

    /// Nodes with `rho*_d > threshold`, largest effect size first.
    pub fn differential_regions(&self, threshold: f64) -> Vec<&RepTreeNode> {
        let mut out: Vec<&RepTreeNode> = self.nodes.iter().filter(|n| n.rho_star[0] > threshold).collect();
        out.sort_by(|a, b| {
            b.effect_size
                .total_cmp(&a.effect_size)
                .then_with(|| a.level.cmp(&b.level))
                .then_with(|| a.key.cmp(&b.key))
        });
        out
    }

    /// The largest-effect region among those with `rho*_d > delta_star`.
    pub fn top_region(&self) -> Option<&RepTreeNode> {
        self.differential_regions(self.delta_star).into_iter().next()
    }

    pub fn raw_bounds(&self, key: &RegionKey) -> Option<Vec<Interval>> {
        let r = self.rescaling.as_ref()?;
        Some(
            key.bounds()
                .into_iter()
                .enumerate()
                .map(|(j, iv)| Interval {
                    lo: r.to_raw(j, iv.lo),
                    hi: r.to_raw(j, iv.hi),
                })
                .collect(),
        )
    }

    fn doc(&self, idx: usize) -> NodeDoc {
        let n = &self.nodes[idx];
        NodeDoc {
            key: n.key.to_string(),
            level: n.level,
            bounds: n.key.bounds(),
            raw_bounds: self.raw_bounds(&n.key),
            rho_star: n.rho_star,
            lambda_star: n.lambda_star.clone(),
            chosen_direction: n.chosen_direction,
            stopped: n.stopped,
            effect_size: n.effect_size,
            counts: [n.counts.0, n.counts.1],
            children: n
                .children
                .map(|c| vec![self.doc(c[0]), self.doc(c[1])])
                .unwrap_or_default(),
        }
    }

    /// Nested JSON document, one object per node with its children inline.
    pub fn to_json(&self) -> serde_json::Value {
        let doc = TreeDoc {
            schema_version: TREE_SCHEMA_VERSION,
            dims: self.dims,
            delta_star: self.delta_star,
            depth_cap: self.depth_cap,
            n1: self.total_counts.0,
            n2: self.total_counts.1,
            rescaling: self.rescaling.as_ref(),
            root: self.doc(0),
        };
        serde_json::to_value(doc).expect("tree document serializes")
    }
}
