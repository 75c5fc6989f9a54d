//! Forward summation: the marginal likelihood recursion over occupied regions
//! and the conjugate posterior parameters it induces.
//!
//! Only regions holding at least two points below the depth cap are expanded
//! and memoized. Empty and singleton regions have closed forms under the
//! centered pseudo-counts (every `Z(A, h)` equals the baseline density there),
//! so their posterior parameters coincide with the prior ones.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::io::Write;

use serde::Serialize;

use crate::error::{DmmtError, Result};
use crate::model::{log_baseline_density, PriorSpec, State, TransitionMatrix};
use crate::numerics::{log_sum_exp, HalfIntegerLnGamma};
use crate::partition::{quantize, Dataset, RegionKey};

const D: usize = 0;
const M: usize = 1;
const S: usize = 2;

pub const DEFAULT_MEMO_LIMIT: usize = 50_000_000;

/// Per-group child counts `(n1, n2)` of the left and right halves for one cut.
pub type ChildCounts = [(usize, usize); 2];

/// Forward quantities for one expanded region.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeEvaluation {
    pub key: RegionKey,
    pub counts: (usize, usize),
    /// `ln Z(A, h)` for divide, merge, stop.
    pub log_z: [f64; 3],
    /// `ln Z_j(A, h)` for divide (`[0]`) and merge (`[1]`), per direction.
    pub log_zj: [Vec<f64>; 2],
    /// `ln Φ(A, g)` for each parent state.
    pub log_phi: [f64; 3],
    pub child_counts: Vec<ChildCounts>,
    /// Posterior probability that the two distributions agree on the region
    /// given a merge parent.
    pub(crate) psi_merge: f64,
    /// `sum_j λ_j(A, m | x) Ψ(A_l^j, m) Ψ(A_r^j, m)`.
    pub(crate) merge_null_sum: f64,
}

#[derive(Clone, Copy, Debug)]
struct Summary {
    counts: (usize, usize),
    log_phi: [f64; 3],
    psi_merge: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    pub memo_limit: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            memo_limit: DEFAULT_MEMO_LIMIT,
        }
    }
}

/// Fitted posterior: memoized forward quantities for every expanded region.
/// Read-only after [`fit`].
#[derive(Clone, Debug)]
pub struct PosteriorModel {
    prior: PriorSpec,
    data: Dataset,
    q1: Vec<u64>,
    q2: Vec<u64>,
    memo: HashMap<RegionKey, NodeEvaluation>,
    matrices: Vec<TransitionMatrix>,
    /// `Ψ(A, g)` for regions with at most one point, by level `0..=depth_cap`.
    psi_sparse: Vec<[f64; 3]>,
    root: RegionKey,
}

struct Fitter<'a> {
    dims: usize,
    depth_cap: usize,
    q1: &'a [u64],
    q2: &'a [u64],
    lgamma: HalfIntegerLnGamma,
    log_rho: Vec<[[f64; 3]; 3]>,
    log_lambda: f64,
    psi_sparse: &'a [[f64; 3]],
    memo: HashMap<RegionKey, NodeEvaluation>,
    memo_limit: usize,
}

/// `Ψ` on regions holding at most one point, where posterior equals prior:
/// `ψ(k, g) = ρ_{g,s}(k) + ρ_{g,m}(k) ψ(k+1, m)^2`, `ψ(K, ·) = 1`.
pub(crate) fn sparse_psi_table(prior: &PriorSpec) -> Vec<[f64; 3]> {
    let cap = prior.depth_cap;
    let mut table = vec![[1.0; 3]; cap + 1];
    for k in (0..cap).rev() {
        let m = prior.transition_matrix(k);
        let below = table[k + 1][M];
        for g in 0..3 {
            table[k][g] = m.0[g][S] + m.0[g][M] * below * below;
        }
    }
    table
}

pub fn fit(dataset: &Dataset, prior: &PriorSpec) -> Result<PosteriorModel> {
    fit_with(dataset, prior, FitOptions::default())
}

pub fn fit_with(dataset: &Dataset, prior: &PriorSpec, options: FitOptions) -> Result<PosteriorModel> {
    prior.validate()?;
    let dims = dataset.dims();
    let q1: Vec<u64> = dataset.coords(1).iter().map(|&x| quantize(x)).collect();
    let q2: Vec<u64> = dataset.coords(2).iter().map(|&x| quantize(x)).collect();
    let matrices: Vec<TransitionMatrix> = (0..=prior.depth_cap)
        .map(|k| prior.transition_matrix(k))
        .collect();
    let psi_sparse = sparse_psi_table(prior);
    let root = RegionKey::root(dims)?;

    let mut fitter = Fitter {
        dims,
        depth_cap: prior.depth_cap,
        q1: &q1,
        q2: &q2,
        lgamma: HalfIntegerLnGamma::new(dataset.len()),
        log_rho: matrices.iter().map(|m| m.0.map(|r| r.map(f64::ln))).collect(),
        log_lambda: -(dims as f64).ln(),
        psi_sparse: &psi_sparse,
        memo: HashMap::new(),
        memo_limit: options.memo_limit,
    };
    let idx1: Vec<u32> = (0..dataset.n1() as u32).collect();
    let idx2: Vec<u32> = (0..dataset.n2() as u32).collect();
    fitter.eval(&root, idx1, idx2)?;
    let memo = fitter.memo;

    Ok(PosteriorModel {
        prior: prior.clone(),
        data: dataset.clone(),
        q1,
        q2,
        memo,
        matrices,
        psi_sparse,
        root,
    })
}

impl Fitter<'_> {
    fn terminal(&self, key: &RegionKey, counts: (usize, usize)) -> Summary {
        let n = counts.0 + counts.1;
        let level = key.level();
        let log_phi = [log_baseline_density(key, n); 3];
        let psi_merge = self.psi_sparse[level.min(self.depth_cap)][M];
        Summary {
            counts,
            log_phi,
            psi_merge,
        }
    }

    fn split_indices(&self, key: &RegionKey, j: usize, idx: &[u32], q: &[u64]) -> (Vec<u32>, Vec<u32>) {
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for &i in idx {
            let x = q[i as usize * self.dims + j];
            debug_assert!(key.contains_quantized(&q[i as usize * self.dims..(i as usize + 1) * self.dims]));
            if key.goes_right(j, x) {
                right.push(i);
            } else {
                left.push(i);
            }
        }
        (left, right)
    }

    fn eval(&mut self, key: &RegionKey, idx1: Vec<u32>, idx2: Vec<u32>) -> Result<Summary> {
        let counts = (idx1.len(), idx2.len());
        let level = key.level();
        if level >= self.depth_cap || counts.0 + counts.1 <= 1 {
            return Ok(self.terminal(key, counts));
        }
        if let Some(node) = self.memo.get(key) {
            return Ok(Summary {
                counts,
                log_phi: node.log_phi,
                psi_merge: node.psi_merge,
            });
        }

        let p = self.dims;
        let mut zj_d = Vec::with_capacity(p);
        let mut zj_m = Vec::with_capacity(p);
        let mut child_counts = Vec::with_capacity(p);
        let mut child_psi = Vec::with_capacity(p);
        for j in 0..p {
            let (lk, rk) = key.split(j)?;
            let (l1, r1) = self.split_indices(key, j, &idx1, self.q1);
            let (l2, r2) = self.split_indices(key, j, &idx2, self.q2);
            let left = self.eval(&lk, l1, l2)?;
            let right = self.eval(&rk, r1, r2)?;
            let ((a1, a2), (b1, b2)) = (left.counts, right.counts);

            let merge_factor = self.lgamma.centered_beta_ratio(a1 + a2, b1 + b2);
            let divide_factor =
                self.lgamma.centered_beta_ratio(a1, b1) + self.lgamma.centered_beta_ratio(a2, b2);
            zj_m.push(self.log_lambda + merge_factor + left.log_phi[M] + right.log_phi[M]);
            zj_d.push(self.log_lambda + divide_factor + left.log_phi[D] + right.log_phi[D]);
            child_counts.push([left.counts, right.counts]);
            child_psi.push(left.psi_merge * right.psi_merge);
        }

        let log_z = [
            log_sum_exp(&zj_d),
            log_sum_exp(&zj_m),
            (counts.0 + counts.1) as f64 * level as f64 * LN_2,
        ];
        let log_rho = &self.log_rho[level];
        let mut log_phi = [0.0; 3];
        for g in 0..3 {
            let terms = [
                log_rho[g][D] + log_z[D],
                log_rho[g][M] + log_z[M],
                log_rho[g][S] + log_z[S],
            ];
            log_phi[g] = log_sum_exp(&terms);
        }
        if log_phi.iter().chain(&log_z).any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(DmmtError::Numerical(format!("non-finite marginal likelihood at {key}")));
        }

        let merge_null_sum: f64 = zj_m
            .iter()
            .zip(&child_psi)
            .map(|(&z, &psi)| (z - log_z[M]).exp() * psi)
            .sum();
        let post_ms = (log_rho[M][S] + log_z[S] - log_phi[M]).exp();
        let post_mm = (log_rho[M][M] + log_z[M] - log_phi[M]).exp();
        let psi_merge = (post_ms + post_mm * merge_null_sum).clamp(0.0, 1.0);

        if self.memo.len() >= self.memo_limit {
            return Err(DmmtError::MemoLimit(self.memo_limit));
        }
        self.memo.insert(
            key.clone(),
            NodeEvaluation {
                key: key.clone(),
                counts,
                log_z,
                log_zj: [zj_d, zj_m],
                log_phi,
                child_counts,
                psi_merge,
                merge_null_sum,
            },
        );
        Ok(Summary {
            counts,
            log_phi,
            psi_merge,
        })
    }
}

#[derive(Serialize)]
struct MemoRecord<'a> {
    key: &'a RegionKey,
    n1: usize,
    n2: usize,
    log_z: [f64; 3],
    log_phi: [f64; 3],
}

impl PosteriorModel {
    pub fn prior(&self) -> &PriorSpec {
        &self.prior
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn dims(&self) -> usize {
        self.data.dims()
    }

    pub fn root(&self) -> &RegionKey {
        &self.root
    }

    /// Number of expanded (memoized) regions.
    pub fn memo_len(&self) -> usize {
        self.memo.len()
    }

    pub fn node(&self, key: &RegionKey) -> Option<&NodeEvaluation> {
        self.memo.get(key)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeEvaluation> {
        self.memo.values()
    }

    pub fn prior_matrix(&self, level: usize) -> TransitionMatrix {
        self.matrices
            .get(level)
            .copied()
            .unwrap_or_else(TransitionMatrix::all_stop)
    }

    pub(crate) fn sparse_psi(&self, level: usize) -> [f64; 3] {
        self.psi_sparse[level.min(self.prior.depth_cap)]
    }

    fn check_key(&self, key: &RegionKey) -> Result<()> {
        if key.dims() != self.dims() {
            return Err(DmmtError::DimensionMismatch {
                expected: self.dims(),
                found: key.dims(),
            });
        }
        if key.level() > self.prior.depth_cap {
            return Err(DmmtError::KeyBeyondCap {
                key: key.to_string(),
                depth_cap: self.prior.depth_cap,
            });
        }
        Ok(())
    }

    /// Per-group point counts in `key`.
    pub fn counts(&self, key: &RegionKey) -> (usize, usize) {
        if let Some(node) = self.memo.get(key) {
            return node.counts;
        }
        let p = self.dims();
        let count = |q: &[u64]| q.chunks_exact(p).filter(|x| key.contains_quantized(x)).count();
        (count(&self.q1), count(&self.q2))
    }

    /// Counts of the two halves of `key` cut along `j`.
    pub fn child_counts(&self, key: &RegionKey, j: usize) -> Result<ChildCounts> {
        if let Some(node) = self.memo.get(key) {
            return node
                .child_counts
                .get(j)
                .copied()
                .ok_or(DmmtError::DimensionOutOfRange { index: j, dims: self.dims() });
        }
        let (l, r) = key.split(j)?;
        Ok([self.counts(&l), self.counts(&r)])
    }

    /// `ln Φ(A, g)` for each parent state.
    pub fn log_phi(&self, key: &RegionKey) -> Result<[f64; 3]> {
        self.check_key(key)?;
        if let Some(node) = self.memo.get(key) {
            return Ok(node.log_phi);
        }
        let (n1, n2) = self.counts(key);
        Ok([log_baseline_density(key, n1 + n2); 3])
    }

    /// Posterior distribution of the root's virtual parent state,
    /// `ρ_{0,g} Φ(Ω, g) / Σ_h ρ_{0,h} Φ(Ω, h)`. Equal to the prior `ρ_0` when
    /// that is degenerate, which is the default.
    pub fn posterior_initial(&self) -> [f64; 3] {
        let rho0 = self.prior.rho0;
        let phi = self.log_phi(&self.root).expect("root key is always valid");
        let logs: [f64; 3] = [0, 1, 2].map(|g| if rho0[g] > 0.0 { rho0[g].ln() + phi[g] } else { f64::NEG_INFINITY });
        let total = log_sum_exp(&logs);
        logs.map(|l| if l == f64::NEG_INFINITY { 0.0 } else { (l - total).exp() })
    }

    /// Posterior transition row `ρ_{g,·}(A | x) = ρ_{g,h}(A) Z(A, h) / Φ(A, g)`.
    pub fn posterior_transition(&self, key: &RegionKey, from: State) -> Result<[f64; 3]> {
        self.check_key(key)?;
        let level = key.level();
        let prior = self.prior_matrix(level);
        match self.memo.get(key) {
            Some(node) => {
                let g = from.index();
                let lphi = node.log_phi[g];
                Ok([0, 1, 2].map(|h| {
                    let r = prior.0[g][h];
                    if r == 0.0 {
                        0.0
                    } else {
                        (r.ln() + node.log_z[h] - lphi).exp()
                    }
                }))
            }
            None => Ok(prior.row(from)),
        }
    }

    /// Posterior direction probabilities `Z_j(A, g) / Z(A, g)` for a non-stop state.
    pub fn posterior_direction(&self, key: &RegionKey, state: State) -> Result<Vec<f64>> {
        if state == State::Stop {
            return Err(DmmtError::StopState);
        }
        self.check_key(key)?;
        match self.memo.get(key) {
            Some(node) => {
                let s = state.index();
                Ok(node.log_zj[s]
                    .iter()
                    .map(|&z| (z - node.log_z[s]).exp())
                    .collect())
            }
            None => (0..self.dims())
                .map(|j| self.prior.direction_prob(key, j, state))
                .collect(),
        }
    }

    /// Posterior Beta pseudo-counts for the two halves of `key` cut along `j`,
    /// as `[(left, right) for group 1, (left, right) for group 2]`.
    pub fn posterior_pseudo_counts(&self, key: &RegionKey, j: usize, state: State) -> Result<[(f64, f64); 2]> {
        self.check_key(key)?;
        let [(l1, l2), (r1, r2)] = self.child_counts(key, j)?;
        let mut out = [(0.0, 0.0); 2];
        for (t, slot) in out.iter_mut().enumerate() {
            let (al, ar) = self.prior.pseudo_counts(key, j, t + 1, state)?;
            let (nl, nr) = match state {
                State::Divide if t == 0 => (l1, r1),
                State::Divide => (l2, r2),
                _ => (l1 + l2, r1 + r2),
            };
            *slot = (al + nl as f64, ar + nr as f64);
        }
        Ok(out)
    }

    /// Write one JSON record per memoized region, ordered by level then key.
    pub fn write_memo_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut nodes: Vec<&NodeEvaluation> = self.memo.values().collect();
        nodes.sort_by(|a, b| (a.key.level(), &a.key).cmp(&(b.key.level(), &b.key)));
        for n in nodes {
            let rec = MemoRecord {
                key: &n.key,
                n1: n.counts.0,
                n2: n.counts.1,
                log_z: n.log_z,
                log_phi: n.log_phi,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}
