//! Exhaustive-enumeration oracles, independent of the library's recursions.
//!
//! Every configuration tree of states and directions is materialized as an
//! explicit list entry; its weight is the product of prior probabilities and
//! the integrated likelihood over the Beta splits, computed with `tgamma`
//! rather than the log-gamma tables the engine uses.

#![allow(dead_code)]

pub const D: usize = 0;
pub const M: usize = 1;
pub const S: usize = 2;

#[derive(Clone, Copy, Debug)]
pub struct Prior {
    pub beta: f64,
    pub gamma: f64,
    pub depth_cap: usize,
}

impl Prior {
    pub fn rho(&self, level: usize) -> [[f64; 3]; 3] {
        if level >= self.depth_cap {
            return [[0.0, 0.0, 1.0]; 3];
        }
        let md = self.gamma / 2f64.powi(level as i32);
        [
            [self.beta, (1.0 - self.beta) / 2.0, (1.0 - self.beta) / 2.0],
            [md, (1.0 - md) / 2.0, (1.0 - md) / 2.0],
            [0.0, 0.0, 1.0],
        ]
    }
}

/// A box as per-dimension `(lo, hi)`.
#[derive(Clone, Debug)]
pub struct Cell {
    pub bounds: Vec<(f64, f64)>,
    pub level: usize,
}

impl Cell {
    pub fn unit(p: usize) -> Self {
        Cell {
            bounds: vec![(0.0, 1.0); p],
            level: 0,
        }
    }

    pub fn halves(&self, j: usize) -> (Cell, Cell) {
        let (lo, hi) = self.bounds[j];
        let mid = 0.5 * (lo + hi);
        let mut l = self.clone();
        let mut r = self.clone();
        l.bounds[j] = (lo, mid);
        r.bounds[j] = (mid, hi);
        l.level += 1;
        r.level += 1;
        (l, r)
    }

    pub fn count(&self, pts: &[Vec<f64>]) -> usize {
        pts.iter()
            .filter(|x| x.iter().zip(&self.bounds).all(|(v, (lo, hi))| lo <= v && v < hi))
            .count()
    }

    pub fn volume(&self) -> f64 {
        self.bounds.iter().map(|(lo, hi)| hi - lo).product()
    }
}

fn beta_fn(a: f64, b: f64) -> f64 {
    libm::tgamma(a) * libm::tgamma(b) / libm::tgamma(a + b)
}

/// `∫ y^l (1-y)^r Beta(y; 1/2, 1/2) dy`.
fn split_factor(l: usize, r: usize) -> f64 {
    beta_fn(0.5 + l as f64, 0.5 + r as f64) / beta_fn(0.5, 0.5)
}

/// One configuration of a subtree: its weight (prior probability times
/// integrated likelihood) and whether any node in it is in the divide state.
#[derive(Clone, Copy, Debug)]
pub struct Config {
    pub weight: f64,
    pub divided: bool,
}

/// All configurations of the subtree rooted at `cell` whose parent is in `parent`.
pub fn configurations(prior: &Prior, cell: &Cell, parent: usize, g1: &[Vec<f64>], g2: &[Vec<f64>]) -> Vec<Config> {
    let p = cell.bounds.len();
    let rho = prior.rho(cell.level)[parent];
    let n = cell.count(g1) + cell.count(g2);
    let mut out = Vec::new();
    if rho[S] > 0.0 {
        out.push(Config {
            weight: rho[S] * cell.volume().powi(-(n as i32)),
            divided: false,
        });
    }
    for state in [D, M] {
        if rho[state] == 0.0 {
            continue;
        }
        for j in 0..p {
            let (l, r) = cell.halves(j);
            let lik = if state == D {
                split_factor(l.count(g1), r.count(g1)) * split_factor(l.count(g2), r.count(g2))
            } else {
                split_factor(l.count(g1) + l.count(g2), r.count(g1) + r.count(g2))
            };
            let left = configurations(prior, &l, state, g1, g2);
            let right = configurations(prior, &r, state, g1, g2);
            let w = rho[state] / p as f64 * lik;
            for a in &left {
                for b in &right {
                    out.push(Config {
                        weight: w * a.weight * b.weight,
                        divided: state == D || a.divided || b.divided,
                    });
                }
            }
        }
    }
    out
}

/// `Φ(Ω, g)` by enumeration.
pub fn phi(prior: &Prior, p: usize, g: usize, g1: &[Vec<f64>], g2: &[Vec<f64>]) -> f64 {
    configurations(prior, &Cell::unit(p), g, g1, g2).iter().map(|c| c.weight).sum()
}

/// Posterior probability of no divide state anywhere, by enumeration.
pub fn prob_null(prior: &Prior, p: usize, rho0: [f64; 3], g1: &[Vec<f64>], g2: &[Vec<f64>]) -> f64 {
    let mut null = 0.0;
    let mut total = 0.0;
    for (g, &w0) in rho0.iter().enumerate() {
        if w0 == 0.0 {
            continue;
        }
        for c in configurations(prior, &Cell::unit(p), g, g1, g2) {
            total += w0 * c.weight;
            if !c.divided {
                null += w0 * c.weight;
            }
        }
    }
    null / total
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
