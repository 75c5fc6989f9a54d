//! Simulation harness: Gaussian-mixture scenarios, permutation nulls,
//! replicate runs, ROC AUC, prior sensitivity sweeps and timing.
//!
//! Randomness is reproducible across platforms. Each replicate `r` gets its
//! own seed `splitmix64(base_seed + r * 0x9E3779B97F4A7C15)` feeding a
//! `ChaCha8Rng`; uniforms are `rand`'s 53-bit `f64` draws and normals come from
//! the cosine branch of Box–Muller, `sqrt(-2 ln(1 - u1)) cos(2π u2)`.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::engine::fit;
use crate::error::{DmmtError, Result};
use crate::inference::{representative_tree, NullSummary};
use crate::model::PriorSpec;
use crate::partition::rescale;

pub type SimRng = ChaCha8Rng;

/// Wall-clock timer that reads zero where the platform has no clock
/// (`wasm32-unknown-unknown`, where `Instant::now` panics).
struct Stopwatch {
    #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
    start: std::time::Instant,
}

impl Stopwatch {
    fn start() -> Self {
        Stopwatch {
            #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
            start: std::time::Instant::now(),
        }
    }

    fn millis(&self) -> f64 {
        #[cfg(not(all(target_arch = "wasm32", target_os = "unknown")))]
        return self.start.elapsed().as_secs_f64() * 1e3;
        #[cfg(all(target_arch = "wasm32", target_os = "unknown"))]
        return 0.0;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(into = "String")]
pub enum ScenarioId {
    LocalShift1d,
    LocalDispersion1d,
    GlobalShift1d,
    GlobalDispersion1d,
    LocalShift2d,
    LocalDispersion2d,
    GlobalShift2d,
    GlobalDispersion2d,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 8] = [
        ScenarioId::LocalShift1d,
        ScenarioId::LocalDispersion1d,
        ScenarioId::GlobalShift1d,
        ScenarioId::GlobalDispersion1d,
        ScenarioId::LocalShift2d,
        ScenarioId::LocalDispersion2d,
        ScenarioId::GlobalShift2d,
        ScenarioId::GlobalDispersion2d,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioId::LocalShift1d => "1d-local-shift",
            ScenarioId::LocalDispersion1d => "1d-local-dispersion",
            ScenarioId::GlobalShift1d => "1d-global-shift",
            ScenarioId::GlobalDispersion1d => "1d-global-dispersion",
            ScenarioId::LocalShift2d => "2d-local-shift",
            ScenarioId::LocalDispersion2d => "2d-local-dispersion",
            ScenarioId::GlobalShift2d => "2d-global-shift",
            ScenarioId::GlobalDispersion2d => "2d-global-dispersion",
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<ScenarioId> for String {
    fn from(id: ScenarioId) -> String {
        id.as_str().to_string()
    }
}

impl FromStr for ScenarioId {
    type Err = DmmtError;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| DmmtError::InvalidInput(format!("unknown scenario {s:?}")))
    }
}

/// Multivariate normal component with a lower-triangular Cholesky factor.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let p = mean.len();
        if cov.len() != p || cov.iter().any(|r| r.len() != p) {
            return Err(DmmtError::InvalidInput("covariance shape does not match mean".into()));
        }
        let mut chol = vec![vec![0.0; p]; p];
        for i in 0..p {
            for j in 0..=i {
                if (cov[i][j] - cov[j][i]).abs() > 1e-12 {
                    return Err(DmmtError::InvalidInput("covariance is not symmetric".into()));
                }
                let s: f64 = (0..j).map(|k| chol[i][k] * chol[j][k]).sum();
                if i == j {
                    let d = cov[i][i] - s;
                    if d <= 0.0 {
                        return Err(DmmtError::InvalidInput("covariance is not positive definite".into()));
                    }
                    chol[i][i] = d.sqrt();
                } else {
                    chol[i][j] = (cov[i][j] - s) / chol[j][j];
                }
            }
        }
        Ok(Gaussian { mean, cov, chol })
    }

    pub fn univariate(mean: f64, sd: f64) -> Self {
        Gaussian::new(vec![mean], vec![vec![sd * sd]]).expect("positive variance")
    }

    /// Bivariate normal from `(Σ11, Σ12, Σ22)`.
    pub fn bivariate(mean: [f64; 2], cov: [f64; 3]) -> Self {
        Gaussian::new(mean.to_vec(), vec![vec![cov[0], cov[1]], vec![cov[1], cov[2]]])
            .expect("valid bivariate covariance")
    }

    fn scaled_cov(&self, factor: f64) -> Self {
        let cov = self.cov.iter().map(|r| r.iter().map(|v| v * factor).collect()).collect();
        Gaussian::new(self.mean.clone(), cov).expect("scaling keeps positive definiteness")
    }

    fn shifted(&self, delta: &[f64]) -> Self {
        let mean = self.mean.iter().zip(delta).map(|(m, d)| m + d).collect();
        Gaussian::new(mean, self.cov.clone()).expect("shift keeps covariance")
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.mean.len()).map(|_| standard_normal(rng)).collect();
        (0..self.mean.len())
            .map(|i| self.mean[i] + (0..=i).map(|k| self.chol[i][k] * z[k]).sum::<f64>())
            .collect()
    }
}

/// Box–Muller, cosine branch only.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mixture {
    pub weights: Vec<f64>,
    pub components: Vec<Gaussian>,
}

impl Mixture {
    pub fn new(weights: Vec<f64>, components: Vec<Gaussian>) -> Result<Self> {
        if weights.len() != components.len() || weights.is_empty() {
            return Err(DmmtError::InvalidInput("one weight per component required".into()));
        }
        if weights.iter().any(|&w| w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(DmmtError::InvalidInput("mixture weights must be nonnegative and sum to 1".into()));
        }
        Ok(Mixture { weights, components })
    }

    fn single(g: Gaussian) -> Self {
        Mixture {
            weights: vec![1.0],
            components: vec![g],
        }
    }

    pub fn dims(&self) -> usize {
        self.components[0].mean.len()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.components.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                pick = i;
                break;
            }
        }
        self.components[pick].sample(rng)
    }
}

/// One simulation setting: two mixtures and their sample sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub id: ScenarioId,
    pub n1: usize,
    pub n2: usize,
    pub group1: Mixture,
    pub group2: Mixture,
}

const LS2D_WEIGHTS: [f64; 5] = [0.11, 0.16, 0.25, 0.39, 0.09];
const LS2D_MEANS: [[f64; 2]; 5] = [[9.0, 9.9], [0.0, 4.4], [-2.3, -9.7], [3.4, 5.9], [5.8, -9.5]];
const LS2D_COVS: [[f64; 3]; 5] = [
    [2.9, 0.5, 1.1],
    [1.2, -0.6, 2.8],
    [2.3, -1.0, 1.7],
    [1.1, -0.4, 2.9],
    [3.0, 0.2, 1.0],
];
const LD2D_WEIGHTS: [f64; 5] = [0.19, 0.08, 0.33, 0.27, 0.13];
const LD2D_MEANS: [[f64; 2]; 5] = [[0.9, -7.2], [-5.7, 3.3], [-6.3, -2.1], [7.5, -3.1], [-3.1, 9.5]];
const LD2D_COVS: [[f64; 3]; 5] = [
    [0.5, -0.1, 0.3],
    [1.3, 0.7, 2.7],
    [1.0, -0.3, 3.0],
    [2.9, 0.5, 1.1],
    [2.4, -0.9, 1.6],
];

fn mixture_2d(weights: &[f64], means: &[[f64; 2]], covs: &[[f64; 3]]) -> Mixture {
    let comps = means
        .iter()
        .zip(covs)
        .map(|(m, c)| Gaussian::bivariate(*m, *c))
        .collect();
    Mixture::new(weights.to_vec(), comps).expect("tabulated mixture is valid")
}

fn with_first(mut m: Mixture, first: Gaussian) -> Mixture {
    m.components[0] = first;
    m
}

impl Scenario {
    /// The setting with its default sample sizes.
    pub fn new(id: ScenarioId) -> Self {
        let uni = Gaussian::univariate;
        let two = |w: f64, a: Gaussian, b: Gaussian| Mixture::new(vec![w, 1.0 - w], vec![a, b]).expect("valid");
        let (n, g1, g2) = match id {
            ScenarioId::LocalShift1d => (
                200,
                two(0.9, uni(0.2, 0.05), uni(0.9, 0.01)),
                two(0.9, uni(0.2, 0.05), uni(0.88, 0.01)),
            ),
            ScenarioId::LocalDispersion1d => (
                200,
                two(0.9, uni(0.2, 0.05), uni(0.8, 0.01)),
                two(0.9, uni(0.2, 0.05), uni(0.8, 0.04)),
            ),
            ScenarioId::GlobalShift1d => (
                100,
                Mixture::single(uni(-0.5, 2.0)),
                Mixture::single(uni(0.5, 2.0)),
            ),
            ScenarioId::GlobalDispersion1d => (
                50,
                Mixture::single(uni(0.0, 1.0)),
                Mixture::single(uni(0.0, 2.0)),
            ),
            ScenarioId::LocalShift2d => {
                let base = mixture_2d(&LS2D_WEIGHTS, &LS2D_MEANS, &LS2D_COVS);
                let moved = base.components[0].shifted(&[1.0, 1.0]);
                (400, base.clone(), with_first(base, moved))
            }
            ScenarioId::LocalDispersion2d => {
                let base = mixture_2d(&LD2D_WEIGHTS, &LD2D_MEANS, &LD2D_COVS);
                let wide = base.components[0].scaled_cov(5.0);
                (400, base.clone(), with_first(base, wide))
            }
            ScenarioId::GlobalShift2d => {
                let cov = [2.9, 0.4, 1.1];
                (
                    100,
                    Mixture::single(Gaussian::bivariate([0.0, 0.0], cov)),
                    Mixture::single(Gaussian::bivariate([1.0, 0.0], cov)),
                )
            }
            ScenarioId::GlobalDispersion2d => (
                50,
                Mixture::single(Gaussian::bivariate([0.0, 0.0], [1.0, 0.0, 1.0])),
                Mixture::single(Gaussian::bivariate([0.0, 0.0], [3.0, 0.0, 3.0])),
            ),
        };
        Scenario {
            id,
            n1: n,
            n2: n,
            group1: g1,
            group2: g2,
        }
    }

    pub fn with_sizes(mut self, n1: usize, n2: usize) -> Self {
        self.n1 = n1;
        self.n2 = n2;
        self
    }

    pub fn dims(&self) -> usize {
        self.group1.dims()
    }

    /// Draw both raw samples.
    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let g1 = (0..self.n1).map(|_| self.group1.sample(rng)).collect();
        let g2 = (0..self.n2).map(|_| self.group2.sample(rng)).collect();
        (g1, g2)
    }
}

/// Reassign the pooled points to two groups of the original sizes uniformly at random.
pub fn permute_labels<R: Rng + ?Sized>(
    group1: &[Vec<f64>],
    group2: &[Vec<f64>],
    rng: &mut R,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut pooled: Vec<Vec<f64>> = group1.iter().chain(group2).cloned().collect();
    pooled.shuffle(rng);
    let rest = pooled.split_off(group1.len());
    (pooled, rest)
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `index` under `base_seed`.
pub fn replicate_seed(base_seed: u64, index: usize) -> u64 {
    splitmix64(base_seed.wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Outcome of fitting one dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicateResult {
    pub replicate_index: usize,
    pub seed: u64,
    pub scenario: ScenarioId,
    pub is_null: bool,
    pub prob_null: f64,
    /// `1 - prob_null`.
    pub statistic: f64,
    pub fit_millis: f64,
    pub top_region_key: Option<String>,
    pub top_effect_size: Option<f64>,
    /// Top region bounds mapped back to raw coordinates.
    pub top_region_raw_bounds: Option<Vec<(f64, f64)>>,
}

/// Key text, effect size and raw-coordinate bounds of a fit's top region.
pub type TopRegion = (String, f64, Vec<(f64, f64)>);

/// Rescale, fit and summarize one raw dataset.
pub fn evaluate(
    raw1: &[Vec<f64>],
    raw2: &[Vec<f64>],
    prior: &PriorSpec,
) -> Result<(NullSummary, f64, Option<TopRegion>)> {
    let data = rescale(raw1, raw2)?;
    let clock = Stopwatch::start();
    let model = fit(&data, prior)?;
    let summary = NullSummary::of(&model);
    let millis = clock.millis();
    let tree = representative_tree(&model, prior.delta_star)?;
    let top = tree.top_region().map(|n| {
        let raw = tree
            .raw_bounds(&n.key)
            .unwrap_or_default()
            .into_iter()
            .map(|iv| (iv.lo, iv.hi))
            .collect();
        (n.key.to_string(), n.effect_size, raw)
    });
    Ok((summary, millis, top))
}

fn run_one(scenario: &Scenario, index: usize, prior: &PriorSpec, base_seed: u64) -> Result<[ReplicateResult; 2]> {
    let seed = replicate_seed(base_seed, index);
    let mut rng = SimRng::seed_from_u64(seed);
    let (g1, g2) = scenario.generate(&mut rng);
    let (n1, n2) = permute_labels(&g1, &g2, &mut rng);
    let wrap = |e: DmmtError| DmmtError::InvalidInput(format!("replicate {index}: {e}"));
    let make = |raw1: &[Vec<f64>], raw2: &[Vec<f64>], is_null: bool| -> Result<ReplicateResult> {
        let (summary, fit_millis, top) = evaluate(raw1, raw2, prior).map_err(wrap)?;
        let (key, eff, raw) = match top {
            Some((k, e, r)) => (Some(k), Some(e), Some(r)),
            None => (None, None, None),
        };
        Ok(ReplicateResult {
            replicate_index: index,
            seed,
            scenario: scenario.id,
            is_null,
            prob_null: summary.prob_null,
            statistic: summary.statistic,
            fit_millis,
            top_region_key: key,
            top_effect_size: eff,
            top_region_raw_bounds: raw,
        })
    };
    Ok([make(&g1, &g2, false)?, make(&n1, &n2, true)?])
}

/// For each replicate: simulate, fit on the true labels and on permuted
/// labels. Results are ordered by replicate index, alternative before null.
pub fn run_replicates(
    scenario: &Scenario,
    replicates: usize,
    prior: &PriorSpec,
    base_seed: u64,
) -> Result<Vec<ReplicateResult>> {
    if replicates == 0 {
        return Err(DmmtError::InvalidInput("at least one replicate is required".into()));
    }
    prior.validate()?;
    #[cfg(feature = "parallel")]
    let pairs: Vec<Result<[ReplicateResult; 2]>> = {
        use rayon::prelude::*;
        (0..replicates)
            .into_par_iter()
            .map(|i| run_one(scenario, i, prior, base_seed))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let pairs: Vec<Result<[ReplicateResult; 2]>> = (0..replicates)
        .map(|i| run_one(scenario, i, prior, base_seed))
        .collect();
    let mut out = Vec::with_capacity(2 * replicates);
    for pair in pairs {
        out.extend(pair?);
    }
    Ok(out)
}

/// Split replicate results into (null, alternative) statistics.
pub fn split_statistics(results: &[ReplicateResult]) -> (Vec<f64>, Vec<f64>) {
    let null = results.iter().filter(|r| r.is_null).map(|r| r.statistic).collect();
    let alt = results.iter().filter(|r| !r.is_null).map(|r| r.statistic).collect();
    (null, alt)
}

/// Mann–Whitney AUC: fraction of (null, alt) pairs with `alt > null`, ties 1/2.
pub fn roc_auc(null_stats: &[f64], alt_stats: &[f64]) -> Result<f64> {
    if null_stats.is_empty() || alt_stats.is_empty() {
        return Err(DmmtError::InvalidInput("AUC needs nonempty null and alternative samples".into()));
    }
    let mut null: Vec<f64> = null_stats.to_vec();
    null.sort_by(f64::total_cmp);
    let mut wins = 0.0;
    for &a in alt_stats {
        let below = null.partition_point(|&x| x < a);
        let not_above = null.partition_point(|&x| x <= a);
        wins += below as f64 + 0.5 * (not_above - below) as f64;
    }
    Ok(wins / (null.len() as f64 * alt_stats.len() as f64))
}

/// Empirical ROC curve points `(false positive rate, true positive rate)`,
/// from the strictest threshold down.
pub fn roc_curve(null_stats: &[f64], alt_stats: &[f64]) -> Vec<(f64, f64)> {
    let mut thresholds: Vec<f64> = null_stats.iter().chain(alt_stats).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let rate = |xs: &[f64], t: f64| xs.iter().filter(|&&x| x >= t).count() as f64 / xs.len().max(1) as f64;
    let mut pts = vec![(0.0, 0.0)];
    pts.extend(thresholds.iter().map(|&t| (rate(null_stats, t), rate(alt_stats, t))));
    pts.push((1.0, 1.0));
    pts.dedup();
    pts
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepCell {
    pub beta: f64,
    pub gamma: f64,
    pub median_null: f64,
    pub median_alt: f64,
    pub auc: f64,
}

/// Median null probability under permuted-null and alternative data for every
/// `(beta, gamma)` cell. All cells share the same simulated datasets.
pub fn sensitivity_sweep(
    scenario: &Scenario,
    grid: &[(f64, f64)],
    replicates: usize,
    base_prior: &PriorSpec,
    base_seed: u64,
) -> Result<Vec<SweepCell>> {
    grid.iter()
        .map(|&(beta, gamma)| {
            let prior = PriorSpec {
                beta,
                gamma,
                ..base_prior.clone()
            };
            let results = run_replicates(scenario, replicates, &prior, base_seed)?;
            let pn = |null: bool| -> Vec<f64> {
                results.iter().filter(|r| r.is_null == null).map(|r| r.prob_null).collect()
            };
            let (ns, alts) = split_statistics(&results);
            Ok(SweepCell {
                beta,
                gamma,
                median_null: median(&pn(true)),
                median_alt: median(&pn(false)),
                auc: roc_auc(&ns, &alts)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub median_fit_millis: f64,
    pub replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub scenario: ScenarioId,
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of `ln(median time)` against `ln(n)`.
    pub log_log_slope: f64,
}

/// Median fit time per per-group sample size, run sequentially. Each timing
/// repeats the fit `inner` times on the same data to rise above timer noise.
pub fn benchmark(
    scenario: &Scenario,
    sizes: &[usize],
    replicates: usize,
    inner: usize,
    prior: &PriorSpec,
    base_seed: u64,
) -> Result<BenchReport> {
    if sizes.len() < 2 || replicates == 0 || inner == 0 {
        return Err(DmmtError::InvalidInput("benchmark needs two sizes and positive replicate counts".into()));
    }
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let sc = scenario.clone().with_sizes(n, n);
        let mut times = Vec::with_capacity(replicates);
        for r in 0..replicates {
            let mut rng = SimRng::seed_from_u64(replicate_seed(base_seed, r));
            let (g1, g2) = sc.generate(&mut rng);
            let data = rescale(&g1, &g2)?;
            let clock = Stopwatch::start();
            for _ in 0..inner {
                let model = fit(&data, prior)?;
                std::hint::black_box(crate::inference::prob_null(&model));
            }
            times.push(clock.millis() / inner as f64);
        }
        rows.push(BenchRow {
            n,
            median_fit_millis: median(&times),
            replicates,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.median_fit_millis.ln()).collect();
    Ok(BenchReport {
        scenario: scenario.id,
        rows,
        log_log_slope: slope(&xs, &ys),
    })
}

pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
