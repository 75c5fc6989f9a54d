//! Prior specification for the divide-merge Markov tree.

use std::f64::consts::LN_2;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{DmmtError, Result};
use crate::partition::{RegionKey, MAX_DIM_DEPTH};

/// Hidden state of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum State {
    Divide,
    Merge,
    Stop,
}

impl State {
    pub const ALL: [State; 3] = [State::Divide, State::Merge, State::Stop];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> State {
        State::ALL[i]
    }
}

/// Row-stochastic 3×3 matrix indexed `(from, to)` in divide, merge, stop order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransitionMatrix(pub [[f64; 3]; 3]);

impl TransitionMatrix {
    pub fn row(&self, from: State) -> [f64; 3] {
        self.0[from.index()]
    }

    pub fn get(&self, from: State, to: State) -> f64 {
        self.0[from.index()][to.index()]
    }

    /// Every row is the absorbing stop row.
    pub fn all_stop() -> Self {
        TransitionMatrix([[0.0, 0.0, 1.0]; 3])
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DirectionPolicy {
    /// `1/p` in every direction, for both non-stop states.
    #[default]
    Uniform,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PseudoCountPolicy {
    /// Pseudo-counts equal to the baseline conditional child masses.
    #[default]
    Centered,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Lebesgue measure on `[0, 1)^p`. Other product baselines are handled by
    /// mapping each coordinate through its CDF before fitting.
    #[default]
    Uniform,
}

/// All prior hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    /// Probability that a divide node's child is again divide.
    pub beta: f64,
    /// Scale of the merge-to-divide transition, decayed by `2^-level`.
    pub gamma: f64,
    /// Initial (root parent) state probabilities in divide, merge, stop order.
    pub rho0: [f64; 3],
    /// Level at which every node is forced to stop.
    pub depth_cap: usize,
    pub direction_policy: DirectionPolicy,
    pub pseudo_count_policy: PseudoCountPolicy,
    pub baseline: Baseline,
    /// Representative-tree threshold: a branch stops once its stop mass exceeds
    /// `1 - delta_star`.
    pub delta_star: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            beta: 0.3,
            gamma: 0.2,
            rho0: [1.0, 0.0, 0.0],
            depth_cap: 12,
            direction_policy: DirectionPolicy::Uniform,
            pseudo_count_policy: PseudoCountPolicy::Centered,
            baseline: Baseline::Uniform,
            delta_star: 0.8,
        }
    }
}

fn open_unit(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(DmmtError::InvalidPrior {
            name,
            reason: format!("{v} is not in (0, 1)"),
        })
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        open_unit("beta", self.beta)?;
        open_unit("gamma", self.gamma)?;
        open_unit("delta_star", self.delta_star)?;
        if self.rho0.iter().any(|&r| !(0.0..=1.0).contains(&r)) {
            return Err(DmmtError::InvalidPrior {
                name: "rho0",
                reason: "entries must lie in [0, 1]".into(),
            });
        }
        let sum: f64 = self.rho0.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(DmmtError::InvalidPrior {
                name: "rho0",
                reason: format!("entries sum to {sum}, not 1"),
            });
        }
        if self.depth_cap == 0 || self.depth_cap > MAX_DIM_DEPTH {
            return Err(DmmtError::InvalidPrior {
                name: "depth_cap",
                reason: format!("{} is not in 1..={MAX_DIM_DEPTH}", self.depth_cap),
            });
        }
        Ok(())
    }

    /// Parse a flat `key = value` config; blank lines and `#` comments are
    /// ignored and unlisted keys keep their defaults.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let mut spec = PriorSpec::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| DmmtError::Config {
                line: line_no,
                reason: format!("expected key=value, got {line:?}"),
            })?;
            spec.set(k.trim(), v.trim()).map_err(|reason| DmmtError::Config {
                line: line_no,
                reason,
            })?;
        }
        spec.validate()?;
        Ok(spec)
    }

    /// Assign one config key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let float = || {
            value
                .parse::<f64>()
                .map_err(|e| format!("{key}: {value:?} is not a number ({e})"))
        };
        match key {
            "beta" => self.beta = float()?,
            "gamma" => self.gamma = float()?,
            "rho0_d" => self.rho0[0] = float()?,
            "rho0_m" => self.rho0[1] = float()?,
            "rho0_s" => self.rho0[2] = float()?,
            "delta_star" => self.delta_star = float()?,
            "depth_cap" => {
                self.depth_cap = value
                    .parse()
                    .map_err(|e| format!("depth_cap: {value:?} ({e})"))?
            }
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "beta={}", self.beta);
        let _ = writeln!(s, "gamma={}", self.gamma);
        let _ = writeln!(s, "rho0_d={}", self.rho0[0]);
        let _ = writeln!(s, "rho0_m={}", self.rho0[1]);
        let _ = writeln!(s, "rho0_s={}", self.rho0[2]);
        let _ = writeln!(s, "depth_cap={}", self.depth_cap);
        let _ = writeln!(s, "delta_star={}", self.delta_star);
        s
    }

    /// Prior transition matrix for nodes at `level`.
    pub fn transition_matrix(&self, level: usize) -> TransitionMatrix {
        if level >= self.depth_cap {
            return TransitionMatrix::all_stop();
        }
        let b = self.beta;
        let md = self.gamma * (-(level as f64)).exp2();
        TransitionMatrix([
            [b, (1.0 - b) / 2.0, (1.0 - b) / 2.0],
            [md, (1.0 - md) / 2.0, (1.0 - md) / 2.0],
            [0.0, 0.0, 1.0],
        ])
    }

    /// Prior probability of cutting `key` along dimension `j` in `state`.
    pub fn direction_prob(&self, key: &RegionKey, j: usize, state: State) -> Result<f64> {
        if state == State::Stop {
            return Err(DmmtError::StopState);
        }
        if j >= key.dims() {
            return Err(DmmtError::DimensionOutOfRange {
                index: j,
                dims: key.dims(),
            });
        }
        match self.direction_policy {
            DirectionPolicy::Uniform => Ok(1.0 / key.dims() as f64),
        }
    }

    /// Beta pseudo-counts `(left, right)` for group `group` when cutting `key`
    /// along `j` in `state`. Under the centered policy these are the baseline
    /// conditional masses of the two halves.
    pub fn pseudo_counts(
        &self,
        key: &RegionKey,
        j: usize,
        group: usize,
        state: State,
    ) -> Result<(f64, f64)> {
        if state == State::Stop {
            return Err(DmmtError::StopState);
        }
        if j >= key.dims() {
            return Err(DmmtError::DimensionOutOfRange {
                index: j,
                dims: key.dims(),
            });
        }
        if group != 1 && group != 2 {
            return Err(DmmtError::InvalidInput(format!("group {group} is not 1 or 2")));
        }
        match (self.pseudo_count_policy, self.baseline) {
            (PseudoCountPolicy::Centered, Baseline::Uniform) => Ok((0.5, 0.5)),
        }
    }

    pub fn log_rho0(&self) -> [f64; 3] {
        self.rho0.map(f64::ln)
    }
}

impl TryFrom<&str> for State {
    type Error = DmmtError;

    fn try_from(s: &str) -> Result<State> {
        match s {
            "d" | "divide" => Ok(State::Divide),
            "m" | "merge" => Ok(State::Merge),
            "s" | "stop" => Ok(State::Stop),
            _ => Err(DmmtError::InvalidInput(format!("unknown state {s:?}"))),
        }
    }
}

/// `ln prod q0(x | A)` for `n_points` points in `key` under the uniform
/// baseline: each point contributes `ln 2^level`.
pub fn log_baseline_density(key: &RegionKey, n_points: usize) -> f64 {
    (n_points * key.level()) as f64 * LN_2
}

/// `ln D(w1, w2) = ln Γ(w1) + ln Γ(w2) - ln Γ(w1 + w2)`.
pub fn log_beta_function(w1: f64, w2: f64) -> Result<f64> {
    if !(w1.is_finite() && w2.is_finite() && w1 > 0.0 && w2 > 0.0) {
        return Err(DmmtError::NonPositiveArgument(w1, w2));
    }
    Ok(libm::lgamma(w1) + libm::lgamma(w2) - libm::lgamma(w1 + w2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn default_matrix_level_zero() {
        let m = PriorSpec::default().transition_matrix(0);
        let want = [[0.3, 0.35, 0.35], [0.2, 0.4, 0.4], [0.0, 0.0, 1.0]];
        for (r, w) in m.0.iter().zip(want) {
            for (a, b) in r.iter().zip(w) {
                assert!(close(*a, b, 1e-15));
            }
        }
    }

    #[test]
    fn merge_row_decays_with_level() {
        let m = PriorSpec::default().transition_matrix(2);
        let row = m.row(State::Merge);
        assert!(close(row[0], 0.05, 1e-15));
        assert!(close(row[1], 0.475, 1e-15));
        assert!(close(row[2], 0.475, 1e-15));
    }

    #[test]
    fn cap_forces_stop() {
        let spec = PriorSpec::default();
        assert_eq!(spec.transition_matrix(12), TransitionMatrix::all_stop());
        assert_eq!(spec.transition_matrix(40), TransitionMatrix::all_stop());
        assert_ne!(spec.transition_matrix(11), TransitionMatrix::all_stop());
    }

    #[test]
    fn direction_probabilities() {
        let spec = PriorSpec::default();
        let k2 = RegionKey::root(2).unwrap();
        assert_eq!(spec.direction_prob(&k2, 1, State::Merge).unwrap(), 0.5);
        let k7 = RegionKey::root(7).unwrap();
        let total: f64 = (0..7)
            .map(|j| spec.direction_prob(&k7, j, State::Divide).unwrap())
            .sum();
        assert!(close(total, 1.0, 1e-15));
        assert_eq!(spec.direction_prob(&k7, 3, State::Divide).unwrap(), 1.0 / 7.0);
        assert!(spec.direction_prob(&k7, 0, State::Stop).is_err());
        assert!(spec.direction_prob(&k7, 7, State::Merge).is_err());
    }

    #[test]
    fn centered_pseudo_counts() {
        let spec = PriorSpec::default();
        let key: RegionKey = "011;1".parse().unwrap();
        for j in 0..2 {
            for t in 1..=2 {
                for s in [State::Divide, State::Merge] {
                    let (l, r) = spec.pseudo_counts(&key, j, t, s).unwrap();
                    let (lk, _) = key.split(j).unwrap();
                    assert_eq!(l / (l + r), lk.baseline_volume() / key.baseline_volume());
                    assert_eq!(l + r, 1.0);
                }
            }
        }
        assert!(spec.pseudo_counts(&key, 0, 1, State::Stop).is_err());
    }

    #[test]
    fn baseline_density() {
        let root = RegionKey::root(1).unwrap();
        assert_eq!(log_baseline_density(&root, 10), 0.0);
        let k: RegionKey = "01".parse().unwrap();
        assert!(close(log_baseline_density(&k, 3), 6.0 * LN_2, 1e-15));
        assert_eq!(log_baseline_density(&k, 0), 0.0);
    }

    #[test]
    fn beta_function_values() {
        assert!(close(log_beta_function(1.0, 1.0).unwrap(), 0.0, 1e-15));
        assert!(close(log_beta_function(0.5, 0.5).unwrap(), PI.ln(), 1e-15));
        assert!(close(log_beta_function(2.0, 3.0).unwrap(), (1.0f64 / 12.0).ln(), 1e-14));
        assert!(log_beta_function(0.0, 1.0).is_err());
        assert!(log_beta_function(1.0, -2.0).is_err());
        let big = log_beta_function(1e7, 1e7 + 0.5).unwrap();
        assert!(big.is_finite() && big < 0.0);
    }

    #[test]
    fn config_round_trip_and_errors() {
        let spec = PriorSpec::from_config_str("# prior\nbeta = 0.4\n\ngamma=0.1 # decay\ndepth_cap=8\n").unwrap();
        assert_eq!((spec.beta, spec.gamma, spec.depth_cap), (0.4, 0.1, 8));
        assert_eq!(spec.delta_star, 0.8);
        assert_eq!(PriorSpec::from_config_str(&spec.to_config_string()).unwrap(), spec);
        assert!(matches!(
            PriorSpec::from_config_str("beta=0.3\nalpha=1"),
            Err(DmmtError::Config { line: 2, .. })
        ));
        assert!(matches!(
            PriorSpec::from_config_str("beta=1.5"),
            Err(DmmtError::InvalidPrior { name: "beta", .. })
        ));
        assert!(PriorSpec::from_config_str("rho0_d=0.5").is_err());
        assert!(PriorSpec::from_config_str("depth_cap=0").is_err());
    }

    proptest! {
        #[test]
        fn rows_are_stochastic(beta in 0.01f64..0.99, gamma in 0.01f64..0.99, level in 0usize..20) {
            let spec = PriorSpec { beta, gamma, ..PriorSpec::default() };
            let m = spec.transition_matrix(level);
            for row in m.0 {
                prop_assert!(row.iter().all(|&x| (0.0..=1.0).contains(&x)));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            prop_assert_eq!(m.row(State::Stop), [0.0, 0.0, 1.0]);
            prop_assert_eq!(m, spec.transition_matrix(level));
        }

        #[test]
        fn beta_function_symmetric(a in 1e-3f64..1e6, b in 1e-3f64..1e6) {
            let x = log_beta_function(a, b).unwrap();
            let y = log_beta_function(b, a).unwrap();
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
