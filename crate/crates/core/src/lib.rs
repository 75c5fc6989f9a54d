//! Divide-merge Markov tree (DMMT) two-sample comparison.
//!
//! A DMMT is a prior on a pair of distributions built from a Markov chain of
//! `divide` / `merge` / `stop` states over a randomized dyadic partition of the
//! unit hypercube. The posterior is again a DMMT and every quantity of interest
//! (the marginal likelihood, the posterior probability that the two samples
//! share a distribution, and a representative tree of differential regions)
//! is computed exactly by recursions over the occupied regions.
//!
//! ```
//! use dmmt::{fit, prob_null, Dataset, PriorSpec};
//!
//! let data = Dataset::new(1, vec![0.1, 0.2, 0.3], vec![0.7, 0.8, 0.9]).unwrap();
//! let model = fit(&data, &PriorSpec::default()).unwrap();
//! let p = prob_null(&model);
//! assert!((0.0..=1.0).contains(&p));
//! ```

pub mod engine;
pub mod error;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod partition;
pub mod simulate;

pub use engine::{fit, NodeEvaluation, PosteriorModel};
pub use error::{DmmtError, Result};
pub use inference::{
    effect_size, lambda_star, prob_null, psi, representative_tree, rho_star, sample_state_tree,
    NullSummary, RepTree, RepTreeNode, SampledStateTree,
};
pub use model::{PriorSpec, State, TransitionMatrix};
pub use partition::{rescale, Dataset, Interval, RegionKey, Rescaling};
pub use simulate::{roc_auc, ReplicateResult, Scenario, ScenarioId};
