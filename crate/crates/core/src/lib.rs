//! Tabular solver for robust constrained average-cost MDPs.
//!
//! * [`mdp`]: instances, policies, exact evaluation under one kernel.
//! * [`uncertainty`]: contamination, total-variation and Wasserstein sets
//!   with exact support functions.
//! * [`sampling`]: generative model and support-function estimators,
//!   including the truncated MLMC estimator.
//! * [`critic`]: robust average-cost TD.
//! * [`actor`]: the primal-only policy optimizer.
//! * [`oracle`]: brute-force ground truth.
//! * [`instance`]: seeded instance generators.

pub mod actor;
pub mod critic;
pub mod error;
pub mod instance;
pub mod lp;
pub mod mdp;
pub mod oracle;
pub mod sampling;
pub mod uncertainty;

pub use actor::{ActorConfig, BestIterateMode, LambdaRule, QTable, RunTrace, StepSize, TraceRecord};
pub use critic::{CriticConfig, RobustEval, SigmaMode, StepSchedule};
pub use error::{RcmdpError, Result};
pub use mdp::{FixedKernel, IndexedSignal, PolicyTable, TabularRcmdp, ANCHOR_STATE};
pub use oracle::{ExactF, GridOptimum, OracleEval};
pub use sampling::{GenerativeModel, MlmcConfig, PRNG_FAMILY};
pub use uncertainty::{SupportResult, UncertaintyModel};
