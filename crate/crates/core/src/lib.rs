//! planrl-core: verifiable rewards for skill-grammar plans.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! 1. **[`grammar`]** — skill templates, response/plan parsing, prompt rendering.
//! 2. **[`reward`]** — format score, step similarity, maximum-weight bipartite
//!    match score, length penalty, completion reward, weighted totals.
//! 3. **[`grpo`]** — group-standardized advantages, the clipped surrogate
//!    objective with a KL-to-reference penalty, and a small analytic-gradient
//!    plan policy trained end to end under the reward.
//! 4. **[`datagen`]** — compositional task synthesis and triplet assembly with
//!    line-delimited dataset I/O and a deterministic 9:1 split.
//! 5. **[`executor`]** — a deterministic simulator of the hierarchical
//!    plan / execute / monitor / replan loop against pluggable ports.
//! 6. **[`selfcheck`]** — brute-force and finite-difference oracle suites used
//!    by the `selfcheck` CLI command and the acceptance tests.
//!
//! Everything is deterministic: identical inputs, seeds, and configuration
//! produce bit-identical outputs.

pub mod datagen;
pub mod executor;
pub mod grammar;
pub mod grpo;
pub mod numfmt;
pub mod reward;
pub mod rng;
pub mod selfcheck;

pub use grammar::{Ontology, Plan, PlanStep, SkillGrammar};
pub use reward::{RewardBreakdown, RewardWeights};
pub use rng::Rng;
