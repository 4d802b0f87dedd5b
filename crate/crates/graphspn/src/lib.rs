//! Sum-product networks over categorical variables, instantiated on arbitrary
//! graphs.
//!
//! The crate is organised bottom-up:
//!
//! - [`spn`]: SPN representation, validity checks, and exact log-space
//!   inference (likelihood, marginals, MPE).
//! - [`learn`]: random dense structure generation, hard-EM parameter
//!   learning, and weight pruning.
//! - [`data`]: topological semantic maps (places, placeholders, navigability
//!   edges), synthetic floor generation, and the evidence-noise simulator.
//! - [`templates`]: sub-graph templates and decomposition of a graph into
//!   disjoint template-isomorphic components.
//! - [`model`]: template SPNs trained per sub-graph template and the
//!   per-graph mixture over decompositions, with shared template weights.
//! - [`mrf`]: a Markov random field baseline with co-occurrence potentials,
//!   loopy belief propagation, and a brute-force exact oracle.

pub mod data;
pub mod learn;
pub mod model;
pub mod mrf;
pub mod seed;
pub mod spn;
pub mod templates;

#[cfg(feature = "oracle")]
pub mod oracle;
