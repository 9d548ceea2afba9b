//! Temporal knowledge-graph predicate prediction with a reasoning agent.
//!
//! Given a query `(subject, ?, object, time)` over a temporal knowledge
//! graph, a deep-Q agent expands a *topology* (core + periphery subgraph)
//! around both query entities simultaneously, choosing one relation type
//! per step under a temporal k-nearest-neighbor cap, until the two
//! topologies overlap in an entity. Successful action sequences become
//! binary connectivity features for a linear predicate classifier.
//!
//! Module map:
//! - [`store`]: quadruple store, loaders, adjacency index, temporal-kNN
//! - [`env`]: the core/periphery expansion MDP with relation-type actions
//! - [`neural`]: embeddings, MLPs, max-pool fingerprints, RMSprop, backprop
//! - [`dqn`]: masked Q-network, replay memory, target net, training loop
//! - [`reasoner`]: sequence bank, binary features, predicate classifier
//! - [`eval`]: filtered MRR / Hits@k, diagnostics, tknn sweeps
//! - [`synth`]: seeded planted-rule dataset generator
//! - [`export`]: episode traces (JSON) and topology graphs (DOT)

pub mod checkpoint;
pub mod config;
pub mod dqn;
pub mod env;
pub mod eval;
pub mod export;
pub mod neural;
pub mod reasoner;
pub mod store;
pub mod synth;

mod error;

pub use error::{Error, Result};
