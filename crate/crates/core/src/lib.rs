//! Rewritable Place/Transition nets with inhibitor arcs.
//!
//! A [`SystemState`](net::SystemState) pairs a net (transition -> input,
//! output and inhibitor bags) with a marking. States evolve by firing and by
//! guarded [`RewriteRule`](rewrite::RewriteRule)s that may change the net
//! itself; [`statespace`] explores the resulting transition system and
//! [`structural`] computes semiflows per net configuration. The [`fms`]
//! module ships the fault-tolerant manufacturing system benchmark.

pub mod bag;
pub mod firing;
pub mod fms;
pub mod format;
pub mod net;
pub mod rewrite;
pub mod statespace;
pub mod structural;

pub use bag::{Bag, BagError, Multiplicity};
pub use firing::{fire, firing_successors, FireError};
pub use format::{emit_net, parse_net, NetDocument, ParseError};
pub use net::{p, t, ArcTriple, Net, PlaceBag, PlaceId, StateKey, SystemState, TranId};
pub use rewrite::{apply_rule, wrap_valid, Binding, RewriteError, RewriteRule, UndefinedPolicy};
pub use statespace::{explore, EdgeLabel, ExploreOptions, Limits, SearchMode, SearchResult};
