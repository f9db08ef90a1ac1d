//! Reaction-network DSL and structural network invariants.

mod network;
mod parser;
mod structure;

pub use network::{Chemostat, Parameter, ReactionDecl, ReactionNetwork};
pub use parser::{parse_network, ParseError, ParseErrorKind};
pub use structure::{
    canonical_orientation, grouped_vectors, positive_conservation, rational_kernel, structure, GroupMember,
    NetworkStructure, Rational, ReactionGroup,
};
