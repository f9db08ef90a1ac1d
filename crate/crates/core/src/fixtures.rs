//! Named networks shipped with the repository.

use crate::netparse::{parse_network, ReactionNetwork};

pub const S1: &str = include_str!("../../../fixtures/s1.crn");
pub const S0: &str = include_str!("../../../fixtures/s0.crn");
pub const BD: &str = include_str!("../../../fixtures/bd.crn");
pub const ISO: &str = include_str!("../../../fixtures/iso.crn");
pub const PDP: &str = include_str!("../../../fixtures/pdp.crn");

pub const ALL: [&str; 5] = ["s1", "s0", "bd", "iso", "pdp"];

pub fn source(name: &str) -> Option<&'static str> {
    match name {
        "s1" => Some(S1),
        "s0" => Some(S0),
        "bd" => Some(BD),
        "iso" => Some(ISO),
        "pdp" => Some(PDP),
        _ => None,
    }
}

/// Parse a shipped fixture; panics on an unknown name.
pub fn load(name: &str) -> ReactionNetwork {
    let src = source(name).unwrap_or_else(|| panic!("unknown fixture {name}"));
    parse_network(src).expect("shipped fixtures parse")
}
