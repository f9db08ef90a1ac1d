//! Reaction-network analysis: mass-action dynamics, stochastic simulation,
//! Hamilton–Jacobi landscapes, decompositions and least-action transitions.

pub mod decomp;
pub mod diffusion;
pub mod fixtures;
pub mod hamjac;
pub mod kinetics;
pub mod landscape;
pub mod mesoscale;
pub mod netparse;
pub mod numerics;
pub mod path;
pub mod transition;

use thiserror::Error;

/// Any failure raised by the analysis modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] netparse::ParseError),
    #[error(transparent)]
    Kinetics(#[from] kinetics::KineticsError),
    #[error(transparent)]
    Meso(#[from] mesoscale::MesoError),
    #[error(transparent)]
    HamJac(#[from] hamjac::HamJacError),
    #[error(transparent)]
    Landscape(#[from] landscape::LandscapeError),
    #[error(transparent)]
    Decomp(#[from] decomp::DecompError),
    #[error(transparent)]
    Transition(#[from] transition::TransitionError),
    #[error(transparent)]
    Diffusion(#[from] diffusion::DiffusionError),
    #[error(transparent)]
    Path(#[from] path::PathError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
