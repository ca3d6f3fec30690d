//! Multi-layered field representation of many-particle quantum states on a
//! periodic 3D lattice.
//!
//! Separable states are [`layers::Layer`]s: gauge classes of one-particle
//! field tuples kept in a canonical form. General states are
//! [`multilayer::MultiLayerState`]s, sparse sums of basis layers, related to
//! the dense tensor-product picture in [`oracle`] by [`multilayer::rho`] and
//! [`multilayer::rho_inv`].

pub mod cli;
pub mod epr;
pub mod error;
pub mod fock_kg;
pub mod lattice;
pub mod layers;
pub mod locality;
pub mod multilayer;
pub mod onebody;
pub mod operators;
pub mod oracle;
pub mod random;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
pub use lattice::{Lattice3D, Region, SiteIndex};
pub use fock_kg::{CcrReport, Ladder, ModeSpec, TruncatedFock};
pub use layers::{gauge_act, GaugeElement, Layer, Tolerance};
pub use locality::{glue, restrict, Restriction};
pub use multilayer::{rho, rho_inv, FockState, MultiIndex, MultiLayerState, Sector, Symmetry};
pub use onebody::{OneBodyMatrix, OneParticleField, ParticleSpec, Statistics};
pub use operators::{evolve, measure_project, HamiltonianSpec, OperatorRep, PairCount, PairPotential, Scheme};
pub use oracle::DenseTensorState;
