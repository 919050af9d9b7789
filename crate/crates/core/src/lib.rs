//! Driven Jaynes–Cummings cavity–molecule simulator.

pub mod dissipators;
pub mod error;
pub mod io;
pub mod la;
pub mod levels;
pub mod liouvillian;
pub mod model;
pub mod observables;
pub mod space;
pub mod sweeps;

pub use dissipators::{decompose_channels, diagonalize_h, ChannelKind, ChannelSet, EigenSystem, JumpChannel};
pub use error::{Error, Result};
pub use liouvillian::{assemble_liouvillian, propagate, steady_state, SteadyState, SteadyStateMethod, Superoperator};
pub use model::{ElasticRatePolicy, JcLevel, LevelLabel, SystemParams};
pub use space::{build_operators, build_space, expectation, DensityMatrix, Molecule, Operator, OperatorSet, SpaceConfig};

/// Runs the dense kernels single-threaded. Sweeps parallelize across points
/// instead, which also keeps results independent of the worker count.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}
