pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod mfg;
pub mod mftc;
pub mod operators;
pub mod pde;
pub mod problem;

pub use error::{Error, Result};
pub use grid::{Boundary, Grid, SpaceTimeField, TimeGrid};
pub use diagnostics::{energy_identity_residual, energy_terms, uniqueness_gap, EnergyTerms};
pub use hamiltonian::{Congestion, Family, HamiltonianSpec, HypothesisReport};
pub use problem::{Coupling, InitialDensity, ProblemData};
pub use mftc::{compare_mfg_mftc, mftc_solve, objective_j, Comparison, ControlPair};
pub use pde::{Scheme, SolverConfig, System};
pub use mfg::{picard_solve, newton_oracle_solve, pde_residuals, ConvergenceReport, MFGSolution, NewtonOptions, PicardOptions};
