//! Sublabel-accurate functional lifting with classical and lifted Bregman
//! iterations.

pub mod bregman;
pub mod dataterm;
pub mod error;
pub mod field;
pub mod imageio;
pub mod labels;
mod linalg;
pub mod oracle;
pub mod problems;
pub mod regularizer;
pub mod solver;

pub use dataterm::{ActiveSet, CostSampler, LiftedDataTerm, ProxWorkspace};
pub use error::{Error, Result};
pub use field::{DualField, Field, PixelGrid};
pub use labels::{LabelSpace, SublabelCoord};
pub use regularizer::{ConstraintSet, TvKind};
pub use bregman::{BregmanProblem, BregmanState, Mode};
pub use solver::{SaddleSolution, SolverConfig};
