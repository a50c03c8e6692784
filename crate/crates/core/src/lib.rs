//! Finite-time computation of polyhedral input-saturated output-admissible
//! sets (ISOAS) for single-input discrete-time LTI systems driven by a
//! saturated prestabilizing controller.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: H-representation polyhedra, a dense LP solver and
//!   row-wise redundancy elimination.
//! * [`model`]: plant, saturated loop, equilibrium manifold, reference set
//!   and the three saturation regions.
//! * [`propagation`]: constraint propagation inside the non-saturated and
//!   saturated regions, empty-set prevention and the control authority row.
//! * [`isoas`]: the constraint-sharing outer loop with erosion prevention,
//!   plus the classical maximal output admissible set for comparison.
//! * [`oracle`]: saturated simulation, brute-force membership in the maximal
//!   set, Monte Carlo certification and an LQR gain helper.
//! * [`io`] and [`cli`]: problem files, exports and the command-line driver.

pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod isoas;
pub mod model;
pub mod oracle;
pub mod propagation;

pub use error::{Error, Result};
pub use geometry::{ConstraintBundle, LpResult, LpStatus, Polyhedron, Tolerances};
pub use isoas::{compute_isoas, compute_moas, IsoasConfig, IsoasResult, MoasResult};
pub use model::{OutputConstraints, Plant, RegionTriple, SaturatedLoop};
