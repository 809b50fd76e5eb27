//! Numerical verification of a bi-Hamiltonian hierarchy on `U(n) x Herm(n)`
//! and its reductions to spin Ruijsenaars-Schneider and spin Sutherland
//! variables.
//!
//! Modules, bottom up:
//! * [`algebra`]: matrix spaces, the pairing `Im tr(XY)`, splittings, the
//!   trigonometric R-operator and dual bases.
//! * [`phase`]: points of the four charts, observables and their gradients.
//! * [`coords`]: the Ruijsenaars and Sutherland changes of variables.
//! * [`brackets`]: bracket evaluators and the Jacobi defect.
//! * [`dynamics`]: Hamiltonians, exact flows, reduction and trajectories.
//! * [`harness`]: the check registry, JSON report and CSV export.

// `!(x > floor)` is the idiom used to reject NaN along with small values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod brackets;
pub mod config;
pub mod coords;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod phase;

pub use algebra::{
    BorelUpper, CMat, GlElement, HermitianMat, Subspace, TorusReg, UnipotentUpper, UnitaryMat,
};
pub use brackets::{Bracket, BracketValue, JacobiDefect};
pub use config::Config;
pub use dynamics::Trajectory;
pub use error::{Error, Result};
pub use phase::{
    Chart, ChartPoint, FullPoint, InvariantObservable, Observable, Part, RedPoint, RsPoint, Sample,
    SuthPoint,
};
