//! Fiber-averaged symmetric functions of the second fundamental form.
//!
//! For a submanifold `Mⁿ` of codimension `q` with shape operators
//! `A_1, …, A_q`, the multi-index family `σ_u` is defined by
//! `det(I + Σ t_α A_α) = Σ_u σ_u t^u`. This crate computes `σ_u` and the
//! Newton operators `T_u`, averages them over the orthonormal normal frames,
//! and checks the resulting minimality conditions on explicit immersions.

pub mod convergence;
pub mod error;
pub mod gallery;
pub mod haar;
pub mod minimality;
pub mod multiindex;
pub mod newton;
pub mod submanifold;

pub use convergence::ConvergenceReport;
pub use error::{Error, Result};
pub use haar::{
    averaged_sections, haar_sample, rotate_system, sigma_hat, AveragedSections, FiberAverage,
    FiberScheme, FiberVectorAverage, FrameRotation, FrameSet, Group, SchemeKind,
};
pub use multiindex::MultiIndex;
pub use newton::{newton_table, NewtonTable, OperatorSystem};
