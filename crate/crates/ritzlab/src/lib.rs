//! A 2D finite element laboratory for Ritz projections of Poisson-type
//! problems on convex polygons.
//!
//! The crate computes Ritz projections over quasi-uniform triangulations and
//! measures the weighted `W^{1,1}` stability ratio
//! `‖∇R_h u‖_{L¹_w} / ‖∇u‖_{L¹_w}` for Muckenhoupt `A₁` weights, together
//! with the computable ingredients behind that bound: the Hardy–Littlewood
//! maximal operator, mollifier convolution bounds, smooth delta kernels with
//! polynomial moment reproduction, regularized Green's functions and the
//! mollifier-normalized Green's error supremum `𝒢_h`.
//!
//! Modules mirror the pipeline:
//! - [`mesh`]: conforming quasi-uniform triangulations of convex polygons,
//!   red refinement, point location, plain-text I/O.
//! - [`fespace`]: Lagrange spaces of degree 1 and 2, reference bases,
//!   quadrature rules, interpolation and point evaluation.
//! - [`assembly`]: stiffness and right-hand-side assembly, Dirichlet
//!   elimination, preconditioned conjugate gradients.
//! - [`weights`]: weight functions, the maximal operator, `A₁` constant
//!   estimation, mollifiers and convolution bounds.
//! - [`ritz`]: the Ritz projection and weighted gradient norms with
//!   singularity-graded quadrature.
//! - [`greens`]: delta kernels, discrete/reference Green's functions, the
//!   `𝒢_h` estimate and the gradient representation identity.
//! - [`harness`]: config-driven experiment studies with CSV/JSON reports,
//!   shared by the `ritzlab` CLI.

pub mod assembly;
pub mod fespace;
pub mod geometry;
pub mod greens;
pub mod harness;
pub mod mesh;
pub mod numeric;
pub mod ritz;
pub mod sampling;
pub mod weights;

pub use geometry::Point2;
