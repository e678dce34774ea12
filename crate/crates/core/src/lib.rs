//! Differentiable rigid-body simulation and trajectory-based mass
//! identification.
//!
//! * [`geom`]: vectors, quaternions, mass properties, OBJ meshes.
//! * [`dynamics`]: penalty-contact rigid-body rollouts (semi-implicit or
//!   explicit Euler).
//! * [`pbd`]: a position-based dynamics particle integrator.
//! * [`adjoint`]: reverse-mode gradients of the trajectory loss with
//!   respect to mass, plus the closed-form push-down model.
//! * [`identify`]: scenarios, synthetic observations, alignment and the
//!   gradient-descent identification loop.

pub mod adjoint;
pub mod dynamics;
pub mod geom;
pub mod identify;
pub mod pbd;
pub mod scalar;

pub use scalar::Scalar;
