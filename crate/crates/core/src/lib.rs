//! Numerics for Cartan connections induced on lightlike hypersurfaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`mink`]: Lorentz–Minkowski space, its null (S-)basis and the future light cone.
//! - [`lie`]: the Möbius group as O⁺(m+1,1), its graded Lie algebra and adjoint actions.
//! - [`metric`], [`fd`], [`sphere`]: metric evaluators, finite differences, stereographic charts.
//! - [`lightlike`]: lightlike metrics in normal form (Z = ∂_s).
//! - [`lorentz`]: Christoffel symbols, curvature, null frames and the Levi-Civita connection form.
//! - [`cartan`]: admissible frames, the pulled-back connection and everything extracted from it.
//! - [`ambient`]: ambient metrics built from a family g_s, with closed-form connection and curvature.
//! - [`scenarios`]: the registry of verification scenarios and report serialisation.

pub mod ambient;
pub mod cartan;
pub mod error;
pub mod fd;
pub mod lie;
pub mod lightlike;
pub mod lorentz;
pub mod metric;
pub mod mink;
pub mod rng;
pub mod scenarios;
pub mod sphere;

pub use error::{Error, Result};
