//! Doubly periodic minimal surfaces of genus 2n−1 obtained by opening the nodes
//! of a chain of 2n Riemann spheres, each sphere carrying Scherk data.
//!
//! The pipeline runs bottom-up: [`surface_model`] fixes the noded surface and its
//! neck parameters, [`forms`] and [`differentials`] build meromorphic 1-forms
//! with prescribed periods, [`weierstrass`] assembles the triple (φ₁, φ₂, φ₃),
//! [`residuals`] evaluates the period, conformality and embeddedness equations,
//! [`continuation`] solves them along x, and [`geometry`] integrates and meshes
//! the resulting surface.

pub mod continuation;
pub mod differentials;
pub mod error;
pub mod exec;
pub mod forms;
pub mod geometry;
pub mod residuals;
pub mod surface_model;
pub mod tolerances;
pub mod weierstrass;

pub use error::{Error, Result};
pub use exec::Execution;
pub use forms::C;
