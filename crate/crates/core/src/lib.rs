//! Template-based reconstruction of multi-organ surface meshes from a single
//! simulated radiograph.
//!
//! The crate covers the whole loop: procedural lung templates and phantoms,
//! synthetic sample generation (mesh deformation, voxel deformation fields,
//! volume warping, Siddon projection, detector noise), trivariate Bernstein
//! free-form deformation, the reconstruction objective and its gradients, a
//! direct geometric fitter, a small image encoder, and the evaluation metrics.
//!
//! Interchangeable algorithm families (ray geometries, evaluation metrics and
//! reconstruction strategies) sit behind traits and are looked up by name
//! through [`registry::Registry`].

pub mod datagen;
pub mod encoder;
pub mod error;
pub mod ffd;
pub mod fit;
pub mod geom;
pub mod losses;
pub mod mesh;
pub mod metrics;
pub mod projection;
pub mod reconstruct;
pub mod registry;
pub mod spatial;
pub mod volume;

pub use error::{Error, Result};
pub use geom::{Aabb, Vec3};
pub use mesh::{ManifoldReport, Mesh, PointSet};
