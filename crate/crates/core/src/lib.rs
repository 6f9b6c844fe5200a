//! Electrostatic patch potentials between a sphere and a plane.
//!
//! Computes the applied voltage that minimizes the electrostatic energy (or
//! force) between a spherically curved plate and a flat plate carrying
//! random surface-potential patches, under the proximity force
//! approximation, and analyses its `a + b ln d` dependence on the gap.
//!
//! ```
//! use patchvm::{Geometry, QuadratureSpec, generate_single_patch, sweep, log_grid};
//!
//! let geom = Geometry::new(0.15, 0.015).unwrap();
//! let map = generate_single_patch(&geom, 1e-3, 0.1).unwrap();
//! let curve = sweep(&map, &log_grid(1e-7, 1e-3, 8).unwrap(), &QuadratureSpec::default()).unwrap();
//! assert!(curve.entries[0].vm_energy > curve.entries.last().unwrap().vm_energy);
//! ```

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod electrostatics;
mod error;
pub mod formats;
pub mod geometry;
pub mod patches;
pub mod seed;

pub use analysis::{
    classify_regime, default_window, ensemble_vm, fit_external, fit_log, fit_points, log_grid,
    predict_intermediate, sweep, CurveEntry, DistanceStats, EnsembleStats, ExternalFit, LogFit, Regime,
    RegimePrediction, Summary, Variant, VmCurve,
};
pub use electrostatics::{
    compute_q, evaluate, force, free_energy, vm_analytic, vm_energy, vm_force, vm_scan, PolarField,
    QuadratureSpec, VmResult, EPSILON_0,
};
pub use error::{Error, Result};
pub use geometry::{Geometry, KernelNorms, Validity};
pub use patches::{
    area_average, generate_homogeneous, generate_single_patch, generate_single_patch_at, radial_profile,
    ring_average, ring_rms_ensemble, AngularRule, Disk, GridSpec, HomogeneousParams, PatchMap, RadialProfile,
    RingRmsTable,
};
