//! Finite volume element solver toolkit for second-order elliptic problems
//! with subdomain-wise discontinuous coefficients.
//!
//! The discretization places unknowns at edge midpoints (Crouzeix-Raviart
//! elements) and tests against characteristic functions of a dual mesh of
//! control volumes, which yields a nonsymmetric Petrov-Galerkin system that
//! coincides with the Galerkin stiffness matrix whenever the coefficient is
//! constant on each triangle. The solver layer builds an edge-based additive
//! Schwarz preconditioner (coarse space spanned by interface functions plus
//! local subspaces per interface and per subdomain interior) and runs GMRES
//! in the energy inner product of the symmetric Galerkin matrix.

pub mod assembly;
pub mod coefficient;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod schwarz;

pub use assembly::AssembledSystem;
pub use coefficient::{make_test_coefficient, preset, BaseField, CoefficientField, Preset};
pub use error::{Error, Result};
pub use linalg::{
    estimate_convergence_bounds, factorize, gmres, Csr, EnergyInner, EuclideanInner, FactorKind,
    Factorization, InnerProduct, KrylovTrace,
};
pub use mesh::{
    build_control_volumes, build_partition, build_structured_mesh, enumerate_cr_dofs,
    ControlVolume, DiagonalOrientation, DofClass, DofMap, DualMesh, Edge, Interface, Partition,
    Point, TriMesh,
};
pub use schwarz::{EdgeBasis, SchwarzPreconditioner, Variant};
pub use driver::{
    build_problem, emit_residual_plot_data, random_initial_guess, run, run_table,
    run_with_solution, verify, CheckOutcome, ExperimentConfig, PhaseSeconds, Problem, Report,
    SweepSpec, VerifyReport, CHECK_NAMES, TABLE_HEADER,
};
