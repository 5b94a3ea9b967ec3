//! Quasi-1D tight-binding lattices with a zero-energy flat band, coupled to
//! a single two-level emitter in the one-excitation sector.
//!
//! Three geometries (double-comb, diamond, stub) share a three-site cell
//! with two majority sites per minority site, which pins at least N zero
//! modes regardless of hopping disorder. The crate builds the lattices,
//! diagonalizes them with a dense symmetric eigensolver, isolates the
//! zero-energy band, evolves an initially excited emitter exactly, reduces
//! the dynamics to the single lifted mode it Rabi-oscillates with, and runs
//! deterministic disorder ensembles for localization statistics.
//!
//! Everything is seeded and bit-exact: a fixed master seed reproduces every
//! coupling, eigenvector, trace sample, and ensemble mean regardless of
//! worker thread count.

pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod matrix;
pub mod observables;
pub mod spectral;
pub mod tol;

pub use dynamics::{
    default_time_grid, effective_model, evolve, evolve_spectrum, first_emitter_zero,
    full_hamiltonian, lifted_mode_fidelity, write_trace_csv, EffectiveModel, EmitterConfig,
    WavefunctionTrace, DEFAULT_COUPLING, DEFAULT_TRACE_SAMPLES,
};
pub use error::{Error, Result};
pub use lattice::{
    apply_disorder, build_lattice, build_lattice_with, field_hamiltonian, write_edge_list,
    Boundary, DisorderSpec, Edge, Geometry, Lattice, SiteId, SiteLabel, MAX_DISORDER_WIDTH,
};
pub use matrix::SymmetricMatrix;
pub use observables::{
    majority_profile, participation_ratio, participation_ratio_complex, population_profile,
    run_ensemble, write_profile_csv, write_xi_csv, EnsembleResult, EnsembleSpec, GridPoint,
    PointResult,
};
pub use spectral::{
    analytic_cls, cls_overlap, eigendecompose, flat_band_basis, write_spectrum, FlatBandBasis,
    Spectrum,
};
