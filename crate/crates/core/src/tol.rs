//! Numerical tolerances used across the crate. Tests pin against these
//! constants, so changing one is a contract change.

/// Eigenpair residual budget: ||H v - w v||_inf <= this * ||H||_inf.
pub const EIGEN_RESIDUAL_REL: f64 = 1e-10;

/// Pairwise deviation from orthonormality allowed in an eigenbasis.
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

/// Default half-width of the zero-mode window, relative to ||H||_inf.
pub const ZERO_MODE_TOL_REL: f64 = 1e-8;

/// The spectral gap must exceed this multiple of the zero-mode tolerance,
/// otherwise the zero-energy band is not cleanly separated.
pub const GAP_COLLAPSE_FACTOR: f64 = 10.0;

/// Maximum amplitude a zero-energy-band state may carry on a minority site.
pub const MINORITY_AMPLITUDE_TOL: f64 = 1e-8;

/// Residual budget for closed-form compact states: ||H psi||_inf bound.
pub const CLS_RESIDUAL_TOL: f64 = 1e-12;

/// Allowed change of basis-independent quantities under a remixing of the
/// zero-energy eigenbasis.
pub const GAUGE_TOL: f64 = 1e-10;

/// Allowed drift of the total excitation norm along an exact evolution.
pub const UNITARITY_TOL: f64 = 1e-10;

/// Norm window for states fed to population-based observables.
pub const STATE_NORM_TOL: f64 = 1e-8;

/// Warn once the coupling-to-gap ratio g/gap exceeds this.
pub const WEAK_COUPLING_WARN_RATIO: f64 = 1e-2;

/// First-order perturbation theory error budget, in units of g/gap.
pub const PERTURBATION_FACTOR: f64 = 10.0;

/// Couplings below this fraction of g are treated as numerically zero.
pub const COUPLING_FLOOR_REL: f64 = 1e-12;
