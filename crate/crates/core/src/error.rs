use thiserror::Error;

/// Unified error type for lattice construction, diagonalization, and the
/// emitter pipeline.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Periodic diamond chains need an odd cell count; with an even count the
    /// dispersive bands touch zero and the zero-energy level is no longer
    /// spanned by majority-sublattice states alone.
    #[error("periodic diamond chain requires an odd number of cells, got {0}")]
    EvenDiamond(usize),

    /// Geometry or emitter parameters outside their domain.
    #[error("invalid parameter: {0}")]
    BadParams(String),

    /// Disorder width outside the supported range [0, 4].
    #[error("disorder width {0} outside supported range [0, 4]")]
    WidthTooLarge(f64),

    /// The QL iteration failed to drive an off-diagonal element to zero.
    #[error("eigensolver failed to converge for order-{order} matrix (residual {residual:.3e})")]
    NoConvergence { order: usize, residual: f64 },

    /// No eigenvalue within tolerance of zero; the configuration carries no
    /// zero-energy band (e.g. chiral symmetry was broken by onsite terms).
    #[error("no eigenvalue within {tol:.3e} of zero")]
    EmptyBand { tol: f64 },

    /// The spectral gap between the zero-energy band and the rest of the
    /// spectrum is not cleanly resolved at the requested tolerance.
    #[error("gap {gap:.3e} too close to zero-mode tolerance {tol:.3e}; band not separated")]
    GapCollapse { gap: f64, tol: f64 },

    /// Closed-form compact states are only available for disordered couplings
    /// in the double-comb geometry.
    #[error("no closed-form compact state for disordered {0} lattice")]
    UnsupportedDisorder(&'static str),

    /// Emitter attachment site does not exist in the lattice.
    #[error("site {site} not present in a {cells}-cell lattice")]
    BadSite { site: String, cells: usize },

    /// The attachment site carries no zero-energy-band weight, so there is no
    /// vacuum Rabi coupling to lift.
    #[error("attachment site has no zero-energy-band weight; no mode is lifted")]
    ZeroWeight,

    /// Perturbative treatment requires the emitter coupling to sit below the
    /// spectral gap.
    #[error("coupling g = {g:.3e} is not below the spectral gap {gap:.3e}")]
    WeakCouplingViolated { g: f64, gap: f64 },

    /// A requested observable needs the trace to contain the half-period
    /// sample t = tau.
    #[error("trace does not sample t = tau = {tau:.6e}")]
    MissingTau { tau: f64 },

    /// State vector norm too far from one for population-based observables.
    #[error("state norm {norm} deviates from 1 beyond tolerance")]
    NotNormalized { norm: f64 },

    /// Every disorder realization of an ensemble point failed.
    #[error("all {attempted} realizations failed for grid point {param}")]
    AllRealizationsFailed { param: f64, attempted: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
