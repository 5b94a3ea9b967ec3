//! Localization observables and disorder-ensemble statistics.
//!
//! The central quantity is the participation ratio of the lifted mode,
//! xi = (sum_x |psi_x|^4)^-1, which interpolates between 1 (single site)
//! and S (uniform spread). Ensembles sweep a parameter grid, average xi and
//! the site-population profile per realization, and stay bit-exact for a
//! fixed master seed no matter how many worker threads run the realizations.

use crate::dynamics::{effective_model, EmitterConfig};
use crate::error::{Error, Result};
use crate::lattice::{
    apply_disorder, build_lattice, field_hamiltonian, DisorderSpec, Geometry, Lattice, SiteId,
    SiteLabel,
};
use crate::spectral::{eigendecompose, flat_band_basis};
use crate::tol;
use num_complex::Complex64;
use rayon::prelude::*;
use std::io::{self, Write};

/// Inverse fourth-moment localization measure of a unit-norm state.
pub fn participation_ratio(state: &[f64]) -> Result<f64> {
    let norm_sq: f64 = state.iter().map(|a| a * a).sum();
    check_norm(norm_sq)?;
    let fourth: f64 = state.iter().map(|a| a * a * a * a).sum();
    Ok(1.0 / fourth)
}

/// `participation_ratio` for complex amplitudes, e.g. evolved wavefunctions.
pub fn participation_ratio_complex(state: &[Complex64]) -> Result<f64> {
    let norm_sq: f64 = state.iter().map(|a| a.norm_sqr()).sum();
    check_norm(norm_sq)?;
    let fourth: f64 = state.iter().map(|a| a.norm_sqr() * a.norm_sqr()).sum();
    Ok(1.0 / fourth)
}

fn check_norm(norm_sq: f64) -> Result<()> {
    let norm = norm_sq.sqrt();
    if (norm - 1.0).abs() > tol::STATE_NORM_TOL {
        return Err(Error::NotNormalized { norm });
    }
    Ok(())
}

/// Per-site populations |amplitude|^2 in cell-major site order.
pub fn population_profile(state: &[f64]) -> Vec<f64> {
    state.iter().map(|a| a * a).collect()
}

/// Restricts a per-site profile to majority sites, keeping site order.
pub fn majority_profile(profile: &[f64], lattice: &Lattice) -> Vec<f64> {
    profile
        .iter()
        .enumerate()
        .filter(|(site, _)| lattice.is_majority(*site))
        .map(|(_, p)| *p)
        .collect()
}

/// One sweep coordinate: a geometry, a disorder width, and an attachment
/// site. `param` is whatever the sweep varies (W, or eta for stub sweeps)
/// and is echoed verbatim into the output tables.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub param: f64,
    pub geometry: Geometry,
    pub width: f64,
    pub x0: SiteId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    /// Realizations per grid point; realization i uses RNG stream i.
    pub realizations: usize,
    pub master_seed: u64,
    pub g: f64,
    pub onsite_width: f64,
    pub points: Vec<GridPoint>,
    /// Zero-mode selection tolerance override; None uses the spectral
    /// default.
    pub zero_tol: Option<f64>,
}

impl EnsembleSpec {
    pub fn new(realizations: usize, master_seed: u64, points: Vec<GridPoint>) -> Self {
        EnsembleSpec {
            realizations,
            master_seed,
            g: crate::dynamics::DEFAULT_COUPLING,
            onsite_width: 0.0,
            points,
            zero_tol: None,
        }
    }
}

/// Aggregated statistics for one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub param: f64,
    pub x0: SiteId,
    pub mean_xi: f64,
    /// Sample standard deviation of xi over included realizations divided
    /// by sqrt(included); 0 when fewer than two realizations survive.
    pub stderr_xi: f64,
    /// Mean per-site population of the lifted mode, cell-major order.
    pub mean_profile: Vec<f64>,
    pub included: usize,
    pub excluded: usize,
    /// Least-squares slope of ln(mean profile) against periodic cell
    /// distance from x0, majority sites only, skipping the two nearest
    /// cells. Diagnostic, not contract-bearing.
    pub loc_slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub points: Vec<PointResult>,
    pub realizations: usize,
    pub master_seed: u64,
}

/// Runs every grid point of the sweep. Realizations are distributed over
/// the current rayon pool; results are reduced in realization-index order,
/// so the output is identical for any worker count. Realizations whose
/// zero band cannot be isolated (gap collapse) or whose coupling is not
/// perturbative against the realized gap are excluded and counted rather
/// than retried, keeping the seed-to-result map pure.
pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleResult> {
    if spec.realizations == 0 {
        return Err(Error::BadParams("ensemble needs at least one realization".into()));
    }
    if spec.points.is_empty() {
        return Err(Error::BadParams("ensemble needs a non-empty grid".into()));
    }
    let points = spec
        .points
        .iter()
        .map(|point| run_point(spec, point))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleResult {
        points,
        realizations: spec.realizations,
        master_seed: spec.master_seed,
    })
}

/// Participation ratio and per-site profile of one surviving realization;
/// None marks an excluded one.
type Realization = Option<(f64, Vec<f64>)>;

fn run_point(spec: &EnsembleSpec, point: &GridPoint) -> Result<PointResult> {
    let emitter = EmitterConfig::new(spec.g, point.x0);
    let outcomes: Vec<Result<Realization>> = (0..spec.realizations)
        .into_par_iter()
        .map(|r| realize(spec, point, &emitter, r as u64))
        .collect();

    let sites = point.geometry.sites();
    let mut xis: Vec<f64> = Vec::with_capacity(spec.realizations);
    let mut profile_sum = vec![0.0_f64; sites];
    let mut excluded = 0usize;
    for outcome in outcomes {
        match outcome? {
            Some((xi, profile)) => {
                xis.push(xi);
                for (acc, p) in profile_sum.iter_mut().zip(&profile) {
                    *acc += p;
                }
            }
            None => excluded += 1,
        }
    }
    let included = xis.len();
    if included == 0 {
        return Err(Error::AllRealizationsFailed {
            param: point.param,
            attempted: spec.realizations,
        });
    }

    let mean_xi = xis.iter().sum::<f64>() / included as f64;
    let stderr_xi = if included >= 2 {
        let var = xis.iter().map(|x| (x - mean_xi) * (x - mean_xi)).sum::<f64>()
            / (included - 1) as f64;
        (var / included as f64).sqrt()
    } else {
        0.0
    };
    for p in profile_sum.iter_mut() {
        *p /= included as f64;
    }

    let lattice = build_lattice(&point.geometry)?;
    let loc_slope = localization_slope(&profile_sum, &lattice, point.x0);
    Ok(PointResult {
        param: point.param,
        x0: point.x0,
        mean_xi,
        stderr_xi,
        mean_profile: profile_sum,
        included,
        excluded,
        loc_slope,
    })
}

fn realize(
    spec: &EnsembleSpec,
    point: &GridPoint,
    emitter: &EmitterConfig,
    stream: u64,
) -> Result<Realization> {
    let lattice = build_lattice(&point.geometry)?;
    let mut disorder = DisorderSpec::new(point.width, spec.master_seed).with_stream(stream);
    disorder.onsite_width = spec.onsite_width;
    let lattice = apply_disorder(&lattice, &disorder)?;
    let spectrum = eigendecompose(&field_hamiltonian(&lattice))?;
    let basis = match flat_band_basis(&spectrum, &lattice, spec.zero_tol) {
        Ok(basis) => basis,
        Err(Error::GapCollapse { .. }) | Err(Error::EmptyBand { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let model = match effective_model(&basis, &lattice, emitter) {
        Ok(model) => model,
        Err(Error::ZeroWeight) | Err(Error::WeakCouplingViolated { .. }) => return Ok(None),
        Err(e) => return Err(e),
    };
    let xi = participation_ratio(&model.lifted_mode)?;
    let profile = population_profile(&model.lifted_mode);
    Ok(Some((xi, profile)))
}

/// Fits ln(profile) = a + slope * d over majority sites, where d is the
/// periodic cell distance from the attachment cell; sites with d < 2 are
/// skipped, as are populations below 1e-30 (the double-precision noise
/// floor of an exact zero). None when fewer than two distinct distances
/// carry weight.
fn localization_slope(profile: &[f64], lattice: &Lattice, x0: SiteId) -> Option<f64> {
    let cells = lattice.geometry.cells() as i64;
    let origin = x0.cell.rem_euclid(cells);
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (site, &p) in profile.iter().enumerate() {
        if !lattice.is_majority(site) {
            continue;
        }
        let cell = (site / 3) as i64;
        let d = {
            let raw = (cell - origin).abs();
            raw.min(cells - raw)
        };
        if d < 2 || p <= 1e-30 {
            continue;
        }
        pts.push((d as f64, p.ln()));
    }
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < f64::EPSILON {
        return None;
    }
    Some((n * sxy - sx * sy) / denom)
}

/// Writes the sweep summary: one row per grid point.
pub fn write_xi_csv<W: Write>(result: &EnsembleResult, out: &mut W) -> io::Result<()> {
    writeln!(out, "param,x0,mean_xi,stderr_xi,excluded,R")?;
    for p in &result.points {
        writeln!(
            out,
            "{:.11e},{},{:.11e},{:.11e},{},{}",
            p.param, p.x0, p.mean_xi, p.stderr_xi, p.excluded, result.realizations
        )?;
    }
    Ok(())
}

/// Writes the companion per-site mean profiles, one row per grid point,
/// columns in cell-major site order. All grid points must share the site
/// layout of the first one.
pub fn write_profile_csv<W: Write>(result: &EnsembleResult, out: &mut W) -> io::Result<()> {
    let sites = match result.points.first() {
        Some(p) => p.mean_profile.len(),
        None => return Ok(()),
    };
    write!(out, "param,x0")?;
    for site in 0..sites {
        let id = SiteId::new(SiteLabel::from_offset(site % 3), (site / 3) as i64);
        write!(out, ",p_{}", id)?;
    }
    writeln!(out)?;
    for p in &result.points {
        assert_eq!(p.mean_profile.len(), sites, "profile CSV needs a homogeneous grid");
        write!(out, "{:.11e},{}", p.param, p.x0)?;
        for value in &p.mean_profile {
            write!(out, ",{:.11e}", value)?;
        }
        writeln!(out)?;
    }
    Ok(())
}
