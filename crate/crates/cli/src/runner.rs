//! Executes a validated config: builds the lattice, runs the trace or the
//! ensemble inside a bounded worker pool, and writes all artifacts into the
//! output directory, manifest last. On any failure every file written so
//! far is removed, so a directory either holds a complete run or nothing.

use crate::config::{ExperimentConfig, Mode};
use flatband::dynamics::{
    effective_model, evolve_spectrum, first_emitter_zero, full_hamiltonian,
    lifted_mode_fidelity, write_trace_csv, EffectiveModel, EmitterConfig,
};
use flatband::lattice::{
    apply_disorder, build_lattice_with, field_hamiltonian, write_edge_list, DisorderSpec,
    Geometry, Lattice,
};
use flatband::observables::{
    run_ensemble, write_profile_csv, write_xi_csv, EnsembleResult, EnsembleSpec, GridPoint,
};
use flatband::spectral::{eigendecompose, flat_band_basis, write_spectrum, Spectrum};
use flatband::tol;
use serde_json::{json, Value};
use std::fmt;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug)]
pub enum RunError {
    Numeric(flatband::Error),
    Io(std::io::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Numeric(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<flatband::Error> for RunError {
    fn from(e: flatband::Error) -> Self {
        RunError::Numeric(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

pub struct RunSummary {
    pub artifacts: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

pub fn execute(config: &ExperimentConfig) -> Result<RunSummary, RunError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| RunError::Numeric(flatband::Error::BadParams(e.to_string())))?;
    pool.install(|| {
        let mut tracker = Tracker::create(config.out.clone())?;
        match run_inner(config, &mut tracker) {
            Ok(warnings) => Ok(RunSummary { artifacts: tracker.written, warnings }),
            Err(e) => {
                tracker.cleanup();
                Err(e)
            }
        }
    })
}

struct Tracker {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl Tracker {
    fn create(root: PathBuf) -> Result<Self, RunError> {
        std::fs::create_dir_all(&root)?;
        Ok(Tracker { root, written: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    fn cleanup(&self) {
        for path in &self.written {
            let _ = std::fs::remove_file(path);
        }
    }
}

fn run_inner(config: &ExperimentConfig, tracker: &mut Tracker) -> Result<Vec<String>, RunError> {
    match config.mode {
        Mode::Trace => run_trace(config, tracker),
        Mode::Ensemble => run_ensemble_mode(config, tracker),
    }
}

fn emitter_of(config: &ExperimentConfig) -> EmitterConfig {
    EmitterConfig { omega_e: config.omega_e, g: config.g, x0: config.x0 }
}

fn manifest_common(config: &ExperimentConfig, artifacts: &[String]) -> Value {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "created_unix": created,
        "version": env!("CARGO_PKG_VERSION"),
        "preset": config.preset,
        "mode": match config.mode { Mode::Trace => "trace", Mode::Ensemble => "ensemble" },
        "geometry": {
            "kind": config.geometry.name(),
            "cells": config.geometry.cells(),
            "sites": config.geometry.sites(),
        },
        "seed": config.seed,
        "threads": { "configured": config.threads, "effective": rayon::current_num_threads() },
        "tolerances": {
            "zero_mode_tol_rel": tol::ZERO_MODE_TOL_REL,
            "gap_collapse_factor": tol::GAP_COLLAPSE_FACTOR,
            "minority_amplitude_tol": tol::MINORITY_AMPLITUDE_TOL,
            "eigen_residual_rel": tol::EIGEN_RESIDUAL_REL,
            "unitarity_tol": tol::UNITARITY_TOL,
            "weak_coupling_warn_ratio": tol::WEAK_COUPLING_WARN_RATIO,
            "perturbation_factor": tol::PERTURBATION_FACTOR,
        },
        "config_text": crate::config::render(config),
        "artifacts": artifacts,
    })
}

fn dump_lattice_and_spectrum(
    config: &ExperimentConfig,
    lattice: &Lattice,
    spectrum: &Spectrum,
    tracker: &mut Tracker,
) -> Result<Vec<String>, RunError> {
    let mut names = Vec::new();
    if config.dump_lattice {
        let mut buf = Vec::new();
        write_edge_list(lattice, &mut buf)?;
        tracker.write("lattice.txt", &buf)?;
        names.push("lattice.txt".to_string());
    }
    if config.dump_spectrum {
        let mut buf = Vec::new();
        write_spectrum(spectrum, &mut buf)?;
        tracker.write("spectrum.txt", &buf)?;
        names.push("spectrum.txt".to_string());
    }
    Ok(names)
}

fn weak_coupling_warning(model: &EffectiveModel) -> Option<String> {
    (model.coupling_to_gap > tol::WEAK_COUPLING_WARN_RATIO).then(|| {
        format!(
            "coupling/gap = {:.3e} exceeds {:.0e}; first-order Rabi reduction degrades",
            model.coupling_to_gap,
            tol::WEAK_COUPLING_WARN_RATIO
        )
    })
}

fn run_trace(config: &ExperimentConfig, tracker: &mut Tracker) -> Result<Vec<String>, RunError> {
    let clean = build_lattice_with(&config.geometry, config.boundary)?;
    let mut disorder = DisorderSpec::new(config.width, config.seed);
    disorder.onsite_width = config.onsite_width;
    let lattice = apply_disorder(&clean, &disorder)?;

    let field_spectrum = eigendecompose(&field_hamiltonian(&lattice))?;
    let basis = flat_band_basis(&field_spectrum, &lattice, None)?;
    let emitter = emitter_of(config);
    let model = effective_model(&basis, &lattice, &emitter)?;
    let mut warnings = Vec::new();
    warnings.extend(weak_coupling_warning(&model));

    let h = full_hamiltonian(&lattice, &emitter)?;
    let spectrum = eigendecompose(&h)?;
    let t_end = config.t_max.unwrap_or(2.0 * model.half_period);
    let step = t_end / config.samples as f64;
    let times: Vec<f64> = (0..=config.samples).map(|i| i as f64 * step).collect();
    let trace = evolve_spectrum(&spectrum, &times);

    let mut buf = Vec::new();
    write_trace_csv(&trace, &lattice, &mut buf)?;
    tracker.write("trace.csv", &buf)?;
    let mut artifacts = vec!["trace.csv".to_string()];
    artifacts.extend(dump_lattice_and_spectrum(config, &lattice, &field_spectrum, tracker)?);

    let fidelity = lifted_mode_fidelity(&model, &trace).ok();
    let first_zero = first_emitter_zero(&trace);
    artifacts.push("manifest.json".to_string());
    let mut manifest = manifest_common(config, &artifacts);
    manifest["results"] = json!({
        "rabi_frequency": model.rabi_frequency,
        "half_period": model.half_period,
        "gap": model.gap,
        "coupling_to_gap": model.coupling_to_gap,
        "band_dimension": basis.dimension(),
        "fidelity_at_half_period": fidelity,
        "first_emitter_zero": first_zero,
        "time_span": t_end,
    });
    manifest["warnings"] = json!(warnings);
    tracker.write("manifest.json", &pretty(&manifest))?;
    Ok(warnings)
}

fn run_ensemble_mode(
    config: &ExperimentConfig,
    tracker: &mut Tracker,
) -> Result<Vec<String>, RunError> {
    // One (file suffix, grid) pair per output series.
    let series: Vec<(&str, Vec<GridPoint>)> = if let Some(widths) = &config.w_grid {
        let points = widths
            .iter()
            .map(|&w| GridPoint { param: w, geometry: config.geometry, width: w, x0: config.x0 })
            .collect();
        vec![("", points)]
    } else {
        let etas = config.eta_grid.as_ref().expect("validated: one grid is set");
        let (cells, j) = match config.geometry {
            Geometry::Stub { cells, j, .. } => (cells, j),
            _ => unreachable!("validated: eta sweeps are stub-only"),
        };
        let points_at = |width: f64| -> Vec<GridPoint> {
            etas.iter()
                .map(|&eta| GridPoint {
                    param: eta,
                    geometry: Geometry::Stub { cells, j, v: eta * j },
                    width,
                    x0: config.x0,
                })
                .collect()
        };
        if config.width > 0.0 {
            vec![("_clean", points_at(0.0)), ("_disordered", points_at(config.width))]
        } else {
            vec![("_clean", points_at(0.0))]
        }
    };

    let mut artifacts = Vec::new();
    let mut results: Vec<(&str, EnsembleResult)> = Vec::new();
    for (suffix, points) in series {
        let spec = EnsembleSpec {
            realizations: config.realizations,
            master_seed: config.seed,
            g: config.g,
            onsite_width: config.onsite_width,
            points,
            zero_tol: None,
        };
        let result = run_ensemble(&spec)?;

        let mut buf = Vec::new();
        write_xi_csv(&result, &mut buf)?;
        let xi_name = format!("xi{suffix}.csv");
        tracker.write(&xi_name, &buf)?;
        artifacts.push(xi_name);

        let mut buf = Vec::new();
        write_profile_csv(&result, &mut buf)?;
        let profile_name = format!("profiles{suffix}.csv");
        tracker.write(&profile_name, &buf)?;
        artifacts.push(profile_name);
        results.push((suffix, result));
    }

    if config.dump_lattice || config.dump_spectrum {
        let reference = build_lattice_with(&config.geometry, config.boundary)?;
        let spectrum = eigendecompose(&field_hamiltonian(&reference))?;
        artifacts.extend(dump_lattice_and_spectrum(config, &reference, &spectrum, tracker)?);
    }

    let mut warnings = Vec::new();
    let excluded_total: usize = results
        .iter()
        .flat_map(|(_, r)| r.points.iter().map(|p| p.excluded))
        .sum();
    if excluded_total > 0 {
        warnings.push(format!("{excluded_total} realizations excluded; see manifest"));
    }

    artifacts.push("manifest.json".to_string());
    let mut manifest = manifest_common(config, &artifacts);
    manifest["results"] = Value::Array(
        results
            .iter()
            .map(|(suffix, result)| {
                json!({
                    "series": if suffix.is_empty() { "w_sweep" } else { &suffix[1..] },
                    "realizations": result.realizations,
                    "points": result.points.iter().map(|p| json!({
                        "param": p.param,
                        "x0": p.x0.to_string(),
                        "mean_xi": p.mean_xi,
                        "stderr_xi": p.stderr_xi,
                        "included": p.included,
                        "excluded": p.excluded,
                        "loc_slope": p.loc_slope,
                    })).collect::<Vec<_>>(),
                })
            })
            .collect(),
    );
    if config.preset.as_deref() == Some("fig2") {
        manifest["deviations"] = json!([format!(
            "realizations={} per grid point keeps this preset fast; raise \
             realizations= toward 10000 for production error bars",
            config.realizations
        )]);
    }
    manifest["warnings"] = json!(warnings);
    tracker.write("manifest.json", &pretty(&manifest))?;
    Ok(warnings)
}

fn pretty(value: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("manifest serializes");
    bytes.push(b'\n');
    bytes
}
