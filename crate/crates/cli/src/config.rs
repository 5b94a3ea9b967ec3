//! Experiment configs: flat key=value text with `#` comments, named presets
//! as overridable bundles, canonical rendering for the manifest.
//!
//! Keys apply in file order, so a `preset=` line loads its bundle and later
//! keys override individual entries. `render` emits every effective key, and
//! `parse(render(config))` reproduces the config exactly.

use flatband::lattice::{build_lattice_with, Boundary, Geometry, SiteId};
use std::fmt;
use std::path::PathBuf;

pub const DEFAULT_SEED: u64 = 271828;
pub const DEFAULT_REALIZATIONS: usize = 200;

pub const PRESETS: [&str; 4] = ["fig1", "fig2", "fig3a", "fig3c"];

fn preset_text(name: &str) -> Option<&'static str> {
    // Rabi trace on the disordered double-comb.
    const FIG1: &str = "geometry=double-comb\ncells=20\nj=1\nv1=1\nv2=1\nw=1\ng=0.001\n\
                        x0=a0\nmode=trace\nsamples=400\n";
    // Participation ratio against disorder width on the diamond.
    const FIG2: &str = "geometry=diamond\ncells=31\nj=1\ng=0.001\nx0=a0\nmode=ensemble\n\
                        realizations=500\nw_grid=0,0.5,1,2,4\n";
    // Participation ratio against eta on the stub, clean and disordered
    // series, emitter on the tooth.
    const FIG3A: &str = "geometry=stub\ncells=31\nj=1\ng=0.001\nx0=a0\nmode=ensemble\n\
                         realizations=200\neta_grid=0.1,0.2,0.5,1,2,5,10\nw=2\n";
    // Same sweep with the emitter on the backbone.
    const FIG3C: &str = "geometry=stub\ncells=31\nj=1\ng=0.001\nx0=c0\nmode=ensemble\n\
                         realizations=200\neta_grid=0.1,0.2,0.5,1,2,5,10\nw=2\n";
    match name {
        "fig1" => Some(FIG1),
        "fig2" => Some(FIG2),
        "fig3a" => Some(FIG3A),
        "fig3c" => Some(FIG3C),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Trace,
    Ensemble,
}

impl Mode {
    fn label(self) -> &'static str {
        match self {
            Mode::Trace => "trace",
            Mode::Ensemble => "ensemble",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub geometry: Geometry,
    pub boundary: Boundary,
    pub g: f64,
    pub omega_e: f64,
    pub x0: SiteId,
    pub width: f64,
    pub onsite_width: f64,
    pub seed: u64,
    pub mode: Mode,
    pub realizations: usize,
    pub w_grid: Option<Vec<f64>>,
    pub eta_grid: Option<Vec<f64>>,
    pub samples: usize,
    pub t_max: Option<f64>,
    pub out: PathBuf,
    pub threads: usize,
    pub dump_lattice: bool,
    pub dump_spectrum: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigError {
    /// Malformed line: bad syntax, unknown key, or an unparseable value.
    Parse { line: usize, message: String },
    /// Well-formed but invalid configuration.
    Validation { field: &'static str, message: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, message } => write!(f, "line {line}: {message}"),
            ConfigError::Validation { field, message } => write!(f, "{field}: {message}"),
        }
    }
}

impl std::error::Error for ConfigError {}

struct Builder {
    preset: Option<String>,
    kind: Option<String>,
    cells: Option<usize>,
    j: f64,
    v1: f64,
    v2: f64,
    v: Option<f64>,
    eta: Option<f64>,
    boundary: Boundary,
    g: f64,
    omega_e: f64,
    x0: SiteId,
    width: f64,
    onsite_width: f64,
    seed: u64,
    mode: Mode,
    realizations: usize,
    w_grid: Option<Vec<f64>>,
    eta_grid: Option<Vec<f64>>,
    samples: usize,
    t_max: Option<f64>,
    out: PathBuf,
    threads: usize,
    dump_lattice: bool,
    dump_spectrum: bool,
}

impl Default for Builder {
    fn default() -> Self {
        Builder {
            preset: None,
            kind: None,
            cells: None,
            j: 1.0,
            v1: 1.0,
            v2: 1.0,
            v: None,
            eta: None,
            boundary: Boundary::Periodic,
            g: flatband::DEFAULT_COUPLING,
            omega_e: 0.0,
            x0: "a0".parse().expect("literal site"),
            width: 0.0,
            onsite_width: 0.0,
            seed: DEFAULT_SEED,
            mode: Mode::Trace,
            realizations: DEFAULT_REALIZATIONS,
            w_grid: None,
            eta_grid: None,
            samples: flatband::DEFAULT_TRACE_SAMPLES,
            t_max: None,
            out: PathBuf::from("."),
            threads: 0,
            dump_lattice: false,
            dump_spectrum: false,
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse { line, message: message.into() }
}

impl Builder {
    fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| parse_err(line, format!("expected key=value, got {content:?}")))?;
            self.apply(key.trim(), value.trim(), line)?;
        }
        Ok(())
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value
                .parse()
                .map_err(|e| parse_err(line, format!("{key}: {e}")))
        }
        fn list(key: &str, value: &str, line: usize) -> Result<Vec<f64>, ConfigError> {
            value
                .split(',')
                .map(|item| num::<f64>(key, item.trim(), line))
                .collect()
        }
        match key {
            "preset" => self.apply_preset(value, line)?,
            "geometry" => self.kind = Some(value.to_string()),
            "cells" => self.cells = Some(num(key, value, line)?),
            "j" => self.j = num(key, value, line)?,
            "v1" => self.v1 = num(key, value, line)?,
            "v2" => self.v2 = num(key, value, line)?,
            "v" => self.v = Some(num(key, value, line)?),
            "eta" => self.eta = Some(num(key, value, line)?),
            "boundary" => {
                self.boundary = match value {
                    "periodic" => Boundary::Periodic,
                    "open" => Boundary::Open,
                    other => return Err(parse_err(line, format!("unknown boundary {other:?}"))),
                }
            }
            "g" => self.g = num(key, value, line)?,
            "omega_e" => self.omega_e = num(key, value, line)?,
            "x0" => {
                self.x0 = value
                    .parse()
                    .map_err(|e: String| parse_err(line, e))?
            }
            "w" => self.width = num(key, value, line)?,
            "onsite_w" => self.onsite_width = num(key, value, line)?,
            "seed" => self.seed = num(key, value, line)?,
            "mode" => {
                self.mode = match value {
                    "trace" => Mode::Trace,
                    "ensemble" => Mode::Ensemble,
                    other => return Err(parse_err(line, format!("unknown mode {other:?}"))),
                }
            }
            "realizations" => self.realizations = num(key, value, line)?,
            "w_grid" => self.w_grid = Some(list(key, value, line)?),
            "eta_grid" => self.eta_grid = Some(list(key, value, line)?),
            "samples" => self.samples = num(key, value, line)?,
            "t_max" => self.t_max = Some(num(key, value, line)?),
            "out" => self.out = PathBuf::from(value),
            "threads" => self.threads = num(key, value, line)?,
            "dump_lattice" => self.dump_lattice = num(key, value, line)?,
            "dump_spectrum" => self.dump_spectrum = num(key, value, line)?,
            other => return Err(parse_err(line, format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    fn apply_preset(&mut self, name: &str, line: usize) -> Result<(), ConfigError> {
        let text = preset_text(name).ok_or_else(|| {
            parse_err(
                line,
                format!("unknown preset {name:?}; available: {}", PRESETS.join(", ")),
            )
        })?;
        self.apply_text(text)
            .expect("preset bundles are well-formed");
        self.preset = Some(name.to_string());
        Ok(())
    }

    fn finish(self) -> Result<ExperimentConfig, ConfigError> {
        fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
            ConfigError::Validation { field, message: message.into() }
        }

        let kind = self
            .kind
            .ok_or_else(|| invalid("geometry", "missing (set geometry= or a preset)"))?;
        let cells = self.cells.ok_or_else(|| invalid("cells", "missing"))?;
        let geometry = match kind.as_str() {
            "double-comb" => {
                Geometry::DoubleComb { cells, j: self.j, v1: self.v1, v2: self.v2 }
            }
            "diamond" => Geometry::Diamond { cells, j: self.j },
            "stub" => {
                let v = match (self.v, self.eta) {
                    (Some(_), Some(_)) => {
                        return Err(invalid("eta", "set either v or eta, not both"))
                    }
                    (Some(v), None) => v,
                    (None, Some(eta)) => eta * self.j,
                    (None, None) => self.j,
                };
                Geometry::Stub { cells, j: self.j, v }
            }
            other => return Err(invalid("geometry", format!("unknown geometry {other:?}"))),
        };

        // Build once to surface structural problems (cell count, coupling
        // signs, even periodic diamond) with the field that caused them.
        let lattice = build_lattice_with(&geometry, self.boundary).map_err(|e| match e {
            flatband::Error::EvenDiamond(_) => invalid("cells", e.to_string()),
            other => invalid("geometry", other.to_string()),
        })?;
        lattice
            .site_index(self.x0)
            .map_err(|e| invalid("x0", e.to_string()))?;

        if !self.g.is_finite() || self.g <= 0.0 {
            return Err(invalid("g", format!("must be positive and finite, got {}", self.g)));
        }
        if !self.omega_e.is_finite() {
            return Err(invalid("omega_e", "must be finite"));
        }
        let width_ok = |w: f64| w.is_finite() && (0.0..=flatband::MAX_DISORDER_WIDTH).contains(&w);
        if !width_ok(self.width) {
            return Err(invalid("w", format!("must lie in [0, 4], got {}", self.width)));
        }
        if !width_ok(self.onsite_width) {
            return Err(invalid(
                "onsite_w",
                format!("must lie in [0, 4], got {}", self.onsite_width),
            ));
        }
        if self.samples < 2 {
            return Err(invalid("samples", "need at least two steps"));
        }
        if let Some(t) = self.t_max {
            if !t.is_finite() || t <= 0.0 {
                return Err(invalid("t_max", format!("must be positive and finite, got {t}")));
            }
        }
        if self.threads > 1024 {
            return Err(invalid("threads", "more than 1024 workers is not supported"));
        }

        match self.mode {
            Mode::Trace => {
                if self.w_grid.is_some() {
                    return Err(invalid("w_grid", "only valid with mode=ensemble"));
                }
                if self.eta_grid.is_some() {
                    return Err(invalid("eta_grid", "only valid with mode=ensemble"));
                }
            }
            Mode::Ensemble => {
                if self.realizations == 0 {
                    return Err(invalid("realizations", "need at least one"));
                }
                match (&self.w_grid, &self.eta_grid) {
                    (Some(_), Some(_)) => {
                        return Err(invalid("eta_grid", "set either w_grid or eta_grid, not both"))
                    }
                    (None, None) => {
                        return Err(invalid("w_grid", "mode=ensemble needs w_grid or eta_grid"))
                    }
                    (Some(grid), None) => {
                        if grid.is_empty() {
                            return Err(invalid("w_grid", "must not be empty"));
                        }
                        if let Some(&bad) = grid.iter().find(|&&w| !width_ok(w)) {
                            return Err(invalid("w_grid", format!("width {bad} outside [0, 4]")));
                        }
                    }
                    (None, Some(grid)) => {
                        if !matches!(geometry, Geometry::Stub { .. }) {
                            return Err(invalid("eta_grid", "only the stub geometry sweeps eta"));
                        }
                        if grid.is_empty() {
                            return Err(invalid("eta_grid", "must not be empty"));
                        }
                        if let Some(&bad) =
                            grid.iter().find(|&&e| !e.is_finite() || e <= 0.0)
                        {
                            return Err(invalid(
                                "eta_grid",
                                format!("eta {bad} must be positive and finite"),
                            ));
                        }
                    }
                }
            }
        }

        Ok(ExperimentConfig {
            preset: self.preset,
            geometry,
            boundary: self.boundary,
            g: self.g,
            omega_e: self.omega_e,
            x0: self.x0,
            width: self.width,
            onsite_width: self.onsite_width,
            seed: self.seed,
            mode: self.mode,
            realizations: self.realizations,
            w_grid: self.w_grid,
            eta_grid: self.eta_grid,
            samples: self.samples,
            t_max: self.t_max,
            out: self.out,
            threads: self.threads,
            dump_lattice: self.dump_lattice,
            dump_spectrum: self.dump_spectrum,
        })
    }
}

/// Parses config text, optionally seeded by a preset bundle applied before
/// the first line, so error line numbers match the file.
pub fn parse_with_preset(
    preset: Option<&str>,
    text: &str,
) -> Result<ExperimentConfig, ConfigError> {
    let mut builder = Builder::default();
    if let Some(name) = preset {
        builder.apply_preset(name, 0)?;
    }
    builder.apply_text(text)?;
    builder.finish()
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_with_preset(None, text)
}

/// Canonical text form: every effective key, fixed order. Reparsing yields
/// an equal config.
pub fn render(config: &ExperimentConfig) -> String {
    let mut out = String::new();
    let mut push = |key: &str, value: String| {
        out.push_str(key);
        out.push('=');
        out.push_str(&value);
        out.push('\n');
    };
    if let Some(preset) = &config.preset {
        push("preset", preset.clone());
    }
    match config.geometry {
        Geometry::DoubleComb { cells, j, v1, v2 } => {
            push("geometry", "double-comb".into());
            push("cells", cells.to_string());
            push("j", j.to_string());
            push("v1", v1.to_string());
            push("v2", v2.to_string());
        }
        Geometry::Diamond { cells, j } => {
            push("geometry", "diamond".into());
            push("cells", cells.to_string());
            push("j", j.to_string());
        }
        Geometry::Stub { cells, j, v } => {
            push("geometry", "stub".into());
            push("cells", cells.to_string());
            push("j", j.to_string());
            push("v", v.to_string());
        }
    }
    let boundary = match config.boundary {
        Boundary::Periodic => "periodic",
        Boundary::Open => "open",
    };
    push("boundary", boundary.into());
    push("g", config.g.to_string());
    push("omega_e", config.omega_e.to_string());
    push("x0", config.x0.to_string());
    push("w", config.width.to_string());
    push("onsite_w", config.onsite_width.to_string());
    push("seed", config.seed.to_string());
    push("mode", config.mode.label().into());
    push("realizations", config.realizations.to_string());
    let join = |grid: &[f64]| {
        grid.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    };
    if let Some(grid) = &config.w_grid {
        push("w_grid", join(grid));
    }
    if let Some(grid) = &config.eta_grid {
        push("eta_grid", join(grid));
    }
    push("samples", config.samples.to_string());
    if let Some(t) = config.t_max {
        push("t_max", t.to_string());
    }
    push("out", config.out.display().to_string());
    push("threads", config.threads.to_string());
    push("dump_lattice", config.dump_lattice.to_string());
    push("dump_spectrum", config.dump_spectrum.to_string());
    out
}
