//! Quasi-1D flat-band lattices: geometry construction, hopping disorder, and
//! single-particle Hamiltonian assembly.
//!
//! Sites are laid out cell-major as (a, b, c): index 3n is a_n, 3n+1 is b_n,
//! 3n+2 is c_n. The {a, c} sites form the majority sublattice (M = 2N), the
//! b sites the minority one (m = N). Majority sites never couple to each
//! other, which pins at least M - m = N zero-energy modes supported on the
//! majority sublattice alone; for the three geometries here the count is
//! exactly N for any hopping disorder.

use crate::error::{Error, Result};
use crate::matrix::SymmetricMatrix;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

/// Supported lattice geometries. Couplings are in units of the backbone
/// hopping, so `j = 1.0` is the conventional choice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// Ring of b sites (backbone coupling `j`) carrying one `a` tooth
    /// (coupling `v1`) and one `c` tooth (coupling `v2`) per backbone site.
    /// Each cell supports a compact zero mode on its two teeth for any
    /// per-edge disorder.
    DoubleComb { cells: usize, j: f64, v1: f64, v2: f64 },
    /// Chain of rhombi, all couplings `j`: b_n joins b_{n+1} through the two
    /// majority sites a_n and c_n.
    Diamond { cells: usize, j: f64 },
    /// Backbone chain alternating b and c sites (coupling `j`) with one `a`
    /// tooth per b site (coupling `v`). The band structure depends on the
    /// coupling ratio `eta = v / j`.
    Stub { cells: usize, j: f64, v: f64 },
}

impl Geometry {
    pub fn cells(&self) -> usize {
        match *self {
            Geometry::DoubleComb { cells, .. }
            | Geometry::Diamond { cells, .. }
            | Geometry::Stub { cells, .. } => cells,
        }
    }

    pub fn sites(&self) -> usize {
        3 * self.cells()
    }

    pub fn name(&self) -> &'static str {
        match self {
            Geometry::DoubleComb { .. } => "double-comb",
            Geometry::Diamond { .. } => "diamond",
            Geometry::Stub { .. } => "stub",
        }
    }

    /// Tooth-to-backbone coupling ratio of the stub geometry.
    pub fn eta(&self) -> Option<f64> {
        match *self {
            Geometry::Stub { j, v, .. } => Some(v / j),
            _ => None,
        }
    }

    fn validate(&self) -> Result<()> {
        fn coupling(name: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::BadParams(format!(
                    "coupling {name} must be positive and finite, got {v}"
                )))
            }
        }
        if self.cells() < 3 {
            return Err(Error::BadParams(format!(
                "need at least 3 cells, got {}",
                self.cells()
            )));
        }
        match *self {
            Geometry::DoubleComb { j, v1, v2, .. } => {
                coupling("j", j)?;
                coupling("v1", v1)?;
                coupling("v2", v2)
            }
            Geometry::Diamond { j, .. } => coupling("j", j),
            Geometry::Stub { j, v, .. } => {
                coupling("j", j)?;
                coupling("v", v)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    Periodic,
    Open,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiteLabel {
    A,
    B,
    C,
}

impl SiteLabel {
    pub fn offset(self) -> usize {
        match self {
            SiteLabel::A => 0,
            SiteLabel::B => 1,
            SiteLabel::C => 2,
        }
    }

    pub fn from_offset(offset: usize) -> SiteLabel {
        match offset % 3 {
            0 => SiteLabel::A,
            1 => SiteLabel::B,
            _ => SiteLabel::C,
        }
    }

    pub fn letter(self) -> char {
        match self {
            SiteLabel::A => 'a',
            SiteLabel::B => 'b',
            SiteLabel::C => 'c',
        }
    }

    /// True for the {a, c} sublattice.
    pub fn is_majority(self) -> bool {
        !matches!(self, SiteLabel::B)
    }
}

/// Symbolic site reference; the cell index is wrapped periodically when the
/// lattice has periodic boundaries, so negative cells address sites to the
/// left of cell 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SiteId {
    pub label: SiteLabel,
    pub cell: i64,
}

impl SiteId {
    pub fn new(label: SiteLabel, cell: i64) -> Self {
        SiteId { label, cell }
    }
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.label.letter(), self.cell)
    }
}

impl FromStr for SiteId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut chars = s.chars();
        let label = match chars.next() {
            Some('a') => SiteLabel::A,
            Some('b') => SiteLabel::B,
            Some('c') => SiteLabel::C,
            _ => return Err(format!("site must start with a, b, or c: {s:?}")),
        };
        let cell: i64 = chars
            .as_str()
            .parse()
            .map_err(|_| format!("bad cell index in site {s:?}"))?;
        Ok(SiteId { label, cell })
    }
}

/// Undirected edge between site indices `x < y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub x: usize,
    pub y: usize,
    pub coupling: f64,
}

impl Edge {
    fn new(a: usize, b: usize, coupling: f64) -> Self {
        Edge { x: a.min(b), y: a.max(b), coupling }
    }
}

/// Hopping (and optional onsite) disorder: every coupling is independently
/// rescaled to (1 + delta) * J with delta uniform on [-width/2, width/2).
///
/// Draws come from a stream of the counter-based ChaCha8 generator keyed by
/// `seed`, so a (seed, stream) pair reproduces bit-identical lattices on any
/// platform. Ensembles assign one stream per realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisorderSpec {
    pub width: f64,
    /// Diagonal disorder width; nonzero values break chiral symmetry and are
    /// off by default.
    pub onsite_width: f64,
    pub seed: u64,
    pub stream: u64,
}

impl DisorderSpec {
    pub fn new(width: f64, seed: u64) -> Self {
        DisorderSpec { width, onsite_width: 0.0, seed, stream: 0 }
    }

    pub fn with_stream(mut self, stream: u64) -> Self {
        self.stream = stream;
        self
    }
}

/// Maximum accepted disorder width. Widths up to 2 keep couplings
/// non-negative; between 2 and 4 individual couplings may change sign, which
/// leaves the sublattice structure (and hence the zero-energy band) intact.
pub const MAX_DISORDER_WIDTH: f64 = 4.0;

/// An assembled lattice: realized couplings plus enough metadata to map site
/// indices back to (cell, label) pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub geometry: Geometry,
    pub boundary: Boundary,
    /// Construction order is fixed per geometry; disorder draws follow it.
    pub edges: Vec<Edge>,
    /// Onsite energies, zero unless diagonal disorder was requested.
    pub onsite: Vec<f64>,
    /// True once `apply_disorder` has rescaled couplings.
    pub disordered: bool,
}

impl Lattice {
    pub fn sites(&self) -> usize {
        self.geometry.sites()
    }

    pub fn cells(&self) -> usize {
        self.geometry.cells()
    }

    pub fn site_id(&self, index: usize) -> SiteId {
        SiteId { label: SiteLabel::from_offset(index % 3), cell: (index / 3) as i64 }
    }

    pub fn site_name(&self, index: usize) -> String {
        self.site_id(index).to_string()
    }

    /// True for sites on the {a, c} sublattice.
    pub fn is_majority(&self, index: usize) -> bool {
        SiteLabel::from_offset(index % 3).is_majority()
    }

    /// Resolves a symbolic site to its index. Periodic lattices wrap the
    /// cell; open lattices require 0 <= cell < N.
    pub fn site_index(&self, id: SiteId) -> Result<usize> {
        let n = self.cells() as i64;
        let cell = match self.boundary {
            Boundary::Periodic => id.cell.rem_euclid(n),
            Boundary::Open => {
                if (0..n).contains(&id.cell) {
                    id.cell
                } else {
                    return Err(Error::BadSite {
                        site: id.to_string(),
                        cells: self.cells(),
                    });
                }
            }
        };
        Ok(3 * cell as usize + id.label.offset())
    }

    /// Realized coupling between two site indices, if the edge exists.
    pub fn coupling(&self, x: usize, y: usize) -> Option<f64> {
        let (x, y) = (x.min(y), x.max(y));
        self.edges
            .iter()
            .find(|e| e.x == x && e.y == y)
            .map(|e| e.coupling)
    }
}

/// Builds a clean periodic lattice.
pub fn build_lattice(geometry: &Geometry) -> Result<Lattice> {
    build_lattice_with(geometry, Boundary::Periodic)
}

/// Builds a clean lattice with the requested boundary condition.
pub fn build_lattice_with(geometry: &Geometry, boundary: Boundary) -> Result<Lattice> {
    geometry.validate()?;
    let n = geometry.cells();
    if let Geometry::Diamond { cells, .. } = geometry {
        // With an even periodic rhombus count the dispersive bands reach
        // zero and contaminate the zero-energy level.
        if boundary == Boundary::Periodic && cells % 2 == 0 {
            return Err(Error::EvenDiamond(*cells));
        }
    }

    let a = |cell: usize| 3 * cell;
    let b = |cell: usize| 3 * cell + 1;
    let c = |cell: usize| 3 * cell + 2;

    let mut edges = Vec::with_capacity(4 * n);
    for cell in 0..n {
        let next = (cell + 1) % n;
        let wrap = cell + 1 == n;
        if wrap && boundary == Boundary::Open {
            match geometry {
                Geometry::DoubleComb { v1, v2, .. } => {
                    edges.push(Edge::new(a(cell), b(cell), *v1));
                    edges.push(Edge::new(b(cell), c(cell), *v2));
                }
                Geometry::Diamond { j, .. } => {
                    edges.push(Edge::new(a(cell), b(cell), *j));
                    edges.push(Edge::new(b(cell), c(cell), *j));
                }
                Geometry::Stub { j, v, .. } => {
                    edges.push(Edge::new(a(cell), b(cell), *v));
                    edges.push(Edge::new(b(cell), c(cell), *j));
                }
            }
            continue;
        }
        match geometry {
            Geometry::DoubleComb { j, v1, v2, .. } => {
                edges.push(Edge::new(a(cell), b(cell), *v1));
                edges.push(Edge::new(b(cell), c(cell), *v2));
                edges.push(Edge::new(b(cell), b(next), *j));
            }
            Geometry::Diamond { j, .. } => {
                edges.push(Edge::new(a(cell), b(cell), *j));
                edges.push(Edge::new(b(cell), c(cell), *j));
                edges.push(Edge::new(a(cell), b(next), *j));
                edges.push(Edge::new(c(cell), b(next), *j));
            }
            Geometry::Stub { j, v, .. } => {
                edges.push(Edge::new(a(cell), b(cell), *v));
                edges.push(Edge::new(b(cell), c(cell), *j));
                edges.push(Edge::new(c(cell), b(next), *j));
            }
        }
    }

    Ok(Lattice {
        geometry: *geometry,
        boundary,
        edges,
        onsite: vec![0.0; geometry.sites()],
        disordered: false,
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on [-width/2, width/2) from the top 53 bits of one word.
fn uniform_delta(rng: &mut ChaCha8Rng, width: f64) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * 2f64.powi(-53);
    (u - 0.5) * width
}

/// Rescales every coupling by an independent factor (1 + delta). Edge draws
/// come first, in edge order; onsite draws (if enabled) follow, in site
/// order, so enabling the onsite hook does not perturb the coupling stream.
pub fn apply_disorder(lattice: &Lattice, spec: &DisorderSpec) -> Result<Lattice> {
    for w in [spec.width, spec.onsite_width] {
        if !(0.0..=MAX_DISORDER_WIDTH).contains(&w) || !w.is_finite() {
            return Err(Error::WidthTooLarge(w));
        }
    }
    if spec.width == 0.0 && spec.onsite_width == 0.0 {
        return Ok(lattice.clone());
    }

    let mut rng = stream_rng(spec.seed, spec.stream);
    let mut out = lattice.clone();
    if spec.width > 0.0 {
        for edge in &mut out.edges {
            edge.coupling *= 1.0 + uniform_delta(&mut rng, spec.width);
        }
    }
    if spec.onsite_width > 0.0 {
        for energy in &mut out.onsite {
            *energy += uniform_delta(&mut rng, spec.onsite_width);
        }
    }
    out.disordered = true;
    Ok(out)
}

/// Assembles the single-particle hopping Hamiltonian over the lattice sites.
pub fn field_hamiltonian(lattice: &Lattice) -> SymmetricMatrix {
    let mut h = SymmetricMatrix::zeros(lattice.sites());
    for (site, energy) in lattice.onsite.iter().enumerate() {
        if *energy != 0.0 {
            h.set(site, site, *energy);
        }
    }
    for edge in &lattice.edges {
        h.set(edge.x, edge.y, edge.coupling);
    }
    h
}

/// Writes the realized edge list: one header line `sites cells geometry`,
/// then `x y coupling` per edge with full 17-digit precision.
pub fn write_edge_list<W: Write>(lattice: &Lattice, out: &mut W) -> io::Result<()> {
    writeln!(
        out,
        "{} {} {}",
        lattice.sites(),
        lattice.cells(),
        lattice.geometry.name()
    )?;
    for edge in &lattice.edges {
        writeln!(out, "{} {} {:.16e}", edge.x, edge.y, edge.coupling)?;
    }
    Ok(())
}
