//! Exact diagonalization of the lattice Hamiltonian and extraction of the
//! zero-energy band.
//!
//! The eigensolver is the classic dense symmetric pipeline: Householder
//! reduction to tridiagonal form followed by implicit-shift QL with
//! eigenvector accumulation. Matrix orders stay in the low hundreds, and the
//! pipeline is deterministic: identical input bits give identical spectra on
//! every platform, which the ensemble reproducibility guarantees rely on.

use crate::error::{Error, Result};
use crate::lattice::{Geometry, Lattice, SiteId, SiteLabel};
use crate::matrix::SymmetricMatrix;
use crate::tol;
use std::io::{self, Write};

/// Full eigensystem of a real symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[k]` pairs with `eigenvalues[k]`; the set is orthonormal.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Infinity norm of the decomposed matrix, kept for relative tolerances.
    pub h_norm_inf: f64,
}

impl Spectrum {
    pub fn order(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Default half-width of the zero-mode window for this matrix.
    pub fn default_zero_tol(&self) -> f64 {
        tol::ZERO_MODE_TOL_REL * self.h_norm_inf
    }
}

/// Householder reduction of a symmetric matrix (row-major in `v`) to
/// tridiagonal form, accumulating the transformation in `v`.
fn tred2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) {
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += item.abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in (j + 1)..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..n.saturating_sub(1) {
        v[(n - 1) * n + i] = v[i * n + i];
        v[i * n + i] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[k * n + i + 1] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[k * n + i + 1] * v[k * n + j];
                }
                for k in 0..=i {
                    v[k * n + j] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[k * n + i + 1] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
        v[(n - 1) * n + j] = 0.0;
    }
    v[(n - 1) * n + (n - 1)] = 1.0;
    e[0] = 0.0;
}

const QL_ITERATION_CAP: usize = 64;

/// Implicit-shift QL on the tridiagonal (d, e), rotating the accumulated
/// transformation in `v` so its columns end up as eigenvectors.
fn tql2(n: usize, v: &mut [f64], d: &mut [f64], e: &mut [f64]) -> Result<()> {
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0_f64;
    let mut tst1 = 0.0_f64;
    let eps = 2.0_f64.powi(-52);
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        // e[n-1] is zero, so the scan always terminates inside the array.
        while e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_ITERATION_CAP {
                    return Err(Error::NoConvergence { order: n, residual: e[l].abs() });
                }

                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0_f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0_f64;
                let mut s2 = 0.0_f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let gi = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * gi;
                    d[i + 1] = h + s * (c * gi + s * d[i]);
                    for k in 0..n {
                        let hk = v[k * n + i + 1];
                        v[k * n + i + 1] = s * v[k * n + i] + c * hk;
                        v[k * n + i] = c * v[k * n + i] - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;

                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Ascending selection sort, swapping eigenvector columns along.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().take(n).skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for j in 0..n {
                v.swap(j * n + i, j * n + k);
            }
        }
    }
    Ok(())
}

/// Diagonalizes a real symmetric matrix, returning the full eigensystem with
/// eigenvalues ascending.
pub fn eigendecompose(h: &SymmetricMatrix) -> Result<Spectrum> {
    let n = h.order();
    assert!(n > 0, "empty matrix");
    let mut v = Vec::with_capacity(n * n);
    for i in 0..n {
        v.extend_from_slice(h.row(i));
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tred2(n, &mut v, &mut d, &mut e);
    tql2(n, &mut v, &mut d, &mut e)?;

    let eigenvectors = (0..n)
        .map(|k| (0..n).map(|i| v[i * n + k]).collect())
        .collect();
    Ok(Spectrum { eigenvalues: d, eigenvectors, h_norm_inf: h.norm_inf() })
}

/// Orthonormal basis of the zero-energy band.
#[derive(Debug, Clone)]
pub struct FlatBandBasis {
    /// Orthonormal zero-mode vectors, in ascending original spectrum order.
    pub vectors: Vec<Vec<f64>>,
    /// Smallest |eigenvalue| outside the zero-mode window.
    pub gap: f64,
    /// Half-width of the window that selected the band.
    pub tol: f64,
    /// Largest amplitude any basis vector carries on a minority site.
    pub max_minority_amp: f64,
}

impl FlatBandBasis {
    pub fn dimension(&self) -> usize {
        self.vectors.len()
    }
}

/// Selects all eigenvectors with |eigenvalue| <= tol and re-orthonormalizes
/// them by modified Gram-Schmidt in ascending original index order. `tol`
/// defaults to the spectrum's zero-mode window.
pub fn flat_band_basis(
    spectrum: &Spectrum,
    lattice: &Lattice,
    tol: Option<f64>,
) -> Result<FlatBandBasis> {
    let tol = tol.unwrap_or_else(|| spectrum.default_zero_tol());
    assert_eq!(
        spectrum.order(),
        lattice.sites(),
        "spectrum does not match lattice"
    );

    let mut vectors: Vec<Vec<f64>> = Vec::new();
    let mut gap = f64::INFINITY;
    for (k, &w) in spectrum.eigenvalues.iter().enumerate() {
        if w.abs() <= tol {
            vectors.push(spectrum.eigenvectors[k].clone());
        } else {
            gap = gap.min(w.abs());
        }
    }
    if vectors.is_empty() {
        return Err(Error::EmptyBand { tol });
    }
    if gap <= tol::GAP_COLLAPSE_FACTOR * tol {
        return Err(Error::GapCollapse { gap, tol });
    }

    // Modified Gram-Schmidt; the input is orthonormal to solver precision,
    // so this only polishes rounding in the degenerate subspace.
    for i in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(i);
        let target = &mut rest[0];
        for prev in done.iter() {
            let overlap: f64 = prev.iter().zip(target.iter()).map(|(p, t)| p * t).sum();
            for (t, p) in target.iter_mut().zip(prev.iter()) {
                *t -= overlap * p;
            }
        }
        let norm = target.iter().map(|t| t * t).sum::<f64>().sqrt();
        for t in target.iter_mut() {
            *t /= norm;
        }
    }

    let mut max_minority_amp = 0.0_f64;
    for vector in &vectors {
        for (site, amp) in vector.iter().enumerate() {
            if !lattice.is_majority(site) {
                max_minority_amp = max_minority_amp.max(amp.abs());
            }
        }
    }

    Ok(FlatBandBasis { vectors, gap, tol, max_minority_amp })
}

/// Closed-form compact zero mode of `cell` as a vector over all sites.
///
/// Double-comb cells keep a compact mode for arbitrary hopping disorder (the
/// realized tooth couplings set the amplitude ratio), so disordered lattices
/// are only rejected for the other geometries or when onsite terms are
/// present.
pub fn analytic_cls(lattice: &Lattice, cell: i64) -> Result<Vec<f64>> {
    let n = lattice.cells() as i64;
    let cell = cell.rem_euclid(n);
    let mut psi = vec![0.0; lattice.sites()];
    let a = lattice.site_index(SiteId::new(SiteLabel::A, cell))?;
    let b = lattice.site_index(SiteId::new(SiteLabel::B, cell))?;
    let c = lattice.site_index(SiteId::new(SiteLabel::C, cell))?;
    let onsite_clean = lattice.onsite.iter().all(|&w| w == 0.0);

    match lattice.geometry {
        Geometry::DoubleComb { .. } => {
            if !onsite_clean {
                return Err(Error::UnsupportedDisorder("double-comb (onsite terms)"));
            }
            let v1 = lattice.coupling(a, b).expect("tooth edge a-b");
            let v2 = lattice.coupling(b, c).expect("tooth edge b-c");
            let r = v2 / v1;
            let norm = (1.0 + r * r).sqrt();
            psi[a] = r / norm;
            psi[c] = -1.0 / norm;
        }
        Geometry::Diamond { .. } => {
            if lattice.disordered || !onsite_clean {
                return Err(Error::UnsupportedDisorder("diamond"));
            }
            psi[a] = 1.0 / 2.0_f64.sqrt();
            psi[c] = -1.0 / 2.0_f64.sqrt();
        }
        Geometry::Stub { j, v, .. } => {
            if lattice.disordered || !onsite_clean {
                return Err(Error::UnsupportedDisorder("stub"));
            }
            let a_next = lattice.site_index(SiteId::new(SiteLabel::A, cell + 1))?;
            let eta = v / j;
            let norm = (2.0 + eta * eta).sqrt();
            psi[a] = 1.0 / norm;
            psi[a_next] = 1.0 / norm;
            psi[c] = -eta / norm;
        }
    }
    Ok(psi)
}

/// Overlap of the compact modes of neighboring cells. Zero for the
/// double-comb and diamond geometries; the stub modes share one tooth site.
pub fn cls_overlap(lattice: &Lattice, cell: i64) -> Result<f64> {
    let left = analytic_cls(lattice, cell)?;
    let right = analytic_cls(lattice, cell + 1)?;
    Ok(left.iter().zip(&right).map(|(l, r)| l * r).sum())
}

/// Writes eigenvalues ascending, one per line, full 17-digit precision.
pub fn write_spectrum<W: Write>(spectrum: &Spectrum, out: &mut W) -> io::Result<()> {
    for w in &spectrum.eigenvalues {
        writeln!(out, "{w:.16e}")?;
    }
    Ok(())
}
