//! A two-level emitter coupled to one lattice site, restricted to the
//! single-excitation sector.
//!
//! The full Hamiltonian is the (S+1)-dimensional symmetric matrix over the
//! lattice sites plus the emitter; evolution is computed exactly by spectral
//! resolution, so there is no time-stepping error at any sample time. When
//! the coupling sits far below the spectral gap, the emitter talks only to
//! the zero-energy band and the dynamics reduces to a vacuum Rabi
//! oscillation with the single lifted mode described by `EffectiveModel`.

use crate::error::{Error, Result};
use crate::lattice::{field_hamiltonian, Lattice, SiteId};
use crate::matrix::SymmetricMatrix;
use crate::spectral::{eigendecompose, FlatBandBasis, Spectrum};
use crate::tol;
use num_complex::Complex64;
use std::io::{self, Write};

/// Default emitter-lattice coupling, in backbone-hopping units.
pub const DEFAULT_COUPLING: f64 = 1e-3;

/// Default number of uniform steps over one full Rabi period [0, 2 tau].
pub const DEFAULT_TRACE_SAMPLES: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterConfig {
    /// Emitter transition energy; zero puts it on resonance with the
    /// zero-energy band.
    pub omega_e: f64,
    /// Emitter-site coupling strength, must be non-negative (zero is allowed
    /// only for assembling decoupled test Hamiltonians).
    pub g: f64,
    /// Lattice site the emitter attaches to.
    pub x0: SiteId,
}

impl EmitterConfig {
    pub fn new(g: f64, x0: SiteId) -> Self {
        EmitterConfig { omega_e: 0.0, g, x0 }
    }
}

/// Assembles the single-excitation Hamiltonian: the lattice block, the
/// emitter energy on the last diagonal entry, and one coupling g between the
/// emitter and its attachment site.
pub fn full_hamiltonian(lattice: &Lattice, emitter: &EmitterConfig) -> Result<SymmetricMatrix> {
    if !emitter.g.is_finite() || emitter.g < 0.0 {
        return Err(Error::BadParams(format!(
            "coupling g must be non-negative and finite, got {}",
            emitter.g
        )));
    }
    if !emitter.omega_e.is_finite() {
        return Err(Error::BadParams("omega_e must be finite".into()));
    }
    let x0 = lattice.site_index(emitter.x0)?;
    let sites = lattice.sites();
    let field = field_hamiltonian(lattice);
    let mut h = SymmetricMatrix::zeros(sites + 1);
    for i in 0..sites {
        for j in i..sites {
            let value = field.get(i, j);
            if value != 0.0 {
                h.set(i, j, value);
            }
        }
    }
    h.set(sites, sites, emitter.omega_e);
    if emitter.g != 0.0 {
        h.set(x0, sites, emitter.g);
    }
    Ok(h)
}

/// Wavefunction samples of an initially excited emitter: the emitter
/// amplitude and all site amplitudes at each requested time.
#[derive(Debug, Clone)]
pub struct WavefunctionTrace {
    pub times: Vec<f64>,
    pub emitter: Vec<Complex64>,
    /// `field[t][x]` is the amplitude on site x at `times[t]`.
    pub field: Vec<Vec<Complex64>>,
}

impl WavefunctionTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Total excitation norm at sample `t`; unity up to rounding.
    pub fn norm_sq(&self, t: usize) -> f64 {
        self.emitter[t].norm_sqr()
            + self.field[t].iter().map(|a| a.norm_sqr()).sum::<f64>()
    }

    pub fn emitter_population(&self, t: usize) -> f64 {
        self.emitter[t].norm_sqr()
    }
}

/// Uniform grid of `samples + 1` points covering one Rabi period
/// [0, 2 tau]; even `samples` places t = tau exactly on the grid.
pub fn default_time_grid(half_period: f64, samples: usize) -> Vec<f64> {
    assert!(samples >= 2, "need at least two steps");
    let step = 2.0 * half_period / samples as f64;
    (0..=samples).map(|i| i as f64 * step).collect()
}

/// Evolves the excited emitter under a precomputed spectrum of the full
/// Hamiltonian (emitter index = order - 1) by spectral resolution.
pub fn evolve_spectrum(spectrum: &Spectrum, times: &[f64]) -> WavefunctionTrace {
    let n = spectrum.order();
    let e_idx = n - 1;
    // Expansion coefficients of |e> over the eigenbasis.
    let weights: Vec<f64> = spectrum.eigenvectors.iter().map(|v| v[e_idx]).collect();

    let mut emitter = Vec::with_capacity(times.len());
    let mut field = Vec::with_capacity(times.len());
    for &t in times {
        let mut amps = vec![Complex64::new(0.0, 0.0); n];
        for (k, vector) in spectrum.eigenvectors.iter().enumerate() {
            let phase = Complex64::from_polar(weights[k], -spectrum.eigenvalues[k] * t);
            if phase.norm_sqr() == 0.0 {
                continue;
            }
            for (amp, component) in amps.iter_mut().zip(vector) {
                *amp += phase * component;
            }
        }
        emitter.push(amps[e_idx]);
        amps.truncate(e_idx);
        field.push(amps);
    }
    WavefunctionTrace { times: times.to_vec(), emitter, field }
}

/// Diagonalizes the full Hamiltonian and evolves the excited emitter.
pub fn evolve(h: &SymmetricMatrix, times: &[f64]) -> Result<WavefunctionTrace> {
    let spectrum = eigendecompose(h)?;
    Ok(evolve_spectrum(&spectrum, times))
}

/// Reduction of the emitter-band problem to a single lifted mode.
#[derive(Debug, Clone)]
pub struct EffectiveModel {
    /// Couplings g_k = g <x0|psi_k> to the zero-energy basis vectors.
    pub mode_couplings: Vec<f64>,
    /// Vacuum Rabi frequency lambda = g * sqrt(sum_k <x0|psi_k>^2) > 0.
    pub rabi_frequency: f64,
    /// First emitter-population zero, tau = pi / (2 lambda).
    pub half_period: f64,
    /// Unit-norm lifted mode over the lattice sites: the normalized
    /// projection of the attachment site onto the zero-energy band.
    pub lifted_mode: Vec<f64>,
    /// Smallest |eigenvalue| outside the band, copied from the basis.
    pub gap: f64,
    /// Perturbation parameter g / gap; callers should warn past 1e-2.
    pub coupling_to_gap: f64,
}

/// Projects the attachment site onto the zero-energy band. Errors when the
/// coupling is not perturbative (g >= gap) or when the site carries no band
/// weight (every minority site does that, by sublattice structure).
pub fn effective_model(
    basis: &FlatBandBasis,
    lattice: &Lattice,
    emitter: &EmitterConfig,
) -> Result<EffectiveModel> {
    if !emitter.g.is_finite() || emitter.g <= 0.0 {
        return Err(Error::BadParams(format!(
            "coupling g must be positive and finite, got {}",
            emitter.g
        )));
    }
    let x0 = lattice.site_index(emitter.x0)?;
    if emitter.g >= basis.gap {
        return Err(Error::WeakCouplingViolated { g: emitter.g, gap: basis.gap });
    }

    let mode_couplings: Vec<f64> = basis
        .vectors
        .iter()
        .map(|v| emitter.g * v[x0])
        .collect();
    let floor = tol::COUPLING_FLOOR_REL * emitter.g;
    if mode_couplings.iter().all(|gk| gk.abs() <= floor) {
        return Err(Error::ZeroWeight);
    }

    let rabi_frequency = mode_couplings
        .iter()
        .map(|gk| gk * gk)
        .sum::<f64>()
        .sqrt();
    let mut lifted_mode = vec![0.0; lattice.sites()];
    for (gk, vector) in mode_couplings.iter().zip(&basis.vectors) {
        let weight = gk / rabi_frequency;
        for (site, component) in lifted_mode.iter_mut().zip(vector) {
            *site += weight * component;
        }
    }

    Ok(EffectiveModel {
        mode_couplings,
        half_period: std::f64::consts::PI / (2.0 * rabi_frequency),
        lifted_mode,
        gap: basis.gap,
        coupling_to_gap: emitter.g / basis.gap,
        rabi_frequency,
    })
}

/// Overlap between the lifted mode and the normalized photonic wavefunction
/// at t = tau: |<psi~|phi(tau)>|^2 / ||phi(tau)||^2. The trace must sample
/// t = tau (default grids do).
pub fn lifted_mode_fidelity(model: &EffectiveModel, trace: &WavefunctionTrace) -> Result<f64> {
    let tau = model.half_period;
    let idx = trace
        .times
        .iter()
        .enumerate()
        .min_by(|a, b| {
            ((a.1 - tau).abs())
                .partial_cmp(&(b.1 - tau).abs())
                .expect("finite times")
        })
        .map(|(i, _)| i)
        .ok_or(Error::MissingTau { tau })?;
    if (trace.times[idx] - tau).abs() > 1e-9 * tau.max(1.0) {
        return Err(Error::MissingTau { tau });
    }

    let phi = &trace.field[idx];
    let norm_sq: f64 = phi.iter().map(|a| a.norm_sqr()).sum();
    let overlap: Complex64 = model
        .lifted_mode
        .iter()
        .zip(phi)
        .map(|(m, a)| a * m)
        .sum();
    Ok(overlap.norm_sqr() / norm_sq)
}

/// First local minimum of |f_e(t)| along the trace, refined by a parabolic
/// fit through the bracketing samples. Diagnostic companion to the analytic
/// half-period.
pub fn first_emitter_zero(trace: &WavefunctionTrace) -> Option<f64> {
    let mag: Vec<f64> = trace.emitter.iter().map(|a| a.norm()).collect();
    for i in 1..mag.len().saturating_sub(1) {
        if mag[i] <= mag[i - 1] && mag[i] < mag[i + 1] {
            let (t0, t1, t2) = (trace.times[i - 1], trace.times[i], trace.times[i + 1]);
            let (y0, y1, y2) = (mag[i - 1], mag[i], mag[i + 1]);
            let denom = y0 - 2.0 * y1 + y2;
            if denom.abs() < f64::EPSILON {
                return Some(t1);
            }
            let dt = t1 - t0;
            debug_assert!((t2 - t1 - dt).abs() < 1e-9 * dt, "uniform grid expected");
            return Some(t1 + 0.5 * dt * (y0 - y2) / denom);
        }
    }
    None
}

/// Writes the trace as CSV: time, emitter amplitude and population, then one
/// population column per site, 12 significant digits.
pub fn write_trace_csv<W: Write>(
    trace: &WavefunctionTrace,
    lattice: &Lattice,
    out: &mut W,
) -> io::Result<()> {
    write!(out, "t,re_fe,im_fe,pe")?;
    for site in 0..lattice.sites() {
        write!(out, ",p_{}", lattice.site_name(site))?;
    }
    writeln!(out)?;
    for i in 0..trace.len() {
        write!(
            out,
            "{:.11e},{:.11e},{:.11e},{:.11e}",
            trace.times[i],
            trace.emitter[i].re,
            trace.emitter[i].im,
            trace.emitter_population(i)
        )?;
        for amp in &trace.field[i] {
            write!(out, ",{:.11e}", amp.norm_sqr())?;
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{apply_disorder, build_lattice, DisorderSpec, Geometry, SiteLabel};
    use crate::spectral::flat_band_basis;
    use rand_chacha::rand_core::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn double_comb(v1: f64, v2: f64) -> Geometry {
        Geometry::DoubleComb { cells: 20, j: 1.0, v1, v2 }
    }

    fn site(label: SiteLabel, cell: i64) -> SiteId {
        SiteId::new(label, cell)
    }

    fn pipeline(
        geometry: &Geometry,
        width: f64,
        seed: u64,
        emitter: &EmitterConfig,
    ) -> (Lattice, EffectiveModel) {
        let lat = build_lattice(geometry).unwrap();
        let lat = apply_disorder(&lat, &DisorderSpec::new(width, seed)).unwrap();
        let spectrum = eigendecompose(&field_hamiltonian(&lat)).unwrap();
        let basis = flat_band_basis(&spectrum, &lat, None).unwrap();
        let model = effective_model(&basis, &lat, emitter).unwrap();
        (lat, model)
    }

    #[test]
    fn assembly_dimensions_and_coupling_placement() {
        let lat = build_lattice(&double_comb(1.0, 1.0)).unwrap();
        let em = EmitterConfig::new(1e-3, site(SiteLabel::A, 0));
        let h = full_hamiltonian(&lat, &em).unwrap();
        assert_eq!(h.order(), 61);
        assert_eq!(h.get(60, 0), 1e-3);
        assert_eq!(h.get(60, 60), 0.0);
        assert_eq!(h.asymmetry(), 0.0);
    }

    #[test]
    fn zero_coupling_gives_block_diagonal_matrix() {
        let lat = build_lattice(&double_comb(1.0, 1.0)).unwrap();
        let em = EmitterConfig::new(0.0, site(SiteLabel::A, 0));
        let h = full_hamiltonian(&lat, &em).unwrap();
        let s = lat.sites();
        for i in 0..s {
            assert_eq!(h.get(i, s), 0.0);
        }
    }

    #[test]
    fn bad_emitter_parameters_rejected() {
        let lat = build_lattice(&double_comb(1.0, 1.0)).unwrap();
        assert!(matches!(
            full_hamiltonian(&lat, &EmitterConfig::new(-1e-3, site(SiteLabel::A, 0))),
            Err(Error::BadParams(_))
        ));
        let open = crate::lattice::build_lattice_with(
            &double_comb(1.0, 1.0),
            crate::lattice::Boundary::Open,
        )
        .unwrap();
        assert!(matches!(
            full_hamiltonian(&open, &EmitterConfig::new(1e-3, site(SiteLabel::A, 25))),
            Err(Error::BadSite { .. })
        ));
    }

    #[test]
    fn evolution_starts_excited_and_stays_normalized() {
        let em = EmitterConfig::new(1e-3, site(SiteLabel::A, 0));
        let lat = build_lattice(&double_comb(1.0, 1.0)).unwrap();
        let h = full_hamiltonian(&lat, &em).unwrap();
        let spectrum = eigendecompose(&h).unwrap();
        let (_, model) = pipeline(&double_comb(1.0, 1.0), 0.0, 0, &em);
        let grid = default_time_grid(model.half_period, 100);
        let trace = evolve_spectrum(&spectrum, &grid);
        assert!((trace.emitter[0] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        for t in 0..trace.len() {
            assert!(
                (trace.norm_sq(t) - 1.0).abs() <= tol::UNITARITY_TOL,
                "norm drift at sample {t}"
            );
        }
    }

    #[test]
    fn double_comb_rabi_frequency_follows_tooth_ratio() {
        let g = 1e-3;
        for r in [0.5, 1.0, 2.0] {
            let geo = double_comb(1.0, r);
            let em = EmitterConfig::new(g, site(SiteLabel::A, 0));
            let (_, model) = pipeline(&geo, 0.0, 0, &em);
            let expected = g * r / (1.0 + r * r).sqrt();
            assert!(
                (model.rabi_frequency - expected).abs() <= 1e-6 * expected,
                "r={r}: {} vs {expected}",
                model.rabi_frequency
            );

            // Attaching to the other tooth swaps the roles of v1 and v2.
            let em_c = EmitterConfig::new(g, site(SiteLabel::C, 0));
            let (_, model_c) = pipeline(&geo, 0.0, 0, &em_c);
            let expected_c = g / (1.0 + r * r).sqrt();
            assert!((model_c.rabi_frequency - expected_c).abs() <= 1e-6 * expected_c);
        }
    }

    #[test]
    fn emitter_empties_at_half_period() {
        let em = EmitterConfig::new(1e-3, site(SiteLabel::A, 0));
        let lat = build_lattice(&double_comb(1.0, 1.0)).unwrap();
        let h = full_hamiltonian(&lat, &em).unwrap();
        let (_, model) = pipeline(&double_comb(1.0, 1.0), 0.0, 0, &em);
        let trace = evolve(&h, &default_time_grid(model.half_period, 40)).unwrap();
        let mid = trace.times.len() / 2;
        assert!((trace.times[mid] - model.half_period).abs() < 1e-9);
        assert!(
            trace.emitter_population(mid) <= 1e-4,
            "residual population {:.3e}",
            trace.emitter_population(mid)
        );
    }

    #[test]
    fn clean_diamond_lifts_the_local_compact_state() {
        let geo = Geometry::Diamond { cells: 31, j: 1.0 };
        let g = 1e-3;
        let em = EmitterConfig::new(g, site(SiteLabel::A, 0));
        let (lat, model) = pipeline(&geo, 0.0, 0, &em);
        assert!((model.rabi_frequency - g / 2.0_f64.sqrt()).abs() <= 1e-9 * g);
        let cls = crate::spectral::analytic_cls(&lat, 0).unwrap();
        let overlap: f64 = cls.iter().zip(&model.lifted_mode).map(|(a, b)| a * b).sum();
        assert!((overlap.abs() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn rabi_weight_matches_band_projector_diagonal() {
        let em = EmitterConfig::new(1e-3, site(SiteLabel::A, 3));
        let geo = Geometry::Diamond { cells: 11, j: 1.0 };
        let lat = build_lattice(&geo).unwrap();
        let lat = apply_disorder(&lat, &DisorderSpec::new(1.0, 8)).unwrap();
        let spectrum = eigendecompose(&field_hamiltonian(&lat)).unwrap();
        let basis = flat_band_basis(&spectrum, &lat, None).unwrap();
        let model = effective_model(&basis, &lat, &em).unwrap();
        let x0 = lat.site_index(em.x0).unwrap();
        let projector_diag: f64 = basis.vectors.iter().map(|v| v[x0] * v[x0]).sum();
        let lambda_sq = model.rabi_frequency * model.rabi_frequency;
        assert!((lambda_sq - em.g * em.g * projector_diag).abs() <= 1e-10);
    }

    #[test]
    fn minority_attachment_has_no_band_weight() {
        let em = EmitterConfig::new(1e-3, site(SiteLabel::B, 4));
        let geo = Geometry::Diamond { cells: 11, j: 1.0 };
        let lat = build_lattice(&geo).unwrap();
        let spectrum = eigendecompose(&field_hamiltonian(&lat)).unwrap();
        let basis = flat_band_basis(&spectrum, &lat, None).unwrap();
        assert!(matches!(
            effective_model(&basis, &lat, &em),
            Err(Error::ZeroWeight)
        ));
    }

    #[test]
    fn strong_coupling_is_rejected() {
        let em = EmitterConfig::new(0.2, site(SiteLabel::A, 0));
        let geo = Geometry::Diamond { cells: 31, j: 1.0 };
        let lat = build_lattice(&geo).unwrap();
        let spectrum = eigendecompose(&field_hamiltonian(&lat)).unwrap();
        let basis = flat_band_basis(&spectrum, &lat, None).unwrap();
        assert!(basis.gap < 0.2);
        assert!(matches!(
            effective_model(&basis, &lat, &em),
            Err(Error::WeakCouplingViolated { .. })
        ));
    }

    #[test]
    fn dark_states_outnumber_the_lifted_pair() {
        for width in [0.0, 1.0] {
            let geo = Geometry::Diamond { cells: 31, j: 1.0 };
            let em = EmitterConfig::new(1e-3, site(SiteLabel::A, 0));
            let lat = build_lattice(&geo).unwrap();
            let lat = apply_disorder(&lat, &DisorderSpec::new(width, 21)).unwrap();
            let h = full_hamiltonian(&lat, &em).unwrap();
            let spectrum = eigendecompose(&h).unwrap();
            let zero_tol = spectrum.default_zero_tol();
            let e_idx = h.order() - 1;
            let dark: Vec<usize> = (0..h.order())
                .filter(|&k| spectrum.eigenvalues[k].abs() <= zero_tol)
                .collect();
            assert_eq!(dark.len(), 30, "W={width}");
            for k in dark {
                assert!(
                    spectrum.eigenvectors[k][e_idx].abs() <= 1e-8,
                    "zero mode {k} leaks onto the emitter"
                );
            }
        }
    }

    #[test]
    fn lifted_mode_is_gauge_invariant() {
        let geo = Geometry::Diamond { cells: 11, j: 1.0 };
        let em = EmitterConfig::new(1e-3, site(SiteLabel::A, 2));
        let lat = build_lattice(&geo).unwrap();
        let lat = apply_disorder(&lat, &DisorderSpec::new(1.0, 17)).unwrap();
        let spectrum = eigendecompose(&field_hamiltonian(&lat)).unwrap();
        let basis = flat_band_basis(&spectrum, &lat, None).unwrap();
        let model = effective_model(&basis, &lat, &em).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..3 {
            let remixed = remix(&basis, &mut rng);
            let other = effective_model(&remixed, &lat, &em).unwrap();
            assert!((model.rabi_frequency - other.rabi_frequency).abs() <= tol::GAUGE_TOL);
            let mut worst = 0.0_f64;
            for i in 0..lat.sites() {
                for j in 0..lat.sites() {
                    let p = model.lifted_mode[i] * model.lifted_mode[j];
                    let q = other.lifted_mode[i] * other.lifted_mode[j];
                    worst = worst.max((p - q).abs());
                }
            }
            assert!(worst <= tol::GAUGE_TOL, "projector drift {worst:.3e}");
        }
    }

    /// Replaces the basis with an orthogonal re-combination of its vectors.
    pub(crate) fn remix(basis: &FlatBandBasis, rng: &mut ChaCha8Rng) -> FlatBandBasis {
        let dim = basis.dimension();
        let mut q: Vec<Vec<f64>> = (0..dim)
            .map(|_| {
                (0..dim)
                    .map(|_| (rng.next_u64() >> 11) as f64 * 2f64.powi(-53) - 0.5)
                    .collect()
            })
            .collect();
        for i in 0..dim {
            for j in 0..i {
                let dot: f64 = q[i].iter().zip(&q[j]).map(|(a, b)| a * b).sum();
                let prev = q[j].clone();
                for (x, p) in q[i].iter_mut().zip(&prev) {
                    *x -= dot * p;
                }
            }
            let norm: f64 = q[i].iter().map(|x| x * x).sum::<f64>().sqrt();
            for x in q[i].iter_mut() {
                *x /= norm;
            }
        }
        let sites = basis.vectors[0].len();
        let vectors: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                let mut v = vec![0.0; sites];
                for (weight, basis_vec) in q[i].iter().zip(&basis.vectors) {
                    for (out, component) in v.iter_mut().zip(basis_vec) {
                        *out += weight * component;
                    }
                }
                v
            })
            .collect();
        FlatBandBasis { vectors, ..basis.clone() }
    }

    #[test]
    fn fidelity_against_full_evolution() {
        let geo = double_comb(1.0, 0.7);
        let em = EmitterConfig::new(1e-3, site(SiteLabel::A, 0));
        let lat = build_lattice(&geo).unwrap();
        let h = full_hamiltonian(&lat, &em).unwrap();
        let (_, model) = pipeline(&geo, 0.0, 0, &em);
        let trace = evolve(&h, &default_time_grid(model.half_period, 10)).unwrap();
        let fidelity = lifted_mode_fidelity(&model, &trace).unwrap();
        assert!(fidelity >= 1.0 - 1e-4, "fidelity {fidelity}");
    }

    #[test]
    fn fidelity_requires_the_half_period_sample() {
        let geo = double_comb(1.0, 1.0);
        let em = EmitterConfig::new(1e-3, site(SiteLabel::A, 0));
        let lat = build_lattice(&geo).unwrap();
        let h = full_hamiltonian(&lat, &em).unwrap();
        let (_, model) = pipeline(&geo, 0.0, 0, &em);
        // Odd step count: tau falls between samples.
        let trace = evolve(&h, &default_time_grid(model.half_period, 9)).unwrap();
        assert!(matches!(
            lifted_mode_fidelity(&model, &trace),
            Err(Error::MissingTau { .. })
        ));
    }

    #[test]
    fn numeric_first_zero_matches_analytic_half_period() {
        let geo = double_comb(1.0, 1.0);
        let em = EmitterConfig::new(1e-3, site(SiteLabel::A, 0));
        let lat = build_lattice(&geo).unwrap();
        let h = full_hamiltonian(&lat, &em).unwrap();
        let (_, model) = pipeline(&geo, 0.0, 0, &em);
        let trace = evolve(&h, &default_time_grid(model.half_period, 400)).unwrap();
        let zero = first_emitter_zero(&trace).expect("oscillation reaches a minimum");
        let budget = tol::PERTURBATION_FACTOR * model.coupling_to_gap;
        assert!(
            (zero - model.half_period).abs() <= budget * model.half_period,
            "first zero {zero} vs tau {}",
            model.half_period
        );
    }

    #[test]
    fn dynamics_reduce_to_two_levels_within_budget() {
        let geo = double_comb(1.0, 1.0);
        let em = EmitterConfig::new(1e-3, site(SiteLabel::A, 0));
        let lat = build_lattice(&geo).unwrap();
        let h = full_hamiltonian(&lat, &em).unwrap();
        let (_, model) = pipeline(&geo, 0.0, 0, &em);
        let trace = evolve(&h, &default_time_grid(model.half_period, 100)).unwrap();
        let budget = tol::PERTURBATION_FACTOR * model.coupling_to_gap;
        for (i, &t) in trace.times.iter().enumerate() {
            let phase = model.rabi_frequency * t;
            let fe_err = (trace.emitter[i] - Complex64::new(phase.cos(), 0.0)).norm();
            let lifted: Complex64 = model
                .lifted_mode
                .iter()
                .zip(&trace.field[i])
                .map(|(m, a)| a * m)
                .sum();
            let lifted_err = (lifted - Complex64::new(0.0, -phase.sin())).norm();
            assert!(fe_err <= budget, "emitter deviation {fe_err:.3e} at t={t}");
            assert!(lifted_err <= budget, "lifted deviation {lifted_err:.3e} at t={t}");
        }
    }

    #[test]
    fn breakdown_past_the_perturbative_window_is_visible() {
        // Report-only regime check: g at 0.3 * gap no longer produces a clean
        // two-level oscillation.
        let geo = Geometry::Diamond { cells: 31, j: 1.0 };
        let lat = build_lattice(&geo).unwrap();
        let spectrum = eigendecompose(&field_hamiltonian(&lat)).unwrap();
        let basis = flat_band_basis(&spectrum, &lat, None).unwrap();
        let em = EmitterConfig::new(0.3 * basis.gap, site(SiteLabel::A, 0));
        let model = effective_model(&basis, &lat, &em).unwrap();
        let h = full_hamiltonian(&lat, &em).unwrap();
        let trace = evolve(&h, &default_time_grid(model.half_period, 40)).unwrap();
        let fidelity = lifted_mode_fidelity(&model, &trace).unwrap();
        println!("fidelity at g = 0.3 gap: {fidelity:.6}");
        assert!(fidelity.is_finite() && fidelity <= 1.0);
    }

    #[test]
    fn trace_csv_layout() {
        let geo = Geometry::Diamond { cells: 3, j: 1.0 };
        let em = EmitterConfig::new(1e-3, site(SiteLabel::A, 0));
        let lat = build_lattice(&geo).unwrap();
        let h = full_hamiltonian(&lat, &em).unwrap();
        let trace = evolve(&h, &[0.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &lat, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("t,re_fe,im_fe,pe,p_a0,p_b0,p_c0"));
        let first: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(first.len(), 4 + lat.sites());
        assert_eq!(first[1].parse::<f64>().unwrap(), 1.0);
        assert_eq!(text.lines().count(), 3);
    }
}
