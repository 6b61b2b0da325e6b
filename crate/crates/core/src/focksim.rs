//! Truncated multimode Fock-space simulator used as a brute-force oracle.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_inner, norm_sqr};
use crate::network::{
    build_optimal_network, mesh_decompose, mixer_block, BeamsplitterMesh, LinearNetwork,
    WeightVector,
};
use crate::qfim::{qfim_assemble, qfim_coefficients, qfim_mixed_coefficients};
use crate::states::{
    fock_embed, moments_of, poisson_tail, pure_fock, LnFactorial, SingleModeState, SpectralState,
    DEFAULT_TAIL_THRESHOLD,
};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Occupation tuples with total photon number at most `max_total`, stored
/// sector by sector in lexicographic order.
#[derive(Debug)]
pub struct FockBasis {
    modes: usize,
    max_total: usize,
    occupations: Vec<u16>,
    sector_starts: Vec<usize>,
    index: HashMap<Vec<u16>, usize>,
}

impl FockBasis {
    pub fn new(modes: usize, max_total: usize) -> Self {
        let mut occupations = Vec::new();
        let mut sector_starts = Vec::with_capacity(max_total + 2);
        let mut buf = vec![0u16; modes];
        for s in 0..=max_total {
            sector_starts.push(occupations.len() / modes.max(1));
            enumerate_sector(&mut buf, 0, s, &mut occupations);
        }
        sector_starts.push(occupations.len() / modes.max(1));
        let len = occupations.len() / modes.max(1);
        let mut index = HashMap::with_capacity(len);
        for i in 0..len {
            index.insert(occupations[i * modes..(i + 1) * modes].to_vec(), i);
        }
        Self {
            modes,
            max_total,
            occupations,
            sector_starts,
            index,
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn max_total(&self) -> usize {
        self.max_total
    }

    pub fn len(&self) -> usize {
        self.sector_starts[self.max_total + 1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn occupation(&self, i: usize) -> &[u16] {
        &self.occupations[i * self.modes..(i + 1) * self.modes]
    }

    pub fn index_of(&self, occ: &[u16]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// Index range of the sector with `s` photons.
    pub fn sector(&self, s: usize) -> std::ops::Range<usize> {
        self.sector_starts[s]..self.sector_starts[s + 1]
    }
}

fn enumerate_sector(buf: &mut [u16], pos: usize, remaining: usize, out: &mut Vec<u16>) {
    if pos + 1 == buf.len() {
        buf[pos] = remaining as u16;
        out.extend_from_slice(buf);
        return;
    }
    for k in 0..=remaining {
        buf[pos] = k as u16;
        enumerate_sector(buf, pos + 1, remaining - k, out);
    }
}

/// Pure state on a truncated multimode Fock space.
#[derive(Clone, Debug)]
pub struct MultimodeFockState {
    basis: Arc<FockBasis>,
    pub amplitudes: Vec<Complex64>,
    /// Probability mass removed by the truncation before renormalizing.
    pub tail_mass: f64,
}

impl MultimodeFockState {
    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn modes(&self) -> usize {
        self.basis.modes
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn amplitude(&self, occ: &[u16]) -> Complex64 {
        self.basis
            .index_of(occ)
            .map_or(ZERO, |i| self.amplitudes[i])
    }

    /// Squared norm of each total-photon sector.
    pub fn sector_norms(&self) -> Vec<f64> {
        (0..=self.basis.max_total)
            .map(|s| norm_sqr(&self.amplitudes[self.basis.sector(s)]))
            .collect()
    }

    pub fn inner(&self, other: &Self) -> Complex64 {
        hermitian_inner(&self.amplitudes, &other.amplitudes)
    }
}

/// Incoherent mixture of pure multimode states.
#[derive(Clone, Debug)]
pub struct MixedFockState {
    pub components: Vec<MultimodeFockState>,
    pub eigenvalues: Vec<f64>,
    pub tail_mass: f64,
}

/// Exact single-mode amplitudes `⟨n|ψ⟩` up to `cutoff`, not renormalized,
/// with the mass beyond `cutoff`.
fn raw_amplitudes(normalized: &[Complex64], tail: f64) -> Vec<Complex64> {
    let s = (1.0 - tail).max(0.0).sqrt();
    normalized.iter().map(|z| z * s).collect()
}

fn product_state(
    psi_raw: &[Complex64],
    psi_tail: f64,
    alpha: Complex64,
    modes: usize,
    basis: Arc<FockBasis>,
) -> MultimodeFockState {
    let cutoff = basis.max_total;
    let coh = pure_fock(&SingleModeState::coherent(alpha), cutoff).expect("coherent embedding");
    let coh_raw = raw_amplitudes(&coh.coefficients, coh.tail_mass);
    let x = alpha.norm_sqr();
    let mut amplitudes = vec![ZERO; basis.len()];
    let mut occ = vec![0u16; modes];
    let mut tail = psi_tail;
    for (n1, a) in psi_raw.iter().enumerate().take(cutoff + 1) {
        if a.norm_sqr() == 0.0 {
            continue;
        }
        tail += a.norm_sqr() * poisson_tail(x, cutoff - n1);
        for (n2, b) in coh_raw.iter().enumerate().take(cutoff - n1 + 1) {
            occ[0] = n1 as u16;
            occ[1] = n2 as u16;
            let i = basis.index_of(&occ).expect("occupation within cutoff");
            amplitudes[i] = a * b;
        }
    }
    let norm = norm_sqr(&amplitudes).sqrt();
    if norm > 0.0 {
        amplitudes.iter_mut().for_each(|z| *z /= norm);
    }
    MultimodeFockState {
        basis,
        amplitudes,
        tail_mass: tail,
    }
}

/// `|ψ⟩ ⊗ |α⟩ ⊗ |0⟩ ⋯` at total-photon cutoff `cutoff`.
pub fn prepare_input(
    psi: &SingleModeState,
    alpha: Complex64,
    modes: usize,
    cutoff: usize,
) -> Result<MultimodeFockState> {
    prepare_input_checked(psi, alpha, modes, cutoff, DEFAULT_TAIL_THRESHOLD)
}

pub fn prepare_input_checked(
    psi: &SingleModeState,
    alpha: Complex64,
    modes: usize,
    cutoff: usize,
    threshold: f64,
) -> Result<MultimodeFockState> {
    if modes < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: modes,
        });
    }
    let p = pure_fock(psi, cutoff)?;
    let basis = Arc::new(FockBasis::new(modes, cutoff));
    let state = product_state(
        &raw_amplitudes(&p.coefficients, p.tail_mass),
        p.tail_mass,
        alpha,
        modes,
        basis,
    );
    if state.tail_mass > threshold {
        return Err(Error::CutoffTooSmall {
            cutoff,
            tail_mass: state.tail_mass,
            threshold,
        });
    }
    Ok(state)
}

/// Spectral components `|v_k⟩ ⊗ |α⟩ ⊗ |0⟩ ⋯` of a mixed input.
pub fn prepare_mixed_input(
    rho: &SpectralState,
    alpha: Complex64,
    modes: usize,
    cutoff: usize,
    threshold: f64,
) -> Result<MixedFockState> {
    if modes < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: modes,
        });
    }
    let basis = Arc::new(FockBasis::new(modes, cutoff));
    let mut components = Vec::with_capacity(rho.eigenvalues.len());
    let mut tail = rho.truncation_mass;
    for (k, v) in rho.eigenvectors.iter().enumerate() {
        let t = rho.fock_tail_masses[k];
        let c = product_state(&raw_amplitudes(v, t), t, alpha, modes, basis.clone());
        tail += rho.eigenvalues[k] * c.tail_mass;
        components.push(c);
    }
    if tail > threshold {
        return Err(Error::CutoffTooSmall {
            cutoff,
            tail_mass: tail,
            threshold,
        });
    }
    Ok(MixedFockState {
        components,
        eigenvalues: rho.eigenvalues.clone(),
        tail_mass: tail,
    })
}

/// Builds a state directly from occupation/amplitude pairs.
pub fn state_from_amplitudes(
    modes: usize,
    cutoff: usize,
    entries: &[(Vec<u16>, Complex64)],
) -> Result<MultimodeFockState> {
    let basis = Arc::new(FockBasis::new(modes, cutoff));
    let mut amplitudes = vec![ZERO; basis.len()];
    for (occ, a) in entries {
        if occ.len() != modes {
            return Err(Error::DimensionMismatch {
                expected: modes,
                found: occ.len(),
            });
        }
        let i = basis.index_of(occ).ok_or_else(|| {
            Error::InvalidArgument(format!("occupation {occ:?} exceeds cutoff {cutoff}"))
        })?;
        amplitudes[i] += a;
    }
    Ok(MultimodeFockState {
        basis,
        amplitudes,
        tail_mass: 0.0,
    })
}

/// Action of a two-mode mixer on the `s`-photon sector, as an
/// `(s+1) × (s+1)` row-major matrix indexed by first-mode photon numbers.
pub fn mixer_sector_matrix(
    t: [[Complex64; 2]; 2],
    s: usize,
    lnf: &mut LnFactorial,
) -> Vec<Complex64> {
    // a† -> t00 a† + t10 b†, b† -> t01 a† + t11 b†
    let dim = s + 1;
    let mut m = vec![ZERO; dim * dim];
    for p in 0..=s {
        let q = s - p;
        for i in 0..=p {
            let fa = t[0][0].powi(i as i32) * t[1][0].powi((p - i) as i32);
            if fa == ZERO {
                continue;
            }
            for j in 0..=q {
                let fb = t[0][1].powi(j as i32) * t[1][1].powi((q - j) as i32);
                if fb == ZERO {
                    continue;
                }
                let k = i + j;
                let ln = lnf.get(p) - lnf.get(i) - lnf.get(p - i) + lnf.get(q)
                    - lnf.get(j)
                    - lnf.get(q - j)
                    + 0.5 * (lnf.get(k) + lnf.get(s - k) - lnf.get(p) - lnf.get(q));
                m[k * dim + p] += fa * fb * ln.exp();
            }
        }
    }
    m
}

/// Groups of basis indices that a mixer on `(mode, mode+1)` couples,
/// ordered by the photon number in `mode`.
fn pair_groups(basis: &FockBasis, mode: usize) -> Vec<Vec<usize>> {
    let mut groups = Vec::new();
    let mut key = vec![0u16; basis.modes];
    for i in 0..basis.len() {
        let occ = basis.occupation(i);
        if occ[mode + 1] != 0 {
            continue;
        }
        let s = occ[mode] as usize;
        key.copy_from_slice(occ);
        let mut g = Vec::with_capacity(s + 1);
        for k in 0..=s {
            key[mode] = k as u16;
            key[mode + 1] = (s - k) as u16;
            g.push(basis.index_of(&key).expect("sector partner exists"));
        }
        groups.push(g);
    }
    groups
}

/// Applies every mixer and the output phases of `mesh`.
pub fn apply_mesh(
    mut state: MultimodeFockState,
    mesh: &BeamsplitterMesh,
) -> Result<MultimodeFockState> {
    let modes = state.modes();
    if mesh.modes() != modes {
        return Err(Error::DimensionMismatch {
            expected: modes,
            found: mesh.modes(),
        });
    }
    let before = state.sector_norms();
    let mut lnf = LnFactorial::new();
    let mut groups: HashMap<usize, Vec<Vec<usize>>> = HashMap::new();
    let mut buf = Vec::new();
    for e in &mesh.elements {
        if e.mode + 1 >= modes {
            return Err(Error::IndexOutOfRange {
                index: e.mode + 1,
                modes,
            });
        }
        let t = mixer_block(e.theta, e.phi);
        let mats: Vec<Vec<Complex64>> = (0..=state.basis.max_total)
            .map(|s| mixer_sector_matrix(t, s, &mut lnf))
            .collect();
        let gs = groups
            .entry(e.mode)
            .or_insert_with(|| pair_groups(&state.basis, e.mode));
        for g in gs.iter() {
            let s = g.len() - 1;
            let m = &mats[s];
            buf.clear();
            buf.extend(g.iter().map(|&i| state.amplitudes[i]));
            for (row, &i) in g.iter().enumerate() {
                let mut acc = ZERO;
                for (col, x) in buf.iter().enumerate() {
                    acc += m[row * (s + 1) + col] * x;
                }
                state.amplitudes[i] = acc;
            }
        }
    }
    apply_number_phases(&mut state, &mesh.output_phases, 1.0);
    let after = state.sector_norms();
    let deviation = before
        .iter()
        .zip(&after)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if deviation > 1e-12 {
        return Err(Error::ConservationViolated { deviation });
    }
    Ok(state)
}

/// Applies a linear network through its mixer-mesh realization.
pub fn apply_unitary(
    state: MultimodeFockState,
    network: &LinearNetwork,
) -> Result<MultimodeFockState> {
    apply_mesh(state, &mesh_decompose(network))
}

/// Encoding phases `θ_j`, one per mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseEncoding {
    pub thetas: Vec<f64>,
}

impl PhaseEncoding {
    pub fn zeros(modes: usize) -> Self {
        Self {
            thetas: vec![0.0; modes],
        }
    }
}

fn apply_number_phases(state: &mut MultimodeFockState, phases: &[f64], sign: f64) {
    if phases.iter().all(|p| *p == 0.0) {
        return;
    }
    for i in 0..state.amplitudes.len() {
        let occ = state.basis.occupation(i);
        let total: f64 = occ.iter().zip(phases).map(|(n, p)| *n as f64 * p).sum();
        state.amplitudes[i] *= Complex64::from_polar(1.0, sign * total);
    }
}

/// Multiplies each amplitude by `exp(-i Σ_j θ_j n_j)`.
pub fn apply_phases(
    mut state: MultimodeFockState,
    enc: &PhaseEncoding,
) -> Result<MultimodeFockState> {
    if enc.thetas.len() != state.modes() {
        return Err(Error::DimensionMismatch {
            expected: state.modes(),
            found: enc.thetas.len(),
        });
    }
    apply_number_phases(&mut state, &enc.thetas, -1.0);
    Ok(state)
}

/// `⟨n_j⟩` and `⟨{n_j, n_k}⟩`.
pub fn number_moments(state: &MultimodeFockState) -> (Vec<f64>, Array2<f64>) {
    let m = state.modes();
    let mut means = vec![0.0; m];
    let mut anti = Array2::<f64>::zeros((m, m));
    for (i, a) in state.amplitudes.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let occ = state.basis.occupation(i);
        for j in 0..m {
            let nj = occ[j] as f64;
            means[j] += p * nj;
            for k in 0..m {
                anti[[j, k]] += 2.0 * p * nj * occ[k] as f64;
            }
        }
    }
    (means, anti)
}

/// `𝓕_jk = 2⟨{n_j, n_k}⟩ - 4⟨n_j⟩⟨n_k⟩` for a pure state.
pub fn qfim_bruteforce_pure(state: &MultimodeFockState) -> Array2<f64> {
    let (means, anti) = number_moments(state);
    let m = means.len();
    Array2::from_shape_fn((m, m), |(j, k)| {
        2.0 * anti[[j, k]] - 4.0 * means[j] * means[k]
    })
}

/// Mixed-state QFIM from spectral components, summing over all pairs
/// including `a = b`.
pub fn qfim_bruteforce_mixed(
    components: &[MultimodeFockState],
    eigenvalues: &[f64],
) -> Result<Array2<f64>> {
    let k = components.len();
    if k != eigenvalues.len() || k == 0 {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: eigenvalues.len(),
        });
    }
    let mut deviation = 0.0f64;
    for a in 0..k {
        for b in a..k {
            let mut g = components[a].inner(&components[b]);
            if a == b {
                g -= 1.0;
            }
            deviation = deviation.max(g.norm());
        }
    }
    if deviation > 1e-8 {
        return Err(Error::NonOrthogonal { deviation });
    }
    let m = components[0].modes();
    let mut f = Array2::<f64>::zeros((m, m));
    for (c, lam) in components.iter().zip(eigenvalues) {
        let (_, anti) = number_moments(c);
        f.scaled_add(2.0 * lam, &anti);
    }
    // ⟨a|n_j|b⟩ for every mode
    let mut nmat = vec![ZERO; m * k * k];
    for a in 0..k {
        for b in 0..k {
            let (ca, cb) = (&components[a].amplitudes, &components[b].amplitudes);
            let basis = &components[a].basis;
            for i in 0..ca.len() {
                let z = ca[i].conj() * cb[i];
                if z == ZERO {
                    continue;
                }
                let occ = basis.occupation(i);
                for j in 0..m {
                    nmat[(j * k + a) * k + b] += z * occ[j] as f64;
                }
            }
        }
    }
    for a in 0..k {
        for b in 0..k {
            let (la, lb) = (eigenvalues[a], eigenvalues[b]);
            if la + lb < 1e-14 {
                continue;
            }
            let wgt = 8.0 * la * lb / (la + lb);
            for j in 0..m {
                for l in 0..m {
                    let x = nmat[(j * k + a) * k + b] * nmat[(l * k + b) * k + a];
                    f[[j, l]] -= wgt * x.re;
                }
            }
        }
    }
    Ok(f)
}

/// Exact photon-counting distribution over occupation tuples.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonCountDistribution {
    pub modes: usize,
    pub entries: Vec<(Vec<u16>, f64)>,
}

impl PhotonCountDistribution {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn probability(&self, occ: &[u16]) -> f64 {
        self.entries
            .iter()
            .find(|(o, _)| o.as_slice() == occ)
            .map_or(0.0, |(_, p)| *p)
    }

    /// CSV with header `n1,...,nm,probability`.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for j in 1..=self.modes {
            let _ = write!(s, "n{j},");
        }
        s.push_str("probability\n");
        for (occ, p) in &self.entries {
            for n in occ {
                let _ = write!(s, "{n},");
            }
            let _ = writeln!(s, "{:.17e}", p);
        }
        s
    }
}

pub fn photon_count_distribution(state: &MultimodeFockState) -> PhotonCountDistribution {
    let entries = (0..state.amplitudes.len())
        .map(|i| {
            (
                state.basis.occupation(i).to_vec(),
                state.amplitudes[i].norm_sqr(),
            )
        })
        .collect();
    PhotonCountDistribution {
        modes: state.modes(),
        entries,
    }
}

/// Linear optics placed between the encoding and the detectors.
#[derive(Clone, Debug, PartialEq)]
pub enum Recombiner {
    AdjointOfNetwork,
    Explicit(LinearNetwork),
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementConfig {
    pub recombiner: Recombiner,
    pub operating_point: PhaseEncoding,
}

/// Photon-counting Fisher information on `q = wᵀθ`, varying the phases as
/// `θ = θ_op + q w/|w|²`.
///
/// The amplitude derivative comes from inserting `-i n^W` with
/// `n^W = Σ_j w_j n_j/|w|²` before the recombiner.
pub fn cfi_photon_counting(
    input: &MultimodeFockState,
    network: &LinearNetwork,
    w: &WeightVector,
    cfg: &MeasurementConfig,
) -> Result<f64> {
    let encoded = apply_unitary(input.clone(), network)?;
    let recombiner = recombiner_mesh(network, &cfg.recombiner)?;
    cfi_from_encoded(&encoded, recombiner.as_ref(), w, &cfg.operating_point)
}

fn recombiner_mesh(network: &LinearNetwork, r: &Recombiner) -> Result<Option<BeamsplitterMesh>> {
    Ok(match r {
        Recombiner::AdjointOfNetwork => Some(mesh_decompose(&network.adjoint())),
        Recombiner::Explicit(v) => {
            if v.modes() != network.modes() {
                return Err(Error::DimensionMismatch {
                    expected: network.modes(),
                    found: v.modes(),
                });
            }
            Some(mesh_decompose(v))
        }
        Recombiner::None => None,
    })
}

fn cfi_from_encoded(
    encoded: &MultimodeFockState,
    recombiner: Option<&BeamsplitterMesh>,
    w: &WeightVector,
    point: &PhaseEncoding,
) -> Result<f64> {
    let modes = encoded.modes();
    if w.modes() != modes {
        return Err(Error::DimensionMismatch {
            expected: modes,
            found: w.modes(),
        });
    }
    let psi = apply_phases(encoded.clone(), point)?;
    let norm2 = w.norm2_sqr();
    let mut dpsi = psi.clone();
    for i in 0..dpsi.amplitudes.len() {
        let occ = dpsi.basis.occupation(i);
        let g: f64 = occ
            .iter()
            .zip(w.entries())
            .map(|(n, wj)| *n as f64 * wj)
            .sum::<f64>()
            / norm2;
        dpsi.amplitudes[i] *= Complex64::new(0.0, -g);
    }
    let (a, da) = match recombiner {
        Some(mesh) => (apply_mesh(psi, mesh)?, apply_mesh(dpsi, mesh)?),
        None => (psi, dpsi),
    };
    let mut f = 0.0;
    for (x, dx) in a.amplitudes.iter().zip(&da.amplitudes) {
        let p = x.norm_sqr();
        if p > 1e-14 {
            let dp = 2.0 * (x.conj() * dx).re;
            f += dp * dp / p;
        }
    }
    Ok(f)
}

/// Result of scanning the collective operating point `θ_op = φ w/|w|²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub offset: f64,
    pub cfi: f64,
}

/// Maximizes the photon-counting information over `φ ∈ [0, π)` by a coarse
/// grid followed by golden-section refinement to `tol`.
pub fn optimize_operating_point(
    input: &MultimodeFockState,
    network: &LinearNetwork,
    w: &WeightVector,
    recombiner: &Recombiner,
    grid: usize,
    tol: f64,
) -> Result<OperatingPoint> {
    let encoded = apply_unitary(input.clone(), network)?;
    let mesh = recombiner_mesh(network, recombiner)?;
    let norm2 = w.norm2_sqr();
    let eval = |phi: f64| -> Result<f64> {
        let point = PhaseEncoding {
            thetas: w.entries().iter().map(|x| phi * x / norm2).collect(),
        };
        cfi_from_encoded(&encoded, mesh.as_ref(), w, &point)
    };
    let grid = grid.max(3);
    let h = std::f64::consts::PI / grid as f64;
    let mut best = OperatingPoint {
        offset: 0.0,
        cfi: f64::NEG_INFINITY,
    };
    for i in 0..grid {
        let phi = i as f64 * h;
        let f = eval(phi)?;
        if f > best.cfi {
            best = OperatingPoint {
                offset: phi,
                cfi: f,
            };
        }
    }
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best.offset - h, best.offset + h);
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (eval(c)?, eval(d)?);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = eval(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let fm = eval(mid)?;
    if fm > best.cfi {
        best = OperatingPoint {
            offset: mid.rem_euclid(std::f64::consts::PI),
            cfi: fm,
        };
    }
    Ok(best)
}

/// `N ‖w‖₃³/|w|⁴ + 2 n2 (n1 + |ξ1|)`, the saturating photon-counting
/// information on the `q = 2 wᵀθ` scale (a quarter of the `wᵀθ` value).
pub fn cfi_closed_form(w: &WeightVector, n1: f64, xi1: Complex64, n2: f64) -> f64 {
    let n2w = w.norm2_sqr();
    (n1 + n2) * w.norm3_cubed() / (n2w * n2w) + 2.0 * n2 * (n1 + xi1.norm())
}

/// Analytic matrix against the first-principles oracle on the optimal network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub modes: usize,
    pub cutoff: usize,
    pub tail_mass: f64,
    pub analytic: Vec<Vec<f64>>,
    pub oracle: Vec<Vec<f64>>,
    pub max_deviation: f64,
    /// `max_deviation / max |𝓕_oracle|`.
    pub relative_deviation: f64,
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn report(
    analytic: &Array2<f64>,
    oracle: &Array2<f64>,
    cutoff: usize,
    tail_mass: f64,
) -> OracleReport {
    let max_deviation = crate::linalg::max_abs_diff(analytic, oracle);
    let scale = crate::linalg::max_abs(oracle);
    OracleReport {
        modes: oracle.nrows(),
        cutoff,
        tail_mass,
        analytic: rows(analytic),
        oracle: rows(oracle),
        max_deviation,
        relative_deviation: if scale > 0.0 {
            max_deviation / scale
        } else {
            max_deviation
        },
    }
}

/// Spectral cutoff used for analytic mixed-state coefficients.
const ANALYTIC_SPECTRAL_PADDING: usize = 40;

/// Runs `state ⊗ |α⟩` through the optimal network for `w` and compares the
/// oracle QFIM with the analytic one (including first-moment terms).
pub fn oracle_comparison(
    state: &SingleModeState,
    alpha: Complex64,
    w: &WeightVector,
    cutoff: usize,
    threshold: f64,
) -> Result<OracleReport> {
    let network = build_optimal_network(w)?;
    if state.is_mixed() {
        let wide = fock_embed(state, cutoff + ANALYTIC_SPECTRAL_PADDING)?.into_spectral();
        let coeffs = qfim_mixed_coefficients(&wide, alpha);
        let bundle = qfim_assemble(&coeffs, &network)?;
        let rho = fock_embed(state, cutoff)?.into_spectral();
        let mixed = prepare_mixed_input(&rho, coeffs.alpha, w.modes(), cutoff, threshold)?;
        let mut evolved = Vec::with_capacity(mixed.components.len());
        for c in mixed.components {
            evolved.push(apply_unitary(c, &bundle.network)?);
        }
        let oracle = qfim_bruteforce_mixed(&evolved, &mixed.eigenvalues)?;
        Ok(report(
            &bundle.exact_matrix(),
            &oracle,
            cutoff,
            mixed.tail_mass,
        ))
    } else {
        let m = moments_of(state, cutoff)?;
        let coeffs = qfim_coefficients(&m, alpha);
        let bundle = qfim_assemble(&coeffs, &network)?;
        let input = prepare_input_checked(state, coeffs.alpha, w.modes(), cutoff, threshold)?;
        let tail = input.tail_mass;
        let out = apply_unitary(input, &bundle.network)?;
        Ok(report(
            &bundle.exact_matrix(),
            &qfim_bruteforce_pure(&out),
            cutoff,
            tail,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{random_unitary, validate_weights, MixerElement, Scheme};
    use rand::{rngs::StdRng, SeedableRng};
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_mixer(theta: f64, phi: f64) -> BeamsplitterMesh {
        BeamsplitterMesh {
            elements: vec![MixerElement {
                mode: 0,
                theta,
                phi,
            }],
            output_phases: vec![0.0, 0.0],
        }
    }

    #[test]
    fn basis_is_sector_lexicographic() {
        let b = FockBasis::new(3, 2);
        assert_eq!(b.len(), 10);
        assert_eq!(b.occupation(0), &[0, 0, 0]);
        assert_eq!(b.occupation(1), &[0, 0, 1]);
        assert_eq!(b.occupation(3), &[1, 0, 0]);
        assert_eq!(b.sector(2), 4..10);
        assert_eq!(b.occupation(4), &[0, 0, 2]);
        assert_eq!(b.occupation(9), &[2, 0, 0]);
    }

    #[test]
    fn trivial_preparations() {
        let s = prepare_input(&SingleModeState::fock(0), c(0.0, 0.0), 2, 4).unwrap();
        assert_eq!(s.amplitude(&[0, 0]), c(1.0, 0.0));
        let s = prepare_input(&SingleModeState::fock(1), c(0.0, 0.0), 2, 4).unwrap();
        assert_eq!(s.amplitude(&[1, 0]), c(1.0, 0.0));
        let sv = SingleModeState::squeezed_vacuum(0.5, 0.0);
        assert!(matches!(
            prepare_input(&sv, c(1.0, 0.0), 2, 24),
            Err(Error::CutoffTooSmall { .. })
        ));
        let sv = prepare_input_checked(&sv, c(1.0, 0.0), 2, 24, 1e-8).unwrap();
        assert!((sv.tail_mass - 1.776275e-9).abs() < 1e-14);
        let wide = prepare_input(
            &SingleModeState::squeezed_vacuum(0.5, 0.0),
            c(1.0, 0.0),
            2,
            28,
        )
        .unwrap();
        assert!(wide.tail_mass < 1e-10);
        assert!((sv.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_photon_mixer() {
        let s = state_from_amplitudes(2, 3, &[(vec![1, 0], c(1.0, 0.0))]).unwrap();
        let out = apply_mesh(s, &one_mixer(PI / 4.0, 0.0)).unwrap();
        assert!((out.amplitude(&[1, 0]) - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
        assert!((out.amplitude(&[0, 1]) - c(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hong_ou_mandel() {
        let s = state_from_amplitudes(2, 4, &[(vec![1, 1], c(1.0, 0.0))]).unwrap();
        let out = apply_mesh(s, &one_mixer(PI / 4.0, 0.0)).unwrap();
        let d = photon_count_distribution(&out);
        assert!((d.probability(&[2, 0]) - 0.5).abs() < 1e-15);
        assert!((d.probability(&[0, 2]) - 0.5).abs() < 1e-15);
        assert!(d.probability(&[1, 1]) < 1e-30);
    }

    #[test]
    fn coherent_covariance() {
        let mut rng = StdRng::seed_from_u64(11);
        let alpha = c(0.8, -0.3);
        let u = random_unitary(3, &mut rng);
        let input = prepare_input(&SingleModeState::coherent(alpha), c(0.0, 0.0), 3, 16).unwrap();
        let out = apply_unitary(input, &u).unwrap();
        let beta: Vec<Complex64> = (0..3).map(|j| u.matrix()[[j, 0]] * alpha).collect();
        // expected product of coherent states, truncated to the same basis
        let mut expected = out.clone();
        for i in 0..expected.amplitudes.len() {
            let occ = expected.basis.occupation(i).to_vec();
            let mut amp = c(1.0, 0.0);
            for (j, n) in occ.iter().enumerate() {
                let p = pure_fock(&SingleModeState::coherent(beta[j]), 16).unwrap();
                amp *= p.coefficients[*n as usize] * (1.0 - p.tail_mass).sqrt();
            }
            expected.amplitudes[i] = amp;
        }
        let fid = out.inner(&expected).norm_sqr() / expected.norm_sqr();
        assert!(fid >= 1.0 - 1e-9, "{fid}");
    }

    #[test]
    fn coherent_split_is_poissonian() {
        let input =
            prepare_input(&SingleModeState::coherent(c(1.2, 0.0)), c(0.0, 0.0), 2, 20).unwrap();
        let out = apply_mesh(input, &one_mixer(PI / 4.0, 0.0)).unwrap();
        let d = photon_count_distribution(&out);
        let mean: f64 = 1.44 / 2.0;
        let pois = |n: u32| {
            (-mean).exp() * mean.powi(n as i32) / (1..=n).map(|k| k as f64).product::<f64>()
        };
        for (a, b) in [(0u16, 0u16), (1, 2), (3, 1)] {
            let want = pois(a as u32) * pois(b as u32);
            assert!((d.probability(&[a, b]) - want).abs() < 1e-12);
        }
        assert!((d.total() - 1.0).abs() < 1e-12);
        assert!(d.to_csv().starts_with("n1,n2,probability\n0,0,"));
    }

    #[test]
    fn phases_behave() {
        let s = state_from_amplitudes(
            2,
            2,
            &[(vec![1, 0], c(0.6, 0.0)), (vec![0, 1], c(0.0, 0.8))],
        )
        .unwrap();
        let same = apply_phases(s.clone(), &PhaseEncoding::zeros(2)).unwrap();
        assert_eq!(same.amplitudes, s.amplitudes);
        let flipped = apply_phases(
            s.clone(),
            &PhaseEncoding {
                thetas: vec![PI, 0.0],
            },
        )
        .unwrap();
        assert!((flipped.amplitude(&[1, 0]) + c(0.6, 0.0)).norm() < 1e-15);
        assert!((flipped.norm_sqr() - s.norm_sqr()).abs() < 1e-14);
        assert!(apply_phases(s, &PhaseEncoding::zeros(3)).is_err());
    }

    #[test]
    fn moments_examples() {
        let s = state_from_amplitudes(2, 2, &[(vec![1, 0], c(1.0, 0.0))]).unwrap();
        let (m, a) = number_moments(&s);
        assert_eq!(m, vec![1.0, 0.0]);
        assert_eq!(a[[0, 0]], 2.0);
        let coh =
            prepare_input(&SingleModeState::coherent(c(1.0, 0.0)), c(0.0, 0.0), 2, 30).unwrap();
        let (m, a) = number_moments(&coh);
        assert!((m[0] - 1.0).abs() < 1e-12);
        assert!((a[[0, 0]] / 2.0 - 2.0).abs() < 1e-12);
        let sv = prepare_input(
            &SingleModeState::squeezed_vacuum(0.5, 0.0),
            c(0.0, 0.0),
            2,
            40,
        )
        .unwrap();
        let (m, a) = number_moments(&sv);
        let n = 0.5f64.sinh().powi(2);
        assert!((m[0] - n).abs() < 1e-10);
        assert!((a[[0, 0]] / 2.0 - m[0] * m[0] - 2.0 * n * (n + 1.0)).abs() < 1e-9);
    }

    #[test]
    fn vacuum_qfim_zero_and_mixed_reduction() {
        let vac = prepare_input(&SingleModeState::fock(0), c(0.0, 0.0), 2, 3).unwrap();
        assert!(qfim_bruteforce_pure(&vac).iter().all(|x| *x == 0.0));
        let s = prepare_input(
            &SingleModeState::squeezed_vacuum(0.4, 0.0),
            c(0.7, 0.0),
            2,
            26,
        )
        .unwrap();
        let s = apply_mesh(s, &one_mixer(PI / 4.0, 0.3)).unwrap();
        let p = qfim_bruteforce_pure(&s);
        let m = qfim_bruteforce_mixed(&[s], &[1.0]).unwrap();
        assert!(p.iter().zip(m.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn non_orthogonal_rejected() {
        let a = state_from_amplitudes(2, 2, &[(vec![1, 0], c(1.0, 0.0))]).unwrap();
        let b = state_from_amplitudes(
            2,
            2,
            &[(vec![1, 0], c(0.6, 0.0)), (vec![0, 1], c(0.8, 0.0))],
        )
        .unwrap();
        assert!(matches!(
            qfim_bruteforce_mixed(&[a, b], &[0.5, 0.5]),
            Err(Error::NonOrthogonal { .. })
        ));
    }

    #[test]
    fn mesh_preserves_sectors() {
        let mut rng = StdRng::seed_from_u64(5);
        let u = random_unitary(4, &mut rng);
        let s = prepare_input_checked(
            &SingleModeState::squeezed_vacuum(0.4, 0.2),
            c(0.5, 0.5),
            4,
            14,
            1e-6,
        )
        .unwrap();
        let before = s.sector_norms();
        let after = apply_unitary(s, &u).unwrap().sector_norms();
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cfi_without_recombiner_vanishes() {
        let w = validate_weights(&[0.5, -0.5], Scheme::Paired).unwrap();
        let u = crate::network::build_optimal_network(&w).unwrap();
        let s = prepare_input(
            &SingleModeState::squeezed_vacuum(0.5, 0.0),
            c(0.0, 1.0),
            2,
            30,
        )
        .unwrap();
        let f = cfi_photon_counting(
            &s,
            &u,
            &w,
            &MeasurementConfig {
                recombiner: Recombiner::None,
                operating_point: PhaseEncoding {
                    thetas: vec![0.3, -0.3],
                },
            },
        )
        .unwrap();
        assert!(f.abs() < 1e-20);
    }

    #[test]
    fn closed_form_examples() {
        let uni = validate_weights(&[0.5, -0.5, 0.5, -0.5], Scheme::Paired).unwrap();
        assert!((cfi_closed_form(&uni, 0.0, c(0.0, 0.0), 7.0) - 7.0).abs() < 1e-12);
        let n1 = 0.5f64.sinh().powi(2);
        let xi = 0.5f64.sinh() * 0.5f64.cosh();
        let f = cfi_closed_form(&uni, n1, c(-xi, 0.0), 2.0);
        assert!((f - (n1 + 2.0) - 3.436564).abs() < 1e-6);
        let w = validate_weights(&[0.3, -0.3, 0.2, -0.2], Scheme::Paired).unwrap();
        let ratio = w.norm3_cubed() / w.norm2_sqr().powi(2);
        assert!((ratio - 0.07 / 0.0676).abs() < 1e-12);
    }
}
