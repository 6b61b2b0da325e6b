//! Weight vectors, optimal linear networks and mixer meshes.

use std::f64::consts::PI;
use std::fmt::Write as _;

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::unitarity_deviation;
use crate::serde_complex;

/// Magnitude given to zero weights so every mode carries some light.
pub const ZERO_WEIGHT_CLAMP: f64 = 1e-12;

/// Tolerance on `|U†U - I|` for accepting a matrix as unitary.
pub const UNITARITY_TOL: f64 = 1e-12;

const PAIRING_TOL: f64 = 1e-9;

/// How sensing phases are referenced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// `2d` modes; mode `2i+1` is the private reference of mode `2i`.
    Paired,
    /// `d + 1` modes; the last mode is a shared reference.
    Reduced,
}

/// Validated target weights over the optical modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    entries: Vec<f64>,
    scheme: Scheme,
}

impl WeightVector {
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn modes(&self) -> usize {
        self.entries.len()
    }

    /// Number of unknown sensing phases.
    pub fn phases(&self) -> usize {
        match self.scheme {
            Scheme::Paired => self.entries.len() / 2,
            Scheme::Reduced => self.entries.len() - 1,
        }
    }

    pub fn norm1(&self) -> f64 {
        self.entries.iter().map(|w| w.abs()).sum()
    }

    pub fn norm2_sqr(&self) -> f64 {
        self.entries.iter().map(|w| w * w).sum()
    }

    pub fn norm3_cubed(&self) -> f64 {
        self.entries.iter().map(|w| w.abs().powi(3)).sum()
    }
}

/// Validates and normalizes raw weights to unit 1-norm.
///
/// For the reduced scheme `raw` holds the `d` sensing weights and the
/// shared-reference entry `-Σ w` is appended.
pub fn validate_weights(raw: &[f64], scheme: Scheme) -> Result<WeightVector> {
    if raw.iter().any(|w| !w.is_finite()) {
        return Err(Error::InvalidWeights("non-finite weight".into()));
    }
    if raw.is_empty() || raw.iter().all(|w| *w == 0.0) {
        return Err(Error::ZeroWeights);
    }
    let mut w = match scheme {
        Scheme::Paired => {
            if raw.len() % 2 != 0 {
                return Err(Error::InvalidWeights(format!(
                    "paired scheme needs an even number of modes, got {}",
                    raw.len()
                )));
            }
            let scale = raw.iter().fold(0.0f64, |m, w| m.max(w.abs()));
            for (i, pair) in raw.chunks(2).enumerate() {
                if (pair[0] + pair[1]).abs() > PAIRING_TOL * scale {
                    return Err(Error::PairingViolation { pair: i });
                }
            }
            let mut w = raw.to_vec();
            // enforce exact antisymmetry within each pair
            for pair in w.chunks_mut(2) {
                let m = 0.5 * (pair[0] - pair[1]);
                pair[0] = m;
                pair[1] = -m;
            }
            w
        }
        Scheme::Reduced => {
            let mut w = raw.to_vec();
            w.push(-raw.iter().sum::<f64>());
            w
        }
    };
    normalize1(&mut w);
    clamp_zeros(&mut w, scheme);
    normalize1(&mut w);
    Ok(WeightVector { entries: w, scheme })
}

fn normalize1(w: &mut [f64]) {
    let n: f64 = w.iter().map(|x| x.abs()).sum();
    w.iter_mut().for_each(|x| *x /= n);
}

fn clamp_zeros(w: &mut [f64], scheme: Scheme) {
    match scheme {
        Scheme::Paired => {
            for pair in w.chunks_mut(2) {
                if pair[0].abs() < ZERO_WEIGHT_CLAMP {
                    pair[0] = ZERO_WEIGHT_CLAMP;
                    pair[1] = -ZERO_WEIGHT_CLAMP;
                }
            }
        }
        Scheme::Reduced => {
            let d = w.len() - 1;
            let mut changed = false;
            for j in 0..d {
                if w[j].abs() < ZERO_WEIGHT_CLAMP {
                    w[j] = -ZERO_WEIGHT_CLAMP * sign_or_plus(w[d]);
                    changed = true;
                }
            }
            if changed {
                w[d] = -w[..d].iter().sum::<f64>();
            }
            if w[d].abs() < ZERO_WEIGHT_CLAMP {
                // shift the dominant sensing weight so the closure stays exact
                let k = (0..d)
                    .max_by(|&a, &b| w[a].abs().total_cmp(&w[b].abs()))
                    .unwrap_or(0);
                let s = sign_or_plus(w[k]);
                w[k] += s * ZERO_WEIGHT_CLAMP;
                w[d] = -w[..d].iter().sum::<f64>();
            }
        }
    }
}

fn sign_or_plus(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// A unitary passive linear network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearNetwork {
    #[serde(with = "serde_complex::matrix")]
    matrix: Array2<Complex64>,
}

impl LinearNetwork {
    /// Wraps a matrix after checking unitarity to [`UNITARITY_TOL`].
    pub fn new(matrix: Array2<Complex64>) -> Result<Self> {
        Self::with_tolerance(matrix, UNITARITY_TOL)
    }

    pub fn with_tolerance(matrix: Array2<Complex64>, tol: f64) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let deviation = unitarity_deviation(&matrix);
        if !(deviation <= tol) {
            return Err(Error::NonUnitary { deviation });
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: Array2::from_shape_fn((n, n), |(i, j)| {
                if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> Array2<Complex64> {
        self.matrix
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: crate::linalg::adjoint(&self.matrix),
        }
    }

    /// Multiplies column `k` by `e^{iχ}`.
    pub fn rotate_column(&self, k: usize, chi: f64) -> Self {
        let mut m = self.matrix.clone();
        let ph = Complex64::from_polar(1.0, chi);
        m.column_mut(k).mapv_inplace(|z| z * ph);
        Self { matrix: m }
    }

    pub fn unitarity_deviation(&self) -> f64 {
        unitarity_deviation(&self.matrix)
    }
}

/// First two columns of the optimal network:
/// `U_j1 = √|w_j|`, `U_j2 = w_j/√|w_j|`.
fn optimal_columns(w: &WeightVector) -> (Vec<Complex64>, Vec<Complex64>) {
    let c1 = w
        .entries()
        .iter()
        .map(|x| Complex64::new(x.abs().sqrt(), 0.0))
        .collect();
    let c2 = w
        .entries()
        .iter()
        .map(|x| Complex64::new(x / x.abs().sqrt(), 0.0))
        .collect();
    (c1, c2)
}

/// Builds a network whose first two columns make `u = |U_·1|²` and
/// `v = U_·1 U*_·2` both equal to `|w|` and `w` respectively.
pub fn build_optimal_network(w: &WeightVector) -> Result<LinearNetwork> {
    if w.scheme() == Scheme::Paired && w.modes() == 4 {
        return four_mode_network(w, FourModePhases::default());
    }
    let (c1, c2) = optimal_columns(w);
    let m = complete_unitary(&[c1, c2], w.modes())?;
    LinearNetwork::new(m)
}

/// Free phases of the explicit four-mode construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourModePhases {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
}

impl Default for FourModePhases {
    fn default() -> Self {
        Self {
            phi1: 0.0,
            phi2: PI,
            phi3: 0.0,
        }
    }
}

/// Explicit optimal four-mode network for paired weights `(w1,-w1,w3,-w3)`.
pub fn four_mode_network(w: &WeightVector, phases: FourModePhases) -> Result<LinearNetwork> {
    if w.modes() != 4 || w.scheme() != Scheme::Paired {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: w.modes(),
        });
    }
    let e = w.entries();
    let (a, b) = (e[0].abs().sqrt(), e[2].abs().sqrt());
    let p = |x: f64, phi: f64| Complex64::from_polar(x, phi);
    let (f1, f2, f3) = (phases.phi1, phases.phi2, phases.phi3);
    let f123 = f1 + f2 - f3;
    let mut m = Array2::<Complex64>::zeros((4, 4));
    let col1 = [a, a, b, b];
    let col2 = [e[0] / a, e[1] / a, e[2] / b, e[3] / b];
    for j in 0..4 {
        m[[j, 0]] = Complex64::new(col1[j], 0.0);
        m[[j, 1]] = Complex64::new(col2[j], 0.0);
    }
    m[[0, 2]] = p(b, f1);
    m[[1, 2]] = -p(b, f123);
    m[[2, 2]] = -p(a, f1);
    m[[3, 2]] = p(a, f123);
    m[[0, 3]] = p(b, f3);
    m[[1, 3]] = p(b, f2);
    m[[2, 3]] = -p(a, f3);
    m[[3, 3]] = -p(a, f2);
    if e[0] * e[2] < 0.0 {
        m.swap([2, 2], [3, 2]);
        m.swap([2, 3], [3, 3]);
    }
    LinearNetwork::new(m)
}

/// Completes orthonormal columns to an `n × n` unitary by modified
/// Gram–Schmidt over standard basis vectors, choosing at each step the
/// candidate with the largest residual.
pub fn complete_unitary(columns: &[Vec<Complex64>], n: usize) -> Result<Array2<Complex64>> {
    let mut basis: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    for c in columns {
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.len(),
            });
        }
        let mut r = c.clone();
        project_out(&mut r, &basis);
        let norm = norm(&r);
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::CompletionFailure { residual: norm });
        }
        r.iter_mut().for_each(|z| *z /= norm);
        basis.push(r);
    }
    while basis.len() < n {
        let mut best: Option<(f64, Vec<Complex64>)> = None;
        for k in 0..n {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[k] = Complex64::new(1.0, 0.0);
            project_out(&mut e, &basis);
            let r = norm(&e);
            if best.as_ref().map_or(true, |(b, _)| r > *b) {
                best = Some((r, e));
            }
        }
        let (r, mut e) = best.expect("nonempty candidate set");
        if r < 1e-6 {
            return Err(Error::CompletionFailure { residual: r });
        }
        project_out(&mut e, &basis);
        let r = norm(&e);
        e.iter_mut().for_each(|z| *z /= r);
        basis.push(e);
    }
    Ok(Array2::from_shape_fn((n, n), |(i, j)| basis[j][i]))
}

fn project_out(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for b in basis {
        let c: Complex64 = b.iter().zip(v.iter()).map(|(x, y)| x.conj() * y).sum();
        for (vi, bi) in v.iter_mut().zip(b) {
            *vi -= c * bi;
        }
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Two-mode mixer `[[cos θ, -e^{iφ} sin θ], [e^{-iφ} sin θ, cos θ]]`.
pub fn mixer_block(theta: f64, phi: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [
        [Complex64::new(c, 0.0), -Complex64::from_polar(s, phi)],
        [Complex64::from_polar(s, -phi), Complex64::new(c, 0.0)],
    ]
}

/// Mixer acting on adjacent modes `(mode, mode + 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixerElement {
    pub mode: usize,
    pub theta: f64,
    pub phi: f64,
}

/// A mesh of adjacent-mode mixers applied in order, followed by one
/// phase shift per output mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamsplitterMesh {
    pub elements: Vec<MixerElement>,
    pub output_phases: Vec<f64>,
}

impl BeamsplitterMesh {
    pub fn modes(&self) -> usize {
        self.output_phases.len()
    }

    /// One `BS i j theta phi` line per element, then one `PS j phase` per mode.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for e in &self.elements {
            let _ = writeln!(
                s,
                "BS {} {} {:.17e} {:.17e}",
                e.mode,
                e.mode + 1,
                e.theta,
                e.phi
            );
        }
        for (j, p) in self.output_phases.iter().enumerate() {
            let _ = writeln!(s, "PS {} {:.17e}", j, p);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut elements = Vec::new();
        let mut phases: Vec<(usize, f64)> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |m: &str| Error::MeshParse {
                line: ln + 1,
                message: m.to_string(),
            };
            let tok: Vec<&str> = line.split_whitespace().collect();
            let int = |t: &str| t.parse::<usize>().map_err(|_| err("bad mode index"));
            let num = |t: &str| t.parse::<f64>().map_err(|_| err("bad number"));
            match tok.as_slice() {
                ["BS", i, j, t, p] => {
                    let (i, j) = (int(i)?, int(j)?);
                    if j != i + 1 {
                        return Err(err("mixers must act on adjacent modes"));
                    }
                    elements.push(MixerElement {
                        mode: i,
                        theta: num(t)?,
                        phi: num(p)?,
                    });
                }
                ["PS", j, p] => phases.push((int(j)?, num(p)?)),
                _ => return Err(err("expected `BS i j theta phi` or `PS j phase`")),
            }
        }
        let n = phases.len();
        let mut output_phases = vec![0.0; n];
        let mut seen = vec![false; n];
        for (j, p) in phases {
            if j >= n || seen[j] {
                return Err(Error::MeshParse {
                    line: 0,
                    message: format!("phase lines must cover modes 0..{n} exactly once"),
                });
            }
            seen[j] = true;
            output_phases[j] = p;
        }
        Ok(Self {
            elements,
            output_phases,
        })
    }
}

fn apply_left(m: &mut Array2<Complex64>, k: usize, t: [[Complex64; 2]; 2]) {
    for c in 0..m.ncols() {
        let (x, y) = (m[[k, c]], m[[k + 1, c]]);
        m[[k, c]] = t[0][0] * x + t[0][1] * y;
        m[[k + 1, c]] = t[1][0] * x + t[1][1] * y;
    }
}

fn apply_right_adjoint(m: &mut Array2<Complex64>, k: usize, t: [[Complex64; 2]; 2]) {
    // M ← M T†, (T†)_{ab} = conj(T_{ba})
    for r in 0..m.nrows() {
        let (x, y) = (m[[r, k]], m[[r, k + 1]]);
        m[[r, k]] = x * t[0][0].conj() + y * t[0][1].conj();
        m[[r, k + 1]] = x * t[1][0].conj() + y * t[1][1].conj();
    }
}

fn rel_phase(a: Complex64, b: Complex64) -> f64 {
    if a.norm() == 0.0 || b.norm() == 0.0 {
        0.0
    } else {
        b.arg() - a.arg()
    }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Rectangular decomposition of a unitary into adjacent-mode mixers.
pub fn mesh_decompose(network: &LinearNetwork) -> BeamsplitterMesh {
    let mut t = network.matrix().clone();
    let n = t.nrows();
    let mut right: Vec<MixerElement> = Vec::new();
    let mut left: Vec<MixerElement> = Vec::new();
    for i in 0..n.saturating_sub(1) {
        if i % 2 == 0 {
            for j in 0..=i {
                let (row, col) = (n - 1 - j, i - j);
                let (x, y) = (t[[row, col]], t[[row, col + 1]]);
                let theta = x.norm().atan2(y.norm());
                let phi = rel_phase(x, y);
                apply_right_adjoint(&mut t, col, mixer_block(theta, phi));
                right.push(MixerElement {
                    mode: col,
                    theta,
                    phi,
                });
            }
        } else {
            for j in 0..=i {
                let (row, col) = (n - 1 - i + j, j);
                let (x, y) = (t[[row - 1, col]], t[[row, col]]);
                let theta = y.norm().atan2(x.norm());
                let phi = if x.norm() == 0.0 || y.norm() == 0.0 {
                    0.0
                } else {
                    x.arg() - y.arg() - PI
                };
                apply_left(&mut t, row - 1, mixer_block(theta, phi));
                left.push(MixerElement {
                    mode: row - 1,
                    theta,
                    phi,
                });
            }
        }
    }
    let d: Vec<Complex64> = (0..n).map(|k| t[[k, k]]).collect();
    // T† D = D T' with φ' = φ + π + arg d_{k+1} - arg d_k
    let mut elements = right;
    for e in left.into_iter().rev() {
        let phi = e.phi + PI + d[e.mode + 1].arg() - d[e.mode].arg();
        elements.push(MixerElement {
            mode: e.mode,
            theta: e.theta,
            phi: wrap(phi),
        });
    }
    elements.retain(|e| e.theta.abs() >= 1e-14);
    for e in &mut elements {
        e.phi = wrap(e.phi);
    }
    BeamsplitterMesh {
        elements,
        output_phases: d.iter().map(|z| z.arg()).collect(),
    }
}

/// Decomposes a raw matrix, rejecting non-unitary input.
pub fn mesh_decompose_matrix(m: &Array2<Complex64>) -> Result<BeamsplitterMesh> {
    Ok(mesh_decompose(&LinearNetwork::with_tolerance(
        m.clone(),
        1e-10,
    )?))
}

/// Multiplies out `diag(e^{iφ_out}) T_K ⋯ T_1`.
pub fn mesh_reconstruct(mesh: &BeamsplitterMesh, modes: usize) -> Result<Array2<Complex64>> {
    if mesh.output_phases.len() != modes {
        return Err(Error::DimensionMismatch {
            expected: modes,
            found: mesh.output_phases.len(),
        });
    }
    let mut m = LinearNetwork::identity(modes).into_matrix();
    for e in &mesh.elements {
        if e.mode + 1 >= modes {
            return Err(Error::IndexOutOfRange {
                index: e.mode + 1,
                modes,
            });
        }
        apply_left(&mut m, e.mode, mixer_block(e.theta, e.phi));
    }
    for (j, p) in mesh.output_phases.iter().enumerate() {
        let ph = Complex64::from_polar(1.0, *p);
        m.row_mut(j).mapv_inplace(|z| z * ph);
    }
    Ok(m)
}

/// Haar-random unitary from the QR decomposition of a complex Ginibre
/// matrix with the phase of `R`'s diagonal divided out.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> LinearNetwork {
    let mut cols: Vec<Vec<Complex64>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im)
                })
                .collect()
        })
        .collect();
    for j in 0..n {
        let (done, rest) = cols.split_at_mut(j);
        let v = &mut rest[0];
        project_out(v, done);
        project_out(v, done);
        let r = norm(v);
        v.iter_mut().for_each(|z| *z /= r);
    }
    let m = Array2::from_shape_fn((n, n), |(i, j)| cols[j][i]);
    LinearNetwork::with_tolerance(m, 1e-10).expect("Gram-Schmidt output is unitary")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_diff_c;
    use rand::{rngs::StdRng, SeedableRng};

    #[test]
    fn paired_example_normalizes() {
        let w = validate_weights(&[0.5, -0.5, 0.5, -0.5], Scheme::Paired).unwrap();
        assert_eq!(w.entries(), &[0.25, -0.25, 0.25, -0.25]);
        assert_eq!(w.phases(), 2);
    }

    #[test]
    fn pairing_violation_detected() {
        let err = validate_weights(&[0.3, -0.2, 0.1, -0.1], Scheme::Paired).unwrap_err();
        assert_eq!(err, Error::PairingViolation { pair: 0 });
    }

    #[test]
    fn zero_vector_rejected() {
        assert_eq!(
            validate_weights(&[0.0; 4], Scheme::Paired).unwrap_err(),
            Error::ZeroWeights
        );
    }

    #[test]
    fn zero_pair_clamped() {
        let w = validate_weights(&[0.5, -0.5, 0.0, 0.0], Scheme::Paired).unwrap();
        assert!(w.entries()[2] > 0.0 && w.entries()[3] < 0.0);
        assert!((w.norm1() - 1.0).abs() < 1e-15);
        assert!(w.entries().iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn reduced_closure() {
        let w = validate_weights(&[0.25, 0.25, 0.5], Scheme::Reduced).unwrap();
        let e = w.entries();
        assert_eq!(e.len(), 4);
        assert!((e[3] + 0.5).abs() < 1e-15);
        assert!((w.norm1() - 1.0).abs() < 1e-15);
        let z = validate_weights(&[0.25, -0.25], Scheme::Reduced).unwrap();
        assert!(z.entries()[2].abs() >= ZERO_WEIGHT_CLAMP * 0.99);
        assert!(z.entries().iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn optimal_network_columns() {
        for (raw, scheme) in [
            (vec![0.3, -0.3, 0.2, -0.2], Scheme::Paired),
            (vec![0.3, -0.3, -0.2, 0.2], Scheme::Paired),
            (vec![0.1, -0.1, 0.2, -0.2, 0.05, -0.05], Scheme::Paired),
            (vec![0.5, -0.2, 0.3], Scheme::Reduced),
        ] {
            let w = validate_weights(&raw, scheme).unwrap();
            let u = build_optimal_network(&w).unwrap();
            assert!(u.unitarity_deviation() < 1e-12);
            let m = u.matrix();
            for (j, wj) in w.entries().iter().enumerate() {
                let uj = m[[j, 0]].norm_sqr();
                let vj = m[[j, 0]] * m[[j, 1]].conj();
                assert!((uj - wj.abs()).abs() < 1e-14);
                assert!((vj - Complex64::new(*wj, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn four_mode_phases_free() {
        let w = validate_weights(&[0.3, -0.3, -0.2, 0.2], Scheme::Paired).unwrap();
        let u = four_mode_network(
            &w,
            FourModePhases {
                phi1: 0.7,
                phi2: -1.1,
                phi3: 2.0,
            },
        )
        .unwrap();
        assert!(u.unitarity_deviation() < 1e-12);
    }

    #[test]
    fn four_mode_default_matches_closed_matrix() {
        let w = validate_weights(&[0.3, -0.3, 0.2, -0.2], Scheme::Paired).unwrap();
        let u = build_optimal_network(&w).unwrap();
        let (a, b) = (0.3f64.sqrt(), 0.2f64.sqrt());
        let want = [[a, a, b, b], [a, -a, b, -b], [b, b, -a, -a], [b, -b, -a, a]];
        for j in 0..4 {
            for k in 0..4 {
                let z = u.matrix()[[j, k]];
                assert!(
                    (z - Complex64::new(want[j][k], 0.0)).norm() < 1e-12,
                    "{j} {k} {z}"
                );
            }
        }
    }

    #[test]
    fn identity_mesh_is_empty() {
        let mesh = mesh_decompose(&LinearNetwork::identity(4));
        assert!(mesh.elements.is_empty());
        assert_eq!(mesh.output_phases, vec![0.0; 4]);
    }

    #[test]
    fn balanced_splitter_mesh() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = Array2::from_shape_vec(
            (2, 2),
            vec![
                Complex64::new(h, 0.0),
                Complex64::new(h, 0.0),
                Complex64::new(-h, 0.0),
                Complex64::new(h, 0.0),
            ],
        )
        .unwrap();
        let mesh = mesh_decompose_matrix(&m).unwrap();
        assert_eq!(mesh.elements.len(), 1);
        let e = mesh.elements[0];
        assert!((e.theta - PI / 4.0).abs() < 1e-14);
        assert!((wrap(e.phi) - PI).abs() < 1e-14 || (wrap(e.phi) + PI).abs() < 1e-14);
        let back = mesh_reconstruct(&mesh, 2).unwrap();
        assert!(max_abs_diff_c(&back, &m) < 1e-14);
    }

    #[test]
    fn random_round_trip() {
        let mut rng = StdRng::seed_from_u64(7);
        for n in 2..=8 {
            let u = random_unitary(n, &mut rng);
            let mesh = mesh_decompose(&u);
            assert!(mesh.elements.len() <= n * (n - 1) / 2);
            let back = mesh_reconstruct(&mesh, n).unwrap();
            assert!(max_abs_diff_c(&back, u.matrix()) < 1e-10);
        }
    }

    #[test]
    fn text_round_trip() {
        let mut rng = StdRng::seed_from_u64(3);
        let u = random_unitary(4, &mut rng);
        let mesh = mesh_decompose(&u);
        let parsed = BeamsplitterMesh::from_text(&mesh.to_text()).unwrap();
        assert_eq!(parsed, mesh);
    }

    #[test]
    fn non_unitary_rejected() {
        let m = Array2::from_elem((2, 2), Complex64::new(1.0, 0.0));
        assert!(matches!(
            mesh_decompose_matrix(&m),
            Err(Error::NonUnitary { .. })
        ));
    }

    #[test]
    fn reconstruct_bad_index() {
        let mesh = BeamsplitterMesh {
            elements: vec![MixerElement {
                mode: 2,
                theta: 0.1,
                phi: 0.0,
            }],
            output_phases: vec![0.0; 3],
        };
        assert!(matches!(
            mesh_reconstruct(&mesh, 3),
            Err(Error::IndexOutOfRange { .. })
        ));
    }
}
