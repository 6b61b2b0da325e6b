//! Single-mode input states, their low-order moments and Fock embeddings.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_inner, norm_sqr};
use crate::serde_complex;

/// Tail mass above which a Fock truncation is rejected.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Catalog of supported single-mode inputs.
///
/// Squeezing parameters are `ξ = r e^{iθ}` with `S(ξ) = exp[(ξ* a² - ξ a†²)/2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SingleModeState {
    Coherent {
        #[serde(with = "serde_complex::scalar")]
        alpha: Complex64,
    },
    SqueezedVacuum {
        r: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `N(|α⟩ + |-α⟩)`.
    EvenCat {
        #[serde(with = "serde_complex::scalar")]
        alpha: Complex64,
    },
    Fock {
        n: usize,
    },
    /// `S(ξ) ρ_th S(ξ)†` with thermal occupation `n_th`.
    SqueezedThermal {
        r: f64,
        #[serde(default)]
        phase: f64,
        n_th: f64,
    },
    /// Arbitrary pure state given by (possibly unnormalized) Fock amplitudes.
    CustomFock {
        #[serde(with = "serde_complex::vec")]
        coefficients: Vec<Complex64>,
    },
}

impl SingleModeState {
    pub fn coherent(alpha: Complex64) -> Self {
        Self::Coherent { alpha }
    }

    pub fn squeezed_vacuum(r: f64, phase: f64) -> Self {
        Self::SqueezedVacuum { r, phase }
    }

    pub fn even_cat(alpha: Complex64) -> Self {
        Self::EvenCat { alpha }
    }

    pub fn fock(n: usize) -> Self {
        Self::Fock { n }
    }

    pub fn squeezed_thermal(r: f64, phase: f64, n_th: f64) -> Self {
        Self::SqueezedThermal { r, phase, n_th }
    }

    pub fn is_mixed(&self) -> bool {
        matches!(self, Self::SqueezedThermal { n_th, .. } if *n_th > 0.0)
    }

    /// Checks parameter domains.
    pub fn validate(&self) -> Result<()> {
        let finite = |x: f64, what: &str| {
            if x.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidState(format!("{what} must be finite")))
            }
        };
        match self {
            Self::Coherent { alpha } | Self::EvenCat { alpha } => {
                finite(alpha.re, "alpha")?;
                finite(alpha.im, "alpha")
            }
            Self::SqueezedVacuum { r, phase } => {
                finite(*r, "r")?;
                finite(*phase, "phase")?;
                if *r < 0.0 {
                    return Err(Error::InvalidState("squeezing r must be >= 0".into()));
                }
                Ok(())
            }
            Self::SqueezedThermal { r, phase, n_th } => {
                finite(*r, "r")?;
                finite(*phase, "phase")?;
                finite(*n_th, "n_th")?;
                if *r < 0.0 {
                    return Err(Error::InvalidState("squeezing r must be >= 0".into()));
                }
                if *n_th < 0.0 {
                    return Err(Error::InvalidState("n_th must be >= 0".into()));
                }
                Ok(())
            }
            Self::Fock { .. } => Ok(()),
            Self::CustomFock { coefficients } => {
                if coefficients
                    .iter()
                    .any(|z| !z.re.is_finite() || !z.im.is_finite())
                {
                    return Err(Error::InvalidState("non-finite Fock amplitude".into()));
                }
                if norm_sqr(coefficients) <= 0.0 {
                    return Err(Error::InvalidState("zero Fock amplitude vector".into()));
                }
                Ok(())
            }
        }
    }
}

/// Low-order moments of a single-mode state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMoments {
    /// `⟨a⟩`
    #[serde(with = "serde_complex::scalar")]
    pub alpha1: Complex64,
    /// `⟨a²⟩`
    #[serde(with = "serde_complex::scalar")]
    pub xi1: Complex64,
    /// `⟨a† a a⟩`
    #[serde(with = "serde_complex::scalar")]
    pub beta1: Complex64,
    /// `⟨n⟩`
    pub n1: f64,
    /// `Var(n)`
    pub nu1: f64,
}

impl StateMoments {
    /// Second moment of the quadrature noise used by the metrological power.
    pub fn metrological_power(&self) -> f64 {
        metrological_power_from_moments(self)
    }
}

/// `W = n + |⟨a²⟩ - ⟨a⟩²| - |⟨a⟩|²`.
pub fn metrological_power_from_moments(m: &StateMoments) -> f64 {
    m.n1 + (m.xi1 - m.alpha1 * m.alpha1).norm() - m.alpha1.norm_sqr()
}

/// Closed-form moments. `None` for states that only have a Fock-space route.
pub fn closed_form_moments(state: &SingleModeState) -> Option<StateMoments> {
    match *state {
        SingleModeState::Coherent { alpha } => {
            let n = alpha.norm_sqr();
            Some(StateMoments {
                alpha1: alpha,
                xi1: alpha * alpha,
                beta1: alpha * n,
                n1: n,
                nu1: n,
            })
        }
        SingleModeState::Fock { n } => Some(StateMoments {
            alpha1: ZERO,
            xi1: ZERO,
            beta1: ZERO,
            n1: n as f64,
            nu1: 0.0,
        }),
        SingleModeState::SqueezedVacuum { r, phase } => {
            let (s, c) = (r.sinh(), r.cosh());
            let n = s * s;
            Some(StateMoments {
                alpha1: ZERO,
                xi1: -Complex64::from_polar(s * c, phase),
                beta1: ZERO,
                n1: n,
                nu1: 2.0 * n * (n + 1.0),
            })
        }
        SingleModeState::SqueezedThermal { r, phase, n_th } => {
            let (s, c) = (r.sinh(), r.cosh());
            let g = 2.0 * n_th + 1.0;
            let n = g * s * s + n_th;
            let xi = -Complex64::from_polar(s * c * g, phase);
            Some(StateMoments {
                alpha1: ZERO,
                xi1: xi,
                beta1: ZERO,
                n1: n,
                nu1: n * n + n + xi.norm_sqr(),
            })
        }
        SingleModeState::EvenCat { alpha } => {
            let x = alpha.norm_sqr();
            let n = x * x.tanh();
            Some(StateMoments {
                alpha1: ZERO,
                xi1: alpha * alpha,
                beta1: ZERO,
                n1: n,
                nu1: x * x + n - n * n,
            })
        }
        SingleModeState::CustomFock { .. } => None,
    }
}

/// Moments from a normalized Fock amplitude vector.
pub fn fock_sum_moments(c: &[Complex64]) -> StateMoments {
    let mut alpha1 = ZERO;
    let mut xi1 = ZERO;
    let mut beta1 = ZERO;
    let mut n1 = 0.0;
    let mut n2 = 0.0;
    for n in 0..c.len() {
        let nf = n as f64;
        let p = c[n].norm_sqr();
        n1 += nf * p;
        n2 += nf * nf * p;
        if n + 1 < c.len() {
            let t = c[n].conj() * c[n + 1] * (nf + 1.0).sqrt();
            alpha1 += t;
            beta1 += t * nf;
        }
        if n + 2 < c.len() {
            xi1 += c[n].conj() * c[n + 2] * ((nf + 1.0) * (nf + 2.0)).sqrt();
        }
    }
    StateMoments {
        alpha1,
        xi1,
        beta1,
        n1,
        nu1: n2 - n1 * n1,
    }
}

/// Moments of `Σ_k λ_k |v_k⟩⟨v_k|`.
pub fn spectral_moments(rho: &SpectralState) -> StateMoments {
    let mut acc = StateMoments {
        alpha1: ZERO,
        xi1: ZERO,
        beta1: ZERO,
        n1: 0.0,
        nu1: 0.0,
    };
    let mut second = 0.0;
    for (lam, v) in rho.eigenvalues.iter().zip(&rho.eigenvectors) {
        let m = fock_sum_moments(v);
        acc.alpha1 += m.alpha1 * *lam;
        acc.xi1 += m.xi1 * *lam;
        acc.beta1 += m.beta1 * *lam;
        acc.n1 += m.n1 * lam;
        second += (m.nu1 + m.n1 * m.n1) * lam;
    }
    acc.nu1 = second - acc.n1 * acc.n1;
    acc
}

/// Moments of a pure input, honouring the cutoff for Fock-only states.
pub fn moments_of(state: &SingleModeState, cutoff: usize) -> Result<StateMoments> {
    state.validate()?;
    if let Some(m) = closed_form_moments(state) {
        return Ok(m);
    }
    match fock_embed(state, cutoff)? {
        FockEmbedding::Pure(p) => Ok(fock_sum_moments(&p.coefficients)),
        FockEmbedding::Mixed(rho) => Ok(spectral_moments(&rho)),
    }
}

/// Metrological power of any catalog state. Mixed states use the
/// thermal-squeezed closed form clamped at zero.
pub fn metrological_power(state: &SingleModeState, cutoff: usize) -> Result<f64> {
    state.validate()?;
    match *state {
        SingleModeState::SqueezedThermal { r, n_th, .. } => Ok(squeezed_thermal_power(r, n_th)),
        _ => Ok(metrological_power_from_moments(&moments_of(state, cutoff)?)),
    }
}

/// `max{(e^{2r}/(1+2n_th) - 1)/2, 0}`.
pub fn squeezed_thermal_power(r: f64, n_th: f64) -> f64 {
    (((2.0 * r).exp() / (1.0 + 2.0 * n_th) - 1.0) / 2.0).max(0.0)
}

/// Truncated pure state: amplitudes normalized after truncation plus the
/// probability mass that was cut away.
#[derive(Clone, Debug, PartialEq)]
pub struct PureFock {
    pub coefficients: Vec<Complex64>,
    pub tail_mass: f64,
}

impl PureFock {
    pub fn cutoff(&self) -> usize {
        self.coefficients.len() - 1
    }
}

/// Eigen-decomposition `ρ = Σ_k λ_k |v_k⟩⟨v_k|` on a truncated Fock space.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralState {
    pub eigenvalues: Vec<f64>,
    /// Each eigenvector has `cutoff + 1` amplitudes and unit norm.
    pub eigenvectors: Vec<Vec<Complex64>>,
    /// Eigenvalue mass dropped when truncating the spectrum.
    pub truncation_mass: f64,
    /// Per-eigenvector mass lost to the Fock cutoff before renormalizing.
    pub fock_tail_masses: Vec<f64>,
}

impl SpectralState {
    pub fn pure(p: &PureFock) -> Self {
        Self {
            eigenvalues: vec![1.0],
            eigenvectors: vec![p.coefficients.clone()],
            truncation_mass: 0.0,
            fock_tail_masses: vec![p.tail_mass],
        }
    }

    pub fn cutoff(&self) -> usize {
        self.eigenvectors
            .first()
            .map_or(0, |v| v.len().saturating_sub(1))
    }

    /// Total mass lost by both truncations.
    pub fn total_tail_mass(&self) -> f64 {
        self.truncation_mass
            + self
                .eigenvalues
                .iter()
                .zip(&self.fock_tail_masses)
                .map(|(l, t)| l * t)
                .sum::<f64>()
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_deviation(&self) -> f64 {
        let k = self.eigenvectors.len();
        let mut worst = 0.0f64;
        for a in 0..k {
            for b in 0..k {
                let mut g = hermitian_inner(&self.eigenvectors[a], &self.eigenvectors[b]);
                if a == b {
                    g -= 1.0;
                }
                worst = worst.max(g.norm());
            }
        }
        worst
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum FockEmbedding {
    Pure(PureFock),
    Mixed(SpectralState),
}

impl FockEmbedding {
    pub fn tail_mass(&self) -> f64 {
        match self {
            Self::Pure(p) => p.tail_mass,
            Self::Mixed(s) => s.total_tail_mass(),
        }
    }

    pub fn into_spectral(self) -> SpectralState {
        match self {
            Self::Pure(p) => SpectralState::pure(&p),
            Self::Mixed(s) => s,
        }
    }
}

/// Incrementally grown table of `ln n!`.
#[derive(Clone, Debug, Default)]
pub struct LnFactorial {
    table: Vec<f64>,
}

impl LnFactorial {
    pub fn new() -> Self {
        Self { table: vec![0.0] }
    }

    pub fn get(&mut self, n: usize) -> f64 {
        while self.table.len() <= n {
            let k = self.table.len();
            let last = *self.table.last().unwrap();
            self.table.push(last + (k as f64).ln());
        }
        self.table[n]
    }
}

/// Generator of exact (untruncated) amplitudes `⟨n|ψ⟩` of a pure state.
struct AmplitudeSource<'a> {
    state: &'a SingleModeState,
    lnf: LnFactorial,
}

impl<'a> AmplitudeSource<'a> {
    fn new(state: &'a SingleModeState) -> Self {
        Self {
            state,
            lnf: LnFactorial::new(),
        }
    }

    /// Index past which `|⟨n|ψ⟩|²` is non-increasing.
    fn mode_hint(&self) -> usize {
        match *self.state {
            SingleModeState::Coherent { alpha } | SingleModeState::EvenCat { alpha } => {
                alpha.norm_sqr().ceil() as usize + 2
            }
            SingleModeState::Fock { n } => n + 1,
            SingleModeState::CustomFock { ref coefficients } => coefficients.len(),
            _ => 0,
        }
    }

    fn coherent(&mut self, alpha: Complex64, n: usize) -> Complex64 {
        let x = alpha.norm_sqr();
        if x == 0.0 {
            return if n == 0 {
                Complex64::new(1.0, 0.0)
            } else {
                ZERO
            };
        }
        let ln_mag = -0.5 * x + n as f64 * alpha.norm().ln() - 0.5 * self.lnf.get(n);
        Complex64::from_polar(ln_mag.exp(), n as f64 * alpha.arg())
    }

    fn amplitude(&mut self, n: usize) -> Complex64 {
        match *self.state {
            SingleModeState::Coherent { alpha } => self.coherent(alpha, n),
            SingleModeState::EvenCat { alpha } => {
                if n % 2 == 1 {
                    return ZERO;
                }
                let x = alpha.norm_sqr();
                let norm = 1.0 / (2.0 * (1.0 + (-2.0 * x).exp())).sqrt();
                self.coherent(alpha, n) * (2.0 * norm)
            }
            SingleModeState::SqueezedVacuum { r, phase } => {
                if n % 2 == 1 {
                    return ZERO;
                }
                let m = n / 2;
                if r == 0.0 {
                    return if m == 0 {
                        Complex64::new(1.0, 0.0)
                    } else {
                        ZERO
                    };
                }
                let mf = m as f64;
                let ln_mag = -0.5 * r.cosh().ln() + mf * r.tanh().ln() + 0.5 * self.lnf.get(n)
                    - mf * 2f64.ln()
                    - self.lnf.get(m);
                Complex64::from_polar(ln_mag.exp(), mf * (phase + PI))
            }
            SingleModeState::Fock { n: k } => {
                if n == k {
                    Complex64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            }
            SingleModeState::CustomFock { ref coefficients } => {
                let norm = norm_sqr(coefficients).sqrt();
                coefficients.get(n).map_or(ZERO, |z| z / norm)
            }
            SingleModeState::SqueezedThermal { .. } => ZERO,
        }
    }

    /// `Σ_{n > cutoff} |⟨n|ψ⟩|²` by direct summation.
    fn tail(&mut self, cutoff: usize) -> f64 {
        if let SingleModeState::CustomFock { ref coefficients } = *self.state {
            let norm = norm_sqr(coefficients);
            return coefficients
                .iter()
                .skip(cutoff + 1)
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                / norm;
        }
        let hint = self.mode_hint();
        let mut total = 0.0;
        let mut n = cutoff + 1;
        loop {
            let p = self.amplitude(n).norm_sqr() + self.amplitude(n + 1).norm_sqr();
            total += p;
            n += 2;
            if n > hint && (p == 0.0 || p <= 1e-17 * total) {
                break;
            }
            if n > cutoff + 200_000 {
                break;
            }
        }
        total
    }
}

/// Probability mass of a coherent distribution with mean `x = |α|²`
/// above photon number `k`, by direct summation.
pub fn poisson_tail(x: f64, k: usize) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let state = SingleModeState::Coherent {
        alpha: Complex64::new(x.sqrt(), 0.0),
    };
    AmplitudeSource::new(&state).tail(k)
}

/// Embeds a pure catalog state at the given cutoff.
pub fn pure_fock(state: &SingleModeState, cutoff: usize) -> Result<PureFock> {
    state.validate()?;
    if state.is_mixed() {
        return Err(Error::InvalidState(
            "squeezed thermal state with n_th > 0 is mixed".into(),
        ));
    }
    if let SingleModeState::SqueezedThermal { r, phase, .. } = *state {
        return pure_fock(&SingleModeState::SqueezedVacuum { r, phase }, cutoff);
    }
    let mut src = AmplitudeSource::new(state);
    let mut coefficients: Vec<Complex64> = (0..=cutoff).map(|n| src.amplitude(n)).collect();
    let tail_mass = src.tail(cutoff);
    let kept = norm_sqr(&coefficients);
    if kept <= 0.0 {
        return Err(Error::CutoffTooSmall {
            cutoff,
            tail_mass: 1.0,
            threshold: DEFAULT_TAIL_THRESHOLD,
        });
    }
    let scale = 1.0 / kept.sqrt();
    coefficients.iter_mut().for_each(|z| *z *= scale);
    Ok(PureFock {
        coefficients,
        tail_mass,
    })
}

/// Largest number of squeezed-thermal eigenvectors kept.
const MAX_SPECTRAL_COMPONENTS: usize = 400;

/// Spectral decomposition of a squeezed thermal state. Eigenvalues are
/// kept until their cumulative mass reaches `1 - spectral_tol`.
pub fn squeezed_thermal_spectrum(
    r: f64,
    phase: f64,
    n_th: f64,
    cutoff: usize,
    spectral_tol: f64,
) -> Result<SpectralState> {
    let mut eigenvalues = Vec::new();
    if n_th == 0.0 {
        eigenvalues.push(1.0);
    } else {
        let q = n_th / (n_th + 1.0);
        let mut lam = 1.0 / (n_th + 1.0);
        let mut acc = 0.0;
        while acc < 1.0 - spectral_tol {
            eigenvalues.push(lam);
            acc += lam;
            lam *= q;
            if eigenvalues.len() > MAX_SPECTRAL_COMPONENTS.min(cutoff + 1) {
                let remaining = (1.0 - acc).max(0.0);
                return Err(Error::CutoffTooSmall {
                    cutoff,
                    tail_mass: remaining,
                    threshold: spectral_tol,
                });
            }
        }
    }
    let k = eigenvalues.len();
    // exact lower coefficients of S|0⟩ in an extended space, then
    // |n_ξ⟩ = (cosh r a† + sinh r e^{-iθ} a)|(n-1)_ξ⟩ / √n
    let ext = 2 * (cutoff + 1) + 4 * k + 40;
    let src_state = SingleModeState::SqueezedVacuum { r, phase };
    let mut src = AmplitudeSource::new(&src_state);
    let mut v: Vec<Complex64> = (0..ext).map(|n| src.amplitude(n)).collect();
    let vac_tail = src.tail(ext - 1);
    let (ch, sh) = (r.cosh(), r.sinh());
    let b = Complex64::from_polar(sh, -phase);
    let mut eigenvectors = Vec::with_capacity(k);
    let mut fock_tail_masses = Vec::with_capacity(k);
    for n in 0..k {
        if n > 0 {
            let mut next = vec![ZERO; ext];
            for j in 0..ext {
                if j >= 1 {
                    next[j] += v[j - 1] * (ch * (j as f64).sqrt());
                }
                if j + 1 < ext {
                    next[j] += v[j + 1] * b * ((j + 1) as f64).sqrt();
                }
            }
            let scale = 1.0 / (n as f64).sqrt();
            v = next.into_iter().map(|z| z * scale).collect();
        }
        let kept: Vec<Complex64> = v[..=cutoff].to_vec();
        let kept_mass = norm_sqr(&kept);
        let tail = v[cutoff + 1..].iter().map(|z| z.norm_sqr()).sum::<f64>()
            + if n == 0 { vac_tail } else { 0.0 };
        if kept_mass <= 0.0 {
            return Err(Error::CutoffTooSmall {
                cutoff,
                tail_mass: 1.0,
                threshold: DEFAULT_TAIL_THRESHOLD,
            });
        }
        let scale = 1.0 / kept_mass.sqrt();
        eigenvectors.push(kept.into_iter().map(|z| z * scale).collect());
        fock_tail_masses.push(tail);
    }
    let truncation_mass = (1.0 - eigenvalues.iter().sum::<f64>()).max(0.0);
    Ok(SpectralState {
        eigenvalues,
        eigenvectors,
        truncation_mass,
        fock_tail_masses,
    })
}

/// Embeds any catalog state at a fixed cutoff. Mixed states are returned
/// in spectral form with eigenvalue truncation at `1e-10`.
pub fn fock_embed(state: &SingleModeState, cutoff: usize) -> Result<FockEmbedding> {
    state.validate()?;
    match *state {
        SingleModeState::SqueezedThermal { r, phase, n_th } if n_th > 0.0 => {
            Ok(FockEmbedding::Mixed(squeezed_thermal_spectrum(
                r,
                phase,
                n_th,
                cutoff,
                DEFAULT_TAIL_THRESHOLD,
            )?))
        }
        _ => Ok(FockEmbedding::Pure(pure_fock(state, cutoff)?)),
    }
}

/// Embeds at a fixed cutoff and rejects tails above `threshold`.
pub fn fock_embed_checked(
    state: &SingleModeState,
    cutoff: usize,
    threshold: f64,
) -> Result<FockEmbedding> {
    let e = fock_embed(state, cutoff)?;
    let tail = e.tail_mass();
    if tail > threshold {
        return Err(Error::CutoffTooSmall {
            cutoff,
            tail_mass: tail,
            threshold,
        });
    }
    Ok(e)
}

/// Embeds with a cutoff grown by doubling from `initial` until the tail is
/// below `threshold` or `max_cutoff` is exceeded.
pub fn fock_embed_auto(
    state: &SingleModeState,
    initial: usize,
    max_cutoff: usize,
    threshold: f64,
) -> Result<FockEmbedding> {
    let mut cutoff = initial.max(1);
    loop {
        match fock_embed_checked(state, cutoff, threshold) {
            Ok(e) => return Ok(e),
            Err(Error::CutoffTooSmall { .. }) if cutoff < max_cutoff => {
                cutoff = (cutoff * 2).min(max_cutoff);
            }
            Err(e) => return Err(e),
        }
    }
}

/// `a v`, same length as `v`.
pub fn apply_annihilation(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; v.len()];
    for n in 1..v.len() {
        out[n - 1] = v[n] * (n as f64).sqrt();
    }
    out
}

/// `a† v`, one element longer than `v`.
pub fn apply_creation(v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![ZERO; v.len() + 1];
    for n in 0..v.len() {
        out[n + 1] = v[n] * ((n + 1) as f64).sqrt();
    }
    out
}

/// `X_φ v` with `X_φ = i(e^{-iφ} a† - e^{iφ} a)/√2`, one element longer.
pub fn apply_quadrature(v: &[Complex64], phi: f64) -> Vec<Complex64> {
    let up = apply_creation(v);
    let down = apply_annihilation(v);
    let ep = Complex64::from_polar(1.0, phi);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..up.len())
        .map(|n| {
            let d = if n < down.len() { down[n] } else { ZERO };
            I * (up[n] * ep.conj() - d * ep) * s
        })
        .collect()
}

fn inner_padded(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Quantum Fisher information of `ρ` for generator `G` from its spectral
/// form, summing over all eigenpairs (diagonal ones included).
pub fn spectral_qfi<F>(rho: &SpectralState, generator: F) -> f64
where
    F: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let images: Vec<Vec<Complex64>> = rho.eigenvectors.iter().map(|v| generator(v)).collect();
    let mut first = 0.0;
    for (lam, g) in rho.eigenvalues.iter().zip(&images) {
        first += lam * norm_sqr(g);
    }
    let mut second = 0.0;
    let k = rho.eigenvalues.len();
    for a in 0..k {
        for b in 0..k {
            let (la, lb) = (rho.eigenvalues[a], rho.eigenvalues[b]);
            if la + lb < 1e-14 {
                continue;
            }
            let m = inner_padded(&rho.eigenvectors[a], &images[b]);
            second += la * lb / (la + lb) * m.norm_sqr();
        }
    }
    4.0 * first - 8.0 * second
}

/// `F_X(φ)` for the quadrature `X_φ`.
pub fn mixed_quadrature_qfi(rho: &SpectralState, phi: f64) -> f64 {
    spectral_qfi(rho, |v| apply_quadrature(v, phi))
}

/// Quadrature QFI `F_X(φ) = A + Re(B e^{2iφ})` summarized by its harmonic
/// coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureProfile {
    pub mean: f64,
    pub harmonic: Complex64,
}

impl QuadratureProfile {
    pub fn max(&self) -> f64 {
        self.mean + self.harmonic.norm()
    }

    pub fn at(&self, phi: f64) -> f64 {
        self.mean + (self.harmonic * Complex64::from_polar(1.0, 2.0 * phi)).re
    }

    /// A maximizing angle in `[0, π)`.
    pub fn argmax(&self) -> f64 {
        (-self.harmonic.arg() / 2.0).rem_euclid(PI)
    }
}

/// Recovers the quadrature profile from three evaluations.
pub fn quadrature_profile(rho: &SpectralState) -> QuadratureProfile {
    let f0 = mixed_quadrature_qfi(rho, 0.0);
    let f1 = mixed_quadrature_qfi(rho, PI / 4.0);
    let f2 = mixed_quadrature_qfi(rho, PI / 2.0);
    let mean = 0.5 * (f0 + f2);
    QuadratureProfile {
        mean,
        harmonic: Complex64::new(0.5 * (f0 - f2), mean - f1),
    }
}

/// `max_φ F_X(φ)`.
pub fn max_quadrature_qfi(rho: &SpectralState) -> f64 {
    quadrature_profile(rho).max()
}

/// `F_n(ρ)` for the number operator.
pub fn mixed_number_qfi(rho: &SpectralState) -> f64 {
    spectral_qfi(rho, |v| {
        v.iter().enumerate().map(|(n, z)| z * n as f64).collect()
    })
}

/// Cross term `2 Σ λ ⟨{n, a}⟩ - 8 Σ λ_a λ_b/(λ_a+λ_b) ⟨v_a|n|v_b⟩⟨v_b|a|v_a⟩`.
pub fn mixed_cross_term(rho: &SpectralState) -> Complex64 {
    let k = rho.eigenvalues.len();
    let nvecs: Vec<Vec<Complex64>> = rho
        .eigenvectors
        .iter()
        .map(|v| v.iter().enumerate().map(|(n, z)| z * n as f64).collect())
        .collect();
    let avecs: Vec<Vec<Complex64>> = rho
        .eigenvectors
        .iter()
        .map(|v| apply_annihilation(v))
        .collect();
    let mut first = ZERO;
    for a in 0..k {
        let v = &rho.eigenvectors[a];
        // {n, a} = 2 a† a a + a
        let m = fock_sum_moments(v);
        first += (m.beta1 * 2.0 + m.alpha1) * rho.eigenvalues[a];
    }
    let mut second = ZERO;
    for a in 0..k {
        for b in 0..k {
            let (la, lb) = (rho.eigenvalues[a], rho.eigenvalues[b]);
            if la + lb < 1e-14 {
                continue;
            }
            let nab = inner_padded(&rho.eigenvectors[a], &nvecs[b]);
            let aba = inner_padded(&rho.eigenvectors[b], &avecs[a]);
            second += nab * aba * (la * lb / (la + lb));
        }
    }
    first * 2.0 - second * 8.0
}
