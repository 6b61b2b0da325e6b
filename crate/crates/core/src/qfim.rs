//! Analytic quantum Fisher information matrix for one nonclassical and one
//! coherent input, and the sensitivity bounds that follow from it.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, max_abs_diff, psd_inverse_quadratic_form};
use crate::network::{build_optimal_network, LinearNetwork, WeightVector};
use crate::serde_complex;
use crate::states::{
    self, fock_embed, metrological_power_from_moments, mixed_cross_term, mixed_number_qfi,
    quadrature_profile, squeezed_thermal_power, SingleModeState, SpectralState, StateMoments,
};

/// Relative tolerance for the closed-form inverse check.
pub const CLOSED_FORM_TOL: f64 = 1e-10;

/// Nonclassical input in either moment or spectral form.
#[derive(Clone, Debug, PartialEq)]
pub enum NonclassicalInput {
    Pure(StateMoments),
    Mixed(SpectralState),
}

impl NonclassicalInput {
    /// Moments for pure states, spectral form for mixed ones.
    pub fn from_state(state: &SingleModeState, cutoff: usize) -> Result<Self> {
        if state.is_mixed() {
            Ok(Self::Mixed(fock_embed(state, cutoff)?.into_spectral()))
        } else {
            Ok(Self::Pure(states::moments_of(state, cutoff)?))
        }
    }

    pub fn mean_photons(&self) -> f64 {
        match self {
            Self::Pure(m) => m.n1,
            Self::Mixed(rho) => states::spectral_moments(rho).n1,
        }
    }
}

/// Coefficients of `𝓕 = c_u uuᵀ + c_v vvᵀ + c_s(uvᵀ+vuᵀ) + 𝒩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfimCoefficients {
    pub c_u: f64,
    pub c_v: f64,
    pub c_s: f64,
    /// Coherent amplitude after phase alignment.
    #[serde(with = "serde_complex::scalar")]
    pub alpha: Complex64,
    /// Phase added to the coherent amplitude by the alignment.
    pub coherent_rotation: f64,
    /// `Re(⟨a⟩ α*)`, which enters the exact matrix beyond the three-vector form.
    pub first_moment_shift: f64,
    pub metrological_power: f64,
    pub n1: f64,
    pub n2: f64,
}

impl QfimCoefficients {
    pub fn n_total(&self) -> f64 {
        self.n1 + self.n2
    }
}

fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y <= -PI {
        y + 2.0 * PI
    } else {
        y
    }
}

/// Rotates `alpha` so that `arg(α²) = target`, choosing the branch nearest
/// the original phase.
fn align_coherent(alpha: Complex64, target: Option<f64>) -> (Complex64, f64) {
    let Some(t) = target else {
        return (alpha, 0.0);
    };
    if alpha.norm() == 0.0 {
        return (alpha, 0.0);
    }
    let a0 = alpha.arg();
    let r1 = wrap_pi(t / 2.0 - a0);
    let r2 = wrap_pi(t / 2.0 + PI - a0);
    let rot = if r1.abs() <= r2.abs() { r1 } else { r2 };
    (alpha * Complex64::from_polar(1.0, rot), rot)
}

/// Pure-state coefficients with `arg(α²) = arg(⟨a²⟩ - ⟨a⟩²)` enforced.
pub fn qfim_coefficients(m: &StateMoments, alpha: Complex64) -> QfimCoefficients {
    let m02 = m.xi1 - m.alpha1 * m.alpha1;
    let target = (m02.norm() > 1e-14 * m.n1.max(1.0)).then(|| m02.arg());
    let (alpha, rot) = align_coherent(alpha, target);
    let n2 = alpha.norm_sqr();
    let w = metrological_power_from_moments(m);
    let cross = m.beta1 + m.alpha1 * 0.5 - m.alpha1 * m.n1;
    QfimCoefficients {
        c_u: 4.0 * (m.nu1 - m.n1),
        c_v: 8.0 * n2 * w,
        c_s: 8.0 * (cross * alpha.conj()).re,
        alpha,
        coherent_rotation: rot,
        first_moment_shift: (m.alpha1 * alpha.conj()).re,
        metrological_power: w,
        n1: m.n1,
        n2,
    }
}

/// Mixed-state coefficients from spectral sums.
///
/// `c_v = 2 n2 (max_φ F_X - 2)`, which coincides with `8 n2 𝒲` on pure
/// states; the coherent phase is aligned with the maximizing quadrature.
pub fn qfim_mixed_coefficients(rho: &SpectralState, alpha: Complex64) -> QfimCoefficients {
    let profile = quadrature_profile(rho);
    let fmax = profile.max();
    let target = (profile.harmonic.norm() > 1e-12 * profile.mean.abs().max(1.0))
        .then(|| PI - 2.0 * profile.argmax());
    let (alpha, rot) = align_coherent(alpha, target);
    let n2 = alpha.norm_sqr();
    let mom = states::spectral_moments(rho);
    QfimCoefficients {
        c_u: mixed_number_qfi(rho) - 4.0 * mom.n1,
        c_v: 2.0 * n2 * (fmax - 2.0),
        c_s: 2.0 * (mixed_cross_term(rho) * alpha.conj()).re,
        alpha,
        coherent_rotation: rot,
        first_moment_shift: (mom.alpha1 * alpha.conj()).re,
        metrological_power: (fmax / 4.0 - 0.5).max(0.0),
        n1: mom.n1,
        n2,
    }
}

/// Coefficients for either input form.
pub fn coefficients_for(input: &NonclassicalInput, alpha: Complex64) -> QfimCoefficients {
    match input {
        NonclassicalInput::Pure(m) => qfim_coefficients(m, alpha),
        NonclassicalInput::Mixed(rho) => qfim_mixed_coefficients(rho, alpha),
    }
}

/// Assembled Fisher matrix together with its parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QfimBundle {
    pub coefficients: QfimCoefficients,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub noise_diag: Vec<f64>,
    pub matrix: Array2<f64>,
    /// Phase applied to the second network column to make `v` real.
    pub column_rotation: f64,
    /// The network with the column rotation applied.
    pub network: LinearNetwork,
}

impl QfimBundle {
    pub fn n1(&self) -> f64 {
        self.coefficients.n1
    }

    pub fn n2(&self) -> f64 {
        self.coefficients.n2
    }

    pub fn n_total(&self) -> f64 {
        self.coefficients.n_total()
    }

    /// Rebuilds the matrix from the stored vectors and coefficients.
    pub fn recompose(&self) -> Array2<f64> {
        let c = &self.coefficients;
        compose(c.c_u, c.c_v, c.c_s, &self.u, &self.v, &self.noise_diag)
    }

    /// Fisher matrix including the first-moment terms that vanish when
    /// `Re(⟨a⟩ α*) = 0`.
    pub fn exact_matrix(&self) -> Array2<f64> {
        let r = self.coefficients.first_moment_shift;
        let mut f = self.matrix.clone();
        if r == 0.0 {
            return f;
        }
        let m = self.u.len();
        for j in 0..m {
            f[[j, j]] += 8.0 * r * self.v[j];
            for k in 0..m {
                f[[j, k]] -= 4.0 * r * (self.u[j] * self.v[k] + self.v[j] * self.u[k]);
            }
        }
        f
    }

    /// `max |𝓕 - 𝓕ᵀ|`.
    pub fn symmetry_defect(&self) -> f64 {
        max_abs_diff(&self.matrix, &self.matrix.t().to_owned())
    }
}

fn compose(c_u: f64, c_v: f64, c_s: f64, u: &[f64], v: &[f64], noise: &[f64]) -> Array2<f64> {
    let m = u.len();
    Array2::from_shape_fn((m, m), |(j, k)| {
        let mut x = c_u * u[j] * u[k] + c_v * v[j] * v[k] + c_s * (u[j] * v[k] + v[j] * u[k]);
        if j == k {
            x += noise[j];
        }
        x
    })
}

/// Assembles the matrix on a given network, rotating the second column so
/// that `v_j = U_j1 U*_j2` is real.
pub fn qfim_assemble(coeffs: &QfimCoefficients, network: &LinearNetwork) -> Result<QfimBundle> {
    let u_mat = network.matrix();
    let m = network.modes();
    if m < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: m,
        });
    }
    if coeffs.n1 < 0.0 || coeffs.n2 < 0.0 {
        return Err(Error::InvalidArgument("photon numbers must be >= 0".into()));
    }
    let raw: Vec<Complex64> = (0..m)
        .map(|j| u_mat[[j, 0]] * u_mat[[j, 1]].conj())
        .collect();
    let sum_sq: Complex64 = raw.iter().map(|z| z * z).sum();
    let scale: f64 = raw.iter().map(|z| z.norm_sqr()).sum();
    let chi = if sum_sq.norm() > 1e-14 * scale.max(1e-300) {
        sum_sq.arg() / 2.0
    } else {
        0.0
    };
    let rot = Complex64::from_polar(1.0, -chi);
    let rotated: Vec<Complex64> = raw.iter().map(|z| z * rot).collect();
    let residual = rotated.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    if residual > 1e-10 {
        return Err(Error::ComplexResidual { residual });
    }
    let v: Vec<f64> = rotated.iter().map(|z| z.re).collect();
    let u: Vec<f64> = (0..m).map(|j| u_mat[[j, 0]].norm_sqr()).collect();
    let noise_diag: Vec<f64> = (0..m)
        .map(|j| 4.0 * (u[j] * coeffs.n1 + u_mat[[j, 1]].norm_sqr() * coeffs.n2))
        .collect();
    let matrix = compose(coeffs.c_u, coeffs.c_v, coeffs.c_s, &u, &v, &noise_diag);
    Ok(QfimBundle {
        coefficients: *coeffs,
        u,
        v,
        noise_diag,
        matrix,
        column_rotation: chi,
        network: network.rotate_column(1, chi),
    })
}

/// `Δ²q = 4 wᵀ 𝓕⁺ w`.
pub fn global_variance(bundle: &QfimBundle, w: &WeightVector) -> Result<f64> {
    Ok(4.0 * psd_inverse_quadratic_form(&bundle.matrix, w.entries())?)
}

/// `4/(4N + c_v - c_s²/(4N + c_u))`, valid on the optimal network.
pub fn closed_form_variance(coeffs: &QfimCoefficients) -> f64 {
    let n4 = 4.0 * coeffs.n_total();
    let cross = if coeffs.c_s == 0.0 {
        0.0
    } else {
        coeffs.c_s * coeffs.c_s / (n4 + coeffs.c_u)
    };
    4.0 / (n4 + coeffs.c_v - cross)
}

/// Variance from the solve together with its closed form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceCheck {
    pub numeric: f64,
    pub closed_form: f64,
    pub relative_gap: f64,
}

/// Solves on the optimal network and checks the closed form.
pub fn optimal_variance(bundle: &QfimBundle, w: &WeightVector) -> Result<VarianceCheck> {
    let numeric = global_variance(bundle, w)?;
    let closed_form = closed_form_variance(&bundle.coefficients);
    let relative_gap = (numeric - closed_form).abs() / closed_form.abs().max(f64::MIN_POSITIVE);
    if relative_gap > CLOSED_FORM_TOL {
        return Err(Error::ClosedFormMismatch {
            numeric,
            closed_form,
        });
    }
    Ok(VarianceCheck {
        numeric,
        closed_form,
        relative_gap,
    })
}

/// `s = log_N √(N + 2 n2 𝒲)`, undefined for `N ≤ 1.5`.
pub fn scaling_exponent(n_total: f64, n2: f64, w: f64) -> Option<f64> {
    (n_total > 1.5).then(|| 0.5 * (n_total + 2.0 * n2 * w).ln() / n_total.ln())
}

/// `Δq` bounds and derived quantities for one configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub variance_q: f64,
    pub closed_form_variance: f64,
    pub bound_exact: f64,
    pub bound_universal: f64,
    pub scaling_exponent: Option<f64>,
    pub n1: f64,
    pub n2: f64,
    pub n_total: f64,
    pub metrological_power: f64,
    pub coefficients: QfimCoefficients,
    pub column_rotation: f64,
}

/// Both bounds on the optimal network for the given weights.
pub fn sensitivity_bounds(
    input: &NonclassicalInput,
    n2: f64,
    w: &WeightVector,
) -> Result<SensitivityReport> {
    if !(n2 >= 0.0) || !n2.is_finite() {
        return Err(Error::InvalidArgument("n2 must be finite and >= 0".into()));
    }
    let coeffs = coefficients_for(input, Complex64::new(n2.sqrt(), 0.0));
    let network = build_optimal_network(w)?;
    let bundle = qfim_assemble(&coeffs, &network)?;
    let check = optimal_variance(&bundle, w)?;
    let n = coeffs.n_total();
    let c = &coeffs;
    let cross = if c.c_s == 0.0 {
        0.0
    } else {
        c.c_s * c.c_s / (16.0 * n + 4.0 * c.c_u)
    };
    let bound_exact = 1.0 / (n + c.c_v / 4.0 - cross).sqrt();
    let universal_den = n + 2.0 * n2 * c.metrological_power;
    Ok(SensitivityReport {
        variance_q: check.numeric,
        closed_form_variance: check.closed_form,
        bound_exact,
        bound_universal: 1.0 / universal_den.sqrt(),
        scaling_exponent: scaling_exponent(n, n2, c.metrological_power),
        n1: c.n1,
        n2,
        n_total: n,
        metrological_power: c.metrological_power,
        coefficients: coeffs,
        column_rotation: bundle.column_rotation,
    })
}

/// Families of nonclassical inputs parameterized by their mean photon number.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateFamily {
    SqueezedVacuum,
    EvenCat,
    /// Squeezed thermal with `n_th = thermal_ratio · sinh² r`.
    SqueezedThermal {
        thermal_ratio: f64,
    },
}

impl StateFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SqueezedVacuum => "squeezed_vacuum",
            Self::EvenCat => "even_cat",
            Self::SqueezedThermal { .. } => "squeezed_thermal",
        }
    }

    /// Family member with mean photon number `n1`.
    pub fn with_mean_photons(&self, n1: f64) -> Result<SingleModeState> {
        if !(n1 >= 0.0) || !n1.is_finite() {
            return Err(Error::InvalidArgument(format!("mean photon number {n1}")));
        }
        match *self {
            Self::SqueezedVacuum => Ok(SingleModeState::squeezed_vacuum(n1.sqrt().asinh(), 0.0)),
            Self::EvenCat => {
                let x = solve_cat_intensity(n1)?;
                Ok(SingleModeState::even_cat(Complex64::new(x.sqrt(), 0.0)))
            }
            Self::SqueezedThermal { thermal_ratio: k } => {
                if !(k >= 0.0) {
                    return Err(Error::InvalidArgument("thermal ratio must be >= 0".into()));
                }
                // n̄ = 2k s⁴ + (1+k) s² with s² = sinh² r
                let b = 1.0 + k;
                let s2 = 2.0 * n1 / (b + (b * b + 8.0 * k * n1).sqrt());
                Ok(SingleModeState::squeezed_thermal(
                    s2.sqrt().asinh(),
                    0.0,
                    k * s2,
                ))
            }
        }
    }

    /// Metrological power of the member with mean photon number `n1`.
    pub fn metrological_power(&self, n1: f64) -> Result<f64> {
        match self.with_mean_photons(n1)? {
            SingleModeState::SqueezedThermal { r, n_th, .. } => Ok(squeezed_thermal_power(r, n_th)),
            s => Ok(metrological_power_from_moments(
                &states::closed_form_moments(&s).expect("closed form exists"),
            )),
        }
    }
}

/// Solves `x tanh x = n1` for the cat intensity `x = |α|²`.
pub fn solve_cat_intensity(n1: f64) -> Result<f64> {
    if n1 == 0.0 {
        return Ok(0.0);
    }
    let f = |x: f64| x * x.tanh() - n1;
    let mut hi = n1.sqrt().max(n1) + 1.0;
    let mut iters = 0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        iters += 1;
        if iters > 200 {
            return Err(Error::RootSolve(format!("no bracket for cat n1 = {n1}")));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let x = 0.5 * (lo + hi);
    if (f(x)).abs() > 1e-10 * n1.max(1.0) {
        return Err(Error::RootSolve(format!(
            "cat inversion did not converge for n1 = {n1}"
        )));
    }
    Ok(x)
}

/// One point of a scaling scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub sigma: f64,
    pub s: Option<f64>,
    pub n1: f64,
    pub n2: f64,
    pub metrological_power: f64,
    pub bound_universal: f64,
}

/// Scaling exponent at `σ = n1/n2` with `n1 + n2 = N`.
pub fn scan_point(family: &StateFamily, sigma: f64, n_total: f64) -> Result<ScanPoint> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sigma must be > 0, got {sigma}"
        )));
    }
    if !(n_total > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "N must be > 1, got {n_total}"
        )));
    }
    let n2 = n_total / (1.0 + sigma);
    let n1 = n_total - n2;
    let w = family.metrological_power(n1)?;
    Ok(ScanPoint {
        sigma,
        s: scaling_exponent(n_total, n2, w),
        n1,
        n2,
        metrological_power: w,
        bound_universal: 1.0 / (n_total + 2.0 * n2 * w).sqrt(),
    })
}

/// Evaluates [`scan_point`] over a grid, keeping per-point failures.
pub fn scaling_scan(
    family: &StateFamily,
    sigma_grid: &[f64],
    n_total: f64,
) -> Vec<Result<ScanPoint>> {
    sigma_grid
        .iter()
        .map(|&s| scan_point(family, s, n_total))
        .collect()
}

/// `Δ²q` for a single nonclassical input (`α = 0`) on an arbitrary network,
/// where `𝓕 = c_u uuᵀ + 4 n1 Diag(u)`.
pub fn single_input_variance(m: &StateMoments, network: &LinearNetwork, w: &[f64]) -> Result<f64> {
    let modes = network.modes();
    if w.len() != modes {
        return Err(Error::DimensionMismatch {
            expected: modes,
            found: w.len(),
        });
    }
    let u: Vec<f64> = (0..modes)
        .map(|j| network.matrix()[[j, 0]].norm_sqr())
        .collect();
    let c_u = 4.0 * (m.nu1 - m.n1);
    let f = Array2::from_shape_fn((modes, modes), |(j, k)| {
        c_u * u[j] * u[k] + if j == k { 4.0 * m.n1 * u[j] } else { 0.0 }
    });
    Ok(4.0 * psd_inverse_quadratic_form(&f, w)?)
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Effective two-vector form `c̃_u ũũᵀ + c̃_v vvᵀ` of the noise-free matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveQfi {
    /// `c_u - c_s²/c_v`
    pub c_u_eff: Option<f64>,
    /// `c_v - c_s²/c_u`
    pub c_v_eff: Option<f64>,
    /// `vᵀ𝓕⁻¹v = 1/c̃_v` when defined.
    pub v_inverse: Option<f64>,
}

pub fn effective_qfi(c: &QfimCoefficients) -> EffectiveQfi {
    let c_u_eff = (c.c_v != 0.0).then(|| c.c_u - c.c_s * c.c_s / c.c_v);
    let c_v_eff = (c.c_u != 0.0).then(|| c.c_v - c.c_s * c.c_s / c.c_u);
    EffectiveQfi {
        c_u_eff,
        c_v_eff,
        v_inverse: c_v_eff.filter(|x| *x != 0.0).map(|x| 1.0 / x),
    }
}

/// `wᵀ𝓕w/|w|⁴`, the Fisher information on the collective phase along `w`.
pub fn projected_information(matrix: &Array2<f64>, w: &[f64]) -> f64 {
    let m = w.len();
    let mut acc = 0.0;
    for j in 0..m {
        for k in 0..m {
            acc += w[j] * matrix[[j, k]] * w[k];
        }
    }
    let n2: f64 = w.iter().map(|x| x * x).sum();
    acc / (n2 * n2)
}

/// Checks that the bundle matrix is symmetric and recomposes exactly.
pub fn bundle_consistency(bundle: &QfimBundle) -> f64 {
    let scale = max_abs(&bundle.matrix).max(1.0);
    max_abs_diff(&bundle.matrix, &bundle.recompose()).max(bundle.symmetry_defect()) / scale
}
