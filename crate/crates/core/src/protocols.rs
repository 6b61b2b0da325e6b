//! Two-step estimation of functions of the phase differences, energy
//! allocation, and the shared-reference weight adapter.
//!
//! Functions act on the `d` differences `θ̂_i = θ_{2i} - θ_{2i+1}`; the
//! network sees `2d` phases.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::network::{validate_weights, Scheme, WeightVector};
use crate::qfim::StateFamily;
use crate::{Error, Result};

/// Symmetry tolerance for Hessians at probed points.
pub const HESSIAN_SYMMETRY_TOL: f64 = 1e-8;

/// Ratio `N1/N` above which a plan is flagged as marginal.
pub const MARGINAL_FRACTION: f64 = 0.1;

/// A smooth function of `d` phase differences.
pub trait FunctionModel {
    fn dimension(&self) -> usize;

    fn value(&self, theta: &[f64]) -> f64;

    fn gradient(&self, theta: &[f64]) -> Vec<f64>;

    /// Central differences of the gradient with step
    /// `h_i = max(1e-4, 1e-4 |θ_i|)`.
    fn hessian(&self, theta: &[f64]) -> Array2<f64> {
        numeric_hessian(self, theta, 1e-4)
    }
}

/// Central-difference Hessian from the gradient, with relative step `rel`.
/// The result is not symmetrized.
pub fn numeric_hessian<F: FunctionModel + ?Sized>(f: &F, theta: &[f64], rel: f64) -> Array2<f64> {
    let d = theta.len();
    let mut h = Array2::zeros((d, d));
    let mut x = theta.to_vec();
    for j in 0..d {
        let step = rel.max(rel * theta[j].abs());
        x[j] = theta[j] + step;
        let gp = f.gradient(&x);
        x[j] = theta[j] - step;
        let gm = f.gradient(&x);
        x[j] = theta[j];
        for i in 0..d {
            h[[i, j]] = (gp[i] - gm[i]) / (2.0 * step);
        }
    }
    h
}

/// Hessian checked for symmetry and then symmetrized.
pub fn checked_hessian<F: FunctionModel + ?Sized>(f: &F, theta: &[f64]) -> Result<Array2<f64>> {
    let d = f.dimension();
    if theta.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: theta.len(),
        });
    }
    let h = f.hessian(theta);
    if h.dim() != (d, d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: h.nrows(),
        });
    }
    let scale = h.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut asym = 0.0f64;
    for i in 0..d {
        for j in 0..i {
            asym = asym.max((h[[i, j]] - h[[j, i]]).abs());
        }
    }
    if asym > HESSIAN_SYMMETRY_TOL * scale {
        return Err(Error::InvalidArgument(format!(
            "hessian asymmetric by {asym:e}"
        )));
    }
    Ok((&h + &h.t()) * 0.5)
}

/// One monomial `coefficient · Π θ_i^{powers_i}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monomial {
    pub coefficient: f64,
    pub powers: Vec<u32>,
}

/// A polynomial in the phase differences, with exact derivatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polynomial {
    pub dimension: usize,
    pub terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(dimension: usize, terms: Vec<Monomial>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidArgument(
                "function dimension must be >= 1".into(),
            ));
        }
        for t in &terms {
            if t.powers.len() != dimension {
                return Err(Error::DimensionMismatch {
                    expected: dimension,
                    found: t.powers.len(),
                });
            }
            if !t.coefficient.is_finite() {
                return Err(Error::InvalidArgument("non-finite coefficient".into()));
            }
        }
        Ok(Self { dimension, terms })
    }

    fn monomial(powers: &[u32], theta: &[f64], lowered: &[usize]) -> f64 {
        let mut p = powers.to_vec();
        let mut factor = 1.0;
        for &i in lowered {
            if p[i] == 0 {
                return 0.0;
            }
            factor *= p[i] as f64;
            p[i] -= 1;
        }
        factor
            * p.iter()
                .zip(theta)
                .map(|(k, x)| x.powi(*k as i32))
                .product::<f64>()
    }
}

impl FunctionModel for Polynomial {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * Self::monomial(&t.powers, theta, &[]))
            .sum()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.dimension)
            .map(|i| {
                self.terms
                    .iter()
                    .map(|t| t.coefficient * Self::monomial(&t.powers, theta, &[i]))
                    .sum()
            })
            .collect()
    }

    fn hessian(&self, theta: &[f64]) -> Array2<f64> {
        let d = self.dimension;
        Array2::from_shape_fn((d, d), |(i, j)| {
            self.terms
                .iter()
                .map(|t| t.coefficient * Self::monomial(&t.powers, theta, &[i, j]))
                .sum()
        })
    }
}

/// Named function models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinFunction {
    /// Mean of the `dimension` differences.
    Average { dimension: usize },
    /// `θ̂_0 - θ̂_1`.
    Difference,
    /// Product of the `dimension` differences.
    Product { dimension: usize },
    Polynomial {
        dimension: usize,
        terms: Vec<Monomial>,
    },
}

impl BuiltinFunction {
    pub fn to_polynomial(&self) -> Result<Polynomial> {
        let unit = |d: usize, i: usize| -> Vec<u32> { (0..d).map(|k| u32::from(k == i)).collect() };
        match self {
            Self::Average { dimension: d } => {
                let d = *d;
                if d == 0 {
                    return Err(Error::InvalidArgument(
                        "function dimension must be >= 1".into(),
                    ));
                }
                Polynomial::new(
                    d,
                    (0..d)
                        .map(|i| Monomial {
                            coefficient: 1.0 / d as f64,
                            powers: unit(d, i),
                        })
                        .collect(),
                )
            }
            Self::Difference => Polynomial::new(
                2,
                vec![
                    Monomial {
                        coefficient: 1.0,
                        powers: vec![1, 0],
                    },
                    Monomial {
                        coefficient: -1.0,
                        powers: vec![0, 1],
                    },
                ],
            ),
            Self::Product { dimension: d } => Polynomial::new(
                *d,
                vec![Monomial {
                    coefficient: 1.0,
                    powers: vec![1; *d],
                }],
            ),
            Self::Polynomial { dimension, terms } => Polynomial::new(*dimension, terms.clone()),
        }
    }
}

/// Paired weights parallel to `∇f(θ̃)`: difference `i` puts `+g_i` on its
/// sensing mode `2i` and `-g_i` on its reference `2i+1`, then the vector is
/// normalized to unit 1-norm.
pub fn linearize_weights<F: FunctionModel + ?Sized>(
    f: &F,
    theta_tilde: &[f64],
) -> Result<WeightVector> {
    let g = checked_gradient(f, theta_tilde)?;
    let raw: Vec<f64> = g.iter().flat_map(|gi| [*gi, -*gi]).collect();
    validate_weights(&raw, Scheme::Paired)
}

fn checked_gradient<F: FunctionModel + ?Sized>(f: &F, theta: &[f64]) -> Result<Vec<f64>> {
    if theta.len() != f.dimension() {
        return Err(Error::DimensionMismatch {
            expected: f.dimension(),
            found: theta.len(),
        });
    }
    let g = f.gradient(theta);
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("non-finite gradient".into()));
    }
    if g.iter().all(|x| *x == 0.0) {
        return Err(Error::ZeroGradient);
    }
    Ok(g)
}

/// Energy split between the crude first step and the linear second step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub n_total: f64,
    pub n1: f64,
    pub n2: f64,
    pub s: f64,
    /// Set when `N1/N` exceeds [`MARGINAL_FRACTION`].
    pub marginal: bool,
}

impl AllocationPlan {
    pub fn validate(&self) -> Result<()> {
        let ok = self.n1 > 0.0
            && self.n2 > 0.0
            && self.n_total.is_finite()
            && (self.n1 + self.n2 - self.n_total).abs() <= 1e-12 * self.n_total
            && (0.5..=1.0).contains(&self.s);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPlan(format!(
                "N = {}, N1 = {}, N2 = {}, s = {}",
                self.n_total, self.n1, self.n2, self.s
            )))
        }
    }
}

/// `N1 = N^{(2s+1)/(4s+1)}`, `N2 = N - N1`.
pub fn allocation_plan(n_total: f64, s: f64) -> Result<AllocationPlan> {
    allocation_plan_with_prefactor(n_total, s, 1.0)
}

/// `N1 = c N^{(2s+1)/(4s+1)}`.
pub fn allocation_plan_with_prefactor(
    n_total: f64,
    s: f64,
    prefactor: f64,
) -> Result<AllocationPlan> {
    if !(n_total > 1.0) || !n_total.is_finite() {
        return Err(Error::InvalidPlan(format!("N = {n_total} must exceed 1")));
    }
    if !(0.5..=1.0).contains(&s) {
        return Err(Error::InvalidPlan(format!("s = {s} outside [0.5, 1]")));
    }
    if !(prefactor > 0.0) {
        return Err(Error::InvalidPlan(format!(
            "prefactor {prefactor} must be positive"
        )));
    }
    let n1 = prefactor * n_total.powf((2.0 * s + 1.0) / (4.0 * s + 1.0));
    if n1 >= n_total {
        return Err(Error::InvalidPlan(format!("N1 = {n1} >= N = {n_total}")));
    }
    Ok(AllocationPlan {
        n_total,
        n1,
        n2: n_total - n1,
        s,
        marginal: n1 / n_total > MARGINAL_FRACTION,
    })
}

/// Per-difference first-step variance `c (d/N1)^k`; `k` defaults to `2s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FirstStepModel {
    pub prefactor: f64,
    #[serde(default)]
    pub exponent: Option<f64>,
}

impl Default for FirstStepModel {
    fn default() -> Self {
        Self {
            prefactor: 1.0,
            exponent: None,
        }
    }
}

impl FirstStepModel {
    pub fn variance(&self, d: usize, plan: &AllocationPlan) -> f64 {
        let k = self.exponent.unwrap_or(2.0 * plan.s);
        self.prefactor * (d as f64 / plan.n1).powf(k)
    }
}

/// Input resources of the second step at its budget `N2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ResourceContext {
    /// Nonclassical family with a fraction `n2_fraction` of `N2` in the
    /// coherent mode.
    Family {
        family: StateFamily,
        n2_fraction: f64,
    },
    /// `𝒲 = 0`.
    Classical,
}

impl ResourceContext {
    /// `(n2, 𝒲)` at budget `budget`.
    pub fn resources(&self, budget: f64) -> Result<(f64, f64)> {
        match self {
            Self::Family {
                family,
                n2_fraction,
            } => {
                if !(0.0..=1.0).contains(n2_fraction) {
                    return Err(Error::InvalidArgument(format!("n2 fraction {n2_fraction}")));
                }
                let n2 = n2_fraction * budget;
                Ok((n2, family.metrological_power(budget - n2)?))
            }
            Self::Classical => Ok((budget, 0.0)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionEstimate {
    pub total_variance: f64,
    pub linear_term: f64,
    pub residual_term: f64,
    /// 1-norm of the gradient over the `2d` network phases.
    pub gradient_norm1: f64,
    pub first_step_variance: f64,
    pub n2_coherent: f64,
    pub metrological_power: f64,
    pub weights: Vec<f64>,
}

/// Two-step variance bound for `f` around `θ̃`.
///
/// The linear term is `‖∇f‖₁²/(4N2 + 8 n2 𝒲)` with the gradient taken over
/// the `2d` phases; the residual is
/// `Σ_ij (2 f_ij² + f_ii f_jj)/4 · V_i V_j`.
pub fn function_estimation_bound<F: FunctionModel + ?Sized>(
    f: &F,
    theta_tilde: &[f64],
    plan: &AllocationPlan,
    ctx: &ResourceContext,
    first_step: &FirstStepModel,
) -> Result<FunctionEstimate> {
    plan.validate()?;
    let g = checked_gradient(f, theta_tilde)?;
    let h = checked_hessian(f, theta_tilde)?;
    let d = f.dimension();
    let (n2c, w_power) = ctx.resources(plan.n2)?;
    let gradient_norm1 = 2.0 * g.iter().map(|x| x.abs()).sum::<f64>();
    let linear_term = gradient_norm1 * gradient_norm1 / (4.0 * plan.n2 + 8.0 * n2c * w_power);
    let v = first_step.variance(d, plan);
    let mut curvature = 0.0;
    for i in 0..d {
        for j in 0..d {
            curvature += 2.0 * h[[i, j]] * h[[i, j]] + h[[i, i]] * h[[j, j]];
        }
    }
    let residual_term = curvature / 4.0 * v * v;
    Ok(FunctionEstimate {
        total_variance: linear_term + residual_term,
        linear_term,
        residual_term,
        gradient_norm1,
        first_step_variance: v,
        n2_coherent: n2c,
        metrological_power: w_power,
        weights: linearize_weights(f, theta_tilde)?.entries().to_vec(),
    })
}

/// `d+1`-mode weights sharing one reference: appends `-Σ w_j` and
/// normalizes to unit 1-norm.
pub fn reduced_scheme_adapter(w_d: &[f64]) -> Result<WeightVector> {
    validate_weights(w_d, Scheme::Reduced)
}
