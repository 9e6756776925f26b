//! Lebesgue norms, power-weighted norms and Gagliardo seminorms of grid functions.
//!
//! Seminorms are restricted to the grid domain, `∫_Ω ∫_Ω`. Whole-group
//! quantities are approximated by a large box that holds the support of `u`
//! well inside it.

use crate::domain::GridFunction;
use crate::error::{Error, Result};
use crate::quadrature::{log_singular_double_integral, singular_double_integral};

/// Exponents above this are summed in log space.
const LOG_SPACE_P: f64 = 8.0;

/// Smoothness `s`, integrability `p` and the two weight exponents of
/// `q^{β₁p}(x) q^{β₂p}(y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeminormParams {
    pub s: f64,
    pub p: f64,
    pub beta1: f64,
    pub beta2: f64,
}

impl SeminormParams {
    pub fn new(s: f64, p: f64) -> Result<Self> {
        Self::weighted(s, p, 0.0, 0.0)
    }

    pub fn weighted(s: f64, p: f64, beta1: f64, beta2: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::inadmissible(format!("s must lie in (0,1), got {s}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::inadmissible(format!("p must exceed 1, got {p}")));
        }
        if !(beta1.is_finite() && beta2.is_finite()) {
            return Err(Error::inadmissible("weight exponents must be finite"));
        }
        Ok(Self { s, p, beta1, beta2 })
    }

    pub fn beta(&self) -> f64 {
        self.beta1 + self.beta2
    }
}

/// `(Σ |u|^p vol)^{1/p}`.
///
/// # Panics
/// If `p` is not positive.
pub fn lp_norm(u: &GridFunction, p: f64) -> f64 {
    assert!(p > 0.0, "L^p exponent must be positive");
    let vol = u.grid().cell_volume();
    let sum: f64 = u.values().iter().map(|v| v.abs().powf(p) * vol).sum();
    sum.powf(1.0 / p)
}

/// `q(x)^{exponent}` with the convention that a singular weight at the identity
/// itself contributes nothing (a single point carries no mass).
#[inline]
fn weight_at(q: f64, exponent: f64) -> f64 {
    if q == 0.0 && exponent < 0.0 {
        0.0
    } else {
        q.powf(exponent)
    }
}

/// `(Σ q^{γp}(x) |u(x)|^p vol)^{1/p}`.
///
/// When `γp <= -Q` the weight is not locally integrable at the identity, so `u`
/// must vanish on every cell touching `e`; otherwise `NonIntegrableWeight`.
pub fn weighted_lp_norm(u: &GridFunction, p: f64, gamma: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::inadmissible(format!("L^p exponent must be positive, got {p}")));
    }
    let grid = u.grid();
    let exponent = gamma * p;
    if exponent <= -grid.geometry().homogeneous_dimension()
        && u
            .values()
            .iter()
            .enumerate()
            .any(|(i, v)| *v != 0.0 && grid.cell_touches_identity(i))
    {
        return Err(Error::NonIntegrableWeight { exponent });
    }
    let vol = grid.cell_volume();
    let sum: f64 = u
        .values()
        .iter()
        .zip(grid.quasi_norms())
        .map(|(v, q)| weight_at(q, exponent) * v.abs().powf(p) * vol)
        .sum();
    Ok(sum.powf(1.0 / p))
}

fn energy_terms(u: &GridFunction, sp: &SeminormParams) -> (Vec<f64>, Vec<f64>) {
    let q = u.grid().quasi_norms();
    let w1 = q.iter().map(|q| weight_at(*q, sp.beta1 * sp.p)).collect();
    let w2 = q.iter().map(|q| weight_at(*q, sp.beta2 * sp.p)).collect();
    (w1, w2)
}

/// `[u]^p_{s,p,β,q,Ω}`, the p-th power of the weighted seminorm. Overflows for
/// very large `p`; [`weighted_gagliardo_seminorm`] switches to log space there.
pub fn weighted_gagliardo_energy(u: &GridFunction, sp: &SeminormParams) -> f64 {
    let grid = u.grid();
    let exponent = grid.geometry().homogeneous_dimension() + sp.s * sp.p;
    let (w1, w2) = energy_terms(u, sp);
    let v = u.values();
    let p = sp.p;
    if p == 2.0 {
        singular_double_integral(
            grid,
            |i, j| {
                let d = v[i] - v[j];
                w1[i] * w2[j] * (d * d)
            },
            exponent,
        )
    } else {
        singular_double_integral(
            grid,
            |i, j| w1[i] * w2[j] * (v[i] - v[j]).abs().powf(p),
            exponent,
        )
    }
}

/// `[u]^p_{s,p,q,Ω}`.
pub fn gagliardo_energy(u: &GridFunction, sp: &SeminormParams) -> f64 {
    weighted_gagliardo_energy(u, &SeminormParams { beta1: 0.0, beta2: 0.0, ..*sp })
}

/// The weighted Gagliardo seminorm
/// `(∫∫ q^{β₁p}(x) q^{β₂p}(y) |u(x)-u(y)|^p / q^{Q+sp}(y^{-1}∘x))^{1/p}`.
pub fn weighted_gagliardo_seminorm(u: &GridFunction, sp: &SeminormParams) -> f64 {
    if sp.p > LOG_SPACE_P {
        let grid = u.grid();
        let exponent = grid.geometry().homogeneous_dimension() + sp.s * sp.p;
        let (w1, w2) = energy_terms(u, sp);
        let (lw1, lw2): (Vec<f64>, Vec<f64>) = (
            w1.iter().map(|w| w.ln()).collect(),
            w2.iter().map(|w| w.ln()).collect(),
        );
        let v = u.values();
        let log = log_singular_double_integral(
            grid,
            |i, j| lw1[i] + lw2[j] + sp.p * (v[i] - v[j]).abs().ln(),
            exponent,
        );
        return (log / sp.p).exp();
    }
    weighted_gagliardo_energy(u, sp).powf(1.0 / sp.p)
}

/// The Gagliardo quasi-seminorm `[u]_{s,p,q,Ω}`.
pub fn gagliardo_seminorm(u: &GridFunction, sp: &SeminormParams) -> f64 {
    weighted_gagliardo_seminorm(u, &SeminormParams { beta1: 0.0, beta2: 0.0, ..*sp })
}

/// `u_Ω = Σ u vol / |Ω|_grid`.
pub fn domain_mean(u: &GridFunction) -> Result<f64> {
    let grid = u.grid();
    if grid.is_empty() {
        return Err(Error::EmptyDomain("mean over an empty grid".into()));
    }
    let vol = grid.cell_volume();
    let total: f64 = u.values().iter().map(|v| v * vol).sum();
    Ok(total / grid.measure())
}

/// `‖ q^γ / ln(2R/q) · u ‖_{L^τ}` for `u` supported in the quasi-ball `B_R`.
pub fn log_weighted_norm(u: &GridFunction, tau: f64, gamma: f64, radius: f64) -> Result<f64> {
    if !(tau > 1.0 && tau.is_finite()) {
        return Err(Error::inadmissible(format!("tau must exceed 1, got {tau}")));
    }
    if !(radius > 0.0) {
        return Err(Error::inadmissible(format!("radius must be positive, got {radius}")));
    }
    let grid = u.grid();
    let q = grid.quasi_norms();
    if let Some((i, _)) = u
        .values()
        .iter()
        .enumerate()
        .find(|(i, v)| **v != 0.0 && q[*i] >= radius)
    {
        return Err(Error::SupportViolation(format!(
            "u is nonzero at q = {} outside the ball of radius {radius}",
            q[i]
        )));
    }
    let vol = grid.cell_volume();
    let sum: f64 = u
        .values()
        .iter()
        .zip(&q)
        .filter(|(v, q)| **v != 0.0 && **q > 0.0)
        .map(|(v, q)| {
            let w = q.powf(gamma) / (2.0 * radius / q).ln();
            (w * v.abs()).powf(tau) * vol
        })
        .sum();
    Ok(sum.powf(1.0 / tau))
}
