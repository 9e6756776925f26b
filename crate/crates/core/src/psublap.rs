//! The fractional p-sub-Laplacian
//! `(-Δ_{p,q})^s u(x) = 2 p.v.∫ |u(x)-u(y)|^{p-2}(u(x)-u(y)) / q^{Q+sp}(y^{-1}∘x) dy`
//! on grids, weak-form residuals of the Dirichlet system, and the bookkeeping of
//! the system Lyapunov bound and the eigenvalue lower bound.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::domain::{DomainSpec, Grid, GridFunction};
use crate::error::{Error, Result};
use crate::group::Geometry;
use crate::quadrature::{power_kernel, KernelMatrix};
use crate::seminorms::{gagliardo_energy, lp_norm, SeminormParams};

/// Tolerance of the constraint `Σ α_i / p_i = 1`.
const SUM_TOL: f64 = 1e-12;

/// Exponents of the system: `s_i`, `p_i`, `α_i` and the weight integrability `θ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemParams {
    pub s: Vec<f64>,
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    pub theta: f64,
    q_dim: f64,
}

impl SystemParams {
    /// Requires `Σ α_i/p_i = 1`, `Q > s_i p_i` and `max Q/(s_i p_i) < θ < ∞`.
    pub fn new(s: Vec<f64>, p: Vec<f64>, alpha: Vec<f64>, theta: f64, q_dim: f64) -> Result<Self> {
        let n = s.len();
        if n == 0 {
            return Err(Error::inadmissible("system needs at least one equation"));
        }
        for len in [p.len(), alpha.len()] {
            if len != n {
                return Err(Error::DimensionMismatch { expected: n, found: len });
            }
        }
        for i in 0..n {
            if !(s[i] > 0.0 && s[i] < 1.0) {
                return Err(Error::inadmissible(format!("s[{i}] = {} is not in (0,1)", s[i])));
            }
            if !(p[i] > 1.0 && p[i].is_finite()) {
                return Err(Error::inadmissible(format!("p[{i}] = {} must exceed 1", p[i])));
            }
            if !(alpha[i] > 0.0 && alpha[i].is_finite()) {
                return Err(Error::inadmissible(format!("alpha[{i}] = {} must be positive", alpha[i])));
            }
            if !(q_dim > s[i] * p[i]) {
                return Err(Error::inadmissible(format!("need Q > s_i p_i, fails for i = {i}")));
            }
        }
        let sum: f64 = alpha.iter().zip(&p).map(|(a, p)| a / p).sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::inadmissible(format!("sum of alpha_i/p_i is {sum}, not 1")));
        }
        let floor = s
            .iter()
            .zip(&p)
            .map(|(s, p)| q_dim / (s * p))
            .fold(f64::NEG_INFINITY, f64::max);
        if !(theta > floor && theta.is_finite()) {
            return Err(Error::inadmissible(format!(
                "theta = {theta} must exceed max Q/(s_i p_i) = {floor}"
            )));
        }
        Ok(Self { s, p, alpha, theta, q_dim })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn homogeneous_dimension(&self) -> f64 {
        self.q_dim
    }

    /// `Q - θ Σ s_j α_j`.
    pub fn radius_exponent(&self) -> f64 {
        self.q_dim - self.theta * self.s.iter().zip(&self.alpha).map(|(s, a)| s * a).sum::<f64>()
    }
}

/// `sign(d) |d|^{p-1}`, exact for `p = 2`.
#[inline]
fn phi(d: f64, p: f64) -> f64 {
    if p == 2.0 {
        d
    } else {
        d.signum() * d.abs().powf(p - 1.0)
    }
}

fn check_order(s: f64, p: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::inadmissible(format!("s must lie in (0,1), got {s}")));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::inadmissible(format!("p must exceed 1, got {p}")));
    }
    Ok(())
}

fn apply_rows(u: &GridFunction, s: f64, p: f64, rows: &[usize]) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    check_order(s, p)?;
    let grid = u.grid();
    let kernel = KernelMatrix::new(grid, power_kernel(grid.geometry().homogeneous_dimension() + s * p));
    let v = u.values();
    let scale = 2.0 * grid.cell_volume();
    Ok(rows
        .par_iter()
        .map(|&i| {
            let mut acc = 0.0;
            kernel.for_each_in_row(i, |j, k| acc += phi(v[i] - v[j], p) * k);
            acc * scale
        })
        .collect())
}

/// The operator at every cell of `u`'s grid, with the principal value realized
/// by dropping the diagonal. Values of `u` outside the grid are taken as zero
/// only through the cells present, so `u` should live on a grid that extends
/// well past its support (see [`DirichletExtension`]).
pub fn p_sublap_apply(u: &GridFunction, s: f64, p: f64) -> Result<GridFunction> {
    let rows: Vec<usize> = (0..u.len()).collect();
    GridFunction::new(u.grid().clone(), apply_rows(u, s, p, &rows)?)
}

/// A box grid around `Ω` with the same cell size, padded by `factor` times the
/// width of `Ω`'s bounding box on each side. Functions on it vanish outside `Ω`.
#[derive(Debug, Clone)]
pub struct DirichletExtension {
    grid: Arc<Grid>,
    interior: Vec<usize>,
    domain: DomainSpec,
    factor: f64,
}

impl DirichletExtension {
    pub fn new(geometry: &Geometry, domain: &DomainSpec, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::inadmissible(format!("extension factor must be positive, got {factor}")));
        }
        let (lo, hi) = domain.bounding_box(&geometry.group);
        let n = domain.resolution;
        let pad = (factor * n as f64).ceil() as usize;
        let h: Vec<f64> = lo.iter().zip(&hi).map(|(l, u)| (u - l) / n as f64).collect();
        let elo = lo.iter().zip(&h).map(|(l, h)| l - pad as f64 * h).collect();
        let ehi = hi.iter().zip(&h).map(|(u, h)| u + pad as f64 * h).collect();
        let grid = Grid::build(geometry, &DomainSpec::boxed(elo, ehi, n + 2 * pad)?)?;
        let interior: Vec<usize> = (0..grid.len())
            .filter(|&i| domain.contains(geometry, grid.center(i)))
            .collect();
        if interior.is_empty() {
            return Err(Error::EmptyDomain("no cell center falls inside the domain".into()));
        }
        Ok(Self { grid: Arc::new(grid), interior, domain: domain.clone(), factor })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    /// Indices of the cells of [`Self::grid`] lying in `Ω`, increasing.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn factor(&self) -> f64 {
        self.factor
    }

    /// `f` on `Ω`, zero on the exterior cells.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Result<GridFunction> {
        let mut values = vec![0.0; self.grid.len()];
        for &i in &self.interior {
            values[i] = f(self.grid.center(i));
        }
        GridFunction::new(self.grid.clone(), values)
    }

    /// Interior values of a function on the extended grid.
    pub fn restrict(&self, u: &GridFunction) -> Vec<f64> {
        self.interior.iter().map(|&i| u.values()[i]).collect()
    }

    /// `(-Δ_{p,q})^s u` at the interior cells, in the order of [`Self::interior`].
    pub fn apply(&self, u: &GridFunction, s: f64, p: f64) -> Result<Vec<f64>> {
        if !Arc::ptr_eq(u.grid(), &self.grid) {
            return Err(Error::inadmissible("function does not live on the extended grid"));
        }
        if let Some(i) = (0..u.len()).find(|i| u.values()[*i] != 0.0 && self.interior.binary_search(i).is_err()) {
            return Err(Error::SupportViolation(format!("u is nonzero at exterior cell {i}")));
        }
        apply_rows(u, s, p, &self.interior)
    }

    /// Smallest eigenpair of the `p = 2` operator restricted to `Ω`, i.e. of the
    /// symmetric matrix `A` with `uᵀA u · vol = [u]²_{s,2,q}` for `u` vanishing
    /// outside `Ω`. The eigenvector is returned on the extended grid, positive
    /// in sum and normalized in the Euclidean norm of its values.
    pub fn linear_eigenpair(&self, s: f64) -> Result<(f64, GridFunction)> {
        check_order(s, 2.0)?;
        let grid = &self.grid;
        let kernel = KernelMatrix::new(grid, power_kernel(grid.geometry().homogeneous_dimension() + 2.0 * s));
        let m = self.interior.len();
        let scale = 2.0 * grid.cell_volume();
        let mut a = DMatrix::<f64>::zeros(m, m);
        for (r, &i) in self.interior.iter().enumerate() {
            let mut diag = 0.0;
            kernel.for_each_in_row(i, |_, k| diag += k);
            a[(r, r)] = scale * diag;
            for (c, &j) in self.interior.iter().enumerate() {
                if c != r {
                    a[(r, c)] = -scale * kernel.entry(i, j);
                }
            }
        }
        let eig = a.symmetric_eigen();
        let (best, lambda) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, v)| if *v < acc.1 { (k, *v) } else { acc });
        let vec = eig.eigenvectors.column(best);
        let sign = if vec.sum() < 0.0 { -1.0 } else { 1.0 };
        let mut values = vec![0.0; grid.len()];
        for (r, &i) in self.interior.iter().enumerate() {
            values[i] = sign * vec[r];
        }
        Ok((lambda, GridFunction::new(grid.clone(), values)?))
    }
}

/// Relative defect of each weak-form identity tested with `v_i = u_i`:
/// `|L_i - R_i| / (|L_i| + |R_i| + ε)` where `L_i = [u_i]^{p_i}` over the grid and
/// `R_i = ∫ ω_i Π_j |u_j|^{α_j}`. Identically zero data give residual 0.
pub fn weak_form_residual(
    u: &[GridFunction],
    omega: &[GridFunction],
    sp: &SystemParams,
) -> Result<Vec<f64>> {
    let n = sp.len();
    for len in [u.len(), omega.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, found: len });
        }
    }
    for f in u.iter().chain(omega).skip(1) {
        u[0].check_same_grid(f)?;
    }
    let vol = u[0].grid().cell_volume();
    let cells = u[0].len();
    let coupling: Vec<f64> = (0..cells)
        .map(|c| (0..n).map(|j| u[j].values()[c].abs().powf(sp.alpha[j])).product())
        .collect();
    (0..n)
        .map(|i| {
            let lhs = gagliardo_energy(&u[i], &SeminormParams::new(sp.s[i], sp.p[i])?);
            let rhs: f64 = omega[i]
                .values()
                .iter()
                .zip(&coupling)
                .map(|(w, c)| w * c * vol)
                .sum();
            Ok((lhs - rhs).abs() / (lhs.abs() + rhs.abs() + f64::EPSILON))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemLyapunov {
    /// `‖ω_i‖_{L^θ(Ω)}`.
    pub weight_norms: Vec<f64>,
    /// `Π ‖ω_i‖^{θα_i/p_i}`.
    pub lhs: f64,
    /// `Q - θ Σ s_j α_j`.
    pub exponent: f64,
    pub radius: f64,
    /// `lhs / r^{exponent}`.
    pub scale_invariant_value: f64,
}

fn check_weight(w: &GridFunction) -> Result<()> {
    match w.values().iter().find(|v| **v < 0.0) {
        Some(v) => Err(Error::NegativeWeight(*v)),
        None => Ok(()),
    }
}

/// The two sides of the system Lyapunov bound up to its unknown constant.
pub fn lyapunov_system_quantity(
    omega: &[GridFunction],
    sp: &SystemParams,
    radius: f64,
) -> Result<SystemLyapunov> {
    if omega.len() != sp.len() {
        return Err(Error::DimensionMismatch { expected: sp.len(), found: omega.len() });
    }
    if !(radius > 0.0) {
        return Err(Error::inadmissible(format!("inner quasi-radius must be positive, got {radius}")));
    }
    for w in omega {
        check_weight(w)?;
    }
    let weight_norms: Vec<f64> = omega.iter().map(|w| lp_norm(w, sp.theta)).collect();
    let lhs: f64 = weight_norms
        .iter()
        .zip(sp.alpha.iter().zip(&sp.p))
        .map(|(w, (a, p))| w.powf(sp.theta * a / p))
        .product();
    if lhs == 0.0 {
        log::info!("a weight vanishes identically: no nontrivial weak solution can exist");
    }
    let exponent = sp.radius_exponent();
    Ok(SystemLyapunov {
        weight_norms,
        lhs,
        exponent,
        radius,
        scale_invariant_value: lhs / radius.powf(exponent),
    })
}

/// `ω_λ(x) = λ^{-s p} ω(D_{1/λ} x)` on the grid of `D_λ Ω`.
pub fn compensated_rescale(omega: &GridFunction, s: f64, p: f64, lambda: f64) -> Result<GridFunction> {
    Ok(omega.on_dilated_grid(lambda)?.scaled(lambda.powf(-s * p)))
}

/// The eigenvalue lower bound for component `k`, evaluated verbatim for a
/// caller-supplied constant `c`. `lambdas[k]` is ignored.
pub fn eigen_lower_bound_formula(
    sp: &SystemParams,
    phi: &GridFunction,
    lambdas: &[f64],
    k: usize,
    c: f64,
    radius: f64,
) -> Result<f64> {
    let n = sp.len();
    if lambdas.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: lambdas.len() });
    }
    if k >= n {
        return Err(Error::inadmissible(format!("component {k} out of range for {n} equations")));
    }
    if !(c > 0.0) {
        return Err(Error::inadmissible(format!("constant must be positive, got {c}")));
    }
    if !(radius > 0.0) {
        return Err(Error::inadmissible(format!("inner quasi-radius must be positive, got {radius}")));
    }
    if let Some(i) = (0..n).find(|&i| i != k && !(lambdas[i] > 0.0)) {
        return Err(Error::inadmissible(format!("lambda[{i}] = {} must be positive", lambdas[i])));
    }
    check_weight(phi)?;
    let theta = sp.theta;
    let integral = lp_norm(phi, theta).powf(theta);
    if integral == 0.0 {
        return Err(Error::ZeroWeight);
    }
    let (ak, pk) = (sp.alpha[k], sp.p[k]);
    let mut lambda_product = 1.0;
    let mut alpha_product = 1.0;
    for i in (0..n).filter(|&i| i != k) {
        lambda_product *= lambdas[i].powf(sp.alpha[i] / sp.p[i]);
        alpha_product *= sp.alpha[i].powf(theta * sp.alpha[i] / sp.p[i]);
    }
    let r_term = radius.powf(-sp.radius_exponent());
    Ok((c / ak)
        * lambda_product.powf(-pk / ak)
        * (r_term * alpha_product * integral).powf(-pk / (theta * ak)))
}
