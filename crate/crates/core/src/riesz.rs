//! The Riesz potential `ℜu(x) = ∫_Ω u(y) / q^{Q-2s}(y^{-1}∘x) dy` as a discrete
//! operator, its top eigenpair, and the Lyapunov-type bounds built on them.

use std::sync::Arc;

use serde::Serialize;

use crate::domain::{Grid, GridFunction};
use crate::error::{Error, Result};
use crate::quadrature::{power_kernel, singular_double_integral, KernelMatrix};
use crate::seminorms::lp_norm;

const MAX_ITERATIONS: usize = 100_000;
const EIGEN_TOL: f64 = 1e-10;
const FIXED_POINT_TOL: f64 = 1e-6;
const BOUND_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RieszParams {
    pub s: f64,
    pub p: f64,
    q_dim: f64,
}

impl RieszParams {
    /// Requires `0 < 2s < Q` and `1 < p < 2`.
    pub fn new(s: f64, p: f64, q_dim: f64) -> Result<Self> {
        if !(s > 0.0 && 2.0 * s < q_dim) {
            return Err(Error::inadmissible(format!("need 0 < 2s < Q, got s = {s}, Q = {q_dim}")));
        }
        if !(p > 1.0 && p < 2.0) {
            return Err(Error::inadmissible(format!("need 1 < p < 2, got {p}")));
        }
        Ok(Self { s, p, q_dim })
    }

    pub fn homogeneous_dimension(&self) -> f64 {
        self.q_dim
    }

    /// `p' = p / (p - 1)`.
    pub fn conjugate(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// `κ = Q - 2s`.
    pub fn kappa(&self) -> f64 {
        self.q_dim - 2.0 * self.s
    }

    /// `2sp > Q`, i.e. the kernel lies in `L^{p'}(Ω×Ω)` for bounded `Ω`.
    pub fn kernel_integrable(&self) -> bool {
        2.0 * self.s * self.p > self.q_dim
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        let q = grid.geometry().homogeneous_dimension();
        if q != self.q_dim {
            return Err(Error::inadmissible(format!(
                "parameters were built for Q = {}, grid has Q = {q}",
                self.q_dim
            )));
        }
        Ok(())
    }
}

/// Top eigenpair of the discrete operator. The eigenvector is positive and has
/// unit Euclidean norm over the cell values.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub lambda1: f64,
    pub eigenvector: GridFunction,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovCheck {
    /// `‖ω‖_{L^{p/(2-p)}(Ω)}`.
    pub lhs: f64,
    /// `1 / C₀`.
    pub rhs: f64,
    pub c0: f64,
    pub fixed_point_defect: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EigenBound {
    pub lambda1: f64,
    pub iterations: usize,
    pub residual: f64,
    pub c0: f64,
    pub measure: f64,
    /// `C₀ |Ω|^{(2-p)/p}`.
    pub bound: f64,
    pub pass: bool,
}

/// The kernel matrix of `ℜ` without the cell volume factor.
pub fn riesz_kernel<'g>(rp: &RieszParams, grid: &'g Grid) -> Result<KernelMatrix<'g>> {
    rp.check(grid)?;
    Ok(KernelMatrix::new(grid, power_kernel(rp.kappa())))
}

fn apply_with(kernel: &KernelMatrix<'_>, values: &[f64]) -> Vec<f64> {
    let vol = kernel.grid().cell_volume();
    let mut out = kernel.matvec(values);
    for v in &mut out {
        *v *= vol;
    }
    out
}

/// `(ℜu)(x_i) = Σ_{j≠i} u(x_j) / q^{Q-2s}(x_j^{-1}∘x_i) · vol`.
pub fn riesz_apply(u: &GridFunction, rp: &RieszParams) -> Result<GridFunction> {
    let kernel = riesz_kernel(rp, u.grid())?;
    GridFunction::new(u.grid().clone(), apply_with(&kernel, u.values()))
}

/// `ℜ(ωu)`.
pub fn riesz_apply_weighted(
    u: &GridFunction,
    omega: &GridFunction,
    rp: &RieszParams,
) -> Result<GridFunction> {
    if let Some(w) = omega.values().iter().find(|w| **w < 0.0) {
        return Err(Error::NegativeWeight(*w));
    }
    riesz_apply(&omega.product(u)?, rp)
}

/// `ℜu` evaluated at an arbitrary point `x`; cells centered exactly at `x` are skipped.
pub fn riesz_at_point(u: &GridFunction, rp: &RieszParams, x: &[f64]) -> Result<f64> {
    let grid = u.grid();
    rp.check(grid)?;
    let geometry = grid.geometry();
    if x.len() != geometry.dim() {
        return Err(Error::DimensionMismatch { expected: geometry.dim(), found: x.len() });
    }
    let mut scratch = vec![0.0; x.len()];
    let kappa = rp.kappa();
    let mut acc = 0.0;
    for (j, v) in u.values().iter().enumerate() {
        let q = geometry.quasi_distance(x, grid.center(j), &mut scratch);
        if q > 0.0 {
            acc += v * q.powf(-kappa);
        }
    }
    Ok(acc * grid.cell_volume())
}

/// `C₀ = ‖q^{-(Q-2s)}(y^{-1}∘x)‖_{L^{p'}(Ω×Ω)}` on the grid.
pub fn c0_constant(rp: &RieszParams, grid: &Grid) -> Result<f64> {
    rp.check(grid)?;
    if !rp.kernel_integrable() {
        return Err(Error::NonIntegrableKernel {
            two_sp: 2.0 * rp.s * rp.p,
            q_dim: rp.q_dim,
        });
    }
    let pc = rp.conjugate();
    Ok(singular_double_integral(grid, |_, _| 1.0, rp.kappa() * pc).powf(1.0 / pc))
}

/// `∫ u ℜu / ∫ u²`.
pub fn rayleigh_quotient(u: &GridFunction, rp: &RieszParams) -> Result<f64> {
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let ru = riesz_apply(u, rp)?;
    let num: f64 = u.values().iter().zip(ru.values()).map(|(a, b)| a * b).sum();
    let den: f64 = u.values().iter().map(|a| a * a).sum();
    Ok(num / den)
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Power iteration for the top eigenpair of `ℜ` on `grid`, started from the
/// constant vector. Stops once the relative eigenvalue change is below `1e-10`
/// and the residual `‖ℜv - λv‖` is below `1e-10 · max(λ, 1)`.
pub fn first_eigenvalue(rp: &RieszParams, grid: &Arc<Grid>) -> Result<SpectralResult> {
    if grid.is_empty() {
        return Err(Error::EmptyDomain("eigenvalue of an empty grid".into()));
    }
    let kernel = riesz_kernel(rp, grid)?;
    let n = grid.len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut kv = apply_with(&kernel, &v);
    let mut lambda = dot(&v, &kv);
    let mut change = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        let residual = norm2(&kv.iter().zip(&v).map(|(a, b)| a - lambda * b).collect::<Vec<_>>());
        if change < EIGEN_TOL && residual <= EIGEN_TOL * lambda.abs().max(1.0) {
            return Ok(SpectralResult {
                lambda1: lambda,
                eigenvector: GridFunction::new(grid.clone(), v)?,
                iterations: iteration - 1,
                residual,
            });
        }
        let norm = norm2(&kv);
        if norm == 0.0 {
            // a single cell: ℜ is the zero operator
            return Ok(SpectralResult {
                lambda1: 0.0,
                eigenvector: GridFunction::new(grid.clone(), v)?,
                iterations: iteration,
                residual: 0.0,
            });
        }
        v = kv.iter().map(|x| x / norm).collect();
        kv = apply_with(&kernel, &v);
        let next = dot(&v, &kv);
        change = ((next - lambda) / next).abs();
        lambda = next;
    }
    Err(Error::NotConverged { iterations: MAX_ITERATIONS, change })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Checks `‖ω‖_{L^{p/(2-p)}(Ω)} ≥ 1/C₀` for a nontrivial fixed point `u = ℜ(ωu)`.
pub fn lyapunov_riesz_check(
    omega: &GridFunction,
    u: &GridFunction,
    rp: &RieszParams,
) -> Result<LyapunovCheck> {
    if u.is_zero() {
        return Err(Error::ZeroFunction);
    }
    let image = riesz_apply_weighted(u, omega, rp)?;
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff: Vec<f64> = image.values().iter().zip(u.values()).map(|(a, b)| a - b).collect();
    let defect = sup(&diff) / sup(u.values());
    if !(defect <= FIXED_POINT_TOL) {
        return Err(Error::NotAFixedPoint(defect));
    }
    let c0 = c0_constant(rp, u.grid())?;
    let lhs = lp_norm(omega, rp.p / (2.0 - rp.p));
    let rhs = 1.0 / c0;
    if !lhs.is_finite() {
        log::warn!("weight norm is not finite; the inequality holds trivially");
    }
    Ok(LyapunovCheck {
        lhs,
        rhs,
        c0,
        fixed_point_defect: defect,
        pass: lhs >= rhs * (1.0 - BOUND_SLACK),
    })
}

/// `λ₁(Ω) ≤ C₀ |Ω|^{(2-p)/p}` with `|Ω|` the grid measure.
pub fn eigen_upper_bound(rp: &RieszParams, grid: &Arc<Grid>) -> Result<EigenBound> {
    let c0 = c0_constant(rp, grid)?;
    let spectral = first_eigenvalue(rp, grid)?;
    let measure = grid.measure();
    let bound = c0 * measure.powf((2.0 - rp.p) / rp.p);
    Ok(EigenBound {
        lambda1: spectral.lambda1,
        iterations: spectral.iterations,
        residual: spectral.residual,
        c0,
        measure,
        bound,
        pass: spectral.lambda1 <= bound * (1.0 + BOUND_SLACK),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;
    use crate::group::Geometry;
    use crate::quadrature::polar_integral;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid(geo: &Geometry, d: DomainSpec) -> Arc<Grid> {
        Arc::new(Grid::build(geo, &d).unwrap())
    }

    fn disk(res: usize) -> Arc<Grid> {
        grid(&Geometry::euclidean(2).unwrap(), DomainSpec::ball(1.0, res).unwrap())
    }

    #[test]
    fn params_validation() {
        assert!(RieszParams::new(1.0, 1.5, 2.0).is_err());
        assert!(RieszParams::new(0.5, 2.0, 2.0).is_err());
        assert!(RieszParams::new(1.9, 1.2, 4.0).is_ok());
        let rp = RieszParams::new(0.9, 1.5, 2.0).unwrap();
        assert!((rp.conjugate() - 3.0).abs() < 1e-15);
        assert!((rp.kappa() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn zero_maps_to_zero() {
        let rp = RieszParams::new(0.9, 1.5, 2.0).unwrap();
        let zero = GridFunction::constant(disk(20), 0.0);
        assert!(riesz_apply(&zero, &rp).unwrap().is_zero());
    }

    #[test]
    fn potential_of_one_at_the_center_of_the_disk() {
        let rp = RieszParams::new(0.9, 1.5, 2.0).unwrap();
        let one = GridFunction::constant(disk(200), 1.0);
        let got = riesz_at_point(&one, &rp, &[0.0, 0.0]).unwrap();
        let expected = PI / 0.9;
        assert!((got - expected).abs() / expected < 0.01, "{got}");
    }

    #[test]
    fn potential_of_one_at_the_center_of_the_koranyi_ball() {
        let geo = Geometry::koranyi(1).unwrap();
        let rp = RieszParams::new(1.5, 1.5, 4.0).unwrap();
        let one = GridFunction::constant(grid(&geo, DomainSpec::ball(1.0, 40).unwrap()), 1.0);
        let got = riesz_at_point(&one, &rp, &[0.0, 0.0, 0.0]).unwrap();
        let expected = polar_integral(&geo, |r| r.powf(-rp.kappa()), 0.0, 1.0).unwrap();
        assert!((got - expected).abs() / expected < 0.02, "{got} vs {expected}");
    }

    #[test]
    fn weighted_application() {
        let rp = RieszParams::new(0.7, 1.6, 2.0).unwrap();
        let g = disk(24);
        let u = GridFunction::from_fn(g.clone(), |x| 1.0 + x[0] - x[1] * x[1]).unwrap();
        let one = GridFunction::constant(g.clone(), 1.0);
        let plain = riesz_apply(&u, &rp).unwrap();
        let weighted = riesz_apply_weighted(&u, &one, &rp).unwrap();
        assert_eq!(plain.values(), weighted.values());
        let zero = GridFunction::constant(g.clone(), 0.0);
        assert!(riesz_apply_weighted(&u, &zero, &rp).unwrap().is_zero());
        let half = GridFunction::from_fn(g, |x| if x[0] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let a = riesz_apply_weighted(&one, &half, &rp).unwrap();
        let b = riesz_apply(&half, &rp).unwrap();
        assert_eq!(a.values(), b.values());
        assert!(matches!(
            riesz_apply_weighted(&u, &half.map(|w| w - 0.5).unwrap(), &rp),
            Err(Error::NegativeWeight(_))
        ));
    }

    #[test]
    fn positivity_on_a_connected_grid() {
        let rp = RieszParams::new(0.3, 1.5, 2.0).unwrap();
        let g = disk(16);
        let bump = GridFunction::from_fn(g, |x| if x[0] > 0.5 { 1.0 } else { 0.0 }).unwrap();
        let out = riesz_apply(&bump, &rp).unwrap();
        assert!(out.values().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn non_integrable_kernel() {
        let rp = RieszParams::new(0.5, 1.5, 2.0).unwrap();
        assert!(matches!(
            c0_constant(&rp, &disk(10)),
            Err(Error::NonIntegrableKernel { .. })
        ));
    }

    #[test]
    fn two_cell_eigenvalue() {
        let geo = Geometry::euclidean(1).unwrap();
        let g = grid(&geo, DomainSpec::boxed(vec![0.0], vec![1.0], 2).unwrap());
        let rp = RieszParams::new(0.3, 1.5, 1.0).unwrap();
        // cells of width 1/2, centers 1/2 apart
        let a = 0.5 * 0.5f64.powf(-0.4);
        let res = first_eigenvalue(&rp, &g).unwrap();
        assert!((res.lambda1 - a).abs() < 1e-14);
        assert!(res.residual <= 1e-8);
    }

    #[test]
    fn eigenpair_consistency() {
        let rp = RieszParams::new(0.9, 1.5, 2.0).unwrap();
        let g = disk(30);
        let res = first_eigenvalue(&rp, &g).unwrap();
        assert!(res.residual <= 1e-8);
        let rq = rayleigh_quotient(&res.eigenvector, &rp).unwrap();
        assert!((rq - res.lambda1).abs() <= 1e-6 * res.lambda1);
        let flat = rayleigh_quotient(&GridFunction::constant(g.clone(), 1.0), &rp).unwrap();
        assert!(flat <= res.lambda1);
        let wiggle = GridFunction::from_fn(g, |x| x[0]).unwrap();
        let perturbed = res.eigenvector.add(&wiggle.scaled(0.05)).unwrap();
        assert!(rayleigh_quotient(&perturbed, &rp).unwrap() <= res.lambda1 * (1.0 + 1e-6));
        assert!(matches!(
            rayleigh_quotient(&GridFunction::constant(disk(8), 0.0), &rp),
            Err(Error::ZeroFunction)
        ));
    }

    #[test]
    fn kernel_matrix_is_symmetric() {
        let rp = RieszParams::new(1.2, 1.5, 4.0).unwrap();
        let g = grid(&Geometry::koranyi(1).unwrap(), DomainSpec::ball(1.0, 8).unwrap());
        let k = riesz_kernel(&rp, &g).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert_eq!(k.entry(i, j).to_bits(), k.entry(j, i).to_bits());
            }
        }
    }

    #[test]
    fn eigenvalue_scales_with_dilation() {
        let rp = RieszParams::new(0.8, 1.5, 2.0).unwrap();
        let g = disk(20);
        let base = first_eigenvalue(&rp, &g).unwrap().lambda1;
        for lambda in [0.5, 3.0] {
            let dg = Arc::new(g.dilated(lambda).unwrap());
            let scaled = first_eigenvalue(&rp, &dg).unwrap().lambda1;
            let expected = lambda.powf(2.0 * rp.s) * base;
            assert!((scaled - expected).abs() <= 1e-12 * expected, "{scaled} vs {expected}");
        }
    }

    #[test]
    fn c0_scales_with_dilation() {
        let rp = RieszParams::new(0.9, 1.5, 2.0).unwrap();
        let g = disk(24);
        let base = c0_constant(&rp, &g).unwrap();
        let pc = rp.conjugate();
        for lambda in [0.25, 2.0] {
            let scaled = c0_constant(&rp, &g.dilated(lambda).unwrap()).unwrap();
            let expected = lambda.powf((2.0 * 2.0 - rp.kappa() * pc) / pc) * base;
            assert!((scaled - expected).abs() <= 1e-12 * expected);
        }
    }

    #[test]
    fn eigenvalue_grows_with_the_domain() {
        let rp = RieszParams::new(0.6, 1.8, 2.0).unwrap();
        let geo = Geometry::euclidean(2).unwrap();
        let big = Grid::build(&geo, &DomainSpec::boxed(vec![-1.0, -1.0], vec![1.0, 1.0], 20).unwrap()).unwrap();
        let small = Arc::new(big.subgrid(&DomainSpec::ball(0.9, 20).unwrap()).unwrap());
        let big = Arc::new(big);
        let lb = first_eigenvalue(&rp, &big).unwrap().lambda1;
        let ls = first_eigenvalue(&rp, &small).unwrap().lambda1;
        assert!(ls <= lb * (1.0 + 1e-10));
    }

    #[test]
    fn lyapunov_check_on_the_eigenvector() {
        let rp = RieszParams::new(0.9, 1.5, 2.0).unwrap();
        let g = disk(30);
        let res = first_eigenvalue(&rp, &g).unwrap();
        let omega = GridFunction::constant(g.clone(), 1.0 / res.lambda1);
        let check = lyapunov_riesz_check(&omega, &res.eigenvector, &rp).unwrap();
        assert!(check.pass);
        let expected = check.c0 * g.measure().powf((2.0 - rp.p) / rp.p) / res.lambda1;
        assert!((check.lhs / check.rhs - expected).abs() <= 1e-12 * expected);
        assert!(expected >= 1.0);

        let zero = GridFunction::constant(g.clone(), 0.0);
        assert!(matches!(lyapunov_riesz_check(&omega, &zero, &rp), Err(Error::ZeroFunction)));
        let tiny = GridFunction::from_fn(g.clone(), |x| 1e-3 * (1.0 + x[0] * x[0])).unwrap();
        let u = GridFunction::from_fn(g, |x| x[1].cos()).unwrap();
        assert!(matches!(lyapunov_riesz_check(&tiny, &u, &rp), Err(Error::NotAFixedPoint(_))));
    }

    #[test]
    fn upper_bound_on_the_disk() {
        let rp = RieszParams::new(0.9, 1.5, 2.0).unwrap();
        let report = eigen_upper_bound(&rp, &disk(40)).unwrap();
        assert!(report.pass, "{report:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn upper_bound_holds_at_every_resolution(
            s in 0.55f64..0.99,
            p_frac in 0.05f64..0.95,
            res in 6usize..18,
        ) {
            // 2sp > 2 needs p > 1/s
            let p_lo = (1.0 / s).max(1.0) + 1e-3;
            let p = p_lo + p_frac * (2.0 - p_lo - 1e-3);
            let rp = RieszParams::new(s, p, 2.0).unwrap();
            let report = eigen_upper_bound(&rp, &disk(res)).unwrap();
            prop_assert!(report.pass);
        }

        #[test]
        fn apply_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let rp = RieszParams::new(0.4, 1.5, 2.0).unwrap();
            let g = disk(10);
            let u = GridFunction::from_fn(g.clone(), |x| x[0] + 0.3).unwrap();
            let v = GridFunction::from_fn(g, |x| x[1] * x[0]).unwrap();
            let lhs = riesz_apply(&u.scaled(a).add(&v.scaled(b)).unwrap(), &rp).unwrap();
            let ru = riesz_apply(&u, &rp).unwrap();
            let rv = riesz_apply(&v, &rp).unwrap();
            for ((l, x), y) in lhs.values().iter().zip(ru.values()).zip(rv.values()) {
                prop_assert!((l - (a * x + b * y)).abs() <= 1e-12 * (1.0 + l.abs()));
            }
        }
    }
}
