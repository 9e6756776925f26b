//! Numerical integration on homogeneous groups.
//!
//! * one-dimensional adaptive Gauss-Kronrod (G7/K15) quadrature,
//! * the polar formula `∫ f(q(x)) dx = |σ| ∫ f(r) r^{Q-1} dr`,
//! * pair kernels `k(q(x_j^{-1} ∘ x_i))` over the cells of a grid and the
//!   singular double sums built from them.
//!
//! Double sums exclude the diagonal pair and accumulate every row in cell
//! order, then combine rows in cell order, so results are bit-reproducible
//! regardless of the rayon thread count.

use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::group::{Geometry, GroupLaw, NormKind};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod_15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (k, (x, w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let s = f(c - h * x) + f(c + h * x);
        kronrod += w * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Result of [`integrate`]: the estimate and its error bound.
#[derive(Debug, Clone, Copy)]
pub struct QuadratureResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

/// Globally adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed error is
/// below `max(abs_tol, rel_tol |I|)`. Fails with `NonIntegrableProfile`
/// (carrying the location of the worst panel) when `max_panels` is exhausted.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<QuadratureResult> {
    if a == b {
        return Ok(QuadratureResult { value: 0.0, error: 0.0, panels: 0 });
    }
    let (value, error) = gauss_kronrod_15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let (mut total, mut total_err) = (value, error);
    while total_err > abs_tol.max(rel_tol * total.abs()) {
        if !total.is_finite() {
            break;
        }
        if heap.len() >= max_panels {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = gauss_kronrod_15(&f, worst.a, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // re-sum to shed the drift of the running updates
    let panels = heap.len();
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    if !value.is_finite() || error > abs_tol.max(rel_tol * value.abs()) {
        let at = heap.peek().map(|p| p.a).unwrap_or(a);
        return Err(Error::NonIntegrableProfile(at));
    }
    Ok(QuadratureResult { value, error, panels })
}

/// Volume of the Euclidean unit ball in `R^n`.
fn euclidean_ball_volume(n: usize) -> f64 {
    let mut v = [1.0, 2.0];
    for k in 2..=n {
        let next = v[0] * 2.0 * std::f64::consts::PI / k as f64;
        v = [v[1], next];
    }
    if n == 0 {
        1.0
    } else {
        v[1]
    }
}

/// Haar measure of the unit quasi-ball `{q < 1}`.
///
/// Closed forms for the Euclidean and anisotropic-max norms. For the Korányi
/// gauge on `H^m` the `t`-fibre over `|z| = r` has length `2 sqrt(1 - r^4)`,
/// reducing the volume to a one-dimensional radial integral.
pub fn unit_ball_volume(geometry: &Geometry) -> f64 {
    let n = geometry.dim();
    match geometry.norm.kind() {
        NormKind::Euclidean => euclidean_ball_volume(n),
        NormKind::AnisoMax => 2f64.powi(n as i32),
        NormKind::Koranyi => {
            let m = match geometry.group.law() {
                GroupLaw::Heisenberg { m } => m,
                GroupLaw::Abelian => unreachable!("koranyi is only built on heisenberg"),
            };
            let sphere = 2.0 * m as f64 * euclidean_ball_volume(2 * m);
            let radial = integrate(
                |r| 2.0 * (1.0 - r.powi(4)).max(0.0).sqrt() * r.powi(2 * m as i32 - 1),
                0.0,
                1.0,
                1e-14,
                0.0,
                4000,
            )
            .expect("smooth integrand on [0,1]")
            .value;
            sphere * radial
        }
    }
}

/// Total mass `|σ|` of the surface measure on the unit quasi-sphere,
/// `|σ| = Q |B_1|`.
pub fn sphere_measure(geometry: &Geometry) -> f64 {
    geometry.homogeneous_dimension() * unit_ball_volume(geometry)
}

/// `|σ| ∫_{r_lo}^{r_hi} f(r) r^{Q-1} dr`, i.e. `∫ f(q(x)) dx` over the shell
/// `r_lo < q(x) < r_hi`, to relative tolerance `1e-8`.
pub fn polar_integral(
    geometry: &Geometry,
    f: impl Fn(f64) -> f64,
    r_lo: f64,
    r_hi: f64,
) -> Result<f64> {
    if !(r_lo >= 0.0 && r_hi >= r_lo && r_hi.is_finite()) {
        return Err(Error::inadmissible(format!(
            "polar integral needs 0 <= r_lo <= r_hi < inf, got ({r_lo}, {r_hi})"
        )));
    }
    let qm1 = geometry.homogeneous_dimension() - 1.0;
    let radial = integrate(|r| f(r) * r.powf(qm1), r_lo, r_hi, 1e-8, 0.0, 2000)
        .map_err(|_| Error::NonIntegrableProfile(r_lo))?;
    Ok(sphere_measure(geometry) * radial.value)
}

/// Above this many entries a non-abelian kernel is evaluated on the fly
/// instead of being stored (8 bytes per entry).
pub(crate) const DENSE_ENTRY_LIMIT: usize = 120_000_000;

enum Storage {
    /// Abelian groups: the kernel depends only on the index offset between
    /// cells, stored for every offset in the lattice.
    Offsets { table: Vec<f64>, base: Vec<isize>, origin: isize },
    Dense(Vec<f64>),
    OnTheFly(Box<dyn Fn(f64) -> f64 + Send + Sync>),
}

/// The symmetric matrix `K_ij = k(q(x_j^{-1} ∘ x_i))` for `i != j`, `K_ii = 0`.
///
/// Entries are bitwise symmetric: `q(x^{-1}) = q(x)` holds exactly in floating
/// point for both group laws and all shipped norms.
pub struct KernelMatrix<'g> {
    grid: &'g Grid,
    storage: Storage,
}

impl<'g> KernelMatrix<'g> {
    pub fn new(grid: &'g Grid, kernel: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        let geometry = grid.geometry();
        let storage = match geometry.group.law() {
            GroupLaw::Abelian => Self::offset_table(grid, &kernel),
            GroupLaw::Heisenberg { .. } => {
                let n = grid.len();
                if n.saturating_mul(n) <= DENSE_ENTRY_LIMIT {
                    Storage::Dense(Self::dense(grid, &kernel))
                } else {
                    Storage::OnTheFly(Box::new(kernel))
                }
            }
        };
        Self { grid, storage }
    }

    fn offset_table(grid: &Grid, kernel: &(impl Fn(f64) -> f64 + Sync)) -> Storage {
        let shape = grid.shape();
        let n = shape.len();
        let extent: Vec<usize> = shape.iter().map(|s| 2 * s - 1).collect();
        let mut offset_stride = vec![1isize; n];
        let mut cell_stride = vec![1isize; n];
        for a in (0..n.saturating_sub(1)).rev() {
            offset_stride[a] = offset_stride[a + 1] * extent[a + 1] as isize;
            cell_stride[a] = cell_stride[a + 1] * shape[a + 1] as isize;
        }
        // table index of offset d is Σ (d_a + s_a - 1) * offset_stride_a; for a cell
        // pair this equals origin + base_i - base_j with base = Σ k_a offset_stride_a
        let total: usize = extent.iter().product();
        let geometry = grid.geometry();
        let step = grid.step();
        let table: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let mut rem = idx;
                let mut d = vec![0.0; n];
                let mut zero = true;
                for a in (0..n).rev() {
                    let k = (rem % extent[a]) as isize - (shape[a] as isize - 1);
                    rem /= extent[a];
                    zero &= k == 0;
                    d[a] = k as f64 * step[a];
                }
                if zero {
                    0.0
                } else {
                    kernel(geometry.quasi_norm_unchecked(&d))
                }
            })
            .collect();
        let origin: isize = shape
            .iter()
            .zip(&offset_stride)
            .map(|(s, st)| (*s as isize - 1) * st)
            .sum();
        let base = grid
            .tensor_index()
            .iter()
            .map(|&linear| {
                let mut rem = linear;
                let mut b = 0isize;
                for a in (0..n).rev() {
                    b += (rem % shape[a]) as isize * offset_stride[a];
                    rem /= shape[a];
                }
                b
            })
            .collect();
        Storage::Offsets { table, base, origin }
    }

    fn dense(grid: &Grid, kernel: &(impl Fn(f64) -> f64 + Sync)) -> Vec<f64> {
        let n = grid.len();
        let dim = grid.dim();
        let geometry = grid.geometry();
        // upper triangle by rows, mirrored afterwards
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut scratch = vec![0.0; dim];
                let xi = grid.center(i);
                ((i + 1)..n)
                    .map(|j| kernel(geometry.quasi_distance(xi, grid.center(j), &mut scratch)))
                    .collect()
            })
            .collect();
        let mut m = vec![0.0; n * n];
        for (i, row) in rows.into_iter().enumerate() {
            for (off, v) in row.into_iter().enumerate() {
                let j = i + 1 + off;
                m[i * n + j] = v;
                m[j * n + i] = v;
            }
        }
        m
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 0.0;
        }
        match &self.storage {
            Storage::Offsets { table, base, origin } => {
                table[(origin + base[i] - base[j]) as usize]
            }
            Storage::Dense(m) => m[i * self.len() + j],
            Storage::OnTheFly(k) => {
                let mut scratch = vec![0.0; self.grid.dim()];
                let g = self.grid.geometry();
                k(g.quasi_distance(self.grid.center(i), self.grid.center(j), &mut scratch))
            }
        }
    }

    /// Calls `visit(j, K_ij)` for every `j != i` in increasing `j`.
    #[inline]
    pub fn for_each_in_row(&self, i: usize, mut visit: impl FnMut(usize, f64)) {
        let n = self.len();
        match &self.storage {
            Storage::Offsets { table, base, origin } => {
                let row = origin + base[i];
                for j in 0..n {
                    if j != i {
                        visit(j, table[(row - base[j]) as usize]);
                    }
                }
            }
            Storage::Dense(m) => {
                let row = &m[i * n..(i + 1) * n];
                for (j, v) in row.iter().enumerate() {
                    if j != i {
                        visit(j, *v);
                    }
                }
            }
            Storage::OnTheFly(k) => {
                let g = self.grid.geometry();
                let mut scratch = vec![0.0; self.grid.dim()];
                let xi = self.grid.center(i);
                for j in 0..n {
                    if j != i {
                        visit(j, k(g.quasi_distance(xi, self.grid.center(j), &mut scratch)));
                    }
                }
            }
        }
    }

    /// `Σ_{j != i} K_ij v_j`, accumulated in `j` order.
    #[inline]
    pub fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        self.for_each_in_row(i, |j, k| acc += k * v[j]);
        acc
    }

    /// `K v`, rows evaluated in parallel.
    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.len())
            .into_par_iter()
            .map(|i| self.row_dot(i, v))
            .collect()
    }

    /// `Σ_i Σ_{j != i} pair(i, j, K_ij)` with deterministic row-major order.
    pub fn pair_sum(&self, pair: impl Fn(usize, usize, f64) -> f64 + Sync) -> f64 {
        let rows: Vec<f64> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut acc = 0.0;
                self.for_each_in_row(i, |j, k| acc += pair(i, j, k));
                acc
            })
            .collect();
        rows.iter().sum()
    }
}

/// Kernel `q^{-exponent}`; `exponent = 0` gives exactly `1`.
pub fn power_kernel(exponent: f64) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
    move |q: f64| {
        if exponent == 0.0 {
            1.0
        } else {
            q.powf(-exponent)
        }
    }
}

/// `Σ_{x != y} F(x, y) / q^{exponent}(y^{-1} ∘ x) · vol²` over the cells of `grid`.
///
/// `integrand(i, j)` receives cell indices. Integrability (`exponent < Q + p` for
/// the integrands in use) is the caller's responsibility; divergence shows up as
/// instability under refinement.
pub fn singular_double_integral(
    grid: &Grid,
    integrand: impl Fn(usize, usize) -> f64 + Sync,
    exponent: f64,
) -> f64 {
    let kernel = KernelMatrix::new(grid, power_kernel(exponent));
    let vol = grid.cell_volume();
    kernel.pair_sum(|i, j, k| integrand(i, j) * k) * (vol * vol)
}

/// Natural logarithm of [`singular_double_integral`] for integrands given by
/// their logarithm; terms with `log_integrand = -inf` contribute nothing.
/// Returns `-inf` when every term vanishes.
pub fn log_singular_double_integral(
    grid: &Grid,
    log_integrand: impl Fn(usize, usize) -> f64 + Sync,
    exponent: f64,
) -> f64 {
    let kernel = KernelMatrix::new(grid, move |q: f64| -exponent * q.ln());
    let shift = {
        let rows: Vec<f64> = (0..kernel.len())
            .into_par_iter()
            .map(|i| {
                let mut m = f64::NEG_INFINITY;
                kernel.for_each_in_row(i, |j, lk| m = m.max(log_integrand(i, j) + lk));
                m
            })
            .collect();
        rows.into_iter().fold(f64::NEG_INFINITY, f64::max)
    };
    if shift == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum = kernel.pair_sum(|i, j, lk| (log_integrand(i, j) + lk - shift).exp());
    shift + sum.ln() + 2.0 * grid.cell_volume().ln()
}
