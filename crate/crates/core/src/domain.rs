//! Domains, uniform midpoint grids masked to a domain, and grid functions.

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::group::{Geometry, GroupSpec};

#[derive(Debug, Clone, PartialEq)]
pub enum DomainKind {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// `{x : q(x) < radius}`, centered at the identity.
    QuasiBall { radius: f64 },
    /// `{x : inner < q(x) < outer}`, centered at the identity.
    QuasiAnnulus { inner: f64, outer: f64 },
}

/// A domain together with the per-axis grid resolution used to sample it.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub resolution: usize,
}

impl DomainSpec {
    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>, resolution: usize) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::EmptyDomain("box requires lo < hi componentwise".into()));
        }
        Ok(Self {
            kind: DomainKind::Box { lo, hi },
            resolution,
        })
    }

    pub fn ball(radius: f64, resolution: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::EmptyDomain(format!("ball radius must be positive, got {radius}")));
        }
        Ok(Self {
            kind: DomainKind::QuasiBall { radius },
            resolution,
        })
    }

    pub fn annulus(inner: f64, outer: f64, resolution: usize) -> Result<Self> {
        if !(inner > 0.0 && inner < outer && outer.is_finite()) {
            return Err(Error::EmptyDomain(format!(
                "annulus requires 0 < r < R, got r = {inner}, R = {outer}"
            )));
        }
        Ok(Self {
            kind: DomainKind::QuasiAnnulus { inner, outer },
            resolution,
        })
    }

    pub fn with_resolution(&self, resolution: usize) -> Self {
        Self {
            kind: self.kind.clone(),
            resolution,
        }
    }

    /// The image `D_λ(Ω)`.
    pub fn dilated(&self, group: &GroupSpec, lambda: f64) -> Result<Self> {
        let kind = match &self.kind {
            DomainKind::Box { lo, hi } => DomainKind::Box {
                lo: group.dilate(lambda, lo)?,
                hi: group.dilate(lambda, hi)?,
            },
            DomainKind::QuasiBall { radius } => {
                group.dilate(lambda, &group.identity())?;
                DomainKind::QuasiBall {
                    radius: lambda * radius,
                }
            }
            DomainKind::QuasiAnnulus { inner, outer } => {
                group.dilate(lambda, &group.identity())?;
                DomainKind::QuasiAnnulus {
                    inner: lambda * inner,
                    outer: lambda * outer,
                }
            }
        };
        Ok(Self {
            kind,
            resolution: self.resolution,
        })
    }

    /// Axis-aligned box containing the domain. Quasi-balls of radius `R` fit in
    /// `Π [-R^{ν_i}, R^{ν_i}]` for every shipped norm.
    pub fn bounding_box(&self, group: &GroupSpec) -> (Vec<f64>, Vec<f64>) {
        match &self.kind {
            DomainKind::Box { lo, hi } => (lo.clone(), hi.clone()),
            DomainKind::QuasiBall { radius: r } | DomainKind::QuasiAnnulus { outer: r, .. } => {
                let hi: Vec<f64> = group.weights().iter().map(|w| r.powf(*w)).collect();
                let lo = hi.iter().map(|v| -v).collect();
                (lo, hi)
            }
        }
    }

    pub fn contains(&self, geometry: &Geometry, x: &[f64]) -> bool {
        match &self.kind {
            DomainKind::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *l <= *v && *v <= *h),
            DomainKind::QuasiBall { radius } => geometry.quasi_norm_unchecked(x) < *radius,
            DomainKind::QuasiAnnulus { inner, outer } => {
                let q = geometry.quasi_norm_unchecked(x);
                *inner < q && q < *outer
            }
        }
    }

    fn dim(&self) -> Option<usize> {
        match &self.kind {
            DomainKind::Box { lo, .. } => Some(lo.len()),
            _ => None,
        }
    }
}

/// Midpoint tensor grid over a bounding box, masked to a domain.
///
/// Cells are stored in lexicographic order of their multi-index (first axis
/// slowest). All cells share the same volume.
#[derive(Debug, Clone)]
pub struct Grid {
    geometry: Geometry,
    domain: DomainSpec,
    lo: Vec<f64>,
    step: Vec<f64>,
    shape: Vec<usize>,
    tensor_index: Vec<usize>,
    centers: Vec<f64>,
    cell_volume: f64,
}

impl Grid {
    /// Builds the masked grid for `domain` with `domain.resolution` cells per axis.
    pub fn build(geometry: &Geometry, domain: &DomainSpec) -> Result<Self> {
        let n = geometry.dim();
        if let Some(d) = domain.dim() {
            if d != n {
                return Err(Error::DimensionMismatch { expected: n, found: d });
            }
        }
        if domain.resolution < 2 {
            return Err(Error::inadmissible(format!(
                "grid resolution must be >= 2, got {}",
                domain.resolution
            )));
        }
        let (lo, hi) = domain.bounding_box(&geometry.group);
        let res = domain.resolution;
        let step: Vec<f64> = lo.iter().zip(&hi).map(|(l, h)| (h - l) / res as f64).collect();
        let shape = vec![res; n];
        let total = res
            .checked_pow(n as u32)
            .ok_or_else(|| Error::inadmissible("grid too large"))?;

        let mut tensor_index = Vec::new();
        let mut centers = Vec::new();
        let mut x = vec![0.0; n];
        for linear in 0..total {
            let mut rem = linear;
            for a in (0..n).rev() {
                let k = rem % res;
                rem /= res;
                x[a] = lo[a] + (k as f64 + 0.5) * step[a];
            }
            if domain.contains(geometry, &x) {
                tensor_index.push(linear);
                centers.extend_from_slice(&x);
            }
        }
        if tensor_index.is_empty() {
            return Err(Error::EmptyDomain("no cell center falls inside the domain".into()));
        }
        let cell_volume = step.iter().product();
        Ok(Self {
            geometry: geometry.clone(),
            domain: domain.clone(),
            lo,
            step,
            shape,
            tensor_index,
            centers,
            cell_volume,
        })
    }

    /// The grid of `D_λ(Ω)` whose cells are exactly the dilated cells of `self`.
    pub fn dilated(&self, lambda: f64) -> Result<Self> {
        let domain = self.domain.dilated(&self.geometry.group, lambda)?;
        let lo = self.geometry.group.dilate(lambda, &self.lo)?;
        let step = self.geometry.group.dilate(lambda, &self.step)?;
        let mut grid = Self {
            geometry: self.geometry.clone(),
            domain,
            lo,
            step,
            shape: self.shape.clone(),
            tensor_index: self.tensor_index.clone(),
            centers: Vec::new(),
            cell_volume: 0.0,
        };
        grid.cell_volume = grid.step.iter().product();
        grid.centers = grid.recompute_centers();
        Ok(grid)
    }

    /// Cells of `self` whose centers lie in `domain`, on the same tensor lattice.
    pub fn subgrid(&self, domain: &DomainSpec) -> Result<Self> {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| domain.contains(&self.geometry, self.center(i)))
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyDomain("subgrid has no cells".into()));
        }
        let n = self.dim();
        let mut centers = Vec::with_capacity(keep.len() * n);
        for &i in &keep {
            centers.extend_from_slice(self.center(i));
        }
        Ok(Self {
            geometry: self.geometry.clone(),
            domain: domain.with_resolution(self.domain.resolution),
            lo: self.lo.clone(),
            step: self.step.clone(),
            shape: self.shape.clone(),
            tensor_index: keep.iter().map(|&i| self.tensor_index[i]).collect(),
            centers,
            cell_volume: self.cell_volume,
        })
    }

    /// Indices (into `self`) of the cells that lie in `domain`.
    pub fn cells_in(&self, domain: &DomainSpec) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| domain.contains(&self.geometry, self.center(i)))
            .collect()
    }

    fn recompute_centers(&self) -> Vec<f64> {
        let n = self.dim();
        let mut centers = Vec::with_capacity(self.tensor_index.len() * n);
        let mut k = vec![0usize; n];
        for &linear in &self.tensor_index {
            self.unravel(linear, &mut k);
            centers.extend(
                (0..n).map(|a| self.lo[a] + (k[a] as f64 + 0.5) * self.step[a]),
            );
        }
        centers
    }

    fn unravel(&self, mut linear: usize, out: &mut [usize]) {
        for a in (0..self.shape.len()).rev() {
            out[a] = linear % self.shape[a];
            linear /= self.shape[a];
        }
    }

    pub fn len(&self) -> usize {
        self.tensor_index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensor_index.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_volume
    }

    /// `|Ω|_grid = count · cell_volume`.
    pub fn measure(&self) -> f64 {
        self.len() as f64 * self.cell_volume
    }

    pub fn step(&self) -> &[f64] {
        &self.step
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn center(&self, i: usize) -> &[f64] {
        let n = self.dim();
        &self.centers[i * n..(i + 1) * n]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> {
        self.centers.chunks_exact(self.dim())
    }

    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        let mut k = vec![0; self.dim()];
        self.unravel(self.tensor_index[i], &mut k);
        k
    }

    pub(crate) fn tensor_index(&self) -> &[usize] {
        &self.tensor_index
    }

    /// `q(x_i)` for every cell.
    pub fn quasi_norms(&self) -> Vec<f64> {
        self.centers()
            .map(|x| self.geometry.quasi_norm_unchecked(x))
            .collect()
    }

    /// Whether the closed cell `i` contains the identity.
    pub fn cell_touches_identity(&self, i: usize) -> bool {
        self.center(i)
            .iter()
            .zip(&self.step)
            .all(|(c, h)| c.abs() <= 0.5 * h * (1.0 + 1e-12))
    }
}

/// Real values sampled at the cells of a grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::inadmissible(format!("grid function value {v} is not finite")));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = grid.centers().map(f).collect();
        Self::new(grid, values)
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| c * v).collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|v| f(*v)).collect())
    }

    /// Pointwise product with another function on the same grid.
    pub fn product(&self, other: &GridFunction) -> Result<Self> {
        self.check_same_grid(other)?;
        Self::new(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        )
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.check_same_grid(other)?;
        Self::new(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        )
    }

    /// The same values carried over to the dilated grid, i.e. `u_λ(x) = u(D_λ x)`
    /// sampled on `D_{1/λ}(Ω)`.
    pub fn on_dilated_grid(&self, grid_scale: f64) -> Result<Self> {
        let grid = Arc::new(self.grid.dilated(grid_scale)?);
        Ok(Self {
            grid,
            values: self.values.clone(),
        })
    }

    pub(crate) fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if !Arc::ptr_eq(&self.grid, &other.grid) && self.grid.len() != other.grid.len() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                found: other.grid.len(),
            });
        }
        Ok(())
    }

    /// Writes `x1,...,xn,value`, one row per cell in grid order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let n = self.grid.dim();
        let mut header: Vec<String> = (1..=n).map(|a| format!("x{a}")).collect();
        header.push("value".into());
        w.write_record(&header).map_err(csv_err)?;
        for (x, v) in self.grid.centers().zip(&self.values) {
            let row: Vec<String> = x.iter().chain(std::iter::once(v)).map(|c| c.to_string()).collect();
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`GridFunction::write_csv`] back onto `grid`; rows
    /// must list the cell centers in grid order.
    pub fn read_csv<R: Read>(grid: Arc<Grid>, reader: R) -> Result<Self> {
        let n = grid.dim();
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers().map_err(csv_err)?.clone();
        if headers.len() != n + 1 || &headers[n] != "value" {
            return Err(Error::parse("header", format!("expected x1..x{n},value")));
        }
        let mut values = Vec::with_capacity(grid.len());
        for (row, record) in r.records().enumerate() {
            let record = record.map_err(csv_err)?;
            if row >= grid.len() {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    found: row + 1,
                });
            }
            let fields: Vec<f64> = record
                .iter()
                .map(|f| f.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse(format!("row {}", row + 1), e.to_string()))?;
            let center = grid.center(row);
            let scale = grid.step().iter().cloned().fold(0.0, f64::max);
            if fields[..n]
                .iter()
                .zip(center)
                .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + scale))
            {
                return Err(Error::parse(
                    format!("row {}", row + 1),
                    "coordinates do not match the grid cell",
                ));
            }
            values.push(fields[n]);
        }
        Self::new(grid, values)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
