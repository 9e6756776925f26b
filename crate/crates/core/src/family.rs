//! Deterministic families of smooth, compactly supported test functions.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{DomainKind, DomainSpec, Grid, GridFunction};
use crate::error::{Error, Result};

/// Required clearance between the family support and the computational box,
/// as a fraction of the box width on each axis.
pub const BOX_MARGIN: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FamilyKind {
    /// Single bumps `exp(-t/(1-t))` with random centers and radii.
    GaussianBumps,
    /// `(q/R)^{2k} · exp(1 - 1/(1-(q/R)²))`, `k = 0, 1, ...`, radial in the quasi-norm.
    RadialPowersCutoff,
    /// Signed combinations of three random bumps.
    RandomSmooth,
}

impl FamilyKind {
    pub fn name(self) -> &'static str {
        match self {
            FamilyKind::GaussianBumps => "gaussian-bumps",
            FamilyKind::RadialPowersCutoff => "radial-powers-cutoff",
            FamilyKind::RandomSmooth => "random-smooth",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFamily {
    pub kind: FamilyKind,
    pub count: usize,
    /// Region holding the supports of all members (through its bounding box).
    pub support: DomainSpec,
    pub seed: u64,
}

/// `exp(-t/(1-t))` for `t < 1`, else 0.
fn bump_profile(t: f64) -> f64 {
    if t < 1.0 {
        (-t / (1.0 - t)).exp()
    } else {
        0.0
    }
}

struct Bump {
    center: Vec<f64>,
    radius: Vec<f64>,
    amplitude: f64,
}

impl Bump {
    fn random(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64], amplitude: f64) -> Self {
        let mut center = Vec::with_capacity(lo.len());
        let mut radius = Vec::with_capacity(lo.len());
        for (l, h) in lo.iter().zip(hi) {
            let half = 0.5 * (h - l);
            let r = half * rng.gen_range(0.3..0.7);
            center.push(rng.gen_range(l + r..h - r));
            radius.push(r);
        }
        Self { center, radius, amplitude }
    }

    fn eval(&self, x: &[f64]) -> f64 {
        let t: f64 = x
            .iter()
            .zip(self.center.iter().zip(&self.radius))
            .map(|(x, (c, r))| ((x - c) / r).powi(2))
            .sum();
        self.amplitude * bump_profile(t)
    }
}

impl TestFamily {
    pub fn new(kind: FamilyKind, count: usize, support: DomainSpec, seed: u64) -> Result<Self> {
        if count == 0 {
            return Err(Error::inadmissible("test family must have at least one member"));
        }
        Ok(Self { kind, count, support, seed })
    }

    /// Checks that the family support sits inside the computational box with
    /// the required margin.
    fn check_support(&self, grid: &Grid) -> Result<(Vec<f64>, Vec<f64>)> {
        let (glo, ghi) = match &grid.domain().kind {
            DomainKind::Box { lo, hi } => (lo.clone(), hi.clone()),
            _ => return Err(Error::inadmissible("test families need a box computational domain")),
        };
        let group = &grid.geometry().group;
        let (lo, hi) = self.support.bounding_box(group);
        if lo.len() != glo.len() {
            return Err(Error::DimensionMismatch { expected: glo.len(), found: lo.len() });
        }
        for a in 0..lo.len() {
            let margin = BOX_MARGIN * (ghi[a] - glo[a]);
            if lo[a] < glo[a] + margin * (1.0 - 1e-12) || hi[a] > ghi[a] - margin * (1.0 - 1e-12) {
                return Err(Error::SupportViolation(format!(
                    "family support on axis {a} is [{}, {}], needs to lie within [{}, {}]",
                    lo[a],
                    hi[a],
                    glo[a] + margin,
                    ghi[a] - margin
                )));
            }
        }
        Ok((lo, hi))
    }

    /// Samples every member on `grid`. Member `k` uses its own random stream,
    /// so members do not depend on `count`.
    pub fn members(&self, grid: &Arc<Grid>) -> Result<Vec<GridFunction>> {
        let (lo, hi) = self.check_support(grid)?;
        let geometry = grid.geometry().clone();
        (0..self.count)
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(k as u64);
                match self.kind {
                    FamilyKind::GaussianBumps => {
                        let b = Bump::random(&mut rng, &lo, &hi, 1.0);
                        GridFunction::from_fn(grid.clone(), |x| b.eval(x))
                    }
                    FamilyKind::RandomSmooth => {
                        let bumps: Vec<Bump> = (0..3)
                            .map(|_| {
                                let amp = rng.gen_range(-1.0..1.0);
                                Bump::random(&mut rng, &lo, &hi, amp)
                            })
                            .collect();
                        GridFunction::from_fn(grid.clone(), |x| bumps.iter().map(|b| b.eval(x)).sum())
                    }
                    FamilyKind::RadialPowersCutoff => {
                        // largest quasi-ball whose bounding box fits in the support box
                        let radius = lo
                            .iter()
                            .zip(&hi)
                            .zip(geometry.group.weights())
                            .map(|((l, h), w)| (-l).min(*h).max(0.0).powf(1.0 / w))
                            .fold(f64::INFINITY, f64::min);
                        if !(radius > 0.0) {
                            return Err(Error::SupportViolation(
                                "radial family needs a support box around the identity".into(),
                            ));
                        }
                        let power = 2 * k as i32;
                        GridFunction::from_fn(grid.clone(), |x| {
                            let t = geometry.quasi_norm_unchecked(x) / radius;
                            if t < 1.0 {
                                t.powi(power) * (1.0 - 1.0 / (1.0 - t * t)).exp()
                            } else {
                                0.0
                            }
                        })
                    }
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::Geometry;

    fn computational(res: usize) -> Arc<Grid> {
        Arc::new(
            Grid::build(
                &Geometry::euclidean(2).unwrap(),
                &DomainSpec::boxed(vec![-2.0, -2.0], vec![2.0, 2.0], res).unwrap(),
            )
            .unwrap(),
        )
    }

    fn support() -> DomainSpec {
        DomainSpec::boxed(vec![-1.5, -1.5], vec![1.5, 1.5], 2).unwrap()
    }

    #[test]
    fn members_are_deterministic_and_supported() {
        let g = computational(24);
        for kind in [FamilyKind::GaussianBumps, FamilyKind::RadialPowersCutoff, FamilyKind::RandomSmooth] {
            let fam = TestFamily::new(kind, 4, support(), 42).unwrap();
            let a = fam.members(&g).unwrap();
            let b = fam.members(&g).unwrap();
            assert_eq!(a.len(), 4);
            for (u, v) in a.iter().zip(&b) {
                assert_eq!(u.values(), v.values());
                assert!(!u.is_zero());
                for (i, x) in g.centers().enumerate() {
                    if x.iter().any(|c| c.abs() > 1.5) {
                        assert_eq!(u.values()[i], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn members_do_not_depend_on_count() {
        let g = computational(16);
        let small = TestFamily::new(FamilyKind::RandomSmooth, 2, support(), 7).unwrap();
        let large = TestFamily { count: 5, ..small.clone() };
        let a = small.members(&g).unwrap();
        let b = large.members(&g).unwrap();
        assert_eq!(a[1].values(), b[1].values());
        let other = TestFamily { seed: 8, ..small };
        assert_ne!(other.members(&g).unwrap()[0].values(), a[0].values());
    }

    #[test]
    fn support_margin_is_enforced() {
        let g = computational(16);
        let wide = DomainSpec::boxed(vec![-1.8, -1.5], vec![1.5, 1.5], 2).unwrap();
        let fam = TestFamily::new(FamilyKind::GaussianBumps, 1, wide, 1).unwrap();
        assert!(matches!(fam.members(&g), Err(Error::SupportViolation(_))));
        assert!(TestFamily::new(FamilyKind::GaussianBumps, 0, support(), 1).is_err());
    }
}
