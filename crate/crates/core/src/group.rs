//! Homogeneous Lie groups on coordinate space: group laws, anisotropic dilations,
//! homogeneous quasi-norms and the dyadic annulus decomposition.
//!
//! Two laws are supported, the abelian sum on `R^n` (with arbitrary positive
//! dilation weights) and the Heisenberg group `H^m` in polarized coordinates
//! `(x_1..x_m, y_1..y_m, t)`. Both laws have `x^{-1} = -x`, so every even
//! quasi-norm is automatically symmetric.

use crate::domain::{DomainKind, DomainSpec};
use crate::error::{Error, Result};

pub type Point = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupLaw {
    Abelian,
    /// `H^m` with coordinates `(x, y, t)`, `x, y ∈ R^m`.
    Heisenberg { m: usize },
}

/// A homogeneous group: coordinate dimension, dilation weights and group law.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSpec {
    weights: Vec<f64>,
    law: GroupLaw,
}

impl GroupSpec {
    /// Abelian group `R^n` with dilation weights `weights`.
    pub fn abelian(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidGroup("dimension must be positive".into()));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidGroup(format!(
                "dilation weights must be positive, got {w}"
            )));
        }
        Ok(Self {
            weights,
            law: GroupLaw::Abelian,
        })
    }

    /// Euclidean `R^n` with isotropic dilations.
    pub fn euclidean(n: usize) -> Result<Self> {
        Self::abelian(vec![1.0; n])
    }

    /// Heisenberg group `H^m`, dimension `2m + 1`, weights `(1, .., 1, 2)`.
    pub fn heisenberg(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidGroup("Heisenberg index m must be >= 1".into()));
        }
        let mut weights = vec![1.0; 2 * m];
        weights.push(2.0);
        Ok(Self {
            weights,
            law: GroupLaw::Heisenberg { m },
        })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn law(&self) -> GroupLaw {
        self.law
    }

    /// `Q = ν_1 + .. + ν_n`.
    pub fn homogeneous_dimension(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn identity(&self) -> Point {
        vec![0.0; self.dim()]
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Group product `x ∘ y`.
    pub fn compose(&self, x: &[f64], y: &[f64]) -> Result<Point> {
        self.check_dim(x)?;
        self.check_dim(y)?;
        let mut out: Point = x.iter().zip(y).map(|(a, b)| a + b).collect();
        if let GroupLaw::Heisenberg { m } = self.law {
            out[2 * m] += 0.5 * symplectic(m, x, y);
        }
        Ok(out)
    }

    pub fn inverse(&self, x: &[f64]) -> Result<Point> {
        self.check_dim(x)?;
        Ok(x.iter().map(|v| -v).collect())
    }

    /// Anisotropic dilation `D_λ(x) = (λ^{ν_1} x_1, .., λ^{ν_n} x_n)`.
    pub fn dilate(&self, lambda: f64, x: &[f64]) -> Result<Point> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::NonPositiveScale(lambda));
        }
        self.check_dim(x)?;
        Ok(x.iter()
            .zip(&self.weights)
            .map(|(v, w)| lambda.powf(*w) * v)
            .collect())
    }

    /// Writes `y^{-1} ∘ x` into `out` without allocating. Lengths are not checked.
    #[inline]
    pub(crate) fn left_difference_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o = a - b;
        }
        if let GroupLaw::Heisenberg { m } = self.law {
            // (-y) ∘ x: the twist is ½ ω(-y, x) = -½ ω(y, x)
            out[2 * m] -= 0.5 * symplectic(m, y, x);
        }
    }
}

/// `ω(z, z') = Σ_j (x_j y'_j - y_j x'_j)` on the first `2m` coordinates.
#[inline]
fn symplectic(m: usize, a: &[f64], b: &[f64]) -> f64 {
    (0..m)
        .map(|j| a[j] * b[m + j] - a[m + j] * b[j])
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `|x|_2`, only for unit weights.
    Euclidean,
    /// `max_i |x_i|^{1/ν_i}`.
    AnisoMax,
    /// `(|z|^4 + t^2)^{1/4}` on a Heisenberg group.
    Koranyi,
}

impl NormKind {
    pub fn name(self) -> &'static str {
        match self {
            NormKind::Euclidean => "euclidean",
            NormKind::AnisoMax => "aniso-max",
            NormKind::Koranyi => "koranyi",
        }
    }
}

/// A homogeneous quasi-norm whose compatibility with a group was checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuasiNormSpec {
    kind: NormKind,
}

impl QuasiNormSpec {
    pub fn new(kind: NormKind, group: &GroupSpec) -> Result<Self> {
        match kind {
            NormKind::Euclidean => {
                if group.law != GroupLaw::Abelian || group.weights.iter().any(|w| *w != 1.0) {
                    return Err(Error::IncompatibleNorm(
                        "euclidean requires an abelian group with unit weights".into(),
                    ));
                }
            }
            NormKind::AnisoMax => {}
            NormKind::Koranyi => {
                if !matches!(group.law, GroupLaw::Heisenberg { .. }) {
                    return Err(Error::IncompatibleNorm("koranyi requires heisenberg".into()));
                }
            }
        }
        Ok(Self { kind })
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }
}

/// A group together with a compatible quasi-norm; the pair `(G, q)` every
/// analytic quantity depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub group: GroupSpec,
    pub norm: QuasiNormSpec,
}

impl Geometry {
    pub fn new(group: GroupSpec, kind: NormKind) -> Result<Self> {
        let norm = QuasiNormSpec::new(kind, &group)?;
        Ok(Self { group, norm })
    }

    /// Euclidean `R^n` with the Euclidean norm.
    pub fn euclidean(n: usize) -> Result<Self> {
        Self::new(GroupSpec::euclidean(n)?, NormKind::Euclidean)
    }

    /// `H^m` with the Korányi gauge.
    pub fn koranyi(m: usize) -> Result<Self> {
        Self::new(GroupSpec::heisenberg(m)?, NormKind::Koranyi)
    }

    pub fn dim(&self) -> usize {
        self.group.dim()
    }

    pub fn homogeneous_dimension(&self) -> f64 {
        self.group.homogeneous_dimension()
    }

    pub fn quasi_norm(&self, x: &[f64]) -> Result<f64> {
        self.group.check_dim(x)?;
        Ok(self.quasi_norm_unchecked(x))
    }

    #[inline]
    pub(crate) fn quasi_norm_unchecked(&self, x: &[f64]) -> f64 {
        match self.norm.kind {
            NormKind::Euclidean => x.iter().map(|v| v * v).sum::<f64>().sqrt(),
            NormKind::AnisoMax => x
                .iter()
                .zip(self.group.weights())
                .map(|(v, w)| if *w == 1.0 { v.abs() } else { v.abs().powf(1.0 / w) })
                .fold(0.0, f64::max),
            NormKind::Koranyi => {
                let m = (x.len() - 1) / 2;
                let z2: f64 = x[..2 * m].iter().map(|v| v * v).sum();
                let t = x[2 * m];
                (z2 * z2 + t * t).sqrt().sqrt()
            }
        }
    }

    /// `q(y^{-1} ∘ x)`, using `scratch` (length `dim`) for the group difference.
    #[inline]
    pub(crate) fn quasi_distance(&self, x: &[f64], y: &[f64], scratch: &mut [f64]) -> f64 {
        self.group.left_difference_into(x, y, scratch);
        self.quasi_norm_unchecked(scratch)
    }

    /// The unique `k` with `2^k <= q(x) < 2^{k+1}`.
    pub fn annulus_index(&self, x: &[f64]) -> Result<i32> {
        let q = self.quasi_norm(x)?;
        if q == 0.0 {
            return Err(Error::OriginPoint);
        }
        let mut k = q.log2().floor() as i32;
        if 2f64.powi(k) > q {
            k -= 1;
        } else if 2f64.powi(k + 1) <= q {
            k += 1;
        }
        Ok(k)
    }

    /// `r_{Ω,q} = max{q(x) : x ∈ Ω}`.
    ///
    /// All shipped norms are nondecreasing in each `|x_i|`, so on a box the
    /// maximum is attained at one of the `2^n` corners and is computed exactly.
    pub fn inner_quasi_radius(&self, domain: &DomainSpec) -> Result<f64> {
        match &domain.kind {
            DomainKind::QuasiBall { radius } => Ok(*radius),
            DomainKind::QuasiAnnulus { outer, .. } => Ok(*outer),
            DomainKind::Box { lo, hi } => {
                self.group.check_dim(lo)?;
                self.group.check_dim(hi)?;
                let n = lo.len();
                let mut best: f64 = 0.0;
                let mut corner = vec![0.0; n];
                for mask in 0u32..(1 << n) {
                    for a in 0..n {
                        corner[a] = if mask & (1 << a) == 0 { lo[a] } else { hi[a] };
                    }
                    best = best.max(self.quasi_norm_unchecked(&corner));
                }
                Ok(best)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn heis() -> Geometry {
        Geometry::koranyi(1).unwrap()
    }

    #[test]
    fn group_law_examples() {
        let r2 = GroupSpec::euclidean(2).unwrap();
        assert_eq!(r2.compose(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![4.0, 6.0]);
        let h = GroupSpec::heisenberg(1).unwrap();
        assert_eq!(
            h.compose(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(),
            vec![1.0, 1.0, 0.5]
        );
        let x = [0.3, -1.2, 2.5];
        assert_eq!(h.compose(&x, &h.identity()).unwrap(), x.to_vec());
        assert_eq!(h.compose(&h.identity(), &x).unwrap(), x.to_vec());
        assert!(matches!(
            r2.compose(&[1.0], &[1.0, 2.0]),
            Err(Error::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn inverse_examples() {
        let r2 = GroupSpec::euclidean(2).unwrap();
        assert_eq!(r2.inverse(&[3.0, -4.0]).unwrap(), vec![-3.0, 4.0]);
        let h = GroupSpec::heisenberg(1).unwrap();
        let x = [1.0, 1.0, 0.5];
        let xi = h.inverse(&x).unwrap();
        assert_eq!(h.compose(&x, &xi).unwrap(), vec![0.0, 0.0, 0.0]);
        assert_eq!(h.inverse(&h.identity()).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn dilation_examples() {
        let r2 = GroupSpec::euclidean(2).unwrap();
        assert_eq!(r2.dilate(2.0, &[3.0, 4.0]).unwrap(), vec![6.0, 8.0]);
        let h = GroupSpec::heisenberg(1).unwrap();
        assert_eq!(h.dilate(3.0, &[1.0, 1.0, 1.0]).unwrap(), vec![3.0, 3.0, 9.0]);
        assert_eq!(h.dilate(1.0, &[0.7, -2.0, 5.0]).unwrap(), vec![0.7, -2.0, 5.0]);
        assert_eq!(h.dilate(0.0, &[1.0, 1.0, 1.0]), Err(Error::NonPositiveScale(0.0)));
        assert!(h.dilate(-1.0, &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn homogeneous_dimensions() {
        assert_eq!(GroupSpec::euclidean(2).unwrap().homogeneous_dimension(), 2.0);
        assert_eq!(GroupSpec::heisenberg(1).unwrap().homogeneous_dimension(), 4.0);
        assert_eq!(
            GroupSpec::abelian(vec![1.0, 2.0]).unwrap().homogeneous_dimension(),
            3.0
        );
        assert!(GroupSpec::abelian(vec![1.0, 0.0]).is_err());
        assert!(GroupSpec::heisenberg(0).is_err());
    }

    #[test]
    fn quasi_norm_examples() {
        let e2 = Geometry::euclidean(2).unwrap();
        assert_eq!(e2.quasi_norm(&[3.0, 4.0]).unwrap(), 5.0);
        let h = heis();
        assert!((h.quasi_norm(&[3.0, 4.0, 0.0]).unwrap() - 5.0).abs() < 1e-14);
        let d = h.group.dilate(2.0, &[3.0, 4.0, 0.0]).unwrap();
        assert!((h.quasi_norm(&d).unwrap() - 10.0).abs() < 1e-13);
        let aniso = Geometry::new(GroupSpec::abelian(vec![1.0, 2.0]).unwrap(), NormKind::AnisoMax)
            .unwrap();
        assert_eq!(aniso.quasi_norm(&[0.5, -9.0]).unwrap(), 3.0);
    }

    #[test]
    fn norm_compatibility() {
        let ab = GroupSpec::euclidean(3).unwrap();
        assert_eq!(
            QuasiNormSpec::new(NormKind::Koranyi, &ab),
            Err(Error::IncompatibleNorm("koranyi requires heisenberg".into()))
        );
        let h = GroupSpec::heisenberg(1).unwrap();
        assert!(QuasiNormSpec::new(NormKind::Euclidean, &h).is_err());
        let w = GroupSpec::abelian(vec![1.0, 2.0]).unwrap();
        assert!(QuasiNormSpec::new(NormKind::Euclidean, &w).is_err());
        assert!(QuasiNormSpec::new(NormKind::AnisoMax, &h).is_ok());
    }

    #[test]
    fn annulus_index_examples() {
        let e2 = Geometry::euclidean(2).unwrap();
        assert_eq!(e2.annulus_index(&[3.0, 0.0]).unwrap(), 1);
        assert_eq!(e2.annulus_index(&[0.3, 0.4]).unwrap(), -1);
        assert_eq!(e2.annulus_index(&[1.0, 0.0]).unwrap(), 0);
        assert_eq!(e2.annulus_index(&[0.0, 0.0]), Err(Error::OriginPoint));
    }

    #[test]
    fn inner_radius_examples() {
        let e2 = Geometry::euclidean(2).unwrap();
        let ball = DomainSpec::ball(2.0, 10).unwrap();
        assert_eq!(e2.inner_quasi_radius(&ball).unwrap(), 2.0);
        let square = DomainSpec::boxed(vec![1.0, 1.0], vec![2.0, 2.0], 10).unwrap();
        let r = e2.inner_quasi_radius(&square).unwrap();
        assert!((r - 8f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn koranyi_box_radius_matches_dense_grid_maximization() {
        // oracle: maximize q over a 201^3 lattice covering [-1,1]^3, boundary included
        let h = heis();
        let n = 201;
        let mut best: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let x = [
                        -1.0 + 2.0 * i as f64 / (n - 1) as f64,
                        -1.0 + 2.0 * j as f64 / (n - 1) as f64,
                        -1.0 + 2.0 * k as f64 / (n - 1) as f64,
                    ];
                    best = best.max(h.quasi_norm(&x).unwrap());
                }
            }
        }
        let cube = DomainSpec::boxed(vec![-1.0; 3], vec![1.0; 3], 8).unwrap();
        let r = h.inner_quasi_radius(&cube).unwrap();
        assert!((r - best).abs() <= 1e-14 * best);
        assert!((r - 5f64.powf(0.25)).abs() < 1e-14);
    }

    fn geometries() -> Vec<Geometry> {
        vec![
            Geometry::euclidean(2).unwrap(),
            Geometry::new(GroupSpec::abelian(vec![1.0, 2.0]).unwrap(), NormKind::AnisoMax).unwrap(),
            Geometry::new(GroupSpec::heisenberg(1).unwrap(), NormKind::AnisoMax).unwrap(),
            heis(),
            Geometry::koranyi(2).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn dilation_is_an_automorphism(
            a in prop::array::uniform3(-3.0f64..3.0),
            b in prop::array::uniform3(-3.0f64..3.0),
            lambda in 0.05f64..20.0,
        ) {
            let g = GroupSpec::heisenberg(1).unwrap();
            let lhs = g.dilate(lambda, &g.compose(&a, &b).unwrap()).unwrap();
            let rhs = g.compose(&g.dilate(lambda, &a).unwrap(), &g.dilate(lambda, &b).unwrap()).unwrap();
            let scale = lhs.iter().chain(&rhs).fold(1.0f64, |m, v| m.max(v.abs()));
            for (l, r) in lhs.iter().zip(&rhs) {
                prop_assert!((l - r).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn heisenberg_law_is_associative(
            a in prop::array::uniform3(-3.0f64..3.0),
            b in prop::array::uniform3(-3.0f64..3.0),
            c in prop::array::uniform3(-3.0f64..3.0),
        ) {
            let g = GroupSpec::heisenberg(1).unwrap();
            let l = g.compose(&g.compose(&a, &b).unwrap(), &c).unwrap();
            let r = g.compose(&a, &g.compose(&b, &c).unwrap()).unwrap();
            let scale = l.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            for (x, y) in l.iter().zip(&r) {
                prop_assert!((x - y).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn left_difference_matches_inverse_then_compose(
            a in prop::array::uniform5(-3.0f64..3.0),
            b in prop::array::uniform5(-3.0f64..3.0),
        ) {
            let g = GroupSpec::heisenberg(2).unwrap();
            let direct = g.compose(&g.inverse(&b).unwrap(), &a).unwrap();
            let mut fast = vec![0.0; 5];
            g.left_difference_into(&a, &b, &mut fast);
            for (x, y) in direct.iter().zip(&fast) {
                prop_assert!((x - y).abs() <= 1e-13 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn quasi_norm_axioms(
            coords in prop::collection::vec(-4.0f64..4.0, 5),
            lambda in 0.01f64..100.0,
        ) {
            for geo in geometries() {
                let x = &coords[..geo.dim()];
                let q = geo.quasi_norm(x).unwrap();
                let qd = geo.quasi_norm(&geo.group.dilate(lambda, x).unwrap()).unwrap();
                prop_assert!((qd - lambda * q).abs() <= 1e-12 * lambda * q);
                let qi = geo.quasi_norm(&geo.group.inverse(x).unwrap()).unwrap();
                prop_assert_eq!(qi, q);
                prop_assert_eq!(q == 0.0, x.iter().all(|v| *v == 0.0));
            }
        }
    }
}
