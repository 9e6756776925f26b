//! Fractional seminorms, Riesz potentials and Lyapunov-type bounds on
//! homogeneous Lie groups, discretized on uniform midpoint grids.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod domain;
pub mod error;
pub mod family;
pub mod group;
pub mod inequalities;
pub mod psublap;
pub mod quadrature;
pub mod riesz;
pub mod run;
pub mod seminorms;

pub use domain::{DomainKind, DomainSpec, Grid, GridFunction};
pub use error::{Error, Result};
pub use group::{Geometry, GroupLaw, GroupSpec, NormKind, Point, QuasiNormSpec};
