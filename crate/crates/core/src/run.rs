//! Executes a [`RunConfig`] and assembles the JSON report.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Map, Value as Json};

use crate::config::{residual_theta, PsublapTask, RunConfig, SeminormInput, TaskParams, VerifyTask};
use crate::domain::{DomainSpec, Grid, GridFunction};
use crate::error::{Error, Result};
use crate::family::TestFamily;
use crate::group::Geometry;
use crate::inequalities::{ckn_admissible, estimate_best_constant, Inequality, Refinement};
use crate::psublap::{
    compensated_rescale, eigen_lower_bound_formula, lyapunov_system_quantity, weak_form_residual,
    DirichletExtension, SystemParams,
};
use crate::quadrature::DENSE_ENTRY_LIMIT;
use crate::riesz::{eigen_upper_bound, RieszParams};
use crate::seminorms::{domain_mean, lp_norm, weighted_gagliardo_energy, weighted_gagliardo_seminorm, weighted_lp_norm, SeminormParams};

pub const SCHEMA_VERSION: &str = "1";
/// Relative tolerance of the compensated-rescale invariance check.
pub const INVARIANCE_TOL: f64 = 1e-12;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;
pub const EXIT_UNRESOLVED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Flags {
    pub pass: bool,
    pub violation: bool,
    pub unresolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub version: String,
    pub schema_version: String,
    pub task: String,
    pub resolution: usize,
    pub fine_resolution: usize,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: BTreeMap<String, Json>,
    pub results: Map<String, Json>,
    pub refinement: BTreeMap<String, Refinement>,
    pub flags: Flags,
    pub meta: Meta,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.flags.violation {
            EXIT_VIOLATION
        } else if self.flags.unresolved {
            EXIT_UNRESOLVED
        } else {
            EXIT_PASS
        }
    }

    /// Pretty JSON with sorted keys. Fails on any non-finite number.
    pub fn to_json(&self) -> Result<String> {
        let value = serde_json::to_value(self).map_err(|e| Error::Io(e.to_string()))?;
        check_finite("", &value)?;
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        Ok(text)
    }
}

/// serde_json turns NaN and infinities into `null`; the report never holds
/// a genuine `null`, so any one marks a non-finite value.
fn check_finite(path: &str, value: &Json) -> Result<()> {
    match value {
        Json::Null => Err(Error::Io(format!("non-finite value at `{path}`"))),
        Json::Array(items) => items
            .iter()
            .enumerate()
            .try_for_each(|(i, v)| check_finite(&format!("{path}[{i}]"), v)),
        Json::Object(map) => map.iter().try_for_each(|(k, v)| {
            let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
            check_finite(&p, v)
        }),
        _ => Ok(()),
    }
}

/// What a task produced, before meta data is attached.
struct Outcome {
    results: Map<String, Json>,
    refinement: BTreeMap<String, Refinement>,
    pass: bool,
    violation: bool,
    fine_resolution: usize,
    dump: Option<GridFunction>,
}

impl Outcome {
    fn new(fine_resolution: usize) -> Self {
        Self {
            results: Map::new(),
            refinement: BTreeMap::new(),
            pass: true,
            violation: false,
            fine_resolution,
            dump: None,
        }
    }

    fn put(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(key.to_string(), serde_json::to_value(value).unwrap_or(Json::Null));
    }
}

/// The finer resolution of the refinement pair: twice the base resolution
/// when the kernel matrix of the finer grid fits the dense storage limit,
/// 1.5 times otherwise.
pub fn fine_resolution(geometry: &Geometry, domain: &DomainSpec) -> Result<usize> {
    let r = domain.resolution;
    let cells = Grid::build(geometry, &domain.with_resolution(2 * r))?.len();
    Ok(if cells.saturating_mul(cells) <= DENSE_ENTRY_LIMIT { 2 * r } else { (3 * r).div_ceil(2) })
}

fn build(geometry: &Geometry, domain: &DomainSpec) -> Result<Arc<Grid>> {
    Ok(Arc::new(Grid::build(geometry, domain)?))
}

/// Runs the task. Errors map to exit code 1; violations and unresolved
/// refinements are reported through [`Report::flags`].
pub fn run(cfg: &RunConfig) -> Result<Report> {
    let start = Instant::now();
    let fine = fine_resolution(&cfg.geometry, &cfg.domain)?;
    let mut out = match &cfg.params {
        TaskParams::Riesz(rp) => run_riesz(cfg, rp, fine)?,
        TaskParams::Verify(v) => run_verify(cfg, v, fine)?,
        TaskParams::Psublap(p) => run_psublap(cfg, p, fine)?,
        TaskParams::Seminorm(s) => run_seminorm(cfg, s, fine)?,
    };
    if let (Some(path), Some(u)) = (&cfg.csv, out.dump.take()) {
        u.write_csv(BufWriter::new(File::create(path)?))?;
    }
    let unresolved = out.refinement.values().any(|r| r.unresolved);
    let report = Report {
        config: cfg.echo.clone(),
        results: out.results,
        refinement: out.refinement,
        flags: Flags { pass: out.pass && !out.violation, violation: out.violation, unresolved },
        meta: Meta {
            version: env!("CARGO_PKG_VERSION").to_string(),
            schema_version: SCHEMA_VERSION.to_string(),
            task: cfg.task.name().to_string(),
            resolution: cfg.domain.resolution,
            fine_resolution: out.fine_resolution,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        },
    };
    Ok(report)
}

fn run_riesz(cfg: &RunConfig, rp: &RieszParams, fine: usize) -> Result<Outcome> {
    let mut out = Outcome::new(fine);
    let coarse_grid = build(&cfg.geometry, &cfg.domain)?;
    let coarse = eigen_upper_bound(rp, &coarse_grid)?;
    let fine_bound = eigen_upper_bound(rp, &build(&cfg.geometry, &cfg.domain.with_resolution(fine))?)?;
    out.put("lambda1", coarse.lambda1);
    out.put("c0", coarse.c0);
    out.put("bound", coarse.bound);
    out.put("measure", coarse.measure);
    out.put("iterations", coarse.iterations);
    out.put("residual", coarse.residual);
    out.put("pass", coarse.pass);
    out.put("fine", &fine_bound);
    out.refinement.insert("lambda1".into(), Refinement::new(coarse.lambda1, fine_bound.lambda1));
    out.refinement.insert("c0".into(), Refinement::new(coarse.c0, fine_bound.c0));
    out.violation = !(coarse.pass && fine_bound.pass);
    if cfg.csv.is_some() {
        out.dump = Some(crate::riesz::first_eigenvalue(rp, &coarse_grid)?.eigenvector);
    }
    Ok(out)
}

fn run_verify(cfg: &RunConfig, v: &VerifyTask, fine: usize) -> Result<Outcome> {
    let mut out = Outcome::new(fine);
    let family = TestFamily::new(v.family, v.count, v.support.clone(), cfg.seed)?;
    let coarse_grid = build(&cfg.geometry, &cfg.domain)?;
    let fine_grid = build(&cfg.geometry, &cfg.domain.with_resolution(fine))?;
    let coarse = estimate_best_constant(&family, &coarse_grid, v.inequality, &v.params)?;
    let finer = estimate_best_constant(&family, &fine_grid, v.inequality, &v.params)?;
    out.put("inequality", v.inequality.name());
    out.put("family", v.family.name());
    out.put("c_emp", coarse.c_emp);
    out.put("argmax_id", coarse.argmax_id);
    out.put("ratios", &coarse.ratios);
    out.put("fine_c_emp", finer.c_emp);
    out.put("fine_ratios", &finer.ratios);
    out.put("tau", v.params.tau);
    if matches!(v.inequality, Inequality::Ckn | Inequality::CknCritical { .. }) {
        let q_dim = cfg.geometry.homogeneous_dimension();
        let adm = ckn_admissible(&v.params, q_dim);
        out.put("branch", adm.branch.name());
        out.put("sigma", adm.sigma);
        out.put("balance_defect", adm.balance_defect);
    }
    out.refinement.insert("c_emp".into(), Refinement::new(coarse.c_emp, finer.c_emp));
    for (k, (c, f)) in coarse.ratios.iter().zip(&finer.ratios).enumerate() {
        out.refinement.insert(format!("ratio_{k:04}"), Refinement::new(*c, *f));
    }
    if let Some(limit) = v.limit {
        let exceeded = |c: f64| if v.inequality.takes_minimum() { c < limit } else { c > limit };
        out.violation = exceeded(coarse.c_emp) || exceeded(finer.c_emp);
        out.put("limit", limit);
    }
    if cfg.csv.is_some() {
        out.dump = family.members(&coarse_grid)?.into_iter().nth(coarse.argmax_id);
    }
    Ok(out)
}

/// Smooth profile vanishing outside the quasi-ball of radius `r`.
fn cutoff(geometry: &Geometry, r: f64) -> impl Fn(&[f64]) -> f64 + '_ {
    move |x| {
        let t = geometry.quasi_norm(x).unwrap_or(f64::INFINITY) / r;
        if t < 1.0 {
            (1.0 - 1.0 / (1.0 - t * t)).exp()
        } else {
            0.0
        }
    }
}

fn pairing(ext: &DirichletExtension, u: &GridFunction, image: &[f64]) -> f64 {
    let vol = ext.grid().cell_volume();
    ext.restrict(u).iter().zip(image).map(|(a, b)| a * b * vol).sum()
}

fn run_psublap(cfg: &RunConfig, task: &PsublapTask, fine: usize) -> Result<Outcome> {
    let mut out = Outcome::new(fine);
    let geo = &cfg.geometry;
    let radius = geo.inner_quasi_radius(&cfg.domain)?;
    match task {
        PsublapTask::Apply { s, p, extension } => {
            let profile = cutoff(geo, radius);
            let eval = |domain: &DomainSpec, factor: f64| -> Result<(f64, Vec<f64>, GridFunction, DirichletExtension)> {
                let ext = DirichletExtension::new(geo, domain, factor)?;
                let u = ext.sample(&profile)?;
                let image = ext.apply(&u, *s, *p)?;
                Ok((pairing(&ext, &u, &image), image, u, ext))
            };
            let (energy, image, u, ext) = eval(&cfg.domain, *extension)?;
            let (wider, ..) = eval(&cfg.domain, extension + 1.0)?;
            let (finer, ..) = eval(&cfg.domain.with_resolution(fine), *extension)?;
            let interior = ext.restrict(&u);
            let argmax = argext(&interior, |a, b| a > b);
            let argmin = argext(&interior, |a, b| a < b);
            out.put("pairing", energy);
            out.put("value_at_argmax", image[argmax]);
            out.put("value_at_argmin", image[argmin]);
            out.put("sup_norm", image.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            let sign_ok = image[argmax] >= 0.0 && image[argmin] <= 0.0;
            out.put("sign_ok", sign_ok);
            out.pass = sign_ok;
            out.violation = !sign_ok;
            out.refinement.insert("pairing".into(), Refinement::new(energy, finer));
            out.refinement.insert("pairing_tail".into(), Refinement::new(energy, wider));
            if cfg.csv.is_some() {
                let mut values = vec![0.0; ext.grid().len()];
                for (v, &i) in image.iter().zip(ext.interior()) {
                    values[i] = *v;
                }
                out.dump = Some(GridFunction::new(ext.grid().clone(), values)?);
            }
        }
        PsublapTask::Residual { s, extension, tolerance } => {
            let q_dim = geo.homogeneous_dimension();
            let system = SystemParams::new(vec![*s], vec![2.0], vec![2.0], residual_theta(q_dim, *s), q_dim)?;
            let solve = |domain: &DomainSpec| -> Result<(f64, f64, GridFunction)> {
                let ext = DirichletExtension::new(geo, domain, *extension)?;
                let (lambda, phi) = ext.linear_eigenpair(*s)?;
                let omega = GridFunction::constant(ext.grid().clone(), lambda);
                let residual = weak_form_residual(std::slice::from_ref(&phi), &[omega], &system)?[0];
                Ok((lambda, residual, phi))
            };
            let (lambda, residual, phi) = solve(&cfg.domain)?;
            let (fine_lambda, fine_residual, _) = solve(&cfg.domain.with_resolution(fine))?;
            out.put("lambda", lambda);
            out.put("residual", residual);
            out.put("fine_residual", fine_residual);
            out.put("tolerance", *tolerance);
            out.pass = residual <= *tolerance && fine_residual <= *tolerance;
            out.violation = !out.pass;
            out.refinement.insert("lambda".into(), Refinement::new(lambda, fine_lambda));
            out.dump = Some(phi);
        }
        PsublapTask::Lyapunov { system, weights, rescale } => {
            let quantity = |domain: &DomainSpec| -> Result<(f64, f64, Vec<GridFunction>)> {
                let grid = build(geo, domain)?;
                let omega: Vec<GridFunction> =
                    weights.iter().map(|w| GridFunction::constant(grid.clone(), *w)).collect();
                let q = lyapunov_system_quantity(&omega, system, radius)?;
                Ok((q.scale_invariant_value, q.lhs, omega))
            };
            let (value, lhs, omega) = quantity(&cfg.domain)?;
            let (fine_value, ..) = quantity(&cfg.domain.with_resolution(fine))?;
            let rescaled: Vec<GridFunction> = omega
                .iter()
                .zip(system.s.iter().zip(&system.p))
                .map(|(w, (s, p))| compensated_rescale(w, *s, *p, *rescale))
                .collect::<Result<_>>()?;
            let moved = lyapunov_system_quantity(&rescaled, system, rescale * radius)?.scale_invariant_value;
            let defect = if value == moved { 0.0 } else { (moved - value).abs() / value.abs().max(moved.abs()) };
            out.put("lhs", lhs);
            out.put("radius", radius);
            out.put("exponent", system.radius_exponent());
            out.put("scale_invariant_value", value);
            out.put("rescaled_value", moved);
            out.put("invariance_defect", defect);
            out.pass = defect <= INVARIANCE_TOL;
            out.violation = !out.pass;
            out.refinement.insert("scale_invariant_value".into(), Refinement::new(value, fine_value));
            out.dump = omega.into_iter().next();
        }
        PsublapTask::Bound { system, phi, lambdas, k, c } => {
            let bound = |domain: &DomainSpec| -> Result<(f64, GridFunction)> {
                let weight = GridFunction::constant(build(geo, domain)?, *phi);
                Ok((eigen_lower_bound_formula(system, &weight, lambdas, *k, *c, radius)?, weight))
            };
            let (value, weight) = bound(&cfg.domain)?;
            let (fine_value, _) = bound(&cfg.domain.with_resolution(fine))?;
            out.put("lower_bound", value);
            out.put("radius", radius);
            out.put("component", *k);
            out.refinement.insert("lower_bound".into(), Refinement::new(value, fine_value));
            out.dump = Some(weight);
        }
    }
    Ok(out)
}

fn argext(v: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if better(*x, v[best]) {
            best = i;
        }
    }
    best
}

fn run_seminorm(cfg: &RunConfig, task: &crate::config::SeminormTask, fine: usize) -> Result<Outcome> {
    let geo = &cfg.geometry;
    let radius = geo.inner_quasi_radius(&cfg.domain)?;
    let sample = |grid: Arc<Grid>| -> Result<GridFunction> {
        match &task.input {
            SeminormInput::Gaussian => GridFunction::from_fn(grid, |x| (-x.iter().map(|c| c * c).sum::<f64>()).exp()),
            SeminormInput::Bump => GridFunction::from_fn(grid, cutoff(geo, radius)),
            SeminormInput::Csv(path) => GridFunction::read_csv(grid, File::open(path)?),
        }
    };
    let measure = |u: &GridFunction| -> Result<Map<String, Json>> {
        let sp: &SeminormParams = &task.params;
        let mut m = Map::new();
        m.insert("seminorm".into(), json!(weighted_gagliardo_seminorm(u, sp)));
        m.insert("energy".into(), json!(weighted_gagliardo_energy(u, sp)));
        m.insert("lp_norm".into(), json!(lp_norm(u, sp.p)));
        m.insert("weighted_lp_norm".into(), json!(weighted_lp_norm(u, sp.p, task.gamma)?));
        m.insert("mean".into(), json!(domain_mean(u)?));
        Ok(m)
    };
    let u = sample(build(geo, &cfg.domain)?)?;
    let coarse = measure(&u)?;
    // a CSV input is tied to its grid, so it has no refinement partner
    let finer = match task.input {
        SeminormInput::Csv(_) => None,
        _ => Some(measure(&sample(build(geo, &cfg.domain.with_resolution(fine))?)?)?),
    };
    let mut out = Outcome::new(if finer.is_some() { fine } else { cfg.domain.resolution });
    if let Some(finer) = &finer {
        for key in ["seminorm", "lp_norm"] {
            let (c, f) = (coarse[key].as_f64().unwrap_or(f64::NAN), finer[key].as_f64().unwrap_or(f64::NAN));
            out.refinement.insert(key.into(), Refinement::new(c, f));
        }
    }
    out.results = coarse;
    out.dump = Some(u);
    Ok(out)
}
