//! Run configuration: a flat key-value TOML document (dotted keys such as
//! `domain.radius = 1.0`), validated into a [`RunConfig`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde_json::{json, Value as Json};
use toml::Value;

use crate::domain::{DomainKind, DomainSpec};
use crate::error::{Error, Result};
use crate::family::FamilyKind;
use crate::group::{Geometry, GroupSpec, NormKind};
use crate::inequalities::{gn_balance_tau, sobolev_exponent, Inequality, InequalityParams};
use crate::psublap::SystemParams;
use crate::riesz::RieszParams;
use crate::seminorms::SeminormParams;

pub const DEFAULT_RESOLUTION: usize = 100;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-6;
pub const DEFAULT_EXTENSION: f64 = 3.0;
/// Fraction of the box width kept free on each side by the default family support.
const DEFAULT_SUPPORT_INSET: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Riesz,
    Verify,
    Psublap,
    Seminorm,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Riesz => "riesz",
            Task::Verify => "verify",
            Task::Psublap => "psublap",
            Task::Seminorm => "seminorm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "riesz" => Some(Task::Riesz),
            "verify" => Some(Task::Verify),
            "psublap" => Some(Task::Psublap),
            "seminorm" => Some(Task::Seminorm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyTask {
    pub inequality: Inequality,
    pub params: InequalityParams,
    pub family: FamilyKind,
    pub count: usize,
    pub support: DomainSpec,
    /// Exit with a violation when the empirical constant exceeds this
    /// (falls below it for Hardy).
    pub limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PsublapTask {
    Apply { s: f64, p: f64, extension: f64 },
    Residual { s: f64, extension: f64, tolerance: f64 },
    Lyapunov { system: SystemParams, weights: Vec<f64>, rescale: f64 },
    Bound { system: SystemParams, phi: f64, lambdas: Vec<f64>, k: usize, c: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum SeminormInput {
    Gaussian,
    Bump,
    Csv(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeminormTask {
    pub params: SeminormParams,
    pub gamma: f64,
    pub input: SeminormInput,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskParams {
    Riesz(RieszParams),
    Verify(VerifyTask),
    Psublap(PsublapTask),
    Seminorm(SeminormTask),
}

/// A validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub task: Task,
    pub geometry: Geometry,
    pub domain: DomainSpec,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub params: TaskParams,
    /// Every resolved key, defaults included, for the report.
    pub echo: BTreeMap<String, Json>,
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub task: Option<String>,
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub inequality: Option<String>,
    pub mode: Option<String>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

struct Keys {
    map: BTreeMap<String, Value>,
    used: BTreeSet<String>,
    echo: BTreeMap<String, Json>,
}

impl Keys {
    fn take(&mut self, key: &str) -> Option<Value> {
        self.used.insert(key.to_string());
        self.map.get(key).cloned()
    }

    fn record(&mut self, key: &str, value: Json) {
        self.echo.insert(key.to_string(), value);
    }

    fn f64_opt(&mut self, key: &str) -> Result<Option<f64>> {
        let v = match self.take(key) {
            None => return Ok(None),
            Some(Value::Float(f)) => f,
            Some(Value::Integer(i)) => i as f64,
            Some(_) => return Err(Error::parse(key, "expected a number")),
        };
        if !v.is_finite() {
            return Err(Error::parse(key, "must be finite"));
        }
        self.record(key, json!(v));
        Ok(Some(v))
    }

    fn f64_req(&mut self, key: &str) -> Result<f64> {
        self.f64_opt(key)?.ok_or_else(|| Error::parse(key, "required"))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.f64_opt(key)? {
            Some(v) => Ok(v),
            None => {
                self.record(key, json!(default));
                Ok(default)
            }
        }
    }

    fn int_opt(&mut self, key: &str) -> Result<Option<i64>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => {
                self.record(key, json!(i));
                Ok(Some(i))
            }
            Some(_) => Err(Error::parse(key, "expected an integer")),
        }
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.int_opt(key)? {
            Some(i) if i >= 0 => Ok(i as usize),
            Some(_) => Err(Error::parse(key, "must be nonnegative")),
            None => {
                self.record(key, json!(default));
                Ok(default)
            }
        }
    }

    fn str_opt(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => {
                self.record(key, json!(s));
                Ok(Some(s))
            }
            Some(_) => Err(Error::parse(key, "expected a string")),
        }
    }

    fn str_or(&mut self, key: &str, default: &str) -> Result<String> {
        match self.str_opt(key)? {
            Some(s) => Ok(s),
            None => {
                self.record(key, json!(default));
                Ok(default.to_string())
            }
        }
    }

    /// A list of numbers; a single number is read as a one-element list.
    fn list_opt(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        let values = match self.take(key) {
            None => return Ok(None),
            Some(Value::Array(items)) => items
                .into_iter()
                .map(|v| match v {
                    Value::Float(f) if f.is_finite() => Ok(f),
                    Value::Integer(i) => Ok(i as f64),
                    _ => Err(Error::parse(key, "expected a list of finite numbers")),
                })
                .collect::<Result<Vec<f64>>>()?,
            Some(Value::Float(f)) if f.is_finite() => vec![f],
            Some(Value::Integer(i)) => vec![i as f64],
            Some(_) => return Err(Error::parse(key, "expected a list of numbers")),
        };
        self.record(key, json!(values));
        Ok(Some(values))
    }

    fn list_req(&mut self, key: &str) -> Result<Vec<f64>> {
        self.list_opt(key)?.ok_or_else(|| Error::parse(key, "required"))
    }

    fn finish(self) -> Result<BTreeMap<String, Json>> {
        if let Some(k) = self.map.keys().find(|k| !self.used.contains(*k)) {
            return Err(Error::parse(k.clone(), "unknown key"));
        }
        Ok(self.echo)
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &Overrides::default())
}

/// [`parse_config`] with command-line overrides applied before validation.
pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
        let key = e.span().map(|s| format!("byte {}", s.start)).unwrap_or_else(|| "document".into());
        Error::parse(key, e.message().to_string())
    })?;
    let mut map = BTreeMap::new();
    flatten("", &table, &mut map);
    if let (Some(cli), Some(doc)) = (&overrides.task, map.get("task")) {
        if doc.as_str() != Some(cli.as_str()) {
            return Err(Error::parse("task", format!("document says {doc}, command line says `{cli}`")));
        }
    }
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            map.insert(key.to_string(), v);
        }
    };
    set("task", overrides.task.clone().map(Value::String));
    set("domain.resolution", overrides.resolution.map(|r| Value::Integer(r as i64)));
    set("seed", overrides.seed.map(|s| Value::Integer(s as i64)));
    set("output", overrides.output.as_ref().map(|p| Value::String(p.display().to_string())));
    set("csv", overrides.csv.as_ref().map(|p| Value::String(p.display().to_string())));
    set("verify.inequality", overrides.inequality.clone().map(Value::String));
    set("psublap.mode", overrides.mode.clone().map(Value::String));

    let mut keys = Keys { map, used: BTreeSet::new(), echo: BTreeMap::new() };
    let task_name = keys.str_opt("task")?.ok_or_else(|| Error::parse("task", "required"))?;
    let task = Task::parse(&task_name)
        .ok_or_else(|| Error::parse("task", format!("unknown task `{task_name}`")))?;
    let seed = match keys.int_opt("seed")? {
        Some(s) if s >= 0 => s as u64,
        Some(_) => return Err(Error::parse("seed", "must be nonnegative")),
        None => {
            keys.record("seed", json!(0));
            0
        }
    };
    let output = keys.str_opt("output")?.map(PathBuf::from);
    let csv = keys.str_opt("csv")?.map(PathBuf::from);

    let geometry = parse_geometry(&mut keys)?;
    let domain = parse_domain(&mut keys, &geometry)?;
    let q_dim = geometry.homogeneous_dimension();

    let params = match task {
        Task::Riesz => {
            let s = keys.f64_req("riesz.s")?;
            let p = keys.f64_req("riesz.p")?;
            let rp = RieszParams::new(s, p, q_dim)?;
            if !rp.kernel_integrable() {
                return Err(Error::NonIntegrableKernel { two_sp: 2.0 * s * p, q_dim });
            }
            TaskParams::Riesz(rp)
        }
        Task::Verify => TaskParams::Verify(parse_verify(&mut keys, &geometry, &domain)?),
        Task::Psublap => TaskParams::Psublap(parse_psublap(&mut keys, q_dim)?),
        Task::Seminorm => {
            let s = keys.f64_req("seminorm.s")?;
            let p = keys.f64_req("seminorm.p")?;
            let beta1 = keys.f64_or("seminorm.beta1", 0.0)?;
            let beta2 = keys.f64_or("seminorm.beta2", 0.0)?;
            let gamma = keys.f64_or("seminorm.gamma", 0.0)?;
            let input = match keys.str_or("seminorm.function", "gaussian")?.as_str() {
                "gaussian" => SeminormInput::Gaussian,
                "bump" => SeminormInput::Bump,
                "csv" => SeminormInput::Csv(PathBuf::from(
                    keys.str_opt("seminorm.input")?
                        .ok_or_else(|| Error::parse("seminorm.input", "required for function = csv"))?,
                )),
                other => return Err(Error::parse("seminorm.function", format!("unknown function `{other}`"))),
            };
            TaskParams::Seminorm(SeminormTask {
                params: SeminormParams::weighted(s, p, beta1, beta2)?,
                gamma,
                input,
            })
        }
    };
    let echo = keys.finish()?;
    Ok(RunConfig { task, geometry, domain, seed, output, csv, params, echo })
}

fn parse_geometry(keys: &mut Keys) -> Result<Geometry> {
    let law = keys.str_or("group.law", "abelian")?;
    let group = match law.as_str() {
        "abelian" => match keys.list_opt("group.weights")? {
            Some(w) => GroupSpec::abelian(w)?,
            None => {
                let dim = keys.usize_or("group.dim", 2)?;
                GroupSpec::euclidean(dim)?
            }
        },
        "heisenberg" => {
            let m = keys.usize_or("group.m", 1)?;
            GroupSpec::heisenberg(m)?
        }
        other => return Err(Error::parse("group.law", format!("unknown law `{other}`"))),
    };
    let default_norm = match law.as_str() {
        "heisenberg" => "koranyi",
        _ if group.weights().iter().all(|w| *w == 1.0) => "euclidean",
        _ => "aniso-max",
    };
    let kind = match keys.str_or("norm.kind", default_norm)?.as_str() {
        "euclidean" => NormKind::Euclidean,
        "aniso-max" => NormKind::AnisoMax,
        "koranyi" => NormKind::Koranyi,
        other => return Err(Error::parse("norm.kind", format!("unknown norm `{other}`"))),
    };
    Geometry::new(group, kind).map_err(|e| match e {
        Error::IncompatibleNorm(reason) => Error::InadmissibleParams(reason),
        other => other,
    })
}

fn parse_domain(keys: &mut Keys, geometry: &Geometry) -> Result<DomainSpec> {
    let resolution = keys.usize_or("domain.resolution", DEFAULT_RESOLUTION)?;
    if resolution < 2 {
        return Err(Error::parse("domain.resolution", "must be at least 2"));
    }
    let dim = geometry.dim();
    match keys.str_or("domain.kind", "ball")?.as_str() {
        "ball" => DomainSpec::ball(keys.f64_or("domain.radius", 1.0)?, resolution),
        "annulus" => {
            let inner = keys.f64_req("domain.inner")?;
            let outer = keys.f64_req("domain.outer")?;
            DomainSpec::annulus(inner, outer, resolution)
        }
        "box" => {
            let lo = keys.list_req("domain.lo")?;
            let hi = keys.list_req("domain.hi")?;
            if lo.len() != dim || hi.len() != dim {
                return Err(Error::parse("domain.lo", format!("box corners need {dim} coordinates")));
            }
            DomainSpec::boxed(lo, hi, resolution)
        }
        other => Err(Error::parse("domain.kind", format!("unknown domain `{other}`"))),
    }
}

fn parse_verify(keys: &mut Keys, geometry: &Geometry, domain: &DomainSpec) -> Result<VerifyTask> {
    let q_dim = geometry.homogeneous_dimension();
    let name = keys
        .str_opt("verify.inequality")?
        .ok_or_else(|| Error::parse("verify.inequality", "required"))?;
    let s = keys.f64_req("verify.s")?;
    let p = keys.f64_req("verify.p")?;
    let alpha = keys.f64_or("verify.alpha", 2.0)?;
    let a = keys.f64_or("verify.a", 1.0)?;
    let tau = match keys.f64_opt("verify.tau")? {
        Some(t) => t,
        None => {
            let t = match name.as_str() {
                "gn" => gn_balance_tau(q_dim, s, p, alpha, a)?,
                "sobolev" => sobolev_exponent(q_dim, s, p)?,
                "hardy" => p,
                _ => return Err(Error::parse("verify.tau", "required")),
            };
            keys.record("verify.tau", json!(t));
            t
        }
    };
    let mut params = InequalityParams::new(s, p, alpha, tau, a)?.with_weights(
        keys.f64_or("verify.beta1", 0.0)?,
        keys.f64_or("verify.beta2", 0.0)?,
        keys.f64_or("verify.mu", 0.0)?,
        keys.f64_or("verify.gamma", 0.0)?,
    );
    if let Some(sigma) = keys.f64_opt("verify.sigma")? {
        params = params.with_sigma(sigma);
    }
    let inequality = match name.as_str() {
        "gn" => Inequality::Gn,
        "ckn" => Inequality::Ckn,
        "ckn-critical" => Inequality::CknCritical { radius: keys.f64_req("verify.radius")? },
        "hardy" => Inequality::Hardy,
        "sobolev" => Inequality::Sobolev,
        other => return Err(Error::parse("verify.inequality", format!("unknown inequality `{other}`"))),
    };
    if matches!(inequality, Inequality::Ckn | Inequality::CknCritical { .. }) {
        let adm = crate::inequalities::ckn_admissible(&params, q_dim);
        if !adm.admissible {
            return Err(Error::inadmissible(adm.reasons.join("; ")));
        }
    }
    let family = match keys.str_or("verify.family", "gaussian-bumps")?.as_str() {
        "gaussian-bumps" => FamilyKind::GaussianBumps,
        "radial-powers-cutoff" => FamilyKind::RadialPowersCutoff,
        "random-smooth" => FamilyKind::RandomSmooth,
        other => return Err(Error::parse("verify.family", format!("unknown family `{other}`"))),
    };
    let count = keys.usize_or("verify.count", 10)?;
    if count == 0 {
        return Err(Error::parse("verify.count", "must be positive"));
    }
    let DomainKind::Box { lo, hi } = &domain.kind else {
        return Err(Error::parse("domain.kind", "verify needs a box computational domain"));
    };
    let inset: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| DEFAULT_SUPPORT_INSET * (h - l)).collect();
    let slo = match keys.list_opt("verify.support_lo")? {
        Some(v) => v,
        None => {
            let v: Vec<f64> = lo.iter().zip(&inset).map(|(l, d)| l + d).collect();
            keys.record("verify.support_lo", json!(v));
            v
        }
    };
    let shi = match keys.list_opt("verify.support_hi")? {
        Some(v) => v,
        None => {
            let v: Vec<f64> = hi.iter().zip(&inset).map(|(h, d)| h - d).collect();
            keys.record("verify.support_hi", json!(v));
            v
        }
    };
    let support = DomainSpec::boxed(slo, shi, domain.resolution)?;
    let limit = keys.f64_opt("verify.limit")?;
    Ok(VerifyTask { inequality, params, family, count, support, limit })
}

/// Weight exponent used for the single-equation residual check; any value
/// above `Q/(2s)` is admissible and the residual does not depend on it.
pub fn residual_theta(q_dim: f64, s: f64) -> f64 {
    q_dim / (2.0 * s) + 1.0
}

fn parse_psublap(keys: &mut Keys, q_dim: f64) -> Result<PsublapTask> {
    let mode = keys.str_opt("psublap.mode")?.ok_or_else(|| Error::parse("psublap.mode", "required"))?;
    let first = |v: Vec<f64>, key: &str| -> Result<f64> {
        match v.as_slice() {
            [x] => Ok(*x),
            _ => Err(Error::parse(key, "expected a single value in this mode")),
        }
    };
    match mode.as_str() {
        "apply" => {
            let s = first(keys.list_req("psublap.s")?, "psublap.s")?;
            let p = first(keys.list_req("psublap.p")?, "psublap.p")?;
            let extension = keys.f64_or("psublap.extension", DEFAULT_EXTENSION)?;
            SeminormParams::new(s, p)?;
            Ok(PsublapTask::Apply { s, p, extension })
        }
        "residual" => {
            let s = first(keys.list_req("psublap.s")?, "psublap.s")?;
            let p = first(keys.list_opt("psublap.p")?.unwrap_or_else(|| vec![2.0]), "psublap.p")?;
            if p != 2.0 {
                return Err(Error::inadmissible("the residual mode solves the linear case p = 2 only"));
            }
            let extension = keys.f64_or("psublap.extension", DEFAULT_EXTENSION)?;
            let tolerance = keys.f64_or("psublap.residual_tol", DEFAULT_RESIDUAL_TOL)?;
            SeminormParams::new(s, p)?;
            SystemParams::new(vec![s], vec![2.0], vec![2.0], residual_theta(q_dim, s), q_dim)?;
            Ok(PsublapTask::Residual { s, extension, tolerance })
        }
        "lyapunov" | "bound" => {
            let s = keys.list_req("psublap.s")?;
            let p = keys.list_req("psublap.p")?;
            let alpha = keys.list_req("psublap.alpha")?;
            let theta = keys.f64_req("psublap.theta")?;
            let system = SystemParams::new(s, p, alpha, theta, q_dim)?;
            let n = system.len();
            if mode == "lyapunov" {
                let weights = keys.list_opt("psublap.weights")?.unwrap_or_else(|| vec![1.0; n]);
                if weights.len() != n {
                    return Err(Error::parse("psublap.weights", format!("expected {n} values")));
                }
                let rescale = keys.f64_or("psublap.rescale", 2.0)?;
                if !(rescale > 0.0) {
                    return Err(Error::parse("psublap.rescale", "must be positive"));
                }
                Ok(PsublapTask::Lyapunov { system, weights, rescale })
            } else {
                let phi = keys.f64_or("psublap.phi", 1.0)?;
                let lambdas = keys.list_req("psublap.lambdas")?;
                let k = keys.usize_or("psublap.k", 0)?;
                let c = keys.f64_or("psublap.c", 1.0)?;
                Ok(PsublapTask::Bound { system, phi, lambdas, k, c })
            }
        }
        other => Err(Error::parse("psublap.mode", format!("unknown mode `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RIESZ: &str = r#"
task = "riesz"
riesz.s = 0.9
riesz.p = 1.5
"#;

    #[test]
    fn minimal_riesz_config_fills_defaults() {
        let cfg = parse_config(RIESZ).unwrap();
        assert_eq!(cfg.task, Task::Riesz);
        assert_eq!(cfg.domain.resolution, DEFAULT_RESOLUTION);
        assert_eq!(cfg.domain.kind, DomainKind::QuasiBall { radius: 1.0 });
        assert_eq!(cfg.geometry, Geometry::euclidean(2).unwrap());
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.echo["domain.resolution"], json!(100));
        assert_eq!(cfg.echo["norm.kind"], json!("euclidean"));
    }

    #[test]
    fn koranyi_needs_heisenberg() {
        let text = format!("{RIESZ}\nnorm.kind = \"koranyi\"\ngroup.law = \"abelian\"\n");
        assert_eq!(
            parse_config(&text),
            Err(Error::InadmissibleParams("koranyi requires heisenberg".into()))
        );
    }

    #[test]
    fn missing_task_is_reported() {
        assert_eq!(
            parse_config("riesz.s = 0.9\n"),
            Err(Error::Parse { key: "task".into(), reason: "required".into() })
        );
    }

    #[test]
    fn diagnostics_name_the_key() {
        let err = parse_config(&format!("{RIESZ}\ndomain.radius = \"one\"\n")).unwrap_err();
        assert!(matches!(err, Error::Parse { ref key, .. } if key == "domain.radius"));
        let err = parse_config(&format!("{RIESZ}\ndomain.radios = 1.0\n")).unwrap_err();
        assert_eq!(err, Error::parse("domain.radios", "unknown key"));
        assert!(matches!(parse_config("task = [\n"), Err(Error::Parse { .. })));
        let err = parse_config("task = \"riesz\"\nriesz.s = 0.5\nriesz.p = 1.5\n").unwrap_err();
        assert!(matches!(err, Error::NonIntegrableKernel { .. }));
    }

    #[test]
    fn overrides_win() {
        let ov = Overrides { resolution: Some(40), seed: Some(9), ..Default::default() };
        let cfg = parse_config_with(&format!("{RIESZ}\nseed = 3\ndomain.resolution = 10\n"), &ov).unwrap();
        assert_eq!(cfg.domain.resolution, 40);
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn tables_and_dotted_keys_agree() {
        let dotted = parse_config(RIESZ).unwrap();
        let tables = parse_config("task = \"riesz\"\n[riesz]\ns = 0.9\np = 1.5\n").unwrap();
        assert_eq!(dotted, tables);
    }

    #[test]
    fn verify_config_derives_tau_and_support() {
        let text = r#"
task = "verify"
domain.kind = "box"
domain.lo = [-2.0, -2.0]
domain.hi = [2.0, 2.0]
domain.resolution = 20
verify.inequality = "gn"
verify.s = 0.4
verify.p = 2.0
verify.alpha = 2.0
verify.a = 0.5
"#;
        let cfg = parse_config(text).unwrap();
        let TaskParams::Verify(v) = cfg.params else { panic!("not a verify task") };
        assert!((v.params.tau - gn_balance_tau(2.0, 0.4, 2.0, 2.0, 0.5).unwrap()).abs() < 1e-15);
        assert_eq!(v.support.kind, DomainKind::Box { lo: vec![-1.4, -1.4], hi: vec![1.4, 1.4] });
        let ball = text.replace("domain.kind = \"box\"", "domain.kind = \"ball\"");
        assert!(parse_config(&ball).is_err());
    }

    #[test]
    fn psublap_modes() {
        let base = "task = \"psublap\"\npsublap.s = [0.5, 0.5]\npsublap.p = [2.0, 2.0]\npsublap.alpha = [1.0, 1.0]\npsublap.theta = 3.0\n";
        let cfg = parse_config(&format!("{base}psublap.mode = \"lyapunov\"\n")).unwrap();
        assert!(matches!(cfg.params, TaskParams::Psublap(PsublapTask::Lyapunov { .. })));
        let ov = Overrides { mode: Some("bound".into()), ..Default::default() };
        let cfg = parse_config_with(&format!("{base}psublap.lambdas = [1.0, 2.0]\n"), &ov).unwrap();
        assert!(matches!(cfg.params, TaskParams::Psublap(PsublapTask::Bound { .. })));
        let bad = base.replace("[1.0, 1.0]", "[1.0, 0.5]");
        assert!(parse_config(&format!("{bad}psublap.mode = \"lyapunov\"\n")).is_err());
    }
}
