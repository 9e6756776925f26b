//! Parameter admissibility and ratio verifiers for the Sobolev,
//! Gagliardo-Nirenberg, Hardy and weighted Caffarelli-Kohn-Nirenberg
//! inequalities, plus empirical best constants over test families.
//!
//! Every inequality here has an unknown constant, so verifiers return the ratio
//! `lhs / rhs`; a family maximum (minimum for Hardy) estimates the best constant.

use rayon::prelude::*;
use serde::Serialize;

use crate::domain::GridFunction;
use crate::error::{Error, Result};
use crate::family::TestFamily;
use crate::seminorms::{
    gagliardo_energy, gagliardo_seminorm, log_weighted_norm, lp_norm, weighted_gagliardo_seminorm,
    weighted_lp_norm, SeminormParams,
};

/// Absolute tolerance of the balance conditions.
pub const BALANCE_TOL: f64 = 1e-12;
/// Relative refinement gap above which a result is reported as unresolved.
pub const UNRESOLVED_GAP: f64 = 0.10;

/// `p* = Qp / (Q - sp)`.
pub fn sobolev_exponent(q_dim: f64, s: f64, p: f64) -> Result<f64> {
    if !(s > 0.0 && p >= 1.0) {
        return Err(Error::inadmissible(format!("need s > 0 and p >= 1, got s = {s}, p = {p}")));
    }
    if !(q_dim > s * p) {
        return Err(Error::inadmissible(format!("need Q > sp, got Q = {q_dim}, sp = {}", s * p)));
    }
    Ok(q_dim * p / (q_dim - s * p))
}

/// The `τ` with `1/τ = a(1/p - s/Q) + (1-a)/α`.
pub fn gn_balance_tau(q_dim: f64, s: f64, p: f64, alpha: f64, a: f64) -> Result<f64> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::inadmissible(format!("need a in (0,1], got {a}")));
    }
    if a == 1.0 {
        return sobolev_exponent(q_dim, s, p);
    }
    let inv = a * (1.0 / p - s / q_dim) + (1.0 - a) / alpha;
    if !(inv > 0.0) {
        return Err(Error::inadmissible(format!("1/tau = {inv} is not positive")));
    }
    Ok(1.0 / inv)
}

/// The symbols `(s, p, α, τ, a, β₁, β₂, μ, γ, σ)` shared by the verifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InequalityParams {
    pub s: f64,
    pub p: f64,
    pub alpha: f64,
    pub tau: f64,
    pub a: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub mu: f64,
    pub gamma: f64,
    /// When absent, `σ` is solved from `γ = aσ + (1-a)μ`.
    pub sigma: Option<f64>,
}

impl InequalityParams {
    pub fn new(s: f64, p: f64, alpha: f64, tau: f64, a: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::inadmissible(format!("s must lie in (0,1), got {s}")));
        }
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::inadmissible(format!("p must exceed 1, got {p}")));
        }
        if !(alpha >= 1.0 && alpha.is_finite()) {
            return Err(Error::inadmissible(format!("alpha must be >= 1, got {alpha}")));
        }
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::inadmissible(format!("tau must be positive, got {tau}")));
        }
        if !(a > 0.0 && a <= 1.0) {
            return Err(Error::inadmissible(format!("a must lie in (0,1], got {a}")));
        }
        Ok(Self {
            s,
            p,
            alpha,
            tau,
            a,
            beta1: 0.0,
            beta2: 0.0,
            mu: 0.0,
            gamma: 0.0,
            sigma: None,
        })
    }

    pub fn with_weights(mut self, beta1: f64, beta2: f64, mu: f64, gamma: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self.mu = mu;
        self.gamma = gamma;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn beta(&self) -> f64 {
        self.beta1 + self.beta2
    }

    /// The given `σ`, or the one solved from `γ = aσ + (1-a)μ`.
    pub fn sigma(&self) -> f64 {
        self.sigma
            .unwrap_or((self.gamma - (1.0 - self.a) * self.mu) / self.a)
    }

    /// `1/τ + γ/Q`, whose sign selects the branch.
    pub fn critical_index(&self, q_dim: f64) -> f64 {
        1.0 / self.tau + self.gamma / q_dim
    }

    fn seminorm(&self) -> Result<SeminormParams> {
        SeminormParams::weighted(self.s, self.p, self.beta1, self.beta2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `1/τ + γ/Q > 0`, any `u ∈ C¹_c(𝔾)`.
    #[serde(rename = "1in")]
    Regular,
    /// `1/τ + γ/Q < 0`, `u` supported away from the identity.
    #[serde(rename = "2in")]
    Punctured,
    /// `1/τ + γ/Q = 0`, logarithmic weight.
    #[serde(rename = "critical")]
    Critical,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Regular => "1in",
            Branch::Punctured => "2in",
            Branch::Critical => "critical",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub branch: Branch,
    pub sigma: f64,
    /// `lhs - rhs` of the balance condition.
    pub balance_defect: f64,
    pub reasons: Vec<String>,
}

/// Checks the balance condition, `β - σ >= 0`, the implication
/// `β - σ <= s ⇒ 1/τ + γ/Q = 1/p + (β-s)/Q`, and selects the branch.
pub fn ckn_admissible(ip: &InequalityParams, q_dim: f64) -> Admissibility {
    let mut reasons = Vec::new();
    let (a, s, beta) = (ip.a, ip.s, ip.beta());
    let index = ip.critical_index(q_dim);
    let balance = a * (1.0 / ip.p + (beta - s) / q_dim) + (1.0 - a) * (1.0 / ip.alpha + ip.mu / q_dim);
    let balance_defect = index - balance;
    if balance_defect.abs() > BALANCE_TOL {
        reasons.push(format!("balance condition fails by {balance_defect:e}"));
    }
    let sigma = ip.sigma();
    if ip.sigma.is_some() {
        let defect = ip.gamma - a * sigma - (1.0 - a) * ip.mu;
        if defect.abs() > BALANCE_TOL {
            reasons.push(format!("gamma = a*sigma + (1-a)*mu fails by {defect:e}"));
        }
    }
    let gap = beta - sigma;
    if gap < -BALANCE_TOL {
        reasons.push("β−σ<0".to_string());
    }
    if gap <= s + BALANCE_TOL {
        let defect = index - (1.0 / ip.p + (beta - s) / q_dim);
        if defect.abs() > BALANCE_TOL {
            reasons.push(format!(
                "β−σ<=s requires 1/τ+γ/Q = 1/p+(β−s)/Q (off by {defect:e})"
            ));
        }
    }
    let branch = if index.abs() <= BALANCE_TOL {
        Branch::Critical
    } else if index > 0.0 {
        Branch::Regular
    } else {
        Branch::Punctured
    };
    if branch == Branch::Critical {
        if gap > s + BALANCE_TOL {
            reasons.push("critical case requires β−σ<=s".to_string());
        }
        if !(ip.tau > 1.0) {
            reasons.push("critical case requires τ>1".to_string());
        }
    }
    Admissibility {
        admissible: reasons.is_empty(),
        branch,
        sigma,
        balance_defect,
        reasons,
    }
}

/// A verifier's output: `ratio = lhs / rhs`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub ratio: f64,
    pub lhs: f64,
    pub rhs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub branch: Option<Branch>,
}

fn nonzero(u: &GridFunction) -> Result<()> {
    if u.is_zero() {
        Err(Error::ZeroFunction)
    } else {
        Ok(())
    }
}

/// `‖u‖_τ / ([u]^a_{s,p} ‖u‖_α^{1-a})` with `τ` on the balance line.
pub fn verify_gn(u: &GridFunction, ip: &InequalityParams) -> Result<Verification> {
    nonzero(u)?;
    let q_dim = u.grid().geometry().homogeneous_dimension();
    let expected = 1.0 / gn_balance_tau(q_dim, ip.s, ip.p, ip.alpha, ip.a)?;
    if (1.0 / ip.tau - expected).abs() > BALANCE_TOL {
        return Err(Error::inadmissible(format!(
            "tau = {} is off the balance line (expected {})",
            ip.tau,
            1.0 / expected
        )));
    }
    let sp = SeminormParams::new(ip.s, ip.p)?;
    let lhs = lp_norm(u, ip.tau);
    let rhs = gagliardo_seminorm(u, &sp).powf(ip.a) * lp_norm(u, ip.alpha).powf(1.0 - ip.a);
    Ok(Verification { ratio: lhs / rhs, lhs, rhs, branch: None })
}

/// `‖u‖_{p*} / [u]_{s,p}`.
pub fn verify_sobolev(u: &GridFunction, s: f64, p: f64) -> Result<Verification> {
    nonzero(u)?;
    let q_dim = u.grid().geometry().homogeneous_dimension();
    let p_star = sobolev_exponent(q_dim, s, p)?;
    let sp = SeminormParams::new(s, p)?;
    let lhs = lp_norm(u, p_star);
    let rhs = gagliardo_seminorm(u, &sp);
    Ok(Verification { ratio: lhs / rhs, lhs, rhs, branch: None })
}

fn ckn_denominator(u: &GridFunction, ip: &InequalityParams) -> Result<f64> {
    let seminorm = weighted_gagliardo_seminorm(u, &ip.seminorm()?);
    let weighted = if ip.a == 1.0 {
        1.0
    } else {
        weighted_lp_norm(u, ip.alpha, ip.mu)?.powf(1.0 - ip.a)
    };
    Ok(seminorm.powf(ip.a) * weighted)
}

/// `‖q^γ u‖_τ / ([u]^a_{s,p,β} ‖q^μ u‖_α^{1-a})` in the non-critical branches.
///
/// In the punctured branch the support of `u` must stay at quasi-distance at
/// least `R_box / 100` from the identity, `R_box` being the inner quasi-radius
/// of the computational domain.
pub fn verify_ckn(u: &GridFunction, ip: &InequalityParams) -> Result<Verification> {
    nonzero(u)?;
    let grid = u.grid();
    let geometry = grid.geometry();
    let adm = ckn_admissible(ip, geometry.homogeneous_dimension());
    if !adm.admissible {
        return Err(Error::inadmissible(adm.reasons.join("; ")));
    }
    match adm.branch {
        Branch::Critical => {
            return Err(Error::inadmissible("critical parameters: use the logarithmic verifier"));
        }
        Branch::Punctured => {
            let min_q = geometry.inner_quasi_radius(grid.domain())? / 100.0;
            let q = grid.quasi_norms();
            if let Some(i) = (0..u.len()).find(|&i| u.values()[i] != 0.0 && q[i] < min_q) {
                return Err(Error::SupportViolation(format!(
                    "u is nonzero at q = {} < {min_q}, too close to the identity",
                    q[i]
                )));
            }
        }
        Branch::Regular => {}
    }
    let lhs = weighted_lp_norm(u, ip.tau, ip.gamma)?;
    let rhs = ckn_denominator(u, ip)?;
    Ok(Verification { ratio: lhs / rhs, lhs, rhs, branch: Some(adm.branch) })
}

/// `‖q^γ / ln(2R/q) · u‖_τ / ([u]^a_{s,p,β} ‖q^μ u‖_α^{1-a})` for `1/τ + γ/Q = 0`.
pub fn verify_ckn_critical(u: &GridFunction, ip: &InequalityParams, radius: f64) -> Result<Verification> {
    nonzero(u)?;
    let q_dim = u.grid().geometry().homogeneous_dimension();
    let adm = ckn_admissible(ip, q_dim);
    if adm.branch != Branch::Critical {
        return Err(Error::inadmissible(format!(
            "critical case needs 1/tau + gamma/Q = 0, got {}",
            ip.critical_index(q_dim)
        )));
    }
    if !adm.admissible {
        return Err(Error::inadmissible(adm.reasons.join("; ")));
    }
    let lhs = log_weighted_norm(u, ip.tau, ip.gamma, radius)?;
    let rhs = ckn_denominator(u, ip)?;
    Ok(Verification { ratio: lhs / rhs, lhs, rhs, branch: Some(Branch::Critical) })
}

/// `[u]^p_{s,p} / ∫ |u|^p q^{-sp}`; the Hardy constant is bounded above by every ratio.
pub fn verify_hardy(u: &GridFunction, s: f64, p: f64) -> Result<Verification> {
    nonzero(u)?;
    let sp = SeminormParams::new(s, p)?;
    let lhs = if p > 8.0 {
        gagliardo_seminorm(u, &sp).powf(p)
    } else {
        gagliardo_energy(u, &sp)
    };
    let rhs = weighted_lp_norm(u, p, -s)?.powf(p);
    Ok(Verification { ratio: lhs / rhs, lhs, rhs, branch: None })
}

/// Which verifier to run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Inequality {
    Gn,
    Ckn,
    /// Critical case with support in the quasi-ball of this radius.
    CknCritical { radius: f64 },
    Hardy,
    Sobolev,
}

impl Inequality {
    pub fn name(self) -> &'static str {
        match self {
            Inequality::Gn => "gn",
            Inequality::Ckn => "ckn",
            Inequality::CknCritical { .. } => "ckn-critical",
            Inequality::Hardy => "hardy",
            Inequality::Sobolev => "sobolev",
        }
    }

    pub fn verify(self, u: &GridFunction, ip: &InequalityParams) -> Result<Verification> {
        match self {
            Inequality::Gn => verify_gn(u, ip),
            Inequality::Ckn => verify_ckn(u, ip),
            Inequality::CknCritical { radius } => verify_ckn_critical(u, ip, radius),
            Inequality::Hardy => verify_hardy(u, ip.s, ip.p),
            Inequality::Sobolev => verify_sobolev(u, ip.s, ip.p),
        }
    }

    /// The Hardy ratio bounds the constant from above, the others from below.
    pub fn takes_minimum(self) -> bool {
        matches!(self, Inequality::Hardy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestConstant {
    /// Maximum ratio over the members (minimum for Hardy).
    pub c_emp: f64,
    pub argmax_id: usize,
    pub ratios: Vec<f64>,
}

/// Runs `inequality` on every member in parallel and takes the extreme ratio.
/// Ties go to the lowest member id.
pub fn best_constant_of(
    members: &[GridFunction],
    inequality: Inequality,
    ip: &InequalityParams,
) -> Result<BestConstant> {
    if members.is_empty() {
        return Err(Error::inadmissible("empty test family"));
    }
    let ratios = members
        .par_iter()
        .enumerate()
        .map(|(id, u)| {
            inequality
                .verify(u, ip)
                .map(|v| v.ratio)
                .map_err(|e| Error::Member { id, source: Box::new(e) })
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (i, r) in ratios.iter().enumerate() {
        let better = if inequality.takes_minimum() { *r < ratios[best] } else { *r > ratios[best] };
        if better {
            best = i;
        }
    }
    Ok(BestConstant { c_emp: ratios[best], argmax_id: best, ratios })
}

/// [`best_constant_of`] over the members of `family` sampled on `grid`.
pub fn estimate_best_constant(
    family: &TestFamily,
    grid: &std::sync::Arc<crate::domain::Grid>,
    inequality: Inequality,
    ip: &InequalityParams,
) -> Result<BestConstant> {
    let members = family.members(grid)?;
    best_constant_of(&members, inequality, ip)
}

/// A value computed at two resolutions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Refinement {
    pub coarse: f64,
    pub fine: f64,
    /// `|fine - coarse| / |fine|`.
    pub gap: f64,
    pub unresolved: bool,
}

impl Refinement {
    pub fn new(coarse: f64, fine: f64) -> Self {
        let gap = if coarse == fine { 0.0 } else { (fine - coarse).abs() / fine.abs() };
        Self { coarse, fine, gap, unresolved: !(gap <= UNRESOLVED_GAP) }
    }
}
