//! Congestion Hamiltonians `H(t, x, m, p) = h(t, x, m) |p|^r`, their derivatives, the
//! Legendre duals `L` and `L~(m, w) = m L(m, w / m)`, the bounded-slope regularization
//! `H_eps`, and sampling checks of the structural hypotheses.
//!
//! The canonical member is `|p|^r / (r m^alpha)`, i.e. `h = m^-alpha / r`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// `(t, x, m) -> (h, dh/dm)`.
pub type CoefficientFn = dyn Fn(f64, &[f64], f64) -> (f64, f64) + Send + Sync;

/// Density coefficient `h(t, x, m)` of a non-canonical Hamiltonian, with its `m`-derivative.
#[derive(Clone)]
pub struct Congestion {
    name: String,
    coef: Arc<CoefficientFn>,
}

impl Congestion {
    pub fn new(name: impl Into<String>, coef: impl Fn(f64, &[f64], f64) -> (f64, f64) + Send + Sync + 'static) -> Self {
        Self { name: name.into(), coef: Arc::new(coef) }
    }

    /// `h(m) = c (1 + m)^-beta`: bounded congestion that saturates as `m -> 0`.
    pub fn saturating(c: f64, beta: f64) -> Self {
        Self::new(format!("saturating(c={c}, beta={beta})"), move |_, _, m| {
            let base = (1.0 + m).powf(-beta);
            (c * base, -beta * c * base / (1.0 + m))
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for Congestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Congestion({})", self.name)
    }
}

#[derive(Clone, Debug)]
pub enum Family {
    CanonicalPower { alpha: f64 },
    General(Congestion),
}

#[derive(Clone, Debug)]
pub struct HamiltonianSpec {
    r: f64,
    family: Family,
    lambda: f64,
    envelope_c: f64,
    eps: f64,
}

/// `kappa_eps(m) = min(max(m, eps), 1 / eps)`.
pub fn kappa_eps(eps: f64, m: f64) -> f64 {
    m.max(eps).min(1.0 / eps)
}

/// Pointwise quantities the solvers need at one node, with `grad_p H = grad_coeff * p`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Local {
    pub value: f64,
    pub grad_coeff: f64,
}

fn norm(p: &[f64]) -> f64 {
    p.iter().map(|v| v * v).sum::<f64>().sqrt()
}

impl HamiltonianSpec {
    /// `|p|^r / (r m^alpha)`; satisfies the envelope bounds with `lambda = alpha`, `C = r`.
    pub fn canonical(r: f64, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        Self::validate_r(r)?;
        Ok(Self { r, family: Family::CanonicalPower { alpha }, lambda: alpha, envelope_c: r, eps: 0.0 })
    }

    /// `h(t, x, m) |p|^r` with caller-declared envelope exponent `lambda` and constant `c`.
    pub fn general(r: f64, congestion: Congestion, lambda: f64, c: f64) -> Result<Self> {
        Self::validate_r(r)?;
        if !(lambda >= 0.0 && c > 0.0) {
            return Err(Error::InvalidParameter(format!("need lambda >= 0 and C > 0, got {lambda}, {c}")));
        }
        Ok(Self { r, family: Family::General(congestion), lambda, envelope_c: c, eps: 0.0 })
    }

    fn validate_r(r: f64) -> Result<()> {
        if !(r.is_finite() && r > 1.0) {
            return Err(Error::InvalidParameter(format!("growth exponent must exceed 1, got {r}")));
        }
        Ok(())
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be >= 0, got {eps}")));
        }
        self.eps = eps;
        Ok(self)
    }

    pub fn without_regularization(&self) -> Self {
        Self { eps: 0.0, ..self.clone() }
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Conjugate exponent `r' = r / (r - 1)`.
    pub fn r_conj(&self) -> f64 {
        self.r / (self.r - 1.0)
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.family {
            Family::CanonicalPower { alpha } => Some(alpha),
            Family::General(_) => None,
        }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn envelope_c(&self) -> f64 {
        self.envelope_c
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `(h, dh/dm)` at a positive density.
    fn coefficient(&self, t: f64, x: &[f64], m: f64) -> (f64, f64) {
        match &self.family {
            Family::CanonicalPower { alpha } => {
                let h = m.powf(-alpha) / self.r;
                (h, -alpha * h / m)
            }
            Family::General(c) => (c.coef)(t, x, m),
        }
    }

    fn density(&self, m: f64) -> Result<f64> {
        if m > 0.0 && m.is_finite() {
            Ok(m)
        } else if self.eps > 0.0 && !m.is_nan() {
            Ok(kappa_eps(self.eps, m))
        } else {
            Err(Error::NonPositiveDensity(m))
        }
    }

    /// `|p|^(r-2)`, with the limit convention `0` at `p = 0` (it always multiplies `p`).
    fn pow_rm2(&self, s: f64) -> f64 {
        if s == 0.0 {
            if self.r == 2.0 {
                1.0
            } else {
                0.0
            }
        } else {
            s.powf(self.r - 2.0)
        }
    }

    /// Unregularized value and gradient coefficient at `|p| = s`.
    fn raw_local(&self, t: f64, x: &[f64], m: f64, s: f64) -> Local {
        let (h, _) = self.coefficient(t, x, m);
        Local { value: h * s.powf(self.r), grad_coeff: self.r * h * self.pow_rm2(s) }
    }

    /// Value and gradient coefficient of the Hamiltonian the solvers use: `H_eps` when
    /// `eps > 0`, otherwise `H` itself.
    pub(crate) fn solver_local(&self, t: f64, x: &[f64], m: f64, s: f64) -> Result<Local> {
        if self.eps > 0.0 {
            Ok(self.regularized_local(t, x, m, s))
        } else {
            let m = self.density(m)?;
            Ok(self.raw_local(t, x, m, s))
        }
    }

    fn regularized_local(&self, t: f64, x: &[f64], m: f64, s: f64) -> Local {
        let eps = self.eps;
        let raw = self.raw_local(t, x, kappa_eps(eps, m), s);
        let ha = raw.value.powf((self.r - 1.0) / self.r);
        let denom = 1.0 + eps * ha;
        Local { value: raw.value / denom, grad_coeff: raw.grad_coeff * (1.0 + eps * ha / self.r) / (denom * denom) }
    }

    /// `m dH/dm` at `|p| = s` (unregularized) and its gradient coefficient; the extra
    /// source of the control system.
    pub(crate) fn control_local(&self, t: f64, x: &[f64], m: f64, s: f64) -> Result<Local> {
        let m = self.density(m)?;
        let (_, dh) = self.coefficient(t, x, m);
        Ok(Local { value: m * dh * s.powf(self.r), grad_coeff: self.r * m * dh * self.pow_rm2(s) })
    }

    pub fn eval_h(&self, t: f64, x: &[f64], m: f64, p: &[f64]) -> Result<f64> {
        let m = self.density(m)?;
        Ok(self.raw_local(t, x, m, norm(p)).value)
    }

    pub fn grad_p_h(&self, t: f64, x: &[f64], m: f64, p: &[f64]) -> Result<Vec<f64>> {
        let m = self.density(m)?;
        let c = self.raw_local(t, x, m, norm(p)).grad_coeff;
        Ok(p.iter().map(|v| c * v).collect())
    }

    pub fn dm_h(&self, t: f64, x: &[f64], m: f64, p: &[f64]) -> Result<f64> {
        let m = self.density(m)?;
        let (_, dh) = self.coefficient(t, x, m);
        Ok(dh * norm(p).powf(self.r))
    }

    pub fn dm_grad_p_h(&self, t: f64, x: &[f64], m: f64, p: &[f64]) -> Result<Vec<f64>> {
        let m = self.density(m)?;
        let (_, dh) = self.coefficient(t, x, m);
        let c = self.r * dh * self.pow_rm2(norm(p));
        Ok(p.iter().map(|v| c * v).collect())
    }

    /// Row-major `d x d` Hessian in `p`. Singular at `p = 0` when `r < 2`.
    pub fn hess_p_h(&self, t: f64, x: &[f64], m: f64, p: &[f64]) -> Result<Vec<f64>> {
        let m = self.density(m)?;
        let (h, _) = self.coefficient(t, x, m);
        let d = p.len();
        let s = norm(p);
        let r = self.r;
        if s == 0.0 {
            if r < 2.0 {
                return Err(Error::SingularHessian { r });
            }
            let diag = if r == 2.0 { 2.0 * h } else { 0.0 };
            let mut out = vec![0.0; d * d];
            for i in 0..d {
                out[i * d + i] = diag;
            }
            return Ok(out);
        }
        let a = r * h * s.powf(r - 2.0);
        let b = r * h * (r - 2.0) * s.powf(r - 4.0);
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                out[i * d + j] = b * p[i] * p[j] + if i == j { a } else { 0.0 };
            }
        }
        Ok(out)
    }

    /// `H_eps = H(kappa(m), p) / (1 + eps H(kappa(m), p)^((r-1)/r))`.
    pub fn eval_h_eps(&self, t: f64, x: &[f64], m: f64, p: &[f64]) -> Result<f64> {
        self.require_eps()?;
        Ok(self.regularized_local(t, x, m, norm(p)).value)
    }

    pub fn grad_p_h_eps(&self, t: f64, x: &[f64], m: f64, p: &[f64]) -> Result<Vec<f64>> {
        self.require_eps()?;
        let c = self.regularized_local(t, x, m, norm(p)).grad_coeff;
        Ok(p.iter().map(|v| c * v).collect())
    }

    fn require_eps(&self) -> Result<()> {
        if self.eps > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidParameter("regularized Hamiltonian needs eps > 0".into()))
        }
    }

    /// Radial conjugate: `sup_s s*|v| - psi(s)` where `psi(s) = H(m, s e)`.
    /// Returns `(L, s*)` with `s*` the modulus of the optimal momentum.
    fn radial_conjugate(&self, t: f64, x: &[f64], m: f64, speed: f64) -> (f64, f64) {
        if speed == 0.0 {
            return (0.0, 0.0);
        }
        let psi = |s: f64| self.raw_local(t, x, m, s).value;
        let dpsi = |s: f64| self.raw_local(t, x, m, s).grad_coeff * s;
        let mut hi = 1.0;
        for _ in 0..400 {
            if dpsi(hi) >= speed {
                break;
            }
            hi *= 2.0;
        }
        let phi = |s: f64| s * speed - psi(s);
        // golden-section on the concave objective
        let g = 0.5 * (5.0_f64.sqrt() - 1.0);
        let (mut a, mut b) = (0.0, hi);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (phi(c), phi(d));
        for _ in 0..200 {
            if (b - a) <= 1e-10 * hi {
                break;
            }
            if fc > fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = phi(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = phi(d);
            }
        }
        // Newton polish of psi'(s) = |v|, kept inside the bracket
        let mut s = 0.5 * (a + b);
        let (h, _) = self.coefficient(t, x, m);
        for _ in 0..50 {
            let f = dpsi(s) - speed;
            let fp = self.r * (self.r - 1.0) * h * s.powf(self.r - 2.0);
            if !(fp.is_finite() && fp > 0.0) {
                break;
            }
            let next = s - f / fp;
            if !(next > 0.0 && next <= hi) {
                break;
            }
            let done = (next - s).abs() <= 1e-15 * s;
            s = next;
            if done {
                break;
            }
        }
        (phi(s), s)
    }

    /// `L(m, v) = sup_p p.v - H(m, -p)`.
    pub fn lagrangian(&self, t: f64, x: &[f64], m: f64, v: &[f64]) -> Result<f64> {
        if !(m > 0.0) {
            return Err(Error::NonPositiveDensity(m));
        }
        let speed = norm(v);
        match self.family {
            Family::CanonicalPower { alpha } => {
                let rc = self.r_conj();
                Ok(m.powf(alpha / (self.r - 1.0)) * speed.powf(rc) / rc)
            }
            Family::General(_) => Ok(self.radial_conjugate(t, x, m, speed).0),
        }
    }

    /// `L~(m, w) = m L(m, w / m)`.
    pub fn tilde_l(&self, t: f64, x: &[f64], m: f64, w: &[f64]) -> Result<f64> {
        if !(m > 0.0) {
            return Err(Error::NonPositiveDensity(m));
        }
        match self.family {
            Family::CanonicalPower { alpha } => {
                let rc = self.r_conj();
                Ok(m.powf((alpha - 1.0) / (self.r - 1.0)) * norm(w).powf(rc) / rc)
            }
            Family::General(_) => {
                let v: Vec<f64> = w.iter().map(|wi| wi / m).collect();
                Ok(m * self.lagrangian(t, x, m, &v)?)
            }
        }
    }

    /// `grad_w L~(m, w)`; equals `-p` where `-w = m grad_p H(m, p)`.
    pub fn grad_w_tilde_l(&self, t: f64, x: &[f64], m: f64, w: &[f64]) -> Result<Vec<f64>> {
        if !(m > 0.0) {
            return Err(Error::NonPositiveDensity(m));
        }
        let speed = norm(w);
        if speed == 0.0 {
            return Ok(vec![0.0; w.len()]);
        }
        let scale = match self.family {
            Family::CanonicalPower { alpha } => {
                m.powf((alpha - 1.0) / (self.r - 1.0)) * speed.powf(self.r_conj() - 2.0)
            }
            Family::General(_) => self.radial_conjugate(t, x, m, speed / m).1 / speed,
        };
        Ok(w.iter().map(|wi| scale * wi).collect())
    }

    /// `d/dm L~(m, w)`. For the general family this uses `-d_m L~ = H + m d_m H` at the
    /// conjugate momentum.
    pub fn dm_tilde_l(&self, t: f64, x: &[f64], m: f64, w: &[f64]) -> Result<f64> {
        if !(m > 0.0) {
            return Err(Error::NonPositiveDensity(m));
        }
        match self.family {
            Family::CanonicalPower { alpha } => {
                let rc = self.r_conj();
                let a = (alpha - 1.0) / (self.r - 1.0);
                Ok(a * m.powf(a - 1.0) * norm(w).powf(rc) / rc)
            }
            Family::General(_) => {
                let s = self.radial_conjugate(t, x, m, norm(w) / m).1;
                let (h, dh) = self.coefficient(t, x, m);
                Ok(-(h + m * dh) * s.powf(self.r))
            }
        }
    }

    /// `(m1 grad H(m1,p1) - m0 grad H(m0,p0)).(p1 - p0) - (H(m1,p1) - H(m0,p0))(m1 - m0)`.
    pub fn monotonicity_integrand(&self, t: f64, x: &[f64], m0: f64, p0: &[f64], m1: f64, p1: &[f64]) -> Result<f64> {
        if !(m0 > 0.0) {
            return Err(Error::NonPositiveDensity(m0));
        }
        if !(m1 > 0.0) {
            return Err(Error::NonPositiveDensity(m1));
        }
        let l0 = self.raw_local(t, x, m0, norm(p0));
        let l1 = self.raw_local(t, x, m1, norm(p1));
        Ok(monotonicity_value(m0, p0, l0, m1, p1, l1))
    }

    /// Sampling-based audit of the structural hypotheses in dimension `dim`.
    pub fn check_hypotheses(&self, dim: usize, sample_budget: usize) -> HypothesisReport {
        hypotheses::check(self, dim, sample_budget)
    }
}

pub(crate) fn monotonicity_value(m0: f64, p0: &[f64], l0: Local, m1: f64, p1: &[f64], l1: Local) -> f64 {
    let mut flux = 0.0;
    for (a, b) in p0.iter().zip(p1) {
        flux += (m1 * l1.grad_coeff * b - m0 * l0.grad_coeff * a) * (b - a);
    }
    flux - (l1.value - l0.value) * (m1 - m0)
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    /// First violating sample, if any.
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub r: f64,
    pub dim: usize,
    pub samples: usize,
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn passed(&self, name: &str) -> bool {
        self.get(name).is_some_and(|c| c.passed)
    }

    /// Growth of `h` in `m` and positivity of the second-variation form both hold.
    pub fn uniqueness_pass(&self) -> bool {
        self.passed(hypotheses::H_GROWTH) && self.passed(hypotheses::UNIQUENESS_FORM)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// One `name: PASS|FAIL` line per check, followed by the witness on failure.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!("{}: {} ({})", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail));
            if let Some(w) = &c.witness {
                out.push_str(&format!(" witness: {w}"));
            }
            out.push('\n');
        }
        out
    }
}

pub mod hypotheses {
    //! Individual hypothesis checks. Names double as keys in the text report.

    use super::*;

    pub const GROWTH_RATE: &str = "growth_rate";
    pub const H_GROWTH: &str = "h_growth";
    pub const UNIQUENESS_FORM: &str = "uniqueness_form";
    pub const H_POSITIVE: &str = "h_positive";
    pub const DH_BOUNDED: &str = "dh_bounded";
    pub const DH_BOUNDED_BELOW: &str = "dh_bounded_below";
    pub const CONVEX_IN_P: &str = "convex_in_p";

    /// Strict `r < (d + 2) / (d + 1)`, compared as `r (d + 1) < d + 2`.
    pub fn growth_rate_holds(r: f64, dim: usize) -> bool {
        r * (dim as f64 + 1.0) < dim as f64 + 2.0
    }

    /// Canonical bound `0 <= alpha < 4 (r - 1) / r`, compared as `alpha r < 4 (r - 1)`.
    pub fn canonical_uniqueness_holds(r: f64, alpha: f64) -> bool {
        alpha >= 0.0 && alpha * r < 4.0 * (r - 1.0)
    }

    pub(crate) struct Sample {
        pub t: f64,
        pub x: Vec<f64>,
        pub m: f64,
        pub p: Vec<f64>,
    }

    impl fmt::Display for Sample {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            write!(f, "t={:.6}, x={:?}, m={:.6e}, p={:?}", self.t, self.x, self.m, self.p)
        }
    }

    pub(crate) fn draw(rng: &mut ChaCha8Rng, dim: usize) -> Sample {
        let t = rng.gen_range(0.0..1.0);
        let x = (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect();
        let m = 10f64.powf(rng.gen_range(-2.0..2.0));
        let p = (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect();
        Sample { t, x, m, p }
    }

    fn record(checks: &mut Vec<HypothesisCheck>, name: &'static str, detail: String, witness: Option<String>) {
        checks.push(HypothesisCheck { name, passed: witness.is_none(), detail, witness });
    }

    pub(crate) fn check(spec: &HamiltonianSpec, dim: usize, budget: usize) -> HypothesisReport {
        let r = spec.r;
        let budget = budget.max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
        let samples: Vec<Sample> = (0..budget).map(|_| draw(&mut rng, dim)).collect();
        let mut checks = Vec::new();

        let bound = (dim as f64 + 2.0) / (dim as f64 + 1.0);
        let ok = growth_rate_holds(r, dim);
        checks.push(HypothesisCheck {
            name: GROWTH_RATE,
            passed: ok,
            detail: format!("r = {r} {} (d+2)/(d+1) = {bound}", if ok { "<" } else { ">=" }),
            witness: None,
        });

        let threshold = 4.0 * (r - 1.0) / r;
        match spec.family {
            Family::CanonicalPower { alpha } => {
                let ok = canonical_uniqueness_holds(r, alpha);
                checks.push(HypothesisCheck {
                    name: H_GROWTH,
                    passed: ok,
                    detail: format!("alpha = {alpha} {} 4(r-1)/r = {threshold}", if ok { "<" } else { ">=" }),
                    witness: None,
                });
            }
            Family::General(_) => {
                let witness = samples.iter().find_map(|s| {
                    let (h, dh) = spec.coefficient(s.t, &s.x, s.m);
                    let q = -dh * s.m;
                    (!(q >= -1e-14 * h.abs() && q < threshold * h)).then(|| s.to_string())
                });
                record(&mut checks, H_GROWTH, format!("0 <= -h_m m < {threshold} h on {budget} samples"), witness);
            }
        }

        let witness = samples.iter().find_map(|s| {
            let sp = norm(&s.p);
            if sp < 1e-8 {
                return None;
            }
            let min_eig = uniqueness_form_min_eigenvalue(spec, s).ok()?;
            (min_eig.0 < -1e-10 * min_eig.1).then(|| format!("{s} (min eigenvalue {:.3e})", min_eig.0))
        });
        record(&mut checks, UNIQUENESS_FORM, format!("second-variation form positive semidefinite on {budget} samples"), witness);

        let (lam, c) = (spec.lambda, spec.envelope_c);
        let env = |m: f64| m.powf(lam) + m.powf(-lam);
        let witness = samples.iter().find_map(|s| {
            let hv = spec.eval_h(s.t, &s.x, s.m, &s.p).ok()?;
            let lower = norm(&s.p).powf(r) / (c * env(s.m));
            (hv < lower * (1.0 - 1e-12)).then(|| s.to_string())
        });
        record(&mut checks, H_POSITIVE, format!("H >= |p|^r / (C (m^l + m^-l)), C = {c}, l = {lam}"), witness);

        let witness = samples.iter().find_map(|s| {
            let g = norm(&spec.grad_p_h(s.t, &s.x, s.m, &s.p).ok()?);
            let upper = c * env(s.m) * (1.0 + norm(&s.p).powf(r - 1.0));
            (g > upper * (1.0 + 1e-12)).then(|| s.to_string())
        });
        record(&mut checks, DH_BOUNDED, format!("|grad_p H| <= C (m^l + m^-l)(1 + |p|^(r-1)), C = {c}"), witness);

        let witness = samples.iter().find_map(|s| {
            let hv = spec.eval_h(s.t, &s.x, s.m, &s.p).ok()?;
            let g = spec.grad_p_h(s.t, &s.x, s.m, &s.p).ok()?;
            let lhs: f64 = g.iter().zip(&s.p).map(|(a, b)| a * b).sum::<f64>() - r * hv;
            (lhs < -c - 1e-12 * hv.abs()).then(|| format!("{s} (value {lhs:.3e})"))
        });
        record(&mut checks, DH_BOUNDED_BELOW, format!("grad_p H . p - r H >= -C, C = {c}"), witness);

        let mut crng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
        let witness = samples.iter().find_map(|s| {
            let q: Vec<f64> = (0..dim).map(|_| crng.gen_range(-3.0..3.0)).collect();
            let th: f64 = crng.gen_range(0.0..1.0);
            let mid: Vec<f64> = s.p.iter().zip(&q).map(|(a, b)| th * a + (1.0 - th) * b).collect();
            let hm = spec.eval_h(s.t, &s.x, s.m, &mid).ok()?;
            let ha = spec.eval_h(s.t, &s.x, s.m, &s.p).ok()?;
            let hb = spec.eval_h(s.t, &s.x, s.m, &q).ok()?;
            let rhs = th * ha + (1.0 - th) * hb;
            (hm > rhs + 1e-12 * (1.0 + rhs.abs())).then(|| s.to_string())
        });
        record(&mut checks, CONVEX_IN_P, "H(m, .) convex on sampled chords".into(), witness);

        HypothesisReport { r, dim, samples: budget, checks }
    }

    /// Smallest eigenvalue of the symmetric matrix of the quadratic form
    /// `-H_m a^2 + m D2H(b, b) + m a b . D_m grad H` in `(a, b)`, and its scale.
    pub(crate) fn uniqueness_form_min_eigenvalue(spec: &HamiltonianSpec, s: &Sample) -> Result<(f64, f64)> {
        let d = s.p.len();
        let dm = spec.dm_h(s.t, &s.x, s.m, &s.p)?;
        let dmg = spec.dm_grad_p_h(s.t, &s.x, s.m, &s.p)?;
        let hess = spec.hess_p_h(s.t, &s.x, s.m, &s.p)?;
        let mut mat = nalgebra::DMatrix::<f64>::zeros(d + 1, d + 1);
        mat[(0, 0)] = -dm;
        for i in 0..d {
            mat[(0, i + 1)] = 0.5 * s.m * dmg[i];
            mat[(i + 1, 0)] = 0.5 * s.m * dmg[i];
            for j in 0..d {
                mat[(i + 1, j + 1)] = s.m * hess[i * d + j];
            }
        }
        let scale = mat.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
        let eig = nalgebra::SymmetricEigen::new(mat).eigenvalues;
        Ok((eig.iter().copied().fold(f64::INFINITY, f64::min), scale))
    }
}
