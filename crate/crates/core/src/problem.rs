//! Couplings `f(t, x, m)`, `g(x, m)`, the initial density, truncation caps and the
//! `min(., 1/eps)` regularization.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid, SpaceTimeField, TimeGrid};
use crate::operators::integrate;

/// `(t, x, m) -> value`.
pub type CouplingFn = dyn Fn(f64, &[f64], f64) -> f64 + Send + Sync;

#[derive(Clone)]
enum Law {
    /// `a m^q`.
    Power { a: f64, q: f64 },
    Custom { name: String, f: Arc<CouplingFn> },
}

/// A coupling nondecreasing in `m`, optionally capped from above.
#[derive(Clone)]
pub struct Coupling {
    law: Law,
    cap: Option<f64>,
    lower_bound: f64,
}

impl fmt::Debug for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.law {
            Law::Power { a, q } => write!(f, "Power(a={a}, q={q}")?,
            Law::Custom { name, .. } => write!(f, "Custom({name}")?,
        }
        if let Some(c) = self.cap {
            write!(f, ", cap={c}")?;
        }
        write!(f, ")")
    }
}

impl Coupling {
    pub fn zero() -> Self {
        Self { law: Law::Power { a: 0.0, q: 0.0 }, cap: None, lower_bound: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Self { law: Law::Power { a: c, q: 0.0 }, cap: None, lower_bound: c.min(0.0) }
    }

    /// `a m^q` with `a >= 0`, `q >= 0`.
    pub fn power(a: f64, q: f64) -> Result<Self> {
        if !(a.is_finite() && a >= 0.0 && q.is_finite() && q >= 0.0) {
            return Err(Error::InvalidParameter(format!("power coupling needs a, q >= 0, got a={a}, q={q}")));
        }
        Ok(Self { law: Law::Power { a, q }, cap: None, lower_bound: 0.0 })
    }

    /// Arbitrary callable; `lower_bound` is the declared constant `C` with `f >= -C`
    /// stored as the bound itself (`-C`).
    pub fn custom(name: impl Into<String>, lower_bound: f64, f: impl Fn(f64, &[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { law: Law::Custom { name: name.into(), f: Arc::new(f) }, cap: None, lower_bound }
    }

    pub fn name(&self) -> String {
        match &self.law {
            Law::Power { a, q } => format!("power(a={a}, q={q})"),
            Law::Custom { name, .. } => name.clone(),
        }
    }

    pub fn cap(&self) -> Option<f64> {
        self.cap
    }

    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// `min(self, cap)`; an existing smaller cap is kept.
    pub fn capped(&self, cap: f64) -> Self {
        let cap = self.cap.map_or(cap, |c| c.min(cap));
        Self { cap: Some(cap), ..self.clone() }
    }

    fn raw(&self, t: f64, x: &[f64], m: f64) -> f64 {
        match &self.law {
            Law::Power { a, q } => {
                if *q == 0.0 {
                    *a
                } else {
                    a * m.max(0.0).powf(*q)
                }
            }
            Law::Custom { f, .. } => f(t, x, m),
        }
    }

    pub fn eval(&self, t: f64, x: &[f64], m: f64) -> f64 {
        let v = self.raw(t, x, m);
        match self.cap {
            Some(c) => v.min(c),
            None => v,
        }
    }

    /// Primitive `int_0^m eval(t, x, s) ds` for `m >= 0`.
    pub fn primitive(&self, t: f64, x: &[f64], m: f64) -> f64 {
        let m = m.max(0.0);
        match (&self.law, self.cap) {
            (Law::Power { a, q }, cap) => {
                let full = |s: f64| a * s.powf(q + 1.0) / (q + 1.0);
                match cap {
                    Some(c) if *a > 0.0 && *q > 0.0 => {
                        let knee = (c.max(0.0) / a).powf(1.0 / q);
                        if m <= knee {
                            full(m)
                        } else {
                            full(knee) + c * (m - knee)
                        }
                    }
                    Some(c) => a.min(c) * m,
                    None => full(m),
                }
            }
            (Law::Custom { .. }, _) => adaptive_simpson(&|s| self.eval(t, x, s), 0.0, m, 1e-13, 40),
        }
    }

    /// Sampled check that `m -> eval(t, x, m)` is nondecreasing.
    pub fn audit_monotone(&self, grid: &Grid, horizon: f64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0101);
        for _ in 0..2000 {
            let t = rng.gen_range(0.0..=horizon);
            let x = grid.point(rng.gen_range(0..grid.len()));
            let x = &x[..grid.dim()];
            let a = 10f64.powf(rng.gen_range(-4.0..3.0));
            let b = a * (1.0 + 10f64.powf(rng.gen_range(-6.0..0.0)));
            let (fa, fb) = (self.eval(t, x, a), self.eval(t, x, b));
            if !(fb >= fa - 1e-14 * fa.abs()) {
                return Err(Error::MonotonicityViolation { name: self.name(), m_lo: a, m_hi: b, lower: fa, upper: fb });
            }
        }
        Ok(())
    }

    /// Sampled check of `eval >= lower_bound`.
    pub fn audit_lower_bound(&self, grid: &Grid, horizon: f64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0102);
        for _ in 0..2000 {
            let t = rng.gen_range(0.0..=horizon);
            let x = grid.point(rng.gen_range(0..grid.len()));
            let m = 10f64.powf(rng.gen_range(-4.0..3.0));
            let v = self.eval(t, &x[..grid.dim()], m);
            if !(v >= self.lower_bound - 1e-14) {
                return Err(Error::InvalidParameter(format!(
                    "coupling `{}` value {v} at m = {m} is below its declared bound {}",
                    self.name(),
                    self.lower_bound
                )));
            }
        }
        Ok(())
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, depth)
}

/// Generators for `m0`, normalized to unit mass by the discrete quadrature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialDensity {
    Uniform,
    /// `1 + amplitude * mean_i cos(k (x_i - phase))` with `k` the lowest nonzero wave number
    /// of the boundary kind: `2 pi / side` on the torus, `pi / side` on a Neumann box.
    Bump { amplitude: f64, phase: f64 },
}

pub fn sample_m0(kind: &InitialDensity, grid: &Grid) -> Result<Vec<f64>> {
    let raw = match *kind {
        InitialDensity::Uniform => vec![1.0; grid.len()],
        InitialDensity::Bump { amplitude, phase } => {
            if !(amplitude.is_finite() && (0.0..1.0).contains(&amplitude)) {
                return Err(Error::InvalidParameter(format!(
                    "bump amplitude must lie in [0, 1) to keep the density above a positive floor, got {amplitude}"
                )));
            }
            let k = match grid.boundary() {
                Boundary::Periodic => 2.0 * std::f64::consts::PI / grid.side(),
                Boundary::Neumann => std::f64::consts::PI / grid.side(),
            };
            let d = grid.dim() as f64;
            grid.sample(|x| 1.0 + amplitude * x.iter().map(|xi| (k * (xi - phase)).cos()).sum::<f64>() / d)
        }
    };
    normalize(raw, grid)
}

fn normalize(mut m0: Vec<f64>, grid: &Grid) -> Result<Vec<f64>> {
    grid.check_scalar(&m0)?;
    if let Some(bad) = m0.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::NonPositiveDensity(*bad));
    }
    let mass = integrate(&m0, grid);
    m0.iter_mut().for_each(|v| *v /= mass);
    Ok(m0)
}

/// Couplings and initial density of one scenario. Immutable after construction.
#[derive(Clone, Debug)]
pub struct ProblemData {
    grid: Grid,
    f: Coupling,
    g: Coupling,
    m0: Vec<f64>,
}

impl ProblemData {
    /// Audits monotonicity and declared lower bounds of both couplings (on `t in [0, 10]`),
    /// and rescales `m0` to unit mass.
    pub fn new(grid: Grid, f: Coupling, g: Coupling, m0: Vec<f64>) -> Result<Self> {
        for c in [&f, &g] {
            c.audit_monotone(&grid, 10.0)?;
            c.audit_lower_bound(&grid, 10.0)?;
        }
        let m0 = normalize(m0, &grid)?;
        Ok(Self { grid, f, g, m0 })
    }

    pub fn from_kind(grid: Grid, f: Coupling, g: Coupling, m0: &InitialDensity) -> Result<Self> {
        let m0 = sample_m0(m0, &grid)?;
        Self::new(grid, f, g, m0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn f(&self) -> &Coupling {
        &self.f
    }

    pub fn g(&self) -> &Coupling {
        &self.g
    }

    pub fn m0(&self) -> &[f64] {
        &self.m0
    }

    pub fn m0_sup(&self) -> f64 {
        self.m0.iter().fold(0.0_f64, |a, v| a.max(*v))
    }

    pub fn m0_inf(&self) -> f64 {
        self.m0.iter().fold(f64::INFINITY, |a, v| a.min(*v))
    }

    /// `f_eps = min(f, 1/eps)`, `g_eps = min(g, 1/eps)`.
    pub fn regularize(&self, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { f: self.f.capped(1.0 / eps), g: self.g.capped(1.0 / eps), ..self.clone() })
    }

    /// `f_L(t, x) = sup_{m in [0, L]} f(t, x, m)` on the lattice and `g_L(x)` likewise.
    /// For monotone couplings the supremum is attained at `L`.
    pub fn coupling_cap(&self, time: &TimeGrid, level: f64) -> Result<(SpaceTimeField, Vec<f64>)> {
        coupling_cap(&self.f, &self.g, &self.grid, time, level)
    }
}

pub fn coupling_cap(f: &Coupling, g: &Coupling, grid: &Grid, time: &TimeGrid, level: f64) -> Result<(SpaceTimeField, Vec<f64>)> {
    if !(level.is_finite() && level > 0.0) {
        return Err(Error::InvalidParameter(format!("cap level must be positive, got {level}")));
    }
    f.audit_monotone(grid, time.horizon())?;
    g.audit_monotone(grid, time.horizon())?;
    let mut f_l = SpaceTimeField::scalar(*grid, *time);
    for k in 0..=time.steps() {
        let t = time.t(k);
        let slice = grid.sample(|x| f.eval(t, x, level));
        f_l.set(k, &slice);
    }
    let g_l = grid.sample(|x| g.eval(time.horizon(), x, level));
    Ok((f_l, g_l))
}
