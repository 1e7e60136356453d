//! Discrete versions of the energy identity, the energy-estimate terms, the uniqueness
//! gap, and the truncations `T_k` and `S_n`.
//!
//! Space-time integrals use the lattice quadrature in space and the trapezoid rule in
//! time, with every integrand evaluated at nodes from `(m_k, G u_k)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::SpaceTimeField;
use crate::mfg::MFGSolution;
use crate::operators::{gradient_into, inner, integrate};

/// Per-node `(|p|, p)` with `p = G u_k`.
fn gradients(u: &[f64], sol: &MFGSolution) -> (Vec<f64>, Vec<f64>) {
    let grid = sol.u.grid();
    let (n, d) = (grid.len(), grid.dim());
    let mut p = vec![0.0; n * d];
    gradient_into(grid, u, &mut p);
    let s = (0..n).map(|i| (0..d).map(|a| p[a * n + i].powi(2)).sum::<f64>().sqrt()).collect();
    (s, p)
}

struct Slice {
    /// `int f(m) m`.
    fm: f64,
    /// `int m (p . grad_p H - H)`.
    bracket: f64,
    /// `int H`.
    h: f64,
}

fn slice_terms(sol: &MFGSolution, k: usize) -> Result<Slice> {
    let grid = *sol.m.grid();
    let t = sol.m.time().t(k);
    let (m, u) = (sol.m.at(k), sol.u.at(k));
    let (s, _) = gradients(u, sol);
    let mut out = Slice { fm: 0.0, bracket: 0.0, h: 0.0 };
    for i in 0..grid.len() {
        let x = grid.point(i);
        let x = &x[..grid.dim()];
        let loc = sol.spec.solver_local(t, x, m[i], s[i])?;
        let w = grid.weight(i);
        out.fm += w * sol.data.f().eval(t, x, m[i]) * m[i];
        out.bracket += w * m[i] * (loc.grad_coeff * s[i] * s[i] - loc.value);
        out.h += w * loc.value;
    }
    Ok(out)
}

fn terminal_term(sol: &MFGSolution) -> f64 {
    let grid = *sol.m.grid();
    let steps = sol.m.time().steps();
    let t = sol.m.time().horizon();
    let m = sol.m.at(steps);
    let g = (0..grid.len()).map(|i| sol.data.g().eval(t, &grid.point(i)[..grid.dim()], m[i])).collect::<Vec<_>>();
    inner(&g, m, &grid)
}

/// `int g(m_T) m_T + int int [f(m) m + (grad u . grad_p H - H) m] - int u(0) m0`.
pub fn energy_identity_residual(sol: &MFGSolution) -> Result<f64> {
    let time = *sol.m.time();
    let mut total = terminal_term(sol);
    for k in 0..=time.steps() {
        let sl = slice_terms(sol, k)?;
        total += time.weight(k) * (sl.fm + sl.bracket);
    }
    Ok(total - inner(sol.u.at(0), sol.data.m0(), sol.m.grid()))
}

/// The four energy-estimate terms and the audit of the main estimate
/// `lhs <= C |m0|_inf (int g_L + int int f_L + C)` with `L = 2 |m0|_inf`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyTerms {
    pub term_fg: f64,
    pub term_gm: f64,
    pub term_bracket: f64,
    pub term_h: f64,
    /// `term_gm + term_fg + term_bracket + |m0|_inf term_h`.
    pub lhs: f64,
    /// `int g_L + int int f_L`.
    pub cap_integral: f64,
    /// Lower-bound constant of `f`, `g` and `H` (`H >= 0`).
    pub lower_constant: f64,
    /// Smallest `C >= lower_constant` making the inequality hold.
    pub smallest_c: f64,
    pub rhs: f64,
    pub audit_pass: bool,
}

impl EnergyTerms {
    pub fn min_term(&self) -> f64 {
        self.term_fg.min(self.term_gm).min(self.term_bracket).min(self.term_h)
    }
}

pub fn energy_terms(sol: &MFGSolution) -> Result<EnergyTerms> {
    let time = *sol.m.time();
    let grid = *sol.m.grid();
    let (mut fg, mut bracket, mut h) = (0.0, 0.0, 0.0);
    for k in 0..=time.steps() {
        let sl = slice_terms(sol, k)?;
        fg += time.weight(k) * sl.fm;
        bracket += time.weight(k) * sl.bracket;
        h += time.weight(k) * sl.h;
    }
    let gm = terminal_term(sol);
    let sup = sol.data.m0_sup();
    let lhs = gm + fg + bracket + sup * h;
    let (f_l, g_l) = sol.data.coupling_cap(&time, 2.0 * sup)?;
    let mut cap_integral = integrate(&g_l, &grid);
    for k in 0..=time.steps() {
        cap_integral += time.weight(k) * integrate(f_l.at(k), &grid);
    }
    let lower_constant = (-sol.data.f().lower_bound()).max(-sol.data.g().lower_bound()).max(0.0);
    let root = if lhs > 0.0 {
        let q = lhs / sup;
        0.5 * (-cap_integral + (cap_integral * cap_integral + 4.0 * q).sqrt())
    } else {
        0.0
    };
    let smallest_c = root.max(lower_constant);
    let rhs = smallest_c * sup * (cap_integral + smallest_c);
    let audit_pass = lhs.is_finite() && lhs <= rhs * (1.0 + 1e-12) + 1e-14;
    Ok(EnergyTerms {
        term_fg: fg,
        term_gm: gm,
        term_bracket: bracket,
        term_h: h,
        lhs,
        cap_integral,
        lower_constant,
        smallest_c,
        rhs,
        audit_pass,
    })
}

/// `int int [f(m1)-f(m2)][m1-m2] + int [g(m1_T)-g(m2_T)][m1_T-m2_T]
///  + int int (m1 grad_p H_1 - m2 grad_p H_2).(grad u1 - grad u2) - (H_1 - H_2)(m1 - m2)`,
/// with the couplings and Hamiltonian of `a`.
pub fn uniqueness_gap(a: &MFGSolution, b: &MFGSolution) -> Result<f64> {
    if !a.m.same_lattice(&b.m) || !a.u.same_lattice(&b.u) || !a.u.same_lattice(&a.m) {
        return Err(Error::GridMismatch("uniqueness gap needs both pairs on one lattice".into()));
    }
    let grid = *a.m.grid();
    let time = *a.m.time();
    let (n, d) = (grid.len(), grid.dim());
    let mut total = 0.0;
    for k in 0..=time.steps() {
        let t = time.t(k);
        let (m1, m2) = (a.m.at(k), b.m.at(k));
        let (s1, p1) = gradients(a.u.at(k), a);
        let (s2, p2) = gradients(b.u.at(k), a);
        let mut slice = 0.0;
        for i in 0..n {
            let x = grid.point(i);
            let x = &x[..d];
            let l1 = a.spec.solver_local(t, x, m1[i], s1[i])?;
            let l2 = a.spec.solver_local(t, x, m2[i], s2[i])?;
            let q1: Vec<f64> = (0..d).map(|c| p1[c * n + i]).collect();
            let q2: Vec<f64> = (0..d).map(|c| p2[c * n + i]).collect();
            let mono = crate::hamiltonian::monotonicity_value(m2[i], &q2, l2, m1[i], &q1, l1);
            let coupling = (a.data.f().eval(t, x, m1[i]) - a.data.f().eval(t, x, m2[i])) * (m1[i] - m2[i]);
            slice += grid.weight(i) * (mono + coupling);
        }
        total += time.weight(k) * slice;
    }
    let steps = time.steps();
    let th = time.horizon();
    let (m1, m2) = (a.m.at(steps), b.m.at(steps));
    for i in 0..n {
        let x = grid.point(i);
        let dg = a.data.g().eval(th, &x[..d], m1[i]) - a.data.g().eval(th, &x[..d], m2[i]);
        total += grid.weight(i) * dg * (m1[i] - m2[i]);
    }
    Ok(total)
}

/// `T_k(s) = min(k, max(s, -k))`.
pub fn truncate_tk(values: &[f64], k: f64) -> Result<Vec<f64>> {
    if !(k > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation level must be positive, got {k}")));
    }
    Ok(values.iter().map(|v| v.clamp(-k, k)).collect())
}

/// Applies `T_k` to every value of a field.
pub fn truncate_field(field: &SpaceTimeField, k: f64) -> Result<SpaceTimeField> {
    let values = truncate_tk(field.values(), k)?;
    SpaceTimeField::from_values(*field.grid(), *field.time(), field.components(), values)
}

/// `S_1`: odd, `r` on `[0, 1]`, `2r - r^2/2 - 1/2` on `[1, 2]`, `3/2` beyond.
pub fn s1(r: f64) -> f64 {
    let a = r.abs();
    let v = if a <= 1.0 {
        a
    } else if a <= 2.0 {
        2.0 * a - 0.5 * a * a - 0.5
    } else {
        1.5
    };
    v.copysign(r)
}

/// `S_1'`.
pub fn s1_prime(r: f64) -> f64 {
    let a = r.abs();
    if a <= 1.0 {
        1.0
    } else if a <= 2.0 {
        2.0 - a
    } else {
        0.0
    }
}

/// `S_n(r) = n S_1(r / n)`.
pub fn aux_sn(values: &[f64], n: f64) -> Result<Vec<f64>> {
    if !(n >= 1.0) {
        return Err(Error::InvalidParameter(format!("S_n needs n >= 1, got {n}")));
    }
    Ok(values.iter().map(|v| n * s1(v / n)).collect())
}
