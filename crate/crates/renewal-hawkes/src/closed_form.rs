//! Closed forms for exponential offspring kernels, piecewise-constant or
//! linear baselines and exponential exogenous laws.
//!
//! Several printed formulas for these cases disagree with each other. Each
//! disputed expression is implemented once per printed variant next to the
//! derived one, so that the grid solver can decide between them
//! (see [`crate::validation`]).

use crate::error::{Error, Result};
use crate::model::{BaselineHazard, ModelSpec, PiecewiseConstant};
use crate::quad;

/// Exponential-kernel model with an optional exponential exogenous rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseExpModel {
    pub beta: f64,
    pub eta: f64,
    pub gamma: Option<f64>,
    pub baseline: BaselineHazard,
}

impl PiecewiseExpModel {
    /// Extracts the parameters; fails for non-exponential kernels.
    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        let beta = model.kernel.beta().ok_or_else(|| {
            Error::Unsupported("closed forms need an exponential offspring kernel".into())
        })?;
        Ok(Self {
            beta,
            eta: model.eta,
            gamma: model.exogenous.gamma(),
            baseline: model.baseline.clone(),
        })
    }

    fn segments(&self) -> Result<&PiecewiseConstant> {
        match &self.baseline {
            BaselineHazard::Piecewise(p) => Ok(p),
            _ => Err(Error::Unsupported(
                "this closed form needs a piecewise-constant baseline".into(),
            )),
        }
    }

    fn gamma(&self) -> Result<f64> {
        self.gamma.ok_or_else(|| {
            Error::Unsupported("this closed form needs an exponential exogenous law".into())
        })
    }

    /// `alpha_i = exp(-Lambda(t_i) + mu_{i+1} t_i)`, so that
    /// `g(t) = alpha_i mu_{i+1} exp(-mu_{i+1} t)` on segment `i` (zero-based).
    pub fn alpha(&self, i: usize) -> Result<f64> {
        let p = self.segments()?;
        if i >= p.rates().len() {
            return Err(Error::Config(format!("segment {i} does not exist")));
        }
        Ok((-p.cumulative_at_starts()[i] + p.rates()[i] * p.starts()[i]).exp())
    }

    fn growth(&self) -> f64 {
        (self.eta - 1.0) * self.beta
    }
}

/// `k10(t) = eta (exp(beta (eta - 1) t) - 1) / (eta - 1)`, equal to `beta t` at `eta = 1`.
pub fn k10_exp(beta: f64, eta: f64, t: f64) -> f64 {
    let e = eta - 1.0;
    if e.abs() < 1e-10 {
        return beta * t;
    }
    let x = beta * e * t;
    if e.abs() < 1e-4 {
        // eta beta t (exp(x) - 1) / x, expanded to avoid cancellation.
        return eta
            * beta
            * t
            * (1.0 + x / 2.0 * (1.0 + x / 3.0 * (1.0 + x / 4.0 * (1.0 + x / 5.0))));
    }
    eta * x.exp_m1() / e
}

/// `int_0^L u^k exp(-c u) du` for `k = 0, 1, 2`.
fn moments(c: f64, len: f64) -> [f64; 3] {
    let x = c * len;
    if x.abs() < 1e-2 {
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let mut term = len.powi(k as i32 + 1);
            let mut sum = 0.0;
            for m in 0..20 {
                sum += term / (m + k + 1) as f64;
                term *= -x / (m + 1) as f64;
            }
            *o = sum;
        }
        return out;
    }
    let e = (-x).exp();
    let i0 = -(-x).exp_m1() / c;
    let i1 = (i0 - len * e) / c;
    let i2 = (2.0 * i1 - len * len * e) / c;
    [i0, i1, i2]
}

/// `int_0^t exp(c (t - s)) [mu(s + tau) + kappa (Lambda(s + tau) - Lambda(tau))] ds`.
fn exp_affine_integral(baseline: &BaselineHazard, c: f64, kappa: f64, tau: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let piece = |s0: f64, s1: f64, p: [f64; 3]| {
        let mom = moments(c, s1 - s0);
        (c * (t - s0)).exp() * (p[0] * mom[0] + p[1] * mom[1] + p[2] * mom[2])
    };
    match baseline {
        BaselineHazard::Linear { slope: a } => {
            piece(0.0, t, [a * tau, a + kappa * a * tau, 0.5 * kappa * a])
        }
        BaselineHazard::Piecewise(pw) => {
            let base = pw.cumulative_at_starts();
            let first = pw.segment(tau);
            let lam_tau = base[first] + pw.rates()[first] * (tau - pw.starts()[first]);
            let mut total = 0.0;
            let mut k = first;
            let mut s0 = 0.0;
            while s0 < t {
                let s1 = pw.starts().get(k + 1).map_or(t, |next| (next - tau).min(t));
                let rate = pw.rates()[k];
                let lam0 = base[k] + rate * (s0 + tau - pw.starts()[k]) - lam_tau;
                total += piece(s0, s1, [rate + kappa * lam0, kappa * rate, 0.0]);
                s0 = s1;
                k += 1;
            }
            total
        }
        BaselineHazard::Tabulated(_) => {
            let lam_tau = baseline.cumulative(tau);
            let f = |s: f64| {
                (c * (t - s)).exp()
                    * (baseline.rate(s + tau) + kappa * (baseline.cumulative(s + tau) - lam_tau))
            };
            quad::simpson(&f, 0.0, t, 1e-12)
        }
    }
}

/// Printed and derived forms of `kT1`, differing in the weight `kappa` of
/// `int_0^s mu(v + tau) dv` inside
/// `int_0^t exp((eta-1) beta (t-s)) [mu(s+tau) + kappa int_0^s mu(v+tau) dv] ds`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kt1Variant {
    /// `kappa = eta beta`.
    Printed,
    /// `kappa = beta`, the solution of `k = Lambda_tau + eta h * k`.
    Derived,
}

impl Kt1Variant {
    pub const ALL: [Self; 2] = [Self::Printed, Self::Derived];

    pub fn name(self) -> &'static str {
        match self {
            Self::Printed => "kappa = eta*beta",
            Self::Derived => "kappa = beta",
        }
    }
}

/// `kT1(t)` for the immigrant process started at age `tau`, per the chosen variant.
pub fn kt1_exp_variant(model: &PiecewiseExpModel, tau: f64, t: f64, variant: Kt1Variant) -> f64 {
    let kappa = match variant {
        Kt1Variant::Printed => model.eta * model.beta,
        Kt1Variant::Derived => model.beta,
    };
    exp_affine_integral(&model.baseline, model.growth(), kappa, tau, t)
}

/// `kT1(t)`: `int_0^t exp((eta-1) beta (t-s)) [mu(s+tau) + beta int_0^s mu(v+tau) dv] ds`.
pub fn kt1_exp(model: &PiecewiseExpModel, tau: f64, t: f64) -> f64 {
    kt1_exp_variant(model, tau, t, Kt1Variant::Derived)
}

/// Classical mean `int_0^t exp((eta-1) beta (t-s)) [mu(s) + beta Lambda(s)] ds`.
pub fn m_exp(model: &PiecewiseExpModel, t: f64) -> f64 {
    exp_affine_integral(&model.baseline, model.growth(), model.beta, 0.0, t)
}

/// Printed and derived forms of `ky0tau` for exponential kernels, all of the
/// shape `k10(t) [kT1(a) + s int_0^a exp(-beta (a - v)) kT1(v) dv]`, `a = y - tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ky0TauVariant {
    /// `s = + eta beta^2`.
    MainText,
    /// `s = - eta beta`.
    Proof,
    /// `s = - beta`, obtained by solving the `ky0tau` equation directly.
    Derived,
}

impl Ky0TauVariant {
    pub const ALL: [Self; 3] = [Self::MainText, Self::Proof, Self::Derived];

    pub fn name(self) -> &'static str {
        match self {
            Self::MainText => "bracket +eta*beta^2",
            Self::Proof => "bracket -eta*beta",
            Self::Derived => "bracket -beta",
        }
    }
}

/// `ky0tau(t)` for `y >= tau`, per the chosen variant.
pub fn ky0tau_exp(
    model: &PiecewiseExpModel,
    y: f64,
    tau: f64,
    t: f64,
    variant: Ky0TauVariant,
) -> f64 {
    let a = y - tau;
    let (beta, eta) = (model.beta, model.eta);
    let integral = quad::simpson(
        &|v| (-beta * (a - v)).exp() * kt1_exp(model, tau, v),
        0.0,
        a,
        1e-12,
    );
    let s = match variant {
        Ky0TauVariant::MainText => eta * beta * beta,
        Ky0TauVariant::Proof => -eta * beta,
        Ky0TauVariant::Derived => -beta,
    };
    k10_exp(beta, eta, t) * (kt1_exp(model, tau, a) + s * integral)
}

/// Bracket combinations of `kT1(a)` and `Lambda_tau(a) = Lambda(y) - Lambda(tau)`
/// in the piecewise-constant specialisation of `ky0tau`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialFactor {
    /// `(1 - beta)^2 kT1 - eta Lambda_tau`.
    OneMinusBetaSquared,
    /// `(1 - beta) kT1 + eta beta Lambda_tau`.
    OneMinusBeta,
    /// `((eta - 1) kT1 + Lambda_tau) / eta`.
    Derived,
}

impl SpecialFactor {
    pub const ALL: [Self; 3] = [Self::OneMinusBetaSquared, Self::OneMinusBeta, Self::Derived];

    pub fn name(self) -> &'static str {
        match self {
            Self::OneMinusBetaSquared => "(1-beta)^2 factor",
            Self::OneMinusBeta => "(1-beta) factor",
            Self::Derived => "(eta-1)/eta factor",
        }
    }
}

/// `ky0tau(t)` for a piecewise-constant baseline, per the chosen factor.
pub fn ky0tau_special(
    model: &PiecewiseExpModel,
    y: f64,
    tau: f64,
    t: f64,
    factor: SpecialFactor,
) -> Result<f64> {
    model.segments()?;
    let (beta, eta) = (model.beta, model.eta);
    let k = kt1_exp(model, tau, y - tau);
    let lam = model.baseline.cumulative(y) - model.baseline.cumulative(tau);
    let bracket = match factor {
        SpecialFactor::OneMinusBetaSquared => (1.0 - beta).powi(2) * k - eta * lam,
        SpecialFactor::OneMinusBeta => (1.0 - beta) * k + eta * beta * lam,
        SpecialFactor::Derived => {
            if eta == 0.0 {
                return Ok(0.0);
            }
            ((eta - 1.0) * k + lam) / eta
        }
    };
    Ok(k10_exp(beta, eta, t) * bracket)
}

/// `(Psi_2(t), Psi_2'(t))` for exponential kernel and law and piecewise baseline,
/// with `Psi_2 = int_0^t [1 + k20(t - y)] F_g(y) dy`.
pub fn psi2_exp(model: &PiecewiseExpModel, t: f64) -> Result<(f64, f64)> {
    let p = model.segments()?;
    let gamma = model.gamma()?;
    let c = model.growth();
    let (beta, eta) = (model.beta, model.eta);
    // On segment i, F_g(y) = alpha_i mu_{i+1} exp(-(gamma + mu_{i+1}) y).
    let mut plain = 0.0;
    let mut weighted = 0.0;
    let mut fg_t = 0.0;
    for (i, (&s0, &mu)) in p.starts().iter().zip(p.rates()).enumerate() {
        if s0 >= t {
            break;
        }
        let s1 = p.starts().get(i + 1).map_or(t, |n| n.min(t));
        let amp = model.alpha(i)? * mu;
        let lam = gamma + mu;
        plain += amp * ((-lam * s0).exp() - (-lam * s1).exp()) / lam;
        let r = c + lam;
        weighted += if r.abs() < 1e-12 {
            amp * (c * t).exp() * (s1 - s0)
        } else {
            amp * (c * t).exp() * ((-r * s0).exp() - (-r * s1).exp()) / r
        };
        fg_t = amp * (-lam * t).exp();
    }
    if t <= 0.0 {
        return Ok((0.0, model.baseline.density(0.0)));
    }
    let conv = if (eta - 1.0).abs() > 1e-6 {
        eta * beta / c * (weighted - plain)
    } else {
        let fg = |y: f64| (-gamma * y).exp() * model.baseline.density(y);
        quad::simpson(&|y| k10_exp(beta, eta, t - y) * fg(y), 0.0, t, 1e-12)
    };
    Ok((plain + conv, fg_t + eta * beta * weighted))
}

/// Segment-wise evaluation of `m_2` from `Psi_2` and `Psi_2'`:
/// `m_2(t) = exp(-(1 - alpha_i)(gamma + mu_{i+1})(t - t_i)) m_2(t_i)
///  + int_{t_i}^t (Psi_2' + (gamma + mu_{i+1}) Psi_2)(s) exp(-(1 - alpha_i)(gamma + mu_{i+1})(t - s)) ds`,
/// with composite Simpson integration at spacing at most `step`.
pub fn m2_piecewise<F>(model: &PiecewiseExpModel, psi2: F, t: f64, step: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let p = model.segments()?;
    let gamma = model.gamma()?;
    if !(t >= 0.0) {
        return Err(Error::Domain {
            what: "t",
            value: t,
        });
    }
    let mut m = 0.0;
    for (i, (&s0, &mu)) in p.starts().iter().zip(p.rates()).enumerate() {
        if s0 >= t {
            break;
        }
        let s1 = p.starts().get(i + 1).map_or(t, |n| n.min(t));
        let rate = (1.0 - model.alpha(i)?) * (gamma + mu);
        let cells = (((s1 - s0) / step).ceil() as usize).max(2);
        let h = (s1 - s0) / cells as f64;
        let samples: Vec<f64> = (0..=cells)
            .map(|k| {
                let s = s0 + k as f64 * h;
                let (psi, dpsi) = psi2(s);
                (dpsi + (gamma + mu) * psi) * (-rate * (s1 - s)).exp()
            })
            .collect();
        m = (-rate * (s1 - s0)).exp() * m + quad::simpson_samples(&samples, h);
    }
    Ok(m)
}

/// 3x3 matrix.
pub type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    c
}

fn mat_vec(a: &Mat3, v: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| (0..3).map(|k| a[i][k] * v[k]).sum())
}

fn mat_add(a: &Mat3, b: &Mat3, sb: f64) -> Mat3 {
    let mut c = *a;
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] += sb * b[i][j];
        }
    }
    c
}

fn norm_inf(a: &Mat3) -> f64 {
    a.iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn mat_inv(a: &Mat3) -> Option<Mat3> {
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
    let adj = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    let det = a[0][0] * adj[0][0] + a[0][1] * adj[1][0] + a[0][2] * adj[2][0];
    let scale = norm_inf(a).powi(3).max(f64::MIN_POSITIVE);
    if !det.is_finite() || det.abs() <= 1e-14 * scale {
        return None;
    }
    Some(adj.map(|r| r.map(|v| v / det)))
}

/// `exp(M)` by scaling and squaring with a truncated Taylor series.
pub fn matrix_exp_3x3(m: &Mat3) -> Result<Mat3> {
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "matrix exponential input",
            index: 0,
        });
    }
    let norm = norm_inf(m);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings);
    let a = m.map(|r| r.map(|v| v * scale));
    let mut result: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut term = result;
    for k in 1..40 {
        term = mat_mul(&term, &a).map(|r| r.map(|v| v / k as f64));
        result = mat_add(&result, &term, 1.0);
        if norm_inf(&term) < 1e-16 * norm_inf(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = mat_mul(&result, &result);
    }
    Ok(result)
}

/// Entry (3, 2) of the `D_i` matrix in the `m_3` ODE system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DEntry {
    /// `-mu_{i+1}^2`.
    Printed,
    /// `-mu_{i+1}^3`, the value produced by differentiating the system.
    Derived,
}

impl DEntry {
    pub const ALL: [Self; 2] = [Self::Printed, Self::Derived];

    pub fn name(self) -> &'static str {
        match self {
            Self::Printed => "D[3,2] = -mu^2",
            Self::Derived => "D[3,2] = -mu^3",
        }
    }
}

/// Matrices `A_i, B_i, C_i, D_i` of the `m_3` system on one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeBlock3 {
    pub a: Mat3,
    pub b: Mat3,
    pub c: Mat3,
    pub d: Mat3,
}

impl OdeBlock3 {
    /// Builds the block for `alpha_i`, `mu_{i+1}` and `gamma`.
    pub fn new(alpha: f64, mu: f64, gamma: f64, entry: DEntry) -> Self {
        let g = gamma;
        let s = g + mu;
        let c1 = g * (1.0 - alpha);
        let c2 = (alpha - 1.0) * g * g + 2.0 * g * mu * alpha;
        let c3 = g.powi(3) + mu.powi(3) * alpha - s.powi(3) * alpha;
        let d32 = match entry {
            DEntry::Printed => -mu * mu,
            DEntry::Derived => -mu.powi(3),
        };
        Self {
            a: [[0.0, 0.0, 0.0], [c1, 0.0, 0.0], [c2, c1, 0.0]],
            b: [[c1, 0.0, 0.0], [c2, c1, 0.0], [c3, c2, c1]],
            c: [[1.0, 1.0, -1.0], [-g, -mu, s], [g * g, mu * mu, -s * s]],
            d: [
                [-g, -mu, s],
                [g * g, mu * mu, -s * s],
                [-g.powi(3), d32, s.powi(3)],
            ],
        }
    }
}

/// Samples of `U_3 = (Psi_3, Psi_3', Psi_3'')` on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct U3Table {
    pub delta: f64,
    pub values: Vec<[f64; 3]>,
}

impl U3Table {
    /// Derivatives by second-order finite differences of tabulated `Psi_3`.
    pub fn from_psi(delta: f64, psi: &[f64]) -> Result<Self> {
        let n = psi.len();
        if n < 5 {
            return Err(Error::Config("U3 table needs at least five samples".into()));
        }
        let d1 = |j: usize| -> f64 {
            if j == 0 {
                (-3.0 * psi[0] + 4.0 * psi[1] - psi[2]) / (2.0 * delta)
            } else if j == n - 1 {
                (3.0 * psi[j] - 4.0 * psi[j - 1] + psi[j - 2]) / (2.0 * delta)
            } else {
                (psi[j + 1] - psi[j - 1]) / (2.0 * delta)
            }
        };
        let d2 = |j: usize| -> f64 {
            let h2 = delta * delta;
            if j == 0 {
                (2.0 * psi[0] - 5.0 * psi[1] + 4.0 * psi[2] - psi[3]) / h2
            } else if j == n - 1 {
                (2.0 * psi[j] - 5.0 * psi[j - 1] + 4.0 * psi[j - 2] - psi[j - 3]) / h2
            } else {
                (psi[j + 1] - 2.0 * psi[j] + psi[j - 1]) / h2
            }
        };
        Ok(Self {
            delta,
            values: (0..n).map(|j| [psi[j], d1(j), d2(j)]).collect(),
        })
    }

    fn index(&self, t: f64, what: &'static str) -> Result<usize> {
        let x = t / self.delta;
        let j = x.round();
        if (x - j).abs() > 1e-7 || j < 0.0 || j as usize >= self.values.len() {
            return Err(Error::Domain { what, value: t });
        }
        Ok(j as usize)
    }
}

/// `M_3(t) = (m_3, m_3', m_3'')` from the segment-wise matrix ODE
/// `M' = K M + U' - D C^{-1} U` with `K = B + D C^{-1} - D C^{-1} A` and
/// `M(0) = (0, Psi'(0), Psi''(0))`. The `U'` term is integrated by parts, so
/// only `U` itself is needed. `t` and the segment starts must be grid nodes.
pub fn m3_matrix_state(
    model: &PiecewiseExpModel,
    u3: &U3Table,
    t: f64,
    entry: DEntry,
) -> Result<[f64; 3]> {
    let p = model.segments()?;
    let gamma = model.gamma()?;
    let jt = u3.index(t, "t")?;
    let u = &u3.values;
    let mut state = [0.0, u[0][1], u[0][2]];
    for (i, (&s0, &mu)) in p.starts().iter().zip(p.rates()).enumerate() {
        if s0 >= t {
            break;
        }
        if (mu - gamma).abs() < 1e-8 {
            return Err(Error::Singular(format!(
                "segment {i}: mu = gamma = {gamma}"
            )));
        }
        let j0 = u3.index(s0, "segment start")?;
        let j1 = match p.starts().get(i + 1) {
            Some(&next) if next < t => u3.index(next, "segment start")?,
            _ => jt,
        };
        let blk = OdeBlock3::new(model.alpha(i)?, mu, gamma, entry);
        let cinv = mat_inv(&blk.c)
            .ok_or_else(|| Error::Singular(format!("segment {i}: C is singular")))?;
        let w = mat_mul(&blk.d, &cinv);
        let k = mat_add(&mat_add(&blk.b, &w, 1.0), &mat_mul(&w, &blk.a), -1.0);
        let kw = mat_add(&k, &w, -1.0);
        let span = u3.delta * (j1 - j0) as f64;
        let e_span = matrix_exp_3x3(&k.map(|r| r.map(|v| v * span)))?;
        let diff = [0, 1, 2].map(|r| state[r] - u[j0][r]);
        let mut next = mat_vec(&e_span, &diff);
        let mut integrand: [Vec<f64>; 3] = [vec![], vec![], vec![]];
        for j in j0..=j1 {
            let lag = u3.delta * (j1 - j) as f64;
            let e = matrix_exp_3x3(&k.map(|r| r.map(|v| v * lag)))?;
            let val = mat_vec(&mat_mul(&e, &kw), &u[j]);
            for r in 0..3 {
                integrand[r].push(val[r]);
            }
        }
        for r in 0..3 {
            next[r] += u[j1][r] + quad::simpson_samples(&integrand[r], u3.delta);
        }
        state = next;
    }
    Ok(state)
}

/// First component of [`m3_matrix_state`].
pub fn m3_matrix(model: &PiecewiseExpModel, u3: &U3Table, t: f64, entry: DEntry) -> Result<f64> {
    Ok(m3_matrix_state(model, u3, t, entry)?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pw(starts: Vec<f64>, rates: Vec<f64>, beta: f64, eta: f64, gamma: f64) -> PiecewiseExpModel {
        PiecewiseExpModel {
            beta,
            eta,
            gamma: Some(gamma),
            baseline: BaselineHazard::piecewise(starts, rates).unwrap(),
        }
    }

    #[test]
    fn k10_special_values() {
        assert_eq!(k10_exp(2.0, 2.0, 0.0), 0.0);
        assert_eq!(k10_exp(2.0, 1.0, 3.0), 6.0);
        assert!((k10_exp(2.0, 2.0, 1.0) - 2.0 * (2.0f64.exp() - 1.0)).abs() < 1e-12);
        let near = k10_exp(2.0, 1.0 + 1e-6, 3.0);
        assert!((near - 6.0).abs() <= 1e-4 * 6.0);
    }

    #[test]
    fn kt1_single_segment_formula() {
        let (mu, beta, eta) = (1.3, 2.0, 0.75);
        let m = pw(vec![0.0], vec![mu], beta, eta, 1.0);
        for &t in &[0.0, 0.4, 1.7] {
            let c = (eta - 1.0) * beta;
            let expected = mu * ((c * t).exp() - 1.0) / c
                + eta
                    * beta
                    * mu
                    * (t / ((1.0 - eta) * beta)
                        - (1.0 - (c * t).exp()) / ((1.0 - eta).powi(2) * beta * beta));
            assert!((kt1_exp_variant(&m, 0.0, t, Kt1Variant::Printed) - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn kt1_matches_quadrature_of_its_integrand() {
        let m = pw(vec![0.0, 0.6, 1.1], vec![1.0, 2.5, 0.5], 2.0, 1.5, 1.0);
        let lin = PiecewiseExpModel {
            baseline: BaselineHazard::linear(2.0).unwrap(),
            ..m.clone()
        };
        for model in [&m, &lin] {
            for &(tau, t) in &[(0.0, 1.5), (0.3, 1.0), (0.7, 0.2), (1.2, 0.9)] {
                let b = &model.baseline;
                let c = model.growth();
                let lam = b.cumulative(tau);
                let f = |s: f64| {
                    (c * (t - s)).exp()
                        * (b.rate(s + tau) + model.beta * (b.cumulative(s + tau) - lam))
                };
                let q = quad::simpson(&f, 0.0, t, 1e-13);
                assert!((kt1_exp(model, tau, t) - q).abs() < 1e-9, "tau {tau} t {t}");
            }
        }
    }

    #[test]
    fn classical_mean_of_linear_hazard() {
        let m = PiecewiseExpModel {
            beta: 2.0,
            eta: 2.0,
            gamma: None,
            baseline: BaselineHazard::linear(2.0).unwrap(),
        };
        // int_0^1 exp(2(1-s)) (2s + 2s^2) ds = 3 e^2 / 2 - 15 / 2 + ... evaluated independently.
        let q = quad::simpson(
            &|s: f64| (2.0 * (1.0 - s)).exp() * (2.0 * s + 2.0 * s * s),
            0.0,
            1.0,
            1e-13,
        );
        assert!((m_exp(&m, 1.0) - q).abs() < 1e-10);
        assert!((m_exp(&m, 1.0) - 3.389056).abs() < 1e-6);
        assert_eq!(m_exp(&m, 0.0), 0.0);
    }

    #[test]
    fn derived_ky0tau_variants_agree() {
        let m = pw(vec![0.0, 0.5], vec![1.0, 2.0], 2.0, 0.5, 1.0);
        for &(y, tau, t) in &[(0.8, 0.2, 0.5), (1.4, 0.6, 1.0), (0.3, 0.1, 0.2)] {
            let a = ky0tau_exp(&m, y, tau, t, Ky0TauVariant::Derived);
            let b = ky0tau_special(&m, y, tau, t, SpecialFactor::Derived).unwrap();
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn matrix_exponential_cases() {
        let z = matrix_exp_3x3(&[[0.0; 3]; 3]).unwrap();
        assert_eq!(z, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
        let d = matrix_exp_3x3(&[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]).unwrap();
        for (i, e) in [1.0f64, 2.0, 3.0].iter().enumerate() {
            assert!((d[i][i] - e.exp()).abs() < 1e-12 * e.exp());
        }
        let n = matrix_exp_3x3(&[[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(n, [[1.0, 1.0, 0.5], [0.0, 1.0, 1.0], [0.0, 0.0, 1.0]]);
        assert!(matrix_exp_3x3(&[[f64::NAN, 0.0, 0.0], [0.0; 3], [0.0; 3]]).is_err());
    }

    #[test]
    fn m3_zero_input_and_singularity() {
        let m = pw(vec![0.0], vec![1.0], 2.0, 0.5, 2.0);
        let u = U3Table {
            delta: 0.01,
            values: vec![[0.0; 3]; 101],
        };
        assert_eq!(m3_matrix(&m, &u, 1.0, DEntry::Derived).unwrap(), 0.0);
        let bad = pw(vec![0.0], vec![2.0], 2.0, 0.5, 2.0);
        assert!(matches!(
            m3_matrix(&bad, &u, 1.0, DEntry::Derived),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn psi2_derivative_is_consistent() {
        let m = pw(vec![0.0, 1.0], vec![1.0, 2.0], 2.0, 0.5, 1.0);
        let h = 1e-5;
        for &t in &[0.3, 0.9, 1.4] {
            let (p0, _) = psi2_exp(&m, t - h).unwrap();
            let (p1, _) = psi2_exp(&m, t + h).unwrap();
            let (_, d) = psi2_exp(&m, t).unwrap();
            assert!(((p1 - p0) / (2.0 * h) - d).abs() < 1e-6);
        }
    }
}
