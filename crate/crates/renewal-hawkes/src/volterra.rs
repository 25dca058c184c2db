//! Second-kind Volterra equations on a uniform grid and the kernel tables
//! `k10`, `kT1`, `ky0tau` and the classical mean `m`.
//!
//! All equations share the offspring kernel `eta h` and are discretised with
//! the right-endpoint rule
//! `x(j) = b(j) + delta * sum_{k=1..j} x(j-k) K(k)`.

use crate::error::{Error, Result};
use crate::model::{Grid, ModelSpec, OffspringKernel};

/// Largest grid for which the general-kernel path materialises `ky0tau`
/// solves without an explicit override.
pub const GENERAL_PATH_MAX_N: usize = 400;

/// `x = b + K * x` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraProblem {
    pub forcing: Vec<f64>,
    pub kernel: Vec<f64>,
    pub grid: Grid,
}

impl VolterraProblem {
    /// Checks that both tables have `n + 1` samples.
    pub fn new(forcing: Vec<f64>, kernel: Vec<f64>, grid: Grid) -> Result<Self> {
        if forcing.len() != grid.n + 1 || kernel.len() != grid.n + 1 {
            return Err(Error::Config(format!(
                "forcing and kernel need {} samples, got {} and {}",
                grid.n + 1,
                forcing.len(),
                kernel.len()
            )));
        }
        Ok(Self {
            forcing,
            kernel,
            grid,
        })
    }

    /// Solves the recursion.
    pub fn solve(&self) -> Result<Vec<f64>> {
        solve_second_kind(&self.forcing, &self.kernel, self.grid.delta)
    }
}

fn check_inputs(context: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { context, index }),
        None => Ok(()),
    }
}

/// Right-endpoint recursion for `x(t) = b(t) + int_0^t K(t - s) x(s) ds`.
///
/// Solves for as many nodes as `forcing` has; `kernel` must be at least as long.
pub fn solve_second_kind(forcing: &[f64], kernel: &[f64], delta: f64) -> Result<Vec<f64>> {
    let len = forcing.len();
    if kernel.len() < len {
        return Err(Error::Config(format!(
            "kernel has {} samples, forcing has {len}",
            kernel.len()
        )));
    }
    check_inputs("forcing", forcing)?;
    check_inputs("kernel", &kernel[..len])?;
    let mut x = Vec::with_capacity(len);
    for j in 0..len {
        let conv: f64 = (1..=j).map(|k| x[j - k] * kernel[k]).sum();
        let v = forcing[j] + delta * conv;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "volterra solution",
                index: j,
            });
        }
        x.push(v);
    }
    Ok(x)
}

/// The same recursion for `K(t) = weight * exp(-beta t)`, in linear time.
pub fn solve_exponential_kernel(
    forcing: &[f64],
    weight: f64,
    beta: f64,
    delta: f64,
) -> Result<Vec<f64>> {
    check_inputs("forcing", forcing)?;
    let q = (-beta * delta).exp();
    let mut x = Vec::with_capacity(forcing.len());
    // s = sum_{k=1..j} x(j-k) q^k
    let mut s = 0.0;
    for (j, b) in forcing.iter().enumerate() {
        if j > 0 {
            s = q * (x[j - 1] + s);
        }
        let v = b + delta * weight * s;
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "volterra solution",
                index: j,
            });
        }
        x.push(v);
    }
    Ok(x)
}

/// How the offspring-kernel equations are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverPath {
    /// Linear-time recursion for exponential kernels, quadratic otherwise.
    #[default]
    Auto,
    /// Always the quadratic recursion on sampled kernel values.
    General,
}

/// Solves `x = b + (eta h) * x` for a forcing sampled on the grid.
pub fn solve_offspring(
    model: &ModelSpec,
    grid: &Grid,
    forcing: &[f64],
    path: SolverPath,
) -> Result<Vec<f64>> {
    match (&model.kernel, path) {
        (OffspringKernel::Exponential { beta }, SolverPath::Auto) => {
            solve_exponential_kernel(forcing, model.eta * beta, *beta, grid.delta)
        }
        _ => {
            let kernel = offspring_samples(model, grid);
            solve_second_kind(forcing, &kernel, grid.delta)
        }
    }
}

/// `eta h(j delta)` for `j = 0..=n`.
pub fn offspring_samples(model: &ModelSpec, grid: &Grid) -> Vec<f64> {
    grid.sample(|t| model.eta * model.kernel.density(t))
}

/// `k10`: forcing `eta H`, kernel `eta h`; also serves as `k20` and `k30`.
pub fn k10_table(model: &ModelSpec, grid: &Grid) -> Result<Vec<f64>> {
    k10_table_with(model, grid, SolverPath::Auto)
}

fn k10_table_with(model: &ModelSpec, grid: &Grid, path: SolverPath) -> Result<Vec<f64>> {
    let forcing = grid.sample(|t| model.eta * model.kernel.cdf(t));
    solve_offspring(model, grid, &forcing, path)
}

/// `kT1` for `tau = l delta`, tabulated at `0, delta, ..., (n - l) delta`.
pub fn kt1_table(model: &ModelSpec, grid: &Grid, l: usize) -> Result<Vec<f64>> {
    kt1_table_with(model, grid, l, SolverPath::Auto)
}

fn kt1_table_with(model: &ModelSpec, grid: &Grid, l: usize, path: SolverPath) -> Result<Vec<f64>> {
    if l > grid.n {
        return Err(Error::Config(format!(
            "tau index {l} exceeds grid size {}",
            grid.n
        )));
    }
    let tau = grid.t(l);
    let base = model.baseline.cumulative(tau);
    let forcing: Vec<f64> = (0..=grid.n - l)
        .map(|j| model.baseline.cumulative(tau + grid.t(j)) - base)
        .collect();
    solve_offspring(model, grid, &forcing, path)
}

/// `ky0tau` for `y = r delta`, `tau = l delta`, tabulated at
/// `0, delta, ..., (n - r) delta`. `kt1` is the table for the same `l`.
pub fn ky0tau_table(
    model: &ModelSpec,
    grid: &Grid,
    r: usize,
    l: usize,
    kt1: &[f64],
) -> Result<Vec<f64>> {
    let forcing = ky0tau_forcing(model, grid, r, l, kt1)?;
    let kernel = offspring_samples(model, grid);
    solve_second_kind(&forcing, &kernel, grid.delta)
}

/// Forcing of the `ky0tau` equation.
pub fn ky0tau_forcing(
    model: &ModelSpec,
    grid: &Grid,
    r: usize,
    l: usize,
    kt1: &[f64],
) -> Result<Vec<f64>> {
    if l > r || r > grid.n {
        return Err(Error::Config(format!(
            "ky0tau needs 0 <= l <= r <= n, got l = {l}, r = {r}, n = {}",
            grid.n
        )));
    }
    let a = r - l;
    if kt1.len() <= a {
        return Err(Error::Config(format!(
            "kT1 table too short for y - tau index {a}"
        )));
    }
    let eta = model.eta;
    let d = grid.delta;
    let h = |k: usize| model.kernel.density(grid.t(k));
    let inner: f64 = (1..=a).map(|m| h(a - m) * kt1[m]).sum();
    Ok((0..=grid.n - r)
        .map(|i| {
            let shifted: f64 = (1..=a).map(|m| h(i + a - m) * kt1[m]).sum();
            eta * model.kernel.cdf(grid.t(i)) * kt1[a] - eta * d * (inner - shifted)
        })
        .collect())
}

/// Classical mean `m`: forcing `Lambda`, kernel `eta h`.
pub fn m_classical_table(model: &ModelSpec, grid: &Grid) -> Result<Vec<f64>> {
    m_classical_table_with(model, grid, SolverPath::Auto)
}

fn m_classical_table_with(model: &ModelSpec, grid: &Grid, path: SolverPath) -> Result<Vec<f64>> {
    let forcing = grid.sample(|t| model.baseline.cumulative(t));
    solve_offspring(model, grid, &forcing, path)
}

/// `k10`, every `kT1` table and the classical mean on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTables {
    pub grid: Grid,
    pub path: SolverPath,
    pub k10: Vec<f64>,
    /// `kt1[l][j]` is `kT1` for `tau = l delta` at time `j delta`.
    pub kt1: Vec<Vec<f64>>,
    pub m_classical: Vec<f64>,
}

impl KernelTables {
    /// Builds every table needed by the expectation solvers.
    pub fn build(model: &ModelSpec, grid: &Grid, path: SolverPath) -> Result<Self> {
        let k10 = k10_table_with(model, grid, path)?;
        let kt1 = (0..=grid.n)
            .map(|l| kt1_table_with(model, grid, l, path))
            .collect::<Result<Vec<_>>>()?;
        let m_classical = m_classical_table_with(model, grid, path)?;
        Ok(Self {
            grid: *grid,
            path,
            k10,
            kt1,
            m_classical,
        })
    }

    /// `ky0tau` for `(r, l)`, solved on demand.
    pub fn ky0tau(&self, model: &ModelSpec, r: usize, l: usize) -> Result<Vec<f64>> {
        ky0tau_table(model, &self.grid, r, l, &self.kt1[l])
    }

    /// Grid coefficient `c` with `ky0tau(r, l) = c * k10` for exponential kernels:
    /// `c = kT1_l(a) - delta * sum_{m=1..a} h((a-m) delta) kT1_l(m)`, `a = r - l`.
    pub fn ky0tau_coefficient(&self, model: &ModelSpec, r: usize, l: usize) -> f64 {
        let a = r - l;
        let kt = &self.kt1[l];
        let h = |k: usize| model.kernel.density(self.grid.t(k));
        kt[a] - self.grid.delta * (1..=a).map(|m| h(a - m) * kt[m]).sum::<f64>()
    }
}
