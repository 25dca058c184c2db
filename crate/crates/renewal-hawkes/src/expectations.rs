//! Forcing terms `Psi_i`, first-renewal densities `n_i` and the master
//! renewal equation `m_i = Psi_i + m_i * n_i` for every process class.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{ExogenousLaw, Grid, ModelSpec, OffspringKernel, ProcessClass};
use crate::quad;
use crate::volterra::{self, KernelTables, SolverPath, GENERAL_PATH_MAX_N};

/// Weight multiplying the classical mean `m(t)` in `Psi_1` and `Psi_3`.
///
/// `Survival` uses `1 - F(t) = P(Y1 > t)`, the probability that no renewal
/// happened by `t`. `Printed` uses `int_t^inf G f`, which also drops paths
/// where the first immigrant comes after `Y1`; it is kept for comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailWeight {
    #[default]
    Survival,
    Printed,
}

/// Forcing term of the R3 process.
///
/// `Printed` is `Psi_3 = Psi_1`: when `Y1 < T1` the immigrant at `T1`, which
/// triggers the renewal, is dropped together with its progeny. `Counted` adds
/// `int_0^t [1 + k10(t - tau)] F(tau) g(tau) dtau` for that immigrant and its
/// cascade, matching the event-level definition of the process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum R3Forcing {
    #[default]
    Printed,
    Counted,
}

impl R3Forcing {
    /// Lowercase name.
    pub fn name(self) -> &'static str {
        match self {
            Self::Printed => "printed",
            Self::Counted => "counted",
        }
    }
}

/// Options for assembling the forcing terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PsiOptions {
    pub tail: TailWeight,
    pub r3: R3Forcing,
    pub path: SolverPath,
    /// Permit the general-kernel path above [`GENERAL_PATH_MAX_N`].
    pub allow_large_n: bool,
}

/// Where an expectation curve comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Grid,
    ClosedForm,
    MonteCarlo,
}

impl Provenance {
    /// Lowercase name.
    pub fn name(self) -> &'static str {
        match self {
            Self::Grid => "grid",
            Self::ClosedForm => "closed-form",
            Self::MonteCarlo => "monte-carlo",
        }
    }
}

/// `Psi_i` and `n_i` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ForcingCurve {
    pub psi: Vec<f64>,
    pub density: Vec<f64>,
    pub class: ProcessClass,
}

/// Mean count `m(j delta)` and mean intensity `E[lambda](j delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationCurve {
    pub grid: Grid,
    pub class: ProcessClass,
    pub m: Vec<f64>,
    pub lambda: Vec<f64>,
    pub provenance: Provenance,
    /// Set when the mean exceeds `1e12` somewhere on the grid.
    pub overflow_warning: bool,
}

impl ExpectationCurve {
    fn from_mean(grid: Grid, class: ProcessClass, m: Vec<f64>, mu0: f64) -> Self {
        let d = grid.delta;
        let lambda = (0..m.len())
            .map(|j| match j {
                0 => mu0,
                1 => m[1] / d,
                _ => (m[j] - m[j - 1]) / d,
            })
            .collect();
        let overflow_warning = m.iter().any(|v| *v > 1e12);
        Self {
            grid,
            class,
            m,
            lambda,
            provenance: Provenance::Grid,
            overflow_warning,
        }
    }

    /// Mean count at `t`, linearly interpolated between nodes.
    pub fn mean_at(&self, t: f64) -> f64 {
        interpolate(&self.m, self.grid.delta, t)
    }
}

pub(crate) fn interpolate(values: &[f64], delta: f64, t: f64) -> f64 {
    let x = (t / delta).max(0.0);
    let i = (x.floor() as usize).min(values.len() - 1);
    if i + 1 >= values.len() {
        return values[values.len() - 1];
    }
    let w = x - i as f64;
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// `sum_{k=1..j} a(j-k) b(k)` for every `j`.
fn convolve_right(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len())
        .map(|j| (1..=j).map(|k| a[j - k] * b[k]).sum())
        .collect()
}

/// `int_0^{j delta} f` at every node, by adaptive quadrature per cell.
fn cumulative_integral<F: Fn(f64) -> f64 + Sync>(grid: &Grid, f: F) -> Vec<f64> {
    let cells: Vec<f64> = (0..grid.n)
        .into_par_iter()
        .map(|j| quad::simpson(&f, grid.t(j), grid.t(j + 1), 1e-13))
        .collect();
    let mut out = Vec::with_capacity(grid.n + 1);
    out.push(0.0);
    for c in cells {
        out.push(out.last().expect("nonempty") + c);
    }
    out
}

fn require_continuous(model: &ModelSpec) -> Result<()> {
    if model.exogenous.is_dirac() {
        return Err(Error::Unsupported(
            "Dirac exogenous law has no density; use dirac_expectation".into(),
        ));
    }
    Ok(())
}

struct Samples {
    f: Vec<f64>,
    big_f: Vec<f64>,
    g: Vec<f64>,
    big_g: Vec<f64>,
    fg: Vec<f64>,
}

impl Samples {
    fn new(model: &ModelSpec, grid: &Grid) -> Self {
        let f = grid.sample(|t| model.exogenous.density(t));
        let big_f = grid.sample(|t| model.exogenous.cdf(t));
        let g = grid.sample(|t| model.baseline.density(t));
        let big_g = grid.sample(|t| model.baseline.cdf(t));
        let fg = big_f
            .iter()
            .zip(&g)
            .map(|(ff, gg)| (1.0 - ff) * gg)
            .collect();
        Self {
            f,
            big_f,
            g,
            big_g,
            fg,
        }
    }
}

/// `Psi_1` (equal to `Psi_3`) and `n_1 = f`.
pub fn psi1_table(
    model: &ModelSpec,
    tables: &KernelTables,
    opts: PsiOptions,
) -> Result<ForcingCurve> {
    require_continuous(model)?;
    let psi = psi1_values(model, tables, opts)?;
    let density = tables.grid.sample(|t| model.exogenous.density(t));
    Ok(ForcingCurve {
        psi,
        density,
        class: ProcessClass::R1,
    })
}

/// `Psi_3 = Psi_1` and `n_3 = G f + F g`.
pub fn psi3_table(
    model: &ModelSpec,
    tables: &KernelTables,
    opts: PsiOptions,
) -> Result<ForcingCurve> {
    require_continuous(model)?;
    let mut psi = psi1_values(model, tables, opts)?;
    if opts.r3 == R3Forcing::Counted {
        let grid = tables.grid;
        let (b, e) = (&model.baseline, &model.exogenous);
        let fg_int = cumulative_integral(&grid, |y| e.cdf(y) * b.density(y));
        let weights = grid.sample(|y| e.cdf(y) * b.density(y));
        let conv = convolve_right(&tables.k10, &weights);
        for (j, v) in psi.iter_mut().enumerate() {
            *v += fg_int[j] + grid.delta * conv[j];
        }
    }
    Ok(ForcingCurve {
        psi,
        density: n3_density(model, &tables.grid),
        class: ProcessClass::R3,
    })
}

/// `n_3(y) = G(y) f(y) + F(y) g(y)` on the grid.
pub fn n3_density(model: &ModelSpec, grid: &Grid) -> Vec<f64> {
    let (b, e) = (&model.baseline, &model.exogenous);
    grid.sample(|y| b.cdf(y) * e.density(y) + e.cdf(y) * b.density(y))
}

/// `n_2(y) = (1 - G(y)) f(y) + (1 - F(y)) g(y)` on the grid.
pub fn n2_density(model: &ModelSpec, grid: &Grid) -> Vec<f64> {
    let (b, e) = (&model.baseline, &model.exogenous);
    grid.sample(|y| (1.0 - b.cdf(y)) * e.density(y) + (1.0 - e.cdf(y)) * b.density(y))
}

fn psi1_values(model: &ModelSpec, tables: &KernelTables, opts: PsiOptions) -> Result<Vec<f64>> {
    let grid = tables.grid;
    let (n, d) = (grid.n, grid.delta);
    let s = Samples::new(model, &grid);
    let (b, e) = (model.baseline.clone(), model.exogenous.clone());

    let gf_int = cumulative_integral(&grid, |y| b.cdf(y) * e.density(y));
    let k10_fg = convolve_right(&tables.k10, &s.fg);
    let k10_g = convolve_right(&tables.k10, &s.g);

    // a(k) = sum_{l=1..k} kT1_l(k-l) g(l)
    let a: Vec<f64> = (0..=n)
        .map(|k| (1..=k).map(|l| tables.kt1[l][k - l] * s.g[l]).sum())
        .collect();
    let term5 = psi1_term5(model, tables, &s, opts)?;

    let tail = match opts.tail {
        TailWeight::Survival => s.big_f.iter().map(|ff| 1.0 - ff).collect::<Vec<_>>(),
        TailWeight::Printed => grid
            .times()
            .par_iter()
            .map(|&t| quad::simpson_to_infinity(&|y| b.cdf(y) * e.density(y), t, 1e-12))
            .collect(),
    };

    let mut psi = vec![0.0; n + 1];
    let mut term4 = 0.0;
    for j in 1..=n {
        term4 += d * d * a[j] * s.f[j];
        psi[j] = gf_int[j] + d * k10_fg[j] - (1.0 - s.big_f[j]) * d * k10_g[j]
            + term4
            + term5[j]
            + tables.m_classical[j] * tail[j];
        if !psi[j].is_finite() {
            return Err(Error::NonFinite {
                context: "Psi_1",
                index: j,
            });
        }
    }
    Ok(psi)
}

/// `delta^2 sum_{k=1..j} sum_{l=1..k} ky0tau(k, l)(j - k) g(l) f(k)`.
fn psi1_term5(
    model: &ModelSpec,
    tables: &KernelTables,
    s: &Samples,
    opts: PsiOptions,
) -> Result<Vec<f64>> {
    let grid = tables.grid;
    let (n, d) = (grid.n, grid.delta);
    if let (OffspringKernel::Exponential { beta }, SolverPath::Auto) = (&model.kernel, tables.path)
    {
        // ky0tau(k, l) = c(k, l) k10 with c from a linear recursion per l.
        let q = (-beta * d).exp();
        let mut bsum = vec![0.0; n + 1];
        for l in 1..=n {
            let kt = &tables.kt1[l];
            let mut conv = 0.0;
            for a in 0..=n - l {
                if a > 0 {
                    conv = beta * kt[a] + q * conv;
                }
                bsum[l + a] += (kt[a] - d * conv) * s.g[l];
            }
        }
        let weights: Vec<f64> = (0..=n).map(|k| bsum[k] * s.f[k]).collect();
        let conv = convolve_right(&tables.k10, &weights);
        return Ok(conv.into_iter().map(|v| d * d * v).collect());
    }

    if n > GENERAL_PATH_MAX_N && !opts.allow_large_n {
        return Err(Error::Config(format!(
            "general-kernel assembly is O(n^4); n = {n} exceeds {GENERAL_PATH_MAX_N} without override"
        )));
    }
    let h = grid.sample(|t| model.kernel.density(t));
    let eta = model.eta;
    let big_h = grid.sample(|t| model.kernel.cdf(t));
    let kernel = volterra::offspring_samples(model, &grid);
    let solutions: Vec<Vec<f64>> = (1..=n)
        .into_par_iter()
        .map(|k| {
            let mut forcing = vec![0.0; n - k + 1];
            for l in 1..=k {
                let kt = &tables.kt1[l];
                let a = k - l;
                let inner: f64 = (1..=a).map(|m| h[a - m] * kt[m]).sum();
                for (i, out) in forcing.iter_mut().enumerate() {
                    let shifted: f64 = (1..=a).map(|m| h[i + a - m] * kt[m]).sum();
                    *out += s.g[l] * (eta * big_h[i] * kt[a] - eta * d * (inner - shifted));
                }
            }
            volterra::solve_second_kind(&forcing, &kernel, d)
        })
        .collect::<Result<_>>()?;
    let mut term5 = vec![0.0; n + 1];
    for (idx, x) in solutions.iter().enumerate() {
        let k = idx + 1;
        for (i, v) in x.iter().enumerate() {
            term5[k + i] += d * d * s.f[k] * v;
        }
    }
    Ok(term5)
}

/// `Psi_2 = int F_g + k20 * F_g` and `n_2 = G_f + F_g`.
pub fn psi2_table(model: &ModelSpec, tables: &KernelTables) -> Result<ForcingCurve> {
    require_continuous(model)?;
    let grid = tables.grid;
    let s = Samples::new(model, &grid);
    let (b, e) = (model.baseline.clone(), model.exogenous.clone());
    let fg_int = cumulative_integral(&grid, |y| (1.0 - e.cdf(y)) * b.density(y));
    let conv = convolve_right(&tables.k10, &s.fg);
    let psi = (0..=grid.n)
        .map(|j| fg_int[j] + grid.delta * conv[j])
        .collect();
    let density = (0..=grid.n)
        .map(|j| (1.0 - s.big_g[j]) * s.f[j] + s.fg[j])
        .collect();
    Ok(ForcingCurve {
        psi,
        density,
        class: ProcessClass::R2,
    })
}

/// Solves `m = Psi + m * n` and differences it into `E[lambda]`.
pub fn solve_master(forcing: &ForcingCurve, grid: &Grid, mu0: f64) -> Result<ExpectationCurve> {
    if forcing.psi.len() != grid.n + 1 || forcing.density.len() != grid.n + 1 {
        return Err(Error::Config(format!(
            "forcing curve has {} / {} samples, grid needs {}",
            forcing.psi.len(),
            forcing.density.len(),
            grid.n + 1
        )));
    }
    let m = volterra::solve_second_kind(&forcing.psi, &forcing.density, grid.delta)?;
    Ok(ExpectationCurve::from_mean(*grid, forcing.class, m, mu0))
}

/// WFS process: `Psi = delta sum [1 + k10] g`, `n = g`.
pub fn m_wfs(model: &ModelSpec, tables: &KernelTables) -> Result<ExpectationCurve> {
    let grid = tables.grid;
    let g = grid.sample(|t| model.baseline.density(t));
    let conv = convolve_right(&tables.k10, &g);
    let mut psi = vec![0.0; grid.n + 1];
    let mut gsum = 0.0;
    for j in 1..=grid.n {
        gsum += g[j];
        psi[j] = grid.delta * (gsum + conv[j]);
    }
    let forcing = ForcingCurve {
        psi,
        density: g,
        class: ProcessClass::Wfs,
    };
    solve_master(&forcing, &grid, model.baseline.rate(0.0))
}

/// Classical Hawkes mean from the kernel tables.
pub fn m_classical(model: &ModelSpec, tables: &KernelTables) -> ExpectationCurve {
    ExpectationCurve::from_mean(
        tables.grid,
        ProcessClass::Classical,
        tables.m_classical.clone(),
        model.baseline.rate(0.0),
    )
}

/// Expectation for the model's class, building every table it needs.
pub fn expectation(model: &ModelSpec, grid: &Grid, opts: PsiOptions) -> Result<ExpectationCurve> {
    let tables = KernelTables::build(model, grid, opts.path)?;
    expectation_with_tables(model, &tables, opts)
}

/// Expectation for the model's class from prebuilt tables.
pub fn expectation_with_tables(
    model: &ModelSpec,
    tables: &KernelTables,
    opts: PsiOptions,
) -> Result<ExpectationCurve> {
    let grid = tables.grid;
    let mu0 = model.baseline.rate(0.0);
    match model.class {
        ProcessClass::Classical => Ok(m_classical(model, tables)),
        ProcessClass::Wfs => m_wfs(model, tables),
        class if model.exogenous.is_dirac() => dirac_expectation(model, tables, class, opts),
        ProcessClass::R1 => solve_master(&psi1_table(model, tables, opts)?, &grid, mu0),
        ProcessClass::R2 => solve_master(&psi2_table(model, tables)?, &grid, mu0),
        ProcessClass::R3 => solve_master(&psi3_table(model, tables, opts)?, &grid, mu0),
    }
}

/// Expectations for `Y = c1` fixed, by argument shifting.
pub fn dirac_expectation(
    model: &ModelSpec,
    tables: &KernelTables,
    class: ProcessClass,
    opts: PsiOptions,
) -> Result<ExpectationCurve> {
    let c1 = match model.exogenous {
        ExogenousLaw::Dirac { c1 } => c1,
        _ => {
            return Err(Error::Unsupported(
                "dirac_expectation needs a Dirac exogenous law".into(),
            ))
        }
    };
    let grid = tables.grid;
    let (n, d) = (grid.n, grid.delta);
    let p = {
        let x = c1 / d;
        if (x - x.round()).abs() > 1e-7 {
            return Err(Error::Config(format!(
                "Dirac location {c1} is not a multiple of the grid step {d}"
            )));
        }
        x.round() as usize
    };
    let mu0 = model.baseline.rate(0.0);
    let g = grid.sample(|t| model.baseline.density(t));
    let g_c1 = model.baseline.cdf(c1);

    let m = match class {
        ProcessClass::Classical => return Ok(m_classical(model, tables)),
        ProcessClass::Wfs => return m_wfs(model, tables),
        ProcessClass::R1 | ProcessClass::R3 => {
            let mut psi = dirac_psi13(model, tables, p, g_c1, &g, opts)?;
            if class == ProcessClass::R3 && opts.r3 == R3Forcing::Counted {
                for j in p + 1..=n {
                    let tail = model.baseline.cdf(grid.t(j)) - g_c1;
                    let conv: f64 = (p + 1..=j).map(|k| tables.k10[j - k] * g[k]).sum();
                    psi[j] += tail + d * conv;
                }
            }
            let mut m = vec![0.0; n + 1];
            for j in 1..=n {
                let mut v = psi[j];
                if j >= p {
                    if class == ProcessClass::R1 {
                        v += m[j - p];
                    } else {
                        v += g_c1 * m[j - p];
                        v += d * (p + 1..=j).map(|k| m[j - k] * g[k]).sum::<f64>();
                    }
                }
                m[j] = v;
            }
            m
        }
        ProcessClass::R2 => {
            let k10 = &tables.k10;
            let mut m = vec![0.0; n + 1];
            for j in 1..=n {
                m[j] = if j < p {
                    d * (1..=j)
                        .map(|k| (1.0 + k10[j - k] + m[j - k]) * g[k])
                        .sum::<f64>()
                } else {
                    d * (1..=p)
                        .map(|l| (1.0 + k10[j - l] + m[j - l]) * g[l])
                        .sum::<f64>()
                        + m[j - p] * (1.0 - g_c1)
                };
            }
            m
        }
    };
    if let Some(j) = m.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "Dirac expectation",
            index: j,
        });
    }
    Ok(ExpectationCurve::from_mean(grid, class, m, mu0))
}

fn dirac_psi13(
    model: &ModelSpec,
    tables: &KernelTables,
    p: usize,
    g_c1: f64,
    g: &[f64],
    opts: PsiOptions,
) -> Result<Vec<f64>> {
    let grid = tables.grid;
    let (n, d) = (grid.n, grid.delta);
    let before = match opts.tail {
        TailWeight::Survival => 1.0,
        TailWeight::Printed => g_c1,
    };
    let mut psi: Vec<f64> = tables.m_classical.iter().map(|m| m * before).collect();
    if p > n {
        return Ok(psi);
    }
    // Contribution of ky0tau(p, l)(j - p), summed over l with weight g(l).
    let ky_sum: Vec<f64> = match (&model.kernel, tables.path) {
        (OffspringKernel::Exponential { .. }, SolverPath::Auto) => {
            let c: f64 = (1..=p)
                .map(|l| tables.ky0tau_coefficient(model, p, l) * g[l])
                .sum();
            tables.k10[..=n - p].iter().map(|k| c * k).collect()
        }
        _ => {
            let mut forcing = vec![0.0; n - p + 1];
            for l in 1..=p {
                let f = volterra::ky0tau_forcing(model, &grid, p, l, &tables.kt1[l])?;
                for (o, v) in forcing.iter_mut().zip(f) {
                    *o += g[l] * v;
                }
            }
            let kernel = volterra::offspring_samples(model, &grid);
            volterra::solve_second_kind(&forcing, &kernel, d)?
        }
    };
    let kt_part: f64 = (1..=p).map(|l| tables.kt1[l][p - l] * g[l]).sum();
    for j in p..=n {
        let k10_part: f64 = (1..=p).map(|l| tables.k10[j - l] * g[l]).sum();
        psi[j] = g_c1 + d * (k10_part + kt_part + ky_sum[j - p]);
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BaselineHazard;

    fn model(class: ProcessClass) -> ModelSpec {
        ModelSpec::new(
            BaselineHazard::linear(2.0).unwrap(),
            OffspringKernel::exponential(2.0).unwrap(),
            2.0,
            ExogenousLaw::exponential(1.0).unwrap(),
            class,
        )
        .unwrap()
    }

    #[test]
    fn zero_forcing_gives_zero_mean() {
        let grid = Grid::new(0.1, 1.0).unwrap();
        let forcing = ForcingCurve {
            psi: vec![0.0; 11],
            density: vec![1.0; 11],
            class: ProcessClass::R1,
        };
        let curve = solve_master(&forcing, &grid, 0.0).unwrap();
        assert!(curve.m.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn psi_vanishes_at_zero_and_n3_starts_at_zero() {
        let m = model(ProcessClass::R1);
        let grid = Grid::new(0.05, 1.0).unwrap();
        let tables = KernelTables::build(&m, &grid, SolverPath::Auto).unwrap();
        let p1 = psi1_table(&m, &tables, PsiOptions::default()).unwrap();
        let p2 = psi2_table(&m, &tables).unwrap();
        let p3 = psi3_table(&m, &tables, PsiOptions::default()).unwrap();
        assert_eq!(p1.psi[0], 0.0);
        assert_eq!(p2.psi[0], 0.0);
        assert_eq!(p3.density[0], 0.0);
        assert_eq!(p1.psi, p3.psi);
    }

    #[test]
    fn dirac_is_rejected_by_density_solvers() {
        let m = model(ProcessClass::R1).with_exogenous(ExogenousLaw::dirac(0.5).unwrap());
        let grid = Grid::new(0.05, 1.0).unwrap();
        let tables = KernelTables::build(&m, &grid, SolverPath::Auto).unwrap();
        assert!(matches!(
            psi1_table(&m, &tables, PsiOptions::default()),
            Err(Error::Unsupported(_))
        ));
        let off = m.with_exogenous(ExogenousLaw::dirac(0.525).unwrap());
        assert!(matches!(
            dirac_expectation(&off, &tables, ProcessClass::R1, PsiOptions::default()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn general_path_matches_fast_path() {
        let grid = Grid::new(0.04, 1.2).unwrap();
        let opts = PsiOptions::default();
        for class in [ProcessClass::R1, ProcessClass::R2, ProcessClass::R3] {
            let m = model(class);
            let fast = expectation(&m, &grid, opts).unwrap();
            let slow = expectation(
                &m,
                &grid,
                PsiOptions {
                    path: SolverPath::General,
                    ..opts
                },
            )
            .unwrap();
            for (a, b) in fast.m.iter().zip(&slow.m) {
                assert!(
                    (a - b).abs() <= 1e-9 * b.abs().max(1.0),
                    "{class:?}: {a} vs {b}"
                );
            }
        }
        let d = model(ProcessClass::R3).with_exogenous(ExogenousLaw::dirac(0.4).unwrap());
        let fast = expectation(&d, &grid, opts).unwrap();
        let slow = expectation(
            &d,
            &grid,
            PsiOptions {
                path: SolverPath::General,
                ..opts
            },
        )
        .unwrap();
        for (a, b) in fast.m.iter().zip(&slow.m) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn general_path_is_capped() {
        let m = model(ProcessClass::R1);
        let grid = Grid::new(0.002, 1.0).unwrap();
        let opts = PsiOptions {
            path: SolverPath::General,
            ..PsiOptions::default()
        };
        assert!(matches!(
            expectation(&m, &grid, opts),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn intensity_convention() {
        let m = model(ProcessClass::R2);
        let grid = Grid::new(0.01, 1.0).unwrap();
        let c = expectation(&m, &grid, PsiOptions::default()).unwrap();
        assert_eq!(c.lambda[0], 0.0);
        assert!((c.lambda[1] - c.m[1] / 0.01).abs() < 1e-15);
        assert!((c.lambda[50] - (c.m[50] - c.m[49]) / 0.01).abs() < 1e-12);
    }

    #[test]
    fn counted_r3_forcing_restores_constant_rate_identity() {
        let m = ModelSpec::new(
            BaselineHazard::constant(1.5).unwrap(),
            OffspringKernel::exponential(2.0).unwrap(),
            0.5,
            ExogenousLaw::exponential(1.0).unwrap(),
            ProcessClass::R3,
        )
        .unwrap();
        let grid = Grid::new(0.01, 2.0).unwrap();
        let tables = KernelTables::build(&m, &grid, SolverPath::Auto).unwrap();
        let counted = PsiOptions {
            r3: R3Forcing::Counted,
            ..PsiOptions::default()
        };
        let r3 = expectation_with_tables(&m, &tables, counted).unwrap();
        let printed = expectation_with_tables(&m, &tables, PsiOptions::default()).unwrap();
        let classical = &tables.m_classical;
        let dev = |c: &[f64]| {
            c.iter()
                .zip(classical)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        };
        assert!(dev(&r3.m) < 0.05 * classical[grid.n], "{}", dev(&r3.m));
        assert!(dev(&printed.m) > 3.0 * dev(&r3.m));
    }
}
