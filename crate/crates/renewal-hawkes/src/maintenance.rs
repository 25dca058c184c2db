//! Long-run cost per unit time of periodic replacement and its minimisation.

use crate::error::{Error, Result};
use crate::expectations::{expectation, PsiOptions};
use crate::model::{Grid, ModelSpec};
use crate::renewal;

/// Costs per action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    /// Minimal repair (problem 1).
    pub c_f: f64,
    /// Repair of part A, triggered by immigrants (problem 2).
    pub c_i: f64,
    /// Repair of part B, triggered by offspring (problem 2).
    pub c_o: f64,
    /// Replacement of part A at exogenous renewals.
    pub c_ip: f64,
    /// Periodic replacement of the system.
    pub c_p: f64,
}

impl CostParams {
    /// Validates positivity and `c_i >= c_o`.
    pub fn new(c_f: f64, c_i: f64, c_o: f64, c_ip: f64, c_p: f64) -> Result<Self> {
        for (name, v) in [
            ("c_f", c_f),
            ("c_I", c_i),
            ("c_O", c_o),
            ("c_Ip", c_ip),
            ("c_p", c_p),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!(
                    "cost {name} must be positive, got {v}"
                )));
            }
        }
        if c_i < c_o {
            return Err(Error::Config(format!(
                "c_I = {c_i} must be at least c_O = {c_o}"
            )));
        }
        Ok(Self {
            c_f,
            c_i,
            c_o,
            c_ip,
            c_p,
        })
    }

    /// All costs multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(
            self.c_f * k,
            self.c_i * k,
            self.c_o * k,
            self.c_ip * k,
            self.c_p * k,
        )
    }
}

/// Which cost curve a [`PolicyCurve`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Problem1,
    Problem2Exact,
    Problem2Bounds,
}

impl CurveKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Problem1 => "problem1",
            Self::Problem2Exact => "problem2-exact",
            Self::Problem2Bounds => "problem2-bounds",
        }
    }
}

/// Mode of [`c2_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C2Mode {
    Exact,
    Bounds,
}

/// Minimiser of a sampled curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum {
    pub t_star: f64,
    pub value: f64,
    /// The discrete minimum sits at an end of the scanned range.
    pub boundary: bool,
    /// The curve is constant to rounding.
    pub flat: bool,
}

/// Sampled cost curve with its minimiser.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyCurve {
    pub kind: CurveKind,
    pub ts: Vec<f64>,
    pub values: Vec<f64>,
    pub bounds: Option<Vec<(f64, f64)>>,
    pub optimum: Optimum,
    /// Minimisers of the lower and upper curves in bounds mode.
    pub bound_optima: Option<(Optimum, Optimum)>,
    /// Name of the source of `E[N_I(T)]` (problem 2 only).
    pub n_i_method: Option<&'static str>,
    pub delta: f64,
}

/// Global scan followed by a quadratic fit through the bracketing triple.
pub fn optimize(ts: &[f64], values: &[f64]) -> Result<Optimum> {
    if ts.len() != values.len() {
        return Err(Error::Config(
            "abscissae and values differ in length".into(),
        ));
    }
    if ts.len() < 10 {
        return Err(Error::Config(format!(
            "the scan needs at least 10 samples, got {}",
            ts.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "cost curve",
            index: i,
        });
    }
    let (mut i, mut lo, mut hi) = (0, f64::INFINITY, f64::NEG_INFINITY);
    for (k, &v) in values.iter().enumerate() {
        if v < lo {
            lo = v;
            i = k;
        }
        hi = hi.max(v);
    }
    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        let mid = ts.len() / 2;
        return Ok(Optimum {
            t_star: ts[mid],
            value: values[mid],
            boundary: false,
            flat: true,
        });
    }
    if i == 0 || i + 1 == ts.len() {
        return Ok(Optimum {
            t_star: ts[i],
            value: values[i],
            boundary: true,
            flat: false,
        });
    }
    let (y0, y1, y2) = (values[i - 1], values[i], values[i + 1]);
    let curv = y0 - 2.0 * y1 + y2;
    let h = ts[i + 1] - ts[i];
    let (t_star, value) = if curv > 0.0 {
        (
            ts[i] + 0.5 * (y0 - y2) / curv * h,
            y1 - (y0 - y2).powi(2) / (8.0 * curv),
        )
    } else {
        (ts[i], y1)
    };
    Ok(Optimum {
        t_star,
        value,
        boundary: false,
        flat: false,
    })
}

fn range_indices(grid: &Grid, range: (f64, f64)) -> Result<(usize, usize)> {
    let (a, b) = range;
    if !(a > 0.0) {
        return Err(Error::Domain {
            what: "T range start (T = 0 is excluded)",
            value: a,
        });
    }
    if !(b >= a) {
        return Err(Error::Config(format!("empty T range [{a}, {b}]")));
    }
    if b > grid.horizon() * (1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "T range end {b} exceeds the grid horizon {}",
            grid.horizon()
        )));
    }
    let j0 = (a / grid.delta - 1e-9).ceil() as usize;
    let j1 = (b / grid.delta + 1e-9).floor() as usize;
    if j1 < j0 {
        return Err(Error::Config(format!(
            "T range [{a}, {b}] holds no grid node"
        )));
    }
    Ok((j0.max(1), j1))
}

/// `C_1(T) = (c_f E[N(T)] + c_Ip E[N_R(T)] + c_p) / T` from tabulated means.
pub fn c1_from_tables(
    mean: &[f64],
    renew: &[f64],
    grid: &Grid,
    costs: &CostParams,
    range: (f64, f64),
) -> Result<PolicyCurve> {
    let (j0, j1) = range_indices(grid, range)?;
    let ts: Vec<f64> = (j0..=j1).map(|j| grid.t(j)).collect();
    let values: Vec<f64> = (j0..=j1)
        .map(|j| (costs.c_f * mean[j] + costs.c_ip * renew[j] + costs.c_p) / grid.t(j))
        .collect();
    let optimum = optimize(&ts, &values)?;
    Ok(PolicyCurve {
        kind: CurveKind::Problem1,
        ts,
        values,
        bounds: None,
        optimum,
        bound_optima: None,
        n_i_method: None,
        delta: grid.delta,
    })
}

/// Problem-1 curve for the class of `model`.
pub fn c1_curve(
    model: &ModelSpec,
    costs: &CostParams,
    grid: &Grid,
    range: (f64, f64),
    opts: PsiOptions,
) -> Result<PolicyCurve> {
    range_indices(grid, range)?;
    let m = expectation(model, grid, opts)?;
    let renew = renewal::renewal_function(&model.exogenous, grid)?;
    c1_from_tables(&m.m, &renew, grid, costs, range)
}

/// Problem-2 curve `((c_I - c_O) E[N_I] + c_O E[N] + c_Ip E[N_R] + c_p) / T` from tabulated means.
#[allow(clippy::too_many_arguments)]
pub fn c2_from_tables(
    mean: &[f64],
    renew: &[f64],
    n_i: &[f64],
    nhp_mean: f64,
    grid: &Grid,
    costs: &CostParams,
    range: (f64, f64),
    mode: C2Mode,
) -> Result<PolicyCurve> {
    let (j0, j1) = range_indices(grid, range)?;
    let ts: Vec<f64> = (j0..=j1).map(|j| grid.t(j)).collect();
    let cost = |j: usize, ni: f64| {
        ((costs.c_i - costs.c_o) * ni + costs.c_o * mean[j] + costs.c_ip * renew[j] + costs.c_p)
            / grid.t(j)
    };
    match mode {
        C2Mode::Exact => {
            let values: Vec<f64> = (j0..=j1).map(|j| cost(j, n_i[j])).collect();
            let optimum = optimize(&ts, &values)?;
            Ok(PolicyCurve {
                kind: CurveKind::Problem2Exact,
                ts,
                values,
                bounds: None,
                optimum,
                bound_optima: None,
                n_i_method: None,
                delta: grid.delta,
            })
        }
        C2Mode::Bounds => {
            let bounds: Vec<(f64, f64)> = (j0..=j1)
                .map(|j| {
                    (
                        cost(j, nhp_mean * renew[j]),
                        cost(j, nhp_mean * (renew[j] + 1.0)),
                    )
                })
                .collect();
            let values: Vec<f64> = bounds.iter().map(|(l, u)| 0.5 * (l + u)).collect();
            let lower: Vec<f64> = bounds.iter().map(|b| b.0).collect();
            let upper: Vec<f64> = bounds.iter().map(|b| b.1).collect();
            let optimum = optimize(&ts, &values)?;
            let bound_optima = Some((optimize(&ts, &lower)?, optimize(&ts, &upper)?));
            Ok(PolicyCurve {
                kind: CurveKind::Problem2Bounds,
                ts,
                values,
                bounds: Some(bounds),
                optimum,
                bound_optima,
                n_i_method: Some("bounds"),
                delta: grid.delta,
            })
        }
    }
}

/// `E[N_I(t)]` at every node: closed form for `mu(t) = 2t` with exponential `Y`,
/// else the general series.
pub fn n_i_table(model: &ModelSpec, grid: &Grid) -> Result<(Vec<f64>, &'static str)> {
    let closed: Result<Vec<f64>> = (0..=grid.n)
        .map(|j| renewal::n_i_closed_for(&model.baseline, &model.exogenous, grid.t(j)))
        .collect();
    match closed {
        Ok(v) => Ok((v, "closed")),
        Err(Error::Unsupported(_)) => {
            match renewal::n_i_general_table(&model.baseline, &model.exogenous, grid) {
                Ok(v) => Ok((v, "general")),
                Err(e) => Err(Error::Unsupported(format!(
                    "exact E[N_I] is unavailable ({e}); use bounds mode"
                ))),
            }
        }
        Err(e) => Err(e),
    }
}

/// Problem-2 curve for the class of `model`.
pub fn c2_curve(
    model: &ModelSpec,
    costs: &CostParams,
    grid: &Grid,
    range: (f64, f64),
    mode: C2Mode,
    opts: PsiOptions,
) -> Result<PolicyCurve> {
    range_indices(grid, range)?;
    let m = expectation(model, grid, opts)?;
    let renew = renewal::renewal_function(&model.exogenous, grid)?;
    let nhp = renewal::nhp_mean_at_y1(&model.baseline, &model.exogenous)?;
    match mode {
        C2Mode::Exact => {
            let (n_i, method) = n_i_table(model, grid)?;
            let mut curve = c2_from_tables(&m.m, &renew, &n_i, nhp, grid, costs, range, mode)?;
            curve.n_i_method = Some(method);
            Ok(curve)
        }
        C2Mode::Bounds => c2_from_tables(&m.m, &renew, &[], nhp, grid, costs, range, mode),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cost_validation() {
        assert!(CostParams::new(1.5, 2.0, 1.0, 5.0, 10.0).is_ok());
        assert!(CostParams::new(1.5, 1.0, 2.0, 5.0, 10.0).is_err());
        assert!(CostParams::new(0.0, 2.0, 1.0, 5.0, 10.0).is_err());
    }

    #[test]
    fn convex_synthetic_curve() {
        let (a, b) = (2.0, 0.5);
        let ts: Vec<f64> = (1..=400).map(|j| j as f64 * 0.01).collect();
        let v: Vec<f64> = ts.iter().map(|t| a / t + b * t).collect();
        let o = optimize(&ts, &v).unwrap();
        assert!((o.t_star - (a / b).sqrt()).abs() < 0.01);
        assert!(!o.boundary && !o.flat);
    }

    #[test]
    fn flat_and_boundary_curves() {
        let ts: Vec<f64> = (1..=20).map(|j| j as f64).collect();
        let o = optimize(&ts, &[3.0; 20]).unwrap();
        assert!(o.flat && o.t_star > 1.0 && o.t_star < 20.0);
        let dec: Vec<f64> = ts.iter().map(|t| 1.0 / t).collect();
        assert!(optimize(&ts, &dec).unwrap().boundary);
        assert!(optimize(&ts[..5], &dec[..5]).is_err());
    }

    #[test]
    fn empty_or_zero_range() {
        let g = Grid::new(0.01, 2.0).unwrap();
        let m = vec![0.0; g.n + 1];
        let c = CostParams::new(1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(c1_from_tables(&m, &m, &g, &c, (0.0, 1.0)).is_err());
        assert!(c1_from_tables(&m, &m, &g, &c, (1.0, 0.5)).is_err());
        assert!(c1_from_tables(&m, &m, &g, &c, (0.5, 3.0)).is_err());
    }
}
