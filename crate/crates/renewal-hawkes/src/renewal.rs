//! Renewal function, convolution powers of the exogenous law and the mean
//! number of immigrants in a replacement cycle.

use crate::error::{Error, Result};
use crate::model::{BaselineHazard, ExogenousLaw, Grid};
use crate::quad;

/// Truncation level for the ladder: stop once `sup F^(n) < LADDER_TOL`.
pub const LADDER_TOL: f64 = 1e-8;
/// Maximal number of convolution powers.
pub const LADDER_MAX: usize = 10_000;

/// Tabulated `f^(n)` and `F^(n)` for `n = 1..=N`, with `f^(0)` the unit atom at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionLadder {
    pub grid: Grid,
    pub densities: Vec<Vec<f64>>,
    pub cdfs: Vec<Vec<f64>>,
}

impl ConvolutionLadder {
    /// Builds convolution powers by the trapezoid rule until `F^(n)(horizon) < LADDER_TOL`.
    pub fn build(law: &ExogenousLaw, grid: &Grid) -> Result<Self> {
        if law.is_dirac() {
            return Err(Error::Unsupported(
                "the Dirac law has no density ladder".into(),
            ));
        }
        let d = grid.delta;
        let f = grid.sample(|y| law.density(y));
        let mut densities = vec![f.clone()];
        let mut cdfs = vec![grid.sample(|y| law.cdf(y))];
        while cdfs.last().unwrap()[grid.n] >= LADDER_TOL {
            if densities.len() >= LADDER_MAX {
                return Err(Error::Convergence(format!(
                    "convolution ladder did not reach {LADDER_TOL} within {LADDER_MAX} terms"
                )));
            }
            let prev = densities.last().unwrap();
            let mut next = vec![0.0; grid.n + 1];
            for j in 1..=grid.n {
                let mut s = 0.5 * (prev[0] * f[j] + prev[j] * f[0]);
                for k in 1..j {
                    s += prev[k] * f[j - k];
                }
                next[j] = d * s;
            }
            let mut cdf = vec![0.0; grid.n + 1];
            for j in 1..=grid.n {
                cdf[j] = (cdf[j - 1] + 0.5 * d * (next[j - 1] + next[j])).min(1.0);
            }
            densities.push(next);
            cdfs.push(cdf);
        }
        Ok(Self {
            grid: *grid,
            densities,
            cdfs,
        })
    }

    /// Number of tabulated powers.
    pub fn len(&self) -> usize {
        self.densities.len()
    }

    /// Always false: the ladder holds at least `f` itself.
    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    /// `sum_n F^(n)` at every node.
    pub fn renewal_sum(&self) -> Vec<f64> {
        (0..=self.grid.n)
            .map(|j| self.cdfs.iter().map(|c| c[j]).sum())
            .collect()
    }
}

/// `E[N_R(t)]` at every node.
pub fn renewal_function(law: &ExogenousLaw, grid: &Grid) -> Result<Vec<f64>> {
    match law {
        ExogenousLaw::Exponential { gamma } => Ok(grid.sample(|t| gamma * t)),
        ExogenousLaw::Dirac { c1 } => Ok(grid.sample(|t| (t / c1 + 1e-9).floor())),
        ExogenousLaw::Tabulated(_) => Ok(ConvolutionLadder::build(law, grid)?.renewal_sum()),
    }
}

/// `E[N_NHP(Y_1)] = int_0^inf Lambda(y) dF(y)`.
pub fn nhp_mean_at_y1(baseline: &BaselineHazard, law: &ExogenousLaw) -> Result<f64> {
    if let (BaselineHazard::Linear { slope }, ExogenousLaw::Exponential { gamma }) = (baseline, law)
    {
        return Ok(slope / (gamma * gamma));
    }
    let integrand = |y: f64| baseline.cumulative(y) * law.density(y);
    let value = match law {
        ExogenousLaw::Dirac { c1 } => baseline.cumulative(*c1),
        ExogenousLaw::Exponential { .. } => quad::simpson_to_infinity(&integrand, 0.0, 1e-11),
        ExogenousLaw::Tabulated(_) => {
            let end = law.support_end();
            if 1.0 - law.cdf(end) > 1e-9 && baseline.cumulative(end) > 0.0 {
                return Err(Error::Convergence(
                    "E[Lambda(Y)] diverges: the exogenous law puts mass at infinity".into(),
                ));
            }
            quad::simpson(&integrand, 0.0, end, 1e-11)
        }
    };
    if !value.is_finite() || value > 1e12 {
        return Err(Error::Convergence(format!(
            "E[Lambda(Y)] diverges (partial value {value})"
        )));
    }
    Ok(value)
}

/// `E[N_I(t)]` at every node from the general series
/// `sum_n F^(n)(t) E[Lambda(Y)] + sum_{n>=0} P(N_R(t) = n) int_0^t Lambda(t - y) f^(n)(y) dy`.
pub fn n_i_general_table(
    baseline: &BaselineHazard,
    law: &ExogenousLaw,
    grid: &Grid,
) -> Result<Vec<f64>> {
    let nhp = nhp_mean_at_y1(baseline, law)?;
    let lam = grid.sample(|t| baseline.cumulative(t));
    if let ExogenousLaw::Dirac { c1 } = law {
        return Ok(grid.sample(|t| {
            let n = (t / c1 + 1e-9).floor();
            n * nhp + baseline.cumulative((t - n * c1).max(0.0))
        }));
    }
    let ladder = ConvolutionLadder::build(law, grid)?;
    let renew = match law {
        ExogenousLaw::Exponential { gamma } => grid.sample(|t| gamma * t),
        _ => ladder.renewal_sum(),
    };
    let d = grid.delta;
    let out = (0..=grid.n)
        .map(|j| {
            let mut total = renew[j] * nhp + lam[j] * (1.0 - ladder.cdfs[0][j]);
            for n in 0..ladder.len() {
                let next = ladder.cdfs.get(n + 1).map_or(0.0, |c| c[j]);
                let prob = ladder.cdfs[n][j] - next;
                if j == 0 || prob == 0.0 {
                    continue;
                }
                let fnn = &ladder.densities[n];
                let mut s = 0.5 * (lam[j] * fnn[0] + lam[0] * fnn[j]);
                for k in 1..j {
                    s += lam[j - k] * fnn[k];
                }
                total += prob * d * s;
            }
            total
        })
        .collect();
    Ok(out)
}

/// `E[N_I(T)]` from the general series; `T` must be a node of `grid`.
pub fn n_i_general(
    baseline: &BaselineHazard,
    law: &ExogenousLaw,
    grid: &Grid,
    t: f64,
) -> Result<f64> {
    let j = grid.index_of(t).ok_or(Error::Domain {
        what: "T (must be a grid node)",
        value: t,
    })?;
    if j == 0 {
        return Ok(0.0);
    }
    let sub = Grid::with_steps(grid.delta, j)?;
    Ok(n_i_general_table(baseline, law, &sub)?[j])
}

#[derive(Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Closed-form `E[N_I(T)]` for `mu(t) = 2t` and exponential `Y` with rate `gamma`:
/// `4T/gamma - T^2 S_1 + (2T/gamma) S_2 - S_3 / gamma^2`, where the double
/// sums run over the Poisson weights `e^{-2 gamma T} (gamma T)^{k+n} / (k! n!)`.
pub fn n_i_closed(gamma: f64, t: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::Domain {
            what: "gamma",
            value: gamma,
        });
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Domain {
            what: "T",
            value: t,
        });
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let x = gamma * t;
    // The weights factor as p(k) p(n) with p the Poisson(gamma T) mass function.
    let kmax = (x + 12.0 * x.sqrt() + 60.0).ceil() as usize;
    let lx = x.ln();
    let p: Vec<f64> = (0..=kmax + 1)
        .scan(-x, |lp, k| {
            if k > 0 {
                *lp += lx - (k as f64).ln();
            }
            Some(lp.exp())
        })
        .collect();
    let mut cum = Vec::with_capacity(p.len());
    let mut acc = Kahan::default();
    for &v in &p {
        acc.add(v);
        cum.push(acc.sum.min(1.0));
    }
    let (mut s1, mut s2, mut s3) = (Kahan::default(), Kahan::default(), Kahan::default());
    for k in 0..=kmax {
        let kf = k as f64;
        if k >= 1 {
            s1.add(p[k] * cum[k - 1]);
        }
        s2.add(kf * p[k] * cum[k]);
        s3.add(kf * (kf + 1.0) * p[k] * cum[k + 1]);
    }
    Ok(4.0 * t / gamma - t * t * s1.sum + 2.0 * t / gamma * s2.sum - s3.sum / (gamma * gamma))
}

/// [`n_i_closed`] after checking that the model is `mu(t) = 2t` with exponential `Y`.
pub fn n_i_closed_for(baseline: &BaselineHazard, law: &ExogenousLaw, t: f64) -> Result<f64> {
    match (baseline, law) {
        (BaselineHazard::Linear { slope }, ExogenousLaw::Exponential { gamma })
            if *slope == 2.0 =>
        {
            n_i_closed(*gamma, t)
        }
        _ => Err(Error::Unsupported(
            "the closed form needs mu(t) = 2t and an exponential law".into(),
        )),
    }
}

/// `(E[Lambda(Y)] E[N_R(T)], E[Lambda(Y)] (E[N_R(T)] + 1))`.
pub fn n_i_bounds(
    baseline: &BaselineHazard,
    law: &ExogenousLaw,
    grid: &Grid,
    t: f64,
) -> Result<(f64, f64)> {
    let j = grid.index_of(t).ok_or(Error::Domain {
        what: "T (must be a grid node)",
        value: t,
    })?;
    let nhp = nhp_mean_at_y1(baseline, law)?;
    let sub = Grid::with_steps(grid.delta, j.max(1))?;
    let renew = renewal_function(law, &sub)?[j];
    Ok((nhp * renew, nhp * (renew + 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lin2() -> BaselineHazard {
        BaselineHazard::linear(2.0).unwrap()
    }

    #[test]
    fn renewal_function_examples() {
        let g = Grid::new(0.01, 2.0).unwrap();
        let e = renewal_function(&ExogenousLaw::exponential(1.0).unwrap(), &g).unwrap();
        assert!((e[200] - 2.0).abs() < 1e-12);
        assert_eq!(e[0], 0.0);
        let d = renewal_function(&ExogenousLaw::dirac(0.7).unwrap(), &g).unwrap();
        assert_eq!(d[200], 2.0);
        assert_eq!(d[70], 1.0);
    }

    #[test]
    fn ladder_matches_exponential_short_cut() {
        let g = Grid::new(1e-3, 3.0).unwrap();
        let law = ExogenousLaw::exponential(1.0).unwrap();
        let ladder = ConvolutionLadder::build(&law, &g).unwrap();
        let sum = ladder.renewal_sum();
        for j in (0..=g.n).step_by(100) {
            assert!((sum[j] - g.t(j)).abs() < 1e-3, "t = {}", g.t(j));
        }
        // Erlang(2) checkpoint.
        let erlang2 = 1.0 - (-1.0f64).exp() * 2.0;
        assert!((ladder.cdfs[1][1000] - erlang2).abs() < 1e-6);
    }

    #[test]
    fn nhp_mean_examples() {
        let e1 = ExogenousLaw::exponential(1.0).unwrap();
        let e2 = ExogenousLaw::exponential(2.0).unwrap();
        assert_eq!(nhp_mean_at_y1(&lin2(), &e1).unwrap(), 2.0);
        assert_eq!(nhp_mean_at_y1(&lin2(), &e2).unwrap(), 0.5);
        let tab =
            BaselineHazard::tabulated(0.01, (0..=1000).map(|j| 2.0 * j as f64 * 0.01).collect())
                .unwrap();
        assert!((nhp_mean_at_y1(&tab, &e2).unwrap() - 0.5).abs() < 1e-6);
        assert_eq!(
            nhp_mean_at_y1(&BaselineHazard::constant(0.0).unwrap(), &e1).unwrap(),
            0.0
        );
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(n_i_closed(1.0, 0.0).unwrap(), 0.0);
        assert!((n_i_closed(1.0, 0.5).unwrap() - 1.163165).abs() < 1e-6);
        assert!((n_i_closed(1.0, 1.0).unwrap() - 2.476222).abs() < 1e-6);
        assert!((n_i_closed(1.0, 2.0).unwrap() - 5.228494).abs() < 1e-6);
        assert!(n_i_closed(1.0, 40.0).unwrap().is_finite());
        assert!(n_i_closed_for(
            &BaselineHazard::linear(3.0).unwrap(),
            &ExogenousLaw::exponential(1.0).unwrap(),
            1.0
        )
        .is_err());
    }

    #[test]
    fn general_series_matches_closed_form() {
        let g = Grid::new(1e-3, 2.0).unwrap();
        let law = ExogenousLaw::exponential(1.0).unwrap();
        let table = n_i_general_table(&lin2(), &law, &g).unwrap();
        assert_eq!(table[0], 0.0);
        for &t in &[0.5, 1.0, 2.0] {
            let j = g.index_of(t).unwrap();
            assert!(
                (table[j] - n_i_closed(1.0, t).unwrap()).abs() < 1e-3,
                "T = {t}"
            );
        }
    }

    #[test]
    fn bounds_examples() {
        let g = Grid::new(0.01, 2.0).unwrap();
        let law = ExogenousLaw::exponential(1.0).unwrap();
        let (lo, hi) = n_i_bounds(&lin2(), &law, &g, 2.0).unwrap();
        assert!((lo - 4.0).abs() < 1e-12 && (hi - 6.0).abs() < 1e-12);
        let zero = BaselineHazard::constant(0.0).unwrap();
        assert_eq!(n_i_bounds(&zero, &law, &g, 1.0).unwrap(), (0.0, 0.0));
    }
}
