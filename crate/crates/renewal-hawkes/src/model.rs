//! Model ingredients: baseline hazard, offspring kernel, exogenous law, grid.

use crate::error::{Error, Result};

/// Linearly interpolated samples on `0, step, 2 step, ...`, constant beyond
/// the last sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedFn {
    step: f64,
    values: Vec<f64>,
    tail: f64,
    cumulative: Vec<f64>,
}

impl TabulatedFn {
    /// Builds a table; `tail` is the value used past the last sample.
    pub fn new(step: f64, values: Vec<f64>, tail: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::Config(format!(
                "table step must be positive, got {step}"
            )));
        }
        if values.len() < 2 {
            return Err(Error::Config("table needs at least two samples".into()));
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Config(format!(
                "table sample {i} must be finite and nonnegative, got {}",
                values[i]
            )));
        }
        if !(tail.is_finite() && tail >= 0.0) {
            return Err(Error::Config(format!(
                "table tail must be nonnegative, got {tail}"
            )));
        }
        let mut cumulative = Vec::with_capacity(values.len());
        cumulative.push(0.0);
        for w in values.windows(2) {
            let last = *cumulative.last().expect("nonempty");
            cumulative.push(last + 0.5 * step * (w[0] + w[1]));
        }
        Ok(Self {
            step,
            values,
            tail,
            cumulative,
        })
    }

    /// Sample spacing.
    pub fn step(&self) -> f64 {
        self.step
    }

    /// Raw samples.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn end(&self) -> f64 {
        self.step * (self.values.len() - 1) as f64
    }

    /// Interpolated value at `t >= 0`.
    pub fn eval(&self, t: f64) -> f64 {
        if t >= self.end() {
            return if t == self.end() {
                *self.values.last().expect("nonempty")
            } else {
                self.tail
            };
        }
        let x = t / self.step;
        let i = x.floor() as usize;
        let w = x - i as f64;
        self.values[i] * (1.0 - w) + self.values[i + 1] * w
    }

    /// Exact integral of the interpolant over `[0, t]`.
    pub fn integral(&self, t: f64) -> f64 {
        let end = self.end();
        if t >= end {
            return self.cumulative.last().expect("nonempty") + (t - end) * self.tail;
        }
        let x = t / self.step;
        let i = x.floor() as usize;
        let dx = t - i as f64 * self.step;
        let v0 = self.values[i];
        let v1 = self.eval(t);
        self.cumulative[i] + 0.5 * dx * (v0 + v1)
    }

    /// Supremum of the interpolant over `[a, b]`.
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        let mut best = self.eval(a).max(self.eval(b));
        let end = self.end();
        if b > end {
            best = best
                .max(self.tail)
                .max(*self.values.last().expect("nonempty"));
        }
        let first = (a / self.step).ceil() as usize;
        let last = ((b.min(end)) / self.step).floor() as usize;
        for v in self.values.iter().take(last + 1).skip(first) {
            best = best.max(*v);
        }
        best
    }
}

/// Piecewise-constant rates `rates[k]` on `[starts[k], starts[k+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    starts: Vec<f64>,
    rates: Vec<f64>,
    cumulative: Vec<f64>,
}

impl PiecewiseConstant {
    /// Builds the step function; `starts[0]` must be 0 and starts must increase.
    pub fn new(starts: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if starts.is_empty() || starts.len() != rates.len() {
            return Err(Error::Config(
                "piecewise hazard needs as many segment starts as rates".into(),
            ));
        }
        if starts[0] != 0.0 {
            return Err(Error::Config("first segment must start at t = 0".into()));
        }
        if starts.windows(2).any(|w| w[1] <= w[0] || !w[1].is_finite()) {
            return Err(Error::Config(
                "segment starts must be strictly increasing".into(),
            ));
        }
        if let Some(r) = rates.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
            return Err(Error::Config(format!(
                "hazard rates must be nonnegative, got {r}"
            )));
        }
        let mut cumulative = vec![0.0];
        for k in 1..starts.len() {
            let c = cumulative[k - 1] + rates[k - 1] * (starts[k] - starts[k - 1]);
            cumulative.push(c);
        }
        Ok(Self {
            starts,
            rates,
            cumulative,
        })
    }

    /// Segment starts `t_0 = 0 < t_1 < ...`.
    pub fn starts(&self) -> &[f64] {
        &self.starts
    }

    /// Rates `mu_1, mu_2, ...` (one per segment).
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Index of the segment containing `t`.
    pub fn segment(&self, t: f64) -> usize {
        self.starts.partition_point(|s| *s <= t).saturating_sub(1)
    }

    fn rate(&self, t: f64) -> f64 {
        self.rates[self.segment(t)]
    }

    fn cumulative(&self, t: f64) -> f64 {
        let k = self.segment(t);
        self.cumulative[k] + self.rates[k] * (t - self.starts[k])
    }

    /// Cumulative hazard at the start of each segment.
    pub fn cumulative_at_starts(&self) -> &[f64] {
        &self.cumulative
    }
}

/// Immigrant hazard `mu` as a function of the baseline age.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineHazard {
    /// `mu(t) = slope * t`.
    Linear { slope: f64 },
    /// Step function.
    Piecewise(PiecewiseConstant),
    /// Linearly interpolated samples, held constant past the table.
    Tabulated(TabulatedFn),
}

impl BaselineHazard {
    /// `mu(t) = slope * t`.
    pub fn linear(slope: f64) -> Result<Self> {
        if !(slope.is_finite() && slope >= 0.0) {
            return Err(Error::Config(format!(
                "linear hazard slope must be nonnegative, got {slope}"
            )));
        }
        Ok(Self::Linear { slope })
    }

    /// Constant hazard.
    pub fn constant(rate: f64) -> Result<Self> {
        Ok(Self::Piecewise(PiecewiseConstant::new(
            vec![0.0],
            vec![rate],
        )?))
    }

    /// Step hazard.
    pub fn piecewise(starts: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        Ok(Self::Piecewise(PiecewiseConstant::new(starts, rates)?))
    }

    /// Tabulated hazard.
    pub fn tabulated(step: f64, values: Vec<f64>) -> Result<Self> {
        let tail = *values.last().unwrap_or(&0.0);
        Ok(Self::Tabulated(TabulatedFn::new(step, values, tail)?))
    }

    /// `mu(t)`.
    pub fn rate(&self, t: f64) -> f64 {
        match self {
            Self::Linear { slope } => slope * t,
            Self::Piecewise(p) => p.rate(t),
            Self::Tabulated(tab) => tab.eval(t),
        }
    }

    /// `Lambda(t) = int_0^t mu`.
    pub fn cumulative(&self, t: f64) -> f64 {
        match self {
            Self::Linear { slope } => 0.5 * slope * t * t,
            Self::Piecewise(p) => p.cumulative(t),
            Self::Tabulated(tab) => tab.integral(t),
        }
    }

    /// Distribution function `G(t) = 1 - exp(-Lambda(t))` of the first immigrant.
    pub fn cdf(&self, t: f64) -> f64 {
        -(-self.cumulative(t)).exp_m1()
    }

    /// Density `g(t) = mu(t) exp(-Lambda(t))` of the first immigrant.
    pub fn density(&self, t: f64) -> f64 {
        self.rate(t) * (-self.cumulative(t)).exp()
    }

    /// Supremum of `mu` over ages in `[a, b]`.
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        match self {
            Self::Linear { slope } => slope * b,
            Self::Piecewise(p) => {
                let (i, j) = (p.segment(a), p.segment(b));
                p.rates[i..=j].iter().cloned().fold(0.0, f64::max)
            }
            Self::Tabulated(tab) => tab.sup_on(a, b),
        }
    }

    /// The rate when the hazard is constant.
    pub fn constant_rate(&self) -> Option<f64> {
        match self {
            Self::Piecewise(p) if p.rates.len() == 1 => Some(p.rates[0]),
            Self::Linear { slope } if *slope == 0.0 => Some(0.0),
            _ => None,
        }
    }
}

/// Offspring density `h`, normalised to unit mass.
#[derive(Debug, Clone, PartialEq)]
pub enum OffspringKernel {
    /// `h(t) = beta exp(-beta t)`.
    Exponential { beta: f64 },
    /// Linearly interpolated samples, zero past the table.
    Tabulated(TabulatedFn),
}

impl OffspringKernel {
    /// Exponential kernel with rate `beta > 0`.
    pub fn exponential(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Config(format!(
                "kernel rate beta must be positive, got {beta}"
            )));
        }
        Ok(Self::Exponential { beta })
    }

    /// Tabulated kernel; its total mass must be 1 within `1e-6`.
    pub fn tabulated(step: f64, values: Vec<f64>) -> Result<Self> {
        let tab = TabulatedFn::new(step, values, 0.0)?;
        let mass = tab.integral(tab.end());
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "offspring density must integrate to 1, got {mass}"
            )));
        }
        Ok(Self::Tabulated(tab))
    }

    /// `h(t)`.
    pub fn density(&self, t: f64) -> f64 {
        match self {
            Self::Exponential { beta } => beta * (-beta * t).exp(),
            Self::Tabulated(tab) => tab.eval(t),
        }
    }

    /// `H(t) = int_0^t h`.
    pub fn cdf(&self, t: f64) -> f64 {
        match self {
            Self::Exponential { beta } => -(-beta * t).exp_m1(),
            Self::Tabulated(tab) => tab.integral(t),
        }
    }

    /// Supremum of `h` over lags in `[a, b]`.
    pub fn sup_on(&self, a: f64, b: f64) -> f64 {
        match self {
            Self::Exponential { .. } => self.density(a),
            Self::Tabulated(tab) => tab.sup_on(a, b),
        }
    }

    /// Rate of the exponential kernel.
    pub fn beta(&self) -> Option<f64> {
        match self {
            Self::Exponential { beta } => Some(*beta),
            Self::Tabulated(_) => None,
        }
    }

    /// Lags past which `h` vanishes identically.
    pub fn support_end(&self) -> f64 {
        match self {
            Self::Exponential { .. } => f64::INFINITY,
            Self::Tabulated(tab) => tab.end(),
        }
    }
}

/// Law of the exogenous inter-renewal times `Y`.
#[derive(Debug, Clone, PartialEq)]
pub enum ExogenousLaw {
    /// Exponential with rate `gamma`.
    Exponential { gamma: f64 },
    /// Tabulated density; any missing mass is the probability that `Y` is infinite.
    Tabulated(TabulatedFn),
    /// Point mass at `c1 > 0`.
    Dirac { c1: f64 },
}

impl ExogenousLaw {
    /// Exponential law with rate `gamma > 0`.
    pub fn exponential(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::Config(format!(
                "exogenous rate gamma must be positive, got {gamma}"
            )));
        }
        Ok(Self::Exponential { gamma })
    }

    /// Tabulated density with total mass at most 1.
    pub fn tabulated(step: f64, density: Vec<f64>) -> Result<Self> {
        let tab = TabulatedFn::new(step, density, 0.0)?;
        let mass = tab.integral(tab.end());
        if mass > 1.0 + 1e-6 {
            return Err(Error::Config(format!(
                "exogenous density has mass {mass} > 1"
            )));
        }
        Ok(Self::Tabulated(tab))
    }

    /// Point mass at `c1 > 0`.
    pub fn dirac(c1: f64) -> Result<Self> {
        if !(c1.is_finite() && c1 > 0.0) {
            return Err(Error::Config(format!(
                "Dirac location c1 must be positive, got {c1}"
            )));
        }
        Ok(Self::Dirac { c1 })
    }

    /// Density `f(y)`; zero for the Dirac law, which has no density.
    pub fn density(&self, y: f64) -> f64 {
        match self {
            Self::Exponential { gamma } => gamma * (-gamma * y).exp(),
            Self::Tabulated(tab) => tab.eval(y),
            Self::Dirac { .. } => 0.0,
        }
    }

    /// Distribution function `F(y)`.
    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            Self::Exponential { gamma } => -(-gamma * y).exp_m1(),
            Self::Tabulated(tab) => tab.integral(y).min(1.0),
            Self::Dirac { c1 } => {
                if y >= *c1 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Inverse distribution function; `inf` when `u` exceeds the total mass.
    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            Self::Exponential { gamma } => -(-u).ln_1p() / gamma,
            Self::Dirac { c1 } => *c1,
            Self::Tabulated(tab) => {
                let end = tab.end();
                if u >= tab.integral(end) {
                    return f64::INFINITY;
                }
                let (mut lo, mut hi) = (0.0, end);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if tab.integral(mid) < u {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 * end.max(1.0) {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Whether the law is a point mass.
    pub fn is_dirac(&self) -> bool {
        matches!(self, Self::Dirac { .. })
    }

    /// Rate of the exponential law.
    pub fn gamma(&self) -> Option<f64> {
        match self {
            Self::Exponential { gamma } => Some(*gamma),
            _ => None,
        }
    }

    /// Upper end of the support (infinite for the exponential law).
    pub fn support_end(&self) -> f64 {
        match self {
            Self::Exponential { .. } => f64::INFINITY,
            Self::Tabulated(tab) => tab.end(),
            Self::Dirac { c1 } => *c1,
        }
    }
}

/// Which point process the model describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProcessClass {
    /// Baseline renewed at exogenous times only.
    R1,
    /// Baseline renewed at `min(Y, first immigrant)`.
    R2,
    /// Baseline renewed at `max(Y, first immigrant)`.
    R3,
    /// No renewals.
    Classical,
    /// Baseline renewed at every immigrant.
    Wfs,
}

impl ProcessClass {
    /// All classes, in display order.
    pub const ALL: [ProcessClass; 5] = [Self::R1, Self::R2, Self::R3, Self::Classical, Self::Wfs];

    /// Short lowercase name.
    pub fn name(self) -> &'static str {
        match self {
            Self::R1 => "r1",
            Self::R2 => "r2",
            Self::R3 => "r3",
            Self::Classical => "classical",
            Self::Wfs => "wfs",
        }
    }

    /// Parses a short name.
    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown process class `{s}`")))
    }
}

/// Complete parameterisation of one renewal Hawkes model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub baseline: BaselineHazard,
    pub kernel: OffspringKernel,
    /// Branching ratio; `0` gives the Poisson limit, `>= 1` is allowed on finite horizons.
    pub eta: f64,
    pub exogenous: ExogenousLaw,
    pub class: ProcessClass,
}

impl ModelSpec {
    /// Bundles the ingredients after checking `eta`.
    pub fn new(
        baseline: BaselineHazard,
        kernel: OffspringKernel,
        eta: f64,
        exogenous: ExogenousLaw,
        class: ProcessClass,
    ) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::Config(format!(
                "branching ratio eta must be nonnegative, got {eta}"
            )));
        }
        Ok(Self {
            baseline,
            kernel,
            eta,
            exogenous,
            class,
        })
    }

    /// Same model with another process class.
    pub fn with_class(&self, class: ProcessClass) -> Self {
        Self {
            class,
            ..self.clone()
        }
    }

    /// Same model with another exogenous law.
    pub fn with_exogenous(&self, exogenous: ExogenousLaw) -> Self {
        Self {
            exogenous,
            ..self.clone()
        }
    }
}

/// `(F_g(t), G_f(t)) = ((1 - F(t)) g(t), (1 - G(t)) f(t))`.
pub fn derived_fg(model: &ModelSpec, t: f64) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(Error::Domain {
            what: "t",
            value: t,
        });
    }
    let b = &model.baseline;
    let e = &model.exogenous;
    Ok((
        (1.0 - e.cdf(t)) * b.density(t),
        (1.0 - b.cdf(t)) * e.density(t),
    ))
}

/// `Lambda(t)` with a domain check.
pub fn cumulative_hazard(baseline: &BaselineHazard, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain {
            what: "t",
            value: t,
        });
    }
    Ok(baseline.cumulative(t))
}

/// Uniform mesh `0, delta, ..., n delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub delta: f64,
    pub n: usize,
}

impl Grid {
    /// Mesh of step `delta` up to `horizon`, which must be a multiple of `delta`.
    pub fn new(delta: f64, horizon: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!(
                "grid step must be positive, got {delta}"
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Config(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        let n = (horizon / delta).round();
        if n < 1.0 || (n * delta - horizon).abs() > 1e-9 * horizon {
            return Err(Error::Config(format!(
                "horizon {horizon} is not a multiple of the grid step {delta}"
            )));
        }
        Ok(Self {
            delta,
            n: n as usize,
        })
    }

    /// Mesh with `n` steps of size `delta`.
    pub fn with_steps(delta: f64, n: usize) -> Result<Self> {
        Self::new(delta, delta * n as f64)
    }

    /// `n delta`.
    pub fn horizon(&self) -> f64 {
        self.delta * self.n as f64
    }

    /// Time of node `j`.
    pub fn t(&self, j: usize) -> f64 {
        self.delta * j as f64
    }

    /// All node times.
    pub fn times(&self) -> Vec<f64> {
        (0..=self.n).map(|j| self.t(j)).collect()
    }

    /// Index of the node at `t`, if `t` lies on the mesh.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.delta;
        let j = x.round();
        ((x - j).abs() < 1e-7 && j >= 0.0 && j as usize <= self.n).then_some(j as usize)
    }

    /// Samples a function at every node.
    pub fn sample<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..=self.n).map(|j| f(self.t(j))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn paper_model() -> ModelSpec {
        ModelSpec::new(
            BaselineHazard::linear(2.0).unwrap(),
            OffspringKernel::exponential(2.0).unwrap(),
            2.0,
            ExogenousLaw::exponential(1.0).unwrap(),
            ProcessClass::R1,
        )
        .unwrap()
    }

    #[test]
    fn derived_fg_values() {
        let m = paper_model();
        let (fg0, _) = derived_fg(&m, 0.0).unwrap();
        assert_eq!(fg0, 0.0);
        let (fg, gf) = derived_fg(&m, 1.0).unwrap();
        assert!((fg - 2.0 * (-2.0f64).exp()).abs() < 1e-15);
        assert!((gf - (-2.0f64).exp()).abs() < 1e-15);
        assert!(derived_fg(&m, -1.0).is_err());
    }

    #[test]
    fn cumulative_hazard_values() {
        let lin = BaselineHazard::linear(2.0).unwrap();
        assert_eq!(cumulative_hazard(&lin, 1.0).unwrap(), 1.0);
        assert_eq!(cumulative_hazard(&lin, 0.0).unwrap(), 0.0);
        let pw = BaselineHazard::piecewise(vec![0.0, 2.0], vec![1.0, 3.0]).unwrap();
        assert!((cumulative_hazard(&pw, 3.0).unwrap() - 5.0).abs() < 1e-15);
        assert!(cumulative_hazard(&pw, -0.5).is_err());
    }

    #[test]
    fn first_immigrant_law_of_linear_hazard() {
        let lin = BaselineHazard::linear(2.0).unwrap();
        for &t in &[0.0, 0.3, 1.0, 2.2] {
            let t: f64 = t;
            assert!((lin.cdf(t) - (1.0 - (-t * t).exp())).abs() < 1e-12);
            assert!((lin.density(t) - 2.0 * t * (-t * t).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn exponential_kernel_cdf_matches_quadrature() {
        let k = OffspringKernel::exponential(2.0).unwrap();
        for &t in &[0.1, 0.7, 2.0, 5.0] {
            let q = crate::quad::simpson(&|v| k.density(v), 0.0, t, 1e-12);
            assert!((q - k.cdf(t)).abs() < 1e-8);
        }
    }

    #[test]
    fn tabulated_integrals_are_exact_for_linear_data() {
        let tab = TabulatedFn::new(0.5, vec![0.0, 1.0, 2.0, 3.0], 3.0).unwrap();
        assert!((tab.integral(1.25) - 1.25 * 1.25).abs() < 1e-15);
        assert!((tab.integral(2.0) - (2.25 + 1.5)).abs() < 1e-15);
        assert_eq!(tab.sup_on(0.2, 0.9), 1.8);
    }

    #[test]
    fn validation_errors() {
        assert!(BaselineHazard::piecewise(vec![0.5], vec![1.0]).is_err());
        assert!(BaselineHazard::piecewise(vec![0.0, 1.0, 1.0], vec![1.0, 2.0, 3.0]).is_err());
        assert!(OffspringKernel::exponential(0.0).is_err());
        assert!(OffspringKernel::tabulated(0.5, vec![1.0, 1.0]).is_err());
        assert!(ExogenousLaw::dirac(0.0).is_err());
        assert!(Grid::new(0.3, 1.0).is_err());
        assert_eq!(Grid::new(0.005, 2.5).unwrap().n, 500);
    }

    #[test]
    fn exponential_quantile_inverts_cdf() {
        let law = ExogenousLaw::exponential(1.5).unwrap();
        for &u in &[0.01, 0.5, 0.99] {
            assert!((law.cdf(law.quantile(u)) - u).abs() < 1e-12);
        }
        let tab = ExogenousLaw::tabulated(0.5, vec![1.0, 1.0, 0.0]).unwrap();
        assert!((tab.cdf(tab.quantile(0.3)) - 0.3).abs() < 1e-12);
        assert!(tab.quantile(0.8).is_infinite());
    }
}
