//! Thinning simulation of every process class, deterministic intensity replay
//! and Monte-Carlo estimates of the mean counting function.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Grid, ModelSpec, OffspringKernel, ProcessClass};

/// Origin of a counted event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Immigrant,
    Offspring,
}

impl EventKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Immigrant => "immigrant",
            Self::Offspring => "offspring",
        }
    }
}

/// Counting convention for the immigrant that triggers an `R3` renewal after
/// the exogenous time has passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum R3Convention {
    /// The triggering immigrant is not counted and has no offspring.
    #[default]
    Theorem3,
    /// The triggering immigrant is counted and excites offspring.
    AppendixB,
}

impl R3Convention {
    pub fn name(self) -> &'static str {
        match self {
            Self::Theorem3 => "theorem3",
            Self::AppendixB => "appendixB",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "theorem3" => Ok(Self::Theorem3),
            "appendixB" | "appendixb" => Ok(Self::AppendixB),
            _ => Err(Error::Config(format!(
                "unknown R3 convention '{s}' (expected theorem3 or appendixB)"
            ))),
        }
    }
}

/// One simulated path on `[0, horizon]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventLog {
    pub events: Vec<(f64, EventKind)>,
    pub renewals: Vec<f64>,
    pub horizon: f64,
    pub seed: u64,
    /// Paths discarded because two times coincided in floating point.
    pub reruns: u32,
}

impl EventLog {
    /// `N(t)`: counted events in `[0, t]`.
    pub fn count_at(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.0 <= t)
    }

    /// Event times only.
    pub fn times(&self) -> Vec<f64> {
        self.events.iter().map(|e| e.0).collect()
    }
}

/// Running excitation `sum_i eta h(t - tau_i)`.
enum Excitation {
    Exponential {
        beta: f64,
        eta: f64,
        at: f64,
        value: f64,
    },
    Tabulated {
        eta: f64,
        kernel: OffspringKernel,
        times: Vec<f64>,
    },
}

impl Excitation {
    fn new(model: &ModelSpec) -> Self {
        match model.kernel {
            OffspringKernel::Exponential { beta } => Self::Exponential {
                beta,
                eta: model.eta,
                at: 0.0,
                value: 0.0,
            },
            OffspringKernel::Tabulated(_) => Self::Tabulated {
                eta: model.eta,
                kernel: model.kernel.clone(),
                times: Vec::new(),
            },
        }
    }

    fn value(&self, t: f64) -> f64 {
        match self {
            Self::Exponential {
                beta, at, value, ..
            } => value * (-beta * (t - at)).exp(),
            Self::Tabulated { eta, kernel, times } => {
                times.iter().map(|&s| eta * kernel.density(t - s)).sum()
            }
        }
    }

    fn bound(&self, a: f64, b: f64) -> f64 {
        match self {
            Self::Exponential { .. } => self.value(a),
            Self::Tabulated { eta, kernel, times } => times
                .iter()
                .map(|&s| eta * kernel.sup_on(a - s, b - s))
                .sum(),
        }
    }

    fn push(&mut self, t: f64) {
        match self {
            Self::Exponential {
                beta,
                eta,
                at,
                value,
            } => {
                *value = *value * (-*beta * (t - *at)).exp() + *eta * *beta;
                *at = t;
            }
            Self::Tabulated { kernel, times, .. } => {
                let end = kernel.support_end();
                times.retain(|&s| t - s <= end);
                times.push(t);
            }
        }
    }
}

/// Whether a path hit a floating-point tie.
enum PathOutcome {
    Done(EventLog),
    Tie,
}

fn exogenous_draw(model: &ModelSpec, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.random();
    model.exogenous.quantile(u)
}

fn one_path(
    model: &ModelSpec,
    horizon: f64,
    seed: u64,
    r3: R3Convention,
    rng: &mut ChaCha8Rng,
) -> Result<PathOutcome> {
    let class = model.class;
    let uses_exogenous = matches!(
        class,
        ProcessClass::R1 | ProcessClass::R2 | ProcessClass::R3
    );
    let mut origin = 0.0;
    let mut next_exo = if uses_exogenous {
        exogenous_draw(model, rng)
    } else {
        f64::INFINITY
    };
    // R3: an immigrant was counted since the last renewal.
    let mut seen_immigrant = false;
    // R3: the exogenous time has passed and the next immigrant renews.
    let mut waiting = false;
    let mut exc = Excitation::new(model);
    let mut events: Vec<(f64, EventKind)> = Vec::new();
    let mut renewals = Vec::new();
    let mut t = 0.0;
    let mut window = 0.5;
    let renew = |at: f64, origin: &mut f64, renewals: &mut Vec<f64>| {
        *origin = at;
        renewals.push(at);
    };
    while t < horizon {
        let end = (t + window).min(next_exo).min(horizon);
        let bound = model.baseline.sup_on(t - origin, end - origin) + exc.bound(t, end);
        let cand = if bound > 0.0 {
            t + rng.sample::<f64, _>(Exp1) / bound
        } else {
            f64::INFINITY
        };
        if cand >= end {
            t = end;
            window *= 2.0;
            if t >= next_exo {
                match class {
                    ProcessClass::R3 if !seen_immigrant => {
                        waiting = true;
                        next_exo = f64::INFINITY;
                    }
                    _ => {
                        renew(t, &mut origin, &mut renewals);
                        seen_immigrant = false;
                        next_exo = t + exogenous_draw(model, rng);
                    }
                }
            }
            continue;
        }
        t = cand;
        let mu = model.baseline.rate(t - origin);
        let lam = mu + exc.value(t);
        if lam > bound * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::BoundViolation {
                t,
                intensity: lam,
                bound,
            });
        }
        window = (4.0 / bound).clamp(1e-6, 0.5);
        let u: f64 = rng.random();
        if u * bound > lam {
            continue;
        }
        if events.last().is_some_and(|e| e.0 == t) || renewals.last() == Some(&t) {
            return Ok(PathOutcome::Tie);
        }
        let immigrant = rng.random::<f64>() * lam < mu;
        if !immigrant {
            events.push((t, EventKind::Offspring));
            exc.push(t);
            continue;
        }
        let mut counted = true;
        match class {
            ProcessClass::Classical | ProcessClass::R1 => {}
            ProcessClass::Wfs => renew(t, &mut origin, &mut renewals),
            ProcessClass::R2 => {
                renew(t, &mut origin, &mut renewals);
                next_exo = t + exogenous_draw(model, rng);
            }
            ProcessClass::R3 => {
                if waiting {
                    renew(t, &mut origin, &mut renewals);
                    waiting = false;
                    seen_immigrant = false;
                    next_exo = t + exogenous_draw(model, rng);
                    counted = r3 == R3Convention::AppendixB;
                } else {
                    seen_immigrant = true;
                }
            }
        }
        if counted {
            events.push((t, EventKind::Immigrant));
            exc.push(t);
        }
    }
    Ok(PathOutcome::Done(EventLog {
        events,
        renewals,
        horizon,
        seed,
        reruns: 0,
    }))
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const MAX_RERUNS: u32 = 100;

fn path_from(
    model: &ModelSpec,
    horizon: f64,
    seed: u64,
    r3: R3Convention,
    rng: &mut ChaCha8Rng,
) -> Result<EventLog> {
    let mut reruns = 0;
    loop {
        match one_path(model, horizon, seed, r3, rng)? {
            PathOutcome::Done(mut log) => {
                log.reruns = reruns;
                return Ok(log);
            }
            PathOutcome::Tie if reruns < MAX_RERUNS => reruns += 1,
            PathOutcome::Tie => {
                return Err(Error::Convergence(format!(
                    "{MAX_RERUNS} consecutive paths hit tied event times"
                )))
            }
        }
    }
}

/// Simulates one path of `model.class` on `[0, horizon]` by thinning.
pub fn simulate(model: &ModelSpec, horizon: f64, seed: u64, r3: R3Convention) -> Result<EventLog> {
    simulate_stream(model, horizon, seed, 0, r3)
}

/// As [`simulate`] on RNG stream `stream`; replication `k` of
/// [`monte_carlo_expectation`] is stream `k`.
pub fn simulate_stream(
    model: &ModelSpec,
    horizon: f64,
    seed: u64,
    stream: u64,
    r3: R3Convention,
) -> Result<EventLog> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Config(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    path_from(model, horizon, seed, r3, &mut rng_for(seed, stream))
}

/// `lambda(t) = mu(t - last renewal <= t) + sum_{tau_i < t} eta h(t - tau_i)`.
pub fn intensity_replay(
    model: &ModelSpec,
    events: &[f64],
    renewals: &[f64],
    t: f64,
) -> Result<f64> {
    for (name, xs) in [("event", events), ("renewal", renewals)] {
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config(format!(
                "{name} times must be strictly increasing"
            )));
        }
    }
    let last = renewals
        .iter()
        .take_while(|&&r| r <= t)
        .last()
        .copied()
        .unwrap_or(0.0);
    let exc: f64 = events
        .iter()
        .take_while(|&&s| s < t)
        .map(|&s| model.eta * model.kernel.density(t - s))
        .sum();
    Ok(model.baseline.rate(t - last) + exc)
}

/// Monte-Carlo mean of `N(t)` with 95% half-widths.
#[derive(Debug, Clone, PartialEq)]
pub struct McEstimate {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub halfwidth: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub reruns: u64,
}

impl McEstimate {
    /// Whether the interval at node `j` covers `value`.
    pub fn covers(&self, j: usize, value: f64) -> bool {
        (self.mean[j] - value).abs() <= self.halfwidth[j]
    }
}

const CHUNK: usize = 256;

/// Runs `replications` independent paths; replication `r` uses stream `r` of `seed`.
pub fn monte_carlo_expectation(
    model: &ModelSpec,
    grid: &Grid,
    replications: usize,
    seed: u64,
    r3: R3Convention,
) -> Result<McEstimate> {
    if replications < 100 {
        return Err(Error::Config(format!(
            "at least 100 replications are needed, got {replications}"
        )));
    }
    let times = grid.times();
    let horizon = grid.horizon();
    let chunks: Vec<(usize, usize)> = (0..replications)
        .step_by(CHUNK)
        .map(|a| (a, (a + CHUNK).min(replications)))
        .collect();
    let partial: Vec<Result<(Vec<f64>, Vec<f64>, u64)>> = chunks
        .par_iter()
        .map(|&(a, b)| {
            let mut sum = vec![0.0; times.len()];
            let mut sq = vec![0.0; times.len()];
            let mut reruns = 0u64;
            for r in a..b {
                let log = path_from(model, horizon, seed, r3, &mut rng_for(seed, r as u64))?;
                reruns += log.reruns as u64;
                let mut k = 0;
                for (j, &t) in times.iter().enumerate() {
                    while k < log.events.len() && log.events[k].0 <= t {
                        k += 1;
                    }
                    let c = k as f64;
                    sum[j] += c;
                    sq[j] += c * c;
                }
            }
            Ok((sum, sq, reruns))
        })
        .collect();
    let mut sum = vec![0.0; times.len()];
    let mut sq = vec![0.0; times.len()];
    let mut reruns = 0;
    for p in partial {
        let (s, q, r) = p?;
        for j in 0..times.len() {
            sum[j] += s[j];
            sq[j] += q[j];
        }
        reruns += r;
    }
    let n = replications as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let halfwidth = sq
        .iter()
        .zip(&mean)
        .map(|(q, m)| {
            let var = ((q - n * m * m) / (n - 1.0)).max(0.0);
            1.96 * var.sqrt() / n.sqrt()
        })
        .collect();
    Ok(McEstimate {
        times,
        mean,
        halfwidth,
        replications,
        seed,
        reruns,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BaselineHazard, ExogenousLaw};

    fn fixture() -> ModelSpec {
        ModelSpec::new(
            BaselineHazard::linear(1.2).unwrap(),
            OffspringKernel::exponential(2.0).unwrap(),
            0.75,
            ExogenousLaw::exponential(1.0).unwrap(),
            ProcessClass::R1,
        )
        .unwrap()
    }

    #[test]
    fn replay_examples() {
        let m = fixture();
        let ev = [0.5, 1.37];
        let rn = [0.67, 1.56, 2.16];
        assert!((intensity_replay(&m, &ev, &rn, 0.3).unwrap() - 0.36).abs() < 1e-12);
        let v = intensity_replay(&m, &ev, &rn, 0.6).unwrap();
        assert!((v - (0.72 + 1.5 * (-0.2f64).exp())).abs() < 1e-12);
        assert!((v - 1.948096).abs() < 1e-6);
        let w = intensity_replay(&m, &ev, &rn, 1.0).unwrap();
        assert!((w - 0.94782).abs() < 1e-5);
        assert!(intensity_replay(&m, &[1.0, 0.5], &rn, 1.0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let m = fixture().with_class(ProcessClass::R3);
        let a = simulate(&m, 2.0, 7, R3Convention::Theorem3).unwrap();
        let b = simulate(&m, 2.0, 7, R3Convention::Theorem3).unwrap();
        assert_eq!(a, b);
        assert!(a.events.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(a.renewals.windows(2).all(|w| w[0] < w[1]));
        assert!(a.events.iter().all(|e| e.0 >= 0.0 && e.0 <= 2.0));
    }

    #[test]
    fn poisson_reduction() {
        let m = ModelSpec::new(
            BaselineHazard::constant(3.0).unwrap(),
            OffspringKernel::exponential(2.0).unwrap(),
            0.0,
            ExogenousLaw::exponential(1.0).unwrap(),
            ProcessClass::Classical,
        )
        .unwrap();
        let g = Grid::new(0.5, 2.0).unwrap();
        let est = monte_carlo_expectation(&m, &g, 4000, 3, R3Convention::Theorem3).unwrap();
        assert!(est.covers(4, 6.0) || (est.mean[4] - 6.0).abs() < 1.5 * est.halfwidth[4]);
        assert!(est.mean.windows(2).all(|w| w[0] <= w[1]));
        assert!(monte_carlo_expectation(&m, &g, 10, 3, R3Convention::Theorem3).is_err());
    }

    #[test]
    fn excitation_jump_matches_kernel_at_zero() {
        let m = fixture();
        let before = intensity_replay(&m, &[0.5], &[], 0.5).unwrap();
        let after = intensity_replay(&m, &[0.5], &[], 0.5 + 1e-12).unwrap();
        assert!((after - before - 1.5).abs() < 1e-9);
    }
}
