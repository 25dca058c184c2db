//! Command implementations. Each returns the paths it wrote.

use std::path::{Path, PathBuf};

use renewal_hawkes::closed_form::{
    m2_piecewise, m3_matrix, m_exp, psi2_exp, DEntry, PiecewiseExpModel, U3Table,
};
use renewal_hawkes::expectations::{
    self, expectation_with_tables, ExpectationCurve, PsiOptions, R3Forcing, TailWeight,
};
use renewal_hawkes::maintenance::{c1_from_tables, c2_from_tables, n_i_table, C2Mode, Optimum};
use renewal_hawkes::renewal::{nhp_mean_at_y1, renewal_function};
use renewal_hawkes::simulate::{
    intensity_replay, monte_carlo_expectation, simulate_stream, R3Convention,
};
use renewal_hawkes::validation::{run_all, CheckResult, SuiteOptions};
use renewal_hawkes::volterra::{KernelTables, SolverPath};
use renewal_hawkes::{Grid, ModelSpec, ProcessClass};

use crate::config::RunConfig;
use crate::output::{prepare_dir, read_csv, write_csv, Header, TOOL};
use crate::{
    CliError, ExpectArgs, MethodArg, OptimizeArgs, R3ForcingArg, ReplayArgs, SimulateArgs,
    SolveArgs, SolverArg, TailArg, ValidateArgs,
};

fn psi_options(s: &SolveArgs) -> PsiOptions {
    PsiOptions {
        tail: match s.tail {
            TailArg::Survival => TailWeight::Survival,
            TailArg::Printed => TailWeight::Printed,
        },
        r3: match s.r3_forcing {
            R3ForcingArg::Printed => R3Forcing::Printed,
            R3ForcingArg::Counted => R3Forcing::Counted,
        },
        path: match s.solver {
            SolverArg::Auto => SolverPath::Auto,
            SolverArg::General => SolverPath::General,
        },
        allow_large_n: s.allow_large_n,
    }
}

fn out_dir(arg: &Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = arg
        .clone()
        .or_else(|| cfg.run.output.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    prepare_dir(&dir)?;
    Ok(dir)
}

fn classes(names: &[String], model: &ModelSpec) -> Result<Vec<ProcessClass>, CliError> {
    if names.is_empty() {
        return Ok(vec![model.class]);
    }
    names
        .iter()
        .map(|n| ProcessClass::parse(n).map_err(|e| CliError::Config(format!("--class: {e}"))))
        .collect()
}

fn num(x: f64) -> String {
    format!("{x}")
}

/// Mean counts and intensities, one `expect_<class>_<method>.csv` per class.
pub fn cmd_expect(a: &ExpectArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = RunConfig::load(&a.config)?;
    let model = cfg.model_spec()?;
    let grid = cfg.grid()?;
    let dir = out_dir(&a.out, &cfg)?;
    let opts = psi_options(&a.solve);
    let classes = classes(&a.class, &model)?;
    let method = match a.method {
        MethodArg::Grid => "grid",
        MethodArg::ClosedForm => "closed-form",
    };
    let tables = match a.method {
        MethodArg::Grid => Some(KernelTables::build(&model, &grid, opts.path)?),
        MethodArg::ClosedForm => None,
    };
    let mut written = Vec::new();
    for class in classes {
        let m = model.with_class(class);
        let curve = match &tables {
            Some(t) => expectation_with_tables(&m, t, opts)?,
            None => closed_form_curve(&m, &grid, opts)?,
        };
        if curve.overflow_warning {
            eprintln!("warning: {} mean exceeds 1e12 on the grid", class.name());
        }
        let header = Header::new(cfg.model_hash(), grid.delta, None)
            .with("class", class.name())
            .with("method", method)
            .with("tail", format!("{:?}", opts.tail).to_lowercase())
            .with("r3_forcing", opts.r3.name());
        let provenance = curve.provenance.name();
        let rows = (0..=grid.n).map(|j| {
            vec![
                num(grid.t(j)),
                num(curve.m[j]),
                num(curve.lambda[j]),
                provenance.to_string(),
            ]
        });
        let name = format!("expect_{}_{}.csv", class.name(), method);
        written.push(write_csv(
            &dir,
            &name,
            &header,
            &["t", "m", "lambda", "provenance"],
            rows,
        )?);
    }
    Ok(written)
}

/// Closed-form curve for an exponential kernel and exponential `Y`.
pub fn closed_form_curve(
    model: &ModelSpec,
    grid: &Grid,
    opts: PsiOptions,
) -> Result<ExpectationCurve, CliError> {
    let pm = PiecewiseExpModel::from_model(model)?;
    let m: Vec<f64> = match model.class {
        ProcessClass::Classical => grid.times().iter().map(|&t| m_exp(&pm, t)).collect(),
        ProcessClass::R2 => {
            let psi2 = |s: f64| psi2_exp(&pm, s).unwrap_or((f64::NAN, f64::NAN));
            grid.times()
                .iter()
                .map(|&t| m2_piecewise(&pm, psi2, t, grid.delta))
                .collect::<Result<_, _>>()?
        }
        ProcessClass::R3 => {
            let tables = KernelTables::build(model, grid, opts.path)?;
            let psi3 = expectations::psi3_table(model, &tables, opts)?;
            let u3 = U3Table::from_psi(grid.delta, &psi3.psi)?;
            grid.times()
                .iter()
                .map(|&t| m3_matrix(&pm, &u3, t, DEntry::Derived))
                .collect::<Result<_, _>>()?
        }
        c => {
            return Err(CliError::Config(format!(
                "no closed form for class {}; use --method grid",
                c.name()
            )))
        }
    };
    if m.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Numeric(format!(
            "closed form for {} is not finite on the grid",
            model.class.name()
        )));
    }
    let d = grid.delta;
    let lambda = (0..m.len())
        .map(|j| match j {
            0 => model.baseline.rate(0.0),
            _ => (m[j] - m[j - 1]) / d,
        })
        .collect();
    let overflow_warning = m.iter().any(|v| *v > 1e12);
    Ok(ExpectationCurve {
        grid: *grid,
        class: model.class,
        m,
        lambda,
        provenance: expectations::Provenance::ClosedForm,
        overflow_warning,
    })
}

/// Event logs and, from 100 replications on, a Monte-Carlo mean.
pub fn cmd_simulate(a: &SimulateArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = RunConfig::load(&a.config)?;
    let mut model = cfg.model_spec()?;
    if let Some(c) = &a.class {
        model = model.with_class(
            ProcessClass::parse(c).map_err(|e| CliError::Config(format!("--class: {e}")))?,
        );
    }
    let grid = match a.horizon {
        Some(h) => {
            Grid::new(cfg.grid.delta, h).map_err(|e| CliError::Config(format!("--horizon: {e}")))?
        }
        None => cfg.grid()?,
    };
    let dir = out_dir(&a.out, &cfg)?;
    let seed = a.seed.or(cfg.run.seed).unwrap_or(0);
    let conv = R3Convention::parse(&a.r3_convention)
        .map_err(|e| CliError::Config(format!("--r3-convention: {e}")))?;
    let header = Header::new(cfg.model_hash(), grid.delta, Some(seed))
        .with("class", model.class.name())
        .with("r3_convention", conv.name())
        .with("horizon", grid.horizon());
    let mut written = Vec::new();

    let (mut events, mut renewals) = (Vec::new(), Vec::new());
    for p in 0..a.log_paths {
        let log = simulate_stream(&model, grid.horizon(), seed, p as u64, conv)?;
        events.extend(
            log.events
                .iter()
                .map(|(t, k)| vec![p.to_string(), num(*t), k.name().to_string()]),
        );
        renewals.extend(log.renewals.iter().map(|t| vec![p.to_string(), num(*t)]));
    }
    let class = model.class.name();
    written.push(write_csv(
        &dir,
        &format!("events_{class}.csv"),
        &header,
        &["path", "t", "kind"],
        events,
    )?);
    written.push(write_csv(
        &dir,
        &format!("renewals_{class}.csv"),
        &header,
        &["path", "t"],
        renewals,
    )?);

    if a.reps >= 100 {
        let mc = monte_carlo_expectation(&model, &grid, a.reps, seed, conv)?;
        let h = header.clone().with("replications", mc.replications);
        let rows = (0..mc.times.len())
            .map(|j| vec![num(mc.times[j]), num(mc.mean[j]), num(mc.halfwidth[j])]);
        let name = format!("mc_{}.csv", model.class.name());
        written.push(write_csv(
            &dir,
            &name,
            &h,
            &["t", "mean", "halfwidth"],
            rows,
        )?);
    } else if a.reps > 1 {
        eprintln!(
            "note: {} replications are too few for a Monte-Carlo mean (at least 100); only event logs written",
            a.reps
        );
    }
    Ok(written)
}

fn summary(title: &str, o: &Optimum, method: &str, delta: f64, extra: &[(&str, f64)]) {
    println!("[{title}]");
    println!("T* = {:.4}", o.t_star);
    println!("C(T*) = {:.6}", o.value);
    println!("method = {method}");
    println!("delta = {delta}");
    for (k, v) in extra {
        println!("{k} = {v:.4}");
    }
    if o.boundary {
        println!("note = minimum at an end of the scanned range");
    }
    if o.flat {
        println!("note = curve is flat to rounding");
    }
}

/// Cost-rate curves and optimal replacement times.
pub fn cmd_optimize(a: &OptimizeArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = RunConfig::load(&a.config)?;
    let model = cfg.model_spec()?;
    let grid = cfg.grid()?;
    let costs = cfg.costs()?;
    let dir = out_dir(&a.out, &cfg)?;
    let opts = psi_options(&a.solve);
    let range = match a.range.as_slice() {
        [] => (0.5, grid.horizon()),
        [lo, hi] if lo < hi => (*lo, *hi),
        _ => {
            return Err(CliError::Config(format!(
                "--range needs two increasing values, got {:?}",
                a.range
            )))
        }
    };
    let mode = match a.mode.as_str() {
        "exact" => C2Mode::Exact,
        "bounds" => C2Mode::Bounds,
        m => {
            return Err(CliError::Config(format!(
                "--mode must be exact or bounds, got `{m}`"
            )))
        }
    };
    let tables = KernelTables::build(&model, &grid, opts.path)?;
    let renew = renewal_function(&model.exogenous, &grid)?;
    let n_i = if a.problem == 2 {
        match (n_i_table(&model, &grid), mode) {
            (Ok(v), _) => Some(v),
            (Err(e), C2Mode::Exact) => return Err(e.into()),
            (Err(_), C2Mode::Bounds) => None,
        }
    } else {
        None
    };
    let mut written = Vec::new();
    for class in classes(&a.class, &model)? {
        let m = expectation_with_tables(&model.with_class(class), &tables, opts)?;
        let mut header = Header::new(cfg.model_hash(), grid.delta, None)
            .with("class", class.name())
            .with("problem", a.problem)
            .with("range", format!("{} {}", range.0, range.1));
        let name = format!("optimize_p{}_{}.csv", a.problem, class.name());
        let title = format!("{} problem {}", class.name(), a.problem);
        let columns = ["T", "C", "lower", "upper"];
        if a.problem == 1 {
            let c = c1_from_tables(&m.m, &renew, &grid, &costs, range)?;
            summary(&title, &c.optimum, "exact", grid.delta, &[]);
            let rows =
                c.ts.iter()
                    .zip(&c.values)
                    .map(|(t, v)| vec![num(*t), num(*v), String::new(), String::new()]);
            written.push(write_csv(&dir, &name, &header, &columns, rows)?);
            continue;
        }
        let nhp = nhp_mean_at_y1(&model.baseline, &model.exogenous)?;
        let b = c2_from_tables(&m.m, &renew, &[], nhp, &grid, &costs, range, C2Mode::Bounds)?;
        let bounds = b.bounds.clone().unwrap_or_default();
        let (lo, hi) = b.bound_optima.expect("bounds mode sets both optima");
        let mut extra = vec![
            ("lower-bound argmin", lo.t_star),
            ("upper-bound argmin", hi.t_star),
        ];
        let exact = match &n_i {
            Some((v, method)) => {
                header = header.with("n_i", method);
                let e = c2_from_tables(&m.m, &renew, v, nhp, &grid, &costs, range, C2Mode::Exact)?;
                Some((e, *method))
            }
            None => None,
        };
        match (&exact, mode) {
            (Some((e, method)), C2Mode::Exact) => summary(
                &title,
                &e.optimum,
                &format!("exact, E[N_I] {method}"),
                grid.delta,
                &extra,
            ),
            _ => {
                if let Some((e, _)) = &exact {
                    extra.push(("exact argmin", e.optimum.t_star));
                }
                summary(&title, &b.optimum, "bounds midpoint", grid.delta, &extra)
            }
        }
        let rows = b.ts.iter().enumerate().map(|(k, t)| {
            vec![
                num(*t),
                exact
                    .as_ref()
                    .map(|(e, _)| num(e.values[k]))
                    .unwrap_or_default(),
                num(bounds[k].0),
                num(bounds[k].1),
            ]
        });
        written.push(write_csv(&dir, &name, &header, &columns, rows)?);
    }
    Ok(written)
}

fn path0_times(path: &Path, columns: &[&str]) -> Result<Vec<f64>, CliError> {
    let (cols, rows) = read_csv(path)?;
    if cols != columns {
        return Err(CliError::Config(format!(
            "{}: expected columns {}, got {}",
            path.display(),
            columns.join(","),
            cols.join(",")
        )));
    }
    rows.iter()
        .filter(|r| r[0] == "0")
        .map(|r| {
            r[1].parse()
                .map_err(|_| CliError::Config(format!("{}: bad time `{}`", path.display(), r[1])))
        })
        .collect()
}

/// Intensity of a fixed history at the requested times.
pub fn cmd_replay(a: &ReplayArgs) -> Result<Vec<PathBuf>, CliError> {
    let cfg = RunConfig::load(&a.config)?;
    let model = cfg.model_spec()?;
    let grid = cfg.grid()?;
    let dir = out_dir(&a.out, &cfg)?;
    let events = match &a.log {
        Some(p) => path0_times(p, &["path", "t", "kind"])?,
        None => a.events.clone(),
    };
    let renewals = match &a.renewal_log {
        Some(p) => path0_times(p, &["path", "t"])?,
        None => a.renewals.clone(),
    };
    let at = if a.at.is_empty() {
        grid.times()
    } else {
        a.at.clone()
    };
    let rows = at
        .iter()
        .map(|&t| {
            Ok(vec![
                num(t),
                num(intensity_replay(&model, &events, &renewals, t)?),
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let header = Header::new(cfg.model_hash(), grid.delta, None)
        .with("events", events.len())
        .with("renewals", renewals.len());
    Ok(vec![write_csv(
        &dir,
        "replay.csv",
        &header,
        &["t", "lambda"],
        rows,
    )?])
}

fn check_json(r: &CheckResult) -> serde_json::Value {
    serde_json::json!({
        "id": r.id,
        "name": r.name,
        "passed": r.passed,
        "seconds": r.seconds,
        "details": r.details,
        "variants": r.variants.iter().map(|(q, a)| serde_json::json!({"question": q, "answer": a})).collect::<Vec<_>>(),
    })
}

/// Observed order `log2(|m_d - m_{d/2}| / |m_{d/2} - m_{d/4}|)` at half the horizon.
pub fn halving_order(cfg: &RunConfig) -> Result<serde_json::Value, CliError> {
    let model = cfg.model_spec()?;
    let base = cfg.grid()?;
    let t = 0.5 * base.horizon();
    let mut values = Vec::new();
    for k in 0..3 {
        let grid = Grid::new(base.delta / f64::from(1 << k), base.horizon())?;
        let tables = KernelTables::build(&model, &grid, SolverPath::Auto)?;
        values.push(expectation_with_tables(&model, &tables, PsiOptions::default())?.mean_at(t));
    }
    let order = ((values[0] - values[1]).abs() / (values[1] - values[2]).abs()).log2();
    println!(
        "halving: class {}, m({t}) = {} / {} / {}, observed order {order:.3}",
        model.class.name(),
        values[0],
        values[1],
        values[2]
    );
    Ok(serde_json::json!({
        "class": model.class.name(),
        "delta": base.delta,
        "t": t,
        "m": values,
        "order": order,
    }))
}

/// Runs the acceptance suite, writes `verdict.json`, fails with exit 3 on any FAIL.
pub fn cmd_validate(a: &ValidateArgs) -> Result<Vec<PathBuf>, CliError> {
    prepare_dir(&a.out)?;
    let halving = match &a.halving {
        Some(p) => Some(halving_order(&RunConfig::load(p)?)?),
        None => None,
    };
    let opts = SuiteOptions {
        mc_replications: a.mc_reps,
        immigrant_replications: a.ni_reps,
        seed: a.seed,
        ..SuiteOptions::default()
    };
    let results = run_all(opts);
    for r in &results {
        println!(
            "{} criterion {:>2}: {} ({:.1}s)",
            if r.passed { "PASS" } else { "FAIL" },
            r.id,
            r.name,
            r.seconds
        );
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    let verdict = serde_json::json!({
        "tool": TOOL,
        "passed": failed.is_empty(),
        "options": {
            "mc_replications": opts.mc_replications,
            "immigrant_replications": opts.immigrant_replications,
            "mc_grid_delta": opts.mc_grid_delta,
            "seed": opts.seed,
        },
        "checks": results.iter().map(check_json).collect::<Vec<_>>(),
        "halving": halving,
    });
    let path = a.out.join("verdict.json");
    let text = serde_json::to_string_pretty(&verdict)
        .map_err(|e| CliError::Io(format!("verdict: {e}")))?;
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    if failed.is_empty() {
        Ok(vec![path])
    } else {
        Err(CliError::Validation(format!(
            "criteria {failed:?} failed; see {}",
            path.display()
        )))
    }
}
