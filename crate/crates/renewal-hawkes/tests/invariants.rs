use proptest::prelude::*;
use renewal_hawkes::expectations::{self, expectation_with_tables, PsiOptions};
use renewal_hawkes::maintenance::{c1_from_tables, c2_from_tables, C2Mode, CostParams};
use renewal_hawkes::renewal;
use renewal_hawkes::simulate::{intensity_replay, simulate, R3Convention};
use renewal_hawkes::volterra::{KernelTables, SolverPath};
use renewal_hawkes::{
    BaselineHazard, ExogenousLaw, Grid, ModelSpec, OffspringKernel, ProcessClass,
};

fn model(slope: f64, beta: f64, eta: f64, gamma: f64, class: ProcessClass) -> ModelSpec {
    ModelSpec::new(
        BaselineHazard::linear(slope).unwrap(),
        OffspringKernel::exponential(beta).unwrap(),
        eta,
        ExogenousLaw::exponential(gamma).unwrap(),
        class,
    )
    .unwrap()
}

fn class_strategy() -> impl Strategy<Value = ProcessClass> {
    prop_oneof![
        Just(ProcessClass::R1),
        Just(ProcessClass::R2),
        Just(ProcessClass::R3),
        Just(ProcessClass::Classical),
        Just(ProcessClass::Wfs),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn densities_partition_f_plus_g(slope in 0.1f64..4.0, gamma in 0.1f64..3.0) {
        let m = model(slope, 2.0, 1.0, gamma, ProcessClass::R1);
        let grid = Grid::new(0.01, 3.0).unwrap();
        let n2 = expectations::n2_density(&m, &grid);
        let n3 = expectations::n3_density(&m, &grid);
        for (j, t) in grid.times().into_iter().enumerate() {
            let total = m.exogenous.density(t) + m.baseline.density(t);
            prop_assert!((n2[j] + n3[j] - total).abs() <= 1e-12 * total.max(1.0));
        }
    }

    #[test]
    fn means_start_at_zero_and_never_decrease(
        slope in 0.2f64..3.0,
        beta in 0.5f64..4.0,
        eta in 0.0f64..2.5,
        gamma in 0.2f64..3.0,
        class in class_strategy(),
    ) {
        let m = model(slope, beta, eta, gamma, class);
        let grid = Grid::new(0.02, 1.5).unwrap();
        let tables = KernelTables::build(&m, &grid, SolverPath::Auto).unwrap();
        let c = expectation_with_tables(&m, &tables, PsiOptions::default()).unwrap();
        prop_assert_eq!(c.m[0], 0.0);
        for w in c.m.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn constant_rate_makes_r1_r2_classical(
        rate in 0.2f64..3.0,
        eta in 0.0f64..0.9,
        gamma in 0.2f64..3.0,
    ) {
        let m = ModelSpec::new(
            BaselineHazard::constant(rate).unwrap(),
            OffspringKernel::exponential(2.0).unwrap(),
            eta,
            ExogenousLaw::exponential(gamma).unwrap(),
            ProcessClass::R1,
        )
        .unwrap();
        let grid = Grid::new(0.01, 1.5).unwrap();
        let tables = KernelTables::build(&m, &grid, SolverPath::Auto).unwrap();
        let cl = &tables.m_classical;
        let tol = 5.0 * grid.delta * (1.0 + rate) * cl[grid.n];
        for class in [ProcessClass::R1, ProcessClass::R2, ProcessClass::Wfs] {
            let c = expectation_with_tables(&m.with_class(class), &tables, PsiOptions::default()).unwrap();
            let dev = c.m.iter().zip(cl).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(dev <= tol, "{:?}: {} > {}", class, dev, tol);
        }
    }

    #[test]
    fn optimum_is_invariant_under_cost_scaling(k in 0.01f64..100.0, c_p in 2.0f64..20.0) {
        let m = model(2.0, 2.0, 2.0, 1.0, ProcessClass::R1);
        let grid = Grid::new(0.02, 2.5).unwrap();
        let tables = KernelTables::build(&m, &grid, SolverPath::Auto).unwrap();
        let mean = expectation_with_tables(&m, &tables, PsiOptions::default()).unwrap().m;
        let renew = renewal::renewal_function(&m.exogenous, &grid).unwrap();
        let costs = CostParams::new(1.5, 2.0, 1.0, 5.0, c_p).unwrap();
        let a = c1_from_tables(&mean, &renew, &grid, &costs, (0.5, 2.5)).unwrap();
        let b = c1_from_tables(&mean, &renew, &grid, &costs.scaled(k).unwrap(), (0.5, 2.5)).unwrap();
        prop_assert!((a.optimum.t_star - b.optimum.t_star).abs() <= 1e-9);
        prop_assert!((b.optimum.value - k * a.optimum.value).abs() <= 1e-9 * b.optimum.value.abs());
    }

    #[test]
    fn bounds_gap_is_exact(gamma in 0.3f64..3.0, c_i in 1.0f64..5.0) {
        let m = model(2.0, 2.0, 0.5, gamma, ProcessClass::R2);
        let grid = Grid::new(0.02, 2.5).unwrap();
        let tables = KernelTables::build(&m, &grid, SolverPath::Auto).unwrap();
        let mean = expectation_with_tables(&m, &tables, PsiOptions::default()).unwrap().m;
        let renew = renewal::renewal_function(&m.exogenous, &grid).unwrap();
        let nhp = renewal::nhp_mean_at_y1(&m.baseline, &m.exogenous).unwrap();
        let costs = CostParams::new(1.5, c_i, 1.0, 5.0, 10.0).unwrap();
        let b = c2_from_tables(&mean, &renew, &[], nhp, &grid, &costs, (0.5, 2.5), C2Mode::Bounds).unwrap();
        let bounds = b.bounds.unwrap();
        for (t, (lo, hi)) in b.ts.iter().zip(bounds) {
            let gap = (c_i - 1.0) * (2.0 / (gamma * gamma)) / t;
            prop_assert!(((hi - lo) - gap).abs() <= 1e-12 * hi.abs().max(1.0));
        }
    }

    #[test]
    fn simulation_replays_deterministically(
        seed in any::<u64>(),
        class in prop_oneof![Just(ProcessClass::R1), Just(ProcessClass::R2), Just(ProcessClass::R3)],
    ) {
        let m = model(1.2, 2.0, 0.75, 1.0, class);
        let a = simulate(&m, 3.0, seed, R3Convention::Theorem3).unwrap();
        let b = simulate(&m, 3.0, seed, R3Convention::Theorem3).unwrap();
        prop_assert_eq!(&a, &b);
        let times = a.times();
        for w in times.windows(2) {
            prop_assert!(w[0] < w[1]);
        }
        for t in [0.5, 1.5, 2.9] {
            let v = intensity_replay(&m, &times, &a.renewals, t).unwrap();
            prop_assert!(v.is_finite() && v >= 0.0);
        }
    }
}
