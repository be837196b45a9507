use proptest::prelude::*;
use proptest::test_runner::FileFailurePersistence;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sumlab::cityforge::{self, CostModel, NoiseSpec, TransportScenario};
use sumlab::crosscity::{self, CityFeatures, Continent, Dependent, GradientObs, IncomeGroup, SecondStepSpec};
use sumlab::econo;
use sumlab::gradient;
use sumlab::grid::GridSpec;
use sumlab::io;
use sumlab::model::{self, CityParams, StaticsParam};
use sumlab::report;
use sumlab::transport::TransportParams;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: Some(Box::new(FileFailurePersistence::Direct("proptest-regressions/invariants.txt"))),
        ..ProptestConfig::default()
    }
}

fn city_params() -> impl Strategy<Value = CityParams> {
    (
        0.2..0.5f64,
        0.05..0.3f64,
        0.5..2.0f64,
        0.3..1.5f64,
        8.0..11.0f64,
        30.0..150.0f64,
        -1.0..2.0f64,
        11.5..15.5f64,
    )
        .prop_map(|(beta, a, tfp, rho, ly, reach, lf, lp)| {
            let y = ly.exp();
            CityParams::new(beta, a, tfp, rho, y, y / reach, lf.exp(), lp.exp()).unwrap()
        })
}

proptest! {
    #![proptest_config(config(256))]

    #[test]
    fn density_equals_supply_over_demand_at_bid_rent(
        p in city_params(),
        rent_ratio in 0.0..1000f64.ln(),
        cost_share in 0.0..0.95f64,
    ) {
        let r0 = p.farm_rent * rent_ratio.exp();
        let u = model::utility_from_central_rent(p.alpha, p.beta, p.income, r0);
        let cost = cost_share * p.income;
        let r = model::bid_rent(p.income, cost, p.beta, r0).unwrap();
        let composed = model::density_from_rent(r, p.income, cost, &p).unwrap();
        let closed = model::density(p.income, cost, &p, u).unwrap();
        prop_assert!(((closed - composed) / composed).abs() <= 1e-12, "{closed} vs {composed}");
    }

    #[test]
    fn bid_rent_falls_with_cost(p in city_params(), c1 in 0.0..0.9f64, dc in 1e-3..0.09f64) {
        let r = |c: f64| model::bid_rent(p.income, c * p.income, p.beta, 100.0).unwrap();
        prop_assert!(r(c1 + dc) < r(c1));
    }

    #[test]
    fn recover_inverts_the_elasticities(beta in 0.05..0.95f64, a in 0.05..0.95f64) {
        let f = 1.0 / beta;
        let h = (1.0 - beta * a) / (beta * a);
        let s = gradient::recover_structural(f, h).unwrap();
        prop_assert!((s.beta - beta).abs() < 1e-12);
        prop_assert!((s.a_land - a).abs() < 1e-12);
        prop_assert!(s.valid);
    }

    #[test]
    fn ols_recovers_exact_lines(b0 in -10.0..10.0f64, b1 in -5.0..5.0f64, n in 5usize..50) {
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sqrt()).collect();
        let y: Vec<f64> = x.iter().map(|x| b0 + b1 * x).collect();
        let fit = econo::ols(&y, &[("x", &x)]).unwrap();
        prop_assert!((fit.coefficients[0] - b0).abs() < 1e-9);
        prop_assert!((fit.slope() - b1).abs() < 1e-9);
    }

    #[test]
    fn histogram_counts_every_finite_value(v in prop::collection::vec(-1e6..1e6f64, 1..200)) {
        let h = report::histogram(&v, report::BINS);
        prop_assert_eq!(h.iter().map(|b| b.2).sum::<usize>(), v.len());
        let d = report::distribution(&v).unwrap();
        prop_assert!(d.min <= d.q1 && d.q1 <= d.median && d.median <= d.q3 && d.q3 <= d.max);
    }
}

proptest! {
    #![proptest_config(config(24))]

    #[test]
    fn fringe_moves_with_the_expected_sign(p in city_params()) {
        for which in StaticsParam::ALL {
            let r = model::comparative_statics(&p, which, 0.05).unwrap();
            prop_assert!(r.agrees(), "{}: {} -> {}", which.name(), r.baseline_fringe, r.perturbed_fringe);
        }
    }

    #[test]
    fn grid_csv_round_trip_is_lossless(
        seed in 0u64..1000,
        sigma in 0.0..0.5f64,
        ad_rate in prop::option::of(0.0..3.0f64),
        mask_rate in 0.0..0.3f64,
    ) {
        let p = CityParams::new(0.3, 0.2, 1.2, 0.7, 40_000.0, 800.0, 3.0, 5.0e5).unwrap();
        let costs = CostModel::Transport(TransportScenario {
            params: TransportParams::from_income(40_000.0, 1.5, 0.08, 2.0).unwrap(),
            car_speed_kmh: 30.0,
            car_detour: 1.3,
            transit_speed_kmh: 20.0,
            transit_access_h: 0.2,
            sample_fraction: None,
        });
        let eq = model::solve_equilibrium(&p).unwrap();
        let cs = eq.fringe / 8.0;
        let spec = GridSpec::new(cs, cityforge::covering_radius(&p, &eq, &costs, cs), seed).unwrap();
        let noise = NoiseSpec { sigma_rent: sigma, sigma_density: sigma, ad_rate, mask_rate, congestion: None };
        let g = cityforge::simulate_city("rt,\"x\"", &p, &spec, &noise, &costs).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let (gp, cp, ap) = (dir.path().join("g.csv"), dir.path().join("c.csv"), dir.path().join("a.csv"));
        let grids = std::slice::from_ref(&g);
        io::write_grids(&gp, grids).unwrap();
        io::write_cities(&cp, grids).unwrap();
        io::write_ads(&ap, grids).unwrap();
        let back = io::read_grids(&gp, &cp, Some(&ap)).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(&back[0].meta, &g.meta);
        prop_assert_eq!(&back[0].cells, &g.cells);
        prop_assert_eq!(&back[0].ads, &g.ads);
    }

    #[test]
    fn second_step_ignores_row_order(seed in 0u64..1000, rotate in 0usize..60, spec in 1u8..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features: Vec<CityFeatures> = (0..60)
            .map(|i| CityFeatures {
                city_id: format!("c{i:02}"),
                population: rng.random_range(12.0f64..16.0).exp(),
                income: rng.random_range(8.0f64..11.0).exp(),
                farm_rent: rng.random_range(0.0f64..3.0).exp(),
                fuel_price: rng.random_range(0.5..1.5),
                commuting_speed: Some(rng.random_range(15.0..35.0)),
                monocentricity: rng.random(),
                coastal: rng.random(),
                gini: Some(rng.random_range(0.3..0.6)),
                informal_pct: Some(rng.random_range(0.0..40.0)),
                regulatory: Some(rng.random_range(0..3)),
                continent: Continent::ALL[i % Continent::ALL.len()],
                income_group: if i % 2 == 0 { IncomeGroup::High } else { IncomeGroup::Other },
                area_km2: None,
            })
            .collect();
        let obs: Vec<GradientObs> = features
            .iter()
            .map(|f| GradientObs {
                city_id: f.city_id.clone(),
                value: 20.0 + 2.0 * f.population.ln() + rng.sample::<f64, _>(StandardNormal),
                quality: None,
            })
            .collect();
        let spec = SecondStepSpec::new(Dependent::DensityGradient, spec).unwrap();
        let a = crosscity::second_step(&obs, &features, &spec).unwrap();
        let mut obs2 = obs.clone();
        obs2.rotate_left(rotate);
        let mut features2 = features.clone();
        features2.reverse();
        let b = crosscity::second_step(&obs2, &features2, &spec).unwrap();
        prop_assert_eq!(a.fit.coefficients, b.fit.coefficients);
        prop_assert_eq!(a.fit.std_errors, b.fit.std_errors);
    }
}
