//! Ensemble runs: draw cities from a [`RunConfig`], simulate them, estimate
//! every configured spec, then run the cross-city regressions.
//!
//! Per-city work runs on the rayon pool; all outputs are ordered by city
//! index, so results do not depend on scheduling.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cityforge::{self, Congestion, CostModel, NoiseSpec, TransportScenario};
use crate::config::RunConfig;
use crate::crosscity::{self, CityFeatures, Continent, Dependent, GradientObs, IncomeGroup, SecondStepSpec, Subset};
use crate::econo::{ChowResult, FitResult, Method};
use crate::error::{Error, Result};
use crate::gradient::{self, DataQuality, SpecName, Target};
use crate::grid::{CityGrid, GridSpec};
use crate::io::{self, ResultRow};
use crate::model::{self, CityParams};
use crate::transport::TransportParams;

/// One city's generating inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct CityDraw {
    pub city_id: String,
    pub params: CityParams,
    pub scenario: TransportScenario,
    /// Model-independent characteristics; area and speed come later.
    pub features: CityFeatures,
    pub grid_seed: u64,
}

pub fn city_id(index: usize) -> String {
    format!("city-{index:04}")
}

fn rng_for(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Linear commuting cost per km matching the cheaper mode's marginal cost.
pub fn linear_cost(s: &TransportScenario) -> f64 {
    let transit = s.params.trips_per_period * s.params.wage / s.transit_speed_kmh;
    s.car_cost_per_km().min(transit)
}

/// Draws city `index` of the ensemble. Draws come from a stream of their
/// own, so a city does not change when the ensemble grows.
pub fn draw_city(cfg: &RunConfig, index: usize) -> Result<CityDraw> {
    let mut rng = rng_for(cfg.seed, index);
    let mut u = || rng.random::<f64>();
    let c = &cfg.city;
    let (beta, a_land, tfp, rho) = (c.beta.at(u()), c.a_land.at(u()), c.tfp.at(u()), c.rho.at(u()));
    let (income, population, farm_rent, land_share) =
        (c.income.at(u()), c.population.at(u()), c.farm_rent.at(u()), c.land_share.at(u()));
    let t = &cfg.transport;
    let params = TransportParams::from_income(
        income,
        t.fuel_price.at(u()),
        t.fuel_efficiency.at(u()),
        t.transit_fare.at(u()),
    )?;
    let scenario = TransportScenario {
        params,
        car_speed_kmh: t.car_speed_kmh.at(u()),
        car_detour: t.car_detour.at(u()),
        transit_speed_kmh: t.transit_speed_kmh.at(u()),
        transit_access_h: t.transit_access_h.at(u()),
        sample_fraction: t.sample_fraction,
    };
    scenario.validate()?;
    let city = CityParams::new(beta, a_land, tfp, rho, income, linear_cost(&scenario), farm_rent, population)?
        .with_land_share(land_share)?;

    let f = &cfg.features;
    let features = CityFeatures {
        city_id: city_id(index),
        population,
        income,
        farm_rent,
        fuel_price: params.fuel_price,
        commuting_speed: None,
        monocentricity: u(),
        coastal: u() < f.coastal_share,
        gini: Some(f.gini.at(u())),
        informal_pct: Some(f.informal_pct.at(u())),
        regulatory: Some(((u() * 3.0) as u8).min(2)),
        continent: Continent::ALL[((u() * 6.0) as usize).min(5)],
        income_group: if income >= f.high_income_threshold {
            IncomeGroup::High
        } else {
            IncomeGroup::Other
        },
        area_km2: None,
    };
    let grid_seed = rng.random::<u64>();
    Ok(CityDraw {
        city_id: city_id(index),
        params: city,
        scenario,
        features,
        grid_seed,
    })
}

pub fn noise_spec(cfg: &RunConfig) -> NoiseSpec {
    let n = &cfg.noise;
    NoiseSpec {
        sigma_rent: n.sigma_rent,
        sigma_density: n.sigma_density,
        ad_rate: n.ad_rate,
        mask_rate: n.mask_rate,
        congestion: (n.congestion_sigma > 0.0 || n.congestion_loading != 0.0).then_some(Congestion {
            sigma_time: n.congestion_sigma,
            rent_loading: n.congestion_loading,
        }),
    }
}

/// Simulates one drawn city and completes its features from the grid.
pub fn simulate_draw(draw: &CityDraw, cfg: &RunConfig) -> Result<(CityGrid, CityFeatures)> {
    let eq = model::solve_equilibrium(&draw.params)?;
    let costs = CostModel::Transport(draw.scenario);
    let cell = eq.fringe / cfg.cells_per_fringe;
    let spec = GridSpec::new(cell, cityforge::covering_radius(&draw.params, &eq, &costs, cell), draw.grid_seed)?;
    let grid = cityforge::simulate_city(&draw.city_id, &draw.params, &spec, &noise_spec(cfg), &costs)?;
    let mut features = draw.features.clone();
    features.population = grid.total_population();
    features.commuting_speed = crosscity::density_weighted_speed(&grid);
    features.area_km2 = Some(crosscity::urbanized_area(&grid));
    Ok((grid, features))
}

#[derive(Debug, Clone)]
pub struct Ensemble {
    pub grids: Vec<CityGrid>,
    pub features: Vec<CityFeatures>,
    /// Cities that could not be generated: id, reason code, message.
    pub failed: Vec<(String, &'static str, String)>,
}

pub fn simulate_ensemble(cfg: &RunConfig) -> Result<Ensemble> {
    let outcomes: Vec<(String, Result<(CityGrid, CityFeatures)>)> = (0..cfg.cities)
        .into_par_iter()
        .map(|i| (city_id(i), draw_city(cfg, i).and_then(|d| simulate_draw(&d, cfg))))
        .collect();
    let mut e = Ensemble {
        grids: Vec::new(),
        features: Vec::new(),
        failed: Vec::new(),
    };
    for (id, r) in outcomes {
        match r {
            Ok((g, f)) => {
                e.grids.push(g);
                e.features.push(f);
            }
            Err(err) => e.failed.push((id, err.reason_code(), err.to_string())),
        }
    }
    Ok(e)
}

/// Fits every spec × method on every city.
pub fn estimate_all(grids: &[CityGrid], specs: &[SpecName], methods: &[Method], min_obs: usize) -> Vec<ResultRow> {
    grids
        .par_iter()
        .map(|g| {
            let quality = gradient::data_quality(g);
            let mut rows = Vec::new();
            for &name in specs {
                for &method in methods {
                    // the distance spec has a single (OLS) variant
                    if name == SpecName::R1 && method == Method::Tsls {
                        continue;
                    }
                    let o = gradient::analyze_city(g, name, method, min_obs);
                    rows.extend(io::result_rows(&o, &quality));
                }
            }
            rows
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Method whose main-spec gradients feed the second step.
pub fn second_step_method(methods: &[Method]) -> Method {
    if methods.contains(&Method::Ols) {
        Method::Ols
    } else {
        methods.first().copied().unwrap_or(Method::Ols)
    }
}

/// Gradient observations of one target under `spec`/`method`.
pub fn gradient_obs(rows: &[ResultRow], spec: SpecName, method: Method, target: Target) -> Vec<GradientObs> {
    rows.iter()
        .filter(|r| r.spec == spec && r.method == method && r.target == target && r.is_ok())
        .filter_map(|r| {
            Some(GradientObs {
                city_id: r.city_id.clone(),
                value: r.slope?,
                quality: r.spatial_cover.map(|s| DataQuality {
                    market_cover: r.market_cover,
                    spatial_cover: s,
                }),
            })
        })
        .collect()
}

/// Reason code and message of a step that did not produce a fit.
pub type Failed = (&'static str, String);

/// An urban-area fit and the number of cities it dropped.
pub type AreaFit = (FitResult, usize);

#[derive(Debug, Clone)]
pub struct SecondStepReport {
    pub dependent: Dependent,
    pub specification: u8,
    pub outcome: std::result::Result<crosscity::SecondStepResult, Failed>,
}

pub fn second_step_all(rows: &[ResultRow], features: &[CityFeatures], method: Method) -> Vec<SecondStepReport> {
    let mut out = Vec::new();
    for dependent in [Dependent::RentGradient, Dependent::DensityGradient] {
        let target = match dependent {
            Dependent::RentGradient => Target::Rent,
            Dependent::DensityGradient => Target::Density,
        };
        let obs = gradient_obs(rows, SpecName::Main, method, target);
        for specification in 1..=3 {
            let spec = SecondStepSpec::new(dependent, specification).expect("1..=3");
            out.push(SecondStepReport {
                dependent,
                specification,
                outcome: crosscity::second_step(&obs, features, &spec).map_err(|e| (e.reason_code(), e.to_string())),
            });
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct UrbanAreaReport {
    pub fits: Vec<(Subset, std::result::Result<AreaFit, Failed>)>,
    pub chow: std::result::Result<ChowResult, Failed>,
}

pub fn urban_area_all(features: &[CityFeatures]) -> UrbanAreaReport {
    let fits = [Subset::All, Subset::High, Subset::Other]
        .into_iter()
        .map(|s| {
            (
                s,
                crosscity::urban_area_regression(features, s).map_err(|e| (e.reason_code(), e.to_string())),
            )
        })
        .collect();
    UrbanAreaReport {
        fits,
        chow: crosscity::chow_split_test(features).map_err(|e| (e.reason_code(), e.to_string())),
    }
}

/// One named pass/fail check of a pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Invariants a healthy run satisfies: bookkeeping reconciles, the main
/// spec recovers the generating elasticities, the variants agree in sign,
/// and urban areas grow with population and shrink with farmland rent.
pub fn run_checks(grids: &[CityGrid], rows: &[ResultRow], specs: &[SpecName], methods: &[Method], urban: &UrbanAreaReport) -> Vec<Check> {
    let mut checks = Vec::new();
    let cells: BTreeMap<&str, usize> = grids.iter().map(|g| (g.meta.city_id.as_str(), g.cells.len())).collect();
    let truth: BTreeMap<&str, CityParams> = grids
        .iter()
        .filter_map(|g| Some((g.meta.city_id.as_str(), g.meta.truth?)))
        .collect();

    let bad: Vec<String> = rows
        .iter()
        .filter(|r| r.is_ok())
        .filter(|r| {
            let used = r.n_obs.unwrap_or(0) + r.skipped_missing + r.skipped_regressor + r.skipped_zero_dist;
            cells.get(r.city_id.as_str()) != Some(&used)
        })
        .map(|r| format!("{}/{}/{}", r.city_id, r.spec.as_str(), r.target.as_str()))
        .collect();
    let pairs = specs.len() * methods.len() - usize::from(specs.contains(&SpecName::R1) && methods.contains(&Method::Tsls));
    let expected_rows = grids.len() * pairs * 2;
    checks.push(Check {
        name: "cell counts reconcile".into(),
        passed: bad.is_empty() && rows.len() == expected_rows,
        detail: format!("{} rows (expected {expected_rows}), {} mismatched", rows.len(), bad.len()),
    });

    for &method in methods.iter().filter(|_| specs.contains(&SpecName::Main)) {
        for target in Target::ALL {
            let errs: Vec<f64> = rows
                .iter()
                .filter(|r| r.spec == SpecName::Main && r.method == method && r.target == target && r.is_ok())
                .filter_map(|r| {
                    let p = truth.get(r.city_id.as_str())?;
                    let want = match target {
                        Target::Rent => p.rent_elasticity(),
                        Target::Density => p.density_elasticity(),
                    };
                    Some((r.slope? / want - 1.0).abs())
                })
                .collect();
            let m = median(errs.clone());
            checks.push(Check {
                name: format!("main {} {} recovers truth", method.as_str(), target.as_str()),
                passed: m.is_some_and(|m| m < 0.10),
                detail: format!(
                    "median relative error {} over {} cities (limit 0.1)",
                    m.map_or("n/a".into(), io::num),
                    errs.len()
                ),
            });
        }
    }

    for &name in specs {
        let sign = gradient::GradientSpec::named(name, Target::Rent, Method::Ols).regressor.expected_sign();
        let ok: Vec<&ResultRow> = rows.iter().filter(|r| r.spec == name && r.is_ok()).collect();
        let agree = ok.iter().filter(|r| r.slope.is_some_and(|s| s.signum() == sign)).count();
        let share = if ok.is_empty() { 0.0 } else { agree as f64 / ok.len() as f64 };
        checks.push(Check {
            name: format!("{} slopes have the model sign", name.as_str()),
            passed: share >= 0.9,
            detail: format!("{agree}/{} fits (limit 90%)", ok.len()),
        });
    }

    let signs = match &urban.fits[0].1 {
        Ok((fit, _)) => {
            let pop = fit.coef("log_population").unwrap_or(f64::NAN);
            let farm = fit.coef("log_farm_rent").unwrap_or(f64::NAN);
            (pop > 0.0 && farm < 0.0, format!("log_population {}, log_farm_rent {}", io::num(pop), io::num(farm)))
        }
        Err((_, msg)) => (false, msg.clone()),
    };
    checks.push(Check {
        name: "urban area signs".into(),
        passed: signs.0,
        detail: signs.1,
    });
    checks
}

/// Summary of a complete run.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub cities: usize,
    pub failed: usize,
    pub checks: Vec<Check>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.failed == 0 && self.checks.iter().all(|c| c.passed)
    }
}

/// Writes the simulated ensemble (grids, city records, ads, features).
pub fn write_ensemble(dir: &Path, e: &Ensemble) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    io::write_grids(&dir.join("grid.csv"), &e.grids)?;
    io::write_cities(&dir.join("cities.csv"), &e.grids)?;
    io::write_ads(&dir.join("ads.csv"), &e.grids)?;
    io::write_features(&dir.join("features.csv"), &e.features)?;
    Ok(())
}

/// simulate → estimate → recover → second step → urban area → report.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    let dir = &cfg.out_dir;
    let e = simulate_ensemble(cfg)?;
    if e.grids.is_empty() {
        return Err(Error::Refused("no city could be simulated".into()));
    }
    write_ensemble(dir, &e)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    let est = &cfg.estimate;
    let rows = estimate_all(&e.grids, &est.specs, &est.methods, est.min_obs);
    io::write_results(&dir.join("results.csv"), &rows)?;
    let steps = second_step_all(&rows, &e.features, second_step_method(&est.methods));
    crate::report::write_second_step(&dir.join("second_step.csv"), &steps)?;
    let urban = urban_area_all(&e.features);
    crate::report::write_urban_area(&dir.join("urban_area.csv"), &urban)?;
    let checks = run_checks(&e.grids, &rows, &est.specs, &est.methods, &urban);
    let summary = RunSummary {
        cities: e.grids.len(),
        failed: e.failed.len(),
        checks,
    };
    crate::report::write_checks(&dir.join("checks.csv"), &summary, &e.failed)?;
    crate::report::write_report(dir)?;
    Ok(summary)
}

/// Urban-area features of solved (not gridded) cities with randomized
/// population, income, fuel price, commuting speed and farmland rent. The
/// commuting cost per km is the car cost at the drawn speed and fuel price.
pub fn solver_area_ensemble(n: usize, seed: u64) -> Result<Vec<CityFeatures>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let pop = (rng.random_range(12.0_f64..15.5)).exp();
        let income = (rng.random_range(8.0_f64..11.0)).exp();
        let farm = (rng.random_range(-1.0_f64..2.0)).exp();
        let fuel_price = rng.random_range(0.5..2.0);
        let speed = rng.random_range(15.0..45.0);
        let t = TransportParams::from_income(income, fuel_price, 0.08, 1.0)?.car_cost_per_km(speed);
        let p = CityParams::new(0.3, 0.15, 1.0, 0.8, income, t, farm, pop)?;
        let eq = model::solve_equilibrium(&p)?;
        out.push(CityFeatures {
            city_id: city_id(i),
            population: pop,
            income,
            farm_rent: farm,
            fuel_price,
            commuting_speed: Some(speed),
            monocentricity: rng.random(),
            coastal: rng.random(),
            gini: None,
            informal_pct: None,
            regulatory: None,
            continent: Continent::ALL[i % 6],
            income_group: if i % 2 == 0 { IncomeGroup::High } else { IncomeGroup::Other },
            area_km2: Some(std::f64::consts::PI * eq.fringe * eq.fringe),
        });
    }
    Ok(out)
}
