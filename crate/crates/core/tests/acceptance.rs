//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits non-zero if any failed.

use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use sumlab::cityforge::{self, AmenityParams, Congestion, CostModel, NoiseSpec, TransportScenario};
use sumlab::crosscity::{self, CityFeatures, Continent, IncomeGroup, Subset};
use sumlab::econo::Method;
use sumlab::gradient::{self, GradientSpec, SpecName, Target};
use sumlab::grid::{CityGrid, GridSpec};
use sumlab::model::{self, CityParams, StaticsParam};
use sumlab::pipeline;
use sumlab::transport::TransportParams;

const C1_REL_TOL: f64 = 1e-12;
const C1_DRAWS: usize = 10_000;
const C1_TIME: Duration = Duration::from_secs(1);

const C2_REL_TOL: f64 = 1e-6;
const C2_TIME: Duration = Duration::from_millis(100);

const C3_DRAWS: usize = 100;
const C3_STEP: f64 = 0.05;
const C3_TIME: Duration = Duration::from_secs(10);

const C4_EXACT_TOL: f64 = 1e-6;
const C4_SIGMA: f64 = 0.2;
const C4_BAND: f64 = 0.10;
const C4_SEEDS: u64 = 100;
const C4_MIN_OK: usize = 95;
const C4_TIME: Duration = Duration::from_secs(30);

const C5_TOL: f64 = 0.005;

const C6_TOL: f64 = 1e-6;

const C7_SEEDS: u64 = 100;
const C7_MIN_WINS: usize = 80;
const C7_TIME: Duration = Duration::from_secs(60);

const C8_CITIES: usize = 50;
const C8_DRAWS: u64 = 100;
const C8_MIN_OK: usize = 95;
const C8_TIME: Duration = Duration::from_secs(120);

const C9_SIMS: u64 = 200;
const C9_LEVEL: f64 = 0.05;
const C9_RATE: (f64, f64) = (0.02, 0.09);

const C10_TIME: Duration = Duration::from_secs(60);

/// Target number of cells for the Monte Carlo criteria.
const MC_CELLS: f64 = 2000.0;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let o = f();
    let took = start.elapsed();
    let in_time = took < limit;
    outcome(
        o.passed && in_time,
        format!("{}; {:.2?} (limit {:.0?})", o.detail, took, limit),
    )
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn random_params(rng: &mut ChaCha8Rng) -> CityParams {
    let income = (rng.random_range(8.0_f64..11.0)).exp();
    CityParams::new(
        rng.random_range(0.2..0.5),
        rng.random_range(0.05..0.3),
        rng.random_range(0.5..2.0),
        rng.random_range(0.3..1.5),
        income,
        income / rng.random_range(30.0..150.0),
        (rng.random_range(-1.0_f64..2.0)).exp(),
        (rng.random_range(11.5_f64..15.5)).exp(),
    )
    .expect("valid draw")
}

/// Closed-form density against supply-over-demand evaluated at the bid-rent.
fn c1_density_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0_f64;
    for _ in 0..C1_DRAWS {
        let p = random_params(&mut rng);
        // central rents a city could have: between 1 and 1000 times farmland rent
        let r0 = p.farm_rent * rng.random_range(0.0..1000.0_f64.ln()).exp();
        let u = model::utility_from_central_rent(p.alpha, p.beta, p.income, r0);
        let cost = p.income * rng.random_range(0.0..0.95);
        let r = model::bid_rent(p.income, cost, p.beta, r0).unwrap();
        let composed = model::density_from_rent(r, p.income, cost, &p).unwrap();
        let closed = model::density(p.income, cost, &p, u).unwrap();
        worst = worst.max(rel(closed, composed));
    }
    outcome(worst <= C1_REL_TOL, format!("max relative error {worst:.2e} over {C1_DRAWS} draws"))
}

fn c2_analytic_equilibrium() -> Outcome {
    let p = CityParams::new(0.5, 0.5, 1.0, 1.0, 100.0, 10.0, 25.0, 121_893.8).unwrap();
    let eq = model::solve_equilibrium(&p).unwrap();
    let errs = [rel(eq.utility, 2.0), rel(eq.fringe, 8.0), rel(eq.central_rent, 625.0)];
    let worst = errs.iter().cloned().fold(0.0, f64::max);
    outcome(
        worst <= C2_REL_TOL,
        format!("u = {}, fringe = {}, R0 = {}, max relative error {worst:.2e}", eq.utility, eq.fringe, eq.central_rent),
    )
}

fn c3_comparative_statics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut agree = 0;
    let mut total = 0;
    for _ in 0..C3_DRAWS {
        let p = random_params(&mut rng);
        for which in StaticsParam::ALL {
            total += 1;
            if model::comparative_statics(&p, which, C3_STEP).map(|r| r.agrees()).unwrap_or(false) {
                agree += 1;
            }
        }
    }
    outcome(agree == total, format!("{agree}/{total} signs agree"))
}

fn scenario() -> TransportScenario {
    TransportScenario {
        params: TransportParams::from_income(40_000.0, 1.5, 0.08, 2.0).unwrap(),
        car_speed_kmh: 30.0,
        car_detour: 1.3,
        transit_speed_kmh: 20.0,
        transit_access_h: 0.2,
        sample_fraction: None,
    }
}

fn populated(g: &CityGrid) -> usize {
    g.cells.iter().filter(|c| c.population > 0.0).count()
}

/// Grid spec whose populated footprint holds about `MC_CELLS` cells.
fn sized_spec(p: &CityParams, costs: &CostModel, seed: u64) -> GridSpec {
    let eq = model::solve_equilibrium(p).unwrap();
    let cs0 = eq.fringe / 20.0;
    let probe = GridSpec::new(cs0, cityforge::covering_radius(p, &eq, costs, cs0), 0).unwrap();
    let n0 = populated(&cityforge::simulate_city("probe", p, &probe, &NoiseSpec::none(), costs).unwrap()) as f64;
    let cs = cs0 * (n0 / MC_CELLS).sqrt();
    GridSpec::new(cs, cityforge::covering_radius(p, &eq, costs, cs), seed).unwrap()
}

fn slopes(g: &CityGrid, method: Method) -> (f64, f64) {
    let spec = GradientSpec::main(Target::Rent, method);
    (
        gradient::fit_rent_gradient(g, &spec, gradient::MIN_OBS).unwrap().slope,
        gradient::fit_density_gradient(g, &spec, gradient::MIN_OBS).unwrap().slope,
    )
}

fn c4_gradient_round_trip() -> Outcome {
    let mut worst = 0.0_f64;
    let exact_cases = [
        (CityParams::new(0.3, 0.2, 1.2, 0.7, 40_000.0, 800.0, 3.0, 2.0e6).unwrap(), CostModel::Linear),
        (CityParams::new(0.25, 0.1, 1.0, 0.9, 40_000.0, 500.0, 1.0, 5.0e5).unwrap(), CostModel::Transport(scenario())),
        (CityParams::new(0.4, 0.15, 0.8, 0.6, 40_000.0, 1200.0, 2.0, 3.0e6).unwrap(), CostModel::Transport(scenario())),
    ];
    for (p, costs) in &exact_cases {
        let g = cityforge::simulate_city("exact", p, &sized_spec(p, costs, 0), &NoiseSpec::none(), costs).unwrap();
        for method in [Method::Ols, Method::Tsls] {
            let (f, h) = slopes(&g, method);
            worst = worst.max(rel(f, 1.0 / p.beta)).max(rel(h, p.density_elasticity()));
        }
    }

    let p = CityParams::new(1.0 / 3.0, 0.13, 1.2, 0.7, 40_000.0, 800.0, 3.0, 2.0e6).unwrap();
    let noise = NoiseSpec {
        sigma_rent: C4_SIGMA,
        sigma_density: C4_SIGMA,
        ad_rate: None,
        mask_rate: 0.0,
        congestion: None,
    };
    let base = sized_spec(&p, &CostModel::Linear, 0);
    let mut ok = 0;
    let mut cells = 0;
    for seed in 0..C4_SEEDS {
        let g = cityforge::simulate_city("noisy", &p, &GridSpec { seed, ..base }, &noise, &CostModel::Linear).unwrap();
        cells = populated(&g);
        let (f, h) = slopes(&g, Method::Ols);
        if rel(f, 1.0 / p.beta) <= C4_BAND && rel(h, p.density_elasticity()) <= C4_BAND {
            ok += 1;
        }
    }
    outcome(
        worst <= C4_EXACT_TOL && ok >= C4_MIN_OK,
        format!("noise-free max relative error {worst:.2e}; noisy f and h within 10% in {ok}/{C4_SEEDS} seeds ({cells} cells)"),
    )
}

fn c5_structural_recovery() -> Outcome {
    let s = gradient::recover_structural(2.71, 19.48).unwrap();
    let passed = (s.beta - 0.369).abs() < C5_TOL
        && (s.a_land - 0.1323).abs() < C5_TOL
        && (s.b_capital - 0.8677).abs() < C5_TOL
        && format!("{:.2}", s.a_land) == "0.13"
        && format!("{:.2}", s.b_capital) == "0.87"
        && s.valid;
    outcome(passed, format!("beta = {:.4}, a = {:.4}, b = {:.4}", s.beta, s.a_land, s.b_capital))
}

fn c6_amenity_oracle() -> Outcome {
    let p = CityParams::new(0.5, 0.5, 1.0, 1.0, 100.0, 10.0, 25.0, 1.0e5).unwrap();
    let am = AmenityParams { kappa: 1.0, theta: 0.01 };
    let g = cityforge::simulate_amenity_city("amenity", &p, &GridSpec::new(0.5, 30.0, 0).unwrap(), &am, &NoiseSpec::none()).unwrap();
    let spec = GradientSpec::named(SpecName::R1, Target::Rent, Method::Ols);
    let r = gradient::fit_rent_gradient(&g, &spec, gradient::MIN_OBS).unwrap().slope;
    let d = gradient::fit_density_gradient(&g, &spec, gradient::MIN_OBS).unwrap().slope;
    let expected_r = -am.theta / p.beta;
    let expected_d = -am.theta / (p.a_land * p.beta);
    outcome(
        (r - expected_r).abs() <= C6_TOL && (d - expected_d).abs() <= C6_TOL,
        format!("rent slope {r:.9}/km, density slope {d:.9}/km"),
    )
}

fn c7_tsls_beats_ols() -> Outcome {
    let p = CityParams::new(1.0 / 3.0, 0.13, 1.2, 0.7, 40_000.0, 800.0, 3.0, 2.0e6).unwrap();
    let costs = CostModel::Transport(scenario());
    let base = sized_spec(&p, &costs, 0);
    let noise = NoiseSpec {
        sigma_rent: 0.1,
        sigma_density: 0.1,
        ad_rate: None,
        mask_rate: 0.0,
        congestion: Some(Congestion { sigma_time: 0.3, rent_loading: 0.3 }),
    };
    let truth = 1.0 / p.beta;
    let mut wins = 0;
    let (mut sum_ols, mut sum_tsls) = (0.0, 0.0);
    for seed in 0..C7_SEEDS {
        let g = cityforge::simulate_city("congested", &p, &GridSpec { seed, ..base }, &noise, &costs).unwrap();
        let o = slopes(&g, Method::Ols).0;
        let t = slopes(&g, Method::Tsls).0;
        sum_ols += o;
        sum_tsls += t;
        if (t - truth).abs() < (o - truth).abs() {
            wins += 1;
        }
    }
    let n = C7_SEEDS as f64;
    outcome(
        wins >= C7_MIN_WINS,
        format!(
            "2SLS closer in {wins}/{C7_SEEDS} seeds (mean OLS {:.3}, mean 2SLS {:.3}, truth {truth:.3})",
            sum_ols / n,
            sum_tsls / n
        ),
    )
}

fn c8_urban_area_signs() -> Outcome {
    let mut ok = 0;
    for draw in 0..C8_DRAWS {
        let f = pipeline::solver_area_ensemble(C8_CITIES, draw).unwrap();
        let (fit, _) = crosscity::urban_area_regression(&f, Subset::All).unwrap();
        let c = |n: &str| fit.coef(n).unwrap();
        if c("log_population") > 0.0 && c("log_income") > 0.0 && c("log_farm_rent") < 0.0 {
            ok += 1;
        }
    }
    outcome(ok >= C8_MIN_OK, format!("expected signs in {ok}/{C8_DRAWS} ensembles"))
}

/// Cities whose log area follows one linear model in both income groups.
fn null_features(rng: &mut ChaCha8Rng, n: usize) -> Vec<CityFeatures> {
    (0..n)
        .map(|i| {
            let lp = rng.random_range(12.0..16.0);
            let ly = rng.random_range(8.0..11.0);
            let lf = rng.random_range(-1.0..2.0);
            let lfuel = rng.random_range(-0.5..0.7);
            let ls = rng.random_range(2.5..3.8);
            let mono: f64 = rng.random();
            let e: f64 = rng.sample(StandardNormal);
            let la = -12.0 + 0.9 * lp + 0.5 * ly - 0.3 * lf - 0.2 * lfuel + 0.4 * ls - 0.5 * mono + 0.3 * e;
            CityFeatures {
                city_id: format!("n{i:03}"),
                population: lp.exp(),
                income: ly.exp(),
                farm_rent: lf.exp(),
                fuel_price: lfuel.exp(),
                commuting_speed: Some(ls.exp()),
                monocentricity: mono,
                coastal: false,
                gini: None,
                informal_pct: None,
                regulatory: None,
                continent: Continent::ALL[i % Continent::ALL.len()],
                income_group: if rng.random::<bool>() { IncomeGroup::High } else { IncomeGroup::Other },
                area_km2: Some(la.exp()),
            }
        })
        .collect()
}

fn c9_chow_calibration() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut rejections = 0;
    for _ in 0..C9_SIMS {
        let f = null_features(&mut rng, 120);
        if crosscity::chow_split_test(&f).unwrap().p < C9_LEVEL {
            rejections += 1;
        }
    }
    let rate = rejections as f64 / C9_SIMS as f64;
    outcome(
        rate >= C9_RATE.0 && rate <= C9_RATE.1,
        format!("null rejection rate {rate:.3} ({rejections}/{C9_SIMS})"),
    )
}

fn demo_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/demo.toml")
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

fn c10_pipeline() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut runs = Vec::new();
    let mut worst = Duration::ZERO;
    for (k, threads) in ["0", "1"].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{k}"));
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_sumlab"));
        cmd.args(["pipeline", "--config"]).arg(demo_config()).arg("--out").arg(&out);
        if threads != "0" {
            cmd.env("SUMLAB_THREADS", threads);
        }
        let start = Instant::now();
        let status = cmd.output().unwrap();
        worst = worst.max(start.elapsed());
        if !status.status.success() {
            return outcome(
                false,
                format!("pipeline exited with {}: {}", status.status, String::from_utf8_lossy(&status.stdout)),
            );
        }
        runs.push(files(&out));
    }
    let identical = runs[0] == runs[1];
    outcome(
        identical && worst < C10_TIME,
        format!(
            "exit 0, {} output files, reruns {}; slowest run {worst:.2?} (limit {C10_TIME:.0?})",
            runs[0].len(),
            if identical { "byte-identical" } else { "DIFFER" }
        ),
    )
}

fn main() -> ExitCode {
    // honour a name filter so `cargo test <other>` does not run the suite
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    if filter.as_deref().is_some_and(|f| !"acceptance".contains(f)) {
        return ExitCode::SUCCESS;
    }
    type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);
    let criteria: [Criterion; 10] = [
        ("1 density identity", Box::new(|| timed(C1_TIME, c1_density_identity))),
        ("2 analytic equilibrium", Box::new(|| timed(C2_TIME, c2_analytic_equilibrium))),
        ("3 comparative statics", Box::new(|| timed(C3_TIME, c3_comparative_statics))),
        ("4 gradient round trip", Box::new(|| timed(C4_TIME, c4_gradient_round_trip))),
        ("5 structural recovery", Box::new(c5_structural_recovery)),
        ("6 amenity oracle", Box::new(c6_amenity_oracle)),
        ("7 2SLS beats OLS", Box::new(|| timed(C7_TIME, c7_tsls_beats_ols))),
        ("8 urban-area signs", Box::new(|| timed(C8_TIME, c8_urban_area_signs))),
        ("9 Chow calibration", Box::new(c9_chow_calibration)),
        ("10 end-to-end pipeline", Box::new(c10_pipeline)),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let o = run();
        if !o.passed {
            failed += 1;
        }
        println!("criterion {name}: {} ({})", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
