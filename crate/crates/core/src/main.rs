use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sumlab::config::RunConfig;
use sumlab::crosscity::{self, Dependent, SecondStepSpec, Subset};
use sumlab::econo::{FitResult, Method};
use sumlab::gradient::{self, GradientSpec, Regressor, SpecName, Target};
use sumlab::{io, pipeline, report, Error, Result};

#[derive(Parser)]
#[command(name = "sumlab", version, about = "Monocentric city simulation and gradient estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic cities and write grid, city, ads and features CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out_dir` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit one gradient spec on every city of a grid CSV.
    Estimate {
        /// Grid CSV.
        #[arg(long)]
        city: PathBuf,
        /// City records; defaults to cities.csv next to the grid file.
        #[arg(long)]
        cities: Option<PathBuf>,
        /// Rent ads; defaults to ads.csv next to the grid file when present.
        #[arg(long)]
        ads: Option<PathBuf>,
        /// main, r1, r2, r3, r4 or r5.
        #[arg(long, default_value = "main")]
        spec: SpecName,
        #[arg(long, default_value = "ols")]
        method: Method,
        #[arg(long, default_value_t = gradient::MIN_OBS)]
        min_obs: usize,
        /// Results CSV to write.
        #[arg(long, default_value = "estimate.csv")]
        out: PathBuf,
    },
    /// Structural parameters per city from a results CSV.
    Recover {
        #[arg(long)]
        results: PathBuf,
    },
    /// Cross-city regression of the main-spec gradients.
    SecondStep {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        features: PathBuf,
        /// 1, 2 or 3.
        #[arg(long)]
        spec: u8,
        /// rent or density.
        #[arg(long)]
        dependent: Dependent,
        /// Which first-step method's gradients to use.
        #[arg(long, default_value = "ols")]
        method: Method,
    },
    /// Regression of log urbanized area on city characteristics.
    UrbanArea {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "all")]
        subset: Subset,
        /// Also test for equal coefficients across income groups.
        #[arg(long)]
        chow: bool,
    },
    /// Simulate, estimate, recover, run the cross-city regressions and report.
    Pipeline {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summary tables and plot-ready CSVs for a run directory.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error [config]: {e}");
        return ExitCode::from(2);
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.reason_code());
            ExitCode::from(2)
        }
    }
}

fn init_threads() -> std::result::Result<(), String> {
    let Ok(v) = std::env::var("SUMLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("SUMLAB_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn load_config(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn dispatch(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Simulate { config, out, seed } => {
            let cfg = load_config(&config, out, seed)?;
            let e = pipeline::simulate_ensemble(&cfg)?;
            pipeline::write_ensemble(&cfg.out_dir, &e)?;
            println!("simulated {} cities into {}", e.grids.len(), cfg.out_dir.display());
            for (id, code, msg) in &e.failed {
                eprintln!("skipped {id} [{code}]: {msg}");
            }
        }
        Command::Estimate {
            city,
            cities,
            ads,
            spec,
            method,
            min_obs,
            out,
        } => {
            if spec == SpecName::R1 {
                // surfaces the refusal for an instrumented distance spec
                GradientSpec::new(Target::Rent, Regressor::EuclidDistance, gradient::RentAggregation::CellMean, method)?;
            }
            let cities = cities.unwrap_or_else(|| sibling(&city, "cities.csv"));
            let ads = ads.or_else(|| Some(sibling(&city, "ads.csv")).filter(|p| p.exists()));
            let grids = io::read_grids(&city, &cities, ads.as_deref())?;
            let rows = pipeline::estimate_all(&grids, &[spec], &[method], min_obs);
            for g in &grids {
                let o = gradient::analyze_city(g, spec, method, min_obs);
                println!("city {} ({})", o.city_id, GradientSpec::named(spec, Target::Rent, method));
                for (target, r) in [(Target::Rent, &o.rent), (Target::Density, &o.density)] {
                    match r {
                        Ok(cg) => {
                            println!("  {} gradient ({}):", target.as_str(), cg.sign.as_str());
                            print_fit(&cg.fit, "    ");
                        }
                        Err(f) => println!("  {} gradient: skipped [{}] {}", target.as_str(), f.code, f.message),
                    }
                }
                if let Some(s) = o.structural {
                    println!("  beta = {:.6}  a = {:.6}  b = {:.6}  valid = {}", s.beta, s.a_land, s.b_capital, s.valid);
                }
            }
            io::write_results(&out, &rows)?;
        }
        Command::Recover { results } => {
            let rows = io::read_results(&results)?;
            report::write_structural(std::io::stdout().lock(), &rows)?;
        }
        Command::SecondStep {
            results,
            features,
            spec,
            dependent,
            method,
        } => {
            let rows = io::read_results(&results)?;
            let features = io::read_features(&features)?;
            let target = match dependent {
                Dependent::RentGradient => Target::Rent,
                Dependent::DensityGradient => Target::Density,
            };
            let obs = pipeline::gradient_obs(&rows, SpecName::Main, method, target);
            let r = crosscity::second_step(&obs, &features, &SecondStepSpec::new(dependent, spec)?)?;
            println!("{} gradient, specification {spec} ({} cities dropped)", dependent.as_str(), r.dropped);
            print_fit(&r.fit, "  ");
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
        }
        Command::UrbanArea { features, subset, chow } => {
            let features = io::read_features(&features)?;
            let (fit, dropped) = crosscity::urban_area_regression(&features, subset)?;
            println!("log urbanized area, subset {} ({dropped} cities dropped)", subset.as_str());
            print_fit(&fit, "  ");
            if chow {
                let c = crosscity::chow_split_test(&features)?;
                println!(
                    "Chow test (high vs other income): F({}, {}) = {:.4}, p = {:.4}",
                    c.k,
                    c.n_first + c.n_second - 2 * c.k,
                    c.f,
                    c.p
                );
            }
        }
        Command::Pipeline { config, out, seed } => {
            let cfg = load_config(&config, out, seed)?;
            let s = pipeline::run(&cfg)?;
            println!("{} cities estimated, {} failed to simulate", s.cities, s.failed);
            for c in &s.checks {
                println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("outputs in {}", cfg.out_dir.display());
            if !s.passed() {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Report { run } => {
            if !run.join("results.csv").exists() {
                return Err(Error::Refused(format!("{} has no results.csv", run.display())));
            }
            report::write_report(&run)?;
            println!("wrote summary.md, hist_slope.csv, hist_r2.csv and skipped.csv in {}", run.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_fit(fit: &FitResult, indent: &str) {
    println!("{indent}{} n = {}  R² = {:.4}", fit.method.as_str(), fit.n_obs, fit.r_squared);
    println!("{indent}{:<24} {:>12} {:>12} {:>9} {:>8}", "term", "coef", "se", "t", "p");
    for j in 0..fit.coefficients.len() {
        println!(
            "{indent}{:<24} {:>12.6} {:>12.6} {:>9.3} {:>8.4}",
            fit.names[j], fit.coefficients[j], fit.std_errors[j], fit.t_stats[j], fit.p_values[j]
        );
    }
    if let Some(f) = fit.first_stage_f {
        println!("{indent}first-stage F = {f:.2}");
    }
    if let (Some(f), Some(p)) = (fit.f_stat, fit.f_p_value) {
        println!("{indent}F = {f:.3}  p = {p:.4}");
    }
}
