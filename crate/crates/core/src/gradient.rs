//! Per-city gradient estimation: rent and density regressions, the
//! robustness variants, structural parameter recovery and data-quality
//! metrics.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;


use crate::econo::{self, FitResult, Method, SignClass};
use crate::error::{Error, Result};
use crate::grid::{CellRecord, CityGrid};

/// Default minimum number of usable cells for a per-city fit.
pub const MIN_OBS: usize = 10;

/// Name of the instrument column in diagnostics.
pub const INSTRUMENT: &str = "ln_dist";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Rent,
    Density,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Rent, Target::Density];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Rent => "rent",
            Target::Density => "density",
        }
    }
}

impl FromStr for Target {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rent" => Ok(Target::Rent),
            "density" => Ok(Target::Density),
            other => Err(format!("unknown target `{other}` (rent, density)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Regressor {
    /// `ln(Y - T)`.
    LogNetIncome,
    /// Euclidean distance to the center, in km.
    EuclidDistance,
    /// `ln T`.
    LogTransportCost,
    /// Log of the fastest travel time.
    LogTransportTime,
    /// `ln(Y - T)` with the transit fare set to zero.
    LogNetIncomeNoFare,
}

impl Regressor {
    pub fn as_str(self) -> &'static str {
        match self {
            Regressor::LogNetIncome => "log-net-income",
            Regressor::EuclidDistance => "euclid-distance",
            Regressor::LogTransportCost => "log-transport-cost",
            Regressor::LogTransportTime => "log-transport-time",
            Regressor::LogNetIncomeNoFare => "log-net-income-no-fare",
        }
    }

    /// Sign the slope takes when the model holds.
    pub fn expected_sign(self) -> f64 {
        match self {
            Regressor::LogNetIncome | Regressor::LogNetIncomeNoFare => 1.0,
            _ => -1.0,
        }
    }
}

impl FromStr for Regressor {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [
            Regressor::LogNetIncome,
            Regressor::EuclidDistance,
            Regressor::LogTransportCost,
            Regressor::LogTransportTime,
            Regressor::LogNetIncomeNoFare,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| format!("unknown regressor `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RentAggregation {
    CellMean,
    SizeRegression,
}

impl RentAggregation {
    pub fn as_str(self) -> &'static str {
        match self {
            RentAggregation::CellMean => "cell-mean",
            RentAggregation::SizeRegression => "size-regression",
        }
    }
}

impl FromStr for RentAggregation {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cell-mean" => Ok(RentAggregation::CellMean),
            "size-regression" => Ok(RentAggregation::SizeRegression),
            other => Err(format!("unknown rent aggregation `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GradientSpec {
    pub target: Target,
    pub regressor: Regressor,
    pub rent_aggregation: RentAggregation,
    pub method: Method,
}

impl GradientSpec {
    pub fn new(target: Target, regressor: Regressor, rent_aggregation: RentAggregation, method: Method) -> Result<Self> {
        if regressor == Regressor::EuclidDistance && method == Method::Tsls {
            return Err(Error::Refused(
                "euclid-distance cannot be instrumented by itself; use OLS".into(),
            ));
        }
        Ok(GradientSpec {
            target,
            regressor,
            rent_aggregation,
            method,
        })
    }

    pub fn main(target: Target, method: Method) -> Self {
        GradientSpec {
            target,
            regressor: Regressor::LogNetIncome,
            rent_aggregation: RentAggregation::CellMean,
            method,
        }
    }

    pub fn named(name: SpecName, target: Target, method: Method) -> Self {
        let mut s = GradientSpec::main(target, method);
        match name {
            SpecName::Main => {}
            SpecName::R1 => {
                s.regressor = Regressor::EuclidDistance;
                s.method = Method::Ols;
            }
            SpecName::R2 => s.regressor = Regressor::LogTransportCost,
            SpecName::R3 => s.regressor = Regressor::LogTransportTime,
            SpecName::R4 => s.regressor = Regressor::LogNetIncomeNoFare,
            SpecName::R5 => s.rent_aggregation = RentAggregation::SizeRegression,
        }
        s
    }
}

impl fmt::Display for GradientSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/{}/{}",
            self.target.as_str(),
            self.regressor.as_str(),
            self.rent_aggregation.as_str(),
            self.method.as_str()
        )
    }
}

/// The main specification and the five robustness variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SpecName {
    Main,
    R1,
    R2,
    R3,
    R4,
    R5,
}

impl SpecName {
    pub const ALL: [SpecName; 6] = [
        SpecName::Main,
        SpecName::R1,
        SpecName::R2,
        SpecName::R3,
        SpecName::R4,
        SpecName::R5,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SpecName::Main => "main",
            SpecName::R1 => "r1",
            SpecName::R2 => "r2",
            SpecName::R3 => "r3",
            SpecName::R4 => "r4",
            SpecName::R5 => "r5",
        }
    }
}

impl FromStr for SpecName {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        SpecName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| format!("unknown spec `{s}` (main, r1..r5)"))
    }
}

/// Why cells were left out of a fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SkipCounts {
    /// No rent (or no density) observation.
    pub missing_target: usize,
    /// Regressor undefined: `T >= Y`, no travel data, or a zero cost/time.
    pub invalid_regressor: usize,
    /// Center cell, whose log distance instrument is undefined.
    pub zero_distance: usize,
}

impl SkipCounts {
    pub fn total(&self) -> usize {
        self.missing_target + self.invalid_regressor + self.zero_distance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityGradient {
    pub city_id: String,
    pub spec: GradientSpec,
    /// `f_c` (rent) or `h_c` (density), or the per-km slope under
    /// the distance regressor.
    pub slope: f64,
    pub fit: FitResult,
    pub sign: SignClass,
    pub skipped: SkipCounts,
}

/// Rows entering one regression.
#[derive(Debug, Clone, Default)]
pub struct Sample {
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub skipped: SkipCounts,
}

/// Rent per m² from a cell's ads, each given as `(total rent, size)`.
///
/// Cell-mean averages per-ad rent/size; size-regression takes the slope
/// of an intercept OLS of total rent on size. `None` when the cell has too
/// few ads for the mode.
pub fn aggregate_rents(ads: &[(f64, f64)], mode: RentAggregation) -> Option<f64> {
    match mode {
        RentAggregation::CellMean => {
            let per_m2: Vec<f64> = ads.iter().filter(|a| a.1 > 0.0).map(|a| a.0 / a.1).collect();
            if per_m2.is_empty() {
                None
            } else {
                Some(per_m2.iter().sum::<f64>() / per_m2.len() as f64)
            }
        }
        RentAggregation::SizeRegression => {
            if ads.len() < 3 {
                return None;
            }
            let n = ads.len() as f64;
            let ms = ads.iter().map(|a| a.1).sum::<f64>() / n;
            let mr = ads.iter().map(|a| a.0).sum::<f64>() / n;
            let sxx: f64 = ads.iter().map(|a| (a.1 - ms).powi(2)).sum();
            let sxy: f64 = ads.iter().map(|a| (a.1 - ms) * (a.0 - mr)).sum();
            if sxx > 0.0 {
                Some(sxy / sxx)
            } else {
                None
            }
        }
    }
}

/// Rent per m² for every cell under `mode`.
///
/// Cities with ad records aggregate them per cell. A city without any ad
/// records only carries the stored cell rents, which are used as is.
pub fn cell_rents(city: &CityGrid, mode: RentAggregation) -> Vec<Option<f64>> {
    if city.ads.is_empty() {
        return city.cells.iter().map(|c| c.rent).collect();
    }
    let mut by_cell: BTreeMap<u32, Vec<(f64, f64)>> = BTreeMap::new();
    for ad in &city.ads {
        by_cell.entry(ad.cell_id).or_default().push((ad.rent, ad.size));
    }
    city.cells
        .iter()
        .map(|c| by_cell.get(&c.id).and_then(|ads| aggregate_rents(ads, mode)))
        .collect()
}

fn regressor_value(city: &CityGrid, cell: &CellRecord, r: Regressor) -> Option<f64> {
    let positive_log = |v: f64| if v > 0.0 && v.is_finite() { Some(v.ln()) } else { None };
    match r {
        Regressor::EuclidDistance => Some(cell.dist),
        Regressor::LogNetIncome => positive_log(city.meta.income - city.cost_of(cell, None)?),
        Regressor::LogNetIncomeNoFare => positive_log(city.meta.income - city.cost_of(cell, Some(0.0))?),
        Regressor::LogTransportCost => positive_log(city.cost_of(cell, None)?),
        Regressor::LogTransportTime => positive_log(cell.fastest_time()?),
    }
}

/// Collects the regression rows of one city under `spec`.
pub fn build_sample(city: &CityGrid, spec: &GradientSpec) -> Sample {
    let rents = match spec.target {
        Target::Rent => cell_rents(city, spec.rent_aggregation),
        Target::Density => Vec::new(),
    };
    let mut s = Sample::default();
    for (k, cell) in city.cells.iter().enumerate() {
        let y = match spec.target {
            Target::Rent => rents[k].filter(|r| *r > 0.0),
            Target::Density => Some(cell.density).filter(|n| *n > 0.0 && cell.land_share > 0.0),
        };
        let Some(y) = y else {
            s.skipped.missing_target += 1;
            continue;
        };
        let Some(x) = regressor_value(city, cell, spec.regressor) else {
            s.skipped.invalid_regressor += 1;
            continue;
        };
        if spec.method == Method::Tsls && cell.dist <= 0.0 {
            s.skipped.zero_distance += 1;
            continue;
        }
        s.y.push(y.ln());
        s.x.push(x);
        if spec.method == Method::Tsls {
            s.z.push(cell.dist.ln());
        }
    }
    s
}

fn fit_gradient(city: &CityGrid, spec: &GradientSpec, min_obs: usize) -> Result<CityGradient> {
    let spec = GradientSpec::new(spec.target, spec.regressor, spec.rent_aggregation, spec.method)?;
    let sample = build_sample(city, &spec);
    if sample.y.len() < min_obs.max(3) {
        return Err(Error::TooFewObservations {
            needed: min_obs.max(3),
            got: sample.y.len(),
        });
    }
    let name = spec.regressor.as_str();
    let fit = match spec.method {
        Method::Ols => econo::ols(&sample.y, &[(name, &sample.x)])?,
        Method::Tsls => econo::tsls(&sample.y, (name, &sample.x), &sample.z)?,
    };
    let sign = econo::classify_sign(&fit, name)?;
    Ok(CityGradient {
        city_id: city.meta.city_id.clone(),
        spec,
        slope: fit.slope(),
        fit,
        sign,
        skipped: sample.skipped,
    })
}

/// Regresses log rent on the spec's regressor.
pub fn fit_rent_gradient(city: &CityGrid, spec: &GradientSpec, min_obs: usize) -> Result<CityGradient> {
    let mut s = *spec;
    s.target = Target::Rent;
    fit_gradient(city, &s, min_obs)
}

/// Regresses log density on the spec's regressor. The rent aggregation is
/// irrelevant here.
pub fn fit_density_gradient(city: &CityGrid, spec: &GradientSpec, min_obs: usize) -> Result<CityGradient> {
    let mut s = *spec;
    s.target = Target::Density;
    fit_gradient(city, &s, min_obs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralEstimates {
    pub beta: f64,
    pub a_land: f64,
    pub b_capital: f64,
    /// All three shares strictly inside (0, 1).
    pub valid: bool,
}

/// Structural shares from the rent and density elasticities:
/// `β = 1/f`, `a = f/(1+h)`, `b = 1 - a`.
///
/// Out-of-range shares are returned unclipped with `valid = false`.
pub fn recover_structural(f: f64, h: f64) -> Result<StructuralEstimates> {
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::Refused(format!("rent elasticity f = {f} must be > 0")));
    }
    if !(h.is_finite() && h > -1.0) {
        return Err(Error::Refused(format!("density elasticity h = {h} must be > -1")));
    }
    let beta = 1.0 / f;
    let a_land = f / (1.0 + h);
    let b_capital = 1.0 - a_land;
    let inside = |v: f64| v > 0.0 && v < 1.0;
    Ok(StructuralEstimates {
        beta,
        a_land,
        b_capital,
        valid: inside(beta) && inside(a_land) && inside(b_capital),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataQuality {
    /// Residents per ad; `None` without ads.
    pub market_cover: Option<f64>,
    /// Share of populated cells with a rent observation.
    pub spatial_cover: f64,
}

pub fn data_quality(city: &CityGrid) -> DataQuality {
    let ads = city.total_ads().max(city.ads.len() as u64);
    let pop = city.total_population();
    let market_cover = if ads > 0 { Some(pop / ads as f64) } else { None };
    let populated = city.cells.iter().filter(|c| c.population > 0.0).count();
    let with_rent = city
        .cells
        .iter()
        .filter(|c| c.population > 0.0 && c.rent.is_some())
        .count();
    let spatial_cover = if populated > 0 {
        with_rent as f64 / populated as f64
    } else {
        0.0
    };
    DataQuality {
        market_cover,
        spatial_cover,
    }
}

/// A fit that was skipped, with a stable reason code.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: &'static str,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: e.reason_code(),
            message: e.to_string(),
        }
    }
}

/// Everything estimated for one city under one named spec and method.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecOutcome {
    pub city_id: String,
    pub spec_name: SpecName,
    pub method: Method,
    pub rent: std::result::Result<CityGradient, Failure>,
    pub density: std::result::Result<CityGradient, Failure>,
    pub structural: Option<StructuralEstimates>,
}

/// Fits rent and density under `name`, then recovers structural shares
/// when both fits succeed with a log-net-income type regressor.
pub fn analyze_city(city: &CityGrid, name: SpecName, method: Method, min_obs: usize) -> SpecOutcome {
    let spec = GradientSpec::named(name, Target::Rent, method);
    let rent = fit_rent_gradient(city, &spec, min_obs).map_err(Failure::from);
    let density = fit_density_gradient(city, &spec, min_obs).map_err(Failure::from);
    let elasticities = matches!(
        spec.regressor,
        Regressor::LogNetIncome | Regressor::LogNetIncomeNoFare
    );
    let structural = match (&rent, &density) {
        (Ok(r), Ok(d)) if elasticities => recover_structural(r.slope, d.slope).ok(),
        _ => None,
    };
    SpecOutcome {
        city_id: city.meta.city_id.clone(),
        spec_name: name,
        method: spec.method,
        rent,
        density,
        structural,
    }
}
