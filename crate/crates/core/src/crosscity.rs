//! Second-step analysis across cities: gradient estimates against city
//! characteristics, the urbanized-area regression and its income-group
//! Chow test, and the city-level features computed from grids.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;


use crate::econo::{self, ChowResult, FitResult};
use crate::error::{Error, Result};
use crate::gradient::DataQuality;
use crate::grid::CityGrid;

/// Fewest cities a second-step regression accepts.
pub const MIN_CITIES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Continent {
    Europe,
    Asia,
    Africa,
    Oceania,
    NorthAmerica,
    SouthAmerica,
}

impl Continent {
    pub const ALL: [Continent; 6] = [
        Continent::Europe,
        Continent::Asia,
        Continent::Africa,
        Continent::Oceania,
        Continent::NorthAmerica,
        Continent::SouthAmerica,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Continent::Europe => "Europe",
            Continent::Asia => "Asia",
            Continent::Africa => "Africa",
            Continent::Oceania => "Oceania",
            Continent::NorthAmerica => "NorthAmerica",
            Continent::SouthAmerica => "SouthAmerica",
        }
    }
}

impl fmt::Display for Continent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Continent {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Continent::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown continent `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IncomeGroup {
    High,
    /// Upper-middle, lower-middle and low income.
    Other,
}

impl IncomeGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            IncomeGroup::High => "high",
            IncomeGroup::Other => "upper-middle-to-low",
        }
    }
}

impl FromStr for IncomeGroup {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "high" => Ok(IncomeGroup::High),
            "upper-middle-to-low" | "other" => Ok(IncomeGroup::Other),
            other => Err(format!("unknown income group `{other}` (high, upper-middle-to-low)")),
        }
    }
}

/// City-level covariates. Optional fields may be unavailable for a city.
#[derive(Debug, Clone, PartialEq)]
pub struct CityFeatures {
    pub city_id: String,
    pub population: f64,
    pub income: f64,
    /// Per km² of farmland.
    pub farm_rent: f64,
    pub fuel_price: f64,
    /// km/h.
    pub commuting_speed: Option<f64>,
    /// In [0, 1].
    pub monocentricity: f64,
    pub coastal: bool,
    pub gini: Option<f64>,
    pub informal_pct: Option<f64>,
    /// 0, 1 or 2.
    pub regulatory: Option<u8>,
    pub continent: Continent,
    pub income_group: IncomeGroup,
    /// Urbanized area, km².
    pub area_km2: Option<f64>,
}

impl CityFeatures {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        for (name, v) in [
            ("population", self.population),
            ("income", self.income),
            ("fuel_price", self.fuel_price),
        ] {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("{name} = {v} must be > 0"));
            }
        }
        if !(self.farm_rent.is_finite() && self.farm_rent >= 0.0) {
            bad.push(format!("farm_rent = {} must be >= 0", self.farm_rent));
        }
        if !(0.0..=1.0).contains(&self.monocentricity) {
            bad.push(format!("monocentricity = {} must be in [0, 1]", self.monocentricity));
        }
        if let Some(r) = self.regulatory {
            if r > 2 {
                bad.push(format!("regulatory = {r} must be 0, 1 or 2"));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(
                bad.into_iter().map(|m| format!("{}: {m}", self.city_id)).collect(),
            ))
        }
    }
}

/// `Σ N·(dist / fastest time) / Σ N` over populated cells with a positive
/// travel time; `None` when no cell qualifies.
pub fn density_weighted_speed(city: &CityGrid) -> Option<f64> {
    let (mut num, mut den) = (0.0, 0.0);
    for c in &city.cells {
        if let Some(t) = c.fastest_time().filter(|t| *t > 0.0) {
            if c.population > 0.0 {
                num += c.population * c.dist / t;
                den += c.population;
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Urbanized land over populated cells, km².
pub fn urbanized_area(city: &CityGrid) -> f64 {
    let area = city.cell_area();
    city.cells
        .iter()
        .filter(|c| c.population > 0.0)
        .map(|c| area * c.land_share)
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dependent {
    RentGradient,
    DensityGradient,
}

impl Dependent {
    pub fn as_str(self) -> &'static str {
        match self {
            Dependent::RentGradient => "rent",
            Dependent::DensityGradient => "density",
        }
    }
}

impl FromStr for Dependent {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rent" | "rent-gradient" => Ok(Dependent::RentGradient),
            "density" | "density-gradient" => Ok(Dependent::DensityGradient),
            other => Err(format!("unknown dependent `{other}` (rent, density)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SecondStepSpec {
    pub dependent: Dependent,
    /// 1, 2 or 3.
    pub specification: u8,
    /// Continent left out of the dummy set in specification 3.
    pub reference: Continent,
}

impl SecondStepSpec {
    pub fn new(dependent: Dependent, specification: u8) -> Result<Self> {
        if !(1..=3).contains(&specification) {
            return Err(Error::Refused(format!(
                "second-step specification {specification} must be 1, 2 or 3"
            )));
        }
        Ok(SecondStepSpec {
            dependent,
            specification,
            reference: Continent::Europe,
        })
    }

    /// Non-dummy regressors, in column order.
    pub fn regressors(&self) -> Vec<&'static str> {
        let mut cols = match self.dependent {
            Dependent::RentGradient => vec!["coastal", "monocentricity", "log_population", "market_cover", "spatial_cover"],
            Dependent::DensityGradient => vec!["log_population", "monocentricity"],
        };
        if self.specification >= 2 {
            match self.dependent {
                Dependent::RentGradient => cols.extend(["gini", "informal_pct", "regulatory"]),
                Dependent::DensityGradient => cols.extend(["gini", "informal_pct", "coastal", "regulatory"]),
            }
        }
        cols
    }
}

/// One per-city gradient estimate entering a second-step regression.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientObs {
    pub city_id: String,
    pub value: f64,
    pub quality: Option<DataQuality>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondStepResult {
    pub fit: FitResult,
    /// Cities without a gradient, features, or a value the spec needs.
    pub dropped: usize,
    pub warnings: Vec<String>,
}

fn feature_value(name: &str, f: &CityFeatures, q: Option<&DataQuality>) -> Option<f64> {
    let pos_ln = |v: f64| (v > 0.0).then(|| v.ln());
    match name {
        "coastal" => Some(if f.coastal { 1.0 } else { 0.0 }),
        "monocentricity" => Some(f.monocentricity),
        "log_population" => pos_ln(f.population),
        "log_income" => pos_ln(f.income),
        "log_farm_rent" => pos_ln(f.farm_rent),
        "log_fuel_price" => pos_ln(f.fuel_price),
        "log_commuting_speed" => f.commuting_speed.and_then(pos_ln),
        "market_cover" => q?.market_cover,
        "spatial_cover" => q.map(|q| q.spatial_cover),
        "gini" => f.gini,
        "informal_pct" => f.informal_pct,
        "regulatory" => f.regulatory.map(f64::from),
        _ => None,
    }
}

/// OLS of per-city gradients on the spec's block of city characteristics.
///
/// Rows are joined on city id and sorted by it, so the result does not
/// depend on input order. In specification 3 a dummy is added for every
/// continent present other than the reference; absent continents are
/// reported in `warnings`.
pub fn second_step(gradients: &[GradientObs], features: &[CityFeatures], spec: &SecondStepSpec) -> Result<SecondStepResult> {
    let by_id: BTreeMap<&str, &CityFeatures> = features.iter().map(|f| (f.city_id.as_str(), f)).collect();
    let mut obs: Vec<&GradientObs> = gradients.iter().collect();
    obs.sort_by(|a, b| a.city_id.cmp(&b.city_id));

    let cols = spec.regressors();
    let mut y = Vec::new();
    let mut x: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    let mut continents = Vec::new();
    let mut dropped = 0;
    'rows: for g in obs {
        let Some(f) = by_id.get(g.city_id.as_str()) else {
            dropped += 1;
            continue;
        };
        if !g.value.is_finite() {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(cols.len());
        for c in &cols {
            match feature_value(c, f, g.quality.as_ref()).filter(|v| v.is_finite()) {
                Some(v) => row.push(v),
                None => {
                    dropped += 1;
                    continue 'rows;
                }
            }
        }
        y.push(g.value);
        for (col, v) in x.iter_mut().zip(row) {
            col.push(v);
        }
        continents.push(f.continent);
    }
    if y.len() < MIN_CITIES {
        return Err(Error::TooFewObservations {
            needed: MIN_CITIES,
            got: y.len(),
        });
    }

    let mut names: Vec<String> = cols.iter().map(|c| c.to_string()).collect();
    let mut warnings = Vec::new();
    if spec.specification == 3 {
        if !continents.contains(&spec.reference) {
            warnings.push(format!("reference continent {} has no cities", spec.reference));
        }
        for c in Continent::ALL.into_iter().filter(|c| *c != spec.reference) {
            if continents.contains(&c) {
                names.push(format!("continent_{c}"));
                x.push(continents.iter().map(|k| if *k == c { 1.0 } else { 0.0 }).collect());
            } else {
                warnings.push(format!("dummy continent_{c} dropped: no cities"));
            }
        }
    }
    let regs: Vec<(&str, &[f64])> = names.iter().map(|n| n.as_str()).zip(x.iter().map(|c| c.as_slice())).collect();
    let fit = econo::ols(&y, &regs)?;
    Ok(SecondStepResult { fit, dropped, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subset {
    All,
    High,
    Other,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::All => "all",
            Subset::High => "high",
            Subset::Other => "other",
        }
    }

    fn admits(self, g: IncomeGroup) -> bool {
        match self {
            Subset::All => true,
            Subset::High => g == IncomeGroup::High,
            Subset::Other => g == IncomeGroup::Other,
        }
    }
}

impl FromStr for Subset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all" => Ok(Subset::All),
            "high" => Ok(Subset::High),
            "other" => Ok(Subset::Other),
            other => Err(format!("unknown subset `{other}` (all, high, other)")),
        }
    }
}

/// Regressors of the urbanized-area regression, in column order.
pub const URBAN_AREA_REGRESSORS: [&str; 6] = [
    "log_population",
    "log_income",
    "log_farm_rent",
    "log_fuel_price",
    "log_commuting_speed",
    "monocentricity",
];

#[derive(Debug, Clone, PartialEq)]
pub struct UrbanAreaData {
    pub y: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
    pub groups: Vec<IncomeGroup>,
    /// Rows with a missing or non-positive value in a log column.
    pub dropped: usize,
}

impl UrbanAreaData {
    pub fn regressors(&self) -> Vec<(&str, &[f64])> {
        URBAN_AREA_REGRESSORS
            .iter()
            .copied()
            .zip(self.columns.iter().map(|c| c.as_slice()))
            .collect()
    }
}

/// Builds log area and the regressor columns for the cities in `subset`,
/// sorted by city id.
pub fn urban_area_data(features: &[CityFeatures], subset: Subset) -> Result<UrbanAreaData> {
    let mut rows: Vec<&CityFeatures> = features.iter().filter(|f| subset.admits(f.income_group)).collect();
    if rows.is_empty() {
        return Err(Error::EmptySubset(format!("no cities in income subset `{}`", subset.as_str())));
    }
    rows.sort_by(|a, b| a.city_id.cmp(&b.city_id));
    let mut d = UrbanAreaData {
        y: Vec::new(),
        columns: vec![Vec::new(); URBAN_AREA_REGRESSORS.len()],
        groups: Vec::new(),
        dropped: 0,
    };
    for f in rows {
        let area = f.area_km2.filter(|a| *a > 0.0 && a.is_finite());
        let vals: Option<Vec<f64>> = URBAN_AREA_REGRESSORS
            .iter()
            .map(|c| feature_value(c, f, None).filter(|v| v.is_finite()))
            .collect();
        match (area, vals) {
            (Some(a), Some(v)) => {
                d.y.push(a.ln());
                for (col, x) in d.columns.iter_mut().zip(v) {
                    col.push(x);
                }
                d.groups.push(f.income_group);
            }
            _ => d.dropped += 1,
        }
    }
    Ok(d)
}

/// OLS of log urbanized area on the city characteristics.
pub fn urban_area_regression(features: &[CityFeatures], subset: Subset) -> Result<(FitResult, usize)> {
    let d = urban_area_data(features, subset)?;
    let fit = econo::ols(&d.y, &d.regressors())?;
    Ok((fit, d.dropped))
}

/// Chow test of equal urban-area coefficients across the high-income and
/// other cities.
pub fn chow_split_test(features: &[CityFeatures]) -> Result<ChowResult> {
    let d = urban_area_data(features, Subset::All)?;
    let split: Vec<bool> = d.groups.iter().map(|g| *g == IncomeGroup::High).collect();
    econo::chow_test(&d.y, &d.regressors(), &split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellRecord, CityMeta};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn grid(cells: Vec<CellRecord>, cell_size: f64) -> CityGrid {
        CityGrid {
            meta: CityMeta {
                city_id: "g".into(),
                income: 1.0,
                t_per_km: None,
                transport: None,
                truth: None,
            },
            cell_size,
            center: (0.0, 0.0),
            cells,
            ads: Vec::new(),
        }
    }

    fn cell(id: u32, dist: f64, time: f64, pop: f64) -> CellRecord {
        let mut c = CellRecord::empty(id, dist, 0.0, dist);
        c.population = pop;
        c.land_share = 1.0;
        c.time_car = Some(time);
        c
    }

    #[test]
    fn weighted_speed_examples() {
        let g = grid(vec![cell(0, 2.0, 0.1, 100.0), cell(1, 6.0, 0.2, 300.0)], 1.0);
        assert!((density_weighted_speed(&g).unwrap() - 27.5).abs() < 1e-12);
        let g = grid(vec![cell(0, 3.0, 0.1, 7.0)], 1.0);
        assert!((density_weighted_speed(&g).unwrap() - 30.0).abs() < 1e-12);
        let g = grid(vec![cell(0, 2.0, 0.1, 5.0), cell(1, 6.0, 0.2, 5.0)], 1.0);
        assert!((density_weighted_speed(&g).unwrap() - 25.0).abs() < 1e-12);
        assert_eq!(density_weighted_speed(&grid(Vec::new(), 1.0)), None);
    }

    #[test]
    fn area_examples() {
        let cells = (0..10).map(|k| cell(k, k as f64, 0.1, 1.0)).collect();
        assert_eq!(urbanized_area(&grid(cells, 1.0)), 10.0);
        assert_eq!(urbanized_area(&grid(Vec::new(), 1.0)), 0.0);
    }

    fn synthetic_features(n: usize, rng: &mut ChaCha8Rng) -> Vec<CityFeatures> {
        (0..n)
            .map(|i| CityFeatures {
                city_id: format!("c{i:03}"),
                population: (13.0 + rng.random::<f64>() * 3.0).exp(),
                income: (8.0 + rng.random::<f64>() * 3.0).exp(),
                farm_rent: (rng.random::<f64>() * 3.0).exp(),
                fuel_price: 0.5 + rng.random::<f64>(),
                commuting_speed: Some(15.0 + 20.0 * rng.random::<f64>()),
                monocentricity: rng.random(),
                coastal: rng.random::<bool>(),
                gini: Some(0.3 + 0.3 * rng.random::<f64>()),
                informal_pct: Some(40.0 * rng.random::<f64>()),
                regulatory: Some(rng.random_range(0..3)),
                continent: Continent::ALL[i % 6],
                income_group: if i % 2 == 0 { IncomeGroup::High } else { IncomeGroup::Other },
                area_km2: None,
            })
            .collect()
    }

    #[test]
    fn second_step_recovers_linear_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let feats = synthetic_features(120, &mut rng);
        let spec = SecondStepSpec::new(Dependent::DensityGradient, 2).unwrap();
        let truth = [20.0, -1.5, 4.0, 10.0, 0.05, 2.0, -0.8];
        let obs: Vec<GradientObs> = feats
            .iter()
            .map(|f| {
                let xs: Vec<f64> = spec.regressors().iter().map(|c| feature_value(c, f, None).unwrap()).collect();
                let e: f64 = rng.sample(StandardNormal);
                GradientObs {
                    city_id: f.city_id.clone(),
                    value: truth[0] + xs.iter().zip(&truth[1..]).map(|(x, b)| x * b).sum::<f64>() + 0.5 * e,
                    quality: None,
                }
            })
            .collect();
        let r = second_step(&obs, &feats, &spec).unwrap();
        assert_eq!(r.dropped, 0);
        for (j, b) in truth.iter().enumerate() {
            let z = (r.fit.coefficients[j] - b) / r.fit.std_errors[j];
            assert!(z.abs() < 3.0, "coef {j}: z = {z}");
        }

        let mut shuffled = obs.clone();
        shuffled.reverse();
        let r2 = second_step(&shuffled, &feats, &spec).unwrap();
        assert_eq!(r.fit.coefficients, r2.fit.coefficients);
    }

    #[test]
    fn continent_reference_does_not_change_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let feats = synthetic_features(90, &mut rng);
        let obs: Vec<GradientObs> = feats
            .iter()
            .map(|f| GradientObs {
                city_id: f.city_id.clone(),
                value: rng.random::<f64>() * 10.0 + f.monocentricity,
                quality: None,
            })
            .collect();
        let mut spec = SecondStepSpec::new(Dependent::DensityGradient, 3).unwrap();
        let a = second_step(&obs, &feats, &spec).unwrap();
        spec.reference = Continent::Asia;
        let b = second_step(&obs, &feats, &spec).unwrap();
        assert!((a.fit.ssr - b.fit.ssr).abs() < 1e-10 * a.fit.ssr);
        assert_eq!(a.fit.coefficients.len(), b.fit.coefficients.len());
        // shared slopes coincide
        for name in spec.regressors() {
            assert!((a.fit.coef(name).unwrap() - b.fit.coef(name).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn single_continent_drops_all_dummies() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut feats = synthetic_features(40, &mut rng);
        for f in feats.iter_mut() {
            f.continent = Continent::Europe;
        }
        let obs: Vec<GradientObs> = feats
            .iter()
            .map(|f| GradientObs {
                city_id: f.city_id.clone(),
                value: f.monocentricity,
                quality: None,
            })
            .collect();
        let spec = SecondStepSpec::new(Dependent::DensityGradient, 3).unwrap();
        let r = second_step(&obs, &feats, &spec).unwrap();
        assert_eq!(r.warnings.len(), 5);
        assert_eq!(r.fit.names.len(), 1 + spec.regressors().len());
    }

    #[test]
    fn collinear_features_name_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut feats = synthetic_features(40, &mut rng);
        for f in feats.iter_mut() {
            f.gini = Some(f.monocentricity * 2.0);
        }
        let obs: Vec<GradientObs> = feats
            .iter()
            .map(|f| GradientObs {
                city_id: f.city_id.clone(),
                value: 1.0 + f.monocentricity,
                quality: None,
            })
            .collect();
        let spec = SecondStepSpec::new(Dependent::DensityGradient, 2).unwrap();
        match second_step(&obs, &feats, &spec) {
            Err(Error::Singular { column }) => assert_eq!(column, "gini"),
            other => panic!("expected singular, got {other:?}"),
        }
    }

    #[test]
    fn too_few_cities_and_missing_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut feats = synthetic_features(35, &mut rng);
        feats[0].gini = None;
        let obs: Vec<GradientObs> = feats
            .iter()
            .map(|f| GradientObs {
                city_id: f.city_id.clone(),
                value: f.monocentricity,
                quality: None,
            })
            .collect();
        let spec = SecondStepSpec::new(Dependent::DensityGradient, 2).unwrap();
        assert_eq!(second_step(&obs, &feats, &spec).unwrap().dropped, 1);
        let spec = SecondStepSpec::new(Dependent::RentGradient, 1).unwrap();
        // rent specs need data quality
        assert!(matches!(
            second_step(&obs, &feats, &spec),
            Err(Error::TooFewObservations { needed: 30, got: 0 })
        ));
        assert!(SecondStepSpec::new(Dependent::RentGradient, 4).is_err());
    }

    fn log_linear_areas(feats: &mut [CityFeatures], coefs: &[f64; 7]) {
        for f in feats.iter_mut() {
            let x: Vec<f64> = URBAN_AREA_REGRESSORS.iter().map(|c| feature_value(c, f, None).unwrap()).collect();
            f.area_km2 = Some((coefs[0] + x.iter().zip(&coefs[1..]).map(|(a, b)| a * b).sum::<f64>()).exp());
        }
    }

    #[test]
    fn urban_area_exact_fit() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut feats = synthetic_features(50, &mut rng);
        let coefs = [-9.0, 0.8, 0.4, -0.2, -0.05, 0.3, 0.1];
        log_linear_areas(&mut feats, &coefs);
        let (fit, dropped) = urban_area_regression(&feats, Subset::All).unwrap();
        assert_eq!(dropped, 0);
        assert!((fit.r_squared - 1.0).abs() < 1e-10);
        for (a, b) in fit.coefficients.iter().zip(&coefs) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn urban_area_subsets_and_drops() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut feats = synthetic_features(50, &mut rng);
        log_linear_areas(&mut feats, &[-9.0, 0.8, 0.4, -0.2, -0.05, 0.3, 0.1]);
        feats[1].farm_rent = 0.0;
        feats[3].area_km2 = None;
        let (_, dropped) = urban_area_regression(&feats, Subset::Other).unwrap();
        assert_eq!(dropped, 2);
        for f in feats.iter_mut() {
            f.income_group = IncomeGroup::Other;
        }
        assert!(matches!(urban_area_regression(&feats, Subset::High), Err(Error::EmptySubset(_))));
    }

    #[test]
    fn chow_identical_groups_no_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut feats = synthetic_features(40, &mut rng);
        log_linear_areas(&mut feats, &[-9.0, 0.8, 0.4, -0.2, -0.05, 0.3, 0.1]);
        let c = chow_split_test(&feats).unwrap();
        assert_eq!(c.f, 0.0);
    }

    #[test]
    fn chow_detects_income_elasticity_gap() {
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut feats = synthetic_features(100, &mut rng);
            for f in feats.iter_mut() {
                let b_inc = if f.income_group == IncomeGroup::High { 0.28 } else { 0.44 };
                let e: f64 = rng.sample(StandardNormal);
                let ln_area = -5.0 + 0.8 * f.population.ln() + b_inc * f.income.ln() - 0.2 * f.farm_rent.ln()
                    + 0.05 * e;
                f.area_km2 = Some(ln_area.exp());
            }
            if chow_split_test(&feats).unwrap().p < 0.05 {
                hits += 1;
            }
        }
        assert!(hits >= 90, "power {hits}/100");
    }

    #[test]
    fn invalid_features_listed() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut f = synthetic_features(1, &mut rng).remove(0);
        f.population = -1.0;
        f.monocentricity = 2.0;
        f.regulatory = Some(3);
        match f.validate() {
            Err(Error::Config(v)) => assert_eq!(v.len(), 3),
            other => panic!("{other:?}"),
        }
    }
}
