//! CSV file schemas: grids, per-city metadata, ads, city features and
//! per-city results.
//!
//! Numbers are written in Rust's shortest round-trip form, missing values
//! as empty fields.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::crosscity::CityFeatures;
use crate::econo::{Method, SignClass};
use crate::error::{Error, Result};
use crate::gradient::{DataQuality, SpecName, SpecOutcome, Target};
use crate::grid::{Ad, CellRecord, CityGrid, CityMeta};
use crate::model::CityParams;
use crate::transport::TransportParams;

pub const GRID_HEADER: [&str; 13] = [
    "city_id",
    "cell_id",
    "x_km",
    "y_km",
    "dist_km",
    "land_share",
    "population",
    "rent_m2",
    "dwelling_m2",
    "time_car_h",
    "time_transit_h",
    "dist_car_km",
    "n_ads",
];

pub const CITIES_HEADER: [&str; 18] = [
    "city_id",
    "cell_size_km",
    "center_x_km",
    "center_y_km",
    "income",
    "t_per_km",
    "wage",
    "fuel_price",
    "fuel_efficiency",
    "transit_fare",
    "trips_per_period",
    "beta",
    "a_land",
    "tfp",
    "rho",
    "farm_rent",
    "population",
    "land_share",
];

pub const ADS_HEADER: [&str; 4] = ["city_id", "cell_id", "rent", "size_m2"];

pub const FEATURES_HEADER: [&str; 14] = [
    "city_id",
    "population",
    "income",
    "farm_rent",
    "fuel_price",
    "commuting_speed",
    "monocentricity",
    "coastal",
    "gini",
    "informal_pct",
    "regulatory",
    "continent",
    "income_group",
    "area_km2",
];

pub const RESULTS_HEADER: [&str; 22] = [
    "city_id",
    "spec",
    "method",
    "target",
    "status",
    "slope",
    "se",
    "t",
    "p",
    "r2",
    "n_obs",
    "sign",
    "skipped_missing",
    "skipped_regressor",
    "skipped_zero_dist",
    "beta_hat",
    "a_hat",
    "b_hat",
    "structural_valid",
    "market_cover",
    "spatial_cover",
    "message",
];

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// A parsed CSV file with header-indexed access and line-numbered errors.
struct Table {
    path: String,
    columns: HashMap<String, usize>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path, required: &[&str]) -> Result<Table> {
        let name = path.display().to_string();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| parse_err(&name, 0, e.to_string()))?;
        let headers = rdr.headers().map_err(|e| parse_err(&name, 1, e.to_string()))?.clone();
        let columns: HashMap<String, usize> = headers
            .iter()
            .enumerate()
            .map(|(i, h)| (h.trim().to_string(), i))
            .collect();
        let missing: Vec<&str> = required.iter().copied().filter(|c| !columns.contains_key(*c)).collect();
        if !missing.is_empty() {
            return Err(parse_err(&name, 1, format!("missing columns: {}", missing.join(", "))));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse_err(&name, line, e.to_string())
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec));
        }
        Ok(Table {
            path: name,
            columns,
            rows,
        })
    }

    fn has(&self, col: &str) -> bool {
        self.columns.contains_key(col)
    }

    fn raw<'a>(&self, rec: &'a csv::StringRecord, col: &str) -> &'a str {
        self.columns
            .get(col)
            .and_then(|&i| rec.get(i))
            .map(str::trim)
            .unwrap_or("")
    }

    fn err(&self, line: u64, msg: impl Into<String>) -> Error {
        parse_err(&self.path, line, msg.into())
    }

    fn opt<T: FromStr>(&self, line: u64, rec: &csv::StringRecord, col: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        let s = self.raw(rec, col);
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<T>()
            .map(Some)
            .map_err(|e| self.err(line, format!("column `{col}`: cannot parse `{s}`: {e}")))
    }

    fn req<T: FromStr>(&self, line: u64, rec: &csv::StringRecord, col: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.opt(line, rec, col)?
            .ok_or_else(|| self.err(line, format!("column `{col}` is empty")))
    }
}

fn parse_err(path: &str, line: u64, msg: String) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg,
    }
}

fn writer(path: &Path) -> Result<csv::Writer<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    Ok(csv::WriterBuilder::new().from_path(path)?)
}

fn finish<W: Write>(mut w: csv::Writer<W>) -> Result<()> {
    w.flush()?;
    Ok(())
}

pub fn write_grids(path: &Path, grids: &[CityGrid]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(GRID_HEADER)?;
    for g in grids {
        for c in &g.cells {
            w.write_record([
                g.meta.city_id.clone(),
                c.id.to_string(),
                num(c.x),
                num(c.y),
                num(c.dist),
                num(c.land_share),
                num(c.population),
                opt(c.rent),
                opt(c.dwelling_size),
                opt(c.time_car),
                opt(c.time_transit),
                opt(c.dist_car),
                c.n_ads.to_string(),
            ])?;
        }
    }
    finish(w)
}

/// Grid geometry and city-level inputs stored next to a grid file.
#[derive(Debug, Clone, PartialEq)]
pub struct CityRecord {
    pub meta: CityMeta,
    pub cell_size: f64,
    pub center: (f64, f64),
}

pub fn write_cities(path: &Path, grids: &[CityGrid]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(CITIES_HEADER)?;
    for g in grids {
        let m = &g.meta;
        let tp = m.transport;
        let tr = m.truth;
        w.write_record([
            m.city_id.clone(),
            num(g.cell_size),
            num(g.center.0),
            num(g.center.1),
            num(m.income),
            opt(m.t_per_km),
            opt(tp.map(|p| p.wage)),
            opt(tp.map(|p| p.fuel_price)),
            opt(tp.map(|p| p.fuel_efficiency)),
            opt(tp.map(|p| p.transit_fare)),
            opt(tp.map(|p| p.trips_per_period)),
            opt(tr.map(|p| p.beta)),
            opt(tr.map(|p| p.a_land)),
            opt(tr.map(|p| p.tfp)),
            opt(tr.map(|p| p.rho)),
            opt(tr.map(|p| p.farm_rent)),
            opt(tr.map(|p| p.population)),
            opt(tr.map(|p| p.land_share)),
        ])?;
    }
    finish(w)
}

pub fn read_cities(path: &Path) -> Result<Vec<CityRecord>> {
    let t = Table::read(path, &["city_id", "cell_size_km", "income"])?;
    let mut out = Vec::new();
    for (line, rec) in &t.rows {
        let line = *line;
        let transport = match t.opt::<f64>(line, rec, "wage")? {
            None => None,
            Some(wage) => Some(TransportParams {
                wage,
                fuel_price: t.req(line, rec, "fuel_price")?,
                fuel_efficiency: t.req(line, rec, "fuel_efficiency")?,
                transit_fare: t.req(line, rec, "transit_fare")?,
                trips_per_period: t.req(line, rec, "trips_per_period")?,
            }),
        };
        let income: f64 = t.req(line, rec, "income")?;
        let t_per_km: Option<f64> = t.opt(line, rec, "t_per_km")?;
        let truth = match t.opt::<f64>(line, rec, "beta")? {
            None => None,
            Some(beta) => {
                let p = CityParams::new(
                    beta,
                    t.req(line, rec, "a_land")?,
                    t.req(line, rec, "tfp")?,
                    t.req(line, rec, "rho")?,
                    income,
                    t_per_km.ok_or_else(|| t.err(line, "truth parameters need t_per_km"))?,
                    t.req(line, rec, "farm_rent")?,
                    t.req(line, rec, "population")?,
                )
                .and_then(|p| p.with_land_share(t.opt(line, rec, "land_share").map(|v| v.unwrap_or(1.0))?))
                .map_err(|e| t.err(line, e.to_string()))?;
                Some(p)
            }
        };
        out.push(CityRecord {
            meta: CityMeta {
                city_id: t.req(line, rec, "city_id")?,
                income,
                t_per_km,
                transport,
                truth,
            },
            cell_size: t.req(line, rec, "cell_size_km")?,
            center: (
                t.opt(line, rec, "center_x_km")?.unwrap_or(0.0),
                t.opt(line, rec, "center_y_km")?.unwrap_or(0.0),
            ),
        });
    }
    Ok(out)
}

pub fn write_ads(path: &Path, grids: &[CityGrid]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(ADS_HEADER)?;
    for g in grids {
        for a in &g.ads {
            w.write_record([g.meta.city_id.clone(), a.cell_id.to_string(), num(a.rent), num(a.size)])?;
        }
    }
    finish(w)
}

pub fn read_ads(path: &Path) -> Result<BTreeMap<String, Vec<Ad>>> {
    let t = Table::read(path, &ADS_HEADER)?;
    let mut out: BTreeMap<String, Vec<Ad>> = BTreeMap::new();
    for (line, rec) in &t.rows {
        let line = *line;
        out.entry(t.req(line, rec, "city_id")?).or_default().push(Ad {
            cell_id: t.req(line, rec, "cell_id")?,
            rent: t.req(line, rec, "rent")?,
            size: t.req(line, rec, "size_m2")?,
        });
    }
    Ok(out)
}

/// Reads a grid file and joins it with its city records and, when given,
/// its ads. Cities appear in the order of their first row in the grid file.
pub fn read_grids(grid_path: &Path, cities_path: &Path, ads_path: Option<&Path>) -> Result<Vec<CityGrid>> {
    let cities = read_cities(cities_path)?;
    let by_id: HashMap<&str, &CityRecord> = cities.iter().map(|c| (c.meta.city_id.as_str(), c)).collect();
    let mut ads = match ads_path {
        Some(p) => read_ads(p)?,
        None => BTreeMap::new(),
    };

    let t = Table::read(grid_path, &GRID_HEADER)?;
    let mut order: Vec<String> = Vec::new();
    let mut cells: HashMap<String, Vec<CellRecord>> = HashMap::new();
    for (line, rec) in &t.rows {
        let line = *line;
        let city: String = t.req(line, rec, "city_id")?;
        if !by_id.contains_key(city.as_str()) {
            return Err(t.err(line, format!("city `{city}` has no record in {}", cities_path.display())));
        }
        let land_share: f64 = t.req(line, rec, "land_share")?;
        if !(0.0..=1.0).contains(&land_share) {
            return Err(t.err(line, format!("land_share {land_share} outside [0, 1]")));
        }
        let mut c = CellRecord::empty(
            t.req(line, rec, "cell_id")?,
            t.req(line, rec, "x_km")?,
            t.req(line, rec, "y_km")?,
            t.req(line, rec, "dist_km")?,
        );
        c.land_share = land_share;
        c.population = t.req(line, rec, "population")?;
        c.rent = t.opt(line, rec, "rent_m2")?;
        c.dwelling_size = t.opt(line, rec, "dwelling_m2")?;
        c.time_car = t.opt(line, rec, "time_car_h")?;
        c.time_transit = t.opt(line, rec, "time_transit_h")?;
        c.dist_car = t.opt(line, rec, "dist_car_km")?;
        c.n_ads = t.opt(line, rec, "n_ads")?.unwrap_or(0);
        if !cells.contains_key(&city) {
            order.push(city.clone());
        }
        cells.entry(city).or_default().push(c);
    }

    let mut grids = Vec::with_capacity(order.len());
    for id in order {
        let r = by_id[id.as_str()];
        let mut g = CityGrid {
            meta: r.meta.clone(),
            cell_size: r.cell_size,
            center: r.center,
            cells: cells.remove(&id).unwrap_or_default(),
            ads: ads.remove(&id).unwrap_or_default(),
        };
        g.refresh_derived();
        grids.push(g);
    }
    Ok(grids)
}

pub fn write_features(path: &Path, features: &[CityFeatures]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(FEATURES_HEADER)?;
    for f in features {
        w.write_record([
            f.city_id.clone(),
            num(f.population),
            num(f.income),
            num(f.farm_rent),
            num(f.fuel_price),
            opt(f.commuting_speed),
            num(f.monocentricity),
            u8::from(f.coastal).to_string(),
            opt(f.gini),
            opt(f.informal_pct),
            f.regulatory.map(|r| r.to_string()).unwrap_or_default(),
            f.continent.as_str().to_string(),
            f.income_group.as_str().to_string(),
            opt(f.area_km2),
        ])?;
    }
    finish(w)
}

pub fn read_features(path: &Path) -> Result<Vec<CityFeatures>> {
    let t = Table::read(
        path,
        &[
            "city_id",
            "population",
            "income",
            "farm_rent",
            "fuel_price",
            "monocentricity",
            "continent",
            "income_group",
        ],
    )?;
    let mut out = Vec::new();
    for (line, rec) in &t.rows {
        let line = *line;
        let coastal = match t.raw(rec, "coastal") {
            "" | "0" | "false" => false,
            "1" | "true" => true,
            other => return Err(t.err(line, format!("column `coastal`: expected 0 or 1, got `{other}`"))),
        };
        let f = CityFeatures {
            city_id: t.req(line, rec, "city_id")?,
            population: t.req(line, rec, "population")?,
            income: t.req(line, rec, "income")?,
            farm_rent: t.req(line, rec, "farm_rent")?,
            fuel_price: t.req(line, rec, "fuel_price")?,
            commuting_speed: t.opt(line, rec, "commuting_speed")?,
            monocentricity: t.req(line, rec, "monocentricity")?,
            coastal,
            gini: t.opt(line, rec, "gini")?,
            informal_pct: t.opt(line, rec, "informal_pct")?,
            regulatory: t.opt(line, rec, "regulatory")?,
            continent: t.req(line, rec, "continent")?,
            income_group: t.req(line, rec, "income_group")?,
            area_km2: if t.has("area_km2") { t.opt(line, rec, "area_km2")? } else { None },
        };
        f.validate().map_err(|e| t.err(line, e.to_string()))?;
        out.push(f);
    }
    Ok(out)
}

/// One row of the per-city results file: a single target under one named
/// spec and method.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub city_id: String,
    pub spec: SpecName,
    pub method: Method,
    pub target: Target,
    /// `ok`, or the reason code of the skipped fit.
    pub status: String,
    pub slope: Option<f64>,
    pub se: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub r2: Option<f64>,
    pub n_obs: Option<usize>,
    pub sign: Option<SignClass>,
    pub skipped_missing: usize,
    pub skipped_regressor: usize,
    pub skipped_zero_dist: usize,
    pub beta_hat: Option<f64>,
    pub a_hat: Option<f64>,
    pub b_hat: Option<f64>,
    pub structural_valid: Option<bool>,
    pub market_cover: Option<f64>,
    pub spatial_cover: Option<f64>,
    pub message: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Flattens one spec outcome into a rent row and a density row.
pub fn result_rows(o: &SpecOutcome, quality: &DataQuality) -> [ResultRow; 2] {
    let row = |target: Target| {
        let r = match target {
            Target::Rent => &o.rent,
            Target::Density => &o.density,
        };
        let mut row = ResultRow {
            city_id: o.city_id.clone(),
            spec: o.spec_name,
            method: o.method,
            target,
            status: "ok".into(),
            slope: None,
            se: None,
            t: None,
            p: None,
            r2: None,
            n_obs: None,
            sign: None,
            skipped_missing: 0,
            skipped_regressor: 0,
            skipped_zero_dist: 0,
            beta_hat: o.structural.map(|s| s.beta),
            a_hat: o.structural.map(|s| s.a_land),
            b_hat: o.structural.map(|s| s.b_capital),
            structural_valid: o.structural.map(|s| s.valid),
            market_cover: quality.market_cover,
            spatial_cover: Some(quality.spatial_cover),
            message: String::new(),
        };
        match r {
            Ok(g) => {
                row.slope = Some(g.slope);
                row.se = Some(g.fit.std_errors[1]);
                row.t = Some(g.fit.t_stats[1]);
                row.p = Some(g.fit.p_values[1]);
                row.r2 = Some(g.fit.r_squared);
                row.n_obs = Some(g.fit.n_obs);
                row.sign = Some(g.sign);
                row.skipped_missing = g.skipped.missing_target;
                row.skipped_regressor = g.skipped.invalid_regressor;
                row.skipped_zero_dist = g.skipped.zero_distance;
            }
            Err(f) => {
                row.status = f.code.to_string();
                row.message = f.message.clone();
            }
        }
        row
    };
    [row(Target::Rent), row(Target::Density)]
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(RESULTS_HEADER)?;
    for r in rows {
        w.write_record([
            r.city_id.clone(),
            r.spec.as_str().to_string(),
            r.method.as_str().to_string(),
            r.target.as_str().to_string(),
            r.status.clone(),
            opt(r.slope),
            opt(r.se),
            opt(r.t),
            opt(r.p),
            opt(r.r2),
            r.n_obs.map(|n| n.to_string()).unwrap_or_default(),
            r.sign.map(|s| s.as_str().to_string()).unwrap_or_default(),
            r.skipped_missing.to_string(),
            r.skipped_regressor.to_string(),
            r.skipped_zero_dist.to_string(),
            opt(r.beta_hat),
            opt(r.a_hat),
            opt(r.b_hat),
            r.structural_valid.map(|v| v.to_string()).unwrap_or_default(),
            opt(r.market_cover),
            opt(r.spatial_cover),
            r.message.clone(),
        ])?;
    }
    finish(w)
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let t = Table::read(path, &["city_id", "spec", "method", "target", "status", "slope"])?;
    let mut out = Vec::new();
    for (line, rec) in &t.rows {
        let line = *line;
        let parsed = |col: &str| -> Result<usize> { Ok(t.opt(line, rec, col)?.unwrap_or(0)) };
        out.push(ResultRow {
            city_id: t.req(line, rec, "city_id")?,
            spec: t.req(line, rec, "spec")?,
            method: t.req(line, rec, "method")?,
            target: t.req(line, rec, "target")?,
            status: t.req(line, rec, "status")?,
            slope: t.opt(line, rec, "slope")?,
            se: t.opt(line, rec, "se")?,
            t: t.opt(line, rec, "t")?,
            p: t.opt(line, rec, "p")?,
            r2: t.opt(line, rec, "r2")?,
            n_obs: t.opt(line, rec, "n_obs")?,
            sign: t.opt(line, rec, "sign")?,
            skipped_missing: parsed("skipped_missing")?,
            skipped_regressor: parsed("skipped_regressor")?,
            skipped_zero_dist: parsed("skipped_zero_dist")?,
            beta_hat: t.opt(line, rec, "beta_hat")?,
            a_hat: t.opt(line, rec, "a_hat")?,
            b_hat: t.opt(line, rec, "b_hat")?,
            structural_valid: t.opt(line, rec, "structural_valid")?,
            market_cover: t.opt(line, rec, "market_cover")?,
            spatial_cover: t.opt(line, rec, "spatial_cover")?,
            message: t.raw(rec, "message").to_string(),
        });
    }
    Ok(out)
}
