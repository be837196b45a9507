//! Run configuration in TOML.
//!
//! Top-level keys plus the sections `[grid]`, `[city]`, `[transport]`,
//! `[noise]`, `[features]` and `[estimate]`. Parameters drawn per city
//! accept either a number or a `[lo, hi]` range. Unknown keys and invalid
//! values are all collected and reported together.
//!
//! ```toml
//! seed = 7
//! cities = 192
//! out_dir = "run"
//!
//! [grid]
//! cells_per_fringe = 20
//!
//! [city]
//! beta = [0.25, 0.40]
//! income = [4000, 60000]
//!
//! [noise]
//! sigma_rent = 0.2
//! ```

use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::econo::Method;
use crate::error::{Error, Result};
use crate::gradient::{SpecName, MIN_OBS};

/// Closed interval a per-city parameter is drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
    /// Draw uniformly in logs rather than levels.
    pub log: bool,
}

impl Range {
    pub const fn fixed(v: f64) -> Self {
        Range { lo: v, hi: v, log: false }
    }

    pub const fn between(lo: f64, hi: f64) -> Self {
        Range { lo, hi, log: false }
    }

    pub const fn log_between(lo: f64, hi: f64) -> Self {
        Range { lo, hi, log: true }
    }

    /// Maps a uniform draw `u ∈ [0, 1)` into the range.
    pub fn at(&self, u: f64) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else if self.log {
            (self.lo.ln() + u * (self.hi.ln() - self.lo.ln())).exp()
        } else {
            self.lo + u * (self.hi - self.lo)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityRanges {
    pub beta: Range,
    pub a_land: Range,
    pub tfp: Range,
    pub rho: Range,
    pub income: Range,
    pub population: Range,
    pub farm_rent: Range,
    pub land_share: Range,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportRanges {
    pub fuel_price: Range,
    pub fuel_efficiency: Range,
    pub transit_fare: Range,
    pub car_speed_kmh: Range,
    pub car_detour: Range,
    pub transit_speed_kmh: Range,
    pub transit_access_h: Range,
    pub sample_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    pub sigma_rent: f64,
    pub sigma_density: f64,
    pub ad_rate: Option<f64>,
    pub mask_rate: f64,
    pub congestion_sigma: f64,
    pub congestion_loading: f64,
}

/// City characteristics that the model does not generate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureConfig {
    /// Income at or above which a city is high-income.
    pub high_income_threshold: f64,
    pub coastal_share: f64,
    pub gini: Range,
    pub informal_pct: Range,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateConfig {
    pub specs: Vec<SpecName>,
    pub methods: Vec<Method>,
    pub min_obs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub cities: usize,
    pub out_dir: PathBuf,
    /// Cell size is the city's fringe distance divided by this.
    pub cells_per_fringe: f64,
    pub city: CityRanges,
    pub transport: TransportRanges,
    pub noise: NoiseConfig,
    pub features: FeatureConfig,
    pub estimate: EstimateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            cities: 192,
            out_dir: PathBuf::from("run"),
            cells_per_fringe: 20.0,
            city: CityRanges {
                beta: Range::between(0.25, 0.40),
                a_land: Range::between(0.08, 0.20),
                tfp: Range::between(0.8, 1.5),
                rho: Range::between(0.5, 1.0),
                income: Range::log_between(4_000.0, 60_000.0),
                population: Range::log_between(3.0e5, 5.0e6),
                farm_rent: Range::log_between(0.5, 5.0),
                land_share: Range::between(0.85, 1.0),
            },
            transport: TransportRanges {
                fuel_price: Range::between(0.6, 2.0),
                fuel_efficiency: Range::fixed(0.08),
                transit_fare: Range::between(0.2, 2.0),
                car_speed_kmh: Range::between(18.0, 45.0),
                car_detour: Range::fixed(1.3),
                transit_speed_kmh: Range::between(12.0, 25.0),
                transit_access_h: Range::fixed(0.25),
                sample_fraction: None,
            },
            noise: NoiseConfig {
                sigma_rent: 0.2,
                sigma_density: 0.2,
                ad_rate: None,
                mask_rate: 0.05,
                congestion_sigma: 0.0,
                congestion_loading: 0.0,
            },
            features: FeatureConfig {
                high_income_threshold: 20_000.0,
                coastal_share: 0.4,
                gini: Range::between(0.25, 0.60),
                informal_pct: Range::between(0.0, 40.0),
            },
            estimate: EstimateConfig {
                specs: SpecName::ALL.to_vec(),
                methods: vec![Method::Ols, Method::Tsls],
                min_obs: MIN_OBS,
            },
        }
    }
}

/// Reads keys out of one TOML table, remembering which were used.
struct Section<'a> {
    name: &'a str,
    table: Option<&'a Table>,
    used: Vec<&'a str>,
    errors: &'a mut Vec<String>,
}

impl<'a> Section<'a> {
    fn key(&self, k: &str) -> String {
        if self.name.is_empty() {
            k.to_string()
        } else {
            format!("{}.{k}", self.name)
        }
    }

    fn get(&mut self, k: &'a str) -> Option<&'a Value> {
        self.used.push(k);
        self.table.and_then(|t| t.get(k))
    }

    fn float(v: &Value) -> Option<f64> {
        match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn number(&mut self, k: &'a str, default: f64, ok: impl Fn(f64) -> bool, rule: &str) -> f64 {
        match self.get(k) {
            None => default,
            Some(v) => match Self::float(v) {
                Some(x) if ok(x) => x,
                _ => {
                    let key = self.key(k);
                    self.errors.push(format!("`{key}` = {v}: {rule}"));
                    default
                }
            },
        }
    }

    fn opt_number(&mut self, k: &'a str, default: Option<f64>, ok: impl Fn(f64) -> bool, rule: &str) -> Option<f64> {
        match self.get(k) {
            None => default,
            Some(v) => match Self::float(v) {
                Some(x) if ok(x) => Some(x),
                _ => {
                    let key = self.key(k);
                    self.errors.push(format!("`{key}` = {v}: {rule}"));
                    default
                }
            },
        }
    }

    fn integer(&mut self, k: &'a str, default: u64, min: u64) -> u64 {
        match self.get(k) {
            None => default,
            Some(Value::Integer(i)) if *i >= min as i64 => *i as u64,
            Some(v) => {
                let key = self.key(k);
                self.errors.push(format!("`{key}` = {v}: must be an integer >= {min}"));
                default
            }
        }
    }

    fn string(&mut self, k: &'a str) -> Option<&'a str> {
        match self.get(k) {
            None => None,
            Some(Value::String(s)) => Some(s),
            Some(v) => {
                let key = self.key(k);
                self.errors.push(format!("`{key}` = {v}: must be a string"));
                None
            }
        }
    }

    /// A number or `[lo, hi]`, checked against `ok` at both ends.
    fn range(&mut self, k: &'a str, default: Range, ok: impl Fn(f64) -> bool, rule: &str) -> Range {
        let Some(v) = self.get(k) else {
            return default;
        };
        let parsed = match v {
            Value::Array(a) if a.len() == 2 => match (Self::float(&a[0]), Self::float(&a[1])) {
                (Some(lo), Some(hi)) if lo <= hi => Some(Range { lo, hi, log: default.log }),
                _ => None,
            },
            other => Self::float(other).map(|x| Range { lo: x, hi: x, log: default.log }),
        };
        match parsed {
            Some(r) if ok(r.lo) && ok(r.hi) => r,
            _ => {
                let key = self.key(k);
                self.errors.push(format!("`{key}` = {v}: expected a number or [lo, hi] with lo <= hi, {rule}"));
                default
            }
        }
    }

    fn list<T: std::str::FromStr<Err = String>>(&mut self, k: &'a str, default: Vec<T>) -> Vec<T> {
        let Some(v) = self.get(k) else {
            return default;
        };
        let key = self.key(k);
        let Value::Array(items) = v else {
            self.errors.push(format!("`{key}` = {v}: must be a list of strings"));
            return default;
        };
        let mut out = Vec::new();
        for item in items {
            match item.as_str().map(str::parse::<T>) {
                Some(Ok(x)) => out.push(x),
                Some(Err(e)) => self.errors.push(format!("`{key}`: {e}")),
                None => self.errors.push(format!("`{key}`: {item} is not a string")),
            }
        }
        if out.is_empty() {
            self.errors.push(format!("`{key}` must not be empty"));
            return default;
        }
        out
    }

    fn close(self) {
        let Some(t) = self.table else {
            return;
        };
        for k in t.keys() {
            if !self.used.contains(&k.as_str()) {
                let key = self.key(k);
                self.errors.push(format!("unknown key `{key}`"));
            }
        }
    }
}

const SECTIONS: [&str; 6] = ["grid", "city", "transport", "noise", "features", "estimate"];

impl RunConfig {
    /// Parses a config; relative `out_dir` paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<RunConfig> {
        let root: Table = text.parse().map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        let d = RunConfig::default();
        let mut errors = Vec::new();

        let section = |name: &str, errors: &mut Vec<String>| -> Option<Table> {
            match root.get(name) {
                None => None,
                Some(Value::Table(t)) => Some(t.clone()),
                Some(_) => {
                    errors.push(format!("`{name}` must be a section"));
                    None
                }
            }
        };
        let tables: Vec<Option<Table>> = SECTIONS.iter().map(|s| section(s, &mut errors)).collect();

        let pos = |x: f64| x.is_finite() && x > 0.0;
        let nonneg = |x: f64| x.is_finite() && x >= 0.0;
        let share = |x: f64| x > 0.0 && x < 1.0;

        let (seed, cities, out_dir) = {
            let mut top = Section {
                name: "",
                table: Some(&root),
                used: SECTIONS.to_vec(),
                errors: &mut errors,
            };
            let seed = top.integer("seed", d.seed, 0);
            let cities = top.integer("cities", d.cities as u64, 1) as usize;
            let out_dir = top.string("out_dir").map_or(d.out_dir.clone(), PathBuf::from);
            top.close();
            (seed, cities, out_dir)
        };

        let mut s = Section { name: "grid", table: tables[0].as_ref(), used: vec![], errors: &mut errors };
        let cells_per_fringe = s.number("cells_per_fringe", d.cells_per_fringe, |x| x.is_finite() && x >= 1.0, "must be >= 1");
        s.close();

        let mut s = Section { name: "city", table: tables[1].as_ref(), used: vec![], errors: &mut errors };
        let c = &d.city;
        let city = CityRanges {
            beta: s.range("beta", c.beta, share, "values in (0, 1)"),
            a_land: s.range("a_land", c.a_land, share, "values in (0, 1)"),
            tfp: s.range("tfp", c.tfp, pos, "values > 0"),
            rho: s.range("rho", c.rho, pos, "values > 0"),
            income: s.range("income", c.income, pos, "values > 0"),
            population: s.range("population", c.population, pos, "values > 0"),
            farm_rent: s.range("farm_rent", c.farm_rent, pos, "values > 0"),
            land_share: s.range("land_share", c.land_share, |x| x > 0.0 && x <= 1.0, "values in (0, 1]"),
        };
        s.close();

        let mut s = Section { name: "transport", table: tables[2].as_ref(), used: vec![], errors: &mut errors };
        let t = &d.transport;
        let transport = TransportRanges {
            fuel_price: s.range("fuel_price", t.fuel_price, pos, "values > 0"),
            fuel_efficiency: s.range("fuel_efficiency", t.fuel_efficiency, pos, "values > 0"),
            transit_fare: s.range("transit_fare", t.transit_fare, nonneg, "values >= 0"),
            car_speed_kmh: s.range("car_speed_kmh", t.car_speed_kmh, pos, "values > 0"),
            car_detour: s.range("car_detour", t.car_detour, |x| x >= 1.0, "values >= 1"),
            transit_speed_kmh: s.range("transit_speed_kmh", t.transit_speed_kmh, pos, "values > 0"),
            transit_access_h: s.range("transit_access_h", t.transit_access_h, nonneg, "values >= 0"),
            sample_fraction: s.opt_number("sample_fraction", t.sample_fraction, |x| x > 0.0 && x <= 1.0, "must be in (0, 1]"),
        };
        s.close();

        let mut s = Section { name: "noise", table: tables[3].as_ref(), used: vec![], errors: &mut errors };
        let n = &d.noise;
        let noise = NoiseConfig {
            sigma_rent: s.number("sigma_rent", n.sigma_rent, nonneg, "must be >= 0"),
            sigma_density: s.number("sigma_density", n.sigma_density, nonneg, "must be >= 0"),
            ad_rate: s.opt_number("ad_rate", n.ad_rate, nonneg, "must be >= 0"),
            mask_rate: s.number("mask_rate", n.mask_rate, |x| (0.0..1.0).contains(&x), "must be in [0, 1)"),
            congestion_sigma: s.number("congestion_sigma", n.congestion_sigma, nonneg, "must be >= 0"),
            congestion_loading: s.number("congestion_loading", n.congestion_loading, f64::is_finite, "must be finite"),
        };
        s.close();

        let mut s = Section { name: "features", table: tables[4].as_ref(), used: vec![], errors: &mut errors };
        let f = &d.features;
        let features = FeatureConfig {
            high_income_threshold: s.number("high_income_threshold", f.high_income_threshold, pos, "must be > 0"),
            coastal_share: s.number("coastal_share", f.coastal_share, |x| (0.0..=1.0).contains(&x), "must be in [0, 1]"),
            gini: s.range("gini", f.gini, |x| (0.0..=1.0).contains(&x), "values in [0, 1]"),
            informal_pct: s.range("informal_pct", f.informal_pct, |x| (0.0..=100.0).contains(&x), "values in [0, 100]"),
        };
        s.close();

        let mut s = Section { name: "estimate", table: tables[5].as_ref(), used: vec![], errors: &mut errors };
        let estimate = EstimateConfig {
            specs: s.list("specs", d.estimate.specs.clone()),
            methods: s.list("methods", d.estimate.methods.clone()),
            min_obs: s.integer("min_obs", d.estimate.min_obs as u64, 3) as usize,
        };
        s.close();

        let out_dir = if out_dir.is_absolute() { out_dir } else { base.join(out_dir) };
        if let Some(parent) = out_dir.parent().filter(|p| !p.as_os_str().is_empty()) {
            if !parent.exists() {
                errors.push(format!("`out_dir`: parent directory {} does not exist", parent.display()));
            }
        }

        if !errors.is_empty() {
            return Err(Error::Config(errors));
        }
        Ok(RunConfig {
            seed,
            cities,
            out_dir,
            cells_per_fringe,
            city,
            transport,
            noise,
            features,
            estimate,
        })
    }

    /// The configuration in the format [`RunConfig::parse`] reads, every key
    /// spelled out. `out_dir` is left out so that the text depends only on
    /// what was simulated.
    pub fn to_toml(&self) -> String {
        fn range(r: &Range) -> Value {
            if r.lo == r.hi {
                Value::Float(r.lo)
            } else {
                Value::Array(vec![Value::Float(r.lo), Value::Float(r.hi)])
            }
        }
        fn section(entries: Vec<(&str, Option<Value>)>) -> Value {
            Value::Table(entries.into_iter().filter_map(|(k, v)| Some((k.to_string(), v?))).collect())
        }
        let f = |x: f64| Some(Value::Float(x));
        let r = |x: &Range| Some(range(x));
        let strings = |v: Vec<&str>| Some(Value::Array(v.into_iter().map(|s| Value::String(s.to_lowercase())).collect()));
        let (c, t, n, fe, e) = (&self.city, &self.transport, &self.noise, &self.features, &self.estimate);
        let mut root = Table::new();
        root.insert("seed".into(), Value::Integer(self.seed as i64));
        root.insert("cities".into(), Value::Integer(self.cities as i64));
        root.insert("grid".into(), section(vec![("cells_per_fringe", f(self.cells_per_fringe))]));
        root.insert(
            "city".into(),
            section(vec![
                ("beta", r(&c.beta)),
                ("a_land", r(&c.a_land)),
                ("tfp", r(&c.tfp)),
                ("rho", r(&c.rho)),
                ("income", r(&c.income)),
                ("population", r(&c.population)),
                ("farm_rent", r(&c.farm_rent)),
                ("land_share", r(&c.land_share)),
            ]),
        );
        root.insert(
            "transport".into(),
            section(vec![
                ("fuel_price", r(&t.fuel_price)),
                ("fuel_efficiency", r(&t.fuel_efficiency)),
                ("transit_fare", r(&t.transit_fare)),
                ("car_speed_kmh", r(&t.car_speed_kmh)),
                ("car_detour", r(&t.car_detour)),
                ("transit_speed_kmh", r(&t.transit_speed_kmh)),
                ("transit_access_h", r(&t.transit_access_h)),
                ("sample_fraction", t.sample_fraction.map(Value::Float)),
            ]),
        );
        root.insert(
            "noise".into(),
            section(vec![
                ("sigma_rent", f(n.sigma_rent)),
                ("sigma_density", f(n.sigma_density)),
                ("ad_rate", n.ad_rate.map(Value::Float)),
                ("mask_rate", f(n.mask_rate)),
                ("congestion_sigma", f(n.congestion_sigma)),
                ("congestion_loading", f(n.congestion_loading)),
            ]),
        );
        root.insert(
            "features".into(),
            section(vec![
                ("high_income_threshold", f(fe.high_income_threshold)),
                ("coastal_share", f(fe.coastal_share)),
                ("gini", r(&fe.gini)),
                ("informal_pct", r(&fe.informal_pct)),
            ]),
        );
        root.insert(
            "estimate".into(),
            section(vec![
                ("specs", strings(e.specs.iter().map(|s| s.as_str()).collect())),
                ("methods", strings(e.methods.iter().map(|m| m.as_str()).collect())),
                ("min_obs", Some(Value::Integer(e.min_obs as i64))),
            ]),
        );
        root.to_string()
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::parse(&text, base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_file() {
        let c = RunConfig::parse("", Path::new(".")).unwrap();
        let d = RunConfig::default();
        assert_eq!(c.city, d.city);
        assert_eq!(c.cities, 192);
        assert_eq!(c.out_dir, Path::new(".").join("run"));
    }

    #[test]
    fn values_and_ranges() {
        let text = r#"
            seed = 9
            cities = 12
            [city]
            beta = 0.3
            income = [1000, 2000]
            [noise]
            ad_rate = 2
            [estimate]
            specs = ["main", "r5"]
            methods = ["2sls"]
        "#;
        let c = RunConfig::parse(text, Path::new(".")).unwrap();
        assert_eq!((c.seed, c.cities), (9, 12));
        assert_eq!(c.city.beta, Range::fixed(0.3));
        assert_eq!(c.city.income, Range::log_between(1000.0, 2000.0));
        assert_eq!(c.noise.ad_rate, Some(2.0));
        assert_eq!(c.estimate.specs, vec![SpecName::Main, SpecName::R5]);
        assert_eq!(c.estimate.methods, vec![Method::Tsls]);
    }

    #[test]
    fn every_violation_is_listed() {
        let text = r#"
            sede = 1
            [city]
            beta = 1.5
            incom = 3
            [noise]
            mask_rate = 1.0
            [estimate]
            specs = ["main", "r9"]
            [extra]
            x = 1
        "#;
        match RunConfig::parse(text, Path::new(".")) {
            Err(Error::Config(v)) => {
                let all = v.join("\n");
                for needle in ["`sede`", "`city.beta`", "`city.incom`", "`noise.mask_rate`", "r9", "`extra`"] {
                    assert!(all.contains(needle), "missing {needle} in\n{all}");
                }
                assert_eq!(v.len(), 6, "{all}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn resolved_config_parses_back() {
        let mut c = RunConfig::default();
        c.noise.ad_rate = Some(1.5);
        c.transport.sample_fraction = Some(0.2);
        c.estimate.methods = vec![Method::Tsls];
        let back = RunConfig::parse(&c.to_toml(), Path::new("")).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn range_mapping() {
        let r = Range::log_between(1.0, 100.0);
        assert!((r.at(0.5) - 10.0).abs() < 1e-12);
        assert_eq!(Range::between(2.0, 4.0).at(0.25), 2.5);
        assert_eq!(Range::fixed(3.0).at(0.9), 3.0);
    }
}
