//! Run reports: distribution tables of the per-city estimates,
//! plot-ready histogram files, skip listings and the cross-city tables.
//!
//! Everything written here is a pure function of the run's CSV files, so
//! identical runs produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::econo::FitResult;
use crate::error::Result;
use crate::gradient::{SpecName, Target};
use crate::io::{self, num, opt, ResultRow};
use crate::pipeline::{RunSummary, SecondStepReport, UrbanAreaReport};

/// Histogram bins per distribution.
pub const BINS: usize = 20;

/// Mean, min, quartiles and max of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Distribution {
    pub n: usize,
    pub mean: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn distribution(values: &[f64]) -> Option<Distribution> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(Distribution {
        n: v.len(),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        min: v[0],
        q1: quantile(&v, 0.25),
        median: quantile(&v, 0.5),
        q3: quantile(&v, 0.75),
        max: v[v.len() - 1],
    })
}

/// Equal-width bin counts over `[min, max]`; a constant sample fills one bin.
pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, f64, usize)> {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let Some(d) = distribution(&v) else {
        return Vec::new();
    };
    if d.max == d.min {
        return vec![(d.min, d.max, v.len())];
    }
    let w = (d.max - d.min) / bins as f64;
    let mut counts = vec![0usize; bins];
    for x in v {
        let k = (((x - d.min) / w) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(k, c)| (d.min + k as f64 * w, d.min + (k + 1) as f64 * w, c))
        .collect()
}

fn fmt4(v: f64) -> String {
    format!("{v:.4}")
}

type Key = (SpecName, &'static str, Target);

fn key_of(r: &ResultRow) -> Key {
    (r.spec, r.method.as_str(), r.target)
}

fn grouped(rows: &[ResultRow]) -> BTreeMap<Key, Vec<&ResultRow>> {
    let mut m: BTreeMap<Key, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        m.entry(key_of(r)).or_default().push(r);
    }
    m
}

fn dist_line(out: &mut String, label: &str, values: &[f64]) {
    match distribution(values) {
        Some(d) => writeln!(
            out,
            "| {label} | {} | {} | {} | {} | {} | {} | {} |",
            d.n,
            fmt4(d.mean),
            fmt4(d.min),
            fmt4(d.q1),
            fmt4(d.median),
            fmt4(d.q3),
            fmt4(d.max)
        ),
        None => writeln!(out, "| {label} | 0 | | | | | | |"),
    }
    .expect("write to string");
}

const TABLE_HEAD: &str = "| estimate | n | mean | min | Q1 | median | Q3 | max |\n|---|---|---|---|---|---|---|---|\n";

/// Writes `summary.md`, `hist_slope.csv`, `hist_r2.csv` and `skipped.csv`
/// from the files of a run directory.
pub fn write_report(dir: &Path) -> Result<()> {
    let rows = io::read_results(&dir.join("results.csv"))?;
    let groups = grouped(&rows);
    let mut out = String::new();
    out.push_str("# Run summary\n\n");

    let checks_path = dir.join("checks.csv");
    if checks_path.exists() {
        out.push_str("## Checks\n\n");
        let mut rdr = csv::Reader::from_path(&checks_path)?;
        for rec in rdr.records() {
            let rec = rec?;
            writeln!(out, "- [{}] {}: {}", &rec[1], &rec[0], &rec[2]).expect("write to string");
        }
        out.push('\n');
    }

    out.push_str("## Gradient estimates\n\n");
    out.push_str(TABLE_HEAD);
    for ((spec, method, target), rs) in &groups {
        let slopes: Vec<f64> = rs.iter().filter(|r| r.is_ok()).filter_map(|r| r.slope).collect();
        dist_line(&mut out, &format!("{} {method} {} slope", spec.as_str(), target.as_str()), &slopes);
    }
    out.push_str("\n## R²\n\n");
    out.push_str(TABLE_HEAD);
    for ((spec, method, target), rs) in &groups {
        let r2: Vec<f64> = rs.iter().filter(|r| r.is_ok()).filter_map(|r| r.r2).collect();
        dist_line(&mut out, &format!("{} {method} {} R²", spec.as_str(), target.as_str()), &r2);
    }

    out.push_str("\n## Structural parameters\n\n");
    out.push_str(TABLE_HEAD);
    for ((spec, method, target), rs) in &groups {
        if *target != Target::Rent || rs.iter().all(|r| r.beta_hat.is_none()) {
            continue;
        }
        let pick = |f: fn(&ResultRow) -> Option<f64>| rs.iter().filter_map(|r| f(r)).collect::<Vec<f64>>();
        dist_line(&mut out, &format!("{} {method} beta", spec.as_str()), &pick(|r| r.beta_hat));
        dist_line(&mut out, &format!("{} {method} a", spec.as_str()), &pick(|r| r.a_hat));
        dist_line(&mut out, &format!("{} {method} b", spec.as_str()), &pick(|r| r.b_hat));
        let invalid = rs.iter().filter(|r| r.structural_valid == Some(false)).count();
        if invalid > 0 {
            writeln!(out, "\n{invalid} cities under {} {method} have shares outside (0, 1).\n", spec.as_str())
                .expect("write to string");
        }
    }

    out.push_str("\n## Data quality\n\n");
    out.push_str(TABLE_HEAD);
    let mut seen = BTreeMap::new();
    for r in &rows {
        seen.entry(r.city_id.as_str()).or_insert((r.market_cover, r.spatial_cover));
    }
    let mc: Vec<f64> = seen.values().filter_map(|v| v.0).collect();
    let sc: Vec<f64> = seen.values().filter_map(|v| v.1).collect();
    dist_line(&mut out, "market cover (residents per ad)", &mc);
    dist_line(&mut out, "spatial cover", &sc);

    out.push_str("\n## Skipped fits\n\n");
    let mut reasons: BTreeMap<(&str, String), usize> = BTreeMap::new();
    let mut cells: BTreeMap<Key, [usize; 3]> = BTreeMap::new();
    for r in &rows {
        if !r.is_ok() {
            *reasons.entry((r.status.as_str(), format!("{} {} {}", r.spec.as_str(), r.method.as_str(), r.target.as_str()))).or_default() += 1;
        }
        let c = cells.entry(key_of(r)).or_default();
        c[0] += r.skipped_missing;
        c[1] += r.skipped_regressor;
        c[2] += r.skipped_zero_dist;
    }
    if reasons.is_empty() {
        out.push_str("No city was skipped.\n");
    } else {
        out.push_str("| reason | fit | cities |\n|---|---|---|\n");
        for ((code, fit), n) in &reasons {
            writeln!(out, "| {code} | {fit} | {n} |").expect("write to string");
        }
    }
    out.push_str("\n## Skipped cells\n\n| fit | missing target | invalid regressor | zero distance |\n|---|---|---|---|\n");
    for ((spec, method, target), c) in &cells {
        writeln!(out, "| {} {method} {} | {} | {} | {} |", spec.as_str(), target.as_str(), c[0], c[1], c[2])
            .expect("write to string");
    }

    for (file, title) in [("second_step.csv", "Second step"), ("urban_area.csv", "Urban area")] {
        let path = dir.join(file);
        if path.exists() {
            writeln!(out, "\n## {title}\n").expect("write to string");
            table_from_csv(&path, &mut out)?;
        }
    }
    std::fs::write(dir.join("summary.md"), out)?;

    write_histogram(&dir.join("hist_slope.csv"), &groups, |r| r.slope)?;
    write_histogram(&dir.join("hist_r2.csv"), &groups, |r| r.r2)?;

    let mut w = csv::Writer::from_path(dir.join("skipped.csv"))?;
    w.write_record(["city_id", "spec", "method", "target", "reason", "message"])?;
    for r in rows.iter().filter(|r| !r.is_ok()) {
        w.write_record([
            r.city_id.as_str(),
            r.spec.as_str(),
            r.method.as_str(),
            r.target.as_str(),
            r.status.as_str(),
            r.message.as_str(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn table_from_csv(path: &Path, out: &mut String) -> Result<()> {
    let mut rdr = csv::Reader::from_path(path)?;
    let head = rdr.headers()?.clone();
    writeln!(out, "| {} |", head.iter().collect::<Vec<_>>().join(" | ")).expect("write to string");
    writeln!(out, "|{}", "---|".repeat(head.len())).expect("write to string");
    for rec in rdr.records() {
        let rec = rec?;
        let cells: Vec<String> = rec
            .iter()
            .map(|s| match s.parse::<f64>() {
                Ok(v) if s.contains('.') || s.contains('e') => fmt4(v),
                _ => s.to_string(),
            })
            .collect();
        writeln!(out, "| {} |", cells.join(" | ")).expect("write to string");
    }
    Ok(())
}

fn write_histogram(path: &Path, groups: &BTreeMap<Key, Vec<&ResultRow>>, value: fn(&ResultRow) -> Option<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["spec", "method", "target", "bin_lo", "bin_hi", "count"])?;
    for ((spec, method, target), rs) in groups {
        let v: Vec<f64> = rs.iter().filter(|r| r.is_ok()).filter_map(|r| value(r)).collect();
        for (lo, hi, c) in histogram(&v, BINS) {
            w.write_record([spec.as_str(), method, target.as_str(), &num(lo), &num(hi), &c.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn fit_rows(w: &mut csv::Writer<std::fs::File>, prefix: &[String], fit: &FitResult, dropped: usize) -> Result<()> {
    for j in 0..fit.coefficients.len() {
        let mut rec = prefix.to_vec();
        rec.extend([
            "ok".to_string(),
            fit.names[j].clone(),
            num(fit.coefficients[j]),
            num(fit.std_errors[j]),
            num(fit.t_stats[j]),
            num(fit.p_values[j]),
            fit.n_obs.to_string(),
            num(fit.r_squared),
            dropped.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    Ok(())
}

fn failed_row(w: &mut csv::Writer<std::fs::File>, prefix: &[String], code: &str) -> Result<()> {
    let mut rec = prefix.to_vec();
    rec.push(code.to_string());
    rec.extend(std::iter::repeat_n(String::new(), 8));
    w.write_record(&rec)?;
    Ok(())
}

const FIT_COLUMNS: [&str; 9] = ["status", "term", "coef", "se", "t", "p", "n_obs", "r2", "dropped"];

pub fn write_second_step(path: &Path, steps: &[SecondStepReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["dependent", "specification"];
    head.extend(FIT_COLUMNS);
    w.write_record(&head)?;
    for s in steps {
        let prefix = [s.dependent.as_str().to_string(), s.specification.to_string()];
        match &s.outcome {
            Ok(r) => fit_rows(&mut w, &prefix, &r.fit, r.dropped)?,
            Err((code, _)) => failed_row(&mut w, &prefix, code)?,
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_urban_area(path: &Path, report: &UrbanAreaReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut head = vec!["subset"];
    head.extend(FIT_COLUMNS);
    w.write_record(&head)?;
    for (subset, fit) in &report.fits {
        let prefix = [subset.as_str().to_string()];
        match fit {
            Ok((fit, dropped)) => fit_rows(&mut w, &prefix, fit, *dropped)?,
            Err((code, _)) => failed_row(&mut w, &prefix, code)?,
        }
    }
    match &report.chow {
        Ok(c) => w.write_record([
            "chow".to_string(),
            "ok".to_string(),
            "F".to_string(),
            num(c.f),
            String::new(),
            String::new(),
            num(c.p),
            (c.n_first + c.n_second).to_string(),
            String::new(),
            String::new(),
        ])?,
        Err((code, _)) => failed_row(&mut w, &["chow".to_string()], code)?,
    }
    w.flush()?;
    Ok(())
}

pub fn write_checks(path: &Path, summary: &RunSummary, failed: &[(String, &'static str, String)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["check", "result", "detail"])?;
    for c in &summary.checks {
        w.write_record([c.name.as_str(), if c.passed { "PASS" } else { "FAIL" }, c.detail.as_str()])?;
    }
    for (id, code, msg) in failed {
        w.write_record([format!("simulate {id}"), "FAIL".to_string(), format!("{code}: {msg}")])?;
    }
    w.flush()?;
    Ok(())
}

/// Structural estimates per city from a results file: one row per city,
/// spec and method whose rent and density fits both succeeded.
pub fn write_structural<W: std::io::Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["city_id", "spec", "method", "beta_hat", "a_hat", "b_hat", "valid"])?;
    for r in rows.iter().filter(|r| r.target == Target::Rent && r.beta_hat.is_some()) {
        w.write_record([
            r.city_id.clone(),
            r.spec.as_str().to_string(),
            r.method.as_str().to_string(),
            opt(r.beta_hat),
            opt(r.a_hat),
            opt(r.b_hat),
            r.structural_valid.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
