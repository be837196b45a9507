//! Regression engine: OLS with intercept, just-identified 2SLS, sign
//! classification and the Chow test. Standard errors are classical
//! (homoskedastic); p-values use Student's t with `n - k` degrees of
//! freedom.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use crate::error::{domain, Error, Result};

/// Name given to the intercept column.
pub const INTERCEPT: &str = "const";
/// Two-sided level used by [`classify_sign`].
pub const SIGNIFICANCE_LEVEL: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ols,
    Tsls,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ols => "OLS",
            Method::Tsls => "2SLS",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ols" => Ok(Method::Ols),
            "2sls" | "tsls" | "iv" => Ok(Method::Tsls),
            other => Err(format!("unknown method `{other}` (expected ols or 2sls)")),
        }
    }
}

/// One fitted regression. Index 0 of every per-coefficient vector is the
/// intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub t_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    /// `1 - SSR/SST`; negative values are possible under 2SLS.
    pub r_squared: f64,
    pub ssr: f64,
    pub n_obs: usize,
    pub method: Method,
    /// Joint significance of all slopes (OLS only).
    pub f_stat: Option<f64>,
    pub f_p_value: Option<f64>,
    /// First-stage F of the excluded instrument (2SLS only).
    pub first_stage_f: Option<f64>,
}

impl FitResult {
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownRegressor(name.to_string()))
    }

    pub fn coef(&self, name: &str) -> Result<f64> {
        Ok(self.coefficients[self.index_of(name)?])
    }

    pub fn df_resid(&self) -> usize {
        self.n_obs - self.coefficients.len()
    }

    /// The first slope (index 1), the quantity of interest in one-regressor fits.
    pub fn slope(&self) -> f64 {
        self.coefficients[1]
    }
}

fn t_and_p(coef: f64, se: f64, df: usize) -> (f64, f64) {
    let t = if se > 0.0 {
        coef / se
    } else if coef == 0.0 {
        0.0
    } else {
        coef.signum() * f64::INFINITY
    };
    let p = if t.is_infinite() {
        0.0
    } else if t.is_nan() {
        f64::NAN
    } else {
        let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df > 0");
        2.0 * dist.sf(t.abs())
    };
    (t, p)
}

fn f_p_value(f: f64, d1: usize, d2: usize) -> f64 {
    if f.is_infinite() {
        return 0.0;
    }
    if f <= 0.0 {
        return 1.0;
    }
    FisherSnedecor::new(d1 as f64, d2 as f64)
        .map(|d| d.sf(f))
        .unwrap_or(f64::NAN)
}

fn total_sum_squares(y: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    y.iter().map(|v| (v - mean).powi(2)).sum()
}

fn r_squared(ssr: f64, sst: f64) -> f64 {
    if sst > 0.0 {
        1.0 - ssr / sst
    } else {
        0.0
    }
}

fn check_finite(name: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => domain(format!("non-finite value in `{name}` at row {i}")),
        None => Ok(()),
    }
}

/// Least squares with an automatically added intercept.
///
/// Solved by Householder QR on norm-scaled columns; a column whose
/// diagonal of R collapses relative to the largest one is reported as the
/// source of rank deficiency.
pub fn ols(y: &[f64], regressors: &[(&str, &[f64])]) -> Result<FitResult> {
    let n = y.len();
    let k = regressors.len() + 1;
    check_finite("y", y)?;
    for (name, col) in regressors {
        if col.len() != n {
            return domain(format!("regressor `{name}` has {} rows, y has {n}", col.len()));
        }
        check_finite(name, col)?;
    }
    if n <= k {
        return Err(Error::TooFewObservations { needed: k, got: n });
    }

    let mut names = vec![INTERCEPT.to_string()];
    names.extend(regressors.iter().map(|(n, _)| n.to_string()));
    let x = DMatrix::from_fn(n, k, |i, j| if j == 0 { 1.0 } else { regressors[j - 1].1[i] });
    let scale: Vec<f64> = (0..k)
        .map(|j| {
            let s = x.column(j).norm();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    let xs = DMatrix::from_fn(n, k, |i, j| x[(i, j)] / scale[j]);
    let qr = xs.qr();
    let r = qr.r();
    let rmax = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    for j in 0..k {
        if r[(j, j)].abs() <= 1e-10 * rmax || x.column(j).norm() == 0.0 {
            return Err(Error::Singular {
                column: names[j].clone(),
            });
        }
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta_s = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular {
            column: names[k - 1].clone(),
        })?;
    let sst = total_sum_squares(y);
    // a regressand constant up to rounding is fitted by the intercept alone
    let ymax = y.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let beta: Vec<f64> = if sst <= n as f64 * (16.0 * f64::EPSILON * ymax).powi(2) {
        (0..k).map(|j| if j == 0 { y.iter().sum::<f64>() / n as f64 } else { 0.0 }).collect()
    } else {
        (0..k).map(|j| beta_s[j] / scale[j]).collect()
    };

    let fitted = &x * DVector::from_vec(beta.clone());
    let ssr: f64 = (0..n).map(|i| (y[i] - fitted[i]).powi(2)).sum();
    let df = n - k;
    let sigma2 = ssr / df as f64;
    let rinv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::Singular {
            column: names[k - 1].clone(),
        })?;
    let xtx_inv = &rinv * rinv.transpose();

    let mut std_errors = Vec::with_capacity(k);
    let mut t_stats = Vec::with_capacity(k);
    let mut p_values = Vec::with_capacity(k);
    for j in 0..k {
        let se = (sigma2 * xtx_inv[(j, j)]).max(0.0).sqrt() / scale[j];
        let (t, p) = t_and_p(beta[j], se, df);
        std_errors.push(se);
        t_stats.push(t);
        p_values.push(p);
    }

    let (f_stat, f_p_value) = if k > 1 {
        let explained = (sst - ssr).max(0.0);
        let f = if ssr > 0.0 {
            (explained / (k - 1) as f64) / sigma2
        } else if explained > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        (Some(f), Some(f_p_value(f, k - 1, df)))
    } else {
        (None, None)
    };

    Ok(FitResult {
        names,
        coefficients: beta,
        std_errors,
        t_stats,
        p_values,
        r_squared: r_squared(ssr, sst),
        ssr,
        n_obs: n,
        method: Method::Ols,
        f_stat,
        f_p_value,
        first_stage_f: None,
    })
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / n
}

/// Just-identified two-stage least squares of `y` on one endogenous
/// regressor `x`, instrumented by `z`.
///
/// R² is computed from the structural residuals `y - Xβ̂` and can be
/// negative.
pub fn tsls(y: &[f64], x: (&str, &[f64]), z: &[f64]) -> Result<FitResult> {
    let n = y.len();
    let (xname, x) = x;
    if x.len() != n || z.len() != n {
        return domain("y, x and z must have the same length");
    }
    check_finite("y", y)?;
    check_finite(xname, x)?;
    check_finite("instrument", z)?;
    if n <= 2 {
        return Err(Error::TooFewObservations { needed: 2, got: n });
    }
    let czx = covariance(z, x);
    let vz = covariance(z, z);
    let vx = covariance(x, x);
    let corr = if vz > 0.0 && vx > 0.0 {
        czx / (vz * vx).sqrt()
    } else {
        0.0
    };
    if !(corr.abs() >= 1e-8) {
        return Err(Error::WeakInstrument { corr });
    }

    let slope = covariance(z, y) / czx;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n as f64;
    let intercept = mean(y) - slope * mean(x);
    let ssr: f64 = (0..n).map(|i| (y[i] - intercept - slope * x[i]).powi(2)).sum();
    let df = n - 2;
    let sigma2 = ssr / df as f64;

    // Var(β̂) = σ² (Z'X)⁻¹ Z'Z (X'Z)⁻¹ with Z = [1 z], X = [1 x]
    let (sx, sz) = (x.iter().sum::<f64>(), z.iter().sum::<f64>());
    let szx: f64 = z.iter().zip(x).map(|(a, b)| a * b).sum();
    let szz: f64 = z.iter().map(|a| a * a).sum();
    let zx = Matrix2::new(n as f64, sx, sz, szx);
    let zz = Matrix2::new(n as f64, sz, sz, szz);
    let zx_inv = zx.try_inverse().ok_or(Error::WeakInstrument { corr })?;
    let cov = zx_inv * zz * zx_inv.transpose() * sigma2;
    let beta = Vector2::new(intercept, slope);

    let mut std_errors = Vec::with_capacity(2);
    let mut t_stats = Vec::with_capacity(2);
    let mut p_values = Vec::with_capacity(2);
    for j in 0..2 {
        let se = cov[(j, j)].max(0.0).sqrt();
        let (t, p) = t_and_p(beta[j], se, df);
        std_errors.push(se);
        t_stats.push(t);
        p_values.push(p);
    }

    // first stage: x on z
    let fs_slope = czx / vz;
    let fs_icpt = mean(x) - fs_slope * mean(z);
    let fs_ssr: f64 = (0..n).map(|i| (x[i] - fs_icpt - fs_slope * z[i]).powi(2)).sum();
    let fs_se = (fs_ssr / df as f64 / (vz * n as f64)).sqrt();
    let first_stage_f = if fs_se > 0.0 {
        (fs_slope / fs_se).powi(2)
    } else {
        f64::INFINITY
    };

    Ok(FitResult {
        names: vec![INTERCEPT.to_string(), xname.to_string()],
        coefficients: vec![intercept, slope],
        std_errors,
        t_stats,
        p_values,
        r_squared: r_squared(ssr, total_sum_squares(y)),
        ssr,
        n_obs: n,
        method: Method::Tsls,
        f_stat: None,
        f_p_value: None,
        first_stage_f: Some(first_stage_f),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SignClass {
    PositiveSignificant,
    NegativeSignificant,
    NonSignificant,
}

impl SignClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SignClass::PositiveSignificant => "positive",
            SignClass::NegativeSignificant => "negative",
            SignClass::NonSignificant => "non-significant",
        }
    }
}

impl std::str::FromStr for SignClass {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "positive" => Ok(SignClass::PositiveSignificant),
            "negative" => Ok(SignClass::NegativeSignificant),
            "non-significant" => Ok(SignClass::NonSignificant),
            other => Err(format!("unknown sign class `{other}`")),
        }
    }
}

/// Two-sided test of one slope at [`SIGNIFICANCE_LEVEL`].
pub fn classify_sign(fit: &FitResult, regressor: &str) -> Result<SignClass> {
    let j = fit.index_of(regressor)?;
    let (t, p) = (fit.t_stats[j], fit.p_values[j]);
    Ok(if !(p < SIGNIFICANCE_LEVEL) {
        SignClass::NonSignificant
    } else if t > 0.0 {
        SignClass::PositiveSignificant
    } else {
        SignClass::NegativeSignificant
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChowResult {
    pub f: f64,
    pub p: f64,
    pub ssr_pooled: f64,
    pub ssr_first: f64,
    pub ssr_second: f64,
    pub k: usize,
    pub n_first: usize,
    pub n_second: usize,
}

/// Chow test for equal coefficients (intercept included) across the two
/// subsamples marked by `split` (`true` → first subsample).
pub fn chow_test(y: &[f64], regressors: &[(&str, &[f64])], split: &[bool]) -> Result<ChowResult> {
    if split.len() != y.len() {
        return domain("split mask length differs from y");
    }
    let k = regressors.len() + 1;
    let pick = |flag: bool| -> (Vec<f64>, Vec<Vec<f64>>) {
        let rows: Vec<usize> = (0..y.len()).filter(|&i| split[i] == flag).collect();
        let ys = rows.iter().map(|&i| y[i]).collect();
        let xs = regressors
            .iter()
            .map(|(_, c)| rows.iter().map(|&i| c[i]).collect())
            .collect();
        (ys, xs)
    };
    let (y1, x1) = pick(true);
    let (y2, x2) = pick(false);
    for (label, n) in [("first", y1.len()), ("second", y2.len())] {
        if n <= k {
            return domain(format!("{label} subsample has {n} rows; need more than {k}"));
        }
    }
    let cols = |xs: &'_ [Vec<f64>]| -> Vec<(String, Vec<f64>)> {
        regressors
            .iter()
            .zip(xs)
            .map(|((n, _), c)| (n.to_string(), c.clone()))
            .collect()
    };
    let fit = |y: &[f64], xs: &[(String, Vec<f64>)]| -> Result<FitResult> {
        let refs: Vec<(&str, &[f64])> = xs.iter().map(|(n, c)| (n.as_str(), c.as_slice())).collect();
        ols(y, &refs)
    };
    let pooled = ols(y, regressors)?;
    let f1 = fit(&y1, &cols(&x1))?;
    let f2 = fit(&y2, &cols(&x2))?;

    let (n1, n2) = (y1.len(), y2.len());
    let df = n1 + n2 - 2 * k;
    let unrestricted = f1.ssr + f2.ssr;
    let gain = (pooled.ssr - unrestricted).max(0.0);
    let sst = total_sum_squares(y);
    let f = if pooled.ssr <= 1e-24 * sst.max(f64::MIN_POSITIVE) || gain == 0.0 {
        0.0
    } else if unrestricted > 0.0 {
        (gain / k as f64) / (unrestricted / df as f64)
    } else {
        f64::INFINITY
    };
    Ok(ChowResult {
        f,
        p: f_p_value(f, k, df),
        ssr_pooled: pooled.ssr,
        ssr_first: f1.ssr,
        ssr_second: f2.ssr,
        k,
        n_first: n1,
        n_second: n2,
    })
}
