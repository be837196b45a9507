//! Closed forms of the monocentric standard urban model and the
//! closed-city equilibrium.
//!
//! Units are a convention, not enforced: the canonical set is currency per
//! period for `income`, `t_per_km` and rents, km for distances, persons for
//! population, and one squared distance unit for land. Densities returned by
//! [`density`] are persons per unit of urbanizable land in those units, so
//! with km distances they are persons per km².

use std::f64::consts::PI;


use crate::error::{domain, Error, Result};
use crate::quad;

/// Relative tolerance of the population integral.
pub const QUAD_REL_TOL: f64 = 1e-10;
/// Relative closure tolerance of [`solve_equilibrium`].
pub const CLOSURE_TOL: f64 = 1e-8;

/// Structural parameters of one city.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CityParams {
    /// Cobb-Douglas share of the composite good.
    pub alpha: f64,
    /// Cobb-Douglas share of housing.
    pub beta: f64,
    /// Land elasticity of housing production.
    pub a_land: f64,
    /// Capital elasticity of housing production.
    pub b_capital: f64,
    /// Housing productivity `A`.
    pub tfp: f64,
    /// Rental price of capital.
    pub rho: f64,
    /// Household income per period.
    pub income: f64,
    /// Commuting cost per km per period.
    pub t_per_km: f64,
    /// Agricultural rent per unit of land.
    pub farm_rent: f64,
    /// Total city population.
    pub population: f64,
    /// Constant share of urbanizable land.
    pub land_share: f64,
}

impl CityParams {
    /// Builds a parameter set from the free shares (`alpha = 1 - beta`,
    /// `b = 1 - a`) with `land_share = 1`, validating the result.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        beta: f64,
        a_land: f64,
        tfp: f64,
        rho: f64,
        income: f64,
        t_per_km: f64,
        farm_rent: f64,
        population: f64,
    ) -> Result<Self> {
        let p = CityParams {
            alpha: 1.0 - beta,
            beta,
            a_land,
            b_capital: 1.0 - a_land,
            tfp,
            rho,
            income,
            t_per_km,
            farm_rent,
            population,
            land_share: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_land_share(mut self, land_share: f64) -> Result<Self> {
        self.land_share = land_share;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        let share = |v: f64| v.is_finite() && v > 0.0 && v < 1.0;
        if !share(self.alpha) || !share(self.beta) || (self.alpha + self.beta - 1.0).abs() > 1e-12 {
            bad.push(format!("alpha={}, beta={} must be in (0,1) and sum to 1", self.alpha, self.beta));
        }
        if !share(self.a_land)
            || !share(self.b_capital)
            || (self.a_land + self.b_capital - 1.0).abs() > 1e-12
        {
            bad.push(format!(
                "a={}, b={} must be in (0,1) and sum to 1",
                self.a_land, self.b_capital
            ));
        }
        for (name, v) in [
            ("tfp", self.tfp),
            ("rho", self.rho),
            ("income", self.income),
            ("t_per_km", self.t_per_km),
            ("population", self.population),
        ] {
            if !(v.is_finite() && v > 0.0) {
                bad.push(format!("{name}={v} must be > 0"));
            }
        }
        if !(self.farm_rent.is_finite() && self.farm_rent >= 0.0) {
            bad.push(format!("farm_rent={} must be >= 0", self.farm_rent));
        }
        if !(self.land_share.is_finite() && self.land_share > 0.0 && self.land_share <= 1.0) {
            bad.push(format!("land_share={} must be in (0,1]", self.land_share));
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidParams(bad.join("; ")))
        }
    }

    /// Exponent of net income in the density closed form, `(1 - βa)/(βa)`.
    pub fn density_elasticity(&self) -> f64 {
        (1.0 - self.beta * self.a_land) / (self.beta * self.a_land)
    }

    /// Exponent of net income in the bid-rent, `1/β`.
    pub fn rent_elasticity(&self) -> f64 {
        1.0 / self.beta
    }
}

/// Closed-city equilibrium of one city.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equilibrium {
    pub utility: f64,
    pub fringe: f64,
    pub central_rent: f64,
    /// `total_population(utility) / population - 1`.
    pub closure_residual: f64,
}

fn check_income(y: f64, t: f64) -> Result<()> {
    if !y.is_finite() || !t.is_finite() {
        return domain(format!("non-finite income {y} or transport cost {t}"));
    }
    if y <= 0.0 {
        return domain(format!("income {y} must be > 0"));
    }
    if t < 0.0 {
        return domain(format!("transport cost {t} must be >= 0"));
    }
    if t > y {
        return domain(format!("transport cost {t} exceeds income {y}"));
    }
    Ok(())
}

/// Floor space demanded per household, `β(Y - T)/R`.
pub fn dwelling_size(income: f64, cost: f64, rent: f64, beta: f64) -> Result<f64> {
    check_income(income, cost)?;
    if !rent.is_finite() || rent <= 0.0 {
        return domain(format!("rent {rent} must be finite and > 0"));
    }
    Ok(beta * (income - cost) / rent)
}

/// Composite-good consumption per household, `α(Y - T)`.
pub fn composite_consumption(income: f64, cost: f64, alpha: f64) -> Result<f64> {
    check_income(income, cost)?;
    Ok(alpha * (income - cost))
}

/// Bid-rent per m² of floor at generalized transport cost `cost`.
///
/// Returns 0 at `cost == income`: households there can afford no housing.
pub fn bid_rent(income: f64, cost: f64, beta: f64, central_rent: f64) -> Result<f64> {
    check_income(income, cost)?;
    if !(central_rent > 0.0) {
        return domain(format!("central rent {central_rent} must be > 0"));
    }
    Ok(central_rent * ((income - cost) / income).powf(1.0 / beta))
}

/// Rent at the center implied by the equilibrium utility level.
pub fn central_rent_from_utility(alpha: f64, beta: f64, income: f64, utility: f64) -> Result<f64> {
    if !(utility.is_finite() && utility > 0.0) {
        return domain(format!("utility {utility} must be > 0"));
    }
    let k = alpha.powf(alpha) * beta.powf(beta);
    Ok((k * income / utility).powf(1.0 / beta))
}

/// Utility level consistent with a central rent; inverse of
/// [`central_rent_from_utility`].
pub fn utility_from_central_rent(alpha: f64, beta: f64, income: f64, central_rent: f64) -> f64 {
    alpha.powf(alpha) * beta.powf(beta) * income / central_rent.powf(beta)
}

/// Floor area built per unit of land by a profit-maximizing developer.
pub fn housing_supply_per_land(rent: f64, tfp: f64, a_land: f64, b_capital: f64, rho: f64) -> Result<f64> {
    if !(rent.is_finite() && rent >= 0.0) {
        return domain(format!("rent {rent} must be finite and >= 0"));
    }
    Ok(tfp.powf(1.0 / a_land) * (b_capital * rent / rho).powf(b_capital / a_land))
}

/// Capital per unit of land chosen by a developer facing `rent`.
pub fn optimal_capital_intensity(rent: f64, tfp: f64, a_land: f64, b_capital: f64, rho: f64) -> f64 {
    (tfp * b_capital * rent / rho).powf(1.0 / a_land)
}

/// Density from a known rent: floor supply divided by dwelling size.
/// Returns 0 when `cost == income` (the bid-rent vanishes there).
pub fn density_from_rent(rent: f64, income: f64, cost: f64, p: &CityParams) -> Result<f64> {
    check_income(income, cost)?;
    if cost == income {
        return Ok(0.0);
    }
    let supply = housing_supply_per_land(rent, p.tfp, p.a_land, p.b_capital, p.rho)?;
    Ok(supply * rent / (p.beta * (income - cost)))
}

/// Equilibrium density in closed form at generalized cost `cost`.
pub fn density(income: f64, cost: f64, p: &CityParams, utility: f64) -> Result<f64> {
    check_income(income, cost)?;
    if !(utility.is_finite() && utility > 0.0) {
        return domain(format!("utility {utility} must be > 0"));
    }
    if cost == income {
        return Ok(0.0);
    }
    Ok(density_at(p, ln_density_prefactor(p, utility), income - cost))
}

// Summed in logs: the factors over- and underflow separately for small `βa`.
fn ln_density_prefactor(p: &CityParams, utility: f64) -> f64 {
    let ba = p.b_capital / p.a_land;
    p.tfp.ln() / p.a_land
        + ba * (p.b_capital / p.rho).ln()
        + (p.alpha * p.alpha.ln() - utility.ln()) / (p.beta * p.a_land)
        + ba * p.beta.ln()
}

fn density_at(p: &CityParams, ln_pre: f64, net_income: f64) -> f64 {
    if net_income <= 0.0 {
        return 0.0;
    }
    (ln_pre + p.density_elasticity() * net_income.ln()).exp()
}

/// Distance at which the bid-rent meets the farmland rent.
pub fn fringe_distance(p: &CityParams, central_rent: f64) -> Result<f64> {
    if !(central_rent.is_finite() && central_rent > 0.0) {
        return domain(format!("central rent {central_rent} must be > 0"));
    }
    if central_rent < p.farm_rent {
        return domain(format!(
            "central rent {central_rent} below farmland rent {}",
            p.farm_rent
        ));
    }
    Ok(p.income / p.t_per_km * (1.0 - (p.farm_rent / central_rent).powf(p.beta)))
}

/// Population of a circular city at utility `u` with linear commuting
/// cost `t·x`. Zero when the city cannot outbid agriculture at the center.
pub fn total_population(p: &CityParams, utility: f64) -> Result<f64> {
    Ok(population_and_fringe(p, utility)?.0)
}

fn population_and_fringe(p: &CityParams, utility: f64) -> Result<(f64, f64, f64)> {
    let r0 = central_rent_from_utility(p.alpha, p.beta, p.income, utility)?;
    if r0 <= p.farm_rent {
        return Ok((0.0, 0.0, r0));
    }
    let fringe = fringe_distance(p, r0)?;
    let ln_pre = ln_density_prefactor(p, utility);
    let (y, t, lambda) = (p.income, p.t_per_km, p.land_share);
    let q = quad::integrate(
        |x| 2.0 * PI * x * lambda * density_at(p, ln_pre, y - t * x),
        0.0,
        fringe,
        QUAD_REL_TOL,
    )?;
    Ok((q.value, fringe, r0))
}

/// `d ln P / d ln u`, from differentiating the population integral.
fn population_log_slope(p: &CityParams, utility: f64, pop: f64, fringe: f64, r0: f64) -> f64 {
    let inv_ba = 1.0 / (p.beta * p.a_land);
    let edge_density = density_at(p, ln_density_prefactor(p, utility), p.income - p.t_per_km * fringe);
    let boundary = 2.0 * PI * fringe * p.land_share * edge_density * (p.income / p.t_per_km)
        * (p.farm_rent / r0).powf(p.beta);
    -inv_ba - boundary / pop
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Solves for the utility level at which the city houses exactly
/// `p.population` people.
///
/// The search runs over `z = logit(d̄ t / Y)`, the fringe as a share of its
/// upper bound `Y/t`. Population is strictly increasing in `z` and smooth
/// in it both near the empty city and near the income limit, where `ln u`
/// would lose resolution. Bisection over an expanded bracket always
/// converges; Newton steps polish the root.
pub fn solve_equilibrium(p: &CityParams) -> Result<Equilibrium> {
    p.validate()?;
    if p.farm_rent == 0.0 {
        return solve_without_farmland(p);
    }
    let target = p.population;
    // ln u at which the central rent is R̄·(1 + e^z)^{1/β}
    let k = p.alpha.powf(p.alpha) * p.beta.powf(p.beta);
    let ln_u_empty = (k * p.income).ln() - p.beta * p.farm_rent.ln();
    let ln_u = |z: f64| ln_u_empty - softplus(z);
    let resid = |z: f64| -> Result<(f64, f64, f64, f64)> {
        let u = ln_u(z).exp();
        match population_and_fringe(p, u) {
            Ok((pop, fringe, r0)) => Ok((pop / target - 1.0, pop, fringe, r0)),
            // an overflowing integral is still a population above target
            Err(Error::Quadrature { estimate, .. }) if estimate == f64::INFINITY => {
                let r0 = central_rent_from_utility(p.alpha, p.beta, p.income, u)?;
                Ok((f64::INFINITY, f64::INFINITY, fringe_distance(p, r0)?, r0))
            }
            Err(e) => Err(e),
        }
    };
    let no_eq = |what: &str| Error::NoEquilibrium(format!("population {what} target {target} over the whole fringe range"));

    // population below target at lo, above at hi
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    let mut state = resid(0.0)?;
    let mut step = 1.0;
    while state.0 >= 0.0 {
        lo -= step;
        step *= 2.0;
        state = resid(lo)?;
        if lo < -1e3 || state.0.is_nan() {
            return Err(no_eq("stays above"));
        }
    }
    let mut step = 1.0;
    let mut r_hi = resid(0.0)?.0;
    while r_hi <= 0.0 {
        hi += step;
        step *= 2.0;
        r_hi = resid(hi)?.0;
        if hi > 1e3 || r_hi.is_nan() {
            return Err(no_eq("stays below"));
        }
    }

    let done = |r: f64, lo: f64, hi: f64, x: f64| r.abs() <= 1e-3 * CLOSURE_TOL || hi - lo <= 1e-15 * (1.0 + x.abs());

    let mut x = 0.5 * (lo + hi);
    state = resid(x)?;
    while !done(state.0, lo, hi, x) && state.0.abs() >= 1e-3 {
        if state.0 < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        x = 0.5 * (lo + hi);
        state = resid(x)?;
    }

    for _ in 0..8 {
        let (r, pop, fringe, r0) = state;
        if done(r, lo, hi, x) {
            break;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        // d ln P/dz = (d ln P/d ln u)(d ln u/dz), with d ln u/dz = -σ(z)
        let sigma = 1.0 / (1.0 + (-x).exp());
        let slope = -sigma * population_log_slope(p, ln_u(x).exp(), pop, fringe, r0);
        let mut next = x - (pop / target).ln() / slope;
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        x = next;
        state = resid(x)?;
    }

    // Newton stalled: finish by bisection, which cannot fail to converge.
    while !done(state.0, lo, hi, x) {
        if state.0 < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        x = 0.5 * (lo + hi);
        state = resid(x)?;
    }

    let (r, _, fringe, r0) = state;
    if !(r.abs() <= CLOSURE_TOL) {
        return Err(Error::NoEquilibrium(format!(
            "closure residual {r:e} above tolerance after polishing"
        )));
    }
    Ok(Equilibrium {
        utility: ln_u(x).exp(),
        fringe,
        central_rent: r0,
        closure_residual: r,
    })
}

/// With `R̄ = 0` the fringe sits at `Y/t` for every utility, so population
/// is `u^{-1/(βa)}` times a fixed integral and the equilibrium is explicit.
fn solve_without_farmland(p: &CityParams) -> Result<Equilibrium> {
    let h = p.density_elasticity();
    let reach = p.income / p.t_per_km;
    // ∫ 2πxλ(1 - x/reach)^h dx over [0, reach]; the Y^h factor is kept in logs
    let j = quad::integrate(
        |x| 2.0 * PI * x * p.land_share * (1.0 - x / reach).max(0.0).powf(h),
        0.0,
        reach,
        QUAD_REL_TOL,
    )?
    .value;
    let ln_pre_at_1 = ln_density_prefactor(p, 1.0);
    let ln_u = p.beta * p.a_land * (ln_pre_at_1 + h * p.income.ln() + j.ln() - p.population.ln());
    let utility = ln_u.exp();
    let pop = total_population(p, utility)?;
    Ok(Equilibrium {
        utility,
        fringe: reach,
        central_rent: central_rent_from_utility(p.alpha, p.beta, p.income, utility)?,
        closure_residual: pop / p.population - 1.0,
    })
}

/// Exogenous parameter perturbed by [`comparative_statics`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StaticsParam {
    Population,
    Income,
    TransportCost,
    FarmRent,
}

impl StaticsParam {
    pub const ALL: [StaticsParam; 4] = [
        StaticsParam::Population,
        StaticsParam::Income,
        StaticsParam::TransportCost,
        StaticsParam::FarmRent,
    ];

    /// Sign of `∂d̄/∂θ` predicted by the model.
    pub fn expected_sign(self) -> i8 {
        match self {
            StaticsParam::Population | StaticsParam::Income => 1,
            StaticsParam::TransportCost | StaticsParam::FarmRent => -1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StaticsParam::Population => "population",
            StaticsParam::Income => "income",
            StaticsParam::TransportCost => "t_per_km",
            StaticsParam::FarmRent => "farm_rent",
        }
    }

    pub fn get(self, p: &CityParams) -> f64 {
        match self {
            StaticsParam::Population => p.population,
            StaticsParam::Income => p.income,
            StaticsParam::TransportCost => p.t_per_km,
            StaticsParam::FarmRent => p.farm_rent,
        }
    }

    pub fn set(self, p: &mut CityParams, v: f64) {
        match self {
            StaticsParam::Population => p.population = v,
            StaticsParam::Income => p.income = v,
            StaticsParam::TransportCost => p.t_per_km = v,
            StaticsParam::FarmRent => p.farm_rent = v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparativeStaticsReport {
    pub parameter: StaticsParam,
    pub baseline_fringe: f64,
    pub perturbed_fringe: f64,
    pub sign: i8,
    pub expected_sign: i8,
    /// Set when the fringe change falls inside the solver dead-band.
    pub degenerate: bool,
}

impl ComparativeStaticsReport {
    pub fn agrees(&self) -> bool {
        self.sign == self.expected_sign
    }
}

/// Re-solves the equilibrium with `which` scaled by `1 + rel_step` and
/// reports the direction the fringe moved.
pub fn comparative_statics(p: &CityParams, which: StaticsParam, rel_step: f64) -> Result<ComparativeStaticsReport> {
    if !(rel_step > 0.0 && rel_step <= 0.5) {
        return domain(format!("rel_step {rel_step} must be in (0, 0.5]"));
    }
    let base = solve_equilibrium(p)?;
    let mut q = *p;
    which.set(&mut q, which.get(p) * (1.0 + rel_step));
    let pert = solve_equilibrium(&q)?;
    let diff = pert.fringe - base.fringe;
    let band = CLOSURE_TOL * base.fringe.abs();
    let sign = if diff.abs() <= band { 0 } else { diff.signum() as i8 };
    Ok(ComparativeStaticsReport {
        parameter: which,
        baseline_fringe: base.fringe,
        perturbed_fringe: pert.fringe,
        sign,
        expected_sign: which.expected_sign(),
        degenerate: sign == 0,
    })
}
