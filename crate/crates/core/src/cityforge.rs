//! Synthetic gridded cities drawn from the closed-form model, used as
//! ground truth for the estimators.
//!
//! Generation is deterministic given the grid seed: every random draw
//! comes from one ChaCha stream consumed in a fixed per-cell order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::error::{domain, Result};
use crate::grid::{Ad, CellRecord, CityGrid, CityMeta, GridSpec, Lattice};
use crate::model::{self, CityParams};
use crate::transport::{self, TransportParams};

/// Log-scale dispersion of synthetic dwelling sizes within a cell.
const AD_SIZE_SIGMA: f64 = 0.25;

/// Congestion in attractive locations: a per-cell shock that lengthens
/// travel times and shifts rents in the same cells, so the observed
/// transport cost is correlated with the rent error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Congestion {
    /// Log-scale sd of the multiplicative shock on travel times.
    pub sigma_time: f64,
    /// Log-rent change per unit of the (standard normal) shock.
    pub rent_loading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_rent: f64,
    pub sigma_density: f64,
    /// Expected ads per 1000 residents. `None` gives every populated cell
    /// a rent and no ad records.
    pub ad_rate: Option<f64>,
    pub mask_rate: f64,
    pub congestion: Option<Congestion>,
}

impl NoiseSpec {
    pub fn none() -> Self {
        NoiseSpec {
            sigma_rent: 0.0,
            sigma_density: 0.0,
            ad_rate: None,
            mask_rate: 0.0,
            congestion: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.sigma_rent) || !nonneg(self.sigma_density) {
            return domain("noise standard deviations must be >= 0");
        }
        if let Some(r) = self.ad_rate {
            if !nonneg(r) {
                return domain(format!("ad rate {r} must be >= 0"));
            }
        }
        if !(nonneg(self.mask_rate) && self.mask_rate < 1.0) {
            return domain(format!("mask rate {} must be in [0, 1)", self.mask_rate));
        }
        if let Some(c) = self.congestion {
            if !nonneg(c.sigma_time) || !c.rent_loading.is_finite() {
                return domain("congestion parameters must be finite, sigma_time >= 0");
            }
        }
        Ok(())
    }
}

/// Distance-decaying amenity `l(d) = κ·exp(-θ d)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmenityParams {
    pub kappa: f64,
    pub theta: f64,
}

impl AmenityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa.is_finite() && self.kappa > 0.0) || !(self.theta.is_finite() && self.theta >= 0.0) {
            return domain(format!("amenity needs kappa > 0, theta >= 0: {self:?}"));
        }
        Ok(())
    }

    pub fn level(&self, dist: f64) -> f64 {
        self.kappa * (-self.theta * dist).exp()
    }
}

/// Synthetic commuting network: constant-speed car travel over a detour
/// factor, and transit with a fixed access time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportScenario {
    pub params: TransportParams,
    pub car_speed_kmh: f64,
    /// Road distance over Euclidean distance.
    pub car_detour: f64,
    pub transit_speed_kmh: f64,
    pub transit_access_h: f64,
    /// When set, travel times are only observed on a star sample of this
    /// fraction of cells and interpolated elsewhere.
    pub sample_fraction: Option<f64>,
}

impl TransportScenario {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.car_speed_kmh) || !pos(self.transit_speed_kmh) || !(self.car_detour >= 1.0) {
            return domain(format!("speeds must be > 0 and detour >= 1: {self:?}"));
        }
        if !(self.transit_access_h.is_finite() && self.transit_access_h >= 0.0) {
            return domain("transit access time must be >= 0");
        }
        Ok(())
    }

    /// Car cost per Euclidean km.
    pub fn car_cost_per_km(&self) -> f64 {
        self.car_detour * self.params.car_cost_per_km(self.car_speed_kmh)
    }

    fn car_time(&self, dist: f64) -> f64 {
        self.car_detour * dist / self.car_speed_kmh
    }

    fn transit_time(&self, dist: f64) -> f64 {
        self.transit_access_h + dist / self.transit_speed_kmh
    }

    /// Farthest distance at which the cheaper mode still costs less than `cost`.
    pub fn reach(&self, cost: f64) -> f64 {
        let p = &self.params;
        let car = cost / self.car_cost_per_km();
        let transit = (cost / p.trips_per_period - p.wage * self.transit_access_h - p.transit_fare)
            * self.transit_speed_kmh
            / p.wage;
        car.max(transit).max(0.0)
    }
}

/// How commuting costs are assigned to cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostModel {
    /// `T = t·dist`, no travel-time records.
    Linear,
    Transport(TransportScenario),
}

/// Cells of a square lattice whose centers lie within `radius` of the
/// grid center, in row-major order.
pub fn make_grid(spec: &GridSpec) -> Result<Vec<CellRecord>> {
    spec.validate()?;
    let m = (spec.radius / spec.cell_size).floor() as i64;
    let lim = spec.radius * (1.0 + 1e-12);
    let mut cells = Vec::new();
    for j in -m..=m {
        for i in -m..=m {
            let dx = i as f64 * spec.cell_size;
            let dy = j as f64 * spec.cell_size;
            let dist = dx.hypot(dy);
            if dist <= lim {
                let id = cells.len() as u32;
                cells.push(CellRecord::empty(id, spec.center.0 + dx, spec.center.1 + dy, dist));
            }
        }
    }
    Ok(cells)
}

/// Grid radius that holds every cell the city can populate, with one cell
/// of margin.
pub fn covering_radius(params: &CityParams, eq: &model::Equilibrium, costs: &CostModel, cell_size: f64) -> f64 {
    let edge = match costs {
        CostModel::Linear => eq.fringe,
        CostModel::Transport(s) => s.reach(params.t_per_km * eq.fringe).max(eq.fringe),
    };
    edge + cell_size
}

struct CellDraws {
    mask: f64,
    rent: f64,
    density: f64,
}

fn draws(rng: &mut ChaCha8Rng) -> CellDraws {
    CellDraws {
        mask: rng.random::<f64>(),
        rent: rng.sample(StandardNormal),
        density: rng.sample(StandardNormal),
    }
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u32 {
    if mean > 0.0 {
        Poisson::new(mean).map(|d| d.sample(rng) as u32).unwrap_or(0)
    } else {
        0
    }
}

fn ads_for_cell(rng: &mut ChaCha8Rng, cell: &CellRecord, rent: f64, size: f64) -> Vec<Ad> {
    (0..cell.n_ads)
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            let s = size * (AD_SIZE_SIGMA * z).exp();
            Ad {
                cell_id: cell.id,
                rent: rent * s,
                size: s,
            }
        })
        .collect()
}

/// Simulates one monocentric city on a circular grid.
///
/// Rents and densities follow the closed forms at each cell's generalized
/// cost, using the utility and central rent of the closed-city
/// equilibrium. A cell is populated when its uncongested cost is below
/// `t·d̄`, i.e. its center lies inside the fringe; congestion shocks do
/// not move the city edge.
pub fn simulate_city(
    city_id: &str,
    params: &CityParams,
    spec: &GridSpec,
    noise: &NoiseSpec,
    costs: &CostModel,
) -> Result<CityGrid> {
    noise.validate()?;
    let eq = model::solve_equilibrium(params)?;
    let mut cells = make_grid(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let area = spec.cell_area();

    // congested costs drive rents and are what cells record
    let mut true_cost = vec![0.0; cells.len()];
    // uncongested cost, which decides whether a cell is inside the city
    let mut base_cost = vec![0.0; cells.len()];
    let mut transport_params = None;
    let mut shocks = None;
    match costs {
        CostModel::Linear => {
            if noise.congestion.is_some() {
                return domain("congestion noise needs travel times (transport cost model)");
            }
            for (k, c) in cells.iter().enumerate() {
                true_cost[k] = params.t_per_km * c.dist;
            }
            base_cost.clone_from(&true_cost);
        }
        CostModel::Transport(s) => {
            s.validate()?;
            transport_params = Some(s.params);
            let mut car: Vec<f64> = cells.iter().map(|c| s.car_time(c.dist)).collect();
            let mut transit: Vec<f64> = cells.iter().map(|c| s.transit_time(c.dist)).collect();
            if let Some(fraction) = s.sample_fraction {
                let lattice = lattice_of(&cells, spec);
                let star = transport::star_sample(&lattice, spec.center, 8, fraction)?;
                car = transport::interpolate_field(&star.with_values(|k| car[k]), &lattice)?.values;
                transit = transport::interpolate_field(&star.with_values(|k| transit[k]), &lattice)?.values;
            }
            let z: Vec<f64> = match noise.congestion {
                Some(_) => cells.iter().map(|_| rng.sample(StandardNormal)).collect(),
                None => vec![0.0; cells.len()],
            };
            for (k, c) in cells.iter_mut().enumerate() {
                let bump = noise.congestion.map_or(1.0, |g| (g.sigma_time * z[k]).exp());
                let (tc, tt) = (car[k] * bump, transit[k] * bump);
                let dist_car = s.car_detour * c.dist;
                let car_cost = transport::car_cost(dist_car, tc, &s.params)?;
                let tr_cost = transport::transit_cost(tt, &s.params)?;
                true_cost[k] = car_cost.min(tr_cost);
                base_cost[k] = transport::car_cost(dist_car, car[k], &s.params)?
                    .min(transport::transit_cost(transit[k], &s.params)?);
                c.time_car = Some(tc);
                c.time_transit = Some(tt);
                c.dist_car = Some(dist_car);
            }
            if noise.congestion.is_some() {
                shocks = Some(z);
            }
        }
    }
    finish(city_id, params, spec, noise, &eq, cells, (&true_cost, &base_cost), transport_params, shocks, &mut rng, area)
}

fn lattice_of(cells: &[CellRecord], spec: &GridSpec) -> Lattice {
    let coords = cells
        .iter()
        .map(|c| {
            (
                ((c.x - spec.center.0) / spec.cell_size).round() as i64,
                ((c.y - spec.center.1) / spec.cell_size).round() as i64,
            )
        })
        .collect();
    Lattice::new(spec.cell_size, spec.center, coords)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    city_id: &str,
    params: &CityParams,
    spec: &GridSpec,
    noise: &NoiseSpec,
    eq: &model::Equilibrium,
    mut cells: Vec<CellRecord>,
    (true_cost, base_cost): (&[f64], &[f64]),
    transport: Option<TransportParams>,
    shocks: Option<Vec<f64>>,
    rng: &mut ChaCha8Rng,
    area: f64,
) -> Result<CityGrid> {
    let fringe_cost = params.t_per_km * eq.fringe;
    let loading = noise.congestion.map_or(0.0, |g| g.rent_loading);
    let mut ads = Vec::new();
    for (k, c) in cells.iter_mut().enumerate() {
        let d = draws(rng);
        let masked = d.mask < noise.mask_rate;
        c.land_share = if masked { 0.0 } else { params.land_share };
        let cost = true_cost[k];
        if masked || base_cost[k] >= fringe_cost || cost >= params.income {
            continue;
        }
        let rent = model::bid_rent(params.income, cost, params.beta, eq.central_rent)?;
        let dens = model::density(params.income, cost, params, eq.utility)?;
        let size = model::dwelling_size(params.income, cost, rent, params.beta)?;
        let shock = shocks.as_ref().map_or(0.0, |s| s[k]);
        let obs_rent = rent * (noise.sigma_rent * d.rent + loading * shock).exp();
        let obs_dens = dens * (noise.sigma_density * d.density).exp();
        c.density = obs_dens;
        c.population = obs_dens * c.land_share * area;
        c.dwelling_size = Some(size);
        match noise.ad_rate {
            None => c.rent = Some(obs_rent),
            Some(rate) => {
                c.n_ads = poisson(rng, rate * c.population / 1000.0);
                if c.n_ads > 0 {
                    ads.extend(ads_for_cell(rng, c, obs_rent, size));
                    c.rent = Some(obs_rent);
                }
            }
        }
    }
    let mut grid = CityGrid {
        meta: CityMeta {
            city_id: city_id.to_string(),
            income: params.income,
            t_per_km: Some(params.t_per_km),
            transport,
            truth: Some(*params),
        },
        cell_size: spec.cell_size,
        center: spec.center,
        cells,
        ads,
    };
    grid.refresh_derived();
    Ok(grid)
}

/// Log rent of the amenity variant, `ln R0 + ln l(d)/β`.
pub fn amenity_rent(central_rent: f64, beta: f64, amenity: &AmenityParams, dist: f64) -> f64 {
    central_rent * amenity.level(dist).powf(1.0 / beta)
}

/// Density of the amenity variant (no commuting cost, utility shifted by
/// the amenity).
pub fn amenity_density(p: &CityParams, utility: f64, amenity: &AmenityParams, dist: f64) -> f64 {
    let ba = p.b_capital / p.a_land;
    let inv = 1.0 / (p.beta * p.a_land);
    p.tfp.powf(1.0 / p.a_land)
        * (p.b_capital / p.rho).powf(ba)
        * (p.alpha.powf(p.alpha) / utility).powf(inv)
        * p.beta.powf(ba)
        * p.income.powf(p.density_elasticity())
        * amenity.level(dist).powf(inv)
}

/// Simulates a city whose residents value proximity through an amenity
/// instead of paying commuting costs.
///
/// The city occupies the whole grid disk; utility is set so the
/// noise-free population sums to `params.population`.
pub fn simulate_amenity_city(
    city_id: &str,
    params: &CityParams,
    spec: &GridSpec,
    amenity: &AmenityParams,
    noise: &NoiseSpec,
) -> Result<CityGrid> {
    params.validate()?;
    amenity.validate()?;
    noise.validate()?;
    if noise.congestion.is_some() {
        return domain("congestion noise needs travel times");
    }
    let mut cells = make_grid(spec)?;
    let area = spec.cell_area();
    // density ∝ u^{-1/(βa)}: close the population at u = 1, then rescale
    let at_unit: f64 = cells
        .iter()
        .map(|c| amenity_density(params, 1.0, amenity, c.dist) * params.land_share * area)
        .sum();
    let utility = (at_unit / params.population).powf(params.beta * params.a_land);
    let r0 = model::central_rent_from_utility(params.alpha, params.beta, params.income, utility)?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut ads = Vec::new();
    for c in cells.iter_mut() {
        let d = draws(&mut rng);
        let masked = d.mask < noise.mask_rate;
        c.land_share = if masked { 0.0 } else { params.land_share };
        if masked {
            continue;
        }
        let rent = amenity_rent(r0, params.beta, amenity, c.dist);
        let dens = amenity_density(params, utility, amenity, c.dist);
        let size = params.beta * params.income / rent;
        let obs_rent = rent * (noise.sigma_rent * d.rent).exp();
        c.density = dens * (noise.sigma_density * d.density).exp();
        c.population = c.density * c.land_share * area;
        c.dwelling_size = Some(size);
        match noise.ad_rate {
            None => c.rent = Some(obs_rent),
            Some(rate) => {
                c.n_ads = poisson(&mut rng, rate * c.population / 1000.0);
                if c.n_ads > 0 {
                    ads.extend(ads_for_cell(&mut rng, c, obs_rent, size));
                    c.rent = Some(obs_rent);
                }
            }
        }
    }
    let mut grid = CityGrid {
        meta: CityMeta {
            city_id: city_id.to_string(),
            income: params.income,
            t_per_km: None,
            transport: None,
            truth: Some(*params),
        },
        cell_size: spec.cell_size,
        center: spec.center,
        cells,
        ads,
    };
    grid.refresh_derived();
    Ok(grid)
}
