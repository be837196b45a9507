//! Gridded city representation shared by the generator, the estimators and
//! the file layer.

use std::collections::HashMap;


use crate::error::{domain, Result};
use crate::model::CityParams;
use crate::transport::{self, TransportParams};

/// Square lattice of cells, addressed by integer offsets from `origin`.
#[derive(Debug, Clone)]
pub struct Lattice {
    pub cell_size: f64,
    pub origin: (f64, f64),
    coords: Vec<(i64, i64)>,
    index: HashMap<(i64, i64), usize>,
}

impl Lattice {
    pub fn new(cell_size: f64, origin: (f64, f64), coords: Vec<(i64, i64)>) -> Self {
        let index = coords.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        Lattice {
            cell_size,
            origin,
            coords,
            index,
        }
    }

    /// `n × n` square block with cell (0, 0) at `origin`.
    pub fn square(n: usize, cell_size: f64) -> Self {
        let coords = (0..n as i64)
            .flat_map(|j| (0..n as i64).map(move |i| (i, j)))
            .collect();
        Lattice::new(cell_size, (0.0, 0.0), coords)
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn position(&self, k: usize) -> (f64, f64) {
        let (i, j) = self.coords[k];
        (
            self.origin.0 + i as f64 * self.cell_size,
            self.origin.1 + j as f64 * self.cell_size,
        )
    }

    /// Cell whose center is nearest to `(x, y)`, if that cell is part of
    /// the lattice.
    pub fn snap(&self, x: f64, y: f64) -> Option<usize> {
        let i = ((x - self.origin.0) / self.cell_size).round() as i64;
        let j = ((y - self.origin.1) / self.cell_size).round() as i64;
        self.index.get(&(i, j)).copied()
    }
}

/// Geometry of a circular city grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub cell_size: f64,
    pub radius: f64,
    pub center: (f64, f64),
    pub seed: u64,
}

impl GridSpec {
    pub fn new(cell_size: f64, radius: f64, seed: u64) -> Result<Self> {
        let spec = GridSpec {
            cell_size,
            radius,
            center: (0.0, 0.0),
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return domain(format!("cell_size {} must be > 0", self.cell_size));
        }
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return domain(format!("radius {} must be >= 0", self.radius));
        }
        Ok(())
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }
}

/// One grid cell. Optional fields are missing data.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub dist: f64,
    pub land_share: f64,
    pub population: f64,
    /// Persons per unit of urbanizable land; 0 when `land_share == 0`.
    pub density: f64,
    /// Rent per m² of floor.
    pub rent: Option<f64>,
    pub dwelling_size: Option<f64>,
    pub time_car: Option<f64>,
    pub time_transit: Option<f64>,
    pub dist_car: Option<f64>,
    /// Generalized commuting cost per period.
    pub gen_cost: Option<f64>,
    pub n_ads: u32,
}

impl CellRecord {
    pub fn empty(id: u32, x: f64, y: f64, dist: f64) -> Self {
        CellRecord {
            id,
            x,
            y,
            dist,
            land_share: 0.0,
            population: 0.0,
            density: 0.0,
            rent: None,
            dwelling_size: None,
            time_car: None,
            time_transit: None,
            dist_car: None,
            gen_cost: None,
            n_ads: 0,
        }
    }

    /// Fastest available travel time to the center.
    pub fn fastest_time(&self) -> Option<f64> {
        match (self.time_car, self.time_transit) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

/// A single synthetic (or scraped) rental listing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ad {
    pub cell_id: u32,
    pub rent: f64,
    pub size: f64,
}

/// City-level inputs needed to turn a grid back into regressors.
#[derive(Debug, Clone, PartialEq)]
pub struct CityMeta {
    pub city_id: String,
    pub income: f64,
    /// Linear commuting cost used when a cell has no travel-time data.
    pub t_per_km: Option<f64>,
    pub transport: Option<TransportParams>,
    /// Generating parameters, known only for synthetic cities.
    pub truth: Option<CityParams>,
}

#[derive(Debug, Clone)]
pub struct CityGrid {
    pub meta: CityMeta,
    pub cell_size: f64,
    pub center: (f64, f64),
    pub cells: Vec<CellRecord>,
    pub ads: Vec<Ad>,
}

impl CityGrid {
    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    pub fn lattice(&self) -> Lattice {
        let coords = self
            .cells
            .iter()
            .map(|c| {
                (
                    ((c.x - self.center.0) / self.cell_size).round() as i64,
                    ((c.y - self.center.1) / self.cell_size).round() as i64,
                )
            })
            .collect();
        Lattice::new(self.cell_size, self.center, coords)
    }

    pub fn total_population(&self) -> f64 {
        self.cells.iter().map(|c| c.population).sum()
    }

    pub fn total_ads(&self) -> u64 {
        self.cells.iter().map(|c| c.n_ads as u64).sum()
    }

    /// Generalized cost of a cell, optionally with a transit fare override.
    ///
    /// Uses travel times when the cell has any, else the linear `t·dist`
    /// cost when the city carries one.
    pub fn cost_of(&self, cell: &CellRecord, fare: Option<f64>) -> Option<f64> {
        if cell.time_car.is_some() || cell.time_transit.is_some() {
            let mut p = self.meta.transport?;
            if let Some(f) = fare {
                p.transit_fare = f;
            }
            let car = match (cell.time_car, cell.dist_car) {
                (Some(t), Some(d)) => transport::car_cost(d, t, &p).ok(),
                _ => None,
            };
            let transit = cell.time_transit.and_then(|t| transport::transit_cost(t, &p).ok());
            transport::generalized_cost(car, transit).map(|(c, _)| c)
        } else {
            self.meta.t_per_km.map(|t| t * cell.dist)
        }
    }

    /// Recomputes derived per-cell fields (density, generalized cost) from
    /// the stored primary fields.
    pub fn refresh_derived(&mut self) {
        let area = self.cell_area();
        for k in 0..self.cells.len() {
            let cost = self.cost_of(&self.cells[k], None);
            let c = &mut self.cells[k];
            c.density = if c.land_share > 0.0 {
                c.population / (c.land_share * area)
            } else {
                0.0
            };
            c.gen_cost = cost;
        }
    }
}
