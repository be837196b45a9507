//! Generalized commuting costs, mode choice, star-shaped sparse sampling of
//! travel times and their interpolation to the full grid.
//!
//! Costs are per period. The default period is a year; see
//! [`HOURS_PER_PERIOD`] and [`TRIPS_PER_PERIOD`].

use std::collections::HashSet;

use spade::{DelaunayTriangulation, FloatTriangulation, HasPosition, Point2, Triangulation};

use crate::error::{domain, Result};
use crate::grid::Lattice;

/// Working days per period.
pub const WORKING_DAYS_PER_PERIOD: f64 = 220.0;
/// Paid hours per period; the hourly wage is income divided by this.
pub const HOURS_PER_PERIOD: f64 = 8.0 * WORKING_DAYS_PER_PERIOD;
/// One trip to the center and one back per working day.
pub const TRIPS_PER_PERIOD: f64 = 2.0 * WORKING_DAYS_PER_PERIOD;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportParams {
    /// Currency per hour.
    pub wage: f64,
    /// Currency per liter.
    pub fuel_price: f64,
    /// Liters per km.
    pub fuel_efficiency: f64,
    /// Currency per trip.
    pub transit_fare: f64,
    pub trips_per_period: f64,
}

impl TransportParams {
    /// Wage from income per period and the default trip count.
    pub fn from_income(income: f64, fuel_price: f64, fuel_efficiency: f64, transit_fare: f64) -> Result<Self> {
        let p = TransportParams {
            wage: income / HOURS_PER_PERIOD,
            fuel_price,
            fuel_efficiency,
            transit_fare,
            trips_per_period: TRIPS_PER_PERIOD,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v.is_finite() && v > 0.0;
        if !pos(self.wage) || !pos(self.fuel_price) || !pos(self.fuel_efficiency) || !pos(self.trips_per_period) {
            return domain(format!("transport parameters must be > 0: {self:?}"));
        }
        if !(self.transit_fare.is_finite() && self.transit_fare >= 0.0) {
            return domain(format!("transit fare {} must be >= 0", self.transit_fare));
        }
        Ok(())
    }

    /// Per-km car cost at a constant door-to-door speed.
    pub fn car_cost_per_km(&self, speed_kmh: f64) -> f64 {
        self.trips_per_period * (self.wage / speed_kmh + self.fuel_efficiency * self.fuel_price)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    Car,
    Transit,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Car => "car",
            Mode::Transit => "transit",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "car" | "driving" => Ok(Mode::Car),
            "transit" | "public" | "public_transport" => Ok(Mode::Transit),
            other => Err(format!("unknown mode `{other}` (expected car or transit)")),
        }
    }
}

/// Time plus fuel cost of driving, per period.
pub fn car_cost(dist: f64, time: f64, p: &TransportParams) -> Result<f64> {
    if !(dist >= 0.0 && time >= 0.0) || !dist.is_finite() || !time.is_finite() {
        return domain(format!("distance {dist} and time {time} must be finite and >= 0"));
    }
    Ok(p.trips_per_period * (time * p.wage + dist * p.fuel_efficiency * p.fuel_price))
}

/// Time cost plus a flat fare, per period. Independent of distance.
pub fn transit_cost(time: f64, p: &TransportParams) -> Result<f64> {
    if !(time.is_finite() && time >= 0.0) {
        return domain(format!("time {time} must be finite and >= 0"));
    }
    Ok(p.trips_per_period * (time * p.wage + p.transit_fare))
}

/// Cheaper of the available modes. Ties go to transit; `None` when no
/// mode has data.
pub fn generalized_cost(car: Option<f64>, transit: Option<f64>) -> Option<(f64, Mode)> {
    match (car, transit) {
        (Some(c), Some(t)) if c < t => Some((c, Mode::Car)),
        (_, Some(t)) => Some((t, Mode::Transit)),
        (Some(c), None) => Some((c, Mode::Car)),
        (None, None) => None,
    }
}

/// Cells chosen by [`star_sample`], in sampling order.
#[derive(Debug, Clone, PartialEq)]
pub struct StarSample {
    pub cells: Vec<usize>,
    pub coverage_fraction: f64,
    /// Samples that did not fit on the star and were placed by
    /// farthest-point fill instead.
    pub filled: usize,
}

impl StarSample {
    pub fn with_values<F: Fn(usize) -> f64>(&self, value: F) -> SampledField {
        SampledField {
            cells: self.cells.clone(),
            values: self.cells.iter().map(|&k| value(k)).collect(),
            coverage_fraction: self.coverage_fraction,
        }
    }
}

/// Sparse measurements on a lattice: cell indices and their values (hours).
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub cells: Vec<usize>,
    pub values: Vec<f64>,
    pub coverage_fraction: f64,
}

impl SampledField {
    pub fn new(lattice: &Lattice, cells: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if cells.len() != values.len() {
            return domain("sample cells and values differ in length");
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return domain(format!("sampled value {v} must be finite and >= 0"));
        }
        if cells.iter().any(|&k| k >= lattice.len()) {
            return domain("sample cell outside the lattice");
        }
        Ok(SampledField {
            coverage_fraction: cells.len() as f64 / lattice.len().max(1) as f64,
            cells,
            values,
        })
    }
}

/// Picks `ceil(fraction · cells)` cells along `branches` rays from
/// `center`, the first at angle 0, at equal radial spacing.
///
/// Sampling points are generated ring by ring (all branches at one radius
/// before the next radius) and snapped to the nearest cell; the coarsest
/// spacing that hits enough distinct cells is used. When the rays cannot
/// supply that many cells even at sub-cell spacing, the shortfall is
/// filled greedily with the cells farthest from any existing sample.
pub fn star_sample(lattice: &Lattice, center: (f64, f64), branches: usize, fraction: f64) -> Result<StarSample> {
    if lattice.is_empty() {
        return domain("cannot sample an empty grid");
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return domain(format!("sampling fraction {fraction} must be in (0, 1]"));
    }
    if branches == 0 {
        return domain("star needs at least one branch");
    }
    let n = lattice.len();
    let target = ((fraction * n as f64).ceil() as usize).min(n);
    let reach = (0..n)
        .map(|k| {
            let (x, y) = lattice.position(k);
            (x - center.0).hypot(y - center.1)
        })
        .fold(0.0, f64::max)
        + lattice.cell_size;

    let directions: Vec<(f64, f64)> = (0..branches)
        .map(|b| {
            let ang = 2.0 * std::f64::consts::PI * b as f64 / branches as f64;
            (ang.cos(), ang.sin())
        })
        .collect();

    let collect = |steps: usize| -> Vec<usize> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for s in 0..=steps {
            let r = reach * s as f64 / steps as f64;
            for &(dx, dy) in &directions {
                if let Some(k) = lattice.snap(center.0 + r * dx, center.1 + r * dy) {
                    if seen.insert(k) {
                        out.push(k);
                    }
                }
                if s == 0 {
                    break;
                }
            }
        }
        out
    };

    // Spacing below a quarter cell cannot reach new cells on a ray.
    let max_steps = ((4.0 * reach / lattice.cell_size).ceil() as usize).max(1);
    let mut cells = collect(max_steps);
    if cells.len() > target {
        // coarsest radial spacing that still reaches the target
        let (mut lo, mut hi) = (0, max_steps);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if collect(mid).len() >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        cells = collect(hi);
        cells.truncate(target);
    }

    let filled = target - cells.len();
    if filled > 0 {
        // Greedy farthest-point fill: each extra sample goes to the cell
        // farthest from every sample taken so far (ties to lower index).
        let pos: Vec<(f64, f64)> = (0..n).map(|k| lattice.position(k)).collect();
        let mut gap = vec![f64::INFINITY; n];
        let mut taken = vec![false; n];
        let relax = |k: usize, gap: &mut [f64]| {
            for (g, p) in gap.iter_mut().zip(&pos) {
                *g = g.min((p.0 - pos[k].0).hypot(p.1 - pos[k].1));
            }
        };
        for &k in &cells {
            taken[k] = true;
            relax(k, &mut gap);
        }
        for _ in 0..filled {
            let next = (0..n)
                .filter(|&k| !taken[k])
                .max_by(|&a, &b| gap[a].total_cmp(&gap[b]).then(b.cmp(&a)))
                .expect("fewer samples than cells");
            taken[next] = true;
            relax(next, &mut gap);
            cells.push(next);
        }
    }
    Ok(StarSample {
        coverage_fraction: cells.len() as f64 / n as f64,
        cells,
        filled,
    })
}

/// Values of an interpolated field on every lattice cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Interpolated {
    pub values: Vec<f64>,
    /// Fewer than three non-collinear samples: nearest-sample everywhere.
    pub degraded: bool,
}

struct Site {
    pos: Point2<f64>,
    value: f64,
}

impl HasPosition for Site {
    type Scalar = f64;
    fn position(&self) -> Point2<f64> {
        self.pos
    }
}

/// Piecewise-linear interpolation over the Delaunay triangulation of the
/// samples; nearest-sample value outside their convex hull.
pub fn interpolate_field(samples: &SampledField, lattice: &Lattice) -> Result<Interpolated> {
    if samples.cells.is_empty() {
        return domain("no samples to interpolate");
    }
    let mut tri: DelaunayTriangulation<Site> = DelaunayTriangulation::new();
    for (&k, &v) in samples.cells.iter().zip(&samples.values) {
        let (x, y) = lattice.position(k);
        tri.insert(Site {
            pos: Point2::new(x, y),
            value: v,
        })
        .map_err(|e| crate::Error::Domain(format!("cannot triangulate sample at ({x}, {y}): {e:?}")))?;
    }
    let degraded = tri.num_vertices() < 3 || tri.all_vertices_on_line();
    let bary = tri.barycentric();
    let values = (0..lattice.len())
        .map(|k| {
            let (x, y) = lattice.position(k);
            let p = Point2::new(x, y);
            let inside = if degraded {
                None
            } else {
                bary.interpolate(|v| v.data().value, p)
            };
            inside.unwrap_or_else(|| {
                tri.nearest_neighbor(p)
                    .map(|v| v.data().value)
                    .unwrap_or(f64::NAN)
            })
        })
        .collect();
    Ok(Interpolated { values, degraded })
}

/// Label of the slice with the largest mean delay; earliest wins ties.
pub fn rush_hour_select<S: AsRef<str>>(slices: &[(S, f64)]) -> Result<&str> {
    let mut best: Option<&(S, f64)> = None;
    for s in slices {
        if best.is_none_or(|b| s.1 > b.1) {
            best = Some(s);
        }
    }
    match best {
        Some(b) => Ok(b.0.as_ref()),
        None => domain("no time slices to choose from"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(trips: f64) -> TransportParams {
        TransportParams {
            wage: 20.0,
            fuel_price: 2.0,
            fuel_efficiency: 0.1,
            transit_fare: 2.0,
            trips_per_period: trips,
        }
    }

    #[test]
    fn car_cost_examples() {
        assert!((car_cost(10.0, 0.5, &params(1.0)).unwrap() - 12.0).abs() < 1e-12);
        assert_eq!(car_cost(0.0, 0.0, &params(1.0)).unwrap(), 0.0);
        let one = car_cost(7.0, 0.3, &params(1.0)).unwrap();
        let two = car_cost(7.0, 0.3, &params(2.0)).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
        assert!(car_cost(-1.0, 0.3, &params(1.0)).is_err());
        assert!(car_cost(1.0, -0.3, &params(1.0)).is_err());
    }

    #[test]
    fn transit_cost_examples() {
        assert!((transit_cost(0.5, &params(1.0)).unwrap() - 12.0).abs() < 1e-12);
        let mut p = params(1.0);
        p.transit_fare = 0.0;
        assert_eq!(transit_cost(0.0, &p).unwrap(), 0.0);
        assert!(transit_cost(-0.1, &p).is_err());
    }

    #[test]
    fn mode_choice() {
        assert_eq!(generalized_cost(Some(12.0), Some(10.0)), Some((10.0, Mode::Transit)));
        assert_eq!(generalized_cost(Some(12.0), None), Some((12.0, Mode::Car)));
        assert_eq!(generalized_cost(Some(12.0), Some(12.0)), Some((12.0, Mode::Transit)));
        assert_eq!(generalized_cost(Some(9.0), Some(12.0)), Some((9.0, Mode::Car)));
        assert_eq!(generalized_cost(None, None), None);
    }

    #[test]
    fn star_counts() {
        let lat = Lattice::square(20, 1.0);
        let s = star_sample(&lat, (9.5, 9.5), 8, 0.10).unwrap();
        assert_eq!(s.cells.len(), 40);
        let unique: HashSet<_> = s.cells.iter().collect();
        assert_eq!(unique.len(), 40);
        assert_eq!(s.filled, 0);
        assert!((s.coverage_fraction - 0.1).abs() < 1e-12);

        let all = star_sample(&lat, (9.5, 9.5), 8, 1.0).unwrap();
        assert_eq!(all.cells.len(), 400);
    }

    #[test]
    fn star_includes_center_first() {
        let lat = Lattice::square(21, 1.0);
        let s = star_sample(&lat, (10.0, 10.0), 8, 0.05).unwrap();
        assert_eq!(lat.position(s.cells[0]), (10.0, 10.0));
    }

    #[test]
    fn star_branches_are_45_degrees_apart() {
        let lat = Lattice::square(41, 1.0);
        let s = star_sample(&lat, (20.0, 20.0), 8, 0.05).unwrap();
        for &k in &s.cells {
            let (x, y) = lat.position(k);
            let (dx, dy) = (x - 20.0, y - 20.0);
            // every sample lies on an axis or a diagonal
            assert!(dx == 0.0 || dy == 0.0 || dx.abs() == dy.abs(), "({dx}, {dy})");
        }
    }

    #[test]
    fn star_rejects_bad_fraction() {
        let lat = Lattice::square(5, 1.0);
        assert!(star_sample(&lat, (2.0, 2.0), 8, 0.0).is_err());
        assert!(star_sample(&lat, (2.0, 2.0), 8, 1.5).is_err());
        assert!(star_sample(&Lattice::square(0, 1.0), (0.0, 0.0), 8, 0.5).is_err());
    }

    #[test]
    fn interpolation_is_exact_at_samples_and_linear() {
        let lat = Lattice::square(30, 1.0);
        let s = star_sample(&lat, (14.5, 14.5), 8, 0.10).unwrap();
        let f = |k: usize| {
            let (x, y) = lat.position(k);
            2.0 * x + 3.0 * y + 1.0
        };
        let field = s.with_values(f);
        let out = interpolate_field(&field, &lat).unwrap();
        assert!(!out.degraded);
        for (&k, &v) in field.cells.iter().zip(&field.values) {
            assert_eq!(out.values[k], v);
        }
        // interior cells (inside the sample hull) reproduce the plane
        let inner: Vec<usize> = (0..lat.len())
            .filter(|&k| {
                let (x, y) = lat.position(k);
                (x - 14.5).abs() + (y - 14.5).abs() < 12.0
            })
            .collect();
        assert!(inner.len() > 100);
        for k in inner {
            assert!((out.values[k] - f(k)).abs() < 1e-12 * f(k).abs().max(1.0), "cell {k}");
        }
    }

    #[test]
    fn outside_hull_uses_nearest_sample() {
        let lat = Lattice::square(11, 1.0);
        // a small ring of samples around (5, 5)
        let ring: Vec<usize> = [(4.0, 4.0), (6.0, 4.0), (6.0, 6.0), (4.0, 6.0)]
            .iter()
            .map(|&(x, y)| lat.snap(x, y).unwrap())
            .collect();
        let vals = vec![1.0, 2.0, 3.0, 4.0];
        let field = SampledField::new(&lat, ring, vals).unwrap();
        let out = interpolate_field(&field, &lat).unwrap();
        assert_eq!(out.values[lat.snap(0.0, 0.0).unwrap()], 1.0);
        assert_eq!(out.values[lat.snap(10.0, 10.0).unwrap()], 3.0);
        assert_eq!(out.values[lat.snap(10.0, 0.0).unwrap()], 2.0);
    }

    #[test]
    fn collinear_samples_degrade_to_nearest() {
        let lat = Lattice::square(5, 1.0);
        let cells: Vec<usize> = (0..5).map(|i| lat.snap(i as f64, 2.0).unwrap()).collect();
        let vals: Vec<f64> = (0..5).map(|i| i as f64).collect();
        let field = SampledField::new(&lat, cells, vals).unwrap();
        let out = interpolate_field(&field, &lat).unwrap();
        assert!(out.degraded);
        assert_eq!(out.values[lat.snap(3.0, 0.0).unwrap()], 3.0);

        let two = SampledField::new(&lat, vec![0, 24], vec![1.0, 9.0]).unwrap();
        let out = interpolate_field(&two, &lat).unwrap();
        assert!(out.degraded);
        assert_eq!(out.values[1], 1.0);
    }

    #[test]
    fn rush_hour() {
        let s = [("16h", 5.0), ("17h", 9.0), ("18h", 7.0)];
        assert_eq!(rush_hour_select(&s).unwrap(), "17h");
        let eq = [("16h", 4.0), ("17h", 4.0), ("18h", 4.0)];
        assert_eq!(rush_hour_select(&eq).unwrap(), "16h");
        assert_eq!(rush_hour_select(&[("20h", 1.0)]).unwrap(), "20h");
        let none: [(&str, f64); 0] = [];
        assert!(rush_hour_select(&none).is_err());
    }
}
