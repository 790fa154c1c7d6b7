//! Synthetic inputs for tests, calibration and demonstrations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::analysis::{LagSample, SiteRecord};
use crate::climate::{Potential, RasterRecord};
use crate::dynamics::{ParameterSet, RegionState};
use crate::engine::{self, InitialConditions, Mode, Scenario, Seed, StaticPotentials};
use crate::exchange::{Edge, RegionGraph};
use crate::{Result, EARTH_RADIUS_KM};

/// A straight chain of identical rectangular regions.
#[derive(Clone, Debug)]
pub struct Corridor {
    pub graph: RegionGraph,
    /// Distance of each region centre from the centre of region 0, km.
    pub distance_km: Vec<f64>,
    pub potentials: Vec<Potential>,
}

/// `n` regions of `spacing_km × width_km`, each sharing a `width_km` edge
/// with the next one.
pub fn corridor(n: usize, spacing_km: f64, width_km: f64, potential: Potential) -> Corridor {
    let areas = vec![spacing_km * width_km; n];
    let edges = (1..n)
        .map(|i| Edge {
            a: i - 1,
            b: i,
            length: width_km,
        })
        .collect();
    Corridor {
        graph: RegionGraph::new(areas, edges),
        distance_km: (0..n).map(|i| i as f64 * spacing_km).collect(),
        potentials: vec![potential; n],
    }
}

/// Uniform corridor environment: moderate food extraction, no temperature
/// limitation, one potential economy.
pub const CORRIDOR_POTENTIAL: Potential = Potential {
    fep: 0.7,
    tli: 1.0,
    lae: 0.25,
    pae: 1.0,
};

/// State a single isolated region reaches after `years` from the default
/// initial conditions.
pub fn spin_up(potential: Potential, params: &ParameterSet, years: f64) -> Result<RegionState> {
    let single = corridor(1, 100.0, 100.0, potential);
    let scenario = Scenario {
        mode: Mode::NoExchange,
        end_year: Scenario::default().start_year - years,
        output_interval: years,
        ..Scenario::default()
    };
    let out = engine::run(&scenario, &single.graph, &StaticPotentials(single.potentials), params)?;
    Ok(out.final_states[0])
}

/// Wave-of-advance experiment on a corridor.
#[derive(Clone, Debug)]
pub struct CorridorRun {
    pub corridor: Corridor,
    pub scenario: Scenario,
    pub params: ParameterSet,
}

impl CorridorRun {
    /// Onsets as `(years after the start, distance km)`, regions without an
    /// onset skipped.
    pub fn arrivals(&self, out: &engine::RunOutput) -> Vec<(f64, f64)> {
        out.transitions
            .iter()
            .filter_map(|t| {
                t.onset
                    .map(|y| (self.scenario.start_year - y, self.corridor.distance_km[t.region]))
            })
            .collect()
    }

    pub fn run(&self) -> Result<engine::RunOutput> {
        engine::run(
            &self.scenario,
            &self.corridor.graph,
            &StaticPotentials(self.corridor.potentials.clone()),
            &self.params,
        )
    }
}

/// 40 regions of 25 km × 25 km in the corridor environment, every region
/// starting as settled foragers without agropastoral activity, and region 0
/// seeded with higher technology and its full set of economies.
pub fn corridor_run(mode: Mode, params: &ParameterSet) -> Result<CorridorRun> {
    const REGIONS: usize = 40;
    const SPACING_KM: f64 = 25.0;
    let forager = spin_up(CORRIDOR_POTENTIAL, params, 6000.0)?;
    let scenario = Scenario {
        mode,
        end_year: Scenario::default().start_year - 4000.0,
        initial: InitialConditions {
            density: forager.density,
            technology: forager.technology,
            farming: 0.0,
            diversity: forager.diversity(CORRIDOR_POTENTIAL.pae),
        },
        seeds: vec![Seed {
            region: 0,
            technology: Some(forager.technology + 1.0),
            farming: None,
            economies: Some(1.0),
        }],
        ..Scenario::default()
    };
    Ok(CorridorRun {
        corridor: corridor(REGIONS, SPACING_KM, SPACING_KM, CORRIDOR_POTENTIAL),
        scenario,
        params: *params,
    })
}

/// Connected random graph: a spanning chain plus `extra` random edges, with
/// areas in [5·10³, 5·10⁵] km² and edge lengths in [10, 500] km.
pub fn random_graph(n: usize, extra: usize, seed: u64) -> RegionGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let areas: Vec<f64> = (0..n).map(|_| rng.random_range(5e3..5e5)).collect();
    let mut pairs: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    while pairs.len() < n.saturating_sub(1) + extra && n > 2 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let key = (a.min(b), a.max(b));
        if a != b && !pairs.contains(&key) {
            pairs.push(key);
        }
    }
    let edges = pairs
        .into_iter()
        .map(|(a, b)| Edge {
            a,
            b,
            length: rng.random_range(10.0..500.0),
        })
        .collect();
    RegionGraph::new(areas, edges)
}

/// Regular raster with `rows × cols` cells of `res` degrees whose south-west
/// cell centre is `origin`; `climate(row, col)` gives `(t, p)`.
pub fn raster(
    rows: usize,
    cols: usize,
    origin: (f64, f64),
    res: f64,
    climate: impl Fn(usize, usize) -> (f64, f64),
) -> Vec<RasterRecord> {
    let mut out = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for c in 0..cols {
            let (t, p) = climate(r, c);
            out.push(RasterRecord {
                lon: origin.0 + res * c as f64,
                lat: origin.1 + res * r as f64,
                t,
                p,
                monthly_t: None,
            });
        }
    }
    out
}

/// Same temperature everywhere; the southern half is drier than the north.
pub fn two_band_raster(rows: usize, cols: usize) -> Vec<RasterRecord> {
    raster(rows, cols, (20.25, 40.25), 0.5, |r, _| {
        if r < rows / 2 {
            (16.0, 0.3)
        } else {
            (16.0, 0.9)
        }
    })
}

pub fn homogeneous_raster(rows: usize, cols: usize) -> Vec<RasterRecord> {
    raster(rows, cols, (20.25, 40.25), 0.5, |_, _| (12.0, 0.6))
}

/// Latitude bands from south to north: a rainless desert, a temperate band
/// whose precipitation rises from 0.3 m in the west to 0.9 m in the east,
/// and a cold north without growing degree days.
pub fn mediterranean_raster(rows: usize, cols: usize) -> Vec<RasterRecord> {
    let desert = rows / 4;
    let cold = rows - rows / 4;
    let span = cols.saturating_sub(1).max(1) as f64;
    raster(rows, cols, (10.25, 30.25), 0.5, |r, c| {
        if r < desert {
            (24.0, 0.0)
        } else if r >= cold {
            (-12.0, 0.35)
        } else {
            (15.0, 0.3 + 0.6 * c as f64 / span)
        }
    })
}

/// Point reached from `start` (lon, lat in degrees) after `distance_km`
/// along the initial `bearing_deg` on the sphere.
pub fn destination(start: (f64, f64), bearing_deg: f64, distance_km: f64) -> (f64, f64) {
    let delta = distance_km / EARTH_RADIUS_KM;
    let theta = bearing_deg.to_radians();
    let phi1 = start.1.to_radians();
    let lambda1 = start.0.to_radians();
    let phi2 = (phi1.sin() * delta.cos() + phi1.cos() * delta.sin() * theta.cos()).asin();
    let lambda2 = lambda1 + (theta.sin() * delta.sin() * phi1.cos()).atan2(delta.cos() - phi1.sin() * phi2.sin());
    (lambda2.to_degrees(), phi2.to_degrees())
}

/// Lag–distance cloud: distances uniform on `[0, max_km)`, lags
/// `d/slope` plus Gaussian noise of `sigma` years.
pub fn noisy_lag_samples(n: usize, slope: f64, sigma: f64, max_km: f64, seed: u64) -> Vec<LagSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Uniform::new(0.0, max_km).expect("max_km is positive");
    let noise = Normal::new(0.0, sigma).expect("sigma is finite and non-negative");
    (0..n)
        .map(|_| {
            let d = dist.sample(&mut rng);
            LagSample {
                distance_km: d,
                lag: d / slope + noise.sample(&mut rng),
            }
        })
        .collect()
}

/// Dated sites spreading from `center` at `slope` km·a⁻¹ with Gaussian age
/// noise; the first site sits on the centre with age `center_bc`.
pub fn noisy_sites(
    n: usize,
    slope: f64,
    sigma: f64,
    max_km: f64,
    center: (f64, f64),
    center_bc: f64,
    seed: u64,
) -> Vec<SiteRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let bearing = Uniform::new(0.0, 360.0).expect("valid range");
    let mut out = vec![SiteRecord {
        id: "s0".into(),
        lon: center.0,
        lat: center.1,
        median_bc: center_bc,
        sigma: 50.0,
        culture: None,
    }];
    for (k, s) in noisy_lag_samples(n.saturating_sub(1), slope, sigma, max_km, seed)
        .into_iter()
        .enumerate()
    {
        let (lon, lat) = destination(center, bearing.sample(&mut rng), s.distance_km);
        out.push(SiteRecord {
            id: format!("s{}", k + 1),
            lon,
            lat,
            median_bc: center_bc - s.lag,
            sigma: 50.0,
            culture: None,
        });
    }
    out
}
