//! End-to-end assembly: raster to regions, regions to a simulation, and
//! simulated transitions plus dated sites to validation statistics.

use log::{info, warn};

use crate::analysis::{
    broaden_timing, focus_histogram, great_circle_km, immigrant_map, lag_distance, Histogram, ImmigrantEntry,
    LagDistanceResult, LagSample, SiteRecord,
};
use crate::climate::{AnomalySlice, ClimateCell, ClimateDriver, ClimateSeries, RasterRecord, TransferParams};
use crate::config::{AnalysisOptions, RegionOptions};
use crate::engine::TransitionRecord;
use crate::exchange::{Edge, RegionGraph};
use crate::mesh::{self, Grid, Region};
use crate::svg;
use crate::{Error, Result};

/// Grid, regions and climate of one study domain.
#[derive(Clone, Debug)]
pub struct Landscape {
    pub grid: Grid,
    pub regions: Vec<Region>,
    pub edges: Vec<Edge>,
    /// Region id of every cell.
    pub cell_region: Vec<usize>,
    pub series: ClimateSeries,
}

fn grid_points(baseline: &[RasterRecord], transfer: &TransferParams) -> Result<Vec<(f64, f64, f64, f64)>> {
    baseline
        .iter()
        .map(|rec| {
            let c = ClimateCell::from_record(rec, 0.0, 0.0, transfer)?;
            Ok((c.lon, c.lat, c.npp, c.gdd))
        })
        .collect()
}

impl Landscape {
    /// Regionalize the baseline climate. Without continent labels every cell
    /// belongs to continent 0.
    pub fn build(
        baseline: Vec<RasterRecord>,
        slices: Vec<AnomalySlice>,
        cell_continents: Option<&[usize]>,
        opts: &RegionOptions,
        transfer: &TransferParams,
    ) -> Result<Self> {
        let grid = Grid::new(&grid_points(&baseline, transfer)?, opts.resolution)?;
        let mut built = mesh::build_regions(&grid, &opts.build)?;
        if !built.converged {
            warn!(
                "regionalization stopped after {} sweeps without settling",
                built.iterations
            );
        }
        let labels = cell_continents.map_or_else(|| vec![0; grid.len()], <[usize]>::to_vec);
        if labels.len() != grid.len() {
            return Err(Error::Input(format!(
                "{} continent labels for {} cells",
                labels.len(),
                grid.len()
            )));
        }
        mesh::assign_continents(&mut built.regions, &grid, &labels);
        info!(
            "{} cells grouped into {} regions after {} sweeps",
            grid.len(),
            built.regions.len(),
            built.iterations
        );
        Ok(Landscape {
            grid,
            regions: built.regions,
            edges: built.edges,
            cell_region: built.cell_region,
            series: ClimateSeries::new(baseline, slices)?,
        })
    }

    /// Reassemble from previously written regions and edges.
    pub fn from_regions(
        baseline: Vec<RasterRecord>,
        slices: Vec<AnomalySlice>,
        regions: Vec<Region>,
        edges: Vec<Edge>,
        resolution: Option<f64>,
        transfer: &TransferParams,
    ) -> Result<Self> {
        let grid = Grid::new(&grid_points(&baseline, transfer)?, resolution)?;
        let mut cell_region = vec![usize::MAX; grid.len()];
        for r in &regions {
            for &c in &r.cells {
                let slot = cell_region
                    .get_mut(c)
                    .ok_or_else(|| Error::Input(format!("region {} refers to missing cell {c}", r.id)))?;
                if *slot != usize::MAX {
                    return Err(Error::Input(format!(
                        "cell {c} belongs to regions {} and {}",
                        *slot, r.id
                    )));
                }
                *slot = r.id;
            }
        }
        if let Some(c) = cell_region.iter().position(|&r| r == usize::MAX) {
            return Err(Error::Input(format!("cell {c} belongs to no region")));
        }
        if let Some(e) = edges.iter().find(|e| e.a >= regions.len() || e.b >= regions.len()) {
            return Err(Error::Input(format!("edge {}-{} refers to a missing region", e.a, e.b)));
        }
        Ok(Landscape {
            grid,
            regions,
            edges,
            cell_region,
            series: ClimateSeries::new(baseline, slices)?,
        })
    }

    pub fn graph(&self) -> RegionGraph {
        RegionGraph::new(self.regions.iter().map(|r| r.area).collect(), self.edges.clone())
    }

    pub fn driver(&self, transfer: &TransferParams, interval: f64) -> ClimateDriver {
        ClimateDriver {
            series: self.series.clone(),
            cell_areas: self.grid.areas(),
            members: self.regions.iter().map(|r| r.cells.clone()).collect(),
            continent_of: self.regions.iter().map(|r| r.continent).collect(),
            params: *transfer,
            interval,
        }
    }

    /// Region containing the grid cell at `(lon, lat)`, if any.
    pub fn region_at(&self, lon: f64, lat: f64) -> Option<usize> {
        self.grid.cell_at(lon, lat).map(|c| self.cell_region[c])
    }

    /// Region containing the point, else the one with the nearest centroid.
    pub fn nearest_region(&self, lon: f64, lat: f64) -> Option<usize> {
        self.region_at(lon, lat).or_else(|| {
            self.regions
                .iter()
                .min_by(|a, b| {
                    let da = great_circle_km((lon, lat), (a.centroid_lon, a.centroid_lat));
                    let db = great_circle_km((lon, lat), (b.centroid_lon, b.centroid_lat));
                    da.total_cmp(&db)
                })
                .map(|r| r.id)
        })
    }

    /// Choropleth of a per-region value painted onto the cells.
    pub fn region_map(&self, title: &str, values: &[Option<f64>]) -> String {
        let centres: Vec<(f64, f64)> = self.grid.cells().iter().map(|c| (c.lon, c.lat)).collect();
        let per_cell: Vec<Option<f64>> = self
            .cell_region
            .iter()
            .map(|&r| values.get(r).copied().flatten())
            .collect();
        svg::choropleth(title, &centres, self.grid.resolution(), &per_cell)
    }
}

/// Validation statistics of one simulation.
#[derive(Clone, Debug, Default)]
pub struct AnalysisOutput {
    /// Lag–distance of the simulated regional onsets.
    pub simulated: Option<LagDistanceResult>,
    /// Lag–distance of the dated sites.
    pub observed: Option<LagDistanceResult>,
    pub histograms: Vec<(usize, Histogram)>,
    pub immigrants: Vec<ImmigrantEntry>,
}

fn tolerate_degenerate(what: &str, r: Result<LagDistanceResult>) -> Result<Option<LagDistanceResult>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::Degenerate(msg)) => {
            warn!("{what} lag-distance skipped: {msg}");
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Lag–distance samples of the simulated onsets around the configured
/// centre. The reference onset is that of the centre region, or the oldest
/// onset when the centre region has none.
pub fn simulated_lags(
    landscape: &Landscape,
    transitions: &[TransitionRecord],
    opts: &AnalysisOptions,
) -> Vec<LagSample> {
    let center = (opts.center_lon, opts.center_lat);
    let own = landscape
        .nearest_region(center.0, center.1)
        .and_then(|r| transitions.iter().find(|t| t.region == r))
        .and_then(|t| t.onset);
    let Some(center_bc) = own.or_else(|| transitions.iter().filter_map(|t| t.onset).max_by(f64::total_cmp)) else {
        return Vec::new();
    };
    transitions
        .iter()
        .filter_map(|t| {
            let onset = t.onset?;
            let r = &landscape.regions[t.region];
            let d = great_circle_km(center, (r.centroid_lon, r.centroid_lat));
            Some(LagSample::from_age(d, onset, center_bc))
        })
        .collect()
}

/// Lag–distance samples of the dated sites, anchored on the oldest site
/// within the centre radius. Sites with larger uncertainty than
/// `max_sigma` are dropped.
pub fn observed_lags(sites: &[SiteRecord], opts: &AnalysisOptions) -> Vec<LagSample> {
    let center = (opts.center_lon, opts.center_lat);
    let usable: Vec<&SiteRecord> = sites.iter().filter(|s| s.sigma <= opts.max_sigma).collect();
    let Some(center_bc) = usable
        .iter()
        .filter(|s| great_circle_km(center, (s.lon, s.lat)) <= opts.center_radius_km)
        .map(|s| s.median_bc)
        .max_by(f64::total_cmp)
    else {
        return Vec::new();
    };
    usable
        .iter()
        .map(|s| LagSample::from_age(great_circle_km(center, (s.lon, s.lat)), s.median_bc, center_bc))
        .collect()
}

pub fn analyze(
    landscape: &Landscape,
    transitions: &[TransitionRecord],
    sites: &[SiteRecord],
    opts: &AnalysisOptions,
) -> Result<AnalysisOutput> {
    let simulated = tolerate_degenerate(
        "simulated",
        lag_distance(&simulated_lags(landscape, transitions, opts), opts.bin_km),
    )?;
    let observed = if sites.is_empty() {
        None
    } else {
        tolerate_degenerate("observed", lag_distance(&observed_lags(sites, opts), opts.bin_km))?
    };

    let mut histograms = Vec::with_capacity(opts.focus.len());
    for &id in &opts.focus {
        let region = landscape
            .regions
            .get(id)
            .ok_or_else(|| Error::Config(format!("focus region {id} does not exist")))?;
        let model = transitions
            .iter()
            .find(|t| t.region == id)
            .and_then(|t| t.onset)
            .map(|onset| broaden_timing(onset, region.area, opts.beta, opts.v_ref))
            .transpose()?;
        let hist = focus_histogram(
            sites,
            (region.centroid_lon, region.centroid_lat),
            opts.focus_radius_km,
            |lon, lat| landscape.region_at(lon, lat) == Some(id),
            opts.hist_bin,
            model.as_ref(),
        )?;
        histograms.push((id, hist));
    }

    Ok(AnalysisOutput {
        simulated,
        observed,
        histograms,
        immigrants: immigrant_map(transitions),
    })
}
