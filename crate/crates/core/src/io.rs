//! CSV readers and writers. All files are comma separated with a header row
//! and `.` decimals; floats are written in shortest round-trip form so that
//! identical runs give identical bytes.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::analysis::{FrontBin, Histogram, ImmigrantEntry, LagDistanceResult, SiteRecord};
use crate::climate::{AnomalySlice, Potential, RasterRecord};
use crate::engine::{Snapshot, TransitionRecord};
use crate::exchange::Edge;
use crate::mesh::Region;
use crate::{Error, Result};

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn header_index(headers: &csv::StringRecord, path: &Path, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h.eq_ignore_ascii_case(name))
        .ok_or_else(|| Error::Input(format!("{}: missing column `{name}`", path.display())))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, idx: usize, path: &Path, line: usize, name: &str) -> Result<T> {
    let raw = rec.get(idx).unwrap_or("");
    raw.parse()
        .map_err(|_| Error::Input(format!("{}:{line}: bad {name} `{raw}`", path.display())))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Coordinate key tolerant to formatting differences below 1e-6 degrees.
fn coord_key(lon: f64, lat: f64) -> (i64, i64) {
    ((lon * 1e6).round() as i64, (lat * 1e6).round() as i64)
}

/// Baseline raster: `lon,lat,t,p` plus optional monthly `t01..t12`.
pub fn read_raster(path: &Path) -> Result<Vec<RasterRecord>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let ilon = header_index(&headers, path, "lon")?;
    let ilat = header_index(&headers, path, "lat")?;
    let it = header_index(&headers, path, "t")?;
    let ip = header_index(&headers, path, "p")?;
    let monthly: Option<Vec<usize>> = (1..=12)
        .map(|m| header_index(&headers, path, &format!("t{m:02}")).ok())
        .collect();
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = n + 2;
        let monthly_t = match &monthly {
            Some(cols) => {
                let mut m = [0.0; 12];
                for (k, &c) in cols.iter().enumerate() {
                    m[k] = field(&rec, c, path, line, "monthly temperature")?;
                }
                Some(m)
            }
            None => None,
        };
        out.push(RasterRecord {
            lon: field(&rec, ilon, path, line, "lon")?,
            lat: field(&rec, ilat, path, line, "lat")?,
            t: field(&rec, it, path, line, "t")?,
            p: field(&rec, ip, path, line, "p")?,
            monthly_t,
        });
    }
    if out.is_empty() {
        return Err(Error::Input(format!("{}: no raster cells", path.display())));
    }
    Ok(out)
}

pub fn write_raster(path: &Path, cells: &[RasterRecord]) -> Result<()> {
    let mut w = writer(path)?;
    let monthly = cells.iter().all(|c| c.monthly_t.is_some()) && !cells.is_empty();
    let mut header = vec!["lon".to_string(), "lat".into(), "t".into(), "p".into()];
    if monthly {
        header.extend((1..=12).map(|m| format!("t{m:02}")));
    }
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for c in cells {
        let mut row = vec![c.lon.to_string(), c.lat.to_string(), c.t.to_string(), c.p.to_string()];
        if let (true, Some(m)) = (monthly, c.monthly_t) {
            row.extend(m.iter().map(f64::to_string));
        }
        w.write_record(&row).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Anomaly slices `year,lon,lat,dt,dp`, aligned with `baseline`. Cells a
/// slice does not mention get zero anomalies.
pub fn read_anomalies(path: &Path, baseline: &[RasterRecord]) -> Result<Vec<AnomalySlice>> {
    let index: HashMap<(i64, i64), usize> = baseline
        .iter()
        .enumerate()
        .map(|(i, r)| (coord_key(r.lon, r.lat), i))
        .collect();
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let cols: Vec<usize> = ["year", "lon", "lat", "dt", "dp"]
        .iter()
        .map(|n| header_index(&headers, path, n))
        .collect::<Result<_>>()?;
    let (iy, ilon, ilat, idt, idp) = (cols[0], cols[1], cols[2], cols[3], cols[4]);
    let mut slices: BTreeMap<i64, AnomalySlice> = BTreeMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = n + 2;
        let year: f64 = field(&rec, iy, path, line, "year")?;
        let lon: f64 = field(&rec, ilon, path, line, "lon")?;
        let lat: f64 = field(&rec, ilat, path, line, "lat")?;
        let cell = *index.get(&coord_key(lon, lat)).ok_or_else(|| {
            Error::Input(format!(
                "{}:{line}: ({lon}, {lat}) is not a raster cell",
                path.display()
            ))
        })?;
        let slice = slices
            .entry((year * 1e3).round() as i64)
            .or_insert_with(|| AnomalySlice {
                year,
                dt: vec![0.0; baseline.len()],
                dp: vec![0.0; baseline.len()],
            });
        slice.dt[cell] = field(&rec, idt, path, line, "dt")?;
        slice.dp[cell] = field(&rec, idp, path, line, "dp")?;
    }
    Ok(slices.into_values().collect())
}

/// Continent label of every raster cell from `lon,lat,continent`. Labels are
/// numbered in sorted order; cells without an entry get the first label.
pub fn read_continents(path: &Path, baseline: &[RasterRecord]) -> Result<Vec<usize>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let ilon = header_index(&headers, path, "lon")?;
    let ilat = header_index(&headers, path, "lat")?;
    let ic = header_index(&headers, path, "continent")?;
    let mut by_cell: HashMap<(i64, i64), String> = HashMap::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = n + 2;
        let lon: f64 = field(&rec, ilon, path, line, "lon")?;
        let lat: f64 = field(&rec, ilat, path, line, "lat")?;
        by_cell.insert(coord_key(lon, lat), rec.get(ic).unwrap_or("").to_string());
    }
    let mut names: Vec<&String> = by_cell.values().collect();
    names.sort();
    names.dedup();
    let ids: HashMap<&String, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    Ok(baseline
        .iter()
        .map(|r| by_cell.get(&coord_key(r.lon, r.lat)).map_or(0, |name| ids[name]))
        .collect())
}

/// `id,area_km2,centroid_lon,centroid_lat,continent,cells` with the member
/// cells space separated.
pub fn write_regions(path: &Path, regions: &[Region]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["id", "area_km2", "centroid_lon", "centroid_lat", "continent", "cells"])
        .map_err(|e| Error::csv(path, e))?;
    for r in regions {
        let cells: Vec<String> = r.cells.iter().map(usize::to_string).collect();
        w.write_record([
            r.id.to_string(),
            r.area.to_string(),
            r.centroid_lon.to_string(),
            r.centroid_lat.to_string(),
            r.continent.to_string(),
            cells.join(" "),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Regions without neighbour lists; pair with [`read_edges`].
pub fn read_regions(path: &Path) -> Result<Vec<Region>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let cols: Vec<usize> = ["id", "area_km2", "centroid_lon", "centroid_lat", "continent", "cells"]
        .iter()
        .map(|n| header_index(&headers, path, n))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = n + 2;
        let cells = rec
            .get(cols[5])
            .unwrap_or("")
            .split_whitespace()
            .map(|c| {
                c.parse()
                    .map_err(|_| Error::Input(format!("{}:{line}: bad cell index `{c}`", path.display())))
            })
            .collect::<Result<Vec<usize>>>()?;
        out.push(Region {
            id: field(&rec, cols[0], path, line, "id")?,
            area: field(&rec, cols[1], path, line, "area")?,
            centroid_lon: field(&rec, cols[2], path, line, "centroid_lon")?,
            centroid_lat: field(&rec, cols[3], path, line, "centroid_lat")?,
            continent: field(&rec, cols[4], path, line, "continent")?,
            cells,
            neighbors: Vec::new(),
        });
    }
    for (i, r) in out.iter().enumerate() {
        if r.id != i {
            return Err(Error::Input(format!(
                "{}: region ids must be 0..n in order",
                path.display()
            )));
        }
    }
    Ok(out)
}

pub fn write_edges(path: &Path, edges: &[Edge]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["i", "j", "length_km"])
        .map_err(|e| Error::csv(path, e))?;
    for e in edges {
        w.write_record([e.a.to_string(), e.b.to_string(), e.length.to_string()])
            .map_err(|err| Error::csv(path, err))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_edges(path: &Path) -> Result<Vec<Edge>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let ii = header_index(&headers, path, "i")?;
    let ij = header_index(&headers, path, "j")?;
    let il = header_index(&headers, path, "length_km")?;
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = n + 2;
        out.push(Edge {
            a: field(&rec, ii, path, line, "i")?,
            b: field(&rec, ij, path, line, "j")?,
            length: field(&rec, il, path, line, "length_km")?,
        });
    }
    Ok(out)
}

pub fn write_potentials(path: &Path, potentials: &[Potential]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["region", "fep", "tli", "lae", "pae"])
        .map_err(|e| Error::csv(path, e))?;
    for (i, p) in potentials.iter().enumerate() {
        w.write_record([
            i.to_string(),
            p.fep.to_string(),
            p.tli.to_string(),
            p.lae.to_string(),
            p.pae.to_string(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `region,year,P,T,Q,f,N` per snapshot.
pub fn write_trajectory(path: &Path, snapshots: &[Snapshot]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["region", "year", "P", "T", "Q", "f", "N"])
        .map_err(|e| Error::csv(path, e))?;
    for snap in snapshots {
        for (i, s) in snap.states.iter().enumerate() {
            w.write_record([
                i.to_string(),
                snap.year.to_string(),
                s.density.to_string(),
                s.technology.to_string(),
                s.farming.to_string(),
                s.economies.to_string(),
                s.diversity(snap.pae[i]).to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `region,onset_bc,completion_bc,immigrant_fraction`; missing values empty.
pub fn write_transitions(path: &Path, transitions: &[TransitionRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["region", "onset_bc", "completion_bc", "immigrant_fraction"])
        .map_err(|e| Error::csv(path, e))?;
    for t in transitions {
        w.write_record([
            t.region.to_string(),
            opt(t.onset),
            opt(t.completion),
            opt(t.immigrant_fraction),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_transitions(path: &Path) -> Result<Vec<TransitionRecord>> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let cols: Vec<usize> = ["region", "onset_bc", "completion_bc", "immigrant_fraction"]
        .iter()
        .map(|n| header_index(&headers, path, n))
        .collect::<Result<_>>()?;
    let optional = |rec: &csv::StringRecord, idx: usize, line: usize, name: &str| -> Result<Option<f64>> {
        match rec.get(idx).unwrap_or("") {
            "" => Ok(None),
            _ => field(rec, idx, path, line, name).map(Some),
        }
    };
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let line = n + 2;
        out.push(TransitionRecord {
            region: field(&rec, cols[0], path, line, "region")?,
            onset: optional(&rec, cols[1], line, "onset_bc")?,
            completion: optional(&rec, cols[2], line, "completion_bc")?,
            immigrant_fraction: optional(&rec, cols[3], line, "immigrant_fraction")?,
        });
    }
    Ok(out)
}

/// Accrued agropastoral and technology mass by channel per snapshot.
pub fn write_ledger(path: &Path, snapshots: &[Snapshot]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record([
        "region",
        "year",
        "demic",
        "cultural",
        "local",
        "tech_demic",
        "tech_cultural",
        "tech_local",
    ])
    .map_err(|e| Error::csv(path, e))?;
    for snap in snapshots {
        let ledger = &snap.ledger;
        for (i, (q, t)) in ledger.farming.iter().zip(&ledger.technology).enumerate() {
            w.write_record([
                i.to_string(),
                snap.year.to_string(),
                q.demic.to_string(),
                q.cultural.to_string(),
                q.local.to_string(),
                t.demic.to_string(),
                t.cultural.to_string(),
                t.local.to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Sites parsed leniently.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SiteTable {
    pub sites: Vec<SiteRecord>,
    /// Data rows that could not be parsed.
    pub malformed: usize,
    pub rows: usize,
}

impl SiteTable {
    pub fn malformed_fraction(&self) -> f64 {
        if self.rows == 0 {
            0.0
        } else {
            self.malformed as f64 / self.rows as f64
        }
    }
}

/// `id,lon,lat,median_calBC,sigma,culture`; malformed rows are counted and
/// skipped.
pub fn read_sites(path: &Path) -> Result<SiteTable> {
    let mut rdr = reader(path)?;
    let headers = rdr.headers().map_err(|e| Error::csv(path, e))?.clone();
    let cols: Vec<usize> = ["id", "lon", "lat", "median_calBC", "sigma"]
        .iter()
        .map(|n| header_index(&headers, path, n))
        .collect::<Result<_>>()?;
    let iculture = header_index(&headers, path, "culture").ok();
    let mut table = SiteTable::default();
    for (n, rec) in rdr.records().enumerate() {
        table.rows += 1;
        let line = n + 2;
        let parsed = rec.map_err(|e| Error::csv(path, e)).and_then(|rec| {
            let site = SiteRecord {
                id: rec.get(cols[0]).unwrap_or("").to_string(),
                lon: field(&rec, cols[1], path, line, "lon")?,
                lat: field(&rec, cols[2], path, line, "lat")?,
                median_bc: field(&rec, cols[3], path, line, "median_calBC")?,
                sigma: field(&rec, cols[4], path, line, "sigma")?,
                culture: iculture
                    .and_then(|i| rec.get(i))
                    .filter(|c| !c.is_empty())
                    .map(str::to_string),
            };
            let valid = site.lon.is_finite()
                && site.lat.is_finite()
                && site.median_bc.is_finite()
                && site.sigma.is_finite()
                && site.sigma >= 0.0;
            if valid {
                Ok(site)
            } else {
                Err(Error::Input(format!("{}:{line}: invalid site values", path.display())))
            }
        });
        match parsed {
            Ok(site) => table.sites.push(site),
            Err(e) => {
                log::warn!("skipping site row: {e}");
                table.malformed += 1;
            }
        }
    }
    Ok(table)
}

pub fn write_sites(path: &Path, sites: &[SiteRecord]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["id", "lon", "lat", "median_calBC", "sigma", "culture"])
        .map_err(|e| Error::csv(path, e))?;
    for s in sites {
        w.write_record([
            s.id.clone(),
            s.lon.to_string(),
            s.lat.to_string(),
            s.median_bc.to_string(),
            s.sigma.to_string(),
            s.culture.clone().unwrap_or_default(),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Regression summaries (`lagdist.csv`) and percentile fronts
/// (`lagdist_front.csv`), one labelled row set per source.
pub fn write_lagdist(summary: &Path, front: &Path, results: &[(&str, &LagDistanceResult)]) -> Result<()> {
    let mut w = writer(summary)?;
    w.write_record(["source", "slope_km_per_a", "intercept_km", "r2", "n"])
        .map_err(|e| Error::csv(summary, e))?;
    for (label, r) in results {
        w.write_record([
            label.to_string(),
            r.slope.to_string(),
            r.intercept.to_string(),
            r.r2.to_string(),
            r.n.to_string(),
        ])
        .map_err(|e| Error::csv(summary, e))?;
    }
    w.flush().map_err(|e| Error::io(summary, e))?;

    let mut w = writer(front)?;
    w.write_record(["source", "bin_lo_km", "bin_hi_km", "n", "lag_p05"])
        .map_err(|e| Error::csv(front, e))?;
    for (label, r) in results {
        for FrontBin {
            lo_km,
            hi_km,
            n,
            lag_p05,
        } in &r.front
        {
            w.write_record([
                label.to_string(),
                lo_km.to_string(),
                hi_km.to_string(),
                n.to_string(),
                lag_p05.to_string(),
            ])
            .map_err(|e| Error::csv(front, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(front, e))
}

/// `region,bin_start_bc,count,model_mass` for a set of focus histograms.
pub fn write_histograms(path: &Path, histograms: &[(usize, Histogram)]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["region", "bin_start_bc", "count", "model_mass"])
        .map_err(|e| Error::csv(path, e))?;
    for (region, h) in histograms {
        for b in &h.bins {
            w.write_record([
                region.to_string(),
                b.start.to_string(),
                b.count.to_string(),
                opt(b.model),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `region,immigrant_fraction,status` with status `ok` or `missing`.
pub fn write_immigrants(path: &Path, entries: &[ImmigrantEntry]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["region", "immigrant_fraction", "status"])
        .map_err(|e| Error::csv(path, e))?;
    for e in entries {
        let status = if e.fraction.is_some() { "ok" } else { "missing" };
        w.write_record([e.region.to_string(), opt(e.fraction), status.to_string()])
            .map_err(|err| Error::csv(path, err))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
