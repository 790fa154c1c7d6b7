//! Regionalization of a regular lon/lat grid into biogeographically
//! homogeneous, contiguous regions, and the region adjacency graph.
//!
//! A cellular automaton starts with one cluster per cell. Every sweep, each
//! cell scores its own cluster and the clusters of its neighbour cells by
//! `similarity(cell, cluster mean) · A/(A + A_T)`, where `A` is the candidate
//! cluster's area, and joins the best one. A sweep has two checkerboard
//! phases; the cells of one colour decide against a frozen snapshot and
//! commit in ascending index order. Once memberships settle, clusters are split into
//! 4-connected pieces and pieces smaller than `A_T` are attached to the
//! adjacent cluster with the highest area-weighted similarity of the cluster
//! means.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::exchange::Edge;
use crate::{Error, Result, EARTH_RADIUS_KM};

/// Area of a `res`°×`res`° cell centred at latitude `lat`, km².
pub fn cell_area_km2(lat: f64, res: f64) -> f64 {
    let half = 0.5 * res.to_radians();
    let phi = lat.to_radians();
    EARTH_RADIUS_KM * EARTH_RADIUS_KM * res.to_radians() * ((phi + half).sin() - (phi - half).sin())
}

/// Length of the edge shared by two east–west neighbours, km.
pub fn meridional_edge_km(res: f64) -> f64 {
    EARTH_RADIUS_KM * res.to_radians()
}

/// Length of the edge along the parallel `lat` shared by two north–south
/// neighbours, km.
pub fn zonal_edge_km(lat: f64, res: f64) -> f64 {
    EARTH_RADIUS_KM * lat.to_radians().cos() * res.to_radians()
}

/// Grid cell with the discriminating properties of the regionalization.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub index: usize,
    pub lon: f64,
    pub lat: f64,
    /// km².
    pub area: f64,
    pub npp: f64,
    pub gdd: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Neighborhood {
    #[default]
    Four,
    Eight,
}

/// Regular grid of land cells, addressed by (row, column).
#[derive(Clone, Debug)]
pub struct Grid {
    cells: Vec<Cell>,
    resolution: f64,
    lon0: f64,
    lat0: f64,
    position: Vec<(i64, i64)>,
    lookup: HashMap<(i64, i64), usize>,
}

/// Smallest positive spacing between distinct sorted values.
fn min_spacing(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| *d > 1e-9)
        .min_by(f64::total_cmp)
}

impl Grid {
    /// Build from `(lon, lat, npp, gdd)` cell centres. Without an explicit
    /// resolution it is inferred from the smallest coordinate spacing,
    /// falling back to 0.5°.
    pub fn new(points: &[(f64, f64, f64, f64)], resolution: Option<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Input("empty grid".into()));
        }
        let res = match resolution {
            Some(r) if r > 0.0 => r,
            Some(r) => return Err(Error::Input(format!("grid resolution must be positive, got {r}"))),
            None => {
                let dl = min_spacing(points.iter().map(|p| p.0));
                let dp = min_spacing(points.iter().map(|p| p.1));
                match (dl, dp) {
                    (Some(a), Some(b)) => a.min(b),
                    (Some(a), None) | (None, Some(a)) => a,
                    (None, None) => 0.5,
                }
            }
        };
        let lon0 = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let lat0 = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let mut cells = Vec::with_capacity(points.len());
        let mut position = Vec::with_capacity(points.len());
        let mut lookup = HashMap::with_capacity(points.len());
        for (index, &(lon, lat, npp, gdd)) in points.iter().enumerate() {
            let col = ((lon - lon0) / res).round() as i64;
            let row = ((lat - lat0) / res).round() as i64;
            if lookup.insert((row, col), index).is_some() {
                return Err(Error::Input(format!("duplicate grid cell at ({lon}, {lat})")));
            }
            position.push((row, col));
            cells.push(Cell {
                index,
                lon,
                lat,
                area: cell_area_km2(lat, res),
                npp,
                gdd,
            });
        }
        Ok(Grid {
            cells,
            resolution: res,
            lon0,
            lat0,
            position,
            lookup,
        })
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn areas(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.area).collect()
    }

    /// Cell containing the point, if it is a land cell of the grid.
    pub fn cell_at(&self, lon: f64, lat: f64) -> Option<usize> {
        let col = ((lon - self.lon0) / self.resolution).round() as i64;
        let row = ((lat - self.lat0) / self.resolution).round() as i64;
        self.lookup.get(&(row, col)).copied()
    }

    /// (row, column) of cell `i`.
    pub fn position(&self, i: usize) -> (i64, i64) {
        self.position[i]
    }

    /// Neighbouring cells in a fixed order: south, west, east, north, then
    /// the diagonals for the 8-neighbourhood.
    pub fn neighbors(&self, i: usize, hood: Neighborhood) -> impl Iterator<Item = usize> + '_ {
        const FOUR: [(i64, i64); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
        const DIAG: [(i64, i64); 4] = [(-1, -1), (-1, 1), (1, -1), (1, 1)];
        let (r, c) = self.position[i];
        let diag: &[(i64, i64)] = match hood {
            Neighborhood::Four => &[],
            Neighborhood::Eight => &DIAG,
        };
        FOUR.iter()
            .chain(diag.iter())
            .filter_map(move |(dr, dc)| self.lookup.get(&(r + dr, c + dc)).copied())
    }
}

/// Normalization scales of the similarity measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scales {
    pub npp: f64,
    pub gdd: f64,
}

impl Scales {
    /// Domain-wide standard deviations; a property without spread gets scale 1.
    pub fn from_cells(cells: &[Cell]) -> Self {
        let std = |f: fn(&Cell) -> f64| {
            let n = cells.len() as f64;
            let mean = cells.iter().map(f).sum::<f64>() / n;
            let var = cells.iter().map(|c| (f(c) - mean).powi(2)).sum::<f64>() / n;
            let s = var.sqrt();
            if s > 0.0 && s.is_finite() {
                s
            } else {
                1.0
            }
        };
        Scales {
            npp: std(|c| c.npp),
            gdd: std(|c| c.gdd),
        }
    }
}

/// `1/(1 + |Δnpp|/npp_scale + |Δgdd|/gdd_scale)`, in (0, 1].
pub fn similarity(npp_a: f64, gdd_a: f64, npp_b: f64, gdd_b: f64, scales: &Scales) -> f64 {
    let s = (npp_a - npp_b).abs() / scales.npp + (gdd_a - gdd_b).abs() / scales.gdd;
    1.0 / (1.0 + s)
}

/// Area weight `A/(A + A_T)`.
fn area_weight(area: f64, target: f64) -> f64 {
    area / (area + target)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Target cluster size A_T, km².
    pub target_area: f64,
    pub max_iter: usize,
    pub neighborhood: Neighborhood,
    /// Similarity scales; `None` uses the domain standard deviations.
    pub scales: Option<Scales>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            target_area: 65_000.0,
            max_iter: 1000,
            neighborhood: Neighborhood::Four,
            scales: None,
        }
    }
}

/// Static geometry of one region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: usize,
    /// Member cell indices, ascending.
    pub cells: Vec<usize>,
    /// km².
    pub area: f64,
    pub centroid_lon: f64,
    pub centroid_lat: f64,
    pub continent: usize,
    /// `(neighbour id, shared boundary km)`, ascending by id.
    pub neighbors: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct Regionalization {
    pub regions: Vec<Region>,
    /// Region id of every cell.
    pub cell_region: Vec<usize>,
    pub edges: Vec<Edge>,
    /// False when the automaton hit `max_iter` before settling.
    pub converged: bool,
    pub iterations: usize,
}

/// Run the automaton, split, merge and build the adjacency graph.
pub fn build_regions(grid: &Grid, opts: &BuildOptions) -> Result<Regionalization> {
    if !(opts.target_area > 0.0) {
        return Err(Error::Input(format!(
            "target area must be positive, got {}",
            opts.target_area
        )));
    }
    let cells = grid.cells();
    let n = cells.len();
    let scales = opts.scales.unwrap_or_else(|| Scales::from_cells(cells));
    if !(scales.npp > 0.0 && scales.gdd > 0.0) {
        return Err(Error::Input("similarity scales must be positive".into()));
    }

    // cluster ids start as cell indices
    let mut cluster: Vec<usize> = (0..n).collect();
    let mut stats = cluster_stats(cells, &cluster);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut changed = false;
        // red-black phases: no two 4-neighbours decide in the same phase
        for parity in 0..2 {
            let decisions: Vec<(usize, usize)> = (0..n)
                .filter(|&c| {
                    let (r, col) = grid.position(c);
                    (r + col).rem_euclid(2) == parity
                })
                .map(|c| (c, best_cluster(grid, c, &cluster, &stats, &scales, opts)))
                .collect();
            for (c, k) in decisions {
                if cluster[c] != k {
                    cluster[c] = k;
                    changed = true;
                }
            }
            stats = cluster_stats(cells, &cluster);
        }
        if !changed {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("region automaton did not settle within {} sweeps", opts.max_iter);
    }

    let mut labels = split_components(grid, &cluster);
    merge_small(grid, &mut labels, &scales, opts.target_area);

    // stable ids: order regions by their smallest cell index
    let mut first_cell: BTreeMap<usize, usize> = BTreeMap::new();
    for (c, &k) in labels.iter().enumerate() {
        first_cell.entry(k).or_insert(c);
    }
    let mut order: Vec<(usize, usize)> = first_cell.into_iter().map(|(k, c)| (c, k)).collect();
    order.sort_unstable();
    let remap: HashMap<usize, usize> = order.iter().enumerate().map(|(id, &(_, k))| (k, id)).collect();
    let cell_region: Vec<usize> = labels.iter().map(|k| remap[k]).collect();

    let mut regions: Vec<Region> = (0..order.len())
        .map(|id| Region {
            id,
            cells: Vec::new(),
            area: 0.0,
            centroid_lon: 0.0,
            centroid_lat: 0.0,
            continent: 0,
            neighbors: Vec::new(),
        })
        .collect();
    for (c, &r) in cell_region.iter().enumerate() {
        let reg = &mut regions[r];
        reg.cells.push(c);
        reg.area += cells[c].area;
        reg.centroid_lon += cells[c].area * cells[c].lon;
        reg.centroid_lat += cells[c].area * cells[c].lat;
    }
    for reg in &mut regions {
        reg.centroid_lon /= reg.area;
        reg.centroid_lat /= reg.area;
    }
    let edges = adjacency(grid, &cell_region, regions.len());
    for e in &edges {
        regions[e.a].neighbors.push((e.b, e.length));
        regions[e.b].neighbors.push((e.a, e.length));
    }
    for reg in &mut regions {
        reg.neighbors.sort_by_key(|x| x.0);
    }
    Ok(Regionalization {
        regions,
        cell_region,
        edges,
        converged,
        iterations,
    })
}

/// Area and area-weighted mean properties of every cluster id in use.
fn cluster_stats(cells: &[Cell], cluster: &[usize]) -> Vec<ClusterStats> {
    let mut stats = vec![ClusterStats::default(); cells.len()];
    for (c, &k) in cluster.iter().enumerate().rev() {
        let s = &mut stats[k];
        s.area += cells[c].area;
        s.npp += cells[c].area * cells[c].npp;
        s.gdd += cells[c].area * cells[c].gdd;
        s.first = c;
    }
    stats
}

/// Candidate among the cell's own cluster and its neighbours' clusters with
/// the highest `similarity(cell, cluster mean) · A/(A + A_T)`; ties go to the
/// lowest cluster id.
fn best_cluster(
    grid: &Grid,
    c: usize,
    cluster: &[usize],
    stats: &[ClusterStats],
    scales: &Scales,
    opts: &BuildOptions,
) -> usize {
    let cell = &grid.cells()[c];
    let score = |k: usize| {
        let s = &stats[k];
        similarity(cell.npp, cell.gdd, s.npp / s.area, s.gdd / s.area, scales) * area_weight(s.area, opts.target_area)
    };
    let own = cluster[c];
    let mut best = (score(own), own);
    for nb in grid.neighbors(c, opts.neighborhood) {
        let k = cluster[nb];
        if k == best.1 {
            continue;
        }
        let sc = score(k);
        if sc > best.0 || (sc == best.0 && k < best.1) {
            best = (sc, k);
        }
    }
    best.1
}

/// Relabel so that every label is one 4-connected piece.
fn split_components(grid: &Grid, cluster: &[usize]) -> Vec<usize> {
    let n = cluster.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        queue.push_back(start);
        while let Some(c) = queue.pop_front() {
            for nb in grid.neighbors(c, Neighborhood::Four) {
                if label[nb] == usize::MAX && cluster[nb] == cluster[c] {
                    label[nb] = next;
                    queue.push_back(nb);
                }
            }
        }
        next += 1;
    }
    label
}

#[derive(Clone, Copy, Debug, Default)]
struct ClusterStats {
    area: f64,
    npp: f64,
    gdd: f64,
    first: usize,
}

/// Attach clusters below `target` to their most similar neighbour, smallest
/// first, until none is left that has a neighbour.
fn merge_small(grid: &Grid, labels: &mut [usize], scales: &Scales, target: f64) {
    let cells = grid.cells();
    loop {
        let mut stats: BTreeMap<usize, ClusterStats> = BTreeMap::new();
        for (c, &k) in labels.iter().enumerate() {
            let s = stats.entry(k).or_insert(ClusterStats {
                first: c,
                ..ClusterStats::default()
            });
            s.area += cells[c].area;
            s.npp += cells[c].area * cells[c].npp;
            s.gdd += cells[c].area * cells[c].gdd;
        }
        let mut adjacent: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (c, &k) in labels.iter().enumerate() {
            for nb in grid.neighbors(c, Neighborhood::Four) {
                let other = labels[nb];
                if other != k {
                    let list = adjacent.entry(k).or_default();
                    if !list.contains(&other) {
                        list.push(other);
                    }
                }
            }
        }
        let candidate = stats
            .iter()
            .filter(|(k, s)| s.area < target && adjacent.contains_key(k))
            .min_by(|a, b| a.1.area.total_cmp(&b.1.area).then(a.1.first.cmp(&b.1.first)))
            .map(|(k, _)| *k);
        let Some(small) = candidate else { break };
        let s = stats[&small];
        let (npp, gdd) = (s.npp / s.area, s.gdd / s.area);
        let mut best: Option<(f64, usize, usize)> = None;
        for &other in &adjacent[&small] {
            let o = stats[&other];
            let score = similarity(npp, gdd, o.npp / o.area, o.gdd / o.area, scales) * area_weight(o.area, target);
            let better = match best {
                None => true,
                Some((bs, _, bf)) => score > bs || (score == bs && o.first < bf),
            };
            if better {
                best = Some((score, other, o.first));
            }
        }
        let (_, into, _) = best.expect("small cluster has a neighbour");
        for k in labels.iter_mut() {
            if *k == small {
                *k = into;
            }
        }
    }
}

/// Shared boundary lengths between regions from the 4-neighbour cell edges.
pub fn adjacency(grid: &Grid, cell_region: &[usize], n_regions: usize) -> Vec<Edge> {
    let res = grid.resolution();
    let mut lengths: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..grid.len() {
        let (ri, ci) = grid.position(i);
        // east and north partners only, so every cell edge counts once
        for (dr, dc) in [(0i64, 1i64), (1, 0)] {
            let Some(&j) = grid.lookup.get(&(ri + dr, ci + dc)) else {
                continue;
            };
            let (a, b) = (cell_region[i], cell_region[j]);
            if a == b {
                continue;
            }
            debug_assert!(a < n_regions && b < n_regions);
            let len = if dr == 0 {
                meridional_edge_km(res)
            } else {
                let boundary = 0.5 * (grid.cells[i].lat + grid.cells[j].lat);
                zonal_edge_km(boundary, res)
            };
            *lengths.entry((a.min(b), a.max(b))).or_insert(0.0) += len;
        }
    }
    lengths
        .into_iter()
        .map(|((a, b), length)| Edge { a, b, length })
        .collect()
}

/// Label each region with the continent covering most of its area (ties to
/// the lowest label).
pub fn assign_continents(regions: &mut [Region], grid: &Grid, cell_labels: &[usize]) {
    for reg in regions {
        let mut tally: BTreeMap<usize, f64> = BTreeMap::new();
        for &c in &reg.cells {
            *tally.entry(cell_labels[c]).or_insert(0.0) += grid.cells()[c].area;
        }
        reg.continent = tally
            .into_iter()
            .fold(None, |best: Option<(usize, f64)>, (k, a)| match best {
                Some((_, ba)) if ba >= a => best,
                _ => Some((k, a)),
            })
            .map_or(0, |(k, _)| k);
    }
}

/// True when every region's cells form one 4-connected piece.
pub fn is_contiguous(grid: &Grid, region: &Region, cell_region: &[usize]) -> bool {
    let Some(&start) = region.cells.first() else {
        return false;
    };
    let mut seen = vec![false; grid.len()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut count = 1;
    while let Some(c) = queue.pop_front() {
        for nb in grid.neighbors(c, Neighborhood::Four) {
            if !seen[nb] && cell_region[nb] == region.id {
                seen[nb] = true;
                count += 1;
                queue.push_back(nb);
            }
        }
    }
    count == region.cells.len()
}
