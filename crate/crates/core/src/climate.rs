//! Climate transfer functions and the agropastoral potential of regions.
//!
//! Temperature and precipitation become net primary productivity through the
//! Miami model. Productivity then yields the food extraction potential (FEP),
//! the local potential for agropastoral economies (LAE) and, after a
//! continental species–area aggregation, the absolute potential (PAE).

use serde::{Deserialize, Serialize};

use crate::engine::PotentialSource;
use crate::{Error, Result};

/// Asymptotic Miami-model productivity, g·m⁻²·a⁻¹.
pub const NPP_MAX: f64 = 1460.0;

/// Days per calendar month of a non-leap year, January first.
pub const DAYS_PER_MONTH: [f64; 12] = [31.0, 28.0, 31.0, 30.0, 31.0, 30.0, 31.0, 31.0, 30.0, 31.0, 30.0, 31.0];

/// Net primary productivity from mean annual temperature `t` (°C) and annual
/// precipitation `p` (m), as the minimum of the precipitation- and
/// temperature-limited Miami estimates.
pub fn miami_npp(t: f64, p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(Error::Domain(format!("negative precipitation {p} m")));
    }
    let npp_p = (1.0 - (-0.664 * p).exp()) * NPP_MAX;
    let npp_t = NPP_MAX / (1.0 + 3.7248 * (-0.119 * t).exp());
    Ok(npp_p.min(npp_t))
}

/// Cubic smoothstep on [0, 1], clamped outside.
pub fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

/// Temperature limitation of agriculture: 0 at permafrost (no growing degree
/// days), 1 from `gdd_ref` upwards.
pub fn temperature_limitation(gdd: f64, gdd_ref: f64) -> f64 {
    smoothstep(gdd / gdd_ref)
}

/// Growing degree days above 0 °C from a monthly temperature climatology.
pub fn monthly_gdd(monthly_t: &[f64; 12]) -> f64 {
    monthly_t
        .iter()
        .zip(DAYS_PER_MONTH)
        .map(|(t, days)| t.max(0.0) * days)
        .sum()
}

/// Linear stand-in for growing degree days when only the annual mean
/// temperature is known: `gdd = max(0, slope·(t − base))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GddProxy {
    /// °C·day per °C of annual mean temperature.
    pub slope: f64,
    /// Annual mean temperature with zero growing degree days, °C.
    pub base: f64,
}

impl Default for GddProxy {
    fn default() -> Self {
        GddProxy {
            slope: 200.0,
            base: -5.0,
        }
    }
}

impl GddProxy {
    pub fn gdd(&self, t: f64) -> f64 {
        (self.slope * (t - self.base)).max(0.0)
    }
}

/// Food extraction potential, peaking at 1 where `npp == npp_f`.
pub fn food_extraction_potential(npp: f64, npp_f: f64) -> f64 {
    let x = npp / npp_f;
    2.0 * x / (x * x + 1.0)
}

/// Local potential for agropastoral economies, `tli · 4x/(x³ + 3)` with
/// `x = npp/npp_n`.
///
/// Note the analytic maximum of the rational part lies at `x = (3/2)^(1/3)`,
/// not at `x = 1`.
pub fn local_agro_potential(npp: f64, tli: f64, npp_n: f64) -> f64 {
    let x = npp / npp_n;
    tli * 4.0 * x / (x * x * x + 3.0)
}

/// Continental potential for agropastoral economies,
/// `cae_k = cae_max / a_max · Σ_{i∈k} A_i·LAE_i`.
///
/// `continent_of[i]` is the continent of region `i`; the result has one entry
/// per continent label up to the largest label used. Continents without
/// regions get 0.
pub fn continental_cae(continent_of: &[usize], laes: &[f64], areas: &[f64], cae_max: f64, a_max: f64) -> Vec<f64> {
    let n = continent_of.iter().max().map_or(0, |k| k + 1);
    let mut weighted = vec![0.0; n];
    for ((&k, &lae), &area) in continent_of.iter().zip(laes).zip(areas) {
        weighted[k] += area * lae;
    }
    if a_max <= 0.0 {
        return vec![0.0; n];
    }
    weighted.into_iter().map(|s| cae_max * s / a_max).collect()
}

/// Normalization area that gives the largest continent (by total area)
/// exactly `cae_max`: its LAE-weighted area `Σ A_i·LAE_i`.
pub fn largest_continent_norm(continent_of: &[usize], laes: &[f64], areas: &[f64]) -> f64 {
    let n = continent_of.iter().max().map_or(0, |k| k + 1);
    let mut total = vec![0.0; n];
    let mut weighted = vec![0.0; n];
    for ((&k, &lae), &area) in continent_of.iter().zip(laes).zip(areas) {
        total[k] += area;
        weighted[k] += area * lae;
    }
    let mut largest = 0;
    for k in 1..n {
        if total[k] > total[largest] {
            largest = k;
        }
    }
    weighted.get(largest).copied().unwrap_or(0.0)
}

/// Transfer-function constants shared by the climate layer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferParams {
    pub npp_f: f64,
    pub npp_n: f64,
    pub gdd_ref: f64,
    pub cae_max: f64,
    /// Explicit continental normalization area; `None` normalizes on the
    /// largest continent.
    pub a_max: Option<f64>,
    pub gdd_proxy: GddProxy,
}

impl Default for TransferParams {
    fn default() -> Self {
        TransferParams {
            npp_f: 1100.0,
            npp_n: 550.0,
            gdd_ref: 1500.0,
            cae_max: 4.0,
            a_max: None,
            gdd_proxy: GddProxy::default(),
        }
    }
}

/// Per-region environmental potentials driving the local dynamics.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    /// Food extraction potential in [0, 1].
    pub fep: f64,
    /// Temperature limitation in [0, 1].
    pub tli: f64,
    /// Local agropastoral-economy potential.
    pub lae: f64,
    /// Absolute number of potential agropastoral economies.
    pub pae: f64,
}

/// Combine per-region LAE into PAE through the continental aggregation.
pub fn absolute_potentials(continent_of: &[usize], laes: &[f64], areas: &[f64], params: &TransferParams) -> Vec<f64> {
    let a_max = params
        .a_max
        .unwrap_or_else(|| largest_continent_norm(continent_of, laes, areas));
    let cae = continental_cae(continent_of, laes, areas, params.cae_max, a_max);
    continent_of.iter().zip(laes).map(|(&k, &lae)| lae * cae[k]).collect()
}

/// One baseline raster cell as read from input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RasterRecord {
    pub lon: f64,
    pub lat: f64,
    /// Mean annual temperature, °C.
    pub t: f64,
    /// Annual precipitation, m.
    pub p: f64,
    /// Optional monthly temperature climatology, °C.
    pub monthly_t: Option<[f64; 12]>,
}

/// Climate and productivity state of one grid cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClimateCell {
    pub lon: f64,
    pub lat: f64,
    pub t: f64,
    pub p: f64,
    pub gdd: f64,
    pub npp: f64,
    pub tli: f64,
}

impl ClimateCell {
    pub fn from_record(rec: &RasterRecord, dt: f64, dp: f64, params: &TransferParams) -> Result<Self> {
        let t = rec.t + dt;
        let p = (rec.p + dp).max(0.0);
        if !(rec.p >= 0.0) {
            return Err(Error::Domain(format!(
                "negative precipitation {} m at ({}, {})",
                rec.p, rec.lon, rec.lat
            )));
        }
        let gdd = match &rec.monthly_t {
            Some(months) => {
                let shifted = months.map(|m| m + dt);
                monthly_gdd(&shifted)
            }
            None => params.gdd_proxy.gdd(t),
        };
        Ok(ClimateCell {
            lon: rec.lon,
            lat: rec.lat,
            t,
            p,
            gdd,
            npp: miami_npp(t, p)?,
            tli: temperature_limitation(gdd, params.gdd_ref),
        })
    }

    pub fn fep(&self, params: &TransferParams) -> f64 {
        food_extraction_potential(self.npp, params.npp_f)
    }

    pub fn lae(&self, params: &TransferParams) -> f64 {
        local_agro_potential(self.npp, self.tli, params.npp_n)
    }
}

/// Temperature/precipitation anomalies for one time slice, aligned with the
/// baseline cells.
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalySlice {
    /// Sim BC year of the slice.
    pub year: f64,
    pub dt: Vec<f64>,
    pub dp: Vec<f64>,
}

/// Baseline climatology plus anomaly slices, linearly interpolated in time.
#[derive(Clone, Debug, PartialEq)]
pub struct ClimateSeries {
    pub baseline: Vec<RasterRecord>,
    /// Sorted by year, oldest (largest BC) first.
    slices: Vec<AnomalySlice>,
}

impl ClimateSeries {
    pub fn new(baseline: Vec<RasterRecord>, mut slices: Vec<AnomalySlice>) -> Result<Self> {
        for s in &slices {
            if s.dt.len() != baseline.len() || s.dp.len() != baseline.len() {
                return Err(Error::Input(format!(
                    "anomaly slice {} does not match the baseline cell count",
                    s.year
                )));
            }
        }
        slices.sort_by(|a, b| b.year.total_cmp(&a.year));
        Ok(ClimateSeries { baseline, slices })
    }

    pub fn slices(&self) -> &[AnomalySlice] {
        &self.slices
    }

    /// Interpolated anomaly `(dt, dp)` of cell `i` at `year` sim BC. Years
    /// outside the slice range hold the nearest slice.
    pub fn anomaly(&self, i: usize, year: f64) -> (f64, f64) {
        match self.slices.as_slice() {
            [] => (0.0, 0.0),
            [only] => (only.dt[i], only.dp[i]),
            slices => {
                let first = &slices[0];
                let last = &slices[slices.len() - 1];
                if year >= first.year {
                    return (first.dt[i], first.dp[i]);
                }
                if year <= last.year {
                    return (last.dt[i], last.dp[i]);
                }
                let k = slices.partition_point(|s| s.year > year);
                let (older, younger) = (&slices[k - 1], &slices[k]);
                let w = (older.year - year) / (older.year - younger.year);
                (
                    older.dt[i] + w * (younger.dt[i] - older.dt[i]),
                    older.dp[i] + w * (younger.dp[i] - older.dp[i]),
                )
            }
        }
    }

    /// All cells at `year` sim BC.
    pub fn cells_at(&self, year: f64, params: &TransferParams) -> Result<Vec<ClimateCell>> {
        self.baseline
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let (dt, dp) = self.anomaly(i, year);
                ClimateCell::from_record(rec, dt, dp, params)
            })
            .collect()
    }
}

/// Region-level potentials as area-weighted means of cell FEP, TLI and LAE,
/// with PAE from the continental aggregation.
pub fn regional_potentials(
    cells: &[ClimateCell],
    cell_areas: &[f64],
    members: &[Vec<usize>],
    continent_of: &[usize],
    params: &TransferParams,
) -> Vec<Potential> {
    let mut out: Vec<Potential> = members
        .iter()
        .map(|cs| {
            let mut acc = Potential::default();
            let mut area = 0.0;
            for &c in cs {
                let a = cell_areas[c];
                area += a;
                acc.fep += a * cells[c].fep(params);
                acc.tli += a * cells[c].tli;
                acc.lae += a * cells[c].lae(params);
            }
            if area > 0.0 {
                acc.fep /= area;
                acc.tli /= area;
                acc.lae /= area;
            }
            acc
        })
        .collect();
    let region_areas: Vec<f64> = members
        .iter()
        .map(|cs| cs.iter().map(|&c| cell_areas[c]).sum())
        .collect();
    let laes: Vec<f64> = out.iter().map(|p| p.lae).collect();
    let paes = absolute_potentials(continent_of, &laes, &region_areas, params);
    for (p, pae) in out.iter_mut().zip(paes) {
        p.pae = pae;
    }
    out
}

/// Potentials recomputed from the climate series at a fixed cadence.
#[derive(Clone, Debug)]
pub struct ClimateDriver {
    pub series: ClimateSeries,
    pub cell_areas: Vec<f64>,
    pub members: Vec<Vec<usize>>,
    pub continent_of: Vec<usize>,
    pub params: TransferParams,
    /// Years between recomputations.
    pub interval: f64,
}

impl PotentialSource for ClimateDriver {
    fn potentials_at(&self, year: f64) -> Result<Vec<Potential>> {
        let cells = self.series.cells_at(year, &self.params)?;
        Ok(regional_potentials(
            &cells,
            &self.cell_areas,
            &self.members,
            &self.continent_of,
            &self.params,
        ))
    }

    fn refresh_interval(&self) -> Option<f64> {
        (!self.series.slices().is_empty() && self.interval > 0.0).then_some(self.interval)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dry_cell_has_no_productivity() {
        assert_eq!(miami_npp(25.0, 0.0).unwrap(), 0.0);
        assert_eq!(miami_npp(-40.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn miami_limiting_factors() {
        // temperature-limited: 1460 / 4.7248
        let cold = miami_npp(0.0, 10.0).unwrap();
        assert!((cold - 1460.0 / 4.7248).abs() < 1e-9);
        assert!((cold - 309.0).abs() < 0.1);
        // precipitation-limited
        let dry = miami_npp(30.0, 1.0).unwrap();
        let npp_t30 = 1460.0 / (1.0 + 3.7248 * (-0.119f64 * 30.0).exp());
        assert!(npp_t30 > dry);
        assert!((dry - 1460.0 * (1.0 - (-0.664f64).exp())).abs() < 1e-9);
        assert!((dry - 708.41).abs() < 0.01);
    }

    #[test]
    fn negative_precipitation_is_rejected() {
        assert!(matches!(miami_npp(10.0, -0.1), Err(Error::Domain(_))));
        assert!(miami_npp(10.0, f64::NAN).is_err());
    }

    #[test]
    fn temperature_limitation_limits() {
        assert_eq!(temperature_limitation(0.0, 1500.0), 0.0);
        assert_eq!(temperature_limitation(1500.0, 1500.0), 1.0);
        assert_eq!(temperature_limitation(5000.0, 1500.0), 1.0);
        assert!((temperature_limitation(750.0, 1500.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fep_anchors() {
        assert_eq!(food_extraction_potential(0.0, 1100.0), 0.0);
        assert_eq!(food_extraction_potential(1100.0, 1100.0), 1.0);
        assert!((food_extraction_potential(2200.0, 1100.0) - 0.8).abs() < 1e-12);
    }

    #[test]
    fn lae_anchors() {
        assert_eq!(local_agro_potential(0.0, 1.0, 550.0), 0.0);
        assert!((local_agro_potential(550.0, 1.0, 550.0) - 1.0).abs() < 1e-12);
        assert!((local_agro_potential(1100.0, 1.0, 550.0) - 8.0 / 11.0).abs() < 1e-12);
        assert!((local_agro_potential(1100.0, 0.25, 550.0) - 2.0 / 11.0).abs() < 1e-12);
    }

    #[test]
    fn cae_examples() {
        // normalization anchor
        let cae = continental_cae(&[0], &[1.0], &[500.0], 6.0, 500.0);
        assert_eq!(cae, vec![6.0]);
        // all LAE zero
        let cae = continental_cae(&[0, 0], &[0.0, 0.0], &[10.0, 20.0], 6.0, 30.0);
        assert_eq!(cae, vec![0.0]);
        let pae = absolute_potentials(&[0, 0], &[0.0, 0.0], &[10.0, 20.0], &TransferParams::default());
        assert_eq!(pae, vec![0.0, 0.0]);
        // two quarter-size regions
        let a_max = 1000.0;
        let cae = continental_cae(&[0, 0], &[0.8, 0.4], &[a_max / 4.0, a_max / 4.0], 8.0, a_max);
        assert!((cae[0] - 2.4).abs() < 1e-12);
        // an unused label gives an empty continent
        let cae = continental_cae(&[2], &[0.5], &[1.0], 8.0, 1.0);
        assert_eq!(cae, vec![0.0, 0.0, 4.0]);
    }

    #[test]
    fn largest_continent_gets_cae_max() {
        let continent_of = [0, 1, 1, 0];
        let laes = [0.3, 0.9, 0.2, 0.5];
        let areas = [10.0, 40.0, 30.0, 5.0];
        let norm = largest_continent_norm(&continent_of, &laes, &areas);
        let cae = continental_cae(&continent_of, &laes, &areas, 7.0, norm);
        assert!((cae[1] - 7.0).abs() < 1e-12);
        assert!(cae[0] < 7.0);
    }

    #[test]
    fn monthly_gdd_counts_warm_days() {
        let mut months = [-5.0; 12];
        months[6] = 10.0;
        assert_eq!(monthly_gdd(&months), 310.0);
        assert_eq!(monthly_gdd(&[-1.0; 12]), 0.0);
    }

    #[test]
    fn anomalies_interpolate_linearly() {
        let base = vec![RasterRecord {
            lon: 0.0,
            lat: 0.0,
            t: 10.0,
            p: 0.5,
            monthly_t: None,
        }];
        let slices = vec![
            AnomalySlice {
                year: 5000.0,
                dt: vec![0.0],
                dp: vec![0.0],
            },
            AnomalySlice {
                year: 9000.0,
                dt: vec![-4.0],
                dp: vec![-0.2],
            },
        ];
        let series = ClimateSeries::new(base, slices).unwrap();
        assert_eq!(series.anomaly(0, 9500.0), (-4.0, -0.2));
        assert_eq!(series.anomaly(0, 3000.0), (0.0, 0.0));
        let (dt, dp) = series.anomaly(0, 7000.0);
        assert!((dt + 2.0).abs() < 1e-12 && (dp + 0.1).abs() < 1e-12);
        let cells = series.cells_at(9000.0, &TransferParams::default()).unwrap();
        assert_eq!(cells[0].t, 6.0);
        assert!((cells[0].p - 0.3).abs() < 1e-12);
    }

    #[test]
    fn anomaly_cannot_make_precipitation_negative() {
        let rec = RasterRecord {
            lon: 0.0,
            lat: 0.0,
            t: 10.0,
            p: 0.1,
            monthly_t: None,
        };
        let cell = ClimateCell::from_record(&rec, 0.0, -0.5, &TransferParams::default()).unwrap();
        assert_eq!(cell.p, 0.0);
        assert_eq!(cell.npp, 0.0);
    }
}
