//! Validation statistics: lag–distance regression, percentile fronts,
//! timing histograms with Gaussian broadening, immigrant-fraction maps.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::engine::TransitionRecord;
use crate::{Error, Result, EARTH_RADIUS_KM};

/// Great-circle distance in km between two `(lon, lat)` points in degrees.
pub fn great_circle_km(a: (f64, f64), b: (f64, f64)) -> f64 {
    // canonical argument order keeps d(a, b) == d(b, a) bit for bit
    let (a, b) = if (a.0, a.1) <= (b.0, b.1) { (a, b) } else { (b, a) };
    let (phi1, phi2) = (a.1.to_radians(), b.1.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.0 - a.0).to_radians();
    let h = (0.5 * dphi).sin().powi(2) + phi1.cos() * phi2.cos() * (0.5 * dlambda).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Dated archaeological site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteRecord {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
    /// Median calibrated age, cal BC.
    pub median_bc: f64,
    /// Dating uncertainty, years.
    pub sigma: f64,
    pub culture: Option<String>,
}

/// One point of a lag–distance cloud.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagSample {
    pub distance_km: f64,
    /// Years after the centre's onset.
    pub lag: f64,
}

impl LagSample {
    pub fn from_age(distance_km: f64, age_bc: f64, center_bc: f64) -> Self {
        LagSample {
            distance_km,
            lag: center_bc - age_bc,
        }
    }
}

/// Earliest-arrival quantile of one distance bin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrontBin {
    pub lo_km: f64,
    pub hi_km: f64,
    pub n: usize,
    /// 0.05 quantile of the lags in the bin.
    pub lag_p05: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagDistanceResult {
    /// Front speed, km·a⁻¹.
    pub slope: f64,
    /// km.
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
    pub front: Vec<FrontBin>,
}

/// Running first and second moments of a bivariate sample.
#[derive(Clone, Copy, Debug, Default)]
struct Moments {
    n: f64,
    mean_x: f64,
    mean_y: f64,
    sxx: f64,
    syy: f64,
    sxy: f64,
}

impl Moments {
    fn push(&mut self, x: f64, y: f64) {
        self.n += 1.0;
        let dx = x - self.mean_x;
        let dy = y - self.mean_y;
        self.mean_x += dx / self.n;
        self.mean_y += dy / self.n;
        self.sxx += dx * (x - self.mean_x);
        self.syy += dy * (y - self.mean_y);
        self.sxy += dx * (y - self.mean_y);
    }
}

/// Least-squares line `y = slope·x + intercept` and r².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `y` on `x` in one pass.
pub fn ols(points: impl IntoIterator<Item = (f64, f64)>) -> Result<LineFit> {
    let mut m = Moments::default();
    for (x, y) in points {
        if !(x.is_finite() && y.is_finite()) {
            return Err(Error::Input(format!("non-finite regression point ({x}, {y})")));
        }
        m.push(x, y);
    }
    if m.n < 2.0 {
        return Err(Error::Degenerate(format!(
            "regression needs at least 2 points, got {}",
            m.n
        )));
    }
    if m.sxx <= 0.0 || m.syy <= 0.0 {
        return Err(Error::Degenerate(
            "zero variance in regression data; slope undefined".into(),
        ));
    }
    let slope = m.sxy / m.sxx;
    let r2 = (m.sxy * m.sxy / (m.sxx * m.syy)).clamp(0.0, 1.0);
    Ok(LineFit {
        slope,
        intercept: m.mean_y - slope * m.mean_x,
        r2,
    })
}

/// Linear-interpolation quantile of unsorted data; `None` when empty.
pub fn quantile(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    Some(v[lo] + (h - lo as f64) * (v[hi] - v[lo]))
}

/// Regress distance on lag and compute the percentile front in bins of
/// `bin_km`.
pub fn lag_distance(samples: &[LagSample], bin_km: f64) -> Result<LagDistanceResult> {
    if !(bin_km > 0.0) {
        return Err(Error::Input(format!("bin width must be positive, got {bin_km}")));
    }
    let fit = ols(samples.iter().map(|s| (s.lag, s.distance_km)))?;
    let mut bins: std::collections::BTreeMap<i64, Vec<f64>> = Default::default();
    for s in samples {
        bins.entry((s.distance_km / bin_km).floor() as i64)
            .or_default()
            .push(s.lag);
    }
    let front = bins
        .into_iter()
        .map(|(k, lags)| FrontBin {
            lo_km: k as f64 * bin_km,
            hi_km: (k + 1) as f64 * bin_km,
            n: lags.len(),
            lag_p05: quantile(&lags, 0.05).expect("bins are nonempty"),
        })
        .collect();
    Ok(LagDistanceResult {
        slope: fit.slope,
        intercept: fit.intercept,
        r2: fit.r2,
        n: samples.len(),
        front,
    })
}

/// Gaussian spread of a regional transition date.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingDensity {
    /// Centre, sim BC.
    pub center: f64,
    /// Standard deviation, years; 0 for a point mass.
    pub sigma: f64,
}

/// Half-width of the binned window in standard deviations.
const WINDOW_SIGMAS: f64 = 8.0;

impl TimingDensity {
    /// Probability mass in `[lo, hi)`.
    pub fn mass(&self, lo: f64, hi: f64) -> f64 {
        if self.sigma == 0.0 {
            return if self.center >= lo && self.center < hi {
                1.0
            } else {
                0.0
            };
        }
        let normal = Normal::new(self.center, self.sigma).expect("sigma is positive and finite");
        normal.cdf(hi) - normal.cdf(lo)
    }

    /// Masses of the bins `[k·w, (k+1)·w)` covering ±8σ around the centre,
    /// as `(bin start, mass)`.
    pub fn binned(&self, bin_width: f64) -> Vec<(f64, f64)> {
        let first = ((self.center - WINDOW_SIGMAS * self.sigma) / bin_width).floor() as i64;
        let last = ((self.center + WINDOW_SIGMAS * self.sigma) / bin_width).floor() as i64;
        (first..=last)
            .map(|k| {
                let lo = k as f64 * bin_width;
                (lo, self.mass(lo, lo + bin_width))
            })
            .collect()
    }
}

/// Broadening kernel `σ_b = β·√A / v_ref` around a transition year.
pub fn broaden_timing(year: f64, area_km2: f64, beta: f64, v_ref: f64) -> Result<TimingDensity> {
    if !(area_km2 > 0.0) {
        return Err(Error::Domain(format!("region area must be positive, got {area_km2}")));
    }
    if !(beta >= 0.0 && v_ref > 0.0) {
        return Err(Error::Domain(format!(
            "invalid broadening constants beta={beta}, v_ref={v_ref}"
        )));
    }
    Ok(TimingDensity {
        center: year,
        sigma: beta * area_km2.sqrt() / v_ref,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Lower edge, cal BC.
    pub start: f64,
    pub count: usize,
    /// Model probability mass in the bin, when a model curve is given.
    pub model: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub bins: Vec<HistogramBin>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Start of the most populated bin; ties go to the oldest bin.
    pub fn mode(&self) -> Option<f64> {
        self.bins
            .iter()
            .filter(|b| b.count > 0)
            .max_by(|a, b| a.count.cmp(&b.count).then(a.start.total_cmp(&b.start)))
            .map(|b| b.start)
    }
}

/// Bin the ages of sites inside a focus region (by `in_region`) or within
/// `radius_km` of its centroid, overlaid with an optional model curve.
pub fn focus_histogram(
    sites: &[SiteRecord],
    centroid: (f64, f64),
    radius_km: f64,
    in_region: impl Fn(f64, f64) -> bool,
    bin_width: f64,
    model: Option<&TimingDensity>,
) -> Result<Histogram> {
    if !(bin_width > 0.0) {
        return Err(Error::Input(format!("bin width must be positive, got {bin_width}")));
    }
    let mut counts: std::collections::BTreeMap<i64, usize> = Default::default();
    for s in sites {
        if great_circle_km((s.lon, s.lat), centroid) <= radius_km || in_region(s.lon, s.lat) {
            *counts.entry((s.median_bc / bin_width).floor() as i64).or_insert(0) += 1;
        }
    }
    let mut masses: std::collections::BTreeMap<i64, f64> = Default::default();
    if let Some(m) = model {
        for (start, mass) in m.binned(bin_width) {
            masses.insert((start / bin_width).round() as i64, mass);
        }
    }
    let keys: std::collections::BTreeSet<i64> = counts.keys().chain(masses.keys()).copied().collect();
    let bins = keys
        .into_iter()
        .map(|k| HistogramBin {
            start: k as f64 * bin_width,
            count: counts.get(&k).copied().unwrap_or(0),
            model: model.map(|_| masses.get(&k).copied().unwrap_or(0.0)),
        })
        .collect();
    Ok(Histogram { bin_width, bins })
}

/// Immigrant fraction of one region at 90% completion.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImmigrantEntry {
    pub region: usize,
    /// `None` when the region never completed its transition.
    pub fraction: Option<f64>,
}

pub fn immigrant_map(transitions: &[TransitionRecord]) -> Vec<ImmigrantEntry> {
    let mut out: Vec<ImmigrantEntry> = transitions
        .iter()
        .map(|t| ImmigrantEntry {
            region: t.region,
            fraction: t.completion.and(t.immigrant_fraction),
        })
        .collect();
    out.sort_by_key(|e| e.region);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        assert_eq!(great_circle_km((12.0, 40.0), (12.0, 40.0)), 0.0);
        let one_degree = 2.0 * std::f64::consts::PI * 6371.0 / 360.0;
        assert!((great_circle_km((0.0, 0.0), (1.0, 0.0)) - one_degree).abs() < 1e-9);
        assert!((one_degree - 111.195).abs() < 1e-3);
        let half = std::f64::consts::PI * 6371.0;
        assert!((great_circle_km((0.0, 0.0), (180.0, 0.0)) - half).abs() < 1e-6);
        assert!((great_circle_km((30.0, 45.0), (-150.0, -45.0)) - half).abs() < 1e-6);
    }

    #[test]
    fn exact_line() {
        let samples: Vec<LagSample> = (0..20)
            .map(|i| LagSample {
                distance_km: 100.0 + 50.0 * i as f64,
                lag: 50.0 * i as f64,
            })
            .collect();
        let r = lag_distance(&samples, 500.0).unwrap();
        assert!((r.slope - 1.0).abs() < 1e-12);
        assert!((r.intercept - 100.0).abs() < 1e-9);
        assert!((r.r2 - 1.0).abs() < 1e-12);
        assert_eq!(r.n, 20);
    }

    #[test]
    fn two_points() {
        let r = lag_distance(
            &[
                LagSample {
                    distance_km: 0.0,
                    lag: 0.0,
                },
                LagSample {
                    distance_km: 300.0,
                    lag: 200.0,
                },
            ],
            500.0,
        )
        .unwrap();
        assert!((r.slope - 1.5).abs() < 1e-15);
        assert!((r.r2 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_distance() {
        let s: Vec<LagSample> = (0..5)
            .map(|i| LagSample {
                distance_km: 700.0,
                lag: i as f64,
            })
            .collect();
        assert!(matches!(lag_distance(&s, 500.0), Err(Error::Degenerate(_))));
        assert!(lag_distance(&s[..1], 500.0).is_err());
    }

    #[test]
    fn front_bins() {
        let s: Vec<LagSample> = (0..=20)
            .map(|i| LagSample {
                distance_km: 10.0 * i as f64 + 400.0,
                lag: i as f64,
            })
            .collect();
        let r = lag_distance(&s, 500.0).unwrap();
        assert_eq!(r.front.len(), 2);
        assert_eq!(r.front[0].n, 10);
        // lags 0..=9: h = 0.45
        assert!((r.front[0].lag_p05 - 0.45).abs() < 1e-12);
        assert_eq!(r.front[1].lo_km, 500.0);
    }

    #[test]
    fn quantile_examples() {
        assert_eq!(quantile(&[], 0.5), None);
        assert_eq!(quantile(&[3.0], 0.05), Some(3.0));
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.5), Some(2.5));
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.0), Some(1.0));
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 1.0), Some(4.0));
    }

    #[test]
    fn broadening() {
        let d = broaden_timing(5000.0, 360_000.0, 0.5, 1.0).unwrap();
        assert!((d.sigma - 300.0).abs() < 1e-9);
        let d2 = broaden_timing(5000.0, 4.0 * 360_000.0, 0.5, 1.0).unwrap();
        assert!((d2.sigma - 2.0 * d.sigma).abs() < 1e-9);
        let total: f64 = d.binned(100.0).iter().map(|b| b.1).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let d = TimingDensity {
            center: 6000.0,
            sigma: 200.0,
        };
        assert!((d.mass(5800.0, 6200.0) - 0.682_689_492).abs() < 1e-8);
    }

    #[test]
    fn point_mass() {
        let d = broaden_timing(6750.0, 1e5, 0.0, 1.0).unwrap();
        let bins = d.binned(100.0);
        assert_eq!(bins, vec![(6700.0, 1.0)]);
        assert!(broaden_timing(6750.0, 0.0, 0.5, 1.0).is_err());
    }

    fn site(lon: f64, lat: f64, age: f64) -> SiteRecord {
        SiteRecord {
            id: String::new(),
            lon,
            lat,
            median_bc: age,
            sigma: 50.0,
            culture: None,
        }
    }

    #[test]
    fn focus_selection() {
        let c = (35.0, 33.0);
        // 201 km due north
        let dlat = 201.0 / (6371.0 * std::f64::consts::PI / 180.0);
        let sites = [site(35.0, 33.0, 6750.0), site(35.0, 33.0 + dlat, 6750.0)];
        let h = focus_histogram(&sites, c, 200.0, |_, _| false, 100.0, None).unwrap();
        assert_eq!(h.total(), 1);
        let h = focus_histogram(&sites, c, 200.0, |_, lat| lat > 34.0, 100.0, None).unwrap();
        assert_eq!(h.total(), 2);
        let h = focus_histogram(&[], c, 200.0, |_, _| false, 100.0, None).unwrap();
        assert!(h.bins.is_empty() && h.mode().is_none());
    }

    #[test]
    fn focus_mode() {
        let mut sites: Vec<SiteRecord> = (0..17).map(|i| site(20.0, 45.0, 6710.0 + 5.0 * i as f64)).collect();
        sites.push(site(20.0, 45.0, 6550.0));
        sites.push(site(20.0, 45.0, 6950.0));
        let model = TimingDensity {
            center: 6750.0,
            sigma: 150.0,
        };
        let h = focus_histogram(&sites, (20.0, 45.0), 200.0, |_, _| false, 100.0, Some(&model)).unwrap();
        assert_eq!(h.mode(), Some(6700.0));
        assert_eq!(h.total(), 19);
        let model_mass: f64 = h.bins.iter().filter_map(|b| b.model).sum();
        assert!((model_mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn immigrant_entries() {
        let recs = [
            TransitionRecord {
                region: 1,
                onset: Some(7000.0),
                completion: None,
                immigrant_fraction: None,
            },
            TransitionRecord {
                region: 0,
                onset: Some(7500.0),
                completion: Some(7400.0),
                immigrant_fraction: Some(0.3),
            },
        ];
        let map = immigrant_map(&recs);
        assert_eq!(
            map[0],
            ImmigrantEntry {
                region: 0,
                fraction: Some(0.3)
            }
        );
        assert_eq!(map[1].fraction, None);
    }
}
