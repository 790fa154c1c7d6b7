//! Run configuration: flat `section.key = value` text with `#` comments.
//!
//! Values are applied on top of the defaults in file order; command-line
//! overrides use the same keys and are applied last.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::dynamics::ParameterSet;
use crate::engine::{Scenario, Seed};
use crate::mesh::{BuildOptions, Neighborhood, Scales};
use crate::{Error, Result};

/// Input and output locations.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Paths {
    /// Baseline raster CSV.
    pub climate: Option<PathBuf>,
    /// Anomaly slices CSV.
    pub anomalies: Option<PathBuf>,
    /// Continent labels per cell.
    pub continents: Option<PathBuf>,
    /// Dated sites CSV.
    pub sites: Option<PathBuf>,
    pub output: PathBuf,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionOptions {
    pub build: BuildOptions,
    /// Grid spacing in degrees; inferred from the raster when absent.
    pub resolution: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisOptions {
    /// Centre of the lag–distance analysis, degrees.
    pub center_lon: f64,
    pub center_lat: f64,
    /// Radius around the centre for the oldest-site anchor, km.
    pub center_radius_km: f64,
    /// Distance bin of the percentile front, km.
    pub bin_km: f64,
    /// Focus regions for timing histograms.
    pub focus: Vec<usize>,
    pub focus_radius_km: f64,
    /// Histogram bin width, years.
    pub hist_bin: f64,
    /// Broadening coefficient β.
    pub beta: f64,
    /// Reference speed of the broadening kernel, km·a⁻¹.
    pub v_ref: f64,
    /// Sites with larger dating uncertainty are dropped, years.
    pub max_sigma: f64,
    pub svg: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            center_lon: 35.5,
            center_lat: 33.9,
            center_radius_km: 200.0,
            bin_km: 500.0,
            focus: Vec::new(),
            focus_radius_km: 200.0,
            hist_bin: 100.0,
            beta: 0.5,
            v_ref: 1.0,
            max_sigma: 200.0,
            svg: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub paths: Paths,
    pub params: ParameterSet,
    pub scenario: Scenario,
    /// Years between climate recomputations.
    pub climate_interval: f64,
    pub regions: RegionOptions,
    pub analysis: AnalysisOptions,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            paths: Paths {
                output: PathBuf::from("out"),
                ..Paths::default()
            },
            params: ParameterSet::default(),
            scenario: Scenario::default(),
            climate_interval: 100.0,
            regions: RegionOptions::default(),
            analysis: AnalysisOptions::default(),
        }
    }
}

/// One `key = value` assignment with its origin for error messages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub origin: String,
}

/// Parse config text into entries; blank lines and `#` comments are skipped.
pub fn parse(text: &str, source: &str) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
        if line.is_empty() {
            continue;
        }
        let origin = format!("{source}:{}", n + 1);
        entries.push(parse_assignment(line, &origin)?);
    }
    Ok(entries)
}

/// Parse one `section.key=value` assignment.
pub fn parse_assignment(text: &str, origin: &str) -> Result<Entry> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("{origin}: expected `section.key = value`, got `{text}`")))?;
    let key = key.trim();
    if !key.contains('.') {
        return Err(Error::Config(format!("{origin}: key `{key}` lacks a section")));
    }
    Ok(Entry {
        key: key.to_string(),
        value: value.trim().to_string(),
        origin: origin.to_string(),
    })
}

fn value<T: FromStr>(e: &Entry) -> Result<T>
where
    T::Err: fmt::Display,
{
    e.value
        .parse()
        .map_err(|err| Error::Config(format!("{}: bad value `{}` for {}: {err}", e.origin, e.value, e.key)))
}

fn optional_path(e: &Entry) -> Option<PathBuf> {
    (!e.value.is_empty()).then(|| PathBuf::from(&e.value))
}

fn seed_mut(seeds: &mut Vec<Seed>) -> &mut Seed {
    if seeds.is_empty() {
        seeds.push(Seed {
            region: 0,
            technology: None,
            farming: None,
            economies: None,
        });
    }
    &mut seeds[0]
}

impl Config {
    /// Defaults, then the file (if any), then the overrides.
    pub fn load(path: Option<&Path>, overrides: &[Entry]) -> Result<Self> {
        let mut cfg = Config::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for e in parse(&text, &path.display().to_string())? {
                cfg.set(&e)?;
            }
        }
        for e in overrides {
            cfg.set(e)?;
        }
        Ok(cfg)
    }

    /// Apply one assignment; unknown keys are an error.
    pub fn set(&mut self, e: &Entry) -> Result<()> {
        let p = &mut self.params;
        let s = &mut self.scenario;
        let r = &mut self.regions;
        let a = &mut self.analysis;
        match e.key.as_str() {
            "paths.climate" => self.paths.climate = optional_path(e),
            "paths.anomalies" => self.paths.anomalies = optional_path(e),
            "paths.continents" => self.paths.continents = optional_path(e),
            "paths.sites" => self.paths.sites = optional_path(e),
            "paths.output" => self.paths.output = PathBuf::from(&e.value),

            "params.mu" => p.mu = value(e)?,
            "params.rho" => p.rho = value(e)?,
            "params.gamma" => p.gamma = value(e)?,
            "params.omega" => p.omega = value(e)?,
            "params.t_lit" => p.t_lit = value(e)?,
            "params.t_min" => p.t_min = value(e)?,
            "params.delta_t" => p.delta_t = value(e)?,
            "params.delta_q" => p.delta_q = value(e)?,
            "params.delta_f" => p.delta_f = value(e)?,
            "params.sigma_p" => p.sigma_p = value(e)?,
            "params.sigma_t" => p.sigma_t = value(e)?,
            "params.exchange_farming" => p.exchange_farming = value(e)?,
            "params.npp_f" => p.transfer.npp_f = value(e)?,
            "params.npp_n" => p.transfer.npp_n = value(e)?,
            "params.gdd_ref" => p.transfer.gdd_ref = value(e)?,
            "params.cae_max" => p.transfer.cae_max = value(e)?,
            "params.a_max" => {
                p.transfer.a_max = if e.value.is_empty() || e.value == "auto" {
                    None
                } else {
                    Some(value(e)?)
                }
            }
            "params.gdd_slope" => p.transfer.gdd_proxy.slope = value(e)?,
            "params.gdd_base" => p.transfer.gdd_proxy.base = value(e)?,

            "scenario.mode" => s.mode = value(e)?,
            "scenario.start_year" => s.start_year = value(e)?,
            "scenario.end_year" => s.end_year = value(e)?,
            "scenario.dt" => s.dt = value(e)?,
            "scenario.output_interval" => s.output_interval = value(e)?,
            "scenario.completion" => s.completion = value(e)?,
            "scenario.guard_steps" => s.guard.steps = value(e)?,
            "scenario.guard_fraction" => s.guard.fraction = value(e)?,
            "scenario.initial_density" => s.initial.density = value(e)?,
            "scenario.initial_technology" => s.initial.technology = value(e)?,
            "scenario.initial_farming" => s.initial.farming = value(e)?,
            "scenario.initial_diversity" => s.initial.diversity = value(e)?,
            "scenario.seed_region" => seed_mut(&mut s.seeds).region = value(e)?,
            "scenario.seed_technology" => seed_mut(&mut s.seeds).technology = Some(value(e)?),
            "scenario.seed_farming" => seed_mut(&mut s.seeds).farming = Some(value(e)?),
            "scenario.seed_economies" => seed_mut(&mut s.seeds).economies = Some(value(e)?),
            "scenario.climate_interval" => self.climate_interval = value(e)?,

            "regions.target_area" => r.build.target_area = value(e)?,
            "regions.max_iter" => r.build.max_iter = value(e)?,
            "regions.neighborhood" => {
                r.build.neighborhood = match e.value.as_str() {
                    "4" => Neighborhood::Four,
                    "8" => Neighborhood::Eight,
                    other => {
                        return Err(Error::Config(format!(
                            "{}: neighborhood must be 4 or 8, got `{other}`",
                            e.origin
                        )))
                    }
                }
            }
            "regions.resolution" => r.resolution = Some(value(e)?),
            "regions.npp_scale" => {
                let v = value(e)?;
                r.build.scales.get_or_insert(Scales { npp: 1.0, gdd: 1.0 }).npp = v;
            }
            "regions.gdd_scale" => {
                let v = value(e)?;
                r.build.scales.get_or_insert(Scales { npp: 1.0, gdd: 1.0 }).gdd = v;
            }

            "analysis.center_lon" => a.center_lon = value(e)?,
            "analysis.center_lat" => a.center_lat = value(e)?,
            "analysis.center_radius_km" => a.center_radius_km = value(e)?,
            "analysis.bin_km" => a.bin_km = value(e)?,
            "analysis.focus" => {
                a.focus = e
                    .value
                    .split(',')
                    .map(str::trim)
                    .filter(|v| !v.is_empty())
                    .map(|v| {
                        v.parse()
                            .map_err(|_| Error::Config(format!("{}: bad focus region `{v}`", e.origin)))
                    })
                    .collect::<Result<_>>()?
            }
            "analysis.focus_radius_km" => a.focus_radius_km = value(e)?,
            "analysis.hist_bin" => a.hist_bin = value(e)?,
            "analysis.beta" => a.beta = value(e)?,
            "analysis.v_ref" => a.v_ref = value(e)?,
            "analysis.max_sigma" => a.max_sigma = value(e)?,
            "analysis.svg" => a.svg = value(e)?,

            other => return Err(Error::Config(format!("{}: unknown key `{other}`", e.origin))),
        }
        Ok(())
    }

    /// Every configured input path must exist.
    pub fn check_paths(&self) -> Result<()> {
        let inputs = [
            &self.paths.climate,
            &self.paths.anomalies,
            &self.paths.continents,
            &self.paths.sites,
        ];
        for path in inputs.into_iter().flatten() {
            if !path.exists() {
                return Err(Error::Input(format!("{} does not exist", path.display())));
            }
        }
        Ok(())
    }
}
