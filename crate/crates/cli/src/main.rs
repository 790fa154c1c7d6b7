use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use neolithic::config::{self, Config, Entry};
use neolithic::engine::{self, RunOutput, TransitionRecord};
use neolithic::io;
use neolithic::pipeline::{self, AnalysisOutput, Landscape};
use neolithic::{Error, Result};

/// Largest tolerated share of unparseable site rows.
const MAX_MALFORMED: f64 = 0.1;

#[derive(Parser, Debug)]
#[command(
    name = "neolithic",
    version,
    about = "Regional simulation of the spread of agropastoralism"
)]
struct Cli {
    /// Flat `section.key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Group raster cells into regions and write regions.csv and edges.csv.
    BuildRegions(Overrides),
    /// Simulate on previously built regions.
    Run(RunArgs),
    /// Lag–distance statistics, histograms and maps of a finished run.
    Analyze(Overrides),
    /// build-regions, run and analyze in sequence.
    Pipeline(RunArgs),
}

#[derive(Args, Debug)]
struct Overrides {
    /// `section.key=value` assignments applied after the config file.
    #[arg(value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Exchange channels: mixed, demic-only, cultural-only or no-exchange.
    #[arg(long)]
    mode: Option<String>,
    #[command(flatten)]
    overrides: Overrides,
}

fn load(cli: &Cli, overrides: &Overrides, mode: Option<&str>) -> Result<Config> {
    let mut entries: Vec<Entry> = overrides
        .set
        .iter()
        .map(|s| config::parse_assignment(s, "command line"))
        .collect::<Result<_>>()?;
    if let Some(mode) = mode {
        entries.push(Entry {
            key: "scenario.mode".into(),
            value: mode.into(),
            origin: "--mode".into(),
        });
    }
    let cfg = Config::load(cli.config.as_deref(), &entries)?;
    cfg.check_paths()?;
    Ok(cfg)
}

fn output_dir(cfg: &Config) -> Result<&Path> {
    let dir = cfg.paths.output.as_path();
    fs::create_dir_all(dir).map_err(|e| Error::Input(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn climate_path(cfg: &Config) -> Result<&Path> {
    cfg.paths
        .climate
        .as_deref()
        .ok_or_else(|| Error::Config("paths.climate is not set".into()))
}

fn build_regions(cfg: &Config) -> Result<(Landscape, String)> {
    let baseline = io::read_raster(climate_path(cfg)?)?;
    let slices = match &cfg.paths.anomalies {
        Some(p) => io::read_anomalies(p, &baseline)?,
        None => Vec::new(),
    };
    let continents = match &cfg.paths.continents {
        Some(p) => Some(io::read_continents(p, &baseline)?),
        None => None,
    };
    let landscape = Landscape::build(
        baseline,
        slices,
        continents.as_deref(),
        &cfg.regions,
        &cfg.params.transfer,
    )?;
    let dir = output_dir(cfg)?;
    io::write_regions(&dir.join("regions.csv"), &landscape.regions)?;
    io::write_edges(&dir.join("edges.csv"), &landscape.edges)?;
    let n = landscape.regions.len();
    let mean = landscape.regions.iter().map(|r| r.area).sum::<f64>() / n.max(1) as f64;
    Ok((landscape, format!("regions {n} mean_area_km2 {mean:.1}")))
}

fn load_landscape(cfg: &Config) -> Result<Landscape> {
    let baseline = io::read_raster(climate_path(cfg)?)?;
    let slices = match &cfg.paths.anomalies {
        Some(p) => io::read_anomalies(p, &baseline)?,
        None => Vec::new(),
    };
    let dir = cfg.paths.output.as_path();
    let regions = io::read_regions(&dir.join("regions.csv"))?;
    let edges = io::read_edges(&dir.join("edges.csv"))?;
    Landscape::from_regions(
        baseline,
        slices,
        regions,
        edges,
        cfg.regions.resolution,
        &cfg.params.transfer,
    )
}

fn simulate(cfg: &Config, landscape: &Landscape) -> Result<(RunOutput, String)> {
    let graph = landscape.graph();
    let driver = landscape.driver(&cfg.params.transfer, cfg.climate_interval);
    info!(
        "{} mode from {} to {} sim BC over {} regions",
        cfg.scenario.mode,
        cfg.scenario.start_year,
        cfg.scenario.end_year,
        graph.areas.len()
    );
    let out = engine::run(&cfg.scenario, &graph, &driver, &cfg.params)?;
    let dir = output_dir(cfg)?;
    io::write_potentials(&dir.join("potentials.csv"), &out.initial_potentials)?;
    io::write_trajectory(&dir.join("trajectory.csv"), &out.snapshots)?;
    io::write_transitions(&dir.join("transitions.csv"), &out.transitions)?;
    io::write_ledger(&dir.join("ledger.csv"), &out.snapshots)?;
    let onset = out.mean_onset().map_or("none".to_string(), |y| format!("{y:.0}"));
    let summary = format!(
        "neolithic {} of {} mean_onset_bc {onset}",
        out.neolithic_count(),
        out.final_states.len()
    );
    Ok((out, summary))
}

fn read_sites(cfg: &Config) -> Result<Vec<neolithic::analysis::SiteRecord>> {
    let Some(path) = &cfg.paths.sites else {
        return Ok(Vec::new());
    };
    let table = io::read_sites(path)?;
    let frac = table.malformed_fraction();
    if frac > MAX_MALFORMED {
        return Err(Error::DataQuality(format!(
            "{} of {} site rows in {} are malformed",
            table.malformed,
            table.rows,
            path.display()
        )));
    }
    if table.malformed > 0 {
        warn!("skipped {} malformed site rows of {}", table.malformed, table.rows);
    }
    Ok(table.sites)
}

fn write_svg(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Input(format!("cannot write {}: {e}", path.display())))
}

fn fit_summary(label: &str, fit: &Option<neolithic::analysis::LagDistanceResult>) -> String {
    match fit {
        Some(f) => format!("{label}_slope_km_per_a {:.4} {label}_r2 {:.4}", f.slope, f.r2),
        None => format!("{label}_slope_km_per_a none"),
    }
}

fn analyze(cfg: &Config, landscape: &Landscape, transitions: &[TransitionRecord]) -> Result<String> {
    let sites = read_sites(cfg)?;
    let out: AnalysisOutput = pipeline::analyze(landscape, transitions, &sites, &cfg.analysis)?;
    let dir = output_dir(cfg)?;
    let mut fits = Vec::new();
    if let Some(f) = &out.simulated {
        fits.push(("simulated", f));
    }
    if let Some(f) = &out.observed {
        fits.push(("observed", f));
    }
    io::write_lagdist(&dir.join("lagdist.csv"), &dir.join("lagdist_front.csv"), &fits)?;
    io::write_histograms(&dir.join("histograms.csv"), &out.histograms)?;
    io::write_immigrants(&dir.join("immigrants.csv"), &out.immigrants)?;
    if cfg.analysis.svg {
        let n = landscape.regions.len();
        let mut onsets = vec![None; n];
        let mut immigrants = vec![None; n];
        for t in transitions.iter().filter(|t| t.region < n) {
            onsets[t.region] = t.onset;
            immigrants[t.region] = t.immigrant_fraction;
        }
        write_svg(
            &dir.join("onset_map.svg"),
            &landscape.region_map("Onset (sim BC)", &onsets),
        )?;
        write_svg(
            &dir.join("immigrant_map.svg"),
            &landscape.region_map("Immigrant fraction", &immigrants),
        )?;
    }
    let mut line = fit_summary("simulated", &out.simulated);
    if !sites.is_empty() {
        line.push(' ');
        line.push_str(&fit_summary("observed", &out.observed));
    }
    Ok(line)
}

fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::BuildRegions(o) => {
            let cfg = load(cli, o, None)?;
            Ok(build_regions(&cfg)?.1)
        }
        Command::Run(a) => {
            let cfg = load(cli, &a.overrides, a.mode.as_deref())?;
            let landscape = load_landscape(&cfg)?;
            Ok(simulate(&cfg, &landscape)?.1)
        }
        Command::Analyze(o) => {
            let cfg = load(cli, o, None)?;
            let landscape = load_landscape(&cfg)?;
            let transitions = io::read_transitions(&cfg.paths.output.join("transitions.csv"))?;
            analyze(&cfg, &landscape, &transitions)
        }
        Command::Pipeline(a) => {
            let cfg = load(cli, &a.overrides, a.mode.as_deref())?;
            let (landscape, regions) = build_regions(&cfg)?;
            let (out, run) = simulate(&cfg, &landscape)?;
            let stats = analyze(&cfg, &landscape, &out.transitions)?;
            Ok(format!("{regions} {run} {stats}"))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::DataQuality(_) => 4,
        e if e.is_numerical() => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            warn!("thread pool: {e}");
        }
    }
    match execute(&cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
