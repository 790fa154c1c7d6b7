//! Time integration of the coupled regional system.
//!
//! Each step evaluates the local adaptive dynamics of every region against a
//! frozen snapshot, adds the cultural and demic exchange rates, advances all
//! variables with one forward-Euler step and clips them back into their
//! admissible ranges. Time runs forward from `start_year` sim BC towards
//! `end_year` sim BC.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::climate::Potential;
use crate::dynamics::{self, ParameterSet, RegionState, TraitRates, NEOLITHIC_THRESHOLD};
use crate::exchange::{self, DemicIncrements, FluxSet, RegionGraph, SourceLedger, StepAccount, TraitDelta};
use crate::{Error, Result};

/// Supplies per-region potentials over time.
pub trait PotentialSource {
    fn potentials_at(&self, year: f64) -> Result<Vec<Potential>>;

    /// Years between recomputations; `None` for time-invariant potentials.
    fn refresh_interval(&self) -> Option<f64> {
        None
    }
}

/// Potentials that never change.
#[derive(Clone, Debug, PartialEq)]
pub struct StaticPotentials(pub Vec<Potential>);

impl PotentialSource for StaticPotentials {
    fn potentials_at(&self, _year: f64) -> Result<Vec<Potential>> {
        Ok(self.0.clone())
    }
}

/// Which exchange channels are active.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    #[default]
    Mixed,
    DemicOnly,
    CulturalOnly,
    NoExchange,
}

impl Mode {
    /// Parameters with the inactive channel coefficients zeroed.
    pub fn apply(self, params: &ParameterSet) -> ParameterSet {
        let mut p = *params;
        match self {
            Mode::Mixed => {}
            Mode::DemicOnly => p.sigma_t = 0.0,
            Mode::CulturalOnly => p.sigma_p = 0.0,
            Mode::NoExchange => {
                p.sigma_p = 0.0;
                p.sigma_t = 0.0;
            }
        }
        p
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Mixed => "mixed",
            Mode::DemicOnly => "demic-only",
            Mode::CulturalOnly => "cultural-only",
            Mode::NoExchange => "no-exchange",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mixed" => Ok(Mode::Mixed),
            "demic-only" | "demic" => Ok(Mode::DemicOnly),
            "cultural-only" | "cultural" => Ok(Mode::CulturalOnly),
            "no-exchange" | "none" => Ok(Mode::NoExchange),
            other => Err(Error::Config(format!("unknown scenario mode '{other}'"))),
        }
    }
}

/// Definition of when a local transition counts as complete.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Completion {
    /// Q exceeds 90% of its value at the end of the run (and the Neolithic
    /// threshold).
    #[default]
    RelativeToFinal,
    /// Q exceeds 0.9.
    Absolute,
}

impl FromStr for Completion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relative" => Ok(Completion::RelativeToFinal),
            "absolute" => Ok(Completion::Absolute),
            other => Err(Error::Config(format!("unknown completion rule '{other}'"))),
        }
    }
}

impl fmt::Display for Completion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Completion::RelativeToFinal => "relative",
            Completion::Absolute => "absolute",
        })
    }
}

/// Initial state of every region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialConditions {
    pub density: f64,
    pub technology: f64,
    pub farming: f64,
    /// Realized economies N; f = min(1, N/PAE).
    pub diversity: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        InitialConditions {
            density: 0.01,
            technology: 1.0,
            farming: 0.04,
            diversity: 0.25,
        }
    }
}

/// Override of the initial traits of one region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub region: usize,
    pub technology: Option<f64>,
    pub farming: Option<f64>,
    pub economies: Option<f64>,
}

/// Rejects time steps whose per-step change during the first `steps` steps
/// exceeds `fraction` of a variable's range: 1 for Q and f, the current
/// magnitude (at least 1) for T and the current density (at least the initial
/// density) for P.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityGuard {
    pub steps: usize,
    pub fraction: f64,
}

impl Default for StabilityGuard {
    fn default() -> Self {
        StabilityGuard {
            steps: 10,
            fraction: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub mode: Mode,
    /// Sim BC.
    pub start_year: f64,
    /// Sim BC, smaller than `start_year`.
    pub end_year: f64,
    /// Time step, years.
    pub dt: f64,
    /// Years between trajectory snapshots.
    pub output_interval: f64,
    pub completion: Completion,
    pub guard: StabilityGuard,
    pub initial: InitialConditions,
    pub seeds: Vec<Seed>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            mode: Mode::Mixed,
            start_year: 9500.0,
            end_year: 3500.0,
            dt: 5.0,
            output_interval: 100.0,
            completion: Completion::RelativeToFinal,
            guard: StabilityGuard::default(),
            initial: InitialConditions::default(),
            seeds: Vec::new(),
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.start_year > self.end_year) {
            return Err(Error::Config(format!(
                "start year {} sim BC must precede end year {} sim BC",
                self.start_year, self.end_year
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("time step must be positive, got {}", self.dt)));
        }
        if !(self.output_interval > 0.0) {
            return Err(Error::Config("output interval must be positive".into()));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.start_year - self.end_year
    }
}

/// Initial states: uniform traits, f = min(1, N₀/PAE) and f = 0 where PAE = 0.
pub fn initialize(potentials: &[Potential], init: &InitialConditions) -> Vec<RegionState> {
    potentials
        .iter()
        .map(|pot| RegionState {
            density: init.density,
            technology: init.technology,
            farming: init.farming,
            economies: if pot.pae > 0.0 {
                (init.diversity / pot.pae).min(1.0)
            } else {
                0.0
            },
        })
        .collect()
}

/// All rates of one step, split by origin.
#[derive(Clone, Debug, Default)]
pub struct StepRates {
    /// Relative growth rate r per region.
    pub growth: Vec<f64>,
    /// Adaptive-dynamics trait rates per region.
    pub local: Vec<TraitRates>,
    pub cultural: Vec<TraitDelta>,
    pub demic: DemicIncrements,
}

impl StepRates {
    /// Total time derivative of region `i`.
    pub fn total(&self, i: usize, state: &RegionState) -> RegionState {
        let (l, c, d) = (&self.local[i], &self.cultural[i], &self.demic.traits[i]);
        RegionState {
            density: dynamics::population_rate(state, self.growth[i]) + self.demic.density[i],
            technology: l.technology + c.technology + d.technology,
            farming: l.farming + c.farming + d.farming,
            economies: l.economies + c.economies + d.economies,
        }
    }
}

/// Evaluate local and exchange rates against a frozen state snapshot.
pub fn compute_rates(
    graph: &RegionGraph,
    states: &[RegionState],
    potentials: &[Potential],
    params: &ParameterSet,
) -> StepRates {
    let (growth, local): (Vec<f64>, Vec<TraitRates>) = states
        .par_iter()
        .zip(potentials.par_iter())
        .map(|(s, env)| {
            let r = dynamics::relative_growth(s, env, params);
            let g = dynamics::fitness_gradients(s, env, params);
            (r, dynamics::trait_rates(&g, params))
        })
        .unzip();
    let fluxes = FluxSet::compute(graph, states, params.sigma_p, params.sigma_t);
    let cultural = exchange::cultural_diffusion(graph, states, &fluxes.cultural, params.exchange_farming);
    let demic = exchange::demic_diffusion(graph, states, &fluxes.demic);
    StepRates {
        growth,
        local,
        cultural,
        demic,
    }
}

/// Mutable simulation state on a fixed region graph.
#[derive(Clone, Debug)]
pub struct Simulator<'g> {
    graph: &'g RegionGraph,
    params: ParameterSet,
    states: Vec<RegionState>,
    potentials: Vec<Potential>,
    ledger: SourceLedger,
    density_floor: f64,
}

impl<'g> Simulator<'g> {
    pub fn new(
        graph: &'g RegionGraph,
        params: ParameterSet,
        states: Vec<RegionState>,
        potentials: Vec<Potential>,
    ) -> Result<Self> {
        if states.len() != graph.len() || potentials.len() != graph.len() {
            return Err(Error::Input(format!(
                "{} states and {} potentials for {} regions",
                states.len(),
                potentials.len(),
                graph.len()
            )));
        }
        let density_floor = states.iter().map(|s| s.density).fold(0.0, f64::max).max(1e-9);
        Ok(Simulator {
            graph,
            ledger: SourceLedger::new(states.len()),
            params,
            states,
            potentials,
            density_floor,
        })
    }

    pub fn states(&self) -> &[RegionState] {
        &self.states
    }

    pub fn potentials(&self) -> &[Potential] {
        &self.potentials
    }

    pub fn ledger(&self) -> &SourceLedger {
        &self.ledger
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn set_potentials(&mut self, potentials: Vec<Potential>) -> Result<()> {
        if potentials.len() != self.states.len() {
            return Err(Error::Input("potential count does not match region count".into()));
        }
        self.potentials = potentials;
        Ok(())
    }

    /// Reference size of each variable for the stability guard.
    fn ranges(&self, s: &RegionState) -> [(&'static str, f64); 4] {
        [
            ("density", s.density.max(self.density_floor)),
            ("technology", s.technology.abs().max(1.0)),
            ("farming", 1.0),
            ("economies", 1.0),
        ]
    }

    /// Advance by `dt` years. `year` only labels diagnostics. With a guard
    /// fraction, the step is refused when any variable would change by more
    /// than that fraction of its range after clipping.
    pub fn step(&mut self, dt: f64, year: f64, guard: Option<f64>) -> Result<()> {
        if dt == 0.0 {
            return Ok(());
        }
        let rates = compute_rates(self.graph, &self.states, &self.potentials, &self.params);
        let mut totals = Vec::with_capacity(self.states.len());
        for (i, s) in self.states.iter().enumerate() {
            let d = rates.total(i, s);
            if !d.is_finite() || !rates.growth[i].is_finite() {
                return Err(Error::NonFinite {
                    region: i,
                    year,
                    dump: format!("state {s:?}, rates {d:?}, potential {:?}", self.potentials[i]),
                });
            }
            if let Some(fraction) = guard {
                // change actually applied, after clipping
                let proposed = RegionState {
                    density: s.density + dt * d.density,
                    technology: s.technology + dt * d.technology,
                    farming: s.farming + dt * d.farming,
                    economies: s.economies + dt * d.economies,
                }
                .clipped(self.params.t_min);
                let changes = [
                    proposed.density - s.density,
                    proposed.technology - s.technology,
                    proposed.farming - s.farming,
                    proposed.economies - s.economies,
                ];
                for ((variable, range), delta) in self.ranges(s).into_iter().zip(changes) {
                    let change = delta.abs();
                    let limit = fraction * range;
                    if change > limit {
                        return Err(Error::Unstable {
                            region: i,
                            variable,
                            dt,
                            change,
                            limit,
                        });
                    }
                }
            }
            totals.push(d);
        }

        let t_min = self.params.t_min;
        let mut accounts = Vec::with_capacity(self.states.len());
        for (i, (s, d)) in self.states.iter_mut().zip(&totals).enumerate() {
            let area = self.graph.areas[i];
            let before = *s;
            let mut next = RegionState {
                density: s.density + dt * d.density,
                technology: s.technology + dt * d.technology,
                farming: s.farming + dt * d.farming,
                economies: s.economies + dt * d.economies,
            };
            if before.density * area <= 0.0 {
                if let Some(imm) = rates.demic.immigrant_traits(i) {
                    next.technology = imm.technology;
                    next.farming = imm.farming;
                    next.economies = imm.economies;
                }
            }
            let next = next.clipped(t_min);
            let cultural = &rates.cultural[i];
            let demic = &rates.demic.traits[i];
            accounts.push(StepAccount {
                farming_before: before.farming * before.density * area,
                farming_after: next.farming * next.density * area,
                demic_farmers: rates.demic.farmer_inflow[i] * dt,
                cultural_farmers: cultural.farming * dt * before.density * area,
                technology_local: rates.local[i].technology * dt,
                technology_demic: demic.technology * dt,
                technology_cultural: cultural.technology * dt,
            });
            *s = next;
        }
        self.ledger.attribute_sources(&accounts);
        Ok(())
    }
}

/// Timing of the local transition in one region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub region: usize,
    /// Sim BC year where Q first exceeds 0.5.
    pub onset: Option<f64>,
    /// Sim BC year where the transition is 90% complete.
    pub completion: Option<f64>,
    /// Immigrant share of the accrued agropastoral mass at completion.
    pub immigrant_fraction: Option<f64>,
}

/// State of all regions at one output time.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    /// Sim BC.
    pub year: f64,
    pub states: Vec<RegionState>,
    pub pae: Vec<f64>,
    pub ledger: SourceLedger,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub scenario: Scenario,
    /// Potentials at the start of the run.
    pub initial_potentials: Vec<Potential>,
    pub snapshots: Vec<Snapshot>,
    pub transitions: Vec<TransitionRecord>,
    pub ledger: SourceLedger,
    pub final_states: Vec<RegionState>,
}

impl RunOutput {
    pub fn neolithic_count(&self) -> usize {
        self.final_states.iter().filter(|s| s.is_neolithic()).count()
    }

    /// Mean onset year over regions with an onset.
    pub fn mean_onset(&self) -> Option<f64> {
        let onsets: Vec<f64> = self.transitions.iter().filter_map(|t| t.onset).collect();
        (!onsets.is_empty()).then(|| onsets.iter().sum::<f64>() / onsets.len() as f64)
    }
}

/// Per-step history needed to locate completion crossings after the run.
struct History {
    years: Vec<f64>,
    farming: Vec<Vec<f64>>,
    demic: Vec<Vec<f64>>,
    total: Vec<Vec<f64>>,
}

impl History {
    fn record(&mut self, year: f64, sim: &Simulator<'_>) {
        self.years.push(year);
        self.farming.push(sim.states().iter().map(|s| s.farming).collect());
        let ledger = sim.ledger();
        self.demic.push(ledger.farming.iter().map(|c| c.demic).collect());
        self.total.push(ledger.farming.iter().map(|c| c.total()).collect());
    }

    /// First upward crossing of `threshold` by region `i` at or after step
    /// `from`, as `(year, interpolation index k, weight)`.
    fn crossing(&self, i: usize, threshold: f64, from: usize) -> Option<(f64, usize, f64)> {
        let from = from.max(1);
        (from..self.years.len()).find_map(|k| {
            let (q0, q1) = (self.farming[k - 1][i], self.farming[k][i]);
            (q0 <= threshold && q1 > threshold).then(|| {
                let w = (threshold - q0) / (q1 - q0);
                (self.years[k - 1] + w * (self.years[k] - self.years[k - 1]), k, w)
            })
        })
    }

    fn interpolated_fraction(&self, i: usize, k: usize, w: f64) -> f64 {
        let lerp = |v: &Vec<Vec<f64>>| v[k - 1][i] + w * (v[k][i] - v[k - 1][i]);
        let total = lerp(&self.total);
        if total > 0.0 {
            lerp(&self.demic) / total
        } else {
            0.0
        }
    }
}

/// Integrate a scenario from its start to its end year.
pub fn run(
    scenario: &Scenario,
    graph: &RegionGraph,
    source: &dyn PotentialSource,
    params: &ParameterSet,
) -> Result<RunOutput> {
    scenario.validate()?;
    let params = scenario.mode.apply(params);
    let potentials = source.potentials_at(scenario.start_year)?;
    let mut states = initialize(&potentials, &scenario.initial);
    for seed in &scenario.seeds {
        let s = states
            .get_mut(seed.region)
            .ok_or_else(|| Error::Config(format!("seed region {} does not exist", seed.region)))?;
        if let Some(t) = seed.technology {
            s.technology = t;
        }
        if let Some(q) = seed.farming {
            s.farming = q;
        }
        if let Some(f) = seed.economies {
            s.economies = f;
        }
        *s = s.clipped(params.t_min);
    }
    let mut sim = Simulator::new(graph, params, states, potentials.clone())?;

    let duration = scenario.duration();
    let n_steps = (duration / scenario.dt - 1e-9).ceil().max(1.0) as usize;
    let output_every = ((scenario.output_interval / scenario.dt).round() as usize).max(1);
    let refresh = source.refresh_interval();
    let n = graph.len();

    let mut history = History {
        years: Vec::with_capacity(n_steps + 1),
        farming: Vec::with_capacity(n_steps + 1),
        demic: Vec::with_capacity(n_steps + 1),
        total: Vec::with_capacity(n_steps + 1),
    };
    let mut snapshots = Vec::new();
    let snapshot = |sim: &Simulator<'_>, year: f64| Snapshot {
        year,
        states: sim.states().to_vec(),
        pae: sim.potentials().iter().map(|p| p.pae).collect(),
        ledger: sim.ledger().clone(),
    };

    let mut onsets: Vec<Option<(f64, usize)>> = vec![None; n];
    history.record(scenario.start_year, &sim);
    snapshots.push(snapshot(&sim, scenario.start_year));
    let mut elapsed = 0.0;
    let mut climate_epoch = 0u64;

    for k in 1..=n_steps {
        let dt = scenario.dt.min(duration - elapsed);
        let guard = (k <= scenario.guard.steps).then_some(scenario.guard.fraction);
        let before: Vec<f64> = sim.states().iter().map(|s| s.farming).collect();
        sim.step(dt, scenario.start_year - elapsed, guard)?;
        elapsed = if k == n_steps { duration } else { elapsed + dt };
        let year = scenario.start_year - elapsed;

        for (i, s) in sim.states().iter().enumerate() {
            if onsets[i].is_none() && before[i] <= NEOLITHIC_THRESHOLD && s.farming > NEOLITHIC_THRESHOLD {
                let w = (NEOLITHIC_THRESHOLD - before[i]) / (s.farming - before[i]);
                onsets[i] = Some((year + dt - w * dt, k));
            }
        }
        history.record(year, &sim);
        if k % output_every == 0 || k == n_steps {
            snapshots.push(snapshot(&sim, year));
        }
        if let Some(interval) = refresh {
            let epoch = (elapsed / interval).floor() as u64;
            if epoch != climate_epoch && k < n_steps {
                climate_epoch = epoch;
                sim.set_potentials(source.potentials_at(year)?)?;
            }
        }
    }

    let final_states = sim.states().to_vec();
    let transitions = (0..n)
        .map(|i| {
            let onset = onsets[i];
            let threshold = match scenario.completion {
                Completion::RelativeToFinal => (0.9 * final_states[i].farming).max(NEOLITHIC_THRESHOLD),
                Completion::Absolute => 0.9,
            };
            let done = onset.and_then(|(_, k_onset)| {
                if history.farming[k_onset][i] > threshold {
                    // crossed within the onset step
                    let k = k_onset;
                    let (q0, q1) = (history.farming[k - 1][i], history.farming[k][i]);
                    let w = (threshold - q0) / (q1 - q0);
                    let year = history.years[k - 1] + w * (history.years[k] - history.years[k - 1]);
                    Some((year, k, w))
                } else {
                    history.crossing(i, threshold, k_onset + 1)
                }
            });
            TransitionRecord {
                region: i,
                onset: onset.map(|(y, _)| y),
                completion: done.map(|(y, _, _)| y),
                immigrant_fraction: done.map(|(_, k, w)| history.interpolated_fraction(i, k, w)),
            }
        })
        .collect();

    Ok(RunOutput {
        scenario: scenario.clone(),
        initial_potentials: potentials,
        snapshots,
        transitions,
        ledger: sim.ledger().clone(),
        final_states,
    })
}
