//! Interregional exchange driven by differences in influence T·P.
//!
//! For neighbours i and j the relaxation rate
//!
//! ```text
//! f_ij = σ · L_ij / √(A_i·A_j) · (⟨T·P⟩_ij − T_i·P_i),   ⟨T·P⟩_ij = (T_i·P_i + T_j·P_j)/2
//! ```
//!
//! is positive when j out-influences i, and `f_ji = −f_ij`. Information
//! exchange (σ_T) moves trait values; migration (σ_P) moves people, who carry
//! their traits along. Population migration conserves Σ P·A exactly.

use serde::{Deserialize, Serialize};

use crate::dynamics::RegionState;

/// Undirected adjacency between regions `a < b` with shared boundary length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    /// Shared boundary length L_ab, km.
    pub length: f64,
}

/// Region areas and adjacency: everything the exchange needs from geometry.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RegionGraph {
    /// Region areas A_i, km².
    pub areas: Vec<f64>,
    pub edges: Vec<Edge>,
}

impl RegionGraph {
    pub fn new(areas: Vec<f64>, mut edges: Vec<Edge>) -> Self {
        for e in &mut edges {
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
        }
        edges.sort_by_key(|e| (e.a, e.b));
        RegionGraph { areas, edges }
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    /// Geometric coupling `L_ab / √(A_a·A_b)`, km⁻¹.
    pub fn coupling(&self, e: &Edge) -> f64 {
        e.length / (self.areas[e.a] * self.areas[e.b]).sqrt()
    }

    /// Total population mass Σ P·A, persons.
    pub fn population_mass(&self, states: &[RegionState]) -> f64 {
        states.iter().zip(&self.areas).map(|(s, a)| s.density * a).sum()
    }
}

/// `f_ij` for receiver `i` and partner `j`, with `coupling = L_ij/√(A_i·A_j)`.
pub fn influence_flux(receiver: &RegionState, partner: &RegionState, coupling: f64, sigma: f64) -> f64 {
    sigma * coupling * 0.5 * (partner.influence() - receiver.influence())
}

/// Per-edge fluxes `f_ab` into the lower-indexed endpoint `a`; the reverse
/// direction is the negation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FluxSet {
    pub demic: Vec<f64>,
    pub cultural: Vec<f64>,
}

impl FluxSet {
    pub fn compute(graph: &RegionGraph, states: &[RegionState], sigma_p: f64, sigma_t: f64) -> Self {
        let mut demic = Vec::with_capacity(graph.edges.len());
        let mut cultural = Vec::with_capacity(graph.edges.len());
        for e in &graph.edges {
            let coupling = graph.coupling(e);
            let (sa, sb) = (&states[e.a], &states[e.b]);
            demic.push(influence_flux(sa, sb, coupling, sigma_p));
            cultural.push(influence_flux(sa, sb, coupling, sigma_t));
        }
        FluxSet { demic, cultural }
    }
}

/// Per-region trait increments, per year.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TraitDelta {
    pub technology: f64,
    pub farming: f64,
    pub economies: f64,
}

impl TraitDelta {
    fn add_scaled(&mut self, from: &RegionState, to: &RegionState, w: f64) {
        self.technology += w * (from.technology - to.technology);
        self.farming += w * (from.farming - to.farming);
        self.economies += w * (from.economies - to.economies);
    }
}

/// Iterate `(receiver, donor, rate)` over every edge with a strictly positive
/// flux in either direction.
fn positive_pairs<'a>(graph: &'a RegionGraph, fluxes: &'a [f64]) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
    graph.edges.iter().zip(fluxes).filter_map(|(e, &f)| {
        if f > 0.0 {
            Some((e.a, e.b, f))
        } else if f < 0.0 {
            Some((e.b, e.a, -f))
        } else {
            None
        }
    })
}

/// `dX_i/dt = Σ_{j: f_ij>0} f_ij·(X_j − X_i)` for technology and economies,
/// and for the agropastoral share when `exchange_farming` is set.
pub fn cultural_diffusion(
    graph: &RegionGraph,
    states: &[RegionState],
    fluxes: &[f64],
    exchange_farming: bool,
) -> Vec<TraitDelta> {
    let mut out = vec![TraitDelta::default(); states.len()];
    for (i, j, f) in positive_pairs(graph, fluxes) {
        out[i].add_scaled(&states[j], &states[i], f);
    }
    if !exchange_farming {
        for d in &mut out {
            d.farming = 0.0;
        }
    }
    out
}

/// Rates produced by migration.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DemicIncrements {
    /// dP/dt, persons·km⁻²·a⁻¹.
    pub density: Vec<f64>,
    /// Mean-preserving trait blend toward the immigrants, per year.
    pub traits: Vec<TraitDelta>,
    /// Incoming migrant mass rate Σ M, persons·a⁻¹.
    pub inflow: Vec<f64>,
    /// Incoming farmer mass rate Σ Q_j·M, persons·a⁻¹.
    pub farmer_inflow: Vec<f64>,
    /// Migrant-mass-weighted donor traits Σ M·X_j, used when the receiver is
    /// empty.
    pub inflow_traits: Vec<RegionState>,
}

impl DemicIncrements {
    /// Mass-weighted mean traits of everyone arriving in region `i`.
    pub fn immigrant_traits(&self, i: usize) -> Option<RegionState> {
        let m = self.inflow[i];
        (m > 0.0).then(|| {
            let s = &self.inflow_traits[i];
            RegionState {
                density: 0.0,
                technology: s.technology / m,
                farming: s.farming / m,
                economies: s.economies / m,
            }
        })
    }
}

/// Migration along positive fluxes: `M = f_ij·P_j·A_j` leaves j and enters i.
/// Receivers with people blend their traits toward the donor at rate
/// `M/(P_i·A_i)`; empty receivers get no blend rate and instead take the
/// immigrants' traits (see [`DemicIncrements::immigrant_traits`]).
pub fn demic_diffusion(graph: &RegionGraph, states: &[RegionState], fluxes: &[f64]) -> DemicIncrements {
    let n = states.len();
    let zero = RegionState {
        density: 0.0,
        technology: 0.0,
        farming: 0.0,
        economies: 0.0,
    };
    let mut out = DemicIncrements {
        density: vec![0.0; n],
        traits: vec![TraitDelta::default(); n],
        inflow: vec![0.0; n],
        farmer_inflow: vec![0.0; n],
        inflow_traits: vec![zero; n],
    };
    for (i, j, f) in positive_pairs(graph, fluxes) {
        let (si, sj) = (&states[i], &states[j]);
        let mass = f * sj.density * graph.areas[j];
        if mass == 0.0 {
            continue;
        }
        out.density[i] += mass / graph.areas[i];
        out.density[j] -= mass / graph.areas[j];
        out.inflow[i] += mass;
        out.farmer_inflow[i] += sj.farming * mass;
        let acc = &mut out.inflow_traits[i];
        acc.technology += mass * sj.technology;
        acc.farming += mass * sj.farming;
        acc.economies += mass * sj.economies;
        let resident = si.density * graph.areas[i];
        if resident > 0.0 {
            out.traits[i].add_scaled(sj, si, mass / resident);
        }
    }
    out
}

/// Cumulative contributions by source channel.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChannelTotals {
    pub local: f64,
    pub demic: f64,
    pub cultural: f64,
}

impl ChannelTotals {
    pub fn total(&self) -> f64 {
        self.local + self.demic + self.cultural
    }

    /// `(demic, cultural, local)` shares; all zero when nothing accrued.
    pub fn shares(&self) -> (f64, f64, f64) {
        let total = self.total();
        if total > 0.0 {
            (self.demic / total, self.cultural / total, self.local / total)
        } else {
            (0.0, 0.0, 0.0)
        }
    }
}

/// Per-region attribution of agropastoral population mass and technology
/// gains to local adoption and growth, migration, and information exchange.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceLedger {
    pub farming: Vec<ChannelTotals>,
    pub technology: Vec<ChannelTotals>,
}

/// Bookkeeping inputs for one region over one completed step.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StepAccount {
    /// Agropastoral mass Q·P·A before the step, persons.
    pub farming_before: f64,
    /// Agropastoral mass after the step, persons.
    pub farming_after: f64,
    /// Immigrant farmer mass Σ Q_j·f_ij·P_j·A_j·Δt, persons.
    pub demic_farmers: f64,
    /// Mass from culturally imported agropastoral share ΔQ_cultural·P·A.
    pub cultural_farmers: f64,
    /// Technology increments over the step, per channel.
    pub technology_local: f64,
    pub technology_demic: f64,
    pub technology_cultural: f64,
}

impl SourceLedger {
    pub fn new(regions: usize) -> Self {
        SourceLedger {
            farming: vec![ChannelTotals::default(); regions],
            technology: vec![ChannelTotals::default(); regions],
        }
    }

    /// Fraction of the accrued agropastoral mass brought by immigrants.
    pub fn immigrant_fraction(&self, region: usize) -> f64 {
        self.farming[region].shares().0
    }

    /// Decompose each region's gain in agropastoral mass: migrants and
    /// cultural import are credited first, the residual is local adoption and
    /// growth. A negative residual is clipped to zero and the imported
    /// channels are scaled down proportionally to the actual gain; a net loss
    /// accrues nothing. Technology gains accrue the positive part of each
    /// channel's increment.
    pub fn attribute_sources(&mut self, accounts: &[StepAccount]) {
        for (i, acc) in accounts.iter().enumerate() {
            let gain = acc.farming_after - acc.farming_before;
            if gain > 0.0 {
                let demic = acc.demic_farmers.max(0.0);
                let cultural = acc.cultural_farmers.max(0.0);
                let imported = demic + cultural;
                let slot = &mut self.farming[i];
                if imported <= gain {
                    slot.demic += demic;
                    slot.cultural += cultural;
                    slot.local += gain - imported;
                } else {
                    let scale = gain / imported;
                    slot.demic += demic * scale;
                    slot.cultural += cultural * scale;
                }
            }
            let tech = &mut self.technology[i];
            tech.local += acc.technology_local.max(0.0);
            tech.demic += acc.technology_demic.max(0.0);
            tech.cultural += acc.technology_cultural.max(0.0);
        }
    }
}
