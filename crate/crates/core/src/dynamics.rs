//! Local sociocultural dynamics of one region.
//!
//! The relative growth rate
//!
//! ```text
//! r  = μ·(FEP − γ·√T·P)·(1 − ω·T)·SI − ρ·P·exp(−T/T_lit)
//! SI = (1 − Q)·√T + Q·N·T·TLI,      N = f·PAE
//! ```
//!
//! is the fitness function; each trait X ∈ {T, Q, f} moves along
//! `dX/dt = δ_X·∂r/∂X` and the density along `dP/dt = r·P`.

use serde::{Deserialize, Serialize};

use crate::climate::{Potential, TransferParams};

/// Agropastoral share above which a region counts as Neolithic.
pub const NEOLITHIC_THRESHOLD: f64 = 0.5;

/// Dynamic state of one region.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionState {
    /// Population density P, persons·km⁻².
    pub density: f64,
    /// Technology T, dimensionless, at least `t_min`.
    pub technology: f64,
    /// Share Q of activity allocated to agropastoralism, in [0, 1].
    pub farming: f64,
    /// Realized fraction f of the potential economies, in [0, 1].
    pub economies: f64,
}

impl RegionState {
    /// Realized economic diversity N = f·PAE.
    pub fn diversity(&self, pae: f64) -> f64 {
        self.economies * pae
    }

    /// Influence T·P.
    pub fn influence(&self) -> f64 {
        self.technology * self.density
    }

    pub fn is_neolithic(&self) -> bool {
        self.farming > NEOLITHIC_THRESHOLD
    }

    pub fn is_finite(&self) -> bool {
        self.density.is_finite()
            && self.technology.is_finite()
            && self.farming.is_finite()
            && self.economies.is_finite()
    }

    /// Project onto the admissible box.
    pub fn clipped(mut self, t_min: f64) -> Self {
        self.density = self.density.max(0.0);
        self.technology = self.technology.max(t_min);
        self.farming = self.farming.clamp(0.0, 1.0);
        self.economies = self.economies.clamp(0.0, 1.0);
        self
    }
}

/// Global model parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterSet {
    /// Growth coefficient μ, a⁻¹.
    pub mu: f64,
    /// Loss coefficient ρ, a⁻¹·(persons·km⁻²)⁻¹.
    pub rho: f64,
    /// Environmental impact γ, (persons·km⁻²)⁻¹.
    pub gamma: f64,
    /// Organisational overhead ω.
    pub omega: f64,
    /// Technology scale of loss mitigation.
    pub t_lit: f64,
    /// Technology floor.
    pub t_min: f64,
    pub delta_t: f64,
    pub delta_q: f64,
    pub delta_f: f64,
    /// Exchange coefficient with people.
    pub sigma_p: f64,
    /// Exchange coefficient without people.
    pub sigma_t: f64,
    /// Whether the agropastoral share travels by information exchange.
    pub exchange_farming: bool,
    pub transfer: TransferParams,
}

impl Default for ParameterSet {
    fn default() -> Self {
        ParameterSet {
            mu: 0.015,
            rho: 0.002,
            gamma: 0.01,
            omega: 0.04,
            t_lit: 12.0,
            t_min: 0.05,
            delta_t: 1.0,
            delta_q: 1.0,
            delta_f: 5.0,
            sigma_p: 0.0075,
            sigma_t: 0.2,
            exchange_farming: false,
            transfer: TransferParams::default(),
        }
    }
}

/// Partial derivatives of the growth rate.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Gradients {
    pub technology: f64,
    pub farming: f64,
    pub economies: f64,
}

/// Adaptive-dynamics trait rates, per year.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TraitRates {
    pub technology: f64,
    pub farming: f64,
    pub economies: f64,
}

/// `SI = (1 − Q)·√T + Q·(f·PAE)·T·TLI`.
pub fn subsistence_intensity(state: &RegionState, pae: f64, tli: f64) -> f64 {
    let t = state.technology;
    let q = state.farming;
    (1.0 - q) * t.sqrt() + q * state.diversity(pae) * t * tli
}

/// Relative growth rate r for a precomputed subsistence intensity.
pub fn growth_rate(state: &RegionState, fep: f64, si: f64, params: &ParameterSet) -> f64 {
    let t = state.technology;
    let p = state.density;
    params.mu * (fep - params.gamma * t.sqrt() * p) * (1.0 - params.omega * t) * si
        - params.rho * p * (-t / params.t_lit).exp()
}

/// Relative growth rate in the environment `env`.
pub fn relative_growth(state: &RegionState, env: &Potential, params: &ParameterSet) -> f64 {
    let si = subsistence_intensity(state, env.pae, env.tli);
    growth_rate(state, env.fep, si, params)
}

/// Closed-form ∂r/∂T, ∂r/∂Q and ∂r/∂f.
pub fn fitness_gradients(state: &RegionState, env: &Potential, params: &ParameterSet) -> Gradients {
    let t = state.technology;
    let p = state.density;
    let q = state.farming;
    let sqrt_t = t.sqrt();
    let n = state.diversity(env.pae);

    let resource = env.fep - params.gamma * sqrt_t * p;
    let overhead = 1.0 - params.omega * t;
    let si = (1.0 - q) * sqrt_t + q * n * t * env.tli;
    let common = params.mu * resource * overhead;

    let dsi_dt = (1.0 - q) / (2.0 * sqrt_t) + q * n * env.tli;
    let dresource_dt = -params.gamma * p / (2.0 * sqrt_t);
    let decay = (-t / params.t_lit).exp();

    let technology = params.mu
        * (dresource_dt * overhead * si - params.omega * resource * si + resource * overhead * dsi_dt)
        + params.rho * p * decay / params.t_lit;
    let farming = common * (n * t * env.tli - sqrt_t);
    let economies = common * q * env.pae * t * env.tli;

    Gradients {
        technology,
        farming,
        economies,
    }
}

/// `dX/dt = δ_X·∂r/∂X`.
pub fn trait_rates(gradients: &Gradients, params: &ParameterSet) -> TraitRates {
    TraitRates {
        technology: params.delta_t * gradients.technology,
        farming: params.delta_q * gradients.farming,
        economies: params.delta_f * gradients.economies,
    }
}

/// `dP/dt = r·P`.
pub fn population_rate(state: &RegionState, r: f64) -> f64 {
    r * state.density
}
