//! Agent kinds, their transfer operators, and the birth/death kernels that
//! reshape the population from the metabolic energy.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Sensor,
    Regulator,
    Catalyst,
    Genesis,
}

impl std::fmt::Display for AgentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AgentKind::Sensor => "sensor",
            AgentKind::Regulator => "regulator",
            AgentKind::Catalyst => "catalyst",
            AgentKind::Genesis => "genesis",
        })
    }
}

/// Per-kind operator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Role {
    /// Immortal zero-force sentinel.
    Genesis,
    Sensor {
        sigma: f64,
    },
    Regulator {
        k_p: f64,
        k_d: f64,
    },
    Catalyst {
        lambda_c: f64,
    },
}

impl Role {
    pub fn kind(&self) -> AgentKind {
        match self {
            Role::Genesis => AgentKind::Genesis,
            Role::Sensor { .. } => AgentKind::Sensor,
            Role::Regulator { .. } => AgentKind::Regulator,
            Role::Catalyst { .. } => AgentKind::Catalyst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub role: Role,
    pub birth_step: u64,
}

impl Agent {
    pub fn kind(&self) -> AgentKind {
        self.role.kind()
    }
}

/// Stochastic exploration term: a draw from `N(0, sigma^2)`.
pub fn sensor_transfer<R: Rng + ?Sized>(sigma: f64, rng: &mut R) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    sigma * z
}

/// Proportional-derivative damping toward zero.
pub fn regulator_transfer(mu: f64, dmu: f64, k_p: f64, k_d: f64) -> f64 {
    -k_p * mu - k_d * dmu
}

/// Energy-gated amplification; exactly zero unless `energy > e_thresh`.
pub fn catalyst_transfer(mu: f64, lambda_c: f64, energy: f64, e_thresh: f64) -> f64 {
    if energy > e_thresh {
        lambda_c * mu
    } else {
        0.0
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlasticityMode {
    /// Threshold rules: at most one birth or one death per step.
    Deterministic,
    /// Rate rules: Bernoulli birth at `birth_rate`, independent per-agent
    /// death at `1 - survival_probability`.
    Stochastic,
}

/// Operator parameters given to newly spawned agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpawnParams {
    pub sensor_sigma: f64,
    pub regulator_k_p: f64,
    pub regulator_k_d: f64,
    pub catalyst_lambda: f64,
}

impl Default for SpawnParams {
    // Small enough that a full population keeps the belief recursion
    // contractive at gamma = 0.6: 64 * (k_p + k_d) and 64 * lambda stay
    // below the stability bound.
    fn default() -> Self {
        Self {
            sensor_sigma: 0.05,
            regulator_k_p: 0.02,
            regulator_k_d: 0.005,
            catalyst_lambda: 0.01,
        }
    }
}

impl SpawnParams {
    pub fn role_for(&self, kind: AgentKind) -> Role {
        match kind {
            AgentKind::Sensor => Role::Sensor {
                sigma: self.sensor_sigma,
            },
            AgentKind::Regulator => Role::Regulator {
                k_p: self.regulator_k_p,
                k_d: self.regulator_k_d,
            },
            AgentKind::Catalyst => Role::Catalyst {
                lambda_c: self.catalyst_lambda,
            },
            AgentKind::Genesis => Role::Genesis,
        }
    }
}

/// Thresholds and rates of the structural plasticity loop. All default values
/// are artifact choices, not measured quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlasticityParams {
    pub e_thresh: f64,
    pub e_crit: f64,
    pub eta_learning: f64,
    /// Nucleation threshold above which a flat-gradient birth is a Catalyst.
    pub omega: f64,
    pub tau_grad: f64,
    pub tau_flat: f64,
    pub n_max: usize,
    pub mode: PlasticityMode,
    pub spawn: SpawnParams,
}

impl Default for PlasticityParams {
    fn default() -> Self {
        Self {
            e_thresh: 5.0,
            e_crit: -5.0,
            eta_learning: 0.5,
            omega: 8.0,
            tau_grad: 0.5,
            tau_flat: 0.1,
            n_max: 64,
            mode: PlasticityMode::Deterministic,
            spawn: SpawnParams::default(),
        }
    }
}

impl PlasticityParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("plasticity.e_thresh", self.e_thresh),
            ("plasticity.e_crit", self.e_crit),
            ("plasticity.omega", self.omega),
            ("plasticity.tau_grad", self.tau_grad),
            ("plasticity.tau_flat", self.tau_flat),
        ];
        for (field, v) in finite {
            if !v.is_finite() {
                return Err(Error::config(field, "must be finite"));
            }
        }
        if self.e_crit >= self.e_thresh {
            return Err(Error::config("plasticity.e_crit", "must be below e_thresh"));
        }
        if self.n_max == 0 {
            return Err(Error::config("plasticity.n_max", "must be at least 1"));
        }
        if self.tau_flat >= self.tau_grad {
            return Err(Error::config("plasticity.tau_flat", "must be below tau_grad"));
        }
        if !(0.0..=1.0).contains(&self.eta_learning) {
            return Err(Error::config("plasticity.eta_learning", "must lie in [0, 1]"));
        }
        let s = &self.spawn;
        for (field, v) in [
            ("plasticity.spawn.sensor_sigma", s.sensor_sigma),
            ("plasticity.spawn.regulator_k_p", s.regulator_k_p),
            ("plasticity.spawn.regulator_k_d", s.regulator_k_d),
            ("plasticity.spawn.catalyst_lambda", s.catalyst_lambda),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, "must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Recruitment rate `sigmoid(E - e_thresh) * eta_learning`.
pub fn birth_rate(energy: f64, params: &PlasticityParams) -> f64 {
    sigmoid(energy - params.e_thresh) * params.eta_learning
}

/// Apoptosis rate, zero at or above `e_crit`.
pub fn death_rate(energy: f64, params: &PlasticityParams) -> f64 {
    if energy < params.e_crit {
        1.0 - (-(params.e_crit - energy)).exp()
    } else {
        0.0
    }
}

pub fn survival_probability(energy: f64, e_crit: f64) -> f64 {
    sigmoid(energy - e_crit)
}

/// Steep positive gradient recruits a Regulator; a flat gradient with a full
/// reservoir recruits a Catalyst; anything else falls back to a Sensor.
pub fn select_spawn_type(grad_f: f64, energy: f64, params: &PlasticityParams) -> AgentKind {
    if grad_f > params.tau_grad {
        AgentKind::Regulator
    } else if grad_f.abs() < params.tau_flat && energy > params.omega {
        AgentKind::Catalyst
    } else {
        AgentKind::Sensor
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", content = "kind", rename_all = "snake_case")]
pub enum PlasticityEvent {
    Birth(AgentKind),
    Death(AgentKind),
}

/// The live agent set. Always holds exactly one Genesis agent, at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPopulation {
    agents: Vec<Agent>,
    peak_count: usize,
}

impl Default for AgentPopulation {
    fn default() -> Self {
        Self::new()
    }
}

impl AgentPopulation {
    pub fn new() -> Self {
        Self {
            agents: vec![Agent {
                role: Role::Genesis,
                birth_step: 0,
            }],
            peak_count: 1,
        }
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    /// Never true; present for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn peak_count(&self) -> usize {
        self.peak_count
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn count(&self, kind: AgentKind) -> usize {
        self.agents.iter().filter(|a| a.kind() == kind).count()
    }

    fn push(&mut self, agent: Agent) {
        self.agents.push(agent);
        self.peak_count = self.peak_count.max(self.agents.len());
    }
}

/// One plasticity step. Returns the birth/death events in the order they were
/// applied.
pub fn apply_plasticity<R: Rng + ?Sized>(
    pop: &mut AgentPopulation,
    energy: f64,
    grad_f: f64,
    step: u64,
    params: &PlasticityParams,
    rng: &mut R,
) -> Vec<PlasticityEvent> {
    let mut events = Vec::new();
    let spawn = |pop: &mut AgentPopulation, events: &mut Vec<PlasticityEvent>| {
        let kind = select_spawn_type(grad_f, energy, params);
        pop.push(Agent {
            role: params.spawn.role_for(kind),
            birth_step: step,
        });
        events.push(PlasticityEvent::Birth(kind));
    };
    match params.mode {
        PlasticityMode::Deterministic => {
            if energy > params.e_thresh {
                if pop.len() < params.n_max {
                    spawn(pop, &mut events);
                }
            } else if energy < params.e_crit && pop.len() > 1 {
                // Index 0 is Genesis; index 1 is the oldest mortal agent.
                let dead = pop.agents.remove(1);
                events.push(PlasticityEvent::Death(dead.kind()));
            }
        }
        PlasticityMode::Stochastic => {
            let p_die = 1.0 - survival_probability(energy, params.e_crit);
            let mut kept = Vec::with_capacity(pop.agents.len());
            for agent in pop.agents.drain(..) {
                if agent.kind() != AgentKind::Genesis && rng.random::<f64>() < p_die {
                    events.push(PlasticityEvent::Death(agent.kind()));
                } else {
                    kept.push(agent);
                }
            }
            pop.agents = kept;
            if rng.random::<f64>() < birth_rate(energy, params) && pop.len() < params.n_max {
                spawn(pop, &mut events);
            }
        }
    }
    events
}
