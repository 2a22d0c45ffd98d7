use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::newton::{NodeKind, PowerFlowProblem};
use crate::grid::{build_admittance, BranchSetting, BusType, NetworkCase, ShuntStatus, UnitStatus};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenOverlay {
    pub online: bool,
    /// Current scheduled output, MW; moves toward `p_target` at the ramp rate.
    pub p_set: f64,
    pub p_target: f64,
    pub v_setpoint: f64,
    /// Fixed reactive output, Mvar. `None` means voltage control.
    pub q_fixed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadOverlay {
    pub closed: bool,
    pub served_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuntOverlay {
    pub on: bool,
    pub q_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchOverlay {
    pub closed: bool,
    pub tap: f64,
    pub tap_auto: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaOverlay {
    pub scheduled_export: f64,
    pub agc_on: bool,
}

/// Solved electrical state of the network at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
    pub energized: Vec<bool>,
    pub branch_flows: Vec<BranchFlow>,
    pub gen_output: Vec<GenOutput>,
    /// Total output of slack-bus generators, MW.
    pub slack_p: f64,
    pub iterations: usize,
    pub max_mismatch: f64,
    /// Buses re-typed PQ because their generators hit a reactive limit.
    pub q_limited_buses: Vec<u32>,
    /// Set when the reactive-limit loop ran out of rounds.
    pub q_limit_warning: bool,
}

impl PowerFlowSolution {
    pub fn phasors(&self) -> Vec<Complex64> {
        self.vm.iter().zip(&self.va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct BranchFlow {
    pub p_from: f64,
    pub q_from: f64,
    pub p_to: f64,
    pub q_to: f64,
    pub loading_pct: f64,
}

impl BranchFlow {
    pub fn loss_mw(&self) -> f64 {
        self.p_from + self.p_to
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct GenOutput {
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SolutionState {
    Solved(PowerFlowSolution),
    Collapsed,
}

impl SolutionState {
    pub fn solved(&self) -> Option<&PowerFlowSolution> {
        match self {
            SolutionState::Solved(s) => Some(s),
            SolutionState::Collapsed => None,
        }
    }
}

/// Everything about the simulated grid that evolves from step to step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationState {
    pub sim_time: f64,
    pub step_index: u64,
    pub gens: Vec<GenOverlay>,
    pub loads: Vec<LoadOverlay>,
    pub shunts: Vec<ShuntOverlay>,
    pub branches: Vec<BranchOverlay>,
    pub areas: Vec<AreaOverlay>,
    pub load_scale: f64,
    pub solution: SolutionState,
    /// Hot-spot temperature rise above ambient per branch position, °C.
    /// Only transformer entries ever become non-zero.
    pub transformer_rise: Vec<f64>,
    /// Transformer GIC reactive losses per bus position, Mvar, applied in
    /// the next solve.
    pub gic_q_mvar: Vec<f64>,
    pub score: f64,
    /// Accumulated violation penalty, point-seconds; `score` derives from it.
    pub penalty: f64,
    pub cost_accrued: f64,
    pub frequency_deviation: f64,
    /// Area control error per area position from the last solved step, MW.
    pub ace: Vec<f64>,
    /// Set when a command touched a collapsed state; the next step retries
    /// a solve from flat start.
    pub restore_pending: bool,
}

impl SimulationState {
    /// Initial overlays taken from the case, not yet solved.
    pub fn from_case(case: &NetworkCase, sim_time: f64) -> Self {
        SimulationState {
            sim_time,
            step_index: 0,
            gens: case
                .generators
                .iter()
                .map(|g| GenOverlay { online: g.status == UnitStatus::Online, p_set: g.p_set, p_target: g.p_set, v_setpoint: g.v_setpoint, q_fixed: None })
                .collect(),
            loads: case.loads.iter().map(|l| LoadOverlay { closed: l.status.is_closed(), served_fraction: l.served_fraction }).collect(),
            shunts: case.shunts.iter().map(|s| ShuntOverlay { on: s.status == ShuntStatus::On, q_mvar: s.q_nominal }).collect(),
            branches: case.branches.iter().map(|b| BranchOverlay { closed: b.status.is_closed(), tap: b.tap_ratio, tap_auto: false }).collect(),
            areas: case.areas.iter().map(|a| AreaOverlay { scheduled_export: a.scheduled_export, agc_on: false }).collect(),
            load_scale: 1.0,
            solution: SolutionState::Collapsed,
            transformer_rise: vec![0.0; case.branches.len()],
            gic_q_mvar: vec![0.0; case.buses.len()],
            score: 100.0,
            penalty: 0.0,
            cost_accrued: 0.0,
            frequency_deviation: 0.0,
            ace: vec![0.0; case.areas.len()],
            restore_pending: true,
        }
    }

    pub fn is_collapsed(&self) -> bool {
        matches!(self.solution, SolutionState::Collapsed)
    }

    pub fn branch_settings(&self) -> Vec<BranchSetting> {
        self.branches.iter().map(|b| BranchSetting { closed: b.closed, tap: b.tap }).collect()
    }

    pub fn shunt_mvar(&self) -> Vec<f64> {
        self.shunts.iter().map(|s| if s.on { s.q_mvar } else { 0.0 }).collect()
    }

    /// Served active and reactive load per bus position, MW / Mvar.
    pub fn bus_loads(&self, case: &NetworkCase, bus_pos: &HashMap<u32, usize>) -> (Vec<f64>, Vec<f64>) {
        let n = case.buses.len();
        let (mut p, mut q) = (vec![0.0; n], vec![0.0; n]);
        for (load, ov) in case.loads.iter().zip(&self.loads) {
            if ov.closed {
                let i = bus_pos[&load.bus];
                let factor = ov.served_fraction * self.load_scale;
                p[i] += load.p_nominal * factor;
                q[i] += load.q_nominal * factor;
            }
        }
        (p, q)
    }
}

/// Bus roles and injections derived from a case plus the current overlays.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub problem: PowerFlowProblem,
    pub bus_pos: HashMap<u32, usize>,
    /// Generators (positions) that regulate voltage at each bus.
    pub controlling: Vec<Vec<usize>>,
    pub p_load: Vec<f64>,
    pub q_load: Vec<f64>,
    /// Sum of fixed-Q generator output per bus, Mvar.
    pub q_fixed: Vec<f64>,
}

impl OperatingPoint {
    pub fn build(case: &NetworkCase, state: &SimulationState) -> Self {
        let n = case.buses.len();
        let base = case.base_mva;
        let bus_pos: HashMap<u32, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let ybus = build_admittance(case, &state.branch_settings(), &state.shunt_mvar());

        let mut controlling = vec![Vec::new(); n];
        let mut p_gen = vec![0.0; n];
        let mut q_fixed = vec![0.0; n];
        let mut has_online = vec![false; n];
        for (k, (g, ov)) in case.generators.iter().zip(&state.gens).enumerate() {
            if !ov.online {
                continue;
            }
            let i = bus_pos[&g.bus];
            has_online[i] = true;
            p_gen[i] += ov.p_set;
            // Slack units always regulate voltage.
            match ov.q_fixed {
                Some(q) if case.buses[i].bus_type != BusType::Slack => q_fixed[i] += q,
                _ => controlling[i].push(k),
            }
        }

        let islands = case.islands(|k| state.branches[k].closed);
        let mut energized = vec![false; n];
        for island in &islands {
            let live = island.iter().any(|&i| case.buses[i].bus_type == BusType::Slack && has_online[i]);
            if live {
                for &i in island {
                    energized[i] = true;
                }
            }
        }

        let (p_load, mut q_load) = state.bus_loads(case, &bus_pos);
        for (q, gic) in q_load.iter_mut().zip(&state.gic_q_mvar) {
            *q += gic;
        }

        let mut kind = vec![NodeKind::Dead; n];
        let mut v_set = vec![1.0; n];
        for i in 0..n {
            if !energized[i] {
                continue;
            }
            kind[i] = if case.buses[i].bus_type == BusType::Slack {
                NodeKind::Slack
            } else if !controlling[i].is_empty() {
                NodeKind::Pv
            } else {
                NodeKind::Pq
            };
            if let Some(&g) = controlling[i].first() {
                v_set[i] = state.gens[g].v_setpoint;
            }
        }

        let p_spec = (0..n).map(|i| (p_gen[i] - p_load[i]) / base).collect();
        let q_spec = (0..n).map(|i| (q_fixed[i] - q_load[i]) / base).collect();

        OperatingPoint { problem: PowerFlowProblem { ybus, kind, v_set, p_spec, q_spec }, bus_pos, controlling, p_load, q_load, q_fixed }
    }

    pub fn energized(&self) -> Vec<bool> {
        self.problem.kind.iter().map(|k| *k != NodeKind::Dead).collect()
    }
}
