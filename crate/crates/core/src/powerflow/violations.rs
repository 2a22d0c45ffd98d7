use serde::{Deserialize, Serialize};

use super::state::PowerFlowSolution;
use crate::grid::NetworkCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VoltageBound {
    Under,
    Over,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusViolation {
    pub bus: u32,
    pub v: f64,
    pub bound: VoltageBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchOverload {
    pub branch: u32,
    pub loading_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ViolationSet {
    pub bus_voltage: Vec<BusViolation>,
    pub branch_overload: Vec<BranchOverload>,
}

impl ViolationSet {
    pub fn n_v(&self) -> usize {
        self.bus_voltage.len()
    }

    pub fn n_b(&self) -> usize {
        self.branch_overload.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bus_voltage.is_empty() && self.branch_overload.is_empty()
    }
}

/// Lists buses strictly outside their voltage band and branches strictly
/// above 100 % loading. De-energized buses sit at 0 pu and count as
/// under-voltage.
pub fn detect_violations(case: &NetworkCase, solution: &PowerFlowSolution) -> ViolationSet {
    let bus_voltage = case
        .buses
        .iter()
        .zip(&solution.vm)
        .filter_map(|(bus, &v)| {
            let bound = if v < bus.v_min() {
                VoltageBound::Under
            } else if v > bus.v_max() {
                VoltageBound::Over
            } else {
                return None;
            };
            Some(BusViolation { bus: bus.id, v, bound })
        })
        .collect();
    let branch_overload = case
        .branches
        .iter()
        .zip(&solution.branch_flows)
        .filter(|(_, f)| f.loading_pct > 100.0)
        .map(|(br, f)| BranchOverload { branch: br.id, loading_pct: f.loading_pct })
        .collect();
    ViolationSet { bus_voltage, branch_overload }
}

/// Violations reported while the network is collapsed: every bus is dark.
pub fn blackout_violations(case: &NetworkCase) -> ViolationSet {
    ViolationSet {
        bus_voltage: case.buses.iter().map(|b| BusViolation { bus: b.id, v: 0.0, bound: VoltageBound::Under }).collect(),
        branch_overload: Vec::new(),
    }
}
