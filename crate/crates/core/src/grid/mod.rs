//! Static network description.
//!
//! A [`NetworkCase`] is loaded once per session and never mutated afterwards;
//! everything that changes while the simulation runs lives in
//! [`crate::powerflow::SimulationState`].

mod admittance;
mod json;
mod matpower;
pub mod synthetic;
mod validate;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use admittance::{branch_admittance, build_admittance, shunt_mvar_from_case, Admittance, BranchPrimitive, BranchSetting};
pub use json::{parse_case_json, serialize_case_json, CaseError};
pub use matpower::{import_matpower_subset, MatpowerImport};
pub use validate::{validate_case, Finding, FindingKind, Severity};

/// Default voltage band used when a bus does not declare one.
pub const DEFAULT_V_MIN: f64 = 0.95;
pub const DEFAULT_V_MAX: f64 = 1.05;

/// Grounding resistance assumed for substations imported without one.
pub const DEFAULT_GROUNDING_OHM: f64 = 0.5;
pub const DEFAULT_GIC_K_FACTOR: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Slack,
    Pv,
    Pq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SwitchStatus {
    #[default]
    Closed,
    Open,
}

impl SwitchStatus {
    pub fn is_closed(self) -> bool {
        self == SwitchStatus::Closed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum UnitStatus {
    #[default]
    Online,
    Offline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ShuntStatus {
    #[default]
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    pub base_kv: f64,
    #[serde(rename = "type")]
    pub bus_type: BusType,
    #[serde(default = "default_v_limits")]
    pub v_limits: [f64; 2],
    pub substation_id: u32,
}

fn default_v_limits() -> [f64; 2] {
    [DEFAULT_V_MIN, DEFAULT_V_MAX]
}

impl Bus {
    pub fn v_min(&self) -> f64 {
        self.v_limits[0]
    }

    pub fn v_max(&self) -> f64 {
        self.v_limits[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub id: u32,
    pub from_bus: u32,
    pub to_bus: u32,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b_charging: f64,
    #[serde(default = "one")]
    pub tap_ratio: f64,
    #[serde(default = "default_tap_limits")]
    pub tap_limits: [f64; 2],
    #[serde(default = "default_tap_step")]
    pub tap_step: f64,
    pub mva_limit: f64,
    /// Per-phase DC resistance in ohms (GIC network).
    pub dc_resistance_ohm: f64,
    #[serde(default)]
    pub is_transformer: bool,
    /// Mvar per amp of effective winding current per per-unit volt.
    #[serde(default = "default_k")]
    pub gic_k_factor: f64,
    #[serde(default)]
    pub status: SwitchStatus,
}

fn one() -> f64 {
    1.0
}

fn default_tap_limits() -> [f64; 2] {
    [0.9, 1.1]
}

fn default_tap_step() -> f64 {
    0.00625
}

fn default_k() -> f64 {
    DEFAULT_GIC_K_FACTOR
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CostCoefficients {
    /// No-load cost, $/h.
    pub a: f64,
    /// Linear cost, $/MWh.
    pub b: f64,
    /// Quadratic cost, $/MW²h.
    pub c: f64,
}

impl CostCoefficients {
    pub fn rate(&self, p_mw: f64) -> f64 {
        self.a + self.b * p_mw + self.c * p_mw * p_mw
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: u32,
    pub bus: u32,
    #[serde(default)]
    pub status: UnitStatus,
    pub p_set: f64,
    pub p_limits: [f64; 2],
    pub q_limits: [f64; 2],
    #[serde(default = "one")]
    pub v_setpoint: f64,
    #[serde(default)]
    pub cost_coeffs: CostCoefficients,
    /// MW per minute.
    pub ramp_rate: f64,
}

impl Generator {
    pub fn p_min(&self) -> f64 {
        self.p_limits[0]
    }
    pub fn p_max(&self) -> f64 {
        self.p_limits[1]
    }
    pub fn q_min(&self) -> f64 {
        self.q_limits[0]
    }
    pub fn q_max(&self) -> f64 {
        self.q_limits[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Load {
    pub id: u32,
    pub bus: u32,
    pub p_nominal: f64,
    pub q_nominal: f64,
    #[serde(default = "one")]
    pub served_fraction: f64,
    #[serde(default)]
    pub status: SwitchStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchedShunt {
    pub id: u32,
    pub bus: u32,
    /// Reactive injection at 1.0 pu; positive is capacitive.
    pub q_nominal: f64,
    #[serde(default)]
    pub status: ShuntStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Substation {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    pub latitude: f64,
    pub longitude: f64,
    #[serde(default = "default_grounding")]
    pub grounding_resistance_ohm: f64,
    pub area_id: u32,
    #[serde(default)]
    pub bus_ids: Vec<u32>,
}

fn default_grounding() -> f64 {
    DEFAULT_GROUNDING_OHM
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub scheduled_export: f64,
    /// MW per 0.1 Hz; negative by convention.
    pub frequency_bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub base_mva: f64,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub branches: Vec<Branch>,
    #[serde(default)]
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub loads: Vec<Load>,
    #[serde(default)]
    pub shunts: Vec<SwitchedShunt>,
    pub substations: Vec<Substation>,
    pub areas: Vec<Area>,
}

/// Reference to one element of a case, by element id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "element", content = "id", rename_all = "lowercase")]
pub enum ElementRef {
    Case,
    Bus(u32),
    Branch(u32),
    Generator(u32),
    Load(u32),
    Shunt(u32),
    Substation(u32),
    Area(u32),
}

impl std::fmt::Display for ElementRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ElementRef::Case => write!(f, "case"),
            ElementRef::Bus(id) => write!(f, "bus {id}"),
            ElementRef::Branch(id) => write!(f, "branch {id}"),
            ElementRef::Generator(id) => write!(f, "generator {id}"),
            ElementRef::Load(id) => write!(f, "load {id}"),
            ElementRef::Shunt(id) => write!(f, "shunt {id}"),
            ElementRef::Substation(id) => write!(f, "substation {id}"),
            ElementRef::Area(id) => write!(f, "area {id}"),
        }
    }
}

/// Dense position lookups for element ids.
#[derive(Debug, Clone, Default)]
pub struct CaseIndex {
    pub bus: HashMap<u32, usize>,
    pub branch: HashMap<u32, usize>,
    pub generator: HashMap<u32, usize>,
    pub load: HashMap<u32, usize>,
    pub shunt: HashMap<u32, usize>,
    pub substation: HashMap<u32, usize>,
    pub area: HashMap<u32, usize>,
}

impl CaseIndex {
    pub fn new(case: &NetworkCase) -> Self {
        fn positions<T>(items: &[T], id: impl Fn(&T) -> u32) -> HashMap<u32, usize> {
            items.iter().enumerate().map(|(i, item)| (id(item), i)).collect()
        }
        CaseIndex {
            bus: positions(&case.buses, |b| b.id),
            branch: positions(&case.branches, |b| b.id),
            generator: positions(&case.generators, |g| g.id),
            load: positions(&case.loads, |l| l.id),
            shunt: positions(&case.shunts, |s| s.id),
            substation: positions(&case.substations, |s| s.id),
            area: positions(&case.areas, |a| a.id),
        }
    }

    pub fn contains(&self, element: ElementRef) -> bool {
        match element {
            ElementRef::Case => true,
            ElementRef::Bus(id) => self.bus.contains_key(&id),
            ElementRef::Branch(id) => self.branch.contains_key(&id),
            ElementRef::Generator(id) => self.generator.contains_key(&id),
            ElementRef::Load(id) => self.load.contains_key(&id),
            ElementRef::Shunt(id) => self.shunt.contains_key(&id),
            ElementRef::Substation(id) => self.substation.contains_key(&id),
            ElementRef::Area(id) => self.area.contains_key(&id),
        }
    }
}

impl NetworkCase {
    pub fn index(&self) -> CaseIndex {
        CaseIndex::new(self)
    }

    /// Area id of every bus (by bus position), via its substation.
    pub fn bus_areas(&self) -> Vec<u32> {
        let subs: HashMap<u32, u32> = self.substations.iter().map(|s| (s.id, s.area_id)).collect();
        self.buses.iter().map(|b| subs.get(&b.substation_id).copied().unwrap_or(0)).collect()
    }

    /// Fills `Substation::bus_ids` from the buses' own `substation_id`.
    pub fn normalize_substation_members(&mut self) {
        let index: HashMap<u32, usize> = self.substations.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
        for sub in &mut self.substations {
            sub.bus_ids.clear();
        }
        for bus in &self.buses {
            if let Some(&i) = index.get(&bus.substation_id) {
                self.substations[i].bus_ids.push(bus.id);
            }
        }
        for sub in &mut self.substations {
            sub.bus_ids.sort_unstable();
        }
    }

    /// Bus positions grouped into electrical islands over branches that
    /// `closed` reports as in service. Islands are ordered by their lowest
    /// bus position.
    pub fn islands(&self, closed: impl Fn(usize) -> bool) -> Vec<Vec<usize>> {
        let index: HashMap<u32, usize> = self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
        let mut parent: Vec<usize> = (0..self.buses.len()).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for (k, br) in self.branches.iter().enumerate() {
            if !closed(k) {
                continue;
            }
            let (Some(&f), Some(&t)) = (index.get(&br.from_bus), index.get(&br.to_bus)) else {
                continue;
            };
            let (rf, rt) = (find(&mut parent, f), find(&mut parent, t));
            if rf != rt {
                parent[rf.max(rt)] = rf.min(rt);
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for i in 0..self.buses.len() {
            let root = find(&mut parent, i);
            let g = *slot.entry(root).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[g].push(i);
        }
        groups
    }

    /// Impedance base in ohms for a bus voltage level.
    pub fn z_base_ohm(&self, base_kv: f64) -> f64 {
        base_kv * base_kv / self.base_mva
    }
}
