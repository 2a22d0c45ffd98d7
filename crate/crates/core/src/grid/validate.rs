use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{BusType, ElementRef, NetworkCase, UnitStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    DuplicateId,
    DanglingReference,
    NoSlack,
    MultipleSlack,
    SubstationMembership,
    ZeroReactance,
    NegativeResistance,
    NonPositiveRating,
    TapOutOfRange,
    DegenerateQRange,
    DispatchOutOfRange,
    VoltageLimits,
    BaseVoltage,
    ServedFraction,
    Coordinates,
    Grounding,
    FrequencyBias,
    BaseMva,
}

impl FindingKind {
    /// Referential problems that make a case unloadable, as opposed to
    /// parameter problems that `validate_case` reports for review.
    pub fn is_integrity(self) -> bool {
        matches!(
            self,
            FindingKind::DuplicateId | FindingKind::DanglingReference | FindingKind::NoSlack | FindingKind::MultipleSlack | FindingKind::SubstationMembership
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub kind: FindingKind,
    pub element: ElementRef,
    pub message: String,
}

impl std::fmt::Display for Finding {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.element, self.message)
    }
}

struct Findings(Vec<Finding>);

impl Findings {
    fn error(&mut self, kind: FindingKind, element: ElementRef, message: impl Into<String>) {
        self.0.push(Finding { severity: Severity::Error, kind, element, message: message.into() });
    }
}

fn duplicates<T>(items: &[T], id: impl Fn(&T) -> u32) -> Vec<u32> {
    let mut seen = HashSet::new();
    let mut dup: Vec<u32> = items.iter().map(&id).filter(|i| !seen.insert(*i)).collect();
    dup.sort_unstable();
    dup.dedup();
    dup
}

/// Checks every structural and parameter invariant of a case. An empty
/// result means the case is fit for the solver.
pub fn validate_case(case: &NetworkCase) -> Vec<Finding> {
    let mut out = Findings(Vec::new());
    use FindingKind as K;

    if !(case.base_mva > 0.0) {
        out.error(K::BaseMva, ElementRef::Case, "base_mva must be positive");
    }

    for id in duplicates(&case.buses, |b| b.id) {
        out.error(K::DuplicateId, ElementRef::Bus(id), "duplicate bus id");
    }
    for id in duplicates(&case.branches, |b| b.id) {
        out.error(K::DuplicateId, ElementRef::Branch(id), "duplicate branch id");
    }
    for id in duplicates(&case.generators, |g| g.id) {
        out.error(K::DuplicateId, ElementRef::Generator(id), "duplicate generator id");
    }
    for id in duplicates(&case.loads, |l| l.id) {
        out.error(K::DuplicateId, ElementRef::Load(id), "duplicate load id");
    }
    for id in duplicates(&case.shunts, |s| s.id) {
        out.error(K::DuplicateId, ElementRef::Shunt(id), "duplicate shunt id");
    }
    for id in duplicates(&case.substations, |s| s.id) {
        out.error(K::DuplicateId, ElementRef::Substation(id), "duplicate substation id");
    }
    for id in duplicates(&case.areas, |a| a.id) {
        out.error(K::DuplicateId, ElementRef::Area(id), "duplicate area id");
    }

    let buses: HashSet<u32> = case.buses.iter().map(|b| b.id).collect();
    let substations: HashMap<u32, usize> = case.substations.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
    let areas: HashSet<u32> = case.areas.iter().map(|a| a.id).collect();

    for bus in &case.buses {
        let el = ElementRef::Bus(bus.id);
        if !substations.contains_key(&bus.substation_id) {
            out.error(K::DanglingReference, el, format!("references missing substation {}", bus.substation_id));
        }
        let [lo, hi] = bus.v_limits;
        if !(lo > 0.0 && lo < hi) {
            out.error(K::VoltageLimits, el, format!("voltage limits [{lo}, {hi}] must satisfy 0 < v_min < v_max"));
        }
        if !(bus.base_kv > 0.0) {
            out.error(K::BaseVoltage, el, "base_kv must be positive");
        }
    }

    for sub in &case.substations {
        let el = ElementRef::Substation(sub.id);
        if !areas.contains(&sub.area_id) {
            out.error(K::DanglingReference, el, format!("references missing area {}", sub.area_id));
        }
        if sub.latitude.abs() > 90.0 || sub.longitude.abs() > 180.0 || !sub.latitude.is_finite() || !sub.longitude.is_finite() {
            out.error(K::Coordinates, el, "coordinates out of range");
        }
        if !(sub.grounding_resistance_ohm > 0.0 && sub.grounding_resistance_ohm.is_finite()) {
            out.error(K::Grounding, el, "grounding resistance must be positive and finite");
        }
        if !sub.bus_ids.is_empty() {
            let mut expected: Vec<u32> = case.buses.iter().filter(|b| b.substation_id == sub.id).map(|b| b.id).collect();
            expected.sort_unstable();
            let mut listed = sub.bus_ids.clone();
            listed.sort_unstable();
            if listed != expected && listed.iter().all(|b| buses.contains(b)) {
                out.error(K::SubstationMembership, el, format!("bus list {listed:?} does not match member buses {expected:?}"));
            }
        }
        for &b in &sub.bus_ids {
            match case.buses.iter().find(|bus| bus.id == b) {
                None => out.error(K::DanglingReference, el, format!("lists missing bus {b}")),
                Some(bus) if bus.substation_id != sub.id => {
                    out.error(K::SubstationMembership, el, format!("lists bus {b} which belongs to substation {}", bus.substation_id))
                }
                Some(_) => {}
            }
        }
    }

    for area in &case.areas {
        if !(area.frequency_bias < 0.0) {
            out.error(K::FrequencyBias, ElementRef::Area(area.id), "frequency bias must be negative");
        }
    }

    for br in &case.branches {
        let el = ElementRef::Branch(br.id);
        for end in [br.from_bus, br.to_bus] {
            if !buses.contains(&end) {
                out.error(K::DanglingReference, el, format!("references missing bus {end}"));
            }
        }
        if br.x == 0.0 {
            out.error(K::ZeroReactance, el, "zero reactance");
        }
        if br.r < 0.0 {
            out.error(K::NegativeResistance, el, "negative resistance");
        }
        if !(br.mva_limit > 0.0) {
            out.error(K::NonPositiveRating, el, "mva_limit must be positive");
        }
        if br.dc_resistance_ohm < 0.0 {
            out.error(K::NegativeResistance, el, "negative dc resistance");
        }
        let [lo, hi] = br.tap_limits;
        if !(br.tap_ratio > 0.0 && lo <= br.tap_ratio && br.tap_ratio <= hi) {
            out.error(K::TapOutOfRange, el, format!("tap {} outside limits [{lo}, {hi}]", br.tap_ratio));
        }
    }

    for g in &case.generators {
        let el = ElementRef::Generator(g.id);
        if !buses.contains(&g.bus) {
            out.error(K::DanglingReference, el, format!("references missing bus {}", g.bus));
        }
        if !(g.q_min() < g.q_max()) {
            out.error(K::DegenerateQRange, el, "degenerate Q range");
        }
        if g.p_min() > g.p_max() {
            out.error(K::DispatchOutOfRange, el, "p_min exceeds p_max");
        } else if g.status == UnitStatus::Online && !(g.p_min() <= g.p_set && g.p_set <= g.p_max()) {
            out.error(K::DispatchOutOfRange, el, format!("p_set {} outside [{}, {}]", g.p_set, g.p_min(), g.p_max()));
        }
    }

    for l in &case.loads {
        let el = ElementRef::Load(l.id);
        if !buses.contains(&l.bus) {
            out.error(K::DanglingReference, el, format!("references missing bus {}", l.bus));
        }
        if !(0.0..=1.0).contains(&l.served_fraction) {
            out.error(K::ServedFraction, el, "served_fraction outside [0, 1]");
        }
    }

    for s in &case.shunts {
        if !buses.contains(&s.bus) {
            out.error(K::DanglingReference, ElementRef::Shunt(s.id), format!("references missing bus {}", s.bus));
        }
    }

    // Slack rule is only meaningful once every branch endpoint resolves.
    let dangling = out.0.iter().any(|f| f.kind == K::DanglingReference && matches!(f.element, ElementRef::Branch(_)));
    if !dangling {
        for island in case.islands(|k| case.branches[k].status.is_closed()) {
            let slacks: Vec<u32> = island.iter().filter(|&&i| case.buses[i].bus_type == BusType::Slack).map(|&i| case.buses[i].id).collect();
            let first = ElementRef::Bus(case.buses[island[0]].id);
            match slacks.len() {
                1 => {}
                0 => out.error(K::NoSlack, first, format!("island containing bus {} has no slack bus", case.buses[island[0]].id)),
                _ => out.error(K::MultipleSlack, ElementRef::Bus(slacks[1]), format!("multiple slack buses in one island: {slacks:?}")),
            }
        }
    }

    out.0
}
