//! The quasi-steady-state stepping pipeline.

use serde::{Deserialize, Serialize};

use super::control::{apply_action, ControlAction};
use super::economics::{compute_ace, compute_cost_rate, cost_accrual, frequency_deviation, penalty_point_seconds, score_from_penalty, ScoreWeights};
use super::newton::SolveOptions;
use super::profile::LoadProfile;
use super::solve::solve_with_q_limits;
use super::state::{PowerFlowSolution, SimulationState, SolutionState};
use super::violations::{blackout_violations, detect_violations, ViolationSet};
use crate::gmd::{
    build_dc_network_with, gic_reactive_losses, gmd_event_field, line_emfs, sample_field_contour, solve_gic, thermal_step, ContourGrid, FieldEvent,
    FieldSample, FieldVector, GicSolution, GridSpec, ThermalParams,
};
use crate::grid::{BusType, CaseIndex, NetworkCase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmdConfig {
    pub event: FieldEvent,
    #[serde(default)]
    pub thermal: ThermalParams,
    #[serde(default = "default_contour_dim")]
    pub contour_rows: usize,
    #[serde(default = "default_contour_dim")]
    pub contour_cols: usize,
}

fn default_contour_dim() -> usize {
    24
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub solve: SolveOptions,
    pub weights: ScoreWeights,
    /// System frequency stiffness, MW/Hz.
    pub beta_sys: f64,
    pub profile: LoadProfile,
    pub rng_seed: u64,
    /// AGC correction per step as a fraction of the area's ACE.
    pub agc_gain: f64,
    pub gmd: Option<GmdConfig>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            solve: SolveOptions::default(),
            weights: ScoreWeights::default(),
            beta_sys: 1000.0,
            profile: LoadProfile::flat(),
            rng_seed: 0,
            agc_gain: 0.5,
            gmd: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusMeasurement {
    pub id: u32,
    pub v_pu: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchMeasurement {
    pub id: u32,
    pub p_from: f64,
    pub q_from: f64,
    pub p_to: f64,
    pub q_to: f64,
    pub loading_pct: f64,
    pub status: String,
    pub tap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenMeasurement {
    pub id: u32,
    pub bus: u32,
    pub online: bool,
    pub p: f64,
    pub q: f64,
    pub p_set: f64,
    pub p_target: f64,
    pub p_max: f64,
    pub v_setpoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuntMeasurement {
    pub id: u32,
    pub bus: u32,
    pub on: bool,
    pub q_mvar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadMeasurement {
    pub id: u32,
    pub bus: u32,
    pub closed: bool,
    pub served_fraction: f64,
    pub p: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaMeasurement {
    pub id: u32,
    pub gen: f64,
    pub load: f64,
    pub export: f64,
    pub scheduled_export: f64,
    pub delta_f: f64,
    pub ace: f64,
    pub agc_on: bool,
    pub score: f64,
    pub cost_rate: f64,
    pub cost: f64,
    pub blackout: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityMeasurement {
    /// Σ p_max over online units, MW.
    pub online_mw: f64,
    pub generation_mw: f64,
    pub utilization_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverMeasurement {
    pub converged: bool,
    pub iterations: usize,
    pub max_mismatch: f64,
    pub q_limited_buses: Vec<u32>,
    pub q_limit_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerMeasurement {
    pub id: u32,
    pub neutral_a: f64,
    pub i_eff: f64,
    pub q_loss: f64,
    pub temp_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubstationGic {
    pub id: u32,
    pub neutral_a: f64,
    pub e_north: f64,
    pub e_east: f64,
    pub e_mag: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GmdMeasurement {
    pub field: FieldVector,
    pub transformers: Vec<TransformerMeasurement>,
    pub substations: Vec<SubstationGic>,
    pub contour: ContourGrid,
}

/// Noteworthy things that happened inside one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum EngineEvent {
    Collapsed { reason: String },
    Restored,
    QLimitWarning { buses: Vec<u32> },
    GmdOnset { onset: f64 },
    GmdNetworkError { message: String },
}

/// Immutable snapshot emitted after every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurements {
    pub sim_time: f64,
    pub step_index: u64,
    pub blackout: bool,
    pub load_scale: f64,
    pub score: f64,
    pub cost_rate: f64,
    pub cost_accrued: f64,
    pub delta_f: f64,
    pub buses: Vec<BusMeasurement>,
    pub branches: Vec<BranchMeasurement>,
    pub generators: Vec<GenMeasurement>,
    pub shunts: Vec<ShuntMeasurement>,
    pub loads: Vec<LoadMeasurement>,
    pub areas: Vec<AreaMeasurement>,
    pub violations: ViolationSet,
    pub capacity: CapacityMeasurement,
    pub solver: SolverMeasurement,
    pub gmd: Option<GmdMeasurement>,
    pub events: Vec<EngineEvent>,
}

/// A case plus the fixed configuration needed to step it.
#[derive(Debug, Clone)]
pub struct Engine {
    case: NetworkCase,
    index: CaseIndex,
    config: EngineConfig,
    /// Area position per bus position.
    bus_area: Vec<usize>,
    /// (branch position, from-area position, to-area position) for tie lines.
    ties: Vec<(usize, usize, usize)>,
    /// Generators at slack buses.
    slack_gens: Vec<usize>,
    contour_spec: Option<GridSpec>,
}

/// What the GIC overlay produced for one step.
struct GicStep {
    field: FieldVector,
    solution: Option<GicSolution>,
    q_loss: Vec<f64>,
}

impl Engine {
    pub fn new(case: NetworkCase, config: EngineConfig) -> Self {
        let index = case.index();
        let area_pos = |id: u32| index.area.get(&id).copied().unwrap_or(0);
        let bus_area: Vec<usize> = case.bus_areas().into_iter().map(area_pos).collect();
        let ties = case
            .branches
            .iter()
            .enumerate()
            .filter_map(|(k, br)| {
                let (fa, ta) = (bus_area[index.bus[&br.from_bus]], bus_area[index.bus[&br.to_bus]]);
                (fa != ta).then_some((k, fa, ta))
            })
            .collect();
        let slack_gens = case.generators.iter().enumerate().filter(|(_, g)| case.buses[index.bus[&g.bus]].bus_type == BusType::Slack).map(|(k, _)| k).collect();
        let contour_spec =
            config.gmd.as_ref().map(|g| GridSpec::around(case.substations.iter().map(|s| (s.latitude, s.longitude)), g.contour_rows, g.contour_cols, 0.5));
        Engine { case, index, config, bus_area, ties, slack_gens, contour_spec }
    }

    pub fn case(&self) -> &NetworkCase {
        &self.case
    }

    pub fn index(&self) -> &CaseIndex {
        &self.index
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Solves the initial operating point at `sim_time` from flat start. The
    /// returned snapshot carries step index 0 and no score or cost change.
    pub fn initialize(&self, sim_time: f64) -> (SimulationState, Measurements) {
        let mut state = SimulationState::from_case(&self.case, sim_time);
        state.load_scale = self.config.profile.multiplier(sim_time, 0, self.config.rng_seed);
        let mut events = Vec::new();
        if let Some(g) = &self.config.gmd {
            if g.event.onset == sim_time {
                events.push(EngineEvent::GmdOnset { onset: g.event.onset });
            }
        }
        let gic = self.gic_overlay(&mut state, sim_time, &mut events);
        self.solve(&mut state, true, &mut events);
        state.restore_pending = false;
        let m = self.settle(&mut state, None, gic, events);
        (state, m)
    }

    /// Advances the state by `dt` simulated seconds, applying `actions` (all
    /// of which must be due by the new time) in (activation, sequence) order.
    pub fn step(&self, state: &mut SimulationState, actions: &[ControlAction], dt: f64) -> Measurements {
        assert!(dt > 0.0, "step needs a positive time increment");
        let prev_time = state.sim_time;
        let new_time = prev_time + dt;
        let mut events = Vec::new();

        // (1) commands
        let mut due: Vec<&ControlAction> = actions.iter().collect();
        due.sort_by(|a, b| a.activate_at.total_cmp(&b.activate_at).then(a.seq.cmp(&b.seq)));
        for a in &due {
            apply_action(&self.case, &self.index, state, a);
        }
        if state.is_collapsed() && !due.is_empty() {
            state.restore_pending = true;
        }
        state.sim_time = new_time;
        state.step_index += 1;

        // (2) load profile
        state.load_scale = self.config.profile.multiplier(new_time, state.step_index, self.config.rng_seed);

        // (3) controllers acting on the previous solution, then ramping
        self.run_agc(state);
        self.run_auto_taps(state);
        for (g, ov) in self.case.generators.iter().zip(state.gens.iter_mut()) {
            if ov.online {
                let max_move = g.ramp_rate * dt / 60.0;
                ov.p_set += (ov.p_target - ov.p_set).clamp(-max_move, max_move);
            }
        }

        // (4) GIC overlay and solve
        if let Some(g) = &self.config.gmd {
            if prev_time < g.event.onset && g.event.onset <= new_time {
                events.push(EngineEvent::GmdOnset { onset: g.event.onset });
            }
        }
        let gic = self.gic_overlay(state, new_time, &mut events);
        let was_collapsed = state.is_collapsed();
        if !was_collapsed || state.restore_pending {
            self.solve(state, was_collapsed, &mut events);
            if was_collapsed && !state.is_collapsed() {
                events.push(EngineEvent::Restored);
            }
        }
        state.restore_pending = false;

        // (5, 6) accounting and snapshot
        self.settle(state, Some(dt), gic, events)
    }

    fn solve(&self, state: &mut SimulationState, flat: bool, events: &mut Vec<EngineEvent>) {
        let warm = SolveOptions { flat_start: flat, ..self.config.solve };
        let result = solve_with_q_limits(&self.case, state, &warm).or_else(|e| {
            if flat {
                Err(e)
            } else {
                let cold = SolveOptions { flat_start: true, ..self.config.solve };
                solve_with_q_limits(&self.case, state, &cold)
            }
        });
        match result {
            Ok(sol) => {
                if sol.q_limit_warning {
                    events.push(EngineEvent::QLimitWarning { buses: sol.q_limited_buses.clone() });
                }
                state.solution = SolutionState::Solved(sol);
            }
            Err(e) => {
                events.push(EngineEvent::Collapsed { reason: e.to_string() });
                state.solution = SolutionState::Collapsed;
            }
        }
    }

    fn run_agc(&self, state: &mut SimulationState) {
        if state.is_collapsed() {
            return;
        }
        for (a, area) in state.areas.iter().enumerate() {
            if !area.agc_on {
                continue;
            }
            let correction = -self.config.agc_gain * state.ace[a];
            let units: Vec<usize> = self
                .case
                .generators
                .iter()
                .enumerate()
                .filter(|(k, g)| state.gens[*k].online && !self.slack_gens.contains(k) && self.bus_area[self.index.bus[&g.bus]] == a)
                .map(|(k, _)| k)
                .collect();
            let cap: f64 = units.iter().map(|&k| self.case.generators[k].p_max()).sum();
            if cap <= 0.0 {
                continue;
            }
            for k in units {
                let g = &self.case.generators[k];
                let ov = &mut state.gens[k];
                ov.p_target = (ov.p_target + correction * g.p_max() / cap).clamp(g.p_min(), g.p_max());
            }
        }
    }

    /// Moves each automatic tap one step toward keeping its regulated
    /// (lower-voltage) bus inside the band shrunk by 0.02 pu on each side.
    fn run_auto_taps(&self, state: &mut SimulationState) {
        let Some(sol) = state.solution.solved() else { return };
        let mut moves = Vec::new();
        for (k, (br, ov)) in self.case.branches.iter().zip(&state.branches).enumerate() {
            if !(ov.tap_auto && ov.closed && br.is_transformer) {
                continue;
            }
            let (f, t) = (self.index.bus[&br.from_bus], self.index.bus[&br.to_bus]);
            let (reg, to_side) = if self.case.buses[f].base_kv < self.case.buses[t].base_kv { (f, false) } else { (t, true) };
            let bus = &self.case.buses[reg];
            let v = sol.vm[reg];
            let raise = if v < bus.v_min() + 0.02 {
                true
            } else if v > bus.v_max() - 0.02 {
                false
            } else {
                continue;
            };
            // A lower from-side tap raises the to-side voltage.
            let delta = if raise == to_side { -br.tap_step } else { br.tap_step };
            moves.push((k, (ov.tap + delta).clamp(br.tap_limits[0], br.tap_limits[1])));
        }
        for (k, tap) in moves {
            state.branches[k].tap = tap;
        }
    }

    fn gic_overlay(&self, state: &mut SimulationState, t: f64, events: &mut Vec<EngineEvent>) -> Option<GicStep> {
        state.gic_q_mvar.iter_mut().for_each(|q| *q = 0.0);
        let g = self.config.gmd.as_ref()?;
        let field = gmd_event_field(t, &g.event)?;
        let closed: Vec<bool> = state.branches.iter().map(|b| b.closed).collect();
        let solution = match build_dc_network_with(&self.case, &closed) {
            Ok(net) => {
                let emfs = line_emfs(&net, &g.event, field);
                solve_gic(&net, &emfs).map_err(|e| e.to_string())
            }
            Err(e) => Err(e.to_string()),
        };
        let solution = match solution {
            Ok(s) => Some(s),
            Err(message) => {
                events.push(EngineEvent::GmdNetworkError { message });
                None
            }
        };
        // Losses use the previous voltages: one-step lag.
        let vm: Vec<f64> = match state.solution.solved() {
            Some(s) => s.vm.clone(),
            None => vec![1.0; self.case.buses.len()],
        };
        let q_loss = solution.as_ref().map(|s| gic_reactive_losses(s, &self.case, &vm)).unwrap_or_default();
        if let Some(s) = &solution {
            for (tr, q) in s.transformers.iter().zip(&q_loss) {
                state.gic_q_mvar[tr.bus] += q;
            }
        }
        Some(GicStep { field, solution, q_loss })
    }

    fn settle(&self, state: &mut SimulationState, dt: Option<f64>, gic: Option<GicStep>, events: Vec<EngineEvent>) -> Measurements {
        let case = &self.case;
        let solved = state.solution.solved().cloned();
        let violations = match &solved {
            Some(s) => detect_violations(case, s),
            None => blackout_violations(case),
        };

        let online = |k: usize| state.gens[k].online;
        let cost_rate = match &solved {
            Some(s) => compute_cost_rate((0..case.generators.len()).filter(|&k| online(k)).map(|k| (&case.generators[k].cost_coeffs, s.gen_output[k].p))),
            None => 0.0,
        };
        if let Some(dt) = dt {
            state.penalty += penalty_point_seconds(&violations, dt, &self.config.weights);
            state.score = score_from_penalty(state.penalty);
            state.cost_accrued += cost_accrual(cost_rate, dt);
        }

        let slack_sched: f64 = self.slack_gens.iter().filter(|&&k| online(k)).map(|&k| state.gens[k].p_set).sum();
        state.frequency_deviation = match &solved {
            Some(s) => frequency_deviation(s.slack_p, slack_sched, self.config.beta_sys),
            None => 0.0,
        };
        let areas = self.area_measurements(state, solved.as_ref(), cost_rate);
        for (a, m) in areas.iter().enumerate() {
            state.ace[a] = m.ace;
        }

        // Thermal states advance every step; GIC is zero outside the event.
        let i_eff_by_branch: Vec<(usize, f64)> =
            gic.as_ref().and_then(|g| g.solution.as_ref()).map(|s| s.transformers.iter().map(|t| (t.branch, t.i_eff)).collect()).unwrap_or_default();
        if let (Some(dt), Some(g)) = (dt, &self.config.gmd) {
            let mut current = vec![0.0; case.branches.len()];
            for &(k, i) in &i_eff_by_branch {
                current[k] = i;
            }
            for (k, br) in case.branches.iter().enumerate() {
                if br.is_transformer {
                    state.transformer_rise[k] = thermal_step(state.transformer_rise[k], current[k], dt, &g.thermal);
                }
            }
        }
        let gmd = gic.map(|g| self.gmd_measurement(state, g));

        self.snapshot(state, solved.as_ref(), violations, cost_rate, areas, gmd, events)
    }

    fn area_measurements(&self, state: &SimulationState, solved: Option<&PowerFlowSolution>, cost_rate: f64) -> Vec<AreaMeasurement> {
        let case = &self.case;
        let n_areas = case.areas.len();
        let (mut gen, mut load, mut export) = (vec![0.0; n_areas], vec![0.0; n_areas], vec![0.0; n_areas]);
        if let Some(s) = solved {
            for (k, g) in case.generators.iter().enumerate() {
                gen[self.bus_area[self.index.bus[&g.bus]]] += s.gen_output[k].p;
            }
            for (l, ov) in case.loads.iter().zip(&state.loads) {
                let i = self.index.bus[&l.bus];
                if ov.closed && s.energized[i] {
                    load[self.bus_area[i]] += l.p_nominal * ov.served_fraction * state.load_scale;
                }
            }
            for &(k, fa, ta) in &self.ties {
                export[fa] += s.branch_flows[k].p_from;
                export[ta] += s.branch_flows[k].p_to;
            }
        }
        let df = state.frequency_deviation;
        case.areas
            .iter()
            .enumerate()
            .map(|(a, area)| {
                let sched = state.areas[a].scheduled_export;
                AreaMeasurement {
                    id: area.id,
                    gen: gen[a],
                    load: load[a],
                    export: export[a],
                    scheduled_export: sched,
                    delta_f: df,
                    ace: if solved.is_some() { compute_ace(export[a], sched, area.frequency_bias, df) } else { 0.0 },
                    agc_on: state.areas[a].agc_on,
                    score: state.score,
                    cost_rate,
                    cost: state.cost_accrued,
                    blackout: solved.is_none(),
                }
            })
            .collect()
    }

    fn gmd_measurement(&self, state: &SimulationState, g: GicStep) -> GmdMeasurement {
        let case = &self.case;
        let cfg = self.config.gmd.as_ref().expect("gmd step without gmd config");
        let ambient = cfg.thermal.ambient;
        let transformers = match &g.solution {
            Some(s) => s
                .transformers
                .iter()
                .zip(&g.q_loss)
                .map(|(t, &q)| TransformerMeasurement {
                    id: t.id,
                    neutral_a: t.neutral_a,
                    i_eff: t.i_eff,
                    q_loss: q,
                    temp_c: ambient + state.transformer_rise[t.branch],
                })
                .collect(),
            None => Vec::new(),
        };
        let substations: Vec<SubstationGic> = case
            .substations
            .iter()
            .enumerate()
            .map(|(k, sub)| {
                let e = g.field.scaled(cfg.event.scale_at(sub.latitude));
                SubstationGic {
                    id: sub.id,
                    neutral_a: g.solution.as_ref().map_or(0.0, |s| s.neutral_current[k]),
                    e_north: e.north,
                    e_east: e.east,
                    e_mag: e.magnitude(),
                }
            })
            .collect();
        let samples: Vec<FieldSample> =
            case.substations.iter().zip(&substations).map(|(s, m)| FieldSample { latitude: s.latitude, longitude: s.longitude, value: m.e_mag }).collect();
        let spec = self.contour_spec.expect("contour grid configured with gmd");
        GmdMeasurement { field: g.field, transformers, substations, contour: sample_field_contour(&samples, &spec) }
    }

    #[allow(clippy::too_many_arguments)]
    fn snapshot(
        &self,
        state: &SimulationState,
        solved: Option<&PowerFlowSolution>,
        violations: ViolationSet,
        cost_rate: f64,
        areas: Vec<AreaMeasurement>,
        gmd: Option<GmdMeasurement>,
        events: Vec<EngineEvent>,
    ) -> Measurements {
        let case = &self.case;
        let buses = case
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| BusMeasurement { id: b.id, v_pu: solved.map_or(0.0, |s| s.vm[i]), angle: solved.map_or(0.0, |s| s.va[i]) })
            .collect();
        let branches = case
            .branches
            .iter()
            .enumerate()
            .map(|(k, br)| {
                let f = solved.map(|s| s.branch_flows[k]).unwrap_or_default();
                BranchMeasurement {
                    id: br.id,
                    p_from: f.p_from,
                    q_from: f.q_from,
                    p_to: f.p_to,
                    q_to: f.q_to,
                    loading_pct: f.loading_pct,
                    status: if state.branches[k].closed { "closed" } else { "open" }.into(),
                    tap: state.branches[k].tap,
                }
            })
            .collect();
        let generators: Vec<GenMeasurement> = case
            .generators
            .iter()
            .enumerate()
            .map(|(k, g)| {
                let out = solved.map(|s| s.gen_output[k]).unwrap_or_default();
                let ov = &state.gens[k];
                GenMeasurement {
                    id: g.id,
                    bus: g.bus,
                    online: ov.online,
                    p: out.p,
                    q: out.q,
                    p_set: ov.p_set,
                    p_target: ov.p_target,
                    p_max: g.p_max(),
                    v_setpoint: ov.v_setpoint,
                }
            })
            .collect();
        let shunts = case.shunts.iter().zip(&state.shunts).map(|(s, ov)| ShuntMeasurement { id: s.id, bus: s.bus, on: ov.on, q_mvar: ov.q_mvar }).collect();
        let loads = case
            .loads
            .iter()
            .zip(&state.loads)
            .map(|(l, ov)| {
                let live = ov.closed && solved.is_some_and(|s| s.energized[self.index.bus[&l.bus]]);
                let factor = if live { ov.served_fraction * state.load_scale } else { 0.0 };
                LoadMeasurement {
                    id: l.id,
                    bus: l.bus,
                    closed: ov.closed,
                    served_fraction: ov.served_fraction,
                    p: l.p_nominal * factor,
                    q: l.q_nominal * factor,
                }
            })
            .collect();
        let online_mw: f64 = case.generators.iter().zip(&state.gens).filter(|(_, o)| o.online).map(|(g, _)| g.p_max()).sum();
        let generation_mw: f64 = generators.iter().map(|g| g.p).sum();
        let capacity = CapacityMeasurement { online_mw, generation_mw, utilization_pct: if online_mw > 0.0 { generation_mw / online_mw * 100.0 } else { 0.0 } };
        let solver = match solved {
            Some(s) => SolverMeasurement {
                converged: true,
                iterations: s.iterations,
                max_mismatch: s.max_mismatch,
                q_limited_buses: s.q_limited_buses.clone(),
                q_limit_warning: s.q_limit_warning,
            },
            None => SolverMeasurement { converged: false, iterations: 0, max_mismatch: 0.0, q_limited_buses: Vec::new(), q_limit_warning: false },
        };
        Measurements {
            sim_time: state.sim_time,
            step_index: state.step_index,
            blackout: solved.is_none(),
            load_scale: state.load_scale,
            score: state.score,
            cost_rate,
            cost_accrued: state.cost_accrued,
            delta_f: state.frequency_deviation,
            buses,
            branches,
            generators,
            shunts,
            loads,
            areas,
            violations,
            capacity,
            solver,
            gmd,
            events,
        }
    }
}
