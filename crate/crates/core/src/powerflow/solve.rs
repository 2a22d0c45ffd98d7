use num_complex::Complex64;

use super::newton::{bus_injections, newton_raphson, NodeKind, SolveError, SolveOptions, VoltageSolution};
use super::state::{BranchFlow, GenOutput, OperatingPoint, PowerFlowSolution, SimulationState};
use crate::grid::{branch_admittance, BranchSetting, NetworkCase};

/// Solves the AC power flow for the current overlays without reactive-limit
/// enforcement. Warm-starts from the state's previous solution unless
/// `options.flat_start` is set.
pub fn solve_power_flow(case: &NetworkCase, state: &SimulationState, options: &SolveOptions) -> Result<PowerFlowSolution, SolveError> {
    let op = OperatingPoint::build(case, state);
    let warm = state.solution.solved().map(|s| (s.vm.as_slice(), s.va.as_slice()));
    let v = newton_raphson(&op.problem, warm, options)?;
    Ok(finalize(case, state, &op, &v, &[], Vec::new(), false))
}

/// Solves and then enforces generator reactive limits by re-typing
/// saturated PV buses to PQ at the binding limit.
pub fn solve_with_q_limits(case: &NetworkCase, state: &SimulationState, options: &SolveOptions) -> Result<PowerFlowSolution, SolveError> {
    let mut op = OperatingPoint::build(case, state);
    let warm = state.solution.solved().map(|s| (s.vm.as_slice(), s.va.as_slice()));
    let v = newton_raphson(&op.problem, warm, options)?;
    let (solution, _) = enforce_q_limits(case, state, &mut op, v, options)?;
    Ok(solution)
}

/// Total reactive output the voltage-controlling units at bus `i` must
/// supply, Mvar.
fn controlled_q(case: &NetworkCase, op: &OperatingPoint, s: &[Complex64], i: usize) -> f64 {
    s[i].im * case.base_mva + op.q_load[i] - op.q_fixed[i]
}

fn q_range(case: &NetworkCase, gens: &[usize]) -> (f64, f64) {
    gens.iter().fold((0.0, 0.0), |(lo, hi), &g| (lo + case.generators[g].q_min(), hi + case.generators[g].q_max()))
}

/// Re-types PV buses whose generators would exceed their reactive limits and
/// re-solves, for at most `options.q_limit_rounds` rounds. Returns the final
/// solution and the bus ids switched to PQ. A solution that still violates
/// limits after the last round is returned with `q_limit_warning` set.
pub fn enforce_q_limits(
    case: &NetworkCase,
    state: &SimulationState,
    op: &mut OperatingPoint,
    mut v: VoltageSolution,
    options: &SolveOptions,
) -> Result<(PowerFlowSolution, Vec<u32>), SolveError> {
    let n = case.buses.len();
    let mut limited: Vec<(usize, f64)> = Vec::new();
    let mut warning = false;
    let mut rounds = 0;
    loop {
        let s = bus_injections(&op.problem.ybus, &v.phasors());
        let mut switches = Vec::new();
        for i in 0..n {
            if op.problem.kind[i] != NodeKind::Pv {
                continue;
            }
            let (lo, hi) = q_range(case, &op.controlling[i]);
            let q = controlled_q(case, op, &s, i);
            if q > hi {
                switches.push((i, hi));
            } else if q < lo {
                switches.push((i, lo));
            }
        }
        if switches.is_empty() {
            break;
        }
        if rounds == options.q_limit_rounds {
            warning = true;
            break;
        }
        rounds += 1;
        for &(i, q) in &switches {
            op.problem.kind[i] = NodeKind::Pq;
            op.problem.q_spec[i] += q / case.base_mva;
            limited.push((i, q));
        }
        let warm_opts = SolveOptions { flat_start: false, ..*options };
        v = newton_raphson(&op.problem, Some((&v.vm, &v.va)), &warm_opts)?;
    }
    limited.sort_by_key(|&(i, _)| i);
    let ids: Vec<u32> = limited.iter().map(|&(i, _)| case.buses[i].id).collect();
    Ok((finalize(case, state, op, &v, &limited, ids.clone(), warning), ids))
}

fn distribute_q(case: &NetworkCase, gens: &[usize], total: f64, out: &mut [GenOutput]) {
    let (lo, hi) = q_range(case, gens);
    let span = hi - lo;
    for &g in gens {
        let gen = &case.generators[g];
        out[g].q = if span > 0.0 { gen.q_min() + (total - lo) * (gen.q_max() - gen.q_min()) / span } else { total / gens.len() as f64 };
    }
}

fn finalize(
    case: &NetworkCase,
    state: &SimulationState,
    op: &OperatingPoint,
    v: &VoltageSolution,
    limited: &[(usize, f64)],
    q_limited_buses: Vec<u32>,
    q_limit_warning: bool,
) -> PowerFlowSolution {
    let n = case.buses.len();
    let base = case.base_mva;
    let s = bus_injections(&op.problem.ybus, &v.phasors());
    let mut gen_output = vec![GenOutput::default(); case.generators.len()];
    let mut slack_p = 0.0;

    for (g, (gen, ov)) in case.generators.iter().zip(&state.gens).enumerate() {
        if ov.online && op.problem.kind[op.bus_pos[&gen.bus]] != NodeKind::Dead {
            gen_output[g].p = ov.p_set;
            if let Some(q) = ov.q_fixed {
                gen_output[g].q = q;
            }
        }
    }
    for i in 0..n {
        let gens = &op.controlling[i];
        match op.problem.kind[i] {
            NodeKind::Dead => continue,
            NodeKind::Slack => {
                let p_total = s[i].re * base + op.p_load[i];
                slack_p += p_total;
                let cap: f64 = gens.iter().map(|&g| case.generators[g].p_max()).sum();
                for &g in gens {
                    gen_output[g].p = if cap > 0.0 { p_total * case.generators[g].p_max() / cap } else { p_total / gens.len() as f64 };
                }
                distribute_q(case, gens, controlled_q(case, op, &s, i), &mut gen_output);
            }
            NodeKind::Pv => distribute_q(case, gens, controlled_q(case, op, &s, i), &mut gen_output),
            NodeKind::Pq => {
                if let Some(&(_, q)) = limited.iter().find(|(b, _)| *b == i) {
                    distribute_q(case, gens, q, &mut gen_output);
                }
            }
        }
    }

    let energized = op.energized();
    let branch_flows = compute_branch_flows(case, &state.branch_settings(), &v.phasors(), &energized);
    PowerFlowSolution {
        vm: v.vm.clone(),
        va: v.va.clone(),
        energized,
        branch_flows,
        gen_output,
        slack_p,
        iterations: v.iterations,
        max_mismatch: v.max_mismatch,
        q_limited_buses,
        q_limit_warning,
    }
}

/// Pi-model flows at both ends of every branch, MW / Mvar, with loading as
/// the larger end apparent power over the rating. Open or de-energized
/// branches carry nothing.
pub fn compute_branch_flows(case: &NetworkCase, settings: &[BranchSetting], v: &[Complex64], energized: &[bool]) -> Vec<BranchFlow> {
    let pos: std::collections::HashMap<u32, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    case.branches
        .iter()
        .zip(settings)
        .map(|(br, set)| {
            let (f, t) = (pos[&br.from_bus], pos[&br.to_bus]);
            if !set.closed || !energized[f] || !energized[t] {
                return BranchFlow::default();
            }
            let y = branch_admittance(br.r, br.x, br.b_charging, set.tap);
            let i_from = y.ff * v[f] + y.ft * v[t];
            let i_to = y.tf * v[f] + y.tt * v[t];
            let s_from = v[f] * i_from.conj() * case.base_mva;
            let s_to = v[t] * i_to.conj() * case.base_mva;
            BranchFlow {
                p_from: s_from.re,
                q_from: s_from.im,
                p_to: s_to.re,
                q_to: s_to.im,
                loading_pct: s_from.norm().max(s_to.norm()) / br.mva_limit * 100.0,
            }
        })
        .collect()
}
