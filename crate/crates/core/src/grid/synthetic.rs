//! Deterministic synthetic cases: small fixtures and a scalable grid-shaped
//! network for capacity testing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Area, Branch, Bus, BusType, CostCoefficients, Generator, Load, NetworkCase, ShuntStatus, Substation, SwitchStatus, SwitchedShunt, UnitStatus};

fn bus(id: u32, base_kv: f64, bus_type: BusType, substation_id: u32) -> Bus {
    Bus { id, name: format!("Bus {id}"), base_kv, bus_type, v_limits: [0.95, 1.05], substation_id }
}

fn line(id: u32, from_bus: u32, to_bus: u32, r: f64, x: f64, b: f64, mva_limit: f64, dc_ohm: f64) -> Branch {
    Branch {
        id,
        from_bus,
        to_bus,
        r,
        x,
        b_charging: b,
        tap_ratio: 1.0,
        tap_limits: [0.9, 1.1],
        tap_step: 0.00625,
        mva_limit,
        dc_resistance_ohm: dc_ohm,
        is_transformer: false,
        gic_k_factor: 1.0,
        status: SwitchStatus::Closed,
    }
}

/// Slack bus 1 feeding a 50 MW + 20 Mvar load at bus 2 over a lossless
/// x = 0.1 pu line, 100 MVA base.
pub fn two_bus_case() -> NetworkCase {
    NetworkCase {
        base_mva: 100.0,
        buses: vec![bus(1, 345.0, BusType::Slack, 1), bus(2, 345.0, BusType::Pq, 2)],
        branches: vec![line(1, 1, 2, 0.0, 0.1, 0.0, 200.0, 9.0)],
        generators: vec![Generator {
            id: 1,
            bus: 1,
            status: UnitStatus::Online,
            p_set: 50.0,
            p_limits: [0.0, 200.0],
            q_limits: [-100.0, 100.0],
            v_setpoint: 1.0,
            cost_coeffs: CostCoefficients { a: 100.0, b: 20.0, c: 0.01 },
            ramp_rate: 20.0,
        }],
        loads: vec![Load { id: 1, bus: 2, p_nominal: 50.0, q_nominal: 20.0, served_fraction: 1.0, status: SwitchStatus::Closed }],
        shunts: vec![],
        substations: vec![
            Substation { id: 1, name: "North".into(), latitude: 30.0, longitude: -97.0, grounding_resistance_ohm: 0.5, area_id: 1, bus_ids: vec![1] },
            Substation { id: 2, name: "South".into(), latitude: 30.0, longitude: -96.0, grounding_resistance_ohm: 0.5, area_id: 1, bus_ids: vec![2] },
        ],
        areas: vec![Area { id: 1, name: "Area 1".into(), scheduled_export: 0.0, frequency_bias: -20.0 }],
    }
}

/// Two substations 0.5 Ω to ground joined by one 345 kV line of 9 Ω per
/// phase (3 Ω for the three phases in parallel). Each substation has a
/// step-down transformer with zero winding resistance, so the DC network
/// reduces to the two neutral nodes. Line is branch position 0.
pub fn gic_fixture_case() -> NetworkCase {
    let mut case = two_bus_case();
    case.buses.push(bus(3, 20.0, BusType::Pq, 1));
    case.buses.push(bus(4, 20.0, BusType::Pq, 2));
    for (id, high, low) in [(2, 1, 3), (3, 2, 4)] {
        let mut t = line(id, high, low, 0.0, 0.08, 0.0, 300.0, 0.0);
        t.is_transformer = true;
        case.branches.push(t);
    }
    case.substations[0].bus_ids = vec![1, 3];
    case.substations[1].bus_ids = vec![2, 4];
    case
}

const SPACING_DEG: f64 = 0.2;
const KM_PER_DEG: f64 = 111.2;

/// Grid-shaped transmission network of `n` buses: 230 kV buses on a square
/// lattice with a 115 kV step-down bus in every tenth position, generation at
/// every eighth bus, loads everywhere, four areas by quadrant.
pub fn generate_case(n: usize, seed: u64) -> NetworkCase {
    assert!(n >= 2, "synthetic case needs at least two buses");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).sqrt().ceil() as usize;
    let pos = |k: usize| (k / side, k % side);
    let quadrant = |k: usize| -> u32 {
        let (r, c) = pos(k);
        if n < 16 {
            1
        } else {
            1 + (2 * r / side) as u32 * 2 + (2 * c / side) as u32
        }
    };
    let low_side = |k: usize| k % 10 == 5;
    let slack = n / 2 - (n / 2) % 10;

    let mut buses = Vec::with_capacity(n);
    let mut substations = Vec::new();
    for k in 0..n {
        let id = k as u32 + 1;
        let (sub_id, kv) = if low_side(k) { (k as u32, 115.0) } else { (id, 230.0) };
        let bus_type = if k == slack {
            BusType::Slack
        } else if k % 8 == 0 {
            BusType::Pv
        } else {
            BusType::Pq
        };
        buses.push(bus(id, kv, bus_type, sub_id));
        if !low_side(k) {
            let (r, c) = pos(k);
            substations.push(Substation {
                id,
                name: format!("Substation {id}"),
                latitude: 33.0 - r as f64 * SPACING_DEG,
                longitude: -101.0 + c as f64 * SPACING_DEG,
                grounding_resistance_ohm: rng.random_range(0.2..1.0),
                area_id: quadrant(k),
                bus_ids: vec![],
            });
        }
    }

    let mut branches = Vec::new();
    let add_line = |branches: &mut Vec<Branch>, a: usize, b: usize, km: f64, rng: &mut ChaCha8Rng| {
        let x = 0.0005 * km * rng.random_range(0.8..1.2);
        let r = x / 10.0;
        let id = branches.len() as u32 + 1;
        let dc = r * 230.0 * 230.0 / 100.0;
        branches.push(line(id, a as u32 + 1, b as u32 + 1, r, x, 0.0002 * km, 600.0, dc));
    };
    let high = |k: usize| if low_side(k) { k - 1 } else { k };
    let step_km = SPACING_DEG * KM_PER_DEG;
    for k in 0..n {
        let (r, c) = pos(k);
        if low_side(k) {
            let id = branches.len() as u32 + 1;
            branches.push(Branch { tap_ratio: 1.0, is_transformer: true, gic_k_factor: 0.5, ..line(id, k as u32, k as u32 + 1, 0.002, 0.04, 0.0, 400.0, 0.3) });
            continue;
        }
        if c + 1 < side && k + 1 < n && !low_side(k + 1) {
            add_line(&mut branches, k, k + 1, step_km, &mut rng);
        } else if c + 2 < side && k + 2 < n && low_side(k + 1) {
            add_line(&mut branches, k, k + 2, 2.0 * step_km, &mut rng);
        }
        if r + 1 < side && k + side < n {
            add_line(&mut branches, k, high(k + side), step_km, &mut rng);
        }
    }
    // A few diagonal chords for meshing.
    for k in 0..n {
        let (r, c) = pos(k);
        if r + 1 < side && c + 1 < side && k + side + 1 < n && rng.random_bool(0.05) {
            let (a, b) = (high(k), high(k + side + 1));
            if a != b {
                add_line(&mut branches, a, b, step_km * std::f64::consts::SQRT_2, &mut rng);
            }
        }
    }

    let mut loads = Vec::with_capacity(n);
    let mut total_load = 0.0;
    let mut area_load = [0.0f64; 5];
    for k in 0..n {
        let p: f64 = rng.random_range(5.0..25.0);
        let q = p * rng.random_range(0.2..0.4);
        total_load += p;
        area_load[quadrant(high(k)) as usize] += p;
        loads.push(Load { id: k as u32 + 1, bus: k as u32 + 1, p_nominal: p, q_nominal: q, served_fraction: 1.0, status: SwitchStatus::Closed });
    }

    let gen_buses: Vec<usize> = (0..n).filter(|&k| k % 8 == 0 || k == slack).collect();
    let capacity_each = 1.25 * total_load / gen_buses.len() as f64;
    let dispatch_each = 0.97 * total_load / gen_buses.len() as f64;
    let generators = gen_buses
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let p_max = capacity_each * rng.random_range(0.9..1.1);
            Generator {
                id: i as u32 + 1,
                bus: k as u32 + 1,
                status: UnitStatus::Online,
                p_set: dispatch_each.min(p_max),
                p_limits: [0.0, p_max],
                q_limits: [-0.3 * p_max, 0.6 * p_max],
                v_setpoint: 1.02,
                cost_coeffs: CostCoefficients { a: 100.0, b: rng.random_range(15.0..40.0), c: rng.random_range(0.002..0.01) },
                ramp_rate: p_max / 5.0,
            }
        })
        .collect();

    let shunts = (0..n)
        .filter(|k| k % 20 == 3)
        .enumerate()
        .map(|(i, k)| SwitchedShunt { id: i as u32 + 1, bus: k as u32 + 1, q_nominal: 20.0, status: ShuntStatus::On })
        .collect();

    let area_ids: Vec<u32> = if n < 16 { vec![1] } else { vec![1, 2, 3, 4] };
    let areas = area_ids
        .into_iter()
        .map(|id| Area { id, name: format!("Area {id}"), scheduled_export: 0.0, frequency_bias: -(0.01 * area_load[id as usize]).max(1.0) })
        .collect();

    let mut case = NetworkCase { base_mva: 100.0, buses, branches, generators, loads, shunts, substations, areas };
    case.normalize_substation_members();
    case
}
