//! Independent reference implementations used as test oracles. Nothing here
//! calls into the solver or codec under test.

#![allow(dead_code)]

pub mod gauss_seidel;

use gridops_core::grid::{
    Area, Branch, Bus, BusType, CostCoefficients, Generator, Load, NetworkCase, ShuntStatus, Substation, SwitchStatus, SwitchedShunt, UnitStatus,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// CRC-CCITT one bit at a time: poly 0x1021, init 0xFFFF, MSB first.
pub fn crc_bitwise(bytes: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in bytes {
        for i in (0..8).rev() {
            let bit = (byte >> i) & 1 == 1;
            let top = crc & 0x8000 != 0;
            crc <<= 1;
            if bit != top {
                crc ^= 0x1021;
            }
        }
    }
    crc
}

/// A random, lightly loaded, connected network of `n` buses (2..=20) with
/// one slack, a few PV units with wide reactive limits and small shunts.
pub fn random_case(seed: u64) -> NetworkCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=20usize);
    let buses: Vec<Bus> = (0..n)
        .map(|i| Bus {
            id: i as u32 + 1,
            name: String::new(),
            base_kv: 230.0,
            bus_type: if i == 0 { BusType::Slack } else { BusType::Pq },
            v_limits: [0.9, 1.1],
            substation_id: i as u32 + 1,
        })
        .collect();
    let mut branches = Vec::new();
    let mut add = |rng: &mut ChaCha8Rng, f: usize, t: usize| {
        let id = branches.len() as u32 + 1;
        let transformer = rng.random_bool(0.15);
        branches.push(Branch {
            id,
            from_bus: f as u32 + 1,
            to_bus: t as u32 + 1,
            r: rng.random_range(0.0..0.03),
            x: rng.random_range(0.05..0.25),
            b_charging: if transformer { 0.0 } else { rng.random_range(0.0..0.1) },
            tap_ratio: if transformer { rng.random_range(0.95..1.05) } else { 1.0 },
            tap_limits: [0.9, 1.1],
            tap_step: 0.00625,
            mva_limit: 500.0,
            dc_resistance_ohm: 2.0,
            is_transformer: transformer,
            gic_k_factor: 1.0,
            status: SwitchStatus::Closed,
        });
    };
    for i in 1..n {
        let parent = rng.random_range(0..i);
        add(&mut rng, parent, i);
    }
    for _ in 0..rng.random_range(0..=n / 2) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            add(&mut rng, a, b);
        }
    }
    let mut generators = vec![unit(1, 1, 0.0, 1.0)];
    for i in 1..n {
        if rng.random_bool(0.25) {
            let p = rng.random_range(0.0..40.0);
            let v = rng.random_range(0.98..1.04);
            generators.push(unit(generators.len() as u32 + 1, i as u32 + 1, p, v));
        }
    }
    generators[0].v_setpoint = rng.random_range(0.98..1.04);
    let mut loads = Vec::new();
    for i in 1..n {
        if rng.random_bool(0.7) {
            loads.push(Load {
                id: loads.len() as u32 + 1,
                bus: i as u32 + 1,
                p_nominal: rng.random_range(0.0..30.0),
                q_nominal: rng.random_range(-5.0..12.0),
                served_fraction: 1.0,
                status: SwitchStatus::Closed,
            });
        }
    }
    let mut shunts = Vec::new();
    for i in 1..n {
        if rng.random_bool(0.1) {
            shunts.push(SwitchedShunt { id: shunts.len() as u32 + 1, bus: i as u32 + 1, q_nominal: rng.random_range(-10.0..15.0), status: ShuntStatus::On });
        }
    }
    let substations = (0..n)
        .map(|i| Substation {
            id: i as u32 + 1,
            name: String::new(),
            latitude: 30.0 + rng.random_range(-1.0..1.0),
            longitude: -97.0 + rng.random_range(-1.0..1.0),
            grounding_resistance_ohm: rng.random_range(0.1..2.0),
            area_id: 1,
            bus_ids: vec![i as u32 + 1],
        })
        .collect();
    NetworkCase {
        base_mva: 100.0,
        buses,
        branches,
        generators,
        loads,
        shunts,
        substations,
        areas: vec![Area { id: 1, name: String::new(), scheduled_export: 0.0, frequency_bias: -10.0 }],
    }
}

fn unit(id: u32, bus: u32, p: f64, v: f64) -> Generator {
    Generator {
        id,
        bus,
        status: UnitStatus::Online,
        p_set: p,
        p_limits: [0.0, 500.0],
        q_limits: [-9999.0, 9999.0],
        v_setpoint: v,
        cost_coeffs: CostCoefficients { a: 10.0, b: 20.0, c: 0.01 },
        ramp_rate: 10.0,
    }
}
