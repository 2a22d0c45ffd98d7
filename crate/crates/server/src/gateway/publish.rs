use gridops_core::clock::format_clock;
use gridops_core::powerflow::Measurements;
use serde_json::json;
use serde_json::value::RawValue;

use crate::bus::to_raw;

/// Retained topics and payloads for one step. Buses, branches and units are
/// batched into one envelope each; GIC topics exist only while the event is
/// active.
pub fn topic_payloads(m: &Measurements) -> Vec<(String, Box<RawValue>)> {
    let mut out = Vec::with_capacity(m.areas.len() + 12);
    for a in &m.areas {
        out.push((format!("data/area/{}", a.id), to_raw(a)));
    }
    out.push(("data/bus/all".into(), to_raw(&m.buses)));
    out.push(("data/branch/all".into(), to_raw(&m.branches)));
    out.push(("data/gen/all".into(), to_raw(&m.generators)));
    out.push(("data/shunt/all".into(), to_raw(&m.shunts)));
    out.push(("data/load/all".into(), to_raw(&m.loads)));
    out.push(("data/violations".into(), to_raw(&m.violations)));
    out.push((
        "data/system".into(),
        to_raw(&json!({
            "sim_time": m.sim_time,
            "clock": format_clock(m.sim_time),
            "step": m.step_index,
            "blackout": m.blackout,
            "score": m.score,
            "cost_rate": m.cost_rate,
            "cost": m.cost_accrued,
            "delta_f": m.delta_f,
            "load_scale": m.load_scale,
            "capacity": m.capacity,
            "solver": m.solver,
        })),
    ));
    if let Some(g) = &m.gmd {
        out.push(("data/gmd/contour".into(), to_raw(&g.contour)));
        let transformers: Vec<_> =
            g.transformers.iter().map(|t| json!({ "id": t.id, "neutral_A": t.neutral_a, "temp_C": t.temp_c, "i_eff": t.i_eff, "q_loss": t.q_loss })).collect();
        out.push(("data/gmd/transformers".into(), to_raw(&transformers)));
        out.push((
            "data/gmd/field".into(),
            to_raw(&json!({
                "north": g.field.north,
                "east": g.field.east,
                "magnitude": g.field.magnitude(),
                "substations": g.substations,
            })),
        ));
    }
    out
}
