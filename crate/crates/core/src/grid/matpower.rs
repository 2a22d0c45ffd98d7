//! Import of the bus/gen/branch subset of MATPOWER case files.

use std::collections::BTreeMap;

use super::json::check_integrity;
use super::{
    Area, Branch, Bus, BusType, CaseError, CostCoefficients, Generator, Load, NetworkCase, ShuntStatus, Substation, SwitchStatus, SwitchedShunt, UnitStatus,
    DEFAULT_GIC_K_FACTOR, DEFAULT_GROUNDING_OHM, DEFAULT_V_MAX, DEFAULT_V_MIN,
};

/// Rating used for branches whose `rateA` is zero (unlimited).
const UNLIMITED_MVA: f64 = 9999.0;
/// Grid spacing, degrees, for synthesized substation coordinates.
const GEO_SPACING_DEG: f64 = 0.25;
const GEO_ORIGIN: (f64, f64) = (31.0, -99.0);

#[derive(Debug, Clone)]
pub struct MatpowerImport {
    pub case: NetworkCase,
    /// Non-fatal notes about fields that were dropped or defaulted.
    pub warnings: Vec<String>,
}

struct Row {
    line: usize,
    values: Vec<f64>,
}

struct Matrix {
    name: String,
    rows: Vec<Row>,
}

fn strip_comment(line: &str) -> &str {
    match line.find('%') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64, CaseError> {
    match tok {
        "Inf" | "inf" => Ok(f64::INFINITY),
        "-Inf" | "-inf" => Ok(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().map_err(|_| CaseError::Parse { line, message: format!("invalid number `{tok}`") }),
    }
}

/// Splits the text into scalar assignments and matrix assignments.
fn scan(text: &str) -> Result<(BTreeMap<String, (usize, f64)>, Vec<Matrix>), CaseError> {
    let mut scalars = BTreeMap::new();
    let mut matrices = Vec::new();
    let mut current: Option<(Matrix, Vec<f64>, usize)> = None;

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let mut line = strip_comment(raw).trim();
        if current.is_none() {
            let Some(rest) = line.strip_prefix("mpc.") else { continue };
            let Some((name, value)) = rest.split_once('=') else { continue };
            let name = name.trim().to_string();
            let value = value.trim();
            if let Some(body) = value.strip_prefix('[') {
                current = Some((Matrix { name, rows: Vec::new() }, Vec::new(), line_no));
                line = body;
            } else {
                let value = value.trim_end_matches(';').trim();
                if let Ok(v) = value.parse::<f64>() {
                    scalars.insert(name, (line_no, v));
                }
                continue;
            }
        }
        let (matrix, pending, start) = current.as_mut().unwrap();
        let (body, closed) = match line.find(']') {
            Some(i) => (&line[..i], true),
            None => (line, false),
        };
        for (k, chunk) in body.split(';').enumerate() {
            if k > 0 && !pending.is_empty() {
                matrix.rows.push(Row { line: *start, values: std::mem::take(pending) });
            }
            for tok in chunk.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                if pending.is_empty() {
                    *start = line_no;
                }
                pending.push(parse_number(tok, line_no)?);
            }
        }
        // A newline also ends a row.
        if !pending.is_empty() {
            matrix.rows.push(Row { line: *start, values: std::mem::take(pending) });
        }
        if closed {
            let (matrix, _, _) = current.take().unwrap();
            matrices.push(matrix);
        }
    }
    if let Some((matrix, _, start)) = current {
        return Err(CaseError::Parse { line: start, message: format!("matrix mpc.{} is never closed", matrix.name) });
    }
    Ok((scalars, matrices))
}

fn require<'a>(matrices: &'a [Matrix], name: &str) -> Result<&'a [Row], CaseError> {
    matrices.iter().find(|m| m.name == name).map(|m| m.rows.as_slice()).ok_or_else(|| CaseError::Parse { line: 0, message: format!("missing mpc.{name}") })
}

fn check_width(rows: &[Row], name: &str, min: usize) -> Result<(), CaseError> {
    for (i, row) in rows.iter().enumerate() {
        if row.values.len() < min {
            return Err(CaseError::Parse {
                line: row.line,
                message: format!("mpc.{name} row {} has {} columns, expected at least {min}", i + 1, row.values.len()),
            });
        }
    }
    Ok(())
}

/// Imports `mpc.baseMVA`, `mpc.bus`, `mpc.gen`, `mpc.branch` and optionally
/// `mpc.gencost` (polynomial model only). Fields the native schema needs but
/// MATPOWER lacks are filled with defaults: one substation per bus laid out on
/// a grid by bus id, 0.5 Ω grounding, DC resistance from the per-unit
/// resistance, unit GIC k-factor.
pub fn import_matpower_subset(text: &str) -> Result<MatpowerImport, CaseError> {
    let (scalars, matrices) = scan(text)?;
    let mut warnings = Vec::new();
    let base_mva = scalars.get("baseMVA").map(|&(_, v)| v).ok_or_else(|| CaseError::Parse { line: 0, message: "missing mpc.baseMVA".into() })?;

    let bus_rows = require(&matrices, "bus")?;
    let gen_rows = require(&matrices, "gen")?;
    let branch_rows = require(&matrices, "branch")?;
    check_width(bus_rows, "bus", 13)?;
    check_width(gen_rows, "gen", 10)?;
    check_width(branch_rows, "branch", 11)?;
    let gencost = matrices.iter().find(|m| m.name == "gencost").map(|m| m.rows.as_slice());
    for m in &matrices {
        if !matches!(m.name.as_str(), "bus" | "gen" | "branch" | "gencost") {
            warnings.push(format!("mpc.{} ignored", m.name));
        }
    }

    let mut buses = Vec::new();
    let mut loads = Vec::new();
    let mut shunts = Vec::new();
    let mut bus_area = BTreeMap::new();
    let mut area_load: BTreeMap<u32, f64> = BTreeMap::new();
    for row in bus_rows {
        let c = &row.values;
        let id = c[0] as u32;
        let bus_type = match c[1] as i64 {
            3 => BusType::Slack,
            2 => BusType::Pv,
            1 => BusType::Pq,
            other => {
                warnings.push(format!("bus {id}: type {other} imported as PQ"));
                BusType::Pq
            }
        };
        let base_kv = if c[9] > 0.0 {
            c[9]
        } else {
            warnings.push(format!("bus {id}: baseKV missing, assumed 100 kV"));
            100.0
        };
        let (v_max, v_min) = (c[11], c[12]);
        let v_limits = if v_min > 0.0 && v_min < v_max { [v_min, v_max] } else { [DEFAULT_V_MIN, DEFAULT_V_MAX] };
        let area = c[6] as u32;
        bus_area.insert(id, area);
        *area_load.entry(area).or_default() += c[2];
        buses.push(Bus { id, name: format!("Bus {id}"), base_kv, bus_type, v_limits, substation_id: id });
        if c[2] != 0.0 || c[3] != 0.0 {
            loads.push(Load { id: loads.len() as u32 + 1, bus: id, p_nominal: c[2], q_nominal: c[3], served_fraction: 1.0, status: SwitchStatus::Closed });
        }
        if c[5] != 0.0 {
            shunts.push(SwitchedShunt { id: shunts.len() as u32 + 1, bus: id, q_nominal: c[5], status: ShuntStatus::On });
        }
        if c[4] != 0.0 {
            warnings.push(format!("bus {id}: shunt conductance Gs={} unsupported, dropped", c[4]));
        }
    }

    let kv: BTreeMap<u32, f64> = buses.iter().map(|b| (b.id, b.base_kv)).collect();

    let mut generators = Vec::new();
    for (i, row) in gen_rows.iter().enumerate() {
        let c = &row.values;
        let id = i as u32 + 1;
        let (p_min, p_max) = (c[9], c[8]);
        let mut p_set = c[1];
        let status = if c[7] > 0.0 { UnitStatus::Online } else { UnitStatus::Offline };
        if status == UnitStatus::Online && !(p_min <= p_set && p_set <= p_max) {
            warnings.push(format!("generator {id}: Pg {p_set} clamped into [{p_min}, {p_max}]"));
            p_set = p_set.clamp(p_min, p_max.max(p_min));
        }
        let ramp_rate = c.get(16).copied().filter(|r| *r > 0.0).unwrap_or((p_max / 5.0).max(1.0));
        let cost_coeffs = match gencost.and_then(|g| g.get(i)) {
            Some(cost) => polynomial_cost(&cost.values, id, &mut warnings),
            None => CostCoefficients::default(),
        };
        generators.push(Generator {
            id,
            bus: c[0] as u32,
            status,
            p_set,
            p_limits: [p_min, p_max],
            q_limits: [c[4], c[3]],
            v_setpoint: c[5],
            cost_coeffs,
            ramp_rate,
        });
    }

    let mut branches = Vec::new();
    for (i, row) in branch_rows.iter().enumerate() {
        let c = &row.values;
        let id = i as u32 + 1;
        let (from, to) = (c[0] as u32, c[1] as u32);
        let ratio = c[8];
        if c[9] != 0.0 {
            warnings.push(format!("branch {id}: phase shift {} deg unsupported, dropped", c[9]));
        }
        let is_transformer = ratio != 0.0 || kv.get(&from) != kv.get(&to);
        let tap = if ratio == 0.0 { 1.0 } else { ratio };
        let mva_limit = if c[5] > 0.0 { c[5] } else { UNLIMITED_MVA };
        let high_kv = kv.get(&from).copied().unwrap_or(1.0).max(kv.get(&to).copied().unwrap_or(1.0));
        branches.push(Branch {
            id,
            from_bus: from,
            to_bus: to,
            r: c[2],
            x: c[3],
            b_charging: c[4],
            tap_ratio: tap,
            tap_limits: [tap.min(0.9), tap.max(1.1)],
            tap_step: 0.00625,
            mva_limit,
            dc_resistance_ohm: c[2] * high_kv * high_kv / base_mva,
            is_transformer,
            gic_k_factor: DEFAULT_GIC_K_FACTOR,
            status: if c[10] > 0.0 { SwitchStatus::Closed } else { SwitchStatus::Open },
        });
    }

    let mut ids: Vec<u32> = buses.iter().map(|b| b.id).collect();
    ids.sort_unstable();
    let cols = (ids.len() as f64).sqrt().ceil().max(1.0) as usize;
    let substations = ids
        .iter()
        .enumerate()
        .map(|(k, &id)| Substation {
            id,
            name: format!("Substation {id}"),
            latitude: GEO_ORIGIN.0 - (k / cols) as f64 * GEO_SPACING_DEG,
            longitude: GEO_ORIGIN.1 + (k % cols) as f64 * GEO_SPACING_DEG,
            grounding_resistance_ohm: DEFAULT_GROUNDING_OHM,
            area_id: bus_area[&id],
            bus_ids: vec![id],
        })
        .collect();
    let areas =
        area_load.iter().map(|(&id, &load)| Area { id, name: format!("Area {id}"), scheduled_export: 0.0, frequency_bias: -(0.01 * load).max(1.0) }).collect();

    let case = NetworkCase { base_mva, buses, branches, generators, loads, shunts, substations, areas };
    check_integrity(&case)?;
    Ok(MatpowerImport { case, warnings })
}

fn polynomial_cost(row: &[f64], id: u32, warnings: &mut Vec<String>) -> CostCoefficients {
    if row.first().copied() != Some(2.0) || row.len() < 4 {
        warnings.push(format!("generator {id}: non-polynomial cost model ignored"));
        return CostCoefficients::default();
    }
    let n = row[3] as usize;
    let coeffs = &row[4..row.len().min(4 + n)];
    // Highest order first.
    let at = |power: usize| -> f64 {
        if power < coeffs.len() {
            coeffs[coeffs.len() - 1 - power]
        } else {
            0.0
        }
    };
    if coeffs.len() > 3 {
        warnings.push(format!("generator {id}: cost terms above quadratic dropped"));
    }
    CostCoefficients { a: at(0), b: at(1), c: at(2) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_type_maps_from_column_value_three() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n 1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n 2 1 50 10 0 0 1 1 0 230 1 1.1 0.9;\n];\n\
                    mpc.gen = [\n 1 0 0 100 -100 1.02 100 1 200 0;\n];\nmpc.branch = [\n 1 2 0.01 0.1 0 100 100 100 0 0 1 -360 360;\n];\n";
        let import = import_matpower_subset(text).unwrap();
        assert_eq!(import.case.buses[0].bus_type, BusType::Slack);
        assert_eq!(import.case.buses[1].bus_type, BusType::Pq);
        assert_eq!(import.case.loads.len(), 1);
        let br = &import.case.branches[0];
        assert!(!br.is_transformer);
        assert!((br.dc_resistance_ohm - 0.01 * 230.0 * 230.0 / 100.0).abs() < 1e-12);
        assert_eq!(import.case.substations[0].grounding_resistance_ohm, 0.5);
    }

    #[test]
    fn truncated_row_cites_line() {
        let text = "mpc.baseMVA = 100;\nmpc.bus = [\n 1 3 0 0 0 0 1 1 0 230 1 1.1 0.9;\n 2 1 50 10 0 0 1;\n];\n\
                    mpc.gen = [\n 1 0 0 100 -100 1.02 100 1 200 0;\n];\nmpc.branch = [\n 1 2 0.01 0.1 0 100 100 100 0 0 1;\n];\n";
        match import_matpower_subset(text).unwrap_err() {
            CaseError::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("row 2"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gencost_polynomial_maps_to_coefficients() {
        let mut w = Vec::new();
        let c = polynomial_cost(&[2.0, 0.0, 0.0, 3.0, 0.11, 5.0, 150.0], 1, &mut w);
        assert_eq!(c, CostCoefficients { a: 150.0, b: 5.0, c: 0.11 });
        assert!(w.is_empty());
    }
}
