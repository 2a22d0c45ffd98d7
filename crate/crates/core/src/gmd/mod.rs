//! Geomagnetically induced currents: DC network, field events, transformer
//! reactive losses and hot-spot heating, and the contour grid for maps.

pub mod contour;
pub mod field;
pub mod network;

use serde::{Deserialize, Serialize};

pub use contour::{sample_field_contour, ContourGrid, FieldSample, GridSpec};
pub use field::{gmd_event_field, induced_line_voltages, FieldBreakpoint, FieldEvent, FieldVector, LatitudeScaling, LineGeometry};
pub use network::{build_dc_network, build_dc_network_with, solve_gic, DcNetworkError, GicNetwork, GicSolution, TransformerGic};

use crate::grid::NetworkCase;

/// EMF on every DC line of `net` for a field event at `field`, with the
/// event's latitude scaling averaged over each line's two ends.
pub fn line_emfs(net: &GicNetwork, event: &FieldEvent, field: FieldVector) -> Vec<f64> {
    net.lines
        .iter()
        .map(|l| {
            let geometry = LineGeometry { from: l.from_coord, to: l.to_coord };
            let scale = 0.5 * (event.scale_at(l.from_coord.0) + event.scale_at(l.to_coord.0));
            induced_line_voltages(&[geometry], field.scaled(scale))[0]
        })
        .collect()
}

/// `Q = k · V_pu · |I_eff|` per transformer, Mvar, using the high-side bus
/// voltage from `vm` (per bus position).
pub fn gic_reactive_losses(sol: &GicSolution, case: &NetworkCase, vm: &[f64]) -> Vec<f64> {
    sol.transformers.iter().map(|t| case.branches[t.branch].gic_k_factor * vm[t.bus] * t.i_eff).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    /// Steady-state rise per amp of effective current, °C/A.
    pub eta: f64,
    /// Time constant, s.
    pub tau: f64,
    pub ambient: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        ThermalParams { eta: 2.0, tau: 600.0, ambient: 25.0 }
    }
}

/// One explicit step of the first-order hot-spot model:
/// `θ' = θ + Δt·(η·|I| − θ)/τ`.
pub fn thermal_step(theta_rise: f64, i_eff: f64, dt: f64, params: &ThermalParams) -> f64 {
    theta_rise + dt * (params.eta * i_eff.abs() - theta_rise) / params.tau
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::synthetic::gic_fixture_case;

    #[test]
    fn loss_formula() {
        let case = gic_fixture_case();
        let net = build_dc_network(&case).unwrap();
        let mut sol = solve_gic(&net, &[0.0]).unwrap();
        sol.transformers[0].i_eff = 25.0;
        sol.transformers[1].i_eff = 10.0;
        let mut case = case;
        case.branches[sol.transformers[1].branch].gic_k_factor = 1.8;
        let vm = vec![1.0, 0.95, 1.0, 1.0];
        let q = gic_reactive_losses(&sol, &case, &vm);
        assert!((q[0] - 25.0).abs() < 1e-12);
        assert!((q[1] - 17.1).abs() < 1e-12);
    }

    #[test]
    fn thermal_examples() {
        let p = ThermalParams::default();
        assert_eq!(thermal_step(0.0, 25.0, 60.0, &p), 5.0);
        assert_eq!(thermal_step(50.0, 25.0, 60.0, &p), 50.0);
        let cooled = thermal_step(10.0, 0.0, 2.0, &p);
        assert!(cooled < 10.0 && cooled > 0.0);
    }

    #[test]
    fn two_substation_fixture() {
        let case = gic_fixture_case();
        let net = build_dc_network(&case).unwrap();
        assert_eq!(net.n_nodes, 2);
        let sol = solve_gic(&net, &[100.0]).unwrap();
        let (a, b) = (sol.neutral_current[0], sol.neutral_current[1]);
        assert!((a.abs() - 25.0).abs() < 1e-9, "{a}");
        assert!((a + b).abs() < 1e-9);
        assert!(a.signum() != b.signum());
        assert!(sol.transformers.iter().all(|t| (t.i_eff - 25.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn open_line_and_bad_grounding() {
        let mut case = gic_fixture_case();
        case.branches[0].status = crate::grid::SwitchStatus::Open;
        let net = build_dc_network(&case).unwrap();
        assert!(net.lines.is_empty());
        case.substations[0].grounding_resistance_ohm = f64::INFINITY;
        assert_eq!(build_dc_network(&case), Err(DcNetworkError::BadGrounding(case.substations[0].id)));
    }

    #[test]
    fn line_without_transformers_is_isolated() {
        let case = crate::grid::synthetic::two_bus_case();
        assert!(matches!(build_dc_network(&case), Err(DcNetworkError::IsolatedNode(_))));
    }
}
