//! Gauss–Seidel power flow on a dense admittance matrix built from the case
//! with textbook pi-model stamps. Slow, simple, and independent of the
//! Newton solver.

use std::collections::HashMap;

use gridops_core::grid::{BusType, NetworkCase, ShuntStatus, UnitStatus};
use num_complex::Complex64;

pub struct Oracle {
    pub v: Vec<Complex64>,
    pub sweeps: usize,
    pub y: Vec<Vec<Complex64>>,
}

impl Oracle {
    pub fn vm(&self, i: usize) -> f64 {
        self.v[i].norm()
    }

    pub fn va(&self, i: usize) -> f64 {
        self.v[i].arg()
    }

    /// Complex power entering a branch at its from end, MVA.
    pub fn from_flow(&self, case: &NetworkCase, k: usize) -> Complex64 {
        let br = &case.branches[k];
        let pos = positions(case);
        let (f, t) = (pos[&br.from_bus], pos[&br.to_bus]);
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let a = br.tap_ratio;
        let i = (ys + Complex64::new(0.0, br.b_charging / 2.0)) / (a * a) * self.v[f] - ys / a * self.v[t];
        self.v[f] * i.conj() * case.base_mva
    }
}

fn positions(case: &NetworkCase) -> HashMap<u32, usize> {
    case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
}

pub fn admittance(case: &NetworkCase) -> Vec<Vec<Complex64>> {
    let n = case.buses.len();
    let pos = positions(case);
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for br in case.branches.iter().filter(|b| b.status.is_closed()) {
        let (f, t) = (pos[&br.from_bus], pos[&br.to_bus]);
        let ys = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        let half_b = Complex64::new(0.0, br.b_charging / 2.0);
        let a = br.tap_ratio;
        y[f][f] += (ys + half_b) / (a * a);
        y[t][t] += ys + half_b;
        y[f][t] -= ys / a;
        y[t][f] -= ys / a;
    }
    for sh in case.shunts.iter().filter(|s| s.status == ShuntStatus::On) {
        let i = pos[&sh.bus];
        y[i][i] += Complex64::new(0.0, sh.q_nominal / case.base_mva);
    }
    y
}

/// Iterates to a voltage update below `tol` (pu). Generators are assumed to
/// have unlimited reactive range; loads are constant power at their nominal
/// values times `served_fraction`.
pub fn solve(case: &NetworkCase, tol: f64, max_sweeps: usize) -> Option<Oracle> {
    let n = case.buses.len();
    let pos = positions(case);
    let y = admittance(case);
    let base = case.base_mva;
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut v_target: Vec<Option<f64>> = vec![None; n];
    for g in case.generators.iter().filter(|g| g.status == UnitStatus::Online) {
        let i = pos[&g.bus];
        p[i] += g.p_set / base;
        v_target[i] = Some(g.v_setpoint);
    }
    for l in case.loads.iter().filter(|l| l.status.is_closed()) {
        let i = pos[&l.bus];
        p[i] -= l.p_nominal * l.served_fraction / base;
        q[i] -= l.q_nominal * l.served_fraction / base;
    }
    let slack: Vec<bool> = case.buses.iter().map(|b| b.bus_type == BusType::Slack).collect();
    let mut v: Vec<Complex64> = (0..n).map(|i| Complex64::new(v_target[i].unwrap_or(1.0), 0.0)).collect();

    for sweep in 1..=max_sweeps {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            if slack[i] {
                continue;
            }
            let sum: Complex64 = (0..n).filter(|&k| k != i).map(|k| y[i][k] * v[k]).sum();
            let qi = match v_target[i] {
                Some(_) => -(v[i].conj() * (sum + y[i][i] * v[i])).im,
                None => q[i],
            };
            let s = Complex64::new(p[i], qi);
            let mut next = (s.conj() / v[i].conj() - sum) / y[i][i];
            if let Some(vt) = v_target[i] {
                next = next / next.norm() * vt;
            }
            delta = delta.max((next - v[i]).norm());
            v[i] = next;
        }
        if !delta.is_finite() {
            return None;
        }
        if delta < tol {
            return Some(Oracle { v, sweeps: sweep, y });
        }
    }
    None
}
