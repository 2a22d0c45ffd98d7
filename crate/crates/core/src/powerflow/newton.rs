//! Newton–Raphson power flow in polar coordinates.
//!
//! The Jacobian is rebuilt every iteration and factored with a sparse LU.

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use crate::grid::Admittance;

/// Role of a bus in one power-flow solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Slack,
    Pv,
    Pq,
    /// Not connected to any energized slack; excluded from the solve.
    Dead,
}

/// Everything the Newton iteration needs: topology, bus roles, specified
/// injections in per-unit and voltage targets.
#[derive(Debug, Clone)]
pub struct PowerFlowProblem {
    pub ybus: Admittance,
    pub kind: Vec<NodeKind>,
    /// Voltage magnitude target for slack and PV buses.
    pub v_set: Vec<f64>,
    /// Specified net active injection, pu (ignored at slack buses).
    pub p_spec: Vec<f64>,
    /// Specified net reactive injection, pu (used at PQ buses only).
    pub q_spec: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Largest acceptable power mismatch, pu.
    pub tolerance: f64,
    pub max_iter: usize,
    pub flat_start: bool,
    /// Rounds of PV→PQ switching allowed when enforcing reactive limits.
    pub q_limit_rounds: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tolerance: 1e-6, max_iter: 25, flat_start: false, q_limit_rounds: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoltageSolution {
    pub vm: Vec<f64>,
    pub va: Vec<f64>,
    pub iterations: usize,
    pub max_mismatch: f64,
}

impl VoltageSolution {
    pub fn phasors(&self) -> Vec<Complex64> {
        self.vm.iter().zip(&self.va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("power flow did not converge after {iterations} iterations (mismatch {mismatch:.3e} pu)")]
    NonConvergence { iterations: usize, mismatch: f64 },
    #[error("singular jacobian at iteration {0}")]
    Singular(usize),
}

/// Complex power injections `V ⊙ conj(Y V)` at every bus.
pub fn bus_injections(ybus: &Admittance, v: &[Complex64]) -> Vec<Complex64> {
    let current = ybus.mul_vec(v);
    v.iter().zip(&current).map(|(v, i)| v * i.conj()).collect()
}

struct Layout {
    theta: Vec<Option<usize>>,
    vmag: Vec<Option<usize>>,
    size: usize,
}

impl Layout {
    fn new(kind: &[NodeKind]) -> Self {
        let mut theta = vec![None; kind.len()];
        let mut vmag = vec![None; kind.len()];
        let mut n_theta = 0;
        for (i, k) in kind.iter().enumerate() {
            if matches!(k, NodeKind::Pv | NodeKind::Pq) {
                theta[i] = Some(n_theta);
                n_theta += 1;
            }
        }
        let mut n_v = 0;
        for (i, k) in kind.iter().enumerate() {
            if *k == NodeKind::Pq {
                vmag[i] = Some(n_theta + n_v);
                n_v += 1;
            }
        }
        Layout { theta, vmag, size: n_theta + n_v }
    }
}

fn mismatch(problem: &PowerFlowProblem, layout: &Layout, s: &[Complex64]) -> Vec<f64> {
    let mut f = vec![0.0; layout.size];
    for (i, si) in s.iter().enumerate() {
        if let Some(r) = layout.theta[i] {
            f[r] = problem.p_spec[i] - si.re;
        }
        if let Some(r) = layout.vmag[i] {
            f[r] = problem.q_spec[i] - si.im;
        }
    }
    f
}

fn jacobian(problem: &PowerFlowProblem, layout: &Layout, vm: &[f64], va: &[f64], s: &[Complex64]) -> Vec<Triplet<usize, usize, f64>> {
    let mut t = Vec::with_capacity(4 * problem.ybus.nnz());
    for i in 0..vm.len() {
        let (p_row, q_row) = (layout.theta[i], layout.vmag[i]);
        if p_row.is_none() && q_row.is_none() {
            continue;
        }
        for (k, y) in problem.ybus.row(i) {
            let (g, b) = (y.re, y.im);
            if k == i {
                let (p, q) = (s[i].re, s[i].im);
                let v2 = vm[i] * vm[i];
                if let Some(r) = p_row {
                    t.push(Triplet::new(r, r, -q - b * v2));
                    if let Some(c) = layout.vmag[i] {
                        t.push(Triplet::new(r, c, p / vm[i] + g * vm[i]));
                    }
                }
                if let Some(r) = q_row {
                    if let Some(c) = layout.theta[i] {
                        t.push(Triplet::new(r, c, p - g * v2));
                    }
                    t.push(Triplet::new(r, r, q / vm[i] - b * vm[i]));
                }
            } else {
                let angle = va[i] - va[k];
                let (sin, cos) = angle.sin_cos();
                let gs_bc = g * sin - b * cos;
                let gc_bs = g * cos + b * sin;
                if let Some(r) = p_row {
                    if let Some(c) = layout.theta[k] {
                        t.push(Triplet::new(r, c, vm[i] * vm[k] * gs_bc));
                    }
                    if let Some(c) = layout.vmag[k] {
                        t.push(Triplet::new(r, c, vm[i] * gc_bs));
                    }
                }
                if let Some(r) = q_row {
                    if let Some(c) = layout.theta[k] {
                        t.push(Triplet::new(r, c, -vm[i] * vm[k] * gc_bs));
                    }
                    if let Some(c) = layout.vmag[k] {
                        t.push(Triplet::new(r, c, vm[i] * gs_bc));
                    }
                }
            }
        }
    }
    t
}

fn norm_inf(f: &[f64]) -> f64 {
    f.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Solves the problem from `initial` (magnitudes and angles per bus). Slack
/// and PV magnitudes are reset to their targets; dead buses are reported at
/// zero voltage.
pub fn newton_raphson(problem: &PowerFlowProblem, initial: Option<(&[f64], &[f64])>, options: &SolveOptions) -> Result<VoltageSolution, SolveError> {
    let n = problem.kind.len();
    let layout = Layout::new(&problem.kind);
    let (mut vm, mut va) = match initial {
        Some((m, a)) if !options.flat_start && m.len() == n && a.len() == n => (m.to_vec(), a.to_vec()),
        _ => (vec![1.0; n], vec![0.0; n]),
    };
    for i in 0..n {
        match problem.kind[i] {
            NodeKind::Slack | NodeKind::Pv => vm[i] = problem.v_set[i],
            NodeKind::Dead => {
                vm[i] = 0.0;
                va[i] = 0.0;
            }
            NodeKind::Pq => {
                if !(vm[i] > 0.0) {
                    vm[i] = 1.0;
                }
            }
        }
        if problem.kind[i] == NodeKind::Slack && initial.is_none() {
            va[i] = 0.0;
        }
    }

    let phasors = |vm: &[f64], va: &[f64]| -> Vec<Complex64> { vm.iter().zip(va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect() };
    let mut s = bus_injections(&problem.ybus, &phasors(&vm, &va));
    let mut f = mismatch(problem, &layout, &s);
    let mut norm = norm_inf(&f);
    let mut iterations = 0;

    while !(norm <= options.tolerance) {
        if iterations >= options.max_iter || !norm.is_finite() || norm > 1e8 {
            return Err(SolveError::NonConvergence { iterations, mismatch: norm });
        }
        iterations += 1;
        let triplets = jacobian(problem, &layout, &vm, &va, &s);
        let jac = SparseColMat::<usize, f64>::try_new_from_triplets(layout.size, layout.size, &triplets).map_err(|_| SolveError::Singular(iterations))?;
        let lu = jac.sp_lu().map_err(|_| SolveError::Singular(iterations))?;
        let rhs = faer::Col::<f64>::from_fn(layout.size, |i| f[i]);
        let dx = lu.solve(&rhs);
        for i in 0..n {
            if let Some(c) = layout.theta[i] {
                va[i] += dx[c];
            }
            if let Some(c) = layout.vmag[i] {
                vm[i] += dx[c];
            }
        }
        if vm.iter().zip(&problem.kind).any(|(v, k)| *k == NodeKind::Pq && !(*v > 0.0)) {
            return Err(SolveError::NonConvergence { iterations, mismatch: f64::INFINITY });
        }
        s = bus_injections(&problem.ybus, &phasors(&vm, &va));
        f = mismatch(problem, &layout, &s);
        norm = norm_inf(&f);
    }

    Ok(VoltageSolution { vm, va, iterations, max_mismatch: norm })
}
