use std::collections::HashMap;

use num_complex::Complex64;

use super::{NetworkCase, ShuntStatus};

/// In-service state and tap of one branch, as the solver sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchSetting {
    pub closed: bool,
    pub tap: f64,
}

impl BranchSetting {
    pub fn from_case(case: &NetworkCase) -> Vec<BranchSetting> {
        case.branches.iter().map(|b| BranchSetting { closed: b.status.is_closed(), tap: b.tap_ratio }).collect()
    }
}

/// The four pi-model entries of one branch, tap on the from side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPrimitive {
    pub ff: Complex64,
    pub ft: Complex64,
    pub tf: Complex64,
    pub tt: Complex64,
}

pub fn branch_admittance(r: f64, x: f64, b_charging: f64, tap: f64) -> BranchPrimitive {
    let ys = Complex64::new(1.0, 0.0) / Complex64::new(r, x);
    let half_b = Complex64::new(0.0, b_charging / 2.0);
    BranchPrimitive { ff: (ys + half_b) / (tap * tap), ft: -ys / tap, tf: -ys / tap, tt: ys + half_b }
}

/// Complex nodal admittance matrix in compressed-row form. Rows and columns
/// are bus positions in the case.
#[derive(Debug, Clone, PartialEq)]
pub struct Admittance {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl Admittance {
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Self {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
        for (i, j, v) in triplets {
            rows[i].push((j, v));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(j, _)| j);
            for (j, v) in row {
                match cols.last() {
                    Some(&last) if last == j && vals.len() > *row_ptr.last().unwrap() => {
                        *vals.last_mut().unwrap() += v;
                    }
                    _ => {
                        cols.push(j);
                        vals.push(v);
                    }
                }
            }
            row_ptr.push(cols.len());
        }
        Admittance { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().copied().zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// Nodal current injections `Y·V`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n).map(|i| self.row(i).map(|(j, y)| y * v[j]).sum()).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let mut out = vec![vec![Complex64::new(0.0, 0.0); self.n]; self.n];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, y) in self.row(i) {
                row[j] = y;
            }
        }
        out
    }
}

/// Effective shunt reactive injection at 1.0 pu for each shunt in the case,
/// zero when switched off.
pub fn shunt_mvar_from_case(case: &NetworkCase) -> Vec<f64> {
    case.shunts.iter().map(|s| if s.status == ShuntStatus::On { s.q_nominal } else { 0.0 }).collect()
}

/// Builds the nodal admittance matrix. `branches` gives the in-service state
/// and tap per branch position; `shunt_mvar` the effective reactive rating
/// per shunt position. Off-nominal taps sit on the from side.
pub fn build_admittance(case: &NetworkCase, branches: &[BranchSetting], shunt_mvar: &[f64]) -> Admittance {
    let index: HashMap<u32, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    let mut triplets = Vec::with_capacity(4 * case.branches.len() + case.buses.len());
    for (br, setting) in case.branches.iter().zip(branches) {
        if !setting.closed {
            continue;
        }
        let (f, t) = (index[&br.from_bus], index[&br.to_bus]);
        let y = branch_admittance(br.r, br.x, br.b_charging, setting.tap);
        triplets.push((f, f, y.ff));
        triplets.push((f, t, y.ft));
        triplets.push((t, f, y.tf));
        triplets.push((t, t, y.tt));
    }
    for (sh, &mvar) in case.shunts.iter().zip(shunt_mvar) {
        if mvar != 0.0 {
            let i = index[&sh.bus];
            triplets.push((i, i, Complex64::new(0.0, mvar / case.base_mva)));
        }
    }
    // Keep an explicit diagonal so every bus has a row entry.
    for i in 0..case.buses.len() {
        triplets.push((i, i, Complex64::new(0.0, 0.0)));
    }
    Admittance::from_triplets(case.buses.len(), triplets)
}

impl Admittance {
    pub fn from_case(case: &NetworkCase) -> Self {
        build_admittance(case, &BranchSetting::from_case(case), &shunt_mvar_from_case(case))
    }
}
