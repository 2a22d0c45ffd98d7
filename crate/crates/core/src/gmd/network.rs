//! Single-phase-equivalent DC network for GIC analysis.
//!
//! Nodes are substation neutrals plus the buses touched by a closed line or
//! transformer. Each line contributes three phases in parallel (`3/R`); each
//! transformer is a grounded-wye winding from its high-side bus to the
//! neutral of that bus's substation. Zero-resistance windings tie the bus
//! node to the neutral directly, so the two collapse into one node.

use std::collections::{HashMap, VecDeque};

use faer::prelude::Solve;
use faer::sparse::{SparseColMat, Triplet};
use serde::{Deserialize, Serialize};

use crate::grid::{ElementRef, NetworkCase};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DcNetworkError {
    #[error("substation {0} has no finite positive grounding resistance")]
    BadGrounding(u32),
    #[error("line {0} has zero dc resistance")]
    ZeroResistanceLine(u32),
    #[error("{0} has negative or non-finite dc resistance")]
    BadResistance(ElementRef),
    #[error("{0} has no dc path to ground")]
    IsolatedNode(ElementRef),
    #[error("dc conductance matrix is singular")]
    Singular,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcLine {
    /// Branch position in the case.
    pub branch: usize,
    /// Bus positions of the two ends.
    pub from_bus: usize,
    pub to_bus: usize,
    pub from_node: usize,
    pub to_node: usize,
    /// Siemens, all three phases.
    pub conductance: f64,
    /// (latitude, longitude) of the two ends' substations.
    pub from_coord: (f64, f64),
    pub to_coord: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DcWinding {
    /// Branch position in the case.
    pub branch: usize,
    pub branch_id: u32,
    /// Bus position of the high-side (grounded) winding.
    pub bus: usize,
    pub substation: usize,
    pub bus_node: usize,
    pub neutral_node: usize,
    /// Siemens, all three phases; `None` for a zero-resistance winding.
    pub conductance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GicNetwork {
    pub n_nodes: usize,
    /// Conductance to earth per node, S.
    pub ground: Vec<f64>,
    pub lines: Vec<DcLine>,
    pub windings: Vec<DcWinding>,
    /// Reduced node of every substation neutral, by substation position.
    pub neutral_node: Vec<usize>,
    pub grounding_ohm: Vec<f64>,
    /// Reduced node of every bus that carries DC elements.
    pub bus_node: Vec<Option<usize>>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Builds the network from the branch statuses stored in the case.
pub fn build_dc_network(case: &NetworkCase) -> Result<GicNetwork, DcNetworkError> {
    let closed: Vec<bool> = case.branches.iter().map(|b| b.status.is_closed()).collect();
    build_dc_network_with(case, &closed)
}

/// Builds the network with explicit per-branch closed flags; open branches
/// carry no DC current.
pub fn build_dc_network_with(case: &NetworkCase, closed: &[bool]) -> Result<GicNetwork, DcNetworkError> {
    let n_sub = case.substations.len();
    let sub_pos: HashMap<u32, usize> = case.substations.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
    let bus_pos: HashMap<u32, usize> = case.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect();
    for s in &case.substations {
        let r = s.grounding_resistance_ohm;
        if !(r > 0.0 && r.is_finite()) {
            return Err(DcNetworkError::BadGrounding(s.id));
        }
    }
    let bus_sub: Vec<usize> = case.buses.iter().map(|b| sub_pos[&b.substation_id]).collect();
    let raw_bus = |i: usize| n_sub + i;

    let mut uf = UnionFind((0..n_sub + case.buses.len()).collect());
    let mut used = vec![false; n_sub + case.buses.len()];
    used[..n_sub].fill(true);

    // (branch, from raw, to raw, conductance) and (branch, bus, sub, conductance)
    let mut raw_lines = Vec::new();
    let mut raw_windings = Vec::new();
    for (k, br) in case.branches.iter().enumerate() {
        if !closed[k] {
            continue;
        }
        let r = br.dc_resistance_ohm;
        if !(r >= 0.0 && r.is_finite()) {
            return Err(DcNetworkError::BadResistance(ElementRef::Branch(br.id)));
        }
        let (f, t) = (bus_pos[&br.from_bus], bus_pos[&br.to_bus]);
        if br.is_transformer {
            let high = if case.buses[t].base_kv > case.buses[f].base_kv { t } else { f };
            let s = bus_sub[high];
            used[raw_bus(high)] = true;
            if r == 0.0 {
                uf.union(raw_bus(high), s);
                raw_windings.push((k, high, s, None));
            } else {
                raw_windings.push((k, high, s, Some(3.0 / r)));
            }
        } else {
            if r == 0.0 {
                return Err(DcNetworkError::ZeroResistanceLine(br.id));
            }
            used[raw_bus(f)] = true;
            used[raw_bus(t)] = true;
            raw_lines.push((k, f, t, 3.0 / r));
        }
    }

    // Compact the reduced nodes: neutrals first, in substation order.
    let mut node_of_root: HashMap<usize, usize> = HashMap::new();
    let mut next = 0;
    let mut node = |uf: &mut UnionFind, raw: usize| -> usize {
        let root = uf.find(raw);
        *node_of_root.entry(root).or_insert_with(|| {
            next += 1;
            next - 1
        })
    };
    let neutral_node: Vec<usize> = (0..n_sub).map(|s| node(&mut uf, s)).collect();
    let bus_node: Vec<Option<usize>> = (0..case.buses.len()).map(|i| used[raw_bus(i)].then(|| node(&mut uf, raw_bus(i)))).collect();
    let n_nodes = next;

    let mut ground = vec![0.0; n_nodes];
    for (s, sub) in case.substations.iter().enumerate() {
        ground[neutral_node[s]] += 1.0 / sub.grounding_resistance_ohm;
    }
    let coord = |bus: usize| {
        let s = &case.substations[bus_sub[bus]];
        (s.latitude, s.longitude)
    };
    let lines: Vec<DcLine> = raw_lines
        .into_iter()
        .map(|(k, f, t, g)| DcLine {
            branch: k,
            from_bus: f,
            to_bus: t,
            from_node: bus_node[f].unwrap(),
            to_node: bus_node[t].unwrap(),
            conductance: g,
            from_coord: coord(f),
            to_coord: coord(t),
        })
        .collect();
    let windings: Vec<DcWinding> = raw_windings
        .into_iter()
        .map(|(k, bus, s, g)| DcWinding {
            branch: k,
            branch_id: case.branches[k].id,
            bus,
            substation: s,
            bus_node: bus_node[bus].unwrap(),
            neutral_node: neutral_node[s],
            conductance: g,
        })
        .collect();

    let grounding_ohm = case.substations.iter().map(|s| s.grounding_resistance_ohm).collect();
    let net = GicNetwork { n_nodes, ground, lines, windings, neutral_node, grounding_ohm, bus_node };
    if let Some(bus) = net.ungrounded_bus() {
        return Err(DcNetworkError::IsolatedNode(ElementRef::Bus(case.buses[bus].id)));
    }
    Ok(net)
}

impl GicNetwork {
    fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let lines = self.lines.iter().map(|l| (l.from_node, l.to_node, l.conductance));
        let windings = self.windings.iter().filter_map(|w| w.conductance.map(|g| (w.bus_node, w.neutral_node, g)));
        lines.chain(windings)
    }

    /// First bus (position) whose node cannot reach a grounded node.
    fn ungrounded_bus(&self) -> Option<usize> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for (a, b, _) in self.edges() {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut reached = vec![false; self.n_nodes];
        let mut queue: VecDeque<usize> = (0..self.n_nodes).filter(|&i| self.ground[i] > 0.0).collect();
        for &i in &queue {
            reached[i] = true;
        }
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                if !reached[j] {
                    reached[j] = true;
                    queue.push_back(j);
                }
            }
        }
        self.bus_node.iter().position(|n| n.is_some_and(|n| !reached[n]))
    }

    /// Nodal conductance matrix as (row, col, value) entries, duplicates
    /// summed by the consumer.
    pub fn conductance_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t: Vec<(usize, usize, f64)> = (0..self.n_nodes).map(|i| (i, i, self.ground[i])).collect();
        for (a, b, g) in self.edges() {
            if a == b {
                continue;
            }
            t.push((a, a, g));
            t.push((b, b, g));
            t.push((a, b, -g));
            t.push((b, a, -g));
        }
        t
    }

    /// Dense copy of the conductance matrix (tests and small networks).
    pub fn conductance_dense(&self) -> Vec<Vec<f64>> {
        let mut g = vec![vec![0.0; self.n_nodes]; self.n_nodes];
        for (i, j, v) in self.conductance_triplets() {
            g[i][j] += v;
        }
        g
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformerGic {
    pub id: u32,
    /// Branch position in the case.
    #[serde(skip)]
    pub branch: usize,
    /// Bus position of the grounded winding.
    #[serde(skip)]
    pub bus: usize,
    /// Total winding current toward the neutral, A (three phases).
    pub neutral_a: f64,
    /// Effective per-phase winding current magnitude, A.
    pub i_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GicSolution {
    /// Node voltages, V.
    pub node_voltage: Vec<f64>,
    /// Current into earth per substation position, A.
    pub neutral_current: Vec<f64>,
    pub transformers: Vec<TransformerGic>,
}

/// Solves `G·v = J` with line EMFs (volts, one per `net.lines` entry,
/// oriented from → to) entered as Norton current sources.
pub fn solve_gic(net: &GicNetwork, emfs: &[f64]) -> Result<GicSolution, DcNetworkError> {
    assert_eq!(emfs.len(), net.lines.len(), "one emf per dc line");
    let mut rhs = vec![0.0; net.n_nodes];
    for (line, &e) in net.lines.iter().zip(emfs) {
        rhs[line.from_node] -= e * line.conductance;
        rhs[line.to_node] += e * line.conductance;
    }
    let v = if rhs.iter().all(|&x| x == 0.0) {
        vec![0.0; net.n_nodes]
    } else {
        let triplets: Vec<Triplet<usize, usize, f64>> = net.conductance_triplets().into_iter().map(|(i, j, g)| Triplet::new(i, j, g)).collect();
        let g = SparseColMat::<usize, f64>::try_new_from_triplets(net.n_nodes, net.n_nodes, &triplets).map_err(|_| DcNetworkError::Singular)?;
        let lu = g.sp_lu().map_err(|_| DcNetworkError::Singular)?;
        let x = lu.solve(faer::Col::<f64>::from_fn(net.n_nodes, |i| rhs[i]));
        let v: Vec<f64> = (0..net.n_nodes).map(|i| x[i]).collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(DcNetworkError::Singular);
        }
        v
    };

    let line_current: Vec<f64> = net.lines.iter().zip(emfs).map(|(l, &e)| l.conductance * (v[l.from_node] - v[l.to_node] + e)).collect();

    let mut transformers: Vec<TransformerGic> = net
        .windings
        .iter()
        .map(|w| {
            let total = w.conductance.map_or(0.0, |g| g * (v[w.bus_node] - v[w.neutral_node]));
            TransformerGic { id: w.branch_id, branch: w.branch, bus: w.bus, neutral_a: total, i_eff: 0.0 }
        })
        .collect();

    // Zero-resistance windings: current from KCL at their bus, shared
    // equally when several sit on the same bus.
    let mut ideal: HashMap<usize, Vec<usize>> = HashMap::new();
    for (k, w) in net.windings.iter().enumerate() {
        if w.conductance.is_none() {
            ideal.entry(w.bus).or_default().push(k);
        }
    }
    if !ideal.is_empty() {
        let mut inflow: HashMap<usize, f64> = HashMap::new();
        for (line, i) in net.lines.iter().zip(&line_current) {
            *inflow.entry(line.to_bus).or_default() += i;
            *inflow.entry(line.from_bus).or_default() -= i;
        }
        for (k, w) in net.windings.iter().enumerate() {
            if w.conductance.is_some() {
                *inflow.entry(w.bus).or_default() -= transformers[k].neutral_a;
            }
        }
        for (bus, ks) in ideal {
            let share = inflow.get(&bus).copied().unwrap_or(0.0) / ks.len() as f64;
            for k in ks {
                transformers[k].neutral_a = share;
            }
        }
    }
    for t in &mut transformers {
        t.i_eff = (t.neutral_a / 3.0).abs();
    }

    let neutral_current = net.neutral_node.iter().zip(&net.grounding_ohm).map(|(&n, &r)| v[n] / r).collect();
    Ok(GicSolution { node_voltage: v, neutral_current, transformers })
}
