//! Absorbing, cycle-free chain over per-node protocol states.
//!
//! Each node is Listening (no packet yet), Transmitting (holds the packet,
//! waiting for or performing its single retransmission) or Received (done).
//! A transition fires when one transmitter finishes: it moves T→R and every
//! listener independently decodes its packet (L→T) or not. The number of R
//! symbols grows by one per step, so the state graph is a DAG.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::channel::{InterferenceMode, LinkModel, RadioConfig};
use crate::dataset::AttenuationMatrix;
use crate::error::{Error, Result};
use crate::sim::CsmaConfig;

pub const MAX_NODES: usize = 12;
pub const DEFAULT_N_BACKOFFS: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeState {
    Listen,
    Transmit,
    Received,
}

impl NodeState {
    fn digit(self) -> u32 {
        match self {
            NodeState::Listen => 0,
            NodeState::Transmit => 1,
            NodeState::Received => 2,
        }
    }

    fn from_digit(d: u32) -> Self {
        match d {
            0 => NodeState::Listen,
            1 => NodeState::Transmit,
            _ => NodeState::Received,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            NodeState::Listen => 'L',
            NodeState::Transmit => 'T',
            NodeState::Received => 'R',
        }
    }
}

/// One symbol per node.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SystemState(Vec<NodeState>);

impl SystemState {
    pub fn new(symbols: Vec<NodeState>) -> Self {
        Self(symbols)
    }

    /// Sink transmitting, everyone else listening.
    pub fn initial(n: usize, sink: usize) -> Self {
        let mut s = vec![NodeState::Listen; n];
        s[sink] = NodeState::Transmit;
        Self(s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        text.chars()
            .map(|c| match c {
                'L' => Ok(NodeState::Listen),
                'T' => Ok(NodeState::Transmit),
                'R' => Ok(NodeState::Received),
                other => Err(Error::Domain(format!("unknown state symbol `{other}`"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[NodeState] {
        &self.0
    }

    pub fn get(&self, node: usize) -> NodeState {
        self.0[node]
    }

    /// Base-3 code with node 0 as the least significant digit.
    pub fn encode(&self) -> u32 {
        self.0.iter().rev().fold(0, |acc, s| acc * 3 + s.digit())
    }

    pub fn decode(mut code: u32, n: usize) -> Self {
        let mut v = Vec::with_capacity(n);
        for _ in 0..n {
            v.push(NodeState::from_digit(code % 3));
            code /= 3;
        }
        Self(v)
    }

    pub fn nodes_in(&self, state: NodeState) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &s)| s == state).map(|(k, _)| k).collect()
    }

    pub fn listeners(&self) -> Vec<usize> {
        self.nodes_in(NodeState::Listen)
    }

    pub fn transmitters(&self) -> Vec<usize> {
        self.nodes_in(NodeState::Transmit)
    }

    pub fn received(&self) -> Vec<usize> {
        self.nodes_in(NodeState::Received)
    }

    pub fn is_absorbing(&self) -> bool {
        !self.0.contains(&NodeState::Transmit)
    }
}

impl fmt::Display for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.symbol())?;
        }
        Ok(())
    }
}

impl fmt::Debug for SystemState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SystemState({self})")
    }
}

/// Source of per-link success probabilities.
///
/// `interferers` lists the other nodes in the transmitting state when
/// `from` finishes; sources that ignore interference may disregard it.
pub trait LinkProbability {
    fn link_probability(&mut self, from: usize, to: usize, interferers: &[usize]) -> Result<f64>;
}

/// Link probabilities given directly, independent of interferers.
#[derive(Debug, Clone)]
pub struct FixedLinks {
    n: usize,
    p: Vec<f64>,
}

impl FixedLinks {
    pub fn new(n: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != n * n {
            return Err(Error::Domain(format!("expected {} link probabilities, got {}", n * n, p.len())));
        }
        if let Some(bad) = p.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::Domain(format!("link probability {bad} outside [0,1]")));
        }
        Ok(Self { n, p })
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self> {
        Self::new(n, vec![p; n * n])
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.p[from * self.n + to]
    }

    pub fn set(&mut self, from: usize, to: usize, p: f64) {
        self.p[from * self.n + to] = p;
    }
}

impl LinkProbability for FixedLinks {
    fn link_probability(&mut self, from: usize, to: usize, _interferers: &[usize]) -> Result<f64> {
        Ok(self.get(from, to))
    }
}

/// Channel-backed probabilities, memoized per `(from, to, interferer set)`.
#[derive(Debug)]
pub struct CachedChannelLinks {
    model: LinkModel,
    cache: HashMap<(usize, usize, u32), f64>,
}

impl CachedChannelLinks {
    pub fn new(model: LinkModel) -> Self {
        Self { model, cache: HashMap::new() }
    }

    pub fn model(&self) -> &LinkModel {
        &self.model
    }

    pub fn cached_contexts(&self) -> usize {
        self.cache.len()
    }
}

impl LinkProbability for CachedChannelLinks {
    fn link_probability(&mut self, from: usize, to: usize, interferers: &[usize]) -> Result<f64> {
        let mask = match self.model.mode() {
            InterferenceMode::NoInterference => 0,
            InterferenceMode::General => interferers.iter().fold(0u32, |m, &k| m | 1 << k),
        };
        if let Some(&p) = self.cache.get(&(from, to, mask)) {
            return Ok(p);
        }
        let p = self.model.link_success_probability(from, to, interferers)?;
        self.cache.insert((from, to, mask), p);
        Ok(p)
    }
}

/// Successors of a non-absorbing state with their embedded-chain
/// probabilities. Each transmitter is equally likely to finish first.
///
/// Absorbing states have no successors.
pub fn enumerate_successors<P: LinkProbability + ?Sized>(s: &SystemState, links: &mut P) -> Result<Vec<(SystemState, f64)>> {
    let transmitters = s.transmitters();
    if transmitters.is_empty() {
        return Ok(Vec::new());
    }
    let listeners = s.listeners();
    let finish_weight = 1.0 / transmitters.len() as f64;
    let mut out: Vec<(SystemState, f64)> = Vec::with_capacity(transmitters.len() << listeners.len());
    let mut index: HashMap<u32, usize> = HashMap::new();
    let mut probs = Vec::with_capacity(listeners.len());
    for &i in &transmitters {
        let interferers: Vec<usize> = transmitters.iter().copied().filter(|&k| k != i).collect();
        probs.clear();
        for &j in &listeners {
            probs.push(links.link_probability(i, j, &interferers)?);
        }
        for mask in 0u32..(1u32 << listeners.len()) {
            let mut next = s.clone();
            next.0[i] = NodeState::Received;
            let mut p = finish_weight;
            for (b, &j) in listeners.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    next.0[j] = NodeState::Transmit;
                    p *= probs[b];
                } else {
                    p *= 1.0 - probs[b];
                }
            }
            match index.get(&next.encode()) {
                Some(&at) => out[at].1 += p,
                None => {
                    index.insert(next.encode(), out.len());
                    out.push((next, p));
                }
            }
        }
    }
    Ok(out)
}

/// Mean time a node spends in the transmitting state: backoff periods,
/// setup, channel assessment and airtime.
pub fn mean_tx_state_time(csma: &CsmaConfig, radio: &RadioConfig, n_backoffs: f64) -> f64 {
    let mean_first_backoff = (f64::from((1u32 << csma.w_init) - 1) / 2.0) * csma.tu_seconds;
    n_backoffs * mean_first_backoff + csma.t_setup + csma.t_cca + radio.airtime()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BroadcastChain {
    n_nodes: usize,
    sink: usize,
    states: Vec<SystemState>,
    /// Positive-probability jumps per state.
    edges: Vec<Vec<(usize, f64)>>,
    exit_rate: Vec<f64>,
    initial: usize,
    mu: f64,
}

impl BroadcastChain {
    /// Breadth-first construction from the sink-transmits state. Jumps with
    /// probability exactly zero are dropped, so only states reachable with
    /// positive probability are kept.
    pub fn build<P: LinkProbability + ?Sized>(n: usize, sink: usize, links: &mut P, mean_tx_state_time: f64) -> Result<Self> {
        if !(2..=MAX_NODES).contains(&n) {
            return Err(Error::NodeCount(n));
        }
        if sink >= n {
            return Err(Error::InvalidConfig(format!("sink {sink} out of range for {n} nodes")));
        }
        if !(mean_tx_state_time > 0.0 && mean_tx_state_time.is_finite()) {
            return Err(Error::InvalidConfig(format!("mean transmission-state time must be positive, got {mean_tx_state_time}")));
        }
        let mu = 1.0 / mean_tx_state_time;
        let initial = SystemState::initial(n, sink);
        let mut states = vec![initial.clone()];
        let mut index = HashMap::from([(initial.encode(), 0usize)]);
        let mut edges: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
        let mut queue = VecDeque::from([0usize]);
        while let Some(s) = queue.pop_front() {
            let successors = enumerate_successors(&states[s], links)?;
            let mut out = Vec::with_capacity(successors.len());
            for (next, p) in successors {
                if p <= 0.0 {
                    continue;
                }
                let code = next.encode();
                let u = match index.get(&code) {
                    Some(&u) => u,
                    None => {
                        let u = states.len();
                        index.insert(code, u);
                        states.push(next);
                        edges.push(Vec::new());
                        queue.push_back(u);
                        u
                    }
                };
                out.push((u, p));
            }
            edges[s] = out;
        }
        let exit_rate = states.iter().map(|s| s.transmitters().len() as f64 * mu).collect();
        Ok(Self { n_nodes: n, sink, states, edges, exit_rate, initial: 0, mu })
    }

    /// Chain driven by the channel model over `matrix`.
    pub fn from_channel(
        matrix: &AttenuationMatrix,
        radio: &RadioConfig,
        mode: InterferenceMode,
        sink: usize,
        mean_tx_state_time: f64,
    ) -> Result<Self> {
        let model = LinkModel::new(matrix.clone(), *radio, mode, mean_tx_state_time)?;
        let mut links = CachedChannelLinks::new(model);
        Self::build(matrix.n_nodes(), sink, &mut links, mean_tx_state_time)
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn states(&self) -> &[SystemState] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn exit_rate(&self, s: usize) -> f64 {
        self.exit_rate[s]
    }

    pub fn successors(&self, s: usize) -> &[(usize, f64)] {
        &self.edges[s]
    }

    pub fn state_index(&self, state: &SystemState) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    /// Same jump chain with every holding time scaled by `factor`.
    pub fn with_time_scale(&self, factor: f64) -> Self {
        let mut scaled = self.clone();
        scaled.mu /= factor;
        for r in &mut scaled.exit_rate {
            *r /= factor;
        }
        scaled
    }

    /// Kahn's algorithm; `None` if the jump graph has a cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indegree = vec![0usize; self.states.len()];
        for out in &self.edges {
            for &(u, _) in out {
                indegree[u] += 1;
            }
        }
        let mut ready: VecDeque<usize> = (0..self.states.len()).filter(|&s| indegree[s] == 0).collect();
        let mut order = Vec::with_capacity(self.states.len());
        while let Some(s) = ready.pop_front() {
            order.push(s);
            for &(u, _) in &self.edges[s] {
                indegree[u] -= 1;
                if indegree[u] == 0 {
                    ready.push_back(u);
                }
            }
        }
        (order.len() == self.states.len()).then_some(order)
    }

    fn topo(&self) -> Vec<usize> {
        self.topological_order().expect("broadcast chains are acyclic")
    }

    /// Bitmask over [`OutcomeDistribution::nodes`] of the nodes in `R`.
    fn covered_mask(&self, state: &SystemState) -> usize {
        let mut mask = 0;
        let mut bit = 0;
        for k in 0..self.n_nodes {
            if k == self.sink {
                continue;
            }
            if state.get(k) == NodeState::Received {
                mask |= 1 << bit;
            }
            bit += 1;
        }
        mask
    }

    /// Probability of ending in each absorbing state, aggregated by the set
    /// of non-sink nodes covered. One forward pass in topological order.
    pub fn absorption_distribution(&self) -> OutcomeDistribution {
        let mut reach = vec![0.0; self.states.len()];
        reach[self.initial] = 1.0;
        let nodes: Vec<usize> = (0..self.n_nodes).filter(|&k| k != self.sink).collect();
        let mut mass = vec![0.0; 1 << nodes.len()];
        for s in self.topo() {
            let p = reach[s];
            if self.edges[s].is_empty() {
                if self.states[s].is_absorbing() {
                    mass[self.covered_mask(&self.states[s])] += p;
                }
                continue;
            }
            for &(u, q) in &self.edges[s] {
                reach[u] += p * q;
            }
        }
        OutcomeDistribution { n_nodes: self.n_nodes, sink: self.sink, nodes, mass }
    }

    fn full_coverage_state(&self) -> SystemState {
        SystemState(vec![NodeState::Received; self.n_nodes])
    }

    /// Probability of reaching the all-received state from each state.
    fn success_probabilities(&self, order: &[usize]) -> Vec<f64> {
        let full = self.full_coverage_state();
        let mut h = vec![0.0; self.states.len()];
        for &s in order.iter().rev() {
            h[s] = if self.edges[s].is_empty() {
                if self.states[s] == full {
                    1.0
                } else {
                    0.0
                }
            } else {
                self.edges[s].iter().map(|&(u, q)| q * h[u]).sum()
            };
        }
        h
    }

    /// Expected time to full coverage, conditioned on full coverage.
    ///
    /// Jump probabilities are reweighted by `h(u)/h(s)` where `h` is the
    /// probability of eventually covering everyone; expected holding times
    /// are then accumulated backwards from the all-received state.
    pub fn average_cover_time(&self) -> Result<f64> {
        let order = self.topo();
        let h = self.success_probabilities(&order);
        if h[self.initial] <= 0.0 {
            return Err(Error::UndefinedConditioning);
        }
        let mut time = vec![0.0; self.states.len()];
        for &s in order.iter().rev() {
            if self.edges[s].is_empty() || h[s] <= 0.0 {
                continue;
            }
            let onward: f64 = self.edges[s].iter().map(|&(u, q)| q * h[u] * time[u]).sum::<f64>() / h[s];
            time[s] = 1.0 / self.exit_rate[s] + onward;
        }
        Ok(time[self.initial])
    }

    /// Unconditional expected time until no node is transmitting.
    pub fn mean_absorption_time(&self) -> f64 {
        let order = self.topo();
        let mut time = vec![0.0; self.states.len()];
        for &s in order.iter().rev() {
            if self.edges[s].is_empty() {
                continue;
            }
            time[s] = 1.0 / self.exit_rate[s] + self.edges[s].iter().map(|&(u, q)| q * time[u]).sum::<f64>();
        }
        time[self.initial]
    }

    pub fn to_export(&self) -> ChainExport {
        ChainExport {
            n_nodes: self.n_nodes,
            sink: self.sink,
            states: self.states.iter().map(ToString::to_string).collect(),
            edges: self
                .edges
                .iter()
                .enumerate()
                .flat_map(|(s, out)| out.iter().map(move |&(u, p)| ChainEdge { from: s, to: u, jump_prob: p }))
                .collect(),
            exit_rates: self.exit_rate.clone(),
            initial: self.initial,
            mu: self.mu,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_export())?)
    }
}

/// Debug export of a built chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainExport {
    pub n_nodes: usize,
    pub sink: usize,
    /// One `L`/`T`/`R` string per state, node 0 first.
    pub states: Vec<String>,
    pub edges: Vec<ChainEdge>,
    pub exit_rates: Vec<f64>,
    pub initial: usize,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainEdge {
    pub from: usize,
    pub to: usize,
    pub jump_prob: f64,
}

/// Probability mass over the sets of non-sink nodes covered at absorption.
///
/// `mass[c]` is indexed by a bitmask whose bit `b` stands for `nodes()[b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeDistribution {
    n_nodes: usize,
    sink: usize,
    nodes: Vec<usize>,
    mass: Vec<f64>,
}

impl OutcomeDistribution {
    /// Builds a distribution from raw masses over covered-set bitmasks.
    pub fn from_masses(n_nodes: usize, sink: usize, mass: Vec<f64>) -> Result<Self> {
        if sink >= n_nodes {
            return Err(Error::InvalidConfig(format!("sink {sink} out of range for {n_nodes} nodes")));
        }
        let nodes: Vec<usize> = (0..n_nodes).filter(|&k| k != sink).collect();
        if mass.len() != 1 << nodes.len() {
            return Err(Error::Domain(format!("expected {} masses, got {}", 1usize << nodes.len(), mass.len())));
        }
        if mass.iter().any(|m| !(*m >= 0.0)) {
            return Err(Error::Domain("masses must be non-negative".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("masses sum to {total}, not 1")));
        }
        Ok(Self { n_nodes, sink, nodes, mass })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    /// Non-sink nodes, in bit order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn full_mask(&self) -> usize {
        (1 << self.nodes.len()) - 1
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }

    /// Mass of ending with exactly `covered` non-sink nodes received.
    pub fn mass_of(&self, covered: &[usize]) -> Result<f64> {
        let mut mask = 0;
        for &k in covered {
            mask |= 1 << self.bit_of(k)?;
        }
        Ok(self.mass[mask])
    }

    pub fn bit_of(&self, node: usize) -> Result<usize> {
        self.nodes
            .iter()
            .position(|&k| k == node)
            .ok_or(Error::NotANonSinkNode { node, n_nodes: self.n_nodes })
    }

    /// Probability that every non-sink node receives the packet.
    pub fn cover_probability(&self) -> f64 {
        self.mass[self.full_mask()]
    }

    /// Expected number of non-sink nodes that receive the packet.
    pub fn average_cover_number(&self) -> f64 {
        self.mass.iter().enumerate().map(|(c, m)| m * c.count_ones() as f64).sum()
    }

    /// Probability that `node` receives the packet.
    pub fn hitting_probability(&self, node: usize) -> Result<f64> {
        let bit = self.bit_of(node)?;
        Ok(self.mass.iter().enumerate().filter(|(c, _)| c >> bit & 1 == 1).map(|(_, m)| m).sum())
    }

    pub fn hitting_probabilities(&self) -> Vec<(usize, f64)> {
        self.nodes.iter().map(|&k| (k, self.hitting_probability(k).expect("non-sink node"))).collect()
    }
}
