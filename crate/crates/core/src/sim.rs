//! Event-driven simulation of the broadcast over unslotted CSMA/CA.
//!
//! The sink contends for the channel at t = 0. Every node that decodes the
//! packet for the first time contends immediately and transmits once.
//! Receivers lock onto the first audible transmission that starts while they
//! are idle; every other audible transmission overlapping that packet adds
//! interference. Signals below sensitivity are discarded entirely.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ber_from_sinr, dbm_to_mw, segment_success, RadioConfig};
use crate::dataset::AttenuationMatrix;
use crate::error::{Error, Result};

pub const DEFAULT_TU_SECONDS: f64 = 0.32e-3;
pub const DEFAULT_W_INIT: u32 = 3;
pub const DEFAULT_MAX_ATTEMPTS: u32 = 5;
pub const DEFAULT_T_SETUP: f64 = 0.1e-3;
pub const DEFAULT_T_CCA: f64 = 0.1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsmaConfig {
    /// Backoff unit.
    pub tu_seconds: f64,
    /// Initial backoff exponent: the first draw is uniform on `0..2^w_init`.
    pub w_init: u32,
    /// How many times a node may re-arm its backoff after a busy channel.
    pub max_attempts: u32,
    pub t_setup: f64,
    pub t_cca: f64,
}

impl Default for CsmaConfig {
    fn default() -> Self {
        Self {
            tu_seconds: DEFAULT_TU_SECONDS,
            w_init: DEFAULT_W_INIT,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            t_setup: DEFAULT_T_SETUP,
            t_cca: DEFAULT_T_CCA,
        }
    }
}

impl CsmaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w_init < 1 || self.max_attempts < 1 {
            return Err(Error::InvalidConfig("w_init and max_attempts must be at least 1".into()));
        }
        if self.w_init + self.max_attempts > 62 {
            return Err(Error::InvalidConfig("backoff window exponent would overflow".into()));
        }
        for (name, v) in [("tu_seconds", self.tu_seconds), ("t_setup", self.t_setup), ("t_cca", self.t_cca)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!("{name} must be a non-negative time, got {v}")));
            }
        }
        Ok(())
    }
}

/// Events at equal times run in this order, then by node index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    TxEnd,
    CcaCheck,
    TxStart,
    BackoffExpiry,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub node: usize,
    seq: u64,
}

impl Eq for SimEvent {}

impl Ord for SimEvent {
    // reversed: BinaryHeap pops the earliest event
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.kind.cmp(&self.kind))
            .then_with(|| other.node.cmp(&self.node))
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionRecord {
    pub sender: usize,
    pub start: f64,
    pub end: f64,
    /// One draw per potential receiver; the sender's own entry is unused.
    pub attenuation_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceptionRecord {
    /// Index into the run's transmissions.
    pub transmission: usize,
    pub receiver: usize,
    /// `(bit error rate, bits)` per interval of constant interference.
    pub segments: Vec<(f64, u32)>,
    pub success_probability: f64,
    pub decoded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TraceDetail {
    Backoff { exponent: u32, slots: u64, attempt: u32 },
    Cca { busy: bool },
    Dropped,
    TxStart { transmission: usize, locked_receivers: Vec<usize> },
    TxEnd { transmission: usize, decoded: Vec<usize>, failed: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: EventKind,
    pub node: usize,
    pub details: TraceDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    /// Non-sink nodes that received the packet, ascending.
    pub covered: Vec<usize>,
    /// Time of the last first reception; only set on success.
    pub cover_time: Option<f64>,
    pub success: bool,
    /// Backoff periods used per node that contended, `(node, count)`.
    pub backoffs: Vec<(usize, u32)>,
    pub dropped: Vec<usize>,
}

/// Outcome plus the full event history of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub outcome: RunOutcome,
    pub transmissions: Vec<TransmissionRecord>,
    pub receptions: Vec<ReceptionRecord>,
    pub trace: Vec<TraceEvent>,
}

impl RunRecord {
    /// JSON-lines trace, one event per line.
    pub fn trace_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for ev in &self.trace {
            out.push_str(&serde_json::to_string(ev)?);
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct NodeRuntime {
    has_packet: bool,
    first_rx: Option<f64>,
    exponent: u32,
    backoffs: u32,
    contended: bool,
    dropped: bool,
    receiving: Option<usize>,
    transmission: Option<usize>,
}

/// A network ready to be simulated.
#[derive(Debug, Clone)]
pub struct Simulation {
    matrix: AttenuationMatrix,
    radio: RadioConfig,
    csma: CsmaConfig,
    sink: usize,
    noise_mw: f64,
    links: Vec<Option<Normal<f64>>>,
}

struct RunState<'a> {
    sim: &'a Simulation,
    rng: ChaCha8Rng,
    queue: BinaryHeap<SimEvent>,
    seq: u64,
    nodes: Vec<NodeRuntime>,
    transmissions: Vec<TransmissionRecord>,
    on_air: Vec<usize>,
    receptions: Vec<ReceptionRecord>,
    trace: Option<Vec<TraceEvent>>,
    last_time: f64,
}

impl Simulation {
    pub fn new(matrix: AttenuationMatrix, radio: RadioConfig, csma: CsmaConfig, sink: usize) -> Result<Self> {
        radio.validate()?;
        csma.validate()?;
        let n = matrix.n_nodes();
        if sink >= n {
            return Err(Error::InvalidConfig(format!("sink {sink} out of range for {n} nodes")));
        }
        let mut links = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let std = matrix.std_db(i, j);
                links.push(if i != j && std > 0.0 {
                    Some(Normal::new(matrix.mean_db(i, j), std).map_err(|e| Error::InvalidMatrix(e.to_string()))?)
                } else {
                    None
                });
            }
        }
        Ok(Self { noise_mw: dbm_to_mw(radio.pn_dbm), matrix, radio, csma, sink, links })
    }

    pub fn radio(&self) -> &RadioConfig {
        &self.radio
    }

    pub fn csma(&self) -> &CsmaConfig {
        &self.csma
    }

    pub fn sink(&self) -> usize {
        self.sink
    }

    pub fn n_nodes(&self) -> usize {
        self.matrix.n_nodes()
    }

    fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }

    /// One broadcast. Identical seeds give identical outcomes.
    pub fn run_once(&self, seed: u64) -> RunOutcome {
        self.run_stream(seed, 0, false).outcome
    }

    /// One broadcast with transmissions, receptions and the event trace.
    pub fn run_traced(&self, seed: u64) -> RunRecord {
        self.run_stream(seed, 0, true)
    }

    fn run_stream(&self, seed: u64, stream: u64, trace: bool) -> RunRecord {
        let mut state = RunState {
            sim: self,
            rng: Self::rng_for(seed, stream),
            queue: BinaryHeap::new(),
            seq: 0,
            nodes: vec![NodeRuntime::default(); self.n_nodes()],
            transmissions: Vec::new(),
            on_air: Vec::new(),
            receptions: Vec::new(),
            trace: trace.then(Vec::new),
            last_time: 0.0,
        };
        state.run();
        state.finish()
    }

    /// Independent replications; run `r` uses PRNG stream `r` of `base_seed`.
    pub fn run_batch(&self, n_runs: usize, base_seed: u64) -> Result<BatchEstimate> {
        if n_runs == 0 {
            return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
        }
        let outcomes: Vec<RunOutcome> =
            (0..n_runs as u64).into_par_iter().map(|r| self.run_stream(base_seed, r, false).outcome).collect();
        Ok(BatchEstimate::from_outcomes(self.sink, self.n_nodes(), &outcomes))
    }
}

impl RunState<'_> {
    fn push(&mut self, time: f64, kind: EventKind, node: usize) {
        self.seq += 1;
        self.queue.push(SimEvent { time, kind, node, seq: self.seq });
    }

    fn log(&mut self, time: f64, kind: EventKind, node: usize, details: TraceDetail) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(TraceEvent { time, kind, node, details });
        }
    }

    fn received_dbm(&self, tx: usize, node: usize) -> f64 {
        self.sim.radio.pt_dbm - self.transmissions[tx].attenuation_db[node]
    }

    fn audible(&self, tx: usize, node: usize) -> bool {
        self.received_dbm(tx, node) >= self.sim.radio.sn_dbm
    }

    fn schedule_backoff(&mut self, now: f64, node: usize) {
        let exponent = self.nodes[node].exponent;
        let slots = self.rng.random_range(0..1u64 << exponent);
        self.nodes[node].backoffs += 1;
        let attempt = self.nodes[node].backoffs;
        self.log(now, EventKind::BackoffExpiry, node, TraceDetail::Backoff { exponent, slots, attempt });
        self.push(now + slots as f64 * self.sim.csma.tu_seconds, EventKind::BackoffExpiry, node);
    }

    fn start_contention(&mut self, now: f64, node: usize) {
        let n = &mut self.nodes[node];
        n.contended = true;
        n.exponent = self.sim.csma.w_init;
        n.backoffs = 0;
        self.schedule_backoff(now, node);
    }

    fn run(&mut self) {
        let sink = self.sim.sink;
        self.nodes[sink].has_packet = true;
        self.start_contention(0.0, sink);
        while let Some(ev) = self.queue.pop() {
            debug_assert!(ev.time >= self.last_time);
            self.last_time = ev.time;
            match ev.kind {
                EventKind::BackoffExpiry => {
                    let at = ev.time + self.sim.csma.t_setup + self.sim.csma.t_cca;
                    self.push(at, EventKind::CcaCheck, ev.node);
                }
                EventKind::CcaCheck => self.on_cca(ev.time, ev.node),
                EventKind::TxStart => self.on_tx_start(ev.time, ev.node),
                EventKind::TxEnd => self.on_tx_end(ev.time, ev.node),
            }
        }
    }

    fn on_cca(&mut self, now: f64, node: usize) {
        let busy = self.on_air.iter().any(|&tx| self.audible(tx, node));
        self.log(now, EventKind::CcaCheck, node, TraceDetail::Cca { busy });
        if !busy {
            self.push(now, EventKind::TxStart, node);
            return;
        }
        let rearms = self.nodes[node].backoffs - 1;
        if rearms >= self.sim.csma.max_attempts {
            self.nodes[node].dropped = true;
            self.log(now, EventKind::CcaCheck, node, TraceDetail::Dropped);
            return;
        }
        self.nodes[node].exponent += 1;
        self.schedule_backoff(now, node);
    }

    fn on_tx_start(&mut self, now: f64, sender: usize) {
        let n = self.sim.n_nodes();
        let mut attenuation_db = vec![f64::NAN; n];
        for (j, a) in attenuation_db.iter_mut().enumerate() {
            if j == sender {
                continue;
            }
            *a = match &self.sim.links[sender * n + j] {
                Some(normal) => normal.sample(&mut self.rng),
                None => self.sim.matrix.mean_db(sender, j),
            };
        }
        let tx = self.transmissions.len();
        self.transmissions.push(TransmissionRecord { sender, start: now, end: now + self.sim.radio.airtime(), attenuation_db });
        self.on_air.push(tx);
        self.nodes[sender].transmission = Some(tx);
        let mut locked = Vec::new();
        for j in 0..n {
            let node = &self.nodes[j];
            if j == sender || node.has_packet || !self.audible(tx, j) {
                continue;
            }
            // Transmissions starting at the same instant: the receiver syncs
            // to the strongest one.
            let take = match node.receiving {
                None => true,
                Some(cur) => {
                    self.transmissions[cur].start == now && self.received_dbm(tx, j) > self.received_dbm(cur, j)
                }
            };
            if take {
                self.nodes[j].receiving = Some(tx);
                locked.push(j);
            }
        }
        self.log(now, EventKind::TxStart, sender, TraceDetail::TxStart { transmission: tx, locked_receivers: locked });
        let end = self.transmissions[tx].end;
        self.push(end, EventKind::TxEnd, sender);
    }

    fn on_tx_end(&mut self, now: f64, sender: usize) {
        let tx = self.nodes[sender].transmission.expect("ending transmission was started");
        self.on_air.retain(|&t| t != tx);
        let mut decoded = Vec::new();
        let mut failed = Vec::new();
        for j in 0..self.sim.n_nodes() {
            if self.nodes[j].receiving != Some(tx) {
                continue;
            }
            self.nodes[j].receiving = None;
            let segments = self.segments(tx, j);
            let success_probability = segments.iter().map(|&(ber, bits)| segment_success(ber, bits)).product::<f64>();
            let ok = self.rng.random::<f64>() < success_probability;
            self.receptions.push(ReceptionRecord { transmission: tx, receiver: j, segments, success_probability, decoded: ok });
            if ok {
                decoded.push(j);
                self.nodes[j].has_packet = true;
                self.nodes[j].first_rx = Some(now);
                self.start_contention(now, j);
            } else {
                failed.push(j);
            }
        }
        self.log(now, EventKind::TxEnd, sender, TraceDetail::TxEnd { transmission: tx, decoded, failed });
    }

    /// Splits the target packet at every start or end of a concurrent
    /// transmission and computes the bit error rate of each piece.
    fn segments(&self, tx: usize, receiver: usize) -> Vec<(f64, u32)> {
        let target = &self.transmissions[tx];
        let (start, end) = (target.start, target.end);
        let overlapping: Vec<usize> = (0..self.transmissions.len())
            .filter(|&k| k != tx && self.transmissions[k].start < end && self.transmissions[k].end > start)
            .collect();
        let mut cuts = vec![start, end];
        for &k in &overlapping {
            for t in [self.transmissions[k].start, self.transmissions[k].end] {
                if t > start && t < end {
                    cuts.push(t);
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let signal_mw = dbm_to_mw(self.received_dbm(tx, receiver));
        let n_bit = self.sim.radio.n_bit;
        let airtime = end - start;
        let bit_at = |t: f64| -> u32 {
            if t >= end {
                n_bit
            } else {
                (((t - start) / airtime) * f64::from(n_bit)).round().min(f64::from(n_bit)) as u32
            }
        };
        let mut out = Vec::with_capacity(cuts.len() - 1);
        for w in cuts.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let bits = bit_at(hi) - bit_at(lo);
            let mid = 0.5 * (lo + hi);
            let interference_mw: f64 = overlapping
                .iter()
                .filter(|&&k| self.transmissions[k].start <= mid && self.transmissions[k].end >= mid)
                .filter(|&&k| self.audible(k, receiver))
                .map(|&k| dbm_to_mw(self.received_dbm(k, receiver)))
                .sum();
            let ber = ber_from_sinr(signal_mw / (self.sim.noise_mw + interference_mw));
            out.push((ber, bits));
        }
        out
    }

    fn finish(self) -> RunRecord {
        let sink = self.sim.sink;
        let covered: Vec<usize> = (0..self.nodes.len()).filter(|&k| k != sink && self.nodes[k].has_packet).collect();
        let success = covered.len() + 1 == self.nodes.len();
        let cover_time = if success {
            covered.iter().filter_map(|&k| self.nodes[k].first_rx).reduce(f64::max)
        } else {
            None
        };
        let backoffs = (0..self.nodes.len()).filter(|&k| self.nodes[k].contended).map(|k| (k, self.nodes[k].backoffs)).collect();
        let dropped = (0..self.nodes.len()).filter(|&k| self.nodes[k].dropped).collect();
        RunRecord {
            outcome: RunOutcome { covered, cover_time, success, backoffs, dropped },
            transmissions: self.transmissions,
            receptions: self.receptions,
            trace: self.trace.unwrap_or_default(),
        }
    }
}

/// A sample mean with its standard error; `stderr` is `None` below two samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: Option<f64>,
    pub samples: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Option<Self> {
        let n = xs.len();
        if n == 0 {
            return None;
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let stderr = (n > 1).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        });
        Some(Self { value: mean, stderr, samples: n })
    }

    /// Binomial proportion with stderr `√(p(1−p)/n)`.
    pub fn proportion(successes: usize, n: usize) -> Self {
        let p = successes as f64 / n as f64;
        let stderr = (n > 1).then(|| (p * (1.0 - p) / n as f64).sqrt());
        Self { value: p, stderr, samples: n }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEstimate {
    pub n_runs: usize,
    pub cover_probability: Estimate,
    pub mean_cover_number: Estimate,
    /// `(node, hitting probability)` for every non-sink node.
    pub hitting: Vec<(usize, Estimate)>,
    /// Over successful runs only; `None` when no run succeeded.
    pub mean_cover_time: Option<Estimate>,
    /// Mean backoff periods per contending node.
    pub mean_backoff_count: f64,
}

impl BatchEstimate {
    pub fn from_outcomes(sink: usize, n_nodes: usize, outcomes: &[RunOutcome]) -> Self {
        let n = outcomes.len();
        let successes = outcomes.iter().filter(|o| o.success).count();
        let counts: Vec<f64> = outcomes.iter().map(|o| o.covered.len() as f64).collect();
        let hitting = (0..n_nodes)
            .filter(|&k| k != sink)
            .map(|k| (k, Estimate::proportion(outcomes.iter().filter(|o| o.covered.contains(&k)).count(), n)))
            .collect();
        let times: Vec<f64> = outcomes.iter().filter_map(|o| o.cover_time).collect();
        let (backoff_sum, contenders) = outcomes
            .iter()
            .flat_map(|o| o.backoffs.iter())
            .fold((0u64, 0u64), |(s, c), &(_, b)| (s + u64::from(b), c + 1));
        Self {
            n_runs: n,
            cover_probability: Estimate::proportion(successes, n),
            mean_cover_number: Estimate::from_samples(&counts).expect("at least one run"),
            hitting,
            mean_cover_time: Estimate::from_samples(&times),
            mean_backoff_count: if contenders == 0 { 0.0 } else { backoff_sum as f64 / contenders as f64 },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sim(matrix: AttenuationMatrix, radio: RadioConfig) -> Simulation {
        Simulation::new(matrix, radio, CsmaConfig::default(), 1).unwrap()
    }

    #[test]
    fn event_order() {
        let mut heap = BinaryHeap::new();
        let ev = |time, kind, node, seq| SimEvent { time, kind, node, seq };
        heap.push(ev(1.0, EventKind::TxStart, 0, 1));
        heap.push(ev(1.0, EventKind::CcaCheck, 3, 2));
        heap.push(ev(1.0, EventKind::CcaCheck, 1, 3));
        heap.push(ev(0.5, EventKind::BackoffExpiry, 9, 4));
        heap.push(ev(1.0, EventKind::TxEnd, 5, 5));
        let order: Vec<(EventKind, usize)> = std::iter::from_fn(|| heap.pop()).map(|e| (e.kind, e.node)).collect();
        assert_eq!(
            order,
            [
                (EventKind::BackoffExpiry, 9),
                (EventKind::TxEnd, 5),
                (EventKind::CcaCheck, 1),
                (EventKind::CcaCheck, 3),
                (EventKind::TxStart, 0)
            ]
        );
    }

    #[test]
    fn perfect_channel_covers_everyone() {
        let s = sim(AttenuationMatrix::uniform(5, 20.0, 0.0).unwrap(), RadioConfig::default());
        for seed in 0..20 {
            let out = s.run_once(seed);
            assert!(out.success, "seed {seed}: {out:?}");
            assert_eq!(out.covered, vec![0, 2, 3, 4]);
            assert!(out.cover_time.unwrap() > 0.0);
        }
    }

    #[test]
    fn unheard_sink_covers_nobody() {
        let radio = RadioConfig::default();
        let s = sim(AttenuationMatrix::uniform(4, radio.a_max() + 5.0, 0.0).unwrap(), radio);
        let out = s.run_once(7);
        assert!(!out.success);
        assert!(out.covered.is_empty());
        assert_eq!(out.cover_time, None);
        assert_eq!(out.backoffs, vec![(1, 1)]);
    }

    #[test]
    fn same_seed_same_record() {
        let s = sim(AttenuationMatrix::posture2_running(), RadioConfig::default().with_pt(-54.0));
        let a = serde_json::to_string(&s.run_traced(99)).unwrap();
        let b = serde_json::to_string(&s.run_traced(99)).unwrap();
        assert_eq!(a, b);
        assert_eq!(s.run_once(99), s.run_traced(99).outcome);
    }

    #[test]
    fn transmissions_last_one_airtime_and_nodes_send_once() {
        let radio = RadioConfig::default().with_pt(-52.0);
        let s = sim(AttenuationMatrix::posture2_running(), radio);
        for seed in 0..200 {
            let rec = s.run_traced(seed);
            let mut senders: Vec<usize> = rec.transmissions.iter().map(|t| t.sender).collect();
            assert_eq!(senders[0], 1, "sink transmits first");
            senders.sort_unstable();
            let len = senders.len();
            senders.dedup();
            assert_eq!(senders.len(), len, "a node transmitted twice");
            for t in &rec.transmissions {
                assert_eq!(t.end, t.start + radio.airtime());
            }
            for r in &rec.receptions {
                assert_eq!(r.segments.iter().map(|s| s.1).sum::<u32>(), radio.n_bit);
            }
        }
    }

    #[test]
    fn trace_times_non_decreasing() {
        let s = sim(AttenuationMatrix::posture2_running(), RadioConfig::default().with_pt(-50.0));
        let rec = s.run_traced(3);
        assert!(rec.trace.windows(2).all(|w| w[0].time <= w[1].time));
        assert!(rec.trace.iter().all(|e| e.time >= 0.0));
        let jsonl = rec.trace_jsonl().unwrap();
        assert_eq!(jsonl.lines().count(), rec.trace.len());
        for line in jsonl.lines() {
            let _: TraceEvent = serde_json::from_str(line).unwrap();
        }
    }

    #[test]
    fn batch_of_one_has_no_stderr() {
        let s = sim(AttenuationMatrix::uniform(3, 20.0, 0.0).unwrap(), RadioConfig::default());
        let b = s.run_batch(1, 5).unwrap();
        assert_eq!(b.cover_probability.value, 1.0);
        assert_eq!(b.cover_probability.stderr, None);
        assert!(s.run_batch(0, 5).is_err());
    }

    #[test]
    fn estimate_helpers() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(e.value, 2.0);
        assert!((e.stderr.unwrap() - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let p = Estimate::proportion(30, 100);
        assert!((p.stderr.unwrap() - (0.3f64 * 0.7 / 100.0).sqrt()).abs() < 1e-15);
        assert!(Estimate::from_samples(&[]).is_none());
    }

    #[test]
    fn config_validation() {
        let bad = CsmaConfig { w_init: 0, ..CsmaConfig::default() };
        assert!(bad.validate().is_err());
        let bad = CsmaConfig { t_cca: -1.0, ..CsmaConfig::default() };
        assert!(bad.validate().is_err());
        assert!(Simulation::new(AttenuationMatrix::uniform(3, 1.0, 0.0).unwrap(), RadioConfig::default(), CsmaConfig::default(), 3).is_err());
    }
}
