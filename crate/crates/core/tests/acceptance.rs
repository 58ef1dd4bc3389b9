//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! before asserting, so `cargo test --test acceptance -- --nocapture` gives a
//! readable scorecard.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::erf::erfc;

use wban_core::experiment::{self, ExperimentConfig, PtSweep};
use wban_core::markov::{CachedChannelLinks, FixedLinks};
use wban_core::{
    k_cover_probability, AttenuationMatrix, BroadcastChain, InterferenceMode, LinkModel,
    OutcomeDistribution, RadioConfig, Simulation,
};

fn report(id: u32, pass: bool, detail: impl AsRef<str>) {
    println!("criterion {id}: {} {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed < Duration::from_secs(limit_secs)
}

// ---------------------------------------------------------------------------
// 1. Oracle equivalence against exhaustive path enumeration
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq)]
enum S {
    L,
    T,
    R,
}

/// Walks every path of the jump chain and accumulates absorption mass by
/// the set of covered non-sink nodes (bit `k` = node `k`).
fn enumerate_paths(state: &mut Vec<S>, sink: usize, p: &[Vec<f64>], weight: f64, out: &mut HashMap<u32, f64>) {
    if weight == 0.0 {
        return;
    }
    let n = state.len();
    let tx: Vec<usize> = (0..n).filter(|&k| state[k] == S::T).collect();
    if tx.is_empty() {
        let covered = (0..n).filter(|&k| k != sink && state[k] == S::R).fold(0u32, |m, k| m | 1 << k);
        *out.entry(covered).or_default() += weight;
        return;
    }
    let listeners: Vec<usize> = (0..n).filter(|&k| state[k] == S::L).collect();
    for &t in &tx {
        for subset in 0u32..1 << listeners.len() {
            let mut w = weight / tx.len() as f64;
            for (b, &l) in listeners.iter().enumerate() {
                w *= if subset >> b & 1 == 1 { p[t][l] } else { 1.0 - p[t][l] };
            }
            let saved = state.clone();
            state[t] = S::R;
            for (b, &l) in listeners.iter().enumerate() {
                if subset >> b & 1 == 1 {
                    state[l] = S::T;
                }
            }
            enumerate_paths(state, sink, p, w, out);
            *state = saved;
        }
    }
}

fn random_link_matrix(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| match (i == j, rng.random_range(0..10)) {
                    (true, _) => 0.0,
                    (false, 0) => 0.0,
                    (false, 1) => 1.0,
                    _ => rng.random::<f64>(),
                })
                .collect()
        })
        .collect()
}

#[test]
fn c1_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    let networks = 200;
    for _ in 0..networks {
        let n = rng.random_range(2..=4);
        let sink = rng.random_range(0..n);
        let p = random_link_matrix(&mut rng, n);
        let links = FixedLinks::new(n, p.iter().flatten().copied().collect()).unwrap();
        let chain = BroadcastChain::build(n, sink, &mut links.clone(), 1.0).unwrap();
        let dist = chain.absorption_distribution();

        let mut state = vec![S::L; n];
        state[sink] = S::T;
        let mut oracle = HashMap::new();
        enumerate_paths(&mut state, sink, &p, 1.0, &mut oracle);

        for (mask, &m) in dist.masses().iter().enumerate() {
            let covered: u32 =
                dist.nodes().iter().enumerate().filter(|(b, _)| mask >> b & 1 == 1).fold(0, |acc, (_, &k)| acc | 1 << k);
            let expected = oracle.get(&covered).copied().unwrap_or(0.0);
            worst = worst.max((m - expected).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-12 && within(elapsed, 10);
    report(1, pass, format!("{networks} networks, max |Δ| = {worst:.2e}, {elapsed:.2?}"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 2. Model against simulator on the running posture
// ---------------------------------------------------------------------------

#[test]
fn c2_model_simulator_cross_validation() {
    let start = Instant::now();
    let matrix = AttenuationMatrix::posture2_running();
    let base = ExperimentConfig { pt_sweep: PtSweep { start: -60.0, stop: -50.0, step: 2.0 }, ..Default::default() };
    let points = base.pt_sweep.points();
    assert_eq!(points.len(), 6);

    let analytic = |mode: InterferenceMode, pt: f64| {
        let cfg = ExperimentConfig { mode, ..base.clone() };
        cfg.chain_at(&matrix, pt).unwrap().absorption_distribution().cover_probability()
    };
    let (mut err_general, mut err_none) = (0.0, 0.0);
    let mut rows = Vec::new();
    for &pt in &points {
        let sim = Simulation::new(matrix.clone(), base.radio.with_pt(pt), base.csma, base.sink).unwrap();
        let est = sim.run_batch(1000, base.seed).unwrap().cover_probability.value;
        let general = analytic(InterferenceMode::General, pt);
        let none = analytic(InterferenceMode::NoInterference, pt);
        err_general += (general - est).abs() / est;
        err_none += (none - est).abs() / est;
        rows.push(format!("{pt}: sim {est:.3} general {general:.3} none {none:.3}"));
    }
    err_general /= points.len() as f64;
    err_none /= points.len() as f64;
    let elapsed = start.elapsed();
    for r in &rows {
        println!("    {r}");
    }
    let pass = err_general <= 0.10 && err_general < err_none && within(elapsed, 300);
    report(
        2,
        pass,
        format!("mean relative error general {err_general:.4}, no-interference {err_none:.4}, {elapsed:.2?}"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 3. State-space bound
// ---------------------------------------------------------------------------

#[test]
fn c3_state_space_bound() {
    let matrix = AttenuationMatrix::posture2_running();
    let cfg = ExperimentConfig::default();
    let channel = cfg.chain_at(&matrix, -50.0).unwrap().len();
    // every link possible but never certain: the largest reachable set
    let dense = BroadcastChain::build(7, 1, &mut FixedLinks::uniform(7, 0.5).unwrap(), 1.0).unwrap().len();
    let pass = channel <= 730 && dense <= 730;
    report(3, pass, format!("posture chain {channel} states, dense chain {dense} states (bound 730)"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 4. Metric identities
// ---------------------------------------------------------------------------

fn identity_gaps(dist: &OutcomeDistribution) -> (f64, bool) {
    let hits = dist.hitting_probabilities();
    let sum: f64 = hits.iter().map(|h| h.1).sum();
    let min = hits.iter().map(|h| h.1).fold(f64::INFINITY, f64::min);
    ((dist.average_cover_number() - sum).abs(), dist.cover_probability() <= min + 1e-15)
}

#[test]
fn c4_metric_identities() {
    let matrix = AttenuationMatrix::posture2_running();
    let mut worst = 0.0f64;
    let mut ordered = true;
    let mut configs = 0;
    for mode in [InterferenceMode::General, InterferenceMode::NoInterference] {
        let cfg = ExperimentConfig { mode, ..Default::default() };
        for (_, dist) in cfg.distributions(&matrix).unwrap() {
            let (gap, ok) = identity_gaps(&dist);
            worst = worst.max(gap);
            ordered &= ok;
            configs += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.random_range(2..=5);
        let p = random_link_matrix(&mut rng, n);
        let mut links = FixedLinks::new(n, p.concat()).unwrap();
        let dist = BroadcastChain::build(n, rng.random_range(0..n), &mut links, 1.0).unwrap().absorption_distribution();
        let (gap, ok) = identity_gaps(&dist);
        worst = worst.max(gap);
        ordered &= ok;
        configs += 1;
    }
    let pass = worst <= 1e-12 && ordered;
    report(4, pass, format!("{configs} configurations, max |E[N] − Σ h_j| = {worst:.2e}, cover ≤ min h: {ordered}"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 5. Monotonicity in power and in repetitions
// ---------------------------------------------------------------------------

#[test]
fn c5_monotonicity() {
    let matrix = AttenuationMatrix::posture2_running();
    let mut pt_monotone = true;
    let mut k_monotone = true;
    let mut k1_exact = true;
    for mode in [InterferenceMode::General, InterferenceMode::NoInterference] {
        let cfg = ExperimentConfig { mode, ..Default::default() };
        let dists = cfg.distributions(&matrix).unwrap();
        assert_eq!(dists.len(), 21);
        let covers: Vec<f64> = dists.iter().map(|(_, d)| d.cover_probability()).collect();
        pt_monotone &= covers.windows(2).all(|w| w[1] >= w[0]);
        for (_, d) in &dists {
            let ks: Vec<f64> = (1..=10).map(|k| k_cover_probability(d, k).unwrap()).collect();
            k_monotone &= ks.windows(2).all(|w| w[1] >= w[0]);
            k1_exact &= ks[0] == d.cover_probability();
        }
    }
    let pass = pt_monotone && k_monotone && k1_exact;
    report(5, pass, format!("PT monotone {pt_monotone}, K monotone {k_monotone}, K=1 exact {k1_exact}"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 6. Multi-broadcast against resampling
// ---------------------------------------------------------------------------

#[test]
fn c6_multibroadcast_monte_carlo() {
    let start = Instant::now();
    let matrix = AttenuationMatrix::posture2_running();
    let cfg = ExperimentConfig::default();
    let dist = cfg.chain_at(&matrix, -57.0).unwrap().absorption_distribution();
    let masses = dist.masses();
    let full = dist.full_mask();
    let cdf: Vec<f64> = masses
        .iter()
        .scan(0.0, |acc, &m| {
            *acc += m;
            Some(*acc)
        })
        .collect();
    let total = *cdf.last().unwrap();
    let draw = |rng: &mut ChaCha8Rng| {
        let u = rng.random::<f64>() * total;
        cdf.partition_point(|&c| c <= u).min(masses.len() - 1)
    };

    let samples = 100_000;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut lines = Vec::new();
    let mut pass = true;
    for k in [2u32, 4, 8] {
        let hits = (0..samples)
            .filter(|_| (0..k).fold(0usize, |acc, _| acc | draw(&mut rng)) == full)
            .count();
        let mc = hits as f64 / samples as f64;
        let exact = k_cover_probability(&dist, k).unwrap();
        let se = (exact * (1.0 - exact) / samples as f64).sqrt();
        let ok = (mc - exact).abs() <= 3.0 * se;
        pass &= ok;
        lines.push(format!("K={k} exact {exact:.4} mc {mc:.4} ({:.1}σ)", (mc - exact).abs() / se));
    }
    let elapsed = start.elapsed();
    pass &= within(elapsed, 30);
    report(6, pass, format!("{}, {elapsed:.2?}", lines.join("; ")));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 7. Channel quadrature against Monte-Carlo deconditioning
// ---------------------------------------------------------------------------

/// Decoding probability at attenuation `a` written directly from the channel
/// definition; interferers hit one half of the packet.
fn decode_oracle(radio: &RadioConfig, a: f64, interferers_mw: &[f64], p_i: f64) -> f64 {
    if radio.pt_dbm - a < radio.sn_dbm {
        return 0.0;
    }
    let mw = |dbm: f64| 10f64.powf(dbm / 10.0);
    let pr = mw(radio.pt_dbm - a);
    let noise = mw(radio.pn_dbm);
    let bits_ok = |sinr: f64, bits: u32| (1.0 - 0.5 * erfc(sinr.sqrt())).powi(bits as i32);
    let n = radio.n_bit;
    let hit = n / 2;
    let mut pd = 0.0;
    for subset in 0usize..1 << interferers_mw.len() {
        let size = subset.count_ones() as i32;
        let weight = p_i.powi(size) * (1.0 - p_i).powi(interferers_mw.len() as i32 - size);
        pd += weight
            * if subset == 0 {
                bits_ok(pr / noise, n)
            } else {
                let pi: f64 =
                    interferers_mw.iter().enumerate().filter(|(b, _)| subset >> b & 1 == 1).map(|(_, p)| p).sum();
                bits_ok(pr / (noise + pi), hit) * bits_ok(pr / noise, n - hit)
            };
    }
    pd
}

#[test]
fn c7_channel_quadrature() {
    let start = Instant::now();
    let matrix = AttenuationMatrix::posture2_running();
    let cfg = ExperimentConfig::default();
    let radio = cfg.radio.with_pt(-55.0);
    let tau = cfg.mean_tx_state_time();
    let model = LinkModel::new(matrix.clone(), radio, InterferenceMode::General, tau).unwrap();
    let p_i = model.overlap_probability();
    let draws = 1_000_000;
    let mut worst_sigma = 0.0f64;
    let mut failures = Vec::new();
    let mut checked = 0;
    for i in 0..7 {
        for j in (i + 1)..7 {
            // one interference-free context and one with the lowest-index
            // bystander transmitting
            let bystander = (0..7).find(|&k| k != i && k != j).unwrap();
            for candidates in [vec![], vec![bystander]] {
                let quad = model.link_success_probability(i, j, &candidates).unwrap();
                let inter: Vec<f64> = candidates
                    .iter()
                    .map(|&k| 10f64.powf((radio.pt_dbm - matrix.mean_db(k, j)) / 10.0))
                    .collect();
                let normal = Normal::new(matrix.mean_db(i, j), matrix.std_db(i, j)).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(((i * 7 + j) * 2 + candidates.len()) as u64);
                let (mut sum, mut sum_sq) = (0.0, 0.0);
                for _ in 0..draws {
                    let v = decode_oracle(&radio, normal.sample(&mut rng), &inter, p_i);
                    sum += v;
                    sum_sq += v * v;
                }
                let mean = sum / draws as f64;
                let var = (sum_sq / draws as f64 - mean * mean).max(0.0) * draws as f64 / (draws - 1) as f64;
                let se = (var / draws as f64).sqrt();
                let tol = (3.0 * se).max(1e-8);
                let gap = (quad - mean).abs();
                if se > 0.0 {
                    worst_sigma = worst_sigma.max(gap / se);
                }
                if gap > tol {
                    failures.push(format!("({i},{j}) {candidates:?}: quad {quad} mc {mean} se {se:.2e}"));
                }
                checked += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && within(elapsed, 120);
    for f in &failures {
        println!("    {f}");
    }
    report(7, pass, format!("{checked} link contexts, worst {worst_sigma:.2}σ, {elapsed:.2?}"));
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 8. Average cover time
// ---------------------------------------------------------------------------

#[test]
fn c8_average_cover_time() {
    let tau = ExperimentConfig::default().mean_tx_state_time();
    let mut worst_two = 0.0f64;
    for p in [1.0, 0.9, 0.5, 0.01] {
        let mut links = FixedLinks::uniform(2, p).unwrap();
        let t = BroadcastChain::build(2, 0, &mut links, tau).unwrap().average_cover_time().unwrap();
        worst_two = worst_two.max((t - 2.0 * tau).abs() / tau);
    }

    let cfg = ExperimentConfig::default();
    let matrix = AttenuationMatrix::posture2_running();
    let model = LinkModel::new(matrix, cfg.radio.with_pt(-55.0), InterferenceMode::General, tau).unwrap();
    let mut links = CachedChannelLinks::new(model);
    let base = BroadcastChain::build(7, 1, &mut links, tau).unwrap().average_cover_time().unwrap();
    let mut worst_scale = 0.0f64;
    for alpha in [0.25, 3.0, 17.5] {
        let scaled = BroadcastChain::build(7, 1, &mut links, alpha * tau).unwrap().average_cover_time().unwrap();
        worst_scale = worst_scale.max((scaled - alpha * base).abs() / (alpha * base));
    }
    let pass = worst_two <= 1e-12 && worst_scale <= 1e-9;
    report(
        8,
        pass,
        format!("2-node rel. error {worst_two:.2e}, N=7 scaling rel. error {worst_scale:.2e} (base {base:.4e} s)"),
    );
    assert!(pass);
}

// ---------------------------------------------------------------------------
// 9. Determinism of the simulation command
// ---------------------------------------------------------------------------

#[test]
fn c9_simulate_determinism() {
    let cfg = ExperimentConfig {
        pt_sweep: PtSweep { start: -60.0, stop: -50.0, step: 2.0 },
        n_runs: 300,
        seed: 99,
        ..Default::default()
    };
    let render = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let report = experiment::simulate(&cfg).unwrap();
            let mut csv = Vec::new();
            report.write_csv(&mut csv).unwrap();
            (csv, report.to_json().unwrap().into_bytes())
        })
    };
    let first = render(1);
    let second = render(4);
    let pass = first == second && !first.0.is_empty();
    report(9, pass, format!("{} CSV bytes, {} JSON bytes identical across runs", first.0.len(), first.1.len()));
    assert!(pass);
}
