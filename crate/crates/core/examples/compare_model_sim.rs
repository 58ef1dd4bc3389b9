//! Prints analytical and simulated cover probability side by side over the
//! running-posture power sweep.
//!
//! cargo run --release -p wban-core --example compare_model_sim [n_runs] [n_bit]

use wban_core::experiment::{ExperimentConfig, PtSweep};
use wban_core::{AttenuationMatrix, InterferenceMode, Simulation};

fn main() -> wban_core::Result<()> {
    let n_runs: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(1000);
    let matrix = AttenuationMatrix::posture2_running();
    let mut cfg = ExperimentConfig { pt_sweep: PtSweep { start: -60.0, stop: -50.0, step: 2.0 }, ..Default::default() };
    if let Some(n_bit) = std::env::args().nth(2).and_then(|a| a.parse().ok()) {
        cfg.radio.n_bit = n_bit;
    }
    println!("pt_dbm,sim,sim_stderr,general,no_interference,backoffs");
    let (mut err_gen, mut err_no) = (0.0, 0.0);
    let points = cfg.pt_sweep.points();
    for &pt in &points {
        let sim = Simulation::new(matrix.clone(), cfg.radio.with_pt(pt), cfg.csma, cfg.sink)?;
        let est = sim.run_batch(n_runs, cfg.seed)?;
        cfg.mode = InterferenceMode::General;
        let general = cfg.chain_at(&matrix, pt)?.absorption_distribution().cover_probability();
        cfg.mode = InterferenceMode::NoInterference;
        let none = cfg.chain_at(&matrix, pt)?.absorption_distribution().cover_probability();
        let s = est.cover_probability.value;
        err_gen += (general - s).abs() / s;
        err_no += (none - s).abs() / s;
        println!("{pt},{s},{},{general},{none},{}", est.cover_probability.stderr.unwrap_or(0.0), est.mean_backoff_count);
    }
    let n = points.len() as f64;
    println!("mean relative error: general {:.4}, no_interference {:.4}", err_gen / n, err_no / n);
    Ok(())
}
