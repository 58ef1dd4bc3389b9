//! Experiment orchestration: power sweeps through the analytical chain or
//! the simulator, multi-broadcast tables, and their CSV/JSON renderings.
//!
//! Every rendering starts with the fully resolved configuration so a table
//! can be regenerated from its own header. CSV output carries it on a
//! leading `# config: {...}` comment line.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{InterferenceMode, RadioConfig};
use crate::dataset::AttenuationMatrix;
use crate::error::{Error, Result};
use crate::markov::{mean_tx_state_time, BroadcastChain, OutcomeDistribution, DEFAULT_N_BACKOFFS};
use crate::multibroadcast::{abaque, Abaque};
use crate::sim::{BatchEstimate, CsmaConfig, Estimate, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PtSweep {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for PtSweep {
    fn default() -> Self {
        Self { start: -60.0, stop: -50.0, step: 0.5 }
    }
}

impl PtSweep {
    pub fn single(pt_dbm: f64) -> Self {
        Self { start: pt_dbm, stop: pt_dbm, step: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            return Err(Error::InvalidConfig("pt_sweep values must be finite".into()));
        }
        if !(self.step > 0.0) {
            return Err(Error::InvalidConfig(format!("pt_sweep.step must be positive, got {}", self.step)));
        }
        if self.start > self.stop {
            return Err(Error::InvalidConfig(format!(
                "pt_sweep.start ({}) exceeds pt_sweep.stop ({})",
                self.start, self.stop
            )));
        }
        Ok(())
    }

    /// Grid points `start + i·step`, snapped to 1e-9 dB so repeated
    /// addition never adds or loses a row.
    pub fn points(&self) -> Vec<f64> {
        let span = (self.stop - self.start) / self.step;
        let count = (span + 1e-9).floor() as usize + 1;
        (0..count).map(|i| ((self.start + i as f64 * self.step) * 1e9).round() / 1e9).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Attenuation CSV; the bundled running-posture table when absent.
    pub dataset: Option<PathBuf>,
    pub sink: usize,
    /// `pt_dbm` is replaced by each sweep point.
    pub radio: RadioConfig,
    pub csma: CsmaConfig,
    pub mode: InterferenceMode,
    pub pt_sweep: PtSweep,
    pub k_values: Vec<u32>,
    pub n_runs: usize,
    pub seed: u64,
    /// Mean backoff periods per transmission in the analytical timing.
    pub n_backoffs: f64,
    /// For `abaque`: report the smallest K reaching this cover probability.
    pub threshold: Option<f64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            sink: 1,
            radio: RadioConfig::default(),
            csma: CsmaConfig::default(),
            mode: InterferenceMode::General,
            pt_sweep: PtSweep::default(),
            k_values: (1..=10).collect(),
            n_runs: 1000,
            seed: 1,
            n_backoffs: DEFAULT_N_BACKOFFS,
            threshold: None,
        }
    }
}

impl ExperimentConfig {
    /// Parses a JSON document; syntax and type errors carry line and column.
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.pt_sweep.validate()?;
        for pt in self.pt_sweep.points() {
            self.radio.with_pt(pt).validate()?;
        }
        self.csma.validate()?;
        if let Some(path) = &self.dataset {
            if !path.exists() {
                return Err(Error::InvalidConfig(format!("dataset {} does not exist", path.display())));
            }
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::InvalidConfig("k_values must be non-empty and all at least 1".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::InvalidConfig("n_runs must be at least 1".into()));
        }
        if !(self.n_backoffs >= 0.0 && self.n_backoffs.is_finite()) {
            return Err(Error::InvalidConfig(format!("n_backoffs must be non-negative, got {}", self.n_backoffs)));
        }
        if let Some(t) = self.threshold {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::InvalidConfig(format!("threshold must lie in [0,1], got {t}")));
            }
        }
        Ok(())
    }

    pub fn load_matrix(&self) -> Result<AttenuationMatrix> {
        let matrix = match &self.dataset {
            Some(path) => AttenuationMatrix::from_path(path)?,
            None => AttenuationMatrix::posture2_running(),
        };
        if self.sink >= matrix.n_nodes() {
            return Err(Error::InvalidConfig(format!(
                "sink {} out of range for {} nodes",
                self.sink,
                matrix.n_nodes()
            )));
        }
        Ok(matrix)
    }

    pub fn mean_tx_state_time(&self) -> f64 {
        mean_tx_state_time(&self.csma, &self.radio, self.n_backoffs)
    }

    pub fn chain_at(&self, matrix: &AttenuationMatrix, pt_dbm: f64) -> Result<BroadcastChain> {
        BroadcastChain::from_channel(matrix, &self.radio.with_pt(pt_dbm), self.mode, self.sink, self.mean_tx_state_time())
    }

    /// Outcome distribution of one broadcast at every sweep point.
    pub fn distributions(&self, matrix: &AttenuationMatrix) -> Result<Vec<(f64, OutcomeDistribution)>> {
        self.pt_sweep
            .points()
            .into_par_iter()
            .map(|pt| Ok((pt, self.chain_at(matrix, pt)?.absorption_distribution())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeRow {
    pub pt_dbm: f64,
    pub n_states: usize,
    pub cover_probability: f64,
    pub average_cover_number: f64,
    /// `(node, hitting probability)` per non-sink node.
    pub hitting: Vec<(usize, f64)>,
    /// `None` when the cover probability is zero.
    pub average_cover_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeReport {
    pub config: ExperimentConfig,
    pub rows: Vec<AnalyzeRow>,
}

pub fn analyze(config: &ExperimentConfig) -> Result<AnalyzeReport> {
    config.validate()?;
    let matrix = config.load_matrix()?;
    let rows = config
        .pt_sweep
        .points()
        .into_par_iter()
        .map(|pt| {
            let chain = config.chain_at(&matrix, pt)?;
            let dist = chain.absorption_distribution();
            let average_cover_time = match chain.average_cover_time() {
                Ok(t) => Some(t),
                Err(Error::UndefinedConditioning) => None,
                Err(e) => return Err(e),
            };
            Ok(AnalyzeRow {
                pt_dbm: pt,
                n_states: chain.len(),
                cover_probability: dist.cover_probability(),
                average_cover_number: dist.average_cover_number(),
                hitting: dist.hitting_probabilities(),
                average_cover_time,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AnalyzeReport { config: config.clone(), rows })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_config_line<W: Write>(w: &mut W, config: &ExperimentConfig) -> Result<()> {
    writeln!(w, "# config: {}", config.to_json()?)?;
    Ok(())
}

impl AnalyzeReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_config_line(&mut w, &self.config)?;
        let mut wtr = csv::Writer::from_writer(w);
        let nodes: Vec<usize> = self.rows.first().map(|r| r.hitting.iter().map(|h| h.0).collect()).unwrap_or_default();
        let mut header = vec!["pt_dbm".to_string(), "mode".into(), "n_states".into(), "cover_probability".into(), "average_cover_number".into()];
        header.extend(nodes.iter().map(|k| format!("hitting_{k}")));
        header.push("average_cover_time".into());
        wtr.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.pt_dbm.to_string(),
                self.config.mode.to_string(),
                r.n_states.to_string(),
                r.cover_probability.to_string(),
                r.average_cover_number.to_string(),
            ];
            rec.extend(r.hitting.iter().map(|h| h.1.to_string()));
            rec.push(opt(r.average_cover_time));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRow {
    pub pt_dbm: f64,
    pub estimate: BatchEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub config: ExperimentConfig,
    pub rows: Vec<SimulateRow>,
}

/// Simulator batches at every sweep point. Each point reuses `seed`, so
/// neighbouring powers share random numbers.
pub fn simulate(config: &ExperimentConfig) -> Result<SimulateReport> {
    config.validate()?;
    let matrix = config.load_matrix()?;
    let rows = config
        .pt_sweep
        .points()
        .into_iter()
        .map(|pt| {
            let sim = Simulation::new(matrix.clone(), config.radio.with_pt(pt), config.csma, config.sink)?;
            Ok(SimulateRow { pt_dbm: pt, estimate: sim.run_batch(config.n_runs, config.seed)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimulateReport { config: config.clone(), rows })
}

fn est(e: &Estimate) -> [String; 2] {
    [e.value.to_string(), opt(e.stderr)]
}

impl SimulateReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_config_line(&mut w, &self.config)?;
        let mut wtr = csv::Writer::from_writer(w);
        let nodes: Vec<usize> =
            self.rows.first().map(|r| r.estimate.hitting.iter().map(|h| h.0).collect()).unwrap_or_default();
        let mut header: Vec<String> = [
            "pt_dbm",
            "n_runs",
            "cover_probability",
            "cover_probability_stderr",
            "mean_cover_number",
            "mean_cover_number_stderr",
        ]
        .map(String::from)
        .to_vec();
        for k in &nodes {
            header.push(format!("hitting_{k}"));
            header.push(format!("hitting_{k}_stderr"));
        }
        header.extend(["mean_cover_time", "mean_cover_time_stderr", "mean_backoff_count"].map(String::from));
        wtr.write_record(&header)?;
        for r in &self.rows {
            let e = &r.estimate;
            let mut rec = vec![r.pt_dbm.to_string(), e.n_runs.to_string()];
            rec.extend(est(&e.cover_probability));
            rec.extend(est(&e.mean_cover_number));
            for (_, h) in &e.hitting {
                rec.extend(est(h));
            }
            match &e.mean_cover_time {
                Some(t) => rec.extend(est(t)),
                None => rec.extend([String::new(), String::new()]),
            }
            rec.push(e.mean_backoff_count.to_string());
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbaqueReport {
    pub config: ExperimentConfig,
    pub table: Abaque,
    /// `(pt_dbm, smallest K)` when a threshold was requested.
    pub min_k_for_threshold: Option<Vec<(f64, Option<u32>)>>,
}

pub fn abaque_report(config: &ExperimentConfig) -> Result<AbaqueReport> {
    config.validate()?;
    let matrix = config.load_matrix()?;
    let dists = config.distributions(&matrix)?;
    let table = abaque(&dists, &config.k_values)?;
    let min_k_for_threshold = config.threshold.map(|t| table.min_k_for_threshold(t));
    Ok(AbaqueReport { config: config.clone(), table, min_k_for_threshold })
}

impl AbaqueReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        write_config_line(&mut w, &self.config)?;
        self.table.write_csv(w)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Reads back a CSV written by this module, skipping the config comment.
pub fn read_csv_table(text: &str) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rdr.headers()?.iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok((header, rows))
}

/// Resolved configuration embedded in a CSV written by this module.
pub fn embedded_config(text: &str) -> Result<ExperimentConfig> {
    let line = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config: "))
        .ok_or_else(|| Error::InvalidConfig("missing `# config:` line".into()))?;
    ExperimentConfig::from_json(line)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grid_counts() {
        assert_eq!(PtSweep::default().points().len(), 21);
        let p = PtSweep { start: -60.0, stop: -50.0, step: 0.1 }.points();
        assert_eq!(p.len(), 101);
        assert_eq!(p[100], -50.0);
        assert_eq!(p[37], -56.3);
        assert_eq!(PtSweep { start: -60.0, stop: -50.0, step: 2.0 }.points(), [-60.0, -58.0, -56.0, -54.0, -52.0, -50.0]);
        assert_eq!(PtSweep::single(-55.0).points(), [-55.0]);
        assert_eq!(PtSweep { start: -60.0, stop: -50.0, step: 3.0 }.points(), [-60.0, -57.0, -54.0, -51.0]);
    }

    #[test]
    fn validation_messages() {
        let mut c = ExperimentConfig::default();
        c.pt_sweep.step = 0.0;
        assert!(c.validate().unwrap_err().to_string().contains("step"));
        let mut c = ExperimentConfig::default();
        c.pt_sweep.start = -40.0;
        assert!(c.validate().unwrap_err().to_string().contains("exceeds"));
        let mut c = ExperimentConfig::default();
        c.dataset = Some("/nonexistent/x.csv".into());
        assert!(c.validate().unwrap_err().to_string().contains("does not exist"));
        let mut c = ExperimentConfig::default();
        c.k_values = vec![0];
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.radio.sn_dbm = -55.0;
        assert!(c.validate().unwrap_err().to_string().contains("must exceed"));
    }

    #[test]
    fn json_errors_carry_position() {
        let err = ExperimentConfig::from_json("{\n  \"sink\": 1,\n  \"mode\": \"loud\"\n}").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = ExperimentConfig::from_json("{\n\"bogus\": 3}").unwrap_err();
        assert!(err.to_string().contains("bogus"), "{err}");
    }

    #[test]
    fn partial_config_fills_defaults() {
        let c = ExperimentConfig::from_json(r#"{"radio": {"sn_dbm": -95.0}, "n_runs": 10}"#).unwrap();
        assert_eq!(c.radio.sn_dbm, -95.0);
        assert_eq!(c.radio.n_bit, RadioConfig::default().n_bit);
        assert_eq!(c.n_runs, 10);
        assert_eq!(c.sink, 1);
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
