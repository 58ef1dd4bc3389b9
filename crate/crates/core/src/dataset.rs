//! Per-link path-loss statistics.
//!
//! Every unordered node pair carries a normal attenuation `A ~ N(mean, std²)`
//! in dB. Files store one row per pair:
//!
//! ```text
//! node_i,node_j,mean_db,std_db
//! 0,1,31.4,1.4
//! ```

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const POSTURE2_RUNNING: &str = include_str!("../data/posture2_running.csv");

/// Node labels of the seven-device body layout used by the shipped dataset.
pub const BODY_NODE_NAMES: [&str; 7] = ["navel", "chest", "head", "upper_arm", "ankle", "thigh", "wrist"];

/// Symmetric matrix of attenuation means and standard deviations.
///
/// Diagonal entries are never read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationMatrix {
    n_nodes: usize,
    mean_db: Vec<f64>,
    std_db: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRow {
    node_i: usize,
    node_j: usize,
    mean_db: f64,
    std_db: f64,
}

impl AttenuationMatrix {
    /// Builds a matrix from `(i, j, mean_db, std_db)` pairs. Every unordered
    /// pair must appear exactly once.
    pub fn from_pairs(n_nodes: usize, pairs: impl IntoIterator<Item = (usize, usize, f64, f64)>) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::InvalidMatrix(format!("need at least 2 nodes, got {n_nodes}")));
        }
        let mut mean_db = vec![f64::NAN; n_nodes * n_nodes];
        let mut std_db = vec![f64::NAN; n_nodes * n_nodes];
        for (i, j, mean, std) in pairs {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::InvalidMatrix(format!("pair ({i},{j}) out of range for {n_nodes} nodes")));
            }
            if i == j {
                return Err(Error::InvalidMatrix(format!("self-link ({i},{j})")));
            }
            if !mean.is_finite() || !std.is_finite() {
                return Err(Error::InvalidMatrix(format!("pair ({i},{j}) has non-finite values")));
            }
            if std < 0.0 {
                return Err(Error::InvalidMatrix(format!("pair ({i},{j}) has negative std {std}")));
            }
            let a = i * n_nodes + j;
            let b = j * n_nodes + i;
            if !mean_db[a].is_nan() {
                return Err(Error::InvalidMatrix(format!("pair ({i},{j}) listed twice")));
            }
            mean_db[a] = mean;
            mean_db[b] = mean;
            std_db[a] = std;
            std_db[b] = std;
        }
        for i in 0..n_nodes {
            mean_db[i * n_nodes + i] = 0.0;
            std_db[i * n_nodes + i] = 0.0;
            for j in (i + 1)..n_nodes {
                if mean_db[i * n_nodes + j].is_nan() {
                    return Err(Error::InvalidMatrix(format!("missing pair ({i},{j})")));
                }
            }
        }
        Ok(Self { n_nodes, mean_db, std_db })
    }

    /// Every link has the same statistics.
    pub fn uniform(n_nodes: usize, mean_db: f64, std_db: f64) -> Result<Self> {
        let pairs = (0..n_nodes).flat_map(|i| ((i + 1)..n_nodes).map(move |j| (i, j, mean_db, std_db)));
        Self::from_pairs(n_nodes, pairs)
    }

    /// Running posture: mean and standard deviation of path loss between
    /// navel, chest, head, upper arm, ankle, thigh and wrist.
    pub fn posture2_running() -> Self {
        Self::from_csv_reader(POSTURE2_RUNNING.as_bytes()).expect("bundled dataset is valid")
    }

    /// Reads the CSV format; the node count is inferred from the largest index.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected = ["node_i", "node_j", "mean_db", "std_db"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::InvalidMatrix(format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut rows = Vec::new();
        for row in rdr.deserialize::<PairRow>() {
            let row = row?;
            rows.push((row.node_i, row.node_j, row.mean_db, row.std_db));
        }
        let n_nodes = rows.iter().map(|&(i, j, _, _)| i.max(j) + 1).max().unwrap_or(0);
        Self::from_pairs(n_nodes, rows)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for i in 0..self.n_nodes {
            for j in (i + 1)..self.n_nodes {
                wtr.serialize(PairRow { node_i: i, node_j: j, mean_db: self.mean_db(i, j), std_db: self.std_db(i, j) })?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    #[inline]
    pub fn mean_db(&self, i: usize, j: usize) -> f64 {
        self.mean_db[i * self.n_nodes + j]
    }

    #[inline]
    pub fn std_db(&self, i: usize, j: usize) -> f64 {
        self.std_db[i * self.n_nodes + j]
    }

    /// Smallest mean attenuation over all links incident to `node`.
    pub fn min_mean_from(&self, node: usize) -> f64 {
        (0..self.n_nodes)
            .filter(|&k| k != node)
            .map(|k| self.mean_db(node, k))
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn posture2_has_21_symmetric_pairs() {
        let m = AttenuationMatrix::posture2_running();
        assert_eq!(m.n_nodes(), 7);
        assert_eq!(POSTURE2_RUNNING.lines().count(), 22);
        assert_eq!(m.mean_db(0, 1), 31.4);
        assert_eq!(m.std_db(1, 0), 1.4);
        assert_eq!(m.mean_db(4, 0), 57.9);
        assert_eq!(m.mean_db(1, 4), 61.0);
        assert_eq!(m.std_db(5, 6), 11.6);
        for i in 0..7 {
            for j in 0..7 {
                if i != j {
                    assert_eq!(m.mean_db(i, j), m.mean_db(j, i));
                    assert_eq!(m.std_db(i, j), m.std_db(j, i));
                    assert!(m.std_db(i, j) >= 0.0);
                }
            }
        }
    }

    #[test]
    fn rejects_missing_and_duplicate_pairs() {
        let err = AttenuationMatrix::from_pairs(3, [(0, 1, 1.0, 1.0), (0, 2, 1.0, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("missing pair (1,2)"), "{err}");
        let err = AttenuationMatrix::from_pairs(2, [(0, 1, 1.0, 1.0), (1, 0, 1.0, 1.0)]).unwrap_err();
        assert!(err.to_string().contains("twice"), "{err}");
        let err = AttenuationMatrix::from_pairs(2, [(0, 1, 1.0, -1.0)]).unwrap_err();
        assert!(err.to_string().contains("negative"), "{err}");
    }

    #[test]
    fn rejects_wrong_header() {
        let err = AttenuationMatrix::from_csv_reader("a,b,c,d\n0,1,2,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::InvalidMatrix(_)));
    }

    #[test]
    fn csv_round_trip() {
        let m = AttenuationMatrix::posture2_running();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert_eq!(AttenuationMatrix::from_csv_reader(buf.as_slice()).unwrap(), m);
    }
}
