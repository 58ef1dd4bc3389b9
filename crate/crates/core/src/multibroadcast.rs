//! Repeating the same broadcast `K` times.
//!
//! Runs are independent draws from one single-run outcome distribution. A
//! node is covered if any run reaches it, so
//!
//! ```text
//! P(all covered) = Σ_{A ⊆ nodes} (−1)^{|A|} · m(A)^K
//! ```
//!
//! where `m(A)` is the single-run probability that no node of `A` is reached.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::OutcomeDistribution;

/// Numerical slack tolerated outside `[0, 1]` before clamping.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiBroadcastResult {
    pub k: u32,
    pub cover_probability_k: f64,
    /// `(node, probability that at least one of K runs reaches it)`.
    pub per_node_hitting_k: Vec<(usize, f64)>,
}

/// `miss[A]`: probability that a single run reaches none of the nodes in `A`.
fn miss_probabilities(dist: &OutcomeDistribution) -> Vec<f64> {
    let bits = dist.nodes().len();
    let full = dist.full_mask();
    // subset sums: below[B] = Σ_{c ⊆ B} mass[c]
    let mut below = dist.masses().to_vec();
    for b in 0..bits {
        for set in 0..below.len() {
            if set >> b & 1 == 1 {
                below[set] += below[set ^ (1 << b)];
            }
        }
    }
    (0..=full).map(|a| below[full & !a]).collect()
}

pub fn k_cover_probability(dist: &OutcomeDistribution, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(Error::ZeroRuns);
    }
    if k == 1 {
        return Ok(dist.cover_probability());
    }
    // Sum the failure side so the empty set, whose miss probability is
    // exactly one, never contributes rounding error that compounds with K.
    let miss = miss_probabilities(dist);
    let mut failure = 0.0;
    for (a, &m) in miss.iter().enumerate().skip(1) {
        let term = m.powi(k as i32);
        if a.count_ones() % 2 == 1 {
            failure += term;
        } else {
            failure -= term;
        }
    }
    let sum = 1.0 - failure;
    debug_assert!((-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&sum), "inclusion-exclusion left [0,1]: {sum}");
    Ok(sum.clamp(0.0, 1.0))
}

pub fn multi_broadcast(dist: &OutcomeDistribution, k: u32) -> Result<MultiBroadcastResult> {
    let cover_probability_k = k_cover_probability(dist, k)?;
    let per_node_hitting_k = dist
        .hitting_probabilities()
        .into_iter()
        .map(|(node, h)| (node, 1.0 - (1.0 - h).powi(k as i32)))
        .collect();
    Ok(MultiBroadcastResult { k, cover_probability_k, per_node_hitting_k })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbaqueCell {
    pub pt_dbm: f64,
    pub k: u32,
    pub cover_probability: f64,
}

/// Cover probability over a transmission-power × repetition grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Abaque {
    pub pt_dbm: Vec<f64>,
    pub k_values: Vec<u32>,
    /// Row-major: `cells[p * k_values.len() + k]`.
    pub cells: Vec<AbaqueCell>,
}

impl Abaque {
    pub fn get(&self, pt_index: usize, k_index: usize) -> f64 {
        self.cells[pt_index * self.k_values.len() + k_index].cover_probability
    }

    /// Smallest listed `K` reaching `threshold` at each power, if any.
    pub fn min_k_for_threshold(&self, threshold: f64) -> Vec<(f64, Option<u32>)> {
        self.pt_dbm
            .iter()
            .enumerate()
            .map(|(p, &pt)| {
                let k = self
                    .k_values
                    .iter()
                    .enumerate()
                    .filter(|&(ki, _)| self.get(p, ki) >= threshold)
                    .map(|(_, &k)| k)
                    .min();
                (pt, k)
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["pt_dbm", "k", "cover_probability"])?;
        for c in &self.cells {
            wtr.write_record([c.pt_dbm.to_string(), c.k.to_string(), c.cover_probability.to_string()])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn abaque(dists: &[(f64, OutcomeDistribution)], k_values: &[u32]) -> Result<Abaque> {
    if dists.is_empty() {
        return Err(Error::InvalidConfig("abaque needs at least one transmission power".into()));
    }
    let mut cells = Vec::with_capacity(dists.len() * k_values.len());
    for (pt, dist) in dists {
        for &k in k_values {
            cells.push(AbaqueCell { pt_dbm: *pt, k, cover_probability: k_cover_probability(dist, k)? });
        }
    }
    Ok(Abaque { pt_dbm: dists.iter().map(|(pt, _)| *pt).collect(), k_values: k_values.to_vec(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Outcome distribution with independent per-node coverage `q[b]`.
    fn independent(q: &[f64]) -> OutcomeDistribution {
        let n = q.len();
        let mass = (0..1usize << n)
            .map(|c| (0..n).map(|b| if c >> b & 1 == 1 { q[b] } else { 1.0 - q[b] }).product())
            .collect();
        OutcomeDistribution::from_masses(n + 1, 0, mass).unwrap()
    }

    #[test]
    fn k_one_is_identity() {
        let d = independent(&[0.3, 0.9, 0.5]);
        assert_eq!(k_cover_probability(&d, 1).unwrap(), d.cover_probability());
        assert!(matches!(k_cover_probability(&d, 0), Err(Error::ZeroRuns)));
    }

    #[test]
    fn independent_closed_form() {
        let q = [0.3, 0.9, 0.5, 0.05, 0.77];
        let d = independent(&q);
        for k in 1..=10 {
            let closed: f64 = q.iter().map(|&x| 1.0 - (1.0 - x).powi(k)).product();
            let ie = k_cover_probability(&d, k as u32).unwrap();
            assert!((ie - closed).abs() < 1e-13, "k={k}: {ie} vs {closed}");
        }
    }

    #[test]
    fn monotone_in_k() {
        let mass = vec![0.2, 0.05, 0.1, 0.15, 0.1, 0.1, 0.1, 0.2];
        let d = OutcomeDistribution::from_masses(4, 3, mass).unwrap();
        let mut prev = 0.0;
        for k in 1..=10 {
            let p = k_cover_probability(&d, k).unwrap();
            assert!(p >= prev - 1e-15);
            assert!(p >= d.cover_probability() - 1e-15);
            prev = p;
        }
    }

    #[test]
    fn dead_network_stays_dead() {
        let mut mass = vec![0.0; 8];
        mass[0] = 1.0;
        let d = OutcomeDistribution::from_masses(4, 0, mass).unwrap();
        let ab = abaque(&[(-60.0, d.clone()), (-50.0, d)], &[1, 2, 5, 10]).unwrap();
        assert!(ab.cells.iter().all(|c| c.cover_probability == 0.0));
    }

    #[test]
    fn per_node_hitting_grows() {
        let d = independent(&[0.3, 0.9]);
        let r = multi_broadcast(&d, 3).unwrap();
        assert!((r.per_node_hitting_k[0].1 - (1.0 - 0.7f64.powi(3))).abs() < 1e-15);
        assert_eq!(r.per_node_hitting_k[1].0, 2);
    }

    #[test]
    fn abaque_layout_and_threshold() {
        let lo = independent(&[0.5, 0.5]);
        let hi = independent(&[0.95, 0.99]);
        let ab = abaque(&[(-58.0, lo), (-52.0, hi)], &[1, 2, 3, 4]).unwrap();
        assert_eq!(ab.cells.len(), 8);
        assert_eq!(ab.cells[5].pt_dbm, -52.0);
        assert_eq!(ab.cells[5].k, 2);
        let mins = ab.min_k_for_threshold(0.9);
        assert_eq!(mins[1], (-52.0, Some(1)));
        // (1 - 0.5^k)^2 >= 0.9 first at k = 5, beyond the listed values
        assert_eq!(mins[0], (-58.0, None));
        assert!(abaque(&[], &[1]).is_err());
        let mut buf = Vec::new();
        ab.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("pt_dbm,k,cover_probability\n-58,1,0.25\n"));
    }
}
