//! Link-level reception model: normal attenuation, QPSK over AWGN, and the
//! overlap-based interference approximation.
//!
//! Powers travel in dBm through the public API and are converted to
//! milliwatts wherever they are added or divided.

use serde::{Deserialize, Serialize};

use crate::dataset::AttenuationMatrix;
use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;

/// Absolute tolerance of the deconditioning integral.
pub const QUADRATURE_TOL: f64 = 1e-8;
/// Half-width of the integration window in standard deviations.
pub const QUADRATURE_SIGMAS: f64 = 8.0;

pub const DEFAULT_PT_DBM: f64 = -55.0;
pub const DEFAULT_SN_DBM: f64 = -100.0;
pub const DEFAULT_PN_DBM: f64 = -110.0;
pub const DEFAULT_N_BIT: u32 = 128;
pub const DEFAULT_BITRATE_BPS: f64 = 250_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    /// Transmission power shared by every node.
    pub pt_dbm: f64,
    /// Receiver sensitivity; weaker signals are not heard at all.
    pub sn_dbm: f64,
    /// Total in-band noise power.
    pub pn_dbm: f64,
    pub n_bit: u32,
    pub bitrate_bps: f64,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            pt_dbm: DEFAULT_PT_DBM,
            sn_dbm: DEFAULT_SN_DBM,
            pn_dbm: DEFAULT_PN_DBM,
            n_bit: DEFAULT_N_BIT,
            bitrate_bps: DEFAULT_BITRATE_BPS,
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pt_dbm.is_finite() && self.sn_dbm.is_finite() && self.pn_dbm.is_finite()) {
            return Err(Error::InvalidConfig("radio powers must be finite".into()));
        }
        if self.pt_dbm <= self.sn_dbm {
            return Err(Error::InvalidConfig(format!(
                "pt_dbm ({}) must exceed sn_dbm ({})",
                self.pt_dbm, self.sn_dbm
            )));
        }
        if self.n_bit == 0 {
            return Err(Error::InvalidConfig("n_bit must be at least 1".into()));
        }
        if !(self.bitrate_bps > 0.0 && self.bitrate_bps.is_finite()) {
            return Err(Error::InvalidConfig("bitrate_bps must be positive".into()));
        }
        Ok(())
    }

    /// Largest attenuation at which a packet is still heard: `PT − SN`.
    pub fn a_max(&self) -> f64 {
        self.pt_dbm - self.sn_dbm
    }

    /// Packet airtime in seconds.
    pub fn airtime(&self) -> f64 {
        f64::from(self.n_bit) / self.bitrate_bps
    }

    pub fn with_pt(mut self, pt_dbm: f64) -> Self {
        self.pt_dbm = pt_dbm;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterferenceMode {
    /// Concurrent transmissions are ignored.
    NoInterference,
    /// Concurrent transmitters overlap the target packet with probability `p_I`.
    General,
}

impl std::str::FromStr for InterferenceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no_interference" | "no-interference" => Ok(Self::NoInterference),
            "general" => Ok(Self::General),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for InterferenceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::NoInterference => "no_interference",
            Self::General => "general",
        })
    }
}

#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// Power left after `attenuation_db` of path loss.
#[inline]
pub fn received_power(pt_dbm: f64, attenuation_db: f64) -> f64 {
    pt_dbm - attenuation_db
}

/// QPSK bit error rate over AWGN: `½·erfc(√(PR / (PN + PI)))`.
///
/// `noise_plus_interference_mw` is the linear noise-plus-interference power.
pub fn ber_qpsk_awgn(pr_dbm: f64, noise_plus_interference_mw: f64) -> Result<f64> {
    if !(noise_plus_interference_mw > 0.0) {
        return Err(Error::Domain(format!(
            "noise plus interference must be positive, got {noise_plus_interference_mw}"
        )));
    }
    Ok(ber_from_sinr(dbm_to_mw(pr_dbm) / noise_plus_interference_mw))
}

#[inline]
pub(crate) fn ber_from_sinr(sinr: f64) -> f64 {
    if sinr.is_nan() || sinr <= 0.0 {
        return 0.5;
    }
    (0.5 * libm::erfc(sinr.sqrt())).clamp(0.0, 0.5)
}

/// `(1 − ber)^bits` evaluated in the log domain.
#[inline]
pub(crate) fn segment_success(ber: f64, bits: u32) -> f64 {
    if bits == 0 {
        return 1.0;
    }
    if ber >= 1.0 {
        return 0.0;
    }
    (f64::from(bits) * (-ber).ln_1p()).exp()
}

/// Probability that every bit survives when the packet is split into
/// segments with distinct bit error rates.
pub fn packet_decode_prob(segments: &[(f64, u32)], n_bit: u32) -> Result<f64> {
    let total: u64 = segments.iter().map(|&(_, b)| u64::from(b)).sum();
    if total != u64::from(n_bit) {
        return Err(Error::SegmentMismatch { got: total, expected: u64::from(n_bit) });
    }
    let mut p = 1.0;
    for &(ber, bits) in segments {
        if !(0.0..=1.0).contains(&ber) {
            return Err(Error::Domain(format!("bit error rate {ber} outside [0,1]")));
        }
        p *= segment_success(ber, bits);
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Probability that a concurrent transmitter is still in its transmission
/// state after `packet_airtime`, given exponential residual time with mean
/// `mean_tx_state_time`.
pub fn overlap_probability(packet_airtime: f64, mean_tx_state_time: f64) -> Result<f64> {
    if !(packet_airtime >= 0.0 && mean_tx_state_time > 0.0) {
        return Err(Error::Domain(format!(
            "overlap probability needs airtime >= 0 and mean time > 0, got {packet_airtime} and {mean_tx_state_time}"
        )));
    }
    Ok(-(-packet_airtime / mean_tx_state_time).exp_m1())
}

/// Probability mass of each interferer subset, indexed by bitmask over the
/// candidate list. Sums to one.
pub fn interferer_subset_masses(p_i: f64, n_candidates: usize) -> Vec<f64> {
    (0..1usize << n_candidates)
        .map(|mask| {
            let k = mask.count_ones() as i32;
            p_i.powi(k) * (1.0 - p_i).powi(n_candidates as i32 - k)
        })
        .collect()
}

/// Per-link success probabilities `P_{i,j}` for a fixed radio and dataset.
#[derive(Debug, Clone)]
pub struct LinkModel {
    matrix: AttenuationMatrix,
    radio: RadioConfig,
    mode: InterferenceMode,
    p_overlap: f64,
    noise_mw: f64,
}

impl LinkModel {
    /// `mean_tx_state_time` fixes the overlap probability used in general mode.
    pub fn new(matrix: AttenuationMatrix, radio: RadioConfig, mode: InterferenceMode, mean_tx_state_time: f64) -> Result<Self> {
        radio.validate()?;
        let p_overlap = overlap_probability(radio.airtime(), mean_tx_state_time)?;
        Ok(Self { matrix, radio, mode, p_overlap, noise_mw: dbm_to_mw(radio.pn_dbm) })
    }

    pub fn matrix(&self) -> &AttenuationMatrix {
        &self.matrix
    }

    pub fn radio(&self) -> &RadioConfig {
        &self.radio
    }

    pub fn mode(&self) -> InterferenceMode {
        self.mode
    }

    pub fn overlap_probability(&self) -> f64 {
        self.p_overlap
    }

    fn check_context(&self, i: usize, j: usize, candidates: &[usize]) -> Result<()> {
        let n = self.matrix.n_nodes();
        if i >= n || j >= n || i == j {
            return Err(Error::InvalidContext(format!("link ({i},{j}) invalid for {n} nodes")));
        }
        if self.mode == InterferenceMode::General {
            for (idx, &k) in candidates.iter().enumerate() {
                if k >= n || k == i || k == j || candidates[..idx].contains(&k) {
                    return Err(Error::InvalidContext(format!(
                        "interferer {k} invalid for link ({i},{j}) with candidates {candidates:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Decoding probability at `j` for a packet from `i` conditioned on the
    /// attenuation `attenuation_db` and ignoring sensitivity.
    pub fn conditional_decode_prob(&self, j: usize, attenuation_db: f64, candidates: &[usize]) -> f64 {
        let pr_mw = dbm_to_mw(received_power(self.radio.pt_dbm, attenuation_db));
        let clean = segment_success(ber_from_sinr(pr_mw / self.noise_mw), self.radio.n_bit);
        if self.mode == InterferenceMode::NoInterference || candidates.is_empty() {
            return clean;
        }
        self.mixed_decode_prob(pr_mw, &self.interferer_powers(j, candidates))
    }

    fn interferer_powers(&self, j: usize, candidates: &[usize]) -> Vec<f64> {
        candidates
            .iter()
            .map(|&k| dbm_to_mw(received_power(self.radio.pt_dbm, self.matrix.mean_db(k, j))))
            .collect()
    }

    // Interferers in a subset are taken to overlap the same half of the packet.
    fn mixed_decode_prob(&self, pr_mw: f64, interferer_mw: &[f64]) -> f64 {
        let n_bit = self.radio.n_bit;
        let hit_bits = n_bit / 2;
        let clean_bits = n_bit - hit_bits;
        let ber_clean = ber_from_sinr(pr_mw / self.noise_mw);
        let clean_full = segment_success(ber_clean, n_bit);
        let clean_half = segment_success(ber_clean, clean_bits);
        let masses = interferer_subset_masses(self.p_overlap, interferer_mw.len());
        let mut pd = masses[0] * clean_full;
        for (mask, &mass) in masses.iter().enumerate().skip(1) {
            let pi: f64 = interferer_mw
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &p)| p)
                .sum();
            let ber_int = ber_from_sinr(pr_mw / (self.noise_mw + pi));
            pd += mass * segment_success(ber_int, hit_bits) * clean_half;
        }
        pd
    }

    /// `P_{i,j}`: the decoding probability deconditioned over the attenuation
    /// distribution, with reception impossible above `a_max`.
    ///
    /// `candidates` are the other nodes currently transmitting; they are
    /// ignored in no-interference mode.
    pub fn link_success_probability(&self, i: usize, j: usize, candidates: &[usize]) -> Result<f64> {
        self.check_context(i, j, candidates)?;
        let candidates = match self.mode {
            InterferenceMode::NoInterference => &[][..],
            InterferenceMode::General => candidates,
        };
        let mean = self.matrix.mean_db(i, j);
        let std = self.matrix.std_db(i, j);
        let a_max = self.radio.a_max();
        if std == 0.0 {
            return Ok(if mean < a_max { self.conditional_decode_prob(j, mean, candidates) } else { 0.0 });
        }
        let lo = mean - QUADRATURE_SIGMAS * std;
        let hi = (mean + QUADRATURE_SIGMAS * std).min(a_max);
        if hi <= lo {
            return Ok(0.0);
        }
        let interferers = self.interferer_powers(j, candidates);
        let pt = self.radio.pt_dbm;
        let norm = 1.0 / (std * (2.0 * std::f64::consts::PI).sqrt());
        let integrand = |x: f64| {
            let z = (x - mean) / std;
            let pdf = norm * (-0.5 * z * z).exp();
            let pr_mw = dbm_to_mw(pt - x);
            let pd = if interferers.is_empty() {
                segment_success(ber_from_sinr(pr_mw / self.noise_mw), self.radio.n_bit)
            } else {
                self.mixed_decode_prob(pr_mw, &interferers)
            };
            pd * pdf
        };
        let integral = adaptive_simpson(integrand, lo, hi, QUADRATURE_TOL)?;
        Ok(integral.value.clamp(0.0, 1.0))
    }
}
