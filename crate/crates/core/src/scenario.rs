//! Scenario ownership: configuration, channel/target/symbol generation and the
//! constellation machinery shared by every other module.
//!
//! All types are immutable after construction; every random draw takes an
//! explicit RNG handle so there is no hidden global state.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::CMat;

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("power split violated: P_r + P_c = {sum} but P_T = {total}")]
    PowerSplitViolation { sum: f64, total: f64 },
    #[error("degenerate geometry: need N > K >= 1 (got N = {n}, K = {k})")]
    DegenerateGeometry { n: usize, k: usize },
    #[error("non-positive distance in {which}")]
    NonPositiveDistance { which: &'static str },
    #[error("unsupported constellation order M = {0} (PSK with M in {{2,4,8,...}})")]
    UnsupportedOrder(usize),
    #[error("bad field {field}: {why}")]
    BadField { field: &'static str, why: String },
}

/// All physical and algorithmic parameters of one operating point.
///
/// Field names mirror the configuration file schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Base-station antenna count.
    #[serde(rename = "N")]
    pub n: usize,
    /// Number of single-antenna UEs.
    #[serde(rename = "K")]
    pub k: usize,
    /// Number of potential radar targets (beams).
    #[serde(rename = "T")]
    pub t: usize,
    /// Snapshots per sensing frame.
    #[serde(rename = "L")]
    pub l: usize,
    /// Total transmit power (normalised).
    #[serde(rename = "P_T")]
    pub p_total: f64,
    /// Radar power share.
    #[serde(rename = "P_r")]
    pub p_radar: f64,
    /// Communication power share.
    #[serde(rename = "P_c")]
    pub p_comm: f64,
    /// Pathloss exponent.
    pub zeta: f64,
    /// BS->UE distances.
    pub d_c: Vec<f64>,
    /// BS->target distances.
    pub d_r: Vec<f64>,
    /// Channel entry variance.
    pub sigma_h2: f64,
    /// Sweep-point value of P_R/N0 in dB; the noise power is derived from it.
    pub snr_db: f64,
    /// Constellation order.
    #[serde(rename = "M")]
    pub m: usize,
    /// Target false-alarm probability for threshold calibration.
    #[serde(rename = "P_FA")]
    pub p_fa: f64,
    /// Radar KLD lower bounds (bits), one per target.
    #[serde(rename = "A_t")]
    pub a_t: Vec<f64>,
    /// Communication KLD lower bounds (bits), one per UE.
    #[serde(rename = "B_k")]
    pub b_k: Vec<f64>,
    /// Root RNG seed.
    pub seed: u64,
    /// Default Monte Carlo trial count for single-shot operations.
    pub trials: usize,
    /// Sign of the radar pathloss exponent: -1 models attenuation with
    /// distance, +1 reproduces the amplifying convention.
    pub radar_pathloss_sign: i8,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n: 20,
            k: 3,
            t: 3,
            l: 100,
            p_total: 1.0,
            p_radar: 0.5,
            p_comm: 0.5,
            zeta: 3.0,
            d_c: vec![1.5, 2.1, 1.0],
            d_r: vec![7.5, 8.625, 7.125],
            sigma_h2: 1.0,
            snr_db: 10.0,
            m: 4,
            p_fa: 1e-2,
            a_t: vec![10.0, 10.0, 10.0],
            b_k: vec![60.0, 60.0, 60.0],
            seed: 1,
            trials: 2000,
            radar_pathloss_sign: -1,
        }
    }
}

impl ScenarioConfig {
    /// Noise power at this sweep point: sigma_n^2 = P_r * 10^(-snr_db/10).
    pub fn sigma_n2(&self) -> f64 {
        self.p_radar * 10f64.powf(-self.snr_db / 10.0)
    }

    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        let mut c = self.clone();
        c.snr_db = snr_db;
        c
    }

    /// Equal per-UE power split p_k = P_c / K.
    pub fn equal_power_alloc(&self) -> Vec<f64> {
        vec![self.p_comm / self.k as f64; self.k]
    }

    /// Per-UE pathloss power factor d_c[k]^(-zeta).
    pub fn comm_pathloss_pow(&self, k: usize) -> f64 {
        self.d_c[k].powf(-self.zeta)
    }

    /// Per-target amplitude factor d_r[t]^(sign * zeta / 2).
    pub fn radar_amp(&self, t: usize) -> f64 {
        self.d_r[t]
            .powf(f64::from(self.radar_pathloss_sign) * self.zeta / 2.0)
    }
}

/// Validate every type invariant; returns the config unchanged on success.
pub fn validate_config(cfg: ScenarioConfig) -> Result<ScenarioConfig, ScenarioError> {
    if cfg.k < 1 || cfg.n <= cfg.k {
        return Err(ScenarioError::DegenerateGeometry { n: cfg.n, k: cfg.k });
    }
    let sum = cfg.p_radar + cfg.p_comm;
    if (sum - cfg.p_total).abs() > 1e-9 * cfg.p_total.max(1.0) {
        return Err(ScenarioError::PowerSplitViolation {
            sum,
            total: cfg.p_total,
        });
    }
    if cfg.d_c.iter().any(|&d| d <= 0.0) {
        return Err(ScenarioError::NonPositiveDistance { which: "d_c" });
    }
    if cfg.d_r.iter().any(|&d| d <= 0.0) {
        return Err(ScenarioError::NonPositiveDistance { which: "d_r" });
    }
    if cfg.t < 1 {
        return Err(ScenarioError::BadField {
            field: "T",
            why: "need T >= 1".into(),
        });
    }
    if cfg.l < 1 {
        return Err(ScenarioError::BadField {
            field: "L",
            why: "need L >= 1".into(),
        });
    }
    if cfg.d_c.len() != cfg.k {
        return Err(ScenarioError::BadField {
            field: "d_c",
            why: format!("expected K = {} entries, got {}", cfg.k, cfg.d_c.len()),
        });
    }
    if cfg.d_r.len() != cfg.t {
        return Err(ScenarioError::BadField {
            field: "d_r",
            why: format!("expected T = {} entries, got {}", cfg.t, cfg.d_r.len()),
        });
    }
    if cfg.a_t.len() != cfg.t {
        return Err(ScenarioError::BadField {
            field: "A_t",
            why: format!("expected T = {} entries, got {}", cfg.t, cfg.a_t.len()),
        });
    }
    if cfg.b_k.len() != cfg.k {
        return Err(ScenarioError::BadField {
            field: "B_k",
            why: format!("expected K = {} entries, got {}", cfg.k, cfg.b_k.len()),
        });
    }
    if cfg.m < 2 || !cfg.m.is_power_of_two() {
        return Err(ScenarioError::UnsupportedOrder(cfg.m));
    }
    if !(cfg.p_fa > 0.0 && cfg.p_fa < 1.0) {
        return Err(ScenarioError::BadField {
            field: "P_FA",
            why: "need 0 < P_FA < 1".into(),
        });
    }
    if cfg.sigma_h2 < 0.0 {
        return Err(ScenarioError::BadField {
            field: "sigma_h2",
            why: "need sigma_h2 >= 0".into(),
        });
    }
    if cfg.radar_pathloss_sign != 1 && cfg.radar_pathloss_sign != -1 {
        return Err(ScenarioError::BadField {
            field: "radar_pathloss_sign",
            why: "must be +1 or -1".into(),
        });
    }
    Ok(cfg)
}

/// Downlink channel matrix and per-UE pathloss amplitudes.
#[derive(Debug, Clone)]
pub struct ChannelSet {
    /// N x K, column h_k is the channel to UE k.
    pub h: CMat,
    /// d_c[k]^(-zeta/2).
    pub pathloss_amp: Vec<f64>,
}

/// Per-target response matrices with presence flags and amplitude factors.
#[derive(Debug, Clone)]
pub struct TargetSet {
    /// N x N response matrix per target (the matrix that multiplies the
    /// transmitted snapshot in the return path).
    pub response: Vec<CMat>,
    pub present: Vec<bool>,
    /// d_r[t]^(sign * zeta / 2).
    pub radar_amp: Vec<f64>,
}

/// Draw an r x c matrix with i.i.d. CN(0, variance) entries.
pub fn draw_complex_gaussian<R: Rng>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> CMat {
    let std = (variance / 2.0).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * std, im * std)
    })
}

/// Draw the UE channel set for this scenario.
pub fn draw_channels<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> ChannelSet {
    let h = draw_complex_gaussian(rng, cfg.n, cfg.k, cfg.sigma_h2);
    let pathloss_amp = (0..cfg.k)
        .map(|k| cfg.d_c[k].powf(-cfg.zeta / 2.0))
        .collect();
    ChannelSet { h, pathloss_amp }
}

/// Draw target response matrices; `presence[t]` is the ground-truth
/// hypothesis flag and is stored alongside the draws.
pub fn draw_targets<R: Rng>(cfg: &ScenarioConfig, rng: &mut R, presence: &[bool]) -> TargetSet {
    assert_eq!(presence.len(), cfg.t, "presence flags must match T");
    let response = (0..cfg.t)
        .map(|_| draw_complex_gaussian(rng, cfg.n, cfg.n, 1.0))
        .collect();
    let radar_amp = (0..cfg.t).map(|t| cfg.radar_amp(t)).collect();
    TargetSet {
        response,
        present: presence.to_vec(),
        radar_amp,
    }
}

/// Unit-energy PSK constellation with Gray-coded bit labels.
#[derive(Debug, Clone)]
pub struct Constellation {
    pub symbols: Vec<Complex64>,
    /// Gray bit label of symbols[i].
    pub bit_labels: Vec<u32>,
    pub bits_per_symbol: u32,
    /// Sum over ordered pairs of dissimilar symbols of |s_n - s_m|^2.
    pub lambda: f64,
}

/// Build the order-M PSK constellation (M = 4 places symbols at
/// (+-1 +- j)/sqrt(2)).
pub fn build_constellation(m: usize) -> Result<Constellation, ScenarioError> {
    if m < 2 || !m.is_power_of_two() {
        return Err(ScenarioError::UnsupportedOrder(m));
    }
    let offset = if m == 4 {
        std::f64::consts::FRAC_PI_4
    } else {
        0.0
    };
    let symbols: Vec<Complex64> = (0..m)
        .map(|i| {
            let th = offset + 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            Complex64::new(th.cos(), th.sin())
        })
        .collect();
    let bit_labels: Vec<u32> = (0..m as u32).map(|i| i ^ (i >> 1)).collect();
    let mut lambda = 0.0;
    for (a, sa) in symbols.iter().enumerate() {
        for (b, sb) in symbols.iter().enumerate() {
            if a != b {
                lambda += (sa - sb).norm_sqr();
            }
        }
    }
    Ok(Constellation {
        symbols,
        bit_labels,
        bits_per_symbol: m.trailing_zeros(),
        lambda,
    })
}

impl Constellation {
    pub fn order(&self) -> usize {
        self.symbols.len()
    }

    /// lambda / (M (M-1)), the per-pair average used in the KLD formulas.
    pub fn pair_mean(&self) -> f64 {
        let m = self.order() as f64;
        self.lambda / (m * (m - 1.0))
    }

    /// Index of the nearest symbol.
    pub fn detect(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, s) in self.symbols.iter().enumerate() {
            let d = (z - s).norm_sqr();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Bit errors between the labels of two symbol indices.
    pub fn bit_errors(&self, sent: usize, decided: usize) -> u32 {
        (self.bit_labels[sent] ^ self.bit_labels[decided]).count_ones()
    }

    /// Draw a uniform symbol index.
    pub fn draw_index<R: Rng>(&self, rng: &mut R) -> usize {
        rng.random_range(0..self.order())
    }
}
