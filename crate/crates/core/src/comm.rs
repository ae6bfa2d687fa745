//! Communication subsystem: ZF precoding, interference statistics, closed-form
//! and conditional KLD, and Monte Carlo BER simulation under radar
//! interference.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::CMat;
use crate::radar::RadarWaveformTensor;
use crate::scenario::{ChannelSet, Constellation, ScenarioConfig};

#[derive(Debug, Error)]
pub enum CommError {
    #[error("singular channel: H H^H is not invertible within conditioning threshold")]
    SingularChannel,
}

/// Communication precoder with per-UE power weights.
#[derive(Debug, Clone)]
pub struct CommPrecoder {
    /// N x K, column k serves UE k.
    pub w: CMat,
    pub p: Vec<f64>,
}

/// Zero-forcing precoder from the channel pseudo-inverse, with per-column
/// power normalisation: w_k = sqrt(p_k) w~_k / ||w~_k||.
///
/// The per-user effective gain |h_k^T w_k|^2 / p_k then follows the
/// Gamma(N-K+1, 1) law used by the closed-form KLD.
pub fn zf_precoder(h: &CMat, p: &[f64], p_c: f64) -> Result<CommPrecoder, CommError> {
    let k = h.ncols();
    assert_eq!(p.len(), k, "need one power weight per UE");
    let g = h.transpose(); // K x N, row k is h_k^T
    let gram = &g * g.adjoint();
    let inv = gram.try_inverse().ok_or(CommError::SingularChannel)?;
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CommError::SingularChannel);
    }
    let w_tilde = g.adjoint() * inv; // N x K
    let mut w = w_tilde;
    for ki in 0..k {
        let norm = w.column(ki).norm();
        if norm < 1e-300 {
            return Err(CommError::SingularChannel);
        }
        let s = Complex64::new(p[ki].sqrt() / norm, 0.0);
        w.column_mut(ki).apply(|z| *z *= s);
    }
    let total: f64 = p.iter().sum();
    debug_assert!((crate::linalg::fro_sq(&w) - total).abs() <= 1e-9 * total.max(1.0));
    let _ = p_c;
    Ok(CommPrecoder {
        w,
        p: p.to_vec(),
    })
}

/// Radar-interference-plus-noise variance seen by UE k when the radar frame
/// power (sum_t ||W_{r,t}||_F^2 / L) equals `radar_frame_power`.
pub fn interference_variance_for_power(
    cfg: &ScenarioConfig,
    k: usize,
    radar_frame_power: f64,
) -> f64 {
    cfg.comm_pathloss_pow(k) * radar_frame_power * cfg.sigma_h2 + cfg.sigma_n2()
}

/// CLT interference variance at the configured radar budget:
/// d_c[k]^(-zeta) P_r sigma_h^2 + sigma_n^2.
pub fn interference_variance(cfg: &ScenarioConfig, k: usize) -> f64 {
    interference_variance_for_power(cfg, k, cfg.p_radar)
}

pub(crate) fn kld_zf_closed_form_parts(
    cons: &Constellation,
    d_pow: f64,
    p_k: f64,
    n: usize,
    k_users: usize,
    sigma_eta2: f64,
) -> f64 {
    let m = cons.order() as f64;
    cons.lambda * d_pow * p_k * (n - k_users) as f64
        / (m * (m - 1.0) * sigma_eta2 * std::f64::consts::LN_2)
}

/// Closed-form ZF communication KLD (bits) for UE k with the equal power
/// split: lambda d^(-zeta) p_k (N-K) / (M (M-1) sigma_eta^2 ln 2).
pub fn kld_zf_closed_form(cfg: &ScenarioConfig, cons: &Constellation, k: usize) -> f64 {
    kld_zf_closed_form_parts(
        cons,
        cfg.comm_pathloss_pow(k),
        cfg.equal_power_alloc()[k],
        cfg.n,
        cfg.k,
        interference_variance(cfg, k),
    )
}

/// Same closed form with the radar frame power taken from an explicit
/// waveform (the coupling used inside the optimizers).
pub fn kld_zf_closed_form_for_power(
    cfg: &ScenarioConfig,
    cons: &Constellation,
    k: usize,
    radar_frame_power: f64,
) -> f64 {
    kld_zf_closed_form_parts(
        cons,
        cfg.comm_pathloss_pow(k),
        cfg.equal_power_alloc()[k],
        cfg.n,
        cfg.k,
        interference_variance_for_power(cfg, k, radar_frame_power),
    )
}

/// Conditional communication KLD (bits) for an arbitrary precoder and given
/// channel: the average pairwise divergence over dissimilar symbols, a scaled
/// SINR.
pub fn kld_conditional(
    cfg: &ScenarioConfig,
    cons: &Constellation,
    wc: &CMat,
    h: &CMat,
    k: usize,
    sigma_eta2: f64,
) -> f64 {
    let m = cons.order() as f64;
    let d_pow = cfg.comm_pathloss_pow(k);
    let hk = h.column(k);
    let mut signal = 0.0;
    let mut iui = 0.0;
    for i in 0..wc.ncols() {
        let gain: Complex64 = hk
            .iter()
            .zip(wc.column(i).iter())
            .map(|(a, b)| a * b)
            .sum();
        if i == k {
            signal = gain.norm_sqr();
        } else {
            iui += gain.norm_sqr();
        }
    }
    let denom = d_pow * iui + sigma_eta2;
    cons.lambda * d_pow * signal / (m * (m - 1.0) * denom * std::f64::consts::LN_2)
}

/// Monte Carlo BER result.
#[derive(Debug, Clone)]
pub struct BerReport {
    pub ber: Vec<f64>,
    pub bit_errors: Vec<u64>,
    pub bits_per_ue: u64,
    pub trials: usize,
    /// Per-UE flag raised when fewer than 10 errors were observed.
    pub low_confidence: Vec<bool>,
}

impl BerReport {
    pub fn mean_ber(&self) -> f64 {
        self.ber.iter().sum::<f64>() / self.ber.len() as f64
    }
}

/// Simulate the downlink with IUI, the actual radar snapshot interference and
/// AWGN; per-UE scalar minimum-distance detection on the equalised symbol.
pub fn simulate_ber<R: Rng>(
    cfg: &ScenarioConfig,
    cons: &Constellation,
    wc: &CMat,
    wr: &RadarWaveformTensor,
    channels: &ChannelSet,
    trials: usize,
    rng: &mut R,
) -> BerReport {
    let k_users = cfg.k;
    let l_total = wr.snapshots();
    let sigma_n2 = cfg.sigma_n2();
    let noise_std = (sigma_n2 / 2.0).sqrt();

    // effective gains h_k^T w_i and per-snapshot radar leakage h_k^T W_{r,l} 1
    let g = channels.h.transpose();
    let eff = &g * wc; // K x K
    let mut radar_cols = CMat::zeros(cfg.n, l_total);
    for li in 0..l_total {
        radar_cols.set_column(li, &wr.snapshot_sum(li));
    }
    let leak = &g * radar_cols; // K x L

    let mut bit_errors = vec![0u64; k_users];
    let mut idx = vec![0usize; k_users];
    for s in 0..trials {
        let li = s % l_total;
        for slot in idx.iter_mut() {
            *slot = cons.draw_index(rng);
        }
        for k in 0..k_users {
            let amp = channels.pathloss_amp[k];
            let mut rx = leak[(k, li)];
            for (i, &sym_i) in idx.iter().enumerate() {
                rx += eff[(k, i)] * cons.symbols[sym_i];
            }
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            let y = rx * amp + Complex64::new(re * noise_std, im * noise_std);
            let z = y / (eff[(k, k)] * amp);
            let decided = cons.detect(z);
            bit_errors[k] += u64::from(cons.bit_errors(idx[k], decided));
        }
    }
    let bits_per_ue = trials as u64 * u64::from(cons.bits_per_symbol);
    let ber = bit_errors
        .iter()
        .map(|&e| e as f64 / bits_per_ue as f64)
        .collect();
    let low_confidence = bit_errors.iter().map(|&e| e < 10).collect();
    BerReport {
        ber,
        bit_errors,
        bits_per_ue,
        trials,
        low_confidence,
    }
}
