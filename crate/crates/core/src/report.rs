//! Joint KLD accounting for a waveform pair.

use serde::Serialize;

use crate::comm::{interference_variance_for_power, kld_conditional};
use crate::linalg::CMat;
use crate::radar::{beam_covariance, radar_kld, RadarError, RadarWaveformTensor};
use crate::scenario::{ChannelSet, Constellation, ScenarioConfig, TargetSet};

/// Per-entity KLD values plus the system aggregate
/// KLD_ISAC = mean_k KLD_c,k + mean_t KLD_r,t.
#[derive(Debug, Clone, Serialize)]
pub struct KldReport {
    pub kld_c: Vec<f64>,
    pub kld_r: Vec<f64>,
    pub kld_isac: f64,
}

/// Evaluate comm and radar KLD for the given waveforms on a drawn scene.
///
/// The comm values are conditional on the drawn channel with the CLT
/// surrogate for radar interference; the radar values use the drawn target
/// responses.
pub fn evaluate_kld(
    cfg: &ScenarioConfig,
    cons: &Constellation,
    channels: &ChannelSet,
    targets: &TargetSet,
    wc: &CMat,
    wr: &RadarWaveformTensor,
) -> Result<KldReport, RadarError> {
    let radar_power = wr.power();
    let sigma_n2 = cfg.sigma_n2();
    let kld_c: Vec<f64> = (0..cfg.k)
        .map(|k| {
            let sigma_eta2 = interference_variance_for_power(cfg, k, radar_power);
            kld_conditional(cfg, cons, wc, &channels.h, k, sigma_eta2)
        })
        .collect();
    let mut kld_r = Vec::with_capacity(cfg.t);
    for t in 0..cfg.t {
        let r_t = beam_covariance(wr, wc, t);
        kld_r.push(radar_kld(
            &targets.response[t],
            &r_t,
            sigma_n2,
            targets.radar_amp[t],
        )?);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let kld_isac = mean(&kld_c) + mean(&kld_r);
    Ok(KldReport {
        kld_c,
        kld_r,
        kld_isac,
    })
}
