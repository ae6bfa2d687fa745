//! Analytic gradients for the waveform optimizers, the power projections, the
//! squared-hinge penalty and the finite-difference oracle that certifies every
//! analytic form.
//!
//! Gradient convention, fixed project-wide: for a real objective f of a
//! complex variable X the gradient g carries df/d(Re x) + i df/d(Im x) per
//! entry, so X <- X + alpha g increases f to first order. Every closed form
//! below is stated in that convention and is the exact derivative of the
//! implemented objective; the oracle in [`fd_gradient_matrix`] /
//! [`fd_gradient_tensor`] is the arbiter.

use num_complex::Complex64;
use thiserror::Error;

use crate::comm::{interference_variance_for_power, kld_zf_closed_form_parts};
use crate::linalg::{fro_sq, hermitize, CMat, HermitianPd};
use crate::radar::{beam_covariance, receive_covariance, RadarError, RadarWaveformTensor};
use crate::scenario::{ChannelSet, Constellation, ScenarioConfig, TargetSet};

#[derive(Debug, Error)]
pub enum FdError {
    #[error("objective is not finite near the expansion point")]
    NonFiniteObjective,
}

const LN2: f64 = std::f64::consts::LN_2;

/// amp^2 H^H (R2^{-1} - sigma_n^2 R2^{-2}) H, the shared sensitivity factor of
/// the radar KLD with respect to anything entering the transmit covariance.
pub fn radar_kld_sensitivity(
    h_t: &CMat,
    r_t: &CMat,
    sigma_n2: f64,
    radar_amp: f64,
) -> Result<CMat, RadarError> {
    let r2 = receive_covariance(h_t, r_t, sigma_n2, radar_amp);
    let pd =
        HermitianPd::new(r2).ok_or(RadarError::NumericalSingularity("receive covariance"))?;
    let inv = pd.inverse();
    let core = &inv - (&inv * &inv).scale(sigma_n2);
    Ok(hermitize(&(h_t.adjoint() * core * h_t)).scale(radar_amp * radar_amp))
}

/// Gradient tensor of the radar objective (1/T) sum_t KLD_r,t; slice t is
/// (2 amp^2 / (T L ln 2)) H^H (R2^{-1} - sigma_n^2 R2^{-2}) H W_{r,t}.
pub fn grad_radar_objective(
    wr: &RadarWaveformTensor,
    wc: &CMat,
    targets: &TargetSet,
    sigma_n2: f64,
) -> Result<RadarWaveformTensor, RadarError> {
    let t_count = wr.num_beams();
    let l = wr.snapshots() as f64;
    let mut out = Vec::with_capacity(t_count);
    for t in 0..t_count {
        let r_t = beam_covariance(wr, wc, t);
        let sens = radar_kld_sensitivity(&targets.response[t], &r_t, sigma_n2, targets.radar_amp[t])?;
        out.push((sens * wr.beam(t)).scale(2.0 / (t_count as f64 * l * LN2)));
    }
    Ok(RadarWaveformTensor::new(out))
}

/// Gradient of a single radar KLD with respect to its own beam slice (no 1/T).
pub fn grad_radar_kld_wrt_beam(
    h_t: &CMat,
    r_t: &CMat,
    w_beam: &CMat,
    sigma_n2: f64,
    radar_amp: f64,
    l: usize,
) -> Result<CMat, RadarError> {
    let sens = radar_kld_sensitivity(h_t, r_t, sigma_n2, radar_amp)?;
    Ok((sens * w_beam).scale(2.0 / (l as f64 * LN2)))
}

/// Gradient of the ZF-closed-form comm KLD of UE k with respect to the whole
/// radar tensor: the chain rule through sigma_eta^2(W_r) yields a negative
/// scalar multiple of W_r itself.
pub fn grad_comm_kld_wrt_radar(
    wr: &RadarWaveformTensor,
    cfg: &ScenarioConfig,
    cons: &Constellation,
    k: usize,
) -> RadarWaveformTensor {
    let coeff = comm_kld_radar_coeff(wr, cfg, cons, k);
    let mut out = wr.clone();
    out.scale_in_place(coeff);
    out
}

fn comm_kld_radar_coeff(
    wr: &RadarWaveformTensor,
    cfg: &ScenarioConfig,
    cons: &Constellation,
    k: usize,
) -> f64 {
    let sigma_eta2 = interference_variance_for_power(cfg, k, wr.power());
    let d_pow = cfg.comm_pathloss_pow(k);
    let p_k = cfg.equal_power_alloc()[k];
    let m = cons.order() as f64;
    let q = cons.lambda * d_pow * p_k * (cfg.n - cfg.k) as f64 / (m * (m - 1.0) * LN2);
    -q * d_pow * cfg.sigma_h2 * 2.0
        / (wr.snapshots() as f64 * sigma_eta2 * sigma_eta2)
}

/// Squared-hinge penalty over both KLD constraint families.
pub fn hinge_penalty(kld_r: &[f64], kld_c: &[f64], a_t: &[f64], b_k: &[f64]) -> f64 {
    let mut p = 0.0;
    for (v, a) in kld_r.iter().zip(a_t) {
        p += (a - v).max(0.0).powi(2);
    }
    for (v, b) in kld_c.iter().zip(b_k) {
        p += (b - v).max(0.0).powi(2);
    }
    p
}

/// Fixed-communication scene for the radar-waveform problem: the precoder is
/// frozen and the comm KLD enters only through sigma_eta^2(W_r).
pub struct RadarDesignScene<'a> {
    pub cfg: &'a ScenarioConfig,
    pub cons: &'a Constellation,
    pub targets: &'a TargetSet,
    pub wc: &'a CMat,
    pub sigma_n2: f64,
}

impl<'a> RadarDesignScene<'a> {
    pub fn new(
        cfg: &'a ScenarioConfig,
        cons: &'a Constellation,
        targets: &'a TargetSet,
        wc: &'a CMat,
    ) -> Self {
        Self {
            cfg,
            cons,
            targets,
            wc,
            sigma_n2: cfg.sigma_n2(),
        }
    }

    pub fn radar_klds(&self, wr: &RadarWaveformTensor) -> Result<Vec<f64>, RadarError> {
        (0..self.cfg.t)
            .map(|t| {
                let r_t = beam_covariance(wr, self.wc, t);
                crate::radar::radar_kld(
                    &self.targets.response[t],
                    &r_t,
                    self.sigma_n2,
                    self.targets.radar_amp[t],
                )
            })
            .collect()
    }

    pub fn comm_klds(&self, wr: &RadarWaveformTensor) -> Vec<f64> {
        let power = wr.power();
        (0..self.cfg.k)
            .map(|k| {
                kld_zf_closed_form_parts(
                    self.cons,
                    self.cfg.comm_pathloss_pow(k),
                    self.cfg.equal_power_alloc()[k],
                    self.cfg.n,
                    self.cfg.k,
                    interference_variance_for_power(self.cfg, k, power),
                )
            })
            .collect()
    }

    pub fn objective(&self, wr: &RadarWaveformTensor) -> Result<f64, RadarError> {
        let klds = self.radar_klds(wr)?;
        Ok(klds.iter().sum::<f64>() / klds.len() as f64)
    }

    pub fn penalty(&self, wr: &RadarWaveformTensor) -> Result<f64, RadarError> {
        let kld_r = self.radar_klds(wr)?;
        let kld_c = self.comm_klds(wr);
        Ok(hinge_penalty(&kld_r, &kld_c, &self.cfg.a_t, &self.cfg.b_k))
    }
}

/// Penalty value for the radar design problem (0 iff all constraints hold).
pub fn penalty_value(
    wr: &RadarWaveformTensor,
    scene: &RadarDesignScene,
) -> Result<f64, RadarError> {
    scene.penalty(wr)
}

/// Gradient of the squared-hinge penalty with respect to the radar tensor:
/// -sum_t 2(A_t - KLD_r,t) grad KLD_r,t 1[..] - sum_k 2(B_k - KLD_c,k)
/// grad KLD_c,k 1[..].
pub fn grad_penalty_radar(
    wr: &RadarWaveformTensor,
    scene: &RadarDesignScene,
) -> Result<RadarWaveformTensor, RadarError> {
    let kld_r = scene.radar_klds(wr)?;
    let kld_c = scene.comm_klds(wr);
    let mut grad = RadarWaveformTensor::zeros(wr.n(), wr.snapshots(), wr.num_beams());
    for t in 0..scene.cfg.t {
        let short = scene.cfg.a_t[t] - kld_r[t];
        if short > 0.0 {
            let r_t = beam_covariance(wr, scene.wc, t);
            let g = grad_radar_kld_wrt_beam(
                &scene.targets.response[t],
                &r_t,
                wr.beam(t),
                scene.sigma_n2,
                scene.targets.radar_amp[t],
                wr.snapshots(),
            )?;
            grad.beams_mut()[t] -= g.scale(2.0 * short);
        }
    }
    for k in 0..scene.cfg.k {
        let short = scene.cfg.b_k[k] - kld_c[k];
        if short > 0.0 {
            let coeff = comm_kld_radar_coeff(wr, scene.cfg, scene.cons, k);
            // grad of KLD_c,k is coeff * Wr; accumulate -2 short * that
            let mut term = wr.clone();
            term.scale_in_place(-2.0 * short * coeff);
            grad.axpy(1.0, &term);
        }
    }
    Ok(grad)
}

fn conj_column(h: &CMat, k: usize) -> nalgebra::DVector<Complex64> {
    h.column(k).map(|z| z.conj())
}

struct CommTerms {
    c2: f64,
    d_pow: f64,
    signal: f64,
    denom: f64,
    gains: Vec<Complex64>,
}

fn comm_terms(
    cfg: &ScenarioConfig,
    cons: &Constellation,
    wc: &CMat,
    h: &CMat,
    k: usize,
    sigma_eta2: f64,
) -> CommTerms {
    let m = cons.order() as f64;
    let d_pow = cfg.comm_pathloss_pow(k);
    let c2 = cons.lambda * d_pow / (m * (m - 1.0) * LN2);
    let hk = h.column(k);
    let gains: Vec<Complex64> = (0..wc.ncols())
        .map(|i| {
            hk.iter()
                .zip(wc.column(i).iter())
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();
    let signal = gains[k].norm_sqr();
    let iui: f64 = gains
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, g)| g.norm_sqr())
        .sum();
    CommTerms {
        c2,
        d_pow,
        signal,
        denom: d_pow * iui + sigma_eta2,
        gains,
    }
}

/// Gradient of the conditional comm KLD of UE k with respect to the whole
/// precoder: an own-column matched term and cross-column interference terms.
pub fn grad_kld_conditional_wrt_wc(
    cfg: &ScenarioConfig,
    cons: &Constellation,
    wc: &CMat,
    h: &CMat,
    k: usize,
    sigma_eta2: f64,
) -> CMat {
    let t = comm_terms(cfg, cons, wc, h, k, sigma_eta2);
    let hk_conj = conj_column(h, k);
    let mut grad = CMat::zeros(wc.nrows(), wc.ncols());
    for j in 0..wc.ncols() {
        let col = if j == k {
            (&hk_conj * t.gains[k]).scale(2.0 * t.c2 / t.denom)
        } else {
            (&hk_conj * t.gains[j])
                .scale(-2.0 * t.c2 * t.signal * t.d_pow / (t.denom * t.denom))
        };
        grad.column_mut(j).zip_apply(&col, |g, c| *g += c);
    }
    grad
}

/// Gradient of the comm objective (1/K) sum_k KLD_c,k with respect to W_c.
pub fn grad_comm_objective(
    cfg: &ScenarioConfig,
    cons: &Constellation,
    wc: &CMat,
    h: &CMat,
    sigma_eta2: &[f64],
) -> CMat {
    let mut grad = CMat::zeros(wc.nrows(), wc.ncols());
    for k in 0..cfg.k {
        grad += grad_kld_conditional_wrt_wc(cfg, cons, wc, h, k, sigma_eta2[k]);
    }
    grad.scale(1.0 / cfg.k as f64)
}

/// Gradients of the power and radar-KLD constraints with respect to W_c.
/// `radar_parts[t]` is the fixed radar contribution W_{r,t} W_{r,t}^H / L to
/// beam covariance t.
pub fn grad_constraints_wrt_wc(
    wc: &CMat,
    targets: &TargetSet,
    radar_parts: &[CMat],
    sigma_n2: f64,
) -> Result<(CMat, Vec<CMat>), RadarError> {
    let g_power = wc.scale(2.0);
    let mut g_radar = Vec::with_capacity(radar_parts.len());
    for (t, part) in radar_parts.iter().enumerate() {
        let r_t = hermitize(&(part + wc * wc.adjoint()));
        let sens = radar_kld_sensitivity(&targets.response[t], &r_t, sigma_n2, targets.radar_amp[t])?;
        g_radar.push((sens * wc).scale(2.0 / LN2));
    }
    Ok((g_power, g_radar))
}

/// Joint scene for the integrated design: both waveforms free, comm KLD
/// conditional on the drawn channel with sigma_eta^2 following Z_r.
pub struct JointScene<'a> {
    pub cfg: &'a ScenarioConfig,
    pub cons: &'a Constellation,
    pub channels: &'a ChannelSet,
    pub targets: &'a TargetSet,
    pub sigma_n2: f64,
}

impl<'a> JointScene<'a> {
    pub fn new(
        cfg: &'a ScenarioConfig,
        cons: &'a Constellation,
        channels: &'a ChannelSet,
        targets: &'a TargetSet,
    ) -> Self {
        Self {
            cfg,
            cons,
            channels,
            targets,
            sigma_n2: cfg.sigma_n2(),
        }
    }

    pub fn sigma_eta2(&self, zr: &RadarWaveformTensor, k: usize) -> f64 {
        interference_variance_for_power(self.cfg, k, zr.power())
    }

    pub fn klds(
        &self,
        zr: &RadarWaveformTensor,
        zc: &CMat,
    ) -> Result<(Vec<f64>, Vec<f64>), RadarError> {
        let kld_r: Vec<f64> = (0..self.cfg.t)
            .map(|t| {
                let r_t = beam_covariance(zr, zc, t);
                crate::radar::radar_kld(
                    &self.targets.response[t],
                    &r_t,
                    self.sigma_n2,
                    self.targets.radar_amp[t],
                )
            })
            .collect::<Result<_, _>>()?;
        let kld_c: Vec<f64> = (0..self.cfg.k)
            .map(|k| {
                crate::comm::kld_conditional(
                    self.cfg,
                    self.cons,
                    zc,
                    &self.channels.h,
                    k,
                    self.sigma_eta2(zr, k),
                )
            })
            .collect();
        Ok((kld_r, kld_c))
    }

    /// KLD_ISAC = mean_k KLD_c,k + mean_t KLD_r,t.
    pub fn kld_isac(&self, zr: &RadarWaveformTensor, zc: &CMat) -> Result<f64, RadarError> {
        let (kld_r, kld_c) = self.klds(zr, zc)?;
        Ok(kld_r.iter().sum::<f64>() / kld_r.len() as f64
            + kld_c.iter().sum::<f64>() / kld_c.len() as f64)
    }

    pub fn penalty(&self, zr: &RadarWaveformTensor, zc: &CMat) -> Result<f64, RadarError> {
        let (kld_r, kld_c) = self.klds(zr, zc)?;
        Ok(hinge_penalty(&kld_r, &kld_c, &self.cfg.a_t, &self.cfg.b_k))
    }

    /// Full gradient of KLD_ISAC in both blocks, including the cross
    /// couplings (radar KLD through Z_c in the beam covariance, comm KLD
    /// through sigma_eta^2(Z_r)).
    pub fn grad_kld_isac(
        &self,
        zr: &RadarWaveformTensor,
        zc: &CMat,
    ) -> Result<(RadarWaveformTensor, CMat), RadarError> {
        let t_count = self.cfg.t as f64;
        let k_count = self.cfg.k as f64;
        let l = zr.snapshots() as f64;
        let mut g_r = RadarWaveformTensor::zeros(zr.n(), zr.snapshots(), zr.num_beams());
        let mut g_c = CMat::zeros(zc.nrows(), zc.ncols());
        for t in 0..self.cfg.t {
            let r_t = beam_covariance(zr, zc, t);
            let sens = radar_kld_sensitivity(
                &self.targets.response[t],
                &r_t,
                self.sigma_n2,
                self.targets.radar_amp[t],
            )?;
            g_r.beams_mut()[t] += (&sens * zr.beam(t)).scale(2.0 / (t_count * l * LN2));
            g_c += (&sens * zc).scale(2.0 / (t_count * LN2));
        }
        for k in 0..self.cfg.k {
            let sigma_eta2 = self.sigma_eta2(zr, k);
            g_c += grad_kld_conditional_wrt_wc(
                self.cfg,
                self.cons,
                zc,
                &self.channels.h,
                k,
                sigma_eta2,
            )
            .scale(1.0 / k_count);
            // comm KLD depends on Z_r only through sigma_eta^2
            let t = comm_terms(self.cfg, self.cons, zc, &self.channels.h, k, sigma_eta2);
            let coeff = -t.c2 * t.signal / (t.denom * t.denom)
                * (2.0 * t.d_pow * self.cfg.sigma_h2 / l)
                / k_count;
            g_r.axpy(coeff, zr);
        }
        Ok((g_r, g_c))
    }

    /// Gradient of the squared-hinge penalty in both blocks.
    pub fn grad_penalty(
        &self,
        zr: &RadarWaveformTensor,
        zc: &CMat,
    ) -> Result<(RadarWaveformTensor, CMat), RadarError> {
        let (kld_r, kld_c) = self.klds(zr, zc)?;
        let l = zr.snapshots();
        let mut g_r = RadarWaveformTensor::zeros(zr.n(), zr.snapshots(), zr.num_beams());
        let mut g_c = CMat::zeros(zc.nrows(), zc.ncols());
        for t in 0..self.cfg.t {
            let short = self.cfg.a_t[t] - kld_r[t];
            if short > 0.0 {
                let r_t = beam_covariance(zr, zc, t);
                let sens = radar_kld_sensitivity(
                    &self.targets.response[t],
                    &r_t,
                    self.sigma_n2,
                    self.targets.radar_amp[t],
                )?;
                g_r.beams_mut()[t] -=
                    (&sens * zr.beam(t)).scale(2.0 / (l as f64 * LN2) * 2.0 * short);
                g_c -= (&sens * zc).scale(2.0 / LN2 * 2.0 * short);
            }
        }
        for k in 0..self.cfg.k {
            let short = self.cfg.b_k[k] - kld_c[k];
            if short > 0.0 {
                let sigma_eta2 = self.sigma_eta2(zr, k);
                g_c -= grad_kld_conditional_wrt_wc(
                    self.cfg,
                    self.cons,
                    zc,
                    &self.channels.h,
                    k,
                    sigma_eta2,
                )
                .scale(2.0 * short);
                let t = comm_terms(self.cfg, self.cons, zc, &self.channels.h, k, sigma_eta2);
                let coeff = -t.c2 * t.signal / (t.denom * t.denom)
                    * (2.0 * t.d_pow * self.cfg.sigma_h2 / l as f64);
                g_r.axpy(-2.0 * short * coeff, zr);
            }
        }
        Ok((g_r, g_c))
    }
}

/// Smooth part of the ADMM auxiliary-variable ascent direction: the KLD_ISAC
/// gradient composed with the proximal pull -rho (Z - V) in both blocks.
pub fn grad_admm_z(
    zr: &RadarWaveformTensor,
    zc: &CMat,
    vr: &RadarWaveformTensor,
    vc: &CMat,
    rho: f64,
    scene: &JointScene,
) -> Result<(RadarWaveformTensor, CMat), RadarError> {
    let (mut g_r, mut g_c) = scene.grad_kld_isac(zr, zc)?;
    let mut diff = zr.sub(vr);
    diff.scale_in_place(rho);
    g_r.axpy(-1.0, &diff);
    g_c -= (zc - vc).scale(rho);
    Ok((g_r, g_c))
}

/// Rescale a matrix onto the power ball ||W||_F^2 <= budget; feasible input is
/// returned unchanged.
pub fn project_power_matrix(w: &CMat, budget: f64) -> CMat {
    let p = fro_sq(w);
    if p > budget {
        w.scale((budget / p).sqrt())
    } else {
        w.clone()
    }
}

/// Rescale a radar tensor onto sum_t ||W_{r,t}||_F^2 / L <= budget.
pub fn project_power_tensor(wr: &RadarWaveformTensor, budget: f64) -> RadarWaveformTensor {
    let p = wr.power();
    let mut out = wr.clone();
    if p > budget {
        out.scale_in_place((budget / p).sqrt());
    }
    out
}

/// Joint rescaling onto ||Z_c||_F^2 + sum_t ||Z_{r,t}||_F^2 / L <= budget.
pub fn project_power_joint(
    zr: &RadarWaveformTensor,
    zc: &CMat,
    budget: f64,
) -> (RadarWaveformTensor, CMat) {
    let v = zr.power() + fro_sq(zc);
    if v > budget {
        let s = (budget / v).sqrt();
        let mut r = zr.clone();
        r.scale_in_place(s);
        (r, zc.scale(s))
    } else {
        (zr.clone(), zc.clone())
    }
}

/// Central-difference gradient over the real and imaginary part of every
/// entry; truncation order O(eps^2).
pub fn fd_gradient_matrix<F: Fn(&CMat) -> f64>(
    f: F,
    x: &CMat,
    eps: f64,
) -> Result<CMat, FdError> {
    let mut grad = CMat::zeros(x.nrows(), x.ncols());
    let mut probe = x.clone();
    for idx in 0..x.len() {
        let base = x[idx];
        let mut diff = |delta: Complex64| -> Result<f64, FdError> {
            probe[idx] = base + delta;
            let fp = f(&probe);
            probe[idx] = base - delta;
            let fm = f(&probe);
            probe[idx] = base;
            if !fp.is_finite() || !fm.is_finite() {
                return Err(FdError::NonFiniteObjective);
            }
            Ok((fp - fm) / (2.0 * eps))
        };
        let re = diff(Complex64::new(eps, 0.0))?;
        let im = diff(Complex64::new(0.0, eps))?;
        grad[idx] = Complex64::new(re, im);
    }
    Ok(grad)
}

/// Tensor version of [`fd_gradient_matrix`].
pub fn fd_gradient_tensor<F: Fn(&RadarWaveformTensor) -> f64>(
    f: F,
    x: &RadarWaveformTensor,
    eps: f64,
) -> Result<RadarWaveformTensor, FdError> {
    let mut grad = RadarWaveformTensor::zeros(x.n(), x.snapshots(), x.num_beams());
    let mut probe = x.clone();
    for b in 0..x.num_beams() {
        for idx in 0..x.beam(b).len() {
            let base = x.beam(b)[idx];
            let mut diff = |delta: Complex64| -> Result<f64, FdError> {
                probe.beams_mut()[b][idx] = base + delta;
                let fp = f(&probe);
                probe.beams_mut()[b][idx] = base - delta;
                let fm = f(&probe);
                probe.beams_mut()[b][idx] = base;
                if !fp.is_finite() || !fm.is_finite() {
                    return Err(FdError::NonFiniteObjective);
                }
                Ok((fp - fm) / (2.0 * eps))
            };
            let re = diff(Complex64::new(eps, 0.0))?;
            let im = diff(Complex64::new(0.0, eps))?;
            grad.beams_mut()[b][idx] = Complex64::new(re, im);
        }
    }
    Ok(grad)
}

/// ||a - b||_F over tensors, for gradient comparisons.
pub fn tensor_diff_norm(a: &RadarWaveformTensor, b: &RadarWaveformTensor) -> f64 {
    a.dist_fro(b)
}
