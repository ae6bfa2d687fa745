//! Communication-precoder design by a gradient-assisted log-barrier interior
//! method; the radar waveform stays fixed at the identity-covariance design.

use super::{ExitReason, IterationRecord, OptError, OptimizerParams, OptimizerTrace, ALPHA_MIN};
use crate::comm::{interference_variance_for_power, kld_conditional};
use crate::gradients::{
    grad_constraints_wrt_wc, grad_kld_conditional_wrt_wc, hinge_penalty,
};
use crate::linalg::{fro_sq, hermitize, CMat};
use crate::radar::{radar_kld, RadarWaveformTensor};
use crate::scenario::{ChannelSet, Constellation, ScenarioConfig, TargetSet};

#[derive(Debug, Clone)]
pub struct KcopResult {
    pub wc: CMat,
    pub trace: OptimizerTrace,
}

/// Linear extension keeps the log barrier defined (and C^1) when an iterate
/// sits at or below a KLD bound, so infeasible constraint margins steer back
/// toward feasibility instead of aborting.
const BARRIER_EXT: f64 = 1e-3;

fn ln_ext(m: f64) -> f64 {
    if m >= BARRIER_EXT {
        m.ln()
    } else {
        BARRIER_EXT.ln() + m / BARRIER_EXT - 1.0
    }
}

fn ln_ext_slope(m: f64) -> f64 {
    if m >= BARRIER_EXT {
        1.0 / m
    } else {
        1.0 / BARRIER_EXT
    }
}

struct KcopScene<'a> {
    cfg: &'a ScenarioConfig,
    cons: &'a Constellation,
    channels: &'a ChannelSet,
    targets: &'a TargetSet,
    /// Fixed per-beam radar covariance parts W_{r,t} W_{r,t}^H / L.
    radar_parts: Vec<CMat>,
    sigma_eta2: Vec<f64>,
    sigma_n2: f64,
}

struct Eval {
    objective: f64,
    kld_r: Vec<f64>,
    kld_c: Vec<f64>,
    power_margin: f64,
}

impl<'a> KcopScene<'a> {
    fn evaluate(&self, wc: &CMat) -> Result<Eval, OptError> {
        let kld_c: Vec<f64> = (0..self.cfg.k)
            .map(|k| {
                kld_conditional(self.cfg, self.cons, wc, &self.channels.h, k, self.sigma_eta2[k])
            })
            .collect();
        let mut kld_r = Vec::with_capacity(self.cfg.t);
        for (t, part) in self.radar_parts.iter().enumerate() {
            let r_t = hermitize(&(part + wc * wc.adjoint()));
            kld_r.push(radar_kld(
                &self.targets.response[t],
                &r_t,
                self.sigma_n2,
                self.targets.radar_amp[t],
            )?);
        }
        let objective = kld_c.iter().sum::<f64>() / kld_c.len() as f64;
        Ok(Eval {
            objective,
            kld_r,
            kld_c,
            power_margin: self.cfg.p_comm - fro_sq(wc),
        })
    }

    fn barrier_value(&self, eval: &Eval, mu: f64) -> f64 {
        let mut b = eval.objective;
        for (v, a) in eval.kld_r.iter().zip(&self.cfg.a_t) {
            b += mu * ln_ext(v - a);
        }
        for (v, bb) in eval.kld_c.iter().zip(&self.cfg.b_k) {
            b += mu * ln_ext(v - bb);
        }
        b + mu * ln_ext(eval.power_margin)
    }

    fn barrier_gradient(&self, wc: &CMat, eval: &Eval, mu: f64) -> Result<CMat, OptError> {
        let mut g = CMat::zeros(wc.nrows(), wc.ncols());
        for k in 0..self.cfg.k {
            let gk = grad_kld_conditional_wrt_wc(
                self.cfg,
                self.cons,
                wc,
                &self.channels.h,
                k,
                self.sigma_eta2[k],
            );
            let weight = 1.0 / self.cfg.k as f64 + mu * ln_ext_slope(eval.kld_c[k] - self.cfg.b_k[k]);
            g += gk.scale(weight);
        }
        let (g_power, g_radar) =
            grad_constraints_wrt_wc(wc, self.targets, &self.radar_parts, self.sigma_n2)?;
        for t in 0..self.cfg.t {
            g += g_radar[t].scale(mu * ln_ext_slope(eval.kld_r[t] - self.cfg.a_t[t]));
        }
        g -= g_power.scale(mu * ln_ext_slope(eval.power_margin));
        Ok(g)
    }
}

/// Barrier interior-point ascent on the mean conditional comm KLD subject to
/// radar-KLD, comm-KLD and power constraints; the barrier parameter shrinks
/// geometrically each iteration and every iterate stays strictly inside the
/// power ball.
pub fn run_kcop(
    cfg: &ScenarioConfig,
    cons: &Constellation,
    channels: &ChannelSet,
    targets: &TargetSet,
    wr_fixed: &RadarWaveformTensor,
    init: &CMat,
    params: &OptimizerParams,
) -> Result<KcopResult, OptError> {
    if fro_sq(init) >= cfg.p_comm {
        return Err(OptError::InfeasibleStart(format!(
            "initial precoder power {} is not strictly below P_c = {}",
            fro_sq(init),
            cfg.p_comm
        )));
    }
    let radar_power = wr_fixed.power();
    let scene = KcopScene {
        cfg,
        cons,
        channels,
        targets,
        radar_parts: (0..cfg.t)
            .map(|t| {
                let b = wr_fixed.beam(t);
                (b * b.adjoint()).scale(1.0 / wr_fixed.snapshots() as f64)
            })
            .collect(),
        sigma_eta2: (0..cfg.k)
            .map(|k| interference_variance_for_power(cfg, k, radar_power))
            .collect(),
        sigma_n2: cfg.sigma_n2(),
    };

    let mut w = init.clone();
    let mut eval = scene.evaluate(&w)?;
    let mut mu = params.mu0;
    let mut iterations = Vec::new();
    let mut exit = ExitReason::MaxIter;

    for n in 0..params.max_iter {
        let phi0 = scene.barrier_value(&eval, mu);
        if !phi0.is_finite() {
            return Err(OptError::BarrierDivergence);
        }
        let g = scene.barrier_gradient(&w, &eval, mu)?;
        let g_norm_sq = fro_sq(&g);

        let mut accepted = None;
        let mut a = params.alpha0;
        while a >= ALPHA_MIN {
            let cand = &w + g.scale(a);
            if fro_sq(&cand) >= cfg.p_comm {
                a *= params.beta;
                continue;
            }
            let cand_eval = scene.evaluate(&cand)?;
            let phi = scene.barrier_value(&cand_eval, mu);
            if phi.is_finite() && phi >= phi0 + params.c * a * g_norm_sq {
                accepted = Some((cand, cand_eval, a));
                break;
            }
            a *= params.beta;
        }

        let Some((next_w, next_eval, used_alpha)) = accepted else {
            exit = ExitReason::LineSearchFailed;
            break;
        };
        let delta = fro_sq(&(&next_w - &w)).sqrt();
        w = next_w;
        eval = next_eval;
        iterations.push(IterationRecord {
            iter: n,
            objective: eval.objective,
            penalty: hinge_penalty(&eval.kld_r, &eval.kld_c, &cfg.a_t, &cfg.b_k),
            step: used_alpha,
            delta,
            rho: None,
            mu: Some(mu),
            grad_norm: Some(g_norm_sq.sqrt()),
            residual_r: None,
            residual_c: None,
            dual_identity_residual: None,
        });
        mu = (mu * params.gamma_barrier).max(1e-12);
        if delta < params.eps {
            exit = ExitReason::Converged;
            break;
        }
    }

    let margins = OptimizerTrace::margins(&eval.kld_r, &cfg.a_t, &eval.kld_c, &cfg.b_k);
    Ok(KcopResult {
        wc: w,
        trace: OptimizerTrace {
            technique: "kcop".into(),
            iterations,
            exit,
            final_kld_r: eval.kld_r,
            final_kld_c: eval.kld_c,
            constraint_margins: margins,
        },
    })
}
