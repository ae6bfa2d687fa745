//! Radar subsystem: combined-beam covariances (the communication signal is
//! exploited as illumination), radar KLD, GLRT detection with Neyman-Pearson
//! threshold calibration, least-squares response estimation and the MSE
//! decomposition.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{fro_sq, fro_sq_stack, hermitize, pinv_hermitian_psd, CMat, HermitianPd};
use crate::scenario::{draw_complex_gaussian, Constellation, ScenarioConfig, TargetSet};

#[derive(Debug, Error)]
pub enum RadarError {
    #[error("numerical singularity in {0}")]
    NumericalSingularity(&'static str),
}

/// The radar design variable: an N x L x T tensor stored as T beam slices of
/// shape N x L.
#[derive(Debug, Clone, PartialEq)]
pub struct RadarWaveformTensor {
    beams: Vec<CMat>,
}

impl RadarWaveformTensor {
    pub fn new(beams: Vec<CMat>) -> Self {
        assert!(!beams.is_empty());
        let (n, l) = (beams[0].nrows(), beams[0].ncols());
        assert!(beams.iter().all(|b| b.nrows() == n && b.ncols() == l));
        Self { beams }
    }

    pub fn zeros(n: usize, l: usize, t: usize) -> Self {
        Self {
            beams: vec![CMat::zeros(n, l); t],
        }
    }

    pub fn n(&self) -> usize {
        self.beams[0].nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.beams[0].ncols()
    }

    pub fn num_beams(&self) -> usize {
        self.beams.len()
    }

    pub fn beam(&self, t: usize) -> &CMat {
        &self.beams[t]
    }

    pub fn beams(&self) -> &[CMat] {
        &self.beams
    }

    pub fn beams_mut(&mut self) -> &mut [CMat] {
        &mut self.beams
    }

    /// Combined per-snapshot precoder W_{r,l} (N x T).
    pub fn snapshot(&self, l: usize) -> CMat {
        let n = self.n();
        let t = self.num_beams();
        CMat::from_fn(n, t, |i, b| self.beams[b][(i, l)])
    }

    /// Sum of the per-beam columns at snapshot l (radar contribution with
    /// unit-modulus beam waveforms).
    pub fn snapshot_sum(&self, l: usize) -> DVector<Complex64> {
        let mut v = DVector::zeros(self.n());
        for b in &self.beams {
            v += b.column(l);
        }
        v
    }

    pub fn fro_sq(&self) -> f64 {
        fro_sq_stack(&self.beams)
    }

    /// Frame-averaged transmit power sum_t ||W_{r,t}||_F^2 / L.
    pub fn power(&self) -> f64 {
        self.fro_sq() / self.snapshots() as f64
    }

    pub fn scale_in_place(&mut self, s: f64) {
        for b in &mut self.beams {
            *b *= Complex64::new(s, 0.0);
        }
    }

    /// self += alpha * other, elementwise over all slices.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        for (a, b) in self.beams.iter_mut().zip(other.beams.iter()) {
            a.zip_apply(b, |x, y| *x += y * Complex64::new(alpha, 0.0));
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let beams = self
            .beams
            .iter()
            .zip(other.beams.iter())
            .map(|(a, b)| a - b)
            .collect();
        Self { beams }
    }

    pub fn dist_fro(&self, other: &Self) -> f64 {
        self.beams
            .iter()
            .zip(other.beams.iter())
            .map(|(a, b)| fro_sq(&(a - b)))
            .sum::<f64>()
            .sqrt()
    }
}

/// Conventional identity-covariance radar waveform: per beam t and snapshot l
/// the column cycles through scaled DFT vectors so that the frame covariance
/// is exactly R_w = (P_r / N) I when L is a multiple of N, with per-snapshot
/// beam power P_r / T.
pub fn cic_waveform(cfg: &ScenarioConfig) -> RadarWaveformTensor {
    let (n, l, t) = (cfg.n, cfg.l, cfg.t);
    let amp = (cfg.p_radar / t as f64).sqrt() / (n as f64).sqrt();
    let beams = (0..t)
        .map(|b| {
            let offset = b * n / t;
            CMat::from_fn(n, l, |i, li| {
                let m = (li + offset) % n;
                let th = 2.0 * std::f64::consts::PI * (m * i % n) as f64 / n as f64;
                Complex64::new(th.cos(), th.sin()) * amp
            })
        })
        .collect();
    RadarWaveformTensor::new(beams)
}

/// Combined transmit covariance of beam t: R_t = W_{r,t} W_{r,t}^H / L
/// + W_c W_c^H (unit-covariance data symbols, vanishing cross terms).
pub fn beam_covariance(wr: &RadarWaveformTensor, wc: &CMat, t: usize) -> CMat {
    let w = wr.beam(t);
    let r = (w * w.adjoint()).scale(1.0 / wr.snapshots() as f64) + wc * wc.adjoint();
    hermitize(&r)
}

/// Receive covariance under target presence: R2 = amp^2 H R H^H + sigma_n^2 I.
pub fn receive_covariance(h_t: &CMat, r_t: &CMat, sigma_n2: f64, radar_amp: f64) -> CMat {
    let n = h_t.nrows();
    let mut r2 = (h_t * r_t * h_t.adjoint()).scale(radar_amp * radar_amp);
    for i in 0..n {
        r2[(i, i)] += Complex64::new(sigma_n2, 0.0);
    }
    hermitize(&r2)
}

/// Radar KLD (bits) between the target-absent and target-present hypotheses:
/// (ln det R2 + sigma_n^2 tr(R2^{-1}) - N (1 + ln sigma_n^2)) / ln 2.
pub fn radar_kld(h_t: &CMat, r_t: &CMat, sigma_n2: f64, radar_amp: f64) -> Result<f64, RadarError> {
    let n = h_t.nrows() as f64;
    let r2 = receive_covariance(h_t, r_t, sigma_n2, radar_amp);
    let pd = HermitianPd::new(r2).ok_or(RadarError::NumericalSingularity("receive covariance"))?;
    let v = pd.ln_det() + sigma_n2 * pd.trace_inverse() - n * (1.0 + sigma_n2.ln());
    Ok(v / std::f64::consts::LN_2)
}

/// Reverse-direction divergence (present -> absent), exposed as a diagnostic
/// only; for unequal covariances it differs from [`radar_kld`].
pub fn radar_kld_reverse(
    h_t: &CMat,
    r_t: &CMat,
    sigma_n2: f64,
    radar_amp: f64,
) -> Result<f64, RadarError> {
    let n = h_t.nrows() as f64;
    let r2 = receive_covariance(h_t, r_t, sigma_n2, radar_amp);
    let trace: f64 = r2.diagonal().iter().map(|d| d.re).sum();
    let pd = HermitianPd::new(r2).ok_or(RadarError::NumericalSingularity("receive covariance"))?;
    let v = trace / sigma_n2 - n - (pd.ln_det() - n * sigma_n2.ln());
    Ok(v / std::f64::consts::LN_2)
}

/// Least-squares response estimate H_hat = (Y X^H)(X X^H)^+ with a
/// tolerance-based rank cutoff; defined for any snapshot count.
pub fn estimate_response(y: &CMat, x: &CMat) -> CMat {
    let s_yx = y * x.adjoint();
    let s_xx = hermitize(&(x * x.adjoint()));
    s_yx * pinv_hermitian_psd(&s_xx, 1e-10)
}

/// L-averaged GLRT statistic (1/L) sum_l y_l^H (I + R1_hat^{-1}) y_l with
/// R1_hat = H_hat R_t H_hat^H + sigma_n^2 I.
pub fn glrt_statistic(
    y_snapshots: &CMat,
    h_hat: &CMat,
    r_t: &CMat,
    sigma_n2: f64,
) -> Result<f64, RadarError> {
    let n = h_hat.nrows();
    let mut r1 = h_hat * r_t * h_hat.adjoint();
    for i in 0..n {
        r1[(i, i)] += Complex64::new(sigma_n2, 0.0);
    }
    let pd = HermitianPd::new(hermitize(&r1))
        .ok_or(RadarError::NumericalSingularity("GLRT covariance"))?;
    let inv = pd.inverse();
    let l = y_snapshots.ncols();
    let mut acc = 0.0;
    for li in 0..l {
        let y = y_snapshots.column(li);
        let by = &inv * y;
        acc += y.norm_squared() + y.dotc(&by).re;
    }
    Ok(acc / l as f64)
}

/// One detection trial record; `decision` is true iff statistic > threshold.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DetectionOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub decision: bool,
    pub truth: bool,
}

/// Per-target thresholds from H0 Monte Carlo calibration.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdCalibration {
    pub tau2: Vec<f64>,
    pub trials: usize,
    /// Set when trials * P_FA < 100 (tail too thin for a stable quantile).
    pub low_confidence: bool,
}

/// Build the known per-beam transmit frame X_t (N x L) for beam t: radar
/// column plus the precoded data symbols of that snapshot.
fn transmit_frame<R: Rng>(
    wr: &RadarWaveformTensor,
    wc: &CMat,
    cons: &Constellation,
    t: usize,
    rng: &mut R,
) -> CMat {
    let n = wr.n();
    let l = wr.snapshots();
    let k = wc.ncols();
    let mut x = wr.beam(t).clone();
    let mut sym = CMat::zeros(k, l);
    for li in 0..l {
        for ki in 0..k {
            sym[(ki, li)] = cons.symbols[cons.draw_index(rng)];
        }
    }
    x += wc * sym;
    debug_assert_eq!(x.nrows(), n);
    x
}

fn h0_statistic<R: Rng>(
    wr: &RadarWaveformTensor,
    wc: &CMat,
    cons: &Constellation,
    r_t: &CMat,
    sigma_n2: f64,
    t: usize,
    rng: &mut R,
) -> Result<(f64, f64), RadarError> {
    let n = wr.n();
    let l = wr.snapshots();
    let x = transmit_frame(wr, wc, cons, t, rng);
    let y = draw_complex_gaussian(rng, n, l, sigma_n2);
    let h_hat = estimate_response(&y, &x);
    let stat = glrt_statistic(&y, &h_hat, r_t, sigma_n2)?;
    Ok((stat, fro_sq(&h_hat)))
}

/// Neyman-Pearson threshold: the empirical (1 - P_FA) quantile of the
/// L-averaged GLRT statistic under H0, with the estimator in the loop.
pub fn calibrate_threshold<R: Rng>(
    cfg: &ScenarioConfig,
    cons: &Constellation,
    wc: &CMat,
    wr: &RadarWaveformTensor,
    trials: usize,
    rng: &mut R,
) -> Result<ThresholdCalibration, RadarError> {
    let sigma_n2 = cfg.sigma_n2();
    let mut tau2 = Vec::with_capacity(cfg.t);
    for t in 0..cfg.t {
        let r_t = beam_covariance(wr, wc, t);
        let mut stats = Vec::with_capacity(trials);
        for _ in 0..trials {
            stats.push(h0_statistic(wr, wc, cons, &r_t, sigma_n2, t, rng)?.0);
        }
        stats.sort_by(|a, b| a.total_cmp(b));
        let idx = (((1.0 - cfg.p_fa) * trials as f64).ceil() as usize)
            .saturating_sub(1)
            .min(trials - 1);
        tau2.push(stats[idx]);
    }
    Ok(ThresholdCalibration {
        tau2,
        trials,
        low_confidence: (trials as f64) * cfg.p_fa < 100.0,
    })
}

/// Raw material for the MSE decomposition: one entry per (target, trial).
#[derive(Debug, Clone, Copy)]
pub struct EstimationRecord {
    pub truth: bool,
    pub detected: bool,
    /// ||H_hat - H_true||_F^2 under H1, ||H_hat||_F^2 under H0.
    pub sq_err_detected: f64,
    /// ||H_true||_F^2 (the miss penalty with H_hat forced to zero).
    pub sq_truth: f64,
}

#[derive(Debug, Clone)]
pub struct DetectionStats {
    pub p_d: Vec<f64>,
    pub p_fa_hat: Vec<f64>,
    pub h1_trials: usize,
    pub h0_trials: usize,
    pub detections: Vec<usize>,
    pub false_alarms: Vec<usize>,
    /// Per-target estimation records (H1 trials then H0 trials).
    pub records: Vec<Vec<EstimationRecord>>,
}

/// Monte Carlo detection over noise/symbol realizations for the drawn target
/// responses: H1 and H0 frames, estimator and GLRT per trial.
pub fn run_detection<R: Rng>(
    cfg: &ScenarioConfig,
    cons: &Constellation,
    wc: &CMat,
    wr: &RadarWaveformTensor,
    targets: &TargetSet,
    tau2: &[f64],
    trials: usize,
    rng: &mut R,
) -> Result<DetectionStats, RadarError> {
    let sigma_n2 = cfg.sigma_n2();
    let n = cfg.n;
    let l = cfg.l;
    let mut detections = vec![0usize; cfg.t];
    let mut false_alarms = vec![0usize; cfg.t];
    let mut records: Vec<Vec<EstimationRecord>> = vec![Vec::with_capacity(2 * trials); cfg.t];
    for t in 0..cfg.t {
        let r_t = beam_covariance(wr, wc, t);
        let truth_mat = targets.response[t].scale(targets.radar_amp[t]);
        let sq_truth = fro_sq(&truth_mat);
        for _ in 0..trials {
            // H1 frame
            let x = transmit_frame(wr, wc, cons, t, rng);
            let noise = draw_complex_gaussian(rng, n, l, sigma_n2);
            let y = &truth_mat * &x + noise;
            let h_hat = estimate_response(&y, &x);
            let stat = glrt_statistic(&y, &h_hat, &r_t, sigma_n2)?;
            let detected = stat > tau2[t];
            if detected {
                detections[t] += 1;
            }
            records[t].push(EstimationRecord {
                truth: true,
                detected,
                sq_err_detected: fro_sq(&(&h_hat - &truth_mat)),
                sq_truth,
            });
            // H0 frame
            let (stat0, sq_hat0) = h0_statistic(wr, wc, cons, &r_t, sigma_n2, t, rng)?;
            let fa = stat0 > tau2[t];
            if fa {
                false_alarms[t] += 1;
            }
            records[t].push(EstimationRecord {
                truth: false,
                detected: fa,
                sq_err_detected: sq_hat0,
                sq_truth: 0.0,
            });
        }
    }
    let p_d = detections.iter().map(|&d| d as f64 / trials as f64).collect();
    let p_fa_hat = false_alarms
        .iter()
        .map(|&d| d as f64 / trials as f64)
        .collect();
    Ok(DetectionStats {
        p_d,
        p_fa_hat,
        h1_trials: trials,
        h0_trials: trials,
        detections,
        false_alarms,
        records,
    })
}

/// Conditional and overall MSE of the response estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MseReport {
    pub mse_11: f64,
    pub mse_10: f64,
    pub mse_01: f64,
    pub p_d: f64,
    pub p_fa: f64,
    pub overall: f64,
    /// Analytic references sigma_n^2 N / P_r and N^2 sigma_n^2.
    pub analytic_mse_11: f64,
    pub analytic_mse_01: f64,
}

/// Empirical conditional MSEs combined with the equal-prior decomposition
/// overall = p(H1)[(1-P_D) mse_01 + P_D mse_11] + (1-p(H1)) P_FA mse_10.
pub fn mse_report(cfg: &ScenarioConfig, records: &[EstimationRecord]) -> MseReport {
    let mut s11 = (0.0, 0usize);
    let mut s10 = (0.0, 0usize);
    let mut s01 = (0.0, 0usize);
    let mut h1 = (0usize, 0usize);
    let mut h0 = (0usize, 0usize);
    for r in records {
        if r.truth {
            h1.1 += 1;
            if r.detected {
                h1.0 += 1;
                s11.0 += r.sq_err_detected;
                s11.1 += 1;
            } else {
                s01.0 += r.sq_truth;
                s01.1 += 1;
            }
        } else {
            h0.1 += 1;
            if r.detected {
                h0.0 += 1;
                s10.0 += r.sq_err_detected;
                s10.1 += 1;
            }
        }
    }
    let mean = |s: (f64, usize)| if s.1 > 0 { s.0 / s.1 as f64 } else { 0.0 };
    let p_d = if h1.1 > 0 { h1.0 as f64 / h1.1 as f64 } else { 0.0 };
    let p_fa = if h0.1 > 0 { h0.0 as f64 / h0.1 as f64 } else { 0.0 };
    let (mse_11, mse_10, mse_01) = (mean(s11), mean(s10), mean(s01));
    let p_h1 = 0.5;
    let overall = p_h1 * ((1.0 - p_d) * mse_01 + p_d * mse_11) + (1.0 - p_h1) * p_fa * mse_10;
    let sigma_n2 = cfg.sigma_n2();
    MseReport {
        mse_11,
        mse_10,
        mse_01,
        p_d,
        p_fa,
        overall,
        analytic_mse_11: sigma_n2 * cfg.n as f64 / cfg.p_radar,
        analytic_mse_01: (cfg.n * cfg.n) as f64 * sigma_n2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, StreamPurpose};
    use crate::scenario::build_constellation;

    fn small_cfg() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.n = 6;
        cfg.k = 2;
        cfg.t = 2;
        cfg.l = 12;
        cfg.d_c = vec![1.0, 1.2];
        cfg.d_r = vec![1.0, 1.1];
        cfg.a_t = vec![10.0; 2];
        cfg.b_k = vec![10.0; 2];
        cfg
    }

    #[test]
    fn cic_waveform_power_and_covariance() {
        let mut cfg = ScenarioConfig::default();
        cfg.l = 100; // multiple of N = 20
        let wr = cic_waveform(&cfg);
        assert!((wr.power() - cfg.p_radar).abs() < 1e-12);
        // per-snapshot per-beam power P_r / T
        for t in 0..cfg.t {
            let b = wr.beam(t);
            for l in 0..cfg.l {
                let p: f64 = b.column(l).iter().map(|z| z.norm_sqr()).sum();
                assert!((p - cfg.p_radar / cfg.t as f64).abs() < 1e-12);
            }
        }
        // frame covariance sums to (P_r / N) I
        let wc = CMat::zeros(cfg.n, cfg.k);
        let mut rw = CMat::zeros(cfg.n, cfg.n);
        for t in 0..cfg.t {
            rw += beam_covariance(&wr, &wc, t);
        }
        let target = cfg.p_radar / cfg.n as f64;
        for i in 0..cfg.n {
            for j in 0..cfg.n {
                let want = if i == j { target } else { 0.0 };
                assert!(
                    (rw[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-12,
                    "R_w deviates at ({i},{j}): {}",
                    rw[(i, j)]
                );
            }
        }
    }

    #[test]
    fn beam_covariance_psd_and_comm_only_case() {
        let cfg = small_cfg();
        let mut rng = substream(1, StreamPurpose::Oracle, &[0]);
        let wc = draw_complex_gaussian(&mut rng, cfg.n, cfg.k, 1.0);
        let wr = RadarWaveformTensor::zeros(cfg.n, cfg.l, cfg.t);
        let r = beam_covariance(&wr, &wc, 0);
        let expected = &wc * wc.adjoint();
        assert!((&r - &expected).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-12);

        let wr2 = RadarWaveformTensor::new(
            (0..cfg.t)
                .map(|_| draw_complex_gaussian(&mut rng, cfg.n, cfg.l, 1.0))
                .collect(),
        );
        let r2 = beam_covariance(&wr2, &wc, 1);
        assert!(crate::linalg::hermitian_residual(&r2) < 1e-12);
        let eig = r2.symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-12));
    }

    #[test]
    fn radar_kld_zero_channel_and_hand_value() {
        // H_t = 0 => identical hypotheses => 0 bits
        let h0 = CMat::zeros(4, 4);
        let r = CMat::identity(4, 4);
        assert!(radar_kld(&h0, &r, 0.3, 1.0).unwrap().abs() < 1e-12);

        // N = 2, sigma_n^2 = 1, a^2 H R H^H = I: (2 ln 2 + 1 - 2)/ln 2
        let h = CMat::identity(2, 2);
        let r = CMat::identity(2, 2);
        let v = radar_kld(&h, &r, 1.0, 1.0).unwrap();
        let expect = (2.0 * std::f64::consts::LN_2 - 1.0) / std::f64::consts::LN_2;
        assert!((v - expect).abs() < 1e-12, "got {v}, want {expect}");
        assert!((v - 0.5573).abs() < 1e-3);
    }

    #[test]
    fn radar_kld_monotone_in_covariance_scale() {
        let mut rng = substream(2, StreamPurpose::Oracle, &[1]);
        for i in 0..10 {
            let h = draw_complex_gaussian(&mut rng, 4, 4, 1.0);
            let a = draw_complex_gaussian(&mut rng, 4, 4, 1.0);
            let r = hermitize(&(&a * a.adjoint()));
            let v1 = radar_kld(&h, &r, 0.5, 1.0).unwrap();
            let v2 = radar_kld(&h, &r.scale(1.7), 0.5, 1.0).unwrap();
            assert!(v2 >= v1 - 1e-12, "instance {i}: {v2} < {v1}");
        }
    }

    #[test]
    fn radar_kld_unitary_invariance() {
        let mut rng = substream(3, StreamPurpose::Oracle, &[2]);
        let h = draw_complex_gaussian(&mut rng, 4, 4, 1.0);
        let a = draw_complex_gaussian(&mut rng, 4, 4, 1.0);
        let r = hermitize(&(&a * a.adjoint()));
        // unitary factor from QR of a random matrix
        let q = draw_complex_gaussian(&mut rng, 4, 4, 1.0).qr().q();
        let v1 = radar_kld(&h, &r, 0.7, 1.3).unwrap();
        let v2 = radar_kld(&(q * &h), &r, 0.7, 1.3).unwrap();
        assert!((v1 - v2).abs() < 1e-9);
    }

    #[test]
    fn estimator_recovers_noiseless_response() {
        let mut rng = substream(4, StreamPurpose::Oracle, &[3]);
        let n = 6;
        let h = draw_complex_gaussian(&mut rng, n, n, 1.0);
        let x = draw_complex_gaussian(&mut rng, n, 2 * n, 1.0);
        let y = &h * &x;
        let h_hat = estimate_response(&y, &x);
        let err = (&h_hat - &h).iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale = h.iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err / scale < 1e-8);
    }

    #[test]
    fn estimator_rank_one_projects_onto_span() {
        let mut rng = substream(5, StreamPurpose::Oracle, &[4]);
        let n = 5;
        let x = draw_complex_gaussian(&mut rng, n, 1, 1.0);
        let y = draw_complex_gaussian(&mut rng, n, 1, 1.0);
        let h_hat = estimate_response(&y, &x);
        // H_hat x must equal the projection of y onto span(x)
        let proj = &x * (x.adjoint() * &y).scale(1.0 / fro_sq(&x));
        let hx = &h_hat * &x;
        assert!((&hx - &proj).iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-10);
    }

    #[test]
    fn noise_only_estimate_energy_matches_analytic() {
        // E||H_hat||^2 = sigma_n^2 N tr((XX^H)^+); with XX^H = N P_r I this
        // is sigma_n^2 N / P_r.
        let n = 8;
        let l = 16;
        let p_r = 0.5;
        let mut rng = substream(6, StreamPurpose::Oracle, &[5]);
        let scale = ((n * n) as f64 * p_r / l as f64).sqrt();
        let x = CMat::from_fn(n, l, |i, li| {
            let m = li % n;
            let th = 2.0 * std::f64::consts::PI * (m * i % n) as f64 / n as f64;
            Complex64::new(th.cos(), th.sin()) * (scale / (n as f64).sqrt())
        });
        let xxh = &x * x.adjoint();
        assert!((xxh[(0, 0)].re - n as f64 * p_r).abs() < 1e-9);
        let sigma_n2 = 0.3;
        let mut acc = 0.0;
        let trials = 4000;
        for _ in 0..trials {
            let y = draw_complex_gaussian(&mut rng, n, l, sigma_n2);
            acc += fro_sq(&estimate_response(&y, &x));
        }
        let mean = acc / trials as f64;
        let want = sigma_n2 * n as f64 / p_r;
        assert!((mean - want).abs() / want < 0.05, "mean {mean}, want {want}");
    }

    #[test]
    fn glrt_zero_input_and_h0_mean() {
        let n = 6;
        let l = 4;
        let y0 = CMat::zeros(n, l);
        let h_hat = CMat::zeros(n, n);
        let r_t = CMat::identity(n, n);
        assert_eq!(glrt_statistic(&y0, &h_hat, &r_t, 1.0).unwrap(), 0.0);

        // H0 with H_hat = 0, sigma_n^2 = 1: E stat = 2N
        let mut rng = substream(7, StreamPurpose::Oracle, &[6]);
        let mut acc = 0.0;
        let trials = 10_000;
        for _ in 0..trials {
            let y = draw_complex_gaussian(&mut rng, n, l, 1.0);
            acc += glrt_statistic(&y, &h_hat, &r_t, 1.0).unwrap();
        }
        let mean = acc / trials as f64;
        assert!(
            (mean - 2.0 * n as f64).abs() / (2.0 * n as f64) < 0.03,
            "mean {mean}"
        );
    }

    #[test]
    fn glrt_statistic_nonnegative() {
        let mut rng = substream(8, StreamPurpose::Oracle, &[7]);
        for _ in 0..20 {
            let y = draw_complex_gaussian(&mut rng, 5, 3, 2.0);
            let h_hat = draw_complex_gaussian(&mut rng, 5, 5, 1.0);
            let a = draw_complex_gaussian(&mut rng, 5, 5, 1.0);
            let r_t = hermitize(&(&a * a.adjoint()));
            assert!(glrt_statistic(&y, &h_hat, &r_t, 0.4).unwrap() >= 0.0);
        }
    }

    #[test]
    fn threshold_quantile_semantics() {
        let mut cfg = small_cfg();
        cfg.snr_db = 3.0;
        let cons = build_constellation(cfg.m).unwrap();
        let mut rng = substream(9, StreamPurpose::Calibration, &[0]);
        let wr = cic_waveform(&cfg);
        let wc = draw_complex_gaussian(&mut rng, cfg.n, cfg.k, 0.2);

        // P_FA = 0.5 gives the empirical median; tau2 non-increasing in P_FA.
        let mut cfg_med = cfg.clone();
        cfg_med.p_fa = 0.5;
        let mut r1 = substream(9, StreamPurpose::Calibration, &[1]);
        let med = calibrate_threshold(&cfg_med, &cons, &wc, &wr, 401, &mut r1).unwrap();
        let mut cfg_low = cfg.clone();
        cfg_low.p_fa = 0.1;
        let mut r2 = substream(9, StreamPurpose::Calibration, &[1]);
        let low = calibrate_threshold(&cfg_low, &cons, &wc, &wr, 401, &mut r2).unwrap();
        for t in 0..cfg.t {
            assert!(low.tau2[t] >= med.tau2[t]);
        }
        assert!(med.low_confidence == false);
        let mut r3 = substream(9, StreamPurpose::Calibration, &[1]);
        let mut stats = Vec::new();
        for _ in 0..401 {
            let r_t = beam_covariance(&wr, &wc, 0);
            stats.push(
                h0_statistic(&wr, &wc, &cons, &r_t, cfg.sigma_n2(), 0, &mut r3)
                    .unwrap()
                    .0,
            );
        }
        stats.sort_by(|a, b| a.total_cmp(b));
        assert_eq!(med.tau2[0], stats[200]);
    }

    #[test]
    fn detection_saturates_at_high_snr() {
        let mut cfg = small_cfg();
        cfg.snr_db = 60.0;
        cfg.p_fa = 0.1;
        let cons = build_constellation(cfg.m).unwrap();
        let wr = cic_waveform(&cfg);
        let mut rng = substream(10, StreamPurpose::Channels, &[0]);
        let wc = draw_complex_gaussian(&mut rng, cfg.n, cfg.k, 0.25);
        let mut rng_t = substream(10, StreamPurpose::Targets, &[0]);
        let targets = crate::scenario::draw_targets(&cfg, &mut rng_t, &[true, true]);
        let mut rng_c = substream(10, StreamPurpose::Calibration, &[0]);
        let cal = calibrate_threshold(&cfg, &cons, &wc, &wr, 200, &mut rng_c).unwrap();
        let mut rng_d = substream(10, StreamPurpose::Detection, &[0]);
        let det = run_detection(&cfg, &cons, &wc, &wr, &targets, &cal.tau2, 60, &mut rng_d).unwrap();
        for t in 0..cfg.t {
            assert!(det.p_d[t] > 0.95, "target {t}: p_d = {}", det.p_d[t]);
        }
    }

    #[test]
    fn mse_decomposition_identity() {
        let cfg = ScenarioConfig::default();
        // P_D = 1, P_FA = 0 => overall = 0.5 * mse_11
        let records = vec![
            EstimationRecord {
                truth: true,
                detected: true,
                sq_err_detected: 3.0,
                sq_truth: 9.0,
            },
            EstimationRecord {
                truth: false,
                detected: false,
                sq_err_detected: 0.0,
                sq_truth: 0.0,
            },
        ];
        let rep = mse_report(&cfg, &records);
        assert_eq!(rep.p_d, 1.0);
        assert_eq!(rep.p_fa, 0.0);
        assert!((rep.overall - 0.5 * 3.0).abs() < 1e-12);
        // analytic references at sigma_n^2 = 1
        let mut cfg1 = cfg;
        cfg1.snr_db = 10.0 * (cfg1.p_radar / 1.0).log10(); // sigma_n^2 = 1
        let rep1 = mse_report(&cfg1, &records);
        assert!((rep1.analytic_mse_11 - cfg1.n as f64 / cfg1.p_radar).abs() < 1e-9);
        assert!((rep1.analytic_mse_01 - (cfg1.n * cfg1.n) as f64).abs() < 1e-9);
    }
}
