//! Predict/update filters for CPU utilization tracking.
//!
//! Three estimators share one state layout:
//!
//! * the standard Kalman filter (the baseline),
//! * a game-theoretic H∞ (minimax) filter with performance bound `θ`,
//! * a maximum-correntropy Kalman filter (MCC-KF) with Gaussian kernel `σ`.
//!
//! Each comes in a matrix form (`*_mimo`, any n ≤ 8) and a scalar form
//! (`*_siso`). Both forms are split into a prediction phase and an update
//! phase; the `*_step` functions chain predict → update for callers that
//! want a single call per observation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{Mat, PD_TOL};

/// Bounds applied to the correntropy ratio `L`.
pub const MCC_L_MIN: f64 = 1e-12;
pub const MCC_L_MAX: f64 = 1e12;

pub const DEFAULT_THETA_SISO: f64 = 0.7;
pub const DEFAULT_THETA_MIMO: f64 = 0.1;
pub const DEFAULT_SIGMA: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    Kalman,
    Hinf,
    Mcc,
}

impl FilterKind {
    pub const ALL: [FilterKind; 3] = [FilterKind::Kalman, FilterKind::Hinf, FilterKind::Mcc];

    pub fn name(self) -> &'static str {
        match self {
            FilterKind::Kalman => "kalman",
            FilterKind::Hinf => "hinf",
            FilterKind::Mcc => "mcc",
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kalman" | "kf" => Ok(FilterKind::Kalman),
            "hinf" | "h-inf" | "hinfinity" => Ok(FilterKind::Hinf),
            "mcc" | "mcc-kf" | "mcckf" => Ok(FilterKind::Mcc),
            other => Err(Error::usage(format!(
                "unknown filter '{other}' (expected kalman, hinf or mcc)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HinfConfig {
    pub theta: f64,
    /// Diagonal of the allowable-error matrix `D`, used only for auditing θ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowable_error: Option<Vec<f64>>,
}

impl HinfConfig {
    pub fn new(theta: f64) -> Result<Self> {
        let cfg = HinfConfig {
            theta,
            allowable_error: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::usage(format!("theta must be positive, got {}", self.theta)));
        }
        if let Some(d) = &self.allowable_error {
            if d.is_empty() || d.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::usage("allowable error entries must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MccConfig {
    pub sigma: f64,
}

impl MccConfig {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::usage(format!("sigma must be positive, got {sigma}")));
        }
        Ok(MccConfig { sigma })
    }
}

/// One of the three filters together with its tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Estimator {
    Kalman,
    Hinf(HinfConfig),
    Mcc(MccConfig),
}

impl Estimator {
    pub fn kind(&self) -> FilterKind {
        match self {
            Estimator::Kalman => FilterKind::Kalman,
            Estimator::Hinf(_) => FilterKind::Hinf,
            Estimator::Mcc(_) => FilterKind::Mcc,
        }
    }

    /// Update phase on a matrix state whose prior is already in place.
    pub fn update_mimo(
        &self,
        s: &mut FilterState,
        y: &[f64],
        v: &Mat,
        sys: &SystemMatrices,
    ) -> Result<UpdateInfo> {
        match self {
            Estimator::Kalman => kalman_update(s, y, v, sys),
            Estimator::Hinf(cfg) => hinf_update_mimo(s, y, v, sys, cfg),
            Estimator::Mcc(cfg) => mcc_update_mimo(s, y, v, sys, cfg),
        }
    }

    pub fn update_siso(&self, s: &mut ScalarState, y: f64, v: f64) -> Result<UpdateInfo> {
        match self {
            Estimator::Kalman => kalman_update_siso(s, y, v),
            Estimator::Hinf(cfg) => hinf_update_siso(s, y, v, cfg),
            Estimator::Mcc(cfg) => mcc_update_siso(s, y, v, cfg),
        }
    }
}

/// State-transition and observation matrices; identity by default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemMatrices {
    pub a: Mat,
    pub c: Mat,
}

impl SystemMatrices {
    pub fn identity(n: usize) -> Self {
        SystemMatrices {
            a: Mat::identity(n),
            c: Mat::identity(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.rows()
    }
}

/// Posterior and prior estimate/covariance carried between intervals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    /// Posterior `x̂_{k|k}`.
    pub x: Vec<f64>,
    /// Posterior `P_{k|k}`.
    pub p: Mat,
    /// Prior `x̂_{k|k−1}`.
    pub x_pred: Vec<f64>,
    /// Prior `P_{k|k−1}`.
    pub p_pred: Mat,
}

impl FilterState {
    /// Posterior and prior both set to `(x0, P0)`.
    pub fn new(x0: Vec<f64>, p0: Mat) -> Result<Self> {
        if !p0.is_square() || p0.rows() != x0.len() {
            return Err(Error::usage("initial covariance does not match state dimension"));
        }
        Ok(FilterState {
            x_pred: x0.clone(),
            p_pred: p0.clone(),
            x: x0,
            p: p0,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarState {
    pub x: f64,
    pub p: f64,
    pub x_pred: f64,
    pub p_pred: f64,
}

impl ScalarState {
    pub fn new(x0: f64, p0: f64) -> Self {
        ScalarState {
            x: x0,
            p: p0,
            x_pred: x0,
            p_pred: p0,
        }
    }
}

/// Per-update diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateInfo {
    /// Gain diagonal (the full gain for scalar filters).
    pub gain: Vec<f64>,
    /// Correntropy ratio `L` after clamping (MCC only).
    pub mcc_ratio: Option<f64>,
    /// True when `L` had to be clamped from below.
    pub kernel_underflow: bool,
}

impl UpdateInfo {
    fn plain(gain: Vec<f64>) -> Self {
        UpdateInfo {
            gain,
            mcc_ratio: None,
            kernel_underflow: false,
        }
    }
}

/// `G_σ(t) = exp(−t² / 2σ²)`.
pub fn gaussian_kernel(t: f64, sigma: f64) -> f64 {
    (-(t * t) / (2.0 * sigma * sigma)).exp()
}

fn check_dims(s: &FilterState, y: &[f64], v: &Mat, sys: &SystemMatrices) -> Result<()> {
    let n = s.dim();
    if sys.a.rows() != n || !sys.a.is_square() {
        return Err(Error::usage("A does not match state dimension"));
    }
    if sys.c.cols() != n || sys.c.rows() != y.len() {
        return Err(Error::usage("C does not match state/observation dimensions"));
    }
    if !v.is_square() || v.rows() != y.len() {
        return Err(Error::usage("V does not match observation dimension"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("non-finite observation"));
    }
    Ok(())
}

fn finish_covariance(p: Mat, what: &str) -> Result<Mat> {
    let p = p.symmetrized();
    if !p.is_finite() {
        return Err(Error::NonFinite(what.to_string()));
    }
    Ok(p)
}

fn add_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub_vec(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Prediction phase: `x̂_{k+1|k} = A x̂_{k|k}`, `P_{k+1|k} = A P Aᵀ + W`.
pub fn predict(s: &mut FilterState, w: &Mat, sys: &SystemMatrices) -> Result<()> {
    if w.rows() != s.dim() || !w.is_square() {
        return Err(Error::usage("W does not match state dimension"));
    }
    s.x_pred = sys.a.mul_vec(&s.x)?;
    let apa = sys.a.mul(&s.p)?.mul(&sys.a.transpose())?;
    s.p_pred = finish_covariance(apa.try_add(w)?, "covariance prediction")?;
    Ok(())
}

pub fn kalman_update(
    s: &mut FilterState,
    y: &[f64],
    v: &Mat,
    sys: &SystemMatrices,
) -> Result<UpdateInfo> {
    check_dims(s, y, v, sys)?;
    let ct = sys.c.transpose();
    let innov_cov = sys.c.mul(&s.p_pred)?.mul(&ct)?.try_add(v)?;
    let k = s.p_pred.mul(&ct)?.mul(&innov_cov.inverse()?)?;
    let innovation = sub_vec(y, &sys.c.mul_vec(&s.x_pred)?);
    s.x = add_vec(&s.x_pred, &k.mul_vec(&innovation)?);
    let i_kc = Mat::identity(s.dim()).try_sub(&k.mul(&sys.c)?)?;
    s.p = finish_covariance(i_kc.mul(&s.p_pred)?, "Kalman covariance update")?;
    Ok(UpdateInfo::plain(k.diagonal()))
}

pub fn kalman_step(
    s: &FilterState,
    y: &[f64],
    w: &Mat,
    v: &Mat,
    sys: &SystemMatrices,
) -> Result<FilterState> {
    let mut next = s.clone();
    predict(&mut next, w, sys)?;
    kalman_update(&mut next, y, v, sys)?;
    Ok(next)
}

/// `I − θP_pred + CᵀV⁻¹C·P_pred`.
fn hinf_condition_matrix(p_pred: &Mat, v: &Mat, c: &Mat, theta: f64) -> Result<Mat> {
    let n = p_pred.rows();
    let ctvi_c = c.transpose().mul(&v.inverse()?)?.mul(c)?;
    Mat::identity(n)
        .try_sub(&p_pred.scale(theta))?
        .try_add(&ctvi_c.mul(p_pred)?)
}

fn check_feasible(m: &Mat, theta: f64) -> Result<()> {
    let pivots = m.ldl_pivots()?;
    match pivots.iter().position(|&p| !(p > PD_TOL)) {
        Some(i) => Err(Error::Infeasible {
            theta,
            index: i + 1,
            pivot: pivots[i],
        }),
        None => Ok(()),
    }
}

/// `I − θP + CᵀV⁻¹CP = (P⁻¹ − θI + CᵀV⁻¹C)·P`, so for a positive definite
/// `P` the product has positive eigenvalues exactly when the symmetric factor
/// is positive definite. The product itself is not symmetric once `V` and `P`
/// stop commuting, and its symmetric part can be indefinite even at θ → 0.
/// A singular `P` falls back to the symmetric part of the product.
fn check_hinf_condition(p_pred: &Mat, v: &Mat, c: &Mat, theta: f64) -> Result<()> {
    match p_pred.inverse() {
        Ok(p_inv) => {
            let ctvi_c = c.transpose().mul(&v.inverse()?)?.mul(c)?;
            let s = p_inv
                .try_sub(&Mat::scaled_identity(p_pred.rows(), theta))?
                .try_add(&ctvi_c)?;
            check_feasible(&s, theta)
        }
        Err(Error::Singular { .. }) => {
            check_feasible(&hinf_condition_matrix(p_pred, v, c, theta)?, theta)
        }
        Err(e) => Err(e),
    }
}

/// Existence condition of the H∞ update: `I − θP_pred + CᵀV⁻¹CP_pred ≻ 0`.
pub fn hinf_feasibility(p_pred: &Mat, v: &Mat, c: &Mat, theta: f64) -> Result<bool> {
    match check_hinf_condition(p_pred, v, c, theta) {
        Ok(()) => Ok(true),
        Err(Error::Infeasible { .. }) => Ok(false),
        Err(e) => Err(e),
    }
}

pub fn hinf_update_mimo(
    s: &mut FilterState,
    y: &[f64],
    v: &Mat,
    sys: &SystemMatrices,
    cfg: &HinfConfig,
) -> Result<UpdateInfo> {
    check_dims(s, y, v, sys)?;
    check_hinf_condition(&s.p_pred, v, &sys.c, cfg.theta)?;
    let m = hinf_condition_matrix(&s.p_pred, v, &sys.c, cfg.theta)?;
    let p_minv = s.p_pred.mul(&m.inverse()?)?;
    let k = p_minv.mul(&sys.c.transpose())?.mul(&v.inverse()?)?;
    let innovation = sub_vec(y, &sys.c.mul_vec(&s.x_pred)?);
    s.x = add_vec(&s.x_pred, &k.mul_vec(&innovation)?);
    s.p = finish_covariance(p_minv, "H-infinity covariance update")?;
    Ok(UpdateInfo::plain(k.diagonal()))
}

pub fn hinf_step_mimo(
    s: &FilterState,
    y: &[f64],
    w: &Mat,
    v: &Mat,
    sys: &SystemMatrices,
    cfg: &HinfConfig,
) -> Result<FilterState> {
    let mut next = s.clone();
    predict(&mut next, w, sys)?;
    hinf_update_mimo(&mut next, y, v, sys, cfg)?;
    Ok(next)
}

/// Correntropy ratio: kernel of the weighted innovation over kernel of the
/// weighted prediction deviation, clamped to `[MCC_L_MIN, MCC_L_MAX]`.
fn correntropy_ratio(innov_sq: f64, dev_sq: f64, sigma: f64) -> (f64, bool) {
    let num = gaussian_kernel(innov_sq.sqrt(), sigma);
    let den = gaussian_kernel(dev_sq.sqrt(), sigma);
    let raw = num / den;
    if !(raw >= MCC_L_MIN) {
        (MCC_L_MIN, true)
    } else {
        (raw.min(MCC_L_MAX), false)
    }
}

pub fn mcc_update_mimo(
    s: &mut FilterState,
    y: &[f64],
    v: &Mat,
    sys: &SystemMatrices,
    cfg: &MccConfig,
) -> Result<UpdateInfo> {
    check_dims(s, y, v, sys)?;
    let v_inv = v.inverse()?;
    let p_pred_inv = s.p_pred.inverse()?;
    let innovation = sub_vec(y, &sys.c.mul_vec(&s.x_pred)?);
    let deviation = sub_vec(&s.x_pred, &sys.a.mul_vec(&s.x)?);
    let (l, underflow) = correntropy_ratio(
        v_inv.weighted_sq_norm(&innovation)?,
        p_pred_inv.weighted_sq_norm(&deviation)?,
        cfg.sigma,
    );
    let ct_vi = sys.c.transpose().mul(&v_inv)?;
    let info = p_pred_inv.try_add(&ct_vi.mul(&sys.c)?.scale(l))?;
    let k = info.inverse()?.mul(&ct_vi.scale(l))?;
    s.x = add_vec(&s.x_pred, &k.mul_vec(&innovation)?);
    let i_kc = Mat::identity(s.dim()).try_sub(&k.mul(&sys.c)?)?;
    let joseph = i_kc
        .mul(&s.p_pred)?
        .mul(&i_kc.transpose())?
        .try_add(&k.mul(v)?.mul(&k.transpose())?)?;
    s.p = finish_covariance(joseph, "MCC-KF covariance update")?;
    Ok(UpdateInfo {
        gain: k.diagonal(),
        mcc_ratio: Some(l),
        kernel_underflow: underflow,
    })
}

pub fn mcc_step_mimo(
    s: &FilterState,
    y: &[f64],
    w: &Mat,
    v: &Mat,
    sys: &SystemMatrices,
    cfg: &MccConfig,
) -> Result<FilterState> {
    let mut next = s.clone();
    predict(&mut next, w, sys)?;
    mcc_update_mimo(&mut next, y, v, sys, cfg)?;
    Ok(next)
}

// Scalar forms (A = C = 1).

pub fn predict_siso(s: &mut ScalarState, w: f64) {
    s.x_pred = s.x;
    s.p_pred = s.p + w;
}

fn check_scalar(y: f64, v: f64) -> Result<()> {
    if !y.is_finite() {
        return Err(Error::input(format!("non-finite observation {y}")));
    }
    if !(v > 0.0) {
        return Err(Error::usage(format!("measurement variance must be positive, got {v}")));
    }
    Ok(())
}

fn finite_scalar(s: &ScalarState, what: &str) -> Result<()> {
    if s.x.is_finite() && s.p.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

pub fn kalman_update_siso(s: &mut ScalarState, y: f64, v: f64) -> Result<UpdateInfo> {
    check_scalar(y, v)?;
    let k = s.p_pred / (s.p_pred + v);
    s.x = s.x_pred + k * (y - s.x_pred);
    s.p = (1.0 - k) * s.p_pred;
    finite_scalar(s, "Kalman update")?;
    Ok(UpdateInfo::plain(vec![k]))
}

pub fn kalman_step_siso(s: &ScalarState, y: f64, w: f64, v: f64) -> Result<ScalarState> {
    let mut next = *s;
    predict_siso(&mut next, w);
    kalman_update_siso(&mut next, y, v)?;
    Ok(next)
}

/// Scalar existence condition `1 − θP + P/V > 0`, returned as its value.
pub fn hinf_condition_siso(p_pred: f64, v: f64, theta: f64) -> f64 {
    1.0 - theta * p_pred + p_pred / v
}

pub fn hinf_update_siso(
    s: &mut ScalarState,
    y: f64,
    v: f64,
    cfg: &HinfConfig,
) -> Result<UpdateInfo> {
    check_scalar(y, v)?;
    let denom = hinf_condition_siso(s.p_pred, v, cfg.theta);
    if !(denom > PD_TOL) {
        return Err(Error::Infeasible {
            theta: cfg.theta,
            index: 1,
            pivot: denom,
        });
    }
    let k = s.p_pred / (v * denom);
    s.x = s.x_pred + k * (y - s.x_pred);
    s.p = s.p_pred / denom;
    finite_scalar(s, "H-infinity update")?;
    Ok(UpdateInfo::plain(vec![k]))
}

pub fn hinf_step_siso(
    s: &ScalarState,
    y: f64,
    w: f64,
    v: f64,
    cfg: &HinfConfig,
) -> Result<ScalarState> {
    let mut next = *s;
    predict_siso(&mut next, w);
    hinf_update_siso(&mut next, y, v, cfg)?;
    Ok(next)
}

pub fn mcc_update_siso(
    s: &mut ScalarState,
    y: f64,
    v: f64,
    cfg: &MccConfig,
) -> Result<UpdateInfo> {
    check_scalar(y, v)?;
    if !(s.p_pred > 0.0) {
        return Err(Error::Singular { pivot: s.p_pred.abs() });
    }
    let innovation = y - s.x_pred;
    let deviation = s.x_pred - s.x;
    let (l, underflow) = correntropy_ratio(
        innovation * innovation / v,
        deviation * deviation / s.p_pred,
        cfg.sigma,
    );
    let k = l / ((1.0 / s.p_pred + l / v) * v);
    s.x = s.x_pred + k * innovation;
    s.p = (1.0 - k).powi(2) * s.p_pred + k * k * v;
    finite_scalar(s, "MCC-KF update")?;
    Ok(UpdateInfo {
        gain: vec![k],
        mcc_ratio: Some(l),
        kernel_underflow: underflow,
    })
}

pub fn mcc_step_siso(
    s: &ScalarState,
    y: f64,
    w: f64,
    v: f64,
    cfg: &MccConfig,
) -> Result<ScalarState> {
    let mut next = *s;
    predict_siso(&mut next, w);
    mcc_update_siso(&mut next, y, v, cfg)?;
    Ok(next)
}

/// Empirical right-hand side of the θ bound for one step:
/// `(‖w‖²_{W⁻¹} + ‖v‖²_{V⁻¹}) / ‖D‖²`, with `w` and `v` replaced by the
/// residual proxies `x̂_{k|k} − A x̂_{k−1|k−1}` and `y − C x̂_{k|k}`.
/// A chosen θ is consistent with the run when it stays below the minimum of
/// this ratio over the steps.
pub fn theta_audit_ratio(
    process_residual: &[f64],
    measurement_residual: &[f64],
    w: &Mat,
    v: &Mat,
    allowable_error: &[f64],
) -> Result<f64> {
    let d_norm = allowable_error.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if d_norm == 0.0 {
        return Err(Error::usage("allowable error matrix D is zero"));
    }
    let energy = w.inverse()?.weighted_sq_norm(process_residual)?
        + v.inverse()?.weighted_sq_norm(measurement_residual)?;
    Ok(energy / (d_norm * d_norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scalar_mimo(x: f64, p: f64) -> FilterState {
        FilterState::new(vec![x], Mat::scalar(p)).unwrap()
    }

    #[test]
    fn kalman_gain_example() {
        let s = ScalarState::new(50.0, 4.0);
        let mut t = s;
        predict_siso(&mut t, 0.0);
        let info = kalman_update_siso(&mut t, 55.0, 1.0).unwrap();
        assert!((info.gain[0] - 0.8).abs() < 1e-15);

        let sys = SystemMatrices::identity(1);
        let mut m = scalar_mimo(50.0, 4.0);
        predict(&mut m, &Mat::scalar(0.0), &sys).unwrap();
        let info = kalman_update(&mut m, &[55.0], &Mat::scalar(1.0), &sys).unwrap();
        assert!((info.gain[0] - 0.8).abs() < 1e-15);
        assert!((m.x[0] - 54.0).abs() < 1e-12);
    }

    #[test]
    fn zero_innovation_keeps_prior() {
        let sys = SystemMatrices::identity(2);
        let s = FilterState::new(vec![40.0, 10.0], Mat::scaled_identity(2, 3.0)).unwrap();
        let w = Mat::scaled_identity(2, 0.5);
        let v = Mat::identity(2);
        let k = kalman_step(&s, &[40.0, 10.0], &w, &v, &sys).unwrap();
        assert_eq!(k.x, vec![40.0, 10.0]);
        let h = hinf_step_mimo(&s, &[40.0, 10.0], &w, &v, &sys, &HinfConfig::new(0.1).unwrap())
            .unwrap();
        assert_eq!(h.x, vec![40.0, 10.0]);
        let m = mcc_step_mimo(&s, &[40.0, 10.0], &w, &v, &sys, &MccConfig::new(100.0).unwrap())
            .unwrap();
        assert_eq!(m.x, vec![40.0, 10.0]);

        let ss = ScalarState::new(30.0, 2.0);
        let out = mcc_step_siso(&ss, 30.0, 1.0, 1.0, &MccConfig::new(5.0).unwrap()).unwrap();
        assert_eq!(out.x, 30.0);
    }

    #[test]
    fn huge_measurement_noise_ignores_observation() {
        let sys = SystemMatrices::identity(1);
        let s = scalar_mimo(50.0, 4.0);
        let out = kalman_step(&s, &[90.0], &Mat::scalar(0.0), &Mat::scalar(1e12), &sys).unwrap();
        assert!((out.x[0] - 50.0).abs() < 1e-9);
    }

    #[test]
    fn hinf_scalar_example() {
        let cfg = HinfConfig::new(0.1).unwrap();
        let mut s = ScalarState::new(0.0, 5.0);
        let info = hinf_update_siso(&mut s, 1.0, 1.0, &cfg).unwrap();
        assert!((info.gain[0] - 5.0 / 5.5).abs() < 1e-15);
        assert!((s.p - 5.0 / 5.5).abs() < 1e-15);

        let mut k = ScalarState::new(0.0, 5.0);
        let kinfo = kalman_update_siso(&mut k, 1.0, 1.0).unwrap();
        assert!((kinfo.gain[0] - 5.0 / 6.0).abs() < 1e-15);
        assert!(kinfo.gain[0] < info.gain[0]);

        let mut tiny = ScalarState::new(0.0, 5.0);
        let tinfo = hinf_update_siso(&mut tiny, 1.0, 1.0, &HinfConfig::new(1e-12).unwrap())
            .unwrap();
        assert!((tinfo.gain[0] - 5.0 / 6.0).abs() < 1e-9);
    }

    #[test]
    fn hinf_matrix_form_on_scalar() {
        let sys = SystemMatrices::identity(1);
        let mut s = scalar_mimo(0.0, 5.0);
        let info = hinf_update_mimo(
            &mut s,
            &[1.0],
            &Mat::scalar(1.0),
            &sys,
            &HinfConfig::new(0.1).unwrap(),
        )
        .unwrap();
        assert!((info.gain[0] - 0.909_090_909_090_909_1).abs() < 1e-15);
    }

    #[test]
    fn feasibility_examples() {
        let one = Mat::scalar(1.0);
        assert_eq!(hinf_condition_siso(10.0, 1.0, 2.0), -9.0);
        assert_eq!(hinf_condition_siso(10.0, 1.0, 0.7), 4.0);
        assert!(!hinf_feasibility(&Mat::scalar(10.0), &one, &one, 2.0).unwrap());
        assert!(hinf_feasibility(&Mat::scalar(10.0), &one, &one, 0.7).unwrap());
        assert!(hinf_feasibility(&Mat::scalar(1e6), &one, &one, 1e-12).unwrap());

        // V⁻¹P is far from symmetric here; its symmetric part is indefinite
        // but the condition still holds as θ → 0.
        let p = Mat::diag(&[100.0, 0.01]);
        let v = Mat::from_rows(&[&[1.0, 0.9], &[0.9, 1.0]]).unwrap();
        let c = Mat::identity(2);
        let prod = Mat::identity(2).try_add(&v.inverse().unwrap().mul(&p).unwrap()).unwrap();
        assert!(!prod.is_positive_definite().unwrap());
        assert!(hinf_feasibility(&p, &v, &c, 1e-9).unwrap());
        assert!(!hinf_feasibility(&p, &v, &c, 50.0).unwrap());

        let mut s = ScalarState::new(0.0, 10.0);
        match hinf_update_siso(&mut s, 1.0, 1.0, &HinfConfig::new(2.0).unwrap()) {
            Err(Error::Infeasible { theta, pivot, .. }) => {
                assert_eq!(theta, 2.0);
                assert_eq!(pivot, -9.0);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        // Rejected update leaves the state alone.
        assert_eq!(s, ScalarState::new(0.0, 10.0));

        let sys = SystemMatrices::identity(2);
        let mut m = FilterState::new(vec![0.0; 2], Mat::scaled_identity(2, 10.0)).unwrap();
        let err = hinf_update_mimo(
            &mut m,
            &[1.0, 1.0],
            &Mat::identity(2),
            &sys,
            &HinfConfig::new(2.0).unwrap(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Infeasible { index: 1, .. }));
        assert!(err.to_string().contains("negative"));
    }

    #[test]
    fn mcc_scalar_example() {
        let cfg = MccConfig::new(100.0).unwrap();
        let mut s = ScalarState {
            x: 50.0,
            p: 4.0,
            x_pred: 50.0,
            p_pred: 5.0,
        };
        let info = mcc_update_siso(&mut s, 60.0, 1.0, &cfg).unwrap();
        let l = (-0.005f64).exp();
        assert!((info.mcc_ratio.unwrap() - l).abs() < 1e-15);
        assert!((info.gain[0] - l / (0.2 + l)).abs() < 1e-15);
        assert!((info.gain[0] - 0.83264).abs() < 1e-5);

        let sys = SystemMatrices::identity(1);
        let mut m = FilterState {
            x: vec![50.0],
            p: Mat::scalar(4.0),
            x_pred: vec![50.0],
            p_pred: Mat::scalar(5.0),
        };
        let minfo = mcc_update_mimo(&mut m, &[60.0], &Mat::scalar(1.0), &sys, &cfg).unwrap();
        assert!((minfo.gain[0] - info.gain[0]).abs() < 1e-15);
        assert!((m.x[0] - s.x).abs() < 1e-12);
        assert!((m.p[(0, 0)] - s.p).abs() < 1e-12);
    }

    #[test]
    fn mcc_kernel_underflow_is_clamped() {
        let cfg = MccConfig::new(0.01).unwrap();
        let mut s = ScalarState::new(0.0, 1.0);
        let info = mcc_update_siso(&mut s, 100.0, 1.0, &cfg).unwrap();
        assert!(info.kernel_underflow);
        assert_eq!(info.mcc_ratio, Some(MCC_L_MIN));
        assert!(s.x.is_finite() && s.p.is_finite());
    }

    #[test]
    fn mcc_ratio_equals_numerator_kernel_with_identity_a() {
        let sys = SystemMatrices::identity(2);
        let mut s = FilterState::new(vec![10.0, 20.0], Mat::identity(2)).unwrap();
        predict(&mut s, &Mat::scaled_identity(2, 2.0), &sys).unwrap();
        let y = [13.0, 16.0];
        let info =
            mcc_update_mimo(&mut s, &y, &Mat::identity(2), &sys, &MccConfig::new(4.0).unwrap())
                .unwrap();
        let expected = gaussian_kernel(25.0f64.sqrt(), 4.0);
        assert!((info.mcc_ratio.unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn theta_audit_matches_hand_value() {
        let r = theta_audit_ratio(
            &[2.0],
            &[1.0],
            &Mat::scalar(4.0),
            &Mat::scalar(1.0),
            &[0.5],
        )
        .unwrap();
        // (4/4 + 1/1) / 0.25
        assert!((r - 8.0).abs() < 1e-12);
    }

    #[test]
    fn filter_kind_parses() {
        assert_eq!("HINF".parse::<FilterKind>().unwrap(), FilterKind::Hinf);
        assert!("ukf".parse::<FilterKind>().is_err());
    }

    proptest! {
        #[test]
        fn hinf_gain_dominates_kalman(p in 0.01f64..100.0, v in 0.01f64..100.0, frac in 1e-6f64..0.999) {
            // Feasible iff θ < 1/P + 1/V.
            let theta = frac * (1.0 / p + 1.0 / v);
            let mut h = ScalarState::new(0.0, p);
            let mut k = h;
            let hg = hinf_update_siso(&mut h, 1.0, v, &HinfConfig::new(theta).unwrap()).unwrap().gain[0];
            let kg = kalman_update_siso(&mut k, 1.0, v).unwrap().gain[0];
            prop_assert!(hg > kg);
        }

        #[test]
        fn covariance_stays_symmetric_psd(
            steps in prop::collection::vec((prop::array::uniform2(0.0f64..100.0), 0.0f64..5.0), 1..40),
            kind in 0usize..3,
        ) {
            let sys = SystemMatrices::identity(2);
            let mut s = FilterState::new(vec![50.0, 20.0], Mat::scaled_identity(2, 10.0)).unwrap();
            let v = Mat::identity(2);
            let est = [
                Estimator::Kalman,
                Estimator::Hinf(HinfConfig::new(0.1).unwrap()),
                Estimator::Mcc(MccConfig::new(100.0).unwrap()),
            ][kind].clone();
            for (y, wv) in steps {
                let w = Mat::from_rows(&[&[wv + 0.1, 0.05], &[0.05, wv + 0.1]]).unwrap();
                predict(&mut s, &w, &sys).unwrap();
                est.update_mimo(&mut s, &y, &v, &sys).unwrap();
                prop_assert_eq!(s.p.clone(), s.p.transpose());
                prop_assert!(s.p.is_positive_definite().unwrap());
            }
        }
    }
}
