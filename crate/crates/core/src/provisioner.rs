//! Per-interval provisioning loop.
//!
//! Each control interval the loop ingests the smoothed utilization, refreshes
//! the process-noise estimate from the difference window, runs the filter's
//! update phase followed by its prediction phase, and turns the one-step
//! prediction into the next CPU allocation:
//!
//! ```text
//! a_{k+1} = max{ a_min, min{ (1 + h)·x̂_{k+1|k}, a_max } }
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    predict, predict_siso, theta_audit_ratio, Estimator, FilterKind, FilterState, HinfConfig,
    MccConfig, ScalarState, SystemMatrices, UpdateInfo, DEFAULT_SIGMA, DEFAULT_THETA_MIMO,
    DEFAULT_THETA_SISO,
};
use crate::matrix::{Mat, MAX_DIM};
use crate::noise::DiffWindow;

pub const DEFAULT_RATIO: f64 = 0.8;
pub const DEFAULT_A_MIN: f64 = 10.0;
pub const DEFAULT_A_MAX: f64 = 100.0;
pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_W0: f64 = 4.0;
pub const DEFAULT_V: f64 = 1.0;
pub const DEFAULT_P0: f64 = 10.0;
pub const DEFAULT_INTERVAL_S: f64 = 5.0;
pub const DEFAULT_SUBINTERVAL_S: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationPolicy {
    /// Headroom `h`; the target usage/allocation ratio is `1/(1+h)`.
    pub headroom: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for AllocationPolicy {
    fn default() -> Self {
        AllocationPolicy::from_ratio(DEFAULT_RATIO, DEFAULT_A_MIN, DEFAULT_A_MAX)
            .expect("default policy is valid")
    }
}

impl AllocationPolicy {
    pub fn new(headroom: f64, a_min: f64, a_max: f64) -> Result<Self> {
        let p = AllocationPolicy {
            headroom,
            a_min,
            a_max,
        };
        p.validate()?;
        Ok(p)
    }

    /// Policy from the utilization-to-allocation ratio `c = 1/(1+h)`.
    pub fn from_ratio(c: f64, a_min: f64, a_max: f64) -> Result<Self> {
        if !(c > 0.5 && c < 1.0) {
            return Err(Error::usage(format!("ratio c must lie in (0.5, 1), got {c}")));
        }
        Self::new(1.0 / c - 1.0, a_min, a_max)
    }

    pub fn ratio(&self) -> f64 {
        1.0 / (1.0 + self.headroom)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.headroom > 0.0 && self.headroom < 1.0) {
            return Err(Error::usage(format!(
                "headroom must lie in (0, 1), got {}",
                self.headroom
            )));
        }
        if !(0.0 <= self.a_min && self.a_min < self.a_max && self.a_max <= 100.0) {
            return Err(Error::usage(format!(
                "allocation bounds must satisfy 0 <= a_min < a_max <= 100, got [{}, {}]",
                self.a_min, self.a_max
            )));
        }
        Ok(())
    }

    /// Allocation for one component. Negative predictions count as zero.
    pub fn allocate_one(&self, x_pred: f64) -> Clamped {
        let raw = (1.0 + self.headroom) * x_pred.max(0.0);
        if raw < self.a_min {
            Clamped {
                value: self.a_min,
                low: true,
                high: false,
            }
        } else if raw > self.a_max {
            Clamped {
                value: self.a_max,
                low: false,
                high: true,
            }
        } else {
            Clamped {
                value: raw,
                low: false,
                high: false,
            }
        }
    }

    pub fn allocate(&self, x_pred: &[f64]) -> Vec<f64> {
        x_pred.iter().map(|&x| self.allocate_one(x).value).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub low: bool,
    pub high: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// One scalar filter per component, no cross-covariances.
    Siso,
    /// One joint filter over all components.
    Mimo,
}

impl Topology {
    pub const ALL: [Topology; 2] = [Topology::Siso, Topology::Mimo];

    pub fn name(self) -> &'static str {
        match self {
            Topology::Siso => "siso",
            Topology::Mimo => "mimo",
        }
    }
}

impl std::str::FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "siso" => Ok(Topology::Siso),
            "mimo" => Ok(Topology::Mimo),
            other => Err(Error::usage(format!(
                "unknown topology '{other}' (expected siso or mimo)"
            ))),
        }
    }
}

/// How `x̂₀` is chosen before the first observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialEstimate {
    FirstObservation,
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSpec {
    pub estimator: Estimator,
    pub topology: Topology,
    /// Difference window length `T`.
    pub window: usize,
    /// Process variance used until the window fills.
    pub w0: f64,
    /// Pinned measurement variance.
    pub v: f64,
    pub p0: f64,
    pub policy: AllocationPolicy,
    pub interval_s: f64,
    pub subinterval_s: f64,
    pub initial_estimate: InitialEstimate,
    /// Allocation in force before the first decision; `a_max` when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_allocation: Option<f64>,
}

impl ControllerSpec {
    /// Defaults for the given filter and topology: T = 5, W₀ = 4, V = 1,
    /// P₀ = 10, c = 0.8, Δ = 5 s; θ = 0.7 (SISO) or 0.1 (MIMO); σ = 100.
    pub fn new(kind: FilterKind, topology: Topology) -> Self {
        ControllerSpec {
            estimator: default_estimator(kind, topology),
            topology,
            window: DEFAULT_WINDOW,
            w0: DEFAULT_W0,
            v: DEFAULT_V,
            p0: DEFAULT_P0,
            policy: AllocationPolicy::default(),
            interval_s: DEFAULT_INTERVAL_S,
            subinterval_s: DEFAULT_SUBINTERVAL_S,
            initial_estimate: InitialEstimate::FirstObservation,
            initial_allocation: None,
        }
    }

    pub fn kind(&self) -> FilterKind {
        self.estimator.kind()
    }

    /// Number of 1 s (or whatever the sub-interval is) samples per interval.
    pub fn subsamples(&self) -> usize {
        (self.interval_s / self.subinterval_s).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        match &self.estimator {
            Estimator::Kalman => {}
            Estimator::Hinf(cfg) => cfg.validate()?,
            Estimator::Mcc(cfg) => {
                MccConfig::new(cfg.sigma)?;
            }
        }
        self.policy.validate()?;
        if self.window == 0 {
            return Err(Error::usage("window T must be at least 1"));
        }
        if !(self.w0 >= 0.0 && self.w0.is_finite()) {
            return Err(Error::usage("W0 must be a non-negative number"));
        }
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(Error::usage("V must be positive"));
        }
        if !(self.p0 > 0.0 && self.p0.is_finite()) {
            return Err(Error::usage("P0 must be positive"));
        }
        if !(self.subinterval_s > 0.0 && self.interval_s > 0.0) {
            return Err(Error::usage("control interval and sub-interval must be positive"));
        }
        let ratio = self.interval_s / self.subinterval_s;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::usage(format!(
                "control interval {} s is not a positive multiple of the {} s sub-interval",
                self.interval_s, self.subinterval_s
            )));
        }
        if let Some(a) = self.initial_allocation {
            if !(self.policy.a_min..=self.policy.a_max).contains(&a) {
                return Err(Error::usage("initial allocation outside [a_min, a_max]"));
            }
        }
        if let InitialEstimate::Constant(x) = self.initial_estimate {
            if !x.is_finite() {
                return Err(Error::usage("initial estimate must be finite"));
            }
        }
        Ok(())
    }
}

pub fn default_estimator(kind: FilterKind, topology: Topology) -> Estimator {
    match kind {
        FilterKind::Kalman => Estimator::Kalman,
        FilterKind::Hinf => Estimator::Hinf(HinfConfig {
            theta: match topology {
                Topology::Siso => DEFAULT_THETA_SISO,
                Topology::Mimo => DEFAULT_THETA_MIMO,
            },
            allowable_error: None,
        }),
        FilterKind::Mcc => Estimator::Mcc(MccConfig {
            sigma: DEFAULT_SIGMA,
        }),
    }
}

/// Arithmetic mean of the sub-interval samples, per component.
pub fn smooth(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::input("no samples to smooth"))?;
    let n = first.len();
    if samples.iter().any(|s| s.len() != n) {
        return Err(Error::input("sub-interval samples disagree on component count"));
    }
    let m = samples.len() as f64;
    Ok((0..n)
        .map(|i| samples.iter().map(|s| s[i]).sum::<f64>() / m)
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopTelemetry {
    pub steps: u64,
    pub warmup_steps: u64,
    /// Component-updates rejected because the H∞ condition failed.
    pub feasibility_rejections: u64,
    /// Component-updates that failed for other numerical reasons.
    pub numerical_failures: u64,
    pub kernel_underflows: u64,
    /// Smallest θ-audit ratio seen (H∞ with an allowable-error matrix only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_audit_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationDecision {
    /// Allocation for the next interval, per component.
    pub allocation: Vec<f64>,
    /// `x̂_{k+1|k}` used for the allocation.
    pub prediction: Vec<f64>,
    /// Posterior `x̂_{k|k}`.
    pub estimate: Vec<f64>,
    pub clamped_low: Vec<bool>,
    pub clamped_high: Vec<bool>,
    /// Components whose update was rejected; their allocation was held.
    pub rejected: Vec<bool>,
    /// Reason for the first rejection, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
    /// Process covariance used this step (row-major n×n).
    pub process_noise: Vec<f64>,
    /// False while the window is warming up and W₀ was used.
    pub noise_from_window: bool,
    pub gain: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mcc_ratio: Option<Vec<f64>>,
    pub kernel_underflow: bool,
}

impl AllocationDecision {
    pub fn flagged(&self) -> bool {
        self.rejected.iter().any(|&r| r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum FilterBank {
    Siso(Vec<ScalarState>),
    Mimo(FilterState),
}

/// Provisioning loop for one application with `n` components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisioningLoop {
    spec: ControllerSpec,
    components: usize,
    sys: SystemMatrices,
    window: DiffWindow,
    bank: Option<FilterBank>,
    allocation: Vec<f64>,
    telemetry: LoopTelemetry,
}

impl ProvisioningLoop {
    pub fn new(spec: ControllerSpec, components: usize) -> Result<Self> {
        spec.validate()?;
        if components == 0 || components > MAX_DIM {
            return Err(Error::usage(format!(
                "component count must be within 1..={MAX_DIM}, got {components}"
            )));
        }
        if let Estimator::Hinf(HinfConfig {
            allowable_error: Some(d),
            ..
        }) = &spec.estimator
        {
            if d.len() != components {
                return Err(Error::usage(format!(
                    "allowable error has {} entries for {components} components",
                    d.len()
                )));
            }
        }
        let window = DiffWindow::new(components, spec.window)?;
        let mut lp = ProvisioningLoop {
            sys: SystemMatrices::identity(components),
            window,
            bank: None,
            allocation: Vec::new(),
            telemetry: LoopTelemetry::default(),
            components,
            spec,
        };
        lp.reset();
        Ok(lp)
    }

    pub fn spec(&self) -> &ControllerSpec {
        &self.spec
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn telemetry(&self) -> &LoopTelemetry {
        &self.telemetry
    }

    /// Allocation currently in force.
    pub fn allocation(&self) -> &[f64] {
        &self.allocation
    }

    /// Restores estimate, covariance, window, telemetry and allocation to
    /// their initial values. The spec is untouched.
    pub fn reset(&mut self) {
        self.window.clear();
        self.telemetry = LoopTelemetry::default();
        let a0 = self.spec.initial_allocation.unwrap_or(self.spec.policy.a_max);
        self.allocation = vec![a0; self.components];
        self.bank = match self.spec.initial_estimate {
            InitialEstimate::FirstObservation => None,
            InitialEstimate::Constant(x0) => Some(self.seed_bank(&vec![x0; self.components])),
        };
    }

    fn seed_bank(&self, x0: &[f64]) -> FilterBank {
        match self.spec.topology {
            Topology::Siso => FilterBank::Siso(
                x0.iter()
                    .map(|&x| ScalarState::new(x, self.spec.p0))
                    .collect(),
            ),
            Topology::Mimo => FilterBank::Mimo(
                FilterState::new(
                    x0.to_vec(),
                    Mat::scaled_identity(self.components, self.spec.p0),
                )
                .expect("dimensions match by construction"),
            ),
        }
    }

    fn process_noise(&self) -> (Mat, bool) {
        let n = self.components;
        if !self.window.is_full() {
            return (Mat::scaled_identity(n, self.spec.w0), false);
        }
        let w = match self.spec.topology {
            Topology::Mimo => self.window.mimo_covariance(),
            Topology::Siso => (0..n)
                .map(|i| self.window.siso_variance(i))
                .collect::<Result<Vec<_>>>()
                .map(|d| Mat::diag(&d)),
        };
        (w.expect("window is full"), true)
    }

    /// One control interval: `y` is the smoothed utilization observed during
    /// the interval that just ended.
    pub fn control_step(&mut self, y: &[f64]) -> Result<AllocationDecision> {
        if y.len() != self.components {
            return Err(Error::input(format!(
                "observation has {} components, loop controls {}",
                y.len(),
                self.components
            )));
        }
        if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite observation {bad}")));
        }
        let seeded_now = self.bank.is_none();
        if seeded_now {
            self.bank = Some(self.seed_bank(y));
        }
        self.window.push(y)?;
        let (w, from_window) = self.process_noise();
        self.telemetry.steps += 1;
        if !from_window {
            self.telemetry.warmup_steps += 1;
        }

        let n = self.components;
        let v = self.spec.v;
        let estimator = self.spec.estimator.clone();
        let mut rejected = vec![false; n];
        let mut rejection = None;
        let mut gain = vec![0.0; n];
        let mut mcc = estimator_is_mcc(&estimator).then(|| vec![0.0; n]);
        let mut underflow = false;
        let mut audit = None;

        let bank = self.bank.as_mut().expect("seeded above");
        match bank {
            FilterBank::Siso(states) => {
                for (i, st) in states.iter_mut().enumerate() {
                    let mut next = *st;
                    match estimator.update_siso(&mut next, y[i], v) {
                        Ok(info) => {
                            record(&info, i, &mut gain, &mut mcc, &mut underflow);
                            if let Some(r) = scalar_audit(&estimator, st, &next, y[i], w[(i, i)], v, i)
                            {
                                audit = Some(audit.map_or(r, |a: f64| a.min(r)));
                            }
                            predict_siso(&mut next, w[(i, i)]);
                            *st = next;
                        }
                        Err(e) => {
                            rejected[i] = true;
                            rejection.get_or_insert_with(|| format!("component {i}: {e}"));
                            self.telemetry.count_failure(&e);
                        }
                    }
                }
            }
            FilterBank::Mimo(st) => {
                let vm = Mat::scaled_identity(n, v);
                let mut next = st.clone();
                match estimator.update_mimo(&mut next, y, &vm, &self.sys) {
                    Ok(info) => {
                        gain[..n].copy_from_slice(&info.gain[..n]);
                        if let (Some(m), Some(l)) = (mcc.as_mut(), info.mcc_ratio) {
                            m.iter_mut().for_each(|x| *x = l);
                        }
                        underflow = info.kernel_underflow;
                        audit = matrix_audit(&estimator, st, &next, y, &w, &vm, &self.sys);
                        predict(&mut next, &w, &self.sys)?;
                        *st = next;
                    }
                    Err(e) => {
                        rejected.iter_mut().for_each(|r| *r = true);
                        rejection = Some(e.to_string());
                        self.telemetry.count_failure(&e);
                    }
                }
            }
        }
        if underflow {
            self.telemetry.kernel_underflows += 1;
        }
        // The seeding step has zero residuals by construction.
        if let (Some(r), false) = (audit, seeded_now) {
            let m = self.telemetry.theta_audit_min.map_or(r, |m| m.min(r));
            self.telemetry.theta_audit_min = Some(m);
        }

        let (estimate, prediction) = match self.bank.as_ref().expect("seeded") {
            FilterBank::Siso(states) => (
                states.iter().map(|s| s.x).collect::<Vec<_>>(),
                states.iter().map(|s| s.x_pred).collect::<Vec<_>>(),
            ),
            FilterBank::Mimo(st) => (st.x.clone(), st.x_pred.clone()),
        };
        let mut clamped_low = vec![false; n];
        let mut clamped_high = vec![false; n];
        for i in 0..n {
            if rejected[i] {
                continue;
            }
            let c = self.spec.policy.allocate_one(prediction[i]);
            self.allocation[i] = c.value;
            clamped_low[i] = c.low;
            clamped_high[i] = c.high;
        }
        Ok(AllocationDecision {
            allocation: self.allocation.clone(),
            prediction,
            estimate,
            clamped_low,
            clamped_high,
            rejected,
            rejection,
            process_noise: w.as_slice().to_vec(),
            noise_from_window: from_window,
            gain,
            mcc_ratio: mcc,
            kernel_underflow: underflow,
        })
    }
}

impl LoopTelemetry {
    fn count_failure(&mut self, e: &Error) {
        match e {
            Error::Infeasible { .. } => self.feasibility_rejections += 1,
            _ => self.numerical_failures += 1,
        }
    }
}

fn estimator_is_mcc(e: &Estimator) -> bool {
    matches!(e, Estimator::Mcc(_))
}

fn record(
    info: &UpdateInfo,
    i: usize,
    gain: &mut [f64],
    mcc: &mut Option<Vec<f64>>,
    underflow: &mut bool,
) {
    gain[i] = info.gain[0];
    if let (Some(m), Some(l)) = (mcc.as_mut(), info.mcc_ratio) {
        m[i] = l;
    }
    *underflow |= info.kernel_underflow;
}

fn allowable_error(e: &Estimator) -> Option<&[f64]> {
    match e {
        Estimator::Hinf(HinfConfig {
            allowable_error: Some(d),
            ..
        }) => Some(d),
        _ => None,
    }
}

fn scalar_audit(
    e: &Estimator,
    before: &ScalarState,
    after: &ScalarState,
    y: f64,
    w: f64,
    v: f64,
    i: usize,
) -> Option<f64> {
    let d = allowable_error(e)?;
    theta_audit_ratio(
        &[after.x - before.x],
        &[y - after.x],
        &Mat::scalar(w),
        &Mat::scalar(v),
        &d[i..=i],
    )
    .ok()
}

fn matrix_audit(
    e: &Estimator,
    before: &FilterState,
    after: &FilterState,
    y: &[f64],
    w: &Mat,
    v: &Mat,
    sys: &SystemMatrices,
) -> Option<f64> {
    let d = allowable_error(e)?;
    let ax = sys.a.mul_vec(&before.x).ok()?;
    let cx = sys.c.mul_vec(&after.x).ok()?;
    let wr: Vec<f64> = after.x.iter().zip(&ax).map(|(a, b)| a - b).collect();
    let vr: Vec<f64> = y.iter().zip(&cx).map(|(a, b)| a - b).collect();
    theta_audit_ratio(&wr, &vr, w, v, d).ok()
}
