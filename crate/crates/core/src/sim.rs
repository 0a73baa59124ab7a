//! Discrete-time simulator of a two-tier (web + database) application.
//!
//! A phased client population produces latent CPU demand per component. The
//! allocation in force caps usage; demand above the cap accumulates as
//! backlog. Response time has three regimes: flat near `R_base` while idle,
//! a congestion term that steepens as the bottleneck utilization ratio
//! approaches one, and linear growth with backlog once demand outruns the
//! allocation.
//!
//! Default constants are a calibration, not ground truth: the response-time
//! knee lands near 1350 clients at full allocation and a 50-interval WL1 run
//! completes a few tens of thousands of requests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provisioner::{AllocationDecision, ControllerSpec, LoopTelemetry, ProvisioningLoop};

/// Reference mean think time the demand gains are calibrated against.
pub const REFERENCE_THINK_S: f64 = 7.0;

/// Per-client demand gains (pp per client) so 1000 clients at 7 s think time
/// draw ≈ 63 pp on the web tier and ≈ 17 pp on the database tier.
pub const DEFAULT_GAINS: [f64; 2] = [0.063, 0.0173];

const STREAM_DEMAND: u64 = 1;
const STREAM_MEASUREMENT: u64 = 2;

/// Deterministic RNG for `(seed, stream, index)`. Streams are independent of
/// each other, so adding a consumer never shifts another consumer's draws.
pub fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    let mixed = splitmix(splitmix(seed ^ splitmix(stream)) ^ index);
    let mut rng = ChaCha8Rng::seed_from_u64(mixed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum NoiseLaw {
    None,
    Gaussian { std: f64 },
    /// Uniform on `[−half_width, half_width]`.
    Uniform { half_width: f64 },
}

impl NoiseLaw {
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            NoiseLaw::None => 0.0,
            NoiseLaw::Gaussian { std: 0.0 } => 0.0,
            NoiseLaw::Gaussian { std } => Normal::new(0.0, std)
                .expect("std validated non-negative")
                .sample(rng),
            NoiseLaw::Uniform { half_width: 0.0 } => 0.0,
            NoiseLaw::Uniform { half_width } => rng.random_range(-half_width..=half_width),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            NoiseLaw::None => 0.0,
            NoiseLaw::Gaussian { std } => std,
            NoiseLaw::Uniform { half_width } => half_width,
        };
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::usage(format!("noise parameter must be non-negative, got {v}")));
        }
        Ok(())
    }
}

impl std::fmt::Display for NoiseLaw {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NoiseLaw::None => write!(f, "none"),
            NoiseLaw::Gaussian { std } => write!(f, "gaussian:{std}"),
            NoiseLaw::Uniform { half_width } => write!(f, "uniform:{half_width}"),
        }
    }
}

impl std::str::FromStr for NoiseLaw {
    type Err = Error;

    /// `none`, `gaussian:<std>` or `uniform:<half-width>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = s.split_once(':').unwrap_or((s, ""));
        let param = || {
            arg.trim()
                .parse::<f64>()
                .map_err(|_| Error::usage(format!("bad noise parameter in '{s}'")))
        };
        let law = match name.trim().to_ascii_lowercase().as_str() {
            "none" | "off" => NoiseLaw::None,
            "gaussian" | "normal" => NoiseLaw::Gaussian { std: param()? },
            "uniform" => NoiseLaw::Uniform {
                half_width: param()?,
            },
            _ => {
                return Err(Error::usage(format!(
                    "unknown noise law '{s}' (expected none, gaussian:<std>, uniform:<b>)"
                )))
            }
        };
        law.validate()?;
        Ok(law)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub start: u64,
    pub clients: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub phases: Vec<Phase>,
    /// Mean think time in seconds.
    pub think_s: f64,
    /// `(start sample, multiplier)` applied to the think time from that
    /// sample on. Empty means a constant think time.
    #[serde(default)]
    pub think_multipliers: Vec<(u64, f64)>,
    /// Demand gain per component, pp per client.
    pub gains: Vec<f64>,
    /// Relative demand noise `η` in `d·(1 + η)`.
    pub demand_noise: NoiseLaw,
    pub seed: u64,
}

impl WorkloadSpec {
    /// 700 clients, with +500-client pulses of 15 samples at samples 10 and 30.
    pub fn wl1(seed: u64) -> Self {
        WorkloadSpec {
            phases: vec![
                Phase { start: 0, clients: 700 },
                Phase { start: 10, clients: 1200 },
                Phase { start: 25, clients: 700 },
                Phase { start: 30, clients: 1200 },
                Phase { start: 45, clients: 700 },
            ],
            think_s: REFERENCE_THINK_S,
            think_multipliers: Vec::new(),
            gains: DEFAULT_GAINS.to_vec(),
            demand_noise: NoiseLaw::Gaussian { std: 0.03 },
            seed,
        }
    }

    /// WL1's client schedule with a varying think-time table.
    pub fn wl2(seed: u64) -> Self {
        WorkloadSpec {
            think_multipliers: vec![
                (0, 1.0),
                (6, 0.85),
                (14, 1.1),
                (22, 0.9),
                (28, 0.8),
                (38, 1.05),
                (46, 0.9),
            ],
            ..Self::wl1(seed)
        }
    }

    /// Constant population.
    pub fn steady(clients: u64, seed: u64) -> Self {
        WorkloadSpec {
            phases: vec![Phase { start: 0, clients }],
            ..Self::wl1(seed)
        }
    }

    pub fn components(&self) -> usize {
        self.gains.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::usage("workload needs at least one phase"));
        }
        if self.phases.windows(2).any(|w| w[0].start >= w[1].start) {
            return Err(Error::usage("workload phases must be strictly sorted by start sample"));
        }
        if self.gains.is_empty() || self.gains.iter().any(|g| !(*g > 0.0 && g.is_finite())) {
            return Err(Error::usage("demand gains must be positive"));
        }
        if !(self.think_s > 0.0 && self.think_s.is_finite()) {
            return Err(Error::usage("think time must be positive"));
        }
        if self.think_multipliers.windows(2).any(|w| w[0].0 >= w[1].0)
            || self.think_multipliers.iter().any(|(_, m)| !(*m > 0.0 && m.is_finite()))
        {
            return Err(Error::usage(
                "think multipliers must be positive and sorted by start sample",
            ));
        }
        self.demand_noise.validate()
    }

    pub fn clients_at(&self, k: u64) -> u64 {
        self.phases
            .iter()
            .take_while(|p| p.start <= k)
            .last()
            .map_or(0, |p| p.clients)
    }

    pub fn think_at(&self, k: u64) -> f64 {
        let m = self
            .think_multipliers
            .iter()
            .take_while(|(s, _)| *s <= k)
            .last()
            .map_or(1.0, |(_, m)| *m);
        self.think_s * m
    }

    /// Latent demand per component at sample `k`, in pp, clamped to [0, 100].
    pub fn demand(&self, k: u64) -> Vec<f64> {
        let base = self.clients_at(k) as f64 * REFERENCE_THINK_S / self.think_at(k);
        let mut rng = stream_rng(self.seed, STREAM_DEMAND, k);
        self.gains
            .iter()
            .map(|g| {
                let eta = self.demand_noise.sample(&mut rng);
                (g * base * (1.0 + eta)).clamp(0.0, 100.0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServerModel {
    /// Response time of an idle system, s.
    pub r_base: f64,
    /// Congestion weight, s.
    pub alpha: f64,
    /// Congestion exponent.
    pub gamma: f64,
    /// Seconds of response time per pp·s of backlog.
    pub beta: f64,
    /// Guard keeping the congestion denominator and allocation away from 0.
    pub epsilon: f64,
    /// Completed requests per pp·s of served CPU.
    pub kappa: f64,
    /// SLO threshold on mRT, s.
    pub slo_s: f64,
    /// Noise on each 1 s usage measurement, pp.
    pub measurement_noise: NoiseLaw,
}

impl Default for ServerModel {
    fn default() -> Self {
        ServerModel {
            r_base: 0.05,
            alpha: 0.1,
            gamma: 4.0,
            beta: 0.01,
            epsilon: 0.05,
            kappa: 3.0,
            slo_s: 0.5,
            measurement_noise: NoiseLaw::Gaussian { std: 1.0 },
        }
    }
}

impl ServerModel {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_base", self.r_base),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("kappa", self.kappa),
            ("slo", self.slo_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::usage(format!("model.{name} must be positive, got {v}")));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 0.1) {
            return Err(Error::usage(format!(
                "model.epsilon must lie in (0, 0.1], got {}",
                self.epsilon
            )));
        }
        self.measurement_noise.validate()
    }

    /// Mean response time for a bottleneck utilization ratio `rho` and total
    /// backlog (pp·s).
    pub fn response_time(&self, rho: f64, backlog: f64) -> f64 {
        let rho = rho.max(0.0);
        let congestion = self.alpha * rho.powf(self.gamma) / (1.0 - rho.min(1.0 - self.epsilon));
        self.r_base + congestion + self.beta * backlog.max(0.0)
    }
}

/// What one control interval of service produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ServeOutcome {
    pub usage: Vec<f64>,
    pub observation: Vec<f64>,
    pub backlog: Vec<f64>,
    pub mrt: f64,
    pub completed: Vec<u64>,
}

/// Serves demand `d` under allocation `a` for one interval of `interval_s`
/// seconds. Each of the `subsamples` usage measurements gets independent
/// noise; the observation is their mean.
pub fn serve(
    d: &[f64],
    a: &[f64],
    model: &ServerModel,
    b_prev: &[f64],
    interval_s: f64,
    subsamples: usize,
    meas_rng: &mut impl Rng,
) -> ServeOutcome {
    let n = d.len();
    let mut usage = Vec::with_capacity(n);
    let mut backlog = Vec::with_capacity(n);
    let mut completed = Vec::with_capacity(n);
    let mut rho = 0.0f64;
    for i in 0..n {
        let x = d[i].min(a[i]).max(0.0);
        rho = rho.max(x / a[i].max(model.epsilon));
        backlog.push((b_prev[i] + (d[i] - a[i]) * interval_s).max(0.0));
        completed.push((model.kappa * x * interval_s).round() as u64);
        usage.push(x);
    }
    let observation = usage
        .iter()
        .map(|&x| {
            let m = subsamples.max(1);
            let total: f64 = (0..m)
                .map(|_| (x + model.measurement_noise.sample(meas_rng)).clamp(0.0, 100.0))
                .sum();
            total / m as f64
        })
        .collect();
    let mrt = model.response_time(rho, backlog.iter().sum());
    ServeOutcome {
        usage,
        observation,
        backlog,
        mrt,
        completed,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: u64,
    pub demand: Vec<f64>,
    pub usage: Vec<f64>,
    pub observation: Vec<f64>,
    /// Allocation in force during this interval.
    pub allocation: Vec<f64>,
    pub backlog: Vec<f64>,
    pub mrt: f64,
    /// Completed requests per component.
    pub completed: Vec<u64>,
    /// The controller rejected its update this interval.
    pub flagged: bool,
}

impl StepRecord {
    pub fn completed_total(&self) -> u64 {
        self.completed.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub completed_requests: u64,
    pub avg_vm1_cpu: f64,
    pub avg_vm2_cpu: f64,
    /// Completed-request-weighted mean of per-interval mRT, s.
    pub avg_mrt: f64,
    /// Fraction of completed requests served in intervals meeting the SLO.
    pub slo_obedience: f64,
}

impl RunMetrics {
    pub fn from_records(records: &[StepRecord], slo_s: f64) -> Self {
        let steps = records.len().max(1) as f64;
        let avg = |i: usize| {
            records
                .iter()
                .map(|r| r.usage.get(i).copied().unwrap_or(0.0))
                .sum::<f64>()
                / steps
        };
        let total: u64 = records.iter().map(StepRecord::completed_total).sum();
        let (avg_mrt, slo_obedience) = if total > 0 {
            let t = total as f64;
            let weighted: f64 = records
                .iter()
                .map(|r| r.completed_total() as f64 * r.mrt)
                .sum();
            let ok: u64 = records
                .iter()
                .filter(|r| r.mrt <= slo_s)
                .map(StepRecord::completed_total)
                .sum();
            (weighted / t, ok as f64 / t)
        } else if records.is_empty() {
            (0.0, 1.0)
        } else {
            let met = records.iter().filter(|r| r.mrt <= slo_s).count() as f64;
            (records.iter().map(|r| r.mrt).sum::<f64>() / steps, met / steps)
        };
        RunMetrics {
            completed_requests: total,
            avg_vm1_cpu: avg(0),
            avg_vm2_cpu: avg(1),
            avg_mrt,
            slo_obedience,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRun {
    pub records: Vec<StepRecord>,
    pub metrics: RunMetrics,
    pub telemetry: LoopTelemetry,
    pub flagged_steps: u64,
}

/// Drives one provisioning loop against the simulated application for
/// `steps` control intervals.
pub fn run_scenario(
    workload: &WorkloadSpec,
    model: &ServerModel,
    controller: &ControllerSpec,
    steps: u64,
) -> Result<ScenarioRun> {
    workload.validate()?;
    model.validate()?;
    if steps < controller.window as u64 {
        return Err(Error::usage(format!(
            "run length {steps} is shorter than the window T = {}",
            controller.window
        )));
    }
    let n = workload.components();
    let mut lp = ProvisioningLoop::new(controller.clone(), n)?;
    let subsamples = controller.subsamples();
    let mut backlog = vec![0.0; n];
    let mut records = Vec::with_capacity(steps as usize);
    let mut flagged_steps = 0;
    for k in 0..steps {
        let allocation = lp.allocation().to_vec();
        let demand = workload.demand(k);
        let mut meas_rng = stream_rng(workload.seed, STREAM_MEASUREMENT, k);
        let out = serve(
            &demand,
            &allocation,
            model,
            &backlog,
            controller.interval_s,
            subsamples,
            &mut meas_rng,
        );
        let flagged = match lp.control_step(&out.observation) {
            Ok(AllocationDecision { rejected, .. }) => rejected.iter().any(|&r| r),
            // The loop holds its allocation; the run continues.
            Err(_) => true,
        };
        flagged_steps += u64::from(flagged);
        backlog.clone_from(&out.backlog);
        records.push(StepRecord {
            k,
            demand,
            usage: out.usage,
            observation: out.observation,
            allocation,
            backlog: out.backlog,
            mrt: out.mrt,
            completed: out.completed,
            flagged,
        });
    }
    let metrics = RunMetrics::from_records(&records, model.slo_s);
    Ok(ScenarioRun {
        records,
        metrics,
        telemetry: lp.telemetry().clone(),
        flagged_steps,
    })
}

/// Steady-state mRT with every component fully allocated (100 pp).
/// Infinite when demand exceeds capacity, since backlog then grows without
/// bound.
pub fn steady_state_mrt(model: &ServerModel, gains: &[f64], think_s: f64, clients: u64) -> f64 {
    let mut rho = 0.0f64;
    for g in gains {
        let d = g * clients as f64 * REFERENCE_THINK_S / think_s;
        if d > 100.0 {
            return f64::INFINITY;
        }
        rho = rho.max(d / 100.0);
    }
    model.response_time(rho, 0.0)
}

/// Smallest client count whose steady-state mRT at full allocation exceeds
/// the SLO threshold.
pub fn calibrate_knee(model: &ServerModel, gains: &[f64], think_s: f64) -> u64 {
    let exceeds = |n: u64| steady_state_mrt(model, gains, think_s, n) > model.slo_s;
    if exceeds(0) {
        return 0;
    }
    let mut hi = 1u64;
    while !exceeds(hi) {
        hi *= 2;
    }
    let mut lo = hi / 2;
    // Invariant: !exceeds(lo) && exceeds(hi).
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if exceeds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::FilterKind;
    use crate::provisioner::Topology;

    fn quiet(mut w: WorkloadSpec) -> WorkloadSpec {
        w.demand_noise = NoiseLaw::None;
        w
    }

    #[test]
    fn demand_examples() {
        let w = quiet(WorkloadSpec::steady(0, 1));
        assert_eq!(w.demand(3), vec![0.0, 0.0]);
        let w = quiet(WorkloadSpec::steady(1000, 1));
        assert!((w.demand(0)[0] - 63.0).abs() < 1e-12);
        let wl1 = WorkloadSpec::wl1(1);
        for k in 10..25 {
            assert_eq!(wl1.clients_at(k), 1200);
        }
        assert_eq!(wl1.clients_at(9), 700);
        assert_eq!(wl1.clients_at(25), 700);
        assert_eq!(wl1.clients_at(30), 1200);
    }

    #[test]
    fn noiseless_demand_is_piecewise_constant() {
        let w = quiet(WorkloadSpec::wl2(5));
        for k in 1..60u64 {
            let changed = w.clients_at(k) != w.clients_at(k - 1)
                || w.think_at(k) != w.think_at(k - 1);
            if !changed {
                assert_eq!(w.demand(k), w.demand(k - 1));
            }
        }
    }

    #[test]
    fn noise_law_parsing() {
        assert_eq!("none".parse::<NoiseLaw>().unwrap(), NoiseLaw::None);
        assert_eq!(
            "gaussian:0.5".parse::<NoiseLaw>().unwrap(),
            NoiseLaw::Gaussian { std: 0.5 }
        );
        assert_eq!(
            "uniform:2".parse::<NoiseLaw>().unwrap(),
            NoiseLaw::Uniform { half_width: 2.0 }
        );
        assert!("gaussian:-1".parse::<NoiseLaw>().is_err());
        assert!("cauchy:1".parse::<NoiseLaw>().is_err());
        let law = NoiseLaw::Uniform { half_width: 0.25 };
        assert_eq!(law.to_string().parse::<NoiseLaw>().unwrap(), law);
    }

    #[test]
    fn uniform_noise_stays_in_support() {
        let law = NoiseLaw::Uniform { half_width: 2.0 };
        let mut rng = stream_rng(9, 3, 0);
        for _ in 0..1000 {
            assert!(law.sample(&mut rng).abs() <= 2.0);
        }
    }

    #[test]
    fn idle_server_has_base_response_time() {
        let m = ServerModel::default();
        let mut rng = stream_rng(0, 0, 0);
        let out = serve(&[0.0, 0.0], &[50.0, 50.0], &m, &[0.0, 0.0], 5.0, 5, &mut rng);
        assert_eq!(out.mrt, m.r_base);
        assert_eq!(out.completed, vec![0, 0]);
    }

    #[test]
    fn moderate_load_has_no_backlog() {
        let m = ServerModel::default();
        let mut rng = stream_rng(0, 0, 0);
        let out = serve(&[40.0, 10.0], &[60.0, 20.0], &m, &[0.0, 0.0], 5.0, 5, &mut rng);
        assert_eq!(out.backlog, vec![0.0, 0.0]);
        assert!(out.mrt.is_finite() && out.mrt > m.r_base);
        assert_eq!(out.completed, vec![600, 150]);
    }

    #[test]
    fn overload_backlog_grows_linearly() {
        let m = ServerModel::default();
        let mut rng = stream_rng(0, 0, 0);
        let mut b = vec![0.0];
        let mut last = 0.0;
        for k in 1..=20 {
            let out = serve(&[80.0], &[60.0], &m, &b, 5.0, 1, &mut rng);
            assert!((out.backlog[0] - 100.0 * k as f64).abs() < 1e-9);
            assert!(out.mrt > last);
            last = out.mrt;
            b = out.backlog;
        }
    }

    #[test]
    fn zero_measurement_noise_observes_usage() {
        let m = ServerModel {
            measurement_noise: NoiseLaw::Gaussian { std: 0.0 },
            ..ServerModel::default()
        };
        let mut rng = stream_rng(0, 0, 0);
        let out = serve(&[40.0, 12.5], &[60.0, 20.0], &m, &[0.0, 0.0], 5.0, 5, &mut rng);
        assert_eq!(out.observation, out.usage);
    }

    #[test]
    fn response_time_is_monotone() {
        let m = ServerModel::default();
        let mut prev = 0.0;
        for i in 0..=120 {
            let r = m.response_time(i as f64 / 100.0, 0.0);
            assert!(r >= prev);
            prev = r;
        }
        assert!(m.response_time(0.5, 10.0) > m.response_time(0.5, 1.0));
    }

    #[test]
    fn knee_examples() {
        let m = ServerModel::default();
        let knee = calibrate_knee(&m, &DEFAULT_GAINS, 7.0);
        assert!((1200..=1500).contains(&knee), "knee {knee}");
        assert!(steady_state_mrt(&m, &DEFAULT_GAINS, 7.0, knee) > m.slo_s);
        assert!(steady_state_mrt(&m, &DEFAULT_GAINS, 7.0, knee - 1) <= m.slo_s);

        let slow = ServerModel { r_base: 0.6, ..m };
        assert_eq!(calibrate_knee(&slow, &DEFAULT_GAINS, 7.0), 0);

        let doubled = calibrate_knee(&m, &[2.0 * DEFAULT_GAINS[0], DEFAULT_GAINS[1]], 7.0);
        let ratio = knee as f64 / doubled as f64;
        assert!((ratio - 2.0).abs() < 0.01, "ratio {ratio}");
    }

    #[test]
    fn abundant_static_allocation_meets_slo() {
        let mut spec = ControllerSpec::new(FilterKind::Kalman, Topology::Siso);
        spec.policy = crate::provisioner::AllocationPolicy::new(0.25, 99.0, 100.0).unwrap();
        let run = run_scenario(&WorkloadSpec::steady(800, 3), &ServerModel::default(), &spec, 50)
            .unwrap();
        assert_eq!(run.metrics.slo_obedience, 1.0);
        for r in &run.records {
            for i in 0..2 {
                assert!(r.usage[i] <= r.allocation[i]);
                assert!(r.usage[i] >= 0.0 && r.allocation[i] <= 100.0);
            }
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let spec = ControllerSpec::new(FilterKind::Mcc, Topology::Mimo);
        let a = run_scenario(&WorkloadSpec::wl1(11), &ServerModel::default(), &spec, 50).unwrap();
        let b = run_scenario(&WorkloadSpec::wl1(11), &ServerModel::default(), &spec, 50).unwrap();
        assert_eq!(a, b);
        let c = run_scenario(&WorkloadSpec::wl1(12), &ServerModel::default(), &spec, 50).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn short_runs_are_rejected() {
        let spec = ControllerSpec::new(FilterKind::Kalman, Topology::Siso);
        assert!(run_scenario(&WorkloadSpec::wl1(1), &ServerModel::default(), &spec, 3).is_err());
    }
}
