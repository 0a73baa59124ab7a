//! Flat `key = value` scenario files.
//!
//! ```text
//! # WL1 with the SISO H-infinity controller
//! workload.preset = wl1
//! workload.seed = 7
//! controller.filter = hinf
//! controller.topology = siso
//! controller.c = 0.8
//! run.steps = 50
//! ```
//!
//! Omitted keys take their defaults. `workload.preset` is applied before any
//! other key regardless of where it appears, so individual workload keys can
//! refine a preset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Estimator, FilterKind, HinfConfig, MccConfig};
use crate::provisioner::{
    default_estimator, AllocationPolicy, ControllerSpec, InitialEstimate, Topology,
    DEFAULT_INTERVAL_S, DEFAULT_P0, DEFAULT_SUBINTERVAL_S, DEFAULT_V, DEFAULT_W0,
    DEFAULT_WINDOW,
};
use crate::sim::{NoiseLaw, Phase, ServerModel, WorkloadSpec};

pub const DEFAULT_STEPS: u64 = 50;
pub const DEFAULT_SEED: u64 = 1;

pub const KEYS: &[&str] = &[
    "workload.preset",
    "workload.phases",
    "workload.think",
    "workload.think_multipliers",
    "workload.gains",
    "workload.noise",
    "workload.seed",
    "model.r_base",
    "model.alpha",
    "model.gamma",
    "model.beta",
    "model.epsilon",
    "model.kappa",
    "model.slo",
    "model.measurement_noise",
    "controller.filter",
    "controller.topology",
    "controller.theta",
    "controller.sigma",
    "controller.D",
    "controller.c",
    "controller.h",
    "controller.a_min",
    "controller.a_max",
    "controller.T",
    "controller.W0",
    "controller.V",
    "controller.P0",
    "controller.interval",
    "controller.subinterval",
    "controller.x0",
    "controller.initial_allocation",
    "run.steps",
    "run.output",
];

/// Controller settings before a filter/topology pair is fixed. θ and σ stay
/// optional so comparisons can fall back to each variant's own default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSettings {
    pub filter: FilterKind,
    pub topology: Topology,
    pub theta: Option<f64>,
    pub sigma: Option<f64>,
    pub allowable_error: Option<Vec<f64>>,
    pub policy: AllocationPolicy,
    pub window: usize,
    pub w0: f64,
    pub v: f64,
    pub p0: f64,
    pub interval_s: f64,
    pub subinterval_s: f64,
    pub x0: Option<f64>,
    pub initial_allocation: Option<f64>,
}

impl Default for ControllerSettings {
    fn default() -> Self {
        ControllerSettings {
            filter: FilterKind::Kalman,
            topology: Topology::Siso,
            theta: None,
            sigma: None,
            allowable_error: None,
            policy: AllocationPolicy::default(),
            window: DEFAULT_WINDOW,
            w0: DEFAULT_W0,
            v: DEFAULT_V,
            p0: DEFAULT_P0,
            interval_s: DEFAULT_INTERVAL_S,
            subinterval_s: DEFAULT_SUBINTERVAL_S,
            x0: None,
            initial_allocation: None,
        }
    }
}

impl ControllerSettings {
    pub fn spec(&self) -> Result<ControllerSpec> {
        self.spec_for(self.filter, self.topology)
    }

    pub fn spec_for(&self, kind: FilterKind, topology: Topology) -> Result<ControllerSpec> {
        let estimator = match default_estimator(kind, topology) {
            Estimator::Hinf(cfg) => Estimator::Hinf(HinfConfig {
                theta: self.theta.unwrap_or(cfg.theta),
                allowable_error: self.allowable_error.clone(),
            }),
            Estimator::Mcc(cfg) => Estimator::Mcc(MccConfig {
                sigma: self.sigma.unwrap_or(cfg.sigma),
            }),
            Estimator::Kalman => Estimator::Kalman,
        };
        let spec = ControllerSpec {
            estimator,
            topology,
            window: self.window,
            w0: self.w0,
            v: self.v,
            p0: self.p0,
            policy: self.policy,
            interval_s: self.interval_s,
            subinterval_s: self.subinterval_s,
            initial_estimate: match self.x0 {
                Some(x) => InitialEstimate::Constant(x),
                None => InitialEstimate::FirstObservation,
            },
            initial_allocation: self.initial_allocation,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub workload: WorkloadSpec,
    pub model: ServerModel,
    pub controller: ControllerSettings,
    pub steps: u64,
    pub output: Option<String>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            workload: WorkloadSpec::wl1(DEFAULT_SEED),
            model: ServerModel::default(),
            controller: ControllerSettings::default(),
            steps: DEFAULT_STEPS,
            output: None,
        }
    }
}

/// Splits one line into `(key, value)`, or `None` for blanks and comments.
fn split_line(raw: &str) -> std::result::Result<Option<(&str, &str)>, String> {
    let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
    if line.is_empty() {
        return Ok(None);
    }
    let (k, v) = line
        .split_once('=')
        .ok_or_else(|| format!("expected 'key = value', got '{line}'"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() {
        return Err("missing key before '='".into());
    }
    Ok(Some((k, v)))
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_with(text, &[], None)
    }

    /// Parses a scenario, then applies `key=value` overrides in order and
    /// finally the seed override.
    pub fn parse_with(text: &str, overrides: &[String], seed: Option<u64>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            match split_line(raw) {
                Ok(Some((k, v))) => pairs.push((n + 1, k, v)),
                Ok(None) => {}
                Err(msg) => return Err(Error::parse(n + 1, msg)),
            }
        }
        let mut s = Scenario::default();
        let mut ratio_keys = RatioKeys::default();
        // Presets first so that explicit workload keys refine them.
        for &(line, k, v) in pairs.iter().filter(|p| p.1 == "workload.preset") {
            s.set(k, v, &mut ratio_keys)
                .map_err(|m| Error::parse(line, m))?;
        }
        for &(line, k, v) in pairs.iter().filter(|p| p.1 != "workload.preset") {
            s.set(k, v, &mut ratio_keys)
                .map_err(|m| Error::parse(line, m))?;
        }
        // An override may swap c for h; only conflicts among overrides count.
        let mut ratio_keys = RatioKeys::default();
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::usage(format!("--set expects key=value, got '{o}'")))?;
            s.set(k.trim(), v.trim(), &mut ratio_keys)
                .map_err(|m| Error::usage(format!("--set {o}: {m}")))?;
        }
        if let Some(seed) = seed {
            s.workload.seed = seed;
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.workload.validate()?;
        self.model.validate()?;
        self.controller.spec()?;
        if self.steps < self.controller.window as u64 {
            return Err(Error::usage(format!(
                "run.steps = {} is shorter than the window T = {}",
                self.steps, self.controller.window
            )));
        }
        Ok(())
    }

    /// Applies a single setting. Errors are plain messages; the caller adds
    /// location context.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        self.set(key, value, &mut RatioKeys::default())
            .map_err(Error::usage)
    }

    fn set(
        &mut self,
        key: &str,
        value: &str,
        ratio: &mut RatioKeys,
    ) -> std::result::Result<(), String> {
        let w = &mut self.workload;
        let m = &mut self.model;
        let c = &mut self.controller;
        match key {
            "workload.preset" => {
                let seed = w.seed;
                *w = match value.to_ascii_lowercase().as_str() {
                    "wl1" => WorkloadSpec::wl1(seed),
                    "wl2" => WorkloadSpec::wl2(seed),
                    other => return Err(format!("unknown workload preset '{other}' (wl1, wl2)")),
                };
            }
            "workload.phases" => {
                w.phases = pairs_list(value)?
                    .into_iter()
                    .map(|(start, n)| {
                        Ok(Phase {
                            start,
                            clients: n
                                .parse()
                                .map_err(|_| format!("client count '{n}' is not an integer"))?,
                        })
                    })
                    .collect::<std::result::Result<_, String>>()?;
            }
            "workload.think" => w.think_s = real(value)?,
            "workload.think_multipliers" => {
                w.think_multipliers = pairs_list(value)?
                    .into_iter()
                    .map(|(start, m)| Ok((start, real(m)?)))
                    .collect::<std::result::Result<_, String>>()?;
            }
            "workload.gains" => w.gains = real_list(value)?,
            "workload.noise" => w.demand_noise = noise(value)?,
            "workload.seed" => w.seed = integer(value)?,
            "model.r_base" => m.r_base = real(value)?,
            "model.alpha" => m.alpha = real(value)?,
            "model.gamma" => m.gamma = real(value)?,
            "model.beta" => m.beta = real(value)?,
            "model.epsilon" => m.epsilon = real(value)?,
            "model.kappa" => m.kappa = real(value)?,
            "model.slo" => m.slo_s = real(value)?,
            "model.measurement_noise" => m.measurement_noise = noise(value)?,
            "controller.filter" => c.filter = value.parse().map_err(|e: Error| e.to_string())?,
            "controller.topology" => {
                c.topology = value.parse().map_err(|e: Error| e.to_string())?
            }
            "controller.theta" => c.theta = Some(real(value)?),
            "controller.sigma" => c.sigma = Some(real(value)?),
            "controller.D" => c.allowable_error = Some(real_list(value)?),
            "controller.c" => {
                ratio.note("controller.c", "controller.h")?;
                let r = real(value)?;
                if !(r > 0.5 && r < 1.0) {
                    return Err(format!("c must lie in (0.5, 1), got {r}"));
                }
                c.policy.headroom = 1.0 / r - 1.0;
            }
            "controller.h" => {
                ratio.note("controller.h", "controller.c")?;
                c.policy.headroom = real(value)?;
            }
            "controller.a_min" => c.policy.a_min = real(value)?,
            "controller.a_max" => c.policy.a_max = real(value)?,
            "controller.T" => c.window = integer(value)? as usize,
            "controller.W0" => c.w0 = real(value)?,
            "controller.V" => c.v = real(value)?,
            "controller.P0" => c.p0 = real(value)?,
            "controller.interval" => c.interval_s = real(value)?,
            "controller.subinterval" => c.subinterval_s = real(value)?,
            "controller.x0" => c.x0 = Some(real(value)?),
            "controller.initial_allocation" => c.initial_allocation = Some(real(value)?),
            "run.steps" => self.steps = integer(value)?,
            "run.output" => self.output = Some(value.to_string()),
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }
}

/// Guards against setting both `c` and `h`.
#[derive(Default)]
struct RatioKeys(Option<&'static str>);

impl RatioKeys {
    fn note(&mut self, this: &'static str, other: &'static str) -> std::result::Result<(), String> {
        if self.0 == Some(other) {
            return Err(format!("{this} conflicts with {other}; set only one"));
        }
        self.0 = Some(this);
        Ok(())
    }
}

fn real(v: &str) -> std::result::Result<f64, String> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("'{v}' is not a finite number"))
}

fn integer(v: &str) -> std::result::Result<u64, String> {
    v.parse::<u64>()
        .map_err(|_| format!("'{v}' is not a non-negative integer"))
}

fn real_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|s| real(s.trim())).collect()
}

/// `start:value, start:value, ...`
fn pairs_list(v: &str) -> std::result::Result<Vec<(u64, &str)>, String> {
    v.split(',')
        .map(|item| {
            let (s, rest) = item
                .trim()
                .split_once(':')
                .ok_or_else(|| format!("expected 'start:value', got '{}'", item.trim()))?;
            Ok((integer(s.trim())?, rest.trim()))
        })
        .collect()
}

fn noise(v: &str) -> std::result::Result<NoiseLaw, String> {
    v.parse().map_err(|e: Error| e.to_string())
}
