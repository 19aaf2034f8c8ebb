//! Grid evaluation. Rows come out in grid order (protocol, α, p, η, backend,
//! metric) whatever order the workers finish in.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::time::Instant;

use qbypass::experiments::{self as ex, GeneralCode, Measured, Strategy};
use qbypass::gate::Gate;
use qbypass::metrics::{fidelity_pure_mixed, Backend};
use qbypass::noise::{apply_dephasing, DephasingChannel};
use qbypass::protocols::{dephasing_qec, synthesis};
use qbypass::qubit::Axis;
use qbypass::Error;

use crate::config::{Experiment, SweepConfig};

pub const STATUS_OK: &str = "ok";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub experiment: String,
    pub protocol: String,
    pub alpha: f64,
    pub eta: f64,
    pub p: f64,
    pub metric: String,
    pub value: Option<f64>,
    pub success_prob: Option<f64>,
    pub status: String,
    pub runtime_ms: Option<f64>,
    pub version: String,
    pub config_hash: String,
}

impl Row {
    pub fn ok(&self) -> bool {
        self.status == STATUS_OK
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub version: String,
    pub config_hash: String,
    pub rows: Vec<Row>,
    pub failures: Vec<Failure>,
    pub runtime_ms: f64,
}

impl SweepResult {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(Row::ok)
    }
}

/// A failed evaluation: the status token for the CSV and the message.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub status: &'static str,
    pub message: String,
}

impl From<Error> for RowError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Truncation(_) => "truncation",
            Error::Unsupported(_) => "unsupported",
            _ => "error",
        };
        RowError { status, message: e.to_string() }
    }
}

/// Metric name in the CSV; Fock rows are suffixed when both backends run.
pub fn metric_label(metric: &str, backend: Backend, both: bool) -> String {
    match (both, backend) {
        (true, Backend::Fock) => format!("{metric}:fock"),
        _ => metric.to_string(),
    }
}

pub type Outcome = (Result<Measured, RowError>, f64);

fn timed(f: impl FnOnce() -> Result<Measured, Error>) -> Outcome {
    let t = Instant::now();
    let r = f().map_err(RowError::from);
    (r, t.elapsed().as_secs_f64() * 1e3)
}

fn plain(value: f64) -> Measured {
    Measured { value, success_prob: 1.0, dim: None }
}

fn dyad_only(backend: Backend) -> Result<(), Error> {
    match backend {
        Backend::Dyad => Ok(()),
        Backend::Fock => Err(Error::Unsupported("this check runs on the dyad engine only".into())),
    }
}

fn dephasing_check(s: Strategy, beta: f64, p: f64, backend: Backend) -> Vec<Outcome> {
    let run = |flip: bool| -> Result<Measured, Error> {
        dyad_only(backend)?;
        let q = dephasing_qec::qubit_ket(C64::from(FRAC_1_SQRT_2), C64::from(FRAC_1_SQRT_2))?;
        let rho = match s {
            Strategy::Bypass => dephasing_qec::dephasing_qec(&q, beta, p, flip)?.state,
            _ if flip => q.to_density().apply_gate(&Gate::QubitRotation { ancilla: 0, axis: Axis::Z, angle: FRAC_PI_2 })?,
            _ => apply_dephasing(&q.to_density(), &DephasingChannel::new(p, 0)?)?,
        };
        Ok(plain(fidelity_pure_mixed(&q, &rho)?))
    };
    vec![timed(|| run(false)), timed(|| run(true))]
}

fn synthesis_check(alpha: f64, n: usize) -> Vec<Outcome> {
    let t = Instant::now();
    let r = synthesis::gate_synthesis_checks_at(alpha);
    let ms = t.elapsed().as_secs_f64() * 1e3;
    match r {
        Ok(r) => [
            r.jc_distance,
            r.sandwich_distance,
            r.sandwich_identity_at_zero,
            r.synthetic_residual_coarse,
            r.synthetic_residual_fine,
            r.synthetic_ratio(),
            r.sine_rabi_distance,
        ]
        .into_iter()
        .map(|v| (Ok(plain(v)), ms))
        .collect(),
        Err(e) => {
            let e = RowError::from(e);
            (0..n).map(|_| (Err(e.clone()), ms)).collect()
        }
    }
}

/// Every metric of `exp` at one grid point, in [`Experiment::metrics`] order.
pub fn evaluate(exp: Experiment, s: Strategy, alpha: f64, eta: f64, p: f64, backend: Backend) -> Vec<Outcome> {
    let one = C64::from(1.0);
    match exp {
        Experiment::Fig2a | Experiment::Fig2b | Experiment::FigA1 | Experiment::FigCCheck | Experiment::FigF1 => {
            vec![timed(|| ex::channel_fidelity_for(s, alpha, eta, p, backend))]
        }
        Experiment::Fig3 => vec![timed(|| ex::cat_origin_for(s, alpha, eta, p, backend))],
        Experiment::Fig4 => vec![timed(|| ex::ecs_log_negativity_for(s, alpha, eta, p, backend))],
        Experiment::Fig5 => vec![timed(|| ex::steering_depth_for(s, alpha, eta, p, backend))],
        Experiment::FigA2 => [one, C64::i(), -one]
            .into_iter()
            .map(|nu| timed(|| ex::state_fidelity_for(s, one, nu, alpha, eta, p, backend)))
            .collect(),
        Experiment::FigB1 => vec![
            timed(|| ex::square_fidelity_for(s, alpha, eta, p, backend)),
            timed(|| ex::square_origin_for(s, alpha, eta, p, backend)),
        ],
        Experiment::AppendixDCheck => dephasing_check(s, alpha, p, backend),
        Experiment::AppendixECheck => synthesis_check(alpha, exp.metrics().len()),
        Experiment::AppendixGCheck => GeneralCode::ALL
            .into_iter()
            .map(|code| timed(|| ex::general_fidelity_for(code, s, alpha, eta, p, backend)))
            .collect(),
    }
}

/// Whether results depend on the dephasing strength: only protocols with
/// ancillas (and the bare qubit of the dephasing check) see it.
fn sees_dephasing(exp: Experiment, s: Strategy) -> bool {
    match exp {
        Experiment::AppendixECheck => false,
        Experiment::AppendixDCheck => true,
        _ => !matches!(s, Strategy::None | Strategy::Gaussian),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Key {
    s: usize,
    a: usize,
    p: usize,
    e: usize,
    b: usize,
}

/// Run the sweep on the current rayon pool.
pub fn run_sweep(config: &SweepConfig) -> SweepResult {
    let t0 = Instant::now();
    let backends = config.backend.backends();
    let both = backends.len() > 1;
    let version = qbypass::VERSION.to_string();
    let hash = config.hash();
    let exp = config.experiment;

    let mut order = Vec::new();
    for (si, &s) in config.protocols.iter().enumerate() {
        for a in 0..config.alpha.len() {
            for p in 0..config.p.len() {
                for e in 0..config.eta.len() {
                    for b in 0..backends.len() {
                        // p-blind points share the evaluation at the first p
                        let eval_p = if sees_dephasing(exp, s) { p } else { 0 };
                        order.push((Key { s: si, a, p, e, b }, Key { s: si, a, p: eval_p, e, b }));
                    }
                }
            }
        }
    }
    let mut unique: Vec<Key> = order.iter().map(|k| k.1).collect();
    let mut seen = std::collections::HashSet::new();
    unique.retain(|k| seen.insert(*k));

    let results: Vec<Vec<Outcome>> = unique
        .par_iter()
        .map(|k| {
            evaluate(exp, config.protocols[k.s], config.alpha[k.a], config.eta[k.e], config.p[k.p], backends[k.b])
        })
        .collect();
    let by_key: HashMap<Key, &Vec<Outcome>> = unique.iter().copied().zip(results.iter()).collect();

    let mut rows = Vec::with_capacity(config.row_count());
    let mut failures = Vec::new();
    for (k, eval_k) in &order {
        let outcomes = by_key[eval_k];
        for (metric, (res, ms)) in exp.metrics().iter().zip(outcomes.iter()) {
            let (value, success_prob, status) = match res {
                Ok(m) => (Some(m.value), Some(m.success_prob), STATUS_OK.to_string()),
                Err(e) => {
                    let (s, a, eta, p) = (config.protocols[k.s], config.alpha[k.a], config.eta[k.e], config.p[k.p]);
                    log::warn!("{exp} {s} alpha={a} eta={eta} p={p} {metric}: {}", e.message);
                    failures.push(Failure { row: rows.len(), message: e.message.clone() });
                    (None, None, e.status.to_string())
                }
            };
            rows.push(Row {
                experiment: exp.id().to_string(),
                protocol: config.protocols[k.s].label().to_string(),
                alpha: config.alpha[k.a],
                eta: config.eta[k.e],
                p: config.p[k.p],
                metric: metric_label(metric, backends[k.b], both),
                value,
                success_prob,
                status,
                runtime_ms: Some(*ms),
                version: version.clone(),
                config_hash: hash.clone(),
            });
        }
    }
    SweepResult {
        config: config.clone(),
        version,
        config_hash: hash,
        rows,
        failures,
        runtime_ms: t0.elapsed().as_secs_f64() * 1e3,
    }
}

/// Run the sweep on a dedicated pool of `threads` workers.
pub fn run_sweep_with_threads(config: &SweepConfig, threads: Option<usize>) -> Result<SweepResult, crate::HarnessError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    let pool = b.build().map_err(|e| crate::HarnessError::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(|| run_sweep(config)))
}
