//! Event-driven master/worker simulation with fail-stop faults and
//! exponential stragglers.
//!
//! Every random choice comes from a stream keyed by the run seed and a
//! purpose (inputs, evaluation points, worker `w`), and arrivals are ordered
//! by `(time, worker)`, so reports do not depend on thread scheduling.

use crate::batchcodes::{build_code, scheme_threshold, SchemeDescriptor, SchemeKind};
use crate::field::{OpCounter, PrimeField, MERSENNE_61};
use crate::scheme::{worker_multiply, BatchCode, BatchInputs, CodeError, WorkerProduct};
use crate::stream::{keys, stream};
use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error("csv output failed: {0}")]
    Csv(String),
}

/// Which side pays for encoding in `worker_muls`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncodeAt {
    #[default]
    Master,
    Workers,
}

impl fmt::Display for EncodeAt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodeAt::Master => "master",
            EncodeAt::Workers => "workers",
        })
    }
}

impl FromStr for EncodeAt {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "master" => Ok(EncodeAt::Master),
            "workers" => Ok(EncodeAt::Workers),
            _ => Err(SimError::ConfigInvalid(format!("encode_at must be master or workers, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultModel {
    /// Probability that a worker never responds.
    pub fail_prob: f64,
    /// Mean of the exponential extra delay; 0 disables straggling.
    pub straggle_mean: f64,
    /// Compute time per scalar multiply-add of the worker product.
    pub base_delay: f64,
}

impl Default for FaultModel {
    fn default() -> Self {
        Self {
            fail_prob: 0.0,
            straggle_mean: 0.0,
            base_delay: 1.0,
        }
    }
}

impl FaultModel {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(0.0..=1.0).contains(&self.fail_prob) {
            return Err(SimError::ConfigInvalid(format!("fail_prob {} is outside [0, 1]", self.fail_prob)));
        }
        if !(self.straggle_mean >= 0.0 && self.straggle_mean.is_finite()) {
            return Err(SimError::ConfigInvalid(format!("straggle_mean {} must be finite and >= 0", self.straggle_mean)));
        }
        if !(self.base_delay >= 0.0 && self.base_delay.is_finite()) {
            return Err(SimError::ConfigInvalid(format!("base_delay {} must be finite and >= 0", self.base_delay)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub descriptor: SchemeDescriptor,
    /// Worker count.
    pub m: usize,
    /// `(rows, inner, cols)` of every `A_i` / `B_i` pair.
    pub dims: (usize, usize, usize),
    pub seed: u64,
    #[serde(default)]
    pub encode_at: EncodeAt,
    #[serde(default)]
    pub fault: FaultModel,
    #[serde(default = "default_modulus")]
    pub modulus: u64,
}

fn default_modulus() -> u64 {
    MERSENNE_61
}

impl SimConfig {
    pub fn new(descriptor: SchemeDescriptor, m: usize, seed: u64) -> Self {
        Self {
            descriptor,
            m,
            dims: (1, 1, 1),
            seed,
            encode_at: EncodeAt::Master,
            fault: FaultModel::default(),
            modulus: MERSENNE_61,
        }
    }

    /// Checks everything except satisfiability; returns the threshold.
    pub fn validate(&self) -> Result<usize, SimError> {
        let invalid = |e: CodeError| SimError::ConfigInvalid(e.to_string());
        let threshold = scheme_threshold(&self.descriptor).map_err(invalid)?;
        if self.m == 0 {
            return Err(SimError::ConfigInvalid("need at least one worker".into()));
        }
        let (r, k, c) = self.dims;
        if r == 0 || k == 0 || c == 0 {
            return Err(SimError::ConfigInvalid(format!("matrix dimensions must be positive, got {r}x{k}x{c}")));
        }
        self.fault.validate()?;
        if let Some(slots) = self.descriptor.fixed_workers() {
            if slots != self.m {
                return Err(SimError::ConfigInvalid(format!("replication needs exactly n * lambda = {slots} workers, got {}", self.m)));
            }
        }
        if self.m < threshold {
            log::warn!(
                "{} workers cannot meet the {} threshold of {threshold}",
                self.m,
                self.descriptor.scheme
            );
        }
        Ok(threshold)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub scheme: SchemeKind,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub encode_at: EncodeAt,
    pub success: bool,
    pub responses_received: usize,
    pub responses_used: usize,
    pub failed_workers: Vec<usize>,
    pub threshold: usize,
    pub encode_muls: u64,
    pub encode_invs: u64,
    pub worker_muls: u64,
    pub decode_muls: u64,
    pub decode_invs: u64,
    pub decode_retried: bool,
    pub wallclock_sim_units: f64,
    pub verified: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SimReport {
    /// Field operations spent decoding, the sweep's time proxy.
    pub fn decode_time(&self) -> u64 {
        self.decode_muls + self.decode_invs
    }
}

struct WorkerOutcome {
    product: Option<WorkerProduct>,
    arrival: f64,
    encode: OpCounter,
    compute: OpCounter,
}

fn run_worker(
    code: &dyn BatchCode,
    inputs: &BatchInputs,
    config: &SimConfig,
    w: usize,
) -> Result<WorkerOutcome, CodeError> {
    let mut encode = OpCounter::new();
    let mut compute = OpCounter::new();
    let share = code.encode_share(inputs, w, &mut encode)?;

    let mut rng = stream(config.seed, keys::WORKER_FAULT + w as u64);
    let fault = &config.fault;
    let failed = rng.gen_bool(fault.fail_prob);
    let (r, k, c) = config.dims;
    let mut arrival = fault.base_delay * (r * k * c) as f64;
    if fault.straggle_mean > 0.0 {
        arrival += Exp::new(1.0 / fault.straggle_mean)
            .expect("positive rate")
            .sample(&mut rng);
    }
    let product = if failed {
        None
    } else {
        Some(worker_multiply(code.field(), &share, &mut compute)?)
    };
    Ok(WorkerOutcome {
        product,
        arrival,
        encode,
        compute,
    })
}

/// Runs one simulated job. Configuration problems are errors; failing to
/// decode is reported in the returned `SimReport`.
pub fn run_simulation(config: &SimConfig) -> Result<SimReport, SimError> {
    let threshold = config.validate()?;
    let field = PrimeField::new(config.modulus).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
    let desc = &config.descriptor;
    let code = build_code(desc, field, config.m, config.seed).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
    let inputs = BatchInputs::random(&field, desc.n, config.dims, config.seed)?;

    let outcomes = (0..config.m)
        .into_par_iter()
        .map(|w| run_worker(code.as_ref(), &inputs, config, w))
        .collect::<Result<Vec<_>, _>>()?;

    let mut report = SimReport {
        scheme: desc.scheme,
        n: desc.n,
        m: config.m,
        seed: config.seed,
        encode_at: config.encode_at,
        success: false,
        responses_received: 0,
        responses_used: 0,
        failed_workers: Vec::new(),
        threshold,
        encode_muls: 0,
        encode_invs: 0,
        worker_muls: 0,
        decode_muls: 0,
        decode_invs: 0,
        decode_retried: false,
        wallclock_sim_units: 0.0,
        verified: false,
        error: None,
    };
    let mut arrivals = Vec::new();
    for (w, o) in outcomes.into_iter().enumerate() {
        report.encode_muls += o.encode.mul_count;
        report.encode_invs += o.encode.inv_count;
        match o.product {
            Some(p) => {
                report.worker_muls += o.compute.mul_count;
                if config.encode_at == EncodeAt::Workers {
                    report.worker_muls += o.encode.mul_count;
                }
                arrivals.push((o.arrival, p));
            }
            None => report.failed_workers.push(w),
        }
    }
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.worker_id.cmp(&b.1.worker_id)));

    let mut decode_ops = OpCounter::new();
    let mut received: Vec<WorkerProduct> = Vec::with_capacity(arrivals.len());
    let mut last_error = None;
    for (time, product) in arrivals {
        received.push(product);
        report.wallclock_sim_units = time;
        if received.len() < code.min_responses() {
            continue;
        }
        match code.decode(&received, &mut decode_ops) {
            Ok(decoded) => {
                let direct = inputs.direct_products(&field, &mut OpCounter::new())?;
                report.success = true;
                report.verified = decoded.products == direct;
                report.responses_used = decoded.used.len();
                report.decode_retried = decoded.retried;
                last_error = None;
                break;
            }
            Err(e @ (CodeError::UncoveredPair(_) | CodeError::SingularAfterRetry)) => last_error = Some(e),
            Err(e) => {
                last_error = Some(e);
                break;
            }
        }
    }
    report.responses_received = received.len();
    report.decode_muls = decode_ops.mul_count;
    report.decode_invs = decode_ops.inv_count;
    if !report.success {
        report.error = Some(match last_error {
            Some(e) => e.to_string(),
            None => format!(
                "InsufficientWorkers: {} of {} workers responded, need {}",
                received.len(),
                config.m,
                code.min_responses()
            ),
        });
    }
    Ok(report)
}

/// Grid of runs: every scheme at every `n`, `trials` times each.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub schemes: Vec<SchemeKind>,
    pub n_values: Vec<usize>,
    pub trials: usize,
    /// Workers beyond the threshold (ignored by replication, which uses `n·λ`).
    pub spare: usize,
    pub lambda: usize,
    pub dims: (usize, usize, usize),
    pub fault: FaultModel,
    pub encode_at: EncodeAt,
    pub seed: u64,
    pub modulus: u64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            schemes: Vec::new(),
            n_values: Vec::new(),
            trials: 1,
            spare: 0,
            lambda: 2,
            dims: (1, 1, 1),
            fault: FaultModel::default(),
            encode_at: EncodeAt::Master,
            seed: 0,
            modulus: MERSENNE_61,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub trial: usize,
    pub report: SimReport,
}

pub const SWEEP_HEADER: [&str; 11] = [
    "scheme",
    "n",
    "trial",
    "threshold",
    "responses_used",
    "encode_muls",
    "encode_invs",
    "worker_muls",
    "decode_time",
    "success",
    "verified",
];

pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>, SimError> {
    let mut rows = Vec::new();
    for &scheme in &spec.schemes {
        for &n in &spec.n_values {
            let mut desc = SchemeDescriptor::new(scheme, n);
            if scheme == SchemeKind::Replication {
                desc = desc.with_lambda(spec.lambda);
            }
            let threshold = scheme_threshold(&desc).map_err(|e| SimError::ConfigInvalid(e.to_string()))?;
            let m = desc.fixed_workers().unwrap_or(threshold + spec.spare);
            for trial in 0..spec.trials {
                let config = SimConfig {
                    descriptor: desc.clone(),
                    m,
                    dims: spec.dims,
                    seed: stream(spec.seed, keys::TRIAL + trial as u64).gen(),
                    encode_at: spec.encode_at,
                    fault: spec.fault,
                    modulus: spec.modulus,
                };
                rows.push(SweepRow {
                    trial,
                    report: run_simulation(&config)?,
                });
            }
        }
    }
    Ok(rows)
}

fn mean(values: impl Iterator<Item = f64>) -> String {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    format!("{}", sum / count as f64)
}

/// Writes one line per trial and, after each `(scheme, n)` group, a `mean`
/// line averaging its trials (booleans average to success rates).
pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<(), SimError> {
    let csv_err = |e: csv::Error| SimError::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for group in rows.chunk_by(|a, b| (a.report.scheme, a.report.n) == (b.report.scheme, b.report.n)) {
        for row in group {
            let r = &row.report;
            w.write_record([
                r.scheme.to_string(),
                r.n.to_string(),
                row.trial.to_string(),
                r.threshold.to_string(),
                r.responses_used.to_string(),
                r.encode_muls.to_string(),
                r.encode_invs.to_string(),
                r.worker_muls.to_string(),
                r.decode_time().to_string(),
                r.success.to_string(),
                r.verified.to_string(),
            ])
            .map_err(csv_err)?;
        }
        let reports = || group.iter().map(|row| &row.report);
        let head = &group[0].report;
        w.write_record([
            head.scheme.to_string(),
            head.n.to_string(),
            "mean".to_string(),
            mean(reports().map(|r| r.threshold as f64)),
            mean(reports().map(|r| r.responses_used as f64)),
            mean(reports().map(|r| r.encode_muls as f64)),
            mean(reports().map(|r| r.encode_invs as f64)),
            mean(reports().map(|r| r.worker_muls as f64)),
            mean(reports().map(|r| r.decode_time() as f64)),
            mean(reports().map(|r| f64::from(u8::from(r.success)))),
            mean(reports().map(|r| f64::from(u8::from(r.verified)))),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| SimError::Csv(e.to_string()))?;
    Ok(())
}
