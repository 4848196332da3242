//! Batch orchestration: configs, parallel replicas, reports and the
//! deterministic verification suite.
//!
//! One replica is one [`RngStream`] `(seed, replica)` and one rayon task;
//! records are collected in replica order and aggregated on a single thread,
//! so a report depends only on the config and the seed, never on the worker
//! count.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use crate::barriers::BesselBridgeSpec;
use crate::decoration::{barrier_event, simulate_flat, SdeConfig};
use crate::error::{Error, Result};
use crate::extremes::{imaginary_extremes, m_n};
use crate::limits::{self, LimitLaw};
use crate::martingale::{self, MartingaleRow};
use crate::opuc::{self, memory_cap_mb, run_field_with, transfer, CheckpointSchedule, Mesh};
use crate::point_process::{self, dist_config, FiniteIntensity, FiniteMeasure, MarkedPoint, PpMoments};
use crate::polymath::{self, CirclePoly};
use crate::rng::{verblunsky_sequence, RngStream};
use crate::special::{self, bessel_k0, bessel_k0_asymptotic, bessel_k0_scaled, bessel_k0_series};
use crate::stats::{self, Summary};
use crate::Sigma;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MaxDist,
    MartConv,
    SdeDecoration,
    PppMetrics,
    VerifyKernels,
    LimitTables,
    CountingCheck,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MaxDist => "max-dist",
            ExperimentKind::MartConv => "mart-conv",
            ExperimentKind::SdeDecoration => "sde-decoration",
            ExperimentKind::PppMetrics => "ppp-metrics",
            ExperimentKind::VerifyKernels => "verify-kernels",
            ExperimentKind::LimitTables => "limit-tables",
            ExperimentKind::CountingCheck => "counting-check",
        }
    }

    /// Parameters the experiment reads besides `replicas`, `seed`,
    /// `workers` and `out`.
    pub fn parameters(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::MaxDist => &["n", "beta", "sigma", "mesh_factor"],
            ExperimentKind::MartConv => &["beta", "sigma", "j_min", "j_max", "mesh_factor", "eta"],
            ExperimentKind::SdeDecoration => &["beta", "sigma", "k1", "k4", "k5", "dt"],
            ExperimentKind::PppMetrics => &["lambda", "delta"],
            ExperimentKind::VerifyKernels => &[],
            ExperimentKind::LimitTables => &[],
            ExperimentKind::CountingCheck => &["n", "beta"],
        }
    }

    pub fn all() -> [ExperimentKind; 7] {
        [
            ExperimentKind::MaxDist,
            ExperimentKind::MartConv,
            ExperimentKind::SdeDecoration,
            ExperimentKind::PppMetrics,
            ExperimentKind::VerifyKernels,
            ExperimentKind::LimitTables,
            ExperimentKind::CountingCheck,
        ]
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::all()
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

/// Raw configuration: a TOML file and/or command-line flags. Every field is
/// optional; [`ExperimentConfig::resolve`] applies defaults and checks the
/// fields against the experiment's schema.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<ExperimentKind>,
    pub n: Option<usize>,
    pub beta: Option<f64>,
    pub sigma: Option<Sigma>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub k3: Option<f64>,
    pub k4: Option<f64>,
    pub k5: Option<f64>,
    pub k6: Option<f64>,
    pub k7: Option<f64>,
    pub replicas: Option<usize>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub mesh_factor: Option<usize>,
    pub dt: Option<f64>,
    pub j_min: Option<u32>,
    pub j_max: Option<u32>,
    pub eta: Option<f64>,
    pub lambda: Option<f64>,
    pub delta: Option<f64>,
}

macro_rules! overlay {
    ($base:ident, $top:ident, $($f:ident),*) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f.clone(); } )*
    };
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// `self` with every field set in `flags` replaced.
    pub fn overridden_by(mut self, flags: &ExperimentConfig) -> Self {
        overlay!(
            self, flags, experiment, n, beta, sigma, k1, k2, k3, k4, k5, k6, k7, replicas, seed, workers, out, mesh_factor,
            dt, j_min, j_max, eta, lambda, delta
        );
        self
    }

    fn set_parameters(&self) -> Vec<&'static str> {
        let mut v = vec![];
        macro_rules! probe {
            ($($f:ident),*) => { $( if self.$f.is_some() { v.push(stringify!($f)); } )* };
        }
        probe!(n, beta, sigma, k1, k2, k3, k4, k5, k6, k7, mesh_factor, dt, j_min, j_max, eta, lambda, delta);
        v
    }

    /// Apply defaults and validate against the experiment's schema.
    pub fn resolve(&self) -> Result<RunConfig> {
        let kind = self
            .experiment
            .ok_or_else(|| Error::Config("no experiment given".into()))?;
        let allowed = kind.parameters();
        for p in self.set_parameters() {
            if !allowed.contains(&p) {
                return Err(Error::Config(format!("parameter `{p}` is not used by experiment {kind}")));
            }
        }
        let beta = self.beta.unwrap_or(2.0);
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("beta must be positive, got {beta}")));
        }
        let sigma = self.sigma.unwrap_or_default();
        let mesh_factor = self.mesh_factor.unwrap_or(8);
        if mesh_factor < 1 {
            return Err(Error::Config("mesh_factor must be at least 1".into()));
        }
        let need = |v: Option<usize>, name: &str| v.ok_or_else(|| Error::Config(format!("experiment {kind} needs `{name}`")));
        let params = match kind {
            ExperimentKind::MaxDist => {
                let n = need(self.n, "n")?;
                if n < 3 {
                    return Err(Error::Config(format!("n must be at least 3, got {n}")));
                }
                Params::MaxDist { n, beta, sigma, mesh_factor }
            }
            ExperimentKind::MartConv => {
                let j_max = self.j_max.ok_or_else(|| Error::Config("experiment mart-conv needs `j_max`".into()))?;
                let j_min = self.j_min.unwrap_or(1.min(j_max));
                if !(1 <= j_min && j_min <= j_max && j_max <= 24) {
                    return Err(Error::Config(format!("need 1 <= j_min <= j_max <= 24, got {j_min}..{j_max}")));
                }
                let eta = self.eta.unwrap_or(0.05);
                if !(eta > 0.0 && eta < 2.0) {
                    return Err(Error::Config(format!("eta must lie in (0, 2), got {eta}")));
                }
                Params::MartConv {
                    beta,
                    sigma,
                    j_min,
                    j_max,
                    mesh_factor,
                    eta,
                }
            }
            ExperimentKind::SdeDecoration => {
                let k1 = self.k1.ok_or_else(|| Error::Config("experiment sde-decoration needs `k1`".into()))?;
                let mut cfg = SdeConfig::ray(beta, k1, sigma).map_err(|e| Error::Config(e.to_string()))?;
                let k4 = self.k4.unwrap_or(cfg.k4);
                let k5 = self.k5.unwrap_or(cfg.k5);
                if !(k4 > 0.0 && k5 > 1.0) {
                    return Err(Error::Config("need k4 > 0 and k5 > 1".into()));
                }
                cfg = cfg.with_k45(k4, k5);
                if let Some(dt) = self.dt {
                    if !(dt > 0.0) {
                        return Err(Error::Config(format!("dt must be positive, got {dt}")));
                    }
                    let steps = ((cfg.t_plus - cfg.t_minus) / dt).ceil() as usize;
                    cfg = cfg.with_steps(steps.max(2));
                }
                cfg.validate().map_err(|e| Error::Config(e.to_string()))?;
                Params::SdeDecoration { config: cfg }
            }
            ExperimentKind::PppMetrics => {
                let lambda = self.lambda.unwrap_or(5.0);
                let delta = self.delta.unwrap_or(0.5);
                if !(lambda > 0.0 && lambda <= 1e4 && delta >= 0.0 && lambda + delta <= 1e4) {
                    return Err(Error::Config("need 0 < lambda, 0 <= delta, lambda + delta <= 1e4".into()));
                }
                Params::PppMetrics { lambda, delta }
            }
            ExperimentKind::VerifyKernels => Params::VerifyKernels,
            ExperimentKind::LimitTables => Params::LimitTables,
            ExperimentKind::CountingCheck => {
                let n = need(self.n, "n")?;
                if !(2..=8).contains(&n) {
                    return Err(Error::Config(format!("counting-check needs 2 <= n <= 8, got {n}")));
                }
                Params::CountingCheck { n, beta }
            }
        };
        let replicas = self.replicas.unwrap_or(match kind {
            ExperimentKind::VerifyKernels => 0,
            ExperimentKind::LimitTables => 100_000,
            _ => 100,
        });
        if kind == ExperimentKind::VerifyKernels && self.replicas.unwrap_or(0) != 0 {
            return Err(Error::Config("verify-kernels takes no replicas".into()));
        }
        let rc = RunConfig {
            experiment: kind,
            params,
            replicas,
            seed: self.seed.unwrap_or(0),
            workers: self.workers.unwrap_or(0),
            out: self.out.clone(),
        };
        rc.check_budget()?;
        Ok(rc)
    }
}

/// Validated, per-experiment parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Params {
    MaxDist {
        n: usize,
        beta: f64,
        sigma: Sigma,
        mesh_factor: usize,
    },
    MartConv {
        beta: f64,
        sigma: Sigma,
        j_min: u32,
        j_max: u32,
        mesh_factor: usize,
        eta: f64,
    },
    SdeDecoration {
        config: SdeConfig,
    },
    PppMetrics {
        lambda: f64,
        delta: f64,
    },
    VerifyKernels,
    LimitTables,
    CountingCheck {
        n: usize,
        beta: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub params: Params,
    pub replicas: usize,
    pub seed: u64,
    /// 0 means one worker per core.
    pub workers: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    fn threads(&self) -> usize {
        if self.workers == 0 {
            rayon::current_num_threads().max(1)
        } else {
            self.workers
        }
    }

    /// Peak working set estimate in MiB: per-worker state times the number
    /// of workers, plus the record set.
    pub fn memory_estimate_mb(&self) -> usize {
        let w = self.threads() as u128;
        let per_worker: u128 = match &self.params {
            Params::MaxDist { n, sigma, mesh_factor, .. } => {
                let m = (*n * *mesh_factor) as u128;
                match sigma {
                    Sigma::Real => 16 * (6 * m + 8 * *n as u128),
                    Sigma::Imaginary => 48 * m,
                }
            }
            Params::MartConv {
                j_min, j_max, mesh_factor, ..
            } => {
                let m = (*mesh_factor as u128) << *j_max;
                (16 + 8 * (*j_max - *j_min + 1) as u128) * m
            }
            Params::SdeDecoration { config } => 24 * (config.steps as u128 + 1) * config.theta.len() as u128,
            Params::PppMetrics { lambda, delta } => 64 * 8 * (lambda + delta).ceil() as u128,
            _ => 1 << 16,
        };
        let records = 256 * self.replicas as u128;
        ((w * per_worker + records) >> 20) as usize + 1
    }

    pub fn check_budget(&self) -> Result<()> {
        let needed_mb = self.memory_estimate_mb();
        let cap_mb = memory_cap_mb();
        if needed_mb > cap_mb {
            return Err(Error::MemoryBudget { needed_mb, cap_mb });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxDistRecord {
    pub replica: usize,
    pub n: usize,
    pub beta: f64,
    pub sigma: Sigma,
    pub seed: u64,
    /// max φ_n − sqrt(8/β) m_n.
    pub m_centered: f64,
    pub argmax_theta: f64,
    /// Centered extremes of 2 Im log X_n (σ = i only).
    pub i_plus: Option<f64>,
    pub i_minus: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SdeRecord {
    pub replica: usize,
    /// Max terminal 𝔘 over lattice points passing the barrier.
    pub w_o: Option<f64>,
    pub barrier_pass_fraction: f64,
    /// 𝔘_{T_+}(0).
    pub u_terminal_at_zero: f64,
    /// Σ(Δ𝔘(0))² / ((4/β)(T_+ − T_−)).
    pub qv_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PppRecord {
    pub replica: usize,
    pub count_p: usize,
    pub count_q: usize,
    pub partial1_shared: f64,
    pub d1_shared: f64,
    pub partial1_independent: f64,
    pub d1_independent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitSampleRecord {
    pub replica: usize,
    pub fhk: f64,
    pub two_sum: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingRecord {
    pub replica: usize,
    pub n: usize,
    /// Largest circular distance between an eigenangle and the nearest root
    /// angle of the coefficient-domain polynomial.
    pub max_angle_error: f64,
    /// Largest ||z| − 1| over the roots.
    pub max_modulus_error: f64,
}

/// One named check with its threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// True when the check requires `value <= threshold`; false for `>=`.
    pub upper: bool,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            upper: true,
            pass: value <= threshold,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            upper: false,
            pass: value >= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "rows", rename_all = "kebab-case")]
pub enum Records {
    MaxDist(Vec<MaxDistRecord>),
    MartConv(Vec<MartingaleRow>),
    SdeDecoration(Vec<SdeRecord>),
    PppMetrics(Vec<PppRecord>),
    VerifyKernels(Vec<Check>),
    LimitTables(Vec<LimitSampleRecord>),
    CountingCheck(Vec<CountingRecord>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::MaxDist(v) => v.len(),
            Records::MartConv(v) => v.len(),
            Records::SdeDecoration(v) => v.len(),
            Records::PppMetrics(v) => v.len(),
            Records::VerifyKernels(v) => v.len(),
            Records::LimitTables(v) => v.len(),
            Records::CountingCheck(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenate two shards of the same record type.
    pub fn concat(self, other: Records) -> Result<Records> {
        Ok(match (self, other) {
            (Records::MaxDist(mut a), Records::MaxDist(b)) => {
                a.extend(b);
                Records::MaxDist(a)
            }
            (Records::MartConv(mut a), Records::MartConv(b)) => {
                a.extend(b);
                Records::MartConv(a)
            }
            (Records::SdeDecoration(mut a), Records::SdeDecoration(b)) => {
                a.extend(b);
                Records::SdeDecoration(a)
            }
            (Records::PppMetrics(mut a), Records::PppMetrics(b)) => {
                a.extend(b);
                Records::PppMetrics(a)
            }
            (Records::VerifyKernels(mut a), Records::VerifyKernels(b)) => {
                a.extend(b);
                Records::VerifyKernels(a)
            }
            (Records::LimitTables(mut a), Records::LimitTables(b)) => {
                a.extend(b);
                Records::LimitTables(a)
            }
            (Records::CountingCheck(mut a), Records::CountingCheck(b)) => {
                a.extend(b);
                Records::CountingCheck(a)
            }
            _ => return Err(Error::Config("cannot merge records of different experiments".into())),
        })
    }

    /// Flat CSV of the records, one row per record.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        fn all<W: std::io::Write, T: Serialize>(w: &mut csv::Writer<W>, rows: &[T]) -> Result<()> {
            for r in rows {
                w.serialize(r)?;
            }
            Ok(())
        }
        match self {
            Records::MaxDist(v) => all(&mut w, v)?,
            Records::MartConv(v) => all(&mut w, v)?,
            Records::SdeDecoration(v) => all(&mut w, v)?,
            Records::PppMetrics(v) => all(&mut w, v)?,
            Records::VerifyKernels(v) => all(&mut w, v)?,
            Records::LimitTables(v) => all(&mut w, v)?,
            Records::CountingCheck(v) => all(&mut w, v)?,
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelAggregate {
    pub k: usize,
    pub b: Summary,
    /// IQR / median of B_k.
    pub b_spread: f64,
    pub b_nonnegative_fraction: f64,
    pub b_hat: Summary,
    pub b_hat_se: f64,
    pub excluded: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvPoint {
    pub v: f64,
    pub tv: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Aggregates {
    Empty,
    MaxDist {
        m_centered: Summary,
        /// Gumbel location fitted with scale sqrt(2/β).
        gumbel_scale: f64,
        fitted_location: f64,
        residual_gof: Option<limits::Gof>,
        /// KS distance to G₁ + G₂ (β = 2, σ = 1 only), no fitted shift.
        two_gumbel_sum_ks: Option<f64>,
        i_plus: Option<Summary>,
        i_minus: Option<Summary>,
    },
    MartConv {
        levels: Vec<LevelAggregate>,
        normalizers: martingale::NormalizerSums,
    },
    SdeDecoration {
        pass_fraction: Summary,
        w_o: Option<Summary>,
        any_pass_fraction: f64,
        qv_ratio_mean: f64,
        qv_ratio_se: f64,
        u_terminal_mean: f64,
        u_terminal_var: f64,
        /// (4/β)(T_+ − T_−), the variance of 𝔘_{T_+}(0) − 𝔘_{T_−}(0).
        u_terminal_var_expected: f64,
    },
    PppMetrics {
        partial2_shared: f64,
        partial2_shared_se: f64,
        d2_shared: f64,
        partial2_independent: f64,
        partial2_independent_se: f64,
        d2_independent: f64,
        count_p_mean: f64,
        count_q_mean: f64,
        d_bl_lower: f64,
        dictionary_size: usize,
        intensity_bounds: point_process::IntensityBounds,
        wrapped_gaussian_tv: Vec<TvPoint>,
    },
    LimitTables {
        fhk_mass: f64,
        fhk_ks: f64,
        fhk_ks_pvalue: f64,
        two_sum_mean: f64,
        two_sum_mean_se: f64,
        density_rows: usize,
    },
    CountingCheck {
        max_angle_error: f64,
        max_modulus_error: f64,
    },
    VerifyKernels {
        passed: usize,
        failed: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub replicas_per_second: f64,
    pub workers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: RunConfig,
    pub records: Records,
    pub aggregates: Aggregates,
    pub checks: Vec<Check>,
    pub timing: Timing,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON without the `timing` block, the part fixed by (config, seed).
    pub fn payload_json(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(o) = v.as_object_mut() {
            o.remove("timing");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }

    /// Write `report.json` and `records.csv` (plus `density.csv` for
    /// limit-tables) into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()?)?;
        self.records.write_csv(std::fs::File::create(dir.join("records.csv"))?)?;
        if self.config.experiment == ExperimentKind::LimitTables {
            let rows = limits::density_table(-4.0, 12.0, 801)?;
            limits::write_density_csv(&rows, std::fs::File::create(dir.join("density.csv"))?)?;
        }
        Ok(())
    }
}

fn map_replicas<T, F>(rc: &RunConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut RngStream) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(rc.threads())
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        (0..rc.replicas)
            .into_par_iter()
            .map(|i| {
                let mut s = RngStream::new(rc.seed, i as u64);
                f(i, &mut s)
            })
            .collect()
    })
}

/// Run an experiment. The statistical content of the report is a pure
/// function of the config and the seed.
pub fn run(rc: &RunConfig) -> Result<ExperimentReport> {
    rc.check_budget()?;
    let start = Instant::now();
    let records = match &rc.params {
        Params::MaxDist {
            n,
            beta,
            sigma,
            mesh_factor,
        } => Records::MaxDist(map_replicas(rc, |i, s| max_dist_replica(i, s, rc.seed, *n, *beta, *sigma, *mesh_factor))?),
        Params::MartConv {
            beta,
            sigma,
            j_min,
            j_max,
            mesh_factor,
            eta,
        } => {
            let rows: Vec<Vec<MartingaleRow>> = map_replicas(rc, |i, s| {
                martingale::replica_rows(i, s, *j_min..=*j_max, *mesh_factor, *beta, *sigma, *eta)
            })?;
            Records::MartConv(rows.into_iter().flatten().collect())
        }
        Params::SdeDecoration { config } => Records::SdeDecoration(map_replicas(rc, |i, s| sde_replica(i, s, config))?),
        Params::PppMetrics { lambda, delta } => {
            Records::PppMetrics(map_replicas(rc, |i, _| ppp_replica(i, rc.seed, *lambda, *delta))?)
        }
        Params::VerifyKernels => Records::VerifyKernels(verify(rc.seed)),
        Params::LimitTables => Records::LimitTables(map_replicas(rc, |i, s| {
            Ok(LimitSampleRecord {
                replica: i,
                fhk: limits::sample_fhk(s),
                two_sum: limits::sample_two_gumbel_sum(s),
            })
        })?),
        Params::CountingCheck { n, beta } => Records::CountingCheck(map_replicas(rc, |i, s| counting_replica(i, s, *n, *beta))?),
    };
    let (aggregates, checks) = aggregate(rc, &records)?;
    let wall = start.elapsed().as_secs_f64();
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config: rc.clone(),
        records,
        aggregates,
        checks,
        timing: Timing {
            wall_seconds: wall,
            replicas_per_second: if wall > 0.0 { rc.replicas as f64 / wall } else { 0.0 },
            workers: rc.threads(),
        },
    })
}

fn max_dist_replica(
    replica: usize,
    s: &mut RngStream,
    seed: u64,
    n: usize,
    beta: f64,
    sigma: Sigma,
    mesh_factor: usize,
) -> Result<MaxDistRecord> {
    let gammas = verblunsky_sequence(s, n, beta)?;
    let shift = (8.0 / beta).sqrt() * m_n(n as f64);
    let m = mesh_factor * n;
    let (theta, max, ip, im) = match sigma {
        Sigma::Real => {
            let (_, phistar) = transfer::szego_fast(&gammas);
            let (t, v, _) = transfer::field_max(&phistar, m);
            (t, v, None, None)
        }
        Sigma::Imaginary => {
            let alpha = Complex64::cis(s.angle());
            let mesh = Mesh::uniform(n, m)?;
            let mut traj = run_field_with(&gammas[..n - 1], &mesh, sigma, beta, &CheckpointSchedule::None, false)?;
            let ie = imaginary_extremes(&traj, alpha)?;
            traj.advance(gammas[n - 1]);
            let i = traj.argmax_phi();
            (traj.theta[i], traj.phi[i], Some(ie.i_plus), Some(ie.i_minus))
        }
    };
    Ok(MaxDistRecord {
        replica,
        n,
        beta,
        sigma,
        seed,
        m_centered: max - shift,
        argmax_theta: theta,
        i_plus: ip,
        i_minus: im,
    })
}

fn sde_replica(replica: usize, s: &mut RngStream, config: &SdeConfig) -> Result<SdeRecord> {
    let mut path = simulate_flat(config, s, 0.0)?;
    let ok = barrier_event(config, &mut path);
    let zero = path.theta.len() - 1;
    let qv: f64 = path.u.windows(2).map(|w| (w[1][zero] - w[0][zero]).powi(2)).sum();
    let expected = 4.0 / config.beta * (config.t_plus - config.t_minus);
    let ut = path.terminal_u();
    let w_o = ut
        .iter()
        .zip(&ok)
        .filter(|(_, &f)| f)
        .map(|(&u, _)| u)
        .fold(None, |acc: Option<f64>, u| Some(acc.map_or(u, |a| a.max(u))));
    Ok(SdeRecord {
        replica,
        w_o,
        barrier_pass_fraction: ok.iter().filter(|&&f| f).count() as f64 / ok.len() as f64,
        u_terminal_at_zero: ut[zero] - path.u[0][zero],
        qv_ratio: qv / expected,
    })
}

fn ppp_point(s: &mut RngStream) -> MarkedPoint {
    let theta = s.angle();
    let v = s.exp1();
    MarkedPoint::new(theta, v, vec![Complex64::cis(s.angle())])
}

fn ppp_replica(replica: usize, seed: u64, lambda: f64, delta: f64) -> Result<PppRecord> {
    let p = FiniteIntensity {
        total_mass: lambda,
        sampler: Box::new(ppp_point),
    };
    let q = FiniteIntensity {
        total_mass: lambda + delta,
        sampler: Box::new(ppp_point),
    };
    let i = replica as u64;
    let x = point_process::sample_poisson(&p, &mut RngStream::new(seed, 2 * i));
    let y_shared = point_process::sample_poisson(&q, &mut RngStream::new(seed, 2 * i));
    let y_ind = point_process::sample_poisson(&q, &mut RngStream::new(seed, 2 * i + 1));
    let (a, b) = dist_config(&x, &y_shared)?;
    let (c, d) = dist_config(&x, &y_ind)?;
    Ok(PppRecord {
        replica,
        count_p: x.len(),
        count_q: y_shared.len(),
        partial1_shared: a,
        d1_shared: b,
        partial1_independent: c,
        d1_independent: d,
    })
}

/// Circular distance between two angles.
fn circ(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    d.min(TAU - d)
}

fn counting_replica(replica: usize, s: &mut RngStream, n: usize, beta: f64) -> Result<CountingRecord> {
    let gammas = verblunsky_sequence(s, n - 1, beta)?;
    let alpha = Complex64::cis(s.angle());
    let eig = opuc::eigenangles(&gammas, alpha);
    let coeffs = opuc::char_poly_coefficients(&gammas, n, alpha, opuc::DEFAULT_ORACLE_CAP)?;
    let roots = CirclePoly::new(coeffs).roots()?;
    let angles: Vec<f64> = roots.iter().map(|z| z.arg().rem_euclid(TAU)).collect();
    let max_angle_error = eig
        .iter()
        .map(|&e| angles.iter().map(|&a| circ(a, e)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let max_modulus_error = roots.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max);
    Ok(CountingRecord {
        replica,
        n,
        max_angle_error: if eig.len() == n { max_angle_error } else { f64::INFINITY },
        max_modulus_error,
    })
}

/// Aggregates and checks from a record set. Pure in the records, so shards
/// merged with [`Records::concat`] aggregate like the full run.
pub fn aggregate(rc: &RunConfig, records: &Records) -> Result<(Aggregates, Vec<Check>)> {
    if records.is_empty() {
        return Ok((Aggregates::Empty, vec![]));
    }
    let mut checks = vec![];
    let agg = match (records, &rc.params) {
        (Records::MaxDist(rows), Params::MaxDist { beta, sigma, .. }) => {
            let m: Vec<f64> = rows.iter().map(|r| r.m_centered).collect();
            let scale = (2.0 / beta).sqrt();
            let loc = limits::fit_gumbel_location(&m, scale)?;
            let resid: Vec<f64> = m.iter().map(|x| x - loc).collect();
            let gof = if resid.len() >= limits::GOF_MIN_SAMPLES {
                let mut s = RngStream::new(rc.seed, u64::MAX);
                Some(limits::gof(&resid, &LimitLaw::Gumbel { scale }, 199, &mut s)?)
            } else {
                None
            };
            let two_sum = (*sigma == Sigma::Real && (*beta - 2.0).abs() < 1e-12)
                .then(|| stats::ks_statistic(&m, limits::two_gumbel_sum_cdf));
            let opt = |f: fn(&MaxDistRecord) -> Option<f64>| {
                let v: Vec<f64> = rows.iter().filter_map(f).collect();
                (!v.is_empty()).then(|| Summary::of(&v))
            };
            Aggregates::MaxDist {
                m_centered: Summary::of(&m),
                gumbel_scale: scale,
                fitted_location: loc,
                residual_gof: gof,
                two_gumbel_sum_ks: two_sum,
                i_plus: opt(|r| r.i_plus),
                i_minus: opt(|r| r.i_minus),
            }
        }
        (Records::MartConv(rows), Params::MartConv { beta, sigma, j_max, .. }) => {
            let mut by_k: BTreeMap<usize, Vec<&MartingaleRow>> = BTreeMap::new();
            for r in rows {
                by_k.entry(r.k).or_default().push(r);
            }
            let levels: Vec<LevelAggregate> = by_k
                .into_iter()
                .map(|(k, rs)| {
                    let b: Vec<f64> = rs.iter().map(|r| r.b_k).collect();
                    let bh: Vec<f64> = rs.iter().map(|r| r.b_hat_k).collect();
                    let ex: Vec<f64> = rs.iter().map(|r| r.excluded_mass).collect();
                    let med = stats::median(&b);
                    LevelAggregate {
                        k,
                        b: Summary::of(&b),
                        b_spread: stats::iqr(&b) / med,
                        b_nonnegative_fraction: b.iter().filter(|&&x| x >= 0.0).count() as f64 / b.len() as f64,
                        b_hat: Summary::of(&bh),
                        b_hat_se: if bh.len() > 1 { stats::std_err(&bh) } else { 0.0 },
                        excluded: Summary::of(&ex),
                    }
                })
                .collect();
            let min_nonneg = levels.iter().map(|l| l.b_nonnegative_fraction).fold(1.0, f64::min);
            checks.push(Check::at_least("B_k >= 0 fraction", min_nonneg, 1.0));
            Aggregates::MartConv {
                levels,
                normalizers: martingale::normalizer_sums(1usize << *j_max.max(&1), *beta, *sigma)?,
            }
        }
        (Records::SdeDecoration(rows), Params::SdeDecoration { config }) => {
            let pass: Vec<f64> = rows.iter().map(|r| r.barrier_pass_fraction).collect();
            let w: Vec<f64> = rows.iter().filter_map(|r| r.w_o).collect();
            let qv: Vec<f64> = rows.iter().map(|r| r.qv_ratio).collect();
            let ut: Vec<f64> = rows.iter().map(|r| r.u_terminal_at_zero).collect();
            let se = |v: &[f64]| if v.len() > 1 { stats::std_err(v) } else { 0.0 };
            Aggregates::SdeDecoration {
                pass_fraction: Summary::of(&pass),
                w_o: (!w.is_empty()).then(|| Summary::of(&w)),
                any_pass_fraction: w.len() as f64 / rows.len() as f64,
                qv_ratio_mean: stats::mean(&qv),
                qv_ratio_se: se(&qv),
                u_terminal_mean: stats::mean(&ut),
                u_terminal_var: if ut.len() > 1 { stats::variance(&ut) } else { 0.0 },
                u_terminal_var_expected: 4.0 / config.beta * (config.t_plus - config.t_minus),
            }
        }
        (Records::PppMetrics(rows), Params::PppMetrics { lambda, delta }) => {
            let col = |f: fn(&PppRecord) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
            let se = |v: &[f64]| if v.len() > 1 { stats::std_err(v) } else { 0.0 };
            let ps = col(|r| r.partial1_shared);
            let pi = col(|r| r.partial1_independent);
            let mut s = RngStream::new(rc.seed, u64::MAX);
            let atoms: Vec<MarkedPoint> = (0..256).map(|_| ppp_point(&mut s)).collect();
            let vmax = atoms.iter().map(|p| p.v).fold(1.0, f64::max);
            let mu = FiniteMeasure::new(atoms.iter().map(|p| (p.clone(), lambda / 256.0)).collect());
            let nu = FiniteMeasure::new(atoms.iter().map(|p| (p.clone(), (lambda + delta) / 256.0)).collect());
            let dict = point_process::default_dictionary((0.0, vmax));
            let bl = point_process::d_bl(&mu, &nu, &dict);
            let bounds = point_process::intensity_change_bound(bl.lower_bound, *lambda, lambda + delta)?;
            let mut tv = vec![];
            let mut ts = RngStream::new(rc.seed, u64::MAX - 1);
            for v in [0.05, 0.1, 0.2, 0.5, 1.0] {
                let e = point_process::wrapped_gaussian_tv(v, 0.0, 200_000, 64, &mut ts)?;
                tv.push(TvPoint { v, tv: e.tv, se: e.se });
            }
            Aggregates::PppMetrics {
                partial2_shared: stats::mean(&ps),
                partial2_shared_se: se(&ps),
                d2_shared: stats::mean(&col(|r| r.d1_shared)),
                partial2_independent: stats::mean(&pi),
                partial2_independent_se: se(&pi),
                d2_independent: stats::mean(&col(|r| r.d1_independent)),
                count_p_mean: stats::mean(&col(|r| r.count_p as f64)),
                count_q_mean: stats::mean(&col(|r| r.count_q as f64)),
                d_bl_lower: bl.lower_bound,
                dictionary_size: bl.dictionary_size,
                intensity_bounds: bounds,
                wrapped_gaussian_tv: tv,
            }
        }
        (Records::LimitTables(rows), Params::LimitTables) => {
            let f: Vec<f64> = rows.iter().map(|r| r.fhk).collect();
            let t: Vec<f64> = rows.iter().map(|r| r.two_sum).collect();
            let (lo, hi) = LimitLaw::Fhk.support_window();
            let (mass, _) = special::integrate(limits::fhk_density, lo - 4.0, hi + 10.0, 1e-12);
            let ks = stats::ks_statistic(&f, limits::fhk_cdf);
            Aggregates::LimitTables {
                fhk_mass: mass,
                fhk_ks: ks,
                fhk_ks_pvalue: stats::ks_pvalue(ks, f.len()),
                two_sum_mean: stats::mean(&t),
                two_sum_mean_se: if t.len() > 1 { stats::std_err(&t) } else { 0.0 },
                density_rows: 801,
            }
        }
        (Records::CountingCheck(rows), Params::CountingCheck { .. }) => {
            let ma = rows.iter().map(|r| r.max_angle_error).fold(0.0, f64::max);
            let mm = rows.iter().map(|r| r.max_modulus_error).fold(0.0, f64::max);
            checks.push(Check::at_most("eigenangles vs polynomial roots", ma, 1e-6));
            Aggregates::CountingCheck {
                max_angle_error: ma,
                max_modulus_error: mm,
            }
        }
        (Records::VerifyKernels(rows), Params::VerifyKernels) => {
            checks.extend(rows.iter().cloned());
            let passed = rows.iter().filter(|c| c.pass).count();
            Aggregates::VerifyKernels {
                passed,
                failed: rows.len() - passed,
            }
        }
        _ => return Err(Error::Config("records do not match the experiment".into())),
    };
    Ok((agg, checks))
}

/// Replaceable formulas exercised by [`verify_with`], so that a corrupted
/// kernel can be shown to fail the suite.
#[derive(Clone, Copy)]
pub struct Kernels {
    /// Fejér kernel F_m(e^{iθ}).
    pub fejer: fn(usize, f64) -> f64,
    pub ln_mgf: fn(f64, f64, usize, f64) -> Result<f64>,
    pub bridge_log_density: fn(&BesselBridgeSpec, f64, f64) -> Result<f64>,
}

impl Default for Kernels {
    fn default() -> Self {
        Self {
            fejer: polymath::fejer_kernel_angle,
            ln_mgf: martingale::ln_mgf,
            bridge_log_density: |s, t, u| s.log_density(t, u),
        }
    }
}

fn random_poly(s: &mut RngStream, degree: usize) -> CirclePoly {
    CirclePoly::new((0..=degree).map(|_| Complex64::new(s.normal(), s.normal())).collect())
}

/// The deterministic kernel suite with the shipped formulas.
pub fn verify(seed: u64) -> Vec<Check> {
    verify_with(&Kernels::default(), seed)
}

/// Fejér sums, Bernstein ratios, interpolation brackets, the Verblunsky MGF,
/// Bessel-bridge normalisation, K₀ and the FHK density. Random polynomials
/// come from streams `(seed, ·)`, so the suite is deterministic.
pub fn verify_with(k: &Kernels, seed: u64) -> Vec<Check> {
    let mut out = vec![];

    let mut fejer: f64 = 0.0;
    for m in 2..=16 {
        for r in 1..=4 {
            for i in 0..16 {
                let t = i as f64 / 16.0 + 0.013;
                let rm = (r * m) as f64;
                let s: f64 = (1..=r * m).map(|j| (k.fejer)(m, TAU * (t + j as f64 / rm))).sum();
                fejer = fejer.max((s - rm).abs());
            }
        }
    }
    out.push(Check::at_most("fejer sum identity residual", fejer, 1e-10));

    let polys: Vec<CirclePoly> = (0..1000u64)
        .map(|i| {
            let mut s = RngStream::new(seed, i);
            let d = 1 + (s.uniform() * 24.0) as usize;
            random_poly(&mut s, d)
        })
        .collect();
    let bern = polys
        .par_iter()
        .map(|q| polymath::bernstein_ratio(q).map(|b| b.ratio).unwrap_or(f64::INFINITY))
        .reduce(|| 0.0, f64::max);
    out.push(Check::at_most("bernstein ratio max", bern, 1.0 + 1e-6));

    for m in [2usize, 4, 8] {
        let worst = polys
            .par_iter()
            .map(|q| match polymath::interpolation_brackets(q, m, 1.0) {
                Ok(b) => b.circle_max / b.certified_upper,
                Err(_) => f64::INFINITY,
            })
            .reduce(|| 0.0, f64::max);
        out.push(Check::at_most(format!("interpolation bracket m={m}"), worst, 1.0 + 1e-9));
    }

    let mut mgf_err: f64 = 0.0;
    for &beta in &[0.5, 1.0, 2.0, 4.0] {
        for j in [0usize, 1, 3, 10, 50] {
            for &s in &[-0.4, 0.5, 1.0, 2.0] {
                let x = 1.0 + crate::rng::beta_k_sq(j, beta);
                let want = special::ln_gamma(x + s) + special::ln_gamma(x) - 2.0 * special::ln_gamma(x + 0.5 * s);
                let got = (k.ln_mgf)(s, 0.0, j, beta).unwrap_or(f64::INFINITY);
                mgf_err = mgf_err.max((got - want).abs());
            }
        }
    }
    for j in [0usize, 1, 5, 40] {
        let want = ((j as f64 + 3.0) / (j as f64 + 2.0)).ln();
        let got = (k.ln_mgf)(2.0, 0.0, j, 2.0).unwrap_or(f64::INFINITY);
        mgf_err = mgf_err.max((got - want).abs());
    }
    out.push(Check::at_most("mgf closed form residual", mgf_err, 1e-10));

    let mut bridge: f64 = 0.0;
    for &(t0, t1, c0, c1) in &[(0.0, 1.0, 1.0, 1.0), (0.0, 4.0, 0.5, 2.0), (1.0, 10.0, 3.0, 0.2), (0.0, 100.0, 5.0, 5.0)] {
        let spec = BesselBridgeSpec::new(t0, t1, c0, c1, 0.0).expect("valid bridge");
        for frac in [0.1, 0.5, 0.9] {
            let t = t0 + frac * (t1 - t0);
            let (a, b) = (t - t0, t1 - t);
            let split = c0.max(c1) + 10.0 * (a * b / (a + b)).sqrt();
            let f = |u: f64| (k.bridge_log_density)(&spec, t, u).map(f64::exp).unwrap_or(0.0);
            let (v1, _) = special::integrate(f, 0.0, split, 1e-13);
            let (v2, _) = special::integrate_to_inf(f, split, 1e-13);
            bridge = bridge.max((v1 + v2 - 1.0).abs());
        }
    }
    out.push(Check::at_most("bessel bridge density mass", bridge, 1e-8));

    let mut k0: f64 = 0.0;
    for i in 1..=40 {
        let z = 0.05 * i as f64;
        k0 = k0.max(((bessel_k0(z) - bessel_k0_series(z)) / bessel_k0_series(z)).abs());
    }
    for i in 0..=30 {
        let z = 20.0 + 2.0 * i as f64;
        let a = bessel_k0_asymptotic(z) * z.exp();
        k0 = k0.max(((bessel_k0_scaled(z) - a) / a).abs());
    }
    out.push(Check::at_most("K0 quadrature vs series/asymptotic", k0, 1e-8));

    let (mass, _) = special::integrate(limits::fhk_density, -10.0, 40.0, 1e-12);
    out.push(Check::at_most("fhk density mass", (mass - 1.0).abs(), 1e-8));
    out
}

/// Input of the bound evaluator: the Poisson-approximation moments plus, optionally, a
/// d_BL value and two intensity masses for the intensity-change bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundInput {
    pub moments: Vec<PpMoments>,
    pub var: f64,
    pub lambda: f64,
    #[serde(default = "one")]
    pub c: f64,
    pub d_bl: Option<f64>,
    pub mass_pi: Option<f64>,
    pub mass_lambda: Option<f64>,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundOutput {
    pub schema_version: u32,
    pub pp_bound: f64,
    pub intensity_change: Option<point_process::IntensityBounds>,
}

pub fn evaluate_bounds(input: &BoundInput) -> Result<BoundOutput> {
    let pp = point_process::pp_bound(&input.moments, input.var, input.lambda, input.c)?;
    let ic = match (input.d_bl, input.mass_pi, input.mass_lambda) {
        (Some(d), Some(a), Some(b)) => Some(point_process::intensity_change_bound(d, a, b)?),
        (None, None, None) => None,
        _ => return Err(Error::Config("d_bl, mass_pi and mass_lambda must be given together".into())),
    };
    Ok(BoundOutput {
        schema_version: SCHEMA_VERSION,
        pp_bound: pp,
        intensity_change: ic,
    })
}

pub fn evaluate_bounds_json(text: &str) -> Result<BoundOutput> {
    let input: BoundInput = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    evaluate_bounds(&input)
}
