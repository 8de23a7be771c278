//! Subcommand implementations. Each `run_*` function computes its result
//! in memory; the `cmd_*` wrappers add file input and output.

use std::fs;
use std::path::Path;
use std::time::Instant;

use ihgp_core::exact::{adf_filter, gaussian_posterior, rts_marginals, PosteriorMarginals};
use ihgp_core::grad::TraceEntry;
use ihgp_core::grad::{minimize, objective, HyperParams, OnlineLearner, OnlineOptions};
use ihgp_core::ihgp::IhgpDiagnostics;
use ihgp_core::lgcp::{bin_events, fit_intensity, BinnedCounts, IntensityPosterior};
use ihgp_core::ssm::discretize;
use ihgp_core::{build_grid, ihgp_infer, ihgp_regression, DiscreteModel, KernelSpec};
use serde::Serialize;

use crate::config::{GenConfig, KernelConfig, Method, RunConfig};
use crate::data::{fmt, read_events, read_series, write_json, write_series, CsvOut, Series};
use crate::error::{CliError, CliResult};
use crate::generate::{gen_events, gen_regime_switch, gen_sinc, sinusoidal_rate};

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn sampling_interval(cfg: &RunConfig, series: &Series) -> CliResult<f64> {
    let dt = cfg.dt.unwrap_or(series.dt);
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(CliError::Config(format!("config: dt must be positive, got {dt}")));
    }
    Ok(dt)
}

fn build_model(spec: &KernelSpec, dt: f64) -> CliResult<DiscreteModel> {
    Ok(discretize(&spec.to_sde()?, dt)?)
}

/// Posterior marginals and evidence for one series.
#[derive(Debug, Clone)]
pub struct InferOutput {
    pub marginals: PosteriorMarginals,
    pub nll: f64,
    pub runtime_ms: f64,
    pub method: Method,
    pub m: usize,
    /// Present for the infinite-horizon method.
    pub diagnostics: Option<IhgpDiagnostics>,
}

#[derive(Serialize)]
struct InferMetrics<'a> {
    command: &'a str,
    method: &'a str,
    likelihood: &'a str,
    m: usize,
    n: usize,
    nll: f64,
    runtime_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    clamped_sites: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    below_grid: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    above_grid: Option<usize>,
}

fn likelihood_name(cfg: &RunConfig) -> &'static str {
    use crate::config::LikelihoodConfig as L;
    match cfg.likelihood {
        L::Gaussian { .. } => "gaussian",
        L::Poisson => "poisson",
        L::Logit => "logit",
        L::Probit => "probit",
    }
}

/// Posterior for `series` under the configured kernel, likelihood and method.
pub fn run_infer(cfg: &RunConfig, series: &Series, method: Method) -> CliResult<InferOutput> {
    let spec = cfg.kernel_spec()?;
    let model = build_model(&spec, sampling_interval(cfg, series)?)?;
    let lik = cfg.likelihood_model()?;
    let y = &series.y;
    let start = Instant::now();
    let (marginals, diagnostics) = match (method, lik.noise_var()) {
        (Method::Exact, Some(noise)) => (gaussian_posterior(&model, y, noise)?, None),
        (Method::Exact, None) => {
            let filt = adf_filter(&model, y, &lik)?;
            (rts_marginals(&model, &filt)?, None)
        }
        (Method::Ihgp, Some(noise)) => {
            let r = ihgp_regression(&model, y, noise)?;
            (r.marginals, Some(r.diagnostics))
        }
        (Method::Ihgp, None) => {
            let grid = build_grid(&model, cfg.grid.into())?;
            let r = ihgp_infer(&model, &grid, y, &lik)?;
            (r.marginals, Some(r.diagnostics))
        }
    };
    let runtime_ms = elapsed_ms(start);
    Ok(InferOutput {
        nll: -marginals.log_lik,
        marginals,
        runtime_ms,
        method,
        m: model.dim(),
        diagnostics,
    })
}

/// `results.csv` (`t,y,mean,var,lower95,upper95`) and `metrics.json`.
pub fn cmd_infer(cfg: &RunConfig, data: &Path, out: &Path, method: Method) -> CliResult<InferOutput> {
    let series = read_series(data)?;
    let res = run_infer(cfg, &series, method)?;
    ensure_dir(out)?;
    let mut csv = CsvOut::create(
        &out.join("results.csv"),
        &["t", "y", "mean", "var", "lower95", "upper95"],
        false,
    )?;
    for i in 0..series.len() {
        let (m, v) = (res.marginals.mean[i], res.marginals.var[i]);
        let sd = v.max(0.0).sqrt();
        csv.row([
            fmt(series.t[i]),
            fmt(series.y[i]),
            fmt(m),
            fmt(v),
            fmt(m - Z95 * sd),
            fmt(m + Z95 * sd),
        ])?;
    }
    csv.flush()?;
    let d = res.diagnostics;
    write_json(
        &out.join("metrics.json"),
        &InferMetrics {
            command: "infer",
            method: method.name(),
            likelihood: likelihood_name(cfg),
            m: res.m,
            n: series.len(),
            nll: res.nll,
            runtime_ms: res.runtime_ms,
            clamped_sites: d.map(|d| d.clamped_sites),
            below_grid: d.map(|d| d.below_grid),
            above_grid: d.map(|d| d.above_grid),
        },
    )?;
    Ok(res)
}

/// Optimized hyperparameters as written to `theta.json`.
#[derive(Debug, Clone, Serialize)]
pub struct FitOutput {
    pub names: Vec<String>,
    /// Log-space parameters.
    pub theta: Vec<f64>,
    /// `exp(theta)`.
    pub natural: Vec<f64>,
    pub kernel: KernelConfig,
    pub noise_var: f64,
    pub nll: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub converged: bool,
    pub runtime_ms: f64,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub nll: f64,
    pub grad_norm: f64,
    pub step: f64,
}

impl From<&TraceEntry> for TraceRow {
    fn from(t: &TraceEntry) -> Self {
        TraceRow {
            iteration: t.iteration,
            nll: t.value,
            grad_norm: t.grad_norm,
            step: t.step,
        }
    }
}

/// Batch maximization of the steady-state marginal likelihood.
pub fn run_fit(cfg: &RunConfig, series: &Series) -> CliResult<FitOutput> {
    let dt = sampling_interval(cfg, series)?;
    let init = HyperParams::new(cfg.kernel_spec()?, cfg.gaussian_noise("fit")?)?;
    let start = Instant::now();
    let f = |th: &[f64]| objective(&init.with_theta(th)?, dt, &series.y);
    let res = minimize(f, init.theta(), &cfg.optimizer.into()).map_err(|e| CliError::Optimizer {
        iterations: 0,
        reason: e.to_string(),
    })?;
    let fitted = init.with_theta(&res.theta)?;
    Ok(FitOutput {
        names: fitted.names(),
        theta: res.theta.clone(),
        natural: fitted.natural(),
        kernel: KernelConfig::from_spec(fitted.spec()),
        noise_var: fitted.noise_var(),
        nll: res.value,
        grad: res.grad.clone(),
        iterations: res.iterations,
        accepted_steps: res.accepted_steps,
        converged: res.converged,
        runtime_ms: elapsed_ms(start),
        trace: res.trace.iter().map(TraceRow::from).collect(),
    })
}

pub fn cmd_fit(cfg: &RunConfig, data: &Path, out: &Path) -> CliResult<FitOutput> {
    let series = read_series(data)?;
    let res = run_fit(cfg, &series)?;
    ensure_dir(out)?;
    write_json(&out.join("theta.json"), &res)?;
    Ok(res)
}

/// One row of the online trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineRecord {
    pub step: usize,
    pub start: usize,
    /// Window NLL before the update.
    pub nll: f64,
    pub accepted: bool,
    /// Natural-scale parameters after the update.
    pub natural: Vec<f64>,
    pub step_ms: f64,
}

/// Rolling-window learning over `series`. With `out` set, writes
/// `theta_trajectory.csv` and `predictions.csv`, flushing after each step.
/// Predictions cover the observations that entered with each window and use
/// the parameters before that window's update.
pub fn run_online(cfg: &RunConfig, series: &Series, out: Option<&Path>) -> CliResult<Vec<OnlineRecord>> {
    let dt = sampling_interval(cfg, series)?;
    let oc = cfg.online()?;
    let params = HyperParams::new(cfg.kernel_spec()?, cfg.gaussian_noise("online")?)?;
    let names = params.names();
    let mut learner = OnlineLearner::new(
        params,
        dt,
        OnlineOptions {
            eta: oc.eta.clone(),
            window: oc.window,
            step: oc.step,
        },
    )?;
    let mut files = match out {
        Some(dir) => {
            ensure_dir(dir)?;
            let mut header = vec!["step", "start", "nll", "accepted", "step_ms"];
            header.extend(names.iter().map(String::as_str));
            let traj = CsvOut::create(&dir.join("theta_trajectory.csv"), &header, true)?;
            let pred = CsvOut::create(&dir.join("predictions.csv"), &["step", "t", "y", "mean", "var"], true)?;
            Some((traj, pred))
        }
        None => None,
    };
    let starts: Vec<usize> = learner.window_starts(series.len()).collect();
    if starts.is_empty() {
        return Err(CliError::Data(format!(
            "stream of {} observations is shorter than the window {}",
            series.len(),
            oc.window
        )));
    }
    let mut records = Vec::with_capacity(starts.len());
    let mut predicted_to = 0;
    for (j, &s) in starts.iter().enumerate() {
        let t0 = Instant::now();
        let window = &series.y[s..s + oc.window];
        let fresh = predicted_to.max(s)..s + oc.window;
        let post = if files.is_some() && !fresh.is_empty() {
            let p = learner.params();
            let model = build_model(p.spec(), dt)?;
            Some(ihgp_regression(&model, window, p.noise_var())?.marginals)
        } else {
            None
        };
        let step = learner.update(window)?;
        let rec = OnlineRecord {
            step: j,
            start: s,
            nll: step.nll,
            accepted: step.accepted,
            natural: learner.params().natural(),
            step_ms: elapsed_ms(t0),
        };
        if let Some((traj, pred)) = files.as_mut() {
            let mut row = vec![
                j.to_string(),
                s.to_string(),
                fmt(rec.nll),
                rec.accepted.to_string(),
                fmt(rec.step_ms),
            ];
            row.extend(rec.natural.iter().map(|v| fmt(*v)));
            traj.row(&row)?;
            if let Some(post) = post {
                for i in fresh.clone() {
                    pred.row([
                        j.to_string(),
                        fmt(series.t[i]),
                        fmt(series.y[i]),
                        fmt(post.mean[i - s]),
                        fmt(post.var[i - s]),
                    ])?;
                }
            }
        }
        predicted_to = fresh.end;
        records.push(rec);
    }
    Ok(records)
}

pub fn cmd_online(cfg: &RunConfig, data: &Path, out: &Path) -> CliResult<Vec<OnlineRecord>> {
    let series = read_series(data)?;
    run_online(cfg, &series, Some(out))
}

/// Binned counts with the fitted intensity.
#[derive(Debug, Clone)]
pub struct LgcpOutput {
    pub counts: BinnedCounts,
    pub posterior: IntensityPosterior,
    pub runtime_ms: f64,
}

pub fn run_lgcp(cfg: &RunConfig, events: &[f64], method: Method) -> CliResult<LgcpOutput> {
    let lc = cfg.lgcp()?;
    let spec = cfg.kernel_spec()?;
    let first = events.iter().copied().fold(f64::INFINITY, f64::min);
    let last = events.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let t0 = lc.t0.unwrap_or(first);
    let t1 = lc.t1.unwrap_or_else(|| {
        // Make the last event fall inside the right-open final bin.
        let bins = ((last - t0) / lc.bin_width).floor() + 1.0;
        t0 + bins * lc.bin_width
    });
    let counts = bin_events(events, t0, t1, lc.bin_width)?;
    let start = Instant::now();
    let posterior = fit_intensity(&counts, &spec, method == Method::Ihgp, cfg.grid.into())?;
    Ok(LgcpOutput {
        counts,
        posterior,
        runtime_ms: elapsed_ms(start),
    })
}

#[derive(Serialize)]
struct LgcpMetrics<'a> {
    command: &'a str,
    method: &'a str,
    events: usize,
    counted: f64,
    dropped: usize,
    bins: usize,
    bin_width: f64,
    nll: f64,
    runtime_ms: f64,
}

/// `intensity.csv` (`t,count,median,lower95,upper95`) and `metrics.json`.
pub fn cmd_lgcp(cfg: &RunConfig, data: &Path, out: &Path, method: Method) -> CliResult<LgcpOutput> {
    let events = read_events(data)?;
    let res = run_lgcp(cfg, &events, method)?;
    ensure_dir(out)?;
    let mut csv = CsvOut::create(
        &out.join("intensity.csv"),
        &["t", "count", "median", "lower95", "upper95"],
        false,
    )?;
    let p = &res.posterior;
    for i in 0..res.counts.len() {
        csv.row([
            fmt(p.t[i]),
            fmt(res.counts.y[i]),
            fmt(p.median[i]),
            fmt(p.lower95[i]),
            fmt(p.upper95[i]),
        ])?;
    }
    csv.flush()?;
    write_json(
        &out.join("metrics.json"),
        &LgcpMetrics {
            command: "lgcp",
            method: method.name(),
            events: events.len(),
            counted: res.counts.total(),
            dropped: res.counts.dropped,
            bins: res.counts.len(),
            bin_width: res.counts.bin_width,
            nll: -p.latent.log_lik,
            runtime_ms: res.runtime_ms,
        },
    )?;
    Ok(res)
}

/// Write the configured synthetic data set to `out/data.csv`.
pub fn cmd_gen(cfg: &RunConfig, out: &Path) -> CliResult<()> {
    ensure_dir(out)?;
    let path = out.join("data.csv");
    match cfg.generate()? {
        GenConfig::Sinc { n, mode } => write_series(&path, &gen_sinc(*n, cfg.seed, *mode)?),
        GenConfig::RegimeSwitch {
            n,
            dt,
            noise_var,
            switch_at,
            scale,
        } => {
            let spec = cfg.kernel_spec()?;
            let s = gen_regime_switch(&spec, *n, *dt, *noise_var, *switch_at, *scale, cfg.seed)?;
            write_series(&path, &s)
        }
        GenConfig::Events {
            t1,
            base,
            amplitude,
            period,
        } => {
            if amplitude.abs() > *base {
                return Err(CliError::Config(
                    "generate: |amplitude| must not exceed base".into(),
                ));
            }
            let events = gen_events(sinusoidal_rate(*base, *amplitude, *period), base + amplitude.abs(), *t1, cfg.seed)?;
            let mut csv = CsvOut::create(&path, &["t"], false)?;
            for t in events {
                csv.row([fmt(t)])?;
            }
            csv.flush()
        }
    }
}

/// Timing of one method at one state dimension.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub m: usize,
    pub method: &'static str,
    /// Median over repetitions.
    pub runtime_ms: f64,
    pub reps_ms: Vec<f64>,
    /// RMSE of the posterior mean against the exact smoother.
    pub rmse_vs_exact: f64,
    /// The same without the first and last 1% of points, where the
    /// approximation's boundary error concentrates.
    pub rmse_interior: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchOutput {
    pub n: usize,
    pub rows: Vec<BenchRow>,
    /// Least-squares slope of log runtime on log m, per method, over the
    /// sizes with `m ≥ 20` (all sizes when fewer than two qualify).
    pub slope_exact: f64,
    pub slope_ihgp: f64,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let k = s.len();
    if k % 2 == 1 {
        s[k / 2]
    } else {
        0.5 * (s[k / 2 - 1] + s[k / 2])
    }
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / k;
    let my = ly.iter().sum::<f64>() / k;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

fn slope_for(rows: &[BenchRow], method: &str) -> f64 {
    let pick = |min_m: usize| -> (Vec<f64>, Vec<f64>) {
        rows.iter()
            .filter(|r| r.method == method && r.m >= min_m)
            .map(|r| (r.m as f64, r.runtime_ms))
            .unzip()
    };
    let (mut x, mut y) = pick(20);
    if x.len() < 2 {
        (x, y) = pick(0);
    }
    if x.len() < 2 {
        return f64::NAN;
    }
    log_log_slope(&x, &y)
}

/// Time the exact smoother and the infinite-horizon approximation on the
/// sinc regression data with sums of `m / 2` Matérn(3/2) components.
/// `progress` is called after each completed size.
pub fn run_bench(cfg: &RunConfig, mut progress: impl FnMut(&BenchRow)) -> CliResult<BenchOutput> {
    let b = &cfg.bench;
    if b.reps == 0 || b.n < 2 {
        return Err(CliError::Config("bench: reps must be ≥ 1 and n ≥ 2".into()));
    }
    if let Some(m) = b.m.iter().find(|m| **m < 2 || *m % 2 == 1) {
        return Err(CliError::Config(format!("bench: state dimension {m} must be even and ≥ 2")));
    }
    let series = gen_sinc(b.n, cfg.seed, crate::config::SincMode::Regression)?;
    let mut rows = Vec::new();
    for &m in &b.m {
        let spec = KernelConfig::matern32_sum(m / 2).to_spec()?;
        let model = build_model(&spec, series.dt)?;
        let mut exact_ms = Vec::with_capacity(b.reps);
        let mut exact_mean = Vec::new();
        for _ in 0..b.reps {
            let start = Instant::now();
            let post = gaussian_posterior(&model, &series.y, b.noise_var)?;
            exact_ms.push(elapsed_ms(start));
            exact_mean = post.mean;
        }
        let mut ihgp_ms = Vec::with_capacity(b.reps);
        let mut ihgp_mean = Vec::new();
        for _ in 0..b.reps {
            let start = Instant::now();
            let post = ihgp_regression(&model, &series.y, b.noise_var)?;
            ihgp_ms.push(elapsed_ms(start));
            ihgp_mean = post.marginals.mean;
        }
        let whole = rmse(&exact_mean, &ihgp_mean);
        let edge = b.n / 100;
        let inner = rmse(&exact_mean[edge..b.n - edge], &ihgp_mean[edge..b.n - edge]);
        for (method, reps, err, err_inner) in [("exact", exact_ms, 0.0, 0.0), ("ihgp", ihgp_ms, whole, inner)] {
            let row = BenchRow {
                m,
                method,
                runtime_ms: median(&reps),
                reps_ms: reps,
                rmse_vs_exact: err,
                rmse_interior: err_inner,
            };
            progress(&row);
            rows.push(row);
        }
    }
    Ok(BenchOutput {
        n: b.n,
        slope_exact: slope_for(&rows, "exact"),
        slope_ihgp: slope_for(&rows, "ihgp"),
        rows,
    })
}

/// `bench.csv` (`m,method,runtime_ms,rmse_vs_exact`, one row per size and
/// method, flushed as it completes) and `metrics.json`.
pub fn cmd_bench(cfg: &RunConfig, out: &Path) -> CliResult<BenchOutput> {
    ensure_dir(out)?;
    let mut csv = CsvOut::create(
        &out.join("bench.csv"),
        &["m", "method", "runtime_ms", "rmse_vs_exact"],
        true,
    )?;
    let mut write_err = None;
    let res = run_bench(cfg, |r| {
        if write_err.is_none() {
            write_err = csv
                .row([r.m.to_string(), r.method.to_string(), fmt(r.runtime_ms), fmt(r.rmse_vs_exact)])
                .err();
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    #[derive(Serialize)]
    struct Metrics<'a> {
        command: &'a str,
        #[serde(flatten)]
        bench: &'a BenchOutput,
    }
    write_json(
        &out.join("metrics.json"),
        &Metrics {
            command: "bench",
            bench: &res,
        },
    )?;
    Ok(res)
}
