// SPDX-License-Identifier: MIT OR Apache-2.0

//! Scaled replication experiments: size and power, quantile-approximation
//! fidelity, multiple change-point localization, and naive-versus-fast timing.
//!
//! Replicate `r` of every cell draws its data from seed `mix_seed(seed, r)`.
//! Because subjects have their own random streams, cells that differ only in
//! `n` share their first subjects, and cells that differ only in the signal
//! share their innovations.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::changepoint::binary_segmentation;
use crate::data::{FunctionalSample, TestConfig};
use crate::datagen::{first_change, gen_ma_process, single_change_design, two_change_design, Design};
use crate::detection::{QuantileMode, WindowAnalysis};
use crate::error::{Error, Result};
use crate::estimator::fast::WindowKernel;
use crate::estimator::oracle::{covariance_naive, dhat_naive};
use crate::numeric::least_squares_line;
use crate::rng::mix_seed;

const TEST_SEED_SALT: u64 = 0x7e57;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Size,
    Power,
    Approx,
    Localization,
    #[serde(rename = "timing-T")]
    TimingT,
    #[serde(rename = "timing-n")]
    TimingN,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Size,
        Suite::Power,
        Suite::Approx,
        Suite::Localization,
        Suite::TimingT,
        Suite::TimingN,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Size => "size",
            Suite::Power => "power",
            Suite::Approx => "approx",
            Suite::Localization => "localization",
            Suite::TimingT => "timing-T",
            Suite::TimingN => "timing-n",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                Error::Config(format!("unknown suite '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Desk,
    Full,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(Error::Config(format!("unknown scale '{s}' (expected desk or full)"))),
        }
    }
}

/// Repetition policy for timing cells.
///
/// A first run is always made. If `warmups + reps` runs fit in `budget_secs`
/// the first run and `warmups - 1` more are discarded and `reps` runs are
/// timed. Otherwise `max(min_reps, budget / first)` runs are timed and the
/// first run counts as one of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingPolicy {
    pub warmups: usize,
    pub reps: usize,
    pub min_reps: usize,
    pub budget_secs: f64,
}

impl Default for TimingPolicy {
    fn default() -> Self {
        Self {
            warmups: 2,
            reps: 20,
            min_reps: 3,
            budget_secs: 60.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub suite: Suite,
    pub scale: Scale,
    pub n: Vec<usize>,
    pub p: Vec<usize>,
    pub t: Vec<usize>,
    /// `delta` for detection suites, `delta_star` for localization.
    pub signal: Vec<f64>,
    pub replicates: usize,
    pub modes: Vec<QuantileMode>,
    pub seed: u64,
    pub config: TestConfig,
    pub timing: TimingPolicy,
}

impl ExperimentGrid {
    /// The grid used for `suite` at `scale`.
    pub fn preset(suite: Suite, scale: Scale, seed: u64) -> Self {
        let full = scale == Scale::Full;
        let big_p = if full { vec![500, 750, 1000] } else { vec![100] };
        let big_n = vec![40, 50, 60];
        let config = TestConfig {
            seed,
            ..TestConfig::default()
        };
        let mut g = Self {
            suite,
            scale,
            n: vec![40],
            p: vec![100],
            t: vec![30],
            signal: vec![0.0],
            replicates: if full { 500 } else { 200 },
            modes: vec![QuantileMode::Exact],
            seed,
            config,
            timing: TimingPolicy::default(),
        };
        match suite {
            Suite::Size => {
                if full {
                    (g.n, g.p, g.t) = (big_n, big_p, vec![50, 100]);
                }
            }
            Suite::Power => {
                g.n = big_n;
                g.signal = vec![0.025, 0.05, 0.10];
                if full {
                    (g.p, g.t) = (big_p, vec![50, 100]);
                }
            }
            Suite::Approx => {
                g.modes = vec![
                    QuantileMode::Exact,
                    QuantileMode::Banded { b: 5, w: 5 },
                    QuantileMode::Banded { b: 5, w: 10 },
                    QuantileMode::Banded { b: 5, w: 20 },
                ];
                if full {
                    g.signal = vec![0.0, 0.025, 0.05, 0.10];
                    (g.n, g.p, g.t) = (big_n, big_p, vec![100]);
                }
            }
            Suite::Localization => {
                g.t = vec![50];
                g.signal = vec![0.15, 0.25, 0.35];
                g.replicates = 100;
                if full {
                    (g.n, g.p, g.t) = (big_n, big_p, vec![50, 100, 150]);
                }
            }
            Suite::TimingT => {
                (g.n, g.p, g.replicates) = (vec![4], vec![1], 1);
                g.t = if full {
                    vec![50, 75, 100, 125, 150]
                } else {
                    vec![20, 30, 40, 60]
                };
            }
            Suite::TimingN => {
                (g.n, g.p, g.t, g.replicates) = (vec![30, 60, 90, 120, 150], vec![1], vec![2], 1);
            }
        }
        g
    }

    pub fn check(&self) -> Result<()> {
        let mut problems = self.config.problems();
        if self.n.is_empty() || self.p.is_empty() || self.t.is_empty() || self.signal.is_empty() {
            problems.push("grid axes must be nonempty".into());
        }
        if self.replicates < 1 {
            problems.push("replicates >= 1 required".into());
        }
        if self.modes.is_empty() {
            problems.push("at least one quantile mode required".into());
        }
        if self.n.iter().any(|&n| n < 4) {
            problems.push("every n must be >= 4".into());
        }
        if self.t.iter().any(|&t| t < 2) {
            problems.push("every T must be >= 2".into());
        }
        if self.timing.reps < 1 || self.timing.min_reps < 1 || self.timing.budget_secs.is_nan() || self.timing.budget_secs <= 0.0 {
            problems.push("timing policy needs reps >= 1, min_reps >= 1, budget > 0".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// Data seed of replicate `r`.
    pub fn data_seed(&self, r: usize) -> u64 {
        mix_seed(self.seed, r as u64)
    }

    /// Test configuration of replicate `r`.
    pub fn replicate_config(&self, r: usize) -> TestConfig {
        TestConfig {
            seed: mix_seed(self.seed ^ TEST_SEED_SALT, r as u64),
            ..self.config.clone()
        }
    }
}

/// One row of the report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub n: usize,
    pub p: usize,
    pub t: usize,
    pub signal: f64,
    pub mode: String,
    pub replicates: usize,
    pub rejection_rate: Option<f64>,
    pub rejection_se: Option<f64>,
    pub atp: Option<f64>,
    pub atp_se: Option<f64>,
    pub atn: Option<f64>,
    pub atn_se: Option<f64>,
    pub kernel: Option<String>,
    pub median_seconds: Option<f64>,
    pub timed_runs: Option<usize>,
    pub wall_seconds: f64,
}

impl CellResult {
    fn new(n: usize, p: usize, t: usize, signal: f64, mode: String, replicates: usize) -> Self {
        Self {
            n,
            p,
            t,
            signal,
            mode,
            replicates,
            rejection_rate: None,
            rejection_se: None,
            atp: None,
            atp_se: None,
            atn: None,
            atn_se: None,
            kernel: None,
            median_seconds: None,
            timed_runs: None,
            wall_seconds: 0.0,
        }
    }
}

/// Banded-versus-exact comparison on identical replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Agreement {
    pub n: usize,
    pub p: usize,
    pub t: usize,
    pub signal: f64,
    pub mode: String,
    pub agreement: f64,
    pub rate_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub kernel: String,
    pub axis: String,
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub suite: Suite,
    pub provenance: String,
    pub grid: ExperimentGrid,
    pub cells: Vec<CellResult>,
    /// Per-cell replicate decisions (detection suites), aligned with `cells`.
    pub decisions: Vec<Vec<bool>>,
    pub agreement: Vec<Agreement>,
    pub slopes: Vec<SlopeFit>,
    /// Naive-over-fast median ratio at the largest swept size.
    pub speedup_at_max: Option<f64>,
}

impl ExperimentReport {
    fn new(grid: &ExperimentGrid) -> Self {
        Self {
            suite: grid.suite,
            provenance: provenance(grid),
            grid: grid.clone(),
            cells: Vec::new(),
            decisions: Vec::new(),
            agreement: Vec::new(),
            slopes: Vec::new(),
            speedup_at_max: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for c in &self.cells {
            w.serialize(c).map_err(|e| Error::Format(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }

    /// Writes `<dir>/<suite>.json` and `<dir>/<suite>.csv`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join(format!("{}.json", self.suite));
        std::fs::write(&json, self.to_json()).map_err(|e| Error::io(&json, e))?;
        let csv_path = dir.join(format!("{}.csv", self.suite));
        let f = std::fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Cell matching the given coordinates and mode label.
    pub fn cell(&self, n: usize, t: usize, signal: f64, mode: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.n == n && c.t == t && c.signal == signal && c.mode == mode)
    }
}

/// `fdcov-<version>+<first 12 hex digits of sha256(grid json)>`.
pub fn provenance(grid: &ExperimentGrid) -> String {
    let json = serde_json::to_vec(grid).expect("grid serializes");
    let digest = Sha256::digest(&json);
    format!("fdcov-{}+{}", env!("CARGO_PKG_VERSION"), &hex::encode(digest)[..12])
}

pub fn mode_label(mode: QuantileMode) -> String {
    match mode {
        QuantileMode::Exact => "exact".into(),
        QuantileMode::Banded { b, w } => format!("banded(b={b},w={w})"),
    }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn cells_of(grid: &ExperimentGrid) -> Vec<(usize, usize, usize, f64)> {
    let mut out = Vec::new();
    for &t in &grid.t {
        for &p in &grid.p {
            for &n in &grid.n {
                for &s in &grid.signal {
                    out.push((n, p, t, s));
                }
            }
        }
    }
    out
}

/// Rejection rates of the single-change design; every mode is evaluated on
/// the same replicates.
pub fn run_size_power_experiment(grid: &ExperimentGrid) -> Result<ExperimentReport> {
    grid.check()?;
    let mut report = ExperimentReport::new(grid);
    for (n, p, t, delta) in cells_of(grid) {
        let start = Instant::now();
        let per_rep: Vec<Vec<bool>> = (0..grid.replicates)
            .into_par_iter()
            .map(|r| -> Result<Vec<bool>> {
                let sample = gen_ma_process(&single_change_design(n, t, p, delta, grid.data_seed(r))?)?;
                let analysis = WindowAnalysis::new(&sample.full_window())?;
                let cfg = grid.replicate_config(r);
                grid.modes
                    .iter()
                    .map(|&m| Ok(analysis.test(&cfg, m)?.reject))
                    .collect()
            })
            .collect::<Result<_>>()?;
        let wall = start.elapsed().as_secs_f64();
        let base = report.cells.len();
        for (k, &mode) in grid.modes.iter().enumerate() {
            let decisions: Vec<bool> = per_rep.iter().map(|d| d[k]).collect();
            let rate = decisions.iter().filter(|&&x| x).count() as f64 / grid.replicates as f64;
            let mut cell = CellResult::new(n, p, t, delta, mode_label(mode), grid.replicates);
            cell.rejection_rate = Some(rate);
            cell.rejection_se = Some((rate * (1.0 - rate) / grid.replicates as f64).sqrt());
            cell.wall_seconds = wall;
            info!("{} n={n} p={p} T={t} signal={delta} {}: rate {rate:.3}", grid.suite, cell.mode);
            report.cells.push(cell);
            report.decisions.push(decisions);
        }
        if let Some(exact) = grid.modes.iter().position(|&m| m == QuantileMode::Exact) {
            for (k, &mode) in grid.modes.iter().enumerate().filter(|&(k, _)| k != exact) {
                let (a, b) = (&report.decisions[base + exact], &report.decisions[base + k]);
                let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
                report.agreement.push(Agreement {
                    n,
                    p,
                    t,
                    signal: delta,
                    mode: mode_label(mode),
                    agreement: same as f64 / grid.replicates as f64,
                    rate_difference: report.cells[base + k].rejection_rate.unwrap()
                        - report.cells[base + exact].rejection_rate.unwrap(),
                });
            }
        }
    }
    Ok(report)
}

/// Average true positives and negatives of binary segmentation on the
/// two-change design.
pub fn run_atp_atn_experiment(grid: &ExperimentGrid) -> Result<ExperimentReport> {
    grid.check()?;
    let mut report = ExperimentReport::new(grid);
    for (n, p, t, delta_star) in cells_of(grid) {
        let start = Instant::now();
        let tau1 = first_change(t);
        let truth = [tau1, tau1 + 2];
        let counts: Vec<(f64, f64)> = (0..grid.replicates)
            .into_par_iter()
            .map(|r| -> Result<(f64, f64)> {
                let sample = gen_ma_process(&two_change_design(n, t, p, delta_star, grid.data_seed(r))?)?;
                let result = binary_segmentation(&sample, &grid.replicate_config(r))?;
                let hits = result.change_points.iter().filter(|c| truth.contains(c)).count();
                let false_pos = result.change_points.len() - hits;
                Ok((hits as f64, (t - 3 - false_pos) as f64))
            })
            .collect::<Result<_>>()?;
        let (atp, atp_se) = mean_se(&counts.iter().map(|c| c.0).collect::<Vec<_>>());
        let (atn, atn_se) = mean_se(&counts.iter().map(|c| c.1).collect::<Vec<_>>());
        let mut cell = CellResult::new(n, p, t, delta_star, mode_label(QuantileMode::for_window(&grid.config, t)), grid.replicates);
        (cell.atp, cell.atp_se, cell.atn, cell.atn_se) = (Some(atp), Some(atp_se), Some(atn), Some(atn_se));
        cell.wall_seconds = start.elapsed().as_secs_f64();
        info!("localization n={n} p={p} T={t} signal={delta_star}: ATP {atp:.3} ATN {atn:.3}");
        report.cells.push(cell);
    }
    Ok(report)
}

/// Kernel compared by the timing suites. Both produce the distance process
/// and the full covariance matrix of the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kernel {
    Naive,
    Fast,
}

impl Kernel {
    pub fn name(self) -> &'static str {
        match self {
            Kernel::Naive => "naive",
            Kernel::Fast => "fast",
        }
    }

    /// One full evaluation; returns `(dhat, covariance diagonal)`.
    pub fn run(self, sample: &FunctionalSample) -> Result<(Vec<f64>, Vec<f64>)> {
        let w = sample.full_window();
        match self {
            Kernel::Naive => {
                let dhat = dhat_naive(&w)?;
                let cov = covariance_naive(&w)?;
                Ok((dhat, cov.diagonal().iter().copied().collect()))
            }
            Kernel::Fast => {
                let k = WindowKernel::new(&w)?;
                let cov = k.covariance_matrix();
                Ok((k.dhat(), cov.diagonal().iter().copied().collect()))
            }
        }
    }
}

/// Median seconds and number of timed runs under `policy`.
pub fn time_kernel(kernel: Kernel, sample: &FunctionalSample, policy: &TimingPolicy) -> Result<(f64, usize)> {
    let once = || -> Result<f64> {
        let start = Instant::now();
        std::hint::black_box(kernel.run(sample)?);
        Ok(start.elapsed().as_secs_f64())
    };
    let first = once()?;
    let mut times = Vec::new();
    if first * (policy.warmups + policy.reps) as f64 <= policy.budget_secs {
        for _ in 1..policy.warmups {
            once()?;
        }
        for _ in 0..policy.reps {
            times.push(once()?);
        }
    } else {
        let runs = ((policy.budget_secs / first) as usize).clamp(policy.min_reps, policy.reps);
        times.push(first);
        for _ in 1..runs {
            times.push(once()?);
        }
    }
    times.sort_by(f64::total_cmp);
    let k = times.len();
    let median = if k % 2 == 1 {
        times[k / 2]
    } else {
        0.5 * (times[k / 2 - 1] + times[k / 2])
    };
    Ok((median, k))
}

/// Naive versus fast kernel on white-noise data, one worker, cells in series.
pub fn run_timing_benchmark(grid: &ExperimentGrid) -> Result<ExperimentReport> {
    grid.check()?;
    let axis = match grid.suite {
        Suite::TimingN => "n",
        _ => "T",
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
    let mut report = ExperimentReport::new(grid);
    pool.install(|| -> Result<()> {
        for (n, p, t, _) in cells_of(grid).into_iter().filter(|c| c.3 == grid.signal[0]) {
            let sample = gen_ma_process(&Design::White { n, t, p, lag: 0, seed: grid.data_seed(0) }.spec()?)?;
            for kernel in [Kernel::Naive, Kernel::Fast] {
                let start = Instant::now();
                let (median, runs) = time_kernel(kernel, &sample, &grid.timing)?;
                let mut cell = CellResult::new(n, p, t, 0.0, "-".into(), 1);
                cell.kernel = Some(kernel.name().into());
                cell.median_seconds = Some(median);
                cell.timed_runs = Some(runs);
                cell.wall_seconds = start.elapsed().as_secs_f64();
                info!("{} n={n} T={t} {}: median {median:.6}s over {runs} runs", grid.suite, kernel.name());
                report.cells.push(cell);
            }
        }
        Ok(())
    })?;
    let size = |c: &CellResult| if axis == "n" { c.n } else { c.t } as f64;
    for kernel in [Kernel::Naive, Kernel::Fast] {
        let pts: Vec<&CellResult> = report
            .cells
            .iter()
            .filter(|c| c.kernel.as_deref() == Some(kernel.name()))
            .collect();
        if pts.len() >= 2 {
            let x: Vec<f64> = pts.iter().map(|c| size(c).ln()).collect();
            let y: Vec<f64> = pts.iter().map(|c| c.median_seconds.unwrap().ln()).collect();
            let (slope, intercept) = least_squares_line(&x, &y);
            report.slopes.push(SlopeFit {
                kernel: kernel.name().into(),
                axis: axis.into(),
                slope,
                intercept,
            });
        }
    }
    let largest = report.cells.iter().map(|c| size(c) as usize).max();
    if let Some(m) = largest {
        let med = |k: Kernel| {
            report
                .cells
                .iter()
                .find(|c| size(c) as usize == m && c.kernel.as_deref() == Some(k.name()))
                .and_then(|c| c.median_seconds)
        };
        if let (Some(a), Some(b)) = (med(Kernel::Naive), med(Kernel::Fast)) {
            report.speedup_at_max = Some(a / b);
        }
    }
    Ok(report)
}

/// Dispatches on `grid.suite`.
pub fn run(grid: &ExperimentGrid) -> Result<ExperimentReport> {
    match grid.suite {
        Suite::Size | Suite::Power | Suite::Approx => run_size_power_experiment(grid),
        Suite::Localization => run_atp_atn_experiment(grid),
        Suite::TimingT | Suite::TimingN => run_timing_benchmark(grid),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(suite: Suite) -> ExperimentGrid {
        let mut g = ExperimentGrid::preset(suite, Scale::Desk, 3);
        g.config.mc_reps = 200;
        g
    }

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
            assert_eq!(serde_json::to_value(s).unwrap(), s.name());
        }
        assert!(matches!("tables".parse::<Suite>(), Err(Error::Config(_))));
        assert!("FULL".parse::<Scale>().is_ok());
    }

    #[test]
    fn size_report_is_reproducible() {
        let mut g = tiny(Suite::Approx);
        (g.n, g.p, g.t, g.replicates) = (vec![8], vec![6], vec![12], 6);
        g.modes = vec![QuantileMode::Exact, QuantileMode::Banded { b: 2, w: 3 }];
        let a = run(&g).unwrap();
        let b = run(&g).unwrap();
        assert_eq!(a.cells.len(), 2);
        assert_eq!(a.decisions, b.decisions);
        assert_eq!(a.provenance, b.provenance);
        assert_eq!(a.agreement.len(), 1);
        let rate = a.cells[0].rejection_rate.unwrap();
        assert!((0.0..=1.0).contains(&rate) && a.cells[0].rejection_se.unwrap() >= 0.0);
        let mut csv = Vec::new();
        a.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("n,p,t,signal,mode,replicates,rejection_rate"));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn provenance_tracks_grid() {
        let g = tiny(Suite::Size);
        let mut h = g.clone();
        h.replicates += 1;
        assert_ne!(provenance(&g), provenance(&h));
        assert!(provenance(&g).starts_with("fdcov-"));
    }

    #[test]
    fn localization_counts() {
        let mut g = tiny(Suite::Localization);
        (g.n, g.p, g.t, g.signal, g.replicates) = (vec![20], vec![10], vec![14], vec![0.0], 3);
        let r = run(&g).unwrap();
        let c = &r.cells[0];
        assert!(c.atp.unwrap() >= 0.0 && c.atp.unwrap() <= 2.0);
        assert!(c.atn.unwrap() <= 11.0);
    }

    #[test]
    fn timing_tiny_cell_agrees() {
        let s = gen_ma_process(&Design::White { n: 4, t: 2, p: 1, lag: 0, seed: 1 }.spec().unwrap()).unwrap();
        let (d1, v1) = Kernel::Naive.run(&s).unwrap();
        let (d2, v2) = Kernel::Fast.run(&s).unwrap();
        assert!((d1[0] - d2[0]).abs() <= 1e-9 * (1.0 + d1[0].abs()));
        assert!((v1[0] - v2[0]).abs() <= 1e-9 * (1.0 + v1[0].abs()));
        let mut g = tiny(Suite::TimingT);
        g.t = vec![3, 5];
        g.timing = TimingPolicy {
            warmups: 1,
            reps: 3,
            min_reps: 1,
            budget_secs: 10.0,
        };
        let r = run(&g).unwrap();
        assert_eq!(r.cells.len(), 4);
        assert_eq!(r.slopes.len(), 2);
        assert!(r.speedup_at_max.unwrap() > 0.0);
    }
}
