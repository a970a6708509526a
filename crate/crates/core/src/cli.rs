// SPDX-License-Identifier: MIT OR Apache-2.0

//! `fdcov` command-line front end.
//!
//! Subcommands: `detect`, `identify`, `simulate`, `bench`. Reports go to
//! stdout as JSON; logs and diagnostics go to stderr. Exit codes: 0 success,
//! 2 invalid input, 3 configuration error, 4 numerical failure.
//!
//! `--config FILE` reads flat `key = value` lines (`#` starts a comment).
//! Keys mirror the long flags with `-` or `_`; flags override file values.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::bench::{self, ExperimentGrid, Scale, Suite};
use crate::changepoint::binary_segmentation;
use crate::data::{load_sample, write_fdt1};
use crate::data::{validate, FunctionalSample, TestConfig};
use crate::datagen::{gen_ma_process, Design};
use crate::detection::{QuantileMode, WindowAnalysis};
use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "fdcov", version, about = "Covariance homogeneity tests and change-point identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Nominal test level.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Monte-Carlo replicates for the null quantiles.
    #[arg(long, global = true)]
    mc_reps: Option<usize>,
    /// Off-diagonals of the correlation matrix computed exactly.
    #[arg(long, global = true)]
    band_b: Option<usize>,
    /// Trailing components per row computed exactly.
    #[arg(long, global = true)]
    tail_w: Option<usize>,
    /// Compute every correlation entry exactly.
    #[arg(long, global = true)]
    exact_quantiles: bool,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    min_segment: Option<usize>,
    #[arg(long, global = true)]
    cluster_gap: Option<usize>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (`simulate`: output file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Test covariance homogeneity over the whole sample.
    Detect { input: PathBuf },
    /// Locate all change points by binary segmentation.
    Identify { input: PathBuf },
    /// Generate a synthetic sample and write it as FDT1.
    Simulate {
        /// white, single_change or two_change.
        #[arg(long)]
        design: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        n: Option<String>,
        #[arg(long = "T", alias = "t", allow_hyphen_values = true)]
        t: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        p: Option<String>,
        /// Moving-average order (white design only).
        #[arg(long = "L", alias = "lag", allow_hyphen_values = true)]
        lag: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        delta_star: Option<String>,
    },
    /// Run a replication experiment.
    Bench {
        /// size, power, approx, localization, timing-T or timing-n.
        #[arg(long)]
        suite: Option<String>,
        /// desk or full.
        #[arg(long)]
        scale: Option<String>,
        #[arg(long)]
        replicates: Option<usize>,
    },
}

/// Effective settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<PathBuf>,
    pub config: TestConfig,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Subcommand-specific settings not covered by [`TestConfig`].
    pub settings: BTreeMap<String, String>,
}

const CONFIG_KEYS: [&str; 9] = [
    "alpha",
    "mc_reps",
    "band_b",
    "tail_w",
    "exact_quantiles",
    "seed",
    "min_segment",
    "cluster_gap",
    "threads",
];
const SETTING_KEYS: [&str; 11] = [
    "out", "design", "n", "t", "p", "lag", "delta", "delta_star", "suite", "scale", "replicates",
];

fn normalize_key(k: &str) -> String {
    let k = k.trim().to_ascii_lowercase().replace('-', "_");
    match k.as_str() {
        "l" => "lag".into(),
        _ => k,
    }
}

/// Parses a flat `key = value` file. A JSON object (a bare config or any
/// report with an embedded `config`) is accepted too.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    if text.trim_start().starts_with('{') {
        return parse_config_json(text);
    }
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
        let key = normalize_key(k);
        if !CONFIG_KEYS.contains(&key.as_str()) && !SETTING_KEYS.contains(&key.as_str()) && key != "approx_enabled" {
            return Err(Error::Config(format!("line {}: unknown key '{}'", no + 1, k.trim())));
        }
        if out.insert(key, v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key '{}'", no + 1, k.trim())));
        }
    }
    Ok(out)
}

fn parse_config_json(text: &str) -> Result<BTreeMap<String, String>> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config JSON: {e}")))?;
    let obj = match value.get("config").unwrap_or(&value) {
        serde_json::Value::Object(obj) => obj.clone(),
        _ => return Err(Error::Config("config JSON must be an object".into())),
    };
    let mut out = BTreeMap::new();
    for (k, v) in obj {
        let key = normalize_key(&k);
        if !CONFIG_KEYS.contains(&key.as_str()) && key != "approx_enabled" {
            return Err(Error::Config(format!("unknown config key '{k}'")));
        }
        let v = match v {
            serde_json::Value::String(s) => s,
            serde_json::Value::Number(_) | serde_json::Value::Bool(_) => v.to_string(),
            _ => return Err(Error::Config(format!("config key '{k}' must be a scalar"))),
        };
        out.insert(key, v);
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{v}' for {key}"))),
    }
}

fn apply_config_key(cfg: &mut TestConfig, threads: &mut Option<usize>, key: &str, v: &str) -> Result<()> {
    match key {
        "alpha" => cfg.alpha = parse_value(key, v)?,
        "mc_reps" => cfg.mc_reps = parse_value(key, v)?,
        "band_b" => cfg.band_b = parse_value(key, v)?,
        "tail_w" => cfg.tail_w = parse_value(key, v)?,
        "exact_quantiles" => cfg.approx_enabled = !parse_bool(key, v)?,
        "approx_enabled" => cfg.approx_enabled = parse_bool(key, v)?,
        "seed" => cfg.seed = parse_value(key, v)?,
        "min_segment" => cfg.min_segment = parse_value(key, v)?,
        "cluster_gap" => cfg.cluster_gap = parse_value(key, v)?,
        "threads" => *threads = Some(parse_value(key, v)?),
        _ => unreachable!("caller filters keys"),
    }
    Ok(())
}

fn build_manifest(cli: &Cli) -> Result<RunManifest> {
    let c = &cli.common;
    let file = match &c.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    let mut config = TestConfig::default();
    let mut threads = None;
    let mut settings = BTreeMap::new();
    for (k, v) in &file {
        if CONFIG_KEYS.contains(&k.as_str()) || k == "approx_enabled" {
            apply_config_key(&mut config, &mut threads, k, v)?;
        } else {
            settings.insert(k.clone(), v.clone());
        }
    }
    if let Some(x) = c.alpha {
        config.alpha = x;
    }
    if let Some(x) = c.mc_reps {
        config.mc_reps = x;
    }
    if let Some(x) = c.band_b {
        config.band_b = x;
    }
    if let Some(x) = c.tail_w {
        config.tail_w = x;
    }
    if c.exact_quantiles {
        config.approx_enabled = false;
    }
    if let Some(x) = c.seed {
        config.seed = x;
    }
    if let Some(x) = c.min_segment {
        config.min_segment = x;
    }
    if let Some(x) = c.cluster_gap {
        config.cluster_gap = x;
    }
    if c.threads.is_some() {
        threads = c.threads;
    }
    let mut put = |k: &str, v: &Option<String>| {
        if let Some(v) = v {
            settings.insert(k.to_string(), v.clone());
        }
    };
    let (subcommand, inputs) = match &cli.command {
        Command::Detect { input } => ("detect", vec![input.clone()]),
        Command::Identify { input } => ("identify", vec![input.clone()]),
        Command::Simulate {
            design,
            n,
            t,
            p,
            lag,
            delta,
            delta_star,
        } => {
            for (k, v) in [
                ("design", design),
                ("n", n),
                ("t", t),
                ("p", p),
                ("lag", lag),
                ("delta", delta),
                ("delta_star", delta_star),
            ] {
                put(k, v);
            }
            ("simulate", Vec::new())
        }
        Command::Bench {
            suite,
            scale,
            replicates,
        } => {
            put("suite", suite);
            put("scale", scale);
            put("replicates", &replicates.map(|r| r.to_string()));
            ("bench", Vec::new())
        }
    };
    let out = c
        .out
        .clone()
        .or_else(|| settings.remove("out").map(PathBuf::from));
    settings.remove("out");
    if threads == Some(0) {
        return Err(Error::Config("threads must be >= 1".into()));
    }
    config.check()?;
    Ok(RunManifest {
        subcommand: subcommand.into(),
        inputs,
        config,
        out,
        threads,
        settings,
    })
}

fn load_checked(path: &Path, cfg: &TestConfig, segmenting: bool) -> Result<FunctionalSample> {
    let sample = load_sample(path)?;
    let verdict = validate(&sample, cfg);
    if !verdict.sample.is_empty() {
        return Err(Error::InvalidInput(verdict.sample.join("; ")));
    }
    if segmenting && !verdict.config.is_empty() {
        return Err(Error::Config(verdict.config.join("; ")));
    }
    Ok(sample)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

/// Runs `detect`; returns the JSON report.
pub fn cmd_detect(m: &RunManifest) -> Result<String> {
    let sample = load_checked(&m.inputs[0], &m.config, false)?;
    let window = sample.full_window();
    let analysis = WindowAnalysis::new(&window)?;
    let mode = QuantileMode::for_window(&m.config, window.len());
    let report = analysis.test(&m.config, mode)?;
    info!("detect: m_n = {:.4}, p = {:.4}", report.m_n, report.p_value);
    let json = to_json(&report);
    if let Some(dir) = &m.out {
        create_dir(dir)?;
        write_text(&dir.join("detect.json"), &json)?;
        report.process.save_csv(dir.join("process.csv"))?;
        analysis.model(mode)?.save_csv(dir.join("correlation.csv"))?;
    }
    Ok(json)
}

/// Runs `identify`; returns the JSON segmentation result.
pub fn cmd_identify(m: &RunManifest) -> Result<String> {
    let sample = load_checked(&m.inputs[0], &m.config, true)?;
    let result = binary_segmentation(&sample, &m.config)?;
    info!("identify: {} change points", result.change_points.len());
    let json = to_json(&result);
    if let Some(dir) = &m.out {
        create_dir(dir)?;
        write_text(&dir.join("identify.json"), &json)?;
    }
    Ok(json)
}

fn setting<T: std::str::FromStr>(m: &RunManifest, key: &str) -> Result<T> {
    let v = m
        .settings
        .get(key)
        .ok_or_else(|| Error::Config(format!("missing setting '{key}'")))?;
    parse_value(key, v)
}

/// Design described by the manifest's simulation settings.
pub fn design_from_manifest(m: &RunManifest) -> Result<Design> {
    let kind = m
        .settings
        .get("design")
        .ok_or_else(|| Error::Config("missing setting 'design'".into()))?;
    let (n, t, p, seed) = (setting(m, "n")?, setting(m, "t")?, setting(m, "p")?, m.config.seed);
    match kind.as_str() {
        "white" => Ok(Design::White {
            n,
            t,
            p,
            lag: if m.settings.contains_key("lag") { setting(m, "lag")? } else { 0 },
            seed,
        }),
        "single_change" | "single-change" => Ok(Design::SingleChange {
            n,
            t,
            p,
            delta: setting(m, "delta")?,
            seed,
        }),
        "two_change" | "two-change" => Ok(Design::TwoChange {
            n,
            t,
            p,
            delta_star: setting(m, "delta_star")?,
            seed,
        }),
        other => Err(Error::Config(format!(
            "unknown design '{other}' (expected white, single_change or two_change)"
        ))),
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    path: PathBuf,
    spec_path: PathBuf,
    n: usize,
    t: usize,
    p: usize,
    design: Design,
}

/// Runs `simulate`; writes the FDT1 file and a `.spec.json` sidecar.
pub fn cmd_simulate(m: &RunManifest) -> Result<String> {
    let path = m
        .out
        .clone()
        .ok_or_else(|| Error::Config("simulate needs --out FILE".into()))?;
    let design = design_from_manifest(m)?;
    let sample = gen_ma_process(&design.spec()?)?;
    write_fdt1(&sample, &path)?;
    let mut spec_path = path.clone().into_os_string();
    spec_path.push(".spec.json");
    let spec_path = PathBuf::from(spec_path);
    write_text(&spec_path, &to_json(&design))?;
    Ok(to_json(&SimulationSummary {
        path,
        spec_path,
        n: sample.n(),
        t: sample.t(),
        p: sample.p(),
        design,
    }))
}

/// Runs `bench`; returns the JSON experiment report.
pub fn cmd_bench(m: &RunManifest) -> Result<String> {
    let suite: Suite = m
        .settings
        .get("suite")
        .ok_or_else(|| Error::Config("bench needs --suite".into()))?
        .parse()?;
    let scale: Scale = match m.settings.get("scale") {
        Some(s) => s.parse()?,
        None => Scale::Desk,
    };
    let mut grid = ExperimentGrid::preset(suite, scale, m.config.seed);
    grid.config = m.config.clone();
    if m.settings.contains_key("replicates") {
        grid.replicates = setting(m, "replicates")?;
    }
    let report = bench::run(&grid)?;
    if let Some(dir) = &m.out {
        report.save(dir)?;
    }
    Ok(report.to_json())
}

fn dispatch(m: &RunManifest) -> Result<String> {
    match m.subcommand.as_str() {
        "detect" => cmd_detect(m),
        "identify" => cmd_identify(m),
        "simulate" => cmd_simulate(m),
        "bench" => cmd_bench(m),
        other => Err(Error::Config(format!("unknown subcommand '{other}'"))),
    }
}

fn execute(cli: &Cli) -> Result<String> {
    let manifest = build_manifest(cli)?;
    match manifest.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| dispatch(&manifest)),
        None => dispatch(&manifest),
    }
}

/// Entry point; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();
    match execute(&cli) {
        Ok(json) => {
            println!("{json}");
            0
        }
        Err(e) => {
            eprintln!("fdcov: {e}");
            e.exit_code()
        }
    }
}
