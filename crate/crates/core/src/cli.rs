//! The `fdid` command line. [`run`] parses arguments, dispatches, writes
//! outputs and returns the process exit code.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{self, EstimateOptions, Method};
use crate::dgp::{self, generate_long, DgpConfig, MultiPeriodConfig};
use crate::error::{FdidError, Result};
use crate::inference::{BootstrapSpec, HcType};
use crate::montecarlo::{monte_carlo, Estimator, EstimatorSpec, MonteCarloSpec};
use crate::panel::{self, LongColumns, LongPanel, PanelDataset, WideColumns};
use crate::roadmap::{self, Regime};

/// Seed used by `estimate` when none is given.
pub const DEFAULT_SEED: u64 = 20_240_601;

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fdid", version, about = "Factorial difference-in-differences estimation and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate one DID-type estimand with bootstrap and robust intervals.
    Estimate(EstimateArgs),
    /// Estimate each post period against the reference period.
    EventStudy(EventStudyArgs),
    /// DID over a pre-event window; flags an interval excluding zero.
    Placebo(PlaceboArgs),
    /// Draw data from a DGP config, or run a Monte Carlo study with --sims.
    Simulate(SimulateArgs),
    /// Check the identification roadmap over a battery of DGP regimes.
    Verify(VerifyArgs),
    /// Propensity-score overlap diagnostics.
    Diagnose(DiagnoseArgs),
    /// Descriptive statistics.
    Describe(DescribeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PostAgg {
    Mean,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// CSV file, wide (one row per unit) or long (with --time-col).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "id")]
    pub id_col: String,
    #[arg(long, default_value = "g")]
    pub g_col: String,
    #[arg(long, default_value = "y_pre")]
    pub pre_col: String,
    #[arg(long, default_value = "y_post")]
    pub post_col: String,
    /// Read long data with this time column.
    #[arg(long)]
    pub time_col: Option<String>,
    /// Outcome column of long data.
    #[arg(long, default_value = "y")]
    pub y_col: String,
    /// Reference (pre) period label of long data.
    #[arg(long, allow_hyphen_values = true)]
    pub pre_label: Option<String>,
    /// Post period labels of long data.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub post_labels: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimatorArgs {
    #[arg(long, default_value = "did", value_parser = ["did", "strat", "ols-i", "ols-ii", "ipw"])]
    pub method: String,
    /// Center covariates at their sample mean (default).
    #[arg(long, overrides_with = "no_center")]
    #[serde(skip)]
    pub center: bool,
    #[arg(long = "no-center", overrides_with = "center")]
    pub no_center: bool,
    /// Stratification columns for `strat`; defaults to --covariates.
    #[arg(long, value_delimiter = ',')]
    pub strata: Vec<String>,
    #[arg(long)]
    pub drop_empty_strata: bool,
    /// Normalized (Hájek) IPW weights.
    #[arg(long)]
    pub hajek: bool,
    #[arg(long, default_value = "hc1", value_parser = ["hc0", "hc1", "hc2", "hc3"])]
    pub hc: String,
    /// Bootstrap replications; 0 disables the bootstrap.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Write the bootstrap replicates of the main estimate to replicates.csv.
    #[arg(long)]
    pub dump_replicates: bool,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    /// How several post labels are combined.
    #[arg(long, value_enum, default_value = "mean")]
    pub post_agg: PostAgg,
    #[arg(long, default_value = "fdid-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EventStudyArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    #[arg(long, default_value = "fdid-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlaceboArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub est: EstimatorArgs,
    /// Pre-event labels treated as the placebo post window.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    pub placebo_labels: Vec<String>,
    /// Labels of the event window, which the placebo window must avoid.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub event_labels: Vec<String>,
    #[arg(long, default_value = "fdid-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// DgpConfig JSON file.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Override the config's sample size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Run this many Monte Carlo simulations instead of writing one dataset.
    #[arg(long)]
    pub sims: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "did")]
    pub estimators: Vec<String>,
    /// Bootstrap replications per simulation for coverage; 0 disables.
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    /// Write a long panel over these relative periods (must include 0).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub periods: Vec<i64>,
    #[arg(long, default_value = "fdid-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Battery JSON (array of {name, config, expect_unequal}); defaults to the shipped battery.
    #[arg(long)]
    pub battery: Option<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    /// Also run a Monte Carlo check of DID against the oracle in each regime.
    #[arg(long)]
    pub sims: Option<usize>,
    #[arg(long, default_value = "fdid-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "fdid-out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, default_value = "fdid-out")]
    pub out: PathBuf,
}

/// Provenance written next to every set of outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub columns: serde_json::Value,
    pub flags: serde_json::Value,
    pub seed: Option<u64>,
    #[serde(rename = "B")]
    pub b: Option<usize>,
    pub ci_level: Option<f64>,
    pub center: Option<bool>,
    pub outputs: Vec<String>,
    pub version: String,
    /// Seconds since the Unix epoch; `SOURCE_DATE_EPOCH` when set.
    pub timestamp: u64,
}

fn timestamp() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0)
        })
}

struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn text(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.written.push(self.dir.join(name).display().to_string());
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }

    fn manifest(mut self, mut manifest: RunManifest) -> Result<()> {
        manifest.outputs = self.written.clone();
        manifest.outputs.push(self.dir.join("manifest.json").display().to_string());
        self.json("manifest.json", &manifest)
    }
}

enum Failure {
    Usage(String),
    Data(FdidError),
}

impl From<FdidError> for Failure {
    fn from(e: FdidError) -> Self {
        Failure::Data(e)
    }
}

type CmdResult = std::result::Result<i32, Failure>;

impl InputArgs {
    fn is_long(&self) -> bool {
        self.time_col.is_some()
    }

    fn long_columns(&self) -> LongColumns {
        LongColumns {
            id: self.id_col.clone(),
            time: self.time_col.clone().unwrap_or_else(|| "time".into()),
            y: self.y_col.clone(),
            g: self.g_col.clone(),
            covariates: self.covariates.clone(),
        }
    }

    fn wide_columns(&self) -> WideColumns {
        WideColumns {
            id: self.id_col.clone(),
            g: self.g_col.clone(),
            y_pre: self.pre_col.clone(),
            y_post: self.post_col.clone(),
            covariates: self.covariates.clone(),
        }
    }

    fn columns_json(&self) -> serde_json::Value {
        if self.is_long() {
            serde_json::to_value(self.long_columns()).expect("columns serialize")
        } else {
            serde_json::to_value(self.wide_columns()).expect("columns serialize")
        }
    }

    fn check_input(&self) -> std::result::Result<(), Failure> {
        if self.input.is_file() {
            Ok(())
        } else {
            Err(Failure::Data(FdidError::InvalidArgument(format!(
                "cannot read input file {}",
                self.input.display()
            ))))
        }
    }

    fn load_long(&self) -> std::result::Result<LongPanel, Failure> {
        self.check_input()?;
        if !self.is_long() {
            return Err(Failure::Usage("this command needs long data: pass --time-col".into()));
        }
        Ok(panel::load_long(&self.input, &self.long_columns())?)
    }

    fn pre_label(&self) -> std::result::Result<&str, Failure> {
        self.pre_label
            .as_deref()
            .ok_or_else(|| Failure::Usage("long data needs --pre-label".into()))
    }

    /// Wide data directly, or long data reshaped with post labels averaged.
    fn load_wide(&self) -> std::result::Result<PanelDataset, Failure> {
        if self.is_long() {
            let long = self.load_long()?;
            let pre = self.pre_label()?;
            if self.post_labels.is_empty() {
                return Err(Failure::Usage("long data needs --post-labels".into()));
            }
            Ok(panel::long_to_wide_window(&long, pre, &self.post_labels)?)
        } else {
            self.check_input()?;
            Ok(panel::load_wide(&self.input, &self.wide_columns())?)
        }
    }
}

impl EstimatorArgs {
    fn options(&self, covariates: &[String], err: &mut dyn Write) -> std::result::Result<EstimateOptions, Failure> {
        let method: Method = self.method.parse().map_err(|e: FdidError| Failure::Usage(e.to_string()))?;
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Failure::Usage(format!("--level must lie in (0, 1), got {}", self.level)));
        }
        if self.bootstrap == 1 {
            return Err(Failure::Usage("--bootstrap needs at least 2 replications (or 0)".into()));
        }
        let seed = self.seed.unwrap_or_else(|| {
            if self.bootstrap > 0 {
                let _ = writeln!(err, "warning: no --seed given; using {DEFAULT_SEED}");
            }
            DEFAULT_SEED
        });
        let mut opts = EstimateOptions::new(method);
        opts.covariates = covariates.to_vec();
        opts.strata = self.strata.clone();
        opts.center = !self.no_center;
        opts.bootstrap = (self.bootstrap > 0).then(|| BootstrapSpec::new(self.bootstrap, seed).with_level(self.level));
        opts.level = self.level;
        opts.hc = self.hc.parse::<HcType>().map_err(|e| Failure::Usage(e.to_string()))?;
        opts.hajek = self.hajek;
        opts.drop_empty_strata = self.drop_empty_strata;
        Ok(opts)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }
}

fn manifest_for(command: &str, input: &InputArgs, est: Option<&EstimatorArgs>, flags: serde_json::Value) -> RunManifest {
    RunManifest {
        command: command.to_string(),
        inputs: vec![input.input.display().to_string()],
        columns: input.columns_json(),
        flags,
        seed: est.map(|e| e.seed()),
        b: est.map(|e| e.bootstrap),
        ci_level: est.map(|e| e.level),
        center: est.map(|e| !e.no_center),
        outputs: Vec::new(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: timestamp(),
    }
}

fn est_flags(est: &EstimatorArgs, extra: serde_json::Value) -> serde_json::Value {
    let mut v = serde_json::to_value(est).expect("flags serialize");
    if let (Some(obj), serde_json::Value::Object(more)) = (v.as_object_mut(), extra) {
        obj.extend(more);
    }
    v
}

fn fmt_ci(ci: Option<[f64; 2]>) -> String {
    ci.map(|[a, b]| format!("[{a:.4}, {b:.4}]")).unwrap_or_else(|| "n/a".into())
}

fn cmd_estimate(args: &EstimateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let PostAgg::Mean = args.post_agg;
    let dataset = args.input.load_wide()?;
    let opts = args.est.options(&args.input.covariates, err)?;
    let report = analysis::estimate(&dataset, &opts)?;
    for w in &report.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let mut files = Outputs::new(&args.out)?;
    files.json("result.json", &report)?;
    let period = if args.input.post_labels.is_empty() {
        "post".to_string()
    } else {
        args.input.post_labels.join("+")
    };
    files.text("plotdata.csv", &analysis::plot_csv([(period.as_str(), report.point, report.ci())])?)?;
    if args.est.dump_replicates {
        if let Some(spec) = &opts.bootstrap {
            let cs = dataset.cross_section().select_covariates(&report_columns(&opts))?;
            let r = crate::inference::bootstrap(&cs, spec, |s| opts.point(s))?;
            let mut buf = Vec::new();
            r.write_replicates(&mut buf)?;
            files.text("replicates.csv", &String::from_utf8(buf).expect("csv output is UTF-8"))?;
        }
    }
    let flags = est_flags(&args.est, serde_json::json!({"post_agg": "mean"}));
    files.manifest(manifest_for("estimate", &args.input, Some(&args.est), flags))?;
    let _ = writeln!(
        out,
        "{:?} ({}) = {:.6}  bootstrap CI {}  EHW CI {}",
        report.estimand,
        report.method.as_str(),
        report.point,
        fmt_ci(report.bootstrap.as_ref().map(|b| b.ci)),
        fmt_ci(report.ehw.as_ref().map(|e| e.ci)),
    );
    Ok(EXIT_OK)
}

fn report_columns(opts: &EstimateOptions) -> Vec<String> {
    let mut cols = opts.covariates.clone();
    for s in &opts.strata {
        if !cols.contains(s) {
            cols.push(s.clone());
        }
    }
    cols
}

fn cmd_event_study(args: &EventStudyArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let long = args.input.load_long()?;
    let pre = args.input.pre_label()?;
    let posts: Vec<String> = if args.input.post_labels.is_empty() {
        long.time_labels().into_iter().filter(|l| l != pre).collect()
    } else {
        args.input.post_labels.clone()
    };
    let opts = args.est.options(&args.input.covariates, err)?;
    let es = analysis::event_study(&long, pre, &posts, &opts)?;
    let mut files = Outputs::new(&args.out)?;
    files.json("result.json", &es)?;
    files.text("plotdata.csv", &es.plot_csv()?)?;
    let flags = est_flags(&args.est, serde_json::json!({"post_agg": "per-period"}));
    files.manifest(manifest_for("event-study", &args.input, Some(&args.est), flags))?;
    for p in &es.periods {
        let _ = writeln!(out, "{:>10}  {:?}  {:>12.6}  {}", p.period, p.estimand, p.point, fmt_ci(p.ci));
    }
    Ok(EXIT_OK)
}

fn cmd_placebo(args: &PlaceboArgs, out: &mut dyn Write, err: &mut dyn Write) -> CmdResult {
    let long = args.input.load_long()?;
    let pre = args.input.pre_label()?;
    let mut event = args.event_labels.clone();
    event.extend(args.input.post_labels.iter().cloned());
    let opts = args.est.options(&args.input.covariates, err)?;
    let r = analysis::placebo(&long, pre, &args.placebo_labels, &event, &opts)?;
    let mut files = Outputs::new(&args.out)?;
    files.json("result.json", &r)?;
    let period = args.placebo_labels.join("+");
    files.text("plotdata.csv", &analysis::plot_csv([(period.as_str(), r.point, Some(r.ci))])?)?;
    let flags = est_flags(
        &args.est,
        serde_json::json!({"placebo_labels": args.placebo_labels, "event_labels": event}),
    );
    files.manifest(manifest_for("placebo", &args.input, Some(&args.est), flags))?;
    let _ = writeln!(
        out,
        "PLACEBO = {:.6}  CI {}  {}",
        r.point,
        fmt_ci(Some(r.ci)),
        match r.flag {
            analysis::PlaceboFlag::Pass => "pass",
            analysis::PlaceboFlag::Flag => "flag: interval excludes 0",
        }
    );
    Ok(EXIT_OK)
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> std::result::Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(FdidError::from)?;
    serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn parse_estimator(name: &str) -> std::result::Result<Estimator, Failure> {
    Ok(match name {
        "did" => Estimator::Did,
        "strat" => Estimator::Stratified,
        "ols-i" => Estimator::OlsInteracted,
        "ols-i-uncentered" => Estimator::OlsInteractedUncentered,
        "ols-ii" => Estimator::OlsPlain,
        "ipw" => Estimator::IpwLogistic,
        "ipw-saturated" => Estimator::IpwSaturated,
        _ => return Err(Failure::Usage(format!("unknown estimator `{name}`"))),
    })
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let mut config: DgpConfig = read_json_file(&args.config)?;
    config.seed = args.seed;
    if let Some(n) = args.n {
        config.n = n;
    }
    config.validate()?;
    let mut files = Outputs::new(&args.out)?;
    let oracle = dgp::closed_form_estimands(&config);
    files.json("oracle.json", &oracle)?;
    if let Some(sims) = args.sims {
        let estimators = args
            .estimators
            .iter()
            .map(|e| parse_estimator(e).map(EstimatorSpec::from))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let spec = MonteCarloSpec {
            n_sims: sims,
            seed: args.seed,
            estimators,
            bootstrap: (args.bootstrap > 0).then(|| BootstrapSpec::new(args.bootstrap, args.seed)),
        };
        let report = monte_carlo(&config, &spec)?;
        files.json("monte_carlo.json", &report)?;
        files.text("monte_carlo.csv", &report.to_csv()?)?;
        for r in &report.rows {
            let _ = writeln!(
                out,
                "{:<26} target {:<16} bias {:>10.5}  mc-se {:.5}{}",
                r.estimator,
                r.target,
                r.bias,
                r.mc_se,
                r.coverage.map(|c| format!("  coverage {c:.3}")).unwrap_or_default()
            );
        }
    } else if !args.periods.is_empty() {
        let mp = MultiPeriodConfig::new(config.clone(), args.periods.clone());
        let long = generate_long(&mp)?;
        let mut buf = Vec::new();
        panel::write_long(&mut buf, &long)?;
        files.text("data.csv", &String::from_utf8(buf).expect("csv output is UTF-8"))?;
        let oracle_periods: Vec<serde_json::Value> = args
            .periods
            .iter()
            .map(|&r| serde_json::json!({"period": dgp::period_label(r), "did": mp.oracle_did(r), "did_strata": mp.oracle_did_strata(r)}))
            .collect();
        files.json("oracle_periods.json", &oracle_periods)?;
        let _ = writeln!(out, "wrote {} rows over {} periods", long.rows.len(), args.periods.len());
    } else {
        let (_, ds) = dgp::generate(&config)?;
        let mut buf = Vec::new();
        panel::write_wide(&mut buf, &ds)?;
        files.text("data.csv", &String::from_utf8(buf).expect("csv output is UTF-8"))?;
        let _ = writeln!(out, "wrote {} units; tau_did = {:.6}", ds.n(), oracle.tau_did);
    }
    files.manifest(RunManifest {
        command: "simulate".into(),
        inputs: vec![args.config.display().to_string()],
        columns: serde_json::Value::Null,
        flags: serde_json::json!({
            "n": config.n,
            "sims": args.sims,
            "estimators": args.estimators,
            "periods": args.periods,
        }),
        seed: Some(args.seed),
        b: Some(args.bootstrap),
        ci_level: None,
        center: None,
        outputs: Vec::new(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: timestamp(),
    })?;
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs, out: &mut dyn Write) -> CmdResult {
    let battery: Vec<Regime> = match &args.battery {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(FdidError::from)?;
            roadmap::parse_battery(&text).map_err(|e| match e {
                FdidError::Json(e) => Failure::Usage(format!("{}: {e}", path.display())),
                other => Failure::Data(other),
            })?
        }
        None => roadmap::default_battery(),
    };
    let report = roadmap::verify_roadmap(&battery)?;
    let mut files = Outputs::new(&args.out)?;
    files.json("roadmap.json", &report)?;
    files.text("roadmap.csv", &report.to_csv()?)?;
    if let Some(sims) = args.sims {
        let mut rows = Vec::new();
        for regime in &battery {
            let spec = MonteCarloSpec {
                n_sims: sims,
                seed: args.seed,
                estimators: vec![Estimator::Did.into(), Estimator::Stratified.into()],
                bootstrap: None,
            };
            let mc = monte_carlo(&regime.config, &spec)?;
            rows.push(serde_json::json!({"regime": regime.name, "rows": mc.rows}));
        }
        files.json("monte_carlo.json", &rows)?;
    }
    files.manifest(RunManifest {
        command: "verify".into(),
        inputs: args.battery.iter().map(|p| p.display().to_string()).collect(),
        columns: serde_json::Value::Null,
        flags: serde_json::json!({"sims": args.sims}),
        seed: Some(args.seed),
        b: None,
        ci_level: None,
        center: None,
        outputs: Vec::new(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp: timestamp(),
    })?;
    let _ = write!(out, "{}", report.to_table());
    let failed = report.n_failed();
    let _ = writeln!(out, "{} rows, {} failed", report.rows.len(), failed);
    Ok(if failed == 0 { EXIT_OK } else { EXIT_DATA })
}

fn cmd_diagnose(args: &DiagnoseArgs, out: &mut dyn Write) -> CmdResult {
    if args.input.covariates.is_empty() {
        return Err(Failure::Usage("diagnose needs --covariates".into()));
    }
    let dataset = args.input.load_wide()?;
    let report = analysis::diagnose(&dataset, &args.input.covariates)?;
    let mut files = Outputs::new(&args.out)?;
    files.json("result.json", &report)?;
    files.text("histogram.csv", &report.histogram_csv()?)?;
    files.text("scores.csv", &analysis::scores_csv(&dataset, &report.model)?)?;
    files.manifest(manifest_for("diagnose", &args.input, None, serde_json::Value::Null))?;
    let _ = writeln!(
        out,
        "scores in [{:.4}, {:.4}]; {} within {} of 0 or 1",
        report.min_score,
        report.max_score,
        report.n_extreme,
        crate::ipw::EXTREME_SCORE
    );
    Ok(EXIT_OK)
}

fn cmd_describe(args: &DescribeArgs, out: &mut dyn Write) -> CmdResult {
    let dataset = args.input.load_wide()?;
    let rows = panel::describe(&dataset);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r).map_err(FdidError::from)?;
    }
    let csv_text = String::from_utf8(w.into_inner().map_err(|e| FdidError::Io(e.into_error()))?)
        .expect("csv output is UTF-8");
    let mut files = Outputs::new(&args.out)?;
    files.json("result.json", &rows)?;
    files.text("describe.csv", &csv_text)?;
    files.manifest(manifest_for("describe", &args.input, None, serde_json::Value::Null))?;
    let _ = writeln!(out, "{:<12} {:>6} {:>12} {:>12} {:>12} {:>12} {:>12}", "variable", "n", "mean", "median", "sd", "min", "max");
    for r in &rows {
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>12.4}",
            r.variable, r.n, r.mean, r.median, r.sd, r.min, r.max
        );
    }
    Ok(EXIT_OK)
}

fn configure_threads() {
    if let Some(n) = std::env::var("FDID_THREADS").ok().and_then(|s| s.parse::<usize>().ok()) {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = write!(err, "{text}");
            } else {
                let _ = write!(out, "{text}");
            }
            return code;
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Estimate(a) => cmd_estimate(a, out, err),
        Command::EventStudy(a) => cmd_event_study(a, out, err),
        Command::Placebo(a) => cmd_placebo(a, out, err),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Verify(a) => cmd_verify(a, out),
        Command::Diagnose(a) => cmd_diagnose(a, out),
        Command::Describe(a) => cmd_describe(a, out),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_DATA
        }
    }
}
