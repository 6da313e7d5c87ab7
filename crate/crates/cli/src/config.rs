//! Experiment configuration: flags, `key = value` files, and resolution
//! into validated library parameters.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use tracerecon::alignment::Level1Search;
use tracerecon::anchors::LengthOverrides;
use tracerecon::blocktest::TestParams;
use tracerecon::channel::ChannelParams;
use tracerecon::lemmalab::LabParams;
use tracerecon::reconstruct::PipelineParams;
use tracerecon::{desk, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CommandKind {
    Simulate,
    Reconstruct,
    Lemmas,
    Sweep,
    Code,
}

impl CommandKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::Reconstruct => "reconstruct",
            CommandKind::Lemmas => "lemmas",
            CommandKind::Sweep => "sweep",
            CommandKind::Code => "code",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Lemma {
    Truematch,
    Falsematch,
    Ontrack,
    Useful,
    Anchor,
}

/// Every setting as an optional value, so that files and flags can be layered.
#[derive(Args, Debug, Clone, Default)]
pub struct Flags {
    /// Config file with one `key = value` per line; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Source length (codeword length for `code`).
    #[arg(long)]
    pub n: Option<usize>,
    /// Deletion probability.
    #[arg(long)]
    pub q: Option<f64>,
    /// Number of traces.
    #[arg(long = "T")]
    pub t: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<u64>,
    /// Alignment stop length.
    #[arg(long = "K1")]
    pub k1: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub kappa0: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c0: Option<f64>,
    #[arg(long = "C8")]
    pub c8: Option<f64>,
    #[arg(long = "C9")]
    pub c9: Option<f64>,
    #[arg(long = "C10")]
    pub c10: Option<f64>,
    /// Prefix strategy: bma or oracle.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Start from the desk-scale preset and unlock out-of-range parameters.
    #[arg(long)]
    pub desk_override: bool,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Also reconstruct the right half from reversed traces.
    #[arg(long)]
    pub full_scan: bool,
    /// Level-1 search radius around the rescaled position; 0 searches the whole trace.
    #[arg(long)]
    pub search_radius: Option<usize>,
    /// Estimator for `lemmas` and `sweep`.
    #[arg(long, value_enum)]
    pub which: Option<Lemma>,
    /// Window length for the match estimators.
    #[arg(long)]
    pub m: Option<usize>,
    /// Parameter swept by `sweep`.
    #[arg(long)]
    pub param: Option<String>,
    /// Comma-separated values for `--param`.
    #[arg(long)]
    pub values: Option<String>,
    /// Exclusion radius for `code`.
    #[arg(long)]
    pub radius: Option<usize>,
    /// Largest code size for `code`.
    #[arg(long)]
    pub cap: Option<usize>,
    /// Read the code from this file instead of building it.
    #[arg(long)]
    pub code_file: Option<PathBuf>,
    /// Write the built code to this file.
    #[arg(long)]
    pub export_code: Option<PathBuf>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| anyhow!("invalid parameter `{key}`: cannot parse {value:?}: {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => bail!("invalid parameter `{key}`: expected true or false, got {value:?}"),
    }
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T> {
    T::from_str(value, true).map_err(|_| anyhow!("invalid parameter `{key}`: unknown value {value:?}"))
}

impl Flags {
    /// Reads a config file; `#` starts a comment.
    pub fn from_file(path: &Path) -> Result<Flags> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config file {}", path.display()))?;
        Flags::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Flags> {
        let mut flags = Flags::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected `key = value`, got {raw:?}", no + 1))?;
            flags.set(key.trim(), value.trim())?;
        }
        Ok(flags)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "n" => self.n = Some(parse_value(key, value)?),
            "q" => self.q = Some(parse_value(key, value)?),
            "T" => self.t = Some(parse_value(key, value)?),
            "seed" => self.seed = Some(parse_value(key, value)?),
            "trials" => self.trials = Some(parse_value(key, value)?),
            "K1" => self.k1 = Some(parse_value(key, value)?),
            "alpha" => self.alpha = Some(parse_value(key, value)?),
            "kappa0" => self.kappa0 = Some(parse_value(key, value)?),
            "beta" => self.beta = Some(parse_value(key, value)?),
            "lambda" => self.lambda = Some(parse_value(key, value)?),
            "c0" => self.c0 = Some(parse_value(key, value)?),
            "C8" => self.c8 = Some(parse_value(key, value)?),
            "C9" => self.c9 = Some(parse_value(key, value)?),
            "C10" => self.c10 = Some(parse_value(key, value)?),
            "strategy" => self.strategy = Some(value.to_string()),
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = Some(parse_enum(key, value)?),
            "desk_override" => self.desk_override = parse_bool(key, value)?,
            "jobs" => self.jobs = Some(parse_value(key, value)?),
            "full_scan" => self.full_scan = parse_bool(key, value)?,
            "search_radius" => self.search_radius = Some(parse_value(key, value)?),
            "which" => self.which = Some(parse_enum(key, value)?),
            "m" => self.m = Some(parse_value(key, value)?),
            "param" => self.param = Some(value.to_string()),
            "values" => self.values = Some(value.to_string()),
            "radius" => self.radius = Some(parse_value(key, value)?),
            "cap" => self.cap = Some(parse_value(key, value)?),
            "code_file" => self.code_file = Some(PathBuf::from(value)),
            "export_code" => self.export_code = Some(PathBuf::from(value)),
            _ => bail!("unknown config key `{key}`"),
        }
        Ok(())
    }

    /// `other` wins wherever it is set.
    pub fn overlay(self, other: Flags) -> Flags {
        Flags {
            config: other.config.or(self.config),
            n: other.n.or(self.n),
            q: other.q.or(self.q),
            t: other.t.or(self.t),
            seed: other.seed.or(self.seed),
            trials: other.trials.or(self.trials),
            k1: other.k1.or(self.k1),
            alpha: other.alpha.or(self.alpha),
            kappa0: other.kappa0.or(self.kappa0),
            beta: other.beta.or(self.beta),
            lambda: other.lambda.or(self.lambda),
            c0: other.c0.or(self.c0),
            c8: other.c8.or(self.c8),
            c9: other.c9.or(self.c9),
            c10: other.c10.or(self.c10),
            strategy: other.strategy.or(self.strategy),
            out: other.out.or(self.out),
            format: other.format.or(self.format),
            desk_override: other.desk_override || self.desk_override,
            jobs: other.jobs.or(self.jobs),
            full_scan: other.full_scan || self.full_scan,
            search_radius: other.search_radius.or(self.search_radius),
            which: other.which.or(self.which),
            m: other.m.or(self.m),
            param: other.param.or(self.param),
            values: other.values.or(self.values),
            radius: other.radius.or(self.radius),
            cap: other.cap.or(self.cap),
            code_file: other.code_file.or(self.code_file),
            export_code: other.export_code.or(self.export_code),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub param: String,
    pub values: Vec<f64>,
}

pub const SWEEPABLE: [&str; 9] = ["m", "beta", "lambda", "K1", "T", "n", "q", "alpha", "kappa0"];

/// Fully resolved configuration; embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: CommandKind,
    pub seed: u64,
    pub trials: u64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub jobs: usize,
    pub desk_override: bool,
    pub n: usize,
    pub q: f64,
    #[serde(rename = "T")]
    pub trace_count: usize,
    #[serde(rename = "K1")]
    pub k1: usize,
    pub alpha: f64,
    pub kappa0: f64,
    pub beta: f64,
    pub lambda: f64,
    pub c0: f64,
    #[serde(rename = "C8")]
    pub c8: f64,
    #[serde(rename = "C9")]
    pub c9: f64,
    #[serde(rename = "C10")]
    pub c10: f64,
    pub strategy: String,
    pub full_scan: bool,
    pub level1: Level1Search,
    pub anchor_overrides: LengthOverrides,
    pub which: Option<Lemma>,
    pub m: usize,
    pub sweep: Option<SweepSpec>,
    pub radius: usize,
    pub cap: Option<usize>,
    pub code_file: Option<PathBuf>,
    pub export_code: Option<PathBuf>,
}

/// Names the offending field for library validation failures.
fn field_error(e: Error) -> anyhow::Error {
    anyhow!(e)
}

impl ExperimentConfig {
    /// Layers command defaults, the desk preset (when requested), the
    /// config file and the flags, then validates.
    pub fn resolve(command: CommandKind, flags: Flags) -> Result<ExperimentConfig> {
        let flags = match &flags.config {
            Some(path) => Flags::from_file(path)?.overlay(flags),
            None => flags,
        };
        let desk_mode = flags.desk_override;
        let lab_like = matches!(command, CommandKind::Lemmas | CommandKind::Sweep);
        let code = command == CommandKind::Code;
        let base_pipeline = PipelineParams::new(ChannelParams::new(0.2).map_err(field_error)?, TestParams::default());
        let base_lab = LabParams::new(ChannelParams::new(0.2).map_err(field_error)?, TestParams::default());
        let (alpha, kappa0, k1, level1, anchors) = if desk_mode {
            (desk::ALPHA, desk::KAPPA0, desk::K1, desk::LEVEL1, desk::ANCHORS)
        } else {
            let t = TestParams::default();
            (t.alpha, t.kappa0, base_pipeline.k1, base_pipeline.level1, LengthOverrides::default())
        };
        let level1 = match flags.search_radius {
            Some(0) => Level1Search::WholeTrace,
            Some(radius) => Level1Search::Windowed { radius },
            None => level1,
        };
        let sweep = if command == CommandKind::Sweep {
            let param = flags.param.clone().ok_or_else(|| anyhow!("invalid parameter `param`: sweep needs --param"))?;
            if !SWEEPABLE.contains(&param.as_str()) {
                bail!("invalid parameter `param`: cannot sweep {param:?}; choose one of {}", SWEEPABLE.join(", "));
            }
            let raw = flags.values.clone().ok_or_else(|| anyhow!("invalid parameter `values`: sweep needs --values"))?;
            let values = raw
                .split(',')
                .map(|v| parse_value::<f64>("values", v.trim()))
                .collect::<Result<Vec<_>>>()?;
            if values.is_empty() {
                bail!("invalid parameter `values`: empty list");
            }
            Some(SweepSpec { param, values })
        } else {
            None
        };
        let default_trials = match command {
            CommandKind::Lemmas | CommandKind::Sweep => 1000,
            CommandKind::Code => 100,
            _ => 10,
        };
        let config = ExperimentConfig {
            command,
            seed: flags.seed.unwrap_or(1),
            trials: flags.trials.unwrap_or(default_trials),
            output_path: flags.out.clone(),
            format: flags.format.unwrap_or_default(),
            jobs: flags.jobs.unwrap_or(0),
            desk_override: desk_mode,
            n: flags.n.unwrap_or(if code { 16 } else { 1 << 16 }),
            q: flags.q.unwrap_or(if code { 0.1 } else { 0.2 }),
            trace_count: flags.t.unwrap_or(if lab_like { base_lab.trace_count } else { base_pipeline.trace_count }),
            k1: flags.k1.unwrap_or(k1),
            alpha: flags.alpha.unwrap_or(alpha),
            kappa0: flags.kappa0.unwrap_or(kappa0),
            beta: flags.beta.unwrap_or(base_lab.beta),
            lambda: flags.lambda.unwrap_or(base_lab.lambda),
            c0: flags.c0.unwrap_or(base_pipeline.c0),
            c8: flags.c8.unwrap_or(base_pipeline.c8),
            c9: flags.c9.unwrap_or(base_pipeline.c9),
            c10: flags.c10.unwrap_or(base_pipeline.c10),
            strategy: flags.strategy.clone().unwrap_or_else(|| base_pipeline.strategy.clone()),
            full_scan: flags.full_scan,
            level1,
            anchor_overrides: anchors,
            which: flags.which,
            m: flags.m.unwrap_or(4096),
            sweep,
            radius: flags.radius.unwrap_or(4),
            cap: flags.cap,
            code_file: flags.code_file.clone(),
            export_code: flags.export_code.clone(),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("invalid parameter `trials`: must be at least 1");
        }
        if !["bma", "oracle"].contains(&self.strategy.as_str()) {
            bail!("invalid parameter `strategy`: unknown strategy {:?}; choose bma or oracle", self.strategy);
        }
        if matches!(self.command, CommandKind::Lemmas | CommandKind::Sweep) && self.which.is_none() {
            bail!("invalid parameter `which`: choose an estimator with --which");
        }
        if self.command == CommandKind::Code && self.radius == 0 {
            bail!("invalid parameter `radius`: must be at least 1");
        }
        match self.command {
            CommandKind::Lemmas | CommandKind::Sweep => {
                self.lab_params()?;
            }
            CommandKind::Code => {
                ChannelParams::new(self.q).map_err(field_error)?;
                self.test_params()?;
            }
            _ => {
                self.pipeline_params()?.validate().map_err(field_error)?;
            }
        }
        Ok(())
    }

    pub fn test_params(&self) -> Result<TestParams> {
        TestParams::new(self.alpha, self.kappa0, self.desk_override).map_err(field_error)
    }

    pub fn pipeline_params(&self) -> Result<PipelineParams> {
        let mut p = PipelineParams::new(ChannelParams::new(self.q).map_err(field_error)?, self.test_params()?);
        p.c0 = self.c0;
        p.c8 = self.c8;
        p.c9 = self.c9;
        p.c10 = self.c10;
        p.anchor_overrides = self.anchor_overrides;
        p.k1 = self.k1;
        p.trace_count = self.trace_count;
        p.strategy = self.strategy.clone();
        p.level1 = self.level1;
        p.full_scan = self.full_scan;
        p.validate().map_err(field_error)?;
        Ok(p)
    }

    pub fn lab_params(&self) -> Result<LabParams> {
        let mut p = LabParams::new(ChannelParams::new(self.q).map_err(field_error)?, self.test_params()?);
        p.lambda = self.lambda;
        p.beta = self.beta;
        p.n = self.n;
        p.trace_count = self.trace_count;
        p.k1 = self.k1;
        p.level1 = self.level1;
        p.c0 = self.c0;
        p.c8 = self.c8;
        p.c9 = self.c9;
        p.anchor_overrides = self.anchor_overrides;
        p.validate().map_err(field_error)?;
        Ok(p)
    }

    /// Copy with one sweepable parameter replaced.
    pub fn with_param(&self, param: &str, value: f64) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        let whole = |v: f64| -> Result<usize> {
            if v < 0.0 || v.fract() != 0.0 {
                bail!("invalid parameter `{param}`: sweep value {v} is not a whole number");
            }
            Ok(v as usize)
        };
        match param {
            "m" => c.m = whole(value)?,
            "beta" => c.beta = value,
            "lambda" => c.lambda = value,
            "K1" => c.k1 = whole(value)?,
            "T" => c.trace_count = whole(value)?,
            "n" => c.n = whole(value)?,
            "q" => c.q = value,
            "alpha" => c.alpha = value,
            "kappa0" => c.kappa0 = value,
            _ => bail!("invalid parameter `param`: cannot sweep {param:?}"),
        }
        c.lab_params()?;
        Ok(c)
    }
}
