//! Experiment configuration: defaults, overlaid by a JSON config file,
//! overlaid by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use hcd::{Distribution, GenSpec, SolverParams};
use serde::{Deserialize, Serialize};

/// Marks an error as a usage or configuration problem (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Hcd,
    Iht,
    Oracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Hcd => "hcd",
            Self::Iht => "iht",
            Self::Oracle => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    #[value(alias = "lambda_tgt")]
    LambdaTgt,
    Eta,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::LambdaTgt => "lambda_tgt",
            Self::Eta => "eta",
        }
    }
}

/// Patches cut from a grayscale image, coded over a random dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PatchSource {
    pub path: PathBuf,
    pub patch: usize,
    pub atoms: usize,
    /// Standard deviation of Gaussian noise added to each patch.
    pub pixel_noise: f64,
}

impl Default for PatchSource {
    fn default() -> Self {
        Self {
            path: PathBuf::new(),
            patch: 8,
            atoms: 256,
            pixel_noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub gen: GenSpec,
    /// File prefix of `dictionary.csv`, `signal.csv` and optional `truth.csv`.
    pub input: Option<String>,
    pub pgm: Option<PatchSource>,
    pub params: SolverParams<f64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    /// Literal prefix prepended to every output file name.
    pub output: String,
    /// Largest support the oracle enumerates; defaults to all atoms.
    pub max_support: Option<usize>,
    pub normalize: bool,
    pub strict: bool,
    pub threads: Option<usize>,
    pub sweep: Option<SweepSpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            gen: GenSpec::default(),
            input: None,
            pgm: None,
            params: SolverParams::default(),
            trials: 1,
            methods: vec![Method::Hcd],
            output: "out/".into(),
            max_support: None,
            normalize: false,
            strict: false,
            threads: None,
            sweep: None,
        }
    }
}

/// Flags shared by every subcommand. Unset flags leave the config untouched.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda_tgt: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Comma-separated subset of hcd, iht, oracle.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub method: Option<Vec<Method>>,
    /// Rescale dictionary columns to unit norm instead of rejecting them.
    #[arg(long)]
    pub normalize: bool,
    /// Exit with code 3 if any solver cap was hit.
    #[arg(long)]
    pub strict: bool,
    /// Output prefix, e.g. `runs/a_`; parent directories are created.
    #[arg(long)]
    pub out: Option<String>,

    #[arg(long, value_parser = parse_dist)]
    pub dist: Option<Distribution>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,

    /// Read `<prefix>dictionary.csv`, `<prefix>signal.csv` and, if present,
    /// `<prefix>truth.csv` instead of generating an instance.
    #[arg(long)]
    pub input: Option<String>,
    /// Code patches of a PGM image instead of a synthetic signal.
    #[arg(long)]
    pub pgm: Option<PathBuf>,
    #[arg(long)]
    pub patch: Option<usize>,
    #[arg(long)]
    pub atoms: Option<usize>,
    #[arg(long)]
    pub pixel_noise: Option<f64>,

    #[arg(long)]
    pub max_support: Option<usize>,
    /// Worker threads for `bench` (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

fn parse_dist(s: &str) -> Result<Distribution, String> {
    s.parse().map_err(|e: hcd::HcdError| e.to_string())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
    }

    /// Defaults, then the config file named by `args`, then the flags.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let mut cfg = match &args.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        cfg.apply(args);
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, a: &CommonArgs) {
        fn set<T: Clone>(dst: &mut T, src: &Option<T>) {
            if let Some(v) = src {
                *dst = v.clone();
            }
        }
        set(&mut self.gen.seed, &a.seed);
        set(&mut self.gen.dist, &a.dist);
        set(&mut self.gen.d, &a.d);
        set(&mut self.gen.k, &a.k);
        set(&mut self.gen.s, &a.s);
        set(&mut self.gen.sigma, &a.sigma);
        set(&mut self.params.lambda_tgt, &a.lambda_tgt);
        set(&mut self.params.eta, &a.eta);
        set(&mut self.params.tau, &a.tau);
        set(&mut self.params.delta, &a.delta);
        set(&mut self.params.phi, &a.phi);
        set(&mut self.trials, &a.trials);
        set(&mut self.methods, &a.method);
        set(&mut self.output, &a.out);
        if a.input.is_some() {
            self.input = a.input.clone();
        }
        if a.max_support.is_some() {
            self.max_support = a.max_support;
        }
        if a.threads.is_some() {
            self.threads = a.threads;
        }
        self.normalize |= a.normalize;
        self.strict |= a.strict;

        if a.pgm.is_some() || a.patch.is_some() || a.atoms.is_some() || a.pixel_noise.is_some() {
            let pgm = self.pgm.get_or_insert_with(PatchSource::default);
            set(&mut pgm.path, &a.pgm);
            set(&mut pgm.patch, &a.patch);
            set(&mut pgm.atoms, &a.atoms);
            set(&mut pgm.pixel_noise, &a.pixel_noise);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(usage("trials must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(usage("at least one method is required"));
        }
        if self.input.is_some() && self.pgm.is_some() {
            return Err(usage("--input and --pgm are mutually exclusive"));
        }
        if let Some(p) = &self.pgm {
            if p.path.as_os_str().is_empty() {
                return Err(usage("patch options need --pgm <path>"));
            }
        }
        self.params.validate().map_err(|e| usage(e.to_string()))?;
        if self.input.is_none() && self.pgm.is_none() {
            self.gen.validate().map_err(|e| usage(e.to_string()))?;
        }
        Ok(())
    }
}
