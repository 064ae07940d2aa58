//! Experiment configuration and its flat `key = value` file form.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use bsft::tuning::Tuning;
use serde::{Deserialize, Serialize};

use crate::generators::{Generator, Noise, SignalSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Desk,
    Paper,
}

impl Preset {
    pub fn tuning(&self) -> Tuning {
        match self {
            Self::Desk => Tuning::desk(),
            Self::Paper => Tuning::paper(),
        }
    }
    pub fn name(&self) -> &'static str {
        match self {
            Self::Desk => "desk",
            Self::Paper => "paper",
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "desk" => Ok(Self::Desk),
            "paper" => Ok(Self::Paper),
            _ => Err(format!("unknown preset '{s}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub n: usize,
    pub k0: usize,
    pub k1: usize,
    pub snr: f64,
    pub eps: f64,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    pub generator: Generator,
    pub noise: Noise,
    pub out: Option<PathBuf>,
    pub preset: Preset,
    /// SNR bound handed to the recovery when the signal has no tail.
    pub noiseless_snr: f64,
    /// Multiplies every oracle-check tolerance.
    pub tolerance_scale: f64,
    /// Overrides the filter order used by the oracle checks.
    pub filter_order: Option<usize>,
    /// C in the success test err^2 <= k0 mu^2 + C eps k0 nu^2.
    pub success_constant: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1 << 14,
            k0: 4,
            k1: 8,
            snr: 16.0,
            eps: 0.05,
            delta: 0.01,
            trials: 1,
            seed: 1,
            generator: Generator::BlockRandom,
            noise: Noise::GaussianTail,
            out: None,
            preset: Preset::Desk,
            noiseless_snr: 1024.0,
            tolerance_scale: 1.0,
            filter_order: None,
            success_constant: 4e5,
        }
    }
}

impl ExperimentConfig {
    pub fn signal_spec(&self) -> SignalSpec {
        SignalSpec {
            n: self.n,
            k0: self.k0,
            k1: self.k1,
            snr: self.snr,
            generator: self.generator,
            noise: self.noise,
        }
    }

    /// Parameter domains; a failure here is a usage error.
    pub fn validate(&self) -> Result<()> {
        if !self.n.is_power_of_two() || self.n < 4 {
            bail!("n = {} must be a power of two >= 4", self.n);
        }
        if !self.k1.is_power_of_two() || 2 * self.k1 > self.n {
            bail!("k1 = {} must be a power of two with 2 k1 <= n", self.k1);
        }
        if self.k0 == 0 || self.k0 * self.k1 > self.n {
            bail!("k0 = {} blocks of width {} do not fit in n = {}", self.k0, self.k1, self.n);
        }
        if !(self.snr > 1.0) {
            bail!("snr = {} must exceed 1", self.snr);
        }
        if !(self.eps > 1.0 / self.n as f64 && self.eps <= 0.05) {
            bail!("eps = {} outside (1/n, 1/20]", self.eps);
        }
        if !(self.delta > 0.0 && self.delta <= 0.05) {
            bail!("delta = {} outside (0, 1/20]", self.delta);
        }
        if !(self.noiseless_snr >= 2.0) || !self.noiseless_snr.is_finite() {
            bail!("noiseless_snr = {} must be finite and >= 2", self.noiseless_snr);
        }
        if !(self.tolerance_scale >= 0.0) {
            bail!("tolerance_scale must be nonnegative");
        }
        if !(self.success_constant > 0.0) {
            bail!("success_constant must be positive");
        }
        Ok(())
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let num = |what: &str| anyhow!("bad value '{v}' for {what}");
        match key.trim() {
            "n" => self.n = v.parse().map_err(|_| num("n"))?,
            "k0" => self.k0 = v.parse().map_err(|_| num("k0"))?,
            "k1" => self.k1 = v.parse().map_err(|_| num("k1"))?,
            "snr" => self.snr = v.parse().map_err(|_| num("snr"))?,
            "eps" => self.eps = v.parse().map_err(|_| num("eps"))?,
            "delta" => self.delta = v.parse().map_err(|_| num("delta"))?,
            "trials" => self.trials = v.parse().map_err(|_| num("trials"))?,
            "seed" => self.seed = v.parse().map_err(|_| num("seed"))?,
            "generator" => self.generator = v.parse().map_err(|e: String| anyhow!(e))?,
            "noise" => self.noise = v.parse().map_err(|e: String| anyhow!(e))?,
            "out" => self.out = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "preset" => self.preset = v.parse().map_err(|e: String| anyhow!(e))?,
            "noiseless_snr" => self.noiseless_snr = v.parse().map_err(|_| num("noiseless_snr"))?,
            "tolerance_scale" => self.tolerance_scale = v.parse().map_err(|_| num("tolerance_scale"))?,
            "filter_order" => {
                self.filter_order = if v.is_empty() { None } else { Some(v.parse().map_err(|_| num("filter_order"))?) }
            }
            "success_constant" => self.success_constant = v.parse().map_err(|_| num("success_constant"))?,
            other => bail!("unknown config key '{other}'"),
        }
        Ok(())
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected 'key = value'", i + 1))?;
            cfg.set(k, v).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_text(&self) -> String {
        let opt = |o: Option<String>| o.unwrap_or_default();
        [
            format!("n = {}", self.n),
            format!("k0 = {}", self.k0),
            format!("k1 = {}", self.k1),
            format!("snr = {}", self.snr),
            format!("eps = {}", self.eps),
            format!("delta = {}", self.delta),
            format!("trials = {}", self.trials),
            format!("seed = {}", self.seed),
            format!("generator = {}", self.generator.name()),
            format!("noise = {}", self.noise.name()),
            format!("out = {}", opt(self.out.as_ref().map(|p| p.display().to_string()))),
            format!("preset = {}", self.preset.name()),
            format!("noiseless_snr = {}", self.noiseless_snr),
            format!("tolerance_scale = {}", self.tolerance_scale),
            format!("filter_order = {}", opt(self.filter_order.map(|f| f.to_string()))),
            format!("success_constant = {}", self.success_constant),
        ]
        .join("\n")
            + "\n"
    }
}
