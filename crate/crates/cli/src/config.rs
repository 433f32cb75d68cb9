//! Run configuration: a flat key-value format shared by config files and
//! `--set` overrides, with a canonical rendering used for hashing.

use segilm::agent::AgentArch;
use segilm::glyphset::{NoiseParams, SigmaUnits};
use segilm::ilm::{ChainRates, SimConfig};
use segilm::CoreError;

use crate::presets;

/// Everything a run needs besides output plumbing. Defaults mirror the
/// standard experiment: width-7 symmetric agents, noise level 1, ten
/// 100-generation instantiations.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Signal width for the symmetric architecture; ignored when `ew` is set.
    pub n_l: usize,
    /// Explicit word-encoder layer sizes (the word decoder mirrors them).
    pub ew: Option<Vec<usize>>,
    pub noise_level: Option<u8>,
    pub noise: NoiseParams,
    /// Variant images per glyph in the dataset.
    pub variants: usize,
    pub data_seed: u64,
    pub bottleneck_glyphs: usize,
    pub n_pairs: usize,
    pub n_everyday: usize,
    pub r: usize,
    pub n_epochs: usize,
    pub eta: f64,
    /// Per-chain multipliers applied to `eta`.
    pub rates: ChainRates,
    pub generations: usize,
    pub instantiations: usize,
    pub seed: u64,
    /// Background compositionality constant; when unset, a frozen value is
    /// used for known widths and a seeded Monte Carlo run otherwise.
    pub c0: Option<f64>,
    pub c0_samples: usize,
    /// Save every generation's agent snapshot.
    pub snapshots: bool,
    /// Emit the normalized per-epoch loss CSV.
    pub log_losses: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            n_l: 7,
            ew: None,
            noise_level: Some(1),
            noise: NoiseParams::level(1).unwrap(),
            variants: 100,
            data_seed: 1,
            bottleneck_glyphs: 40,
            n_pairs: 400,
            n_everyday: 1200,
            r: 15,
            n_epochs: 15,
            eta: 15.0,
            rates: ChainRates::default(),
            generations: 100,
            instantiations: 10,
            seed: 1,
            c0: None,
            c0_samples: 10_000,
            snapshots: false,
            log_losses: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CoreError> {
    value
        .parse()
        .map_err(|_| CoreError::InvalidConfig(format!("bad value {value:?} for key {key:?}")))
}

impl RunConfig {
    /// Apply one `key = value` assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CoreError> {
        match key {
            "n_l" => self.n_l = parse(key, value)?,
            "ew" => {
                let sizes: Result<Vec<usize>, _> =
                    value.split('x').map(|s| parse(key, s.trim())).collect();
                self.ew = Some(sizes?);
            }
            "noise" => {
                let level: u8 = parse(key, value)?;
                self.noise = NoiseParams::level(level).ok_or_else(|| {
                    CoreError::InvalidConfig(format!("noise level must be 1..=3, got {level}"))
                })?;
                self.noise_level = Some(level);
            }
            "mu" => {
                self.noise.mu = parse(key, value)?;
                self.noise_level = None;
            }
            "rho" => {
                self.noise.rho = parse(key, value)?;
                self.noise_level = None;
            }
            "sigma" => {
                self.noise.sigma = parse(key, value)?;
                self.noise_level = None;
            }
            "sigma_units" => {
                self.noise.sigma_units = match value {
                    "upsampled" => SigmaUnits::Upsampled,
                    "base" => SigmaUnits::Base,
                    _ => {
                        return Err(CoreError::InvalidConfig(format!(
                            "sigma_units must be upsampled|base, got {value:?}"
                        )))
                    }
                };
            }
            "variants" => self.variants = parse(key, value)?,
            "data_seed" => self.data_seed = parse(key, value)?,
            "bottleneck_glyphs" => self.bottleneck_glyphs = parse(key, value)?,
            "n_pairs" => self.n_pairs = parse(key, value)?,
            "n_everyday" => self.n_everyday = parse(key, value)?,
            "r" => self.r = parse(key, value)?,
            "n_epochs" => self.n_epochs = parse(key, value)?,
            "eta" => self.eta = parse(key, value)?,
            "eta_scale_encoder" => self.rates.encoder = parse(key, value)?,
            "eta_scale_decoder" => self.rates.decoder = parse(key, value)?,
            "eta_scale_outer" => self.rates.outer = parse(key, value)?,
            "eta_scale_inner" => self.rates.inner = parse(key, value)?,
            "generations" => self.generations = parse(key, value)?,
            "instantiations" => self.instantiations = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "c0" => self.c0 = Some(parse(key, value)?),
            "c0_samples" => self.c0_samples = parse(key, value)?,
            "snapshots" => self.snapshots = parse(key, value)?,
            "log_losses" => self.log_losses = parse(key, value)?,
            _ => {
                return Err(CoreError::InvalidConfig(format!(
                    "unknown config key {key:?}"
                )));
            }
        }
        Ok(())
    }

    /// Parse a config file body: `key = value` lines, `#` comments.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CoreError> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CoreError::InvalidConfig(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    /// Canonical rendering: every effective key in fixed order. Hashing this
    /// text identifies the configuration.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let arch = self.arch();
        s.push_str(&format!("ew = {}\n", join_sizes(&arch.ew)));
        s.push_str(&format!("n_l = {}\n", arch.n_l()));
        match self.noise_level {
            Some(l) => s.push_str(&format!("noise = {l}\n")),
            None => {
                s.push_str(&format!("mu = {}\n", self.noise.mu));
                s.push_str(&format!("rho = {}\n", self.noise.rho));
                s.push_str(&format!("sigma = {}\n", self.noise.sigma));
            }
        }
        let units = match self.noise.sigma_units {
            SigmaUnits::Upsampled => "upsampled",
            SigmaUnits::Base => "base",
        };
        s.push_str(&format!("sigma_units = {units}\n"));
        s.push_str(&format!("variants = {}\n", self.variants));
        s.push_str(&format!("data_seed = {}\n", self.data_seed));
        s.push_str(&format!("bottleneck_glyphs = {}\n", self.bottleneck_glyphs));
        s.push_str(&format!("n_pairs = {}\n", self.n_pairs));
        s.push_str(&format!("n_everyday = {}\n", self.n_everyday));
        s.push_str(&format!("r = {}\n", self.r));
        s.push_str(&format!("n_epochs = {}\n", self.n_epochs));
        s.push_str(&format!("eta = {}\n", self.eta));
        s.push_str(&format!("eta_scale_encoder = {}\n", self.rates.encoder));
        s.push_str(&format!("eta_scale_decoder = {}\n", self.rates.decoder));
        s.push_str(&format!("eta_scale_outer = {}\n", self.rates.outer));
        s.push_str(&format!("eta_scale_inner = {}\n", self.rates.inner));
        s.push_str(&format!("generations = {}\n", self.generations));
        s.push_str(&format!("instantiations = {}\n", self.instantiations));
        s.push_str(&format!("seed = {}\n", self.seed));
        s.push_str(&format!("c0 = {}\n", self.resolve_c0()));
        s.push_str(&format!("snapshots = {}\n", self.snapshots));
        s.push_str(&format!("log_losses = {}\n", self.log_losses));
        s
    }

    pub fn arch(&self) -> AgentArch {
        match &self.ew {
            Some(sizes) => AgentArch::with_word_encoder(sizes.clone())
                .unwrap_or_else(|_| AgentArch::symmetric(self.n_l)),
            None => AgentArch::symmetric(self.n_l),
        }
    }

    /// The background constant this run will use: explicit, else frozen for
    /// known widths, else a seeded Monte Carlo estimate.
    pub fn resolve_c0(&self) -> f64 {
        let n_l = self.arch().n_l();
        self.c0
            .or_else(|| presets::frozen_c0(n_l))
            .unwrap_or_else(|| segilm::ilm::default_c0(n_l, self.c0_samples))
    }

    pub fn sim_config(&self) -> Result<SimConfig, CoreError> {
        if let Some(sizes) = &self.ew {
            // Surface bad explicit sizes here rather than silently falling
            // back like arch() does for canonical().
            AgentArch::with_word_encoder(sizes.clone())?;
        }
        let mut sim = SimConfig::new(self.arch());
        sim.bottleneck_glyphs = self.bottleneck_glyphs;
        sim.n_pairs = self.n_pairs;
        sim.n_everyday = self.n_everyday;
        sim.r = self.r;
        sim.n_epochs = self.n_epochs;
        sim.eta = self.eta;
        sim.rates = self.rates;
        sim.generations = self.generations;
        sim.master_seed = self.seed;
        sim.c0_samples = self.c0_samples;
        // Validate before resolve_c0: the Monte Carlo fallback requires a
        // plausible width and must not run on a rejected configuration.
        sim.validate()?;
        sim.c0_override = Some(self.resolve_c0());
        Ok(sim)
    }
}

pub fn join_sizes(sizes: &[usize]) -> String {
    sizes
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join("x")
}
