//! Flat `key = value` scenario files with `[section]` headers.
//!
//! ```text
//! [scenario]
//! id = beam-continuous
//! layout = right
//!
//! [sampler]
//! n_iterations = 12000
//! ```
//!
//! Keys are validated against the schema of the chosen scenario; unknown or
//! inapplicable keys are reported with their line number.

use std::str::FromStr;

use crate::beam::BeamConfig;
use crate::error::{Error, Result};
use crate::fem::FemConfig;
use crate::samplers::SamplerConfig;
use crate::sde::SdeConfig;

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub section: String,
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// Parses the raw file into entries; duplicates are rejected.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut section = String::new();
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| Error::Config { line, message: format!("malformed section header `{s}`") })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::Config { line, message: format!("expected `key = value`, found `{s}`") })?;
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(Error::Config { line, message: "empty key".into() });
        }
        if let Some(prev) = out.iter().find(|e| e.section == section && e.key == key) {
            return Err(Error::Config {
                line,
                message: format!("duplicate key `{}` (first set on line {})", qualified(&section, &key), prev.line),
            });
        }
        out.push(Entry { section: section.clone(), key, value: v.trim().to_string(), line });
    }
    Ok(out)
}

fn qualified(section: &str, key: &str) -> String {
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    BeamDiscrete,
    BeamContinuous,
    Sde,
    SourceDetection,
}

impl ScenarioKind {
    pub fn id(self) -> &'static str {
        match self {
            ScenarioKind::BeamDiscrete => "beam-discrete",
            ScenarioKind::BeamContinuous => "beam-continuous",
            ScenarioKind::Sde => "sde",
            ScenarioKind::SourceDetection => "source-detection",
        }
    }

    pub fn is_beam(self) -> bool {
        matches!(self, ScenarioKind::BeamDiscrete | ScenarioKind::BeamContinuous)
    }

    fn section(self) -> &'static str {
        match self {
            ScenarioKind::BeamDiscrete | ScenarioKind::BeamContinuous => "beam",
            ScenarioKind::Sde => "sde",
            ScenarioKind::SourceDetection => "fem",
        }
    }
}

impl FromStr for ScenarioKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "beam-discrete" => Ok(ScenarioKind::BeamDiscrete),
            "beam-continuous" => Ok(ScenarioKind::BeamContinuous),
            "sde" => Ok(ScenarioKind::Sde),
            "source-detection" => Ok(ScenarioKind::SourceDetection),
            _ => Err(format!(
                "unknown scenario `{s}` (expected beam-discrete, beam-continuous, sde or source-detection)"
            )),
        }
    }
}

/// Sensor placement for the beam experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Left,
    Right,
    Standard,
}

impl FromStr for Layout {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "left" => Ok(Layout::Left),
            "right" => Ok(Layout::Right),
            "standard" => Ok(Layout::Standard),
            _ => Err(format!("unknown layout `{s}` (expected left, right or standard)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSettings {
    pub cfg: BeamConfig<f64>,
    /// Explicit sensor positions; the layout decides when empty.
    pub sensors: Vec<f64>,
    pub k_prior_mean: f64,
    pub k_min: usize,
    pub k_max: Option<usize>,
    /// Grid size of the piecewise-constant case (point-mass prior).
    pub k_fixed: usize,
    pub representation_intervals: usize,
    pub prior_mean: f64,
    pub prior_variance: f64,
    pub gp_variance: f64,
    pub gp_two_ell_sq: f64,
}

impl Default for BeamSettings {
    fn default() -> Self {
        Self {
            cfg: BeamConfig::default(),
            sensors: Vec::new(),
            k_prior_mean: 60.0,
            k_min: 2,
            k_max: None,
            k_fixed: 85,
            representation_intervals: 100,
            prior_mean: 200.0,
            prior_variance: 25.0,
            gp_variance: 50.0,
            gp_two_ell_sq: 0.5,
        }
    }
}

impl BeamSettings {
    pub fn sensors_for(&self, layout: Layout) -> Vec<f64> {
        if !self.sensors.is_empty() {
            return self.sensors.clone();
        }
        let start = match layout {
            Layout::Left => 0.5,
            Layout::Right | Layout::Standard => 5.5,
        };
        (0..9).map(|i| start + 0.5 * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeSettings {
    pub cfg: SdeConfig<f64>,
    pub k: usize,
}

impl Default for SdeSettings {
    fn default() -> Self {
        Self { cfg: SdeConfig::default(), k: 24 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FemSettings {
    pub cfg: FemConfig<f64>,
    pub k: usize,
    pub source: [f64; 2],
    pub initial_source: [f64; 2],
    pub initial_theta: [f64; 4],
    pub source_step: f64,
    pub theta_step: f64,
    pub reference_k: usize,
}

impl Default for FemSettings {
    fn default() -> Self {
        Self {
            cfg: FemConfig::default(),
            k: 100,
            source: [0.85, 0.85],
            initial_source: [0.2, 0.2],
            initial_theta: [1.0; 4],
            source_step: 0.2,
            theta_step: 0.5,
            reference_k: crate::fem::REFERENCE_K,
        }
    }
}

/// Complete description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub layout: Layout,
    /// Fixed uniform discretization instead of the adaptive one.
    pub baseline: bool,
    /// Data equal to the noise-free reference output.
    pub zero_noise: bool,
    pub data_seed: u64,
    pub chain_seed: u64,
    pub sampler: SamplerConfig,
    pub beam: BeamSettings,
    pub sde: SdeSettings,
    pub fem: FemSettings,
}

impl ScenarioConfig {
    /// Full-length parameters for a scenario.
    pub fn defaults(kind: ScenarioKind) -> Self {
        let (n, beta) = match kind {
            ScenarioKind::BeamDiscrete | ScenarioKind::BeamContinuous => (120_000, 0.08),
            ScenarioKind::Sde => (100_000, 0.1),
            ScenarioKind::SourceDetection => (10_000, 0.1),
        };
        Self {
            kind,
            layout: Layout::Standard,
            baseline: false,
            zero_noise: false,
            data_seed: 1,
            chain_seed: 2,
            sampler: SamplerConfig { beta, zeta: 0.5, n_iterations: n, seed: 2, ..Default::default() },
            beam: BeamSettings::default(),
            sde: SdeSettings::default(),
            fem: FemSettings::default(),
        }
    }

    /// Shortens the chain: by ten for the beam and SDE, by five for the FEM.
    pub fn desk_scale(mut self) -> Self {
        let div = if self.kind == ScenarioKind::SourceDetection { 5 } else { 10 };
        self.sampler.n_iterations /= div;
        self
    }

    pub fn with_chain_seed(mut self, seed: u64) -> Self {
        self.chain_seed = seed;
        self.sampler.seed = seed;
        self
    }

    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_entries(text)?;
        let id = entries
            .iter()
            .find(|e| e.section == "scenario" && e.key == "id")
            .ok_or(Error::Config { line: 0, message: "missing required key `scenario.id`".into() })?;
        let kind = id.value.parse().map_err(|m| Error::Config { line: id.line, message: m })?;
        let mut cfg = Self::defaults(kind);
        for e in &entries {
            cfg.apply(e)?;
        }
        cfg.sampler.seed = cfg.chain_seed;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, e: &Entry) -> Result<()> {
        let name = qualified(&e.section, &e.key);
        let err = |message: String| Error::Config { line: e.line, message };
        let v = e.value.as_str();
        fn num<X: FromStr>(name: &str, v: &str) -> std::result::Result<X, String> {
            v.parse().map_err(|_| format!("invalid value `{v}` for key `{name}`"))
        }
        let n = |_: ()| -> std::result::Result<f64, String> { num(&name, v) };
        let u = |_: ()| -> std::result::Result<usize, String> { num(&name, v) };
        let s = |_: ()| -> std::result::Result<u64, String> { num(&name, v) };
        let list = |_: ()| -> std::result::Result<Vec<f64>, String> {
            v.split(',').map(|x| num::<f64>(&name, x.trim())).collect()
        };
        if ["beam", "sde", "fem"].contains(&e.section.as_str()) && e.section != self.kind.section() {
            return Err(err(format!("key `{name}` does not apply to scenario {}", self.kind.id())));
        }
        let r: std::result::Result<(), String> = (|| {
            match (e.section.as_str(), e.key.as_str()) {
                ("scenario", "id") => {}
                ("scenario", "layout") => self.layout = v.parse()?,
                ("scenario", "baseline") => {
                    self.baseline = v.parse().map_err(|_| format!("invalid value `{v}` for key `{name}`"))?
                }
                ("scenario", "zero_noise") => {
                    self.zero_noise = v.parse().map_err(|_| format!("invalid value `{v}` for key `{name}`"))?
                }
                ("scenario", "data_seed") => self.data_seed = s(())?,
                ("scenario", "chain_seed") => self.chain_seed = s(())?,
                ("sampler", "n_iterations") => self.sampler.n_iterations = u(())?,
                ("sampler", "beta") => self.sampler.beta = n(())?,
                ("sampler", "zeta") => self.sampler.zeta = n(())?,
                ("sampler", "thin") => self.sampler.thin = u(())?,
                ("sampler", "k_block") => self.sampler.k_block = u(())?,
                ("sampler", "burn_in") => self.sampler.burn_in = n(())?,
                ("beam", "delta") => self.beam.cfg.delta = n(())?,
                ("beam", "deflection_unit") => self.beam.cfg.deflection_unit = n(())?,
                ("beam", "noise_variance") => self.beam.cfg.noise_variance = n(())?,
                ("beam", "gravity") => self.beam.cfg.gravity = n(())?,
                ("beam", "tip_mass") => self.beam.cfg.tip_mass = n(())?,
                ("beam", "sensors") => self.beam.sensors = list(())?,
                ("beam", "k_prior_mean") => self.beam.k_prior_mean = n(())?,
                ("beam", "k_min") => self.beam.k_min = u(())?,
                ("beam", "k_max") => self.beam.k_max = Some(u(())?),
                ("beam", "k_fixed") => self.beam.k_fixed = u(())?,
                ("beam", "representation_intervals") => self.beam.representation_intervals = u(())?,
                ("beam", "prior_mean") => self.beam.prior_mean = n(())?,
                ("beam", "prior_variance") => self.beam.prior_variance = n(())?,
                ("beam", "gp_variance") => self.beam.gp_variance = n(())?,
                ("beam", "gp_two_ell_sq") => self.beam.gp_two_ell_sq = n(())?,
                ("sde", "k") => self.sde.k = u(())?,
                ("sde", "t0") => self.sde.cfg.t0 = n(())?,
                ("sde", "t_end") => self.sde.cfg.t_end = n(())?,
                ("sde", "noise_variance") => self.sde.cfg.noise_variance = n(())?,
                ("sde", "representation_intervals") => self.sde.cfg.representation_intervals = u(())?,
                ("sde", "divergence_threshold") => self.sde.cfg.divergence_threshold = n(())?,
                ("sde", "obs_times") => self.sde.cfg.obs_times = list(())?,
                ("fem", "k") => self.fem.k = u(())?,
                ("fem", "updates_per_point") => self.fem.cfg.updates_per_point = u(())?,
                ("fem", "noise_variance") => self.fem.cfg.noise_variance = n(())?,
                ("fem", "mesh_seed") => self.fem.cfg.mesh_seed = s(())?,
                ("fem", "source") => self.fem.source = pair(list(())?, &name)?,
                ("fem", "initial_source") => self.fem.initial_source = pair(list(())?, &name)?,
                ("fem", "initial_theta") => {
                    let t = list(())?;
                    self.fem.initial_theta =
                        t.try_into().map_err(|_| format!("key `{name}` needs four values"))?;
                }
                ("fem", "source_step") => self.fem.source_step = n(())?,
                ("fem", "theta_step") => self.fem.theta_step = n(())?,
                ("fem", "reference_k") => self.fem.reference_k = u(())?,
                _ => return Err(format!("unknown key `{name}`")),
            }
            Ok(())
        })();
        r.map_err(err)
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        match self.kind {
            ScenarioKind::BeamDiscrete | ScenarioKind::BeamContinuous => {
                self.beam.cfg.validate()?;
                if self.beam.k_fixed == 0 || self.beam.representation_intervals == 0 {
                    return Err(Error::InvalidParameter("beam grid sizes must be positive".into()));
                }
            }
            ScenarioKind::Sde => {
                self.sde.cfg.validate()?;
                if self.sde.k == 0 {
                    return Err(Error::InvalidParameter("sde.k must be positive".into()));
                }
            }
            ScenarioKind::SourceDetection => {
                if self.fem.k == 0 || self.fem.reference_k == 0 {
                    return Err(Error::InvalidParameter("mesh sizes must be positive".into()));
                }
                crate::fem::BetaGridDensity::new(self.fem.initial_theta)?;
            }
        }
        Ok(())
    }
}

fn pair(v: Vec<f64>, name: &str) -> std::result::Result<[f64; 2], String> {
    v.try_into().map_err(|_| format!("key `{name}` needs two values"))
}
