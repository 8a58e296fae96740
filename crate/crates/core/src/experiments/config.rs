//! TOML experiment configuration. Physical quantities are SI with the unit in
//! the key name. Rabi frequencies and decay rates are given as `Ω/2π` in Hz.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::eit::EitParams;
use crate::error::{Error, Result};
use crate::quantum::DecayRates;
use crate::registry::{StateRegistry, Transition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandRole {
    Communication,
    Sensing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modulation {
    Bpsk,
    Qpsk,
}

impl Modulation {
    pub fn order(self) -> usize {
        match self {
            Modulation::Bpsk => 2,
            Modulation::Qpsk => 4,
        }
    }

    pub fn bits_per_symbol(self) -> u32 {
        self.order().trailing_zeros()
    }

    /// Constellation rotation: π/4 for QPSK so the points sit on the diagonals.
    pub fn offset(self) -> f64 {
        match self {
            Modulation::Bpsk => 0.0,
            Modulation::Qpsk => PI / 4.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    #[serde(default)]
    pub name: String,
    pub lower: String,
    pub upper: String,
    /// Defaults to the transition frequency (resonant carrier).
    #[serde(default)]
    pub carrier_hz: Option<f64>,
    pub bandwidth_hz: f64,
    #[serde(default = "default_modulation")]
    pub modulation: Modulation,
    #[serde(default = "default_role")]
    pub role: BandRole,
}

fn default_modulation() -> Modulation {
    Modulation::Qpsk
}

fn default_role() -> BandRole {
    BandRole::Communication
}

impl BandConfig {
    pub fn transition<'a>(&self, registry: &'a StateRegistry) -> Result<&'a Transition> {
        registry.lookup(&self.lower, &self.upper)
    }

    pub fn carrier(&self, t: &Transition) -> f64 {
        self.carrier_hz.unwrap_or(t.frequency)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EitSection {
    pub probe_rabi_hz: f64,
    pub coupling_rabi_hz: f64,
    pub intermediate_decay_hz: f64,
    pub rydberg_decay_hz: f64,
    pub od: f64,
    /// RF bias set by the reference field.
    pub operating_rabi_hz: f64,
    /// RF Rabi frequency of the `eit-spectrum` run.
    pub rf_rabi_hz: f64,
    pub span_hz: f64,
    pub points: usize,
}

impl Default for EitSection {
    fn default() -> Self {
        let p = EitParams::default();
        Self {
            probe_rabi_hz: p.probe_rabi / (2.0 * PI),
            coupling_rabi_hz: p.coupling_rabi / (2.0 * PI),
            intermediate_decay_hz: p.rates.intermediate / (2.0 * PI),
            rydberg_decay_hz: p.rates.rydberg / (2.0 * PI),
            od: p.od,
            operating_rabi_hz: crate::transduction::DEFAULT_OPERATING_RABI / (2.0 * PI),
            rf_rabi_hz: 10e6,
            span_hz: 40e6,
            points: 801,
        }
    }
}

impl EitSection {
    pub fn params(&self) -> EitParams {
        EitParams {
            probe_rabi: 2.0 * PI * self.probe_rabi_hz,
            coupling_rabi: 2.0 * PI * self.coupling_rabi_hz,
            rates: DecayRates {
                intermediate: 2.0 * PI * self.intermediate_decay_hz,
                rydberg: 2.0 * PI * self.rydberg_decay_hz,
            },
            od: self.od,
        }
    }

    pub fn operating_rabi(&self) -> f64 {
        2.0 * PI * self.operating_rabi_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSection {
    pub atom_count: f64,
    pub coherence_time_s: f64,
    /// How far the RARE equivalent field-noise floor sits below the classic
    /// half-wave thermal floor at each carrier.
    pub practical_offset_db: f64,
}

impl Default for SensorSection {
    fn default() -> Self {
        Self {
            atom_count: 5e5,
            coherence_time_s: 225e-6,
            practical_offset_db: 7.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowerSection {
    pub ptx_dbm: Vec<f64>,
}

impl Default for PowerSection {
    fn default() -> Self {
        Self {
            ptx_dbm: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
        }
    }
}

/// Free-space link with Rayleigh block fading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub trials: usize,
    pub distance_m: f64,
    /// Linear transmit antenna gain.
    pub tx_gain: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            trials: 10_000,
            distance_m: 500.0,
            tx_gain: 1.0,
        }
    }
}

/// Vibrating radar target and the sensing receiver's sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TargetSection {
    pub amplitude_m: f64,
    pub frequency_hz: f64,
    pub observation_s: f64,
    pub range_m: f64,
    pub rcs_m2: f64,
    /// Transmit power of the standalone `vibration` run.
    pub ptx_dbm: f64,
    pub sample_rate_hz: f64,
    pub if_hz: f64,
    /// Samples per phase estimate.
    pub block_samples: usize,
    /// Independent noise realisations pooled into each NMSE.
    pub trials: usize,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            amplitude_m: 10e-6,
            frequency_hz: 20.0,
            observation_s: 0.5,
            range_m: 5.0,
            rcs_m2: 1.0,
            ptx_dbm: 10.0,
            sample_rate_hz: 200e3,
            if_hz: 2e3,
            block_samples: 100,
            trials: 1,
        }
    }
}

/// Single-band heterodyne PSK link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkSection {
    pub es_n0_db: Vec<f64>,
    pub symbols: usize,
    pub pilots: usize,
    pub sample_rate_hz: f64,
    pub if_hz: f64,
    pub samples_per_symbol: usize,
    /// Signal amplitude as a fraction of the reference amplitude.
    pub signal_to_reference: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            es_n0_db: vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0],
            symbols: 2000,
            pilots: 256,
            sample_rate_hz: 16e3,
            if_hz: 2e3,
            samples_per_symbol: 8,
            signal_to_reference: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MultibandSection {
    pub symbols: usize,
    pub pilots: usize,
    pub es_n0_db: f64,
    /// Band `b` beats with its reference at `(b + 1)·if_base_hz`.
    pub if_base_hz: f64,
    pub sample_rate_hz: f64,
    pub samples_per_symbol: usize,
    pub signal_to_reference: f64,
}

impl Default for MultibandSection {
    fn default() -> Self {
        Self {
            symbols: 2000,
            pilots: 64,
            es_n0_db: 20.0,
            if_base_hz: 2e3,
            sample_rate_hz: 32e3,
            samples_per_symbol: 16,
            signal_to_reference: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MimoSection {
    pub receivers: usize,
    pub users: usize,
    pub reference_ratio: f64,
    pub trials: usize,
    /// Per-user signal power over magnitude-noise variance.
    pub snr_db: Vec<f64>,
    pub max_iter: usize,
    pub tol: f64,
    pub simo_branches: Vec<usize>,
    pub simo_trials: usize,
    pub simo_snr_db: f64,
}

impl Default for MimoSection {
    fn default() -> Self {
        Self {
            receivers: 16,
            users: 4,
            reference_ratio: 3.0,
            trials: 100,
            snr_db: vec![10.0, 20.0, 30.0, 40.0],
            max_iter: 200,
            tol: 1e-8,
            simo_branches: vec![1, 2, 4, 8],
            simo_trials: 10_000,
            simo_snr_db: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivitySection {
    pub start_hz: f64,
    pub stop_hz: f64,
    pub points: usize,
    /// Explicit grid; overrides start/stop/points.
    pub grid_hz: Option<Vec<f64>>,
    pub fixed_length_m: f64,
    pub fixed_efficiency: f64,
    pub min_n: u32,
    pub max_n: u32,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        Self {
            start_hz: 1e9,
            stop_hz: 100e9,
            points: 41,
            grid_hz: None,
            fixed_length_m: crate::sensitivity::FIXED_DIPOLE_LENGTH_M,
            fixed_efficiency: crate::sensitivity::FIXED_DIPOLE_EFFICIENCY,
            min_n: 18,
            max_n: 110,
        }
    }
}

impl SensitivitySection {
    pub fn grid(&self) -> Vec<f64> {
        match &self.grid_hz {
            Some(g) => g.clone(),
            None => crate::sensitivity::log_grid(self.start_hz, self.stop_hz, self.points),
        }
    }
}

/// Everything an experiment run needs besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Optional experiment id; when present it must match the subcommand.
    pub experiment: Option<String>,
    /// Transition table CSV; relative paths resolve against the config file.
    pub registry_path: Option<PathBuf>,
    pub seed: Option<u64>,
    pub eit: EitSection,
    pub sensor: SensorSection,
    pub bands: Vec<BandConfig>,
    pub power: PowerSection,
    pub channel: ChannelSection,
    pub target: TargetSection,
    pub link: LinkSection,
    pub multiband: MultibandSection,
    pub mimo: MimoSection,
    pub sensitivity: SensitivitySection,
}

/// The dual-band communication and sensing pair on the 60D5/2 state.
pub fn msac_bands() -> Vec<BandConfig> {
    vec![
        BandConfig {
            name: "communication".into(),
            lower: "60D5/2".into(),
            upper: "61P3/2".into(),
            carrier_hz: Some(3.213e9),
            bandwidth_hz: 500e3,
            modulation: Modulation::Qpsk,
            role: BandRole::Communication,
        },
        BandConfig {
            name: "sensing".into(),
            lower: "60D5/2".into(),
            upper: "62P3/2".into(),
            carrier_hz: Some(30.618e9),
            bandwidth_hz: 100e3,
            modulation: Modulation::Qpsk,
            role: BandRole::Sensing,
        },
    ]
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: None,
            registry_path: None,
            seed: None,
            eit: EitSection::default(),
            sensor: SensorSection::default(),
            bands: msac_bands(),
            power: PowerSection::default(),
            channel: ChannelSection::default(),
            target: TargetSection::default(),
            link: LinkSection::default(),
            multiband: MultibandSection::default(),
            mimo: MimoSection::default(),
            sensitivity: SensitivitySection::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `registry_path` is made relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(reg) = &cfg.registry_path {
            if reg.is_relative() {
                let base = path.parent().unwrap_or_else(|| Path::new("."));
                cfg.registry_path = Some(base.join(reg));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.power.ptx_dbm.is_empty() || self.power.ptx_dbm.iter().any(|p| !p.is_finite()) {
            return bad("power.ptx_dbm must be a non-empty list of finite values");
        }
        if self.channel.trials == 0 || self.target.trials == 0 {
            return bad("trial counts must be at least 1");
        }
        if !(self.channel.distance_m > 0.0 && self.channel.tx_gain > 0.0) {
            return bad("channel distance and gain must be positive");
        }
        if !self.sensor.practical_offset_db.is_finite() {
            return bad("sensor.practical_offset_db must be finite");
        }
        if !(self.sensor.atom_count >= 1.0 && self.sensor.coherence_time_s > 0.0) {
            return bad("sensor needs atom_count ≥ 1 and a positive coherence time");
        }
        for b in &self.bands {
            if !(b.bandwidth_hz > 0.0) || b.carrier_hz.is_some_and(|f| !(f > 0.0)) {
                return bad("band carrier and bandwidth must be positive");
            }
        }
        let t = &self.target;
        if !(t.amplitude_m >= 0.0 && t.frequency_hz > 0.0 && t.observation_s > 0.0) {
            return bad("target needs amplitude ≥ 0 and positive frequency and duration");
        }
        if !(t.range_m > 0.0 && t.rcs_m2 > 0.0 && t.sample_rate_hz > 0.0 && t.block_samples > 0) {
            return bad("target range, cross-section, sample rate and block size must be positive");
        }
        if self.link.symbols <= self.link.pilots || self.multiband.symbols <= self.multiband.pilots
        {
            return bad("symbol counts must exceed the pilot counts");
        }
        if self.mimo.trials == 0 || self.mimo.simo_trials == 0 || self.mimo.simo_branches.is_empty()
        {
            return bad("mimo trial counts and branch list must be non-empty");
        }
        if self.sensitivity.min_n > self.sensitivity.max_n {
            return bad("sensitivity.min_n must not exceed max_n");
        }
        Ok(())
    }

    /// Registry from `registry_path`, or the built-in defaults.
    pub fn registry(&self) -> Result<StateRegistry> {
        match &self.registry_path {
            Some(p) => StateRegistry::from_csv_path(p, Default::default()),
            None => Ok(StateRegistry::with_defaults()),
        }
    }

    /// Bands with the given role.
    pub fn band(&self, role: BandRole) -> Result<&BandConfig> {
        self.bands
            .iter()
            .find(|b| b.role == role)
            .ok_or_else(|| Error::Config(format!("no band with role {role:?}")))
    }

    /// Seed from the config, overridden by an explicit one.
    pub fn seed_or(&self, explicit: Option<u64>) -> u64 {
        explicit.or(self.seed).unwrap_or(0)
    }
}
