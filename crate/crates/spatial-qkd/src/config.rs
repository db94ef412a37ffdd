//! TOML run configuration: one section per subsystem, every field
//! defaulted, so an empty file is a valid configuration describing the
//! reference experiment.

use crate::alphabet::SymbolGrid;
use crate::channel::{
    ChannelModel, CrosstalkProfile, GaussianSpot, WidthConvention, DEFAULT_DETECTION_PROBABILITY,
};
use crate::detector::EventCuts;
use crate::protocol::{SendSpec, SessionConfig};
use crate::security::FiniteKeyParams;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown crosstalk preset {0:?}; expected noise-decomposition, fitted-ii, fitted-ff or noiseless")]
    UnknownProfile(String),
    #[error("unknown send distribution {0:?}; expected uniform or gaussian")]
    UnknownSend(String),
    #[error("unknown width convention {0:?}; expected waist, std-dev or fwhm")]
    UnknownWidthConvention(String),
    #[error("basis_bias {0} outside [0, 1]")]
    BadBasisBias(f64),
    #[error("detection_probability {0} outside [0, 1]")]
    BadDetectionProbability(f64),
    #[error(transparent)]
    Alphabet(#[from] crate::alphabet::AlphabetError),
    #[error(transparent)]
    Channel(#[from] crate::channel::ChannelError),
    #[error(transparent)]
    Detector(#[from] crate::detector::DetectorError),
}

/// Top-level configuration file.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub grid: GridSection,
    pub channel: ChannelSection,
    pub session: SessionSection,
    pub finite_key: FiniteKeySection,
    pub attack: AttackSection,
    pub detector: DetectorSection,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub rows: usize,
    pub cols: usize,
    pub cell_pixels: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            rows: 32,
            cols: 32,
            cell_pixels: 10,
        }
    }
}

/// A crosstalk profile: either a named preset or explicit fractions.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum ProfileSpec {
    Named(String),
    Explicit {
        p0: f64,
        p1: f64,
        p2: f64,
        p_rest: f64,
    },
}

impl ProfileSpec {
    pub fn resolve(&self) -> Result<CrosstalkProfile, ConfigError> {
        match self {
            ProfileSpec::Named(name) => match name.as_str() {
                "noise-decomposition" => Ok(CrosstalkProfile::noise_decomposition()),
                "fitted-ii" => Ok(CrosstalkProfile::fitted_ii()),
                "fitted-ff" => Ok(CrosstalkProfile::fitted_ff()),
                "noiseless" => Ok(CrosstalkProfile::noiseless()),
                other => Err(ConfigError::UnknownProfile(other.to_string())),
            },
            ProfileSpec::Explicit { p0, p1, p2, p_rest } => {
                Ok(CrosstalkProfile::new(*p0, *p1, *p2, *p_rest)?)
            }
        }
    }
}

/// Incompatible-basis spot given as fitted widths in pixels.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SpotSpec {
    pub width_row: f64,
    pub width_col: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// Crosstalk when both parties use the image basis.
    pub profile_ii: ProfileSpec,
    /// Crosstalk when both parties use the Fourier basis.
    pub profile_ff: ProfileSpec,
    /// Spot widths for image-prepared, Fourier-measured rounds.
    pub spot_if: SpotSpec,
    /// Spot widths for Fourier-prepared, image-measured rounds.
    pub spot_fi: SpotSpec,
    /// How the spot widths map to Gaussian sigmas: "waist", "std-dev" or "fwhm".
    pub width_convention: String,
    pub detection_probability: f64,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            profile_ii: ProfileSpec::Named("fitted-ii".into()),
            profile_ff: ProfileSpec::Named("fitted-ff".into()),
            spot_if: SpotSpec {
                width_row: 106.7,
                width_col: 89.9,
            },
            spot_fi: SpotSpec {
                width_row: 102.0,
                width_col: 96.3,
            },
            width_convention: "waist".into(),
            detection_probability: DEFAULT_DETECTION_PROBABILITY,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SessionSection {
    pub rounds: u64,
    /// Probability of picking the image basis, for both parties.
    pub basis_bias: f64,
    /// Alice's symbol distribution: "gaussian" (matches the hidden-basis
    /// spot) or "uniform".
    pub send: String,
    pub qber_abort_threshold: f64,
}

impl Default for SessionSection {
    fn default() -> Self {
        Self {
            rounds: 100_000,
            basis_bias: 0.5,
            send: "gaussian".into(),
            qber_abort_threshold: 0.078 + 0.02,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FiniteKeySection {
    pub sifting_fraction: f64,
    pub pe_fraction: f64,
    pub eps_ec: f64,
    pub eps_pa: f64,
    /// Override for the fidelity spread; defaults to sqrt(F(1-F)).
    pub delta_f: Option<f64>,
}

impl Default for FiniteKeySection {
    fn default() -> Self {
        let fk = FiniteKeyParams::defaults(0);
        Self {
            sifting_fraction: fk.sifting_fraction,
            pe_fraction: fk.pe_fraction,
            eps_ec: fk.eps_ec,
            eps_pa: fk.eps_pa,
            delta_f: fk.delta_f,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    /// Intrinsic channel error rate entering Q_Total.
    pub qber: f64,
    /// Alice's send entropy I(Alice) in bits.
    pub i_alice: f64,
    /// Detection thresholds sigma swept by attack-sweep.
    pub sigma: Vec<f64>,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            qber: 0.076,
            i_alice: 9.4,
            sigma: vec![0.005, 0.01, 0.02],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub pixel_threshold: u16,
    pub cluster_size_min: usize,
    pub cluster_size_max: usize,
    pub cluster_intensity_min: u32,
    pub cluster_intensity_max: u32,
    /// Gaussian readout-noise variance in counts².
    pub noise_variance: f64,
    /// Rendered blob amplitude in counts.
    pub blob_amplitude: f64,
    /// Active-region origin (top-left pixel); defaults to centered.
    pub origin_row: Option<usize>,
    pub origin_col: Option<usize>,
}

impl Default for DetectorSection {
    fn default() -> Self {
        let cuts = EventCuts::default();
        Self {
            pixel_threshold: cuts.pixel_threshold,
            cluster_size_min: cuts.cluster_size_min,
            cluster_size_max: cuts.cluster_size_max,
            cluster_intensity_min: cuts.cluster_intensity_min,
            cluster_intensity_max: cuts.cluster_intensity_max,
            noise_variance: 0.4,
            blob_amplitude: 30.0,
            origin_row: None,
            origin_col: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn grid(&self) -> Result<SymbolGrid, ConfigError> {
        Ok(SymbolGrid::new(
            self.grid.rows,
            self.grid.cols,
            self.grid.cell_pixels,
        )?)
    }

    pub fn width_convention(&self) -> Result<WidthConvention, ConfigError> {
        match self.channel.width_convention.as_str() {
            "waist" => Ok(WidthConvention::Waist),
            "std-dev" => Ok(WidthConvention::StdDev),
            "fwhm" => Ok(WidthConvention::Fwhm),
            other => Err(ConfigError::UnknownWidthConvention(other.to_string())),
        }
    }

    pub fn channel_model(&self) -> Result<ChannelModel, ConfigError> {
        let grid = self.grid()?;
        let convention = self.width_convention()?;
        let p = self.channel.detection_probability;
        if !(0.0..=1.0).contains(&p) {
            return Err(ConfigError::BadDetectionProbability(p));
        }
        let spot_if = GaussianSpot::from_fit_widths(
            self.channel.spot_if.width_row,
            self.channel.spot_if.width_col,
            convention,
            &grid,
        )?;
        let spot_fi = GaussianSpot::from_fit_widths(
            self.channel.spot_fi.width_row,
            self.channel.spot_fi.width_col,
            convention,
            &grid,
        )?;
        Ok(ChannelModel::new(
            grid,
            self.channel.profile_ii.resolve()?,
            self.channel.profile_ff.resolve()?,
            spot_if,
            spot_fi,
            p,
        )?)
    }

    pub fn finite_key_params(&self, total_rounds: u64) -> FiniteKeyParams {
        FiniteKeyParams {
            total_rounds,
            sifting_fraction: self.finite_key.sifting_fraction,
            pe_fraction: self.finite_key.pe_fraction,
            eps_ec: self.finite_key.eps_ec,
            eps_pa: self.finite_key.eps_pa,
            delta_f: self.finite_key.delta_f,
        }
    }

    pub fn session_config(&self, master_seed: u64) -> Result<SessionConfig, ConfigError> {
        if !(0.0..=1.0).contains(&self.session.basis_bias) {
            return Err(ConfigError::BadBasisBias(self.session.basis_bias));
        }
        let channel = self.channel_model()?;
        let (send_image, send_fourier) = match self.session.send.as_str() {
            "uniform" => (SendSpec::Uniform, SendSpec::Uniform),
            "gaussian" => (
                SendSpec::Gaussian(*channel.incompatible_spot(crate::channel::Basis::Image)),
                SendSpec::Gaussian(*channel.incompatible_spot(crate::channel::Basis::Fourier)),
            ),
            other => return Err(ConfigError::UnknownSend(other.to_string())),
        };
        Ok(SessionConfig {
            rounds: self.session.rounds,
            channel,
            send_image,
            send_fourier,
            basis_bias: self.session.basis_bias,
            finite_key: self.finite_key_params(self.session.rounds),
            qber_abort_threshold: self.session.qber_abort_threshold,
            master_seed,
        })
    }

    pub fn event_cuts(&self) -> Result<EventCuts, ConfigError> {
        let cuts = EventCuts {
            pixel_threshold: self.detector.pixel_threshold,
            cluster_size_min: self.detector.cluster_size_min,
            cluster_size_max: self.detector.cluster_size_max,
            cluster_intensity_min: self.detector.cluster_intensity_min,
            cluster_intensity_max: self.detector.cluster_intensity_max,
        };
        cuts.validate()?;
        Ok(cuts)
    }

    pub fn detector_origin(&self, grid: &SymbolGrid) -> (usize, usize) {
        let centered = crate::detector::centered_origin(grid);
        (
            self.detector.origin_row.unwrap_or(centered.0),
            self.detector.origin_col.unwrap_or(centered.1),
        )
    }
}
