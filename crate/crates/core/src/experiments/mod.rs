//! Dataset presets, experiment specifications, the matrix runner and its
//! report.
//!
//! Every preset is defined at the reference scale of a 256-pixel grid and can
//! be shrunk with [`DatasetPreset::scaled`] for quick runs.

mod report;
mod runner;
mod spec;

use std::fmt;
use std::str::FromStr;

pub use report::{emit_report, ReportSummary};
pub use runner::{run_matrix, CellResult, MatrixOptions, ResultsTable, RESULTS_HEADER};
pub use spec::{parse_matrix, shipped_config, ExperimentSpec, Method};

use crate::noise::{add_poisson_noise_at, counts_per_unit};
use crate::phantom::Phantom;
use crate::{Error, Geometry, ImageGrid, ProjectorKind, ProjectorPair, Result, SeededRng, Sinogram};

/// Grid size the presets are stated at.
pub const REFERENCE_SIZE: usize = 256;
/// Views of the well-sampled presets at the reference size.
pub const FULL_VIEWS: usize = 402;
/// Noise seed shared by all presets unless overridden.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PresetName {
    SlFull,
    SlUnder,
    SlNoise,
    SlUconstr,
    Fig4a,
    Fig4b,
    Fig4c,
}

impl PresetName {
    pub const ALL: [PresetName; 7] = [
        PresetName::SlFull,
        PresetName::SlUnder,
        PresetName::SlNoise,
        PresetName::SlUconstr,
        PresetName::Fig4a,
        PresetName::Fig4b,
        PresetName::Fig4c,
    ];

    pub fn token(self) -> &'static str {
        match self {
            PresetName::SlFull => "sl-full",
            PresetName::SlUnder => "sl-under",
            PresetName::SlNoise => "sl-noise",
            PresetName::SlUconstr => "sl-uconstr",
            PresetName::Fig4a => "fig4a",
            PresetName::Fig4b => "fig4b",
            PresetName::Fig4c => "fig4c",
        }
    }
}

impl fmt::Display for PresetName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for PresetName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let want = s.trim().to_ascii_lowercase().replace('_', "-");
        PresetName::ALL
            .into_iter()
            .find(|p| p.token() == want)
            .ok_or_else(|| Error::Parse(format!("unknown dataset `{s}`")))
    }
}

/// Where the clean sinogram comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DataSource {
    /// Exact line integrals of the Shepp-Logan ellipses.
    Analytic,
    /// A projector applied to the phantom rasterization.
    Projector(ProjectorKind),
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Analytic => f.write_str("analytic"),
            DataSource::Projector(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for DataSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("analytic") {
            Ok(DataSource::Analytic)
        } else {
            Ok(DataSource::Projector(s.parse()?))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPreset {
    pub name: PresetName,
    pub views: usize,
    pub cells: usize,
    /// Noise standard deviation as a fraction of the well-sampled mean.
    pub sigma_fraction: Option<f64>,
    pub seed: u64,
    pub source: DataSource,
}

impl DatasetPreset {
    pub fn named(name: PresetName) -> Self {
        let (views, sigma, source) = match name {
            PresetName::SlFull => (FULL_VIEWS, None, DataSource::Analytic),
            PresetName::SlUnder => (50, None, DataSource::Analytic),
            PresetName::SlNoise => (FULL_VIEWS, Some(0.03), DataSource::Analytic),
            PresetName::SlUconstr => (75, Some(0.03), DataSource::Analytic),
            PresetName::Fig4a => (100, None, DataSource::Projector(ProjectorKind::Dd)),
            PresetName::Fig4b => (FULL_VIEWS, Some(0.02), DataSource::Projector(ProjectorKind::Kb)),
            PresetName::Fig4c => (100, Some(0.02), DataSource::Projector(ProjectorKind::Pd)),
        };
        DatasetPreset { name, views, cells: REFERENCE_SIZE, sigma_fraction: sigma, seed: DEFAULT_SEED, source }
    }

    /// The preset on a `size`-pixel grid. View counts shrink in proportion;
    /// well-sampled presets keep enough views to stay well sampled.
    pub fn scaled(&self, size: usize) -> Result<Self> {
        if size < 8 {
            return Err(Error::InvalidParameter(format!("experiment size must be >= 8 (got {size})")));
        }
        if size == self.cells {
            return Ok(self.clone());
        }
        let mut views = (self.views * size).div_ceil(self.cells);
        if !crate::is_undersampled(self.views, self.cells) {
            views = views.max(well_sampled_views(size));
        }
        Ok(DatasetPreset { views, cells: size, ..self.clone() })
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::new(self.views, self.cells)
    }

    /// Stable text form used for hashing and labels.
    pub fn label(&self) -> String {
        let mut s = format!("{} {}x{} src={}", self.name, self.views, self.cells, self.source);
        if let Some(sig) = self.sigma_fraction {
            s.push_str(&format!(" sigma={sig} seed={}", self.seed));
        }
        s
    }

    /// Expected counts per unit line integral; `None` for noiseless data.
    pub fn counts_per_unit(&self) -> Result<Option<f64>> {
        match self.sigma_fraction {
            None => Ok(None),
            Some(sig) => Ok(Some(counts_per_unit(sig, full_mean(self.cells)?))),
        }
    }
}

fn well_sampled_views(size: usize) -> usize {
    (size as f64 * std::f64::consts::FRAC_PI_2).ceil() as usize
}

/// The phantom every experiment images.
pub fn reference_phantom() -> Phantom {
    Phantom::shepp_logan()
}

/// Rasterized phantom the reconstructions are scored against.
pub fn reference_image(size: usize) -> Result<ImageGrid> {
    reference_phantom().rasterize(size)
}

/// Mean of the well-sampled analytic sinogram on a `size` grid, which pins
/// the noise level of every noisy preset at that size.
pub fn full_mean(size: usize) -> Result<f64> {
    let g = DatasetPreset::named(PresetName::SlFull).scaled(size)?.geometry()?;
    Ok(reference_phantom().default_sinogram(&g)?.mean())
}

/// Clean sinogram of the preset, before noise.
pub fn clean_dataset(p: &DatasetPreset) -> Result<Sinogram> {
    let g = p.geometry()?;
    match p.source {
        DataSource::Analytic => reference_phantom().default_sinogram(&g),
        DataSource::Projector(kind) => ProjectorPair::new(kind, &g)?.forward(&reference_image(p.cells)?),
    }
}

pub fn generate_dataset(p: &DatasetPreset) -> Result<Sinogram> {
    let clean = clean_dataset(p)?;
    match p.sigma_fraction {
        None => Ok(clean),
        Some(sig) => add_poisson_noise_at(&clean, sig, full_mean(p.cells)?, &mut SeededRng::new(p.seed)),
    }
}
