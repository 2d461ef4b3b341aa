//! Scenario files: TOML, every length in background wavelengths.
//!
//! ```toml
//! seed = 7
//! [materials]
//! eps0 = 1.0
//! mu0 = 1.0
//! eps1 = 1.0
//! mu1 = 3.0
//! eps2 = 1.0
//! mu2 = 3.0
//! omega = 1.0
//! [inclusion]
//! center = [0.08, -0.05, 0.03]
//! rho = 0.008
//! shape = "sphere"
//! [trial]
//! shape = "sphere"
//! [boundary]
//! radius = 10.0
//! n_nodes = 3000
//! [incidences]
//! n = 200
//! [grid]
//! origin = [-1.0, -1.0, 0.03]
//! spacing = 0.0625
//! dims = [33, 33, 1]
//! ```

use crate::error::{invalid, Error, Result};
use crate::forward::{FilterMode, MeasurementNoiseSpec};
use crate::imaging::SearchGrid;
use crate::math::{norm, sub, Mat3, RandomFieldSpec, SphereMesh, Vec3};
use crate::scene::{Inclusion, IncidenceSet, Materials, TrialInclusion};
use crate::stability::{FluctuationKind, MediumNoiseSpec, VolumeMesh};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    pub materials: MaterialsSection,
    pub inclusion: InclusionSection,
    pub trial: TrialSection,
    pub boundary: BoundarySection,
    pub incidences: IncidencesSection,
    pub grid: GridSection,
    pub noise: Option<NoiseSection>,
    pub mc: Option<McSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialsSection {
    pub eps0: f64,
    pub mu0: f64,
    pub eps1: f64,
    pub mu1: f64,
    pub eps2: f64,
    pub mu2: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Sphere,
    Custom,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionSection {
    pub center: Vec3,
    pub rho: f64,
    pub ref_volume: Option<f64>,
    pub shape: Shape,
    pub m_mu: Option<Mat3>,
    pub m_eps: Option<Mat3>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialSection {
    pub ref_volume: Option<f64>,
    pub shape: Shape,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub radius: f64,
    pub n_nodes: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidencesSection {
    pub n: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub origin: Vec3,
    pub spacing: f64,
    pub dims: [usize; 3],
    /// Informational: the axis normal to a 2D slice.
    pub slice_axis: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub measurement: Option<MeasurementSection>,
    pub medium: Option<MediumSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterModeName {
    Half,
    Farfield,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSection {
    pub sigma: f64,
    pub filter_mode: FilterModeName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MediumKindName {
    Permeability,
    Permittivity,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    pub kind: MediumKindName,
    pub sigma: f64,
    pub corr_len: f64,
    pub n_modes: usize,
    /// Radius of the fluctuating ball around the inclusion, default 2.
    pub radius: Option<f64>,
    /// Width of the taper to zero, default 0.5.
    pub taper_width: Option<f64>,
    pub n_realizations: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub n_trials: usize,
}

/// Medium-noise settings resolved to physical units.
#[derive(Debug, Clone)]
pub struct MediumSettings {
    pub spec: MediumNoiseSpec,
    pub n_realizations: usize,
}

/// A validated scenario in physical units.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub materials: Materials,
    pub inclusion: Inclusion,
    pub trial: TrialInclusion,
    pub mesh: Arc<SphereMesh>,
    pub incidences: IncidenceSet,
    pub grid: SearchGrid,
    pub measurement: Option<MeasurementNoiseSpec>,
    pub medium: Option<MediumSettings>,
    pub mc_trials: Option<usize>,
    pub seed: u64,
    /// Hex SHA-256 of the scenario text.
    pub hash: String,
}

impl Scenario {
    pub fn wavelength(&self) -> f64 {
        self.materials.wavelength()
    }

    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })?;
        Self::from_str_with_seed(&text, seed_override)
    }

    pub fn from_str_with_seed(text: &str, seed_override: Option<u64>) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let hash = Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect();
        Self::build(&file, hash, seed_override)
    }

    fn build(file: &ScenarioFile, hash: String, seed_override: Option<u64>) -> Result<Self> {
        let m = &file.materials;
        let materials = Materials { eps0: m.eps0, mu0: m.mu0, eps1: m.eps1, mu1: m.mu1, eps2: m.eps2, mu2: m.mu2, omega: m.omega };
        materials.validate()?;
        let lam = materials.wavelength();
        let kappa = materials.kappa();
        let seed = seed_override.unwrap_or(file.seed);
        let len = |v: Vec3| v.map(|c| c * lam);

        let inc = &file.inclusion;
        let center = len(inc.center);
        let rho = inc.rho * lam;
        if rho * kappa > 0.5 {
            return Err(invalid(format!("inclusion too large: rho*kappa = {:.3} > 0.5", rho * kappa)));
        }
        let inclusion = match inc.shape {
            Shape::Sphere => {
                if inc.m_mu.is_some() || inc.m_eps.is_some() {
                    return Err(invalid("sphere inclusions take no explicit tensors"));
                }
                let mut s = Inclusion::sphere(&materials, center, rho)?;
                if let Some(v) = inc.ref_volume {
                    let unit = 4.0 * PI / 3.0;
                    if (v - unit).abs() > 1e-12 * unit {
                        return Err(invalid("sphere inclusion ref_volume must be 4π/3 (unit ball)"));
                    }
                    s.ref_volume = v;
                }
                s
            }
            Shape::Custom => {
                let (mm, me) = match (inc.m_mu, inc.m_eps) {
                    (Some(a), Some(b)) => (a, b),
                    _ => return Err(invalid("custom inclusion needs m_mu and m_eps")),
                };
                let vol = inc.ref_volume.ok_or_else(|| invalid("custom inclusion needs ref_volume"))?;
                Inclusion::custom(center, rho, vol, mm, me)?
            }
        };
        if file.trial.shape != Shape::Sphere {
            return Err(invalid("only spherical trial inclusions are supported"));
        }
        if let Some(v) = file.trial.ref_volume {
            if (v - 4.0 * PI / 3.0).abs() > 1e-12 {
                return Err(invalid("trial ref_volume must be 4π/3 (unit ball)"));
            }
        }
        let trial = TrialInclusion::sphere(&materials)?;

        let b = &file.boundary;
        let radius = b.radius * lam;
        let mesh = Arc::new(SphereMesh::new([0.0; 3], radius, b.n_nodes)?);
        if norm(center) + rho >= radius {
            return Err(invalid("inclusion must lie inside the boundary sphere"));
        }
        let incidences = IncidenceSet::fibonacci(file.incidences.n)?;

        let g = &file.grid;
        if let Some(a) = g.slice_axis {
            if a > 2 || g.dims[a] != 1 {
                return Err(invalid("slice_axis must name a grid axis of size 1"));
            }
        }
        let grid = SearchGrid::new(len(g.origin), g.spacing * lam, g.dims)?;
        // margin d₀ = λ/4 from the boundary
        let margin = 0.25 * lam;
        for corner in 0..8usize {
            let idx = [0, 1, 2].map(|a| if corner >> a & 1 == 1 { g.dims[a] - 1 } else { 0 });
            let p = grid.point(grid.index(idx[0], idx[1], idx[2]));
            if norm(sub(p, mesh.center)) > radius - margin {
                return Err(invalid("search grid must stay a quarter wavelength inside the boundary"));
            }
        }

        let mut measurement = None;
        let mut medium = None;
        if let Some(noise) = &file.noise {
            if let Some(ms) = &noise.measurement {
                if !(ms.sigma >= 0.0) {
                    return Err(invalid("measurement sigma must be >= 0"));
                }
                let filter_mode = match ms.filter_mode {
                    FilterModeName::Half => FilterMode::Half,
                    FilterModeName::Farfield => FilterMode::FarField,
                };
                measurement = Some(MeasurementNoiseSpec { sigma: ms.sigma, filter_mode, seed });
            }
            if let Some(md) = &noise.medium {
                let r_med = md.radius.unwrap_or(2.0) * lam;
                let taper = md.taper_width.unwrap_or(0.5) * lam;
                let field = RandomFieldSpec { sigma: md.sigma, corr_len: md.corr_len * lam, n_modes: md.n_modes, seed };
                field.validate()?;
                let vm = VolumeMesh::ball(center, r_med, taper, 16, 0.5 * field.corr_len)?;
                if norm(center) + r_med > radius - margin {
                    return Err(invalid("random medium must stay away from the boundary"));
                }
                let kind = match md.kind {
                    MediumKindName::Permeability => FluctuationKind::Permeability,
                    MediumKindName::Permittivity => FluctuationKind::Permittivity,
                };
                medium = Some(MediumSettings {
                    spec: MediumNoiseSpec { kind, field, mesh: Arc::new(vm) },
                    n_realizations: md.n_realizations.unwrap_or(400),
                });
            }
        }
        Ok(Self {
            materials,
            inclusion,
            trial,
            mesh,
            incidences,
            grid,
            measurement,
            medium,
            mc_trials: file.mc.as_ref().map(|m| m.n_trials),
            seed,
            hash,
        })
    }
}
