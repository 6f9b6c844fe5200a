//! Run configuration: a TOML file whose every field has a default, plus
//! command-line overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use patchvm::{
    generate_homogeneous, generate_single_patch_at, log_grid, Geometry, HomogeneousParams, PatchMap,
    QuadratureSpec,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; realization `i` derives its own seed from it.
    pub seed: u64,
    /// Realizations per ensemble.
    pub n_real: usize,
    pub out: PathBuf,
    pub geometry: GeometryConfig,
    pub patches: PatchConfig,
    pub d_grid: GridConfig,
    pub quadrature: QuadratureSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    #[serde(rename = "R")]
    pub r_sphere: f64,
    #[serde(rename = "Rm")]
    pub r_plate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Homogeneous,
    /// One disk of radius `r0` and potential `v0` at `center`.
    Single,
    /// Constant potential `v0`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PatchConfig {
    pub layout: Layout,
    pub r0: f64,
    pub v0: f64,
    pub jitter: f64,
    pub center: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub d_min: f64,
    pub d_max: f64,
    pub per_decade: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            n_real: 100,
            out: PathBuf::from("out"),
            geometry: GeometryConfig::default(),
            patches: PatchConfig::default(),
            d_grid: GridConfig::default(),
            quadrature: QuadratureSpec::default(),
        }
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self { r_sphere: 0.15, r_plate: 0.015 }
    }
}

impl Default for PatchConfig {
    fn default() -> Self {
        Self { layout: Layout::Homogeneous, r0: 5e-4, v0: 0.1, jitter: 0.2, center: [0.0, 0.0] }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { d_min: 1e-7, d_max: 1e-2, per_decade: 8 }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable in TOML")
    }

    /// Checks every field, naming the offending one.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.geometry().context("geometry")?;
        let p = &self.patches;
        let rm = self.geometry.r_plate;
        if !(p.r0.is_finite() && p.r0 > 0.0 && p.r0 < rm) {
            bail!("patches.r0 must lie in (0, Rm={rm}), got {}", p.r0);
        }
        if !(p.v0.is_finite() && p.v0 >= 0.0) {
            bail!("patches.v0 must be non-negative, got {}", p.v0);
        }
        if !(0.0..=0.5).contains(&p.jitter) {
            bail!("patches.jitter must lie in [0, 0.5], got {}", p.jitter);
        }
        if !p.center.iter().all(|c| c.is_finite()) || p.center[0].hypot(p.center[1]) > rm {
            bail!("patches.center must lie on the plate, got {:?}", p.center);
        }
        let g = &self.d_grid;
        if !(g.d_min.is_finite() && g.d_min > 0.0) {
            bail!("d_grid.d_min must be positive, got {}", g.d_min);
        }
        if !(g.d_max.is_finite() && g.d_max > g.d_min) {
            bail!("d_grid.d_max must exceed d_min, got {}", g.d_max);
        }
        if g.per_decade < 8 {
            bail!("d_grid.per_decade must be at least 8, got {}", g.per_decade);
        }
        self.quadrature.validate().context("quadrature")?;
        if self.n_real == 0 {
            bail!("n_real must be at least 1");
        }
        Ok(())
    }

    pub fn geometry(&self) -> anyhow::Result<Geometry> {
        Ok(Geometry::new(self.geometry.r_sphere, self.geometry.r_plate)?)
    }

    pub fn distances(&self) -> anyhow::Result<Vec<f64>> {
        let g = &self.d_grid;
        Ok(log_grid(g.d_min, g.d_max, g.per_decade)?)
    }

    pub fn homogeneous(&self) -> HomogeneousParams {
        HomogeneousParams { r0: self.patches.r0, v0: self.patches.v0, jitter: self.patches.jitter }
    }

    /// The map described by the `patches` table; homogeneous maps use the
    /// master seed directly.
    pub fn build_map(&self) -> anyhow::Result<PatchMap> {
        let geom = self.geometry()?;
        let p = &self.patches;
        let map = match p.layout {
            Layout::Homogeneous => generate_homogeneous(&geom, p.r0, p.v0, p.jitter, self.seed)?,
            Layout::Single => generate_single_patch_at(&geom, p.r0, p.v0, p.center[0], p.center[1])?,
            Layout::Uniform => PatchMap::new(geom, p.v0, Vec::new(), p.r0, p.v0, None)?,
        };
        Ok(map)
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.out = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}
