use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::carve::{CarveConfig, INITIAL_OPACITY};
use crate::error::{Error, Result};
use crate::mpm::{Impulse, Material, RansacConfig, Region, SimConfig};
use crate::poisson::{ConflictConfig, Neighborhood, PoissonConfig};
use crate::raster::RasterConfig;
use crate::splat::{read_cameras, Camera, CleanupConfig};
use crate::tsdf::ExtractConfig;

/// Declarative description of one decouple/simulate/render/eval run.
/// Relative paths resolve against the directory of the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Splat PLY of the whole scene.
    pub input: PathBuf,
    /// JSON camera list.
    pub cameras: PathBuf,
    /// Label sidecar; without one the PLY `label` property is used.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    pub object_label: i32,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cleanup: CleanupSection,
    #[serde(default)]
    pub tsdf: TsdfSection,
    #[serde(default)]
    pub poisson: PoissonSection,
    #[serde(default = "default_crop_scale")]
    pub crop_scale: f64,
    #[serde(default)]
    pub carve: CarveSection,
    pub simulation: SimulationSection,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_crop_scale() -> f64 {
    1.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleanupSection {
    pub k: usize,
    pub radius: Option<f64>,
}

impl Default for CleanupSection {
    fn default() -> Self {
        Self { k: 8, radius: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TsdfSection {
    pub dims: [usize; 3],
    /// Frame padding around the object, as a fraction of its largest extent.
    pub padding: f64,
    pub truncation: Option<f64>,
    pub min_weight: f64,
}

impl Default for TsdfSection {
    fn default() -> Self {
        Self {
            dims: [64; 3],
            padding: 0.15,
            truncation: None,
            min_weight: 2.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoissonSection {
    pub dims: [usize; 3],
    pub padding: f64,
    pub screening: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub tau: Option<f64>,
    pub conflict_iterations: usize,
    pub curvature_neighbors: usize,
    pub neighborhood: Neighborhood,
}

impl Default for PoissonSection {
    fn default() -> Self {
        let p = PoissonConfig::default();
        let c = ConflictConfig::default();
        Self {
            dims: [64; 3],
            padding: 0.1,
            screening: p.screening,
            tolerance: p.tolerance,
            max_iterations: p.max_iterations,
            tau: c.tau,
            conflict_iterations: c.iterations,
            curvature_neighbors: c.curvature_neighbors,
            neighborhood: c.neighborhood,
        }
    }
}

impl PoissonSection {
    pub fn solver(&self) -> PoissonConfig {
        PoissonConfig {
            screening: self.screening,
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            ..PoissonConfig::default()
        }
    }

    pub fn conflicts(&self) -> ConflictConfig {
        ConflictConfig {
            tau: self.tau,
            iterations: self.conflict_iterations,
            curvature_neighbors: self.curvature_neighbors,
            neighborhood: self.neighborhood,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CarveSection {
    pub unce_weight: f64,
    pub step: f64,
    pub cull_threshold: f64,
    pub cull_every: usize,
    pub max_iters: usize,
    /// Proxy neighbors blended into each interior color.
    pub color_neighbors: usize,
}

impl Default for CarveSection {
    fn default() -> Self {
        let c = CarveConfig::default();
        Self {
            unce_weight: c.unce_weight,
            step: c.step,
            cull_threshold: c.cull_threshold,
            cull_every: c.cull_every,
            max_iters: c.max_iters,
            color_neighbors: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    pub materials: Vec<Material>,
    #[serde(default)]
    pub object_material: usize,
    /// MPM grid spacing in meters.
    pub grid_cell: f64,
    /// Space kept around the object's bounding box, in meters.
    #[serde(default = "default_sim_padding")]
    pub padding: f64,
    pub dt: f64,
    pub frames: usize,
    pub steps_per_frame: usize,
    #[serde(default = "default_gravity")]
    pub gravity: [f64; 3],
    #[serde(default)]
    pub damping: f64,
    #[serde(default = "default_band")]
    pub boundary_band: usize,
    #[serde(default)]
    pub impulses: Vec<Impulse>,
    /// Re-orient the scene so the dominant scene plane is horizontal.
    #[serde(default = "default_true")]
    pub align_gravity: bool,
    #[serde(default)]
    pub ransac: RansacSection,
}

fn default_sim_padding() -> f64 {
    0.25
}

fn default_gravity() -> [f64; 3] {
    SimConfig::default().gravity
}

fn default_band() -> usize {
    SimConfig::default().boundary_band
}

fn default_true() -> bool {
    true
}

impl SimulationSection {
    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            dt: self.dt,
            gravity: self.gravity,
            boundary_band: self.boundary_band,
            sticky: true,
            damping: self.damping,
        }
    }

    /// Largest step the CFL bound allows for a material at rest.
    pub fn max_dt(&self) -> f64 {
        let c = self.materials.iter().map(Material::wave_speed).fold(0.0, f64::max);
        0.3 * self.grid_cell / c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RansacSection {
    pub iterations: usize,
    pub inlier_tol: f64,
}

impl Default for RansacSection {
    fn default() -> Self {
        let r = RansacConfig::default();
        Self {
            iterations: r.iterations,
            inlier_tol: r.inlier_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderSection {
    pub width: usize,
    pub height: usize,
    /// Indices into the camera file; one pose per image, the last pose
    /// repeating once the path runs out.
    pub camera_path: Vec<usize>,
}

impl Default for RenderSection {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 720,
            camera_path: vec![0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereReference {
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub reference_sphere: Option<SphereReference>,
    pub reference_ply: Option<PathBuf>,
    /// Directory of reference PPM frames named like the rendered ones.
    pub reference_images: Option<PathBuf>,
    pub sphere_samples: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            reference_sphere: None,
            reference_ply: None,
            reference_images: None,
            sphere_samples: 20_000,
        }
    }
}

fn err<T>(path: &str, message: impl Into<String>) -> Result<T> {
    Err(Error::config(path, message))
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        err(path, format!("must be a positive finite number, got {v}"))
    }
}

fn non_negative(path: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        err(path, format!("must be a non-negative finite number, got {v}"))
    }
}

fn at_least(path: &str, v: usize, min: usize) -> Result<()> {
    if v >= min {
        Ok(())
    } else {
        err(path, format!("must be at least {min}, got {v}"))
    }
}

fn file_exists(path: &str, p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        err(path, format!("file `{}` does not exist", p.display()))
    }
}

fn finite3(path: &str, v: &[f64; 3]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        err(path, "must hold three finite numbers")
    }
}

impl PipelineConfig {
    /// Parses, resolves paths against the file's directory and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::config("<config>", format!("cannot read `{}`: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_json(&text, base)
    }

    pub fn from_json(text: &str, base: &Path) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { "<root>".into() } else { path }, e.into_inner().to_string())
        })?;
        cfg.resolve(base);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input);
        fix(&mut self.cameras);
        fix(&mut self.output_dir);
        for p in [&mut self.labels, &mut self.eval.reference_ply, &mut self.eval.reference_images]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    /// Checks every field; the error names the offending path.
    pub fn validate(&self) -> Result<()> {
        file_exists("input", &self.input)?;
        file_exists("cameras", &self.cameras)?;
        let cameras = read_cameras(&self.cameras).map_err(|e| Error::config("cameras", e.to_string()))?;
        if cameras.is_empty() {
            return err("cameras", "camera file lists no cameras");
        }
        if let Some(l) = &self.labels {
            file_exists("labels", l)?;
        }
        if self.output_dir.is_file() {
            return err("output_dir", "is an existing file");
        }

        at_least("cleanup.k", self.cleanup.k, 1)?;
        if let Some(r) = self.cleanup.radius {
            positive("cleanup.radius", r)?;
        }

        for (a, d) in self.tsdf.dims.iter().enumerate() {
            at_least(&format!("tsdf.dims[{a}]"), *d, 8)?;
        }
        non_negative("tsdf.padding", self.tsdf.padding)?;
        if let Some(t) = self.tsdf.truncation {
            positive("tsdf.truncation", t)?;
        }
        non_negative("tsdf.min_weight", self.tsdf.min_weight)?;

        let p = &self.poisson;
        for (a, d) in p.dims.iter().enumerate() {
            at_least(&format!("poisson.dims[{a}]"), *d, 8)?;
        }
        non_negative("poisson.padding", p.padding)?;
        non_negative("poisson.screening", p.screening)?;
        positive("poisson.tolerance", p.tolerance)?;
        at_least("poisson.max_iterations", p.max_iterations, 1)?;
        if let Some(t) = p.tau {
            positive("poisson.tau", t)?;
        }
        at_least("poisson.curvature_neighbors", p.curvature_neighbors, 3)?;
        positive("crop_scale", self.crop_scale)?;

        let c = &self.carve;
        positive("carve.unce_weight", c.unce_weight)?;
        positive("carve.step", c.step)?;
        positive("carve.cull_threshold", c.cull_threshold)?;
        if c.cull_threshold >= INITIAL_OPACITY {
            return err("carve.cull_threshold", format!("must be below the initial opacity {INITIAL_OPACITY}"));
        }
        at_least("carve.cull_every", c.cull_every, 1)?;
        at_least("carve.color_neighbors", c.color_neighbors, 1)?;

        self.validate_simulation()?;

        let r = &self.render;
        if !(1..=8192).contains(&r.width) {
            return err("render.width", format!("must lie in 1..=8192, got {}", r.width));
        }
        if !(1..=8192).contains(&r.height) {
            return err("render.height", format!("must lie in 1..=8192, got {}", r.height));
        }
        if r.camera_path.is_empty() {
            return err("render.camera_path", "needs at least one camera index");
        }
        for (i, c) in r.camera_path.iter().enumerate() {
            if *c >= cameras.len() {
                return err(&format!("render.camera_path[{i}]"), format!("camera {c} of {}", cameras.len()));
            }
        }

        if let Some(s) = &self.eval.reference_sphere {
            finite3("eval.reference_sphere.center", &s.center)?;
            positive("eval.reference_sphere.radius", s.radius)?;
        }
        if let Some(p) = &self.eval.reference_ply {
            file_exists("eval.reference_ply", p)?;
        }
        if let Some(d) = &self.eval.reference_images {
            if !d.is_dir() {
                return err("eval.reference_images", format!("directory `{}` does not exist", d.display()));
            }
        }
        at_least("eval.sphere_samples", self.eval.sphere_samples, 1)?;
        Ok(())
    }

    fn validate_simulation(&self) -> Result<()> {
        let s = &self.simulation;
        if s.materials.is_empty() {
            return err("simulation.materials", "needs at least one material");
        }
        for (i, m) in s.materials.iter().enumerate() {
            let path = format!("simulation.materials[{i}]");
            positive(&format!("{path}.E"), m.youngs_modulus)?;
            if !(0.0..0.5).contains(&m.poisson_ratio) {
                return err(&format!("{path}.nu"), format!("must lie in [0, 0.5), got {}", m.poisson_ratio));
            }
            positive(&format!("{path}.density"), m.density)?;
            if !(m.friction_angle >= 0.0 && m.friction_angle < 90.0) {
                return err(&format!("{path}.friction_angle"), "must lie in [0, 90) degrees");
            }
        }
        if s.object_material >= s.materials.len() {
            return err("simulation.object_material", format!("material {} of {}", s.object_material, s.materials.len()));
        }
        positive("simulation.grid_cell", s.grid_cell)?;
        non_negative("simulation.padding", s.padding)?;
        positive("simulation.dt", s.dt)?;
        let max_dt = s.max_dt();
        if s.dt > max_dt {
            return err("simulation.dt", format!("{:.3e} violates the CFL bound; use dt <= {max_dt:.3e}", s.dt));
        }
        at_least("simulation.steps_per_frame", s.steps_per_frame, 1)?;
        finite3("simulation.gravity", &s.gravity)?;
        non_negative("simulation.damping", s.damping)?;
        for (i, imp) in s.impulses.iter().enumerate() {
            let path = format!("simulation.impulses[{i}]");
            if imp.frame >= s.frames.max(1) {
                return err(&format!("{path}.frame"), format!("frame {} is past the last simulated frame", imp.frame));
            }
            finite3(&format!("{path}.dv"), &imp.dv)?;
            match &imp.region {
                Region::Sphere { center, radius } => {
                    finite3(&format!("{path}.region.center"), center)?;
                    positive(&format!("{path}.region.radius"), *radius)?;
                }
                Region::Box { min, max } => {
                    finite3(&format!("{path}.region.min"), min)?;
                    finite3(&format!("{path}.region.max"), max)?;
                    if (0..3).any(|a| min[a] > max[a]) {
                        return err(&format!("{path}.region"), "min exceeds max");
                    }
                }
            }
        }
        at_least("simulation.ransac.iterations", s.ransac.iterations, 1)?;
        positive("simulation.ransac.inlier_tol", s.ransac.inlier_tol)?;
        Ok(())
    }

    pub fn cleanup_config(&self) -> CleanupConfig {
        CleanupConfig {
            k: self.cleanup.k,
            radius: self.cleanup.radius,
        }
    }

    pub fn extract_config(&self) -> ExtractConfig {
        ExtractConfig {
            min_weight: self.tsdf.min_weight,
            ..ExtractConfig::default()
        }
    }

    pub fn carve_config(&self) -> CarveConfig {
        CarveConfig {
            unce_weight: self.carve.unce_weight,
            step: self.carve.step,
            cull_threshold: self.carve.cull_threshold,
            cull_every: self.carve.cull_every,
            max_iters: self.carve.max_iters,
            seed: self.seed,
            raster: RasterConfig::default(),
        }
    }

    pub fn ransac_config(&self) -> RansacConfig {
        RansacConfig {
            iterations: self.simulation.ransac.iterations,
            inlier_tol: self.simulation.ransac.inlier_tol,
            seed: self.seed,
        }
    }

    pub fn read_cameras(&self) -> Result<Vec<Camera>> {
        read_cameras(&self.cameras)
    }
}
