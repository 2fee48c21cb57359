//! Config-driven decouple, simulate, render and eval stages.

mod config;
mod decouple;
mod eval;
mod render;
mod simulate;

use std::path::{Path, PathBuf};

pub use config::{
    CarveSection, CleanupSection, EvalSection, PipelineConfig, PoissonSection, RansacSection, RenderSection,
    SimulationSection, SphereReference, TsdfSection,
};
pub use decouple::{load_input, object_silhouette, run_decouple, CarveSummary, DecoupleReport, PoissonSummary};
pub use eval::{run_eval, surface_shell, ChamferSummary, EvalReport};
pub use render::{render_schedule, run_render, RenderReport};
pub use simulate::{object_cell, run_simulate, SimulateReport};

use crate::error::{Error, Result};

/// File names under the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub dir: PathBuf,
    pub object: PathBuf,
    pub scene: PathBuf,
    pub decouple_report: PathBuf,
    pub aligned_scene: PathBuf,
    pub aligned_cameras: PathBuf,
    pub frames: PathBuf,
    pub diagnostics: PathBuf,
    pub simulate_report: PathBuf,
    pub renders: PathBuf,
    pub eval_report: PathBuf,
}

impl Layout {
    pub fn new(cfg: &PipelineConfig) -> Self {
        Self::in_dir(&cfg.output_dir)
    }

    pub fn in_dir(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            object: dir.join("object.ply"),
            scene: dir.join("scene.ply"),
            decouple_report: dir.join("decouple_report.json"),
            aligned_scene: dir.join("scene_aligned.ply"),
            aligned_cameras: dir.join("cameras_aligned.json"),
            frames: dir.join("frames"),
            diagnostics: dir.join("diagnostics.csv"),
            simulate_report: dir.join("simulate_report.json"),
            renders: dir.join("render"),
            eval_report: dir.join("eval_report.json"),
        }
    }

    pub fn frame(&self, f: usize) -> PathBuf {
        self.frames.join(format!("frame_{f:04}.ply"))
    }

    pub fn render(&self, k: usize) -> PathBuf {
        self.renders.join(format!("frame_{k:04}.ppm"))
    }

    fn create(&self) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::at_path(&self.dir, e))
    }
}

/// Tags an error with the stage that raised it.
fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Stage { .. } => e,
        other => Error::Stage {
            stage: name,
            source: Box::new(other),
        },
    })
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").map_err(|e| Error::at_path(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Decouple,
    Simulate,
    Render,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Decouple, Stage::Simulate, Stage::Render, Stage::Eval];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Decouple => "decouple",
            Stage::Simulate => "simulate",
            Stage::Render => "render",
            Stage::Eval => "eval",
        }
    }

    /// Runs the stage and returns its report as JSON.
    pub fn run(self, cfg: &PipelineConfig) -> Result<serde_json::Value> {
        let v = match self {
            Stage::Decouple => serde_json::to_value(run_decouple(cfg)?),
            Stage::Simulate => serde_json::to_value(run_simulate(cfg)?),
            Stage::Render => serde_json::to_value(run_render(cfg)?),
            Stage::Eval => serde_json::to_value(run_eval(cfg)?),
        };
        Ok(v?)
    }
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::config("--stage", format!("unknown stage `{s}`")))
    }
}

/// Synthetic sphere-on-slab inputs plus a config that runs every stage on them.
pub fn write_synthetic_example(dir: &Path, synth: &crate::synth::SynthConfig) -> Result<PathBuf> {
    let files = crate::synth::write_sphere_on_slab(dir, synth)?;
    let name = |p: &Path| p.file_name().unwrap().to_string_lossy().into_owned();
    let c = synth.sphere_center();
    let cfg = serde_json::json!({
        "input": name(&files.ply),
        "cameras": name(&files.cameras),
        "labels": name(&files.labels),
        "object_label": synth.object_label,
        "output_dir": "out",
        "seed": 0,
        "poisson": { "dims": [64, 64, 48] },
        "simulation": {
            "materials": [{ "model": "fixed_corotated", "E": 3e6, "nu": 0.3 }],
            "grid_cell": 0.02,
            "dt": 1e-4,
            "frames": 10,
            "steps_per_frame": 40,
            "impulses": [{
                "frame": 0,
                "region": { "shape": "sphere", "center": [c.x, c.y, c.z], "radius": 2.0 * synth.radius },
                "dv": [1.0, 0.0, 0.0]
            }]
        },
        "render": { "width": 1280, "height": 720, "camera_path": [0] },
        "eval": { "reference_sphere": { "center": [c.x, c.y, c.z], "radius": synth.radius } }
    });
    let path = dir.join("config.json");
    write_json(&path, &cfg)?;
    Ok(path)
}
