use std::path::Path;
use std::process::{Command, Output};

use gsdecouple::carve::isometric_init;
use gsdecouple::math::{quat_from_matrix, rotation_between, Vec3};
use gsdecouple::splat::{save_ply, write_cameras, write_labels, Camera, GaussianKernel, SplatScene};
use serde_json::{json, Value};

const CELL: f64 = 0.02;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gsdecouple"));
    c.env("RUST_LOG", "warn");
    c
}

/// Restored ball over a flat patch, plus a config that skips straight to simulation.
fn fixture(dir: &Path) -> Value {
    let mut ball = Vec::new();
    for k in -3..=3 {
        for j in -3..=3 {
            for i in -3..=3 {
                let p = Vec3::new(i as f64, j as f64, k as f64) * CELL;
                if p.norm() <= 0.06 {
                    ball.push(p + Vec3::new(0.0, 0.0, 0.08));
                }
            }
        }
    }
    let object: Vec<GaussianKernel> = isometric_init(&ball, CELL)
        .into_iter()
        .map(|k| k.with_rgb([0.8, 0.2, 0.2]).with_label(1))
        .collect();
    let flat = quat_from_matrix(&rotation_between(&Vec3::x(), &Vec3::z()));
    let mut scene = Vec::new();
    for j in -10..=10 {
        for i in -10..=10 {
            let c = Vec3::new(i as f64, j as f64, 0.0) * 0.015;
            scene.push(GaussianKernel::new(c, Vec3::new(1e-6, 0.009, 0.009), flat, 0.9).with_rgb([0.4, 0.5, 0.4]));
        }
    }
    let cams: Vec<Camera> = (0..3)
        .map(|i| {
            let a = i as f64 * 2.0;
            Camera::look_at(Vec3::new(a.cos(), a.sin(), 0.8) * 0.6, Vec3::new(0.0, 0.0, 0.05), Vec3::z(), 60.0, 48, 32)
        })
        .collect();
    let out = dir.join("out");
    std::fs::create_dir_all(&out).unwrap();
    save_ply(&SplatScene::new(object.clone()), out.join("object.ply")).unwrap();
    save_ply(&SplatScene::new(scene.clone()), out.join("scene.ply")).unwrap();
    let mut all = scene;
    all.extend(object);
    save_ply(&SplatScene::new(all.clone()), dir.join("input.ply")).unwrap();
    write_labels(dir.join("labels.txt"), &all.iter().map(|k| k.label).collect::<Vec<_>>()).unwrap();
    write_cameras(&dir.join("cameras.json"), &cams).unwrap();
    json!({
        "input": "input.ply",
        "cameras": "cameras.json",
        "labels": "labels.txt",
        "object_label": 1,
        "output_dir": "out",
        "simulation": {
            "materials": [{ "model": "fixed_corotated", "E": 3e6, "nu": 0.3 }],
            "grid_cell": CELL,
            "dt": 1e-4,
            "frames": 2,
            "steps_per_frame": 10,
            "padding": 0.08
        },
        "render": { "width": 48, "height": 32, "camera_path": [0, 1, 2] },
        "eval": { "reference_sphere": { "center": [0, 0, 0.08], "radius": 0.06 } }
    })
}

fn write_config(dir: &Path, v: &Value) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, v.to_string()).unwrap();
    p
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_render_eval_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &fixture(dir.path()));
    let o = run(&["run", "--stage", "simulate,render,eval"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let lines: Vec<Value> = String::from_utf8(o.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let names: Vec<&str> = lines.iter().map(|l| l["stage"].as_str().unwrap()).collect();
    assert_eq!(names, ["simulate", "render", "eval"]);
    let out = dir.path().join("out");
    assert!(out.join("frames/frame_0002.ply").is_file());
    assert!(out.join("render/frame_0002.ppm").is_file());
    assert!(!out.join("render/frame_0003.ppm").exists());
    assert!(out.join("eval_report.json").is_file());
    assert!(lines[2]["report"]["sphere"]["root_in_cells"].as_f64().unwrap().is_finite());
}

#[test]
fn single_stage_subcommand_with_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &fixture(dir.path()));
    let o = run(&["simulate", "--threads", "1", "--seed", "5"], &cfg);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(dir.path().join("out/diagnostics.csv").is_file());
}

#[test]
fn malformed_config_exits_2_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = fixture(dir.path());
    v["simulation"]["materials"][0]["nu"] = json!(0.7);
    let cfg = write_config(dir.path(), &v);
    let o = run(&["simulate"], &cfg);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("simulation.materials[0].nu"), "{}", stderr(&o));
}

#[test]
fn unparsable_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    std::fs::write(&cfg, "{ \"input\": ").unwrap();
    assert_eq!(run(&["decouple"], &cfg).status.code(), Some(2));
}

#[test]
fn unknown_label_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = fixture(dir.path());
    v["object_label"] = json!(9);
    v["output_dir"] = json!("fresh");
    let cfg = write_config(dir.path(), &v);
    let o = run(&["decouple"], &cfg);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(!dir.path().join("fresh").exists());
}

#[test]
fn runaway_impulse_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = fixture(dir.path());
    v["simulation"]["impulses"] =
        json!([{ "frame": 0, "region": { "shape": "sphere", "center": [0, 0, 0.08], "radius": 1 }, "dv": [1e5, 0, 0] }]);
    let cfg = write_config(dir.path(), &v);
    let o = run(&["simulate"], &cfg);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn missing_inputs_exit_1_naming_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &fixture(dir.path()));
    std::fs::remove_file(dir.path().join("out/object.ply")).unwrap();
    let o = run(&["simulate"], &cfg);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("load"), "{}", stderr(&o));
}

#[test]
fn bad_stage_and_zero_threads_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &fixture(dir.path()));
    let o = run(&["run", "--stage", "simulate,melt"], &cfg);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("melt"));
    assert_eq!(run(&["eval", "--threads", "0"], &cfg).status.code(), Some(2));
}

#[test]
fn synth_writes_a_loadable_example() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().arg("synth").arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["scene.ply", "cameras.json", "labels.txt", "config.json"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let cfg = gsdecouple::pipeline::PipelineConfig::load(&dir.path().join("config.json")).unwrap();
    assert_eq!(cfg.object_label, 1);
}
