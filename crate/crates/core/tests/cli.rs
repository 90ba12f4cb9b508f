use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use radiotrace::channel::{read_coverage, render_png, CoverageMap, PngOptions};
use radiotrace::cli::path_polylines;
use radiotrace::scene::load_scene;
use radiotrace::tracer::{compute_paths, Method, TraceConfig};

fn scene(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

fn radiotrace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_radiotrace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn trace_two_ray_writes_two_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("paths.txt");
    let r = radiotrace(&[
        "trace",
        "--scene",
        s(&scene("two_ray.scene")),
        "--max-depth",
        "1",
        "--out",
        s(&out),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 2);
    assert_eq!(records[0]["type"], "line_of_sight");
    assert_eq!(records[1]["type"], "specular");
    assert_eq!(records[1]["order"], 1);
    // Image of the tx at z = -10: 100 m horizontal, 20 m vertical.
    let l = records[1]["length_m"].as_f64().unwrap();
    assert!((l - (100.0f64.powi(2) + 20.0f64.powi(2)).sqrt()).abs() < 1e-9);
}

#[test]
fn coverage_writes_map_and_image_matching_flags() {
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("cm.bin");
    let png = dir.path().join("cm.png");
    let r = radiotrace(&[
        "coverage",
        "--scene",
        s(&scene("free_space.scene")),
        "--grid",
        "10x10",
        "--cell",
        "5",
        "--out",
        s(&bin),
        "--png",
        s(&png),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let map = read_coverage(&bin).unwrap();
    assert_eq!((map.nx, map.ny, map.cell_size, map.height), (10, 10, 5.0, 1.5));
    assert!(map.gain.iter().all(|g| *g > 0.0));
    let img = image::open(&png).unwrap();
    assert_eq!(img.width(), img.height());
    assert_eq!(img.width() % 10, 0);
}

#[test]
fn missing_scene_is_a_user_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.scene");
    let r = radiotrace(&["trace", "--scene", s(&missing), "--out", s(&dir.path().join("p.txt"))]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("absent.scene"));
}

#[test]
fn malformed_flags_are_user_errors() {
    let sc = scene("two_ray.scene");
    for args in [
        vec!["trace", "--scene", s(&sc)],
        vec!["trace", "--scene", s(&sc), "--out", "x", "--method", "random"],
        vec!["coverage", "--scene", s(&sc), "--out", "x", "--grid", "ten"],
        vec!["frobnicate"],
    ] {
        let r = radiotrace(&args);
        assert_eq!(r.status.code(), Some(1), "{args:?}");
        assert!(!r.stderr.is_empty());
    }
    assert_eq!(radiotrace(&["--help"]).status.code(), Some(0));
}

#[test]
fn invalid_scene_content_is_a_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scene");
    fs::write(&bad, "{\"frequency_hz\": 1e9, \"materials\": [").unwrap();
    let r = radiotrace(&["trace", "--scene", s(&bad), "--out", s(&dir.path().join("p.txt"))]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("bad.scene"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let paths = dir.path().join(format!("p{k}.txt"));
        let cir = dir.path().join(format!("c{k}.json"));
        let png = dir.path().join(format!("p{k}.png"));
        let r = radiotrace(&[
            "trace",
            "--scene",
            s(&scene("box.scene")),
            "--max-depth",
            "2",
            "--num-rays",
            "2048",
            "--out",
            s(&paths),
            "--cir",
            s(&cir),
            "--png",
            s(&png),
        ]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        outputs.push([fs::read(paths).unwrap(), fs::read(cir).unwrap(), fs::read(png).unwrap()]);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn dataset_then_calibrate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.json");
    let out = dir.path().join("cal.scene");
    let log = dir.path().join("log.csv");
    let r = radiotrace(&[
        "gen-dataset",
        "--scene",
        s(&scene("two_ray.scene")),
        "--max-depth",
        "1",
        "--method",
        "exhaustive",
        "--grid",
        "3x3",
        "--cell",
        "20",
        "--origin",
        "20,-30",
        "--subcarriers",
        "8",
        "--spacing",
        "1e6",
        "--out",
        s(&data),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let r = radiotrace(&[
        "calibrate",
        "--scene",
        s(&scene("two_ray.scene")),
        "--data",
        s(&data),
        "--max-depth",
        "1",
        "--method",
        "exhaustive",
        "--init-permittivity",
        "15",
        "--init-conductivity",
        "0.015",
        "--iterations",
        "3",
        "--out",
        s(&out),
        "--log",
        s(&log),
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(&log).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("iteration,loss,ground.permittivity,ground.conductivity")
    );
    let first: Vec<&str> = lines.next().unwrap().split(',').collect();
    // Starting at the generating parameters reproduces the data.
    assert_eq!(first[0], "0");
    assert!(first[1].parse::<f64>().unwrap() < 1e-20);
    let learned = load_scene(&out).unwrap();
    let p = learned.materials()[0].params(learned.frequency_hz());
    assert!((p.permittivity - 15.0).abs() < 1e-9 && (p.conductivity - 0.015).abs() < 1e-9);
}

#[test]
fn orient_rejects_an_unknown_device() {
    let dir = tempfile::tempdir().unwrap();
    let r = radiotrace(&[
        "orient",
        "--scene",
        s(&scene("free_space.scene")),
        "--device",
        "nobody",
        "--target",
        "10,10",
        "--out",
        s(&dir.path().join("o.scene")),
    ]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("nobody"));
}

#[test]
fn two_ray_overlay_has_two_polylines() {
    let sc = load_scene(scene("two_ray.scene")).unwrap();
    let cfg = TraceConfig {
        max_depth: 1,
        method: Method::Exhaustive,
        ..TraceConfig::default()
    };
    let lines = path_polylines(&compute_paths(&sc, cfg).unwrap());
    let mut lens: Vec<usize> = lines.iter().map(Vec::len).collect();
    lens.sort();
    assert_eq!(lens, vec![2, 3]);
}

fn map(gain: Vec<f64>) -> CoverageMap {
    CoverageMap {
        origin: [0.0, 0.0],
        cell_size: 1.0,
        nx: 4,
        ny: 4,
        height: 1.5,
        frequency_hz: 1e9,
        gain,
    }
}

#[test]
fn uniform_map_renders_one_color_and_zero_cell_gets_floor() {
    let dir = tempfile::tempdir().unwrap();
    let opts = PngOptions {
        scale: 1,
        ..PngOptions::default()
    };
    let a = dir.path().join("a.png");
    render_png(&map(vec![1e-6; 16]), &opts, &a).unwrap();
    let img = image::open(&a).unwrap().to_rgb8();
    let first = *img.get_pixel(0, 0);
    assert!(img.pixels().all(|p| *p == first));

    let mut g = vec![1e-6; 16];
    g[0] = 0.0;
    let b = dir.path().join("b.png");
    render_png(&map(g), &opts, &b).unwrap();
    let floor = dir.path().join("floor.png");
    render_png(&map(vec![0.0; 16]), &opts, &floor).unwrap();
    let floor_px = *image::open(&floor).unwrap().to_rgb8().get_pixel(0, 0);
    let img = image::open(&b).unwrap().to_rgb8();
    // Cell (0, 0) is the bottom-left pixel.
    assert_eq!(*img.get_pixel(0, 3), floor_px);
    assert_ne!(*img.get_pixel(1, 3), floor_px);
}
