//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use radiotrace::accel::Bvh;
use radiotrace::channel::{cir, CirOptions, DopplerConfig};
use radiotrace::em::{fresnel, pair_coefficients, path_coefficients, CoefficientContext, Endpoint, RadioParams};
use radiotrace::mathdiff::{boresight, grad, Complex, DiffScalar, Tape, Vec3, SPEED_OF_LIGHT};
use radiotrace::optim::{generate_dataset, learn_materials, optimize_orientation, OptimConfig};
use radiotrace::scene::{
    load_scene, look_at, material_eval, AntennaArray, MaterialModel, Pattern, Polarization, RadioMaterial, Scene,
};
use radiotrace::tracer::{compute_paths, Method, TraceConfig, Tracer};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, f64, fn() -> Outcome);

fn scene_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenes").join(name)
}

fn exhaustive(depth: usize) -> TraceConfig {
    TraceConfig {
        max_depth: depth,
        method: Method::Exhaustive,
        ..TraceConfig::default()
    }
}

fn iso() -> AntennaArray {
    AntennaArray::single(Pattern::Iso, Polarization::V)
}

fn move_device(scene: &Scene, index: usize, position: Vec3) -> Scene {
    let mut devs = scene.devices().to_vec();
    devs[index].position = position;
    scene.with_devices(devs).unwrap()
}

fn with_material(scene: &Scene, index: usize, eps: f64, sigma: f64) -> Scene {
    let mut mats = scene.materials().to_vec();
    mats[index].model = MaterialModel::Constant {
        relative_permittivity: eps,
        conductivity: sigma,
    };
    scene.with_materials(mats).unwrap()
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within_time(elapsed: Duration, limit_s: f64, r: Outcome) -> Outcome {
    let t = elapsed.as_secs_f64();
    match r {
        Ok(d) if t < limit_s => Ok(format!("{d}; {t:.2} s < {limit_s} s")),
        Ok(d) => Err(format!("{d}; runtime {t:.2} s exceeds {limit_s} s")),
        Err(d) => Err(format!("{d}; {t:.2} s")),
    }
}

/// Plane-earth two-ray field with the vertical-polarization reflection
/// coefficient of a lossy half space.
fn two_ray_field(eta: Complex, f: f64, h1: f64, h2: f64, d: f64) -> Complex {
    let lambda = SPEED_OF_LIGHT / f;
    let k = 2.0 * PI / lambda;
    let r1 = (d * d + (h1 - h2).powi(2)).sqrt();
    let r2 = (d * d + (h1 + h2).powi(2)).sqrt();
    let sin_psi = (h1 + h2) / r2;
    let root = (eta - Complex::from_real(1.0 - sin_psi * sin_psi)).sqrt();
    let gamma_v = (eta.scale(sin_psi) - root) / (eta.scale(sin_psi) + root);
    let los = Complex::from_phase(-k * r1).scale(1.0 / r1);
    let refl = gamma_v * Complex::from_phase(-k * r2).scale(1.0 / r2);
    (los + refl).scale(lambda / (4.0 * PI))
}

fn two_ray_oracle() -> Outcome {
    let base = load_scene(scene_file("two_ray.scene")).map_err(|e| e.to_string())?;
    let f = base.frequency_hz();
    let eta = RadioMaterial::constant("g", 15.0, 0.015).params(f).eta(f);
    let mut worst: f64 = 0.0;
    for d in (1..=10).map(|k| 50.0 * k as f64) {
        let s = move_device(&base, 1, Vec3::new(d, 0.0, 10.0));
        let tracer = Tracer::new(&s, exhaustive(1)).map_err(|e| e.to_string())?;
        let ps = tracer.compute_paths().map_err(|e| e.to_string())?;
        if ps.pair(0, 0).len() != 2 {
            return Err(format!("{} paths at {d} m", ps.pair(0, 0).len()));
        }
        let c = cir(&s, Some(tracer.bvh()), &ps, &CirOptions::default());
        let sum = (0..c.paths(0, 0)).fold(Complex::zero(), |acc, p| acc + c.a(0, 0, 0, 0, p, 0));
        let expect = two_ray_field(eta, f, 10.0, 10.0, d);
        worst = worst.max((db(sum.norm_sqr()) - db(expect.norm_sqr())).abs());
    }
    check(
        worst <= 0.1,
        format!("max |ΔP| = {worst:.2e} dB over 50..500 m (tol 0.1 dB)"),
    )
}

fn friis() -> Outcome {
    let base = load_scene(scene_file("free_space.scene")).map_err(|e| e.to_string())?;
    let base = base.with_arrays(iso(), iso(), true).unwrap();
    let lambda = base.wavelength();
    let mut worst: f64 = 0.0;
    for d in [10.0, 100.0, 1000.0] {
        let s = move_device(&base, 1, Vec3::new(d, 0.0, 10.0));
        let ps = compute_paths(&s, exhaustive(0)).map_err(|e| e.to_string())?;
        let c = cir(&s, None, &ps, &CirOptions::default());
        let g = c.a(0, 0, 0, 0, 0, 0).norm_sqr();
        let expect = (lambda / (4.0 * PI * d)).powi(2);
        worst = worst.max((g / expect - 1.0).abs());
    }
    check(
        worst <= 1e-9,
        format!("max relative error {worst:.2e} at 10/100/1000 m (tol 1e-9)"),
    )
}

fn fresnel_pins() -> Outcome {
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst_normal: f64 = 0.0;
    for _ in 0..100 {
        let eps = rng.gen_range(1.0..80.0);
        let eta = Complex::from_real(eps);
        let (te, tm) = fresnel(eta, 1.0);
        let expect = (1.0 - eps.sqrt()) / (1.0 + eps.sqrt());
        worst_normal = worst_normal.max((te.re - expect).abs() + te.im.abs());
        worst_normal = worst_normal.max((tm.re - expect).abs() + tm.im.abs());
    }
    let mut worst_mag: f64 = 0.0;
    for _ in 0..10_000 {
        let eta = Complex::new(rng.gen_range(1.0..100.0), -rng.gen_range(0.0..1e3));
        let cos = rng.gen_range(0.0..=1.0);
        let (te, tm) = fresnel(eta, cos);
        worst_mag = worst_mag.max(te.abs()).max(tm.abs());
    }
    check(
        worst_normal <= 1e-12 && worst_mag <= 1.0,
        format!("normal-incidence error {worst_normal:.1e} (tol 1e-12); max |r| = {worst_mag:.15} (≤ 1)"),
    )
}

fn image_equivalence() -> Outcome {
    let s = load_scene(scene_file("box.scene")).map_err(|e| e.to_string())?;
    if s.primitives().len() > 24 {
        return Err(format!("box has {} triangles", s.primitives().len()));
    }
    let ex = compute_paths(&s, exhaustive(2)).map_err(|e| e.to_string())?;
    let fib_cfg = TraceConfig {
        max_depth: 2,
        method: Method::Fibonacci { num_rays: 8192 },
        ..TraceConfig::default()
    };
    let fib = compute_paths(&s, fib_cfg).map_err(|e| e.to_string())?;
    let (a, b) = (ex.pair(0, 0), fib.pair(0, 0));
    let same_seq = a.len() == b.len() && a.iter().zip(b).all(|(p, q)| p.primitives == q.primitives);
    let max_dl = a
        .iter()
        .zip(b)
        .map(|(p, q)| (p.length - q.length).abs())
        .fold(0.0, f64::max);
    check(
        same_seq && max_dl <= 1e-9,
        format!(
            "exhaustive {} paths, fibonacci {} paths, max |ΔL| = {max_dl:.1e} m",
            a.len(),
            b.len()
        ),
    )
}

/// Two-ray geometry with a 3GPP sector transmitter.
fn gradient_fixture(eps: f64, sigma: f64, d: f64) -> Scene {
    let base = load_scene(scene_file("two_ray.scene")).unwrap();
    let tr = AntennaArray::single(Pattern::Tr38901, Polarization::V);
    let s = base.with_arrays(tr, iso(), true).unwrap();
    let s = with_material(&s, 0, eps, sigma);
    move_device(&s, 1, Vec3::new(d, 0.0, 1.5))
}

fn link_power<T: radiotrace::mathdiff::Real>(
    s: &Scene,
    params: &RadioParams<T>,
    paths: &[radiotrace::tracer::PropagationPath],
) -> T {
    let sum = pair_coefficients(s, None, params, 0, 1, paths)
        .iter()
        .fold(Complex::zero(), |acc, c| acc + c[0]);
    sum.norm_sqr()
}

fn region_power<T: radiotrace::mathdiff::Real>(
    s: &Scene,
    params: &RadioParams<T>,
    cells: &[(Vec3, Vec<radiotrace::tracer::PropagationPath>)],
) -> T {
    let ctx = CoefficientContext {
        primitives: s.primitives(),
        bvh: None,
        frequency_hz: s.frequency_hz(),
        synthetic_array: true,
    };
    let tx = Endpoint {
        position: params.positions[0],
        orientation: params.orientations[0],
        array: s.tx_array(),
    };
    let probe = iso();
    let mut total = T::zero();
    for (p, paths) in cells {
        let rx = Endpoint {
            position: Vec3::cst(*p),
            orientation: [T::zero(); 3],
            array: &probe,
        };
        for path in paths {
            total = total + path_coefficients(&ctx, &params.etas, &tx, &rx, path)[0].norm_sqr();
        }
    }
    total / cells.len() as f64
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn gradients() -> Outcome {
    let points = [
        (3.0, 0.01, -0.4, 30.0),
        (5.24, 0.05, -0.2, 60.0),
        (8.0, 0.1, 0.1, 100.0),
        (15.0, 0.5, 0.3, 150.0),
        (30.0, 1.0, 0.5, 250.0),
    ];
    let mut worst: f64 = 0.0;
    for (eps, sigma, yaw, d) in points {
        let s = gradient_fixture(eps, sigma, d);
        let f = s.frequency_hz();
        let paths = compute_paths(&s, exhaustive(1))
            .map_err(|e| e.to_string())?
            .pair(0, 0)
            .to_vec();
        let mut base = RadioParams::<f64>::from_scene(&s);
        base.orientations[0][0] = yaw;

        let tape = Tape::new();
        let mut m = s.materials()[0].clone();
        m.trainable = true;
        let mut params = RadioParams::<DiffScalar>::from_scene(&s);
        params.orientations[0][0] = DiffScalar::constant(yaw);
        params.etas[0] = material_eval(&m, f, Some(&tape)).eta;
        let g = grad(&tape, link_power(&s, &params, &paths)).map_err(|e| e.to_string())?;
        let ge = g.get("ground.permittivity").unwrap_or(0.0);
        let gs = g.get("ground.conductivity").unwrap_or(0.0);
        let p_at = |e: f64, sg: f64| {
            let mut p = base.clone();
            p.etas[0] = RadioMaterial::constant("g", e, sg).params(f).eta(f);
            link_power(&s, &p, &paths)
        };
        let he = 1e-6 * eps;
        let hs = 1e-6 * sigma;
        let fd_e = (p_at(eps + he, sigma) - p_at(eps - he, sigma)) / (2.0 * he);
        let fd_s = (p_at(eps, sigma + hs) - p_at(eps, sigma - hs)) / (2.0 * hs);
        worst = worst.max(rel(ge, fd_e)).max(rel(gs, fd_s));

        let tracer = Tracer::new(&s, exhaustive(1)).map_err(|e| e.to_string())?;
        let src = s.devices()[0].position;
        let cands = tracer.candidates(src).map_err(|e| e.to_string())?;
        let cells: Vec<_> = [(-3.0, -2.0), (0.0, 0.0), (2.0, 4.0), (4.0, -3.0)]
            .iter()
            .map(|(dx, dy)| {
                let p = Vec3::new(d + dx, 10.0 + dy, 1.5);
                (p, tracer.trace(src, p, &cands))
            })
            .collect();
        let tape = Tape::new();
        let mut params = RadioParams::<DiffScalar>::from_scene(&s);
        params.orientations[0][0] = tape.leaf("tx.yaw", yaw);
        let gy = grad(&tape, region_power(&s, &params, &cells))
            .map_err(|e| e.to_string())?
            .get("tx.yaw")
            .unwrap_or(0.0);
        let r_at = |y: f64| {
            let mut p = base.clone();
            p.orientations[0][0] = y;
            region_power(&s, &p, &cells)
        };
        let h = 1e-6;
        let fd_y = (r_at(yaw + h) - r_at(yaw - h)) / (2.0 * h);
        worst = worst.max(rel(gy, fd_y));
    }
    check(
        worst <= 1e-3,
        format!("max relative error {worst:.2e} over 5 points × 3 gradients (tol 1e-3)"),
    )
}

fn material_learning() -> Outcome {
    let truth = load_scene(scene_file("three_object.scene")).map_err(|e| e.to_string())?;
    let positions: Vec<Vec3> = (0..25)
        .map(|i| Vec3::new(5.0 + 5.0 * (i % 5) as f64, -10.0 + 5.0 * (i / 5) as f64, 1.5))
        .collect();
    let trace = exhaustive(2);
    let data = generate_dataset(&truth, &positions, 128, 30e3, trace).map_err(|e| e.to_string())?;
    let mut init = truth.clone();
    for i in 0..truth.materials().len() {
        init = with_material(&init, i, 3.0, 0.1);
    }
    let cfg = OptimConfig {
        iterations: 300,
        ..OptimConfig::default()
    };
    let r = learn_materials(&init, &data, &cfg, trace).map_err(|e| e.to_string())?;
    let loss = r.log.final_loss().unwrap_or(f64::NAN);
    let f = truth.frequency_hz();
    let mut ok = loss < 1e-4 && r.log.rows.len() <= 300;
    let mut parts = vec![format!("loss {loss:.2e} after {} iterations", r.log.rows.len())];
    for (i, m) in truth.materials().iter().enumerate() {
        let learned = r.scene.materials()[i].params(f);
        let n = r.paths_per_material[i];
        if n >= 5 {
            let err = (learned.permittivity - m.params(f).permittivity).abs();
            ok &= err <= 0.1;
            parts.push(format!("{} ε {:.4} ({n} paths)", m.name, learned.permittivity));
        } else if n == 0 {
            let start = init.materials()[i].params(f);
            let same = learned.permittivity.to_bits() == start.permittivity.to_bits()
                && learned.conductivity.to_bits() == start.conductivity.to_bits();
            ok &= same;
            parts.push(format!("{} untouched, unchanged: {same}", m.name));
        }
    }
    check(ok, parts.join(", "))
}

fn orientation() -> Outcome {
    let s = load_scene(scene_file("free_space.scene")).map_err(|e| e.to_string())?;
    let src = s.devices()[0].position;
    // Equal azimuth and elevation offsets, 45° off the initial boresight.
    let a = (0.5f64.sqrt()).sqrt().acos();
    let dir = Vec3::new(a.cos() * a.cos(), a.cos() * a.sin(), -a.sin());
    let off = dir.angle_to(&Vec3::new(1.0, 0.0, 0.0)).to_degrees();
    let target = src + dir.scale(30.0);
    let r =
        optimize_orientation(&s, 0, &[target], &OptimConfig::default(), exhaustive(0)).map_err(|e| e.to_string())?;
    let [y, p, _] = r.orientation;
    let err = boresight(y, p).angle_to(&dir).to_degrees();
    let gain = r.final_db - r.initial_db;
    let monotone = r.log.rows.windows(2).all(|w| w[1].loss >= w[0].loss);
    check(
        gain >= 6.0 && err < 1.0 && monotone,
        format!("target {off:.2}° off; gain +{gain:.3} dB (≥ 6), boresight error {err:.4}° (< 1), non-decreasing: {monotone}"),
    )
}

fn synthetic_vs_explicit() -> Outcome {
    let base = load_scene(scene_file("two_ray.scene")).map_err(|e| e.to_string())?;
    let s = move_device(&base, 1, Vec3::new(200.0, 0.0, 10.0));
    let mut devs = s.devices().to_vec();
    devs[0].orientation = look_at(devs[0].position, devs[1].position).unwrap();
    devs[1].orientation = look_at(devs[1].position, devs[0].position).unwrap();
    let s = s.with_devices(devs).unwrap();
    let arr = AntennaArray {
        num_rows: 8,
        num_cols: 2,
        vertical_spacing: 0.5,
        horizontal_spacing: 0.7,
        pattern: Pattern::Tr38901,
        polarization: Polarization::V,
    };
    let syn = s.with_arrays(arr, arr, true).unwrap();
    let exp = s.with_arrays(arr, arr, false).unwrap();
    let ps = compute_paths(&syn, exhaustive(1)).map_err(|e| e.to_string())?;
    let paths = ps.pair(0, 0);
    let bvh = Bvh::build(&exp);
    let a = pair_coefficients(&syn, None, &RadioParams::<f64>::from_scene(&syn), 0, 1, paths);
    let b = pair_coefficients(&exp, Some(&bvh), &RadioParams::<f64>::from_scene(&exp), 0, 1, paths);
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (pa, pb)) in a.iter().zip(&b).enumerate() {
        let (mut amp, mut phase): (f64, f64) = (0.0, 0.0);
        for (x, y) in pa.iter().zip(pb) {
            amp = amp.max((x.abs() / y.abs() - 1.0).abs());
            phase = phase.max(wrap(x.arg() - y.arg()).abs());
        }
        ok &= amp <= 0.01 && phase <= 0.05;
        parts.push(format!(
            "{} path: {} gains, max amplitude error {:.3} %, max phase error {phase:.4} rad",
            if paths[i].primitives.is_empty() {
                "LOS"
            } else {
                "ground"
            },
            pa.len(),
            amp * 100.0
        ));
    }
    check(ok && !a.is_empty(), format!("{} (tol 1 %, 0.05 rad)", parts.join("; ")))
}

fn doppler() -> Outcome {
    let base = load_scene(scene_file("free_space.scene")).map_err(|e| e.to_string())?;
    let base = base.with_arrays(iso(), iso(), true).unwrap();
    let opts = CirOptions {
        doppler: Some(DopplerConfig {
            sampling_frequency: 1e6,
            num_time_steps: 14,
        }),
        ..CirOptions::default()
    };
    let ps = compute_paths(&base, exhaustive(0)).map_err(|e| e.to_string())?;
    let still = cir(&base, None, &ps, &opts);
    let a0 = still.a(0, 0, 0, 0, 0, 0);
    let static_ok = (0..14).all(|t| still.a(0, 0, 0, 0, 0, t) == a0);

    let mut devs = base.devices().to_vec();
    let towards = (devs[1].position - devs[0].position).normalized();
    devs[0].velocity = towards.scale(3.0);
    let moving = base.with_devices(devs).unwrap();
    let c = cir(&moving, None, &ps, &opts);
    // Least-squares slope of the unwrapped phase against time.
    let mut phase = Vec::with_capacity(14);
    let mut prev = c.a(0, 0, 0, 0, 0, 0).arg();
    let mut acc = prev;
    for t in 0..14 {
        let ph = c.a(0, 0, 0, 0, 0, t).arg();
        acc += wrap(ph - prev);
        prev = ph;
        phase.push(acc);
    }
    let n = 14.0;
    let ts: Vec<f64> = (0..14).map(|t| t as f64 / 1e6).collect();
    let mt = ts.iter().sum::<f64>() / n;
    let mp = phase.iter().sum::<f64>() / n;
    let num: f64 = ts.iter().zip(&phase).map(|(t, p)| (t - mt) * (p - mp)).sum();
    let den: f64 = ts.iter().map(|t| (t - mt).powi(2)).sum();
    let f_meas = num / den / (2.0 * PI);
    check(
        static_ok && (f_meas - 35.02).abs() <= 0.1,
        format!("static constant: {static_ok}; measured {f_meas:.4} Hz (35.02 ± 0.1)"),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    let sc = scene_file("three_object.scene").to_string_lossy().into_owned();
    let gen = [
        "radiotrace",
        "gen-dataset",
        "--scene",
        &sc,
        "--max-depth",
        "2",
        "--grid",
        "4x4",
        "--cell",
        "6",
        "--origin",
        "4,-12",
        "--subcarriers",
        "32",
        "--spacing",
        "30e3",
    ];
    let mut data = gen.to_vec();
    let data_path = d("data.json");
    data.extend(["--out", &data_path]);
    if radiotrace::cli::run(data) != 0 {
        return Err("gen-dataset failed".into());
    }
    let mut outputs = Vec::new();
    for k in 0..2 {
        let (out, log) = (d(&format!("cal{k}.scene")), d(&format!("log{k}.csv")));
        let code = radiotrace::cli::run([
            "radiotrace",
            "calibrate",
            "--scene",
            &sc,
            "--data",
            &data_path,
            "--max-depth",
            "2",
            "--init-permittivity",
            "3.0",
            "--init-conductivity",
            "0.1",
            "--iterations",
            "40",
            "--out",
            &out,
            "--log",
            &log,
        ]);
        if code != 0 {
            return Err(format!("calibrate exited with {code}"));
        }
        outputs.push((fs::read(&out).unwrap(), fs::read(&log).unwrap()));
    }
    let same = outputs[0] == outputs[1];
    check(
        same,
        format!(
            "two calibrate runs: scene {} bytes, log {} bytes, identical: {same}",
            outputs[0].0.len(),
            outputs[0].1.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("two-ray analytic oracle", 1.0, two_ray_oracle),
        ("Friis free-space gain", 1.0, friis),
        ("Fresnel pins", 1.0, fresnel_pins),
        ("image-method equivalence", 10.0, image_equivalence),
        ("gradient correctness", 5.0, gradients),
        ("material-learning recovery", 120.0, material_learning),
        ("orientation optimization", 60.0, orientation),
        ("synthetic vs explicit array", 10.0, synthetic_vs_explicit),
        ("Doppler", f64::INFINITY, doppler),
        ("determinism", f64::INFINITY, determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let r = if limit.is_finite() {
            within_time(start.elapsed(), *limit, r)
        } else {
            r.map(|d| format!("{d}; {:.2} s", start.elapsed().as_secs_f64()))
        };
        match r {
            Ok(d) => println!("PASS {:>2} {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {d}", i + 1)
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
