//! Gradient-based calibration: trainable parameter registry, a projected
//! descent loop, material learning from frequency responses, and
//! transmitter orientation optimization.

mod materials;
mod orientation;

use std::fmt::Write as _;

pub use materials::{
    generate_dataset, learn_materials, nmse_loss, Dataset, DatasetRecord, LearnResult, MaterialProblem,
};
pub use orientation::{optimize_orientation, region_points, OrientResult, OrientationProblem};

use crate::em::RadioParams;
use crate::error::{Error, Result};
use crate::mathdiff::{Complex, DiffScalar, Tape};
use crate::scene::{material_leaf_name, MaterialParams, MaterialQuantity, Scene};

/// What a trainable leaf controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LeafKind {
    Material {
        material: usize,
        quantity: MaterialQuantity,
    },
    /// Axis 0, 1, 2 = yaw, pitch, roll.
    Orientation { device: usize, axis: usize },
    /// Axis 0, 1, 2 = x, y, z.
    Position { device: usize, axis: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub name: String,
    pub kind: LeafKind,
    pub value: f64,
    /// Base step size for this leaf.
    pub lr: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Named parameters the optimizer may move, with box constraints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainableSet {
    pub leaves: Vec<Leaf>,
}

const AXES_ORIENT: [&str; 3] = ["yaw", "pitch", "roll"];
const AXES_POS: [&str; 3] = ["x", "y", "z"];

impl TrainableSet {
    /// Permittivity and conductivity of every trainable material, at their
    /// current values. Permittivity leaves step with `lr`, conductivity
    /// leaves with `lr / 10`.
    pub fn materials(scene: &Scene, lr: f64) -> Self {
        let f = scene.frequency_hz();
        let mut leaves = Vec::new();
        for (i, m) in scene.materials().iter().enumerate() {
            if !m.trainable {
                continue;
            }
            let p = m.params(f);
            leaves.push(Leaf {
                name: material_leaf_name(&m.name, MaterialQuantity::Permittivity),
                kind: LeafKind::Material {
                    material: i,
                    quantity: MaterialQuantity::Permittivity,
                },
                value: p.permittivity,
                lr,
                lower: 1.0,
                upper: f64::INFINITY,
            });
            leaves.push(Leaf {
                name: material_leaf_name(&m.name, MaterialQuantity::Conductivity),
                kind: LeafKind::Material {
                    material: i,
                    quantity: MaterialQuantity::Conductivity,
                },
                value: p.conductivity,
                lr: lr / 10.0,
                lower: 0.0,
                upper: f64::INFINITY,
            });
        }
        Self { leaves }
    }

    /// Yaw, pitch and roll of one device.
    pub fn orientation(scene: &Scene, device: usize, lr: f64) -> Self {
        let d = &scene.devices()[device];
        let leaves = (0..3)
            .map(|axis| Leaf {
                name: format!("{}.{}", d.name, AXES_ORIENT[axis]),
                kind: LeafKind::Orientation { device, axis },
                value: d.orientation[axis],
                lr,
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            })
            .collect();
        Self { leaves }
    }

    /// Position components of one device.
    pub fn position(scene: &Scene, device: usize, lr: f64) -> Self {
        let d = &scene.devices()[device];
        let leaves = (0..3)
            .map(|axis| Leaf {
                name: format!("{}.{}", d.name, AXES_POS[axis]),
                kind: LeafKind::Position { device, axis },
                value: d.position.axis(axis),
                lr,
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
            })
            .collect();
        Self { leaves }
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.leaves.iter().map(|l| l.name.clone()).collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.leaves.iter().map(|l| l.value).collect()
    }

    /// Clamps each value into its leaf's bounds.
    pub fn project(&self, values: &mut [f64]) {
        for (v, l) in values.iter_mut().zip(&self.leaves) {
            *v = v.clamp(l.lower, l.upper);
        }
    }

    /// Plain parameters with `values` substituted for the leaves.
    pub fn plain_params(&self, scene: &Scene, values: &[f64]) -> RadioParams<f64> {
        let mut p = RadioParams::<f64>::from_scene(scene);
        let f = scene.frequency_hz();
        let mut mats: Vec<MaterialParams<f64>> = scene.materials().iter().map(|m| m.params(f)).collect();
        for (l, &v) in self.leaves.iter().zip(values) {
            match l.kind {
                LeafKind::Material { material, quantity } => match quantity {
                    MaterialQuantity::Permittivity => mats[material].permittivity = v,
                    MaterialQuantity::Conductivity => mats[material].conductivity = v,
                },
                LeafKind::Orientation { device, axis } => p.orientations[device][axis] = v,
                LeafKind::Position { device, axis } => set_axis(&mut p.positions[device], axis, v),
            }
        }
        p.etas = mats.iter().map(|m| m.eta(f)).collect();
        p
    }

    /// Parameters with one tape leaf per trainable quantity.
    pub fn taped_params<'t>(&self, scene: &Scene, values: &[f64], tape: &'t Tape) -> RadioParams<DiffScalar<'t>> {
        let mut p = RadioParams::<DiffScalar<'t>>::from_scene(scene);
        let f = scene.frequency_hz();
        let mut mats: Vec<MaterialParams<DiffScalar<'t>>> = scene
            .materials()
            .iter()
            .map(|m| {
                let v = m.params(f);
                MaterialParams {
                    permittivity: DiffScalar::constant(v.permittivity),
                    conductivity: DiffScalar::constant(v.conductivity),
                }
            })
            .collect();
        let mut touched = vec![false; mats.len()];
        for (l, &v) in self.leaves.iter().zip(values) {
            let leaf = tape.leaf(l.name.clone(), v);
            match l.kind {
                LeafKind::Material { material, quantity } => {
                    touched[material] = true;
                    match quantity {
                        MaterialQuantity::Permittivity => mats[material].permittivity = leaf,
                        MaterialQuantity::Conductivity => mats[material].conductivity = leaf,
                    }
                }
                LeafKind::Orientation { device, axis } => p.orientations[device][axis] = leaf,
                LeafKind::Position { device, axis } => set_axis(&mut p.positions[device], axis, leaf),
            }
        }
        for (i, m) in mats.iter().enumerate() {
            if touched[i] {
                p.etas[i] = m.eta(f);
            }
        }
        p
    }

    /// Copy of `scene` with `values` written back into materials and devices.
    pub fn apply(&self, scene: &Scene, values: &[f64]) -> Result<Scene> {
        let f = scene.frequency_hz();
        let mut materials = scene.materials().to_vec();
        let mut devices = scene.devices().to_vec();
        for (l, &v) in self.leaves.iter().zip(values) {
            match l.kind {
                LeafKind::Material { material, quantity } => {
                    let m = &mut materials[material];
                    let mut p = m.params(f);
                    match quantity {
                        MaterialQuantity::Permittivity => p.permittivity = v,
                        MaterialQuantity::Conductivity => p.conductivity = v,
                    }
                    m.model = crate::scene::MaterialModel::Constant {
                        relative_permittivity: p.permittivity,
                        conductivity: p.conductivity,
                    };
                }
                LeafKind::Orientation { device, axis } => devices[device].orientation[axis] = v,
                LeafKind::Position { device, axis } => set_axis(&mut devices[device].position, axis, v),
            }
        }
        scene.with_materials(materials)?.with_devices(devices)
    }
}

fn set_axis<T>(v: &mut crate::mathdiff::Vec3<T>, axis: usize, x: T) {
    match axis {
        0 => v.x = x,
        1 => v.y = x,
        _ => v.z = x,
    }
}

/// One logged iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    /// Objective at the start of the iteration.
    pub loss: f64,
    /// Leaf values at the start of the iteration.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub leaf_names: Vec<String>,
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    /// `iteration,loss,<leaf>...` with one row per iteration.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,loss");
        for n in &self.leaf_names {
            s.push(',');
            s.push_str(n);
        }
        s.push('\n');
        for r in &self.rows {
            write!(s, "{},{:e}", r.iteration, r.loss).unwrap();
            for v in &r.values {
                write!(s, ",{v}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.rows.last().map(|r| r.loss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    /// Iteration cap.
    pub iterations: usize,
    /// Base step size used when building leaf sets; see [`TrainableSet`]
    /// for per-leaf scaling.
    pub lr: f64,
    /// Backtracking (Armijo) line search with step growth after success.
    pub line_search: bool,
    /// Stop when the relative objective change over `window` iterations
    /// drops below this.
    pub tolerance: f64,
    pub window: usize,
    /// Re-trace path topology every this many iterations when geometry
    /// can move.
    pub refresh_every: usize,
}

impl Default for OptimConfig {
    fn default() -> Self {
        Self {
            iterations: 500,
            lr: 0.05,
            line_search: true,
            tolerance: 1e-6,
            window: 10,
            refresh_every: 10,
        }
    }
}

/// An objective to minimize over a [`TrainableSet`].
pub trait Problem {
    fn leaves(&self) -> &TrainableSet;
    /// Objective and its gradient (in leaf order).
    fn evaluate(&mut self, values: &[f64]) -> Result<(f64, Vec<f64>)>;
    /// Objective only.
    fn objective(&mut self, values: &[f64]) -> Result<f64> {
        Ok(self.evaluate(values)?.0)
    }
    /// Hook called every `refresh_every` iterations.
    fn refresh(&mut self, _values: &[f64]) -> Result<()> {
        Ok(())
    }
}

/// Projected gradient descent on `problem`, starting from its leaf values.
/// Returns the log and the final values.
pub fn descend<P: Problem>(problem: &mut P, cfg: &OptimConfig) -> Result<(TrainLog, Vec<f64>)> {
    let leaves = problem.leaves().clone();
    let lrs: Vec<f64> = leaves.leaves.iter().map(|l| l.lr).collect();
    let mut x = leaves.values();
    leaves.project(&mut x);
    let mut log = TrainLog {
        leaf_names: leaves.names(),
        rows: Vec::new(),
    };
    let mut scale = 1.0;
    for it in 0..cfg.iterations {
        if it > 0 && cfg.refresh_every > 0 && it % cfg.refresh_every == 0 {
            problem.refresh(&x)?;
        }
        let (loss, g) = problem.evaluate(&x)?;
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: it, loss });
        }
        log.rows.push(LogRow {
            iteration: it,
            loss,
            values: x.clone(),
        });
        if converged(&log, cfg) || g.iter().all(|v| *v == 0.0) {
            break;
        }
        if !cfg.line_search {
            for i in 0..x.len() {
                x[i] -= lrs[i] * g[i];
            }
            leaves.project(&mut x);
            continue;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let mut cand = x.clone();
            for i in 0..cand.len() {
                cand[i] -= scale * lrs[i] * g[i];
            }
            leaves.project(&mut cand);
            let decrease: f64 = g.iter().zip(x.iter().zip(&cand)).map(|(g, (a, b))| g * (a - b)).sum();
            if decrease <= 0.0 {
                break;
            }
            let lc = problem.objective(&cand)?;
            if lc.is_finite() && lc <= loss - 1e-4 * decrease {
                x = cand;
                scale *= 2.0;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((log, x))
}

fn converged(log: &TrainLog, cfg: &OptimConfig) -> bool {
    let n = log.rows.len();
    if n == 0 {
        return false;
    }
    let last = log.rows[n - 1].loss;
    if last == 0.0 {
        return true;
    }
    if n <= cfg.window {
        return false;
    }
    let prev = log.rows[n - 1 - cfg.window].loss;
    ((prev - last) / prev.abs().max(f64::MIN_POSITIVE)).abs() < cfg.tolerance
}

/// `Σ|p − t|² / Σ|t|²`.
pub(crate) fn nmse_terms<T: crate::mathdiff::Real>(pred: &[Complex<T>], truth: &[Complex]) -> T {
    let mut num = T::zero();
    for (p, t) in pred.iter().zip(truth) {
        num = num + (*p - Complex::cst(*t)).norm_sqr();
    }
    let den: f64 = truth.iter().map(Complex::norm_sqr).sum();
    num / den
}
