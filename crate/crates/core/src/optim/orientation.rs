use rayon::prelude::*;

use super::{descend, OptimConfig, Problem, TrainLog, TrainableSet};
use crate::accel::RAY_EPSILON;
use crate::channel::probe_array;
use crate::em::{path_coefficients, CoefficientContext, Endpoint, RadioParams};
use crate::error::{Error, Result};
use crate::mathdiff::{grad, Real, Tape, Vec3};
use crate::scene::{AntennaArray, Scene};
use crate::tracer::{PropagationPath, TraceConfig, Tracer};

/// Probe points on a square lattice of pitch `cell` anchored at `center`,
/// keeping those within `radius` of it, at height `height`.
pub fn region_points(center: [f64; 2], radius: f64, cell: f64, height: f64) -> Result<Vec<Vec3>> {
    if !(cell > 0.0) || !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::Config(
            "region needs a positive cell and a non-negative radius".into(),
        ));
    }
    let n = (radius / cell).floor() as i64;
    let mut pts = Vec::new();
    for j in -n..=n {
        for i in -n..=n {
            let (dx, dy) = (i as f64 * cell, j as f64 * cell);
            if dx.hypot(dy) <= radius + 1e-9 {
                pts.push(Vec3::new(center[0] + dx, center[1] + dy, height));
            }
        }
    }
    Ok(pts)
}

/// Negative mean region gain in dB, `−10·log10(mean Σ|a|²)`, as a function
/// of one device's yaw, pitch and roll. The device transmits through its
/// central array element; probes are isotropic and vertically polarized.
pub struct OrientationProblem<'s> {
    scene: &'s Scene,
    leaves: TrainableSet,
    device: usize,
    element: AntennaArray,
    probe: AntennaArray,
    cells: Vec<(Vec3, Vec<PropagationPath>)>,
}

impl<'s> OrientationProblem<'s> {
    pub fn new(scene: &'s Scene, device: usize, region: &[Vec3], lr: f64, trace: TraceConfig) -> Result<Self> {
        if region.is_empty() {
            return Err(Error::EmptyInput("target region has no probe points"));
        }
        if device >= scene.devices().len() {
            return Err(Error::Validation(format!("device index {device} out of range")));
        }
        let tracer = Tracer::new(scene, trace)?;
        let source = scene.devices()[device].position;
        let candidates = tracer.candidates(source)?;
        let cells = region
            .par_iter()
            .map(|p| {
                let paths = if p.distance(&source) <= RAY_EPSILON {
                    Vec::new()
                } else {
                    tracer.trace(source, *p, &candidates)
                };
                (*p, paths)
            })
            .collect();
        let mut element = *scene.tx_array();
        element.num_rows = 1;
        element.num_cols = 1;
        Ok(Self {
            scene,
            leaves: TrainableSet::orientation(scene, device, lr),
            device,
            element,
            probe: probe_array(),
            cells,
        })
    }

    /// Number of probe points reached by at least one path.
    pub fn reached(&self) -> usize {
        self.cells.iter().filter(|(_, p)| !p.is_empty()).count()
    }

    fn mean_power<T: Real>(&self, params: &RadioParams<T>) -> T {
        let ctx = CoefficientContext {
            primitives: self.scene.primitives(),
            bvh: None,
            frequency_hz: self.scene.frequency_hz(),
            synthetic_array: self.scene.synthetic_array(),
        };
        let tx = Endpoint {
            position: params.positions[self.device],
            orientation: params.orientations[self.device],
            array: &self.element,
        };
        let mut total = T::zero();
        for (pos, paths) in &self.cells {
            let rx = Endpoint {
                position: Vec3::cst(*pos),
                orientation: [T::zero(); 3],
                array: &self.probe,
            };
            for p in paths {
                total = total + path_coefficients(&ctx, &params.etas, &tx, &rx, p)[0].norm_sqr();
            }
        }
        total / self.cells.len() as f64
    }

    /// Mean region gain in dB at the given yaw, pitch and roll.
    pub fn gain_db(&self, values: &[f64]) -> f64 {
        let p = self.mean_power(&self.leaves.plain_params(self.scene, values));
        10.0 * p.log10()
    }
}

impl Problem for OrientationProblem<'_> {
    fn leaves(&self) -> &TrainableSet {
        &self.leaves
    }

    fn evaluate(&mut self, values: &[f64]) -> Result<(f64, Vec<f64>)> {
        let tape = Tape::new();
        let params = self.leaves.taped_params(self.scene, values, &tape);
        let p = self.mean_power(&params);
        let loss = -(p.ln() * (10.0 / std::f64::consts::LN_10));
        let g = grad(&tape, loss)?;
        let names = self.leaves.names();
        Ok((loss.value(), names.iter().map(|n| g.get(n).unwrap_or(0.0)).collect()))
    }

    fn objective(&mut self, values: &[f64]) -> Result<f64> {
        Ok(-self.gain_db(values))
    }
}

#[derive(Debug, Clone)]
pub struct OrientResult {
    /// Logged objective is the mean region gain in dB.
    pub log: TrainLog,
    pub initial_db: f64,
    pub final_db: f64,
    /// Final yaw, pitch, roll in radians.
    pub orientation: [f64; 3],
    /// Input scene with the device re-oriented.
    pub scene: Scene,
}

/// Gradient ascent on the mean region gain over one device's orientation.
pub fn optimize_orientation(
    scene: &Scene,
    device: usize,
    region: &[Vec3],
    cfg: &OptimConfig,
    trace: TraceConfig,
) -> Result<OrientResult> {
    let mut problem = OrientationProblem::new(scene, device, region, cfg.lr, trace)?;
    let start = problem.leaves.values();
    if problem.reached() == 0 {
        return Err(Error::Validation(
            "no propagation path reaches the target region".into(),
        ));
    }
    let initial_db = problem.gain_db(&start);
    let (_, g0) = problem.evaluate(&start)?;
    let (mut log, values) = if g0.iter().all(|v| *v == 0.0) {
        log::warn!("region gain does not depend on the orientation; leaving it unchanged");
        (
            TrainLog {
                leaf_names: problem.leaves.names(),
                rows: vec![super::LogRow {
                    iteration: 0,
                    loss: -initial_db,
                    values: start.clone(),
                }],
            },
            start,
        )
    } else {
        descend(&mut problem, cfg)?
    };
    for r in &mut log.rows {
        r.loss = -r.loss;
    }
    let leaves = problem.leaves.clone();
    Ok(OrientResult {
        log,
        initial_db,
        final_db: problem.gain_db(&values),
        orientation: [values[0], values[1], values[2]],
        scene: leaves.apply(scene, &values)?,
    })
}
