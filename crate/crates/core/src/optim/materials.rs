use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{descend, nmse_terms, OptimConfig, Problem, TrainLog, TrainableSet};
use crate::channel::{path_frequency_response, subcarrier_frequencies};
use crate::em::{path_coefficients, CoefficientContext, Endpoint, RadioParams};
use crate::error::{Error, Result};
use crate::mathdiff::{grad, Complex, Real, Tape, Vec3};
use crate::scene::Scene;
use crate::tracer::{PropagationPath, TraceConfig, Tracer};

/// One probe position and its frequency response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub rx_position_m: [f64; 3],
    /// `[re, im]` per subcarrier.
    pub h: Vec<[f64; 2]>,
}

impl DatasetRecord {
    pub fn response(&self) -> Vec<Complex> {
        self.h.iter().map(|[re, im]| Complex::new(*re, *im)).collect()
    }
}

/// Frequency responses between one transmitter and many probe positions.
///
/// Responses are for the first element of the transmit array and the
/// first element of the receive array (receive array unrotated).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub transmitter: String,
    pub num_subcarriers: usize,
    pub spacing_hz: f64,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let d: Dataset = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        d.validate()?;
        Ok(d)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("dataset serializes");
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        if self.records.is_empty() {
            return Err(Error::EmptyInput("dataset has no records"));
        }
        if self.num_subcarriers == 0 {
            return Err(Error::Validation("dataset needs at least one subcarrier".into()));
        }
        for (i, r) in self.records.iter().enumerate() {
            if r.h.len() != self.num_subcarriers {
                return Err(Error::Validation(format!(
                    "dataset record {i} has {} subcarriers, expected {}",
                    r.h.len(),
                    self.num_subcarriers
                )));
            }
        }
        Ok(())
    }
}

/// Normalized mean squared error `‖pred − truth‖² / ‖truth‖²`.
pub fn nmse_loss(pred: &[Complex], truth: &[Complex]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::Validation(format!(
            "prediction has {} entries, target has {}",
            pred.len(),
            truth.len()
        )));
    }
    if truth.iter().all(|t| t.norm_sqr() == 0.0) {
        return Err(Error::Validation("target response has zero norm".into()));
    }
    Ok(nmse_terms(pred, truth))
}

fn first_transmitter(scene: &Scene) -> Result<usize> {
    scene
        .transmitters()
        .next()
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Validation("scene has no transmitter".into()))
}

/// Frequency response of element pair (0, 0) between a device and a probe.
pub(crate) fn record_response<T: Real>(
    scene: &Scene,
    params: &RadioParams<T>,
    tx_device: usize,
    rx_position: Vec3,
    paths: &[PropagationPath],
    frequencies: &[f64],
) -> Vec<Complex<T>> {
    let ctx = CoefficientContext {
        primitives: scene.primitives(),
        bvh: None,
        frequency_hz: scene.frequency_hz(),
        synthetic_array: scene.synthetic_array(),
    };
    let tx = Endpoint {
        position: params.positions[tx_device],
        orientation: params.orientations[tx_device],
        array: scene.tx_array(),
    };
    let rx = Endpoint {
        position: Vec3::cst(rx_position),
        orientation: [T::zero(); 3],
        array: scene.rx_array(),
    };
    let a: Vec<Complex<T>> = paths
        .iter()
        .map(|p| path_coefficients(&ctx, &params.etas, &tx, &rx, p)[0])
        .collect();
    let tau: Vec<f64> = paths.iter().map(|p| p.delay).collect();
    path_frequency_response(&a, &tau, frequencies)
}

/// Traces the scene's first transmitter to every position and records the
/// frequency response on a centered OFDM grid.
pub fn generate_dataset(
    scene: &Scene,
    positions: &[Vec3],
    num_subcarriers: usize,
    spacing: f64,
    trace: TraceConfig,
) -> Result<Dataset> {
    if positions.is_empty() {
        return Err(Error::EmptyInput("no receiver positions for the dataset"));
    }
    if num_subcarriers == 0 || !(spacing > 0.0) {
        return Err(Error::Config("subcarrier count and spacing must be positive".into()));
    }
    let tx = first_transmitter(scene)?;
    let tracer = Tracer::new(scene, trace)?;
    let source = scene.devices()[tx].position;
    let candidates = tracer.candidates(source)?;
    let freqs = subcarrier_frequencies(num_subcarriers, spacing);
    let params = RadioParams::<f64>::from_scene(scene);
    let records = positions
        .par_iter()
        .map(|p| {
            let paths = tracer.trace(source, *p, &candidates);
            let h = record_response(scene, &params, tx, *p, &paths, &freqs);
            DatasetRecord {
                rx_position_m: p.to_array(),
                h: h.iter().map(|c| [c.re, c.im]).collect(),
            }
        })
        .collect();
    Ok(Dataset {
        transmitter: scene.devices()[tx].name.clone(),
        num_subcarriers,
        spacing_hz: spacing,
        records,
    })
}

/// Mean NMSE over dataset records as a function of material leaves. Path
/// topology is traced once: materials do not move geometry.
pub struct MaterialProblem<'s> {
    scene: &'s Scene,
    leaves: TrainableSet,
    tx: usize,
    freqs: Vec<f64>,
    records: Vec<(Vec3, Vec<Complex>, Vec<PropagationPath>)>,
}

impl<'s> MaterialProblem<'s> {
    pub fn new(scene: &'s Scene, dataset: &Dataset, leaves: TrainableSet, trace: TraceConfig) -> Result<Self> {
        dataset.validate()?;
        let tx = scene.device_index(&dataset.transmitter).ok_or_else(|| {
            Error::Validation(format!(
                "dataset transmitter '{}' is not a device of the scene",
                dataset.transmitter
            ))
        })?;
        let tracer = Tracer::new(scene, trace)?;
        let source = scene.devices()[tx].position;
        let candidates = tracer.candidates(source)?;
        let mut records = Vec::with_capacity(dataset.records.len());
        for (i, r) in dataset.records.iter().enumerate() {
            let truth = r.response();
            if truth.iter().all(|t| t.norm_sqr() == 0.0) {
                return Err(Error::Validation(format!("dataset record {i} has a zero response")));
            }
            let pos = Vec3::from_array(r.rx_position_m);
            let paths = tracer.trace(source, pos, &candidates);
            records.push((pos, truth, paths));
        }
        Ok(Self {
            scene,
            leaves,
            tx,
            freqs: subcarrier_frequencies(dataset.num_subcarriers, dataset.spacing_hz),
            records,
        })
    }

    /// Number of (record, path) pairs whose path reflects off each material.
    pub fn paths_per_material(&self) -> Vec<usize> {
        let mut counts = vec![0; self.scene.materials().len()];
        let prims = self.scene.primitives();
        for (_, _, paths) in &self.records {
            for p in paths {
                let mut seen = vec![false; counts.len()];
                for &q in &p.primitives {
                    seen[prims[q].material] = true;
                }
                for (c, s) in counts.iter_mut().zip(seen) {
                    *c += s as usize;
                }
            }
        }
        counts
    }
}

impl Problem for MaterialProblem<'_> {
    fn leaves(&self) -> &TrainableSet {
        &self.leaves
    }

    fn evaluate(&mut self, values: &[f64]) -> Result<(f64, Vec<f64>)> {
        let names = self.leaves.names();
        let per_record: Vec<Result<(f64, Vec<f64>)>> = self
            .records
            .par_iter()
            .map(|(pos, truth, paths)| {
                let tape = Tape::new();
                let params = self.leaves.taped_params(self.scene, values, &tape);
                let pred = record_response(self.scene, &params, self.tx, *pos, paths, &self.freqs);
                let loss = nmse_terms(&pred, truth);
                let g = grad(&tape, loss)?;
                Ok((loss.value(), names.iter().map(|n| g.get(n).unwrap_or(0.0)).collect()))
            })
            .collect();
        let n = self.records.len() as f64;
        let mut loss = 0.0;
        let mut g = vec![0.0; names.len()];
        for r in per_record {
            let (l, gr) = r?;
            loss += l;
            for (a, b) in g.iter_mut().zip(gr) {
                *a += b;
            }
        }
        Ok((loss / n, g.into_iter().map(|v| v / n).collect()))
    }

    fn objective(&mut self, values: &[f64]) -> Result<f64> {
        let params = self.leaves.plain_params(self.scene, values);
        let losses: Vec<f64> = self
            .records
            .par_iter()
            .map(|(pos, truth, paths)| {
                let pred = record_response(self.scene, &params, self.tx, *pos, paths, &self.freqs);
                nmse_terms(&pred, truth)
            })
            .collect();
        Ok(losses.iter().sum::<f64>() / self.records.len() as f64)
    }
}

#[derive(Debug, Clone)]
pub struct LearnResult {
    pub log: TrainLog,
    /// Leaf names and final values.
    pub leaves: Vec<(String, f64)>,
    /// Input scene with the learned materials written back.
    pub scene: Scene,
    /// Paths touching each material (scene material order).
    pub paths_per_material: Vec<usize>,
}

/// Fits the permittivity and conductivity of every trainable material so
/// that traced responses match the dataset.
pub fn learn_materials(scene: &Scene, dataset: &Dataset, cfg: &OptimConfig, trace: TraceConfig) -> Result<LearnResult> {
    let leaves = TrainableSet::materials(scene, cfg.lr);
    if leaves.is_empty() {
        return Err(Error::Config("no material in the scene is marked trainable".into()));
    }
    let mut problem = MaterialProblem::new(scene, dataset, leaves.clone(), trace)?;
    let paths_per_material = problem.paths_per_material();
    let (log, values) = descend(&mut problem, cfg)?;
    Ok(LearnResult {
        scene: leaves.apply(scene, &values)?,
        leaves: leaves.names().into_iter().zip(values).collect(),
        log,
        paths_per_material,
    })
}
