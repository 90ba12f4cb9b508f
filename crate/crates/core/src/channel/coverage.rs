use rayon::prelude::*;

use crate::accel::RAY_EPSILON;
use crate::em::{path_coefficients, synthetic_phase, ArrayGeometry, CoefficientContext, Endpoint};
use crate::error::{Error, Result};
use crate::mathdiff::{rotation_from_ypr, Complex, Vec3};
use crate::scene::{AntennaArray, Pattern, Polarization, Scene};
use crate::tracer::{TraceConfig, Tracer};

pub const DEFAULT_CELL_CAP: usize = 4_000_000;

/// Horizontal measurement grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Cell edge, m.
    pub cell: f64,
    /// Probe height, m.
    pub height: f64,
    /// Lower-left corner `(x, y)`; `None` centers the grid on the
    /// transmitter.
    pub origin: Option<[f64; 2]>,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            nx: 64,
            ny: 64,
            cell: 2.0,
            height: 1.5,
            origin: None,
        }
    }
}

/// How the transmit array feeds the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TxWeighting {
    /// One element at the array center with the array's pattern and first
    /// polarization.
    CentralElement,
    /// All elements, phased coherently toward a world direction, with
    /// unit total power.
    Beam { direction: Vec3 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageOptions {
    pub grid: GridSpec,
    pub trace: TraceConfig,
    pub weighting: TxWeighting,
    /// Device index of the transmitter; `None` takes the first one.
    pub transmitter: Option<usize>,
    pub cell_cap: usize,
}

impl Default for CoverageOptions {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            trace: TraceConfig::default(),
            weighting: TxWeighting::CentralElement,
            transmitter: None,
            cell_cap: DEFAULT_CELL_CAP,
        }
    }
}

/// Linear path gain per cell, row-major `[iy][ix]`, `iy` growing with y.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageMap {
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub nx: usize,
    pub ny: usize,
    pub height: f64,
    pub frequency_hz: f64,
    pub gain: Vec<f64>,
}

impl CoverageMap {
    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.gain[iy * self.nx + ix]
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Vec3 {
        Vec3::new(
            self.origin[0] + (ix as f64 + 0.5) * self.cell_size,
            self.origin[1] + (iy as f64 + 0.5) * self.cell_size,
            self.height,
        )
    }

    /// Cell containing the horizontal position, if inside the grid.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fx = (x - self.origin[0]) / self.cell_size;
        let fy = (y - self.origin[1]) / self.cell_size;
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.nx && iy < self.ny).then_some((ix, iy))
    }
}

/// Isotropic, vertically polarized single-element probe.
pub fn probe_array() -> AntennaArray {
    AntennaArray::single(Pattern::Iso, Polarization::V)
}

/// Path gain `Σ|a|²` at one probe position.
pub(crate) fn probe_gain(
    tracer: &Tracer<'_>,
    candidates: &[Vec<usize>],
    tx_device: usize,
    weighting: &TxWeighting,
    probe: Vec3,
) -> f64 {
    let scene = tracer.scene();
    let dev = &scene.devices()[tx_device];
    if dev.position.distance(&probe) <= RAY_EPSILON {
        return 0.0;
    }
    let paths = tracer.trace(dev.position, probe, candidates);
    if paths.is_empty() {
        return 0.0;
    }
    let ctx = CoefficientContext {
        primitives: scene.primitives(),
        bvh: Some(tracer.bvh()),
        frequency_hz: scene.frequency_hz(),
        synthetic_array: scene.synthetic_array(),
    };
    let etas: Vec<Complex> = scene
        .materials()
        .iter()
        .map(|m| m.params(scene.frequency_hz()).eta(scene.frequency_hz()))
        .collect();
    let probe_arr = probe_array();
    let rx = Endpoint {
        position: probe,
        orientation: [0.0; 3],
        array: &probe_arr,
    };
    match weighting {
        TxWeighting::CentralElement => {
            let mut single = *scene.tx_array();
            single.num_rows = 1;
            single.num_cols = 1;
            let tx = Endpoint {
                position: dev.position,
                orientation: dev.orientation,
                array: &single,
            };
            paths
                .iter()
                .map(|p| path_coefficients(&ctx, &etas, &tx, &rx, p)[0].norm_sqr())
                .sum()
        }
        TxWeighting::Beam { direction } => {
            let arr = scene.tx_array();
            let tx = Endpoint {
                position: dev.position,
                orientation: dev.orientation,
                array: arr,
            };
            let lambda = scene.wavelength();
            let geom = ArrayGeometry::new(arr, lambda);
            let rot = rotation_from_ypr(dev.orientation[0], dev.orientation[1], dev.orientation[2]);
            let dir = direction.normalized();
            let norm = 1.0 / (geom.len() as f64).sqrt();
            let weights: Vec<Complex> = geom
                .offsets
                .iter()
                .map(|o| synthetic_phase(&dir, &rot.mul_vec(o), lambda).conj().scale(norm))
                .collect();
            paths
                .iter()
                .map(|p| {
                    let a = path_coefficients(&ctx, &etas, &tx, &rx, p);
                    a.iter()
                        .zip(&weights)
                        .fold(Complex::zero(), |acc, (a, w)| acc + *a * *w)
                        .norm_sqr()
                })
                .sum()
        }
    }
}

/// Path gain on a horizontal grid of probe receivers, one trace per cell.
pub fn coverage_map(scene: &Scene, opts: &CoverageOptions) -> Result<CoverageMap> {
    let g = opts.grid;
    if g.nx == 0 || g.ny == 0 {
        return Err(Error::Config("coverage grid must have at least one cell".into()));
    }
    if g.nx.saturating_mul(g.ny) > opts.cell_cap {
        return Err(Error::Config(format!(
            "coverage grid of {}x{} cells exceeds the cap of {}",
            g.nx, g.ny, opts.cell_cap
        )));
    }
    if !(g.cell.is_finite() && g.cell > 0.0) || !g.height.is_finite() {
        return Err(Error::Config("coverage cell size must be positive".into()));
    }
    let tx_device = match opts.transmitter {
        Some(i) => i,
        None => scene
            .transmitters()
            .next()
            .map(|(i, _)| i)
            .ok_or_else(|| Error::Validation("coverage map needs a transmitter".into()))?,
    };
    let tx_pos = scene.devices()[tx_device].position;
    let origin = g.origin.unwrap_or([
        tx_pos.x - g.nx as f64 * g.cell / 2.0,
        tx_pos.y - g.ny as f64 * g.cell / 2.0,
    ]);
    let tracer = Tracer::new(scene, opts.trace)?;
    let candidates = tracer.candidates(tx_pos)?;
    let mut map = CoverageMap {
        origin,
        cell_size: g.cell,
        nx: g.nx,
        ny: g.ny,
        height: g.height,
        frequency_hz: scene.frequency_hz(),
        gain: Vec::new(),
    };
    map.gain = (0..g.nx * g.ny)
        .into_par_iter()
        .map(|i| {
            let probe = map.cell_center(i % g.nx, i / g.nx);
            probe_gain(&tracer, &candidates, tx_device, &opts.weighting, probe)
        })
        .collect();
    Ok(map)
}
