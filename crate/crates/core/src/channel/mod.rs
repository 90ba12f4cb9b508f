//! Channel impulse responses, OFDM frequency responses and coverage maps.

mod coverage;
mod io;

use std::f64::consts::PI;

use serde::Serialize;

pub use coverage::{coverage_map, probe_array, CoverageMap, CoverageOptions, GridSpec, TxWeighting, DEFAULT_CELL_CAP};
pub use io::{read_coverage, render_png, write_coverage, PngOptions};

use crate::accel::Bvh;
use crate::em::{apply_doppler, doppler_shift, fraunhofer_distance, pair_coefficients, ArrayGeometry, RadioParams};
use crate::mathdiff::{Complex, Real};
use crate::scene::Scene;
use crate::tracer::{PathKind, PathSet};

/// Time sampling for Doppler evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerConfig {
    pub sampling_frequency: f64,
    pub num_time_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirOptions {
    pub los: bool,
    pub reflection: bool,
    /// Without Doppler the CIR has a single time step.
    pub doppler: Option<DopplerConfig>,
    /// Subtract each pair's first arrival from its delays.
    pub normalize_delays: bool,
}

impl Default for CirOptions {
    fn default() -> Self {
        Self {
            los: true,
            reflection: true,
            doppler: None,
            normalize_delays: false,
        }
    }
}

/// Channel impulse response for all device pairs.
///
/// `a` is laid out `[rx][rx_ant][tx][tx_ant][path][time]`, `tau` as
/// `[rx][tx][path]`. Pairs with fewer than `max_paths` paths are padded
/// with zero coefficients and a delay of −1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cir {
    pub num_rx: usize,
    pub num_rx_ant: usize,
    pub num_tx: usize,
    pub num_tx_ant: usize,
    pub max_paths: usize,
    pub num_time_steps: usize,
    #[serde(serialize_with = "serialize_complex")]
    pub a: Vec<Complex>,
    pub tau: Vec<f64>,
    /// Valid paths per `[rx][tx]`.
    pub num_paths: Vec<usize>,
}

fn serialize_complex<S: serde::Serializer>(v: &[Complex], s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for c in v {
        seq.serialize_element(&[c.re, c.im])?;
    }
    seq.end()
}

impl Cir {
    pub fn a_index(&self, rx: usize, rx_ant: usize, tx: usize, tx_ant: usize, path: usize, time: usize) -> usize {
        ((((rx * self.num_rx_ant + rx_ant) * self.num_tx + tx) * self.num_tx_ant + tx_ant) * self.max_paths + path)
            * self.num_time_steps
            + time
    }

    pub fn a(&self, rx: usize, rx_ant: usize, tx: usize, tx_ant: usize, path: usize, time: usize) -> Complex {
        self.a[self.a_index(rx, rx_ant, tx, tx_ant, path, time)]
    }

    pub fn tau(&self, rx: usize, tx: usize, path: usize) -> f64 {
        self.tau[(rx * self.num_tx + tx) * self.max_paths + path]
    }

    pub fn paths(&self, rx: usize, tx: usize) -> usize {
        self.num_paths[rx * self.num_tx + tx]
    }
}

/// Computes coefficients for every path in `paths` and packs them.
///
/// Paths are filtered by type, then sorted by delay per pair. Device
/// velocities from the scene drive the Doppler evolution when enabled.
pub fn cir(scene: &Scene, bvh: Option<&Bvh>, paths: &PathSet, opts: &CirOptions) -> Cir {
    let params = RadioParams::<f64>::from_scene(scene);
    let num_tx_ant = scene.tx_array().num_elements();
    let num_rx_ant = scene.rx_array().num_elements();
    let num_rx = paths.receivers.len();
    let num_tx = paths.transmitters.len();
    let steps = opts.doppler.map_or(1, |d| d.num_time_steps.max(1));
    let keep = |k: PathKind| match k {
        PathKind::LineOfSight => opts.los,
        PathKind::Specular => opts.reflection,
    };
    warn_near_field(scene, paths);

    // Per pair: (delay, coefficients per element pair per time step).
    let mut per_pair = Vec::with_capacity(num_rx * num_tx);
    for (ri, &r) in paths.receivers.iter().enumerate() {
        for (ti, &t) in paths.transmitters.iter().enumerate() {
            let kept: Vec<_> = paths.pair(ri, ti).iter().filter(|p| keep(p.kind)).cloned().collect();
            let coeffs = pair_coefficients(scene, bvh, &params, t, r, &kept);
            let devices = scene.devices();
            let mut entries: Vec<(f64, Vec<Vec<Complex>>)> = kept
                .iter()
                .zip(coeffs)
                .map(|(p, c)| {
                    let series = match opts.doppler {
                        Some(d) => {
                            let fd = doppler_shift(p, scene.frequency_hz(), devices[t].velocity, devices[r].velocity);
                            c.iter()
                                .map(|a| apply_doppler(*a, fd, d.sampling_frequency, steps))
                                .collect()
                        }
                        None => c.iter().map(|a| vec![*a]).collect(),
                    };
                    (p.delay, series)
                })
                .collect();
            entries.sort_by(|x, y| x.0.total_cmp(&y.0));
            if opts.normalize_delays {
                if let Some(first) = entries.first().map(|e| e.0) {
                    for e in &mut entries {
                        e.0 -= first;
                    }
                }
            }
            per_pair.push(entries);
        }
    }
    let max_paths = per_pair.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Cir {
        num_rx,
        num_rx_ant,
        num_tx,
        num_tx_ant,
        max_paths,
        num_time_steps: steps,
        a: vec![Complex::zero(); num_rx * num_rx_ant * num_tx * num_tx_ant * max_paths * steps],
        tau: vec![-1.0; num_rx * num_tx * max_paths],
        num_paths: per_pair.iter().map(Vec::len).collect(),
    };
    for r in 0..num_rx {
        for t in 0..num_tx {
            for (p, (tau, series)) in per_pair[r * num_tx + t].iter().enumerate() {
                out.tau[(r * num_tx + t) * max_paths + p] = *tau;
                for ra in 0..num_rx_ant {
                    for ta in 0..num_tx_ant {
                        for (n, a) in series[ra * num_tx_ant + ta].iter().enumerate() {
                            let i = out.a_index(r, ra, t, ta, p, n);
                            out.a[i] = *a;
                        }
                    }
                }
            }
        }
    }
    out
}

fn warn_near_field(scene: &Scene, paths: &PathSet) {
    if !scene.synthetic_array() {
        return;
    }
    let lambda = scene.wavelength();
    let aperture = ArrayGeometry::new(scene.tx_array(), lambda)
        .aperture()
        .max(ArrayGeometry::new(scene.rx_array(), lambda).aperture());
    let limit = fraunhofer_distance(aperture, lambda);
    let shortest = paths
        .paths
        .iter()
        .flatten()
        .flatten()
        .map(|p| p.length)
        .fold(f64::INFINITY, f64::min);
    if shortest < limit {
        log::warn!(
            "shortest path ({shortest:.2} m) is inside the Fraunhofer distance ({limit:.2} m); \
             synthetic array phases may be inaccurate"
        );
    }
}

/// Baseband subcarrier offsets `(k − (N−1)/2)·Δf`, `k = 0..N`.
pub fn subcarrier_frequencies(num_subcarriers: usize, spacing: f64) -> Vec<f64> {
    let c = (num_subcarriers as f64 - 1.0) / 2.0;
    (0..num_subcarriers).map(|k| (k as f64 - c) * spacing).collect()
}

/// `H(f) = Σ_i a_i·exp(−j·2π·f·τ_i)` on each frequency.
pub fn path_frequency_response<T: Real>(
    coefficients: &[Complex<T>],
    delays: &[f64],
    frequencies: &[f64],
) -> Vec<Complex<T>> {
    frequencies
        .iter()
        .map(|&f| {
            coefficients.iter().zip(delays).fold(Complex::zero(), |acc, (a, &tau)| {
                acc + *a * Complex::cst(Complex::from_phase(-2.0 * PI * f * tau))
            })
        })
        .collect()
}

/// Frequency response over all antenna pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqResponse {
    /// `[rx_ant_total][tx_ant_total][subcarrier][time]`, where the totals
    /// run receiver-major over devices and their elements.
    pub h: Vec<Complex>,
    pub frequencies: Vec<f64>,
    pub num_rx_ant_total: usize,
    pub num_tx_ant_total: usize,
    pub num_time_steps: usize,
}

impl FreqResponse {
    pub fn get(&self, rx_ant: usize, tx_ant: usize, subcarrier: usize, time: usize) -> Complex {
        let n = self.frequencies.len();
        self.h[((rx_ant * self.num_tx_ant_total + tx_ant) * n + subcarrier) * self.num_time_steps + time]
    }
}

pub fn frequency_response(cir: &Cir, num_subcarriers: usize, spacing: f64) -> FreqResponse {
    let freqs = subcarrier_frequencies(num_subcarriers, spacing);
    let rx_total = cir.num_rx * cir.num_rx_ant;
    let tx_total = cir.num_tx * cir.num_tx_ant;
    let steps = cir.num_time_steps;
    let mut h = vec![Complex::zero(); rx_total * tx_total * num_subcarriers * steps];
    for r in 0..cir.num_rx {
        for ra in 0..cir.num_rx_ant {
            for t in 0..cir.num_tx {
                for ta in 0..cir.num_tx_ant {
                    let np = cir.paths(r, t);
                    let delays: Vec<f64> = (0..np).map(|p| cir.tau(r, t, p)).collect();
                    for n in 0..steps {
                        let a: Vec<Complex> = (0..np).map(|p| cir.a(r, ra, t, ta, p, n)).collect();
                        let hk = path_frequency_response(&a, &delays, &freqs);
                        let row = r * cir.num_rx_ant + ra;
                        let col = t * cir.num_tx_ant + ta;
                        for (k, v) in hk.into_iter().enumerate() {
                            h[((row * tx_total + col) * num_subcarriers + k) * steps + n] = v;
                        }
                    }
                }
            }
        }
    }
    FreqResponse {
        h,
        frequencies: freqs,
        num_rx_ant_total: rx_total,
        num_tx_ant_total: tx_total,
        num_time_steps: steps,
    }
}
