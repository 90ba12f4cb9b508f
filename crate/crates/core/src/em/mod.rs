//! Path geometry to complex channel coefficients: antenna patterns,
//! Fresnel reflection with polarization tracking, spreading, array
//! phases and Doppler.

mod array;
mod coefficient;
mod fresnel;
mod pattern;

pub use array::{synthetic_phase, ArrayGeometry};
pub use coefficient::{
    apply_doppler, chain_coefficient, doppler_shift, fraunhofer_distance, path_coefficients, CoefficientContext,
    Endpoint,
};
pub use fresnel::fresnel;
pub use pattern::{
    field_vector, pattern_eval, pattern_field, pattern_gain, spherical_angles, DIPOLE_DIRECTIVITY, TR38901_MAX_GAIN_DBI,
};

use crate::accel::Bvh;
use crate::mathdiff::{Complex, Real, Vec3};
use crate::scene::Scene;
use crate::tracer::PropagationPath;

/// Per-material and per-device quantities that coefficients depend on,
/// either plain or carrying tape leaves.
#[derive(Debug, Clone)]
pub struct RadioParams<T> {
    /// Complex relative permittivity per material.
    pub etas: Vec<Complex<T>>,
    /// Per device.
    pub positions: Vec<Vec3<T>>,
    /// Per device, (yaw, pitch, roll).
    pub orientations: Vec<[T; 3]>,
}

impl<T: Real> RadioParams<T> {
    /// Untracked values taken from the scene.
    pub fn from_scene(scene: &Scene) -> Self {
        let f = scene.frequency_hz();
        Self {
            etas: scene
                .materials()
                .iter()
                .map(|m| Complex::cst(m.params(f).eta(f)))
                .collect(),
            positions: scene.devices().iter().map(|d| Vec3::cst(d.position)).collect(),
            orientations: scene.devices().iter().map(|d| d.orientation.map(T::cst)).collect(),
        }
    }
}

/// Coefficients `[path][rx_element * num_tx_elements + tx_element]` for
/// one device pair.
pub fn pair_coefficients<T: Real>(
    scene: &Scene,
    bvh: Option<&Bvh>,
    params: &RadioParams<T>,
    tx_device: usize,
    rx_device: usize,
    paths: &[PropagationPath],
) -> Vec<Vec<Complex<T>>> {
    let ctx = CoefficientContext {
        primitives: scene.primitives(),
        bvh,
        frequency_hz: scene.frequency_hz(),
        synthetic_array: scene.synthetic_array(),
    };
    let tx = Endpoint {
        position: params.positions[tx_device],
        orientation: params.orientations[tx_device],
        array: scene.tx_array(),
    };
    let rx = Endpoint {
        position: params.positions[rx_device],
        orientation: params.orientations[rx_device],
        array: scene.rx_array(),
    };
    paths
        .iter()
        .map(|p| path_coefficients(&ctx, &params.etas, &tx, &rx, p))
        .collect()
}
