//! Small scene builders shared by unit tests.

use crate::mathdiff::Vec3;
use crate::scene::{AntennaArray, DeviceKind, Pattern, Polarization, RadioDevice, RadioMaterial, Scene, SceneObject};

pub fn device(kind: DeviceKind, name: &str, position: Vec3) -> RadioDevice {
    RadioDevice {
        kind,
        name: name.into(),
        position,
        orientation: [0.0; 3],
        velocity: Vec3::default(),
    }
}

pub fn tx(name: &str, position: Vec3) -> RadioDevice {
    device(DeviceKind::Transmitter, name, position)
}

pub fn rx(name: &str, position: Vec3) -> RadioDevice {
    device(DeviceKind::Receiver, name, position)
}

pub fn quad(name: &str, material: usize, corners: [Vec3; 4]) -> SceneObject {
    SceneObject {
        name: name.into(),
        material,
        vertices: corners.to_vec(),
        triangles: vec![[0, 1, 2], [0, 2, 3]],
    }
}

/// Square ground patch in z = 0 with half-width `half`.
pub fn ground(material: usize, half: f64) -> SceneObject {
    quad(
        "ground",
        material,
        [
            Vec3::new(-half, -half, 0.0),
            Vec3::new(half, -half, 0.0),
            Vec3::new(half, half, 0.0),
            Vec3::new(-half, half, 0.0),
        ],
    )
}

pub fn iso() -> AntennaArray {
    AntennaArray::single(Pattern::Iso, Polarization::V)
}

pub fn scene(
    frequency_hz: f64,
    materials: Vec<RadioMaterial>,
    objects: Vec<SceneObject>,
    devices: Vec<RadioDevice>,
    arrays: (AntennaArray, AntennaArray),
    synthetic: bool,
) -> Scene {
    Scene::new(frequency_hz, materials, objects, arrays.0, arrays.1, devices, synthetic).unwrap()
}

/// Tx at height `h_tx`, rx at `h_rx` and horizontal range `d`, over a
/// large ground of the given material.
pub fn two_ray(frequency_hz: f64, ground_material: RadioMaterial, h_tx: f64, h_rx: f64, d: f64) -> Scene {
    scene(
        frequency_hz,
        vec![ground_material],
        vec![ground(0, 10.0 * d.max(100.0))],
        vec![tx("tx", Vec3::new(0.0, 0.0, h_tx)), rx("rx", Vec3::new(d, 0.0, h_rx))],
        (iso(), iso()),
        true,
    )
}
