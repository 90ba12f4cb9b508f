//! Immutable scene model: triangle meshes bound to radio materials, radio
//! devices with their shared antenna arrays, and the carrier frequency.

mod file;
mod material;

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::str::FromStr;

pub use file::{
    load_scene, parse_obj, write_scene, ArrayDescription, DeviceDescription, MaterialDescription, ModelDescription,
    ObjectDescription, SceneDescription,
};
pub use material::{
    material_eval, material_leaf_name, MaterialModel, MaterialParams, MaterialQuantity, MaterialValue, RadioMaterial,
};

use crate::error::{Error, Result};
use crate::mathdiff::{Vec3, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceKind {
    Transmitter,
    Receiver,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadioDevice {
    pub kind: DeviceKind,
    pub name: String,
    pub position: Vec3,
    /// (yaw, pitch, roll) in radians.
    pub orientation: [f64; 3],
    /// World frame, m/s.
    pub velocity: Vec3,
}

/// Element radiation pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    Iso,
    Dipole,
    Tr38901,
}

impl FromStr for Pattern {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iso" => Ok(Pattern::Iso),
            "dipole" => Ok(Pattern::Dipole),
            "tr38901" => Ok(Pattern::Tr38901),
            other => Err(Error::Config(format!(
                "unknown antenna pattern '{other}' (expected iso, dipole or tr38901)"
            ))),
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::Iso => "iso",
            Pattern::Dipole => "dipole",
            Pattern::Tr38901 => "tr38901",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    V,
    H,
    VH,
    Cross,
}

impl Polarization {
    /// Rotation of each colocated element's pattern about boresight, rad.
    pub fn slants(&self) -> &'static [f64] {
        const V: [f64; 1] = [0.0];
        const H: [f64; 1] = [FRAC_PI_2];
        const VH: [f64; 2] = [0.0, FRAC_PI_2];
        const CROSS: [f64; 2] = [std::f64::consts::FRAC_PI_4, -std::f64::consts::FRAC_PI_4];
        match self {
            Polarization::V => &V,
            Polarization::H => &H,
            Polarization::VH => &VH,
            Polarization::Cross => &CROSS,
        }
    }
}

impl FromStr for Polarization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V" => Ok(Polarization::V),
            "H" => Ok(Polarization::H),
            "VH" => Ok(Polarization::VH),
            "cross" => Ok(Polarization::Cross),
            other => Err(Error::Config(format!(
                "unknown polarization '{other}' (expected V, H, VH or cross)"
            ))),
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarization::V => "V",
            Polarization::H => "H",
            Polarization::VH => "VH",
            Polarization::Cross => "cross",
        })
    }
}

/// Planar array shared by all transmitters (or all receivers).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AntennaArray {
    pub num_rows: usize,
    pub num_cols: usize,
    /// In wavelengths.
    pub vertical_spacing: f64,
    /// In wavelengths.
    pub horizontal_spacing: f64,
    pub pattern: Pattern,
    pub polarization: Polarization,
}

impl AntennaArray {
    pub fn single(pattern: Pattern, polarization: Polarization) -> Self {
        Self {
            num_rows: 1,
            num_cols: 1,
            vertical_spacing: 0.5,
            horizontal_spacing: 0.5,
            pattern,
            polarization,
        }
    }

    pub fn num_elements(&self) -> usize {
        self.num_rows * self.num_cols * self.polarization.slants().len()
    }

    fn validate(&self, which: &str) -> Result<()> {
        if self.num_rows == 0 || self.num_cols == 0 {
            return Err(Error::Validation(format!(
                "{which}: array needs at least one row and column"
            )));
        }
        let ok = |s: f64| s.is_finite() && s > 0.0;
        if !ok(self.vertical_spacing) || !ok(self.horizontal_spacing) {
            return Err(Error::Validation(format!("{which}: element spacings must be positive")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub name: String,
    pub material: usize,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

/// One scene triangle with its plane, as seen by the tracer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triangle {
    pub vertices: [Vec3; 3],
    /// Unit normal from the winding order (triangles are two-sided).
    pub normal: Vec3,
    /// Plane offset: `normal · p = offset` for points `p` on the plane.
    pub offset: f64,
    pub object: usize,
    /// Index within the owning object's triangle list.
    pub local_index: usize,
    pub material: usize,
}

const MIN_TRIANGLE_AREA: f64 = 1e-12;

impl Triangle {
    fn new(vertices: [Vec3; 3], object: usize, local_index: usize, material: usize) -> Option<Self> {
        let n = (vertices[1] - vertices[0]).cross(&(vertices[2] - vertices[0]));
        let twice_area = n.norm();
        if !(twice_area > 2.0 * MIN_TRIANGLE_AREA) {
            return None;
        }
        let normal = n.scale(1.0 / twice_area);
        Some(Self {
            vertices,
            normal,
            offset: normal.dot(&vertices[0]),
            object,
            local_index,
            material,
        })
    }

    pub fn centroid(&self) -> Vec3 {
        (self.vertices[0] + self.vertices[1] + self.vertices[2]).scale(1.0 / 3.0)
    }

    /// Barycentric containment for a point already on the plane. Edges are
    /// inclusive up to a small relative tolerance.
    pub fn contains(&self, p: &Vec3) -> bool {
        let [a, b, c] = self.vertices;
        let n = self.normal;
        let area = (b - a).cross(&(c - a)).dot(&n);
        let w0 = (c - b).cross(&(*p - b)).dot(&n) / area;
        let w1 = (a - c).cross(&(*p - c)).dot(&n) / area;
        let w2 = 1.0 - w0 - w1;
        const TOL: f64 = -1e-9;
        w0 >= TOL && w1 >= TOL && w2 >= TOL
    }

    pub fn plane_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    frequency_hz: f64,
    materials: Vec<RadioMaterial>,
    objects: Vec<SceneObject>,
    primitives: Vec<Triangle>,
    tx_array: AntennaArray,
    rx_array: AntennaArray,
    devices: Vec<RadioDevice>,
    synthetic_array: bool,
}

impl Scene {
    /// Validates and assembles a scene.
    pub fn new(
        frequency_hz: f64,
        materials: Vec<RadioMaterial>,
        objects: Vec<SceneObject>,
        tx_array: AntennaArray,
        rx_array: AntennaArray,
        devices: Vec<RadioDevice>,
        synthetic_array: bool,
    ) -> Result<Self> {
        if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
            return Err(Error::Validation(format!(
                "frequency_hz must be positive, got {frequency_hz}"
            )));
        }
        for (i, m) in materials.iter().enumerate() {
            if materials[..i].iter().any(|o| o.name == m.name) {
                return Err(Error::Validation(format!("material '{}' defined twice", m.name)));
            }
            let p = m.params(frequency_hz);
            if !(p.permittivity.is_finite() && p.permittivity >= 1.0) {
                return Err(Error::Validation(format!(
                    "material '{}': relative permittivity {} is below 1",
                    m.name, p.permittivity
                )));
            }
            if !(p.conductivity.is_finite() && p.conductivity >= 0.0) {
                return Err(Error::Validation(format!(
                    "material '{}': conductivity {} is negative",
                    m.name, p.conductivity
                )));
            }
        }
        tx_array.validate("tx_array")?;
        rx_array.validate("rx_array")?;

        let mut primitives = Vec::new();
        for (oi, obj) in objects.iter().enumerate() {
            if obj.material >= materials.len() {
                return Err(Error::Validation(format!(
                    "object '{}' references material index {} out of range",
                    obj.name, obj.material
                )));
            }
            if let Some(v) = obj.vertices.iter().find(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "object '{}' has a non-finite vertex {v:?}",
                    obj.name
                )));
            }
            for (ti, tri) in obj.triangles.iter().enumerate() {
                let mut v = [Vec3::default(); 3];
                for k in 0..3 {
                    let idx = tri[k] as usize;
                    v[k] = *obj.vertices.get(idx).ok_or_else(|| {
                        Error::Validation(format!(
                            "object '{}' triangle {ti} uses vertex index {idx}, but only {} vertices exist",
                            obj.name,
                            obj.vertices.len()
                        ))
                    })?;
                }
                let t = Triangle::new(v, oi, ti, obj.material).ok_or_else(|| {
                    Error::Validation(format!("object '{}' triangle {ti} is degenerate (zero area)", obj.name))
                })?;
                primitives.push(t);
            }
        }

        for (i, d) in devices.iter().enumerate() {
            if devices[..i].iter().any(|o| o.name == d.name) {
                return Err(Error::Validation(format!("device name '{}' is not unique", d.name)));
            }
            if !d.position.is_finite() || !d.velocity.is_finite() || d.orientation.iter().any(|a| !a.is_finite()) {
                return Err(Error::Validation(format!("device '{}' has non-finite pose", d.name)));
            }
        }

        Ok(Self {
            frequency_hz,
            materials,
            objects,
            primitives,
            tx_array,
            rx_array,
            devices,
            synthetic_array,
        })
    }

    pub fn frequency_hz(&self) -> f64 {
        self.frequency_hz
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }

    pub fn materials(&self) -> &[RadioMaterial] {
        &self.materials
    }

    pub fn material_index(&self, name: &str) -> Option<usize> {
        self.materials.iter().position(|m| m.name == name)
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    /// All triangles, numbered by object order then triangle order. The
    /// index into this slice is the primitive id.
    pub fn primitives(&self) -> &[Triangle] {
        &self.primitives
    }

    pub fn tx_array(&self) -> &AntennaArray {
        &self.tx_array
    }

    pub fn rx_array(&self) -> &AntennaArray {
        &self.rx_array
    }

    pub fn devices(&self) -> &[RadioDevice] {
        &self.devices
    }

    pub fn device(&self, name: &str) -> Option<&RadioDevice> {
        self.devices.iter().find(|d| d.name == name)
    }

    pub fn device_index(&self, name: &str) -> Option<usize> {
        self.devices.iter().position(|d| d.name == name)
    }

    pub fn transmitters(&self) -> impl Iterator<Item = (usize, &RadioDevice)> {
        self.devices
            .iter()
            .enumerate()
            .filter(|(_, d)| d.kind == DeviceKind::Transmitter)
    }

    pub fn receivers(&self) -> impl Iterator<Item = (usize, &RadioDevice)> {
        self.devices
            .iter()
            .enumerate()
            .filter(|(_, d)| d.kind == DeviceKind::Receiver)
    }

    pub fn synthetic_array(&self) -> bool {
        self.synthetic_array
    }

    /// Copy with a different material table (same names and order).
    pub fn with_materials(&self, materials: Vec<RadioMaterial>) -> Result<Self> {
        Scene::new(
            self.frequency_hz,
            materials,
            self.objects.clone(),
            self.tx_array,
            self.rx_array,
            self.devices.clone(),
            self.synthetic_array,
        )
    }

    /// Copy with a different device list.
    pub fn with_devices(&self, devices: Vec<RadioDevice>) -> Result<Self> {
        Scene::new(
            self.frequency_hz,
            self.materials.clone(),
            self.objects.clone(),
            self.tx_array,
            self.rx_array,
            devices,
            self.synthetic_array,
        )
    }

    /// Copy with different antenna arrays and array mode.
    pub fn with_arrays(&self, tx_array: AntennaArray, rx_array: AntennaArray, synthetic_array: bool) -> Result<Self> {
        Scene::new(
            self.frequency_hz,
            self.materials.clone(),
            self.objects.clone(),
            tx_array,
            rx_array,
            self.devices.clone(),
            synthetic_array,
        )
    }
}

/// Orientation that points the device boresight (body +x) at `target`,
/// with zero roll.
pub fn look_at(position: Vec3, target: Vec3) -> Result<[f64; 3]> {
    let d = target - position;
    let n = d.norm();
    if !(n > 0.0) {
        return Err(Error::Validation(
            "look_at target coincides with the device position".into(),
        ));
    }
    let yaw = d.y.atan2(d.x);
    let pitch = (-d.z).atan2(d.x.hypot(d.y));
    Ok([yaw, pitch, 0.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathdiff::rotation_from_ypr;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn look_at_along_x_is_identity() {
        assert_eq!(look_at(Vec3::default(), Vec3::X).unwrap(), [0.0, 0.0, 0.0]);
    }

    #[test]
    fn look_at_y_is_quarter_yaw() {
        let o = look_at(Vec3::default(), Vec3::Y).unwrap();
        assert!((o[0] - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(o[1], 0.0);
    }

    #[test]
    fn look_at_zenith_pitches_up() {
        let o = look_at(Vec3::default(), Vec3::Z).unwrap();
        assert!((o[1] + FRAC_PI_2).abs() < 1e-15);
        let r = rotation_from_ypr(o[0], o[1], o[2]);
        let b = r.mul_vec(&Vec3::X);
        assert!((b - Vec3::Z).norm() < 1e-12);
    }

    #[test]
    fn look_at_arbitrary_target() {
        let p = Vec3::new(8.5, 21.0, 27.0);
        let t = Vec3::new(45.0, 90.0, 1.5);
        let o = look_at(p, t).unwrap();
        let b = rotation_from_ypr(o[0], o[1], o[2]).mul_vec(&Vec3::X);
        assert!(b.angle_to(&(t - p)) < 1e-12);
        assert_eq!(o[2], 0.0);
    }

    #[test]
    fn look_at_coincident_fails() {
        assert!(look_at(Vec3::X, Vec3::X).is_err());
    }

    #[test]
    fn element_counts() {
        let mut a = AntennaArray::single(Pattern::Tr38901, Polarization::VH);
        a.num_rows = 8;
        a.num_cols = 2;
        assert_eq!(a.num_elements(), 32);
        a.polarization = Polarization::V;
        assert_eq!(a.num_elements(), 16);
    }

    #[test]
    fn unknown_pattern_is_config_error() {
        assert!(matches!("horn".parse::<Pattern>(), Err(Error::Config(_))));
    }

    #[test]
    fn triangle_containment_edges() {
        let t = Triangle::new([Vec3::default(), Vec3::X, Vec3::Y], 0, 0, 0).unwrap();
        assert!(t.contains(&Vec3::new(0.25, 0.25, 0.0)));
        assert!(t.contains(&Vec3::new(0.5, 0.5, 0.0)));
        assert!(!t.contains(&Vec3::new(0.6, 0.6, 0.0)));
        assert!(!t.contains(&Vec3::new(-0.1, 0.2, 0.0)));
    }
}
