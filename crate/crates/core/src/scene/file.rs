//! JSON scene files and the Wavefront-OBJ subset used for external meshes.
//!
//! ```json
//! {
//!   "frequency_hz": 1.0e9,
//!   "synthetic_array": true,
//!   "materials": [
//!     {"name": "concrete", "model": "itu_power_law",
//!      "params": {"a": 5.24, "b": 0.0, "c": 0.0462, "d": 0.7822}},
//!     {"name": "wall", "model": "constant", "trainable": true,
//!      "params": {"relative_permittivity": 3.0, "conductivity_s_per_m": 0.1}}
//!   ],
//!   "objects": [
//!     {"name": "ground", "material": "concrete",
//!      "vertices_m": [-1,-1,0, 1,-1,0, 1,1,0, -1,1,0], "triangles": [0,1,2, 0,2,3]},
//!     {"name": "house", "material": "wall", "mesh_file": "house.obj"}
//!   ],
//!   "tx_array": {"num_rows": 1, "num_cols": 1, "vertical_spacing_wavelengths": 0.5,
//!                "horizontal_spacing_wavelengths": 0.5, "pattern": "iso", "polarization": "V"},
//!   "rx_array": {"num_rows": 1, "num_cols": 1, "vertical_spacing_wavelengths": 0.5,
//!                "horizontal_spacing_wavelengths": 0.5, "pattern": "iso", "polarization": "V"},
//!   "devices": [
//!     {"kind": "transmitter", "name": "tx", "position_m": [0, 0, 10], "look_at": "rx"},
//!     {"kind": "receiver", "name": "rx", "position_m": [20, 0, 10],
//!      "orientation_rad": [0, 0, 0], "velocity_m_per_s": [0, 0, 0]}
//!   ]
//! }
//! ```
//!
//! Mesh paths are resolved relative to the scene file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{look_at, AntennaArray, DeviceKind, MaterialModel, RadioDevice, RadioMaterial, Scene, SceneObject};
use crate::error::{Error, Result};
use crate::mathdiff::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub frequency_hz: f64,
    #[serde(default = "default_true")]
    pub synthetic_array: bool,
    pub materials: Vec<MaterialDescription>,
    #[serde(default)]
    pub objects: Vec<ObjectDescription>,
    pub tx_array: ArrayDescription,
    pub rx_array: ArrayDescription,
    #[serde(default)]
    pub devices: Vec<DeviceDescription>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialDescription {
    pub name: String,
    #[serde(flatten)]
    pub model: ModelDescription,
    #[serde(default)]
    pub trainable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "params")]
pub enum ModelDescription {
    #[serde(rename = "constant")]
    Constant {
        relative_permittivity: f64,
        conductivity_s_per_m: f64,
    },
    #[serde(rename = "itu_power_law")]
    PowerLaw { a: f64, b: f64, c: f64, d: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectDescription {
    pub name: String,
    pub material: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vertices_m: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triangles: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayDescription {
    pub num_rows: usize,
    pub num_cols: usize,
    pub vertical_spacing_wavelengths: f64,
    pub horizontal_spacing_wavelengths: f64,
    pub pattern: String,
    pub polarization: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceDescription {
    pub kind: String,
    pub name: String,
    pub position_m: [f64; 3],
    #[serde(default)]
    pub orientation_rad: [f64; 3],
    #[serde(default)]
    pub velocity_m_per_s: [f64; 3],
    /// Name of another device to point the boresight at; overrides
    /// `orientation_rad`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub look_at: Option<String>,
}

impl ArrayDescription {
    fn build(&self, which: &str) -> Result<AntennaArray> {
        let ctx = |e: Error| match e {
            Error::Config(m) => Error::Config(format!("{which}: {m}")),
            other => other,
        };
        Ok(AntennaArray {
            num_rows: self.num_rows,
            num_cols: self.num_cols,
            vertical_spacing: self.vertical_spacing_wavelengths,
            horizontal_spacing: self.horizontal_spacing_wavelengths,
            pattern: self.pattern.parse().map_err(ctx)?,
            polarization: self.polarization.parse().map_err(ctx)?,
        })
    }

    fn from_array(a: &AntennaArray) -> Self {
        Self {
            num_rows: a.num_rows,
            num_cols: a.num_cols,
            vertical_spacing_wavelengths: a.vertical_spacing,
            horizontal_spacing_wavelengths: a.horizontal_spacing,
            pattern: a.pattern.to_string(),
            polarization: a.polarization.to_string(),
        }
    }
}

impl SceneDescription {
    /// Validates the description; `base_dir` resolves relative mesh paths.
    pub fn build(&self, base_dir: Option<&Path>) -> Result<Scene> {
        let materials: Vec<RadioMaterial> = self
            .materials
            .iter()
            .map(|m| RadioMaterial {
                name: m.name.clone(),
                model: match m.model {
                    ModelDescription::Constant {
                        relative_permittivity,
                        conductivity_s_per_m,
                    } => MaterialModel::Constant {
                        relative_permittivity,
                        conductivity: conductivity_s_per_m,
                    },
                    ModelDescription::PowerLaw { a, b, c, d } => MaterialModel::PowerLaw { a, b, c, d },
                },
                trainable: m.trainable,
            })
            .collect();

        let mut objects = Vec::with_capacity(self.objects.len());
        for o in &self.objects {
            let material = materials.iter().position(|m| m.name == o.material).ok_or_else(|| {
                Error::Validation(format!(
                    "object '{}' references undefined material '{}'",
                    o.name, o.material
                ))
            })?;
            let (vertices, triangles) = match &o.mesh_file {
                Some(file) => {
                    if !o.vertices_m.is_empty() || !o.triangles.is_empty() {
                        return Err(Error::Validation(format!(
                            "object '{}' gives both inline geometry and mesh_file",
                            o.name
                        )));
                    }
                    let path = match base_dir {
                        Some(dir) => dir.join(file),
                        None => PathBuf::from(file),
                    };
                    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    parse_obj(&text, &path)?
                }
                None => {
                    if o.vertices_m.len() % 3 != 0 {
                        return Err(Error::Validation(format!(
                            "object '{}': vertices_m length {} is not a multiple of 3",
                            o.name,
                            o.vertices_m.len()
                        )));
                    }
                    if o.triangles.len() % 3 != 0 {
                        return Err(Error::Validation(format!(
                            "object '{}': triangles length {} is not a multiple of 3",
                            o.name,
                            o.triangles.len()
                        )));
                    }
                    (
                        o.vertices_m.chunks(3).map(|c| Vec3::new(c[0], c[1], c[2])).collect(),
                        o.triangles.chunks(3).map(|c| [c[0], c[1], c[2]]).collect(),
                    )
                }
            };
            objects.push(SceneObject {
                name: o.name.clone(),
                material,
                vertices,
                triangles,
            });
        }

        let mut devices = Vec::with_capacity(self.devices.len());
        for d in &self.devices {
            let kind = match d.kind.as_str() {
                "transmitter" => DeviceKind::Transmitter,
                "receiver" => DeviceKind::Receiver,
                other => {
                    return Err(Error::Validation(format!(
                        "device '{}' has unknown kind '{other}' (expected transmitter or receiver)",
                        d.name
                    )))
                }
            };
            devices.push(RadioDevice {
                kind,
                name: d.name.clone(),
                position: Vec3::from_array(d.position_m),
                orientation: d.orientation_rad,
                velocity: Vec3::from_array(d.velocity_m_per_s),
            });
        }
        for (i, d) in self.devices.iter().enumerate() {
            if let Some(target) = &d.look_at {
                let t = devices.iter().find(|o| &o.name == target).ok_or_else(|| {
                    Error::Validation(format!("device '{}' looks at unknown device '{target}'", d.name))
                })?;
                let tp = t.position;
                devices[i].orientation = look_at(devices[i].position, tp)
                    .map_err(|_| Error::Validation(format!("device '{}' looks at its own position", d.name)))?;
            }
        }

        Scene::new(
            self.frequency_hz,
            materials,
            objects,
            self.tx_array.build("tx_array")?,
            self.rx_array.build("rx_array")?,
            devices,
            self.synthetic_array,
        )
    }

    /// Inverse of [`SceneDescription::build`]; meshes are written inline and
    /// orientations resolved.
    pub fn from_scene(scene: &Scene) -> Self {
        Self {
            frequency_hz: scene.frequency_hz(),
            synthetic_array: scene.synthetic_array(),
            materials: scene
                .materials()
                .iter()
                .map(|m| MaterialDescription {
                    name: m.name.clone(),
                    model: match m.model {
                        MaterialModel::Constant {
                            relative_permittivity,
                            conductivity,
                        } => ModelDescription::Constant {
                            relative_permittivity,
                            conductivity_s_per_m: conductivity,
                        },
                        MaterialModel::PowerLaw { a, b, c, d } => ModelDescription::PowerLaw { a, b, c, d },
                    },
                    trainable: m.trainable,
                })
                .collect(),
            objects: scene
                .objects()
                .iter()
                .map(|o| ObjectDescription {
                    name: o.name.clone(),
                    material: scene.materials()[o.material].name.clone(),
                    vertices_m: o.vertices.iter().flat_map(|v| v.to_array()).collect(),
                    triangles: o.triangles.iter().flatten().copied().collect(),
                    mesh_file: None,
                })
                .collect(),
            tx_array: ArrayDescription::from_array(scene.tx_array()),
            rx_array: ArrayDescription::from_array(scene.rx_array()),
            devices: scene
                .devices()
                .iter()
                .map(|d| DeviceDescription {
                    kind: match d.kind {
                        DeviceKind::Transmitter => "transmitter".into(),
                        DeviceKind::Receiver => "receiver".into(),
                    },
                    name: d.name.clone(),
                    position_m: d.position.to_array(),
                    orientation_rad: d.orientation,
                    velocity_m_per_s: d.velocity.to_array(),
                    look_at: None,
                })
                .collect(),
        }
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let desc = SceneDescription::parse(&text, path)?;
    desc.build(path.parent())
}

pub fn write_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let desc = SceneDescription::from_scene(scene);
    let text = serde_json::to_string_pretty(&desc).map_err(|e| Error::Invariant(e.to_string()))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Parses `v` and `f` records of a Wavefront OBJ file. Polygons are fan
/// triangulated; texture/normal indices (`f 1/2/3`) are ignored, as are all
/// other record types.
pub fn parse_obj(text: &str, path: &Path) -> Result<(Vec<Vec3>, Vec<[u32; 3]>)> {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let err = |line: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut c = [0.0; 3];
                for (k, slot) in c.iter_mut().enumerate() {
                    let tok = tokens
                        .next()
                        .ok_or_else(|| err(line_no, 1, "vertex needs three coordinates".into()))?;
                    *slot = tok
                        .parse()
                        .map_err(|_| err(line_no, k + 2, format!("bad coordinate '{tok}'")))?;
                }
                vertices.push(Vec3::from_array(c));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for (k, tok) in tokens.enumerate() {
                    let head = tok.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| err(line_no, k + 2, format!("bad face index '{tok}'")))?;
                    let resolved = if i > 0 {
                        i - 1
                    } else if i < 0 {
                        vertices.len() as i64 + i
                    } else {
                        return Err(err(line_no, k + 2, "face index 0 is invalid".into()));
                    };
                    if resolved < 0 || resolved >= vertices.len() as i64 {
                        return Err(err(line_no, k + 2, format!("face index {i} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(err(line_no, 1, "face needs at least three vertices".into()));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok((vertices, triangles))
}
