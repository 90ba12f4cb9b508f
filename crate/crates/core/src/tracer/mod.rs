//! Specular path search: line of sight plus image-method solving over
//! candidate primitive sequences from exhaustive enumeration or Fibonacci
//! ray launching.

mod candidates;
mod image;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

pub use candidates::{
    coplanar_groups, enumerate_candidates, expand_coplanar, launch_candidates, CandidateSeq, DEFAULT_ENUMERATION_CAP,
};
pub use image::{image_points, image_solve, los_path};

use crate::accel::Bvh;
use crate::error::{Error, Result};
use crate::mathdiff::Vec3;
use crate::scene::Scene;

/// Interaction points of two paths closer than this are the same path.
pub const MERGE_TOLERANCE: f64 = 1e-6;

pub const DEFAULT_NUM_RAYS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PathKind {
    LineOfSight,
    Specular,
}

/// One propagation path between two points.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath {
    pub kind: PathKind,
    /// Source, interaction points, target.
    pub vertices: Vec<Vec3>,
    /// Primitive id per interaction.
    pub primitives: Vec<usize>,
    /// Surface normal at each interaction, facing the incoming ray.
    pub normals: Vec<Vec3>,
    /// Cosine of the angle of incidence at each interaction.
    pub cos_incidence: Vec<f64>,
    /// m
    pub length: f64,
    /// s
    pub delay: f64,
    /// Unit direction leaving the source.
    pub departure: Vec3,
    /// Unit propagation direction arriving at the target.
    pub arrival: Vec3,
}

impl PropagationPath {
    /// Number of reflections.
    pub fn order(&self) -> usize {
        self.primitives.len()
    }

    fn sort_key_cmp(&self, o: &Self) -> Ordering {
        (self.kind, self.order())
            .cmp(&(o.kind, o.order()))
            .then_with(|| self.primitives.cmp(&o.primitives))
    }

    fn coincides(&self, o: &Self) -> bool {
        self.order() == o.order()
            && self.vertices[1..self.vertices.len() - 1]
                .iter()
                .zip(&o.vertices[1..o.vertices.len() - 1])
                .all(|(a, b)| a.distance(b) <= MERGE_TOLERANCE)
    }
}

/// How candidate sequences are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exhaustive,
    Fibonacci { num_rays: usize },
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exhaustive" => Ok(Method::Exhaustive),
            "fibonacci" => Ok(Method::Fibonacci {
                num_rays: DEFAULT_NUM_RAYS,
            }),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected exhaustive or fibonacci)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Exhaustive => f.write_str("exhaustive"),
            Method::Fibonacci { .. } => f.write_str("fibonacci"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    /// Maximum number of reflections; 0 traces line of sight only.
    pub max_depth: usize,
    pub method: Method,
    pub enumeration_cap: u64,
    /// Widen launched candidates to coplanar triangles of the same object.
    pub expand_coplanar: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            max_depth: 3,
            method: Method::Fibonacci {
                num_rays: DEFAULT_NUM_RAYS,
            },
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
            expand_coplanar: true,
        }
    }
}

/// Scene plus acceleration structure, ready to trace.
pub struct Tracer<'s> {
    scene: &'s Scene,
    bvh: Bvh,
    groups: Vec<Vec<usize>>,
    config: TraceConfig,
}

impl<'s> Tracer<'s> {
    pub fn new(scene: &'s Scene, config: TraceConfig) -> Result<Self> {
        if let Method::Fibonacci { num_rays: 0 } = config.method {
            return Err(Error::Config("--num-rays must be at least 1".into()));
        }
        Ok(Self {
            scene,
            bvh: Bvh::build(scene),
            groups: coplanar_groups(scene.primitives()),
            config,
        })
    }

    pub fn scene(&self) -> &'s Scene {
        self.scene
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn config(&self) -> &TraceConfig {
        &self.config
    }

    /// Candidate sequences for a source at `origin`.
    pub fn candidates(&self, origin: Vec3) -> Result<Vec<CandidateSeq>> {
        let depth = self.config.max_depth;
        if depth == 0 {
            return Ok(Vec::new());
        }
        match self.config.method {
            Method::Exhaustive => {
                enumerate_candidates(self.scene.primitives().len(), depth, self.config.enumeration_cap)
            }
            Method::Fibonacci { num_rays } => {
                let launched = launch_candidates(&self.bvh, origin, depth, num_rays)?;
                if self.config.expand_coplanar {
                    Ok(expand_coplanar(&launched, &self.groups))
                } else {
                    Ok(launched)
                }
            }
        }
    }

    /// All valid paths from `source` to `target` over `candidates`, plus
    /// line of sight, deduplicated and in canonical order.
    pub fn trace(&self, source: Vec3, target: Vec3, candidates: &[CandidateSeq]) -> Vec<PropagationPath> {
        let prims = self.scene.primitives();
        let mut found: Vec<PropagationPath> = candidates
            .par_iter()
            .filter_map(|seq| image_solve(prims, &self.bvh, source, target, seq))
            .collect();
        if let Some(p) = los_path(&self.bvh, source, target) {
            found.push(p);
        }
        found.sort_by(|a, b| a.sort_key_cmp(b));
        found.dedup_by(|a, b| a.kind == b.kind && a.primitives == b.primitives);
        let mut kept: Vec<PropagationPath> = Vec::with_capacity(found.len());
        for p in found {
            if !kept.iter().any(|k| k.coincides(&p)) {
                kept.push(p);
            }
        }
        kept
    }

    /// Paths for every (transmitter, receiver) device pair.
    pub fn compute_paths(&self) -> Result<PathSet> {
        let txs: Vec<usize> = self.scene.transmitters().map(|(i, _)| i).collect();
        let rxs: Vec<usize> = self.scene.receivers().map(|(i, _)| i).collect();
        if txs.is_empty() || rxs.is_empty() {
            return Err(Error::Validation(
                "tracing needs at least one transmitter and one receiver".into(),
            ));
        }
        let devices = self.scene.devices();
        let mut per_tx = Vec::with_capacity(txs.len());
        for &t in &txs {
            per_tx.push(self.candidates(devices[t].position)?);
        }
        let paths = rxs
            .iter()
            .map(|&r| {
                txs.iter()
                    .zip(&per_tx)
                    .map(|(&t, cands)| self.trace(devices[t].position, devices[r].position, cands))
                    .collect()
            })
            .collect();
        Ok(PathSet {
            transmitters: txs,
            receivers: rxs,
            max_depth: self.config.max_depth,
            paths,
        })
    }
}

/// Paths for all device pairs of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    /// Device indices of the transmitters, in scene order.
    pub transmitters: Vec<usize>,
    /// Device indices of the receivers, in scene order.
    pub receivers: Vec<usize>,
    pub max_depth: usize,
    /// Indexed `[rx][tx]`.
    pub paths: Vec<Vec<Vec<PropagationPath>>>,
}

impl PathSet {
    pub fn pair(&self, rx: usize, tx: usize) -> &[PropagationPath] {
        &self.paths[rx][tx]
    }

    pub fn total(&self) -> usize {
        self.paths.iter().flatten().map(Vec::len).sum()
    }

    /// Longest path list over all pairs.
    pub fn max_paths_per_pair(&self) -> usize {
        self.paths.iter().flatten().map(Vec::len).max().unwrap_or(0)
    }

    /// Flat records for the path dump.
    pub fn records(&self, scene: &Scene) -> Vec<PathRecord> {
        let mut out = Vec::new();
        for (ri, &r) in self.receivers.iter().enumerate() {
            for (ti, &t) in self.transmitters.iter().enumerate() {
                for p in &self.paths[ri][ti] {
                    out.push(PathRecord {
                        tx: scene.devices()[t].name.clone(),
                        rx: scene.devices()[r].name.clone(),
                        kind: p.kind,
                        order: p.order(),
                        vertices: p.vertices.iter().map(|v| v.to_array()).collect(),
                        primitives: p.primitives.clone(),
                        length_m: p.length,
                        delay_s: p.delay,
                    });
                }
            }
        }
        out
    }
}

/// One entry of the path dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub tx: String,
    pub rx: String,
    #[serde(rename = "type")]
    pub kind: PathKind,
    pub order: usize,
    pub vertices: Vec<[f64; 3]>,
    pub primitives: Vec<usize>,
    pub length_m: f64,
    pub delay_s: f64,
}

/// Convenience wrapper: build a tracer and trace all device pairs.
pub fn compute_paths(scene: &Scene, config: TraceConfig) -> Result<PathSet> {
    Tracer::new(scene, config)?.compute_paths()
}
