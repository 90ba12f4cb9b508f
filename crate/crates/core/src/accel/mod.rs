//! Bounding volume hierarchy over scene triangles.

use crate::mathdiff::Vec3;
use crate::scene::{Scene, Triangle};

/// Self-intersection epsilon for secondary rays and occlusion tests, m.
pub const RAY_EPSILON: f64 = 1e-4;

const MAX_LEAF_SIZE: usize = 4;
const BARY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY),
            max: Vec3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: self.min.min(&o.min),
            max: self.max.max(&o.max),
        }
    }

    pub fn of_triangle(t: &Triangle) -> Aabb {
        let mut b = Aabb::empty();
        for v in &t.vertices {
            b.grow(v);
        }
        b
    }

    pub fn contains(&self, o: &Aabb) -> bool {
        (0..3).all(|i| self.min.axis(i) <= o.min.axis(i) && o.max.axis(i) <= self.max.axis(i))
    }

    fn longest_axis(&self) -> usize {
        let e = self.max - self.min;
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    /// Entry distance of the ray into the box, if it overlaps `[t_min, t_max]`.
    fn hit(&self, origin: &Vec3, inv_dir: &Vec3, t_min: f64, t_max: f64) -> Option<f64> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for i in 0..3 {
            let inv = inv_dir.axis(i);
            let o = origin.axis(i);
            let a = (self.min.axis(i) - o) * inv;
            let b = (self.max.axis(i) - o) * inv;
            // f64::min/max drop NaN operands (origin on a slab with zero direction).
            t0 = t0.max(a.min(b));
            t1 = t1.min(a.max(b));
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

/// Nearest intersection along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub primitive: usize,
    /// Geometric normal flipped to face the incoming ray.
    pub normal: Vec3,
    pub point: Vec3,
}

/// Möller–Trumbore ray/triangle test; returns the ray parameter.
pub fn intersect_triangle(tri: &Triangle, origin: &Vec3, dir: &Vec3) -> Option<f64> {
    let [v0, v1, v2] = tri.vertices;
    let e1 = v1 - v0;
    let e2 = v2 - v0;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() <= 1e-14 * e1.norm() * e2.norm() {
        return None;
    }
    let inv = 1.0 / det;
    let s = *origin - v0;
    let u = s.dot(&p) * inv;
    if !(-BARY_TOL..=1.0 + BARY_TOL).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -BARY_TOL || u + v > 1.0 + BARY_TOL {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive slot. Interior: index of the left child; the
    /// right child follows it.
    first: u32,
    /// Primitive count for leaves, 0 for interior nodes.
    count: u32,
}

/// Median-split BVH. Deterministic for a fixed scene.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    triangles: Vec<Triangle>,
    /// Slot → primitive id.
    ids: Vec<usize>,
}

struct BuildItem {
    id: usize,
    centroid: Vec3,
    bounds: Aabb,
}

impl Bvh {
    pub fn build(scene: &Scene) -> Bvh {
        Self::from_triangles(scene.primitives())
    }

    /// Builds over `triangles`, using their slice index as primitive id.
    pub fn from_triangles(triangles: &[Triangle]) -> Bvh {
        let mut items: Vec<BuildItem> = triangles
            .iter()
            .enumerate()
            .map(|(id, t)| BuildItem {
                id,
                centroid: t.centroid(),
                bounds: Aabb::of_triangle(t),
            })
            .collect();
        let mut nodes = Vec::new();
        if !items.is_empty() {
            nodes.push(Node {
                bounds: Aabb::empty(),
                first: 0,
                count: 0,
            });
            Self::build_node(&mut nodes, 0, &mut items, 0);
        }
        let ids: Vec<usize> = items.iter().map(|i| i.id).collect();
        Bvh {
            nodes,
            triangles: ids.iter().map(|&i| triangles[i]).collect(),
            ids,
        }
    }

    fn build_node(nodes: &mut Vec<Node>, at: usize, items: &mut [BuildItem], offset: usize) {
        let bounds = items.iter().fold(Aabb::empty(), |b, i| b.union(&i.bounds));
        if items.len() <= MAX_LEAF_SIZE {
            nodes[at] = Node {
                bounds,
                first: offset as u32,
                count: items.len() as u32,
            };
            return;
        }
        let mut centroids = Aabb::empty();
        for i in items.iter() {
            centroids.grow(&i.centroid);
        }
        let axis = centroids.longest_axis();
        items.sort_by(|a, b| {
            a.centroid
                .axis(axis)
                .total_cmp(&b.centroid.axis(axis))
                .then(a.id.cmp(&b.id))
        });
        let mid = items.len() / 2;
        let left = nodes.len();
        nodes.push(Node {
            bounds: Aabb::empty(),
            first: 0,
            count: 0,
        });
        nodes.push(Node {
            bounds: Aabb::empty(),
            first: 0,
            count: 0,
        });
        nodes[at] = Node {
            bounds,
            first: left as u32,
            count: 0,
        };
        let (lo, hi) = items.split_at_mut(mid);
        Self::build_node(nodes, left, lo, offset);
        Self::build_node(nodes, left + 1, hi, offset + mid);
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    /// Nearest hit with `t` strictly inside `(t_min, t_max)`. Ties in `t`
    /// resolve to the lower primitive id.
    pub fn intersect(&self, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Option<Hit> {
        let (slot, t) = self.traverse(&origin, &dir, t_min, t_max, false)?;
        let tri = &self.triangles[slot];
        let normal = if tri.normal.dot(&dir) > 0.0 {
            -tri.normal
        } else {
            tri.normal
        };
        Some(Hit {
            t,
            primitive: self.ids[slot],
            normal,
            point: origin + dir.scale(t),
        })
    }

    /// True iff the open segment from `p` to `q`, shortened by `eps` at both
    /// ends, hits any triangle.
    pub fn occluded(&self, p: Vec3, q: Vec3, eps: f64) -> bool {
        let d = q - p;
        let len = d.norm();
        if !(len > 2.0 * eps) {
            return false;
        }
        let dir = d.scale(1.0 / len);
        self.traverse(&p, &dir, eps, len - eps, true).is_some()
    }

    fn traverse(&self, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64, any: bool) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(usize, f64)> = None;
        let mut limit = t_max;
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.hit(origin, &inv, t_min, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.first as usize;
                for slot in start..start + node.count as usize {
                    let Some(t) = intersect_triangle(&self.triangles[slot], origin, dir) else {
                        continue;
                    };
                    if !(t > t_min && t < t_max) {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some((bs, bt)) => t < bt || (t == bt && self.ids[slot] < self.ids[bs]),
                    };
                    if better {
                        if any {
                            return Some((slot, t));
                        }
                        best = Some((slot, t));
                        limit = t;
                    }
                }
            } else {
                let left = node.first as usize;
                let right = left + 1;
                let tl = self.nodes[left].bounds.hit(origin, &inv, t_min, limit);
                let tr = self.nodes[right].bounds.hit(origin, &inv, t_min, limit);
                match (tl, tr) {
                    (Some(a), Some(b)) => {
                        // Near child popped first.
                        if a <= b {
                            stack.push(right);
                            stack.push(left);
                        } else {
                            stack.push(left);
                            stack.push(right);
                        }
                    }
                    (Some(_), None) => stack.push(left),
                    (None, Some(_)) => stack.push(right),
                    (None, None) => {}
                }
            }
        }
        best
    }

    /// Checks the structural invariants: every slot appears once and every
    /// node's bounds contain its children (or primitives).
    pub fn check_invariants(&self) -> bool {
        let mut seen = vec![false; self.ids.len()];
        for &id in &self.ids {
            if id >= seen.len() || seen[id] {
                return false;
            }
            seen[id] = true;
        }
        self.nodes.iter().all(|n| {
            if n.count > 0 {
                let s = n.first as usize;
                self.triangles[s..s + n.count as usize]
                    .iter()
                    .all(|t| n.bounds.contains(&Aabb::of_triangle(t)))
            } else {
                let l = n.first as usize;
                n.bounds.contains(&self.nodes[l].bounds) && n.bounds.contains(&self.nodes[l + 1].bounds)
            }
        })
    }
}
