use crate::accel::{Bvh, RAY_EPSILON};
use crate::mathdiff::{Real, Vec3, SPEED_OF_LIGHT};
use crate::scene::Triangle;

use super::{PathKind, PropagationPath};

/// Reflection points for a fixed plane sequence, by the image method.
///
/// The source is mirrored successively across each plane; the points are
/// then recovered back to front by intersecting the line from the current
/// target to the matching image with its plane. Returns `None` when a
/// line is parallel to its plane or the intersection does not fall
/// strictly between target and image.
///
/// Generic over the scalar so positions can carry gradients; the plane
/// sequence (path topology) is fixed.
pub fn image_points<T: Real>(source: Vec3<T>, target: Vec3<T>, planes: &[(Vec3, f64)]) -> Option<Vec<Vec3<T>>> {
    let n = planes.len();
    let mut images = Vec::with_capacity(n + 1);
    images.push(source);
    for (normal, offset) in planes {
        let last = images[images.len() - 1];
        images.push(last.mirror(&Vec3::cst(*normal), T::cst(*offset)));
    }
    let mut points = vec![Vec3::<T>::zero(); n];
    let mut tgt = target;
    for k in (0..n).rev() {
        let (normal, offset) = planes[k];
        let nrm = Vec3::<T>::cst(normal);
        let dir = images[k + 1] - tgt;
        let denom = nrm.dot(&dir);
        if denom.value().abs() < 1e-12 * dir.norm().value().max(1e-300) {
            return None;
        }
        let s = (T::cst(offset) - nrm.dot(&tgt)) / denom;
        let sv = s.value();
        if !(sv > 0.0 && sv < 1.0) {
            return None;
        }
        let p = tgt + dir.scale(s);
        points[k] = p;
        tgt = p;
    }
    Some(points)
}

/// Solves and validates one specular candidate. Valid paths hit every
/// triangle inside its bounds, approach each surface from the side the
/// next leg leaves on, and have no blocked leg.
pub fn image_solve(
    primitives: &[Triangle],
    bvh: &Bvh,
    source: Vec3,
    target: Vec3,
    sequence: &[usize],
) -> Option<PropagationPath> {
    let planes: Vec<(Vec3, f64)> = sequence
        .iter()
        .map(|&p| (primitives[p].normal, primitives[p].offset))
        .collect();
    let points = image_points(source, target, &planes)?;
    for (k, p) in points.iter().enumerate() {
        if !primitives[sequence[k]].contains(p) {
            return None;
        }
    }
    let mut vertices = Vec::with_capacity(points.len() + 2);
    vertices.push(source);
    vertices.extend(points);
    vertices.push(target);
    for k in 0..sequence.len() {
        let tri = &primitives[sequence[k]];
        let before = tri.plane_distance(&vertices[k]);
        let after = tri.plane_distance(&vertices[k + 2]);
        if !(before * after > 0.0) || before.abs() < 1e-9 || after.abs() < 1e-9 {
            return None;
        }
    }
    for w in vertices.windows(2) {
        if w[0].distance(&w[1]) <= RAY_EPSILON || bvh.occluded(w[0], w[1], RAY_EPSILON) {
            return None;
        }
    }
    Some(assemble(primitives, vertices, sequence.to_vec()))
}

/// Direct path, if the segment is clear.
pub fn los_path(bvh: &Bvh, source: Vec3, target: Vec3) -> Option<PropagationPath> {
    if source.distance(&target) <= RAY_EPSILON || bvh.occluded(source, target, RAY_EPSILON) {
        return None;
    }
    Some(assemble(&[], vec![source, target], Vec::new()))
}

fn assemble(primitives: &[Triangle], vertices: Vec<Vec3>, sequence: Vec<usize>) -> PropagationPath {
    let mut length = 0.0;
    for w in vertices.windows(2) {
        length += w[0].distance(&w[1]);
    }
    let mut normals = Vec::with_capacity(sequence.len());
    let mut cos_incidence = Vec::with_capacity(sequence.len());
    for (k, &p) in sequence.iter().enumerate() {
        let incoming = (vertices[k + 1] - vertices[k]).normalized();
        let mut n = primitives[p].normal;
        if n.dot(&incoming) > 0.0 {
            n = -n;
        }
        cos_incidence.push(-incoming.dot(&n));
        normals.push(n);
    }
    let m = vertices.len();
    PropagationPath {
        kind: if sequence.is_empty() {
            PathKind::LineOfSight
        } else {
            PathKind::Specular
        },
        departure: (vertices[1] - vertices[0]).normalized(),
        arrival: (vertices[m - 1] - vertices[m - 2]).normalized(),
        delay: length / SPEED_OF_LIGHT,
        length,
        normals,
        cos_incidence,
        primitives: sequence,
        vertices,
    }
}
