use std::collections::{BTreeSet, HashMap};

use crate::accel::{Bvh, RAY_EPSILON};
use crate::error::{Error, Result};
use crate::mathdiff::{fibonacci_directions, Vec3};
use crate::scene::Triangle;

/// Ordered list of primitive ids a path reflects off.
pub type CandidateSeq = Vec<usize>;

/// Default cap on `primitives^max_depth` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CAP: u64 = 10_000_000;

/// All primitive sequences of length `1..=max_depth` without immediate
/// self-repeats, ordered by length and then lexicographically.
///
/// Refuses when `num_primitives^max_depth` exceeds `cap`.
pub fn enumerate_candidates(num_primitives: usize, max_depth: usize, cap: u64) -> Result<Vec<CandidateSeq>> {
    let mut size: u64 = 1;
    for _ in 0..max_depth {
        size = size.saturating_mul(num_primitives as u64);
    }
    if size > cap {
        return Err(Error::EnumerationCap {
            primitives: num_primitives,
            max_depth,
            cap,
        });
    }
    let mut out: Vec<CandidateSeq> = Vec::new();
    let mut frontier: Vec<CandidateSeq> = vec![Vec::new()];
    for _ in 0..max_depth {
        let mut next = Vec::new();
        for prefix in &frontier {
            for p in 0..num_primitives {
                if prefix.last() == Some(&p) {
                    continue;
                }
                let mut s = prefix.clone();
                s.push(p);
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    Ok(out)
}

/// Shoots `num_rays` Fibonacci-lattice rays from `origin` and follows
/// specular bounces for up to `max_depth` hits. Every prefix of every
/// bounce sequence becomes a candidate; duplicates are merged.
pub fn launch_candidates(bvh: &Bvh, origin: Vec3, max_depth: usize, num_rays: usize) -> Result<Vec<CandidateSeq>> {
    let mut set: BTreeSet<(usize, CandidateSeq)> = BTreeSet::new();
    if bvh.is_empty() || max_depth == 0 {
        fibonacci_directions(num_rays)?;
        return Ok(Vec::new());
    }
    for dir in fibonacci_directions(num_rays)? {
        let mut o = origin;
        let mut d = dir;
        let mut seq = Vec::with_capacity(max_depth);
        let mut t_min = 0.0;
        for _ in 0..max_depth {
            let Some(hit) = bvh.intersect(o, d, t_min, f64::INFINITY) else {
                break;
            };
            seq.push(hit.primitive);
            set.insert((seq.len(), seq.clone()));
            d = d.reflect(&hit.normal);
            o = hit.point;
            t_min = RAY_EPSILON;
        }
    }
    Ok(set.into_iter().map(|(_, s)| s).collect())
}

/// Groups of primitives that lie in the same plane within the same object.
/// Indexed by primitive id; each entry lists the group sorted ascending.
pub fn coplanar_groups(primitives: &[Triangle]) -> Vec<Vec<usize>> {
    let mut groups: HashMap<(usize, [i64; 4]), Vec<usize>> = HashMap::new();
    for (i, t) in primitives.iter().enumerate() {
        let mut n = t.normal;
        let mut d = t.offset;
        let first = if n.x.abs() > 1e-9 {
            n.x
        } else if n.y.abs() > 1e-9 {
            n.y
        } else {
            n.z
        };
        if first < 0.0 {
            n = -n;
            d = -d;
        }
        let key = [
            (n.x * 1e6).round() as i64,
            (n.y * 1e6).round() as i64,
            (n.z * 1e6).round() as i64,
            (d * 1e4).round() as i64,
        ];
        groups.entry((t.object, key)).or_default().push(i);
    }
    let mut out = vec![Vec::new(); primitives.len()];
    for members in groups.into_values() {
        for &m in &members {
            out[m] = members.clone();
        }
    }
    out
}

/// Replaces each element of each candidate by every member of its coplanar
/// group. The image construction depends only on the plane, so this lets a
/// ray that landed on a neighbouring triangle of the same surface still
/// produce the right candidate.
pub fn expand_coplanar(candidates: &[CandidateSeq], groups: &[Vec<usize>]) -> Vec<CandidateSeq> {
    let mut set: BTreeSet<(usize, CandidateSeq)> = BTreeSet::new();
    for seq in candidates {
        let mut partial: Vec<CandidateSeq> = vec![Vec::new()];
        for &p in seq {
            let mut next = Vec::new();
            for prefix in &partial {
                for &q in &groups[p] {
                    if prefix.last() == Some(&q) {
                        continue;
                    }
                    let mut s = prefix.clone();
                    s.push(q);
                    next.push(s);
                }
            }
            partial = next;
        }
        for s in partial {
            set.insert((s.len(), s));
        }
    }
    set.into_iter().map(|(_, s)| s).collect()
}
