use std::f64::consts::PI;

use crate::accel::Bvh;
use crate::mathdiff::{rotation_from_ypr, CVec3, Complex, Mat3, Real, Vec3, SPEED_OF_LIGHT};
use crate::scene::{AntennaArray, Pattern, Triangle};
use crate::tracer::{image_points, image_solve, los_path, PropagationPath};

use super::array::{synthetic_phase, ArrayGeometry};
use super::fresnel::fresnel;
use super::pattern::field_vector;

/// A path end: where the array sits, how it is turned, and what it is.
#[derive(Debug, Clone, Copy)]
pub struct Endpoint<'a, T> {
    pub position: Vec3<T>,
    /// (yaw, pitch, roll), rad.
    pub orientation: [T; 3],
    pub array: &'a AntennaArray,
}

impl<T: Real> Endpoint<'_, T> {
    fn rotation(&self, slant: f64) -> Mat3<T> {
        let [y, p, r] = self.orientation;
        rotation_from_ypr(y, p, r + slant)
    }
}

/// What coefficient evaluation needs from the scene.
#[derive(Clone, Copy)]
pub struct CoefficientContext<'a> {
    pub primitives: &'a [Triangle],
    /// Needed in explicit-array mode to validate per-element paths.
    pub bvh: Option<&'a Bvh>,
    pub frequency_hz: f64,
    pub synthetic_array: bool,
}

impl CoefficientContext<'_> {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.frequency_hz
    }
}

/// Transfer coefficient of a single element pair along fixed vertices.
///
/// The transmit field vector is carried in world coordinates; at every
/// reflection its components along `e_s = k_i × n / |k_i × n|` and
/// `e_p = e_s × k_i` are scaled by `r_TE` and `r_TM` and re-expressed in
/// the outgoing basis `(e_s, k_r × e_s)`. The receive pattern is
/// evaluated toward the source and projected onto the arriving field.
/// Spreading is `λ / (4π·length)` and the phase `exp(−j·2π·length/λ)`.
#[allow(clippy::too_many_arguments)]
pub fn chain_coefficient<T: Real>(
    vertices: &[Vec3<T>],
    sequence: &[usize],
    primitives: &[Triangle],
    etas: &[Complex<T>],
    tx_rotation: &Mat3<T>,
    tx_pattern: Pattern,
    rx_rotation: &Mat3<T>,
    rx_pattern: Pattern,
    wavelength: f64,
) -> Complex<T> {
    let m = vertices.len();
    let mut length = T::zero();
    let mut dirs = Vec::with_capacity(m - 1);
    for w in vertices.windows(2) {
        let d = w[1] - w[0];
        let l = d.norm();
        length = length + l;
        dirs.push(d.scale(T::one() / l));
    }
    let mut e = CVec3::from_real(&field_vector(tx_pattern, tx_rotation, &dirs[0]));
    for (k, &prim) in sequence.iter().enumerate() {
        let tri = &primitives[prim];
        let ki = dirs[k];
        let kr = dirs[k + 1];
        let n = Vec3::<T>::cst(tri.normal);
        let cos_i = ki.dot(&n).abs();
        let (r_te, r_tm) = fresnel(etas[tri.material], cos_i);
        let cross = ki.cross(&n);
        let es = if cross.norm_squared().value() < 1e-24 {
            // Normal incidence: any transverse direction works.
            any_perpendicular(&ki)
        } else {
            cross.normalized()
        };
        let ep_in = es.cross(&ki);
        let ep_out = kr.cross(&es);
        let s = e.dot_real(&es) * r_te;
        let p = e.dot_real(&ep_in) * r_tm;
        e = CVec3::from_scaled(s, &es) + CVec3::from_scaled(p, &ep_out);
    }
    let f_rx = field_vector(rx_pattern, rx_rotation, &(-dirs[m - 2]));
    let gain = e.dot_real(&f_rx);
    let k = 2.0 * PI / wavelength;
    let spread = T::one() / length * (wavelength / (4.0 * PI));
    gain * Complex::from_phase(-(length * k)).scale(spread)
}

fn any_perpendicular<T: Real>(k: &Vec3<T>) -> Vec3<T> {
    let v = k.value();
    let helper = if v.x.abs() < 0.9 { Vec3::X } else { Vec3::Y };
    k.cross(&Vec3::cst(helper)).normalized()
}

fn planes(path: &PropagationPath, primitives: &[Triangle]) -> Vec<(Vec3, f64)> {
    path.primitives
        .iter()
        .map(|&p| (primitives[p].normal, primitives[p].offset))
        .collect()
}

/// Coefficients of every element pair for one path, laid out as
/// `rx_element * num_tx_elements + tx_element`.
///
/// Synthetic mode traces once between array centers and applies
/// plane-wave phases per element. Explicit mode re-solves the path's
/// reflection sequence between each pair of element positions; a pair
/// whose path is no longer valid contributes zero.
pub fn path_coefficients<T: Real>(
    ctx: &CoefficientContext<'_>,
    etas: &[Complex<T>],
    tx: &Endpoint<'_, T>,
    rx: &Endpoint<'_, T>,
    path: &PropagationPath,
) -> Vec<Complex<T>> {
    let lambda = ctx.wavelength();
    let tx_geom = ArrayGeometry::new(tx.array, lambda);
    let rx_geom = ArrayGeometry::new(rx.array, lambda);
    let n_tx = tx_geom.len();
    let n_rx = rx_geom.len();
    let tx_slants = tx.array.polarization.slants();
    let rx_slants = rx.array.polarization.slants();
    let tx_rots: Vec<Mat3<T>> = tx_slants.iter().map(|&s| tx.rotation(s)).collect();
    let rx_rots: Vec<Mat3<T>> = rx_slants.iter().map(|&s| rx.rotation(s)).collect();
    let plane_list = planes(path, ctx.primitives);
    let mut out = Vec::with_capacity(n_tx * n_rx);

    if ctx.synthetic_array {
        let mut vertices = Vec::with_capacity(path.vertices.len());
        vertices.push(tx.position);
        match image_points(tx.position, rx.position, &plane_list) {
            Some(pts) => vertices.extend(pts),
            None => vertices.extend(path.vertices[1..path.vertices.len() - 1].iter().map(|v| Vec3::cst(*v))),
        }
        vertices.push(rx.position);
        let mut base = Vec::with_capacity(rx_slants.len() * tx_slants.len());
        for rr in &rx_rots {
            for tr in &tx_rots {
                base.push(chain_coefficient(
                    &vertices,
                    &path.primitives,
                    ctx.primitives,
                    etas,
                    tr,
                    tx.array.pattern,
                    rr,
                    rx.array.pattern,
                    lambda,
                ));
            }
        }
        let m = vertices.len();
        let k_dep = (vertices[1] - vertices[0]).normalized();
        let k_back = (vertices[m - 2] - vertices[m - 1]).normalized();
        let tx_center = tx.rotation(0.0);
        let rx_center = rx.rotation(0.0);
        let tx_phase: Vec<Complex<T>> = tx_geom
            .offsets
            .iter()
            .map(|o| synthetic_phase(&k_dep, &tx_center.mul_vec(&Vec3::cst(*o)), lambda))
            .collect();
        let rx_phase: Vec<Complex<T>> = rx_geom
            .offsets
            .iter()
            .map(|o| synthetic_phase(&k_back, &rx_center.mul_vec(&Vec3::cst(*o)), lambda))
            .collect();
        for j in 0..n_rx {
            for i in 0..n_tx {
                let b = base[(j % rx_slants.len()) * tx_slants.len() + i % tx_slants.len()];
                out.push(b * tx_phase[i] * rx_phase[j]);
            }
        }
        return out;
    }

    let tx_center = tx.rotation(0.0).value();
    let rx_center = rx.rotation(0.0).value();
    let tx_pos = tx.position.value();
    let rx_pos = rx.position.value();
    for j in 0..n_rx {
        let pj = rx_pos + rx_center.mul_vec(&rx_geom.offsets[j]);
        for i in 0..n_tx {
            let pi = tx_pos + tx_center.mul_vec(&tx_geom.offsets[i]);
            let vertices = element_path(ctx, path, &plane_list, pi, pj);
            out.push(match vertices {
                Some(v) => {
                    let v: Vec<Vec3<T>> = v.iter().map(|p| Vec3::cst(*p)).collect();
                    chain_coefficient(
                        &v,
                        &path.primitives,
                        ctx.primitives,
                        etas,
                        &tx_rots[i % tx_slants.len()],
                        tx.array.pattern,
                        &rx_rots[j % rx_slants.len()],
                        rx.array.pattern,
                        lambda,
                    )
                }
                None => Complex::zero(),
            });
        }
    }
    out
}

fn element_path(
    ctx: &CoefficientContext<'_>,
    path: &PropagationPath,
    plane_list: &[(Vec3, f64)],
    from: Vec3,
    to: Vec3,
) -> Option<Vec<Vec3>> {
    match ctx.bvh {
        Some(bvh) if path.primitives.is_empty() => los_path(bvh, from, to).map(|p| p.vertices),
        Some(bvh) => image_solve(ctx.primitives, bvh, from, to, &path.primitives).map(|p| p.vertices),
        None => {
            let mut v = vec![from];
            v.extend(image_points(from, to, plane_list)?);
            v.push(to);
            Some(v)
        }
    }
}

/// Doppler shift of a path, Hz: `(f_c/c)·(k_dep·v_tx − k_arr·v_rx)`, so
/// closing range raises the frequency.
pub fn doppler_shift(path: &PropagationPath, frequency_hz: f64, v_tx: Vec3, v_rx: Vec3) -> f64 {
    frequency_hz / SPEED_OF_LIGHT * (path.departure.dot(&v_tx) - path.arrival.dot(&v_rx))
}

/// `a·exp(j·2π·f_D·n/fs)` for `n = 0..num_time_steps`.
pub fn apply_doppler<T: Real>(
    a: Complex<T>,
    doppler_hz: f64,
    sampling_frequency: f64,
    num_time_steps: usize,
) -> Vec<Complex<T>> {
    (0..num_time_steps)
        .map(|n| {
            let phi = 2.0 * PI * doppler_hz * n as f64 / sampling_frequency;
            a * Complex::cst(Complex::from_phase(phi))
        })
        .collect()
}

/// Distance beyond which the plane-wave assumption holds for an aperture.
pub fn fraunhofer_distance(aperture: f64, wavelength: f64) -> f64 {
    2.0 * aperture * aperture / wavelength
}
