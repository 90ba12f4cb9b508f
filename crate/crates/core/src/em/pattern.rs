use std::f64::consts::{FRAC_PI_2, LN_10, PI};

use crate::mathdiff::{Complex, Mat3, Real, Vec3};
use crate::scene::Pattern;

/// Directivity of a thin half-wave dipole, `4π / ∫ (cos(π/2·cosθ)/sinθ)² dΩ`.
pub const DIPOLE_DIRECTIVITY: f64 = 1.640_922_376_984_584_7;

/// Peak gain of the 3GPP TR 38.901 element, dBi.
pub const TR38901_MAX_GAIN_DBI: f64 = 8.0;

/// Real field amplitudes `(E_θ, E_φ)` for a body-frame direction in
/// spherical angles. Gain is `E_θ² + E_φ²`. All supported patterns are
/// vertically polarized before any slant is applied.
pub fn pattern_field<T: Real>(p: Pattern, theta: T, phi: T) -> (T, T) {
    match p {
        Pattern::Iso => (T::one(), T::zero()),
        Pattern::Dipole => {
            let s = theta.sin();
            if s.value().abs() < 1e-12 {
                return (T::zero(), T::zero());
            }
            let e = (theta.cos() * FRAC_PI_2).cos() / s * DIPOLE_DIRECTIVITY.sqrt();
            (e, T::zero())
        }
        Pattern::Tr38901 => {
            let deg = 180.0 / PI;
            let cap = |x: T| if x.value() > 30.0 { T::cst(30.0) } else { x };
            let a_v = cap(((theta * deg - 90.0) / 65.0).square() * 12.0);
            let a_h = cap((phi * deg / 65.0).square() * 12.0);
            let att = cap(a_v + a_h);
            let gain_db = -att + TR38901_MAX_GAIN_DBI;
            ((gain_db * (LN_10 / 20.0)).exp(), T::zero())
        }
    }
}

/// Complex `(E_θ, E_φ)` at body-frame angles.
pub fn pattern_eval(p: Pattern, theta: f64, phi: f64) -> (Complex, Complex) {
    let (t, f) = pattern_field(p, theta, phi);
    (Complex::from_real(t), Complex::from_real(f))
}

pub fn pattern_gain(p: Pattern, theta: f64, phi: f64) -> f64 {
    let (t, f) = pattern_field(p, theta, phi);
    t * t + f * f
}

/// Spherical angles `(θ, φ)` of a unit vector.
pub fn spherical_angles<T: Real>(d: &Vec3<T>) -> (T, T) {
    let rho2 = d.x * d.x + d.y * d.y;
    let rho = if rho2.value() < 1e-24 { T::zero() } else { rho2.sqrt() };
    (rho.atan2(d.z), d.y.atan2(d.x))
}

/// World-frame field vector radiated by an element with body-to-world
/// rotation `rot` toward world direction `dir`.
pub fn field_vector<T: Real>(p: Pattern, rot: &Mat3<T>, dir: &Vec3<T>) -> Vec3<T> {
    let local = rot.tmul_vec(dir);
    let (theta, phi) = spherical_angles(&local);
    let (e_t, e_p) = pattern_field(p, theta, phi);
    let (st, ct) = (theta.sin(), theta.cos());
    let (sp, cp) = (phi.sin(), phi.cos());
    let theta_hat = Vec3::new(ct * cp, ct * sp, -st);
    let phi_hat = Vec3::new(-sp, cp, T::zero());
    rot.mul_vec(&(theta_hat.scale(e_t) + phi_hat.scale(e_p)))
}
