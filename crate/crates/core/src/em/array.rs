use std::f64::consts::PI;

use crate::mathdiff::{Complex, Real, Vec3};
use crate::scene::AntennaArray;

/// Element positions and polarization slants of an array at a given
/// wavelength, in the device body frame.
///
/// Elements sit in the body y–z plane (boresight is body +x). Rows run
/// along z with row 0 on top, columns along +y. Element order is
/// position-major: all slants of position 0, then of position 1, and so on.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub offsets: Vec<Vec3>,
    /// Extra roll about boresight per element, rad.
    pub slants: Vec<f64>,
}

impl ArrayGeometry {
    pub fn new(array: &AntennaArray, wavelength: f64) -> Self {
        let slants_per = array.polarization.slants();
        let mut offsets = Vec::with_capacity(array.num_elements());
        let mut slants = Vec::with_capacity(array.num_elements());
        let rc = (array.num_rows as f64 - 1.0) / 2.0;
        let cc = (array.num_cols as f64 - 1.0) / 2.0;
        for r in 0..array.num_rows {
            for c in 0..array.num_cols {
                let o = Vec3::new(
                    0.0,
                    (c as f64 - cc) * array.horizontal_spacing * wavelength,
                    (rc - r as f64) * array.vertical_spacing * wavelength,
                );
                for &s in slants_per {
                    offsets.push(o);
                    slants.push(s);
                }
            }
        }
        Self { offsets, slants }
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Largest distance between two elements.
    pub fn aperture(&self) -> f64 {
        let mut d: f64 = 0.0;
        for a in &self.offsets {
            for b in &self.offsets {
                d = d.max(a.distance(b));
            }
        }
        d
    }
}

/// Plane-wave phase of an element displaced by `offset` (world frame)
/// relative to the array center: `exp(+j·2π·(direction·offset)/λ)`.
///
/// For departures `direction` is the departure direction; for arrivals
/// it is the direction back toward the source (the negated propagation
/// direction), so an element displaced toward the source leads in phase.
pub fn synthetic_phase<T: Real>(direction: &Vec3<T>, offset: &Vec3<T>, wavelength: f64) -> Complex<T> {
    Complex::from_phase(direction.dot(offset) * (2.0 * PI / wavelength))
}
