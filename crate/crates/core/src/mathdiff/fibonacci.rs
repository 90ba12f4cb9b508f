use std::f64::consts::PI;

use super::linalg::Vec3;
use crate::error::{Error, Result};

/// `n` near-uniform unit directions from the spherical Fibonacci lattice:
/// `z_i = 1 − (2i+1)/n`, azimuth `2π i / φ²` with φ the golden ratio.
pub fn fibonacci_directions(n: usize) -> Result<Vec<Vec3>> {
    if n == 0 {
        return Err(Error::EmptyInput("fibonacci lattice needs at least one point"));
    }
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    let step = 2.0 * PI / (golden * golden);
    let nf = n as f64;
    Ok((0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / nf;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = step * i as f64;
            Vec3::new(rho * phi.cos(), rho * phi.sin(), z)
        })
        .collect())
}
