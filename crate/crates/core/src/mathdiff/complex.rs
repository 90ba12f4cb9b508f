use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::linalg::Vec3;
use super::real::Real;

/// Complex number over any [`Real`]; taped arithmetic decomposes into real
/// operations on the two components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Complex<T = f64> {
    pub re: T,
    pub im: T,
}

impl<T: Real> Complex<T> {
    pub fn new(re: T, im: T) -> Self {
        Self { re, im }
    }

    pub fn from_real(re: T) -> Self {
        Self::new(re, T::zero())
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn one() -> Self {
        Self::new(T::one(), T::zero())
    }

    pub fn cst(c: Complex<f64>) -> Self {
        Self::new(T::cst(c.re), T::cst(c.im))
    }

    pub fn value(&self) -> Complex<f64> {
        Complex::new(self.re.value(), self.im.value())
    }

    /// `e^{jθ}`.
    pub fn from_phase(theta: T) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn norm_sqr(&self) -> T {
        self.re * self.re + self.im * self.im
    }

    pub fn abs(&self) -> T {
        self.norm_sqr().sqrt()
    }

    pub fn arg(&self) -> T {
        self.im.atan2(self.re)
    }

    pub fn scale(&self, s: T) -> Self {
        Self::new(self.re * s, self.im * s)
    }

    /// Principal square root (real part ≥ 0; on the negative real axis the
    /// imaginary part takes the sign of `im`, with +0 giving a positive
    /// root).
    ///
    /// Evaluated through the stable half-angle form so that the derivative
    /// stays finite when the argument is purely real.
    pub fn sqrt(&self) -> Self {
        let r = self.abs();
        if r.value() == 0.0 {
            return Self::zero();
        }
        if self.re.value() >= 0.0 {
            let s = ((r + self.re) * 0.5).sqrt();
            Self::new(s, self.im / (s * 2.0))
        } else {
            let t = ((r - self.re) * 0.5).sqrt();
            let t = if self.im.value() < 0.0 { -t } else { t };
            Self::new(self.im / (t * 2.0), t)
        }
    }
}

impl Complex<f64> {
    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl<T: Real> Add for Complex<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
}

impl<T: Real> Sub for Complex<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
}

impl<T: Real> Mul for Complex<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
}

impl<T: Real> Div for Complex<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let d = o.norm_sqr();
        Self::new(
            (self.re * o.re + self.im * o.im) / d,
            (self.im * o.re - self.re * o.im) / d,
        )
    }
}

impl<T: Real> Neg for Complex<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.re, -self.im)
    }
}

impl<T: Real> Mul<f64> for Complex<T> {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.re * s, self.im * s)
    }
}

/// Complex 3-vector; carries polarized field phasors in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CVec3<T = f64> {
    pub x: Complex<T>,
    pub y: Complex<T>,
    pub z: Complex<T>,
}

impl<T: Real> CVec3<T> {
    pub fn from_real(v: &Vec3<T>) -> Self {
        Self {
            x: Complex::from_real(v.x),
            y: Complex::from_real(v.y),
            z: Complex::from_real(v.z),
        }
    }

    /// Bilinear (non-conjugating) product with a real vector.
    pub fn dot_real(&self, v: &Vec3<T>) -> Complex<T> {
        self.x.scale(v.x) + self.y.scale(v.y) + self.z.scale(v.z)
    }

    /// `c · v` for complex scalar `c` and real vector `v`.
    pub fn from_scaled(c: Complex<T>, v: &Vec3<T>) -> Self {
        Self {
            x: c.scale(v.x),
            y: c.scale(v.y),
            z: c.scale(v.z),
        }
    }

    pub fn norm_sqr(&self) -> T {
        self.x.norm_sqr() + self.y.norm_sqr() + self.z.norm_sqr()
    }
}

impl<T: Real> Add for CVec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            x: self.x + o.x,
            y: self.y + o.y,
            z: self.z + o.z,
        }
    }
}
