use crate::mathdiff::{Complex, Real};

/// Reflection coefficients `(r_TE, r_TM)` for a wave in air hitting a
/// half-space of complex relative permittivity `eta` (μ_r = 1).
///
/// With `s = √(η − sin²θ_i)`:
///
/// * `r_TE = (cos θ_i − s) / (cos θ_i + s)`
/// * `r_TM = (s − η cos θ_i) / (s + η cos θ_i)`
///
/// `r_TM` refers the reflected parallel field to `k_r × e_s`, so both
/// coefficients coincide at normal incidence, `(1 − √η)/(1 + √η)`.
/// The square root is principal (real part ≥ 0), so transmitted fields
/// decay into a lossy medium.
pub fn fresnel<T: Real>(eta: Complex<T>, cos_incidence: T) -> (Complex<T>, Complex<T>) {
    let c = Complex::from_real(cos_incidence);
    let sin2 = T::one() - cos_incidence * cos_incidence;
    let s = (eta - Complex::from_real(sin2)).sqrt();
    let te_den = c + s;
    let eta_c = eta * c;
    let tm_den = s + eta_c;
    if te_den.norm_sqr().value() == 0.0 || tm_den.norm_sqr().value() == 0.0 {
        // Grazing incidence on a vacuum-like medium: total reflection limit.
        let m1 = Complex::from_real(-T::one());
        return (m1, m1);
    }
    ((c - s) / te_den, (s - eta_c) / tm_den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathdiff::{grad, Tape};
    use proptest::prelude::*;

    #[test]
    fn lossless_normal_incidence() {
        let (te, tm) = fresnel(Complex::new(4.0, 0.0), 1.0);
        assert!((te.re + 1.0 / 3.0).abs() < 1e-15 && te.im == 0.0);
        assert!((tm.re + 1.0 / 3.0).abs() < 1e-15 && tm.im == 0.0);
    }

    #[test]
    fn normal_incidence_closed_form_lossy() {
        let eta = Complex::new(5.24, -0.63);
        let (te, tm) = fresnel(eta, 1.0);
        let r = eta.sqrt();
        let expect = (Complex::one() - r) / (Complex::one() + r);
        assert!((te - expect).abs() < 1e-14);
        assert!((tm - expect).abs() < 1e-14);
    }

    #[test]
    fn grazing_te_is_minus_one() {
        for eta in [Complex::new(2.0, 0.0), Complex::new(7.0, -3.0)] {
            let (te, _) = fresnel(eta, 0.0);
            assert!((te + Complex::one()).abs() < 1e-15);
        }
    }

    #[test]
    fn perfect_conductor_limit() {
        for c in [0.1, 0.5, 0.9, 1.0] {
            let (te, tm) = fresnel(Complex::new(1.0, -1e20), c);
            assert!((te.abs() - 1.0).abs() < 1e-6);
            assert!((tm.abs() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn brewster_angle_zeroes_tm() {
        let eta = 4.0f64;
        let theta_b = eta.sqrt().atan();
        let (_, tm) = fresnel(Complex::new(eta, 0.0), theta_b.cos());
        assert!(tm.abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_difference() {
        let tape = Tape::new();
        let er = tape.leaf("er", 5.0);
        let im = tape.leaf("im", -0.4);
        let (te, tm) = fresnel(Complex::new(er, im), crate::mathdiff::DiffScalar::constant(0.37));
        let out = te.norm_sqr() + tm.norm_sqr();
        let g = grad(&tape, out).unwrap();
        let f = |e: f64, i: f64| {
            let (a, b) = fresnel(Complex::new(e, i), 0.37);
            a.norm_sqr() + b.norm_sqr()
        };
        let h = 1e-6;
        let fd_er = (f(5.0 + h, -0.4) - f(5.0 - h, -0.4)) / (2.0 * h);
        let fd_im = (f(5.0, -0.4 + h) - f(5.0, -0.4 - h)) / (2.0 * h);
        assert!((g.get("er").unwrap() - fd_er).abs() < 1e-8);
        assert!((g.get("im").unwrap() - fd_im).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn passive_for_physical_media(
            er in 1.0..80.0f64, loss in 0.0..1e3f64, cos in 0.0..=1.0f64,
        ) {
            let (te, tm) = fresnel(Complex::new(er, -loss), cos);
            prop_assert!(te.abs() <= 1.0 + 1e-12);
            prop_assert!(tm.abs() <= 1.0 + 1e-12);
        }
    }
}
