//! Phase factors `exp(-i a b)` for level-times-angle products.

use num_complex::Complex64;

/// Above this magnitude the product is reduced modulo 2π in extended precision.
pub const REDUCTION_THRESHOLD: f64 = 1e8;

// 2π split into three parts: TAU_HI + TAU_MID + TAU_LO.
const TAU_HI: f64 = std::f64::consts::TAU;
const TAU_MID: f64 = 2.449_293_598_294_706_4e-16;
const TAU_LO: f64 = -5.989_539_619_436_679e-33;

/// `a * b` reduced to roughly `[-π, π]`.
pub fn reduced_product(a: f64, b: f64) -> f64 {
    let p = a * b;
    if !(p.abs() > REDUCTION_THRESHOLD) {
        return p;
    }
    // exact low part of the product
    let p_lo = a.mul_add(b, -p);
    let k = (p / TAU_HI).round();
    let mut r = (-k).mul_add(TAU_HI, p);
    r = (-k).mul_add(TAU_MID, r);
    r = (-k).mul_add(TAU_LO, r);
    r + p_lo
}

/// `exp(-i a b)`.
pub fn unit_phase(a: f64, b: f64) -> Complex64 {
    let (s, c) = reduced_product(a, b).sin_cos();
    Complex64::new(c, -s)
}
