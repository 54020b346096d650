//! Free-space dyadic Green's tensor, its polarization projection and the
//! paraxial propagator.
//!
//! Ĝ is normalized so that the coupling between atoms j and j' is
//! −(i/2)·p*·Ĝ(r_j − r_j')·p in units of γ_e, with Ĝ(0) ≡ 1.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::{c64, Error, Result, Vec3, K0};

/// Unit transition dipole orientation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Polarization {
    pub vector: [c64; 3],
}

impl Polarization {
    /// σ⁺ polarization (x̂ + iŷ)/√2.
    pub fn circular() -> Self {
        Self {
            vector: [
                c64::new(FRAC_1_SQRT_2, 0.0),
                c64::new(0.0, FRAC_1_SQRT_2),
                c64::new(0.0, 0.0),
            ],
        }
    }

    /// Linear polarization along Cartesian axis 0, 1 or 2.
    pub fn linear(axis: usize) -> Self {
        let mut vector = [c64::new(0.0, 0.0); 3];
        vector[axis] = c64::new(1.0, 0.0);
        Self { vector }
    }

    /// Normalizes an arbitrary nonzero complex vector.
    pub fn new(v: [c64; 3]) -> Result<Self> {
        let n = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid("polarization vector must be nonzero"));
        }
        Ok(Self { vector: v.map(|c| c / n) })
    }

    fn is_circular(&self) -> bool {
        *self == Self::circular()
    }
}

impl Default for Polarization {
    fn default() -> Self {
        Self::circular()
    }
}

/// Complex 3×3 tensor, row-major.
pub type GreenTensor = [[c64; 3]; 3];

fn norm(r: Vec3) -> f64 {
    (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt()
}

/// Radial coefficients (A, B) with Ĝ = A·1 + B·r̂⊗r̂.
fn coefficients(r: f64) -> (c64, c64) {
    let x = K0 * r;
    let i = c64::new(0.0, 1.0);
    let pref = 3.0 * c64::cis(x) / (2.0 * i * x * x * x);
    let a = pref * c64::new(x * x - 1.0, x);
    let b = pref * c64::new(3.0 - x * x, -3.0 * x);
    (a, b)
}

pub fn dyadic_green(r: Vec3) -> GreenTensor {
    let zero = c64::new(0.0, 0.0);
    let one = c64::new(1.0, 0.0);
    let d = norm(r);
    if d == 0.0 {
        return [[one, zero, zero], [zero, one, zero], [zero, zero, one]];
    }
    let (a, b) = coefficients(d);
    let u = [r[0] / d, r[1] / d, r[2] / d];
    let mut g = [[zero; 3]; 3];
    for (p, row) in g.iter_mut().enumerate() {
        for (q, v) in row.iter_mut().enumerate() {
            *v = b * (u[p] * u[q]);
            if p == q {
                *v += a;
            }
        }
    }
    g
}

/// G(r) = p*·Ĝ(r)·p.
pub fn scalar_green(r: Vec3, p: &Polarization) -> c64 {
    let d = norm(r);
    if d == 0.0 {
        return c64::new(1.0, 0.0);
    }
    let (a, b) = coefficients(d);
    if p.is_circular() {
        // |r̂·p|² = (x² + y²)/(2r²) for σ⁺.
        let t = (r[0] * r[0] + r[1] * r[1]) / (2.0 * d * d);
        return a + b * t;
    }
    let rp: c64 = (0..3).map(|k| p.vector[k] * r[k]).sum::<c64>() / d;
    a + b * rp.norm_sqr()
}

/// Paraxial propagator k₀/(2πi|z|)·exp(ik₀[|z| + ρ²/(2|z|)]).
pub fn paraxial_green(r: Vec3) -> Result<c64> {
    let z = r[2].abs();
    if z == 0.0 {
        return Err(Error::invalid("paraxial Green's function diverges at z = 0"));
    }
    let rho2 = r[0] * r[0] + r[1] * r[1];
    let pref = c64::new(0.0, -K0 / (2.0 * std::f64::consts::PI * z));
    Ok(pref * c64::cis(K0 * (z + rho2 / (2.0 * z))))
}
