//! Atomic positions for the two paired arrays and the Hermite-Gauss modes
//! that set their curvature.
//!
//! Array 1 sits near z = −L/2 and array 2 near z = +L/2. Transverse
//! coordinates are centered on the optical axis. Site order is row-major
//! over (j_x, j_y), with every site of array 1 before any site of array 2.

use serde::{Deserialize, Serialize};

use crate::{c64, Error, Result, Vec3, K0};
use std::f64::consts::PI;

/// Shape of the two arrays.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Curvature {
    /// Planar arrays at z = ±L/2.
    Flat,
    /// Arrays following the wavefronts of a Gaussian beam focused at the origin.
    Gaussian { waist: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub n_perp: usize,
    pub spacing: f64,
    pub separation: f64,
    pub curvature: Curvature,
}

impl LatticeSpec {
    pub fn flat(n_perp: usize, spacing: f64, separation: f64) -> Self {
        Self { n_perp, spacing, separation, curvature: Curvature::Flat }
    }

    pub fn curved(n_perp: usize, spacing: f64, separation: f64, waist: f64) -> Self {
        Self { n_perp, spacing, separation, curvature: Curvature::Gaussian { waist } }
    }

    pub fn with_waist(self, waist: f64) -> Self {
        Self { curvature: Curvature::Gaussian { waist }, ..self }
    }

    /// Transverse array size L⊥ = N⊥δ⊥.
    pub fn side(&self) -> f64 {
        self.n_perp as f64 * self.spacing
    }

    /// Atoms per array.
    pub fn sites_per_array(&self) -> usize {
        self.n_perp * self.n_perp
    }

    pub fn mode(&self) -> Option<GaussianMode> {
        match self.curvature {
            Curvature::Flat => None,
            Curvature::Gaussian { waist } => Some(GaussianMode::new(waist)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_perp == 0 {
            return Err(Error::invalid("n_perp must be at least 1"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::invalid(format!("spacing must be positive, got {}", self.spacing)));
        }
        if !(self.separation > 0.0 && self.separation.is_finite()) {
            return Err(Error::invalid(format!(
                "separation must be positive, got {}",
                self.separation
            )));
        }
        if let Curvature::Gaussian { waist } = self.curvature {
            if !(waist > 0.0 && waist.is_finite()) {
                return Err(Error::invalid(format!("waist must be positive, got {waist}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SiteIndex {
    /// Zero-based column, 0..N⊥.
    pub jx: usize,
    /// Zero-based row, 0..N⊥.
    pub jy: usize,
    /// Array number, 1 or 2.
    pub jz: u8,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomSite {
    pub index: SiteIndex,
    pub position: Vec3,
}

/// Fundamental Gaussian beam focused at the origin and propagating along +z.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMode {
    pub waist: f64,
}

impl GaussianMode {
    pub fn new(waist: f64) -> Self {
        Self { waist }
    }

    /// z_R = πw₀²/λ₀.
    pub fn rayleigh(&self) -> f64 {
        PI * self.waist * self.waist
    }

    pub fn width(&self, z: f64) -> f64 {
        let zr = self.rayleigh();
        self.waist * (1.0 + (z / zr).powi(2)).sqrt()
    }

    /// Wavefront radius R(z); infinite at the focus.
    pub fn radius(&self, z: f64) -> f64 {
        let zr = self.rayleigh();
        if z == 0.0 {
            f64::INFINITY
        } else {
            z * (1.0 + (zr / z).powi(2))
        }
    }

    /// Gouy phase ψ_{j,k}(z) = (j+k+1)·atan(z/z_R).
    pub fn gouy(&self, j: usize, k: usize, z: f64) -> f64 {
        (j + k + 1) as f64 * (z / self.rayleigh()).atan()
    }

    /// Wavefront phase k₀ρ²/(2R(z)), written to stay finite at z = 0.
    pub fn front_phase(&self, rho2: f64, z: f64) -> f64 {
        let zr = self.rayleigh();
        K0 * rho2 * z / (2.0 * (z * z + zr * zr))
    }

    /// Transversally orthonormal Hermite-Gauss mode TEM_{j,k}(r).
    pub fn tem(&self, j: usize, k: usize, r: Vec3) -> c64 {
        let [x, y, z] = r;
        let w = self.width(z);
        let rho2 = x * x + y * y;
        let norm = (2.0 / (PI * w * w)).sqrt()
            / ((2.0f64).powi((j + k) as i32) * factorial(j) * factorial(k)).sqrt();
        let amp = norm
            * hermite(j, 2f64.sqrt() * x / w)
            * hermite(k, 2f64.sqrt() * y / w)
            * (-rho2 / (w * w)).exp();
        let phase = self.front_phase(rho2, z) - self.gouy(j, k, z);
        c64::from_polar(amp, phase)
    }

    /// The Gaussian mode E(r) = TEM₀₀(r)·e^{ik₀z}.
    pub fn field(&self, r: Vec3) -> c64 {
        self.tem(0, 0, r) * c64::cis(K0 * r[2])
    }

    /// Phase of E(r) with its envelope stripped.
    fn total_phase(&self, rho2: f64, z: f64) -> f64 {
        K0 * z + self.front_phase(rho2, z) - self.gouy(0, 0, z)
    }

    fn total_phase_dz(&self, rho2: f64, z: f64) -> f64 {
        let zr = self.rayleigh();
        let s = z * z + zr * zr;
        K0 + K0 * rho2 * (zr * zr - z * z) / (2.0 * s * s) - zr / s
    }

    /// Longitudinal position z > 0 at transverse radius² `rho2` where the
    /// phase of E equals k₀L/2.
    fn surface_z(&self, rho2: f64, half_sep: f64, bracket: f64) -> Result<f64> {
        let target = K0 * half_sep;
        let f = |z: f64| self.total_phase(rho2, z) - target;
        let mut h = bracket;
        let (mut lo, mut hi) = (half_sep - h, half_sep + h);
        let mut tries = 0;
        while f(lo.max(0.0)) * f(hi) > 0.0 {
            h *= 2.0;
            lo = half_sep - h;
            hi = half_sep + h;
            tries += 1;
            if tries > 40 {
                return Err(Error::SurfaceNotFound { rho: rho2.sqrt(), residual: f(half_sep) });
            }
        }
        lo = lo.max(0.0);
        let mut flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let fm = f(mid);
            if fm == 0.0 || hi - lo < 1e-13 * half_sep.max(1.0) {
                lo = mid;
                hi = mid;
                break;
            }
            if fm * flo < 0.0 {
                hi = mid;
            } else {
                lo = mid;
                flo = fm;
            }
        }
        let mut z = 0.5 * (lo + hi);
        for _ in 0..3 {
            let d = self.total_phase_dz(rho2, z);
            if d == 0.0 {
                break;
            }
            z -= f(z) / d;
        }
        let residual = f(z).abs();
        if residual < 1e-10 {
            Ok(z)
        } else {
            Err(Error::SurfaceNotFound { rho: rho2.sqrt(), residual })
        }
    }
}

/// φ_{j,k} = 2(j+k)·atan(L/(2z_R)): the Gouy mismatch accumulated between the arrays.
pub fn gouy_mismatch(j: usize, k: usize, separation: f64, rayleigh: f64) -> f64 {
    2.0 * (j + k) as f64 * (separation / (2.0 * rayleigh)).atan()
}

/// Physicists' Hermite polynomial H_n(x).
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    match n {
        0 => h0,
        _ => {
            for m in 1..n {
                let h2 = 2.0 * x * h1 - 2.0 * m as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|m| m as f64).product()
}

/// Transverse coordinate of column/row `j` on a centered grid.
pub fn transverse(j: usize, n_perp: usize, spacing: f64) -> f64 {
    spacing * (j as f64 - 0.5 * (n_perp as f64 - 1.0))
}

/// Builds all 2N⊥² sites, array 1 first.
pub fn build_arrays(spec: &LatticeSpec) -> Result<Vec<AtomSite>> {
    spec.validate()?;
    let n = spec.n_perp;
    let half = 0.5 * spec.separation;
    let mode = spec.mode();
    let bracket = (spec.side().powi(2) / spec.separation).max(0.5);

    let mut front = Vec::with_capacity(n * n);
    for jx in 0..n {
        for jy in 0..n {
            let x = transverse(jx, n, spec.spacing);
            let y = transverse(jy, n, spec.spacing);
            let z = match &mode {
                None => half,
                Some(m) => m.surface_z(x * x + y * y, half, bracket)?,
            };
            front.push((jx, jy, [x, y, z]));
        }
    }

    let mut sites = Vec::with_capacity(2 * n * n);
    for jz in [1u8, 2] {
        let sign = if jz == 1 { -1.0 } else { 1.0 };
        sites.extend(front.iter().map(|&(jx, jy, [x, y, z])| AtomSite {
            index: SiteIndex { jx, jy, jz },
            position: [x, y, sign * z],
        }));
    }
    Ok(sites)
}

/// Residual of the wavefront condition for a site, in radians.
pub fn surface_residual(mode: &GaussianMode, site: &AtomSite, separation: f64) -> f64 {
    let [x, y, z] = site.position;
    let target = if site.index.jz == 1 { -0.5 } else { 0.5 } * K0 * separation;
    mode.total_phase(x * x + y * y, z) - target
}
