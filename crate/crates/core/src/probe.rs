//! Steady-state reflection of a weak Gaussian probe from the two arrays.

use std::f64::consts::PI;

use faer::prelude::Solve;
use faer::Mat;
use rayon::prelude::*;

use crate::analytics::Scheme;
use crate::geometry::{AtomSite, LatticeSpec};
use crate::hamiltonian::{scalar_for, EffectiveHamiltonian};
use crate::{c64, Error, Result, K0};

#[derive(Clone, Debug)]
pub struct ProbeConfig {
    pub spec: LatticeSpec,
    pub scheme: Scheme,
    /// Probe frequency offset from ω₀, normally Re ε_dark.
    pub shift: f64,
    pub detunings: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ReflectivityCurve {
    pub scheme: Scheme,
    pub detunings: Vec<f64>,
    /// NaN where the system was singular.
    pub values: Vec<f64>,
    pub skipped: Vec<usize>,
}

/// Reflector prepared once per lattice: Hamiltonian and sampled probe mode.
pub struct Reflector {
    h: EffectiveHamiltonian,
    source: Vec<c64>,
    half: usize,
}

impl Reflector {
    pub fn new(spec: &LatticeSpec) -> Result<Self> {
        let mode = spec
            .mode()
            .ok_or_else(|| Error::invalid("probing needs curved arrays with a Gaussian waist"))?;
        if mode.waist <= 1.0 {
            return Err(Error::invalid(format!(
                "waist {} ≤ λ₀ is outside the paraxial regime",
                mode.waist
            )));
        }
        let h = scalar_for(spec)?;
        let source = h.sites.iter().map(|s: &AtomSite| mode.field(s.position)).collect();
        let half = h.dim() / 2;
        Ok(Self { h, source, half })
    }

    /// R = 9π²/(4k₀⁴)·|Eᵀ(H + Δ_z − Δ_d)⁻¹E|².
    pub fn reflectivity(&self, delta: f64, shift: f64, scheme: Scheme) -> Result<f64> {
        let n = self.h.dim();
        let d2 = match scheme {
            Scheme::Symmetric => delta,
            Scheme::Opposite => -delta,
        };
        let mut m: Mat<c64> = self.h.matrix.clone();
        for j in 0..n {
            m[(j, j)] += if j < self.half { delta } else { d2 } - shift;
        }
        let rhs = Mat::from_fn(n, 1, |i, _| self.source[i]);
        let x = m.partial_piv_lu().solve(&rhs);
        let amp: c64 = (0..n).map(|i| self.source[i] * x[(i, 0)]).sum();
        if !amp.re.is_finite() || !amp.im.is_finite() {
            return Err(Error::Singular(format!("probe at Δ = {delta}")));
        }
        Ok(9.0 * PI * PI / (4.0 * K0.powi(4)) * amp.norm_sqr())
    }

    /// Half width at half maximum of R(Δ), by bracketing and bisection.
    pub fn half_width(&self, shift: f64, scheme: Scheme) -> Result<f64> {
        let peak = self.reflectivity(0.0, shift, scheme)?;
        let below = |d: f64| -> Result<bool> { Ok(self.reflectivity(d, shift, scheme)? < 0.5 * peak) };
        let mut hi = 1e-6;
        while !below(hi)? {
            hi *= 2.0;
            if hi > 1e3 {
                return Err(Error::NotConverged("reflectivity peak has no half-maximum".into()));
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-9 * hi {
            let mid = 0.5 * (lo + hi);
            if below(mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Evaluates R over the configured detunings; singular points are skipped.
pub fn reflectivity_numeric(cfg: &ProbeConfig) -> Result<ReflectivityCurve> {
    if cfg.detunings.is_empty() {
        return Err(Error::invalid("detuning grid is empty"));
    }
    let r = Reflector::new(&cfg.spec)?;
    let values: Vec<Option<f64>> = cfg
        .detunings
        .par_iter()
        .map(|&d| r.reflectivity(d, cfg.shift, cfg.scheme).ok())
        .collect();
    let skipped = values.iter().enumerate().filter(|(_, v)| v.is_none()).map(|(i, _)| i).collect();
    Ok(ReflectivityCurve {
        scheme: cfg.scheme,
        detunings: cfg.detunings.clone(),
        values: values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::dark_bright_of;

    #[test]
    fn rejects_flat_or_narrow_modes() {
        assert!(Reflector::new(&LatticeSpec::flat(4, 0.5, 2.0)).is_err());
        assert!(Reflector::new(&LatticeSpec::curved(4, 0.5, 2.0, 0.8)).is_err());
    }

    #[test]
    fn even_in_detuning_and_passive() {
        let spec = LatticeSpec::curved(6, 0.6, 6.0, 1.4);
        let pair = dark_bright_of(&spec).unwrap();
        let r = Reflector::new(&spec).unwrap();
        for scheme in [Scheme::Symmetric, Scheme::Opposite] {
            for d in [0.0, 0.003, 0.05, 0.4] {
                let a = r.reflectivity(d, pair.shift, scheme).unwrap();
                let b = r.reflectivity(-d, pair.shift, scheme).unwrap();
                assert!(a <= 1.0 + 1e-3);
                if scheme == Scheme::Opposite {
                    assert!((a - b).abs() <= 1e-6 * a.max(1e-12), "{d} {a} {b}");
                }
            }
        }
    }

    #[test]
    fn grid_evaluation_reports_values() {
        let spec = LatticeSpec::curved(4, 0.6, 6.0, 1.2);
        let cfg = ProbeConfig {
            spec,
            scheme: Scheme::Opposite,
            shift: 0.0,
            detunings: vec![-0.1, 0.0, 0.1],
        };
        let c = reflectivity_numeric(&cfg).unwrap();
        assert!(c.skipped.is_empty());
        assert!(c.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}
