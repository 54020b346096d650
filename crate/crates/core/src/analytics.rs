//! Closed-form expressions for infinite arrays, the four-mode transfer
//! model, probing, imperfections and retardation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{c64, Error, Result, K0};

/// Γ = 3πγ_e/(k₀δ⊥)².
pub fn big_gamma(spacing: f64) -> f64 {
    3.0 * PI / (K0 * spacing).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InfiniteArrayParams {
    pub spacing: f64,
    pub separation: f64,
    /// In-plane quasi-momentum, units of 1/λ₀.
    pub q: [f64; 2],
    /// +1 or −1.
    pub parity: i8,
}

/// Decay rate of a Bloch mode of two infinite circularly polarized arrays,
/// summed over the diffraction orders inside the light cone. `None` when no
/// order radiates.
pub fn gamma_infinite(params: &InfiniteArrayParams) -> Result<Option<f64>> {
    let d = params.spacing;
    if !(d > 0.0) {
        return Err(Error::invalid("spacing must be positive"));
    }
    let q = params.q;
    let qn = (q[0] * q[0] + q[1] * q[1]).sqrt();
    let reach = (d * (qn / (2.0 * PI) + 1.0)).ceil() as i64 + 1;
    let b = 2.0 * PI / d;
    let gamma = big_gamma(d);
    let parity = params.parity as f64;
    let mut total = 0.0;
    let mut any = false;
    for mx in -reach..=reach {
        for my in -reach..=reach {
            let kx = q[0] - b * mx as f64;
            let ky = q[1] - b * my as f64;
            let k2 = kx * kx + ky * ky;
            let rel = (k2.sqrt() - K0).abs() / K0;
            if rel < 1e-12 {
                return Err(Error::GrazingOrder);
            }
            if k2 >= K0 * K0 {
                continue;
            }
            any = true;
            let kz = (K0 * K0 - k2).sqrt();
            let pol = K0 * K0 - 0.5 * k2;
            total += gamma * pol / (K0 * kz) * (1.0 + parity * (kz * params.separation).cos());
        }
    }
    Ok(any.then_some(total))
}

/// (Δ_s, Δ_a) = (Δ_d + (Γ/2)sin k₀L, Δ_d − (Γ/2)sin k₀L).
pub fn sym_antisym_shifts(separation: f64, gamma: f64, shift_dark: f64) -> (f64, f64) {
    let s = 0.5 * gamma * (K0 * separation).sin();
    (shift_dark + s, shift_dark - s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferEstimate {
    /// exp(−π√(2γ_d/γ_b)).
    pub fidelity: f64,
    /// 1 − π√(2γ_d/γ_b).
    pub fidelity_linear: f64,
    /// √(γ_dγ_b/8).
    pub omega_opt: f64,
    /// Time of the first transfer maximum at Ω_opt.
    pub t_max: f64,
}

pub fn transfer_fidelity(gamma_d: f64, gamma_b: f64) -> Result<TransferEstimate> {
    if !(gamma_d > 0.0 && gamma_b > gamma_d) {
        return Err(Error::invalid(format!("need 0 < γ_d < γ_b, got {gamma_d}, {gamma_b}")));
    }
    let x = PI * (2.0 * gamma_d / gamma_b).sqrt();
    let omega_opt = (gamma_d * gamma_b / 8.0).sqrt();
    Ok(TransferEstimate {
        fidelity: (-x).exp(),
        fidelity_linear: 1.0 - x,
        omega_opt,
        t_max: first_max_time(omega_opt, gamma_d),
    })
}

/// Half period of the dark-branch oscillation, 4(π − arctan(γ_d/g))/g with
/// g = √(16Ω² − γ_d²).
pub fn first_max_time(omega: f64, gamma_d: f64) -> f64 {
    let g = (16.0 * omega * omega - gamma_d * gamma_d).max(0.0).sqrt();
    4.0 * (PI - (gamma_d / g).atan()) / g
}

/// Four-mode model parameters. Γ = (γ_b − γ_d)/2 when retardation enters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferParams {
    pub gamma_d: f64,
    pub gamma_b: f64,
    pub omega: f64,
    #[serde(default)]
    pub gamma_tau: f64,
    #[serde(default)]
    pub kappa_l: f64,
}

impl TransferParams {
    pub fn markov(gamma_d: f64, gamma_b: f64, omega: f64) -> Self {
        Self { gamma_d, gamma_b, omega, gamma_tau: 0.0, kappa_l: 0.0 }
    }

    /// Parameters of the retarded model from (Γ, γ_d).
    pub fn delayed(big_gamma: f64, gamma_d: f64, omega: f64, gamma_tau: f64, kappa_l: f64) -> Self {
        Self { gamma_d, gamma_b: 2.0 * big_gamma + gamma_d, omega, gamma_tau, kappa_l }
    }

    pub fn big_gamma(&self) -> f64 {
        0.5 * (self.gamma_b - self.gamma_d)
    }

    pub fn tau(&self) -> f64 {
        self.gamma_tau / self.big_gamma()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.gamma_d >= 0.0
            && self.gamma_b >= self.gamma_d
            && self.omega > 0.0
            && self.gamma_tau >= 0.0
            && self.kappa_l >= 0.0
            && [self.gamma_d, self.gamma_b, self.omega, self.gamma_tau, self.kappa_l]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid transfer parameters {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosedFormValue {
    pub c2: c64,
    /// γ_d ≪ Ω ≪ γ_b (taken as a factor of 3 each way).
    pub in_window: bool,
}

/// Four-exponential solution for c₂(t) with c₁(0) = 1, written with the
/// sign convention of [`crate::dynamics::integrate_four_mode`].
pub fn four_mode_closed_form(t: f64, params: &TransferParams) -> Result<ClosedFormValue> {
    params.validate()?;
    let TransferParams { gamma_d: gd, gamma_b: gb, omega: om, .. } = *params;
    let i = c64::new(0.0, 1.0);
    let disc_b = 16.0 * om * om - gb * gb;
    let disc_d = 16.0 * om * om - gd * gd;
    if disc_b.abs() <= 1e-14 * gb * gb || disc_d.abs() <= 1e-14 * (om * om).max(gd * gd) {
        return Err(Error::invalid("degenerate branch: 16Ω² equals γ_b² or γ_d²"));
    }
    let root_b = c64::from(disc_b).sqrt();
    let g = c64::from(disc_d).sqrt();
    // √(γ_b² − 16Ω²) on the branch with i·s = √(16Ω² − γ_b²).
    let s = -i * root_b;
    let mut sum = c64::new(0.0, 0.0);
    for sign in [1.0, -1.0] {
        let w_b = (-i * gb + sign * root_b) / 4.0;
        let c_b = -4.0 * om * om / (disc_b + sign * gb * s);
        let w_d = (-i * gd + sign * g) / 4.0;
        // (Ω/g)·exp(±i arctan(γ_d/g)) = (g ± iγ_d)/(4g) since |g + iγ_d| = 4Ω.
        let c_d = (g + sign * i * gd) / (4.0 * g);
        sum += c_b * (-i * w_b * t).exp() + c_d * (-i * w_d * t).exp();
    }
    Ok(ClosedFormValue {
        c2: -sum,
        in_window: 3.0 * gd < om && 3.0 * om < gb,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Both arrays shifted by +Δ.
    Symmetric,
    /// Array 1 shifted by +Δ, array 2 by −Δ.
    Opposite,
}

pub fn reflectivity_analytic(delta: f64, gamma_d: f64, gamma_b: f64, scheme: Scheme) -> f64 {
    let num = (gamma_b - gamma_d).powi(2);
    match scheme {
        Scheme::Symmetric => num / (gamma_b * gamma_b + 4.0 * delta * delta),
        Scheme::Opposite => num / (gamma_b + 4.0 * delta * delta / gamma_d).powi(2),
    }
}

/// Half width at half maximum of the analytic reflectivity peak.
pub fn reflectivity_half_width(gamma_d: f64, gamma_b: f64, scheme: Scheme) -> f64 {
    match scheme {
        Scheme::Symmetric => 0.5 * gamma_b,
        Scheme::Opposite => 0.5 * (gamma_d * gamma_b * (2f64.sqrt() - 1.0)).sqrt(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Renormalized {
    pub gamma: f64,
    /// η√(2n̄+1) exceeded 0.3.
    pub outside_validity: bool,
}

/// γ → γ[1 − η²(2n̄+1)] + γ_e·η²(2n̄+1).
pub fn lamb_dicke_renorm(gamma: f64, eta: f64, n_th: f64) -> Renormalized {
    let x = eta * eta * (2.0 * n_th + 1.0);
    Renormalized { gamma: gamma * (1.0 - x) + x, outside_validity: x.sqrt() > 0.3 }
}

/// First-order vacancy correction ε → ε(1 − p) − (i/2)p.
pub fn defect_renorm(eps: c64, p: f64) -> Result<c64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("vacancy probability {p} outside [0, 1]")));
    }
    Ok(eps * (1.0 - p) - c64::new(0.0, 0.5 * p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Dark,
    Bright,
}

/// First-order-in-τ amplitude c(t)/c(0) of the retarded dark or bright mode.
pub fn nonmarkov_amplitudes(
    t: f64,
    big_gamma: f64,
    gamma_d: f64,
    gamma_tau: f64,
    kappa_l: f64,
    branch: Branch,
) -> Result<f64> {
    let a = (-kappa_l).exp();
    let (rate, den) = match branch {
        Branch::Dark => ((1.0 - a) * big_gamma + gamma_d, 2.0 + gamma_tau * a),
        Branch::Bright => ((1.0 + a) * big_gamma + gamma_d, 2.0 - gamma_tau * a),
    };
    if den <= 0.0 {
        return Err(Error::invalid(format!("Γτ = {gamma_tau} beyond the first-order expansion")));
    }
    Ok(2.0 * (-rate / den * t).exp() / den)
}

/// Photons in flight between the arrays, (Γτ/2)|c_d|².
pub fn photon_number(gamma_tau: f64, c_d: c64) -> f64 {
    0.5 * gamma_tau * c_d.norm_sqr()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryEmission {
    /// Release rate γ̃ of the stored excitation.
    pub rate: f64,
    /// Right-going photon flux per |c̃|².
    pub forward: f64,
    /// Left-going photon flux per |c̃|².
    pub backward: f64,
    /// Ω is not small compared with Γ(1 ± cos k₀L).
    pub outside_validity: bool,
}

/// Adiabatic release of the memory on array 1 under a drive Ω on array 1 only.
pub fn memory_emission(omega: f64, big_gamma: f64, gamma_d: f64, k0l: f64) -> Result<MemoryEmission> {
    let e2 = c64::cis(2.0 * k0l);
    let sum = big_gamma + gamma_d;
    let den = e2 * big_gamma * big_gamma - sum * sum;
    if den.norm() <= 1e-300 {
        return Err(Error::Singular("memory release denominator vanishes".into()));
    }
    let om2 = omega * omega;
    let rate = -4.0 * (om2 * sum / den).re;
    let forward = 2.0 * om2 * big_gamma * (gamma_d / den).norm_sqr();
    let backward = 2.0 * om2 * big_gamma * ((e2 * big_gamma - sum) / den).norm_sqr();
    let weakest = (big_gamma * (1.0 + k0l.cos())).abs().min((big_gamma * (1.0 - k0l.cos())).abs());
    Ok(MemoryEmission { rate, forward, backward, outside_validity: omega > 0.3 * weakest })
}

/// Laplace transform c̃₂(s) of the retarded four-mode transfer amplitude.
pub fn delayed_transfer_transform(s: c64, params: &TransferParams) -> c64 {
    let g = params.big_gamma();
    let tau = if params.gamma_tau == 0.0 { 0.0 } else { params.tau() };
    let om2 = params.omega * params.omega;
    let att = (-s * tau - params.kappa_l).exp();
    let a = 2.0 * om2 + s * (2.0 * s + g + params.gamma_d);
    2.0 * om2 * g * att / (a * a - s * s * g * g * att * att)
}

#[derive(Clone, Debug)]
pub struct LaplaceInversion {
    pub values: Vec<f64>,
    /// Largest difference from the inversion at half the frequency step.
    pub error_estimate: f64,
}

/// Numerical inverse Laplace transform of c̃₂(s) on `times` by the
/// trapezoidal rule along a vertical Bromwich line.
pub fn delayed_transfer_laplace(times: &[f64], params: &TransferParams) -> Result<LaplaceInversion> {
    params.validate()?;
    let t_end = times.iter().cloned().fold(0.0, f64::max);
    if !(t_end > 0.0) || times.iter().any(|t| *t < 0.0 || !t.is_finite()) {
        return Err(Error::invalid("times must be finite, nonnegative and not all zero"));
    }
    let f = |s: c64| delayed_transfer_transform(s, params);
    let coarse = bromwich(&f, times, t_end, 4.0)?;
    let fine = bromwich(&f, times, t_end, 8.0)?;
    let error_estimate = coarse.iter().zip(&fine).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if error_estimate > 1e-4 {
        return Err(Error::NotConverged(format!(
            "Bromwich inversion disagrees between resolutions by {error_estimate:.2e}"
        )));
    }
    Ok(LaplaceInversion { values: fine, error_estimate })
}

/// Inverts a transform of a real causal function. The period is
/// `periods·t_end`; the abscissa puts the mirrored alias at e^{−25}.
fn bromwich(f: &dyn Fn(c64) -> c64, times: &[f64], t_end: f64, periods: f64) -> Result<Vec<f64>> {
    let period = periods * t_end;
    let h = 2.0 * PI / period;
    let sigma = 25.0 / (period - 2.0 * t_end);
    // Sample until a block of terms no longer moves the result.
    let block = 4096;
    let mut samples = vec![f(c64::new(sigma, 0.0))];
    let scale = (sigma * t_end).exp() / PI * h;
    let tol = 1e-9;
    loop {
        let k0 = samples.len();
        samples.extend((k0..k0 + block).map(|k| f(c64::new(sigma, k as f64 * h))));
        let tail: f64 = samples[k0..].iter().map(|v| v.norm()).sum::<f64>() * scale;
        if tail < tol {
            break;
        }
        if samples.len() > 1 << 24 {
            return Err(Error::NotConverged("Bromwich series did not converge".into()));
        }
    }
    Ok(times
        .iter()
        .map(|&t| {
            let step = c64::cis(h * t);
            let mut phase = c64::new(1.0, 0.0);
            let mut acc = 0.5 * samples[0].re;
            for (k, v) in samples.iter().enumerate().skip(1) {
                phase *= step;
                if k % 256 == 0 {
                    phase = c64::cis(h * t * k as f64);
                }
                acc += (v * phase).re;
            }
            (sigma * t).exp() / PI * h * acc
        })
        .collect())
}
